//! Natural cubic spline interpolation.

use crate::error::{Error, Result};

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored. The system must be diagonally
/// dominant, which holds for the spline moment equations.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    let mut c_prime = vec![0.0; n];
    let mut denom = diag[0];
    c_prime[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_prime[i - 1];
        c_prime[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
}

/// Cubic spline with zero second derivative at both end knots.
///
/// Outside the knot range the spline continues linearly, which is the
/// natural extension of the end conditions.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    moments: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Shape {
                context: "spline knots",
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewKnots(n));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let mut moments = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut lower = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                lower[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
            moments[1..n - 1].copy_from_slice(&rhs);
        }
        Ok(NaturalCubicSpline { xs, ys, moments })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// Second derivatives at the knots.
    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.end_slope(0) * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.end_slope(n - 1) * (x - self.xs[n - 1]);
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        self.eval_segment(i, x)
    }

    fn eval_segment(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.moments[i] + (b * b * b - b) * self.moments[i + 1]) * h * h
                / 6.0
    }

    fn end_slope(&self, knot: usize) -> f64 {
        let n = self.xs.len();
        if knot == 0 {
            let h = self.xs[1] - self.xs[0];
            (self.ys[1] - self.ys[0]) / h - h * (2.0 * self.moments[0] + self.moments[1]) / 6.0
        } else {
            let h = self.xs[n - 1] - self.xs[n - 2];
            (self.ys[n - 1] - self.ys[n - 2]) / h
                + h * (self.moments[n - 2] + 2.0 * self.moments[n - 1]) / 6.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    /// Independent oracle: fit each segment's cubic `c0 + c1 t + c2 t^2 + c3 t^3`
    /// (t measured from the left knot) by imposing interpolation, C1/C2
    /// continuity and zero curvature at the ends as one dense system.
    fn brute_force_spline(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let segs = xs.len() - 1;
        let n = 4 * segs;
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        let mut row = 0;
        for s in 0..segs {
            let h = xs[s + 1] - xs[s];
            a[row][4 * s] = 1.0;
            b[row] = ys[s];
            row += 1;
            for p in 0..4 {
                a[row][4 * s + p] = h.powi(p as i32);
            }
            b[row] = ys[s + 1];
            row += 1;
        }
        for s in 0..segs - 1 {
            let h = xs[s + 1] - xs[s];
            a[row][4 * s + 1] = 1.0;
            a[row][4 * s + 2] = 2.0 * h;
            a[row][4 * s + 3] = 3.0 * h * h;
            a[row][4 * (s + 1) + 1] = -1.0;
            row += 1;
            a[row][4 * s + 2] = 2.0;
            a[row][4 * s + 3] = 6.0 * h;
            a[row][4 * (s + 1) + 2] = -2.0;
            row += 1;
        }
        a[row][2] = 2.0;
        row += 1;
        let h = xs[segs] - xs[segs - 1];
        a[row][4 * (segs - 1) + 2] = 2.0;
        a[row][4 * (segs - 1) + 3] = 6.0 * h;
        let c = dense_solve(a, b);
        let s = (0..segs).find(|&s| x <= xs[s + 1]).unwrap_or(segs - 1);
        let t = x - xs[s];
        c[4 * s] + c[4 * s + 1] * t + c[4 * s + 2] * t * t + c[4 * s + 3] * t * t * t
    }

    #[test]
    fn three_knot_value_matches_oracle() {
        let xs = vec![0.0, 1.0, 2.0];
        let ys = vec![1.0, 3.0, 2.0];
        let oracle = brute_force_spline(&xs, &ys, 0.5);
        // hand solution: m1 = -4.5, S(0.5) = 2 + 0.375 * 4.5 / 6
        assert!((oracle - 2.28125).abs() < 1e-12);
        let s = NaturalCubicSpline::new(xs, ys).unwrap();
        assert!((s.moments()[1] + 4.5).abs() < 1e-12);
        assert!((s.eval(0.5) - oracle).abs() < 1e-12);
    }

    #[test]
    fn irregular_knots_match_oracle() {
        let xs = vec![-3.0, 0.0, 1.0, 4.0, 5.5, 9.0];
        let ys = vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.25];
        let s = NaturalCubicSpline::new(xs.clone(), ys.clone()).unwrap();
        for i in 0..=48 {
            let x = -3.0 + 12.0 * i as f64 / 48.0;
            assert!((s.eval(x) - brute_force_spline(&xs, &ys, x)).abs() < 1e-10);
        }
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_linear_data() {
        let s = NaturalCubicSpline::new(vec![0.0, 2.0, 4.0], vec![0.0, 2.0, 4.0]).unwrap();
        for i in 0..=4 {
            assert!((s.eval(i as f64) - i as f64).abs() < 1e-12);
        }
        // linear continuation past the ends
        assert!((s.eval(6.0) - 6.0).abs() < 1e-12);
        assert!((s.eval(-1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_knots() {
        assert!(matches!(
            NaturalCubicSpline::new(vec![1.0], vec![1.0]),
            Err(Error::TooFewKnots(1))
        ));
        assert!(NaturalCubicSpline::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior local extrema of a sampled signal.
///
/// Plateaus are reported once, at their lower-midpoint index. Extrema touching
/// either end of the signal are not interior and are never reported.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl ExtremaSet {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }

    /// All extrema in index order.
    pub fn merged(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.maxima.iter().chain(&self.minima).copied().collect();
        all.sort_unstable();
        all
    }
}

pub fn find_extrema(values: &[f64]) -> Result<ExtremaSet> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "extrema detection needs at least 3 samples, got {n}"
        )));
    }
    let mut set = ExtremaSet::default();
    let mut i = 1;
    while i < n - 1 {
        let prev = values[i - 1];
        let here = values[i];
        // plateau glued to the left edge
        if here == prev {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && values[j + 1] == here {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let next = values[j + 1];
        let mid = i + (j - i) / 2;
        if here > prev && here > next {
            set.maxima.push(mid);
        } else if here < prev && here < next {
            set.minima.push(mid);
        }
        i = j + 1;
    }
    Ok(set)
}

/// Counts sign changes, skipping exact zeros so that a zero run between
/// opposite signs counts once.
pub fn count_zero_crossings(values: &[f64]) -> usize {
    let mut last_sign = 0.0;
    let mut crossings = 0;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            crossings += 1;
        }
        last_sign = s;
    }
    crossings
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alternating() {
        let e = find_extrema(&[0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.maxima, vec![1, 3]);
        assert_eq!(e.minima, vec![2]);
    }

    #[test]
    fn plateau_lower_midpoint() {
        let e = find_extrema(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.maxima, vec![1]);
        assert!(e.minima.is_empty());
        let e = find_extrema(&[0.0, 1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.maxima, vec![2]);
        let e = find_extrema(&[3.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.minima, vec![2]);
    }

    #[test]
    fn monotone_and_edges() {
        assert_eq!(find_extrema(&[1.0, 2.0, 3.0, 4.0]).unwrap().count(), 0);
        // rising into a plateau that reaches the end is not an extremum
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0]).unwrap().count(), 0);
        assert_eq!(find_extrema(&[1.0, 1.0, 0.0, 1.0]).unwrap().minima, vec![2]);
        assert!(find_extrema(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_crossings() {
        assert_eq!(count_zero_crossings(&[1.0, -1.0, 1.0, -1.0]), 3);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, -1.0]), 1);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, 0.0, 1.0]), 0);
        assert_eq!(count_zero_crossings(&[2.0, 3.0, 4.0]), 0);
    }

    proptest! {
        #[test]
        fn extrema_interleave(values in prop::collection::vec(-5i32..5, 3..80)) {
            let v: Vec<f64> = values.into_iter().map(f64::from).collect();
            let e = find_extrema(&v).unwrap();
            let merged = e.merged();
            prop_assert!(merged.windows(2).all(|w| w[0] < w[1]));
            for w in merged.windows(2) {
                prop_assert_ne!(e.maxima.contains(&w[0]), e.maxima.contains(&w[1]));
            }
        }
    }
}

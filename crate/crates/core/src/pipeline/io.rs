//! File formats: price CSV input, decomposition and prediction CSVs, JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::emd::Decomposition;
use crate::error::{Error, Result};
use crate::series::{ChannelMatrix, Series, Timestamp};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Reads `column` from a headered CSV, with timestamps from a `Date` column
/// when present and integer ticks otherwise.
///
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn load_csv(path: &Path, column: &str) -> Result<Series> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let value_col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            column: column.to_string(),
            available: headers.clone(),
        })?;
    let date_col = headers.iter().position(|h| h.eq_ignore_ascii_case("date"));

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let parse_err = |message: String| Error::Parse {
            path: path_str(path),
            row,
            message,
        };
        let raw = record.get(value_col).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| parse_err(format!("cannot parse `{raw}` in column `{column}` as a number")))?;
        if !value.is_finite() {
            return Err(parse_err(format!("non-finite value `{raw}`")));
        }
        let ts = match date_col {
            Some(c) => {
                let raw = record.get(c).unwrap_or("");
                Timestamp::parse(raw).ok_or_else(|| parse_err(format!("cannot parse date `{raw}`")))?
            }
            None => Timestamp::Tick(i as i64),
        };
        if timestamps.last().is_some_and(|prev| *prev >= ts) {
            return Err(Error::NonIncreasingTimestamp {
                path: path_str(path),
                row,
            });
        }
        timestamps.push(ts);
        values.push(value);
    }
    Series::new(column, timestamps, values)
}

/// Writes `values` as a `Date,<column>` CSV that `load_csv` reads back.
pub fn write_series_csv(path: &Path, series: &Series) -> Result<()> {
    let mut out = String::new();
    let date_header = match series.timestamps().first() {
        Some(Timestamp::Date(_)) => "Date",
        _ => "t",
    };
    out.push_str(&format!("{date_header},{}\n", series.name()));
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        out.push_str(&format!("{t},{v}\n"));
    }
    write_text(path, &out)
}

/// `t,original,imf_1,…,imf_K,residual` with shortest round-trip floats.
pub fn write_decomposition_csv(path: &Path, series: &Series, decomposition: &Decomposition) -> Result<()> {
    let names = decomposition.channel_names(true);
    let mut out = format!("t,original,{}\n", names.join(","));
    for t in 0..series.len() {
        out.push_str(&format!("{},{}", series.timestamps()[t], series.values()[t]));
        for imf in &decomposition.imfs {
            out.push_str(&format!(",{}", imf[t]));
        }
        out.push_str(&format!(",{}\n", decomposition.residual[t]));
    }
    write_text(path, &out)
}

/// Reads a decomposition CSV back into the original series (named `name`)
/// and every channel, residual last.
pub fn read_decomposition_csv(path: &Path, name: &str) -> Result<(Series, ChannelMatrix)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 3 || headers[0] != "t" || headers[1] != "original" {
        return Err(Error::Parse {
            path: path_str(path),
            row: 1,
            message: "expected header `t,original,<channels…>`".into(),
        });
    }
    let channel_names = headers[2..].to_vec();
    let mut timestamps = Vec::new();
    let mut original = Vec::new();
    let mut columns = vec![Vec::new(); channel_names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let parse_err = |message: String| Error::Parse {
            path: path_str(path),
            row,
            message,
        };
        let ts = Timestamp::parse(&record[0]).ok_or_else(|| parse_err(format!("bad timestamp `{}`", &record[0])))?;
        timestamps.push(ts);
        let mut fields = record.iter().skip(1).map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(format!("cannot parse `{f}` as a number")))
        });
        original.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        for col in columns.iter_mut() {
            col.push(
                fields
                    .next()
                    .transpose()?
                    .ok_or_else(|| parse_err("missing channel value".into()))?,
            );
        }
    }
    let series = Series::new(name, timestamps, original)?;
    Ok((series, ChannelMatrix::new(channel_names, columns)?))
}

pub fn write_predictions_csv(path: &Path, times: &[Timestamp], actual: &[f64], predicted: &[f64]) -> Result<()> {
    let mut out = String::from("t,actual,predicted\n");
    for ((t, a), p) in times.iter().zip(actual).zip(predicted) {
        out.push_str(&format!("{t},{a},{p}\n"));
    }
    write_text(path, &out)
}

/// Reads `t,actual,predicted` back as (timestamps, actual, predicted).
pub fn read_predictions_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let (mut t, mut a, mut p) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let num = |f: &str| {
            f.parse::<f64>().map_err(|_| Error::Parse {
                path: path_str(path),
                row: i + 2,
                message: format!("cannot parse `{f}` as a number"),
            })
        };
        if record.len() != 3 {
            return Err(Error::Parse {
                path: path_str(path),
                row: i + 2,
                message: "expected 3 fields".into(),
            });
        }
        t.push(record[0].to_string());
        a.push(num(&record[1])?);
        p.push(num(&record[2])?);
    }
    Ok((t, a, p))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

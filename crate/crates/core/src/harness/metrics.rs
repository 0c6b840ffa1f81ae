//! Per-tick metric rows and their CSV encoding.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the CSV column layout, recorded in the JSON report.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 11] = [
    "tick",
    "train_err_mean",
    "test_err_mean",
    "train_err_gibbs",
    "test_err_gibbs",
    "pac_bound",
    "h_bound",
    "c_bound",
    "kl_estimate",
    "epsilon",
    "wall_seconds",
];

/// Metrics at one bound-evaluation tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: usize,
    pub train_err_mean: f64,
    pub test_err_mean: f64,
    pub train_err_gibbs: f64,
    pub test_err_gibbs: f64,
    pub pac_bound: f64,
    pub h_bound: f64,
    pub c_bound: f64,
    /// NaN when the posterior has no Gaussian prior.
    pub kl_estimate: f64,
    pub epsilon: f64,
    pub wall_seconds: f64,
}

/// Formats a float with nine significant digits, shortest form.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

impl MetricsRow {
    pub fn fields(&self) -> Vec<String> {
        let mut out = vec![self.tick.to_string()];
        out.extend(
            [
                self.train_err_mean,
                self.test_err_mean,
                self.train_err_gibbs,
                self.test_err_gibbs,
                self.pac_bound,
                self.h_bound,
                self.c_bound,
                self.kl_estimate,
                self.epsilon,
                self.wall_seconds,
            ]
            .into_iter()
            .map(format_float),
        );
        out
    }
}

/// CSV file that is flushed after every row so a crash leaves complete lines.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut sink = CsvSink {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(file),
        };
        sink.write(header)?;
        Ok(sink)
    }

    pub fn write<I, S>(&mut self, record: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let io = |e: std::io::Error| Error::io(&self.path, e);
        self.writer.write_record(record).map_err(|e| io(e.into()))?;
        self.writer.flush().map_err(io)?;
        self.writer.get_ref().sync_data().map_err(io)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Writes `value` as pretty JSON, replacing the file atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(0.032_659_863_237_109_04), "0.0326598632");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(123_456_789_123.0), "123456789000");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn rows_are_flushed_immediately() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut sink = CsvSink::create(&path, &METRICS_HEADER).unwrap();
        let row = MetricsRow {
            tick: 1,
            train_err_mean: 0.5,
            test_err_mean: 0.5,
            train_err_gibbs: 0.5,
            test_err_gibbs: 0.5,
            pac_bound: 1.0,
            h_bound: 1.0,
            c_bound: 1.0,
            kl_estimate: f64::NAN,
            epsilon: f64::INFINITY,
            wall_seconds: 0.0,
        };
        sink.write(row.fields()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "1,0.5,0.5,0.5,0.5,1,1,1,nan,inf,0"
        );
    }
}

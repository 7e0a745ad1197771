//! CSV tables written by the commands, each with a reader that parses them back.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// One penetration run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub medium: String,
    pub voltage_v: f64,
    pub frequency_hz: f64,
    pub accel_amplitude_m_s2: f64,
    pub gamma: f64,
    pub onset_depth_m: f64,
    /// Empty when the probe reached full depth without stalling.
    pub stall_depth_m: Option<f64>,
    pub samples: usize,
}

/// Dominant tone of one accelerometer file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationRow {
    pub file: String,
    pub label: String,
    pub sample_rate_hz: f64,
    pub samples: usize,
    pub frequency_hz: f64,
    pub amplitude_m_s2: f64,
}

/// Per-label mean over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationSummaryRow {
    pub label: String,
    pub trials: usize,
    pub frequency_hz: f64,
    pub amplitude_m_s2: f64,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Parses rows written by [`to_csv`]; errors carry the file and line.
pub fn from_csv<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let rec: T = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            granusense::Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        rows.push(rec);
    }
    Ok(rows)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use granusense::classify::EpochLog;

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            SweepRow {
                medium: "sand".into(),
                voltage_v: 0.0,
                frequency_hz: 0.0,
                accel_amplitude_m_s2: 0.0,
                gamma: 0.0,
                onset_depth_m: 0.01,
                stall_depth_m: Some(0.0512345678901234),
                samples: 3,
            },
            SweepRow {
                medium: "rice".into(),
                voltage_v: 10.0,
                frequency_hz: 213.0,
                accel_amplitude_m_s2: 23.6,
                gamma: 2.405708460754332,
                onset_depth_m: 0.05,
                stall_depth_m: None,
                samples: 7,
            },
        ];
        let text = to_csv(&rows).unwrap();
        assert_eq!(from_csv::<SweepRow>(&text, Path::new("x")).unwrap(), rows);

        let log = vec![EpochLog {
            epoch: 1,
            learning_rate: 0.05,
            train_loss: 1.0 / 3.0,
            train_accuracy: 0.5,
            val_loss: 0.1,
            val_accuracy: 0.9,
        }];
        assert_eq!(
            from_csv::<EpochLog>(&to_csv(&log).unwrap(), Path::new("x")).unwrap(),
            log
        );
    }

    #[test]
    fn bad_row_reports_line() {
        let text = "label,trials,frequency_hz,amplitude_m_s2\n6V,2,156,9.6\n8V,x,189,19.8\n";
        let err = from_csv::<VibrationSummaryRow>(text, Path::new("s.csv")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}

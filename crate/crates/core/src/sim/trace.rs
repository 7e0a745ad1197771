use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["time_s", "depth_m", "force_n"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub time: f64,
    pub depth: f64,
    pub force: f64,
}

/// Samples from one penetration run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceTrace {
    pub samples: Vec<ForceSample>,
    pub stalled: bool,
    pub stall_depth: Option<f64>,
}

impl ForceTrace {
    pub fn forces(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.force).collect()
    }

    /// Same time/depth axis with the force column replaced.
    pub fn with_forces(&self, forces: &[f64]) -> ForceTrace {
        assert_eq!(forces.len(), self.samples.len());
        ForceTrace {
            samples: self
                .samples
                .iter()
                .zip(forces)
                .map(|(s, &force)| ForceSample { force, ..*s })
                .collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(CSV_HEADER)?;
        for s in &self.samples {
            wtr.write_record([s.time.to_string(), s.depth.to_string(), s.force.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Reads samples back; stall state is not part of the CSV.
    pub fn read_csv<R: Read>(r: R, path: &Path) -> Result<Vec<ForceSample>> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| parse_err(path, 1, e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(parse_err(
                path,
                1,
                format!("expected header {}", CSV_HEADER.join(",")),
            ));
        }
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(path, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| parse_err(path, line, format!("bad {} value", CSV_HEADER[i])))
            };
            out.push(ForceSample {
                time: field(0)?,
                depth: field(1)?,
                force: field(2)?,
            });
        }
        Ok(out)
    }
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = ForceTrace {
            samples: vec![
                ForceSample {
                    time: 0.0,
                    depth: 0.0,
                    force: 0.0,
                },
                ForceSample {
                    time: 0.002,
                    depth: 4e-6,
                    force: 0.123456789012345,
                },
            ],
            stalled: false,
            stall_depth: None,
        };
        let text = t.to_csv_string();
        assert!(text.starts_with("time_s,depth_m,force_n\n"));
        let back = ForceTrace::read_csv(text.as_bytes(), Path::new("x.csv")).unwrap();
        assert_eq!(back, t.samples);
    }

    #[test]
    fn bad_row_reports_line() {
        let text = "time_s,depth_m,force_n\n0,0,0\n1,abc,2\n";
        match ForceTrace::read_csv(text.as_bytes(), Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}

//! Output directories, run records and failure markers.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const RUN_RECORD: &str = "run.json";
pub const FAILED_MARKER: &str = "FAILED";

/// Invalid configuration or usage; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Exit status for an error chain: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        e.is::<ConfigError>()
            || e.is::<toml::de::Error>()
            || matches!(
                e.downcast_ref::<granusense::Error>(),
                Some(granusense::Error::Config(_))
            )
    });
    if config {
        2
    } else {
        1
    }
}

/// Written next to the outputs of every successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub deterministic: bool,
    /// Unix seconds; omitted in deterministic mode so reruns are byte-identical.
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// An output directory being filled by one command.
pub struct Run {
    pub command: &'static str,
    pub dir: PathBuf,
    /// Declared outputs, relative to `dir`. Directories end in `/`.
    pub outputs: Vec<String>,
    deterministic: bool,
    started: Option<u64>,
    stage: &'static str,
}

impl Run {
    /// Prepares `dir` for the declared outputs.
    ///
    /// A nonempty directory is refused unless `force` is set, in which case
    /// only the declared outputs, the run record and any failure marker are
    /// removed.
    pub fn begin(
        command: &'static str,
        dir: &Path,
        outputs: Vec<String>,
        force: bool,
        deterministic: bool,
    ) -> Result<Run> {
        let nonempty = dir
            .read_dir()
            .map(|mut it| it.next().is_some())
            .unwrap_or(false);
        if dir.exists() && !dir.is_dir() {
            return Err(config_error(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        if nonempty {
            if !force {
                return Err(config_error(format!(
                    "output directory {} is not empty; pass --force to overwrite it",
                    dir.display()
                )));
            }
            let extra = [RUN_RECORD.to_string(), FAILED_MARKER.to_string()];
            for rel in outputs.iter().chain(&extra) {
                let p = dir.join(rel.trim_end_matches('/'));
                let res = if p.is_dir() {
                    std::fs::remove_dir_all(&p)
                } else if p.exists() {
                    std::fs::remove_file(&p)
                } else {
                    Ok(())
                };
                res.with_context(|| format!("removing {}", p.display()))?;
            }
        }
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            command,
            dir: dir.to_path_buf(),
            outputs,
            deterministic,
            started: (!deterministic).then(now_unix),
            stage: "setup",
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// Runs one named stage; its name is recorded in the failure marker if it fails.
    pub fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&Run) -> Result<T>) -> Result<T> {
        self.stage = name;
        f(self).with_context(|| format!("stage {name} failed"))
    }

    /// Leaves a marker describing the failure; earlier outputs stay in place.
    pub fn fail(&self, err: &anyhow::Error) {
        let text = format!("stage: {}\nerror: {err:#}\n", self.stage);
        let _ = std::fs::write(self.dir.join(FAILED_MARKER), text);
    }

    /// Checks that every declared output exists and writes the run record.
    pub fn finish(self, config_hash: String, seed: u64) -> Result<RunRecord> {
        let missing: Vec<&String> = self
            .outputs
            .iter()
            .filter(|rel| !self.dir.join(rel.trim_end_matches('/')).exists())
            .collect();
        if !missing.is_empty() {
            let err = anyhow::anyhow!("declared outputs were not written: {missing:?}");
            self.fail(&err);
            return Err(err);
        }
        let record = RunRecord {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            deterministic: self.deterministic,
            started_unix: self.started,
            finished_unix: (!self.deterministic).then(now_unix),
            outputs: self.outputs.clone(),
        };
        let json = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
        self.write(RUN_RECORD, json)?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonempty_dir_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a.csv"), "x").unwrap();
        std::fs::write(tmp.path().join("keep.txt"), "x").unwrap();
        let err = Run::begin("t", tmp.path(), vec!["a.csv".into()], false, true)
            .err()
            .unwrap();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("--force"));
        Run::begin("t", tmp.path(), vec!["a.csv".into()], true, true).unwrap();
        assert!(!tmp.path().join("a.csv").exists());
        assert!(tmp.path().join("keep.txt").exists());
    }

    #[test]
    fn finish_requires_declared_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("o");
        let run = Run::begin("t", &out, vec!["a.csv".into()], false, true).unwrap();
        assert!(run.finish("h".into(), 1).is_err());
        assert!(out.join(FAILED_MARKER).exists());

        let run = Run::begin(
            "t",
            &tmp.path().join("p"),
            vec!["a.csv".into()],
            false,
            true,
        )
        .unwrap();
        run.write("a.csv", "1").unwrap();
        let rec = run.finish("h".into(), 1).unwrap();
        assert_eq!(rec.started_unix, None);
        assert_eq!(
            RunRecord::load(&tmp.path().join("p").join(RUN_RECORD)).unwrap(),
            rec
        );
    }

    #[test]
    fn failing_stage_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = Run::begin("t", tmp.path(), vec![], false, true).unwrap();
        let err = run
            .stage("train", |_| -> Result<()> { anyhow::bail!("boom") })
            .unwrap_err();
        run.fail(&err);
        let marker = std::fs::read_to_string(tmp.path().join(FAILED_MARKER)).unwrap();
        assert!(
            marker.contains("stage: train") && marker.contains("boom"),
            "{marker}"
        );
    }
}

//! `synth-accel` and `analyze-vibration`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use granusense::dsp::{read_series_csv, spectral_peak, synth_tone, write_series_csv};
use granusense::seed;

use super::penetration::volt_tag;
use crate::config::{profile_for, SynthAccelConfig};
use crate::run::{config_error, Run};
use crate::tables::{to_csv, VibrationRow, VibrationSummaryRow};

pub const TABLE: &str = "vibration_table.csv";
pub const SUMMARY: &str = "vibration_summary.csv";

pub fn synth_file_name(voltage: f64, trial: usize) -> String {
    format!("accel_{}_trial{trial}.csv", volt_tag(voltage))
}

pub fn synth_outputs(cfg: &SynthAccelConfig) -> Vec<String> {
    cfg.voltages
        .iter()
        .flat_map(|&v| (1..=cfg.trials).map(move |k| synth_file_name(v, k)))
        .collect()
}

/// Accelerometer traces of the tip: the measured tone per voltage plus white
/// noise at the configured SNR, one file per trial.
pub fn synth(run: &mut Run, cfg: &SynthAccelConfig, base_seed: u64) -> Result<()> {
    run.stage("synthesize", |run| {
        for (i, &v) in cfg.voltages.iter().enumerate() {
            let p = profile_for(v, &format!("synth_accel.voltages[{i}]"))?;
            for k in 1..=cfg.trials {
                let s = seed::derive(base_seed, &[v.to_bits(), k as u64]);
                let series = synth_tone(
                    p.frequency,
                    p.accel_amplitude,
                    cfg.sample_rate_hz,
                    cfg.duration_s,
                    cfg.snr_db,
                    s,
                )?;
                let meta = BTreeMap::from([
                    ("label".to_string(), volt_tag(v)),
                    ("tone_hz".to_string(), p.frequency.to_string()),
                    ("trial".to_string(), k.to_string()),
                ]);
                let mut buf = Vec::new();
                write_series_csv(&mut buf, &series, &meta)?;
                run.write(&synth_file_name(v, k), buf)?;
            }
        }
        Ok(())
    })
}

/// Splits digit runs out as numbers so `6V` sorts before `10V`.
fn natural_key(s: &str) -> Vec<(String, u64)> {
    let mut key = Vec::new();
    let mut text = String::new();
    let mut digits = String::new();
    for c in s.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
        } else {
            if !digits.is_empty() {
                key.push((
                    std::mem::take(&mut text),
                    digits.parse().unwrap_or(u64::MAX),
                ));
                digits.clear();
            }
            text.push(c);
        }
    }
    key.push((text, digits.parse().unwrap_or(0)));
    key
}

/// Files named directly plus the `*.csv` files of named directories, in
/// natural order.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort_by_key(|p| natural_key(&p.to_string_lossy()));
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(config_error(
            "analyze-vibration needs at least one input series",
        ));
    }
    Ok(files)
}

/// Label from a `# label=` comment, else the file stem up to `_trial`.
fn label_for(path: &Path, meta: &BTreeMap<String, String>) -> String {
    if let Some(l) = meta.get("label") {
        return l.clone();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.find("_trial") {
        Some(i) => stem[..i].to_string(),
        None => stem,
    }
}

/// Per-file peaks and per-label averages, labels in order of first appearance.
pub fn analyze_files(files: &[PathBuf]) -> Result<(Vec<VibrationRow>, Vec<VibrationSummaryRow>)> {
    let mut rows = Vec::new();
    for f in files {
        let sf = read_series_csv(f)?;
        let peak = spectral_peak(&sf.series).with_context(|| f.display().to_string())?;
        rows.push(VibrationRow {
            file: f
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            label: label_for(f, &sf.metadata),
            sample_rate_hz: sf.series.sample_rate,
            samples: sf.series.len(),
            frequency_hz: peak.frequency,
            amplitude_m_s2: peak.amplitude,
        });
    }
    let mut summary: Vec<VibrationSummaryRow> = Vec::new();
    for r in &rows {
        match summary.iter_mut().find(|s| s.label == r.label) {
            Some(s) => {
                s.trials += 1;
                s.frequency_hz += r.frequency_hz;
                s.amplitude_m_s2 += r.amplitude_m_s2;
            }
            None => summary.push(VibrationSummaryRow {
                label: r.label.clone(),
                trials: 1,
                frequency_hz: r.frequency_hz,
                amplitude_m_s2: r.amplitude_m_s2,
            }),
        }
    }
    for s in &mut summary {
        s.frequency_hz /= s.trials as f64;
        s.amplitude_m_s2 /= s.trials as f64;
    }
    Ok((rows, summary))
}

pub fn analyze(run: &mut Run, files: &[PathBuf]) -> Result<Vec<VibrationSummaryRow>> {
    let (rows, summary) = run.stage("analyze", |_| analyze_files(files))?;
    run.stage("write", |run| {
        run.write(TABLE, to_csv(&rows)?)?;
        run.write(SUMMARY, to_csv(&summary)?)?;
        Ok(())
    })?;
    Ok(summary)
}

//! `penetrate` and `vibration-sweep`.

use anyhow::Result;
use granusense::dsp::{exp_filter, TimeSeries};
use granusense::seed;
use granusense::sim::{
    dimensionless_acceleration, onset_depth, simulate_penetration, Calibration, ForceTrace,
    PenetrationConfig, VibrationProfile,
};
use rayon::prelude::*;

use crate::config::{profile_for, ExperimentConfig};
use crate::plot::{line_chart, Series};
use crate::run::Run;
use crate::tables::{to_csv, SweepRow};

pub const SWEEP_SUMMARY: &str = "sweep_summary.csv";

/// `10V`, `0V`, `7.5V`.
pub fn volt_tag(v: f64) -> String {
    format!("{v}V")
}

fn name_tag(name: &str) -> u64 {
    name.bytes().fold(0, |h, b| seed::mix64(h ^ b as u64))
}

/// Noise seed for one (medium, voltage) run.
pub fn run_seed(base: u64, medium: &str, voltage: f64) -> u64 {
    seed::derive(base, &[name_tag(medium), voltage.to_bits()])
}

struct RunResult {
    raw: ForceTrace,
    smoothed: ForceTrace,
    row: SweepRow,
}

fn penetrate_one(
    cal: &Calibration,
    medium: &str,
    vib: &VibrationProfile,
    sim: &PenetrationConfig,
    alpha: f64,
    base_seed: u64,
) -> Result<RunResult> {
    let spec = cal.medium(medium)?;
    let raw = simulate_penetration(
        spec,
        &cal.probe,
        vib,
        sim,
        run_seed(base_seed, medium, vib.voltage),
    )?;
    let series = TimeSeries::new(sim.sample_rate, raw.forces())?;
    let smoothed = raw.with_forces(&exp_filter(&series, alpha)?.values);
    let row = SweepRow {
        medium: medium.to_string(),
        voltage_v: vib.voltage,
        frequency_hz: vib.frequency,
        accel_amplitude_m_s2: vib.accel_amplitude,
        gamma: dimensionless_acceleration(vib),
        onset_depth_m: onset_depth(spec, vib),
        stall_depth_m: raw.stall_depth,
        samples: raw.samples.len(),
    };
    Ok(RunResult { raw, smoothed, row })
}

/// At most ~`max` evenly strided points of force against depth in cm.
fn depth_series(name: String, trace: &ForceTrace, max: usize) -> Series {
    let step = trace.samples.len().div_ceil(max).max(1);
    let mut points: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .step_by(step)
        .map(|s| (s.depth * 100.0, s.force))
        .collect();
    if let Some(last) = trace.samples.last() {
        if !(trace.samples.len() - 1).is_multiple_of(step) {
            points.push((last.depth * 100.0, last.force));
        }
    }
    Series { name, points }
}

pub fn penetrate_outputs() -> Vec<String> {
    vec![
        "trace_raw.csv".into(),
        "trace_smoothed.csv".into(),
        "force_depth.svg".into(),
    ]
}

pub fn penetrate(run: &mut Run, cfg: &ExperimentConfig) -> Result<SweepRow> {
    let cal = cfg.calibration()?;
    let p = &cfg.penetrate;
    let vib = profile_for(p.voltage, "penetrate.voltage")?;
    let r = run.stage("simulate", |_| {
        penetrate_one(
            &cal,
            &p.medium,
            &vib,
            &p.simulation,
            p.filter_alpha,
            cfg.seed,
        )
    })?;
    run.stage("write", |run| {
        run.write("trace_raw.csv", r.raw.to_csv_string())?;
        run.write("trace_smoothed.csv", r.smoothed.to_csv_string())?;
        let series = [
            depth_series("raw".into(), &r.raw, 1500),
            depth_series(
                format!("smoothed (α = {})", p.filter_alpha),
                &r.smoothed,
                1500,
            ),
        ];
        let title = format!("{} at {} V", p.medium, p.voltage);
        run.write(
            "force_depth.svg",
            line_chart(&title, "depth (cm)", "force (N)", &series),
        )?;
        Ok(())
    })?;
    Ok(r.row)
}

pub fn sweep_outputs(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    for m in &cfg.sweep.media {
        for &v in &cfg.sweep.voltages {
            out.push(format!("{m}_{}.csv", volt_tag(v)));
        }
        out.push(format!("{m}_force_depth.svg"));
    }
    out.push(SWEEP_SUMMARY.into());
    out
}

/// One smoothed run per (medium, voltage), an overlay plot per medium and a
/// summary of stall depths.
pub fn sweep(run: &mut Run, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cal = cfg.calibration()?;
    let s = &cfg.sweep;
    let jobs: Vec<(String, VibrationProfile)> = s
        .media
        .iter()
        .flat_map(|m| {
            s.voltages
                .iter()
                .enumerate()
                .map(move |(i, &v)| (m.clone(), i, v))
        })
        .map(|(m, i, v)| Ok((m, profile_for(v, &format!("sweep.voltages[{i}]"))?)))
        .collect::<Result<_>>()?;
    let results: Vec<RunResult> = run.stage("simulate", |_| {
        jobs.par_iter()
            .map(|(m, vib)| penetrate_one(&cal, m, vib, &s.simulation, s.filter_alpha, cfg.seed))
            .collect()
    })?;
    run.stage("write", |run| {
        for m in &s.media {
            let mut series = Vec::new();
            for r in results.iter().filter(|r| &r.row.medium == m) {
                run.write(
                    &format!("{m}_{}.csv", volt_tag(r.row.voltage_v)),
                    r.smoothed.to_csv_string(),
                )?;
                series.push(depth_series(
                    format!("{} V", r.row.voltage_v),
                    &r.smoothed,
                    800,
                ));
            }
            let title = format!("{m}: smoothed force during descent");
            run.write(
                &format!("{m}_force_depth.svg"),
                line_chart(&title, "depth (cm)", "force (N)", &series),
            )?;
        }
        let rows: Vec<SweepRow> = results.iter().map(|r| r.row.clone()).collect();
        run.write(SWEEP_SUMMARY, to_csv(&rows)?)?;
        Ok(())
    })?;
    Ok(results.into_iter().map(|r| r.row).collect())
}

/// stall(vibrated)/stall(still) per medium, when both runs stalled.
pub fn stall_ratios(rows: &[SweepRow], vibrated_v: f64) -> Vec<(String, Option<f64>)> {
    let mut media: Vec<&str> = Vec::new();
    for r in rows {
        if !media.contains(&r.medium.as_str()) {
            media.push(&r.medium);
        }
    }
    media
        .into_iter()
        .map(|m| {
            let stall = |v: f64| {
                rows.iter()
                    .find(|r| r.medium == m && r.voltage_v == v)
                    .and_then(|r| r.stall_depth_m)
            };
            let ratio = match (stall(vibrated_v), stall(0.0)) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            (m.to_string(), ratio)
        })
        .collect()
}

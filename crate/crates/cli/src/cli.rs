//! Argument parsing and command dispatch.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use granusense::classify::Split;

use crate::commands::{classify, penetration, vibration};
use crate::config::ExperimentConfig;
use crate::run::{config_error, Run};

/// Annotated default configuration printed by `--print-defaults`.
pub const DEFAULTS_TOML: &str = include_str!("../defaults.toml");

#[derive(Debug, Parser)]
#[command(
    name = "granusense",
    version,
    about = "Granular penetration and tactile classification experiments"
)]
pub struct Cli {
    /// Experiment configuration (TOML). Missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: runs/<command>].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Replace the outputs of an earlier run in the output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Print the resolved configuration and planned outputs, then exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// One worker thread and no timestamps in run.json.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Print the documented default configuration and exit.
    #[arg(long)]
    pub print_defaults: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// One penetration run, raw and smoothed.
    Penetrate {
        #[arg(long)]
        medium: Option<String>,
        /// Drive voltage; 0 for a still probe.
        #[arg(long)]
        voltage: Option<f64>,
    },
    /// Penetration runs for every configured medium and voltage.
    VibrationSweep,
    /// Writes synthetic accelerometer recordings of the vibrating tip.
    SynthAccel,
    /// Fundamental frequency and amplitude of accelerometer CSVs.
    AnalyzeVibration {
        /// CSV files or directories of CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Renders the labeled tactile image corpus.
    GenDataset,
    /// Trains the classifier on a generated dataset.
    Train {
        /// Dataset directory or its manifest.jsonl.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Confusion matrix of a trained model on one split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
    /// Classifies one image; prints `label,confidence`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        image: PathBuf,
    },
    /// gen-dataset, train and evaluate into one directory.
    Pipeline,
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("expected one of train, val, test; got {s:?}"))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Penetrate { .. } => "penetrate",
            Command::VibrationSweep => "vibration-sweep",
            Command::SynthAccel => "synth-accel",
            Command::AnalyzeVibration { .. } => "analyze-vibration",
            Command::GenDataset => "gen-dataset",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Predict { .. } => "predict",
            Command::Pipeline => "pipeline",
        }
    }

    fn outputs(&self, cfg: &ExperimentConfig) -> Vec<String> {
        match self {
            Command::Penetrate { .. } => penetration::penetrate_outputs(),
            Command::VibrationSweep => penetration::sweep_outputs(cfg),
            Command::SynthAccel => vibration::synth_outputs(&cfg.synth_accel),
            Command::AnalyzeVibration { .. } => {
                vec![vibration::TABLE.into(), vibration::SUMMARY.into()]
            }
            Command::GenDataset => classify::dataset_outputs(),
            Command::Train { .. } => classify::train_outputs(),
            Command::Evaluate { .. } => classify::evaluate_outputs(),
            Command::Predict { .. } => Vec::new(),
            Command::Pipeline => classify::pipeline_outputs(),
        }
    }
}

/// File configuration with command-line overrides applied, validated.
pub fn resolve_config(cli: &Cli, cmd: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    match cmd {
        Command::Penetrate { medium, voltage } => {
            if let Some(m) = medium {
                cfg.penetrate.medium = m.clone();
            }
            if let Some(v) = voltage {
                cfg.penetrate.voltage = *v;
            }
        }
        Command::Evaluate { split: Some(s), .. } => cfg.evaluate.split = *s,
        _ => {}
    }
    cfg.validate()
        .map_err(|e| config_error(format!("{e:#}").replace("configuration error: ", "")))?;
    Ok(cfg)
}

fn init_threads(deterministic: bool) {
    let n = if deterministic {
        Some(1)
    } else {
        std::env::var("GRANUSENSE_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
    };
    if let Some(n) = n {
        // Fails only if a pool already exists, e.g. when called twice in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Runs the parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    if cli.print_defaults {
        print!("{DEFAULTS_TOML}");
        return Ok(());
    }
    let Some(cmd) = cli.command.clone() else {
        return Err(config_error("no command given; run with --help"));
    };
    let cfg = resolve_config(&cli, &cmd)?;
    init_threads(cli.deterministic);

    if let Command::Predict { model, image } = &cmd {
        if cli.dry_run {
            println!(
                "would classify {} with {}",
                image.display(),
                model.display()
            );
            return Ok(());
        }
        let p = classify::predict_cmd(model, image)?;
        println!("{},{}", p.label, p.confidence);
        return Ok(());
    }

    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cmd.name()));
    let outputs = cmd.outputs(&cfg);
    if cli.dry_run {
        println!("# resolved configuration");
        print!("{}", cfg.to_toml());
        println!("\n# planned outputs in {}", out.display());
        for o in outputs
            .iter()
            .chain(std::iter::once(&crate::run::RUN_RECORD.to_string()))
        {
            println!("{o}");
        }
        return Ok(());
    }

    let mut run = Run::begin(cmd.name(), &out, outputs, cli.force, cli.deterministic)?;
    let result = dispatch(&mut run, &cmd, &cfg);
    match result {
        Ok(()) => {
            run.finish(cfg.hash(), cfg.seed)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Err(e) => {
            run.fail(&e);
            Err(e)
        }
    }
}

fn dispatch(run: &mut Run, cmd: &Command, cfg: &ExperimentConfig) -> Result<()> {
    match cmd {
        Command::Penetrate { .. } => {
            let row = penetration::penetrate(run, cfg)?;
            match row.stall_depth_m {
                Some(d) => println!("stall depth: {:.2} cm", d * 100.0),
                None => println!(
                    "no stall within {:.2} cm",
                    cfg.penetrate.simulation.max_depth * 100.0
                ),
            }
        }
        Command::VibrationSweep => {
            let rows = penetration::sweep(run, cfg)?;
            for (medium, ratio) in penetration::stall_ratios(&rows, 10.0) {
                match ratio {
                    Some(r) => println!("{medium}: stall depth 10 V / 0 V = {r:.3}"),
                    None => println!("{medium}: stall depth ratio unavailable (10 V or 0 V run missing or did not stall)"),
                }
            }
        }
        Command::SynthAccel => vibration::synth(run, &cfg.synth_accel, cfg.seed)?,
        Command::AnalyzeVibration { inputs } => {
            let files = vibration::expand_inputs(inputs)?;
            for s in vibration::analyze(run, &files)? {
                println!(
                    "{}: {:.2} Hz, {:.2} m/s² ({} trials)",
                    s.label, s.frequency_hz, s.amplitude_m_s2, s.trials
                );
            }
        }
        Command::GenDataset => {
            classify::gen_dataset(run, cfg)?;
        }
        Command::Train { dataset } => {
            let outcome = classify::train(run, cfg, dataset)?;
            if let Some(last) = outcome.log.last() {
                println!("validation accuracy: {:.4}", last.val_accuracy);
            }
        }
        Command::Evaluate { model, dataset, .. } => {
            let cm = classify::evaluate_cmd(run, cfg, model, dataset)?;
            println!(
                "{} accuracy: {:.4}",
                cfg.evaluate.split.name(),
                cm.accuracy()
            );
        }
        Command::Pipeline => {
            let cm = classify::pipeline(run, cfg)?;
            println!(
                "{} accuracy: {:.4}",
                cfg.evaluate.split.name(),
                cm.accuracy()
            );
            if let Some(share) = cm.twin_confusion_share() {
                println!(
                    "errors between Clean/Sand variants of the same shape: {:.1}%",
                    share * 100.0
                );
            }
        }
        Command::Predict { .. } => unreachable!("handled before an output directory is prepared"),
    }
    Ok(())
}

//! `gen-dataset`, `train`, `evaluate`, `predict` and `pipeline`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use granusense::classify::{
    evaluate, generate_dataset, predict, train_manifest, ClassLabel, ConfusionMatrix,
    DatasetManifest, ModelParams, Prediction, Split, TrainOutcome, MANIFEST_FILE,
};
use granusense::tactile::io::load_image;

use crate::config::ExperimentConfig;
use crate::plot::{heatmap, line_chart, Series};
use crate::run::Run;
use crate::tables::to_csv;

pub const MODEL: &str = "model.bin";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const LOSS_PLOT: &str = "loss.svg";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const CONFUSION_SVG: &str = "confusion.svg";
pub const REPORT: &str = "report.txt";
pub const DATASET_DIR: &str = "dataset";

pub fn dataset_outputs() -> Vec<String> {
    vec!["images/".into(), MANIFEST_FILE.into()]
}

pub fn train_outputs() -> Vec<String> {
    vec![MODEL.into(), TRAIN_LOG.into(), LOSS_PLOT.into()]
}

pub fn evaluate_outputs() -> Vec<String> {
    vec![CONFUSION_CSV.into(), CONFUSION_SVG.into(), REPORT.into()]
}

pub fn pipeline_outputs() -> Vec<String> {
    let mut out = vec![format!("{DATASET_DIR}/")];
    out.extend(train_outputs());
    out.extend(evaluate_outputs());
    out
}

/// Accepts a dataset directory or its manifest file.
pub fn open_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    Ok(DatasetManifest::load(&file)?)
}

fn generate(run: &Run, rel_dir: &str, cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    let dir = if rel_dir.is_empty() {
        run.dir.clone()
    } else {
        run.path(rel_dir)
    };
    let manifest = generate_dataset(&cfg.dataset, cfg.seed, &dir)?;
    manifest.verify()?;
    eprintln!(
        "generated {} images in {}",
        manifest.entries.len(),
        dir.display()
    );
    Ok(manifest)
}

pub fn gen_dataset(run: &mut Run, cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    run.stage("generate", |run| generate(run, "", cfg))
}

fn fit(run: &Run, manifest: &DatasetManifest, cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let mut tc = cfg.train.clone();
    tc.seed = cfg.seed;
    let outcome = train_manifest(manifest, &tc, |e| {
        eprintln!(
            "epoch {:>2}  lr {:.4}  train loss {:.4} acc {:.3}  val loss {:.4} acc {:.3}",
            e.epoch, e.learning_rate, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
        )
    })?;
    outcome.model.save(&run.path(MODEL))?;
    run.write(TRAIN_LOG, to_csv(&outcome.log)?)?;
    let pick = |f: fn(&granusense::classify::EpochLog) -> f64| {
        outcome.log.iter().map(|e| (e.epoch as f64, f(e))).collect()
    };
    let series = [
        Series {
            name: "train".into(),
            points: pick(|e| e.train_loss),
        },
        Series {
            name: "validation".into(),
            points: pick(|e| e.val_loss),
        },
    ];
    run.write(
        LOSS_PLOT,
        line_chart("cross-entropy per epoch", "epoch", "loss", &series),
    )?;
    Ok(outcome)
}

pub fn train(run: &mut Run, cfg: &ExperimentConfig, dataset: &Path) -> Result<TrainOutcome> {
    let manifest = run.stage("load", |_| open_manifest(dataset))?;
    run.stage("train", |run| fit(run, &manifest, cfg))
}

/// Human-readable summary of a confusion matrix.
pub fn report(cm: &ConfusionMatrix, split: Split) -> String {
    let mut s = String::new();
    let total = cm.total();
    let _ = writeln!(s, "split: {}", split.name());
    let _ = writeln!(s, "images: {total}");
    let _ = writeln!(
        s,
        "accuracy: {:.4} ({}/{total})",
        cm.accuracy(),
        cm.correct()
    );
    let _ = writeln!(s, "misclassified: {}", total - cm.correct());
    match cm.twin_confusion_share() {
        Some(share) => {
            let _ = writeln!(
                s,
                "share of errors between Clean/Sand variants of the same shape: {share:.3}"
            );
        }
        None => {
            let _ = writeln!(
                s,
                "share of errors between Clean/Sand variants of the same shape: n/a (no errors)"
            );
        }
    }
    let _ = writeln!(s, "\nper class (correct/total):");
    for l in ClassLabel::ALL {
        let row = cm.counts[l.index()];
        let n: u64 = row.iter().sum();
        let ok = row[l.index()];
        let acc = if n == 0 { 0.0 } else { ok as f64 / n as f64 };
        let _ = writeln!(s, "  {:<14} {ok:>4}/{n:<4} {acc:.3}", l.name());
    }
    let mut off: Vec<(u64, ClassLabel, ClassLabel)> = Vec::new();
    for t in ClassLabel::ALL {
        for p in ClassLabel::ALL {
            let c = cm.counts[t.index()][p.index()];
            if t != p && c > 0 {
                off.push((c, t, p));
            }
        }
    }
    off.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    if !off.is_empty() {
        let _ = writeln!(s, "\nlargest confusions (true -> predicted):");
        for (c, t, p) in off.iter().take(8) {
            let twin = if t.twin() == Some(*p) {
                "  [same shape]"
            } else {
                ""
            };
            let _ = writeln!(s, "  {t} -> {p}: {c}{twin}");
        }
    }
    s
}

fn assess(
    run: &Run,
    model: &ModelParams,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<ConfusionMatrix> {
    let cm = evaluate(model, manifest, split)?;
    run.write(CONFUSION_CSV, cm.to_csv())?;
    let labels: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
    let counts: Vec<Vec<u64>> = cm.counts.iter().map(|r| r.to_vec()).collect();
    let title = format!("confusion matrix ({} split)", split.name());
    run.write(CONFUSION_SVG, heatmap(&title, &labels, &counts))?;
    run.write(REPORT, report(&cm, split))?;
    Ok(cm)
}

pub fn evaluate_cmd(
    run: &mut Run,
    cfg: &ExperimentConfig,
    model: &Path,
    dataset: &Path,
) -> Result<ConfusionMatrix> {
    let (model, manifest) = run.stage("load", |_| {
        Ok((ModelParams::load(model)?, open_manifest(dataset)?))
    })?;
    run.stage("evaluate", |run| {
        assess(run, &model, &manifest, cfg.evaluate.split)
    })
}

pub fn predict_cmd(model: &Path, image: &Path) -> Result<Prediction> {
    let model = ModelParams::load(model)?;
    let img = load_image(image)?;
    Ok(predict(&model, &img)?)
}

/// generate → train → evaluate in one directory.
pub fn pipeline(run: &mut Run, cfg: &ExperimentConfig) -> Result<ConfusionMatrix> {
    let manifest = run.stage("generate", |run| generate(run, DATASET_DIR, cfg))?;
    let outcome = run.stage("train", |run| fit(run, &manifest, cfg))?;
    run.stage("evaluate", |run| {
        assess(run, &outcome.model, &manifest, cfg.evaluate.split)
    })
}

/// Path of the dataset a pipeline run wrote.
pub fn pipeline_dataset(dir: &Path) -> PathBuf {
    dir.join(DATASET_DIR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_mentions_twins() {
        let mut cm = ConfusionMatrix::default();
        for l in ClassLabel::ALL {
            cm.counts[l.index()][l.index()] = 10;
        }
        cm.counts[ClassLabel::CircleClean.index()][ClassLabel::CircleSand.index()] = 3;
        cm.counts[ClassLabel::SquareSand.index()][ClassLabel::HexagonSand.index()] = 1;
        let r = report(&cm, Split::Test);
        assert!(r.contains("same shape: 0.750"), "{r}");
        assert!(
            r.contains("CircleClean -> CircleSand: 3  [same shape]"),
            "{r}"
        );
        assert!(r.contains("SquareSand -> HexagonSand: 1\n"), "{r}");
    }

    #[test]
    fn pipeline_declares_dataset_dir() {
        assert_eq!(pipeline_outputs()[0], "dataset/");
        assert_eq!(pipeline_outputs().len(), 7);
    }
}

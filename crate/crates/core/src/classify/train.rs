use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentConfig};
use super::dataset::{DatasetManifest, LabeledImages, Split};
use super::label::{ClassLabel, NUM_CLASSES};
use super::net::{cross_entropy, softmax, Network};
use crate::tactile::TactileImage;
use crate::{seed, Error, Result};

/// Images per gradient work unit. Gradients are summed within a unit and then
/// across units in a fixed order, so results do not depend on thread count.
const CHUNK: usize = 8;

/// Trained weights plus what produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub network: Network,
    pub seed: u64,
    pub epochs: u32,
}

impl ModelParams {
    /// Input `(channels, height, width)`.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.network.input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate is multiplied by this every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub momentum: f64,
    pub augment: AugmentConfig,
    /// Set by the caller; not part of the file format.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.05,
            lr_decay: 0.5,
            decay_every: 3,
            momentum: 0.9,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("train.epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("train.batch_size must be at least 1"));
        }
        if self.decay_every < 1 {
            return Err(Error::config("train.decay_every must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(
                "train.lr_decay must be in (0, 1] and train.momentum in [0, 1)",
            ));
        }
        self.augment.validate()
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean loss and accuracy over the (augmented) training batches of the epoch.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub log: Vec<EpochLog>,
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

#[derive(Default)]
struct BatchStats {
    loss: f64,
    correct: usize,
}

fn chunk_gradient(net: &Network, xs: &[Vec<f64>], ys: &[usize]) -> (Network, BatchStats) {
    let mut grad = net.zeros_like();
    let mut stats = BatchStats::default();
    for (x, &y) in xs.iter().zip(ys) {
        let act = net.forward(x);
        stats.correct += (argmax(&act.logits) == y) as usize;
        stats.loss += net.backward(&act, y, &mut grad);
    }
    (grad, stats)
}

/// Summed gradient, loss and hit count over a batch.
fn batch_gradient(net: &Network, xs: &[Vec<f64>], ys: &[usize]) -> (Network, BatchStats) {
    let units: Vec<(&[Vec<f64>], &[usize])> = xs.chunks(CHUNK).zip(ys.chunks(CHUNK)).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<_> = {
        use rayon::prelude::*;
        units
            .par_iter()
            .map(|(x, y)| chunk_gradient(net, x, y))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<_> = units
        .iter()
        .map(|(x, y)| chunk_gradient(net, x, y))
        .collect();

    let mut parts = parts.into_iter();
    let (mut grad, mut stats) = parts.next().expect("nonempty batch");
    for (g, s) in parts {
        grad.add_scaled(&g, 1.0);
        stats.loss += s.loss;
        stats.correct += s.correct;
    }
    (grad, stats)
}

fn planar(img: &TactileImage) -> Vec<f64> {
    img.to_planar()
}

fn planar_u8(set: &LabeledImages, i: usize) -> Vec<f64> {
    let n = set.width * set.height;
    let bytes = &set.images[i];
    let mut out = vec![0.0; 3 * n];
    for p in 0..n {
        for c in 0..3 {
            out[c * n + p] = bytes[3 * p + c] as f64 / 255.0;
        }
    }
    out
}

/// Mean loss and accuracy without augmentation.
fn score(net: &Network, set: &LabeledImages) -> (f64, f64) {
    let run = |i: usize| {
        let logits = net.forward(&planar_u8(set, i)).logits;
        let y = set.labels[i].index();
        (cross_entropy(&logits, y), (argmax(&logits) == y) as usize)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<(f64, usize)> = {
        use rayon::prelude::*;
        (0..set.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(f64, usize)> = (0..set.len()).map(run).collect();
    let n = set.len().max(1) as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let correct = results.iter().map(|r| r.1).sum::<usize>() as f64;
    (loss, correct / n)
}

/// Mini-batch SGD with momentum on softmax cross-entropy.
///
/// `on_epoch` is called after every epoch with that epoch's log line.
pub fn train(
    train_set: &LabeledImages,
    val_set: &LabeledImages,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::config(
            "training needs nonempty train and val splits",
        ));
    }
    if (val_set.width, val_set.height) != (train_set.width, train_set.height) {
        return Err(Error::config("train and val images differ in size"));
    }
    let mut net = Network::init(3, train_set.height, train_set.width, cfg.seed)?;
    let mut velocity = net.zeros_like();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(
            cfg.seed,
            &[0xe90c, epoch as u64],
        )));
        let (mut loss_sum, mut correct) = (0.0, 0usize);

        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<Vec<f64>> = batch
                .iter()
                .map(|&i| {
                    if cfg.augment.enabled {
                        let mut rng =
                            seed::rng(seed::derive(cfg.seed, &[0xa6, epoch as u64, i as u64]));
                        planar(&augment(&train_set.image(i), &cfg.augment, &mut rng))
                    } else {
                        planar_u8(train_set, i)
                    }
                })
                .collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_set.labels[i].index()).collect();
            let (grad, stats) = batch_gradient(&net, &xs, &ys);
            let batch_loss = stats.loss / batch.len() as f64;
            if !batch_loss.is_finite() || !grad.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                    loss: batch_loss,
                });
            }
            // v ← μ·v + ḡ;  θ ← θ − lr·v
            let inv = 1.0 / batch.len() as f64;
            for (v, g) in velocity.slices_mut().into_iter().zip(grad.slices()) {
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi = cfg.momentum * *vi + gi * inv;
                }
            }
            net.add_scaled(&velocity, -lr);
            loss_sum += stats.loss;
            correct += stats.correct;
        }

        if !net.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: epoch + 1,
                batch: 0,
                loss: f64::NAN,
            });
        }
        let (val_loss, val_accuracy) = score(&net, val_set);
        let entry = EpochLog {
            epoch: epoch + 1,
            learning_rate: lr,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome {
        model: ModelParams {
            network: net,
            seed: cfg.seed,
            epochs: cfg.epochs as u32,
        },
        log,
    })
}

/// Loads the train and val splits of `manifest` and trains on them.
pub fn train_manifest(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let train_set = LabeledImages::from_manifest(manifest, Split::Train)?;
    let val_set = LabeledImages::from_manifest(manifest, Split::Val)?;
    train(&train_set, &val_set, cfg, on_epoch)
}

/// Row = true class, column = predicted class, both in [`ClassLabel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        self.counts.map(|row| row.iter().sum())
    }

    /// Fraction of misclassifications that confuse a shape with its own
    /// Clean/Sand counterpart. `None` when nothing was misclassified.
    pub fn twin_confusion_share(&self) -> Option<f64> {
        let errors = self.total() - self.correct();
        if errors == 0 {
            return None;
        }
        let twin: u64 = ClassLabel::ALL
            .iter()
            .filter_map(|l| l.twin().map(|t| self.counts[l.index()][t.index()]))
            .sum();
        Some(twin as f64 / errors as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(ClassLabel::ALL.iter().map(|l| l.name().to_string()));
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.counts.iter().enumerate() {
            let mut rec = vec![ClassLabel::ALL[i].name().to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str, path: &std::path::Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let expected: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
        if header.iter().skip(1).collect::<Vec<_>>() != expected {
            return Err(parse_err(
                1,
                "header must list the nine class labels in order".into(),
            ));
        }
        let mut m = ConfusionMatrix::default();
        let mut rows = 0;
        for (i, rec) in r.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if i >= NUM_CLASSES || rec.len() != NUM_CLASSES + 1 || rec.get(0) != Some(expected[i]) {
                return Err(parse_err(line, "unexpected row".into()));
            }
            for j in 0..NUM_CLASSES {
                m.counts[i][j] = rec[j + 1]
                    .parse()
                    .map_err(|e| parse_err(line, format!("column {}: {e}", j + 2)))?;
            }
            rows += 1;
        }
        if rows != NUM_CLASSES {
            return Err(parse_err(
                rows as u64 + 1,
                format!("expected {NUM_CLASSES} rows, found {rows}"),
            ));
        }
        Ok(m)
    }
}

fn check_input(model: &ModelParams, width: usize, height: usize) -> Result<()> {
    let (_, h, w) = model.input_shape();
    if (width, height) != (w, h) {
        return Err(Error::config(format!(
            "image is {width}×{height} but the model expects {w}×{h}"
        )));
    }
    Ok(())
}

/// Confusion matrix of `model` on an image set, without augmentation.
pub fn evaluate_images(model: &ModelParams, set: &LabeledImages) -> Result<ConfusionMatrix> {
    if set.is_empty() {
        return Err(Error::config("cannot evaluate an empty split"));
    }
    check_input(model, set.width, set.height)?;
    let run = |i: usize| argmax(&model.network.forward(&planar_u8(set, i)).logits);
    #[cfg(feature = "parallel")]
    let predicted: Vec<usize> = {
        use rayon::prelude::*;
        (0..set.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let predicted: Vec<usize> = (0..set.len()).map(run).collect();
    let mut m = ConfusionMatrix::default();
    for (label, p) in set.labels.iter().zip(predicted) {
        m.counts[label.index()][p] += 1;
    }
    Ok(m)
}

pub fn evaluate(
    model: &ModelParams,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<ConfusionMatrix> {
    evaluate_images(model, &LabeledImages::from_manifest(manifest, split)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    pub confidence: f64,
    pub probabilities: [f64; NUM_CLASSES],
}

pub fn predict(model: &ModelParams, img: &TactileImage) -> Result<Prediction> {
    check_input(model, img.width, img.height)?;
    let p = softmax(&model.network.forward(&img.to_planar()).logits);
    let best = argmax(&p);
    Ok(Prediction {
        label: ClassLabel::ALL[best],
        confidence: p[best],
        probabilities: std::array::from_fn(|i| p[i]),
    })
}

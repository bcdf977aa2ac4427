use std::path::Path;
use std::time::Instant;

use log::{info, warn};

use super::checkpoint::Checkpoint;
use super::config::{build_network, ExperimentConfig, Splits};
use super::metrics::{metrics_csv, timing_csv, MetricsRow};
use crate::baseline::{weight_decay_loss, RegularizerKind};
use crate::data::{epoch_batches, Dataset};
use crate::error::{Error, Result};
use crate::info::{monitor_conditional_entropy, MIN_CLASS_SAMPLES};
use crate::nn::{accuracy, cross_entropy, Mode, Network, Optimizer, OptimizerConfig};
use crate::rng::Rng;
use crate::shade::ShadeState;

pub(crate) const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;
const EVAL_CHUNK: usize = 500;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MOVING_AVERAGES_FILE: &str = "moving_averages.csv";

/// Loss, accuracy and SHADE penalty of a network over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub omega: f64,
}

/// Evaluation-mode pass in fixed chunks. `omega` uses the given moving
/// averages and is 0 without them.
pub fn evaluate(net: &Network, data: &Dataset, shade: Option<&ShadeState>) -> Result<Evaluation> {
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let (mut loss, mut correct, mut omega) = (0.0, 0.0, 0.0);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
        let out = net.predict(&data.inputs.select_rows(&idx))?;
        let w = idx.len() as f64;
        loss += w * cross_entropy(&out.logits, &labels)?.0;
        correct += w * accuracy(&out.logits, &labels);
        if let Some(s) = shade {
            omega += w * s.loss(&out.pre_activations)?;
        }
    }
    let n = n as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct / n,
        omega: omega / n,
    })
}

/// Mini-batch training of one network under one config.
///
/// Per batch: forward, classification loss plus `beta` times the penalty,
/// backward, optimizer step, then the moving-average update. The moving
/// averages are tracked for every run (they never touch the parameters
/// unless the SHADE penalty is active), so `omega` is comparable across
/// regularizers.
pub struct Trainer {
    pub net: Network,
    pub shade: ShadeState,
    kind: RegularizerKind,
    beta: f64,
    batch_size: usize,
    optimizer: Optimizer,
    shuffle: Rng,
    dropout: Rng,
    pub epoch: usize,
}

impl Trainer {
    pub fn new(config: &ExperimentConfig, splits: &Splits) -> Result<Trainer> {
        config.validate()?;
        let net = build_network(config, splits.train.sample_shape(), splits.train.classes)?;
        let reg = &config.regularizer;
        let mut shade = ShadeState::new(&net.observed_units(), reg.decay, reg.effective_beta())?;
        if let Some(w) = &reg.layer_weights {
            shade = shade.with_layer_weights(w)?;
        }
        Trainer::resume(config, net, shade, config.optimizer)
    }

    /// Continues from an existing network and state with a given optimizer.
    pub fn resume(config: &ExperimentConfig, net: Network, shade: ShadeState, optimizer: OptimizerConfig) -> Result<Trainer> {
        Ok(Trainer {
            net,
            shade,
            kind: config.regularizer.kind,
            beta: config.regularizer.effective_beta(),
            batch_size: config.batch_size,
            optimizer: Optimizer::new(optimizer)?,
            shuffle: Rng::derive(config.seed, SHUFFLE_STREAM),
            dropout: Rng::derive(config.seed, DROPOUT_STREAM),
            epoch: 0,
        })
    }

    pub fn train_epoch(&mut self, train: &Dataset) -> Result<()> {
        self.epoch += 1;
        for batch in epoch_batches(train.len(), self.batch_size, Some(&mut self.shuffle)) {
            let x = train.inputs.select_rows(&batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let out = self.net.forward(&x, Mode::Train(&mut self.dropout))?;
            let (ce, grad_logits) = cross_entropy(&out.logits, &labels)?;
            if !ce.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss in epoch {}", self.epoch)));
            }
            let shade_grads = if self.kind == RegularizerKind::Shade && self.beta > 0.0 {
                let (_, mut g) = self.shade.loss_and_grad(&out.pre_activations)?;
                for t in &mut g {
                    t.scale(self.beta);
                }
                Some(g)
            } else {
                None
            };
            let mut grads = self.net.backward(&grad_logits, shade_grads.as_deref())?;
            if self.kind == RegularizerKind::WeightDecay && self.beta > 0.0 {
                let (_, wd) = weight_decay_loss(&self.net);
                grads.add_scaled(self.beta, &wd)?;
            }
            if !grads.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in epoch {}", self.epoch)));
            }
            self.optimizer.step(&mut self.net, &grads)?;
            self.shade.update_moving_averages(&out.pre_activations)?;
        }
        Ok(())
    }

    pub fn metrics(&self, splits: &Splits, monitor: bool, started: Instant) -> Result<MetricsRow> {
        let train = evaluate(&self.net, &splits.train, Some(&self.shade))?;
        let val = evaluate(&self.net, &splits.val, None)?;
        let test = evaluate(&self.net, &splits.test, None)?;
        if !train.loss.is_finite() || !train.omega.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss after epoch {}", self.epoch)));
        }
        let (mut hc, mut hz) = (Vec::new(), Vec::new());
        // Too small a validation split leaves the entropy columns empty
        // instead of failing the run.
        let enough = splits.val.class_counts().iter().any(|&c| c >= MIN_CLASS_SAMPLES);
        if monitor && !enough && self.epoch == 0 {
            warn!("no validation class has {MIN_CLASS_SAMPLES} samples; entropy columns left empty");
        }
        if monitor && enough {
            for l in 0..self.shade.layers.len() {
                let r = monitor_conditional_entropy(&self.net, &splits.val, l)?;
                hc.push(r.mean_given_class());
                hz.push(r.mean_given_latent());
            }
        }
        Ok(MetricsRow {
            epoch: self.epoch,
            train_loss: train.loss,
            train_accuracy: train.accuracy,
            val_accuracy: val.accuracy,
            test_accuracy: test.accuracy,
            omega: train.omega,
            h_y_given_c: hc,
            h_y_given_z: hz,
            wall_clock: started.elapsed().as_secs_f64(),
        })
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub network: Network,
    pub shade: ShadeState,
    pub rows: Vec<MetricsRow>,
}

impl RunOutput {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("a run has at least the initial row")
    }
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, trainer: &Trainer, rows: &[MetricsRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let layers = trainer.shade.layers.len();
    std::fs::write(dir.join(METRICS_FILE), metrics_csv(rows, layers))?;
    std::fs::write(dir.join(TIMING_FILE), timing_csv(rows))?;
    let mut ma = Vec::new();
    trainer.shade.write_csv(&mut ma)?;
    std::fs::write(dir.join(MOVING_AVERAGES_FILE), ma)?;
    Checkpoint {
        epoch: trainer.epoch,
        config: config.clone(),
        network: trainer.net.clone(),
        shade: trainer.shade.clone(),
    }
    .save(&dir.join(CHECKPOINT_FILE))
}

/// Trains for `config.epochs` epochs. With an output directory, metrics and
/// the checkpoint are rewritten after every epoch, so a numeric failure
/// leaves the last good epoch on disk.
pub fn run(config: &ExperimentConfig, splits: &Splits) -> Result<RunOutput> {
    let started = Instant::now();
    let mut trainer = Trainer::new(config, splits)?;
    let mut rows = vec![trainer.metrics(splits, config.monitor_entropy, started)?];
    let out_dir = config.output_dir.as_deref();
    if let Some(dir) = out_dir {
        write_outputs(dir, config, &trainer, &rows)?;
    }
    for epoch in 1..=config.epochs {
        trainer.train_epoch(&splits.train)?;
        if epoch % config.metrics_every != 0 && epoch != config.epochs {
            continue;
        }
        let row = trainer.metrics(splits, config.monitor_entropy, started)?;
        info!(
            "epoch {}: loss {:.4} train {:.4} val {:.4} test {:.4} omega {:.4}",
            row.epoch, row.train_loss, row.train_accuracy, row.val_accuracy, row.test_accuracy, row.omega
        );
        rows.push(row);
        if let Some(dir) = out_dir {
            write_outputs(dir, config, &trainer, &rows)?;
        }
    }
    Ok(RunOutput {
        network: trainer.net,
        shade: trainer.shade,
        rows,
    })
}

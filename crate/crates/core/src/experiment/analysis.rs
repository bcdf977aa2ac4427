use std::fmt::Write as _;

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, Splits};
use super::train::{evaluate, Evaluation, Trainer};
use crate::baseline::RegularizerConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::info::{monitor_conditional_entropy, LayerEntropyReport};
use crate::nn::Network;
use crate::shade::ShadeState;

/// Learning-rate factor for fine-tuning after binarization.
pub const FINE_TUNE_LR_FACTOR: f64 = 0.1;

fn check_fits(net: &Network, data: &Dataset) -> Result<()> {
    if net.input_shape() != data.sample_shape() {
        return Err(Error::shape(
            "checkpoint",
            format!(
                "network expects samples of shape {:?}, dataset has {:?}",
                net.input_shape(),
                data.sample_shape()
            ),
        ));
    }
    if net.classes() != data.classes {
        return Err(Error::shape(
            "checkpoint",
            format!("network scores {} classes, dataset has {}", net.classes(), data.classes),
        ));
    }
    Ok(())
}

/// Entropy reports for every observed layer of a network on one dataset.
pub fn diagnose(net: &Network, data: &Dataset) -> Result<Vec<LayerEntropyReport>> {
    check_fits(net, data)?;
    (0..net.observed_layers().len())
        .map(|l| monitor_conditional_entropy(net, data, l))
        .collect()
}

pub fn diagnose_csv(reports: &[LayerEntropyReport]) -> Result<String> {
    let mut buf = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        r.write_csv(&mut buf, i == 0)?;
    }
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}

/// Loss and accuracy on the train, validation and test splits.
pub fn eval_splits(net: &Network, splits: &Splits) -> Result<[(&'static str, Evaluation); 3]> {
    check_fits(net, &splits.test)?;
    Ok([
        ("train", evaluate(net, &splits.train, None)?),
        ("val", evaluate(net, &splits.val, None)?),
        ("test", evaluate(net, &splits.test, None)?),
    ])
}

pub fn eval_csv(rows: &[(&'static str, Evaluation)]) -> String {
    let mut out = String::from("split,loss,accuracy\n");
    for (name, e) in rows {
        let _ = writeln!(out, "{name},{},{}", e.loss, e.accuracy);
    }
    out
}

#[derive(Debug, Clone)]
pub struct BinarizeOutcome {
    pub observed_layer: usize,
    pub threshold: f64,
    /// Test accuracy of the original network.
    pub before: f64,
    /// Test accuracy right after swapping in the binary activation.
    pub raw: f64,
    /// Test accuracy after fine-tuning the layers above.
    pub after: f64,
    pub network: Network,
    pub shade: ShadeState,
}

impl BinarizeOutcome {
    pub fn csv(&self) -> String {
        format!(
            "observed_layer,threshold,before_accuracy,raw_accuracy,after_accuracy\n{},{},{},{},{}\n",
            self.observed_layer, self.threshold, self.before, self.raw, self.after
        )
    }
}

/// Replaces the ReLU of one observed layer with a binary activation
/// calibrated on the training set, then fine-tunes every layer above it for
/// `epochs` epochs on the classification loss alone, at a tenth of the
/// configured learning rate. Layers at or below the binarized one stay
/// frozen.
pub fn binarize(
    checkpoint: &Checkpoint,
    splits: &Splits,
    observed_layer: usize,
    epochs: usize,
) -> Result<BinarizeOutcome> {
    let net = &checkpoint.network;
    check_fits(net, &splits.train)?;
    let before = evaluate(net, &splits.test, None)?.accuracy;
    let binary = net.binarize_layer(observed_layer, &splits.train.inputs)?;
    let act = net.observed_layers()[observed_layer] + 1;
    let threshold = match &binary.layers()[act] {
        crate::nn::Layer::Binary(spec) => spec.threshold,
        _ => unreachable!("binarize_layer installs a binary activation"),
    };
    let raw = evaluate(&binary, &splits.test, None)?.accuracy;
    let config = ExperimentConfig {
        regularizer: RegularizerConfig::none(),
        ..checkpoint.config.clone()
    };
    let mut optimizer = config.optimizer;
    optimizer.learning_rate *= FINE_TUNE_LR_FACTOR;
    let mut trainer = Trainer::resume(&config, binary, checkpoint.shade.clone(), optimizer)?;
    for _ in 0..epochs {
        trainer.train_epoch(&splits.train)?;
    }
    let after = evaluate(&trainer.net, &splits.test, None)?.accuracy;
    Ok(BinarizeOutcome {
        observed_layer,
        threshold,
        before,
        raw,
        after,
        network: trainer.net,
        shade: trainer.shade,
    })
}

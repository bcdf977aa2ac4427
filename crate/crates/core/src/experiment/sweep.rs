use std::fmt::Write as _;

use log::{info, warn};

use super::config::{ExperimentConfig, Splits};
use super::train::{run, RunOutput};
use crate::error::{Error, Result};

/// `{1, 5} x 10^-i` for `i = 1..7`, largest first.
pub const DEFAULT_BETA_GRID: [f64; 14] = [
    5e-1, 1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6, 5e-7, 1e-7,
];

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub beta: f64,
    pub val_accuracy: f64,
    pub run: RunOutput,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Grid points that finished training, in grid order.
    pub points: Vec<SweepPoint>,
    /// Grid values whose run aborted on a non-finite loss or gradient.
    /// They are reported but never selected.
    pub diverged: Vec<f64>,
    pub selected: usize,
}

impl SweepResult {
    pub fn best(&self) -> &SweepPoint {
        &self.points[self.selected]
    }

    /// Test accuracy of the selected model, the only test number a sweep reports.
    pub fn test_accuracy(&self) -> f64 {
        self.best().run.last().test_accuracy
    }

    /// `beta,val_accuracy,selected` per grid point (diverged points have an
    /// empty accuracy), then the selected model's test accuracy on a
    /// `# test_accuracy=` trailer line.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("beta,val_accuracy,selected\n");
        for (i, p) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", p.beta, p.val_accuracy, u8::from(i == self.selected));
        }
        for b in &self.diverged {
            let _ = writeln!(out, "{b},,0");
        }
        let _ = writeln!(out, "# test_accuracy={}", self.test_accuracy());
        out
    }
}

/// Index of the highest validation accuracy; equal accuracies go to the
/// smaller `beta`.
pub fn select_best(points: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(beta, acc)) in points.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bb, ba) = points[b];
                if acc > ba || (acc == ba && beta < bb) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Trains one model per `beta` (everything else from `config`) and keeps
/// the one with the best final validation accuracy. With an output
/// directory each grid point writes to its own `beta_<value>` subdirectory.
///
/// A grid point that aborts numerically is logged and skipped (its last
/// good checkpoint stays on disk); the sweep fails only when every point
/// diverges.
pub fn sweep(config: &ExperimentConfig, splits: &Splits, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty regularization grid"));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut diverged = Vec::new();
    for &beta in grid {
        let mut c = config.clone();
        c.regularizer.beta = beta;
        c.output_dir = config.output_dir.as_ref().map(|d| d.join(format!("beta_{beta:e}")));
        let run = match run(&c, splits) {
            Ok(r) => r,
            Err(Error::Numeric(msg)) => {
                warn!("beta {beta:e} diverged: {msg}");
                diverged.push(beta);
                continue;
            }
            Err(e) => return Err(e),
        };
        let val = run.last().val_accuracy;
        info!("beta {beta:e}: validation accuracy {val:.4}");
        points.push(SweepPoint {
            beta,
            val_accuracy: val,
            run,
        });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.beta, p.val_accuracy)).collect();
    let selected = select_best(&pairs)
        .ok_or_else(|| Error::Numeric(format!("every grid point diverged ({} values)", grid.len())))?;
    Ok(SweepResult {
        points,
        diverged,
        selected,
    })
}

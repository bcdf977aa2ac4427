use std::fmt::Write as _;

/// One epoch of a run. `epoch = 0` describes the initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    /// Mean cross-entropy over the training set (evaluation mode).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// SHADE penalty of the training set under the current moving averages.
    pub omega: f64,
    /// Mean per-unit `H(Y|C)` of each observed layer on the validation set;
    /// empty when monitoring is off.
    pub h_y_given_c: Vec<f64>,
    pub h_y_given_z: Vec<f64>,
    /// Seconds since the run started. Kept out of `metrics.csv` so that
    /// identical runs give identical files; see [`timing_csv`].
    pub wall_clock: f64,
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// The metrics file: a fixed header for `layers` observed layers, then one
/// row per epoch. Missing entropy values are written as empty fields.
pub fn metrics_csv(rows: &[MetricsRow], layers: usize) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = [
        "epoch",
        "train_loss",
        "train_accuracy",
        "val_accuracy",
        "test_accuracy",
        "omega",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..layers).map(|l| format!("h_y_given_c_{l}")));
    header.extend((0..layers).map(|l| format!("h_y_given_z_{l}")));
    push_row(&mut out, &header);
    for r in rows {
        let mut f = vec![
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            r.val_accuracy.to_string(),
            r.test_accuracy.to_string(),
            r.omega.to_string(),
        ];
        for values in [&r.h_y_given_c, &r.h_y_given_z] {
            f.extend((0..layers).map(|l| values.get(l).map_or_else(String::new, f64::to_string)));
        }
        push_row(&mut out, &f);
    }
    out
}

pub fn timing_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("epoch,wall_clock_seconds\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.epoch, r.wall_clock);
    }
    out
}

//! Self-contained verification suites behind `shade verify --scope ...`.
//! Every suite builds its own synthetic inputs from a fixed seed.

use std::f64::consts::{E, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::info::{
    joint_from_map, reconstruction_bounds_continuous, reconstruction_bounds_discrete, variance_bound_check,
    verify_decompositions, verify_dpi, DiscreteJoint, GaussianPair, MarkovChain, Stage,
};
use crate::nn::{cross_entropy, Mode, Network};
use crate::rng::Rng;
use crate::shade::{posterior, unit_loss, unit_loss_derivative, ShadeState};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Bounds,
    Gradients,
    Dpi,
    Reconstruction,
    Algorithm1,
}

impl Scope {
    pub const ALL: [Scope; 5] = [
        Scope::Bounds,
        Scope::Gradients,
        Scope::Dpi,
        Scope::Reconstruction,
        Scope::Algorithm1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scope::Bounds => "bounds",
            Scope::Gradients => "gradients",
            Scope::Dpi => "dpi",
            Scope::Reconstruction => "reconstruction",
            Scope::Algorithm1 => "algorithm1",
        }
    }

    pub fn parse(s: &str) -> Option<Scope> {
        Scope::ALL.into_iter().find(|sc| sc.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub scope: Scope,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(scope: Scope) -> Self {
        VerifyReport { scope, checks: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `scope,check,result,detail` rows.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},\"{}\"\n",
                self.scope.name(),
                c.name,
                if c.passed { "pass" } else { "fail" },
                c.detail.replace('"', "'")
            ));
        }
        out
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}/{}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                self.scope.name(),
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

pub fn run_scope(scope: Scope) -> Result<VerifyReport> {
    match scope {
        Scope::Bounds => verify_bounds(),
        Scope::Gradients => verify_gradients(),
        Scope::Dpi => verify_dpi_suite(),
        Scope::Reconstruction => verify_reconstruction(),
        Scope::Algorithm1 => verify_algorithm1(),
    }
}

const SEED: u64 = 0x5eed;

/// Relative error with a floor on the denominator.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest relative error between the analytic per-unit derivative and a
/// central difference over `count` random `(y, mu0, mu1)` away from `y = 0`.
pub fn unit_gradient_error(count: usize, rng: &mut Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut y = rng.uniform_range(-5.0, 5.0);
        if y.abs() < 1e-2 {
            y = 1e-2f64.copysign(y);
        }
        let mu0 = rng.uniform_range(-3.0, 3.0);
        let mu1 = rng.uniform_range(-3.0, 3.0);
        let h = (1e-6 * y.abs()).min(y.abs() / 2.0);
        let fd = (unit_loss(y + h, mu0, mu1) - unit_loss(y - h, mu0, mu1)) / (2.0 * h);
        let an = unit_loss_derivative(y, mu0, mu1);
        worst = worst.max(rel_err(fd, an, 1e-6));
    }
    worst
}

/// Largest relative error between backpropagated gradients of
/// `cross_entropy + beta * Omega` and central differences, over every weight
/// and bias of the network (or every `stride`-th one). Moving averages are
/// held fixed, as during one training step.
pub fn network_gradient_error(
    net: &mut Network,
    x: &Tensor,
    labels: &[usize],
    shade: &ShadeState,
    beta: f64,
    stride: usize,
) -> Result<f64> {
    let objective = |n: &Network| -> Result<f64> {
        let out = n.predict(x)?;
        Ok(cross_entropy(&out.logits, labels)?.0 + beta * shade.loss(&out.pre_activations)?)
    };
    let out = net.forward(x, Mode::Eval)?;
    let (_, dlogits) = cross_entropy(&out.logits, labels)?;
    let (_, mut pre) = shade.loss_and_grad(&out.pre_activations)?;
    for t in &mut pre {
        t.scale(beta);
    }
    let grads = net.backward(&dlogits, Some(&pre))?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (li, g) in grads.layers.iter().enumerate() {
        let Some(g) = g else { continue };
        for (part, analytic) in [&g.weights, &g.bias].into_iter().enumerate() {
            for p in (0..analytic.len()).step_by(stride.max(1)) {
                let eval = |d: f64| -> Result<f64> {
                    let mut probe = net.clone();
                    let (w, b) = probe.layers_mut()[li].params_mut().expect("layer has parameters");
                    [w, b][part].data_mut()[p] += d;
                    objective(&probe)
                };
                let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
                worst = worst.max(rel_err(fd, analytic.data()[p], 1e-7));
            }
        }
    }
    Ok(worst)
}

fn randomized_state(net: &Network, rng: &mut Rng) -> Result<ShadeState> {
    let mut s = ShadeState::new(&net.observed_units(), 0.8, 1.0)?;
    for l in &mut s.layers {
        for i in 0..l.units() {
            l.mu0[i] = rng.uniform_range(-1.0, 0.5);
            l.mu1[i] = rng.uniform_range(0.5, 2.0);
        }
        l.weight = rng.uniform_range(0.5, 1.5);
    }
    Ok(s)
}

fn verify_gradients() -> Result<VerifyReport> {
    let mut r = VerifyReport::new(Scope::Gradients);
    let mut rng = Rng::derive(SEED, 1);
    let unit = unit_gradient_error(100, &mut rng);
    r.check(
        "unit_derivative",
        unit < 1e-6,
        format!("100 random (y, mu0, mu1): max relative error {unit:.3e} (limit 1e-6)"),
    );

    let mut mlp = Network::mlp(5, &[7, 6], 3, &mut rng)?;
    let x = rng.gaussian(&[6, 5], 0.0, 1.0)?;
    let labels = [0, 1, 2, 2, 1, 0];
    let shade = randomized_state(&mlp, &mut rng)?;
    let e = network_gradient_error(&mut mlp, &x, &labels, &shade, 0.3, 1)?;
    r.check(
        "mlp_objective",
        e < 1e-5,
        format!("cross-entropy + 0.3 * penalty, all parameters: max relative error {e:.3e} (limit 1e-5)"),
    );

    let mut conv = Network::convnet([1, 8, 8], 2, 3, &mut rng)?;
    let x = rng.gaussian(&[2, 1, 8, 8], 0.0, 1.0)?;
    let shade = randomized_state(&conv, &mut rng)?;
    let e = network_gradient_error(&mut conv, &x, &[1, 2], &shade, 0.3, 1)?;
    r.check(
        "convnet_objective",
        e < 1e-5,
        format!("cross-entropy + 0.3 * penalty, all parameters: max relative error {e:.3e} (limit 1e-5)"),
    );
    Ok(r)
}

fn column(values: &[f64]) -> Tensor {
    Tensor::new(vec![values.len(), 1], values.to_vec()).expect("length matches")
}

fn verify_algorithm1() -> Result<VerifyReport> {
    let mut r = VerifyReport::new(Scope::Algorithm1);
    let mut s = ShadeState::new(&[1], 0.8, 1.0)?;
    s.update_moving_averages(&[column(&[0.0])])?;
    let l = &s.layers[0];
    let err = [(l.p0[0], 0.6), (l.p1[0], 0.4), (l.mu0[0], -0.8), (l.mu1[0], 0.8)]
        .iter()
        .fold(0.0f64, |m, &(a, b)| m.max((a - b).abs()));
    r.check(
        "single_sample_from_init",
        err <= 1e-12,
        format!(
            "y=0 gives p0={} p1={} mu0={} mu1={} (max error {err:.1e})",
            l.p0[0], l.p1[0], l.mu0[0], l.mu1[0]
        ),
    );

    // Constant input c: p1 -> 1 - exp(-relu(c)). For c > 0 both means -> c.
    // For c <= 0 the Z=1 prior decays geometrically and mu0 -> c.
    let mut worst: f64 = 0.0;
    for c in [0.3, 1.0, 2.5, 6.0, -0.7] {
        let mut s = ShadeState::new(&[1], 0.8, 1.0)?;
        for _ in 0..500 {
            s.update_moving_averages(&[column(&[c; 4])])?;
        }
        let l = &s.layers[0];
        let (q0, q1) = posterior(c);
        worst = worst.max((l.p1[0] - q1).abs()).max((l.p0[0] - q0).abs());
        worst = worst.max((l.mu0[0] - c).abs());
        if c > 0.0 {
            worst = worst.max((l.mu1[0] - c).abs());
        }
    }
    r.check(
        "constant_stream_fixed_points",
        worst <= 1e-6,
        format!("5 constant streams x 500 batches: max deviation from closed form {worst:.2e} (limit 1e-6)"),
    );

    let mut s = ShadeState::new(&[1], 0.8, 1.0)?;
    s.update_moving_averages(&[column(&[-3.0, -1.0])])?;
    s.update_moving_averages(&[column(&[-2.0])])?;
    let ok = s.is_consistent(1e-12);
    r.check("priors_normalized", ok, "p0 + p1 = 1 after negative-only batches");
    Ok(r)
}

fn verify_bounds() -> Result<VerifyReport> {
    let mut r = VerifyReport::new(Scope::Bounds);
    let n = 100_000;
    let mut rng = Rng::derive(SEED, 3);
    let gauss: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let expo: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    let unif: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let base = 0.5 * (2.0 * PI * E).ln();
    let cases = [
        ("gaussian", gauss, 0.0),
        ("exponential", expo, base - 1.0),
        ("uniform", unif, 0.5 * (2.0 * PI * E / 12.0).ln()),
    ];
    for (name, samples, expect) in cases {
        let rep = variance_bound_check(&samples, None)?;
        let ok = rep.holds() && (rep.gap - expect).abs() <= 0.05;
        r.check(
            format!("variance_bound_{name}"),
            ok,
            format!(
                "entropy {:.4} bound {:.4} gap {:.4} (expected {expect:.3} +- 0.05)",
                rep.entropy, rep.bound, rep.gap
            ),
        );
    }
    let mix: Vec<f64> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                -3.0 + 0.5 * rng.standard_normal()
            } else {
                4.0 + rng.standard_normal()
            }
        })
        .collect();
    let post: Vec<(f64, f64)> = mix.iter().map(|&y| posterior(y)).collect();
    let rep = variance_bound_check(&mix, Some(&post))?;
    r.check(
        "variance_bound_bimodal_given_z",
        rep.holds(),
        format!("H(Y|Z) {:.4} bound {:.4} gap {:.4}", rep.entropy, rep.bound, rep.gap),
    );
    Ok(r)
}

fn random_joint(rng: &mut Rng, dims: Vec<usize>) -> Result<DiscreteJoint> {
    let n = dims.iter().product();
    // cubing spreads mass unevenly so the tables are not all near uniform
    let w = (0..n).map(|_| rng.uniform().powi(3)).collect();
    DiscreteJoint::from_weights(dims, w)
}

fn verify_reconstruction() -> Result<VerifyReport> {
    let mut r = VerifyReport::new(Scope::Reconstruction);
    let mut rng = Rng::derive(SEED, 4);
    let (mut lower, mut upper, mut jensen) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let rep = reconstruction_bounds_discrete(&random_joint(&mut rng, vec![8, 8])?)?;
        lower = lower.min(rep.lower_slack);
        upper = upper.min(rep.upper_slack);
        jensen = jensen.min(rep.jensen_slack);
    }
    r.check(
        "discrete_bounds_8x8",
        lower >= -1e-9 && upper >= -1e-9 && jensen >= -1e-9,
        format!("200 joints: min slack lower {lower:.3e} upper {upper:.3e} jensen {jensen:.3e} (limit -1e-9)"),
    );
    let mut worst: f64 = 0.0;
    let mut enumerated = 0;
    for _ in 0..50 {
        let rep = reconstruction_bounds_discrete(&random_joint(&mut rng, vec![4, 4])?)?;
        if let Some(b) = rep.brute_force_error {
            enumerated += 1;
            worst = worst.max(rep.error - b);
        }
    }
    r.check(
        "argmax_optimal_4x4",
        enumerated == 50 && worst <= 1e-12,
        format!("50 joints, all 4^4 reconstructors each: argmax excess error {worst:.1e}"),
    );
    for (name, model) in [
        ("independent", GaussianPair::independent(2.0, 3.0)),
        ("additive_noise", GaussianPair::additive_noise(2.0, 0.5)),
    ] {
        let samples = model.sample(&mut rng, 100_000);
        let rep = reconstruction_bounds_continuous(&model, &samples)?;
        r.check(
            format!("continuous_{name}"),
            rep.holds(1e-12, 0.02),
            format!(
                "bound {:.4} Var(X|Y) {:.4} sample mse {:.4} (rel err {:.3})",
                rep.bound, rep.conditional_variance, rep.sample_mse, rep.mse_relative_error
            ),
        );
    }
    Ok(r)
}

fn random_map(rng: &mut Rng, from: usize, to: usize) -> Vec<usize> {
    (0..from).map(|_| rng.below(to)).collect()
}

fn verify_dpi_suite() -> Result<VerifyReport> {
    let mut r = VerifyReport::new(Scope::Dpi);
    let mut rng = Rng::derive(SEED, 5);
    let mut worst_chain = f64::INFINITY;
    let mut worst_sub = f64::INFINITY;
    for i in 0..100 {
        let nc = 2 + rng.below(3);
        let nx = 4 + rng.below(13);
        let source = random_joint(&mut rng, vec![nc, nx])?;
        let mut stages = Vec::new();
        let mut width = nx;
        for s in 0..3 {
            let coords = vec![2 + rng.below(2), 2 + rng.below(2)];
            let out: usize = coords.iter().product();
            // every fourth instance gets a stochastic middle stage
            let stage = if i % 4 == 0 && s == 1 {
                let mut kernel = Vec::with_capacity(width * out);
                for _ in 0..width {
                    let row: Vec<f64> = (0..out).map(|_| rng.uniform()).collect();
                    let t: f64 = row.iter().sum();
                    kernel.extend(row.iter().map(|v| v / t));
                }
                Stage { kernel, coords }
            } else {
                Stage::deterministic(&random_map(&mut rng, width, out), coords)
            };
            stages.push(stage);
            width = out;
        }
        let rep = verify_dpi(&MarkovChain { source, stages })?;
        worst_chain = worst_chain.min(rep.min_chain_slack);
        worst_sub = worst_sub.min(rep.min_subadditivity_slack);
    }
    r.check(
        "chain_monotone",
        worst_chain >= -1e-12,
        format!("100 three-stage chains: min slack {worst_chain:.3e} (limit -1e-12)"),
    );
    r.check(
        "coordinate_subadditivity",
        worst_sub >= -1e-12,
        format!("100 three-stage chains: min slack {worst_sub:.3e} (limit -1e-12)"),
    );
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p_xc = random_joint(&mut rng, vec![16, 3])?;
        let ny = 2 + rng.below(7);
        let f = random_map(&mut rng, 16, ny);
        let rep = verify_decompositions(&joint_from_map(&p_xc, &f, ny)?)?;
        worst = worst.max(rep.max_residual());
    }
    r.check(
        "decompositions",
        worst <= 1e-10,
        format!("100 random maps on |X|=16, |C|=3: max residual {worst:.2e} (limit 1e-10)"),
    );
    Ok(r)
}

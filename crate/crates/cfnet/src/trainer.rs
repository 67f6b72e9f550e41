//! Two-phase mini-batch optimization of the Fourier-domain loss: AMSGrad
//! first, then Adam, over a fixed sample grid.

use crate::charlib::CharFn;
use crate::cosref::cumulants;
use crate::gaussnet::{loss_and_grad, loss_and_grad_2d, loss_eval, loss_eval_2d, LossParts, NetParams1D, NetParams2D};
use crate::sampler::Partition;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite {what} at epoch {epoch}, step {step}")]
    NonFinite { what: &'static str, epoch: usize, step: usize, last_finite: Box<Vec<f64>> },
    #[error("target moments are not finite; cannot initialize")]
    Init,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub neurons: usize,
    pub samples: usize,
    pub epochs1: usize,
    pub epochs2: usize,
    pub lr1: f64,
    pub lr2: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Element-wise gradient clip; off when absent.
    pub clip: Option<f64>,
    /// Fixed reduction order for bit-reproducible runs.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            neurons: 45,
            samples: 1_000_000,
            epochs1: 5,
            epochs2: 100,
            lr1: 0.0015,
            lr2: 0.0012,
            batch_size: 1024,
            seed: 0,
            loss_threshold: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            clip: None,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    /// Defaults for the bivariate mixture.
    pub fn two_dim() -> Self {
        Self { epochs1: 6, epochs2: 40, lr1: 0.04, lr2: 0.00025, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.neurons == 0 {
            return bad("neurons must be at least 1");
        }
        if self.samples < 2 {
            return bad("samples must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr1 > 0.0 && self.lr2 > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.beta1 >= 0.0 && self.beta1 < 1.0 && self.beta2 >= 0.0 && self.beta2 < 1.0) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(self.eps_adam > 0.0) {
            return bad("eps_adam must be positive");
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return bad("clip must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Amsgrad,
    Adam,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Amsgrad => "amsgrad",
            Phase::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub mse: f64,
    pub mae: f64,
    pub total: f64,
}

/// Moment accumulators shared by both optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_max: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], v_max: vec![0.0; n], t: 0, beta1, beta2, eps }
    }

    fn moments(&mut self, grad: &[f64]) {
        self.t += 1;
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
        }
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(state: &mut OptimState, params: &mut [f64], grad: &[f64], lr: f64) {
    state.moments(grad);
    let c1 = 1.0 - state.beta1.powf(state.t as f64);
    let c2 = 1.0 - state.beta2.powf(state.t as f64);
    for i in 0..params.len() {
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
}

/// AMSGrad: the denominator uses the running maximum of the second moment,
/// without bias correction.
pub fn amsgrad_step(state: &mut OptimState, params: &mut [f64], grad: &[f64], lr: f64) {
    state.moments(grad);
    for i in 0..params.len() {
        state.v_max[i] = state.v_max[i].max(state.v[i]);
        params[i] -= lr * state.m[i] / (state.v_max[i].sqrt() + state.eps);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub theta: T,
    pub history: Vec<EpochRecord>,
    pub final_loss: LossParts,
    /// Final loss exceeded the configured threshold.
    pub threshold_warning: bool,
}

/// Target samples G(eta_p) on a partition.
pub fn targets<F: CharFn>(cf: &F, points: &[f64]) -> Vec<Complex64> {
    use rayon::prelude::*;
    points.par_iter().map(|&e| cf.eval(e)).collect()
}

/// Lattice initialization: means spread over mean ± 6 sd of the target,
/// Gaussian-profile masses summing to 1, and a common width no narrower
/// than what keeps each atom's transform below `tail_tol` at eta'.
pub fn init_params<F: CharFn>(cf: &F, neurons: usize, eta_prime: f64, tail_tol: f64) -> Result<NetParams1D, TrainError> {
    let [mean, var, _] = cumulants(cf);
    if !(mean.is_finite() && var.is_finite() && var > 0.0) {
        return Err(TrainError::Init);
    }
    let sd = var.sqrt();
    let n = neurons;
    let (mus, spacing) = if n == 1 {
        (vec![mean], 2.0 * sd)
    } else {
        let h = 12.0 * sd / (n - 1) as f64;
        ((0..n).map(|k| mean - 6.0 * sd + h * k as f64).collect::<Vec<_>>(), h)
    };
    let width = (0.5 * spacing).max((2.0 * (1.0 / tail_tol).ln()).sqrt() / eta_prime);
    let profile: Vec<f64> = mus.iter().map(|mu| (-(mu - mean) * (mu - mean) / (2.0 * var)).exp()).collect();
    let total: f64 = profile.iter().sum();
    let w = 1.0 / (std::f64::consts::SQRT_2 * width);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    Ok(NetParams1D { beta: profile.iter().map(|p| p / total * w / sqrt_pi).collect(), w: vec![w; n], b: mus.iter().map(|mu| -mu * w).collect() })
}

fn pack(theta: &NetParams1D) -> Vec<f64> {
    let mut v = theta.beta.clone();
    v.extend(theta.w.iter().map(|w| w.ln()));
    v.extend_from_slice(&theta.b);
    v
}

fn unpack(flat: &[f64], n: usize) -> NetParams1D {
    NetParams1D { beta: flat[..n].to_vec(), w: flat[n..2 * n].iter().map(|u| u.exp()).collect(), b: flat[2 * n..].to_vec() }
}

fn clip(grad: &mut [f64], c: Option<f64>) {
    if let Some(c) = c {
        for g in grad {
            *g = g.clamp(-c, c);
        }
    }
}

struct Schedule {
    phase: Phase,
    epochs: usize,
    lr: f64,
}

fn phases(cfg: &TrainConfig) -> [Schedule; 2] {
    [Schedule { phase: Phase::Amsgrad, epochs: cfg.epochs1, lr: cfg.lr1 }, Schedule { phase: Phase::Adam, epochs: cfg.epochs2, lr: cfg.lr2 }]
}

/// Shared epoch loop. `step` returns the batch gradient for the flat
/// parameter vector; `full` evaluates the loss on the whole grid.
fn run<S, L>(cfg: &TrainConfig, len: usize, mut flat: Vec<f64>, mut step: S, full: L) -> Result<(Vec<f64>, Vec<EpochRecord>, LossParts), TrainError>
where
    S: FnMut(&[f64], &[usize]) -> Vec<f64>,
    L: Fn(&[f64]) -> LossParts,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..len).collect();
    let mut history = Vec::new();
    let mut epoch = 0;
    let mut last_finite = flat.clone();
    for sched in phases(cfg) {
        let mut state = OptimState::new(flat.len(), cfg.beta1, cfg.beta2, cfg.eps_adam);
        for _ in 0..sched.epochs {
            epoch += 1;
            order.shuffle(&mut rng);
            for (k, batch) in order.chunks(cfg.batch_size).enumerate() {
                let mut g = step(&flat, batch);
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(TrainError::NonFinite { what: "gradient", epoch, step: k, last_finite: Box::new(last_finite) });
                }
                clip(&mut g, cfg.clip);
                match sched.phase {
                    Phase::Amsgrad => amsgrad_step(&mut state, &mut flat, &g, sched.lr),
                    Phase::Adam => adam_step(&mut state, &mut flat, &g, sched.lr),
                }
            }
            let l = full(&flat);
            if !l.total.is_finite() || flat.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFinite { what: "loss", epoch, step: 0, last_finite: Box::new(last_finite) });
            }
            last_finite.clone_from(&flat);
            history.push(EpochRecord { epoch, phase: sched.phase, mse: l.mse, mae: l.mae, total: l.total });
        }
    }
    let final_loss = full(&flat);
    Ok((flat, history, final_loss))
}

/// Fits the network to `targets` sampled on `partition`, starting from `init`.
pub fn train_from(init: &NetParams1D, partition: &Partition, targets: &[Complex64], cfg: &TrainConfig) -> Result<TrainOutcome<NetParams1D>, TrainError> {
    cfg.validate()?;
    if targets.len() != partition.len() {
        return Err(TrainError::Config("targets and partition differ in length".into()));
    }
    let n = init.len();
    let pts = &partition.points;
    let mut be = Vec::with_capacity(cfg.batch_size);
    let mut bt = Vec::with_capacity(cfg.batch_size);
    let step = |flat: &[f64], batch: &[usize]| {
        let theta = unpack(flat, n);
        be.clear();
        bt.clear();
        for &i in batch {
            be.push(pts[i]);
            bt.push(targets[i]);
        }
        let (_, g) = loss_and_grad(&theta, &be, &bt, cfg.deterministic);
        let mut out = g.beta;
        // Chain rule through w = exp(u).
        out.extend(g.w.iter().zip(&theta.w).map(|(gw, w)| gw * w));
        out.extend(g.b);
        out
    };
    let full = |flat: &[f64]| loss_eval(&unpack(flat, n), pts, targets);
    let (flat, history, final_loss) = run(cfg, pts.len(), pack(init), step, full)?;
    // The log-width round trip is not exact, so an untouched run hands back the input.
    let theta = if history.is_empty() { init.clone() } else { unpack(&flat, n) };
    Ok(TrainOutcome { theta, history, threshold_warning: final_loss.total > cfg.loss_threshold, final_loss })
}

/// Initializes from the target moments and trains.
pub fn train<F: CharFn>(cf: &F, partition: &Partition, cfg: &TrainConfig, tail_tol: f64) -> Result<TrainOutcome<NetParams1D>, TrainError> {
    cfg.validate()?;
    let init = init_params(cf, cfg.neurons, partition.eta_prime, tail_tol)?;
    let t = targets(cf, &partition.points);
    train_from(&init, partition, &t, cfg)
}

fn pack_2d(theta: &NetParams2D) -> Vec<f64> {
    let n = theta.len();
    let mut v = Vec::with_capacity(6 * n);
    v.extend_from_slice(&theta.beta);
    v.extend(theta.mean.iter().flat_map(|m| *m));
    v.extend(theta.spread.iter().flat_map(|s| [s[0].ln(), s[1].ln()]));
    v.extend(theta.corr.iter().map(|r| r.atanh()));
    v
}

fn unpack_2d(flat: &[f64], n: usize) -> NetParams2D {
    NetParams2D {
        beta: flat[..n].to_vec(),
        mean: (0..n).map(|i| [flat[n + 2 * i], flat[n + 2 * i + 1]]).collect(),
        spread: (0..n).map(|i| [flat[3 * n + 2 * i].exp(), flat[3 * n + 2 * i + 1].exp()]).collect(),
        corr: flat[5 * n..].iter().map(|r| r.tanh()).collect(),
    }
}

/// Bivariate lattice initialization around the target mean.
pub fn init_params_2d(mean: [f64; 2], sd: [f64; 2], neurons: usize) -> NetParams2D {
    let cols = (neurons as f64).sqrt().ceil() as usize;
    let rows = neurons.div_ceil(cols);
    let coord = |k: usize, count: usize, l: usize| {
        if count == 1 {
            mean[l]
        } else {
            mean[l] - 3.0 * sd[l] + 6.0 * sd[l] * k as f64 / (count - 1) as f64
        }
    };
    let mut m = Vec::with_capacity(neurons);
    for i in 0..neurons {
        m.push([coord(i % cols, cols, 0), coord(i / cols, rows, 1)]);
    }
    let spread = [0, 1].map(|l| sd[l] * 6.0 / cols.max(rows) as f64);
    let profile: Vec<f64> = m
        .iter()
        .map(|p| {
            let z0 = (p[0] - mean[0]) / sd[0];
            let z1 = (p[1] - mean[1]) / sd[1];
            (-0.5 * (z0 * z0 + z1 * z1)).exp()
        })
        .collect();
    let total: f64 = profile.iter().sum();
    NetParams2D { beta: profile.iter().map(|p| p / total).collect(), mean: m, spread: vec![spread; neurons], corr: vec![0.0; neurons] }
}

/// Two-dimensional counterpart of [`train_from`], learning weights, means,
/// spreads and correlations.
pub fn train_2d(init: &NetParams2D, points: &[[f64; 2]], targets: &[Complex64], cfg: &TrainConfig) -> Result<TrainOutcome<NetParams2D>, TrainError> {
    cfg.validate()?;
    if targets.len() != points.len() {
        return Err(TrainError::Config("targets and points differ in length".into()));
    }
    let n = init.len();
    let mut be = Vec::with_capacity(cfg.batch_size);
    let mut bt = Vec::with_capacity(cfg.batch_size);
    let step = |flat: &[f64], batch: &[usize]| {
        let theta = unpack_2d(flat, n);
        be.clear();
        bt.clear();
        for &i in batch {
            be.push(points[i]);
            bt.push(targets[i]);
        }
        let (_, g) = loss_and_grad_2d(&theta, &be, &bt, cfg.deterministic);
        let mut out = g.beta;
        out.extend(g.mean.iter().flat_map(|m| *m));
        out.extend(g.log_spread.iter().flat_map(|s| *s));
        out.extend(g.corr_raw);
        out
    };
    let full = |flat: &[f64]| loss_eval_2d(&unpack_2d(flat, n), points, targets);
    let (flat, history, final_loss) = run(cfg, points.len(), pack_2d(init), step, full)?;
    let theta = if history.is_empty() { init.clone() } else { unpack_2d(&flat, n) };
    Ok(TrainOutcome { theta, history, threshold_warning: final_loss.total > cfg.loss_threshold, final_loss })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub best: f64,
    /// Fraction of epochs that improved on the running best.
    pub improved_fraction: f64,
}

/// Per-phase best loss and improvement fraction. The first epoch of a
/// phase counts as an improvement only against the previous phase's best.
pub fn loss_history_monotonicity_report(history: &[EpochRecord]) -> Vec<PhaseSummary> {
    let mut out: Vec<PhaseSummary> = Vec::new();
    let mut running = f64::INFINITY;
    for phase in [Phase::Amsgrad, Phase::Adam] {
        let rows: Vec<&EpochRecord> = history.iter().filter(|r| r.phase == phase).collect();
        if rows.is_empty() {
            continue;
        }
        let mut best = f64::INFINITY;
        let mut improved = 0;
        for (i, r) in rows.iter().enumerate() {
            let first_overall = out.is_empty() && i == 0;
            if !first_overall && r.total < running {
                improved += 1;
            }
            running = running.min(r.total);
            best = best.min(r.total);
        }
        let denom = if out.is_empty() { rows.len().saturating_sub(1).max(1) } else { rows.len() };
        out.push(PhaseSummary { phase, best, improved_fraction: improved as f64 / denom as f64 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_epoch_visits_each_point_once() {
        let cfg = TrainConfig { epochs1: 2, epochs2: 3, batch_size: 7, ..TrainConfig::default() };
        let len = 50;
        let seen = std::cell::RefCell::new(Vec::new());
        let step = |flat: &[f64], batch: &[usize]| {
            seen.borrow_mut().extend_from_slice(batch);
            vec![0.0; flat.len()]
        };
        let full = |_: &[f64]| LossParts { mse: 0.0, mae: 0.0, total: 0.0 };
        run(&cfg, len, vec![0.0; 3], step, full).unwrap();
        let seen = seen.into_inner();
        assert_eq!(seen.len(), 5 * len);
        for epoch in seen.chunks(len) {
            let mut e = epoch.to_vec();
            e.sort_unstable();
            assert_eq!(e, (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut s = OptimState::new(2, 0.9, 0.999, 1e-8);
        let mut p = [1.0, -2.0];
        adam_step(&mut s, &mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, [1.0, -2.0]);
        assert_eq!(s.m, vec![0.0, 0.0]);
        assert_eq!(s.v, vec![0.0, 0.0]);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut s = OptimState::new(1, 0.9, 0.999, 1e-8);
        let mut p = [0.0];
        adam_step(&mut s, &mut p, &[3.0], 0.01);
        assert!((p[0] + 0.01).abs() < 1e-10);
    }

    #[test]
    fn amsgrad_max_never_decreases() {
        let mut s = OptimState::new(1, 0.9, 0.999, 1e-8);
        let mut p = [0.0];
        let mut prev = 0.0;
        for g in [3.0, 1.0, 1.0, 1.0] {
            amsgrad_step(&mut s, &mut p, &[g], 0.01);
            assert!(s.v_max[0] >= prev);
            prev = s.v_max[0];
        }
    }

    #[test]
    fn strictly_decreasing_history_all_improve() {
        let h: Vec<EpochRecord> =
            (0..5).map(|k| EpochRecord { epoch: k + 1, phase: Phase::Amsgrad, mse: 0.0, mae: 0.0, total: 1.0 / (k + 1) as f64 }).collect();
        assert_eq!(loss_history_monotonicity_report(&h)[0].improved_fraction, 1.0);
    }

    #[test]
    fn constant_history_never_improves() {
        let h: Vec<EpochRecord> = (0..5).map(|k| EpochRecord { epoch: k + 1, phase: Phase::Adam, mse: 0.0, mae: 0.0, total: 0.5 }).collect();
        assert_eq!(loss_history_monotonicity_report(&h)[0].improved_fraction, 0.0);
    }

    #[test]
    fn bad_config_rejected() {
        assert!(TrainConfig { lr1: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
    }
}

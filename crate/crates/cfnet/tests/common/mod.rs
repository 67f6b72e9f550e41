#![allow(dead_code)]

use cfnet::charlib::*;
use cfnet::gaussnet::NetParams1D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn merton_params() -> MertonParams {
    MertonParams::risk_neutral(0.05, 0.15, 0.1, -1.08, 0.4)
}

pub fn merton() -> ModelSpec {
    ModelSpec::new(Dynamics::Merton(merton_params()), 1.0).unwrap()
}

pub fn kou() -> ModelSpec {
    let p = KouParams { drift: Drift::RiskNeutral { rate: 0.05 }, vol: 0.15, jump_rate: 0.1, up_prob: 0.3445, up_rate: 3.0465, down_rate: 3.0775 };
    ModelSpec::new(Dynamics::Kou(p), 0.001).unwrap()
}

pub fn cgmy() -> ModelSpec {
    let p = CgmyParams { rate: 0.1, activity: 1.0, left_decay: 5.0, right_decay: 5.0, fine_structure: 0.5 };
    ModelSpec::new(Dynamics::Cgmy(p), 1.0).unwrap()
}

pub fn heston_params() -> HestonParams {
    HestonParams { rate: 0.15, mean_reversion: 3.0, long_var: 0.09, vol_of_var: 0.3, correlation: 0.4, init_var: 0.2, spot: 100.0 }
}

pub fn heston() -> ModelSpec {
    ModelSpec::new(Dynamics::Heston(heston_params()), 5.0).unwrap()
}

pub fn hqh_params() -> HqhParams {
    let heston = HestonParams { rate: 0.1, mean_reversion: 5.0, long_var: 0.16, vol_of_var: 0.9, correlation: 0.1, init_var: 0.0625, spot: 9.0 };
    HqhParams { heston, init_queue: 2.0, clustering: 2.0, expiry: 3.0, base_intensity: 1.1, jump_mean: -0.3, jump_std: 0.4 }
}

pub fn hqh() -> ModelSpec {
    ModelSpec::new(Dynamics::Hqh(hqh_params()), 1.0).unwrap()
}

pub fn merton2d() -> ModelSpec {
    let p = Merton2dParams {
        rate: 0.05,
        vol: [0.12, 0.15],
        correlation: 0.3,
        jump_rate: 0.6,
        jump_mean: [-0.1, 0.1],
        jump_std: [0.17, 0.13],
        jump_correlation: -0.2,
    };
    ModelSpec::new(Dynamics::Merton2d(p), 1.0).unwrap()
}

pub fn one_dim_catalog() -> Vec<(&'static str, ModelSpec)> {
    vec![("merton", merton()), ("kou", kou()), ("cgmy", cgmy()), ("heston", heston()), ("hqh", hqh())]
}

/// Exact mixture representation of the Merton log-return density, truncated
/// after `terms` jump counts.
pub fn merton_mixture(p: &MertonParams, t: f64, terms: usize) -> NetParams1D {
    let lt = p.jump_rate * t;
    let base_mean = (p.drift() - 0.5 * p.vol * p.vol) * t;
    let mut beta = Vec::new();
    let mut w = Vec::new();
    let mut b = Vec::new();
    let mut weight = (-lt).exp();
    for k in 0..terms {
        if k > 0 {
            weight *= lt / k as f64;
        }
        let mean = base_mean + k as f64 * p.jump_mean;
        let var = p.vol * p.vol * t + k as f64 * p.jump_std * p.jump_std;
        let wk = 1.0 / (2.0 * var).sqrt();
        beta.push(weight * wk / std::f64::consts::PI.sqrt());
        w.push(wk);
        b.push(-mean * wk);
    }
    NetParams1D::new(beta, w, b).unwrap()
}

/// Same mixture expressed in the transformed variable Y = scale X + shift.
pub fn transformed_mixture(theta: &NetParams1D, lt: LinearTransform) -> NetParams1D {
    let w: Vec<f64> = theta.w.iter().map(|w| w / lt.scale).collect();
    let b: Vec<f64> = theta.b.iter().zip(&w).map(|(b, w)| b - w * lt.shift).collect();
    let beta = theta.beta.iter().map(|beta| beta / lt.scale).collect();
    NetParams1D::new(beta, w, b).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, n: usize) -> NetParams1D {
    let beta = (0..n).map(|_| rng.gen_range(0.1..1.0) * if rng.gen_bool(0.2) { -0.3 } else { 1.0 }).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let b = w.iter().map(|w| -rng.gen_range(-1.5..1.5) * w).collect();
    NetParams1D::new(beta, w, b).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

//! Closed-form characteristic functions, the linear input transform, and the
//! semi-explicit Merton density.
//!
//! Every one-dimensional model implements [`CharFn`], so the sampler, trainer
//! and COS baseline all accept either a raw model or a transformed one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfError {
    #[error("invalid model parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("characteristic function evaluation failed at eta = {eta}")]
    Evaluation { eta: f64 },
    #[error("model is {actual}-dimensional, got a {requested}-dimensional argument")]
    Dimension { actual: usize, requested: usize },
}

/// Anything that can be evaluated as a one-dimensional characteristic function.
pub trait CharFn: Sync {
    fn eval(&self, eta: f64) -> Complex64;
}

impl<F> CharFn for F
where
    F: Fn(f64) -> Complex64 + Sync,
{
    fn eval(&self, eta: f64) -> Complex64 {
        self(eta)
    }
}

/// Drift of a jump-diffusion, either given directly or implied by the
/// risk-neutral condition `drift = rate - jump_rate * compensator`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Drift {
    Explicit { drift: f64 },
    RiskNeutral { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MertonParams {
    #[serde(flatten)]
    pub drift: Drift,
    pub vol: f64,
    pub jump_rate: f64,
    pub jump_mean: f64,
    pub jump_std: f64,
}

impl MertonParams {
    pub fn risk_neutral(rate: f64, vol: f64, jump_rate: f64, jump_mean: f64, jump_std: f64) -> Self {
        Self { drift: Drift::RiskNeutral { rate }, vol, jump_rate, jump_mean, jump_std }
    }

    /// E[e^J] - 1 for the lognormal jump J.
    pub fn compensator(&self) -> f64 {
        (self.jump_mean + 0.5 * self.jump_std * self.jump_std).exp() - 1.0
    }

    pub fn drift(&self) -> f64 {
        match self.drift {
            Drift::Explicit { drift } => drift,
            Drift::RiskNeutral { rate } => rate - self.jump_rate * self.compensator(),
        }
    }

    fn exponent(&self, eta: f64) -> Complex64 {
        let s2 = self.vol * self.vol;
        let jump = (I * self.jump_mean * eta - 0.5 * self.jump_std * self.jump_std * eta * eta).exp();
        I * (self.drift() - 0.5 * s2) * eta - 0.5 * s2 * eta * eta + self.jump_rate * (jump - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KouParams {
    #[serde(flatten)]
    pub drift: Drift,
    pub vol: f64,
    pub jump_rate: f64,
    /// Probability that a jump is upward.
    pub up_prob: f64,
    /// Rate of the exponential upward jump size.
    pub up_rate: f64,
    /// Rate of the exponential downward jump size.
    pub down_rate: f64,
}

impl KouParams {
    pub fn compensator(&self) -> f64 {
        let q2 = 1.0 - self.up_prob;
        self.up_prob * self.up_rate / (self.up_rate - 1.0) + q2 * self.down_rate / (self.down_rate + 1.0) - 1.0
    }

    pub fn drift(&self) -> f64 {
        match self.drift {
            Drift::Explicit { drift } => drift,
            Drift::RiskNeutral { rate } => rate - self.jump_rate * self.compensator(),
        }
    }

    fn exponent(&self, eta: f64) -> Complex64 {
        let s2 = self.vol * self.vol;
        let q2 = 1.0 - self.up_prob;
        let up = self.up_prob * self.up_rate / (self.up_rate - I * eta);
        let down = q2 * self.down_rate / (self.down_rate + I * eta);
        I * (self.drift() - 0.5 * s2) * eta - 0.5 * s2 * eta * eta + self.jump_rate * (up + down - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmyParams {
    pub rate: f64,
    /// Overall jump activity.
    pub activity: f64,
    /// Exponential decay of the negative jump tail.
    pub left_decay: f64,
    /// Exponential decay of the positive jump tail.
    pub right_decay: f64,
    /// Fine-structure index, below 2.
    pub fine_structure: f64,
}

impl CgmyParams {
    fn levy(&self, z: Complex64) -> Complex64 {
        let y = self.fine_structure;
        let g = self.left_decay;
        let m = self.right_decay;
        let scale = self.activity * statrs::function::gamma::gamma(-y);
        scale * ((m - I * z).powf(y) - m.powf(y) + (g + I * z).powf(y) - g.powf(y))
    }

    /// Martingale correction, evaluated in closed form at eta = -i.
    pub fn compensator(&self) -> f64 {
        let y = self.fine_structure;
        let g = self.left_decay;
        let m = self.right_decay;
        let scale = self.activity * statrs::function::gamma::gamma(-y);
        -scale * ((m - 1.0).powf(y) - m.powf(y) + (g + 1.0).powf(y) - g.powf(y))
    }

    fn exponent(&self, eta: f64) -> Complex64 {
        self.levy(Complex64::new(eta, 0.0)) + I * eta * (self.rate + self.compensator())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub rate: f64,
    pub mean_reversion: f64,
    pub long_var: f64,
    pub vol_of_var: f64,
    pub correlation: f64,
    pub init_var: f64,
    pub spot: f64,
}

impl HestonParams {
    /// Characteristic function of ln S_t. Uses the rotation-free form
    /// with g = (xi - d)/(xi + d), which stays on the principal branch.
    fn cf(&self, eta: f64, t: f64) -> Complex64 {
        let k = self.mean_reversion;
        let s = self.vol_of_var;
        let s2 = s * s;
        let xi = k - s * self.correlation * I * eta;
        let d = (xi * xi + s2 * (I * eta + eta * eta)).sqrt();
        let g = (xi - d) / (xi + d);
        let ed = (-d * t).exp();
        let a = k * self.long_var / s2 * ((xi - d) * t - 2.0 * ((1.0 - g * ed) / (1.0 - g)).ln());
        let b = self.init_var / s2 * (xi - d) * (1.0 - ed) / (1.0 - g * ed);
        (I * eta * (self.spot.ln() + self.rate * t) + a + b).exp()
    }
}

/// Heston dynamics with a self-exciting jump counter whose intensity is
/// driven by a queue of active events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqhParams {
    #[serde(flatten)]
    pub heston: HestonParams,
    pub init_queue: f64,
    pub clustering: f64,
    pub expiry: f64,
    pub base_intensity: f64,
    pub jump_mean: f64,
    pub jump_std: f64,
}

impl HqhParams {
    /// Factor contributed by the jump counter, so that the full cf is the
    /// embedded Heston cf times this.
    pub fn jump_factor(&self, eta: f64, t: f64) -> Complex64 {
        let al = self.clustering;
        let be = self.expiry;
        let ls = self.base_intensity;
        let sy2 = self.jump_std * self.jump_std;
        let z = (I * self.jump_mean * eta - 0.5 * sy2 * eta * eta).exp();
        let mean_jump = (self.jump_mean + 0.5 * sy2).exp() - 1.0;
        let g = be + al * (1.0 + I * eta * mean_jump);
        let f = (g * g - 4.0 * al * be * z).sqrt();
        let h = g - 2.0 * al * z;
        let e = (-t * f).exp();
        let first = ls * t / (2.0 * al) * (be - al - I * al * mean_jump * eta - f);
        let second = ls / al * ((2.0 * f / (f + h)).ln() - (1.0 + e * (f - h) / (f + h)).ln());
        let y = (f - g + 2.0 * be + e * (f + g - 2.0 * be)) / (f + h + e * (f - h));
        (first + second).exp() * y.powf(self.init_queue)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merton2dParams {
    pub rate: f64,
    pub vol: [f64; 2],
    pub correlation: f64,
    pub jump_rate: f64,
    pub jump_mean: [f64; 2],
    pub jump_std: [f64; 2],
    pub jump_correlation: f64,
}

impl Merton2dParams {
    pub fn drift(&self) -> [f64; 2] {
        let k = |l: usize| (self.jump_mean[l] + 0.5 * self.jump_std[l] * self.jump_std[l]).exp() - 1.0;
        [0, 1].map(|l| self.rate - self.jump_rate * k(l) - 0.5 * self.vol[l] * self.vol[l])
    }

    fn cf(&self, eta: [f64; 2], t: f64) -> Complex64 {
        let quad = |s: [f64; 2], rho: f64| s[0] * s[0] * eta[0] * eta[0] + 2.0 * rho * s[0] * s[1] * eta[0] * eta[1] + s[1] * s[1] * eta[1] * eta[1];
        let mu = self.drift();
        let diffusion = I * t * (mu[0] * eta[0] + mu[1] * eta[1]) - 0.5 * t * quad(self.vol, self.correlation);
        let jm = self.jump_mean[0] * eta[0] + self.jump_mean[1] * eta[1];
        let jump = (I * jm - 0.5 * quad(self.jump_std, self.jump_correlation)).exp();
        (diffusion + self.jump_rate * t * (jump - 1.0)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    Merton(MertonParams),
    Kou(KouParams),
    Cgmy(CgmyParams),
    Heston(HestonParams),
    Hqh(HqhParams),
    Merton2d(Merton2dParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub dynamics: Dynamics,
    /// Horizon in years.
    pub horizon: f64,
}

fn require(ok: bool, field: &'static str, reason: &str) -> Result<(), CfError> {
    if ok {
        Ok(())
    } else {
        Err(CfError::InvalidParameter { field, reason: reason.to_string() })
    }
}

fn finite(vals: &[(&'static str, f64)]) -> Result<(), CfError> {
    for &(field, v) in vals {
        require(v.is_finite(), field, "must be finite")?;
    }
    Ok(())
}

fn check_heston(h: &HestonParams) -> Result<(), CfError> {
    finite(&[
        ("rate", h.rate),
        ("mean_reversion", h.mean_reversion),
        ("long_var", h.long_var),
        ("vol_of_var", h.vol_of_var),
        ("correlation", h.correlation),
        ("init_var", h.init_var),
        ("spot", h.spot),
    ])?;
    require(h.mean_reversion > 0.0, "mean_reversion", "must be positive")?;
    require(h.long_var > 0.0, "long_var", "must be positive")?;
    require(h.vol_of_var > 0.0, "vol_of_var", "must be positive")?;
    require(h.init_var > 0.0, "init_var", "must be positive")?;
    require(h.spot > 0.0, "spot", "must be positive")?;
    require(h.correlation.abs() <= 1.0, "correlation", "must lie in [-1, 1]")
}

impl ModelSpec {
    pub fn new(dynamics: Dynamics, horizon: f64) -> Result<Self, CfError> {
        let m = Self { dynamics, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self.dynamics {
            Dynamics::Merton2d(_) => 2,
            _ => 1,
        }
    }

    /// True when the cf describes ln S_T rather than ln(S_T / S_0).
    pub fn is_log_price(&self) -> bool {
        matches!(self.dynamics, Dynamics::Heston(_) | Dynamics::Hqh(_))
    }

    pub fn validate(&self) -> Result<(), CfError> {
        require(self.horizon.is_finite() && self.horizon > 0.0, "horizon", "must be positive")?;
        match &self.dynamics {
            Dynamics::Merton(p) => {
                finite(&[("drift", p.drift()), ("vol", p.vol), ("jump_rate", p.jump_rate), ("jump_mean", p.jump_mean), ("jump_std", p.jump_std)])?;
                require(p.vol > 0.0, "vol", "must be positive")?;
                require(p.jump_std > 0.0, "jump_std", "must be positive")?;
                require(p.jump_rate >= 0.0, "jump_rate", "must be non-negative")
            }
            Dynamics::Kou(p) => {
                finite(&[("vol", p.vol), ("jump_rate", p.jump_rate), ("up_prob", p.up_prob), ("up_rate", p.up_rate), ("down_rate", p.down_rate)])?;
                require(p.vol > 0.0, "vol", "must be positive")?;
                require(p.jump_rate >= 0.0, "jump_rate", "must be non-negative")?;
                require(p.up_prob > 0.0 && p.up_prob < 1.0, "up_prob", "must lie in (0, 1)")?;
                require(p.up_rate > 1.0, "up_rate", "must exceed 1")?;
                require(p.down_rate > 0.0, "down_rate", "must be positive")?;
                finite(&[("drift", p.drift())])
            }
            Dynamics::Cgmy(p) => {
                finite(&[
                    ("rate", p.rate),
                    ("activity", p.activity),
                    ("left_decay", p.left_decay),
                    ("right_decay", p.right_decay),
                    ("fine_structure", p.fine_structure),
                ])?;
                require(p.activity >= 0.0, "activity", "must be non-negative")?;
                require(p.left_decay >= 0.0, "left_decay", "must be non-negative")?;
                require(p.right_decay > 1.0, "right_decay", "must exceed 1 for a finite martingale correction")?;
                require(p.fine_structure < 2.0, "fine_structure", "must be below 2")?;
                require(p.fine_structure != 0.0 && p.fine_structure != 1.0, "fine_structure", "values 0 and 1 are degenerate")?;
                finite(&[("fine_structure", p.compensator())])
            }
            Dynamics::Heston(h) => check_heston(h),
            Dynamics::Hqh(p) => {
                check_heston(&p.heston)?;
                finite(&[
                    ("init_queue", p.init_queue),
                    ("clustering", p.clustering),
                    ("expiry", p.expiry),
                    ("base_intensity", p.base_intensity),
                    ("jump_mean", p.jump_mean),
                    ("jump_std", p.jump_std),
                ])?;
                require(p.init_queue >= 0.0, "init_queue", "must be non-negative")?;
                require(p.clustering > 0.0, "clustering", "must be positive")?;
                require(p.expiry > 0.0, "expiry", "must be positive")?;
                require(p.base_intensity >= 0.0, "base_intensity", "must be non-negative")?;
                require(p.jump_std > 0.0, "jump_std", "must be positive")
            }
            Dynamics::Merton2d(p) => {
                finite(&[("rate", p.rate), ("correlation", p.correlation), ("jump_rate", p.jump_rate), ("jump_correlation", p.jump_correlation)])?;
                for l in 0..2 {
                    finite(&[("vol", p.vol[l]), ("jump_mean", p.jump_mean[l]), ("jump_std", p.jump_std[l])])?;
                    require(p.vol[l] > 0.0, "vol", "must be positive")?;
                    require(p.jump_std[l] > 0.0, "jump_std", "must be positive")?;
                }
                require(p.jump_rate >= 0.0, "jump_rate", "must be non-negative")?;
                require(p.correlation.abs() <= 1.0, "correlation", "must lie in [-1, 1]")?;
                require(p.jump_correlation.abs() <= 1.0, "jump_correlation", "must lie in [-1, 1]")
            }
        }
    }

    /// Unchecked evaluation at horizon `t` for one-dimensional models.
    /// Two-dimensional models return NaN here; use [`ModelSpec::cf_at_2d`].
    pub fn cf_at(&self, eta: f64, t: f64) -> Complex64 {
        match &self.dynamics {
            Dynamics::Merton(p) => (t * p.exponent(eta)).exp(),
            Dynamics::Kou(p) => (t * p.exponent(eta)).exp(),
            Dynamics::Cgmy(p) => (t * p.exponent(eta)).exp(),
            Dynamics::Heston(p) => p.cf(eta, t),
            Dynamics::Hqh(p) => p.heston.cf(eta, t) * p.jump_factor(eta, t),
            Dynamics::Merton2d(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    pub fn cf_at_2d(&self, eta: [f64; 2], t: f64) -> Complex64 {
        match &self.dynamics {
            Dynamics::Merton2d(p) => p.cf(eta, t),
            _ => Complex64::new(f64::NAN, f64::NAN),
        }
    }
}

impl CharFn for ModelSpec {
    fn eval(&self, eta: f64) -> Complex64 {
        self.cf_at(eta, self.horizon)
    }
}

/// Checked evaluation: validates parameters, dimension and horizon, and reports
/// non-finite results with the offending argument.
pub fn cf_eval(model: &ModelSpec, eta: &[f64], t: f64) -> Result<Complex64, CfError> {
    model.validate()?;
    if eta.len() != model.dim() {
        return Err(CfError::Dimension { actual: model.dim(), requested: eta.len() });
    }
    require(t > 0.0 && t <= model.horizon, "t", "must lie in (0, horizon]")?;
    let v = if model.dim() == 2 { model.cf_at_2d([eta[0], eta[1]], t) } else { model.cf_at(eta[0], t) };
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(CfError::Evaluation { eta: eta[0] })
    }
}

/// Input transform Y = scale * X + shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTransform {
    pub scale: f64,
    pub shift: f64,
}

impl Default for LinearTransform {
    fn default() -> Self {
        Self { scale: 1.0, shift: 0.0 }
    }
}

impl LinearTransform {
    pub fn new(scale: f64, shift: f64) -> Result<Self, CfError> {
        let lt = Self { scale, shift };
        lt.validate()?;
        Ok(lt)
    }

    pub fn validate(&self) -> Result<(), CfError> {
        require(self.scale.is_finite() && self.scale > 0.0, "scale", "must be positive")?;
        require(self.shift.is_finite(), "shift", "must be finite")
    }

    pub fn forward(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }
}

/// Characteristic function of the transformed variable: e^{i eta c} G(a eta).
#[derive(Debug, Clone)]
pub struct Transformed<F> {
    pub inner: F,
    pub transform: LinearTransform,
}

impl<F: CharFn> CharFn for Transformed<F> {
    fn eval(&self, eta: f64) -> Complex64 {
        let lt = self.transform;
        Complex64::from_polar(1.0, eta * lt.shift) * self.inner.eval(lt.scale * eta)
    }
}

pub fn apply_transform<F: CharFn>(inner: F, transform: LinearTransform) -> Result<Transformed<F>, CfError> {
    transform.validate()?;
    Ok(Transformed { inner, transform })
}

/// Poisson-weighted normal series for the Merton log-return density.
///
/// The drift is whatever `params` resolves to, so the density is the exact
/// inverse of the model's characteristic function.
pub fn merton_density_reference(x: f64, t: f64, params: &MertonParams, n_terms: usize) -> f64 {
    let lt = params.jump_rate * t;
    let base = (params.drift() - 0.5 * params.vol * params.vol) * t;
    let mut weight = (-lt).exp();
    let mut sum = 0.0;
    for k in 0..n_terms.max(1) {
        if k > 0 {
            weight *= lt / k as f64;
        }
        let var = params.vol * params.vol * t + k as f64 * params.jump_std * params.jump_std;
        let z = x - base - k as f64 * params.jump_mean;
        sum += weight * (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    }
    sum
}

//! European prices by quadrature against a fitted density, and Bermudan
//! puts by backward induction with a dividend-and-exercise step.

use crate::charlib::LinearTransform;
use crate::gaussnet::{MixtureView, NetParams1D};
use crate::quadint::{integrate_with_breaks, QuadError, QuadOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriceError {
    #[error("invalid pricing input: {0}")]
    Parameter(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// What the fitted variable measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// x = ln(S_T / S_0).
    LogReturn { spot: f64 },
    /// x = ln S_T.
    LogPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub convention: Convention,
}

impl PayoffSpec {
    pub fn validate(&self) -> Result<(), PriceError> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(PriceError::Parameter("strike must be positive".into()));
        }
        if let Convention::LogReturn { spot } = self.convention {
            if !(spot.is_finite() && spot > 0.0) {
                return Err(PriceError::Parameter("spot must be positive".into()));
            }
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.convention {
            Convention::LogReturn { spot } => spot,
            Convention::LogPrice => 1.0,
        }
    }

    /// Payoff as a function of the fitted (untransformed) variable.
    pub fn value(&self, x: f64) -> f64 {
        let s = self.scale() * x.exp();
        match self.kind {
            OptionKind::Call => (s - self.strike).max(0.0),
            OptionKind::Put => (self.strike - s).max(0.0),
        }
    }

    /// Location of the payoff kink in the untransformed variable.
    pub fn kink(&self) -> f64 {
        (self.strike / self.scale()).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceOutcome {
    pub price: f64,
    /// Mixture mass outside the integration window.
    pub tail_mass: f64,
    pub window_warning: bool,
}

const WINDOW_MASS_TOL: f64 = 1e-6;
const PRICE_OPTS: QuadOptions = QuadOptions { abs_tol: 1e-10, rel_tol: 0.0, max_intervals: 10_000 };

/// Mass of the fitted mixture outside [lo, hi], from the normal tails.
pub fn tail_mass(theta: &NetParams1D, lo: f64, hi: f64) -> f64 {
    let view = MixtureView::from(theta);
    view.components()
        .map(|(mu, sd, m)| {
            let z = std::f64::consts::SQRT_2 * sd;
            let left = 0.5 * statrs::function::erf::erfc((mu - lo) / z);
            let right = 0.5 * statrs::function::erf::erfc((hi - mu) / z);
            m.abs() * (left + right)
        })
        .sum()
}

fn check_window(lo: f64, hi: f64) -> Result<(), PriceError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(PriceError::Parameter(format!("window [{lo}, {hi}] is empty")))
    }
}

fn breaks_with(lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=16).map(|k| lo + (hi - lo) * k as f64 / 16.0).collect();
    b.extend(extra.iter().copied().filter(|x| *x > lo && *x < hi));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Discounted expectation of the payoff under the network density of
/// Y = aX + c, integrating over y in `window`.
pub fn price_european(
    theta: &NetParams1D,
    lt: LinearTransform,
    payoff: &PayoffSpec,
    rate: f64,
    maturity: f64,
    window: (f64, f64),
) -> Result<PriceOutcome, PriceError> {
    payoff.validate()?;
    check_window(window.0, window.1)?;
    if !(maturity > 0.0) {
        return Err(PriceError::Parameter("maturity must be positive".into()));
    }
    let value = discounted_payoff(theta, lt, payoff, rate * maturity, window)?;
    let tail = tail_mass(theta, window.0, window.1);
    Ok(PriceOutcome { price: value, tail_mass: tail, window_warning: tail > WINDOW_MASS_TOL })
}

fn discounted_payoff(theta: &NetParams1D, lt: LinearTransform, payoff: &PayoffSpec, rt: f64, window: (f64, f64)) -> Result<f64, PriceError> {
    let kink = lt.forward(payoff.kink());
    let f = |y: f64| payoff.value(lt.inverse(y)) * theta.eval_density(y);
    let r = integrate_with_breaks(f, &breaks_with(window.0, window.1, &[kink]), PRICE_OPTS)?;
    Ok((-rt).exp() * r.value)
}

/// Same expectation against an arbitrary density of the untransformed variable.
pub fn price_with_density<F: Fn(f64) -> f64>(density: F, payoff: &PayoffSpec, rate: f64, maturity: f64, window: (f64, f64)) -> Result<f64, PriceError> {
    payoff.validate()?;
    check_window(window.0, window.1)?;
    let f = |x: f64| payoff.value(x) * density(x);
    let r = integrate_with_breaks(f, &breaks_with(window.0, window.1, &[payoff.kink()]), PRICE_OPTS)?;
    Ok((-rate * maturity).exp() * r.value)
}

/// Uniform grid of `q` subintervals over [x_min, x_max] in log price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub q: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, q: usize) -> Result<Self, PriceError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(PriceError::Parameter("grid bounds must satisfy x_min < x_max".into()));
        }
        if q < 2 {
            return Err(PriceError::Parameter("grid needs at least 2 subintervals".into()));
        }
        Ok(Self { x_min, x_max, q })
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / self.q as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.q).map(|k| if k == self.q { self.x_max } else { self.x_min + h * k as f64 }).collect()
    }

    /// Linear interpolation of nodal `values`, clamped to the end values.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        if x <= self.x_min {
            return values[0];
        }
        if x >= self.x_max {
            return values[self.q];
        }
        let s = (x - self.x_min) / self.step();
        let k = (s.floor() as usize).min(self.q - 1);
        let t = s - k as f64;
        values[k] * (1.0 - t) + values[k + 1] * t
    }
}

/// Dividend shift and exercise: v(x) = max(v(ln max(e^x - D, e^{x_min})), (E - e^x)^+).
pub fn intervention(values: &[f64], dividend: f64, strike: f64, grid: &SpatialGrid) -> Vec<f64> {
    let floor = grid.x_min.exp();
    grid.points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cont = if dividend == 0.0 { values[i] } else { grid.interpolate(values, (x.exp() - dividend).max(floor).ln()) };
            cont.max((strike - x.exp()).max(0.0))
        })
        .collect()
}

fn dividend_only(values: &[f64], dividend: f64, grid: &SpatialGrid) -> Vec<f64> {
    if dividend == 0.0 {
        return values.to_vec();
    }
    let floor = grid.x_min.exp();
    grid.points().iter().map(|&x| grid.interpolate(values, (x.exp() - dividend).max(floor).ln())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BermudanSpec {
    pub strike: f64,
    pub dividend: f64,
    pub rate: f64,
    /// Spacing between exercise dates; the fitted density must be for this horizon.
    pub step: f64,
    /// Number of exercise dates; the last one is maturity.
    pub dates: usize,
    pub spot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BermudanOutcome {
    pub price: f64,
    pub values: Vec<f64>,
    pub window_warning: bool,
}

/// Convolution weights of the clamped piecewise-linear interpolant against
/// the recovered density: the continuation at node q is Σ_j v_j K(q, j).
struct Kernel {
    /// Offset of index 0 in the per-cell arrays, in cells.
    k0: i64,
    /// For cell k (X in [kh, (k+1)h]): ∫ (1 - t) g and ∫ t g with t = X/h - k.
    left: Vec<f64>,
    right: Vec<f64>,
    /// Prefix sums of the mass per cell.
    cum: Vec<f64>,
}

impl Kernel {
    fn build(theta: &NetParams1D, lt: LinearTransform, window: (f64, f64), h: f64) -> Result<Self, PriceError> {
        // Window in increments of the untransformed variable.
        let (lo, hi) = (lt.inverse(window.0), lt.inverse(window.1));
        let k0 = (lo / h).floor() as i64;
        let k1 = (hi / h).ceil() as i64;
        let cells = (k1 - k0) as usize;
        let density = |x: f64| lt.scale * theta.eval_density(lt.forward(x));
        let opts = QuadOptions { abs_tol: 1e-10 / cells as f64, rel_tol: 0.0, max_intervals: 10_000 };
        let per: Vec<(f64, f64)> = (0..cells)
            .into_par_iter()
            .map(|c| {
                let k = k0 + c as i64;
                let a = (k as f64 * h).max(lo);
                let b = ((k + 1) as f64 * h).min(hi);
                if a >= b {
                    return Ok((0.0, 0.0));
                }
                let base = k as f64;
                let l = integrate_with_breaks(|x| (1.0 - (x / h - base)) * density(x), &[a, b], opts)?.value;
                let r = integrate_with_breaks(|x| (x / h - base) * density(x), &[a, b], opts)?.value;
                Ok((l, r))
            })
            .collect::<Result<_, QuadError>>()?;
        let left: Vec<f64> = per.iter().map(|p| p.0).collect();
        let right: Vec<f64> = per.iter().map(|p| p.1).collect();
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        for c in 0..cells {
            cum.push(cum[c] + left[c] + right[c]);
        }
        Ok(Self { k0, left, right, cum })
    }

    fn cells(&self) -> i64 {
        self.left.len() as i64
    }

    /// Mass of cells with index in [from, to), clipped to the kernel support.
    fn mass(&self, from: i64, to: i64) -> f64 {
        let a = (from - self.k0).clamp(0, self.cells()) as usize;
        let b = (to - self.k0).clamp(0, self.cells()) as usize;
        if b > a {
            self.cum[b] - self.cum[a]
        } else {
            0.0
        }
    }

    fn cell(&self, k: i64) -> (f64, f64) {
        let c = k - self.k0;
        if c < 0 || c >= self.cells() {
            (0.0, 0.0)
        } else {
            (self.left[c as usize], self.right[c as usize])
        }
    }

    fn apply(&self, values: &[f64], q: usize) -> f64 {
        let n = values.len() - 1;
        let qi = q as i64;
        // Increment X = (j - q) h + t h lands in grid cell j.
        let mut s = values[0] * self.mass(i64::MIN / 2, -qi) + values[n] * self.mass(n as i64 - qi, i64::MAX / 2);
        let lo = (self.k0 + qi).max(0);
        let hi = (self.k0 + self.cells() + qi).min(n as i64);
        for j in lo..hi {
            let (l, r) = self.cell(j - qi);
            s += values[j as usize] * l + values[j as usize + 1] * r;
        }
        s
    }
}

/// Bermudan put by backward induction over `spec.dates` periods.
///
/// The first step integrates the exact payoff; later steps integrate the
/// clamped linear interpolant of the nodal values. Dividends are paid at
/// every date before maturity, including the valuation date, where no
/// exercise is allowed.
pub fn price_bermudan(
    theta: &NetParams1D,
    lt: LinearTransform,
    spec: &BermudanSpec,
    grid: &SpatialGrid,
    window: (f64, f64),
) -> Result<BermudanOutcome, PriceError> {
    if spec.dates == 0 {
        return Err(PriceError::Parameter("at least one exercise date is required".into()));
    }
    if !(spec.dividend >= 0.0) {
        return Err(PriceError::Parameter("dividend must be non-negative".into()));
    }
    if !(spec.step > 0.0 && spec.spot > 0.0 && spec.strike > 0.0) {
        return Err(PriceError::Parameter("step, spot and strike must be positive".into()));
    }
    check_window(window.0, window.1)?;
    let xs = grid.points();
    let rt = spec.rate * spec.step;
    let terminal: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let put = PayoffSpec { kind: OptionKind::Put, strike: spec.strike, convention: Convention::LogReturn { spot: x.exp() } };
            discounted_payoff(theta, lt, &put, rt, window)
        })
        .collect::<Result<_, _>>()?;
    let kernel = if spec.dates > 1 { Some(Kernel::build(theta, lt, window, grid.step())?) } else { None };
    let mut v = terminal;
    for m in (0..spec.dates).rev() {
        if m + 1 < spec.dates {
            let k = kernel.as_ref().expect("kernel built for multi-date runs");
            let disc = (-rt).exp();
            v = (0..xs.len()).into_par_iter().map(|q| disc * k.apply(&v, q)).collect();
        }
        v = if m == 0 { dividend_only(&v, spec.dividend, grid) } else { intervention(&v, spec.dividend, spec.strike, grid) };
    }
    let price = grid.interpolate(&v, spec.spot.ln());
    let warn = tail_mass(theta, window.0, window.1) > WINDOW_MASS_TOL;
    Ok(BermudanOutcome { price, values: v, window_warning: warn })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub q: usize,
    pub price: f64,
    pub change: Option<f64>,
    pub ratio: Option<f64>,
}

/// Successive changes |p_k - p_{k-1}| and their quotients.
pub fn convergence_table(runs: &[(usize, f64)]) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (i, &(q, price)) in runs.iter().enumerate() {
        let change = (i > 0).then(|| (price - runs[i - 1].1).abs());
        let ratio = match (i > 1, change, rows.last().and_then(|r| r.change)) {
            (true, Some(c), Some(prev)) if c > 0.0 => Some(prev / c),
            _ => None,
        };
        rows.push(ConvergenceRow { q, price, change, ratio });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(100f64.ln() - 10.0, 100f64.ln() + 10.0, 200).unwrap()
    }

    #[test]
    fn zero_continuation_gives_put_payoff() {
        let g = grid();
        let out = intervention(&vec![0.0; g.q + 1], 1.0, 100.0, &g);
        for (v, x) in out.iter().zip(g.points()) {
            assert_eq!(*v, (100.0 - x.exp()).max(0.0));
        }
    }

    #[test]
    fn dominant_continuation_unchanged_without_dividend() {
        let g = grid();
        let vals: Vec<f64> = g.points().iter().map(|x| 200.0 + x).collect();
        assert_eq!(intervention(&vals, 0.0, 100.0, &g), vals);
    }

    #[test]
    fn constant_prices_have_no_ratio() {
        let rows = convergence_table(&[(200, 1.0), (400, 1.0), (800, 1.0)]);
        assert_eq!(rows[1].change, Some(0.0));
        assert_eq!(rows[2].ratio, None);
    }

    #[test]
    fn interpolation_clamps() {
        let g = SpatialGrid::new(0.0, 1.0, 2).unwrap();
        let v = [1.0, 2.0, 4.0];
        assert_eq!(g.interpolate(&v, -5.0), 1.0);
        assert_eq!(g.interpolate(&v, 5.0), 4.0);
        assert_eq!(g.interpolate(&v, 0.75), 3.0);
    }
}

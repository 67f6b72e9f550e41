//! Adaptive Gauss–Kronrod quadrature and the error metrics built on it.
//!
//! `metric_l2` returns the *squared* integral ∫|f1 - f2|² without a square
//! root, which is the convention the density error tables use.

use crate::gaussnet::{MixtureView, NetParams1D};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration bounds [{a}, {b}]")]
    Bounds { a: f64, b: f64 },
    #[error("tolerances must be positive")]
    Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    /// Set when the subdivision cap stopped refinement before the tolerance was met.
    pub capped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 10_000 }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] =
    [0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975, 0.417959183673469387755102040816327];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };
    let fc = eval(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs_k = k.abs();
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(c - dx)?;
        let f2 = eval(c + dx)?;
        fv[j] = (f1, f2);
        k += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = k * h;
    let asc = asc * h.abs();
    let abs_k = abs_k * h.abs();
    let mut err = ((k - g) * h).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * abs_k;
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(round);
    }
    Ok(Panel { a, b, value, err })
}

/// Adaptive 15-point Gauss–Kronrod integration over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult, QuadError> {
    integrate_with_breaks(f, &[a, b], opts)
}

/// Like [`integrate`], but starts from the panels delimited by `breaks`
/// (sorted, at least two points). Useful when the integrand has kinks or
/// narrow features at known locations.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult, QuadError> {
    if !(opts.abs_tol > 0.0 || opts.rel_tol > 0.0) {
        return Err(QuadError::Tolerance);
    }
    if breaks.len() < 2 {
        return Err(QuadError::Bounds { a: f64::NAN, b: f64::NAN });
    }
    for w in breaks.windows(2) {
        if !(w[0].is_finite() && w[1].is_finite() && w[0] <= w[1]) {
            return Err(QuadError::Bounds { a: w[0], b: w[1] });
        }
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let p = kronrod(&f, w[0], w[1])?;
        evaluations += 15;
        value += p.value;
        err += p.err;
        heap.push(p);
    }
    let mut capped = false;
    loop {
        if err <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            break;
        }
        if heap.len() >= opts.max_intervals {
            capped = true;
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            capped = true;
            break;
        }
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let err = panels.iter().map(|p| p.err).sum();
    Ok(QuadResult { value, abs_error_estimate: err, evaluations, capped })
}

/// Default metric half-width: the widest mixture component edge at 8 sd.
pub fn default_window(theta: &NetParams1D) -> f64 {
    MixtureView::from(theta).components().map(|(mu, sd, _)| mu.abs() + 8.0 * sd).fold(0.0, f64::max)
}

/// Uniform evaluation grid of `n` points on [-a, a].
pub fn uniform_grid(a: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| -a + 2.0 * a * k as f64 / (n - 1) as f64).collect()
}

const METRIC_OPTS: QuadOptions = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-10, max_intervals: 10_000 };

/// ∫_{-A}^{A} |f1 - f2|² dx, unrooted.
pub fn metric_l2<F1: Fn(f64) -> f64, F2: Fn(f64) -> f64>(f1: F1, f2: F2, a: f64) -> Result<f64, QuadError> {
    let breaks = uniform_grid(a, 65);
    Ok(integrate_with_breaks(|x| (f1(x) - f2(x)).powi(2), &breaks, METRIC_OPTS)?.value)
}

/// ∫_{-A}^{A} |f1 - f2| dx.
pub fn metric_l1<F1: Fn(f64) -> f64, F2: Fn(f64) -> f64>(f1: F1, f2: F2, a: f64) -> Result<f64, QuadError> {
    let breaks = uniform_grid(a, 65);
    Ok(integrate_with_breaks(|x| (f1(x) - f2(x)).abs(), &breaks, METRIC_OPTS)?.value)
}

/// ∫∫ over [-A1, A1] x [-A2, A2] of |f1 - f2|², by nested adaptive quadrature.
pub fn metric_l2_2d<F1, F2>(f1: F1, f2: F2, a: [f64; 2]) -> Result<f64, QuadError>
where
    F1: Fn([f64; 2]) -> f64 + Sync,
    F2: Fn([f64; 2]) -> f64 + Sync,
{
    let inner_breaks = uniform_grid(a[1], 33);
    let inner =
        |x: f64| -> f64 { integrate_with_breaks(|y| (f1([x, y]) - f2([x, y])).powi(2), &inner_breaks, METRIC_OPTS).map(|r| r.value).unwrap_or(f64::NAN) };
    Ok(integrate_with_breaks(inner, &uniform_grid(a[0], 33), METRIC_OPTS)?.value)
}

/// Maximum pointwise error over `grid`.
pub fn metric_mpe<F1: Fn(f64) -> f64, F2: Fn(f64) -> f64>(f1: F1, f2: F2, grid: &[f64]) -> f64 {
    grid.iter().map(|&x| (f1(x) - f2(x)).abs()).fold(0.0, f64::max)
}

/// Largest magnitude by which the network density dips below zero on `grid`.
pub fn nonneg_loss(theta: &NetParams1D, grid: &[f64]) -> f64 {
    grid.iter().map(|&x| (-theta.eval_density(x)).max(0.0)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlancherelReport {
    pub spatial: f64,
    pub fourier: f64,
    pub rel_gap: f64,
}

/// Compares ∫|g1 - g2|² dx with (1/2π)∫|G1 - G2|² dη, both by quadrature.
pub fn plancherel_check(t1: &NetParams1D, t2: &NetParams1D, ax: f64, aeta: f64) -> Result<PlancherelReport, QuadError> {
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_intervals: 10_000 };
    let spatial = integrate_with_breaks(|x| (t1.eval_density(x) - t2.eval_density(x)).powi(2), &uniform_grid(ax, 129), opts)?.value;
    let half = integrate_with_breaks(|eta| (t1.eval_cf(eta) - t2.eval_cf(eta)).norm_sqr(), &uniform_grid(aeta, 129)[64..], opts)?.value;
    // |G1 - G2|² is even in eta for real densities.
    let fourier = half / PI;
    let rel_gap = (spatial - fourier).abs() / spatial.max(1e-300);
    Ok(PlancherelReport { spatial, fourier, rel_gap })
}

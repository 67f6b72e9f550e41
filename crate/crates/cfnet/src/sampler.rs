//! Fourier-domain truncation, critical-point detection and sinh-stretched
//! sample partitions.

use crate::charlib::CharFn;
use crate::quadint::{integrate_with_breaks, QuadOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("tails do not fall below {eps} before eta = {cap}")]
    NonIntegrableTail { eps: f64, cap: f64 },
    #[error("invalid partition input: {0}")]
    Parameter(String),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] crate::quadint::QuadError),
}

/// Metadata for one concentration region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    /// Number of subintervals in the region.
    pub budget: usize,
    /// Index of the center within the region.
    pub center_index: usize,
    pub d_lower: f64,
    pub d_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub points: Vec<f64>,
    pub eta_prime: f64,
    pub regions: Vec<Region>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// SHA-256 over the little-endian bytes of every point.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.points {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Ratio of largest to smallest spacing.
    pub fn spacing_ratio(&self) -> f64 {
        let (lo, hi) = self.points.windows(2).map(|w| w[1] - w[0]).fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        hi / lo
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eta\n");
        for p in &self.points {
            s.push_str(&format!("{p:e}\n"));
        }
        s
    }
}

const TAIL_CAP: f64 = 4096.0;

/// Tail integrals of |Re G|, |Im G| and |G|² over |eta| > `from`, summed
/// over both sides. Each side integrates [from, 16 from] and keeps
/// doubling while the last octave still contributes at least eps/100.
fn tails<F: CharFn>(cf: &F, from: f64, eps: f64) -> Result<[f64; 3], SamplerError> {
    let opts = QuadOptions { abs_tol: eps * 1e-3, rel_tol: 1e-8, max_intervals: 10_000 };
    let mut total = [0.0; 3];
    for side in [1.0, -1.0] {
        let piece = |a: f64, b: f64| -> Result<[f64; 3], SamplerError> {
            let breaks: Vec<f64> = (0..=64).map(|k| a + (b - a) * k as f64 / 64.0).collect();
            let mut out = [0.0; 3];
            for (which, slot) in out.iter_mut().enumerate() {
                let f = |eta: f64| {
                    let g = cf.eval(side * eta);
                    match which {
                        0 => g.re.abs(),
                        1 => g.im.abs(),
                        _ => g.norm_sqr(),
                    }
                };
                *slot = integrate_with_breaks(f, &breaks, opts)?.value;
            }
            Ok(out)
        };
        let mut hi = 16.0 * from;
        let first = piece(from, hi)?;
        for k in 0..3 {
            total[k] += first[k];
        }
        let mut last = first;
        while last.iter().any(|v| *v >= eps / 100.0) {
            if hi > 64.0 * TAIL_CAP {
                return Err(SamplerError::NonIntegrableTail { eps, cap: TAIL_CAP });
            }
            last = piece(hi, 2.0 * hi)?;
            for k in 0..3 {
                total[k] += last[k];
            }
            hi *= 2.0;
        }
    }
    Ok(total)
}

/// Tensor product of two axis partitions, first axis outermost.
pub fn tensor_grid(first: &Partition, second: &Partition) -> Vec<[f64; 2]> {
    first.points.iter().flat_map(|&a| second.points.iter().map(move |&b| [a, b])).collect()
}

/// Smallest half-width eta' whose Fourier tails are each below `eps`.
pub fn find_eta_prime<F: CharFn>(cf: &F, eps: f64) -> Result<f64, SamplerError> {
    if !(eps > 0.0) {
        return Err(SamplerError::Parameter("tolerance must be positive".into()));
    }
    let ok = |x: f64| -> Result<bool, SamplerError> { Ok(tails(cf, x, eps)?.iter().all(|v| *v < eps)) };
    let mut hi = 1.0;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > TAIL_CAP {
            return Err(SamplerError::NonIntegrableTail { eps, cap: TAIL_CAP });
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Single-center sinh partition of [lower, upper] into `m_total`
/// subintervals with the center at index `m`.
pub fn partition_one(lower: f64, upper: f64, center: f64, m_total: usize, m: usize, d_lower: f64, d_upper: f64) -> Result<Vec<f64>, SamplerError> {
    if !(lower <= center && center <= upper && lower < upper) {
        return Err(SamplerError::Parameter(format!("center {center} outside [{lower}, {upper}]")));
    }
    if !(d_lower > 0.0 && d_upper > 0.0) {
        return Err(SamplerError::Parameter("density parameters must be positive".into()));
    }
    if m_total == 0 || m > m_total {
        return Err(SamplerError::Parameter(format!("index {m} invalid for {m_total} subintervals")));
    }
    let m = effective_index(lower, upper, center, m_total, m)?;
    let al = ((lower - center) / d_lower).asinh();
    let au = ((upper - center) / d_upper).asinh();
    let mut pts = Vec::with_capacity(m_total + 1);
    if m > 0 {
        pts.push(lower);
        for j in 1..m {
            pts.push(center + d_lower * (al * (1.0 - j as f64 / m as f64)).sinh());
        }
    }
    pts.push(center);
    let up = m_total - m;
    if up > 0 {
        for j in 1..up {
            pts.push(center + d_upper * (au * j as f64 / up as f64).sinh());
        }
        pts.push(upper);
    }
    Ok(pts)
}

/// Keeps the center index consistent with which sides are non-empty.
fn effective_index(lower: f64, upper: f64, center: f64, m_total: usize, m: usize) -> Result<usize, SamplerError> {
    let has_low = center > lower;
    let has_up = center < upper;
    match (has_low, has_up) {
        (true, true) if m_total < 2 => Err(SamplerError::Parameter("two-sided region needs at least 2 subintervals".into())),
        (true, true) => Ok(m.clamp(1, m_total - 1)),
        (false, _) => Ok(0),
        (true, false) => Ok(m_total),
    }
}

/// Region spec for [`partition_multi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBudget {
    pub center: f64,
    pub budget: usize,
    pub center_index: usize,
    pub d_lower: f64,
    pub d_upper: f64,
}

/// Concatenates single-center partitions over the regions delimited by the
/// midpoints between consecutive centers.
pub fn partition_multi(lo: f64, hi: f64, regions: &[RegionBudget]) -> Result<Partition, SamplerError> {
    if regions.is_empty() {
        return Err(SamplerError::Parameter("at least one concentration point is required".into()));
    }
    for w in regions.windows(2) {
        if !(w[0].center < w[1].center) {
            return Err(SamplerError::Parameter("concentration points must be strictly increasing".into()));
        }
    }
    if !(lo <= regions[0].center && regions[regions.len() - 1].center <= hi) {
        return Err(SamplerError::Parameter("concentration points must lie inside the domain".into()));
    }
    let mut bounds = vec![lo];
    for w in regions.windows(2) {
        bounds.push(0.5 * (w[0].center + w[1].center));
    }
    bounds.push(hi);
    let mut points: Vec<f64> = Vec::new();
    let mut meta = Vec::with_capacity(regions.len());
    for (j, r) in regions.iter().enumerate() {
        let (a, b) = (bounds[j], bounds[j + 1]);
        let seg = partition_one(a, b, r.center, r.budget, r.center_index, r.d_lower, r.d_upper)?;
        let m = effective_index(a, b, r.center, r.budget, r.center_index)?;
        meta.push(Region { lower: a, upper: b, center: r.center, budget: r.budget, center_index: m, d_lower: r.d_lower, d_upper: r.d_upper });
        let skip = usize::from(points.last() == seg.first());
        points.extend_from_slice(&seg[skip..]);
    }
    Ok(Partition { points, eta_prime: hi.abs().max(lo.abs()), regions: meta })
}

/// Default layout on [-eta', eta']: budgets proportional to region width,
/// centers at their proportional index, density width/8 on both sides.
/// `samples` is the total number of points.
pub fn default_partition(eta_prime: f64, centers: &[f64], samples: usize) -> Result<Partition, SamplerError> {
    if samples < 2 * centers.len() + 1 {
        return Err(SamplerError::Parameter(format!("{samples} samples are too few for {} regions", centers.len())));
    }
    let mut c: Vec<f64> = centers.iter().copied().filter(|x| x.abs() <= eta_prime).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    if c.is_empty() {
        c.push(0.0);
    }
    let mut bounds = vec![-eta_prime];
    for w in c.windows(2) {
        bounds.push(0.5 * (w[0] + w[1]));
    }
    bounds.push(eta_prime);
    let intervals = samples - 1;
    let width = 2.0 * eta_prime;
    // Largest-remainder rounding so budgets sum exactly.
    let raw: Vec<f64> = (0..c.len()).map(|j| intervals as f64 * (bounds[j + 1] - bounds[j]) / width).collect();
    let mut budget: Vec<usize> = raw.iter().map(|r| (r.floor() as usize).max(2)).collect();
    let mut assigned: usize = budget.iter().sum();
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    let mut k = 0;
    while assigned < intervals {
        budget[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    while assigned > intervals {
        let j = (0..budget.len()).max_by_key(|&j| budget[j]).unwrap_or(0);
        budget[j] -= 1;
        assigned -= 1;
    }
    let regions: Vec<RegionBudget> = (0..c.len())
        .map(|j| {
            let (a, b) = (bounds[j], bounds[j + 1]);
            let frac = (c[j] - a) / (b - a);
            let d = (b - a) / 8.0;
            RegionBudget { center: c[j], budget: budget[j], center_index: (frac * budget[j] as f64).round() as usize, d_lower: d, d_upper: d }
        })
        .collect();
    let mut p = partition_multi(-eta_prime, eta_prime, &regions)?;
    p.eta_prime = eta_prime;
    Ok(p)
}

/// Locations where a central-difference first or second derivative of
/// Re G or Im G changes sign on a uniform pre-scan of [-eta', eta'].
///
/// Points closer than eta'/64 are merged, at most 16 are kept (those where
/// |G| is largest), and 0 is always present.
pub fn detect_critical_points<F: CharFn>(cf: &F, eta_prime: f64, prescan: usize) -> Vec<f64> {
    let n = prescan.max(256);
    let h = 2.0 * eta_prime / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| -eta_prime + h * k as f64).collect();
    let vals: Vec<_> = grid.iter().map(|&e| cf.eval(e)).collect();
    let peak = vals.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut found: Vec<f64> = Vec::new();
    for part in 0..2 {
        let f: Vec<f64> = vals.iter().map(|g| if part == 0 { g.re } else { g.im }).collect();
        let d1: Vec<f64> = (1..n - 1).map(|k| f[k + 1] - f[k - 1]).collect();
        let d2: Vec<f64> = (1..n - 1).map(|k| f[k + 1] - 2.0 * f[k] + f[k - 1]).collect();
        for d in [&d1, &d2] {
            for k in 0..d.len() - 1 {
                if d[k] * d[k + 1] < 0.0 {
                    // Linear zero crossing between grid[k+1] and grid[k+2].
                    let t = d[k] / (d[k] - d[k + 1]);
                    found.push(grid[k + 1] + t * h);
                }
            }
        }
    }
    // Ignore features where the cf has already decayed to noise level.
    found.retain(|&e| cf.eval(e).norm() > 1e-8 * peak);
    found.sort_by(f64::total_cmp);
    let tol = eta_prime / 64.0;
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for e in found {
        match clusters.last_mut() {
            Some(c) if e - c[c.len() - 1] < tol => c.push(e),
            _ => clusters.push(vec![e]),
        }
    }
    let mut reps: Vec<f64> = clusters.iter().filter(|c| c.iter().all(|e| e.abs() >= tol)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    reps.sort_by(|a, b| cf.eval(*b).norm().total_cmp(&cf.eval(*a).norm()));
    reps.truncate(15);
    reps.push(0.0);
    reps.sort_by(f64::total_cmp);
    reps
}

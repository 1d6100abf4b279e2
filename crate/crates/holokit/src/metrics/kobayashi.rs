//! Upper bounds for the infinitesimal Kobayashi metric from polynomial analytic discs.
//!
//! A disc is `f(λ) = z + α (v̂ λ + Σ_{k≥2} b_k λ^k)`. For a fixed shape `b` the
//! largest admissible `α` is found by bracketing and bisection; the shape is
//! improved by a seeded direct search. `|v|/α` is then an upper bound for
//! `F^K(z, v)` by definition of the metric.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BoundKind, MetricEstimate, Witness};
use crate::domain::{gauss, Domain};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscConfig {
    /// Disc degree `N`.
    pub degree: usize,
    /// Boundary samples `M`.
    pub samples: usize,
    /// Safety margin relative to the depth `|ρ(z)|` of the center.
    pub eta: f64,
    /// Budget of shape evaluations.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig { degree: 8, samples: 256, eta: 1e-6, iterations: 3000, seed: 0 }
    }
}

impl DiscConfig {
    /// Lighter settings for metric evaluations inside path and ray integrals.
    pub fn cheap() -> Self {
        DiscConfig { degree: 8, samples: 96, eta: 1e-6, iterations: 400, seed: 0 }
    }

    /// Settings for reported path lengths.
    pub fn path() -> Self {
        DiscConfig { degree: 12, samples: 128, eta: 1e-6, iterations: 1500, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Polynomial map `λ ↦ Σ c_k λ^k` from the unit disc.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticDisc {
    pub coeffs: Vec<Point>,
    pub margin: f64,
}

impl AnalyticDisc {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, lambda: C64) -> Point {
        let n = self.coeffs[0].len();
        let mut out = linalg::zeros(n);
        for ck in self.coeffs.iter().rev() {
            for i in 0..n {
                out[i] = out[i] * lambda + ck[i];
            }
        }
        out
    }

    /// Checks `ρ(f(λ)) ≤ -margin` at `M` boundary samples and the center, plus radial
    /// samples when `ρ` is not known to be plurisubharmonic.
    pub fn is_admissible(&self, d: &Domain, m: usize, psh: bool) -> bool {
        let mut pts = vec![C64::new(0.0, 0.0)];
        for r in radii(psh) {
            for j in 0..m {
                pts.push(C64::from_polar(*r, 2.0 * std::f64::consts::PI * j as f64 / m as f64));
            }
        }
        pts.iter().all(|l| d.rho(&self.eval(*l)) <= -self.margin)
    }
}

fn radii(psh: bool) -> &'static [f64] {
    if psh {
        &[1.0]
    } else {
        &[0.5, 0.75, 0.9, 1.0]
    }
}

struct DiscProblem<'a> {
    d: &'a Domain,
    z: Point,
    vhat: Point,
    n: usize,
    deg: usize,
    eta: f64,
    /// Sample powers `λ_j^k`, `k = 1..=deg`.
    pows: Vec<Vec<C64>>,
    scratch: Vec<C64>,
    point: Point,
    last_bad: usize,
    evals: usize,
}

impl<'a> DiscProblem<'a> {
    fn directions(&self, shape: &[C64]) -> Vec<Point> {
        self.pows
            .iter()
            .map(|p| {
                let mut s: Point = self.vhat.iter().map(|v| v * p[0]).collect();
                for k in 2..=self.deg {
                    for i in 0..self.n {
                        s[i] += shape[(k - 2) * self.n + i] * p[k - 1];
                    }
                }
                s
            })
            .collect()
    }

    fn feasible(&mut self, alpha: f64, dirs: &[Point]) -> bool {
        let m = dirs.len();
        for off in 0..m {
            let j = (self.last_bad + off) % m;
            for i in 0..self.n {
                self.point[i] = self.z[i] + dirs[j][i] * alpha;
            }
            if self.d.rho_with(&self.point, &mut self.scratch) > -self.eta {
                self.last_bad = j;
                return false;
            }
        }
        true
    }

    /// Largest feasible `α` above `floor`, or `None` when `floor` itself is infeasible.
    fn alpha_above(&mut self, shape: &[C64], floor: f64) -> Option<f64> {
        self.evals += 1;
        let dirs = self.directions(shape);
        if !self.feasible(floor, &dirs) {
            return None;
        }
        let mut lo = floor;
        let mut hi = floor * 2.0;
        let cap = 1e6 * (1.0 + self.d.bounding_radius);
        while self.feasible(hi, &dirs) {
            lo = hi;
            hi *= 2.0;
            if hi > cap {
                return Some(lo);
            }
        }
        while hi - lo > 1e-9 * lo {
            let mid = 0.5 * (lo + hi);
            if self.feasible(mid, &dirs) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Largest feasible `α` for a shape, searching down from a small positive value.
    fn alpha_from_scratch(&mut self, shape: &[C64]) -> Option<f64> {
        let mut a = 1e-3 * self.d.bounding_radius.max(1.0);
        for _ in 0..80 {
            if let Some(v) = self.alpha_above(shape, a) {
                return Some(v);
            }
            a *= 0.5;
        }
        None
    }
}

/// Seed shapes: the linear disc and truncated Möbius discs, plain and damped,
/// aimed at the nearest boundary point of the slice through `v̂`.
fn seed_shapes(d: &Domain, z: &[C64], vhat: &[C64], n: usize, deg: usize) -> Vec<Vec<C64>> {
    let len = n * deg.saturating_sub(1);
    let mut seeds = vec![vec![C64::default(); len]];
    if deg < 2 {
        return seeds;
    }
    let tmax = 2.0 * d.bounding_radius + linalg::norm(z);
    let mut best: Option<(f64, f64)> = None;
    let k = 32;
    for j in 0..k {
        let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
        let u = linalg::scale(vhat, C64::from_polar(1.0, th));
        if let Some(t) = d.ray_exit(z, &u, tmax) {
            if best.map_or(true, |b| t < b.0) {
                best = Some((t, th));
            }
        }
    }
    let Some((_, th0)) = best else { return seeds };
    let rot = -C64::from_polar(1.0, -th0);
    for q in [0.25, 0.5, 0.7, 0.85, 0.95, 1.0] {
        for damped in [false, true] {
            if q == 1.0 && !damped {
                continue;
            }
            let mut s = vec![C64::default(); len];
            let mut pw = c(1.0, 0.0);
            for kk in 2..=deg {
                pw *= rot * q;
                let w = if damped { (deg + 1 - kk) as f64 / deg as f64 } else { 1.0 };
                for i in 0..n {
                    s[(kk - 2) * n + i] = vhat[i] * pw * w;
                }
            }
            seeds.push(s);
        }
    }
    seeds
}

fn random_basis(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            basis.push(v.into_iter().map(|x| x / r).collect());
        }
    }
    basis
}

/// Estimate plus the optimal shape, reusable as a warm start for nearby points.
pub fn kobayashi_inf_estimate_warm(
    d: &Domain,
    z: &[C64],
    v: &[C64],
    cfg: &DiscConfig,
    warm: Option<&[C64]>,
) -> Result<(MetricEstimate, Vec<C64>)> {
    estimate(d, z, v, cfg, warm, None)
}

/// The estimate with the search moves pushed through the complex-linear `frame`.
/// For an affine image `A(D)`, running with `frame = A` at `(A z, A v)` retraces
/// the identity-frame search on `D` at `(z, v)`.
pub fn kobayashi_inf_estimate_in_frame(d: &Domain, z: &[C64], v: &[C64], cfg: &DiscConfig, frame: &[Vec<C64>]) -> Result<MetricEstimate> {
    if frame.len() != d.n() || frame.iter().any(|r| r.len() != d.n()) {
        return Err(Error::InvalidArgument("frame must be n x n".into()));
    }
    let inv = linalg::inverse(frame).ok_or_else(|| Error::InvalidArgument("singular frame".into()))?;
    let v0 = linalg::norm(&linalg::matvec(&inv, v));
    let vn = linalg::norm(v);
    if vn == 0.0 {
        return estimate(d, z, v, cfg, None, None).map(|r| r.0);
    }
    let scaled: Vec<Vec<C64>> = frame.iter().map(|r| r.iter().map(|x| x * (v0 / vn)).collect()).collect();
    estimate(d, z, v, cfg, None, Some(&scaled)).map(|r| r.0)
}

fn estimate(d: &Domain, z: &[C64], v: &[C64], cfg: &DiscConfig, warm: Option<&[C64]>, frame: Option<&[Vec<C64>]>) -> Result<(MetricEstimate, Vec<C64>)> {
    let n = d.n();
    if z.len() != n || v.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let r0 = d.rho(z);
    if r0.is_nan() || r0 >= 0.0 {
        return Err(Error::OutsideDomain(format!("rho(z) = {r0}")));
    }
    let vn = linalg::norm(v);
    if vn == 0.0 {
        let est = MetricEstimate { value: 0.0, bound: BoundKind::Exact, witness: Witness::None, config: Some(cfg.clone()), flags: vec![] };
        return Ok((est, Vec::new()));
    }
    let vhat = linalg::scale_re(v, 1.0 / vn);
    let deg = cfg.degree.max(1);
    let psh = d.class.psh();
    let mut pows = Vec::new();
    for r in radii(psh) {
        for j in 0..cfg.samples {
            let l = C64::from_polar(*r, 2.0 * std::f64::consts::PI * j as f64 / cfg.samples as f64);
            let mut p = Vec::with_capacity(deg);
            let mut acc = l;
            for _ in 0..deg {
                p.push(acc);
                acc *= l;
            }
            pows.push(p);
        }
    }
    let eta = cfg.eta * r0.abs().min(d.rho_scale().max(f64::MIN_POSITIVE));
    let mut prob = DiscProblem {
        d,
        z: z.to_vec(),
        vhat: vhat.clone(),
        n,
        deg,
        eta,
        pows,
        scratch: Vec::new(),
        point: linalg::zeros(n),
        last_bad: 0,
        evals: 0,
    };

    let len = n * (deg - 1);
    let mut candidates = seed_shapes(d, z, &vhat, n, deg);
    if let Some(w) = warm {
        if w.len() == len {
            candidates.insert(0, w.to_vec());
        }
    }
    let mut best_alpha = 0.0;
    let mut best_shape = vec![C64::default(); len];
    for s in &candidates {
        let a = if best_alpha > 0.0 { prob.alpha_above(s, best_alpha * (1.0 + 1e-9)) } else { prob.alpha_from_scratch(s) };
        if let Some(a) = a {
            if a > best_alpha {
                best_alpha = a;
                best_shape = s.clone();
            }
        }
    }
    if best_alpha <= 0.0 {
        return Err(Error::DegenerateGeometry("no admissible disc even at tiny radius".into()));
    }

    // Direct search over the real coordinates of the shape.
    let dim = 2 * len;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut step = if warm.is_some() { 0.02 } else { 0.1 };
    while dim > 0 && prob.evals < cfg.iterations && step > 1e-5 {
        let basis = random_basis(&mut rng, dim);
        let mut improved = false;
        'poll: for b in &basis {
            for sign in [1.0, -1.0] {
                if prob.evals >= cfg.iterations {
                    break 'poll;
                }
                let mut mv: Vec<C64> = (0..len).map(|i| c(b[2 * i], b[2 * i + 1])).collect();
                if let Some(f) = frame {
                    for block in mv.chunks_mut(n) {
                        let img = linalg::matvec(f, block);
                        block.copy_from_slice(&img);
                    }
                }
                let trial: Vec<C64> = (0..len).map(|i| best_shape[i] + mv[i] * (sign * step)).collect();
                if let Some(a) = prob.alpha_above(&trial, best_alpha * (1.0 + 1e-7)) {
                    best_alpha = a;
                    best_shape = trial;
                    improved = true;
                    break;
                }
            }
        }
        step *= if improved { 1.5 } else { 0.5 };
    }

    let mut coeffs = vec![z.to_vec(), linalg::scale_re(&vhat, best_alpha)];
    for k in 2..=deg {
        coeffs.push((0..n).map(|i| best_shape[(k - 2) * n + i] * best_alpha).collect());
    }
    let mut flags = vec![];
    if !psh {
        flags.push("RadialContainment".to_string());
    }
    let est = MetricEstimate {
        value: vn / best_alpha,
        bound: BoundKind::UpperBound,
        witness: Witness::Disc(AnalyticDisc { coeffs, margin: eta }),
        config: Some(cfg.clone()),
        flags,
    };
    Ok((est, best_shape))
}

/// Upper bound for `F^K_D(z, v)` from the best admissible polynomial disc found.
pub fn kobayashi_inf_estimate(d: &Domain, z: &[C64], v: &[C64], cfg: &DiscConfig) -> Result<MetricEstimate> {
    kobayashi_inf_estimate_warm(d, z, v, cfg, None).map(|r| r.0)
}

/// `F^K_{U∩D}(z, v) / F^K_D(z, v)` for a ball neighborhood `U = B(center, radius)`.
pub fn localization_ratio(d: &Domain, center: &[C64], radius: f64, z: &[C64], v: &[C64], cfg: &DiscConfig) -> Result<f64> {
    if linalg::dist(z, center) >= radius {
        return Err(Error::Precondition("z is not in U".into()));
    }
    // U contains the bounding ball, hence D.
    if linalg::norm(center) + d.bounding_radius <= radius {
        return Ok(1.0);
    }
    let local = d.intersect_ball(center, radius)?;
    let a = kobayashi_inf_estimate(&local, z, v, cfg)?;
    let b = kobayashi_inf_estimate(d, z, v, cfg)?;
    if b.value == 0.0 {
        return Err(Error::DegenerateGeometry("vacuous zero estimate".into()));
    }
    Ok(a.value / b.value)
}

//! Quantitative boundary estimates: Catlin bidiscs and McNeal polydiscs,
//! Herbort's pseudodistance, Kobayashi-ball sandwich fits, peak functions,
//! the two-sided log bounds near strongly pseudoconvex boundaries and a few
//! closed-form helpers.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{random_unit, Domain, DomainClass};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::metrics::{kobayashi_distance_estimate, kobayashi_inf_estimate, BallProber, DiscConfig, PathConfig};
use crate::poly::{Monomial, Poly};
use crate::report::ResidualRow;
use crate::scaling::{catlin_automorphism, catlin_chart, catlin_tau, mcneal_frame, HomogeneousExpansion, McNealFrame, PolynomialAutomorphism};

/// Bisection range for `d'(a, b)`.
pub const DPRIME_RANGE: (f64, f64) = (1e-12, 1e3);
pub const DPRIME_ITERATIONS: usize = 60;

fn declared_type(d: &Domain) -> Result<u32> {
    d.declared_type.ok_or_else(|| Error::Precondition(format!("{} has no declared type", d.name)))
}

/// Smallest `s` in `[lo, hi]` with `member(s)`, by bisection on `log s`.
/// `None` when `member(hi)` fails; `Some(lo)` when `member(lo)` already holds.
fn inf_scale(member: impl Fn(f64) -> bool, lo: f64, hi: f64, iterations: usize) -> Option<f64> {
    if member(lo) {
        return Some(lo);
    }
    if !member(hi) {
        return None;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..iterations {
        let m = 0.5 * (a + b);
        if member(m.exp()) {
            b = m
        } else {
            a = m
        }
    }
    Some(b.exp())
}

/// Everything needed for `Q(q, δ)` at all `δ`: the map `φ^q` (in original
/// coordinates) and the boundary expansion at the foot of `q`.
#[derive(Clone, Debug)]
pub struct BidiscFamily {
    pub q: Point,
    pub foot: Point,
    pub boundary_distance: f64,
    /// Original coordinates to `w`, with `q ↦ 0`.
    pub map: PolynomialAutomorphism,
    pub expansion: HomogeneousExpansion,
    pub d_coeffs: Vec<C64>,
}

impl BidiscFamily {
    /// `q` interior or on the boundary; the expansion is taken at the closest
    /// boundary point and the map recentred at `q`.
    pub fn new(d: &Domain, q: &[C64], two_m: u32) -> Result<Self> {
        if d.n() != 2 {
            return Err(Error::Precondition("bidiscs need n = 2".into()));
        }
        let r = d.rho(q);
        let (foot, dist) = if r.abs() <= 1e-10 * d.rho_scale().max(1.0) {
            (q.to_vec(), 0.0)
        } else {
            let f = d.boundary_distance(q)?;
            (f.foot, f.distance)
        };
        let chart = catlin_chart(d, &foot)?;
        let (_, dco, expansion) = catlin_automorphism(&chart.domain, &linalg::zeros(2), two_m)?;
        let g = c(1.0, 0.0) / dco[0];
        let mut shear = Poly::zero(2);
        for (l, dl) in dco.iter().enumerate().skip(1) {
            shear.add_term(Monomial::new(vec![l as u32, 0], vec![0, 0]), -dl * g);
        }
        let cq: Point = chart.map.eval(q).iter().map(|x| -x).collect();
        let map = chart.map.then(&PolynomialAutomorphism::translation(&cq)).then(&PolynomialAutomorphism::shear_last(2, g, &shear)?);
        Ok(BidiscFamily { q: q.to_vec(), foot, boundary_distance: dist, map, expansion, d_coeffs: dco })
    }

    pub fn tau(&self, delta: f64) -> Result<f64> {
        catlin_tau(&self.expansion, delta)
    }

    pub fn coords(&self, z: &[C64]) -> Point {
        self.map.eval(z)
    }

    pub fn contains(&self, z: &[C64], delta: f64) -> bool {
        let Ok(tau) = self.tau(delta) else { return false };
        let w = self.coords(z);
        w[0].norm() < tau && w[1].norm() < delta
    }

    /// `inf{δ : z ∈ Q(q, δ)}` by bisection; `None` when `z` is outside every
    /// bidisc in the range.
    pub fn inf_delta(&self, z: &[C64]) -> Option<f64> {
        let w = self.coords(z);
        let member = |delta: f64| self.tau(delta).is_ok_and(|t| w[0].norm() < t && w[1].norm() < delta);
        inf_scale(member, DPRIME_RANGE.0, DPRIME_RANGE.1, DPRIME_ITERATIONS)
    }

    pub fn bidisc(&self, delta: f64) -> Result<BidiscSpec> {
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        Ok(BidiscSpec { center: self.q.clone(), eps: delta, tau: self.tau(delta)?, map: self.map.clone() })
    }
}

/// `Q(q, ε) = {z : |w_1| < τ(q, ε), |w_2| < ε}` with `w = φ^q(z)`.
#[derive(Clone, Debug, Serialize)]
pub struct BidiscSpec {
    pub center: Point,
    pub eps: f64,
    pub tau: f64,
    #[serde(skip)]
    pub map: PolynomialAutomorphism,
}

impl BidiscSpec {
    pub fn contains(&self, z: &[C64]) -> bool {
        let w = self.map.eval(z);
        w[0].norm() < self.tau && w[1].norm() < self.eps
    }
}

pub fn catlin_bidisc(d: &Domain, q: &[C64], delta: f64) -> Result<BidiscSpec> {
    BidiscFamily::new(d, q, declared_type(d)?)?.bidisc(delta)
}

/// Largest `δ'/δ` over samples `p ∈ Q(q, δ)`, where `δ' = inf{s : q ∈ Q(p, s)}`.
pub fn reciprocity_constant(d: &Domain, q: &[C64], delta: f64, samples: usize, seed: u64) -> Result<f64> {
    let two_m = declared_type(d)?;
    let fam = BidiscFamily::new(d, q, two_m)?;
    let tau = fam.tau(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point> = (0..samples)
        .map(|_| {
            let w = vec![C64::from_polar(tau * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * std::f64::consts::TAU), C64::from_polar(delta * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * std::f64::consts::TAU)];
            fam.map.eval_inverse(&w)
        })
        .filter(|p| d.contains(p))
        .collect();
    let ratios: Vec<f64> = pts
        .par_iter()
        .map(|p| {
            let fp = BidiscFamily::new(d, p, two_m)?;
            fp.inf_delta(q).map(|s| s / delta).ok_or_else(|| Error::RootFinding("q is in no bidisc around p".into()))
        })
        .collect::<Result<_>>()?;
    if ratios.is_empty() {
        return Err(Error::DegenerateGeometry("no sample of Q(q, delta) lies in the domain".into()));
    }
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// `P(q, ε)` in McNeal coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct McNealPolydisc {
    pub frame: McNealFrame,
    pub radii: Vec<f64>,
}

impl McNealPolydisc {
    pub fn contains(&self, z: &[C64]) -> bool {
        let q: Point = self.frame.q.iter().map(|x| -x).collect();
        let w = linalg::matvec(&self.frame.unitary, &linalg::add(z, &q));
        w.iter().zip(&self.radii).all(|(x, r)| x.norm() < *r)
    }
}

pub fn mcneal_polydisc(d: &Domain, q: &[C64], eps: f64) -> Result<McNealPolydisc> {
    if d.class != DomainClass::ConvexFiniteType && d.class != DomainClass::FiniteType2D && d.class != DomainClass::StronglyPseudoconvex {
        return Err(Error::Precondition(format!("class {} is not convex finite type", d.class.name())));
    }
    let frame = mcneal_frame(d, q, eps)?;
    let radii = frame.taus.clone();
    Ok(McNealPolydisc { frame, radii })
}

/// Terms of `ρ*(a, b)`.
#[derive(Clone, Debug, Serialize)]
pub struct RhoStar {
    pub value: f64,
    /// `d'(a, b)`, absent when the bisection bracket failed.
    pub d_prime: Option<f64>,
    /// `min(d'(a, b), |a - b|)`.
    pub separation: f64,
    pub boundary_distance: f64,
    /// `|⟨L(a), a - b⟩|`.
    pub pairing: f64,
    /// `τ(a, d(a, ∂D))`.
    pub tau: f64,
    pub flags: Vec<String>,
}

/// `log(1 + sep/d_a + pairing/τ)`.
pub fn rho_star_formula(separation: f64, d_a: f64, pairing: f64, tau: f64) -> f64 {
    (1.0 + separation / d_a + pairing / tau).ln()
}

/// `ρ*(a, b)` given the bidisc families at `a` and `b`.
pub fn rho_star_with(d: &Domain, fa: &BidiscFamily, fb: &BidiscFamily) -> Result<RhoStar> {
    let (a, b) = (&fa.q, &fb.q);
    let da = fa.boundary_distance;
    if da <= 0.0 {
        return Err(Error::Precondition("a must be interior".into()));
    }
    let mut flags = Vec::new();
    let euclid = linalg::dist(a, b);
    let d_prime = fb.inf_delta(a);
    let separation = match d_prime {
        Some(s) => s.min(euclid),
        None => {
            flags.push("d' bracket failed; using |a - b|".to_string());
            euclid
        }
    };
    let g = d.wirtinger_gradient(a);
    let l = [-g[1], g[0]];
    let diff = linalg::sub(a, b);
    let pairing = linalg::hdot(&l, &diff).norm();
    let tau = fa.tau(da)?;
    let value = if euclid == 0.0 { 0.0 } else { rho_star_formula(separation, da, pairing, tau) };
    Ok(RhoStar { value, d_prime, separation, boundary_distance: da, pairing, tau, flags })
}

pub fn herbort_rho_star(d: &Domain, a: &[C64], b: &[C64], two_m: u32) -> Result<RhoStar> {
    if d.n() != 2 {
        return Err(Error::Precondition("the Herbort estimate needs n = 2".into()));
    }
    for z in [a, b] {
        if !d.contains(z) {
            return Err(Error::OutsideDomain(format!("{z:?}")));
        }
    }
    let fa = BidiscFamily::new(d, a, two_m)?;
    let fb = BidiscFamily::new(d, b, two_m)?;
    rho_star_with(d, &fa, &fb)
}

#[derive(Clone, Debug, Serialize)]
pub struct HerbortFit {
    pub c_star: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Per pair: distance estimate, `ρ*(a,b) + ρ*(b,a)` and their ratio.
    pub pairs: Vec<(f64, f64, f64)>,
    pub residuals: Vec<ResidualRow>,
}

/// `C_* = min(min r_i, 1/max r_i)` with `r_i = d_D(a, b) / (ρ*(a, b) + ρ*(b, a))`.
pub fn herbort_sandwich_fit(d: &Domain, pairs: &[(Point, Point)], cfg: &PathConfig) -> Result<HerbortFit> {
    let two_m = declared_type(d)?;
    let pairs: Vec<&(Point, Point)> = pairs.iter().filter(|(a, b)| a != b).collect();
    if pairs.len() < 10 {
        return Err(Error::Precondition(format!("need at least 10 distinct pairs, got {}", pairs.len())));
    }
    let data: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(a, b)| {
            let fa = BidiscFamily::new(d, a, two_m)?;
            let fb = BidiscFamily::new(d, b, two_m)?;
            let s = rho_star_with(d, &fa, &fb)?.value + rho_star_with(d, &fb, &fa)?.value;
            let dist = kobayashi_distance_estimate(d, a, b, cfg)?.value;
            Ok((dist, s))
        })
        .collect::<Result<_>>()?;
    herbort_fit_from(&data)
}

/// The fit from precomputed `(d_D, ρ*(a,b) + ρ*(b,a))` pairs.
pub fn herbort_fit_from(data: &[(f64, f64)]) -> Result<HerbortFit> {
    let mut out = Vec::with_capacity(data.len());
    for (i, (dist, s)) in data.iter().enumerate() {
        let r = dist / s;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::Assertion(format!("pair {i}: ratio {r} is not positive")));
        }
        out.push((*dist, *s, r));
    }
    let min_ratio = out.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let max_ratio = out.iter().map(|p| p.2).fold(0.0, f64::max);
    let c_star = min_ratio.min(1.0 / max_ratio);
    let mut residuals = Vec::new();
    for (i, (dist, s, _)) in out.iter().enumerate() {
        residuals.push(ResidualRow { id: i, quantity: "herbort_lower".into(), lhs: c_star * s, rhs: *dist, margin: dist - c_star * s });
        residuals.push(ResidualRow { id: i, quantity: "herbort_upper".into(), lhs: *dist, rhs: s / c_star, margin: s / c_star - dist });
    }
    Ok(HerbortFit { c_star, min_ratio, max_ratio, pairs: out, residuals })
}

/// Shape of the comparison regions in a sandwich fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RegionLaw {
    /// `Q(q, C d)`.
    CatlinBidisc,
    /// Polydisc in a unitary frame whose last axis is the complex normal at the
    /// foot of `q`, with radii `(C d)^{e_i}`.
    Polydisc { exponents: Vec<f64> },
}

impl RegionLaw {
    pub fn exponents(&self, two_m: u32) -> Vec<f64> {
        match self {
            RegionLaw::CatlinBidisc => vec![1.0 / two_m as f64, 1.0],
            RegionLaw::Polydisc { exponents } => exponents.clone(),
        }
    }
}

/// The comparison region family `R(q, C)` at one center.
#[derive(Clone, Debug)]
pub struct Region {
    pub law: RegionLaw,
    pub q: Point,
    pub d: f64,
    pub map: PolynomialAutomorphism,
    family: Option<BidiscFamily>,
}

impl Region {
    pub fn new(dom: &Domain, q: &[C64], law: &RegionLaw) -> Result<Self> {
        match law {
            RegionLaw::CatlinBidisc => {
                let fam = BidiscFamily::new(dom, q, declared_type(dom)?)?;
                if fam.boundary_distance <= 0.0 {
                    return Err(Error::Precondition("q must be interior".into()));
                }
                Ok(Region { law: law.clone(), q: q.to_vec(), d: fam.boundary_distance, map: fam.map.clone(), family: Some(fam) })
            }
            RegionLaw::Polydisc { exponents } => {
                if exponents.len() != dom.n() || exponents.iter().any(|e| *e <= 0.0) {
                    return Err(Error::InvalidArgument("need one positive exponent per coordinate".into()));
                }
                let f = dom.boundary_distance(q)?;
                let g = dom.wirtinger_gradient(&f.foot);
                let neg: Point = q.iter().map(|x| -x).collect();
                let u = linalg::unitary_with_last_row(&g);
                let map = PolynomialAutomorphism::translation(&neg).then(&PolynomialAutomorphism::linear(&u, crate::scaling::MapKind::Unitary)?);
                Ok(Region { law: law.clone(), q: q.to_vec(), d: f.distance, map, family: None })
            }
        }
    }

    pub fn radii(&self, c: f64) -> Result<Vec<f64>> {
        let s = c * self.d;
        match (&self.law, &self.family) {
            (RegionLaw::CatlinBidisc, Some(f)) => Ok(vec![f.tau(s)?, s]),
            (RegionLaw::Polydisc { exponents }, _) => Ok(exponents.iter().map(|e| s.powf(*e)).collect()),
            _ => Err(Error::Assertion("bidisc region without a family".into())),
        }
    }

    pub fn contains(&self, z: &[C64], c: f64) -> bool {
        let Ok(r) = self.radii(c) else { return false };
        self.map.eval(z).iter().zip(&r).all(|(w, r)| w.norm() < *r)
    }

    /// `inf{C : z ∈ R(q, C)}`.
    pub fn needed_scale(&self, z: &[C64]) -> Option<f64> {
        inf_scale(|c| self.contains(z, c), 1e-12 / self.d, 1e6 / self.d, DPRIME_ITERATIONS)
    }

    /// Points on the topological boundary of `R(q, C)`: each face `|w_k| = r_k`
    /// at 8 phases with the other coordinates 0, then 8 distinguished-boundary points.
    pub fn boundary_samples(&self, c: f64) -> Result<Vec<Point>> {
        let r = self.radii(c)?;
        let n = r.len();
        let mut out = Vec::new();
        for k in 0..n {
            for j in 0..8 {
                let mut w = linalg::zeros(n);
                w[k] = C64::from_polar(r[k], std::f64::consts::TAU * j as f64 / 8.0);
                out.push(self.map.eval_inverse(&w));
            }
        }
        for j in 0..8 {
            let w: Point = (0..n).map(|k| C64::from_polar(r[k], std::f64::consts::TAU * ((j * (2 * k + 1)) % 8) as f64 / 8.0)).collect();
            out.push(self.map.eval_inverse(&w));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichConfig {
    pub radius: f64,
    /// Metric settings for ray profiles and segment integrals.
    pub disc: DiscConfig,
    /// Control points on the path from `q` to each region-boundary sample.
    pub control_points: usize,
    /// Seeded random probe directions added to the axis and diagonal ones.
    pub random_directions: usize,
    pub seed: u64,
    /// Relative resolution of the inner-constant bisection.
    pub resolution: f64,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig { radius: 1.0, disc: DiscConfig::cheap(), control_points: 2, random_directions: 0, seed: 0, resolution: 0.02 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichRow {
    pub q: Point,
    pub d: f64,
    /// Largest `C` with every sampled boundary point of `R(q, C)` at distance `< R`.
    pub inner: f64,
    /// Smallest `C'` with every probe point of `B(q, R)` in `R(q, C')`.
    pub outer: f64,
    pub probe_points: usize,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichFit {
    pub law: RegionLaw,
    pub exponents: Vec<f64>,
    pub radius: f64,
    pub c1: f64,
    pub c2: f64,
    /// Max/min of the per-point inner constants.
    pub inner_ratio: f64,
    /// Max/min of the per-point outer constants.
    pub outer_ratio: f64,
    pub rows: Vec<SandwichRow>,
    pub residuals: Vec<ResidualRow>,
}

fn inner_passes(dom: &Domain, reg: &Region, c: f64, cfg: &SandwichConfig) -> bool {
    let Ok(pts) = reg.boundary_samples(c) else { return false };
    let path = PathConfig { control_points: cfg.control_points, budget: 0, report: cfg.disc.clone(), search: cfg.disc.clone(), ..PathConfig::default() };
    pts.iter().all(|z| {
        dom.contains(z) && kobayashi_distance_estimate(dom, &reg.q, z, &path).is_ok_and(|e| e.value < cfg.radius)
    })
}

fn inner_constant(dom: &Domain, reg: &Region, cfg: &SandwichConfig, flags: &mut Vec<String>) -> f64 {
    let mut lo = 1e-2;
    while !inner_passes(dom, reg, lo, cfg) {
        lo *= 0.1;
        if lo < 1e-9 {
            flags.push("no inner constant above 1e-9".into());
            return 0.0;
        }
    }
    let mut hi = 2.0 * lo;
    while inner_passes(dom, reg, hi, cfg) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            flags.push("inner constant unbounded up to 1e6".into());
            return lo;
        }
    }
    while hi / lo > 1.0 + cfg.resolution {
        let m = (lo * hi).sqrt();
        if inner_passes(dom, reg, m, cfg) {
            lo = m
        } else {
            hi = m
        }
    }
    lo
}

/// Fits `R(q, C_1 d) ⊂ B_D(q, R) ⊂ R(q, C_2 d)` along a sequence of centers.
pub fn sandwich_constants(dom: &Domain, qs: &[Point], law: &RegionLaw, cfg: &SandwichConfig) -> Result<SandwichFit> {
    if qs.is_empty() {
        return Err(Error::InvalidArgument("empty center sequence".into()));
    }
    if cfg.radius.is_nan() || cfg.radius <= 0.0 {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let dirs = crate::metrics::probe_directions(dom.n(), cfg.random_directions, cfg.seed);
    let rows: Vec<SandwichRow> = qs
        .par_iter()
        .map(|q| {
            let reg = Region::new(dom, q, law)?;
            let mut flags = Vec::new();
            let inner = inner_constant(dom, &reg, cfg, &mut flags);
            let mut prober = BallProber::new(dom, q, &dirs, &cfg.disc)?;
            let ext = prober.extents(dom, cfg.radius)?;
            let mut outer: f64 = 0.0;
            for e in &ext {
                if e.reached_boundary {
                    flags.push("probe ray reached the boundary".into());
                }
                let z = linalg::axpy(q, e.t, &e.dir);
                match reg.needed_scale(&z) {
                    Some(s) => outer = outer.max(s),
                    None => {
                        flags.push("probe point outside every region".into());
                        outer = f64::INFINITY;
                    }
                }
            }
            Ok(SandwichRow { q: q.clone(), d: reg.d, inner, outer, probe_points: ext.len(), flags })
        })
        .collect::<Result<_>>()?;
    let c1 = rows.iter().map(|r| r.inner).fold(f64::INFINITY, f64::min);
    let c2 = rows.iter().map(|r| r.outer).fold(0.0, f64::max);
    let spread = |f: &dyn Fn(&SandwichRow) -> f64| {
        let hi = rows.iter().map(f).fold(0.0, f64::max);
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let inner_ratio = spread(&|r| r.inner);
    let outer_ratio = spread(&|r| r.outer);
    let mut residuals = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        residuals.push(ResidualRow { id: i, quantity: "inner_constant".into(), lhs: c1, rhs: r.inner, margin: r.inner - c1 });
        residuals.push(ResidualRow { id: i, quantity: "outer_constant".into(), lhs: r.outer, rhs: c2, margin: c2 - r.outer });
    }
    let two_m = dom.declared_type.unwrap_or(2);
    Ok(SandwichFit { law: law.clone(), exponents: law.exponents(two_m), radius: cfg.radius, c1, c2, inner_ratio, outer_ratio, rows, residuals })
}

/// `P_ζ = exp(σ L_ζ)` with the Levi polynomial
/// `L_ζ(z) = Σ ∂ρ/∂z_i(ζ)(z_i - ζ_i) + ½ Σ ∂²ρ/∂z_i∂z_j(ζ)(z_i - ζ_i)(z_j - ζ_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct PeakFunction {
    pub zeta: Point,
    pub sigma: f64,
    pub gradient: Point,
    pub hessian: Vec<Vec<C64>>,
    /// Radius on which the constants were fitted.
    pub r: f64,
    /// `C_1 |1 - P| ≤ |z - ζ|`.
    pub c1: f64,
    /// `|z - ζ| ≤ C_2 √|1 - P|`.
    pub c2: f64,
    pub samples: usize,
    /// Largest `|P|` seen on the samples.
    pub max_modulus: f64,
}

/// Safety factor applied to the sampled extreme ratios.
pub const PEAK_SAFETY: f64 = 0.1;

impl PeakFunction {
    pub fn levi(&self, z: &[C64]) -> C64 {
        let h = linalg::sub(z, &self.zeta);
        let mut s: C64 = self.gradient.iter().zip(&h).map(|(g, x)| g * x).sum();
        for i in 0..h.len() {
            for j in 0..h.len() {
                s += 0.5 * self.hessian[i][j] * h[i] * h[j];
            }
        }
        s
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        (self.levi(z) * self.sigma).exp()
    }

    /// Both inequalities at `z` with the fitted constants (margins, positive when they hold).
    pub fn margins(&self, z: &[C64]) -> (f64, f64) {
        let gap = (c(1.0, 0.0) - self.eval(z)).norm();
        let r = linalg::dist(z, &self.zeta);
        (r - self.c1 * gap, self.c2 * gap.sqrt() - r)
    }
}

/// Points of `D ∩ B(ζ, r)`, mixing uniform and log-uniform radii.
pub fn sample_near(d: &Domain, zeta: &[C64], r: f64, count: usize, rng: &mut impl Rng) -> Vec<Point> {
    let n = zeta.len();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 200 * count {
        tries += 1;
        let u = random_unit(rng, n);
        let t = if tries % 2 == 0 { r * rng.gen::<f64>().powf(1.0 / (2 * n) as f64) } else { r * (1e-4f64).powf(rng.gen::<f64>()) };
        let z = linalg::axpy(zeta, t, &u);
        if d.contains(&z) {
            out.push(z);
        }
    }
    out
}

/// Builds `P_ζ` and fits `(r, C_1, C_2)` on `samples` points of `D ∩ B(ζ, r)`,
/// halving `r` until `|P| < 1` on all of them.
pub fn peak_function(d: &Domain, zeta: &[C64], r: f64, samples: usize, seed: u64) -> Result<PeakFunction> {
    let rz = d.rho(zeta);
    if rz.abs() > 1e-10 * d.rho_scale().max(1.0) {
        return Err(Error::Precondition(format!("zeta is not on the boundary (rho = {rz:e})")));
    }
    if samples == 0 || r.is_nan() || r <= 0.0 {
        return Err(Error::InvalidArgument("need a positive radius and sample count".into()));
    }
    let gradient = d.wirtinger_gradient(zeta);
    let (hessian, _) = d.wirtinger_hessians(zeta);
    let mut pf = PeakFunction { zeta: zeta.to_vec(), sigma: 1.0, gradient, hessian, r, c1: 0.0, c2: 0.0, samples: 0, max_modulus: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radius = r;
    for _ in 0..30 {
        let pts = sample_near(d, zeta, radius, samples, &mut rng);
        let re: Vec<f64> = pts.iter().map(|z| pf.levi(z).re).collect();
        let sigma = if re.iter().all(|x| *x < 0.0) {
            Some(1.0)
        } else if re.iter().all(|x| *x > 0.0) {
            Some(-1.0)
        } else {
            None
        };
        if let (Some(s), false) = (sigma, pts.is_empty()) {
            pf.sigma = s;
            pf.r = radius;
            pf.samples = pts.len();
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            let mut modulus: f64 = 0.0;
            for z in &pts {
                let p = pf.eval(z);
                modulus = modulus.max(p.norm());
                let gap = (c(1.0, 0.0) - p).norm();
                let dist = linalg::dist(z, zeta);
                lo = lo.min(dist / gap);
                hi = hi.max(dist / gap.sqrt());
            }
            pf.c1 = (1.0 - PEAK_SAFETY) * lo;
            pf.c2 = (1.0 + PEAK_SAFETY) * hi;
            pf.max_modulus = modulus;
            return Ok(pf);
        }
        radius *= 0.5;
    }
    Err(Error::NonConvergence("no radius with a one-signed Levi polynomial".into()))
}

/// Forstneric-Rosay style bounds for `d_D(a, b)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrBounds {
    pub lower: f64,
    pub upper: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub separation: f64,
}

/// `lower = -½ log d_a - ½ log d_b - C`,
/// `upper = -½ log d_a + ½ log(d_a + s) + ½ log(d_b + s) - ½ log d_b + C` with `s = |a - b|`.
pub fn fr_formula(d_a: f64, d_b: f64, s: f64, cst: f64) -> (f64, f64) {
    let lower = -0.5 * d_a.ln() - 0.5 * d_b.ln() - cst;
    let upper = -0.5 * d_a.ln() + 0.5 * (d_a + s).ln() + 0.5 * (d_b + s).ln() - 0.5 * d_b.ln() + cst;
    (lower, upper)
}

pub fn fr_bounds(d: &Domain, a: &[C64], b: &[C64], cst: f64) -> Result<FrBounds> {
    let d_a = d.boundary_distance(a)?.distance;
    let d_b = d.boundary_distance(b)?.distance;
    let s = linalg::dist(a, b);
    let (lower, upper) = fr_formula(d_a, d_b, s, cst);
    Ok(FrBounds { lower, upper, d_a, d_b, separation: s })
}

/// Smallest `C` with `lower ≤ dist ≤ upper` for every `(d_a, d_b, |a - b|, dist)`.
pub fn fr_fit_constant(samples: &[(f64, f64, f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|(da, db, s, dist)| {
            let (l0, u0) = fr_formula(*da, *db, *s, 0.0);
            (l0 - dist).max(dist - u0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `1/tanh(b - a)`.
pub fn shrink_factor(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || b <= a || a < 0.0 {
        return Err(Error::InvalidArgument(format!("need b > a >= 0, got a = {a}, b = {b}")));
    }
    Ok(1.0 / (b - a).tanh())
}

/// `C |v| / √d(q, ∂D)`.
pub fn sqrt_hyperbolicity_lower(d: &Domain, q: &[C64], v: &[C64], cst: f64) -> Result<f64> {
    let nv = linalg::norm(v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    let dist = d.boundary_distance(q)?.distance;
    Ok(cst * nv / dist.sqrt())
}

/// Largest `C` with `F^K(q, v) ≥ C |v| / √d(q, ∂D)` at every point, from metric upper bounds.
pub fn fit_sqrt_constant(d: &Domain, points: &[Point], v: &[C64], cfg: &DiscConfig) -> Result<(f64, Vec<ResidualRow>)> {
    let vals: Vec<(f64, f64)> = points
        .par_iter()
        .map(|q| {
            let f = kobayashi_inf_estimate(d, q, v, cfg)?.value;
            let dist = d.boundary_distance(q)?.distance;
            Ok((f, dist))
        })
        .collect::<Result<_>>()?;
    let nv = linalg::norm(v);
    let cst = vals.iter().map(|(f, dist)| f * dist.sqrt() / nv).fold(f64::INFINITY, f64::min);
    let rows = vals
        .iter()
        .enumerate()
        .map(|(i, (f, dist))| {
            let rhs = cst * nv / dist.sqrt();
            ResidualRow { id: i, quantity: "sqrt_lower".into(), lhs: *f, rhs, margin: f - rhs }
        })
        .collect();
    Ok((cst, rows))
}

/// Seeded pairs of points within `depth` of the boundary, along rays from the
/// base point; odd pairs are close to each other, even pairs unrelated.
pub fn near_boundary_pairs(d: &Domain, count: usize, depth: (f64, f64), seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d.n();
    let tmax = 2.0 * d.bounding_radius + linalg::norm(&d.base_point);
    let point = |u: &[C64], rng: &mut ChaCha8Rng| -> Option<Point> {
        let t = d.ray_exit(&d.base_point, u, tmax)?;
        let s = depth.0 * (depth.1 / depth.0).powf(rng.gen::<f64>());
        (t > 2.0 * s).then(|| linalg::axpy(&d.base_point, t - s, u))
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = random_unit(&mut rng, n);
        let v = if out.len() % 2 == 1 {
            let w = random_unit(&mut rng, n);
            linalg::normalized(&linalg::axpy(&u, 0.3, &w))
        } else {
            random_unit(&mut rng, n)
        };
        if let (Some(a), Some(b)) = (point(&u, &mut rng), point(&v, &mut rng)) {
            if d.contains(&a) && d.contains(&b) {
                out.push((a, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::preset_domain;

    #[test]
    fn inf_scale_brackets() {
        assert_eq!(inf_scale(|s| s > 2.0, 1.0, 1e3, 60).map(|s| (s - 2.0).abs() < 1e-9), Some(true));
        assert_eq!(inf_scale(|_| true, 1.0, 2.0, 60), Some(1.0));
        assert_eq!(inf_scale(|_| false, 1.0, 2.0, 60), None);
    }

    #[test]
    fn shrink_values() {
        assert!((shrink_factor(0.0, 1.0).unwrap() - 1.313035285499331).abs() < 1e-12);
        assert!((shrink_factor(0.2, 0.3).unwrap() - 10.0333111).abs() < 1e-6);
        assert!((shrink_factor(0.0, 40.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(shrink_factor(1.0, 1.0).is_err());
    }

    #[test]
    fn fr_examples() {
        let (_, u) = fr_formula(0.3, 0.3, 0.0, 0.7);
        assert!((u - 0.7).abs() < 1e-15);
        let (l, _) = fr_formula(1e-4, 1e-4, 1.0, 0.5);
        assert!((l - (4.0 * 10f64.ln() - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_lower_arithmetic() {
        let b = preset_domain("ball:2").unwrap();
        let q = vec![c(0.99, 0.0), c(0.0, 0.0)];
        assert!((sqrt_hyperbolicity_lower(&b, &q, &[c(0.0, 1.0), c(0.0, 0.0)], 1.0).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(sqrt_hyperbolicity_lower(&b, &q, &linalg::zeros(2), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rho_star_formula_cases() {
        assert_eq!(rho_star_formula(0.0, 0.1, 0.0, 0.3), 0.0);
        assert!((rho_star_formula(0.1, 0.1, 0.0, 0.3) - 2f64.ln()).abs() < 1e-15);
    }
}

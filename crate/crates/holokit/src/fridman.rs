//! Upper bounds for the Fridman invariant `h_X(p, model)` from explicit
//! embeddings of shrunken balls and polydiscs, zero certificates for the
//! homogeneous models, and boundary-approach experiments.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{random_unit, Domain, DomainClass, PolyhedronSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::metrics::{cayley_from_ball, cayley_to_ball, probe_directions, BallProber, DiscConfig, ProbeExtent};
use crate::scaling::{catlin_chart, catlin_scaled_domain, convex_scaled_domain, polyhedron_corner_maps, spsc_scaled_domain, CornerMap, PolynomialAutomorphism, ScalingEntry};

/// Shrunken-source factors tried for every embedding.
pub const SHRINK_GRID: [f64; 3] = [0.9, 0.99, 0.999];
/// Pullbacks must land this far inside the shrunken source.
pub const PULLBACK_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Model {
    Ball,
    Polydisc,
}

impl Model {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ball" => Some(Model::Ball),
            "polydisc" => Some(Model::Polydisc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Ball => "ball",
            Model::Polydisc => "polydisc",
        }
    }

    /// Ball norm or polydisc sup-norm.
    pub fn gauge(self, w: &[C64]) -> f64 {
        match self {
            Model::Ball => linalg::norm(w),
            Model::Polydisc => w.iter().map(|x| x.norm()).fold(0.0, f64::max),
        }
    }
}

/// One factor of an embedding, applied in the source-to-target direction.
#[derive(Clone, Debug)]
pub enum Stage {
    /// `w ↦ A w + b`.
    Affine { a: Vec<Vec<C64>>, a_inv: Vec<Vec<C64>>, b: Point },
    /// Ball automorphism exchanging 0 and `a` (an involution).
    BallMobius { a: Point },
    /// Coordinatewise disc automorphisms exchanging 0 and `a_i`.
    PolydiscMobius { a: Point },
    /// Ball to Siegel domain, `0 ↦ ('0, -1)`.
    Cayley,
    /// Scaled coordinates back to the original domain, through `T^{-1}`.
    Unscale(PolynomialAutomorphism),
    /// Unit polydisc to the polyhedron, through `(Λ^k)^{-1}`.
    CornerInverse(CornerMap),
}

fn ball_mobius(a: &[C64], z: &[C64]) -> Option<Point> {
    let aa = linalg::norm(a).powi(2);
    if aa == 0.0 {
        return Some(z.iter().map(|x| -x).collect());
    }
    let za = linalg::hdot(z, a);
    let den = c(1.0, 0.0) - za;
    if den.norm() < 1e-300 {
        return None;
    }
    let pz = linalg::scale(a, za / aa);
    let qz = linalg::sub(z, &pz);
    let s = (1.0 - aa).sqrt();
    let num = linalg::sub(&linalg::sub(a, &pz), &linalg::scale_re(&qz, s));
    Some(linalg::scale(&num, c(1.0, 0.0) / den))
}

fn disc_mobius(a: &[C64], z: &[C64]) -> Option<Point> {
    a.iter()
        .zip(z)
        .map(|(a, z)| {
            let den = c(1.0, 0.0) - a.conj() * z;
            (den.norm() > 1e-300).then(|| (a - z) / den)
        })
        .collect()
}

impl Stage {
    fn forward(&self, w: &[C64]) -> Option<Point> {
        match self {
            Stage::Affine { a, b, .. } => Some(linalg::add(&linalg::matvec(a, w), b)),
            Stage::BallMobius { a } => ball_mobius(a, w),
            Stage::PolydiscMobius { a } => disc_mobius(a, w),
            Stage::Cayley => {
                let den = w[w.len() - 1] + c(1.0, 0.0);
                (den.norm() > 1e-300).then(|| cayley_from_ball(w))
            }
            Stage::Unscale(map) => Some(map.eval_inverse(w)),
            Stage::CornerInverse(m) => m.eval_inverse(w),
        }
    }

    fn inverse(&self, z: &[C64]) -> Option<Point> {
        match self {
            Stage::Affine { a_inv, b, .. } => Some(linalg::matvec(a_inv, &linalg::sub(z, b))),
            Stage::BallMobius { a } => ball_mobius(a, z),
            Stage::PolydiscMobius { a } => disc_mobius(a, z),
            Stage::Cayley => {
                let den = c(1.0, 0.0) - z[z.len() - 1];
                (den.norm() > 1e-300).then(|| cayley_to_ball(z))
            }
            Stage::Unscale(map) => Some(map.eval(z)),
            Stage::CornerInverse(m) => m.eval(z).ok(),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Stage::Affine { .. } => "affine",
            Stage::BallMobius { .. } => "ball-mobius",
            Stage::PolydiscMobius { .. } => "polydisc-mobius",
            Stage::Cayley => "cayley",
            Stage::Unscale(_) => "unscale",
            Stage::CornerInverse(_) => "corner-inverse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InjectivityCertificate {
    ExplicitInverse,
    Shrunken,
}

/// Biholomorphic embedding of `s · (unit model)` into `X`.
#[derive(Clone, Debug)]
pub struct EmbeddingCandidate {
    pub id: String,
    pub model: Model,
    pub shrink: f64,
    /// Applied first to last.
    pub stages: Vec<Stage>,
    pub certificate: InjectivityCertificate,
}

impl EmbeddingCandidate {
    pub fn new(id: &str, model: Model, shrink: f64, stages: Vec<Stage>) -> Result<Self> {
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(Error::InvalidArgument(format!("shrink factor {shrink} not in (0, 1]")));
        }
        let certificate = if shrink < 1.0 { InjectivityCertificate::Shrunken } else { InjectivityCertificate::ExplicitInverse };
        Ok(EmbeddingCandidate { id: id.to_string(), model, shrink, stages, certificate })
    }

    pub fn with_shrink(&self, s: f64) -> Result<Self> {
        let id = format!("{}@s={s}", self.id.split('@').next().unwrap_or(&self.id));
        EmbeddingCandidate::new(&id, self.model, s, self.stages.clone())
    }

    pub fn describe(&self) -> String {
        let st: Vec<&str> = self.stages.iter().map(|s| s.label()).collect();
        format!("{} [{}] s={}", self.id, st.join(" -> "), self.shrink)
    }

    /// Source point to `X`.
    pub fn forward(&self, w: &[C64]) -> Option<Point> {
        self.stages.iter().try_fold(w.to_vec(), |z, s| s.forward(&z))
    }

    /// `X` to source.
    pub fn inverse(&self, z: &[C64]) -> Option<Point> {
        self.stages.iter().rev().try_fold(z.to_vec(), |w, s| s.inverse(&w))
    }

    pub fn in_source(&self, w: &[C64]) -> bool {
        self.model.gauge(w) < self.shrink - PULLBACK_MARGIN
    }

    fn source_point(&self, rng: &mut impl Rng, n: usize) -> Point {
        match self.model {
            Model::Ball => {
                let u = random_unit(rng, n);
                linalg::scale_re(&u, self.shrink * rng.gen::<f64>().powf(1.0 / (2 * n) as f64))
            }
            Model::Polydisc => (0..n).map(|_| C64::from_polar(self.shrink * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * std::f64::consts::TAU)).collect(),
        }
    }

    /// Largest `|inverse(forward(w)) - w|` over seeded source points.
    pub fn roundtrip_error(&self, n: usize, points: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let w = self.source_point(&mut rng, n);
            let e = match self.forward(&w).and_then(|z| self.inverse(&z)) {
                Some(back) => linalg::dist(&back, &w) / (1.0 + linalg::norm(&w)),
                None => f64::INFINITY,
            };
            worst = worst.max(e);
        }
        worst
    }

    /// Source grid (shells and rings up to the shrunken boundary); returns the
    /// number of grid points whose image is not in `X`.
    pub fn image_violations(&self, x: &Domain) -> usize {
        let n = x.n();
        let mut pts: Vec<Point> = vec![linalg::zeros(n)];
        match self.model {
            Model::Ball => {
                let dirs = probe_directions(n, 32, 17);
                for r in [0.25, 0.5, 0.75, 0.9, 1.0] {
                    for u in &dirs {
                        pts.push(linalg::scale_re(u, r * self.shrink));
                    }
                }
            }
            Model::Polydisc => {
                let mut ring = vec![c(0.0, 0.0)];
                for r in [0.5, 0.9, 1.0] {
                    for k in 0..8 {
                        ring.push(C64::from_polar(r * self.shrink, std::f64::consts::TAU * k as f64 / 8.0));
                    }
                }
                let total = ring.len().pow(n as u32);
                pts.clear();
                for idx in 0..total {
                    let mut rem = idx;
                    pts.push(
                        (0..n)
                            .map(|_| {
                                let v = ring[rem % ring.len()];
                                rem /= ring.len();
                                v
                            })
                            .collect(),
                    );
                }
            }
        }
        pts.iter().filter(|w| !self.forward(w).is_some_and(|z| x.contains(&z))).count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FridmanConfig {
    pub disc: DiscConfig,
    pub random_directions: usize,
    pub seed: u64,
    /// Radii are doubled from `r_start` up to `r_max` before bisecting.
    pub r_start: f64,
    pub r_max: f64,
    /// Relative bisection tolerance on `R`.
    pub tolerance: f64,
}

impl Default for FridmanConfig {
    fn default() -> Self {
        FridmanConfig { disc: DiscConfig::cheap(), random_directions: 50, seed: 0, r_start: 0.5, r_max: 8.0, tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FridmanBound {
    pub p: Point,
    pub model: Model,
    pub best_r: f64,
    /// `1/best_r`, an upper bound for `h_X(p, model)`.
    pub upper: f64,
    pub witness: Option<String>,
    pub per_candidate: Vec<(String, f64)>,
    pub log: Vec<String>,
}

/// Probe points of `B_X(p, R)`, shared by all candidates.
struct BallCache {
    prober: BallProber,
    extents: Vec<(f64, Option<Vec<ProbeExtent>>)>,
}

impl BallCache {
    fn points(&mut self, x: &Domain, r: f64, log: &mut Vec<String>) -> Option<Vec<Point>> {
        if let Some((_, e)) = self.extents.iter().find(|(s, _)| *s == r) {
            return e.as_ref().map(|e| e.iter().map(|e| linalg::axpy(&self.prober.center, e.t, &e.dir)).collect());
        }
        let e = match self.prober.extents(x, r) {
            Ok(e) => Some(e),
            Err(err) => {
                log.push(format!("probe at R = {r} failed: {err}"));
                None
            }
        };
        self.extents.push((r, e));
        self.points(x, r, log)
    }
}

fn covers(cand: &EmbeddingCandidate, pts: &[Point]) -> bool {
    pts.iter().all(|z| cand.inverse(z).is_some_and(|w| cand.in_source(&w)))
}

fn best_radius(x: &Domain, cand: &EmbeddingCandidate, cache: &mut BallCache, cfg: &FridmanConfig, log: &mut Vec<String>) -> f64 {
    let mut test = |r: f64, log: &mut Vec<String>| cache.points(x, r, log).is_some_and(|p| covers(cand, &p));
    let mut lo = 0.0;
    let mut hi = cfg.r_start;
    while test(hi, log) {
        lo = hi;
        if hi >= cfg.r_max {
            log.push(format!("{}: covers the probed ball up to r_max = {}", cand.id, cfg.r_max));
            return lo;
        }
        hi = (2.0 * hi).min(cfg.r_max);
    }
    while hi - lo > cfg.tolerance * hi.max(1e-3) {
        let m = 0.5 * (lo + hi);
        if test(m, log) {
            lo = m
        } else {
            hi = m
        }
    }
    lo
}

/// Best `1/R` over the candidates whose images pass the containment check.
pub fn fridman_upper(x: &Domain, p: &[C64], model: Model, candidates: &[EmbeddingCandidate], cfg: &FridmanConfig) -> Result<FridmanBound> {
    if !x.contains(p) {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let dirs = probe_directions(x.n(), cfg.random_directions, cfg.seed);
    let mut cache = BallCache { prober: BallProber::new(x, p, &dirs, &cfg.disc)?, extents: Vec::new() };
    let mut log = Vec::new();
    let mut per_candidate = Vec::new();
    let mut best = (0.0, None);
    for cand in candidates {
        if cand.model != model {
            log.push(format!("{}: model {} skipped", cand.id, cand.model.name()));
            continue;
        }
        let bad = cand.image_violations(x);
        if bad > 0 {
            log.push(format!("{}: {bad} source grid points map outside X", cand.id));
            continue;
        }
        let r = best_radius(x, cand, &mut cache, cfg, &mut log);
        log.push(format!("{}: R = {r}", cand.describe()));
        per_candidate.push((cand.id.clone(), r));
        if r > best.0 {
            best = (r, Some(cand.id.clone()));
        }
    }
    let upper = if best.0 > 0.0 { 1.0 / best.0 } else { f64::INFINITY };
    if upper.is_infinite() {
        log.push("no candidate covers a positive radius".into());
    }
    Ok(FridmanBound { p: p.to_vec(), model, best_r: best.0, upper, witness: best.1, per_candidate, log })
}

/// Explicit biholomorphism onto a homogeneous model, with `bestR(s) = tanh⁻¹ s`.
#[derive(Clone, Debug)]
pub enum ZeroCert {
    Certificate { map: EmbeddingCandidate, description: String, family: Vec<(f64, f64)>, roundtrip_error: f64 },
    Refusal(String),
}

impl ZeroCert {
    pub fn is_certificate(&self) -> bool {
        matches!(self, ZeroCert::Certificate { .. })
    }
}

/// `ball`, `polydisc` or `siegel` when `x` is exactly that preset, else "".
fn preset_kind(x: &Domain) -> &'static str {
    ["ball", "polydisc", "siegel"].into_iter().find(|k| x.name == format!("{k}:{}", x.n())).unwrap_or("")
}

/// Certificate that `h_X(p, model) = 0` for cataloged homogeneous `X`.
pub fn fridman_zero_cert(x: &Domain, p: &[C64], model: Model) -> Result<ZeroCert> {
    if !x.contains(p) {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let (stages, description) = match (preset_kind(x), model) {
        ("ball", Model::Ball) => (vec![Stage::BallMobius { a: p.to_vec() }], "ball automorphism exchanging 0 and p".to_string()),
        ("polydisc", Model::Polydisc) => (vec![Stage::PolydiscMobius { a: p.to_vec() }], "coordinatewise disc automorphisms exchanging 0 and p".to_string()),
        ("siegel", Model::Ball) => {
            let a = cayley_to_ball(p);
            (vec![Stage::BallMobius { a }, Stage::Cayley], "Cayley map composed with a ball automorphism".to_string())
        }
        (_, m) => return Ok(ZeroCert::Refusal(format!("{} is not a cataloged model equivalent to the {}", x.name, m.name()))),
    };
    let map = EmbeddingCandidate::new(&format!("{}-exact", preset_kind(x)), model, 1.0, stages)?;
    let at0 = map.forward(&linalg::zeros(x.n())).ok_or_else(|| Error::Assertion("map undefined at 0".into()))?;
    if linalg::dist(&at0, p) > 1e-10 * (1.0 + linalg::norm(p)) {
        return Err(Error::Assertion(format!("certificate map sends 0 to {at0:?}")));
    }
    let err = map.roundtrip_error(x.n(), 100, 7);
    if err > 1e-10 {
        return Err(Error::Assertion(format!("round trip error {err:e}")));
    }
    let family = [0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999].iter().map(|s: &f64| (*s, s.atanh())).collect();
    Ok(ZeroCert::Certificate { map, description, family, roundtrip_error: err })
}

/// One row of a boundary-approach table.
#[derive(Clone, Debug, Serialize)]
pub struct FridmanRow {
    pub j: usize,
    pub d: f64,
    pub best_r: f64,
    pub upper: f64,
    pub candidate: Option<String>,
    pub wall_time: f64,
    /// Known value for the scaled limit, when it is a cataloged model.
    pub reference: Option<f64>,
    pub log: Vec<String>,
}

fn shrunken(base: &EmbeddingCandidate) -> Result<Vec<EmbeddingCandidate>> {
    SHRINK_GRID.iter().map(|s| base.with_shrink(*s)).collect()
}

/// Diagonal affine maps of the ball around `center` into the scaled domain.
fn affine_candidates(entry: &ScalingEntry, prefix: &str) -> Result<Vec<EmbeddingCandidate>> {
    let n = entry.image.len();
    let depth = entry.image[n - 1].norm().max(1e-12);
    let mut out = Vec::new();
    for bn in [0.25, 0.5, 0.75, 0.95] {
        for bt in [0.25, 0.5, 1.0, 1.5] {
            let mut a = vec![vec![c(0.0, 0.0); n]; n];
            let mut a_inv = a.clone();
            for i in 0..n {
                let s = if i == n - 1 { bn * depth } else { bt };
                a[i][i] = c(s, 0.0);
                a_inv[i][i] = c(1.0 / s, 0.0);
            }
            let stages = vec![Stage::Affine { a, a_inv, b: entry.image.clone() }, Stage::Unscale(entry.map.clone())];
            let base = EmbeddingCandidate::new(&format!("{prefix}-affine({bt},{bn})"), Model::Ball, 1.0, stages)?;
            out.extend(shrunken(&base)?);
        }
    }
    Ok(out)
}

/// Candidates built from the scaling map at `p`, by class of `D`.
pub fn scaling_candidates(d: &Domain, p: &[C64], model: Model, boundary_point: &[C64]) -> Result<(Vec<EmbeddingCandidate>, Option<f64>)> {
    match (d.class, model) {
        (DomainClass::StronglyPseudoconvex, Model::Ball) => {
            let e = spsc_scaled_domain(d, p)?;
            let base = EmbeddingCandidate::new("spsc-cayley", Model::Ball, 1.0, vec![Stage::Cayley, Stage::Unscale(e.map.clone())])?;
            Ok((shrunken(&base)?, Some(0.0)))
        }
        (DomainClass::FiniteType2D | DomainClass::PolynomialModel, Model::Ball) => {
            let two_m = d.declared_type.ok_or_else(|| Error::Precondition("declared type needed".into()))?;
            let chart = catlin_chart(d, boundary_point)?;
            let e = catlin_scaled_domain(&chart, p, two_m)?;
            let reference = (two_m == 2).then_some(0.0);
            Ok((affine_candidates(&e, "catlin")?, reference))
        }
        (DomainClass::ConvexFiniteType, Model::Ball) => {
            let e = convex_scaled_domain(d, p)?;
            Ok((affine_candidates(&e, "convex")?, None))
        }
        (cl, m) => Err(Error::Precondition(format!("no candidate family for class {} and model {}", cl.name(), m.name()))),
    }
}

/// Table of upper bounds along `seq` approaching `boundary_point`.
pub fn fridman_boundary_experiment(d: &Domain, boundary_point: &[C64], seq: &[Point], model: Model, cfg: &FridmanConfig) -> Result<Vec<FridmanRow>> {
    let mut rows = Vec::with_capacity(seq.len());
    for (j, p) in seq.iter().enumerate() {
        let start = Instant::now();
        let dist = d.boundary_distance(p)?.distance;
        let (cands, reference) = scaling_candidates(d, p, model, boundary_point)?;
        let b = fridman_upper(d, p, model, &cands, cfg)?;
        rows.push(FridmanRow { j: j + 1, d: dist, best_r: b.best_r, upper: b.upper, candidate: b.witness, wall_time: start.elapsed().as_secs_f64(), reference, log: b.log });
    }
    Ok(rows)
}

/// Corner experiment: candidates `(Λ^k)^{-1}(s Δ^n)` at points approaching the reference corner.
pub fn fridman_corner_experiment(spec: &PolyhedronSpec, x: &Domain, seq: &[Point], cfg: &FridmanConfig) -> Result<Vec<FridmanRow>> {
    let mut rows = Vec::with_capacity(seq.len());
    for (j, p) in seq.iter().enumerate() {
        let start = Instant::now();
        let lam = polyhedron_corner_maps(spec, p)?;
        let dist = linalg::dist(p, &spec.reference);
        let base = EmbeddingCandidate::new("corner", Model::Polydisc, 1.0, vec![Stage::CornerInverse(lam)])?;
        let b = fridman_upper(x, p, Model::Polydisc, &shrunken(&base)?, cfg)?;
        rows.push(FridmanRow { j: j + 1, d: dist, best_r: b.best_r, upper: b.upper, candidate: b.witness, wall_time: start.elapsed().as_secs_f64(), reference: Some(0.0), log: b.log });
    }
    Ok(rows)
}

/// Candidate family conjugated by an affine map `z ↦ A z + b` of the target.
pub fn conjugate(cands: &[EmbeddingCandidate], a: &[Vec<C64>], b: &[C64]) -> Result<Vec<EmbeddingCandidate>> {
    let a_inv = linalg::inverse(a).ok_or_else(|| Error::InvalidArgument("singular affine map".into()))?;
    Ok(cands
        .iter()
        .map(|cand| {
            let mut c2 = cand.clone();
            c2.stages.push(Stage::Affine { a: a.to_vec(), a_inv: a_inv.clone(), b: b.to_vec() });
            c2
        })
        .collect())
}

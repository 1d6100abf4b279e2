//! Domains `{ρ < 0}` cut out by real polynomials, and the preset catalog.
//!
//! A domain may carry extra constraint pieces; it is then the intersection
//! `{ρ < 0} ∩ {ρ_1 < 0} ∩ ...` and [`Domain::rho`] returns the maximum over the
//! pieces. Polydiscs and analytic polyhedra use this.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::poly::{horner, CompiledPoly, Monomial, Poly, PolyMap, RealPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainClass {
    StronglyPseudoconvex,
    FiniteType2D,
    ConvexFiniteType,
    PolynomialModel,
    Polyhedron,
    Generic,
}

impl DomainClass {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "StronglyPseudoconvex" => DomainClass::StronglyPseudoconvex,
            "FiniteType2D" => DomainClass::FiniteType2D,
            "ConvexFiniteType" => DomainClass::ConvexFiniteType,
            "PolynomialModel" => DomainClass::PolynomialModel,
            "Polyhedron" => DomainClass::Polyhedron,
            "Generic" => DomainClass::Generic,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainClass::StronglyPseudoconvex => "StronglyPseudoconvex",
            DomainClass::FiniteType2D => "FiniteType2D",
            DomainClass::ConvexFiniteType => "ConvexFiniteType",
            DomainClass::PolynomialModel => "PolynomialModel",
            DomainClass::Polyhedron => "Polyhedron",
            DomainClass::Generic => "Generic",
        }
    }

    /// Whether the defining function may be assumed plurisubharmonic.
    pub fn psh(self) -> bool {
        !matches!(self, DomainClass::Generic)
    }
}

/// Derivative tables for one defining piece.
#[derive(Clone, Debug)]
struct Piece {
    rho: RealPoly,
    fast: CompiledPoly,
    grad: Vec<Poly>,
    hess_zz: Vec<Vec<Poly>>,
    hess_zzbar: Vec<Vec<Poly>>,
}

impl Piece {
    fn new(rho: RealPoly) -> Self {
        let n = rho.n();
        let grad: Vec<Poly> = (0..n).map(|i| rho.poly().d_z(i)).collect();
        let hess_zz = (0..n).map(|i| (0..n).map(|j| grad[i].d_z(j)).collect()).collect();
        let hess_zzbar = (0..n).map(|i| (0..n).map(|j| grad[i].d_zbar(j)).collect()).collect();
        let fast = rho.compiled();
        Piece { rho, fast, grad, hess_zz, hess_zzbar }
    }

    fn gradient(&self, z: &[C64]) -> Point {
        self.grad.iter().map(|p| p.eval(z)).collect()
    }

    /// Real Hessian in coordinates `(x_1, y_1, ..., x_n, y_n)`.
    fn real_hessian(&self, z: &[C64]) -> DMatrix<f64> {
        let n = self.rho.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let a = self.hess_zz[i][j].eval(z);
                let b = self.hess_zzbar[i][j].eval(z);
                let bt = self.hess_zzbar[j][i].eval(z);
                h[(2 * i, 2 * j)] = 2.0 * (a.re + b.re);
                h[(2 * i, 2 * j + 1)] = -2.0 * a.im + 2.0 * b.im;
                h[(2 * i + 1, 2 * j)] = -2.0 * a.im + 2.0 * bt.im;
                h[(2 * i + 1, 2 * j + 1)] = -2.0 * a.re + 2.0 * b.re;
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub name: String,
    pub class: DomainClass,
    pub declared_type: Option<u32>,
    pub bounding_radius: f64,
    pub base_point: Point,
    pieces: Vec<Piece>,
}

/// Result of [`Domain::boundary_distance`].
#[derive(Clone, Debug)]
pub struct BoundaryFoot {
    pub distance: f64,
    pub foot: Point,
    pub method: FootMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FootMethod {
    Newton,
    SampledRefined,
}

impl Domain {
    pub fn new(
        name: impl Into<String>,
        rho: RealPoly,
        class: DomainClass,
        declared_type: Option<u32>,
        bounding_radius: f64,
        base_point: Point,
    ) -> Result<Self> {
        Domain::with_pieces(name, vec![rho], class, declared_type, bounding_radius, base_point)
    }

    pub fn with_pieces(
        name: impl Into<String>,
        pieces: Vec<RealPoly>,
        class: DomainClass,
        declared_type: Option<u32>,
        bounding_radius: f64,
        base_point: Point,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if pieces.is_empty() {
            return Err(Error::Validation(vec!["no defining polynomial".into()]));
        }
        let n = pieces[0].n();
        if pieces.iter().any(|p| p.n() != n) {
            problems.push("pieces have different dimensions".into());
        }
        if base_point.len() != n {
            problems.push(format!("base point has {} coordinates, expected {n}", base_point.len()));
        }
        if let Some(t) = declared_type {
            if t < 2 || t % 2 != 0 {
                problems.push(format!("declared type {t} is not an even integer >= 2"));
            }
        }
        if bounding_radius.is_nan() || bounding_radius <= 0.0 {
            problems.push("bounding radius must be positive".into());
        }
        if class == DomainClass::PolynomialModel && !is_model_form(&pieces[0]) {
            problems.push("PolynomialModel requires rho = 2 Re z_n + P('z)".into());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let d = Domain {
            name: name.into(),
            class,
            declared_type,
            bounding_radius,
            base_point,
            pieces: pieces.into_iter().map(Piece::new).collect(),
        };
        let r = d.rho(&d.base_point);
        if r.is_nan() || r >= 0.0 {
            return Err(Error::Validation(vec![format!("base point is not interior (rho = {r})")]));
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.pieces[0].rho.n()
    }

    /// Main defining polynomial.
    pub fn rho_poly(&self) -> &RealPoly {
        &self.pieces[0].rho
    }

    pub fn pieces(&self) -> impl Iterator<Item = &RealPoly> {
        self.pieces.iter().map(|p| &p.rho)
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// `max` over pieces of `ρ_k(z)`; negative inside.
    pub fn rho(&self, z: &[C64]) -> f64 {
        let mut s = Vec::new();
        self.rho_with(z, &mut s)
    }

    pub fn rho_with(&self, z: &[C64], scratch: &mut Vec<C64>) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for p in &self.pieces {
            best = best.max(p.fast.eval(z, scratch));
        }
        best
    }

    /// Exact evaluation that also checks the imaginary part.
    pub fn eval_rho(&self, z: &[C64]) -> Result<f64> {
        if z.len() != self.n() || z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::InvalidArgument("point must be finite with matching dimension".into()));
        }
        let mut best = f64::NEG_INFINITY;
        for p in &self.pieces {
            let v = p.rho.poly().eval(z);
            let scale = 1.0f64.max(v.re.abs());
            if v.im.abs() > 1e-12 * scale {
                return Err(Error::Malformed(v.im));
            }
            best = best.max(v.re);
        }
        Ok(best)
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        self.rho(z) < 0.0
    }

    fn active_piece(&self, z: &[C64]) -> &Piece {
        let mut s = Vec::new();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, p) in self.pieces.iter().enumerate() {
            let v = p.fast.eval(z, &mut s);
            if v > best.0 {
                best = (v, k);
            }
        }
        &self.pieces[best.1]
    }

    /// `(∂ρ/∂z_i)_i` of the active piece.
    pub fn wirtinger_gradient(&self, z: &[C64]) -> Point {
        self.active_piece(z).gradient(z)
    }

    /// Second Wirtinger derivatives `(∂²ρ/∂z_i∂z_j, ∂²ρ/∂z_i∂z̄_j)` of the active piece.
    pub fn wirtinger_hessians(&self, z: &[C64]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
        let p = self.active_piece(z);
        let zz = p.hess_zz.iter().map(|row| row.iter().map(|q| q.eval(z)).collect()).collect();
        let zzb = p.hess_zzbar.iter().map(|row| row.iter().map(|q| q.eval(z)).collect()).collect();
        (zz, zzb)
    }

    /// Real Hessian of the active piece in `(x_1, y_1, ..., x_n, y_n)`.
    pub fn real_hessian(&self, z: &[C64]) -> DMatrix<f64> {
        self.active_piece(z).real_hessian(z)
    }

    /// Euclidean gradient written as a complex vector, `2 conj(∂ρ/∂z)`.
    pub fn real_gradient(&self, z: &[C64]) -> Point {
        self.wirtinger_gradient(z).iter().map(|g| g.conj() * 2.0).collect()
    }

    /// Coefficient scale of the defining function (largest coefficient modulus).
    pub fn rho_scale(&self) -> f64 {
        self.pieces.iter().map(|p| p.rho.poly().max_abs_coeff()).fold(0.0, f64::max)
    }

    /// `D ∩ B(center, radius)` as a multi-piece domain.
    pub fn intersect_ball(&self, center: &[C64], radius: f64) -> Result<Domain> {
        let n = self.n();
        let mut p = Poly::constant(n, c(-radius * radius, 0.0));
        for i in 0..n {
            let zi = Poly::z(n, i).sub(&Poly::constant(n, center[i]));
            p = p.add(&zi.mul(&zi.conj()));
        }
        let mut pieces: Vec<RealPoly> = self.pieces().cloned().collect();
        pieces.push(RealPoly::from_poly_projected(&p));
        let inside = |z: &[C64]| linalg::dist(z, center) < radius && self.contains(z);
        let mut base = if inside(&self.base_point) { self.base_point.clone() } else { center.to_vec() };
        // A boundary center: walk toward the base point until inside both.
        let gap = linalg::dist(&self.base_point, center);
        let mut t = if gap > 0.0 { (0.5 * radius / gap).min(1.0) } else { 0.0 };
        while !inside(&base) && t > 1e-12 {
            base = linalg::add(center, &linalg::scale_re(&linalg::sub(&self.base_point, center), t));
            t *= 0.5;
        }
        Domain::with_pieces(
            format!("{}&ball", self.name),
            pieces,
            self.class,
            self.declared_type,
            self.bounding_radius.min(linalg::norm(center) + radius),
            base,
        )
    }

    /// First `t ∈ (0, tmax]` where `z + t u` leaves the domain, if any.
    pub fn ray_exit(&self, z: &[C64], u: &[C64], tmax: f64) -> Option<f64> {
        let lines: Vec<Vec<f64>> = self.pieces.iter().map(|p| p.fast.restrict_line(z, u)).collect();
        let f = |t: f64| lines.iter().map(|l| horner(l, t)).fold(f64::NEG_INFINITY, f64::max);
        first_crossing(&f, tmax)
    }

    /// Distance to the boundary and a closest boundary point.
    ///
    /// Newton on the Lagrange system from several seeds (the gradient ray
    /// first); falls back to a ray sample when no seed converges.
    pub fn boundary_distance(&self, z: &[C64]) -> Result<BoundaryFoot> {
        Ok(self.boundary_feet(z)?.remove(0))
    }

    /// Distinct constrained critical points of `|w - z|` on the boundary found from the
    /// seeds, nearest first.
    pub fn boundary_feet(&self, z: &[C64]) -> Result<Vec<BoundaryFoot>> {
        let r0 = self.rho(z);
        if r0.is_nan() || r0 >= 0.0 {
            return Err(Error::OutsideDomain(format!("rho = {r0}")));
        }
        let n = self.n();
        let tmax = 2.0 * self.bounding_radius + linalg::norm(z);
        let mut seeds: Vec<Point> = Vec::new();
        let g = self.real_gradient(z);
        if linalg::norm(&g) > 0.0 {
            let u = linalg::normalized(&g);
            if let Some(t) = self.ray_exit(z, &u, tmax) {
                seeds.push(linalg::axpy(z, t, &u));
            }
        }
        // Coordinate ray samples; the closest few become extra seeds.
        let mut samples: Vec<(f64, Point)> = Vec::new();
        let mut dirs: Vec<Point> = Vec::new();
        for i in 0..n {
            for ph in 0..8 {
                let a = std::f64::consts::PI * ph as f64 / 4.0;
                let mut u = linalg::zeros(n);
                u[i] = C64::from_polar(1.0, a);
                dirs.push(u);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..16 * n {
            dirs.push(random_unit(&mut rng, n));
        }
        for u in &dirs {
            if let Some(t) = self.ray_exit(z, u, tmax) {
                samples.push((t, linalg::axpy(z, t, u)));
            }
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        seeds.extend(samples.iter().take(4).map(|s| s.1.clone()));

        let mut feet: Vec<BoundaryFoot> = Vec::new();
        for s in &seeds {
            if let Some(foot) = self.lagrange_newton(z, s, true) {
                let d = linalg::dist(z, &foot);
                if feet.iter().all(|f| linalg::dist(&f.foot, &foot) > 1e-8 * (1.0 + d)) {
                    feet.push(BoundaryFoot { distance: d, foot, method: FootMethod::Newton });
                }
            }
        }
        if feet.is_empty() {
            let (t, p) = samples
                .first()
                .cloned()
                .ok_or_else(|| Error::DegenerateGeometry("no boundary found within bounding radius".into()))?;
            feet.push(BoundaryFoot { distance: t, foot: p, method: FootMethod::SampledRefined });
        }
        feet.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap());
        Ok(feet)
    }

    /// Constrained critical point of `|w - z|` on `{ρ_k = 0}` for the piece active at `seed`,
    /// from either side of the boundary.
    pub fn project_to_boundary(&self, z: &[C64], seed: &[C64]) -> Option<Point> {
        self.lagrange_newton(z, seed, false)
    }

    /// Newton iteration for `w - z + μ∇ρ(w) = 0`, `ρ(w) = 0` on the active piece.
    fn lagrange_newton(&self, z: &[C64], seed: &[C64], interior: bool) -> Option<Point> {
        let n = self.n();
        let zr = linalg::to_real(z);
        let mut x = linalg::to_real(seed);
        let piece = self.active_piece(seed).clone();
        let grad_real = |w: &[C64]| -> Vec<f64> {
            piece.gradient(w).iter().flat_map(|g| [2.0 * g.re, -2.0 * g.im]).collect()
        };
        let g0 = grad_real(seed);
        let gn: f64 = g0.iter().map(|v| v * v).sum::<f64>();
        if gn == 0.0 {
            return None;
        }
        let mut mu = -(0..2 * n).map(|k| (x[k] - zr[k]) * g0[k]).sum::<f64>() / gn;
        let mut s = Vec::new();
        for _ in 0..60 {
            let w = linalg::from_real(&x);
            let r = piece.fast.eval(&w, &mut s);
            let g = grad_real(&w);
            let h = piece.real_hessian(&w);
            let m = 2 * n;
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] = if i == j { 1.0 } else { 0.0 } + mu * h[(i, j)];
                }
                a[(i, m)] = g[i];
                a[(m, i)] = g[i];
                b[i] = -(x[i] - zr[i] + mu * g[i]);
            }
            b[m] = -r;
            let step = linalg::solve_real(a, b)?;
            let mut lam = 1.0;
            let norm_step: f64 = (0..m).map(|i| step[i] * step[i]).sum::<f64>().sqrt();
            let cap = 0.5 * linalg::dist(z, &w).max(1e-300) + 1e-3;
            if norm_step > cap {
                lam = cap / norm_step;
            }
            for i in 0..m {
                x[i] += lam * step[i];
            }
            mu += lam * step[m];
            let w = linalg::from_real(&x);
            let rr = piece.fast.eval(&w, &mut s);
            let stat: f64 = {
                let g = grad_real(&w);
                (0..m).map(|i| (x[i] - zr[i] + mu * g[i]).powi(2)).sum::<f64>().sqrt()
            };
            let scale = linalg::dist(z, &w).max(1e-300);
            // Stationarity cannot beat the rounding of x - z.
            let floor = 64.0 * f64::EPSILON * (1.0 + linalg::norm(z));
            if rr.abs() <= 1e-13 * self.rho_scale().max(1.0) && stat <= 1e-11 * scale.max(1e-6) + floor && lam == 1.0 {
                // The minimizer has the gradient pointing outward (μ < 0) and must be on the domain boundary.
                if (!interior || mu < 0.0) && (self.rho(&w) - rr).abs() <= 1e-12 {
                    return Some(w);
                }
                return None;
            }
        }
        None
    }
}

fn is_model_form(rho: &RealPoly) -> bool {
    let n = rho.n();
    let mut lin = Monomial::one(n);
    lin.z[n - 1] = 1;
    let lin_bar = lin.conj();
    for (m, cf) in rho.poly().terms() {
        let involves = m.z[n - 1] > 0 || m.zbar[n - 1] > 0;
        if !involves {
            continue;
        }
        if (*m == lin || *m == lin_bar) && (cf - c(1.0, 0.0)).norm() < 1e-12 {
            continue;
        }
        return false;
    }
    rho.poly().coeff(&lin).norm() > 0.0
}

/// Smallest `t ∈ (0, tmax]` with `f(t) >= 0`, assuming `f(0) < 0`.
pub fn first_crossing(f: &dyn Fn(f64) -> f64, tmax: f64) -> Option<f64> {
    let mut prev = 0.0;
    let steps = 400usize;
    // Geometric grid near 0 followed by a uniform grid.
    let mut grid: Vec<f64> = (0..steps).map(|k| tmax * 1e-14 * (1e14f64).powf(k as f64 / steps as f64)).collect();
    grid.extend((1..=steps).map(|k| tmax * k as f64 / steps as f64));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &t in &grid {
        if f(t) >= 0.0 {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

pub fn random_unit(rng: &mut impl Rng, n: usize) -> Point {
    loop {
        let v: Point = (0..n).map(|_| c(gauss(rng), gauss(rng))).collect();
        let r = linalg::norm(&v);
        if r > 1e-8 {
            return linalg::scale_re(&v, 1.0 / r);
        }
    }
}

pub fn gauss(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Holomorphic polynomial map as a component list, for presets and specs.
pub fn polydisc_pieces(n: usize) -> Vec<RealPoly> {
    (0..n)
        .map(|i| {
            let p = Poly::z(n, i).mul(&Poly::zbar(n, i)).sub(&Poly::constant(n, c(1.0, 0.0)));
            RealPoly::from_poly_projected(&p)
        })
        .collect()
}

/// `|f|^2 - 1` for a holomorphic polynomial `f`.
pub fn modulus_piece(f: &Poly) -> RealPoly {
    let n = f.n();
    RealPoly::from_poly_projected(&f.mul(&f.conj()).sub(&Poly::constant(n, c(1.0, 0.0))))
}

fn abs_pow(n: usize, i: usize, m: u32) -> Poly {
    let mut mono = Monomial::one(n);
    mono.z[i] = m;
    mono.zbar[i] = m;
    Poly::from_terms(n, [(mono, c(1.0, 0.0))])
}

fn two_re(n: usize, i: usize) -> Poly {
    Poly::z(n, i).add(&Poly::zbar(n, i))
}

fn ball_poly(n: usize) -> Poly {
    let mut p = Poly::constant(n, c(-1.0, 0.0));
    for i in 0..n {
        p = p.add(&abs_pow(n, i, 1));
    }
    p
}

/// Fixed bump used by the perturbed-ball family: `|z_1|^4 + Re(z_1^2 z̄_2)`.
pub fn perturbation_bump() -> Poly {
    let n = 2;
    let mut m = Monomial::one(n);
    m.z[0] = 2;
    m.zbar[1] = 1;
    let t = Poly::from_terms(n, [(m, c(0.5, 0.0))]);
    abs_pow(n, 0, 2).add(&t).add(&t.conj())
}

/// Named preset domains.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Ball(usize),
    Polydisc(usize),
    Siegel(usize),
    Halfplane,
    ThullenModel(u32),
    Egg(u32),
    PerturbedBall { k: u32, bump: f64 },
}

impl Preset {
    /// Parses `ball:2`, `egg:2`, `perturbed_ball:16:1.0`, with or without a `preset:` prefix.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.strip_prefix("preset:").unwrap_or(s);
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::UnknownPreset(s.to_string());
        let int = |i: usize, default: u32| -> Result<u32> {
            match parts.get(i) {
                Some(v) => v.parse::<u32>().map_err(|_| bad()),
                None => Ok(default),
            }
        };
        Ok(match parts[0] {
            "ball" => Preset::Ball(int(1, 2)? as usize),
            "polydisc" => Preset::Polydisc(int(1, 2)? as usize),
            "siegel" => Preset::Siegel(int(1, 2)? as usize),
            "halfplane" => Preset::Halfplane,
            "thullen_model" => Preset::ThullenModel(int(1, 2)?),
            "egg" => Preset::Egg(int(1, 2)?),
            "perturbed_ball" => Preset::PerturbedBall {
                k: int(1, 4)?,
                bump: match parts.get(2) {
                    Some(v) => v.parse().map_err(|_| bad())?,
                    None => 1.0,
                },
            },
            _ => return Err(bad()),
        })
    }

    pub fn build(&self) -> Result<Domain> {
        let zero = |n: usize| linalg::zeros(n);
        match *self {
            Preset::Ball(n) => {
                check_dim(n)?;
                Domain::new(
                    format!("ball:{n}"),
                    RealPoly::from_poly_projected(&ball_poly(n)),
                    DomainClass::StronglyPseudoconvex,
                    Some(2),
                    1.0,
                    zero(n),
                )
            }
            Preset::Polydisc(n) => {
                check_dim(n)?;
                Domain::with_pieces(
                    format!("polydisc:{n}"),
                    polydisc_pieces(n),
                    DomainClass::Polyhedron,
                    None,
                    (n as f64).sqrt(),
                    zero(n),
                )
            }
            Preset::Siegel(n) => {
                check_dim(n)?;
                let mut p = two_re(n, n - 1);
                for i in 0..n - 1 {
                    p = p.add(&abs_pow(n, i, 1));
                }
                let mut base = zero(n);
                base[n - 1] = c(-1.0, 0.0);
                Domain::new(
                    format!("siegel:{n}"),
                    RealPoly::from_poly_projected(&p),
                    DomainClass::PolynomialModel,
                    Some(2),
                    10.0,
                    base,
                )
            }
            Preset::Halfplane => Domain::new(
                "halfplane",
                RealPoly::from_poly_projected(&two_re(1, 0)),
                DomainClass::PolynomialModel,
                None,
                10.0,
                vec![c(-1.0, 0.0)],
            ),
            Preset::ThullenModel(m) => {
                if m == 0 {
                    return Err(Error::InvalidArgument("m must be positive".into()));
                }
                let p = two_re(2, 1).add(&abs_pow(2, 0, m));
                Domain::new(
                    format!("thullen_model:{m}"),
                    RealPoly::from_poly_projected(&p),
                    DomainClass::PolynomialModel,
                    Some(2 * m),
                    10.0,
                    vec![c(0.0, 0.0), c(-1.0, 0.0)],
                )
            }
            Preset::Egg(m) => {
                if m == 0 {
                    return Err(Error::InvalidArgument("m must be positive".into()));
                }
                let p = abs_pow(2, 0, m).add(&abs_pow(2, 1, 1)).sub(&Poly::constant(2, c(1.0, 0.0)));
                let class = if m == 1 { DomainClass::StronglyPseudoconvex } else { DomainClass::FiniteType2D };
                Domain::new(
                    format!("egg:{m}"),
                    RealPoly::from_poly_projected(&p),
                    class,
                    Some(2 * m),
                    std::f64::consts::SQRT_2,
                    zero(2),
                )
            }
            Preset::PerturbedBall { k, bump } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("k must be positive".into()));
                }
                let p = ball_poly(2).add(&perturbation_bump().scale(c(bump / k as f64, 0.0)));
                Domain::new(
                    format!("perturbed_ball:{k}:{bump}"),
                    RealPoly::from_poly_projected(&p),
                    DomainClass::StronglyPseudoconvex,
                    Some(2),
                    1.5,
                    zero(2),
                )
            }
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

pub fn preset_domain(name: &str) -> Result<Domain> {
    Preset::parse(name)?.build()
}

/// Generators of an analytic polyhedron `{|f^i| < 1}` with a reference corner.
#[derive(Clone, Debug)]
pub struct PolyhedronSpec {
    pub generators: PolyMap,
    pub reference: Point,
}

impl PolyhedronSpec {
    pub fn new(generators: PolyMap, reference: Point) -> Result<Self> {
        let n = reference.len();
        if generators.dim_out() != n || generators.dim_in() != n {
            return Err(Error::InvalidArgument("need n generators in n variables".into()));
        }
        let vals = generators.eval(&reference);
        for (i, v) in vals.iter().enumerate() {
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(format!("|f^{}(z^0)| = {} is not 1", i + 1, v.norm())));
            }
        }
        let det = linalg::det(&generators.jacobian(&reference));
        if det.norm() <= 1e-9 {
            return Err(Error::Precondition(format!("df^1 ^ ... ^ df^n vanishes at z^0 (|det| = {:e})", det.norm())));
        }
        Ok(PolyhedronSpec { generators, reference })
    }

    /// The polydisc `Δ^n` with corner `(1, ..., 1)`.
    pub fn polydisc(n: usize) -> Self {
        PolyhedronSpec::new(PolyMap::identity(n), vec![c(1.0, 0.0); n]).expect("polydisc spec")
    }

    pub fn domain(&self, bounding_radius: f64, base_point: Point) -> Result<Domain> {
        let pieces = self.generators.comps.iter().map(modulus_piece).collect();
        Domain::with_pieces("polyhedron", pieces, DomainClass::Polyhedron, None, bounding_radius, base_point)
    }
}

#[derive(Deserialize)]
struct TermSpec {
    re: f64,
    #[serde(default)]
    im: f64,
    z: Vec<u32>,
    zbar: Vec<u32>,
}

#[derive(Deserialize)]
struct DomainSpecFile {
    n: usize,
    class: String,
    #[serde(rename = "type")]
    declared_type: Option<u32>,
    terms: Vec<TermSpec>,
    base_point: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pieces: Vec<Vec<TermSpec>>,
    bounding_radius: Option<f64>,
    name: Option<String>,
}

/// Parses a preset string or a JSON domain description, reporting every violation found.
pub fn parse_domain_spec(text: &str) -> Result<Domain> {
    let trimmed = text.trim();
    if trimmed.starts_with("preset:") {
        return preset_domain(trimmed);
    }
    let spec: DomainSpecFile = serde_json::from_str(text).map_err(|e| Error::Schema {
        offset: byte_offset(text, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    let mut problems = Vec::new();
    let class = DomainClass::parse(&spec.class);
    if class.is_none() {
        problems.push(format!("unknown class {:?}", spec.class));
    }
    if spec.n == 0 {
        problems.push("n must be positive".into());
    }
    let mut build = |terms: &[TermSpec]| -> Option<RealPoly> {
        let mut p = Poly::zero(spec.n);
        for t in terms {
            if t.z.len() != spec.n || t.zbar.len() != spec.n {
                problems.push(format!("term (z^{:?}, zbar^{:?}) has wrong length", t.z, t.zbar));
                return None;
            }
            p.add_term(Monomial::new(t.z.clone(), t.zbar.clone()), c(t.re, t.im));
        }
        match RealPoly::new(p, 1e-12) {
            Ok(r) => Some(r),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        }
    };
    let mut pieces = Vec::new();
    if let Some(r) = build(&spec.terms) {
        pieces.push(r);
    }
    for piece in &spec.pieces {
        if let Some(r) = build(piece) {
            pieces.push(r);
        }
    }
    let base = match &spec.base_point {
        Some(b) => b.iter().map(|p| c(p[0], p[1])).collect::<Point>(),
        None => {
            problems.push("missing base_point".into());
            Vec::new()
        }
    };
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Domain::with_pieces(
        spec.name.unwrap_or_else(|| "custom".into()),
        pieces,
        class.unwrap(),
        spec.declared_type,
        spec.bounding_radius.unwrap_or(10.0),
        base,
    )
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    text.len()
}

/// JSON term list for a real polynomial, in the domain-spec format.
pub fn terms_json(p: &RealPoly) -> serde_json::Value {
    serde_json::Value::Array(
        p.poly()
            .terms()
            .map(|(m, cf)| {
                serde_json::json!({
                    "re": crate::report::num17(cf.re),
                    "im": crate::report::num17(cf.im),
                    "z": m.z,
                    "zbar": m.zbar,
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let b = preset_domain("preset:ball:2").unwrap();
        assert_eq!(b.eval_rho(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap(), -1.0);
        let s = preset_domain("siegel:2").unwrap();
        assert_eq!(s.eval_rho(&[c(0.0, 0.0), c(-1.0, 0.0)]).unwrap(), -2.0);
        let e = preset_domain("egg:2").unwrap();
        assert!((e.eval_rho(&[c(0.0, 0.0), c(-0.9, 0.0)]).unwrap() + 0.19).abs() < 1e-15);
        assert_eq!(e.declared_type, Some(4));
        let t = preset_domain("thullen_model:2").unwrap();
        assert_eq!(t.class, DomainClass::PolynomialModel);
        assert_eq!(t.declared_type, Some(4));
        assert!(preset_domain("preset:torus:2").is_err());
    }

    #[test]
    fn gradients() {
        let b = preset_domain("ball:2").unwrap();
        let g = b.wirtinger_gradient(&[c(0.5, 0.0), c(0.0, 0.0)]);
        assert!((g[0] - c(0.5, 0.0)).norm() < 1e-15 && g[1].norm() < 1e-15);
        let s = preset_domain("siegel:2").unwrap();
        let z = [c(0.3, -0.4), c(-2.0, 1.0)];
        let g = s.wirtinger_gradient(&z);
        assert!((g[0] - z[0].conj()).norm() < 1e-15 && (g[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn distances() {
        let b = preset_domain("ball:2").unwrap();
        let f = b.boundary_distance(&[c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((f.distance - 0.5).abs() < 1e-12);
        assert!((f.foot[0] - c(1.0, 0.0)).norm() < 1e-10);
        let f = b.boundary_distance(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((f.distance - 1.0).abs() < 1e-12);
        let e = preset_domain("egg:2").unwrap();
        let f = e.boundary_distance(&[c(0.0, 0.0), c(-0.9, 0.0)]).unwrap();
        assert!((f.distance - 0.1).abs() < 1e-12);
        assert!((f.foot[1] - c(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn spec_roundtrip_and_errors() {
        let text = r#"{"n": 2, "class": "PolynomialModel", "type": 4,
            "terms": [{"re": 1, "im": 0, "z": [0,1], "zbar": [0,0]},
                      {"re": 1, "im": 0, "z": [0,0], "zbar": [0,1]},
                      {"re": 1, "im": 0, "z": [2,0], "zbar": [2,0]}],
            "base_point": [[0,0],[-1,0]]}"#;
        let d = parse_domain_spec(text).unwrap();
        assert_eq!(d.class, DomainClass::PolynomialModel);
        let bad = r#"{"n": 1, "class": "Generic", "terms": [{"re": 1, "im": 0, "z": [1], "zbar": [0]}], "base_point": [[0,0]]}"#;
        match parse_domain_spec(bad) {
            Err(Error::Validation(v)) => assert!(v[0].contains("[1]") && v[0].contains("[0]")),
            other => panic!("unexpected {other:?}"),
        }
        match parse_domain_spec("{\"n\": 2,\n \"class\": }") {
            Err(Error::Schema { offset, .. }) => assert!(offset > 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn polyhedron_genericity() {
        let n = 2;
        let gens = PolyMap::new(vec![Poly::z(n, 0), Poly::z(n, 0)]);
        assert!(PolyhedronSpec::new(gens, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        let p = PolyhedronSpec::polydisc(2);
        let d = p.domain(2.0, linalg::zeros(2)).unwrap();
        assert!(d.contains(&[c(0.9, 0.0), c(0.0, 0.9)]));
        assert!(!d.contains(&[c(0.9, 0.0), c(0.0, 1.1)]));
    }
}

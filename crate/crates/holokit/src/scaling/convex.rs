//! Extremal frames and scaling for convex domains of finite type.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::automorphism::{MapKind, PolynomialAutomorphism};
use super::{image_domain, Pipeline, ScalingEntry};
use crate::domain::{random_unit, Domain, DomainClass};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::poly::{Poly, RealPoly};

#[derive(Clone, Debug, Serialize)]
pub struct McNealFrame {
    pub q: Point,
    pub eps: f64,
    /// `τ_1, ..., τ_n`.
    pub taus: Vec<f64>,
    /// `p^1, ..., p^n` on `∂D_{q,ε}`.
    pub extremal: Vec<Point>,
    /// Rows `conj((p^i - q) / τ_i)`.
    pub unitary: Vec<Vec<C64>>,
    /// `max |U U* - I|`.
    pub gram_error: f64,
    #[serde(skip)]
    pub map: PolynomialAutomorphism,
}

/// Distance from `q` to the boundary inside the complex line `q + C v`, the
/// angle where it is attained, and a convexity check along every sampled ray.
fn line_distance(d: &Domain, q: &[C64], v: &[C64]) -> Result<(f64, f64)> {
    let tmax = 2.0 * d.bounding_radius + linalg::norm(q);
    let exit = |theta: f64| -> Result<f64> {
        let u = linalg::scale(v, C64::from_polar(1.0, theta));
        d.ray_exit(q, &u, tmax).ok_or_else(|| Error::DegenerateGeometry("level set is unbounded along a complex line".into()))
    };
    let k = 64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..k {
        let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        let t = exit(th)?;
        let u = linalg::scale(v, C64::from_polar(1.0, th));
        for s in 1..=40 {
            let tt = t + (tmax - t) * s as f64 / 40.0;
            if d.rho(&linalg::axpy(q, tt, &u)) < 0.0 {
                return Err(Error::ConvexityViolation(format!("line through q re-enters the domain at t = {tt}")));
            }
        }
        if t < best.0 {
            best = (t, th);
        }
    }
    // Golden-section refinement of the minimum over the angle.
    let h = 2.0 * std::f64::consts::PI / k as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = exit(x1)?;
    let mut f2 = exit(x2)?;
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = exit(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = exit(x2)?;
        }
    }
    let (t, th) = if f1 <= f2 { (f1, x1) } else { (f2, x2) };
    Ok(if t < best.0 { (t, th) } else { best })
}

/// Orthonormal basis of the orthogonal complement of `used` in `C^n`.
fn complement(n: usize, used: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for k in 0..n {
        let mut v = linalg::unit(n, k);
        for _ in 0..2 {
            for u in used.iter().chain(out.iter()) {
                let p = linalg::hdot(&v, u);
                v = linalg::sub(&v, &linalg::scale(u, p));
            }
        }
        let r = linalg::norm(&v);
        if r > 1e-6 {
            out.push(linalg::scale_re(&v, 1.0 / r));
        }
        if out.len() + used.len() == n {
            break;
        }
    }
    out
}

/// Deterministic multi-start pattern search for the line in `span(basis)` with
/// the largest boundary distance.
fn widest_line(d: &Domain, q: &[C64], basis: &[Point]) -> Result<(Point, f64, f64)> {
    let k = basis.len();
    let n = q.len();
    let to_vec = |coef: &[C64]| -> Point {
        let mut v = linalg::zeros(n);
        for (ci, b) in coef.iter().zip(basis) {
            v = linalg::add(&v, &linalg::scale(b, *ci));
        }
        linalg::normalized(&v)
    };
    if k == 1 {
        let v = basis[0].clone();
        let (t, th) = line_distance(d, q, &v)?;
        return Ok((v, t, th));
    }
    let mut starts: Vec<Point> = (0..k).map(|i| linalg::unit(k, i)).collect();
    for i in 0..k {
        for j in i + 1..k {
            starts.push(linalg::add(&linalg::unit(k, i), &linalg::unit(k, j)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d63);
    for _ in 0..4 {
        starts.push(random_unit(&mut rng, k));
    }
    let mut best: Option<(Point, f64, f64)> = None;
    for s in starts {
        let mut coef = linalg::normalized(&s);
        let mut cur = line_distance(d, q, &to_vec(&coef))?;
        let mut step = 0.25;
        while step > 1e-6 {
            let mut moved = false;
            for idx in 0..2 * k {
                for sign in [1.0, -1.0] {
                    let mut trial = coef.clone();
                    trial[idx / 2] += if idx % 2 == 0 { c(sign * step, 0.0) } else { c(0.0, sign * step) };
                    if linalg::norm(&trial) < 1e-9 {
                        continue;
                    }
                    let trial = linalg::normalized(&trial);
                    let val = line_distance(d, q, &to_vec(&trial))?;
                    if val.0 > cur.0 + 1e-14 * cur.0 {
                        coef = trial;
                        cur = val;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|b| cur.0 > b.1 * (1.0 + 1e-12)) {
            best = Some((to_vec(&coef), cur.0, cur.1));
        }
    }
    Ok(best.unwrap())
}

/// Extremal frame of `D_{q,ε} = {ρ < ρ(q) + ε}` at `q`.
pub fn mcneal_frame(d: &Domain, q: &[C64], eps: f64) -> Result<McNealFrame> {
    if !matches!(d.class, DomainClass::ConvexFiniteType | DomainClass::FiniteType2D | DomainClass::StronglyPseudoconvex) {
        return Err(Error::Precondition(format!("class {} is not ConvexFiniteType", d.class.name())));
    }
    if d.piece_count() != 1 {
        return Err(Error::Precondition("extremal frames need a single defining function".into()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let n = d.n();
    let level = d.rho(q) + eps;
    let shifted = d.rho_poly().add(&RealPoly::from_poly_projected(&Poly::constant(n, c(-level, 0.0))));
    let lev = Domain::new(format!("{}_level", d.name), shifted, d.class, d.declared_type, 2.0 * d.bounding_radius + linalg::norm(q), q.to_vec())?;

    let foot = lev.boundary_distance(q)?;
    let mut dirs: Vec<Point> = vec![linalg::scale_re(&linalg::sub(&foot.foot, q), 1.0 / foot.distance)];
    let mut taus = vec![foot.distance];
    let mut pts = vec![foot.foot];
    for _ in 1..n {
        let basis = complement(n, &dirs);
        let (v, t, th) = widest_line(&lev, q, &basis)?;
        let u = linalg::scale(&v, C64::from_polar(1.0, th));
        pts.push(linalg::axpy(q, t, &u));
        dirs.push(u);
        taus.push(t);
    }
    // Stored in order 1..n.
    dirs.reverse();
    taus.reverse();
    pts.reverse();
    let unitary: Vec<Vec<C64>> = dirs.iter().map(|u| u.iter().map(|x| x.conj()).collect()).collect();
    let uh = linalg::conj_transpose(&unitary);
    let mut gram_error: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e: C64 = (0..n).map(|k| unitary[i][k] * uh[k][j]).sum();
            gram_error = gram_error.max((e - c(if i == j { 1.0 } else { 0.0 }, 0.0)).norm());
        }
    }
    if gram_error > 1e-10 {
        return Err(Error::Assertion(format!("extremal lines are not orthogonal (Gram error {gram_error:e})")));
    }
    let neg: Point = q.iter().map(|x| -x).collect();
    let map = PolynomialAutomorphism::translation(&neg).then(&PolynomialAutomorphism::linear(&unitary, MapKind::Unitary)?);
    Ok(McNealFrame { q: q.to_vec(), eps, taus, extremal: pts, unitary, gram_error, map })
}

/// Half-spaces `H_k = {Re((z_k - 1) a_kk + Σ_{i>k} a_ki z_i) ≤ 0}` with `a_ki = ∂ρ̃/∂z_i(e^k)`.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub coefficients: Vec<Vec<C64>>,
    /// `e^k = Λ^{-1}(p^k)` in scaled coordinates.
    pub points: Vec<Point>,
    /// `max_k |Im a_kk| / |a_kk|`.
    pub phase_defect: f64,
    /// Largest `H_k` value seen on the sampled points.
    pub worst_value: f64,
    pub samples: usize,
}

impl Envelope {
    pub fn value(&self, k: usize, z: &[C64]) -> f64 {
        let a = &self.coefficients[k];
        let mut s = (z[k] - c(1.0, 0.0)) * a[k];
        for i in k + 1..z.len() {
            s += a[i] * z[i];
        }
        s.re
    }

    pub fn contains(&self, z: &[C64], tol: f64) -> bool {
        (0..z.len()).all(|k| self.value(k, z) <= tol * (1.0 + linalg::norm(z)) * linalg::norm(&self.coefficients[k]))
    }
}

/// Interior sample points of `d`: half uniform in the bounding ball, half in
/// the polydisc `q + Σ s_i τ_i u_i`, `|s_i| < 1`.
fn sample_points(d: &Domain, frame: &McNealFrame, count: usize) -> Vec<Point> {
    let n = d.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe7e1);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 200 * count {
        tries += 1;
        let z = if out.len() % 2 == 0 {
            let u = random_unit(&mut rng, n);
            let r: f64 = rand::Rng::gen::<f64>(&mut rng).powf(1.0 / (2 * n) as f64) * d.bounding_radius;
            linalg::axpy(&d.base_point, r, &u)
        } else {
            let mut z = frame.q.clone();
            for i in 0..n {
                let s = random_unit(&mut rng, 1)[0] * rand::Rng::gen::<f64>(&mut rng).sqrt();
                let u: Point = frame.unitary[i].iter().map(|x| x.conj()).collect();
                z = linalg::add(&z, &linalg::scale(&u, s * frame.taus[i]));
            }
            z
        };
        if d.contains(&z) {
            out.push(z);
        }
    }
    out
}

/// `D^j = Λ^{-1} ∘ U ∘ T(D)` at `q^j` with `ε_j = -ρ(q^j)`, plus its half-space envelope.
pub fn convex_scaled_domain(d: &Domain, q: &[C64]) -> Result<ScalingEntry> {
    let n = d.n();
    let eps = -d.rho(q);
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::OutsideDomain(format!("{q:?}")));
    }
    let frame = mcneal_frame(d, q, eps)?;
    let inv: Vec<C64> = frame.taus.iter().map(|t| c(1.0 / t, 0.0)).collect();
    let map = frame.map.then(&PolynomialAutomorphism::dilation(&inv)?);
    let image = map.eval(q);
    let domain = image_domain(d, &map, eps, &format!("{}^j", d.name), &image)?;

    let points: Vec<Point> = frame.extremal.iter().map(|p| map.eval(p)).collect();
    let mut coefficients = Vec::with_capacity(n);
    let mut phase_defect: f64 = 0.0;
    for (k, e) in points.iter().enumerate() {
        let g = domain.rho_poly().gradient(e);
        let mut a = vec![C64::default(); n];
        a[k..n].copy_from_slice(&g[k..n]);
        if g[k].norm() == 0.0 {
            return Err(Error::EnvelopeViolation(format!("dρ/dz_{} vanishes at e^{}", k + 1, k + 1)));
        }
        phase_defect = phase_defect.max(g[k].im.abs() / g[k].norm());
        coefficients.push(a);
    }
    let mut env = Envelope { coefficients, points, phase_defect, worst_value: f64::NEG_INFINITY, samples: 0 };
    let samples = sample_points(d, &frame, 1000);
    for z in &samples {
        let w = map.eval(z);
        for k in 0..n {
            env.worst_value = env.worst_value.max(env.value(k, &w) / ((1.0 + linalg::norm(&w)) * linalg::norm(&env.coefficients[k])));
        }
        if !env.contains(&w, 1e-8) {
            return Err(Error::EnvelopeViolation(format!("scaled point {w:?} lies outside the half-space envelope")));
        }
    }
    env.samples = samples.len();
    let bd = d.boundary_distance(q).map(|f| f.distance).unwrap_or(f64::NAN);
    let mut scales = vec![eps];
    scales.extend(&frame.taus);
    Ok(ScalingEntry {
        pipeline: Pipeline::Convex,
        point: q.to_vec(),
        center: q.to_vec(),
        scales,
        boundary_distance: bd,
        map,
        image,
        target: linalg::zeros(n),
        domain,
        expansion: None,
        d_coeffs: vec![],
        frame: Some(frame),
        envelope: Some(env),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::preset_domain;

    #[test]
    fn ball_frame() {
        let b = preset_domain("ball:2").unwrap();
        let q = linalg::zeros(2);
        let f = mcneal_frame(&b, &q, 1.0).unwrap();
        for t in &f.taus {
            assert!((t - 1.0).abs() < 1e-10);
        }
        assert!(linalg::norm(&f.map.eval(&q)) == 0.0);
        assert!(f.gram_error < 1e-10);
        for (i, p) in f.extremal.iter().enumerate() {
            let w = f.map.eval(p);
            for (k, wk) in w.iter().enumerate() {
                let want = if k == i { f.taus[i] } else { 0.0 };
                assert!((wk - c(want, 0.0)).norm() < 1e-10, "{w:?}");
            }
        }
    }

    #[test]
    fn ball_envelope() {
        let b = preset_domain("ball:2").unwrap();
        let e = convex_scaled_domain(&b, &[c(0.0, 0.0), c(0.0, -0.9)]).unwrap();
        assert!(e.center_error() == 0.0);
        let env = e.envelope.unwrap();
        assert_eq!(env.samples, 1000);
        assert!(env.phase_defect < 1e-8);
        assert!(e.domain.contains(&linalg::zeros(2)));
    }

    #[test]
    fn rejects_generic() {
        let mut b = preset_domain("ball:2").unwrap();
        b.class = DomainClass::Generic;
        assert!(mcneal_frame(&b, &linalg::zeros(2), 1.0).is_err());
    }

    #[test]
    fn detects_nonconvex_line() {
        // Annulus-like slice: {(|z_1|^2 - 1)^2 + |z_2|^2 < 0.25}, centered on the hole.
        let n = 2;
        let a = Poly::z(n, 0).mul(&Poly::zbar(n, 0)).sub(&Poly::constant(n, c(1.0, 0.0)));
        let p = a.mul(&a).add(&Poly::z(n, 1).mul(&Poly::zbar(n, 1))).sub(&Poly::constant(n, c(0.25, 0.0)));
        let d = Domain::new("ring", RealPoly::from_poly_projected(&p), DomainClass::ConvexFiniteType, None, 2.0, vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let r = line_distance(&d, &[c(1.0, 0.0), c(0.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(r, Err(Error::ConvexityViolation(_))), "{r:?}");
    }
}

//! Scaling at finite-type boundary points in `C^2`.
//!
//! Work happens in a chart where `ρ = 2 Re z_2 + (terms of higher weight)`
//! near the reference point `p^0 = 0`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::automorphism::{MapKind, PolynomialAutomorphism};
use super::{image_domain, Pipeline, ScalingEntry};
use crate::domain::{Domain, DomainClass};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::poly::{Monomial, Poly, PolyMap, RealPoly};

/// Local coordinates at `p^0`: translation to 0, then a unitary map taking the
/// complex normal to the `z_2` axis, with `ρ` divided by `|∂ρ(p^0)|`.
#[derive(Clone, Debug)]
pub struct CatlinChart {
    pub base: Domain,
    pub p0: Point,
    pub map: PolynomialAutomorphism,
    /// Chart image of the base domain.
    pub domain: Domain,
    /// `|∂ρ(p^0)|`.
    pub gradient_norm: f64,
}

pub fn catlin_chart(d: &Domain, p0: &[C64]) -> Result<CatlinChart> {
    if d.n() != 2 {
        return Err(Error::Precondition("finite-type scaling needs n = 2".into()));
    }
    let r = d.rho(p0);
    if r.abs() > 1e-10 * d.rho_scale().max(1.0) {
        return Err(Error::Precondition(format!("p0 is not on the boundary (rho = {r:e})")));
    }
    let g = d.wirtinger_gradient(p0);
    let gn = linalg::norm(&g);
    if gn == 0.0 {
        return Err(Error::DegenerateGeometry("vanishing gradient at p0".into()));
    }
    let neg: Point = p0.iter().map(|x| -x).collect();
    let map = PolynomialAutomorphism::translation(&neg).then(&PolynomialAutomorphism::linear(&linalg::unitary_with_last_row(&g), MapKind::Unitary)?);
    let base_img = map.eval(&d.base_point);
    let domain = image_domain(d, &map, gn, &format!("{}@chart", d.name), &base_img)?;
    Ok(CatlinChart { base: d.clone(), p0: p0.to_vec(), map, domain, gradient_norm: gn })
}

/// Boundary expansion `2 Re w_2 + Σ_{l=2}^{2m} P_l(w_1, w̄_1) + R` at a center.
#[derive(Clone, Debug, Serialize)]
pub struct HomogeneousExpansion {
    pub center: Point,
    pub two_m: u32,
    /// `(l, P_l)` for `l = 2, ..., 2m`.
    #[serde(skip)]
    pub parts: Vec<(u32, RealPoly)>,
    /// Everything else: terms involving `w_2` and pure `w_1` terms of degree above `2m`.
    #[serde(skip)]
    pub remainder: RealPoly,
}

impl HomogeneousExpansion {
    /// Expansion from explicit parts, for tests and hand-built models.
    pub fn from_parts(center: Point, two_m: u32, parts: Vec<(u32, RealPoly)>) -> Result<Self> {
        for (l, p) in &parts {
            if p.poly().terms().any(|(m, _)| m.degree() != *l || m.z[1] + m.zbar[1] > 0) {
                return Err(Error::InvalidArgument(format!("P_{l} is not homogeneous in w_1")));
            }
        }
        Ok(HomogeneousExpansion { center, two_m, parts, remainder: RealPoly::from_poly_projected(&Poly::zero(2)) })
    }

    pub fn part(&self, l: u32) -> Option<&RealPoly> {
        self.parts.iter().find(|(k, _)| *k == l).map(|(_, p)| p)
    }

    /// `‖P_l‖`, the largest coefficient modulus.
    pub fn norm(&self, l: u32) -> f64 {
        self.part(l).map_or(0.0, |p| p.poly().max_abs_coeff())
    }

    /// `(1/ε) Σ τ^l P_l(w_1)`.
    pub fn scaled_sum(&self, eps: f64, tau: f64) -> Poly {
        let mut out = Poly::zero(2);
        for (l, p) in &self.parts {
            out = out.add(&p.poly().scale(c(tau.powi(*l as i32) / eps, 0.0)));
        }
        out
    }
}

fn w1_power(l: u32) -> Monomial {
    Monomial::new(vec![l, 0], vec![0, 0])
}

fn inverse_map(zeta: &[C64], d: &[C64]) -> PolyMap {
    let mut second = Poly::constant(2, zeta[1]).add(&Poly::z(2, 1).scale(d[0]));
    for (l, dl) in d.iter().enumerate().skip(1) {
        second.add_term(w1_power(l as u32), *dl);
    }
    PolyMap::new(vec![Poly::constant(2, zeta[0]).add(&Poly::z(2, 0)), second])
}

/// `φ^ζ`, the coefficients `d^0, ..., d^{2m}` and the expansion at `ζ`.
///
/// `d` must be in chart form (see [`catlin_chart`]).
pub fn catlin_automorphism(d: &Domain, zeta: &[C64], two_m: u32) -> Result<(PolynomialAutomorphism, Vec<C64>, HomogeneousExpansion)> {
    if d.n() != 2 {
        return Err(Error::Precondition("finite-type scaling needs n = 2".into()));
    }
    if !matches!(d.class, DomainClass::FiniteType2D | DomainClass::StronglyPseudoconvex | DomainClass::PolynomialModel) {
        return Err(Error::Precondition(format!("class {} is not FiniteType2D", d.class.name())));
    }
    if two_m < 2 || two_m % 2 != 0 {
        return Err(Error::InvalidArgument(format!("type {two_m} is not an even integer >= 2")));
    }
    let scale = d.rho_scale().max(1.0);
    let r = d.rho(zeta);
    if r.abs() > 1e-10 * scale {
        return Err(Error::Precondition(format!("zeta is not on the boundary (rho = {r:e})")));
    }
    let g = d.wirtinger_gradient(zeta)[1];
    if g.norm() < 1e-8 {
        return Err(Error::DegenerateGeometry("dρ/dz_2 vanishes at zeta".into()));
    }
    let rho = d.rho_poly();
    let mut dco = vec![C64::default(); two_m as usize + 1];
    dco[0] = c(1.0, 0.0) / g;
    // Raising d^l changes the w_1^l coefficient by g Δd^l and only touches higher degrees otherwise.
    for l in 1..=two_m {
        let comp = rho.poly().compose_truncated(&inverse_map(zeta, &dco), two_m);
        dco[l as usize] -= comp.coeff(&w1_power(l)) / g;
    }
    let full = rho.compose(&inverse_map(zeta, &dco));
    let tol = 1e-10 * scale;
    let mut parts: Vec<(u32, Poly)> = (2..=two_m).map(|l| (l, Poly::zero(2))).collect();
    let mut rest = Poly::zero(2);
    for (m, cf) in full.poly().terms() {
        let deg = m.degree();
        let tangential = m.z[1] + m.zbar[1] == 0;
        if tangential && (2..=two_m).contains(&deg) {
            parts[deg as usize - 2].1.add_term(m.clone(), *cf);
        } else if tangential && deg <= 1 {
            if cf.norm() > tol {
                return Err(Error::Assertion(format!("residual term {:?}/{:?} = {cf} after normalization", m.z, m.zbar)));
            }
        } else if deg == 1 && m.z[1] + m.zbar[1] == 1 {
            if (cf - c(1.0, 0.0)).norm() > tol {
                return Err(Error::Assertion(format!("normal coefficient {cf} is not 1")));
            }
        } else {
            rest.add_term(m.clone(), *cf);
        }
    }
    for (l, p) in &parts {
        let h = p.coeff(&w1_power(*l));
        if h.norm() > tol {
            return Err(Error::Assertion(format!("harmonic term left in P_{l}: {h}")));
        }
    }
    let parts: Vec<(u32, RealPoly)> = parts
        .into_iter()
        .map(|(l, p)| (l, RealPoly::from_poly_projected(&p.filter(|m| !m.is_harmonic()))))
        .collect();
    if parts.iter().all(|(_, p)| p.poly().max_abs_coeff() <= 1e-14 * scale) {
        return Err(Error::TypeMismatch(format!("all P_l vanish up to degree {two_m}")));
    }
    let expansion = HomogeneousExpansion { center: zeta.to_vec(), two_m, parts, remainder: RealPoly::from_poly_projected(&rest) };

    let neg: Point = zeta.iter().map(|x| -x).collect();
    let mut q = Poly::zero(2);
    for (l, dl) in dco.iter().enumerate().skip(1) {
        q.add_term(w1_power(l as u32), -dl * g);
    }
    let phi = PolynomialAutomorphism::translation(&neg).then(&PolynomialAutomorphism::shear_last(2, g, &q)?);
    Ok((phi, dco, expansion))
}

/// `min_l (ε / ‖P_l‖)^{1/l}` over the nonzero parts; ties go to the smaller `l`.
pub fn catlin_tau(expansion: &HomogeneousExpansion, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut best: Option<f64> = None;
    for l in 2..=expansion.two_m {
        let nl = expansion.norm(l);
        if nl > 0.0 {
            let t = (eps / nl).powf(1.0 / l as f64);
            if best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best.ok_or_else(|| Error::TypeMismatch("all P_l vanish".into()))
}

/// One entry `D^j = Δ ∘ φ^{ζ^j}(D)` with `ζ^j = p^j + (0, ε_j)` in chart coordinates.
pub fn catlin_scaled_domain(chart: &CatlinChart, p: &[C64], two_m: u32) -> Result<ScalingEntry> {
    let pc = chart.map.eval(p);
    let dc = &chart.domain;
    if !dc.contains(&pc) {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let up = vec![c(0.0, 0.0), c(1.0, 0.0)];
    let eps0 = dc
        .ray_exit(&pc, &up, 2.0 * dc.bounding_radius + linalg::norm(&pc))
        .ok_or_else(|| Error::RootFinding("rho(p + (0, t)) has no root".into()))?;
    let zeta = vec![pc[0], pc[1] + eps0];
    // Use the representable offset so that φ(p) = (0, -ε/d^0) holds exactly.
    let eps = (zeta[1] - pc[1]).re;
    let (phi, dco, expansion) = catlin_automorphism(dc, &zeta, two_m)?;
    let tau = catlin_tau(&expansion, eps)?;
    let map = chart.map.then(&phi).then(&PolynomialAutomorphism::dilation(&[c(1.0 / tau, 0.0), c(1.0 / eps, 0.0)])?);
    let image = map.eval(p);
    let target = vec![c(0.0, 0.0), -c(1.0, 0.0) / dco[0]];
    let domain = image_domain(&chart.base, &map, chart.gradient_norm * eps, &format!("{}^j", chart.base.name), &image)?;
    let bd = chart.base.boundary_distance(p).map(|f| f.distance).unwrap_or(f64::NAN);
    Ok(ScalingEntry {
        pipeline: Pipeline::FiniteType2D,
        point: p.to_vec(),
        center: zeta,
        scales: vec![eps, tau],
        boundary_distance: bd,
        map,
        image,
        target,
        domain,
        expansion: Some(expansion),
        d_coeffs: dco,
        frame: None,
        envelope: None,
    })
}

/// Coefficientwise Aitken extrapolation of `(1/ε_j) Σ τ_j^l P_l` over the last three entries.
pub fn limit_polynomial(entries: &[ScalingEntry]) -> Result<RealPoly> {
    let seq: Vec<Poly> = entries
        .iter()
        .filter_map(|e| e.expansion.as_ref().map(|x| x.scaled_sum(e.scales[0], e.scales[1])))
        .collect();
    if seq.len() < 3 {
        return Err(Error::Precondition("need at least 3 finite-type entries".into()));
    }
    let two_m = entries.iter().find_map(|e| e.expansion.as_ref()).map(|e| e.two_m).unwrap();
    let k = seq.len();
    let (a1, a2, a3) = (&seq[k - 3], &seq[k - 2], &seq[k - 1]);
    let mut monos: Vec<Monomial> = Vec::new();
    for p in [a1, a2, a3] {
        for (m, _) in p.terms() {
            if !monos.contains(m) {
                monos.push(m.clone());
            }
        }
    }
    let top = a3.max_abs_coeff().max(1e-300);
    let change = monos.iter().map(|m| (a3.coeff(m) - a2.coeff(m)).norm()).fold(0.0, f64::max) / top;
    if change > 0.05 {
        return Err(Error::NonConvergence(format!("coefficients changed by {:.3}% between the last two entries", 100.0 * change)));
    }
    let mut out = Poly::zero(2);
    for m in &monos {
        let (x1, x2, x3) = (a1.coeff(m), a2.coeff(m), a3.coeff(m));
        let den = x3 - x2 * 2.0 + x1;
        let d32 = x3 - x2;
        let d21 = x2 - x1;
        let v = if den.norm() > 1e-12 * top && d21.norm() > 0.0 && (d32 / d21).norm() < 0.95 { x3 - d32 * d32 / den } else { x3 };
        if v.norm() > 1e-9 * top {
            out.add_term(m.clone(), v);
        }
    }
    let p = RealPoly::from_poly_projected(&out);
    if p.degree() > two_m {
        return Err(Error::Assertion(format!("limit has degree {} > {two_m}", p.degree())));
    }
    if p.poly().terms().any(|(m, cf)| m.is_harmonic() && m.degree() > 0 && cf.norm() > 1e-8 * top) {
        return Err(Error::Assertion("limit has harmonic terms".into()));
    }
    let worst = grid_laplacian_min(&p);
    if worst < -1e-8 * top {
        return Err(Error::Assertion(format!("limit is not subharmonic on the grid (Laplacian {worst:e})")));
    }
    Ok(p)
}

/// Smallest five-point Laplacian of `P(z_1)` on the 41×41 grid of `[-2, 2]^2` inside `|z_1| ≤ 2`.
pub fn grid_laplacian_min(p: &RealPoly) -> f64 {
    let h = 0.1;
    let f = |x: f64, y: f64| p.eval(&[c(x, y), c(0.0, 0.0)]);
    let mut worst = f64::INFINITY;
    for i in 0..41 {
        for j in 0..41 {
            let (x, y) = (-2.0 + h * i as f64, -2.0 + h * j as f64);
            if x * x + y * y > 4.0 + 1e-12 {
                continue;
            }
            let lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
            worst = worst.min(lap);
        }
    }
    worst
}

/// `{2 Re z_2 + P(z_1) < 0}`.
pub fn limit_model(p: &RealPoly, two_m: u32) -> Result<Domain> {
    let lin = Poly::z(2, 1).add(&Poly::zbar(2, 1));
    Domain::new(
        "limit_model",
        RealPoly::from_poly_projected(&lin.add(p.poly())),
        DomainClass::PolynomialModel,
        Some(two_m),
        10.0,
        vec![c(0.0, 0.0), c(-1.0, 0.0)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::preset_domain;

    fn abs_pow(k: u32) -> RealPoly {
        RealPoly::from_poly_projected(&Poly::from_terms(2, [(Monomial::new(vec![k, 0], vec![k, 0]), c(1.0, 0.0))]))
    }

    fn egg_chart() -> CatlinChart {
        catlin_chart(&preset_domain("egg:2").unwrap(), &[c(0.0, 0.0), c(-1.0, 0.0)]).unwrap()
    }

    #[test]
    fn chart_form() {
        let ch = egg_chart();
        // 2 Re w_2 + |w_1|^4 + |w_2|^2.
        let p = ch.domain.rho_poly().poly();
        assert!((p.coeff(&Monomial::new(vec![0, 1], vec![0, 0])) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((p.coeff(&Monomial::new(vec![2, 0], vec![2, 0])) - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn expansion_at_p0() {
        let ch = egg_chart();
        let zero = linalg::zeros(2);
        let (phi, d, e) = catlin_automorphism(&ch.domain, &zero, 4).unwrap();
        assert!(linalg::norm(&phi.eval(&zero)) < 1e-15);
        assert!((d[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(e.norm(2), 0.0);
        assert_eq!(e.norm(3), 0.0);
        assert_eq!(e.part(4).unwrap(), &abs_pow(2));
    }

    #[test]
    fn off_center_expansion_absorbs_harmonic_terms() {
        let ch = egg_chart();
        // A boundary point of the chart domain off the normal line.
        let z1 = c(0.2, 0.1);
        let t = ch.domain.ray_exit(&[z1, c(-0.5, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)], 2.0).unwrap();
        let zeta = vec![z1, c(-0.5 + t, 0.0)];
        let (phi, _, e) = catlin_automorphism(&ch.domain, &zeta, 4).unwrap();
        assert!(linalg::norm(&phi.eval(&zeta)) < 1e-14);
        for (l, p) in &e.parts {
            assert!(p.poly().coeff(&w1_power(*l)).norm() == 0.0);
        }
        assert!(e.norm(2) > 0.0);
    }

    #[test]
    fn tau_examples() {
        let z = linalg::zeros(2);
        let e = HomogeneousExpansion::from_parts(z.clone(), 4, vec![(2, abs_pow(1))]).unwrap();
        assert!((catlin_tau(&e, 0.01).unwrap() - 0.1).abs() < 1e-15);
        let e = HomogeneousExpansion::from_parts(z.clone(), 4, vec![(4, abs_pow(2))]).unwrap();
        assert!((catlin_tau(&e, 1e-4).unwrap() - 0.1).abs() < 1e-15);
        let e = HomogeneousExpansion::from_parts(z.clone(), 4, vec![(2, abs_pow(1).scale(1e-6)), (4, abs_pow(2))]).unwrap();
        let direct = (1e-4f64 / 1e-6).sqrt().min(1e-4f64.powf(0.25));
        assert!((catlin_tau(&e, 1e-4).unwrap() - direct).abs() < 1e-15);
        let e = HomogeneousExpansion::from_parts(z, 4, vec![]).unwrap();
        assert!(matches!(catlin_tau(&e, 1e-4), Err(Error::TypeMismatch(_))));
    }

    #[test]
    fn normal_sequence_on_egg() {
        let ch = egg_chart();
        for delta in [1e-2, 1e-4, 1e-6] {
            let p = vec![c(0.0, 0.0), c(-1.0 + delta, 0.0)];
            let e = catlin_scaled_domain(&ch, &p, 4).unwrap();
            assert!(e.center_error() < 1e-10, "{:?}", e.image);
            assert!((e.tau_ratio().unwrap() - 1.0).abs() < 1e-9);
            let q = e.domain.rho_poly().poly();
            assert!((q.coeff(&Monomial::new(vec![2, 0], vec![2, 0])) - c(1.0, 0.0)).norm() < 1e-9);
            assert!((q.coeff(&Monomial::new(vec![0, 1], vec![0, 0])) - c(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn wrong_dimension() {
        let b = preset_domain("ball:3").unwrap();
        assert!(catlin_chart(&b, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }
}

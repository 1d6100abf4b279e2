//! Normalization and anisotropic scaling at strongly pseudoconvex boundary points.

use num_complex::Complex64 as C64;

use super::automorphism::{MapKind, PolynomialAutomorphism};
use super::{image_domain, Pipeline, ScalingEntry};
use crate::domain::{preset_domain, Domain, DomainClass};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::poly::{Monomial, Poly, RealPoly};

/// Lower-triangular `L` with `m = L L*`, `None` unless `m` is positive definite.
fn cholesky(m: &[Vec<C64>]) -> Option<Vec<Vec<C64>>> {
    let k = m.len();
    let mut l = vec![vec![C64::default(); k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: C64 = (0..j).map(|p| l[i][p] * l[j][p].conj()).sum();
            if i == j {
                let d = (m[i][i] - s).re;
                if d <= 1e-12 {
                    return None;
                }
                l[i][i] = c(d.sqrt(), 0.0);
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// `h_ζ` and `ρ_ζ = ρ ∘ h_ζ^{-1}` with `ρ_ζ = 2(Re z_n + K) + H + o(|z|²)`,
/// `K('z, 0) = 0`, `H('z, 0) = |'z|²`.
pub fn spsc_normalization(d: &Domain, zeta: &[C64]) -> Result<(PolynomialAutomorphism, RealPoly)> {
    let n = d.n();
    if d.class != DomainClass::StronglyPseudoconvex {
        return Err(Error::Precondition(format!("class {} is not StronglyPseudoconvex", d.class.name())));
    }
    let r = d.rho(zeta);
    if r.abs() > 1e-10 {
        return Err(Error::Precondition(format!("zeta is not on the boundary (rho = {r:e})")));
    }
    let g = d.wirtinger_gradient(zeta);
    let gn = linalg::norm(&g);
    if gn == 0.0 {
        return Err(Error::DegenerateGeometry("vanishing gradient".into()));
    }
    let neg: Point = zeta.iter().map(|x| -x).collect();
    let trans = PolynomialAutomorphism::translation(&neg);
    let u = linalg::unitary_with_last_row(&g);
    let rot = PolynomialAutomorphism::linear(&u, MapKind::Unitary)?;
    let base = trans.then(&rot);
    // ρ in rotated coordinates s, centered at 0.
    let rho_s = base.push_forward(d.rho_poly());
    let p = rho_s.poly();

    // Holomorphic quadratic part in 's and the Levi form.
    let mut q = Poly::zero(n);
    let mut levi = vec![vec![C64::default(); n - 1]; n - 1];
    for (m, cf) in p.terms() {
        if m.degree() != 2 || m.z[n - 1] > 0 || m.zbar[n - 1] > 0 {
            continue;
        }
        if m.is_holomorphic() {
            q.add_term(m.clone(), *cf);
        } else if m.zbar.iter().sum::<u32>() == 1 && m.z.iter().sum::<u32>() == 1 {
            let i = m.z.iter().position(|&e| e == 1).unwrap();
            let j = m.zbar.iter().position(|&e| e == 1).unwrap();
            levi[i][j] = *cf;
        }
    }
    // The holomorphic quadratic part q enters ρ as 2 Re q, so v_n = s_n + q/|g| absorbs it.
    let shear = PolynomialAutomorphism::shear_last(n, c(1.0, 0.0), &q.scale(c(1.0 / gn, 0.0)))?;
    // H('s) = Σ m_ij s_i s̄_j = s* conj(M) s; with conj(M) = L L*, 'y = L* 's.
    let mbar: Vec<Vec<C64>> = levi.iter().map(|row| row.iter().map(|x| x.conj()).collect()).collect();
    let l = cholesky(&mbar).ok_or_else(|| Error::NotStronglyPseudoconvex(format!("Levi form at {zeta:?} is not positive definite")))?;
    let mut b = vec![vec![C64::default(); n]; n];
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            b[i][j] = l[j][i].conj();
        }
    }
    b[n - 1][n - 1] = c(gn, 0.0);
    let lin = PolynomialAutomorphism::linear(&b, MapKind::Triangular)?;
    let h = base.then(&shear).then(&lin);
    let rho_z = h.push_forward(d.rho_poly());
    check_normal_form(&rho_z, d.rho_scale())?;
    Ok((h, rho_z))
}

/// Structural identities of the normal form up to degree 2.
pub fn check_normal_form(rho: &RealPoly, scale: f64) -> Result<()> {
    let n = rho.n();
    let tol = 1e-9 * scale.max(1.0);
    let mut bad = Vec::new();
    for (m, cf) in rho.poly().terms() {
        let deg = m.degree();
        if deg > 2 {
            continue;
        }
        let want = if deg == 1 && (m.z[n - 1] == 1 || m.zbar[n - 1] == 1) {
            c(1.0, 0.0)
        } else if deg == 2 && m.z[n - 1] == 0 && m.zbar[n - 1] == 0 {
            let diag = (0..n - 1).any(|i| m.z[i] == 1 && m.zbar[i] == 1);
            if diag {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        } else if deg == 2 {
            continue;
        } else {
            c(0.0, 0.0)
        };
        if (cf - want).norm() > tol {
            bad.push(format!("{:?}/{:?}: {cf}", m.z, m.zbar));
        }
    }
    // Terms that must be present.
    let mut lin = Monomial::one(n);
    lin.z[n - 1] = 1;
    if (rho.poly().coeff(&lin) - c(1.0, 0.0)).norm() > tol {
        bad.push("missing 2 Re z_n".into());
    }
    for i in 0..n - 1 {
        let mut m = Monomial::one(n);
        m.z[i] = 1;
        m.zbar[i] = 1;
        if (rho.poly().coeff(&m) - c(1.0, 0.0)).norm() > tol {
            bad.push(format!("H('z, 0) coefficient at {i}"));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Assertion(format!("normal form violated: {}", bad.join("; "))))
    }
}

/// One entry of the strongly pseudoconvex pipeline: `T^k ∘ h^k` and `D^k`.
pub fn spsc_scaled_domain(d: &Domain, p: &[C64]) -> Result<ScalingEntry> {
    let n = d.n();
    let feet = d.boundary_feet(p)?;
    let foot = &feet[0];
    if foot.distance >= 0.1 {
        return Err(Error::Precondition(format!("point is not near the boundary (d = {})", foot.distance)));
    }
    if let Some(other) = feet.get(1) {
        if (other.distance - foot.distance).abs() <= 1e-9 * foot.distance {
            return Err(Error::Ambiguity(format!("two closest boundary points at distance {}", foot.distance)));
        }
    }
    let (h, _) = spsc_normalization(d, &foot.foot)?;
    let hp = h.eval(p);
    let delta = -hp[n - 1].re;
    if delta <= 0.0 {
        return Err(Error::DegenerateGeometry("normalized point is not on the inner normal".into()));
    }
    // Rounding in the foot leaves a tangential residual in h(p), which the dilation
    // amplifies by up to 1/δ; a translation of that size removes it.
    let mut residual: Point = hp[..n - 1].to_vec();
    residual.push(c(0.0, hp[n - 1].im));
    if linalg::norm(&residual) > 1e-6 * delta {
        return Err(Error::DegenerateGeometry(format!("closest point too inaccurate (residual {:e})", linalg::norm(&residual))));
    }
    let neg: Point = residual.iter().map(|x| -x).collect();
    let mut s = vec![c(1.0 / delta.sqrt(), 0.0); n];
    s[n - 1] = c(1.0 / delta, 0.0);
    let map = h.then(&PolynomialAutomorphism::translation(&neg)).then(&PolynomialAutomorphism::dilation(&s)?);
    let image = map.eval(p);
    let mut target = linalg::zeros(n);
    target[n - 1] = c(-1.0, 0.0);
    let domain = image_domain(d, &map, delta, &format!("{}^k", d.name), &image)?;
    Ok(ScalingEntry {
        pipeline: Pipeline::StronglyPseudoconvex,
        point: p.to_vec(),
        center: foot.foot.clone(),
        scales: vec![delta],
        boundary_distance: foot.distance,
        map,
        image,
        target,
        domain,
        expansion: None,
        d_coeffs: vec![],
        frame: None,
        envelope: None,
    })
}

/// The limit model `{2 Re z_n + |'z|² < 0}`.
pub fn siegel_model(n: usize) -> Result<Domain> {
    preset_domain(&format!("siegel:{n}"))
}

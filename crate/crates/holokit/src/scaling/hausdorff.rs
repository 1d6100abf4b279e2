//! Hausdorff distance between closed sublevel sets inside a ball window.
//!
//! Candidates are grid points of each set plus projections of its near-boundary
//! grid points onto the boundary; distances to the other set use a Newton
//! projection onto its boundary, falling back to the nearest grid point.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::domain::{first_crossing, Domain};
use crate::error::{Error, Result};
use crate::linalg::{self, Point};

#[derive(Clone, Debug, Serialize)]
pub struct HausdorffResult {
    pub value: f64,
    /// Spacing of the sampling grid along each real axis.
    pub pitch: f64,
    pub points_a: usize,
    pub points_b: usize,
    /// Boundary projections used as extra candidates.
    pub boundary_a: usize,
    pub boundary_b: usize,
    pub flags: Vec<String>,
}

struct Side<'a> {
    d: &'a Domain,
    grid: Vec<Point>,
    boundary: Vec<Point>,
}

fn in_window(z: &[C64], center: &[C64], radius: f64) -> bool {
    linalg::dist(z, center) <= radius * (1.0 + 1e-12)
}

fn side<'a>(d: &'a Domain, center: &[C64], radius: f64, m: usize) -> Side<'a> {
    let n = center.len();
    let dim = 2 * n;
    let h = 2.0 * radius / (m - 1) as f64;
    let c0 = linalg::to_real(center);
    let total = m.pow(dim as u32);
    let coord = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        (0..dim)
            .map(|k| {
                let v = c0[k] - radius + h * (rem % m) as f64;
                rem /= m;
                v
            })
            .collect()
    };
    let inside = |x: &[f64]| -> bool {
        let z = linalg::from_real(x);
        in_window(&z, center, radius) && d.rho(&z) <= 0.0
    };
    let mut grid = Vec::new();
    let mut boundary = Vec::new();
    for idx in 0..total {
        let x = coord(idx);
        if !inside(&x) {
            continue;
        }
        let z = linalg::from_real(&x);
        let mut edge = false;
        for k in 0..dim {
            for s in [-h, h] {
                let mut y = x.clone();
                y[k] += s;
                let w = linalg::from_real(&y);
                if in_window(&w, center, radius) && d.rho(&w) > 0.0 {
                    edge = true;
                }
            }
        }
        if edge {
            let g = d.real_gradient(&z);
            if linalg::norm(&g) > 0.0 {
                let u = linalg::normalized(&g);
                let f = |t: f64| d.rho(&linalg::axpy(&z, t, &u));
                if let Some(t) = first_crossing(&f, 2.0 * h) {
                    let seed = linalg::axpy(&z, t, &u);
                    if let Some(p) = d.project_to_boundary(&z, &seed) {
                        if in_window(&p, center, radius) && linalg::dist(&p, &z) <= 2.0 * h {
                            boundary.push(p);
                        }
                    }
                }
            }
        }
        grid.push(z);
    }
    Side { d, grid, boundary }
}

/// Distance from `a` to `{ρ_B ≤ 0} ∩ window`.
fn distance_to(a: &[C64], b: &Side, center: &[C64], radius: f64) -> f64 {
    if b.d.rho(a) <= 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let g = b.d.real_gradient(a);
    if linalg::norm(&g) > 0.0 {
        let u = linalg::scale_re(&linalg::normalized(&g), -1.0);
        let f = |t: f64| -b.d.rho(&linalg::axpy(a, t, &u));
        if let Some(t) = first_crossing(&f, 2.0 * radius) {
            let seed = linalg::axpy(a, t, &u);
            if let Some(p) = b.d.project_to_boundary(a, &seed) {
                if in_window(&p, center, radius) {
                    best = linalg::dist(a, &p);
                }
            }
            if in_window(&seed, center, radius) {
                best = best.min(t);
            }
        }
    }
    if best.is_infinite() {
        for z in b.grid.iter().chain(&b.boundary) {
            best = best.min(linalg::dist(a, z));
        }
    }
    best
}

fn directed(a: &Side, b: &Side, center: &[C64], radius: f64) -> f64 {
    a.grid
        .iter()
        .chain(&a.boundary)
        .map(|z| distance_to(z, b, center, radius))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance of `{ρ_A ≤ 0}` and `{ρ_B ≤ 0}` inside the ball
/// `B(center, radius)`, on a grid with `m` points per real axis.
pub fn local_hausdorff(a: &Domain, b: &Domain, center: &[C64], radius: f64, m: usize) -> Result<HausdorffResult> {
    if a.n() != b.n() || center.len() != a.n() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    if radius.is_nan() || radius <= 0.0 || radius > a.bounding_radius.min(b.bounding_radius) {
        return Err(Error::Precondition(format!("window radius {radius} must be positive and at most the bounding radius")));
    }
    if m < 3 {
        return Err(Error::InvalidArgument("need at least 3 grid points per axis".into()));
    }
    let pitch = 2.0 * radius / (m - 1) as f64;
    let sa = side(a, center, radius, m);
    let sb = side(b, center, radius, m);
    let mut flags = Vec::new();
    let value = match (sa.grid.is_empty(), sb.grid.is_empty()) {
        (true, true) => {
            flags.push("both sets empty in the window".to_string());
            0.0
        }
        (true, false) | (false, true) => {
            flags.push("one set empty in the window".to_string());
            f64::INFINITY
        }
        _ => directed(&sa, &sb, center, radius).max(directed(&sb, &sa, center, radius)),
    };
    Ok(HausdorffResult { value, pitch, points_a: sa.grid.len(), points_b: sb.grid.len(), boundary_a: sa.boundary.len(), boundary_b: sb.boundary.len(), flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{preset_domain, DomainClass};
    use crate::linalg::c;
    use crate::poly::{Poly, RealPoly};

    fn slab(x0: f64, w: f64) -> Domain {
        // (Re z - x0)^2 < w^2 in C^1.
        let x = Poly::z(1, 0).add(&Poly::zbar(1, 0)).scale(c(0.5, 0.0)).sub(&Poly::constant(1, c(x0, 0.0)));
        let p = x.mul(&x).sub(&Poly::constant(1, c(w * w, 0.0)));
        Domain::new("slab", RealPoly::from_poly_projected(&p), DomainClass::Generic, None, 10.0, vec![c(x0, 0.0)]).unwrap()
    }

    #[test]
    fn identical_sets() {
        let b = preset_domain("ball:2").unwrap();
        let r = local_hausdorff(&b, &b, &linalg::zeros(2), 1.0, 9).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn disjoint_slabs() {
        let a = slab(-0.5, 0.05);
        let b = slab(0.5, 0.05);
        let r = local_hausdorff(&a, &b, &[c(0.0, 0.0)], 2.0, 41).unwrap();
        assert!((r.value - 1.0).abs() <= r.pitch, "{}", r.value);
    }
}

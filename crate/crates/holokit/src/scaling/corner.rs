//! Rational scaling maps at generic corners of analytic polyhedra.
//!
//! `Λ^k = φ^{-1} ∘ A^k ∘ φ ∘ F` with `F = (e^{iθ_l} f^l)`, the Cayley map
//! `φ(z) = i(1 - z)/(1 + z)` onto the upper half-plane in each variable, and
//! the affine normalization `A^k(w) = (w - τ)/λ`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::domain::PolyhedronSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};

#[derive(Clone, Debug, Serialize)]
pub struct CornerMap {
    #[serde(skip)]
    pub spec: PolyhedronSpec,
    pub zk: Point,
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
}

fn cayley(z: C64) -> Option<C64> {
    let den = c(1.0, 0.0) + z;
    if den.norm() < 1e-300 {
        return None;
    }
    Some(C64::i() * (c(1.0, 0.0) - z) / den)
}

fn cayley_inv(w: C64) -> Option<C64> {
    let den = C64::i() + w;
    if den.norm() < 1e-300 {
        return None;
    }
    Some((C64::i() - w) / den)
}

/// Exhaustion check result: grid points pulled back through `(Λ^k)^{-1}`.
#[derive(Clone, Debug, Serialize)]
pub struct ExhaustionCheck {
    pub radius: f64,
    pub points: usize,
    /// Points whose preimage was not found or violates some `|f^i| < 1`.
    pub failures: usize,
}

impl CornerMap {
    pub fn n(&self) -> usize {
        self.zk.len()
    }

    /// `F(z) = (e^{iθ_l} f^l(z))`.
    pub fn rotated(&self, z: &[C64]) -> Point {
        self.spec.generators.eval(z).iter().zip(&self.theta).map(|(f, t)| f * C64::from_polar(1.0, *t)).collect()
    }

    /// `φ ∘ F`.
    pub fn half_plane(&self, z: &[C64]) -> Result<Point> {
        self.rotated(z)
            .into_iter()
            .map(|f| cayley(f).ok_or_else(|| Error::DegenerateGeometry("1 + F_l(z) = 0".into())))
            .collect()
    }

    pub fn eval(&self, z: &[C64]) -> Result<Point> {
        let w = self.half_plane(z)?;
        w.iter()
            .enumerate()
            .map(|(l, wl)| {
                let a = (wl - c(self.tau[l], 0.0)) / self.lambda[l];
                cayley_inv(a).ok_or_else(|| Error::DegenerateGeometry("A^k(w) = -i".into()))
            })
            .collect()
    }

    /// `(Λ^k)^{-1}(u)`, solving `F(z) = x` by Newton from `z^k`.
    pub fn eval_inverse(&self, u: &[C64]) -> Option<Point> {
        let mut x = Vec::with_capacity(u.len());
        for (l, ul) in u.iter().enumerate() {
            let a = cayley(*ul)?;
            let w = a * self.lambda[l] + self.tau[l];
            let f = cayley_inv(w)?;
            x.push(f * C64::from_polar(1.0, -self.theta[l]));
        }
        // Now solve f(z) = x.
        let mut z = self.zk.clone();
        for _ in 0..100 {
            let r = linalg::sub(&self.spec.generators.eval(&z), &x);
            let scale = 1.0 + linalg::norm(&x);
            if linalg::norm(&r) <= 1e-14 * scale {
                return Some(z);
            }
            let j = self.spec.generators.jacobian(&z);
            let ji = linalg::inverse(&j)?;
            let step = linalg::matvec(&ji, &r);
            let sn = linalg::norm(&step);
            let cap = 0.5 * (1.0 + linalg::norm(&z));
            let step = if sn > cap { linalg::scale_re(&step, cap / sn) } else { step };
            z = linalg::sub(&z, &step);
        }
        let r = linalg::sub(&self.spec.generators.eval(&z), &x);
        (linalg::norm(&r) <= 1e-11 * (1.0 + linalg::norm(&x))).then_some(z)
    }

    /// Pulls back a product grid of the closed polydisc of radius `r` and checks
    /// that every preimage lies in the polyhedron.
    pub fn check_exhaustion(&self, r: f64) -> ExhaustionCheck {
        let n = self.n();
        let mut disc: Vec<C64> = vec![c(0.0, 0.0)];
        let rings = [r / 3.0, 2.0 * r / 3.0, r];
        let per = if n <= 2 { 10 } else { 4 };
        for rad in rings {
            for k in 0..per {
                disc.push(C64::from_polar(rad, 2.0 * std::f64::consts::PI * k as f64 / per as f64));
            }
        }
        let total = disc.len().pow(n as u32);
        let mut failures = 0;
        for idx in 0..total {
            let mut rem = idx;
            let u: Point = (0..n)
                .map(|_| {
                    let v = disc[rem % disc.len()];
                    rem /= disc.len();
                    v
                })
                .collect();
            let ok = match self.eval_inverse(&u) {
                Some(z) => self.spec.generators.eval(&z).iter().all(|f| f.norm() < 1.0),
                None => false,
            };
            if !ok {
                failures += 1;
            }
        }
        ExhaustionCheck { radius: r, points: total, failures }
    }
}

/// `Λ^k` for the corner `z^0` of `P` and an interior point `z^k` near it.
pub fn polyhedron_corner_maps(p: &PolyhedronSpec, zk: &[C64]) -> Result<CornerMap> {
    let n = p.reference.len();
    if zk.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let theta: Vec<f64> = p.generators.eval(&p.reference).iter().map(|f| -f.arg()).collect();
    let mut m = CornerMap { spec: p.clone(), zk: zk.to_vec(), theta, tau: vec![0.0; n], lambda: vec![1.0; n] };
    let w = m.half_plane(zk)?;
    for (l, wl) in w.iter().enumerate() {
        if wl.im <= 0.0 {
            return Err(Error::Precondition(format!("z^k is outside the local piece (lambda_{} = {})", l + 1, wl.im)));
        }
        m.tau[l] = wl.re;
        m.lambda[l] = wl.im;
    }
    let at = m.eval(zk)?;
    if linalg::norm(&at) > 1e-10 {
        return Err(Error::Assertion(format!("Λ^k(z^k) = {at:?}")));
    }
    Ok(m)
}

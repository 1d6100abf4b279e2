//! Polynomial automorphisms of `C^n` kept as chains of simple stages.
//!
//! Evaluating stage by stage avoids the cancellation an expanded composite
//! suffers after strong dilations; expanded maps are still available.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};
use crate::poly::{Poly, PolyMap, RealPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MapKind {
    Translation,
    Unitary,
    Triangular,
    Dilation,
    Cayley,
    Composite,
}

#[derive(Clone, Debug)]
struct Stage {
    forward: PolyMap,
    inverse: PolyMap,
    kind: MapKind,
    /// Diagonal factors for dilation stages, used for exact pullbacks.
    diag: Option<Vec<C64>>,
}

#[derive(Clone, Debug)]
pub struct PolynomialAutomorphism {
    stages: Vec<Stage>,
}

/// Max of `|g(f(z)) - z| / (1 + |z|)` over seeded points in the ball of radius `r`.
fn roundtrip_error(f: &dyn Fn(&[C64]) -> Point, g: &dyn Fn(&[C64]) -> Point, n: usize, r: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z: Point = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (r / (2f64).sqrt())).collect();
        let back = g(&f(&z));
        let e = linalg::dist(&back, &z) / (1.0 + linalg::norm(&z));
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    worst
}

impl PolynomialAutomorphism {
    /// Single stage; the inverse is checked on 100 points to `1e-10`.
    pub fn new(forward: PolyMap, inverse: PolyMap, kind: MapKind) -> Result<Self> {
        let n = forward.dim_out();
        if forward.dim_in() != n || inverse.dim_in() != n || inverse.dim_out() != n {
            return Err(Error::InvalidArgument("automorphism must map C^n to C^n".into()));
        }
        let m = PolynomialAutomorphism { stages: vec![Stage { forward, inverse, kind, diag: None }] };
        m.verify(1.0)?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let id = PolyMap::identity(n);
        PolynomialAutomorphism { stages: vec![Stage { forward: id.clone(), inverse: id, kind: MapKind::Translation, diag: None }] }
    }

    /// `z ↦ z + b`.
    pub fn translation(b: &[C64]) -> Self {
        let n = b.len();
        let eye: Vec<Vec<C64>> = (0..n).map(|i| linalg::unit(n, i)).collect();
        let minus: Point = b.iter().map(|x| -x).collect();
        PolynomialAutomorphism {
            stages: vec![Stage {
                forward: PolyMap::affine(&eye, b),
                inverse: PolyMap::affine(&eye, &minus),
                kind: MapKind::Translation,
                diag: None,
            }],
        }
    }

    /// `z ↦ A z`.
    pub fn linear(a: &[Vec<C64>], kind: MapKind) -> Result<Self> {
        let n = a.len();
        let inv = linalg::inverse(a).ok_or_else(|| Error::DegenerateGeometry("singular linear map".into()))?;
        let zero = linalg::zeros(n);
        let m = PolynomialAutomorphism {
            stages: vec![Stage { forward: PolyMap::affine(a, &zero), inverse: PolyMap::affine(&inv, &zero), kind, diag: None }],
        };
        m.verify(1.0)?;
        Ok(m)
    }

    /// `z ↦ (s_1 z_1, ..., s_n z_n)`.
    pub fn dilation(s: &[C64]) -> Result<Self> {
        if s.iter().any(|x| x.norm() == 0.0 || !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::DegenerateGeometry("zero dilation factor".into()));
        }
        let n = s.len();
        let diag = |v: &dyn Fn(C64) -> C64| -> Vec<Vec<C64>> {
            (0..n).map(|i| linalg::scale(&linalg::unit(n, i), v(s[i]))).collect()
        };
        let zero = linalg::zeros(n);
        Ok(PolynomialAutomorphism {
            stages: vec![Stage {
                forward: PolyMap::affine(&diag(&|x| x), &zero),
                inverse: PolyMap::affine(&diag(&|x| c(1.0, 0.0) / x), &zero),
                kind: MapKind::Dilation,
                diag: Some(s.to_vec()),
            }],
        })
    }

    pub fn n(&self) -> usize {
        self.stages[0].forward.dim_out()
    }

    pub fn kind(&self) -> MapKind {
        if self.stages.len() == 1 {
            self.stages[0].kind
        } else {
            MapKind::Composite
        }
    }

    pub fn stage_kinds(&self) -> Vec<MapKind> {
        self.stages.iter().map(|s| s.kind).collect()
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &PolynomialAutomorphism) -> PolynomialAutomorphism {
        let mut stages = self.stages.clone();
        stages.extend(outer.stages.iter().cloned());
        PolynomialAutomorphism { stages }
    }

    pub fn eval(&self, z: &[C64]) -> Point {
        self.stages.iter().fold(z.to_vec(), |w, s| s.forward.eval(&w))
    }

    pub fn eval_inverse(&self, w: &[C64]) -> Point {
        self.stages.iter().rev().fold(w.to_vec(), |z, s| s.inverse.eval(&z))
    }

    /// Expanded forward map.
    pub fn forward_map(&self) -> PolyMap {
        let mut m = self.stages[0].forward.clone();
        for s in &self.stages[1..] {
            m = s.forward.compose(&m);
        }
        m
    }

    /// Expanded inverse map.
    pub fn inverse_map(&self) -> PolyMap {
        let k = self.stages.len();
        let mut m = self.stages[k - 1].inverse.clone();
        for s in self.stages[..k - 1].iter().rev() {
            m = s.inverse.compose(&m);
        }
        m
    }

    /// Per-stage forward maps.
    pub fn stage_maps(&self) -> Vec<(MapKind, &PolyMap)> {
        self.stages.iter().map(|s| (s.kind, &s.forward)).collect()
    }

    /// Defining function of the image: `ρ ∘ Φ^{-1}`, pulled back one stage at a time.
    pub fn push_forward(&self, rho: &RealPoly) -> RealPoly {
        let mut r = rho.clone();
        for s in &self.stages {
            r = match &s.diag {
                Some(d) => r.dilate(&d.iter().map(|x| c(1.0, 0.0) / x).collect::<Vec<_>>()),
                None => r.compose(&s.inverse),
            };
        }
        r
    }

    /// Round-trip check of the whole chain on points of norm up to `radius`.
    pub fn verify(&self, radius: f64) -> Result<f64> {
        let n = self.n();
        let e1 = roundtrip_error(&|z| self.eval(z), &|w| self.eval_inverse(w), n, radius, 7);
        let e2 = roundtrip_error(&|w| self.eval_inverse(w), &|z| self.eval(z), n, radius, 8);
        let e = e1.max(e2);
        if e > 1e-10 {
            return Err(Error::Assertion(format!("automorphism inverse check failed: {e:e}")));
        }
        Ok(e)
    }

    /// Triangular stage `(z_1, ..., z_n) ↦ ('z, a z_n + q('z))`.
    pub fn shear_last(n: usize, a: C64, q: &Poly) -> Result<Self> {
        if a.norm() == 0.0 || q.terms().any(|(m, _)| m.z[n - 1] > 0 || !m.is_holomorphic()) {
            return Err(Error::InvalidArgument("shear must be holomorphic in 'z only".into()));
        }
        let mut fwd: Vec<Poly> = (0..n - 1).map(|i| Poly::z(n, i)).collect();
        fwd.push(Poly::z(n, n - 1).scale(a).add(q));
        let mut inv: Vec<Poly> = (0..n - 1).map(|i| Poly::z(n, i)).collect();
        let ia = c(1.0, 0.0) / a;
        inv.push(Poly::z(n, n - 1).sub(q).scale(ia));
        PolynomialAutomorphism::new(PolyMap::new(fwd), PolyMap::new(inv), MapKind::Triangular)
    }
}

//! Boundary rescaling: normalizing automorphisms, anisotropic dilations and
//! the scaled domains they produce.

pub mod automorphism;
pub mod catlin;
pub mod convex;
pub mod corner;
pub mod hausdorff;
pub mod pinchuk;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use automorphism::{MapKind, PolynomialAutomorphism};
pub use catlin::{catlin_automorphism, catlin_chart, catlin_scaled_domain, catlin_tau, limit_polynomial, CatlinChart, HomogeneousExpansion};
pub use convex::{convex_scaled_domain, mcneal_frame, Envelope, McNealFrame};
pub use corner::{polyhedron_corner_maps, CornerMap};
pub use hausdorff::{local_hausdorff, HausdorffResult};
pub use pinchuk::{siegel_model, spsc_normalization, spsc_scaled_domain};

use crate::domain::{random_unit, Domain};
use crate::error::Result;
use crate::linalg::{self, Point};
use crate::poly::{Poly, RealPoly};
use crate::report::num17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Pipeline {
    StronglyPseudoconvex,
    FiniteType2D,
    Convex,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::StronglyPseudoconvex => "spsc",
            Pipeline::FiniteType2D => "catlin",
            Pipeline::Convex => "convex",
        }
    }
}

/// One term `D^j` of a scaling sequence.
#[derive(Clone, Debug)]
pub struct ScalingEntry {
    pub pipeline: Pipeline,
    /// `p^j` in the original coordinates.
    pub point: Point,
    /// `ζ^j` or `q^j`, in the coordinates the pipeline normalizes in.
    pub center: Point,
    /// `[δ]`, `[ε, τ]` or `[ε, τ_1, ..., τ_n]`.
    pub scales: Vec<f64>,
    pub boundary_distance: f64,
    /// Composite normalizing and dilating map.
    pub map: PolynomialAutomorphism,
    pub image: Point,
    /// Center the pipeline promises for `image`.
    pub target: Point,
    pub domain: Domain,
    pub expansion: Option<HomogeneousExpansion>,
    /// `d^0, ..., d^{2m}` for the finite-type pipeline.
    pub d_coeffs: Vec<C64>,
    pub frame: Option<McNealFrame>,
    pub envelope: Option<Envelope>,
}

impl ScalingEntry {
    /// `|image - target|`.
    pub fn center_error(&self) -> f64 {
        linalg::dist(&self.image, &self.target)
    }

    /// `ε^{-1} τ^{2m}` for finite-type entries.
    pub fn tau_ratio(&self) -> Option<f64> {
        let e = self.expansion.as_ref()?;
        Some(self.scales[1].powi(e.two_m as i32) / self.scales[0])
    }

    pub fn to_json(&self) -> Value {
        let pts = |p: &[C64]| -> Value { Value::Array(p.iter().map(|z| json!([num17(z.re), num17(z.im)])).collect()) };
        let stages: Vec<Value> = self
            .map
            .stage_maps()
            .into_iter()
            .map(|(kind, m)| json!({"kind": kind, "components": m.comps.iter().map(poly_json).collect::<Vec<_>>()}))
            .collect();
        let mut v = json!({
            "pipeline": self.pipeline.name(),
            "point": pts(&self.point),
            "center": pts(&self.center),
            "scales": self.scales.iter().map(|x| num17(*x)).collect::<Vec<_>>(),
            "boundary_distance": num17(self.boundary_distance),
            "image": pts(&self.image),
            "target": pts(&self.target),
            "map": stages,
            "rho": pieces_json(&self.domain),
        });
        if !self.d_coeffs.is_empty() {
            v["d"] = pts(&self.d_coeffs);
        }
        if let Some(r) = self.tau_ratio() {
            v["tau_ratio"] = num17(r);
        }
        if let Some(f) = &self.frame {
            v["extremal_points"] = Value::Array(f.extremal.iter().map(|p| pts(p)).collect());
        }
        v
    }
}

/// Term list of a complex polynomial.
pub fn poly_json(p: &Poly) -> Value {
    Value::Array(
        p.terms()
            .map(|(m, cf)| json!({"re": num17(cf.re), "im": num17(cf.im), "z": m.z, "zbar": m.zbar}))
            .collect(),
    )
}

fn pieces_json(d: &Domain) -> Value {
    Value::Array(d.pieces().map(crate::domain::terms_json).collect())
}

/// Sequence `D^j` with an optional limit model.
#[derive(Clone, Debug)]
pub struct ScalingRun {
    pub pipeline: Pipeline,
    pub base: Domain,
    /// Boundary point the sequence accumulates at.
    pub p0: Point,
    pub entries: Vec<ScalingEntry>,
    pub model: Option<Domain>,
}

impl ScalingRun {
    /// Builds the entries in parallel; order follows `points`.
    pub fn build<F>(pipeline: Pipeline, base: &Domain, p0: &[C64], points: &[Point], f: F) -> Result<ScalingRun>
    where
        F: Fn(&Point) -> Result<ScalingEntry> + Sync,
    {
        let entries = points.par_iter().map(&f).collect::<Vec<_>>().into_iter().collect::<Result<Vec<_>>>()?;
        Ok(ScalingRun { pipeline, base: base.clone(), p0: p0.to_vec(), entries, model: None })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pipeline": self.pipeline.name(),
            "domain": self.base.name,
            "p0": self.p0.iter().map(|z| json!([num17(z.re), num17(z.im)])).collect::<Vec<_>>(),
            "entries": self.entries.iter().map(ScalingEntry::to_json).collect::<Vec<_>>(),
            "model": self.model.as_ref().map(pieces_json),
        })
    }
}

/// Points `p0 + d_j u` for the given distances.
pub fn normal_sequence(p0: &[C64], inward: &[C64], distances: &[f64]) -> Vec<Point> {
    let u = linalg::normalized(inward);
    distances.iter().map(|&d| linalg::axpy(p0, d, &u)).collect()
}

/// `Φ(D)` with the main piece divided by `scale`; the bounding radius comes
/// from the images of sampled boundary points.
pub(crate) fn image_domain(d: &Domain, map: &PolynomialAutomorphism, scale: f64, name: &str, base: &[C64]) -> Result<Domain> {
    let pieces: Vec<RealPoly> = d
        .pieces()
        .enumerate()
        .map(|(k, p)| {
            let q = map.push_forward(p);
            if k == 0 {
                q.scale(1.0 / scale)
            } else {
                q
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
    let tmax = 2.0 * d.bounding_radius + linalg::norm(&d.base_point);
    let mut r = linalg::norm(base);
    for _ in 0..256 {
        let u = random_unit(&mut rng, d.n());
        if let Some(t) = d.ray_exit(&d.base_point, &u, tmax) {
            r = r.max(linalg::norm(&map.eval(&linalg::axpy(&d.base_point, t, &u))));
        }
    }
    Domain::with_pieces(name, pieces, d.class, d.declared_type, 1.1 * r, base.to_vec())
}

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{BoundKind, MetricEstimate, Witness};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};

/// Homogeneous models with explicit metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    Disc,
    Polydisc,
    Ball,
    /// `{Re z < 0}` in `C`.
    Halfplane,
    /// `{2 Re z_n + |'z|^2 < 0}`.
    Siegel,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "disc" => ModelKind::Disc,
            "polydisc" => ModelKind::Polydisc,
            "ball" => ModelKind::Ball,
            "halfplane" => ModelKind::Halfplane,
            "siegel" => ModelKind::Siegel,
            _ => return None,
        })
    }
}

/// `tanh⁻¹ x` given `x ∈ [0, 1)` and `1 - x²` computed without cancellation.
fn atanh_stable(x: f64, one_minus_x2: f64) -> f64 {
    if x < 0.5 {
        return x.atanh();
    }
    // 1 - x = (1 - x²)/(1 + x)
    let one_minus_x = one_minus_x2 / (1.0 + x);
    0.5 * ((1.0 + x) / one_minus_x).ln()
}

/// `Φ(z) = (√2 'z/(1 - z_n), (1 + z_n)/(1 - z_n))`, Siegel domain to ball.
pub fn cayley_to_ball(z: &[C64]) -> Point {
    let n = z.len();
    let one = c(1.0, 0.0);
    let den = one - z[n - 1];
    let mut w: Point = z[..n - 1].iter().map(|x| x * std::f64::consts::SQRT_2 / den).collect();
    w.push((one + z[n - 1]) / den);
    w
}

/// Inverse Cayley map, ball to Siegel domain.
pub fn cayley_from_ball(w: &[C64]) -> Point {
    let n = w.len();
    let one = c(1.0, 0.0);
    let den = w[n - 1] + one;
    let mut z: Point = w[..n - 1].iter().map(|x| x * std::f64::consts::SQRT_2 / den).collect();
    z.push((w[n - 1] - one) / den);
    z
}

fn cayley_differential(z: &[C64], v: &[C64]) -> Point {
    let n = z.len();
    let one = c(1.0, 0.0);
    let den = one - z[n - 1];
    let s2 = std::f64::consts::SQRT_2;
    let mut out: Point = (0..n - 1).map(|i| v[i] * s2 / den + z[i] * s2 * v[n - 1] / (den * den)).collect();
    out.push(v[n - 1] * 2.0 / (den * den));
    out
}

fn siegel_defect(z: &[C64]) -> f64 {
    let n = z.len();
    -(2.0 * z[n - 1].re + z[..n - 1].iter().map(|x| x.norm_sqr()).sum::<f64>())
}

fn check_inside(kind: ModelKind, z: &[C64]) -> Result<()> {
    let ok = match kind {
        ModelKind::Disc => z.len() == 1 && z[0].norm() < 1.0,
        ModelKind::Polydisc => z.iter().all(|x| x.norm() < 1.0),
        ModelKind::Ball => linalg::norm(z) < 1.0,
        ModelKind::Halfplane => z.len() == 1 && z[0].re < 0.0,
        ModelKind::Siegel => !z.is_empty() && siegel_defect(z) > 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::OutsideDomain(format!("{kind:?} at {z:?}")))
    }
}

fn ball_metric(z: &[C64], v: &[C64]) -> f64 {
    let s = 1.0 - z.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let zv = linalg::hdot(v, z).norm_sqr();
    (linalg::norm(v).powi(2) / s + zv / (s * s)).sqrt()
}

/// Exact infinitesimal Kobayashi (= Carathéodory) metric of a homogeneous model.
pub fn closed_form_inf_metric(kind: ModelKind, z: &[C64], v: &[C64]) -> Result<MetricEstimate> {
    check_inside(kind, z)?;
    if v.len() != z.len() {
        return Err(Error::InvalidArgument("vector dimension mismatch".into()));
    }
    let value = match kind {
        ModelKind::Disc => v[0].norm() / (1.0 - z[0].norm_sqr()),
        ModelKind::Polydisc => z.iter().zip(v).map(|(a, b)| b.norm() / (1.0 - a.norm_sqr())).fold(0.0, f64::max),
        ModelKind::Ball => ball_metric(z, v),
        ModelKind::Halfplane => v[0].norm() / (2.0 * z[0].re.abs()),
        ModelKind::Siegel => ball_metric(&cayley_to_ball(z), &cayley_differential(z, v)),
    };
    Ok(MetricEstimate { value, bound: BoundKind::Exact, witness: Witness::ClosedForm(kind), config: None, flags: vec![] })
}

fn disc_distance(a: C64, b: C64) -> f64 {
    let num = (a - b).norm();
    let den = (c(1.0, 0.0) - a.conj() * b).norm();
    let x = num / den;
    let omx2 = (1.0 - a.norm_sqr()) * (1.0 - b.norm_sqr()) / (den * den);
    atanh_stable(x, omx2)
}

fn ball_distance(a: &[C64], b: &[C64]) -> f64 {
    let sa = 1.0 - a.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let sb = 1.0 - b.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let den = (c(1.0, 0.0) - linalg::hdot(a, b)).norm_sqr();
    let omx2 = (sa * sb / den).min(1.0);
    let x = (1.0 - omx2).max(0.0).sqrt();
    atanh_stable(x, omx2)
}

fn siegel_distance(a: &[C64], b: &[C64]) -> f64 {
    // 1 - |Φ(z)|² = -2ρ_Σ(z)/|1 - z_n|², and the ball identity for 1 - |φ_a(b)|².
    let n = a.len();
    let wa = cayley_to_ball(a);
    let wb = cayley_to_ball(b);
    let one = c(1.0, 0.0);
    let sa = 2.0 * siegel_defect(a) / (one - a[n - 1]).norm_sqr();
    let sb = 2.0 * siegel_defect(b) / (one - b[n - 1]).norm_sqr();
    let den = (one - linalg::hdot(&wa, &wb)).norm_sqr();
    let omx2 = (sa * sb / den).min(1.0);
    let x = (1.0 - omx2).max(0.0).sqrt();
    atanh_stable(x, omx2)
}

/// Exact Kobayashi distance of a homogeneous model, `tanh⁻¹` normalization.
pub fn closed_form_distance(kind: ModelKind, p: &[C64], q: &[C64]) -> Result<f64> {
    check_inside(kind, p)?;
    check_inside(kind, q)?;
    if p.len() != q.len() {
        return Err(Error::InvalidArgument("point dimension mismatch".into()));
    }
    Ok(match kind {
        ModelKind::Disc => disc_distance(p[0], q[0]),
        ModelKind::Polydisc => p.iter().zip(q).map(|(a, b)| disc_distance(*a, *b)).fold(0.0, f64::max),
        ModelKind::Ball => ball_distance(p, q),
        ModelKind::Halfplane => {
            let x = (p[0] - q[0]).norm() / (p[0] + q[0].conj()).norm();
            let omx2 = 4.0 * p[0].re * q[0].re / (p[0] + q[0].conj()).norm_sqr();
            atanh_stable(x, omx2)
        }
        ModelKind::Siegel => siegel_distance(p, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let m = |k, z: &[C64], v: &[C64]| closed_form_inf_metric(k, z, v).unwrap().value;
        assert_eq!(m(ModelKind::Disc, &[c(0.0, 0.0)], &[c(1.0, 0.0)]), 1.0);
        assert_eq!(m(ModelKind::Halfplane, &[c(-1.0, 0.0)], &[c(1.0, 0.0)]), 0.5);
        assert!((m(ModelKind::Disc, &[c(0.5, 0.0)], &[c(1.0, 0.0)]) - 4.0 / 3.0).abs() < 1e-15);
        assert!(closed_form_inf_metric(ModelKind::Ball, &[c(1.0, 0.0), c(0.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn distance_examples() {
        let d = closed_form_distance(ModelKind::Disc, &[c(0.0, 0.0)], &[c(0.5, 0.0)]).unwrap();
        assert!((d - 0.5 * 3f64.ln()).abs() < 1e-15);
        let d = closed_form_distance(ModelKind::Polydisc, &[c(0.0, 0.0), c(0.0, 0.0)], &[c(0.5, 0.0), c(0.3, 0.0)]).unwrap();
        assert!((d - 0.5 * 3f64.ln()).abs() < 1e-15);
        let p = [c(0.1, 0.2), c(-0.3, 0.1)];
        assert_eq!(closed_form_distance(ModelKind::Ball, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn cayley_roundtrip() {
        let z = [c(0.3, -0.2), c(-0.7, 0.4)];
        let w = cayley_to_ball(&z);
        let back = cayley_from_ball(&w);
        assert!(linalg::dist(&z, &back) < 1e-14);
        let w0 = cayley_to_ball(&[c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(linalg::norm(&w0) < 1e-15);
    }
}

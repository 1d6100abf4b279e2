//! Kobayashi distance upper bounds by minimizing the `F^K`-length of polylines.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::kobayashi::{kobayashi_inf_estimate_warm, DiscConfig};
use super::BoundKind;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg::{self, Point};
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug, Serialize)]
pub struct PathConfig {
    /// Interior control points.
    pub control_points: usize,
    /// Gauss-Legendre nodes per segment.
    pub nodes: usize,
    /// Budget of trial moves during the descent.
    pub budget: usize,
    /// Initial step, relative to `|p - q|`.
    pub step: f64,
    /// Metric settings during the search.
    pub search: DiscConfig,
    /// Metric settings for the reported value.
    pub report: DiscConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            control_points: 8,
            nodes: 4,
            budget: 160,
            step: 0.1,
            search: DiscConfig { iterations: 150, ..DiscConfig::cheap() },
            report: DiscConfig::path(),
        }
    }
}

impl PathConfig {
    /// Straight segment only, no optimization.
    pub fn straight() -> Self {
        PathConfig { budget: 0, ..PathConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub bound: BoundKind,
    pub path: Vec<Point>,
    /// `F^K(γ(t), γ'(t))` at the quadrature nodes of each segment.
    pub segment_samples: Vec<Vec<f64>>,
    pub segment_lengths: Vec<f64>,
}

/// `∫ F^K(a + t(b - a), b - a) dt` over `[0, 1]` by Gauss-Legendre, with node values.
pub fn segment_length(d: &Domain, a: &[C64], b: &[C64], nodes: usize, cfg: &DiscConfig) -> Result<(f64, Vec<f64>)> {
    let (x, w) = gauss_legendre(nodes.max(1));
    let v = linalg::sub(b, a);
    if linalg::norm(&v) == 0.0 {
        return Ok((0.0, vec![0.0; x.len()]));
    }
    let mut warm: Option<Vec<C64>> = None;
    let mut total = 0.0;
    let mut samples = Vec::with_capacity(x.len());
    for (xi, wi) in x.iter().zip(&w) {
        let t = 0.5 * (xi + 1.0);
        let z = linalg::axpy(a, t, &v);
        let (e, shape) = kobayashi_inf_estimate_warm(d, &z, &v, cfg, warm.as_deref())?;
        if !shape.is_empty() {
            warm = Some(shape);
        }
        samples.push(e.value);
        total += 0.5 * wi * e.value;
    }
    Ok((total, samples))
}

fn segment_inside(d: &Domain, a: &[C64], b: &[C64]) -> bool {
    let u = linalg::sub(b, a);
    d.contains(a) && d.contains(b) && d.ray_exit(a, &u, 1.0).is_none()
}

/// Upper bound for `d_D(p, q)` from an optimized polyline.
pub fn kobayashi_distance_estimate(d: &Domain, p: &[C64], q: &[C64], cfg: &PathConfig) -> Result<DistanceEstimate> {
    for z in [p, q] {
        if z.len() != d.n() {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        if !d.contains(z) {
            return Err(Error::OutsideDomain(format!("{z:?}")));
        }
    }
    let span = linalg::dist(p, q);
    if span == 0.0 {
        return Ok(DistanceEstimate {
            value: 0.0,
            bound: BoundKind::Exact,
            path: vec![p.to_vec(), q.to_vec()],
            segment_samples: vec![],
            segment_lengths: vec![0.0],
        });
    }
    let k = cfg.control_points;
    let mut path: Vec<Point> = (0..k + 2)
        .map(|i| {
            let t = i as f64 / (k + 1) as f64;
            linalg::axpy(p, t, &linalg::sub(q, p))
        })
        .collect();
    if !(0..k + 1).all(|i| segment_inside(d, &path[i], &path[i + 1])) {
        return Err(Error::OutsideDomain("straight segment leaves the domain".into()));
    }

    if cfg.budget > 0 && k > 0 {
        let mut lens: Vec<f64> = (0..k + 1)
            .map(|i| segment_length(d, &path[i], &path[i + 1], cfg.nodes, &cfg.search).map(|r| r.0))
            .collect::<Result<_>>()?;
        let n = d.n();
        let mut step = cfg.step * span;
        let mut used = 0;
        'outer: while used < cfg.budget && step > 1e-4 * span {
            let mut improved = false;
            for i in 1..=k {
                for coord in 0..2 * n {
                    for sign in [1.0, -1.0] {
                        if used >= cfg.budget {
                            break 'outer;
                        }
                        let mut cand = path[i].clone();
                        let delta = if coord % 2 == 0 { C64::new(sign * step, 0.0) } else { C64::new(0.0, sign * step) };
                        cand[coord / 2] += delta;
                        if !segment_inside(d, &path[i - 1], &cand) || !segment_inside(d, &cand, &path[i + 1]) {
                            continue;
                        }
                        used += 1;
                        let l0 = segment_length(d, &path[i - 1], &cand, cfg.nodes, &cfg.search);
                        let l1 = segment_length(d, &cand, &path[i + 1], cfg.nodes, &cfg.search);
                        let (Ok((l0, _)), Ok((l1, _))) = (l0, l1) else { continue };
                        if l0 + l1 < lens[i - 1] + lens[i] - 1e-12 {
                            path[i] = cand;
                            lens[i - 1] = l0;
                            lens[i] = l1;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }

    let mut segment_samples = Vec::with_capacity(k + 1);
    let mut segment_lengths = Vec::with_capacity(k + 1);
    for i in 0..k + 1 {
        let (l, s) = segment_length(d, &path[i], &path[i + 1], cfg.nodes, &cfg.report)?;
        segment_lengths.push(l);
        segment_samples.push(s);
    }
    Ok(DistanceEstimate {
        value: segment_lengths.iter().sum(),
        bound: BoundKind::UpperBound,
        path,
        segment_samples,
        segment_lengths,
    })
}

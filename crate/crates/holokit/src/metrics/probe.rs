//! Radial extents of Kobayashi balls.
//!
//! Along a ray `t ↦ p + t u` the straight-segment length
//! `L(t) = ∫_0^t F^K(p + s u, u) ds` is an upper bound for `d_D(p, p + t u)`, so
//! `{t : L(t) < R}` lies inside the ball. Panels are built lazily and graded
//! toward both the start and the exit point of the ray.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kobayashi::{kobayashi_inf_estimate_warm, DiscConfig};
use crate::domain::{random_unit, Domain};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

#[derive(Clone, Debug)]
struct Panel {
    a: f64,
    b: f64,
    f: [f64; 3],
    /// `L(a)`.
    start: f64,
}

impl Panel {
    fn total(&self) -> f64 {
        0.5 * (self.b - self.a) * (0..3).map(|i| GL3_W[i] * self.f[i]).sum::<f64>()
    }

    /// `∫_a^t` of the quadratic through the node values.
    fn partial(&self, t: f64) -> f64 {
        let h = 0.5 * (self.b - self.a);
        let s = ((t - self.a) / h - 1.0).clamp(-1.0, 1.0);
        let x = GL3_X;
        let mut acc = 0.0;
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let den = (x[i] - x[j]) * (x[i] - x[k]);
            // ∫_{-1}^{s} (y - x_j)(y - x_k) dy
            let prim = |y: f64| y * y * y / 3.0 - 0.5 * (x[j] + x[k]) * y * y + x[j] * x[k] * y;
            acc += self.f[i] * (prim(s) - prim(-1.0)) / den;
        }
        h * acc
    }
}

/// Lazily integrated `F^K`-length along one ray.
#[derive(Clone, Debug)]
pub struct RayProfile {
    pub origin: Point,
    pub dir: Point,
    /// Exit parameter, or the search limit when the ray stays inside.
    pub t_end: f64,
    pub exits: bool,
    h0: f64,
    panels: Vec<Panel>,
    cfg: DiscConfig,
    warm: Option<Vec<C64>>,
}

impl RayProfile {
    pub fn new(d: &Domain, origin: &[C64], dir: &[C64], cfg: &DiscConfig) -> Result<Self> {
        if !d.contains(origin) {
            return Err(Error::OutsideDomain(format!("{origin:?}")));
        }
        let u = linalg::normalized(dir);
        let tmax = 2.0 * d.bounding_radius + linalg::norm(origin);
        let (t_end, exits) = match d.ray_exit(origin, &u, tmax) {
            Some(t) => (t, true),
            None => (tmax, false),
        };
        let g = linalg::norm(&d.real_gradient(origin));
        let depth = if g > 0.0 { d.rho(origin).abs() / g } else { t_end };
        let h0 = (0.25 * t_end).min(0.5 * depth).max(1e-6 * t_end);
        Ok(RayProfile { origin: origin.to_vec(), dir: u, t_end, exits, h0, panels: Vec::new(), cfg: cfg.clone(), warm: None })
    }

    fn covered(&self) -> f64 {
        self.panels.last().map_or(0.0, |p| p.b)
    }

    fn length_covered(&self) -> f64 {
        self.panels.last().map_or(0.0, |p| p.start + p.total())
    }

    fn exhausted(&self) -> bool {
        self.t_end - self.covered() <= 1e-9 * self.t_end
    }

    fn push_panel(&mut self, d: &Domain) -> Result<()> {
        let a = self.covered();
        let len = (0.5 * (self.t_end - a)).min(self.h0.max(0.5 * a));
        let len = if self.exits { len } else { len.max(1e-12).min(self.t_end - a) };
        let b = a + len;
        let mut f = [0.0; 3];
        for i in 0..3 {
            let t = a + 0.5 * (GL3_X[i] + 1.0) * len;
            let z = linalg::axpy(&self.origin, t, &self.dir);
            let (e, shape) = kobayashi_inf_estimate_warm(d, &z, &self.dir, &self.cfg, self.warm.as_deref())?;
            self.warm = Some(shape);
            f[i] = e.value;
        }
        let start = self.length_covered();
        self.panels.push(Panel { a, b, f, start });
        Ok(())
    }

    /// `L(t)` for `t < t_end`.
    pub fn length_to(&mut self, d: &Domain, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        while self.covered() < t {
            if self.exhausted() {
                return Ok(f64::INFINITY);
            }
            self.push_panel(d)?;
        }
        let i = self.panels.partition_point(|p| p.b < t);
        let p = &self.panels[i];
        Ok(p.start + p.partial(t))
    }

    /// Largest `t` with `L(t) ≤ R` and whether the ray reached its end first.
    pub fn extent_for(&mut self, d: &Domain, r: f64) -> Result<(f64, bool)> {
        if r <= 0.0 {
            return Ok((0.0, false));
        }
        while self.length_covered() < r {
            if self.exhausted() {
                return Ok((self.t_end, true));
            }
            self.push_panel(d)?;
        }
        let i = self.panels.partition_point(|p| p.start + p.total() < r);
        let p = &self.panels[i];
        let (mut lo, mut hi) = (p.a, p.b);
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if p.start + p.partial(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), false))
    }

    /// Number of metric evaluations spent so far.
    pub fn evaluations(&self) -> usize {
        3 * self.panels.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeExtent {
    pub dir: Point,
    pub t: f64,
    /// The ray left the domain (or the search window) before reaching `R`.
    pub reached_boundary: bool,
}

/// Axis and two-coordinate diagonal directions of `R^{2n}`, then `random` seeded unit vectors.
pub fn probe_directions(n: usize, random: usize, seed: u64) -> Vec<Point> {
    let m = 2 * n;
    let mut out = Vec::new();
    let basis = |k: usize| -> Point {
        let mut e = linalg::zeros(n);
        e[k / 2] = if k % 2 == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
        e
    };
    for k in 0..m {
        for s in [1.0, -1.0] {
            out.push(linalg::scale_re(&basis(k), s));
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..m {
        for j in i + 1..m {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                out.push(linalg::add(&linalg::scale_re(&basis(i), si * r), &linalg::scale_re(&basis(j), sj * r)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push(random_unit(&mut rng, n));
    }
    out
}

/// Ray profiles from one center, reusable across radii.
#[derive(Clone, Debug)]
pub struct BallProber {
    pub center: Point,
    pub rays: Vec<RayProfile>,
}

impl BallProber {
    pub fn new(d: &Domain, center: &[C64], dirs: &[Point], cfg: &DiscConfig) -> Result<Self> {
        let rays = dirs.iter().map(|u| RayProfile::new(d, center, u, cfg)).collect::<Result<_>>()?;
        Ok(BallProber { center: center.to_vec(), rays })
    }

    pub fn extents(&mut self, d: &Domain, r: f64) -> Result<Vec<ProbeExtent>> {
        self.rays
            .iter_mut()
            .map(|ray| {
                let (t, hit) = ray.extent_for(d, r)?;
                Ok(ProbeExtent { dir: ray.dir.clone(), t, reached_boundary: hit })
            })
            .collect()
    }
}

/// Inner radial bounds of `B_D(p, R)` along each direction.
pub fn kobayashi_ball_probe(d: &Domain, p: &[C64], r: f64, dirs: &[Point], cfg: &DiscConfig) -> Result<Vec<ProbeExtent>> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument("radius must be nonnegative".into()));
    }
    BallProber::new(d, p, dirs, cfg)?.extents(d, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::preset_domain;

    #[test]
    fn ball_radius_matches_tanh() {
        let d = preset_domain("ball:2").unwrap();
        let dirs = vec![linalg::unit(2, 0), linalg::scale_re(&linalg::unit(2, 1), -1.0)];
        let ext = kobayashi_ball_probe(&d, &linalg::zeros(2), 1.0, &dirs, &DiscConfig::cheap()).unwrap();
        for e in ext {
            assert!(!e.reached_boundary);
            assert!((e.t - 1f64.tanh()).abs() < 0.02, "{}", e.t);
        }
    }

    #[test]
    fn zero_radius() {
        let d = preset_domain("ball:2").unwrap();
        let ext = kobayashi_ball_probe(&d, &linalg::zeros(2), 0.0, &probe_directions(2, 3, 1), &DiscConfig::cheap()).unwrap();
        assert!(ext.iter().all(|e| e.t == 0.0));
    }

    #[test]
    fn partial_panel_is_consistent() {
        let p = Panel { a: 1.0, b: 3.0, f: [2.0, 5.0, 1.0], start: 0.0 };
        assert!((p.partial(3.0) - p.total()).abs() < 1e-12);
        assert_eq!(p.partial(1.0), 0.0);
    }
}

//! Lower bounds for the Carathéodory metric from explicit maps into the disc.
//!
//! Each candidate `h: D → C` is normalized by an enclosing disc of `h(D)` and
//! a Möbius map; `|dh(z)v|/r / (1 - |(h(z) - c)/r|²)` then bounds `F^C(z, v)`
//! from below. Enclosing discs of linear functionals come from support
//! functions refined by Newton; other candidates use sampled suprema widened
//! by 1%.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BoundKind, MetricEstimate, Witness};
use crate::domain::{random_unit, Domain};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Point};

#[derive(Clone, Debug, Serialize)]
pub struct LowerConfig {
    /// Boundary sample rays.
    pub rays: usize,
    /// Extra random functionals.
    pub random_functionals: usize,
    pub seed: u64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig { rays: 256, random_functionals: 4, seed: 0 }
    }
}

const SAFETY: f64 = 1.01;

struct Cloud<'a> {
    d: &'a Domain,
    base: Point,
    tmax: f64,
    dirs: Vec<Point>,
    pts: Vec<Point>,
}

impl<'a> Cloud<'a> {
    fn new(d: &'a Domain, rays: usize, seed: u64) -> Option<Self> {
        let n = d.n();
        let base = d.base_point.clone();
        let tmax = 2.0 * d.bounding_radius + linalg::norm(&base);
        let mut dirs = Vec::new();
        for i in 0..n {
            for ph in 0..4 {
                let mut u = linalg::zeros(n);
                u[i] = C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * ph as f64);
                dirs.push(u);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca7a);
        for _ in 0..rays {
            dirs.push(random_unit(&mut rng, n));
        }
        let mut pts = Vec::with_capacity(dirs.len());
        for u in &dirs {
            let t = d.ray_exit(&base, u, tmax)?;
            pts.push(linalg::axpy(&base, t, u));
        }
        Some(Cloud { d, base, tmax, dirs, pts })
    }

    fn exit(&self, u: &[C64]) -> Option<Point> {
        let u = linalg::normalized(u);
        self.d.ray_exit(&self.base, &u, self.tmax).map(|t| linalg::axpy(&self.base, t, &u))
    }

    /// Sampled supremum of `φ` over the boundary, refined by a pattern search on ray directions.
    fn sup(&self, phi: &dyn Fn(&[C64]) -> f64) -> f64 {
        self.sup_seeded(phi, &[])
    }

    /// As [`Cloud::sup`], also climbing from the given boundary points.
    fn sup_seeded(&self, phi: &dyn Fn(&[C64]) -> f64, seeds: &[Point]) -> f64 {
        let (bi, sampled) = self.argmax(phi);
        let mut best = self.climb(phi, self.dirs[bi].clone(), sampled);
        for p in seeds {
            let u = linalg::sub(p, &self.base);
            if linalg::norm(&u) > 0.0 {
                best = best.max(phi(p)).max(self.climb(phi, linalg::normalized(&u), phi(p)));
            }
        }
        best
    }

    fn climb(&self, phi: &dyn Fn(&[C64]) -> f64, mut u: Point, mut best: f64) -> f64 {
        let n = u.len();
        let mut step = 0.1;
        while step > 1e-4 {
            let mut improved = false;
            for k in 0..2 * n {
                for s in [1.0, -1.0] {
                    let mut w = u.clone();
                    w[k / 2] += if k % 2 == 0 { c(s * step, 0.0) } else { c(0.0, s * step) };
                    if let Some(p) = self.exit(&w) {
                        let v = phi(&p);
                        if v > best {
                            best = v;
                            u = linalg::normalized(&w);
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    /// Boundary point maximizing `φ`, refined by Newton on `∇φ = μ∇ρ`, `ρ = 0`.
    /// `None` when Newton does not certify a constrained critical point.
    fn newton_max(
        &self,
        grad: &dyn Fn(&[f64]) -> Vec<f64>,
        hess: &dyn Fn(&[f64]) -> DMatrix<f64>,
        seed: &[C64],
    ) -> Option<Point> {
        let d = self.d;
        let mut x = linalg::to_real(seed);
        let m = x.len();
        let g0 = linalg::to_real(&d.real_gradient(seed));
        let gn: f64 = g0.iter().map(|v| v * v).sum();
        if gn == 0.0 {
            return None;
        }
        let mut mu = grad(&x).iter().zip(&g0).map(|(a, b)| a * b).sum::<f64>() / gn;
        let scale = d.rho_scale().max(1.0);
        for _ in 0..50 {
            let w = linalg::from_real(&x);
            let r = d.rho(&w);
            let gr = linalg::to_real(&d.real_gradient(&w));
            let hr = d.real_hessian(&w);
            let gp = grad(&x);
            let hp = hess(&x);
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] = hp[(i, j)] - mu * hr[(i, j)];
                }
                a[(i, m)] = -gr[i];
                a[(m, i)] = gr[i];
                b[i] = -(gp[i] - mu * gr[i]);
            }
            b[m] = -r;
            // Least squares: flat directions of ρ leave the Hessian block singular.
            let step = a.svd(true, true).solve(&b, 1e-14).ok()?;
            let sn: f64 = (0..m).map(|i| step[i] * step[i]).sum::<f64>().sqrt();
            let cap = 0.1 * (1.0 + linalg::norm(&w));
            let lam = if sn > cap { cap / sn } else { 1.0 };
            for i in 0..m {
                x[i] += lam * step[i];
            }
            mu += lam * step[m];
            if lam == 1.0 && sn < 1e-12 * (1.0 + linalg::norm(&w)) {
                let w = linalg::from_real(&x);
                let ok = mu > 0.0 && d.rho(&w).abs() < 1e-12 * scale && self.is_local_max(&hess(&x), mu, &w);
                return ok.then_some(w);
            }
        }
        None
    }

    /// Second-order test: `∇²φ - μ∇²ρ` is negative semidefinite on the tangent space at `w`.
    fn is_local_max(&self, hp: &DMatrix<f64>, mu: f64, w: &[C64]) -> bool {
        let gr = linalg::to_real(&self.d.real_gradient(w));
        let m = gr.len();
        let gg: f64 = gr.iter().map(|g| g * g).sum();
        let proj = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - gr[i] * gr[j] / gg);
        let lag = hp - self.d.real_hessian(w) * mu;
        let tol = 1e-9 * (1.0 + lag.amax());
        (&proj * lag * &proj).symmetric_eigenvalues().iter().all(|e| *e <= tol)
    }

    fn argmax(&self, phi: &dyn Fn(&[C64]) -> f64) -> (usize, f64) {
        let (mut bi, mut best) = (0, f64::NEG_INFINITY);
        for (i, p) in self.pts.iter().enumerate() {
            let v = phi(p);
            if v > best {
                best = v;
                bi = i;
            }
        }
        (bi, best)
    }

    /// Bounding-box center of `ℓ` over the samples and a radius of an enclosing disc of `ℓ(D)`,
    /// certified by Newton when possible, otherwise sampled and widened.
    fn linear_disc(&self, l: &[C64]) -> (C64, f64, bool) {
        let vals: Vec<C64> = self.pts.iter().map(|p| lin_eval(l, p)).collect();
        let fold = |f: &dyn Fn(&C64) -> f64| vals.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let center = c(
            0.5 * (fold(&|v| v.re) - fold(&|v| -v.re)),
            0.5 * (fold(&|v| v.im) - fold(&|v| -v.im)),
        );
        let phi = |w: &[C64]| (lin_eval(l, w) - center).norm_sqr();
        let (bi, sampled) = self.argmax(&phi);
        // ∂s/∂x_i = l_i, ∂s/∂y_i = i l_i for s = ℓ - c.
        let jac: Vec<C64> = l.iter().flat_map(|li| [*li, li * c(0.0, 1.0)]).collect();
        let grad = |x: &[f64]| -> Vec<f64> {
            let s = lin_eval(l, &linalg::from_real(x)) - center;
            jac.iter().map(|j| 2.0 * (s.conj() * j).re).collect()
        };
        let hess = |_: &[f64]| DMatrix::from_fn(jac.len(), jac.len(), |a, b| 2.0 * (jac[a].conj() * jac[b]).re);
        let climbed = self.sup(&phi);
        if let Some(w) = self.newton_max(&grad, &hess, &self.pts[bi]) {
            let v = phi(&w);
            if v >= sampled.max(climbed) * (1.0 - 1e-12) {
                return (center, v.sqrt(), true);
            }
        }
        (center, SAFETY * climbed.sqrt(), false)
    }
}

fn mobius_bound(dh: f64, hz: C64, center: C64, r: f64) -> f64 {
    let q = ((hz - center) / r).norm_sqr();
    if !(q < 1.0) || r <= 0.0 {
        return 0.0;
    }
    dh / r / (1.0 - q)
}

struct Best {
    value: f64,
    what: String,
    sampled: bool,
}

impl Best {
    fn offer(&mut self, value: f64, what: impl FnOnce() -> String, sampled: bool) {
        if value.is_finite() && value > self.value {
            self.value = value;
            self.what = what();
            self.sampled = sampled;
        }
    }
}

fn lin_eval(l: &[C64], w: &[C64]) -> C64 {
    l.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Lower bound for `F^C_D(z, v)`.
pub fn caratheodory_inf_lower(d: &Domain, z: &[C64], v: &[C64], cfg: &LowerConfig) -> Result<MetricEstimate> {
    let n = d.n();
    if z.len() != n || v.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    if !d.contains(z) {
        return Err(Error::OutsideDomain(format!("{z:?}")));
    }
    let mut flags = Vec::new();
    let zero = MetricEstimate { value: 0.0, bound: BoundKind::LowerBound, witness: Witness::None, config: None, flags: vec![] };
    if linalg::norm(v) == 0.0 {
        return Ok(zero);
    }
    let restricted;
    let (_, cloud) = match Cloud::new(d, cfg.rays, cfg.seed) {
        Some(cl) => (d, cl),
        None => {
            restricted = d.intersect_ball(&linalg::zeros(n), d.bounding_radius)?;
            flags.push("RestrictedToBoundingBall".to_string());
            let cl = Cloud::new(&restricted, cfg.rays, cfg.seed)
                .ok_or_else(|| Error::DegenerateGeometry("boundary not reached".into()))?;
            (&restricted, cl)
        }
    };

    // Functionals ℓ(w) = Σ l_i w_i.
    let mut funcs: Vec<Point> = vec![v.iter().map(|x| x.conj()).collect()];
    for i in 0..n {
        funcs.push(linalg::unit(n, i));
    }
    let foot = d.boundary_distance(z).ok();
    if let Some(f) = &foot {
        funcs.push(d.wirtinger_gradient(&f.foot));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11);
    for _ in 0..cfg.random_functionals {
        funcs.push(random_unit(&mut rng, n));
    }

    let mut best = Best { value: 0.0, what: String::new(), sampled: false };
    let mut best_linear: Option<(Point, C64, f64)> = None;
    for l in &funcs {
        let dl = lin_eval(l, v).norm();
        if dl == 0.0 {
            continue;
        }
        let (center, r, refined) = cloud.linear_disc(l);
        let val = mobius_bound(dl, lin_eval(l, z), center, r);
        if val > best.value {
            best_linear = Some((l.clone(), center, r));
        }
        best.offer(val, || format!("linear functional {l:?}"), !refined);
    }

    // Quadratic perturbations of the best linear functional.
    let foot_seed: Vec<Point> = foot.iter().map(|f| f.foot.clone()).collect();
    if let Some((l, _, r0)) = &best_linear {
        let lz = lin_eval(l, z);
        let dl = lin_eval(l, v).norm();
        for eps in [0.1, -0.1, 0.2, -0.2] {
            let e = eps / r0;
            let hf = |w: &[C64]| {
                let s = lin_eval(l, w) - lz;
                lz + s + s * s * e
            };
            let vals: Vec<C64> = cloud.pts.iter().map(|p| hf(p)).collect();
            let fold = |f: &dyn Fn(&C64) -> f64| vals.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            let center = c(0.5 * (fold(&|v| v.re) - fold(&|v| -v.re)), 0.5 * (fold(&|v| v.im) - fold(&|v| -v.im)));
            let r = SAFETY * cloud.sup_seeded(&|w| (hf(w) - center).norm(), &foot_seed);
            best.offer(mobius_bound(dl, lz, center, r), || format!("quadratic perturbation eps={eps}"), true);
        }
    }

    // Peak candidates exp(σ L_ζ) with L_ζ the Levi polynomial at the closest boundary point.
    if let Some(f) = &foot {
        let zeta = &f.foot;
        let grad = d.wirtinger_gradient(zeta);
        let (hzz, _) = d.wirtinger_hessians(zeta);
        let levi = |w: &[C64]| -> (C64, C64) {
            let dw = linalg::sub(w, zeta);
            let mut val = c(0.0, 0.0);
            let mut dv = c(0.0, 0.0);
            for i in 0..n {
                val += grad[i] * dw[i];
                dv += grad[i] * v[i];
                for j in 0..n {
                    val += hzz[i][j] * dw[i] * dw[j] * 0.5;
                    dv += hzz[i][j] * dw[j] * v[i];
                }
            }
            (val, dv)
        };
        let gnorm = linalg::norm(&grad);
        if gnorm > 0.0 && f.distance > 0.0 {
            let s0 = 1.0 / (gnorm * f.distance);
            let (lz, dlz) = levi(z);
            for mult in [0.125, 0.25, 0.5, 1.0, 2.0] {
                let sigma = s0 * mult;
                let sup_re = cloud.sup_seeded(&|w| sigma * levi(w).0.re, std::slice::from_ref(zeta));
                let log_s = sup_re + SAFETY.ln();
                let gz = (sigma * lz - log_s).exp();
                let dg = sigma * dlz.norm() * gz.norm();
                best.offer(mobius_bound(dg, gz, c(0.0, 0.0), 1.0), || format!("peak exp(sigma L), sigma={sigma:.6e}"), true);
            }
        }
    }

    if best.value == 0.0 {
        let mut z0 = zero;
        z0.flags = flags;
        z0.flags.push("Vacuous".into());
        return Ok(z0);
    }
    if best.sampled {
        flags.push("SampledSupremum".into());
    }
    Ok(MetricEstimate {
        value: best.value,
        bound: BoundKind::LowerBound,
        witness: Witness::Functional(best.what),
        config: None,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::preset_domain;

    #[test]
    fn ball_and_polydisc_center() {
        let b = preset_domain("ball:2").unwrap();
        let e = caratheodory_inf_lower(&b, &linalg::zeros(2), &linalg::unit(2, 0), &LowerConfig::default()).unwrap();
        assert!(e.value >= 1.0 - 1e-9 && e.value <= 1.0 + 1e-6, "{}", e.value);
        let p = preset_domain("polydisc:2").unwrap();
        let e = caratheodory_inf_lower(&p, &linalg::zeros(2), &linalg::unit(2, 1), &LowerConfig::default()).unwrap();
        assert!(e.value >= 0.99 && e.value <= 1.0 + 1e-6, "{}", e.value);
    }

    #[test]
    fn zero_vector() {
        let b = preset_domain("egg:2").unwrap();
        let z = vec![c(0.1, 0.0), c(-0.2, 0.1)];
        assert_eq!(caratheodory_inf_lower(&b, &z, &linalg::zeros(2), &LowerConfig::default()).unwrap().value, 0.0);
    }

    #[test]
    fn disc_is_exact() {
        let d = preset_domain("ball:1").unwrap();
        let e = caratheodory_inf_lower(&d, &[c(0.5, 0.0)], &[c(1.0, 0.0)], &LowerConfig::default()).unwrap();
        assert!((e.value - 4.0 / 3.0).abs() < 1e-6, "{}", e.value);
    }
}

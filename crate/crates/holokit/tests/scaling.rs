use holokit::linalg::{self, c, Point};
use holokit::scaling::catlin::limit_model;
use holokit::scaling::*;
use holokit::{preset_domain, Domain, Monomial, PolyhedronSpec};
use num_complex::Complex64 as C64;

fn ball_entries(ds: &[f64]) -> Vec<ScalingEntry> {
    let b = preset_domain("ball:2").unwrap();
    ds.iter().map(|d| spsc_scaled_domain(&b, &[c(0.0, 0.0), c(1.0 - d, 0.0)]).unwrap()).collect()
}

#[test]
fn spsc_delta_tracks_distance() {
    let d = preset_domain("perturbed_ball:4:1").unwrap();
    let u = linalg::normalized(&[c(0.6, 0.1), c(0.3, -0.7)]);
    let t = d.ray_exit(&linalg::zeros(2), &u, 3.0).unwrap();
    let foot = d.boundary_distance(&linalg::scale_re(&u, 0.95 * t)).unwrap().foot;
    let inward = linalg::scale_re(&d.real_gradient(&foot), -1.0);
    let ds: Vec<f64> = (4..10).map(|k| 0.5f64.powi(k)).collect();
    let pts = normal_sequence(&foot, &inward, &ds);
    let deltas: Vec<f64> = pts.iter().map(|p| spsc_scaled_domain(&d, p).unwrap().scales[0]).collect();
    for w in deltas.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 1e-3, "{deltas:?}");
    }
}

#[test]
fn spsc_limit_is_siegel_and_hausdorff_decreases() {
    let model = siegel_model(2).unwrap();
    let rho = model.rho_poly().poly();
    assert_eq!(rho.len(), 3);
    assert_eq!(rho.coeff(&Monomial::new(vec![1, 0], vec![1, 0])), c(1.0, 0.0));
    // Window straddling the boundary near the origin.
    let center = vec![c(0.0, 0.0), c(-0.5, 0.0)];
    let mut prev = f64::INFINITY;
    for e in ball_entries(&[1e-2, 1e-3, 1e-4]) {
        assert!(e.center_error() < 1e-12);
        let h = local_hausdorff(&e.domain, &model, &center, 1.0, 11).unwrap();
        assert!(h.value < prev, "{} !< {prev}", h.value);
        prev = h.value;
    }
}

#[test]
fn spsc_center_exact_off_axis() {
    let ball = preset_domain("ball:2").unwrap();
    let u = linalg::normalized(&[c(0.6, 0.2), c(-0.3, 0.7)]);
    for k in 2..=8 {
        let e = spsc_scaled_domain(&ball, &linalg::scale_re(&u, 1.0 - 10f64.powi(-k))).unwrap();
        assert!(e.center_error() < 1e-12, "k = {k}: {:e}", e.center_error());
        assert!((e.scales[0] / 10f64.powi(-k) - 1.0).abs() < 1e-6, "k = {k}: {}", e.scales[0] / 10f64.powi(-k));
    }
}

#[test]
fn spsc_reality_and_map_exactness() {
    for e in ball_entries(&[1e-3]) {
        let pts: Vec<Point> = (0..20).map(|k| vec![c(0.1 * k as f64, -0.05), c(-1.0, 0.02 * k as f64)]).collect();
        assert!(e.domain.rho_poly().imaginary_defect(&pts) < 1e-9);
        assert!(e.map.verify(1.0).unwrap() < 1e-10);
    }
}

fn egg_chart() -> CatlinChart {
    catlin_chart(&preset_domain("egg:2").unwrap(), &[c(0.0, 0.0), c(-1.0, 0.0)]).unwrap()
}

#[test]
fn catlin_normal_limit_is_h4() {
    let ch = egg_chart();
    let entries: Vec<ScalingEntry> = (1..=6)
        .map(|k| catlin_scaled_domain(&ch, &[c(0.0, 0.0), c(-1.0 + 0.1f64.powi(k), 0.0)], 4).unwrap())
        .collect();
    let p = limit_polynomial(&entries).unwrap();
    assert_eq!(p.poly().len(), 1);
    assert!((p.poly().coeff(&Monomial::new(vec![2, 0], vec![2, 0])) - c(1.0, 0.0)).norm() < 1e-9);
    let m = limit_model(&p, 4).unwrap();
    assert!(m.contains(&[c(0.5, 0.0), c(-0.1, 0.0)]));
    for e in &entries {
        assert!(e.center_error() < 1e-10);
    }
}

#[test]
fn catlin_strongly_pseudoconvex_side() {
    let d = preset_domain("egg:2").unwrap();
    let ch = catlin_chart(&d, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    let entries: Vec<ScalingEntry> =
        (2..=7).map(|k| catlin_scaled_domain(&ch, &[c(1.0 - 0.1f64.powi(k), 0.0), c(0.0, 0.0)], 4).unwrap()).collect();
    let p = limit_polynomial(&entries).unwrap();
    let a = p.poly().coeff(&Monomial::new(vec![1, 0], vec![1, 0]));
    assert!(a.re > 0.0);
    for (m, cf) in p.poly().terms() {
        if m.z != vec![1, 0] || m.zbar != vec![1, 0] {
            assert!(cf.norm() < 1e-6 * a.norm(), "{m:?} {cf}");
        }
    }
}

#[test]
fn catlin_tangential_sequence() {
    let ch = egg_chart();
    let chart_inv = |w: &[C64]| ch.map.eval_inverse(w);
    let entries: Vec<ScalingEntry> = (1..=20)
        .map(|j| {
            let eps = 0.5f64.powi(j + 3);
            let w = vec![c(0.5 * eps.powf(0.25), 0.0), c(-eps, 0.0)];
            catlin_scaled_domain(&ch, &chart_inv(&w), 4).unwrap()
        })
        .collect();
    let ratios: Vec<f64> = entries.iter().map(|e| e.tau_ratio().unwrap()).collect();
    let bound = 2.0 * ratios[..5].iter().cloned().fold(0.0, f64::max);
    assert!(ratios.iter().all(|r| *r <= bound), "{ratios:?}");
    for e in &entries {
        let (eps, tau) = (e.scales[0], e.scales[1]);
        // ε^{1/2} ≲ τ ≲ ε^{1/4}
        assert!(tau >= 0.1 * eps.sqrt() && tau <= 10.0 * eps.powf(0.25), "{eps} {tau}");
        assert!(e.center_error() < 1e-10);
    }
    match limit_polynomial(&entries) {
        Ok(p) => assert!(p.degree() <= 4),
        Err(holokit::Error::NonConvergence(_)) => {}
        Err(e) => panic!("{e}"),
    }
}

/// Exit distance along `q + t u` by bisection on a fine scan.
fn exit_oracle(d: &Domain, level: f64, q: &[C64], u: &[C64]) -> f64 {
    let f = |t: f64| d.rho(&linalg::axpy(q, t, u)) - level;
    let mut t = 0.0;
    let h = 1e-4;
    while f(t + h) < 0.0 {
        t += h;
    }
    let (mut lo, mut hi) = (t, t + h);
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        if f(m) < 0.0 {
            lo = m
        } else {
            hi = m
        }
    }
    hi
}

#[test]
fn mcneal_egg_exponents() {
    let d = preset_domain("egg:2").unwrap();
    let mut logs = Vec::new();
    for k in 4..=10 {
        let dd = 0.5f64.powi(k);
        let q = vec![c(0.0, 0.0), c(-1.0 + dd, 0.0)];
        let f = mcneal_frame(&d, &q, dd).unwrap();
        let level = d.rho(&q) + dd;
        // Normal τ: brute-force minimum over directions in the z_2 line.
        let mut best = f64::INFINITY;
        for i in 0..720 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 720.0;
            best = best.min(exit_oracle(&d, level, &q, &[c(0.0, 0.0), C64::from_polar(1.0, th)]));
        }
        assert!((f.taus[1] - best).abs() < 1e-3 * best, "{} {best}", f.taus[1]);
        let mut tang = f64::INFINITY;
        for i in 0..360 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 360.0;
            tang = tang.min(exit_oracle(&d, level, &q, &[C64::from_polar(1.0, th), c(0.0, 0.0)]));
        }
        assert!((f.taus[0] - tang).abs() < 1e-3 * tang, "{} {tang}", f.taus[0]);
        logs.push((dd.ln(), f.taus[0].ln(), f.taus[1].ln()));
    }
    let slope = |sel: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|l| l.0).sum::<f64>() / n;
        let my = logs.iter().map(sel).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|l| (l.0 - mx) * (sel(l) - my)).sum();
        let sxx: f64 = logs.iter().map(|l| (l.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    assert!((slope(&|l| l.2) - 1.0).abs() < 0.05);
    assert!((slope(&|l| l.1) - 0.25).abs() < 0.05);
}

#[test]
fn convex_normal_scaling_on_egg() {
    let d = preset_domain("egg:2").unwrap();
    for k in [3, 6, 9] {
        let q = vec![c(0.0, 0.0), c(-1.0 + 0.5f64.powi(k), 0.0)];
        let e = convex_scaled_domain(&d, &q).unwrap();
        assert!(e.domain.contains(&linalg::zeros(2)));
        assert!(e.center_error() == 0.0);
        let env = e.envelope.as_ref().unwrap();
        assert!(env.phase_defect < 1e-6, "{}", env.phase_defect);
        for k in 0..2 {
            assert!(env.coefficients[k][k].norm() > 0.0);
        }
    }
}

#[test]
fn corner_exhaustion() {
    let p = PolyhedronSpec::polydisc(2);
    let m = polyhedron_corner_maps(&p, &[c(0.999, 0.0), c(0.999, 0.0)]).unwrap();
    let chk = m.check_exhaustion(0.9);
    assert!(chk.points >= 900);
    assert_eq!(chk.failures, 0);
}

#[test]
fn run_export_is_parseable() {
    let b = preset_domain("ball:2").unwrap();
    let pts: Vec<Point> = [1e-2, 1e-3].iter().map(|d| vec![c(0.0, 0.0), c(1.0 - d, 0.0)]).collect();
    let run = ScalingRun::build(Pipeline::StronglyPseudoconvex, &b, &[c(0.0, 0.0), c(1.0, 0.0)], &pts, |p| spsc_scaled_domain(&b, p)).unwrap();
    assert_eq!(run.entries.len(), 2);
    assert!(run.entries[0].scales[0] > run.entries[1].scales[0]);
    let text = serde_json::to_string(&run.to_json()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let delta = v["entries"][1]["scales"][0].as_f64().unwrap();
    assert_eq!(delta, run.entries[1].scales[0]);
    assert!(v["entries"][0]["map"].as_array().unwrap().len() >= 4);
}

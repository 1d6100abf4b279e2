use holokit::linalg::{self, c, Point};
use holokit::{parse_domain_spec, preset_domain, Domain, DomainClass, Error, Monomial, Poly, PolyMap, PolyhedronSpec, RealPoly};
use num_complex::Complex64 as C64;

#[test]
fn eval_rho_examples() {
    let ball = preset_domain("ball:2").unwrap();
    assert_eq!(ball.eval_rho(&linalg::zeros(2)).unwrap(), -1.0);
    let s = preset_domain("siegel:2").unwrap();
    assert_eq!(s.eval_rho(&[c(0.0, 0.0), c(-1.0, 0.0)]).unwrap(), -2.0);
    let egg = preset_domain("egg:2").unwrap();
    assert!((egg.eval_rho(&[c(0.0, 0.0), c(-0.9, 0.0)]).unwrap() + 0.19).abs() < 1e-15);
}

#[test]
fn wirtinger_gradient_examples() {
    let ball = preset_domain("ball:2").unwrap();
    let g = ball.wirtinger_gradient(&[c(0.5, 0.0), c(0.0, 0.0)]);
    assert_eq!(g, vec![c(0.5, 0.0), c(0.0, 0.0)]);
    let s = preset_domain("siegel:2").unwrap();
    for z in [[c(0.3, -0.7), c(-2.0, 0.1)], [c(-1.0, 2.0), c(0.0, 0.0)]] {
        let g = s.wirtinger_gradient(&z);
        assert!((g[0] - z[0].conj()).norm() < 1e-15 && (g[1] - c(1.0, 0.0)).norm() < 1e-15);
    }
    let constant = Domain::new("const", RealPoly::new(Poly::constant(2, c(-1.0, 0.0)), 1e-12).unwrap(), DomainClass::Generic, None, 1.0, linalg::zeros(2)).unwrap();
    assert_eq!(constant.wirtinger_gradient(&[c(0.2, 0.1), c(-0.3, 0.0)]), vec![c(0.0, 0.0); 2]);
}

#[test]
fn boundary_distance_on_the_ball() {
    let ball = preset_domain("ball:2").unwrap();
    let f = ball.boundary_distance(&linalg::zeros(2)).unwrap();
    assert!((f.distance - 1.0).abs() < 1e-10 && (linalg::norm(&f.foot) - 1.0).abs() < 1e-10);
    let f = ball.boundary_distance(&[c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
    assert!((f.distance - 0.5).abs() < 1e-10);
    assert!(linalg::dist(&f.foot, &[c(1.0, 0.0), c(0.0, 0.0)]) < 1e-8);
}

/// Brute force over `z_1 = r e^{ia}`, `z_2 = (1 - r^4)^{1/2} e^{ib}`.
fn egg_grid_distance(z: &[C64]) -> (f64, Point) {
    let mut best = (f64::INFINITY, vec![]);
    let (nr, na) = (200, 64);
    for i in 0..=nr {
        let r = i as f64 / nr as f64;
        let h = (1.0 - r.powi(4)).max(0.0).sqrt();
        for j in 0..na {
            let a = std::f64::consts::TAU * j as f64 / na as f64;
            for k in 0..na {
                let b = std::f64::consts::TAU * k as f64 / na as f64;
                let w = vec![C64::from_polar(r, a), C64::from_polar(h, b)];
                let d = linalg::dist(z, &w);
                if d < best.0 {
                    best = (d, w);
                }
            }
        }
    }
    best
}

#[test]
fn boundary_distance_on_the_egg_matches_brute_force() {
    let egg = preset_domain("egg:2").unwrap();
    for z in [vec![c(0.0, 0.0), c(-0.9, 0.0)], vec![c(0.6, 0.2), c(0.1, -0.5)]] {
        let f = egg.boundary_distance(&z).unwrap();
        let (grid, _) = egg_grid_distance(&z);
        assert!(f.distance <= grid + 1e-12, "{} {grid}", f.distance);
        assert!(grid - f.distance < 5e-3, "{} {grid}", f.distance);
        assert!(egg.rho(&f.foot).abs() <= 1e-10);
        assert!((linalg::dist(&z, &f.foot) - f.distance).abs() < 1e-12);
    }
    let f = egg.boundary_distance(&[c(0.0, 0.0), c(-0.9, 0.0)]).unwrap();
    assert!((f.distance - 0.1).abs() < 1e-10);
    assert!(linalg::dist(&f.foot, &[c(0.0, 0.0), c(-1.0, 0.0)]) < 1e-8);
}

fn abs_pow(n: usize, i: usize, k: u32) -> Poly {
    let mut z = vec![0; n];
    z[i] = k;
    Poly::from_terms(n, [(Monomial::new(z.clone(), z), c(1.0, 0.0))])
}

fn same_poly(a: &RealPoly, b: &Poly) -> bool {
    let diff = a.poly().sub(b);
    let ok = diff.terms().all(|(_, k)| k.norm() < 1e-14);
    ok
}

#[test]
fn presets() {
    let ball = preset_domain("ball:2").unwrap();
    assert_eq!(ball.class, DomainClass::StronglyPseudoconvex);
    assert_eq!(ball.declared_type, Some(2));
    assert!(same_poly(ball.rho_poly(), &abs_pow(2, 0, 1).add(&abs_pow(2, 1, 1)).sub(&Poly::constant(2, c(1.0, 0.0)))));

    let t = preset_domain("thullen_model:2").unwrap();
    assert_eq!(t.class, DomainClass::PolynomialModel);
    assert_eq!(t.declared_type, Some(4));
    let two_re_z2 = Poly::z(2, 1).add(&Poly::zbar(2, 1));
    assert!(same_poly(t.rho_poly(), &two_re_z2.add(&abs_pow(2, 0, 2))));

    let egg = preset_domain("egg:2").unwrap();
    assert_eq!(egg.declared_type, Some(4));
    assert!(same_poly(egg.rho_poly(), &abs_pow(2, 0, 2).add(&abs_pow(2, 1, 1)).sub(&Poly::constant(2, c(1.0, 0.0)))));

    assert!(matches!(preset_domain("torus:2"), Err(Error::UnknownPreset(_))));
}

#[test]
fn domain_spec_files() {
    let ball = parse_domain_spec("preset:ball:2").unwrap();
    assert_eq!(ball.name, "ball:2");
    let thullen = r#"{"n": 2, "class": "PolynomialModel", "type": 4,
        "terms": [{"re": 1, "z": [0, 1], "zbar": [0, 0]}, {"re": 1, "z": [0, 0], "zbar": [0, 1]},
                  {"re": 1, "z": [2, 0], "zbar": [2, 0]}],
        "base_point": [[0, 0], [-1, 0]]}"#;
    let d = parse_domain_spec(thullen).unwrap();
    assert_eq!(d.class, DomainClass::PolynomialModel);
    assert_eq!(d.declared_type, Some(4));
    assert!(same_poly(d.rho_poly(), preset_domain("thullen_model:2").unwrap().rho_poly().poly()));

    let unreal = r#"{"n": 1, "class": "Generic", "terms": [{"re": 1, "im": 0, "z": [2], "zbar": [1]}], "base_point": [[0, 0]]}"#;
    let msg = parse_domain_spec(unreal).unwrap_err().to_string();
    assert!(msg.contains("[2]") && msg.contains("[1]"), "{msg}");

    let missing = r#"{"n": 1, "class": "Generic", "terms": [{"re": -1, "z": [0], "zbar": [0]}]}"#;
    assert!(parse_domain_spec(missing).unwrap_err().to_string().contains("base_point"));

    match parse_domain_spec("{\"n\": 1,\n \"class\": }") {
        Err(Error::Schema { offset, .. }) => assert!(offset > 8),
        other => panic!("{other:?}"),
    }
}

#[test]
fn polyhedron_genericity() {
    let spec = PolyhedronSpec::polydisc(2);
    assert_eq!(spec.reference, vec![c(1.0, 0.0); 2]);
    // f^1 = f^2 = z_1 has a degenerate Jacobian.
    let bad = PolyhedronSpec::new(PolyMap::new(vec![Poly::z(2, 0), Poly::z(2, 0)]), vec![c(1.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(bad, Err(Error::Precondition(_))));
    let off = PolyhedronSpec::new(PolyMap::identity(2), vec![c(0.5, 0.0), c(1.0, 0.0)]);
    assert!(off.is_err());
}

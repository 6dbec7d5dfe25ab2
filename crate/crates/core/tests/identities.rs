use fraclap::identities::*;
use fraclap::solver::{solve_linear, SolverOptions, SourceTerm};
use fraclap::{Domain, Error, FracParams};
use std::f64::consts::PI;

fn unit() -> Domain {
    Domain::interval(-1.0, 1.0).unwrap()
}

fn gamma_sq(s: f64) -> f64 {
    fraclap::specfun::gamma_fn(1.0 + s).unwrap().powi(2)
}

fn scalar(side: &Side) -> f64 {
    match side {
        Side::Scalar(v) => *v,
        Side::Vector(_) => panic!("expected a scalar side"),
    }
}

#[test]
fn torsion_derivative_closed_form() {
    let p = FracParams::new(1, 0.5).unwrap();
    let r = check_dedu(&p, &unit(), &[0.5], 0, &CheckOptions::default()).unwrap();
    let lhs = -0.5 / 0.75f64.sqrt();
    let t = |x: f64| (2f64.sqrt() / PI) * 0.75f64.sqrt() / (0.5 - x).abs();
    let rhs = -(PI / 4.0) * 2f64.sqrt() * (t(1.0) - t(-1.0));
    assert!((scalar(&r.lhs) - lhs).abs() < 1e-12);
    assert!((scalar(&r.rhs) - rhs).abs() < 1e-10, "{r:?}");
    assert!(r.passed && r.residual < 1e-6);

    let r = check_dedu(&p, &unit(), &[0.0], 0, &CheckOptions::default()).unwrap();
    assert!(scalar(&r.lhs).abs() < 1e-15 && scalar(&r.rhs).abs() < 1e-12);
}

#[test]
fn torsion_derivative_sweep_and_disc() {
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(1, s).unwrap();
        for k in -4..=4 {
            let x = 0.2 * k as f64;
            let r = check_dedu(&p, &unit(), &[x], 0, &CheckOptions::default()).unwrap();
            assert!(r.passed, "s={s} x={x}: {r:?}");
        }
    }
    let p = FracParams::new(2, 0.3).unwrap();
    let r = check_dedu(&p, &Domain::unit_ball(2), &[0.4, 0.0], 0, &CheckOptions::default()).unwrap();
    assert!(r.residual < 1e-4, "{r:?}");
}

#[test]
fn green_derivative_identity() {
    let p = FracParams::new(1, 0.25).unwrap();
    let opts = CheckOptions::default();
    let r = check_green_derivative(&p, &unit(), &[-0.3], &[0.4], 0, &opts).unwrap();
    assert!(r.residual < 1e-5, "{r:?}");
    let swapped = check_green_derivative(&p, &unit(), &[0.4], &[-0.3], 0, &opts).unwrap();
    assert!((scalar(&r.lhs) - scalar(&swapped.lhs)).abs() < 1e-12);
    assert!((scalar(&r.rhs) - scalar(&swapped.rhs)).abs() < 1e-12);

    let p3 = FracParams::new(3, 0.5).unwrap();
    let r = check_green_derivative(&p3, &Domain::unit_ball(3), &[0.2, 0.0, 0.0], &[-0.1, 0.3, 0.0], 1, &opts).unwrap();
    assert!(r.residual < 1e-3, "{r:?}");

    assert!(matches!(
        check_green_derivative(&p, &unit(), &[0.1], &[0.1], 0, &opts),
        Err(Error::Parameter(_))
    ));
    let p_log = FracParams::new(1, 0.5).unwrap();
    assert!(matches!(
        check_green_derivative(&p_log, &unit(), &[0.1], &[0.2], 0, &opts),
        Err(Error::Regime(_))
    ));
}

#[test]
fn green_derivative_reflection_equivariance() {
    let p = FracParams::new(2, 0.4).unwrap();
    let d = Domain::unit_ball(2);
    let opts = CheckOptions::default();
    let a = check_green_derivative(&p, &d, &[0.3, -0.2], &[-0.1, 0.5], 0, &opts).unwrap();
    let b = check_green_derivative(&p, &d, &[-0.2, 0.3], &[0.5, -0.1], 1, &opts).unwrap();
    assert!((scalar(&a.lhs) - scalar(&b.lhs)).abs() < 1e-10);
    assert!((a.residual - b.residual).abs() < 1e-10);
}

#[test]
fn robin_gradient() {
    let p = FracParams::new(1, 0.5).unwrap();
    let opts = CheckOptions::default();
    let r = check_robin_grad(&p, &unit(), &[0.5], 0, &opts).unwrap();
    assert!((scalar(&r.rhs) - 4.0 / (3.0 * PI)).abs() < 1e-12, "{r:?}");
    assert!((scalar(&r.lhs) - 4.0 / (3.0 * PI)).abs() < 1e-6);
    assert!(r.passed);
    for k in -9..=9 {
        let x = 0.1 * k as f64;
        let r = check_robin_grad(&p, &unit(), &[x], 0, &opts).unwrap();
        let closed = 2.0 * x / (PI * (1.0 - x * x));
        assert!(r.passed && (scalar(&r.lhs) - closed).abs() < 1e-6, "x={x}: {r:?}");
    }
    let p2 = FracParams::new(2, 0.3).unwrap();
    let r = check_robin_grad(&p2, &Domain::unit_ball(2), &[0.4, 0.0], 0, &opts).unwrap();
    assert!(r.residual < 1e-3, "{r:?}");
}

#[test]
fn robin_trace_monotone_in_distance() {
    let p = FracParams::new(1, 0.3).unwrap();
    let g = fraclap::GreenFunction::new(p, unit()).unwrap();
    for k in 1..10 {
        let x = 0.1 * k as f64;
        assert!(g.trace_at(&[x], &[1.0]) > g.trace_at(&[x], &[-1.0]));
    }
}

#[test]
fn robin_symmetry_checks() {
    let opts = CheckOptions::default();
    let p = FracParams::new(1, 0.5).unwrap();
    let r = check_robin_symmetry(&p, &unit(), 0, None, None, &opts).unwrap();
    assert!(r.residual < 1e-8 && r.passed);
    let shifted = Domain::interval(-0.5, 1.5).unwrap();
    let r = check_robin_symmetry(&p, &shifted, 0, None, Some(&[0.5]), &opts).unwrap();
    assert!(r.residual < 1e-8);
    assert!(matches!(
        check_robin_symmetry(&p, &shifted, 0, None, Some(&[0.0]), &opts),
        Err(Error::Parameter(_))
    ));

    let p2 = FracParams::new(2, 0.4).unwrap();
    let d2 = Domain::unit_ball(2);
    let r = check_robin_symmetry(&p2, &d2, 0, Some(1), None, &opts).unwrap();
    assert!(r.residual < 1e-6 && r.passed, "{r:?}");
    let r = check_robin_symmetry(&p2, &d2, 1, None, None, &opts).unwrap();
    assert!(r.passed);
}

#[test]
fn derivative_high_branch() {
    let p = FracParams::new(1, 0.75).unwrap();
    let opts = CheckOptions::default();
    let f = SourceTerm::space(|z| z);
    let sol = solve_linear(&p, &unit(), &f, opts.mesh, &SolverOptions::default()).unwrap();
    for x in [-0.6, -0.3, 0.0, 0.3, 0.6] {
        let r = check_derivative_high_with(&sol, x, &opts).unwrap();
        assert!(r.residual < 1e-3, "x={x}: {r:?}");
    }
    let tr = sol.trace();
    assert!((tr.values[0] + tr.values[1]).abs() < 1e-6);
    let r = check_derivative_high_with(&sol, 0.0, &opts).unwrap();
    let g = fraclap::GreenFunction::new(p, unit()).unwrap();
    let expected = -2.0 * gamma_sq(0.75) * g.trace_at(&[0.0], &[1.0]) * tr.values[1];
    assert!((r.details["boundaryTerm"] - expected).abs() < 1e-9);

    let torsion = solve_linear(&p, &unit(), &SourceTerm::constant(1.0), opts.mesh, &SolverOptions::default()).unwrap();
    for x in [-0.5, 0.2, 0.7] {
        let high = check_derivative_high_with(&torsion, x, &opts).unwrap();
        let closed = check_dedu(&p, &unit(), &[x], 0, &opts).unwrap();
        assert!(high.residual < 1e-3, "{high:?}");
        assert!((scalar(&high.rhs) - scalar(&closed.rhs)).abs() < 2e-3);
        assert!(high.details["volumeTerm"].abs() < 1e-9);
    }
    let low = FracParams::new(1, 0.4).unwrap();
    assert!(matches!(
        check_derivative_high(&low, &unit(), &f, 0.1, &opts),
        Err(Error::Regime(_))
    ));
}

#[test]
fn derivative_low_branch() {
    let opts = CheckOptions::default();
    let f = SourceTerm::semilinear(|x, _| x).with_partials(|_, _| 1.0, |_, _| 0.0);
    for s in [0.4, 0.5] {
        let p = FracParams::new(1, s).unwrap();
        for x in [-0.6, -0.2, 0.2, 0.5] {
            let r = check_derivative_low(&p, &unit(), &f, x, &opts).unwrap();
            assert!(r.residual < 5e-3, "s={s} x={x}: {r:?}");
        }
    }
    let p = FracParams::new(1, 0.5).unwrap();
    let g = SourceTerm::semilinear(|x, q| x - q).with_partials(|_, _| 1.0, |_, _| -1.0);
    let r = check_derivative_low(&p, &unit(), &g, 0.1, &opts).unwrap();
    assert!(r.residual < 5e-3, "{r:?}");

    let c = SourceTerm::semilinear(|_, _| 1.0).with_partials(|_, _| 0.0, |_, _| 0.0);
    let r = check_derivative_low(&p, &unit(), &c, 0.3, &opts).unwrap();
    assert!(r.details["volumeTerm"] == 0.0 && r.residual < 1e-3);

    let bare = SourceTerm::semilinear(|x, _| x);
    assert!(matches!(check_derivative_low(&p, &unit(), &bare, 0.1, &opts), Err(Error::Parameter(_))));
}

#[test]
fn pohozaev_bump_pair() {
    let p = FracParams::new(1, 0.6).unwrap();
    let v = Admissible::bump(0.1, 0.5);
    let r = check_pohozaev(&p, &unit(), &v, &v, &CheckOptions::default()).unwrap();
    assert_eq!(r.details["boundaryTerm"], 0.0);
    assert!(r.residual < 1e-3 && r.passed, "{r:?}");

    let w = Admissible::bump(-0.3, 0.4);
    let r = check_pohozaev(&p, &unit(), &v, &w, &CheckOptions::default()).unwrap();
    assert!(r.residual < 1e-3, "{r:?}");
}

#[test]
fn pohozaev_with_torsion() {
    let p = FracParams::new(1, 0.5).unwrap();
    let d = unit();
    let opts = CheckOptions::default();
    let t = Admissible::torsion(&p, &d).unwrap();
    let r = check_pohozaev(&p, &d, &t, &t, &opts).unwrap();
    assert!(r.residual < 1e-6, "{r:?}");

    let f = SourceTerm::space(|z| z);
    let sol = solve_linear(&p, &d, &f, opts.mesh, &SolverOptions::default()).unwrap();
    let w = Admissible::from_solution(&sol, &f).unwrap();
    let r = check_pohozaev(&p, &d, &t, &w, &opts).unwrap();
    assert!(r.residual < 5e-3, "{r:?}");
}

#[test]
fn green_bounds_sampling() {
    let opts = CheckOptions::default();
    for (p, d) in [
        (FracParams::new(1, 0.25).unwrap(), unit()),
        (FracParams::new(2, 0.6).unwrap(), Domain::unit_ball(2)),
    ] {
        let r = check_green_bounds(&p, &d, 10_000, 11, &opts).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.details["ratioMin"] > 0.0);
    }
    let p = FracParams::new(1, 0.75).unwrap();
    assert!(matches!(check_green_bounds(&p, &unit(), 10, 1, &opts), Err(Error::Regime(_))));
}

#[test]
fn gradient_l1_dichotomy() {
    let opts = CheckOptions::default();
    let hi = FracParams::new(1, 0.75).unwrap();
    let r = check_grad_green_l1(&hi, &unit(), &[0.0], 5, &opts).unwrap();
    assert!(r.passed, "{r:?}");
    let uniform = check_grad_green_l1(&hi, &unit(), &[-0.5, 0.0, 0.7], 5, &opts).unwrap();
    assert!(uniform.passed && uniform.details["maxValue"] < 10.0, "{uniform:?}");

    let lo = FracParams::new(1, 0.25).unwrap();
    let r = check_grad_green_l1(&lo, &unit(), &[0.0], 5, &opts).unwrap();
    assert!(r.passed, "{r:?}");
    // the growth criterion rejects an integrable kernel
    let wrong = check_grad_green_l1(&hi, &unit(), &[0.0], 5, &CheckOptions { tol: Some(0.0), ..opts }).unwrap();
    assert!(!wrong.passed);
}

#[test]
fn perturbed_rhs_fails() {
    let opts = CheckOptions::default();
    let p = FracParams::new(1, 0.5).unwrap();
    let reports = vec![
        check_dedu(&p, &unit(), &[0.3], 0, &opts).unwrap(),
        check_robin_grad(&p, &unit(), &[0.3], 0, &opts).unwrap(),
        check_robin_symmetry(&p, &unit(), 0, None, None, &opts).unwrap(),
        check_green_derivative(&FracParams::new(1, 0.3).unwrap(), &unit(), &[0.1], &[0.5], 0, &opts).unwrap(),
    ];
    for r in reports {
        assert!(r.passed);
        assert_eq!(r.passed, r.residual <= r.tolerance);
        let rhs = scalar(&r.rhs);
        let bad = r.clone().with_rhs(rhs + 10.0 * r.tolerance).unwrap();
        assert!(!bad.passed && bad.residual > bad.tolerance);
    }
}

#[test]
fn report_json_round_trip() {
    let p = FracParams::new(1, 0.5).unwrap();
    let r = check_dedu(&p, &unit(), &[0.5], 0, &CheckOptions::default()).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    for key in ["identity", "params", "lhs", "rhs", "residual", "tolerance", "passed", "runtimeMs"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["identity"], "dedu");
    let back: IdentityReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, r);
    assert_eq!("robin_grad".parse::<Identity>().unwrap(), Identity::RobinGrad);
    assert!("nonsense".parse::<Identity>().is_err());
}

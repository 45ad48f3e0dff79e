use pvburst::burst::{field_sensitivity, handoff, solve_burst, solve_burst_from, GammaConfig, TransformedCurve};
use pvburst::field::FieldSpec;
use pvburst::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn affine() -> FieldSpec {
    FieldSpec::affine(c(0.1, 0.05), c(0.05, 0.02), c(0.02, 0.0), c(0.3, 0.0))
}

#[test]
fn affine_field_certificates() {
    let cfg = GammaConfig::default();
    let sol = solve_burst(&affine(), 1.0, &cfg).unwrap();
    assert!(sol.gamma_residual < cfg.picard_tol, "{}", sol.gamma_residual);
    assert!(sol.ode_residual() < 1e-6);
    assert!(sol.curve.ut_report().holds());
}

#[test]
fn constant_field_is_galilean_drift() {
    let cfg = GammaConfig::default();
    let cst = c(0.3, -0.2);
    let sol = solve_burst(&FieldSpec::Constant(cst), 1.0, &cfg).unwrap();
    let p = sol.params;
    let mut worst = 0.0f64;
    for (i, t) in sol.times().iter().enumerate().skip(1) {
        let w = p.positions_at(*t).unwrap();
        for j in 0..3 {
            worst = worst.max((sol.cartesian[i][j] - w[j] - cst.conj() * *t).norm());
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

// A constant perturbation of size eps shifts the triple by eps·t, so the
// distance is linear in eps and in T.
#[test]
fn sensitivity_is_linear_in_eps_and_t() {
    let f = affine();
    let mut per = vec![];
    for t in [1e-2, 5e-3] {
        for eps in [1e-3, 1e-2, 1e-1] {
            let g = FieldSpec::Composite(vec![f.clone(), FieldSpec::Constant(c(eps, 0.0))]);
            let cfg = GammaConfig { t_final: t, grid_nodes: 256, ..Default::default() };
            let s = field_sensitivity(&f, &g, 1.0, &cfg).unwrap();
            assert!((s.field_distance - eps).abs() < 1e-12 * eps.max(1.0));
            per.push(s.sup_dist / (eps * t));
        }
    }
    for p in &per {
        assert!((p / per[0] - 1.0).abs() < 0.05, "{per:?}");
    }
}

#[test]
fn different_initialisations_agree() {
    let cfg = GammaConfig::default();
    let f = affine();
    let a = solve_burst(&f, 1.0, &cfg).unwrap();
    let mut init = TransformedCurve::self_similar(cfg.grid().unwrap(), a.params.a);
    for i in 0..init.len() {
        let t = init.grid.t(i);
        init.x2[i] = c(0.3 * t, -0.2 * t);
        init.dzeta[i] = 0.5 * t.powf(1.5);
        init.eta[i] = 0.1 * (t - cfg.t_final);
    }
    let b = solve_burst_from(&f, 1.0, &cfg, init).unwrap();
    let d = a.curve.distance(&b.curve);
    assert!(d < 10.0 * cfg.picard_tol, "{d}");
    let h = handoff(&a, 1e-4).unwrap();
    assert_eq!(h.len(), 3);
}

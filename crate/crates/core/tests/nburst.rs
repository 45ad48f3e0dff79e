use pvburst::burst::GammaConfig;
use pvburst::certify::{verify, VerifyConfig};
use pvburst::nburst::{solve_disk_burst, solve_nburst, tstar_bound, NBurstProblem};
use pvburst::vortex::{center_of_vorticity, hamiltonian, moment_of_inertia};
use pvburst::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn problem(xs: Vec<f64>, ys: Vec<Complex64>, xi: f64) -> NBurstProblem {
    let rho = NBurstProblem::max_rho(&ys).min(1.0);
    let probe = NBurstProblem::new(xs.clone(), ys.clone(), xi, rho, 1e-2).unwrap();
    let t = 1e-2f64.min(tstar_bound(&probe));
    NBurstProblem::new(xs, ys, xi, rho, t).unwrap()
}

#[test]
fn background_certificates_and_first_integrals() {
    let cases = [
        problem(vec![0.5, -0.7, 0.3], vec![c(5.0, 1.0), c(-3.0, 4.5), c(0.5, -6.0)], 1.0),
        problem(vec![1.2], vec![c(2.0, -1.0)], -0.6),
        problem(vec![0.4, 0.4, -0.2, 0.9], vec![c(3.0, 0.0), c(0.0, 3.5), c(-4.0, -1.0), c(1.5, -2.5)], 0.8),
    ];
    for prob in &cases {
        let sol = solve_nburst(prob, &GammaConfig::default()).unwrap();
        assert!(sol.background.check(prob).is_ok());
        assert!(sol.residual <= 1e-6, "{}", sol.residual);
        let ch = prob.children();
        assert_eq!(ch[0] + ch[1] + ch[2], prob.xi);

        let seg = &sol.trajectory.segments[1];
        let xs = &seg.intensities;
        let eps = seg.t_end() / 100.0;
        let live: Vec<&Vec<Complex64>> = seg.times.iter().zip(&seg.positions).filter(|(t, _)| **t > eps).map(|(_, z)| z).collect();
        let (h0, i0, c0) = (hamiltonian(xs, live[0]), moment_of_inertia(xs, live[0]), center_of_vorticity(xs, live[0]));
        for z in &live {
            assert!((hamiltonian(xs, z) - h0).abs() <= 1e-6 * h0.abs());
            assert!((moment_of_inertia(xs, z) - i0).abs() <= 1e-6 * i0.abs());
            assert!((center_of_vorticity(xs, z) - c0).norm() <= 1e-6 * c0.norm());
        }
        assert!(verify(&sol.trajectory, &VerifyConfig::default()).passed());
    }
}

#[test]
fn disk_burst_passes_certificates() {
    let sol = solve_disk_burst(c(0.3, -0.2), 0.5, &GammaConfig::default()).unwrap();
    assert!(sol.residual <= 1e-6, "{}", sol.residual);
    let report = verify(&sol.trajectory, &VerifyConfig::default());
    assert!(report.passed(), "{}", report.render());
}

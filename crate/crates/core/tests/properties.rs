use std::f64::consts::PI;

use proptest::prelude::*;

use pvburst::burst::{solve_burst, GammaConfig};
use pvburst::coords::{phi, phi_inv, PolarCoords};
use pvburst::disk::{disk_hamiltonian, rhs_disk};
use pvburst::dynamics::{integrate, simulate, time_reverse, Geometry, IntegrateOptions, SystemSpec};
use pvburst::field::FieldSpec;
use pvburst::io;
use pvburst::markov::{arrival_process, ks_critical, ks_exponential, sample, MarkovScenario};
use pvburst::nburst::lone_burst_events;
use pvburst::selfsimilar::SelfSimilarParams;
use pvburst::vortex::{center_of_vorticity, hamiltonian, moment_of_inertia, rhs_free, VortexConfiguration};
use pvburst::weakform::{diamond_pairing, energy_ledger, h_phi, TestFunction};
use pvburst::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(x, y)| c(x, y))
}

fn intensity() -> impl Strategy<Value = f64> {
    (0.2f64..2.0, any::<bool>()).prop_map(|(m, s)| if s { m } else { -m })
}

/// Configurations whose points are at least `sep` apart.
fn config(n: std::ops::RangeInclusive<usize>, r: f64, sep: f64) -> impl Strategy<Value = (Vec<f64>, Vec<Complex64>)> {
    n.prop_flat_map(move |n| (prop::collection::vec(intensity(), n), prop::collection::vec(point(r), n)))
        .prop_filter("points too close", move |(_, z)| {
            (0..z.len()).all(|j| (j + 1..z.len()).all(|k| (z[j] - z[k]).norm() >= sep))
        })
}

fn rotate(z: &[Complex64], rot: Complex64, shift: Complex64) -> Vec<Complex64> {
    z.iter().map(|p| rot * p + shift).collect()
}

fn vmax(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_is_translation_invariant((xs, z) in config(2..=8, 2.0, 0.05), shift in point(10.0)) {
        let v = rhs_free(&xs, &z).unwrap();
        let w = rhs_free(&xs, &rotate(&z, c(1.0, 0.0), shift)).unwrap();
        // shifting rounds each coordinate once, relative to the shift size
        let tol = 1e-14 * (1.0 + shift.norm()) / 0.05 * vmax(&v);
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((a - b).norm() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn rhs_conserves_center_of_vorticity((xs, z) in config(2..=8, 2.0, 0.05)) {
        let v = rhs_free(&xs, &z).unwrap();
        let s: Complex64 = xs.iter().zip(&v).map(|(x, w)| w * x).sum();
        let scale: f64 = xs.iter().zip(&v).map(|(x, w)| x.abs() * w.norm()).sum();
        prop_assert!(s.norm() <= 1e-12 * scale, "{s} against {scale}");
    }

    #[test]
    fn invariants_under_rigid_motion((xs, z) in config(2..=8, 2.0, 0.05), angle in 0.0..2.0 * PI, shift in point(5.0)) {
        let rot = Complex64::from_polar(1.0, angle);
        let h = hamiltonian(&xs, &z);
        let moved = rotate(&z, rot, shift);
        let h_scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().powi(2);
        prop_assert!((hamiltonian(&xs, &moved) - h).abs() <= 1e-13 * h_scale);
        // I is rotation invariant; under translation it changes unless Σξ = 0
        let i = moment_of_inertia(&xs, &z);
        let i_rot = moment_of_inertia(&xs, &rotate(&z, rot, c(0.0, 0.0)));
        prop_assert!((i_rot - i).abs() <= 1e-13 * h_scale * 8.0);
    }

    #[test]
    fn self_similar_relation_holds(e in -3.0f64..3.0, neg in any::<bool>()) {
        let xi = if neg { -(10f64.powf(e)) } else { 10f64.powf(e) };
        let p = SelfSimilarParams::for_intensity(xi).unwrap();
        prop_assert!(p.asrelation_residual() <= 1e-12 * xi.abs().max(1.0));
        let xs = p.intensities();
        prop_assert_eq!(xs.iter().sum::<f64>(), xi);
        let shape = p.shape();
        let scale = xi * xi * shape.iter().map(|a| a.norm_sqr()).sum::<f64>();
        prop_assert!(moment_of_inertia(&xs, &shape).abs() <= 1e-12 * scale);
        for t in [1e-6, 1e-3, 0.37] {
            prop_assert!(p.free_ode_residual(t).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn polar_coordinates_round_trip(
        xi in intensity(),
        t in 1e-4f64..1.0,
        angle in 0.0..2.0 * PI,
        dz in prop::collection::vec(point(0.2), 3),
    ) {
        let p = SelfSimilarParams::for_intensity(xi).unwrap();
        let w = p.positions_at(t).unwrap();
        let scale = w[0].norm();
        let rot = Complex64::from_polar(1.0, angle);
        let z = [0, 1, 2].map(|j| rot * (w[j] + dz[j] * scale));
        let pc = phi(&p, z).unwrap();
        let back = phi_inv(&p, &pc).unwrap();
        for j in 0..3 {
            prop_assert!((back[j] - z[j]).norm() <= 1e-13 * scale * 4.0, "{} vs {}", back[j], z[j]);
        }
        let again = phi(&p, back).unwrap();
        let d = PolarCoords { r: again.r - pc.r, theta: again.theta - pc.theta, x2: again.x2 - pc.x2, x3: again.x3 - pc.x3 };
        let dtheta = d.theta.rem_euclid(2.0 * PI).min((-d.theta).rem_euclid(2.0 * PI));
        prop_assert!(d.r.abs() <= 1e-13 * pc.r && dtheta <= 1e-13 && d.x2.norm() <= 1e-13 && d.x3.norm() <= 1e-13);
    }

    #[test]
    fn h_phi_symmetric_and_bounded(center in point(1.0), radius in 0.05f64..2.0, x in point(2.0), y in point(2.0)) {
        prop_assume!(x != y);
        let phi = TestFunction::new(center, radius).unwrap();
        let a = h_phi(&phi, x, y).unwrap();
        let b = h_phi(&phi, y, x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.abs() <= phi.gradient_lipschitz() / (4.0 * PI) * (1.0 + 1e-12));
        if (x - center).norm() >= radius && (y - center).norm() >= radius {
            prop_assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn diamond_matches_ordered_pair_loop((xs, z) in config(2..=10, 1.5, 1e-3), center in point(1.0), radius in 0.1f64..2.0) {
        let phi = TestFunction::new(center, radius).unwrap();
        let cfg = VortexConfiguration::new(xs.clone(), z.clone()).unwrap();
        let got = diamond_pairing(&phi, &cfg);
        let mut want = 0.0;
        let mut scale = 0.0;
        for j in 0..z.len() {
            for k in 0..z.len() {
                if j != k {
                    let term = xs[j] * xs[k] * h_phi(&phi, z[j], z[k]).unwrap();
                    want += term;
                    scale += term.abs();
                }
            }
        }
        prop_assert!((got - want).abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE), "{got} vs {want}");
    }
}

fn plane_spec(xs: Vec<f64>, z: Vec<Complex64>) -> SystemSpec {
    SystemSpec::plane(VortexConfiguration::new(xs, z).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // same-sign intensities cannot collapse
    #[test]
    fn plane_integration_conserves_invariants(
        n in 3usize..=6,
        mags in prop::collection::vec(0.2f64..1.0, 6),
        z in prop::collection::vec(point(1.0), 6),
        sign in any::<bool>(),
    ) {
        let z = z[..n].to_vec();
        prop_assume!((0..n).all(|j| (j + 1..n).all(|k| (z[j] - z[k]).norm() >= 0.3)));
        let s = if sign { 1.0 } else { -1.0 };
        let xs: Vec<f64> = mags[..n].iter().map(|m| s * m).collect();
        let traj = integrate(&plane_spec(xs.clone(), z), (0.0, 1.0), &IntegrateOptions::default()).unwrap();
        let first = &traj.positions[0];
        let last = traj.positions.last().unwrap();
        let h0 = hamiltonian(&xs, first);
        let i0 = moment_of_inertia(&xs, first);
        let c0 = center_of_vorticity(&xs, first);
        prop_assert!((hamiltonian(&xs, last) - h0).abs() <= 1e-8 * h0.abs().max(1e-3));
        prop_assert!((moment_of_inertia(&xs, last) - i0).abs() <= 1e-8 * i0.abs());
        prop_assert!((center_of_vorticity(&xs, last) - c0).norm() <= 1e-8 * c0.norm().max(1.0));
    }

    #[test]
    fn plane_integration_is_rotation_equivariant((xs, z) in config(3..=5, 1.0, 0.4), angle in 0.0..2.0 * PI, shift in point(2.0)) {
        prop_assume!(xs.iter().all(|x| *x > 0.0) || xs.iter().all(|x| *x < 0.0));
        let rot = Complex64::from_polar(1.0, angle);
        // the step controller sees only norms, so both runs take nearly the same steps
        let opts = IntegrateOptions::default();
        let a = integrate(&plane_spec(xs.clone(), z.clone()), (0.0, 1.0), &opts).unwrap();
        let b = integrate(&plane_spec(xs.clone(), rotate(&z, rot, shift)), (0.0, 1.0), &opts).unwrap();
        let pa = a.position_at(1.0).unwrap();
        let pb = b.position_at(1.0).unwrap();
        for (p, q) in pa.iter().zip(&pb) {
            prop_assert!((rot * p + shift - q).norm() <= 1e-9 * (1.0 + shift.norm()), "{} vs {}", rot * p + shift, q);
        }
    }

    #[test]
    fn disk_integration_conserves_hamiltonian(
        n in 2usize..=4,
        mags in prop::collection::vec(0.2f64..1.0, 4),
        rs in prop::collection::vec(0.1f64..0.6, 4),
        angles in prop::collection::vec(0.0..2.0 * PI, 4),
    ) {
        let z: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(rs[j], angles[j])).collect();
        prop_assume!((0..n).all(|j| (j + 1..n).all(|k| (z[j] - z[k]).norm() >= 0.2)));
        let xs = mags[..n].to_vec();
        prop_assert!(rhs_disk(&xs, &z).is_ok());
        let cfg = VortexConfiguration::new(xs.clone(), z).unwrap();
        let spec = SystemSpec::new(Geometry::Disk, None, cfg).unwrap();
        let traj = integrate(&spec, (0.0, 1.0), &IntegrateOptions::default()).unwrap();
        let h0 = disk_hamiltonian(&xs, &traj.positions[0]);
        let h1 = disk_hamiltonian(&xs, traj.positions.last().unwrap());
        prop_assert!((h1 - h0).abs() <= 1e-7 * h0.abs().max(1e-3), "{h0} -> {h1}");
    }

    #[test]
    fn reversal_is_an_involution_and_files_round_trip((xs, z) in config(3..=5, 1.0, 0.3)) {
        let traj = simulate(&plane_spec(xs, z), (0.0, 0.2), &IntegrateOptions::default()).unwrap();
        prop_assert_eq!(&time_reverse(&time_reverse(&traj)), &traj);
        let back = io::read_str(&io::write_string(&traj)).unwrap();
        prop_assert_eq!(&back, &traj);
        let rev = time_reverse(&traj);
        prop_assert_eq!(&io::read_str(&io::write_string(&rev)).unwrap(), &rev);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn burst_reversal_flips_energy_jump(xi in intensity(), origin in point(1.0)) {
        let cfg = GammaConfig { grid_nodes: 128, ..Default::default() };
        let sol = solve_burst(&FieldSpec::Zero, xi, &cfg).unwrap();
        let traj = lone_burst_events(&sol, origin);
        let fwd = energy_ledger(&traj).total_jump();
        let back = energy_ledger(&time_reverse(&traj)).total_jump();
        prop_assert!((fwd + back).abs() <= 1e-6 * xi * xi);
        prop_assert!((fwd + 0.0292378 * xi * xi).abs() <= 1e-7 * xi * xi, "{fwd}");
    }

    #[test]
    fn burst_start_stays_in_the_self_similar_envelope(xi in intensity(), eps in 0.0f64..0.2) {
        let f = FieldSpec::affine(c(eps, -eps), c(0.0, 0.0), c(eps / 2.0, 0.0), c(0.0, eps));
        let sol = solve_burst(&f, xi, &GammaConfig::default()).unwrap();
        let p = sol.params;
        let t1 = sol.times()[1];
        let a = p.shape();
        for j in 0..3 {
            let r = (sol.cartesian[1][j] - sol.shift.conj() * t1).norm();
            prop_assert!(r <= 2.0 * a[j].norm() * (2.0 * p.a * t1).sqrt(), "vortex {j}: {r}");
        }
    }

    #[test]
    fn markov_samples_are_deterministic_and_count_vortices(seed in any::<u64>()) {
        let initial = VortexConfiguration::new(vec![1.0, -0.5, 0.7], vec![c(0.0, 0.0), c(1.0, 0.2), c(-0.6, 0.8)]).unwrap();
        let sc = MarkovScenario::new(initial, 2.0, 0.5, seed, 1e-2).unwrap();
        let a = sample(&sc);
        prop_assert_eq!(&a, &sample(&sc));
        prop_assert!(a.is_complete(), "{:?}", a.failure);
        let counts = a.vortex_counts();
        let traj = &a.trajectory;
        prop_assert!(traj.validate().is_ok());
        prop_assert_eq!(counts.len(), traj.events.len() + 1);
        for (k, e) in traj.events.iter().enumerate() {
            let delta: isize = e.groups.iter().map(|g| match e.kind {
                pvburst::dynamics::EventKind::Burst => g.many.len() as isize - 1,
                pvburst::dynamics::EventKind::Merge => 1 - g.many.len() as isize,
            }).sum();
            prop_assert_eq!(counts[k + 1].1 as isize - counts[k].1 as isize, delta);
            if e.kind == pvburst::dynamics::EventKind::Burst {
                prop_assert_eq!(delta, 2);
            }
        }
        let bursts = traj.events.iter().filter(|e| e.kind == pvburst::dynamics::EventKind::Burst).count();
        prop_assert_eq!(bursts, a.burst_count());
        prop_assert_eq!(a.burst_count(), a.arrivals.len());
    }
}

#[test]
fn inter_arrivals_pass_ks_over_ten_thousand_seeds() {
    let lambda = 2.0;
    let draws: Vec<f64> = (0..10_000u64).map(|s| arrival_process(s, lambda, 1.0).1[0]).collect();
    let d = ks_exponential(&draws, lambda);
    assert!(d < ks_critical(draws.len(), 0.01), "{d}");
}

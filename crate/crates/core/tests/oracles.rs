// Reference constants computed independently at 30 digits (mpmath) and frozen
// here to double precision.

use std::f64::consts::PI;

use pvburst::burst::{solve_burst, GammaConfig};
use pvburst::disk::rhs_disk;
use pvburst::field::FieldSpec;
use pvburst::nburst::lone_burst_events;
use pvburst::selfsimilar::SelfSimilarParams;
use pvburst::vortex::hamiltonian;
use pvburst::weakform::energy_ledger;
use pvburst::Complex64;

const A_UNIT: f64 = 0.006_563_439_231_211_81;
const B_UNIT: f64 = 0.018_947_017_034_749_445;
// b² − a² and −a²b² for ξ = 1
const DISC1: f64 = 3.159_107_199_732_754e-4;
const DISC2: f64 = -1.546_481_141_436_465e-8;
const TRIPLE_ENERGY: f64 = -0.029_237_773_615_658_495;
const DISK_SPEED_04: f64 = 0.075_788_068_138_997_78;

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

#[test]
fn rotation_and_growth_rates() {
    for xi in [1.0, -1.0, 7.5, -0.01] {
        let p = SelfSimilarParams::for_intensity(xi).unwrap();
        assert!(close(p.a, A_UNIT * xi.abs(), 1e-15), "{xi}: a = {}", p.a);
        assert!(close(p.b, B_UNIT * xi, 1e-15), "{xi}: b = {}", p.b);
    }
}

#[test]
fn linearisation_spectrum() {
    let p = SelfSimilarParams::for_intensity(1.0).unwrap();
    let (d1, d2) = p.eigen_discriminants();
    assert!(close(d1, DISC1, 1e-12), "{d1}");
    assert!(close(d2, DISC2, 1e-12), "{d2}");
    let mut want = [
        Complex64::new(0.0, 0.0),
        Complex64::new(-2.0 * A_UNIT, 0.0),
        Complex64::new(-A_UNIT, B_UNIT),
        Complex64::new(-A_UNIT, -B_UNIT),
    ];
    for e in p.build_l().eigenvalues() {
        let (k, d) = want.iter().enumerate().map(|(k, w)| (k, (w - e).norm())).fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        assert!(d < 1e-14, "{e} has no match");
        want[k] = Complex64::new(f64::NAN, f64::NAN);
    }
}

#[test]
fn burst_energy_jump() {
    for xi in [1.0, -2.0] {
        let p = SelfSimilarParams::for_intensity(xi).unwrap();
        let h = hamiltonian(&p.intensities(), &p.shape());
        assert!(close(h, TRIPLE_ENERGY * xi * xi, 1e-14), "{h}");
        let sol = solve_burst(&FieldSpec::Zero, xi, &GammaConfig { grid_nodes: 128, ..Default::default() }).unwrap();
        let jump = energy_ledger(&lone_burst_events(&sol, Complex64::new(0.3, 0.0))).total_jump();
        assert!(close(jump, TRIPLE_ENERGY * xi * xi, 1e-9), "{jump}");
    }
}

#[test]
fn planar_normalisation() {
    let e = std::f64::consts::E;
    let h = hamiltonian(&[1.0, 1.0], &[Complex64::new(0.0, 0.0), Complex64::new(e, 0.0)]);
    assert!(close(h, -1.0 / PI, 1e-15), "{h}");
}

#[test]
fn disk_image_drift() {
    let v = rhs_disk(&[1.0], &[Complex64::new(0.4, 0.0)]).unwrap()[0];
    assert!(v.re.abs() < 1e-16);
    assert!(close(v.im, DISK_SPEED_04, 1e-14), "{v}");
}

//! Certificate checks on a finished trajectory: event bookkeeping, invariant
//! drift on every smooth segment, the weak-residual battery and the energy
//! ledger.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::disk::disk_hamiltonian;
use crate::dynamics::{EventTrajectory, Geometry, Trajectory};
use crate::vortex::{center_of_vorticity, hamiltonian, moment_of_inertia};
use crate::weakform::{energy_ledger, standard_battery, weak_residual, EnergyLedger, WeakResidualReport};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Bound on every weak residual of the battery.
    pub weak_tol: f64,
    /// Bound on the scaled drift of H, I and |C|² within a segment.
    pub drift_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { weak_tol: 1e-5, drift_tol: 1e-6 }
    }
}

/// Drift of (H, I, |C|²) over a segment. Each is divided by the larger of
/// its initial size and a natural scale built from |ξ_j ξ_k| and the
/// segment's largest separation, so invariants that vanish (I and C of a
/// burst triple) are not divided by zero.
pub fn scaled_drift(seg: &Trajectory) -> [f64; 3] {
    let xs = &seg.intensities;
    let n = xs.len();
    let mut diam = 0.0f64;
    for z in &seg.positions {
        for j in 0..n {
            for k in j + 1..n {
                diam = diam.max((z[j] - z[k]).norm());
            }
        }
        if seg.geometry == Geometry::Plane {
            for w in z {
                diam = diam.max(w.norm());
            }
        }
    }
    let pairs: f64 = (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).map(|(j, k)| (xs[j] * xs[k]).abs()).sum();
    let abs_sum: f64 = xs.iter().map(|x| x.abs()).sum();
    let h = |z: &[_]| match seg.geometry {
        Geometry::Plane => hamiltonian(xs, z),
        Geometry::Disk => disk_hamiltonian(xs, z),
    };
    let f = |z: &[_]| [h(z), moment_of_inertia(xs, z), center_of_vorticity(xs, z).norm_sqr()];
    let v0 = f(&seg.positions[0]);
    let scales = [pairs / std::f64::consts::PI, 2.0 * pairs * diam * diam, (abs_sum * diam).powi(2)];
    let mut out = [0.0f64; 3];
    for z in &seg.positions {
        let v = f(z);
        for m in 0..3 {
            let d = (v[m] - v0[m]).abs() / v0[m].abs().max(scales[m]).max(1e-300);
            out[m] = out[m].max(d);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    /// Name of the failing certificate.
    pub invariant: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub drift: Vec<[f64; 3]>,
    pub weak: WeakResidualReport,
    pub ledger: EnergyLedger,
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "segments {}", self.drift.len()).unwrap();
        for (k, d) in self.drift.iter().enumerate() {
            writeln!(s, "segment {k} drift H {:.3e} I {:.3e} |C|^2 {:.3e}", d[0], d[1], d[2]).unwrap();
        }
        let worst = self.weak.worst();
        writeln!(
            s,
            "weak residual max {:.3e} (quadrature error {:.3e}, {} test functions, {} checks){}",
            self.weak.max_residual(),
            self.weak.max_quad_error(),
            self.weak.phis.len(),
            self.weak.entries.len(),
            worst.map(|w| format!(" worst at t = {:.6e} phi {}", w.t, w.phi)).unwrap_or_default()
        )
        .unwrap();
        for seg in &self.ledger.segments {
            writeln!(s, "energy [{:.6e}, {:.6e}] H = {:.10e} variation {:.3e}", seg.t0, seg.t1, seg.value, seg.variation)
                .unwrap();
        }
        for j in &self.ledger.jumps {
            writeln!(
                s,
                "energy jump {:?} at t = {:.6e}: {:.10e} -> {:.10e} (jump {:.10e})",
                j.kind, j.time, j.before, j.after, j.jump
            )
            .unwrap();
        }
        if self.failures.is_empty() {
            writeln!(s, "all certificates pass").unwrap();
        }
        for f in &self.failures {
            writeln!(s, "FAILED {}: {}", f.invariant, f.detail).unwrap();
        }
        s
    }
}

pub fn verify(traj: &EventTrajectory, cfg: &VerifyConfig) -> VerifyReport {
    let mut failures = vec![];
    if let Err(e) = traj.validate() {
        failures.push(Failure { invariant: "event bookkeeping", detail: e.to_string() });
    }
    let drift: Vec<[f64; 3]> = traj.segments.iter().map(scaled_drift).collect();
    const NAMES: [&str; 3] = ["Hamiltonian drift", "moment of inertia drift", "center of vorticity drift"];
    for (k, d) in drift.iter().enumerate() {
        for m in 0..3 {
            // the disk conserves only H
            if traj.segments[k].geometry == Geometry::Disk && m > 0 {
                continue;
            }
            if !(d[m] <= cfg.drift_tol) {
                failures.push(Failure {
                    invariant: NAMES[m],
                    detail: format!("segment {k}: {:.3e} exceeds {:.1e}", d[m], cfg.drift_tol),
                });
            }
        }
    }
    let weak = weak_residual(traj, &standard_battery(traj), &[]);
    let w = weak.max_residual();
    if !(w <= cfg.weak_tol) {
        let at = weak.worst().map(|e| format!(" at t = {:.6e}", e.t)).unwrap_or_default();
        failures.push(Failure { invariant: "weak residual", detail: format!("{w:.3e} exceeds {:.1e}{at}", cfg.weak_tol) });
    }
    let ledger = energy_ledger(traj);
    if ledger.jumps.iter().any(|j| !j.jump.is_finite()) {
        failures.push(Failure { invariant: "energy ledger", detail: "non-finite jump".into() });
    }
    VerifyReport { config: *cfg, drift, weak, ledger, failures }
}

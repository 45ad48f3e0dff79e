//! Vortex configurations, the free Biot–Savart velocity field and the
//! first integrals H, I and C.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point of the plane, identified with a complex number.
pub type ComplexPoint = Complex64;

/// Intensities and pairwise distinct positions of a finite set of vortices.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfiguration {
    intensities: Vec<f64>,
    positions: Vec<ComplexPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub hamiltonian: f64,
    pub moment_of_inertia: f64,
    pub center_of_vorticity: ComplexPoint,
    pub total_circulation: f64,
}

impl VortexConfiguration {
    pub fn new(intensities: Vec<f64>, positions: Vec<ComplexPoint>) -> Result<Self> {
        if intensities.is_empty() {
            return Err(Error::InvalidArgument("configuration must hold at least one vortex".into()));
        }
        if intensities.len() != positions.len() {
            return Err(Error::InvalidArgument(format!(
                "{} intensities but {} positions",
                intensities.len(),
                positions.len()
            )));
        }
        for (j, xi) in intensities.iter().enumerate() {
            if *xi == 0.0 || !xi.is_finite() {
                return Err(Error::InvalidIntensity(format!("vortex {j} has intensity {xi}")));
            }
        }
        for (j, z) in positions.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidArgument(format!("vortex {j} has non-finite position")));
            }
        }
        check_distinct(&positions)?;
        Ok(Self { intensities, positions })
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn positions(&self) -> &[ComplexPoint] {
        &self.positions
    }

    pub fn with_positions(&self, positions: Vec<ComplexPoint>) -> Result<Self> {
        Self::new(self.intensities.clone(), positions)
    }

    pub fn rhs_free(&self) -> Vec<ComplexPoint> {
        free_velocities(&self.intensities, &self.positions)
    }

    pub fn hamiltonian(&self) -> f64 {
        hamiltonian(&self.intensities, &self.positions)
    }

    pub fn moment_of_inertia(&self) -> f64 {
        moment_of_inertia(&self.intensities, &self.positions)
    }

    pub fn center_of_vorticity(&self) -> ComplexPoint {
        center_of_vorticity(&self.intensities, &self.positions)
    }

    pub fn total_circulation(&self) -> f64 {
        self.intensities.iter().sum()
    }

    pub fn invariants(&self) -> InvariantReport {
        InvariantReport {
            hamiltonian: self.hamiltonian(),
            moment_of_inertia: self.moment_of_inertia(),
            center_of_vorticity: self.center_of_vorticity(),
            total_circulation: self.total_circulation(),
        }
    }

    pub fn min_distance(&self) -> f64 {
        min_distance(&self.positions)
    }
}

fn check_distinct(positions: &[ComplexPoint]) -> Result<()> {
    for j in 0..positions.len() {
        for k in j + 1..positions.len() {
            if positions[j] == positions[k] {
                return Err(Error::SingularInput(format!("vortices {j} and {k} coincide")));
            }
        }
    }
    Ok(())
}

/// Velocity induced at `p` by unit vorticity at `q`: `i / (2π conj(p − q))`.
#[inline]
pub fn kernel(p: ComplexPoint, q: ComplexPoint) -> ComplexPoint {
    let w = p - q;
    Complex64::i() * w / (2.0 * PI * w.norm_sqr())
}

/// dz_j/dt of the free system. Positions are assumed distinct.
pub fn free_velocities(intensities: &[f64], positions: &[ComplexPoint]) -> Vec<ComplexPoint> {
    let n = positions.len();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for k in j + 1..n {
            let w = positions[j] - positions[k];
            let kw = Complex64::i() * w / (2.0 * PI * w.norm_sqr());
            v[j] += intensities[k] * kw;
            v[k] -= intensities[j] * kw;
        }
    }
    v
}

/// Checked variant of [`free_velocities`] for raw slices.
pub fn rhs_free(intensities: &[f64], positions: &[ComplexPoint]) -> Result<Vec<ComplexPoint>> {
    if intensities.len() != positions.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    check_distinct(positions)?;
    Ok(free_velocities(intensities, positions))
}

/// Velocity induced at an arbitrary point `p` by the vortices.
pub fn velocity_at(intensities: &[f64], positions: &[ComplexPoint], p: ComplexPoint) -> ComplexPoint {
    intensities
        .iter()
        .zip(positions)
        .map(|(xi, q)| *xi * kernel(p, *q))
        .sum()
}

pub fn hamiltonian(intensities: &[f64], positions: &[ComplexPoint]) -> f64 {
    let n = positions.len();
    let mut s = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            s += intensities[j] * intensities[k] * (positions[j] - positions[k]).norm().ln();
        }
    }
    // ordered pairs count each unordered pair twice
    -s / PI
}

pub fn moment_of_inertia(intensities: &[f64], positions: &[ComplexPoint]) -> f64 {
    let n = positions.len();
    let mut s = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            s += intensities[j] * intensities[k] * (positions[j] - positions[k]).norm_sqr();
        }
    }
    2.0 * s
}

pub fn center_of_vorticity(intensities: &[f64], positions: &[ComplexPoint]) -> ComplexPoint {
    intensities.iter().zip(positions).map(|(xi, z)| *xi * z).sum()
}

/// Σ_{j≠k} ξ_j ξ_k over ordered pairs.
pub fn pair_sum(intensities: &[f64]) -> f64 {
    let total: f64 = intensities.iter().sum();
    let squares: f64 = intensities.iter().map(|x| x * x).sum();
    total * total - squares
}

/// Necessary conditions for a group to collapse to (or burst from) one point:
/// vanishing pairwise product sum and nonzero total intensity.
pub fn collapse_admissible(intensities: &[f64]) -> bool {
    collapse_admissible_tol(intensities, 1e-12)
}

pub fn collapse_admissible_tol(intensities: &[f64], tol: f64) -> bool {
    if intensities.len() < 2 {
        return false;
    }
    let scale: f64 = intensities.iter().map(|x| x * x).sum();
    let total: f64 = intensities.iter().sum();
    pair_sum(intensities).abs() <= tol * scale && total.abs() > tol * scale.sqrt()
}

pub fn min_distance(positions: &[ComplexPoint]) -> f64 {
    let mut d = f64::INFINITY;
    for j in 0..positions.len() {
        for k in j + 1..positions.len() {
            d = d.min((positions[j] - positions[k]).norm());
        }
    }
    d
}

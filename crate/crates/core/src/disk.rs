//! Unit-disk geometry: regular part of the Dirichlet Green function by the
//! method of images.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vortex::{free_velocities, ComplexPoint};

fn inside(x: ComplexPoint, name: &str) -> Result<()> {
    if x.norm_sqr() >= 1.0 {
        return Err(Error::OutOfDomain(format!("{name} = {x} is not inside the unit disk")));
    }
    Ok(())
}

#[inline]
fn q(x: ComplexPoint, y: ComplexPoint) -> f64 {
    x.norm_sqr() * y.norm_sqr() - 2.0 * (x * y.conj()).re + 1.0
}

/// γ(x,y) = (1/2π) log(|y| |x − y/|y|²|), with γ(x,0) = 0.
pub fn disk_gamma(x: ComplexPoint, y: ComplexPoint) -> Result<f64> {
    inside(x, "x")?;
    inside(y, "y")?;
    Ok(gamma_unchecked(x, y))
}

/// γ(x, y) with x allowed on the boundary circle, where it equals
/// (1/2π) log|x − y|.
pub fn disk_gamma_closed(x: ComplexPoint, y: ComplexPoint) -> Result<f64> {
    if x.norm() > 1.0 + 1e-15 {
        return Err(Error::OutOfDomain(format!("x = {x} is outside the closed unit disk")));
    }
    inside(y, "y")?;
    Ok(gamma_unchecked(x, y))
}

#[inline]
pub(crate) fn gamma_unchecked(x: ComplexPoint, y: ComplexPoint) -> f64 {
    q(x, y).ln() / (4.0 * PI)
}

/// ∇_x γ(x,y) as a complex number (∂₁ + i∂₂).
pub fn disk_gamma_grad_x(x: ComplexPoint, y: ComplexPoint) -> Result<ComplexPoint> {
    inside(x, "x")?;
    inside(y, "y")?;
    Ok(grad_unchecked(x, y))
}

#[inline]
pub(crate) fn grad_unchecked(x: ComplexPoint, y: ComplexPoint) -> ComplexPoint {
    (x * y.norm_sqr() - y) / (2.0 * PI * q(x, y))
}

/// Velocity at `p` induced by the boundary: −Σ_k ξ_k ∇⊥_x γ(p, z_k).
pub fn image_velocity(intensities: &[f64], positions: &[ComplexPoint], p: ComplexPoint) -> ComplexPoint {
    let s: Complex64 = intensities
        .iter()
        .zip(positions)
        .map(|(xi, z)| *xi * grad_unchecked(p, *z))
        .sum();
    -Complex64::i() * s
}

/// Disk velocities: free interaction plus the image part, self term included.
pub fn rhs_disk(intensities: &[f64], positions: &[ComplexPoint]) -> Result<Vec<ComplexPoint>> {
    for z in positions {
        inside(*z, "vortex")?;
    }
    Ok(disk_velocities(intensities, positions))
}

pub(crate) fn disk_velocities(intensities: &[f64], positions: &[ComplexPoint]) -> Vec<ComplexPoint> {
    let mut v = free_velocities(intensities, positions);
    for (j, z) in positions.iter().enumerate() {
        v[j] += image_velocity(intensities, positions, *z);
    }
    v
}

/// Conserved energy of the disk system.
pub fn disk_hamiltonian(intensities: &[f64], positions: &[ComplexPoint]) -> f64 {
    let mut h = crate::vortex::hamiltonian(intensities, positions);
    for (j, zj) in positions.iter().enumerate() {
        for (k, zk) in positions.iter().enumerate() {
            h += intensities[j] * intensities[k] * gamma_unchecked(*zj, *zk);
        }
    }
    h
}

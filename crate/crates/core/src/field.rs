//! External fields f(t, p). A field enters the equations on the conjugate
//! side, conj(dz/dt) = (free part) + f(t, z), so it moves a vortex with
//! velocity conj(f).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::disk;
use crate::grid::GridCurve;
use crate::vortex::ComplexPoint;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(ComplexPoint),
    /// c + holo·p + anti·p̄ + drift·t
    Affine {
        c: ComplexPoint,
        holo: ComplexPoint,
        anti: ComplexPoint,
        drift: ComplexPoint,
    },
    /// (1/2πi) Σ ζ_k/(p − y_k(t)), multiplied by a smooth cutoff equal to 1
    /// on |p| ≤ cutoff and 0 on |p| ≥ 2·cutoff.
    VortexBackground {
        intensities: Vec<f64>,
        curve: GridCurve,
        cutoff: f64,
    },
    /// Conjugate of the unit-disk image velocity at origin + p, generated by
    /// vortices at origin + z_k(t).
    DiskBoundary {
        intensities: Vec<f64>,
        curve: GridCurve,
        origin: ComplexPoint,
    },
    Composite(Vec<FieldSpec>),
    /// f(t, p + conj(value)·t) − value
    Shifted { inner: Box<FieldSpec>, value: ComplexPoint },
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let e0 = (-1.0 / x).exp();
    let e1 = (-1.0 / (1.0 - x)).exp();
    e0 / (e0 + e1)
}

/// 1 on r ≤ rho, 0 on r ≥ 2 rho.
pub fn cutoff(r: f64, rho: f64) -> f64 {
    smooth_step(2.0 - r / rho)
}

impl FieldSpec {
    pub fn affine(c: ComplexPoint, holo: ComplexPoint, anti: ComplexPoint, drift: ComplexPoint) -> Self {
        FieldSpec::Affine { c, holo, anti, drift }
    }

    pub fn eval(&self, t: f64, p: ComplexPoint) -> ComplexPoint {
        match self {
            FieldSpec::Zero => Complex64::new(0.0, 0.0),
            FieldSpec::Constant(c) => *c,
            FieldSpec::Affine { c, holo, anti, drift } => c + holo * p + anti * p.conj() + drift * t,
            FieldSpec::VortexBackground { intensities, curve, cutoff: rho } => {
                let chi = cutoff(p.norm(), *rho);
                if chi == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let ys = curve.at(t);
                let s: Complex64 = intensities.iter().zip(&ys).map(|(z, y)| *z / (p - y)).sum();
                chi * s / (2.0 * PI * Complex64::i())
            }
            FieldSpec::DiskBoundary { intensities, curve, origin } => {
                let zs: Vec<Complex64> = curve.at(t).iter().map(|z| origin + z).collect();
                disk::image_velocity(intensities, &zs, origin + p).conj()
            }
            FieldSpec::Composite(parts) => parts.iter().map(|f| f.eval(t, p)).sum(),
            FieldSpec::Shifted { inner, value } => inner.eval(t, p + value.conj() * t) - value,
        }
    }

    /// Velocity contribution conj(f(t,p)).
    pub fn velocity(&self, t: f64, p: ComplexPoint) -> ComplexPoint {
        self.eval(t, p).conj()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldSpec::Zero => true,
            FieldSpec::Constant(c) => *c == Complex64::new(0.0, 0.0),
            FieldSpec::Composite(parts) => parts.iter().all(|f| f.is_zero()),
            _ => false,
        }
    }

    /// Sampled E_T-type bound on |p| ≤ radius, t ∈ [0, t_max]: sup |f| +
    /// sup |Df| + sup |D²f| + time-Lipschitz constant, by finite differences.
    pub fn bound_m(&self, radius: f64, t_max: f64) -> f64 {
        let nr = 8;
        let na = 16;
        let nt = 6;
        let h = 1e-4 * radius.max(1e-3);
        let mut m0 = 0.0f64;
        let mut m1 = 0.0f64;
        let mut m2 = 0.0f64;
        let mut lip = 0.0f64;
        for it in 0..=nt {
            let t = t_max * it as f64 / nt as f64;
            for ir in 0..=nr {
                let r = radius * ir as f64 / nr as f64;
                for ia in 0..na {
                    let p = Complex64::from_polar(r, 2.0 * PI * ia as f64 / na as f64);
                    let f0 = self.eval(t, p);
                    m0 = m0.max(f0.norm());
                    let dx = (self.eval(t, p + h) - self.eval(t, p - h)) / (2.0 * h);
                    let ih = Complex64::new(0.0, h);
                    let dy = (self.eval(t, p + ih) - self.eval(t, p - ih)) / (2.0 * h);
                    m1 = m1.max((dx.norm_sqr() + dy.norm_sqr()).sqrt());
                    let dxx = (self.eval(t, p + h) - 2.0 * f0 + self.eval(t, p - h)) / (h * h);
                    let dyy = (self.eval(t, p + ih) - 2.0 * f0 + self.eval(t, p - ih)) / (h * h);
                    m2 = m2.max((dxx.norm_sqr() + dyy.norm_sqr()).sqrt());
                    if it < nt {
                        let dt = t_max / nt as f64;
                        lip = lip.max((self.eval(t + dt, p) - f0).norm() / dt);
                    }
                    if ir == 0 {
                        break;
                    }
                }
            }
        }
        m0 + m1 + m2 + lip
    }
}

/// Galilean normalisation: returns f̃(t,p) = f(t, p + Āt) − A with A = f(0,0),
/// and the shift A. Trajectories of f̃ become trajectories of f after adding Ā t.
pub fn preprocess_field(f: &FieldSpec) -> (FieldSpec, ComplexPoint) {
    let zero = Complex64::new(0.0, 0.0);
    let a = f.eval(0.0, zero);
    if a == zero {
        return (f.clone(), zero);
    }
    match f {
        FieldSpec::Constant(c) => (FieldSpec::Zero, *c),
        FieldSpec::Affine { holo, anti, drift, .. } => (
            FieldSpec::Affine {
                c: zero,
                holo: *holo,
                anti: *anti,
                drift: holo * a.conj() + anti * a + drift,
            },
            a,
        ),
        _ => (FieldSpec::Shifted { inner: Box::new(f.clone()), value: a }, a),
    }
}

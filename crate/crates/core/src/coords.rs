//! Coordinates adapted to the self-similar triple:
//! z1 = a1 r e^{iθ}, x_j = z_j/z1 − a_j/a1 (j = 2, 3), ζ = r², η = θ − (b/2a) log t.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::selfsimilar::{LMatrix, SelfSimilarParams};
use crate::vortex::{free_velocities, ComplexPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub zeta: f64,
    pub eta: f64,
    pub x2: ComplexPoint,
    pub x3: ComplexPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoords {
    pub r: f64,
    pub theta: f64,
    pub x2: ComplexPoint,
    pub x3: ComplexPoint,
}

/// Remainders of the free transformed field after removing 2a, b and L·x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Remainders {
    pub omega_r: f64,
    pub omega_theta: f64,
    pub omega2: ComplexPoint,
    pub omega3: ComplexPoint,
}

/// (dζ/dt, dθ/dt, dx2/dt, dx3/dt)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedVelocity {
    pub dzeta: f64,
    pub dtheta: f64,
    pub dx2: ComplexPoint,
    pub dx3: ComplexPoint,
}

/// Integrands R, Θ, Ξ of the fixed-point map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrands {
    pub r: f64,
    pub theta: f64,
    pub xi2: ComplexPoint,
    pub xi3: ComplexPoint,
}

pub fn phi(p: &SelfSimilarParams, z: [ComplexPoint; 3]) -> Result<PolarCoords> {
    if z[0] == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularInput("z1 = 0".into()));
    }
    let w = z[0] / p.a1;
    Ok(PolarCoords {
        r: w.norm(),
        theta: w.arg(),
        x2: z[1] / z[0] - p.a2 / p.a1,
        x3: z[2] / z[0] - p.a3 / p.a1,
    })
}

pub fn phi_inv(p: &SelfSimilarParams, c: &PolarCoords) -> Result<[ComplexPoint; 3]> {
    if !(c.r > 0.0) {
        return Err(Error::OutOfDomain(format!("r must be positive, got {}", c.r)));
    }
    let z1 = p.a1 * Complex64::from_polar(c.r, c.theta);
    Ok([z1, z1 * (c.x2 + p.a2 / p.a1), z1 * (c.x3 + p.a3 / p.a1)])
}

/// True when (x2, x3) corresponds to two coinciding vortices.
pub fn on_transformed_diagonal(p: &SelfSimilarParams, x2: ComplexPoint, x3: ComplexPoint) -> bool {
    let one = Complex64::new(1.0, 0.0);
    x2 + p.a2 / p.a1 == one || x3 + p.a3 / p.a1 == one || x2 - x3 == (p.a3 - p.a2) / p.a1
}

/// Parameters, L and the working radius ρ' bundled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CoordinateSystem {
    pub params: SelfSimilarParams,
    pub l: LMatrix,
    pub rho_prime: f64,
}

impl CoordinateSystem {
    pub fn new(params: SelfSimilarParams) -> Self {
        let l = params.build_l();
        let rho_prime = params.rho_prime();
        Self { params, l, rho_prime }
    }

    /// Free transformed field at ζ = 1, θ = 0: (ζ̇, θ̇, ζ ẋ2, ζ ẋ3).
    pub fn free_scaled(&self, x2: ComplexPoint, x3: ComplexPoint) -> TransformedVelocity {
        let p = &self.params;
        let a1 = p.a1;
        let z = [a1, a1 * x2 + p.a2, a1 * x3 + p.a3];
        let w = free_velocities(&[p.xi1, p.xi2, p.xi3], &z);
        TransformedVelocity {
            dzeta: 2.0 * (a1.conj() * w[0]).re / a1.norm_sqr(),
            dtheta: (w[0] / a1).im,
            dx2: w[1] / a1 - z[1] * w[0] / (a1 * a1),
            dx3: w[2] / a1 - z[2] * w[0] / (a1 * a1),
        }
    }

    fn check_ball(&self, x2: ComplexPoint, x3: ComplexPoint) -> Result<()> {
        let r = self.rho_prime;
        if x2.norm() >= r || x3.norm() >= r || (x2 - x3).norm() >= r {
            return Err(Error::OutOfDomain(format!(
                "(x2, x3) = ({x2}, {x3}) outside the working ball of radius {r:.4}"
            )));
        }
        Ok(())
    }

    pub fn omega_terms(&self, x2: ComplexPoint, x3: ComplexPoint) -> Result<Remainders> {
        self.check_ball(x2, x3)?;
        Ok(self.omega_unchecked(x2, x3))
    }

    fn omega_unchecked(&self, x2: ComplexPoint, x3: ComplexPoint) -> Remainders {
        let full = self.free_scaled(x2, x3);
        let lx = self.l.apply(x2, x3);
        Remainders {
            omega_r: full.dzeta - 2.0 * self.params.a,
            omega_theta: full.dtheta - self.params.b,
            omega2: full.dx2 - lx[0],
            omega3: full.dx3 - lx[1],
        }
    }

    fn cartesian(&self, zeta: f64, theta: f64, x2: ComplexPoint, x3: ComplexPoint) -> [ComplexPoint; 3] {
        let p = &self.params;
        let z1 = p.a1 * Complex64::from_polar(zeta.sqrt(), theta);
        [z1, z1 * (x2 + p.a2 / p.a1), z1 * (x3 + p.a3 / p.a1)]
    }

    fn theta_of(&self, t: f64, eta: f64) -> f64 {
        eta + self.params.b / (2.0 * self.params.a) * t.ln()
    }

    /// The transformed vector field, external-field terms included.
    pub fn rtx_field(&self, t: f64, s: &TransformedState, f: &FieldSpec) -> Result<TransformedVelocity> {
        if !(t > 0.0) || !(s.zeta > 0.0) {
            return Err(Error::OutOfDomain("rtx_field needs t > 0 and zeta > 0".into()));
        }
        if on_transformed_diagonal(&self.params, s.x2, s.x3) {
            return Err(Error::SingularInput("state lies on the transformed diagonal".into()));
        }
        let free = self.free_scaled(s.x2, s.x3);
        let z = self.cartesian(s.zeta, self.theta_of(t, s.eta), s.x2, s.x3);
        let fz = [f.eval(t, z[0]), f.eval(t, z[1]), f.eval(t, z[2])];
        let (ft, tt, t2, t3) = field_terms(&self.params, z, fz);
        Ok(TransformedVelocity {
            dzeta: free.dzeta + ft,
            dtheta: free.dtheta / s.zeta + tt,
            dx2: free.dx2 / s.zeta + t2,
            dx3: free.dx3 / s.zeta + t3,
        })
    }

    /// R, Θ and Ξ at time s for a state given through δζ = ζ − 2as.
    pub(crate) fn integrands_dev(
        &self,
        s: f64,
        dzeta: f64,
        eta: f64,
        x2: ComplexPoint,
        x3: ComplexPoint,
        f: &FieldSpec,
    ) -> Result<Integrands> {
        let p = &self.params;
        let zeta = 2.0 * p.a * s + dzeta;
        if !(zeta > 0.0) {
            return Err(Error::UtViolation(format!("zeta = {zeta} at t = {s}")));
        }
        self.check_ball(x2, x3)?;
        let om = self.omega_unchecked(x2, x3);
        let lx = self.l.apply(x2, x3);
        let z = self.cartesian(zeta, self.theta_of(s, eta), x2, x3);
        let (ft, tt, t2, t3) = if f.is_zero() {
            let zero = Complex64::new(0.0, 0.0);
            (0.0, 0.0, zero, zero)
        } else {
            let fz = [f.eval(s, z[0]), f.eval(s, z[1]), f.eval(s, z[2])];
            field_terms(p, z, fz)
        };
        // 1/ζ − 1/(2as) = −δζ/(2asζ)
        let k = -dzeta / (2.0 * p.a * s * zeta);
        Ok(Integrands {
            r: om.omega_r + ft,
            theta: p.b * k + om.omega_theta / zeta + tt,
            xi2: lx[0] * k + om.omega2 / zeta + t2,
            xi3: lx[1] * k + om.omega3 / zeta + t3,
        })
    }

    pub fn rtz_terms(&self, s: f64, state: &TransformedState, f: &FieldSpec) -> Result<Integrands> {
        if !(s > 0.0) {
            return Err(Error::OutOfDomain(format!("s must be positive, got {s}")));
        }
        let dz = state.zeta - 2.0 * self.params.a * s;
        self.integrands_dev(s, dz, state.eta, state.x2, state.x3, f)
    }
}

/// External-field contributions to (ζ̇, θ̇, ẋ2, ẋ3).
fn field_terms(
    p: &SelfSimilarParams,
    z: [ComplexPoint; 3],
    fz: [ComplexPoint; 3],
) -> (f64, f64, ComplexPoint, ComplexPoint) {
    let z1 = z[0];
    let f1 = fz[0].conj();
    (
        2.0 / p.a1.norm_sqr() * (z1 * fz[0]).re,
        (f1 / z1).im,
        fz[1].conj() / z1 - z[1] * f1 / (z1 * z1),
        fz[2].conj() / z1 - z[2] * f1 / (z1 * z1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(xi: f64) -> CoordinateSystem {
        CoordinateSystem::new(SelfSimilarParams::for_intensity(xi).unwrap())
    }

    #[test]
    fn orbit_maps_to_origin() {
        let c = cs(1.0);
        let p = c.params;
        for t in [1e-4, 0.3, 2.0] {
            let z = p.positions_at(t).unwrap();
            let q = phi(&p, z).unwrap();
            assert!((q.r - (2.0 * p.a * t).sqrt()).abs() < 1e-14);
            let th = p.b / (2.0 * p.a) * t.ln();
            let dth = (q.theta - th).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(dth.min(2.0 * std::f64::consts::PI - dth) < 1e-12);
            assert!(q.x2.norm() < 1e-15 && q.x3.norm() < 1e-15);
        }
        let q = phi(&p, p.shape()).unwrap();
        assert!((q.r - 1.0).abs() < 1e-15 && q.theta.abs() < 1e-15);
    }

    #[test]
    fn remainders_vanish_at_origin() {
        for xi in [1.0, -3.0] {
            let c = cs(xi);
            let z = Complex64::new(0.0, 0.0);
            let o = c.omega_terms(z, z).unwrap();
            let scale = c.params.a;
            assert!(o.omega_r.abs() < 1e-14 * scale);
            assert!(o.omega_theta.abs() < 1e-14 * scale);
            assert!(o.omega2.norm() < 1e-14 * scale && o.omega3.norm() < 1e-14 * scale);
        }
    }

    #[test]
    fn out_of_ball_rejected() {
        let c = cs(1.0);
        let x = Complex64::new(c.rho_prime * 1.01, 0.0);
        assert!(c.omega_terms(x, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn on_orbit_field_is_leading_terms() {
        let c = cs(2.0);
        let p = c.params;
        let t = 0.01;
        let z = Complex64::new(0.0, 0.0);
        let s = TransformedState { zeta: 2.0 * p.a * t, eta: 0.0, x2: z, x3: z };
        let v = c.rtx_field(t, &s, &FieldSpec::Zero).unwrap();
        assert!((v.dzeta - 2.0 * p.a).abs() < 1e-14);
        assert!((v.dtheta - p.b / s.zeta).abs() < 1e-12 * p.b / s.zeta);
        assert!(v.dx2.norm() < 1e-12 && v.dx3.norm() < 1e-12);
        let r = c.rtz_terms(t, &s, &FieldSpec::Zero).unwrap();
        assert!(r.r.abs() < 1e-15 && r.theta.abs() < 1e-10 && r.xi2.norm() < 1e-12);
    }

    #[test]
    fn constant_field_terms() {
        let c = cs(1.0);
        let p = c.params;
        let cst = Complex64::new(0.2, -0.4);
        let z = Complex64::new(0.0, 0.0);
        let s = TransformedState { zeta: 1.0, eta: 0.0, x2: z, x3: z };
        let t = 1.0;
        let with = c.rtx_field(t, &s, &FieldSpec::Constant(cst)).unwrap();
        let without = c.rtx_field(t, &s, &FieldSpec::Zero).unwrap();
        let z1 = p.a1;
        let z2 = z1 * p.a2 / p.a1;
        let want = cst.conj() / z1 - z2 * cst.conj() / (z1 * z1);
        assert!((with.dx2 - without.dx2 - want).norm() < 1e-15);
    }
}

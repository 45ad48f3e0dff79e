//! Self-similar three-vortex bursts w_j(t) = a_j Z(t) and the linearisation
//! of the transformed field around them.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vortex::ComplexPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarParams {
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    pub a1: ComplexPoint,
    pub a2: ComplexPoint,
    pub a3: ComplexPoint,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

/// (−ξ/3, 2ξ/3, 2ξ/3), rounded so the floating-point sum is exactly ξ:
/// ξ − 2·(2ξ/3) and ξ − 2ξ/3 are both exact by Sterbenz.
pub fn child_intensities(xi: f64) -> [f64; 3] {
    let two = 2.0 * xi / 3.0;
    [xi - 2.0 * two, two, two]
}

impl SelfSimilarParams {
    pub fn for_intensity(xi: f64) -> Result<Self> {
        if xi == 0.0 || !xi.is_finite() {
            return Err(Error::InvalidIntensity(format!("xi = {xi}")));
        }
        let s3 = 3f64.sqrt();
        let b = 5.0 / (84.0 * PI) * xi;
        let (a, a1, a2, a3) = if xi > 0.0 {
            (
                s3 / (84.0 * PI) * xi,
                Complex64::new(-2.0, 2.0 * s3),
                Complex64::new(-2.0, s3),
                Complex64::new(1.0, 0.0),
            )
        } else {
            (
                -s3 / (84.0 * PI) * xi,
                Complex64::new(2.0, 2.0 * s3),
                Complex64::new(2.0, s3),
                Complex64::new(-1.0, 0.0),
            )
        };
        let children = child_intensities(xi);
        Ok(Self {
            xi,
            a,
            b,
            a1,
            a2,
            a3,
            xi1: children[0],
            xi2: children[1],
            xi3: children[2],
        })
    }

    pub fn shape(&self) -> [ComplexPoint; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn intensities(&self) -> [f64; 3] {
        [self.xi1, self.xi2, self.xi3]
    }

    /// max_j |Σ_{k≠j} ξ_k/(a_j−a_k) − 2πi ā_j (a − ib)|
    pub fn asrelation_residual(&self) -> f64 {
        let aj = self.shape();
        let xs = self.intensities();
        let ab = Complex64::new(self.a, -self.b);
        (0..3)
            .map(|j| {
                let lhs: Complex64 = (0..3)
                    .filter(|&k| k != j)
                    .map(|k| xs[k] / (aj[j] - aj[k]))
                    .sum();
                let rhs = 2.0 * PI * Complex64::i() * aj[j].conj() * ab;
                (lhs - rhs).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn z_of_t(&self, t: f64) -> Result<ComplexPoint> {
        if !(t > 0.0) {
            return Err(Error::OutOfDomain(format!("Z(t) needs t > 0, got {t}")));
        }
        Ok(self.z_unchecked(t))
    }

    pub(crate) fn z_unchecked(&self, t: f64) -> ComplexPoint {
        let phase = self.b / (2.0 * self.a) * t.ln();
        Complex64::from_polar((2.0 * self.a * t).sqrt(), phase)
    }

    /// dZ/dt = Z (a + ib) / (2at)
    pub fn dz_dt(&self, t: f64) -> Result<ComplexPoint> {
        let z = self.z_of_t(t)?;
        Ok(z * Complex64::new(self.a, self.b) / (2.0 * self.a * t))
    }

    pub fn positions_at(&self, t: f64) -> Result<[ComplexPoint; 3]> {
        let z = self.z_of_t(t)?;
        Ok([self.a1 * z, self.a2 * z, self.a3 * z])
    }

    /// max_j |a_j Z'(t) − v_j| / max_j |v_j| with v the free velocities of
    /// the triple at time t.
    pub fn free_ode_residual(&self, t: f64) -> Result<f64> {
        let z = self.positions_at(t)?;
        let dz = self.dz_dt(t)?;
        let v = crate::vortex::free_velocities(&self.intensities(), &z);
        let scale = v.iter().map(|w| w.norm()).fold(0.0, f64::max);
        let err = self.shape().iter().zip(&v).map(|(aj, vj)| (aj * dz - vj).norm()).fold(0.0, f64::max);
        Ok(err / scale)
    }

    pub fn holder_bound(&self) -> f64 {
        (2.0 * self.a).sqrt() * (1.0 + self.b.abs() / (4.0 * self.a))
    }

    pub fn build_l(&self) -> LMatrix {
        LMatrix::new(self)
    }

    /// (2b² − c1, b⁴ − b²c1 + c2) with c1, c2 the coefficients of the
    /// characteristic polynomial in y = (a+λ)² + b².
    pub fn eigen_discriminants(&self) -> (f64, f64) {
        let (c1, c2) = self.build_l().char_coeffs();
        let b2 = self.b * self.b;
        (2.0 * b2 - c1, b2 * b2 - b2 * c1 + c2)
    }

    /// ρ' = ¼ min(|1−a2/a1|, |1−a3/a1|, |a2−a3|/|a1|).
    pub fn rho_prime(&self) -> f64 {
        let n1 = self.a1.norm();
        let d = [
            (self.a1 - self.a2).norm() / n1,
            (self.a1 - self.a3).norm() / n1,
            (self.a2 - self.a3).norm() / n1,
        ];
        0.25 * d.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Linear part of the transformed x-field, acting on (x2, x3, x̄2, x̄3).
#[derive(Debug, Clone, PartialEq)]
pub struct LMatrix {
    pub entries: Matrix4<Complex64>,
    a: f64,
    b: f64,
}

impl LMatrix {
    fn new(p: &SelfSimilarParams) -> Self {
        let (a1, a2, a3) = (p.a1, p.a2, p.a3);
        let (x1, x2, x3) = (p.xi1, p.xi2, p.xi3);
        let c = Complex64::new(1.0, 0.0) / (2.0 * PI * Complex64::i() * a1.norm_sqr());
        let sq = |w: Complex64| w * w;
        let a1s = a1 * a1;
        let r2 = a2.conj() / a1.conj();
        let r3 = a3.conj() / a1.conj();
        let l13 = c
            * (a1s * x3 / sq(a2 - a3) + a1s * x1 / sq(a2 - a1) + r2 * a1s * x2 / sq(a1 - a2)).conj();
        let l14 = c * (-a1s * x3 / sq(a2 - a3) + r2 * a1s * x3 / sq(a1 - a3)).conj();
        let l23 = c * (-a1s * x2 / sq(a3 - a2) + r3 * a1s * x2 / sq(a1 - a2)).conj();
        let l24 = c
            * (a1s * x2 / sq(a3 - a2) + a1s * x1 / sq(a3 - a1) + r3 * a1s * x3 / sq(a1 - a3)).conj();
        let d = Complex64::new(-p.a, -p.b);
        let z = Complex64::new(0.0, 0.0);
        #[rustfmt::skip]
        let entries = Matrix4::new(
            d, z, l13, l14,
            z, d, l23, l24,
            l13.conj(), l14.conj(), d.conj(), z,
            l23.conj(), l24.conj(), z, d.conj(),
        );
        Self { entries, a: p.a, b: p.b }
    }

    pub fn l13(&self) -> Complex64 {
        self.entries[(0, 2)]
    }
    pub fn l14(&self) -> Complex64 {
        self.entries[(0, 3)]
    }
    pub fn l23(&self) -> Complex64 {
        self.entries[(1, 2)]
    }
    pub fn l24(&self) -> Complex64 {
        self.entries[(1, 3)]
    }

    /// First two components of L·(x2, x3, x̄2, x̄3).
    pub fn apply(&self, x2: Complex64, x3: Complex64) -> [Complex64; 2] {
        let v = Vector4::new(x2, x3, x2.conj(), x3.conj());
        let out = self.entries * v;
        [out[0], out[1]]
    }

    /// (c1, c2) = (tr B B̄, |det B|²) with B the off-diagonal block.
    pub fn char_coeffs(&self) -> (f64, f64) {
        let (l13, l14, l23, l24) = (self.l13(), self.l14(), self.l23(), self.l24());
        let c1 = (l13 * l13.conj() + l14 * l23.conj() + l23 * l14.conj() + l24 * l24.conj()).re;
        let c2 = (l13 * l24 - l14 * l23).norm_sqr();
        (c1, c2)
    }

    /// Eigenvalues from the roots y of y² − c1 y + c2 via λ = −a ± √(y − b²).
    pub fn eigenvalues(&self) -> [Complex64; 4] {
        let (c1, c2) = self.char_coeffs();
        let disc = Complex64::new(c1 * c1 - 4.0 * c2, 0.0).sqrt();
        let ys = [(c1 + disc) / 2.0, (c1 - disc) / 2.0];
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (i, y) in ys.iter().enumerate() {
            let s = (y - self.b * self.b).sqrt();
            out[2 * i] = -self.a + s;
            out[2 * i + 1] = -self.a - s;
        }
        out
    }

    /// The same linear map on (Re x2, Re x3, Im x2, Im x3).
    pub fn realified(&self) -> Matrix4<f64> {
        let basis = [
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            (Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)),
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)),
        ];
        let mut m = Matrix4::zeros();
        for (col, (x2, x3)) in basis.iter().enumerate() {
            let [o2, o3] = self.apply(*x2, *x3);
            m[(0, col)] = o2.re;
            m[(1, col)] = o3.re;
            m[(2, col)] = o2.im;
            m[(3, col)] = o3.im;
        }
        m
    }

    /// Dense eigensolver cross-check on the realified matrix.
    pub fn eigenvalues_dense(&self) -> Vec<Complex64> {
        self.realified().complex_eigenvalues().iter().copied().collect()
    }

    /// Eigenvalues with right eigenvectors V and V⁻¹ of the complex 4×4 matrix.
    pub fn eigen_decomposition(&self) -> Result<EigenDecomposition> {
        let values = self.eigenvalues();
        let mut v = Matrix4::<Complex64>::zeros();
        for (k, lam) in values.iter().enumerate() {
            let shifted = self.entries - Matrix4::<Complex64>::identity() * *lam;
            let svd = shifted.svd(false, true);
            let vt = svd
                .v_t
                .ok_or_else(|| Error::Certificate("SVD failed for eigenvector".into()))?;
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
            for r in 0..4 {
                v[(r, k)] = vt[(imin, r)].conj();
            }
        }
        let inv = v
            .try_inverse()
            .ok_or_else(|| Error::Certificate("L is not diagonalisable".into()))?;
        Ok(EigenDecomposition { values, vectors: v, inverse: inv })
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: [Complex64; 4],
    pub vectors: Matrix4<Complex64>,
    pub inverse: Matrix4<Complex64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_parameter_set() {
        let p = SelfSimilarParams::for_intensity(84.0 * PI).unwrap();
        assert!((p.a - 3f64.sqrt()).abs() < 1e-12);
        assert!((p.b - 5.0).abs() < 1e-12);
        let m = SelfSimilarParams::for_intensity(-84.0 * PI).unwrap();
        assert!((m.a - 3f64.sqrt()).abs() < 1e-12);
        assert!((m.b + 5.0).abs() < 1e-12);
        assert!(SelfSimilarParams::for_intensity(0.0).is_err());
    }

    #[test]
    fn perturbed_shape_breaks_relation() {
        let mut p = SelfSimilarParams::for_intensity(1.0).unwrap();
        p.a2 += 0.1;
        assert!(p.asrelation_residual() > 1e-3);
    }

    #[test]
    fn center_of_vorticity_constraint() {
        for xi in [1.0, -1.0] {
            let p = SelfSimilarParams::for_intensity(xi).unwrap();
            assert!((p.a1 - 2.0 * (p.a2 + p.a3)).norm() < 1e-15);
        }
    }

    #[test]
    fn l_spectrum_structure() {
        // the spectrum is {0, -2a, -a ± ib}: the H and I directions are neutral / contracting
        for xi in [1.0, -2.5, 84.0 * PI] {
            let p = SelfSimilarParams::for_intensity(xi).unwrap();
            let l = p.build_l();
            let (c1, c2) = l.char_coeffs();
            assert!((c1 - (p.a * p.a + p.b * p.b)).abs() < 1e-12 * c1);
            assert!(c2.abs() < 1e-12 * c1 * c1);
            let mut re: Vec<f64> = l.eigenvalues().iter().map(|z| z.re / p.a).collect();
            re.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let want = [-2.0, -1.0, -1.0, 0.0];
            for (r, w) in re.iter().zip(want) {
                assert!((r - w).abs() < 1e-6, "{re:?}");
            }
        }
    }

    #[test]
    fn dense_eigenvalues_agree() {
        let p = SelfSimilarParams::for_intensity(1.0).unwrap();
        let l = p.build_l();
        let mut dense = l.eigenvalues_dense();
        let analytic = l.eigenvalues();
        for lam in analytic {
            let (i, d) = dense
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - lam).norm()))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            assert!(d < 1e-9 * p.a, "{lam} vs {dense:?}");
            dense.remove(i);
        }
    }

    #[test]
    fn eigenvectors_diagonalise() {
        let p = SelfSimilarParams::for_intensity(-1.7).unwrap();
        let l = p.build_l();
        let e = l.eigen_decomposition().unwrap();
        let d = Matrix4::from_diagonal(&Vector4::from(e.values));
        let back = e.vectors * d * e.inverse;
        assert!((back - l.entries).norm() < 1e-12 * l.entries.norm());
    }
}

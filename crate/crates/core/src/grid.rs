//! Graded time grid t_i = T (i/n)^q with fourth-order cumulative quadrature
//! and interpolation in the uniform variable σ = (t/T)^{1/q}.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradedGrid {
    t_final: f64,
    n: usize,
    q: f64,
    times: Vec<f64>,
}

impl GradedGrid {
    pub fn new(t_final: f64, n: usize, q: f64) -> Result<Self> {
        if !(t_final > 0.0) || n < 8 || !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "graded grid needs T > 0, n >= 8, q >= 1 (got {t_final}, {n}, {q})"
            )));
        }
        let times = (0..=n).map(|i| t_final * (i as f64 / n as f64).powf(q)).collect();
        Ok(Self { t_final, n, q, times })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Number of panels; there are `n + 1` nodes including t = 0.
    pub fn panels(&self) -> usize {
        self.n
    }

    pub fn exponent(&self) -> f64 {
        self.q
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn sigma_of(&self, t: f64) -> f64 {
        (t / self.t_final).powf(1.0 / self.q)
    }

    pub fn t_of_sigma(&self, s: f64) -> f64 {
        self.t_final * s.powf(self.q)
    }

    /// dt/dσ at σ.
    pub fn jacobian_at(&self, s: f64) -> f64 {
        if s == 0.0 {
            return if self.q == 1.0 { self.t_final } else { 0.0 };
        }
        self.q * self.t_final * s.powf(self.q - 1.0)
    }

    pub fn jacobian(&self, i: usize) -> f64 {
        self.jacobian_at(i as f64 / self.n as f64)
    }

    /// ∫ over panel [σ_i, σ_{i+1}] of the quartic-exact interpolant of `g`.
    pub fn panel<T, F>(&self, i: usize, g: F) -> T
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
        F: Fn(usize) -> T,
    {
        let n = self.n;
        let w = self.h() / 24.0;
        if i == 0 {
            (g(0) * 9.0 + g(1) * 19.0 - g(2) * 5.0 + g(3)) * w
        } else if i == n - 1 {
            (g(n) * 9.0 + g(n - 1) * 19.0 - g(n - 2) * 5.0 + g(n - 3)) * w
        } else {
            ((g(i) + g(i + 1)) * 13.0 - g(i - 1) - g(i + 2)) * w
        }
    }

    /// Running integral from node 0: out[i] = ∫_{σ_0}^{σ_i} g dσ.
    pub fn cumulative<T>(&self, g: &[T], zero: T) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        let mut out = vec![zero; self.n + 1];
        for i in 0..self.n {
            out[i + 1] = out[i] + self.panel(i, |k| g[k]);
        }
        out
    }

    /// Running integral anchored at the last node: out[i] = ∫_{σ_n}^{σ_i} g dσ.
    pub fn cumulative_from_end<T>(&self, g: &[T], zero: T) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        let mut out = vec![zero; self.n + 1];
        for i in (0..self.n).rev() {
            out[i] = out[i + 1] - self.panel(i, |k| g[k]);
        }
        out
    }

    /// First node index and weights of the four-point Lagrange stencil in σ.
    pub fn stencil(&self, t: f64) -> (usize, [f64; 4]) {
        let s = self.sigma_of(t.clamp(0.0, self.t_final)) * self.n as f64;
        let i0 = (s.floor() as isize - 1).clamp(0, self.n as isize - 3) as usize;
        let x = s - i0 as f64;
        (
            i0,
            [
                -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
                x * (x - 2.0) * (x - 3.0) / 2.0,
                -x * (x - 1.0) * (x - 3.0) / 2.0,
                x * (x - 1.0) * (x - 2.0) / 6.0,
            ],
        )
    }

    /// Four-point Lagrange interpolation in σ of nodal values.
    pub fn interpolate<T>(&self, values: &[T], t: f64) -> T
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        let (i0, w) = self.stencil(t);
        values[i0] * w[0] + values[i0 + 1] * w[1] + values[i0 + 2] * w[2] + values[i0 + 3] * w[3]
    }
}

/// Positions of several points sampled on a graded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCurve {
    pub grid: GradedGrid,
    /// `values[i][k]`: point k at node i.
    pub values: Vec<Vec<num_complex::Complex64>>,
}

impl GridCurve {
    pub fn new(grid: GradedGrid, values: Vec<Vec<num_complex::Complex64>>) -> Result<Self> {
        if values.len() != grid.panels() + 1 {
            return Err(Error::InvalidArgument("curve needs one entry per grid node".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidArgument("ragged curve".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GradedGrid, points: Vec<num_complex::Complex64>) -> Self {
        let values = vec![points; grid.panels() + 1];
        Self { grid, values }
    }

    pub fn count(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, t: f64) -> Vec<num_complex::Complex64> {
        let (i0, w) = self.grid.stencil(t);
        (0..self.count())
            .map(|k| (0..4).map(|m| self.values[i0 + m][k] * w[m]).sum())
            .collect()
    }
}

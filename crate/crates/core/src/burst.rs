//! Three-vortex bursts under an external field, as fixed points of the
//! integral map Γ on transformed curves (ζ, η, x2, x3) over a graded grid.

use nalgebra::Vector4;
use num_complex::Complex64;

use crate::coords::{CoordinateSystem, Integrands, TransformedState};
use crate::error::{Error, Result};
use crate::field::{preprocess_field, FieldSpec};
use crate::grid::GradedGrid;
use crate::selfsimilar::{EigenDecomposition, SelfSimilarParams};
use crate::vortex::{free_velocities, ComplexPoint, VortexConfiguration};

#[derive(Debug, Clone, PartialEq)]
pub struct GammaConfig {
    pub t_final: f64,
    pub grid_nodes: usize,
    pub grading_exponent: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub damping: f64,
    /// Retries with T halved when the iterate leaves U_T.
    pub max_halvings: usize,
    /// Optional confinement radius: the triple must stay within |z| ≤ rho.
    pub rho: Option<f64>,
    /// Optional admissible field bound M.
    pub max_field_bound: Option<f64>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            t_final: 1e-2,
            grid_nodes: 512,
            grading_exponent: 2.0,
            picard_tol: 1e-13,
            picard_max_iter: 200,
            damping: 1.0,
            max_halvings: 6,
            rho: None,
            max_field_bound: None,
        }
    }
}

impl GammaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidArgument("T must be positive".into()));
        }
        if self.grid_nodes < 64 {
            return Err(Error::InvalidArgument("grid_nodes must be at least 64".into()));
        }
        if !(self.grading_exponent >= 1.0) {
            return Err(Error::InvalidArgument("grading exponent must be >= 1".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidArgument("picard_tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GradedGrid> {
        GradedGrid::new(self.t_final, self.grid_nodes, self.grading_exponent)
    }
}

/// Transformed curve on a graded grid. ζ is stored as δζ = ζ − 2at.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCurve {
    pub grid: GradedGrid,
    pub a: f64,
    pub dzeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub x2: Vec<ComplexPoint>,
    pub x3: Vec<ComplexPoint>,
}

/// Measured U_T quantities of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtReport {
    /// max |ζ(t) − 2at| / t^{3/2}
    pub zeta_ratio: f64,
    /// max |x_j(t)| / t
    pub x_ratio: f64,
    pub eta_final: f64,
    /// largest discrete Hölder-1/2 seminorm among ζ, η, x2, x3
    pub holder: f64,
}

impl UtReport {
    pub fn holds(&self) -> bool {
        self.zeta_ratio <= 1.0 && self.x_ratio <= 1.0 && self.eta_final == 0.0 && self.holder <= 1.0
    }
}

fn holder_half<F: Fn(usize) -> f64>(times: &[f64], dist: F) -> f64 {
    let n = times.len();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let dt = times[j] - times[i];
            if dt > 0.0 {
                m = m.max(dist(i * n + j) / dt.sqrt());
            }
        }
    }
    m
}

impl TransformedCurve {
    pub fn self_similar(grid: GradedGrid, a: f64) -> Self {
        let m = grid.panels() + 1;
        let z = Complex64::new(0.0, 0.0);
        Self { grid, a, dzeta: vec![0.0; m], eta: vec![0.0; m], x2: vec![z; m], x3: vec![z; m] }
    }

    pub fn len(&self) -> usize {
        self.dzeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dzeta.is_empty()
    }

    pub fn zeta(&self, i: usize) -> f64 {
        2.0 * self.a * self.grid.t(i) + self.dzeta[i]
    }

    pub fn state(&self, i: usize) -> TransformedState {
        TransformedState { zeta: self.zeta(i), eta: self.eta[i], x2: self.x2[i], x3: self.x3[i] }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.len() {
            d = d
                .max((self.dzeta[i] - other.dzeta[i]).abs())
                .max((self.eta[i] - other.eta[i]).abs())
                .max((self.x2[i] - other.x2[i]).norm())
                .max((self.x3[i] - other.x3[i]).norm());
        }
        d
    }

    fn blend(&self, other: &Self, w: f64) -> Self {
        if w == 1.0 {
            return other.clone();
        }
        let mix = |a: f64, b: f64| (1.0 - w) * a + w * b;
        let mixc = |a: Complex64, b: Complex64| a * (1.0 - w) + b * w;
        Self {
            grid: self.grid.clone(),
            a: self.a,
            dzeta: self.dzeta.iter().zip(&other.dzeta).map(|(a, b)| mix(*a, *b)).collect(),
            eta: self.eta.iter().zip(&other.eta).map(|(a, b)| mix(*a, *b)).collect(),
            x2: self.x2.iter().zip(&other.x2).map(|(a, b)| mixc(*a, *b)).collect(),
            x3: self.x3.iter().zip(&other.x3).map(|(a, b)| mixc(*a, *b)).collect(),
        }
    }

    /// Pointwise U_T bounds (cheap part of the membership test).
    fn pointwise_ratios(&self) -> (f64, f64) {
        let mut zr = 0.0f64;
        let mut xr = 0.0f64;
        for i in 1..self.len() {
            let t = self.grid.t(i);
            zr = zr.max(self.dzeta[i].abs() / t.powf(1.5));
            xr = xr.max(self.x2[i].norm().max(self.x3[i].norm()) / t);
        }
        (zr, xr)
    }

    pub fn ut_report(&self) -> UtReport {
        let (zeta_ratio, x_ratio) = self.pointwise_ratios();
        let n = self.len();
        let times = self.grid.times();
        let zeta: Vec<f64> = (0..n).map(|i| self.zeta(i)).collect();
        let hz = holder_half(times, |k| (zeta[k % n] - zeta[k / n]).abs());
        let he = holder_half(times, |k| (self.eta[k % n] - self.eta[k / n]).abs());
        let h2 = holder_half(times, |k| (self.x2[k % n] - self.x2[k / n]).norm());
        let h3 = holder_half(times, |k| (self.x3[k % n] - self.x3[k / n]).norm());
        UtReport {
            zeta_ratio,
            x_ratio,
            eta_final: self.eta[n - 1],
            holder: hz.max(he).max(h2).max(h3),
        }
    }
}

/// Reusable pieces of the Γ map for one intensity.
#[derive(Debug, Clone)]
pub struct BurstSolver {
    pub coords: CoordinateSystem,
    eig: EigenDecomposition,
    nu: [Complex64; 4],
}

impl BurstSolver {
    pub fn new(xi: f64) -> Result<Self> {
        let params = SelfSimilarParams::for_intensity(xi)?;
        let coords = CoordinateSystem::new(params);
        let eig = coords.l.eigen_decomposition()?;
        let nu = eig.values.map(|l| l / (2.0 * params.a));
        Ok(Self { coords, eig, nu })
    }

    pub fn params(&self) -> &SelfSimilarParams {
        &self.coords.params
    }

    fn integrands(&self, u: &TransformedCurve, f: &FieldSpec) -> Result<Vec<Integrands>> {
        let z = Complex64::new(0.0, 0.0);
        let mut out = vec![Integrands { r: 0.0, theta: 0.0, xi2: z, xi3: z }; u.len()];
        for (i, slot) in out.iter_mut().enumerate().skip(1) {
            let s = u.grid.t(i);
            *slot = self
                .coords
                .integrands_dev(s, u.dzeta[i], u.eta[i], u.x2[i], u.x3[i], f)
                .map_err(|e| match e {
                    Error::OutOfDomain(m) => Error::UtViolation(m),
                    other => other,
                })?;
        }
        Ok(out)
    }

    /// One application of Γ. `f` must satisfy f(0,0) = 0.
    pub fn gamma(&self, u: &TransformedCurve, f: &FieldSpec) -> Result<TransformedCurve> {
        let grid = &u.grid;
        let n = grid.panels();
        let terms = self.integrands(u, f)?;
        let jac: Vec<f64> = (0..=n).map(|i| grid.jacobian(i)).collect();
        let gr: Vec<f64> = (0..=n).map(|i| terms[i].r * jac[i]).collect();
        let gt: Vec<f64> = (0..=n).map(|i| terms[i].theta * jac[i]).collect();
        let dzeta = grid.cumulative(&gr, 0.0);
        let eta = grid.cumulative_from_end(&gt, 0.0);

        // modal components of (Ξ2, Ξ3, Ξ̄2, Ξ̄3) times dt/dσ
        let vinv = &self.eig.inverse;
        let modes: Vec<Vector4<Complex64>> = (0..=n)
            .map(|i| {
                let v = Vector4::new(terms[i].xi2, terms[i].xi3, terms[i].xi2.conj(), terms[i].xi3.conj());
                vinv * v * Complex64::new(jac[i], 0.0)
            })
            .collect();
        let logt: Vec<f64> = grid.times().iter().map(|t| if *t > 0.0 { t.ln() } else { 0.0 }).collect();
        let mut y = vec![Vector4::<Complex64>::zeros(); n + 1];
        let zero = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let lt1 = logt[i + 1];
            for k in 0..4 {
                let nu = self.nu[k];
                let h = |m: usize| {
                    if m == 0 {
                        zero
                    } else {
                        (nu * (lt1 - logt[m])).exp() * modes[m][k]
                    }
                };
                let carry = if i == 0 { zero } else { (nu * (lt1 - logt[i])).exp() * y[i][k] };
                y[i + 1][k] = carry + grid.panel(i, h);
            }
        }
        let v = &self.eig.vectors;
        let mut x2 = vec![zero; n + 1];
        let mut x3 = vec![zero; n + 1];
        for i in 0..=n {
            let x = v * y[i];
            x2[i] = x[0];
            x3[i] = x[1];
        }
        Ok(TransformedCurve { grid: grid.clone(), a: u.a, dzeta, eta, x2, x3 })
    }

    /// Damped Picard iteration from `init`. Returns the final curve, the
    /// certified residual sup|Γ(u) − u| and the residual history.
    pub fn iterate(
        &self,
        f: &FieldSpec,
        init: TransformedCurve,
        cfg: &GammaConfig,
    ) -> Result<(TransformedCurve, f64, Vec<f64>)> {
        let mut u = init;
        let mut history = Vec::new();
        for _ in 0..cfg.picard_max_iter {
            let g = self.gamma(&u, f)?;
            let d = u.distance(&g);
            history.push(d);
            u = u.blend(&g, cfg.damping);
            let (zr, xr) = u.pointwise_ratios();
            if zr > 1.0 || xr > 1.0 {
                return Err(Error::UtViolation(format!(
                    "iterate left U_T: max|ζ−2at|/t^1.5 = {zr:.3e}, max|x|/t = {xr:.3e}"
                )));
            }
            if d < cfg.picard_tol {
                let check = self.gamma(&u, f)?;
                let res = u.distance(&check);
                return Ok((u, res, history));
            }
        }
        let last = history.last().copied().unwrap_or(f64::NAN);
        Err(Error::NonConvergence { iterations: cfg.picard_max_iter, last, history })
    }

    pub fn cartesian(&self, u: &TransformedCurve, shift: ComplexPoint) -> Vec<[ComplexPoint; 3]> {
        let p = self.params();
        let zero = Complex64::new(0.0, 0.0);
        (0..u.len())
            .map(|i| {
                let t = u.grid.t(i);
                if t == 0.0 {
                    return [zero; 3];
                }
                let theta = u.eta[i] + p.b / (2.0 * p.a) * t.ln();
                let z1 = p.a1 * Complex64::from_polar(u.zeta(i).sqrt(), theta);
                let drift = shift.conj() * t;
                [
                    z1 + drift,
                    z1 * (u.x2[i] + p.a2 / p.a1) + drift,
                    z1 * (u.x3[i] + p.a3 / p.a1) + drift,
                ]
            })
            .collect()
    }
}

/// Γ as a free function: builds the solver for `p.xi` and applies it once.
pub fn gamma_map(u: &TransformedCurve, f: &FieldSpec, p: &SelfSimilarParams) -> Result<TransformedCurve> {
    let zero = Complex64::new(0.0, 0.0);
    if f.eval(0.0, zero).norm() > 1e-14 {
        return Err(Error::InvalidArgument("gamma_map needs f(0,0) = 0; run preprocess_field".into()));
    }
    BurstSolver::new(p.xi)?.gamma(u, f)
}

#[derive(Debug, Clone)]
pub struct BurstSolution {
    pub curve: TransformedCurve,
    /// Node positions in the original frame, node 0 at t = 0.
    pub cartesian: Vec<[ComplexPoint; 3]>,
    pub field: FieldSpec,
    pub params: SelfSimilarParams,
    pub gamma_residual: f64,
    pub shift: ComplexPoint,
    pub history: Vec<f64>,
    /// Number of T halvings applied before convergence.
    pub halvings: usize,
}

impl BurstSolution {
    pub fn t_final(&self) -> f64 {
        self.curve.grid.t_final()
    }

    pub fn grid(&self) -> &GradedGrid {
        &self.curve.grid
    }

    pub fn times(&self) -> &[f64] {
        self.curve.grid.times()
    }

    pub fn intensities(&self) -> [f64; 3] {
        self.params.intensities()
    }

    pub fn position_at(&self, t: f64) -> Result<[ComplexPoint; 3]> {
        if !(t >= 0.0 && t <= self.t_final()) {
            return Err(Error::OutOfDomain(format!("t = {t} outside [0, {}]", self.t_final())));
        }
        let (i0, w) = self.grid().stencil(t);
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (m, wm) in w.iter().enumerate() {
            for j in 0..3 {
                out[j] += self.cartesian[i0 + m][j] * *wm;
            }
        }
        Ok(out)
    }

    /// Relative finite-difference residual of the Cartesian ODE at panel
    /// midpoints with t > T/10.
    pub fn ode_residual(&self) -> f64 {
        let xs = self.intensities();
        let f = &self.field;
        let grid = self.grid();
        let n = grid.panels();
        let h = grid.h();
        let z = &self.cartesian;
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            if grid.t(i) < grid.t_final() / 10.0 {
                continue;
            }
            let mut zm = [Complex64::new(0.0, 0.0); 3];
            let mut dz = [Complex64::new(0.0, 0.0); 3];
            for j in 0..3 {
                zm[j] = (-z[i - 1][j] + 9.0 * z[i][j] + 9.0 * z[i + 1][j] - z[i + 2][j]) / 16.0;
                dz[j] = (z[i - 1][j] - 27.0 * z[i][j] + 27.0 * z[i + 1][j] - z[i + 2][j]) / (24.0 * h);
            }
            let sm = (i as f64 + 0.5) * h;
            let tm = grid.t_of_sigma(sm);
            let jac = grid.jacobian_at(sm);
            let mut v = free_velocities(&xs, &zm);
            for j in 0..3 {
                v[j] += f.velocity(tm, zm[j]);
            }
            let scale = v.iter().map(|w| w.norm()).fold(0.0, f64::max);
            for j in 0..3 {
                worst = worst.max((dz[j] / jac - v[j]).norm() / scale);
            }
        }
        worst
    }

    /// Discrete Hölder-1/2 seminorm of r e^{iθ} = z1/a1 in the Galilean frame.
    pub fn holder_r_theta(&self) -> f64 {
        let times = self.times();
        let w: Vec<Complex64> = self
            .cartesian
            .iter()
            .zip(times)
            .map(|(z, t)| (z[0] - self.shift.conj() * *t) / self.params.a1)
            .collect();
        let n = w.len();
        holder_half(times, |k| (w[k % n] - w[k / n]).norm())
    }

    /// Discrete Hölder-1/2 seminorm of vortex j.
    pub fn holder_vortex(&self, j: usize) -> f64 {
        let times = self.times();
        let n = times.len();
        holder_half(times, |k| (self.cartesian[k % n][j] - self.cartesian[k / n][j]).norm())
    }
}

fn solve_on(
    solver: &BurstSolver,
    f_orig: &FieldSpec,
    cfg: &GammaConfig,
    init: Option<TransformedCurve>,
) -> Result<BurstSolution> {
    let grid = cfg.grid()?;
    let p = *solver.params();
    if let Some(m) = cfg.max_field_bound {
        let radius = 2.0 * p.a1.norm().max(p.a2.norm()).max(p.a3.norm()) * (2.0 * p.a * cfg.t_final).sqrt();
        let bound = f_orig.bound_m(radius, cfg.t_final);
        if bound > m {
            return Err(Error::InvalidArgument(format!("field bound {bound:.3e} exceeds M = {m:.3e}")));
        }
    }
    let (f, shift) = preprocess_field(f_orig);
    let init = match init {
        Some(u) if u.grid == grid => u,
        Some(_) => return Err(Error::InvalidArgument("initial curve lives on a different grid".into())),
        None => TransformedCurve::self_similar(grid, p.a),
    };
    let (curve, gamma_residual, history) = solver.iterate(&f, init, cfg)?;
    let cartesian = solver.cartesian(&curve, shift);
    if let Some(rho) = cfg.rho {
        let far = cartesian.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if far > rho {
            return Err(Error::UtViolation(format!("triple reaches |z| = {far:.3e} > rho = {rho:.3e}")));
        }
    }
    Ok(BurstSolution {
        curve,
        cartesian,
        field: f_orig.clone(),
        params: p,
        gamma_residual,
        shift,
        history,
        halvings: 0,
    })
}

/// Burst of a vortex of intensity `xi` at the origin under the field `f`.
/// T is halved (up to `cfg.max_halvings` times) when the iterate leaves U_T.
pub fn solve_burst(f: &FieldSpec, xi: f64, cfg: &GammaConfig) -> Result<BurstSolution> {
    cfg.validate()?;
    let solver = BurstSolver::new(xi)?;
    let mut c = cfg.clone();
    let mut last_err = None;
    for k in 0..=cfg.max_halvings {
        match solve_on(&solver, f, &c, None) {
            Ok(mut sol) => {
                sol.halvings = k;
                return Ok(sol);
            }
            Err(e @ Error::UtViolation(_)) => {
                last_err = Some(e);
                c.t_final /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::UtViolation("no admissible T".into())))
}

/// Same as [`solve_burst`] at fixed T, starting the iteration from `init`.
pub fn solve_burst_from(
    f: &FieldSpec,
    xi: f64,
    cfg: &GammaConfig,
    init: TransformedCurve,
) -> Result<BurstSolution> {
    cfg.validate()?;
    let solver = BurstSolver::new(xi)?;
    solve_on(&solver, f, cfg, Some(init))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub sup_dist: f64,
    pub ratio: f64,
    pub field_distance: f64,
    pub t_final: f64,
}

/// Sampled sup of |f − g| over |p| ≤ radius, t ∈ [0, t_max].
pub fn field_distance(f: &FieldSpec, g: &FieldSpec, radius: f64, t_max: f64) -> f64 {
    let mut m = 0.0f64;
    for it in 0..=8 {
        let t = t_max * it as f64 / 8.0;
        for ir in 0..=8 {
            let r = radius * ir as f64 / 8.0;
            for ia in 0..24 {
                let p = Complex64::from_polar(r, std::f64::consts::TAU * ia as f64 / 24.0);
                m = m.max((f.eval(t, p) - g.eval(t, p)).norm());
            }
        }
    }
    m
}

/// Distance between the bursts driven by `f` and `g`, and its ratio to
/// T^{1/2} ‖f − g‖∞. Both solves use the same T (no halving).
pub fn field_sensitivity(f: &FieldSpec, g: &FieldSpec, xi: f64, cfg: &GammaConfig) -> Result<Sensitivity> {
    cfg.validate()?;
    let solver = BurstSolver::new(xi)?;
    let s1 = solve_on(&solver, f, cfg, None)?;
    let s2 = solve_on(&solver, g, cfg, None)?;
    let sup_dist = s1
        .cartesian
        .iter()
        .zip(&s2.cartesian)
        .flat_map(|(a, b)| (0..3).map(move |j| (a[j] - b[j]).norm()))
        .fold(0.0, f64::max);
    let radius = s1
        .cartesian
        .iter()
        .chain(&s2.cartesian)
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    let field_distance = field_distance(f, g, radius, cfg.t_final);
    let ratio = if field_distance > 0.0 { sup_dist / (cfg.t_final.sqrt() * field_distance) } else { 0.0 };
    Ok(Sensitivity { sup_dist, ratio, field_distance, t_final: cfg.t_final })
}

/// Configuration of the triple at 0 < t0 ≤ T, for handing over to the integrator.
pub fn handoff(sol: &BurstSolution, t0: f64) -> Result<VortexConfiguration> {
    if !(t0 > 0.0 && t0 <= sol.t_final()) {
        return Err(Error::OutOfDomain(format!("t0 = {t0} outside (0, {}]", sol.t_final())));
    }
    let z = if t0 == sol.t_final() { *sol.cartesian.last().unwrap() } else { sol.position_at(t0)? };
    VortexConfiguration::new(sol.intensities().to_vec(), z.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_burst_is_fixed_point() {
        let cfg = GammaConfig { grid_nodes: 128, ..Default::default() };
        let sol = solve_burst(&FieldSpec::Zero, 1.0, &cfg).unwrap();
        assert!(sol.gamma_residual < 1e-13);
        let p = sol.params;
        for (i, t) in sol.times().iter().enumerate().skip(1) {
            let w = p.positions_at(*t).unwrap();
            for j in 0..3 {
                assert!((sol.cartesian[i][j] - w[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn handoff_range() {
        let cfg = GammaConfig { grid_nodes: 64, ..Default::default() };
        let sol = solve_burst(&FieldSpec::Zero, -2.0, &cfg).unwrap();
        assert!(handoff(&sol, 0.0).is_err());
        assert!(handoff(&sol, 1.0).is_err());
        let c = handoff(&sol, cfg.t_final).unwrap();
        assert_eq!(c.positions()[1], sol.cartesian.last().unwrap()[1]);
    }
}

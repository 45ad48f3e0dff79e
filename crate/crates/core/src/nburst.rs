//! Bursts inside an N-vortex configuration and inside the unit disk.
//!
//! The triple and the background are found by alternating the burst fixed
//! point (triple under the field of the current background curve) with an
//! integral update of the background under the triple's field.

use num_complex::Complex64;

use crate::burst::{solve_burst, solve_burst_from, BurstSolution, GammaConfig};
use crate::disk;
use crate::dynamics::{Event, EventGroup, EventKind, EventTrajectory, Geometry, Termination, Trajectory};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::grid::{GradedGrid, GridCurve};
use crate::selfsimilar::SelfSimilarParams;
use crate::vortex::{free_velocities, min_distance, ComplexPoint};

/// A vortex of intensity `xi` at the origin, bursting inside a background of
/// N vortices (N = 0 allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct NBurstProblem {
    pub intensities: Vec<f64>,
    pub positions: Vec<ComplexPoint>,
    pub xi: f64,
    pub rho: f64,
    pub t_final: f64,
}

impl NBurstProblem {
    pub fn new(intensities: Vec<f64>, positions: Vec<ComplexPoint>, xi: f64, rho: f64, t_final: f64) -> Result<Self> {
        if intensities.len() != positions.len() {
            return Err(Error::InvalidArgument("background intensities and positions differ in length".into()));
        }
        if !(xi != 0.0 && xi.is_finite()) {
            return Err(Error::InvalidIntensity(format!("xi = {xi}")));
        }
        if intensities.iter().any(|z| !(*z != 0.0 && z.is_finite())) {
            return Err(Error::InvalidIntensity("background intensities must be finite and nonzero".into()));
        }
        if !(rho > 0.0) || !(t_final > 0.0) {
            return Err(Error::InvalidArgument("rho and T must be positive".into()));
        }
        let limit = Self::max_rho(&positions);
        if positions.iter().any(|y| *y == Complex64::new(0.0, 0.0)) {
            return Err(Error::SingularInput("a background vortex sits at the burst point".into()));
        }
        if rho > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("rho = {rho} exceeds the admissible radius {limit}")));
        }
        Ok(Self { intensities, positions, xi, rho, t_final })
    }

    /// Largest admissible rho: a third of the smallest distance among the
    /// background vortices and the origin.
    pub fn max_rho(positions: &[ComplexPoint]) -> f64 {
        let d = min_distance(positions).min(positions.iter().map(|y| y.norm()).fold(f64::INFINITY, f64::min));
        d / 3.0
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn children(&self) -> [f64; 3] {
        crate::selfsimilar::child_intensities(self.xi)
    }

    fn max_intensity(&self) -> f64 {
        self.children().iter().chain(&self.intensities).map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Lipschitz bound for the background curve.
    pub fn lipschitz_bound(&self) -> f64 {
        (self.len() + 2) as f64 * self.max_intensity() / (2.0 * std::f64::consts::PI * self.rho)
    }
}

/// Time below which no background vortex can leave its rho-ball.
pub fn tstar_bound(prob: &NBurstProblem) -> f64 {
    2.0 * std::f64::consts::PI * prob.rho * prob.rho / ((prob.len() + 2) as f64 * prob.max_intensity())
}

/// Background positions on a graded grid; `positions[i][k]` is vortex k at node i.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundCurve {
    pub grid: GradedGrid,
    pub intensities: Vec<f64>,
    pub positions: Vec<Vec<ComplexPoint>>,
}

impl BackgroundCurve {
    pub fn constant(grid: GradedGrid, prob: &NBurstProblem) -> Self {
        let positions = vec![prob.positions.clone(); grid.panels() + 1];
        Self { grid, intensities: prob.intensities.clone(), positions }
    }

    pub fn displacement(&self) -> f64 {
        let y0 = &self.positions[0];
        self.positions
            .iter()
            .flat_map(|y| y.iter().zip(y0).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max)
    }

    pub fn lipschitz(&self) -> f64 {
        let t = self.grid.times();
        let mut m = 0.0f64;
        for i in 0..self.positions.len() - 1 {
            for (a, b) in self.positions[i].iter().zip(&self.positions[i + 1]) {
                m = m.max((b - a).norm() / (t[i + 1] - t[i]));
            }
        }
        m
    }

    /// Displacement and Lipschitz certificates.
    pub fn check(&self, prob: &NBurstProblem) -> Result<()> {
        let d = self.displacement();
        if d > prob.rho {
            return Err(Error::Certificate(format!("background displacement {d:.3e} exceeds rho = {:.3e}", prob.rho)));
        }
        let l = self.lipschitz();
        let bound = prob.lipschitz_bound();
        if l > bound {
            return Err(Error::Certificate(format!("background Lipschitz constant {l:.3e} exceeds {bound:.3e}")));
        }
        Ok(())
    }

    fn distance(&self, other: &Self) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }
}

/// Field of the background vortices, cut off outside |p| ≤ 2 rho.
pub fn background_field(y: &BackgroundCurve, rho: f64) -> Result<FieldSpec> {
    if y.intensities.is_empty() {
        return Ok(FieldSpec::Zero);
    }
    if y.positions.iter().flatten().any(|p| p.norm() <= 2.0 * rho) {
        return Err(Error::Certificate("a background vortex enters the support of the cut-off field".into()));
    }
    Ok(FieldSpec::VortexBackground {
        intensities: y.intensities.clone(),
        curve: GridCurve::new(y.grid.clone(), y.positions.clone())?,
        cutoff: rho,
    })
}

/// Background update: y_k(t) = y_k(0) + ∫₀ᵗ velocity of k under the other
/// background vortices and the triple x.
pub fn gamma_y(x: &BurstSolution, y: &BackgroundCurve, prob: &NBurstProblem) -> Result<BackgroundCurve> {
    if x.grid() != &y.grid {
        return Err(Error::InvalidArgument("triple and background live on different grids".into()));
    }
    let grid = &y.grid;
    let n = prob.len();
    let mut all_x = x.intensities().to_vec();
    all_x.extend_from_slice(&prob.intensities);
    let zero = Complex64::new(0.0, 0.0);
    let mut integrand = vec![vec![zero; n]; grid.panels() + 1];
    for (i, row) in integrand.iter_mut().enumerate() {
        let mut z = x.cartesian[i].to_vec();
        z.extend_from_slice(&y.positions[i]);
        let v = free_velocities(&all_x, &z);
        let jac = grid.jacobian(i);
        for k in 0..n {
            row[k] = v[3 + k] * jac;
        }
    }
    let mut positions = vec![prob.positions.clone(); grid.panels() + 1];
    for k in 0..n {
        let g: Vec<Complex64> = integrand.iter().map(|r| r[k]).collect();
        let c = grid.cumulative(&g, zero);
        for (i, ci) in c.iter().enumerate() {
            positions[i][k] += ci;
        }
    }
    let out = BackgroundCurve { grid: grid.clone(), intensities: prob.intensities.clone(), positions };
    out.check(prob)?;
    Ok(out)
}

/// Relative finite-difference ODE residual of node positions at panel
/// midpoints with t > T/10.
pub fn midpoint_residual<F>(grid: &GradedGrid, z: &[Vec<ComplexPoint>], velocity: F) -> f64
where
    F: Fn(f64, &[ComplexPoint]) -> Vec<ComplexPoint>,
{
    let n = grid.panels();
    let h = grid.h();
    let m = z[0].len();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        if grid.t(i) < grid.t_final() / 10.0 {
            continue;
        }
        let zm: Vec<Complex64> =
            (0..m).map(|j| (-z[i - 1][j] + 9.0 * z[i][j] + 9.0 * z[i + 1][j] - z[i + 2][j]) / 16.0).collect();
        let sm = (i as f64 + 0.5) * h;
        let jac = grid.jacobian_at(sm);
        let v = velocity(grid.t_of_sigma(sm), &zm);
        let scale = v.iter().map(|w| w.norm()).fold(0.0, f64::max);
        for j in 0..m {
            let dz = (z[i - 1][j] - 27.0 * z[i][j] + 27.0 * z[i + 1][j] - z[i + 2][j]) / (24.0 * h);
            worst = worst.max((dz / jac - v[j]).norm() / scale);
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct NBurstSolution {
    pub burst: BurstSolution,
    pub background: BackgroundCurve,
    /// Parent plus background at t = 0, burst event, then the (3+N)-vortex segment on (0, T].
    pub trajectory: EventTrajectory,
    pub outer_history: Vec<f64>,
    pub residual: f64,
}

impl NBurstSolution {
    pub fn t_final(&self) -> f64 {
        self.burst.t_final()
    }

    /// All 3+N positions at grid node i (triple first).
    pub fn node(&self, i: usize) -> Vec<ComplexPoint> {
        let mut z = self.burst.cartesian[i].to_vec();
        z.extend_from_slice(&self.background.positions[i]);
        z
    }
}

pub(crate) fn burst_events(
    xi: f64,
    children: [f64; 3],
    origin: ComplexPoint,
    others: &[f64],
    others0: &[ComplexPoint],
    grid: &GradedGrid,
    nodes: impl Fn(usize) -> Vec<ComplexPoint>,
    geometry: Geometry,
    tolerance: f64,
) -> EventTrajectory {
    let mut x0 = vec![xi];
    x0.extend_from_slice(others);
    let mut z0 = vec![origin];
    z0.extend_from_slice(others0);
    let before = Trajectory {
        intensities: x0,
        times: vec![0.0],
        positions: vec![z0],
        geometry,
        tolerance,
        termination: Termination::Completed,
    };
    let mut x1 = children.to_vec();
    x1.extend_from_slice(others);
    let after = Trajectory {
        intensities: x1,
        times: grid.times()[1..].to_vec(),
        positions: (1..=grid.panels()).map(nodes).collect(),
        geometry,
        tolerance,
        termination: Termination::Completed,
    };
    let event = Event {
        time: 0.0,
        kind: EventKind::Burst,
        groups: vec![EventGroup { one: 0, many: vec![0, 1, 2], point: origin }],
        carried: (0..others.len()).map(|k| (1 + k, 3 + k)).collect(),
    };
    EventTrajectory { segments: vec![before, after], events: vec![event] }
}

/// Event trajectory of a lone burst at `origin`: the parent at t = 0, then
/// the triple on the solver grid.
pub fn lone_burst_events(sol: &BurstSolution, origin: ComplexPoint) -> EventTrajectory {
    let grid = sol.grid().clone();
    burst_events(
        sol.params.xi,
        sol.intensities(),
        origin,
        &[],
        &[],
        &grid,
        |i| sol.cartesian[i].iter().map(|z| z + origin).collect(),
        Geometry::Plane,
        sol.gamma_residual,
    )
}

/// Burst at the origin inside the background of `prob`. The outer tolerance
/// is ten times `cfg.picard_tol`.
pub fn solve_nburst(prob: &NBurstProblem, cfg: &GammaConfig) -> Result<NBurstSolution> {
    let tstar = tstar_bound(prob);
    if prob.t_final > tstar {
        return Err(Error::InvalidArgument(format!("T = {} exceeds T* = {tstar}", prob.t_final)));
    }
    let mut c = GammaConfig { t_final: prob.t_final, rho: Some(prob.rho), ..cfg.clone() };
    let outer_tol = 10.0 * cfg.picard_tol;
    let outer_max = cfg.picard_max_iter.min(50);
    let mut y = BackgroundCurve::constant(c.grid()?, prob);
    let mut x = solve_burst(&background_field(&y, prob.rho)?, prob.xi, &c)?;
    let mut history = vec![];
    if !prob.is_empty() {
        if x.halvings > 0 {
            c.t_final = x.t_final();
            y = BackgroundCurve::constant(c.grid()?, prob);
        }
        c.max_halvings = 0;
        let mut converged = false;
        for _ in 0..outer_max {
            let y_new = gamma_y(&x, &y, prob)?;
            let x_new = solve_burst_from(&background_field(&y_new, prob.rho)?, prob.xi, &c, x.curve.clone())?;
            let dx = x
                .cartesian
                .iter()
                .zip(&x_new.cartesian)
                .flat_map(|(a, b)| (0..3).map(move |j| (a[j] - b[j]).norm()))
                .fold(0.0, f64::max);
            let d = dx.max(y_new.distance(&y));
            history.push(d);
            x = x_new;
            y = y_new;
            if d < outer_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: history.len(),
                last: *history.last().unwrap_or(&f64::NAN),
                history,
            });
        }
        // background consistent with the final triple
        y = gamma_y(&x, &y, prob)?;
    }
    let grid = x.grid().clone();
    let children = prob.children();
    let mut all_x = children.to_vec();
    all_x.extend_from_slice(&prob.intensities);
    let nodes: Vec<Vec<ComplexPoint>> = (0..=grid.panels())
        .map(|i| {
            let mut z = x.cartesian[i].to_vec();
            z.extend_from_slice(&y.positions[i]);
            z
        })
        .collect();
    let residual = midpoint_residual(&grid, &nodes, |_, z| free_velocities(&all_x, z));
    if residual > 1e-6 {
        return Err(Error::Certificate(format!("full-system ODE residual {residual:.3e} exceeds 1e-6")));
    }
    let trajectory = burst_events(
        prob.xi,
        children,
        Complex64::new(0.0, 0.0),
        &prob.intensities,
        &prob.positions,
        &grid,
        |i| nodes[i].clone(),
        Geometry::Plane,
        x.gamma_residual,
    );
    Ok(NBurstSolution { burst: x, background: y, trajectory, outer_history: history, residual })
}

#[derive(Debug, Clone)]
pub struct DiskBurstSolution {
    pub z0: ComplexPoint,
    /// Burst-frame solution (positions relative to z0).
    pub burst: BurstSolution,
    pub trajectory: EventTrajectory,
    pub outer_history: Vec<f64>,
    /// max |C_z(t)| / t over the grid, C_z = Σ ξ_j (z_j − z0).
    pub c_emp: f64,
    pub residual: f64,
}

fn disk_field(z0: ComplexPoint, children: [f64; 3], x: &BurstSolution) -> Result<FieldSpec> {
    let curve = GridCurve::new(x.grid().clone(), x.cartesian.iter().map(|z| z.to_vec()).collect())?;
    Ok(FieldSpec::DiskBoundary { intensities: children.to_vec(), curve, origin: z0 })
}

/// Burst of a vortex of intensity `xi` at z0 inside the unit disk; the
/// boundary acts on the triple through its image field.
pub fn solve_disk_burst(z0: ComplexPoint, xi: f64, cfg: &GammaConfig) -> Result<DiskBurstSolution> {
    if !(z0.norm_sqr() < 1.0) {
        return Err(Error::OutOfDomain(format!("z0 = {z0} is not inside the unit disk")));
    }
    let p = SelfSimilarParams::for_intensity(xi)?;
    let children = p.intensities();
    let room = 1.0 - z0.norm();
    let mut c = GammaConfig { rho: Some(cfg.rho.unwrap_or(room / 3.0).min(room / 3.0)), ..cfg.clone() };
    // first pass: the free burst drives the image field
    let free = solve_burst(&FieldSpec::Zero, xi, &c)?;
    c.t_final = free.t_final();
    c.max_halvings = 0;
    let mut x = free;
    let outer_tol = 10.0 * cfg.picard_tol;
    let mut history = vec![];
    let mut converged = false;
    for _ in 0..cfg.picard_max_iter.min(50) {
        let f = disk_field(z0, children, &x)?;
        let x_new = solve_burst_from(&f, xi, &c, x.curve.clone())?;
        let d = x
            .cartesian
            .iter()
            .zip(&x_new.cartesian)
            .flat_map(|(a, b)| (0..3).map(move |j| (a[j] - b[j]).norm()))
            .fold(0.0, f64::max);
        history.push(d);
        x = x_new;
        if d < outer_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: history.len(), last: *history.last().unwrap(), history });
    }
    let grid = x.grid().clone();
    let nodes: Vec<Vec<ComplexPoint>> = x.cartesian.iter().map(|z| z.iter().map(|w| z0 + w).collect()).collect();
    let residual = midpoint_residual(&grid, &nodes, |_, z| disk::disk_velocities(&children, z));
    if residual > 1e-6 {
        return Err(Error::Certificate(format!("disk ODE residual {residual:.3e} exceeds 1e-6")));
    }
    let mut c_emp = 0.0f64;
    for (i, t) in grid.times().iter().enumerate().skip(1) {
        let cz: Complex64 = (0..3).map(|j| children[j] * x.cartesian[i][j]).sum();
        c_emp = c_emp.max(cz.norm() / t);
    }
    let trajectory = burst_events(xi, children, z0, &[], &[], &grid, |i| nodes[i].clone(), Geometry::Disk, x.gamma_residual);
    Ok(DiskBurstSolution { z0, burst: x, trajectory, outer_history: history, c_emp, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tstar_examples() {
        let p = NBurstProblem::new(vec![1.0], vec![Complex64::new(5.0, 0.0)], 1.0, 0.1, 1e-3).unwrap();
        assert!((tstar_bound(&p) - 2.0 * std::f64::consts::PI * 0.01 / 3.0).abs() < 1e-15);
        let q = NBurstProblem::new(vec![2.0], vec![Complex64::new(5.0, 0.0)], 2.0, 0.1, 1e-3).unwrap();
        assert!((tstar_bound(&q) - tstar_bound(&p) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rho_must_fit() {
        assert!(NBurstProblem::new(vec![1.0], vec![Complex64::new(0.3, 0.0)], 1.0, 0.2, 1e-3).is_err());
        assert!(NBurstProblem::new(vec![1.0], vec![Complex64::new(0.0, 0.0)], 1.0, 0.01, 1e-3).is_err());
    }
}

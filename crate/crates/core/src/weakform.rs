//! Weak-solution certificates for event trajectories: the symmetrised
//! kernel H_φ, the off-diagonal pairing, the weak residual over a battery of
//! bump test functions, and the energy ledger across events.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::disk;
use crate::dynamics::{EventKind, EventTrajectory, Geometry, Trajectory};
use crate::error::{Error, Result};
use crate::vortex::{hamiltonian, ComplexPoint, VortexConfiguration};

/// exp(1 − 1/(1 − |x−c|²/r²)) inside the ball, 0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub center: ComplexPoint,
    pub radius: f64,
}

// profile g(s) = exp(1 − 1/(1 − s²)) and the two Hessian eigenvalues (times r²)
fn profile_hessian(s: f64) -> (f64, f64) {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        return (0.0, 0.0);
    }
    let g = (1.0 - 1.0 / w).exp();
    let radial = g * (4.0 * s * s / w.powi(4) - 2.0 / (w * w) - 8.0 * s * s / w.powi(3));
    let tangential = -2.0 * g / (w * w);
    (radial, tangential)
}

/// sup_s max(|g''(s)|, |g'(s)/s|) for the unit-radius profile.
fn unit_lipschitz() -> f64 {
    static L: OnceLock<f64> = OnceLock::new();
    *L.get_or_init(|| {
        let n = 200_000;
        let mut m = 0.0f64;
        for i in 0..n {
            let s = i as f64 / n as f64;
            let (a, b) = profile_hessian(s);
            m = m.max(a.abs()).max(b.abs());
        }
        // sampling spacing 5e-6; the profile's third derivative is below 50
        m * (1.0 + 1e-6) + 50.0 / n as f64
    })
}

impl TestFunction {
    pub fn new(center: ComplexPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("test function radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn value(&self, x: ComplexPoint) -> f64 {
        let u = (x - self.center).norm_sqr() / (self.radius * self.radius);
        if u >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u)).exp()
        }
    }

    /// ∇φ as ∂₁φ + i ∂₂φ.
    pub fn gradient(&self, x: ComplexPoint) -> ComplexPoint {
        let d = x - self.center;
        let r2 = self.radius * self.radius;
        let u = d.norm_sqr() / r2;
        if u >= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = 1.0 - u;
        let phi = (1.0 - 1.0 / w).exp();
        d * (-2.0 * phi / (w * w * r2))
    }

    /// Lipschitz constant of ∇φ.
    pub fn gradient_lipschitz(&self) -> f64 {
        unit_lipschitz() / (self.radius * self.radius)
    }

    /// ⟨φ, ω⟩ = Σ ξ_j φ(z_j).
    pub fn pair(&self, intensities: &[f64], z: &[ComplexPoint]) -> f64 {
        intensities.iter().zip(z).map(|(x, p)| x * self.value(*p)).sum()
    }
}

/// K(w) = w⊥ / (2π|w|²).
fn kernel(w: ComplexPoint) -> ComplexPoint {
    Complex64::i() * w / (2.0 * PI * w.norm_sqr())
}

fn dot(a: ComplexPoint, b: ComplexPoint) -> f64 {
    a.re * b.re + a.im * b.im
}

/// H_φ(x, y) = ½ (∇φ(x) − ∇φ(y)) · K(x − y).
pub fn h_phi(phi: &TestFunction, x: ComplexPoint, y: ComplexPoint) -> Result<f64> {
    if x == y {
        return Err(Error::SingularInput("H_phi is not evaluated on the diagonal".into()));
    }
    Ok(h_phi_unchecked(phi, x, y))
}

fn h_phi_unchecked(phi: &TestFunction, x: ComplexPoint, y: ComplexPoint) -> f64 {
    let g = phi.gradient(x) - phi.gradient(y);
    if g == Complex64::new(0.0, 0.0) {
        return 0.0;
    }
    0.5 * dot(g, kernel(x - y))
}

/// ⟨H_φ, ω⋄ω⟩ = Σ_{j≠k} ξ_j ξ_k H_φ(z_j, z_k).
pub fn diamond_pairing(phi: &TestFunction, config: &VortexConfiguration) -> f64 {
    diamond_raw(phi, config.intensities(), config.positions())
}

/// Σ_j ξ_j ∇φ(z_j)·u_b(z_j), with u_b the velocity induced by the unit-disk
/// boundary.
fn boundary_term(phi: &TestFunction, xs: &[f64], z: &[ComplexPoint]) -> f64 {
    xs.iter()
        .zip(z)
        .map(|(x, p)| {
            let g = phi.gradient(*p);
            if g == Complex64::new(0.0, 0.0) {
                0.0
            } else {
                x * dot(g, disk::image_velocity(xs, z, *p))
            }
        })
        .sum()
}

fn diamond_raw(phi: &TestFunction, xs: &[f64], z: &[ComplexPoint]) -> f64 {
    let grads: Vec<ComplexPoint> = z.iter().map(|p| phi.gradient(*p)).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut s = 0.0;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            let g = grads[j] - grads[k];
            if g != zero && z[j] != z[k] {
                s += xs[j] * xs[k] * 0.5 * dot(g, kernel(z[j] - z[k]));
            }
        }
    }
    2.0 * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidualEntry {
    pub phi: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub quad_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidualReport {
    pub phis: Vec<TestFunction>,
    pub entries: Vec<WeakResidualEntry>,
}

impl WeakResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual.abs()).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&WeakResidualEntry> {
        self.entries.iter().max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()))
    }

    pub fn max_quad_error(&self) -> f64 {
        self.entries.iter().map(|e| e.quad_error).fold(0.0, f64::max)
    }
}

// ∫ over [t[i], t[i+1]] of the cubic through the four nodes starting at i0
fn cubic_panel(t: &[f64], g: &[f64], i: usize, i0: usize) -> f64 {
    let (a, b) = (t[i], t[i + 1]);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let off = half / 3f64.sqrt();
    let mut s = 0.0;
    for x in [mid - off, mid + off] {
        for m in 0..4 {
            let mut l = 1.0;
            for r in 0..4 {
                if r != m {
                    l *= (x - t[i0 + r]) / (t[i0 + m] - t[i0 + r]);
                }
            }
            s += l * g[i0 + m];
        }
    }
    s * half
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 4] = [0.1834346424956498, 0.525532409916329, 0.7966664774136267, 0.9602898564975363];
const GL_W: [f64; 4] = [0.362683783378362, 0.313706658787793, 0.2223810344533745, 0.1012285362903763];

fn lagrange(xs: &[f64], x: f64, m: usize) -> f64 {
    let mut l = 1.0;
    for (r, xr) in xs.iter().enumerate() {
        if r != m {
            l *= (x - xr) / (xs[m] - xr);
        }
    }
    l
}

/// A segment end at an event where a group of vortices meets at `point`.
struct SingularEnd {
    t_e: f64,
    groups: Vec<(ComplexPoint, Vec<usize>)>,
}

/// Quadrature of the pairing along one segment. Near a singular end, group
/// members are interpolated through log(z − p) as cubics in ln|t − t_e|,
/// which is exact for self-similar spirals, and panels are integrated in
/// that variable.
struct SegmentQuad<'a> {
    seg: &'a Trajectory,
    end: Option<SingularEnd>,
    /// unwrapped log(z_j − p) for group members, per node
    logs: Vec<Vec<Option<Complex64>>>,
}

impl<'a> SegmentQuad<'a> {
    fn new(seg: &'a Trajectory, end: Option<SingularEnd>) -> Self {
        let mut logs = vec![vec![None; seg.vortex_count()]; seg.len()];
        if let Some(e) = &end {
            for (p, members) in &e.groups {
                for &j in members {
                    let mut prev: Option<f64> = None;
                    for i in 0..seg.len() {
                        let w = seg.positions[i][j] - p;
                        let mut arg = w.arg();
                        if let Some(q) = prev {
                            arg += (q - arg + std::f64::consts::PI).div_euclid(2.0 * PI) * 2.0 * PI;
                        }
                        prev = Some(arg);
                        logs[i][j] = Some(Complex64::new(w.norm().ln(), arg));
                    }
                }
            }
        }
        Self { seg, end, logs }
    }

    fn s_of(&self, t: f64) -> f64 {
        (t - self.end.as_ref().unwrap().t_e).abs().ln()
    }

    fn point_of(&self, j: usize) -> ComplexPoint {
        let e = self.end.as_ref().unwrap();
        e.groups.iter().find(|(_, m)| m.contains(&j)).map(|(p, _)| *p).unwrap()
    }

    /// Positions at t from the four-node stencil starting at i0.
    fn positions(&self, i0: usize, t: f64) -> Vec<ComplexPoint> {
        let seg = self.seg;
        let ts = &seg.times[i0..i0 + 4];
        let wt: Vec<f64> = (0..4).map(|m| lagrange(ts, t, m)).collect();
        let (ss, s) = if self.end.is_some() {
            (ts.iter().map(|x| self.s_of(*x)).collect::<Vec<_>>(), self.s_of(t))
        } else {
            (vec![], 0.0)
        };
        (0..seg.vortex_count())
            .map(|j| match self.logs[i0][j] {
                Some(_) => {
                    let u: Complex64 = (0..4).map(|m| self.logs[i0 + m][j].unwrap() * lagrange(&ss, s, m)).sum();
                    self.point_of(j) + u.exp()
                }
                None => (0..4).map(|m| seg.positions[i0 + m][j] * wt[m]).sum(),
            })
            .collect()
    }

    fn refined(&self, i: usize) -> bool {
        match &self.end {
            Some(e) if self.seg.len() >= 4 => {
                let (a, b) = ((self.seg.times[i] - e.t_e).abs(), (self.seg.times[i + 1] - e.t_e).abs());
                a > 0.0 && b > 0.0 && (b / a).ln().abs() > 0.02
            }
            _ => false,
        }
    }

    /// Weighted sample configurations whose weighted integrand sum gives the
    /// panel integral, plus a second set (two half panels) for the error
    /// estimate. None for panels handled by the nodal cubic rule.
    fn refined_points(&self, i: usize) -> Option<(Samples, Samples)> {
        if !self.refined(i) {
            return None;
        }
        let t = &self.seg.times;
        let n = self.seg.len();
        let i0 = (i as isize - 1).clamp(0, n as isize - 4) as usize;
        let t_e = self.end.as_ref().unwrap().t_e;
        let dir = if t[i] > t_e { 1.0 } else { -1.0 };
        let (sa, sb) = (self.s_of(t[i]), self.s_of(t[i + 1]));
        let at = |pts: Vec<(f64, f64)>| -> Samples {
            pts.into_iter()
                .map(|(s, w)| (dir * w * s.exp(), self.positions(i0, t_e + dir * s.exp())))
                .collect()
        };
        let sm = 0.5 * (sa + sb);
        let mut halves = gauss_points(sa, sm);
        halves.extend(gauss_points(sm, sb));
        Some((at(gauss_points(sa, sb)), at(halves)))
    }

    /// Gauss points in t on panel i with positions from the stencil at i0,
    /// and the same on the two half panels.
    fn interpolated_points(&self, i: usize, i0: usize) -> (Samples, Samples) {
        let (a, b) = (self.seg.times[i], self.seg.times[i + 1]);
        let at = |pts: Vec<(f64, f64)>| -> Samples {
            pts.into_iter().map(|(t, w)| (w, self.positions(i0, t))).collect()
        };
        let m = 0.5 * (a + b);
        let mut halves = gauss_points(a, m);
        halves.extend(gauss_points(m, b));
        (at(gauss_points(a, b)), at(halves))
    }

    /// Samples for ∫ from the singular end to the nearest node, extrapolating
    /// the group log-linearly from the two nearest nodes.
    fn gap_points(&self, at_start: bool) -> Samples {
        let seg = self.seg;
        let e = match &self.end {
            Some(e) if seg.len() >= 2 => e,
            _ => return vec![],
        };
        let (i1, i2) = if at_start { (0, 1) } else { (seg.len() - 1, seg.len() - 2) };
        let d1 = (seg.times[i1] - e.t_e).abs();
        if d1 == 0.0 {
            return vec![];
        }
        let (s1, s2) = (d1.ln(), self.s_of(seg.times[i2]));
        let config = |s: f64| -> Vec<ComplexPoint> {
            (0..seg.vortex_count())
                .map(|j| match (self.logs[i1][j], self.logs[i2][j]) {
                    (Some(u1), Some(u2)) => self.point_of(j) + (u1 + (u2 - u1) * ((s - s1) / (s2 - s1))).exp(),
                    _ => seg.positions[i1][j],
                })
                .collect()
        };
        let mut out = vec![];
        for k in 0..40 {
            let hi = s1 - k as f64;
            for (s, w) in gauss_points(hi - 1.0, hi) {
                out.push((w * s.exp(), config(s)));
            }
        }
        out
    }
}

/// Nodal-rule error estimate above which a panel is re-integrated.
const PANEL_SWITCH: f64 = 1e-10;

type Samples = Vec<(f64, Vec<ComplexPoint>)>;

fn gauss_points(a: f64, b: f64) -> Vec<(f64, f64)> {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_X.iter().zip(GL_W).flat_map(|(x, w)| [(m - h * x, w * h), (m + h * x, w * h)]).collect()
}

fn singular_end(traj: &EventTrajectory, k: usize, at_start: bool) -> Option<SingularEnd> {
    let e = if at_start {
        if k == 0 {
            return None;
        }
        &traj.events[k - 1]
    } else {
        traj.events.get(k)?
    };
    let wanted = if at_start { EventKind::Burst } else { EventKind::Merge };
    if e.kind != wanted {
        return None;
    }
    Some(SingularEnd { t_e: e.time, groups: e.groups.iter().map(|g| (g.point, g.many.clone())).collect() })
}

enum Panel {
    Trapezoid,
    Cubic { i0: usize, alt: Option<usize> },
    Sampled { q: Samples, half: Samples },
}

/// Everything about a segment's quadrature that does not depend on φ.
struct SegmentPlan<'a> {
    start: SegmentQuad<'a>,
    end: SegmentQuad<'a>,
    lead: Samples,
    panels: Vec<Panel>,
    tail: Samples,
}

fn plan_segment(traj: &EventTrajectory, k: usize) -> SegmentPlan<'_> {
    let seg = &traj.segments[k];
    let n = seg.len();
    let start = SegmentQuad::new(seg, singular_end(traj, k, true));
    let end = SegmentQuad::new(seg, singular_end(traj, k, false));
    let lead = if k == 0 {
        vec![]
    } else if start.end.is_some() {
        start.gap_points(true)
    } else {
        vec![(seg.t_start() - traj.events[k - 1].time, seg.positions[0].clone())]
    };
    let tail = if k + 1 == traj.segments.len() {
        vec![]
    } else if end.end.is_some() {
        end.gap_points(false)
    } else {
        vec![(traj.events[k].time - seg.t_end(), seg.positions[n - 1].clone())]
    };
    let panels = (0..n.saturating_sub(1))
        .map(|i| {
            if n < 4 {
                return Panel::Trapezoid;
            }
            let quad = if i < n / 2 { &start } else { &end };
            if let Some((q, half)) = quad.refined_points(i) {
                return Panel::Sampled { q, half };
            }
            let i0 = (i as isize - 1).clamp(0, n as isize - 4) as usize;
            let alt = if i0 < i && i0 + 4 < n {
                Some(i0 + 1)
            } else if i0 >= 1 && i <= i0 + 1 {
                Some(i0 - 1)
            } else {
                None
            };
            Panel::Cubic { i0, alt }
        })
        .collect();
    SegmentPlan { start, end, lead, panels, tail }
}

/// Residual ⟨φ,ω_t⟩ − ⟨φ,ω_0⟩ − ∫₀ᵗ ⟨H_φ, ω_s⋄ω_s⟩ ds at every node of
/// every segment (or at the nodes nearest to `checkpoints` when given).
///
/// Panels use the cubic through four neighbouring nodes. Near a burst or
/// merge, members of the event group are interpolated through log(z − p)
/// as cubics in ln|t − t_e|, which is exact for self-similar spirals, and
/// those panels are integrated by Gauss–Legendre in that variable.
pub fn weak_residual(traj: &EventTrajectory, phis: &[TestFunction], checkpoints: &[f64]) -> WeakResidualReport {
    let plans: Vec<SegmentPlan> = (0..traj.segments.len()).map(|k| plan_segment(traj, k)).collect();
    let mut entries = vec![];
    for (pi, phi) in phis.iter().enumerate() {
        let first = &traj.segments[0];
        let p0 = phi.pair(&first.intensities, &first.positions[0]);
        let mut acc = 0.0;
        let mut acc_err = 0.0;
        for (seg, plan) in traj.segments.iter().zip(&plans) {
            let g = |z: &[ComplexPoint]| match seg.geometry {
                Geometry::Plane => diamond_raw(phi, &seg.intensities, z),
                Geometry::Disk => diamond_raw(phi, &seg.intensities, z) + boundary_term(phi, &seg.intensities, z),
            };
            let sum = |pts: &Samples| pts.iter().map(|(w, z)| w * g(z)).sum::<f64>();
            let gn: Vec<f64> = seg.positions.iter().map(|z| g(z)).collect();
            acc += sum(&plan.lead);
            let n = seg.len();
            let t = &seg.times;
            let mut cum = vec![0.0; n];
            let mut cerr = vec![0.0; n];
            for (i, panel) in plan.panels.iter().enumerate() {
                let (q, e) = match panel {
                    Panel::Trapezoid => (0.5 * (gn[i] + gn[i + 1]) * (t[i + 1] - t[i]), 0.0),
                    Panel::Cubic { i0, alt } => {
                        let q = cubic_panel(t, &gn, i, *i0);
                        let e = alt.map_or(0.0, |a| (q - cubic_panel(t, &gn, i, a)).abs());
                        if e > PANEL_SWITCH {
                            // integrand too rough for the nodal rule: Gauss in t
                            // on interpolated positions
                            let quad = if i < n / 2 { &plan.start } else { &plan.end };
                            let (full, half) = quad.interpolated_points(i, *i0);
                            let q = sum(&full);
                            (q, (sum(&half) - q).abs())
                        } else {
                            (q, e)
                        }
                    }
                    Panel::Sampled { q, half } => {
                        let q = sum(q);
                        (q, (sum(half) - q).abs())
                    }
                };
                cum[i + 1] = cum[i] + q;
                cerr[i + 1] = cerr[i] + e;
            }
            for i in 0..n {
                let keep = checkpoints.is_empty()
                    || checkpoints.iter().any(|c| {
                        *c >= seg.t_start() && *c <= seg.t_end() && t.partition_point(|s| s < c).min(n - 1) == i
                    });
                if keep {
                    let lhs = phi.pair(&seg.intensities, &seg.positions[i]) - p0;
                    let rhs = acc + cum[i];
                    entries.push(WeakResidualEntry {
                        phi: pi,
                        t: t[i],
                        lhs,
                        rhs,
                        residual: lhs - rhs,
                        quad_error: acc_err + cerr[i],
                    });
                }
            }
            acc += cum[n - 1] + sum(&plan.tail);
            acc_err += cerr[n - 1];
        }
    }
    WeakResidualReport { phis: phis.to_vec(), entries }
}

/// Twelve bumps: three radii around four centers. The centers are the first
/// event point (or the initial center of the configuration), a point offset
/// from it, the final position of vortex 0, and a point far away from every
/// vortex.
pub fn standard_battery(traj: &EventTrajectory) -> Vec<TestFunction> {
    let first = &traj.segments[0];
    let last = traj.segments.last().unwrap();
    let c0 = match traj.events.first() {
        Some(e) => e.groups[0].point,
        None => first.positions[0].iter().sum::<Complex64>() / first.vortex_count() as f64,
    };
    let zl = last.positions.last().unwrap();
    let mut s = zl.iter().map(|z| (z - c0).norm()).fold(0.0, f64::max);
    for seg in &traj.segments {
        for z in &seg.positions {
            s = s.max(z.iter().map(|w| (w - c0).norm()).fold(0.0, f64::max));
        }
    }
    let s = s.max(1e-6);
    let centers = [c0, c0 + Complex64::new(0.6, 0.3) * s, zl[0], c0 + Complex64::new(0.0, 20.0 * s)];
    let mut out = vec![];
    for c in centers {
        for r in [0.5 * s, 1.2 * s, 3.0 * s] {
            out.push(TestFunction { center: c, radius: r });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentEnergy {
    pub t0: f64,
    pub t1: f64,
    pub value: f64,
    /// max |H(t) − H(t0)| / max(|H(t0)|, 1e-300) over the segment's nodes
    pub variation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyJump {
    pub time: f64,
    pub kind: EventKind,
    pub before: f64,
    pub after: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub segments: Vec<SegmentEnergy>,
    pub jumps: Vec<EnergyJump>,
}

impl EnergyLedger {
    pub fn max_variation(&self) -> f64 {
        self.segments.iter().map(|s| s.variation).fold(0.0, f64::max)
    }

    pub fn total_jump(&self) -> f64 {
        self.jumps.iter().map(|j| j.jump).sum()
    }
}

fn energy(seg: &Trajectory, z: &[ComplexPoint]) -> f64 {
    match seg.geometry {
        Geometry::Plane => hamiltonian(&seg.intensities, z),
        Geometry::Disk => disk::disk_hamiltonian(&seg.intensities, z),
    }
}

/// H toward one end of a segment, extrapolated from offsets h, 2h, 4h
/// (h = span/100) with Richardson weights 8/3, −2, 1/3.
fn one_sided(seg: &Trajectory, at_start: bool) -> f64 {
    let span = seg.t_end() - seg.t_start();
    let end = if at_start { seg.t_start() } else { seg.t_end() };
    if seg.len() < 4 || span <= 0.0 {
        let z = if at_start { &seg.positions[0] } else { seg.positions.last().unwrap() };
        return energy(seg, z);
    }
    let h = span / 100.0;
    let dir = if at_start { 1.0 } else { -1.0 };
    let at = |k: f64| {
        seg.position_at(end + dir * k * h).map(|z| energy(seg, &z)).unwrap_or(f64::NAN)
    };
    8.0 / 3.0 * at(1.0) - 2.0 * at(2.0) + at(4.0) / 3.0
}

pub fn energy_ledger(traj: &EventTrajectory) -> EnergyLedger {
    let mut segments = vec![];
    for seg in &traj.segments {
        let h0 = energy(seg, &seg.positions[0]);
        let mut var = 0.0f64;
        for z in &seg.positions {
            var = var.max((energy(seg, z) - h0).abs());
        }
        segments.push(SegmentEnergy {
            t0: seg.t_start(),
            t1: seg.t_end(),
            value: h0,
            variation: var / h0.abs().max(1e-300),
        });
    }
    let mut jumps = vec![];
    for (k, e) in traj.events.iter().enumerate() {
        let before = one_sided(&traj.segments[k], false);
        let after = one_sided(&traj.segments[k + 1], true);
        jumps.push(EnergyJump { time: e.time, kind: e.kind, before, after, jump: after - before });
    }
    EnergyLedger { segments, jumps }
}

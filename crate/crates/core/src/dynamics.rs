//! Regular integration of the N-vortex system (plane or unit disk, optional
//! external field), trajectories decorated with burst and merge events,
//! collapse detection with merge continuation, and time reversal.

use num_complex::Complex64;

use crate::burst::BurstSolution;
use crate::disk;
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::vortex::{collapse_admissible_tol, free_velocities, min_distance, ComplexPoint, VortexConfiguration};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Plane,
    Disk,
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Plane => "plane",
            Geometry::Disk => "disk",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub geometry: Geometry,
    pub field: Option<FieldSpec>,
    pub config0: VortexConfiguration,
}

impl SystemSpec {
    pub fn new(geometry: Geometry, field: Option<FieldSpec>, config0: VortexConfiguration) -> Result<Self> {
        if geometry == Geometry::Disk && config0.positions().iter().any(|z| z.norm_sqr() >= 1.0) {
            return Err(Error::OutOfDomain("disk geometry needs every vortex inside the unit disk".into()));
        }
        Ok(Self { geometry, field, config0 })
    }

    pub fn plane(config0: VortexConfiguration) -> Self {
        Self { geometry: Geometry::Plane, field: None, config0 }
    }
}

/// Velocities of the system at time t.
pub fn system_velocities(
    geometry: Geometry,
    field: Option<&FieldSpec>,
    intensities: &[f64],
    t: f64,
    z: &[ComplexPoint],
) -> Vec<ComplexPoint> {
    let mut v = match geometry {
        Geometry::Plane => free_velocities(intensities, z),
        Geometry::Disk => disk::disk_velocities(intensities, z),
    };
    if let Some(f) = field {
        for (vj, zj) in v.iter_mut().zip(z) {
            *vj += f.velocity(t, *zj);
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    NearCollapse { time: f64, pair: (usize, usize), distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub intensities: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<ComplexPoint>>,
    pub geometry: Geometry,
    pub tolerance: f64,
    pub termination: Termination,
}

impl Trajectory {
    pub fn single(config: &VortexConfiguration, t: f64, geometry: Geometry) -> Self {
        Self {
            intensities: config.intensities().to_vec(),
            times: vec![t],
            positions: vec![config.positions().to_vec()],
            geometry,
            tolerance: 0.0,
            termination: Termination::Completed,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn vortex_count(&self) -> usize {
        self.intensities.len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn state(&self, i: usize) -> Result<VortexConfiguration> {
        VortexConfiguration::new(self.intensities.clone(), self.positions[i].clone())
    }

    pub fn last_state(&self) -> Result<VortexConfiguration> {
        self.state(self.len() - 1)
    }

    /// Cubic Lagrange interpolation in t through the four nearest nodes.
    pub fn position_at(&self, t: f64) -> Result<Vec<ComplexPoint>> {
        let n = self.len();
        if t < self.t_start() || t > self.t_end() {
            return Err(Error::OutOfDomain(format!(
                "t = {t} outside [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        if n < 4 {
            // linear fallback for very short segments
            if n == 1 {
                return Ok(self.positions[0].clone());
            }
            let k = self.times.partition_point(|s| *s <= t).clamp(1, n - 1);
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            return Ok(self.positions[k - 1]
                .iter()
                .zip(&self.positions[k])
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect());
        }
        let k = self.times.partition_point(|s| *s <= t);
        let i0 = (k as isize - 2).clamp(0, n as isize - 4) as usize;
        let ts = &self.times[i0..i0 + 4];
        let mut w = [0.0; 4];
        for (m, wm) in w.iter_mut().enumerate() {
            let mut l = 1.0;
            for (r, tr) in ts.iter().enumerate() {
                if r != m {
                    l *= (t - tr) / (ts[m] - tr);
                }
            }
            *wm = l;
        }
        let nv = self.vortex_count();
        Ok((0..nv).map(|j| (0..4).map(|m| self.positions[i0 + m][j] * w[m]).sum()).collect())
    }

    /// t ↦ −t with intensities negated.
    pub fn reversed(&self) -> Self {
        Self {
            intensities: self.intensities.iter().map(|x| -x).collect(),
            times: self.times.iter().rev().map(|t| -t).collect(),
            positions: self.positions.iter().rev().cloned().collect(),
            geometry: self.geometry,
            tolerance: self.tolerance,
            termination: Termination::Completed,
        }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn extend(&mut self, other: &Trajectory) -> Result<()> {
        if other.intensities != self.intensities {
            return Err(Error::InvalidArgument("cannot join segments with different intensities".into()));
        }
        let skip = if other.t_start() == self.t_end() { 1 } else { 0 };
        if other.t_start() < self.t_end() {
            return Err(Error::InvalidArgument("segments overlap in time".into()));
        }
        self.times.extend_from_slice(&other.times[skip..]);
        self.positions.extend(other.positions[skip..].iter().cloned());
        self.termination = other.termination.clone();
        self.tolerance = self.tolerance.max(other.tolerance);
        Ok(())
    }

    /// Trajectory relative drift of (H, I, |C|²), plane geometry only.
    pub fn invariant_drift(&self) -> (f64, f64, f64) {
        let xs = &self.intensities;
        let h0 = match self.geometry {
            Geometry::Plane => crate::vortex::hamiltonian(xs, &self.positions[0]),
            Geometry::Disk => disk::disk_hamiltonian(xs, &self.positions[0]),
        };
        let i0 = crate::vortex::moment_of_inertia(xs, &self.positions[0]);
        let c0 = crate::vortex::center_of_vorticity(xs, &self.positions[0]).norm_sqr();
        let (mut dh, mut di, mut dc) = (0.0f64, 0.0f64, 0.0f64);
        let rel = |x: f64, x0: f64| (x - x0).abs() / x0.abs().max(1e-300);
        for z in &self.positions {
            let h = match self.geometry {
                Geometry::Plane => crate::vortex::hamiltonian(xs, z),
                Geometry::Disk => disk::disk_hamiltonian(xs, z),
            };
            dh = dh.max(rel(h, h0));
            di = di.max(rel(crate::vortex::moment_of_inertia(xs, z), i0));
            dc = dc.max(rel(crate::vortex::center_of_vorticity(xs, z).norm_sqr(), c0));
        }
        (dh, di, dc)
    }
}

/// Burst segment on the solver's grid, excluding the singular node t = 0,
/// shifted by `origin` in space and `t0` in time.
pub fn burst_trajectory(sol: &BurstSolution, origin: ComplexPoint, t0: f64) -> Trajectory {
    Trajectory {
        intensities: sol.intensities().to_vec(),
        times: sol.times()[1..].iter().map(|t| t + t0).collect(),
        positions: sol.cartesian[1..].iter().map(|z| z.iter().map(|w| w + origin).collect()).collect(),
        geometry: Geometry::Plane,
        tolerance: sol.gamma_residual,
        termination: Termination::Completed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Burst,
    Merge,
}

/// One vortex on one side of an event and several on the other. For a burst
/// `one` indexes the segment before and `many` the segment after; for a
/// merge it is the other way round.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGroup {
    pub one: usize,
    pub many: Vec<usize>,
    pub point: ComplexPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub groups: Vec<EventGroup>,
    /// (index before, index after) of vortices not involved in the event.
    pub carried: Vec<(usize, usize)>,
}

impl Event {
    pub fn reversed(&self) -> Self {
        Self {
            time: -self.time,
            kind: match self.kind {
                EventKind::Burst => EventKind::Merge,
                EventKind::Merge => EventKind::Burst,
            },
            groups: self.groups.clone(),
            carried: self.carried.iter().map(|(a, b)| (*b, *a)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTrajectory {
    pub segments: Vec<Trajectory>,
    pub events: Vec<Event>,
}

impl EventTrajectory {
    pub fn from_segment(seg: Trajectory) -> Self {
        Self { segments: vec![seg], events: vec![] }
    }

    pub fn t_start(&self) -> f64 {
        self.segments[0].t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().unwrap().t_end()
    }

    pub fn push(&mut self, event: Event, seg: Trajectory) {
        self.events.push(event);
        self.segments.push(seg);
    }

    /// Appends a whole event trajectory whose first segment continues our last one.
    pub fn append(&mut self, other: EventTrajectory) -> Result<()> {
        let mut segs = other.segments.into_iter();
        let first = segs.next().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
        self.segments.last_mut().unwrap().extend(&first)?;
        for (e, s) in other.events.into_iter().zip(segs) {
            self.push(e, s);
        }
        Ok(())
    }

    pub fn reversed(&self) -> Self {
        Self {
            segments: self.segments.iter().rev().map(|s| s.reversed()).collect(),
            events: self.events.iter().rev().map(|e| e.reversed()).collect(),
        }
    }

    /// Vortex counts per segment.
    pub fn vortex_counts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.vortex_count()).collect()
    }

    /// Checks event bookkeeping against the neighbouring segments.
    pub fn validate(&self) -> Result<()> {
        if self.events.len() + 1 != self.segments.len() {
            return Err(Error::Certificate("need exactly one event between consecutive segments".into()));
        }
        for (k, e) in self.events.iter().enumerate() {
            let before = &self.segments[k];
            let after = &self.segments[k + 1];
            let mut seen_b = vec![false; before.vortex_count()];
            let mut seen_a = vec![false; after.vortex_count()];
            let mark = |v: &mut Vec<bool>, i: usize| -> Result<()> {
                match v.get_mut(i) {
                    Some(s) if !*s => {
                        *s = true;
                        Ok(())
                    }
                    _ => Err(Error::Certificate(format!("event {k}: bad or repeated index {i}"))),
                }
            };
            for (b, a) in &e.carried {
                mark(&mut seen_b, *b)?;
                mark(&mut seen_a, *a)?;
                if before.intensities[*b] != after.intensities[*a] {
                    return Err(Error::Certificate(format!("event {k}: carried vortex changes intensity")));
                }
            }
            for g in &e.groups {
                let (one_side, many_side, one_set, many_set) = match e.kind {
                    EventKind::Burst => (before, after, &mut seen_b, &mut seen_a),
                    EventKind::Merge => (after, before, &mut seen_a, &mut seen_b),
                };
                mark(one_set, g.one)?;
                let mut sum = 0.0;
                for m in &g.many {
                    mark(many_set, *m)?;
                    sum += many_side.intensities[*m];
                }
                let one = one_side.intensities[g.one];
                if (sum - one).abs() > 1e-12 * one.abs().max(1.0) {
                    return Err(Error::Certificate(format!(
                        "event {k}: intensities {sum} on the many side do not sum to {one}"
                    )));
                }
            }
            if seen_b.iter().any(|s| !s) || seen_a.iter().any(|s| !s) {
                return Err(Error::Certificate(format!("event {k}: some vortex is unaccounted for")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub collapse_eps: f64,
    /// h ≤ step_cap · d_min² / max|ξ|
    pub step_cap: f64,
    /// Upper bound on the step as a fraction of the integration span, so
    /// stored nodes resolve the motion for later quadrature.
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, collapse_eps: 1e-5, step_cap: 1.0, max_step_fraction: 1.0 / 1000.0, max_steps: 5_000_000 }
    }
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[Complex64], terms: &[(f64, &[Complex64])], h: f64) -> Vec<Complex64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        for (o, kk) in out.iter_mut().zip(k.iter()) {
            *o += kk * (h * c);
        }
    }
    out
}

fn closest_pair(z: &[ComplexPoint]) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::INFINITY);
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            let d = (z[j] - z[k]).norm();
            if d < best.1 {
                best = ((j, k), d);
            }
        }
    }
    best
}

/// Adaptive Dormand–Prince integration over [t0, t1]. Stops early, with a
/// `NearCollapse` termination, once two vortices come closer than
/// `collapse_eps`.
pub fn integrate(spec: &SystemSpec, t_span: (f64, f64), opts: &IntegrateOptions) -> Result<Trajectory> {
    integrate_from(spec, spec.config0.positions().to_vec(), t_span, opts)
}

fn integrate_from(
    spec: &SystemSpec,
    z0: Vec<ComplexPoint>,
    (t0, t1): (f64, f64),
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("t_span ({t0}, {t1}) must be increasing")));
    }
    let xs = spec.config0.intensities().to_vec();
    let field = spec.field.as_ref();
    let geom = spec.geometry;
    let f = |t: f64, z: &[Complex64]| system_velocities(geom, field, &xs, t, z);
    let xmax = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut traj = Trajectory {
        intensities: xs.clone(),
        times: vec![t0],
        positions: vec![z0.clone()],
        geometry: geom,
        tolerance: opts.tol,
        termination: Termination::Completed,
    };
    if xs.len() == 1 && field.is_none() && geom == Geometry::Plane {
        // nothing moves
        traj.times.push(t1);
        traj.positions.push(z0);
        return Ok(traj);
    }
    let mut t = t0;
    let mut y = z0;
    let mut k1 = f(t, &y);
    let h_max = opts.max_step_fraction * (t1 - t0);
    let cap = |y: &[Complex64]| {
        let d = min_distance(y);
        let c = if d.is_finite() { opts.step_cap * d * d / xmax } else { f64::INFINITY };
        c.min(h_max)
    };
    let vmax = k1.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut h = (0.01 * scale / vmax).min(cap(&y)).min(t1 - t0);
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Certificate(format!("step budget exhausted at t = {t}")));
        }
        h = h.min(cap(&y)).min(t1 - t);
        if h <= 1e-15 * t.abs().max(1.0) {
            return Err(Error::Certificate(format!("step size underflow at t = {t}")));
        }
        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let yn = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &yn);
        let mut err = 0.0f64;
        for j in 0..y.len() {
            let e = (k1[j] * E1 + k3[j] * E3 + k4[j] * E4 + k5[j] * E5 + k6[j] * E6 + k7[j] * E7) * h;
            let sc = opts.tol * (1.0 + y[j].norm().max(yn[j].norm()));
            err = err.max(e.norm() / sc);
        }
        if err <= 1.0 {
            t = if t1 - t - h <= 1e-14 * t1.abs().max(1.0) { t1 } else { t + h };
            y = yn;
            k1 = k7;
            traj.times.push(t);
            traj.positions.push(y.clone());
            let (pair, d) = closest_pair(&y);
            if d < opts.collapse_eps {
                traj.termination = Termination::NearCollapse { time: t, pair, distance: d };
                return Ok(traj);
            }
            if geom == Geometry::Disk && y.iter().any(|z| z.norm_sqr() >= 1.0) {
                return Err(Error::OutOfDomain(format!("vortex reached the disk boundary at t = {t}")));
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err.is_finite() { fac } else { 0.2 };
    }
    Ok(traj)
}

/// Merge of a collapsing group: event time, merged configuration and event record.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub event: Event,
    pub config: VortexConfiguration,
}

fn group_center(xs: &[f64], z: &[ComplexPoint], group: &[usize]) -> ComplexPoint {
    let total: f64 = group.iter().map(|&j| xs[j]).sum();
    group.iter().map(|&j| xs[j] * z[j]).sum::<Complex64>() / total
}

fn group_diameter(z: &[ComplexPoint], group: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (a, &j) in group.iter().enumerate() {
        for &k in &group[a + 1..] {
            d = d.max((z[j] - z[k]).norm());
        }
    }
    d
}

/// Least-squares line through (x, y): returns (intercept, slope).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Groups of vortices linked by distances below `radius` at the given positions.
fn clusters(z: &[ComplexPoint], radius: f64) -> Vec<Vec<usize>> {
    let n = z.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for j in 0..n {
        for k in j + 1..n {
            if (z[j] - z[k]).norm() < radius {
                let (a, b) = (find(&mut label, j), find(&mut label, k));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![];
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(vec![]);
        }
        groups[root_of[r]].push(i);
    }
    groups.into_iter().filter(|g| g.len() > 1).collect()
}

/// Merges the collapsing group(s) at the end of a flagged trajectory. The
/// collapse time comes from a fit of diameter² ∼ c (t_c − t) over the last
/// (up to) 20 nodes; the merge point is the group's center of vorticity
/// extrapolated to t_c.
pub fn merge_collapse(traj: &Trajectory, collapse_eps: f64) -> Result<MergeOutcome> {
    let (pair, _) = match traj.termination {
        Termination::NearCollapse { pair, distance, .. } => (pair, distance),
        Termination::Completed => {
            return Err(Error::InvalidArgument("trajectory is not flagged near-collapse".into()))
        }
    };
    let xs = &traj.intensities;
    let n = traj.len();
    let zl = &traj.positions[n - 1];
    let groups = clusters(zl, 10.0 * collapse_eps);
    let primary = groups
        .iter()
        .find(|g| g.contains(&pair.0))
        .cloned()
        .ok_or_else(|| Error::Certificate("collapse pair not found".into()))?;
    let mut merging = vec![];
    let mut t_c = f64::NAN;
    for g in groups {
        let gi: Vec<f64> = g.iter().map(|&j| xs[j]).collect();
        let is_primary = g == primary;
        if !collapse_admissible_tol(&gi, 1e-6) {
            if is_primary {
                return Err(Error::InadmissibleGroup {
                    group: g.clone(),
                    reason: "pairwise intensity products do not cancel or total intensity vanishes".into(),
                });
            }
            continue;
        }
        let m = n.min(20);
        let ts: Vec<f64> = traj.times[n - m..].to_vec();
        let d2: Vec<f64> = traj.positions[n - m..].iter().map(|z| group_diameter(z, &g).powi(2)).collect();
        let (c0, c1) = line_fit(&ts, &d2);
        if !(c1 < 0.0) {
            if is_primary {
                return Err(Error::InadmissibleGroup { group: g.clone(), reason: "group is not shrinking".into() });
            }
            continue;
        }
        let tc = (-c0 / c1).max(traj.t_end());
        if is_primary {
            t_c = tc;
        }
        let cs: Vec<Complex64> = traj.positions[n - m..].iter().map(|z| group_center(xs, z, &g)).collect();
        let (cr0, cr1) = line_fit(&ts, &cs.iter().map(|c| c.re).collect::<Vec<_>>());
        let (ci0, ci1) = line_fit(&ts, &cs.iter().map(|c| c.im).collect::<Vec<_>>());
        let point = Complex64::new(cr0 + cr1 * tc, ci0 + ci1 * tc);
        merging.push((g, point));
    }
    // survivors keep their relative order; a merged vortex takes its group's lowest slot
    let v_last = system_velocities(traj.geometry, None, xs, traj.t_end(), zl);
    let dt = t_c - traj.t_end();
    let mut new_x = vec![];
    let mut new_z = vec![];
    let mut carried = vec![];
    let mut groups_out = vec![];
    for j in 0..xs.len() {
        if let Some((g, point)) = merging.iter().find(|(g, _)| g.contains(&j)) {
            if g[0] == j {
                groups_out.push(EventGroup { one: new_x.len(), many: g.clone(), point: *point });
                new_x.push(g.iter().map(|&k| xs[k]).sum());
                new_z.push(*point);
            }
        } else {
            carried.push((j, new_x.len()));
            new_x.push(xs[j]);
            new_z.push(zl[j] + v_last[j] * dt);
        }
    }
    let config = VortexConfiguration::new(new_x, new_z)?;
    Ok(MergeOutcome {
        event: Event { time: t_c, kind: EventKind::Merge, groups: groups_out, carried },
        config,
    })
}

/// Integration over [t0, t1] with merge continuation after each collapse.
/// Close passes of inadmissible groups are resolved with a smaller
/// threshold so integration continues with smaller steps.
pub fn simulate(spec: &SystemSpec, t_span: (f64, f64), opts: &IntegrateOptions) -> Result<EventTrajectory> {
    let mut out: Option<EventTrajectory> = None;
    let mut current = spec.clone();
    let mut t = t_span.0;
    let mut z = spec.config0.positions().to_vec();
    let mut eps = opts.collapse_eps;
    loop {
        let o = IntegrateOptions { collapse_eps: eps, ..*opts };
        let seg = integrate_from(&current, z.clone(), (t, t_span.1), &o)?;
        let flagged = seg.termination.clone();
        match &mut out {
            None => out = Some(EventTrajectory::from_segment(seg.clone())),
            Some(et) => et.segments.last_mut().unwrap().extend(&seg)?,
        }
        let et = out.as_mut().unwrap();
        match flagged {
            Termination::Completed => return Ok(out.unwrap()),
            Termination::NearCollapse { distance, .. } => {
                let whole = et.segments.last().unwrap().clone();
                match merge_collapse(&whole, eps) {
                    Ok(m) => {
                        let t_c = m.event.time;
                        et.push(m.event, Trajectory::single(&m.config, t_c, current.geometry));
                        current = SystemSpec { config0: m.config.clone(), ..current };
                        t = t_c;
                        z = m.config.positions().to_vec();
                        eps = opts.collapse_eps;
                    }
                    Err(Error::InadmissibleGroup { .. }) => {
                        let last = et.segments.last_mut().unwrap();
                        last.termination = Termination::Completed;
                        t = last.t_end();
                        z = last.positions.last().unwrap().clone();
                        eps = distance / 10.0;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if t >= t_span.1 {
            return Ok(out.unwrap());
        }
    }
}

pub fn time_reverse(traj: &EventTrajectory) -> EventTrajectory {
    traj.reversed()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn corotating_pair_period() {
        let d: f64 = 0.5;
        let cfg = VortexConfiguration::new(vec![1.0, 1.0], vec![Complex64::new(d, 0.0), Complex64::new(-d, 0.0)])
            .unwrap();
        let omega = 1.0 / (4.0 * PI * d * d);
        let period = 2.0 * PI / omega;
        let tr = integrate(&SystemSpec::plane(cfg), (0.0, period), &IntegrateOptions::default()).unwrap();
        let z = tr.positions.last().unwrap();
        assert!((z[0] - Complex64::new(d, 0.0)).norm() < 1e-6 * d);
    }

    #[test]
    fn reverse_twice_is_identity() {
        let cfg = VortexConfiguration::new(
            vec![1.0, -0.5, 0.7],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.2), Complex64::new(-0.4, 1.0)],
        )
        .unwrap();
        let tr = integrate(&SystemSpec::plane(cfg), (0.0, 0.3), &IntegrateOptions::default()).unwrap();
        let et = EventTrajectory::from_segment(tr);
        assert_eq!(time_reverse(&time_reverse(&et)), et);
    }

    #[test]
    fn disk_hamiltonian_sign() {
        let cfg = VortexConfiguration::new(
            vec![1.0, -0.6, 0.8],
            vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4), Complex64::new(0.1, -0.5)],
        )
        .unwrap();
        let spec = SystemSpec::new(Geometry::Disk, None, cfg).unwrap();
        let tr = integrate(&spec, (0.0, 1.0), &IntegrateOptions::default()).unwrap();
        let (dh, _, _) = tr.invariant_drift();
        assert!(dh < 1e-7, "{dh}");
    }
}

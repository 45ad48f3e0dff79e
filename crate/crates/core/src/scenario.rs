//! TOML scenarios and the runs they describe.
//!
//! ```toml
//! version = 1
//! geometry = "plane"          # or "disk"
//! seed = 7
//!
//! [[vortices]]
//! intensity = 0.5
//! position = [5.0, 1.0]
//!
//! [burst]
//! xi = 1.0
//! at = [0.0, 0.0]
//!
//! [solver]
//! t_final = 1e-2
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::burst::{solve_burst, GammaConfig};
use crate::dynamics::{simulate, time_reverse, EventTrajectory, Geometry, IntegrateOptions, SystemSpec};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::markov::MarkovScenario;
use crate::nburst::{lone_burst_events, solve_disk_burst, solve_nburst, tstar_bound, NBurstProblem};
use crate::vortex::{ComplexPoint, VortexConfiguration};

pub const SCENARIO_VERSION: u32 = 1;

type Pair = [f64; 2];

fn c(p: Pair) -> ComplexPoint {
    Complex64::new(p[0], p[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryName {
    #[default]
    Plane,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexEntry {
    pub intensity: f64,
    pub position: Pair,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldEntry {
    Zero,
    Constant {
        value: Pair,
    },
    Affine {
        #[serde(default)]
        c: Pair,
        #[serde(default)]
        holo: Pair,
        #[serde(default)]
        anti: Pair,
        #[serde(default)]
        drift: Pair,
    },
}

impl FieldEntry {
    pub fn spec(&self) -> FieldSpec {
        match self {
            FieldEntry::Zero => FieldSpec::Zero,
            FieldEntry::Constant { value } => FieldSpec::Constant(c(*value)),
            FieldEntry::Affine { c: c0, holo, anti, drift } => FieldSpec::affine(c(*c0), c(*holo), c(*anti), c(*drift)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstEntry {
    pub xi: f64,
    #[serde(default)]
    pub at: Pair,
    /// Confinement radius; defaults to the largest admissible one.
    pub rho: Option<f64>,
    /// Keep integrating the full system after the burst window up to this time.
    pub continue_to: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateEntry {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovEntry {
    pub lambda: f64,
    pub horizon: f64,
    #[serde(default = "default_burst_t")]
    pub burst_t: f64,
}

fn default_burst_t() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverEntry {
    pub t_final: f64,
    pub grid_nodes: usize,
    pub grading_exponent: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for SolverEntry {
    fn default() -> Self {
        let g = GammaConfig::default();
        Self {
            t_final: g.t_final,
            grid_nodes: g.grid_nodes,
            grading_exponent: g.grading_exponent,
            picard_tol: g.picard_tol,
            picard_max_iter: g.picard_max_iter,
            damping: g.damping,
            max_halvings: g.max_halvings,
        }
    }
}

impl SolverEntry {
    pub fn config(&self) -> GammaConfig {
        GammaConfig {
            t_final: self.t_final,
            grid_nodes: self.grid_nodes,
            grading_exponent: self.grading_exponent,
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            damping: self.damping,
            max_halvings: self.max_halvings,
            ..GammaConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrateEntry {
    pub tol: f64,
    pub collapse_eps: f64,
    pub step_cap: f64,
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for IntegrateEntry {
    fn default() -> Self {
        let o = IntegrateOptions::default();
        Self {
            tol: o.tol,
            collapse_eps: o.collapse_eps,
            step_cap: o.step_cap,
            max_step_fraction: o.max_step_fraction,
            max_steps: o.max_steps,
        }
    }
}

impl IntegrateEntry {
    pub fn options(&self) -> IntegrateOptions {
        IntegrateOptions {
            tol: self.tol,
            collapse_eps: self.collapse_eps,
            step_cap: self.step_cap,
            max_step_fraction: self.max_step_fraction,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputEntry {
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub geometry: GeometryName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vortices: Vec<VortexEntry>,
    pub field: Option<FieldEntry>,
    pub burst: Option<BurstEntry>,
    pub simulate: Option<SimulateEntry>,
    pub markov: Option<MarkovEntry>,
    #[serde(default)]
    pub solver: SolverEntry,
    #[serde(default)]
    pub integrate: IntegrateEntry,
    #[serde(default)]
    pub verify: crate::certify::VerifyConfig,
    #[serde(default)]
    pub output: OutputEntry,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if sc.version != SCENARIO_VERSION {
            return Err(Error::Parse(format!("unsupported scenario version {}", sc.version)));
        }
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn geometry(&self) -> Geometry {
        match self.geometry {
            GeometryName::Plane => Geometry::Plane,
            GeometryName::Disk => Geometry::Disk,
        }
    }

    pub fn field(&self) -> Option<FieldSpec> {
        self.field.as_ref().map(|f| f.spec()).filter(|f| !f.is_zero())
    }

    pub fn configuration(&self) -> Result<VortexConfiguration> {
        VortexConfiguration::new(
            self.vortices.iter().map(|v| v.intensity).collect(),
            self.vortices.iter().map(|v| c(v.position)).collect(),
        )
    }

    pub fn system(&self) -> Result<SystemSpec> {
        SystemSpec::new(self.geometry(), self.field(), self.configuration()?)
    }

    fn burst_entry(&self) -> Result<&BurstEntry> {
        self.burst.as_ref().ok_or_else(|| Error::InvalidArgument("scenario has no [burst] table".into()))
    }

    /// The N-vortex problem in the frame centred at the burst point.
    pub fn nburst_problem(&self) -> Result<NBurstProblem> {
        let b = self.burst_entry()?;
        let at = c(b.at);
        let positions: Vec<ComplexPoint> = self.vortices.iter().map(|v| c(v.position) - at).collect();
        let intensities: Vec<f64> = self.vortices.iter().map(|v| v.intensity).collect();
        let rho = match b.rho {
            Some(r) => r,
            None => NBurstProblem::max_rho(&positions).min(1.0),
        };
        let probe = NBurstProblem::new(intensities.clone(), positions.clone(), b.xi, rho, self.solver.t_final)?;
        let t_final = self.solver.t_final.min(tstar_bound(&probe));
        NBurstProblem::new(intensities, positions, b.xi, rho, t_final)
    }

    pub fn markov_scenario(&self) -> Result<MarkovScenario> {
        let m = self.markov.as_ref().ok_or_else(|| Error::InvalidArgument("scenario has no [markov] table".into()))?;
        if self.geometry != GeometryName::Plane || self.field().is_some() {
            return Err(Error::InvalidArgument("markov runs need the plane without external field".into()));
        }
        let mut sc = MarkovScenario::new(self.configuration()?, m.lambda, m.horizon, self.seed, m.burst_t)?;
        sc.gamma = self.solver.config();
        sc.integrate = self.integrate.options();
        Ok(sc)
    }
}

fn shifted(mut et: EventTrajectory, by: ComplexPoint) -> EventTrajectory {
    if by == Complex64::new(0.0, 0.0) {
        return et;
    }
    for seg in &mut et.segments {
        for z in &mut seg.positions {
            for w in z.iter_mut() {
                *w += by;
            }
        }
    }
    for e in &mut et.events {
        for g in &mut e.groups {
            g.point += by;
        }
    }
    et
}

/// Burst described by the `[burst]` table. A lone vortex bursts under the
/// optional external field (or inside the unit disk); with background
/// vortices the full coupled problem is solved.
pub fn run_burst(sc: &Scenario) -> Result<EventTrajectory> {
    let b = sc.burst_entry()?;
    let at = c(b.at);
    let cfg = sc.solver.config();
    let field = sc.field();
    let mut et = match sc.geometry {
        GeometryName::Disk => {
            if !sc.vortices.is_empty() || field.is_some() {
                return Err(Error::InvalidArgument("disk bursts take a lone vortex and no external field".into()));
            }
            let cfg = GammaConfig { rho: b.rho, ..cfg };
            solve_disk_burst(at, b.xi, &cfg)?.trajectory
        }
        GeometryName::Plane if sc.vortices.is_empty() => {
            let f = field.clone().unwrap_or(FieldSpec::Zero);
            if !f.is_zero() && at != Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidArgument("a burst under an external field must sit at the origin".into()));
            }
            let cfg = GammaConfig { rho: b.rho, ..cfg };
            lone_burst_events(&solve_burst(&f, b.xi, &cfg)?, at)
        }
        GeometryName::Plane => {
            if field.is_some() {
                return Err(Error::InvalidArgument("bursts among background vortices take no external field".into()));
            }
            shifted(solve_nburst(&sc.nburst_problem()?, &cfg)?.trajectory, at)
        }
    };
    if let Some(t_end) = b.continue_to {
        let last = et.segments.last().unwrap();
        if t_end > last.t_end() {
            let spec = SystemSpec::new(sc.geometry(), field, last.last_state()?)?;
            let tail = simulate(&spec, (last.t_end(), t_end), &sc.integrate.options())?;
            et.append(tail)?;
        }
    }
    Ok(et)
}

/// Collapse onto a vortex of intensity `xi` at `at`: the burst of −ξ (with
/// every intensity negated) is reversed in time, and its state at −T is
/// integrated forward through the collapse with merge detection, up to
/// `continue_to` (default T).
pub fn run_collapse(sc: &Scenario) -> Result<(EventTrajectory, EventTrajectory)> {
    let b = sc.burst_entry()?;
    if sc.field().is_some() {
        return Err(Error::InvalidArgument("collapse scenarios take no external field".into()));
    }
    let mut neg = sc.clone();
    for v in &mut neg.vortices {
        v.intensity = -v.intensity;
    }
    let nb = neg.burst.as_mut().unwrap();
    nb.xi = -b.xi;
    nb.continue_to = None;
    let reference = time_reverse(&run_burst(&neg)?);
    let first = &reference.segments[0];
    let start = first.state(0)?;
    let t0 = first.t_start();
    let t_end = b.continue_to.unwrap_or(-t0);
    let spec = SystemSpec::new(sc.geometry(), None, start)?;
    let run = simulate(&spec, (t0, t_end), &sc.integrate.options())?;
    Ok((reference, run))
}

pub fn run_simulate(sc: &Scenario) -> Result<EventTrajectory> {
    let s = sc.simulate.as_ref().ok_or_else(|| Error::InvalidArgument("scenario has no [simulate] table".into()))?;
    simulate(&sc.system()?, (s.t_start, s.t_end), &sc.integrate.options())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Scenario::parse("version = 1\nbogus = 3\n").is_err());
        assert!(Scenario::parse("version = 1\n[solver]\ngrid = 3\n").is_err());
        assert!(Scenario::parse("version = 1\n[field]\ntype = \"constant\"\nvalue = [1, 0]\nextra = 1\n").is_err());
        assert!(Scenario::parse("version = 2\n").is_err());
    }

    #[test]
    fn defaults_follow_the_library() {
        let sc = Scenario::parse("version = 1\n[burst]\nxi = 1.0\n").unwrap();
        assert_eq!(sc.solver.config(), GammaConfig::default());
        assert_eq!(sc.integrate.options(), IntegrateOptions::default());
        assert_eq!(sc.geometry(), Geometry::Plane);
        assert!(sc.field().is_none());
    }

    #[test]
    fn affine_field_parses() {
        let sc = Scenario::parse("version = 1\n[field]\ntype = \"affine\"\nc = [1, 2]\nholo = [0, 0.5]\n").unwrap();
        let f = sc.field().unwrap();
        let p = Complex64::new(0.3, -0.2);
        let want = Complex64::new(1.0, 2.0) + Complex64::new(0.0, 0.5) * p;
        assert!((f.eval(0.0, p) - want).norm() < 1e-15);
    }
}

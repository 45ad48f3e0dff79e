//! Stochastic weak solutions: bursts of uniformly chosen vortices at the
//! arrival times of a Poisson process, with merge continuation in between.
//!
//! Randomness comes from ChaCha8 seeded per sample: stream 0 draws the
//! inter-arrival times, stream 1 the vortex indices. Sample i of an ensemble
//! uses seed `seed + i`, so adding samples never changes earlier ones.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::burst::GammaConfig;
use crate::dynamics::{
    simulate, Event, EventGroup, EventKind, EventTrajectory, Geometry, IntegrateOptions, SystemSpec, Termination,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::nburst::{solve_nburst, tstar_bound, NBurstProblem};
use crate::vortex::{ComplexPoint, VortexConfiguration};
use crate::weakform::{energy_ledger, standard_battery, weak_residual};

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovScenario {
    pub initial: VortexConfiguration,
    pub lambda: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Requested burst window; the actual window is min(burst_t, T*/2).
    pub burst_t: f64,
    pub gamma: GammaConfig,
    pub integrate: IntegrateOptions,
}

impl MarkovScenario {
    pub fn new(initial: VortexConfiguration, lambda: f64, horizon: f64, seed: u64, burst_t: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument("lambda and horizon must be positive".into()));
        }
        if !(burst_t > 0.0) {
            return Err(Error::InvalidArgument("burst window must be positive".into()));
        }
        Ok(Self {
            initial,
            lambda,
            horizon,
            seed,
            burst_t,
            gamma: GammaConfig::default(),
            integrate: IntegrateOptions::default(),
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstCertificate {
    pub time: f64,
    pub t_final: f64,
    pub gamma_residual: f64,
    pub ode_residual: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub seed: u64,
    pub trajectory: EventTrajectory,
    /// Poisson arrival times in [0, horizon].
    pub arrivals: Vec<f64>,
    /// Every exponential draw, including the one that overshoots the horizon.
    pub inter_arrivals: Vec<f64>,
    /// Actual burst times (arrivals, deferred past unfinished windows).
    pub burst_times: Vec<f64>,
    pub chosen: Vec<usize>,
    /// (arrival, deferred time) for arrivals that fell inside a burst window.
    pub deferrals: Vec<(f64, f64)>,
    pub certificates: Vec<BurstCertificate>,
    pub failure: Option<String>,
}

impl SampleRecord {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn burst_count(&self) -> usize {
        self.burst_times.len()
    }

    /// (event time, vortex count after the event), starting at t = 0.
    pub fn vortex_counts(&self) -> Vec<(f64, usize)> {
        let mut out = vec![(self.trajectory.t_start(), self.trajectory.segments[0].vortex_count())];
        for (e, s) in self.trajectory.events.iter().zip(&self.trajectory.segments[1..]) {
            out.push((e.time, s.vortex_count()));
        }
        out
    }
}

fn arrivals(rng: &mut ChaCha8Rng, lambda: f64, horizon: f64) -> (Vec<f64>, Vec<f64>) {
    let exp = Exp::new(lambda).expect("positive rate");
    let mut t = 0.0;
    let mut out = vec![];
    let mut draws = vec![];
    loop {
        let g: f64 = exp.sample(rng);
        draws.push(g);
        t += g;
        if t > horizon {
            return (out, draws);
        }
        out.push(t);
    }
}

/// Arrival times in [0, horizon] and every inter-arrival draw (including the
/// one overshooting the horizon) for one seed, from the same stream that
/// [`sample`] uses.
pub fn arrival_process(seed: u64, lambda: f64, horizon: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    arrivals(&mut rng, lambda, horizon)
}

fn append_plain(et: &mut Option<EventTrajectory>, spec: &SystemSpec, t0: f64, t1: f64, opts: &IntegrateOptions) -> Result<()> {
    if t1 <= t0 {
        if et.is_none() {
            *et = Some(EventTrajectory::from_segment(Trajectory::single(&spec.config0, t0, Geometry::Plane)));
        }
        return Ok(());
    }
    let part = simulate(spec, (t0, t1), opts)?;
    match et {
        None => *et = Some(part),
        Some(e) => e.append(part)?,
    }
    Ok(())
}

/// Burst of vortex `c` of `config` at time `t_b`; returns the event, the
/// burst segment and its certificate.
fn burst_at(
    config: &VortexConfiguration,
    c: usize,
    t_b: f64,
    sc: &MarkovScenario,
) -> Result<(Event, Trajectory, BurstCertificate)> {
    let xs = config.intensities();
    let zs = config.positions();
    let p = zs[c];
    let n = xs.len();
    let others: Vec<usize> = (0..n).filter(|&k| k != c).collect();
    let bx: Vec<f64> = others.iter().map(|&k| xs[k]).collect();
    let by: Vec<ComplexPoint> = others.iter().map(|&k| zs[k] - p).collect();
    // U_T is not scale invariant: solve where the nearest background vortex
    // sits at distance 5 (z' = κz, t' = κ²t) and map back
    let kappa = match by.iter().map(|y| y.norm()).fold(f64::INFINITY, f64::min) {
        d if d.is_finite() => 5.0 / d,
        _ => 1.0,
    };
    let by_s: Vec<ComplexPoint> = by.iter().map(|y| y * kappa).collect();
    let rho = if by.is_empty() { 1.0 } else { NBurstProblem::max_rho(&by_s) };
    let probe = NBurstProblem::new(bx, by_s, xs[c], rho, 1.0)?;
    let t_orig = sc.burst_t.min(0.5 * tstar_bound(&probe) / (kappa * kappa));
    let prob = NBurstProblem { t_final: (kappa * kappa * t_orig).min(sc.gamma.t_final), ..probe };
    let sol = solve_nburst(&prob, &sc.gamma)?;
    // children go to slots c, n, n+1; the others keep their indices
    let mut slot = vec![0usize; n + 2];
    slot[0] = c;
    slot[1] = n;
    slot[2] = n + 1;
    for (k, &o) in others.iter().enumerate() {
        slot[3 + k] = o;
    }
    let seg_src = &sol.trajectory.segments[1];
    let mut intensities = vec![0.0; n + 2];
    for (m, x) in seg_src.intensities.iter().enumerate() {
        intensities[slot[m]] = *x;
    }
    let positions = seg_src
        .positions
        .iter()
        .map(|z| {
            let mut out = vec![Complex64::new(0.0, 0.0); n + 2];
            for (m, w) in z.iter().enumerate() {
                out[slot[m]] = w / kappa + p;
            }
            out
        })
        .collect();
    let seg = Trajectory {
        intensities,
        times: seg_src.times.iter().map(|t| t / (kappa * kappa) + t_b).collect(),
        positions,
        geometry: Geometry::Plane,
        tolerance: seg_src.tolerance,
        termination: Termination::Completed,
    };
    let event = Event {
        time: t_b,
        kind: EventKind::Burst,
        groups: vec![EventGroup { one: c, many: vec![c, n, n + 1], point: p }],
        carried: others.iter().map(|&o| (o, o)).collect(),
    };
    let cert = BurstCertificate {
        time: t_b,
        t_final: sol.t_final() / (kappa * kappa),
        gamma_residual: sol.burst.gamma_residual,
        ode_residual: sol.residual,
        outer_iterations: sol.outer_history.len(),
    };
    Ok((event, seg, cert))
}

/// One sample path. A failed burst construction truncates the sample at the
/// failing arrival and records the reason.
pub fn sample(sc: &MarkovScenario) -> SampleRecord {
    let mut rng_t = ChaCha8Rng::seed_from_u64(sc.seed);
    rng_t.set_stream(0);
    let mut rng_i = ChaCha8Rng::seed_from_u64(sc.seed);
    rng_i.set_stream(1);
    let (arr, draws) = arrivals(&mut rng_t, sc.lambda, sc.horizon);
    let mut rec = SampleRecord {
        seed: sc.seed,
        trajectory: EventTrajectory::from_segment(Trajectory::single(&sc.initial, 0.0, Geometry::Plane)),
        arrivals: arr.clone(),
        inter_arrivals: draws,
        burst_times: vec![],
        chosen: vec![],
        deferrals: vec![],
        certificates: vec![],
        failure: None,
    };
    let mut et: Option<EventTrajectory> = None;
    let mut t = 0.0;
    let mut config = sc.initial.clone();
    let mut free_at = 0.0;
    let run = |et: &mut Option<EventTrajectory>, config: &VortexConfiguration, t0: f64, t1: f64| {
        append_plain(et, &SystemSpec::plane(config.clone()), t0, t1, &sc.integrate)
    };
    for a in arr {
        let t_b = a.max(free_at);
        if t_b > a {
            rec.deferrals.push((a, t_b));
        }
        if let Err(e) = run(&mut et, &config, t, t_b) {
            rec.failure = Some(format!("integration before t = {t_b}: {e}"));
            break;
        }
        let last = et.as_ref().unwrap().segments.last().unwrap();
        config = match last.last_state() {
            Ok(c) => c,
            Err(e) => {
                rec.failure = Some(e.to_string());
                break;
            }
        };
        let c = rng_i.random_range(0..config.len());
        match burst_at(&config, c, t_b, sc) {
            Ok((event, seg, cert)) => {
                let et_ref = et.as_mut().unwrap();
                t = seg.t_end();
                free_at = t;
                config = match seg.last_state() {
                    Ok(c) => c,
                    Err(e) => {
                        rec.failure = Some(e.to_string());
                        break;
                    }
                };
                et_ref.push(event, seg);
                rec.burst_times.push(t_b);
                rec.chosen.push(c);
                rec.certificates.push(cert);
            }
            Err(e) => {
                rec.failure = Some(format!("burst of vortex {c} at t = {t_b}: {e}"));
                break;
            }
        }
    }
    if rec.failure.is_none() {
        if let Err(e) = run(&mut et, &config, t, sc.horizon.max(t)) {
            rec.failure = Some(format!("integration to the horizon: {e}"));
        }
    }
    if let Some(e) = et {
        rec.trajectory = e;
    }
    rec
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub seed: u64,
    pub complete: bool,
    pub failure: Option<String>,
    pub burst_count: usize,
    pub deferrals: usize,
    pub vortex_counts: Vec<(f64, usize)>,
    pub energy_jump_total: f64,
    pub weak_residual: f64,
    pub inter_arrivals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub samples: Vec<SampleSummary>,
}

impl EnsembleStats {
    pub fn completed(&self) -> usize {
        self.samples.iter().filter(|s| s.complete).count()
    }

    pub fn mean_bursts(&self) -> f64 {
        self.samples.iter().map(|s| s.burst_count as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Histogram of burst counts, index = count.
    pub fn burst_histogram(&self) -> Vec<usize> {
        let m = self.samples.iter().map(|s| s.burst_count).max().unwrap_or(0);
        let mut h = vec![0; m + 1];
        for s in &self.samples {
            h[s.burst_count] += 1;
        }
        h
    }

    pub fn inter_arrivals(&self) -> Vec<f64> {
        self.samples.iter().flat_map(|s| s.inter_arrivals.iter().copied()).collect()
    }

    pub fn max_weak_residual(&self) -> f64 {
        self.samples.iter().filter(|s| s.complete).map(|s| s.weak_residual).fold(0.0, f64::max)
    }
}

pub fn summarize(rec: &SampleRecord) -> SampleSummary {
    let et = &rec.trajectory;
    let weak = weak_residual(et, &standard_battery(et), &[]).max_residual();
    SampleSummary {
        seed: rec.seed,
        complete: rec.is_complete(),
        failure: rec.failure.clone(),
        burst_count: rec.burst_count(),
        deferrals: rec.deferrals.len(),
        vortex_counts: rec.vortex_counts(),
        energy_jump_total: energy_ledger(et).total_jump(),
        weak_residual: weak,
        inter_arrivals: rec.inter_arrivals.clone(),
    }
}

/// Samples with seeds seed, seed+1, …, run in parallel.
pub fn ensemble_stats(sc: &MarkovScenario, n_samples: usize) -> EnsembleStats {
    let samples = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| summarize(&sample(&sc.with_seed(sc.seed.wrapping_add(i)))))
        .collect();
    EnsembleStats { samples }
}

/// Kolmogorov–Smirnov statistic of `xs` against Exponential(lambda).
pub fn ks_exponential(xs: &[f64], lambda: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = 1.0 - (-lambda * x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic KS critical value at significance alpha.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        a.set_stream(0);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        b.set_stream(1);
        let x: [u64; 4] = a.random();
        let y: [u64; 4] = b.random();
        assert_ne!(x, y);
    }

    #[test]
    fn ks_accepts_exact_quantiles() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| -((1.0 - (i as f64 + 0.5) / n as f64).ln()) / 3.0).collect();
        assert!(ks_exponential(&xs, 3.0) < ks_critical(n, 0.01));
    }
}

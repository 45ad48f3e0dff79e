// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pvburst::certify::{verify, VerifyConfig};
use pvburst::dynamics::EventTrajectory;
use pvburst::io::{self, ExportFormat};
use pvburst::markov::{ensemble_stats, ks_critical, ks_exponential};
use pvburst::scenario::{run_burst, run_collapse, run_simulate, Scenario};
use pvburst::selfsimilar::SelfSimilarParams;

#[derive(Parser)]
#[command(name = "pvburst", version, about = "Bursts, collapses and weak-solution checks for planar point vortices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-similar three-vortex parameters for a parent intensity.
    Selfsimilar {
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        /// Fail unless the algebraic and ODE residuals are at round-off level.
        #[arg(long)]
        check: bool,
    },
    /// Burst described by the scenario's [burst] table.
    Burst {
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Skip the certificate battery on the result.
        #[arg(long)]
        no_verify: bool,
    },
    /// Collapse onto the scenario's burst point, continued through the merge.
    Collapse {
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        no_verify: bool,
    },
    /// Plain integration with merge continuation.
    Simulate {
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        no_verify: bool,
    },
    /// Invariant drift, weak-residual battery and energy ledger of a trajectory file.
    Verify {
        trajectory: PathBuf,
        #[arg(long)]
        weak_tol: Option<f64>,
        #[arg(long)]
        drift_tol: Option<f64>,
    },
    /// Ensemble of random burst samples.
    Markov {
        scenario: PathBuf,
        #[arg(long)]
        samples: usize,
        /// Per-sample summary table.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Flat table or plot blocks from a trajectory file.
    Export {
        trajectory: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: ExportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    s.parse().map_err(|e: pvburst::Error| e.to_string())
}

type CmdResult = Result<(), String>;

fn err<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{what}: {e}")
}

fn selfsimilar(xi: f64, check: bool) -> CmdResult {
    let p = SelfSimilarParams::for_intensity(xi).map_err(err("parameters"))?;
    println!("xi {xi}");
    println!("a {:.12e}", p.a);
    println!("b {:.12e}", p.b);
    for (j, (aj, xj)) in p.shape().iter().zip(p.intensities()).enumerate() {
        println!("vortex {} intensity {:.12e} shape {:.12e} {:+.12e}i", j + 1, xj, aj.re, aj.im);
    }
    let rel = p.asrelation_residual();
    println!("relation residual {rel:.3e}");
    let ts: Vec<f64> = (0..50).map(|k| 10f64.powf(-6.0 + 6.0 * k as f64 / 49.0)).collect();
    let mut ode = 0.0f64;
    for t in &ts {
        ode = ode.max(p.free_ode_residual(*t).map_err(err("ODE residual"))?);
    }
    println!("ode residual {ode:.3e} (50 times in [1e-6, 1])");
    let l = p.build_l();
    let eig = l.eigenvalues();
    let dense = l.eigenvalues_dense();
    for e in &eig {
        println!("eigenvalue {:+.12e} {:+.12e}i", e.re, e.im);
    }
    let mismatch = eig
        .iter()
        .map(|e| dense.iter().map(|d| (d - e).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    println!("eigenvalue cross-check {mismatch:.3e}");
    let (d1, d2) = p.eigen_discriminants();
    println!("discriminants {d1:.6e} {d2:.6e}");
    println!("discriminants / (xi^2, xi^4) {:.6e} {:.6e}", d1 / (xi * xi), d2 / xi.powi(4));
    if check {
        let a = p.a;
        let mut bad = vec![];
        if !(rel <= 1e-12 * xi.abs().max(1.0)) {
            bad.push(format!("relation residual {rel:.3e}"));
        }
        if !(ode <= 1e-10) {
            bad.push(format!("ODE residual {ode:.3e}"));
        }
        if !(mismatch <= 1e-9 * a) {
            bad.push(format!("eigenvalue cross-check {mismatch:.3e}"));
        }
        if let Some(e) = eig.iter().find(|e| e.re > 1e-9 * a) {
            bad.push(format!("unstable eigenvalue {e}"));
        }
        if !bad.is_empty() {
            return Err(format!("self-similar check failed: {}", bad.join("; ")));
        }
        println!("check passed");
    }
    Ok(())
}

fn output_path(sc: &Scenario, path: &Path, flag: Option<PathBuf>, suffix: &str) -> PathBuf {
    flag.or_else(|| sc.output.trajectory.clone())
        .unwrap_or_else(|| path.with_extension(format!("{suffix}.pvtraj")))
}

fn finish(traj: &EventTrajectory, out: &Path, cfg: Option<&VerifyConfig>) -> CmdResult {
    io::write_file(traj, out).map_err(err("write"))?;
    println!(
        "wrote {} ({} segments, {} events, t in [{:.6e}, {:.6e}])",
        out.display(),
        traj.segments.len(),
        traj.events.len(),
        traj.t_start(),
        traj.t_end()
    );
    match cfg {
        Some(c) => report(traj, c),
        None => Ok(()),
    }
}

fn report(traj: &EventTrajectory, cfg: &VerifyConfig) -> CmdResult {
    let r = verify(traj, cfg);
    print!("{}", r.render());
    if r.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = r.failures.iter().map(|f| f.invariant).collect();
        Err(format!("certificate failed: {}", names.join(", ")))
    }
}

fn load(path: &Path) -> Result<Scenario, String> {
    Scenario::load(path).map_err(|e| format!("scenario {}: {e}", path.display()))
}

fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Selfsimilar { xi, check } => selfsimilar(xi, check),
        Command::Burst { scenario, output, no_verify } => {
            let sc = load(&scenario)?;
            let traj = run_burst(&sc).map_err(err("burst"))?;
            let out = output_path(&sc, &scenario, output, "burst");
            let check = !no_verify && sc.field().is_none();
            finish(&traj, &out, check.then_some(&sc.verify))
        }
        Command::Collapse { scenario, output, no_verify } => {
            let sc = load(&scenario)?;
            let (reference, traj) = run_collapse(&sc).map_err(err("collapse"))?;
            let target = reference.events.last().map(|e| (e.time, e.groups[0].point));
            match (traj.events.first(), target) {
                (Some(e), Some((t, p))) => println!(
                    "merge at t = {:.6e} point {:.6e} {:+.6e}i (expected t = {:.6e} point {:.6e} {:+.6e}i)",
                    e.time, e.groups[0].point.re, e.groups[0].point.im, t, p.re, p.im
                ),
                _ => return Err("collapse: no merge detected".into()),
            }
            let out = output_path(&sc, &scenario, output, "collapse");
            finish(&traj, &out, (!no_verify).then_some(&sc.verify))
        }
        Command::Simulate { scenario, output, no_verify } => {
            let sc = load(&scenario)?;
            let traj = run_simulate(&sc).map_err(err("simulate"))?;
            let out = output_path(&sc, &scenario, output, "simulate");
            let check = !no_verify && sc.field().is_none();
            finish(&traj, &out, check.then_some(&sc.verify))
        }
        Command::Verify { trajectory, weak_tol, drift_tol } => {
            let traj = io::read_file(&trajectory).map_err(err("read"))?;
            let mut cfg = VerifyConfig::default();
            if let Some(w) = weak_tol {
                cfg.weak_tol = w;
            }
            if let Some(d) = drift_tol {
                cfg.drift_tol = d;
            }
            report(&traj, &cfg)
        }
        Command::Markov { scenario, samples, output } => {
            let sc = load(&scenario)?;
            let ms = sc.markov_scenario().map_err(err("markov"))?;
            let stats = ensemble_stats(&ms, samples);
            let n = stats.samples.len();
            println!("samples {n} completed {}", stats.completed());
            println!("mean bursts {:.6} (lambda * horizon = {:.6})", stats.mean_bursts(), ms.lambda * ms.horizon);
            println!("burst histogram {:?}", stats.burst_histogram());
            let ia = stats.inter_arrivals();
            let ks = ks_exponential(&ia, ms.lambda);
            println!("inter-arrival KS {:.4e} over {} draws (critical at 0.01: {:.4e})", ks, ia.len(), ks_critical(ia.len(), 0.01));
            let wr = stats.max_weak_residual();
            println!("max weak residual {wr:.3e}");
            if let Some(path) = output {
                let mut s = String::from("seed\tcomplete\tbursts\tdeferrals\tenergy_jump\tweak_residual\tfailure\n");
                for r in &stats.samples {
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{:.10e}\t{:.3e}\t{}\n",
                        r.seed,
                        r.complete,
                        r.burst_count,
                        r.deferrals,
                        r.energy_jump_total,
                        r.weak_residual,
                        r.failure.as_deref().unwrap_or("-")
                    ));
                }
                std::fs::write(&path, s).map_err(err("write"))?;
                println!("wrote {}", path.display());
            }
            let mut bad = vec![];
            if stats.completed() < n {
                bad.push(format!("{} samples failed to construct a burst", n - stats.completed()));
            }
            if !(wr <= sc.verify.weak_tol) {
                bad.push(format!("weak residual {wr:.3e} exceeds {:.1e}", sc.verify.weak_tol));
            }
            if bad.is_empty() {
                Ok(())
            } else {
                Err(format!("certificate failed: {}", bad.join("; ")))
            }
        }
        Command::Export { trajectory, format, output } => {
            let traj = io::read_file(&trajectory).map_err(err("read"))?;
            let text = io::export(&traj, format);
            match output {
                Some(p) => std::fs::write(&p, text).map_err(err("write")),
                None => {
                    use std::io::Write;
                    match std::io::stdout().lock().write_all(text.as_bytes()) {
                        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("stdout: {e}")),
                        _ => Ok(()),
                    }
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

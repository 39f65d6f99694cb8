use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pdp_core::config::RunConfig;
use pdp_core::fgr::{gamma, gradient_check, seeded_directions, Functional};
use pdp_core::optimizer::{optimize, sweep, Margins, SweepEntry};
use pdp_core::spectral::{count_bound_states, solve_ground_state, transmission_sweep, wronskian_at_zero};
use pdp_core::timedomain::{filter_experiment, propagate_with_state};
use pdp_core::{Complex64, PotentialField, SimResult};
use serde_json::json;

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};
use crate::io::{read_potential, OutDir, ProjectionRow, SnapshotRow, SummaryRow, TransmissionRow};
use crate::manifest::{now, Headline, Job, RunManifest, SweepVar, MANIFEST_FILE};

/// Samples of `|t(k)|²`.
const TRANSMISSION_SAMPLES: usize = 400;

/// A finished command. `check_failure` is set when the run completed but a
/// check it performs did not pass.
#[derive(Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub check_failure: Option<String>,
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(CliError::config)?;
    RunConfig::from_json(&text).map_err(|e| CliError::from(e).context(format!("config {}", path.display())))
}

fn absolute(path: Option<PathBuf>) -> CliResult<Option<PathBuf>> {
    path.map(|p| {
        fs::canonicalize(&p)
            .with_context(|| format!("potential file {}", p.display()))
            .map_err(CliError::config)
    })
    .transpose()
}

fn validated(cfg: RunConfig) -> CliResult<RunConfig> {
    cfg.validate().map_err(|e| CliError::from(e).context("config after command-line overrides"))?;
    Ok(cfg)
}

/// Turns parsed arguments into the job, its effective configuration and the
/// output directory.
pub fn prepare(command: Command) -> CliResult<(Job, RunConfig, Option<PathBuf>)> {
    match command {
        Command::Evaluate(a) => {
            let cfg = load_config(&a.cfg.config)?;
            Ok((Job::Evaluate { potential: absolute(a.potential)? }, cfg, a.out))
        }
        Command::Optimize(a) => {
            let mut cfg = load_config(&a.cfg.config)?;
            if a.symmetric {
                cfg.optimizer.symmetric = true;
            }
            if a.asymmetric {
                cfg.optimizer.symmetric = false;
            }
            if let Some(m) = a.max_iter {
                cfg.optimizer.max_iter = m;
            }
            Ok((Job::Optimize, validated(cfg)?, Some(a.out)))
        }
        Command::Sweep(a) => {
            let mut cfg = load_config(&a.cfg.config)?;
            if let Some(m) = a.max_iter {
                cfg.optimizer.max_iter = m;
            }
            if a.jobs == Some(0) {
                return Err(CliError::config(anyhow::anyhow!("--jobs must be at least 1")));
            }
            Ok((Job::Sweep { vary: a.vary, values: a.values, jobs: a.jobs }, validated(cfg)?, Some(a.out)))
        }
        Command::Simulate(a) => {
            let (potential, cfg, out) = simulation_inputs(a)?;
            Ok((Job::Simulate { potential }, validated(cfg)?, out))
        }
        Command::Filter(mut a) => {
            let (noise, seed) = (a.noise, a.seed);
            let t_final = a.sim.t_final.take();
            let (potential, mut cfg, out) = simulation_inputs(a.sim)?;
            if let Some(t) = t_final {
                cfg.simulator.filter_t_final = t;
            }
            if let Some(n) = noise {
                cfg.simulator.noise_amplitude = n;
            }
            if let Some(s) = seed {
                cfg.simulator.seed = s;
            }
            Ok((Job::Filter { potential }, validated(cfg)?, out))
        }
        Command::Gradcheck(a) => {
            let cfg = load_config(&a.cfg.config)?;
            if a.directions == 0 {
                return Err(CliError::config(anyhow::anyhow!("--directions must be at least 1")));
            }
            let job = Job::Gradcheck {
                potential: absolute(a.potential)?,
                directions: a.directions,
                seed: a.seed,
                eps: a.eps,
                tol: a.tol,
            };
            Ok((job, cfg, a.out))
        }
        Command::Rerun(a) => {
            let m = RunManifest::read(&a.manifest)?;
            Ok((m.job, validated(m.config)?, Some(a.out)))
        }
    }
}

fn simulation_inputs(a: crate::args::SimulateArgs) -> CliResult<(Option<PathBuf>, RunConfig, Option<PathBuf>)> {
    let mut cfg = load_config(&a.cfg.config)?;
    if let Some(e) = a.epsilon {
        cfg.simulator.epsilon = e;
    }
    if let Some(m) = a.mu {
        cfg.simulator.mu = Some(m);
    }
    if let Some(t) = a.t_final {
        cfg.simulator.t_final = t;
    }
    Ok((absolute(a.potential)?, cfg, Some(a.out)))
}

/// Parses, runs and writes everything for one invocation.
pub fn execute(cli: Cli) -> CliResult<RunOutput> {
    let (job, cfg, out) = prepare(cli.command)?;
    run(&job, &cfg, out.as_deref())
}

pub fn run(job: &Job, cfg: &RunConfig, out: Option<&Path>) -> CliResult<RunOutput> {
    let started_at = now();
    let mut dir = out.map(OutDir::create).transpose()?;
    let (headline, details, check_failure) = match job {
        Job::Evaluate { potential } => evaluate(cfg, potential.as_deref(), dir.as_mut())?,
        Job::Optimize => optimize_cmd(cfg, require(dir.as_mut())?)?,
        Job::Sweep { vary, values, jobs } => sweep_cmd(cfg, *vary, values, *jobs, require(dir.as_mut())?)?,
        Job::Simulate { potential } => simulate(cfg, potential.as_deref(), false, require(dir.as_mut())?)?,
        Job::Filter { potential } => simulate(cfg, potential.as_deref(), true, require(dir.as_mut())?)?,
        Job::Gradcheck { potential, directions, seed, eps, tol } => {
            gradcheck(cfg, potential.as_deref(), *directions, *seed, *eps, *tol, dir.as_mut())?
        }
    };
    let mut manifest = RunManifest {
        job: job.clone(),
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        outputs: Vec::new(),
        headline,
        details,
    };
    if let Some(d) = dir.as_mut() {
        manifest.outputs = d.written().to_vec();
        manifest.outputs.push(MANIFEST_FILE.to_string());
        d.write_json(MANIFEST_FILE, &manifest)?;
    }
    Ok(RunOutput { manifest, check_failure })
}

fn require(dir: Option<&mut OutDir>) -> CliResult<&mut OutDir> {
    dir.ok_or_else(|| CliError::config(anyhow::anyhow!("this command needs --out")))
}

type Report = (Headline, serde_json::Value, Option<String>);

fn load_potential(cfg: &RunConfig, path: Option<&Path>) -> CliResult<PotentialField> {
    match path {
        Some(p) => read_potential(p, cfg.grid()?, cfg.design.a),
        None => Ok(cfg.initial_potential()?),
    }
}

fn transmission_ks(k_res: f64, h: f64) -> Vec<f64> {
    let k_max = (2.0 * k_res).max(4.0).min(1.0 / h);
    (1..=TRANSMISSION_SAMPLES).map(|i| k_max * i as f64 / TRANSMISSION_SAMPLES as f64).collect()
}

fn write_transmission(dir: &mut OutDir, v: &PotentialField, k_res: f64) -> CliResult<()> {
    let samples = transmission_sweep(v, &transmission_ks(k_res, v.grid().h()))?;
    dir.write_csv("transmission.csv", samples.iter().map(|s| TransmissionRow { k: s.k, t_sq: s.transmission_sq() }))
}

fn evaluate(cfg: &RunConfig, potential: Option<&Path>, dir: Option<&mut OutDir>) -> CliResult<Report> {
    let v = load_potential(cfg, potential)?;
    let params = cfg.params()?;
    let res = gamma(&v, &params)?;
    let w = wronskian_at_zero(&v);
    let margins = Margins::compute(&v, &params, res.lambda(), w.w0);
    let bound_states = count_bound_states(&v);
    if let Some(d) = dir {
        d.write_psi("psi.csv", v.grid(), &res.bound_state.psi)?;
        write_transmission(d, &v, res.k_res)?;
    }
    let headline = Headline {
        gamma: Some(res.gamma),
        lambda: Some(res.lambda()),
        k_res: Some(res.k_res),
        margins: Some(margins),
        ..Headline::default()
    };
    let details = json!({
        "transmission_sq": res.transmission_sq(),
        "m_plus_sq": res.m_plus.norm_sqr(),
        "m_minus_sq": res.m_minus.norm_sqr(),
        "wronskian": w.w0,
        "wronskian_variance": w.variance,
        "bound_states": bound_states,
        "admissible": bound_states == 1 && margins.all_positive(),
    });
    Ok((headline, details, None))
}

fn optimize_cmd(cfg: &RunConfig, dir: &mut OutDir) -> CliResult<Report> {
    let v0 = cfg.initial_potential()?;
    let params = cfg.params()?;
    let out = optimize(&v0, &params, &cfg.optimizer)?;
    let bs = solve_ground_state(&out.v_opt)?;
    dir.write_trace("trace.csv", &out.trace.iterates)?;
    dir.write_potential("V_init.csv", &v0)?;
    dir.write_potential("V_opt.csv", &out.v_opt)?;
    dir.write_psi("psi.csv", out.v_opt.grid(), &bs.psi)?;
    write_transmission(dir, &out.v_opt, out.fin.k_res)?;
    let headline = Headline {
        gamma_init: Some(out.initial.gamma),
        gamma_opt: Some(out.fin.gamma),
        lambda: Some(out.fin.lambda),
        k_res: Some(out.fin.k_res),
        margins: Some(out.margins),
        ..Headline::default()
    };
    let details = json!({
        "iterations": out.iterations,
        "termination": out.termination,
        "mechanism": out.mechanism(),
        "transmission_sq": out.fin.transmission_sq,
        "wronskian": out.wronskian,
        "initial": out.initial,
        "final": out.fin,
    });
    Ok((headline, details, None))
}

fn sweep_label(vary: SweepVar, value: f64) -> String {
    format!("{}_{}", vary.name(), value)
}

fn sweep_cmd(cfg: &RunConfig, vary: SweepVar, values: &[f64], jobs: Option<usize>, dir: &mut OutDir) -> CliResult<Report> {
    let mut rows: Vec<Option<SummaryRow>> = Vec::with_capacity(values.len());
    let mut entries = Vec::new();
    let mut slots = Vec::new();
    for &value in values {
        let label = sweep_label(vary, value);
        let mut c = cfg.clone();
        match vary {
            SweepVar::A => c.design.a = value,
            SweepVar::Mu => c.design.mu = value,
        }
        let setup = c.validate().and_then(|_| Ok((c.initial_potential()?, c.params()?)));
        match setup {
            Ok((v_init, params)) => {
                slots.push(rows.len());
                rows.push(None);
                entries.push(SweepEntry { label, v_init, params, opts: c.optimizer.clone() });
            }
            Err(e) => rows.push(Some(SummaryRow {
                label,
                a: c.design.a,
                mu: c.design.mu,
                gamma_init: None,
                gamma_opt: None,
                lambda: None,
                k_res: None,
                transmission_sq: None,
                mechanism: String::new(),
                iterations: None,
                termination: String::new(),
                error: e.to_string(),
            })),
        }
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(CliError::solver)?
    };
    let runs = pool.install(|| sweep(&entries));

    for (slot, run) in slots.into_iter().zip(&runs) {
        let row = match &run.outcome {
            Ok(o) => {
                dir.write_potential(&format!("{}/V_opt.csv", run.label), &o.v_opt)?;
                dir.write_trace(&format!("{}/trace.csv", run.label), &o.trace.iterates)?;
                SummaryRow {
                    label: run.label.clone(),
                    a: run.a,
                    mu: run.mu,
                    gamma_init: Some(o.initial.gamma),
                    gamma_opt: Some(o.fin.gamma),
                    lambda: Some(o.fin.lambda),
                    k_res: Some(o.fin.k_res),
                    transmission_sq: Some(o.fin.transmission_sq),
                    mechanism: format!("{:?}", o.mechanism()),
                    iterations: Some(o.iterations),
                    termination: format!("{:?}", o.termination),
                    error: String::new(),
                }
            }
            Err(e) => SummaryRow {
                label: run.label.clone(),
                a: run.a,
                mu: run.mu,
                gamma_init: None,
                gamma_opt: None,
                lambda: None,
                k_res: None,
                transmission_sq: None,
                mechanism: String::new(),
                iterations: None,
                termination: String::new(),
                error: e.to_string(),
            },
        };
        rows[slot] = Some(row);
    }
    let rows: Vec<SummaryRow> = rows.into_iter().flatten().collect();
    dir.write_csv("summary.csv", &rows)?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    let best = rows
        .iter()
        .filter_map(|r| r.gamma_opt.map(|g| (g, r.label.clone())))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let details = json!({
        "runs": rows.len(),
        "failed": failed,
        "best": best.map(|(g, l)| json!({"label": l, "gamma_opt": g})),
    });
    Ok((Headline::default(), details, None))
}

fn simulate(cfg: &RunConfig, potential: Option<&Path>, noisy: bool, dir: &mut OutDir) -> CliResult<Report> {
    let v = load_potential(cfg, potential)?;
    let params = cfg.params()?;
    let res = gamma(&v, &params)?;
    let mut sim = cfg.sim_config()?;
    if noisy {
        sim.t_final = cfg.simulator.filter_t_final;
    }
    let vs = v.resample(sim.grid)?;
    let beta = cfg.beta_on(&vs)?;
    let result: SimResult = if noisy {
        filter_experiment(&vs, &beta, &sim, cfg.simulator.noise_amplitude, cfg.simulator.seed)?
    } else {
        let bs = solve_ground_state(&vs)?;
        let phi0: Vec<Complex64> = bs.psi.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        propagate_with_state(&vs, &beta, &phi0, &sim, &bs)?
    };
    dir.write_csv(
        "projection.csv",
        (0..result.times.len()).map(|i| ProjectionRow {
            t: result.times[i],
            projection_sq: result.projection_sq[i],
            norm: result.norm[i],
        }),
    )?;
    if !result.snapshots.is_empty() {
        let g = sim.grid;
        dir.write_csv(
            "snapshots.csv",
            result.snapshots.iter().flat_map(|s| {
                (0..g.len()).map(move |j| SnapshotRow { t: s.t, x: g.x(j), density: s.density[j] })
            }),
        )?;
    }
    let headline = Headline {
        gamma: Some(res.gamma),
        lambda: Some(result.lambda),
        k_res: Some(res.k_res),
        ..Headline::default()
    };
    let details = json!({
        "epsilon": sim.epsilon,
        "mu": sim.mu,
        "t_final": sim.t_final,
        "noisy_start": noisy,
        "retained": result.retained(),
        "final_projection_sq": result.final_projection_sq(),
        "fitted_rate": result.fitted_rate,
        "predicted_rate": 2.0 * sim.epsilon * sim.epsilon * res.gamma,
    });
    Ok((headline, details, None))
}

fn gradcheck(
    cfg: &RunConfig,
    potential: Option<&Path>,
    directions: usize,
    seed: u64,
    eps: f64,
    tol: f64,
    dir: Option<&mut OutDir>,
) -> CliResult<Report> {
    let v = load_potential(cfg, potential)?;
    let params = cfg.params()?;
    let symmetric = v.grid().is_symmetric() && v.asymmetry() == 0.0;
    let dirs = seeded_directions(&v, directions, seed, symmetric);
    let report = gradient_check(&v, &params, &dirs, eps)?;
    if let Some(d) = dir {
        d.write_csv("gradcheck.csv", &report.entries)?;
    }
    let max = |f| report.max_rel_error(f);
    let worst = report.worst();
    let passed = worst < tol;
    let details = json!({
        "eps": eps,
        "tol": tol,
        "directions": directions,
        "symmetric_directions": symmetric,
        "max_rel_error": {
            "gamma": max(Functional::Gamma),
            "lambda": max(Functional::Lambda),
            "k": max(Functional::K),
            "wronskian": max(Functional::Wronskian),
        },
        "passed": passed,
    });
    let failure = (!passed).then(|| format!("gradient check failed: worst relative error {worst:e} >= {tol:e}"));
    Ok((Headline::default(), details, failure))
}

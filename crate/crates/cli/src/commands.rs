//! Subcommand implementations.

use std::io::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use tracksim::scenario::reference::write_trajectory;
use tracksim::scenario::{
    build_scenario, prepare, reference_for, run_scenario_with, Scenario, ScenarioError, ScenarioResult, SimConfig,
    SCENARIO_NAMES,
};
use tracksim::search::{optimize, ParamSpace};
use tracksim::sim::StepStats;
use tracksim::vehicle::ModelKind;

use crate::config::{Config, ConfigError};
use crate::output::{write_file, write_result, Provenance};
use crate::report::{BenchReport, RunSummary};

pub const WORKERS_ENV: &str = "TRACKSIM_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Setup(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("simulation failed: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Simulation(_) => 2,
            _ => 1,
        }
    }
}

fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

fn setup(e: ScenarioError) -> CliError {
    CliError::Setup(e.to_string())
}

/// Sizes the global worker pool from `TRACKSIM_WORKERS` (default: all
/// cores). Later calls keep the first pool.
pub fn init_workers() -> Result<(), CliError> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Setup(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn scenario_list(names: &[String]) -> Result<Vec<Scenario>, CliError> {
    let names: Vec<String> = if names.is_empty() {
        SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    names.iter().map(|n| build_scenario(n).map_err(setup)).collect()
}

pub struct RunOptions {
    pub emit_reference: bool,
    pub fine: bool,
}

/// `run`: every selected scenario for `vehicle.model` and each seed.
pub fn cmd_run(cfg: &Config, opts: &RunOptions, out: &mut dyn std::io::Write) -> Result<Vec<ScenarioResult>, CliError> {
    let scenarios = scenario_list(&cfg.run.scenarios)?;
    let model = cfg.vehicle.model;
    let mut sim = cfg.sim;
    if opts.fine {
        let fine = SimConfig::fine();
        sim.dt = fine.dt;
        sim.solver.max_iterations = fine.solver.max_iterations;
    }
    let mut prov_cfg = cfg.clone();
    prov_cfg.sim = sim;
    let prov = Provenance::new(
        &prov_cfg,
        if opts.emit_reference {
            "run --emit-reference"
        } else {
            "run"
        },
        &[model],
        &cfg.run.seeds,
    );
    let jobs: Vec<(&Scenario, u64)> = scenarios
        .iter()
        .flat_map(|s| cfg.run.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let references = scenarios
        .iter()
        .map(|s| {
            if opts.emit_reference {
                Ok(None)
            } else {
                reference_for(s, None)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(setup)?;
    let results: Vec<ScenarioResult> = jobs
        .par_iter()
        .map(|(s, seed)| {
            let idx = scenarios.iter().position(|x| x.name == s.name).unwrap_or(0);
            run_scenario_with(
                s,
                &cfg.vehicle,
                &sim,
                *seed,
                references[idx].as_ref(),
                opts.emit_reference,
            )
        })
        .collect::<Result<_, _>>()
        .map_err(setup)?;

    let dir = cfg.output_dir();
    for r in &results {
        if opts.emit_reference {
            let mut p = prov.clone();
            p.seeds = vec![r.seed];
            let path = dir.join("reference").join(format!("{}.txt", r.scenario));
            write_file(&path, &write_trajectory(&r.trajectory, &p.header_lines())).map_err(io(&path))?;
            let _ = writeln!(out, "{}: reference written to {}", r.scenario, path.display());
        } else {
            write_result(dir, r, &prov).map_err(io(dir))?;
            let metrics: Vec<String> = r
                .metrics
                .iter()
                .map(|m| format!("{}={:.4} {}", m.name, m.value, m.unit))
                .collect();
            let _ = writeln!(
                out,
                "{} {} seed {}: {} (cpu {:.3} s)",
                r.model,
                r.scenario,
                r.seed,
                if let Some(f) = &r.failure {
                    format!("FAILED at step {}: {}", f.step, f.message)
                } else {
                    metrics.join(", ")
                },
                r.cpu_time
            );
        }
    }
    if let Some(r) = results.iter().find(|r| r.failed()) {
        let f = r
            .failure
            .as_ref()
            .map(|f| format!("step {}: {}", f.step, f.message))
            .unwrap_or_default();
        return Err(CliError::Simulation(format!(
            "{} {} seed {}: {f}",
            r.model, r.scenario, r.seed
        )));
    }
    Ok(results)
}

/// `bench`: cross product of models, scenarios and seeds.
pub fn cmd_bench(cfg: &Config, out: &mut dyn std::io::Write) -> Result<BenchReport, CliError> {
    if cfg.run.models.is_empty() {
        return Err(CliError::Setup("bench needs at least one model".into()));
    }
    if cfg.run.seeds.is_empty() {
        return Err(CliError::Setup("bench needs at least one seed".into()));
    }
    let scenarios = scenario_list(&cfg.run.scenarios)?;
    let references = scenarios
        .iter()
        .map(|s| reference_for(s, None))
        .collect::<Result<Vec<_>, _>>()
        .map_err(setup)?;
    let prov = Provenance::new(cfg, "bench", &cfg.run.models, &cfg.run.seeds);
    let mut jobs = Vec::new();
    for &m in &cfg.run.models {
        for i in 0..scenarios.len() {
            for &seed in &cfg.run.seeds {
                jobs.push((m, i, seed));
            }
        }
    }
    let results: Vec<Result<ScenarioResult, String>> = jobs
        .par_iter()
        .map(|&(m, i, seed)| {
            let vehicle = cfg.vehicle.with_model(m);
            run_scenario_with(&scenarios[i], &vehicle, &cfg.sim, seed, references[i].as_ref(), false)
                .map_err(|e| e.to_string())
        })
        .collect();
    let dir = cfg.output_dir();
    let mut runs = Vec::new();
    for (r, &(m, i, seed)) in results.iter().zip(&jobs) {
        match r {
            Ok(r) => {
                write_result(&dir.join("runs"), r, &prov).map_err(io(dir))?;
                runs.push(RunSummary::from(r));
            }
            Err(e) => runs.push(RunSummary {
                model: m.name().into(),
                scenario: scenarios[i].name.clone(),
                seed,
                metrics: Vec::new(),
                cpu_time: 0.0,
                sim_time: 0.0,
                failure: Some(e.clone()),
            }),
        }
    }
    let models: Vec<String> = cfg.run.models.iter().map(|m| m.name().to_string()).collect();
    let names: Vec<String> = scenarios.iter().map(|s| s.name.clone()).collect();
    let report = BenchReport::aggregate(prov, &models, &names, &cfg.run.seeds, runs);
    let json = dir.join("bench.json");
    write_file(
        &json,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(io(&json))?;
    let table = report.table();
    let txt = dir.join("bench.txt");
    let mut text = report
        .provenance
        .header_lines()
        .iter()
        .map(|l| format!("# {l}\n"))
        .collect::<String>();
    text.push_str(&table);
    write_file(&txt, &text).map_err(io(&txt))?;
    let _ = write!(out, "{table}");
    Ok(report)
}

#[derive(Serialize)]
struct SearchSummary<'a> {
    provenance: &'a Provenance,
    model: &'a str,
    best_params: &'a std::collections::BTreeMap<String, f64>,
    best_score: f64,
    initial_score: f64,
    best_history: &'a [f64],
    iterations: usize,
    samples: usize,
    trials: usize,
    sample_evaluations: usize,
}

/// `optimize`: random search for `vehicle.model`; writes the evaluation log,
/// a summary and a best-params TOML usable with `--config`.
pub fn cmd_optimize(cfg: &Config, out: &mut dyn std::io::Write) -> Result<tracksim::search::SearchState, CliError> {
    let scenarios = scenario_list(&cfg.search.scenarios)?;
    let with_refs = scenarios
        .into_iter()
        .map(|s| reference_for(&s, None).map(|r| (s, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(setup)?;
    let settings = cfg.search.settings();
    let space = cfg
        .search
        .space
        .clone()
        .unwrap_or_else(|| ParamSpace::around(&cfg.vehicle.params));
    let trial_seeds: Vec<u64> = (0..settings.trials as u64).collect();
    let prov = Provenance::new(cfg, "optimize", &[cfg.vehicle.model], &trial_seeds);
    let dir = cfg.output_dir();
    let log_path = dir.join("search_log.jsonl");
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut log = std::fs::File::create(&log_path).map_err(io(&log_path))?;
    let mut log_err = None;
    let _ = writeln!(
        out,
        "budget: {} iterations × {} samples × {} trials = {} evaluations (plus a {}-trial baseline)",
        settings.iterations,
        settings.samples,
        settings.trials,
        settings.budget(),
        settings.trials
    );
    let _ = writeln!(
        log,
        "{}",
        serde_json::json!({ "provenance": prov, "search_seed": cfg.search.seed })
    );
    let state = optimize(
        &space,
        &cfg.vehicle,
        &with_refs,
        &cfg.sim,
        &settings,
        cfg.search.seed,
        |records| {
            for r in records {
                if let Err(e) = writeln!(log, "{}", serde_json::to_string(r).expect("record serializes")) {
                    log_err.get_or_insert(e);
                }
                let _ = writeln!(
                    out,
                    "iteration {} sample {}: score {:.4}",
                    r.iteration, r.sample, r.score
                );
            }
        },
    )
    .map_err(|e| CliError::Setup(e.to_string()))?;
    if let Some(e) = log_err {
        return Err(io(&log_path)(e));
    }
    let summary = SearchSummary {
        provenance: &prov,
        model: cfg.vehicle.model.name(),
        best_params: &state.best_params,
        best_score: state.best_score,
        initial_score: state.initial_score,
        best_history: &state.best_history,
        iterations: settings.iterations,
        samples: settings.samples,
        trials: settings.trials,
        sample_evaluations: state.sample_evaluations,
    };
    let p = dir.join("search.json");
    write_file(&p, &serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(io(&p))?;
    let mut toml_text: String = prov.header_lines().iter().map(|l| format!("# {l}\n")).collect();
    toml_text.push_str("[vehicle.params]\n");
    for (k, v) in &state.best_params {
        toml_text.push_str(&format!("{k} = {v:?}\n"));
    }
    let p = dir.join("best_params.toml");
    write_file(&p, &toml_text).map_err(io(&p))?;
    let _ = writeln!(
        out,
        "initial score {:.4}, best score {:.4}",
        state.initial_score, state.best_score
    );
    for (k, v) in &state.best_params {
        let _ = writeln!(out, "  {k} = {v:.4}");
    }
    Ok(state)
}

#[derive(Serialize)]
struct LcpDump<'a> {
    provenance: &'a Provenance,
    scenario: &'a str,
    model: &'a str,
    step: u64,
    time: f64,
    stats: StepStats,
    problem: &'a tracksim::solver::LcpProblem<f64>,
    solution: &'a tracksim::solver::LcpSolution<f64>,
}

/// `dump-lcp`: runs a scenario up to `time` and returns the last step's
/// constraint problem and solution as JSON.
pub fn cmd_dump_lcp(cfg: &Config, scenario: &str, time: f64) -> Result<String, CliError> {
    let s = build_scenario(scenario).map_err(setup)?;
    let seed = cfg.run.seeds.first().copied().unwrap_or(0);
    if !(time > 0.0) {
        return Err(CliError::Setup("--time must be > 0".into()));
    }
    let (mut sim, handle) = prepare(&s, &cfg.vehicle, &cfg.sim, seed).map_err(setup)?;
    let mut controller = handle.controller(s.timeline.clone());
    let steps = ((time / cfg.sim.dt).round() as u64).max(1);
    let mut stats = StepStats::default();
    for k in 1..=steps {
        sim.capture_lcp = k == steps;
        stats = sim
            .step(&mut [&mut controller])
            .map_err(|e| CliError::Simulation(format!("step {k}: {e}")))?;
    }
    let (problem, solution) = sim
        .last_problem
        .as_ref()
        .ok_or_else(|| CliError::Simulation("no problem captured".into()))?;
    let prov = Provenance::new(cfg, "dump-lcp", &[cfg.vehicle.model], &[seed]);
    let dump = LcpDump {
        provenance: &prov,
        scenario,
        model: cfg.vehicle.model.name(),
        step: steps,
        time: sim.world.time,
        stats,
        problem,
        solution,
    };
    Ok(serde_json::to_string_pretty(&dump).expect("dump serializes"))
}

/// Models named on the command line, or all.
pub fn parse_models(names: &[String]) -> Result<Vec<ModelKind>, CliError> {
    names
        .iter()
        .flat_map(|n| n.split(','))
        .map(|n| n.trim().parse::<ModelKind>().map_err(CliError::Setup))
        .collect()
}

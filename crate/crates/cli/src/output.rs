//! Provenance headers and output files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tracksim::scenario::reference::write_trajectory;
use tracksim::scenario::ScenarioResult;
use tracksim::vehicle::ModelKind;

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub code_version: String,
    pub config_hash: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub solver_iterations: usize,
    /// Effective friction mode per model.
    pub friction_mode: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(cfg: &Config, command: &str, models: &[ModelKind], seeds: &[u64]) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            command: command.to_string(),
            seeds: seeds.to_vec(),
            dt: cfg.sim.dt,
            solver_iterations: cfg.sim.solver.max_iterations,
            friction_mode: models
                .iter()
                .map(|m| {
                    let mode = cfg.sim.friction_mode.unwrap_or(m.default_friction_mode());
                    (m.name().to_string(), mode.name().to_string())
                })
                .collect(),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        let modes: Vec<String> = self.friction_mode.iter().map(|(m, f)| format!("{m}={f}")).collect();
        vec![
            format!("tracksim {} {}", self.code_version, self.command),
            format!("config_hash {}", self.config_hash),
            format!(
                "seeds {}",
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
            ),
            format!("dt {}", self.dt),
            format!("solver_iterations {}", self.solver_iterations),
            format!("friction_mode {}", modes.join(",")),
        ]
    }
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
}

pub fn stem(r: &ScenarioResult) -> String {
    format!("{}_{}_seed{}", r.model, r.scenario, r.seed)
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    provenance: &'a Provenance,
    scenario: &'a str,
    model: &'a str,
    seed: u64,
    metrics: &'a [tracksim::scenario::MetricValue],
    cpu_time: f64,
    sim_time: f64,
    steps: u64,
    failure: &'a Option<tracksim::scenario::Failure>,
}

/// Writes `<stem>.traj.txt` and `<stem>.metrics.json`; returns both paths.
pub fn write_result(dir: &Path, r: &ScenarioResult, prov: &Provenance) -> std::io::Result<Vec<PathBuf>> {
    let mut prov = prov.clone();
    prov.seeds = vec![r.seed];
    let header = prov.header_lines();
    let traj = dir.join(format!("{}.traj.txt", stem(r)));
    write_file(&traj, &write_trajectory(&r.trajectory, &header))?;
    let mut paths = vec![traj];
    if !r.step_trajectory.is_empty() {
        let p = dir.join(format!("{}.steps.txt", stem(r)));
        write_file(&p, &write_trajectory(&r.step_trajectory, &header))?;
        paths.push(p);
    }
    let m = MetricsFile {
        provenance: &prov,
        scenario: &r.scenario,
        model: &r.model,
        seed: r.seed,
        metrics: &r.metrics,
        cpu_time: r.cpu_time,
        sim_time: r.sim_time,
        steps: r.steps,
        failure: &r.failure,
    };
    let p = dir.join(format!("{}.metrics.json", stem(r)));
    write_file(&p, &serde_json::to_string_pretty(&m).expect("metrics serialize"))?;
    paths.push(p);
    Ok(paths)
}

//! Aggregation of scenario runs into mean ± std tables per model.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use tracksim::scenario::{MetricValue, ScenarioResult};

use crate::output::Provenance;

/// One run without its trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub scenario: String,
    pub seed: u64,
    pub metrics: Vec<MetricValue>,
    pub cpu_time: f64,
    pub sim_time: f64,
    pub failure: Option<String>,
}

impl From<&ScenarioResult> for RunSummary {
    fn from(r: &ScenarioResult) -> Self {
        Self {
            model: r.model.clone(),
            scenario: r.scenario.clone(),
            seed: r.seed,
            metrics: r.metrics.clone(),
            cpu_time: r.cpu_time,
            sim_time: r.sim_time,
            failure: r.failure.as_ref().map(|f| format!("step {}: {}", f.step, f.message)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub scenario: String,
    pub metric: String,
    pub unit: String,
    pub mean: f64,
    pub std: f64,
    /// Seeds that contributed a value.
    pub n: usize,
    pub failed_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuRow {
    pub model: String,
    /// Stepping time summed over scenarios, mean over seeds (s).
    pub mean: f64,
    pub std: f64,
    /// Simulated time per seed (s).
    pub sim_time: f64,
    pub realtime_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub provenance: Provenance,
    pub models: Vec<String>,
    pub scenarios: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
    pub cpu: Vec<CpuRow>,
    pub runs: Vec<RunSummary>,
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl BenchReport {
    pub fn aggregate(
        provenance: Provenance,
        models: &[String],
        scenarios: &[String],
        seeds: &[u64],
        runs: Vec<RunSummary>,
    ) -> Self {
        let mut cells = Vec::new();
        for m in models {
            for s in scenarios {
                let of_cell: Vec<&RunSummary> = runs.iter().filter(|r| &r.model == m && &r.scenario == s).collect();
                let failed_seeds: Vec<u64> = of_cell.iter().filter(|r| r.failure.is_some()).map(|r| r.seed).collect();
                // metric order from the first successful run
                let names: Vec<(String, String)> = of_cell
                    .iter()
                    .find(|r| r.failure.is_none())
                    .map(|r| r.metrics.iter().map(|v| (v.name.clone(), v.unit.clone())).collect())
                    .unwrap_or_default();
                for (name, unit) in names {
                    let vals: Vec<f64> = of_cell
                        .iter()
                        .filter(|r| r.failure.is_none())
                        .filter_map(|r| r.metrics.iter().find(|v| v.name == name).map(|v| v.value))
                        .collect();
                    let (mean, std) = mean_std(&vals);
                    cells.push(Cell {
                        model: m.clone(),
                        scenario: s.clone(),
                        metric: name,
                        unit,
                        mean,
                        std,
                        n: vals.len(),
                        failed_seeds: failed_seeds.clone(),
                    });
                }
                if of_cell.iter().all(|r| r.failure.is_some()) && !of_cell.is_empty() {
                    cells.push(Cell {
                        model: m.clone(),
                        scenario: s.clone(),
                        metric: "failed".into(),
                        unit: String::new(),
                        mean: f64::NAN,
                        std: f64::NAN,
                        n: 0,
                        failed_seeds,
                    });
                }
            }
        }
        let cpu = models
            .iter()
            .map(|m| {
                let mut per_seed: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
                for r in runs.iter().filter(|r| &r.model == m) {
                    let e = per_seed.entry(r.seed).or_default();
                    e.0 += r.cpu_time;
                    e.1 += r.sim_time;
                }
                let cpu: Vec<f64> = per_seed.values().map(|v| v.0).collect();
                let sim: Vec<f64> = per_seed.values().map(|v| v.1).collect();
                let (mean, std) = mean_std(&cpu);
                let (sim_time, _) = mean_std(&sim);
                CpuRow {
                    model: m.clone(),
                    mean,
                    std,
                    sim_time,
                    realtime_factor: sim_time / mean,
                }
            })
            .collect();
        Self {
            provenance,
            models: models.to_vec(),
            scenarios: scenarios.to_vec(),
            seeds: seeds.to_vec(),
            cells,
            cpu,
            runs,
        }
    }

    pub fn any_failure(&self) -> bool {
        self.runs.iter().any(|r| r.failure.is_some())
    }

    /// Plain-text table: one row per scenario metric, one column per model.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, String, Vec<String>)> = Vec::new();
        for s in &self.scenarios {
            let mut metrics: Vec<(String, String)> = Vec::new();
            for c in self.cells.iter().filter(|c| &c.scenario == s && c.metric != "failed") {
                if !metrics.iter().any(|(n, _)| n == &c.metric) {
                    metrics.push((c.metric.clone(), c.unit.clone()));
                }
            }
            if metrics.is_empty() {
                metrics.push(("failed".into(), String::new()));
            }
            for (name, unit) in metrics {
                let vals = self
                    .models
                    .iter()
                    .map(|m| {
                        match self
                            .cells
                            .iter()
                            .find(|c| &c.model == m && &c.scenario == s && c.metric == name)
                        {
                            Some(c) if c.n > 0 => {
                                let mark = if c.failed_seeds.is_empty() { "" } else { "*" };
                                format!("{:.3}±{:.3}{mark}", c.mean, c.std)
                            }
                            _ if self
                                .cells
                                .iter()
                                .any(|c| &c.model == m && &c.scenario == s && c.metric == "failed") =>
                            {
                                "FAILED".into()
                            }
                            _ => "-".into(),
                        }
                    })
                    .collect();
                let label = if unit.is_empty() {
                    name
                } else {
                    format!("{name} [{unit}]")
                };
                rows.push((s.clone(), label, vals));
            }
        }
        let cpu: Vec<String> = self.cpu.iter().map(|c| format!("{:.2}±{:.2}", c.mean, c.std)).collect();
        rows.push(("CPU time".into(), "[s]".into(), cpu));
        let rtf: Vec<String> = self.cpu.iter().map(|c| format!("{:.1}", c.realtime_factor)).collect();
        rows.push(("realtime factor".into(), String::new(), rtf));

        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(6);
        let wc: Vec<usize> = (0..self.models.len())
            .map(|i| {
                rows.iter()
                    .map(|r| r.2[i].chars().count())
                    .chain([self.models[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:w0$}  {:w1$}", "scenario", "metric");
        for (m, w) in self.models.iter().zip(&wc) {
            let _ = write!(out, "  {m:>w$}");
        }
        out.push('\n');
        for (s, label, vals) in &rows {
            let _ = write!(out, "{s:w0$}  {label:w1$}");
            for (v, w) in vals.iter().zip(&wc) {
                let pad = w.saturating_sub(v.chars().count());
                let _ = write!(out, "  {}{v}", " ".repeat(pad));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "seeds: {}; * = some seeds failed", self.seeds.len());
        out
    }
}

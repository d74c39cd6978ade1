//! Iterated Gaussian random search over the identified vehicle parameters.
//!
//! Each iteration draws samples around the best parameters so far with a
//! diagonal covariance σ_i = scale · (upper_i − lower_i) / 4, clamps them to
//! the bounds and scores each one as the mean over several trials.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{run_scenario_with, Scenario, SimConfig, Trajectory};
use crate::vehicle::{IdentifiedParams, ModelKind, VehicleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    LinearGain,
    AngularGain,
    SteeringEfficiency,
    Mu1,
    Mu2,
}

impl ParamName {
    pub const ALL: [ParamName; 5] = [
        ParamName::LinearGain,
        ParamName::AngularGain,
        ParamName::SteeringEfficiency,
        ParamName::Mu1,
        ParamName::Mu2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamName::LinearGain => "linear_gain",
            ParamName::AngularGain => "angular_gain",
            ParamName::SteeringEfficiency => "steering_efficiency",
            ParamName::Mu1 => "mu1",
            ParamName::Mu2 => "mu2",
        }
    }

    pub fn get(&self, p: &IdentifiedParams) -> f64 {
        match self {
            ParamName::LinearGain => p.linear_gain,
            ParamName::AngularGain => p.angular_gain,
            ParamName::SteeringEfficiency => p.steering_efficiency,
            ParamName::Mu1 => p.mu1,
            ParamName::Mu2 => p.mu2,
        }
    }

    pub fn set(&self, p: &mut IdentifiedParams, v: f64) {
        match self {
            ParamName::LinearGain => p.linear_gain = v,
            ParamName::AngularGain => p.angular_gain = v,
            ParamName::SteeringEfficiency => p.steering_efficiency = v,
            ParamName::Mu1 => p.mu1 = v,
            ParamName::Mu2 => p.mu2 = v,
        }
    }

    /// Models whose behavior depends on the parameter.
    pub fn applicable(&self) -> Vec<ModelKind> {
        use ModelKind::*;
        match self {
            ParamName::LinearGain | ParamName::AngularGain => vec![Csm, Wheels4, Wheels8, NoFriction],
            ParamName::SteeringEfficiency | ParamName::Mu1 => vec![Csm, Wheels4, Wheels8],
            ParamName::Mu2 => vec![Csm],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDim {
    pub name: ParamName,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
    pub applicable: Vec<ModelKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricWeights {
    /// Weight of distance metrics (per m).
    pub distance: f64,
    /// Weight of angular metrics (m per rad).
    pub angular: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            distance: 1.0,
            angular: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpace {
    pub dims: Vec<ParamDim>,
    pub weights: MetricWeights,
    /// Multiplier on σ = range / 4.
    pub sigma_scale: f64,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self::around(&IdentifiedParams::default())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("invalid search settings: {0}")]
    InvalidSettings(String),
}

impl ParamSpace {
    /// Default ranges with the given starting point.
    pub fn around(initial: &IdentifiedParams) -> Self {
        let dims = ParamName::ALL
            .into_iter()
            .map(|name| {
                let (lower, upper) = match name {
                    ParamName::LinearGain | ParamName::AngularGain => (0.5, 1.5),
                    ParamName::SteeringEfficiency => (0.3, 1.0),
                    ParamName::Mu1 | ParamName::Mu2 => (0.2, 2.5),
                };
                ParamDim {
                    name,
                    lower,
                    upper,
                    initial: name.get(initial).clamp(lower, upper),
                    applicable: name.applicable(),
                }
            })
            .collect();
        Self {
            dims,
            weights: MetricWeights::default(),
            sigma_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidSpace(m));
        for d in &self.dims {
            let n = d.name.name();
            if !(d.lower < d.upper) {
                return bad(format!("{n}: lower must be < upper"));
            }
            if !(d.initial >= d.lower && d.initial <= d.upper) {
                return bad(format!("{n}: initial outside [lower, upper]"));
            }
            if d.name == ParamName::SteeringEfficiency && !(d.lower > 0.0 && d.upper <= 1.0) {
                return bad(format!("{n}: bounds must lie in (0, 1]"));
            }
            if matches!(d.name, ParamName::Mu1 | ParamName::Mu2) && d.lower < 0.0 {
                return bad(format!("{n}: lower must be >= 0"));
            }
        }
        if !(self.sigma_scale >= 0.0 && self.sigma_scale.is_finite()) {
            return bad("sigma_scale must be finite and >= 0".into());
        }
        if !(self.weights.distance >= 0.0 && self.weights.angular >= 0.0) {
            return bad("weights must be >= 0".into());
        }
        Ok(())
    }

    /// Dimensions searched for a model.
    pub fn active(&self, model: ModelKind) -> Vec<ParamDim> {
        self.dims
            .iter()
            .filter(|d| d.applicable.contains(&model))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub iterations: usize,
    pub samples: usize,
    pub trials: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            iterations: 5,
            samples: 5,
            trials: 3,
        }
    }
}

impl SearchSettings {
    /// Sample evaluations excluding the baseline.
    pub fn budget(&self) -> usize {
        self.iterations * self.samples * self.trials
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.samples == 0 || self.trials == 0 {
            return Err(SearchError::InvalidSettings("samples and trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Score of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub score: f64,
    /// (scenario, metric, value)
    pub metrics: Vec<(String, String, f64)>,
    pub failures: Vec<String>,
}

impl TrialScore {
    pub fn of(score: f64) -> Self {
        Self {
            score,
            metrics: Vec::new(),
            failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 0 is the baseline at the initial parameters.
    pub iteration: usize,
    pub sample: usize,
    pub params: BTreeMap<String, f64>,
    pub trials: Vec<TrialScore>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub best_params: BTreeMap<String, f64>,
    pub best_score: f64,
    pub initial_score: f64,
    pub iteration: usize,
    pub seed: u64,
    /// Best score after the baseline and after each iteration.
    pub best_history: Vec<f64>,
    pub sample_evaluations: usize,
    pub log: Vec<EvalRecord>,
}

fn named(dims: &[ParamDim], x: &[f64]) -> BTreeMap<String, f64> {
    dims.iter()
        .zip(x)
        .map(|(d, v)| (d.name.name().to_string(), *v))
        .collect()
}

fn mean(v: &[TrialScore]) -> f64 {
    let s: f64 = v.iter().map(|t| t.score).sum();
    let m = s / v.len() as f64;
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

/// Runs the search on an arbitrary objective `f(x, trial)`. `on_iteration`
/// receives each iteration's records in sample order.
pub fn random_search<F, L>(
    dims: &[ParamDim],
    sigma_scale: f64,
    settings: &SearchSettings,
    seed: u64,
    objective: F,
    mut on_iteration: L,
) -> Result<SearchState, SearchError>
where
    F: Fn(&[f64], usize) -> TrialScore + Sync,
    L: FnMut(&[EvalRecord]),
{
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let evaluate = |iteration: usize, xs: Vec<Vec<f64>>| -> Vec<EvalRecord> {
        let jobs: Vec<(usize, usize)> = (0..xs.len())
            .flat_map(|s| (0..settings.trials).map(move |t| (s, t)))
            .collect();
        let scores: Vec<TrialScore> = jobs.par_iter().map(|&(s, t)| objective(&xs[s], t)).collect();
        xs.iter()
            .enumerate()
            .map(|(s, x)| {
                let trials = scores[s * settings.trials..(s + 1) * settings.trials].to_vec();
                EvalRecord {
                    iteration,
                    sample: s,
                    params: named(dims, x),
                    score: mean(&trials),
                    trials,
                }
            })
            .collect()
    };

    let mut best: Vec<f64> = dims.iter().map(|d| d.initial).collect();
    let baseline = evaluate(0, vec![best.clone()]);
    on_iteration(&baseline);
    let mut best_score = baseline[0].score;
    let initial_score = best_score;
    let mut log = baseline;
    let mut history = vec![best_score];
    let sigma: Vec<f64> = dims.iter().map(|d| sigma_scale * (d.upper - d.lower) / 4.0).collect();

    for it in 1..=settings.iterations {
        let xs: Vec<Vec<f64>> = (0..settings.samples)
            .map(|_| {
                dims.iter()
                    .zip(&best)
                    .zip(&sigma)
                    .map(|((d, b), s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (b + s * z).clamp(d.lower, d.upper)
                    })
                    .collect()
            })
            .collect();
        let records = evaluate(it, xs);
        on_iteration(&records);
        for r in &records {
            if r.score < best_score {
                best_score = r.score;
                best = dims.iter().map(|d| r.params[d.name.name()]).collect();
            }
        }
        history.push(best_score);
        log.extend(records);
    }
    Ok(SearchState {
        best_params: named(dims, &best),
        best_score,
        initial_score,
        iteration: settings.iterations,
        seed,
        best_history: history,
        sample_evaluations: settings.budget(),
        log,
    })
}

/// Weighted metric sum of one suite run; a failed or erroring scenario
/// scores +∞.
pub fn suite_score(
    scenarios: &[(Scenario, Option<Trajectory>)],
    vehicle: &VehicleConfig,
    sim: &SimConfig,
    weights: &MetricWeights,
    seed: u64,
) -> TrialScore {
    let mut out = TrialScore::of(0.0);
    for (s, reference) in scenarios {
        match run_scenario_with(s, vehicle, sim, seed, reference.as_ref(), false) {
            Ok(r) if !r.failed() => {
                for (m, v) in s.metrics.iter().zip(&r.metrics) {
                    let w = if m.is_angular() {
                        weights.angular
                    } else {
                        weights.distance
                    };
                    out.score += w * v.value;
                    out.metrics.push((s.name.clone(), v.name.clone(), v.value));
                }
            }
            Ok(r) => {
                out.score = f64::INFINITY;
                let f = r.failure.unwrap_or_else(|| unreachable!());
                out.failures.push(format!("{}: step {}: {}", s.name, f.step, f.message));
            }
            Err(e) => {
                out.score = f64::INFINITY;
                out.failures.push(format!("{}: {e}", s.name));
            }
        }
    }
    out
}

/// Identifies the parameters of `base.model` on the given scenarios. Trial
/// `k` runs every scenario with seed `k`.
pub fn optimize<L: FnMut(&[EvalRecord])>(
    space: &ParamSpace,
    base: &VehicleConfig,
    scenarios: &[(Scenario, Option<Trajectory>)],
    sim: &SimConfig,
    settings: &SearchSettings,
    seed: u64,
    on_iteration: L,
) -> Result<SearchState, SearchError> {
    space.validate()?;
    let dims = space.active(base.model);
    let objective = |x: &[f64], trial: usize| {
        let mut v = *base;
        for (d, val) in dims.iter().zip(x) {
            d.name.set(&mut v.params, *val);
        }
        suite_score(scenarios, &v, sim, &space.weights, trial as u64)
    };
    random_search(&dims, space.sigma_scale, settings, seed, objective, on_iteration)
}

/// Applies a best-parameter map to a vehicle config.
pub fn apply_params(cfg: &mut VehicleConfig, params: &BTreeMap<String, f64>) -> Result<(), SearchError> {
    for (k, v) in params {
        let name = ParamName::ALL
            .into_iter()
            .find(|p| p.name() == k)
            .ok_or_else(|| SearchError::InvalidSpace(format!("unknown parameter '{k}'")))?;
        name.set(&mut cfg.params, *v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(lower: f64, upper: f64, initial: f64) -> ParamDim {
        ParamDim {
            name: ParamName::LinearGain,
            lower,
            upper,
            initial,
            applicable: vec![ModelKind::Csm],
        }
    }

    fn quad(x: &[f64], _: usize) -> TrialScore {
        TrialScore::of((x[0] - 0.8).powi(2))
    }

    #[test]
    fn quadratic_improves_monotonically() {
        let s = random_search(&[dim(0.0, 2.0, 1.9)], 1.0, &SearchSettings::default(), 7, quad, |_| {}).unwrap();
        assert!(s.best_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.best_score < s.initial_score);
        assert_eq!(s.best_history.len(), 6);
    }

    #[test]
    fn zero_variance_keeps_initial() {
        let s = random_search(&[dim(0.0, 2.0, 1.2)], 0.0, &SearchSettings::default(), 1, quad, |_| {}).unwrap();
        assert_eq!(s.best_params["linear_gain"], 1.2);
        assert_eq!(s.best_score, quad(&[1.2], 0).score);
    }

    #[test]
    fn budget_counts_trials() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let f = |x: &[f64], t: usize| {
            calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            quad(x, t)
        };
        let s = random_search(&[dim(0.0, 2.0, 1.0)], 1.0, &SearchSettings::default(), 3, f, |_| {}).unwrap();
        assert_eq!(s.sample_evaluations, 75);
        // 75 plus the 3-trial baseline
        assert_eq!(calls.into_inner(), 78);
        assert_eq!(s.log.len(), 26);
    }

    #[test]
    fn samples_are_clamped_and_seeded() {
        let dims = [dim(0.9, 1.1, 1.0)];
        let a = random_search(&dims, 10.0, &SearchSettings::default(), 11, quad, |_| {}).unwrap();
        for r in &a.log {
            let v = r.params["linear_gain"];
            assert!((0.9..=1.1).contains(&v));
        }
        let b = random_search(&dims, 10.0, &SearchSettings::default(), 11, quad, |_| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nan_scores_count_as_infinite() {
        let s = random_search(
            &[dim(0.0, 2.0, 1.0)],
            1.0,
            &SearchSettings::default(),
            2,
            |_: &[f64], _| TrialScore::of(f64::NAN),
            |_| {},
        )
        .unwrap();
        assert_eq!(s.best_score, f64::INFINITY);
        assert_eq!(s.best_params["linear_gain"], 1.0);
    }

    #[test]
    fn applicable_parameters_per_model() {
        let space = ParamSpace::default();
        assert_eq!(space.active(ModelKind::Csm).len(), 5);
        assert_eq!(space.active(ModelKind::NoFriction).len(), 2);
        assert_eq!(space.active(ModelKind::Wheels4).len(), 4);
        space.validate().unwrap();
    }

    #[test]
    fn space_validation() {
        let mut space = ParamSpace::default();
        space.dims[2].upper = 1.2;
        assert!(space.validate().is_err());
        let mut space = ParamSpace::default();
        space.dims[0].lower = 2.0;
        assert!(space.validate().is_err());
    }
}

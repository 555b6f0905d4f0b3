//! Synthetic sequential-rating data from three agent families.
//!
//! * `nic`: every trial carries a predetermined readout triple drawn from a
//!   fixed joint; the evaluations report their own component regardless of
//!   order.
//! * `invasive_classical`: like `nic`, but a chosen predecessor shifts the
//!   second readout by `delta`. Classical, yet order-dependent.
//! * `rotation`: the three-rotation model applied to a (jittered) initial
//!   state.
//!
//! Every trial draws from its own seeded substreams (state, first-readout
//! noise, second-readout noise), so output is identical for any thread count
//! and a trial's second readout under a NIC agent does not depend on which
//! evaluation ran first.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framework::{apply_back_action, readout, StateVector};
use crate::nic::{estimate_stats, test_equalities, AnalysisConfig};
use crate::rotation::RotationModelConfig;
use crate::seed;
use crate::trial::{Covariates, TrialRecord};

pub const DEFAULT_EVALUATIONS: [&str; 3] = ["EC", "EL", "EK"];

const STREAM_SCHEDULE: u64 = 0x5C4E;
const STREAM_TRIAL: u64 = 0x7121;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentAtom {
    pub weight: f64,
    pub values: [f64; 3],
}

/// Joint distribution of the predetermined readout triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LatentModel {
    Discrete { atoms: Vec<LatentAtom> },
    /// `R_k = clamp(mean_k + sd·(√ρ·z0 + √(1-ρ)·z_k), 0, 1)` with a shared
    /// factor `z0`.
    Correlated {
        means: [f64; 3],
        sd: f64,
        correlation: f64,
    },
}

impl Default for LatentModel {
    fn default() -> Self {
        LatentModel::Correlated {
            means: [0.7, 0.3, 0.6],
            sd: 0.15,
            correlation: 0.5,
        }
    }
}

impl LatentModel {
    fn validate(&self) -> Result<()> {
        match self {
            LatentModel::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Config("discrete latent joint has no atoms".into()));
                }
                if atoms.iter().any(|a| !(a.weight >= 0.0 && a.weight.is_finite())) {
                    return Err(Error::Config("atom weights must be nonnegative".into()));
                }
                if atoms.iter().flat_map(|a| a.values).any(|v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Config("latent readouts must lie in [0, 1]".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("atom weights sum to {total}, not 1")));
                }
            }
            LatentModel::Correlated {
                means,
                sd,
                correlation,
            } => {
                if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(Error::Config("latent means must lie in [0, 1]".into()));
                }
                if !(*sd >= 0.0 && sd.is_finite()) {
                    return Err(Error::Config("latent sd must be nonnegative".into()));
                }
                if !(0.0..=1.0).contains(correlation) {
                    return Err(Error::Config("correlation must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match self {
            LatentModel::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.values;
                    }
                }
                atoms.last().expect("validated nonempty").values
            }
            LatentModel::Correlated {
                means,
                sd,
                correlation,
            } => {
                let common: f64 = StandardNormal.sample(rng);
                let (a, b) = (correlation.sqrt(), (1.0 - correlation).sqrt());
                std::array::from_fn(|k| {
                    let own: f64 = StandardNormal.sample(rng);
                    (means[k] + sd * (a * common + b * own)).clamp(0.0, 1.0)
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Nic {
        #[serde(default)]
        latent: LatentModel,
    },
    InvasiveClassical {
        #[serde(default)]
        latent: LatentModel,
        delta: f64,
        /// Evaluation id whose occurrence in first position shifts the
        /// second readout.
        after: String,
    },
    Rotation {
        #[serde(default)]
        config: RotationModelConfig,
    },
}

/// How covariates are generated from the pre-evaluation state. The state
/// scalar `s` is the mean of the three latent readouts (latent agents) or of
/// the three first-position readouts of the jittered state (rotation agent);
/// it never depends on the condition.
///
/// * difficulty: uniform over `difficulty_levels`;
/// * accuracy ~ Bernoulli(clamp(base_accuracy - difficulty_slope·difficulty
///   + state_slope·(s - ½), 0, 1));
/// * response time = rt_median_ms · exp(rt_difficulty_slope·difficulty
///   + rt_log_sd·z).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateModel {
    pub difficulty_levels: Vec<f64>,
    pub base_accuracy: f64,
    pub difficulty_slope: f64,
    pub state_slope: f64,
    pub rt_median_ms: f64,
    pub rt_log_sd: f64,
    pub rt_difficulty_slope: f64,
}

impl Default for CovariateModel {
    fn default() -> Self {
        CovariateModel {
            difficulty_levels: vec![0.2, 0.5, 0.8],
            base_accuracy: 0.9,
            difficulty_slope: 0.3,
            state_slope: 0.4,
            rt_median_ms: 800.0,
            rt_log_sd: 0.3,
            rt_difficulty_slope: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(flatten)]
    pub kind: AgentKind,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub drift_sigma: f64,
    #[serde(default)]
    pub covariates: CovariateModel,
}

impl AgentSpec {
    pub fn nic(latent: LatentModel, noise_sigma: f64) -> Self {
        AgentSpec {
            kind: AgentKind::Nic { latent },
            noise_sigma,
            drift_sigma: 0.0,
            covariates: CovariateModel::default(),
        }
    }

    pub fn rotation(config: RotationModelConfig, noise_sigma: f64) -> Self {
        AgentSpec {
            kind: AgentKind::Rotation { config },
            noise_sigma,
            drift_sigma: 0.0,
            covariates: CovariateModel::default(),
        }
    }

    pub fn invasive(latent: LatentModel, delta: f64, after: impl Into<String>, noise_sigma: f64) -> Self {
        AgentSpec {
            kind: AgentKind::InvasiveClassical {
                latent,
                delta,
                after: after.into(),
            },
            noise_sigma,
            drift_sigma: 0.0,
            covariates: CovariateModel::default(),
        }
    }

    pub fn validate(&self, evaluations: &[String; 3]) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        if !(self.drift_sigma >= 0.0 && self.drift_sigma.is_finite()) {
            return Err(Error::Config("drift_sigma must be nonnegative".into()));
        }
        let cov = &self.covariates;
        if cov.difficulty_levels.is_empty() || !(cov.rt_median_ms > 0.0) || cov.rt_log_sd < 0.0 {
            return Err(Error::Config("invalid covariate model".into()));
        }
        match &self.kind {
            AgentKind::Nic { latent } => latent.validate(),
            AgentKind::InvasiveClassical { latent, delta, after } => {
                latent.validate()?;
                if !delta.is_finite() {
                    return Err(Error::Config("delta must be finite".into()));
                }
                if !evaluations.contains(after) {
                    return Err(Error::Config(format!(
                        "`after` names {after}, which is not one of {evaluations:?}"
                    )));
                }
                Ok(())
            }
            AgentKind::Rotation { .. } => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counterbalancing {
    /// Conditions interleaved in a seeded random order.
    #[default]
    Randomized,
    /// All trials of a condition consecutively, conditions in plan order.
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub n_trials_per_condition: usize,
    /// Ordered `(first, second)` pairs; all six when `None`.
    #[serde(default)]
    pub conditions: Option<Vec<(String, String)>>,
    pub seed: u64,
    #[serde(default)]
    pub counterbalancing: Counterbalancing,
    pub evaluations: [String; 3],
    #[serde(default)]
    pub session_id: Option<String>,
}

impl SimulationPlan {
    pub fn new(n_trials_per_condition: usize, seed: u64) -> Self {
        SimulationPlan {
            n_trials_per_condition,
            conditions: None,
            seed,
            counterbalancing: Counterbalancing::Randomized,
            evaluations: DEFAULT_EVALUATIONS.map(String::from),
            session_id: None,
        }
    }

    pub fn with_evaluations<S: Into<String>>(mut self, evaluations: [S; 3]) -> Self {
        self.evaluations = evaluations.map(Into::into);
        self
    }

    pub fn session_id(&self) -> String {
        self.session_id
            .clone()
            .unwrap_or_else(|| format!("sim-{}", self.seed))
    }

    /// Conditions as index pairs into `evaluations`.
    pub fn condition_indices(&self) -> Result<Vec<(usize, usize)>> {
        let index = |id: &str| {
            self.evaluations
                .iter()
                .position(|e| e == id)
                .ok_or_else(|| Error::Config(format!("unknown evaluation `{id}` in conditions")))
        };
        match &self.conditions {
            None => Ok(all_conditions()),
            Some(list) => list
                .iter()
                .map(|(a, b)| {
                    let (i, j) = (index(a)?, index(b)?);
                    if i == j {
                        return Err(Error::Config(format!("condition {a} -> {b} repeats an evaluation")));
                    }
                    Ok((i, j))
                })
                .collect(),
        }
    }
}

/// The six ordered pairs of three evaluations.
pub fn all_conditions() -> Vec<(usize, usize)> {
    (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Generates one trial list, ordered by `trial_index`.
pub fn simulate(agent: &AgentSpec, plan: &SimulationPlan) -> Result<Vec<TrialRecord>> {
    agent.validate(&plan.evaluations)?;
    let conditions = plan.condition_indices()?;
    let mut schedule: Vec<(usize, usize)> = conditions
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, plan.n_trials_per_condition))
        .collect();
    if plan.counterbalancing == Counterbalancing::Randomized {
        schedule.shuffle(&mut seed::substream(plan.seed, &[STREAM_SCHEDULE]));
    }
    let session_id = plan.session_id();
    let trials = schedule
        .par_iter()
        .enumerate()
        .map(|(k, &(first, second))| {
            let (r1, r2, covariates) = simulate_trial(agent, plan, k as u64, first, second);
            TrialRecord {
                session_id: session_id.clone(),
                trial_index: k as u64,
                first_eval: plan.evaluations[first].clone(),
                second_eval: plan.evaluations[second].clone(),
                r1,
                r2,
                covariates: Some(covariates),
            }
        })
        .collect();
    Ok(trials)
}

/// Readouts and covariates of trial `trial_index` under condition
/// `first -> second` (indices into the plan's evaluations).
pub fn simulate_trial(
    agent: &AgentSpec,
    plan: &SimulationPlan,
    trial_index: u64,
    first: usize,
    second: usize,
) -> (f64, f64, Covariates) {
    let mut state_rng = seed::substream(plan.seed, &[STREAM_TRIAL, trial_index, 0]);
    let mut noise1 = seed::substream(plan.seed, &[STREAM_TRIAL, trial_index, 1]);
    let mut noise2 = seed::substream(plan.seed, &[STREAM_TRIAL, trial_index, 2]);
    let mut cov_rng = seed::substream(plan.seed, &[STREAM_TRIAL, trial_index, 3]);
    let sigma = agent.noise_sigma;

    let (clean1, clean2, state_scalar) = match &agent.kind {
        AgentKind::Nic { latent } => {
            let values = drifted(latent.sample(&mut state_rng), agent.drift_sigma, &mut state_rng);
            (values[first], values[second], mean3(values))
        }
        AgentKind::InvasiveClassical { latent, delta, after } => {
            let values = drifted(latent.sample(&mut state_rng), agent.drift_sigma, &mut state_rng);
            let shift = if plan.evaluations[first] == *after { *delta } else { 0.0 };
            (values[first], (values[second] + shift).clamp(0.0, 1.0), mean3(values))
        }
        AgentKind::Rotation { config } => {
            let v = jitter(&config.v0, agent.drift_sigma, &mut state_rng);
            let evals = config.evaluations();
            let after_first = apply_back_action(&evals[first], &v);
            let firsts = [0, 1, 2].map(|k| readout(&evals[k], &v));
            (firsts[first], readout(&evals[second], &after_first), mean3(firsts))
        }
    };
    let r1 = truncated_normal(clean1, sigma, &mut noise1);
    let r2 = truncated_normal(clean2, sigma, &mut noise2);
    (r1, r2, covariates(&agent.covariates, state_scalar, &mut cov_rng))
}

fn mean3(v: [f64; 3]) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

/// A common additive shift of all latent readouts.
fn drifted(values: [f64; 3], drift: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    if drift == 0.0 {
        return values;
    }
    let z: f64 = StandardNormal.sample(rng);
    values.map(|v| (v + drift * z).clamp(0.0, 1.0))
}

/// Gaussian displacement in the tangent plane at `v0`, projected back to
/// the sphere.
fn jitter(v0: &StateVector, drift: f64, rng: &mut ChaCha8Rng) -> StateVector {
    if drift == 0.0 {
        return *v0;
    }
    let v = v0.components();
    // Any vector not parallel to v0 seeds the tangent basis.
    let helper = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let t1 = cross(v, helper);
    let n1 = (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt();
    let t1 = t1.map(|c| c / n1);
    let t2 = cross(v, t1);
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let moved: [f64; 3] = std::array::from_fn(|k| v[k] + drift * (z1 * t1[k] + z2 * t2[k]));
    StateVector::normalized(moved[0], moved[1], moved[2]).unwrap_or(*v0)
}

/// `mean + sigma·z` conditioned on landing in `[0, 1]` (rejection), falling
/// back to clamping if the mean sits far outside the interval.
fn truncated_normal(mean: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    if sigma == 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    for _ in 0..1000 {
        let z: f64 = StandardNormal.sample(rng);
        let x = mean + sigma * z;
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    mean.clamp(0.0, 1.0)
}

fn covariates(model: &CovariateModel, state: f64, rng: &mut ChaCha8Rng) -> Covariates {
    let difficulty = model.difficulty_levels[rng.random_range(0..model.difficulty_levels.len())];
    let p_correct = (model.base_accuracy - model.difficulty_slope * difficulty
        + model.state_slope * (state - 0.5))
        .clamp(0.0, 1.0);
    let accuracy = u8::from(rng.random::<f64>() < p_correct);
    let z: f64 = StandardNormal.sample(rng);
    let rt = model.rt_median_ms * (model.rt_difficulty_slope * difficulty + model.rt_log_sd * z).exp();
    Covariates {
        accuracy: Some(accuracy),
        response_time_ms: Some(rt),
        difficulty: Some(difficulty),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n_per_condition: usize,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    /// `sqrt(rate·(1 - rate) / replications)`
    pub binomial_se: f64,
}

pub const MIN_POWER_REPLICATIONS: usize = 100;

/// Whether one simulated data set leads the equality battery to reject at
/// `cfg.alpha` (Holm-adjusted).
pub fn rejects_nic(agent: &AgentSpec, plan: &SimulationPlan, cfg: &AnalysisConfig) -> Result<bool> {
    let trials = simulate(agent, plan)?;
    let stats = estimate_stats(&trials, cfg.threshold)?;
    let battery = test_equalities(
        &stats,
        &trials,
        cfg.n_permutations,
        &cfg.strata,
        cfg.difficulty_bins,
        seed::derive(plan.seed, &[cfg.seed]),
    )?;
    Ok(battery.tests.iter().any(|t| t.p_adjusted < cfg.alpha))
}

/// Rejection rate of the equality battery per sample size. Replication `r`
/// at size `n` uses seed `derive(template.seed, [n, r])`.
pub fn power_curve(
    agent: &AgentSpec,
    template: &SimulationPlan,
    n_grid: &[usize],
    replications: usize,
    cfg: &AnalysisConfig,
) -> Result<Vec<PowerRow>> {
    if replications < MIN_POWER_REPLICATIONS {
        return Err(Error::Config(format!(
            "power curves need at least {MIN_POWER_REPLICATIONS} replications"
        )));
    }
    cfg.validate()?;
    n_grid
        .iter()
        .map(|&n| {
            let outcomes = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut plan = template.clone();
                    plan.n_trials_per_condition = n;
                    plan.seed = seed::derive(template.seed, &[n as u64, r as u64]);
                    rejects_nic(agent, &plan, cfg)
                })
                .collect::<Result<Vec<bool>>>()?;
            let rejections = outcomes.iter().filter(|&&b| b).count();
            let rate = rejections as f64 / replications as f64;
            Ok(PowerRow {
                n_per_condition: n,
                replications,
                rejections,
                rate,
                binomial_se: (rate * (1.0 - rate) / replications as f64).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{default_closed_forms, exact_c_matrix};
    use approx::assert_abs_diff_eq;

    fn rotation_plan(n: usize, seed: u64) -> SimulationPlan {
        SimulationPlan::new(n, seed).with_evaluations(["E1", "E2", "E3"])
    }

    #[test]
    fn noiseless_rotation_agent_reproduces_table() {
        let agent = AgentSpec::rotation(RotationModelConfig::default(), 0.0);
        let trials = simulate(&agent, &rotation_plan(20, 1)).unwrap();
        assert_eq!(trials.len(), 120);
        let (lo, _) = default_closed_forms();
        let exact = exact_c_matrix(&RotationModelConfig::default());
        for t in &trials {
            let i = t.first_eval[1..].parse::<usize>().unwrap() - 1;
            let j = t.second_eval[1..].parse::<usize>().unwrap() - 1;
            assert_eq!(t.r2, exact.entries[i][j]);
            if t.first_eval == "E1" && t.second_eval == "E2" {
                assert_abs_diff_eq!(t.r2, lo, epsilon = 1e-12);
                assert_abs_diff_eq!(t.r2, 0.394338, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn nic_second_readout_ignores_predecessor() {
        let agent = AgentSpec::nic(LatentModel::default(), 0.05);
        let plan = SimulationPlan::new(10, 77);
        for k in 0..200 {
            for second in 0..3 {
                let preds: Vec<usize> = (0..3).filter(|&i| i != second).collect();
                let a = simulate_trial(&agent, &plan, k, preds[0], second);
                let b = simulate_trial(&agent, &plan, k, preds[1], second);
                assert_eq!(a.1, b.1);
                assert_eq!(a.2, b.2);
            }
        }
    }

    #[test]
    fn rotation_second_readout_depends_on_predecessor() {
        let agent = AgentSpec::rotation(RotationModelConfig::default(), 0.0);
        let plan = rotation_plan(1, 0);
        let a = simulate_trial(&agent, &plan, 0, 0, 1);
        let b = simulate_trial(&agent, &plan, 0, 2, 1);
        assert_abs_diff_eq!((a.1 - b.1).abs(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn invasive_shift_moves_the_condition_mean() {
        let latent = LatentModel::Discrete {
            atoms: vec![
                LatentAtom { weight: 0.5, values: [0.3, 0.4, 0.5] },
                LatentAtom { weight: 0.5, values: [0.6, 0.5, 0.4] },
            ],
        };
        let agent = AgentSpec::invasive(latent, 0.2, "EC", 0.0);
        let plan = SimulationPlan::new(1, 3);
        // Same trial, same latent draw: only the predecessor differs.
        for k in 0..100 {
            let after_c = simulate_trial(&agent, &plan, k, 0, 1);
            let after_k = simulate_trial(&agent, &plan, k, 2, 1);
            assert_abs_diff_eq!(after_c.1 - after_k.1, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn schedules() {
        let agent = AgentSpec::nic(LatentModel::default(), 0.0);
        let mut plan = SimulationPlan::new(3, 5);
        plan.counterbalancing = Counterbalancing::Blocked;
        let trials = simulate(&agent, &plan).unwrap();
        let firsts: Vec<_> = trials.iter().map(|t| (t.first_eval.as_str(), t.second_eval.as_str())).collect();
        assert_eq!(&firsts[..4], &[("EC", "EL"), ("EC", "EL"), ("EC", "EL"), ("EC", "EK")]);
        assert!(trials.iter().enumerate().all(|(k, t)| t.trial_index == k as u64));

        plan.conditions = Some(vec![("EK".into(), "EC".into())]);
        let trials = simulate(&agent, &plan).unwrap();
        assert_eq!(trials.len(), 3);
        assert!(trials.iter().all(|t| t.first_eval == "EK"));

        plan.conditions = Some(vec![("EK".into(), "EK".into())]);
        assert!(simulate(&agent, &plan).is_err());
        plan.conditions = Some(vec![("EX".into(), "EK".into())]);
        assert!(simulate(&agent, &plan).is_err());
    }

    #[test]
    fn readouts_stay_in_range_under_heavy_noise() {
        let mut agent = AgentSpec::rotation(RotationModelConfig::default(), 0.5);
        agent.drift_sigma = 0.3;
        let trials = simulate(&agent, &SimulationPlan::new(200, 11)).unwrap();
        for t in &trials {
            t.validate().unwrap();
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let plan = SimulationPlan::new(1, 0);
        assert!(simulate(&AgentSpec::nic(LatentModel::default(), -0.1), &plan).is_err());
        let bad_joint = LatentModel::Discrete {
            atoms: vec![LatentAtom { weight: 0.4, values: [0.5; 3] }],
        };
        assert!(simulate(&AgentSpec::nic(bad_joint, 0.0), &plan).is_err());
        assert!(simulate(&AgentSpec::invasive(LatentModel::default(), 0.1, "E9", 0.0), &plan).is_err());
    }

    #[test]
    fn spec_file_shape() {
        let text = r#"{"kind": "invasive_classical", "delta": 0.2, "after": "EC", "noise_sigma": 0.05,
                       "latent": {"type": "correlated", "means": [0.6, 0.4, 0.5], "sd": 0.1, "correlation": 0.3}}"#;
        let spec: AgentSpec = serde_json::from_str(text).unwrap();
        assert!(matches!(spec.kind, AgentKind::InvasiveClassical { delta, .. } if delta == 0.2));
        let rotation: AgentSpec = serde_json::from_str(r#"{"kind": "rotation", "noise_sigma": 0.05}"#).unwrap();
        assert_eq!(rotation.kind, AgentKind::Rotation { config: RotationModelConfig::default() });
    }

    #[test]
    fn power_curve_needs_replications() {
        let agent = AgentSpec::nic(LatentModel::default(), 0.05);
        let cfg = AnalysisConfig::default();
        assert!(power_curve(&agent, &SimulationPlan::new(10, 0), &[10], 99, &cfg).is_err());
    }
}

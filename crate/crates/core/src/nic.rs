//! Tests of the non-invasive-classical (NIC) constraints on sequential data.
//!
//! Two families of constraints are checked:
//!
//! * sequential-mean equalities `C_ij = C_kj`: the mean second-position
//!   readout of `E_j` must not depend on which evaluation preceded it. Each
//!   pair is tested with a two-sided permutation test on predecessor labels,
//!   optionally shuffling only within covariate strata, and the battery is
//!   Holm-corrected;
//! * triangle inequalities on disagreement probabilities of binarized
//!   readouts, with a bootstrap estimate of how often the slack is negative.
//!
//! A rejection of either family means the data admit no model with both
//! predetermined readout values and non-invasive evaluations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::triangle::{Disagreements, TriangleSlacks, INEQUALITY_IDS};
use crate::trial::TrialRecord;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_MIN_N: usize = 50;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_BOOTSTRAP: usize = 2_000;
pub const MIN_PERMUTATIONS: usize = 1_000;
pub const MIN_BOOTSTRAP: usize = 1_000;

const PERMUTATION_BLOCK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    Accuracy,
    Difficulty,
    ResponseTime,
}

impl FromStr for StratumKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "accuracy" => Ok(StratumKey::Accuracy),
            "difficulty" => Ok(StratumKey::Difficulty),
            "response_time" | "response_time_ms" | "rt" => Ok(StratumKey::ResponseTime),
            other => Err(Error::Config(format!(
                "unknown stratum key `{other}` (expected accuracy, difficulty or response_time)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub threshold: f64,
    pub alpha: f64,
    pub min_n: usize,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    pub strata: Vec<StratumKey>,
    /// Equal-width difficulty bins over `[0, 1]`.
    pub difficulty_bins: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            threshold: 0.5,
            alpha: DEFAULT_ALPHA,
            min_n: DEFAULT_MIN_N,
            n_permutations: DEFAULT_PERMUTATIONS,
            n_bootstrap: DEFAULT_BOOTSTRAP,
            strata: Vec::new(),
            difficulty_bins: 4,
            seed: 0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.n_permutations < MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "at least {MIN_PERMUTATIONS} permutations are required"
            )));
        }
        if self.n_bootstrap < MIN_BOOTSTRAP {
            return Err(Error::Config(format!(
                "at least {MIN_BOOTSTRAP} bootstrap resamples are required"
            )));
        }
        if self.difficulty_bins == 0 {
            return Err(Error::Config("difficulty_bins must be positive".into()));
        }
        Ok(())
    }
}

/// Mean second-position readout of one ordered condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementEstimate {
    pub d: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialStats {
    /// Evaluation ids in sorted order; indices below refer to this list.
    pub labels: Vec<String>,
    pub threshold: f64,
    /// `c_hat[first][second]`; `None` for the diagonal and for empty conditions.
    pub c_hat: Vec<Vec<Option<CellEstimate>>>,
    /// Symmetric; `None` on the diagonal and when neither order was observed.
    pub d_hat: Vec<Vec<Option<DisagreementEstimate>>>,
}

impl SequentialStats {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn cell(&self, first: &str, second: &str) -> Option<CellEstimate> {
        self.c_hat[self.index_of(first)?][self.index_of(second)?]
    }

    pub fn max_condition_count(&self) -> usize {
        self.c_hat
            .iter()
            .flatten()
            .flatten()
            .map(|c| c.count)
            .max()
            .unwrap_or(0)
    }
}

fn labels_of(trials: &[TrialRecord]) -> Vec<String> {
    trials
        .iter()
        .flat_map(|t| [t.first_eval.clone(), t.second_eval.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Per-condition means of `r2` and pooled disagreement estimates.
///
/// `d_ij` pools the `i -> j` and `j -> i` conditions: in each trial the first
/// readout is binarized as the predecessor's value and the second readout as
/// the successor's value. Under a NIC model both orders sample the same pair
/// marginal, so pooling estimates the same `P(A_i != A_j)`.
pub fn estimate_stats(trials: &[TrialRecord], threshold: f64) -> Result<SequentialStats> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config("threshold must lie in (0, 1)".into()));
    }
    let labels = labels_of(trials);
    let n = labels.len();
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();

    let mut sums = vec![vec![(0usize, 0.0f64, 0.0f64); n]; n];
    let mut disagree = vec![vec![(0usize, 0usize); n]; n];
    for t in trials {
        let (i, j) = (index[t.first_eval.as_str()], index[t.second_eval.as_str()]);
        let cell = &mut sums[i][j];
        cell.0 += 1;
        cell.1 += t.r2;
        let (a, b) = (i.min(j), i.max(j));
        let d = &mut disagree[a][b];
        d.0 += 1;
        if (t.r1 >= threshold) != (t.r2 >= threshold) {
            d.1 += 1;
        }
    }
    // Second pass for the variance around each cell mean.
    for t in trials {
        let (i, j) = (index[t.first_eval.as_str()], index[t.second_eval.as_str()]);
        let cell = &mut sums[i][j];
        let mean = cell.1 / cell.0 as f64;
        cell.2 += (t.r2 - mean).powi(2);
    }

    let c_hat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (count, sum, ss) = sums[i][j];
                    (i != j && count > 0).then(|| {
                        let mean = sum / count as f64;
                        let se = if count > 1 {
                            (ss / (count - 1) as f64).sqrt() / (count as f64).sqrt()
                        } else {
                            0.0
                        };
                        CellEstimate { mean, se, count }
                    })
                })
                .collect()
        })
        .collect();
    let d_hat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (count, k) = disagree[i.min(j)][i.max(j)];
                    (i != j && count > 0).then(|| DisagreementEstimate {
                        d: k as f64 / count as f64,
                        count,
                    })
                })
                .collect()
        })
        .collect();
    Ok(SequentialStats {
        labels,
        threshold,
        c_hat,
        d_hat,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityTest {
    pub second: String,
    pub first_a: String,
    pub first_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// `|mean_a - mean_b|`
    pub diff: f64,
    pub p_value: f64,
    /// Holm-adjusted across the battery.
    pub p_adjusted: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EqualityBattery {
    pub tests: Vec<EqualityTest>,
    pub warnings: Vec<String>,
}

/// One value of the permuted pool: readout and stratum.
#[derive(Clone, Copy)]
struct Pooled {
    value: f64,
    stratum: u64,
    from_a: bool,
}

/// Permutation test of `C_ij = C_kj` for every second evaluation `j` and
/// every unordered pair of predecessors `{i, k}` with data.
pub fn test_equalities(
    stats: &SequentialStats,
    trials: &[TrialRecord],
    n_permutations: usize,
    strata: &[StratumKey],
    difficulty_bins: usize,
    seed: u64,
) -> Result<EqualityBattery> {
    if n_permutations < MIN_PERMUTATIONS {
        return Err(Error::Config(format!(
            "at least {MIN_PERMUTATIONS} permutations are required"
        )));
    }
    let n = stats.labels.len();
    let mut by_condition: Vec<Vec<Vec<&TrialRecord>>> = vec![vec![Vec::new(); n]; n];
    for t in trials {
        let (Some(i), Some(j)) = (stats.index_of(&t.first_eval), stats.index_of(&t.second_eval))
        else {
            return Err(Error::validation(
                "trials",
                format!("condition {} -> {} is not covered by the statistics", t.first_eval, t.second_eval),
            ));
        };
        by_condition[i][j].push(t);
    }

    let mut battery = EqualityBattery::default();
    let mut test_index = 0u64;
    for j in 0..n {
        let preds: Vec<usize> = (0..n)
            .filter(|&i| i != j && !by_condition[i][j].is_empty())
            .collect();
        if preds.len() < 2 {
            battery.warnings.push(format!(
                "skipped {}: fewer than two predecessors with data",
                stats.labels[j]
            ));
            continue;
        }
        for (x, &a) in preds.iter().enumerate() {
            for &b in &preds[x + 1..] {
                let group_a = &by_condition[a][j];
                let group_b = &by_condition[b][j];
                let pooled = pool(group_a, group_b, strata, difficulty_bins);
                let p_value =
                    permutation_p_value(&pooled, n_permutations, seed::derive(seed, &[test_index]));
                let mean = |g: &[&TrialRecord]| g.iter().map(|t| t.r2).sum::<f64>() / g.len() as f64;
                let (mean_a, mean_b) = (mean(group_a), mean(group_b));
                battery.tests.push(EqualityTest {
                    second: stats.labels[j].clone(),
                    first_a: stats.labels[a].clone(),
                    first_b: stats.labels[b].clone(),
                    mean_a,
                    mean_b,
                    n_a: group_a.len(),
                    n_b: group_b.len(),
                    diff: (mean_a - mean_b).abs(),
                    p_value,
                    p_adjusted: p_value,
                });
                test_index += 1;
            }
        }
    }
    let adjusted = holm_adjust(&battery.tests.iter().map(|t| t.p_value).collect::<Vec<_>>());
    for (t, p) in battery.tests.iter_mut().zip(adjusted) {
        t.p_adjusted = p;
    }
    Ok(battery)
}

fn pool(
    group_a: &[&TrialRecord],
    group_b: &[&TrialRecord],
    strata: &[StratumKey],
    difficulty_bins: usize,
) -> Vec<Pooled> {
    let rt_median = if strata.contains(&StratumKey::ResponseTime) {
        let mut rts: Vec<f64> = group_a
            .iter()
            .chain(group_b)
            .filter_map(|t| t.covariates.as_ref()?.response_time_ms)
            .collect();
        rts.sort_by(f64::total_cmp);
        (!rts.is_empty()).then(|| rts[rts.len() / 2])
    } else {
        None
    };
    let stratum_of = |t: &TrialRecord| -> u64 {
        let cov = t.covariates.clone().unwrap_or_default();
        strata.iter().fold(0u64, |acc, key| {
            let code = match key {
                StratumKey::Accuracy => cov.accuracy.map_or(2, u64::from),
                StratumKey::Difficulty => cov.difficulty.map_or(difficulty_bins as u64, |d| {
                    ((d * difficulty_bins as f64).floor().max(0.0) as u64)
                        .min(difficulty_bins as u64 - 1)
                }),
                StratumKey::ResponseTime => match (cov.response_time_ms, rt_median) {
                    (Some(rt), Some(m)) => u64::from(rt >= m),
                    _ => 2,
                },
            };
            acc * 1024 + code
        })
    };
    group_a
        .iter()
        .map(|t| (t, true))
        .chain(group_b.iter().map(|t| (t, false)))
        .map(|(t, from_a)| Pooled {
            value: t.r2,
            stratum: stratum_of(t),
            from_a,
        })
        .collect()
}

/// Stratum-wise pool for the permutation loop.
struct StratumPool {
    values: Vec<f64>,
    /// How many of `values` to draw per permutation.
    draw: usize,
    /// Whether the drawn values stand for group A (otherwise group B).
    draw_is_a: bool,
    total: f64,
}

/// Two-sided permutation p-value for `|mean_a - mean_b|` with labels shuffled
/// within strata: `(1 + #{perm >= observed}) / (1 + n_permutations)`.
fn permutation_p_value(pooled: &[Pooled], n_permutations: usize, seed: u64) -> f64 {
    let mut strata: BTreeMap<u64, (Vec<f64>, usize)> = BTreeMap::new();
    for p in pooled {
        let entry = strata.entry(p.stratum).or_default();
        entry.0.push(p.value);
        entry.1 += usize::from(p.from_a);
    }
    let n_a = pooled.iter().filter(|p| p.from_a).count();
    let n_b = pooled.len() - n_a;
    let pools: Vec<StratumPool> = strata
        .into_values()
        .map(|(values, count_a)| {
            let total = values.iter().sum();
            let count_b = values.len() - count_a;
            StratumPool {
                draw: count_a.min(count_b),
                draw_is_a: count_a <= count_b,
                values,
                total,
            }
        })
        .collect();
    let grand_total: f64 = pools.iter().map(|s| s.total).sum();
    let statistic = |sum_a: f64| (sum_a / n_a as f64 - (grand_total - sum_a) / n_b as f64).abs();

    let observed_sum_a: f64 = pooled.iter().filter(|p| p.from_a).map(|p| p.value).sum();
    let observed = statistic(observed_sum_a);
    let cutoff = observed - 1e-12 * observed.abs().max(1.0);

    let blocks = n_permutations.div_ceil(PERMUTATION_BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = seed::substream(seed, &[block as u64]);
            let mut scratch: Vec<Vec<f64>> = pools.iter().map(|s| s.values.clone()).collect();
            let start = block * PERMUTATION_BLOCK;
            let len = PERMUTATION_BLOCK.min(n_permutations - start);
            let mut hits = 0;
            for _ in 0..len {
                let mut sum_a = 0.0;
                for (pool, buf) in pools.iter().zip(scratch.iter_mut()) {
                    // Partial Fisher-Yates: the first `draw` slots become a
                    // uniform random subset regardless of the buffer's order.
                    let m = buf.len();
                    let mut drawn = 0.0;
                    for k in 0..pool.draw {
                        let r = rng.random_range(k..m);
                        buf.swap(k, r);
                        drawn += buf[k];
                    }
                    sum_a += if pool.draw_is_a { drawn } else { pool.total - drawn };
                }
                if statistic(sum_a) >= cutoff {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    (1 + hits) as f64 / (1 + n_permutations) as f64
}

/// Holm step-down adjustment, returned in the input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * p[idx]).min(1.0);
        running = running.max(adj);
        out[idx] = running;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleTest {
    pub inequality: String,
    pub slack: f64,
    /// Fraction of bootstrap resamples with negative slack.
    pub bootstrap_violation_fraction: f64,
    pub bootstrap_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleBattery {
    /// The three evaluations in the roles 1, 2, 3.
    pub labels: [String; 3],
    pub disagreements: Disagreements,
    pub tests: Vec<TriangleTest>,
}

/// Estimates `d12, d13, d23` from binarized readouts pooled over both orders
/// of each pair and bootstraps the three triangle slacks.
///
/// The trials must involve exactly three evaluations.
pub fn test_triangles(
    trials: &[TrialRecord],
    threshold: f64,
    n_bootstrap: usize,
    seed: u64,
) -> Result<TriangleBattery> {
    if n_bootstrap < MIN_BOOTSTRAP {
        return Err(Error::Config(format!(
            "at least {MIN_BOOTSTRAP} bootstrap resamples are required"
        )));
    }
    let stats = estimate_stats(trials, threshold)?;
    if stats.labels.len() != 3 {
        return Err(Error::validation(
            "trials",
            format!(
                "triangle tests need exactly three evaluations, found {}",
                stats.labels.len()
            ),
        ));
    }
    let labels: [String; 3] = std::array::from_fn(|k| stats.labels[k].clone());
    let index = |l: &str| labels.iter().position(|x| x == l).expect("label present");

    // (n, disagreements) per ordered condition.
    let mut counts = [[(0u64, 0u64); 3]; 3];
    for t in trials {
        let c = &mut counts[index(&t.first_eval)][index(&t.second_eval)];
        c.0 += 1;
        c.1 += u64::from((t.r1 >= threshold) != (t.r2 >= threshold));
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        if counts[a][b].0 + counts[b][a].0 == 0 {
            return Err(Error::MissingCondition {
                first: labels[a].clone(),
                second: labels[b].clone(),
            });
        }
    }

    let pooled = |k: &[[u64; 3]; 3], a: usize, b: usize| {
        (k[a][b] + k[b][a]) as f64 / (counts[a][b].0 + counts[b][a].0) as f64
    };
    let point_k: [[u64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| counts[i][j].1));
    let disagreements = Disagreements::new(
        pooled(&point_k, 0, 1),
        pooled(&point_k, 0, 2),
        pooled(&point_k, 1, 2),
    );
    let slacks = disagreements.slacks();

    // Resampling n indicators with replacement from a condition with k
    // disagreements yields Binomial(n, k/n) disagreements.
    let mut rng = seed::substream(seed, &[0x7472_6961]);
    let mut negative = [0usize; 3];
    let mut sums = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for _ in 0..n_bootstrap {
        let mut k = [[0u64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (n, d) = counts[i][j];
                if n > 0 {
                    let dist = Binomial::new(n, d as f64 / n as f64).expect("valid binomial");
                    k[i][j] = dist.sample(&mut rng);
                }
            }
        }
        let s = Disagreements::new(pooled(&k, 0, 1), pooled(&k, 0, 2), pooled(&k, 1, 2))
            .slacks()
            .as_array();
        for q in 0..3 {
            negative[q] += usize::from(s[q] < 0.0);
            sums[q] += s[q];
            sq[q] += s[q] * s[q];
        }
    }
    let b = n_bootstrap as f64;
    let tests = (0..3)
        .map(|q| {
            let mean = sums[q] / b;
            TriangleTest {
                inequality: INEQUALITY_IDS[q].to_string(),
                slack: slacks.as_array()[q],
                bootstrap_violation_fraction: negative[q] as f64 / b,
                bootstrap_se: ((sq[q] / b - mean * mean).max(0.0) * b / (b - 1.0)).sqrt(),
            }
        })
        .collect();
    Ok(TriangleBattery {
        labels,
        disagreements,
        tests,
    })
}

/// Evaluates the triangle inequalities on supplied disagreement estimates.
pub fn triangle_slacks(d: Disagreements) -> TriangleSlacks {
    d.slacks()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithNic,
    GenuineNoncommutativity,
    InsufficientData,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConsistentWithNic => "consistent_with_nic",
            Verdict::GenuineNoncommutativity => "genuine_noncommutativity",
            Verdict::InsufficientData => "insufficient_data",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NicTestReport {
    pub session_id: Option<String>,
    pub n_trials: usize,
    pub alpha: f64,
    pub stats: SequentialStats,
    pub equality_tests: Vec<EqualityTest>,
    pub triangle_tests: Vec<TriangleTest>,
    pub disagreements: Option<Disagreements>,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
    pub interpretation: String,
}

impl NicTestReport {
    pub fn equality_rejections(&self) -> usize {
        self.equality_tests
            .iter()
            .filter(|t| t.p_adjusted < self.alpha)
            .count()
    }
}

const INTERPRET_GENUINE: &str = "No model with predetermined readout values and non-invasive \
evaluations reproduces these statistics. The tests cannot tell which of the two assumptions \
fails; an evaluation disturbing later readouts is the usual reading, predetermined values \
failing to exist is the alternative.";
const INTERPRET_CONSISTENT: &str = "The sequential statistics are compatible with a model with \
predetermined readout values and non-invasive evaluations at the configured level.";
const INTERPRET_INSUFFICIENT: &str = "Too few trials per condition to test the constraints.";

/// Combines the batteries into the three-way verdict.
///
/// Insufficient when nothing was tested or no condition reaches `min_n`
/// trials; genuine non-commutativity when a Holm-adjusted equality p-value is
/// below `alpha` or a triangle slack is negative in at least `1 - alpha` of
/// the bootstrap resamples; consistent otherwise.
pub fn verdict(
    stats: SequentialStats,
    equalities: Option<EqualityBattery>,
    triangles: Option<TriangleBattery>,
    alpha: f64,
    min_n: usize,
) -> NicTestReport {
    let equalities = equalities.unwrap_or_default();
    let ran_any = !equalities.tests.is_empty() || triangles.is_some();
    let enough = stats.max_condition_count() >= min_n;
    let equality_reject = equalities.tests.iter().any(|t| t.p_adjusted < alpha);
    let triangle_reject = triangles.as_ref().is_some_and(|tb| {
        tb.tests
            .iter()
            .any(|t| t.slack < 0.0 && t.bootstrap_violation_fraction >= 1.0 - alpha)
    });
    let verdict = if !ran_any || !enough {
        Verdict::InsufficientData
    } else if equality_reject || triangle_reject {
        Verdict::GenuineNoncommutativity
    } else {
        Verdict::ConsistentWithNic
    };
    let interpretation = match verdict {
        Verdict::GenuineNoncommutativity => INTERPRET_GENUINE,
        Verdict::ConsistentWithNic => INTERPRET_CONSISTENT,
        Verdict::InsufficientData => INTERPRET_INSUFFICIENT,
    };
    NicTestReport {
        session_id: None,
        n_trials: stats
            .c_hat
            .iter()
            .flatten()
            .flatten()
            .map(|c| c.count)
            .sum(),
        alpha,
        stats,
        equality_tests: equalities.tests,
        triangle_tests: triangles.as_ref().map(|t| t.tests.clone()).unwrap_or_default(),
        disagreements: triangles.map(|t| t.disagreements),
        warnings: equalities.warnings,
        verdict,
        interpretation: interpretation.to_string(),
    }
}

/// Full analysis of one pool of trials.
pub fn analyze(trials: &[TrialRecord], cfg: &AnalysisConfig) -> Result<NicTestReport> {
    cfg.validate()?;
    let stats = estimate_stats(trials, cfg.threshold)?;
    let equalities = test_equalities(
        &stats,
        trials,
        cfg.n_permutations,
        &cfg.strata,
        cfg.difficulty_bins,
        seed::derive(cfg.seed, &[1]),
    )?;
    let mut warnings = Vec::new();
    let triangles = match test_triangles(
        trials,
        cfg.threshold,
        cfg.n_bootstrap,
        seed::derive(cfg.seed, &[2]),
    ) {
        Ok(t) => Some(t),
        Err(e @ (Error::MissingCondition { .. } | Error::Validation { .. })) => {
            warnings.push(format!("triangle tests skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut report = verdict(stats, Some(equalities), triangles, cfg.alpha, cfg.min_n);
    report.warnings.extend(warnings);
    let sessions: BTreeSet<&str> = trials.iter().map(|t| t.session_id.as_str()).collect();
    if sessions.len() == 1 {
        report.session_id = sessions.into_iter().next().map(String::from);
    }
    Ok(report)
}

/// One report per session id, in sorted session order.
pub fn analyze_by_session(trials: &[TrialRecord], cfg: &AnalysisConfig) -> Result<Vec<NicTestReport>> {
    let mut sessions: BTreeMap<&str, Vec<TrialRecord>> = BTreeMap::new();
    for t in trials {
        sessions.entry(&t.session_id).or_default().push(t.clone());
    }
    sessions
        .into_iter()
        .map(|(id, ts)| {
            let mut report = analyze(&ts, cfg)?;
            report.session_id = Some(id.to_string());
            Ok(report)
        })
        .collect()
}

impl fmt::Display for NicTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "session: {}   trials: {}   alpha: {}",
            self.session_id.as_deref().unwrap_or("(all)"),
            self.n_trials,
            self.alpha
        )?;
        let labels = &self.stats.labels;
        writeln!(f, "second-position means (row = first, column = second):")?;
        write!(f, "{:>8}", "")?;
        for l in labels {
            write!(f, " {:>20}", l)?;
        }
        writeln!(f)?;
        for (i, row) in self.stats.c_hat.iter().enumerate() {
            write!(f, "{:>8}", labels[i])?;
            for cell in row {
                match cell {
                    Some(c) => write!(f, " {:>20}", format!("{:.4}±{:.4} ({})", c.mean, c.se, c.count))?,
                    None => write!(f, " {:>20}", "-")?,
                }
            }
            writeln!(f)?;
        }
        if !self.equality_tests.is_empty() {
            writeln!(f, "equalities:")?;
            writeln!(
                f,
                "  {:<20} {:>10} {:>10} {:>10} {:>10}",
                "test", "diff", "p", "p_holm", "reject"
            )?;
            for t in &self.equality_tests {
                writeln!(
                    f,
                    "  {:<20} {:>10.4} {:>10.4} {:>10.4} {:>10}",
                    format!("C[{}>{}]=C[{}>{}]", t.first_a, t.second, t.first_b, t.second),
                    t.diff,
                    t.p_value,
                    t.p_adjusted,
                    if t.p_adjusted < self.alpha { "yes" } else { "no" }
                )?;
            }
        }
        if let Some(d) = &self.disagreements {
            writeln!(
                f,
                "disagreements: d12 = {:.4}, d13 = {:.4}, d23 = {:.4}",
                d.d12, d.d13, d.d23
            )?;
            for t in &self.triangle_tests {
                writeln!(
                    f,
                    "  {:<14} slack {:>8.4}  bootstrap P(slack<0) {:.4}",
                    t.inequality, t.slack, t.bootstrap_violation_fraction
                )?;
            }
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "{}", self.interpretation)
    }
}

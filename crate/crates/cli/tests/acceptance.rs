//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use clap::Parser;
use metanic_cli::{run, Cli};
use metanic_core::feasibility::{
    brute_force_oracle, check_feasibility, q, triangle_necessary_check, witness_reproduces, MarginalSystem,
    PairTable, Q,
};
use metanic_core::nic::{analyze, AnalysisConfig, NicTestReport};
use metanic_core::rotation::{binary_check, RotationModelConfig};
use metanic_core::seed;
use metanic_core::simulate::{simulate, AgentSpec, LatentModel, SimulationPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let parsed = Cli::try_parse_from(std::iter::once("metanic").chain(args.iter().copied()))
        .expect("arguments parse");
    let mut out = Vec::new();
    let code = run(parsed, &mut out).expect("command runs");
    (code, out)
}

/// Closed forms of the default table, written out independently of the
/// library: `½(1 + c(1 ∓ √3)/2)` with `c = 1/√3`.
fn closed_forms() -> (f64, f64) {
    let c = 1.0 / 3f64.sqrt();
    let r3 = 3f64.sqrt();
    (0.5 * (1.0 + c * (1.0 - r3) / 2.0), 0.5 * (1.0 + c * (1.0 + r3) / 2.0))
}

fn rotation_table_reproduction() -> Outcome {
    let start = Instant::now();
    let (code, out) = cli(&["rotation-table", "--json"]);
    let elapsed = start.elapsed();
    let table: Value = serde_json::from_slice(&out).expect("json table");
    let (lo, hi) = closed_forms();
    let mut worst_printed: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut worst_paper: f64 = 0.0;
    let rows = table["rows"].as_array().expect("rows");
    for row in rows {
        let key = format!("{}{}", row["first"].as_str().unwrap(), row["second"].as_str().unwrap());
        let value = row["value"].as_f64().unwrap();
        let (printed, paper, closed) = match key.as_str() {
            "E1E2" | "E2E3" | "E3E1" => (0.394338, 0.3944, lo),
            "E1E3" | "E2E1" | "E3E2" => (0.894338, 0.8944, hi),
            other => panic!("unexpected row {other}"),
        };
        worst_printed = worst_printed.max((value - printed).abs());
        worst_closed = worst_closed.max((value - closed).abs());
        worst_paper = worst_paper.max((value - paper).abs());
    }
    Outcome {
        pass: code == 0
            && rows.len() == 6
            && worst_printed <= 1e-6
            && worst_closed <= 1e-12
            && worst_paper <= 1e-4
            && elapsed < Duration::from_secs(1),
        detail: format!(
            "max error vs 6-digit values {worst_printed:.1e}, vs closed forms {worst_closed:.1e}, \
             vs 4-digit table {worst_paper:.1e}, runtime {elapsed:.2?}"
        ),
    }
}

fn state_reproduction() -> Outcome {
    let (_, out) = cli(&["rotation-table", "--json"]);
    let table: Value = serde_json::from_slice(&out).expect("json table");
    let printed = [
        [0.5774, -0.2113, 0.7887],
        [0.7887, 0.5774, -0.2113],
        [-0.2113, 0.7887, 0.5774],
    ];
    let mut worst: f64 = 0.0;
    for (k, expected) in printed.iter().enumerate() {
        let state = table["first_states"][k].as_array().expect("state vector");
        for (c, e) in state.iter().zip(expected) {
            worst = worst.max((c.as_f64().unwrap() - e).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("max component error {worst:.1e}"),
    }
}

const REPLICATIONS: usize = 200;
const N_PER_CONDITION: usize = 1000;

fn replicate(agent: &AgentSpec, base_seed: u64) -> Vec<NicTestReport> {
    (0..REPLICATIONS as u64)
        .map(|r| {
            let plan = SimulationPlan::new(N_PER_CONDITION, seed::derive(base_seed, &[r]));
            let trials = simulate(agent, &plan).expect("simulation");
            let cfg = AnalysisConfig {
                seed: r,
                ..AnalysisConfig::default()
            };
            analyze(&trials, &cfg).expect("analysis")
        })
        .collect()
}

fn violation_detection(reports: &[NicTestReport], elapsed: Duration) -> Outcome {
    let all_three = reports
        .iter()
        .filter(|r| r.equality_tests.len() == 3 && r.equality_rejections() == 3)
        .count();
    let rate = all_three as f64 / reports.len() as f64;
    Outcome {
        pass: rate >= 0.99 && elapsed < Duration::from_secs(300),
        detail: format!(
            "all three equalities rejected in {all_three}/{} replications ({:.1}%), runtime {elapsed:.1?}",
            reports.len(),
            100.0 * rate
        ),
    }
}

fn calibration(reports: &[NicTestReport]) -> Outcome {
    let alpha = AnalysisConfig::default().alpha;
    let rejections = reports.iter().filter(|r| r.equality_rejections() > 0).count();
    let n = reports.len() as f64;
    let rate = rejections as f64 / n;
    let se = (alpha * (1.0 - alpha) / n).sqrt();
    let bound = alpha + 2.0 * se;
    Outcome {
        pass: rate <= bound,
        detail: format!(
            "family-wise rejections {rejections}/{} (rate {rate:.4}, bound {bound:.4})",
            reports.len()
        ),
    }
}

/// Singles and pair tables on the `1/grid` lattice. `p11` is drawn from its
/// admissible range, so every system is internally consistent.
fn random_system(rng: &mut ChaCha8Rng, grid: i64) -> MarginalSystem {
    let singles: Vec<i64> = (0..3).map(|_| rng.random_range(0..=grid)).collect();
    let mut pairs = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = (singles[i], singles[j]);
        let p11 = rng.random_range((a + b - grid).max(0)..=a.min(b));
        pairs.push(PairTable::new(
            i,
            j,
            [
                [q(grid - a - b + p11, grid), q(b - p11, grid)],
                [q(a - p11, grid), q(p11, grid)],
            ],
        ));
    }
    MarginalSystem::new(3, singles.iter().map(|&s| q(s, grid)).collect(), pairs).expect("consistent")
}

/// Balanced singles with disagreements drawn independently, which violates
/// a triangle inequality often. Disagreements are even multiples of
/// `1/grid` so the pair cells `(1 - d)/2` and `d/2` stay on the lattice.
fn random_disagreement_system(rng: &mut ChaCha8Rng, grid: i64) -> MarginalSystem {
    let d: Vec<Q> = (0..3).map(|_| q(2 * rng.random_range(0..=grid / 2), grid)).collect();
    MarginalSystem::from_disagreements(
        vec![q(1, 2); 3],
        &[((0, 1), d[0].clone()), ((0, 2), d[1].clone()), ((1, 2), d[2].clone())],
    )
    .expect("balanced singles admit any disagreement")
}

fn triangle_necessity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A1A);
    let (mut negative, mut counterexamples, mut bad_certificates) = (0, 0, 0);
    for k in 0..10_000 {
        let m = if k % 2 == 0 {
            random_system(&mut rng, 40)
        } else {
            random_disagreement_system(&mut rng, 40)
        };
        let slacks = triangle_necessary_check(&m).expect("three pairs");
        let result = check_feasibility(&m);
        if let Some(c) = &result.certificate {
            if !c.separates(&m) {
                bad_certificates += 1;
            }
        }
        if slacks.any_negative() {
            negative += 1;
            if result.feasible {
                counterexamples += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: negative > 0 && counterexamples == 0 && bad_certificates == 0 && elapsed < Duration::from_secs(60),
        detail: format!(
            "{negative} of 10000 systems had a negative slack, {counterexamples} declared feasible, \
             {bad_certificates} invalid certificates, runtime {elapsed:.1?}"
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    let grid = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let (mut agree, mut feasible, mut bad_witness) = (0, 0, 0);
    for k in 0..1000 {
        let m = if k % 2 == 0 {
            random_system(&mut rng, grid)
        } else {
            random_disagreement_system(&mut rng, grid)
        };
        let exact = check_feasibility(&m);
        let oracle = brute_force_oracle(&m, grid as u32);
        if exact.feasible == oracle.feasible {
            agree += 1;
        }
        if exact.feasible {
            feasible += 1;
            if !witness_reproduces(&m, exact.witness.as_deref().unwrap_or_default()) {
                bad_witness += 1;
            }
        }
    }
    Outcome {
        pass: agree == 1000 && bad_witness == 0,
        detail: format!("agreement {agree}/1000 ({feasible} feasible), {bad_witness} witnesses off"),
    }
}

fn binary_trivial_satisfaction(rotation_reports: &[NicTestReport]) -> Outcome {
    let check = binary_check(&RotationModelConfig::default());
    let d = check.disagreements;
    let zero = d.d12 == 0.0 && d.d13 == 0.0 && d.d23 == 0.0;
    let no_violation = !check.slacks.any_violated();
    let report = &rotation_reports[0];
    let equalities_reject = report.equality_rejections() == 3;
    let alpha = report.alpha;
    let triangles_quiet = !report.triangle_tests.is_empty()
        && report
            .triangle_tests
            .iter()
            .all(|t| !(t.slack < 0.0 && t.bootstrap_violation_fraction >= 1.0 - alpha));
    Outcome {
        pass: zero && no_violation && equalities_reject && triangles_quiet,
        detail: format!(
            "d = ({}, {}, {}), triangle violated: {}; simulated data: {} equality rejections, triangle rejection: {}",
            d.d12,
            d.d13,
            d.d23,
            check.slacks.any_violated(),
            report.equality_rejections(),
            !triangles_quiet
        ),
    }
}

fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for agent in ["rotation", "nic", "invasive"] {
        for threads in ["1", "2", "4", "1"] {
            let (code, out) = cli(&["simulate", "--agent", agent, "--n", "500", "--seed", "42", "--threads", threads]);
            assert_eq!(code, 0);
            outputs.push((agent, out));
        }
    }
    let identical = outputs
        .chunks(4)
        .all(|group| group.iter().all(|(_, o)| *o == group[0].1 && !o.is_empty()));
    let distinct_agents = outputs[0].1 != outputs[4].1;
    Outcome {
        pass: identical && distinct_agents,
        detail: format!(
            "3 agents x 4 runs (threads 1, 2, 4, 1): byte-identical per agent = {identical}, {} bytes each",
            outputs[0].1.len()
        ),
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {id}. {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    };

    report(1, "rotation table reproduction", rotation_table_reproduction());
    report(2, "state reproduction", state_reproduction());

    let start = Instant::now();
    let rotation_reports = replicate(&AgentSpec::rotation(RotationModelConfig::default(), 0.05), 0x0301);
    report(3, "equality violation detection", violation_detection(&rotation_reports, start.elapsed()));
    let nic_reports = replicate(&AgentSpec::nic(LatentModel::default(), 0.05), 0x0401);
    report(4, "calibration under a classical non-invasive agent", calibration(&nic_reports));

    report(5, "triangle necessity", triangle_necessity());
    report(6, "exact solver vs grid oracle", oracle_equivalence());
    report(7, "binary trivial satisfaction", binary_trivial_satisfaction(&rotation_reports));
    report(8, "simulation determinism", determinism());

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

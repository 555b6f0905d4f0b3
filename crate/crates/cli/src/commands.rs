use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use metanic_core::feasibility::{check_feasibility, triangle_necessary_check, MarginalsFile};
use metanic_core::nic::{analyze_by_session, AnalysisConfig, StratumKey};
use metanic_core::rotation::{rotation_table, RotationModelConfig};
use metanic_core::simulate::{
    power_curve, simulate, AgentSpec, Counterbalancing, LatentModel, SimulationPlan,
};
use metanic_core::trial::{read_trials_file, write_trials};
use metanic_core::{Error, StateVector};
use serde_json::json;

/// Exit code of `feasibility` when the marginals admit no joint.
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "metanic", version, about = "Order-dependence analysis for sequential self-evaluations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact sequential-mean table of the three-rotation model.
    RotationTable(RotationTableArgs),
    /// Test a trial file against the classical non-invasive constraints.
    Analyze(AnalyzeArgs),
    /// Decide whether singles and pair tables come from one joint distribution.
    Feasibility(FeasibilityArgs),
    /// Generate synthetic trials or a power curve.
    Simulate(SimulateArgs),
    /// Run the collection service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RotationTableArgs {
    /// Rotation angle of the first evaluation (radians).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    pub alpha: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    pub beta: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    pub gamma: f64,
    /// Initial state as `x,y,z` (normalized before use).
    #[arg(long, value_parser = parse_vector)]
    pub v0: Option<[f64; 3]>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// Comma-separated covariates to stratify on: accuracy, difficulty, response_time.
    #[arg(long, value_delimiter = ',')]
    pub strata: Vec<StratumKey>,
    #[arg(long, default_value_t = 4)]
    pub difficulty_bins: usize,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_MIN_N)]
    pub min_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FeasibilityArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CounterbalancingArg {
    Randomized,
    Blocked,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Agent spec file (JSON), or one of `nic`, `rotation`, `invasive`.
    #[arg(long)]
    pub agent: String,
    /// Trials per condition (ignored with --power).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "randomized")]
    pub counterbalancing: CounterbalancingArg,
    /// Evaluation ids as `a,b,c`.
    #[arg(long, value_delimiter = ',', default_value = "EC,EL,EK")]
    pub evaluations: Vec<String>,
    #[arg(long)]
    pub session_id: Option<String>,
    /// Write a power curve instead of trials.
    #[arg(long)]
    pub power: bool,
    #[arg(long, value_delimiter = ',', default_value = "100,300,1000")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    #[arg(long, default_value_t = metanic_core::nic::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
}

fn parse_vector(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated numbers".to_string())
}

/// Runs one command, writing its report to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, Error> {
    match cli.command {
        Command::RotationTable(args) => rotation_table_cmd(args, out),
        Command::Analyze(args) => analyze_cmd(args, out),
        Command::Feasibility(args) => feasibility_cmd(args, out),
        Command::Simulate(args) => simulate_cmd(args, out),
        Command::Serve(args) => crate::service::serve_blocking(&args.host, args.port, &args.data_dir).map(|()| 0),
    }
}

fn rotation_table_cmd(args: RotationTableArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let v0 = match args.v0 {
        Some([x, y, z]) => StateVector::normalized(x, y, z)?,
        None => StateVector::diagonal(),
    };
    let cfg = RotationModelConfig {
        alpha: args.alpha,
        beta: args.beta,
        gamma: args.gamma,
        v0,
    };
    let table = rotation_table(&cfg);
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &table)?;
        writeln!(out)?;
    } else {
        write!(out, "{table}")?;
    }
    Ok(0)
}

fn analyze_cmd(args: AnalyzeArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = AnalysisConfig {
        threshold: args.threshold,
        alpha: args.alpha,
        min_n: args.min_n,
        n_permutations: args.permutations,
        n_bootstrap: args.bootstrap,
        strata: args.strata,
        difficulty_bins: args.difficulty_bins,
        seed: args.seed,
    };
    let trials = read_trials_file(&args.file)?;
    let reports = analyze_by_session(&trials, &cfg)?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &reports)?;
        writeln!(out)?;
    } else {
        for r in &reports {
            writeln!(out, "{r}")?;
        }
    }
    Ok(0)
}

fn feasibility_cmd(args: FeasibilityArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let file: MarginalsFile = serde_json::from_str(&std::fs::read_to_string(&args.file)?)?;
    let system = file.into_system()?;
    let result = check_feasibility(&system);
    let slacks = triangle_necessary_check(&system).ok();
    let n = system.n();
    let atom_label = |atom: usize| -> String {
        (0..n).map(|k| if (atom >> k) & 1 == 1 { '1' } else { '0' }).collect()
    };
    if args.json {
        let value = json!({
            "feasible": result.feasible,
            "witness": result.witness.as_ref().map(|w| {
                w.iter().enumerate().map(|(a, p)| json!({"atom": atom_label(a), "p": p.to_string()})).collect::<Vec<_>>()
            }),
            "certificate": result.certificate.as_ref().map(|c| json!({
                "inequality": c.to_string(),
                "value_at_input": c.evaluate(&system).to_string(),
            })),
            "triangle_slacks": slacks.as_ref().map(|s| json!({
                "d12": s.d12.to_string(), "d13": s.d13.to_string(), "d23": s.d23.to_string(),
                "eq1": s.eq1.to_string(), "eq2": s.eq2.to_string(), "eq3": s.eq3.to_string(),
            })),
            "roundings": system.roundings,
        });
        serde_json::to_writer_pretty(&mut *out, &value)?;
        writeln!(out)?;
    } else {
        for r in &system.roundings {
            writeln!(out, "note: {} = {} read as {} (error {:.3e})", r.location, r.input, r.rational, r.error)?;
        }
        if let Some(s) = &slacks {
            writeln!(out, "disagreements: d12 = {}, d13 = {}, d23 = {}", s.d12, s.d13, s.d23)?;
            writeln!(out, "triangle slacks: {}, {}, {}", s.eq1, s.eq2, s.eq3)?;
        }
        if result.feasible {
            writeln!(out, "feasible: a joint distribution reproduces every marginal")?;
            if let Some(w) = &result.witness {
                for (a, p) in w.iter().enumerate() {
                    writeln!(out, "  P({}) = {}", atom_label(a), p)?;
                }
            }
        } else {
            writeln!(out, "infeasible: no joint distribution has these marginals")?;
            if let Some(c) = &result.certificate {
                writeln!(out, "certificate (holds for every joint, fails here):")?;
                writeln!(out, "  {c}")?;
                writeln!(out, "  value at the input: {}", c.evaluate(&system))?;
            }
        }
    }
    Ok(if result.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn load_agent(spec: &str) -> Result<AgentSpec, Error> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
    }
    match spec {
        "nic" => Ok(AgentSpec::nic(LatentModel::default(), 0.05)),
        "rotation" => Ok(AgentSpec::rotation(RotationModelConfig::default(), 0.05)),
        "invasive" => Ok(AgentSpec::invasive(LatentModel::default(), 0.2, "EC", 0.05)),
        other => Err(Error::Config(format!(
            "`{other}` is neither a file nor one of nic, rotation, invasive"
        ))),
    }
}

fn simulate_cmd(args: SimulateArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let agent = load_agent(&args.agent)?;
    let evaluations: [String; 3] = args
        .evaluations
        .clone()
        .try_into()
        .map_err(|_| Error::Config("--evaluations needs exactly three ids".into()))?;
    let plan = SimulationPlan {
        n_trials_per_condition: args.n,
        conditions: None,
        seed: args.seed,
        counterbalancing: match args.counterbalancing {
            CounterbalancingArg::Randomized => Counterbalancing::Randomized,
            CounterbalancingArg::Blocked => Counterbalancing::Blocked,
        },
        evaluations,
        session_id: args.session_id.clone(),
    };
    let work = || -> Result<Vec<u8>, Error> {
        let mut buf = Vec::new();
        if args.power {
            let cfg = AnalysisConfig {
                alpha: args.alpha,
                n_permutations: args.permutations,
                seed: args.seed,
                ..AnalysisConfig::default()
            };
            let rows = power_curve(&agent, &plan, &args.n_grid, args.replications, &cfg)?;
            writeln!(buf, "n_per_condition,replications,rejections,rate,binomial_se")?;
            for r in rows {
                writeln!(
                    buf,
                    "{},{},{},{:.4},{:.4}",
                    r.n_per_condition, r.replications, r.rejections, r.rate, r.binomial_se
                )?;
            }
        } else {
            write_trials(&mut buf, &simulate(&agent, &plan)?)?;
        }
        Ok(buf)
    };
    let bytes = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    match &args.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(0)
}

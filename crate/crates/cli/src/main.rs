//! Command-line front end for the NOMA BER library: analytic and Monte
//! Carlo sweeps, power-allocation optimization, and the validation suite.
//!
//! Every result file is paired with a JSON manifest carrying the fully
//! resolved configuration; `sweep --from-manifest` reruns it and regenerates
//! byte-identical CSV (the timestamp lives only in the manifest).

use clap::{Parser, Subcommand, ValueEnum};
use noma_ber::avg_ber::{avg_ber, avg_numeric_oracle, rayleigh_closed_for_spec, AvgBerSpec, OracleControls};
use noma_ber::detectors::SicMode;
use noma_ber::exact_cond_ber::enumerate_exact;
use noma_ber::model::PowerAllocation;
use noma_ber::montecarlo::{run as mc_run, SimConfig};
use noma_ber::optimizer::{solve_fairness, solve_min_average, Backend, Objective, OptProblem};
use noma_ber::validate;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SWEEP_SCHEMA: &str = "# noma-ber sweep schema v1";
const OPTIMIZE_SCHEMA: &str = "# noma-ber optimize schema v1";

#[derive(Parser)]
#[command(name = "noma-ber", version, about = "Downlink NOMA bit-error-rate toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum Method {
    /// Fading-averaged BER through the Nakagami series.
    Series,
    /// Closed-form Rayleigh (m = 1) average.
    Rayleigh,
    /// Symbol-level Monte Carlo simulation.
    Mc,
    /// Exact conditional enumeration (fixed gains) or stratified average.
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum SicModeArg {
    Perfect,
    Imperfect,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum ObjectiveArg {
    Fairness,
    MinAverage,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum BackendArg {
    Series,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// BER over an Eb/N0 x m x user grid, analytic and/or simulated.
    Sweep(SweepArgs),
    /// Optimal power allocation per operating point.
    Optimize(OptimizeArgs),
    /// Run the named consistency checks and print a pass/fail report.
    Validate(ValidateArgs),
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug)]
struct SweepArgs {
    /// Number of users (2 or 3; up to 8 for mc/oracle methods).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Power fractions, comma separated, summing to one.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.3")]
    beta: Vec<f64>,
    /// Nakagami shape values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    m: Vec<f64>,
    /// Spread E[alpha^2].
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Eb/N0 grid in dB: comma list or start:step:stop.
    #[arg(long, default_value = "0:5:30")]
    ebn0: String,
    /// Evaluation methods.
    #[arg(long, value_delimiter = ',', value_enum, default_value = "series")]
    methods: Vec<Method>,
    /// Monte Carlo trials per grid point.
    #[arg(long, default_value = "1e6", value_parser = parse_trials)]
    trials: u64,
    /// Master seed for simulation and oracle sampling.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// SIC cancellation mode for simulation.
    #[arg(long, value_enum, default_value = "imperfect")]
    sic: SicModeArg,
    /// Fix the channel gains (conditional BER) instead of drawing fading.
    #[arg(long, value_delimiter = ',')]
    fixed_gains: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Series term tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Series term cap.
    #[arg(long, default_value_t = 500)]
    max_terms: usize,
    /// Quadrature nodes for the averaging integrals.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Worker threads (affects scheduling only, never results).
    #[arg(long)]
    shards: Option<usize>,
    /// Rerun the exact configuration stored in a manifest.
    #[arg(long)]
    #[serde(skip)]
    from_manifest: Option<PathBuf>,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug)]
struct OptimizeArgs {
    /// Optimization objective (required unless replaying a manifest).
    #[arg(long, value_enum, required_unless_present = "from_manifest")]
    objective: Option<ObjectiveArg>,
    /// Number of users (2 or 3).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Nakagami shape values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    m: Vec<f64>,
    /// Spread E[alpha^2].
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Eb/N0 grid in dB: comma list or start:step:stop.
    #[arg(long, default_value = "0,10,20,30")]
    ebn0: String,
    /// BER backend for the objective.
    #[arg(long, value_enum, default_value = "series")]
    backend: BackendArg,
    /// Equal-BER relative tolerance (fairness).
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Series term cap.
    #[arg(long, default_value_t = 500)]
    max_terms: usize,
    /// Quadrature nodes.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed (oracle backend sampling).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rerun the exact configuration stored in a manifest.
    #[arg(long)]
    #[serde(skip)]
    from_manifest: Option<PathBuf>,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug)]
struct ValidateArgs {
    /// Run only checks whose name contains this substring.
    #[arg(long)]
    only: Option<String>,
    /// Additionally print the formula deviation table.
    #[arg(long, default_value_t = false)]
    audit: bool,
    /// Output directory for the report file.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_trials(s: &str) -> Result<u64, String> {
    let v: f64 = s.parse().map_err(|e| format!("invalid trial count {s}: {e}"))?;
    if !v.is_finite() || !(1.0..=1e12).contains(&v) {
        return Err(format!("trial count out of range: {s}"));
    }
    Ok(v.round() as u64)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid must be start:step:stop, got {s}"));
        }
        let start: f64 = parts[0].parse().map_err(|e| format!("{e}"))?;
        let step: f64 = parts[1].parse().map_err(|e| format!("{e}"))?;
        let stop: f64 = parts[2].parse().map_err(|e| format!("{e}"))?;
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(format!("degenerate grid {s}"));
        }
        let mut grid = Vec::new();
        let mut x = start;
        while x <= stop + 1e-9 {
            grid.push(x);
            x += step;
        }
        Ok(grid)
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad grid entry {p}: {e}")))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest<T> {
    command: String,
    tool_version: String,
    /// Seconds since the Unix epoch; excluded from the result files so that
    /// reruns reproduce them byte for byte.
    timestamp: u64,
    seed: u64,
    config: T,
    outputs: Vec<String>,
}

fn write_manifest<T: Serialize>(path: &Path, manifest: &Manifest<T>) -> std::io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(manifest).unwrap())
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fmt_field(v: f64) -> String {
    format!("{v:.12e}")
}

fn run_sweep(mut args: SweepArgs) -> Result<(), String> {
    if let Some(path) = args.from_manifest.take() {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read manifest: {e}"))?;
        let manifest: Manifest<SweepArgs> =
            serde_json::from_str(&text).map_err(|e| format!("cannot parse manifest: {e}"))?;
        let mut replay = manifest.config;
        replay.out = args.out.clone();
        replay.shards = args.shards.or(replay.shards);
        return run_sweep(replay);
    }
    if let Some(threads) = args.shards {
        // Build may fail if a global pool already exists; scheduling only.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let grid = parse_grid(&args.ebn0)?;
    let alloc = PowerAllocation::new(args.beta.clone()).map_err(|e| e.to_string())?;
    if alloc.n_users() != args.n {
        return Err(format!("--n {} disagrees with {} beta entries", args.n, args.beta.len()));
    }
    let analytic_ok = args.n == 2 || args.n == 3;
    for method in &args.methods {
        if matches!(method, Method::Series | Method::Rayleigh) && !analytic_ok {
            return Err(format!("method {method:?} requires 2 or 3 users"));
        }
    }

    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let csv_path = args.out.join("sweep.csv");
    let mut rows = String::new();
    rows.push_str(SWEEP_SCHEMA);
    rows.push('\n');
    rows.push_str("n,user,m,omega,ebn0_db,beta,method,ber,ci_low,ci_high,trials,seed\n");
    let beta_field = args
        .beta
        .iter()
        .map(|b| format!("{b}"))
        .collect::<Vec<_>>()
        .join(";");

    for &m in &args.m {
        for method in &args.methods {
            match method {
                Method::Series | Method::Rayleigh => {
                    if *method == Method::Rayleigh && m != 1.0 {
                        if !args.m.contains(&1.0) {
                            return Err("rayleigh closed forms require m = 1".into());
                        }
                        eprintln!("note: skipping rayleigh rows at m = {m}");
                        continue;
                    }
                    for &ebn0 in &grid {
                        for user in 1..=args.n {
                            let spec = AvgBerSpec::new(alloc.clone(), user, m, args.omega, ebn0)
                                .and_then(|s| s.with_controls(args.tol, args.max_terms, args.nodes))
                                .map_err(|e| e.to_string())?;
                            let r = if *method == Method::Series {
                                avg_ber(&spec).map_err(|e| e.to_string())?
                            } else {
                                rayleigh_closed_for_spec(&spec).map_err(|e| e.to_string())?
                            };
                            rows.push_str(&format!(
                                "{},{},{},{},{},{},{},{},,,,\n",
                                args.n,
                                user,
                                m,
                                args.omega,
                                ebn0,
                                beta_field,
                                method_name(*method),
                                fmt_field(r.value)
                            ));
                        }
                    }
                }
                Method::Oracle => {
                    for &ebn0 in &grid {
                        let n0 = 10f64.powf(-ebn0 / 10.0);
                        if let Some(gains) = &args.fixed_gains {
                            let r = enumerate_exact(&alloc, gains, n0 / 2.0)
                                .map_err(|e| e.to_string())?;
                            for user in 1..=args.n {
                                rows.push_str(&format!(
                                    "{},{},{},{},{},{},oracle,{},,,,\n",
                                    args.n,
                                    user,
                                    m,
                                    args.omega,
                                    ebn0,
                                    beta_field,
                                    fmt_field(r.per_user[user - 1])
                                ));
                            }
                        } else {
                            for user in 1..=args.n {
                                let spec = AvgBerSpec::new(alloc.clone(), user, m, args.omega, ebn0)
                                    .map_err(|e| e.to_string())?;
                                let controls = OracleControls {
                                    strata: 16_384,
                                    replicates: 4,
                                    seed: args.seed,
                                };
                                let r = avg_numeric_oracle(&spec, controls)
                                    .map_err(|e| e.to_string())?;
                                rows.push_str(&format!(
                                    "{},{},{},{},{},{},oracle,{},{},{},,{}\n",
                                    args.n,
                                    user,
                                    m,
                                    args.omega,
                                    ebn0,
                                    beta_field,
                                    fmt_field(r.value),
                                    fmt_field(r.value - 1.96 * r.std_error),
                                    fmt_field(r.value + 1.96 * r.std_error),
                                    args.seed
                                ));
                            }
                        }
                    }
                }
                Method::Mc => {
                    let config = SimConfig {
                        alloc: alloc.clone(),
                        m,
                        omega: args.omega,
                        ebn0_db_grid: grid.clone(),
                        trials: args.trials,
                        seed: args.seed,
                        sic_mode: match args.sic {
                            SicModeArg::Perfect => SicMode::Perfect,
                            SicModeArg::Imperfect => SicMode::Imperfect,
                        },
                        fixed_gains: args.fixed_gains.clone(),
                        max_rel_ci_half_width: None,
                    };
                    let estimates = mc_run(&config).map_err(|e| e.to_string())?;
                    for est in &estimates {
                        for (user_idx, ub) in est.per_user.iter().enumerate() {
                            rows.push_str(&format!(
                                "{},{},{},{},{},{},mc,{},{},{},{},{}\n",
                                args.n,
                                user_idx + 1,
                                m,
                                args.omega,
                                est.ebn0_db,
                                beta_field,
                                fmt_field(ub.ber),
                                fmt_field(ub.ci_low),
                                fmt_field(ub.ci_high),
                                est.trials,
                                est.seed
                            ));
                        }
                    }
                }
            }
        }
    }
    std::fs::write(&csv_path, rows).map_err(|e| e.to_string())?;
    let manifest = Manifest {
        command: "sweep".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: now_secs(),
        seed: args.seed,
        config: args.clone(),
        outputs: vec![csv_path.display().to_string()],
    };
    write_manifest(&args.out.join("sweep.manifest.json"), &manifest).map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Series => "series",
        Method::Rayleigh => "rayleigh",
        Method::Mc => "mc",
        Method::Oracle => "oracle",
    }
}

fn run_optimize(mut args: OptimizeArgs) -> Result<(), String> {
    if let Some(path) = args.from_manifest.take() {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read manifest: {e}"))?;
        let manifest: Manifest<OptimizeArgs> =
            serde_json::from_str(&text).map_err(|e| format!("cannot parse manifest: {e}"))?;
        let mut replay = manifest.config;
        replay.out = args.out.clone();
        return run_optimize(replay);
    }
    let Some(objective_arg) = args.objective else {
        return Err("--objective missing from the replayed manifest".into());
    };
    let grid = parse_grid(&args.ebn0)?;
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let csv_path = args.out.join("optimize.csv");
    let mut rows = String::new();
    rows.push_str(OPTIMIZE_SCHEMA);
    rows.push('\n');
    rows.push_str("objective,n,m,ebn0_db,beta_1,beta_2,beta_3,ber_u1,ber_u2,ber_u3,residual,converged\n");
    let mut failures = 0usize;
    let mut total = 0usize;
    for &m in &args.m {
        for &ebn0 in &grid {
            total += 1;
            let objective = match objective_arg {
                ObjectiveArg::Fairness => Objective::Fairness,
                ObjectiveArg::MinAverage => Objective::MinAverage,
            };
            let mut problem =
                OptProblem::new(objective, args.n, m, args.omega, ebn0).map_err(|e| e.to_string())?;
            problem.backend = match args.backend {
                BackendArg::Series => Backend::Series,
                BackendArg::Oracle => Backend::NumericOracle,
            };
            problem.fairness_tol = args.tol;
            problem.max_terms = args.max_terms;
            problem.nodes = args.nodes;
            let solved = match objective {
                Objective::Fairness => solve_fairness(&problem),
                Objective::MinAverage => solve_min_average(&problem),
            };
            let obj_name = match objective_arg {
                ObjectiveArg::Fairness => "fairness",
                ObjectiveArg::MinAverage => "min-average",
            };
            match solved {
                Ok(r) => {
                    let b = r.alloc.betas();
                    let p = &r.per_user_ber;
                    rows.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                        obj_name,
                        args.n,
                        m,
                        ebn0,
                        fmt_field(b[0]),
                        fmt_field(b[1]),
                        b.get(2).map(|x| fmt_field(*x)).unwrap_or_default(),
                        fmt_field(p[0]),
                        fmt_field(p[1]),
                        p.get(2).map(|x| fmt_field(*x)).unwrap_or_default(),
                        fmt_field(r.residual),
                        r.converged
                    ));
                    if !r.converged {
                        failures += 1;
                    }
                }
                Err(e) => {
                    failures += 1;
                    eprintln!("warning: {obj_name} at m={m}, {ebn0} dB failed: {e}");
                    rows.push_str(&format!("{obj_name},{},{},{},,,,,,,,false\n", args.n, m, ebn0));
                }
            }
        }
    }
    std::fs::write(&csv_path, rows).map_err(|e| e.to_string())?;
    let manifest = Manifest {
        command: "optimize".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: now_secs(),
        seed: args.seed,
        config: args.clone(),
        outputs: vec![csv_path.display().to_string()],
    };
    write_manifest(&args.out.join("optimize.manifest.json"), &manifest).map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    if failures == total {
        return Err("every requested operating point failed".into());
    }
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<bool, String> {
    let outcomes = validate::run_checks(args.only.as_deref());
    if outcomes.is_empty() {
        return Err(format!("no check matches filter {:?}", args.only));
    }
    let mut report = String::new();
    let mut all_passed = true;
    for o in &outcomes {
        let tag = if o.audit_only {
            "AUDIT"
        } else if o.passed {
            "PASS"
        } else {
            "FAIL"
        };
        let line = format!("[{tag}] {}\n    {}\n", o.name, o.detail);
        print!("{line}");
        report.push_str(&line);
        if !o.audit_only {
            all_passed &= o.passed;
        }
    }
    if args.audit {
        match validate::audit_report() {
            Ok(audit) => {
                let mut table = String::from(
                    "\nformula deviation audit (reference: exact enumeration / stratified oracle)\n",
                );
                table.push_str("formula,ebn0_db,value,reference,rel_dev\n");
                for row in &audit.rows {
                    table.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.formula,
                        row.ebn0_db,
                        fmt_field(row.value),
                        fmt_field(row.reference),
                        fmt_field(row.rel_dev)
                    ));
                }
                print!("{table}");
                report.push_str(&table);
            }
            Err(e) => return Err(format!("audit failed: {e}")),
        }
    }
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let report_path = args.out.join("validate_report.txt");
    std::fs::write(&report_path, &report).map_err(|e| e.to_string())?;
    let manifest = Manifest {
        command: "validate".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: now_secs(),
        seed: 0,
        config: args.clone(),
        outputs: vec![report_path.display().to_string()],
    };
    write_manifest(&args.out.join("validate.manifest.json"), &manifest).map_err(|e| e.to_string())?;
    Ok(all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => run_sweep(args).map(|_| true),
        Command::Optimize(args) => run_optimize(args).map(|_| true),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

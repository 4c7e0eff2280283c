use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nashfund::axioms::{
    self, check_cic, check_cic_all, check_conjectured_cic, check_core_share, check_decomposability,
    check_efficiency, check_strong_cic_all, check_strong_cic_grid, default_efficiency_tol, AxiomReport,
};
use nashfund::decompose::{check_decomposable, proportional_decomposition};
use nashfund::error::Error;
use nashfund::fixtures::{fixture, run_fixtures, Fixture, FIXTURES};
use nashfund::mechanisms::{run_mechanism_with, MechanismId};
use nashfund::model::{Distribution, DistributionJson, Instance};
use nashfund::solver::{solve_nash, write_trace_csv, SolveResult, SolverConfig};
use nashfund::suite::SuiteConfig;

mod format;
use format::sig9;

const EXIT_VIOLATED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "nashfund", version, about = "Nash product rule for pooled public-goods funding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverOpts {
    /// Stop once the certified optimality gap is at most this.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
}

impl SolverOpts {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.eps,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Nash product distribution of an instance.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverOpts,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve, then split the result into per-agent spending plans.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Check one axiom; exit 0 if it holds, 1 if violated.
    Check(CheckArgs),
    /// Run several mechanisms on one instance and tabulate the results.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "nash,utilitarian,uniform_split,conditional_utilitarian,anticut")]
        mechanisms: Vec<String>,
        /// Also write the rows as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Run the built-in example instances and their expectations.
    Examples {
        /// Fixture names; all fixtures if omitted.
        names: Vec<String>,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxiomArg {
    Efficiency,
    Decomposability,
    Cic,
    ConjecturedCic,
    CoreShare,
}

#[derive(Args)]
struct CheckArgs {
    axiom: AxiomArg,
    /// Instance to check; required unless --suite is given.
    #[arg(long, required_unless_present = "suite")]
    input: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "nash")]
    mechanism: String,
    /// Distribution to check instead of the mechanism output (efficiency, decomposability).
    #[arg(long)]
    distribution: Option<PathBuf>,
    /// Agent name; all agents if omitted (CIC variants).
    #[arg(long)]
    agent: Option<String>,
    /// Contribution grid points for CIC [default: 21].
    #[arg(long)]
    grid: Option<usize>,
    /// Strong decomposability, or strong CIC (tested at zero contribution
    /// only unless --grid is given).
    #[arg(long)]
    strong: bool,
    /// Comparison tolerance; each axiom has its own default.
    #[arg(long)]
    tol: Option<f64>,
    /// Extra contribution amounts for conjectured-cic.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
    extra: Vec<f64>,
    /// Agent names forming the group for core-share.
    #[arg(long, value_delimiter = ',')]
    group: Vec<String>,
    /// Check this many seeded random instances instead of --input.
    #[arg(long, conflicts_with = "input")]
    suite: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_agents: usize,
    #[arg(long, default_value_t = 4)]
    max_projects: usize,
    #[command(flatten)]
    solver: SolverOpts,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let diverged = err
                .chain()
                .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::MaxItersExceeded { .. })));
            ExitCode::from(if diverged { EXIT_NO_CONVERGENCE } else { EXIT_INPUT })
        }
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Solve {
            input,
            output,
            solver,
            trace,
        } => cmd_solve(&input, output.as_deref(), &solver, trace.as_deref()),
        Command::Decompose { input, output, solver } => cmd_decompose(&input, output.as_deref(), &solver),
        Command::Check(args) => cmd_check(&args),
        Command::Compare {
            input,
            mechanisms,
            output,
            solver,
        } => cmd_compare(&input, &mechanisms, output.as_deref(), &solver),
        Command::Examples { names, list } => cmd_examples(&names, list),
    }
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if inst.pool() <= 0.0 {
        eprintln!("warning: every contribution is zero; the pool is empty");
    }
    Ok(inst)
}

fn emit(output: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn validate(solver: &SolverOpts) -> anyhow::Result<SolverConfig> {
    let cfg = solver.config();
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_solve(input: &Path, output: Option<&Path>, solver: &SolverOpts, trace: Option<&Path>) -> anyhow::Result<u8> {
    let inst = load_instance(input)?;
    let mut cfg = validate(solver)?;
    cfg.record_trace = trace.is_some();
    let (result, code) = match solve_nash(&inst, &cfg) {
        Ok(r) => (r, 0),
        Err(Error::MaxItersExceeded { best, .. }) => {
            eprintln!("warning: no convergence within {} iterations; writing the best iterate", cfg.max_iters);
            (*best, EXIT_NO_CONVERGENCE)
        }
        Err(e) => return Err(e.into()),
    };
    if let (Some(path), Some(rows)) = (trace, result.trace.as_deref()) {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trace_csv(io::BufWriter::new(file), rows)?;
    }
    emit(output, &serde_json::to_value(result.distribution.to_json(&inst))?)?;
    summarize(&inst, &result);
    Ok(code)
}

fn summarize(inst: &Instance, r: &SolveResult) {
    eprintln!(
        "iterations {}  gap bound {}  max KKT residual {}{}",
        r.iterations,
        sig9(r.gap_bound),
        sig9(r.kkt.max_residual),
        if r.polished { "  (refined)" } else { "" }
    );
    for (name, x) in inst.projects().iter().zip(&r.distribution.spend) {
        eprintln!("  {name}: {}", sig9(*x));
    }
}

fn cmd_decompose(input: &Path, output: Option<&Path>, solver: &SolverOpts) -> anyhow::Result<u8> {
    let inst = load_instance(input)?;
    let r = solve_nash(&inst, &validate(solver)?)?;
    let dec = proportional_decomposition(&inst, &r.distribution)?;
    emit(output, &serde_json::to_value(dec.to_json(&inst))?)?;
    Ok(0)
}

fn load_distribution(inst: &Instance, path: &Path) -> anyhow::Result<Distribution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let json: DistributionJson =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let d = Distribution::from_json(inst, &json)?;
    inst.check_pool_distribution(&d)?;
    Ok(d)
}

fn agent_index(inst: &Instance, name: &str) -> anyhow::Result<usize> {
    match inst.agent_index(name) {
        Some(i) => Ok(i),
        None => bail!("no agent named `{name}`"),
    }
}

fn check_one(args: &CheckArgs, inst: &Instance, mechanism: MechanismId, cfg: &SolverConfig) -> anyhow::Result<AxiomReport> {
    let agent = args.agent.as_deref().map(|n| agent_index(inst, n)).transpose()?;
    let distribution = || -> anyhow::Result<Distribution> {
        match &args.distribution {
            Some(path) => load_distribution(inst, path),
            None => Ok(run_mechanism_with(mechanism, inst, cfg)?),
        }
    };
    let cic_tol = args.tol.unwrap_or(axioms::DEFAULT_CIC_TOL);
    let report = match args.axiom {
        AxiomArg::Efficiency => {
            let tol = args.tol.unwrap_or(default_efficiency_tol(inst.pool()));
            check_efficiency(inst, &distribution()?, tol)?
        }
        AxiomArg::Decomposability => check_decomposability(inst, &distribution()?, args.strong)?,
        AxiomArg::Cic if args.strong => match agent {
            Some(i) => check_strong_cic_grid(mechanism, inst, i, args.grid.unwrap_or(2), cic_tol)?,
            None => check_strong_cic_all(mechanism, inst, args.grid, cic_tol)?,
        },
        AxiomArg::Cic => {
            let grid = args.grid.unwrap_or(axioms::DEFAULT_GRID);
            match agent {
                Some(i) => check_cic(mechanism, inst, i, grid, cic_tol)?,
                None => check_cic_all(mechanism, inst, grid, cic_tol)?,
            }
        }
        AxiomArg::ConjecturedCic => {
            if mechanism != MechanismId::Nash {
                bail!("conjectured-cic is defined for the nash mechanism only");
            }
            let agents: Vec<usize> = match agent {
                Some(i) => vec![i],
                None => (0..inst.num_agents()).filter(|&i| inst.agents()[i].contribution > 0.0).collect(),
            };
            let reports = agents
                .into_iter()
                .map(|i| check_conjectured_cic(inst, i, &args.extra, cic_tol))
                .collect::<Result<Vec<_>, _>>()?;
            AxiomReport::merge(axioms::Axiom::ConjecturedCic, cic_tol, reports)
        }
        AxiomArg::CoreShare => {
            if args.group.is_empty() {
                bail!("core-share needs --group");
            }
            let group = args
                .group
                .iter()
                .map(|n| agent_index(inst, n))
                .collect::<anyhow::Result<Vec<_>>>()?;
            check_core_share(inst, &group, None, args.tol.unwrap_or(1e-7))?
        }
    };
    Ok(report)
}

fn cmd_check(args: &CheckArgs) -> anyhow::Result<u8> {
    let mechanism: MechanismId = args.mechanism.parse()?;
    let cfg = validate(&args.solver)?;
    if let Some(count) = args.suite {
        return check_suite(args, mechanism, &cfg, count);
    }
    let input = args.input.as_deref().expect("clap requires --input without --suite");
    let inst = load_instance(input)?;
    let report = check_one(args, &inst, mechanism, &cfg)?;
    emit(args.output.as_deref(), &serde_json::to_value(&report)?)?;
    eprintln!(
        "{}: {} on {} tested points",
        report.axiom.as_str(),
        if report.holds() { "holds" } else { "VIOLATED" },
        report.tested_points
    );
    Ok(if report.holds() { 0 } else { EXIT_VIOLATED })
}

fn check_suite(args: &CheckArgs, mechanism: MechanismId, cfg: &SolverConfig, count: usize) -> anyhow::Result<u8> {
    if args.distribution.is_some() || args.agent.is_some() || !args.group.is_empty() {
        bail!("--distribution, --agent and --group need a single --input instance");
    }
    if matches!(args.axiom, AxiomArg::CoreShare) {
        bail!("core-share needs an explicit group; use --input");
    }
    let suite = SuiteConfig::new(args.seed, count, args.max_agents, args.max_projects);
    let results = suite.run(|k, inst| check_one(args, &inst, mechanism, cfg).map(|r| (k, inst, r)));
    let mut violated = Vec::new();
    let mut points = 0;
    for result in results {
        let (k, inst, report) = result?;
        points += report.tested_points;
        if !report.holds() {
            violated.push(json!({
                "index": k,
                "instance": serde_json::to_value(inst.to_raw())?,
                "report": serde_json::to_value(&report)?,
            }));
        }
    }
    let summary = json!({
        "seed": args.seed,
        "instances": count,
        "max_agents": args.max_agents,
        "max_projects": args.max_projects,
        "tested_points": points,
        "violations": violated,
    });
    emit(args.output.as_deref(), &summary)?;
    eprintln!("{} of {count} instances violated, {points} points tested", violated.len());
    Ok(if violated.is_empty() { 0 } else { EXIT_VIOLATED })
}

fn cmd_compare(input: &Path, names: &[String], output: Option<&Path>, solver: &SolverOpts) -> anyhow::Result<u8> {
    let inst = load_instance(input)?;
    let cfg = validate(solver)?;
    let mechanisms = names
        .iter()
        .map(|n| n.trim().parse::<MechanismId>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for m in mechanisms {
        let d = run_mechanism_with(m, &inst, &cfg)?;
        let utilities: Vec<f64> = inst.agents().iter().map(|a| a.utility(&d.spend)).collect();
        let decomposable = check_decomposable(&inst, &d)?.is_decomposable();
        let efficient = check_efficiency(&inst, &d, default_efficiency_tol(inst.pool()))?.holds();
        let spend = inst
            .projects()
            .iter()
            .zip(&d.spend)
            .filter(|(_, &x)| x > 0.0)
            .map(|(p, &x)| format!("{}{p}", sig9(x)))
            .collect::<Vec<_>>()
            .join(" + ");
        table.push([
            m.to_string(),
            if spend.is_empty() { "0".into() } else { spend },
            utilities.iter().map(|&u| sig9(u)).collect::<Vec<_>>().join(", "),
            yes_no(decomposable).into(),
            yes_no(efficient).into(),
        ]);
        rows.push(json!({
            "mechanism": m,
            "distribution": d.to_json(&inst),
            "utilities": utilities,
            "decomposable": decomposable,
            "efficient": efficient,
        }));
    }
    print_table(&["mechanism", "spend", "utilities", "decomposable", "efficient"], &table);
    if let Some(path) = output {
        emit(Some(path), &serde_json::Value::Array(rows))?;
    }
    Ok(0)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_table<const N: usize>(header: &[&str; N], rows: &[[String; N]]) {
    let mut widths = header.map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        println!("{}", padded.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
}

fn cmd_examples(names: &[String], list: bool) -> anyhow::Result<u8> {
    let selected: Vec<&Fixture> = if names.is_empty() {
        FIXTURES.iter().collect()
    } else {
        names
            .iter()
            .map(|n| fixture(n).with_context(|| format!("unknown fixture `{n}` (try --list)")))
            .collect::<anyhow::Result<_>>()?
    };
    if list {
        for f in selected {
            println!("{:<24} {}", f.name, f.description);
        }
        return Ok(0);
    }
    let outcomes = run_fixtures(&selected);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if o.detail.is_empty() {
            println!("{status} {}: {}", o.fixture, o.expectation);
        } else {
            println!("{status} {}: {} [{}]", o.fixture, o.expectation, o.detail);
        }
    }
    println!("{} of {} expectations passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATED })
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use macc_core::{
    baseline_cost, brute_force_oracle, format_rational, greedy_search, level_cost,
    level_params_for, parse_rational, quantize_design, render_svg, simulate_superposition,
    simulate_with, sweep, write_csv, CostError, DemandVector, ExactSystem, ExperimentConfig,
    ExperimentError, LevelParams, Limits, MuSpec, OptimizationResult, OptimizeError, Rational,
    Scalar, Scheme, SchemeError, SimError, SimOptions,
};
use macc_core::experiments::{Exact, SystemSection};

/// Cost-aware multiaccess coded caching: scheme construction, delivery
/// simulation, cost optimization and level sweeps.
#[derive(Debug, Parser)]
#[command(name = "macc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the placement, retrieve and delivery arrays for (K', t, L).
    Construct(SchemeArgs),
    /// Check an array file (or a freshly built scheme) for delivery validity.
    Validate {
        /// Array file written by `construct --out`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        scheme: OptionalSchemeArgs,
    },
    /// Replay one delivery round and account every retrieval.
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        /// Comma-separated requested file per user (1-indexed); worst case by default.
        #[arg(long, value_delimiter = ',')]
        demands: Option<Vec<usize>>,
        /// Optimize first, quantize the design and replay every active level.
        #[arg(long)]
        superposition: bool,
        /// Print one FETCH line per retrieval.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the closed-form costs of level L at its caching ratio.
    Cost {
        #[command(flatten)]
        system: SystemArgs,
        /// Caching ratio to evaluate instead of M/N.
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Minimize the superposition cost over levels and caching ratios.
    Optimize {
        #[command(flatten)]
        system: SystemArgs,
        /// Compare against the exhaustive grid oracle.
        #[arg(long)]
        oracle: bool,
        /// Print every candidate the search evaluated.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimize every level in a range and emit CSV and an optional plot.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long = "L-min")]
        l_min: Option<usize>,
        #[arg(long = "L-max")]
        l_max: Option<usize>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct SchemeArgs {
    #[arg(long)]
    kprime: usize,
    #[arg(long)]
    t: usize,
    #[arg(long = "L")]
    level: usize,
    /// Write the arrays here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the arrays to standard output.
    #[arg(long)]
    print: bool,
}

#[derive(Debug, Args)]
struct OptionalSchemeArgs {
    #[arg(long)]
    kprime: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long = "L")]
    level: Option<usize>,
}

/// System parameters: a config file, individual flags, or both (flags win).
#[derive(Debug, Args)]
struct SystemArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Cache size in files, e.g. `2` or `5/2`.
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long = "L")]
    level: Option<usize>,
    /// `linear`, one number, or a comma-separated list.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    rho: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        let code = if e.is_resource_limit() {
            3
        } else if matches!(e, SchemeError::Parse { .. }) {
            2
        } else {
            1
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            _ if e.is_resource_limit() => 3,
            SimError::Decode { .. } | SimError::Incomplete { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        let code = if matches!(e, OptimizeError::GridTooLarge { .. }) {
            3
        } else {
            1
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Construct(args) => construct(&args),
        Command::Validate { input, scheme } => validate(input.as_deref(), &scheme),
        Command::Simulate {
            system,
            demands,
            superposition,
            trace,
            seed,
        } => simulate(&system, demands, superposition, trace, seed),
        Command::Cost { system, gamma } => cost(&system, gamma.as_deref()),
        Command::Optimize {
            system,
            oracle,
            trace,
            seed,
        } => optimize(&system, oracle, trace, seed),
        Command::Sweep {
            system,
            l_min,
            l_max,
            csv,
            svg,
            oracle,
            seed,
        } => run_sweep(&system, (l_min, l_max), csv, svg, oracle, seed),
    }
}

fn parse_exact(flag: &str, text: &str) -> Result<Rational, Failure> {
    parse_rational(text).ok_or_else(|| Failure::usage(format!("--{flag}: `{text}` is not a number")))
}

fn parse_mu(text: &str) -> Result<MuSpec, Failure> {
    if text == "linear" {
        return Ok(MuSpec::Linear);
    }
    let values = text
        .split(',')
        .map(|v| parse_exact("mu", v.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if values.len() == 1 {
        MuSpec::Constant(values[0].clone())
    } else {
        MuSpec::List(values)
    })
}

fn load_config(args: &SystemArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let (Some(k), Some(n), Some(m)) = (args.k, args.n, args.m.as_deref()) else {
                return Err(Failure::usage(
                    "give --config or all of --K, --N and --M",
                ));
            };
            ExperimentConfig {
                system: SystemSection {
                    k,
                    n,
                    m: Exact(parse_exact("M", m)?),
                    level: 2,
                    mu: MuSpec::Linear,
                    rho: Exact(Rational::from_int(1)),
                },
                sweep: Default::default(),
                solver: Default::default(),
                output: Default::default(),
                demands: None,
            }
        }
    };
    let s = &mut cfg.system;
    if let Some(k) = args.k {
        s.k = k;
    }
    if let Some(n) = args.n {
        s.n = n;
    }
    if let Some(m) = &args.m {
        s.m = Exact(parse_exact("M", m)?);
    }
    if let Some(l) = args.level {
        s.level = l;
    }
    if let Some(mu) = &args.mu {
        s.mu = parse_mu(mu)?;
    }
    if let Some(rho) = &args.rho {
        s.rho = Exact(parse_exact("rho", rho)?);
    }
    Ok(cfg)
}

/// `p/q ≈ d.dddd`, or just `p` for integers.
fn show(x: &Rational) -> String {
    if x.is_integer() {
        format_rational(x)
    } else {
        format!("{} ≈ {:.4}", format_rational(x), x.to_f64_lossy())
    }
}

fn describe(p: &LevelParams) -> String {
    format!(
        "K'={} t={} L={} K={} F={} S={} load={}",
        p.k_prime(),
        p.t(),
        p.level(),
        p.k(),
        p.subpacketization(),
        p.message_count(),
        format_rational(&p.load())
    )
}

fn construct(args: &SchemeArgs) -> Outcome {
    let p = LevelParams::new(args.kprime, args.t, args.level)?;
    let scheme = Scheme::build_with(&p, &Limits::from_env())?;
    println!("{}", describe(&p));
    if p.is_degenerate() {
        println!("S=0: K'=t, so every user retrieves all packets and nothing is broadcast");
    }
    if args.out.is_none() && !args.print {
        return Ok(());
    }
    let text = scheme.to_text();
    if let Some(path) = &args.out {
        fs::write(path, &text)?;
        println!("arrays written to {}", path.display());
    }
    if args.print {
        print!("{text}");
    }
    Ok(())
}

fn validate(input: Option<&Path>, args: &OptionalSchemeArgs) -> Outcome {
    let scheme = match (input, args.kprime, args.t, args.level) {
        (Some(path), None, None, None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            Scheme::from_text(&text)?
        }
        (None, Some(kp), Some(t), Some(l)) => {
            Scheme::build_with(&LevelParams::new(kp, t, l)?, &Limits::from_env())?
        }
        _ => {
            return Err(Failure::usage(
                "give either --input or all of --kprime, --t and --L",
            ))
        }
    };
    let report = scheme.validate();
    println!("{}", describe(&scheme.params));
    let checks = [
        ("C1 (no label twice in a row or column)", report.pda.c1_holds()),
        ("C2 (cross positions are stars)", report.pda.c2_holds()),
        ("delivery array", report.pda.passed()),
        ("stars of Q match U", report.stars_match_user),
        ("cyclic access", report.cyclic_access),
        ("uniform memory", report.uniform_memory),
        ("row counts", report.row_counts),
        ("shift structure", report.shift_structure),
    ];
    for (name, ok) in checks {
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
    }
    if report.passed() {
        println!("valid");
        Ok(())
    } else {
        let detail = report
            .pda
            .first_violation()
            .map(|v| format!(": {v:?}"))
            .unwrap_or_default();
        Err(Failure::invalid(format!("scheme is not valid{detail}")))
    }
}

fn demand_vector(
    cfg: &ExperimentConfig,
    cli: Option<Vec<usize>>,
) -> Result<DemandVector, Failure> {
    match cli.or_else(|| cfg.demands.clone()) {
        Some(d) => DemandVector::new(d, cfg.system.n).map_err(Failure::from),
        None => Ok(DemandVector::worst_case(cfg.system.k, cfg.system.n)),
    }
}

fn quantization_hint(sys: &ExactSystem) -> String {
    let k = sys.k as i64;
    let t = sys.memory_ratio() * Rational::from_int(k);
    let lo = t.floor().max(Rational::from_int(1));
    let hi = t.ceil();
    let n = Rational::from_count(sys.n_files);
    let cap = Rational::from_count(sys.n_files) / Rational::from_count(sys.level);
    let mut sizes: Vec<String> = [lo, hi]
        .into_iter()
        .map(|t| t * n.clone() / Rational::from_int(k))
        .filter(|m| *m <= cap)
        .map(|m| format_rational(&m))
        .collect();
    sizes.dedup();
    format!(
        "M/N = {} is not a multiple of 1/K = 1/{k}; the nearest realizable cache sizes are M = {} \
         (or run `simulate --superposition` to replay a quantized two-level design)",
        format_rational(&sys.memory_ratio()),
        sizes.join(" or M = ")
    )
}

fn simulate(
    args: &SystemArgs,
    demands: Option<Vec<usize>>,
    superposition: bool,
    trace: bool,
    seed: Option<u64>,
) -> Outcome {
    let cfg = load_config(args)?;
    let sys = cfg.base_system()?;
    let demand = demand_vector(&cfg, demands)?;
    let options = SimOptions {
        limits: Limits::from_env(),
        trace,
    };
    println!("system: {sys}");
    if superposition {
        let mut settings = cfg.solver_settings();
        if let Some(s) = seed {
            settings.seed = s;
        }
        let result = greedy_search(&sys.cast::<f64>(), &settings)?;
        let q = quantize_design(&result, &sys)?;
        let report = simulate_superposition(&q.design, &sys, &demand, &options)?;
        for (l, alpha, c) in &report.levels {
            println!(
                "level {l}: alpha = {}  F = {}  cost = {}",
                show(alpha),
                c.subpacketization,
                show(&c.total_cost)
            );
        }
        println!("continuous objective = {:.10}", result.objective);
        println!("quantization delta = {:.3e}", q.delta);
        println!("total = {}", show(&report.total_cost));
        if report.total_cost != q.cost {
            return Err(Failure::invalid(format!(
                "simulated cost {} differs from the design cost {}",
                format_rational(&report.total_cost),
                format_rational(&q.cost)
            )));
        }
        return Ok(());
    }
    let p = level_params_for(sys.k, sys.level, &sys.memory_ratio()).map_err(|e| match e {
        SimError::OffGrid { .. } => Failure::usage(quantization_hint(&sys)),
        other => other.into(),
    })?;
    let report = simulate_with(&p, &sys, &demand, &options)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for line in &report.trace {
        println!("{line}");
    }
    let c = &report.cost;
    let f = Rational::from_integer(c.subpacketization.into());
    println!("scheme: {}", describe(&p));
    println!(
        "broadcast: {} packets, cost = {}",
        c.broadcast_packets,
        show(&c.broadcast_cost)
    );
    for (l, n) in c.access_packets_per_level.iter().enumerate() {
        println!(
            "level {}: Δ = {} (direct {}, decode {} packets)",
            l + 1,
            show(&(Rational::from_integer((*n).into()) / f.clone())),
            c.direct_packets_per_level[l],
            c.decode_packets_per_level[l]
        );
    }
    println!("direct = {}", show(&c.direct_cost));
    println!("decode = {}", show(&c.decode_cost));
    let levels: Vec<String> = report.decode_levels.iter().map(|l| l.to_string()).collect();
    println!("decode levels: {{{}}}", levels.join(","));
    println!("total = {}", show(&c.total_cost));
    Ok(())
}

fn cost(args: &SystemArgs, gamma: Option<&str>) -> Outcome {
    let cfg = load_config(args)?;
    let sys = cfg.base_system()?;
    let gamma = match gamma {
        Some(g) => parse_exact("gamma", g)?,
        None => sys.memory_ratio(),
    };
    let c = level_cost(sys.level, &gamma, &sys)?;
    println!("system: {sys}");
    println!("gamma = {}", show(&gamma));
    println!("broadcast = {}", show(&c.r_b));
    println!("access (direct) = {}", show(&c.r_c1));
    println!("access (decode) = {}", show(&c.r_c2));
    println!("total = {}", show(&c.total));
    if gamma == sys.memory_ratio() {
        println!("baseline = {}", show(&baseline_cost(&sys)?));
    }
    Ok(())
}

fn print_result(r: &OptimizationResult<f64>) {
    if r.is_single() {
        println!("support: single level {}", r.i_star);
        println!("gamma = {:.10}", r.gamma_star.0);
        println!("alpha = 1");
    } else {
        println!("support: (i*, j*) = ({}, {})", r.i_star, r.j_star);
        println!("gamma = ({:.10}, {:.10})", r.gamma_star.0, r.gamma_star.1);
        println!("alpha = ({:.10}, {:.10})", r.alpha_star.0, r.alpha_star.1);
    }
    println!("objective = {:.10}", r.objective);
}

fn optimize(args: &SystemArgs, oracle: bool, trace: bool, seed: Option<u64>) -> Outcome {
    let cfg = load_config(args)?;
    let sys = cfg.base_system()?;
    let float = sys.cast::<f64>();
    let mut settings = cfg.solver_settings();
    if let Some(s) = seed {
        settings.seed = s;
    }
    println!("system: {sys}");
    let result = greedy_search(&float, &settings)?;
    print_result(&result);
    match baseline_cost(&sys) {
        Ok(b) => println!("baseline = {}", show(&b)),
        Err(e) => println!("baseline: {e}"),
    }
    println!(
        "iterations: outer {}, solver {}, converged {}",
        result.outer_iterations, result.solver_iterations_total, result.converged
    );
    if trace || cfg.output.trace {
        for t in &result.trace {
            println!(
                "TRACE pair=({},{}) gamma=({:.10},{:.10}) objective={:.10} accepted={}",
                t.pair.0, t.pair.1, t.gamma.0, t.gamma.1, t.objective, t.accepted
            );
        }
    }
    match quantize_design(&result, &sys) {
        Ok(q) => {
            let levels: Vec<String> = q
                .design
                .active()
                .map(|s| format!("(L={}, α={}, γ={})", s.level, format_rational(&s.alpha), format_rational(&s.gamma)))
                .collect();
            println!("quantized: {}", levels.join(" "));
            println!("quantized cost = {} (delta {:.3e})", show(&q.cost), q.delta);
        }
        Err(e) => println!("quantized: {e}"),
    }
    if oracle || cfg.output.oracle {
        let o = brute_force_oracle(&float, &settings)?;
        let gap = (result.objective - o.objective) / o.objective.abs().max(f64::MIN_POSITIVE);
        println!(
            "oracle = {:.10} at ({}, {}), relative gap = {gap:.3e}",
            o.objective, o.i_star, o.j_star
        );
    }
    Ok(())
}

fn run_sweep(
    args: &SystemArgs,
    range: (Option<usize>, Option<usize>),
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
    oracle: bool,
    seed: Option<u64>,
) -> Outcome {
    let mut cfg = load_config(args)?;
    if let Some(lo) = range.0 {
        cfg.sweep.l_min = Some(lo);
    }
    if let Some(hi) = range.1 {
        cfg.sweep.l_max = Some(hi);
    }
    if let Some(s) = seed {
        cfg.solver.seed = Some(s);
    }
    let rows = sweep(&cfg, oracle || cfg.output.oracle)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    match csv.or_else(|| cfg.output.csv.clone()) {
        Some(path) => {
            let file = fs::File::create(&path)
                .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
            write_csv(&rows, io::BufWriter::new(file))?;
            eprintln!("{} rows written to {}", rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&rows, &mut lock)?;
            lock.flush()?;
        }
    }
    if let Some(path) = svg.or_else(|| cfg.output.svg.clone()) {
        fs::write(&path, render_svg(&rows))?;
        eprintln!("plot written to {}", path.display());
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} rows recorded errors", rows.len());
    }
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use entroute::classical::certified_classical_bound;
use entroute::config::{OutputFormat, RunConfig};
use entroute::frontier::compute_frontier;
use entroute::oracle::{oracle_payoff, oracle_payoff_quadrature};
use entroute::output::{certified_bound_json, format_sig, frontier_csv, frontier_summary_json};
use entroute::quantum::{optimize_quantum, QuantumStrategy};
use entroute::sim::{simulate, PolicyKind, PolicySpec};
use entroute::throughput::{avg_throughput, normalized_throughput};
use entroute::Error;

/// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
/// 3 infeasible optimization, 4 invalid certificate.
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;

#[derive(Parser)]
#[command(name = "entroute", version, about = "Pair-routing frontier analysis and simulation")]
struct Cli {
    /// TOML run configuration; defaults reproduce the reference run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file for the primary artifact (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Artifact format.
    #[arg(long, global = true)]
    format: Option<FormatArg>,
    /// Overrides every seeded stage (oracle, quantum, simulation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-p parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep the p-grid: oracle, certified classical, quantum, gaps,
    /// throughput; writes the frontier table plus a JSON summary.
    Frontier,
    /// Certified classical bound at one splitting probability.
    Classical {
        #[arg(long)]
        p: f64,
    },
    /// Optimized quantum strategy at one splitting probability.
    Quantum {
        #[arg(long)]
        p: f64,
    },
    /// Monte Carlo w-threshold payoff at one splitting probability.
    Oracle {
        #[arg(long)]
        p: f64,
    },
    /// Discrete-event simulation of one policy.
    Simulate {
        /// Inline policy: always_split | always_bunch | bernoulli=P |
        /// oracle_threshold=TAU | classical_thresholds=A,B
        #[arg(long, conflicts_with = "policy_file")]
        policy: Option<String>,
        /// JSON strategy file as written by `quantum` (polynomial
        /// coefficients).
        #[arg(long)]
        policy_file: Option<PathBuf>,
        /// Disable load-balanced assignment (bunch everything to one
        /// server, split orientation fixed).
        #[arg(long)]
        imbalanced: bool,
    },
    /// Closed-form throughput table over the p-grid.
    Throughput,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) | Some(Error::InvalidParams(_)) | Some(Error::InvalidInput(_)) => {
            EXIT_CONFIG
        }
        Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
        Some(Error::InconsistentPayoffs { .. }) => 1,
        None => {
            if e.to_string().contains("certificate invalid") {
                EXIT_CERTIFICATE
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(fmt) = cli.format {
        cfg.output.format = match fmt {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if let Some(path) = &cli.output {
        cfg.output.path = Some(path.display().to_string());
    }
    Ok(cfg)
}

fn emit(cfg: &RunConfig, artifact: &str) -> anyhow::Result<()> {
    match &cfg.output.path {
        Some(path) => {
            fs::write(path, artifact).with_context(|| format!("writing {path}"))?;
            eprintln!("wrote {path}");
        }
        None => print!("{artifact}"),
    }
    Ok(())
}

fn sidecar_path(primary: &str, suffix: &str) -> String {
    match primary.rsplit_once('.') {
        Some((stem, _)) => format!("{stem}.{suffix}"),
        None => format!("{primary}.{suffix}"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing worker pool")?;
    }
    let cfg = load_config(&cli)?;
    let params = cfg.params()?;

    match cli.cmd {
        Cmd::Frontier => {
            let res = compute_frontier(&cfg)?;
            let summary = frontier_summary_json(&res);
            match cfg.output.format {
                OutputFormat::Csv => {
                    emit(&cfg, &frontier_csv(&res))?;
                    if let Some(path) = &cfg.output.path {
                        let spath = sidecar_path(path, "summary.json");
                        fs::write(&spath, &summary)
                            .with_context(|| format!("writing {spath}"))?;
                        eprintln!("wrote {spath}");
                    } else {
                        eprintln!("{summary}");
                    }
                }
                OutputFormat::Json => {
                    let v = serde_json::json!({
                        "summary": serde_json::from_str::<serde_json::Value>(&summary)?,
                        "points": res.points,
                        "errors": res.errors,
                    });
                    emit(&cfg, &format!("{}\n", serde_json::to_string_pretty(&v)?))?;
                }
            }
            let s = &res.summary;
            eprintln!(
                "advantage region: {:?} ..= {:?} (grid-limited); max gap {} at p = {}",
                s.advantage_p_lo, s.advantage_p_hi, format_sig(s.max_gap), s.argmax_p
            );
        }
        Cmd::Classical { p } => {
            let bound = certified_classical_bound(&params, p, &cfg.grid_config())?;
            println!(
                "certificate: {}",
                if bound.boundary_ok { "VALID" } else { "INVALID (boundary not dominated)" }
            );
            println!(
                "p = {}  a_grid = {}  upper = {}  width = {}",
                bound.p,
                format_sig(bound.a_grid),
                format_sig(bound.upper),
                format_sig(bound.upper - bound.a_grid)
            );
            println!(
                "theta_star = ({}, {})  L = {}  residual = {}",
                format_sig(bound.theta_star.0),
                format_sig(bound.theta_star.1),
                format_sig(bound.lipschitz),
                format_sig(bound.constraint_residual)
            );
            if cfg.output.path.is_some() {
                emit(&cfg, &certified_bound_json(&bound))?;
            }
            if !bound.boundary_ok {
                return Err(anyhow!("certificate invalid at p = {p}"));
            }
        }
        Cmd::Quantum { p } => {
            let s = optimize_quantum(
                &params,
                p,
                cfg.quantum.degree,
                cfg.quantum.restarts,
                cfg.quantum.seed,
                cfg.quantum.quad_order,
            )?;
            println!(
                "payoff = {}  p_achieved = {}  residual = {}  feasible = {}",
                format_sig(s.payoff),
                format_sig(s.p_achieved),
                format_sig(s.constraint_residual),
                s.feasible
            );
            if cfg.output.path.is_some() {
                emit(&cfg, &format!("{}\n", serde_json::to_string_pretty(&s)?))?;
            }
            if !s.feasible {
                return Err(Error::Infeasible(format!(
                    "no restart met the constraint tolerance at p = {p}"
                ))
                .into());
            }
        }
        Cmd::Oracle { p } => {
            let o = oracle_payoff(&params, p, cfg.oracle.n_samples, cfg.oracle.seed)?;
            let exact = oracle_payoff_quadrature(&params, p)?;
            println!(
                "a_star = {} +- {}  tau = {}  (quadrature cross-check {})",
                format_sig(o.a_star),
                format_sig(o.std_err),
                format_sig(o.tau),
                format_sig(exact)
            );
            if cfg.output.path.is_some() {
                let v = serde_json::json!({
                    "p": o.p, "tau": format_sig(o.tau), "a_star": o.a_star,
                    "std_err": o.std_err, "n_samples": o.n_samples, "seed": o.seed,
                    "a_star_quadrature": exact,
                });
                emit(&cfg, &format!("{}\n", serde_json::to_string_pretty(&v)?))?;
            }
        }
        Cmd::Simulate { policy, policy_file, imbalanced } => {
            let kind = resolve_policy(policy.as_deref(), policy_file.as_deref())?;
            let label = policy_label(&kind);
            let spec = PolicySpec { kind, load_balance_flip: !imbalanced };
            let wm = cfg.warmup_model()?;
            let stats =
                simulate(&params, &spec, &wm, cfg.sim.n_pairs, cfg.sim.discard(), cfg.sim.seed)?;
            println!(
                "mean_wq = {} +- {}  split = {} +- {}",
                format_sig(stats.mean_wq),
                format_sig(stats.wq_std_err),
                format_sig(stats.split_fraction),
                format_sig(stats.split_std_err)
            );
            println!(
                "loads = ({}, {})  throughput/server = {} +- {}",
                format_sig(stats.per_server_load[0]),
                format_sig(stats.per_server_load[1]),
                format_sig(stats.baseline_throughput),
                format_sig(stats.throughput_std_err)
            );
            let csv = format!(
                "policy,n_pairs,mean_wq,wq_se,split_fraction,split_se,load0,load1,throughput,throughput_se,mean_busy,mean_idle\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
                label,
                stats.n_pairs,
                format_sig(stats.mean_wq),
                format_sig(stats.wq_std_err),
                format_sig(stats.split_fraction),
                format_sig(stats.split_std_err),
                format_sig(stats.per_server_load[0]),
                format_sig(stats.per_server_load[1]),
                format_sig(stats.baseline_throughput),
                format_sig(stats.throughput_std_err),
                format_sig(stats.mean_busy),
                format_sig(stats.mean_idle),
            );
            if cfg.output.path.is_some() {
                emit(&cfg, &csv)?;
            }
        }
        Cmd::Throughput => {
            let wm = cfg.warmup_model()?;
            let grid = cfg.p_grid();
            if grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config("throughput p_grid values must lie in [0, 1]".into()).into());
            }
            let mut csv = String::from("p,throughput,throughput_norm\n");
            for &p in &grid {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    format_sig(p),
                    format_sig(avg_throughput(&params, &wm, p)),
                    format_sig(normalized_throughput(&params, &wm, p)),
                ));
            }
            emit(&cfg, &csv)?;
        }
    }
    Ok(())
}

fn resolve_policy(inline: Option<&str>, file: Option<&Path>) -> anyhow::Result<PolicyKind> {
    match (inline, file) {
        (Some(text), None) => parse_policy(text).map_err(Into::into),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading policy file {}", path.display()))?;
            let strategy: QuantumStrategy = serde_json::from_str(&text).map_err(|e| {
                Error::InvalidInput(format!("malformed policy file {}: {e}", path.display()))
            })?;
            Ok(PolicyKind::Quantum {
                coeffs_a: strategy.coeffs_a,
                coeffs_b: strategy.coeffs_b,
            })
        }
        _ => Err(anyhow!("exactly one of --policy or --policy-file is required")),
    }
}

fn parse_policy(text: &str) -> entroute::Result<PolicyKind> {
    let (name, args) = match text.split_once('=') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in policy `{text}`")))
    };
    match (name, args) {
        ("always_split", None) => Ok(PolicyKind::AlwaysSplit),
        ("always_bunch", None) => Ok(PolicyKind::AlwaysBunch),
        ("bernoulli", Some(a)) => Ok(PolicyKind::Bernoulli(num(a)?)),
        ("oracle_threshold", Some(a)) => Ok(PolicyKind::OracleThreshold(num(a)?)),
        ("classical_thresholds", Some(a)) => {
            let parts: Vec<&str> = a.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "classical_thresholds needs two comma-separated values, got `{a}`"
                )));
            }
            Ok(PolicyKind::ClassicalThresholds(num(parts[0])?, num(parts[1])?))
        }
        _ => Err(Error::InvalidInput(format!("unknown policy `{text}`"))),
    }
}

fn policy_label(kind: &PolicyKind) -> String {
    match kind {
        PolicyKind::AlwaysSplit => "always_split".into(),
        PolicyKind::AlwaysBunch => "always_bunch".into(),
        PolicyKind::Bernoulli(p) => format!("bernoulli={p}"),
        PolicyKind::OracleThreshold(t) => format!("oracle_threshold={t}"),
        PolicyKind::ClassicalThresholds(a, b) => format!("classical_thresholds={a};{b}"),
        PolicyKind::Quantum { .. } => "quantum".into(),
    }
}

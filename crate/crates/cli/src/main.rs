use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spinlab::dynamics::{CheckMode, InitSpec};
use spinlab::graph::{
    estimate_lambda2, generate_random_regular, is_one_locally_treelike, sampled_expansion_audit, treelike_radius, Graph,
};
use spinlab::harness::{
    read_records, run_experiment, run_single, summarize, verify_suite, write_records, Exec, ExperimentSpec, RuleKind,
    RuleSpec, SingleRunConfig, Suite,
};
use spinlab::spacetime::StoreSnapshot;

#[derive(Parser)]
#[command(name = "spinlab", version, about = "Glauber dynamics on random regular graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or audit graphs.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Run one chain and write its record and observer rows.
    Run(RunArgs),
    /// Run or summarize a configured sweep.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Exhaustive lemma checks and short paranoid invariant runs.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Audit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Ball radius; defaults to max(1, floor(ln n / (4 ln d))).
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "treelike,lambda2,expansion")]
        checks: Vec<AuditCheck>,
        /// Sampled sets per expansion check.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum AuditCheck {
    Treelike,
    Lambda2,
    Expansion,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Observe {
    Mag,
    Clusters,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "ising")]
    rule: String,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta_p: Option<f64>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value = "all_plus")]
    init: String,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "mag")]
    observers: Vec<Observe>,
    /// Observer sampling interval; defaults to horizon/100.
    #[arg(long)]
    sample_dt: Option<f64>,
    /// Full invariant scan after every event instead of every 1000.
    #[arg(long)]
    paranoid: bool,
    /// JSONL records file; observer CSVs are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Run cells one after another instead of on the worker pool.
        #[arg(long)]
        serial: bool,
    },
    Summarize {
        /// A records file or a directory of `*.jsonl` files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the CSV table; defaults next to the input.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means the command ran but found a failure.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Graph(GraphCommand::Gen { n, d, seed, out }) => {
            let g = generate_random_regular(n, d, seed)?;
            g.write_file(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({} vertices, degree {}, seed {seed})", out.display(), g.n(), g.d());
            Ok(true)
        }
        Command::Graph(GraphCommand::Audit { input, radius, checks, samples, sample_seed }) => {
            let g = Graph::read_file(&input).with_context(|| format!("reading {}", input.display()))?;
            audit(&g, radius, &checks, samples, sample_seed)
        }
        Command::Run(args) => run(args),
        Command::Experiment(ExperimentCommand::Run { spec, serial }) => {
            let spec = ExperimentSpec::read_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let exec = if serial { Exec::Serial } else { Exec::default() };
            let records = run_experiment(&spec, exec)?;
            for r in records.iter().filter_map(|r| r.error.as_ref().map(|e| (r, e))) {
                eprintln!("cell n={} graph_seed={} replica={} failed: {}", r.0.graph.n, r.0.graph.seed, r.0.replica, r.1);
            }
            let summary = summarize(&records)?;
            print!("{}", summary.to_text());
            Ok(!summary.failed)
        }
        Command::Experiment(ExperimentCommand::Summarize { input, csv }) => {
            let records = read_records(&input)?;
            let summary = summarize(&records)?;
            let csv = csv.unwrap_or_else(|| {
                if input.is_dir() {
                    input.join("summary.csv")
                } else {
                    input.with_extension("summary.csv")
                }
            });
            std::fs::write(&csv, summary.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
            print!("{}", summary.to_text());
            println!("table written to {}", csv.display());
            Ok(!summary.failed)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = verify_suite(suite);
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn audit(g: &Graph, radius: Option<usize>, checks: &[AuditCheck], samples: usize, seed: u64) -> Result<bool> {
    let mut ok = true;
    let radius = radius.unwrap_or_else(|| treelike_radius(g.n(), g.d()));
    if checks.contains(&AuditCheck::Treelike) {
        let r = is_one_locally_treelike(g, radius);
        println!(
            "treelike radius={radius}: {} ({} centers with more than one cycle)",
            if r.treelike { "pass" } else { "FAIL" },
            r.violating_centers.len()
        );
        ok &= r.treelike;
    }
    if checks.contains(&AuditCheck::Lambda2) {
        let est = estimate_lambda2(g, 5000, 1e-9);
        let limit = 2.0 * ((g.d() as f64) - 1.0).sqrt() + 0.2;
        let pass = est.value <= limit;
        println!(
            "lambda2 = {:.5} (limit {limit:.5}, {} iterations{}): {}",
            est.value,
            est.iterations,
            if est.converged { "" } else { ", not converged" },
            if pass { "pass" } else { "FAIL" }
        );
        ok &= pass;
    }
    if checks.contains(&AuditCheck::Expansion) {
        let audits = sampled_expansion_audit(g, samples, seed)?;
        for check in ["degree", "majority", "partition"] {
            let mine: Vec<_> = audits.iter().filter(|a| a.check == check).collect();
            let failed = mine.iter().filter(|a| !a.report.pass).count();
            println!(
                "expansion {check}: {} of {} sampled sets failed: {}",
                failed,
                mine.len(),
                if failed == 0 { "pass" } else { "FAIL" }
            );
            ok &= failed == 0;
        }
    }
    Ok(ok)
}

fn rule_kind(name: &str) -> Result<RuleKind> {
    Ok(match name {
        "ising" => RuleKind::Ising,
        "potts_dominating" => RuleKind::PottsDominating,
        "noisy_majority" => RuleKind::NoisyMajority,
        other => bail!("rule `{other}` is not a two-spin rule (ising, potts_dominating, noisy_majority)"),
    })
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn run(args: RunArgs) -> Result<bool> {
    let g = Graph::read_file(&args.graph).with_context(|| format!("reading {}", args.graph.display()))?;
    let rule_spec = RuleSpec { kind: rule_kind(&args.rule)?, beta: args.beta, beta_p: args.beta_p, q: args.q, p: args.p };
    let cfg = SingleRunConfig {
        rule: rule_spec.build(g.d())?,
        rule_spec,
        init: args.init.parse::<InitSpec>()?,
        horizon: args.horizon,
        seed: args.seed,
        magnetization: args.observers.contains(&Observe::Mag),
        clusters: args.observers.contains(&Observe::Clusters),
        check: if args.paranoid { CheckMode::Paranoid } else { CheckMode::Normal },
        sample_dt: args.sample_dt,
    };
    let run = run_single(&g, &cfg)?;
    write_records(&args.out, std::slice::from_ref(&run.record))?;
    if cfg.magnetization {
        let path = sibling(&args.out, "mag.csv");
        let mut text = String::from("t,magnetization\n");
        for (t, m) in &run.magnetization_rows {
            text.push_str(&format!("{t},{m}\n"));
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if cfg.clusters {
        let path = sibling(&args.out, "clusters.csv");
        let mut text = format!("{}\n", StoreSnapshot::CSV_HEADER);
        for row in &run.cluster_rows {
            text.push_str(&row.csv_row());
            text.push('\n');
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&run.record.observables)?);
    let violations = run.record.violation_total();
    if violations > 0 {
        eprintln!("{violations} invariant violations: {:?}", run.record.violations);
    }
    Ok(violations == 0)
}

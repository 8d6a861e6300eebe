//! `netcoord`: search, verify and benchmark sufficient control sets.
//!
//! Exit codes: 0 ok, 1 usage or input error, 2 verification failure,
//! 3 internal invariant violation.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use netcoord::cascade::{
    crusade_witness, is_in_z, is_minimal, is_valid, trim_to_minimal, verify_crusade, ControlSet,
};
use netcoord::chain::{derive_seed, run_search_observed, ChainError, ChainParams, RunRecord, Variant};
use netcoord::experiment::{run_experiment, ExperimentConfig, ExperimentOutput, GraphSource};
use netcoord::graph::{GenSpec, Graph};
use netcoord::oracle::{oracle_report, parse_epsilon};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "netcoord", version, about = "Minimum sufficient control sets in network coordination games")]
struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Rise probability of the search chain, as a decimal or p/q.
    #[arg(long, global = true, default_value = "0.2")]
    epsilon: String,
    /// Step budget as a multiple of the node count.
    #[arg(long, global = true, default_value_t = 100.0)]
    budget_mult: f64,
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Jump)]
    variant: VariantArg,
    /// Shrink reported sets to a minimal subset.
    #[arg(long, global = true)]
    trim: bool,
    /// Check every visited state for membership in the reachable set.
    #[arg(long, global = true)]
    check_z: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (gen, solve) or directory (experiment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Plain,
    Jump,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Plain => Variant::Plain,
            VariantArg::Jump => Variant::Jump,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VerifyMode {
    Valid,
    Minimal,
    Witness,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated graph as an edge list.
    Gen {
        /// e.g. clique:5, path:6, cycle:5, star:3, doublestar, er:20:0.5:seed=7, tree:10:seed=1
        spec: String,
    },
    /// Run the randomized search.
    Solve {
        /// Edge-list file or generator spec.
        graph: String,
        #[arg(long, default_value_t = 1)]
        runs: u32,
    },
    /// Check a candidate control set.
    Verify {
        graph: String,
        /// Comma-separated node ids; empty for the empty set.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        set: Vec<usize>,
        #[arg(long, value_enum, default_value_t = VerifyMode::Valid)]
        mode: VerifyMode,
    },
    /// Exhaustive ground truth for a small graph.
    Oracle { graph: String },
    /// Multi-graph, multi-run experiment.
    Experiment {
        /// TOML experiment configuration; overrides the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "er")]
        family: String,
        #[arg(long, value_delimiter = ',', default_value = "8,10,12")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 5)]
        graphs: usize,
        #[arg(long, default_value_t = 50)]
        runs: u32,
        #[arg(long)]
        no_oracle: bool,
    },
}

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Verification(String),
    Invariant(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("internal invariant violated: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen { spec } => cmd_gen(&cli, spec),
        Command::Solve { graph, runs } => cmd_solve(&cli, graph, *runs),
        Command::Verify { graph, set, mode } => cmd_verify(&cli, graph, set, *mode),
        Command::Oracle { graph } => cmd_oracle(&cli, graph),
        Command::Experiment {
            config,
            family,
            sizes,
            p,
            graphs,
            runs,
            no_oracle,
        } => {
            let config = match config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => {
                    let source = match family.as_str() {
                        "er" => GraphSource::ErdosRenyi {
                            p: *p,
                            sizes: sizes.clone(),
                            graphs_per_size: *graphs,
                        },
                        "tree" => GraphSource::Tree {
                            sizes: sizes.clone(),
                            graphs_per_size: *graphs,
                        },
                        other => return Err(anyhow!("unknown family `{other}` (er or tree)").into()),
                    };
                    ExperimentConfig {
                        source,
                        runs: *runs,
                        epsilon: epsilon_f64(&cli)?,
                        budget_mult: cli.budget_mult,
                        variant: cli.variant.into(),
                        base_seed: cli.seed,
                        oracle: !no_oracle,
                        check_z: cli.check_z,
                    }
                }
            };
            cmd_experiment(&cli, &config)
        }
    }
}

fn epsilon_f64(cli: &Cli) -> anyhow::Result<f64> {
    let (_, eps) = parse_epsilon(&cli.epsilon)
        .ok_or_else(|| anyhow!("cannot parse epsilon `{}`", cli.epsilon))?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(anyhow!("epsilon must lie in (0, 1], got {}", cli.epsilon));
    }
    Ok(eps)
}

/// A file path if it exists, otherwise a generator spec.
fn load_graph(arg: &str) -> anyhow::Result<Graph> {
    let path = Path::new(arg);
    if path.exists() {
        return Graph::read_edge_list(path).with_context(|| format!("reading {arg}"));
    }
    let spec: GenSpec = arg
        .parse()
        .with_context(|| format!("`{arg}` is neither a readable file nor a generator spec"))?;
    Ok(spec.generate()?)
}

fn emit(cli: &Cli, text: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_gen(cli: &Cli, spec: &str) -> Result<(), Failure> {
    let spec: GenSpec = spec.parse().map_err(anyhow::Error::from)?;
    let g = spec.generate().map_err(anyhow::Error::from)?;
    if let Some(seed) = spec.seed() {
        eprintln!("seed: {seed}");
    }
    let mut text = format!("# {spec}\n");
    text.push_str(&g.to_edge_list_string());
    emit(cli, &text)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveReport<'a> {
    run_id: u32,
    /// Reported set: the best visited support, trimmed if requested.
    best_set: &'a ControlSet,
    reported_size: usize,
    trimmed: bool,
    record: &'a RunRecord,
}

fn cmd_solve(cli: &Cli, graph: &str, runs: u32) -> Result<(), Failure> {
    let g = load_graph(graph)?;
    let epsilon = epsilon_f64(cli)?;
    let budget = (cli.budget_mult * g.node_count() as f64).round() as u64;
    let mut out = String::new();
    let mut csv = csv::Writer::from_writer(Vec::new());
    for run in 0..runs {
        let params = ChainParams {
            epsilon,
            budget,
            variant: cli.variant.into(),
            seed: derive_seed(cli.seed, 0, run),
        };
        let record = run_search_observed(&g, &params, |state| {
            if cli.check_z && !is_in_z(&g, &state.x) {
                return Err(ChainError::Invariant {
                    step: state.step,
                    msg: format!("visited state {} is not reachable", state.x),
                });
            }
            Ok(())
        })
        .map_err(|e| Failure::Invariant(e.to_string()))?;
        let mut best = record.best_set();
        if !is_valid(&g, &best) {
            return Err(Failure::Invariant(format!("best set {best} is not valid")));
        }
        if cli.trim {
            best = trim_to_minimal(&g, &best).map_err(|e| Failure::Invariant(e.to_string()))?;
        }
        match cli.format {
            Format::Json => {
                let report = SolveReport {
                    run_id: run,
                    reported_size: best.len(),
                    best_set: &best,
                    trimmed: cli.trim,
                    record: &record,
                };
                out.push_str(&serde_json::to_string(&report).map_err(anyhow::Error::from)?);
                out.push('\n');
            }
            Format::Csv => csv
                .serialize(record.csv_row(u64::from(run)))
                .map_err(anyhow::Error::from)?,
        }
        eprintln!("run {run}: best {} (size {})", best, best.len());
    }
    if cli.format == Format::Csv {
        let bytes = csv.into_inner().map_err(|e| anyhow!("{e}"))?;
        out = String::from_utf8(bytes).map_err(anyhow::Error::from)?;
    }
    emit(cli, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    mode: VerifyMode,
    set: ControlSet,
    verdict: bool,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potentials: Option<Vec<i64>>,
}

fn cmd_verify(cli: &Cli, graph: &str, set: &[usize], mode: VerifyMode) -> Result<(), Failure> {
    let g = load_graph(graph)?;
    let c = ControlSet::for_graph(&g, set.iter().copied()).map_err(anyhow::Error::from)?;
    let valid = is_valid(&g, &c);
    let mut report = VerifyReport {
        mode,
        set: c.clone(),
        verdict: valid,
        valid,
        minimal: None,
        witness: None,
        potentials: None,
    };
    match mode {
        VerifyMode::Valid => {}
        VerifyMode::Minimal => {
            let minimal = is_minimal(&g, &c);
            report.minimal = Some(minimal);
            report.verdict = minimal;
        }
        VerifyMode::Witness => {
            if let Some(w) = crusade_witness(&g, &c) {
                let trace = verify_crusade(&g, &c, &w)
                    .map_err(|e| Failure::Invariant(format!("closure produced a bad witness: {e}")))?;
                report.witness = Some(w.order);
                report.potentials = Some(trace);
            }
        }
    }
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n";
    emit(cli, &text)?;
    if report.verdict {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{c} fails the {mode:?} check")))
    }
}

fn cmd_oracle(cli: &Cli, graph: &str) -> Result<(), Failure> {
    let g = load_graph(graph)?;
    let (eps, _) = parse_epsilon(&cli.epsilon)
        .ok_or_else(|| anyhow!("cannot parse epsilon `{}`", cli.epsilon))?;
    let report = oracle_report(&g, &eps).map_err(anyhow::Error::from)?;
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n";
    emit(cli, &text)?;
    Ok(())
}

fn cmd_experiment(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    let output = match run_experiment(config) {
        Ok(o) => o,
        Err(e @ netcoord::experiment::ExperimentError::Run { .. }) => {
            return Err(Failure::Invariant(e.to_string()))
        }
        Err(e) => return Err(anyhow::Error::from(e).into()),
    };
    let csv = rows_csv(&output)?;
    let summary = serde_json::to_string_pretty(&output.summary).map_err(anyhow::Error::from)? + "\n";
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("runs.csv"), &csv).context("writing runs.csv")?;
            fs::write(dir.join("summary.json"), &summary).context("writing summary.json")?;
        }
        None => {
            io::stdout().write_all(csv.as_bytes()).map_err(anyhow::Error::from)?;
            io::stderr().write_all(summary.as_bytes()).map_err(anyhow::Error::from)?;
        }
    }
    for s in &output.summary.graphs {
        eprintln!(
            "graph {:>3} n={:<3} m={:<4} opt={:<4} best mean {:.2} min {} max {} final mean {:.2}{}",
            s.graph_index,
            s.n,
            s.m,
            s.oracle_optimum.map_or("-".into(), |o| o.to_string()),
            s.mean_best,
            s.min_best,
            s.max_best,
            s.mean_final,
            s.frac_optimal
                .map_or(String::new(), |f| format!(" optimal {:.1}%", 100.0 * f)),
        );
    }
    if output.is_sound() {
        Ok(())
    } else {
        Err(Failure::Invariant(output.summary.violations.join("; ")))
    }
}

fn rows_csv(output: &ExperimentOutput) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &output.rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    Ok(String::from_utf8(bytes)?)
}

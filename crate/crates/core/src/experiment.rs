//! Multi-graph, multi-run search experiments.
//!
//! Graph `g` is generated from seed `derive_seed(base_seed, g, u32::MAX)` and
//! run `r` on it uses `derive_seed(base_seed, g, r)`, so any single run can be
//! replayed without re-running the rest. Runs execute on the rayon pool and
//! results come back in `(graph_index, run_index)` order regardless of
//! scheduling.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{is_in_z, is_valid};
use crate::chain::{derive_seed, run_search_observed, ChainError, ChainParams, Variant};
use crate::graph::{gen_erdos_renyi, gen_random_tree, GenSpec, Graph, GraphError};
use crate::oracle::{exhaustive_optimum, MAX_EXHAUSTIVE_NODES};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph {graph_index}, run {run_index}: {source}")]
    Run {
        graph_index: usize,
        run_index: u32,
        source: ChainError,
    },
}

/// Where the experiment's graphs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    /// `graphs_per_size` independent G(n, p) samples for each size.
    ErdosRenyi {
        p: f64,
        sizes: Vec<usize>,
        graphs_per_size: usize,
    },
    /// Uniform random trees.
    Tree {
        sizes: Vec<usize>,
        graphs_per_size: usize,
    },
    /// Fixed generator specs, e.g. `clique:7`.
    Specs { specs: Vec<String> },
    /// Edge-list files.
    Files { paths: Vec<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: GraphSource,
    pub runs: u32,
    pub epsilon: f64,
    /// Step budget per run is `budget_mult × n`, rounded.
    pub budget_mult: f64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub base_seed: u64,
    /// Compute the exhaustive optimum where the graph is small enough.
    #[serde(default = "yes")]
    pub oracle: bool,
    /// Check every visited state for membership in the reachable set.
    #[serde(default)]
    pub check_z: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: &str| Err(ExperimentError::Config(msg.to_string()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if !(self.budget_mult >= 0.0 && self.budget_mult.is_finite()) {
            return bad("budget multiplier must be a non-negative number");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn budget_for(&self, n: usize) -> u64 {
        (self.budget_mult * n as f64).round() as u64
    }
}

/// A graph participating in an experiment.
#[derive(Clone, Debug)]
pub struct ExperimentGraph {
    pub index: usize,
    pub label: String,
    pub graph: Graph,
}

fn graph_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, index as u32, u32::MAX)
}

pub fn build_graphs(config: &ExperimentConfig) -> Result<Vec<ExperimentGraph>, ExperimentError> {
    let mut out = Vec::new();
    let mut push = |label: String, graph: Graph| {
        out.push(ExperimentGraph {
            index: out.len(),
            label,
            graph,
        })
    };
    match &config.source {
        GraphSource::ErdosRenyi { p, sizes, graphs_per_size } => {
            let mut index = 0;
            for &n in sizes {
                for _ in 0..*graphs_per_size {
                    let seed = graph_seed(config.base_seed, index);
                    let spec = GenSpec::ErdosRenyi { n, p: *p, seed };
                    push(spec.to_string(), gen_erdos_renyi(n, *p, seed)?);
                    index += 1;
                }
            }
        }
        GraphSource::Tree { sizes, graphs_per_size } => {
            let mut index = 0;
            for &n in sizes {
                for _ in 0..*graphs_per_size {
                    let seed = graph_seed(config.base_seed, index);
                    push(
                        GenSpec::Tree { n, seed }.to_string(),
                        gen_random_tree(n, seed)?,
                    );
                    index += 1;
                }
            }
        }
        GraphSource::Specs { specs } => {
            for s in specs {
                let spec: GenSpec = s.parse()?;
                push(spec.to_string(), spec.generate()?);
            }
        }
        GraphSource::Files { paths } => {
            for p in paths {
                push(p.display().to_string(), Graph::read_edge_list(p)?);
            }
        }
    }
    if out.is_empty() {
        return Err(ExperimentError::Config("no graphs selected".into()));
    }
    Ok(out)
}

/// One CSV row per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub graph_index: usize,
    pub run_id: u32,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub variant: Variant,
    pub budget: u64,
    pub best_size: usize,
    pub step_of_best: u64,
    #[serde(skip)]
    pub final_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub graph_index: usize,
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub oracle_optimum: Option<usize>,
    pub mean_best: f64,
    pub min_best: usize,
    pub max_best: usize,
    pub mean_final: f64,
    pub frac_optimal: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub graphs: Vec<GraphSummary>,
    /// Soundness failures; empty on a healthy run.
    pub violations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub summary: ExperimentSummary,
}

impl ExperimentOutput {
    pub fn is_sound(&self) -> bool {
        self.summary.violations.is_empty()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let graphs = build_graphs(config)?;
    run_on_graphs(config, &graphs)
}

pub fn run_on_graphs(
    config: &ExperimentConfig,
    graphs: &[ExperimentGraph],
) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let optima: Vec<Option<usize>> = graphs
        .iter()
        .map(|eg| {
            (config.oracle && eg.graph.node_count() <= MAX_EXHAUSTIVE_NODES)
                .then(|| exhaustive_optimum(&eg.graph, None).ok().map(|o| o.size))
                .flatten()
        })
        .collect();

    let tasks: Vec<(usize, u32)> = graphs
        .iter()
        .flat_map(|eg| (0..config.runs).map(move |r| (eg.index, r)))
        .collect();

    let results: Vec<Result<(ExperimentRow, bool), ExperimentError>> = tasks
        .par_iter()
        .map(|&(gi, ri)| {
            let g = &graphs[gi].graph;
            let params = ChainParams {
                epsilon: config.epsilon,
                budget: config.budget_for(g.node_count()),
                variant: config.variant,
                seed: derive_seed(config.base_seed, gi as u32, ri),
            };
            let record = run_search_observed(g, &params, |state| {
                if config.check_z && !is_in_z(g, &state.x) {
                    return Err(ChainError::Invariant {
                        step: state.step,
                        msg: format!("visited state {} is not reachable", state.x),
                    });
                }
                Ok(())
            })
            .map_err(|source| ExperimentError::Run {
                graph_index: gi,
                run_index: ri,
                source,
            })?;
            let best_valid = is_valid(g, &record.best_set());
            Ok((
                ExperimentRow {
                    graph_index: gi,
                    run_id: ri,
                    n: record.n,
                    m: record.m,
                    seed: params.seed,
                    epsilon: params.epsilon,
                    variant: params.variant,
                    budget: params.budget,
                    best_size: record.best_size,
                    step_of_best: record.step_of_best,
                    final_size: record.final_size,
                },
                best_valid,
            ))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for r in results {
        let (row, best_valid) = r?;
        if !best_valid {
            violations.push(format!(
                "graph {} run {}: best set is not a valid control set",
                row.graph_index, row.run_id
            ));
        }
        if let Some(opt) = optima[row.graph_index] {
            if row.best_size < opt {
                violations.push(format!(
                    "graph {} run {}: best size {} beats the exhaustive optimum {opt}",
                    row.graph_index, row.run_id, row.best_size
                ));
            }
        }
        rows.push(row);
    }

    let summaries = graphs
        .iter()
        .map(|eg| {
            let mine: Vec<&ExperimentRow> =
                rows.iter().filter(|r| r.graph_index == eg.index).collect();
            let k = mine.len() as f64;
            let opt = optima[eg.index];
            GraphSummary {
                graph_index: eg.index,
                label: eg.label.clone(),
                n: eg.graph.node_count(),
                m: eg.graph.edge_count(),
                oracle_optimum: opt,
                mean_best: mine.iter().map(|r| r.best_size as f64).sum::<f64>() / k,
                min_best: mine.iter().map(|r| r.best_size).min().unwrap_or(0),
                max_best: mine.iter().map(|r| r.best_size).max().unwrap_or(0),
                mean_final: mine.iter().map(|r| r.final_size as f64).sum::<f64>() / k,
                frac_optimal: opt
                    .map(|o| mine.iter().filter(|r| r.best_size == o).count() as f64 / k),
            }
        })
        .collect();

    Ok(ExperimentOutput {
        rows,
        summary: ExperimentSummary {
            config: config.clone(),
            graphs: summaries,
            violations,
        },
    })
}

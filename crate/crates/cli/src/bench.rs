//! `fanfire bench`: wall time of one workload across worker counts.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use serde::Deserialize;

use fanfire_core::charts::{run_smoothness, SyntheticOracle, SyntheticSpec};
use fanfire_core::cost::CostMode;
use fanfire_core::runtime::RunConfig;
use fanfire_core::traversal::{run_traversal, GraphOracle};

use crate::{input, read_json, runtime, Failure, Outcome};

/// Random connected graph explored by the traversal workflow.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    #[serde(default)]
    pub extra_edges: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cost_ms: f64,
    #[serde(default)]
    pub cost_mode: CostMode,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Workload {
    Smoothness(SyntheticSpec),
    Traversal(GraphSpec),
}

pub struct Row {
    pub workers: usize,
    pub rep: usize,
    pub wall_ms: f64,
    pub firings: u64,
}

enum Prepared {
    Smoothness(Arc<SyntheticOracle>),
    Traversal(Arc<GraphOracle>),
}

impl Prepared {
    fn new(w: Workload) -> Result<Self, Failure> {
        Ok(match w {
            Workload::Smoothness(spec) => Prepared::Smoothness(Arc::new(SyntheticOracle::new(spec).map_err(input)?)),
            Workload::Traversal(g) => {
                if !(g.cost_ms.is_finite() && g.cost_ms >= 0.0) {
                    return Err(input(anyhow::anyhow!("cost_ms must be a finite nonnegative number")));
                }
                Prepared::Traversal(Arc::new(
                    GraphOracle::random(g.nodes.max(1), g.extra_edges, g.seed)
                        .with_cost(Duration::from_secs_f64(g.cost_ms / 1e3), g.cost_mode),
                ))
            }
        })
    }

    fn measure(&self, config: &RunConfig) -> anyhow::Result<(f64, u64)> {
        let run = match self {
            Prepared::Smoothness(o) => run_smoothness(Arc::clone(o), &[o.root()], config)?.run,
            Prepared::Traversal(o) => run_traversal(Arc::clone(o), config)?.run,
        };
        Ok((run.stats.wall_ns as f64 / 1e6, run.stats.total_firings))
    }
}

/// Speedup of each row against the 1-worker row of the same repetition.
pub fn csv(rows: &[Row]) -> String {
    let mut out = String::from("workers,rep,wall_ms,firings,speedup\n");
    for r in rows {
        let base = rows
            .iter()
            .find(|b| b.workers == 1 && b.rep == r.rep)
            .map_or(f64::NAN, |b| b.wall_ms);
        let speedup = if r.workers == 1 { 1.0 } else { base / r.wall_ms };
        out.push_str(&format!(
            "{},{},{:.3},{},{:.3}\n",
            r.workers, r.rep, r.wall_ms, r.firings, speedup
        ));
    }
    out
}

pub fn run(workload: &Path, workers: &[usize], reps: usize, seed: u64, out: Option<&Path>) -> Outcome {
    let spec: Workload = read_json(workload).map_err(input)?;
    let prepared = Prepared::new(spec)?;
    if workers.contains(&0) {
        return Err(input(anyhow::anyhow!("worker counts must be at least 1")));
    }
    let mut counts = workers.to_vec();
    if !counts.contains(&1) {
        counts.insert(0, 1);
    }
    let mut rows = Vec::new();
    for &w in &counts {
        for rep in 0..reps {
            let config = RunConfig::with_workers(w).seed(seed).trace(false);
            let (wall_ms, firings) = prepared.measure(&config).map_err(runtime)?;
            eprintln!("workers={w} rep={rep} wall_ms={wall_ms:.1}");
            rows.push(Row {
                workers: w,
                rep,
                wall_ms,
                firings,
            });
        }
    }
    let text = csv(&rows);
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime)?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(runtime)?,
    }
    Ok(0)
}

//! Smoothness search over a tree of charts.
//!
//! ```text
//!        +-> [desc] -+                 +-> [sing] -> (o)   terminal
//! (i) ---+           +-> (classified) -+-> [sm]
//!  ^     +-> [Jac] --+                 |
//!  +------------------- [respawn] <----+
//! ```
//!
//! Charts above the codimension threshold are descended into children,
//! charts at the threshold go through the Jacobian criterion. A witness on
//! `o` cancels the run (singular); an empty net at quiescence means every
//! leaf was smooth.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cost::{spend, CostMode};
use crate::petri::{ActionContext, ActionError, Bound, Marking, PetriNet, Place, Registry, TokenValue, Transition};
use crate::poly::{check_curve, plane_curve_singularity, BPoly, CurveError, CurveVerdict};
use crate::runtime::{run, run_deterministic, RunConfig, RunError, RunResult, RunVerdict};

pub const PENDING: &str = "i";
pub const CLASSIFIED: &str = "classified";
pub const OUTPUT: &str = "o";

const CHART_TAG: &str = "chart";
const CLASSIFIED_TAG: &str = "classified";
const WITNESS_TAG: &str = "witness";

/// Prefix of the fatal action message that marks an undecided chart.
pub const INDETERMINATE: &str = "indeterminate";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chart {
    /// Path in the tree: `""` for a root, then dot-separated child indices.
    pub id: String,
    /// Remaining descent depth.
    pub level: u32,
    #[serde(default)]
    pub payload: Value,
}

impl Chart {
    pub fn root(level: u32, payload: Value) -> Self {
        Self {
            id: String::new(),
            level,
            payload,
        }
    }

    /// The `index`-th child, one level down.
    pub fn child(&self, index: usize, payload: Value) -> Self {
        let id = if self.id.is_empty() {
            index.to_string()
        } else {
            format!("{}.{index}", self.id)
        };
        Self {
            id,
            level: self.level.saturating_sub(1),
            payload,
        }
    }

    pub fn depth(&self) -> usize {
        if self.id.is_empty() {
            0
        } else {
            self.id.split('.').count()
        }
    }
}

pub enum Descent {
    Children(Vec<Chart>),
    Singular(Value),
}

pub enum LeafVerdict {
    Smooth,
    Singular(Value),
}

/// The local geometry behind the chart tree. Calls on distinct charts may
/// run concurrently.
pub trait ChartOracle: Send + Sync + 'static {
    fn codim_reached(&self, chart: &Chart) -> bool;
    fn descend(&self, chart: &Chart, ctx: &ActionContext<'_>) -> Result<Descent, ActionError>;
    fn jacobian(&self, chart: &Chart, ctx: &ActionContext<'_>) -> Result<LeafVerdict, ActionError>;

    /// Size of the full tree, when known in advance.
    fn total_charts(&self) -> Option<u64> {
        None
    }
}

/// Payload of a token on `classified`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classified {
    Smooth { chart: String },
    Singular { chart: String, certificate: Value },
    Children { chart: String, children: Vec<Chart> },
}

pub fn build_smoothness_net() -> PetriNet {
    PetriNet::new(
        vec![
            Place::new(PENDING, CHART_TAG),
            Place::new(CLASSIFIED, CLASSIFIED_TAG),
            Place::terminal(OUTPUT, WITNESS_TAG),
        ],
        vec![
            Transition::new("desc")
                .input(PENDING, "c")
                .output(CLASSIFIED, "k")
                .guard("charts.above_codim")
                .action("charts.descend"),
            Transition::new("Jac")
                .input(PENDING, "c")
                .output(CLASSIFIED, "k")
                .guard("charts.at_codim")
                .action("charts.jacobian"),
            Transition::new("sing")
                .input(CLASSIFIED, "k")
                .output(OUTPUT, "w")
                .guard("charts.is_singular")
                .action("charts.witness"),
            Transition::new("sm").input(CLASSIFIED, "k").guard("charts.is_done"),
            Transition::new("respawn")
                .input(CLASSIFIED, "k")
                .output(PENDING, "c")
                .output(CLASSIFIED, "rest")
                .guard("charts.has_children")
                .action("charts.respawn"),
        ],
    )
}

fn chart_of(b: Bound<'_>) -> Result<Chart, String> {
    let v = b.require("c")?;
    serde_json::from_value(v.payload.clone()).map_err(|e| format!("bad chart token: {e}"))
}

fn classified_of(b: Bound<'_>) -> Result<Classified, String> {
    let v = b.require("k")?;
    serde_json::from_value(v.payload.clone()).map_err(|e| format!("bad classified token: {e}"))
}

fn token<T: Serialize>(tag: &str, v: &T) -> Result<TokenValue, ActionError> {
    serde_json::to_value(v)
        .map(|p| TokenValue::new(tag, p))
        .map_err(|e| ActionError::fatal(e.to_string()))
}

/// Guards and actions of [`build_smoothness_net`] backed by `oracle`.
pub fn smoothness_registry<O: ChartOracle>(oracle: Arc<O>) -> Registry {
    let (o1, o2, o3, o4) = (
        Arc::clone(&oracle),
        Arc::clone(&oracle),
        Arc::clone(&oracle),
        oracle,
    );
    Registry::new()
        .guard("charts.above_codim", move |b| Ok(!o1.codim_reached(&chart_of(b)?)))
        .guard("charts.at_codim", move |b| Ok(o2.codim_reached(&chart_of(b)?)))
        .guard("charts.is_singular", |b| {
            Ok(matches!(classified_of(b)?, Classified::Singular { .. }))
        })
        .guard("charts.is_done", |b| {
            Ok(match classified_of(b)? {
                Classified::Smooth { .. } => true,
                Classified::Children { children, .. } => children.is_empty(),
                Classified::Singular { .. } => false,
            })
        })
        .guard("charts.has_children", |b| {
            Ok(matches!(classified_of(b)?, Classified::Children { children, .. } if !children.is_empty()))
        })
        .action("charts.descend", move |b, ctx| {
            let chart = chart_of(b).map_err(ActionError::fatal)?;
            let out = match o3.descend(&chart, ctx)? {
                Descent::Children(children) => Classified::Children {
                    chart: chart.id,
                    children,
                },
                Descent::Singular(certificate) => Classified::Singular {
                    chart: chart.id,
                    certificate,
                },
            };
            Ok(vec![token(CLASSIFIED_TAG, &out)?])
        })
        .action("charts.jacobian", move |b, ctx| {
            let chart = chart_of(b).map_err(ActionError::fatal)?;
            let out = match o4.jacobian(&chart, ctx)? {
                LeafVerdict::Smooth => Classified::Smooth { chart: chart.id },
                LeafVerdict::Singular(certificate) => Classified::Singular {
                    chart: chart.id,
                    certificate,
                },
            };
            Ok(vec![token(CLASSIFIED_TAG, &out)?])
        })
        .action("charts.witness", |b, _| match classified_of(b).map_err(ActionError::fatal)? {
            Classified::Singular { chart, certificate } => Ok(vec![TokenValue::new(
                WITNESS_TAG,
                json!({"chart": chart, "certificate": certificate}),
            )]),
            _ => Err(ActionError::fatal("witness from a non-singular token")),
        })
        .action("charts.respawn", |b, _| match classified_of(b).map_err(ActionError::fatal)? {
            Classified::Children { chart, mut children } if !children.is_empty() => {
                let first = children.remove(0);
                Ok(vec![
                    token(CHART_TAG, &first)?,
                    token(CLASSIFIED_TAG, &Classified::Children { chart, children })?,
                ])
            }
            _ => Err(ActionError::fatal("respawn without children")),
        })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Smooth,
    Singular { chart: String, certificate: Value },
}

#[derive(Debug)]
pub struct SmoothnessReport {
    pub verdict: Verdict,
    /// Oracle calls that completed (`desc` plus `Jac` firings).
    pub charts_evaluated: u64,
    /// Charts placed on `i`, roots included.
    pub charts_spawned: u64,
    /// The oracle's tree size if known, otherwise `charts_spawned`.
    pub charts_total: u64,
    pub run: RunResult,
}

impl SmoothnessReport {
    /// `{verdict, witness?, charts_evaluated, charts_total, wall_ms}`.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "verdict": match self.verdict { Verdict::Smooth => "smooth", Verdict::Singular { .. } => "singular" },
            "charts_evaluated": self.charts_evaluated,
            "charts_spawned": self.charts_spawned,
            "charts_total": self.charts_total,
            "wall_ms": self.run.stats.wall_ns as f64 / 1e6,
        });
        if let Verdict::Singular { chart, certificate } = &self.verdict {
            v["witness"] = json!({"chart": chart, "certificate": certificate});
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum SmoothnessError {
    #[error("chart {chart:?} is undecided: {message}")]
    Indeterminate { chart: String, message: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("malformed chart token: {0}")]
    Encoding(#[from] serde_json::Error),
}

pub fn smoothness_initial_marking(roots: &[Chart]) -> Result<Marking, serde_json::Error> {
    let mut m = Marking::new();
    for r in roots {
        m.put(PENDING, TokenValue::new(CHART_TAG, serde_json::to_value(r)?));
    }
    Ok(m)
}

fn assemble<O: ChartOracle>(
    oracle: &O,
    roots: &[Chart],
    initial: &Marking,
    outcome: Result<RunResult, RunError>,
) -> Result<SmoothnessReport, SmoothnessError> {
    let run = match outcome {
        Ok(r) => r,
        Err(RunError::Faulted { binding, message }) if message.starts_with(INDETERMINATE) => {
            let chart = binding
                .tokens
                .first()
                .and_then(|id| initial.get(*id).map(|(_, v)| v.payload.clone()))
                .and_then(|p| p.get("id").and_then(Value::as_str).map(String::from))
                .unwrap_or_default();
            return Err(SmoothnessError::Indeterminate { chart, message });
        }
        Err(e) => return Err(e.into()),
    };
    let verdict = match &run.verdict {
        RunVerdict::Cancelled { .. } => {
            let (_, w) = run
                .final_marking
                .tokens(OUTPUT)
                .next()
                .expect("cancelled runs hold a witness");
            serde_json::from_value(json!({
                "verdict": "singular",
                "chart": w.payload["chart"],
                "certificate": w.payload["certificate"],
            }))?
        }
        RunVerdict::Completed => Verdict::Smooth,
    };
    let stats = &run.stats;
    let charts_evaluated = stats.firings_of("desc") + stats.firings_of("Jac");
    let charts_spawned = roots.len() as u64 + stats.firings_of("respawn");
    Ok(SmoothnessReport {
        verdict,
        charts_evaluated,
        charts_spawned,
        charts_total: oracle.total_charts().unwrap_or(charts_spawned),
        run,
    })
}

/// Runs the chart search from `roots`. Singular as soon as any oracle call
/// yields a witness; smooth once everything has been classified.
pub fn run_smoothness<O: ChartOracle>(
    oracle: Arc<O>,
    roots: &[Chart],
    config: &RunConfig,
) -> Result<SmoothnessReport, SmoothnessError> {
    let net = build_smoothness_net();
    let initial = smoothness_initial_marking(roots)?;
    let outcome = run(&net, &smoothness_registry(Arc::clone(&oracle)), &initial, config);
    assemble(oracle.as_ref(), roots, &initial, outcome)
}

/// [`run_smoothness`] on the calling thread with a reproducible trace.
pub fn run_smoothness_deterministic<O: ChartOracle>(
    oracle: Arc<O>,
    roots: &[Chart],
    config: &RunConfig,
) -> Result<SmoothnessReport, SmoothnessError> {
    let net = build_smoothness_net();
    let initial = smoothness_initial_marking(roots)?;
    let outcome = run_deterministic(&net, &smoothness_registry(Arc::clone(&oracle)), &initial, config);
    assemble(oracle.as_ref(), roots, &initial, outcome)
}

/// Synthetic tree description (the JSON oracle spec).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub branching: u32,
    pub depth: u32,
    /// Mean cost per oracle call; each chart draws from `[0.5, 1.5)` times this.
    #[serde(default)]
    pub cost_ms: f64,
    #[serde(default)]
    pub singular_leaves: Vec<String>,
    #[serde(default)]
    pub cost_mode: CostMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntheticError {
    #[error("branching must be at least 1")]
    Branching,
    #[error("cost_ms must be a finite nonnegative number")]
    Cost,
    #[error("{0:?} is not a leaf of the tree")]
    NotALeaf(String),
}

/// Full `branching`-ary tree of the given depth; leaves listed in the spec
/// are singular. Every call spends the chart's cost.
#[derive(Clone, Debug)]
pub struct SyntheticOracle {
    spec: SyntheticSpec,
    singular: BTreeSet<String>,
}

fn is_leaf_path(path: &str, branching: u32, depth: u32) -> bool {
    if depth == 0 {
        return path.is_empty();
    }
    let parts: Vec<&str> = path.split('.').collect();
    parts.len() == depth as usize
        && parts
            .iter()
            .all(|p| p.parse::<u32>().is_ok_and(|i| i < branching && i.to_string() == *p))
}

fn path_hash(seed: u64, path: &str) -> u64 {
    path.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticSpec) -> Result<Self, SyntheticError> {
        if spec.branching == 0 {
            return Err(SyntheticError::Branching);
        }
        if !(spec.cost_ms.is_finite() && spec.cost_ms >= 0.0) {
            return Err(SyntheticError::Cost);
        }
        for leaf in &spec.singular_leaves {
            if !is_leaf_path(leaf, spec.branching, spec.depth) {
                return Err(SyntheticError::NotALeaf(leaf.clone()));
            }
        }
        let singular = spec.singular_leaves.iter().cloned().collect();
        Ok(Self { spec, singular })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn root(&self) -> Chart {
        Chart::root(self.spec.depth, Value::Null)
    }

    /// Cost of the call on `chart`, fixed by the seed.
    pub fn cost(&self, chart: &Chart) -> Duration {
        if self.spec.cost_ms == 0.0 {
            return Duration::ZERO;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(path_hash(self.spec.seed, &chart.id));
        let factor: f64 = rng.gen_range(0.5..1.5);
        Duration::from_secs_f64(self.spec.cost_ms * factor / 1e3)
    }

    fn pay(&self, chart: &Chart, ctx: &ActionContext<'_>) -> Result<(), ActionError> {
        if spend(self.cost(chart), self.spec.cost_mode, ctx) {
            Ok(())
        } else {
            Err(ActionError::transient("cancelled"))
        }
    }

    /// All leaf paths in left-to-right order.
    pub fn leaves(&self) -> Vec<String> {
        let mut paths = vec![String::new()];
        for _ in 0..self.spec.depth {
            paths = paths
                .iter()
                .flat_map(|p| {
                    (0..self.spec.branching).map(move |i| {
                        if p.is_empty() {
                            i.to_string()
                        } else {
                            format!("{p}.{i}")
                        }
                    })
                })
                .collect();
        }
        paths
    }
}

/// A uniformly random leaf path of the full `branching`-ary tree.
pub fn random_leaf(branching: u32, depth: u32, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..depth)
        .map(|_| rng.gen_range(0..branching).to_string())
        .collect::<Vec<_>>()
        .join(".")
}

/// Number of nodes of the full tree: `(b^(d+1) - 1) / (b - 1)`.
pub fn tree_size(branching: u32, depth: u32) -> u64 {
    (0..=depth).map(|k| u64::from(branching).pow(k)).sum()
}

impl ChartOracle for SyntheticOracle {
    fn codim_reached(&self, chart: &Chart) -> bool {
        chart.level == 0
    }

    fn descend(&self, chart: &Chart, ctx: &ActionContext<'_>) -> Result<Descent, ActionError> {
        self.pay(chart, ctx)?;
        Ok(Descent::Children(
            (0..self.spec.branching as usize)
                .map(|i| chart.child(i, Value::Null))
                .collect(),
        ))
    }

    fn jacobian(&self, chart: &Chart, ctx: &ActionContext<'_>) -> Result<LeafVerdict, ActionError> {
        self.pay(chart, ctx)?;
        Ok(if self.singular.contains(&chart.id) {
            LeafVerdict::Singular(json!({"leaf": chart.id}))
        } else {
            LeafVerdict::Smooth
        })
    }

    fn total_charts(&self) -> Option<u64> {
        Some(tree_size(self.spec.branching, self.spec.depth))
    }
}

/// Leaf-only oracle deciding singularity of a plane curve `f = 0`.
#[derive(Clone, Debug)]
pub struct PlaneCurveOracle {
    f: BPoly,
}

impl PlaneCurveOracle {
    /// Rejects the zero polynomial and non-squarefree input.
    pub fn new(f: BPoly) -> Result<Self, CurveError> {
        check_curve(&f)?;
        Ok(Self { f })
    }

    pub fn polynomial(&self) -> &BPoly {
        &self.f
    }

    pub fn root(&self) -> Chart {
        Chart::root(0, json!({"f": self.f.to_string()}))
    }
}

pub fn plane_curve_oracle(f: BPoly) -> Result<PlaneCurveOracle, CurveError> {
    PlaneCurveOracle::new(f)
}

impl ChartOracle for PlaneCurveOracle {
    fn codim_reached(&self, _: &Chart) -> bool {
        true
    }

    fn descend(&self, _: &Chart, _: &ActionContext<'_>) -> Result<Descent, ActionError> {
        Err(ActionError::fatal("plane-curve charts are leaves"))
    }

    fn jacobian(&self, _: &Chart, _: &ActionContext<'_>) -> Result<LeafVerdict, ActionError> {
        match plane_curve_singularity(&self.f) {
            Ok(CurveVerdict::Smooth) => Ok(LeafVerdict::Smooth),
            Ok(CurveVerdict::Singular(cert)) => Ok(LeafVerdict::Singular(
                serde_json::to_value(cert).map_err(|e| ActionError::fatal(e.to_string()))?,
            )),
            Ok(CurveVerdict::Indeterminate { candidates, shear }) => Err(ActionError::fatal(format!(
                "{INDETERMINATE}: singular candidates are roots of {} (shear {shear}) with no rational root certifying",
                candidates
            ))),
            Err(e) => Err(ActionError::fatal(e.to_string())),
        }
    }

    fn total_charts(&self) -> Option<u64> {
        Some(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::validate;
    use crate::runtime::replay;
    use std::collections::HashMap;

    fn spec(b: u32, d: u32, singular: &[&str]) -> SyntheticSpec {
        SyntheticSpec {
            seed: 1,
            branching: b,
            depth: d,
            cost_ms: 0.0,
            singular_leaves: singular.iter().map(|s| s.to_string()).collect(),
            cost_mode: CostMode::Busy,
        }
    }

    fn synthetic(b: u32, d: u32, singular: &[&str], workers: usize) -> SmoothnessReport {
        let o = SyntheticOracle::new(spec(b, d, singular)).unwrap();
        let root = o.root();
        run_smoothness(Arc::new(o), &[root], &RunConfig::with_workers(workers)).unwrap()
    }

    #[test]
    fn net_is_valid() {
        assert_eq!(validate(&build_smoothness_net()), Ok(()));
    }

    #[test]
    fn chart_paths() {
        let r = Chart::root(3, Value::Null);
        let c = r.child(0, Value::Null).child(2, Value::Null);
        assert_eq!((c.id.as_str(), c.level, c.depth()), ("0.2", 1, 2));
        assert_eq!(r.depth(), 0);
    }

    #[test]
    fn single_smooth_leaf() {
        let rep = synthetic(1, 0, &[], 1);
        assert_eq!(rep.verdict, Verdict::Smooth);
        assert_eq!(rep.run.stats.firings_of("Jac"), 1);
        assert_eq!(rep.run.verdict, RunVerdict::Completed);
        assert!(rep.run.final_marking.is_empty());
    }

    #[test]
    fn singular_root() {
        let rep = synthetic(1, 0, &[""], 2);
        assert_eq!(
            rep.verdict,
            Verdict::Singular {
                chart: String::new(),
                certificate: json!({"leaf": ""})
            }
        );
        assert_eq!(rep.run.verdict, RunVerdict::Cancelled { place: OUTPUT.into() });
    }

    #[test]
    fn three_smooth_children_firing_count() {
        let o = SyntheticOracle::new(spec(3, 1, &[])).unwrap();
        let root = o.root();
        let rep = run_smoothness_deterministic(Arc::new(o), &[root], &RunConfig::with_workers(1)).unwrap();
        let s = &rep.run.stats;
        assert_eq!(
            [s.firings_of("desc"), s.firings_of("respawn"), s.firings_of("Jac"), s.firings_of("sm")],
            [1, 3, 3, 4]
        );
        assert_eq!(s.total_firings, 11);
        assert_eq!(rep.run.trace.as_ref().unwrap().len(), 11);
        assert_eq!(rep.charts_evaluated, 4);
    }

    #[test]
    fn full_tree_is_evaluated_when_smooth() {
        let rep = synthetic(4, 3, &[], 3);
        assert_eq!(rep.verdict, Verdict::Smooth);
        assert_eq!(rep.charts_evaluated, (4u64.pow(4) - 1) / 3);
        assert_eq!(rep.charts_spawned, rep.charts_total);
    }

    #[test]
    fn leftmost_singular_leaf() {
        let rep = synthetic(2, 3, &["0.0.0"], 2);
        let Verdict::Singular { chart, .. } = &rep.verdict else {
            panic!("expected singular");
        };
        assert_eq!(chart, "0.0.0");
        assert_eq!(Chart { id: chart.clone(), level: 0, payload: Value::Null }.depth(), 3);
    }

    #[test]
    fn empty_roots_are_smooth() {
        let o = SyntheticOracle::new(spec(2, 2, &[])).unwrap();
        let rep = run_smoothness(Arc::new(o), &[], &RunConfig::with_workers(2)).unwrap();
        assert_eq!(rep.verdict, Verdict::Smooth);
        assert_eq!(rep.charts_evaluated, 0);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(SyntheticOracle::new(spec(0, 1, &[])).unwrap_err(), SyntheticError::Branching);
        for bad in ["0.0", "2.0.0", "0.0.0.0", "", "x.0.0"] {
            assert!(SyntheticOracle::new(spec(2, 3, &[bad])).is_err(), "{bad}");
        }
        assert!(SyntheticOracle::new(spec(1, 0, &[""])).is_ok());
        let text = r#"{"seed":3,"branching":2,"depth":2,"cost_ms":0.5,"singular_leaves":["1.1"]}"#;
        let s: SyntheticSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s.cost_mode, CostMode::Busy);
        assert!(SyntheticOracle::new(s).is_ok());
    }

    #[test]
    fn oracle_is_deterministic() {
        let a = SyntheticOracle::new(SyntheticSpec { cost_ms: 2.0, ..spec(3, 2, &[]) }).unwrap();
        let b = SyntheticOracle::new(SyntheticSpec { cost_ms: 2.0, ..spec(3, 2, &[]) }).unwrap();
        let c = Chart::root(2, Value::Null).child(1, Value::Null);
        assert_eq!(a.cost(&c), b.cost(&c));
        assert_eq!(a.leaves(), b.leaves());
        assert_eq!(a.leaves().len(), 9);
        assert_eq!(random_leaf(3, 4, 7), random_leaf(3, 4, 7));
        assert!(is_leaf_path(&random_leaf(3, 4, 7), 3, 4));
    }

    /// Direct recursive evaluation of the tree.
    fn has_singular_leaf(o: &SyntheticOracle, chart: &Chart) -> bool {
        let flag = std::sync::atomic::AtomicBool::new(false);
        let ctx = ActionContext::new(&flag);
        if o.codim_reached(chart) {
            matches!(o.jacobian(chart, &ctx).unwrap(), LeafVerdict::Singular(_))
        } else {
            match o.descend(chart, &ctx).unwrap() {
                Descent::Children(cs) => cs.iter().any(|c| has_singular_leaf(o, c)),
                Descent::Singular(_) => true,
            }
        }
    }

    #[test]
    fn verdicts_match_direct_enumeration_on_small_trees() {
        for b in 1..=2u32 {
            for d in 0..=3u32 {
                let leaves = SyntheticOracle::new(spec(b, d, &[])).unwrap().leaves();
                let mut sets: Vec<Vec<&str>> = vec![vec![]];
                sets.extend(leaves.iter().map(|l| vec![l.as_str()]));
                if leaves.len() > 1 {
                    sets.push(vec![leaves[0].as_str(), leaves[leaves.len() - 1].as_str()]);
                }
                for set in sets {
                    let o = SyntheticOracle::new(spec(b, d, &set)).unwrap();
                    let want = has_singular_leaf(&o, &o.root());
                    let rep = synthetic(b, d, &set, 2);
                    assert_eq!(matches!(rep.verdict, Verdict::Singular { .. }), want, "b={b} d={d} {set:?}");
                }
            }
        }
    }

    #[test]
    fn smooth_verdict_has_a_jacobian_firing_per_leaf() {
        let o = SyntheticOracle::new(spec(2, 3, &[])).unwrap();
        let root = o.root();
        let rep = run_smoothness(Arc::new(o.clone()), std::slice::from_ref(&root), &RunConfig::with_workers(4)).unwrap();
        let initial = smoothness_initial_marking(&[root]).unwrap();
        let trace = rep.run.trace.as_ref().unwrap();
        let mut charts: HashMap<u64, String> = initial
            .tokens(PENDING)
            .map(|(id, v)| (id, v.payload["id"].as_str().unwrap().to_string()))
            .collect();
        let mut jac = BTreeSet::new();
        for rec in trace {
            if rec.transition == "Jac" {
                jac.insert(charts[&rec.consumed[0]].clone());
            }
            for p in &rec.produced {
                if p.place == PENDING {
                    charts.insert(p.id, p.token.payload["id"].as_str().unwrap().to_string());
                }
            }
        }
        assert_eq!(jac, o.leaves().into_iter().collect());
        assert_eq!(
            replay(&build_smoothness_net(), &initial, trace).unwrap().canonical(),
            rep.run.final_marking.canonical()
        );
    }

    #[test]
    fn singular_run_replays() {
        let o = SyntheticOracle::new(spec(3, 3, &["2.1.0"])).unwrap();
        let root = o.root();
        let rep = run_smoothness(Arc::new(o), std::slice::from_ref(&root), &RunConfig::with_workers(3)).unwrap();
        let initial = smoothness_initial_marking(&[root]).unwrap();
        let trace = rep.run.trace.as_ref().unwrap();
        assert_eq!(
            replay(&build_smoothness_net(), &initial, trace).unwrap().canonical(),
            rep.run.final_marking.canonical()
        );
        assert_eq!(trace.last().unwrap().transition, "sing");
    }

    fn curve(terms: &[(i64, u32, u32)]) -> SmoothnessReport {
        let o = plane_curve_oracle(BPoly::from_terms(terms)).unwrap();
        let root = o.root();
        run_smoothness(Arc::new(o), &[root], &RunConfig::with_workers(1)).unwrap()
    }

    #[test]
    fn plane_curves() {
        assert_eq!(curve(&[(1, 2, 0), (1, 0, 2), (-1, 0, 0)]).verdict, Verdict::Smooth);
        let cusp = curve(&[(1, 0, 2), (-1, 3, 0)]);
        let Verdict::Singular { certificate, .. } = cusp.verdict else {
            panic!("cusp is singular");
        };
        assert_eq!(certificate["a"], "0");
        assert_eq!(curve(&[(1, 0, 2), (-1, 3, 0), (-1, 1, 0)]).verdict, Verdict::Smooth);
        assert!(matches!(
            plane_curve_oracle(BPoly::from_terms(&[(1, 0, 2)])),
            Err(CurveError::NotSquarefree)
        ));
    }

    #[test]
    fn indeterminate_is_an_error() {
        // y^2 = (x^2 - 2)^2
        let f = BPoly::from_terms(&[(1, 0, 2), (-1, 4, 0), (4, 2, 0), (-4, 0, 0)]);
        let o = plane_curve_oracle(f).unwrap();
        let root = o.root();
        let err = run_smoothness(Arc::new(o), &[root], &RunConfig::with_workers(1)).unwrap_err();
        assert!(matches!(err, SmoothnessError::Indeterminate { ref chart, .. } if chart.is_empty()), "{err}");
    }

    #[test]
    fn report_json() {
        let rep = synthetic(2, 1, &["1"], 1);
        let v = rep.to_json();
        assert_eq!(v["verdict"], "singular");
        assert_eq!(v["witness"]["chart"], "1");
        assert_eq!(v["charts_total"], 3);
    }
}

//! Parallel closure of a state graph: expand states on workers, deduplicate
//! against a single registry token, repeat until nothing new turns up.
//!
//! ```text
//! (frontier) -> [expand] -> (candidates) -> [dedup] <-> (registry)
//!      ^                                       |
//!      +------------- [split] <---------- (spawn) -> [split_done]
//! ```
//!
//! `expand` runs the oracle and canonicalizes its output, so all heavy work
//! happens in parallel. `dedup` holds the registry token and therefore runs
//! one at a time; it emits the genuinely new states as one list token which
//! `split` peels onto the frontier one by one.

use std::collections::{BTreeSet, VecDeque};
use std::hash::Hash;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::arrangement::{Arrangement, Chamber};
use crate::cost::{spend, CostMode};
use crate::petri::{ActionError, Bound, Marking, PetriNet, Place, Registry, TokenValue, Transition};
use crate::runtime::{run, run_deterministic, RunConfig, RunError, RunResult};
use crate::sign::SignVector;
use crate::symmetry::Group;

pub const FRONTIER: &str = "frontier";
pub const CANDIDATES: &str = "candidates";
pub const REGISTRY: &str = "registry";
pub const SPAWN: &str = "spawn";

const STATE_TAG: &str = "state";
const BATCH_TAG: &str = "batch";
const REGISTRY_TAG: &str = "registry";
const LIST_TAG: &str = "list";

/// A state graph explored by [`run_traversal`].
pub trait ExpansionOracle: Send + Sync + 'static {
    type State: Clone + Eq + Hash + Ord + Serialize + DeserializeOwned + Send + Sync;

    fn start(&self) -> Self::State;

    /// Successors of `state`; may return any number of states.
    fn expand(&self, state: &Self::State) -> Result<Vec<Self::State>, ActionError>;

    /// Representative of the class of `state`. Must be idempotent.
    fn canonicalize(&self, state: &Self::State) -> Self::State {
        state.clone()
    }

    fn orbit_size(&self, _state: &Self::State) -> usize {
        1
    }
}

/// Payload of the registry token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryState<S: Ord> {
    pub known: BTreeSet<S>,
    /// Frontier tokens not yet expanded.
    pub pending: u64,
}

pub fn build_traversal_net() -> PetriNet {
    PetriNet::new(
        vec![
            Place::new(FRONTIER, STATE_TAG),
            Place::new(CANDIDATES, BATCH_TAG),
            Place::new(REGISTRY, REGISTRY_TAG),
            Place::new(SPAWN, LIST_TAG),
        ],
        vec![
            Transition::new("expand")
                .input(FRONTIER, "s")
                .output(CANDIDATES, "batch")
                .action("traversal.expand"),
            Transition::new("dedup")
                .input(CANDIDATES, "batch")
                .input(REGISTRY, "reg")
                .output(REGISTRY, "reg2")
                .output(SPAWN, "new")
                .action("traversal.dedup"),
            Transition::new("split")
                .input(SPAWN, "list")
                .output(FRONTIER, "head")
                .output(SPAWN, "rest")
                .guard("traversal.nonempty")
                .action("traversal.split"),
            Transition::new("split_done")
                .input(SPAWN, "list")
                .guard("traversal.empty"),
        ],
    )
}

fn decode<T: DeserializeOwned>(bound: Bound<'_>, var: &str) -> Result<T, ActionError> {
    let v = bound.require(var).map_err(ActionError::fatal)?;
    serde_json::from_value(v.payload.clone())
        .map_err(|e| ActionError::fatal(format!("`{var}`: {e}")))
}

fn encode<T: Serialize>(tag: &str, value: &T) -> Result<TokenValue, ActionError> {
    serde_json::to_value(value)
        .map(|v| TokenValue::new(tag, v))
        .map_err(|e| ActionError::fatal(e.to_string()))
}

fn list_len(bound: Bound<'_>) -> Result<usize, String> {
    bound
        .require("list")?
        .payload
        .as_array()
        .map(Vec::len)
        .ok_or_else(|| "spawn token is not a list".to_string())
}

/// Guards and actions of [`build_traversal_net`] backed by `oracle`.
pub fn traversal_registry<O: ExpansionOracle>(oracle: Arc<O>) -> Registry {
    let expand_oracle = Arc::clone(&oracle);
    Registry::new()
        .action("traversal.expand", move |b, _| {
            let s: O::State = decode(b, "s")?;
            let batch: BTreeSet<O::State> = expand_oracle
                .expand(&s)?
                .iter()
                .map(|t| expand_oracle.canonicalize(t))
                .collect();
            Ok(vec![encode(BATCH_TAG, &batch)?])
        })
        .action("traversal.dedup", |b, _| {
            let batch: Vec<O::State> = decode(b, "batch")?;
            let mut reg: RegistryState<O::State> = decode(b, "reg")?;
            let fresh: Vec<O::State> = batch
                .into_iter()
                .filter(|s| reg.known.insert(s.clone()))
                .collect();
            reg.pending = reg.pending - 1 + fresh.len() as u64;
            Ok(vec![encode(REGISTRY_TAG, &reg)?, encode(LIST_TAG, &fresh)?])
        })
        .action("traversal.split", |b, _| {
            let list = b.require("list").map_err(ActionError::fatal)?;
            let Value::Array(items) = &list.payload else {
                return Err(ActionError::fatal("spawn token is not a list"));
            };
            let (head, rest) = items
                .split_first()
                .ok_or_else(|| ActionError::fatal("split on an empty list"))?;
            Ok(vec![
                TokenValue::new(STATE_TAG, head.clone()),
                TokenValue::new(LIST_TAG, Value::Array(rest.to_vec())),
            ])
        })
        .guard("traversal.nonempty", |b| Ok(list_len(b)? > 0))
        .guard("traversal.empty", |b| Ok(list_len(b)? == 0))
}

/// Frontier holding the canonical start, registry knowing only it.
pub fn traversal_initial_marking<O: ExpansionOracle>(oracle: &O) -> Result<Marking, TraversalError> {
    let start = oracle.canonicalize(&oracle.start());
    let reg = RegistryState {
        known: BTreeSet::from([start.clone()]),
        pending: 1,
    };
    let mut m = Marking::new();
    m.put(FRONTIER, TokenValue::new(STATE_TAG, serde_json::to_value(&start)?));
    m.put(REGISTRY, TokenValue::new(REGISTRY_TAG, serde_json::to_value(&reg)?));
    Ok(m)
}

#[derive(Debug, Error)]
pub enum TraversalError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("state serialization failed: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("final marking holds {0} registry tokens, expected one")]
    Registry(usize),
}

#[derive(Debug)]
pub struct TraversalOutcome<S> {
    /// Canonical states with orbit sizes, sorted by serialized state.
    pub states: Vec<(S, usize)>,
    pub run: RunResult,
}

fn finish<O: ExpansionOracle>(
    oracle: &O,
    run: RunResult,
) -> Result<TraversalOutcome<O::State>, TraversalError> {
    let regs: Vec<&TokenValue> = run.final_marking.tokens(REGISTRY).map(|(_, v)| v).collect();
    if regs.len() != 1 {
        return Err(TraversalError::Registry(regs.len()));
    }
    let reg: RegistryState<O::State> = serde_json::from_value(regs[0].payload.clone())?;
    let mut states: Vec<(String, O::State)> = reg
        .known
        .into_iter()
        .map(|s| Ok((serde_json::to_string(&s)?, s)))
        .collect::<Result<_, serde_json::Error>>()?;
    states.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(TraversalOutcome {
        states: states
            .into_iter()
            .map(|(_, s)| {
                let n = oracle.orbit_size(&s);
                (s, n)
            })
            .collect(),
        run,
    })
}

/// Explores everything reachable from `oracle.start()` up to canonical form.
pub fn run_traversal<O: ExpansionOracle>(
    oracle: Arc<O>,
    config: &RunConfig,
) -> Result<TraversalOutcome<O::State>, TraversalError> {
    let net = build_traversal_net();
    let initial = traversal_initial_marking(oracle.as_ref())?;
    let result = run(&net, &traversal_registry(Arc::clone(&oracle)), &initial, config)?;
    finish(oracle.as_ref(), result)
}

/// [`run_traversal`] on the calling thread with a reproducible trace.
pub fn run_traversal_deterministic<O: ExpansionOracle>(
    oracle: Arc<O>,
    config: &RunConfig,
) -> Result<TraversalOutcome<O::State>, TraversalError> {
    let net = build_traversal_net();
    let initial = traversal_initial_marking(oracle.as_ref())?;
    let result = run_deterministic(&net, &traversal_registry(Arc::clone(&oracle)), &initial, config)?;
    finish(oracle.as_ref(), result)
}

/// Chambers of an arrangement, adjacent across walls, optionally up to a
/// symmetry group acting on sign vectors.
#[derive(Clone, Debug)]
pub struct ChamberOracle {
    arrangement: Arrangement,
    group: Option<Group>,
    start: Option<SignVector>,
}

impl ChamberOracle {
    pub fn new(arrangement: Arrangement, group: Option<Group>) -> Self {
        Self {
            arrangement,
            group,
            start: None,
        }
    }

    /// Starts from the chamber containing `point` instead of the default.
    pub fn starting_at(mut self, point: &[crate::Rational]) -> Result<Self, String> {
        let s = self
            .arrangement
            .sign_of_point(point)
            .map_err(|e| e.to_string())?;
        if !s.is_full() {
            return Err(format!("point lies on a hyperplane (signs {s})"));
        }
        self.start = Some(s);
        Ok(self)
    }

    pub fn arrangement(&self) -> &Arrangement {
        &self.arrangement
    }

    pub fn group(&self) -> Option<&Group> {
        self.group.as_ref()
    }

    /// A chamber with an interior point, for reporting.
    pub fn chamber(&self, signs: &SignVector) -> Option<Chamber> {
        let witness = self.arrangement.feasible(signs).ok()??;
        Some(Chamber {
            signs: signs.clone(),
            witness,
        })
    }
}

impl ExpansionOracle for ChamberOracle {
    type State = SignVector;

    fn start(&self) -> SignVector {
        self.start
            .clone()
            .unwrap_or_else(|| self.arrangement.starting_chamber().signs)
    }

    fn expand(&self, state: &SignVector) -> Result<Vec<SignVector>, ActionError> {
        let chamber = self
            .chamber(state)
            .ok_or_else(|| ActionError::fatal(format!("{state} is not a chamber")))?;
        let neighbors = self
            .arrangement
            .neighbors(&chamber)
            .map_err(|e| ActionError::fatal(e.to_string()))?;
        Ok(neighbors.into_iter().map(|(_, c)| c.signs).collect())
    }

    fn canonicalize(&self, state: &SignVector) -> SignVector {
        match &self.group {
            Some(g) => g.canonical(state).expect("group degree checked at construction"),
            None => state.clone(),
        }
    }

    fn orbit_size(&self, state: &SignVector) -> usize {
        match &self.group {
            Some(g) => g.orbit_size(state).expect("group degree checked at construction"),
            None => 1,
        }
    }
}

/// Explicit graph on states `0..n`, optionally with a per-expansion cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphOracle {
    pub adjacency: Vec<Vec<u64>>,
    pub start: u64,
    pub cost: Duration,
    pub cost_mode: CostMode,
}

impl GraphOracle {
    pub fn new(adjacency: Vec<Vec<u64>>, start: u64) -> Self {
        Self {
            adjacency,
            start,
            cost: Duration::ZERO,
            cost_mode: CostMode::Busy,
        }
    }

    pub fn with_cost(mut self, cost: Duration, mode: CostMode) -> Self {
        self.cost = cost;
        self.cost_mode = mode;
        self
    }

    /// `0 - 1 - … - (n-1)`, starting at 0.
    pub fn path(n: usize) -> Self {
        let adjacency = (0..n as u64)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n as u64 {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        Self::new(adjacency, 0)
    }

    /// Connected random graph: a random spanning tree plus `extra` edges.
    pub fn random(n: usize, extra: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adjacency = vec![Vec::new(); n];
        let edge = |a: usize, b: usize, adj: &mut Vec<Vec<u64>>| {
            if a != b && !adj[a].contains(&(b as u64)) {
                adj[a].push(b as u64);
                adj[b].push(a as u64);
            }
        };
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edge(u, v, &mut adjacency);
        }
        if n > 1 {
            for _ in 0..extra {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                edge(a, b, &mut adjacency);
            }
        }
        Self::new(adjacency, 0)
    }

    /// Directed tree where every internal state has `fanout` children.
    pub fn tree(fanout: usize, depth: u32) -> Self {
        let mut adjacency = vec![Vec::new()];
        let mut level = vec![0u64];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &v in &level {
                for _ in 0..fanout {
                    let c = adjacency.len() as u64;
                    adjacency.push(Vec::new());
                    adjacency[v as usize].push(c);
                    next.push(c);
                }
            }
            level = next;
        }
        Self::new(adjacency, 0)
    }

    /// States reachable from the start by sequential breadth-first search.
    pub fn reachable(&self) -> BTreeSet<u64> {
        bfs_closure(self)
    }
}

impl ExpansionOracle for GraphOracle {
    type State = u64;

    fn start(&self) -> u64 {
        self.start
    }

    fn expand(&self, state: &u64) -> Result<Vec<u64>, ActionError> {
        let next = self
            .adjacency
            .get(*state as usize)
            .cloned()
            .ok_or_else(|| ActionError::fatal(format!("unknown state {state}")))?;
        if !self.cost.is_zero() {
            let flag = std::sync::atomic::AtomicBool::new(false);
            spend(self.cost, self.cost_mode, &crate::petri::ActionContext::new(&flag));
        }
        Ok(next)
    }
}

/// Sequential breadth-first closure of an oracle, up to canonical form.
pub fn bfs_closure<O: ExpansionOracle>(oracle: &O) -> BTreeSet<O::State> {
    let start = oracle.canonicalize(&oracle.start());
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for t in oracle.expand(&s).expect("oracle failed during closure") {
            let c = oracle.canonicalize(&t);
            if seen.insert(c.clone()) {
                queue.push_back(c);
            }
        }
    }
    seen
}

/// Serialized form of a result list: `[{state, orbit_size}]`.
pub fn result_json<S: Serialize>(states: &[(S, usize)]) -> Value {
    Value::Array(
        states
            .iter()
            .map(|(s, n)| json!({"state": s, "orbit_size": n}))
            .collect(),
    )
}

//! Parallel execution of a Petri net on a pool of worker threads.
//!
//! The coordinator owns the marking. It picks enabled bindings, consumes their
//! tokens atomically and sends the bound values to a worker. Workers run the
//! transition's action and send the outputs back; the coordinator commits them
//! as one firing. The run ends when nothing is enabled and nothing is in
//! flight (`Completed`), or as soon as a token lands on a terminal place
//! (`Cancelled`). Abandoned in-flight work is discarded and its input tokens
//! are returned to the final marking, so the trace alone reproduces it.

mod scheduler;
pub mod trace;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::petri::{
    check_outputs, ActionContext, ActionError, Binding, Bound, FailureKind, FireError, Marking,
    MarkingTypeError, PetriNet, Registry, StructuralError, TokenId, TokenValue,
};

use scheduler::{binding_hash, EnabledIndex};
pub use trace::{read_jsonl, replay, replay_with_guards, write_jsonl, FiringRecord, ProducedToken, ReplayError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub workers: usize,
    /// Keys scheduler tie-breaking and failure injection.
    pub seed: u64,
    pub trace_enabled: bool,
    /// Probability that an action invocation is treated as failed.
    pub failure_injection: f64,
    pub max_retries: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, usize::from),
            seed: 0,
            trace_enabled: true,
            failure_injection: 0.0,
            max_retries: 3,
        }
    }
}

impl RunConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers,
            ..Self::default()
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn failures(mut self, probability: f64, max_retries: u32) -> Self {
        self.failure_injection = probability;
        self.max_retries = max_retries;
        self
    }

    pub fn trace(mut self, enabled: bool) -> Self {
        self.trace_enabled = enabled;
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.workers == 0 {
            return Err(RunError::InvalidConfig("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_injection) {
            return Err(RunError::InvalidConfig(format!(
                "failure_injection {} is outside [0, 1]",
                self.failure_injection
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RunVerdict {
    Completed,
    Cancelled { place: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub per_transition: BTreeMap<String, u64>,
    pub total_firings: u64,
    pub wall_ns: u64,
    pub worker_busy_ns: Vec<u64>,
    /// Action invocations that failed (injected or real) and were retried.
    pub failed_attempts: u64,
    /// In-flight actions whose results were discarded at cancellation.
    pub abandoned: u64,
}

impl RunStats {
    pub fn firings_of(&self, transition: &str) -> u64 {
        self.per_transition.get(transition).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_marking: Marking,
    pub verdict: RunVerdict,
    pub trace: Option<Vec<FiringRecord>>,
    pub stats: RunStats,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("net is malformed: {}", join(.0))]
    InvalidNet(Vec<StructuralError>),
    #[error("registry cannot resolve: {}", .0.join(", "))]
    Unresolved(Vec<String>),
    #[error(transparent)]
    InvalidMarking(#[from] MarkingTypeError),
    #[error("transition `{}` faulted on tokens {:?}: {message}", .binding.transition, .binding.tokens)]
    Faulted { binding: Binding, message: String },
    #[error("transition `{}` produced invalid outputs: {source}", .binding.transition)]
    BadOutputs {
        binding: Binding,
        #[source]
        source: FireError,
    },
}

fn join(errs: &[StructuralError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Work item sent to a worker: the transition and copies of its bound tokens.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispatchMessage {
    pub job: u64,
    pub transition: String,
    pub action: Option<String>,
    pub bound: Vec<(String, TokenValue)>,
}

/// A worker's answer: the outputs (one per output arc) or a failure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultMessage {
    pub job: u64,
    pub worker: usize,
    pub outcome: Result<Vec<TokenValue>, ActionError>,
    pub duration_ns: u64,
}

fn execute(registry: &Registry, msg: &DispatchMessage, ctx: &ActionContext<'_>) -> Result<Vec<TokenValue>, ActionError> {
    let Some(name) = &msg.action else {
        return Ok(Vec::new());
    };
    let Some(action) = registry.get_action(name) else {
        return Err(ActionError::fatal(format!("unknown action `{name}`")));
    };
    match catch_unwind(AssertUnwindSafe(|| action(Bound::new(&msg.bound), ctx))) {
        Ok(r) => r,
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "action panicked".into());
            Err(ActionError::fatal(format!("panic: {text}")))
        }
    }
}

fn worker_loop(
    worker: usize,
    registry: &Registry,
    cancel: &AtomicBool,
    jobs: Receiver<DispatchMessage>,
    results: Sender<ResultMessage>,
) {
    let ctx = ActionContext::new(cancel);
    while let Ok(msg) = jobs.recv() {
        let start = Instant::now();
        let outcome = if cancel.load(Ordering::Relaxed) {
            Err(ActionError::transient("run cancelled"))
        } else {
            execute(registry, &msg, &ctx)
        };
        let reply = ResultMessage {
            job: msg.job,
            worker,
            outcome,
            duration_ns: start.elapsed().as_nanos() as u64,
        };
        if results.send(reply).is_err() {
            break;
        }
    }
}

/// Where dispatched work goes: a thread pool, or the calling thread.
trait Transport {
    fn send(&mut self, msg: DispatchMessage);
    fn recv(&mut self) -> ResultMessage;
}

struct Pool {
    jobs: Sender<DispatchMessage>,
    results: Receiver<ResultMessage>,
}

impl Transport for Pool {
    fn send(&mut self, msg: DispatchMessage) {
        self.jobs.send(msg).expect("workers outlive the coordinator loop");
    }

    fn recv(&mut self) -> ResultMessage {
        self.results.recv().expect("workers outlive the coordinator loop")
    }
}

/// Runs each action synchronously; durations are not recorded so traces are
/// byte-for-byte reproducible.
struct Inline<'a> {
    registry: &'a Registry,
    cancel: &'a AtomicBool,
    done: VecDeque<ResultMessage>,
    busy_ns: u64,
}

impl Transport for Inline<'_> {
    fn send(&mut self, msg: DispatchMessage) {
        let ctx = ActionContext::new(self.cancel);
        let start = Instant::now();
        let outcome = execute(self.registry, &msg, &ctx);
        self.busy_ns += start.elapsed().as_nanos() as u64;
        self.done.push_back(ResultMessage {
            job: msg.job,
            worker: 0,
            outcome,
            duration_ns: 0,
        });
    }

    fn recv(&mut self) -> ResultMessage {
        self.done.pop_front().expect("a job is in flight")
    }
}

struct InFlight {
    binding: Binding,
    consumed: Vec<(String, TokenValue)>,
}

struct Coordinator<'a> {
    net: &'a PetriNet,
    registry: &'a Registry,
    config: &'a RunConfig,
    cancel: &'a AtomicBool,
    marking: Marking,
    epochs: HashMap<TokenId, u64>,
    index: EnabledIndex,
    in_flight: HashMap<u64, InFlight>,
    next_job: u64,
    failures: HashMap<Binding, u32>,
    trace: Vec<FiringRecord>,
    stats: RunStats,
    verdict: Option<RunVerdict>,
}

impl<'a> Coordinator<'a> {
    fn new(
        net: &'a PetriNet,
        registry: &'a Registry,
        initial: &Marking,
        config: &'a RunConfig,
        cancel: &'a AtomicBool,
    ) -> Result<Self, RunError> {
        let mut c = Self {
            net,
            registry,
            config,
            cancel,
            marking: initial.clone(),
            epochs: HashMap::new(),
            index: EnabledIndex::new(net, config.seed),
            in_flight: HashMap::new(),
            next_job: 0,
            failures: HashMap::new(),
            trace: Vec::new(),
            stats: RunStats {
                worker_busy_ns: vec![0; config.workers],
                ..RunStats::default()
            },
            verdict: None,
        };
        for p in net.places.iter().filter(|p| p.terminal) {
            if c.marking.count(&p.id) > 0 {
                c.verdict = Some(RunVerdict::Cancelled { place: p.id.clone() });
                return Ok(c);
            }
        }
        let ids: Vec<TokenId> = c
            .marking
            .places()
            .flat_map(|p| c.marking.tokens(p).map(|(id, _)| id))
            .collect();
        c.add_tokens(&ids)?;
        Ok(c)
    }

    fn add_tokens(&mut self, ids: &[TokenId]) -> Result<(), RunError> {
        self.index
            .add_tokens(self.net, self.registry, &self.marking, &self.epochs, ids)
            .map_err(|f| RunError::Faulted {
                binding: f.binding,
                message: format!("guard failed: {}", f.message),
            })
    }

    fn drive<T: Transport>(&mut self, transport: &mut T) -> Result<(), RunError> {
        while self.verdict.is_none() {
            while self.in_flight.len() < self.config.workers {
                let Some(binding) = self.index.pop() else { break };
                self.dispatch(binding, transport);
            }
            if self.in_flight.is_empty() {
                self.verdict = Some(RunVerdict::Completed);
                break;
            }
            let msg = transport.recv();
            self.handle(msg)?;
        }
        Ok(())
    }

    fn dispatch<T: Transport>(&mut self, binding: Binding, transport: &mut T) {
        let t = self
            .net
            .transition(&binding.transition)
            .expect("index only holds known transitions");
        let consumed: Vec<(String, TokenValue)> = binding
            .tokens
            .iter()
            .map(|id| {
                let (place, value) = self.marking.remove(*id).expect("indexed tokens are present");
                (place, value)
            })
            .collect();
        let bound = t
            .inputs
            .iter()
            .zip(&consumed)
            .map(|(arc, (_, v))| (arc.var.clone(), v.clone()))
            .collect();
        let job = self.next_job;
        self.next_job += 1;
        let msg = DispatchMessage {
            job,
            transition: t.id.clone(),
            action: t.action.clone(),
            bound,
        };
        self.in_flight.insert(job, InFlight { binding, consumed });
        transport.send(msg);
    }

    fn injected_failure(&self, binding: &Binding, has_action: bool) -> bool {
        if !has_action || self.config.failure_injection <= 0.0 {
            return false;
        }
        let attempt = self.failures.get(binding).copied().unwrap_or(0);
        let h = binding_hash(
            self.config.seed,
            0xfa11 + u64::from(attempt),
            &binding.transition,
            &binding.tokens,
        );
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        u < self.config.failure_injection
    }

    fn restore(&mut self, flight: InFlight) -> Vec<TokenId> {
        let ids = flight.binding.tokens.clone();
        for (id, (place, value)) in ids.iter().zip(flight.consumed) {
            self.marking.insert_with_id(&place, *id, value);
        }
        ids
    }

    fn handle(&mut self, msg: ResultMessage) -> Result<(), RunError> {
        let flight = self
            .in_flight
            .remove(&msg.job)
            .expect("results answer dispatched jobs");
        if let Some(busy) = self.stats.worker_busy_ns.get_mut(msg.worker) {
            *busy += msg.duration_ns;
        }
        let has_action = self
            .net
            .transition(&flight.binding.transition)
            .is_some_and(|t| t.action.is_some());
        let outcome = match msg.outcome {
            Ok(_) if self.injected_failure(&flight.binding, has_action) => {
                Err(ActionError::transient("injected failure"))
            }
            other => other,
        };
        match outcome {
            Ok(outputs) => self.commit(flight, outputs, msg.worker, msg.duration_ns),
            Err(err) => {
                let attempts = self.failures.entry(flight.binding.clone()).or_insert(0);
                *attempts += 1;
                let give_up = err.kind == FailureKind::Fatal || *attempts > self.config.max_retries;
                self.stats.failed_attempts += 1;
                let binding = flight.binding.clone();
                let restored = self.restore(flight);
                if give_up {
                    return Err(RunError::Faulted {
                        binding,
                        message: err.message,
                    });
                }
                self.add_tokens(&restored)
            }
        }
    }

    fn commit(
        &mut self,
        flight: InFlight,
        outputs: Vec<TokenValue>,
        worker: usize,
        duration_ns: u64,
    ) -> Result<(), RunError> {
        let t = self
            .net
            .transition(&flight.binding.transition)
            .expect("known transition");
        if let Err(source) = check_outputs(self.net, t, &outputs) {
            let binding = flight.binding.clone();
            self.restore(flight);
            return Err(RunError::BadOutputs { binding, source });
        }
        let seq = self.stats.total_firings;
        for id in &flight.binding.tokens {
            self.epochs.remove(id);
        }
        let mut produced = Vec::with_capacity(outputs.len());
        let mut fresh = Vec::with_capacity(outputs.len());
        let mut hit_terminal = None;
        for (arc, token) in t.outputs.iter().zip(outputs) {
            let id = self.marking.put(&arc.place, token.clone());
            self.epochs.insert(id, seq + 1);
            fresh.push(id);
            if self.net.place(&arc.place).is_some_and(|p| p.terminal) && hit_terminal.is_none() {
                hit_terminal = Some(arc.place.clone());
            }
            if self.config.trace_enabled {
                produced.push(ProducedToken {
                    id,
                    place: arc.place.clone(),
                    token,
                });
            }
        }
        self.stats.total_firings += 1;
        *self.stats.per_transition.entry(t.id.clone()).or_insert(0) += 1;
        if self.config.trace_enabled {
            self.trace.push(FiringRecord {
                seq,
                transition: t.id.clone(),
                consumed: flight.binding.tokens,
                produced,
                worker,
                duration_ns,
            });
        }
        if let Some(place) = hit_terminal {
            self.cancel.store(true, Ordering::Relaxed);
            self.verdict = Some(RunVerdict::Cancelled { place });
            return Ok(());
        }
        self.add_tokens(&fresh)
    }

    fn finish(mut self, started: Instant) -> RunResult {
        let abandoned: Vec<InFlight> = self.in_flight.drain().map(|(_, f)| f).collect();
        self.stats.abandoned = abandoned.len() as u64;
        for f in abandoned {
            self.restore(f);
        }
        self.stats.wall_ns = started.elapsed().as_nanos() as u64;
        RunResult {
            final_marking: self.marking,
            verdict: self.verdict.unwrap_or(RunVerdict::Completed),
            trace: self.config.trace_enabled.then_some(self.trace),
            stats: self.stats,
        }
    }
}

fn preflight(
    net: &PetriNet,
    registry: &Registry,
    initial: &Marking,
    config: &RunConfig,
) -> Result<(), RunError> {
    config.validate()?;
    net.validate().map_err(RunError::InvalidNet)?;
    let missing = registry.missing_for(net);
    if !missing.is_empty() {
        return Err(RunError::Unresolved(missing));
    }
    net.check_marking(initial)?;
    Ok(())
}

/// Executes `net` from `initial` on `config.workers` worker threads.
pub fn run(
    net: &PetriNet,
    registry: &Registry,
    initial: &Marking,
    config: &RunConfig,
) -> Result<RunResult, RunError> {
    preflight(net, registry, initial, config)?;
    let started = Instant::now();
    let cancel = AtomicBool::new(false);
    let mut coord = Coordinator::new(net, registry, initial, config, &cancel)?;
    if coord.verdict.is_some() {
        return Ok(coord.finish(started));
    }
    let outcome = std::thread::scope(|scope| {
        let (job_tx, job_rx) = unbounded::<DispatchMessage>();
        let (res_tx, res_rx) = unbounded::<ResultMessage>();
        for w in 0..config.workers {
            let jobs = job_rx.clone();
            let results = res_tx.clone();
            let cancel = &cancel;
            scope.spawn(move || worker_loop(w, registry, cancel, jobs, results));
        }
        drop(job_rx);
        drop(res_tx);
        let mut pool = Pool {
            jobs: job_tx,
            results: res_rx,
        };
        let outcome = coord.drive(&mut pool);
        cancel.store(true, Ordering::Relaxed);
        outcome
    });
    outcome?;
    Ok(coord.finish(started))
}

/// Single-threaded run whose trace depends only on the inputs and the seed.
/// Requires `config.workers == 1`; recorded durations are zero.
pub fn run_deterministic(
    net: &PetriNet,
    registry: &Registry,
    initial: &Marking,
    config: &RunConfig,
) -> Result<RunResult, RunError> {
    if config.workers != 1 {
        return Err(RunError::InvalidConfig(
            "deterministic runs use exactly one worker".into(),
        ));
    }
    preflight(net, registry, initial, config)?;
    let started = Instant::now();
    let cancel = AtomicBool::new(false);
    let mut coord = Coordinator::new(net, registry, initial, config, &cancel)?;
    let mut inline = Inline {
        registry,
        cancel: &cancel,
        done: VecDeque::new(),
        busy_ns: 0,
    };
    coord.drive(&mut inline)?;
    coord.stats.worker_busy_ns = vec![inline.busy_ns];
    Ok(coord.finish(started))
}

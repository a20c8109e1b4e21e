use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::petri::{
    bind_values, check_binding, check_outputs, Binding, Bound, Marking, PetriNet, Registry,
    TokenId, TokenValue,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducedToken {
    pub id: TokenId,
    pub place: String,
    #[serde(flatten)]
    pub token: TokenValue,
}

/// One committed firing. Field order is part of the trace file format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringRecord {
    pub seq: u64,
    pub transition: String,
    pub consumed: Vec<TokenId>,
    pub produced: Vec<ProducedToken>,
    pub worker: usize,
    pub duration_ns: u64,
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, records: &[FiringRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a JSON-lines trace. Blank lines are skipped; line numbers are 1-based.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<FiringRecord>, TraceIoError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| TraceIoError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("trace corrupt at seq {seq}: {reason}")]
pub struct ReplayError {
    pub seq: u64,
    pub reason: String,
}

/// Re-applies recorded firings from `initial` without running any action.
/// Checks sequence continuity, token presence, arc arity and types, fresh id
/// allocation, and that nothing fires after a terminal place was reached.
pub fn replay(
    net: &PetriNet,
    initial: &Marking,
    trace: &[FiringRecord],
) -> Result<Marking, ReplayError> {
    replay_inner(net, None, initial, trace)
}

/// Like [`replay`], additionally re-evaluating each transition's guard.
pub fn replay_with_guards(
    net: &PetriNet,
    registry: &Registry,
    initial: &Marking,
    trace: &[FiringRecord],
) -> Result<Marking, ReplayError> {
    replay_inner(net, Some(registry), initial, trace)
}

fn replay_inner(
    net: &PetriNet,
    registry: Option<&Registry>,
    initial: &Marking,
    trace: &[FiringRecord],
) -> Result<Marking, ReplayError> {
    let terminal: BTreeSet<&str> = net
        .places
        .iter()
        .filter(|p| p.terminal)
        .map(|p| p.id.as_str())
        .collect();
    let mut marking = initial.clone();
    let mut halted = terminal.iter().any(|p| marking.count(p) > 0);

    for (pos, rec) in trace.iter().enumerate() {
        let corrupt = |reason: String| ReplayError {
            seq: rec.seq,
            reason,
        };
        if rec.seq != pos as u64 {
            return Err(corrupt(format!("expected seq {pos}")));
        }
        if halted {
            return Err(corrupt("firing after a terminal place was marked".into()));
        }
        let binding = Binding {
            transition: rec.transition.clone(),
            tokens: rec.consumed.clone(),
        };
        check_binding(net, &marking, &binding).map_err(|e| corrupt(e.to_string()))?;
        let t = net.transition(&rec.transition).expect("checked by check_binding");
        if let Some(reg) = registry {
            let values = bind_values(t, &marking, &rec.consumed).expect("tokens present");
            match reg.eval_guard(t.guard.as_deref(), Bound::new(&values)) {
                Ok(true) => {}
                Ok(false) => return Err(corrupt("guard rejects the recorded binding".into())),
                Err(e) => return Err(corrupt(format!("guard failed: {e}"))),
            }
        }
        let outputs: Vec<TokenValue> = rec.produced.iter().map(|p| p.token.clone()).collect();
        check_outputs(net, t, &outputs).map_err(|e| corrupt(e.to_string()))?;
        for (arc, p) in t.outputs.iter().zip(&rec.produced) {
            if arc.place != p.place {
                return Err(corrupt(format!(
                    "produced token on `{}`, arc leads to `{}`",
                    p.place, arc.place
                )));
            }
        }
        for id in &rec.consumed {
            marking.remove(*id);
        }
        for p in &rec.produced {
            let id = marking.put(&p.place, p.token.clone());
            if id != p.id {
                return Err(corrupt(format!("produced id {} but replay allocated {id}", p.id)));
            }
            if terminal.contains(p.place.as_str()) {
                halted = true;
            }
        }
    }
    Ok(marking)
}

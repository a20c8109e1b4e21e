use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PetriNet, TokenValue};

/// Input tokens bound to a transition's variables, in input-arc order.
#[derive(Debug, Clone, Copy)]
pub struct Bound<'a> {
    entries: &'a [(String, TokenValue)],
}

impl<'a> Bound<'a> {
    pub fn new(entries: &'a [(String, TokenValue)]) -> Self {
        Self { entries }
    }

    pub fn get(&self, var: &str) -> Option<&'a TokenValue> {
        self.entries
            .iter()
            .find(|(name, _)| name == var)
            .map(|(_, value)| value)
    }

    /// Like `get`, but a missing variable becomes an error message.
    pub fn require(&self, var: &str) -> Result<&'a TokenValue, String> {
        self.get(var)
            .ok_or_else(|| format!("variable `{var}` is not bound"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a str, &'a TokenValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Execution context handed to actions.
pub struct ActionContext<'a> {
    cancelled: &'a AtomicBool,
}

impl<'a> ActionContext<'a> {
    pub fn new(cancelled: &'a AtomicBool) -> Self {
        Self { cancelled }
    }

    /// True once the run has been cancelled; long actions may poll this and bail out.
    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The invocation may succeed if retried.
    Transient,
    /// Retrying cannot help; the run aborts immediately.
    Fatal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionError {
    pub kind: FailureKind,
    pub message: String,
}

impl ActionError {
    pub fn transient(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Transient,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Fatal,
            message: message.into(),
        }
    }
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} action failure: {}", self.kind, self.message)
    }
}

impl std::error::Error for ActionError {}

pub type GuardFn = dyn Fn(Bound<'_>) -> Result<bool, String> + Send + Sync;
pub type ActionFn =
    dyn Fn(Bound<'_>, &ActionContext<'_>) -> Result<Vec<TokenValue>, ActionError> + Send + Sync;

/// Named guards and actions. Nets refer to these by name only, so a net
/// definition stays plain data.
#[derive(Clone, Default)]
pub struct Registry {
    guards: HashMap<String, Arc<GuardFn>>,
    actions: HashMap<String, Arc<ActionFn>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut guards: Vec<_> = self.guards.keys().collect();
        let mut actions: Vec<_> = self.actions.keys().collect();
        guards.sort();
        actions.sort();
        f.debug_struct("Registry")
            .field("guards", &guards)
            .field("actions", &actions)
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn guard<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(Bound<'_>) -> Result<bool, String> + Send + Sync + 'static,
    {
        self.guards.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn action<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(Bound<'_>, &ActionContext<'_>) -> Result<Vec<TokenValue>, ActionError>
            + Send
            + Sync
            + 'static,
    {
        self.actions.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn get_guard(&self, name: &str) -> Option<&GuardFn> {
        self.guards.get(name).map(|g| g.as_ref())
    }

    pub fn get_action(&self, name: &str) -> Option<&ActionFn> {
        self.actions.get(name).map(|a| a.as_ref())
    }

    /// Evaluates a transition guard; an absent guard is `true`.
    pub fn eval_guard(&self, guard: Option<&str>, bound: Bound<'_>) -> Result<bool, String> {
        match guard {
            None => Ok(true),
            Some(name) => match self.get_guard(name) {
                Some(g) => g(bound),
                None => Err(format!("unknown guard `{name}`")),
            },
        }
    }

    /// Names referenced by `net` that this registry cannot resolve.
    pub fn missing_for(&self, net: &PetriNet) -> Vec<String> {
        let mut missing = Vec::new();
        for t in &net.transitions {
            if let Some(g) = &t.guard {
                if !self.guards.contains_key(g) {
                    missing.push(format!("guard `{g}` (transition `{}`)", t.id));
                }
            }
            if let Some(a) = &t.action {
                if !self.actions.contains_key(a) {
                    missing.push(format!("action `{a}` (transition `{}`)", t.id));
                }
            }
        }
        missing
    }
}

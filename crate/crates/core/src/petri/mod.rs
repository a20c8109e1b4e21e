//! Colored Petri nets: places, guarded transitions, markings and the
//! single-step firing rule.
//!
//! Every arc carries exactly one token. A transition is enabled when each of
//! its input places offers a token (all distinct) and its guard accepts the
//! bound tokens. Which of several candidate tokens gets consumed is not decided
//! here; `enabled` reports all combinations and the scheduler picks.

mod marking;
mod registry;

pub mod fork_join;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use marking::{Marking, TokenId, TokenValue};
pub use registry::{
    ActionContext, ActionError, ActionFn, Bound, FailureKind, GuardFn, Registry,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    /// Type tag every token on this place must carry.
    pub accepts: String,
    #[serde(default)]
    pub terminal: bool,
}

impl Place {
    pub fn new(id: &str, accepts: &str) -> Self {
        Self {
            id: id.to_string(),
            accepts: accepts.to_string(),
            terminal: false,
        }
    }

    pub fn terminal(id: &str, accepts: &str) -> Self {
        Self {
            terminal: true,
            ..Self::new(id, accepts)
        }
    }
}

/// One arc endpoint: a place and the variable its token binds to.
/// Serialized as a `[place, var]` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct NetArc {
    pub place: String,
    pub var: String,
}

impl From<(String, String)> for NetArc {
    fn from((place, var): (String, String)) -> Self {
        Self { place, var }
    }
}

impl From<NetArc> for (String, String) {
    fn from(a: NetArc) -> Self {
        (a.place, a.var)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    pub inputs: Vec<NetArc>,
    pub outputs: Vec<NetArc>,
    /// Registry name of the guard; `None` always fires.
    #[serde(default)]
    pub guard: Option<String>,
    /// Registry name of the action; may only be `None` when there are no outputs.
    #[serde(default)]
    pub action: Option<String>,
}

impl Transition {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            guard: None,
            action: None,
        }
    }

    pub fn input(mut self, place: &str, var: &str) -> Self {
        self.inputs.push(NetArc {
            place: place.into(),
            var: var.into(),
        });
        self
    }

    pub fn output(mut self, place: &str, var: &str) -> Self {
        self.outputs.push(NetArc {
            place: place.into(),
            var: var.into(),
        });
        self
    }

    pub fn guard(mut self, name: &str) -> Self {
        self.guard = Some(name.into());
        self
    }

    pub fn action(mut self, name: &str) -> Self {
        self.action = Some(name.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetriNet {
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("duplicate place id `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("transition `{transition}` references unknown place `{place}`")]
    UnknownPlace { transition: String, place: String },
    #[error("transition `{transition}` binds variable `{var}` more than once")]
    DuplicateVariable { transition: String, var: String },
    #[error("terminal place `{place}` has an outgoing arc to transition `{transition}`")]
    TerminalHasOutgoing { place: String, transition: String },
    #[error("transition `{0}` has output arcs but no action")]
    MissingAction(String),
}

/// A choice of one token per input arc of a transition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Binding {
    pub transition: String,
    pub tokens: Vec<TokenId>,
}

/// Result of `enabled`: the firable bindings plus those whose guard failed to evaluate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Enabled {
    pub bindings: Vec<Binding>,
    pub faulted: Vec<(Binding, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("stale binding for `{transition}`: {reason}")]
    StaleBinding { transition: String, reason: String },
    #[error("type error on place `{place}`: expected `{expected}`, got `{found}`")]
    TypeMismatch {
        place: String,
        expected: String,
        found: String,
    },
    #[error("transition `{transition}` expects {expected} outputs, got {found}")]
    OutputArity {
        transition: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("token {id} on place `{place}` has tag `{found}`, place accepts `{expected}`")]
pub struct MarkingTypeError {
    pub id: TokenId,
    pub place: String,
    pub expected: String,
    pub found: String,
}

impl PetriNet {
    pub fn new(places: Vec<Place>, transitions: Vec<Transition>) -> Self {
        Self {
            places,
            transitions,
        }
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.places.iter().find(|p| p.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    /// Checks every structural invariant and reports all violations.
    pub fn validate(&self) -> Result<(), Vec<StructuralError>> {
        let mut errors = Vec::new();
        let mut place_ids = HashSet::new();
        for p in &self.places {
            if !place_ids.insert(p.id.as_str()) {
                errors.push(StructuralError::DuplicatePlace(p.id.clone()));
            }
        }
        let terminal: HashSet<&str> = self
            .places
            .iter()
            .filter(|p| p.terminal)
            .map(|p| p.id.as_str())
            .collect();
        let mut transition_ids = HashSet::new();
        for t in &self.transitions {
            if !transition_ids.insert(t.id.as_str()) {
                errors.push(StructuralError::DuplicateTransition(t.id.clone()));
            }
            let mut seen_in = HashSet::new();
            for arc in &t.inputs {
                if !place_ids.contains(arc.place.as_str()) {
                    errors.push(StructuralError::UnknownPlace {
                        transition: t.id.clone(),
                        place: arc.place.clone(),
                    });
                }
                if terminal.contains(arc.place.as_str()) {
                    errors.push(StructuralError::TerminalHasOutgoing {
                        place: arc.place.clone(),
                        transition: t.id.clone(),
                    });
                }
                if !seen_in.insert(arc.var.as_str()) {
                    errors.push(StructuralError::DuplicateVariable {
                        transition: t.id.clone(),
                        var: arc.var.clone(),
                    });
                }
            }
            let mut seen_out = HashSet::new();
            for arc in &t.outputs {
                if !place_ids.contains(arc.place.as_str()) {
                    errors.push(StructuralError::UnknownPlace {
                        transition: t.id.clone(),
                        place: arc.place.clone(),
                    });
                }
                if !seen_out.insert(arc.var.as_str()) {
                    errors.push(StructuralError::DuplicateVariable {
                        transition: t.id.clone(),
                        var: arc.var.clone(),
                    });
                }
            }
            if !t.outputs.is_empty() && t.action.is_none() {
                errors.push(StructuralError::MissingAction(t.id.clone()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Every token's tag must match its place's `accepts`, and every place must exist.
    pub fn check_marking(&self, marking: &Marking) -> Result<(), MarkingTypeError> {
        for place in marking.places() {
            let expected = self.place(place).map(|p| p.accepts.as_str());
            for (id, tok) in marking.tokens(place) {
                match expected {
                    Some(acc) if acc == tok.tag => {}
                    _ => {
                        return Err(MarkingTypeError {
                            id,
                            place: place.to_string(),
                            expected: expected.unwrap_or("<no such place>").to_string(),
                            found: tok.tag.clone(),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    /// Transitions that consume from each place, for quick lookups.
    pub fn consumers(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (idx, t) in self.transitions.iter().enumerate() {
            for arc in &t.inputs {
                let list = map.entry(arc.place.as_str()).or_default();
                if !list.contains(&idx) {
                    list.push(idx);
                }
            }
        }
        map
    }
}

/// Validates `net`; the free-function form of [`PetriNet::validate`].
pub fn validate(net: &PetriNet) -> Result<(), Vec<StructuralError>> {
    net.validate()
}

/// Token values bound to a transition's input variables.
pub fn bind_values(
    transition: &Transition,
    marking: &Marking,
    tokens: &[TokenId],
) -> Option<Vec<(String, TokenValue)>> {
    transition
        .inputs
        .iter()
        .zip(tokens)
        .map(|(arc, id)| {
            marking
                .get(*id)
                .map(|(_, value)| (arc.var.clone(), value.clone()))
        })
        .collect()
}

/// Calls `visit` for every combination of pairwise-distinct tokens, one per
/// input arc, drawn from `candidates[k]` for arc `k`.
pub(crate) fn for_each_combination(
    candidates: &[Vec<TokenId>],
    visit: &mut dyn FnMut(&[TokenId]),
) {
    fn rec(
        candidates: &[Vec<TokenId>],
        chosen: &mut Vec<TokenId>,
        visit: &mut dyn FnMut(&[TokenId]),
    ) {
        let k = chosen.len();
        if k == candidates.len() {
            visit(chosen);
            return;
        }
        for &id in &candidates[k] {
            if chosen.contains(&id) {
                continue;
            }
            chosen.push(id);
            rec(candidates, chosen, visit);
            chosen.pop();
        }
    }
    if candidates.iter().any(Vec::is_empty) {
        return;
    }
    let mut chosen = Vec::with_capacity(candidates.len());
    rec(candidates, &mut chosen, visit);
}

/// All bindings of all transitions whose tokens are present and whose guard holds.
/// Bindings whose guard errors are returned in `faulted` rather than dropped.
/// A transition without input arcs is never enabled.
pub fn enabled(net: &PetriNet, registry: &Registry, marking: &Marking) -> Enabled {
    let mut out = Enabled::default();
    for t in &net.transitions {
        if t.inputs.is_empty() {
            continue;
        }
        let candidates: Vec<Vec<TokenId>> = t
            .inputs
            .iter()
            .map(|arc| marking.tokens(&arc.place).map(|(id, _)| id).collect())
            .collect();
        for_each_combination(&candidates, &mut |tokens| {
            let binding = Binding {
                transition: t.id.clone(),
                tokens: tokens.to_vec(),
            };
            let values = bind_values(t, marking, tokens).expect("tokens come from the marking");
            match registry.eval_guard(t.guard.as_deref(), Bound::new(&values)) {
                Ok(true) => out.bindings.push(binding),
                Ok(false) => {}
                Err(msg) => out.faulted.push((binding, msg)),
            }
        });
    }
    out
}

/// True iff no transition is enabled in `marking`.
pub fn is_quiescent(net: &PetriNet, registry: &Registry, marking: &Marking) -> bool {
    let e = enabled(net, registry, marking);
    e.bindings.is_empty() && e.faulted.is_empty()
}

/// Checks that `binding`'s tokens are present on the right input places and
/// pairwise distinct. Guards are not consulted.
pub fn check_binding(net: &PetriNet, marking: &Marking, binding: &Binding) -> Result<(), FireError> {
    let t = net
        .transition(&binding.transition)
        .ok_or_else(|| FireError::UnknownTransition(binding.transition.clone()))?;
    let stale = |reason: String| FireError::StaleBinding {
        transition: t.id.clone(),
        reason,
    };
    if binding.tokens.len() != t.inputs.len() {
        return Err(stale(format!(
            "{} tokens for {} input arcs",
            binding.tokens.len(),
            t.inputs.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for (arc, id) in t.inputs.iter().zip(&binding.tokens) {
        if !seen.insert(*id) {
            return Err(stale(format!("token {id} bound twice")));
        }
        match marking.place_of(*id) {
            None => return Err(stale(format!("token {id} is not in the marking"))),
            Some(p) if p != arc.place => {
                return Err(stale(format!(
                    "token {id} is on `{p}`, arc expects `{}`",
                    arc.place
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Applies a firing in place; returns the ids given to the produced tokens.
pub(crate) fn fire_in_place(
    net: &PetriNet,
    marking: &mut Marking,
    binding: &Binding,
    outputs: Vec<TokenValue>,
) -> Result<Vec<TokenId>, FireError> {
    check_binding(net, marking, binding)?;
    let t = net.transition(&binding.transition).expect("checked above");
    check_outputs(net, t, &outputs)?;
    for id in &binding.tokens {
        marking.remove(*id);
    }
    Ok(t.outputs
        .iter()
        .zip(outputs)
        .map(|(arc, tok)| marking.put(&arc.place, tok))
        .collect())
}

pub(crate) fn check_outputs(
    net: &PetriNet,
    t: &Transition,
    outputs: &[TokenValue],
) -> Result<(), FireError> {
    if outputs.len() != t.outputs.len() {
        return Err(FireError::OutputArity {
            transition: t.id.clone(),
            expected: t.outputs.len(),
            found: outputs.len(),
        });
    }
    for (arc, tok) in t.outputs.iter().zip(outputs) {
        let place = net.place(&arc.place).ok_or_else(|| FireError::TypeMismatch {
            place: arc.place.clone(),
            expected: "<no such place>".into(),
            found: tok.tag.clone(),
        })?;
        if place.accepts != tok.tag {
            return Err(FireError::TypeMismatch {
                place: place.id.clone(),
                expected: place.accepts.clone(),
                found: tok.tag.clone(),
            });
        }
    }
    Ok(())
}

/// Fires `binding` with the given outputs (one per output arc) and returns the
/// successor marking. `marking` itself is left untouched.
pub fn fire(
    net: &PetriNet,
    marking: &Marking,
    binding: &Binding,
    outputs: Vec<TokenValue>,
) -> Result<Marking, FireError> {
    let mut next = marking.clone();
    fire_in_place(net, &mut next, binding, outputs)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::fork_join::{fork_join_net, fork_join_registry};
    use super::*;
    use serde_json::json;

    fn item(v: i64) -> TokenValue {
        TokenValue::new("item", json!(v))
    }

    #[test]
    fn fork_join_validates() {
        assert_eq!(fork_join_net().validate(), Ok(()));
    }

    #[test]
    fn empty_net_validates() {
        assert_eq!(PetriNet::default().validate(), Ok(()));
    }

    #[test]
    fn dangling_place_is_named() {
        let net = PetriNet::new(
            vec![Place::new("a", "item")],
            vec![Transition::new("t").input("a", "v").output("x", "w").action("id")],
        );
        let errs = net.validate().unwrap_err();
        assert_eq!(
            errs,
            vec![StructuralError::UnknownPlace {
                transition: "t".into(),
                place: "x".into()
            }]
        );
        assert!(errs[0].to_string().contains("`x`"));
    }

    #[test]
    fn reports_every_violation() {
        let net = PetriNet::new(
            vec![
                Place::new("a", "item"),
                Place::new("a", "item"),
                Place::terminal("o", "item"),
            ],
            vec![
                Transition::new("t").input("a", "v").input("o", "v"),
                Transition::new("t").input("a", "v").output("a", "w"),
            ],
        );
        let errs = net.validate().unwrap_err();
        assert!(errs.contains(&StructuralError::DuplicatePlace("a".into())));
        assert!(errs.contains(&StructuralError::DuplicateTransition("t".into())));
        assert!(errs.contains(&StructuralError::TerminalHasOutgoing {
            place: "o".into(),
            transition: "t".into()
        }));
        assert!(errs.contains(&StructuralError::DuplicateVariable {
            transition: "t".into(),
            var: "v".into()
        }));
        assert!(errs.contains(&StructuralError::MissingAction("t".into())));
    }

    #[test]
    fn one_token_on_input_enables_only_split() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let mut m = Marking::new();
        m.put("i", item(1));
        let e = enabled(&net, &reg, &m);
        assert_eq!(e.bindings.len(), 1);
        assert_eq!(e.bindings[0].transition, "s");
        assert!(!is_quiescent(&net, &reg, &m));
    }

    #[test]
    fn empty_marking_enables_nothing() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let m = Marking::new();
        assert!(enabled(&net, &reg, &m).bindings.is_empty());
        assert!(is_quiescent(&net, &reg, &m));
    }

    #[test]
    fn join_enumerates_all_pairs() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let mut m = Marking::new();
        let ls: Vec<_> = (0..2).map(|k| m.put("l", item(k))).collect();
        let rs: Vec<_> = (0..3).map(|k| m.put("r", item(k))).collect();
        let e = enabled(&net, &reg, &m);
        let mut got: Vec<_> = e.bindings.iter().map(|b| b.tokens.clone()).collect();
        got.sort();
        let mut want = Vec::new();
        for l in &ls {
            for r in &rs {
                want.push(vec![*l, *r]);
            }
        }
        assert_eq!(got, want);
        assert!(e.bindings.iter().all(|b| b.transition == "j"));
    }

    #[test]
    fn sink_only_is_quiescent() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let mut m = Marking::new();
        m.put("sink", item(0));
        assert!(is_quiescent(&net, &reg, &m));
    }

    #[test]
    fn fire_split_then_join() {
        let net = fork_join_net();
        let mut m = Marking::new();
        let root = m.put("i", item(7));
        let b = Binding {
            transition: "s".into(),
            tokens: vec![root],
        };
        let next = fire(&net, &m, &b, vec![item(7), item(7)]).unwrap();
        assert_eq!(m.count("i"), 1, "input marking untouched");
        assert_eq!(next.count("i"), 0);
        assert_eq!(next.count("a"), 1);
        assert_eq!(next.count("b"), 1);

        let mut m = Marking::new();
        let l = m.put("l", item(1));
        let r = m.put("r", item(2));
        let b = Binding {
            transition: "j".into(),
            tokens: vec![l, r],
        };
        let next = fire(&net, &m, &b, vec![item(3)]).unwrap();
        assert_eq!(next.count("l") + next.count("r"), 0);
        assert_eq!(next.count("sink"), 1);
    }

    #[test]
    fn double_spend_is_stale() {
        let net = fork_join_net();
        let mut m = Marking::new();
        let root = m.put("i", item(1));
        let b = Binding {
            transition: "s".into(),
            tokens: vec![root],
        };
        let next = fire(&net, &m, &b, vec![item(1), item(1)]).unwrap();
        let err = fire(&net, &next, &b, vec![item(1), item(1)]).unwrap_err();
        assert!(matches!(err, FireError::StaleBinding { .. }));
    }

    #[test]
    fn wrong_output_tag_is_type_error() {
        let net = fork_join_net();
        let mut m = Marking::new();
        let root = m.put("i", item(1));
        let b = Binding {
            transition: "s".into(),
            tokens: vec![root],
        };
        let err = fire(&net, &m, &b, vec![item(1), TokenValue::new("other", json!(1))])
            .unwrap_err();
        assert!(matches!(err, FireError::TypeMismatch { .. }));
        let err = fire(&net, &m, &b, vec![item(1)]).unwrap_err();
        assert!(matches!(err, FireError::OutputArity { .. }));
    }

    #[test]
    fn guard_errors_are_reported_as_faulted() {
        let net = PetriNet::new(
            vec![Place::new("a", "item")],
            vec![Transition::new("t").input("a", "v").guard("boom")],
        );
        let reg = Registry::new().guard("boom", |_| Err("kaput".into()));
        let mut m = Marking::new();
        m.put("a", item(0));
        let e = enabled(&net, &reg, &m);
        assert!(e.bindings.is_empty());
        assert_eq!(e.faulted.len(), 1);
        assert_eq!(e.faulted[0].1, "kaput");
    }

    #[test]
    fn same_place_twice_needs_distinct_tokens() {
        let net = PetriNet::new(
            vec![Place::new("a", "item")],
            vec![Transition::new("pair").input("a", "x").input("a", "y")],
        );
        let reg = Registry::new();
        let mut m = Marking::new();
        m.put("a", item(0));
        assert!(enabled(&net, &reg, &m).bindings.is_empty());
        m.put("a", item(1));
        assert_eq!(enabled(&net, &reg, &m).bindings.len(), 2);
    }

    #[test]
    fn net_json_round_trip() {
        let net = fork_join_net();
        let text = serde_json::to_string(&net).unwrap();
        assert!(text.contains(r#"["i","x"]"#));
        let back: PetriNet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }
}

//! The small fork/join net: a split `s` feeding two independent branches `f`
//! and `g`, joined again by `j`.
//!
//! ```text
//!        +-> (a) -> [f] -> (l) -+
//! (i) -> [s]                    [j] -> (sink)
//!        +-> (b) -> [g] -> (r) -+
//! ```

use serde_json::{json, Value};

use super::{ActionError, Bound, PetriNet, Place, Registry, TokenValue, Transition};

pub const TAG: &str = "item";

pub fn fork_join_net() -> PetriNet {
    PetriNet::new(
        vec![
            Place::new("i", TAG),
            Place::new("a", TAG),
            Place::new("b", TAG),
            Place::new("l", TAG),
            Place::new("r", TAG),
            Place::new("sink", TAG),
        ],
        vec![
            Transition::new("s")
                .input("i", "x")
                .output("a", "left")
                .output("b", "right")
                .action("fork_join.split"),
            Transition::new("f")
                .input("a", "x")
                .output("l", "y")
                .action("fork_join.left"),
            Transition::new("g")
                .input("b", "x")
                .output("r", "y")
                .action("fork_join.right"),
            Transition::new("j")
                .input("l", "u")
                .input("r", "v")
                .output("sink", "w")
                .action("fork_join.join"),
        ],
    )
}

fn int(bound: Bound<'_>, var: &str) -> Result<i64, ActionError> {
    bound
        .require(var)
        .map_err(ActionError::fatal)?
        .payload
        .as_i64()
        .ok_or_else(|| ActionError::fatal(format!("`{var}` is not an integer")))
}

fn item(v: Value) -> TokenValue {
    TokenValue::new(TAG, v)
}

/// Integer payloads: `f` doubles, `g` adds one, `j` sums.
pub fn fork_join_registry() -> Registry {
    Registry::new()
        .action("fork_join.split", |b, _| {
            let x = int(b, "x")?;
            Ok(vec![item(json!(x)), item(json!(x))])
        })
        .action("fork_join.left", |b, _| Ok(vec![item(json!(int(b, "x")? * 2))]))
        .action("fork_join.right", |b, _| Ok(vec![item(json!(int(b, "x")? + 1))]))
        .action("fork_join.join", |b, _| {
            Ok(vec![item(json!(int(b, "u")? + int(b, "v")?))])
        })
}

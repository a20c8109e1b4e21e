//! Shared workloads for the criterion benches.

use fanfire_core::petri::fork_join::TAG;
use fanfire_core::{Marking, TokenValue};

/// `n` independent inputs for the fork/join net.
pub fn fork_join_inputs(n: u64) -> Marking {
    let mut m = Marking::new();
    for k in 0..n {
        m.put("i", TokenValue::new(TAG, serde_json::json!(k)));
    }
    m
}

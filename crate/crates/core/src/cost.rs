//! Artificial per-call cost for synthetic oracles.

use std::time::{Duration, Instant};

use cpu_time::ThreadTime;
use serde::{Deserialize, Serialize};

use crate::petri::ActionContext;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Spin until the calling thread has consumed `cost` of CPU time.
    #[default]
    Busy,
    /// Sleep; occupies a worker without using a core.
    Sleep,
}

/// Spends `cost`, returning early with `false` if the run is cancelled.
pub fn spend(cost: Duration, mode: CostMode, ctx: &ActionContext<'_>) -> bool {
    if cost.is_zero() {
        return !ctx.is_cancelled();
    }
    match mode {
        CostMode::Busy => spin(cost, ctx),
        CostMode::Sleep => sleep(cost, ctx),
    }
}

fn spin(cost: Duration, ctx: &ActionContext<'_>) -> bool {
    let start = ThreadTime::now();
    loop {
        if ctx.is_cancelled() {
            return false;
        }
        if start.elapsed() >= cost {
            return true;
        }
        for _ in 0..256 {
            std::hint::spin_loop();
        }
    }
}

fn sleep(cost: Duration, ctx: &ActionContext<'_>) -> bool {
    let deadline = Instant::now() + cost;
    loop {
        if ctx.is_cancelled() {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(1)));
    }
}

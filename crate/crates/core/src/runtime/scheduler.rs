use std::collections::{BTreeMap, HashMap, HashSet};

use crate::petri::{
    bind_values, for_each_combination, Binding, Bound, Marking, PetriNet, Registry, TokenId,
};

/// splitmix64 finalizer; stable across platforms and releases.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn binding_hash(seed: u64, salt: u64, transition: &str, tokens: &[TokenId]) -> u64 {
    let mut h = mix(seed ^ mix(salt));
    for b in transition.bytes() {
        h = mix(h ^ u64::from(b));
    }
    h = mix(h ^ 0xff);
    for t in tokens {
        h = mix(h ^ *t);
    }
    h
}

/// Ordering key: oldest enabling epoch first, then a seed-keyed hash.
/// Transition index and token ids make the key unique.
type Key = (u64, u64, usize, Vec<TokenId>);

/// Incrementally maintained set of enabled bindings, ordered FIFO by the
/// epoch at which the binding's last token arrived.
pub(crate) struct EnabledIndex {
    seed: u64,
    queue: BTreeMap<Key, Binding>,
    by_token: HashMap<TokenId, Vec<Key>>,
    consumers: HashMap<String, Vec<usize>>,
}

pub(crate) struct GuardFault {
    pub binding: Binding,
    pub message: String,
}

impl EnabledIndex {
    pub fn new(net: &PetriNet, seed: u64) -> Self {
        let consumers = net
            .consumers()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self {
            seed,
            queue: BTreeMap::new(),
            by_token: HashMap::new(),
            consumers,
        }
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.queue.len()
    }

    /// Registers every binding that uses at least one token of `fresh`.
    /// All other bindings must already be indexed.
    pub fn add_tokens(
        &mut self,
        net: &PetriNet,
        registry: &Registry,
        marking: &Marking,
        epochs: &HashMap<TokenId, u64>,
        fresh: &[TokenId],
    ) -> Result<(), GuardFault> {
        let fresh_set: HashSet<TokenId> = fresh.iter().copied().collect();
        let mut touched: Vec<usize> = fresh
            .iter()
            .filter_map(|id| marking.place_of(*id))
            .filter_map(|p| self.consumers.get(p))
            .flatten()
            .copied()
            .collect();
        touched.sort_unstable();
        touched.dedup();

        for tidx in touched {
            let t = &net.transitions[tidx];
            let mut new_ids = Vec::with_capacity(t.inputs.len());
            let mut old_ids = Vec::with_capacity(t.inputs.len());
            let mut all_ids = Vec::with_capacity(t.inputs.len());
            for arc in &t.inputs {
                let (n, o): (Vec<_>, Vec<_>) = marking
                    .tokens(&arc.place)
                    .map(|(id, _)| id)
                    .partition(|id| fresh_set.contains(id));
                let mut a = n.clone();
                a.extend(&o);
                new_ids.push(n);
                old_ids.push(o);
                all_ids.push(a);
            }
            // Each binding with a fresh token is produced once: at the first arc
            // holding a fresh token.
            for j in 0..t.inputs.len() {
                if new_ids[j].is_empty() {
                    continue;
                }
                let candidates: Vec<Vec<TokenId>> = (0..t.inputs.len())
                    .map(|k| match k.cmp(&j) {
                        std::cmp::Ordering::Less => old_ids[k].clone(),
                        std::cmp::Ordering::Equal => new_ids[k].clone(),
                        std::cmp::Ordering::Greater => all_ids[k].clone(),
                    })
                    .collect();
                let mut fault = None;
                let mut found = Vec::new();
                for_each_combination(&candidates, &mut |tokens| {
                    if fault.is_some() {
                        return;
                    }
                    let values =
                        bind_values(t, marking, tokens).expect("candidates come from the marking");
                    match registry.eval_guard(t.guard.as_deref(), Bound::new(&values)) {
                        Ok(true) => found.push(tokens.to_vec()),
                        Ok(false) => {}
                        Err(message) => {
                            fault = Some(GuardFault {
                                binding: Binding {
                                    transition: t.id.clone(),
                                    tokens: tokens.to_vec(),
                                },
                                message,
                            })
                        }
                    }
                });
                if let Some(f) = fault {
                    return Err(f);
                }
                for tokens in found {
                    self.insert(tidx, &t.id, tokens, epochs);
                }
            }
        }
        Ok(())
    }

    fn insert(
        &mut self,
        tidx: usize,
        transition: &str,
        tokens: Vec<TokenId>,
        epochs: &HashMap<TokenId, u64>,
    ) {
        let epoch = tokens
            .iter()
            .map(|id| epochs.get(id).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        let tie = binding_hash(self.seed, 0, transition, &tokens);
        let key: Key = (epoch, tie, tidx, tokens.clone());
        for id in &tokens {
            self.by_token.entry(*id).or_default().push(key.clone());
        }
        self.queue.insert(
            key,
            Binding {
                transition: transition.to_string(),
                tokens,
            },
        );
    }

    /// Drops every binding that uses any of `ids`.
    pub fn remove_tokens(&mut self, ids: &[TokenId]) {
        for id in ids {
            if let Some(keys) = self.by_token.remove(id) {
                for k in keys {
                    self.queue.remove(&k);
                }
            }
        }
    }

    /// Takes the first binding in scheduling order and retires all bindings
    /// that conflict with it.
    pub fn pop(&mut self) -> Option<Binding> {
        let (_, binding) = self.queue.pop_first()?;
        self.remove_tokens(&binding.tokens);
        Some(binding)
    }

    #[cfg(test)]
    pub fn bindings(&self) -> Vec<Binding> {
        self.queue.values().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::fork_join::{fork_join_net, fork_join_registry};
    use crate::petri::{enabled, TokenValue};
    use serde_json::json;

    fn index_for(net: &PetriNet, reg: &Registry, m: &Marking) -> EnabledIndex {
        let mut idx = EnabledIndex::new(net, 7);
        let ids: Vec<_> = m.places().flat_map(|p| m.tokens(p).map(|(id, _)| id)).collect();
        let epochs = HashMap::new();
        if idx.add_tokens(net, reg, m, &epochs, &ids).is_err() {
            panic!("guard fault");
        }
        idx
    }

    #[test]
    fn matches_full_enumeration_after_incremental_adds() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let mut m = Marking::new();
        let mut idx = EnabledIndex::new(&net, 1);
        let epochs = HashMap::new();
        for round in 0..4 {
            let mut fresh = vec![m.put("l", TokenValue::new("item", json!(round)))];
            if round % 2 == 0 {
                fresh.push(m.put("r", TokenValue::new("item", json!(round))));
            }
            assert!(idx.add_tokens(&net, &reg, &m, &epochs, &fresh).is_ok());
            let mut a = idx.bindings();
            let mut b = enabled(&net, &reg, &m).bindings;
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pop_retires_conflicts() {
        let net = fork_join_net();
        let reg = fork_join_registry();
        let mut m = Marking::new();
        m.put("l", TokenValue::new("item", json!(0)));
        m.put("r", TokenValue::new("item", json!(0)));
        m.put("r", TokenValue::new("item", json!(1)));
        let mut idx = index_for(&net, &reg, &m);
        assert_eq!(idx.len(), 2);
        let b = idx.pop().unwrap();
        assert_eq!(b.transition, "j");
        assert_eq!(idx.len(), 0, "the only `l` token is taken");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(binding_hash(1, 0, "t", &[1, 2]), binding_hash(1, 0, "t", &[1, 2]));
        assert_ne!(binding_hash(1, 0, "t", &[1, 2]), binding_hash(2, 0, "t", &[1, 2]));
        assert_ne!(binding_hash(1, 0, "t", &[1, 2]), binding_hash(1, 0, "t", &[2, 1]));
    }
}

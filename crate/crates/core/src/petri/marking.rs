use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Runtime identifier of a token. Allocated from a per-run counter, never reused.
pub type TokenId = u64;

/// A colored token: a type tag plus an immutable JSON payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenValue {
    pub tag: String,
    pub payload: serde_json::Value,
}

impl TokenValue {
    pub fn new(tag: impl Into<String>, payload: serde_json::Value) -> Self {
        Self {
            tag: tag.into(),
            payload,
        }
    }

    /// Stable textual form, used for id-independent comparisons.
    pub fn canonical_string(&self) -> String {
        serde_json::to_string(self).expect("token values always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct StoredToken {
    id: TokenId,
    #[serde(flatten)]
    value: TokenValue,
}

/// Multiset of tokens per place. Each token carries a unique id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Marking {
    places: BTreeMap<String, BTreeMap<TokenId, TokenValue>>,
    location: BTreeMap<TokenId, String>,
    next_id: TokenId,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a token with a fresh id.
    pub fn put(&mut self, place: &str, token: TokenValue) -> TokenId {
        let id = self.next_id;
        self.next_id += 1;
        self.insert_with_id(place, id, token);
        id
    }

    /// Re-inserts a token under an existing id (restoring a consumed token).
    pub(crate) fn insert_with_id(&mut self, place: &str, id: TokenId, token: TokenValue) {
        self.places
            .entry(place.to_string())
            .or_default()
            .insert(id, token);
        self.location.insert(id, place.to_string());
        if id >= self.next_id {
            self.next_id = id + 1;
        }
    }

    pub fn remove(&mut self, id: TokenId) -> Option<(String, TokenValue)> {
        let place = self.location.remove(&id)?;
        let tokens = self.places.get_mut(&place)?;
        let value = tokens.remove(&id)?;
        if tokens.is_empty() {
            self.places.remove(&place);
        }
        Some((place, value))
    }

    pub fn get(&self, id: TokenId) -> Option<(&str, &TokenValue)> {
        let place = self.location.get(&id)?;
        let value = self.places.get(place)?.get(&id)?;
        Some((place.as_str(), value))
    }

    pub fn place_of(&self, id: TokenId) -> Option<&str> {
        self.location.get(&id).map(String::as_str)
    }

    pub fn tokens(&self, place: &str) -> impl Iterator<Item = (TokenId, &TokenValue)> + '_ {
        self.places
            .get(place)
            .into_iter()
            .flat_map(|m| m.iter().map(|(id, v)| (*id, v)))
    }

    pub fn count(&self, place: &str) -> usize {
        self.places.get(place).map_or(0, BTreeMap::len)
    }

    pub fn len(&self) -> usize {
        self.location.len()
    }

    pub fn is_empty(&self) -> bool {
        self.location.is_empty()
    }

    /// The id the next `put` will allocate.
    pub fn next_id(&self) -> TokenId {
        self.next_id
    }

    pub fn places(&self) -> impl Iterator<Item = &str> + '_ {
        self.places.keys().map(String::as_str)
    }

    /// Marking contents with token ids erased: per place, the sorted list of
    /// serialized token values.
    pub fn canonical(&self) -> BTreeMap<String, Vec<String>> {
        self.places
            .iter()
            .map(|(place, tokens)| {
                let mut values: Vec<String> =
                    tokens.values().map(TokenValue::canonical_string).collect();
                values.sort();
                (place.clone(), values)
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MarkingFile {
    next_id: TokenId,
    tokens: BTreeMap<String, Vec<StoredToken>>,
}

impl Serialize for Marking {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let tokens = self
            .places
            .iter()
            .map(|(place, toks)| {
                let list = toks
                    .iter()
                    .map(|(id, value)| StoredToken {
                        id: *id,
                        value: value.clone(),
                    })
                    .collect();
                (place.clone(), list)
            })
            .collect();
        MarkingFile {
            next_id: self.next_id,
            tokens,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Marking {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = MarkingFile::deserialize(deserializer)?;
        let mut marking = Marking::new();
        for (place, list) in file.tokens {
            for tok in list {
                if marking.location.contains_key(&tok.id) {
                    return Err(serde::de::Error::custom(format!(
                        "duplicate token id {}",
                        tok.id
                    )));
                }
                marking.insert_with_id(&place, tok.id, tok.value);
            }
        }
        if file.next_id < marking.next_id {
            return Err(serde::de::Error::custom(format!(
                "next_id {} is not above every token id",
                file.next_id
            )));
        }
        marking.next_id = file.next_id;
        Ok(marking)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn put_allocates_fresh_ids() {
        let mut m = Marking::new();
        let a = m.put("p", TokenValue::new("t", json!(1)));
        let b = m.put("p", TokenValue::new("t", json!(1)));
        assert_ne!(a, b);
        assert_eq!(m.count("p"), 2);
        m.remove(a).unwrap();
        let c = m.put("p", TokenValue::new("t", json!(2)));
        assert!(c > b);
    }

    #[test]
    fn canonical_ignores_ids() {
        let mut m1 = Marking::new();
        m1.put("p", TokenValue::new("t", json!("x")));
        m1.put("p", TokenValue::new("t", json!("y")));
        let mut m2 = Marking::new();
        m2.put("q", TokenValue::new("t", json!(0)));
        m2.put("p", TokenValue::new("t", json!("y")));
        m2.put("p", TokenValue::new("t", json!("x")));
        m2.remove(0);
        assert_ne!(m1, m2);
        assert_eq!(m1.canonical(), m2.canonical());
    }

    #[test]
    fn serde_keeps_ids_and_counter() {
        let mut m = Marking::new();
        m.put("a", TokenValue::new("t", json!({"k": [1, 2.5, "z"]})));
        let gone = m.put("b", TokenValue::new("u", json!(null)));
        m.remove(gone);
        let text = serde_json::to_string(&m).unwrap();
        let back: Marking = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.next_id(), 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = r#"{"next_id":5,"tokens":{"a":[{"id":1,"tag":"t","payload":0}],"b":[{"id":1,"tag":"t","payload":0}]}}"#;
        assert!(serde_json::from_str::<Marking>(text).is_err());
    }
}

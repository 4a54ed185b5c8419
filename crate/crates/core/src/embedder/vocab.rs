use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::minilang::{Program, ProgramState, Value};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOTTOM: &str = "⊥";
pub const BEGIN: &str = "<begin>";
pub const END: &str = "<end>";
pub const UNK_VALUE: &str = "<unk-value>";

/// Integers outside `[-VALUE_CLAMP, VALUE_CLAMP]` map to [`UNK_VALUE`].
pub const VALUE_CLAMP: i64 = 64;

/// One token table shared by program text and runtime values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Specials, value tokens, then every statement token of `programs`
    /// in sorted order.
    pub fn build<'a>(programs: impl IntoIterator<Item = &'a Program>) -> Vocab {
        let mut tokens: Vec<String> = [PAD, UNK, BOTTOM, BEGIN, END, UNK_VALUE, "[", "]", "true", "false"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend((-VALUE_CLAMP..=VALUE_CLAMP).map(|v| v.to_string()));
        let mut code = BTreeSet::new();
        for p in programs {
            for t in p.tokens.iter() {
                code.insert(t.clone());
            }
        }
        for t in code {
            if !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        Vocab::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Values of a state in declaration order, arrays bracketed.
    pub fn encode_state(&self, state: &ProgramState) -> Vec<usize> {
        let mut out = Vec::with_capacity(state.width() * 2);
        for v in state.values() {
            self.push_value(v, &mut out);
        }
        out
    }

    fn push_value(&self, v: &Value, out: &mut Vec<usize>) {
        match v {
            Value::Int(x) => out.push(self.int_id(*x)),
            Value::Bool(b) => out.push(self.id(if *b { "true" } else { "false" })),
            Value::Bottom => out.push(self.id(BOTTOM)),
            Value::Array(xs) => {
                out.push(self.id("["));
                out.extend(xs.iter().map(|x| self.int_id(*x)));
                out.push(self.id("]"));
            }
        }
    }

    fn int_id(&self, x: i64) -> usize {
        if x.abs() <= VALUE_CLAMP {
            // Ints occupy a fixed block right after the ten leading specials.
            (10 + x + VALUE_CLAMP) as usize
        } else {
            self.id(UNK_VALUE)
        }
    }
}

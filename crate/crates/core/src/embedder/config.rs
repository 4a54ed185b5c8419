use serde::{Deserialize, Serialize};

use super::rnn::CellKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    StaticOnly,
    DynamicOnly,
    NoAttention,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::StaticOnly, Ablation::DynamicOnly, Ablation::NoAttention];

    pub fn uses_statements(self) -> bool {
        self != Ablation::DynamicOnly
    }

    pub fn uses_states(self) -> bool {
        self != Ablation::StaticOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::StaticOnly => "static_only",
            Ablation::DynamicOnly => "dynamic_only",
            Ablation::NoAttention => "no_attention",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Ablation::Full),
            "static" | "static_only" => Ok(Ablation::StaticOnly),
            "dynamic" | "dynamic_only" => Ok(Ablation::DynamicOnly),
            "noattn" | "no_attention" => Ok(Ablation::NoAttention),
            other => Err(format!("unknown ablation {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub embed: usize,
    pub ablation: Ablation,
    /// Concrete traces fused per statement.
    pub n_eps: usize,
    pub max_trace_len: usize,
    pub max_paths: usize,
    pub labels: usize,
    #[serde(default)]
    pub cell: CellKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 100,
            embed: 100,
            ablation: Ablation::Full,
            n_eps: 5,
            max_trace_len: 200,
            max_paths: 18,
            labels: 2,
            cell: CellKind::Vanilla,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden == 0 || self.embed == 0 || self.max_trace_len == 0 || self.max_paths == 0 || self.labels == 0 {
            return Err("dimensions, limits and label count must be positive".into());
        }
        if self.n_eps == 0 && self.ablation != Ablation::StaticOnly {
            return Err("n_eps = 0 is only allowed for static_only".into());
        }
        Ok(())
    }

    /// Vectors fused per step: the statement and/or its states.
    pub fn group_size(&self) -> usize {
        match self.ablation {
            Ablation::Full | Ablation::NoAttention => 1 + self.n_eps,
            Ablation::StaticOnly => 1,
            Ablation::DynamicOnly => self.n_eps,
        }
    }
}

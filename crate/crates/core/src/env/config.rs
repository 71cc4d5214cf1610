use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::features::FeatureConfig;
use crate::market_data::SyntheticConfig;
use crate::types::{Qty, Side, Ts, NANOS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskSide {
    #[serde(rename = "BUY")]
    Buy,
    #[serde(rename = "SELL")]
    Sell,
}

impl TaskSide {
    /// Book side the task's own orders rest on.
    pub fn book_side(self) -> Side {
        match self {
            TaskSide::Buy => Side::Bid,
            TaskSide::Sell => Side::Ask,
        }
    }

    /// +1 for a buy, -1 for a sell: the sign that turns cash paid into cost.
    pub fn sign(self) -> i64 {
        match self {
            TaskSide::Buy => 1,
            TaskSide::Sell => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskSide::Buy => "BUY",
            TaskSide::Sell => "SELL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub side: TaskSide,
    pub total_qty: Qty,
    pub horizon_steps: u64,
    pub interval_ns: Ts,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self { side: TaskSide::Buy, total_qty: 3_000, horizon_steps: 30, interval_ns: 60 * NANOS_PER_SEC }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Decision intervals observed before the task starts.
    pub warmup_steps: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { source: DataSource::Synthetic(SyntheticConfig::default()), warmup_steps: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Window length in steps for the cost and volume sums.
    pub window: usize,
    /// Weight of the imitation term.
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { window: 64, alpha: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Rest on the task's own side of the book.
    #[default]
    Passive,
    /// Price against the opposite side.
    Marketable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookMode {
    /// Learner and teacher trade on one book.
    #[default]
    Shared,
    /// Each trades on its own copy of the replayed book.
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub task: TaskConfig,
    pub data: DataConfig,
    pub reward: RewardConfig,
    pub placement: PlacementMode,
    pub book_mode: BookMode,
    /// Rows in each observation.
    pub observation_window: usize,
    /// One-way latency of every agent.
    pub latency_ns: Ts,
    pub tick_size: f64,
    /// Overrides the synthetic generator seed.
    pub seed: Option<u64>,
    pub record_event_log: bool,
    pub record_tape: bool,
    pub features: FeatureConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            task: TaskConfig::default(),
            data: DataConfig::default(),
            reward: RewardConfig::default(),
            placement: PlacementMode::default(),
            book_mode: BookMode::default(),
            observation_window: 60,
            latency_ns: 0,
            tick_size: 0.01,
            seed: None,
            record_event_log: false,
            record_tape: false,
            features: FeatureConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        toml::from_str(text).map_err(|e| EnvError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Config(m.to_string()));
        if self.task.total_qty == 0 {
            return bad("task.total_qty must be positive");
        }
        if self.task.horizon_steps == 0 {
            return bad("task.horizon_steps must be positive");
        }
        if self.task.interval_ns == 0 {
            return bad("task.interval_ns must be positive");
        }
        if self.reward.window == 0 {
            return bad("reward.window must be positive");
        }
        if !(self.reward.alpha >= 0.0 && self.reward.alpha.is_finite()) {
            return bad("reward.alpha must be finite and non-negative");
        }
        if self.observation_window == 0 {
            return bad("observation_window must be positive");
        }
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return bad("tick_size must be positive");
        }
        if 2 * self.latency_ns >= self.task.interval_ns {
            return bad("a round trip must fit inside one interval");
        }
        if let DataSource::Synthetic(s) = &self.data.source {
            s.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The synthetic configuration with the seed override applied.
    pub fn synthetic(&self) -> Option<SyntheticConfig> {
        match &self.data.source {
            DataSource::Synthetic(s) => {
                let mut s = s.clone();
                if let Some(seed) = self.seed {
                    s.seed = seed;
                }
                Some(s)
            }
            DataSource::Replay { .. } => None,
        }
    }
}

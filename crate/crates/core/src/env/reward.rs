//! Windowed execution cost and volume, and the imitation and competitive
//! reward terms built from them. Costs are exact integers in tick·shares.

use serde::{Deserialize, Serialize};

use super::config::TaskSide;
use crate::lob::TradeRecord;
use crate::types::{Cost, Price, Qty};

/// Cash and shares executed by one agent over some span.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub cost: Cost,
    pub volume: Qty,
}

impl Execution {
    pub fn from_trades<'a>(trades: impl IntoIterator<Item = &'a TradeRecord>) -> Self {
        trades.into_iter().fold(Self::default(), |acc, t| acc.plus(Self::fill(t.price, t.qty)))
    }

    pub fn fill(price: Price, qty: Qty) -> Self {
        Self { cost: price * qty as Cost, volume: qty }
    }

    pub fn plus(self, o: Self) -> Self {
        Self { cost: self.cost + o.cost, volume: self.volume + o.volume }
    }

    pub fn minus(self, o: Self) -> Self {
        Self { cost: self.cost - o.cost, volume: self.volume - o.volume }
    }
}

/// Sum over steps `max(1, k-j+1)..=k`; `log[0]` is step 1.
pub fn windowed_cost_volume(log: &[Execution], k: usize, j: usize) -> Execution {
    let lo = k.saturating_sub(j.max(1)) + 1;
    (lo.max(1)..=k.min(log.len())).map(|s| log[s - 1]).fold(Execution::default(), Execution::plus)
}

/// Negative absolute gap between the two window volumes.
pub fn imitation_reward(v_rl: Qty, v_base: Qty) -> f64 {
    -(v_rl.abs_diff(v_base) as f64)
}

/// Teacher cost, adjusted to the learner's volume at price `touch`, minus
/// the learner cost. Sell tasks flip the sign since their cash is revenue.
pub fn competitive_reward(side: TaskSide, base: Execution, rl: Execution, touch: Price) -> Cost {
    let dv = rl.volume as Cost - base.volume as Cost;
    side.sign() * (base.cost + dv * touch - rl.cost)
}

pub fn total_reward(r_comp: f64, r_mimic: f64, alpha: f64) -> f64 {
    r_comp + alpha * r_mimic
}

/// Reward terms for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub rl_window: Execution,
    pub base_window: Execution,
    pub touch: Price,
    pub r_comp: Cost,
    pub r_mimic: f64,
    pub reward: f64,
}

/// Per-step logs of both agents with incrementally maintained windows.
#[derive(Debug, Clone)]
pub struct RewardState {
    side: TaskSide,
    window: usize,
    alpha: f64,
    rl_log: Vec<Execution>,
    base_log: Vec<Execution>,
    rl_window: Execution,
    base_window: Execution,
}

impl RewardState {
    pub fn new(side: TaskSide, window: usize, alpha: f64) -> Self {
        Self {
            side,
            window: window.max(1),
            alpha,
            rl_log: Vec::new(),
            base_log: Vec::new(),
            rl_window: Execution::default(),
            base_window: Execution::default(),
        }
    }

    pub fn steps(&self) -> usize {
        self.rl_log.len()
    }

    pub fn rl_log(&self) -> &[Execution] {
        &self.rl_log
    }

    pub fn base_log(&self) -> &[Execution] {
        &self.base_log
    }

    /// Current `(learner, teacher)` windows.
    pub fn windows(&self) -> (Execution, Execution) {
        (self.rl_window, self.base_window)
    }

    /// Appends step `k = steps() + 1` and scores it against `touch`.
    pub fn push(&mut self, rl: Execution, base: Execution, touch: Price) -> StepReward {
        self.rl_log.push(rl);
        self.base_log.push(base);
        self.rl_window = self.rl_window.plus(rl);
        self.base_window = self.base_window.plus(base);
        let k = self.rl_log.len();
        if k > self.window {
            self.rl_window = self.rl_window.minus(self.rl_log[k - 1 - self.window]);
            self.base_window = self.base_window.minus(self.base_log[k - 1 - self.window]);
        }
        let r_comp = competitive_reward(self.side, self.base_window, self.rl_window, touch);
        let r_mimic = imitation_reward(self.rl_window.volume, self.base_window.volume);
        StepReward {
            rl_window: self.rl_window,
            base_window: self.base_window,
            touch,
            r_comp,
            r_mimic,
            reward: total_reward(r_comp as f64, r_mimic, self.alpha),
        }
    }
}

//! Step-based execution environment.
//!
//! One episode runs a kernel with an exchange fed by a replay agent, a TWAP
//! teacher sending market orders, and a decision agent standing in for the
//! learner. Each `step` blends the action into an order plan, places it,
//! advances one decision interval, cancels whatever did not execute and
//! scores the interval against the teacher.
//!
//! Step `k` spans `(D_{k-1}, D_k]` where `D_k = D_0 + k * interval`. The
//! learner's orders go out at `D_{k-1}`; the teacher's slice `k` executes
//! at `D_k - settle`, so both land inside step `k`.

mod action;
mod config;
mod metrics;
mod reward;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{
    blend_action, place_orders, twap_slice, ActionVector, OrderPlan, Placement, ACTION_LOWER, ACTION_UPPER,
};
pub use config::{
    BookMode, DataConfig, DataSource, EnvConfig, PlacementMode, RewardConfig, TaskConfig, TaskSide,
};
pub use metrics::{
    episode_report, summarize, write_report_csv, write_summary_csv, EpisodeOutcome, EpisodeReport,
    REPORT_HEADER, SUMMARY_HEADER,
};
pub use reward::{
    competitive_reward, imitation_reward, total_reward, windowed_cost_volume, Execution, RewardState,
    StepReward,
};

use crate::agents::{DecisionAgent, ExchangeAgent, TwapAgent};
use crate::features::{FeatureEngine, FeatureError, ObservationMatrix, TaskProgress};
use crate::kernel::{DecisionSchedule, Kernel, KernelError, Payload};
use crate::lob::{DepthSnapshot, TradeRecord};
use crate::market_data::{
    generate_synthetic_day, read_messages, DataError, MessageRecord, ReplayAgent, SyntheticConfig,
};
use crate::types::{AgentId, Price, Qty, Side, Ts};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("step called before reset")]
    NotReset,
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action components must be finite")]
    InvalidAction,
    #[error("no book price to place orders against")]
    NoReferencePrice,
    #[error("no opposite liquidity for the remaining {remaining} shares")]
    NoLiquidity { remaining: Qty },
    #[error("teacher execution cost is zero")]
    ZeroTwapCost,
    #[error("no completed episodes")]
    NoEpisodes,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EnvError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            EnvError::Config(_) => "config",
            EnvError::Data(_) => "data",
            EnvError::Kernel(_) => "kernel",
            EnvError::Feature(_) => "feature",
            EnvError::NotReset => "step_before_reset",
            EnvError::EpisodeFinished => "episode_finished",
            EnvError::InvalidAction => "invalid_action",
            EnvError::NoReferencePrice => "no_reference_price",
            EnvError::NoLiquidity { .. } => "no_liquidity",
            EnvError::ZeroTwapCost => "zero_twap_cost",
            EnvError::NoEpisodes => "no_episodes",
            EnvError::Io(_) => "io",
        }
    }
}

/// Parent order state. `total_qty - remaining` equals the quantity in
/// `trade_log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTask {
    pub side: TaskSide,
    pub total_qty: Qty,
    pub horizon: u64,
    pub step: u64,
    pub remaining: Qty,
    pub trade_log: Vec<TradeRecord>,
    pub submitted_log: Vec<OrderPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: u64,
    pub horizon: u64,
    pub total_qty: Qty,
    pub remaining: Qty,
    /// Learner execution during this step, terminal sweep included.
    pub learner: Execution,
    pub teacher: Execution,
    /// Absent on the reset observation.
    pub reward_terms: Option<StepReward>,
    pub terminal_qty: Qty,
    pub placement_fallback: bool,
    /// Learner fills this step as `(price, qty)`.
    pub fills: Vec<(Price, Qty)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: ObservationMatrix,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy)]
struct AgentIds {
    learner_exchange: AgentId,
    teacher_exchange: AgentId,
    teacher: AgentId,
    learner: AgentId,
}

struct Episode {
    kernel: Kernel,
    ids: AgentIds,
    features: FeatureEngine,
    task: ExecutionTask,
    rewards: RewardState,
    v_twap: Qty,
    session_end: Ts,
    last_bid: Option<Price>,
    last_ask: Option<Price>,
    learner_total: Execution,
    teacher_total: Execution,
    done: bool,
}

impl Episode {
    fn exchange(&self, id: AgentId) -> Result<&ExchangeAgent, EnvError> {
        Ok(self.kernel.agent::<ExchangeAgent>(id)?)
    }

    fn depth(&self) -> Result<DepthSnapshot, EnvError> {
        let ex = self.exchange(self.ids.learner_exchange)?;
        Ok(ex.book().depth_snapshot(self.kernel.clock()))
    }

    fn learner(&mut self) -> Result<&mut DecisionAgent, EnvError> {
        Ok(self.kernel.agent_mut::<DecisionAgent>(self.ids.learner)?)
    }

    fn teacher(&mut self) -> Result<&mut TwapAgent, EnvError> {
        Ok(self.kernel.agent_mut::<TwapAgent>(self.ids.teacher)?)
    }

    fn last_touch(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.last_bid,
            Side::Ask => self.last_ask,
        }
    }

    /// Feeds pending trade broadcasts and appends the decision-time row.
    fn observe(&mut self, last_submitted: Qty, last_executed: Qty) -> Result<DepthSnapshot, EnvError> {
        for u in self.learner()?.drain_updates() {
            self.features.on_market_update(&u);
        }
        self.learner()?.drain_cancels();
        let depth = self.depth()?;
        let q = depth.quote();
        if let Some((p, _)) = q.bid {
            self.last_bid = Some(p);
        }
        if let Some((p, _)) = q.ask {
            self.last_ask = Some(p);
        }
        let progress = TaskProgress {
            step: self.task.step,
            horizon: self.task.horizon,
            remaining: self.task.remaining,
            total: self.task.total_qty,
            last_submitted,
            last_executed,
        };
        self.features.on_decision(&depth, &progress)?;
        Ok(depth)
    }

    /// Sweeps the remainder with market orders at the current clock.
    fn terminal_sweep(&mut self, side: TaskSide) -> Result<Vec<TradeRecord>, EnvError> {
        let mut fills = Vec::new();
        while self.task.remaining > 0 {
            let depth = self.depth()?;
            let liquid = match side.book_side().opposite() {
                Side::Bid => depth.best_bid().is_some(),
                Side::Ask => depth.best_ask().is_some(),
            };
            if !liquid {
                self.done = true;
                return Err(EnvError::NoLiquidity { remaining: self.task.remaining });
            }
            let qty = self.task.remaining;
            self.kernel.act::<DecisionAgent, _>(self.ids.learner, |a, ctx| {
                a.submit_market(ctx, side.book_side(), qty)
            })?;
            let settle = self.kernel.settle_window();
            self.kernel.run_until(self.kernel.clock() + settle)?;
            let got = self.learner()?.drain_fills();
            self.task.remaining -= got.iter().map(|t| t.qty).sum::<Qty>();
            fills.extend(got);
        }
        Ok(fills)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DataKey {
    Synthetic(SyntheticConfig),
    Replay(std::path::PathBuf),
}

/// One environment instance. Not shared across threads; run one per thread
/// of control.
pub struct ExecutionEnv {
    cfg: EnvConfig,
    fixed_records: Option<Arc<[MessageRecord]>>,
    cache: Option<(DataKey, Arc<[MessageRecord]>)>,
    episode: Option<Episode>,
}

impl ExecutionEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Self { cfg, fixed_records: None, cache: None, episode: None })
    }

    /// Uses `records` as market data regardless of the configured source.
    pub fn from_records(cfg: EnvConfig, records: Arc<[MessageRecord]>) -> Result<Self, EnvError> {
        let mut env = Self::new(cfg)?;
        env.fixed_records = Some(records);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Replaces the configuration; takes effect at the next reset.
    pub fn reconfigure(&mut self, cfg: EnvConfig) -> Result<(), EnvError> {
        cfg.validate()?;
        self.cfg = cfg;
        self.episode = None;
        Ok(())
    }

    fn records(&mut self) -> Result<Arc<[MessageRecord]>, EnvError> {
        if let Some(r) = &self.fixed_records {
            return Ok(r.clone());
        }
        let key = match &self.cfg.data.source {
            DataSource::Synthetic(_) => DataKey::Synthetic(self.cfg.synthetic().expect("synthetic source")),
            DataSource::Replay { path } => DataKey::Replay(path.clone()),
        };
        if let Some((k, r)) = &self.cache {
            if *k == key {
                return Ok(r.clone());
            }
        }
        let records: Arc<[MessageRecord]> = match &key {
            DataKey::Synthetic(s) => generate_synthetic_day(s)?.into(),
            DataKey::Replay(p) => read_messages(p)?.into(),
        };
        self.cache = Some((key, records.clone()));
        Ok(records)
    }

    /// Starts a new episode. `seed` overrides the synthetic generator seed.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<StepResult, EnvError> {
        if seed.is_some() {
            self.cfg.seed = seed;
        }
        self.episode = None;
        let records = self.records()?;
        let cfg = &self.cfg;
        let task_cfg = &cfg.task;
        let start = records.first().map(|r| r.ts).or(cfg.synthetic().map(|s| s.start_ts)).unwrap_or(0);
        let interval = task_cfg.interval_ns;
        let d0 = start + cfg.data.warmup_steps * interval;
        let session_end = d0 + task_cfg.horizon_steps * interval;
        let latency = cfg.latency_ns;
        let settle = 2 * latency;
        let isolated = cfg.book_mode == BookMode::Isolated;

        let learner_exchange = AgentId(0);
        let teacher_exchange = if isolated { AgentId(2) } else { learner_exchange };
        let teacher = AgentId(if isolated { 4 } else { 2 });
        let learner = AgentId(teacher.0 + 1);

        let mut kernel = Kernel::new(start);
        if cfg.record_event_log {
            kernel.enable_event_log();
        }
        let mut replayers = Vec::new();
        let exchanges =
            if isolated { vec![learner_exchange, teacher_exchange] } else { vec![learner_exchange] };
        for exchange in exchanges {
            let mut ex = ExchangeAgent::new(cfg.tick_size);
            if cfg.record_tape {
                ex.record_tape();
            }
            if exchange == learner_exchange {
                ex.subscribe(learner);
            }
            let id = kernel.register_agent(Box::new(ex), latency)?;
            debug_assert_eq!(id, exchange);
            let rid = AgentId(id.0 + 1);
            let got = kernel.register_agent(Box::new(ReplayAgent::new(records.clone(), id, rid)), latency)?;
            debug_assert_eq!(got, rid);
            replayers.push(rid);
        }
        let v_twap = twap_slice(task_cfg.total_qty, task_cfg.horizon_steps);
        let schedule: Vec<Ts> = (1..=task_cfg.horizon_steps).map(|k| d0 + k * interval - settle).collect();
        let first_wake = schedule[0];
        let twap =
            TwapAgent::new(teacher_exchange, task_cfg.side.book_side(), task_cfg.total_qty, v_twap, schedule);
        let got = kernel.register_agent(Box::new(twap), latency)?;
        debug_assert_eq!(got, teacher);
        let got = kernel.register_agent(Box::new(DecisionAgent::new(learner_exchange)), latency)?;
        debug_assert_eq!(got, learner);
        kernel.set_decision_schedule(DecisionSchedule {
            agent: learner,
            origin: start,
            interval,
            session_end,
        })?;
        if let Some(first) = records.first() {
            for &r in &replayers {
                kernel.send_at(first.ts, r, r, Payload::WakeUp);
            }
        }
        kernel.send_at(first_wake, teacher, teacher, Payload::WakeUp);

        let mut ep = Episode {
            kernel,
            ids: AgentIds { learner_exchange, teacher_exchange, teacher, learner },
            features: FeatureEngine::new(cfg.features.clone(), interval, cfg.observation_window),
            task: ExecutionTask {
                side: task_cfg.side,
                total_qty: task_cfg.total_qty,
                horizon: task_cfg.horizon_steps,
                step: 0,
                remaining: task_cfg.total_qty,
                trade_log: Vec::new(),
                submitted_log: Vec::new(),
            },
            rewards: RewardState::new(task_cfg.side, cfg.reward.window, cfg.reward.alpha),
            v_twap,
            session_end,
            last_bid: None,
            last_ask: None,
            learner_total: Execution::default(),
            teacher_total: Execution::default(),
            done: false,
        };
        ep.kernel.run_until(start)?;
        ep.observe(0, 0)?;
        for _ in 0..cfg.data.warmup_steps {
            ep.kernel.step_to_next_decision()?;
            ep.observe(0, 0)?;
        }
        let info = StepInfo {
            step: 0,
            horizon: ep.task.horizon,
            total_qty: ep.task.total_qty,
            remaining: ep.task.remaining,
            learner: Execution::default(),
            teacher: Execution::default(),
            reward_terms: None,
            terminal_qty: 0,
            placement_fallback: false,
            fills: Vec::new(),
        };
        let observation = ep.features.observation(cfg.observation_window);
        self.episode = Some(ep);
        Ok(StepResult { observation, reward: 0.0, done: false, info })
    }

    pub fn step(&mut self, action: [f64; 3]) -> Result<StepResult, EnvError> {
        let cfg = &self.cfg;
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::InvalidAction);
        }
        let side = cfg.task.side;
        let plan = blend_action(action, ep.v_twap, ep.task.remaining);
        let reference = match cfg.placement {
            PlacementMode::Passive => side.book_side(),
            PlacementMode::Marketable => side.book_side().opposite(),
        };
        let placement = place_orders(&plan, &ep.depth()?, side, cfg.placement, ep.last_touch(reference))
            .ok_or(EnvError::NoReferencePrice)?;
        for &(price, qty) in &placement.orders {
            ep.kernel.act::<DecisionAgent, _>(ep.ids.learner, |a, ctx| {
                a.submit_limit(ctx, side.book_side(), price, qty)
            })?;
        }
        ep.task.submitted_log.push(plan);

        ep.kernel.step_to_next_decision()?;
        ep.task.step += 1;
        let k = ep.task.step;
        let mut fills = ep.learner()?.drain_fills();
        let executed: Qty = fills.iter().map(|t| t.qty).sum();
        ep.task.remaining -= executed;
        let mut terminal_qty = 0;
        if k == ep.task.horizon && ep.task.remaining > 0 {
            let before = ep.task.remaining;
            fills.extend(ep.terminal_sweep(side)?);
            terminal_qty = before - ep.task.remaining;
        }
        let learner = Execution::from_trades(&fills);
        let teacher = Execution::from_trades(&ep.teacher()?.drain_fills());

        let depth = ep.observe(plan.total(), executed)?;
        let q = depth.quote();
        let touch = match side {
            TaskSide::Buy => q.ask.map(|(p, _)| p).or(ep.last_ask),
            TaskSide::Sell => q.bid.map(|(p, _)| p).or(ep.last_bid),
        }
        .unwrap_or(0);
        let terms = ep.rewards.push(learner, teacher, touch);
        ep.learner_total = ep.learner_total.plus(learner);
        ep.teacher_total = ep.teacher_total.plus(teacher);
        ep.task.trade_log.extend_from_slice(&fills);
        ep.done = k == ep.task.horizon || ep.task.remaining == 0;
        let observation = ep.features.observation(cfg.observation_window);

        if ep.done && ep.kernel.clock() < ep.session_end {
            // The teacher still owes its remaining slices.
            ep.kernel.run_until(ep.session_end)?;
            let rest = Execution::from_trades(&ep.teacher()?.drain_fills());
            ep.teacher_total = ep.teacher_total.plus(rest);
        }

        Ok(StepResult {
            observation,
            reward: terms.reward,
            done: ep.done,
            info: StepInfo {
                step: k,
                horizon: ep.task.horizon,
                total_qty: ep.task.total_qty,
                remaining: ep.task.remaining,
                learner,
                teacher,
                reward_terms: Some(terms),
                terminal_qty,
                placement_fallback: placement.fallback,
                fills: fills.iter().map(|t| (t.price, t.qty)).collect(),
            },
        })
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.done)
    }

    pub fn task(&self) -> Option<&ExecutionTask> {
        self.episode.as_ref().map(|e| &e.task)
    }

    pub fn rewards(&self) -> Option<&RewardState> {
        self.episode.as_ref().map(|e| &e.rewards)
    }

    pub fn v_twap(&self) -> Option<Qty> {
        self.episode.as_ref().map(|e| e.v_twap)
    }

    pub fn clock(&self) -> Option<Ts> {
        self.episode.as_ref().map(|e| e.kernel.clock())
    }

    /// Shares the teacher has executed so far.
    pub fn teacher_executed(&self) -> Option<Qty> {
        let ep = self.episode.as_ref()?;
        ep.kernel.agent::<TwapAgent>(ep.ids.teacher).ok().map(|t| t.executed())
    }

    /// Total costs once the episode is done.
    pub fn outcome(&self) -> Option<EpisodeOutcome> {
        let ep = self.episode.as_ref().filter(|e| e.done)?;
        Some(EpisodeOutcome {
            side: ep.task.side,
            total_qty: ep.task.total_qty,
            c_rl: ep.learner_total.cost,
            c_twap: ep.teacher_total.cost,
        })
    }

    pub fn event_log(&self) -> Option<&str> {
        self.episode.as_ref()?.kernel.event_log()
    }

    /// Trades on the learner's exchange, when tape recording is on.
    pub fn trade_tape(&self) -> Option<&[TradeRecord]> {
        let ep = self.episode.as_ref()?;
        ep.exchange(ep.ids.learner_exchange).ok().map(|e| e.tape())
    }

    /// Trades on the teacher's exchange; the same tape as
    /// [`trade_tape`](Self::trade_tape) unless books are isolated.
    pub fn teacher_tape(&self) -> Option<&[TradeRecord]> {
        let ep = self.episode.as_ref()?;
        ep.exchange(ep.ids.teacher_exchange).ok().map(|e| e.tape())
    }

    /// Current top of the learner's book.
    pub fn depth(&self) -> Option<DepthSnapshot> {
        self.episode.as_ref()?.depth().ok()
    }
}

/// Runs one episode to completion, asking `policy` for each action.
pub fn run_episode(
    env: &mut ExecutionEnv,
    seed: Option<u64>,
    mut policy: impl FnMut(&StepResult) -> [f64; 3],
) -> Result<(EpisodeOutcome, Vec<StepResult>), EnvError> {
    let mut last = env.reset(seed)?;
    let mut steps = Vec::new();
    while !last.done {
        let a = policy(&last);
        last = env.step(a)?;
        steps.push(last.clone());
    }
    let outcome = env.outcome().expect("episode is done");
    Ok((outcome, steps))
}

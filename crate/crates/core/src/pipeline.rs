//! Standalone replay of a message stream through the kernel, without an
//! execution task. Backs the `replay` and `features` commands.

use std::sync::Arc;

use crate::agents::{DecisionAgent, ExchangeAgent};
use crate::env::EnvError;
use crate::features::{FeatureConfig, FeatureEngine, FeatureVector, TaskProgress};
use crate::kernel::{Kernel, KernelError, MarketUpdate, Payload};
use crate::lob::{DepthSnapshot, OrderBook, TradeRecord};
use crate::market_data::{MessageRecord, ReplayAgent, ReplayStats};
use crate::types::{AgentId, Ts};

pub struct ReplaySession {
    kernel: Kernel,
    exchange: AgentId,
    replay: AgentId,
    observer: Option<AgentId>,
    end: Ts,
}

impl ReplaySession {
    /// `observe` registers a passive subscriber collecting trade broadcasts.
    pub fn new(
        records: Arc<[MessageRecord]>,
        tick_size: f64,
        record_tape: bool,
        observe: bool,
    ) -> Result<Self, KernelError> {
        let start = records.first().map_or(0, |r| r.ts);
        let end = records.last().map_or(0, |r| r.ts);
        let mut kernel = Kernel::new(start);
        let mut ex = ExchangeAgent::new(tick_size);
        if record_tape {
            ex.record_tape();
        }
        let observer_id = AgentId(2);
        if observe {
            ex.subscribe(observer_id);
        }
        let exchange = kernel.register_agent(Box::new(ex), 0)?;
        let replay_id = AgentId(1);
        let replay =
            kernel.register_agent(Box::new(ReplayAgent::new(records.clone(), exchange, replay_id)), 0)?;
        debug_assert_eq!(replay, replay_id);
        let observer = if observe {
            Some(kernel.register_agent(Box::new(DecisionAgent::new(exchange)), 0)?)
        } else {
            None
        };
        if !records.is_empty() {
            kernel.send_at(start, replay, replay, Payload::WakeUp);
        }
        Ok(Self { kernel, exchange, replay, observer, end })
    }

    pub fn start(&self) -> Ts {
        self.kernel.clock()
    }

    /// Timestamp of the last record.
    pub fn end(&self) -> Ts {
        self.end
    }

    pub fn run_until(&mut self, t: Ts) -> Result<u64, KernelError> {
        self.kernel.run_until(t)
    }

    pub fn run_to_end(&mut self) -> Result<u64, KernelError> {
        let end = self.end.max(self.kernel.clock());
        self.kernel.run_until(end)
    }

    fn exchange(&self) -> &ExchangeAgent {
        self.kernel.agent::<ExchangeAgent>(self.exchange).expect("exchange agent")
    }

    pub fn book(&self) -> &OrderBook {
        self.exchange().book()
    }

    pub fn depth(&self) -> DepthSnapshot {
        self.book().depth_snapshot(self.kernel.clock())
    }

    pub fn tape(&self) -> &[TradeRecord] {
        self.exchange().tape()
    }

    pub fn rejections(&self) -> u64 {
        self.exchange().rejections()
    }

    pub fn stats(&self) -> ReplayStats {
        self.kernel.agent::<ReplayAgent>(self.replay).expect("replay agent").stats()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn drain_updates(&mut self) -> Vec<MarketUpdate> {
        match self.observer {
            Some(id) => self.kernel.agent_mut::<DecisionAgent>(id).expect("observer agent").drain_updates(),
            None => Vec::new(),
        }
    }
}

/// Feature rows sampled every `interval` from the first record to the
/// last. The task columns describe a nominal task spanning the stream.
pub fn feature_rows(
    records: Arc<[MessageRecord]>,
    cfg: &FeatureConfig,
    interval: Ts,
    tick_size: f64,
) -> Result<Vec<(Ts, FeatureVector)>, EnvError> {
    let mut session = ReplaySession::new(records, tick_size, false, true)?;
    let start = session.start();
    let steps = (session.end() - start) / interval.max(1);
    let mut engine = FeatureEngine::new(cfg.clone(), interval, 1);
    let mut rows = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = start + k * interval;
        session.run_until(t)?;
        for u in session.drain_updates() {
            engine.on_market_update(&u);
        }
        let task = TaskProgress {
            step: k,
            horizon: steps.max(1),
            remaining: steps - k + 1,
            total: steps + 1,
            last_submitted: 0,
            last_executed: 0,
        };
        rows.push((t, engine.on_decision(&session.depth(), &task)?));
    }
    Ok(rows)
}

//! Deterministic discrete-event kernel with step-synchronized control.
//!
//! Messages are delivered in `(deliver_ts, seq)` order. `seq` is a single
//! global counter, so ties at one timestamp resolve by enqueue order.
//! [`Kernel::run_until`] lets an external driver advance the simulation in
//! bounded slices instead of draining the queue to completion.

use std::any::Any;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::lob::{BookError, DepthSnapshot, Quote, TradeRecord};
use crate::types::{AgentId, OrderId, Price, Qty, Side, Ts};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("agents cannot be registered after the kernel has started")]
    AlreadyStarted,
    #[error("cannot run backwards: target {target} < clock {clock}")]
    TimeReversal { target: Ts, clock: Ts },
    #[error("no decision agent configured")]
    NoDecisionAgent,
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} has a different type than requested")]
    AgentType(AgentId),
}

/// A fill as seen by one of the two counterparties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FillNotice {
    pub order_id: OrderId,
    /// Shares still open on `order_id` after this fill. Always 0 for
    /// market orders, whose remainder is discarded.
    pub leaves_qty: Qty,
    pub trade: TradeRecord,
}

/// Broadcast to subscribers after every aggressive order that traded.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketUpdate {
    pub ts: Ts,
    pub trades: Vec<TradeRecord>,
    /// Visible touch immediately before the aggressive order arrived.
    pub quote_before: Quote,
    pub depth: DepthSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    NewLimit {
        order_id: OrderId,
        side: Side,
        price: Price,
        qty: Qty,
    },
    NewMarket {
        order_id: OrderId,
        side: Side,
        qty: Qty,
    },
    Cancel {
        order_id: OrderId,
    },
    /// Partial cancel: removes up to `qty` shares.
    Reduce {
        order_id: OrderId,
        qty: Qty,
    },
    FillNotice(FillNotice),
    CancelNotice {
        order_id: OrderId,
        qty: Qty,
    },
    Reject {
        order_id: OrderId,
        reason: BookError,
    },
    DepthUpdate(Box<MarketUpdate>),
    WakeUp,
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::NewLimit { .. } => "NewLimit",
            Payload::NewMarket { .. } => "NewMarket",
            Payload::Cancel { .. } => "Cancel",
            Payload::Reduce { .. } => "Reduce",
            Payload::FillNotice(_) => "FillNotice",
            Payload::CancelNotice { .. } => "CancelNotice",
            Payload::Reject { .. } => "Reject",
            Payload::DepthUpdate(_) => "DepthUpdate",
            Payload::WakeUp => "WakeUp",
        }
    }
}

impl fmt::Display for Payload {
    /// Compact detail column for the event log; never contains commas.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::NewLimit { order_id, side, price, qty } => {
                write!(f, "id={order_id} {side} {qty}@{price}")
            }
            Payload::NewMarket { order_id, side, qty } => write!(f, "id={order_id} {side} {qty}"),
            Payload::Cancel { order_id } => write!(f, "id={order_id}"),
            Payload::Reduce { order_id, qty } => write!(f, "id={order_id} qty={qty}"),
            Payload::FillNotice(n) => {
                write!(f, "id={} {}@{} leaves={}", n.order_id, n.trade.qty, n.trade.price, n.leaves_qty)
            }
            Payload::CancelNotice { order_id, qty } => write!(f, "id={order_id} qty={qty}"),
            Payload::Reject { order_id, reason } => write!(f, "id={order_id} {reason}"),
            Payload::DepthUpdate(u) => {
                let q = u.quote_before;
                write!(
                    f,
                    "trades={} bid={} ask={}",
                    u.trades.len(),
                    q.bid.map_or(0, |b| b.0),
                    q.ask.map_or(0, |a| a.0)
                )
            }
            Payload::WakeUp => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventMessage {
    pub deliver_ts: Ts,
    pub seq: u64,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub payload: Payload,
}

struct Queued(EventMessage);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Reversed so the max-heap pops the earliest message.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.deliver_ts, other.0.seq).cmp(&(self.0.deliver_ts, self.0.seq))
    }
}

/// Per-delivery handle an agent uses to read the clock and send messages.
pub struct Context {
    now: Ts,
    me: AgentId,
    latency: Ts,
    outbox: Vec<(Ts, AgentId, Payload)>,
}

impl Context {
    pub fn now(&self) -> Ts {
        self.now
    }

    pub fn me(&self) -> AgentId {
        self.me
    }

    /// Sends a message delivered after this agent's latency.
    pub fn send(&mut self, to: AgentId, payload: Payload) {
        self.outbox.push((self.now + self.latency, to, payload));
    }

    /// Schedules a wake-up for this agent at `at` (clamped to now).
    pub fn wake_at(&mut self, at: Ts) {
        self.outbox.push((at.max(self.now), self.me, Payload::WakeUp));
    }
}

pub trait Agent: Any {
    fn on_message(&mut self, msg: &EventMessage, ctx: &mut Context);

    /// Called on the decision agent just before each decision instant.
    fn before_decision(&mut self, _ctx: &mut Context) {}
}

struct Slot {
    agent: Box<dyn Agent>,
    latency: Ts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionSchedule {
    pub agent: AgentId,
    /// Decision grid origin; instants are `origin + k * interval`.
    pub origin: Ts,
    pub interval: Ts,
    pub session_end: Ts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionPoint {
    At(Ts),
    SessionEnd,
}

pub struct Kernel {
    clock: Ts,
    next_seq: u64,
    queue: BinaryHeap<Queued>,
    agents: Vec<Slot>,
    started: bool,
    decision: Option<DecisionSchedule>,
    log: Option<String>,
    delivered: u64,
}

impl Kernel {
    pub fn new(start: Ts) -> Self {
        Self {
            clock: start,
            next_seq: 0,
            queue: BinaryHeap::new(),
            agents: Vec::new(),
            started: false,
            decision: None,
            log: None,
            delivered: 0,
        }
    }

    /// Records every delivered message as a CSV line.
    pub fn enable_event_log(&mut self) {
        self.log = Some(String::from(EVENT_LOG_HEADER));
    }

    pub fn event_log(&self) -> Option<&str> {
        self.log.as_deref()
    }

    pub fn register_agent(&mut self, agent: Box<dyn Agent>, latency: Ts) -> Result<AgentId, KernelError> {
        if self.started {
            return Err(KernelError::AlreadyStarted);
        }
        let id = AgentId(self.agents.len() as u32);
        self.agents.push(Slot { agent, latency });
        Ok(id)
    }

    pub fn set_decision_schedule(&mut self, schedule: DecisionSchedule) -> Result<(), KernelError> {
        if schedule.agent.0 as usize >= self.agents.len() {
            return Err(KernelError::UnknownAgent(schedule.agent));
        }
        assert!(schedule.interval > 0, "decision interval must be positive");
        self.decision = Some(schedule);
        Ok(())
    }

    pub fn clock(&self) -> Ts {
        self.clock
    }

    pub fn latency(&self, id: AgentId) -> Ts {
        self.agents[id.0 as usize].latency
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Total messages delivered so far.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Enqueues a message from outside any handler, delivered at
    /// `clock + latency(sender)`.
    pub fn send(&mut self, sender: AgentId, recipient: AgentId, payload: Payload) {
        let at = self.clock + self.latency(sender);
        self.enqueue(at, sender, recipient, payload);
    }

    /// Enqueues a message at an absolute time, not earlier than the clock.
    pub fn send_at(&mut self, at: Ts, sender: AgentId, recipient: AgentId, payload: Payload) {
        self.enqueue(at.max(self.clock), sender, recipient, payload);
    }

    fn enqueue(&mut self, deliver_ts: Ts, sender: AgentId, recipient: AgentId, payload: Payload) {
        debug_assert!(deliver_ts >= self.clock);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(EventMessage { deliver_ts, seq, sender, recipient, payload }));
    }

    fn flush(&mut self, sender: AgentId, outbox: Vec<(Ts, AgentId, Payload)>) {
        for (at, to, payload) in outbox {
            self.enqueue(at, sender, to, payload);
        }
    }

    /// Delivers every message with `deliver_ts <= t`, including those
    /// spawned during processing, then sets the clock to `t`.
    pub fn run_until(&mut self, t: Ts) -> Result<u64, KernelError> {
        if t < self.clock {
            return Err(KernelError::TimeReversal { target: t, clock: self.clock });
        }
        self.started = true;
        let mut processed = 0;
        while self.queue.peek().is_some_and(|q| q.0.deliver_ts <= t) {
            let Queued(msg) = self.queue.pop().expect("peeked");
            self.clock = msg.deliver_ts;
            self.deliver(msg)?;
            processed += 1;
        }
        self.clock = t;
        Ok(processed)
    }

    fn deliver(&mut self, msg: EventMessage) -> Result<(), KernelError> {
        let idx = msg.recipient.0 as usize;
        let slot = self.agents.get_mut(idx).ok_or(KernelError::UnknownAgent(msg.recipient))?;
        if let Some(log) = self.log.as_mut() {
            let _ = writeln!(
                log,
                "{},{},{},{},{},{}",
                msg.deliver_ts,
                msg.seq,
                msg.sender,
                msg.recipient,
                msg.payload.kind(),
                msg.payload
            );
        }
        let mut ctx =
            Context { now: self.clock, me: msg.recipient, latency: slot.latency, outbox: Vec::new() };
        slot.agent.on_message(&msg, &mut ctx);
        self.delivered += 1;
        self.flush(msg.recipient, ctx.outbox);
        Ok(())
    }

    /// Advances to the next decision instant. Just before it (early enough
    /// for a round trip to the exchange to complete), the decision agent's
    /// `before_decision` hook runs so it can cancel stale orders.
    pub fn step_to_next_decision(&mut self) -> Result<DecisionPoint, KernelError> {
        let sched = self.decision.ok_or(KernelError::NoDecisionAgent)?;
        if self.clock >= sched.session_end {
            return Ok(DecisionPoint::SessionEnd);
        }
        let next = next_grid_point(self.clock, sched.origin, sched.interval).min(sched.session_end);
        let cancel_at = next.saturating_sub(self.settle_window()).max(self.clock);
        self.run_until(cancel_at)?;
        self.act_raw(sched.agent, |agent, ctx| agent.before_decision(ctx))?;
        self.run_until(next)?;
        Ok(DecisionPoint::At(next))
    }

    /// Round-trip allowance between the decision agent and the exchange.
    pub fn settle_window(&self) -> Ts {
        2 * self.agents.iter().map(|s| s.latency).max().unwrap_or(0)
    }

    fn act_raw<R>(
        &mut self,
        id: AgentId,
        f: impl FnOnce(&mut dyn Agent, &mut Context) -> R,
    ) -> Result<R, KernelError> {
        let slot = self.agents.get_mut(id.0 as usize).ok_or(KernelError::UnknownAgent(id))?;
        let mut ctx = Context { now: self.clock, me: id, latency: slot.latency, outbox: Vec::new() };
        let out = f(slot.agent.as_mut(), &mut ctx);
        self.flush(id, ctx.outbox);
        Ok(out)
    }

    /// Runs `f` on a typed agent with a send context at the current clock.
    pub fn act<A: Agent, R>(
        &mut self,
        id: AgentId,
        f: impl FnOnce(&mut A, &mut Context) -> R,
    ) -> Result<R, KernelError> {
        let slot = self.agents.get_mut(id.0 as usize).ok_or(KernelError::UnknownAgent(id))?;
        let agent =
            (slot.agent.as_mut() as &mut dyn Any).downcast_mut::<A>().ok_or(KernelError::AgentType(id))?;
        let mut ctx = Context { now: self.clock, me: id, latency: slot.latency, outbox: Vec::new() };
        let out = f(agent, &mut ctx);
        self.flush(id, ctx.outbox);
        Ok(out)
    }

    pub fn agent<A: Agent>(&self, id: AgentId) -> Result<&A, KernelError> {
        let slot = self.agents.get(id.0 as usize).ok_or(KernelError::UnknownAgent(id))?;
        (slot.agent.as_ref() as &dyn Any).downcast_ref::<A>().ok_or(KernelError::AgentType(id))
    }

    pub fn agent_mut<A: Agent>(&mut self, id: AgentId) -> Result<&mut A, KernelError> {
        let slot = self.agents.get_mut(id.0 as usize).ok_or(KernelError::UnknownAgent(id))?;
        (slot.agent.as_mut() as &mut dyn Any).downcast_mut::<A>().ok_or(KernelError::AgentType(id))
    }
}

pub const EVENT_LOG_HEADER: &str = "deliver_ts,seq,sender,recipient,payload_kind,detail\n";

/// Smallest `origin + k * interval` strictly greater than `clock`.
pub fn next_grid_point(clock: Ts, origin: Ts, interval: Ts) -> Ts {
    if clock < origin {
        return origin;
    }
    origin + ((clock - origin) / interval + 1) * interval
}

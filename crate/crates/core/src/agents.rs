//! Exchange, TWAP teacher and decision (learner proxy) agents.

use std::collections::BTreeMap;

use crate::kernel::{Agent, Context, EventMessage, FillNotice, MarketUpdate, Payload};
use crate::lob::{LimitOrder, MarketOrder, OrderBook, SubmitResult, TradeRecord};
use crate::types::{AgentId, OrderId, Price, Qty, Side, Ts};

/// Hosts one order book and answers order messages.
pub struct ExchangeAgent {
    book: OrderBook,
    subscribers: Vec<AgentId>,
    tape: Option<Vec<TradeRecord>>,
    rejections: u64,
    cancel_misses: u64,
}

impl ExchangeAgent {
    pub fn new(tick_size: f64) -> Self {
        Self {
            book: OrderBook::new(tick_size),
            subscribers: Vec::new(),
            tape: None,
            rejections: 0,
            cancel_misses: 0,
        }
    }

    /// Agents that receive a [`MarketUpdate`] after every trade.
    pub fn subscribe(&mut self, agent: AgentId) {
        if !self.subscribers.contains(&agent) {
            self.subscribers.push(agent);
        }
    }

    pub fn record_tape(&mut self) {
        self.tape.get_or_insert_with(Vec::new);
    }

    pub fn tape(&self) -> &[TradeRecord] {
        self.tape.as_deref().unwrap_or(&[])
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Cancels and reduces that found no resting order.
    pub fn cancel_misses(&self) -> u64 {
        self.cancel_misses
    }

    fn report_fills(&mut self, ctx: &mut Context, submitted: Qty, is_market: bool, fills: &[TradeRecord]) {
        let mut cum = 0;
        for trade in fills {
            cum += trade.qty;
            ctx.send(
                trade.maker_owner,
                Payload::FillNotice(FillNotice {
                    order_id: trade.maker_order_id,
                    leaves_qty: trade.maker_leaves,
                    trade: *trade,
                }),
            );
            ctx.send(
                trade.taker_owner,
                Payload::FillNotice(FillNotice {
                    order_id: trade.taker_order_id,
                    leaves_qty: if is_market { 0 } else { submitted - cum },
                    trade: *trade,
                }),
            );
        }
        if let Some(tape) = self.tape.as_mut() {
            tape.extend_from_slice(fills);
        }
    }

    fn broadcast(&self, ctx: &mut Context, quote_before: crate::lob::Quote, fills: Vec<TradeRecord>) {
        if fills.is_empty() || self.subscribers.is_empty() {
            return;
        }
        let update = MarketUpdate {
            ts: ctx.now(),
            trades: fills,
            quote_before,
            depth: self.book.depth_snapshot(ctx.now()),
        };
        for &sub in &self.subscribers {
            ctx.send(sub, Payload::DepthUpdate(Box::new(update.clone())));
        }
    }
}

impl Agent for ExchangeAgent {
    fn on_message(&mut self, msg: &EventMessage, ctx: &mut Context) {
        match msg.payload {
            Payload::NewLimit { order_id, side, price, qty } => {
                let before = self.book.quote();
                let res = self.book.submit_limit(LimitOrder {
                    id: order_id,
                    owner: msg.sender,
                    side,
                    price,
                    qty,
                    ts: ctx.now(),
                });
                match res {
                    Ok(SubmitResult { fills, .. }) => {
                        self.report_fills(ctx, qty, false, &fills);
                        self.broadcast(ctx, before, fills);
                    }
                    Err(reason) => {
                        self.rejections += 1;
                        ctx.send(msg.sender, Payload::Reject { order_id, reason });
                    }
                }
            }
            Payload::NewMarket { order_id, side, qty } => {
                let before = self.book.quote();
                let res = self.book.submit_market(MarketOrder {
                    id: order_id,
                    owner: msg.sender,
                    side,
                    qty,
                    ts: ctx.now(),
                });
                match res {
                    Ok(fills) => {
                        self.report_fills(ctx, qty, true, &fills);
                        self.broadcast(ctx, before, fills);
                    }
                    Err(reason) => {
                        self.rejections += 1;
                        ctx.send(msg.sender, Payload::Reject { order_id, reason });
                    }
                }
            }
            Payload::Cancel { order_id } => {
                let out = self.book.cancel(order_id);
                if !out.found {
                    self.cancel_misses += 1;
                }
                ctx.send(msg.sender, Payload::CancelNotice { order_id, qty: out.cancelled_qty });
            }
            Payload::Reduce { order_id, qty } => {
                let removed = self.book.reduce(order_id, qty);
                if removed == 0 {
                    self.cancel_misses += 1;
                }
                ctx.send(msg.sender, Payload::CancelNotice { order_id, qty: removed });
            }
            _ => {}
        }
    }
}

/// Market-order TWAP teacher. Wakes on a fixed schedule and sends one
/// market order per slice; the final slice sweeps whatever is left.
pub struct TwapAgent {
    exchange: AgentId,
    side: Side,
    total: Qty,
    slice: Qty,
    schedule: Vec<Ts>,
    wakes: usize,
    next_local: u64,
    executed: Qty,
    fills: Vec<TradeRecord>,
}

impl TwapAgent {
    /// `schedule` holds one wake-up time per slice, ascending.
    pub fn new(exchange: AgentId, side: Side, total: Qty, slice: Qty, schedule: Vec<Ts>) -> Self {
        Self {
            exchange,
            side,
            total,
            slice,
            schedule,
            wakes: 0,
            next_local: 1,
            executed: 0,
            fills: Vec::new(),
        }
    }

    pub fn first_wake(&self) -> Option<Ts> {
        self.schedule.first().copied()
    }

    pub fn executed(&self) -> Qty {
        self.executed
    }

    pub fn remaining(&self) -> Qty {
        self.total - self.executed
    }

    pub fn drain_fills(&mut self) -> Vec<TradeRecord> {
        std::mem::take(&mut self.fills)
    }
}

impl Agent for TwapAgent {
    fn on_message(&mut self, msg: &EventMessage, ctx: &mut Context) {
        match &msg.payload {
            Payload::WakeUp if msg.sender == ctx.me() => {
                let last = self.wakes + 1 >= self.schedule.len();
                let qty = if last { self.remaining() } else { self.slice.min(self.remaining()) };
                if qty > 0 {
                    let order_id = OrderId::namespaced(ctx.me(), self.next_local);
                    self.next_local += 1;
                    ctx.send(self.exchange, Payload::NewMarket { order_id, side: self.side, qty });
                }
                self.wakes += 1;
                if let Some(&next) = self.schedule.get(self.wakes) {
                    ctx.wake_at(next);
                }
            }
            Payload::FillNotice(n) if n.trade.taker_owner == ctx.me() => {
                self.executed += n.trade.qty;
                self.fills.push(n.trade);
            }
            _ => {}
        }
    }
}

/// In-kernel proxy for the external learner: places and tracks its orders,
/// collects its fills and the market updates it subscribes to.
pub struct DecisionAgent {
    exchange: AgentId,
    next_local: u64,
    open: BTreeMap<OrderId, Qty>,
    fills: Vec<TradeRecord>,
    updates: Vec<MarketUpdate>,
    cancelled: Vec<(OrderId, Qty)>,
    rejections: u64,
}

impl DecisionAgent {
    pub fn new(exchange: AgentId) -> Self {
        Self {
            exchange,
            next_local: 1,
            open: BTreeMap::new(),
            fills: Vec::new(),
            updates: Vec::new(),
            cancelled: Vec::new(),
            rejections: 0,
        }
    }

    fn next_id(&mut self, me: AgentId) -> OrderId {
        let id = OrderId::namespaced(me, self.next_local);
        self.next_local += 1;
        id
    }

    pub fn submit_limit(&mut self, ctx: &mut Context, side: Side, price: Price, qty: Qty) -> OrderId {
        let order_id = self.next_id(ctx.me());
        self.open.insert(order_id, qty);
        ctx.send(self.exchange, Payload::NewLimit { order_id, side, price, qty });
        order_id
    }

    pub fn submit_market(&mut self, ctx: &mut Context, side: Side, qty: Qty) -> OrderId {
        let order_id = self.next_id(ctx.me());
        ctx.send(self.exchange, Payload::NewMarket { order_id, side, qty });
        order_id
    }

    /// Orders still believed open, with their leaves quantity.
    pub fn open_orders(&self) -> &BTreeMap<OrderId, Qty> {
        &self.open
    }

    pub fn drain_fills(&mut self) -> Vec<TradeRecord> {
        std::mem::take(&mut self.fills)
    }

    pub fn drain_updates(&mut self) -> Vec<MarketUpdate> {
        std::mem::take(&mut self.updates)
    }

    pub fn drain_cancels(&mut self) -> Vec<(OrderId, Qty)> {
        std::mem::take(&mut self.cancelled)
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }
}

impl Agent for DecisionAgent {
    fn on_message(&mut self, msg: &EventMessage, _ctx: &mut Context) {
        match &msg.payload {
            Payload::FillNotice(n) => {
                if let Some(leaves) = self.open.get_mut(&n.order_id) {
                    *leaves = n.leaves_qty;
                    if n.leaves_qty == 0 {
                        self.open.remove(&n.order_id);
                    }
                }
                self.fills.push(n.trade);
            }
            Payload::CancelNotice { order_id, qty } => {
                self.open.remove(order_id);
                self.cancelled.push((*order_id, *qty));
            }
            Payload::Reject { order_id, .. } => {
                self.open.remove(order_id);
                self.rejections += 1;
            }
            Payload::DepthUpdate(u) => self.updates.push((**u).clone()),
            _ => {}
        }
    }

    fn before_decision(&mut self, ctx: &mut Context) {
        for &order_id in self.open.keys() {
            ctx.send(self.exchange, Payload::Cancel { order_id });
        }
    }
}

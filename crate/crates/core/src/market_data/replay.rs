use std::collections::HashMap;
use std::sync::Arc;

use super::{MessageKind, MessageRecord};
use crate::kernel::{Agent, Context, EventMessage, Payload};
use crate::lob::{BookError, LimitOrder, OrderBook, TradeRecord};
use crate::types::{AgentId, OrderId, Qty, Ts};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayStats {
    pub sent: u64,
    /// CANCEL/REDUCE records whose order was not known to be live.
    pub skipped: u64,
    pub rejected: u64,
}

/// Sends historical records to the exchange at their timestamps.
///
/// Historical ids are mapped into this agent's order-id namespace. The
/// agent tracks the leaves of its own orders from fill notices, so
/// cancellations of liquidity already consumed by other agents are dropped.
pub struct ReplayAgent {
    records: Arc<[MessageRecord]>,
    cursor: usize,
    exchange: AgentId,
    me: AgentId,
    live: HashMap<u64, Qty>,
    stats: ReplayStats,
}

impl ReplayAgent {
    /// `me` must be the id the kernel will assign to this agent.
    pub fn new(records: Arc<[MessageRecord]>, exchange: AgentId, me: AgentId) -> Self {
        Self { records, cursor: 0, exchange, me, live: HashMap::new(), stats: ReplayStats::default() }
    }

    pub fn first_ts(&self) -> Option<Ts> {
        self.records.first().map(|r| r.ts)
    }

    pub fn stats(&self) -> ReplayStats {
        self.stats
    }

    pub fn exhausted(&self) -> bool {
        self.cursor >= self.records.len()
    }

    pub fn exchange_id(&self, historical: u64) -> OrderId {
        OrderId::namespaced(self.me, historical)
    }

    /// Next exchange-bound message due at or before `clock`, skipping
    /// cancellations of orders that are no longer live.
    pub fn replay_next(&mut self, clock: Ts) -> Option<EventMessage> {
        while let Some(rec) = self.records.get(self.cursor).copied() {
            if rec.ts > clock {
                return None;
            }
            self.cursor += 1;
            let order_id = self.exchange_id(rec.order_id);
            let payload = match rec.kind {
                MessageKind::Add => {
                    self.live.insert(rec.order_id, rec.qty);
                    Payload::NewLimit { order_id, side: rec.side, price: rec.price, qty: rec.qty }
                }
                MessageKind::Cancel => {
                    if self.live.remove(&rec.order_id).is_none() {
                        self.stats.skipped += 1;
                        continue;
                    }
                    Payload::Cancel { order_id }
                }
                MessageKind::Reduce => match self.live.get_mut(&rec.order_id) {
                    Some(leaves) => {
                        *leaves = leaves.saturating_sub(rec.qty);
                        if *leaves == 0 {
                            self.live.remove(&rec.order_id);
                        }
                        Payload::Reduce { order_id, qty: rec.qty }
                    }
                    None => {
                        self.stats.skipped += 1;
                        continue;
                    }
                },
            };
            self.stats.sent += 1;
            return Some(EventMessage {
                deliver_ts: rec.ts,
                seq: 0,
                sender: self.me,
                recipient: self.exchange,
                payload,
            });
        }
        None
    }
}

impl Agent for ReplayAgent {
    fn on_message(&mut self, msg: &EventMessage, ctx: &mut Context) {
        match &msg.payload {
            Payload::WakeUp => {
                while let Some(out) = self.replay_next(ctx.now()) {
                    ctx.send(out.recipient, out.payload);
                }
                if let Some(next) = self.records.get(self.cursor) {
                    ctx.wake_at(next.ts);
                }
            }
            Payload::FillNotice(n) if n.order_id.namespace() == self.me.0 => {
                let hist = n.order_id.local();
                if n.leaves_qty == 0 {
                    self.live.remove(&hist);
                } else if let Some(l) = self.live.get_mut(&hist) {
                    *l = n.leaves_qty;
                }
            }
            Payload::Reject { .. } => self.stats.rejected += 1,
            _ => {}
        }
    }
}

/// Applies records straight to a fresh book, bypassing the kernel.
/// Returns the book and the trade tape.
pub fn apply_records(
    records: &[MessageRecord],
    owner: AgentId,
    tick_size: f64,
) -> Result<(OrderBook, Vec<TradeRecord>), BookError> {
    let mut book = OrderBook::new(tick_size);
    let mut tape = Vec::new();
    for r in records {
        let id = OrderId::namespaced(owner, r.order_id);
        match r.kind {
            MessageKind::Add => {
                let res = book.submit_limit(LimitOrder {
                    id,
                    owner,
                    side: r.side,
                    price: r.price,
                    qty: r.qty,
                    ts: r.ts,
                })?;
                tape.extend(res.fills);
            }
            MessageKind::Cancel => {
                book.cancel(id);
            }
            MessageKind::Reduce => {
                book.reduce(id, r.qty);
            }
        }
    }
    Ok((book, tape))
}

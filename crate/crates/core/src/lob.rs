//! Price-time priority limit order book.
//!
//! Prices are integer ticks. Aggressive orders match against the opposite
//! side best price first and FIFO within a level, always at the resting
//! order's price. There is no self-trade prevention.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentId, OrderId, Price, Qty, Side, Ts};

/// Number of levels reported per side in a [`DepthSnapshot`].
pub const DEPTH_LEVELS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("duplicate order id {0}")]
    DuplicateOrderId(OrderId),
    #[error("order quantity must be positive")]
    ZeroQuantity,
    #[error("order price must be positive, got {0}")]
    NonPositivePrice(Price),
}

/// Incoming limit order. The book assigns the arrival sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitOrder {
    pub id: OrderId,
    pub owner: AgentId,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub ts: Ts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarketOrder {
    pub id: OrderId,
    pub owner: AgentId,
    pub side: Side,
    pub qty: Qty,
    pub ts: Ts,
}

/// A resting order; `qty` is the remaining quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub id: OrderId,
    pub owner: AgentId,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub ts: Ts,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub ts: Ts,
    pub price: Price,
    pub qty: Qty,
    pub aggressor_side: Side,
    pub maker_owner: AgentId,
    pub taker_owner: AgentId,
    pub maker_order_id: OrderId,
    pub taker_order_id: OrderId,
    pub maker_seq: u64,
    /// Quantity left on the maker order after this fill.
    pub maker_leaves: Qty,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubmitResult {
    pub fills: Vec<TradeRecord>,
    pub resting_qty: Qty,
}

impl SubmitResult {
    pub fn filled_qty(&self) -> Qty {
        self.fills.iter().map(|f| f.qty).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CancelOutcome {
    pub cancelled_qty: Qty,
    /// False when the id was unknown or already fully filled.
    pub found: bool,
}

/// Top-of-book depth, best level first. Absent levels are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DepthSnapshot {
    pub ts: Ts,
    pub bid_prices: [Price; DEPTH_LEVELS],
    pub ask_prices: [Price; DEPTH_LEVELS],
    pub bid_vols: [Qty; DEPTH_LEVELS],
    pub ask_vols: [Qty; DEPTH_LEVELS],
}

impl DepthSnapshot {
    pub fn best_bid(&self) -> Option<(Price, Qty)> {
        (self.bid_vols[0] > 0).then(|| (self.bid_prices[0], self.bid_vols[0]))
    }

    pub fn best_ask(&self) -> Option<(Price, Qty)> {
        (self.ask_vols[0] > 0).then(|| (self.ask_prices[0], self.ask_vols[0]))
    }

    pub fn quote(&self) -> Quote {
        Quote { bid: self.best_bid(), ask: self.best_ask() }
    }
}

/// Level-one prices and volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Quote {
    pub bid: Option<(Price, Qty)>,
    pub ask: Option<(Price, Qty)>,
}

impl Quote {
    /// Mid price in ticks; requires both sides.
    pub fn mid(&self) -> Option<f64> {
        match (self.bid, self.ask) {
            (Some((b, _)), Some((a, _))) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    }

    pub fn spread(&self) -> Option<Price> {
        match (self.bid, self.ask) {
            (Some((b, _)), Some((a, _))) => Some(a - b),
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct Level {
    orders: VecDeque<Order>,
    total: Qty,
}

#[derive(Debug)]
pub struct OrderBook {
    bids: BTreeMap<Price, Level>,
    asks: BTreeMap<Price, Level>,
    index: HashMap<OrderId, (Side, Price)>,
    seen: HashSet<OrderId>,
    tick_size: f64,
    next_seq: u64,
}

impl Default for OrderBook {
    fn default() -> Self {
        Self::new(0.01)
    }
}

impl OrderBook {
    pub fn new(tick_size: f64) -> Self {
        Self {
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: HashMap::new(),
            seen: HashSet::new(),
            tick_size,
            next_seq: 0,
        }
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    /// Converts a tick·share amount into currency units.
    pub fn to_currency(&self, ticks: i64) -> f64 {
        ticks as f64 * self.tick_size
    }

    pub fn submit_limit(&mut self, order: LimitOrder) -> Result<SubmitResult, BookError> {
        if order.qty == 0 {
            return Err(BookError::ZeroQuantity);
        }
        if order.price <= 0 {
            return Err(BookError::NonPositivePrice(order.price));
        }
        if !self.seen.insert(order.id) {
            return Err(BookError::DuplicateOrderId(order.id));
        }
        let mut remaining = order.qty;
        let fills =
            self.sweep(order.id, order.owner, order.side, Some(order.price), &mut remaining, order.ts);
        if remaining > 0 {
            let seq = self.next_seq;
            self.next_seq += 1;
            let resting = Order {
                id: order.id,
                owner: order.owner,
                side: order.side,
                price: order.price,
                qty: remaining,
                ts: order.ts,
                seq,
            };
            let level = self.side_mut(order.side).entry(order.price).or_default();
            level.total += remaining;
            level.orders.push_back(resting);
            self.index.insert(order.id, (order.side, order.price));
        }
        Ok(SubmitResult { fills, resting_qty: remaining })
    }

    /// Walks the opposite side until filled or exhausted. Any unfilled
    /// remainder is discarded.
    pub fn submit_market(&mut self, order: MarketOrder) -> Result<Vec<TradeRecord>, BookError> {
        if order.qty == 0 {
            return Err(BookError::ZeroQuantity);
        }
        if !self.seen.insert(order.id) {
            return Err(BookError::DuplicateOrderId(order.id));
        }
        let mut remaining = order.qty;
        Ok(self.sweep(order.id, order.owner, order.side, None, &mut remaining, order.ts))
    }

    pub fn cancel(&mut self, id: OrderId) -> CancelOutcome {
        match self.remove_qty(id, Qty::MAX) {
            Some(qty) => CancelOutcome { cancelled_qty: qty, found: true },
            None => CancelOutcome { cancelled_qty: 0, found: false },
        }
    }

    /// Removes up to `qty` shares from a resting order, keeping its queue
    /// position. Returns the shares actually removed (0 if unknown).
    pub fn reduce(&mut self, id: OrderId, qty: Qty) -> Qty {
        self.remove_qty(id, qty).unwrap_or(0)
    }

    fn remove_qty(&mut self, id: OrderId, qty: Qty) -> Option<Qty> {
        let (side, price) = *self.index.get(&id)?;
        let book = self.side_mut(side);
        let level = book.get_mut(&price).expect("indexed level exists");
        let pos = level.orders.iter().position(|o| o.id == id).expect("indexed order exists");
        let order = &mut level.orders[pos];
        let removed = qty.min(order.qty);
        order.qty -= removed;
        level.total -= removed;
        if order.qty == 0 {
            level.orders.remove(pos);
            if level.orders.is_empty() {
                book.remove(&price);
            }
            self.index.remove(&id);
        }
        Some(removed)
    }

    fn sweep(
        &mut self,
        taker_id: OrderId,
        taker: AgentId,
        side: Side,
        limit: Option<Price>,
        remaining: &mut Qty,
        ts: Ts,
    ) -> Vec<TradeRecord> {
        let mut fills = Vec::new();
        let (book, index) = match side {
            Side::Bid => (&mut self.asks, &mut self.index),
            Side::Ask => (&mut self.bids, &mut self.index),
        };
        while *remaining > 0 {
            let mut entry = match side {
                Side::Bid => match book.first_entry() {
                    Some(e) => e,
                    None => break,
                },
                Side::Ask => match book.last_entry() {
                    Some(e) => e,
                    None => break,
                },
            };
            let price = *entry.key();
            let crosses = match (side, limit) {
                (_, None) => true,
                (Side::Bid, Some(l)) => price <= l,
                (Side::Ask, Some(l)) => price >= l,
            };
            if !crosses {
                break;
            }
            let level = entry.get_mut();
            while *remaining > 0 {
                let Some(maker) = level.orders.front_mut() else {
                    break;
                };
                let qty = maker.qty.min(*remaining);
                maker.qty -= qty;
                level.total -= qty;
                *remaining -= qty;
                fills.push(TradeRecord {
                    ts,
                    price,
                    qty,
                    aggressor_side: side,
                    maker_owner: maker.owner,
                    taker_owner: taker,
                    maker_order_id: maker.id,
                    taker_order_id: taker_id,
                    maker_seq: maker.seq,
                    maker_leaves: maker.qty,
                });
                if maker.qty == 0 {
                    index.remove(&maker.id);
                    level.orders.pop_front();
                }
            }
            if level.orders.is_empty() {
                entry.remove();
            }
        }
        fills
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, Level> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    pub fn best_bid(&self) -> Option<(Price, Qty)> {
        self.bids.iter().next_back().map(|(p, l)| (*p, l.total))
    }

    pub fn best_ask(&self) -> Option<(Price, Qty)> {
        self.asks.iter().next().map(|(p, l)| (*p, l.total))
    }

    pub fn quote(&self) -> Quote {
        Quote { bid: self.best_bid(), ask: self.best_ask() }
    }

    pub fn depth_snapshot(&self, ts: Ts) -> DepthSnapshot {
        let mut snap = DepthSnapshot { ts, ..Default::default() };
        for (i, (p, l)) in self.bids.iter().rev().take(DEPTH_LEVELS).enumerate() {
            snap.bid_prices[i] = *p;
            snap.bid_vols[i] = l.total;
        }
        for (i, (p, l)) in self.asks.iter().take(DEPTH_LEVELS).enumerate() {
            snap.ask_prices[i] = *p;
            snap.ask_vols[i] = l.total;
        }
        snap
    }

    /// Aggregated `(price, volume)` levels, best first.
    pub fn levels(&self, side: Side) -> Vec<(Price, Qty)> {
        match side {
            Side::Bid => self.bids.iter().rev().map(|(p, l)| (*p, l.total)).collect(),
            Side::Ask => self.asks.iter().map(|(p, l)| (*p, l.total)).collect(),
        }
    }

    /// All resting orders on one side in priority order.
    pub fn resting_orders(&self, side: Side) -> Vec<Order> {
        let levels: Box<dyn Iterator<Item = &Level>> = match side {
            Side::Bid => Box::new(self.bids.values().rev()),
            Side::Ask => Box::new(self.asks.values()),
        };
        levels.flat_map(|l| l.orders.iter().copied()).collect()
    }

    pub fn order(&self, id: OrderId) -> Option<&Order> {
        let (side, price) = self.index.get(&id)?;
        let book = match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        };
        book.get(price)?.orders.iter().find(|o| o.id == id)
    }

    pub fn contains(&self, id: OrderId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn resting_count(&self) -> usize {
        self.index.len()
    }

    pub fn total_volume(&self, side: Side) -> Qty {
        match side {
            Side::Bid => self.bids.values().map(|l| l.total).sum(),
            Side::Ask => self.asks.values().map(|l| l.total).sum(),
        }
    }

    pub fn is_crossed(&self) -> bool {
        matches!((self.best_bid(), self.best_ask()), (Some((b, _)), Some((a, _))) if b >= a)
    }
}

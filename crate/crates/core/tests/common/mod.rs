#![allow(dead_code)]

//! Test oracles shared by the integration suites.

use std::collections::HashSet;

use exec_arena::lob::{LimitOrder, MarketOrder, OrderBook, TradeRecord};
use exec_arena::types::{AgentId, OrderId, Price, Qty, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Resting order in the reference matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefOrder {
    pub id: u64,
    pub owner: u32,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub seq: u64,
}

/// Fill as seen by the reference matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefFill {
    pub price: Price,
    pub qty: Qty,
    pub aggressor: Side,
    pub maker_id: u64,
    pub taker_id: u64,
    pub maker_owner: u32,
    pub taker_owner: u32,
    pub maker_seq: u64,
    pub maker_leaves: Qty,
}

impl From<&TradeRecord> for RefFill {
    fn from(t: &TradeRecord) -> Self {
        Self {
            price: t.price,
            qty: t.qty,
            aggressor: t.aggressor_side,
            maker_id: t.maker_order_id.0,
            taker_id: t.taker_order_id.0,
            maker_owner: t.maker_owner.0,
            taker_owner: t.taker_owner.0,
            maker_seq: t.maker_seq,
            maker_leaves: t.maker_leaves,
        }
    }
}

/// Deliberately naive matcher: a flat list scanned in full for every
/// match. Priority is best price, then lowest arrival sequence.
#[derive(Debug, Default, Clone)]
pub struct ReferenceBook {
    pub orders: Vec<RefOrder>,
    next_seq: u64,
    seen: HashSet<u64>,
}

impl ReferenceBook {
    fn best_maker(&self, taker: Side, limit: Option<Price>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.orders.iter().enumerate() {
            if o.side == taker {
                continue;
            }
            let crosses = match (taker, limit) {
                (_, None) => true,
                (Side::Bid, Some(l)) => o.price <= l,
                (Side::Ask, Some(l)) => o.price >= l,
            };
            if !crosses {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let cur = &self.orders[b];
                    let better_price = match taker {
                        Side::Bid => o.price < cur.price,
                        Side::Ask => o.price > cur.price,
                    };
                    if better_price || (o.price == cur.price && o.seq < cur.seq) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }

    pub fn submit(
        &mut self,
        id: u64,
        owner: u32,
        side: Side,
        limit: Option<Price>,
        qty: Qty,
    ) -> Result<(Vec<RefFill>, Qty), ()> {
        if qty == 0 || limit.is_some_and(|p| p <= 0) || self.seen.contains(&id) {
            return Err(());
        }
        self.seen.insert(id);
        let mut remaining = qty;
        let mut fills = Vec::new();
        while remaining > 0 {
            let Some(i) = self.best_maker(side, limit) else { break };
            let m = &mut self.orders[i];
            let q = m.qty.min(remaining);
            m.qty -= q;
            remaining -= q;
            fills.push(RefFill {
                price: m.price,
                qty: q,
                aggressor: side,
                maker_id: m.id,
                taker_id: id,
                maker_owner: m.owner,
                taker_owner: owner,
                maker_seq: m.seq,
                maker_leaves: m.qty,
            });
            if m.qty == 0 {
                self.orders.remove(i);
            }
        }
        let mut rested = 0;
        if let (Some(price), true) = (limit, remaining > 0) {
            self.orders.push(RefOrder { id, owner, side, price, qty: remaining, seq: self.next_seq });
            self.next_seq += 1;
            rested = remaining;
        }
        Ok((fills, rested))
    }

    pub fn remove(&mut self, id: u64, qty: Qty) -> Option<Qty> {
        let i = self.orders.iter().position(|o| o.id == id)?;
        let o = &mut self.orders[i];
        let removed = qty.min(o.qty);
        o.qty -= removed;
        if o.qty == 0 {
            self.orders.remove(i);
        }
        Some(removed)
    }

    /// One side in priority order.
    pub fn side(&self, side: Side) -> Vec<RefOrder> {
        let mut v: Vec<RefOrder> = self.orders.iter().copied().filter(|o| o.side == side).collect();
        v.sort_by_key(|o| {
            let key = match side {
                Side::Bid => -o.price,
                Side::Ask => o.price,
            };
            (key, o.seq)
        });
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Limit { id: u64, owner: u32, side: Side, price: Price, qty: Qty },
    Market { id: u64, owner: u32, side: Side, qty: Qty },
    Cancel { id: u64 },
    Reduce { id: u64, qty: Qty },
}

/// Random operation stream around a mid of 1000 ticks. Includes
/// duplicate ids, zero quantities, non-positive prices and cancels of
/// unknown or finished orders.
pub fn random_ops(seed: u64, n: usize) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(n);
    let mut next_id = 1u64;
    for _ in 0..n {
        let side = if rng.gen() { Side::Bid } else { Side::Ask };
        let owner = rng.gen_range(0..4);
        let roll = rng.gen_range(0..100);
        let id = if rng.gen_ratio(1, 200) && next_id > 1 {
            rng.gen_range(1..next_id)
        } else {
            next_id += 1;
            next_id - 1
        };
        let qty = if rng.gen_ratio(1, 200) { 0 } else { rng.gen_range(1..=150) };
        let op = match roll {
            0..=54 => {
                let skew = match side {
                    Side::Bid => -2,
                    Side::Ask => 2,
                };
                let price = if rng.gen_ratio(1, 500) { 0 } else { 1000 + skew + rng.gen_range(-8..=8) };
                Op::Limit { id, owner, side, price, qty }
            }
            55..=64 => Op::Market { id, owner, side, qty },
            65..=89 => Op::Cancel { id: rng.gen_range(1..next_id + 3) },
            _ => Op::Reduce { id: rng.gen_range(1..next_id + 3), qty: rng.gen_range(1..=80) },
        };
        ops.push(op);
    }
    ops
}

/// Applies `ops` to both matchers, comparing fills and outcomes of every
/// operation and the books after each one (`every_op`) or only at the end.
/// Returns the number of fills.
pub fn check_against_reference(ops: &[Op], every_op: bool) -> Result<usize, String> {
    let mut book = OrderBook::new(0.01);
    let mut reference = ReferenceBook::default();
    let mut total_fills = 0;
    for (step, op) in ops.iter().enumerate() {
        let ctx = |what: &str| format!("op {step} {op:?}: {what}");
        match *op {
            Op::Limit { id, owner, side, price, qty } => {
                let got = book.submit_limit(LimitOrder {
                    id: OrderId(id),
                    owner: AgentId(owner),
                    side,
                    price,
                    qty,
                    ts: step as u64,
                });
                let want = reference.submit(id, owner, side, Some(price), qty);
                match (got, want) {
                    (Ok(r), Ok((fills, rested))) => {
                        let got: Vec<RefFill> = r.fills.iter().map(RefFill::from).collect();
                        if got != fills {
                            return Err(ctx(&format!("fills {got:?} != {fills:?}")));
                        }
                        if r.resting_qty != rested {
                            return Err(ctx("resting quantity"));
                        }
                        total_fills += got.len();
                    }
                    (Err(_), Err(())) => {}
                    (g, w) => return Err(ctx(&format!("outcome {g:?} vs {w:?}"))),
                }
            }
            Op::Market { id, owner, side, qty } => {
                let got = book.submit_market(MarketOrder {
                    id: OrderId(id),
                    owner: AgentId(owner),
                    side,
                    qty,
                    ts: step as u64,
                });
                let want = reference.submit(id, owner, side, None, qty);
                match (got, want) {
                    (Ok(f), Ok((fills, _))) => {
                        let got: Vec<RefFill> = f.iter().map(RefFill::from).collect();
                        if got != fills {
                            return Err(ctx(&format!("fills {got:?} != {fills:?}")));
                        }
                        total_fills += got.len();
                    }
                    (Err(_), Err(())) => {}
                    (g, w) => return Err(ctx(&format!("outcome {g:?} vs {w:?}"))),
                }
            }
            Op::Cancel { id } => {
                let got = book.cancel(OrderId(id));
                let want = reference.remove(id, Qty::MAX);
                if got.found != want.is_some() || got.cancelled_qty != want.unwrap_or(0) {
                    return Err(ctx(&format!("cancel {got:?} vs {want:?}")));
                }
            }
            Op::Reduce { id, qty } => {
                let got = book.reduce(OrderId(id), qty);
                let want = reference.remove(id, qty).unwrap_or(0);
                if got != want {
                    return Err(ctx(&format!("reduce {got} vs {want}")));
                }
            }
        }
        if every_op || step + 1 == ops.len() {
            compare_books(&book, &reference).map_err(|e| ctx(&e))?;
        }
    }
    Ok(total_fills)
}

fn compare_books(book: &OrderBook, reference: &ReferenceBook) -> Result<(), String> {
    for side in [Side::Bid, Side::Ask] {
        let got: Vec<(u64, u32, Price, Qty, u64)> =
            book.resting_orders(side).iter().map(|o| (o.id.0, o.owner.0, o.price, o.qty, o.seq)).collect();
        let want: Vec<(u64, u32, Price, Qty, u64)> =
            reference.side(side).iter().map(|o| (o.id, o.owner, o.price, o.qty, o.seq)).collect();
        if got != want {
            return Err(format!("{side} book differs"));
        }
    }
    if book.is_crossed() {
        return Err("crossed book".into());
    }
    Ok(())
}

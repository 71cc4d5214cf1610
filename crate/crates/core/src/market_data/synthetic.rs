use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use super::{DataError, MessageKind, MessageRecord};
use crate::lob::{LimitOrder, OrderBook};
use crate::types::{AgentId, OrderId, Price, Qty, Side, Ts, NANOS_PER_SEC};

/// Chance that a cancellation event only trims part of the order.
const REDUCE_SHARE: f64 = 0.3;

/// Parameters for a seeded synthetic trading day.
///
/// Limit and market arrivals are Poisson per side; each resting order is
/// cancelled at `cancel_rate`. Market flow is emitted as marketable ADDs
/// sized to at most the opposite touch, so it never rests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Session open, in ns.
    pub start_ts: Ts,
    pub duration: Ts,
    /// Arrivals per second per side.
    pub limit_rate: f64,
    pub market_rate: f64,
    /// Per resting order, per second.
    pub cancel_rate: f64,
    /// Mean order size in shares (geometric, support starting at 1).
    pub size_mean: f64,
    /// Probability decay per tick away from the touch for new limits.
    pub level_decay: f64,
    pub init_mid: Price,
    /// Shares on each of the 5 seeded levels per side.
    pub init_depth: Qty,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            start_ts: 34_200 * NANOS_PER_SEC,
            duration: 3_600 * NANOS_PER_SEC,
            limit_rate: 2.0,
            market_rate: 0.5,
            cancel_rate: 0.02,
            size_mean: 100.0,
            level_decay: 0.6,
            init_mid: 10_000,
            init_depth: 500,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let rates = [self.limit_rate, self.market_rate, self.cancel_rate];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(DataError::Config("rates must be finite and non-negative".into()));
        }
        if !(self.size_mean >= 1.0 && self.size_mean.is_finite()) {
            return Err(DataError::Config("size_mean must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.level_decay) {
            return Err(DataError::Config("level_decay must lie in [0, 1)".into()));
        }
        if self.init_mid <= 5 {
            return Err(DataError::Config("init_mid must exceed 5 ticks".into()));
        }
        if self.init_depth == 0 {
            return Err(DataError::Config("init_depth must be positive".into()));
        }
        Ok(())
    }
}

/// Live-order registry with O(1) uniform sampling.
#[derive(Default)]
struct LiveSet {
    ids: Vec<u64>,
    pos: HashMap<u64, usize>,
}

impl LiveSet {
    fn insert(&mut self, id: u64) {
        self.pos.insert(id, self.ids.len());
        self.ids.push(id);
    }

    fn remove(&mut self, id: u64) {
        if let Some(i) = self.pos.remove(&id) {
            self.ids.swap_remove(i);
            if let Some(&moved) = self.ids.get(i) {
                self.pos.insert(moved, i);
            }
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

struct Generator {
    rng: ChaCha8Rng,
    book: OrderBook,
    live: LiveSet,
    next_id: u64,
    last_bid: Price,
    last_ask: Price,
    out: Vec<MessageRecord>,
}

const SOURCE: AgentId = AgentId(0);

impl Generator {
    fn add(&mut self, ts: Ts, side: Side, price: Price, qty: Qty) {
        let id = self.next_id;
        self.next_id += 1;
        let res = self
            .book
            .submit_limit(LimitOrder { id: OrderId(id), owner: SOURCE, side, price, qty, ts })
            .expect("generator emits valid orders");
        for f in &res.fills {
            if f.maker_leaves == 0 {
                self.live.remove(f.maker_order_id.0);
            }
        }
        if res.resting_qty > 0 {
            self.live.insert(id);
        }
        self.out.push(MessageRecord { ts, kind: MessageKind::Add, order_id: id, side, price, qty });
        if let Some((b, _)) = self.book.best_bid() {
            self.last_bid = b;
        }
        if let Some((a, _)) = self.book.best_ask() {
            self.last_ask = a;
        }
    }
}

/// Generates a day of synthetic messages. Deterministic per seed.
pub fn generate_synthetic_day(cfg: &SyntheticConfig) -> Result<Vec<MessageRecord>, DataError> {
    cfg.validate()?;
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        book: OrderBook::default(),
        live: LiveSet::default(),
        next_id: 1,
        last_bid: cfg.init_mid - 1,
        last_ask: cfg.init_mid + 1,
        out: Vec::new(),
    };
    for k in 1..=5 {
        g.add(cfg.start_ts, Side::Bid, cfg.init_mid - k, cfg.init_depth);
        g.add(cfg.start_ts, Side::Ask, cfg.init_mid + k, cfg.init_depth);
    }

    let size = Geometric::new(1.0 / cfg.size_mean).expect("validated size_mean");
    let distance = Geometric::new(1.0 - cfg.level_decay).expect("validated level_decay");
    let end = cfg.start_ts.saturating_add(cfg.duration);
    let limit_total = 2.0 * cfg.limit_rate;
    let market_total = 2.0 * cfg.market_rate;
    let mut clock = cfg.start_ts as f64;

    loop {
        let cancel_total = cfg.cancel_rate * g.live.len() as f64;
        let total = limit_total + market_total + cancel_total;
        if total <= 0.0 {
            break;
        }
        let dt = Exp::new(total).expect("positive rate").sample(&mut g.rng);
        clock += dt * NANOS_PER_SEC as f64;
        let ts = clock.round() as Ts;
        if ts > end {
            break;
        }
        let pick = g.rng.gen::<f64>() * total;
        let side = if g.rng.gen::<bool>() { Side::Bid } else { Side::Ask };
        if pick < limit_total {
            let k = distance.sample(&mut g.rng) as Price;
            let qty = 1 + size.sample(&mut g.rng);
            let price = match side {
                Side::Bid => (g.last_ask - 1 - k).max(1),
                Side::Ask => g.last_bid.max(0) + 1 + k,
            };
            g.add(ts, side, price, qty);
        } else if pick < limit_total + market_total {
            let qty = 1 + size.sample(&mut g.rng);
            let touch = match side {
                Side::Bid => g.book.best_ask(),
                Side::Ask => g.book.best_bid(),
            };
            if let Some((price, vol)) = touch {
                g.add(ts, side, price, qty.min(vol));
            }
        } else if g.live.len() > 0 {
            let idx = g.rng.gen_range(0..g.live.len());
            let id = g.live.ids[idx];
            let order = *g.book.order(OrderId(id)).expect("live order rests");
            if order.qty >= 2 && g.rng.gen_bool(REDUCE_SHARE) {
                let qty = g.rng.gen_range(1..order.qty);
                g.book.reduce(order.id, qty);
                g.out.push(MessageRecord {
                    ts,
                    kind: MessageKind::Reduce,
                    order_id: id,
                    side: order.side,
                    price: order.price,
                    qty,
                });
            } else {
                g.book.cancel(order.id);
                g.live.remove(id);
                g.out.push(MessageRecord {
                    ts,
                    kind: MessageKind::Cancel,
                    order_id: id,
                    side: order.side,
                    price: order.price,
                    qty: order.qty,
                });
            }
            if let Some((b, _)) = g.book.best_bid() {
                g.last_bid = b;
            }
            if let Some((a, _)) = g.book.best_ask() {
                g.last_ask = a;
            }
        }
    }
    Ok(g.out)
}

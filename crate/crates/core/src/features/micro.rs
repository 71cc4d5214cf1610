use std::collections::VecDeque;

use super::{FeatureConfig, MarketSample};
use crate::lob::Quote;
use crate::types::Price;

/// Unnormalized microstructure values. Prices and spreads are in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MicroRaw {
    pub spread: Option<f64>,
    pub direction: i8,
    pub effective_spread: f64,
    pub price_improvement: f64,
    pub smart_price: Option<f64>,
    pub imbalance: f64,
    pub log_return: f64,
    pub volatility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroFeatures {
    pub raw: MicroRaw,
    /// spread, direction, effective spread, price improvement, smart price,
    /// imbalance, log return, volatility.
    pub normalized: [f64; 8],
    /// Set when one side of the book is empty.
    pub stale: bool,
}

/// Trade-derived and rolling state behind the microstructure features.
#[derive(Debug, Clone)]
pub struct MicrostructureState {
    log_return_scale: f64,
    volatility_scale: f64,
    volatility_window: usize,
    scale_steps: usize,

    direction: i8,
    effective_spread: f64,
    price_improvement: f64,
    first_price: Option<Price>,
    last_price: Option<Price>,
    last_move: i8,
    last_quote: Option<Quote>,

    prev_mid: Option<f64>,
    returns: VecDeque<f64>,
    spreads: VecDeque<f64>,
    top_volumes: VecDeque<f64>,
}

impl MicrostructureState {
    pub fn new(cfg: &FeatureConfig, scale_steps: usize) -> Self {
        Self {
            log_return_scale: cfg.log_return_scale,
            volatility_scale: cfg.volatility_scale,
            volatility_window: cfg.volatility_window.max(2),
            scale_steps: scale_steps.max(1),
            direction: 0,
            effective_spread: 0.0,
            price_improvement: 0.0,
            first_price: None,
            last_price: None,
            last_move: 0,
            last_quote: None,
            prev_mid: None,
            returns: VecDeque::new(),
            spreads: VecDeque::new(),
            top_volumes: VecDeque::new(),
        }
    }

    /// Updates trade-dependent state from a sample. Samples without a trade
    /// only refresh the reference quote.
    pub fn observe(&mut self, sample: &MarketSample) {
        if let Some(trade) = sample.last_trade {
            let quote = sample.quote_before.or(self.last_quote).unwrap_or_default();
            let price = trade.price;
            let tick = match self.last_price {
                Some(prev) if price > prev => 1,
                Some(prev) if price < prev => -1,
                Some(_) => self.last_move,
                None => 0,
            };
            if tick != 0 {
                self.last_move = tick;
            }
            let mid = quote.mid();
            self.direction = lee_ready(price, mid, tick);
            let d = self.direction as f64;
            self.effective_spread = match mid {
                Some(m) => 2.0 * d * (price as f64 - m) / m,
                None => 0.0,
            };
            self.price_improvement = match (self.direction, quote.ask, quote.bid) {
                (1, Some((nbo, _)), _) => (nbo - price) as f64,
                (-1, _, Some((nbb, _))) => (price - nbb) as f64,
                _ => 0.0,
            };
            self.first_price.get_or_insert(price);
            self.last_price = Some(price);
        }
        self.last_quote = Some(sample.depth.quote());
    }

    /// Pushes the decision-step mid return, spread and top volume into the
    /// rolling windows.
    pub fn record_decision(&mut self, sample: &MarketSample) {
        let quote = sample.depth.quote();
        if let Some(mid) = quote.mid() {
            if let Some(prev) = self.prev_mid {
                push_capped(&mut self.returns, (mid / prev).ln(), self.volatility_window);
            }
            self.prev_mid = Some(mid);
        }
        if let Some(s) = quote.spread() {
            push_capped(&mut self.spreads, s as f64, self.scale_steps);
        }
        let tops: Vec<f64> = [quote.bid, quote.ask].iter().flatten().map(|(_, v)| *v as f64).collect();
        if !tops.is_empty() {
            let mean = tops.iter().sum::<f64>() / tops.len() as f64;
            push_capped(&mut self.top_volumes, mean, self.scale_steps);
        }
        self.last_quote = Some(quote);
    }

    /// Rolling median spread in ticks, at least one tick.
    pub fn spread_scale(&self) -> f64 {
        if self.spreads.is_empty() {
            return 1.0;
        }
        let mut v: Vec<f64> = self.spreads.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        med.max(1.0)
    }

    /// Rolling mean top-level volume, 1 when unknown.
    pub fn volume_scale(&self) -> f64 {
        if self.top_volumes.is_empty() {
            return 1.0;
        }
        let m = self.top_volumes.iter().sum::<f64>() / self.top_volumes.len() as f64;
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn volatility(&self) -> f64 {
        let n = self.returns.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.returns.iter().sum::<f64>() / n as f64;
        let var = self.returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    }

    pub fn features(&self, sample: &MarketSample) -> MicroFeatures {
        let quote = sample.depth.quote();
        let stale = quote.bid.is_none() || quote.ask.is_none();
        let spread_scale = self.spread_scale();
        let mid = quote.mid().or(self.prev_mid);

        let spread = quote.spread().map(|s| s as f64);
        let (smart, imbalance) = match (quote.bid, quote.ask) {
            (Some((pb, vb)), Some((pa, va))) if va + vb > 0 => {
                let (vb, va) = (vb as f64, va as f64);
                let smart = (pa as f64 * vb + pb as f64 * va) / (va + vb);
                (Some(smart), (vb - va) / (va + vb))
            }
            _ => (None, 0.0),
        };
        let log_return = match (self.first_price, self.last_price) {
            (Some(p0), Some(pt)) => (pt as f64 / p0 as f64).ln(),
            _ => 0.0,
        };
        let raw = MicroRaw {
            spread,
            direction: self.direction,
            effective_spread: self.effective_spread,
            price_improvement: self.price_improvement,
            smart_price: smart,
            imbalance,
            log_return,
            volatility: self.volatility(),
        };

        let smart_pos = match (smart, quote.mid(), spread) {
            (Some(s), Some(m), Some(sp)) if sp > 0.0 => ((s - m) / sp).tanh(),
            _ => 0.0,
        };
        let es = match mid {
            Some(m) if m > 0.0 => (raw.effective_spread * m / spread_scale).tanh(),
            _ => 0.0,
        };
        let normalized = [
            spread.map_or(0.0, |s| (s / spread_scale).tanh()),
            raw.direction as f64,
            es,
            (raw.price_improvement / spread_scale).tanh(),
            smart_pos,
            raw.imbalance,
            (raw.log_return / self.log_return_scale).tanh(),
            (raw.volatility / self.volatility_scale).tanh(),
        ];
        MicroFeatures { raw, normalized, stale }
    }
}

/// Quote rule against the prevailing mid, tick test at the mid.
fn lee_ready(price: Price, mid: Option<f64>, tick: i8) -> i8 {
    match mid {
        Some(m) if (price as f64) > m => 1,
        Some(m) if (price as f64) < m => -1,
        _ => tick,
    }
}

fn push_capped(q: &mut VecDeque<f64>, v: f64, cap: usize) {
    if q.len() == cap {
        q.pop_front();
    }
    q.push_back(v);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::{DepthSnapshot, TradeRecord};
    use crate::types::{AgentId, OrderId, Side};

    fn depth(pb: i64, vb: u64, pa: i64, va: u64) -> DepthSnapshot {
        let mut d = DepthSnapshot::default();
        if vb > 0 {
            d.bid_prices[0] = pb;
            d.bid_vols[0] = vb;
        }
        if va > 0 {
            d.ask_prices[0] = pa;
            d.ask_vols[0] = va;
        }
        d
    }

    fn trade(price: i64, side: Side) -> TradeRecord {
        TradeRecord {
            ts: 0,
            price,
            qty: 1,
            aggressor_side: side,
            maker_owner: AgentId(0),
            taker_owner: AgentId(1),
            maker_order_id: OrderId(1),
            taker_order_id: OrderId(2),
            maker_seq: 0,
            maker_leaves: 0,
        }
    }

    fn state() -> MicrostructureState {
        MicrostructureState::new(&FeatureConfig::default(), 5)
    }

    #[test]
    fn balanced_book_is_neutral() {
        let s = state();
        let f = s.features(&MarketSample::snapshot(depth(10000, 200, 10020, 200)));
        assert_eq!(f.raw.smart_price, Some(10010.0));
        assert_eq!(f.normalized[4], 0.0);
        assert_eq!(f.normalized[5], 0.0);
        assert!(!f.stale);
    }

    #[test]
    fn imbalanced_book() {
        let s = state();
        let f = s.features(&MarketSample::snapshot(depth(10000, 300, 10020, 100)));
        assert_eq!(f.raw.imbalance, 0.5);
        assert_eq!(f.raw.smart_price, Some(10015.0));
        assert!((f.normalized[4] - 0.25f64.tanh()).abs() < 1e-15);
        assert!((f.normalized[4] - 0.2449).abs() < 1e-4);
    }

    #[test]
    fn effective_spread_of_buy_above_mid() {
        let mut s = state();
        let sample = MarketSample {
            ts: 0,
            depth: depth(10000, 10, 10010, 10),
            last_trade: Some(trade(10010, Side::Bid)),
            quote_before: Some(depth(10000, 10, 10010, 10).quote()),
        };
        s.observe(&sample);
        let f = s.features(&sample);
        assert_eq!(f.raw.direction, 1);
        assert!((f.raw.effective_spread - 2.0 * 5.0 / 10005.0).abs() < 1e-15);
        assert!((f.raw.effective_spread - 9.995e-4).abs() < 1e-7);
        assert_eq!(f.raw.price_improvement, 0.0);
    }

    #[test]
    fn warm_up_is_zero() {
        let s = state();
        let f = s.features(&MarketSample::snapshot(depth(10000, 10, 10010, 10)));
        assert_eq!(f.raw.direction, 0);
        assert_eq!(f.normalized[1..4], [0.0, 0.0, 0.0]);
        assert_eq!(f.normalized[6], 0.0);
    }

    #[test]
    fn one_sided_book_is_stale() {
        let s = state();
        let f = s.features(&MarketSample::snapshot(depth(10000, 10, 0, 0)));
        assert!(f.stale);
        assert_eq!(f.normalized[0], 0.0);
        assert_eq!(f.normalized[4], 0.0);
        assert_eq!(f.normalized[5], 0.0);
    }

    #[test]
    fn tick_test_at_mid() {
        let mut s = state();
        let q = depth(10000, 10, 10010, 10);
        let at = |p: i64, s: &mut MicrostructureState| {
            s.observe(&MarketSample {
                ts: 0,
                depth: q,
                last_trade: Some(trade(p, Side::Bid)),
                quote_before: Some(q.quote()),
            });
            s.direction
        };
        assert_eq!(at(10005, &mut s), 0);
        assert_eq!(at(10010, &mut s), 1);
        assert_eq!(at(10005, &mut s), -1);
        assert_eq!(at(10005, &mut s), -1);
        assert_eq!(at(10000, &mut s), -1);
    }

    #[test]
    fn price_improvement_against_touch() {
        let mut s = state();
        // sell aggressor walks through the bid: trade below NBB
        let q = depth(10000, 10, 10010, 10);
        s.observe(&MarketSample {
            ts: 0,
            depth: q,
            last_trade: Some(trade(9998, Side::Ask)),
            quote_before: Some(q.quote()),
        });
        let f = s.features(&MarketSample::snapshot(q));
        assert_eq!(f.raw.direction, -1);
        assert_eq!(f.raw.price_improvement, -2.0);
    }

    #[test]
    fn volatility_uses_one_step_returns() {
        let mut s = state();
        for (b, a) in [(100, 102), (102, 104), (100, 102)] {
            s.record_decision(&MarketSample::snapshot(depth(b, 1, a, 1)));
        }
        let r1 = (103f64 / 101.0).ln();
        let r2 = (101f64 / 103.0).ln();
        let mean = (r1 + r2) / 2.0;
        let sd = (((r1 - mean).powi(2) + (r2 - mean).powi(2)) / 1.0).sqrt();
        assert!((s.volatility() - sd).abs() < 1e-15);
    }

    #[test]
    fn spread_scale_is_rolling_median() {
        let mut s = MicrostructureState::new(&FeatureConfig::default(), 3);
        for sp in [2, 10, 4, 6] {
            s.record_decision(&MarketSample::snapshot(depth(100, 1, 100 + sp, 1)));
        }
        assert_eq!(s.spread_scale(), 6.0);
    }
}

use serde::{Deserialize, Serialize};

use super::config::{PlacementMode, TaskSide};
use crate::lob::{DepthSnapshot, DEPTH_LEVELS};
use crate::types::{Price, Qty, Side};

pub const ACTION_LOWER: [f64; 3] = [-1.0, 0.0, 0.0];
pub const ACTION_UPPER: [f64; 3] = [3.0, 1.0, 1.0];

/// Scaling factors for the three placement levels, clipped to
/// [`ACTION_LOWER`], [`ACTION_UPPER`]. NaN components become 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub [f64; 3]);

impl ActionVector {
    pub fn clipped(raw: [f64; 3]) -> Self {
        let mut a = [0.0; 3];
        for i in 0..3 {
            let x = if raw[i].is_nan() { 0.0 } else { raw[i] };
            a[i] = x.clamp(ACTION_LOWER[i], ACTION_UPPER[i]);
        }
        Self(a)
    }
}

/// Per-level volumes for one decision. `volumes.iter().sum() <= remaining`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderPlan {
    pub volumes: [Qty; 3],
    pub v_twap: Qty,
}

impl OrderPlan {
    pub fn total(&self) -> Qty {
        self.volumes.iter().sum()
    }

    pub fn baseline(&self) -> [Qty; 3] {
        [self.v_twap, 0, 0]
    }
}

/// `ceil(total / horizon)`; zero horizon yields 0.
pub fn twap_slice(total: Qty, horizon: u64) -> Qty {
    if horizon == 0 {
        0
    } else {
        total.div_ceil(horizon)
    }
}

/// Baseline `[v_twap, 0, 0]` plus `v_twap * a`, rounded to whole shares and
/// trimmed from level 3 upward until the plan fits in `remaining`.
pub fn blend_action(action: [f64; 3], v_twap: Qty, remaining: Qty) -> OrderPlan {
    let a = ActionVector::clipped(action).0;
    let base = [v_twap as f64, 0.0, 0.0];
    let mut volumes = [0; 3];
    for i in 0..3 {
        volumes[i] = (base[i] + v_twap as f64 * a[i]).round().max(0.0) as Qty;
    }
    let mut excess = volumes.iter().sum::<Qty>().saturating_sub(remaining);
    for v in volumes.iter_mut().rev() {
        let cut = excess.min(*v);
        *v -= cut;
        excess -= cut;
    }
    OrderPlan { volumes, v_twap }
}

/// Limit orders derived from a plan, best level first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub orders: Vec<(Price, Qty)>,
    /// The reference side of the book was empty and the last-known touch
    /// was used instead.
    pub fallback: bool,
}

/// Prices the three plan levels against the book.
///
/// Passive placement rests on the task's own side (bids for a buy);
/// marketable placement prices against the opposite side. Missing deeper
/// levels are synthesized one tick further from the touch. `last_touch` is
/// the last-known touch of the reference side; with an empty reference
/// side the levels start one tick away from it. Returns `None` when the
/// side is empty and no touch was ever seen.
pub fn place_orders(
    plan: &OrderPlan,
    depth: &DepthSnapshot,
    side: TaskSide,
    mode: PlacementMode,
    last_touch: Option<Price>,
) -> Option<Placement> {
    if plan.total() == 0 {
        return Some(Placement::default());
    }
    let book_side = side.book_side();
    let reference = match mode {
        PlacementMode::Passive => book_side,
        PlacementMode::Marketable => book_side.opposite(),
    };
    let (prices, vols) = match reference {
        Side::Bid => (&depth.bid_prices, &depth.bid_vols),
        Side::Ask => (&depth.ask_prices, &depth.ask_vols),
    };
    // Moving away from the touch: down for bids, up for asks.
    let away: Price = match reference {
        Side::Bid => -1,
        Side::Ask => 1,
    };
    let mut levels: Vec<Price> =
        (0..DEPTH_LEVELS).filter(|&i| vols[i] > 0).map(|i| prices[i]).take(3).collect();
    let mut fallback = false;
    if levels.is_empty() {
        levels.push(last_touch? + away);
        fallback = true;
    }
    while levels.len() < 3 {
        let deepest = *levels.last().expect("non-empty");
        levels.push(deepest + away);
    }
    let orders =
        plan.volumes.iter().zip(&levels).filter(|(v, p)| **v > 0 && **p > 0).map(|(v, p)| (*p, *v)).collect();
    Some(Placement { orders, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_examples() {
        assert_eq!(blend_action([0.0; 3], 100, 1000).volumes, [100, 0, 0]);
        assert_eq!(blend_action([-1.0, 0.0, 0.0], 100, 1000).volumes, [0, 0, 0]);
        assert_eq!(blend_action([3.0, 1.0, 1.0], 100, 1000).volumes, [400, 100, 100]);
        assert_eq!(blend_action([3.0, 1.0, 1.0], 100, 450).volumes, [400, 50, 0]);
    }

    #[test]
    fn blend_clips_out_of_range() {
        assert_eq!(blend_action([9.0, -5.0, 2.0], 100, 10_000).volumes, [400, 0, 100]);
        assert_eq!(blend_action([f64::NAN, 0.5, 0.0], 10, 10_000).volumes, [10, 5, 0]);
        assert_eq!(blend_action([3.0, 1.0, 1.0], 100, 30).volumes, [30, 0, 0]);
    }

    #[test]
    fn twap_slice_rounds_up() {
        assert_eq!(twap_slice(1000, 3), 334);
        assert_eq!(twap_slice(900, 3), 300);
        assert_eq!(twap_slice(5, 0), 0);
    }

    fn book() -> DepthSnapshot {
        DepthSnapshot {
            ts: 0,
            bid_prices: [10000, 9998, 9997, 0, 0],
            bid_vols: [100, 50, 10, 0, 0],
            ask_prices: [10002, 0, 0, 0, 0],
            ask_vols: [40, 0, 0, 0, 0],
        }
    }

    fn plan(v: [Qty; 3]) -> OrderPlan {
        OrderPlan { volumes: v, v_twap: 100 }
    }

    #[test]
    fn passive_buy_uses_bid_levels() {
        let p =
            place_orders(&plan([100, 0, 0]), &book(), TaskSide::Buy, PlacementMode::Passive, None).unwrap();
        assert_eq!(p.orders, vec![(10000, 100)]);
        let p =
            place_orders(&plan([100, 50, 25]), &book(), TaskSide::Buy, PlacementMode::Passive, None).unwrap();
        assert_eq!(p.orders, vec![(10000, 100), (9998, 50), (9997, 25)]);
        assert!(!p.fallback);
    }

    #[test]
    fn missing_levels_are_synthesized() {
        let p =
            place_orders(&plan([1, 2, 3]), &book(), TaskSide::Sell, PlacementMode::Passive, None).unwrap();
        assert_eq!(p.orders, vec![(10002, 1), (10003, 2), (10004, 3)]);
        let p =
            place_orders(&plan([1, 2, 3]), &book(), TaskSide::Buy, PlacementMode::Marketable, None).unwrap();
        assert_eq!(p.orders, vec![(10002, 1), (10003, 2), (10004, 3)]);
        let p =
            place_orders(&plan([1, 0, 3]), &book(), TaskSide::Sell, PlacementMode::Marketable, None).unwrap();
        assert_eq!(p.orders, vec![(10000, 1), (9997, 3)]);
    }

    #[test]
    fn empty_plan_places_nothing() {
        let p = place_orders(&plan([0, 0, 0]), &book(), TaskSide::Buy, PlacementMode::Passive, None).unwrap();
        assert!(p.orders.is_empty());
    }

    #[test]
    fn empty_side_falls_back_to_last_touch() {
        let mut d = book();
        d.bid_vols = [0; 5];
        let p =
            place_orders(&plan([5, 5, 0]), &d, TaskSide::Buy, PlacementMode::Passive, Some(9990)).unwrap();
        assert!(p.fallback);
        assert_eq!(p.orders, vec![(9989, 5), (9988, 5)]);
        assert_eq!(place_orders(&plan([5, 0, 0]), &d, TaskSide::Buy, PlacementMode::Passive, None), None);
    }
}

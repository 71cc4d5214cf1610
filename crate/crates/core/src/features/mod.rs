//! Observation features: task progress, microstructure, technical
//! indicators and raw top-of-book levels, each squashed into [-1, 1].
//!
//! The column order is fixed by [`FEATURE_NAMES`] and is part of the wire
//! protocol and the feature CSV format.

mod buffer;
mod lob;
mod micro;
mod task;
mod technical;

pub use buffer::{observation_matrix, FeatureBuffer, ObservationMatrix};
pub use lob::lob_features;
pub use micro::{MicroFeatures, MicroRaw, MicrostructureState};
pub use task::task_features;
pub use technical::{IndicatorState, TECHNICAL_NAMES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::MarketUpdate;
use crate::lob::{DepthSnapshot, Quote, TradeRecord};
use crate::types::{Price, Qty, Ts, NANOS_PER_SEC};

pub const FEATURE_COUNT: usize = 39;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "remaining_time",
    "remaining_qty",
    "fulfillment",
    "spread",
    "trade_dir",
    "eff_spread",
    "price_improve",
    "smart_price",
    "imbalance",
    "log_return",
    "volatility",
    "williams_r",
    "ema_sig",
    "kst_sig",
    "macd_sig",
    "keltner_pos",
    "donchian_pos",
    "bollinger_pos",
    "ichimoku_pos",
    "bid_px_1",
    "bid_px_2",
    "bid_px_3",
    "bid_px_4",
    "bid_px_5",
    "ask_px_1",
    "ask_px_2",
    "ask_px_3",
    "ask_px_4",
    "ask_px_5",
    "bid_vol_1",
    "bid_vol_2",
    "bid_vol_3",
    "bid_vol_4",
    "bid_vol_5",
    "ask_vol_1",
    "ask_vol_2",
    "ask_vol_3",
    "ask_vol_4",
    "ask_vol_5",
];

pub const TASK_RANGE: std::ops::Range<usize> = 0..3;
pub const MICRO_RANGE: std::ops::Range<usize> = 3..11;
pub const TECHNICAL_RANGE: std::ops::Range<usize> = 11..19;
pub const LOB_RANGE: std::ops::Range<usize> = 19..39;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("task horizon and total quantity must be positive")]
    EmptyTask,
    #[error("reference mid must be positive")]
    NoReferenceMid,
}

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Forces a value into [-1, 1]; NaN maps to 0.
pub(crate) fn unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-1.0, 1.0)
    }
}

/// Indicator periods and normalization scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub williams_period: usize,
    pub ema_fast: usize,
    pub ema_slow: usize,
    pub macd_signal: usize,
    pub kst_roc: [usize; 4],
    pub kst_sma: [usize; 4],
    pub kst_signal: usize,
    pub keltner_period: usize,
    pub keltner_atr: usize,
    pub keltner_mult: f64,
    pub donchian_period: usize,
    pub bollinger_period: usize,
    pub bollinger_k: f64,
    pub ichimoku: [usize; 3],
    pub ichimoku_shift: usize,
    /// Relative scale for EMA and MACD crossover differentials.
    pub trend_scale: f64,
    pub kst_scale: f64,
    pub log_return_scale: f64,
    pub volatility_scale: f64,
    /// Steps of one-step log mid returns in the volatility window.
    pub volatility_window: usize,
    /// Lookback of the rolling median spread and mean top volume.
    pub scale_window_ns: Ts,
    /// Gain applied to relative level distance from mid.
    pub price_gain: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            williams_period: 14,
            ema_fast: 12,
            ema_slow: 26,
            macd_signal: 9,
            kst_roc: [10, 15, 20, 30],
            kst_sma: [10, 10, 10, 15],
            kst_signal: 9,
            keltner_period: 20,
            keltner_atr: 10,
            keltner_mult: 2.0,
            donchian_period: 20,
            bollinger_period: 20,
            bollinger_k: 2.0,
            ichimoku: [9, 26, 52],
            ichimoku_shift: 26,
            trend_scale: 5e-4,
            kst_scale: 2e-3,
            log_return_scale: 0.01,
            volatility_scale: 1e-3,
            volatility_window: 30,
            scale_window_ns: 300 * NANOS_PER_SEC,
            price_gain: 1000.0,
        }
    }
}

/// Market state at one instant: depth plus the trade that produced it, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSample {
    pub ts: Ts,
    pub depth: DepthSnapshot,
    pub last_trade: Option<TradeRecord>,
    /// Touch prevailing just before `last_trade`.
    pub quote_before: Option<Quote>,
}

impl MarketSample {
    pub fn snapshot(depth: DepthSnapshot) -> Self {
        Self { ts: depth.ts, depth, last_trade: None, quote_before: None }
    }

    pub fn from_update(u: &MarketUpdate) -> Self {
        Self {
            ts: u.ts,
            depth: u.depth,
            last_trade: u.trades.last().copied(),
            quote_before: Some(u.quote_before),
        }
    }

    pub fn mid(&self) -> Option<f64> {
        self.depth.quote().mid()
    }

    pub fn last_price(&self) -> Option<Price> {
        self.last_trade.map(|t| t.price)
    }
}

/// Task progress needed for the first three columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskProgress {
    pub step: u64,
    pub horizon: u64,
    pub remaining: Qty,
    pub total: Qty,
    pub last_submitted: Qty,
    pub last_executed: Qty,
}

/// Streaming feature pipeline for one environment instance.
pub struct FeatureEngine {
    cfg: FeatureConfig,
    micro: MicrostructureState,
    tech: IndicatorState,
    buffer: FeatureBuffer,
    last_mid: Option<f64>,
}

impl FeatureEngine {
    /// `interval` is the decision interval; `window` the longest
    /// observation window the consumer will request.
    pub fn new(cfg: FeatureConfig, interval: Ts, window: usize) -> Self {
        let scale_steps = cfg.scale_window_ns.div_ceil(interval.max(1)).max(1) as usize;
        let tech = IndicatorState::new(&cfg);
        let capacity = window + tech.max_warmup();
        Self {
            micro: MicrostructureState::new(&cfg, scale_steps),
            tech,
            buffer: FeatureBuffer::new(capacity),
            last_mid: None,
            cfg,
        }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Feeds a trade broadcast between decision instants.
    pub fn on_market_update(&mut self, update: &MarketUpdate) {
        self.micro.observe(&MarketSample::from_update(update));
    }

    /// Computes the row for a decision instant and appends it to the buffer.
    pub fn on_decision(
        &mut self,
        depth: &DepthSnapshot,
        task: &TaskProgress,
    ) -> Result<FeatureVector, FeatureError> {
        let sample = MarketSample::snapshot(*depth);
        let mid = sample.mid().or(self.last_mid);
        self.last_mid = mid;

        let mut row = [0.0; FEATURE_COUNT];
        let t = task_features(
            task.step,
            task.horizon,
            task.remaining,
            task.total,
            task.last_submitted,
            task.last_executed,
        )?;
        row[TASK_RANGE].copy_from_slice(&t);

        self.micro.record_decision(&sample);
        let micro = self.micro.features(&sample);
        row[MICRO_RANGE].copy_from_slice(&micro.normalized);

        if let Some(m) = mid {
            let tech = self.tech.update(m);
            row[TECHNICAL_RANGE].copy_from_slice(&tech);
            let lob = lob_features(depth, m, self.micro.volume_scale(), self.cfg.price_gain)?;
            row[LOB_RANGE].copy_from_slice(&lob);
        }
        for v in row.iter_mut() {
            *v = unit(*v);
        }
        self.buffer.push(row);
        Ok(row)
    }

    pub fn buffer(&self) -> &FeatureBuffer {
        &self.buffer
    }

    pub fn observation(&self, window: usize) -> ObservationMatrix {
        observation_matrix(&self.buffer, window)
    }

    pub fn micro(&self) -> &MicrostructureState {
        &self.micro
    }
}

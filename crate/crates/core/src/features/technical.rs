//! Streaming technical indicators over the per-decision mid series.
//!
//! Every indicator emits 0 until its warm-up is satisfied. Band indicators
//! report the close's position inside the band, clipped to [-1, 1];
//! crossover indicators report a tanh-scaled fast-minus-signal difference.

use std::collections::VecDeque;

use super::{unit, FeatureConfig};

pub const TECHNICAL_NAMES: [&str; 8] = [
    "williams_r",
    "ema_sig",
    "kst_sig",
    "macd_sig",
    "keltner_pos",
    "donchian_pos",
    "bollinger_pos",
    "ichimoku_pos",
];

#[derive(Debug, Clone, Copy)]
struct Ema {
    alpha: f64,
    value: Option<f64>,
}

impl Ema {
    fn new(period: usize) -> Self {
        Self { alpha: 2.0 / (period as f64 + 1.0), value: None }
    }

    fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            Some(prev) => prev + self.alpha * (x - prev),
            None => x,
        };
        self.value = Some(v);
        v
    }
}

#[derive(Debug, Clone)]
struct Sma {
    period: usize,
    window: VecDeque<f64>,
}

impl Sma {
    fn new(period: usize) -> Self {
        Self { period: period.max(1), window: VecDeque::new() }
    }

    fn update(&mut self, x: f64) -> Option<f64> {
        if self.window.len() == self.period {
            self.window.pop_front();
        }
        self.window.push_back(x);
        (self.window.len() == self.period).then(|| self.window.iter().sum::<f64>() / self.period as f64)
    }
}

/// Position of `x` in `[lo, hi]` mapped to [-1, 1]; zero-width bands give 0.
pub(crate) fn band_position(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width.is_nan() || width <= 0.0 {
        return 0.0;
    }
    unit(2.0 * (x - lo) / width - 1.0)
}

fn min_max(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone)]
pub struct IndicatorState {
    cfg: FeatureConfig,
    count: usize,
    history: VecDeque<f64>,
    history_cap: usize,

    ema_fast: Ema,
    ema_slow: Ema,
    macd_signal: Ema,
    kst_rocs: [Sma; 4],
    kst_signal: Sma,
    keltner_mid: Ema,
    atr: Ema,
    /// Ichimoku spans (A, B) awaiting their forward displacement.
    spans: VecDeque<(f64, f64)>,
}

impl IndicatorState {
    pub fn new(cfg: &FeatureConfig) -> Self {
        let history_cap = [
            cfg.williams_period,
            cfg.donchian_period,
            cfg.bollinger_period,
            cfg.ichimoku[0],
            cfg.ichimoku[1],
            cfg.ichimoku[2],
            cfg.kst_roc.iter().max().copied().unwrap_or(0) + 1,
        ]
        .into_iter()
        .max()
        .unwrap_or(1)
        .max(2);
        Self {
            count: 0,
            history: VecDeque::with_capacity(history_cap),
            history_cap,
            ema_fast: Ema::new(cfg.ema_fast),
            ema_slow: Ema::new(cfg.ema_slow),
            macd_signal: Ema::new(cfg.macd_signal),
            kst_rocs: cfg.kst_sma.map(Sma::new),
            kst_signal: Sma::new(cfg.kst_signal),
            keltner_mid: Ema::new(cfg.keltner_period),
            atr: Ema::new(cfg.keltner_atr),
            spans: VecDeque::new(),
            cfg: cfg.clone(),
        }
    }

    /// Longest warm-up, in updates, across all eight indicators.
    pub fn max_warmup(&self) -> usize {
        let c = &self.cfg;
        let kst = (0..4).map(|i| c.kst_roc[i] + c.kst_sma[i]).max().unwrap_or(0) + c.kst_signal - 1;
        [
            c.williams_period,
            c.ema_slow.max(c.ema_fast),
            kst,
            c.ema_slow + c.macd_signal - 1,
            c.keltner_period.max(c.keltner_atr + 1),
            c.donchian_period,
            c.bollinger_period,
            c.ichimoku[2].max(c.ichimoku[1]) + c.ichimoku_shift,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn window(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let len = self.history.len();
        self.history.iter().skip(len.saturating_sub(n)).copied()
    }

    /// Consumes the next close and returns the eight indicator features.
    pub fn update(&mut self, close: f64) -> [f64; 8] {
        let prev = self.history.back().copied();
        if self.history.len() == self.history_cap {
            self.history.pop_front();
        }
        self.history.push_back(close);
        self.count += 1;
        let n = self.count;
        let c = self.cfg.clone();

        let williams = if n >= c.williams_period {
            let (lo, hi) = min_max(self.window(c.williams_period));
            band_position(close, lo, hi)
        } else {
            0.0
        };

        let fast = self.ema_fast.update(close);
        let slow = self.ema_slow.update(close);
        let ema = if n >= c.ema_slow.max(c.ema_fast) {
            ((fast - slow) / close / c.trend_scale).tanh()
        } else {
            0.0
        };

        let macd_line = fast - slow;
        let signal = self.macd_signal.update(macd_line);
        let macd = if n >= c.ema_slow + c.macd_signal - 1 {
            ((macd_line - signal) / close / c.trend_scale).tanh()
        } else {
            0.0
        };

        let kst = self.update_kst(close);

        let mid = self.keltner_mid.update(close);
        let tr = prev.map_or(0.0, |p| (close - p).abs());
        let atr = if prev.is_some() { self.atr.update(tr) } else { 0.0 };
        let keltner = if n >= c.keltner_period.max(c.keltner_atr + 1) {
            band_position(close, mid - c.keltner_mult * atr, mid + c.keltner_mult * atr)
        } else {
            0.0
        };

        let donchian = if n >= c.donchian_period {
            let (lo, hi) = min_max(self.window(c.donchian_period));
            band_position(close, lo, hi)
        } else {
            0.0
        };

        let bollinger = if n >= c.bollinger_period {
            let p = c.bollinger_period as f64;
            let mean = self.window(c.bollinger_period).sum::<f64>() / p;
            let var = self.window(c.bollinger_period).map(|x| (x - mean).powi(2)).sum::<f64>() / p;
            let sd = var.sqrt();
            band_position(close, mean - c.bollinger_k * sd, mean + c.bollinger_k * sd)
        } else {
            0.0
        };

        let ichimoku = self.update_ichimoku(close);

        [williams, ema, kst, macd, keltner, donchian, bollinger, ichimoku].map(unit)
    }

    fn update_kst(&mut self, close: f64) -> f64 {
        let c = &self.cfg;
        let len = self.history.len();
        let mut kst = 0.0;
        let mut complete = true;
        for i in 0..4 {
            let lag = c.kst_roc[i];
            if len <= lag {
                complete = false;
                continue;
            }
            let past = self.history[len - 1 - lag];
            let roc = close / past - 1.0;
            match self.kst_rocs[i].update(roc) {
                Some(avg) => kst += (i + 1) as f64 * avg,
                None => complete = false,
            }
        }
        if !complete {
            return 0.0;
        }
        match self.kst_signal.update(kst) {
            Some(signal) => ((kst - signal) / c.kst_scale).tanh(),
            None => 0.0,
        }
    }

    fn update_ichimoku(&mut self, close: f64) -> f64 {
        let [conv, base, lead] = self.cfg.ichimoku;
        let n = self.count;
        if n >= lead.max(base) {
            let mid_of = |w: usize| {
                let (lo, hi) = min_max(self.window(w));
                (lo + hi) / 2.0
            };
            let tenkan = mid_of(conv);
            let kijun = mid_of(base);
            let span_b = mid_of(lead);
            self.spans.push_back(((tenkan + kijun) / 2.0, span_b));
        }
        // The cloud plotted at this step was computed `shift` steps ago.
        if self.spans.len() > self.cfg.ichimoku_shift {
            let (a, b) = self.spans.pop_front().expect("non-empty");
            band_position(close, a.min(b), a.max(b))
        } else {
            0.0
        }
    }
}

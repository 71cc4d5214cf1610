use super::FeatureError;
use crate::lob::{DepthSnapshot, DEPTH_LEVELS};

/// Top-5 prices as `tanh(gain * (p - mid) / mid)` and volumes as
/// `tanh(v / vol_scale)`, ordered bid prices, ask prices, bid volumes,
/// ask volumes. Absent levels are 0.
pub fn lob_features(
    depth: &DepthSnapshot,
    ref_mid: f64,
    vol_scale: f64,
    price_gain: f64,
) -> Result<[f64; 4 * DEPTH_LEVELS], FeatureError> {
    if ref_mid.is_nan() || ref_mid <= 0.0 {
        return Err(FeatureError::NoReferenceMid);
    }
    let vol_scale = if vol_scale > 0.0 { vol_scale } else { 1.0 };
    let mut out = [0.0; 4 * DEPTH_LEVELS];
    let price = |p: i64| (price_gain * (p as f64 - ref_mid) / ref_mid).tanh();
    for i in 0..DEPTH_LEVELS {
        if depth.bid_vols[i] > 0 {
            out[i] = price(depth.bid_prices[i]);
            out[2 * DEPTH_LEVELS + i] = (depth.bid_vols[i] as f64 / vol_scale).tanh();
        }
        if depth.ask_vols[i] > 0 {
            out[DEPTH_LEVELS + i] = price(depth.ask_prices[i]);
            out[3 * DEPTH_LEVELS + i] = (depth.ask_vols[i] as f64 / vol_scale).tanh();
        }
    }
    Ok(out)
}

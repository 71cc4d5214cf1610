use super::{unit, FeatureError};
use crate::types::Qty;

/// Remaining time, remaining quantity and latest-order fulfillment, each in
/// [-1, 1]. An order with nothing submitted reports fulfillment -1.
pub fn task_features(
    step: u64,
    horizon: u64,
    remaining: Qty,
    total: Qty,
    last_submitted: Qty,
    last_executed: Qty,
) -> Result<[f64; 3], FeatureError> {
    if horizon == 0 || total == 0 {
        return Err(FeatureError::EmptyTask);
    }
    let horizon_f = horizon as f64;
    let time = (horizon_f - 2.0 * step as f64) / horizon_f;
    let qty = (2.0 * remaining as f64 - total as f64) / total as f64;
    let fulfillment =
        if last_submitted == 0 { -1.0 } else { 2.0 * last_executed as f64 / last_submitted as f64 - 1.0 };
    Ok([unit(time), unit(qty), unit(fulfillment)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_symmetry() {
        assert_eq!(task_features(0, 10, 100, 100, 0, 0).unwrap()[0], 1.0);
        assert_eq!(task_features(10, 10, 100, 100, 0, 0).unwrap()[0], -1.0);
        assert_eq!(task_features(3, 10, 50, 100, 0, 0).unwrap()[1], 0.0);
        assert_eq!(task_features(3, 10, 0, 100, 0, 0).unwrap()[1], -1.0);
    }

    #[test]
    fn fulfillment_ratio() {
        assert_eq!(task_features(1, 10, 50, 100, 100, 25).unwrap()[2], -0.5);
        assert_eq!(task_features(1, 10, 50, 100, 100, 100).unwrap()[2], 1.0);
        assert_eq!(task_features(1, 10, 50, 100, 0, 0).unwrap()[2], -1.0);
    }

    #[test]
    fn empty_task_is_an_error() {
        assert_eq!(task_features(0, 0, 1, 1, 0, 0), Err(FeatureError::EmptyTask));
        assert_eq!(task_features(0, 1, 0, 0, 0, 0), Err(FeatureError::EmptyTask));
    }
}

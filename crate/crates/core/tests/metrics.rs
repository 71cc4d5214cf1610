use exec_arena::env::{episode_report, summarize, write_summary_csv, EnvError, EpisodeOutcome, TaskSide};
use proptest::prelude::*;

fn side() -> impl Strategy<Value = TaskSide> {
    prop_oneof![Just(TaskSide::Buy), Just(TaskSide::Sell)]
}

fn outcome() -> impl Strategy<Value = EpisodeOutcome> {
    (side(), 1..100_000u64, 1..10_000_000i64, 1..10_000_000i64)
        .prop_map(|(side, total_qty, c_rl, c_twap)| EpisodeOutcome { side, total_qty, c_rl, c_twap })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn delta_c_is_invariant_under_price_rescaling(o in outcome(), k in 1..1_000i64) {
        let scaled = EpisodeOutcome { c_rl: o.c_rl * k, c_twap: o.c_twap * k, ..o };
        prop_assert_eq!(o.delta_c().unwrap().to_bits(), scaled.delta_c().unwrap().to_bits());
    }

    #[test]
    fn delta_c_sign_follows_the_side(o in outcome()) {
        let d = o.delta_c().unwrap();
        let saved = match o.side {
            TaskSide::Buy => o.c_rl < o.c_twap,
            TaskSide::Sell => o.c_rl > o.c_twap,
        };
        prop_assert_eq!(d > 0.0, saved);
        prop_assert_eq!(d == 0.0, o.c_rl == o.c_twap);
    }

    #[test]
    fn report_matches_direct_statistics(xs in prop::collection::vec(-0.5f64..0.5, 1..60)) {
        let r = summarize(xs.clone()).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        prop_assert!(close(r.mean, mean));
        if xs.len() > 1 {
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(close(r.std_dev, sd));
        }
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0 };
        prop_assert!(close(r.median, median));
        let gains: Vec<f64> = xs.iter().copied().filter(|x| *x > 0.0).collect();
        let losses: Vec<f64> = xs.iter().copied().filter(|x| *x < 0.0).collect();
        prop_assert!(close(r.gain_probability, gains.len() as f64 / n));
        match r.glr {
            Some(g) => {
                let mg = gains.iter().sum::<f64>() / gains.len() as f64;
                let ml = -losses.iter().sum::<f64>() / losses.len() as f64;
                prop_assert!(close(g, mg / ml));
            }
            None => prop_assert!(gains.is_empty() || losses.is_empty()),
        }
    }
}

#[test]
fn worked_gain_loss_example() {
    // +2%, +4%, -3% on a buy task with TWAP cost 10,000.
    let outcomes: Vec<EpisodeOutcome> = [9_800, 9_600, 10_300]
        .into_iter()
        .map(|c_rl| EpisodeOutcome { side: TaskSide::Buy, total_qty: 100, c_rl, c_twap: 10_000 })
        .collect();
    let r = episode_report(&outcomes).unwrap();
    assert_eq!(r.delta_c, vec![0.02, 0.04, -0.03]);
    assert!((r.glr.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.gain_probability, 2.0 / 3.0);
    assert!((r.mean - 0.01).abs() < 1e-15);
    assert_eq!(r.median, 0.02);
}

#[test]
fn degenerate_inputs() {
    assert!(matches!(episode_report(&[]), Err(EnvError::NoEpisodes)));
    let zero = EpisodeOutcome { side: TaskSide::Sell, total_qty: 1, c_rl: 5, c_twap: 0 };
    assert!(matches!(zero.delta_c(), Err(EnvError::ZeroTwapCost)));
    let all_gains = summarize(vec![0.1, 0.2]).unwrap();
    assert_eq!(all_gains.glr, None);
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &all_gains).unwrap();
    assert!(String::from_utf8(buf).unwrap().contains(",undefined,"));
}

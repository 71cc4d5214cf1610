use exec_arena::env::{
    competitive_reward, imitation_reward, run_episode, total_reward, windowed_cost_volume, BookMode,
    DataSource, EnvConfig, EnvError, Execution, ExecutionEnv, PlacementMode, TaskSide,
};
use exec_arena::features::FEATURE_COUNT;
use exec_arena::market_data::SyntheticConfig;
use exec_arena::types::{Qty, NANOS_PER_SEC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.task.total_qty = 1_000;
    cfg.task.horizon_steps = 8;
    cfg.task.interval_ns = 30 * NANOS_PER_SEC;
    cfg.data.warmup_steps = 4;
    cfg.data.source = DataSource::Synthetic(SyntheticConfig {
        duration: 400 * NANOS_PER_SEC,
        ..SyntheticConfig::default()
    });
    cfg.observation_window = 10;
    cfg
}

/// Deep book with no background flow.
fn static_config(depth: Qty) -> EnvConfig {
    let mut cfg = small_config();
    cfg.data.source = DataSource::Synthetic(SyntheticConfig {
        limit_rate: 0.0,
        market_rate: 0.0,
        cancel_rate: 0.0,
        init_depth: depth,
        ..SyntheticConfig::default()
    });
    cfg
}

fn random_policy(seed: u64) -> impl FnMut(&exec_arena::env::StepResult) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move |_| [rng.gen_range(-1.5..3.5), rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)]
}

#[test]
fn reset_shape_and_info() {
    let cfg = EnvConfig::default();
    let mut env = ExecutionEnv::new(cfg.clone()).unwrap();
    let r = env.reset(None).unwrap();
    assert_eq!((r.observation.rows, r.observation.cols), (60, FEATURE_COUNT));
    assert_eq!(r.info.total_qty, cfg.task.total_qty);
    assert_eq!(r.info.horizon, cfg.task.horizon_steps);
    assert!(!r.done);
    assert!(r.observation.data.iter().all(|x| (-1.0..=1.0).contains(x)));
}

#[test]
fn fixed_seed_gives_identical_initial_observation() {
    let a = ExecutionEnv::new(small_config()).unwrap().reset(Some(11)).unwrap();
    let b = ExecutionEnv::new(small_config()).unwrap().reset(Some(11)).unwrap();
    assert_eq!(a, b);
    let c = ExecutionEnv::new(small_config()).unwrap().reset(Some(12)).unwrap();
    assert_ne!(a.observation, c.observation);
}

#[test]
fn single_step_episode() {
    let mut cfg = small_config();
    cfg.task.horizon_steps = 1;
    let mut env = ExecutionEnv::new(cfg).unwrap();
    env.reset(Some(3)).unwrap();
    let r = env.step([0.0; 3]).unwrap();
    assert!(r.done);
    assert_eq!(r.info.remaining, 0);
    assert_eq!(r.info.learner.volume, 1_000);
    assert_eq!(env.teacher_executed(), Some(1_000));
    assert!(matches!(env.step([0.0; 3]), Err(EnvError::EpisodeFinished)));
}

#[test]
fn lifecycle_errors() {
    let mut env = ExecutionEnv::new(small_config()).unwrap();
    assert!(matches!(env.step([0.0; 3]), Err(EnvError::NotReset)));
    env.reset(Some(1)).unwrap();
    assert!(matches!(env.step([f64::NAN, 0.0, 0.0]), Err(EnvError::InvalidAction)));
    let mut bad = small_config();
    bad.task.total_qty = 0;
    assert!(matches!(ExecutionEnv::new(bad), Err(EnvError::Config(_))));
    let mut missing = small_config();
    missing.data.source = DataSource::Replay { path: "/nonexistent/day.csv".into() };
    let mut env = ExecutionEnv::new(missing).unwrap();
    assert!(matches!(env.reset(None), Err(EnvError::Data(_))));
}

#[test]
fn conservation_across_modes() {
    for (i, (placement, book)) in [
        (PlacementMode::Passive, BookMode::Shared),
        (PlacementMode::Marketable, BookMode::Shared),
        (PlacementMode::Passive, BookMode::Isolated),
        (PlacementMode::Marketable, BookMode::Isolated),
    ]
    .into_iter()
    .enumerate()
    {
        for side in [TaskSide::Buy, TaskSide::Sell] {
            let mut cfg = small_config();
            cfg.placement = placement;
            cfg.book_mode = book;
            cfg.task.side = side;
            let mut env = ExecutionEnv::new(cfg).unwrap();
            for seed in 0..3 {
                let (outcome, steps) =
                    run_episode(&mut env, Some(seed), random_policy(seed + 100 * i as u64)).unwrap();
                let task = env.task().unwrap();
                let traded: Qty = task.trade_log.iter().map(|t| t.qty).sum();
                let via_info: Qty = steps.iter().map(|s| s.info.learner.volume).sum();
                assert_eq!(traded, 1_000, "{placement:?} {book:?} {side:?} seed {seed}");
                assert_eq!(via_info, 1_000);
                assert_eq!(task.remaining, 0);
                assert_eq!(env.teacher_executed(), Some(1_000));
                assert!(outcome.c_rl > 0 && outcome.c_twap > 0);
                assert!(steps.last().unwrap().done);
                assert!(steps[..steps.len() - 1].iter().all(|s| !s.done));
            }
        }
    }
}

#[test]
fn rewards_recompute_from_logs() {
    for alpha in [0.01, 0.0, 0.5] {
        let mut cfg = small_config();
        cfg.reward.alpha = alpha;
        cfg.reward.window = 3;
        cfg.placement = PlacementMode::Marketable;
        let mut env = ExecutionEnv::new(cfg.clone()).unwrap();
        let (_, steps) = run_episode(&mut env, Some(5), random_policy(9)).unwrap();
        let state = env.rewards().unwrap();
        let mut rl_log = Vec::new();
        let mut base_log = Vec::new();
        for (i, s) in steps.iter().enumerate() {
            let k = i + 1;
            // oracle: the learner's step execution rebuilt from its fills
            let from_fills = s
                .info
                .fills
                .iter()
                .fold(Execution::default(), |acc, &(p, q)| acc.plus(Execution::fill(p, q)));
            assert_eq!(from_fills, s.info.learner);
            rl_log.push(from_fills);
            base_log.push(s.info.teacher);
            let rl = windowed_cost_volume(&rl_log, k, cfg.reward.window);
            let base = windowed_cost_volume(&base_log, k, cfg.reward.window);
            let terms = s.info.reward_terms.unwrap();
            assert_eq!((terms.rl_window, terms.base_window), (rl, base));
            let r_comp = competitive_reward(TaskSide::Buy, base, rl, terms.touch);
            let r_mimic = imitation_reward(rl.volume, base.volume);
            assert_eq!(terms.r_comp, r_comp);
            assert_eq!(s.reward, total_reward(r_comp as f64, r_mimic, alpha));
            if alpha == 0.0 {
                assert_eq!(s.reward, r_comp as f64);
            }
        }
        assert_eq!(state.rl_log(), &rl_log[..]);
        assert_eq!(state.base_log(), &base_log[..]);
    }
}

#[test]
fn baseline_neutrality_on_deep_static_book() {
    for (total, horizon) in [(1_000, 8), (1_001, 8), (5, 4), (999, 1)] {
        let mut cfg = static_config(1_000_000_000);
        cfg.placement = PlacementMode::Marketable;
        cfg.task.total_qty = total;
        cfg.task.horizon_steps = horizon;
        let mut env = ExecutionEnv::new(cfg).unwrap();
        let (outcome, steps) = run_episode(&mut env, Some(1), |_| [0.0; 3]).unwrap();
        for s in &steps {
            let t = s.info.reward_terms.unwrap();
            assert_eq!(t.rl_window.volume, t.base_window.volume, "{total}/{horizon} step {}", s.info.step);
            assert_eq!(t.r_mimic, 0.0);
            assert_eq!(t.r_comp, 0);
            assert_eq!(s.info.terminal_qty, 0);
        }
        assert_eq!(outcome.c_rl, outcome.c_twap);
        assert_eq!(env.teacher_executed(), Some(total));
    }
}

#[test]
fn passive_orders_on_static_book_end_in_terminal_sweep() {
    let mut env = ExecutionEnv::new(static_config(1_000_000)).unwrap();
    let (_, steps) = run_episode(&mut env, Some(1), |_| [0.0; 3]).unwrap();
    let last = steps.last().unwrap();
    assert_eq!(last.info.terminal_qty, 1_000);
    assert!(steps[..steps.len() - 1].iter().all(|s| s.info.learner.volume == 0));
}

#[test]
fn larger_terminal_order_pays_weakly_more() {
    let mut prev = 0.0;
    for total in [50, 100, 300, 301, 900, 1_500] {
        let mut cfg = static_config(300);
        // the teacher sweeps its own copy of the book
        cfg.book_mode = BookMode::Isolated;
        cfg.task.horizon_steps = 1;
        cfg.task.total_qty = total;
        let mut env = ExecutionEnv::new(cfg).unwrap();
        env.reset(None).unwrap();
        // nothing placed, so the whole parent order is swept at the end
        let r = env.step([-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.info.terminal_qty, total);
        let avg = r.info.learner.cost as f64 / r.info.learner.volume as f64;
        assert!(avg >= prev, "{total}: {avg} < {prev}");
        prev = avg;
    }
}

#[test]
fn early_completion_still_completes_teacher() {
    let mut cfg = static_config(1_000_000);
    cfg.placement = PlacementMode::Marketable;
    let mut env = ExecutionEnv::new(cfg).unwrap();
    let (outcome, steps) = run_episode(&mut env, Some(1), |_| [3.0, 1.0, 1.0]).unwrap();
    assert!(steps.len() < 8);
    assert_eq!(env.teacher_executed(), Some(1_000));
    assert!(outcome.c_twap > 0);
    assert!(outcome.delta_c().is_ok());
}

#[test]
fn isolated_books_do_not_share_trades() {
    let mut cfg = small_config();
    cfg.book_mode = BookMode::Isolated;
    cfg.placement = PlacementMode::Marketable;
    cfg.record_tape = true;
    let mut env = ExecutionEnv::new(cfg).unwrap();
    run_episode(&mut env, Some(2), |_| [1.0, 0.0, 0.0]).unwrap();
    let learner = env.trade_tape().unwrap().to_vec();
    let teacher = env.teacher_tape().unwrap().to_vec();
    assert_ne!(learner, teacher);
    let owners = |tape: &[exec_arena::lob::TradeRecord]| {
        tape.iter().flat_map(|t| [t.maker_owner, t.taker_owner]).collect::<std::collections::BTreeSet<_>>()
    };
    // learner exchange 0, replay 1, teacher exchange 2, replay 3, teacher 4, learner 5
    assert!(!owners(&learner).contains(&exec_arena::types::AgentId(4)));
    assert!(!owners(&teacher).contains(&exec_arena::types::AgentId(5)));
}

#[test]
fn episodes_are_reproducible() {
    let mut cfg = small_config();
    cfg.record_event_log = true;
    cfg.record_tape = true;
    let run = || {
        let mut env = ExecutionEnv::new(cfg.clone()).unwrap();
        let (outcome, steps) = run_episode(&mut env, Some(21), random_policy(4)).unwrap();
        (outcome, steps, env.event_log().unwrap().to_string(), env.trade_tape().unwrap().to_vec())
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert!(a.2.lines().count() > 100);
}

#[test]
fn reset_reuses_one_env() {
    let mut env = ExecutionEnv::new(small_config()).unwrap();
    let (first, _) = run_episode(&mut env, Some(8), |_| [0.5, 0.2, 0.0]).unwrap();
    run_episode(&mut env, Some(9), |_| [0.5, 0.2, 0.0]).unwrap();
    let (again, _) = run_episode(&mut env, Some(8), |_| [0.5, 0.2, 0.0]).unwrap();
    assert_eq!(first, again);
}

#[test]
fn sweep_beyond_the_book_reports_missing_liquidity() {
    let mut cfg = static_config(300);
    cfg.book_mode = BookMode::Isolated;
    cfg.task.horizon_steps = 1;
    cfg.task.total_qty = 2_000;
    let mut env = ExecutionEnv::new(cfg).unwrap();
    env.reset(None).unwrap();
    assert!(matches!(env.step([-1.0, 0.0, 0.0]), Err(EnvError::NoLiquidity { remaining: 500 })));
    assert!(env.is_done());
}

//! Online engine consistency: with a perfect predictor and a window larger
//! than the video, delivered layers must match the offline plan exactly on
//! every instance, regardless of the replanning period.

mod common;

use common::{random_instance, suite_size};
use svc_lbp::lbp::plan_offline_skip;
use svc_lbp::model::Mode;
use svc_lbp::online::{run_online, OnlineConfig};
use svc_lbp::prediction::PredictionConfig;
use svc_lbp::validate::validate_session;

#[test]
fn oracle_predictor_full_window_matches_offline() {
    let n = suite_size(250);
    for seed in 0..n as u64 {
        let inst = random_instance(seed, Mode::Skip);
        let plan = plan_offline_skip(&inst.spec, &inst.config, &inst.trace).unwrap();
        let deadline_c = *plan.upper_deadline.last().unwrap();
        let window = deadline_c + 1;
        let alpha = (1 + (seed % 4)).min(window);
        let online = OnlineConfig::new(window, alpha, 0);
        let log = run_online(
            &inst.spec,
            &inst.config,
            &online,
            &PredictionConfig::Oracle,
            &inst.trace,
        )
        .unwrap_or_else(|e| panic!("seed {}: online failed: {}", seed, e));
        validate_session(&log, &inst.spec, &inst.config, &inst.trace)
            .unwrap_or_else(|e| panic!("seed {}: session invalid: {}", seed, e));
        assert_eq!(
            log.delivered_levels(),
            plan.levels,
            "seed {}: online delivery diverged from the offline plan (alpha {})",
            seed,
            alpha
        );
    }
}

#[test]
fn online_sessions_respect_constraints_with_noisy_predictors() {
    let n = suite_size(120);
    for seed in 0..n as u64 {
        let inst = random_instance(seed + 31_000_000, Mode::Skip);
        let online = OnlineConfig::new(6, 2, inst.config.buffer_capacity / 2);
        let pred = PredictionConfig::CrowdMean {
            error_pe: 0.5,
            seed,
        };
        let log = run_online(&inst.spec, &inst.config, &online, &pred, &inst.trace)
            .unwrap_or_else(|e| panic!("seed {}: online failed: {}", seed, e));
        validate_session(&log, &inst.spec, &inst.config, &inst.trace)
            .unwrap_or_else(|e| panic!("seed {}: session invalid: {}", seed, e));
    }
}

#[test]
fn online_noskip_sessions_run_clean() {
    let n = suite_size(120);
    for seed in 0..n as u64 {
        let inst = random_instance(seed + 32_000_000, Mode::NoSkip);
        let online = OnlineConfig::new(8, 3, 0);
        let pred = PredictionConfig::HarmonicMean {
            history_slots: 5,
            horizon_slots: 8,
        };
        let log = run_online(&inst.spec, &inst.config, &online, &pred, &inst.trace)
            .unwrap_or_else(|e| panic!("seed {}: online failed: {}", seed, e));
        validate_session(&log, &inst.spec, &inst.config, &inst.trace)
            .unwrap_or_else(|e| panic!("seed {}: session invalid: {}", seed, e));
        assert_eq!(log.skip_count(), 0, "seed {}: no-skip session skipped", seed);
    }
}

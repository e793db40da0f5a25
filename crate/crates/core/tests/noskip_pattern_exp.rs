mod common;
use common::random_instance;
use svc_lbp::model::{objective_of_levels, Mode};
use svc_lbp::noskip::{base_backward_reposition, base_forward_stalls, plan_enhancements_experimental};
use svc_lbp::oracle::{enumerate_optimal_noskip, OracleLimits};

#[test]
#[ignore]
fn compare_patterns() {
    let n: u64 = std::env::var("N").ok().and_then(|v| v.parse().ok()).unwrap_or(5000);
    let limits = OracleLimits::default();
    let (mut repos_bad, mut minimal_bad, mut best_bad) = (0u64, 0u64, 0u64);
    let mut bad_seeds = vec![];
    for seed in 0..n {
        let inst = random_instance(seed + 1_000_000, Mode::NoSkip);
        let st = base_forward_stalls(&inst.spec, &inst.config, &inst.trace).unwrap();
        let rep = base_backward_reposition(&inst.spec, &inst.config, &inst.trace, &st).unwrap();
        let oracle = enumerate_optimal_noskip(&inst.spec, &inst.config, &inst.trace, &limits).unwrap();
        let p_rep = plan_enhancements_experimental(&inst.spec, &inst.config, &inst.trace, &rep.d_f).unwrap();
        let p_min = plan_enhancements_experimental(&inst.spec, &inst.config, &inst.trace, &st.d).unwrap();
        let q_rep = objective_of_levels(&p_rep.levels, &inst.spec, &inst.config);
        let q_min = objective_of_levels(&p_min.levels, &inst.spec, &inst.config);
        if q_rep != oracle.best_quality { repos_bad += 1; }
        if q_min != oracle.best_quality { minimal_bad += 1; }
        if q_rep.max(q_min.clone()) != oracle.best_quality { best_bad += 1; bad_seeds.push(seed); }
    }
    eprintln!("repositioned-pattern mismatches: {}/{}", repos_bad, n);
    eprintln!("minimal-pattern mismatches: {}/{}", minimal_bad, n);
    eprintln!("best-of-both mismatches: {}/{} seeds {:?}", best_bad, n, &bad_seeds[..bad_seeds.len().min(20)]);
}

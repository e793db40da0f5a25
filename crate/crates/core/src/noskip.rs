//! No-skip planner: minimum-stall base schedule, stall repositioning, then
//! enhancement layers through the skip-mode scans.
//!
//! The base layer of every chunk must be delivered, so the first pass
//! simulates fetching all base layers in order and turns every deadline miss
//! into a stall that shifts all later deadlines. A backward pass then moves
//! the stalls as early as possible (ideally into the startup delay), which
//! maximizes the slack available to enhancement layers. Enhancement layers
//! are decided exactly as in skip mode against the repositioned deadlines,
//! with skips allowed above the base layer only.

use crate::lbp::{backward_scan, forward_scan, window_plan_to_layer_plan, WindowInstance, WindowPlan};
use crate::model::{BandwidthTrace, LayerPlan, Mode, ScanStats, StreamConfig, VideoSpec};
use crate::schedule::{stall_forward, CoverageCounter};
use crate::{Error, Result};

/// Forward-pass stalls `d` and repositioned stalls `d_f`, both cumulative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StallSchedule {
    /// Cumulative stall before each chunk under earliest in-order fetching.
    pub d: Vec<u64>,
    /// Cumulative stall before each chunk after moving stalls earliest.
    pub d_f: Vec<u64>,
    /// Total stall `d(C)`.
    pub total: u64,
}

/// Simulates in-order base-layer fetching, accumulating the minimal stall
/// schedule: whenever chunk `i` completes past its (shifted) deadline, the
/// excess is added to every later chunk's deadline.
pub fn base_forward_stalls(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
) -> Result<StallSchedule> {
    spec.validate()?;
    config.validate()?;
    let c = spec.num_chunks;
    let sizes: Vec<u64> = (0..c).map(|i| spec.layer_kb(0, i)).collect();
    let outcome = stall_forward(
        &sizes,
        &trace.capacities,
        config.startup_delay,
        config.buffer_capacity,
        spec.chunk_duration_slots,
        0,
    );
    if !outcome.complete {
        return Err(Error::Unfetchable(format!(
            "base layers do not fit in the {}-slot trace",
            trace.len()
        )));
    }
    let total = *outcome.d.last().unwrap();
    Ok(StallSchedule {
        d_f: outcome.d.clone(),
        d: outcome.d,
        total,
    })
}

/// Moves stalls as early as possible without changing the total: chunks are
/// re-placed latest-first against the final deadline, and a chunk whose
/// placement would overflow the buffer has its deadline decremented (leaving
/// a mid-stream stall) until the overflow clears.
pub fn base_backward_reposition(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    stalls: &StallSchedule,
) -> Result<StallSchedule> {
    let c = spec.num_chunks;
    let l = spec.chunk_duration_slots;
    let s = config.startup_delay;
    let total = stalls.total;
    let final_deadline = (c as u64 - 1) * l + s + total;
    let horizon = final_deadline as usize;
    let bw = trace.resized(horizon).capacities;

    let mut w = vec![0u64; horizon + 1];
    for (j, &b) in bw.iter().enumerate() {
        w[j + 1] = b;
    }
    let mut d_f = vec![0u64; c];
    let mut coverage = CoverageCounter::new(&[]);
    let mut cursor = final_deadline;
    let mut next_stall = total;

    for i in (0..c).rev() {
        let base_deadline = i as u64 * l + s;
        let mut df_i = next_stall;
        let size = spec.layer_kb(0, i);
        let mut guard = total + s + 2;
        loop {
            if guard == 0 {
                return Err(Error::Internal(format!(
                    "deadline decrement loop for chunk {} did not terminate",
                    i + 1
                )));
            }
            guard -= 1;
            let dl = base_deadline + df_i;
            while cursor > dl {
                cursor -= 1;
            }
            // Fits entirely in the deadline slot: no buffer footprint.
            if cursor == dl && w[dl as usize] >= size {
                w[dl as usize] -= size;
                break;
            }
            if dl == 0 {
                return Err(Error::Internal(format!(
                    "chunk {} cannot be repositioned within its deadline",
                    i + 1
                )));
            }
            let occupied = coverage.occupancy_at(dl - 1) + 1;
            if occupied * l > config.buffer_capacity {
                // Overflow: this chunk must complete earlier, introducing a
                // stall between it and its successor.
                if df_i == 0 {
                    return Err(Error::Internal(format!(
                        "buffer overflow cannot be cleared for chunk {}",
                        i + 1
                    )));
                }
                df_i -= 1;
                continue;
            }
            let mut need = size;
            if cursor == dl {
                let take = w[dl as usize].min(need);
                w[dl as usize] -= take;
                need -= take;
            }
            let mut pos = if cursor == dl { dl - 1 } else { cursor };
            loop {
                if pos == 0 {
                    return Err(Error::Internal(format!(
                        "bandwidth exhausted while repositioning chunk {}",
                        i + 1
                    )));
                }
                let take = w[pos as usize].min(need);
                w[pos as usize] -= take;
                need -= take;
                if need == 0 {
                    break;
                }
                pos -= 1;
            }
            while cursor > pos {
                debug_assert!(w[cursor as usize] == 0);
                cursor -= 1;
            }
            coverage.record_touch(pos);
            break;
        }
        if df_i < stalls.d[i] {
            return Err(Error::Internal(format!(
                "repositioned stall {} for chunk {} below the forward minimum {}",
                df_i,
                i + 1,
                stalls.d[i]
            )));
        }
        d_f[i] = df_i;
        next_stall = df_i;
    }

    Ok(StallSchedule {
        d: stalls.d.clone(),
        d_f,
        total,
    })
}

/// Runs the enhancement-layer scans against a fixed stall pattern.
pub fn plan_enhancements_experimental(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    pattern: &[u64],
) -> Result<LayerPlan> {
    plan_enhancements_for_pattern(spec, config, trace, pattern)
}

fn plan_enhancements_for_pattern(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    pattern: &[u64],
) -> Result<LayerPlan> {
    let c = spec.num_chunks;
    let l = spec.chunk_duration_slots;
    let s = config.startup_delay;
    let deadlines: Vec<u64> = (0..c).map(|i| i as u64 * l + s + pattern[i]).collect();
    let horizon = *deadlines.last().unwrap() as usize;
    let layer_kb = (0..spec.num_layers())
        .map(|n| (0..c).map(|i| spec.layer_kb(n, i)).collect())
        .collect();
    let inst = WindowInstance {
        layer_kb,
        deadlines,
        bw: trace.resized(horizon).capacities,
        buffer_cap: config.buffer_capacity,
        chunk_slots: l,
        preloaded: Vec::new(),
        decide_base: false,
        prestarted: Vec::new(),
    };

    // Base sizes are pinned; the forward pass seeds t/a/e for layer 1.
    let mut plan = WindowPlan {
        levels: vec![Some(0); c],
        sizes: (0..c).map(|i| spec.layer_kb(0, i)).collect(),
        t: vec![0; c],
        a: vec![0; c],
        e: inst.bw.clone(),
        placements: vec![Vec::new(); c],
        stats: ScanStats::default(),
    };
    let f0 = forward_scan(&inst, &mut plan)?;
    plan.stats.forward_iterations.push(f0);
    for layer in 1..inst.num_layers() {
        let b_iters = backward_scan(&inst, layer, &mut plan)?;
        let f_iters = forward_scan(&inst, &mut plan)?;
        plan.stats.backward_iterations.push(b_iters);
        plan.stats.forward_iterations.push(f_iters);
    }
    Ok(window_plan_to_layer_plan(&inst, plan, pattern.to_vec()))
}

/// Greedy enhancement decisions under the exact stall recurrence: layer by
/// layer, chunks from last to first, an upgrade is kept iff the whole
/// assignment still completes with the minimum total stall. The stall
/// pattern of the final assignment is whatever the recurrence forces, which
/// lets early chunks leave the buffer at their earliest play times while
/// late chunks keep their full deadline slack - something no fixed
/// stall-placement scaffold can express simultaneously.
fn plan_enhancements_by_recurrence(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    min_stall: u64,
) -> Result<LayerPlan> {
    let c = spec.num_chunks;
    let mut levels = vec![0usize; c];
    let mut sizes: Vec<u64> = (0..c).map(|i| spec.layer_kb(0, i)).collect();
    let run = |sizes: &[u64]| {
        stall_forward(
            sizes,
            &trace.capacities,
            config.startup_delay,
            config.buffer_capacity,
            spec.chunk_duration_slots,
            0,
        )
    };
    for layer in 1..spec.num_layers() {
        for i in (0..c).rev() {
            if levels[i] != layer - 1 {
                continue;
            }
            let add = spec.layer_kb(layer, i);
            sizes[i] += add;
            let outcome = run(&sizes);
            if outcome.complete && *outcome.d.last().unwrap() == min_stall {
                levels[i] = layer;
            } else {
                sizes[i] -= add;
            }
        }
    }
    let final_outcome = run(&sizes);
    if !final_outcome.complete {
        return Err(Error::Internal("refined no-skip assignment does not complete".into()));
    }
    let deadlines = final_outcome.deadlines.clone();
    Ok(LayerPlan {
        levels: levels.iter().map(|&l| Some(l)).collect(),
        cumulative_kb: sizes,
        lower_deadline: vec![0; c],
        upper_deadline: deadlines,
        head_fetch: vec![0; c],
        residual_bw: Vec::new(),
        stall_before: final_outcome.d,
        scan_stats: ScanStats::default(),
    })
}

/// Computes the exact-optimal no-skip plan: minimum stall first, then the
/// maximum weighted quality at that stall.
///
/// The minimum stall and its earliest placement come from the forward and
/// backward base passes. Enhancement layers are then decided twice - by the
/// scan pipeline against the repositioned deadlines, and by the greedy
/// recurrence refinement - and the assignment with the higher exact
/// objective wins.
pub fn plan_offline_noskip(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
) -> Result<LayerPlan> {
    if config.mode != Mode::NoSkip {
        return Err(Error::InvalidConfig(
            "plan_offline_noskip requires no-skip mode".into(),
        ));
    }
    let verdict = crate::model::validate_weights(spec, config)?;
    if !verdict.is_valid() {
        return Err(Error::WeightCondition(
            "objective weights (including lambda) do not satisfy the conditions".into(),
        ));
    }
    let stalls = base_forward_stalls(spec, config, trace)?;
    let stalls = base_backward_reposition(spec, config, trace, &stalls)?;
    let scan_plan = plan_enhancements_for_pattern(spec, config, trace, &stalls.d_f)?;
    let refined = plan_enhancements_by_recurrence(spec, config, trace, stalls.total)?;
    let scan_q = crate::model::objective_of_levels(&scan_plan.levels, spec, config);
    let refined_q = crate::model::objective_of_levels(&refined.levels, spec, config);
    if scan_q > refined_q {
        Ok(scan_plan)
    } else {
        Ok(refined)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, suggest_gamma, suggest_lambda};

    fn noskip_config(spec: &VideoSpec, s: u64, bm: u64) -> StreamConfig {
        let beta = rat(1001, 1000);
        let gamma = suggest_gamma(spec, &beta, Mode::NoSkip).unwrap();
        let lambda = suggest_lambda(spec, &gamma, &beta);
        StreamConfig::new(s, bm, gamma, beta, Mode::NoSkip).with_lambda(lambda)
    }

    #[test]
    fn forward_stalls_match_hand_simulation() {
        let spec = VideoSpec::cbr(2, 1, &[2000]);
        let cfg = noskip_config(&spec, 1, 100);
        let trace = BandwidthTrace::new(vec![1000; 4]);
        let st = base_forward_stalls(&spec, &cfg, &trace).unwrap();
        assert_eq!(st.d, vec![1, 2]);
        assert_eq!(st.total, 2);
    }

    #[test]
    fn forward_stalls_zero_when_first_slot_covers_everything() {
        let spec = VideoSpec::cbr(3, 1, &[500]);
        let cfg = noskip_config(&spec, 1, 100);
        let trace = BandwidthTrace::new(vec![5000, 0, 0]);
        let st = base_forward_stalls(&spec, &cfg, &trace).unwrap();
        assert_eq!(st.d, vec![0, 0, 0]);
    }

    #[test]
    fn forward_stalls_error_on_dead_trace() {
        let spec = VideoSpec::cbr(2, 1, &[2000]);
        let cfg = noskip_config(&spec, 1, 100);
        let trace = BandwidthTrace::new(vec![100, 100]);
        assert!(matches!(
            base_forward_stalls(&spec, &cfg, &trace),
            Err(Error::Unfetchable(_))
        ));
    }

    #[test]
    fn reposition_keeps_zero_stalls_zero() {
        let spec = VideoSpec::cbr(3, 1, &[500]);
        let cfg = noskip_config(&spec, 1, 100);
        let trace = BandwidthTrace::new(vec![5000, 0, 0]);
        let st = base_forward_stalls(&spec, &cfg, &trace).unwrap();
        let rep = base_backward_reposition(&spec, &cfg, &trace, &st).unwrap();
        assert_eq!(rep.d_f, vec![0, 0, 0]);
        assert_eq!(rep.total, 0);
    }

    #[test]
    fn abundant_bandwidth_reaches_full_quality_with_zero_stall() {
        let spec = VideoSpec::cbr(4, 1, &[600, 390, 510]);
        let cfg = noskip_config(&spec, 2, 10);
        let trace = BandwidthTrace::new(vec![50_000; 6]);
        let plan = plan_offline_noskip(&spec, &cfg, &trace).unwrap();
        assert!(plan.levels.iter().all(|l| *l == Some(2)));
        assert_eq!(plan.total_stall(), 0);
    }

    #[test]
    fn base_layer_never_skipped() {
        let spec = VideoSpec::cbr(4, 1, &[800, 400]);
        let cfg = noskip_config(&spec, 1, 4);
        let trace = BandwidthTrace::new(vec![300, 900, 100, 800, 600, 700, 500, 400]);
        let plan = plan_offline_noskip(&spec, &cfg, &trace).unwrap();
        for (i, level) in plan.levels.iter().enumerate() {
            assert!(level.is_some(), "chunk {} lost its base layer", i + 1);
            assert!(plan.cumulative_kb[i] >= spec.layer_kb(0, i));
        }
    }
}

//! Offline skip-mode planner: layer-by-layer backward and forward scans.
//!
//! The backward scan processes chunks from last to first and places each
//! chunk's candidate size as late as possible before its deadline, which
//! minimizes the number of skips at the current layer and pushes unavoidable
//! skips toward the earliest chunks. The forward scan then simulates fetching
//! the decided sizes in order as early as possible, yielding each chunk's
//! lower deadline `t(i)` for the next layer's backward scan: bandwidth before
//! `t(i)` is exactly what earlier chunks need for their lower layers, so the
//! next layer never steals it.
//!
//! Bandwidth bookkeeping in the backward scan is conservation-exact: the
//! working per-slot budget starts from the previous forward pass's leftovers,
//! and each chunk's previous placement is released back into the budget when
//! (and only when) that chunk is re-placed. At the slot `t(i)` boundary this
//! generalizes the head-fetch carry `e(t(i)) + a(i)`: whatever part of slot
//! `t(i)` the previous schedule gave to chunks `>= i` is usable, and the part
//! earlier chunks consumed stays reserved.

use crate::model::{LayerPlan, Mode, ScanStats, StreamConfig, VideoSpec};
use crate::schedule::{forward_place_from, CoverageCounter, ForwardOutcome};
use crate::{Error, Result};

/// A self-contained planning problem over consecutive chunks and a slot
/// horizon. The offline planner covers the whole video; the online engine
/// builds one per replan window.
#[derive(Debug, Clone)]
pub(crate) struct WindowInstance {
    /// Effective size of layer `n` of chunk `i`, `[layer][chunk]`.
    pub layer_kb: Vec<Vec<u64>>,
    /// Per-chunk upper deadline in window-relative slots.
    pub deadlines: Vec<u64>,
    /// Slot capacities 1..=horizon; the horizon covers the last deadline.
    pub bw: Vec<u64>,
    pub buffer_cap: u64,
    pub chunk_slots: u64,
    /// Ascending pop-deadlines of chunks already buffered at slot 1.
    pub preloaded: Vec<u64>,
    /// When false (no-skip base already pinned), layer 0 is not re-decided.
    pub decide_base: bool,
    /// Chunks already started before slot 1: their buffer reservations live
    /// in `preloaded` and they are neither gated nor counted again. Empty
    /// means none.
    pub prestarted: Vec<bool>,
}

/// Scan state threaded between the per-layer passes.
#[derive(Debug, Clone)]
pub(crate) struct WindowPlan {
    pub levels: Vec<Option<usize>>,
    pub sizes: Vec<u64>,
    pub t: Vec<u64>,
    pub a: Vec<u64>,
    pub e: Vec<u64>,
    pub placements: Vec<Vec<(u64, u64)>>,
    pub stats: ScanStats,
}

impl WindowInstance {
    pub fn num_chunks(&self) -> usize {
        self.deadlines.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_kb.len()
    }

    fn horizon(&self) -> u64 {
        self.bw.len() as u64
    }
}

/// Latest-placement pass for one layer. Returns the loop-iteration count.
pub(crate) fn backward_scan(
    inst: &WindowInstance,
    layer: usize,
    plan: &mut WindowPlan,
) -> Result<u64> {
    let c = inst.num_chunks();
    let horizon = inst.horizon();
    let base_pass = layer == 0 && inst.decide_base;
    let mut iterations = 0u64;

    // Working per-slot budget: leftovers of the previous forward pass (the
    // raw trace when no pass ran yet), indexed by slot 1..=horizon.
    let mut w = vec![0u64; horizon as usize + 1];
    for (j, &leftover) in plan.e.iter().enumerate() {
        w[j + 1] = leftover;
    }
    // Prefix sums of the initial budget; slots below a chunk's lower
    // deadline are never mutated before that chunk is processed.
    let mut init_prefix = vec![0u64; horizon as usize + 2];
    for j in 1..=horizon as usize {
        init_prefix[j] = init_prefix[j - 1] + w[j];
    }

    let mut cursor = horizon;
    let mut below_sum = init_prefix[horizon as usize];
    let mut coverage = CoverageCounter::new(&inst.preloaded);

    for i in (0..c).rev() {
        let dl = inst.deadlines[i];
        // Walk the cursor down to this chunk's deadline; bandwidth above it
        // is unusable by this and every earlier chunk.
        while cursor > dl {
            below_sum -= w[cursor as usize];
            cursor -= 1;
            iterations += 1;
        }

        // Release this chunk's previous placement back into the budget. The
        // previous forward pass finished this chunk no later than the next
        // non-skipped chunk's start, so every released slot is at or below
        // the cursor.
        for &(slot, kb) in &plan.placements[i] {
            debug_assert!(slot <= cursor);
            w[slot as usize] += kb;
            below_sum += kb;
        }
        plan.placements[i].clear();

        let lo = plan.t[i].max(1);
        let eligible = base_pass || (layer > 0 && plan.levels[i] == Some(layer - 1));
        let target = if eligible {
            plan.sizes[i] + inst.layer_kb[layer][i]
        } else {
            plan.sizes[i]
        };
        if dl == 0 {
            debug_assert!(plan.sizes[i] == 0, "carried size with no usable slot");
            plan.levels[i] = None;
            iterations += 1;
            continue;
        }
        if target == 0 {
            // Nothing left to fetch (fully credited mid-flight chunk or a
            // zero-size layer): the level is granted for free.
            if eligible {
                plan.levels[i] = Some(layer);
            }
            iterations += 1;
            continue;
        }

        let avail = below_sum - init_prefix[lo as usize - 1];
        let (size, level) = if avail >= target {
            let lv = if eligible {
                Some(layer)
            } else {
                plan.levels[i]
            };
            (target, lv)
        } else if base_pass {
            // Bandwidth cannot cover the base layer by this deadline: skip.
            plan.sizes[i] = 0;
            plan.levels[i] = None;
            iterations += 1;
            continue;
        } else {
            debug_assert!(avail >= plan.sizes[i], "kept size must always fit");
            (plan.sizes[i], plan.levels[i])
        };

        // Place `size` from the cursor downward. A draw in the deadline slot
        // itself needs no buffer room; extending below it does.
        let mut need = size;
        let mut drawn_at_dl = 0u64;
        if cursor == dl {
            let take = w[cursor as usize].min(need);
            w[cursor as usize] -= take;
            below_sum -= take;
            need -= take;
            drawn_at_dl = take;
        }
        if need > 0 {
            // The chunk will occupy buffer slots up to dl-1; occupancy by
            // later chunks is largest there, so one check suffices. A
            // pre-started first chunk is already counted via `preloaded`.
            debug_assert!(dl >= 1);
            let prestarted = inst.prestarted.get(i).copied().unwrap_or(false);
            let own = if prestarted { 0 } else { 1 };
            let occupied = coverage.occupancy_at(dl - 1) + own;
            if occupied * inst.chunk_slots > inst.buffer_cap {
                if base_pass {
                    // Buffer cannot hold this chunk together with the later
                    // ones that must coexist with it: skip it.
                    w[dl as usize] += drawn_at_dl;
                    below_sum += drawn_at_dl;
                    plan.sizes[i] = 0;
                    plan.levels[i] = None;
                    iterations += 1;
                    continue;
                }
                return Err(Error::Internal(format!(
                    "buffer violation at enhancement layer {} chunk {}",
                    layer,
                    i + 1
                )));
            }
            let mut pos = if cursor == dl {
                iterations += 1;
                dl - 1
            } else {
                cursor
            };
            loop {
                if pos < lo || pos == 0 {
                    return Err(Error::Internal(format!(
                        "backward placement of chunk {} ran below its window",
                        i + 1
                    )));
                }
                let take = w[pos as usize].min(need);
                w[pos as usize] -= take;
                below_sum -= take;
                need -= take;
                if need == 0 {
                    break;
                }
                pos -= 1;
                iterations += 1;
            }
            // The walk drained every slot it passed through, so moving the
            // cursor to the walk's bottom keeps the running sum intact.
            while cursor > pos {
                debug_assert!(w[cursor as usize] == 0);
                below_sum -= w[cursor as usize];
                cursor -= 1;
            }
            if !prestarted {
                coverage.record_touch(pos);
            }
        }
        plan.sizes[i] = size;
        plan.levels[i] = level;
        iterations += 1;
    }
    Ok(iterations)
}

/// Earliest in-order pass at the decided sizes; refreshes `t`, `a`, `e`, and
/// the per-chunk placement records.
pub(crate) fn forward_scan(inst: &WindowInstance, plan: &mut WindowPlan) -> Result<u64> {
    let out: ForwardOutcome = forward_place_from(
        &plan.sizes,
        &inst.deadlines,
        &inst.bw,
        inst.buffer_cap,
        inst.chunk_slots,
        &inst.preloaded,
        &inst.prestarted,
    );
    if !out.feasible {
        return Err(Error::Internal(
            "forward pass could not realize the backward decisions".into(),
        ));
    }
    plan.t = out.t;
    plan.a = out.a;
    plan.e = out.e;
    plan.placements = out.placements;
    Ok(out.iterations)
}

/// Runs the per-layer backward/forward alternation over a window.
pub(crate) fn plan_window_skip(inst: &WindowInstance) -> Result<WindowPlan> {
    let c = inst.num_chunks();
    let mut plan = WindowPlan {
        levels: vec![None; c],
        sizes: vec![0; c],
        t: vec![0; c],
        a: vec![0; c],
        e: inst.bw.clone(),
        placements: vec![Vec::new(); c],
        stats: ScanStats::default(),
    };
    for layer in 0..inst.num_layers() {
        let b_iters = backward_scan(inst, layer, &mut plan)?;
        let f_iters = forward_scan(inst, &mut plan)?;
        plan.stats.backward_iterations.push(b_iters);
        plan.stats.forward_iterations.push(f_iters);
    }
    Ok(plan)
}

/// Builds the full-video window instance for skip mode.
pub(crate) fn full_instance(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &crate::model::BandwidthTrace,
) -> Result<WindowInstance> {
    spec.validate()?;
    config.validate()?;
    let c = spec.num_chunks;
    let deadlines: Vec<u64> = (1..=c)
        .map(|i| crate::model::deadline_of(i, spec.chunk_duration_slots, config.startup_delay))
        .collect::<Result<_>>()?;
    let horizon = *deadlines.last().expect("at least one chunk") as usize;
    let layer_kb = (0..spec.num_layers())
        .map(|n| (0..c).map(|i| spec.layer_kb(n, i)).collect())
        .collect();
    Ok(WindowInstance {
        layer_kb,
        deadlines,
        bw: trace.resized(horizon).capacities,
        buffer_cap: config.buffer_capacity,
        chunk_slots: spec.chunk_duration_slots,
        preloaded: Vec::new(),
        decide_base: true,
        prestarted: Vec::new(),
    })
}

pub(crate) fn window_plan_to_layer_plan(
    inst: &WindowInstance,
    plan: WindowPlan,
    stall_before: Vec<u64>,
) -> LayerPlan {
    LayerPlan {
        levels: plan.levels,
        cumulative_kb: plan.sizes,
        lower_deadline: plan.t,
        upper_deadline: inst.deadlines.clone(),
        head_fetch: plan.a,
        residual_bw: plan.e,
        stall_before,
        scan_stats: plan.stats,
    }
}

/// Computes the exact-optimal skip-mode plan for the whole video.
///
/// The trace is zero-extended or truncated to the last chunk's deadline.
/// Fails if the weight conditions do not hold.
pub fn plan_offline_skip(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &crate::model::BandwidthTrace,
) -> Result<LayerPlan> {
    if config.mode != Mode::Skip {
        return Err(Error::InvalidConfig("plan_offline_skip requires skip mode".into()));
    }
    let verdict = crate::model::validate_weights(spec, config)?;
    if !verdict.is_valid() {
        return Err(Error::WeightCondition(
            "objective weights do not satisfy the layer-priority condition".into(),
        ));
    }
    let inst = full_instance(spec, config, trace)?;
    let plan = plan_window_skip(&inst)?;
    let c = spec.num_chunks;
    Ok(window_plan_to_layer_plan(&inst, plan, vec![0; c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, BandwidthTrace, StreamConfig, VideoSpec};

    fn skip_config(spec: &VideoSpec, s: u64, bm: u64) -> StreamConfig {
        let beta = rat(1001, 1000);
        let gamma = crate::model::suggest_gamma(spec, &beta, Mode::Skip).unwrap();
        StreamConfig::new(s, bm, gamma, beta, Mode::Skip)
    }

    #[test]
    fn base_two_chunks_both_fetched() {
        let spec = VideoSpec::cbr(2, 1, &[1000]);
        let cfg = skip_config(&spec, 1, 4);
        let trace = BandwidthTrace::new(vec![1000, 1000]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        assert_eq!(plan.levels, vec![Some(0), Some(0)]);
        assert_eq!(plan.cumulative_kb, vec![1000, 1000]);
    }

    #[test]
    fn base_skips_first_chunk_when_slot_one_is_empty() {
        let spec = VideoSpec::cbr(2, 1, &[1000]);
        let cfg = skip_config(&spec, 1, 4);
        let trace = BandwidthTrace::new(vec![0, 1000]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        assert_eq!(plan.levels, vec![None, Some(0)]);
    }

    #[test]
    fn base_skips_everything_without_bandwidth() {
        let spec = VideoSpec::cbr(1, 1, &[1000]);
        let cfg = skip_config(&spec, 1, 4);
        let trace = BandwidthTrace::new(vec![0]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        assert_eq!(plan.levels, vec![None]);
        assert_eq!(plan.skipped(), vec![0]);
    }

    #[test]
    fn unconstrained_single_chunk_reaches_top_layer() {
        let spec = VideoSpec::cbr(1, 1, &[1000, 500]);
        let cfg = skip_config(&spec, 1, 4);
        let trace = BandwidthTrace::new(vec![100_000]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        assert_eq!(plan.levels, vec![Some(1)]);
        assert_eq!(plan.cumulative_kb, vec![1500]);
    }

    #[test]
    fn abundant_bandwidth_fills_all_layers() {
        let spec = VideoSpec::cbr(5, 1, &[600, 390, 510]);
        let cfg = skip_config(&spec, 2, 10);
        let trace = BandwidthTrace::new(vec![10_000; 6]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        assert!(plan.levels.iter().all(|l| *l == Some(2)));
    }

    #[test]
    fn scan_iterations_respect_linear_bound() {
        let spec = VideoSpec::cbr(50, 1, &[300, 200]);
        let cfg = skip_config(&spec, 3, 8);
        let trace = BandwidthTrace::new(vec![700; 52]);
        let plan = plan_offline_skip(&spec, &cfg, &trace).unwrap();
        let c = spec.num_chunks as u64;
        let horizon = plan.upper_deadline.last().copied().unwrap();
        let bound = c + horizon + 1;
        for &it in plan
            .scan_stats
            .backward_iterations
            .iter()
            .chain(plan.scan_stats.forward_iterations.iter())
        {
            assert!(it <= bound, "{} > {}", it, bound);
        }
    }
}

#[cfg(test)]
mod window_probe {
    use super::*;

    #[test]
    fn residual_window_upgrade_probe() {
        let inst = WindowInstance {
            layer_kb: vec![vec![0, 400], vec![0, 700], vec![1400, 1500]],
            deadlines: vec![3, 5],
            bw: vec![0, 400, 2100, 2700, 1100],
            buffer_cap: 4,
            chunk_slots: 2,
            preloaded: vec![3],
            decide_base: true,
            prestarted: vec![true, false],
        };
        let plan = plan_window_skip(&inst).unwrap();
        eprintln!("probe levels: {:?}", plan.levels);
        assert_eq!(plan.levels, vec![Some(2), Some(2)]);
    }
}

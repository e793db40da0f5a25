//! Comparison policies run against the true trace with no future knowledge.
//!
//! Baselines 1-3 are the horizontal / vertical / hybrid scan strategies;
//! BBA maps buffer occupancy onto layers through a step function; NMS
//! combines buffer state with an instantaneous throughput estimate; the
//! slope policy trades prefetching new chunks against backfilling buffered
//! ones. NMS and the slope policy are reconstructions from one-paragraph
//! descriptions; their decision rules are documented constants here and
//! carry no optimality claims.
//!
//! All six run on the shared playback executor, so bandwidth, deadline, and
//! buffer accounting are identical to the planner-driven sessions.

use crate::model::{BandwidthTrace, StreamConfig, VideoSpec};
use crate::sim::{run_session, FetchPolicy, Request, SessionLog, SimView};
use crate::Result;

/// Earliest chunk whose base layer is missing and can still be fetched.
fn next_base_candidate(view: &SimView<'_>) -> Option<usize> {
    (0..view.spec.num_chunks).find(|&i| !view.finalized[i] && view.complete_level(i).is_none())
}

/// Earliest chunk holding exactly `level - 1` complete layers.
fn backfill_candidate(view: &SimView<'_>, level: usize) -> Option<usize> {
    (0..view.spec.num_chunks)
        .find(|&i| !view.finalized[i] && view.complete_level(i) == Some(level - 1))
}

/// Horizontal scan: base layers of all chunks first (up to the buffer),
/// then the first enhancement layer of buffered chunks, then the second.
struct Horizontal;

impl FetchPolicy for Horizontal {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        if let Some(i) = next_base_candidate(view) {
            if view.started[i] || view.can_start_new_chunk() {
                return Some(Request { chunk: i, level: 0 });
            }
        }
        for level in 1..view.spec.num_layers() {
            if let Some(i) = backfill_candidate(view, level) {
                return Some(Request { chunk: i, level });
            }
        }
        None
    }
}

/// Vertical scan: every layer of the current chunk before the next chunk.
struct Vertical;

impl FetchPolicy for Vertical {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        let top = view.spec.num_layers() - 1;
        let i = (0..view.spec.num_chunks)
            .find(|&i| !view.finalized[i] && view.complete_level(i) != Some(top))?;
        if !view.started[i] && !view.can_start_new_chunk() {
            return None;
        }
        Some(Request { chunk: i, level: top })
    }
}

/// Hybrid: all layers of the next chunk, then base layers of later chunks,
/// then their higher layers.
struct Hybrid;

impl FetchPolicy for Hybrid {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        let top = view.spec.num_layers() - 1;
        if let Some(f) = (0..view.spec.num_chunks).find(|&i| !view.finalized[i]) {
            if view.complete_level(f) != Some(top) && (view.started[f] || view.can_start_new_chunk())
            {
                return Some(Request { chunk: f, level: top });
            }
        }
        if let Some(i) = next_base_candidate(view) {
            if view.started[i] || view.can_start_new_chunk() {
                return Some(Request { chunk: i, level: 0 });
            }
        }
        for level in 1..view.spec.num_layers() {
            if let Some(i) = backfill_candidate(view, level) {
                return Some(Request { chunk: i, level });
            }
        }
        None
    }
}

/// Buffer-based selection: below `lower` fetch the base layer, above
/// `upper` everything, in between a linear step map of occupancy onto
/// layers. The level is pinned per chunk when its fetch starts.
struct BufferBased {
    lower: u64,
    upper: u64,
    pinned: Vec<Option<usize>>,
}

fn bba_level(buffer_slots: u64, lower: u64, upper: u64, num_layers: usize) -> usize {
    let top = num_layers - 1;
    if buffer_slots < lower {
        0
    } else if buffer_slots > upper {
        top
    } else {
        let span = (upper - lower).max(1);
        let step = ((buffer_slots - lower) as u128 * num_layers as u128 / span as u128) as usize;
        step.min(top)
    }
}

impl FetchPolicy for BufferBased {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        let i = (0..view.spec.num_chunks).find(|&i| {
            !view.finalized[i]
                && self.pinned[i].map_or(true, |l| {
                    view.delivered_kb[i] < view.spec.cumulative_kb(l, i)
                })
        })?;
        if !view.started[i] && !view.can_start_new_chunk() {
            return None;
        }
        let level = *self.pinned[i].get_or_insert_with(|| {
            bba_level(
                view.buffer_slots(),
                self.lower,
                self.upper,
                view.spec.num_layers(),
            )
        });
        if view.delivered_kb[i] >= view.spec.cumulative_kb(level, i) {
            return None;
        }
        Some(Request { chunk: i, level })
    }
}

/// Throughput-and-buffer selection: the highest cumulative layer whose rate
/// fits the last completed chunk's observed throughput; the base layer when
/// the buffer runs below the lower threshold or before any estimate exists.
struct ThroughputBased {
    lower: u64,
    pinned: Vec<Option<usize>>,
}

fn nms_level(view: &SimView<'_>, chunk: usize, lower: u64) -> usize {
    if view.buffer_slots() < lower {
        return 0;
    }
    let est = match view.last_chunk_throughput {
        Some(e) => e,
        None => return 0, // cold start
    };
    let budget = est * view.spec.chunk_duration_slots;
    let mut level = 0;
    for l in 0..view.spec.num_layers() {
        if view.spec.cumulative_kb(l, chunk) <= budget {
            level = l;
        } else {
            break;
        }
    }
    level
}

impl FetchPolicy for ThroughputBased {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        let i = (0..view.spec.num_chunks).find(|&i| {
            !view.finalized[i]
                && self.pinned[i].map_or(true, |l| {
                    view.delivered_kb[i] < view.spec.cumulative_kb(l, i)
                })
        })?;
        if !view.started[i] && !view.can_start_new_chunk() {
            return None;
        }
        let level = *self.pinned[i].get_or_insert_with(|| nms_level(view, i, self.lower));
        if view.delivered_kb[i] >= view.spec.cumulative_kb(level, i) {
            return None;
        }
        Some(Request { chunk: i, level })
    }
}

/// Slope-based choice between prefetching the next chunk's base layer and
/// backfilling the earliest buffered chunk missing a layer: backfill layer
/// `n` wins when the buffer fill fraction reaches `1 + slope * (N + 1 - n)`.
/// Steeper (more negative) slopes lower the thresholds and favor
/// backfilling.
struct SlopeBased {
    slope: f64,
}

impl FetchPolicy for SlopeBased {
    fn next_request(&mut self, view: &SimView<'_>) -> Option<Request> {
        let n_layers = view.spec.num_layers();
        let prefetch = next_base_candidate(view)
            .filter(|&i| view.started[i] || view.can_start_new_chunk());
        let backfill = (1..n_layers)
            .find_map(|level| backfill_candidate(view, level).map(|i| (i, level)));
        match (prefetch, backfill) {
            (Some(p), Some((b, level))) => {
                let frac = view.buffer_slots() as f64 / view.config.buffer_capacity as f64;
                let threshold = 1.0 + self.slope * (n_layers - level) as f64;
                if frac >= threshold {
                    Some(Request { chunk: b, level })
                } else {
                    Some(Request { chunk: p, level: 0 })
                }
            }
            (Some(p), None) => Some(Request { chunk: p, level: 0 }),
            (None, Some((b, level))) => Some(Request { chunk: b, level }),
            (None, None) => None,
        }
    }
}

/// Baseline 1: conservative horizontal scan.
pub fn run_baseline1(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
) -> Result<SessionLog> {
    run_session(spec, config, truth, &mut Horizontal)
}

/// Baseline 2: aggressive vertical scan.
pub fn run_baseline2(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
) -> Result<SessionLog> {
    run_session(spec, config, truth, &mut Vertical)
}

/// Baseline 3: vertical on the next chunk, then horizontal.
pub fn run_baseline3(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
) -> Result<SessionLog> {
    run_session(spec, config, truth, &mut Hybrid)
}

/// Buffer-based policy with the given lower/upper thresholds in slots.
pub fn run_bba(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
    lower: u64,
    upper: u64,
) -> Result<SessionLog> {
    let mut policy = BufferBased {
        lower,
        upper,
        pinned: vec![None; spec.num_chunks],
    };
    run_session(spec, config, truth, &mut policy)
}

/// Throughput-plus-buffer policy; `lower` is the buffer floor in slots
/// below which only the base layer is requested.
pub fn run_nms(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
    lower: u64,
) -> Result<SessionLog> {
    let mut policy = ThroughputBased {
        lower,
        pinned: vec![None; spec.num_chunks],
    };
    run_session(spec, config, truth, &mut policy)
}

/// Slope-based prefetch/backfill policy; `slope` is negative (e.g. -0.07).
pub fn run_slope(
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
    slope: f64,
) -> Result<SessionLog> {
    let mut policy = SlopeBased { slope };
    run_session(spec, config, truth, &mut policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lexicographic_weights, Mode};
    use crate::validate::validate_session;

    fn spec4() -> VideoSpec {
        VideoSpec::cbr(12, 1, &[600, 390, 510, 575])
    }

    fn cfg(spec: &VideoSpec, mode: Mode, bm: u64) -> StreamConfig {
        let (gamma, beta) = lexicographic_weights(spec);
        let mut c = StreamConfig::new(2, bm, gamma, beta.clone(), mode);
        if mode == Mode::NoSkip {
            c.lambda = Some(crate::model::suggest_lambda(spec, &c.gamma, &beta));
        }
        c
    }

    fn square_wave(len: usize, high: u64, low: u64, period: usize) -> BandwidthTrace {
        BandwidthTrace::new(
            (0..len)
                .map(|j| if (j / period) % 2 == 0 { high } else { low })
                .collect(),
        )
    }

    #[test]
    fn baseline1_constant_low_gets_all_base_only() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::Skip, 6);
        let truth = BandwidthTrace::new(vec![620; 14]);
        let log = run_baseline1(&spec, &cfg, &truth).unwrap();
        validate_session(&log, &spec, &cfg, &truth).unwrap();
        assert_eq!(log.skip_count(), 0);
        // 620 kb/slot sustains the base layer everywhere but little more.
        assert!(log.chunks.iter().filter(|c| c.delivered_level == Some(0)).count() >= 10);
    }

    #[test]
    fn baseline1_constant_high_reaches_upper_layers() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::Skip, 6);
        let truth = BandwidthTrace::new(vec![4000; 14]);
        let log = run_baseline1(&spec, &cfg, &truth).unwrap();
        validate_session(&log, &spec, &cfg, &truth).unwrap();
        assert_eq!(log.skip_count(), 0);
        assert!(log
            .chunks
            .iter()
            .skip(2)
            .all(|c| c.delivered_level >= Some(1)));
    }

    #[test]
    fn baseline2_skips_in_troughs() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::Skip, 6);
        let truth = square_wave(14, 2400, 200, 3);
        let log = run_baseline2(&spec, &cfg, &truth).unwrap();
        validate_session(&log, &spec, &cfg, &truth).unwrap();
        assert!(log.skip_count() >= 1);
    }

    #[test]
    fn baseline2_constant_high_gets_everything() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::Skip, 6);
        let truth = BandwidthTrace::new(vec![4000; 14]);
        let log = run_baseline2(&spec, &cfg, &truth).unwrap();
        assert_eq!(log.skip_count(), 0);
        assert!(log.chunks.iter().all(|c| c.delivered_level == Some(3)));
    }

    #[test]
    fn baseline2_equals_baseline3_on_single_chunk() {
        let spec = VideoSpec::cbr(1, 1, &[600, 390]);
        let cfg = cfg(&spec, Mode::Skip, 4);
        let truth = BandwidthTrace::new(vec![2000, 2000]);
        let a = run_baseline2(&spec, &cfg, &truth).unwrap();
        let b = run_baseline3(&spec, &cfg, &truth).unwrap();
        assert_eq!(a.delivered_levels(), b.delivered_levels());
    }

    #[test]
    fn bba_levels_follow_buffer_thresholds() {
        // Decision values per the step map with lower 40, upper 80, N = 3.
        assert_eq!(bba_level(20, 40, 80, 4), 0);
        assert_eq!(bba_level(100, 40, 80, 4), 3);
        assert_eq!(bba_level(60, 40, 80, 4), 2);
    }

    #[test]
    fn nms_rate_lookup_matches_table() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::NoSkip, 120);
        // Build a view by probing through a session is heavyweight; check
        // the lookup arithmetic directly instead: budget 2200 kb covers the
        // 2075 cumulative level.
        let cum: Vec<u64> = (0..4).map(|l| spec.cumulative_kb(l, 0)).collect();
        assert_eq!(cum, vec![600, 990, 1500, 2075]);
        let budget = 2200u64;
        let level = (0..4).filter(|&l| cum[l] <= budget).max().unwrap();
        assert_eq!(level, 3);
        let _ = cfg;
    }

    #[test]
    fn nms_cold_start_is_base_layer() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::NoSkip, 120);
        let truth = BandwidthTrace::new(vec![3000; 40]);
        let log = run_nms(&spec, &cfg, &truth, 40).unwrap();
        validate_session(&log, &spec, &cfg, &truth).unwrap();
        assert_eq!(log.chunks[0].delivered_level, Some(0));
    }

    #[test]
    fn slope_policies_run_clean_and_differ() {
        let spec = spec4();
        let cfg = cfg(&spec, Mode::NoSkip, 10);
        let truth = square_wave(40, 2500, 400, 4);
        let shallow = run_slope(&spec, &cfg, &truth, -0.07).unwrap();
        let steep = run_slope(&spec, &cfg, &truth, -0.40).unwrap();
        validate_session(&shallow, &spec, &cfg, &truth).unwrap();
        validate_session(&steep, &spec, &cfg, &truth).unwrap();
        // The steeper slope backfills more aggressively.
        let up_sh: usize = shallow
            .chunks
            .iter()
            .filter(|c| c.delivered_level >= Some(1))
            .count();
        let up_st: usize = steep
            .chunks
            .iter()
            .filter(|c| c.delivered_level >= Some(1))
            .count();
        assert!(up_st >= up_sh);
    }

    #[test]
    fn slope_without_enhancements_degenerates_to_horizontal() {
        let spec = VideoSpec::cbr(8, 1, &[700]);
        let cfg = cfg(&spec, Mode::Skip, 4);
        let truth = square_wave(12, 1500, 300, 2);
        let a = run_slope(&spec, &cfg, &truth, -0.40).unwrap();
        let b = run_baseline1(&spec, &cfg, &truth).unwrap();
        assert_eq!(a.delivered_levels(), b.delivered_levels());
    }
}

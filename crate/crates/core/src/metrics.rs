//! QoE metric computation and report assembly.

use num::ToPrimitive;
use num::Zero;

use crate::model::{
    histogram_labels, objective_of_levels, rat_u, Mode, QoEReport, Rat, StreamConfig, VideoSpec,
};
use crate::sim::SessionLog;
use crate::Result;

/// Layer switching rate: mean absolute change in delivered chunk size per
/// playback second, `(1/(C*L)) * sum_{i=2..C} |X(i) - X(i-1)|`.
pub fn lsr(delivered_kb: &[u64], chunk_duration_slots: u64, slot_seconds: u64) -> Rat {
    let c = delivered_kb.len() as u64;
    if c <= 1 {
        return Rat::zero();
    }
    let mut sum = 0u64;
    for w in delivered_kb.windows(2) {
        sum += w[0].abs_diff(w[1]);
    }
    rat_u(sum) / rat_u(c * chunk_duration_slots * slot_seconds)
}

/// Average playback rate in kilobits per second; skipped chunks contribute
/// zero bytes but still occupy playback time.
pub fn avg_playback_rate(delivered_kb: &[u64], chunk_duration_slots: u64, slot_seconds: u64) -> Rat {
    let c = delivered_kb.len() as u64;
    if c == 0 {
        return Rat::zero();
    }
    let total: u64 = delivered_kb.iter().sum();
    rat_u(total) / rat_u(c * chunk_duration_slots * slot_seconds)
}

/// Histogram of delivery levels: index 0 counts skipped chunks, 1 the base
/// layer, `1 + n` enhancement layer `n`.
pub fn layer_breakdown(session: &SessionLog, spec: &VideoSpec) -> Vec<usize> {
    let mut hist = vec![0usize; spec.num_layers() + 1];
    for chunk in &session.chunks {
        match chunk.delivered_level {
            None => hist[0] += 1,
            Some(l) => hist[l + 1] += 1,
        }
    }
    hist
}

/// Assembles the full report for a finished session.
pub fn build_report(
    session: &SessionLog,
    spec: &VideoSpec,
    config: &StreamConfig,
) -> Result<QoEReport> {
    let delivered = session.delivered_sizes();
    let slot_seconds = 1;
    let histogram = layer_breakdown(session, spec);
    let quality = objective_of_levels(&session.delivered_levels(), spec, config);
    let objective = match config.mode {
        Mode::Skip => quality,
        Mode::NoSkip => match &config.lambda {
            Some(lambda) => quality - lambda.clone() * rat_u(session.total_stall_slots),
            None => quality,
        },
    };
    let lsr_val = lsr(&delivered, spec.chunk_duration_slots, slot_seconds);
    let rate = avg_playback_rate(&delivered, spec.chunk_duration_slots, slot_seconds);
    Ok(QoEReport {
        skip_count: session.skip_count(),
        skip_duration_slots: session.skip_count() as u64 * spec.chunk_duration_slots,
        stall_duration_slots: session.total_stall_slots,
        avg_playback_rate_kbps: rate.to_f64().unwrap_or(0.0),
        lsr_kbps_per_sec: lsr_val.to_f64().unwrap_or(0.0),
        layer_histogram: histogram,
        objective: objective.to_string(),
        objective_f64: crate::model::rat_to_f64(&objective),
    })
}

/// Bucket labels matching [`layer_breakdown`]'s indices.
pub fn breakdown_labels(spec: &VideoSpec) -> Vec<String> {
    histogram_labels(spec.num_layers())
}

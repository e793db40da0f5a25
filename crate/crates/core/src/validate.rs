//! Universal constraint validator applied to every plan and session the
//! planners, baselines, and engines produce.
//!
//! Checks, independently of the code that produced the artifact:
//! per-slot consumption within the trace capacity, buffered duration within
//! the buffer capacity, the decoder prefix property, and (skip mode) no
//! bytes after a chunk's deadline.

use crate::model::{BandwidthTrace, LayerPlan, Mode, StreamConfig, VideoSpec};
use crate::schedule::forward_place;
use crate::sim::SessionLog;
use crate::{Error, Result};

/// Re-simulates a plan and checks every constraint on the realized schedule.
pub fn validate_plan(
    plan: &LayerPlan,
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
) -> Result<()> {
    plan.check_decoder_constraint(spec)?;
    let c = spec.num_chunks;
    if config.mode == Mode::NoSkip {
        for (i, level) in plan.levels.iter().enumerate() {
            if level.is_none() {
                return Err(Error::InvalidPlan(format!(
                    "chunk {} skipped in no-skip mode",
                    i + 1
                )));
            }
        }
        if !plan.stall_before.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::InvalidPlan("stall schedule not non-decreasing".into()));
        }
    }
    let horizon = *plan.upper_deadline.last().unwrap() as usize;
    let bw = trace.resized(horizon);
    let outcome = forward_place(
        &plan.cumulative_kb,
        &plan.upper_deadline,
        &bw.capacities,
        config.buffer_capacity,
        spec.chunk_duration_slots,
        &[],
    );
    if !outcome.feasible {
        return Err(Error::InvalidPlan(
            "no in-order schedule realizes the plan within its deadlines".into(),
        ));
    }

    // Check the realized schedule slot by slot against the raw constraints.
    let mut per_slot = vec![0u64; horizon + 1];
    for (i, placement) in outcome.placements.iter().enumerate() {
        for &(slot, kb) in placement {
            if slot > plan.upper_deadline[i] {
                return Err(Error::InvalidPlan(format!(
                    "chunk {} fetched at slot {} past its deadline {}",
                    i + 1,
                    slot,
                    plan.upper_deadline[i]
                )));
            }
            per_slot[slot as usize] += kb;
        }
    }
    for slot in 1..=horizon {
        if per_slot[slot] > bw.capacities[slot - 1] {
            return Err(Error::InvalidPlan(format!(
                "slot {} consumes {} kb of {} available",
                slot,
                per_slot[slot],
                bw.capacities[slot - 1]
            )));
        }
    }
    // Buffer occupancy from first touches to deadlines.
    for slot in 1..=horizon as u64 {
        let mut occupied = 0u64;
        for i in 0..c {
            if outcome.t[i] != 0 && outcome.t[i] <= slot && plan.upper_deadline[i] > slot {
                occupied += spec.chunk_duration_slots;
            }
        }
        if occupied > config.buffer_capacity {
            return Err(Error::InvalidPlan(format!(
                "buffer holds {} slots of video at slot {} (cap {})",
                occupied, slot, config.buffer_capacity
            )));
        }
    }
    Ok(())
}

/// Checks an executed session against the raw constraints.
pub fn validate_session(
    session: &SessionLog,
    spec: &VideoSpec,
    config: &StreamConfig,
    truth: &BandwidthTrace,
) -> Result<()> {
    if session.chunks.len() != spec.num_chunks {
        return Err(Error::InvalidPlan("session chunk count mismatch".into()));
    }
    for rec in &session.slots {
        if rec.consumed_kb > truth.at(rec.slot) {
            return Err(Error::InvalidPlan(format!(
                "slot {} consumed {} kb of {} available",
                rec.slot,
                rec.consumed_kb,
                truth.at(rec.slot)
            )));
        }
        if rec.buffer_slots > config.buffer_capacity {
            return Err(Error::InvalidPlan(format!(
                "buffer held {} slots at slot {} (cap {})",
                rec.buffer_slots, rec.slot, config.buffer_capacity
            )));
        }
    }
    let total_consumed: u64 = session.slots.iter().map(|s| s.consumed_kb).sum();
    let total_delivered: u64 = session.chunks.iter().map(|c| c.delivered_kb).sum();
    if total_delivered > total_consumed {
        return Err(Error::InvalidPlan(
            "delivered more bytes than consumed".into(),
        ));
    }
    for (i, rec) in session.chunks.iter().enumerate() {
        // Decoder prefix property: the delivered level's prefix fits within
        // the delivered bytes, and waste is exactly the overshoot.
        let prefix = spec.delivered_kb(rec.delivered_level, i);
        if prefix + rec.waste_kb != rec.delivered_kb {
            return Err(Error::InvalidPlan(format!(
                "chunk {} bytes are inconsistent with its delivered level",
                i + 1
            )));
        }
        if let Some(level) = rec.delivered_level {
            let next = level + 1;
            if next < spec.num_layers() && rec.waste_kb >= spec.layer_kb(next, i) {
                return Err(Error::InvalidPlan(format!(
                    "chunk {} waste covers layer {} which should count as delivered",
                    i + 1,
                    next
                )));
            }
        }
        if session.mode == Mode::Skip {
            if let Some(last) = rec.last_fetch_slot {
                if last > rec.deadline {
                    return Err(Error::InvalidPlan(format!(
                        "chunk {} fetched bytes after its deadline",
                        i + 1
                    )));
                }
            }
            if rec.skipped != rec.delivered_level.is_none() {
                return Err(Error::InvalidPlan(format!(
                    "chunk {} skip flag inconsistent",
                    i + 1
                )));
            }
        } else if rec.skipped && !session.truncated {
            return Err(Error::InvalidPlan(format!(
                "chunk {} skipped in no-skip mode",
                i + 1
            )));
        }
    }
    Ok(())
}

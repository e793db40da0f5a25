//! In-order placement primitives shared by the planners, the oracle, and the
//! playback simulator.
//!
//! Feasibility of a per-chunk size assignment is everywhere defined as the
//! success of the greedy earliest in-order fetch below: chunks are fetched in
//! index order, each starting at the first slot with bandwidth left and
//! buffer room, and any assignment fetchable at all is fetchable this way.

/// Result of the earliest in-order placement at fixed deadlines.
#[derive(Debug, Clone)]
pub(crate) struct ForwardOutcome {
    /// First slot each chunk is fetched in (0 for skipped/never started).
    pub t: Vec<u64>,
    /// Kilobits fetched during the first-touch slot.
    pub a: Vec<u64>,
    /// Slot each chunk completes in (0 if not completed).
    pub finish: Vec<u64>,
    /// Leftover bandwidth per slot after all fetching.
    pub e: Vec<u64>,
    /// Per-chunk (slot, kilobits) fetch records.
    pub placements: Vec<Vec<(u64, u64)>>,
    /// Main-loop iterations (each advances the slot cursor or a chunk).
    pub iterations: u64,
    /// Every chunk completed by its deadline.
    pub feasible: bool,
}

/// Greedy earliest in-order fetch at fixed per-chunk deadlines.
///
/// `preloaded` holds pop-deadlines of chunks already occupying the buffer
/// when slot 1 begins (used by the online engine's window replans); it must
/// be sorted ascending.
pub(crate) fn forward_place(
    sizes: &[u64],
    deadlines: &[u64],
    bw: &[u64],
    buffer_cap: u64,
    chunk_slots: u64,
    preloaded: &[u64],
) -> ForwardOutcome {
    forward_place_from(sizes, deadlines, bw, buffer_cap, chunk_slots, preloaded, &[])
}

/// [`forward_place`] where some chunks are already in flight: their buffer
/// reservations are then part of `preloaded` and they are not gated or
/// re-counted when their fetches resume.
pub(crate) fn forward_place_from(
    sizes: &[u64],
    deadlines: &[u64],
    bw: &[u64],
    buffer_cap: u64,
    chunk_slots: u64,
    preloaded: &[u64],
    prestarted: &[bool],
) -> ForwardOutcome {
    let c = sizes.len();
    let horizon = bw.len() as u64;
    let mut out = ForwardOutcome {
        t: vec![0; c],
        a: vec![0; c],
        finish: vec![0; c],
        e: bw.to_vec(),
        placements: vec![Vec::new(); c],
        iterations: 0,
        feasible: true,
    };

    // Pop-deadlines of started, not yet played chunks, ascending.
    let mut hold: std::collections::VecDeque<u64> = preloaded.iter().copied().collect();
    let mut next = 0usize; // next chunk index to start
    while next < c && sizes[next] == 0 {
        next += 1;
    }
    let mut active: Option<usize> = None;
    let mut remaining = 0u64;

    let mut slot = 1u64;
    while slot <= horizon {
        while let Some(&front) = hold.front() {
            if front <= slot {
                hold.pop_front();
            } else {
                break;
            }
        }
        let mut avail = bw[slot as usize - 1];
        loop {
            let k = match active {
                Some(k) => k,
                None => {
                    if next >= c {
                        break;
                    }
                    if avail == 0 {
                        break;
                    }
                    let k = next;
                    if slot > deadlines[k] {
                        out.feasible = false;
                        out.e[slot as usize - 1] = avail;
                        return out;
                    }
                    // Starting a chunk that plays after this slot reserves
                    // buffer room for its whole duration. A chunk already in
                    // flight before slot 1 is pre-counted via `preloaded`.
                    if deadlines[k] > slot && !prestarted.get(k).copied().unwrap_or(false) {
                        if (hold.len() as u64 + 1) * chunk_slots > buffer_cap {
                            break;
                        }
                        hold.push_back(deadlines[k]);
                    }
                    active = Some(k);
                    remaining = sizes[k];
                    out.t[k] = slot;
                    out.iterations += 1;
                    k
                }
            };
            if avail == 0 {
                break;
            }
            let take = avail.min(remaining);
            if take > 0 {
                avail -= take;
                remaining -= take;
                out.placements[k].push((slot, take));
                if out.t[k] == slot {
                    out.a[k] += take;
                }
            }
            if remaining == 0 {
                if slot > deadlines[k] {
                    out.feasible = false;
                    out.e[slot as usize - 1] = avail;
                    return out;
                }
                out.finish[k] = slot;
                active = None;
                next = k + 1;
                while next < c && sizes[next] == 0 {
                    next += 1;
                }
            } else {
                break;
            }
        }
        out.e[slot as usize - 1] = avail;
        if let Some(k) = active {
            if slot >= deadlines[k] {
                // Cannot complete by the deadline.
                out.feasible = false;
                return out;
            }
        }
        slot += 1;
        out.iterations += 1;
        if active.is_none() && next >= c {
            break;
        }
    }
    if active.is_some() || next < c {
        out.feasible = false;
    }
    out
}

/// Result of the stall-accumulating in-order fetch (no-skip mode).
#[derive(Debug, Clone)]
pub(crate) struct StallOutcome {
    /// Cumulative stall slots before each chunk plays.
    pub d: Vec<u64>,
    /// Completion slot per chunk.
    pub finish: Vec<u64>,
    /// Final (extended) deadline per chunk.
    pub deadlines: Vec<u64>,
    pub iterations: u64,
    /// All chunks completed within the trace horizon.
    pub complete: bool,
}

/// In-order fetch where a chunk missing its deadline extends every later
/// deadline instead of being dropped: `d(i) = max(d(i-1), finish(i) -
/// ((i-1)L+s))`, and the deadline of chunk `i` is `(i-1)L + s + d(i)`.
pub(crate) fn stall_forward(
    sizes: &[u64],
    bw: &[u64],
    startup_delay: u64,
    buffer_cap: u64,
    chunk_slots: u64,
    initial_stall: u64,
) -> StallOutcome {
    let c = sizes.len();
    let horizon = bw.len() as u64;
    let base_deadline = |i: usize| (i as u64) * chunk_slots + startup_delay;
    let mut out = StallOutcome {
        d: vec![initial_stall; c],
        finish: vec![0; c],
        deadlines: vec![0; c],
        iterations: 0,
        complete: true,
    };

    let mut hold: std::collections::VecDeque<u64> = std::collections::VecDeque::new();
    let mut next = 0usize;
    let mut active: Option<usize> = None;
    let mut remaining = 0u64;
    let mut stall = initial_stall;

    let mut slot = 1u64;
    while slot <= horizon {
        while let Some(&front) = hold.front() {
            if front <= slot {
                hold.pop_front();
            } else {
                break;
            }
        }
        let mut avail = bw[slot as usize - 1];
        loop {
            let k = match active {
                Some(k) => k,
                None => {
                    if next >= c {
                        break;
                    }
                    if avail == 0 {
                        break;
                    }
                    // An in-flight chunk always occupies the buffer: its
                    // eventual deadline is no earlier than its completion.
                    if (hold.len() as u64 + 1) * chunk_slots > buffer_cap {
                        break;
                    }
                    active = Some(next);
                    remaining = sizes[next];
                    out.iterations += 1;
                    next
                }
            };
            if avail == 0 {
                break;
            }
            let take = avail.min(remaining);
            avail -= take;
            remaining -= take;
            if remaining == 0 {
                out.finish[k] = slot;
                stall = stall.max(slot.saturating_sub(base_deadline(k)));
                out.d[k] = stall;
                out.deadlines[k] = base_deadline(k) + stall;
                if out.deadlines[k] > slot {
                    hold.push_back(out.deadlines[k]);
                }
                active = None;
                next = k + 1;
            } else {
                break;
            }
        }
        slot += 1;
        out.iterations += 1;
        if active.is_none() && next >= c {
            break;
        }
    }
    if active.is_some() || next < c {
        out.complete = false;
    }
    // Chunks after the last completed keep the running stall value.
    for i in 0..c {
        if out.finish[i] == 0 {
            out.d[i] = stall;
            out.deadlines[i] = base_deadline(i) + stall;
        }
    }
    out
}

/// Result of [`stall_extend`]: extended deadlines plus how many chunks the
/// window's bandwidth actually covers.
pub(crate) struct StallExtendOutcome {
    pub extended: Vec<u64>,
    pub completed: usize,
}

/// In-order fetch with arbitrary initial deadlines that extend on misses:
/// used by no-skip window replans, where deadlines come in pre-shifted by
/// the session's stall so far. Chunks the bandwidth cannot cover keep the
/// running extension and are excluded from `completed`.
pub(crate) fn stall_extend(
    sizes: &[u64],
    deadlines: &[u64],
    bw: &[u64],
    buffer_cap: u64,
    chunk_slots: u64,
    preloaded: &[u64],
    prestarted: &[bool],
) -> StallExtendOutcome {
    let c = sizes.len();
    let horizon = bw.len() as u64;
    let mut extended = deadlines.to_vec();
    let mut stall = 0u64;

    let mut hold: std::collections::VecDeque<u64> = preloaded.iter().copied().collect();
    let mut next = 0usize;
    let mut active: Option<usize> = None;
    let mut remaining = 0u64;

    let mut slot = 1u64;
    while slot <= horizon && (active.is_some() || next < c) {
        while let Some(&front) = hold.front() {
            if front <= slot {
                hold.pop_front();
            } else {
                break;
            }
        }
        let mut avail = bw[slot as usize - 1];
        loop {
            let k = match active {
                Some(k) => k,
                None => {
                    if next >= c || avail == 0 {
                        break;
                    }
                    if !prestarted.get(next).copied().unwrap_or(false)
                        && (hold.len() as u64 + 1) * chunk_slots > buffer_cap
                    {
                        break;
                    }
                    active = Some(next);
                    remaining = sizes[next];
                    next
                }
            };
            if avail == 0 {
                break;
            }
            let take = avail.min(remaining);
            avail -= take;
            remaining -= take;
            if remaining == 0 {
                stall = stall.max(slot.saturating_sub(deadlines[k]));
                extended[k] = deadlines[k] + stall;
                if extended[k] > slot && !prestarted.get(k).copied().unwrap_or(false) {
                    hold.push_back(extended[k]);
                }
                active = None;
                next = k + 1;
            } else {
                break;
            }
        }
        slot += 1;
    }
    let completed = if active.is_some() { next } else { next.min(c) };
    for k in completed..c {
        extended[k] = deadlines[k] + stall;
    }
    StallExtendOutcome {
        extended,
        completed,
    }
}

/// Counts how many placed chunks occupy a given buffer slot during a
/// backward (latest-placement) scan.
///
/// A chunk placed with first-touch slot `touch` and deadline `dl` occupies
/// buffer slots `touch..dl-1`; for any query slot below every recorded
/// deadline, the occupancy count is the number of touches at or below it.
/// Touches arrive in non-increasing order and queries are made in
/// non-increasing slot order, so a single pointer suffices. Chunks already
/// holding the buffer when the scan starts are passed as their ascending
/// pop-deadlines: they occupy every slot before their pop.
pub(crate) struct CoverageCounter {
    touches: Vec<u64>,
    ptr: usize,
    preloaded: Vec<u64>,
    pre_ptr: usize,
}

impl CoverageCounter {
    pub fn new(preloaded: &[u64]) -> Self {
        CoverageCounter {
            touches: Vec::new(),
            ptr: 0,
            preloaded: preloaded.to_vec(),
            pre_ptr: preloaded.len(),
        }
    }

    /// Records a placed chunk's first-touch slot. Must be non-increasing.
    pub fn record_touch(&mut self, touch: u64) {
        debug_assert!(self.touches.last().map_or(true, |&last| touch <= last));
        self.touches.push(touch);
    }

    /// Number of chunks occupying buffer slot `sigma`. `sigma` must be
    /// non-increasing across calls.
    pub fn occupancy_at(&mut self, sigma: u64) -> u64 {
        while self.ptr < self.touches.len() && self.touches[self.ptr] > sigma {
            self.ptr += 1;
        }
        let placed = (self.touches.len() - self.ptr) as u64;
        while self.pre_ptr > 0 && self.preloaded[self.pre_ptr - 1] > sigma {
            self.pre_ptr -= 1;
        }
        let pre = (self.preloaded.len() - self.pre_ptr) as u64;
        placed + pre
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_two_chunks_one_fat_slot() {
        let out = forward_place(&[1000, 1000], &[1, 2], &[2000, 2000], 4, 1, &[]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![1, 1]);
        assert_eq!(out.a, vec![1000, 1000]);
        assert_eq!(out.e, vec![0, 2000]);
        assert_eq!(out.finish, vec![1, 1]);
    }

    #[test]
    fn forward_two_chunks_tight_slots() {
        let out = forward_place(&[1000, 1000], &[1, 2], &[1000, 1000], 4, 1, &[]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![1, 2]);
        assert_eq!(out.e, vec![0, 0]);
    }

    #[test]
    fn forward_skipped_chunk_left_untouched() {
        let out = forward_place(&[0], &[1], &[700], 4, 1, &[]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![0]);
        assert_eq!(out.a, vec![0]);
        assert_eq!(out.e, vec![700]);
    }

    #[test]
    fn forward_detects_missed_deadline() {
        let out = forward_place(&[1000], &[1], &[999, 1], 4, 1, &[]);
        assert!(!out.feasible);
    }

    #[test]
    fn forward_buffer_gate_delays_start() {
        // Buffer of one chunk: chunk 2 cannot start while chunk 1 sits
        // unplayed, so slot 1's 20 kb leftover is wasted and chunk 2 first
        // touches bandwidth at slot 3.
        let out = forward_place(&[10, 10], &[2, 3], &[30, 0, 10], 1, 1, &[]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![1, 3]);
        assert_eq!(out.e, vec![20, 0, 0]);
    }

    #[test]
    fn forward_chunk_in_deadline_slot_needs_no_buffer() {
        // deadline(k) == slot: the chunk never occupies the buffer.
        let out = forward_place(&[10, 10], &[1, 2], &[10, 10], 1, 1, &[]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![1, 2]);
    }

    #[test]
    fn forward_preloaded_buffer_blocks_start() {
        // One foreign chunk occupies the buffer until slot 3.
        let out = forward_place(&[10], &[3], &[10, 10, 10], 1, 1, &[3]);
        assert!(out.feasible);
        assert_eq!(out.t, vec![3]);
    }

    #[test]
    fn stall_accumulates_per_spec_example() {
        let out = stall_forward(&[2000, 2000], &[1000, 1000, 1000, 1000], 1, 100, 1, 0);
        assert!(out.complete);
        assert_eq!(out.d, vec![1, 2]);
        assert_eq!(out.finish, vec![2, 4]);
    }

    #[test]
    fn stall_zero_when_everything_fits_first_slot() {
        let out = stall_forward(&[500, 500], &[4000, 0], 1, 100, 1, 0);
        assert!(out.complete);
        assert_eq!(out.d, vec![0, 0]);
    }

    #[test]
    fn stall_incomplete_when_trace_ends() {
        let out = stall_forward(&[5000], &[100, 100], 1, 100, 1, 0);
        assert!(!out.complete);
    }
}

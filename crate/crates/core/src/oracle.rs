//! Exhaustive brute-force optimizer for desk-scale instances.
//!
//! Enumerates every cumulative-layer assignment (the decoder constraint is
//! baked in by enumerating levels rather than per-layer booleans), checks
//! feasibility with the same greedy in-order placement the planner relies
//! on, and maximizes the exact objective. Used as ground truth by the
//! optimality property tests.

use num::bigint::BigInt;
use num::{One, Zero};

use crate::model::{deadline_of, BandwidthTrace, Rat, StreamConfig, VideoSpec};
use crate::schedule::{forward_place, stall_forward};
use crate::{Error, Result};

/// Instance-size guard for the enumeration.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_chunks: usize,
    pub max_enh_layers: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_chunks: 10,
            max_enh_layers: 2,
        }
    }
}

/// Result of the skip-mode enumeration.
#[derive(Debug, Clone)]
pub struct SkipOracleResult {
    /// The exact maximum objective over all feasible assignments.
    pub best_objective: Rat,
    /// Every assignment attaining the maximum.
    pub optima: Vec<Vec<Option<usize>>>,
    /// Minimum number of skips over all feasible assignments.
    pub min_skips: usize,
    pub feasible_assignments: u64,
}

/// Result of the no-skip enumeration (lexicographic: stall, then quality).
#[derive(Debug, Clone)]
pub struct NoSkipOracleResult {
    /// Minimum total stall over all assignments fetchable within the trace.
    pub min_stall: u64,
    /// Maximum weighted quality among minimum-stall assignments.
    pub best_quality: Rat,
    /// Combined objective: quality minus `lambda * min_stall`.
    pub best_objective: Rat,
    pub optima: Vec<Vec<usize>>,
}

fn check_limits(spec: &VideoSpec, limits: &OracleLimits) -> Result<()> {
    if spec.num_chunks > limits.max_chunks {
        return Err(Error::OracleLimits(format!(
            "{} chunks exceeds the limit of {}",
            spec.num_chunks, limits.max_chunks
        )));
    }
    if spec.num_enh_layers() > limits.max_enh_layers {
        return Err(Error::OracleLimits(format!(
            "{} enhancement layers exceeds the limit of {}",
            spec.num_enh_layers(),
            limits.max_enh_layers
        )));
    }
    Ok(())
}

/// Scaled-integer objective table: entry `[i][v]` is the contribution of
/// chunk `i` delivered at encoded level `v` (0 = skipped, v = level + 1),
/// scaled by `q_gamma^N * q_beta^C` so that comparisons stay in integers.
struct WeightTable {
    table: Vec<Vec<BigInt>>,
    scale: BigInt,
}

fn weight_table(spec: &VideoSpec, config: &StreamConfig) -> WeightTable {
    let c = spec.num_chunks;
    let n_layers = spec.num_layers();
    let (p_g, q_g) = (config.gamma.numer().clone(), config.gamma.denom().clone());
    let (p_b, q_b) = (config.beta.numer().clone(), config.beta.denom().clone());

    // gamma^n scaled by q_g^(n_layers-1): p_g^n * q_g^(n_layers-1-n)
    let mut gamma_scaled = vec![BigInt::one(); n_layers];
    for n in 0..n_layers {
        let mut v = BigInt::one();
        for _ in 0..n {
            v *= &p_g;
        }
        for _ in 0..(n_layers - 1 - n) {
            v *= &q_g;
        }
        gamma_scaled[n] = v;
    }
    // beta^(i+1) scaled by q_b^c: p_b^(i+1) * q_b^(c-1-i)
    let mut beta_scaled = vec![BigInt::one(); c];
    for i in 0..c {
        let mut v = BigInt::one();
        for _ in 0..=i {
            v *= &p_b;
        }
        for _ in 0..(c - 1 - i) {
            v *= &q_b;
        }
        beta_scaled[i] = v;
    }

    let mut table = vec![vec![BigInt::zero()]; c];
    for i in 0..c {
        let mut acc = BigInt::zero();
        for l in 0..n_layers {
            acc += &gamma_scaled[l] * &beta_scaled[i] * BigInt::from(spec.layer_kb(l, i));
            table[i].push(acc.clone());
        }
    }

    let mut scale = BigInt::one();
    for _ in 0..(n_layers - 1) {
        scale *= &q_g;
    }
    for _ in 0..c {
        scale *= &q_b;
    }
    WeightTable { table, scale }
}

/// Enumerates all `(N+2)^C` skip-mode assignments and returns the exact
/// optimum with its full argmax set.
pub fn enumerate_optimal_skip(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    limits: &OracleLimits,
) -> Result<SkipOracleResult> {
    spec.validate()?;
    config.validate()?;
    check_limits(spec, limits)?;
    let c = spec.num_chunks;
    let n_layers = spec.num_layers();
    let deadlines: Vec<u64> = (1..=c)
        .map(|i| deadline_of(i, spec.chunk_duration_slots, config.startup_delay))
        .collect::<Result<_>>()?;
    let horizon = *deadlines.last().unwrap() as usize;
    let bw = trace.resized(horizon).capacities;

    // cum_kb[i][v]: delivered kilobits at encoded value v (0 = skip).
    let cum_kb: Vec<Vec<u64>> = (0..c)
        .map(|i| {
            let mut v = vec![0u64];
            for l in 0..n_layers {
                v.push(spec.cumulative_kb(l, i));
            }
            v
        })
        .collect();
    let weights = weight_table(spec, config);

    let mut encoded = vec![0usize; c];
    let mut sizes = vec![0u64; c];
    let mut best_scaled: Option<BigInt> = None;
    let mut optima: Vec<Vec<Option<usize>>> = Vec::new();
    let mut min_skips = c + 1;
    let mut feasible_assignments = 0u64;

    loop {
        for i in 0..c {
            sizes[i] = cum_kb[i][encoded[i]];
        }
        let outcome = forward_place(
            &sizes,
            &deadlines,
            &bw,
            config.buffer_capacity,
            spec.chunk_duration_slots,
            &[],
        );
        if outcome.feasible {
            feasible_assignments += 1;
            let skips = encoded.iter().filter(|&&v| v == 0).count();
            min_skips = min_skips.min(skips);
            let mut obj = BigInt::zero();
            for i in 0..c {
                obj += &weights.table[i][encoded[i]];
            }
            let better = match &best_scaled {
                None => true,
                Some(b) => obj > *b,
            };
            if better {
                best_scaled = Some(obj);
                optima.clear();
                optima.push(decode(&encoded));
            } else if best_scaled.as_ref() == Some(&obj) {
                optima.push(decode(&encoded));
            }
        }
        // Odometer over per-chunk encoded values 0..=n_layers.
        let mut pos = 0;
        loop {
            if pos == c {
                let best = best_scaled.expect("all-skip assignment is always feasible");
                return Ok(SkipOracleResult {
                    best_objective: Rat::new(best, weights.scale.clone()),
                    optima,
                    min_skips,
                    feasible_assignments,
                });
            }
            encoded[pos] += 1;
            if encoded[pos] <= n_layers {
                break;
            }
            encoded[pos] = 0;
            pos += 1;
        }
    }
}

fn decode(encoded: &[usize]) -> Vec<Option<usize>> {
    encoded
        .iter()
        .map(|&v| if v == 0 { None } else { Some(v - 1) })
        .collect()
}

/// Enumerates all `(N+1)^C` no-skip assignments (base layer forced) and
/// returns the lexicographic optimum: minimum total stall first, maximum
/// weighted quality second.
pub fn enumerate_optimal_noskip(
    spec: &VideoSpec,
    config: &StreamConfig,
    trace: &BandwidthTrace,
    limits: &OracleLimits,
) -> Result<NoSkipOracleResult> {
    spec.validate()?;
    config.validate()?;
    check_limits(spec, limits)?;
    let lambda = config
        .lambda
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no-skip oracle requires lambda".into()))?;
    let c = spec.num_chunks;
    let n_layers = spec.num_layers();
    let bw = &trace.capacities;

    let cum_kb: Vec<Vec<u64>> = (0..c)
        .map(|i| (0..n_layers).map(|l| spec.cumulative_kb(l, i)).collect())
        .collect();
    let weights = weight_table(spec, config);

    let mut levels = vec![0usize; c];
    let mut sizes = vec![0u64; c];
    let mut best: Option<(u64, BigInt)> = None;
    let mut optima: Vec<Vec<usize>> = Vec::new();

    loop {
        for i in 0..c {
            sizes[i] = cum_kb[i][levels[i]];
        }
        let outcome = stall_forward(
            &sizes,
            bw,
            config.startup_delay,
            config.buffer_capacity,
            spec.chunk_duration_slots,
            0,
        );
        if outcome.complete {
            let stall = *outcome.d.last().unwrap();
            let mut obj = BigInt::zero();
            for i in 0..c {
                obj += &weights.table[i][levels[i] + 1];
            }
            let better = match &best {
                None => true,
                Some((s, q)) => stall < *s || (stall == *s && obj > *q),
            };
            if better {
                best = Some((stall, obj));
                optima.clear();
                optima.push(levels.clone());
            } else if best.as_ref().map(|(s, q)| *s == stall && *q == obj) == Some(true) {
                optima.push(levels.clone());
            }
        }
        let mut pos = 0;
        loop {
            if pos == c {
                let (stall, quality_scaled) = best.ok_or_else(|| {
                    Error::Unfetchable(
                        "no assignment (not even base-only) completes within the trace".into(),
                    )
                })?;
                let quality = Rat::new(quality_scaled, weights.scale.clone());
                let objective = &quality - lambda * crate::model::rat_u(stall);
                return Ok(NoSkipOracleResult {
                    min_stall: stall,
                    best_quality: quality,
                    best_objective: objective,
                    optima,
                });
            }
            levels[pos] += 1;
            if levels[pos] < n_layers {
                break;
            }
            levels[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, suggest_gamma, suggest_lambda, Mode};

    fn config_for(spec: &VideoSpec, s: u64, bm: u64, mode: Mode) -> StreamConfig {
        let beta = rat(1001, 1000);
        let gamma = suggest_gamma(spec, &beta, mode).unwrap();
        let mut cfg = StreamConfig::new(s, bm, gamma, beta.clone(), mode);
        if mode == Mode::NoSkip {
            cfg.lambda = Some(suggest_lambda(spec, &cfg.gamma, &beta));
        }
        cfg
    }

    #[test]
    fn single_chunk_abundant_bandwidth_takes_top_layer() {
        let spec = VideoSpec::cbr(1, 1, &[1000, 500]);
        let cfg = config_for(&spec, 1, 4, Mode::Skip);
        let trace = BandwidthTrace::new(vec![100_000]);
        let res = enumerate_optimal_skip(&spec, &cfg, &trace, &OracleLimits::default()).unwrap();
        assert_eq!(res.optima, vec![vec![Some(1)]]);
        assert_eq!(res.min_skips, 0);
    }

    #[test]
    fn starved_first_slot_forces_skipping_chunk_one() {
        let spec = VideoSpec::cbr(2, 1, &[1000]);
        let cfg = config_for(&spec, 1, 4, Mode::Skip);
        let trace = BandwidthTrace::new(vec![0, 1000]);
        let res = enumerate_optimal_skip(&spec, &cfg, &trace, &OracleLimits::default()).unwrap();
        assert_eq!(res.optima, vec![vec![None, Some(0)]]);
        assert_eq!(res.min_skips, 1);
    }

    #[test]
    fn limits_are_enforced() {
        let spec = VideoSpec::cbr(11, 1, &[1000]);
        let cfg = config_for(&spec, 1, 4, Mode::Skip);
        let trace = BandwidthTrace::new(vec![1000; 12]);
        assert!(matches!(
            enumerate_optimal_skip(&spec, &cfg, &trace, &OracleLimits::default()),
            Err(Error::OracleLimits(_))
        ));
    }

    #[test]
    fn noskip_counts_minimum_stall() {
        let spec = VideoSpec::cbr(2, 1, &[2000]);
        let cfg = config_for(&spec, 1, 100, Mode::NoSkip);
        let trace = BandwidthTrace::new(vec![1000; 4]);
        let res = enumerate_optimal_noskip(&spec, &cfg, &trace, &OracleLimits::default()).unwrap();
        assert_eq!(res.min_stall, 2);
        assert_eq!(res.optima, vec![vec![0, 0]]);
    }

    #[test]
    fn noskip_unfetchable_reported() {
        let spec = VideoSpec::cbr(2, 1, &[2000]);
        let cfg = config_for(&spec, 1, 100, Mode::NoSkip);
        let trace = BandwidthTrace::new(vec![100, 100]);
        assert!(matches!(
            enumerate_optimal_noskip(&spec, &cfg, &trace, &OracleLimits::default()),
            Err(Error::Unfetchable(_))
        ));
    }
}

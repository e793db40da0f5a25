//! Bandwidth predictors: harmonic mean over recent history, crowd-sourced
//! mean traces, and synthetic error injection for robustness studies.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::model::BandwidthTrace;
use crate::{Error, Result};

/// Predictor selection for the online engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PredictionConfig {
    /// Perfect knowledge of the true trace.
    Oracle,
    /// Harmonic mean of the last `history_slots` observed slots, held
    /// constant for `horizon_slots`.
    HarmonicMean {
        history_slots: usize,
        horizon_slots: usize,
    },
    /// True trace perturbed per slot by a uniform relative error.
    CrowdMean { error_pe: f64, seed: u64 },
}

fn round_rational(r: &BigRational) -> u64 {
    if r <= &BigRational::zero() {
        return 0;
    }
    let two = BigInt::from(2u8);
    let scaled = (r.numer() * &two + r.denom()) / (r.denom() * &two);
    scaled.to_u64().unwrap_or(u64::MAX)
}

/// Harmonic mean of the history, repeated for `horizon` slots. Zero samples
/// are clamped to 1 kb/slot before inversion so the estimate stays finite
/// and pessimistic.
pub fn harmonic_mean_predict(history: &[u64], horizon: usize) -> Result<Vec<u64>> {
    if history.is_empty() {
        return Err(Error::Prediction("empty history".into()));
    }
    let mut inv_sum = BigRational::zero();
    for &h in history {
        let h = h.max(1);
        inv_sum += BigRational::new(BigInt::from(1u8), BigInt::from(h));
    }
    let mean = BigRational::new(BigInt::from(history.len()), BigInt::from(1u8)) / inv_sum;
    Ok(vec![round_rational(&mean); horizon])
}

/// Multiplies every slot of the truth by `1 + e`, `e` drawn uniformly from
/// `[-pe, pe]`; negative results clamp to zero. Deterministic per seed.
pub fn inject_error(truth: &BandwidthTrace, pe: f64, seed: u64) -> BandwidthTrace {
    if pe == 0.0 {
        return truth.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let capacities = truth
        .capacities
        .iter()
        .map(|&b| {
            let e: f64 = rng.gen_range(-pe..=pe);
            let v = b as f64 * (1.0 + e);
            if v <= 0.0 {
                0
            } else {
                v.round() as u64
            }
        })
        .collect();
    BandwidthTrace {
        capacities,
        slot_seconds: truth.slot_seconds,
    }
}

/// Mean trace across aligned traces: each trace is first averaged within
/// consecutive `bin_slots` windows, then bins are averaged across traces.
/// A shorter trailing bin is averaged over its actual length. The result has
/// one entry per bin with `slot_seconds` scaled accordingly.
pub fn crowd_mean_trace(traces: &[BandwidthTrace], bin_slots: usize) -> Result<BandwidthTrace> {
    if traces.is_empty() {
        return Err(Error::Prediction("empty trace set".into()));
    }
    if bin_slots == 0 {
        return Err(Error::Prediction("bin_slots must be positive".into()));
    }
    let len = traces[0].len();
    if traces.iter().any(|t| t.len() != len) {
        return Err(Error::Prediction("traces are not aligned to a common length".into()));
    }
    if len == 0 {
        return Err(Error::Prediction("traces are empty".into()));
    }
    let bins = (len + bin_slots - 1) / bin_slots;
    let mut capacities = Vec::with_capacity(bins);
    for b in 0..bins {
        let lo = b * bin_slots;
        let hi = (lo + bin_slots).min(len);
        let mut acc = BigRational::zero();
        for t in traces {
            let sum: u64 = t.capacities[lo..hi].iter().sum();
            acc += BigRational::new(
                BigInt::from(sum),
                BigInt::from(((hi - lo) * traces.len()) as u64),
            );
        }
        capacities.push(round_rational(&acc));
    }
    Ok(BandwidthTrace {
        capacities,
        slot_seconds: traces[0].slot_seconds * bin_slots as u64,
    })
}

/// Normalized absolute prediction error `sum |B - Bhat| / (B * N)`, with
/// zero-truth bins excluded from both the sum and the count.
pub fn prediction_error_metric(pred: &BandwidthTrace, truth: &BandwidthTrace) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Prediction(format!(
            "length mismatch: prediction {} vs truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut sum = BigRational::zero();
    let mut n = 0u64;
    for (&p, &t) in pred.capacities.iter().zip(&truth.capacities) {
        if t == 0 {
            continue;
        }
        n += 1;
        let diff = p.abs_diff(t);
        sum += BigRational::new(BigInt::from(diff), BigInt::from(t));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let val = sum / BigRational::new(BigInt::from(n), BigInt::from(1u8));
    Ok(val.to_f64().unwrap_or(f64::INFINITY))
}

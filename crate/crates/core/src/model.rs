//! Canonical domain types, deadline arithmetic, objective evaluation, and
//! weight-condition validation shared by every other module.
//!
//! Units: sizes are integer kilobits, bandwidth is integer kilobits per slot,
//! time is integer slots (one slot defaults to one second). Objective weights
//! are exact rationals so that optimality can be certified by exact equality
//! against the brute-force oracle.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exact rational used for all objective arithmetic.
pub type Rat = BigRational;

/// Builds a rational from an integer numerator and denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an unsigned integer.
pub fn rat_u(v: u64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// Per-layer sizes: one nominal size for every chunk, or a per-chunk vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerSizes {
    Nominal { nominal_kb: u64 },
    PerChunk { per_chunk_kb: Vec<u64> },
}

/// Streaming mode: skip chunks that miss their deadline, or stall for them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Skip,
    NoSkip,
}

/// The encoded video: `C` chunks of `L` slots each, a base layer and `N`
/// enhancement layers with per-layer (optionally per-chunk) sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub chunk_duration_slots: u64,
    pub num_chunks: usize,
    pub layers: Vec<LayerSizes>,
}

impl VideoSpec {
    /// A constant-bitrate spec with one nominal size per layer.
    pub fn cbr(num_chunks: usize, chunk_duration_slots: u64, layer_kb: &[u64]) -> Self {
        VideoSpec {
            chunk_duration_slots,
            num_chunks,
            layers: layer_kb
                .iter()
                .map(|&kb| LayerSizes::Nominal { nominal_kb: kb })
                .collect(),
        }
    }

    /// Number of enhancement layers (`N`).
    pub fn num_enh_layers(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    /// Number of layers including the base layer (`N + 1`).
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Size in kilobits of layer `n` of chunk `i` (0-based chunk index).
    pub fn layer_kb(&self, n: usize, chunk: usize) -> u64 {
        match &self.layers[n] {
            LayerSizes::Nominal { nominal_kb } => *nominal_kb,
            LayerSizes::PerChunk { per_chunk_kb } => per_chunk_kb[chunk],
        }
    }

    /// Cumulative size of chunk `i` fetched up to `level` inclusive.
    pub fn cumulative_kb(&self, level: usize, chunk: usize) -> u64 {
        (0..=level).map(|n| self.layer_kb(n, chunk)).sum()
    }

    /// Cumulative size for an optional level (`None` means skipped).
    pub fn delivered_kb(&self, level: Option<usize>, chunk: usize) -> u64 {
        match level {
            Some(l) => self.cumulative_kb(l, chunk),
            None => 0,
        }
    }

    /// Largest (over chunks) size of layer `n`.
    pub fn max_layer_kb(&self, n: usize) -> u64 {
        match &self.layers[n] {
            LayerSizes::Nominal { nominal_kb } => *nominal_kb,
            LayerSizes::PerChunk { per_chunk_kb } => {
                per_chunk_kb.iter().copied().max().unwrap_or(0)
            }
        }
    }

    /// Smallest (over chunks) size of layer `n`.
    pub fn min_layer_kb(&self, n: usize) -> u64 {
        match &self.layers[n] {
            LayerSizes::Nominal { nominal_kb } => *nominal_kb,
            LayerSizes::PerChunk { per_chunk_kb } => {
                per_chunk_kb.iter().copied().min().unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_chunks == 0 {
            return Err(Error::InvalidSpec("num_chunks must be positive".into()));
        }
        if self.chunk_duration_slots == 0 {
            return Err(Error::InvalidSpec(
                "chunk_duration_slots must be positive".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("at least a base layer required".into()));
        }
        for (n, layer) in self.layers.iter().enumerate() {
            if let LayerSizes::PerChunk { per_chunk_kb } = layer {
                if per_chunk_kb.len() != self.num_chunks {
                    return Err(Error::InvalidSpec(format!(
                        "layer {} per-chunk vector has {} entries, expected {}",
                        n,
                        per_chunk_kb.len(),
                        self.num_chunks
                    )));
                }
            }
            if n == 0 && self.min_layer_kb(0) == 0 {
                return Err(Error::InvalidSpec(
                    "base layer sizes must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Session parameters: startup delay, buffer capacity, and objective weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    /// Startup delay `s` in slots.
    pub startup_delay: u64,
    /// Playback buffer capacity `B_m` in slots of video.
    pub buffer_capacity: u64,
    /// Inter-layer weight, in (0, 1).
    pub gamma: Rat,
    /// Inter-chunk weight, > 1 (typically 1 + epsilon).
    pub beta: Rat,
    /// Stall weight for no-skip mode.
    pub lambda: Option<Rat>,
    pub mode: Mode,
}

impl StreamConfig {
    pub fn new(startup_delay: u64, buffer_capacity: u64, gamma: Rat, beta: Rat, mode: Mode) -> Self {
        StreamConfig {
            startup_delay,
            buffer_capacity,
            gamma,
            beta,
            lambda: None,
            mode,
        }
    }

    pub fn with_lambda(mut self, lambda: Rat) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be positive".into()));
        }
        if self.gamma <= Rat::zero() || self.gamma >= Rat::one() {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1)".into()));
        }
        if self.beta <= Rat::one() {
            return Err(Error::InvalidConfig("beta must exceed 1".into()));
        }
        Ok(())
    }
}

/// Per-slot available capacity in kilobits, slot index `j = 1..=len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    pub capacities: Vec<u64>,
    /// Wall-clock seconds per slot (affects rate reporting only).
    pub slot_seconds: u64,
}

impl BandwidthTrace {
    pub fn new(capacities: Vec<u64>) -> Self {
        BandwidthTrace {
            capacities,
            slot_seconds: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.capacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacities.is_empty()
    }

    /// Capacity at 1-based slot `j`; slots past the end carry zero.
    pub fn at(&self, slot: u64) -> u64 {
        if slot == 0 {
            return 0;
        }
        self.capacities.get(slot as usize - 1).copied().unwrap_or(0)
    }

    /// Zero-extends or truncates to exactly `slots` entries.
    pub fn resized(&self, slots: usize) -> BandwidthTrace {
        let mut capacities = self.capacities.clone();
        capacities.resize(slots, 0);
        BandwidthTrace {
            capacities,
            slot_seconds: self.slot_seconds,
        }
    }
}

/// Iteration counters recorded by the planner scans, one entry per layer
/// pass. Used to assert the linear-complexity loop bound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    pub backward_iterations: Vec<u64>,
    pub forward_iterations: Vec<u64>,
}

/// Offline plan: per-chunk cumulative layer decisions plus the timing
/// metadata produced by the scans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    /// Decided cumulative level per chunk; `None` means skipped.
    pub levels: Vec<Option<usize>>,
    /// Decided cumulative size `X(i)` in kilobits per chunk.
    pub cumulative_kb: Vec<u64>,
    /// Lower deadline `t(i)`: first slot chunk `i` is fetched under the
    /// earliest in-order schedule (0 for skipped chunks).
    pub lower_deadline: Vec<u64>,
    /// Upper deadline per chunk, including any stall shift in no-skip mode.
    pub upper_deadline: Vec<u64>,
    /// Kilobits of chunk `i` fetched during slot `t(i)`.
    pub head_fetch: Vec<u64>,
    /// Remaining bandwidth per slot after the final forward pass.
    pub residual_bw: Vec<u64>,
    /// Cumulative stall slots before each chunk plays (no-skip mode; zeros
    /// in skip mode).
    pub stall_before: Vec<u64>,
    pub scan_stats: ScanStats,
}

impl LayerPlan {
    /// Chunks (0-based) decided at cumulative level `n` or above.
    pub fn layer_set(&self, n: usize) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Some(level) if *level >= n => Some(i),
                _ => None,
            })
            .collect()
    }

    /// 0-based indices of skipped chunks, ascending.
    pub fn skipped(&self) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| if l.is_none() { Some(i) } else { None })
            .collect()
    }

    /// Total stall slots (no-skip mode).
    pub fn total_stall(&self) -> u64 {
        self.stall_before.last().copied().unwrap_or(0)
    }

    /// Checks the decoder prefix property against a spec.
    pub fn check_decoder_constraint(&self, spec: &VideoSpec) -> Result<()> {
        for (i, level) in self.levels.iter().enumerate() {
            if let Some(l) = level {
                if *l >= spec.num_layers() {
                    return Err(Error::InvalidPlan(format!(
                        "chunk {} decided at level {} but only {} layers exist",
                        i + 1,
                        l,
                        spec.num_layers()
                    )));
                }
                if self.cumulative_kb[i] != spec.cumulative_kb(*l, i) {
                    return Err(Error::InvalidPlan(format!(
                        "chunk {} cumulative size {} does not match level {}",
                        i + 1,
                        self.cumulative_kb[i],
                        l
                    )));
                }
            } else if self.cumulative_kb[i] != 0 {
                return Err(Error::InvalidPlan(format!(
                    "chunk {} skipped but carries {} kb",
                    i + 1,
                    self.cumulative_kb[i]
                )));
            }
        }
        Ok(())
    }
}

/// Histogram bucket labels: skipped, base layer, enhancement layers.
pub fn histogram_labels(num_layers: usize) -> Vec<String> {
    let mut labels = vec!["S".to_string(), "BL".to_string()];
    for n in 1..num_layers {
        labels.push(format!("EL{}", n));
    }
    labels
}

/// Aggregated quality-of-experience metrics for one session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QoEReport {
    pub skip_count: usize,
    pub skip_duration_slots: u64,
    pub stall_duration_slots: u64,
    pub avg_playback_rate_kbps: f64,
    pub lsr_kbps_per_sec: f64,
    /// Counts per delivery level: index 0 = skipped, 1 = BL, 1+n = ELn.
    pub layer_histogram: Vec<usize>,
    /// Exact objective value as a rational string `p/q`.
    pub objective: String,
    pub objective_f64: f64,
}

/// Playback deadline of chunk `i` (1-based): `(i-1)*L + s`.
pub fn deadline_of(i: usize, chunk_duration_slots: u64, startup_delay: u64) -> Result<u64> {
    if i == 0 {
        return Err(Error::ChunkIndex(0, usize::MAX));
    }
    Ok((i as u64 - 1) * chunk_duration_slots + startup_delay)
}

/// Deadline helper bound to a spec and config, with range checking.
pub fn deadline_in(spec: &VideoSpec, config: &StreamConfig, i: usize) -> Result<u64> {
    if i == 0 || i > spec.num_chunks {
        return Err(Error::ChunkIndex(i, spec.num_chunks));
    }
    deadline_of(i, spec.chunk_duration_slots, config.startup_delay)
}

/// One side-by-side comparison from the weight-condition check.
#[derive(Debug, Clone)]
pub struct WeightCondition {
    /// Layer index `a` the condition protects, or `None` for the lambda rule.
    pub layer: Option<usize>,
    pub lhs: Rat,
    pub rhs: Rat,
    pub holds: bool,
}

/// Verdict of [`validate_weights`]: one entry per condition, all exact.
#[derive(Debug, Clone)]
pub struct WeightVerdict {
    pub conditions: Vec<WeightCondition>,
}

impl WeightVerdict {
    pub fn is_valid(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

/// Sum of `beta^i` for `i = 1..=C`.
fn beta_power_sum(beta: &Rat, c: usize) -> Rat {
    let mut sum = Rat::zero();
    let mut pow = Rat::one();
    for _ in 1..=c {
        pow *= beta;
        sum += &pow;
    }
    sum
}

/// Checks the layer-priority weight condition: for every layer `a`,
/// `gamma^a * Y_a > sum_{k>a} gamma^k * Y_k * sum_i beta^i`, so one chunk at
/// layer `a` outweighs all higher layers of all chunks combined. In no-skip
/// mode additionally checks `lambda > sum_n gamma^n Y_n sum_i beta^i`. For
/// per-chunk sizes the check is conservative: smallest size on the left,
/// largest on the right.
pub fn validate_weights(spec: &VideoSpec, config: &StreamConfig) -> Result<WeightVerdict> {
    spec.validate()?;
    config.validate()?;
    let n_layers = spec.num_layers();
    let c = spec.num_chunks;
    let beta_sum = beta_power_sum(&config.beta, c);
    let mut conditions = Vec::new();

    let gamma_pow: Vec<Rat> = {
        let mut v = Vec::with_capacity(n_layers);
        let mut p = Rat::one();
        for _ in 0..n_layers {
            v.push(p.clone());
            p *= &config.gamma;
        }
        v
    };

    for a in 0..n_layers.saturating_sub(1) {
        let lhs = &gamma_pow[a] * rat_u(spec.min_layer_kb(a));
        let mut rhs = Rat::zero();
        for k in a + 1..n_layers {
            rhs += &gamma_pow[k] * rat_u(spec.max_layer_kb(k)) * &beta_sum;
        }
        let holds = lhs > rhs;
        conditions.push(WeightCondition {
            layer: Some(a),
            lhs,
            rhs,
            holds,
        });
    }

    if config.mode == Mode::NoSkip {
        let mut rhs = Rat::zero();
        for n in 0..n_layers {
            rhs += &gamma_pow[n] * rat_u(spec.max_layer_kb(n)) * &beta_sum;
        }
        let (lhs, holds) = match &config.lambda {
            Some(l) => (l.clone(), *l > rhs),
            None => (Rat::zero(), false),
        };
        conditions.push(WeightCondition {
            layer: None,
            lhs,
            rhs,
            holds,
        });
    }

    Ok(WeightVerdict { conditions })
}

/// Largest simple gamma of the form `1/2^k` or `p/64` satisfying the weight
/// condition, scaled by 9/10 for margin. Found by coarse-to-fine search with
/// exact verification of every candidate.
pub fn suggest_gamma(spec: &VideoSpec, beta: &Rat, mode: Mode) -> Result<Rat> {
    let passes = |g: &Rat| -> bool {
        if *g <= Rat::zero() || *g >= Rat::one() {
            return false;
        }
        let cfg = StreamConfig {
            startup_delay: 0,
            buffer_capacity: 1,
            gamma: g.clone(),
            beta: beta.clone(),
            lambda: None,
            mode: Mode::Skip,
        };
        validate_weights(spec, &cfg).map(|v| v.is_valid()).unwrap_or(false)
    };
    let _ = mode;
    // Exponential descent to find a passing power of two, then refine the
    // numerator at denominator 2^k+6 and apply the 9/10 margin.
    let mut k = 0u32;
    loop {
        let g = Rat::new(BigInt::one(), BigInt::from(2u64).pow(k));
        if k > 0 && passes(&g) {
            break;
        }
        k += 1;
        if k > 200 {
            return Err(Error::WeightCondition(
                "no gamma of the form 1/2^k satisfies the layer-priority condition".into(),
            ));
        }
    }
    let den = BigInt::from(2u64).pow(k + 6);
    let mut num = BigInt::from(2u64).pow(6);
    // Grow the numerator while the condition still holds.
    loop {
        let next = &num + BigInt::one();
        let g = Rat::new(next.clone(), den.clone());
        if g < Rat::one() && passes(&g) {
            num = next;
        } else {
            break;
        }
    }
    let best = Rat::new(num, den);
    let scaled = best * rat(9, 10);
    debug_assert!(passes(&scaled));
    Ok(scaled)
}

/// Weights that make the objective order fully lexicographic: one more unit
/// at layer `a` beats any repositioning at layer `a`, and any repositioning
/// at layer `a` beats everything layers above `a` can offer.
///
/// With `beta = 1 + 1/M`, `M = 4*C^2*L_hint`, the spread `beta^C - 1` stays
/// below `1/(2C)`, so a one-unit count advantage at a layer always exceeds
/// the largest possible positional swing within that layer. Positional
/// differences are rationals with denominator `M^C`, so any nonzero swing is
/// at least `Y_a / M^C` in layer-`a` units; choosing
/// `gamma < Y_min / (M^C * 2C * (N+1) * Y_max)` makes the smallest swing at
/// any layer exceed the combined weight of all higher layers. Under these
/// weights the exact objective ranks plans by: base-layer count, base-layer
/// positions (later preferred), first-enhancement count, positions, and so
/// on - the priority order the planner's layer-by-layer scans decide in.
pub fn lexicographic_weights(spec: &VideoSpec) -> (Rat, Rat) {
    let c = spec.num_chunks.max(1) as u64;
    let m = BigInt::from(4 * c * c);
    let beta = Rat::one() + Rat::new(BigInt::one(), m.clone());
    let n_layers = spec.num_layers() as u64;
    let y_min = (0..spec.num_layers())
        .map(|n| spec.min_layer_kb(n))
        .min()
        .unwrap_or(1)
        .max(1);
    let y_max = (0..spec.num_layers())
        .map(|n| spec.max_layer_kb(n))
        .max()
        .unwrap_or(1)
        .max(1);
    let mut m_pow_c = BigInt::one();
    for _ in 0..c {
        m_pow_c *= &m;
    }
    let den = m_pow_c * BigInt::from(4 * c * n_layers * y_max);
    let gamma = Rat::new(BigInt::from(y_min), den);
    (gamma, beta)
}

/// Default stall weight: twice the total weighted quality, which strictly
/// dominates the no-skip condition.
pub fn suggest_lambda(spec: &VideoSpec, gamma: &Rat, beta: &Rat) -> Rat {
    let beta_sum = beta_power_sum(beta, spec.num_chunks);
    let mut total = Rat::zero();
    let mut gpow = Rat::one();
    for n in 0..spec.num_layers() {
        total += &gpow * rat_u(spec.max_layer_kb(n)) * &beta_sum;
        gpow *= gamma;
    }
    total * rat(2, 1)
}

/// Exact objective of a plan: `sum_n gamma^n sum_i beta^i Z_{n,i}`, minus
/// `lambda * d(C)` in no-skip mode.
pub fn objective_value(plan: &LayerPlan, spec: &VideoSpec, config: &StreamConfig) -> Result<Rat> {
    plan.check_decoder_constraint(spec)?;
    let value = objective_of_levels(&plan.levels, spec, config);
    match config.mode {
        Mode::Skip => Ok(value),
        Mode::NoSkip => {
            let lambda = config.lambda.clone().ok_or_else(|| {
                Error::InvalidConfig("no-skip objective requires lambda".into())
            })?;
            Ok(value - lambda * rat_u(plan.total_stall()))
        }
    }
}

/// Quality part of the objective for a level assignment (no stall term).
pub fn objective_of_levels(
    levels: &[Option<usize>],
    spec: &VideoSpec,
    config: &StreamConfig,
) -> Rat {
    let mut total = Rat::zero();
    let mut beta_pow = Rat::one();
    for (i, level) in levels.iter().enumerate() {
        beta_pow *= &config.beta;
        if let Some(l) = level {
            let mut gamma_pow = Rat::one();
            for n in 0..=*l {
                total += &gamma_pow * &beta_pow * rat_u(spec.layer_kb(n, i));
                gamma_pow *= &config.gamma;
            }
        }
    }
    total
}

/// Converts ascending cumulative ABR rates (kilobits per second) into
/// incremental per-layer sizes in kilobits: the difference between adjacent
/// rates times the chunk duration becomes the layer size.
pub fn abr_rate_mapping(
    abr_cumulative_rates_kbps: &[u64],
    chunk_duration_slots: u64,
    slot_seconds: u64,
) -> Result<Vec<u64>> {
    if abr_cumulative_rates_kbps.is_empty() {
        return Err(Error::InvalidSpec("ABR rate list is empty".into()));
    }
    let mut prev = 0u64;
    let mut sizes = Vec::with_capacity(abr_cumulative_rates_kbps.len());
    for (idx, &rate) in abr_cumulative_rates_kbps.iter().enumerate() {
        if idx > 0 && rate <= prev {
            return Err(Error::InvalidSpec(format!(
                "ABR rates must be strictly ascending ({} after {})",
                rate, prev
            )));
        }
        sizes.push((rate - prev) * chunk_duration_slots * slot_seconds);
        prev = rate;
    }
    Ok(sizes)
}

/// Renders a rational as an `f64` for reporting.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

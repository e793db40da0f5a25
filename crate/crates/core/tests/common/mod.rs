//! Shared random-instance generation for the optimality suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use svc_lbp::model::LayerSizes;
use svc_lbp::model::{
    lexicographic_weights, suggest_lambda, BandwidthTrace, Mode, StreamConfig, VideoSpec,
};

pub struct Instance {
    pub spec: VideoSpec,
    pub config: StreamConfig,
    pub trace: BandwidthTrace,
}

/// Random desk-scale instance: C <= 8, N <= 2, B_m in {2..5}*L, bursty
/// bandwidth with dead slots. Weights are derived per instance and verified
/// exactly before use.
pub fn random_instance(seed: u64, mode: Mode) -> Instance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let c = rng.gen_range(1..=8usize);
    let n_enh = rng.gen_range(0..=2usize);
    let l = rng.gen_range(1..=2u64);
    let s = rng.gen_range(0..=4u64);
    let bm = l * rng.gen_range(2..=5u64);

    // Optimality holds for per-layer constant sizes; random per-chunk
    // sizes can break the one-for-one exchange the backward scan relies on.
    let mut layers = Vec::new();
    for n in 0..=n_enh {
        let lo = if n == 0 { 2 } else { 1 };
        layers.push(LayerSizes::Nominal {
            nominal_kb: rng.gen_range(lo..=15u64) * 100,
        });
    }
    let spec = VideoSpec {
        chunk_duration_slots: l,
        num_chunks: c,
        layers,
    };

    let deadline_c = (c as u64 - 1) * l + s;
    let mut horizon = deadline_c.max(1) as usize;
    if mode == Mode::NoSkip {
        // Guarantee the base layers are fetchable: a generous tail.
        horizon += 2 * c * l as usize + 2;
    }
    let max_base = (0..c).map(|i| spec.layer_kb(0, i)).max().unwrap();
    let mut capacities: Vec<u64> = (0..horizon)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0
            } else {
                rng.gen_range(0..=30u64) * 100
            }
        })
        .collect();
    if mode == Mode::NoSkip {
        let tail_start = capacities.len().saturating_sub(2 * c);
        for v in &mut capacities[tail_start..] {
            *v = max_base;
        }
    }
    let trace = BandwidthTrace::new(capacities);

    let (gamma, beta) = lexicographic_weights(&spec);
    let mut config = StreamConfig::new(s, bm, gamma, beta.clone(), mode);
    if mode == Mode::NoSkip {
        config.lambda = Some(suggest_lambda(&spec, &config.gamma, &beta));
    }
    Instance { spec, config, trace }
}

/// Number of randomized optimality instances to run; override with
/// SVC_LBP_SUITE_N for heavier local fuzzing.
pub fn suite_size(default: usize) -> usize {
    std::env::var("SVC_LBP_SUITE_N")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

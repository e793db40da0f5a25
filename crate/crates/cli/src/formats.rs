//! File formats: video spec JSON, bandwidth trace text, and exact rational
//! parsing for weight flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;

use svc_lbp::model::{BandwidthTrace, VideoSpec};

/// Loads the video spec JSON:
/// `{"chunk_duration_slots": int, "num_chunks": int, "layers": [...]}` with
/// each layer either `{"nominal_kb": int}` or `{"per_chunk_kb": [int; C]}`.
pub fn load_video(path: &Path) -> Result<VideoSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading video spec {}", path.display()))?;
    let spec: VideoSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing video spec {}", path.display()))?;
    spec.validate()
        .with_context(|| format!("validating video spec {}", path.display()))?;
    Ok(spec)
}

/// Loads a bandwidth trace: UTF-8 text, one line per slot, either `INT`
/// kilobits or `INDEX,INT` CSV with an optional `slot,kbps` header. Values
/// are kilobits per second and convert exactly to kilobits per slot via
/// `slot_seconds`.
pub fn load_trace(path: &Path, slot_seconds: u64) -> Result<BandwidthTrace> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading trace {}", path.display()))?;
    let mut capacities = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.eq_ignore_ascii_case("slot,kbps") {
            continue;
        }
        let value_str = match line.split_once(',') {
            Some((_idx, v)) => v.trim(),
            None => line,
        };
        let kbps: u64 = value_str
            .parse()
            .with_context(|| format!("{}:{}: not an integer: {:?}", path.display(), lineno + 1, value_str))?;
        capacities.push(kbps * slot_seconds);
    }
    if capacities.is_empty() {
        bail!("{}: trace has no slots", path.display());
    }
    Ok(BandwidthTrace {
        capacities,
        slot_seconds,
    })
}

/// Parses an exact rational from `p/q`, an integer, or a finite decimal
/// (`0.9` becomes 9/10 exactly).
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num.trim().parse().context("rational numerator")?;
        let d: BigInt = den.trim().parse().context("rational denominator")?;
        if d == BigInt::from(0u8) {
            bail!("zero denominator in {:?}", text);
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        let digits = frac_part.len() as u32;
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let whole: BigInt = int_part.parse().context("decimal integer part")?;
        let frac: BigInt = if frac_part.is_empty() {
            BigInt::from(0u8)
        } else {
            frac_part.parse().context("decimal fraction part")?
        };
        let scale = BigInt::from(10u8).pow(digits);
        let negative = t.starts_with('-');
        let magnitude = whole.magnitude().clone() * scale.magnitude() + frac.magnitude();
        let num = BigInt::from_biguint(
            if negative {
                num::bigint::Sign::Minus
            } else {
                num::bigint::Sign::Plus
            },
            magnitude,
        );
        return Ok(BigRational::new(num, scale));
    }
    let n: BigInt = t.parse().with_context(|| format!("not a rational: {:?}", text))?;
    Ok(BigRational::from_integer(n) * BigRational::one())
}

/// Tiles the video to cover a long trace and cuts it at the end: the spec's
/// chunk list is repeated until the last deadline reaches the trace length.
pub fn loop_video_over(spec: &VideoSpec, trace_slots: usize, startup: u64) -> VideoSpec {
    let l = spec.chunk_duration_slots;
    let c = spec.num_chunks;
    let max_chunks = ((trace_slots as u64).saturating_sub(startup) / l + 1).max(1) as usize;
    if max_chunks <= c {
        let mut cut = spec.clone();
        cut.num_chunks = max_chunks;
        cut.layers = spec
            .layers
            .iter()
            .map(|layer| match layer {
                svc_lbp::model::LayerSizes::Nominal { nominal_kb } => {
                    svc_lbp::model::LayerSizes::Nominal {
                        nominal_kb: *nominal_kb,
                    }
                }
                svc_lbp::model::LayerSizes::PerChunk { per_chunk_kb } => {
                    svc_lbp::model::LayerSizes::PerChunk {
                        per_chunk_kb: per_chunk_kb[..max_chunks].to_vec(),
                    }
                }
            })
            .collect();
        return cut;
    }
    let layers = spec
        .layers
        .iter()
        .map(|layer| match layer {
            svc_lbp::model::LayerSizes::Nominal { nominal_kb } => {
                svc_lbp::model::LayerSizes::Nominal {
                    nominal_kb: *nominal_kb,
                }
            }
            svc_lbp::model::LayerSizes::PerChunk { per_chunk_kb } => {
                let tiled: Vec<u64> = per_chunk_kb
                    .iter()
                    .cycle()
                    .take(max_chunks)
                    .copied()
                    .collect();
                svc_lbp::model::LayerSizes::PerChunk { per_chunk_kb: tiled }
            }
        })
        .collect();
    VideoSpec {
        chunk_duration_slots: l,
        num_chunks: max_chunks,
        layers,
    }
}

//! Synthetic traffic generation, injection-rate sweeps, and saturation-point
//! detection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::noc::{Coord, NocEngine, NocParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    UniformRandom,
    Transpose,
    Tornado,
    Shuffle,
    Neighbor,
    BitComplement,
}

impl TrafficPattern {
    pub const ALL: [TrafficPattern; 6] = [
        TrafficPattern::UniformRandom,
        TrafficPattern::Transpose,
        TrafficPattern::Tornado,
        TrafficPattern::Shuffle,
        TrafficPattern::Neighbor,
        TrafficPattern::BitComplement,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrafficPattern::UniformRandom => "uniform_random",
            TrafficPattern::Transpose => "transpose",
            TrafficPattern::Tornado => "tornado",
            TrafficPattern::Shuffle => "shuffle",
            TrafficPattern::Neighbor => "neighbor",
            TrafficPattern::BitComplement => "bit_complement",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform_random" | "uniform" | "ur" => Ok(TrafficPattern::UniformRandom),
            "transpose" => Ok(TrafficPattern::Transpose),
            "tornado" => Ok(TrafficPattern::Tornado),
            "shuffle" => Ok(TrafficPattern::Shuffle),
            "neighbor" => Ok(TrafficPattern::Neighbor),
            "bit_complement" | "bitcomp" => Ok(TrafficPattern::BitComplement),
            other => Err(SimError::Precondition(format!(
                "unknown traffic pattern '{other}'"
            ))),
        }
    }

    /// Patterns defined over node indices need a square power-of-two mesh.
    fn needs_square_pow2(&self) -> bool {
        matches!(
            self,
            TrafficPattern::Transpose | TrafficPattern::Shuffle | TrafficPattern::BitComplement
        )
    }
}

fn node_bits(nodes: usize) -> u32 {
    nodes.trailing_zeros()
}

/// Destination of one packet from `src`. Deterministic patterns that map a
/// node to itself yield None (the packet is dropped); uniform random redraws
/// until the destination differs from the source.
pub fn destination(
    pattern: TrafficPattern,
    src: Coord,
    params: &NocParams,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Coord>> {
    if !params.contains(src) {
        return Err(SimError::OffMesh {
            x: src.x,
            y: src.y,
            cols: params.cols,
            rows: params.rows,
        });
    }
    let nodes = params.nodes();
    if pattern.needs_square_pow2() && (params.rows != params.cols || !nodes.is_power_of_two()) {
        return Err(SimError::Precondition(format!(
            "{} needs a square power-of-two mesh, got {}x{}",
            pattern.name(),
            params.rows,
            params.cols
        )));
    }
    let idx = src.y * params.cols + src.x;
    let dst = match pattern {
        TrafficPattern::UniformRandom => loop {
            let d = rng.gen_range(0..nodes);
            if d != idx {
                break Coord::new(d % params.cols, d / params.cols);
            }
        },
        TrafficPattern::Transpose => Coord::new(src.y, src.x),
        TrafficPattern::Tornado => {
            let shift = params.cols.div_ceil(2) - 1;
            Coord::new((src.x + shift) % params.cols, src.y)
        }
        TrafficPattern::Shuffle => {
            let bits = node_bits(nodes);
            let rotated = ((idx << 1) | (idx >> (bits - 1))) & (nodes - 1);
            Coord::new(rotated % params.cols, rotated / params.cols)
        }
        TrafficPattern::Neighbor => Coord::new((src.x + 1) % params.cols, src.y),
        TrafficPattern::BitComplement => {
            let flipped = !idx & (nodes - 1);
            Coord::new(flipped % params.cols, flipped / params.cols)
        }
    };
    if dst == src {
        return Ok(None);
    }
    Ok(Some(dst))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Offered load, flits per node per cycle.
    pub injection_rate: f64,
    pub avg_latency: f64,
    /// Accepted load, flits per node per cycle over the measurement window.
    pub reception_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCurve {
    pub pattern: String,
    pub flow: String,
    pub points: Vec<SweepPoint>,
    /// Smallest swept rate where latency crosses 3x the zero-load value,
    /// interpolated between neighbors; None if the threshold is never hit.
    pub saturation_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub warmup_cycles: u64,
    pub measure_cycles: u64,
    pub packet_length: u32,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            warmup_cycles: 10_000,
            measure_cycles: 50_000,
            packet_length: 5,
            seed: 1,
        }
    }
}

const SATURATION_FACTOR: f64 = 3.0;

/// Bernoulli packet injection at the given flit rate per node, one
/// simulation per rate point. Latency of a saturated network is measured
/// over the packets it still delivers; source-queue wait counts toward
/// latency because injection is timestamped at creation.
pub fn sweep(
    pattern: TrafficPattern,
    params: &NocParams,
    rates: &[f64],
    opts: &SweepOptions,
) -> Result<SweepCurve> {
    if rates.is_empty() {
        return Err(SimError::Precondition("rate list is empty".into()));
    }
    for r in rates {
        if !(*r > 0.0 && *r <= 1.0) {
            return Err(SimError::Precondition(format!(
                "injection rates must be in (0,1], got {r}"
            )));
        }
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::Precondition(
            "injection rates must be strictly increasing".into(),
        ));
    }
    let mut points = Vec::with_capacity(rates.len());
    for (i, &rate) in rates.iter().enumerate() {
        let point = run_point(pattern, params, rate, opts, opts.seed.wrapping_add(i as u64))?;
        points.push(point);
    }
    let zero_load = points[0].avg_latency;
    let threshold = SATURATION_FACTOR * zero_load;
    let mut saturation = None;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.avg_latency <= threshold && b.avg_latency > threshold {
            let frac = (threshold - a.avg_latency) / (b.avg_latency - a.avg_latency);
            saturation = Some(a.injection_rate + frac * (b.injection_rate - a.injection_rate));
            break;
        }
    }
    if saturation.is_none() && points[0].avg_latency > threshold {
        saturation = Some(points[0].injection_rate);
    }
    Ok(SweepCurve {
        pattern: pattern.name().to_string(),
        flow: params.flow.name().to_string(),
        points,
        saturation_rate: saturation,
    })
}

fn run_point(
    pattern: TrafficPattern,
    params: &NocParams,
    rate: f64,
    opts: &SweepOptions,
    seed: u64,
) -> Result<SweepPoint> {
    let mut engine = NocEngine::new(params.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_packet = rate / opts.packet_length as f64;
    let nodes = params.nodes();
    let total = opts.warmup_cycles + opts.measure_cycles;
    let measure_start = opts.warmup_cycles;

    let mut delivered_before: u64 = 0;
    for cycle in 0..total {
        for node in 0..nodes {
            if rng.gen_bool(p_packet) {
                let src = Coord::new(node % params.cols, node / params.cols);
                if let Some(dst) = destination(pattern, src, params, &mut rng)? {
                    let _ = engine.try_inject(src, dst, opts.packet_length)?;
                }
            }
        }
        engine.step()?;
        if cycle + 1 == measure_start {
            delivered_before = engine.stats().delivered_flits;
        }
    }
    // Latency samples: packets delivered inside the measurement window,
    // timestamped from creation so source-queue wait is included.
    let window_end = engine.cycle();
    let window_start = window_end - opts.measure_cycles;
    let mut latency_sum: u128 = 0;
    let mut latency_count: u64 = 0;
    for r in engine.records() {
        if let Some(d) = r.delivered_cycle {
            if d > window_start && d <= window_end {
                latency_sum += (d - r.inject_cycle) as u128;
                latency_count += 1;
            }
        }
    }
    if latency_count == 0 {
        return Err(SimError::NothingDelivered);
    }
    let measured = engine.stats().delivered_flits - delivered_before;
    Ok(SweepPoint {
        injection_rate: rate,
        avg_latency: latency_sum as f64 / latency_count as f64,
        reception_rate: measured as f64 / (nodes as f64 * opts.measure_cycles as f64),
    })
}

/// The reception-vs-injection series, with the plateau (the largest accepted
/// rate seen anywhere on the curve) as the saturated reception rate.
pub fn reception_curve(curve: &SweepCurve) -> (Vec<(f64, f64)>, f64) {
    let series: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.injection_rate, p.reception_rate))
        .collect();
    let plateau = curve
        .points
        .iter()
        .map(|p| p.reception_rate)
        .fold(0.0f64, f64::max);
    (series, plateau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noc::FlowControl;

    fn params8(flow: FlowControl) -> NocParams {
        NocParams::new(8, 8, flow)
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn destination_examples() {
        let p = params8(FlowControl::Wormhole);
        let mut r = rng();
        // Transpose swaps coordinates.
        assert_eq!(
            destination(TrafficPattern::Transpose, Coord::new(1, 3), &p, &mut r).unwrap(),
            Some(Coord::new(3, 1))
        );
        // Bit complement flips the 6-bit node index: 0 -> 63.
        assert_eq!(
            destination(TrafficPattern::BitComplement, Coord::new(0, 0), &p, &mut r).unwrap(),
            Some(Coord::new(7, 7))
        );
        // Neighbor wraps east.
        assert_eq!(
            destination(TrafficPattern::Neighbor, Coord::new(7, 2), &p, &mut r).unwrap(),
            Some(Coord::new(0, 2))
        );
        // Tornado shifts by ceil(cols/2)-1 = 3.
        assert_eq!(
            destination(TrafficPattern::Tornado, Coord::new(6, 1), &p, &mut r).unwrap(),
            Some(Coord::new(1, 1))
        );
    }

    #[test]
    fn deterministic_patterns_are_permutations() {
        let p = params8(FlowControl::Wormhole);
        let mut r = rng();
        for pattern in [
            TrafficPattern::Transpose,
            TrafficPattern::Tornado,
            TrafficPattern::Shuffle,
            TrafficPattern::Neighbor,
            TrafficPattern::BitComplement,
        ] {
            let mut seen = std::collections::HashSet::new();
            for y in 0..8 {
                for x in 0..8 {
                    let src = Coord::new(x, y);
                    // Count self-mapping sources as mapping to themselves so
                    // the full map stays a bijection.
                    let d = destination(pattern, src, &p, &mut r)
                        .unwrap()
                        .unwrap_or(src);
                    assert!(seen.insert(d), "{} duplicate {:?}", pattern.name(), d);
                }
            }
            assert_eq!(seen.len(), 64);
        }
    }

    #[test]
    fn self_destinations_are_dropped() {
        let p = params8(FlowControl::Wormhole);
        let mut r = rng();
        // Transpose diagonal maps to itself.
        assert_eq!(
            destination(TrafficPattern::Transpose, Coord::new(4, 4), &p, &mut r).unwrap(),
            None
        );
        // Shuffle fixes index 0 and 63.
        assert_eq!(
            destination(TrafficPattern::Shuffle, Coord::new(0, 0), &p, &mut r).unwrap(),
            None
        );
        // Uniform random never yields the source.
        for _ in 0..100 {
            let d = destination(TrafficPattern::UniformRandom, Coord::new(3, 3), &p, &mut r)
                .unwrap()
                .unwrap();
            assert_ne!(d, Coord::new(3, 3));
        }
    }

    #[test]
    fn pattern_mesh_compatibility_is_checked() {
        let p = NocParams::new(4, 6, FlowControl::Wormhole);
        let mut r = rng();
        assert!(destination(TrafficPattern::Transpose, Coord::new(0, 0), &p, &mut r).is_err());
        assert!(destination(TrafficPattern::Neighbor, Coord::new(0, 0), &p, &mut r).is_ok());
    }

    #[test]
    fn sweep_validates_rates() {
        let p = params8(FlowControl::Wormhole);
        let opts = SweepOptions {
            warmup_cycles: 10,
            measure_cycles: 50,
            ..Default::default()
        };
        assert!(sweep(TrafficPattern::Neighbor, &p, &[], &opts).is_err());
        assert!(sweep(TrafficPattern::Neighbor, &p, &[0.2, 0.1], &opts).is_err());
        assert!(sweep(TrafficPattern::Neighbor, &p, &[0.0, 0.1], &opts).is_err());
    }

    #[test]
    fn unsaturated_reception_tracks_injection() {
        let p = params8(FlowControl::Wormhole);
        let opts = SweepOptions {
            warmup_cycles: 2_000,
            measure_cycles: 10_000,
            packet_length: 5,
            seed: 11,
        };
        let curve = sweep(TrafficPattern::UniformRandom, &p, &[0.02], &opts).unwrap();
        let pt = curve.points[0];
        let rel = (pt.reception_rate - pt.injection_rate).abs() / pt.injection_rate;
        assert!(rel < 0.05, "reception {} vs injection {}", pt.reception_rate, pt.injection_rate);
    }

    #[test]
    fn latency_rises_with_injection_rate() {
        let p = params8(FlowControl::Wormhole);
        let opts = SweepOptions {
            warmup_cycles: 1_000,
            measure_cycles: 6_000,
            packet_length: 5,
            seed: 3,
        };
        let curve = sweep(
            TrafficPattern::UniformRandom,
            &p,
            &[0.01, 0.04, 0.30],
            &opts,
        )
        .unwrap();
        let l: Vec<f64> = curve.points.iter().map(|p| p.avg_latency).collect();
        assert!(l[0] <= l[1] * 1.05);
        assert!(l[1] < l[2]);
    }

    #[test]
    fn reception_curve_reports_plateau() {
        let curve = SweepCurve {
            pattern: "x".into(),
            flow: "wormhole".into(),
            points: vec![
                SweepPoint { injection_rate: 0.1, avg_latency: 10.0, reception_rate: 0.1 },
                SweepPoint { injection_rate: 0.3, avg_latency: 80.0, reception_rate: 0.22 },
                SweepPoint { injection_rate: 0.5, avg_latency: 300.0, reception_rate: 0.20 },
            ],
            saturation_rate: Some(0.25),
        };
        let (series, plateau) = reception_curve(&curve);
        assert_eq!(series.len(), 3);
        assert!((plateau - 0.22).abs() < 1e-12);
    }
}

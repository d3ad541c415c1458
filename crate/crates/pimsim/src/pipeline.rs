//! Per-layer schedules (intra-layer, inter-layer, batch) and the
//! cycle-accurate processing-side simulation.
//!
//! A layer occupies its tiles for `occupancy` consecutive logical cycles per
//! image. Start offsets chain through two constraints per edge: the
//! inter-layer prefix wait (cycles_wait scaled by the producer's
//! replication, plus one pooled row when the producer pools), and a
//! stall-free continuity bound that keeps a consumer from outrunning a
//! slower producer (its busy window may not end before the producer's last
//! value can reach it). OFM handoffs travel the live NoC as packets; layer
//! starts gate on their arrival, and the schedule is re-derived from
//! observed latencies until every packet lands on time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archconfig::{Scope, SimConfig};
use crate::error::{Result, SimError};
use crate::mapping::MappingPlan;
use crate::noc::{zero_load_latency, Coord, FlowControl, NocEngine, NocParams};
use crate::workload::{cycles_wait, values_wait, LayerKind, NetworkSpec};

/// The four pipelining scenarios: (1) neither, (2) batch only,
/// (3) replication only, (4) both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioId {
    pub replication: bool,
    pub batch: bool,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId { replication: false, batch: false },
        ScenarioId { replication: false, batch: true },
        ScenarioId { replication: true, batch: false },
        ScenarioId { replication: true, batch: true },
    ];

    pub fn index(&self) -> u8 {
        match (self.replication, self.batch) {
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
            (true, true) => 4,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::ALL[0]),
            2 => Ok(Self::ALL[1]),
            3 => Ok(Self::ALL[2]),
            4 => Ok(Self::ALL[3]),
            other => Err(SimError::Precondition(format!(
                "scenario index must be 1..=4, got {other}"
            ))),
        }
    }
}

/// Fixed intra-layer pipeline depth in cycles, by tile mapping and pooling.
pub fn intra_layer_latency(multi_tile: bool, pooling: bool) -> u64 {
    match (multi_tile, pooling) {
        (false, false) => 24,
        (false, true) => 29,
        (true, false) => 26,
        (true, true) => 31,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSchedule {
    /// First cycle the layer may begin, relative to image arrival.
    pub start_offset: u64,
    pub intra_latency: u64,
    /// Logical cycles the layer is busy per image.
    pub occupancy: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSchedule {
    pub layers: Vec<LayerSchedule>,
    pub image_latency: u64,
    pub issue_interval: u64,
}

fn ceil_div_u64(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Busy cycles per image: pixels over replication for convs; fc layers feed
/// their input vector in subarray-row groups through the input register.
fn occupancy(net: &NetworkSpec, plan: &MappingPlan, idx: usize, config: &SimConfig) -> u64 {
    let layer = &net.layers[idx];
    match layer.kind {
        LayerKind::Conv => ceil_div_u64(
            (layer.in_height * layer.in_width) as u64,
            plan.layers[idx].replication as u64,
        ),
        LayerKind::Fc => ceil_div_u64(
            plan.layers[idx].footprint.rows_needed as u64,
            config.arch.subarray_rows as u64,
        ),
    }
}

/// Producer-side output width used by the wait formulas (pooled if pooling).
fn effective_width(net: &NetworkSpec, idx: usize) -> usize {
    let (_, _, w) = net.layers[idx].output_dims();
    w
}

/// Prefix wait on edge i -> i+1: cycles_wait over the producer's pixel rate,
/// plus one extra pooled row when the producer pools.
fn prefix_wait(net: &NetworkSpec, plan: &MappingPlan, idx: usize) -> Result<u64> {
    let w = effective_width(net, idx);
    let l_next = net.layers[idx + 1].kernel_size;
    let wait = cycles_wait(w.max(l_next), l_next)?;
    let rep = plan.layers[idx].replication as u64;
    let pool_adj = if net.layers[idx].pooling_after {
        w as u64
    } else {
        0
    };
    Ok(ceil_div_u64(wait, rep) + pool_adj)
}

/// Build the static schedule given a per-edge NoC latency estimate.
pub fn build_schedule(
    net: &NetworkSpec,
    plan: &MappingPlan,
    scenario: ScenarioId,
    noc_latency_per_edge: &[u64],
    config: &SimConfig,
) -> Result<PipelineSchedule> {
    if plan.layers.len() != net.layers.len() {
        return Err(SimError::Precondition(
            "plan does not cover all layers".into(),
        ));
    }
    if noc_latency_per_edge.len() + 1 != net.layers.len() {
        return Err(SimError::Precondition(
            "need one NoC latency per adjacent layer pair".into(),
        ));
    }
    let n = net.layers.len();
    let mut layers = Vec::with_capacity(n);
    let mut start = 0u64;
    for i in 0..n {
        let occ = occupancy(net, plan, i, config);
        let intra = intra_layer_latency(plan.layers[i].tiles > 1, net.layers[i].pooling_after);
        layers.push(LayerSchedule {
            start_offset: start,
            intra_latency: intra,
            occupancy: occ,
        });
        if i + 1 < n {
            let next_occ = occupancy(net, plan, i + 1, config);
            let continuity = occ.saturating_sub(next_occ);
            let wait = prefix_wait(net, plan, i)?.max(continuity);
            start = start + intra + noc_latency_per_edge[i] + wait;
        }
    }
    let last = layers.last().expect("network has at least one layer");
    let image_latency = last.start_offset + last.occupancy + last.intra_latency;
    let issue_interval = if scenario.batch {
        layers.iter().map(|l| l.occupancy).max().unwrap()
    } else {
        image_latency
    };
    Ok(PipelineSchedule {
        layers,
        image_latency,
        issue_interval,
    })
}

/// Simulation knobs beyond the architecture config.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub flow: FlowControl,
    pub hpcmax: usize,
    pub buffer_depth: usize,
    pub router_delay: u64,
    pub link_delay: u64,
    /// OFM handoff packets carry the prefix the consumer waits on, capped to
    /// keep one handoff from monopolizing the mesh.
    pub ofm_packet_cap_flits: u32,
    /// Re-run the converged NoC pass once more with a per-cycle CSV trace.
    pub trace: Option<std::path::PathBuf>,
}

impl SimOptions {
    pub fn new(flow: FlowControl) -> Self {
        SimOptions {
            flow,
            hpcmax: 14,
            buffer_depth: 4,
            router_delay: 1,
            link_delay: 1,
            ofm_packet_cap_flits: 64,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimStats {
    pub network: String,
    pub noc: FlowControl,
    pub scenario_index: u8,
    pub cycles_total: u64,
    pub images_completed: u64,
    pub issue_interval: u64,
    pub image_latency: u64,
    /// Component name -> instance-cycles of activity.
    pub activity: BTreeMap<String, u64>,
    pub noc_packet_latencies: Vec<u64>,
    pub network_ops_per_image: u64,
    pub seconds_per_cycle: f64,
    pub fps: f64,
    pub tops: f64,
}

impl SimStats {
    pub fn throughput_per_cycle(&self) -> f64 {
        self.images_completed as f64 / self.cycles_total as f64
    }
}

const MAX_SCHEDULE_ITERATIONS: usize = 8;

struct Edge {
    src: Coord,
    dst: Coord,
    length: u32,
    local: bool,
}

/// Drive one full engine pass: inject the scheduled sends, step to
/// quiescence, return the engine and (packet id, edge, deadline) triples.
fn run_noc_pass(
    noc_params: &NocParams,
    edges: &[Edge],
    sends: &[(u64, usize, u64, u64)],
    horizon: u64,
    trace: Option<&std::path::Path>,
) -> Result<(NocEngine, Vec<(u64, usize, u64)>)> {
    let mut engine = NocEngine::new(noc_params.clone());
    if let Some(path) = trace {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "cycle,packet,seq,x,y,action")?;
        engine.set_trace(Box::new(move |cycle, packet, seq, at, action| {
            let _ = writeln!(file, "{cycle},{packet},{seq},{},{},{action}", at.x, at.y);
        }));
    }
    let mut ids: Vec<(u64, usize, u64)> = Vec::new();
    let mut next = 0usize;
    let budget = horizon + 1_000_000;
    while next < sends.len() || !engine.quiescent() {
        let now = engine.cycle();
        while next < sends.len() && sends[next].0 == now {
            let (_, i, _k, deadline) = sends[next];
            let id = engine
                .try_inject(edges[i].src, edges[i].dst, edges[i].length)?
                .expect("co-sim injection queue overflow");
            ids.push((id, i, deadline));
            next += 1;
        }
        engine.step()?;
        if engine.cycle() > budget {
            return Err(SimError::NoFixpoint(MAX_SCHEDULE_ITERATIONS));
        }
    }
    Ok((engine, ids))
}

/// Run the co-simulation: execute the schedule against the live NoC,
/// re-deriving start offsets from observed packet latencies until every
/// handoff arrives by its consumer's start. Deterministic.
pub fn simulate(
    net: &NetworkSpec,
    plan: &MappingPlan,
    scenario: ScenarioId,
    opts: &SimOptions,
    n_images: u64,
    config: &SimConfig,
) -> Result<SimStats> {
    if n_images < 1 {
        return Err(SimError::Precondition("n_images must be >= 1".into()));
    }
    if plan.replication_enabled != scenario.replication {
        return Err(SimError::Precondition(
            "plan replication does not match scenario".into(),
        ));
    }
    if plan.layers.iter().any(|m| m.tile_ids.is_empty()) {
        return Err(SimError::Precondition(
            "plan must be placed before simulation".into(),
        ));
    }
    let n_layers = net.layers.len();
    let n_edges = n_layers - 1;
    let noc_params = NocParams {
        rows: config.arch.mesh_rows,
        cols: config.arch.mesh_cols,
        flow: opts.flow,
        hpcmax: opts.hpcmax,
        buffer_depth: opts.buffer_depth,
        router_delay: opts.router_delay,
        link_delay: opts.link_delay,
        injection_queue_packets: 64,
        progress_window: 50_000,
        allow_loopback: false,
    };

    // One OFM handoff packet per edge per image, between the first tiles of
    // producer and consumer. Same-tile edges stay on the local bus.
    let mut edges = Vec::with_capacity(n_edges);
    for i in 0..n_edges {
        let (sx, sy) = plan.layers[i].tile_ids[0];
        let (dx, dy) = plan.layers[i + 1].tile_ids[0];
        let src = Coord::new(sx, sy);
        let dst = Coord::new(dx, dy);
        let w = effective_width(net, i);
        let l_next = net.layers[i + 1].kernel_size;
        let prefix_values = values_wait(w.max(l_next), l_next, net.layers[i].kernels)?;
        let bits = prefix_values * config.arch.input_bits as u64;
        let length = (ceil_div_u64(bits, config.arch.flit_bits as u64) as u32)
            .clamp(1, opts.ofm_packet_cap_flits);
        edges.push(Edge {
            src,
            dst,
            length,
            local: src == dst,
        });
    }

    let mut estimates: Vec<u64> = edges
        .iter()
        .map(|e| {
            if e.local {
                0
            } else {
                zero_load_latency(&noc_params, e.src, e.dst, e.length)
            }
        })
        .collect();

    let mut schedule = build_schedule(net, plan, scenario, &estimates, config)?;
    let mut packet_latencies: Vec<u64> = Vec::new();
    let mut flit_hops = 0u64;
    let mut converged = false;
    for _ in 0..MAX_SCHEDULE_ITERATIONS {
        // Hazard bound: one image per layer per cycle needs windows spaced
        // at least one occupancy apart.
        let max_occ = schedule.layers.iter().map(|l| l.occupancy).max().unwrap();
        assert!(
            schedule.issue_interval >= max_occ,
            "structural hazard: issue interval below peak occupancy"
        );

        // (inject cycle, edge, image, deadline) sorted by inject cycle.
        let mut sends: Vec<(u64, usize, u64, u64)> = Vec::new();
        for k in 0..n_images {
            let base = k * schedule.issue_interval;
            for (i, e) in edges.iter().enumerate() {
                if e.local {
                    continue;
                }
                let deadline = base + schedule.layers[i + 1].start_offset;
                let inject_at = deadline - estimates[i];
                sends.push((inject_at, i, k, deadline));
            }
        }
        sends.sort_unstable();
        let horizon = (n_images - 1) * schedule.issue_interval + schedule.image_latency;
        let (engine, ids) = run_noc_pass(&noc_params, &edges, &sends, horizon, None)?;
        let records = engine.records();
        let mut late = false;
        let mut new_estimates = estimates.clone();
        for &(id, i, deadline) in &ids {
            let rec = &records[id as usize];
            let arrival = rec.delivered_cycle.expect("packet not delivered");
            if arrival > deadline {
                late = true;
                let lateness = arrival - deadline;
                new_estimates[i] = new_estimates[i].max(estimates[i] + lateness);
            }
        }
        if !late {
            packet_latencies = records.iter().filter_map(|r| r.latency()).collect();
            flit_hops = engine.stats().flit_hops;
            if let Some(path) = &opts.trace {
                run_noc_pass(&noc_params, &edges, &sends, horizon, Some(path))?;
            }
            converged = true;
            break;
        }
        estimates = new_estimates;
        schedule = build_schedule(net, plan, scenario, &estimates, config)?;
    }
    if !converged {
        return Err(SimError::NoFixpoint(MAX_SCHEDULE_ITERATIONS));
    }

    // Dependency uniformity holds by construction: start(j,k) - start(j-1,k)
    // is the same offset difference for every image k.
    let cycles_total = (n_images - 1) * schedule.issue_interval + schedule.image_latency;

    let activity = accumulate_activity(net, plan, &schedule, n_images, flit_hops, config);
    let s = config.timing.seconds_per_logical_cycle;
    let fps = n_images as f64 / (cycles_total as f64 * s);
    let ops = net.network_ops();
    let tops = fps * ops as f64 / 1e12;
    Ok(SimStats {
        network: net.name.clone(),
        noc: opts.flow,
        scenario_index: scenario.index(),
        cycles_total,
        images_completed: n_images,
        issue_interval: schedule.issue_interval,
        image_latency: schedule.image_latency,
        activity,
        noc_packet_latencies: packet_latencies,
        network_ops_per_image: ops,
        seconds_per_cycle: s,
        fps,
        tops,
    })
}

/// Component-cycles per run. Engaged counts cap at what physically exists
/// so oversubscribed (warned) plans cannot exceed peak power.
fn accumulate_activity(
    net: &NetworkSpec,
    plan: &MappingPlan,
    schedule: &PipelineSchedule,
    n_images: u64,
    flit_hops: u64,
    config: &SimConfig,
) -> BTreeMap<String, u64> {
    let mut activity: BTreeMap<String, u64> = config
        .components
        .iter()
        .map(|c| (c.name.clone(), 0u64))
        .collect();
    let node_cores = config.arch.node_cores() as u64;
    let node_tiles = config.arch.mesh_tiles() as u64;
    for (i, layer) in net.layers.iter().enumerate() {
        let occ = schedule.layers[i].occupancy * n_images;
        let cores = (plan.layers[i].cores_total as u64).min(node_cores);
        let tiles = (plan.layers[i].tiles as u64).min(node_tiles);
        for c in &config.components {
            let engaged = match c.scope {
                Scope::Core => c.count_per_scope as u64 * cores,
                Scope::Tile => {
                    if c.name == "max_pool" && !layer.pooling_after {
                        0
                    } else if c.name == "router" {
                        0 // charged from NoC flit-hops below
                    } else {
                        c.count_per_scope as u64 * tiles
                    }
                }
                Scope::Node => 0,
            };
            *activity.get_mut(&c.name).unwrap() += engaged * occ;
        }
    }
    if let Some(router) = activity.get_mut("router") {
        *router += flit_hops;
    }
    activity
}

/// Normalized per-cell speedups against a baseline key, as throughput
/// ratios.
pub fn speedup_table<K: Ord + Clone + std::fmt::Debug>(
    results: &BTreeMap<K, SimStats>,
    baseline: &K,
) -> Result<BTreeMap<K, f64>> {
    let base = results
        .get(baseline)
        .ok_or_else(|| SimError::MissingBaseline(format!("{baseline:?}")))?;
    let base_tp = base.throughput_per_cycle();
    Ok(results
        .iter()
        .map(|(k, v)| (k.clone(), v.throughput_per_cycle() / base_tp))
        .collect())
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{place, plan};
    use crate::workload::{build_vgg, LayerSpec, VggVariant};

    fn cfg() -> SimConfig {
        SimConfig::default_config()
    }

    fn placed_plan(
        net: &NetworkSpec,
        config: &SimConfig,
        replication: bool,
    ) -> crate::mapping::MappingPlan {
        let mut p = plan(net, config, replication, false).unwrap();
        place(&mut p, config).unwrap();
        p
    }

    #[test]
    fn intra_layer_latency_table() {
        assert_eq!(intra_layer_latency(false, false), 24);
        assert_eq!(intra_layer_latency(false, true), 29);
        assert_eq!(intra_layer_latency(true, false), 26);
        assert_eq!(intra_layer_latency(true, true), 31);
    }

    #[test]
    fn scenario_indices_enumerate_the_four_cases() {
        for (i, s) in ScenarioId::ALL.iter().enumerate() {
            assert_eq!(s.index() as usize, i + 1);
            assert_eq!(ScenarioId::from_index(s.index()).unwrap(), *s);
        }
        assert!(ScenarioId::from_index(5).is_err());
    }

    #[test]
    fn two_conv_layer_start_offset_example() {
        let config = cfg();
        let net = NetworkSpec {
            name: "pair".into(),
            layers: vec![
                LayerSpec::conv(3, 224, 64, 3, false),
                LayerSpec::conv(64, 224, 64, 3, false),
            ],
        };
        let p = placed_plan(&net, &config, false);
        let s = build_schedule(&net, &p, ScenarioId::from_index(1).unwrap(), &[0], &config)
            .unwrap();
        // cycles_wait(224,3) = 451 plus the producer's 24-cycle pipeline.
        assert_eq!(s.layers[1].start_offset, 451 + 24);
    }

    #[test]
    fn vgg_e_scenario4_issue_interval() {
        let config = cfg();
        let net = build_vgg(VggVariant::E);
        let p = placed_plan(&net, &config, true);
        let zeros = vec![0u64; net.layers.len() - 1];
        let s = build_schedule(&net, &p, ScenarioId::from_index(4).unwrap(), &zeros, &config)
            .unwrap();
        assert_eq!(s.issue_interval, 3136);
        assert_eq!(s.layers[0].occupancy, 3136);
        // fc occupancies: 25088/128, 4096/128, 4096/128.
        let occ: Vec<u64> = s.layers[16..].iter().map(|l| l.occupancy).collect();
        assert_eq!(occ, vec![196, 32, 32]);
    }

    #[test]
    fn single_layer_latency_is_occupancy_plus_intra() {
        let config = cfg();
        let net = NetworkSpec {
            name: "one".into(),
            layers: vec![LayerSpec::conv(3, 28, 8, 3, false)],
        };
        let p = placed_plan(&net, &config, false);
        let s = build_schedule(&net, &p, ScenarioId::from_index(1).unwrap(), &[], &config)
            .unwrap();
        assert_eq!(s.image_latency, 28 * 28 + 24);
        assert_eq!(s.issue_interval, s.image_latency);
    }

    fn tiny_net() -> NetworkSpec {
        NetworkSpec {
            name: "tiny".into(),
            layers: vec![
                LayerSpec::conv(3, 28, 8, 3, true),
                LayerSpec::conv(8, 14, 8, 3, false),
                LayerSpec::fc(8 * 14 * 14, 10),
            ],
        }
    }

    #[test]
    fn ideal_single_image_reproduces_schedule_latency() {
        let config = cfg();
        for net in [tiny_net(), build_vgg(VggVariant::A), build_vgg(VggVariant::E)] {
            for scenario in ScenarioId::ALL {
                let p = placed_plan(&net, &config, scenario.replication);
                let opts = SimOptions::new(FlowControl::Ideal);
                let stats = simulate(&net, &p, scenario, &opts, 1, &config).unwrap();
                let edges: Vec<u64> = (0..net.layers.len() - 1)
                    .map(|i| {
                        let (sx, sy) = p.layers[i].tile_ids[0];
                        let (dx, dy) = p.layers[i + 1].tile_ids[0];
                        if (sx, sy) == (dx, dy) {
                            return 0;
                        }
                        // Ideal latency equals packet length.
                        let w = effective_width(&net, i);
                        let l_next = net.layers[i + 1].kernel_size;
                        let values =
                            values_wait(w.max(l_next), l_next, net.layers[i].kernels)
                                .unwrap();
                        ((values * 16).div_ceil(128) as u32).clamp(1, 64) as u64
                    })
                    .collect();
                let sched = build_schedule(&net, &p, scenario, &edges, &config).unwrap();
                assert_eq!(
                    stats.cycles_total, sched.image_latency,
                    "net={} scenario={}",
                    net.name,
                    scenario.index()
                );
            }
        }
    }

    #[test]
    fn batch_throughput_dominates_sequential() {
        let config = cfg();
        let net = tiny_net();
        for flow in [FlowControl::Ideal, FlowControl::Wormhole, FlowControl::Smart] {
            for replication in [false, true] {
                let p = placed_plan(&net, &config, replication);
                let opts = SimOptions::new(flow);
                let seq = simulate(
                    &net,
                    &p,
                    ScenarioId { replication, batch: false },
                    &opts,
                    4,
                    &config,
                )
                .unwrap();
                let batch = simulate(
                    &net,
                    &p,
                    ScenarioId { replication, batch: true },
                    &opts,
                    4,
                    &config,
                )
                .unwrap();
                assert!(
                    batch.throughput_per_cycle() >= seq.throughput_per_cycle(),
                    "flow {flow:?} replication {replication}"
                );
            }
        }
    }

    #[test]
    fn replication_never_increases_issue_interval() {
        let config = cfg();
        let net = build_vgg(VggVariant::A);
        let base = placed_plan(&net, &config, true);
        let zeros = vec![0u64; net.layers.len() - 1];
        let s4 = ScenarioId::from_index(4).unwrap();
        let base_sched = build_schedule(&net, &base, s4, &zeros, &config).unwrap();
        for i in 0..net.layers.len() {
            let mut bumped = base.clone();
            bumped.layers[i].replication *= 2;
            bumped.layers[i].cores_total =
                bumped.layers[i].footprint.cores * bumped.layers[i].replication;
            let sched = build_schedule(&net, &bumped, s4, &zeros, &config).unwrap();
            assert!(sched.issue_interval <= base_sched.issue_interval);
        }
    }

    #[test]
    fn dependency_offsets_are_uniform_across_images() {
        // Starts are offset + k * issue_interval, so the gap between
        // adjacent layers is the same for every image by construction;
        // verify the run lands exactly on that arithmetic.
        let config = cfg();
        let net = tiny_net();
        let p = placed_plan(&net, &config, true);
        let opts = SimOptions::new(FlowControl::Wormhole);
        let s4 = ScenarioId::from_index(4).unwrap();
        let stats = simulate(&net, &p, s4, &opts, 3, &config).unwrap();
        assert_eq!(stats.images_completed, 3);
        assert_eq!(
            stats.cycles_total,
            2 * stats.issue_interval + stats.image_latency
        );
    }

    #[test]
    fn simulate_rejects_mismatched_plan() {
        let config = cfg();
        let net = tiny_net();
        let p = placed_plan(&net, &config, false);
        let opts = SimOptions::new(FlowControl::Ideal);
        let s3 = ScenarioId::from_index(3).unwrap();
        assert!(simulate(&net, &p, s3, &opts, 1, &config).is_err());
    }

    #[test]
    fn speedup_table_normalizes_to_baseline() {
        let config = cfg();
        let net = tiny_net();
        let p = placed_plan(&net, &config, false);
        let opts = SimOptions::new(FlowControl::Ideal);
        let s1 = ScenarioId::from_index(1).unwrap();
        let stats = simulate(&net, &p, s1, &opts, 2, &config).unwrap();
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), stats.clone());
        map.insert("b".to_string(), stats);
        let table = speedup_table(&map, &"a".to_string()).unwrap();
        assert!((table["a"] - 1.0).abs() < 1e-12);
        assert!((table["b"] - 1.0).abs() < 1e-12);
        assert!(speedup_table(&map, &"missing".to_string()).is_err());
    }

    #[test]
    fn geometric_mean_of_equal_values() {
        assert!((geometric_mean(&[2.0, 2.0, 2.0]) - 2.0).abs() < 1e-12);
        let g = geometric_mean(&[1.0, 4.0]);
        assert!((g - 2.0).abs() < 1e-12);
    }
}

//! The benchmark campaign: networks x flow controls x pipelining scenarios,
//! plus speedup/energy report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::archconfig::SimConfig;
use crate::energy::run_energy;
use crate::error::{Result, SimError};
use crate::mapping::{place, plan};
use crate::noc::FlowControl;
use crate::pipeline::{geometric_mean, simulate, ScenarioId, SimOptions, SimStats};
use crate::workload::{build_vgg, VggVariant};

/// One cell key: (network name, flow control, scenario index).
pub type CellKey = (String, String, u8);

#[derive(Debug, Clone)]
pub struct MatrixSelection {
    pub nets: Vec<VggVariant>,
    pub nocs: Vec<FlowControl>,
    pub scenarios: Vec<ScenarioId>,
}

impl Default for MatrixSelection {
    fn default() -> Self {
        MatrixSelection {
            nets: VggVariant::ALL.to_vec(),
            nocs: vec![
                FlowControl::Ideal,
                FlowControl::Smart,
                FlowControl::Wormhole,
            ],
            scenarios: ScenarioId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkMatrix {
    pub cells: BTreeMap<CellKey, SimStats>,
}

impl BenchmarkMatrix {
    pub fn get(&self, net: &str, noc: &str, scenario: u8) -> Option<&SimStats> {
        self.cells
            .get(&(net.to_string(), noc.to_string(), scenario))
    }
}

/// Simulate one cell of the matrix.
pub fn run_cell(
    config: &SimConfig,
    variant: VggVariant,
    flow: FlowControl,
    scenario: ScenarioId,
    images: u64,
) -> Result<SimStats> {
    let net = build_vgg(variant);
    let mut p = plan(&net, config, scenario.replication, false)?;
    place(&mut p, config)?;
    let opts = SimOptions::new(flow);
    simulate(&net, &p, scenario, &opts, images, config)
}

/// Run every selected cell. Cells are independent simulations; results merge
/// by key, so the outcome is identical for any worker count.
pub fn run_matrix(
    config: &SimConfig,
    selection: &MatrixSelection,
    images: u64,
    jobs: usize,
) -> Result<BenchmarkMatrix> {
    let mut work: Vec<(VggVariant, FlowControl, ScenarioId)> = Vec::new();
    for &net in &selection.nets {
        for &noc in &selection.nocs {
            for &sc in &selection.scenarios {
                work.push((net, noc, sc));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Precondition(format!("thread pool: {e}")))?;
    let results: Vec<(CellKey, Result<SimStats>)> = pool.install(|| {
        work.par_iter()
            .map(|&(net, noc, sc)| {
                let key = (
                    net.name().to_string(),
                    noc.name().to_string(),
                    sc.index(),
                );
                (key, run_cell(config, net, noc, sc, images))
            })
            .collect()
    });
    let mut cells = BTreeMap::new();
    for (key, res) in results {
        match res {
            Ok(stats) => {
                cells.insert(key, stats);
            }
            Err(e) => {
                return Err(SimError::Precondition(format!(
                    "cell {key:?} failed: {e}"
                )));
            }
        }
    }
    Ok(BenchmarkMatrix { cells })
}

/// Speedup of each scenario against scenario 1, per (net, noc).
pub fn scenario_speedups(matrix: &BenchmarkMatrix) -> Result<BTreeMap<CellKey, f64>> {
    let mut out = BTreeMap::new();
    for ((net, noc, sc), stats) in &matrix.cells {
        let base = matrix
            .cells
            .get(&(net.clone(), noc.clone(), 1))
            .ok_or_else(|| SimError::MissingBaseline(format!("{net}/{noc}/scenario 1")))?;
        out.insert(
            (net.clone(), noc.clone(), *sc),
            stats.throughput_per_cycle() / base.throughput_per_cycle(),
        );
    }
    Ok(out)
}

/// Geometric-mean scenario speedups across networks for one flow control.
pub fn scenario_speedup_geomeans(
    matrix: &BenchmarkMatrix,
    noc: FlowControl,
) -> Result<BTreeMap<u8, f64>> {
    let speedups = scenario_speedups(matrix)?;
    let mut by_scenario: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for ((_, n, sc), v) in &speedups {
        if n == noc.name() {
            by_scenario.entry(*sc).or_default().push(*v);
        }
    }
    Ok(by_scenario
        .into_iter()
        .map(|(sc, vs)| (sc, geometric_mean(&vs)))
        .collect())
}

/// Speedup of each flow control against wormhole, per (net, scenario).
pub fn noc_speedups(matrix: &BenchmarkMatrix) -> Result<BTreeMap<CellKey, f64>> {
    let mut out = BTreeMap::new();
    for ((net, noc, sc), stats) in &matrix.cells {
        let base = matrix
            .cells
            .get(&(net.clone(), FlowControl::Wormhole.name().to_string(), *sc))
            .ok_or_else(|| SimError::MissingBaseline(format!("{net}/wormhole/scenario {sc}")))?;
        out.insert(
            (net.clone(), noc.clone(), *sc),
            stats.throughput_per_cycle() / base.throughput_per_cycle(),
        );
    }
    Ok(out)
}

/// Geometric-mean speedup vs wormhole per flow control, across every
/// (net, scenario) cell.
pub fn noc_speedup_geomeans(matrix: &BenchmarkMatrix) -> Result<BTreeMap<String, f64>> {
    let speedups = noc_speedups(matrix)?;
    let mut by_noc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((_, noc, _), v) in &speedups {
        by_noc.entry(noc.clone()).or_default().push(*v);
    }
    Ok(by_noc
        .into_iter()
        .map(|(noc, vs)| (noc, geometric_mean(&vs)))
        .collect())
}

/// Geometric-mean SMART-vs-wormhole speedup for one scenario across nets.
pub fn smart_speedup_for_scenario(matrix: &BenchmarkMatrix, scenario: u8) -> Result<f64> {
    let speedups = noc_speedups(matrix)?;
    let vals: Vec<f64> = speedups
        .iter()
        .filter(|((_, noc, sc), _)| noc == "smart" && *sc == scenario)
        .map(|(_, v)| *v)
        .collect();
    if vals.is_empty() {
        return Err(SimError::MissingBaseline(format!(
            "no smart cells for scenario {scenario}"
        )));
    }
    Ok(geometric_mean(&vals))
}

fn write_if_changed(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Emit the campaign artifacts into `out_dir`. Deterministic content for a
/// given matrix: re-running produces identical bytes.
pub fn emit_reports(
    matrix: &BenchmarkMatrix,
    config: &SimConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if matrix.cells.is_empty() {
        return Err(SimError::EmptyMatrix);
    }
    let mut written = Vec::new();

    let mut csv = String::from("net,noc,scenario,cycles,images,fps,tops\n");
    for ((net, noc, sc), s) in &matrix.cells {
        writeln!(
            csv,
            "{net},{noc},{sc},{},{},{:.4},{:.6}",
            s.cycles_total, s.images_completed, s.fps, s.tops
        )
        .unwrap();
    }
    let path = out_dir.join("matrix.csv");
    write_if_changed(&path, &csv)?;
    written.push(path);

    let speedups = scenario_speedups(matrix)?;
    let mut csv = String::from("net,noc,scenario,speedup_vs_scenario1\n");
    for ((net, noc, sc), v) in &speedups {
        writeln!(csv, "{net},{noc},{sc},{v:.6}").unwrap();
    }
    let nocs: Vec<String> = matrix
        .cells
        .keys()
        .map(|(_, noc, _)| noc.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for noc in &nocs {
        if let Ok(flow) = FlowControl::parse(noc) {
            for (sc, g) in scenario_speedup_geomeans(matrix, flow)? {
                writeln!(csv, "geomean,{noc},{sc},{g:.6}").unwrap();
            }
        }
    }
    let path = out_dir.join("speedups.csv");
    write_if_changed(&path, &csv)?;
    written.push(path);

    let noc_sp = noc_speedups(matrix)?;
    let mut csv = String::from("net,noc,scenario,speedup_vs_wormhole\n");
    for ((net, noc, sc), v) in &noc_sp {
        writeln!(csv, "{net},{noc},{sc},{v:.6}").unwrap();
    }
    for (noc, g) in noc_speedup_geomeans(matrix)? {
        writeln!(csv, "geomean,{noc},all,{g:.6}").unwrap();
    }
    let path = out_dir.join("noc_speedups.csv");
    write_if_changed(&path, &csv)?;
    written.push(path);

    let mut csv =
        String::from("net,noc,scenario,energy_per_image_j,avg_power_w,tops_per_watt\n");
    for ((net, noc, sc), s) in &matrix.cells {
        let report = run_energy(s, config)?;
        writeln!(
            csv,
            "{net},{noc},{sc},{:.6},{:.4},{:.4}",
            report.energy_per_image_j, report.avg_power_w, report.tops_per_watt
        )
        .unwrap();
    }
    let path = out_dir.join("energy.csv");
    write_if_changed(&path, &csv)?;
    written.push(path);

    // Best-throughput table for the deepest network, all cells present.
    let mut csv = String::from("noc,scenario,fps,tops\n");
    for ((net, noc, sc), s) in &matrix.cells {
        if net == "vgg-e" {
            writeln!(csv, "{noc},{sc},{:.4},{:.6}", s.fps, s.tops).unwrap();
        }
    }
    let path = out_dir.join("vgge_throughput.csv");
    write_if_changed(&path, &csv)?;
    written.push(path);

    for ((net, noc, sc), s) in &matrix.cells {
        let path = out_dir.join(format!("run_{net}_{noc}_s{sc}.json"));
        write_if_changed(&path, &serde_json::to_string_pretty(s)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig::default_config()
    }

    fn small_selection() -> MatrixSelection {
        MatrixSelection {
            nets: vec![VggVariant::A],
            nocs: vec![FlowControl::Ideal, FlowControl::Wormhole],
            scenarios: vec![
                ScenarioId::from_index(1).unwrap(),
                ScenarioId::from_index(4).unwrap(),
            ],
        }
    }

    #[test]
    fn singleton_selection_yields_one_row() {
        let config = cfg();
        let sel = MatrixSelection {
            nets: vec![VggVariant::A],
            nocs: vec![FlowControl::Ideal],
            scenarios: vec![ScenarioId::from_index(1).unwrap()],
        };
        let m = run_matrix(&config, &sel, 1, 1).unwrap();
        assert_eq!(m.cells.len(), 1);
    }

    #[test]
    fn matrix_is_deterministic_across_parallelism() {
        let config = cfg();
        let sel = small_selection();
        let m1 = run_matrix(&config, &sel, 2, 1).unwrap();
        let m8 = run_matrix(&config, &sel, 2, 8).unwrap();
        let dir1 = std::env::temp_dir().join("pimsim_matrix_j1");
        let dir8 = std::env::temp_dir().join("pimsim_matrix_j8");
        emit_reports(&m1, &config, &dir1).unwrap();
        emit_reports(&m8, &config, &dir8).unwrap();
        for f in ["matrix.csv", "speedups.csv", "noc_speedups.csv", "energy.csv"] {
            let a = std::fs::read(dir1.join(f)).unwrap();
            let b = std::fs::read(dir8.join(f)).unwrap();
            assert_eq!(a, b, "{f} differs across parallelism");
        }
    }

    #[test]
    fn emit_is_idempotent() {
        let config = cfg();
        let sel = small_selection();
        let m = run_matrix(&config, &sel, 2, 2).unwrap();
        let dir = std::env::temp_dir().join("pimsim_matrix_idem");
        emit_reports(&m, &config, &dir).unwrap();
        let first = std::fs::read(dir.join("speedups.csv")).unwrap();
        emit_reports(&m, &config, &dir).unwrap();
        let second = std::fs::read(dir.join("speedups.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let config = cfg();
        let m = BenchmarkMatrix::default();
        let dir = std::env::temp_dir().join("pimsim_matrix_empty");
        assert!(matches!(
            emit_reports(&m, &config, &dir),
            Err(SimError::EmptyMatrix)
        ));
        assert!(!dir.join("matrix.csv").exists());
    }

    #[test]
    fn missing_baseline_is_reported() {
        let config = cfg();
        let sel = MatrixSelection {
            nets: vec![VggVariant::A],
            nocs: vec![FlowControl::Ideal],
            scenarios: vec![ScenarioId::from_index(4).unwrap()],
        };
        let m = run_matrix(&config, &sel, 1, 1).unwrap();
        assert!(matches!(
            scenario_speedups(&m),
            Err(SimError::MissingBaseline(_))
        ));
    }
}

//! Converts per-component activity counters into energy, average power, and
//! TOPS/W. Idle components draw nothing: the model is activity-gated with no
//! static leakage term.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archconfig::SimConfig;
use crate::error::{Result, SimError};
use crate::pipeline::SimStats;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub network: String,
    pub noc: String,
    pub scenario_index: u8,
    /// Joules per component over the whole run.
    pub per_component_j: BTreeMap<String, f64>,
    pub total_energy_j: f64,
    pub energy_per_image_j: f64,
    pub run_time_s: f64,
    pub avg_power_w: f64,
    pub peak_power_w: f64,
    pub tops_per_watt: f64,
}

/// energy(component) = power_active * active instance-cycles * seconds per
/// cycle; average power never exceeds the peak because activity counters are
/// capped at physical instance counts.
pub fn run_energy(stats: &SimStats, config: &SimConfig) -> Result<EnergyReport> {
    let power = config.power_table();
    let mut per_component = BTreeMap::new();
    let s = stats.seconds_per_cycle;
    let mut total = 0.0;
    for (name, active_cycles) in &stats.activity {
        let Some(p) = power.get(name) else {
            return Err(SimError::UnknownComponent(name.clone()));
        };
        let e = p * *active_cycles as f64 * s;
        total += e;
        per_component.insert(name.clone(), e);
    }
    let run_time = stats.cycles_total as f64 * s;
    let avg_power = total / run_time;
    let peak = config.node_totals()?.peak_power_w;
    Ok(EnergyReport {
        network: stats.network.clone(),
        noc: stats.noc.name().to_string(),
        scenario_index: stats.scenario_index,
        per_component_j: per_component,
        total_energy_j: total,
        energy_per_image_j: total / stats.images_completed as f64,
        run_time_s: run_time,
        avg_power_w: avg_power,
        peak_power_w: peak,
        tops_per_watt: stats.tops / avg_power,
    })
}

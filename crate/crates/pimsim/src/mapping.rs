//! Crossbar/core/tile requirements per layer, replication planning under the
//! tile budget, and row-major tile placement on the mesh.

use serde::{Deserialize, Serialize};

use crate::archconfig::SimConfig;
use crate::error::{Result, SimError};
use crate::workload::{LayerKind, LayerSpec, NetworkSpec};

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Subarray/core demand of one layer before replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerFootprint {
    /// Crossbar rows needed: c * l * l.
    pub rows_needed: usize,
    /// Crossbar columns in cells: n * cells_per_weight.
    pub col_cells_needed: usize,
    pub subarrays: usize,
    pub cores: usize,
}

/// Weight matrix folding: row groups of subarray_rows, column groups of
/// subarray_cols cells. Partial-sum merging lives in the core's shift&add
/// path and costs nothing extra here.
pub fn footprint(layer: &LayerSpec, config: &SimConfig) -> LayerFootprint {
    let arch = &config.arch;
    let rows_needed = layer.in_channels * layer.kernel_size * layer.kernel_size;
    let col_cells_needed = layer.kernels * arch.cells_per_weight();
    let subarrays =
        ceil_div(rows_needed, arch.subarray_rows) * ceil_div(col_cells_needed, arch.subarray_cols);
    let cores = ceil_div(subarrays, arch.subarrays_per_core);
    LayerFootprint {
        rows_needed,
        col_cells_needed,
        subarrays,
        cores,
    }
}

pub type TileCoord = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMapping {
    pub footprint: LayerFootprint,
    pub replication: usize,
    /// cores * replication.
    pub cores_total: usize,
    pub tiles: usize,
    /// Mesh coordinates, filled in by `place`.
    pub tile_ids: Vec<TileCoord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPlan {
    pub network: String,
    pub replication_enabled: bool,
    pub strict: bool,
    pub layers: Vec<LayerMapping>,
    pub total_tiles: usize,
    pub budget_ok: bool,
    pub warnings: Vec<String>,
}

impl MappingPlan {
    pub fn conv_tiles(&self, net: &NetworkSpec) -> usize {
        self.layers
            .iter()
            .zip(&net.layers)
            .filter(|(_, l)| l.kind == LayerKind::Conv)
            .map(|(m, _)| m.tiles)
            .sum()
    }
}

/// Replication factor by input spatial stage: 224->16, 112->8, 56->4, 28->2,
/// 14 and below ->1; fc layers are never replicated.
fn ladder_replication(layer: &LayerSpec) -> usize {
    if layer.kind == LayerKind::Fc {
        return 1;
    }
    match layer.in_height {
        s if s >= 224 => 16,
        s if s >= 112 => 8,
        s if s >= 56 => 4,
        s if s >= 28 => 2,
        _ => 1,
    }
}

fn tiles_for(cores_total: usize, config: &SimConfig) -> usize {
    ceil_div(cores_total, config.arch.cores_per_tile)
}

/// Build a replication plan for the network.
///
/// With replication disabled every factor is 1. With it enabled, factors
/// follow the spatial-stage ladder; if the replicable (conv) tile subtotal
/// exceeds the budget, the plan greedily halves the replication of the layer
/// with the largest tile count (ties: earliest layer) until it fits.
///
/// Budget accounting covers conv and fc tiles together: `budget_ok` reflects
/// the full total. Layers that cannot shrink (replication 1) can push the
/// total over budget; in strict mode that is an error, otherwise a warning.
pub fn plan(
    net: &NetworkSpec,
    config: &SimConfig,
    replication_enabled: bool,
    strict: bool,
) -> Result<MappingPlan> {
    let mut layers: Vec<LayerMapping> = net
        .layers
        .iter()
        .map(|l| {
            let fp = footprint(l, config);
            let replication = if replication_enabled {
                ladder_replication(l)
            } else {
                1
            };
            let cores_total = fp.cores * replication;
            LayerMapping {
                footprint: fp,
                replication,
                cores_total,
                tiles: tiles_for(cores_total, config),
                tile_ids: Vec::new(),
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let budget = config.arch.tile_budget;

    // Greedy reduction over replicable layers only; fc demand is fixed.
    let reducible_total = |layers: &[LayerMapping]| -> usize {
        layers
            .iter()
            .zip(&net.layers)
            .filter(|(_, l)| l.kind == LayerKind::Conv)
            .map(|(m, _)| m.tiles)
            .sum()
    };
    loop {
        if reducible_total(&layers) <= budget {
            break;
        }
        let candidate = layers
            .iter()
            .enumerate()
            .zip(&net.layers)
            .filter(|((_, m), l)| l.kind == LayerKind::Conv && m.replication > 1)
            .max_by(|((ia, a), _), ((ib, b), _)| {
                // Largest tile count wins; earliest layer on ties.
                a.tiles.cmp(&b.tiles).then(ib.cmp(ia))
            })
            .map(|((i, _), _)| i);
        match candidate {
            Some(i) => {
                let m = &mut layers[i];
                m.replication /= 2;
                m.cores_total = m.footprint.cores * m.replication;
                m.tiles = tiles_for(m.cores_total, config);
            }
            None => {
                let needed = reducible_total(&layers);
                if strict {
                    return Err(SimError::BudgetExceeded { needed, budget });
                }
                warnings.push(format!(
                    "conv layers need {needed} tiles at replication 1, budget is {budget}"
                ));
                break;
            }
        }
    }

    let total_tiles: usize = layers.iter().map(|m| m.tiles).sum();
    let budget_ok = total_tiles <= budget;
    if !budget_ok {
        let fc_subarrays: usize = layers
            .iter()
            .zip(&net.layers)
            .filter(|(_, l)| l.kind == LayerKind::Fc)
            .map(|(m, _)| m.subarray_demand())
            .sum();
        let msg = format!(
            "plan needs {total_tiles} tiles (budget {budget}); fc layers alone demand {fc_subarrays} subarrays against node capacity {}",
            config.arch.node_subarrays()
        );
        if strict {
            return Err(SimError::BudgetExceeded {
                needed: total_tiles,
                budget,
            });
        }
        warnings.push(msg);
    }

    Ok(MappingPlan {
        network: net.name.clone(),
        replication_enabled,
        strict,
        layers,
        total_tiles,
        budget_ok,
        warnings,
    })
}

impl LayerMapping {
    fn subarray_demand(&self) -> usize {
        self.footprint.subarrays * self.replication
    }
}

/// Assign tiles in row-major mesh order; consecutive layers occupy
/// consecutive ranges. Plans that fit the mesh get an injective assignment.
/// Oversubscribed plans in non-strict mode wrap around the mesh (physical
/// tiles shared between layers, already flagged by `budget_ok = false`);
/// in strict mode overflow is an error.
pub fn place(plan: &mut MappingPlan, config: &SimConfig) -> Result<()> {
    let cols = config.arch.mesh_cols;
    let capacity = config.arch.mesh_tiles();
    let requested: usize = plan.layers.iter().map(|m| m.tiles).sum();
    if requested > capacity && plan.strict {
        return Err(SimError::PlacementOverflow {
            requested,
            capacity,
        });
    }
    let mut next = 0usize;
    for m in &mut plan.layers {
        m.tile_ids = (0..m.tiles)
            .map(|k| {
                let idx = (next + k) % capacity;
                (idx % cols, idx / cols)
            })
            .collect();
        next += m.tiles;
    }
    if requested > capacity {
        plan.warnings.push(format!(
            "placement wrapped: {requested} tiles folded onto {capacity} mesh positions"
        ));
    }
    Ok(())
}

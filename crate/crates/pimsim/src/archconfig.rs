//! Architecture parameters and the per-component power/area table.
//!
//! A single `SimConfig` is loaded once (from JSON or the embedded default)
//! and shared read-only by every other module.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Embedded default configuration. Component entries carry a provenance note:
/// "published" values trace to the 32 nm component tables of prior PIM work,
/// "calibrated" values are back-filled so the node totals come out exactly.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_config.json");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchConfig {
    pub mesh_rows: usize,
    pub mesh_cols: usize,
    pub cores_per_tile: usize,
    pub subarrays_per_core: usize,
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub cell_bits: usize,
    pub weight_bits: usize,
    pub input_bits: usize,
    pub dac_bits: usize,
    pub adc_bits: usize,
    pub flit_bits: usize,
    pub tile_budget: usize,
}

impl ArchConfig {
    /// Cells needed to encode one weight (weight_bits / cell_bits).
    pub fn cells_per_weight(&self) -> usize {
        self.weight_bits / self.cell_bits
    }

    /// Tiles physically present on the mesh.
    pub fn mesh_tiles(&self) -> usize {
        self.mesh_rows * self.mesh_cols
    }

    /// Cores physically present on the node.
    pub fn node_cores(&self) -> usize {
        self.mesh_tiles() * self.cores_per_tile
    }

    /// Subarray capacity of the whole node.
    pub fn node_subarrays(&self) -> usize {
        self.node_cores() * self.subarrays_per_core
    }

    fn validate(&self) -> Result<()> {
        let positive: [(&str, usize); 13] = [
            ("mesh_rows", self.mesh_rows),
            ("mesh_cols", self.mesh_cols),
            ("cores_per_tile", self.cores_per_tile),
            ("subarrays_per_core", self.subarrays_per_core),
            ("subarray_rows", self.subarray_rows),
            ("subarray_cols", self.subarray_cols),
            ("cell_bits", self.cell_bits),
            ("weight_bits", self.weight_bits),
            ("input_bits", self.input_bits),
            ("dac_bits", self.dac_bits),
            ("adc_bits", self.adc_bits),
            ("flit_bits", self.flit_bits),
            ("tile_budget", self.tile_budget),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(SimError::ConfigInvalid {
                    field: field.to_string(),
                    constraint: "must be strictly positive".to_string(),
                });
            }
        }
        if self.weight_bits % self.cell_bits != 0 {
            return Err(SimError::ConfigInvalid {
                field: "cell_bits".to_string(),
                constraint: format!(
                    "weight_bits ({}) must be divisible by cell_bits ({})",
                    self.weight_bits, self.cell_bits
                ),
            });
        }
        if self.mesh_rows * self.mesh_cols != self.tile_budget {
            return Err(SimError::ConfigInvalid {
                field: "tile_budget".to_string(),
                constraint: format!(
                    "mesh_rows*mesh_cols ({}x{}={}) must equal tile_budget ({})",
                    self.mesh_rows,
                    self.mesh_cols,
                    self.mesh_rows * self.mesh_cols,
                    self.tile_budget
                ),
            });
        }
        Ok(())
    }
}

/// Which level of the hierarchy a component instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Core,
    Tile,
    Node,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentSpec {
    pub name: String,
    pub scope: Scope,
    pub count_per_scope: usize,
    pub power_active_w: f64,
    pub area_mm2: f64,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TimingConfig {
    pub seconds_per_logical_cycle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTotals {
    pub total_area_mm2: f64,
    pub peak_power_w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimConfig {
    pub schema_version: u32,
    pub arch: ArchConfig,
    pub timing: TimingConfig,
    pub components: Vec<ComponentSpec>,
}

impl SimConfig {
    /// Parse and validate a config from a JSON string.
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(json).map_err(|e| SimError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config from a file path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// The embedded default node configuration.
    pub fn default_config() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("embedded default config must be valid")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.timing.seconds_per_logical_cycle <= 0.0 {
            return Err(SimError::ConfigInvalid {
                field: "seconds_per_logical_cycle".to_string(),
                constraint: "must be strictly positive".to_string(),
            });
        }
        for c in &self.components {
            if c.power_active_w < 0.0 || c.area_mm2 < 0.0 {
                return Err(SimError::ConfigInvalid {
                    field: format!("components.{}", c.name),
                    constraint: "power_active and area must be non-negative".to_string(),
                });
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.components {
            if !seen.insert(&c.name) {
                return Err(SimError::ConfigInvalid {
                    field: format!("components.{}", c.name),
                    constraint: "duplicate component name".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Instances of a scope on the whole node.
    pub fn scope_multiplicity(&self, scope: Scope) -> usize {
        match scope {
            Scope::Core => self.arch.node_cores(),
            Scope::Tile => self.arch.mesh_tiles(),
            Scope::Node => 1,
        }
    }

    /// Node-level instance count for one component entry.
    pub fn instances(&self, c: &ComponentSpec) -> usize {
        c.count_per_scope * self.scope_multiplicity(c.scope)
    }

    /// Sum area and peak power over the component table.
    ///
    /// Peak power assumes every instance active every cycle.
    pub fn node_totals(&self) -> Result<NodeTotals> {
        if self.components.is_empty() {
            return Err(SimError::Precondition(
                "component table is empty".to_string(),
            ));
        }
        let mut area = 0.0;
        let mut power = 0.0;
        for c in &self.components {
            let n = self.instances(c) as f64;
            area += c.area_mm2 * n;
            power += c.power_active_w * n;
        }
        Ok(NodeTotals {
            total_area_mm2: area,
            peak_power_w: power,
        })
    }

    /// Per-instance active power, keyed by component name.
    pub fn power_table(&self) -> BTreeMap<String, f64> {
        self.components
            .iter()
            .map(|c| (c.name.clone(), c.power_active_w))
            .collect()
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.name == name)
    }
}

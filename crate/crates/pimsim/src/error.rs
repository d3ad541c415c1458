use thiserror::Error;

/// Errors surfaced by configuration loading, planning, and simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config invariant violated: {field}: {constraint}")]
    ConfigInvalid { field: String, constraint: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("tile budget exceeded: {needed} tiles needed, {budget} available")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("placement overflow: {requested} tiles requested, mesh holds {capacity}")]
    PlacementOverflow { requested: usize, capacity: usize },

    #[error("coordinate ({x},{y}) outside {cols}x{rows} mesh")]
    OffMesh { x: usize, y: usize, cols: usize, rows: usize },

    #[error("missing baseline cell: {0}")]
    MissingBaseline(String),

    #[error("activity counter for unknown component: {0}")]
    UnknownComponent(String),

    #[error("deadlock detected: no flit progress for {window} cycles at cycle {cycle}")]
    Deadlock { cycle: u64, window: u64 },

    #[error("no packets delivered in measurement window")]
    NothingDelivered,

    #[error("benchmark matrix is empty; nothing to report")]
    EmptyMatrix,

    #[error("co-simulation did not reach a stable schedule after {0} iterations")]
    NoFixpoint(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

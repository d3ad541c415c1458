//! Cycle-accurate performance, traffic, and energy simulator for a ReRAM
//! processing-in-memory CNN-inference node.
//!
//! The crate models three things:
//! - the processing side: VGG-style layer pipelines mapped onto a
//!   tile/core/subarray hierarchy, with intra-layer, inter-layer, and batch
//!   pipelining plus weight replication;
//! - the interconnect side: a 2D-mesh NoC with XY routing under wormhole,
//!   SMART multi-hop bypass, or ideal flow control;
//! - bookkeeping: activity counters folded into energy and TOPS/W reports.

pub mod archconfig;
pub mod energy;
pub mod error;
pub mod mapping;
pub mod matrix;
pub mod noc;
pub mod pipeline;
pub mod traffic;
pub mod workload;

pub use archconfig::SimConfig;
pub use error::{Result, SimError};

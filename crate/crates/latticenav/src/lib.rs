//! Decentralized multi-agent navigation for differential-drive disk agents:
//! lattice-based global planning, congestion-metric replanning, buffered
//! Voronoi cells for local safety, and corridor reservations for narrow
//! passages.

pub mod bvc;
pub mod congestion;
pub mod corridor;
pub mod error;
pub mod geom;
pub mod grid;
pub mod lattice;
pub mod logs;
pub mod planner;
pub mod render;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

//! Fleet sizing and empty-pod routing for modular transit over a fixed bus
//! schedule.
//!
//! Two planners are provided. The integrated planner solves one min-cost
//! circulation over a reduced time-space network of the whole service day.
//! The hierarchical planner first finds the minimum fleet as a path cover of
//! the route compatibility graph, then routes each pod's idle intervals with
//! small independent flow problems, optionally capped in size.

pub mod bench;
pub mod decompose;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod gtfs;
pub mod hierarchical;
pub mod itinerary;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod synth;
pub mod tsn;

pub use error::{PlanError, Result};

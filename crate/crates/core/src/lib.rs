//! Angular spread statistics from directional channel sounder sweeps.
//!
//! Records of directional dwells are turned into a power angular spectrum
//! per link and plane, segmented into spatial lobes, reduced to RMS angular
//! spreads and summarised as log-normal laws that can be set against the
//! 3GPP indoor-office model. A sounder simulator and an ensemble generator
//! produce synthetic records for the same pipeline.

pub mod ensemble;
pub mod error;
pub mod io;
pub mod lobes;
pub mod model;
pub mod pas;
pub mod report;
pub mod sounder;
pub mod stats;
pub mod tgpp;

pub use error::{Error, Result};
pub use lobes::{LobeMember, SpatialLobe};
pub use model::{Condition, Direction, DirectionalRecord, Plane, Subpath};
pub use pas::PowerAngularSpectrum;
pub use stats::{AsValue, LogNormalSummary, Metric, Scope};

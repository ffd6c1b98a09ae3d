//! WLAN fingerprint localization by sparse recovery.
//!
//! Offline, a surveyed radio map is time averaged, each AP is marked reliable
//! or not per reference point, and RPs are grouped into overlapping clusters
//! by the Hamming distance between their reliability vectors. Online, a single
//! RSS vector picks a region of interest through the cluster heads, the most
//! discriminative APs in that region are kept, and the position is recovered
//! as a sparse combination of region fingerprints (CS, LASSO or elastic net,
//! optionally with a sparse outlier term that flags corrupted APs).

pub mod apselect;
pub mod baselines;
pub mod clustering;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod localize;
pub mod roi;
pub mod simulate;
pub mod solver;
pub mod survey;

pub use error::{Error, Result};
pub use localize::{localize, train, LocalizeOptions, PositionEstimate, TrainedModel};
pub use solver::{Method, SolverOptions, Tuning};
pub use survey::{OnlineMeasurement, RawRadioMap, SurveyConfig};

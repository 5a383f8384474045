//! Detection-to-track association: HMF and appearance costs, their fusion,
//! Hungarian matching and the track lifecycle.

mod cost;
mod hungarian;
mod tracker;

pub use cost::{fuse_costs, hmf_association, hmf_cost, id_similarity_cost, HmfCost, CENTER_GATE_DIAGONALS, GATED_COST};
pub use hungarian::{assignment_cost, hungarian, min_cost_assignment, Assignment};
pub use tracker::{tracker_step, Detection, Track, TrackState, Tracker, TrackerConfig, TrackerState};

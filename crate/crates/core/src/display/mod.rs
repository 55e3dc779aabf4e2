//! Simulated wearable display: three inverted five-bar linkages side by side
//! along the forearm.

mod history;
pub mod kinematics;
mod sim;

pub use history::{extract_onsets, HistoryError, StateHistory};
pub use kinematics::{
    forward_kinematics, inverse_kinematics, nearest_reachable, workspace_contains, Branch,
    JointAngles, KinematicsError, LinkageGeometry, Point,
};
pub use sim::{force_to_depth, rate_limit, DisplayConfig, DisplayError, LinkageDisplay, LinkageState};

//! Indoor social-navigation simulation: occupancy maps, ORCA crowds,
//! Gaussian-inflated proactive global planning, DWA and a pure-pursuit
//! follower, an RL episode engine with itemised rewards, a scenario
//! benchmark, and a newline-delimited JSON environment protocol.

pub mod bench;
pub mod crowd;
pub mod engine;
pub mod geometry;
pub mod gridmap;
pub mod kinematics;
pub mod local;
pub mod planner;
pub mod scenario;
pub mod sensing;
pub mod service;
pub mod world;

pub use crowd::{Crowd, CrowdConfig, CrowdMode};
pub use engine::{Episode, EpisodeConfig, EpisodeError, Observation, Outcome, RewardBreakdown, RewardConfig, StepResult};
pub use geometry::{wrap_angle, Pose, Vec2};
pub use gridmap::{Cell, CellState, Costmap, GridError, OccupancyGrid};
pub use kinematics::Action;
pub use planner::{GlobalPlannerKind, GaussianParams};
pub use local::LocalPlannerKind;
pub use scenario::Scenario;
pub use world::World;

//! Local planners: DWA, the scripted pure-pursuit follower, and the hook for
//! externally supplied policies.

pub mod dwa;
pub mod follower;

pub use dwa::{dwa_step, dynamic_window, rollout, score_trajectory, DwaConfig, DwaDecision, DwaWorld, VelocityWindow};
pub use follower::{follow, follow_guarded, FollowerConfig};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalPlannerKind {
    Dwa,
    #[serde(rename = "external")]
    ExternalPolicy,
    #[serde(rename = "follower")]
    ScriptedFollower,
}

impl LocalPlannerKind {
    pub const ALL: [LocalPlannerKind; 3] = [Self::Dwa, Self::ExternalPolicy, Self::ScriptedFollower];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dwa => "dwa",
            Self::ExternalPolicy => "external",
            Self::ScriptedFollower => "follower",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

//! Newline-delimited JSON messages of the environment protocol.

use crate::crowd::CrowdMode;
use crate::engine::observation::{MAP_CELLS, PEDESTRIAN_FEATURES, PEDESTRIAN_SLOTS, WAYPOINT_SLOTS};
use crate::engine::{Observation, Outcome, RewardBreakdown};
use crate::planner::GlobalPlannerKind;
use crate::sensing::EgoMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct DecodeError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Reset {
        map: String,
        seed: u64,
        n_peds: usize,
        mode: CrowdMode,
        global_planner: GlobalPlannerKind,
    },
    /// Normalized `[v, omega]`, each in [-1, 1].
    Step { action: [f64; 2] },
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Malformed JSON or a missing / mistyped field.
    Parse,
    /// Step before a successful reset.
    NoEpisode,
    /// Step after the episode ended.
    EpisodeEnded,
    /// Well-formed but unusable request: unknown map, action out of range, ...
    InvalidRequest,
}

/// Observation as flat arrays. Maps are row-major 0/1 (`i * 100 + j`),
/// waypoints are `[d0, b0, d1, b1, ...]`, pedestrians are
/// `[distance, bearing, relative_heading, present]` per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObservation {
    pub goal: [f64; 2],
    pub occupancy: Vec<u8>,
    pub pedestrian_map: Vec<u8>,
    pub prev_action: [f64; 2],
    pub waypoints: Vec<f64>,
    pub pedestrians: Vec<f64>,
    pub presence: Vec<u8>,
}

impl WireObservation {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            goal: obs.goal,
            occupancy: obs.occupancy.as_slice().to_vec(),
            pedestrian_map: obs.pedestrian_map.as_slice().to_vec(),
            prev_action: obs.prev_action,
            waypoints: obs.waypoints.iter().flatten().copied().collect(),
            pedestrians: obs.pedestrians.iter().flatten().copied().collect(),
            presence: obs.presence_mask().iter().map(|&p| p as u8).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let checks = [
            ("occupancy", self.occupancy.len(), MAP_CELLS),
            ("pedestrian_map", self.pedestrian_map.len(), MAP_CELLS),
            ("waypoints", self.waypoints.len(), 2 * WAYPOINT_SLOTS),
            ("pedestrians", self.pedestrians.len(), PEDESTRIAN_FEATURES * PEDESTRIAN_SLOTS),
            ("presence", self.presence.len(), PEDESTRIAN_SLOTS),
        ];
        for (field, got, want) in checks {
            if got != want {
                return Err(DecodeError(format!("field `{field}` has {got} entries, expected {want}")));
            }
        }
        Ok(())
    }

    pub fn to_observation(&self) -> Result<Observation, DecodeError> {
        self.validate()?;
        let map = |field: &str, v: &[u8]| {
            EgoMap::from_flat(v.to_vec()).ok_or_else(|| DecodeError(format!("field `{field}` must hold only 0 or 1")))
        };
        let mut waypoints = [[0.0; 2]; WAYPOINT_SLOTS];
        for (slot, chunk) in waypoints.iter_mut().zip(self.waypoints.chunks(2)) {
            slot.copy_from_slice(chunk);
        }
        let mut pedestrians = [[0.0; PEDESTRIAN_FEATURES]; PEDESTRIAN_SLOTS];
        for (slot, chunk) in pedestrians.iter_mut().zip(self.pedestrians.chunks(PEDESTRIAN_FEATURES)) {
            slot.copy_from_slice(chunk);
        }
        Ok(Observation {
            goal: self.goal,
            occupancy: map("occupancy", &self.occupancy)?,
            pedestrian_map: map("pedestrian_map", &self.pedestrian_map)?,
            prev_action: self.prev_action,
            waypoints,
            pedestrians,
        })
    }

    /// Scalar count of the observation vector (the presence mask is part of
    /// the pedestrian slots and not counted twice).
    pub fn scalar_len(&self) -> usize {
        2 + self.occupancy.len() + self.pedestrian_map.len() + 2 + self.waypoints.len() + self.pedestrians.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Response {
    Obs {
        version: u32,
        observation: WireObservation,
    },
    StepResult {
        observation: WireObservation,
        reward: RewardBreakdown,
        outcome: Outcome,
        step_index: usize,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    Closed,
}

impl Response {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::Error { code, message: message.into() }
    }
}

/// One JSON object, no trailing newline.
pub fn encode<T: Serialize>(message: &T) -> String {
    serde_json::to_string(message).expect("protocol messages always serialize")
}

fn decode<T: DeserializeOwned>(line: &str) -> Result<T, DecodeError> {
    serde_json::from_str(line.trim_end_matches(['\n', '\r'])).map_err(|e| DecodeError(e.to_string()))
}

pub fn decode_request(line: &str) -> Result<Request, DecodeError> {
    decode(line)
}

pub fn decode_response(line: &str) -> Result<Response, DecodeError> {
    let r: Response = decode(line)?;
    match &r {
        Response::Obs { observation, .. } | Response::StepResult { observation, .. } => observation.validate()?,
        _ => {}
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_round_trip() {
        let lines = [
            r#"{"type":"reset","map":"gen:3","seed":7,"n_peds":4,"mode":"uncooperative","global_planner":"ppp"}"#,
            r#"{"type":"step","action":[1.0,-1.0]}"#,
            r#"{"type":"close"}"#,
        ];
        for l in lines {
            assert_eq!(encode(&decode_request(l).unwrap()), l);
        }
    }

    #[test]
    fn parse_errors_name_the_field() {
        let e = decode_request(r#"{"type":"step"}"#).unwrap_err();
        assert!(e.0.contains("action"), "{e}");
        let e = decode_request(r#"{"type":"reset","map":"x","seed":1,"n_peds":1,"mode":"cooperative"}"#).unwrap_err();
        assert!(e.0.contains("global_planner"), "{e}");
        assert!(decode_request("{not json").is_err());
        assert!(decode_request(r#"{"type":"step","action":[0.0,0.0],"extra":1}"#).is_err());
    }

    #[test]
    fn error_response_encoding() {
        let r = Response::error(ErrorCode::NoEpisode, "reset first");
        assert_eq!(encode(&r), r#"{"type":"error","code":"no_episode","message":"reset first"}"#);
        assert_eq!(decode_response(&encode(&r)).unwrap(), r);
    }
}

//! Player and operator commands, as sent over the wire.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{normalize, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    SetState,
    Aim,
    MoveAvatar,
    PlaceBubble,
    Start,
    Stop,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::SetState => "set_state",
            Verb::Aim => "aim",
            Verb::MoveAvatar => "move_avatar",
            Verb::PlaceBubble => "place_bubble",
            Verb::Start => "start",
            Verb::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCommand {
    pub target: String,
    pub verb: Verb,
    #[serde(default)]
    pub args: Value,
}

impl ActionCommand {
    pub fn new(target: impl Into<String>, verb: Verb, args: Value) -> Self {
        Self {
            target: target.into(),
            verb,
            args,
        }
    }

    pub fn set_state(device: &str, on: bool) -> Self {
        Self::new(device, Verb::SetState, serde_json::json!({ "on": on }))
    }

    pub fn aim(device: &str, direction: Point3) -> Self {
        Self::new(device, Verb::Aim, serde_json::json!({ "direction": direction }))
    }

    pub fn move_avatar(to: [f64; 2]) -> Self {
        Self::new(SESSION_TARGET, Verb::MoveAvatar, serde_json::json!({ "to": to }))
    }

    pub fn place_bubble() -> Self {
        Self::new(SESSION_TARGET, Verb::PlaceBubble, Value::Null)
    }
}

/// Target name addressing the session itself.
pub const SESSION_TARGET: &str = "session";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommandError {
    #[error("malformed command: {0}")]
    Malformed(String),
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("verb {verb} is not valid for {target}")]
    InvalidForTarget { verb: &'static str, target: String },
    #[error("command rejected: {0}")]
    Rejected(String),
    #[error("session is not running")]
    NotRunning,
}

impl CommandError {
    /// HTTP status the service maps this error to.
    pub fn http_status(&self) -> u16 {
        match self {
            CommandError::Malformed(_) => 400,
            CommandError::UnknownTarget(_) => 404,
            CommandError::InvalidForTarget { .. } | CommandError::Rejected(_) => 409,
            CommandError::NotRunning => 503,
        }
    }
}

/// A validated command, ready to apply at a tick boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SetState { device: usize, on: bool },
    Aim { device: usize, direction: Point3 },
    MoveAvatar { to: [f64; 2] },
    PlaceBubble,
    Start,
    Stop,
}

pub(crate) fn parse_on(args: &Value) -> Result<bool, CommandError> {
    args.get("on")
        .and_then(Value::as_bool)
        .ok_or_else(|| CommandError::Malformed("set_state needs a boolean \"on\"".into()))
}

pub(crate) fn parse_direction(args: &Value) -> Result<Point3, CommandError> {
    let v = parse_floats(args.get("direction"), 3)
        .ok_or_else(|| CommandError::Malformed("aim needs \"direction\": [x, y, z]".into()))?;
    normalize([v[0], v[1], v[2]]).ok_or_else(|| CommandError::Malformed("aim direction must be non-zero".into()))
}

pub(crate) fn parse_floor_point(args: &Value) -> Result<[f64; 2], CommandError> {
    let v = args
        .get("to")
        .and_then(|to| parse_floats(Some(to), 2).or_else(|| parse_floats(Some(to), 3)))
        .ok_or_else(|| CommandError::Malformed("move_avatar needs \"to\": [x, y]".into()))?;
    Ok([v[0], v[1]])
}

fn parse_floats(v: Option<&Value>, len: usize) -> Option<Vec<f64>> {
    let arr = v?.as_array()?;
    if arr.len() != len {
        return None;
    }
    let out: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
    out.filter(|xs| xs.iter().all(|x| x.is_finite()))
}

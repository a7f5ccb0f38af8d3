//! Indoor CO2 simulation and the bubble ventilation game.
//!
//! The crate couples a voxel concentration field driven by occupants and
//! ventilation devices to emulated wearable sensors, and turns their
//! readings into colored bubbles that a player uses to find and clear
//! stale air.

pub mod bubble;
pub mod calibrate;
pub mod command;
pub mod event;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod policy;
pub mod protocol;
pub mod scenario;
pub mod sensor;
pub mod session;
pub mod trace;

pub use bubble::{bubble_visual, merge_bubbles, update_bubbles, Bubble, BubbleConfig, BubbleStyle, HealthThresholds};
pub use command::{ActionCommand, CommandError, Verb};
pub use event::{Event, EventKind, EventLog};
pub use field::{ConcentrationField, FieldError, SimParams, Source, SourceKind};
pub use flow::{velocity_at, DeviceKind, FlowParams, VentilationDevice};
pub use geometry::{BoxRegion, Point3, RoomGeometry};
pub use heatmap::HeatmapGrid;
pub use metrics::SessionMetrics;
pub use scenario::{HeightLabel, Mode, Scenario, ScenarioError};
pub use sensor::{Reading, ReadingStatus, SensorSpec, VirtualSensor};
pub use session::{start_session, Session, SessionConfig, SessionError, SessionStatus};
pub use trace::{run_headless, ProbeTrace};

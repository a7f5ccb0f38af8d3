use airbubble_core::command::{ActionCommand, CommandError, Verb};
use airbubble_core::event::EventKind;
use airbubble_core::metrics::SessionMetrics;
use airbubble_core::scenario::{Mode, Scenario};
use airbubble_core::session::{start_session, Session, SessionConfig, SessionError, SessionStatus};
use serde_json::json;

const CLEAN_ROOM: &str = r#"
name = "clean"

[room]
dims_m = [4.0, 4.0, 2.5]

[session]
wearable_spawn = [1.0, 1.0]

[[devices]]
id = "fan"
kind = "pedestal_fan"
position = [3.5, 3.5, 1.0]
orientation = [-1.0, 0.0, 0.0]

[[devices]]
id = "window"
kind = "open_window"
position = [0.0, 2.0, 1.5]

[[timeline]]
t = 1.0
target = "fan"
verb = "set_state"
args = { on = true }
"#;

fn clean() -> Scenario {
    Scenario::from_toml_str(CLEAN_ROOM).unwrap()
}

fn run_to(s: &mut Session, t: f64) {
    s.run_until(t).unwrap();
}

#[test]
fn ar_session_starts_with_one_warming_wearable() {
    let s = start_session(&clean(), Mode::ArBubbles, 3).unwrap();
    assert_eq!(s.sensor_ids().collect::<Vec<_>>(), vec!["wrist-1"]);
    assert!(s.wearable_reading().unwrap().co2_ppm.is_none());
    let kinds: Vec<EventKind> = s.events().events().iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::SessionStarted, EventKind::Reading]);
    assert_eq!(s.status(), SessionStatus::Running);
    assert_eq!(s.t(), 0.0);
}

#[test]
fn baseline_needs_six_static_sensors() {
    let err = start_session(&clean(), Mode::HeatmapBaseline, 0).unwrap_err();
    assert!(matches!(err, SessionError::ModeMismatch { .. }), "{err}");
    let s = start_session(&Scenario::bundled("pilot-office").unwrap(), Mode::HeatmapBaseline, 0).unwrap();
    assert_eq!(s.sensor_ids().count(), 6);
    assert!(s.wearable_reading().is_none());
}

#[test]
fn command_validation_maps_to_statuses() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    let status = |r: Result<u64, CommandError>| r.map(|_| 200).unwrap_or_else(|e| e.http_status());
    assert_eq!(status(s.submit(ActionCommand::set_state("nope", true))), 404);
    assert_eq!(
        status(s.submit(ActionCommand::new("fan", Verb::SetState, json!({ "on": "yes" })))),
        400
    );
    assert_eq!(status(s.submit(ActionCommand::aim("window", [1.0, 0.0, 0.0]))), 409);
    assert_eq!(
        status(s.submit(ActionCommand::new("fan", Verb::PlaceBubble, json!(null)))),
        409
    );
    assert_eq!(status(s.submit(ActionCommand::set_state("wrist-1", true))), 409);
    assert_eq!(status(s.submit(ActionCommand::move_avatar([9.0, 1.0]))), 400);
    assert_eq!(status(s.submit(ActionCommand::aim("fan", [0.0, 3.0, 4.0]))), 200);
    assert_eq!(s.pending_commands(), 1);
}

#[test]
fn commands_apply_at_the_next_tick() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    s.submit(ActionCommand::aim("fan", [0.0, 3.0, 4.0])).unwrap();
    assert_eq!(s.devices()[0].orientation, [-1.0, 0.0, 0.0]);
    s.tick().unwrap();
    assert_eq!(s.devices()[0].orientation, [0.0, 0.6, 0.8]);
    let out = s.take_outcomes();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].result.as_ref().unwrap()["orientation"], json!([0.0, 0.6, 0.8]));
}

#[test]
fn timeline_entries_fire_on_schedule() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    run_to(&mut s, 1.0);
    assert!(!s.devices()[0].on);
    s.tick().unwrap();
    assert!(s.devices()[0].on);
}

#[test]
fn placing_a_bubble_waits_for_warmup() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    s.submit(ActionCommand::place_bubble()).unwrap();
    s.tick().unwrap();
    let out = s.take_outcomes();
    assert_eq!(out[0].error.as_ref().unwrap().http_status(), 409);
    assert!(s.bubbles().is_empty());

    run_to(&mut s, 60.0);
    s.submit(ActionCommand::place_bubble()).unwrap();
    s.tick().unwrap();
    assert_eq!(s.bubbles().len(), 1);
    let b = &s.bubbles()[0];
    assert_eq!(b.position, s.wrist());
    assert!((b.last_ppm - 400.0).abs() < 100.0);
}

#[test]
fn bubbles_are_ar_only() {
    let mut s = start_session(&Scenario::bundled("pilot-office").unwrap(), Mode::HeatmapBaseline, 0).unwrap();
    let err = s.submit(ActionCommand::place_bubble()).unwrap_err();
    assert_eq!(err.http_status(), 409);
}

#[test]
fn avatar_walks_at_bounded_speed() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    s.submit(ActionCommand::move_avatar([4.0, 1.0])).unwrap();
    s.tick().unwrap();
    assert!((s.avatar()[0] - 1.75).abs() < 1e-12);
    run_to(&mut s, 3.0);
    assert_eq!(s.avatar(), [4.0, 1.0]);
}

#[test]
fn zero_advance_changes_nothing_and_remainders_carry() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    let before = s.snapshot();
    s.advance(0.0).unwrap();
    assert_eq!(s.snapshot(), before);
    s.advance(0.3).unwrap();
    assert_eq!(s.t(), 0.0);
    s.advance(0.3).unwrap();
    assert_eq!(s.t(), 0.5);
    assert!(s.advance(-1.0).is_err());
}

#[test]
fn completion_needs_a_sustained_minute_and_play_continues() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 5).unwrap();
    run_to(&mut s, 60.0);
    s.submit(ActionCommand::place_bubble()).unwrap();
    let placed = s.t();
    s.tick().unwrap();
    run_to(&mut s, placed + 59.0);
    assert_eq!(s.status(), SessionStatus::Running);
    run_to(&mut s, placed + 61.0);
    assert_eq!(s.status(), SessionStatus::Complete);
    let done = s.completed_at().unwrap();
    assert!(done - placed >= 60.0 - 1e-9 && done - placed <= 60.5);
    let completions = s
        .events()
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Completion)
        .count();
    assert_eq!(completions, 1);
    s.advance(5.0).unwrap();
    assert_eq!(s.status(), SessionStatus::Complete);
}

#[test]
fn no_bubbles_means_no_completion() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    run_to(&mut s, 200.0);
    assert_eq!(s.status(), SessionStatus::Running);
}

#[test]
fn stop_aborts_and_refuses_further_work() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    s.submit(ActionCommand::new("session", Verb::Stop, json!(null)))
        .unwrap();
    s.tick().unwrap();
    assert_eq!(s.status(), SessionStatus::Aborted);
    assert_eq!(
        s.submit(ActionCommand::set_state("fan", true))
            .unwrap_err()
            .http_status(),
        503
    );
    assert!(matches!(s.advance(1.0), Err(SessionError::NotRunning)));
    assert_eq!(s.events().events().last().unwrap().kind, EventKind::SessionEnded);
}

#[test]
fn carried_fan_follows_the_wrist() {
    let sc = Scenario::bundled("home").unwrap();
    let mut s = start_session(&sc, Mode::ArBubbles, 0).unwrap();
    let idx = sc.devices.iter().position(|d| d.carried).unwrap();
    assert_eq!(s.devices()[idx].position, s.wrist());
    s.submit(ActionCommand::move_avatar([3.0, 5.0])).unwrap();
    run_to(&mut s, 10.0);
    assert_eq!(s.devices()[idx].position, s.wrist());
}

#[test]
fn equal_seeds_replay_identically() {
    let run = |seed| {
        let mut s = Session::start("x", &clean(), Mode::ArBubbles, seed, SessionConfig::default()).unwrap();
        s.submit(ActionCommand::move_avatar([3.0, 3.0])).unwrap();
        run_to(&mut s, 70.0);
        s.submit(ActionCommand::place_bubble()).unwrap();
        run_to(&mut s, 120.0);
        s.events().to_ndjson()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn event_sequence_is_gapless() {
    let mut s = start_session(&clean(), Mode::ArBubbles, 0).unwrap();
    for k in 0..20 {
        s.submit(ActionCommand::move_avatar([(k % 4) as f64, 2.0])).unwrap();
        s.submit(ActionCommand::place_bubble()).unwrap();
        run_to(&mut s, 10.0 * (k + 1) as f64);
    }
    for (i, e) in s.events().events().iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1);
    }
}

#[test]
fn metrics_fixtures() {
    let m = SessionMetrics::from_endpoints(1207.0, 728.0, 10.2506).unwrap();
    assert_eq!(m.reduction_ppm, 479.0);
    assert!((m.min_per_100ppm.unwrap() - 2.14).abs() < 1e-9);
}

#[test]
fn heatmap_snapshot_covers_probe_grid() {
    let s = start_session(&Scenario::bundled("pilot-office").unwrap(), Mode::ArBubbles, 0).unwrap();
    let grid = s.heatmap(airbubble_core::HeightLabel::T);
    assert_eq!((grid.rows(), grid.cols()), (3, 3));
    assert!(grid.values.iter().flatten().all(|v| (v - 650.0).abs() < 1e-6));
}

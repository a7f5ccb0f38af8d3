use airbubble_core::bubble::{bubble_visual, merge_bubbles, update_bubbles, Bubble, BubbleConfig};
use airbubble_core::field::{ConcentrationField, SimParams, Source, SourceKind};
use airbubble_core::flow::{DeviceKind, VentilationDevice};
use airbubble_core::geometry::{distance, RoomGeometry};
use airbubble_core::sensor::{Reading, ReadingStatus, SensorSpec, VirtualSensor};
use proptest::prelude::*;

fn reading(ppm: f64, t: f64) -> Reading {
    Reading {
        device_id: "wrist-1".into(),
        t,
        co2_ppm: Some(ppm),
        temp_c: 24.0,
        rh_pct: 50.0,
        status: ReadingStatus::Ok,
    }
}

fn room() -> RoomGeometry {
    RoomGeometry::new([3.0, 2.5, 2.0], 0.5)
        .unwrap()
        .with_blocked([[2, 2, 0], [2, 2, 1], [3, 2, 0]])
        .unwrap()
}

fn arb_device() -> impl Strategy<Value = VentilationDevice> {
    (
        prop::sample::select(vec![
            DeviceKind::PedestalFan,
            DeviceKind::CeilingFan,
            DeviceKind::WindowVentilator,
            DeviceKind::OpenWindow,
            DeviceKind::SplitAc,
        ]),
        prop::array::uniform3(0.0..2.0f64),
        prop::array::uniform3(-1.0..1.0f64),
        any::<bool>(),
    )
        .prop_filter_map("zero orientation", |(kind, pos, o, on)| {
            let len = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
            (len > 0.1).then(|| {
                VentilationDevice::new("d", kind, [pos[0] * 1.5, pos[1] * 1.25, pos[2]], o.map(|x| x / len))
                    .switched(on)
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_stays_non_negative(
        values in prop::collection::vec(0.0..5000.0f64, 120),
        devices in prop::collection::vec(arb_device(), 0..3),
        dt in 0.1..5.0f64,
    ) {
        let g = room();
        let values: Vec<f64> = values.iter().enumerate().map(|(i, v)| if g.is_blocked(i) { 0.0 } else { *v }).collect();
        let mut f = ConcentrationField::from_values(g, values, 0.0).unwrap();
        let p = SimParams::default();
        for _ in 0..5 {
            f = f.step(&[], &devices, &p, dt).unwrap();
            prop_assert!(f.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn sealed_room_conserves_co2(
        values in prop::collection::vec(400.0..3000.0f64, 120),
        devices in prop::collection::vec(arb_device(), 0..3),
        rate in 0.0..2e-5f64,
    ) {
        let g = room();
        let values: Vec<f64> = values.iter().enumerate().map(|(i, v)| if g.is_blocked(i) { 0.0 } else { *v }).collect();
        // Exchange devices off: only stirring and one source.
        let devices: Vec<_> = devices.into_iter().filter(|d| !d.kind.is_window()).collect();
        let src = Source::new("s", SourceKind::Occupant, [0.25, 0.25, 0.25]).with_rate(rate);
        let mut f = ConcentrationField::from_values(g, values, 0.0).unwrap();
        let start = f.total_co2_volume();
        let p = SimParams::default();
        for _ in 0..20 {
            f = f.step(std::slice::from_ref(&src), &devices, &p, 0.5).unwrap();
        }
        let expected = start + rate * 10.0;
        prop_assert!((f.total_co2_volume() - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn bubble_law_is_monotone(a in 0.0..6000.0f64, b in 0.0..6000.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (s_lo, s_hi) = (bubble_visual(lo), bubble_visual(hi));
        prop_assert!(s_lo.diameter_m <= s_hi.diameter_m);
        prop_assert!(s_lo.hue_deg >= s_hi.hue_deg);
        prop_assert!((0.2..=1.5).contains(&s_hi.diameter_m));
        prop_assert!((0.0..=120.0).contains(&s_hi.hue_deg));
    }

    #[test]
    fn only_nearby_bubbles_refresh(
        spots in prop::collection::vec(prop::array::uniform3(0.0..6.0f64), 1..8),
        walk in prop::collection::vec(prop::array::uniform3(0.0..6.0f64), 1..20),
    ) {
        let cfg = BubbleConfig::default();
        let mut bubbles: Vec<Bubble> = spots.iter().enumerate().map(|(i, p)| Bubble::new(i as u64 + 1, *p, 1500.0, 0.0)).collect();
        for (step, wrist) in walk.iter().enumerate() {
            let t = (step + 1) as f64 * 5.0;
            let before = bubbles.clone();
            bubbles = update_bubbles(bubbles, *wrist, &reading(600.0 + t, t), t, &cfg);
            for (old, new) in before.iter().zip(&bubbles) {
                if distance(old.position, *wrist) <= cfg.proximity_m {
                    prop_assert_eq!(new.last_ppm, 600.0 + t);
                    prop_assert_eq!(new.updated_t, t);
                } else {
                    prop_assert_eq!(new.last_ppm, old.last_ppm);
                    prop_assert_eq!(new.updated_t, old.updated_t);
                }
                prop_assert!(new.style.opacity >= cfg.min_opacity && new.style.opacity <= 1.0);
            }
        }
    }

    #[test]
    fn merging_is_idempotent_and_separates(
        spots in prop::collection::vec(prop::array::uniform3(0.0..3.0f64), 0..12),
        radius in 0.1..1.0f64,
    ) {
        let bubbles: Vec<Bubble> = spots.iter().enumerate().map(|(i, p)| Bubble::new(i as u64 + 1, *p, 500.0 + i as f64, i as f64)).collect();
        let once = merge_bubbles(bubbles.clone(), radius);
        let twice = merge_bubbles(once.clone(), radius);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.len() <= bubbles.len());
        prop_assert_eq!(once.is_empty(), bubbles.is_empty());
        for (i, a) in once.iter().enumerate() {
            for b in &once[i + 1..] {
                prop_assert!(distance(a.position, b.position) > radius);
            }
        }
    }

    #[test]
    fn readings_respect_range_and_warmup(truth in 0.0..8000.0f64, seed in any::<u64>(), t in 0.0..600.0f64) {
        let spec = SensorSpec::default();
        let mut s = VirtualSensor::power_on("w", spec, [0.0; 3], 0.0, truth, 400.0, seed);
        let r = s.read(t);
        if t < spec.preheat_s {
            prop_assert_eq!(r.status, ReadingStatus::Warming);
            prop_assert!(r.co2_ppm.is_none());
        } else if let Some(v) = r.co2_ppm {
            prop_assert_eq!(r.status, ReadingStatus::Ok);
            prop_assert!((spec.range_ppm.0..=spec.range_ppm.1).contains(&v));
        } else {
            prop_assert_eq!(r.status, ReadingStatus::OutOfRange);
        }
    }
}

#[test]
fn open_window_relaxes_room_to_ambient() {
    let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
    let mut f = ConcentrationField::new(g, 1500.0).unwrap();
    let window =
        VentilationDevice::new("w", DeviceKind::WindowVentilator, [2.0, 1.0, 1.0], [-1.0, 0.0, 0.0]).switched(true);
    let p = SimParams::default();
    let mut last = f.mean_ppm();
    for _ in 0..60 {
        f = f.step(&[], std::slice::from_ref(&window), &p, 10.0).unwrap();
        let now = f.mean_ppm();
        assert!(now <= last + 1e-9, "mean rose from {last} to {now}");
        last = now;
    }
    assert!((last - 400.0).abs() < 5.0, "mean {last}");
    assert!(f.values().iter().all(|v| *v >= 400.0 - 1e-6));
}

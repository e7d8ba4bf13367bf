use std::fmt;

use esim_core::sim::{Engine, Event, EventKind, Handler, SimError, SimTime};
use proptest::prelude::*;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Ev {
    class: u8,
    tag: u32,
}

impl EventKind for Ev {
    fn class(&self) -> u8 {
        self.class
    }
}

impl fmt::Display for Ev {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ev{}/{}", self.class, self.tag)
    }
}

struct Recorder {
    seen: Vec<(u64, u8, u64)>,
    spawn_at: Option<u64>,
}

impl Handler<Ev> for Recorder {
    fn handle(&mut self, engine: &mut Engine<Ev>, event: Event<Ev>) -> Result<(), SimError> {
        self.seen.push((event.time.ms(), event.class, event.seq));
        if let Some(dt) = self.spawn_at.take() {
            engine.schedule(event.time.after(dt), Ev { class: 0, tag: 999 })?;
        }
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dispatch_is_sorted_by_time_class_seq(events in proptest::collection::vec((0u64..50, 0u8..6), 1..200)) {
        let mut engine = Engine::new();
        for (i, &(t, c)) in events.iter().enumerate() {
            engine.schedule(SimTime(t), Ev { class: c, tag: i as u32 }).unwrap();
        }
        let mut rec = Recorder { seen: Vec::new(), spawn_at: None };
        engine.run(SimTime(u64::MAX), &mut rec).unwrap();
        prop_assert_eq!(rec.seen.len(), events.len());
        let mut sorted = rec.seen.clone();
        sorted.sort();
        prop_assert_eq!(&rec.seen, &sorted);
        prop_assert_eq!(engine.dispatched(), events.len() as u64);
    }
}

#[test]
fn past_events_are_rejected() {
    let mut engine = Engine::new();
    engine.schedule(SimTime(10), Ev { class: 0, tag: 0 }).unwrap();
    struct Back;
    impl Handler<Ev> for Back {
        fn handle(&mut self, engine: &mut Engine<Ev>, _: Event<Ev>) -> Result<(), SimError> {
            engine.schedule(SimTime(5), Ev { class: 0, tag: 1 })?;
            Ok(())
        }
    }
    assert!(matches!(engine.run(SimTime(100), &mut Back), Err(SimError::Causality { .. })));
}

#[test]
fn run_stops_at_horizon_and_logs() {
    let mut engine = Engine::new().with_event_log();
    for t in [1, 5, 9, 12] {
        engine.schedule(SimTime(t), Ev { class: 2, tag: t as u32 }).unwrap();
    }
    let mut rec = Recorder { seen: Vec::new(), spawn_at: Some(0) };
    engine.run(SimTime(9), &mut rec).unwrap();
    // The spawned same-time event (class 0) is dispatched after the event that made it.
    assert_eq!(rec.seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 1, 5, 9]);
    assert_eq!(engine.pending(), 1);
    assert_eq!(engine.event_log().unwrap().len(), 4);
    assert_eq!(engine.clock(), SimTime(9));
}

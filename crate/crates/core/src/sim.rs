//! Deterministic discrete-event engine.
//!
//! Events are totally ordered by `(time, class, seq)`. `class` comes from
//! the payload via [`EventKind::class`] and `seq` is a per-engine insertion
//! counter, so dispatch order never depends on heap internals.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

/// Scaled simulation time in integer milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ms(self) -> u64 {
        self.0
    }

    pub fn after(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("event at {event} scheduled before current time {clock}")]
    Causality { clock: SimTime, event: SimTime },
    #[error("run target {until} is before current time {clock}")]
    RunBackwards { clock: SimTime, until: SimTime },
    #[error("handler fault at {time}: {msg}")]
    Handler { time: SimTime, msg: String },
}

/// Event payloads declare their tie-break class; lower classes dispatch
/// first at equal timestamps.
pub trait EventKind: fmt::Display {
    fn class(&self) -> u8;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<K> {
    pub time: SimTime,
    pub class: u8,
    pub seq: u64,
    pub kind: K,
}

impl<K> Event<K> {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.time, self.class, self.seq)
    }
}

impl<K: Eq> Ord for Event<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl<K: Eq> PartialOrd for Event<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Receives dispatched events and may schedule follow-up work.
pub trait Handler<K> {
    fn handle(&mut self, engine: &mut Engine<K>, event: Event<K>) -> Result<(), SimError>;
}

impl<K, F> Handler<K> for F
where
    F: FnMut(&mut Engine<K>, Event<K>) -> Result<(), SimError>,
{
    fn handle(&mut self, engine: &mut Engine<K>, event: Event<K>) -> Result<(), SimError> {
        self(engine, event)
    }
}

#[derive(Debug)]
pub struct Engine<K> {
    clock: SimTime,
    queue: BinaryHeap<Reverse<Event<K>>>,
    next_seq: u64,
    dispatched: u64,
    log: Option<Vec<String>>,
}

impl<K: EventKind + Eq> Default for Engine<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: EventKind + Eq> Engine<K> {
    pub fn new() -> Self {
        Engine { clock: SimTime::ZERO, queue: BinaryHeap::new(), next_seq: 0, dispatched: 0, log: None }
    }

    /// Records one `time_ms class seq kind` line per dispatch.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn event_log(&self) -> Option<&[String]> {
        self.log.as_deref()
    }

    pub fn take_event_log(&mut self) -> Option<Vec<String>> {
        self.log.take()
    }

    /// Enqueues `kind` at `time`; returns its sequence number.
    pub fn schedule(&mut self, time: SimTime, kind: K) -> Result<u64, SimError> {
        if time < self.clock {
            return Err(SimError::Causality { clock: self.clock, event: time });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Event { time, class: kind.class(), seq, kind }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(e)| e.time)
    }

    /// Removes the minimum event and advances the clock to it.
    pub fn pop_next(&mut self) -> Option<Event<K>> {
        let Reverse(ev) = self.queue.pop()?;
        self.clock = ev.time;
        Some(ev)
    }

    /// Dispatches every event with `time <= until`, then sets the clock to
    /// `until`. A handler error aborts the run; the caller keeps its state.
    pub fn run<H: Handler<K>>(&mut self, until: SimTime, handler: &mut H) -> Result<(), SimError> {
        if until < self.clock {
            return Err(SimError::RunBackwards { clock: self.clock, until });
        }
        while self.peek_time().is_some_and(|t| t <= until) {
            let ev = self.pop_next().expect("peeked");
            if let Some(log) = &mut self.log {
                log.push(format!("{} {} {} {}", ev.time, ev.class, ev.seq, ev.kind));
            }
            self.dispatched += 1;
            handler.handle(self, ev)?;
        }
        self.clock = until;
        Ok(())
    }
}

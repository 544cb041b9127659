//! Append-only event log with server-push fan-out.
//!
//! The log itself is the per-subscriber buffer: every subscriber keeps its
//! own cursor into it and wakes on a watch channel, so publishing never
//! waits on a reader and late joiners can replay from any sequence number.

use std::sync::Mutex;

use futures::stream::{self, Stream, StreamExt};
use homelearn_core::events::{EngineEvent, EventBody, EventSink};
use tokio::sync::watch;

pub struct EventBus {
    log: Mutex<Vec<EngineEvent>>,
    len: watch::Sender<u64>,
}

impl Default for EventBus {
    fn default() -> Self {
        EventBus {
            log: Mutex::new(Vec::new()),
            len: watch::Sender::new(0),
        }
    }
}

impl EventBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `body` with the next gapless sequence number.
    pub fn publish(&self, body: EventBody) -> EngineEvent {
        let mut log = self.log.lock().unwrap();
        let event = EngineEvent {
            seq: log.len() as u64,
            body,
        };
        log.push(event.clone());
        self.len.send_replace(log.len() as u64);
        event
    }

    pub fn len(&self) -> u64 {
        self.log.lock().unwrap().len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn since(&self, from: u64) -> Vec<EngineEvent> {
        let log = self.log.lock().unwrap();
        log.get(from as usize..).map(<[_]>::to_vec).unwrap_or_default()
    }

    /// Events from `from` onward: the backlog first, then live events as
    /// they are published. Ends only when the bus is dropped.
    pub fn subscribe(self: &std::sync::Arc<Self>, from: u64) -> impl Stream<Item = EngineEvent> + Send + 'static {
        let rx = self.len.subscribe();
        let bus = self.clone();
        stream::unfold((bus, rx, from), |(bus, mut rx, next)| async move {
            loop {
                rx.borrow_and_update();
                let batch = bus.since(next);
                if !batch.is_empty() {
                    let next = next + batch.len() as u64;
                    return Some((stream::iter(batch), (bus, rx, next)));
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        })
        .flatten()
    }
}

/// Engine-side sink that publishes straight onto the bus.
pub struct BusSink<'a>(pub &'a EventBus);

impl EventSink for BusSink<'_> {
    fn emit(&mut self, body: EventBody) {
        self.0.publish(body);
    }
}

use std::sync::{Arc, Mutex};

use serde::Serialize;
use tokio::sync::watch;

use super::record::RunStatus;
use crate::federation::RoundMetrics;

/// One item of a run's metric stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamItem {
    Metrics(RoundMetrics),
    /// The run ended; nothing follows.
    End {
        status: RunStatus,
    },
}

#[derive(Default)]
struct HubState {
    history: Vec<RoundMetrics>,
    terminal: Option<RunStatus>,
}

/// Metric history of one run plus a live tail. Each subscriber sees every
/// record once, in publish order, then a terminal item.
#[derive(Clone)]
pub struct MetricsHub {
    state: Arc<Mutex<HubState>>,
    version: Arc<watch::Sender<u64>>,
}

impl Default for MetricsHub {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricsHub {
    pub fn new() -> Self {
        Self { state: Arc::default(), version: Arc::new(watch::Sender::new(0)) }
    }

    pub fn with_history(history: Vec<RoundMetrics>, terminal: Option<RunStatus>) -> Self {
        let hub = Self::new();
        *hub.state.lock().expect("hub lock") = HubState { history, terminal };
        hub
    }

    pub fn publish(&self, metrics: RoundMetrics) {
        let mut s = self.state.lock().expect("hub lock");
        if s.terminal.is_some() {
            return;
        }
        s.history.push(metrics);
        drop(s);
        self.version.send_modify(|v| *v += 1);
    }

    pub fn close(&self, status: RunStatus) {
        let mut s = self.state.lock().expect("hub lock");
        if s.terminal.is_none() {
            s.terminal = Some(status);
        }
        drop(s);
        self.version.send_modify(|v| *v += 1);
    }

    pub fn history(&self) -> Vec<RoundMetrics> {
        self.state.lock().expect("hub lock").history.clone()
    }

    pub fn subscribe(&self) -> Subscription {
        Subscription { hub: self.clone(), cursor: 0, done: false, rx: self.version.subscribe() }
    }

    fn item_at(&self, cursor: usize) -> Option<StreamItem> {
        let s = self.state.lock().expect("hub lock");
        if let Some(m) = s.history.get(cursor) {
            return Some(StreamItem::Metrics(m.clone()));
        }
        s.terminal.map(|status| StreamItem::End { status })
    }
}

pub struct Subscription {
    hub: MetricsHub,
    cursor: usize,
    done: bool,
    rx: watch::Receiver<u64>,
}

impl Subscription {
    /// Next item; `None` after the terminal item.
    pub async fn next(&mut self) -> Option<StreamItem> {
        if self.done {
            return None;
        }
        loop {
            self.rx.borrow_and_update();
            if let Some(item) = self.hub.item_at(self.cursor) {
                match item {
                    StreamItem::Metrics(_) => self.cursor += 1,
                    StreamItem::End { .. } => self.done = true,
                }
                return Some(item);
            }
            if self.rx.changed().await.is_err() {
                return None;
            }
        }
    }
}

//! In-memory session registry. Sessions are never persisted.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use scriptorium::agent::{SessionState, TraceEvent};

/// Turn state plus the retained trace, guarded together so turns of one
/// session run one at a time.
#[derive(Debug)]
pub struct SessionData {
    pub state: SessionState,
    /// Most recent trace events, oldest first, at most `trace_cap` long.
    pub trace: VecDeque<TraceEvent>,
    /// Events evicted by the cap.
    pub dropped: u64,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    /// Unix milliseconds.
    pub created_at: u64,
    last_used: Mutex<Instant>,
    pub data: Arc<tokio::sync::Mutex<SessionData>>,
}

impl Session {
    fn touch(&self) {
        *self.last_used.lock().expect("clock lock") = Instant::now();
    }

    fn idle(&self) -> Duration {
        self.last_used.lock().expect("clock lock").elapsed()
    }
}

pub enum Lookup {
    Live(Arc<Session>),
    Expired,
    Unknown,
}

#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    trace_cap: usize,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    /// Ids that expired, kept so callers get a distinct error.
    expired: Mutex<VecDeque<String>>,
}

const EXPIRED_MEMORY: usize = 4096;

/// 128 random bits from the thread-local CSPRNG, hex encoded.
fn new_session_id() -> String {
    hex::encode(rand::random::<u128>().to_be_bytes())
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl SessionStore {
    pub fn new(ttl: Duration, trace_cap: usize) -> Self {
        Self {
            ttl,
            trace_cap,
            sessions: Mutex::new(HashMap::new()),
            expired: Mutex::new(VecDeque::new()),
        }
    }

    pub fn trace_cap(&self) -> usize {
        self.trace_cap
    }

    pub fn create(&self) -> Arc<Session> {
        self.sweep();
        let id = new_session_id();
        let session = Arc::new(Session {
            id: id.clone(),
            created_at: unix_ms(),
            last_used: Mutex::new(Instant::now()),
            data: Arc::new(tokio::sync::Mutex::new(SessionData {
                state: SessionState::new(id.clone()),
                trace: VecDeque::new(),
                dropped: 0,
            })),
        });
        self.sessions.lock().expect("session lock").insert(id, session.clone());
        session
    }

    pub fn get(&self, id: &str) -> Lookup {
        let mut map = self.sessions.lock().expect("session lock");
        match map.get(id) {
            Some(s) if s.idle() > self.ttl => {
                map.remove(id);
                drop(map);
                self.remember_expired(id);
                Lookup::Expired
            }
            Some(s) => {
                s.touch();
                Lookup::Live(s.clone())
            }
            None if self.expired.lock().expect("expired lock").iter().any(|e| e == id) => Lookup::Expired,
            None => Lookup::Unknown,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every session idle for longer than the TTL.
    pub fn sweep(&self) {
        let mut gone = Vec::new();
        self.sessions.lock().expect("session lock").retain(|id, s| {
            let keep = s.idle() <= self.ttl;
            if !keep {
                gone.push(id.clone());
            }
            keep
        });
        for id in gone {
            self.remember_expired(&id);
        }
    }

    fn remember_expired(&self, id: &str) {
        let mut q = self.expired.lock().expect("expired lock");
        q.push_back(id.to_string());
        while q.len() > EXPIRED_MEMORY {
            q.pop_front();
        }
    }
}

impl SessionData {
    pub fn record(&mut self, events: &[TraceEvent], cap: usize) {
        self.trace.extend(events.iter().cloned());
        while self.trace.len() > cap {
            self.trace.pop_front();
            self.dropped += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use scriptorium::agent::CallOutcome;

    use super::*;

    fn event(n: u64) -> TraceEvent {
        TraceEvent {
            turn: n,
            group: 0,
            call_id: format!("c{n}"),
            tool: "lookup_fragment".into(),
            args: Default::default(),
            status: CallOutcome::Ok,
            data: Default::default(),
            error: None,
            artifacts: Vec::new(),
            started_ms: 0,
            elapsed_ms: 0,
        }
    }

    proptest! {
        #[test]
        fn capped_trace_keeps_the_newest_events(batches in prop::collection::vec(0usize..6, 0..12), cap in 1usize..10) {
            let mut data = SessionData { state: SessionState::new("p"), trace: VecDeque::new(), dropped: 0 };
            let mut all: Vec<u64> = Vec::new();
            for size in batches {
                let start = all.len() as u64;
                all.extend(start..start + size as u64);
                let batch: Vec<TraceEvent> = (start..start + size as u64).map(event).collect();
                data.record(&batch, cap);
            }
            prop_assert!(data.trace.len() <= cap);
            prop_assert_eq!(data.dropped as usize + data.trace.len(), all.len());
            let kept: Vec<u64> = data.trace.iter().map(|e| e.turn).collect();
            prop_assert_eq!(&kept[..], &all[all.len() - kept.len()..]);
        }
    }

    #[test]
    fn ids_are_long_and_distinct() {
        let store = SessionStore::new(Duration::from_secs(60), 10);
        let a = store.create();
        let b = store.create();
        assert_eq!(a.id.len(), 32);
        assert_ne!(a.id, b.id);
        assert!(matches!(store.get(&a.id), Lookup::Live(_)));
        assert!(matches!(store.get("nope"), Lookup::Unknown));
    }

    #[test]
    fn idle_sessions_expire() {
        let store = SessionStore::new(Duration::from_millis(0), 10);
        let s = store.create();
        std::thread::sleep(Duration::from_millis(5));
        assert!(matches!(store.get(&s.id), Lookup::Expired));
        assert!(matches!(store.get(&s.id), Lookup::Expired));
        assert!(store.is_empty());
    }
}

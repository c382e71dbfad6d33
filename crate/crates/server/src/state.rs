//! Live sessions, their persistence, and revision notifications.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::Instant;

use engine_core::session::{Providers, Session, SessionConfig, SessionError, SessionStore, StoreError};
use tokio::sync::watch;

use crate::config::ServerConfig;
use crate::error::ApiError;

/// One session behind its own lock: requests for the same session apply in
/// arrival order, different sessions proceed in parallel.
pub struct SessionHandle {
    session: Mutex<Session>,
    revision: watch::Sender<u64>,
}

impl SessionHandle {
    fn new(session: Session) -> Self {
        let (revision, _) = watch::channel(session.revision());
        Self { session: Mutex::new(session), revision }
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        // a panic mid-request leaves the session as of its last commit
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.revision.subscribe()
    }
}

pub struct AppState {
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    store: Option<SessionStore>,
    providers: Providers,
    defaults: SessionConfig,
    pub push_interval_ms: i64,
    started: Instant,
}

impl AppState {
    pub fn in_memory(providers: Providers, defaults: SessionConfig, push_interval_ms: i64) -> Self {
        Self {
            sessions: RwLock::new(BTreeMap::new()),
            store: None,
            providers,
            defaults,
            push_interval_ms,
            started: Instant::now(),
        }
    }

    /// Builds the state from configuration, restoring every persisted session.
    pub fn open(config: &ServerConfig) -> anyhow::Result<Self> {
        let mut state = Self::in_memory(config.providers()?, config.session, config.push_interval_ms);
        if let Some(dir) = &config.data_dir {
            let store = SessionStore::open(dir)?.with_snapshot_every(config.snapshot_every);
            for id in store.session_ids()? {
                let (session, report) = store.restore(&id, state.providers.clone())?;
                tracing::info!(session = %id, records = report.records, snapshot = report.from_snapshot, "restored");
                state.sessions.get_mut().expect("fresh lock").insert(id, Arc::new(SessionHandle::new(session)));
            }
            state.store = Some(store);
        }
        Ok(state)
    }

    /// Milliseconds since the service started; drives push pacing.
    pub fn now_ms(&self) -> i64 {
        self.started.elapsed().as_millis() as i64
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()).into())
    }

    pub fn create(&self, id: Option<String>, config: Option<SessionConfig>) -> Result<Arc<SessionHandle>, ApiError> {
        let id = id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
        let valid = !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !valid {
            return Err(ApiError::bad_request("session_id may use letters, digits, '-' and '_' (at most 128)"));
        }
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if sessions.contains_key(&id) {
            return Err(ApiError::conflict(format!("session {id} already exists")));
        }
        let mut session = Session::new(&id, config.unwrap_or(self.defaults), self.providers.clone());
        self.persist(&mut session)?;
        let handle = Arc::new(SessionHandle::new(session));
        sessions.insert(id, handle.clone());
        Ok(handle)
    }

    /// Runs `f` on the session under its lock, persists what it accepted and
    /// wakes push subscribers. Call from a blocking context: providers may
    /// block.
    pub fn mutate<T>(
        &self,
        handle: &SessionHandle,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<T, ApiError> {
        let mut session = handle.lock();
        let result = f(&mut session);
        // rejected work leaves the journal empty, accepted work must be saved
        // whatever the caller's outcome
        self.persist(&mut session)?;
        handle.revision.send_replace(session.revision());
        Ok(result?)
    }

    fn persist(&self, session: &mut Session) -> Result<(), ApiError> {
        match &self.store {
            Some(store) => store.flush(session).map_err(|e: StoreError| ApiError::internal(e.to_string())),
            None => {
                session.take_journal();
                Ok(())
            }
        }
    }
}

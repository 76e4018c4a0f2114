use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use stable_rank::engine::{Engine, NextRecord};
use stable_rank::model::{load_dataset, Schema};
use stable_rank::Dataset;

use crate::api::{SessionRequest, UploadParams};
use crate::error::ApiError;
use crate::Config;

/// An uploaded dataset together with what is needed to parse it again.
#[derive(Debug)]
pub(crate) struct StoredDataset {
    pub id: String,
    pub dataset: Dataset<f64>,
    pub csv: String,
    pub params: UploadParams,
}

impl StoredDataset {
    pub fn parse(id: String, csv: String, params: UploadParams) -> Result<Self, ApiError> {
        let attrs: Vec<String> = match &params.attrs {
            Some(a) => a.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => header_attrs(&csv, &params.id_col)?,
        };
        let refs: Vec<&str> = attrs.iter().map(String::as_str).collect();
        let schema =
            Schema::parse(&params.id_col, &refs).map_err(ApiError::upload)?.with_normalization(params.normalize);
        let dataset = load_dataset(csv.as_bytes(), &schema).map_err(ApiError::upload)?;
        Ok(Self { id, dataset, csv, params })
    }
}

fn header_attrs(csv: &str, id_col: &str) -> Result<Vec<String>, ApiError> {
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ApiError::BadRequest { message: format!("unreadable header row: {e}"), row: None })?;
    let cols: Vec<String> =
        headers.iter().map(str::trim).filter(|h| *h != id_col && !h.is_empty()).map(String::from).collect();
    if cols.is_empty() {
        return Err(ApiError::BadRequest { message: "header row has no attribute columns".into(), row: None });
    }
    Ok(cols)
}

pub(crate) struct Session {
    pub id: String,
    pub dataset: Arc<StoredDataset>,
    pub request: SessionRequest,
    pub engine: Engine<f64>,
    pub history: Vec<NextRecord>,
    /// Calls that reached the engine, including failed ones; replayed on restore.
    pub calls: u64,
    pub created_at: u64,
}

impl Session {
    pub fn open(id: String, dataset: Arc<StoredDataset>, request: SessionRequest) -> Result<Self, ApiError> {
        let ds = &dataset.dataset;
        let roi = request.roi.build(ds.dim())?;
        let params = request.engine_params()?;
        let engine = Engine::new(ds, &roi, params)?;
        Ok(Self { id, dataset, request, engine, history: Vec::new(), calls: 0, created_at: unix_now() })
    }

    pub fn next(&mut self) -> Result<Option<NextRecord>, ApiError> {
        self.calls += 1;
        let rec = self.engine.next(&self.dataset.dataset)?;
        if let Some(r) = &rec {
            self.history.push(r.clone());
        }
        Ok(rec)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub(crate) struct Slot {
    pub session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Mutex<(Instant, u64)>,
}

impl Slot {
    fn new(session: Session) -> Self {
        Self {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_used: Mutex::new((Instant::now(), unix_now())),
        }
    }

    pub fn touch(&self) {
        *self.last_used.lock().unwrap() = (Instant::now(), unix_now());
    }

    pub fn last_used_unix(&self) -> u64 {
        self.last_used.lock().unwrap().1
    }

    fn idle_since(&self) -> Instant {
        self.last_used.lock().unwrap().0
    }
}

struct Inner {
    config: Config,
    datasets: RwLock<HashMap<String, Arc<StoredDataset>>>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    counter: AtomicU64,
}

/// Shared, cheaply clonable service state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DatasetSnapshot {
    id: String,
    csv: String,
    params: UploadParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SessionSnapshot {
    id: String,
    request: SessionRequest,
    calls: u64,
}

/// On-disk form of the service state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    counter: u64,
    datasets: Vec<DatasetSnapshot>,
    sessions: Vec<SessionSnapshot>,
}

impl Snapshot {
    pub const FILE_NAME: &'static str = "snapshot.json";

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{}.tmp", Self::FILE_NAME));
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, dir.join(Self::FILE_NAME))
    }

    /// `Ok(None)` when the directory holds no snapshot.
    pub fn read(dir: &Path) -> std::io::Result<Option<Self>> {
        let path = dir.join(Self::FILE_NAME);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(path)?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }
}

impl AppState {
    pub fn new(config: Config) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                datasets: RwLock::default(),
                sessions: RwLock::default(),
                counter: AtomicU64::new(0),
            }),
        }
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    pub(crate) fn fresh_id(&self, prefix: &str) -> String {
        let n = self.inner.counter.fetch_add(1, Ordering::Relaxed) + 1;
        format!("{prefix}{n}")
    }

    pub(crate) fn insert_dataset(&self, ds: StoredDataset) -> Arc<StoredDataset> {
        let ds = Arc::new(ds);
        self.inner.datasets.write().unwrap().insert(ds.id.clone(), ds.clone());
        ds
    }

    pub(crate) fn dataset(&self, id: &str) -> Result<Arc<StoredDataset>, ApiError> {
        self.inner.datasets.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("dataset", id))
    }

    /// Sessions already open keep their own reference.
    pub(crate) fn remove_dataset(&self, id: &str) -> bool {
        self.inner.datasets.write().unwrap().remove(id).is_some()
    }

    pub(crate) fn insert_session(&self, session: Session) -> Arc<Slot> {
        let id = session.id.clone();
        let slot = Arc::new(Slot::new(session));
        self.inner.sessions.write().unwrap().insert(id, slot.clone());
        slot
    }

    /// Look up a session, dropping it first if it has been idle too long.
    pub(crate) fn session(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        let slot = self.inner.sessions.read().unwrap().get(id).cloned();
        match slot {
            Some(s) if s.idle_since().elapsed() <= self.inner.config.ttl => {
                s.touch();
                Ok(s)
            }
            Some(_) => {
                self.inner.sessions.write().unwrap().remove(id);
                Err(ApiError::not_found("session", id))
            }
            None => Err(ApiError::not_found("session", id)),
        }
    }

    pub(crate) fn remove_session(&self, id: &str) -> bool {
        self.inner.sessions.write().unwrap().remove(id).is_some()
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap().len()
    }

    /// Drop sessions idle for longer than the configured TTL; returns how many.
    /// Sessions with an operation in flight are kept.
    pub fn expire_idle(&self) -> usize {
        let ttl = self.inner.config.ttl;
        let mut sessions = self.inner.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.idle_since().elapsed() <= ttl || s.session.try_lock().is_err());
        before - sessions.len()
    }

    /// Capture uploads and per-session call counts. Waits for in-flight calls.
    pub async fn snapshot(&self) -> Snapshot {
        let mut datasets: Vec<DatasetSnapshot> = self
            .inner
            .datasets
            .read()
            .unwrap()
            .values()
            .map(|d| DatasetSnapshot { id: d.id.clone(), csv: d.csv.clone(), params: d.params.clone() })
            .collect();
        let slots: Vec<Arc<Slot>> = self.inner.sessions.read().unwrap().values().cloned().collect();
        let mut sessions = Vec::with_capacity(slots.len());
        for slot in slots {
            let s = slot.session.lock().await;
            // Sessions may outlive a deleted dataset; keep its upload so replay works.
            if !datasets.iter().any(|d| d.id == s.dataset.id) {
                let d = &s.dataset;
                datasets.push(DatasetSnapshot { id: d.id.clone(), csv: d.csv.clone(), params: d.params.clone() });
            }
            sessions.push(SessionSnapshot { id: s.id.clone(), request: s.request.clone(), calls: s.calls });
        }
        datasets.sort_by(|a, b| a.id.cmp(&b.id));
        sessions.sort_by(|a, b| a.id.cmp(&b.id));
        Snapshot { counter: self.inner.counter.load(Ordering::Relaxed), datasets, sessions }
    }

    /// Rebuild state from a snapshot by re-parsing uploads and replaying calls.
    /// This is CPU-bound; call it from a blocking context.
    pub fn restore(config: Config, snapshot: Snapshot) -> Result<Self, ApiError> {
        let state = Self::new(config);
        state.inner.counter.store(snapshot.counter, Ordering::Relaxed);
        for d in snapshot.datasets {
            state.insert_dataset(StoredDataset::parse(d.id, d.csv, d.params)?);
        }
        for s in snapshot.sessions {
            let ds = state.dataset(&s.request.dataset_id)?;
            let mut session = Session::open(s.id, ds, s.request)?;
            for _ in 0..s.calls {
                // Failed calls still advanced the engine; replay them the same way.
                let _ = session.next();
            }
            state.insert_session(session);
        }
        Ok(state)
    }
}

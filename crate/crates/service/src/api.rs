use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stable_rank::engine::{verify as verify_ranking, EngineKind, EngineParams, VerifyOptions, VerifyReport};
use stable_rank::exact2d::Verified;
use stable_rank::model::{Constraint, RegionOfInterest};
use stable_rank::{Ranking, ResultMode, Roi64, WeightVector};

use crate::error::ApiError;
use crate::state::{AppState, Session, StoredDataset};

/// Query parameters of a dataset upload.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UploadParams {
    pub id_col: String,
    /// Comma-separated `name[:higher|:lower]` list; all non-id columns when absent.
    pub attrs: Option<String>,
    /// Min-max normalize every attribute; when false values must already lie in [0, 1].
    pub normalize: bool,
}

impl Default for UploadParams {
    fn default() -> Self {
        Self { id_col: "id".into(), attrs: None, normalize: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintSpec {
    /// `"1,-1<=0"`
    Text(String),
    Parts(Constraint<f64>),
}

/// Region of interest as sent by clients.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoiSpec {
    #[default]
    Full,
    /// Weight vectors within `angle` radians of `ray`, or with cosine
    /// similarity at least `similarity`.
    Cone {
        ray: Vec<f64>,
        #[serde(default)]
        angle: Option<f64>,
        #[serde(default)]
        similarity: Option<f64>,
    },
    Constraints {
        constraints: Vec<ConstraintSpec>,
    },
    /// Angle range for two attributes.
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl RoiSpec {
    pub fn build(&self, d: usize) -> Result<Roi64, ApiError> {
        let roi = match self {
            RoiSpec::Full => RegionOfInterest::full(d),
            RoiSpec::Cone { ray, angle, similarity } => {
                let angle = match (angle, similarity) {
                    (Some(a), None) => *a,
                    (None, Some(s)) if (-1.0..=1.0).contains(s) => s.acos(),
                    (None, Some(s)) => return Err(ApiError::unprocessable(format!("similarity {s} outside [-1, 1]"))),
                    _ => return Err(ApiError::unprocessable("cone needs exactly one of `angle` and `similarity`")),
                };
                RegionOfInterest::cone(WeightVector::from_f64(ray)?, angle)?
            }
            RoiSpec::Constraints { constraints } => {
                let cs = constraints
                    .iter()
                    .map(|c| match c {
                        ConstraintSpec::Text(t) => t.parse(),
                        ConstraintSpec::Parts(p) => Ok(p.clone()),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                RegionOfInterest::constraints(d, cs)?
            }
            RoiSpec::Interval { lo, hi } => {
                if d != 2 {
                    return Err(ApiError::unprocessable("an angle interval needs two attributes"));
                }
                RegionOfInterest::angle_range(*lo, *hi)?
            }
        };
        roi.check_dim(d)?;
        Ok(roi)
    }
}

/// Engine tuning; anything left out keeps the engine default.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub samples: Option<usize>,
    pub budget: Option<u64>,
    pub error: Option<f64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub exact_fallback: bool,
    pub max_samples: Option<u64>,
    pub min_samples: Option<u64>,
}

fn full_mode() -> String {
    "full".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionRequest {
    pub dataset_id: String,
    #[serde(default)]
    pub roi: RoiSpec,
    pub engine: EngineKind,
    #[serde(default = "full_mode")]
    pub mode: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub params: SessionParams,
}

impl SessionRequest {
    pub fn engine_params(&self) -> Result<EngineParams, ApiError> {
        let p = &self.params;
        let mut e = EngineParams::new(self.engine);
        e.mode = ResultMode::parse(&self.mode, self.k)?;
        e.budget = p.budget;
        e.error = p.error;
        e.exact_fallback = p.exact_fallback;
        if let Some(v) = p.samples {
            e.samples = v;
        }
        if let Some(v) = p.alpha {
            e.alpha = v;
        }
        if let Some(v) = p.seed {
            e.seed = v;
        }
        if let Some(v) = p.max_samples {
            e.max_samples = v;
        }
        if let Some(v) = p.min_samples {
            e.min_samples = v;
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub dataset_id: String,
    #[serde(default)]
    pub ranking: Option<Vec<String>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub roi: RoiSpec,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> Result<R, ApiError> + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

fn dataset_summary(d: &StoredDataset) -> Value {
    json!({
        "dataset_id": d.id,
        "n": d.dataset.len(),
        "d": d.dataset.dim(),
        "attr_meta": d.dataset.attr_meta(),
    })
}

pub async fn upload_dataset(
    State(state): State<AppState>,
    Query(params): Query<UploadParams>,
    body: String,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = state.fresh_id("d");
    let stored = blocking(move || StoredDataset::parse(id, body, params)).await?;
    let stored = state.insert_dataset(stored);
    Ok((StatusCode::CREATED, Json(dataset_summary(&stored))))
}

/// Summary plus the items on the normalized scale.
pub async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let d = state.dataset(&id)?;
    let mut body = dataset_summary(&d);
    body["items"] = d.dataset.items().iter().map(|it| json!({ "id": it.id, "values": it.attrs })).collect();
    Ok(Json(body))
}

pub async fn delete_dataset(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.remove_dataset(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found("dataset", &id))
    }
}

pub async fn create_session(
    State(state): State<AppState>,
    Json(request): Json<SessionRequest>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let dataset = state.dataset(&request.dataset_id)?;
    let id = state.fresh_id("s");
    let session = blocking(move || Session::open(id, dataset, request)).await?;
    let body = json!({
        "session_id": session.id,
        "engine": session.request.engine,
        "mode": session.engine.params().mode,
        "region_count": session.engine.region_count(),
    });
    state.insert_session(session);
    Ok((StatusCode::CREATED, Json(body)))
}

pub async fn next(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.session(&id)?;
    let mut guard = Arc::clone(&slot.session).lock_owned().await;
    let rec = blocking(move || guard.next()).await?;
    slot.touch();
    Ok(match rec {
        Some(r) => Json(r).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = state.session(&id)?;
    let s = slot.session.lock().await;
    Ok(Json(json!({
        "session_id": s.id,
        "dataset_id": s.dataset.id,
        "request": s.request,
        "mode": s.engine.params().mode,
        "region_count": s.engine.region_count(),
        "produced": s.engine.produced(),
        "exhausted": s.engine.is_exhausted(),
        "created_at": s.created_at,
        "last_used_at": slot.last_used_unix(),
        "history": s.history,
    })))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.remove_session(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found("session", &id))
    }
}

pub async fn verify(
    State(state): State<AppState>,
    Json(req): Json<VerifyRequest>,
) -> Result<Json<VerifyReport>, ApiError> {
    let stored = state.dataset(&req.dataset_id)?;
    let report = blocking(move || {
        let ds = &stored.dataset;
        let roi = req.roi.build(ds.dim())?;
        let ranking = match (req.ranking, req.weights) {
            (Some(order), None) => Ranking { order },
            (None, Some(w)) => {
                if w.len() != ds.dim() {
                    return Err(ApiError::unprocessable(format!(
                        "weights have {} components, the dataset has {} attributes",
                        w.len(),
                        ds.dim()
                    )));
                }
                stable_rank::rank(ds, &WeightVector::from_f64(&w)?)?
            }
            _ => return Err(ApiError::unprocessable("give exactly one of `ranking` and `weights`")),
        };
        let mut opts = VerifyOptions::default();
        opts.samples = req.samples.unwrap_or(opts.samples);
        opts.seed = req.seed.unwrap_or(opts.seed);
        opts.alpha = req.alpha.unwrap_or(opts.alpha);
        match verify_ranking(ds, &ranking, &roi, opts)? {
            Verified::Feasible(r) => Ok(r),
            Verified::Infeasible(why) => Err(ApiError::infeasible(&why)),
        }
    })
    .await?;
    Ok(Json(report))
}

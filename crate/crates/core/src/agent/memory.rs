//! Session state: turn history and the artifact table.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::perceive::{AssembledPrompt, Goal};
use super::plan::Plan;
use super::tools::ImageLookup;
use super::trace::TraceEvent;
use crate::raster::RasterImage;
use crate::vision::Modality;

#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactKind {
    Image {
        image: RasterImage,
        modality: Option<Modality>,
    },
    /// `data` object of a successful tool call.
    Result { data: Value },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub handle: String,
    pub turn: u64,
    /// `"input"` for uploads, otherwise the producing tool.
    pub origin: String,
    pub kind: ArtifactKind,
}

/// Pixel-free description of an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSummary {
    pub handle: String,
    pub turn: u64,
    pub origin: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl Artifact {
    pub fn image(&self) -> Option<&RasterImage> {
        match &self.kind {
            ArtifactKind::Image { image, .. } => Some(image),
            ArtifactKind::Result { .. } => None,
        }
    }

    pub fn modality(&self) -> Option<Modality> {
        match &self.kind {
            ArtifactKind::Image { modality, .. } => *modality,
            ArtifactKind::Result { .. } => None,
        }
    }

    pub fn summary(&self) -> ArtifactSummary {
        let (kind, modality, width, height) = match &self.kind {
            ArtifactKind::Image { image, modality } => {
                ("image", *modality, Some(image.width()), Some(image.height()))
            }
            ArtifactKind::Result { .. } => ("result", None, None, None),
        };
        ArtifactSummary {
            handle: self.handle.clone(),
            turn: self.turn,
            origin: self.origin.clone(),
            kind: kind.into(),
            modality,
            width,
            height,
        }
    }
}

/// Handle to artifact, remembering insertion order. Grows monotonically.
#[derive(Debug, Clone, Default)]
pub struct ArtifactTable {
    by_handle: BTreeMap<String, Arc<Artifact>>,
    order: Vec<String>,
}

impl ArtifactTable {
    pub fn get(&self, handle: &str) -> Option<&Artifact> {
        self.by_handle.get(handle).map(Arc::as_ref)
    }

    pub fn contains(&self, handle: &str) -> bool {
        self.by_handle.contains_key(handle)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Artifacts in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Artifact> {
        self.order.iter().map(|h| self.by_handle[h].as_ref())
    }

    /// Inserts a new artifact; an existing handle is left untouched and
    /// `false` returned.
    pub fn insert(&mut self, artifact: Artifact) -> bool {
        if self.by_handle.contains_key(&artifact.handle) {
            return false;
        }
        self.order.push(artifact.handle.clone());
        self.by_handle.insert(artifact.handle.clone(), Arc::new(artifact));
        true
    }
}

impl ImageLookup for ArtifactTable {
    fn image(&self, handle: &str) -> Option<RasterImage> {
        self.get(handle).and_then(Artifact::image).cloned()
    }
}

/// One completed turn. Never modified after it is recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnRecord {
    pub turn: u64,
    pub query: String,
    /// Handles of this turn's uploaded images, in input order.
    pub input_handles: Vec<String>,
    /// Earlier artifacts the turn referred to.
    pub referenced: Vec<String>,
    pub goal: Goal,
    pub prompt: AssembledPrompt,
    pub plan: Plan,
    pub trace: Vec<TraceEvent>,
    pub response: String,
    /// Handles created by this turn.
    pub new_artifacts: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SessionState {
    pub session_id: String,
    /// Completed turns; always equal to `history.len()`.
    pub turn: u64,
    pub history: Vec<TurnRecord>,
    pub artifacts: ArtifactTable,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            ..Self::default()
        }
    }

    /// Every trace event of every turn, in order.
    pub fn trace(&self) -> Vec<&TraceEvent> {
        self.history.iter().flat_map(|t| t.trace.iter()).collect()
    }
}

/// Appends a turn and its artifacts. The turn counter advances by one.
pub fn update_memory(mut state: SessionState, record: TurnRecord, artifacts: Vec<Artifact>) -> SessionState {
    for a in artifacts {
        state.artifacts.insert(a);
    }
    state.history.push(record);
    state.turn = state.history.len() as u64;
    state
}

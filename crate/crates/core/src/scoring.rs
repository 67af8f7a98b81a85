//! Per-identity score vectors for tracks and their linear fusion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::select_main_face;
use crate::model::{
    face_embedding_key, EmbeddingSet, FaceIndex, Gallery, IdentityLabel, Modality, Track,
};

/// Default weight of the ReID score vector in the fused score.
pub const DEFAULT_ALPHA: f64 = 0.75;
/// Default minimum face detection confidence at inference time.
pub const DEFAULT_DET_INFERENCE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Reid,
    Face,
    Fused,
}

impl From<Modality> for ScoreSource {
    fn from(m: Modality) -> Self {
        match m {
            Modality::Reid => ScoreSource::Reid,
            Modality::Face => ScoreSource::Face,
        }
    }
}

/// Confidence per identity. Identities missing from the map score 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: BTreeMap<IdentityLabel, f64>,
    pub source: ScoreSource,
}

impl ScoreVector {
    pub fn zeros<'a>(
        identities: impl IntoIterator<Item = &'a IdentityLabel>,
        source: ScoreSource,
    ) -> Self {
        ScoreVector {
            scores: identities.into_iter().map(|id| (id.clone(), 0.0)).collect(),
            source,
        }
    }

    pub fn get(&self, id: &IdentityLabel) -> f64 {
        self.scores.get(id).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `(label, score)` of the maximum, ties resolved to the smallest label.
    pub fn best(&self) -> Option<(&IdentityLabel, f64)> {
        let mut best: Option<(&IdentityLabel, f64)> = None;
        for (id, &s) in &self.scores {
            match best {
                Some((_, b)) if s <= b => {}
                _ => best = Some((id, s)),
            }
        }
        best
    }
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(dot(u, v).clamp(-1.0, 1.0))
}

/// Maximum similarity between `query` and the gallery embeddings of `id`;
/// 0 when the gallery has no embeddings for `id`.
pub fn identity_confidence(query: &[f64], gallery: &Gallery, id: &IdentityLabel) -> f64 {
    gallery
        .vectors(id)
        .map(|v| dot(query, v).clamp(-1.0, 1.0))
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        })
        .unwrap_or(0.0)
}

/// Mean over `values`, summed in sorted order so the result does not depend
/// on input order.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean per-identity confidence of a set of images against `gallery`.
///
/// The result is keyed by the gallery's identities.
pub fn track_score_vector(images: &[&[f64]], gallery: &Gallery) -> Result<ScoreVector> {
    if images.is_empty() {
        return Err(Error::Empty(
            "track_score_vector needs at least one image".into(),
        ));
    }
    if !gallery.is_empty() {
        if let Some(bad) = images.iter().find(|v| v.len() != gallery.dim()) {
            return Err(Error::DimMismatch {
                expected: gallery.dim(),
                actual: bad.len(),
            });
        }
    }
    let mut buf = Vec::with_capacity(images.len());
    let scores = gallery
        .identities()
        .map(|id| {
            buf.clear();
            buf.extend(images.iter().map(|q| identity_confidence(q, gallery, id)));
            (id.clone(), order_free_mean(&mut buf))
        })
        .collect();
    Ok(ScoreVector {
        scores,
        source: gallery.modality().into(),
    })
}

/// `alpha * v_reid + (1 - alpha) * v_face`, per identity over the union of
/// both key sets. An identity missing from one vector scores 0 there.
pub fn fuse(v_reid: &ScoreVector, v_face: &ScoreVector, alpha: f64) -> Result<ScoreVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0,1]"
        )));
    }
    let mut scores = BTreeMap::new();
    for id in v_reid.scores.keys().chain(v_face.scores.keys()) {
        scores
            .entry(id.clone())
            .or_insert_with(|| alpha * v_reid.get(id) + (1.0 - alpha) * v_face.get(id));
    }
    Ok(ScoreVector {
        scores,
        source: ScoreSource::Fused,
    })
}

/// Argmax identity; ties go to the lexicographically smallest label.
pub fn predict_identity(v_pred: &ScoreVector) -> Result<IdentityLabel> {
    v_pred
        .best()
        .map(|(id, _)| id.clone())
        .ok_or_else(|| Error::Empty("cannot predict from an empty score vector".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams {
    pub alpha: f64,
    pub det_inference: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            alpha: DEFAULT_ALPHA,
            det_inference: DEFAULT_DET_INFERENCE,
        }
    }
}

/// Per-crop embeddings and face detections available to the predictor.
#[derive(Debug, Clone, Copy)]
pub struct SampleInputs<'a> {
    pub reid: &'a EmbeddingSet,
    pub face: Option<&'a EmbeddingSet>,
    pub faces: Option<&'a FaceIndex>,
}

impl<'a> SampleInputs<'a> {
    pub fn reid_only(reid: &'a EmbeddingSet) -> Self {
        SampleInputs {
            reid,
            face: None,
            faces: None,
        }
    }

    pub fn reid_vector(&self, sample_id: &str) -> Result<&'a [f64]> {
        self.reid
            .get(sample_id)
            .ok_or_else(|| Error::MissingEmbedding {
                modality: "reid".into(),
                sample_id: sample_id.into(),
            })
    }

    /// The verified main-person face of a crop: its detection confidence and
    /// embedding. `None` when no face passes pose verification, the chosen
    /// face is below `min_det`, or it has no embedding.
    pub fn verified_face(&self, sample_id: &str, min_det: f64) -> Option<(f64, &'a [f64])> {
        self.verified_face_any(sample_id)
            .filter(|(det, _)| *det >= min_det)
    }

    /// Like [`verified_face`](Self::verified_face) without the confidence floor.
    pub fn verified_face_any(&self, sample_id: &str) -> Option<(f64, &'a [f64])> {
        let (face_set, index) = (self.face?, self.faces?);
        let crop = index.get(sample_id)?;
        let chosen = select_main_face(&crop.faces, crop.keypoints.as_ref()).chosen_face_index?;
        let key = face_embedding_key(sample_id, chosen, crop.faces.len());
        let vector = face_set.get(&key)?;
        Some((crop.faces[chosen].det_conf, vector))
    }
}

/// The label of a track with the evidence it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: IdentityLabel,
    pub fused_scores: ScoreVector,
    /// Number of crops scored by the ReID module.
    pub n_images: usize,
    /// Number of crops that contributed a verified face.
    pub n_faces: usize,
}

/// Label a track from its ReID embeddings against `g_enriched` and its
/// verified faces against `g_face`. Without usable faces the face score
/// vector is all zeros.
pub fn predict_track(
    track: &Track,
    inputs: &SampleInputs<'_>,
    g_enriched: &Gallery,
    g_face: &Gallery,
    params: &ScoringParams,
) -> Result<Prediction> {
    if track.crops.is_empty() {
        return Err(Error::Empty(format!(
            "track ({}, {}) has no ReID embeddings",
            track.vid_name, track.track_id
        )));
    }
    let reid_images = track
        .crops
        .iter()
        .map(|c| inputs.reid_vector(&c.im_name))
        .collect::<Result<Vec<_>>>()?;
    let face_images: Vec<&[f64]> = track
        .crops
        .iter()
        .filter_map(|c| inputs.verified_face(&c.im_name, params.det_inference))
        .map(|(_, v)| v)
        .collect();

    let v_reid = track_score_vector(&reid_images, g_enriched)?;
    let v_face = if face_images.is_empty() {
        ScoreVector::zeros(g_face.identities(), ScoreSource::Face)
    } else {
        track_score_vector(&face_images, g_face)?
    };
    let fused_scores = fuse(&v_reid, &v_face, params.alpha)?;
    let label = predict_identity(&fused_scores)?;
    Ok(Prediction {
        label,
        fused_scores,
        n_images: reid_images.len(),
        n_faces: face_images.len(),
    })
}

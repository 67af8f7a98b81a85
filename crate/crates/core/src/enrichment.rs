//! Face-driven gallery enrichment.
//!
//! Labeled samples with a verified face seed a face gallery. Each unlabeled
//! query with a verified, confidently detected face is labeled by its face
//! similarity to that gallery, and confidently labeled queries join the ReID
//! gallery. In open-set mode a query whose face resembles nobody is added
//! under `Unknown`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Gallery, IdentityLabel, Modality, Provenance, UNKNOWN_LABEL};
use crate::scoring::{identity_confidence, SampleInputs, DEFAULT_DET_INFERENCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrichmentThresholds {
    /// Minimum face detection confidence for a face to enter or query the face gallery.
    pub det_enrich: f64,
    /// Minimum face detection confidence for a face to be scored at inference.
    pub det_inference: f64,
    /// Minimum best-identity similarity for a query to be labeled.
    pub sim_min: f64,
    /// Minimum gap between the best and second-best identity similarity.
    pub rank_diff_min: f64,
    /// In open-set mode, a best similarity below this marks the query `Unknown`.
    pub unknown_sim_max: f64,
    pub open_set: bool,
}

impl Default for EnrichmentThresholds {
    fn default() -> Self {
        ThresholdPreset::Street42.thresholds()
    }
}

impl EnrichmentThresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} = {v} outside [0,1]"
                )))
            }
        };
        let cosine = |name: &str, v: f64| {
            if (-1.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} = {v} outside [-1,1]"
                )))
            }
        };
        unit("det_enrich", self.det_enrich)?;
        unit("det_inference", self.det_inference)?;
        cosine("sim_min", self.sim_min)?;
        cosine("unknown_sim_max", self.unknown_sim_max)?;
        if self.rank_diff_min.is_nan() || self.rank_diff_min < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rank_diff_min = {} must be >= 0",
                self.rank_diff_min
            )));
        }
        if self.unknown_sim_max > self.sim_min {
            return Err(Error::InvalidArgument(format!(
                "unknown_sim_max ({}) must not exceed sim_min ({})",
                self.unknown_sim_max, self.sim_min
            )));
        }
        Ok(())
    }
}

/// Per-dataset threshold defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdPreset {
    #[serde(rename = "42street")]
    Street42,
    Ccvid,
    Ltcc,
    Prcc,
    Last,
}

impl ThresholdPreset {
    pub fn thresholds(self) -> EnrichmentThresholds {
        let (det_enrich, sim_min) = match self {
            ThresholdPreset::Street42 => (0.8, 0.4),
            ThresholdPreset::Ccvid => (0.5, 0.75),
            ThresholdPreset::Ltcc => (0.8, 0.5),
            ThresholdPreset::Prcc => (0.7, 0.65),
            ThresholdPreset::Last => (0.7, 0.45),
        };
        EnrichmentThresholds {
            det_enrich,
            det_inference: DEFAULT_DET_INFERENCE,
            sim_min,
            rank_diff_min: 0.1,
            unknown_sim_max: 0.3,
            open_set: false,
        }
    }
}

impl FromStr for ThresholdPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "42street" => Ok(ThresholdPreset::Street42),
            "ccvid" => Ok(ThresholdPreset::Ccvid),
            "ltcc" => Ok(ThresholdPreset::Ltcc),
            "prcc" => Ok(ThresholdPreset::Prcc),
            "last" => Ok(ThresholdPreset::Last),
            other => Err(Error::InvalidArgument(format!(
                "unknown threshold preset `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoVerifiedFace,
    LowDetection,
    LowSimilarity,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    Labeled(IdentityLabel),
    Unknown,
    Skipped(SkipReason),
}

impl Outcome {
    /// The gallery label this outcome contributes, if any.
    pub fn gallery_label(&self) -> Option<IdentityLabel> {
        match self {
            Outcome::Labeled(id) => Some(id.clone()),
            Outcome::Unknown => Some(IdentityLabel::Unknown),
            Outcome::Skipped(_) => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Labeled(_) => f.write_str("labeled"),
            Outcome::Unknown => f.write_str("unknown"),
            Outcome::Skipped(SkipReason::NoVerifiedFace) => f.write_str("skipped_no_verified_face"),
            Outcome::Skipped(SkipReason::LowDetection) => f.write_str("skipped_low_detection"),
            Outcome::Skipped(SkipReason::LowSimilarity) => f.write_str("skipped_low_similarity"),
            Outcome::Skipped(SkipReason::Ambiguous) => f.write_str("skipped_ambiguous"),
        }
    }
}

/// Audit record of how one query sample was handled.
///
/// `best_sim`, `rank_gap` and `det_conf` are `None` when the sample has no
/// verified face. `rank_gap` is infinite when the face gallery holds a single
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentDecision {
    pub sample_id: String,
    pub outcome: Outcome,
    pub best_sim: Option<f64>,
    pub rank_gap: Option<f64>,
    pub det_conf: Option<f64>,
}

impl EnrichmentDecision {
    fn no_face(sample_id: &str) -> Self {
        EnrichmentDecision {
            sample_id: sample_id.to_string(),
            outcome: Outcome::Skipped(SkipReason::NoVerifiedFace),
            best_sim: None,
            rank_gap: None,
            det_conf: None,
        }
    }
}

impl Serialize for EnrichmentDecision {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            sample_id: &'a str,
            outcome: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            label: Option<&'a str>,
            best_sim: Option<f64>,
            rank_gap: Option<f64>,
            det_conf: Option<f64>,
        }
        let label = match &self.outcome {
            Outcome::Labeled(id) => Some(id.as_str()),
            Outcome::Unknown => Some(UNKNOWN_LABEL),
            Outcome::Skipped(_) => None,
        };
        Record {
            sample_id: &self.sample_id,
            outcome: self.outcome.to_string(),
            label,
            best_sim: self.best_sim,
            rank_gap: self.rank_gap.filter(|g| g.is_finite()),
            det_conf: self.det_conf,
        }
        .serialize(serializer)
    }
}

/// A labeled reference sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub sample_id: String,
    pub label: IdentityLabel,
}

impl LabeledSample {
    pub fn new(sample_id: impl Into<String>, label: IdentityLabel) -> Self {
        LabeledSample {
            sample_id: sample_id.into(),
            label,
        }
    }
}

fn check_labeled(labeled: &[LabeledSample]) -> Result<()> {
    if let Some(s) = labeled.iter().find(|s| s.label.is_unknown()) {
        return Err(Error::InvalidArgument(format!(
            "labeled sample `{}` carries the Unknown sentinel",
            s.sample_id
        )));
    }
    Ok(())
}

/// Face gallery from every labeled sample whose main-person face is verified
/// and detected with confidence at least `det_enrich`.
pub fn build_face_gallery(
    labeled: &[LabeledSample],
    inputs: &SampleInputs<'_>,
    thresholds: &EnrichmentThresholds,
) -> Result<Gallery> {
    check_labeled(labeled)?;
    let mut gallery = Gallery::new(Modality::Face);
    for sample in labeled {
        if let Some((_, vector)) = inputs.verified_face(&sample.sample_id, thresholds.det_enrich) {
            gallery.insert(
                sample.label.clone(),
                sample.sample_id.clone(),
                vector,
                Provenance::OriginalLabeled,
            )?;
        }
    }
    if gallery.is_empty() {
        return Err(Error::Empty(
            "no labeled sample has a verified face above the enrichment detection threshold".into(),
        ));
    }
    Ok(gallery)
}

/// Where a query face lands against the face gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRanking {
    /// Best-scoring identity (ties to the smallest label).
    pub top: IdentityLabel,
    pub best_sim: f64,
    /// Best minus second-best identity score; infinite with a single identity.
    pub rank_gap: f64,
}

/// Rank the identities of `g_face` by their maximum similarity to `query_face`.
pub fn rank_face(query_face: &[f64], g_face: &Gallery) -> Result<FaceRanking> {
    if g_face.is_empty() {
        return Err(Error::Empty("face gallery is empty".into()));
    }
    if query_face.len() != g_face.dim() {
        return Err(Error::DimMismatch {
            expected: g_face.dim(),
            actual: query_face.len(),
        });
    }
    let mut best: Option<(&IdentityLabel, f64)> = None;
    let mut second = f64::NEG_INFINITY;
    for id in g_face.identities() {
        let s = identity_confidence(query_face, g_face, id);
        match best {
            Some((_, b)) if s <= b => second = second.max(s),
            Some((_, b)) => {
                second = second.max(b);
                best = Some((id, s));
            }
            None => best = Some((id, s)),
        }
    }
    let (top, best_sim) = best.expect("non-empty gallery has an identity");
    Ok(FaceRanking {
        top: top.clone(),
        best_sim,
        rank_gap: best_sim - second,
    })
}

/// Apply the enrichment criteria to a ranked query face.
///
/// Checked in order: detection confidence, open-set `Unknown` (best
/// similarity below `unknown_sim_max`), minimum similarity, rank gap. A
/// failed rank gap is a skip, never `Unknown`.
pub fn classify_ranking(
    ranking: &FaceRanking,
    det_conf: f64,
    thresholds: &EnrichmentThresholds,
) -> Outcome {
    if det_conf < thresholds.det_enrich {
        Outcome::Skipped(SkipReason::LowDetection)
    } else if thresholds.open_set && ranking.best_sim < thresholds.unknown_sim_max {
        Outcome::Unknown
    } else if ranking.best_sim < thresholds.sim_min {
        Outcome::Skipped(SkipReason::LowSimilarity)
    } else if ranking.rank_gap < thresholds.rank_diff_min {
        Outcome::Skipped(SkipReason::Ambiguous)
    } else {
        Outcome::Labeled(ranking.top.clone())
    }
}

/// Decide how a query with a verified face enters the enriched gallery.
pub fn decide_query_label(
    sample_id: &str,
    query_face: &[f64],
    det_conf: f64,
    g_face: &Gallery,
    thresholds: &EnrichmentThresholds,
) -> Result<EnrichmentDecision> {
    let ranking = rank_face(query_face, g_face)?;
    Ok(EnrichmentDecision {
        sample_id: sample_id.to_string(),
        outcome: classify_ranking(&ranking, det_conf, thresholds),
        best_sim: Some(ranking.best_sim),
        rank_gap: Some(ranking.rank_gap),
        det_conf: Some(det_conf),
    })
}

/// Select `round(fraction * n)` queries as a prefix of a seeded permutation,
/// returned in input order. Larger fractions select supersets.
pub fn subsample_queries(queries: &[String], fraction: f64, seed: u64) -> Result<Vec<&str>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "enrichment_fraction {fraction} outside [0,1]"
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = queries.iter().find(|q| !seen.insert(q.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "duplicate query sample `{dup}`"
        )));
    }
    let take = (fraction * queries.len() as f64).round() as usize;
    if take == queries.len() {
        return Ok(queries.iter().map(String::as_str).collect());
    }
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].cmp(&queries[b]));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = order[..take].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| queries[i].as_str()).collect())
}

/// ReID gallery of the labeled samples only.
pub fn plain_gallery(labeled: &[LabeledSample], inputs: &SampleInputs<'_>) -> Result<Gallery> {
    check_labeled(labeled)?;
    let mut gallery = Gallery::new(Modality::Reid);
    for sample in labeled {
        let v = inputs.reid_vector(&sample.sample_id)?;
        gallery.insert(
            sample.label.clone(),
            sample.sample_id.clone(),
            v,
            Provenance::OriginalLabeled,
        )?;
    }
    Ok(gallery)
}

#[derive(Debug, Clone)]
pub struct Enrichment {
    pub g_enriched: Gallery,
    pub g_face: Gallery,
    pub decisions: Vec<EnrichmentDecision>,
}

/// Build the face gallery, decide every sub-sampled query, and assemble the
/// enriched ReID gallery.
pub fn enrich_gallery(
    labeled: &[LabeledSample],
    queries: &[String],
    inputs: &SampleInputs<'_>,
    thresholds: &EnrichmentThresholds,
    enrichment_fraction: f64,
    seed: u64,
) -> Result<Enrichment> {
    if labeled.is_empty() {
        return Err(Error::Empty("no labeled samples".into()));
    }
    thresholds.validate()?;
    let g_face = build_face_gallery(labeled, inputs, thresholds)?;
    let pool = subsample_queries(queries, enrichment_fraction, seed)?;

    let decisions = pool
        .par_iter()
        .map(|&sample_id| match inputs.verified_face_any(sample_id) {
            None => Ok(EnrichmentDecision::no_face(sample_id)),
            Some((det, face)) => decide_query_label(sample_id, face, det, &g_face, thresholds),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut g_enriched = plain_gallery(labeled, inputs)?;
    for decision in &decisions {
        if let Some(label) = decision.outcome.gallery_label() {
            let v = inputs.reid_vector(&decision.sample_id)?;
            g_enriched.insert(
                label,
                decision.sample_id.clone(),
                v,
                Provenance::EnrichedFromQuery,
            )?;
        }
    }
    Ok(Enrichment {
        g_enriched,
        g_face,
        decisions,
    })
}

//! Retrieval and classification metrics, evaluation settings, and the
//! detection/similarity threshold sweep.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enrichment::{
    classify_ranking, rank_face, EnrichmentThresholds, FaceRanking, LabeledSample, Outcome,
};
use crate::error::{Error, Result};
use crate::model::{Gallery, IdentityLabel, Modality, Provenance};
use crate::scoring::{dot, SampleInputs, ScoreVector};

pub const DEFAULT_MIN_TRACK_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClothesMode {
    General,
    SameClothes,
    ClothesChanging,
}

impl FromStr for ClothesMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(ClothesMode::General),
            "sc" | "same_clothes" => Ok(ClothesMode::SameClothes),
            "cc" | "clothes_changing" => Ok(ClothesMode::ClothesChanging),
            other => Err(Error::InvalidArgument(format!(
                "unknown clothes setting `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMode {
    Open,
    Closed,
}

impl FromStr for SetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(SetMode::Open),
            "closed" => Ok(SetMode::Closed),
            other => Err(Error::InvalidArgument(format!(
                "unknown set mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSetting {
    pub clothes_mode: ClothesMode,
    pub set_mode: SetMode,
    pub min_track_len: usize,
}

impl Default for EvalSetting {
    fn default() -> Self {
        EvalSetting {
            clothes_mode: ClothesMode::General,
            set_mode: SetMode::Closed,
            min_track_len: DEFAULT_MIN_TRACK_LEN,
        }
    }
}

impl EvalSetting {
    pub fn validate(&self) -> Result<()> {
        if self.min_track_len == 0 {
            return Err(Error::InvalidArgument(
                "min_track_len must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Gallery,
    Query,
}

/// Evaluation metadata of one sample (one line of the metadata file).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub label: IdentityLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clothes_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_id: Option<String>,
    pub split: Split,
}

/// A rankable gallery item.
#[derive(Debug, Clone, Copy)]
pub struct RankItem<'a> {
    pub sample_id: &'a str,
    pub label: &'a IdentityLabel,
    pub clothes_id: Option<&'a str>,
    pub provenance: Provenance,
    pub vector: &'a [f64],
}

/// Drop gallery items according to the clothes setting of `query`.
///
/// Only items of the query's identity are affected: same-clothes drops those
/// in other clothes, clothes-changing drops those in the query's clothes.
/// Items that came from enrichment carry no clothes ground truth and are kept;
/// the query's own enriched copy is always removed.
pub fn apply_setting_filter<'a>(
    query: &SampleMeta,
    gallery: &[RankItem<'a>],
    setting: &EvalSetting,
) -> Result<Vec<RankItem<'a>>> {
    let needs_clothes = setting.clothes_mode != ClothesMode::General;
    let query_clothes = if needs_clothes {
        Some(query.clothes_id.as_deref().ok_or_else(|| {
            Error::InvalidArgument(format!("query `{}` has no clothes_id", query.sample_id))
        })?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(gallery.len());
    for item in gallery {
        if item.sample_id == query.sample_id {
            continue;
        }
        let labeled = item.provenance == Provenance::OriginalLabeled;
        if needs_clothes && labeled && *item.label == query.label {
            let clothes = item.clothes_id.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "gallery sample `{}` has no clothes_id",
                    item.sample_id
                ))
            })?;
            let same = Some(clothes) == query_clothes;
            let keep = match setting.clothes_mode {
                ClothesMode::SameClothes => same,
                ClothesMode::ClothesChanging => !same,
                ClothesMode::General => true,
            };
            if !keep {
                continue;
            }
        }
        out.push(*item);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOutcome {
    pub top1_hit: bool,
    pub average_precision: f64,
}

/// Average precision of a ranked relevance list: the mean, over relevant
/// positions `k` (1-based), of the fraction of relevant items in the top `k`.
pub fn average_precision(relevance: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Rank the filtered gallery by similarity to the query. `None` when the
/// filtered gallery has no item of the query's identity (the query is excluded).
pub fn rank_metrics(
    query_vec: &[f64],
    query_meta: &SampleMeta,
    gallery: &[RankItem<'_>],
    setting: &EvalSetting,
) -> Result<Option<RankOutcome>> {
    let filtered = apply_setting_filter(query_meta, gallery, setting)?;
    if !filtered.iter().any(|g| *g.label == query_meta.label) {
        return Ok(None);
    }
    let mut scored: Vec<(f64, bool)> = filtered
        .iter()
        .map(|g| (dot(query_vec, g.vector), *g.label == query_meta.label))
        .collect();
    // Stable: equal similarities keep gallery order.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let relevance: Vec<bool> = scored.iter().map(|s| s.1).collect();
    Ok(Some(RankOutcome {
        top1_hit: relevance[0],
        average_precision: average_precision(&relevance).unwrap_or(0.0),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedGeneral {
    pub top1: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Fraction of evaluated queries (or tracks) labeled correctly at rank 1.
    pub top1: f64,
    /// Mean average precision; `None` for configurations that do not rank the gallery.
    pub map: Option<f64>,
    pub per_image_acc: Option<f64>,
    pub per_track_acc: Option<f64>,
    pub n_queries_evaluated: usize,
    pub n_queries_excluded: usize,
    /// General setting recomputed as the query-weighted average of the
    /// same-clothes and clothes-changing results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_general: Option<WeightedGeneral>,
}

/// Retrieval metrics for a set of queries against one gallery.
pub fn evaluate_ranking(
    queries: &[(&SampleMeta, &[f64])],
    gallery: &[RankItem<'_>],
    setting: &EvalSetting,
) -> Result<MetricsReport> {
    let outcomes = queries
        .par_iter()
        .map(|(meta, v)| rank_metrics(v, meta, gallery, setting))
        .collect::<Result<Vec<_>>>()?;
    let evaluated: Vec<RankOutcome> = outcomes.iter().flatten().copied().collect();
    let n = evaluated.len();
    let (top1, map) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            evaluated.iter().filter(|o| o.top1_hit).count() as f64 / n as f64,
            evaluated.iter().map(|o| o.average_precision).sum::<f64>() / n as f64,
        )
    };
    Ok(MetricsReport {
        top1,
        map: Some(map),
        per_image_acc: None,
        per_track_acc: None,
        n_queries_evaluated: n,
        n_queries_excluded: queries.len() - n,
        weighted_general: None,
    })
}

/// Combine same-clothes and clothes-changing results, weighted by the number
/// of queries each one evaluated.
pub fn weighted_general(sc: &MetricsReport, cc: &MetricsReport) -> Option<WeightedGeneral> {
    let (ns, nc) = (sc.n_queries_evaluated as f64, cc.n_queries_evaluated as f64);
    if ns + nc == 0.0 {
        return None;
    }
    let w = |a: f64, b: f64| (a * ns + b * nc) / (ns + nc);
    Some(WeightedGeneral {
        top1: w(sc.top1, cc.top1),
        map: w(sc.map.unwrap_or(0.0), cc.map.unwrap_or(0.0)),
    })
}

/// Correct / evaluated counts with the number of excluded items.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub evaluated: usize,
    pub excluded: usize,
}

impl Accuracy {
    pub fn rate(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.correct as f64 / self.evaluated as f64)
    }
}

/// The label a prediction must match, or `None` when the item is excluded.
fn expected_label(
    truth: &IdentityLabel,
    gallery_ids: &BTreeSet<IdentityLabel>,
    mode: SetMode,
) -> Option<IdentityLabel> {
    if gallery_ids.contains(truth) {
        Some(truth.clone())
    } else {
        match mode {
            SetMode::Open => Some(IdentityLabel::Unknown),
            SetMode::Closed => None,
        }
    }
}

/// Fraction of crops labeled correctly.
///
/// Closed-set ignores crops whose true identity is not in the gallery; open-set
/// expects `Unknown` for them.
pub fn per_image_accuracy(
    predictions: &[(String, IdentityLabel)],
    ground_truth: &HashMap<String, IdentityLabel>,
    gallery_ids: &BTreeSet<IdentityLabel>,
    setting: &EvalSetting,
) -> Result<Accuracy> {
    let mut acc = Accuracy::default();
    for (sample_id, predicted) in predictions {
        let truth = ground_truth.get(sample_id).ok_or_else(|| {
            Error::InvalidArgument(format!("prediction for unknown sample `{sample_id}`"))
        })?;
        match expected_label(truth, gallery_ids, setting.set_mode) {
            Some(expected) => {
                acc.evaluated += 1;
                acc.correct += usize::from(*predicted == expected);
            }
            None => acc.excluded += 1,
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutcome {
    pub n_crops: usize,
    pub predicted: IdentityLabel,
    pub ground_truth: Option<IdentityLabel>,
}

/// Fraction of tracks labeled correctly. Tracks shorter than
/// `min_track_len`, or without ground truth, are excluded.
pub fn per_track_accuracy(
    tracks: &[TrackOutcome],
    gallery_ids: &BTreeSet<IdentityLabel>,
    setting: &EvalSetting,
) -> Accuracy {
    let mut acc = Accuracy::default();
    for t in tracks {
        let expected = t
            .ground_truth
            .as_ref()
            .filter(|_| t.n_crops >= setting.min_track_len)
            .and_then(|gt| expected_label(gt, gallery_ids, setting.set_mode));
        match expected {
            Some(expected) => {
                acc.evaluated += 1;
                acc.correct += usize::from(t.predicted == expected);
            }
            None => acc.excluded += 1,
        }
    }
    acc
}

/// Single label for a track from per-image score vectors: the identity with
/// the highest confidence over all images (ties to the smallest label).
pub fn image_model_track_vote(per_image: &[ScoreVector]) -> Result<IdentityLabel> {
    let mut best: Option<(&IdentityLabel, f64)> = None;
    for (id, s) in per_image
        .iter()
        .flat_map(|v| v.scores.iter().map(|(id, s)| (id, *s)))
    {
        match best {
            Some((b_id, b)) if s < b || (s == b && b_id <= id) => {}
            _ => best = Some((id, s)),
        }
    }
    best.map(|(id, _)| id.clone())
        .ok_or_else(|| Error::Empty("no per-image scores to vote over".into()))
}

/// A grid of `(detection, similarity)` threshold pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub points: Vec<(f64, f64)>,
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || {
        Error::InvalidArgument(format!(
            "bad range `{spec}` (expected start:end:step or a value)"
        ))
    };
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [v] => Ok(vec![*v]),
        [start, end, step] if *step > 0.0 && end >= start => {
            let n = ((end - start) / step + 1e-9).floor() as usize;
            // Rounded to 1e-10 so 0.5 + 2 * 0.1 prints as 0.7.
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                .collect())
        }
        _ => Err(bad()),
    }
}

impl FromStr for SweepGrid {
    type Err = Error;

    /// `det=START:END:STEP,sim=START:END:STEP`; either side may be a single value.
    fn from_str(s: &str) -> Result<Self> {
        let mut det = None;
        let mut sim = None;
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("bad grid component `{part}`")))?;
            match key.trim() {
                "det" => det = Some(parse_range(value)?),
                "sim" => sim = Some(parse_range(value)?),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown grid axis `{other}`"
                    )))
                }
            }
        }
        let (det, sim) = match (det, sim) {
            (Some(d), Some(s)) => (d, s),
            _ => {
                return Err(Error::InvalidArgument(
                    "grid needs both det= and sim=".into(),
                ))
            }
        };
        let points = det
            .iter()
            .flat_map(|&d| sim.iter().map(move |&s| (d, s)))
            .collect();
        Ok(SweepGrid { points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub det: f64,
    pub sim: f64,
    /// Fraction of labeled decisions that are correct; `None` with no decisions.
    pub accuracy: Option<f64>,
    pub unique_identities: usize,
    pub n_decisions: usize,
}

/// Split each identity's samples with a seeded shuffle: the first half
/// (rounded up) forms the reference face gallery, the rest are withheld queries.
pub fn split_reference_and_queries(
    train: &[LabeledSample],
    seed: u64,
) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut by_id: BTreeMap<&IdentityLabel, Vec<&LabeledSample>> = BTreeMap::new();
    for s in train {
        by_id.entry(&s.label).or_default().push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut reference, mut queries) = (Vec::new(), Vec::new());
    for (_, mut samples) in by_id {
        samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        samples.shuffle(&mut rng);
        let keep = samples.len().div_ceil(2);
        reference.extend(samples[..keep].iter().map(|s| (*s).clone()));
        queries.extend(samples[keep..].iter().map(|s| (*s).clone()));
    }
    (reference, queries)
}

/// Evaluate face-based labeling over a grid of detection and similarity
/// thresholds on labeled training data.
///
/// The training pool is split per identity into a reference face gallery
/// (every verified face, regardless of detection confidence) and withheld
/// queries. Each grid point applies the closed-set enrichment criteria with
/// its own detection and similarity thresholds; `base` supplies the rank-gap
/// threshold. Results are sorted by accuracy, then by unique identities.
pub fn threshold_sweep(
    train: &[LabeledSample],
    inputs: &SampleInputs<'_>,
    grid: &SweepGrid,
    base: &EnrichmentThresholds,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if grid.points.is_empty() {
        return Err(Error::Empty("threshold grid is empty".into()));
    }
    let (reference, queries) = split_reference_and_queries(train, seed);
    let mut g_face = Gallery::new(Modality::Face);
    for s in &reference {
        if let Some((_, v)) = inputs.verified_face_any(&s.sample_id) {
            g_face.insert(
                s.label.clone(),
                s.sample_id.clone(),
                v,
                Provenance::OriginalLabeled,
            )?;
        }
    }
    if g_face.is_empty() {
        return Err(Error::Empty(
            "no verified faces in the reference half of the training pool".into(),
        ));
    }

    let ranked: Vec<(&IdentityLabel, f64, FaceRanking)> = queries
        .par_iter()
        .filter_map(|q| {
            inputs
                .verified_face_any(&q.sample_id)
                .map(|(det, v)| (q, det, v))
        })
        .map(|(q, det, v)| rank_face(v, &g_face).map(|r| (&q.label, det, r)))
        .collect::<Result<_>>()?;

    let mut report: Vec<SweepPoint> = grid
        .points
        .iter()
        .map(|&(det, sim)| {
            let thresholds = EnrichmentThresholds {
                det_enrich: det,
                sim_min: sim,
                open_set: false,
                ..*base
            };
            let mut correct = 0usize;
            let mut decided = 0usize;
            let mut unique = HashSet::new();
            for (truth, det_conf, ranking) in &ranked {
                if let Outcome::Labeled(predicted) =
                    classify_ranking(ranking, *det_conf, &thresholds)
                {
                    decided += 1;
                    correct += usize::from(predicted == **truth);
                    unique.insert(predicted);
                }
            }
            SweepPoint {
                det,
                sim,
                accuracy: (decided > 0).then(|| correct as f64 / decided as f64),
                unique_identities: unique.len(),
                n_decisions: decided,
            }
        })
        .collect();

    report.sort_by(|a, b| {
        let acc = match (a.accuracy, b.accuracy) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        acc.then(b.unique_identities.cmp(&a.unique_identities))
    });
    Ok(report)
}

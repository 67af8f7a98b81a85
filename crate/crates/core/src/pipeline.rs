//! End-to-end orchestration: load a run configuration and its inputs, build
//! the face and enriched galleries, and label every query track.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_face_features, ClusterReport, KMeansParams};
use crate::enrichment::{
    build_face_gallery, enrich_gallery, plain_gallery, EnrichmentDecision, EnrichmentThresholds,
    LabeledSample, ThresholdPreset,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_ranking, image_model_track_vote, per_image_accuracy, per_track_accuracy,
    threshold_sweep, weighted_general, ClothesMode, EvalSetting, MetricsReport, RankItem,
    SampleMeta, SetMode, Split, SweepGrid, SweepPoint, TrackOutcome,
};
use crate::io;
use crate::model::{
    build_tracks, load_crop_manifest, load_embeddings, load_face_observations, CropManifest,
    EmbeddingSet, FaceIndex, Gallery, IdentityLabel, Modality, Provenance, Track,
};
use crate::scoring::{predict_track, SampleInputs, ScoringParams, DEFAULT_ALPHA};
use crate::synth::SyntheticSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// Labeled reference crops.
    pub gallery_manifest: Option<PathBuf>,
    /// Crops to label; labels here are ground truth used only for evaluation.
    pub query_manifest: Option<PathBuf>,
    pub reid_embeddings: Option<PathBuf>,
    pub face_embeddings: Option<PathBuf>,
    pub face_observations: Option<PathBuf>,
    /// Per-sample identity, clothes and split for retrieval evaluation.
    pub metadata: Option<PathBuf>,
}

impl InputPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.gallery_manifest,
            &mut self.query_manifest,
            &mut self.reid_embeddings,
            &mut self.face_embeddings,
            &mut self.face_observations,
            &mut self.metadata,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn all(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.gallery_manifest,
            &self.query_manifest,
            &self.reid_embeddings,
            &self.face_embeddings,
            &self.face_observations,
            &self.metadata,
        ]
        .into_iter()
        .flatten()
    }
}

/// Threshold fields set explicitly in a config file, applied on top of a preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOverrides {
    pub det_enrich: Option<f64>,
    pub det_inference: Option<f64>,
    pub sim_min: Option<f64>,
    pub rank_diff_min: Option<f64>,
    pub unknown_sim_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One prediction per track from its pooled score vectors.
    #[default]
    Track,
    /// One prediction per crop; tracks take the most confident crop's label.
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub alpha: f64,
    pub seed: u64,
    pub enrichment: bool,
    pub enrichment_fraction: f64,
    pub granularity: Granularity,
    pub preset: ThresholdPreset,
    pub thresholds: ThresholdOverrides,
    pub setting: EvalSetting,
    /// Threshold grid for `sweep`, in `det=START:END:STEP,sim=START:END:STEP` form.
    pub grid: Option<String>,
    /// Base generator parameters for `synth`.
    pub synthetic: Option<SyntheticSpec>,
}

/// Detection and similarity ranges of the default threshold sweep.
pub const DEFAULT_SWEEP_GRID: &str = "det=0.5:0.9:0.1,sim=0.3:0.8:0.05";

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputPaths::default(),
            alpha: DEFAULT_ALPHA,
            seed: 0,
            enrichment: true,
            enrichment_fraction: 1.0,
            granularity: Granularity::Track,
            preset: ThresholdPreset::Street42,
            thresholds: ThresholdOverrides::default(),
            setting: EvalSetting::default(),
            grid: None,
            synthetic: None,
        }
    }
}

impl RunConfig {
    /// Parse a TOML config. Relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.inputs.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Effective thresholds: preset, then explicit overrides; open-set follows the evaluation setting.
    pub fn thresholds(&self) -> EnrichmentThresholds {
        let mut t = self.preset.thresholds();
        let o = &self.thresholds;
        t.det_enrich = o.det_enrich.unwrap_or(t.det_enrich);
        t.det_inference = o.det_inference.unwrap_or(t.det_inference);
        t.sim_min = o.sim_min.unwrap_or(t.sim_min);
        t.rank_diff_min = o.rank_diff_min.unwrap_or(t.rank_diff_min);
        t.unknown_sim_max = o.unknown_sim_max.unwrap_or(t.unknown_sim_max);
        t.open_set = self.setting.set_mode == SetMode::Open;
        t
    }

    pub fn scoring(&self) -> ScoringParams {
        ScoringParams {
            alpha: self.alpha,
            det_inference: self.thresholds().det_inference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0,1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.enrichment_fraction) {
            return Err(Error::Config(format!(
                "enrichment_fraction {} outside [0,1]",
                self.enrichment_fraction
            )));
        }
        self.thresholds().validate()?;
        self.setting.validate()?;
        for p in self.inputs.all() {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("`inputs.{name}` is required")))
}

/// All inputs of a run, loaded and validated.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub gallery: CropManifest,
    pub query: CropManifest,
    pub reid: EmbeddingSet,
    pub face: Option<EmbeddingSet>,
    pub faces: Option<FaceIndex>,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let gallery =
            load_crop_manifest(required(&cfg.inputs.gallery_manifest, "gallery_manifest")?)?;
        let query = match &cfg.inputs.query_manifest {
            Some(p) => load_crop_manifest(p)?,
            None => CropManifest::default(),
        };
        let reid = load_embeddings(
            required(&cfg.inputs.reid_embeddings, "reid_embeddings")?,
            Modality::Reid,
        )?;
        let (face, faces) = load_face_inputs(&cfg.inputs)?;
        Ok(Dataset {
            gallery,
            query,
            reid,
            face,
            faces,
        })
    }

    pub fn inputs(&self) -> SampleInputs<'_> {
        SampleInputs {
            reid: &self.reid,
            face: self.face.as_ref(),
            faces: self.faces.as_ref(),
        }
    }

    pub fn has_faces(&self) -> bool {
        matches!((&self.face, &self.faces), (Some(f), Some(o)) if !f.is_empty() && !o.is_empty())
    }

    /// Valid crops of the gallery manifest; each must carry a named identity.
    pub fn labeled_samples(&self) -> Result<Vec<LabeledSample>> {
        labeled_from_manifest(&self.gallery)
    }

    /// Valid crops of the query manifest.
    pub fn query_ids(&self) -> Vec<String> {
        self.query
            .iter()
            .filter(|c| !c.invalid)
            .map(|c| c.im_name.clone())
            .collect()
    }
}

fn load_face_inputs(paths: &InputPaths) -> Result<(Option<EmbeddingSet>, Option<FaceIndex>)> {
    match (&paths.face_embeddings, &paths.face_observations) {
        (Some(e), Some(o)) => {
            let face = load_embeddings(e, Modality::Face)?;
            let mut faces = load_face_observations(o)?;
            faces.link_embeddings(&face);
            Ok((Some(face), Some(faces)))
        }
        (None, None) => Ok((None, None)),
        _ => Err(Error::Config(
            "face_embeddings and face_observations must be given together".into(),
        )),
    }
}

pub fn labeled_from_manifest(manifest: &CropManifest) -> Result<Vec<LabeledSample>> {
    manifest
        .iter()
        .filter(|c| !c.invalid)
        .map(|c| match &c.label {
            Some(IdentityLabel::Known(name)) => Ok(LabeledSample::new(
                c.im_name.clone(),
                IdentityLabel::Known(name.clone()),
            )),
            _ => Err(Error::Integrity(format!(
                "gallery crop `{}` must carry a named identity label",
                c.im_name
            ))),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Galleries {
    pub g_enriched: Gallery,
    pub g_face: Gallery,
    pub decisions: Vec<EnrichmentDecision>,
}

/// Build the ReID and face galleries for a run.
///
/// Without face inputs there is nothing to enrich with: the ReID gallery is
/// the labeled set and the face gallery is empty.
pub fn build_galleries(ds: &Dataset, cfg: &RunConfig) -> Result<Galleries> {
    let labeled = ds.labeled_samples()?;
    let inputs = ds.inputs();
    let thresholds = cfg.thresholds();
    if !ds.has_faces() {
        warn!("no face inputs; running ReID only");
        return Ok(Galleries {
            g_enriched: plain_gallery(&labeled, &inputs)?,
            g_face: Gallery::new(Modality::Face),
            decisions: Vec::new(),
        });
    }
    if cfg.enrichment {
        let e = enrich_gallery(
            &labeled,
            &ds.query_ids(),
            &inputs,
            &thresholds,
            cfg.enrichment_fraction,
            cfg.seed,
        )?;
        info!(
            "enriched gallery: {} labeled + {} from queries",
            labeled.len(),
            e.g_enriched.len() - labeled.len()
        );
        Ok(Galleries {
            g_enriched: e.g_enriched,
            g_face: e.g_face,
            decisions: e.decisions,
        })
    } else {
        Ok(Galleries {
            g_enriched: plain_gallery(&labeled, &inputs)?,
            g_face: build_face_gallery(&labeled, &inputs, &thresholds)?,
            decisions: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPredictionRecord {
    pub vid_name: String,
    pub track_id: i64,
    pub label: IdentityLabel,
    pub score_vector: BTreeMap<IdentityLabel, f64>,
    pub n_images: usize,
    pub n_faces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPredictionRecord {
    pub im_name: String,
    pub label: IdentityLabel,
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionLine {
    Track(TrackPredictionRecord),
    Crop(CropPredictionRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPrediction {
    pub track: TrackPredictionRecord,
    pub crops: Vec<CropPredictionRecord>,
}

#[derive(Debug, Clone)]
pub struct AnnotatedPredictions {
    /// Ordered by `(vid_name, track_id)`.
    pub tracks: Vec<TrackPrediction>,
    pub decisions: Vec<EnrichmentDecision>,
}

impl AnnotatedPredictions {
    /// Each track record followed by the records of its crops.
    pub fn lines(&self) -> impl Iterator<Item = PredictionLine> + '_ {
        self.tracks.iter().flat_map(|t| {
            std::iter::once(PredictionLine::Track(t.track.clone()))
                .chain(t.crops.iter().cloned().map(PredictionLine::Crop))
        })
    }

    pub fn write_to<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        io::write_jsonl_to(writer, self.lines())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, self.lines())
    }
}

fn predict_one(
    track: &Track,
    inputs: &SampleInputs<'_>,
    galleries: &Galleries,
    params: &ScoringParams,
    granularity: Granularity,
) -> Result<TrackPrediction> {
    let crops_with = |label: &IdentityLabel| {
        track
            .crops
            .iter()
            .map(|c| CropPredictionRecord {
                im_name: c.im_name.clone(),
                label: label.clone(),
            })
            .collect()
    };
    match granularity {
        Granularity::Track => {
            let p = predict_track(
                track,
                inputs,
                &galleries.g_enriched,
                &galleries.g_face,
                params,
            )?;
            Ok(TrackPrediction {
                crops: crops_with(&p.label),
                track: TrackPredictionRecord {
                    vid_name: track.vid_name.clone(),
                    track_id: track.track_id,
                    label: p.label,
                    score_vector: p.fused_scores.scores,
                    n_images: p.n_images,
                    n_faces: p.n_faces,
                },
            })
        }
        Granularity::Image => {
            let per_crop = track
                .crops
                .iter()
                .map(|c| {
                    let single = Track::singleton(c.clone());
                    predict_track(
                        &single,
                        inputs,
                        &galleries.g_enriched,
                        &galleries.g_face,
                        params,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<_> = per_crop.iter().map(|p| p.fused_scores.clone()).collect();
            let label = image_model_track_vote(&scores)?;
            let mut score_vector: BTreeMap<IdentityLabel, f64> = BTreeMap::new();
            for s in &scores {
                for (id, &v) in &s.scores {
                    score_vector
                        .entry(id.clone())
                        .and_modify(|m| *m = m.max(v))
                        .or_insert(v);
                }
            }
            Ok(TrackPrediction {
                crops: track
                    .crops
                    .iter()
                    .zip(&per_crop)
                    .map(|(c, p)| CropPredictionRecord {
                        im_name: c.im_name.clone(),
                        label: p.label.clone(),
                    })
                    .collect(),
                track: TrackPredictionRecord {
                    vid_name: track.vid_name.clone(),
                    track_id: track.track_id,
                    label,
                    score_vector,
                    n_images: per_crop.iter().map(|p| p.n_images).sum(),
                    n_faces: per_crop.iter().map(|p| p.n_faces).sum(),
                },
            })
        }
    }
}

/// Label every query track of a loaded dataset.
pub fn annotate_dataset(ds: &Dataset, cfg: &RunConfig) -> Result<AnnotatedPredictions> {
    let galleries = build_galleries(ds, cfg)?;
    let tracks = build_tracks(&ds.query)?;
    let inputs = ds.inputs();
    let params = cfg.scoring();
    let predictions = tracks
        .tracks
        .par_iter()
        .map(|t| predict_one(t, &inputs, &galleries, &params, cfg.granularity))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnnotatedPredictions {
        tracks: predictions,
        decisions: galleries.decisions,
    })
}

/// Load the configured inputs and label every query track.
pub fn annotate(cfg: &RunConfig) -> Result<AnnotatedPredictions> {
    cfg.validate()?;
    let ds = Dataset::load(cfg)?;
    annotate_dataset(&ds, cfg)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionLine>> {
    Ok(io::read_jsonl(path)?.into_iter().map(|(_, l)| l).collect())
}

/// Identities of the labeled gallery.
pub fn gallery_identities(gallery: &CropManifest) -> BTreeSet<IdentityLabel> {
    gallery
        .iter()
        .filter(|c| !c.invalid)
        .filter_map(|c| c.label.clone())
        .collect()
}

/// Per-image and per-track accuracy of a prediction file against the ground
/// truth in the query manifest. `top1` is the per-track accuracy.
pub fn evaluate_predictions(
    predictions: &[PredictionLine],
    query: &CropManifest,
    gallery_ids: &BTreeSet<IdentityLabel>,
    setting: &EvalSetting,
) -> Result<MetricsReport> {
    let crops = query.by_name();
    let mut ground_truth = HashMap::new();
    let mut crop_preds = Vec::new();
    let mut unlabeled = 0usize;
    for line in predictions {
        if let PredictionLine::Crop(c) = line {
            let crop = crops.get(c.im_name.as_str()).ok_or_else(|| {
                Error::InvalidArgument(format!("prediction for unknown sample `{}`", c.im_name))
            })?;
            match &crop.label {
                Some(gt) => {
                    ground_truth.insert(c.im_name.clone(), gt.clone());
                    crop_preds.push((c.im_name.clone(), c.label.clone()));
                }
                None => unlabeled += 1,
            }
        }
    }
    let image_acc = per_image_accuracy(&crop_preds, &ground_truth, gallery_ids, setting)?;
    if unlabeled > 0 {
        warn!("{unlabeled} predicted crops have no ground truth and were skipped");
    }

    let tracks: HashMap<(String, i64), Track> = build_tracks(query)?
        .tracks
        .into_iter()
        .map(|t| ((t.vid_name.clone(), t.track_id), t))
        .collect();
    let mut outcomes = Vec::new();
    for line in predictions {
        if let PredictionLine::Track(t) = line {
            let truth = tracks
                .get(&(t.vid_name.clone(), t.track_id))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "prediction for unknown track ({}, {})",
                        t.vid_name, t.track_id
                    ))
                })?;
            outcomes.push(TrackOutcome {
                n_crops: truth.len(),
                predicted: t.label.clone(),
                ground_truth: truth.ground_truth.clone(),
            });
        }
    }
    let track_acc = per_track_accuracy(&outcomes, gallery_ids, setting);
    Ok(MetricsReport {
        top1: track_acc.rate().unwrap_or(0.0),
        map: None,
        per_image_acc: image_acc.rate(),
        per_track_acc: track_acc.rate(),
        n_queries_evaluated: track_acc.evaluated,
        n_queries_excluded: track_acc.excluded,
        weighted_general: None,
    })
}

pub fn load_metadata(path: &Path) -> Result<Vec<SampleMeta>> {
    Ok(io::read_jsonl(path)?.into_iter().map(|(_, m)| m).collect())
}

/// Retrieval evaluation (top-1 and mAP) from a metadata file.
///
/// Gallery-split samples form the labeled gallery. With `cfg.enrichment` and
/// face inputs, query samples confidently labeled by face join the gallery
/// before ranking. In the general setting, when every sample has a clothes id,
/// the report also carries the query-weighted average of the same-clothes and
/// clothes-changing results.
pub fn evaluate_retrieval(cfg: &RunConfig) -> Result<MetricsReport> {
    let meta = load_metadata(required(&cfg.inputs.metadata, "metadata")?)?;
    let reid = load_embeddings(
        required(&cfg.inputs.reid_embeddings, "reid_embeddings")?,
        Modality::Reid,
    )?;
    let (face, faces) = load_face_inputs(&cfg.inputs)?;
    let inputs = SampleInputs {
        reid: &reid,
        face: face.as_ref(),
        faces: faces.as_ref(),
    };

    let labeled: Vec<LabeledSample> = meta
        .iter()
        .filter(|m| m.split == Split::Gallery)
        .map(|m| LabeledSample::new(m.sample_id.clone(), m.label.clone()))
        .collect();
    let query_meta: Vec<&SampleMeta> = meta.iter().filter(|m| m.split == Split::Query).collect();
    let by_id: HashMap<&str, &SampleMeta> =
        meta.iter().map(|m| (m.sample_id.as_str(), m)).collect();

    let has_faces = matches!((&face, &faces), (Some(f), Some(o)) if !f.is_empty() && !o.is_empty());
    let gallery = if cfg.enrichment && has_faces {
        let queries: Vec<String> = query_meta.iter().map(|m| m.sample_id.clone()).collect();
        enrich_gallery(
            &labeled,
            &queries,
            &inputs,
            &cfg.thresholds(),
            cfg.enrichment_fraction,
            cfg.seed,
        )?
        .g_enriched
    } else {
        plain_gallery(&labeled, &inputs)?
    };

    let items: Vec<RankItem<'_>> = gallery
        .iter()
        .map(|(label, entry, vector)| RankItem {
            sample_id: &entry.sample_id,
            label,
            clothes_id: by_id
                .get(entry.sample_id.as_str())
                .and_then(|m| m.clothes_id.as_deref()),
            provenance: entry.provenance,
            vector,
        })
        .collect();
    let queries = query_meta
        .iter()
        .map(|m| inputs.reid_vector(&m.sample_id).map(|v| (*m, v)))
        .collect::<Result<Vec<_>>>()?;

    let mut report = evaluate_ranking(&queries, &items, &cfg.setting)?;
    let all_have_clothes = meta.iter().all(|m| m.clothes_id.is_some());
    if cfg.setting.clothes_mode == ClothesMode::General && all_have_clothes {
        let with = |mode| EvalSetting {
            clothes_mode: mode,
            ..cfg.setting
        };
        let sc = evaluate_ranking(&queries, &items, &with(ClothesMode::SameClothes))?;
        let cc = evaluate_ranking(&queries, &items, &with(ClothesMode::ClothesChanging))?;
        report.weighted_general = weighted_general(&sc, &cc);
    }
    Ok(report)
}

/// Enriched gallery listing, one line per embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryLine<'a> {
    pub label: &'a IdentityLabel,
    pub sample_id: &'a str,
    pub provenance: Provenance,
}

pub fn gallery_lines(g: &Gallery) -> impl Iterator<Item = GalleryLine<'_>> {
    g.iter().map(|(label, entry, _)| GalleryLine {
        label,
        sample_id: &entry.sample_id,
        provenance: entry.provenance,
    })
}

/// Threshold sweep over the labeled gallery crops. Only face inputs are used.
pub fn sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    let gallery = load_crop_manifest(required(&cfg.inputs.gallery_manifest, "gallery_manifest")?)?;
    let (face, faces) = load_face_inputs(&cfg.inputs)?;
    let (face, faces) = face
        .zip(faces)
        .ok_or_else(|| Error::Config("sweep needs face_embeddings and face_observations".into()))?;
    let reid = EmbeddingSet::empty(Modality::Reid);
    let inputs = SampleInputs {
        reid: &reid,
        face: Some(&face),
        faces: Some(&faces),
    };
    let train = labeled_from_manifest(&gallery)?;
    threshold_sweep(&train, &inputs, grid, &cfg.thresholds(), cfg.seed)
}

/// K-means over every vector of a face embedding file. Returns the sample ids
/// in file order alongside the report.
pub fn cluster_faces(path: &Path, params: &KMeansParams) -> Result<(Vec<String>, ClusterReport)> {
    let face = load_embeddings(path, Modality::Face)?;
    let (ids, vectors): (Vec<String>, Vec<&[f64]>) =
        face.iter().map(|(id, v)| (id.to_string(), v)).unzip();
    let report = cluster_face_features(&vectors, params)?;
    Ok((ids, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gallery_crops: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_crops: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reid_embeddings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face_embeddings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face_observations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata_records: Option<usize>,
}

/// Load every configured input through its validator and cross-check that
/// each valid crop has a ReID embedding and each gallery crop a named label.
pub fn validate_inputs(cfg: &RunConfig) -> Result<ValidationSummary> {
    let p = &cfg.inputs;
    let mut summary = ValidationSummary::default();
    let gallery = p
        .gallery_manifest
        .as_deref()
        .map(load_crop_manifest)
        .transpose()?;
    let query = p
        .query_manifest
        .as_deref()
        .map(load_crop_manifest)
        .transpose()?;
    let reid = p
        .reid_embeddings
        .as_deref()
        .map(|r| load_embeddings(r, Modality::Reid))
        .transpose()?;
    let (face, faces) = load_face_inputs(p)?;
    if let Some(m) = &p.metadata {
        summary.metadata_records = Some(load_metadata(m)?.len());
    }
    if let Some(g) = &gallery {
        labeled_from_manifest(g)?;
    }
    if let Some(reid) = &reid {
        for crop in gallery
            .iter()
            .chain(&query)
            .flat_map(|m| m.iter())
            .filter(|c| !c.invalid)
        {
            if !reid.contains(&crop.im_name) {
                return Err(Error::MissingEmbedding {
                    modality: "reid".into(),
                    sample_id: crop.im_name.clone(),
                });
            }
        }
    }
    summary.gallery_crops = gallery.as_ref().map(CropManifest::len);
    summary.query_crops = query.as_ref().map(CropManifest::len);
    summary.reid_embeddings = reid.as_ref().map(EmbeddingSet::len);
    summary.face_embeddings = face.as_ref().map(EmbeddingSet::len);
    summary.face_observations = faces.as_ref().map(FaceIndex::observation_count);
    Ok(summary)
}

//! Synthetic datasets with known ground truth.
//!
//! Each identity is a random unit vector `u`, each clothes set a random unit
//! vector `c`. A crop's ReID embedding is `normalize((1-w)u + w c + noise)`
//! with `w = reid_clothes_weight`; its face embedding, when visible, is
//! `normalize(u + noise)`. Gallery tracks wear clothes set 0, query tracks
//! of known identities wear the other sets in turn. Unknown identities appear
//! only in query tracks.
//!
//! Detection confidence: clean faces draw uniformly from [0.8, 1.0], noisy
//! faces from [0.3, 0.7].

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{EvalSetting, SampleMeta, SetMode, Split, DEFAULT_MIN_TRACK_LEN};
use crate::geometry::{BBox, Point};
use crate::io;
use crate::model::{
    face_embedding_key, l2_normalize, save_crop_manifest, CropManifest, CropRecord,
    EmbeddingRecord, FaceObservation, IdentityLabel, Modality,
};
use crate::pipeline::{InputPaths, RunConfig};
use crate::scoring::dot;

pub const CLEAN_DET_RANGE: (f64, f64) = (0.8, 1.0);
pub const NOISY_DET_RANGE: (f64, f64) = (0.3, 0.7);

const MAX_REJECTIONS: usize = 1000;
/// Upper bound on |cos| between an unknown identity vector and any known one.
const UNKNOWN_IDENTITY_MAX_COS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_identities: usize,
    pub n_unknown_identities: usize,
    pub n_clothes_per_identity: usize,
    pub dim: usize,
    pub face_noise_sigma: f64,
    pub reid_clothes_weight: f64,
    pub face_visibility_rate: f64,
    pub crops_per_track: usize,
    pub tracks_per_identity: usize,
    pub seed: u64,
    /// Per-component noise on ReID embeddings.
    pub reid_noise_sigma: f64,
    /// Fraction of visible faces that are low-confidence and noisier.
    pub noisy_face_rate: f64,
    pub noisy_face_sigma: f64,
    /// Fraction of crops with an extra high-confidence face of another
    /// identity lying outside the pose keypoints.
    pub distractor_face_rate: f64,
    /// Every clean unknown-identity face stays below this cosine to all
    /// gallery faces.
    pub unknown_face_max_sim: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_identities: 10,
            n_unknown_identities: 0,
            n_clothes_per_identity: 3,
            dim: 64,
            face_noise_sigma: 0.05,
            reid_clothes_weight: 0.9,
            face_visibility_rate: 0.8,
            crops_per_track: 10,
            tracks_per_identity: 2,
            seed: 0,
            reid_noise_sigma: 0.02,
            noisy_face_rate: 0.0,
            noisy_face_sigma: 0.3,
            distractor_face_rate: 0.0,
            unknown_face_max_sim: 0.3,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_identities", self.n_identities),
            ("n_clothes_per_identity", self.n_clothes_per_identity),
            ("dim", self.dim),
            ("crops_per_track", self.crops_per_track),
            ("tracks_per_identity", self.tracks_per_identity),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        let rates = [
            ("reid_clothes_weight", self.reid_clothes_weight),
            ("face_visibility_rate", self.face_visibility_rate),
            ("noisy_face_rate", self.noisy_face_rate),
            ("distractor_face_rate", self.distractor_face_rate),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} outside [0,1]"
                )));
            }
        }
        let sigmas = [
            ("face_noise_sigma", self.face_noise_sigma),
            ("reid_noise_sigma", self.reid_noise_sigma),
            ("noisy_face_sigma", self.noisy_face_sigma),
        ];
        for (name, v) in sigmas {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        if !(self.unknown_face_max_sim > -1.0 && self.unknown_face_max_sim <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "unknown_face_max_sim = {} outside (-1,1]",
                self.unknown_face_max_sim
            )));
        }
        Ok(())
    }
}

pub const GALLERY_MANIFEST: &str = "gallery.csv";
pub const QUERY_MANIFEST: &str = "query.csv";
pub const REID_EMBEDDINGS: &str = "reid.jsonl";
pub const FACE_EMBEDDINGS: &str = "face.jsonl";
pub const FACE_OBSERVATIONS: &str = "faces.jsonl";
pub const METADATA: &str = "meta.jsonl";
pub const CONFIG: &str = "reface.toml";

/// Paths of a generated dataset and a run configuration over it.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    /// Configuration with absolute input paths.
    pub config: RunConfig,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if l2_normalize(&mut v) {
            return v;
        }
    }
}

fn noisy_unit(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    loop {
        let mut v: Vec<f64> = base.iter().map(|b| b + noise.sample(rng)).collect();
        if l2_normalize(&mut v) {
            return v;
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

struct Writer {
    gallery: Vec<CropRecord>,
    query: Vec<CropRecord>,
    reid: Vec<EmbeddingRecord>,
    face: Vec<EmbeddingRecord>,
    faces: Vec<FaceObservation>,
    meta: Vec<SampleMeta>,
    /// Clean face embeddings of gallery crops.
    gallery_faces: Vec<Vec<f64>>,
}

struct TrackSpec<'a> {
    vid_name: &'a str,
    track_id: i64,
    label: &'a IdentityLabel,
    identity: &'a [f64],
    clothes: &'a [f64],
    clothes_id: String,
    split: Split,
    unknown: bool,
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    rng: ChaCha8Rng,
    identities: Vec<Vec<f64>>,
}

impl Generator<'_> {
    fn face_embedding(&mut self, track: &TrackSpec<'_>, out: &Writer, noisy: bool) -> Vec<f64> {
        let sigma = if noisy {
            self.spec.noisy_face_sigma
        } else {
            self.spec.face_noise_sigma
        };
        if !track.unknown || noisy {
            return noisy_unit(&mut self.rng, track.identity, sigma);
        }
        let mut candidate = noisy_unit(&mut self.rng, track.identity, sigma);
        for _ in 0..MAX_REJECTIONS {
            let max = out
                .gallery_faces
                .iter()
                .map(|g| dot(g, &candidate))
                .fold(f64::NEG_INFINITY, f64::max);
            if max < self.spec.unknown_face_max_sim {
                break;
            }
            candidate = noisy_unit(&mut self.rng, track.identity, sigma);
        }
        candidate
    }

    fn emit_track(&mut self, track: &TrackSpec<'_>, out: &mut Writer) {
        let spec = self.spec;
        let w = spec.reid_clothes_weight;
        for crop_id in 0..spec.crops_per_track {
            let im_name = format!(
                "{}_t{:04}_f{:03}.jpg",
                track.vid_name, track.track_id, crop_id
            );
            let base: Vec<f64> = track
                .identity
                .iter()
                .zip(track.clothes)
                .map(|(u, c)| (1.0 - w) * u + w * c)
                .collect();
            let reid = noisy_unit(&mut self.rng, &base, spec.reid_noise_sigma);
            out.reid.push(EmbeddingRecord {
                sample_id: im_name.clone(),
                modality: Modality::Reid,
                dim: spec.dim,
                vector: reid,
            });

            let x1 = uniform(&mut self.rng, (0.0, 1000.0)).round();
            let y1 = uniform(&mut self.rng, (0.0, 500.0)).round();
            let record = CropRecord {
                label: Some(track.label.clone()),
                im_name: im_name.clone(),
                frame_num: crop_id as u64,
                x1,
                y1,
                x2: x1 + 64.0,
                y2: y1 + 128.0,
                conf: uniform(&mut self.rng, (0.5, 1.0)),
                vid_name: track.vid_name.to_string(),
                track_id: track.track_id,
                crop_id: crop_id as i64,
                invalid: false,
            };
            match track.split {
                Split::Gallery => out.gallery.push(record),
                Split::Query => out.query.push(record),
            }
            out.meta.push(SampleMeta {
                sample_id: im_name.clone(),
                label: track.label.clone(),
                clothes_id: Some(track.clothes_id.clone()),
                camera_id: Some(match track.split {
                    Split::Gallery => "cam0".to_string(),
                    Split::Query => "cam1".to_string(),
                }),
                split: track.split,
            });

            if !self.rng.random_bool(spec.face_visibility_rate) {
                continue;
            }
            let noisy = self.rng.random_bool(spec.noisy_face_rate);
            let det_conf = uniform(
                &mut self.rng,
                if noisy {
                    NOISY_DET_RANGE
                } else {
                    CLEAN_DET_RANGE
                },
            );
            let face = self.face_embedding(track, out, noisy);
            if track.split == Split::Gallery && !noisy {
                out.gallery_faces.push(face.clone());
            }

            let jitter = uniform(&mut self.rng, (-2.0, 2.0)).round();
            let left_eye = Point {
                x: 26.0 + jitter,
                y: 20.0,
            };
            let right_eye = Point {
                x: 38.0 + jitter,
                y: 20.0,
            };
            let nose = Point {
                x: 32.0 + jitter,
                y: 27.0,
            };
            let main = (
                BBox {
                    x1: 18.0 + jitter,
                    y1: 8.0,
                    x2: 46.0 + jitter,
                    y2: 38.0,
                },
                det_conf,
                face,
            );
            let mut faces = vec![main];
            if self.rng.random_bool(spec.distractor_face_rate) {
                let other = self.rng.random_range(0..self.identities.len());
                let emb = noisy_unit(
                    &mut self.rng,
                    &self.identities[other].clone(),
                    spec.face_noise_sigma,
                );
                let distractor = (
                    BBox {
                        x1: 50.0,
                        y1: 2.0,
                        x2: 63.0,
                        y2: 15.0,
                    },
                    uniform(&mut self.rng, CLEAN_DET_RANGE),
                    emb,
                );
                if self.rng.random_bool(0.5) {
                    faces.insert(0, distractor);
                } else {
                    faces.push(distractor);
                }
            }
            let n = faces.len();
            for (k, (bbox, det_conf, emb)) in faces.into_iter().enumerate() {
                out.face.push(EmbeddingRecord {
                    sample_id: face_embedding_key(&im_name, k, n).into_owned(),
                    modality: Modality::Face,
                    dim: spec.dim,
                    vector: emb,
                });
                out.faces.push(FaceObservation {
                    sample_id: im_name.clone(),
                    bbox,
                    det_conf,
                    left_eye: Some(left_eye),
                    right_eye: Some(right_eye),
                    nose: Some(nose),
                    has_face_embedding: true,
                });
            }
        }
    }
}

fn unknown_identity(rng: &mut ChaCha8Rng, dim: usize, known: &[Vec<f64>]) -> Vec<f64> {
    let mut v = random_unit(rng, dim);
    for _ in 0..MAX_REJECTIONS {
        if known
            .iter()
            .all(|k| dot(k, &v).abs() < UNKNOWN_IDENTITY_MAX_COS)
        {
            break;
        }
        v = random_unit(rng, dim);
    }
    v
}

/// Generate a dataset into `out_dir`.
///
/// Writes the gallery and query manifests, ReID and face embeddings, face
/// observations, evaluation metadata and a run configuration. Output is a
/// pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<SyntheticDataset> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let known: Vec<Vec<f64>> = (0..spec.n_identities)
        .map(|_| random_unit(&mut rng, spec.dim))
        .collect();
    let mut unknown = Vec::with_capacity(spec.n_unknown_identities);
    for _ in 0..spec.n_unknown_identities {
        unknown.push(unknown_identity(&mut rng, spec.dim, &known));
    }
    let clothes: Vec<Vec<Vec<f64>>> = (0..spec.n_identities + spec.n_unknown_identities)
        .map(|_| {
            (0..spec.n_clothes_per_identity)
                .map(|_| random_unit(&mut rng, spec.dim))
                .collect()
        })
        .collect();
    let labels: Vec<IdentityLabel> = (0..spec.n_identities)
        .map(|i| IdentityLabel::Known(format!("id{i:03}")))
        .chain((0..spec.n_unknown_identities).map(|i| IdentityLabel::Known(format!("ext{i:03}"))))
        .collect();

    let mut generator = Generator {
        spec,
        rng,
        identities: known.iter().chain(&unknown).cloned().collect(),
    };
    let mut out = Writer {
        gallery: Vec::new(),
        query: Vec::new(),
        reid: Vec::new(),
        face: Vec::new(),
        faces: Vec::new(),
        meta: Vec::new(),
        gallery_faces: Vec::new(),
    };

    let mut track_id = 0i64;
    for i in 0..spec.n_identities {
        for _ in 0..spec.tracks_per_identity {
            let identity = generator.identities[i].clone();
            let t = TrackSpec {
                vid_name: "gallery",
                track_id,
                label: &labels[i],
                identity: &identity,
                clothes: &clothes[i][0],
                clothes_id: format!("{}_c0", labels[i]),
                split: Split::Gallery,
                unknown: false,
            };
            generator.emit_track(&t, &mut out);
            track_id += 1;
        }
    }

    // Query tracks are emitted in a shuffled order so file order carries no
    // identity information.
    let mut plan: Vec<(usize, usize)> = (0..spec.n_identities + spec.n_unknown_identities)
        .flat_map(|i| (0..spec.tracks_per_identity).map(move |t| (i, t)))
        .collect();
    plan.shuffle(&mut generator.rng);
    for (q, &(i, t)) in plan.iter().enumerate() {
        let k = if i >= spec.n_identities {
            t % spec.n_clothes_per_identity
        } else if spec.n_clothes_per_identity > 1 {
            1 + t % (spec.n_clothes_per_identity - 1)
        } else {
            0
        };
        let identity = generator.identities[i].clone();
        let track = TrackSpec {
            vid_name: "query",
            track_id: q as i64,
            label: &labels[i],
            identity: &identity,
            clothes: &clothes[i][k],
            clothes_id: format!("{}_c{k}", labels[i]),
            split: Split::Query,
            unknown: i >= spec.n_identities,
        };
        generator.emit_track(&track, &mut out);
    }

    let path = |name: &str| out_dir.join(name);
    save_crop_manifest(&CropManifest::new(out.gallery)?, &path(GALLERY_MANIFEST))?;
    save_crop_manifest(&CropManifest::new(out.query)?, &path(QUERY_MANIFEST))?;
    io::write_jsonl(&path(REID_EMBEDDINGS), &out.reid)?;
    io::write_jsonl(&path(FACE_EMBEDDINGS), &out.face)?;
    io::write_jsonl(&path(FACE_OBSERVATIONS), &out.faces)?;
    io::write_jsonl(&path(METADATA), &out.meta)?;

    let setting = EvalSetting {
        set_mode: if spec.n_unknown_identities > 0 {
            SetMode::Open
        } else {
            SetMode::Closed
        },
        min_track_len: spec.crops_per_track.min(DEFAULT_MIN_TRACK_LEN),
        ..EvalSetting::default()
    };
    let relative = RunConfig {
        inputs: InputPaths {
            gallery_manifest: Some(GALLERY_MANIFEST.into()),
            query_manifest: Some(QUERY_MANIFEST.into()),
            reid_embeddings: Some(REID_EMBEDDINGS.into()),
            face_embeddings: Some(FACE_EMBEDDINGS.into()),
            face_observations: Some(FACE_OBSERVATIONS.into()),
            metadata: Some(METADATA.into()),
        },
        seed: spec.seed,
        setting,
        ..RunConfig::default()
    };
    let config_path = path(CONFIG);
    fs::write(&config_path, relative.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    let config = RunConfig::load(&config_path)?;
    Ok(SyntheticDataset {
        dir: out_dir.to_path_buf(),
        config_path,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_crop_manifest, load_embeddings, load_face_observations};

    #[test]
    fn same_spec_gives_identical_files() {
        let spec = SyntheticSpec {
            distractor_face_rate: 0.3,
            noisy_face_rate: 0.2,
            n_unknown_identities: 2,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic(&spec, a.path()).unwrap();
        generate_synthetic(&spec, b.path()).unwrap();
        for name in [
            GALLERY_MANIFEST,
            QUERY_MANIFEST,
            REID_EMBEDDINGS,
            FACE_EMBEDDINGS,
            FACE_OBSERVATIONS,
            METADATA,
            CONFIG,
        ] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn outputs_load_through_validators() {
        let spec = SyntheticSpec {
            distractor_face_rate: 0.5,
            noisy_face_rate: 0.3,
            n_unknown_identities: 1,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(&spec, dir.path()).unwrap();
        ds.config.validate().unwrap();
        let gallery = load_crop_manifest(&dir.path().join(GALLERY_MANIFEST)).unwrap();
        let query = load_crop_manifest(&dir.path().join(QUERY_MANIFEST)).unwrap();
        let per_split = spec.tracks_per_identity * spec.crops_per_track;
        assert_eq!(gallery.len(), spec.n_identities * per_split);
        assert_eq!(
            query.len(),
            (spec.n_identities + spec.n_unknown_identities) * per_split
        );
        assert!(gallery
            .iter()
            .all(|c| !c.label.as_ref().unwrap().as_str().starts_with("ext")));
        let reid = load_embeddings(&dir.path().join(REID_EMBEDDINGS), Modality::Reid).unwrap();
        assert_eq!(reid.len(), gallery.len() + query.len());
        let face = load_embeddings(&dir.path().join(FACE_EMBEDDINGS), Modality::Face).unwrap();
        let mut faces = load_face_observations(&dir.path().join(FACE_OBSERVATIONS)).unwrap();
        faces.link_embeddings(&face);
        assert_eq!(faces.observation_count(), face.len());
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for spec in [
            SyntheticSpec {
                n_identities: 0,
                ..Default::default()
            },
            SyntheticSpec {
                face_visibility_rate: 1.5,
                ..Default::default()
            },
        ] {
            assert!(generate_synthetic(&spec, dir.path()).is_err());
        }
    }
}

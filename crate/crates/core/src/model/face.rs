use std::borrow::Cow;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Keypoints, Point};
use crate::io;
use crate::model::EmbeddingSet;

/// One detected face in one crop, together with the pose keypoints of the
/// crop's main person. Coordinates are crop-local pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub sample_id: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub det_conf: f64,
    pub left_eye: Option<Point>,
    pub right_eye: Option<Point>,
    pub nose: Option<Point>,
    /// Set by [`FaceIndex::link_embeddings`]; not part of the file format.
    #[serde(skip)]
    pub has_face_embedding: bool,
}

impl FaceObservation {
    pub fn keypoints(&self) -> Option<Keypoints> {
        Some(Keypoints {
            left_eye: self.left_eye?,
            right_eye: self.right_eye?,
            nose: self.nose?,
        })
    }
}

/// Key of the face embedding for face `index` of a crop with `n_faces` detections.
///
/// A crop with a single detected face uses its own sample id; with several
/// faces each one is addressed as `<sample_id>#<index>`.
pub fn face_embedding_key(sample_id: &str, index: usize, n_faces: usize) -> Cow<'_, str> {
    if n_faces <= 1 {
        Cow::Borrowed(sample_id)
    } else {
        Cow::Owned(format!("{sample_id}#{index}"))
    }
}

/// All face detections of one crop, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CropFaces {
    pub faces: Vec<FaceObservation>,
    pub keypoints: Option<Keypoints>,
}

#[derive(Debug, Clone, Default)]
pub struct FaceIndex {
    crops: HashMap<String, CropFaces>,
}

impl FaceIndex {
    pub fn from_observations(observations: Vec<FaceObservation>) -> Result<Self> {
        Self::build(observations.into_iter().map(|o| (0, o)), "<memory>")
    }

    fn build(
        observations: impl Iterator<Item = (u64, FaceObservation)>,
        file: &str,
    ) -> Result<Self> {
        let mut crops: HashMap<String, CropFaces> = HashMap::new();
        for (line, obs) in observations {
            if !obs.bbox.is_well_ordered() {
                return Err(Error::validation(
                    file,
                    line,
                    format!("face box of `{}` is not well-ordered", obs.sample_id),
                ));
            }
            if !(0.0..=1.0).contains(&obs.det_conf) {
                return Err(Error::validation(
                    file,
                    line,
                    format!(
                        "det_conf {} of `{}` outside [0,1]",
                        obs.det_conf, obs.sample_id
                    ),
                ));
            }
            let entry = crops.entry(obs.sample_id.clone()).or_default();
            let keypoints = obs.keypoints();
            if entry.faces.is_empty() {
                entry.keypoints = keypoints;
            } else if entry.keypoints != keypoints {
                return Err(Error::validation(
                    file,
                    line,
                    format!(
                        "pose keypoints of `{}` disagree with an earlier record",
                        obs.sample_id
                    ),
                ));
            }
            entry.faces.push(obs);
        }
        Ok(FaceIndex { crops })
    }

    /// Mark every observation that has a matching face embedding.
    pub fn link_embeddings(&mut self, embeddings: &EmbeddingSet) {
        for (sample_id, crop) in self.crops.iter_mut() {
            let n = crop.faces.len();
            for (i, face) in crop.faces.iter_mut().enumerate() {
                face.has_face_embedding = embeddings.contains(&face_embedding_key(sample_id, i, n));
            }
        }
    }

    pub fn get(&self, sample_id: &str) -> Option<&CropFaces> {
        self.crops.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.crops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crops.is_empty()
    }

    pub fn observation_count(&self) -> usize {
        self.crops.values().map(|c| c.faces.len()).sum()
    }
}

pub fn parse_face_observations<R: BufRead>(reader: R, file: &str) -> Result<FaceIndex> {
    let records: Vec<(u64, FaceObservation)> = io::parse_jsonl(reader, file)?;
    FaceIndex::build(records.into_iter(), file)
}

pub fn load_face_observations(path: &Path) -> Result<FaceIndex> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_face_observations(std::io::BufReader::new(file), &io::display_name(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Modality;

    #[test]
    fn groups_faces_per_crop() {
        let text = concat!(
            r#"{"sample_id":"c1","box":[10,10,50,50],"det_conf":0.9,"left_eye":[20,20],"right_eye":[40,20],"nose":[30,30]}"#,
            "\n",
            r#"{"sample_id":"c1","box":[60,10,90,40],"det_conf":0.8,"left_eye":[20,20],"right_eye":[40,20],"nose":[30,30]}"#,
            "\n",
            r#"{"sample_id":"c2","box":[0,0,5,5],"det_conf":0.5,"left_eye":null,"right_eye":null,"nose":null}"#,
        );
        let mut index = parse_face_observations(text.as_bytes(), "f").unwrap();
        assert_eq!(index.len(), 2);
        assert_eq!(index.observation_count(), 3);
        assert!(index.get("c1").unwrap().keypoints.is_some());
        assert!(index.get("c2").unwrap().keypoints.is_none());

        let emb =
            EmbeddingSet::from_vectors(Modality::Face, vec![("c1#1".to_string(), vec![1.0, 0.0])])
                .unwrap();
        index.link_embeddings(&emb);
        let c1 = index.get("c1").unwrap();
        assert!(!c1.faces[0].has_face_embedding);
        assert!(c1.faces[1].has_face_embedding);
    }

    #[test]
    fn rejects_bad_box_and_conf() {
        let bad_box = r#"{"sample_id":"c","box":[50,10,10,50],"det_conf":0.9,"left_eye":null,"right_eye":null,"nose":null}"#;
        assert!(parse_face_observations(bad_box.as_bytes(), "f").is_err());
        let bad_conf = r#"{"sample_id":"c","box":[0,0,10,10],"det_conf":1.5,"left_eye":null,"right_eye":null,"nose":null}"#;
        assert!(parse_face_observations(bad_conf.as_bytes(), "f").is_err());
    }

    #[test]
    fn rejects_conflicting_keypoints() {
        let text = concat!(
            r#"{"sample_id":"c","box":[0,0,10,10],"det_conf":0.9,"left_eye":[1,1],"right_eye":[2,1],"nose":[1,2]}"#,
            "\n",
            r#"{"sample_id":"c","box":[0,0,10,10],"det_conf":0.9,"left_eye":[5,5],"right_eye":[2,1],"nose":[1,2]}"#,
        );
        let err = parse_face_observations(text.as_bytes(), "f").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }));
    }

    #[test]
    fn embedding_key_convention() {
        assert_eq!(face_embedding_key("a", 0, 1), "a");
        assert_eq!(face_embedding_key("a", 1, 3), "a#1");
    }
}

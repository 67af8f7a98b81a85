use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{CropManifest, CropRecord, IdentityLabel};

/// Valid crops of one tracked person, ordered by `crop_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub vid_name: String,
    pub track_id: i64,
    pub crops: Vec<CropRecord>,
    pub ground_truth: Option<IdentityLabel>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.crops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crops.is_empty()
    }

    /// A single crop viewed as a track of length one.
    pub fn singleton(crop: CropRecord) -> Self {
        Track {
            vid_name: crop.vid_name.clone(),
            track_id: crop.track_id,
            ground_truth: crop.label.clone(),
            crops: vec![crop],
        }
    }
}

/// Tracks ordered by `(vid_name, track_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
}

impl TrackSet {
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter()
    }
}

/// Group valid crops into tracks.
///
/// Invalid crops are dropped, and a track with no valid crops disappears.
/// Labeled crops of one track must agree; the agreed label becomes the
/// track's ground truth.
pub fn build_tracks(manifest: &CropManifest) -> Result<TrackSet> {
    let mut groups: BTreeMap<(&str, i64), Vec<&CropRecord>> = BTreeMap::new();
    for crop in manifest.iter().filter(|c| !c.invalid) {
        groups
            .entry((crop.vid_name.as_str(), crop.track_id))
            .or_default()
            .push(crop);
    }

    let mut tracks = Vec::with_capacity(groups.len());
    for ((vid_name, track_id), mut crops) in groups {
        crops.sort_by_key(|c| c.crop_id);
        let mut ground_truth: Option<&IdentityLabel> = None;
        for crop in &crops {
            if let Some(label) = &crop.label {
                match ground_truth {
                    Some(gt) if gt != label => {
                        return Err(Error::Integrity(format!(
                            "track ({vid_name}, {track_id}) has conflicting labels `{gt}` and `{label}`"
                        )));
                    }
                    _ => ground_truth = Some(label),
                }
            }
        }
        tracks.push(Track {
            vid_name: vid_name.to_string(),
            track_id,
            ground_truth: ground_truth.cloned(),
            crops: crops.into_iter().cloned().collect(),
        });
    }
    Ok(TrackSet { tracks })
}

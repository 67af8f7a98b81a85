//! Domain types and the loaders for every input file.

mod embedding;
mod face;
mod gallery;
mod label;
mod manifest;
mod track;

pub use embedding::{
    l2_normalize, load_embeddings, parse_embeddings, EmbeddingRecord, EmbeddingSet, Modality,
};
pub use face::{
    face_embedding_key, load_face_observations, parse_face_observations, CropFaces, FaceIndex,
    FaceObservation,
};
pub use gallery::{Gallery, GalleryEntry, Provenance};
pub use label::{IdentityLabel, UNKNOWN_LABEL};
pub use manifest::{
    load_crop_manifest, parse_crop_manifest, save_crop_manifest, write_crop_manifest, CropManifest,
    CropRecord, MANIFEST_COLUMNS,
};
pub use track::{build_tracks, Track, TrackSet};

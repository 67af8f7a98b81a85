use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IdentityLabel, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OriginalLabeled,
    EnrichedFromQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub sample_id: String,
    pub provenance: Provenance,
}

/// Embeddings of one identity, stored row-major.
#[derive(Debug, Clone, Default)]
struct IdentityBlock {
    entries: Vec<GalleryEntry>,
    vectors: Vec<f64>,
}

/// Labeled reference embeddings of a single modality, grouped by identity.
///
/// Every identity present holds at least one embedding. Vectors are expected
/// to be unit-norm already (they come from an [`EmbeddingSet`](crate::model::EmbeddingSet)).
#[derive(Debug, Clone)]
pub struct Gallery {
    modality: Modality,
    dim: usize,
    blocks: BTreeMap<IdentityLabel, IdentityBlock>,
}

impl Gallery {
    pub fn new(modality: Modality) -> Self {
        Gallery {
            modality,
            dim: 0,
            blocks: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        label: IdentityLabel,
        sample_id: impl Into<String>,
        vector: &[f64],
        provenance: Provenance,
    ) -> Result<()> {
        if vector.is_empty() {
            return Err(Error::InvalidArgument("gallery vector is empty".into()));
        }
        if self.dim == 0 {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        let block = self.blocks.entry(label).or_default();
        block.entries.push(GalleryEntry {
            sample_id: sample_id.into(),
            provenance,
        });
        block.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of embeddings across identities.
    pub fn len(&self) -> usize {
        self.blocks.values().map(|b| b.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn identities(&self) -> impl Iterator<Item = &IdentityLabel> {
        self.blocks.keys()
    }

    pub fn contains(&self, label: &IdentityLabel) -> bool {
        self.blocks.contains_key(label)
    }

    /// Embeddings of `label`, empty when the identity is absent.
    pub fn vectors<'a>(&'a self, label: &IdentityLabel) -> impl Iterator<Item = &'a [f64]> + 'a {
        let dim = self.dim.max(1);
        self.blocks
            .get(label)
            .map(|b| b.vectors.as_slice())
            .unwrap_or(&[])
            .chunks_exact(dim)
    }

    pub fn entries(&self, label: &IdentityLabel) -> &[GalleryEntry] {
        self.blocks.get(label).map_or(&[], |b| b.entries.as_slice())
    }

    /// `(label, entry, vector)` for every embedding, identities in label order.
    pub fn iter(&self) -> impl Iterator<Item = (&IdentityLabel, &GalleryEntry, &[f64])> {
        let dim = self.dim.max(1);
        self.blocks.iter().flat_map(move |(label, block)| {
            block
                .entries
                .iter()
                .zip(block.vectors.chunks_exact(dim))
                .map(move |(entry, v)| (label, entry, v))
        })
    }
}

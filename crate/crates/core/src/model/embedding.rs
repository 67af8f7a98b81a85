use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Reid,
    Face,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Reid => "reid",
            Modality::Face => "face",
        })
    }
}

/// One record of an embedding file, as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub sample_id: String,
    pub modality: Modality,
    pub dim: usize,
    pub vector: Vec<f64>,
}

/// Scale `v` to unit L2 norm in place. Returns `false` for zero or non-finite input.
pub fn l2_normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// A set of unit-norm embeddings of a single modality and dimension, keyed by sample id.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    modality: Modality,
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn empty(modality: Modality) -> Self {
        EmbeddingSet {
            modality,
            dim: 0,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Build a set from raw vectors, normalizing each one.
    pub fn from_vectors(
        modality: Modality,
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut set = EmbeddingSet::empty(modality);
        for (sample_id, vector) in vectors {
            set.push(sample_id, vector)
                .map_err(Error::InvalidArgument)?;
        }
        Ok(set)
    }

    fn push(&mut self, sample_id: String, mut vector: Vec<f64>) -> std::result::Result<(), String> {
        if vector.is_empty() {
            return Err(format!("sample `{sample_id}` has an empty vector"));
        }
        if self.ids.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(format!(
                "dimension mismatch for `{sample_id}`: expected {}, got {}",
                self.dim,
                vector.len()
            ));
        }
        if self.index.contains_key(&sample_id) {
            return Err(format!("duplicate sample_id `{sample_id}`"));
        }
        if !l2_normalize(&mut vector) {
            return Err(format!(
                "sample `{sample_id}` has a zero-norm or non-finite vector"
            ));
        }
        self.index.insert(sample_id.clone(), self.ids.len());
        self.ids.push(sample_id);
        self.data.extend_from_slice(&vector);
        Ok(())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    /// Vector dimension; 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&[f64]> {
        self.index.get(sample_id).map(|&i| self.row(i))
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.index.contains_key(sample_id)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Records in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(i, id)| (id.as_str(), self.row(i)))
    }

    pub fn to_records(&self) -> Vec<EmbeddingRecord> {
        self.iter()
            .map(|(id, v)| EmbeddingRecord {
                sample_id: id.to_string(),
                modality: self.modality,
                dim: self.dim,
                vector: v.to_vec(),
            })
            .collect()
    }
}

pub fn parse_embeddings<R: BufRead>(
    reader: R,
    file: &str,
    expected: Modality,
) -> Result<EmbeddingSet> {
    let records: Vec<(u64, EmbeddingRecord)> = io::parse_jsonl(reader, file)?;
    let mut set = EmbeddingSet::empty(expected);
    for (line, record) in records {
        if record.modality != expected {
            return Err(Error::validation(
                file,
                line,
                format!(
                    "modality mismatch: expected {expected}, got {}",
                    record.modality
                ),
            ));
        }
        if record.dim != record.vector.len() {
            return Err(Error::validation(
                file,
                line,
                format!(
                    "declared dim {} does not match vector length {}",
                    record.dim,
                    record.vector.len()
                ),
            ));
        }
        set.push(record.sample_id, record.vector)
            .map_err(|msg| Error::validation(file, line, msg))?;
    }
    Ok(set)
}

/// Load a line-delimited embedding file. Every vector is re-normalized to unit length.
pub fn load_embeddings(path: &Path, expected: Modality) -> Result<EmbeddingSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(
        std::io::BufReader::new(file),
        &io::display_name(path),
        expected,
    )
}

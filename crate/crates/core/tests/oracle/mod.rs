//! Brute-force reference implementations over plain data.
//!
//! Nothing here calls into the engine's scoring, enrichment or geometry code:
//! vectors live in plain `Vec`s, galleries are flat lists scanned in full,
//! and every rule is written out step by step.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub const UNKNOWN: &str = "Unknown";

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let a = normalize(a);
    let b = normalize(b);
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct Face {
    pub bbox: [f64; 4],
    pub det_conf: f64,
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Crop {
    pub id: String,
    pub reid: Vec<f64>,
    pub faces: Vec<Face>,
    /// Left eye, right eye, nose.
    pub keypoints: Option<[[f64; 2]; 3]>,
}

/// Gallery as a flat list of `(identity, vector)`.
pub type FlatGallery = Vec<(String, Vec<f64>)>;

fn point_in_box(p: [f64; 2], b: [f64; 4]) -> bool {
    b[0] <= p[0] && p[0] <= b[2] && b[1] <= p[1] && p[1] <= b[3]
}

/// The face whose box holds all three keypoints; highest confidence first,
/// then lowest index. Returns its confidence and embedding.
pub fn main_face(crop: &Crop) -> Option<(f64, &Vec<f64>)> {
    let kp = crop.keypoints?;
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for (i, f) in crop.faces.iter().enumerate() {
        if point_in_box(kp[0], f.bbox) && point_in_box(kp[1], f.bbox) && point_in_box(kp[2], f.bbox)
        {
            candidates.push((i, f.det_conf));
        }
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let (i, det) = *candidates.first()?;
    crop.faces[i].embedding.as_ref().map(|e| (det, e))
}

/// Per-identity maximum cosine over the whole gallery.
pub fn identity_confidences(query: &[f64], gallery: &FlatGallery) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (label, v) in gallery {
        let s = cosine(query, v);
        let e = out.entry(label.clone()).or_insert(f64::NEG_INFINITY);
        if s > *e {
            *e = s;
        }
    }
    out
}

/// Mean over images of each identity's confidence.
pub fn track_vector(images: &[&Vec<f64>], gallery: &FlatGallery) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for img in images {
        for (label, s) in identity_confidences(img, gallery) {
            *totals.entry(label).or_insert(0.0) += s;
        }
    }
    totals
        .into_iter()
        .map(|(l, t)| (l, t / images.len() as f64))
        .collect()
}

pub fn fuse(
    r: &BTreeMap<String, f64>,
    f: &BTreeMap<String, f64>,
    alpha: f64,
) -> BTreeMap<String, f64> {
    let keys: BTreeSet<&String> = r.keys().chain(f.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let rv = r.get(k).copied().unwrap_or(0.0);
            let fv = f.get(k).copied().unwrap_or(0.0);
            (k.clone(), alpha * rv + (1.0 - alpha) * fv)
        })
        .collect()
}

/// Highest score; the lexicographically smallest label among equals.
pub fn argmax(v: &BTreeMap<String, f64>) -> String {
    let mut best: Option<(&String, f64)> = None;
    for (k, &s) in v {
        if best.is_none() || s > best.unwrap().1 {
            best = Some((k, s));
        }
    }
    best.unwrap().0.clone()
}

pub struct TrackResult {
    pub label: String,
    pub fused: BTreeMap<String, f64>,
    pub n_faces: usize,
}

pub fn predict_track(
    crops: &[&Crop],
    g_reid: &FlatGallery,
    g_face: &FlatGallery,
    alpha: f64,
    det_inference: f64,
) -> TrackResult {
    let reid: Vec<&Vec<f64>> = crops.iter().map(|c| &c.reid).collect();
    let v_reid = track_vector(&reid, g_reid);
    let mut faces = Vec::new();
    for c in crops {
        if let Some((det, e)) = main_face(c) {
            if det >= det_inference {
                faces.push(e);
            }
        }
    }
    let v_face = if faces.is_empty() {
        g_face.iter().map(|(l, _)| (l.clone(), 0.0)).collect()
    } else {
        track_vector(&faces, g_face)
    };
    let fused = fuse(&v_reid, &v_face, alpha);
    TrackResult {
        label: argmax(&fused),
        fused,
        n_faces: faces.len(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    pub det_enrich: f64,
    pub sim_min: f64,
    pub rank_diff_min: f64,
    pub unknown_sim_max: f64,
    pub open_set: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub sample_id: String,
    /// `labeled`, `unknown` or a `skipped_*` reason.
    pub outcome: String,
    pub label: Option<String>,
    pub best_sim: Option<f64>,
}

pub fn build_face_gallery(labeled: &[(&Crop, String)], det_enrich: f64) -> FlatGallery {
    let mut g = Vec::new();
    for (crop, label) in labeled {
        if let Some((det, e)) = main_face(crop) {
            if det >= det_enrich {
                g.push((label.clone(), e.clone()));
            }
        }
    }
    g
}

/// Enrichment decisions for `queries`, in order, and the enriched ReID gallery.
pub fn enrich(
    labeled: &[(&Crop, String)],
    queries: &[&Crop],
    t: Thresholds,
) -> (Vec<Decision>, FlatGallery, FlatGallery) {
    // Step 1: face gallery from labeled samples.
    let g_face = build_face_gallery(labeled, t.det_enrich);
    let mut decisions = Vec::new();
    if g_face.is_empty() {
        return (decisions, Vec::new(), g_face);
    }
    for q in queries {
        // Step 2: the query needs a verified face.
        let Some((det, face)) = main_face(q) else {
            decisions.push(Decision {
                sample_id: q.id.clone(),
                outcome: "skipped_no_verified_face".into(),
                label: None,
                best_sim: None,
            });
            continue;
        };
        // Step 3: rank identities by maximum similarity.
        let conf = identity_confidences(face, &g_face);
        let mut ranked: Vec<(&String, f64)> = conf.iter().map(|(k, v)| (k, *v)).collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        let s1 = ranked[0].1;
        let gap = if ranked.len() > 1 {
            s1 - ranked[1].1
        } else {
            f64::INFINITY
        };
        // Step 4: criteria in order.
        let (outcome, label) = if det < t.det_enrich {
            ("skipped_low_detection", None)
        } else if t.open_set && s1 < t.unknown_sim_max {
            ("unknown", Some(UNKNOWN.to_string()))
        } else if s1 < t.sim_min {
            ("skipped_low_similarity", None)
        } else if gap < t.rank_diff_min {
            ("skipped_ambiguous", None)
        } else {
            ("labeled", Some(ranked[0].0.clone()))
        };
        decisions.push(Decision {
            sample_id: q.id.clone(),
            outcome: outcome.into(),
            label,
            best_sim: Some(s1),
        });
    }
    let mut g_reid: FlatGallery = labeled
        .iter()
        .map(|(c, l)| (l.clone(), c.reid.clone()))
        .collect();
    for d in &decisions {
        if let Some(label) = &d.label {
            let crop = queries.iter().find(|c| c.id == d.sample_id).unwrap();
            g_reid.push((label.clone(), crop.reid.clone()));
        }
    }
    (decisions, g_reid, g_face)
}

/// Average precision from a relevance list in rank order.
pub fn average_precision(relevance: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (k, &r) in relevance.iter().enumerate() {
        if r {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    (hits > 0).then(|| total / hits as f64)
}

fn read_lines(path: &std::path::Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

/// Every crop of a generated dataset, read straight from the JSON lines.
pub fn load_crops(dir: &std::path::Path) -> BTreeMap<String, Crop> {
    let mut reid = BTreeMap::new();
    for r in read_lines(&dir.join("reid.jsonl")) {
        reid.insert(
            r["sample_id"].as_str().unwrap().to_string(),
            floats(&r["vector"]),
        );
    }
    let mut face_vectors = BTreeMap::new();
    for r in read_lines(&dir.join("face.jsonl")) {
        face_vectors.insert(
            r["sample_id"].as_str().unwrap().to_string(),
            floats(&r["vector"]),
        );
    }
    let mut observations: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
    for r in read_lines(&dir.join("faces.jsonl")) {
        observations
            .entry(r["sample_id"].as_str().unwrap().to_string())
            .or_default()
            .push(r);
    }
    reid.into_iter()
        .map(|(id, v)| {
            let obs = observations.remove(&id).unwrap_or_default();
            let n = obs.len();
            let keypoints = obs.first().and_then(|o| {
                let p = |k: &str| {
                    o[k].as_array()
                        .map(|a| [a[0].as_f64().unwrap(), a[1].as_f64().unwrap()])
                };
                Some([p("left_eye")?, p("right_eye")?, p("nose")?])
            });
            let faces = obs
                .iter()
                .enumerate()
                .map(|(k, o)| {
                    let b = floats(&o["box"]);
                    let key = if n == 1 {
                        id.clone()
                    } else {
                        format!("{id}#{k}")
                    };
                    Face {
                        bbox: [b[0], b[1], b[2], b[3]],
                        det_conf: o["det_conf"].as_f64().unwrap(),
                        embedding: face_vectors.get(&key).cloned(),
                    }
                })
                .collect();
            let crop = Crop {
                id: id.clone(),
                reid: v,
                faces,
                keypoints,
            };
            (id, crop)
        })
        .collect()
}

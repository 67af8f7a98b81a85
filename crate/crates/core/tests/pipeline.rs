mod oracle;

use std::collections::BTreeMap;
use std::fs;

use reface::enrichment::{enrich_gallery, EnrichmentThresholds, LabeledSample, Outcome};
use reface::evaluation::EvalSetting;
use reface::model::{
    load_crop_manifest, load_embeddings, load_face_observations, IdentityLabel, Modality,
};
use reface::pipeline::{
    annotate, evaluate_predictions, evaluate_retrieval, gallery_identities, Granularity,
    PredictionLine, RunConfig,
};
use reface::scoring::SampleInputs;
use reface::synth::{generate_synthetic, SyntheticSpec};

fn track_labels(lines: &[PredictionLine]) -> BTreeMap<(String, i64), String> {
    lines
        .iter()
        .filter_map(|l| match l {
            PredictionLine::Track(t) => {
                Some(((t.vid_name.clone(), t.track_id), t.label.to_string()))
            }
            PredictionLine::Crop(_) => None,
        })
        .collect()
}

fn run(cfg: &RunConfig) -> (Vec<PredictionLine>, f64) {
    let preds: Vec<PredictionLine> = annotate(cfg).unwrap().lines().collect();
    let query = load_crop_manifest(cfg.inputs.query_manifest.as_ref().unwrap()).unwrap();
    let gallery = load_crop_manifest(cfg.inputs.gallery_manifest.as_ref().unwrap()).unwrap();
    let report =
        evaluate_predictions(&preds, &query, &gallery_identities(&gallery), &cfg.setting).unwrap();
    (preds, report.top1)
}

fn oracle_labels(dir: &std::path::Path, cfg: &RunConfig) -> BTreeMap<(String, i64), String> {
    let crops = oracle::load_crops(dir);
    let gallery = load_crop_manifest(&dir.join("gallery.csv")).unwrap();
    let query = load_crop_manifest(&dir.join("query.csv")).unwrap();
    let labeled: Vec<(&oracle::Crop, String)> = gallery
        .iter()
        .map(|c| (&crops[&c.im_name], c.label.as_ref().unwrap().to_string()))
        .collect();
    let queries: Vec<&oracle::Crop> = query.iter().map(|c| &crops[&c.im_name]).collect();
    let th = cfg.thresholds();
    let (_, g_reid, g_face) = oracle::enrich(
        &labeled,
        &queries,
        oracle::Thresholds {
            det_enrich: th.det_enrich,
            sim_min: th.sim_min,
            rank_diff_min: th.rank_diff_min,
            unknown_sim_max: th.unknown_sim_max,
            open_set: th.open_set,
        },
    );
    let mut tracks: BTreeMap<(String, i64), Vec<&oracle::Crop>> = BTreeMap::new();
    for c in query.iter() {
        tracks
            .entry((c.vid_name.clone(), c.track_id))
            .or_default()
            .push(&crops[&c.im_name]);
    }
    tracks
        .into_iter()
        .map(|(k, members)| {
            let r = oracle::predict_track(&members, &g_reid, &g_face, cfg.alpha, th.det_inference);
            (k, r.label)
        })
        .collect()
}

#[test]
fn ten_identity_instance_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_identities: 10,
        noisy_face_rate: 0.2,
        distractor_face_rate: 0.2,
        face_noise_sigma: 0.2,
        seed: 11,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let (preds, _) = run(&ds.config);
    assert_eq!(track_labels(&preds), oracle_labels(dir.path(), &ds.config));
}

#[test]
fn separable_dataset_is_fully_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_identities: 8,
        reid_clothes_weight: 0.0,
        face_visibility_rate: 1.0,
        seed: 5,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let (_, top1) = run(&ds.config);
    assert_eq!(top1, 1.0);
}

#[test]
fn clothes_independent_reid_needs_no_faces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        reid_clothes_weight: 0.0,
        seed: 3,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let plain = RunConfig {
        enrichment: false,
        alpha: 1.0,
        ..ds.config
    };
    assert_eq!(run(&plain).1, 1.0);
}

#[test]
fn alpha_one_with_empty_face_files_is_the_plain_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec::default(), dir.path()).unwrap();
    let empty_face = dir.path().join("empty_face.jsonl");
    let empty_obs = dir.path().join("empty_faces.jsonl");
    fs::write(&empty_face, "").unwrap();
    fs::write(&empty_obs, "").unwrap();

    let mut no_faces = RunConfig {
        alpha: 1.0,
        ..ds.config.clone()
    };
    no_faces.inputs.face_embeddings = Some(empty_face);
    no_faces.inputs.face_observations = Some(empty_obs);
    let baseline = RunConfig {
        alpha: 1.0,
        enrichment: false,
        ..ds.config.clone()
    };
    let a = annotate(&no_faces).unwrap();
    let b = annotate(&baseline).unwrap();
    assert!(a.decisions.is_empty());
    let scores = |lines: Vec<PredictionLine>| -> Vec<_> {
        lines
            .into_iter()
            .map(|l| match l {
                PredictionLine::Track(t) => {
                    (t.vid_name, t.track_id, t.label.to_string(), t.score_vector)
                }
                PredictionLine::Crop(c) => (c.im_name, -1, c.label.to_string(), BTreeMap::new()),
            })
            .collect()
    };
    assert_eq!(scores(a.lines().collect()), scores(b.lines().collect()));
}

#[test]
fn every_ablation_row_is_reachable() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec::default(), dir.path()).unwrap();
    let mut seen = Vec::new();
    for enrichment in [false, true] {
        for alpha in [1.0, 0.75] {
            for granularity in [Granularity::Image, Granularity::Track] {
                let cfg = RunConfig {
                    enrichment,
                    alpha,
                    granularity,
                    ..ds.config.clone()
                };
                let (preds, top1) = run(&cfg);
                let n_tracks = track_labels(&preds).len();
                assert_eq!(n_tracks, 20);
                seen.push(((enrichment, alpha, granularity), top1));
            }
        }
    }
    assert_eq!(seen.len(), 8);
    let full_track = seen
        .iter()
        .find(|(k, _)| *k == (true, 0.75, Granularity::Track))
        .unwrap()
        .1;
    let plain_track = seen
        .iter()
        .find(|(k, _)| *k == (false, 1.0, Granularity::Track))
        .unwrap()
        .1;
    assert!(full_track > plain_track);
}

#[test]
fn image_granularity_labels_each_crop() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec::default(), dir.path()).unwrap();
    let cfg = RunConfig {
        granularity: Granularity::Image,
        ..ds.config
    };
    let preds: Vec<PredictionLine> = annotate(&cfg).unwrap().lines().collect();
    let crops = preds
        .iter()
        .filter(|l| matches!(l, PredictionLine::Crop(_)))
        .count();
    assert_eq!(crops, 200);
    for l in &preds {
        if let PredictionLine::Track(t) = l {
            let best = t
                .score_vector
                .iter()
                .fold(None::<(&IdentityLabel, f64)>, |b, (k, &v)| match b {
                    Some((_, bv)) if v <= bv => b,
                    _ => Some((k, v)),
                })
                .unwrap();
            assert_eq!(best.0, &t.label);
        }
    }
}

#[test]
fn two_identity_enrichment_matches_naive_steps() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_identities: 2,
        face_visibility_rate: 1.0,
        tracks_per_identity: 1,
        crops_per_track: 4,
        seed: 8,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let cfg = &ds.config;
    let reid =
        load_embeddings(cfg.inputs.reid_embeddings.as_ref().unwrap(), Modality::Reid).unwrap();
    let face =
        load_embeddings(cfg.inputs.face_embeddings.as_ref().unwrap(), Modality::Face).unwrap();
    let mut faces = load_face_observations(cfg.inputs.face_observations.as_ref().unwrap()).unwrap();
    faces.link_embeddings(&face);
    let inputs = SampleInputs {
        reid: &reid,
        face: Some(&face),
        faces: Some(&faces),
    };
    let gallery = load_crop_manifest(cfg.inputs.gallery_manifest.as_ref().unwrap()).unwrap();
    let query = load_crop_manifest(cfg.inputs.query_manifest.as_ref().unwrap()).unwrap();
    let labeled: Vec<LabeledSample> = gallery
        .iter()
        .map(|c| LabeledSample::new(c.im_name.clone(), c.label.clone().unwrap()))
        .collect();
    let queries: Vec<String> = query.iter().map(|c| c.im_name.clone()).collect();
    let t = EnrichmentThresholds::default();
    let e = enrich_gallery(&labeled, &queries, &inputs, &t, 1.0, 0).unwrap();

    let crops = oracle::load_crops(dir.path());
    let labeled_o: Vec<(&oracle::Crop, String)> = labeled
        .iter()
        .map(|s| (&crops[&s.sample_id], s.label.to_string()))
        .collect();
    let queries_o: Vec<&oracle::Crop> = queries.iter().map(|q| &crops[q]).collect();
    let (want, _, _) = oracle::enrich(
        &labeled_o,
        &queries_o,
        oracle::Thresholds {
            det_enrich: t.det_enrich,
            sim_min: t.sim_min,
            rank_diff_min: t.rank_diff_min,
            unknown_sim_max: t.unknown_sim_max,
            open_set: t.open_set,
        },
    );
    let got: Vec<(String, String)> = e
        .decisions
        .iter()
        .map(|d| (d.sample_id.clone(), d.outcome.to_string()))
        .collect();
    let expected: Vec<(String, String)> = want
        .iter()
        .map(|d| (d.sample_id.clone(), d.outcome.clone()))
        .collect();
    assert_eq!(got, expected);

    let truth: BTreeMap<&str, &IdentityLabel> = query
        .iter()
        .map(|c| (c.im_name.as_str(), c.label.as_ref().unwrap()))
        .collect();
    let labeled_queries: Vec<_> = e
        .decisions
        .iter()
        .filter_map(|d| match &d.outcome {
            Outcome::Labeled(l) => Some((d.sample_id.as_str(), l)),
            _ => None,
        })
        .collect();
    assert!(labeled_queries.len() >= 2);
    for (sid, l) in &labeled_queries {
        assert_eq!(truth[sid], *l);
    }
    let both: std::collections::BTreeSet<_> = labeled_queries.iter().map(|(_, l)| *l).collect();
    assert_eq!(both.len(), 2);
}

#[test]
fn retrieval_evaluation_reports_weighted_general() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec::default(), dir.path()).unwrap();
    let cfg = RunConfig {
        setting: EvalSetting {
            min_track_len: 1,
            ..ds.config.setting
        },
        ..ds.config
    };
    let report = evaluate_retrieval(&cfg).unwrap();
    assert_eq!(report.n_queries_evaluated, 200);
    let w = report.weighted_general.expect("clothes ids present");
    assert!(w.top1 >= 0.0 && w.top1 <= 1.0);
    let plain = evaluate_retrieval(&RunConfig {
        enrichment: false,
        ..cfg
    })
    .unwrap();
    assert!(report.top1 >= plain.top1);
}

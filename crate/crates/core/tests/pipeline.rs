use vtrack::config::PipelineConfig;
use vtrack::frame_io::{generate_synthetic, preset_scene, FrameTruth};
use vtrack::pipeline::{run_pipeline, write_pipeline, HYPOTHESES_FILE, METRICS_FILE, TRACKS_FILE};
use vtrack::recognition::Recognizer;
use vtrack::tracker::tracks_to_jsonl;
use vtrack::training::{feature_accuracy, image_descriptors, labeled_features, load_recognizer, save_recognizer, synthetic_dataset, train_recognizer, DatasetParams};
use vtrack::RgbFrame;

fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.dataset.per_class = 10;
    cfg.dataset.backgrounds = 10;
    cfg.vocabulary.k = 60;
    cfg.pipeline.annotate = false;
    cfg
}

fn recognizer(cfg: &PipelineConfig) -> Recognizer {
    let images = synthetic_dataset(&cfg.dataset, cfg.seed).unwrap();
    train_recognizer(&images, &cfg.train_params()).unwrap()
}

fn cross2(frames: usize) -> (Vec<RgbFrame>, Vec<FrameTruth>) {
    generate_synthetic(&preset_scene("cross2", frames, 7).unwrap(), frames).unwrap()
}

#[test]
fn recognizer_generalizes_to_held_out_images() {
    let cfg = small_config();
    let rec = recognizer(&cfg);
    let params = DatasetParams {
        backgrounds: 0,
        ..cfg.dataset.clone()
    };
    let held_out = synthetic_dataset(&params, 900).unwrap();
    let descs = image_descriptors(&held_out, &cfg.recognition).unwrap();
    let data = labeled_features(&held_out, &descs, &rec.codebook, &cfg.recognition, true).unwrap();
    let acc = feature_accuracy(&rec.svm, &data);
    assert!(acc >= 0.9, "held-out accuracy {acc}");
}

#[test]
fn model_directory_roundtrip() {
    let cfg = small_config();
    let rec = recognizer(&cfg);
    let dir = tempfile::tempdir().unwrap();
    save_recognizer(dir.path(), &rec).unwrap();
    let back = load_recognizer(dir.path(), &cfg.recognition).unwrap();
    assert_eq!(back.codebook.to_text(), rec.codebook.to_text());
    assert_eq!(back.svm.to_text(), rec.svm.to_text());
    assert_eq!(back.table.to_text(), rec.table.to_text());
}

#[test]
fn pipeline_tracks_both_objects_and_repeats_exactly() {
    let cfg = small_config();
    let rec = recognizer(&cfg);
    let (frames, truth) = cross2(40);
    let a = run_pipeline(&frames, &rec, &cfg, Some(&truth)).unwrap();
    let b = run_pipeline(&frames, &rec, &cfg, Some(&truth)).unwrap();
    assert_eq!(tracks_to_jsonl(&a.tracks).unwrap(), tracks_to_jsonl(&b.tracks).unwrap());
    assert_eq!(a.motion.len(), frames.len());
    let tracking = a.metrics.as_ref().unwrap().tracking.as_ref().unwrap();
    assert!(tracking.success_rate >= 0.7, "{tracking:?}");
    let first: Vec<usize> = a.tracks.iter().filter(|r| r.frame == 0).map(|r| r.id).collect();
    assert_eq!(first.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    write_pipeline(dir.path(), &frames, &a, &cfg).unwrap();
    for f in [TRACKS_FILE, HYPOTHESES_FILE, METRICS_FILE, "blobs.jsonl", "mask_0039.pgm"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn pipeline_without_truth_has_no_metrics() {
    let cfg = small_config();
    let rec = recognizer(&cfg);
    let (frames, _) = cross2(3);
    let out = run_pipeline(&frames, &rec, &cfg, None).unwrap();
    assert!(out.metrics.is_none());
    assert!(run_pipeline(&[], &rec, &cfg, None).is_err());
}

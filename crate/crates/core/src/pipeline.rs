//! End-to-end orchestration: motion detection, recognition, tracking and
//! evaluation over one frame sequence.

use std::path::Path;

use serde::Serialize;

use crate::background::MotionDetector;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frame_io::{to_grayscale, write_atomic, write_pgm, write_ppm, FramePattern, FrameTruth};
use crate::image::{BinaryMask, BoxF, GrayFrame, RgbFrame};
use crate::metrics::{evaluate_detection, evaluate_tracks, MetricsReport, TruthFrame};
use crate::recognition::{recognize_frame, Detection, Recognizer};
use crate::shadow::{detect_shadow_edges, extract_blobs, split_shadow};
use crate::tracker::{annotate, tracks_to_jsonl, MultiTracker, TrackRecord};

/// Pixels whose shadow layer is darker than this are treated as cast shadow.
pub const SHADOW_LEVEL: f64 = 0.8;

/// Cleaned motion mask and its blobs for one frame.
#[derive(Clone, Debug)]
pub struct MotionFrame {
    pub mask: BinaryMask,
    pub blobs: Vec<BoxF>,
    /// Pixels removed from the motion mask as shadow.
    pub shadow: Option<BinaryMask>,
}

/// Motion masks for every frame, optionally with cast shadows removed.
pub fn detect_motion(frames: &[RgbFrame], cfg: &PipelineConfig) -> Result<Vec<MotionFrame>> {
    let mut det = MotionDetector::new(cfg.background.clone());
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let m = det.process(&to_grayscale(f))?;
        let (mask, shadow) = if cfg.pipeline.remove_shadows {
            let split = split_shadow(f, &detect_shadow_edges(f, &cfg.shadow)?, &cfg.shadow.solver)?;
            let (w, h) = f.dims();
            let shadow = BinaryMask::from_fn(w, h, |x, y| split.shadow.get(x, y) < SHADOW_LEVEL);
            (m.cleaned.and(&shadow.not())?, Some(shadow))
        } else {
            (m.cleaned, None)
        };
        let blobs = extract_blobs(&mask, cfg.pipeline.min_blob_area).iter().map(|b| b.to_box()).collect();
        out.push(MotionFrame { mask, blobs, shadow });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub frame: usize,
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub score: f64,
}

impl HypothesisRecord {
    pub fn new(frame: usize, d: &Detection) -> Self {
        let h = &d.hypothesis;
        Self {
            frame,
            class: h.class.clone(),
            x: h.x,
            y: h.y,
            s: h.s,
            score: h.score,
        }
    }
}

pub struct PipelineOutput {
    pub motion: Vec<MotionFrame>,
    pub detections: Vec<(usize, Detection)>,
    pub tracks: Vec<TrackRecord>,
    pub terminated: Vec<(usize, usize)>,
    pub metrics: Option<MetricsReport>,
}

/// Per-track bookkeeping for detection association.
struct TrackState {
    label: String,
    /// Consecutive detection rounds without a matching detection.
    misses: usize,
}

/// Greedy one-to-one matching of detections to track records at
/// `IoU > min_iou`, highest IoU first.
fn associate(detections: &[Detection], tracks: &[TrackRecord], min_iou: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        for (j, r) in tracks.iter().enumerate() {
            let iou = d.bbox.iou(&r.bbox());
            if iou > min_iou {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_d, mut used_t) = (vec![false; detections.len()], vec![false; tracks.len()]);
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_d[i] && !used_t[j] {
            used_d[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Detections by frame, track records, and `(track id, frame)` of ended tracks.
pub type Tracked = (Vec<(usize, Detection)>, Vec<TrackRecord>, Vec<(usize, usize)>);

/// Runs recognition every `detect_every` frames and tracks from there.
/// Detections are matched one-to-one to active tracks. An unmatched
/// detection restarts the nearest unmatched track of the same label when
/// re-anchoring is on, and starts a new track otherwise; tracks unmatched
/// for `drop_after` consecutive rounds end.
pub fn track_with_recognition(gray: &[GrayFrame], rec: &Recognizer, cfg: &PipelineConfig) -> Result<Tracked> {
    let p = &cfg.pipeline;
    let mut mt = MultiTracker::new(cfg.tracker_params())?;
    let mut states: Vec<TrackState> = Vec::new();
    let mut detections = Vec::new();
    let mut tracks = Vec::new();
    for (t, f) in gray.iter().enumerate() {
        let mut current = if t > 0 { mt.step(t, f) } else { Vec::new() };
        if t % p.detect_every == 0 {
            let found = recognize_frame(f, rec)?;
            let matched = associate(&found, &current, p.spawn_iou);
            let mut confirmed = vec![false; current.len()];
            let mut placed = vec![false; found.len()];
            for &(i, j) in &matched {
                placed[i] = true;
                confirmed[j] = true;
            }
            for (i, d) in found.iter().enumerate() {
                if placed[i] || current.iter().any(|r| r.bbox().iou(&d.bbox) > p.spawn_iou) {
                    continue;
                }
                let (cx, cy) = d.bbox.center();
                let candidate = (0..current.len())
                    .filter(|&j| p.reanchor && !confirmed[j] && states[current[j].id].label == d.label)
                    .min_by(|&a, &b| {
                        let da = (current[a].cx - cx).hypot(current[a].cy - cy);
                        let db = (current[b].cx - cx).hypot(current[b].cy - cy);
                        da.total_cmp(&db).then(a.cmp(&b))
                    });
                match candidate {
                    Some(j) => {
                        current[j] = mt.reanchor(current[j].id, t, f, &d.bbox);
                        confirmed[j] = true;
                    }
                    None => {
                        current.push(mt.spawn(t, f, &d.bbox));
                        confirmed.push(true);
                        states.push(TrackState {
                            label: d.label.clone(),
                            misses: 0,
                        });
                    }
                }
            }
            let mut ended = Vec::new();
            for (r, &ok) in current.iter().zip(&confirmed) {
                let st = &mut states[r.id];
                st.misses = if ok { 0 } else { st.misses + 1 };
                if p.drop_after > 0 && st.misses >= p.drop_after {
                    ended.push(r.id);
                }
            }
            for id in ended {
                mt.terminate(id, t);
            }
            detections.extend(found.into_iter().map(|d| (t, d)));
        }
        tracks.extend(current);
    }
    Ok((detections, tracks, mt.terminated))
}

pub fn truth_frames(truth: &[FrameTruth]) -> Vec<TruthFrame> {
    truth
        .iter()
        .map(|t| TruthFrame {
            frame: t.frame,
            boxes: t.boxes.clone(),
        })
        .collect()
}

/// Motion detection, recognition and tracking; metrics when truth is given.
pub fn run_pipeline(frames: &[RgbFrame], rec: &Recognizer, cfg: &PipelineConfig, truth: Option<&[FrameTruth]>) -> Result<PipelineOutput> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames"));
    }
    let motion = detect_motion(frames, cfg)?;
    let gray: Vec<GrayFrame> = frames.iter().map(to_grayscale).collect();
    let (detections, tracks, terminated) = track_with_recognition(&gray, rec, cfg)?;
    let metrics = match truth {
        Some(truth) => {
            let pairs: Vec<(&BinaryMask, &[BoxF], &BinaryMask, Vec<BoxF>)> = truth
                .iter()
                .filter(|t| t.frame < motion.len())
                .map(|t| {
                    let m = &motion[t.frame];
                    (&m.mask, m.blobs.as_slice(), &t.motion, t.boxes.iter().map(|b| b.1).collect())
                })
                .collect();
            let rows: Vec<(&BinaryMask, &[BoxF], &BinaryMask, &[BoxF])> = pairs.iter().map(|p| (p.0, p.1, p.2, p.3.as_slice())).collect();
            let tracking = if tracks.is_empty() {
                None
            } else {
                Some(evaluate_tracks(&tracks, &truth_frames(truth))?)
            };
            Some(MetricsReport {
                detection: Some(evaluate_detection(&rows)?),
                tracking,
                classifier: None,
            })
        }
        None => None,
    };
    Ok(PipelineOutput {
        motion,
        detections,
        tracks,
        terminated,
        metrics,
    })
}

pub const TRACKS_FILE: &str = "tracks.jsonl";
pub const HYPOTHESES_FILE: &str = "hypotheses.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn hypotheses_jsonl(detections: &[(usize, Detection)]) -> Result<String> {
    let mut s = String::new();
    for (t, d) in detections {
        s.push_str(&serde_json::to_string(&HypothesisRecord::new(*t, d))?);
        s.push('\n');
    }
    Ok(s)
}

/// Motion masks as `mask_%04d.pgm` and blob boxes as `blobs.jsonl`.
pub fn write_motion(dir: &Path, motion: &[MotionFrame]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pat = FramePattern::parse("mask_%04d.pgm")?;
    let mut blobs = String::new();
    for (t, m) in motion.iter().enumerate() {
        write_pgm(&dir.join(pat.format(t)), &m.mask.to_gray())?;
        let boxes: Vec<[f64; 4]> = m.blobs.iter().map(BoxF::to_array).collect();
        blobs.push_str(&serde_json::to_string(&serde_json::json!({ "frame": t, "blobs": boxes }))?);
        blobs.push('\n');
    }
    write_atomic(&dir.join("blobs.jsonl"), blobs.as_bytes())
}

/// Track file plus optional annotated frames.
pub fn write_tracks(dir: &Path, frames: &[RgbFrame], tracks: &[TrackRecord], annotate_frames: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(TRACKS_FILE), tracks_to_jsonl(tracks)?.as_bytes())?;
    if annotate_frames {
        let pat = FramePattern::parse("track_%04d.ppm")?;
        for (t, f) in frames.iter().enumerate() {
            let recs: Vec<&TrackRecord> = tracks.iter().filter(|r| r.frame == t).collect();
            write_ppm(&dir.join(pat.format(t)), &annotate(f, &recs))?;
        }
    }
    Ok(())
}

pub fn write_pipeline(dir: &Path, frames: &[RgbFrame], out: &PipelineOutput, cfg: &PipelineConfig) -> Result<()> {
    write_motion(dir, &out.motion)?;
    write_tracks(dir, frames, &out.tracks, cfg.pipeline.annotate)?;
    write_atomic(&dir.join(HYPOTHESES_FILE), hypotheses_jsonl(&out.detections)?.as_bytes())?;
    if let Some(m) = &out.metrics {
        write_atomic(&dir.join(METRICS_FILE), m.to_csv().as_bytes())?;
    }
    Ok(())
}

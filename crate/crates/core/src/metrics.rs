//! Detection and tracking metrics against synthetic ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, BoxF};
use crate::tracker::TrackRecord;

/// Boxes match when their IoU exceeds this.
pub const MATCH_IOU: f64 = 0.5;

/// Pixel F1 of a predicted mask; two empty masks score 1.
pub fn mask_f1(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if pred.dims() != truth.dims() {
        return Err(Error::Dimensions {
            expected: truth.dims(),
            got: pred.dims(),
        });
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    let (w, h) = pred.dims();
    for y in 0..h {
        for x in 0..w {
            match (pred.get(x, y), truth.get(x, y)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// Greedy one-to-one matching by descending IoU (ties: lower prediction
/// index, then lower truth index); returns `(prediction, truth, iou)`.
pub fn greedy_match(pred: &[BoxF], truth: &[BoxF]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let iou = p.iou(t);
            if iou > MATCH_IOU {
                pairs.push((i, j, iou));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let (mut used_p, mut used_t) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (i, j, iou) in pairs {
        if used_p.contains(&i) || used_t.contains(&j) {
            continue;
        }
        used_p.insert(i);
        used_t.insert(j);
        out.push((i, j, iou));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionMetrics {
    pub frames: usize,
    pub mean_mask_f1: f64,
    pub blob_precision: f64,
    pub blob_recall: f64,
}

/// Mask F1 averaged over frames, blob precision/recall pooled over frames.
/// Each entry is `(predicted mask, predicted blobs, truth mask, truth boxes)`.
pub fn evaluate_detection(frames: &[(&BinaryMask, &[BoxF], &BinaryMask, &[BoxF])]) -> Result<DetectionMetrics> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let (mut f1, mut matched, mut n_pred, mut n_truth) = (0.0, 0usize, 0usize, 0usize);
    for (pm, pb, tm, tb) in frames {
        f1 += mask_f1(pm, tm)?;
        matched += greedy_match(pb, tb).len();
        n_pred += pb.len();
        n_truth += tb.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(DetectionMetrics {
        frames: frames.len(),
        mean_mask_f1: f1 / frames.len() as f64,
        blob_precision: ratio(matched, n_pred),
        blob_recall: ratio(matched, n_truth),
    })
}

/// Ground-truth boxes of one frame, `(object id, box)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthFrame {
    pub frame: usize,
    pub boxes: Vec<(usize, BoxF)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackingMetrics {
    pub frames: usize,
    /// Truth-object frames.
    pub truth_instances: usize,
    pub matched: usize,
    /// Matched fraction of truth-object frames.
    pub success_rate: f64,
    /// Center distance over matched frames, pixels.
    pub mean_center_error: f64,
    /// `(track id, mean center error over its matched frames)`.
    pub per_track_error: Vec<(usize, f64)>,
    /// Unmatched track boxes per frame.
    pub fp_per_frame: f64,
    pub identity_switches: usize,
}

/// Per-frame greedy matching of track boxes to truth boxes. Frames are
/// those of the truth; an identity switch is counted whenever a truth
/// object is matched to a different track id than at its previous match.
pub fn evaluate_tracks(tracks: &[TrackRecord], truth: &[TruthFrame]) -> Result<TrackingMetrics> {
    let truth_frames: BTreeSet<usize> = truth.iter().map(|t| t.frame).collect();
    if truth.is_empty() || !tracks.iter().any(|r| truth_frames.contains(&r.frame)) {
        return Err(Error::invalid("tracks and truth share no frames"));
    }
    let mut by_frame: BTreeMap<usize, Vec<&TrackRecord>> = BTreeMap::new();
    for r in tracks {
        by_frame.entry(r.frame).or_default().push(r);
    }
    let (mut instances, mut matched, mut fp, mut switches) = (0usize, 0usize, 0usize, 0usize);
    let mut err_sum = 0.0;
    let mut per_track: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut last_id: BTreeMap<usize, usize> = BTreeMap::new();
    for tf in truth {
        let mut recs: Vec<&TrackRecord> = by_frame.get(&tf.frame).cloned().unwrap_or_default();
        recs.sort_by_key(|r| r.id);
        let pred: Vec<BoxF> = recs.iter().map(|r| r.bbox()).collect();
        let tboxes: Vec<BoxF> = tf.boxes.iter().map(|b| b.1).collect();
        let m = greedy_match(&pred, &tboxes);
        instances += tboxes.len();
        matched += m.len();
        fp += pred.len() - m.len();
        for (i, j, _) in m {
            let (px, py) = pred[i].center();
            let (tx, ty) = tboxes[j].center();
            let e = ((px - tx).powi(2) + (py - ty).powi(2)).sqrt();
            err_sum += e;
            let slot = per_track.entry(recs[i].id).or_insert((0.0, 0));
            slot.0 += e;
            slot.1 += 1;
            let obj = tf.boxes[j].0;
            if let Some(prev) = last_id.insert(obj, recs[i].id) {
                if prev != recs[i].id {
                    switches += 1;
                }
            }
        }
    }
    Ok(TrackingMetrics {
        frames: truth.len(),
        truth_instances: instances,
        matched,
        success_rate: if instances == 0 { 0.0 } else { matched as f64 / instances as f64 },
        mean_center_error: if matched == 0 { 0.0 } else { err_sum / matched as f64 },
        per_track_error: per_track.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect(),
        fp_per_frame: fp as f64 / truth.len() as f64,
        identity_switches: switches,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub detection: Option<DetectionMetrics>,
    pub tracking: Option<TrackingMetrics>,
    /// Classifier accuracy and per-class AUC, when a labelled set was evaluated.
    pub classifier: Option<(f64, Vec<f64>)>,
}

impl MetricsReport {
    /// `metric,value,definition` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,definition\n");
        let mut row = |name: &str, v: f64, def: &str| s.push_str(&format!("{name},{v},{def}\n"));
        if let Some(d) = &self.detection {
            row("mask_f1", d.mean_mask_f1, "pixel F1 of the motion mask averaged over frames");
            row("blob_precision", d.blob_precision, "blobs matched to a truth box at IoU > 0.5 over all blobs");
            row("blob_recall", d.blob_recall, "truth boxes matched to a blob at IoU > 0.5 over all truth boxes");
        }
        if let Some(t) = &self.tracking {
            row("success_rate", t.success_rate, "truth-object frames matched to a track at IoU > 0.5");
            row("mean_center_error", t.mean_center_error, "center distance in pixels over matched frames");
            row("fp_per_frame", t.fp_per_frame, "unmatched track boxes per frame");
            row("identity_switches", t.identity_switches as f64, "changes of the track id matched to a truth object");
            for (id, e) in &t.per_track_error {
                row(&format!("center_error_track_{id}"), *e, "center distance in pixels over this track's matched frames");
            }
        }
        if let Some((acc, aucs)) = &self.classifier {
            row("accuracy", *acc, "correct predictions over all predictions");
            for (i, a) in aucs.iter().enumerate() {
                row(&format!("auc_{i}"), *a, "one-vs-rest area under the ROC curve");
            }
        }
        s
    }
}

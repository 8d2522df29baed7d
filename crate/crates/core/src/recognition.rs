//! Implicit-shape-model voting with scale-adaptive mean-shift, star-shaped
//! pictorial structures solved by generalized distance transforms, and
//! BoW/SVM verification of object and domain hypotheses.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict, SvmModel};
use crate::error::{Error, Result};
use crate::image::{BoxF, GrayFrame};
use crate::shadow::gaussian_blur;
use crate::vocabulary::{bow_histogram, extract_multiscale, parse_numbers, quantize, Codebook, Descriptor, DescriptorParams, QuantizeParams};

/// Label returned for frames without any usable descriptor.
pub const UNKNOWN: &str = "unknown";
/// Verification class name for non-object windows.
pub const BACKGROUND: &str = "background";

// ---------------------------------------------------------------------------
// Occurrences and votes

#[derive(Clone, Debug, PartialEq)]
pub struct Occurrence {
    /// Object center minus feature location, training pixels.
    pub dx: f64,
    pub dy: f64,
    pub feature_scale: f64,
    pub object_scale: f64,
    pub weight: f64,
}

/// One annotated training object reduced to its descriptors.
#[derive(Clone, Debug)]
pub struct TrainingObject {
    pub descriptors: Vec<Descriptor>,
    pub class: usize,
    pub center: (f64, f64),
    pub scale: f64,
}

/// Stored occurrence distributions per `(class, word)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccurrenceTable {
    pub classes: Vec<String>,
    /// `entries[class][word]`, weights summing to 1 when non-empty.
    pub entries: Vec<Vec<Vec<Occurrence>>>,
    /// Mean width/height ratio of each class's training boxes.
    pub aspect: Vec<f64>,
}

impl OccurrenceTable {
    pub fn words(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

fn occ_key(o: &Occurrence) -> [u64; 4] {
    [o.dx.to_bits(), o.dy.to_bits(), o.feature_scale.to_bits(), o.object_scale.to_bits()]
}

/// Records `(center - location, scales)` for every soft match of every
/// non-flat descriptor, merges identical occurrences and normalizes each
/// `(class, word)` list.
pub fn learn_occurrences(
    objects: &[TrainingObject],
    classes: &[String],
    aspect: &[f64],
    cb: &Codebook,
    q: &QuantizeParams,
) -> Result<OccurrenceTable> {
    if objects.iter().any(|o| o.class >= classes.len()) {
        return Err(Error::invalid("training object class out of range"));
    }
    let mut acc: Vec<Vec<HashMap<[u64; 4], (Occurrence, usize)>>> = vec![vec![HashMap::new(); cb.k()]; classes.len()];
    let mut any = false;
    for o in objects {
        for d in o.descriptors.iter().filter(|d| !d.is_flat()) {
            any = true;
            for (word, p) in quantize(&d.vector, cb, q).soft.into_iter().filter(|s| s.1 > 0.0) {
                let occ = Occurrence {
                    dx: o.center.0 - d.x,
                    dy: o.center.1 - d.y,
                    feature_scale: d.scale,
                    object_scale: o.scale,
                    weight: p,
                };
                let slot = &mut acc[o.class][word];
                let order = slot.len();
                slot.entry(occ_key(&occ)).and_modify(|e| e.0.weight += p).or_insert((occ, order));
            }
        }
    }
    if !any {
        return Err(Error::invalid("no descriptors in any training example"));
    }
    let entries = acc
        .into_iter()
        .map(|words| {
            words
                .into_iter()
                .map(|m| {
                    let mut list: Vec<(Occurrence, usize)> = m.into_values().collect();
                    list.sort_by_key(|e| e.1);
                    let total: f64 = list.iter().map(|e| e.0.weight).sum();
                    list.into_iter()
                        .map(|(mut o, _)| {
                            o.weight /= total;
                            o
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let aspect = if aspect.len() == classes.len() {
        aspect.to_vec()
    } else {
        vec![1.0; classes.len()]
    };
    Ok(OccurrenceTable {
        classes: classes.to_vec(),
        entries,
        aspect,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vote {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub weight: f64,
}

/// Every feature votes through each soft-matched word for every stored
/// occurrence, at `l + offset * (s_f / s_occ)`.
pub fn cast_votes(descs: &[Descriptor], cb: &Codebook, table: &OccurrenceTable, class: usize, q: &QuantizeParams) -> Vec<Vote> {
    let mut votes = Vec::new();
    for d in descs.iter().filter(|d| !d.is_flat()) {
        for (word, p) in quantize(&d.vector, cb, q).soft {
            for o in &table.entries[class][word] {
                let r = d.scale / o.feature_scale;
                votes.push(Vote {
                    x: d.x + o.dx * r,
                    y: d.y + o.dy * r,
                    s: o.object_scale * r,
                    weight: o.weight * p,
                });
            }
        }
    }
    votes
}

// ---------------------------------------------------------------------------
// Mean-shift

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub score: f64,
}

/// Kernel volume for bandwidth `b`.
pub fn kernel_volume(b: f64) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * b * b * b
}

fn epanechnikov(u2: f64) -> f64 {
    if u2 < 1.0 {
        1.0 - u2
    } else {
        0.0
    }
}

struct VoteIndex<'a> {
    votes: &'a [Vote],
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> VoteIndex<'a> {
    fn new(votes: &'a [Vote], cell: f64) -> Self {
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, v) in votes.iter().enumerate() {
            grid.entry(((v.x / cell).floor() as i64, (v.y / cell).floor() as i64)).or_default().push(i);
        }
        Self { votes, cell, grid }
    }

    /// Votes within `radius <= cell` of `(x, y)` in the image plane.
    fn near(&self, x: f64, y: f64, mut f: impl FnMut(&Vote)) {
        let (cx, cy) = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                if let Some(ids) = self.grid.get(&(gx, gy)) {
                    ids.iter().for_each(|&i| f(&self.votes[i]));
                }
            }
        }
    }
}

/// Balloon density estimate at `(x, y, s)` with bandwidth `b0 * s`.
pub fn vote_density(votes: &[Vote], b0: f64, x: f64, y: f64, s: f64) -> f64 {
    let b = b0 * s;
    let sum: f64 = votes
        .iter()
        .map(|v| v.weight * epanechnikov(((x - v.x).powi(2) + (y - v.y).powi(2) + (s - v.s).powi(2)) / (b * b)))
        .sum();
    sum / kernel_volume(b)
}

fn density_indexed(index: &VoteIndex, b0: f64, x: f64, y: f64, s: f64) -> f64 {
    let b = b0 * s;
    let mut sum = 0.0;
    index.near(x, y, |v| {
        sum += v.weight * epanechnikov(((x - v.x).powi(2) + (y - v.y).powi(2) + (s - v.s).powi(2)) / (b * b));
    });
    sum / kernel_volume(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanShiftParams {
    pub b0: f64,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            b0: 0.1,
            max_iter: 100,
            tolerance: 1e-3,
        }
    }
}

/// Modes of the vote density: mean-shift from deduplicated vote seeds,
/// modes closer than `b/2` merged in favour of the higher score, sorted by
/// descending score.
pub fn meanshift_modes(votes: &[Vote], params: &MeanShiftParams) -> Vec<Mode> {
    let votes: Vec<Vote> = votes.iter().copied().filter(|v| v.weight > 0.0 && v.s > 0.0).collect();
    if votes.is_empty() || !(params.b0 > 0.0) {
        return Vec::new();
    }
    let s_max = votes.iter().map(|v| v.s).fold(0.0, f64::max);
    // a window centered at scale s reaches votes of scale up to s/(1-b0)
    let reach = if params.b0 < 1.0 { s_max / (1.0 - params.b0) } else { s_max * 4.0 };
    let index = VoteIndex::new(&votes, params.b0 * reach);
    let mut seeds: Vec<(f64, f64, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in &votes {
        let half = params.b0 * v.s / 2.0;
        let key = ((v.x / half).floor() as i64, (v.y / half).floor() as i64, (v.s / half).floor() as i64);
        if seen.insert(key) {
            seeds.push((v.x, v.y, v.s));
        }
    }
    let mut modes: Vec<Mode> = Vec::new();
    for (mut x, mut y, mut s) in seeds {
        for _ in 0..params.max_iter {
            let b = params.b0 * s;
            let (mut wx, mut wy, mut ws, mut wt) = (0.0, 0.0, 0.0, 0.0);
            index.near(x, y, |v| {
                let u2 = ((x - v.x).powi(2) + (y - v.y).powi(2) + (s - v.s).powi(2)) / (b * b);
                if u2 < 1.0 {
                    wx += v.weight * v.x;
                    wy += v.weight * v.y;
                    ws += v.weight * v.s;
                    wt += v.weight;
                }
            });
            if wt <= 0.0 {
                break;
            }
            let (nx, ny, ns) = (wx / wt, wy / wt, ws / wt);
            let shift = ((nx - x).powi(2) + (ny - y).powi(2) + (ns - s).powi(2)).sqrt();
            (x, y, s) = (nx, ny, ns);
            if shift < params.tolerance {
                break;
            }
        }
        let score = density_indexed(&index, params.b0, x, y, s);
        if score > 0.0 {
            modes.push(Mode { x, y, s, score });
        }
    }
    modes.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    let mut kept: Vec<Mode> = Vec::new();
    for m in modes {
        let close = kept.iter().any(|k| {
            let r = params.b0 * k.s / 2.0;
            (k.x - m.x).powi(2) + (k.y - m.y).powi(2) + (k.s - m.s).powi(2) < r * r
        });
        if !close {
            kept.push(m);
        }
    }
    kept
}

// ---------------------------------------------------------------------------
// Distance transform and pictorial structures

/// Generalized distance transform of a cost grid evaluated on an output
/// domain of `out_w x out_h` integer points starting at `origin`:
/// `D(p) = min_q cost(q) + wx (px - qx)^2 + wy (py - qy)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTransform {
    pub origin: (i64, i64),
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Minimizing source location per output point.
    pub argmin: Vec<(usize, usize)>,
}

impl DistanceTransform {
    pub fn at(&self, px: i64, py: i64) -> Option<(f64, (usize, usize))> {
        let (i, j) = (px - self.origin.0, py - self.origin.1);
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return None;
        }
        let k = j as usize * self.width + i as usize;
        Some((self.values[k], self.argmin[k]))
    }
}

/// Lower envelope of parabolas `f(q) + w (p - q)^2`, queried at `p0..p0+n`.
/// Returns the minimizing `q` per query; exact ties keep the lower `q`.
fn envelope_argmin(f: &[f64], w: f64, p0: i64, n: usize) -> Vec<usize> {
    let m = f.len();
    if w <= 0.0 || !w.is_finite() {
        let best = (0..m).fold(0, |b, q| if f[q] < f[b] { q } else { b });
        return vec![best; n];
    }
    let mut v = vec![0usize; m];
    let mut z = vec![0.0f64; m + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let key = |q: usize| f[q] + w * (q as f64) * (q as f64);
    for q in 1..m {
        loop {
            let r = v[k];
            let s = (key(q) - key(r)) / (2.0 * w * (q as f64 - r as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // q dominates the only remaining parabola everywhere
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let p = (p0 + i as i64) as f64;
        while z[k + 1] < p {
            k += 1;
        }
        out.push(v[k]);
    }
    out
}

#[inline]
fn deformed(c: f64, wx: f64, wy: f64, dx: f64, dy: f64) -> f64 {
    c + wx * dx * dx + wy * dy * dy
}

pub fn distance_transform(cost: &GrayFrame, wx: f64, wy: f64, origin: (i64, i64), out_w: usize, out_h: usize) -> Result<DistanceTransform> {
    let (w, h) = cost.dims();
    if w == 0 || h == 0 {
        return Err(Error::invalid("distance transform of an empty grid"));
    }
    // rows: for every source row qy and output column, the best qx
    let mut row_arg = vec![0usize; h * out_w];
    let mut row_val = vec![0.0; h * out_w];
    for qy in 0..h {
        let f = &cost.as_slice()[qy * w..(qy + 1) * w];
        let arg = envelope_argmin(f, wx, origin.0, out_w);
        for (i, &qx) in arg.iter().enumerate() {
            let dx = (origin.0 + i as i64 - qx as i64) as f64;
            row_arg[qy * out_w + i] = qx;
            row_val[qy * out_w + i] = f[qx] + wx * dx * dx;
        }
    }
    let mut values = vec![0.0; out_w * out_h];
    let mut argmin = vec![(0, 0); out_w * out_h];
    let mut col = vec![0.0; h];
    for i in 0..out_w {
        for (qy, c) in col.iter_mut().enumerate() {
            *c = row_val[qy * out_w + i];
        }
        let arg = envelope_argmin(&col, wy, origin.1, out_h);
        for (j, &qy) in arg.iter().enumerate() {
            let qx = row_arg[qy * out_w + i];
            let dx = (origin.0 + i as i64 - qx as i64) as f64;
            let dy = (origin.1 + j as i64 - qy as i64) as f64;
            values[j * out_w + i] = deformed(cost.get(qx, qy), wx, wy, dx, dy);
            argmin[j * out_w + i] = (qx, qy);
        }
    }
    Ok(DistanceTransform {
        origin,
        width: out_w,
        height: out_h,
        values,
        argmin,
    })
}

/// Star model geometry in pixels: child `i` is expected at root + offset,
/// with diagonal deformation covariance `variance`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarModel {
    pub offsets: Vec<(i64, i64)>,
    pub variances: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartMatch {
    /// Root first, then children.
    pub locations: Vec<(usize, usize)>,
    pub energy: f64,
}

/// Exact minimizer of appearance plus Mahalanobis deformation energy for a
/// star model; `costmaps[0]` is the root.
pub fn match_parts(model: &StarModel, costmaps: &[GrayFrame]) -> Result<PartMatch> {
    let children = model.offsets.len();
    if costmaps.len() != children + 1 || model.variances.len() != children {
        return Err(Error::invalid("star model and cost maps disagree on the part count"));
    }
    let (w, h) = costmaps[0].dims();
    if w == 0 || h == 0 {
        return Err(Error::invalid("empty cost grid"));
    }
    for c in costmaps {
        crate::image::check_dims((w, h), c.dims())?;
    }
    if model.variances.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
        return Err(Error::invalid("deformation variances must be positive"));
    }
    let dts = model
        .offsets
        .iter()
        .zip(&model.variances)
        .zip(&costmaps[1..])
        .map(|((&(ox, oy), &(vx, vy)), c)| distance_transform(c, 1.0 / vx, 1.0 / vy, (ox, oy), w, h))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            let mut e = costmaps[0].get(x, y);
            for dt in &dts {
                e += dt.values[y * w + x];
            }
            if best.is_none_or(|b| e < b.0) {
                best = Some((e, x, y));
            }
        }
    }
    let (energy, x, y) = best.unwrap();
    let mut locations = vec![(x, y)];
    locations.extend(dts.iter().map(|dt| dt.argmin[y * w + x]));
    Ok(PartMatch { locations, energy })
}

/// Scale-free part layout for one class; anchors and standard deviations
/// are fractions of the object scale.
#[derive(Clone, Debug, PartialEq)]
pub struct PartModel {
    pub class: usize,
    pub anchors: Vec<(f64, f64)>,
    pub sigma: Vec<(f64, f64)>,
    /// Root table first, then one per child.
    pub tables: Vec<OccurrenceTable>,
}

impl PartModel {
    pub fn at_scale(&self, s: f64) -> StarModel {
        StarModel {
            offsets: self.anchors.iter().map(|&(ax, ay)| ((ax * s).round() as i64, (ay * s).round() as i64)).collect(),
            variances: self.sigma.iter().map(|&(sx, sy)| ((sx * s).powi(2).max(1e-6), (sy * s).powi(2).max(1e-6))).collect(),
        }
    }
}

/// Top and bottom halves as children of the whole-object root.
pub const HALF_ANCHORS: [(f64, f64); 2] = [(0.0, -0.25), (0.0, 0.25)];
const HALF_SIGMA: (f64, f64) = (0.08, 0.08);
const COST_FLOOR: f64 = 1e-3;

/// Accumulates votes into a grid, smooths, and maps to `-ln(floor + A/max A)`.
pub fn vote_cost_map(votes: &[Vote], origin: (f64, f64), width: usize, height: usize, sigma: f64) -> GrayFrame {
    let mut acc = GrayFrame::new(width, height);
    for v in votes {
        let (i, j) = ((v.x - origin.0).round(), (v.y - origin.1).round());
        if i >= 0.0 && j >= 0.0 && (i as usize) < width && (j as usize) < height {
            let (i, j) = (i as usize, j as usize);
            acc.set(i, j, acc.get(i, j) + v.weight);
        }
    }
    let acc = gaussian_blur(&acc, sigma);
    let max = acc.max();
    acc.map(|a| -(COST_FLOOR + if max > 0.0 { a / max } else { 0.0 }).ln())
}

// ---------------------------------------------------------------------------
// Frame-level recognition

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecognitionParams {
    pub descriptors: DescriptorParams,
    pub quantize: QuantizeParams,
    pub meanshift: MeanShiftParams,
    /// Hypotheses below this fraction of the best frame score are dropped.
    pub score_fraction: f64,
    /// Maximum accepted part energy, per part.
    pub part_energy: f64,
    pub use_parts: bool,
    /// Boxes overlapping a stronger accepted detection beyond this IoU are dropped.
    pub nms_iou: f64,
    /// Cap on hypotheses examined per class.
    pub max_hypotheses: usize,
}

impl Default for RecognitionParams {
    fn default() -> Self {
        Self {
            descriptors: DescriptorParams::default(),
            quantize: QuantizeParams::default(),
            meanshift: MeanShiftParams::default(),
            score_fraction: 0.25,
            part_energy: 3.0,
            use_parts: true,
            nms_iou: 0.3,
            max_hypotheses: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectHypothesis {
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub hypothesis: ObjectHypothesis,
    /// Label assigned by the verifying classifier.
    pub label: String,
    pub bbox: BoxF,
    pub part_energy: Option<f64>,
}

/// Trained models used by [`recognize_frame`].
#[derive(Clone, Debug)]
pub struct Recognizer {
    pub codebook: Codebook,
    pub table: OccurrenceTable,
    /// Verifier over object classes plus [`BACKGROUND`].
    pub svm: SvmModel,
    pub parts: Vec<PartModel>,
    pub params: RecognitionParams,
}

impl Recognizer {
    /// Box of an object of class `class` centered at `(x, y)` with scale `s`.
    pub fn hypothesis_box(&self, class: usize, x: f64, y: f64, s: f64) -> BoxF {
        let a = self.table.aspect[class].max(1e-3).sqrt();
        BoxF::from_center(x, y, s * a, s / a)
    }
}

/// Descriptors whose patch center falls inside `b`.
pub fn descriptors_in(descs: &[Descriptor], b: &BoxF) -> Vec<Descriptor> {
    descs
        .iter()
        .filter(|d| d.x >= b.x && d.x < b.x + b.w && d.y >= b.y && d.y < b.y + b.h)
        .cloned()
        .collect()
}

fn refine_with_parts(rec: &Recognizer, model: &PartModel, descs: &[Descriptor], h: &ObjectHypothesis) -> Result<(f64, f64, f64)> {
    let q = &rec.params.quantize;
    let margin = (0.5 * h.s).ceil();
    let origin = ((h.x - h.s).floor() - margin, (h.y - h.s).floor() - margin);
    let size = (2.0 * (h.s + margin)).ceil().max(1.0) as usize;
    let sigma = (rec.params.meanshift.b0 * h.s).max(0.5);
    let maps: Vec<GrayFrame> = model
        .tables
        .iter()
        .map(|t| vote_cost_map(&cast_votes(descs, &rec.codebook, t, model.class, q), origin, size, size, sigma))
        .collect();
    let star = model.at_scale(h.s);
    let m = match_parts(&star, &maps)?;
    let (rx, ry) = m.locations[0];
    Ok((origin.0 + rx as f64, origin.1 + ry as f64, m.energy))
}

/// Votes per class, mean-shift hypotheses, BoW/SVM verification, optional
/// part refinement, then greedy non-maximum suppression.
pub fn recognize_frame(f: &GrayFrame, rec: &Recognizer) -> Result<Vec<Detection>> {
    let p = &rec.params;
    if p.descriptors.patch > f.width().min(f.height()) {
        return Ok(Vec::new());
    }
    let descs = extract_multiscale(f, &p.descriptors)?;
    if descs.iter().all(Descriptor::is_flat) {
        return Ok(Vec::new());
    }
    let mut hyps: Vec<(usize, Mode)> = Vec::new();
    for class in 0..rec.table.classes.len() {
        let votes = cast_votes(&descs, &rec.codebook, &rec.table, class, &p.quantize);
        let modes = meanshift_modes(&votes, &p.meanshift);
        hyps.extend(modes.into_iter().take(p.max_hypotheses).map(|m| (class, m)));
    }
    let best = hyps.iter().map(|h| h.1.score).fold(0.0, f64::max);
    hyps.retain(|h| h.1.score >= p.score_fraction * best);
    hyps.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(&b.0)));
    let mut out: Vec<Detection> = Vec::new();
    for (class, mode) in hyps {
        let name = &rec.table.classes[class];
        let mut hyp = ObjectHypothesis {
            class: name.clone(),
            x: mode.x,
            y: mode.y,
            s: mode.s,
            score: mode.score,
        };
        let mut energy = None;
        if p.use_parts {
            if let Some(model) = rec.parts.iter().find(|m| m.class == class) {
                let (x, y, e) = refine_with_parts(rec, model, &descs, &hyp)?;
                if e > p.part_energy * model.tables.len() as f64 {
                    continue;
                }
                hyp.x = x;
                hyp.y = y;
                energy = Some(e);
            }
        }
        let bbox = rec.hypothesis_box(class, hyp.x, hyp.y, hyp.s);
        let inside = descriptors_in(&descs, &bbox);
        let hist = bow_histogram(&inside, &rec.codebook, rec.codebook.idf.as_deref(), &p.quantize);
        if hist.is_zero() {
            continue;
        }
        let label = rec.svm.classes[predict(&rec.svm, &hist.weights).label].clone();
        if &label != name {
            continue;
        }
        if out.iter().any(|d| d.bbox.iou(&bbox) > p.nms_iou) {
            continue;
        }
        out.push(Detection {
            hypothesis: hyp,
            label,
            bbox,
            part_energy: energy,
        });
    }
    Ok(out)
}

/// Whole-frame BoW classified by the domain SVM; the vote distribution is
/// normalized to sum 1. Featureless frames are labelled [`UNKNOWN`].
pub fn recognize_domain(f: &GrayFrame, cb: &Codebook, svm: &SvmModel, d: &DescriptorParams, q: &QuantizeParams) -> Result<(String, Vec<f64>)> {
    let n = svm.classes.len();
    let descs = if d.patch <= f.width().min(f.height()) {
        extract_multiscale(f, d)?
    } else {
        Vec::new()
    };
    let hist = bow_histogram(&descs, cb, cb.idf.as_deref(), q);
    if hist.is_zero() {
        return Ok((UNKNOWN.to_string(), vec![1.0 / n as f64; n]));
    }
    let pred = predict(svm, &hist.weights);
    Ok((svm.classes[pred.label].clone(), pred.distribution()))
}

// ---------------------------------------------------------------------------
// Serialization

const TABLE_HEADER: &str = "vtrack-occurrences v1";
const PARTS_HEADER: &str = "vtrack-parts v1";

impl OccurrenceTable {
    /// Non-empty `(class, word)` lists, one occurrence per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{TABLE_HEADER}\n{} {}\n", self.classes.len(), self.words());
        for (c, name) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "class {name} {:?}", self.aspect[c]);
        }
        for (c, words) in self.entries.iter().enumerate() {
            for (w, list) in words.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                let _ = writeln!(s, "entry {c} {w} {}", list.len());
                for o in list {
                    let _ = writeln!(s, "{:?} {:?} {:?} {:?} {:?}", o.dx, o.dy, o.feature_scale, o.object_scale, o.weight);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("occurrence table: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(TABLE_HEADER) {
            return Err(bad("missing header"));
        }
        let head: Vec<usize> = parse_numbers(lines.next().ok_or_else(|| bad("truncated"))?)?;
        let [n_classes, words] = head[..] else {
            return Err(bad("expected class and word counts"));
        };
        let mut classes = Vec::new();
        let mut aspect = Vec::new();
        for _ in 0..n_classes {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 || t[0] != "class" {
                return Err(bad("bad class line"));
            }
            classes.push(t[1].to_string());
            aspect.push(t[2].parse().map_err(|_| bad("bad aspect"))?);
        }
        let mut entries = vec![vec![Vec::new(); words]; n_classes];
        while let Some(line) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 || t[0] != "entry" {
                return Err(bad("bad entry line"));
            }
            let idx: Vec<usize> = parse_numbers(&t[1..].join(" "))?;
            let (c, w, n) = (idx[0], idx[1], idx[2]);
            if c >= n_classes || w >= words {
                return Err(bad("entry index out of range"));
            }
            for _ in 0..n {
                let v: Vec<f64> = parse_numbers(lines.next().ok_or_else(|| bad("truncated"))?)?;
                let [dx, dy, feature_scale, object_scale, weight] = v[..] else {
                    return Err(bad("occurrence needs five numbers"));
                };
                entries[c][w].push(Occurrence {
                    dx,
                    dy,
                    feature_scale,
                    object_scale,
                    weight,
                });
            }
        }
        Ok(Self { classes, entries, aspect })
    }
}

/// Serializes part models; each model's tables are embedded in order.
pub fn parts_to_text(parts: &[PartModel]) -> String {
    let mut s = format!("{PARTS_HEADER}\n{}\n", parts.len());
    for p in parts {
        let _ = writeln!(s, "model {} {}", p.class, p.anchors.len());
        for (a, g) in p.anchors.iter().zip(&p.sigma) {
            let _ = writeln!(s, "{:?} {:?} {:?} {:?}", a.0, a.1, g.0, g.1);
        }
        for t in &p.tables {
            let body = t.to_text();
            let _ = writeln!(s, "table {}", body.lines().count());
            s.push_str(&body);
        }
    }
    s
}

pub fn parts_from_text(text: &str) -> Result<Vec<PartModel>> {
    let bad = |m: &str| Error::Parse(format!("part models: {m}"));
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&PARTS_HEADER) {
        return Err(bad("missing header"));
    }
    let n: usize = lines.get(1).ok_or_else(|| bad("truncated"))?.trim().parse().map_err(|_| bad("bad count"))?;
    let mut at = 2;
    let mut next = || -> Result<&str> {
        let l = lines.get(at).copied().ok_or_else(|| bad("truncated"))?;
        at += 1;
        Ok(l)
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let head: Vec<String> = next()?.split_whitespace().map(str::to_string).collect();
        if head.len() != 3 || head[0] != "model" {
            return Err(bad("bad model line"));
        }
        let class: usize = head[1].parse().map_err(|_| bad("bad class"))?;
        let children: usize = head[2].parse().map_err(|_| bad("bad child count"))?;
        let mut anchors = Vec::new();
        let mut sigma = Vec::new();
        for _ in 0..children {
            let v: Vec<f64> = parse_numbers(next()?)?;
            let [ax, ay, sx, sy] = v[..] else {
                return Err(bad("anchor line needs four numbers"));
            };
            anchors.push((ax, ay));
            sigma.push((sx, sy));
        }
        let mut tables = Vec::new();
        for _ in 0..=children {
            let h = next()?;
            let count: usize = h
                .strip_prefix("table ")
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| bad("bad table line"))?;
            let body: Vec<&str> = (0..count).map(|_| next()).collect::<Result<_>>()?;
            tables.push(OccurrenceTable::from_text(&body.join("\n"))?);
        }
        out.push(PartModel {
            class,
            anchors,
            sigma,
            tables,
        });
    }
    Ok(out)
}

/// Builds the root-plus-halves part model for `class` from annotated boxes.
pub fn learn_part_model(
    examples: &[(Vec<Descriptor>, usize, BoxF)],
    class: usize,
    classes: &[String],
    aspect: &[f64],
    cb: &Codebook,
    q: &QuantizeParams,
) -> Result<PartModel> {
    let mut tables = Vec::new();
    let part_boxes = |b: &BoxF| -> Vec<(BoxF, (f64, f64))> {
        let s = b.area().sqrt();
        let (cx, cy) = b.center();
        let mut v = vec![(*b, (cx, cy))];
        for (i, &(ax, ay)) in HALF_ANCHORS.iter().enumerate() {
            let sub = BoxF::new(b.x, b.y + i as f64 * b.h / 2.0, b.w, b.h / 2.0);
            v.push((sub, (cx + ax * s, cy + ay * s)));
        }
        v
    };
    for part in 0..=HALF_ANCHORS.len() {
        let objects: Vec<TrainingObject> = examples
            .iter()
            .filter(|e| e.1 == class)
            .map(|(descs, c, b)| {
                let (sub, center) = part_boxes(b)[part];
                TrainingObject {
                    descriptors: descriptors_in(descs, &sub),
                    class: *c,
                    center,
                    scale: b.area().sqrt(),
                }
            })
            .collect();
        tables.push(learn_occurrences(&objects, classes, aspect, cb, q)?);
    }
    Ok(PartModel {
        class,
        anchors: HALF_ANCHORS.to_vec(),
        sigma: vec![HALF_SIGMA; HALF_ANCHORS.len()],
        tables,
    })
}

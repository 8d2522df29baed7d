//! Dense gradient-orientation descriptors, k-means codebooks, soft
//! quantization, bag-of-words histograms and the pyramid match kernel.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayFrame;

pub const DESCRIPTOR_DIM: usize = 128;
const CELLS: usize = 4;
const ORIENTATIONS: usize = 8;
const CLIP: f64 = 0.2;

/// A 128-d descriptor and the patch it was computed on.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub vector: Vec<f64>,
    /// Patch center, pixels.
    pub x: f64,
    pub y: f64,
    /// Patch side, pixels.
    pub scale: f64,
}

impl Descriptor {
    pub fn is_flat(&self) -> bool {
        self.vector.iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorParams {
    pub stride: usize,
    pub patch: usize,
    /// Pyramid levels; each halves the frame and doubles the patch footprint.
    pub levels: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            stride: 4,
            patch: 16,
            levels: 1,
        }
    }
}

/// Central-difference gradients with clamped borders, as (magnitude, angle).
fn polar_gradient(f: &GrayFrame) -> (GrayFrame, GrayFrame) {
    let (w, h) = f.dims();
    let mut mag = GrayFrame::new(w, h);
    let mut ang = GrayFrame::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = 0.5 * (f.get_clamped(xi + 1, yi) - f.get_clamped(xi - 1, yi));
            let gy = 0.5 * (f.get_clamped(xi, yi + 1) - f.get_clamped(xi, yi - 1));
            mag.set(x, y, (gx * gx + gy * gy).sqrt());
            ang.set(x, y, gy.atan2(gx).rem_euclid(std::f64::consts::TAU));
        }
    }
    (mag, ang)
}

fn l2_normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
        true
    } else {
        false
    }
}

fn patch_descriptor(mag: &GrayFrame, ang: &GrayFrame, x0: usize, y0: usize, patch: usize) -> Vec<f64> {
    let mut v = vec![0.0; DESCRIPTOR_DIM];
    let cell = patch as f64 / CELLS as f64;
    for v_ in 0..patch {
        for u in 0..patch {
            let m = mag.get(x0 + u, y0 + v_);
            if m == 0.0 {
                continue;
            }
            let o = ang.get(x0 + u, y0 + v_) / std::f64::consts::TAU * ORIENTATIONS as f64;
            let cx = (u as f64 + 0.5) / cell - 0.5;
            let cy = (v_ as f64 + 0.5) / cell - 0.5;
            let (o0, cx0, cy0) = (o.floor(), cx.floor(), cy.floor());
            let (fo, fx, fy) = (o - o0, cx - cx0, cy - cy0);
            for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                let yy = cy0 as isize + dy;
                if yy < 0 || yy >= CELLS as isize || wy == 0.0 {
                    continue;
                }
                for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                    let xx = cx0 as isize + dx;
                    if xx < 0 || xx >= CELLS as isize || wx == 0.0 {
                        continue;
                    }
                    for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let ob = (o0 as usize + dob) % ORIENTATIONS;
                        let idx = (yy as usize * CELLS + xx as usize) * ORIENTATIONS + ob;
                        v[idx] += m * wx * wy * wo;
                    }
                }
            }
        }
    }
    if l2_normalize(&mut v) {
        v.iter_mut().for_each(|a| *a = a.min(CLIP));
        l2_normalize(&mut v);
    }
    v
}

/// Descriptors on a dense grid of `patch`-sized windows every `stride`
/// pixels; 4x4 cells by 8 orientations, clipped at 0.2.
pub fn extract_descriptors(f: &GrayFrame, stride: usize, patch: usize) -> Result<Vec<Descriptor>> {
    let (w, h) = f.dims();
    if stride == 0 || patch == 0 {
        return Err(Error::invalid("descriptor stride and patch must be positive"));
    }
    if patch > w.min(h) {
        return Err(Error::invalid(format!("patch {patch} exceeds a {w}x{h} frame")));
    }
    let (mag, ang) = polar_gradient(f);
    let mut out = Vec::new();
    for y0 in (0..=h - patch).step_by(stride) {
        for x0 in (0..=w - patch).step_by(stride) {
            out.push(Descriptor {
                vector: patch_descriptor(&mag, &ang, x0, y0, patch),
                x: x0 as f64 + patch as f64 / 2.0,
                y: y0 as f64 + patch as f64 / 2.0,
                scale: patch as f64,
            });
        }
    }
    Ok(out)
}

/// 2x2 box downsampling; an odd last row or column is dropped.
pub fn downsample(f: &GrayFrame) -> GrayFrame {
    let (w, h) = (f.width() / 2, f.height() / 2);
    GrayFrame::from_fn(w, h, |x, y| {
        0.25 * (f.get(2 * x, 2 * y) + f.get(2 * x + 1, 2 * y) + f.get(2 * x, 2 * y + 1) + f.get(2 * x + 1, 2 * y + 1))
    })
}

/// Descriptors over `params.levels` pyramid levels, reported in level-0
/// coordinates. Levels too small for one patch are skipped.
pub fn extract_multiscale(f: &GrayFrame, params: &DescriptorParams) -> Result<Vec<Descriptor>> {
    let mut out = extract_descriptors(f, params.stride, params.patch)?;
    let mut level = f.clone();
    for l in 1..params.levels.max(1) {
        level = downsample(&level);
        if params.patch > level.width().min(level.height()) {
            break;
        }
        let k = (1usize << l) as f64;
        out.extend(extract_descriptors(&level, params.stride, params.patch)?.into_iter().map(|d| Descriptor {
            x: d.x * k,
            y: d.y * k,
            scale: d.scale * k,
            vector: d.vector,
        }));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// k-means

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest final SSE wins.
    pub n_init: usize,
    /// Cap on Hartigan refinement sweeps after Lloyd converges.
    pub refine_sweeps: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            n_init: 5,
            refine_sweeps: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    /// SSE after every assignment and update step of each restart.
    pub histories: Vec<Vec<f64>>,
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn sse(points: &[Vec<f64>], centroids: &[Vec<f64>], assign: &[usize]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| squared_distance(p, &centroids[a])).sum()
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut history = vec![sse(points, &centroids, &assign)];
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = points
                    .iter()
                    .zip(&assign)
                    .enumerate()
                    .filter(|(_, (_, &a))| counts[a] > 1)
                    .map(|(i, (p, &a))| (i, squared_distance(p, &centroids[a])))
                    .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if far == usize::MAX {
                    continue;
                }
                counts[assign[far]] -= 1;
                counts[c] = 1;
                assign[far] = c;
                centroids[c] = points[far].clone();
            }
        }
        history.push(sse(points, &centroids, &assign));
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        // keep the current label when it is already a nearest centroid
        let next: Vec<usize> = next
            .into_iter()
            .zip(&assign)
            .zip(points)
            .map(|((n, &a), p)| {
                if squared_distance(p, &centroids[a]) <= squared_distance(p, &centroids[n]) {
                    a
                } else {
                    n
                }
            })
            .collect();
        let changed = next != assign;
        assign = next;
        history.push(sse(points, &centroids, &assign));
        if !changed {
            break;
        }
    }
    (centroids, assign, history)
}

/// Hartigan single-point moves after Lloyd: a point changes cluster when
/// that lowers the SSE once both centroids are updated. Centroids are
/// recomputed exactly and the SSE recorded after every sweep; stops after a
/// sweep without moves or `max_sweeps` sweeps.
fn hartigan(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assign: &mut [usize], history: &mut Vec<f64>, max_sweeps: usize) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    assign.iter().for_each(|&a| counts[a] += 1);
    recompute_centroids(points, centroids, assign);
    history.push(sse(points, centroids, assign));
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assign[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let leave = na / (na - 1.0) * squared_distance(p, &centroids[a]);
            let mut best = (a, 0.0);
            for c in (0..k).filter(|&c| c != a) {
                let nc = counts[c] as f64;
                let delta = nc / (nc + 1.0) * squared_distance(p, &centroids[c]) - leave;
                if delta < best.1 {
                    best = (c, delta);
                }
            }
            let (c, delta) = best;
            // skip moves lost in rounding
            if c == a || delta > -1e-12 * (1.0 + leave) {
                continue;
            }
            let nc = counts[c] as f64;
            for (d, v) in p.iter().enumerate() {
                centroids[a][d] = (centroids[a][d] * na - v) / (na - 1.0);
                centroids[c][d] = (centroids[c][d] * nc + v) / (nc + 1.0);
            }
            counts[a] -= 1;
            counts[c] += 1;
            assign[i] = c;
            moved = true;
        }
        if !moved {
            break;
        }
        recompute_centroids(points, centroids, assign);
        history.push(sse(points, centroids, assign));
    }
}

fn recompute_centroids(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assign: &[usize]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for (c, (s, n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
        if *n > 0 {
            *c = s.iter().map(|v| v / *n as f64).collect();
        }
    }
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points.iter().map(|p| p.iter().map(|v| v.to_bits()).collect()).collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

/// k-means++ seeding, Lloyd iterations and Hartigan refinement, best of
/// `n_init` restarts.
pub fn kmeans_run(points: &[Vec<f64>], k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansRun> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!("{} points cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points differ in dimension"));
    }
    if distinct_count(points) < k {
        return Err(Error::invalid(format!("fewer than {k} distinct points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansRun> = None;
    let mut histories = Vec::new();
    for _ in 0..params.n_init.max(1) {
        let init = kmeans_pp(points, k, &mut rng);
        let (mut centroids, mut assignments, mut history) = lloyd(points, init, params.max_iter);
        hartigan(points, &mut centroids, &mut assignments, &mut history, params.refine_sweeps);
        let final_sse = *history.last().unwrap();
        histories.push(history);
        if best.as_ref().is_none_or(|b| final_sse < b.sse) {
            best = Some(KMeansRun {
                centroids,
                assignments,
                sse: final_sse,
                histories: Vec::new(),
            });
        }
    }
    let mut best = best.unwrap();
    best.histories = histories;
    Ok(best)
}

/// Trains a codebook of `k` words with default parameters.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Codebook> {
    let run = kmeans_run(points, k, seed, &KMeansParams::default())?;
    Codebook::new(run.centroids, seed)
}

// ---------------------------------------------------------------------------
// Codebook and quantization

const CODEBOOK_HEADER: &str = "vtrack-codebook v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub words: Vec<Vec<f64>>,
    pub seed: u64,
    /// Optional inverse document frequency per word.
    pub idf: Option<Vec<f64>>,
}

impl Codebook {
    pub fn new(words: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("codebook needs at least one word"));
        }
        let dim = words[0].len();
        if words.iter().any(|w| w.len() != dim) {
            return Err(Error::invalid("codebook words differ in dimension"));
        }
        if distinct_count(&words) != words.len() {
            return Err(Error::invalid("codebook has duplicate words"));
        }
        Ok(Self { words, seed, idf: None })
    }

    pub fn k(&self) -> usize {
        self.words.len()
    }

    pub fn dim(&self) -> usize {
        self.words[0].len()
    }

    pub fn with_idf(mut self, idf: Vec<f64>) -> Result<Self> {
        if idf.len() != self.k() {
            return Err(Error::invalid("idf length differs from codebook size"));
        }
        self.idf = Some(idf);
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{CODEBOOK_HEADER}\n{} {} {}\n", self.k(), self.dim(), self.seed);
        let line = |s: &mut String, v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        };
        for w in &self.words {
            line(&mut s, w);
        }
        if let Some(idf) = &self.idf {
            s.push_str("idf ");
            line(&mut s, idf);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CODEBOOK_HEADER) {
            return Err(Error::Parse("missing codebook header".into()));
        }
        let head: Vec<u64> = parse_numbers(lines.next().unwrap_or(""))?;
        let [k, dim, seed] = head[..] else {
            return Err(Error::Parse("codebook header needs K, dim and seed".into()));
        };
        let mut words = Vec::with_capacity(k as usize);
        for _ in 0..k {
            let w: Vec<f64> = parse_numbers(lines.next().ok_or_else(|| Error::Parse("truncated codebook".into()))?)?;
            if w.len() != dim as usize {
                return Err(Error::Parse("codebook word has wrong dimension".into()));
            }
            words.push(w);
        }
        let mut cb = Codebook::new(words, seed)?;
        if let Some(line) = lines.next().filter(|l| !l.is_empty()) {
            let rest = line
                .strip_prefix("idf ")
                .ok_or_else(|| Error::Parse("unexpected trailing codebook line".into()))?;
            cb = cb.with_idf(parse_numbers(rest)?)?;
        }
        Ok(cb)
    }
}

pub(crate) fn parse_numbers<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeParams {
    /// Number of nearest words receiving soft weight.
    pub m: usize,
    pub sigma: f64,
}

impl Default for QuantizeParams {
    fn default() -> Self {
        Self { m: 5, sigma: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    pub hard: usize,
    /// `(word, p(word | feature))` for the `m` nearest words, nearest first.
    pub soft: Vec<(usize, f64)>,
}

/// Nearest word (ties to the lower index) and Gaussian soft assignment over
/// the `m` nearest words.
pub fn quantize(d: &[f64], cb: &Codebook, params: &QuantizeParams) -> Quantized {
    let mut dist: Vec<(usize, f64)> = cb.words.iter().map(|w| squared_distance(d, w)).enumerate().collect();
    dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    dist.truncate(params.m.max(1));
    let d0 = dist[0].1;
    let s2 = 2.0 * params.sigma * params.sigma;
    let mut soft: Vec<(usize, f64)> = dist.iter().map(|&(i, d)| (i, (-(d - d0) / s2).exp())).collect();
    let total: f64 = soft.iter().map(|s| s.1).sum();
    soft.iter_mut().for_each(|s| s.1 /= total);
    Quantized { hard: dist[0].0, soft }
}

/// `idf_i = max(0, ln(N / (1 + n_i)))` from per-word document counts.
pub fn idf_weights(doc_freq: &[usize], n_images: usize) -> Vec<f64> {
    doc_freq
        .iter()
        .map(|&n| (n_images as f64 / (1.0 + n as f64)).ln().max(0.0))
        .collect()
}

/// Number of images in which each word is the hard assignment of some descriptor.
pub fn document_frequency(images: &[Vec<Descriptor>], cb: &Codebook, params: &QuantizeParams) -> Vec<usize> {
    let mut df = vec![0usize; cb.k()];
    for descs in images {
        let mut seen = vec![false; cb.k()];
        for d in descs.iter().filter(|d| !d.is_flat()) {
            seen[quantize(&d.vector, cb, params).hard] = true;
        }
        df.iter_mut().zip(seen).for_each(|(n, s)| *n += s as usize);
    }
    df
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowHistogram {
    pub weights: Vec<f64>,
}

impl BowHistogram {
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// Soft-assignment counts, optionally idf-weighted, L1-normalized. Flat
/// descriptors carry no gradient information and are skipped.
pub fn bow_histogram(descs: &[Descriptor], cb: &Codebook, idf: Option<&[f64]>, params: &QuantizeParams) -> BowHistogram {
    let mut weights = vec![0.0; cb.k()];
    for d in descs.iter().filter(|d| !d.is_flat()) {
        for (i, p) in quantize(&d.vector, cb, params).soft {
            weights[i] += p;
        }
    }
    if let Some(idf) = idf {
        weights.iter_mut().zip(idf).for_each(|(w, f)| *w *= f);
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    BowHistogram { weights }
}

// ---------------------------------------------------------------------------
// Pyramid match kernel

/// Multi-resolution bin counts of a point set; level `i` bins have side
/// `side0 * 2^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramPyramid {
    pub side0: f64,
    pub dim: usize,
    pub levels: Vec<BTreeMap<Vec<i64>, u32>>,
    pub count: usize,
}

impl HistogramPyramid {
    pub fn new(points: &[Vec<f64>], dim: usize, side0: f64, levels: usize) -> Result<Self> {
        if !(side0 > 0.0) || levels == 0 {
            return Err(Error::invalid("pyramid needs a positive base side and at least one level"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("pyramid point has wrong dimension"));
        }
        let mut out = vec![BTreeMap::new(); levels];
        for p in points {
            let mut key: Vec<i64> = p.iter().map(|v| (v / side0).floor() as i64).collect();
            for level in out.iter_mut() {
                *level.entry(key.clone()).or_insert(0) += 1;
                key.iter_mut().for_each(|k| *k = k.div_euclid(2));
            }
        }
        Ok(Self {
            side0,
            dim,
            levels: out,
            count: points.len(),
        })
    }

    fn same_geometry(&self, other: &Self) -> bool {
        self.side0 == other.side0 && self.dim == other.dim && self.levels.len() == other.levels.len()
    }
}

fn intersection(a: &BTreeMap<Vec<i64>, u32>, b: &BTreeMap<Vec<i64>, u32>) -> u64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, &n)| large.get(k).map(|&m| n.min(m) as u64))
        .sum()
}

/// `sum_i 2^-i (I_i - I_{i-1})` with `I_i` the histogram intersection at level i.
pub fn pmk(py: &HistogramPyramid, pz: &HistogramPyramid) -> Result<f64> {
    if !py.same_geometry(pz) {
        return Err(Error::invalid("pyramids differ in geometry"));
    }
    let mut prev = 0u64;
    let mut k = 0.0;
    for (i, (a, b)) in py.levels.iter().zip(&pz.levels).enumerate() {
        let inter = intersection(a, b);
        k += (inter - prev) as f64 * 0.5f64.powi(i as i32);
        prev = inter;
    }
    Ok(k)
}

//! Adaptive background model and per-frame moving-pixel masks.
//!
//! Per frame the detector
//! 1. fits a noise threshold to the frame-difference histogram,
//! 2. builds the temporal mask `I_m` (radiometric dissimilarity between
//!    consecutive frames) and the background-difference mask `F_m`,
//! 3. fuses them with a pixelwise AND and cleans the result morphologically,
//! 4. blends the frame into the running background with a rate that rises
//!    when the global brightness changes.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask, GrayFrame};

/// Number of frame means remembered for the learning-rate gain.
pub const HISTORY_LEN: usize = 6;

/// Signed gray-level differences span `-255..=255`.
pub const DIFF_BINS: usize = 511;

const SIGMA_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundParams {
    /// Radius of the radiometric-similarity window (`w = 1` is 3x3).
    pub window_radius: usize,
    /// Base learning rate, `a`.
    pub base_rate: f64,
    /// Slope of the brightness-change gain, `b`.
    pub gain_slope: f64,
    /// A pixel is temporally moving when `1 - R > t_sim`.
    pub t_sim: f64,
    /// Threshold used before the first histogram fit.
    pub initial_threshold: f64,
    /// Lower bound applied to the fitted threshold.
    pub threshold_floor: f64,
    /// Refit the threshold from every frame difference.
    pub adaptive_threshold: bool,
    /// The driver uses the median of this many most recent fitted thresholds.
    pub threshold_median: usize,
    /// The driver keeps the background fixed under the cleaned motion mask.
    pub selective_update: bool,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            window_radius: 1,
            base_rate: 0.05,
            gain_slope: 0.1,
            t_sim: 0.3,
            initial_threshold: 0.1,
            threshold_floor: 0.02,
            adaptive_threshold: true,
            threshold_median: 5,
            selective_update: true,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.04..=0.06).contains(&self.base_rate) {
            return Err(Error::invalid("background.base_rate must lie in [0.04, 0.06]"));
        }
        if self.threshold_median == 0 {
            return Err(Error::invalid("background.threshold_median must be positive"));
        }
        if !(self.gain_slope >= 0.0) {
            return Err(Error::invalid("background.gain_slope must be non-negative"));
        }
        for (name, v) in [
            ("t_sim", self.t_sim),
            ("initial_threshold", self.initial_threshold),
            ("threshold_floor", self.threshold_floor),
        ] {
            if !(0.0..=2.0).contains(&v) || (name != "t_sim" && v > 1.0) {
                return Err(Error::invalid(format!("background.{name} out of range")));
            }
        }
        Ok(())
    }
}

/// Running background `B`, brightness history `V` and threshold `T_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundState {
    pub params: BackgroundParams,
    background: Option<GrayFrame>,
    /// Frame means, most recent first: `[E(t), E(t-1), ...]`.
    history: VecDeque<f64>,
    /// Current threshold `T_b` in `[0, 1]`.
    pub threshold: f64,
    last_rate: f64,
}

impl BackgroundState {
    pub fn new(params: BackgroundParams) -> Self {
        Self {
            threshold: params.initial_threshold,
            last_rate: params.base_rate,
            params,
            background: None,
            history: VecDeque::with_capacity(HISTORY_LEN),
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.background.is_some()
    }

    /// The first frame becomes the background verbatim.
    pub fn initialize(&mut self, first: &GrayFrame) {
        self.background = Some(first.clone());
        self.history.clear();
        self.history.push_front(first.mean());
    }

    pub fn background(&self) -> Option<&GrayFrame> {
        self.background.as_ref()
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn last_rate(&self) -> f64 {
        self.last_rate
    }

    /// `alpha = a + b * |E(t) - E(t-5)| / max(E(t), E(t-5))` with the gain
    /// taken as zero when both means are zero. Before six means exist the
    /// oldest remembered mean stands in for `E(t-5)`.
    pub fn learning_rate(&self) -> f64 {
        let (Some(&now), Some(&old)) = (self.history.front(), self.history.back()) else {
            return self.params.base_rate;
        };
        let denom = now.max(old);
        let gain = if denom > 0.0 { (now - old).abs() / denom } else { 0.0 };
        (self.params.base_rate + self.params.gain_slope * gain).clamp(0.0, 1.0)
    }

    /// Records `E(t)` for `curr` and blends it into the background:
    /// `B <- B + alpha (I - B)`. Returns the rate used.
    pub fn update(&mut self, curr: &GrayFrame) -> Result<f64> {
        self.update_masked(curr, None)
    }

    /// [`BackgroundState::update`] with the pixels in `freeze` left unchanged.
    pub fn update_masked(&mut self, curr: &GrayFrame, freeze: Option<&BinaryMask>) -> Result<f64> {
        if self.background.is_none() {
            self.initialize(curr);
            return Ok(0.0);
        }
        self.history.push_front(curr.mean());
        self.history.truncate(HISTORY_LEN);
        let alpha = self.learning_rate();
        self.blend(curr, alpha, freeze)?;
        self.last_rate = alpha;
        Ok(alpha)
    }

    /// Blends with an explicit rate; pixels set in `freeze` keep their
    /// background value.
    pub fn blend(&mut self, curr: &GrayFrame, alpha: f64, freeze: Option<&BinaryMask>) -> Result<()> {
        let bg = self.background.as_mut().ok_or(Error::Uninitialized)?;
        check_dims(bg.dims(), curr.dims())?;
        if let Some(m) = freeze {
            check_dims(bg.dims(), m.dims())?;
        }
        let frozen = freeze.map(|m| m.as_slice());
        for (i, (b, &v)) in bg.as_mut_slice().iter_mut().zip(curr.as_slice()).enumerate() {
            if frozen.is_some_and(|f| f[i]) {
                continue;
            }
            *b += alpha * (v - *b);
        }
        Ok(())
    }

    /// Versioned text checkpoint.
    pub fn to_checkpoint(&self) -> Result<String> {
        let bg = self.background.as_ref().ok_or(Error::Uninitialized)?;
        let mut out = String::from("vtrack-background v1\n");
        let p = &self.params;
        writeln!(out, "size {} {}", bg.width(), bg.height()).unwrap();
        writeln!(
            out,
            "params {} {} {} {} {} {} {} {} {}",
            p.window_radius,
            p.base_rate,
            p.gain_slope,
            p.t_sim,
            p.initial_threshold,
            p.threshold_floor,
            p.adaptive_threshold,
            p.threshold_median,
            p.selective_update
        )
        .unwrap();
        writeln!(out, "threshold {}", self.threshold).unwrap();
        let v: Vec<String> = self.history.iter().map(|e| e.to_string()).collect();
        writeln!(out, "history {}", v.join(" ")).unwrap();
        for y in 0..bg.height() {
            let row: Vec<String> = (0..bg.width()).map(|x| bg.get(x, y).to_string()).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        Ok(out)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("background checkpoint: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("vtrack-background v1") {
            return Err(bad("unknown header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected `{name}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let size = field("size")?;
        let p = field("params")?;
        let thr = field("threshold")?;
        let hist = field("history")?;
        if size.len() != 2 || p.len() != 9 || thr.len() != 1 {
            return Err(bad("wrong field count"));
        }
        let (w, h) = (
            size[0].parse::<usize>().map_err(|_| bad("bad width"))?,
            size[1].parse::<usize>().map_err(|_| bad("bad height"))?,
        );
        let params = BackgroundParams {
            window_radius: p[0].parse().map_err(|_| bad("bad radius"))?,
            base_rate: num(&p[1])?,
            gain_slope: num(&p[2])?,
            t_sim: num(&p[3])?,
            initial_threshold: num(&p[4])?,
            threshold_floor: num(&p[5])?,
            adaptive_threshold: p[6].parse().map_err(|_| bad("bad flag"))?,
            threshold_median: p[7].parse().map_err(|_| bad("bad median length"))?,
            selective_update: p[8].parse().map_err(|_| bad("bad flag"))?,
        };
        let history = hist.iter().map(|s| num(s)).collect::<Result<VecDeque<f64>>>()?;
        let mut data = Vec::with_capacity(w * h);
        for line in lines.by_ref().take(h) {
            for s in line.split_whitespace() {
                data.push(num(s)?);
            }
        }
        let background = GrayFrame::from_vec(w, h, data).map_err(|_| bad("pixel count"))?;
        Ok(Self {
            threshold: num(&thr[0])?,
            last_rate: params.base_rate,
            params,
            background: Some(background),
            history,
        })
    }
}

// ---------------------------------------------------------------------------
// Radiometric similarity

#[derive(Clone, Copy, Debug)]
struct WindowStats {
    mean1: f64,
    mean2: f64,
    var1: f64,
    var2: f64,
    cov: f64,
}

fn window_stats(f1: &GrayFrame, f2: &GrayFrame, x: isize, y: isize, r: isize) -> WindowStats {
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let a = f1.get_clamped(x + dx, y + dy);
            let b = f2.get_clamped(x + dx, y + dy);
            s1 += a;
            s2 += b;
            s11 += a * a;
            s22 += b * b;
            s12 += a * b;
        }
    }
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let (m1, m2) = (s1 / n, s2 / n);
    WindowStats {
        mean1: m1,
        mean2: m2,
        var1: (s11 / n - m1 * m1).max(0.0),
        var2: (s22 / n - m2 * m2).max(0.0),
        cov: s12 / n - m1 * m2,
    }
}

fn similarity_from(s: WindowStats) -> f64 {
    const FLAT: f64 = 1e-12;
    match (s.var1 < FLAT, s.var2 < FLAT) {
        (true, true) => {
            if (s.mean1 - s.mean2).abs() < 1e-6 {
                1.0
            } else {
                0.0
            }
        }
        // one flat window carries no correlation with a textured one
        (true, false) | (false, true) => 0.0,
        (false, false) => (s.cov / (s.var1 * s.var2).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Normalized cross-correlation of the `(2w+1)^2` windows centered at
/// `(x, y)` in both frames.
pub fn radiometric_similarity(f1: &GrayFrame, f2: &GrayFrame, x: usize, y: usize, radius: usize) -> Result<f64> {
    check_dims(f1.dims(), f2.dims())?;
    if x < radius || y < radius || x + radius >= f1.width() || y + radius >= f1.height() {
        return Err(Error::WindowOutside {
            x,
            y,
            radius,
            width: f1.width(),
            height: f1.height(),
        });
    }
    Ok(similarity_from(window_stats(f1, f2, x as isize, y as isize, radius as isize)))
}

/// Similarity at every pixel; windows straddling the border replicate edge pixels.
pub fn similarity_map(f1: &GrayFrame, f2: &GrayFrame, radius: usize) -> Result<GrayFrame> {
    check_dims(f1.dims(), f2.dims())?;
    let r = radius as isize;
    Ok(GrayFrame::from_fn(f1.width(), f1.height(), |x, y| {
        similarity_from(window_stats(f1, f2, x as isize, y as isize, r))
    }))
}

/// Temporal, background-difference and fused masks for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionMasks {
    pub temporal: BinaryMask,
    pub difference: BinaryMask,
    pub fused: BinaryMask,
}

/// `I_m = [1 - R > t_sim]`, `F_m = [|I - B| > T_b]`, `M = I_m AND F_m`.
pub fn motion_masks(curr: &GrayFrame, prev: &GrayFrame, state: &BackgroundState) -> Result<MotionMasks> {
    let bg = state.background().ok_or(Error::Uninitialized)?;
    check_dims(bg.dims(), curr.dims())?;
    check_dims(bg.dims(), prev.dims())?;
    let sim = similarity_map(curr, prev, state.params.window_radius)?;
    let (w, h) = curr.dims();
    let t_sim = state.params.t_sim;
    let temporal = BinaryMask::from_fn(w, h, |x, y| 1.0 - sim.get(x, y) > t_sim);
    let difference = BinaryMask::from_fn(w, h, |x, y| (curr.get(x, y) - bg.get(x, y)).abs() > state.threshold);
    let fused = temporal.and(&difference)?;
    Ok(MotionMasks {
        temporal,
        difference,
        fused,
    })
}

// ---------------------------------------------------------------------------
// Adaptive threshold

/// Counts of signed gray-level differences; bin `i` holds `d = i - 255`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffHistogram {
    pub bins: Vec<u64>,
}

impl DiffHistogram {
    pub fn from_counts(bins: Vec<u64>) -> Result<Self> {
        if bins.len() != DIFF_BINS {
            return Err(Error::invalid(format!("difference histogram needs {DIFF_BINS} bins")));
        }
        Ok(Self { bins })
    }

    /// Histogram of `round(255 * (curr - prev))`.
    pub fn of_difference(curr: &GrayFrame, prev: &GrayFrame) -> Result<Self> {
        check_dims(curr.dims(), prev.dims())?;
        let mut bins = vec![0u64; DIFF_BINS];
        for (&a, &b) in curr.as_slice().iter().zip(prev.as_slice()) {
            let d = ((a - b) * 255.0).round().clamp(-255.0, 255.0) as i64;
            bins[(d + 255) as usize] += 1;
        }
        Ok(Self { bins })
    }

    #[inline]
    pub fn count(&self, d: i64) -> u64 {
        self.bins[(d + 255) as usize]
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Zero-mean Gaussian noise model fitted to a difference histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Prior probability that a pixel is background, `p(B)`.
    pub p_background: f64,
    /// Noise standard deviation, in gray levels.
    pub sigma: f64,
    pub histogram: DiffHistogram,
    /// Chosen threshold in gray levels.
    pub threshold: u8,
    /// The fitting error `e_Min` at `threshold`.
    pub fit_error: f64,
}

impl NoiseModel {
    /// `T_b = T / 255`.
    pub fn threshold_unit(&self) -> f64 {
        self.threshold as f64 / 255.0
    }
}

#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Probability mass of the unit-width bin centered on `d` under `N(0, sigma)`.
#[inline]
fn gaussian_bin_mass(d: i64, sigma: f64) -> f64 {
    let d = d as f64;
    normal_cdf((d + 0.5) / sigma) - normal_cdf((d - 0.5) / sigma)
}

/// `(p(B), sigma)` of the noise model truncated at `|d| <= t`, using the
/// normalized histogram. Sigma is the zero-mean second moment.
fn truncated_moments(freq: &[f64], t: i64) -> (f64, f64) {
    let mut p_b = 0.0;
    let mut m2 = 0.0;
    for d in -t..=t {
        let h = freq[(d + 255) as usize];
        p_b += h;
        m2 += (d * d) as f64 * h;
    }
    let sigma = if p_b > 0.0 { (m2 / p_b).sqrt() } else { 0.0 };
    (p_b, sigma.max(SIGMA_EPS))
}

/// `e_Min(T) = sum_d (p(B) p(d|B) - h(d))^2` over every difference bin.
fn fit_error(freq: &[f64], t: i64) -> f64 {
    let (p_b, sigma) = truncated_moments(freq, t);
    (-255i64..=255)
        .map(|d| {
            let e = p_b * gaussian_bin_mass(d, sigma) - freq[(d + 255) as usize];
            e * e
        })
        .sum()
}

/// Exhaustive search over `T in 0..=255` for the threshold minimizing the
/// Gaussian fitting error; ties go to the smaller `T`.
pub fn fit_adaptive_threshold(hist: &DiffHistogram) -> Result<NoiseModel> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let freq: Vec<f64> = hist.bins.iter().map(|&c| c as f64 / total as f64).collect();
    let mut best = (0i64, f64::INFINITY);
    for t in 0..=255i64 {
        let e = fit_error(&freq, t);
        if e < best.1 {
            best = (t, e);
        }
    }
    let (p_background, sigma) = truncated_moments(&freq, best.0);
    Ok(NoiseModel {
        p_background,
        sigma,
        histogram: hist.clone(),
        threshold: best.0 as u8,
        fit_error: best.1,
    })
}

// ---------------------------------------------------------------------------
// Morphology

/// 3x3 median (majority vote) with replicated borders.
pub fn median3(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let mut ones = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                ones += m.get(sx, sy) as usize;
            }
        }
        ones >= 5
    })
}

/// 3x3 erosion; pixels beyond the border do not constrain the result.
pub fn erode3(m: &BinaryMask) -> BinaryMask {
    neighborhood(m, true)
}

/// 3x3 dilation; pixels beyond the border contribute nothing.
pub fn dilate3(m: &BinaryMask) -> BinaryMask {
    neighborhood(m, false)
}

fn neighborhood(m: &BinaryMask, all: bool) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let ys = y.saturating_sub(1)..(y + 2).min(h);
        let mut acc = all;
        for sy in ys {
            for sx in x.saturating_sub(1)..(x + 2).min(w) {
                let v = m.get(sx, sy);
                if all && !v {
                    return false;
                }
                acc |= v;
            }
        }
        acc
    })
}

/// Square dilation of the given radius.
pub fn dilate(m: &BinaryMask, radius: usize) -> BinaryMask {
    (0..radius).fold(m.clone(), |acc, _| dilate3(&acc))
}

pub fn open3(m: &BinaryMask) -> BinaryMask {
    dilate3(&erode3(m))
}

pub fn close3(m: &BinaryMask) -> BinaryMask {
    erode3(&dilate3(m))
}

/// Median filter, then opening, then closing.
pub fn clean_mask(m: &BinaryMask) -> BinaryMask {
    close3(&open3(&median3(m)))
}

// ---------------------------------------------------------------------------
// Driver

/// Output of [`MotionDetector::process`].
#[derive(Clone, Debug)]
pub struct FrameMotion {
    pub masks: MotionMasks,
    pub cleaned: BinaryMask,
    pub noise: Option<NoiseModel>,
    pub rate: f64,
}

/// Streams frames through threshold fitting, mask extraction and background update.
#[derive(Clone, Debug)]
pub struct MotionDetector {
    pub state: BackgroundState,
    prev: Option<GrayFrame>,
    recent: VecDeque<f64>,
}

impl MotionDetector {
    pub fn new(params: BackgroundParams) -> Self {
        Self {
            state: BackgroundState::new(params),
            prev: None,
            recent: VecDeque::new(),
        }
    }

    pub fn process(&mut self, curr: &GrayFrame) -> Result<FrameMotion> {
        let Some(prev) = self.prev.take() else {
            self.state.initialize(curr);
            self.prev = Some(curr.clone());
            let (w, h) = curr.dims();
            let empty = BinaryMask::new(w, h);
            return Ok(FrameMotion {
                masks: MotionMasks {
                    temporal: empty.clone(),
                    difference: empty.clone(),
                    fused: empty.clone(),
                },
                cleaned: empty,
                noise: None,
                rate: 0.0,
            });
        };
        let noise = if self.state.params.adaptive_threshold {
            let model = fit_adaptive_threshold(&DiffHistogram::of_difference(curr, &prev)?)?;
            self.recent.push_back(model.threshold_unit());
            while self.recent.len() > self.state.params.threshold_median {
                self.recent.pop_front();
            }
            let mut sorted: Vec<f64> = self.recent.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            self.state.threshold = sorted[sorted.len() / 2].max(self.state.params.threshold_floor);
            Some(model)
        } else {
            None
        };
        let masks = motion_masks(curr, &prev, &self.state)?;
        let cleaned = clean_mask(&masks.fused);
        let freeze = self.state.params.selective_update.then_some(&cleaned);
        let rate = self.state.update_masked(curr, freeze)?;
        self.prev = Some(curr.clone());
        Ok(FrameMotion {
            masks,
            cleaned,
            noise,
            rate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame3(v: [f64; 9]) -> GrayFrame {
        GrayFrame::from_vec(3, 3, v.to_vec()).unwrap()
    }

    #[test]
    fn similarity_of_identical_windows_is_one() {
        let f = frame3([0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.7, 0.6, 0.8]);
        assert!((radiometric_similarity(&f, &f, 1, 1, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_of_negated_window_is_minus_one() {
        // Direct evaluation: second window is 1 - first, so cov = -var and
        // both variances agree, giving -1.
        let a = [0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.7, 0.6, 0.8];
        let f1 = frame3(a);
        let f2 = frame3(a.map(|v| 1.0 - v));
        assert!((radiometric_similarity(&f1, &f2, 1, 1, 1).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_flat_windows() {
        let f = GrayFrame::filled(3, 3, 0.4);
        assert_eq!(radiometric_similarity(&f, &f, 1, 1, 1).unwrap(), 1.0);
        let g = GrayFrame::filled(3, 3, 0.6);
        assert_eq!(radiometric_similarity(&f, &g, 1, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn similarity_window_outside_is_error() {
        let f = GrayFrame::filled(4, 4, 0.4);
        assert!(matches!(
            radiometric_similarity(&f, &f, 0, 1, 1),
            Err(Error::WindowOutside { .. })
        ));
        assert!(radiometric_similarity(&f, &f, 2, 3, 1).is_err());
    }

    #[test]
    fn unchanged_frames_give_empty_masks() {
        let f = GrayFrame::from_fn(12, 10, |x, y| ((x * 7 + y * 3) % 11) as f64 / 11.0);
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&f);
        let m = motion_masks(&f, &f, &s).unwrap();
        assert!(m.temporal.is_empty() && m.difference.is_empty() && m.fused.is_empty());
    }

    #[test]
    fn moving_square_matches_per_pixel_evaluation() {
        // A bright 10x10 square jumps from x=5 to x=15 over a textured
        // static background; compare against an independent per-pixel
        // evaluation of the three mask rules.
        let bg = GrayFrame::from_fn(40, 24, |x, y| 0.2 + 0.1 * (((x * 5 + y * 3) % 7) as f64 / 7.0));
        let square = |x0: usize| {
            GrayFrame::from_fn(40, 24, |x, y| {
                let base = bg.get(x, y);
                if (x0..x0 + 10).contains(&x) && (7..17).contains(&y) {
                    base + 0.5
                } else {
                    base
                }
            })
        };
        let prev = square(5);
        let curr = square(15);
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&bg);
        s.threshold = 0.1;
        let m = motion_masks(&curr, &prev, &s).unwrap();
        for y in 0..24usize {
            for x in 0..40usize {
                let r = similarity_from(window_stats(&curr, &prev, x as isize, y as isize, 1));
                let im = 1.0 - r > 0.3;
                let fm = (curr.get(x, y) - bg.get(x, y)).abs() > 0.1;
                assert_eq!(m.temporal.get(x, y), im);
                assert_eq!(m.difference.get(x, y), fm);
                assert_eq!(m.fused.get(x, y), im && fm);
                // fused fires only on the new square, which differs from B
                let on_new = (15..25).contains(&x) && (7..17).contains(&y);
                if m.fused.get(x, y) {
                    assert!(on_new);
                }
            }
        }
        // correlation ignores the uniform offset inside the square, so only
        // its one-pixel inner rim responds
        assert!(m.fused.count() >= 30, "{}", m.fused.count());
    }

    #[test]
    fn rate_is_base_when_brightness_is_stable() {
        let mut s = BackgroundState::new(BackgroundParams::default());
        let f = GrayFrame::filled(4, 4, 0.5);
        s.initialize(&f);
        for _ in 0..7 {
            let a = s.update(&f).unwrap();
            assert_eq!(a, 0.05);
        }
        assert_eq!(s.history().count(), HISTORY_LEN);
    }

    #[test]
    fn rate_uses_frame_five_back() {
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&GrayFrame::filled(2, 2, 0.4));
        for _ in 0..5 {
            s.update(&GrayFrame::filled(2, 2, 0.4)).unwrap();
        }
        let a = s.update(&GrayFrame::filled(2, 2, 0.5)).unwrap();
        assert!((a - (0.05 + 0.1 * 0.1 / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_means_give_zero_gain() {
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&GrayFrame::new(2, 2));
        assert_eq!(s.update(&GrayFrame::new(2, 2)).unwrap(), 0.05);
    }

    #[test]
    fn blend_arithmetic() {
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&GrayFrame::filled(2, 2, 0.5));
        s.blend(&GrayFrame::filled(2, 2, 0.7), 0.05, None).unwrap();
        assert!((s.background().unwrap().get(1, 1) - 0.51).abs() < 1e-12);
        let target = GrayFrame::from_fn(2, 2, |x, y| (x + y) as f64 / 3.0);
        s.blend(&target, 1.0, None).unwrap();
        assert_eq!(s.background().unwrap(), &target);
    }

    #[test]
    fn masks_require_initialization() {
        let f = GrayFrame::new(3, 3);
        let s = BackgroundState::new(BackgroundParams::default());
        assert!(matches!(motion_masks(&f, &f, &s), Err(Error::Uninitialized)));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut s = BackgroundState::new(BackgroundParams::default());
        s.initialize(&GrayFrame::from_fn(3, 2, |x, y| (x + y) as f64 * 0.1));
        s.update(&GrayFrame::filled(3, 2, 0.3)).unwrap();
        s.threshold = 0.0625;
        let text = s.to_checkpoint().unwrap();
        let back = BackgroundState::from_checkpoint(&text).unwrap();
        assert_eq!(back.background(), s.background());
        assert_eq!(back.threshold, s.threshold);
        assert_eq!(back.history().collect::<Vec<_>>(), s.history().collect::<Vec<_>>());
        assert!(BackgroundState::from_checkpoint("nope").is_err());
    }

    fn spike_hist() -> DiffHistogram {
        let mut bins = vec![0u64; DIFF_BINS];
        bins[255] = 1000;
        DiffHistogram::from_counts(bins).unwrap()
    }

    #[test]
    fn noiseless_histogram_fits_zero_threshold() {
        let m = fit_adaptive_threshold(&spike_hist()).unwrap();
        assert_eq!(m.threshold, 0);
        assert_eq!(m.sigma, SIGMA_EPS);
        assert_eq!(m.p_background, 1.0);
    }

    #[test]
    fn empty_histogram_is_error() {
        let h = DiffHistogram::from_counts(vec![0; DIFF_BINS]).unwrap();
        assert!(matches!(fit_adaptive_threshold(&h), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn gaussian_histogram_recovers_sigma() {
        let sigma = 8.0;
        let bins: Vec<u64> = (-255i64..=255)
            .map(|d| (100_000.0 * gaussian_bin_mass(d, sigma)).round() as u64)
            .collect();
        let h = DiffHistogram::from_counts(bins).unwrap();
        let m = fit_adaptive_threshold(&h).unwrap();
        assert!((m.sigma - sigma).abs() / sigma < 0.1, "sigma {}", m.sigma);
        // brute force: the scan itself, re-run over the raw definition
        let total = h.total() as f64;
        let freq: Vec<f64> = h.bins.iter().map(|&c| c as f64 / total).collect();
        let oracle = (0..=255i64)
            .map(|t| (t, fit_error(&freq, t)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        assert!((m.threshold as i64 - oracle.0).abs() <= 2);
    }

    #[test]
    fn threshold_ties_pick_smallest() {
        // Every T beyond the support yields the same fit; the smallest wins.
        let mut bins = vec![0u64; DIFF_BINS];
        for d in -3i64..=3 {
            bins[(d + 255) as usize] = 10;
        }
        let h = DiffHistogram::from_counts(bins).unwrap();
        let m = fit_adaptive_threshold(&h).unwrap();
        let total = 70.0;
        let freq: Vec<f64> = h.bins.iter().map(|&c| c as f64 / total).collect();
        for t in 0..m.threshold as i64 {
            assert!(fit_error(&freq, t) > m.fit_error);
        }
        assert!(m.threshold <= 3);
    }

    #[test]
    fn clean_mask_removes_singletons_and_fills_holes() {
        let mut m = BinaryMask::new(20, 20);
        m.set(2, 2, true);
        for y in 6..16 {
            for x in 6..16 {
                m.set(x, y, true);
            }
        }
        m.set(10, 10, false);
        let c = clean_mask(&m);
        assert!(!c.get(2, 2));
        assert!(c.get(10, 10));
        // the median rounds off the four block corners
        assert_eq!(c.count(), 96);
    }

    #[test]
    fn clean_mask_output_is_fixed_by_open_close() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let density = rng.random_range(0.2..0.8);
            let m = BinaryMask::from_fn(24, 18, |_, _| rng.random::<f64>() < density);
            let once = clean_mask(&m);
            assert_eq!(close3(&open3(&once)), once, "seed {seed}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn blend_is_convex(b in proptest::collection::vec(0.0f64..=1.0, 6),
                               i in proptest::collection::vec(0.0f64..=1.0, 6),
                               alpha in 0.0f64..=1.0) {
                let bg = GrayFrame::from_vec(3, 2, b.clone()).unwrap();
                let cur = GrayFrame::from_vec(3, 2, i.clone()).unwrap();
                let mut s = BackgroundState::new(BackgroundParams::default());
                s.initialize(&bg);
                s.blend(&cur, alpha, None).unwrap();
                for (k, &v) in s.background().unwrap().as_slice().iter().enumerate() {
                    prop_assert!(v >= b[k].min(i[k]) - 1e-12 && v <= b[k].max(i[k]) + 1e-12);
                }
            }

            #[test]
            fn rate_never_below_base(means in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
                let mut s = BackgroundState::new(BackgroundParams::default());
                s.initialize(&GrayFrame::filled(1, 1, means[0]));
                for &m in &means[1..] {
                    let a = s.update(&GrayFrame::filled(1, 1, m)).unwrap();
                    prop_assert!(a >= 0.05);
                    let v: Vec<f64> = s.history().collect();
                    if v.first() == v.last() {
                        prop_assert_eq!(a, 0.05);
                    }
                }
            }

            #[test]
            fn fused_is_intersection(seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = GrayFrame::from_fn(10, 8, |_, _| rng.random());
                let b = GrayFrame::from_fn(10, 8, |_, _| rng.random());
                let mut s = BackgroundState::new(BackgroundParams::default());
                s.initialize(&GrayFrame::from_fn(10, 8, |x, _| x as f64 / 10.0));
                s.threshold = 0.2;
                let m = motion_masks(&a, &b, &s).unwrap();
                prop_assert_eq!(m.fused, m.temporal.and(&m.difference).unwrap());
            }
        }
    }
}

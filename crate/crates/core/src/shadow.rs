//! Color invariants, hard-shadow edge detection and gradient-domain
//! reconstruction of shadow-only and shadow-free images; connected blobs.

use serde::{Deserialize, Serialize};

use crate::background::dilate;
use crate::error::{Error, Result};
use crate::frame_io::{to_grayscale, to_value_gray};
use crate::image::{check_dims, BinaryMask, BoxF, GrayFrame, RgbFrame};

/// Offset added before taking logs so black pixels stay finite.
pub const LOG_OFFSET: f64 = 1.0 / 256.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShadowParams {
    /// Gaussian smoothing before edge detection.
    pub sigma: f64,
    /// Minimum original-image edge strength for a hard shadow edge.
    pub t1: f64,
    /// Maximum invariant-image edge strength for a hard shadow edge.
    pub t2: f64,
    /// Dilation radius producing the penumbra band around hard edges.
    pub vague_radius: usize,
    pub solver: SolverParams,
    pub min_blob_area: usize,
}

impl Default for ShadowParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            t1: 0.3,
            t2: 0.1,
            vague_radius: 2,
            solver: SolverParams::default(),
            min_blob_area: 25,
        }
    }
}

impl ShadowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("shadow.sigma must be non-negative"));
        }
        if !(0.0 <= self.t2 && self.t2 < self.t1 && self.t1 <= 1.0) {
            return Err(Error::invalid("shadow thresholds need 0 <= t2 < t1 <= 1"));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Over-relaxation factor.
    pub omega: f64,
    /// Stop once `||div - L s|| / ||div||` falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            omega: 1.9,
            tolerance: 1e-6,
            max_sweeps: 20_000,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::invalid("solver.omega must lie in (0, 2)"));
        }
        if !(self.tolerance > 0.0) || self.max_sweeps == 0 {
            return Err(Error::invalid("solver tolerance and max_sweeps must be positive"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Invariants and edges

/// L2-normalized red and green channels.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantImages {
    pub inv1: GrayFrame,
    pub inv2: GrayFrame,
}

/// Per-pixel chromaticity `(r, g, b) / ||(r, g, b)||`; black maps to zero.
pub fn invariant_images(f: &RgbFrame) -> InvariantImages {
    let (w, h) = f.dims();
    let mut inv1 = GrayFrame::new(w, h);
    let mut inv2 = GrayFrame::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = f.get(x, y);
            let n = (r * r + g * g + b * b).sqrt();
            if n > 0.0 {
                inv1.set(x, y, r / n);
                inv2.set(x, y, g / n);
            }
        }
    }
    InvariantImages { inv1, inv2 }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Separable Gaussian blur truncated at `3 sigma`; weights falling outside
/// the frame are dropped and the remainder renormalized.
pub fn gaussian_blur(f: &GrayFrame, sigma: f64) -> GrayFrame {
    if sigma <= 0.0 {
        return f.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = f.dims();
    let pass = |src: &GrayFrame, horizontal: bool| {
        GrayFrame::from_fn(w, h, |x, y| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (i, &k) in kernel.iter().enumerate() {
                let off = i as isize - radius;
                let (sx, sy) = if horizontal {
                    (x as isize + off, y as isize)
                } else {
                    (x as isize, y as isize + off)
                };
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    acc += k * src.get(sx as usize, sy as usize);
                    norm += k;
                }
            }
            acc / norm
        })
    };
    pass(&pass(f, true), false)
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(f: &GrayFrame) -> GrayFrame {
    let (w, h) = f.dims();
    GrayFrame::from_fn(w, h, |x, y| {
        let p = |dx: isize, dy: isize| f.get_clamped(x as isize + dx, y as isize + dy);
        let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        (gx * gx + gy * gy).sqrt()
    })
}

/// Blur, Sobel magnitude, then scale so the strongest edge is 1.
pub fn edge_strength(f: &GrayFrame, sigma: f64) -> GrayFrame {
    let mag = sobel_magnitude(&gaussian_blur(f, sigma));
    let max = mag.max();
    // blur renormalization leaves rounding noise on flat input
    if max > 1e-12 {
        mag.map(|v| v / max)
    } else {
        mag.map(|_| 0.0)
    }
}

/// Strong edges of the original image that are weak in some invariant image.
pub fn hard_shadow_mask(e_ori: &GrayFrame, e_inv1: &GrayFrame, e_inv2: &GrayFrame, t1: f64, t2: f64) -> Result<BinaryMask> {
    if !(0.0 <= t2 && t2 < t1 && t1 <= 1.0) {
        return Err(Error::invalid("hard shadow thresholds need 0 <= t2 < t1 <= 1"));
    }
    check_dims(e_ori.dims(), e_inv1.dims())?;
    check_dims(e_ori.dims(), e_inv2.dims())?;
    let (w, h) = e_ori.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        e_ori.get(x, y) > t1 && e_inv1.get(x, y).min(e_inv2.get(x, y)) < t2
    }))
}

/// Hard edges, the penumbra band around them, and their union.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowMasks {
    pub hard: BinaryMask,
    pub vague: BinaryMask,
    pub mask: BinaryMask,
}

impl ShadowMasks {
    pub fn from_hard(hard: BinaryMask, vague_radius: usize) -> Self {
        let vague = dilate(&hard, vague_radius);
        let mask = hard.or(&vague).expect("same dimensions");
        Self { hard, vague, mask }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::from_hard(BinaryMask::new(width, height), 0)
    }
}

/// Runs the edge stage on a color frame and builds the shadow masks.
pub fn detect_shadow_edges(f: &RgbFrame, params: &ShadowParams) -> Result<ShadowMasks> {
    let inv = invariant_images(f);
    let e_ori = edge_strength(&to_value_gray(f), params.sigma);
    let e1 = edge_strength(&inv.inv1, params.sigma);
    let e2 = edge_strength(&inv.inv2, params.sigma);
    let hard = hard_shadow_mask(&e_ori, &e1, &e2, params.t1, params.t2)?;
    Ok(ShadowMasks::from_hard(hard, params.vague_radius))
}

// ---------------------------------------------------------------------------
// Gradient fields

/// Forward-difference gradients; the last column of `gx` and last row of
/// `gy` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub gx: GrayFrame,
    pub gy: GrayFrame,
}

impl GradientField {
    pub fn of(f: &GrayFrame) -> Self {
        let (w, h) = f.dims();
        let gx = GrayFrame::from_fn(w, h, |x, y| if x + 1 < w { f.get(x + 1, y) - f.get(x, y) } else { 0.0 });
        let gy = GrayFrame::from_fn(w, h, |x, y| if y + 1 < h { f.get(x, y + 1) - f.get(x, y) } else { 0.0 });
        Self { gx, gy }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.gx.dims()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            gx: self.gx.zip_map(&other.gx, |a, b| a + b)?,
            gy: self.gy.zip_map(&other.gy, |a, b| a + b)?,
        })
    }

    /// Backward-difference divergence of the field.
    pub fn divergence(&self) -> GrayFrame {
        let (w, h) = self.dims();
        GrayFrame::from_fn(w, h, |x, y| {
            let dx = self.gx.get(x, y) - if x > 0 { self.gx.get(x - 1, y) } else { 0.0 };
            let dy = self.gy.get(x, y) - if y > 0 { self.gy.get(x, y - 1) } else { 0.0 };
            dx + dy
        })
    }

    /// Keeps (`keep_masked`) or removes the differences touching a masked
    /// pixel at either end.
    fn select(&self, mask: &BinaryMask, keep_masked: bool) -> Result<Self> {
        check_dims(self.dims(), mask.dims())?;
        let (w, h) = self.dims();
        let touches_x = |x: usize, y: usize| mask.get(x, y) || (x + 1 < w && mask.get(x + 1, y));
        let touches_y = |x: usize, y: usize| mask.get(x, y) || (y + 1 < h && mask.get(x, y + 1));
        let gx = GrayFrame::from_fn(w, h, |x, y| {
            if touches_x(x, y) == keep_masked {
                self.gx.get(x, y)
            } else {
                0.0
            }
        });
        let gy = GrayFrame::from_fn(w, h, |x, y| {
            if touches_y(x, y) == keep_masked {
                self.gy.get(x, y)
            } else {
                0.0
            }
        });
        Ok(Self { gx, gy })
    }
}

/// Gradients of `f_log` with every difference touching the mask zeroed:
/// the input to the shadow-free channel.
pub fn masked_gradient(f_log: &GrayFrame, mask: &BinaryMask) -> Result<GradientField> {
    GradientField::of(f_log).select(mask, false)
}

/// The complement of [`masked_gradient`]: only differences touching the mask.
pub fn shadow_gradient(f_log: &GrayFrame, mask: &BinaryMask) -> Result<GradientField> {
    GradientField::of(f_log).select(mask, true)
}

/// `L s`, the 5-point Neumann Laplacian summed over in-frame neighbors.
pub fn laplacian(s: &GrayFrame) -> GrayFrame {
    let (w, h) = s.dims();
    GrayFrame::from_fn(w, h, |x, y| {
        let c = s.get(x, y);
        let mut acc = 0.0;
        if x > 0 {
            acc += s.get(x - 1, y) - c;
        }
        if x + 1 < w {
            acc += s.get(x + 1, y) - c;
        }
        if y > 0 {
            acc += s.get(x, y - 1) - c;
        }
        if y + 1 < h {
            acc += s.get(x, y + 1) - c;
        }
        acc
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn relative_residual(s: &GrayFrame, div: &GrayFrame, div_norm: f64) -> f64 {
    let ls = laplacian(s);
    let r: Vec<f64> = div.as_slice().iter().zip(ls.as_slice()).map(|(d, l)| d - l).collect();
    l2(&r) / div_norm
}

/// Solves `L s = div g` with Neumann boundaries by successive
/// over-relaxation, then subtracts the mean of `s`.
pub fn poisson_reconstruct(g: &GradientField, params: &SolverParams) -> Result<GrayFrame> {
    let div = g.divergence();
    let (w, h) = div.dims();
    let mut s = GrayFrame::new(w, h);
    let div_norm = l2(div.as_slice());
    if div_norm == 0.0 || w * h == 0 {
        return Ok(s);
    }
    let omega = params.omega;
    const CHECK_EVERY: usize = 10;
    let mut residual = f64::INFINITY;
    let data = s.as_mut_slice();
    let d = div.as_slice();
    for sweep in 1..=params.max_sweeps {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut sum = 0.0;
                let mut n = 0.0;
                if x > 0 {
                    sum += data[i - 1];
                    n += 1.0;
                }
                if x + 1 < w {
                    sum += data[i + 1];
                    n += 1.0;
                }
                if y > 0 {
                    sum += data[i - w];
                    n += 1.0;
                }
                if y + 1 < h {
                    sum += data[i + w];
                    n += 1.0;
                }
                if n > 0.0 {
                    let target = (sum - d[i]) / n;
                    data[i] += omega * (target - data[i]);
                }
            }
        }
        if sweep % CHECK_EVERY == 0 || sweep == params.max_sweeps {
            let snapshot = GrayFrame::from_vec(w, h, data.to_vec())?;
            residual = relative_residual(&snapshot, &div, div_norm);
            if residual < params.tolerance {
                let mean = snapshot.mean();
                return Ok(snapshot.map(|v| v - mean));
            }
        }
    }
    Err(Error::NoConvergence {
        sweeps: params.max_sweeps,
        residual,
    })
}

/// Log-domain shadow/shadow-free decomposition of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSplit {
    /// `i = ln(gray + 1/256)`.
    pub log_image: GrayFrame,
    /// Integrated shadow-edge gradients, `s`.
    pub shadow_log: GrayFrame,
    /// `r = i - s`.
    pub free_log: GrayFrame,
    /// `S = exp(s - max s)`.
    pub shadow: GrayFrame,
    /// `R = exp(r - max r)`.
    pub shadow_free: GrayFrame,
}

pub fn log_image(f: &RgbFrame) -> GrayFrame {
    to_grayscale(f).map(|v| (v + LOG_OFFSET).ln())
}

fn exp_normalize(v: &GrayFrame) -> GrayFrame {
    let max = v.max();
    v.map(|a| (a - max).exp())
}

/// Integrates the gradients under the shadow mask into `s`, removes it from
/// the log image and exponentiates both parts back to `[0, 1]`.
pub fn split_shadow(f: &RgbFrame, masks: &ShadowMasks, solver: &SolverParams) -> Result<ShadowSplit> {
    let i = log_image(f);
    let s = poisson_reconstruct(&shadow_gradient(&i, &masks.mask)?, solver)?;
    let r = i.zip_map(&s, |a, b| a - b)?;
    Ok(ShadowSplit {
        shadow: exp_normalize(&s),
        shadow_free: exp_normalize(&r),
        log_image: i,
        shadow_log: s,
        free_log: r,
    })
}

// ---------------------------------------------------------------------------
// Blobs

#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    /// Integer bounding box `[x, y, w, h]`.
    pub bbox: [usize; 4],
    /// Membership restricted to `bbox`.
    pub mask: BinaryMask,
    pub centroid: (f64, f64),
    pub area: usize,
}

impl Blob {
    pub fn to_box(&self) -> BoxF {
        let [x, y, w, h] = self.bbox;
        BoxF::new(x as f64, y as f64, w as f64, h as f64)
    }
}

/// 8-connected components with at least `min_area` pixels, largest first;
/// equal areas keep scan order of their first pixel.
pub fn extract_blobs(m: &BinaryMask, min_area: usize) -> Vec<Blob> {
    let (w, h) = m.dims();
    let mut label = vec![usize::MAX; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !m.as_slice()[start] || label[start] != usize::MAX {
            continue;
        }
        let id = blobs.len();
        let mut pixels = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (px, py) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (px + dx, py + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if m.as_slice()[q] && label[q] == usize::MAX {
                        label[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        blobs.push((start, pixels));
    }
    let mut out: Vec<(usize, Blob)> = blobs
        .into_iter()
        .filter(|(_, px)| px.len() >= min_area.max(1))
        .map(|(first, px)| {
            let xs = px.iter().map(|p| p % w);
            let ys = px.iter().map(|p| p / w);
            let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
            let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
            let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
            let mut mask = BinaryMask::new(bw, bh);
            let (mut sx, mut sy) = (0.0, 0.0);
            for &p in &px {
                let (x, y) = (p % w, p / w);
                mask.set(x - x0, y - y0, true);
                sx += x as f64;
                sy += y as f64;
            }
            let n = px.len() as f64;
            (
                first,
                Blob {
                    bbox: [x0, y0, bw, bh],
                    mask,
                    centroid: (sx / n, sy / n),
                    area: px.len(),
                },
            )
        })
        .collect();
    out.sort_by(|a, b| b.1.area.cmp(&a.1.area).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(_, b)| b).collect()
}

//! Pixel rasters shared by every stage of the pipeline.
//!
//! All intensities are `f64` on `[0, 1]`, stored row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel intensity image.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Wraps raw row-major samples. Values are not clamped, so this is also
    /// used for signed intermediates such as log images.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "{} samples for a {width}x{height} frame",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped to the frame (replicated border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    /// Bilinear interpolation at continuous coordinates where pixel `(i, j)`
    /// has its center at `(i + 0.5, j + 0.5)`. Returns `None` outside the frame.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let fx = x - 0.5;
        let fy = y - 0.5;
        if !(fx > -1.0 && fy > -1.0 && fx < self.width as f64 && fy < self.height as f64) {
            return None;
        }
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(x0, y0);
        let b = self.get_clamped(x0 + 1, y0);
        let c = self.get_clamped(x0, y0 + 1);
        let d = self.get_clamped(x0 + 1, y0 + 1);
        Some((a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Gray replicated into all three channels.
    pub fn to_rgb(&self) -> RgbFrame {
        RgbFrame {
            width: self.width,
            height: self.height,
            r: self.data.clone(),
            g: self.data.clone(),
            b: self.data.clone(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Three-channel color image.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    r: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
}

impl RgbFrame {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            r: vec![rgb[0]; n],
            g: vec![rgb[1]; n],
            b: vec![rgb[2]; n],
        }
    }

    pub fn from_planes(width: usize, height: usize, r: Vec<f64>, g: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(Error::invalid("rgb planes do not match frame size"));
        }
        Ok(Self {
            width,
            height,
            r,
            g,
            b,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut out = Self::filled(width, height, [0.0; 3]);
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, f(x, y));
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.r[i], self.g[i], self.b[i]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = y * self.width + x;
        self.r[i] = rgb[0];
        self.g[i] = rgb[1];
        self.b[i] = rgb[2];
    }

    pub fn planes(&self) -> [&[f64]; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Per-channel map returning a new frame.
    pub fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = self.clone();
        for i in 0..self.r.len() {
            let [r, g, b] = f([self.r[i], self.g[i], self.b[i]]);
            out.r[i] = r;
            out.g[i] = g;
            out.b[i] = b;
        }
        out
    }

    pub fn channel(&self, c: usize) -> GrayFrame {
        let plane = match c {
            0 => &self.r,
            1 => &self.g,
            _ => &self.b,
        };
        GrayFrame {
            width: self.width,
            height: self.height,
            data: plane.clone(),
        }
    }
}

/// Boolean raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("mask size does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.zip(other, |a, b| a && b))
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.zip(other, |a, b| a || b))
    }

    pub fn not(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }

    fn zip(&self, other: &Self, mut f: impl FnMut(bool, bool) -> bool) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// 0/1 gray rendition, handy for writing masks as PGM.
    pub fn to_gray(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Run-length encoding in row-major order: alternating run lengths that
    /// always start with a (possibly empty) run of unset pixels.
    pub fn to_rle(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in &self.data {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        counts
    }

    pub fn from_rle(width: usize, height: usize, counts: &[u32]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        let mut value = false;
        for &c in counts {
            data.extend(std::iter::repeat_n(value, c as usize));
            value = !value;
        }
        if data.len() != width * height {
            return Err(Error::Parse(format!(
                "rle covers {} pixels, frame has {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Axis-aligned box in pixel coordinates: `[x, y)` to `[x + w, y + h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxF {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxF {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn intersection(&self, other: &BoxF) -> Option<BoxF> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then(|| BoxF::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn iou(&self, other: &BoxF) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Whether the pixel with center `(px + 0.5, py + 0.5)` lies inside.
    #[inline]
    pub fn contains_pixel(&self, px: usize, py: usize) -> bool {
        let cx = px as f64 + 0.5;
        let cy = py as f64 + 0.5;
        cx >= self.x && cx < self.x + self.w && cy >= self.y && cy < self.y + self.h
    }

    /// Integer pixel range covered by this box, clipped to a frame.
    pub fn pixel_range(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let x0 = clip((self.x - 0.5).ceil(), width);
        let y0 = clip((self.y - 0.5).ceil(), height);
        let x1 = clip((self.x + self.w - 0.5).ceil(), width);
        let y1 = clip((self.y + self.h - 0.5).ceil(), height);
        (x0, y0, x1, y1)
    }

    pub fn pixel_count(&self, width: usize, height: usize) -> usize {
        let (x0, y0, x1, y1) = self.pixel_range(width, height);
        x1.saturating_sub(x0) * y1.saturating_sub(y0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

pub(crate) fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::Dimensions { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_starts_with_unset_run() {
        let m = BinaryMask::from_vec(4, 1, vec![true, true, false, true]).unwrap();
        assert_eq!(m.to_rle(), vec![0, 2, 1, 1]);
        assert_eq!(BinaryMask::from_rle(4, 1, &m.to_rle()).unwrap(), m);
    }

    #[test]
    fn rle_rejects_wrong_length() {
        assert!(BinaryMask::from_rle(2, 2, &[3]).is_err());
    }

    #[test]
    fn box_pixel_membership_uses_centers() {
        let b = BoxF::new(2.0, 3.0, 5.0, 10.0);
        assert_eq!(b.pixel_count(100, 100), 50);
        assert!(b.contains_pixel(2, 3));
        assert!(!b.contains_pixel(7, 3));
    }

    #[test]
    fn iou_of_half_shift_is_one_third() {
        let a = BoxF::new(0.0, 0.0, 10.0, 10.0);
        let b = BoxF::new(5.0, 0.0, 10.0, 10.0);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let f = GrayFrame::from_fn(3, 3, |x, y| (x + 3 * y) as f64);
        assert_eq!(f.sample_bilinear(1.5, 1.5), Some(4.0));
        assert_eq!(f.sample_bilinear(2.0, 1.5), Some(4.5));
        assert_eq!(f.sample_bilinear(-1.0, 1.0), None);
    }
}

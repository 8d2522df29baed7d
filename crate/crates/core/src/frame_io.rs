//! Frame conversion, PGM/PPM sequences and synthetic ground-truthed scenes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, BoxF, GrayFrame, RgbFrame};

/// Luma conversion `0.299 R + 0.587 G + 0.114 B`, clamped to `[0, 1]`.
pub fn to_grayscale(f: &RgbFrame) -> GrayFrame {
    let [r, g, b] = f.planes();
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0))
        .collect();
    GrayFrame::from_vec(f.width(), f.height(), data).expect("planes share dimensions")
}

/// HSV value channel, `max(R, G, B)`.
pub fn to_value_gray(f: &RgbFrame) -> GrayFrame {
    let [r, g, b] = f.planes();
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| r.max(g).max(b))
        .collect();
    GrayFrame::from_vec(f.width(), f.height(), data).expect("planes share dimensions")
}

// ---------------------------------------------------------------------------
// PNM

/// Either flavour of decoded netpbm image.
#[derive(Clone, Debug, PartialEq)]
pub enum Pnm {
    Gray(GrayFrame),
    Rgb(RgbFrame),
}

impl Pnm {
    pub fn into_rgb(self) -> RgbFrame {
        match self {
            Pnm::Gray(g) => g.to_rgb(),
            Pnm::Rgb(c) => c,
        }
    }

    pub fn into_gray(self) -> GrayFrame {
        match self {
            Pnm::Gray(g) => g,
            Pnm::Rgb(c) => to_grayscale(&c),
        }
    }
}

/// Decodes binary P5/P6 with maxval 255.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Pnm> {
    let bad = |reason: &str| Error::BadImage {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let channels = match tokens[0] {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(bad("expected P5 or P6 magic")),
    };
    let parse = |t: &str| t.parse::<usize>().map_err(|_| bad("non-numeric header field"));
    let (width, height, maxval) = (parse(tokens[1])?, parse(tokens[2])?, parse(tokens[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(bad("zero-sized image"));
    }
    let n = width * height * channels;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated raster"))?;
    let to_unit = |b: u8| b as f64 / 255.0;
    if channels == 1 {
        let data = raster.iter().map(|&b| to_unit(b)).collect();
        Ok(Pnm::Gray(GrayFrame::from_vec(width, height, data)?))
    } else {
        let px = width * height;
        let (mut r, mut g, mut b) = (Vec::with_capacity(px), Vec::with_capacity(px), Vec::with_capacity(px));
        for chunk in raster.chunks_exact(3) {
            r.push(to_unit(chunk[0]));
            g.push(to_unit(chunk[1]));
            b.push(to_unit(chunk[2]));
        }
        Ok(Pnm::Rgb(RgbFrame::from_planes(width, height, r, g, b)?))
    }
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

#[inline]
fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(f: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", f.width(), f.height()).into_bytes();
    out.extend(f.as_slice().iter().map(|&v| to_byte(v)));
    out
}

pub fn encode_ppm(f: &RgbFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", f.width(), f.height()).into_bytes();
    for y in 0..f.height() {
        for x in 0..f.width() {
            out.extend(f.get(x, y).map(to_byte));
        }
    }
    out
}

pub fn write_pgm(path: &Path, f: &GrayFrame) -> Result<()> {
    write_atomic(path, &encode_pgm(f))
}

pub fn write_ppm(path: &Path, f: &RgbFrame) -> Result<()> {
    write_atomic(path, &encode_ppm(f))
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A printf-style numbered file pattern such as `frame_%04d.ppm`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    suffix: String,
    width: usize,
}

impl FramePattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("`{pattern}` is not a numbered pattern like frame_%04d.pgm"));
        let pct = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[pct + 1..];
        let d = rest.find('d').ok_or_else(bad)?;
        let digits = &rest[..d];
        let width = if digits.is_empty() {
            0
        } else {
            digits.parse::<usize>().map_err(|_| bad())?
        };
        Ok(Self {
            prefix: pattern[..pct].to_string(),
            suffix: rest[d + 1..].to_string(),
            width,
        })
    }

    pub fn format(&self, index: usize) -> String {
        format!("{}{:0w$}{}", self.prefix, index, self.suffix, w = self.width)
    }

    pub fn index_of(&self, file_name: &str) -> Option<usize> {
        let digits = file_name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
}

/// Lists `(index, path)` for files matching `pattern`, in index order.
pub fn list_sequence(dir: &Path, pattern: &str) -> Result<Vec<(usize, PathBuf)>> {
    let pat = FramePattern::parse(pattern)?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(i) = pat.index_of(&name.to_string_lossy()) {
            found.push((i, entry.path()));
        }
    }
    found.sort_by_key(|(i, _)| *i);
    Ok(found)
}

/// Reads every frame matching `pattern` under `dir`, in increasing index order.
pub fn read_sequence(dir: &Path, pattern: &str) -> Result<Vec<RgbFrame>> {
    let files = list_sequence(dir, pattern)?;
    if files.is_empty() {
        return Err(Error::EmptySequence {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    let mut frames: Vec<RgbFrame> = Vec::with_capacity(files.len());
    for (_, path) in &files {
        let frame = read_pnm(path)?.into_rgb();
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(Error::BadImage {
                    path: path.clone(),
                    reason: format!(
                        "size {:?} differs from the sequence's {:?}",
                        frame.dims(),
                        first.dims()
                    ),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

// ---------------------------------------------------------------------------
// Synthetic scenes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rect,
    Ellipse,
}

/// Surface pattern painted on an object, in object-local coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Texture {
    Flat,
    Stripes { period: f64, contrast: f64 },
    Checker { period: f64, contrast: f64 },
}

impl Texture {
    fn factor(&self, u: f64, v: f64) -> f64 {
        match *self {
            Texture::Flat => 1.0,
            Texture::Stripes { period, contrast } => {
                if (v / period).floor() as i64 % 2 == 0 {
                    1.0 + contrast / 2.0
                } else {
                    1.0 - contrast / 2.0
                }
            }
            Texture::Checker { period, contrast } => {
                let parity = ((u / period).floor() as i64 + (v / period).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    1.0 + contrast / 2.0
                } else {
                    1.0 - contrast / 2.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Trajectory {
    /// Constant velocity from `start`, fixed size.
    Linear {
        start: (f64, f64),
        velocity: (f64, f64),
        size: (f64, f64),
    },
    /// Explicit `[cx, cy, w, h]` per frame; the last entry holds afterwards.
    Keyframes(Vec<[f64; 4]>),
}

impl Trajectory {
    pub fn at(&self, t: usize) -> [f64; 4] {
        match self {
            Trajectory::Linear { start, velocity, size } => [
                start.0 + velocity.0 * t as f64,
                start.1 + velocity.1 * t as f64,
                size.0,
                size.1,
            ],
            Trajectory::Keyframes(keys) => keys[t.min(keys.len() - 1)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CastShadow {
    /// Displacement of the shadow silhouette from the object, in pixels.
    pub offset: (f64, f64),
    /// Multiplicative darkening of the background, in `(0, 1)`.
    pub attenuation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub trajectory: Trajectory,
    pub albedo: [f64; 3],
    #[serde(default = "flat_texture")]
    pub texture: Texture,
    #[serde(default)]
    pub shadow: Option<CastShadow>,
}

fn flat_texture() -> Texture {
    Texture::Flat
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backdrop {
    Flat([f64; 3]),
    Image(GrayFrame),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub width: usize,
    pub height: usize,
    pub background: Backdrop,
    pub objects: Vec<SceneObject>,
    /// Standard deviation of additive per-channel Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Ground truth for one rendered frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTruth {
    pub frame: usize,
    /// `(object id, box)` for every object.
    pub boxes: Vec<(usize, BoxF)>,
    /// Pixels covered by any object.
    pub motion: BinaryMask,
    /// Pixels darkened by a cast shadow and not covered by an object.
    pub shadow: BinaryMask,
}

fn inside_shape(shape: Shape, b: &BoxF, px: usize, py: usize) -> bool {
    match shape {
        Shape::Rect => b.contains_pixel(px, py),
        Shape::Ellipse => {
            let (cx, cy) = b.center();
            let dx = (px as f64 + 0.5 - cx) / (b.w / 2.0);
            let dy = (py as f64 + 0.5 - cy) / (b.h / 2.0);
            dx * dx + dy * dy <= 1.0
        }
    }
}

impl SyntheticScene {
    pub fn validate(&self, n_frames: usize) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Scene("empty frame".into()));
        }
        if let Backdrop::Image(img) = &self.background {
            if img.dims() != (self.width, self.height) {
                return Err(Error::Scene("background image size differs from scene".into()));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Scene("noise sigma must be non-negative".into()));
        }
        for (id, obj) in self.objects.iter().enumerate() {
            if let Some(s) = obj.shadow {
                if !(s.attenuation > 0.0 && s.attenuation < 1.0) {
                    return Err(Error::Scene(format!("object {id}: attenuation must lie in (0, 1)")));
                }
            }
            if let Trajectory::Keyframes(k) = &obj.trajectory {
                if k.is_empty() {
                    return Err(Error::Scene(format!("object {id}: no keyframes")));
                }
            }
            for t in 0..n_frames {
                let [cx, cy, w, h] = obj.trajectory.at(t);
                let b = BoxF::from_center(cx, cy, w, h);
                if !(w > 0.0 && h > 0.0) {
                    return Err(Error::Scene(format!("object {id}: non-positive size at frame {t}")));
                }
                if b.x < 0.0 || b.y < 0.0 || b.x + b.w > self.width as f64 || b.y + b.h > self.height as f64 {
                    return Err(Error::Scene(format!("object {id} leaves the frame at frame {t}")));
                }
            }
        }
        Ok(())
    }

    fn background_at(&self, x: usize, y: usize) -> [f64; 3] {
        match &self.background {
            Backdrop::Flat(c) => *c,
            Backdrop::Image(img) => {
                let v = img.get(x, y);
                [v, v, v]
            }
        }
    }
}

/// Static backdrop of six random plane waves with periods of 4 to 12
/// pixels around `mean`, peak amplitude `amplitude`.
pub fn textured_backdrop(width: usize, height: usize, mean: f64, amplitude: f64, seed: u64) -> GrayFrame {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let k = std::f64::consts::TAU / rng.random_range(4.0..12.0);
            (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    GrayFrame::from_fn(width, height, |x, y| {
        let v: f64 = waves.iter().map(|(kx, ky, p)| (kx * x as f64 + ky * y as f64 + p).sin()).sum();
        (mean + amplitude * v / waves.len() as f64).clamp(0.0, 1.0)
    })
}

/// Renders `n_frames` frames of `scene` plus per-frame ground truth.
/// Identical inputs give bit-identical output.
pub fn generate_synthetic(scene: &SyntheticScene, n_frames: usize) -> Result<(Vec<RgbFrame>, Vec<FrameTruth>)> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames must be at least 1"));
    }
    scene.validate(n_frames)?;
    let (w, h) = (scene.width, scene.height);
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let noise = if scene.noise_sigma > 0.0 {
        Some(Normal::new(0.0, scene.noise_sigma).map_err(|e| Error::Scene(e.to_string()))?)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(n_frames);
    let mut truths = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let boxes: Vec<BoxF> = scene
            .objects
            .iter()
            .map(|o| {
                let [cx, cy, bw, bh] = o.trajectory.at(t);
                BoxF::from_center(cx, cy, bw, bh)
            })
            .collect();

        let mut frame = RgbFrame::from_fn(w, h, |x, y| scene.background_at(x, y));
        let mut motion = BinaryMask::new(w, h);
        let mut shadow = BinaryMask::new(w, h);

        for y in 0..h {
            for x in 0..w {
                let mut atten = 1.0f64;
                for (obj, b) in scene.objects.iter().zip(&boxes) {
                    if let Some(s) = obj.shadow {
                        let sb = BoxF::new(b.x + s.offset.0, b.y + s.offset.1, b.w, b.h);
                        if inside_shape(obj.shape, &sb, x, y) {
                            atten = atten.min(s.attenuation);
                        }
                    }
                }
                if atten < 1.0 {
                    let p = frame.get(x, y);
                    frame.set(x, y, p.map(|c| c * atten));
                    shadow.set(x, y, true);
                }
                for (obj, b) in scene.objects.iter().zip(&boxes) {
                    if inside_shape(obj.shape, b, x, y) {
                        let k = obj.texture.factor(x as f64 + 0.5 - b.x, y as f64 + 0.5 - b.y);
                        frame.set(x, y, obj.albedo.map(|c| (c * k).clamp(0.0, 1.0)));
                        motion.set(x, y, true);
                        shadow.set(x, y, false);
                    }
                }
            }
        }

        if let Some(noise) = &noise {
            frame = frame.map_pixels(|p| p.map(|c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0)));
        }

        frames.push(frame);
        truths.push(FrameTruth {
            frame: t,
            boxes: boxes.into_iter().enumerate().collect(),
            motion,
            shadow,
        });
    }
    Ok((frames, truths))
}

// ---------------------------------------------------------------------------
// Truth JSON-lines

#[derive(Serialize, Deserialize)]
struct TruthObjectRecord {
    id: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    frame: usize,
    width: usize,
    height: usize,
    objects: Vec<TruthObjectRecord>,
    motion: Vec<u32>,
    shadow: Vec<u32>,
}

pub fn truth_to_jsonl(truths: &[FrameTruth]) -> String {
    let mut out = String::new();
    for t in truths {
        let rec = TruthRecord {
            frame: t.frame,
            width: t.motion.width(),
            height: t.motion.height(),
            objects: t
                .boxes
                .iter()
                .map(|(id, b)| TruthObjectRecord {
                    id: *id,
                    bbox: b.to_array(),
                })
                .collect(),
            motion: t.motion.to_rle(),
            shadow: t.shadow.to_rle(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("truth records serialize"));
        out.push('\n');
    }
    out
}

pub fn truth_from_jsonl(text: &str) -> Result<Vec<FrameTruth>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let rec: TruthRecord = serde_json::from_str(line)?;
            Ok(FrameTruth {
                frame: rec.frame,
                boxes: rec
                    .objects
                    .iter()
                    .map(|o| (o.id, BoxF::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3])))
                    .collect(),
                motion: BinaryMask::from_rle(rec.width, rec.height, &rec.motion)?,
                shadow: BinaryMask::from_rle(rec.width, rec.height, &rec.shadow)?,
            })
        })
        .collect()
}

/// Writes `frame_%04d.ppm` files plus `truth.jsonl` into `dir`.
pub fn write_synthetic(dir: &Path, frames: &[RgbFrame], truths: &[FrameTruth]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pat = FramePattern::parse(SEQUENCE_PATTERN)?;
    for (i, f) in frames.iter().enumerate() {
        write_ppm(&dir.join(pat.format(i)), f)?;
    }
    write_atomic(&dir.join(TRUTH_FILE), truth_to_jsonl(truths).as_bytes())
}

pub const SEQUENCE_PATTERN: &str = "frame_%04d.ppm";
pub const TRUTH_FILE: &str = "truth.jsonl";

// ---------------------------------------------------------------------------
// Named scene presets

/// Colors and textures for the synthetic object classes used across the
/// recognition and tracking fixtures.
pub mod palette {
    use super::{Shape, Texture};

    pub const BACKGROUND: [f64; 3] = [0.55, 0.55, 0.55];

    /// `(name, shape, albedo, texture)` for every synthetic object class.
    pub fn classes() -> [(&'static str, Shape, [f64; 3], Texture); 3] {
        [
            (
                "car",
                Shape::Rect,
                [0.85, 0.25, 0.2],
                Texture::Stripes {
                    period: 4.0,
                    contrast: 0.5,
                },
            ),
            (
                "person",
                Shape::Ellipse,
                [0.2, 0.35, 0.9],
                Texture::Checker {
                    period: 5.0,
                    contrast: 0.5,
                },
            ),
            ("sign", Shape::Rect, [0.95, 0.9, 0.2], Texture::Flat),
        ]
    }
}

/// Builds one of the named scenes understood by the `generate` command:
/// `static`, `single`, `cross2`, `shadow`.
pub fn preset_scene(name: &str, n_frames: usize, seed: u64) -> Result<SyntheticScene> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7e);
    let (width, height) = (128usize, 96usize);
    let classes = palette::classes();
    let span = n_frames.saturating_sub(1).max(1) as f64;
    let objects = match name {
        "static" => vec![],
        "single" => {
            let (_, shape, albedo, texture) = classes[0];
            let vx = 2.0f64.min(80.0 / span);
            vec![SceneObject {
                shape,
                trajectory: Trajectory::Linear {
                    start: (20.0, 48.0 + rng.random_range(-6.0..6.0)),
                    velocity: (vx, 0.0),
                    size: (18.0, 24.0),
                },
                albedo,
                texture,
                shadow: None,
            }]
        }
        "cross2" => {
            let travel = 76.0;
            let v = travel / span;
            let dy = rng.random_range(-3.0..3.0);
            let (_, s0, a0, t0) = classes[0];
            let (_, s1, a1, t1) = classes[1];
            vec![
                SceneObject {
                    shape: s0,
                    trajectory: Trajectory::Linear {
                        start: (26.0, 44.0 + dy),
                        velocity: (v, 0.0),
                        size: (20.0, 26.0),
                    },
                    albedo: a0,
                    texture: t0,
                    shadow: None,
                },
                SceneObject {
                    shape: s1,
                    trajectory: Trajectory::Linear {
                        start: (102.0, 52.0 + dy),
                        velocity: (-v, 0.0),
                        size: (20.0, 28.0),
                    },
                    albedo: a1,
                    texture: t1,
                    shadow: None,
                },
            ]
        }
        "shadow" => {
            let (_, shape, albedo, texture) = classes[rng.random_range(0..2)];
            let cx = rng.random_range(30.0..50.0);
            let cy = rng.random_range(30.0..50.0);
            vec![SceneObject {
                shape,
                trajectory: Trajectory::Linear {
                    start: (cx, cy),
                    velocity: (0.0, 0.0),
                    size: (20.0, 24.0),
                },
                albedo,
                texture,
                shadow: Some(CastShadow {
                    offset: (rng.random_range(18.0..26.0), rng.random_range(14.0..22.0)),
                    attenuation: 0.5,
                }),
            }]
        }
        other => return Err(Error::invalid(format!("unknown scene `{other}`"))),
    };
    Ok(SyntheticScene {
        width,
        height,
        background: Backdrop::Flat(palette::BACKGROUND),
        objects,
        noise_sigma: if name == "shadow" { 0.0 } else { 0.02 },
        seed,
    })
}

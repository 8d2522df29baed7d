//! WebAssembly bindings for the browser demo in `www/`.
//!
//! A [`Demo`] holds one synthetic sequence. The page renders its frames and
//! runs motion detection, swarm tracking from the first-frame truth boxes,
//! or shadow removal on demand. Images cross the boundary as RGBA bytes.

use wasm_bindgen::prelude::*;

use vtrack::background::{BackgroundParams, MotionDetector};
use vtrack::frame_io::{generate_synthetic, preset_scene, to_grayscale, FrameTruth};
use vtrack::metrics::{evaluate_tracks, mask_f1};
use vtrack::pipeline::truth_frames;
use vtrack::shadow::{detect_shadow_edges, split_shadow, ShadowParams};
use vtrack::tracker::{annotate, track_sequence, TrackRecord, TrackerParams};
use vtrack::{BinaryMask, BoxF, GrayFrame, RgbFrame};

/// Frames before motion masks are scored.
const BURN_IN: usize = 20;

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn rgba(f: &RgbFrame) -> Vec<u8> {
    let (w, h) = f.dims();
    let mut out = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = f.get(x, y);
            out.extend_from_slice(&[to_byte(r), to_byte(g), to_byte(b), 255]);
        }
    }
    out
}

fn gray_rgba(f: &GrayFrame) -> Vec<u8> {
    rgba(&f.to_rgb())
}

fn err(e: vtrack::Error) -> String {
    e.to_string()
}

#[wasm_bindgen]
pub struct Demo {
    frames: Vec<RgbFrame>,
    truth: Vec<FrameTruth>,
    masks: Vec<BinaryMask>,
    tracks: Vec<TrackRecord>,
}

#[wasm_bindgen]
impl Demo {
    /// Renders `frames` frames of a named scene: `single`, `cross2`,
    /// `shadow` or `static`.
    #[wasm_bindgen(constructor)]
    pub fn new(scene: &str, frames: usize, seed: u32) -> Result<Demo, String> {
        let (frames, truth) = generate_synthetic(&preset_scene(scene, frames, seed.into()).map_err(err)?, frames).map_err(err)?;
        Ok(Demo {
            frames,
            truth,
            masks: Vec::new(),
            tracks: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_rgba(&self, t: usize) -> Vec<u8> {
        rgba(&self.frames[t.min(self.len() - 1)])
    }

    /// Runs the background model over the sequence; returns the mean mask F1
    /// after burn-in, or NaN for sequences too short to score.
    pub fn detect_motion(&mut self, t_sim: f64) -> Result<f64, String> {
        let params = BackgroundParams {
            t_sim,
            ..BackgroundParams::default()
        };
        params.validate().map_err(err)?;
        let mut det = MotionDetector::new(params);
        self.masks.clear();
        let mut f1 = Vec::new();
        for (t, f) in self.frames.iter().enumerate() {
            let m = det.process(&to_grayscale(f)).map_err(err)?;
            if t >= BURN_IN {
                f1.push(mask_f1(&m.cleaned, &self.truth[t].motion).map_err(err)?);
            }
            self.masks.push(m.cleaned);
        }
        Ok(f1.iter().sum::<f64>() / f1.len() as f64)
    }

    /// Frame `t` with moving pixels tinted red; the plain frame before
    /// [`Demo::detect_motion`] has run.
    pub fn motion_rgba(&self, t: usize) -> Vec<u8> {
        let t = t.min(self.len() - 1);
        let Some(mask) = self.masks.get(t) else {
            return self.frame_rgba(t);
        };
        let f = &self.frames[t];
        let (w, h) = f.dims();
        rgba(&RgbFrame::from_fn(w, h, |x, y| {
            let [r, g, b] = f.get(x, y);
            if mask.get(x, y) {
                [1.0, g * 0.4, b * 0.4]
            } else {
                [r, g, b]
            }
        }))
    }

    /// Tracks every object from its first-frame truth box; returns the
    /// success rate (truth boxes matched at IoU above one half).
    pub fn track(&mut self, seed: u32, particles: usize) -> Result<f64, String> {
        let mut params = TrackerParams {
            seed: seed.into(),
            ..TrackerParams::default()
        };
        params.agpso.particles = particles;
        let init: Vec<BoxF> = self.truth[0].boxes.iter().map(|b| b.1).collect();
        let gray: Vec<GrayFrame> = self.frames.iter().map(to_grayscale).collect();
        let out = track_sequence(&gray, &init, &params).map_err(err)?;
        let m = evaluate_tracks(&out.records, &truth_frames(&self.truth)).map_err(err)?;
        self.tracks = out.records;
        Ok(m.success_rate)
    }

    /// Frame `t` with the current track boxes drawn on it.
    pub fn tracks_rgba(&self, t: usize) -> Vec<u8> {
        let t = t.min(self.len() - 1);
        let recs: Vec<&TrackRecord> = self.tracks.iter().filter(|r| r.frame == t).collect();
        rgba(&annotate(&self.frames[t], &recs))
    }

    /// Shadow-free intensity of frame `t` with edge thresholds `t1 > t2`.
    pub fn remove_shadow(&self, t: usize, t1: f64, t2: f64) -> Result<Vec<u8>, String> {
        let params = ShadowParams {
            t1,
            t2,
            ..ShadowParams::default()
        };
        params.validate().map_err(err)?;
        let f = &self.frames[t.min(self.len() - 1)];
        let split = split_shadow(f, &detect_shadow_edges(f, &params).map_err(err)?, &params.solver).map_err(err)?;
        Ok(gray_rgba(&split.shadow_free))
    }
}

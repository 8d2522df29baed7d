//! Multi-object tracking: one AGPSO species per object, subspace appearance
//! likelihoods, competition and repulsion over overlaps, and selective
//! appearance updates.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agpso::{random_direction, step_particles, AgpsoParams, State, Swarm};
use crate::error::{Error, Result};
use crate::image::{BoxF, GrayFrame, RgbFrame};

/// Side of the square appearance patch.
pub const PATCH: usize = 32;
pub const PATCH_LEN: usize = PATCH * PATCH;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    pub agpso: AgpsoParams,
    /// Residual energy giving likelihood `e^-1`.
    pub sigma_obs_sq: f64,
    /// Subspace dimension `q`.
    pub basis_size: usize,
    /// Appearance window capacity `W`.
    pub window: usize,
    /// Subspace recomputed every `u` updates.
    pub recompute_every: usize,
    /// Reconstruction error admitting an occluded pixel into the update.
    pub tau: f64,
    pub floor: f64,
    /// A species whose best fit stays below this for `lost_patience`
    /// consecutive frames is terminated.
    pub lost_fit: f64,
    pub lost_patience: usize,
    /// Repulsion magnitude, pixels.
    pub eta: f64,
    /// Set from the top-level configuration seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            agpso: AgpsoParams::default(),
            sigma_obs_sq: 0.05 * PATCH_LEN as f64,
            basis_size: 8,
            window: 16,
            recompute_every: 5,
            tau: 0.1,
            floor: 1e-12,
            lost_fit: 1e-3,
            lost_patience: 10,
            eta: 4.0,
            seed: 0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        self.agpso.validate()?;
        if !(self.sigma_obs_sq > 0.0) || self.window == 0 || self.recompute_every == 0 || !(self.floor > 0.0) {
            return Err(Error::invalid("tracker needs sigma_obs_sq > 0, window > 0, recompute_every > 0, floor > 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Appearance

/// Mean patch, orthonormal basis and the window it was learned from.
#[derive(Clone, Debug, PartialEq)]
pub struct Appearance {
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub window: VecDeque<Vec<f64>>,
    pub updates: usize,
}

impl Appearance {
    pub fn from_patch(patch: Vec<f64>) -> Self {
        Self {
            mean: patch.clone(),
            basis: Vec::new(),
            window: VecDeque::from([patch]),
            updates: 0,
        }
    }

    /// `U U^T o` for a mean-removed patch.
    pub fn project(&self, o: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; o.len()];
        for u in &self.basis {
            let c: f64 = u.iter().zip(o).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(u).for_each(|(r, a)| *r += c * a);
        }
        out
    }

    /// `o - U U^T o` with `o = patch - mean`.
    pub fn residual(&self, patch: &[f64]) -> Vec<f64> {
        let o: Vec<f64> = patch.iter().zip(&self.mean).map(|(p, m)| p - m).collect();
        let proj = self.project(&o);
        o.iter().zip(proj).map(|(a, b)| a - b).collect()
    }

    /// Mean and top-`q` left singular vectors of the mean-removed window.
    pub fn recompute(&mut self, q: usize) {
        let n = self.window.len();
        let dim = self.mean.len();
        let mut mean = vec![0.0; dim];
        for p in &self.window {
            mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / n as f64);
        }
        let x = DMatrix::from_fn(dim, n, |i, j| self.window[j][i] - mean[i]);
        let svd = x.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let smax = order.first().map_or(0.0, |&i| svd.singular_values[i]);
        self.basis = order
            .into_iter()
            .take(q)
            .filter(|&i| svd.singular_values[i] > 1e-9 * smax.max(1e-300))
            .map(|i| u.column(i).iter().copied().collect())
            .collect();
        self.mean = mean;
    }

    pub fn push(&mut self, patch: Vec<f64>, capacity: usize) {
        self.window.push_back(patch);
        while self.window.len() > capacity {
            self.window.pop_front();
        }
    }
}

/// Bilinear sample with clamped borders; pixel centers at `i + 0.5`.
fn sample_clamped(f: &GrayFrame, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x - 0.5, y - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let p = |dx: isize, dy: isize| f.get_clamped(x0 + dx, y0 + dy);
    (1.0 - ty) * ((1.0 - tx) * p(0, 0) + tx * p(1, 0)) + ty * ((1.0 - tx) * p(0, 1) + tx * p(1, 1))
}

/// Image position of patch cell `(u, v)` for box `b`.
fn cell_point(b: &BoxF, u: usize, v: usize) -> (f64, f64) {
    (
        b.x + (u as f64 + 0.5) * b.w / PATCH as f64,
        b.y + (v as f64 + 0.5) * b.h / PATCH as f64,
    )
}

/// The box resampled to a 32x32 patch, row-major.
pub fn sample_patch(f: &GrayFrame, b: &BoxF) -> Vec<f64> {
    let mut out = Vec::with_capacity(PATCH_LEN);
    for v in 0..PATCH {
        for u in 0..PATCH {
            let (x, y) = cell_point(b, u, v);
            out.push(sample_clamped(f, x, y));
        }
    }
    out
}

/// Patch cells whose sample point lies inside `region`.
pub fn cells_in(b: &BoxF, region: &BoxF) -> Vec<bool> {
    let mut out = Vec::with_capacity(PATCH_LEN);
    for v in 0..PATCH {
        for u in 0..PATCH {
            let (x, y) = cell_point(b, u, v);
            out.push(x >= region.x && x < region.x + region.w && y >= region.y && y < region.y + region.h);
        }
    }
    out
}

fn fully_outside(f: &GrayFrame, b: &BoxF) -> bool {
    b.intersection(&BoxF::new(0.0, 0.0, f.width() as f64, f.height() as f64)).is_none()
}

/// `exp(-|r|^2 / sigma^2)` from a residual, with masked cells removed and
/// the remaining energy rescaled to the full patch.
pub fn likelihood(residual: &[f64], masked: Option<&[bool]>, sigma_obs_sq: f64, floor: f64) -> f64 {
    let (mut e, mut n) = (0.0, 0usize);
    for (i, r) in residual.iter().enumerate() {
        if masked.is_some_and(|m| m[i]) {
            continue;
        }
        e += r * r;
        n += 1;
    }
    if n == 0 {
        return floor;
    }
    let e = e * residual.len() as f64 / n as f64;
    (-e / sigma_obs_sq).exp().max(floor)
}

// ---------------------------------------------------------------------------
// Species

#[derive(Clone, Debug, PartialEq)]
pub struct Species {
    pub id: usize,
    pub swarm: Swarm,
    /// Box size at `s = 1`.
    pub template: (f64, f64),
    pub appearance: Appearance,
    /// Overlap masked out of this species' observations after losing a competition.
    pub mask: Option<BoxF>,
    pub occluded_with: Vec<usize>,
    pub lost_frames: usize,
    pub active: bool,
}

impl Species {
    pub fn box_at(&self, x: &State) -> BoxF {
        BoxF::from_center(x[0], x[1], self.template.0 * x[2], self.template.1 * x[2])
    }

    pub fn gbest_box(&self) -> BoxF {
        self.box_at(&self.swarm.gbest)
    }
}

/// Subspace likelihood of state `x` for a species' appearance.
pub fn observe(f: &GrayFrame, sp: &Species, x: &State, params: &TrackerParams) -> f64 {
    observe_parts(f, &sp.appearance, sp.template, sp.mask.as_ref(), x, params)
}

fn observe_parts(f: &GrayFrame, app: &Appearance, template: (f64, f64), mask: Option<&BoxF>, x: &State, params: &TrackerParams) -> f64 {
    let b = BoxF::from_center(x[0], x[1], template.0 * x[2], template.1 * x[2]);
    if fully_outside(f, &b) {
        return params.floor;
    }
    let r = app.residual(&sample_patch(f, &b));
    let m = mask.map(|region| cells_in(&b, region));
    likelihood(&r, m.as_deref(), params.sigma_obs_sq, params.floor)
}

/// Starts a species on a detection box at scale 1.
pub fn spawn_species(id: usize, f: &GrayFrame, b: &BoxF, params: &TrackerParams, rng: &mut ChaCha8Rng) -> Species {
    let appearance = Appearance::from_patch(sample_patch(f, b));
    let template = (b.w, b.h);
    let (cx, cy) = b.center();
    let swarm = Swarm::init([cx, cy, 1.0], &params.agpso, rng, |x| observe_parts(f, &appearance, template, None, x, params));
    Species {
        id,
        swarm,
        template,
        appearance,
        mask: None,
        occluded_with: Vec::new(),
        lost_frames: 0,
        active: true,
    }
}

// ---------------------------------------------------------------------------
// Competition

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Arena {
    /// Indices into the species list, lower first.
    pub pair: (usize, usize),
    pub overlap: BoxF,
    pub power: [f64; 2],
    pub interactive: [f64; 2],
    pub winner: usize,
}

/// An arena for every pair of active species whose best boxes intersect.
pub fn detect_occlusion(species: &[Species]) -> Vec<Arena> {
    let mut out = Vec::new();
    for i in 0..species.len() {
        for j in i + 1..species.len() {
            if !species[i].active || !species[j].active {
                continue;
            }
            if let Some(overlap) = species[i].gbest_box().intersection(&species[j].gbest_box()) {
                out.push(Arena {
                    pair: (i, j),
                    overlap,
                    power: [1.0, 1.0],
                    interactive: [0.5, 0.5],
                    winner: i,
                });
            }
        }
    }
    out
}

/// Powers normalized to sum 1; all-zero powers share equally.
pub fn interactive_likelihood(powers: &[f64]) -> Vec<f64> {
    let total: f64 = powers.iter().sum();
    if total > 0.0 {
        powers.iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / powers.len() as f64; powers.len()]
    }
}

/// Power of one species over the overlap: its subspace likelihood on the
/// patch cells falling inside the overlap.
pub fn overlap_power(f: &GrayFrame, sp: &Species, overlap: &BoxF, params: &TrackerParams) -> f64 {
    let b = sp.gbest_box();
    let r = sp.appearance.residual(&sample_patch(f, &b));
    let outside: Vec<bool> = cells_in(&b, overlap).into_iter().map(|inside| !inside).collect();
    if outside.iter().all(|&o| o) {
        return 1.0;
    }
    likelihood(&r, Some(&outside), params.sigma_obs_sq, params.floor)
}

/// Fills powers and interactive likelihoods; ties go to the lower index.
pub fn compete(arena: &mut Arena, f: &GrayFrame, species: &[Species], params: &TrackerParams) {
    let (a, b) = arena.pair;
    arena.power = [
        overlap_power(f, &species[a], &arena.overlap, params),
        overlap_power(f, &species[b], &arena.overlap, params),
    ];
    let il = interactive_likelihood(&arena.power);
    arena.interactive = [il[0], il[1]];
    arena.winner = if il[1] > il[0] { b } else { a };
}

/// Repulsion on species `k` from the other member of `arena`:
/// `eta * overlap/area(k) * unit(c_k - c_other)`, no scale component.
pub fn repulsion(arena: &Arena, k: usize, species: &[Species], eta: f64, rng: &mut ChaCha8Rng) -> State {
    let other = if arena.pair.0 == k { arena.pair.1 } else { arena.pair.0 };
    let (bk, bo) = (species[k].gbest_box(), species[other].gbest_box());
    repulsion_force(&bk, &bo, arena.overlap.area(), eta, rng)
}

pub fn repulsion_force(bk: &BoxF, bo: &BoxF, overlap_area: f64, eta: f64, rng: &mut ChaCha8Rng) -> State {
    if overlap_area <= 0.0 || bk.area() <= 0.0 {
        return [0.0; 3];
    }
    let (ck, co) = (bk.center(), bo.center());
    let (dx, dy) = (ck.0 - co.0, ck.1 - co.1);
    let n = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = if n > 0.0 { (dx / n, dy / n) } else { random_direction(rng) };
    let m = eta * overlap_area / bk.area();
    [m * ux, m * uy, 0.0]
}

/// Appends the best patch to the window, replacing occluded cells whose
/// reconstruction error reaches `tau` by their reconstruction; recomputes
/// the subspace every `recompute_every` updates.
pub fn selective_update(sp: &mut Species, f: &GrayFrame, overlaps: &[BoxF], params: &TrackerParams) {
    let b = sp.gbest_box();
    let patch = sample_patch(f, &b);
    let app = &mut sp.appearance;
    let o: Vec<f64> = patch.iter().zip(&app.mean).map(|(p, m)| p - m).collect();
    let proj = app.project(&o);
    let occluded: Vec<bool> = if overlaps.is_empty() {
        vec![false; PATCH_LEN]
    } else {
        let masks: Vec<Vec<bool>> = overlaps.iter().map(|r| cells_in(&b, r)).collect();
        (0..PATCH_LEN).map(|i| masks.iter().any(|m| m[i])).collect()
    };
    let merged: Vec<f64> = (0..PATCH_LEN)
        .map(|i| {
            if !occluded[i] || (o[i] - proj[i]).abs() < params.tau {
                patch[i]
            } else {
                app.mean[i] + proj[i]
            }
        })
        .collect();
    app.push(merged, params.window);
    app.updates += 1;
    if app.updates.is_multiple_of(params.recompute_every) {
        app.recompute(params.basis_size);
    }
}

// ---------------------------------------------------------------------------
// Sequence tracking

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: usize,
    pub id: usize,
    pub cx: f64,
    pub cy: f64,
    pub s: f64,
    pub w: f64,
    pub h: f64,
    pub fit: f64,
}

impl TrackRecord {
    pub fn bbox(&self) -> BoxF {
        BoxF::from_center(self.cx, self.cy, self.w, self.h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackOutput {
    pub records: Vec<TrackRecord>,
    /// `(species id, frame)` of every terminated track.
    pub terminated: Vec<(usize, usize)>,
    /// Frame index at which every species had been lost, if that happened.
    pub all_lost: Option<usize>,
}

fn record(frame: usize, sp: &Species) -> TrackRecord {
    let g = sp.swarm.gbest;
    let b = sp.gbest_box();
    TrackRecord {
        frame,
        id: sp.id,
        cx: g[0],
        cy: g[1],
        s: g[2],
        w: b.w,
        h: b.h,
        fit: sp.swarm.gbest_fit,
    }
}

/// Species set advanced one frame at a time; new species come only from
/// detections handed to [`MultiTracker::spawn`].
#[derive(Clone, Debug)]
pub struct MultiTracker {
    pub params: TrackerParams,
    pub species: Vec<Species>,
    /// `(species id, frame)` of every terminated track.
    pub terminated: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl MultiTracker {
    pub fn new(params: TrackerParams) -> Result<Self> {
        params.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Self {
            params,
            species: Vec::new(),
            terminated: Vec::new(),
            rng,
        })
    }

    pub fn active(&self) -> impl Iterator<Item = &Species> {
        self.species.iter().filter(|s| s.active)
    }

    /// Starts a species on `b` in frame `t`; returns its first record.
    pub fn spawn(&mut self, t: usize, f: &GrayFrame, b: &BoxF) -> TrackRecord {
        let id = self.species.len();
        let sp = spawn_species(id, f, b, &self.params, &mut self.rng);
        let r = record(t, &sp);
        self.species.push(sp);
        r
    }

    /// Restarts species `id` on `b` in frame `t` with a fresh appearance
    /// model, keeping its id; returns its new record.
    pub fn reanchor(&mut self, id: usize, t: usize, f: &GrayFrame, b: &BoxF) -> TrackRecord {
        let sp = spawn_species(id, f, b, &self.params, &mut self.rng);
        let r = record(t, &sp);
        self.species[id] = sp;
        r
    }

    /// Ends species `id` at frame `t`.
    pub fn terminate(&mut self, id: usize, t: usize) {
        let sp = &mut self.species[id];
        if sp.active {
            sp.active = false;
            self.terminated.push((id, t));
        }
    }

    /// Tracks every active species into frame `t`.
    pub fn step(&mut self, t: usize, f: &GrayFrame) -> Vec<TrackRecord> {
        let params = &self.params;
        track_frame(f, &mut self.species, params, &mut self.rng);
        let final_arenas = detect_occlusion(&self.species);
        let mut out = Vec::new();
        for k in 0..self.species.len() {
            if !self.species[k].active {
                continue;
            }
            out.push(record(t, &self.species[k]));
            let overlaps: Vec<BoxF> = final_arenas
                .iter()
                .filter(|a| a.pair.0 == k || a.pair.1 == k)
                .map(|a| a.overlap)
                .collect();
            let sp = &mut self.species[k];
            selective_update(sp, f, &overlaps, params);
            if sp.swarm.gbest_fit < params.lost_fit {
                sp.lost_frames += 1;
                if sp.lost_frames >= params.lost_patience {
                    sp.active = false;
                    self.terminated.push((sp.id, t));
                }
            } else {
                sp.lost_frames = 0;
            }
        }
        out
    }
}

/// Tracks the initial detections (boxes in `frames[0]`) through the sequence.
pub fn track_sequence(frames: &[GrayFrame], initial: &[BoxF], params: &TrackerParams) -> Result<TrackOutput> {
    if initial.is_empty() {
        return Err(Error::invalid("tracking needs at least one initial detection"));
    }
    let Some(first) = frames.first() else {
        return Err(Error::invalid("tracking needs at least one frame"));
    };
    let mut mt = MultiTracker::new(params.clone())?;
    let mut records: Vec<TrackRecord> = initial.iter().map(|b| mt.spawn(0, first, b)).collect();
    let mut all_lost = None;
    for (t, f) in frames.iter().enumerate().skip(1) {
        records.extend(mt.step(t, f));
        if mt.active().next().is_none() {
            all_lost = Some(t);
            break;
        }
    }
    Ok(TrackOutput {
        records,
        terminated: mt.terminated,
        all_lost,
    })
}

/// One frame of tracking: arenas and competition, swarm re-seeding around
/// the previous best, then AGPSO iterations with repulsion for occluded
/// species. Returns the arenas as of the last iteration.
pub fn track_frame(f: &GrayFrame, species: &mut [Species], params: &TrackerParams, rng: &mut ChaCha8Rng) -> Vec<Arena> {
    let mut arenas = detect_occlusion(species);
    for sp in species.iter_mut() {
        sp.mask = None;
        sp.occluded_with.clear();
    }
    for a in arenas.iter_mut() {
        compete(a, f, species, params);
        let loser = if a.winner == a.pair.0 { a.pair.1 } else { a.pair.0 };
        species[loser].mask = Some(a.overlap);
        species[a.pair.0].occluded_with.push(species[a.pair.1].id);
        species[a.pair.1].occluded_with.push(species[a.pair.0].id);
    }
    let forces: Vec<State> = (0..species.len())
        .map(|k| {
            let mut total = [0.0; 3];
            for a in arenas.iter().filter(|a| a.pair.0 == k || a.pair.1 == k) {
                let fk = repulsion(a, k, species, params.eta, rng);
                (0..3).for_each(|d| total[d] += fk[d]);
            }
            total
        })
        .collect();
    for sp in species.iter_mut().filter(|s| s.active) {
        let center = sp.swarm.gbest;
        let (app, template, mask) = (&sp.appearance, sp.template, sp.mask);
        sp.swarm = Swarm::init(center, &params.agpso, rng, |x| observe_parts(f, app, template, mask.as_ref(), x, params));
    }
    let mut stale = vec![0usize; species.len()];
    for n in 1..=params.agpso.iterations {
        for k in 0..species.len() {
            if !species[k].active || stale[k] >= params.agpso.patience {
                continue;
            }
            let force = (forces[k] != [0.0; 3]).then_some(forces[k]);
            let sp = &mut species[k];
            let (app, template, mask) = (&sp.appearance, sp.template, sp.mask);
            let improved = step_particles(&mut sp.swarm, n, &params.agpso, rng, force, |x| {
                observe_parts(f, app, template, mask.as_ref(), x, params)
            });
            stale[k] = if improved { 0 } else { stale[k] + 1 };
        }
        for a in arenas.iter_mut() {
            compete(a, f, species, params);
        }
    }
    arenas
}

// ---------------------------------------------------------------------------
// Output

pub fn tracks_to_jsonl(records: &[TrackRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn tracks_from_jsonl(text: &str) -> Result<Vec<TrackRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Fixed overlay color for a track id.
pub fn id_color(id: usize) -> [f64; 3] {
    const COLORS: [[f64; 3]; 6] = [
        [1.0, 0.1, 0.1],
        [0.1, 1.0, 0.1],
        [0.2, 0.4, 1.0],
        [1.0, 1.0, 0.1],
        [1.0, 0.1, 1.0],
        [0.1, 1.0, 1.0],
    ];
    COLORS[id % COLORS.len()]
}

/// Draws one-pixel box outlines for the given records.
pub fn annotate(frame: &RgbFrame, records: &[&TrackRecord]) -> RgbFrame {
    let mut out = frame.clone();
    let (w, h) = frame.dims();
    for r in records {
        let (x0, y0, x1, y1) = r.bbox().pixel_range(w, h);
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        let c = id_color(r.id);
        for x in x0..x1 {
            out.set(x, y0, c);
            out.set(x, y1 - 1, c);
        }
        for y in y0..y1 {
            out.set(x0, y, c);
            out.set(x1 - 1, y, c);
        }
    }
    out
}

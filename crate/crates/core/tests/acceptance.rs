//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! report is printed whether or not output capture is on.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vtrack::agpso::{annealed_covariance, optimize, AgpsoParams, State, Swarm};
use vtrack::background::{fit_adaptive_threshold, BackgroundParams, DiffHistogram, MotionDetector, DIFF_BINS};
use vtrack::classifier::{gram_matrix, predict, smo, train_svm, train_svm_traced, LabeledSet, SvmParams};
use vtrack::config::PipelineConfig;
use vtrack::frame_io::{
    generate_synthetic, preset_scene, textured_backdrop, to_grayscale, Backdrop, SceneObject, Shape, SyntheticScene, Texture, Trajectory,
};
use vtrack::metrics::mask_f1;
use vtrack::pipeline::run_pipeline;
use vtrack::recognition::{distance_transform, match_parts, meanshift_modes, MeanShiftParams, StarModel, Vote};
use vtrack::shadow::{detect_shadow_edges, poisson_reconstruct, split_shadow, GradientField, ShadowParams, SolverParams};
use vtrack::tracker::{interactive_likelihood, track_sequence, tracks_to_jsonl, TrackerParams};
use vtrack::training::{
    feature_accuracy, image_descriptors, labeled_features, synthetic_dataset, train_codebook, train_recognizer, DatasetParams, TrainParams,
};
use vtrack::vocabulary::{kmeans_run, pmk, HistogramPyramid, KMeansParams};
use vtrack::{BinaryMask, GrayFrame};

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn masked_mean(img: &GrayFrame, m: &BinaryMask) -> f64 {
    let (w, h) = m.dims();
    let (mut acc, mut n) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) {
                acc += img.get(x, y);
                n += 1.0;
            }
        }
    }
    acc / n
}

// 1 -------------------------------------------------------------------------

fn poisson_roundtrip() -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut worst_time = Duration::ZERO;
    for seed in 0..20 {
        let mut r = rng(seed);
        let img = GrayFrame::from_fn(32, 32, |_, _| r.random());
        let start = Instant::now();
        let s = poisson_reconstruct(&GradientField::of(&img), &SolverParams::default()).unwrap();
        worst_time = worst_time.max(start.elapsed());
        let shift = img.mean() - s.mean();
        for (a, b) in img.as_slice().iter().zip(s.as_slice()) {
            worst_err = worst_err.max((a - b - shift).abs());
        }
    }
    (
        worst_err <= 1e-3 && worst_time < Duration::from_secs(1),
        format!("max error {worst_err:.2e}, slowest {worst_time:?}"),
    )
}

// 2 -------------------------------------------------------------------------

fn shadow_removal() -> Outcome {
    let params = ShadowParams::default();
    let mut ratios = Vec::new();
    let mut raws = Vec::new();
    for seed in 0..10 {
        let scene = preset_scene("shadow", 1, seed).unwrap();
        let (frames, truth) = generate_synthetic(&scene, 1).unwrap();
        let masks = detect_shadow_edges(&frames[0], &params).unwrap();
        let split = split_shadow(&frames[0], &masks, &params.solver).unwrap();
        let lit = truth[0].motion.or(&truth[0].shadow).unwrap().not();
        let sh = &truth[0].shadow;
        ratios.push(masked_mean(&split.shadow_free, sh) / masked_mean(&split.shadow_free, &lit));
        let gray = to_grayscale(&frames[0]);
        raws.push(masked_mean(&gray, sh) / masked_mean(&gray, &lit));
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let raw = raws.iter().sum::<f64>() / raws.len() as f64;
    (
        lo >= 0.85 && hi <= 1.15,
        format!("ratio in [{lo:.3}, {hi:.3}] over 10 scenes, raw ratio {raw:.3}"),
    )
}

// 3 -------------------------------------------------------------------------

fn motion_scene(seed: u64, amplitude: f64, moving: bool) -> SyntheticScene {
    let objects = if moving {
        vec![SceneObject {
            shape: Shape::Rect,
            trajectory: Trajectory::Linear {
                start: (20.0, 48.0),
                velocity: (1.5, 0.0),
                size: (24.0, 24.0),
            },
            albedo: [0.9; 3],
            texture: Texture::Flat,
            shadow: None,
        }]
    } else {
        Vec::new()
    };
    SyntheticScene {
        width: 128,
        height: 96,
        background: Backdrop::Image(textured_backdrop(128, 96, 0.45, amplitude, seed)),
        objects,
        noise_sigma: 0.02,
        seed,
    }
}

/// Mean F1 of the fused mask after burn-in, one entry per seed.
fn fused_f1(amplitude: f64, seeds: std::ops::Range<u64>) -> Vec<f64> {
    seeds
        .map(|seed| {
            let (frames, truth) = generate_synthetic(&motion_scene(seed, amplitude, true), 60).unwrap();
            let mut det = MotionDetector::new(BackgroundParams::default());
            let mut f1 = Vec::new();
            for (t, f) in frames.iter().enumerate() {
                let m = det.process(&to_grayscale(f)).unwrap();
                if t >= 20 {
                    f1.push(mask_f1(&m.masks.fused, &truth[t].motion).unwrap());
                }
            }
            f1.iter().sum::<f64>() / f1.len() as f64
        })
        .collect()
}

fn motion_masks() -> Outcome {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gated = fused_f1(0.3, 0..8);
    let low_texture = fused_f1(0.2, 0..8);
    let (mut fired, mut total) = (0usize, 0usize);
    for seed in 0..8 {
        let (frames, _) = generate_synthetic(&motion_scene(seed, 0.3, false), 60).unwrap();
        let mut det = MotionDetector::new(BackgroundParams::default());
        for (t, f) in frames.iter().enumerate() {
            let m = det.process(&to_grayscale(f)).unwrap();
            if t >= 20 {
                fired += m.masks.fused.count();
                total += 128 * 96;
            }
        }
    }
    let rate = fired as f64 / total as f64;
    let worst = gated.iter().copied().fold(1.0, f64::min);
    (
        mean(&gated) >= 0.9 && rate < 0.01,
        format!(
            "fused-mask F1 {:.3} mean over 8 sequences (worst {worst:.3}), static false-fire {:.4}%; lower-texture backdrop F1 {:.3} (not gated)",
            mean(&gated),
            100.0 * rate,
            mean(&low_texture)
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn oracle_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Exhaustive threshold scan written from the fitting definition.
fn oracle_threshold(counts: &[u64]) -> u8 {
    let n: u64 = counts.iter().sum();
    let h: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let at = |d: i64| h[(d + 255) as usize];
    let mut best_t = 0u8;
    let mut best_e = f64::INFINITY;
    for t in 0..=255i64 {
        let mut pb = 0.0;
        let mut m2 = 0.0;
        for d in -t..=t {
            pb += at(d);
            m2 += (d * d) as f64 * at(d);
        }
        let sigma = if pb > 0.0 { (m2 / pb).sqrt() } else { 0.0 }.max(1e-6);
        let mut e = 0.0;
        for d in -255i64..=255 {
            let model = pb * (oracle_cdf((d as f64 + 0.5) / sigma) - oracle_cdf((d as f64 - 0.5) / sigma));
            e += (model - at(d)) * (model - at(d));
        }
        if e < best_e {
            best_e = e;
            best_t = t as u8;
        }
    }
    best_t
}

fn adaptive_threshold() -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 0..50 {
        let mut r = rng(1000 + seed);
        let mut counts = vec![0u64; DIFF_BINS];
        let sigma = r.random_range(1.0..20.0);
        let noise = r.random_range(2000..12000);
        for _ in 0..noise {
            let d: f64 = rand_distr::Distribution::sample(&rand_distr::Normal::new(0.0, sigma).unwrap(), &mut r);
            counts[(d.round().clamp(-255.0, 255.0) as i64 + 255) as usize] += 1;
        }
        for _ in 0..r.random_range(0..3000) {
            counts[r.random_range(0..DIFF_BINS)] += 1;
        }
        let got = fit_adaptive_threshold(&DiffHistogram::from_counts(counts.clone()).unwrap()).unwrap().threshold;
        let want = oracle_threshold(&counts);
        if got != want {
            mismatches.push((seed, got, want));
        }
    }
    (mismatches.is_empty(), format!("{}/50 exact matches {mismatches:?}", 50 - mismatches.len()))
}

// 5 -------------------------------------------------------------------------

fn partition_sse(points: &[Vec<f64>], side: &[bool]) -> f64 {
    let mut total = 0.0;
    for group in [false, true] {
        let members: Vec<&Vec<f64>> = points.iter().zip(side).filter(|(_, s)| **s == group).map(|(p, _)| p).collect();
        let dim = points[0].len();
        let mean: Vec<f64> = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        total += members.iter().map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum::<f64>();
    }
    total
}

fn kmeans_brute_force() -> Outcome {
    let mut optimal = 0;
    let mut monotone = true;
    for seed in 0..20 {
        let mut r = rng(2000 + seed);
        let points: Vec<Vec<f64>> = (0..6).map(|_| vec![r.random(), r.random()]).collect();
        let mut best = f64::INFINITY;
        // point 0 fixed on one side; every other assignment with both sides non-empty
        for bits in 0u32..32 {
            let side: Vec<bool> = std::iter::once(false).chain((0..5).map(|i| bits >> i & 1 == 1)).collect();
            if side.iter().any(|s| *s) {
                best = best.min(partition_sse(&points, &side));
            }
        }
        let run = kmeans_run(&points, 2, seed, &KMeansParams::default()).unwrap();
        if (run.sse - best).abs() <= 1e-12 * best.max(1.0) {
            optimal += 1;
        }
        monotone &= run.histories.iter().all(|h| h.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
    (
        optimal == 20 && monotone,
        format!("{optimal}/20 optimal partitions, SSE non-increasing on every run: {monotone}"),
    )
}

// 6 -------------------------------------------------------------------------

/// Box, equality and KKT conditions of one binary solution.
fn kkt_violation(gram: &[Vec<f64>], ys: &[f64], alphas: &[f64], b: f64, c: f64) -> f64 {
    let n = ys.len();
    let mut worst: f64 = alphas.iter().zip(ys).map(|(a, y)| a * y).sum::<f64>().abs();
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alphas[j] * ys[j] * gram[i][j]).sum::<f64>() + b;
        let margin = ys[i] * f;
        let a = alphas[i];
        worst = worst.max((-a).max(a - c).max(0.0));
        let v = if a <= 1e-12 {
            1.0 - margin
        } else if a >= c - 1e-12 {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn svm_checks() -> Outcome {
    let mut min_eig = f64::INFINITY;
    for seed in 0..30 {
        let mut r = rng(3000 + seed);
        let n = r.random_range(5..25);
        let dim = r.random_range(1..8);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let g = gram_matrix(&xs, 1.0, 3);
        let m = DMatrix::from_fn(n, n, |i, j| g[i][j]);
        min_eig = min_eig.min(m.symmetric_eigenvalues().min());
    }

    let xor = LabeledSet::new(
        vec![
            (vec![-1.0, -1.0], 0),
            (vec![1.0, 1.0], 0),
            (vec![-1.0, 1.0], 1),
            (vec![1.0, -1.0], 1),
        ],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let params = SvmParams {
        c_box: 10.0,
        ..SvmParams::default()
    };
    let (model, traces) = train_svm_traced(&xor, &params).unwrap();
    let xor_acc = xor.samples.iter().filter(|(x, y)| predict(&model, x).label == *y).count() as f64 / 4.0;

    // KKT and dual ascent on the XOR run and on random two-class sets
    let mut worst_kkt: f64 = 0.0;
    let mut dual_ok = traces.iter().all(|t| t.dual.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let xs: Vec<Vec<f64>> = xor.samples.iter().map(|s| s.0.clone()).collect();
    let ys: Vec<f64> = xor.samples.iter().map(|s| if s.1 == 0 { 1.0 } else { -1.0 }).collect();
    let mut runs = vec![(xs, ys, params.clone())];
    for seed in 0..30 {
        let mut r = rng(3100 + seed);
        let n = r.random_range(6..30);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let mut ys: Vec<f64> = xs.iter().map(|x| if x[0] * x[1] + 0.2 * r.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 }).collect();
        ys[0] = 1.0;
        ys[1] = -1.0;
        let p = SvmParams {
            c_box: r.random_range(0.5..20.0),
            seed,
            ..SvmParams::default()
        };
        runs.push((xs, ys, p));
    }
    for (xs, ys, p) in &runs {
        let g = gram_matrix(xs, p.offset, p.degree);
        let (alphas, b, trace) = smo(&g, ys, p).unwrap();
        worst_kkt = worst_kkt.max(kkt_violation(&g, ys, &alphas, b, p.c_box));
        dual_ok &= trace.dual.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    }
    // SMO stops once no sample violates KKT by more than tol
    let kkt_ok = worst_kkt <= 10.0 * params.tol;
    (
        min_eig >= -1e-8 && xor_acc == 1.0 && kkt_ok && dual_ok,
        format!(
            "min Gram eigenvalue {min_eig:.2e}, XOR accuracy {xor_acc}, worst KKT violation {worst_kkt:.1e} over {} runs, dual ascent {dual_ok}",
            runs.len()
        ),
    )
}

// 7 -------------------------------------------------------------------------

/// Pyramid match over explicit dense bins of a `[0, 16)^2` domain.
fn oracle_pmk(y: &[Vec<f64>], z: &[Vec<f64>], levels: usize) -> f64 {
    let mut k = 0.0;
    let mut prev = 0u64;
    for i in 0..levels {
        let side = (1u64 << i) as f64;
        let n = (16.0 / side).ceil() as usize;
        let fill = |pts: &[Vec<f64>]| {
            let mut grid = vec![0u64; n * n];
            for p in pts {
                let bx = (p[0] / side).floor() as usize;
                let by = (p[1] / side).floor() as usize;
                grid[by * n + bx] += 1;
            }
            grid
        };
        let (gy, gz) = (fill(y), fill(z));
        let inter: u64 = gy.iter().zip(&gz).map(|(a, b)| *a.min(b)).sum();
        k += (inter - prev) as f64 / (1u64 << i) as f64;
        prev = inter;
    }
    k
}

fn pmk_oracle() -> Outcome {
    let levels = 5;
    let (mut matches, mut symmetric, mut nonneg) = (0, true, true);
    for seed in 0..100 {
        let mut r = rng(4000 + seed);
        let set = |r: &mut ChaCha8Rng| -> Vec<Vec<f64>> { (0..r.random_range(1..12)).map(|_| vec![r.random_range(0.0..16.0), r.random_range(0.0..16.0)]).collect() };
        let y = set(&mut r);
        let z = set(&mut r);
        let py = HistogramPyramid::new(&y, 2, 1.0, levels).unwrap();
        let pz = HistogramPyramid::new(&z, 2, 1.0, levels).unwrap();
        let k = pmk(&py, &pz).unwrap();
        matches += (k == oracle_pmk(&y, &z, levels)) as usize;
        symmetric &= k == pmk(&pz, &py).unwrap();
        nonneg &= k >= 0.0;
    }
    (
        matches == 100 && symmetric && nonneg,
        format!("{matches}/100 equal to the explicit-bin oracle, symmetric {symmetric}, non-negative {nonneg}"),
    )
}

// 8 -------------------------------------------------------------------------

fn random_grid(r: &mut ChaCha8Rng, w: usize, h: usize) -> GrayFrame {
    GrayFrame::from_fn(w, h, |_, _| r.random_range(0.0..4.0))
}

fn pictorial_structures() -> Outcome {
    let mut parts_ok = 0;
    for seed in 0..50 {
        let mut r = rng(5000 + seed);
        let (w, h) = (r.random_range(1..=16usize), r.random_range(1..=16usize));
        let children = r.random_range(0..=2usize);
        let model = StarModel {
            offsets: (0..children).map(|_| (r.random_range(-4..=4), r.random_range(-4..=4))).collect(),
            variances: (0..children).map(|_| (r.random_range(0.3..6.0), r.random_range(0.3..6.0))).collect(),
        };
        let maps: Vec<GrayFrame> = (0..=children).map(|_| random_grid(&mut r, w, h)).collect();
        let got = match_parts(&model, &maps).unwrap();
        // exhaustive: every root location, every child location
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        for ry in 0..h {
            for rx in 0..w {
                let mut e = maps[0].get(rx, ry);
                let mut locs = vec![(rx, ry)];
                for c in 0..children {
                    let (wx, wy) = (1.0 / model.variances[c].0, 1.0 / model.variances[c].1);
                    let (px, py) = (rx as i64 + model.offsets[c].0, ry as i64 + model.offsets[c].1);
                    let mut child = (f64::INFINITY, (0, 0));
                    for qy in 0..h {
                        for qx in 0..w {
                            let (dx, dy) = ((px - qx as i64) as f64, (py - qy as i64) as f64);
                            let v = maps[c + 1].get(qx, qy) + wx * dx * dx + wy * dy * dy;
                            if v < child.0 {
                                child = (v, (qx, qy));
                            }
                        }
                    }
                    e += child.0;
                    locs.push(child.1);
                }
                if best.as_ref().is_none_or(|b| e < b.0) {
                    best = Some((e, locs));
                }
            }
        }
        let (energy, locs) = best.unwrap();
        parts_ok += (got.energy == energy && got.locations == locs) as usize;
    }

    let mut dt_ok = 0;
    for seed in 0..50 {
        let mut r = rng(5100 + seed);
        let (w, h) = (r.random_range(1..=32usize), r.random_range(1..=32usize));
        let cost = random_grid(&mut r, w, h);
        let (wx, wy) = (r.random_range(0.05..3.0), r.random_range(0.05..3.0));
        let dt = distance_transform(&cost, wx, wy, (0, 0), w, h).unwrap();
        let mut same = true;
        for py in 0..h {
            for px in 0..w {
                let mut m = f64::INFINITY;
                for qy in 0..h {
                    for qx in 0..w {
                        let (dx, dy) = (px as f64 - qx as f64, py as f64 - qy as f64);
                        m = m.min(cost.get(qx, qy) + wx * dx * dx + wy * dy * dy);
                    }
                }
                same &= dt.values[py * w + px] == m;
            }
        }
        dt_ok += same as usize;
    }
    (
        parts_ok == 50 && dt_ok == 50,
        format!("match_parts {parts_ok}/50 exact, distance transform {dt_ok}/50 exact"),
    )
}

// 9 -------------------------------------------------------------------------

fn cluster(r: &mut ChaCha8Rng, c: (f64, f64, f64), n: usize, spread: f64) -> Vec<Vote> {
    let normal = rand_distr::Normal::new(0.0, spread).unwrap();
    (0..n)
        .map(|_| Vote {
            x: c.0 + rand_distr::Distribution::sample(&normal, r),
            y: c.1 + rand_distr::Distribution::sample(&normal, r),
            s: c.2 + rand_distr::Distribution::sample(&normal, r) * 0.2,
            weight: r.random_range(0.5..1.0),
        })
        .collect()
}

fn weighted_center(v: &[Vote]) -> (f64, f64) {
    let w: f64 = v.iter().map(|v| v.weight).sum();
    (v.iter().map(|v| v.weight * v.x).sum::<f64>() / w, v.iter().map(|v| v.weight * v.y).sum::<f64>() / w)
}

fn meanshift_recovery() -> Outcome {
    let params = MeanShiftParams::default();
    let s = 30.0;
    let b = params.b0 * s;
    let near = |m: &vtrack::recognition::Mode, c: (f64, f64)| ((m.x - c.0).powi(2) + (m.y - c.1).powi(2)).sqrt();

    let mut r = rng(6000);
    let votes = cluster(&mut r, (50.0, 40.0, s), 200, 1.0);
    let modes = meanshift_modes(&votes, &params);
    let single_err = near(&modes[0], (50.0, 40.0));

    let mut two = 0;
    for seed in 0..20 {
        let mut r = rng(6100 + seed);
        let a = (r.random_range(30.0..50.0), r.random_range(30.0..60.0), s);
        let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let c = (a.0 + 10.0 * b * angle.cos(), a.1 + 10.0 * b * angle.sin(), s);
        let va = cluster(&mut r, a, 150, 1.0);
        let vb = cluster(&mut r, c, 150, 1.0);
        let (ca, cb) = (weighted_center(&va), weighted_center(&vb));
        let votes: Vec<Vote> = va.into_iter().chain(vb).collect();
        let modes = meanshift_modes(&votes, &params);
        let found = |c: (f64, f64)| modes.iter().take(2).any(|m| near(m, c) <= 1.0);
        two += (modes.len() >= 2 && found(ca) && found(cb)) as usize;
    }
    (
        single_err <= 1.0 && two == 20,
        format!("single cluster error {single_err:.3} px, two clusters recovered {two}/20"),
    )
}

// 10 ------------------------------------------------------------------------

/// Bump optimization from a displaced start; returns (hits within 0.5 px,
/// most iterations used).
fn bump_hits(params: &AgpsoParams) -> (usize, usize) {
    let mut hits = 0;
    let mut worst_iters = 0;
    for seed in 0..100 {
        let mut r = rng(7000 + seed);
        let peak = (50.0 + r.random_range(-8.0..8.0), 40.0 + r.random_range(-8.0..8.0));
        let width = 6.0;
        let fitness = |x: &State| (-((x[0] - peak.0).powi(2) + (x[1] - peak.1).powi(2)) / (2.0 * width * width)).exp();
        let mut swarm = Swarm::init([50.0, 40.0, 1.0], params, &mut r, fitness);
        let iters = optimize(&mut swarm, params, &mut r, fitness);
        worst_iters = worst_iters.max(iters);
        let err = ((swarm.gbest[0] - peak.0).powi(2) + (swarm.gbest[1] - peak.1).powi(2)).sqrt();
        hits += (err <= 0.5) as usize;
    }
    (hits, worst_iters)
}

fn agpso_bump() -> Outcome {
    let base = AgpsoParams {
        freeze_scale: true,
        ..AgpsoParams::default()
    };
    // the full 20-iteration budget; the tracker's per-frame early stop is reported alongside
    let budget = AgpsoParams {
        patience: base.iterations,
        ..base.clone()
    };
    let (hits, worst_iters) = bump_hits(&budget);
    let (early_hits, _) = bump_hits(&base);
    let mut decay_err: f64 = 0.0;
    for c in [0.05, 0.3, 1.0] {
        for n in 0..30 {
            let (a, b) = (annealed_covariance([8.0, 8.0, 0.05], c, n), annealed_covariance([8.0, 8.0, 0.05], c, n + 1));
            for d in 0..3 {
                decay_err = decay_err.max((b[d] / a[d] / (-c).exp() - 1.0).abs());
            }
        }
    }
    (
        hits >= 95 && worst_iters <= 20 && decay_err < 1e-12,
        format!(
            "peak within 0.5 px for {hits}/100 seeds in {worst_iters} iterations ({early_hits}/100 with the 3-iteration early stop), decay relative error {decay_err:.1e}"
        ),
    )
}

// 11 ------------------------------------------------------------------------

fn competition() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(8000);
    for _ in 0..1000 {
        let n = r.random_range(1..6);
        let p: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0) * 10f64.powi(r.random_range(-12..3))).collect();
        let q = interactive_likelihood(&p);
        let total: f64 = p.iter().sum();
        worst = worst.max((q.iter().sum::<f64>() - 1.0).abs());
        for (a, b) in p.iter().zip(&q) {
            worst = worst.max((a / total - b).abs());
        }
    }
    let mut kept = 0;
    for seed in 0..20u64 {
        let scene = preset_scene("cross2", 60, seed).unwrap();
        let (frames, truth) = generate_synthetic(&scene, 60).unwrap();
        let gray: Vec<GrayFrame> = frames.iter().map(to_grayscale).collect();
        let init: Vec<_> = truth[0].boxes.iter().map(|b| b.1).collect();
        let params = TrackerParams {
            seed,
            ..TrackerParams::default()
        };
        let out = track_sequence(&gray, &init, &params).unwrap();
        let last: Vec<_> = out.records.iter().filter(|r| r.frame == 59).collect();
        kept += (last.len() == 2 && last.iter().all(|r| r.bbox().iou(&truth[59].boxes[r.id].1) > 0.5)) as usize;
    }
    (
        worst <= 1e-15 && kept >= 16,
        format!("normalization error {worst:.1e}, identities kept through the crossing in {kept}/20 seeds"),
    )
}

// 12 ------------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let cfg = PipelineConfig::default();
    let scene = preset_scene("cross2", 100, 7).unwrap();
    let (frames, truth) = generate_synthetic(&scene, 100).unwrap();
    let run = || {
        let start = Instant::now();
        let images = synthetic_dataset(&cfg.dataset, cfg.seed).unwrap();
        let rec = train_recognizer(&images, &cfg.train_params()).unwrap();
        let out = run_pipeline(&frames, &rec, &cfg, Some(&truth)).unwrap();
        (out, start.elapsed())
    };
    let (a, elapsed) = run();
    let (b, _) = run();
    let deterministic = tracks_to_jsonl(&a.tracks).unwrap() == tracks_to_jsonl(&b.tracks).unwrap() && a.detections.len() == b.detections.len();
    let m = a.metrics.unwrap().tracking.unwrap();
    (
        m.success_rate >= 0.7 && m.fp_per_frame <= 0.2 && deterministic && elapsed < Duration::from_secs(300),
        format!(
            "success {:.3}, FP/frame {:.3}, identity switches {}, deterministic {deterministic}, wall time {:.1?}",
            m.success_rate, m.fp_per_frame, m.identity_switches, elapsed
        ),
    )
}

// 13 ------------------------------------------------------------------------

fn vocabulary_sweep() -> Outcome {
    let sizes = [20usize, 50, 100, 200];
    let mut acc: HashMap<usize, Vec<f64>> = HashMap::new();
    let data = DatasetParams {
        backgrounds: 0,
        ..DatasetParams::default()
    };
    for seed in 0..5u64 {
        let train = synthetic_dataset(&data, 100 + seed).unwrap();
        let test = synthetic_dataset(&data, 900 + seed).unwrap();
        let base = TrainParams {
            seed,
            ..TrainParams::default()
        };
        let train_d = image_descriptors(&train, &base.recognition).unwrap();
        let test_d = image_descriptors(&test, &base.recognition).unwrap();
        for &k in &sizes {
            let p = TrainParams { k, ..base.clone() };
            let cb = train_codebook(&train_d, &p).unwrap();
            let svm = train_svm(&labeled_features(&train, &train_d, &cb, &p.recognition, false).unwrap(), &p.svm).unwrap();
            let held_out = labeled_features(&test, &test_d, &cb, &p.recognition, false).unwrap();
            acc.entry(k).or_default().push(feature_accuracy(&svm, &held_out));
        }
    }
    let means: Vec<f64> = sizes.iter().map(|k| acc[k].iter().sum::<f64>() / acc[k].len() as f64).collect();
    let ok = means.windows(2).all(|w| w[1] >= w[0] - 0.03);
    let table: Vec<String> = sizes.iter().zip(&means).map(|(k, a)| format!("K={k}: {a:.3}")).collect();
    (ok, format!("held-out accuracy {}", table.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("poisson roundtrip", poisson_roundtrip),
        ("shadow removal", shadow_removal),
        ("motion masks", motion_masks),
        ("adaptive threshold", adaptive_threshold),
        ("k-means optimum", kmeans_brute_force),
        ("cubic svm", svm_checks),
        ("pyramid match", pmk_oracle),
        ("pictorial structures", pictorial_structures),
        ("voting and mean-shift", meanshift_recovery),
        ("agpso", agpso_bump),
        ("competition", competition),
        ("end to end", end_to_end),
        ("vocabulary sweep", vocabulary_sweep),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let results: Vec<Option<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(name, f)| {
                let run = filter.is_empty() || filter.iter().any(|p| name.contains(p.as_str()));
                run.then(|| s.spawn(*f))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.map(|h| h.join().unwrap_or_else(|_| (false, "panicked".into()))))
            .collect()
    });
    let mut failed = 0;
    for (i, ((name, _), r)) in criteria.iter().zip(results).enumerate() {
        if let Some((ok, detail)) = r {
            failed += !ok as usize;
            println!("criterion {:>2} {:<22} {}  {detail}", i + 1, name, if ok { "PASS" } else { "FAIL" });
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! Synthetic training sets and recognizer training, plus the on-disk model
//! directory.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict, train_svm, LabeledSet, SvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::frame_io::{generate_synthetic, palette, to_grayscale, write_atomic, Backdrop, SceneObject, SyntheticScene, Trajectory};
use crate::image::{BoxF, GrayFrame};
use crate::recognition::{
    descriptors_in, learn_occurrences, learn_part_model, parts_from_text, parts_to_text, OccurrenceTable, PartModel, RecognitionParams, Recognizer,
    TrainingObject, BACKGROUND,
};
use crate::vocabulary::{bow_histogram, document_frequency, extract_multiscale, idf_weights, kmeans_run, Codebook, Descriptor, KMeansParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetParams {
    /// Object images per class.
    pub per_class: usize,
    /// Object-free images.
    pub backgrounds: usize,
    pub width: usize,
    pub height: usize,
    pub noise_sigma: f64,
    /// Relative size jitter of objects around their nominal size.
    pub size_jitter: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            per_class: 20,
            backgrounds: 20,
            width: 48,
            height: 48,
            noise_sigma: 0.02,
            size_jitter: 0.15,
        }
    }
}

/// Nominal `(w, h)` of each palette class.
pub const CLASS_SIZES: [(f64, f64); 3] = [(20.0, 26.0), (20.0, 28.0), (18.0, 18.0)];

#[derive(Clone, Debug)]
pub struct TrainingImage {
    pub frame: GrayFrame,
    /// `None` for background images.
    pub class: Option<usize>,
    pub bbox: BoxF,
}

pub fn class_names() -> Vec<String> {
    palette::classes().iter().map(|c| c.0.to_string()).collect()
}

/// One rendered object per image at a random position and size, plus
/// object-free images whose box is a random window of nominal size.
pub fn synthetic_dataset(params: &DatasetParams, seed: u64) -> Result<Vec<TrainingImage>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = palette::classes();
    let (w, h) = (params.width as f64, params.height as f64);
    let mut out = Vec::new();
    let render = |objects: Vec<SceneObject>, rng: &mut ChaCha8Rng| -> Result<GrayFrame> {
        let scene = SyntheticScene {
            width: params.width,
            height: params.height,
            background: Backdrop::Flat(palette::BACKGROUND),
            objects,
            noise_sigma: params.noise_sigma,
            seed: rng.random(),
        };
        let (frames, _) = generate_synthetic(&scene, 1)?;
        Ok(to_grayscale(&frames[0]))
    };
    for (class, &(_, shape, albedo, texture)) in classes.iter().enumerate() {
        for _ in 0..params.per_class {
            let k = 1.0 + rng.random_range(-params.size_jitter..=params.size_jitter);
            let (bw, bh) = (CLASS_SIZES[class].0 * k, CLASS_SIZES[class].1 * k);
            if bw + 2.0 > w || bh + 2.0 > h {
                return Err(Error::invalid("training images too small for the object sizes"));
            }
            let cx = rng.random_range(bw / 2.0 + 1.0..w - bw / 2.0 - 1.0);
            let cy = rng.random_range(bh / 2.0 + 1.0..h - bh / 2.0 - 1.0);
            let obj = SceneObject {
                shape,
                trajectory: Trajectory::Linear {
                    start: (cx, cy),
                    velocity: (0.0, 0.0),
                    size: (bw, bh),
                },
                albedo,
                texture,
                shadow: None,
            };
            out.push(TrainingImage {
                frame: render(vec![obj], &mut rng)?,
                class: Some(class),
                bbox: BoxF::from_center(cx, cy, bw, bh),
            });
        }
    }
    for i in 0..params.backgrounds {
        let (bw, bh) = CLASS_SIZES[i % CLASS_SIZES.len()];
        let cx = rng.random_range(bw / 2.0..w - bw / 2.0);
        let cy = rng.random_range(bh / 2.0..h - bh / 2.0);
        out.push(TrainingImage {
            frame: render(Vec::new(), &mut rng)?,
            class: None,
            bbox: BoxF::from_center(cx, cy, bw, bh),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    /// Vocabulary size.
    pub k: usize,
    pub kmeans: KMeansParams,
    /// Cap on descriptors clustered; a seeded subsample is drawn beyond it.
    pub max_descriptors: usize,
    pub use_idf: bool,
    pub svm: SvmParams,
    pub recognition: RecognitionParams,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            k: 200,
            kmeans: KMeansParams {
                max_iter: 50,
                n_init: 2,
                ..KMeansParams::default()
            },
            max_descriptors: 6000,
            use_idf: true,
            svm: SvmParams {
                c_box: 100.0,
                ..SvmParams::default()
            },
            recognition: RecognitionParams::default(),
            seed: 0,
        }
    }
}

/// Descriptors of every image under the recognition descriptor settings.
pub fn image_descriptors(images: &[TrainingImage], params: &RecognitionParams) -> Result<Vec<Vec<Descriptor>>> {
    images.iter().map(|im| extract_multiscale(&im.frame, &params.descriptors)).collect()
}

/// k-means over a seeded subsample of the non-flat descriptors, with idf
/// weights from per-image document frequencies.
pub fn train_codebook(descs: &[Vec<Descriptor>], params: &TrainParams) -> Result<Codebook> {
    let mut pool: Vec<Vec<f64>> = descs.iter().flatten().filter(|d| !d.is_flat()).map(|d| d.vector.clone()).collect();
    if pool.len() > params.max_descriptors {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0xc0de);
        for i in 0..params.max_descriptors {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(params.max_descriptors);
    }
    let run = kmeans_run(&pool, params.k, params.seed, &params.kmeans)?;
    let cb = Codebook::new(run.centroids, params.seed)?;
    if params.use_idf {
        let df = document_frequency(descs, &cb, &params.recognition.quantize);
        let idf = idf_weights(&df, descs.len());
        cb.with_idf(idf)
    } else {
        Ok(cb)
    }
}

/// BoW feature of the descriptors inside `b`.
pub fn box_feature(descs: &[Descriptor], b: &BoxF, cb: &Codebook, params: &RecognitionParams) -> Vec<f64> {
    bow_histogram(&descriptors_in(descs, b), cb, cb.idf.as_deref(), &params.quantize).weights
}

/// Labelled BoW features; background images map to the extra last class.
pub fn labeled_features(images: &[TrainingImage], descs: &[Vec<Descriptor>], cb: &Codebook, params: &RecognitionParams, with_background: bool) -> Result<LabeledSet> {
    let mut classes = class_names();
    let n = classes.len();
    if with_background {
        classes.push(BACKGROUND.to_string());
    }
    let samples = images
        .iter()
        .zip(descs)
        .filter_map(|(im, d)| {
            let label = match im.class {
                Some(c) => c,
                None if with_background => n,
                None => return None,
            };
            Some((box_feature(d, &im.bbox, cb, params), label))
        })
        .collect();
    LabeledSet::new(samples, classes)
}

/// Mean width/height ratio per class.
pub fn class_aspects(images: &[TrainingImage], n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|c| {
            let r: Vec<f64> = images.iter().filter(|im| im.class == Some(c)).map(|im| im.bbox.w / im.bbox.h).collect();
            if r.is_empty() {
                1.0
            } else {
                r.iter().sum::<f64>() / r.len() as f64
            }
        })
        .collect()
}

/// Codebook, occurrence table, verifier SVM (with a background class) and
/// part models from one training set.
pub fn train_recognizer(images: &[TrainingImage], params: &TrainParams) -> Result<Recognizer> {
    let descs = image_descriptors(images, &params.recognition)?;
    let codebook = train_codebook(&descs, params)?;
    train_with_codebook(images, &descs, codebook, params)
}

/// Occurrence table, verifier SVM and part models over a fixed codebook;
/// `descs` are the descriptors of `images`.
pub fn train_with_codebook(images: &[TrainingImage], descs: &[Vec<Descriptor>], codebook: Codebook, params: &TrainParams) -> Result<Recognizer> {
    let rp = &params.recognition;
    let classes = class_names();
    let aspect = class_aspects(images, classes.len());
    let objects: Vec<TrainingObject> = images
        .iter()
        .zip(descs)
        .filter_map(|(im, d)| {
            im.class.map(|class| TrainingObject {
                descriptors: descriptors_in(d, &im.bbox),
                class,
                center: im.bbox.center(),
                scale: im.bbox.area().sqrt(),
            })
        })
        .collect();
    let table = learn_occurrences(&objects, &classes, &aspect, &codebook, &rp.quantize)?;
    let svm = train_svm(&labeled_features(images, descs, &codebook, rp, true)?, &params.svm)?;
    let examples: Vec<(Vec<Descriptor>, usize, BoxF)> = images
        .iter()
        .zip(descs)
        .filter_map(|(im, d)| im.class.map(|c| (d.clone(), c, im.bbox)))
        .collect();
    let parts = (0..classes.len())
        .filter(|c| examples.iter().any(|e| e.1 == *c))
        .map(|c| learn_part_model(&examples, c, &classes, &aspect, &codebook, &rp.quantize))
        .collect::<Result<Vec<PartModel>>>()?;
    Ok(Recognizer {
        codebook,
        table,
        svm,
        parts,
        params: rp.clone(),
    })
}

/// Fraction of images whose box feature the SVM labels correctly.
pub fn feature_accuracy(svm: &SvmModel, data: &LabeledSet) -> f64 {
    if data.samples.is_empty() {
        return 0.0;
    }
    let ok = data.samples.iter().filter(|(x, y)| predict(svm, x).label == *y).count();
    ok as f64 / data.samples.len() as f64
}

// ---------------------------------------------------------------------------
// Model directory

pub const CODEBOOK_FILE: &str = "codebook.txt";
pub const SVM_FILE: &str = "svm.txt";
pub const OCCURRENCE_FILE: &str = "occurrences.txt";
pub const PARTS_FILE: &str = "parts.txt";

fn read_model_file(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

pub fn load_codebook(dir: &Path) -> Result<Codebook> {
    Codebook::from_text(&read_model_file(dir, CODEBOOK_FILE)?)
}

pub fn load_svm(dir: &Path) -> Result<SvmModel> {
    SvmModel::from_text(&read_model_file(dir, SVM_FILE)?)
}

pub fn save_recognizer(dir: &Path, rec: &Recognizer) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(CODEBOOK_FILE), rec.codebook.to_text().as_bytes())?;
    write_atomic(&dir.join(SVM_FILE), rec.svm.to_text().as_bytes())?;
    write_atomic(&dir.join(OCCURRENCE_FILE), rec.table.to_text().as_bytes())?;
    write_atomic(&dir.join(PARTS_FILE), parts_to_text(&rec.parts).as_bytes())?;
    Ok(())
}

pub fn load_recognizer(dir: &Path, params: &RecognitionParams) -> Result<Recognizer> {
    Ok(Recognizer {
        codebook: load_codebook(dir)?,
        svm: load_svm(dir)?,
        table: OccurrenceTable::from_text(&read_model_file(dir, OCCURRENCE_FILE)?)?,
        parts: parts_from_text(&read_model_file(dir, PARTS_FILE)?)?,
        params: params.clone(),
    })
}

//! JSON pipeline configuration: one section per module, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::background::BackgroundParams;
use crate::classifier::SvmParams;
use crate::error::{Error, Result};
use crate::recognition::RecognitionParams;
use crate::shadow::ShadowParams;
use crate::tracker::TrackerParams;
use crate::training::{DatasetParams, TrainParams};
use crate::vocabulary::KMeansParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory holding codebook, SVM, occurrence and part files.
    pub models: PathBuf,
    /// Frame file pattern inside input directories.
    pub pattern: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            models: PathBuf::from("models"),
            pattern: "frame_%04d.ppm".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabularySection {
    pub k: usize,
    pub kmeans: KMeansParams,
    pub max_descriptors: usize,
    pub use_idf: bool,
}

impl Default for VocabularySection {
    fn default() -> Self {
        let t = TrainParams::default();
        Self {
            k: t.k,
            kmeans: t.kmeans,
            max_descriptors: t.max_descriptors,
            use_idf: t.use_idf,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub c_box: f64,
    pub offset: f64,
    pub degree: u32,
    pub tol: f64,
    pub max_passes: usize,
    /// Folds used by `train-svm` for its cross-validation report.
    pub folds: usize,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let s = TrainParams::default().svm;
        Self {
            c_box: s.c_box,
            offset: s.offset,
            degree: s.degree,
            tol: s.tol,
            max_passes: s.max_passes,
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    /// Recognition runs on every `detect_every`-th frame to start and
    /// correct tracks.
    pub detect_every: usize,
    /// Detections and tracks match above this IoU; a detection starts a
    /// track only if its IoU with every active track box is at most this.
    pub spawn_iou: f64,
    /// Restart a drifted track on an unmatched detection of its label
    /// instead of starting a new one.
    pub reanchor: bool,
    /// End a track after this many detection rounds without a match; 0 keeps
    /// tracks until the tracker loses them.
    pub drop_after: usize,
    /// Run shadow removal on every frame before blob extraction.
    pub remove_shadows: bool,
    pub min_blob_area: usize,
    /// Write annotated PPM frames next to the track file.
    pub annotate: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            detect_every: 10,
            spawn_iou: 0.2,
            reanchor: true,
            drop_after: 3,
            remove_shadows: false,
            min_blob_area: 25,
            annotate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Seeds every stochastic component.
    pub seed: u64,
    pub paths: Paths,
    pub background: BackgroundParams,
    pub shadow: ShadowParams,
    pub dataset: DatasetParams,
    pub vocabulary: VocabularySection,
    pub classifier: ClassifierSection,
    pub recognition: RecognitionParams,
    pub tracker: TrackerParams,
    pub pipeline: PipelineSection,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate()?;
        self.shadow.validate()?;
        self.svm().validate()?;
        self.tracker.validate()?;
        if self.vocabulary.k == 0 || self.vocabulary.kmeans.max_iter == 0 || self.vocabulary.kmeans.n_init == 0 {
            return Err(Error::invalid("vocabulary.k, kmeans.max_iter and kmeans.n_init must be positive"));
        }
        if self.classifier.folds < 2 {
            return Err(Error::invalid("classifier.folds must be at least 2"));
        }
        let r = &self.recognition;
        if r.descriptors.stride == 0 || r.descriptors.patch == 0 || r.descriptors.levels == 0 {
            return Err(Error::invalid("recognition.descriptors fields must be positive"));
        }
        if r.quantize.m == 0 || !(r.quantize.sigma > 0.0) || !(r.meanshift.b0 > 0.0) {
            return Err(Error::invalid("recognition needs quantize.m > 0, quantize.sigma > 0, meanshift.b0 > 0"));
        }
        if !(0.0..=1.0).contains(&r.score_fraction) || !(0.0..=1.0).contains(&r.nms_iou) {
            return Err(Error::invalid("recognition.score_fraction and nms_iou must lie in [0, 1]"));
        }
        if self.pipeline.detect_every == 0 || !(0.0..=1.0).contains(&self.pipeline.spawn_iou) {
            return Err(Error::invalid("pipeline.detect_every must be positive and spawn_iou in [0, 1]"));
        }
        if self.dataset.per_class == 0 {
            return Err(Error::invalid("dataset.per_class must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn svm(&self) -> SvmParams {
        let c = &self.classifier;
        SvmParams {
            c_box: c.c_box,
            offset: c.offset,
            degree: c.degree,
            tol: c.tol,
            max_passes: c.max_passes,
            seed: self.seed,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        let v = &self.vocabulary;
        TrainParams {
            k: v.k,
            kmeans: v.kmeans.clone(),
            max_descriptors: v.max_descriptors,
            use_idf: v.use_idf,
            svm: self.svm(),
            recognition: self.recognition.clone(),
            seed: self.seed,
        }
    }

    pub fn tracker_params(&self) -> TrackerParams {
        TrackerParams {
            seed: self.seed,
            ..self.tracker.clone()
        }
    }
}

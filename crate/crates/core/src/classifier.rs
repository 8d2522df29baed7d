//! Polynomial-kernel SVM trained by SMO, one-vs-one multi-class voting,
//! stratified cross-validation, confusion matrices and ROC curves.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocabulary::parse_numbers;

/// `(x.y + c)^3`.
pub fn cubic_kernel(x: &[f64], y: &[f64], c: f64) -> Result<f64> {
    poly_kernel(x, y, c, 3)
}

/// `(x.y + c)^degree`.
pub fn poly_kernel(x: &[f64], y: &[f64], c: f64, degree: u32) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("kernel inputs differ in length: {} vs {}", x.len(), y.len())));
    }
    Ok(poly(x, y, c, degree))
}

#[inline]
fn poly(x: &[f64], y: &[f64], c: f64, degree: u32) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot + c).powi(degree as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    /// Box constraint.
    pub c_box: f64,
    /// Kernel offset `c`.
    pub offset: f64,
    pub degree: u32,
    /// KKT tolerance.
    pub tol: f64,
    pub max_passes: usize,
    /// Set from the top-level configuration seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c_box: 1.0,
            offset: 1.0,
            degree: 3,
            tol: 1e-3,
            max_passes: 10_000,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_box > 0.0) || !(self.offset >= 0.0) || self.degree == 0 || !(self.tol > 0.0) {
            return Err(Error::invalid("svm needs C > 0, c >= 0, degree >= 1 and tol > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub samples: Vec<(Vec<f64>, usize)>,
    pub classes: Vec<String>,
}

impl LabeledSet {
    pub fn new(samples: Vec<(Vec<f64>, usize)>, classes: Vec<String>) -> Result<Self> {
        if let Some((_, l)) = samples.iter().find(|(_, l)| *l >= classes.len()) {
            return Err(Error::invalid(format!("label {l} outside {} classes", classes.len())));
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|(x, _)| x.len() != first.0.len()) {
                return Err(Error::invalid("samples differ in dimension"));
            }
        }
        Ok(Self { samples, classes })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for (_, l) in &self.samples {
            c[*l] += 1;
        }
        c
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            classes: self.classes.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// SMO

/// One trained two-class machine; `positive` maps to `y = +1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64], offset: f64, degree: u32) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * poly(s, x, offset, degree))
            .sum::<f64>()
            + self.bias
    }
}

/// Diagnostics of one binary SMO run.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoTrace {
    /// Final multipliers for every training sample.
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    /// Dual objective after every accepted pair update, starting at 0.
    pub dual: Vec<f64>,
    pub passes: usize,
}

pub fn gram_matrix(xs: &[Vec<f64>], offset: f64, degree: u32) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = poly(&xs[i], &xs[j], offset, degree);
            g[i][j] = k;
            g[j][i] = k;
        }
    }
    g
}

/// `sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`.
pub fn dual_objective(alphas: &[f64], ys: &[f64], gram: &[Vec<f64>]) -> f64 {
    let mut quad = 0.0;
    for i in 0..alphas.len() {
        for j in 0..alphas.len() {
            quad += alphas[i] * alphas[j] * ys[i] * ys[j] * gram[i][j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

struct Smo<'a> {
    k: &'a [Vec<f64>],
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    err: Vec<f64>,
    b: f64,
    dual: Vec<f64>,
}

const EPS: f64 = 1e-12;

impl Smo<'_> {
    fn violates(&self, i: usize) -> bool {
        let r = self.y[i] * self.err[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn bound(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0 || self.alpha[i] >= self.c
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (ei, ej) = (self.err[i], self.err[j]);
        let s = yi * yj;
        let (lo, hi) = if s < 0.0 {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if hi - lo < EPS {
            return false;
        }
        let (kii, kjj, kij) = (self.k[i][i], self.k[j][j], self.k[i][j]);
        let eta = kii + kjj - 2.0 * kij;
        // gain in the dual objective as a function of the new alpha_j
        let gain = |new_aj: f64| {
            let dj = new_aj - aj;
            let di = -s * dj;
            -(di * yi * ei + dj * yj * ej) - 0.5 * (di * di * kii + dj * dj * kjj + 2.0 * di * dj * s * kij)
        };
        let mut new_aj = if eta > EPS {
            (aj + yj * (ei - ej) / eta).clamp(lo, hi)
        } else {
            let (gl, gh) = (gain(lo), gain(hi));
            if gl > gh + EPS {
                lo
            } else if gh > gl + EPS {
                hi
            } else {
                aj
            }
        };
        if new_aj < EPS {
            new_aj = 0.0;
        } else if new_aj > self.c - EPS {
            new_aj = self.c;
        }
        if (new_aj - aj).abs() < EPS * (new_aj + aj + EPS) {
            return false;
        }
        let g = gain(new_aj);
        if g < 0.0 {
            return false;
        }
        let mut new_ai = ai + s * (aj - new_aj);
        if new_ai < EPS {
            new_ai = 0.0;
        } else if new_ai > self.c - EPS {
            new_ai = self.c;
        }
        let (di, dj) = (new_ai - ai, new_aj - aj);
        let b1 = self.b - ei - yi * di * kii - yj * dj * kij;
        let b2 = self.b - ej - yi * di * kij - yj * dj * kjj;
        let new_b = if new_ai > 0.0 && new_ai < self.c {
            b1
        } else if new_aj > 0.0 && new_aj < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_b - self.b;
        for t in 0..self.err.len() {
            self.err[t] += yi * di * self.k[i][t] + yj * dj * self.k[j][t] + db;
        }
        self.alpha[i] = new_ai;
        self.alpha[j] = new_aj;
        self.b = new_b;
        let last = *self.dual.last().unwrap();
        self.dual.push(last + g);
        true
    }

    fn examine(&mut self, j: usize, rng: &mut ChaCha8Rng) -> bool {
        if !self.violates(j) {
            return false;
        }
        let n = self.alpha.len();
        let free: Vec<usize> = (0..n).filter(|&t| !self.bound(t)).collect();
        if free.len() > 1 {
            let ej = self.err[j];
            let best = free
                .iter()
                .copied()
                .filter(|&t| t != j)
                .max_by(|&a, &b| (self.err[a] - ej).abs().total_cmp(&(self.err[b] - ej).abs()));
            if let Some(i) = best {
                if self.take_step(i, j) {
                    return true;
                }
            }
        }
        let start = rng.random_range(0..n);
        for t in 0..free.len() {
            let i = free[(start + t) % free.len()];
            if self.take_step(i, j) {
                return true;
            }
        }
        let start = rng.random_range(0..n);
        for t in 0..n {
            if self.take_step((start + t) % n, j) {
                return true;
            }
        }
        false
    }
}

/// SMO on a precomputed Gram matrix with labels in {-1, +1}; returns the
/// multipliers, bias and trace.
pub fn smo(gram: &[Vec<f64>], ys: &[f64], params: &SvmParams) -> Result<(Vec<f64>, f64, SmoTrace)> {
    params.validate()?;
    let n = ys.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut m = Smo {
        k: gram,
        y: ys,
        c: params.c_box,
        tol: params.tol,
        alpha: vec![0.0; n],
        err: ys.iter().map(|y| -y).collect(),
        b: 0.0,
        dual: vec![0.0],
    };
    let mut examine_all = true;
    let mut passes = 0;
    loop {
        if passes >= params.max_passes {
            return Err(Error::SmoNoConvergence { passes });
        }
        passes += 1;
        let mut changed = 0;
        let candidates: Vec<usize> = if examine_all {
            (0..n).collect()
        } else {
            (0..n).filter(|&t| !m.bound(t)).collect()
        };
        for j in candidates {
            changed += m.examine(j, &mut rng) as usize;
        }
        if examine_all && changed == 0 {
            break;
        }
        examine_all = changed == 0;
    }
    let trace = SmoTrace {
        alphas: m.alpha.clone(),
        labels: ys.to_vec(),
        dual: m.dual,
        passes,
    };
    Ok((m.alpha, m.b, trace))
}

/// Trains one two-class machine; `xs` of class `positive` get `y = +1`.
pub fn train_binary(
    xs: &[Vec<f64>],
    labels: &[usize],
    positive: usize,
    negative: usize,
    params: &SvmParams,
) -> Result<(BinaryMachine, SmoTrace)> {
    let ys: Vec<f64> = labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
    let gram = gram_matrix(xs, params.offset, params.degree);
    let (alpha, b, trace) = smo(&gram, &ys, params)?;
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for i in 0..xs.len() {
        if alpha[i] > 0.0 {
            support.push(xs[i].clone());
            coef.push(alpha[i] * ys[i]);
        }
    }
    Ok((
        BinaryMachine {
            positive,
            negative,
            support,
            coef,
            bias: b,
        },
        trace,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<String>,
    pub c_box: f64,
    pub offset: f64,
    pub degree: u32,
    pub machines: Vec<BinaryMachine>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Pairwise wins per class.
    pub votes: Vec<usize>,
    /// Summed signed decision values per class.
    pub margins: Vec<f64>,
}

impl Prediction {
    /// Votes normalized to sum 1.
    pub fn distribution(&self) -> Vec<f64> {
        let total: usize = self.votes.iter().sum();
        self.votes.iter().map(|&v| v as f64 / total.max(1) as f64).collect()
    }
}

/// One-vs-one training over every class pair.
pub fn train_svm(data: &LabeledSet, params: &SvmParams) -> Result<SvmModel> {
    Ok(train_svm_traced(data, params)?.0)
}

pub fn train_svm_traced(data: &LabeledSet, params: &SvmParams) -> Result<(SvmModel, Vec<SmoTrace>)> {
    params.validate()?;
    let counts = data.class_counts();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::invalid("svm training needs samples from at least two classes"));
    }
    let mut machines = Vec::new();
    let mut traces = Vec::new();
    for (pi, &a) in present.iter().enumerate() {
        for &b in &present[pi + 1..] {
            let (xs, ls): (Vec<Vec<f64>>, Vec<usize>) =
                data.samples.iter().filter(|(_, l)| *l == a || *l == b).cloned().unzip();
            let (m, t) = train_binary(&xs, &ls, a, b, params)?;
            machines.push(m);
            traces.push(t);
        }
    }
    Ok((
        SvmModel {
            classes: data.classes.clone(),
            c_box: params.c_box,
            offset: params.offset,
            degree: params.degree,
            machines,
        },
        traces,
    ))
}

/// Majority vote; ties go to the larger summed margin, then the lower index.
pub fn predict(m: &SvmModel, x: &[f64]) -> Prediction {
    let n = m.classes.len();
    let mut votes = vec![0usize; n];
    let mut margins = vec![0.0; n];
    for machine in &m.machines {
        let d = machine.decision(x, m.offset, m.degree);
        if d > 0.0 {
            votes[machine.positive] += 1;
        } else {
            votes[machine.negative] += 1;
        }
        margins[machine.positive] += d;
        margins[machine.negative] -= d;
    }
    let mut label = 0;
    for c in 1..n {
        if votes[c] > votes[label] || (votes[c] == votes[label] && margins[c] > margins[label]) {
            label = c;
        }
    }
    Prediction { label, votes, margins }
}

const MODEL_HEADER: &str = "vtrack-svm v1";

impl SvmModel {
    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_HEADER}\nclasses {}\n", self.classes.join(" "));
        let _ = writeln!(s, "params {:?} {:?} {}", self.c_box, self.offset, self.degree);
        let _ = writeln!(s, "machines {}", self.machines.len());
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        for m in &self.machines {
            let _ = writeln!(s, "machine {} {} {} {:?}", m.positive, m.negative, m.support.len(), m.bias);
            let _ = writeln!(s, "coef {}", join(&m.coef));
            for sv in &m.support {
                let _ = writeln!(s, "{}", join(sv));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("svm model: {what}"));
        let mut lines = text.lines();
        if lines.next() != Some(MODEL_HEADER) {
            return Err(bad("missing header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let rest = if name.is_empty() {
                Some(line)
            } else {
                line.strip_prefix(name).and_then(|r| r.strip_prefix(' ').or(r.is_empty().then_some("")))
            };
            rest.map(str::to_string).ok_or_else(|| bad(&format!("expected `{name}`")))
        };
        let classes: Vec<String> = field("classes")?.split_whitespace().map(str::to_string).collect();
        let params = field("params")?;
        let p: Vec<&str> = params.split_whitespace().collect();
        if p.len() != 3 {
            return Err(bad("params needs C, c and degree"));
        }
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad("bad number"));
        let (c_box, offset) = (num(p[0])?, num(p[1])?);
        let degree: u32 = p[2].parse().map_err(|_| bad("bad degree"))?;
        let count: usize = field("machines")?.trim().parse().map_err(|_| bad("bad machine count"))?;
        let mut machines = Vec::with_capacity(count);
        for _ in 0..count {
            let head = field("machine")?;
            let h: Vec<&str> = head.split_whitespace().collect();
            if h.len() != 4 {
                return Err(bad("machine line needs 4 fields"));
            }
            let idx = |t: &str| t.parse::<usize>().map_err(|_| bad("bad index"));
            let (positive, negative, nsv) = (idx(h[0])?, idx(h[1])?, idx(h[2])?);
            if positive >= classes.len() || negative >= classes.len() {
                return Err(bad("class index out of range"));
            }
            let bias = num(h[3])?;
            let coef: Vec<f64> = parse_numbers(&field("coef")?)?;
            if coef.len() != nsv {
                return Err(bad("coefficient count mismatch"));
            }
            let support = (0..nsv)
                .map(|_| parse_numbers::<f64>(&field("")?))
                .collect::<Result<Vec<_>>>()?;
            machines.push(BinaryMachine {
                positive,
                negative,
                support,
                coef,
                bias,
            });
        }
        Ok(Self {
            classes,
            c_box,
            offset,
            degree,
            machines,
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    /// One-vs-rest ROC points per class, from (0, 0) to (1, 1).
    pub roc: Vec<Vec<(f64, f64)>>,
    pub auc: Vec<f64>,
}

/// ROC staircase from scores and binary truth; tied scores move diagonally.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let p = positive.iter().filter(|&&b| b).count() as f64;
    let n = positive.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let fpr = if n > 0.0 { fp / n } else { 1.0 };
        let tpr = if p > 0.0 { tp / p } else { 1.0 };
        pts.push((fpr, tpr));
    }
    if pts.last() != Some(&(1.0, 1.0)) {
        pts.push((1.0, 1.0));
    }
    pts
}

/// Trapezoidal area under a ROC curve.
pub fn auc(roc: &[(f64, f64)]) -> f64 {
    roc.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Builds the report from held-out predictions.
pub fn evaluate_predictions(classes: &[String], truth: &[usize], preds: &[Prediction]) -> EvalReport {
    let n = classes.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (&t, p) in truth.iter().zip(preds) {
        confusion[t][p.label] += 1;
    }
    let correct: usize = (0..n).map(|c| confusion[c][c]).sum();
    let accuracy = if truth.is_empty() {
        0.0
    } else {
        correct as f64 / truth.len() as f64
    };
    let mut roc = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    for c in 0..n {
        let scores: Vec<f64> = preds.iter().map(|p| p.margins[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        let curve = roc_curve(&scores, &pos);
        areas.push(auc(&curve));
        roc.push(curve);
    }
    EvalReport {
        classes: classes.to_vec(),
        confusion,
        accuracy,
        roc,
        auc: areas,
    }
}

/// Stratified k-fold: each class is shuffled with the seed and dealt
/// round-robin into folds.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    Ok(fold_of)
}

pub fn cross_validate(data: &LabeledSet, folds: usize, params: &SvmParams, seed: u64) -> Result<EvalReport> {
    let labels: Vec<usize> = data.samples.iter().map(|s| s.1).collect();
    let fold_of = stratified_folds(&labels, data.classes.len(), folds, seed)?;
    let mut truth = Vec::new();
    let mut preds = Vec::new();
    for f in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        let model = train_svm(&data.subset(&train), params)?;
        for i in test {
            truth.push(labels[i]);
            preds.push(predict(&model, &data.samples[i].0));
        }
    }
    Ok(evaluate_predictions(&data.classes, &truth, &preds))
}

impl EvalReport {
    pub fn confusion_csv(&self) -> String {
        let mut s = format!("true\\predicted,{}\n", self.classes.join(","));
        for (c, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{},{}", self.classes[c], cells.join(","));
        }
        s
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("class,fpr,tpr\n");
        for (c, curve) in self.roc.iter().enumerate() {
            for (fpr, tpr) in curve {
                let _ = writeln!(s, "{},{fpr},{tpr}", self.classes[c]);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(samples: &[(&[f64], usize)], n_classes: usize) -> LabeledSet {
        LabeledSet::new(
            samples.iter().map(|(x, l)| (x.to_vec(), *l)).collect(),
            (0..n_classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(cubic_kernel(&[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap(), 1.0);
        assert_eq!(cubic_kernel(&[1.0, 0.0], &[1.0, 5.0], 1.0).unwrap(), 8.0);
        assert!(cubic_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn two_points_are_both_support_vectors() {
        let data = set(&[(&[1.0, 0.0], 0), (&[0.0, 1.0], 1)], 2);
        let (m, traces) = train_svm_traced(&data, &SvmParams::default()).unwrap();
        assert_eq!(m.machines[0].support.len(), 2);
        let d0 = m.machines[0].decision(&[1.0, 0.0], 1.0, 3);
        let d1 = m.machines[0].decision(&[0.0, 1.0], 1.0, 3);
        assert!(d0 > 0.0 && d1 < 0.0);
        assert!(traces[0].alphas.iter().all(|&a| a > 0.0));
    }

    fn xor() -> LabeledSet {
        set(
            &[(&[1.0, 1.0], 0), (&[-1.0, -1.0], 0), (&[1.0, -1.0], 1), (&[-1.0, 1.0], 1)],
            2,
        )
    }

    #[test]
    fn cubic_solves_xor_and_linear_cannot() {
        let data = xor();
        let cubic = SvmParams {
            c_box: 10.0,
            ..SvmParams::default()
        };
        let m = train_svm(&data, &cubic).unwrap();
        assert!(data.samples.iter().all(|(x, l)| predict(&m, x).label == *l));
        let linear = SvmParams {
            degree: 1,
            offset: 0.0,
            ..cubic
        };
        let m = train_svm(&data, &linear).unwrap();
        assert!(data.samples.iter().filter(|(x, l)| predict(&m, x).label == *l).count() < 4);
    }

    #[test]
    fn duplicating_samples_keeps_decision_function() {
        let base: &[(&[f64], usize)] = &[
            (&[0.1, 0.9], 0),
            (&[0.3, 0.6], 0),
            (&[0.2, 0.4], 0),
            (&[0.8, 0.1], 1),
            (&[0.7, 0.4], 1),
            (&[0.5, 0.2], 1),
        ];
        let doubled: Vec<(&[f64], usize)> = base.iter().chain(base).copied().collect();
        let p = SvmParams {
            c_box: 100.0,
            tol: 1e-10,
            ..SvmParams::default()
        };
        let m1 = train_svm(&set(base, 2), &p).unwrap();
        let m2 = train_svm(&set(&doubled, 2), &p).unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let x = [i as f64 / 10.0, j as f64 / 10.0];
                let (a, b) = (m1.machines[0].decision(&x, 1.0, 3), m2.machines[0].decision(&x, 1.0, 3));
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(train_svm(&set(&[(&[1.0], 0), (&[2.0], 0)], 2), &SvmParams::default()).is_err());
    }

    #[test]
    fn zero_input_with_zero_offset_reads_the_bias() {
        let data = set(&[(&[1.0, 0.0], 0), (&[0.0, 1.0], 1), (&[0.9, 0.2], 0)], 2);
        let p = SvmParams {
            offset: 0.0,
            ..SvmParams::default()
        };
        let m = train_svm(&data, &p).unwrap();
        let d = m.machines[0].decision(&[0.0, 0.0], 0.0, 3);
        assert_eq!(d, m.machines[0].bias);
        let pred = predict(&m, &[0.0, 0.0]);
        assert_eq!(pred.votes.len(), 2);
        assert_eq!(pred.label, if m.machines[0].bias > 0.0 { 0 } else { 1 });
    }

    fn three_blobs(per_class: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]];
        let samples = (0..3 * per_class)
            .map(|i| {
                let c = i % 3;
                let x = vec![
                    centers[c][0] + rng.random_range(-0.1..0.1),
                    centers[c][1] + rng.random_range(-0.1..0.1),
                ];
                (x, c)
            })
            .collect();
        LabeledSet::new(samples, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn separable_three_classes() {
        let data = three_blobs(10, 1);
        let p = SvmParams {
            c_box: 10.0,
            ..SvmParams::default()
        };
        let m = train_svm(&data, &p).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert!(data.samples.iter().all(|(x, l)| predict(&m, x).label == *l));
        let r = cross_validate(&data, 5, &p, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for (c, row) in r.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), 10);
            assert_eq!(row[c], 10);
        }
        assert!(r.auc.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn shuffled_labels_are_near_chance() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<(Vec<f64>, usize)> = (0..80)
                .map(|i| (vec![rng.random(), rng.random(), rng.random()], i % 2))
                .collect();
            let data = LabeledSet::new(samples, vec!["a".into(), "b".into()]).unwrap();
            let r = cross_validate(&data, 5, &SvmParams::default(), seed).unwrap();
            assert!((0.3..=0.7).contains(&r.accuracy), "seed {seed}: {}", r.accuracy);
        }
    }

    #[test]
    fn cross_validation_checks_class_sizes() {
        let data = set(&[(&[0.0], 0), (&[1.0], 1), (&[0.1], 0), (&[0.9], 1)], 2);
        assert!(cross_validate(&data, 3, &SvmParams::default(), 0).is_err());
        assert!(cross_validate(&data, 1, &SvmParams::default(), 0).is_err());
    }

    #[test]
    fn perfect_ranking_has_unit_auc() {
        let truth = [true, false, true, false, false];
        let scores: Vec<f64> = truth.iter().map(|&t| t as u8 as f64).collect();
        let roc = roc_curve(&scores, &truth);
        assert_eq!(auc(&roc), 1.0);
        assert_eq!(roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn model_text_roundtrip() {
        let m = train_svm(&three_blobs(4, 2), &SvmParams::default()).unwrap();
        let text = m.to_text();
        let back = SvmModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert!(SvmModel::from_text("vtrack-svm v1\nclasses a\n").is_err());
    }

    #[test]
    fn csv_layout() {
        let r = cross_validate(&three_blobs(5, 4), 5, &SvmParams::default(), 0).unwrap();
        let csv = r.confusion_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("true\\predicted,a,b,c"));
        assert!(r.roc_csv().starts_with("class,fpr,tpr\n"));
    }

    mod props {
        use super::*;
        use nalgebra::{DMatrix, SymmetricEigen};
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn kernel_symmetric(x in proptest::collection::vec(0.0f64..1.0, 5), y in proptest::collection::vec(0.0f64..1.0, 5), c in 0.0f64..2.0) {
                prop_assert_eq!(cubic_kernel(&x, &y, c).unwrap(), cubic_kernel(&y, &x, c).unwrap());
            }

            #[test]
            fn gram_is_psd(seed in 0u64..10_000, n in 2usize..12, c in 0.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
                let g = gram_matrix(&xs, c, 3);
                let m = DMatrix::from_fn(n, n, |i, j| g[i][j]);
                prop_assert_eq!(m.clone(), m.transpose());
                let scale = m.amax().max(1.0);
                let min = SymmetricEigen::new(m).eigenvalues.min();
                prop_assert!(min >= -1e-8 * scale, "{min}");
            }

            #[test]
            fn smo_invariants(seed in 0u64..10_000, n in 4usize..30) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let samples: Vec<(Vec<f64>, usize)> = (0..n)
                    .map(|i| {
                        let l = i % 2;
                        (vec![rng.random::<f64>() + 0.3 * l as f64, rng.random::<f64>()], l)
                    })
                    .collect();
                let data = LabeledSet::new(samples, vec!["a".into(), "b".into()]).unwrap();
                let p = SvmParams { seed, ..SvmParams::default() };
                let (_, traces) = train_svm_traced(&data, &p).unwrap();
                for t in traces {
                    prop_assert!(t.alphas.iter().all(|&a| (0.0..=p.c_box).contains(&a)));
                    let s: f64 = t.alphas.iter().zip(&t.labels).map(|(a, y)| a * y).sum();
                    prop_assert!(s.abs() < 1e-8, "{s}");
                    for w in t.dual.windows(2) {
                        prop_assert!(w[1] >= w[0] - 1e-12);
                    }
                    let xs: Vec<Vec<f64>> = data.samples.iter().map(|s| s.0.clone()).collect();
                    let direct = dual_objective(&t.alphas, &t.labels, &gram_matrix(&xs, p.offset, p.degree));
                    prop_assert!((direct - t.dual.last().unwrap()).abs() < 1e-6 * direct.abs().max(1.0));
                }
            }

            #[test]
            fn roc_is_monotone(scores in proptest::collection::vec(-1.0f64..1.0, 1..30), seed in 0u64..100) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let truth: Vec<bool> = scores.iter().map(|_| rng.random()).collect();
                let roc = roc_curve(&scores, &truth);
                prop_assert_eq!(roc[0], (0.0, 0.0));
                prop_assert_eq!(*roc.last().unwrap(), (1.0, 1.0));
                for w in roc.windows(2) {
                    prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
                }
            }
        }
    }
}

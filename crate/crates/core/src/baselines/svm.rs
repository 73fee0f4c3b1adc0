//! One-vs-rest linear SVM trained by projected stochastic subgradient descent.
//!
//! Each binary problem minimizes
//!
//! ```text
//! F(w, b) = c_reg / 2 * ||w||^2 + 1/n * sum_i weight_i * max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! with step `1 / (c_reg * t)` and projection of `w` onto the ball that must
//! contain the optimum. The bias is unregularized; after every epoch it is set
//! to its exact minimizer for the current `w`. The returned hyperplane is the
//! epoch-end iterate with the lowest objective.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::FeatureMatrix;
use crate::rng;

/// One-vs-rest linear classifier: `score_c(x) = weights[c] . x + bias[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LinearClassifier {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LinearClassifier {
            weights: DMatrix::zeros(n_classes, dim),
            bias: DVector::zeros(n_classes),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn trained_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Raw decision values, `rows × n_classes`.
    pub fn scores(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.cols() != self.trained_dim() {
            return Err(Error::invalid(format!(
                "classifier expects {} features, got {}",
                self.trained_dim(),
                x.cols()
            )));
        }
        Ok(scores_raw(x.as_matrix(), &self.weights, &self.bias))
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.scores(x)?))
    }

    pub fn accuracy(&self, test: &LabeledDataset) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::invalid("empty test set"));
        }
        let pred = self.predict(test.features())?;
        Ok(crate::adaptnet::accuracy(&pred, test.labels()))
    }
}

pub(crate) fn scores_raw(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut s = x * w.transpose();
    for mut row in s.row_iter_mut() {
        row += b.transpose();
    }
    s
}

/// Row-wise argmax; ties go to the lower column.
pub fn argmax_rows(s: &DMatrix<f64>) -> Vec<usize> {
    s.row_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c_reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c_reg: 0.01,
            epochs: 50,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.c_reg > 0.0 && self.c_reg.is_finite()) {
            return Err(Error::invalid(format!("c_reg must be positive, got {}", self.c_reg)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Trained classifier plus, after each epoch, the summed objective of the
/// best iterate so far (entry 0 is the starting point). The last entry is the
/// objective of `classifier`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub classifier: LinearClassifier,
    pub objective_trace: Vec<f64>,
}

impl SvmFit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the starting point")
    }
}

/// One binary problem with per-example weights. Zero-weight rows should be
/// dropped by the caller; they would only slow the sampler down.
pub(crate) struct BinaryProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: Vec<f64>,
    pub weight: Vec<f64>,
}

impl BinaryProblem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    pub fn objective(&self, c_reg: f64, w: &DVector<f64>, b: f64) -> f64 {
        let scores = self.x * w;
        let loss: f64 = (0..self.n())
            .map(|i| self.weight[i] * (1.0 - self.y[i] * (scores[i] + b)).max(0.0))
            .sum();
        0.5 * c_reg * w.norm_squared() + loss / self.n() as f64
    }

    /// Exact minimizer over the bias of the weighted hinge term for fixed `w`.
    fn best_bias(&self, w: &DVector<f64>) -> f64 {
        let scores = self.x * w;
        // each term is a hinge in b with kink at y_i - s_i; the slope rises by
        // weight_i when b crosses it, starting from -sum(positive weights)
        let mut kinks: Vec<(f64, f64)> =
            (0..self.n()).map(|i| (self.y[i] - scores[i], self.weight[i])).collect();
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut slope: f64 = -(0..self.n())
            .filter(|&i| self.y[i] > 0.0)
            .map(|i| self.weight[i])
            .sum::<f64>();
        for &(kink, w) in &kinks {
            slope += w;
            if slope >= 0.0 {
                return kink;
            }
        }
        kinks.last().map_or(0.0, |k| k.0)
    }
}

/// Weighted Pegasos for one binary problem; `init` is returned if nothing beats it.
pub(crate) fn pegasos(
    p: &BinaryProblem<'_>,
    c_reg: f64,
    epochs: usize,
    rng: &mut rng::Rng,
    init: (DVector<f64>, f64),
) -> ((DVector<f64>, f64), Vec<f64>) {
    let n = p.n();
    let mean_weight = p.weight.iter().sum::<f64>() / n as f64;
    let radius = (2.0 * mean_weight / c_reg).sqrt();

    // a warm start only competes as a candidate; the path always starts at zero
    let mut best_obj = p.objective(c_reg, &init.0, init.1);
    let mut best = init;
    let mut trace = vec![best_obj];
    let (mut w, mut b) = (DVector::zeros(p.x.ncols()), 0.0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (c_reg * t as f64);
            let xi = p.x.row(i);
            let margin = p.y[i] * ((xi * &w)[0] + b);
            w *= 1.0 - eta * c_reg;
            if margin < 1.0 {
                let step = eta * p.weight[i] * p.y[i];
                w.axpy(step, &xi.transpose(), 1.0);
                b += step;
            }
            let norm = w.norm();
            if norm > radius {
                w *= radius / norm;
            }
        }
        b = p.best_bias(&w);
        let obj = p.objective(c_reg, &w, b);
        if obj < best_obj {
            best_obj = obj;
            best = (w.clone(), b);
        }
        trace.push(best_obj);
    }
    (best, trace)
}

fn check_classes(labels: &[usize]) -> Result<()> {
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(Error::invalid("SVM training needs at least two classes"));
    }
    Ok(())
}

/// One-vs-rest training on raw matrices with per-row weights. Class `c` uses
/// random stream `(seed, c)`. Rows with zero weight are dropped.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_ovr(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    row_weight: &[f64],
    c_reg: f64,
    epochs: usize,
    seed: u64,
    init: Option<&LinearClassifier>,
) -> SvmFit {
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| row_weight[i] != 0.0).collect();
    let xk = x.select_rows(&keep);
    let mut clf = LinearClassifier::zeros(n_classes, x.ncols());
    let mut total = vec![0.0; epochs + 1];
    for c in 0..n_classes {
        let problem = BinaryProblem {
            x: &xk,
            y: keep.iter().map(|&i| if labels[i] == c { 1.0 } else { -1.0 }).collect(),
            weight: keep.iter().map(|&i| row_weight[i]).collect(),
        };
        let start = match init {
            Some(prev) => (prev.weights.row(c).transpose(), prev.bias[c]),
            None => (DVector::zeros(x.ncols()), 0.0),
        };
        let mut rng = rng::stream(seed, c as u64);
        let ((w, b), trace) = pegasos(&problem, c_reg, epochs, &mut rng, start);
        clf.weights.set_row(c, &w.transpose());
        clf.bias[c] = b;
        for (acc, v) in total.iter_mut().zip(trace) {
            *acc += v;
        }
    }
    SvmFit {
        classifier: clf,
        objective_trace: total,
    }
}

/// Train a one-vs-rest linear SVM.
pub fn svm_train(data: &LabeledDataset, params: &SvmParams) -> Result<SvmFit> {
    params.validate()?;
    check_classes(data.labels())?;
    let weights = vec![1.0; data.len()];
    Ok(train_ovr(
        data.features().as_matrix(),
        data.labels(),
        data.n_classes(),
        &weights,
        params.c_reg,
        params.epochs,
        params.seed,
        None,
    ))
}

/// Summed one-vs-rest objective of `clf` on `data`.
pub fn svm_objective(clf: &LinearClassifier, data: &LabeledDataset, c_reg: f64) -> f64 {
    let x = data.features().as_matrix();
    (0..clf.n_classes())
        .map(|c| {
            let p = BinaryProblem {
                x,
                y: data.labels().iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect(),
                weight: vec![1.0; data.len()],
            };
            p.objective(c_reg, &clf.weights.row(c).transpose(), clf.bias[c])
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_domains, SynthSpec};

    fn blobs(seed: u64) -> LabeledDataset {
        // two classes, means 4 apart, small noise: margin ~2 on each side
        synth_domains(&SynthSpec {
            n_classes: 2,
            dim: 2,
            n_per_class_source: 20,
            n_per_class_target: 1,
            noise_sd: 0.3,
            class_sep: 4.0,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let data = blobs(1);
        let fit = svm_train(&data, &SvmParams::default()).unwrap();
        assert_eq!(fit.classifier.accuracy(&data).unwrap(), 1.0);
        assert!(fit.objective_trace.last().unwrap() <= &fit.objective_trace[0]);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = blobs(2);
        let p = SvmParams { seed: 9, ..Default::default() };
        assert_eq!(svm_train(&data, &p).unwrap(), svm_train(&data, &p).unwrap());
    }

    #[test]
    fn far_positive_outscores_far_negative() {
        let data = blobs(3);
        let fit = svm_train(&data, &SvmParams::default()).unwrap();
        let means = crate::data::class_means(2, 2, 4.0);
        let far = |c: usize| means.row(c) * 3.0;
        let x = FeatureMatrix::from_rows(&[
            far(0).iter().copied().collect(),
            far(1).iter().copied().collect(),
        ])
        .unwrap();
        let s = fit.classifier.scores(&x).unwrap();
        assert!(s[(0, 0)] > s[(1, 0)]);
        assert!(s[(1, 1)] > s[(0, 1)]);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = blobs(0);
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == 0).collect();
        let one = data.subset(&idx).unwrap();
        assert!(matches!(svm_train(&one, &SvmParams::default()), Err(Error::InvalidArgument(_))));
        assert!(svm_train(&data, &SvmParams { c_reg: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn best_bias_is_exact() {
        let x = DMatrix::from_row_slice(5, 1, &[-2.0, -1.0, 0.5, 1.0, 3.0]);
        let p = BinaryProblem {
            x: &x,
            y: vec![-1.0, -1.0, 1.0, 1.0, 1.0],
            weight: vec![1.0, 2.0, 1.0, 0.5, 1.0],
        };
        let w = DVector::from_element(1, 0.7);
        let b = p.best_bias(&w);
        let f = |b: f64| p.objective(0.0, &w, b);
        for k in -400..400 {
            let other = k as f64 * 0.01;
            assert!(f(b) <= f(other) + 1e-12, "b={b} other={other}");
        }
    }

    #[test]
    fn multiclass_synthetic_accuracy() {
        let (s, t) = synth_domains(&SynthSpec { seed: 5, ..SynthSpec::default() }).unwrap();
        let fit = svm_train(&s, &SvmParams::default()).unwrap();
        assert!(fit.classifier.accuracy(&s).unwrap() > 0.95);
        // no shift configured: target is the same distribution
        assert!(fit.classifier.accuracy(&t).unwrap() > 0.9);
    }
}

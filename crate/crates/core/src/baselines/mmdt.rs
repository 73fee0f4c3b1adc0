//! Max-margin domain transforms: a linear map `A` taking target rows into the
//! source feature space, learned jointly with a one-vs-rest SVM.
//!
//! Minimizes, summed over classes,
//!
//! ```text
//! ½‖θ‖² + C_s Σ hinge(x, y; θ) + C_t Σ hinge(A x̃, ỹ; θ)   (+ ½‖A − I‖²_F once)
//! ```
//!
//! by alternating a weighted SVM solve in `θ` with subgradient descent in `A`.
//! Both steps keep their best iterate, so the loss never increases.

use nalgebra::DMatrix;

use super::svm::{argmax_rows, scores_raw, train_ovr, LinearClassifier};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdtConfig {
    pub c_s: f64,
    pub c_t: f64,
    pub outer_iters: usize,
    /// SVM epochs per classifier step.
    pub epochs: usize,
    /// Subgradient steps per transform step.
    pub transform_steps: usize,
}

impl Default for MmdtConfig {
    fn default() -> Self {
        MmdtConfig {
            c_s: 1.0,
            c_t: 1.0,
            outer_iters: 10,
            epochs: 50,
            transform_steps: 100,
        }
    }
}

impl MmdtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            return Err(Error::invalid(format!("mmdt c_s must be positive, got {}", self.c_s)));
        }
        if !(self.c_t >= 0.0 && self.c_t.is_finite()) {
            return Err(Error::invalid(format!("mmdt c_t must be nonnegative, got {}", self.c_t)));
        }
        if self.outer_iters == 0 || self.epochs == 0 {
            return Err(Error::invalid("mmdt iteration counts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdtFit {
    pub classifier: LinearClassifier,
    pub transform: DMatrix<f64>,
    /// Total loss at the start and after each outer iteration.
    pub loss_trace: Vec<f64>,
}

impl MmdtFit {
    /// Classify target rows after mapping them through `A`.
    pub fn predict_target(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        if x.cols() != self.transform.ncols() {
            return Err(Error::invalid("feature dimension does not match transform"));
        }
        let mapped = x.as_matrix() * self.transform.transpose();
        Ok(argmax_rows(&scores_raw(&mapped, &self.classifier.weights, &self.classifier.bias)))
    }

    pub fn target_accuracy(&self, test: &LabeledDataset) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::invalid("empty test set"));
        }
        let pred = self.predict_target(test.features())?;
        Ok(crate::adaptnet::accuracy(&pred, test.labels()))
    }
}

fn sign(label: usize, c: usize) -> f64 {
    if label == c {
        1.0
    } else {
        -1.0
    }
}

fn hinge_sum(scores: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..scores.ncols() {
            total += (1.0 - sign(l, c) * scores[(i, c)]).max(0.0);
        }
    }
    total
}

fn transform_loss(
    a: &DMatrix<f64>,
    clf: &LinearClassifier,
    target: &LabeledDataset,
    c_t: f64,
) -> f64 {
    let d = a.nrows();
    let mapped = target.features().as_matrix() * a.transpose();
    let reg = 0.5 * (a - DMatrix::identity(d, d)).norm_squared();
    reg + c_t * hinge_sum(&scores_raw(&mapped, &clf.weights, &clf.bias), target.labels())
}

/// Total MMDT loss.
pub fn mmdt_loss(
    clf: &LinearClassifier,
    a: &DMatrix<f64>,
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &MmdtConfig,
) -> f64 {
    let src_scores = scores_raw(source.features().as_matrix(), &clf.weights, &clf.bias);
    0.5 * clf.weights.norm_squared()
        + cfg.c_s * hinge_sum(&src_scores, source.labels())
        + transform_loss(a, clf, target, cfg.c_t)
}

/// Subgradient descent on the transform with step `1/t`, keeping the best iterate.
fn transform_step(
    a0: &DMatrix<f64>,
    clf: &LinearClassifier,
    target: &LabeledDataset,
    c_t: f64,
    steps: usize,
) -> DMatrix<f64> {
    let d = a0.nrows();
    let x = target.features().as_matrix();
    let identity = DMatrix::identity(d, d);
    let mut a = a0.clone();
    let mut best = a.clone();
    let mut best_loss = transform_loss(&a, clf, target, c_t);
    for t in 1..=steps {
        let mapped = x * a.transpose();
        let scores = scores_raw(&mapped, &clf.weights, &clf.bias);
        // coefficient on θ_c x̃_jᵀ for every active hinge
        let mut coef = DMatrix::zeros(x.nrows(), clf.n_classes());
        for (j, &l) in target.labels().iter().enumerate() {
            for c in 0..clf.n_classes() {
                let y = sign(l, c);
                if y * scores[(j, c)] < 1.0 {
                    coef[(j, c)] = -y;
                }
            }
        }
        let grad = (&a - &identity) + (clf.weights.transpose() * coef.transpose() * x) * c_t;
        a -= grad / t as f64;
        let loss = transform_loss(&a, clf, target, c_t);
        if loss < best_loss {
            best_loss = loss;
            best = a.clone();
        }
    }
    best
}

/// Alternating minimization starting from `θ = 0`, `A = I`.
pub fn mmdt_train(
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &MmdtConfig,
    seed: u64,
) -> Result<MmdtFit> {
    cfg.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::invalid(format!(
            "source dim {} differs from target dim {}",
            source.dim(),
            target.dim()
        )));
    }
    let n_classes = source.n_classes().max(target.n_classes());
    let mut labels: Vec<usize> = source.labels().to_vec();
    labels.extend_from_slice(target.labels());
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::invalid("MMDT needs at least two classes"));
    }
    let d = source.dim();
    let c_max = cfg.c_s.max(cfg.c_t);
    let mut row_weight = vec![cfg.c_s / c_max; source.len()];
    row_weight.extend(std::iter::repeat_n(cfg.c_t / c_max, target.len()));
    let n_active = row_weight.iter().filter(|&&w| w != 0.0).count();
    // the solver's objective is c_reg/2 ‖θ‖² + mean(weight · hinge); this c_reg
    // makes it a positive multiple of the per-class MMDT loss
    let c_reg = 1.0 / (n_active as f64 * c_max);

    let mut clf = LinearClassifier::zeros(n_classes, d);
    let mut a = DMatrix::identity(d, d);
    let mut trace = vec![mmdt_loss(&clf, &a, source, target, cfg)];
    for _ in 0..cfg.outer_iters {
        let stacked = FeatureMatrix::vstack(&[
            source.features(),
            &FeatureMatrix::from_matrix(target.features().as_matrix() * a.transpose())?,
        ])?;
        clf = train_ovr(stacked.as_matrix(), &labels, n_classes, &row_weight, c_reg, cfg.epochs, seed, Some(&clf))
            .classifier;
        a = transform_step(&a, &clf, target, cfg.c_t, cfg.transform_steps);
        let loss = mmdt_loss(&clf, &a, source, target, cfg);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { iteration: trace.len() });
        }
        trace.push(loss);
    }
    Ok(MmdtFit {
        classifier: clf,
        transform: a,
        loss_trace: trace,
    })
}

/// `‖A − I‖_F`.
pub fn transform_deviation(a: &DMatrix<f64>) -> f64 {
    (a - DMatrix::identity(a.nrows(), a.ncols())).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::svm::{svm_objective, svm_train, SvmParams};
    use crate::data::{synth_domains, DomainShift, SynthSpec};

    fn task(seed: u64, angle_deg: f64) -> (LabeledDataset, LabeledDataset) {
        let (s, t) = synth_domains(&SynthSpec {
            n_classes: 3,
            dim: 6,
            n_per_class_source: 15,
            n_per_class_target: 4,
            noise_sd: 0.8,
            shift: DomainShift {
                mean_offset: Vec::new(),
                rotation_angle: angle_deg.to_radians(),
            },
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        (s, t)
    }

    #[test]
    fn loss_is_monotone() {
        for seed in 0..3 {
            let (s, t) = task(seed, 30.0);
            let fit = mmdt_train(&s, &t, &MmdtConfig::default(), seed).unwrap();
            assert_eq!(fit.loss_trace.len(), 11);
            for w in fit.loss_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "{:?}", fit.loss_trace);
            }
        }
    }

    #[test]
    fn no_target_weight_is_source_svm() {
        let (s, t) = task(5, 30.0);
        let cfg = MmdtConfig { c_t: 0.0, ..MmdtConfig::default() };
        let fit = mmdt_train(&s, &t, &cfg, 3).unwrap();
        assert_eq!(fit.transform, DMatrix::identity(6, 6));
        let c_reg = 1.0 / (s.len() as f64 * cfg.c_s);
        let svm = svm_train(&s, &SvmParams { c_reg, epochs: cfg.epochs, seed: 3 }).unwrap();
        let a = svm_objective(&fit.classifier, &s, c_reg);
        let b = svm_objective(&svm.classifier, &s, c_reg);
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn rotation_moves_transform_further() {
        let (mut same, mut rotated) = (0.0, 0.0);
        for seed in 0..5 {
            let (s, t) = task(seed, 0.0);
            same += transform_deviation(&mmdt_train(&s, &t, &MmdtConfig::default(), seed).unwrap().transform);
            let (s, t) = task(seed, 30.0);
            rotated += transform_deviation(&mmdt_train(&s, &t, &MmdtConfig::default(), seed).unwrap().transform);
        }
        assert!(same < rotated, "{same} vs {rotated}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (s, _) = task(0, 0.0);
        let (t, _) = synth_domains(&SynthSpec { dim: 4, n_classes: 3, ..SynthSpec::default() }).unwrap();
        assert!(matches!(mmdt_train(&s, &t, &MmdtConfig::default(), 0), Err(Error::InvalidArgument(_))));
    }
}

//! Projective model transfer: a target SVM whose hyperplane is pulled toward
//! the source hyperplane by penalizing the angle between them.
//!
//! The penalty `‖θ̃‖² sin²α` equals the squared norm of the component of `θ̃`
//! orthogonal to `θ`, so per class the problem is
//!
//! ```text
//! c_reg / 2 * (‖θ̃‖² + Γ ‖θ̃⊥‖²) + mean hinge
//! ```
//!
//! Substituting `θ̃ = S v` with `S = P∥ + (1 + Γ)^(-1/2) P⊥` turns this into a
//! plain SVM in `v` on features `S x`, which the shared solver handles.

use nalgebra::{DMatrix, DVector};

use super::svm::{pegasos, BinaryProblem, LinearClassifier, SvmParams};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmtConfig {
    pub gamma: f64,
}

impl Default for PmtConfig {
    fn default() -> Self {
        PmtConfig { gamma: 100.0 }
    }
}

impl PmtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("pmt gamma must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `‖θ̃‖² sin²α` computed as the squared norm of `θ̃ − (θᵀθ̃ / ‖θ‖²) θ`.
pub fn angle_penalty(theta_t: &DVector<f64>, theta_s: &DVector<f64>) -> f64 {
    let coef = theta_s.dot(theta_t) / theta_s.dot(theta_s);
    (theta_t - theta_s * coef).norm_squared()
}

/// The same quantity through the angle itself.
pub fn angle_penalty_trig(theta_t: &DVector<f64>, theta_s: &DVector<f64>) -> f64 {
    let cos = theta_s.dot(theta_t) / (theta_s.norm() * theta_t.norm());
    theta_t.norm_squared() * (1.0 - cos * cos)
}

/// `sin²` of the angle between two hyperplane normals.
pub fn sin2_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let cos = a.dot(b) / (a.norm() * b.norm());
    (1.0 - cos * cos).max(0.0)
}

/// Fitted target classifier and its best-so-far objective per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PmtFit {
    pub classifier: LinearClassifier,
    pub objective_trace: Vec<f64>,
}

/// Summed per-class PMT objective of `clf`.
pub fn pmt_objective(
    clf: &LinearClassifier,
    source: &LinearClassifier,
    target: &LabeledDataset,
    gamma: f64,
    c_reg: f64,
) -> f64 {
    let x = target.features().as_matrix();
    (0..clf.n_classes())
        .map(|c| {
            let w = clf.weights.row(c).transpose();
            let p = BinaryProblem {
                x,
                y: target.labels().iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect(),
                weight: vec![1.0; target.len()],
            };
            let penalty = angle_penalty(&w, &source.weights.row(c).transpose());
            p.objective(c_reg, &w, clf.bias[c]) + 0.5 * c_reg * gamma * penalty
        })
        .sum()
}

/// Train the angle-regularized target classifier, one-vs-rest.
pub fn pmt_train(
    source: &LinearClassifier,
    target: &LabeledDataset,
    cfg: &PmtConfig,
    params: &SvmParams,
) -> Result<PmtFit> {
    cfg.validate()?;
    params.validate()?;
    if source.trained_dim() != target.dim() {
        return Err(Error::invalid(format!(
            "source classifier has {} features, target has {}",
            source.trained_dim(),
            target.dim()
        )));
    }
    if source.n_classes() < target.n_classes() {
        return Err(Error::invalid("source classifier has fewer classes than the target data"));
    }
    if target.classes_present().len() < 2 {
        return Err(Error::invalid("PMT needs at least two target classes"));
    }
    let d = target.dim();
    let n_classes = source.n_classes();
    let x = target.features().as_matrix();
    let shrink = 1.0 / (1.0 + cfg.gamma).sqrt();

    let mut clf = LinearClassifier::zeros(n_classes, d);
    let mut total = vec![0.0; params.epochs + 1];
    for c in 0..n_classes {
        let theta = source.weights.row(c).transpose();
        let norm2 = theta.norm_squared();
        if !(norm2 > 0.0) {
            return Err(Error::invalid(format!("source hyperplane for class {c} is zero")));
        }
        let s = if cfg.gamma == 0.0 {
            DMatrix::identity(d, d)
        } else {
            let par = &theta * theta.transpose() / norm2;
            &par + (DMatrix::identity(d, d) - &par) * shrink
        };
        let xs = x * &s;
        let problem = BinaryProblem {
            x: &xs,
            y: target.labels().iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect(),
            weight: vec![1.0; target.len()],
        };
        let mut rng = rng::stream(params.seed, c as u64);
        let start = (DVector::zeros(d), 0.0);
        let ((v, b), trace) = pegasos(&problem, params.c_reg, params.epochs, &mut rng, start);
        clf.weights.set_row(c, &(&s * v).transpose());
        clf.bias[c] = b;
        for (acc, val) in total.iter_mut().zip(trace) {
            *acc += val;
        }
    }
    Ok(PmtFit {
        classifier: clf,
        objective_trace: total,
    })
}

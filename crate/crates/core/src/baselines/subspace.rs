//! Subspace Alignment and the Geodesic Flow Kernel.
//!
//! Both fit per-domain PCA subspaces, map target rows into the source
//! coordinate frame and train the SVM on untransformed source rows.

use nalgebra::DMatrix;

use super::svm::{svm_train, SvmParams};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{check_same_shape, orthonormal_complement, pca, svd, FeatureMatrix, Subspace};

/// Angles below this use the `θ → 0` limits of the geodesic integrals.
const SMALL_ANGLE: f64 = 1e-8;

/// Closed-form alignment `M* = Uᵀ Ũ`.
pub fn sa_align(u: &Subspace, v: &Subspace) -> Result<DMatrix<f64>> {
    check_same_shape(u, v)?;
    Ok(u.basis().transpose() * v.basis())
}

/// `‖U M − Ũ‖²_F`.
pub fn sa_objective(u: &Subspace, v: &Subspace, m: &DMatrix<f64>) -> f64 {
    (u.basis() * m - v.basis()).norm_squared()
}

/// Map each row `x̃` to `U M Ũᵀ x̃`.
pub fn sa_transform(u: &Subspace, v: &Subspace, m: &DMatrix<f64>, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    check_same_shape(u, v)?;
    if x.cols() != u.ambient_dim() {
        return Err(Error::invalid("feature dimension does not match subspaces"));
    }
    let map = u.basis() * m * v.basis().transpose();
    FeatureMatrix::from_matrix(x.as_matrix() * map.transpose())
}

/// Inputs shared by the subspace baselines.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceTask<'a> {
    pub source: &'a LabeledDataset,
    pub target_unlabeled: &'a FeatureMatrix,
    pub target_test: &'a LabeledDataset,
    /// Labeled target rows, mapped like the test rows and added to training.
    pub target_labeled: Option<&'a LabeledDataset>,
}

impl SubspaceTask<'_> {
    fn check(&self) -> Result<()> {
        let d = self.source.dim();
        if self.target_unlabeled.cols() != d || self.target_test.dim() != d {
            return Err(Error::invalid("source and target feature dimensions differ"));
        }
        if let Some(l) = self.target_labeled {
            if l.dim() != d {
                return Err(Error::invalid("labeled target dimension differs"));
            }
        }
        Ok(())
    }

    fn classify_mapped<F>(&self, svm: &SvmParams, map: F) -> Result<f64>
    where
        F: Fn(&FeatureMatrix) -> Result<FeatureMatrix>,
    {
        let train = match self.target_labeled {
            Some(l) => {
                let mapped = l.with_features(map(l.features())?)?;
                LabeledDataset::concat(&[self.source, &mapped], "train")?
            }
            None => self.source.clone(),
        };
        let fit = svm_train(&train, svm)?;
        let test = self.target_test.with_features(map(self.target_test.features())?)?;
        fit.classifier.accuracy(&test)
    }
}

/// Subspace Alignment: accuracy on the mapped target test rows.
pub fn sa_adapt_and_classify(task: &SubspaceTask<'_>, k: usize, svm: &SvmParams) -> Result<f64> {
    task.check()?;
    let u = pca(task.source.features(), k)?;
    let v = pca(task.target_unlabeled, k)?;
    let m = sa_align(&u, &v)?;
    task.classify_mapped(svm, |x| sa_transform(&u, &v, &m, x))
}

/// `G = ∫₀¹ φ(t) φ(t)ᵀ dt` along the geodesic between two subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicKernel {
    pub g: DMatrix<f64>,
}

impl GeodesicKernel {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Map each row `x` to `G x`.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::invalid("feature dimension does not match kernel"));
        }
        // G is symmetric, so rows map as x Gᵀ = x G
        FeatureMatrix::from_matrix(x.as_matrix() * &self.g)
    }
}

/// `(∫cos², ∫cos·sin, ∫sin²)` of `tθ` over `t ∈ [0, 1]`.
fn geodesic_integrals(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        return (1.0, 0.0, 0.0);
    }
    let s2 = (2.0 * theta).sin() / (4.0 * theta);
    (0.5 + s2, theta.sin().powi(2) / (2.0 * theta), 0.5 - s2)
}

/// Closed-form geodesic flow kernel from `u` to `v`.
pub fn gfk_compute(u: &Subspace, v: &Subspace) -> Result<GeodesicKernel> {
    check_same_shape(u, v)?;
    let (d, k) = (u.ambient_dim(), u.dim());
    if k >= d {
        return Err(Error::invalid(format!("subspace dimension {k} must be below ambient {d}")));
    }
    let r = orthonormal_complement(u)?;
    let dec = svd(&(u.basis().transpose() * v.basis()));
    let (p1, q) = (dec.u, dec.v);
    // columns are -P2 Σ; normalize each to get P2 and read off sin θ
    let rvq = r.transpose() * v.basis() * &q;

    let a = u.basis() * &p1;
    let mut b = DMatrix::zeros(d, k);
    let mut l1 = vec![0.0; k];
    let mut l2 = vec![0.0; k];
    let mut l3 = vec![0.0; k];
    for i in 0..k {
        let sin = rvq.column(i).norm();
        let theta = sin.atan2(dec.singular_values[i]);
        if theta >= SMALL_ANGLE {
            b.set_column(i, &(&r * rvq.column(i) * (-1.0 / sin)));
        }
        (l1[i], l2[i], l3[i]) = geodesic_integrals(theta);
    }
    // φφᵀ integrates to A Λ1 Aᵀ - A Λ2 Bᵀ - B Λ2 Aᵀ + B Λ3 Bᵀ
    let scale = |m: &DMatrix<f64>, w: &[f64]| {
        let mut out = m.clone();
        for (i, mut col) in out.column_iter_mut().enumerate() {
            col *= w[i];
        }
        out
    };
    let a_l2 = scale(&a, &l2);
    let cross = &a_l2 * b.transpose();
    let g = scale(&a, &l1) * a.transpose() - &cross - cross.transpose() + scale(&b, &l3) * b.transpose();
    let g = (&g + g.transpose()) * 0.5;
    Ok(GeodesicKernel { g })
}

/// Geodesic Flow Kernel: accuracy on `G x̃`-mapped target test rows.
pub fn gfk_adapt_and_classify(task: &SubspaceTask<'_>, k: usize, svm: &SvmParams) -> Result<f64> {
    task.check()?;
    let u = pca(task.source.features(), k)?;
    let v = pca(task.target_unlabeled, k)?;
    let kernel = gfk_compute(&u, &v)?;
    task.classify_mapped(svm, |x| kernel.transform(x))
}

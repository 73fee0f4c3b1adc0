//! Classical adaptation baselines and the linear SVM they share.

mod mmdt;
mod pmt;
mod subspace;
mod svm;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::FeatureMatrix;

pub use mmdt::{mmdt_loss, mmdt_train, transform_deviation, MmdtConfig, MmdtFit};
pub use pmt::{angle_penalty, angle_penalty_trig, pmt_objective, pmt_train, sin2_angle, PmtConfig, PmtFit};
pub use subspace::{
    gfk_adapt_and_classify, gfk_compute, sa_adapt_and_classify, sa_align, sa_objective, sa_transform,
    GeodesicKernel, SubspaceTask,
};
pub use svm::{argmax_rows, svm_objective, svm_train, LinearClassifier, SvmFit, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Max,
    Interp,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(FusionMode::Max),
            "interp" => Ok(FusionMode::Interp),
            other => Err(Error::Config(format!("unknown fusion mode `{other}` (expected max or interp)"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Max => "max",
            FusionMode::Interp => "interp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub alpha: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { alpha: 0.5 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("fusion alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Combine source and target classifier scores elementwise.
pub fn late_fusion(v_s: &[f64], v_t: &[f64], mode: FusionMode, cfg: &FusionConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if v_s.len() != v_t.len() {
        return Err(Error::invalid(format!("score lengths differ: {} vs {}", v_s.len(), v_t.len())));
    }
    let a = cfg.alpha;
    Ok(v_s
        .iter()
        .zip(v_t)
        .map(|(&s, &t)| match mode {
            FusionMode::Max => s.max(t),
            FusionMode::Interp if a == 0.0 => s,
            FusionMode::Interp if a == 1.0 => t,
            FusionMode::Interp => (1.0 - a) * s + a * t,
        })
        .collect())
}

/// Feature augmentation into shared, source-only and target-only blocks:
/// source rows become `(x; x; 0)`, target rows `(x; 0; x)`.
pub fn daume_augment(x: &FeatureMatrix, is_source: bool) -> FeatureMatrix {
    let (n, d) = (x.rows(), x.cols());
    let m = x.as_matrix();
    let mut out = DMatrix::zeros(n, 3 * d);
    out.columns_mut(0, d).copy_from(m);
    let block = if is_source { d } else { 2 * d };
    out.columns_mut(block, d).copy_from(m);
    FeatureMatrix::from_matrix(out).expect("copy of a valid matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fusion_examples() {
        let cfg = FusionConfig::default();
        assert_eq!(late_fusion(&[0.2], &[0.5], FusionMode::Max, &cfg).unwrap(), vec![0.5]);
        let v = late_fusion(&[0.2], &[0.6], FusionMode::Interp, &cfg).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15);
        let (s, t) = ([0.1, -3.0, 7.5], [0.3, 2.0, -1.0]);
        assert_eq!(late_fusion(&s, &t, FusionMode::Interp, &FusionConfig { alpha: 0.0 }).unwrap(), s);
        assert_eq!(late_fusion(&s, &t, FusionMode::Interp, &FusionConfig { alpha: 1.0 }).unwrap(), t);
    }

    #[test]
    fn fusion_rejects_bad_input() {
        let cfg = FusionConfig::default();
        assert!(matches!(late_fusion(&[1.0], &[1.0, 2.0], FusionMode::Max, &cfg), Err(Error::InvalidArgument(_))));
        assert!(late_fusion(&[1.0], &[1.0], FusionMode::Interp, &FusionConfig { alpha: 1.5 }).is_err());
        assert!("mean".parse::<FusionMode>().is_err());
    }

    #[test]
    fn daume_examples() {
        let s = daume_augment(&FeatureMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), true);
        assert_eq!(s.row(0), vec![1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        let t = daume_augment(&FeatureMatrix::from_rows(&[vec![3.0]]).unwrap(), false);
        assert_eq!(t.row(0), vec![3.0, 0.0, 3.0]);
    }

    proptest! {
        #[test]
        fn fusion_interp_bounded_and_equivariant(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..12),
            alpha in 0.0f64..=1.0,
            rot in 0usize..12,
        ) {
            let cfg = FusionConfig { alpha };
            let (s, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let out = late_fusion(&s, &t, FusionMode::Interp, &cfg).unwrap();
            for i in 0..s.len() {
                let (lo, hi) = (s[i].min(t[i]), s[i].max(t[i]));
                prop_assert!(out[i] >= lo - 1e-12 && out[i] <= hi + 1e-12);
            }
            let k = rot % s.len();
            let mut s2 = s.clone();
            let mut t2 = t.clone();
            s2.rotate_left(k);
            t2.rotate_left(k);
            let mut expected = out.clone();
            expected.rotate_left(k);
            prop_assert_eq!(late_fusion(&s2, &t2, FusionMode::Interp, &cfg).unwrap(), expected);
        }

        #[test]
        fn daume_inner_products(
            x in prop::collection::vec(-8i32..8, 1..6),
            seed in 0i32..1000,
        ) {
            // integer-valued entries keep every product exact
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let z: Vec<f64> = x.iter().enumerate().map(|(i, _)| ((seed + 3 * i as i32) % 7 - 3) as f64).collect();
            let d = x.len();
            let fx = FeatureMatrix::from_rows(std::slice::from_ref(&x)).unwrap();
            let fz = FeatureMatrix::from_rows(std::slice::from_ref(&z)).unwrap();
            let dot = |a: &FeatureMatrix, b: &FeatureMatrix| a.as_matrix().row(0).dot(&b.as_matrix().row(0));
            let base: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
            let (xs, zs, zt) = (daume_augment(&fx, true), daume_augment(&fz, true), daume_augment(&fz, false));
            prop_assert_eq!(xs.cols(), 3 * d);
            prop_assert_eq!(dot(&xs, &zs), 2.0 * base);
            prop_assert_eq!(dot(&xs, &zt), base);
            prop_assert_eq!(dot(&daume_augment(&fx, false), &zt), 2.0 * base);
        }
    }
}

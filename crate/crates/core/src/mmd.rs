//! Maximum mean discrepancy estimators and MMD-driven model selection.
//!
//! Selection uses [`mmd_linear`], the distance between empirical feature
//! means, because that is the quantity the fine-tuning objective regularizes.
//! The kernel estimators are diagnostics.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    /// RBF kernel with the median-heuristic bandwidth over the pooled sample.
    pub fn rbf_median(xs: &FeatureMatrix, xt: &FeatureMatrix) -> Result<Self> {
        Self::rbf(median_heuristic_gamma(xs, xt)?)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => Self::rbf(gamma).map(|_| ()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Euclidean distance between feature means.
    MeanDistance,
    BiasedMmd2,
    UnbiasedMmd2,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::MeanDistance => "mean_distance",
            Estimator::BiasedMmd2 => "biased_mmd2",
            Estimator::UnbiasedMmd2 => "unbiased_mmd2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdReport {
    pub value: f64,
    pub estimator: Estimator,
    pub kernel: Option<KernelSpec>,
    pub n_source: usize,
    pub n_target: usize,
}

impl MmdReport {
    pub fn linear(xs: &FeatureMatrix, xt: &FeatureMatrix) -> Result<Self> {
        Ok(MmdReport {
            value: mmd_linear(xs, xt)?,
            estimator: Estimator::MeanDistance,
            kernel: None,
            n_source: xs.rows(),
            n_target: xt.rows(),
        })
    }

    pub fn kernel(
        xs: &FeatureMatrix,
        xt: &FeatureMatrix,
        kernel: KernelSpec,
        unbiased: bool,
    ) -> Result<Self> {
        Ok(MmdReport {
            value: mmd2_kernel(xs, xt, kernel, unbiased)?,
            estimator: if unbiased { Estimator::UnbiasedMmd2 } else { Estimator::BiasedMmd2 },
            kernel: Some(kernel),
            n_source: xs.rows(),
            n_target: xt.rows(),
        })
    }
}

fn check_cols(xs: &FeatureMatrix, xt: &FeatureMatrix) -> Result<()> {
    if xs.cols() != xt.cols() {
        return Err(Error::invalid(format!(
            "source has {} columns, target has {}",
            xs.cols(),
            xt.cols()
        )));
    }
    Ok(())
}

/// Euclidean distance between the row means of `xs` and `xt`.
pub fn mmd_linear(xs: &FeatureMatrix, xt: &FeatureMatrix) -> Result<f64> {
    check_cols(xs, xt)?;
    Ok((xs.column_means() - xt.column_means()).norm())
}

fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: KernelSpec) -> DMatrix<f64> {
    let mut k = a * b.transpose();
    if let KernelSpec::Rbf { gamma } = kernel {
        let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
        let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                let d2 = (na[i] + nb[j] - 2.0 * k[(i, j)]).max(0.0);
                k[(i, j)] = (-gamma * d2).exp();
            }
        }
    }
    k
}

fn off_diagonal_sum(k: &DMatrix<f64>) -> f64 {
    k.sum() - k.diagonal().sum()
}

/// Kernel two-sample statistic MMD².
///
/// The biased form averages every kernel entry and is clamped at zero. The
/// unbiased form drops the diagonals of the within-domain Gram matrices and
/// can be negative.
pub fn mmd2_kernel(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    kernel: KernelSpec,
    unbiased: bool,
) -> Result<f64> {
    check_cols(xs, xt)?;
    kernel.validate()?;
    let (m, n) = (xs.rows() as f64, xt.rows() as f64);
    let (a, b) = (xs.as_matrix(), xt.as_matrix());
    let kss = gram(a, a, kernel);
    let ktt = gram(b, b, kernel);
    let kst = gram(a, b, kernel);
    if unbiased {
        if xs.rows() < 2 || xt.rows() < 2 {
            return Err(Error::invalid("unbiased MMD needs at least two rows per side"));
        }
        Ok(off_diagonal_sum(&kss) / (m * (m - 1.0)) + off_diagonal_sum(&ktt) / (n * (n - 1.0))
            - 2.0 * kst.sum() / (m * n))
    } else {
        let v = kss.sum() / (m * m) + ktt.sum() / (n * n) - 2.0 * kst.sum() / (m * n);
        Ok(v.max(0.0))
    }
}

/// γ = 1 / (2 m²) where m is the median pairwise distance of the pooled rows.
pub fn median_heuristic_gamma(xs: &FeatureMatrix, xt: &FeatureMatrix) -> Result<f64> {
    let pooled = FeatureMatrix::vstack(&[xs, xt])?;
    let rows = pooled.to_rows();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d2: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 { dists[n / 2] } else { 0.5 * (dists[n / 2 - 1] + dists[n / 2]) };
    if !(median > 0.0) {
        return Err(Error::DegenerateData("median pairwise distance is zero".into()));
    }
    Ok(1.0 / (2.0 * median * median))
}

/// Candidate representation for [`rank_representations`].
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub name: String,
    pub source: &'a FeatureMatrix,
    pub target: &'a FeatureMatrix,
}

/// Candidates sorted by ascending [`mmd_linear`]; the first is the most
/// domain-invariant. Ties keep input order.
pub fn rank_representations(candidates: &[Candidate<'_>]) -> Result<Vec<(String, f64)>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate representations"));
    }
    let mut scored = candidates
        .iter()
        .map(|c| {
            mmd_linear(c.source, c.target)
                .map(|v| (c.name.clone(), v))
                .map_err(|e| Error::invalid(format!("candidate {}: {e}", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps input order on ties
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(scored)
}

/// Adaptation-layer activations of one trained width.
#[derive(Debug, Clone)]
pub struct WidthResult {
    pub width: usize,
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
}

/// Width whose activations have the smallest [`mmd_linear`]; ties go to the
/// smaller width.
pub fn select_width(results: &[WidthResult]) -> Result<usize> {
    select_width_scored(results).map(|(w, _)| w)
}

/// Like [`select_width`], also returning every `(width, mmd)` pair in input order.
pub fn select_width_scored(results: &[WidthResult]) -> Result<(usize, Vec<(usize, f64)>)> {
    if results.is_empty() {
        return Err(Error::invalid("no width results"));
    }
    let scored = results
        .iter()
        .map(|r| mmd_linear(&r.source, &r.target).map(|v| (r.width, v)))
        .collect::<Result<Vec<_>>>()?;
    let best = scored
        .iter()
        .min_by(|a, b| match a.1.total_cmp(&b.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        })
        .expect("non-empty");
    Ok((best.0, scored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_fm(rows: usize, cols: usize, shift: f64, seed: u64) -> FeatureMatrix {
        let mut rng = crate::rng::seeded(seed);
        let v: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        FeatureMatrix::from_row_major(rows, cols, &v).unwrap()
    }

    // Brute-force double loop over explicit kernel evaluations.
    fn oracle_mmd2(xs: &FeatureMatrix, xt: &FeatureMatrix, kernel: KernelSpec, unbiased: bool) -> f64 {
        let k = |a: &[f64], b: &[f64]| match kernel {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(),
            KernelSpec::Rbf { gamma } => {
                (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
            }
        };
        let (s, t) = (xs.to_rows(), xt.to_rows());
        let within = |set: &Vec<Vec<f64>>| {
            let mut acc = 0.0;
            for i in 0..set.len() {
                for j in 0..set.len() {
                    if !(unbiased && i == j) {
                        acc += k(&set[i], &set[j]);
                    }
                }
            }
            let n = set.len() as f64;
            acc / if unbiased { n * (n - 1.0) } else { n * n }
        };
        let mut cross = 0.0;
        for a in &s {
            for b in &t {
                cross += k(a, b);
            }
        }
        within(&s) + within(&t) - 2.0 * cross / (s.len() * t.len()) as f64
    }

    #[test]
    fn linear_examples() {
        let a = fm(&[&[1.0, 0.0]]);
        let b = fm(&[&[0.0, 1.0]]);
        assert_eq!(mmd_linear(&a, &a).unwrap(), 0.0);
        assert!((mmd_linear(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let c = fm(&[&[0.0], &[2.0]]);
        let d = fm(&[&[1.0], &[3.0]]);
        assert!((mmd_linear(&c, &d).unwrap() - 1.0).abs() < 1e-15);
        assert!(mmd_linear(&a, &c).is_err());
    }

    #[test]
    fn kernel_examples() {
        let x = random_fm(6, 3, 0.0, 1);
        for kernel in [KernelSpec::Linear, KernelSpec::rbf(0.7).unwrap()] {
            assert!(mmd2_kernel(&x, &x, kernel, false).unwrap().abs() < 1e-12);
        }
        let a = fm(&[&[1.0, 2.0]]);
        let b = fm(&[&[0.5, -1.0]]);
        let gamma = 0.3;
        let d2 = 0.25 + 9.0;
        let v = mmd2_kernel(&a, &b, KernelSpec::rbf(gamma).unwrap(), false).unwrap();
        assert!((v - (2.0 - 2.0 * (-gamma * d2).exp())).abs() < 1e-14);
        assert!(mmd2_kernel(&a, &b, KernelSpec::Linear, true).is_err());
        assert!(KernelSpec::rbf(0.0).is_err());
    }

    #[test]
    fn kernel_matches_double_loop() {
        let xs = random_fm(10, 3, 0.0, 2);
        let xt = random_fm(12, 3, 0.4, 3);
        for kernel in [KernelSpec::Linear, KernelSpec::rbf(0.5).unwrap()] {
            for unbiased in [false, true] {
                let got = mmd2_kernel(&xs, &xt, kernel, unbiased).unwrap();
                let want = oracle_mmd2(&xs, &xt, kernel, unbiased);
                assert!((got - want).abs() < 1e-10, "{kernel} {unbiased}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn median_heuristic_on_known_points() {
        // pooled distances: 1, 2, 1 -> median 1
        let xs = fm(&[&[0.0], &[1.0]]);
        let xt = fm(&[&[2.0]]);
        assert!((median_heuristic_gamma(&xs, &xt).unwrap() - 0.5).abs() < 1e-15);
        let same = fm(&[&[1.0], &[1.0]]);
        assert!(median_heuristic_gamma(&same, &same).is_err());
    }

    #[test]
    fn ranking_orders_by_shift() {
        let base = random_fm(30, 4, 0.0, 10);
        let shifted: Vec<FeatureMatrix> =
            [0.1, 1.0, 5.0].iter().map(|&s| random_fm(30, 4, s, 10)).collect();
        let cands = vec![
            Candidate { name: "big".into(), source: &base, target: &shifted[2] },
            Candidate { name: "small".into(), source: &base, target: &shifted[0] },
            Candidate { name: "mid".into(), source: &base, target: &shifted[1] },
        ];
        let ranked = rank_representations(&cands).unwrap();
        let names: Vec<&str> = ranked.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(names, ["small", "mid", "big"]);
        for (name, v) in &ranked {
            let c = cands.iter().find(|c| &c.name == name).unwrap();
            assert_eq!(*v, mmd_linear(c.source, c.target).unwrap());
        }
        assert!(rank_representations(&[]).is_err());
        let one = rank_representations(&cands[..1]).unwrap();
        assert_eq!(one[0].0, "big");
    }

    #[test]
    fn ranking_ties_keep_input_order() {
        let x = random_fm(5, 2, 0.0, 4);
        let cands = vec![
            Candidate { name: "first".into(), source: &x, target: &x },
            Candidate { name: "second".into(), source: &x, target: &x },
        ];
        let ranked = rank_representations(&cands).unwrap();
        assert_eq!(ranked[0].0, "first");
    }

    #[test]
    fn width_selection() {
        let res: Vec<WidthResult> = [(16, 0.9), (4, 0.3), (8, 0.3)]
            .iter()
            .map(|&(w, s)| WidthResult {
                width: w,
                source: random_fm(20, 3, 0.0, 5),
                target: random_fm(20, 3, s, 5),
            })
            .collect();
        // widths 4 and 8 tie exactly; the smaller wins
        assert_eq!(select_width(&res).unwrap(), 4);
        assert_eq!(select_width(&res[..1]).unwrap(), 16);
        assert!(select_width(&[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mmd_properties(seed in 0u64..10_000, m in 2usize..12, n in 2usize..12, d in 1usize..5, c in -3.0f64..3.0) {
            let xs = random_fm(m, d, 0.0, seed);
            let xt = random_fm(n, d, 0.3, seed + 1);
            let lin = mmd_linear(&xs, &xt).unwrap();
            prop_assert!((lin - mmd_linear(&xt, &xs).unwrap()).abs() < 1e-12);

            let scale = |x: &FeatureMatrix| FeatureMatrix::from_matrix(x.as_matrix() * c).unwrap();
            prop_assert!((mmd_linear(&scale(&xs), &scale(&xt)).unwrap() - c.abs() * lin).abs() < 1e-10);

            let perm: Vec<usize> = (0..m).rev().collect();
            let xp = xs.select_rows(&perm).unwrap();
            prop_assert!((mmd_linear(&xp, &xt).unwrap() - lin).abs() < 1e-12);

            let biased_lin = mmd2_kernel(&xs, &xt, KernelSpec::Linear, false).unwrap();
            prop_assert!((lin * lin - biased_lin).abs() < 1e-10);

            let rbf = KernelSpec::rbf_median(&xs, &xt).unwrap();
            for unbiased in [false, true] {
                let a = mmd2_kernel(&xs, &xt, rbf, unbiased).unwrap();
                let b = mmd2_kernel(&xt, &xs, rbf, unbiased).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                let p = mmd2_kernel(&xp, &xt, rbf, unbiased).unwrap();
                prop_assert!((a - p).abs() < 1e-12);
            }
            prop_assert!(mmd2_kernel(&xs, &xt, rbf, false).unwrap() >= -1e-12);
        }
    }
}

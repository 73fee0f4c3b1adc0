//! Labeled datasets, the feature CSV format, the split protocol and the
//! synthetic domain-shift generator.
//!
//! Feature files look like
//!
//! ```text
//! id,domain,label,f0,f1,f2
//! a0,amazon,3,0.25,1.5,-0.125
//! ```
//!
//! UTF-8, LF line endings, no quoting. All rows of one file share a domain.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<usize>,
    n_classes: usize,
    domain: String,
    ids: Vec<String>,
}

impl LabeledDataset {
    /// `n_classes` of `None` infers `max(label) + 1`.
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        n_classes: Option<usize>,
        domain: impl Into<String>,
        ids: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Data(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if ids.len() != features.rows() {
            return Err(Error::Data(format!("{} ids for {} rows", ids.len(), features.rows())));
        }
        let inferred = labels.iter().max().map_or(0, |m| m + 1);
        let n_classes = n_classes.unwrap_or(inferred);
        if inferred > n_classes {
            return Err(Error::Data(format!(
                "label {} out of range for {n_classes} classes",
                inferred - 1
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate id {id:?}")));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            n_classes,
            domain: domain.into(),
            ids,
        })
    }

    /// Dataset with generated ids `{prefix}{row}`.
    pub fn with_generated_ids(
        features: FeatureMatrix,
        labels: Vec<usize>,
        n_classes: Option<usize>,
        domain: impl Into<String>,
        prefix: &str,
    ) -> Result<Self> {
        let ids = (0..features.rows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(features, labels, n_classes, domain, ids)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn with_n_classes(mut self, n_classes: usize) -> Result<Self> {
        if self.labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::Data(format!("labels exceed {n_classes} classes")));
        }
        self.n_classes = n_classes;
        Ok(self)
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::invalid("replacement features have a different row count"));
        }
        Ok(LabeledDataset {
            features,
            ..self.clone()
        })
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(LabeledDataset {
            features: self.features.select_rows(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            domain: self.domain.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
        })
    }

    /// Concatenate datasets (possibly from different domains) under a new tag.
    pub fn concat(parts: &[&LabeledDataset], domain: &str) -> Result<Self> {
        let feats: Vec<&FeatureMatrix> = parts.iter().map(|p| &p.features).collect();
        let features = FeatureMatrix::vstack(&feats)?;
        let n_classes = parts.iter().map(|p| p.n_classes).max().unwrap_or(0);
        Self::new(
            features,
            parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            Some(n_classes),
            domain,
            parts.iter().flat_map(|p| p.ids.iter().cloned()).collect(),
        )
    }

    /// Row indices of each class, in row order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn classes_present(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }
}

/// Parse a feature CSV file.
pub fn load_features(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let file = File::open(path.as_ref())?;
    read_features(file)
}

pub fn read_features<R: std::io::Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    };
    let dim = header.len().saturating_sub(3);
    let fixed = header.len() >= 4
        && &header[0] == "id"
        && &header[1] == "domain"
        && &header[2] == "label";
    let feats_ok = (0..dim).all(|j| header[3 + j] == *format!("f{j}"));
    if !fixed || !feats_ok {
        return Err(Error::Parse {
            line: 1,
            message: "header must be id,domain,label,f0,...,f{d-1}".into(),
        });
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut domain: Option<String> = None;
    for (i, rec) in records.enumerate() {
        let fallback_line = i as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, fallback_line))?;
        let line = rec.position().map_or(fallback_line, |p| p.line());
        if rec.len() != dim + 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 3, rec.len()),
            });
        }
        match &domain {
            None => domain = Some(rec[1].to_string()),
            Some(d) if d != &rec[1] => {
                return Err(Error::Data(format!(
                    "line {line}: domain {:?} differs from {d:?}",
                    &rec[1]
                )))
            }
            _ => {}
        }
        let label: usize = rec[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("label {:?} is not a nonnegative integer", &rec[2]),
        })?;
        for j in 0..dim {
            let v: f64 = rec[3 + j].parse().map_err(|_| Error::Parse {
                line,
                message: format!("f{j} value {:?} is not a number", &rec[3 + j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}: f{j} is not finite")));
            }
            values.push(v);
        }
        ids.push(rec[0].to_string());
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Data("feature file has no rows".into()));
    }
    let features = FeatureMatrix::from_row_major(labels.len(), dim, &values)?;
    LabeledDataset::new(features, labels, None, domain.unwrap_or_default(), ids)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

/// Write `ds` in the feature CSV format. Floats use the shortest
/// representation that parses back to the same value.
pub fn save_features(path: impl AsRef<Path>, ds: &LabeledDataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write_features(&mut out, ds)?;
    out.flush()?;
    Ok(())
}

pub fn write_features<W: Write>(out: &mut W, ds: &LabeledDataset) -> Result<()> {
    let bad = |s: &str| s.contains([',', '\n', '\r']);
    if bad(&ds.domain) {
        return Err(Error::Data(format!("domain {:?} cannot be written unquoted", ds.domain)));
    }
    write!(out, "id,domain,label")?;
    for j in 0..ds.dim() {
        write!(out, ",f{j}")?;
    }
    writeln!(out)?;
    for r in 0..ds.len() {
        if bad(&ds.ids[r]) {
            return Err(Error::Data(format!("id {:?} cannot be written unquoted", ds.ids[r])));
        }
        write!(out, "{},{},{}", ds.ids[r], ds.domain, ds.labels[r])?;
        for j in 0..ds.dim() {
            write!(out, ",{}", ds.features.get(r, j))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_source_per_class: usize,
    /// Zero means unsupervised adaptation.
    pub n_target_labeled_per_class: usize,
    pub n_splits: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Amazon-style source protocol: 20 per class, 3 labeled target per class.
    pub fn office_amazon(seed: u64) -> Self {
        SplitSpec {
            n_source_per_class: 20,
            n_target_labeled_per_class: 3,
            n_splits: 5,
            seed,
        }
    }

    /// Webcam or DSLR as source: 8 per class, 3 labeled target per class.
    pub fn office_webcam_dslr(seed: u64) -> Self {
        SplitSpec {
            n_source_per_class: 8,
            ..Self::office_amazon(seed)
        }
    }

    pub fn is_supervised(&self) -> bool {
        self.n_target_labeled_per_class > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub index: usize,
    pub source_train: LabeledDataset,
    pub target_train_labeled: Option<LabeledDataset>,
    pub target_test: LabeledDataset,
    /// Every target row, labeled or not, in original order.
    pub target_unlabeled: FeatureMatrix,
}

/// Draw `spec.n_splits` random train/test splits.
///
/// Per split and class: `n_source_per_class` source rows without
/// replacement (the rest of the source is discarded) and
/// `n_target_labeled_per_class` labeled target rows; the remaining target
/// rows form the test set. Split `i` depends only on `(spec.seed, i)`.
pub fn make_splits(
    source: &LabeledDataset,
    target: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<Vec<Split>> {
    if spec.n_splits == 0 {
        return Err(Error::invalid("n_splits must be at least 1"));
    }
    if source.dim() != target.dim() {
        return Err(Error::invalid(format!(
            "source dim {} differs from target dim {}",
            source.dim(),
            target.dim()
        )));
    }
    let n_classes = source.n_classes.max(target.n_classes);
    let source = source.clone().with_n_classes(n_classes)?;
    let target = target.clone().with_n_classes(n_classes)?;
    let src_by_class = source.class_indices();
    let tgt_by_class = target.class_indices();

    for (c, idx) in src_by_class.iter().enumerate() {
        if idx.len() < spec.n_source_per_class {
            return Err(Error::Protocol(format!(
                "source class {c} has {} examples, {} required",
                idx.len(),
                spec.n_source_per_class
            )));
        }
    }
    for (c, idx) in tgt_by_class.iter().enumerate() {
        if !idx.is_empty() && idx.len() < spec.n_target_labeled_per_class + 1 {
            return Err(Error::Protocol(format!(
                "target class {c} has {} examples, {} required",
                idx.len(),
                spec.n_target_labeled_per_class + 1
            )));
        }
    }

    (0..spec.n_splits)
        .map(|index| {
            let mut rng = rng::stream(spec.seed, index as u64);
            let mut src_rows = Vec::new();
            for idx in &src_by_class {
                src_rows.extend(sample_sorted(&mut rng, idx, spec.n_source_per_class));
            }
            src_rows.sort_unstable();
            let mut labeled_rows = Vec::new();
            for idx in &tgt_by_class {
                labeled_rows.extend(sample_sorted(&mut rng, idx, spec.n_target_labeled_per_class));
            }
            labeled_rows.sort_unstable();
            let labeled_set: HashSet<usize> = labeled_rows.iter().copied().collect();
            let test_rows: Vec<usize> =
                (0..target.len()).filter(|i| !labeled_set.contains(i)).collect();

            let source_train = source.subset(&src_rows).map_err(|_| {
                Error::Protocol("split has no source examples (n_source_per_class = 0)".into())
            })?;
            let target_train_labeled = if labeled_rows.is_empty() {
                None
            } else {
                Some(target.subset(&labeled_rows)?)
            };
            Ok(Split {
                index,
                source_train,
                target_train_labeled,
                target_test: target.subset(&test_rows)?,
                target_unlabeled: target.features.clone(),
            })
        })
        .collect()
}

fn sample_sorted(rng: &mut rng::Rng, pool: &[usize], n: usize) -> Vec<usize> {
    if n == 0 || pool.is_empty() {
        return Vec::new();
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Covariate shift applied to the target domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DomainShift {
    /// Added to every target row after rotation. Empty means no offset.
    pub mean_offset: Vec<f64>,
    /// Rotation of the first two coordinates, radians.
    pub rotation_angle: f64,
}

impl DomainShift {
    /// Offset of Euclidean norm `norm` spread evenly over `dim` coordinates.
    pub fn uniform_offset(dim: usize, norm: f64, rotation_angle: f64) -> Self {
        let v = norm / (dim as f64).sqrt();
        DomainShift {
            mean_offset: vec![v; dim],
            rotation_angle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub n_per_class_source: usize,
    pub n_per_class_target: usize,
    pub shift: DomainShift,
    pub noise_sd: f64,
    /// Distance between neighbouring class means.
    pub class_sep: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_classes: 5,
            dim: 16,
            n_per_class_source: 30,
            n_per_class_target: 30,
            shift: DomainShift::default(),
            noise_sd: 0.5,
            class_sep: 4.0,
            seed: 0,
        }
    }
}

/// Class means on a scaled simplex (or a circle when `dim < n_classes`).
pub fn class_means(n_classes: usize, dim: usize, class_sep: f64) -> DMatrix<f64> {
    let mut means = DMatrix::zeros(n_classes, dim);
    if n_classes < 2 {
        return means;
    }
    if dim >= n_classes {
        let s = class_sep / 2f64.sqrt();
        let centroid = 1.0 / n_classes as f64;
        for c in 0..n_classes {
            for j in 0..n_classes {
                means[(c, j)] = s * (if c == j { 1.0 } else { 0.0 } - centroid);
            }
        }
    } else {
        let step = std::f64::consts::TAU / n_classes as f64;
        let radius = class_sep / (2.0 * (step / 2.0).sin());
        for c in 0..n_classes {
            means[(c, 0)] = radius * (step * c as f64).cos();
            if dim > 1 {
                means[(c, 1)] = radius * (step * c as f64).sin();
            }
        }
    }
    means
}

/// Generate a labeled source domain and a shifted labeled target domain.
pub fn synth_domains(spec: &SynthSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    if spec.n_classes < 1 || spec.dim < 1 || spec.n_per_class_source < 1 || spec.n_per_class_target < 1
    {
        return Err(Error::invalid("synthetic counts must be at least 1"));
    }
    if spec.shift.rotation_angle != 0.0 && spec.dim < 2 {
        return Err(Error::invalid("rotation needs dim >= 2"));
    }
    if !spec.shift.mean_offset.is_empty() && spec.shift.mean_offset.len() != spec.dim {
        return Err(Error::invalid("mean_offset length must equal dim"));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::invalid("noise_sd must be nonnegative"));
    }
    let means = class_means(spec.n_classes, spec.dim, spec.class_sep);

    let sample = |stream: u64, per_class: usize| {
        let mut rng = rng::stream(spec.seed, stream);
        let n = spec.n_classes * per_class;
        let mut x = DMatrix::zeros(n, spec.dim);
        let mut labels = Vec::with_capacity(n);
        for c in 0..spec.n_classes {
            for i in 0..per_class {
                let r = c * per_class + i;
                for j in 0..spec.dim {
                    let z: f64 = rng.sample(StandardNormal);
                    x[(r, j)] = means[(c, j)] + spec.noise_sd * z;
                }
                labels.push(c);
            }
        }
        (x, labels)
    };

    let (xs, ys) = sample(0, spec.n_per_class_source);
    let (mut xt, yt) = sample(1, spec.n_per_class_target);
    let (sin, cos) = spec.shift.rotation_angle.sin_cos();
    for mut row in xt.row_iter_mut() {
        if spec.dim >= 2 {
            let (a, b) = (row[0], row[1]);
            row[0] = cos * a - sin * b;
            row[1] = sin * a + cos * b;
        }
        for (j, off) in spec.shift.mean_offset.iter().enumerate() {
            row[j] += off;
        }
    }
    let source = LabeledDataset::with_generated_ids(
        FeatureMatrix::from_matrix(xs)?,
        ys,
        Some(spec.n_classes),
        "source",
        "s",
    )?;
    let target = LabeledDataset::with_generated_ids(
        FeatureMatrix::from_matrix(xt)?,
        yt,
        Some(spec.n_classes),
        "target",
        "t",
    )?;
    Ok((source, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmd::{mmd2_kernel, mmd_linear, KernelSpec};

    const SAMPLE: &str = "id,domain,label,f0,f1\na,amazon,0,1.5,2\nb,amazon,1,-3,0.25\nc,amazon,1,0,1e-3\n";

    #[test]
    fn reads_well_formed_file() {
        let ds = read_features(SAMPLE.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.domain(), "amazon");
        assert_eq!(ds.labels(), &[0, 1, 1]);
        assert_eq!(ds.features().get(2, 1), 1e-3);
    }

    #[test]
    fn nan_is_data_error_naming_line() {
        let text = "id,domain,label,f0\na,x,0,1\nb,x,0,NaN\n";
        match read_features(text.as_bytes()) {
            Err(Error::Data(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        let bad_header = "id,dom,label,f0\na,x,0,1\n";
        assert!(matches!(read_features(bad_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let short = "id,domain,label,f0,f1\na,x,0,1\n";
        assert!(matches!(read_features(short.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let bad_label = "id,domain,label,f0\na,x,0,1\nb,x,-1,1\n";
        assert!(matches!(read_features(bad_label.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let dup = "id,domain,label,f0\na,x,0,1\na,x,0,2\n";
        assert!(matches!(read_features(dup.as_bytes()), Err(Error::Data(_))));
        let mixed = "id,domain,label,f0\na,x,0,1\nb,y,0,2\n";
        assert!(matches!(read_features(mixed.as_bytes()), Err(Error::Data(_))));
        assert!(read_features("id,domain,label,f0\n".as_bytes()).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let (src, _) = synth_domains(&SynthSpec { dim: 3, ..SynthSpec::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("src.csv");
        save_features(&path, &src).unwrap();
        let back = load_features(&path).unwrap();
        assert_eq!(back, src);
    }

    fn tiny(n_per_class: usize, n_classes: usize, domain: &str) -> LabeledDataset {
        let n = n_per_class * n_classes;
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| i / n_per_class).collect();
        LabeledDataset::with_generated_ids(
            FeatureMatrix::from_row_major(n, 1, &values).unwrap(),
            labels,
            None,
            domain,
            &domain[..1],
        )
        .unwrap()
    }

    #[test]
    fn split_counts_and_disjointness() {
        let src = tiny(25, 4, "amazon");
        let tgt = tiny(10, 4, "webcam");
        let spec = SplitSpec::office_amazon(9);
        let splits = make_splits(&src, &tgt, &spec).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            for c in s.source_train.class_indices() {
                assert_eq!(c.len(), 20);
            }
            let lab = s.target_train_labeled.as_ref().unwrap();
            for c in lab.class_indices() {
                assert_eq!(c.len(), 3);
            }
            let lab_ids: HashSet<&String> = lab.ids().iter().collect();
            assert!(s.target_test.ids().iter().all(|id| !lab_ids.contains(id)));
            assert_eq!(lab.len() + s.target_test.len(), tgt.len());
        }
        assert_ne!(splits[0].source_train.ids(), splits[1].source_train.ids());
        assert_eq!(splits, make_splits(&src, &tgt, &spec).unwrap());
    }

    #[test]
    fn unsupervised_split_keeps_whole_target_for_test() {
        let src = tiny(8, 3, "webcam");
        let tgt = tiny(5, 3, "dslr");
        let spec = SplitSpec {
            n_target_labeled_per_class: 0,
            n_splits: 2,
            ..SplitSpec::office_webcam_dslr(1)
        };
        let splits = make_splits(&src, &tgt, &spec).unwrap();
        assert!(splits[0].target_train_labeled.is_none());
        assert_eq!(splits[0].target_test, tgt);
        assert_eq!(splits[0].source_train.len(), 24);
    }

    #[test]
    fn insufficient_class_is_protocol_error() {
        let src = tiny(5, 2, "amazon");
        let tgt = tiny(10, 2, "webcam");
        match make_splits(&src, &tgt, &SplitSpec::office_amazon(0)) {
            Err(Error::Protocol(msg)) => assert!(msg.contains("class 0")),
            other => panic!("unexpected {other:?}"),
        }
        let tgt_small = tiny(3, 2, "webcam");
        let spec = SplitSpec { n_source_per_class: 5, ..SplitSpec::office_amazon(0) };
        assert!(matches!(make_splits(&src, &tgt_small, &spec), Err(Error::Protocol(_))));
    }

    #[test]
    fn synth_is_deterministic_and_shift_shows_in_mmd() {
        let base = SynthSpec { seed: 4, ..SynthSpec::default() };
        assert_eq!(synth_domains(&base).unwrap(), synth_domains(&base).unwrap());

        let (s0, t0) = synth_domains(&base).unwrap();
        let shifted = SynthSpec {
            shift: DomainShift {
                mean_offset: {
                    let mut v = vec![0.0; 16];
                    v[0] = 5.0;
                    v
                },
                rotation_angle: 0.0,
            },
            ..base.clone()
        };
        let (s1, t1) = synth_domains(&shifted).unwrap();
        let d0 = mmd_linear(s0.features(), t0.features()).unwrap();
        let d1 = mmd_linear(s1.features(), t1.features()).unwrap();
        assert!(d0 < d1);
    }

    // Rows are stratified by class, so only the class-conditional samples are
    // IID; the unbiased statistic is checked per class.
    #[test]
    fn unshifted_domains_are_iid() {
        let vals: Vec<f64> = (0..20)
            .map(|seed| {
                let spec = SynthSpec {
                    dim: 4,
                    n_classes: 3,
                    n_per_class_source: 10,
                    n_per_class_target: 10,
                    seed,
                    ..SynthSpec::default()
                };
                let (s, t) = synth_domains(&spec).unwrap();
                let (sc, tc) = (s.class_indices(), t.class_indices());
                let per_class: Vec<f64> = (0..3)
                    .map(|c| {
                        let a = s.features().select_rows(&sc[c]).unwrap();
                        let b = t.features().select_rows(&tc[c]).unwrap();
                        let k = KernelSpec::rbf_median(&a, &b).unwrap();
                        mmd2_kernel(&a, &b, k, true).unwrap()
                    })
                    .collect();
                per_class.iter().sum::<f64>() / 3.0
            })
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
    }

    #[test]
    fn simplex_means_are_equidistant() {
        let m = class_means(5, 8, 4.0);
        for a in 0..5 {
            for b in a + 1..5 {
                let d = (m.row(a) - m.row(b)).norm();
                assert!((d - 4.0).abs() < 1e-12);
            }
        }
        let circle = class_means(6, 2, 4.0);
        assert!(((circle.row(0) - circle.row(1)).norm() - 4.0).abs() < 1e-12);
    }
}

//! Experiment runner behind the command-line tool.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptnet::{self, AdaptationNet, JointLossConfig, TrainInputs, TrainReport};
use crate::baselines::{
    argmax_rows, daume_augment, gfk_adapt_and_classify, late_fusion, mmdt_train, pmt_train,
    sa_adapt_and_classify, svm_train, SubspaceTask, SvmParams,
};
use crate::data::{load_features, make_splits, synth_domains, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::mmd::{self, mmd_linear, Candidate, WidthResult};
use crate::numerics::{default_subspace_dim, FeatureMatrix};
use crate::rng;

pub use config::{default_synthetic, parse_widths, DataSource, ExperimentConfig, KeyValues, Method};

/// Load or generate both domains, applying the configured preprocessing.
pub fn load_domains(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let (source, target) = match &cfg.data {
        DataSource::Files { source, target } => (load_features(source)?, load_features(target)?),
        DataSource::Synthetic(spec) => synth_domains(spec)?,
    };
    if source.dim() != target.dim() {
        return Err(Error::Data(format!(
            "source has {} features but target has {}",
            source.dim(),
            target.dim()
        )));
    }
    let n_classes = source.n_classes().max(target.n_classes());
    let (mut source, mut target) = (source.with_n_classes(n_classes)?, target.with_n_classes(n_classes)?);
    if cfg.l2_normalize {
        source = source.with_features(source.features().l2_normalized_rows())?;
        target = target.with_features(target.features().l2_normalized_rows())?;
    }
    Ok((source, target))
}

/// Outcome of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub index: usize,
    pub accuracy: f64,
    /// Linear MMD between source training rows and all target rows, input space.
    pub input_mmd: f64,
    /// Final adaptation-layer MMD, for network methods.
    pub adapted_mmd: Option<f64>,
    pub curve: Option<TrainReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub task: String,
    pub method: Method,
    pub splits: Vec<SplitResult>,
    pub config_echo: Vec<(String, String)>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.accuracy).collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.accuracies())
    }

    /// Sample standard deviation over `√n`; zero for a single split.
    pub fn standard_error(&self) -> f64 {
        standard_error(&self.accuracies())
    }

    /// Human-readable report. The wall-clock time sits alone in the footer.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let _ = writeln!(s, "method: {}", self.method);
        let _ = writeln!(s, "mean accuracy: {:.4} +/- {:.4} (n = {})", self.mean_accuracy(), self.standard_error(), self.splits.len());
        let _ = writeln!(s);
        let _ = writeln!(s, "split  accuracy  input_mmd  adapted_mmd");
        for r in &self.splits {
            let adapted = r.adapted_mmd.map_or("-".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(s, "{:>5}  {:>8.4}  {:>9.6}  {:>11}", r.index, r.accuracy, r.input_mmd, adapted);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "config:");
        for (k, v) in &self.config_echo {
            let _ = writeln!(s, "  {k} = {v}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[footer]");
        let _ = writeln!(s, "wall_clock_seconds: {:.3}", self.wall_clock_seconds);
        s
    }

    /// Flat `key = value` report with full-precision numbers.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task = {}", self.task);
        let _ = writeln!(s, "method = {}", self.method);
        let _ = writeln!(s, "n_splits = {}", self.splits.len());
        let _ = writeln!(s, "mean_accuracy = {}", self.mean_accuracy());
        let _ = writeln!(s, "standard_error = {}", self.standard_error());
        for r in &self.splits {
            let _ = writeln!(s, "split.{}.accuracy = {}", r.index, r.accuracy);
            let _ = writeln!(s, "split.{}.input_mmd = {}", r.index, r.input_mmd);
            if let Some(v) = r.adapted_mmd {
                let _ = writeln!(s, "split.{}.adapted_mmd = {}", r.index, v);
            }
        }
        for (k, v) in &self.config_echo {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        let _ = writeln!(s, "[footer]");
        let _ = writeln!(s, "wall_clock_seconds = {}", self.wall_clock_seconds);
        s
    }

    /// Write `report.txt`, `report.kv` and one learning curve per split.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.txt"), self.to_text().as_bytes())?;
        write_atomic(&dir.join("report.kv"), self.to_key_values().as_bytes())?;
        for r in &self.splits {
            if let Some(curve) = &r.curve {
                emit_learning_curve(curve, &dir.join(format!("curve_split{}.csv", r.index)))?;
            }
        }
        Ok(())
    }
}

/// Drop everything from the `[footer]` line on.
pub fn strip_footer(report: &str) -> &str {
    match report.find("[footer]") {
        Some(i) => &report[..i],
        None => report,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write a learning curve as `iteration,cls_loss,mmd,test_accuracy`.
pub fn emit_learning_curve(report: &TrainReport, path: &Path) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::invalid("learning curve has no records"));
    }
    let mut s = String::from("iteration,cls_loss,mmd,test_accuracy\n");
    for r in &report.records {
        let acc = r.test_accuracy.map_or(String::new(), |a| a.to_string());
        let _ = writeln!(s, "{},{},{},{}", r.iteration, r.cls_loss, r.mmd, acc);
    }
    write_atomic(path, s.as_bytes())
}

/// Seed handed to a method on split `index`.
fn split_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    rng::derive(cfg.split.seed, 0x5eed_0000 + index as u64)
}

fn svm_params(cfg: &ExperimentConfig, seed: u64) -> SvmParams {
    SvmParams { seed, ..cfg.svm }
}

fn labeled(split: &Split) -> Result<&LabeledDataset> {
    split
        .target_train_labeled
        .as_ref()
        .ok_or_else(|| Error::Config("method needs labeled target data".into()))
}

fn subspace_dim(cfg: &ExperimentConfig, split: &Split, method: Method) -> usize {
    cfg.subspace_k.unwrap_or_else(|| {
        let d = split.source_train.dim();
        let k = default_subspace_dim(d, split.source_train.len(), split.target_unlabeled.rows());
        // the geodesic needs a non-empty complement
        if method == Method::Gfk {
            k.min(d.saturating_sub(1))
        } else {
            k
        }
    })
}

/// Run one method on one split.
pub fn run_split(cfg: &ExperimentConfig, split: &Split) -> Result<SplitResult> {
    let seed = split_seed(cfg, split.index);
    let source = &split.source_train;
    let test = &split.target_test;
    let input_mmd = mmd_linear(source.features(), &split.target_unlabeled)?;
    let mut adapted_mmd = None;
    let mut curve = None;
    let accuracy = match cfg.method {
        Method::ConfusionFinetune => {
            let net = AdaptationNet::new(source.dim(), cfg.net_width, source.n_classes(), seed)?;
            let inputs = TrainInputs {
                source,
                target_labeled: split.target_train_labeled.as_ref(),
                target_unlabeled: &split.target_unlabeled,
                test: Some(test),
            };
            let loss = JointLossConfig {
                supervised: split.target_train_labeled.is_some(),
                ..cfg.loss
            };
            let report = adaptnet::train(net, &inputs, &loss, &cfg.optimizer, seed)?;
            adapted_mmd = Some(report.last().mmd);
            let acc = adaptnet::evaluate(&report.net, test)?;
            curve = Some(report);
            acc
        }
        Method::SvmSourceOnly => svm_train(source, &svm_params(cfg, seed))?.classifier.accuracy(test)?,
        Method::LateFusion => {
            let params = svm_params(cfg, seed);
            let src = svm_train(source, &params)?.classifier;
            let tgt = svm_train(labeled(split)?, &params)?.classifier;
            let (vs, vt) = (src.scores(test.features())?, tgt.scores(test.features())?);
            let mut fused = vs.clone();
            for i in 0..vs.nrows() {
                let row_s: Vec<f64> = vs.row(i).iter().copied().collect();
                let row_t: Vec<f64> = vt.row(i).iter().copied().collect();
                let f = late_fusion(&row_s, &row_t, cfg.fusion_mode, &cfg.fusion)?;
                for (j, v) in f.into_iter().enumerate() {
                    fused[(i, j)] = v;
                }
            }
            accuracy_of(&argmax_rows(&fused), test)
        }
        Method::Daume => {
            let tl = labeled(split)?;
            let src = source.with_features(daume_augment(source.features(), true))?;
            let tgt = tl.with_features(daume_augment(tl.features(), false))?;
            let train = LabeledDataset::concat(&[&src, &tgt], "augmented")?;
            let clf = svm_train(&train, &svm_params(cfg, seed))?.classifier;
            clf.accuracy(&test.with_features(daume_augment(test.features(), false))?)?
        }
        Method::Sa | Method::Gfk => {
            let task = SubspaceTask {
                source,
                target_unlabeled: &split.target_unlabeled,
                target_test: test,
                target_labeled: split.target_train_labeled.as_ref(),
            };
            let k = subspace_dim(cfg, split, cfg.method);
            if cfg.method == Method::Sa {
                sa_adapt_and_classify(&task, k, &svm_params(cfg, seed))?
            } else {
                gfk_adapt_and_classify(&task, k, &svm_params(cfg, seed))?
            }
        }
        Method::Pmt => {
            let params = svm_params(cfg, seed);
            let src = svm_train(source, &params)?.classifier;
            pmt_train(&src, labeled(split)?, &cfg.pmt, &params)?.classifier.accuracy(test)?
        }
        Method::Mmdt => mmdt_train(source, labeled(split)?, &cfg.mmdt, seed)?.target_accuracy(test)?,
    };
    Ok(SplitResult {
        index: split.index,
        accuracy,
        input_mmd,
        adapted_mmd,
        curve,
    })
}

fn accuracy_of(pred: &[usize], test: &LabeledDataset) -> f64 {
    let hits = pred.iter().zip(test.labels()).filter(|(p, l)| p == l).count();
    hits as f64 / test.len() as f64
}

/// Run every split (concurrently) and aggregate; writes outputs when the
/// config names an output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let (source, target) = load_domains(cfg)?;
    let splits = make_splits(&source, &target, &cfg.split)?;
    let splits = splits
        .par_iter()
        .map(|s| run_split(cfg, s).map_err(|e| e.in_split(s.index)))
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport {
        task: cfg.task.clone(),
        method: cfg.method,
        splits,
        config_echo: cfg.echo(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output {
        report.write(dir)?;
    }
    Ok(report)
}

/// Run every method on the same splits.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| cfg.is_supervised() || !m.needs_target_labels())
        .collect();
    methods
        .into_iter()
        .map(|method| {
            let sub = ExperimentConfig {
                method,
                output: cfg.output.as_ref().map(|d| d.join(method.name())),
                ..cfg.clone()
            };
            run_experiment(&sub)
        })
        .collect()
}

/// Summary table over several reports, plus its wall-clock footer.
pub fn benchmark_summary(reports: &[ExperimentReport]) -> String {
    let mut s = String::from("method,mean_accuracy,standard_error,n_splits\n");
    for r in reports {
        let _ = writeln!(s, "{},{},{},{}", r.method, r.mean_accuracy(), r.standard_error(), r.splits.len());
    }
    let total: f64 = reports.iter().map(|r| r.wall_clock_seconds).sum();
    let _ = writeln!(s, "[footer]");
    let _ = writeln!(s, "wall_clock_seconds = {total}");
    s
}

/// One row of a selection study.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub candidate: String,
    pub mmd: f64,
    pub accuracy: Option<f64>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
}

impl SelectionTable {
    pub fn selected(&self) -> &SelectionRow {
        self.rows.iter().find(|r| r.selected).expect("one row is always marked")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("candidate,mmd,accuracy,selected\n");
        for r in &self.rows {
            let acc = r.accuracy.map_or(String::new(), |a| a.to_string());
            let _ = writeln!(s, "{},{},{},{}", r.candidate, r.mmd, acc, u8::from(r.selected));
        }
        s
    }
}

/// Width study output: the table and the trained networks, in width order.
#[derive(Debug, Clone)]
pub struct WidthStudy {
    pub table: SelectionTable,
    pub nets: Vec<AdaptationNet>,
    /// Source training rows and target rows the MMDs were measured on.
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
}

/// Train one network per width on the first split and select the width whose
/// adaptation-layer activations have the smallest linear MMD.
pub fn width_study(cfg: &ExperimentConfig, widths: &[usize]) -> Result<WidthStudy> {
    if widths.is_empty() {
        return Err(Error::Config("no widths given".into()));
    }
    cfg.validate()?;
    let (source, target) = load_domains(cfg)?;
    let split_spec = crate::data::SplitSpec { n_splits: 1, ..cfg.split };
    let split = make_splits(&source, &target, &split_spec)?.remove(0);
    let loss = JointLossConfig {
        supervised: split.target_train_labeled.is_some(),
        ..cfg.loss
    };
    let trained = widths
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let seed = rng::derive(split_seed(cfg, 0), i as u64);
            let net = AdaptationNet::new(source.dim(), w, source.n_classes(), seed)?;
            let inputs = TrainInputs {
                source: &split.source_train,
                target_labeled: split.target_train_labeled.as_ref(),
                target_unlabeled: &split.target_unlabeled,
                test: None,
            };
            let report = adaptnet::train(net, &inputs, &loss, &cfg.optimizer, seed)?;
            let acc = adaptnet::evaluate(&report.net, &split.target_test)?;
            Ok((report.net, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = trained
        .iter()
        .zip(widths)
        .map(|((net, _), &width)| {
            Ok(WidthResult {
                width,
                source: net.adapt_activations(split.source_train.features())?,
                target: net.adapt_activations(&split.target_unlabeled)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (best, scored) = mmd::select_width_scored(&results)?;
    let mut marked = false;
    let rows = scored
        .iter()
        .zip(&trained)
        .map(|(&(width, mmd), (_, acc))| {
            let selected = !marked && width == best;
            marked |= selected;
            SelectionRow {
                candidate: width.to_string(),
                mmd,
                accuracy: Some(*acc),
                selected,
            }
        })
        .collect();
    Ok(WidthStudy {
        table: SelectionTable { rows },
        nets: trained.into_iter().map(|(n, _)| n).collect(),
        source: split.source_train.features().clone(),
        target: split.target_unlabeled.clone(),
    })
}

/// A named representation stored as a pair of feature files.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFiles {
    pub name: String,
    pub source: PathBuf,
    pub target: PathBuf,
}

/// Rank representations by linear MMD; the first (smallest) row is marked.
pub fn layer_study(layers: &[LayerFiles]) -> Result<SelectionTable> {
    if layers.is_empty() {
        return Err(Error::Config("no layers given".into()));
    }
    let loaded = layers
        .iter()
        .map(|l| Ok((l.name.clone(), load_features(&l.source)?, load_features(&l.target)?)))
        .collect::<Result<Vec<_>>>()?;
    let candidates: Vec<Candidate<'_>> = loaded
        .iter()
        .map(|(name, s, t)| Candidate {
            name: name.clone(),
            source: s.features(),
            target: t.features(),
        })
        .collect();
    let ranked = mmd::rank_representations(&candidates)?;
    Ok(SelectionTable {
        rows: ranked
            .into_iter()
            .enumerate()
            .map(|(i, (candidate, mmd))| SelectionRow {
                candidate,
                mmd,
                accuracy: None,
                selected: i == 0,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{save_features, SynthSpec};

    fn quick(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            method,
            ..ExperimentConfig::default()
        };
        cfg.optimizer.iterations = 100;
        cfg
    }

    fn zero_shift() -> DataSource {
        DataSource::Synthetic(SynthSpec::default())
    }

    #[test]
    fn source_only_on_unshifted_task() {
        let cfg = ExperimentConfig {
            data: zero_shift(),
            ..quick(Method::SvmSourceOnly)
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.splits.len(), 5);
        assert!(r.mean_accuracy() > 0.9, "{}", r.mean_accuracy());
    }

    #[test]
    fn report_statistics() {
        let cfg = ExperimentConfig {
            data: zero_shift(),
            ..quick(Method::Daume)
        };
        let r = run_experiment(&cfg).unwrap();
        let acc = r.accuracies();
        let naive = acc.iter().sum::<f64>() / acc.len() as f64;
        assert!((r.mean_accuracy() - naive).abs() < 1e-12);
        let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= r.mean_accuracy() && r.mean_accuracy() <= hi);
        let ss: f64 = acc.iter().map(|a| (a - naive) * (a - naive)).sum();
        let se = (ss / 4.0).sqrt() / 5f64.sqrt();
        assert!((r.standard_error() - se).abs() < 1e-12);
    }

    #[test]
    fn every_method_runs() {
        for method in Method::ALL {
            let mut cfg = quick(method);
            cfg.split.n_splits = 2;
            let r = run_experiment(&cfg).unwrap_or_else(|e| panic!("{method}: {e}"));
            assert!(r.mean_accuracy() > 0.3, "{method}: {}", r.mean_accuracy());
        }
    }

    #[test]
    fn supervised_methods_reject_unsupervised_splits() {
        let mut cfg = quick(Method::Pmt);
        cfg.split.n_target_labeled_per_class = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn split_errors_carry_index() {
        let mut cfg = quick(Method::Sa);
        cfg.subspace_k = Some(500);
        match run_experiment(&cfg) {
            Err(Error::Split { index, .. }) => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick(Method::ConfusionFinetune);
        cfg.split.n_splits = 2;
        cfg.output = Some(dir.path().join("a"));
        let a = run_experiment(&cfg).unwrap();
        cfg.output = Some(dir.path().join("b"));
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.splits, b.splits);
        for name in ["report.txt", "report.kv", "curve_split0.csv", "curve_split1.csv"] {
            let x = fs::read_to_string(dir.path().join("a").join(name)).unwrap();
            let y = fs::read_to_string(dir.path().join("b").join(name)).unwrap();
            assert_eq!(strip_footer(&x), strip_footer(&y), "{name}");
        }
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("a"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn learning_curve_round_trips() {
        let cfg = quick(Method::ConfusionFinetune);
        let (s, t) = load_domains(&cfg).unwrap();
        let split = make_splits(&s, &t, &cfg.split).unwrap().remove(0);
        let mut opt = cfg.optimizer;
        opt.iterations = 20;
        let net = AdaptationNet::new(s.dim(), 8, s.n_classes(), 0).unwrap();
        let inputs = TrainInputs {
            source: &split.source_train,
            target_labeled: None,
            target_unlabeled: &split.target_unlabeled,
            test: Some(&split.target_test),
        };
        let mut report = adaptnet::train(net, &inputs, &JointLossConfig::default(), &opt, 0).unwrap();
        report.records.truncate(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        emit_learning_curve(&report, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "iteration,cls_loss,mmd,test_accuracy");
        for (line, rec) in lines[1..].iter().zip(&report.records) {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f[0] as usize, rec.iteration);
            assert!((f[1] - rec.cls_loss).abs() < 1e-9);
            assert!((f[2] - rec.mmd).abs() < 1e-9);
            assert!((f[3] - rec.test_accuracy.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn width_study_marks_argmin() {
        let cfg = quick(Method::ConfusionFinetune);
        let study = width_study(&cfg, &[4, 8, 16, 32]).unwrap();
        let best = study
            .table
            .rows
            .iter()
            .min_by(|a, b| a.mmd.total_cmp(&b.mmd))
            .unwrap();
        assert_eq!(study.table.selected().candidate, best.candidate);
        let single = width_study(&cfg, &[8]).unwrap();
        assert_eq!(single.table.selected().candidate, "8");
    }

    #[test]
    fn layer_study_ranks_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut layers = Vec::new();
        for (name, rot) in [("far", 90.0), ("near", 0.0)] {
            let spec = SynthSpec {
                shift: crate::data::DomainShift::uniform_offset(16, 0.0, f64::to_radians(rot)),
                ..SynthSpec::default()
            };
            let (s, t) = synth_domains(&spec).unwrap();
            let (ps, pt) = (dir.path().join(format!("{name}_s.csv")), dir.path().join(format!("{name}_t.csv")));
            save_features(&ps, &s).unwrap();
            save_features(&pt, &t).unwrap();
            layers.push(LayerFiles { name: name.into(), source: ps, target: pt });
        }
        let table = layer_study(&layers).unwrap();
        assert_eq!(table.selected().candidate, "near");
        assert!(table.to_csv().starts_with("candidate,mmd,accuracy,selected\nnear,"));
    }
}

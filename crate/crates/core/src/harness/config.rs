//! Experiment configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment; method parameters
//! use dotted keys such as `pmt.gamma = 100`. Unknown and repeated keys are
//! errors. Relative data paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptnet::{JointLossConfig, OptimizerConfig};
use crate::baselines::{FusionConfig, FusionMode, MmdtConfig, PmtConfig, SvmParams};
use crate::data::{DomainShift, SplitSpec, SynthSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ConfusionFinetune,
    SvmSourceOnly,
    LateFusion,
    Daume,
    Sa,
    Gfk,
    Pmt,
    Mmdt,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::ConfusionFinetune,
        Method::SvmSourceOnly,
        Method::LateFusion,
        Method::Daume,
        Method::Sa,
        Method::Gfk,
        Method::Pmt,
        Method::Mmdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ConfusionFinetune => "confusion_finetune",
            Method::SvmSourceOnly => "svm_source_only",
            Method::LateFusion => "late_fusion",
            Method::Daume => "daume",
            Method::Sa => "sa",
            Method::Gfk => "gfk",
            Method::Pmt => "pmt",
            Method::Mmdt => "mmdt",
        }
    }

    /// Methods that cannot run without labeled target rows.
    pub fn needs_target_labels(self) -> bool {
        matches!(self, Method::LateFusion | Method::Daume | Method::Pmt | Method::Mmdt)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { source: PathBuf, target: PathBuf },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: String,
    pub data: DataSource,
    pub method: Method,
    pub split: SplitSpec,
    pub l2_normalize: bool,
    pub net_width: usize,
    pub loss: JointLossConfig,
    pub optimizer: OptimizerConfig,
    /// `seed` is replaced per split.
    pub svm: SvmParams,
    pub pmt: PmtConfig,
    pub mmdt: MmdtConfig,
    pub fusion_mode: FusionMode,
    pub fusion: FusionConfig,
    /// Subspace dimension for SA and GFK; chosen from the data when absent.
    pub subspace_k: Option<usize>,
    pub output: Option<PathBuf>,
}

/// The synthetic task used when a config names no feature files.
pub fn default_synthetic() -> SynthSpec {
    SynthSpec {
        shift: DomainShift::uniform_offset(16, 2.0, 30f64.to_radians()),
        ..SynthSpec::default()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: "experiment".into(),
            data: DataSource::Synthetic(default_synthetic()),
            method: Method::ConfusionFinetune,
            split: SplitSpec {
                n_source_per_class: 20,
                n_target_labeled_per_class: 3,
                n_splits: 5,
                seed: 0,
            },
            l2_normalize: false,
            net_width: 64,
            loss: JointLossConfig::default(),
            optimizer: OptimizerConfig::default(),
            svm: SvmParams::default(),
            pmt: PmtConfig::default(),
            mmdt: MmdtConfig::default(),
            fusion_mode: FusionMode::Max,
            fusion: FusionConfig::default(),
            subspace_k: None,
            output: None,
        }
    }
}

const KEYS: &[&str] = &[
    "task",
    "source",
    "target",
    "method",
    "output",
    "split.n_source_per_class",
    "split.n_target_labeled_per_class",
    "split.n_splits",
    "split.seed",
    "synthetic.n_classes",
    "synthetic.dim",
    "synthetic.n_per_class_source",
    "synthetic.n_per_class_target",
    "synthetic.rotation_deg",
    "synthetic.offset_norm",
    "synthetic.noise_sd",
    "synthetic.class_sep",
    "synthetic.seed",
    "preprocess.l2_normalize",
    "net.width",
    "train.lambda",
    "train.batch_size",
    "train.iterations",
    "train.lr",
    "train.momentum",
    "train.eval_interval",
    "svm.c_reg",
    "svm.epochs",
    "pmt.gamma",
    "mmdt.c_s",
    "mmdt.c_t",
    "mmdt.outer_iters",
    "mmdt.transform_steps",
    "fusion.mode",
    "fusion.alpha",
    "subspace.k",
];

/// Raw `key = value` pairs with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key or value")));
            }
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {line_no}: unknown key `{key}`")));
            }
            if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
                return Err(Error::Config(format!("line {line_no}: key `{key}` repeated")));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), 0));
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, (v, _))| (k.as_str(), v.as_str()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                let at = if *line > 0 { format!("line {line}: ") } else { String::new() };
                Error::Config(format!("{at}bad value `{v}` for `{key}`"))
            }),
        }
    }

    fn set_from<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Read a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_key_values(&KeyValues::parse(&text)?, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?, base_dir)
    }

    pub fn from_key_values(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        kv.set_from("task", &mut cfg.task)?;
        kv.set_from("method", &mut cfg.method)?;

        let has_synth = kv.iter().any(|(k, _)| k.starts_with("synthetic."));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        match (kv.get::<PathBuf>("source")?, kv.get::<PathBuf>("target")?) {
            (Some(s), Some(t)) => {
                if has_synth {
                    return Err(Error::Config("give either feature files or synthetic.* keys, not both".into()));
                }
                cfg.data = DataSource::Files {
                    source: resolve(s),
                    target: resolve(t),
                };
            }
            (None, None) => {
                let mut spec = default_synthetic();
                kv.set_from("synthetic.n_classes", &mut spec.n_classes)?;
                kv.set_from("synthetic.dim", &mut spec.dim)?;
                kv.set_from("synthetic.n_per_class_source", &mut spec.n_per_class_source)?;
                kv.set_from("synthetic.n_per_class_target", &mut spec.n_per_class_target)?;
                kv.set_from("synthetic.noise_sd", &mut spec.noise_sd)?;
                kv.set_from("synthetic.class_sep", &mut spec.class_sep)?;
                kv.set_from("synthetic.seed", &mut spec.seed)?;
                let rotation: f64 = kv.get("synthetic.rotation_deg")?.unwrap_or(30.0);
                let offset: f64 = kv.get("synthetic.offset_norm")?.unwrap_or(2.0);
                spec.shift = DomainShift::uniform_offset(spec.dim, offset, rotation.to_radians());
                cfg.data = DataSource::Synthetic(spec);
            }
            _ => return Err(Error::Config("`source` and `target` must be given together".into())),
        }

        kv.set_from("split.n_source_per_class", &mut cfg.split.n_source_per_class)?;
        kv.set_from("split.n_target_labeled_per_class", &mut cfg.split.n_target_labeled_per_class)?;
        kv.set_from("split.n_splits", &mut cfg.split.n_splits)?;
        kv.set_from("split.seed", &mut cfg.split.seed)?;
        kv.set_from("preprocess.l2_normalize", &mut cfg.l2_normalize)?;
        kv.set_from("net.width", &mut cfg.net_width)?;
        kv.set_from("train.lambda", &mut cfg.loss.lambda)?;
        kv.set_from("train.batch_size", &mut cfg.loss.batch_size)?;
        kv.set_from("train.iterations", &mut cfg.optimizer.iterations)?;
        kv.set_from("train.lr", &mut cfg.optimizer.base_lr)?;
        kv.set_from("train.momentum", &mut cfg.optimizer.momentum)?;
        kv.set_from("train.eval_interval", &mut cfg.optimizer.eval_interval)?;
        kv.set_from("svm.c_reg", &mut cfg.svm.c_reg)?;
        kv.set_from("svm.epochs", &mut cfg.svm.epochs)?;
        kv.set_from("pmt.gamma", &mut cfg.pmt.gamma)?;
        kv.set_from("mmdt.c_s", &mut cfg.mmdt.c_s)?;
        kv.set_from("mmdt.c_t", &mut cfg.mmdt.c_t)?;
        kv.set_from("mmdt.outer_iters", &mut cfg.mmdt.outer_iters)?;
        kv.set_from("mmdt.transform_steps", &mut cfg.mmdt.transform_steps)?;
        kv.set_from("fusion.mode", &mut cfg.fusion_mode)?;
        kv.set_from("fusion.alpha", &mut cfg.fusion.alpha)?;
        cfg.subspace_k = kv.get("subspace.k")?;
        cfg.output = kv.get::<PathBuf>("output")?.map(resolve);
        cfg.mmdt.epochs = cfg.svm.epochs;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_supervised(&self) -> bool {
        self.split.is_supervised()
    }

    /// Range and consistency checks, reported as config errors.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        if self.task.is_empty() || self.task.contains(['/', '\\']) {
            return Err(Error::Config(format!("task name `{}` must be non-empty without slashes", self.task)));
        }
        if self.method.needs_target_labels() && !self.is_supervised() {
            return Err(Error::Config(format!(
                "method {} needs labeled target data (split.n_target_labeled_per_class > 0)",
                self.method
            )));
        }
        if self.split.n_splits == 0 {
            return Err(Error::Config("split.n_splits must be at least 1".into()));
        }
        if self.net_width == 0 {
            return Err(Error::Config("net.width must be at least 1".into()));
        }
        if self.subspace_k == Some(0) {
            return Err(Error::Config("subspace.k must be at least 1".into()));
        }
        if self.optimizer.eval_interval == 0 {
            return Err(Error::Config("train.eval_interval must be at least 1".into()));
        }
        if !(self.optimizer.base_lr > 0.0) || !(0.0..1.0).contains(&self.optimizer.momentum) {
            return Err(Error::Config("train.lr must be > 0 and train.momentum in [0, 1)".into()));
        }
        self.loss.validate().map_err(cfg_err)?;
        self.svm.validate().map_err(cfg_err)?;
        self.pmt.validate().map_err(cfg_err)?;
        self.mmdt.validate().map_err(cfg_err)?;
        self.fusion.validate().map_err(cfg_err)?;
        Ok(())
    }

    /// Every setting as `key = value` pairs, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("task", self.task.clone());
        put("method", self.method.to_string());
        match &self.data {
            DataSource::Files { source, target } => {
                put("source", source.display().to_string());
                put("target", target.display().to_string());
            }
            DataSource::Synthetic(s) => {
                put("synthetic.n_classes", s.n_classes.to_string());
                put("synthetic.dim", s.dim.to_string());
                put("synthetic.n_per_class_source", s.n_per_class_source.to_string());
                put("synthetic.n_per_class_target", s.n_per_class_target.to_string());
                put("synthetic.rotation_deg", s.shift.rotation_angle.to_degrees().to_string());
                let offset: f64 = s.shift.mean_offset.iter().map(|v| v * v).sum::<f64>().sqrt();
                put("synthetic.offset_norm", offset.to_string());
                put("synthetic.noise_sd", s.noise_sd.to_string());
                put("synthetic.class_sep", s.class_sep.to_string());
                put("synthetic.seed", s.seed.to_string());
            }
        }
        put("split.n_source_per_class", self.split.n_source_per_class.to_string());
        put("split.n_target_labeled_per_class", self.split.n_target_labeled_per_class.to_string());
        put("split.n_splits", self.split.n_splits.to_string());
        put("split.seed", self.split.seed.to_string());
        put("preprocess.l2_normalize", self.l2_normalize.to_string());
        match self.method {
            Method::ConfusionFinetune => {
                put("net.width", self.net_width.to_string());
                put("train.lambda", self.loss.lambda.to_string());
                put("train.batch_size", self.loss.batch_size.to_string());
                put("train.iterations", self.optimizer.iterations.to_string());
                put("train.lr", self.optimizer.base_lr.to_string());
                put("train.momentum", self.optimizer.momentum.to_string());
                put("train.eval_interval", self.optimizer.eval_interval.to_string());
            }
            _ => {
                put("svm.c_reg", self.svm.c_reg.to_string());
                put("svm.epochs", self.svm.epochs.to_string());
            }
        }
        match self.method {
            Method::Pmt => put("pmt.gamma", self.pmt.gamma.to_string()),
            Method::Mmdt => {
                put("mmdt.c_s", self.mmdt.c_s.to_string());
                put("mmdt.c_t", self.mmdt.c_t.to_string());
                put("mmdt.outer_iters", self.mmdt.outer_iters.to_string());
                put("mmdt.transform_steps", self.mmdt.transform_steps.to_string());
            }
            Method::LateFusion => {
                put("fusion.mode", self.fusion_mode.to_string());
                put("fusion.alpha", self.fusion.alpha.to_string());
            }
            Method::Sa | Method::Gfk => {
                put("subspace.k", self.subspace_k.map_or("auto".into(), |k| k.to_string()));
            }
            _ => {}
        }
        out
    }
}

/// Width lists: `4,8,16,32`, or `start:end:xF` / `start:end:+S` ranges.
pub fn parse_widths(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad width list `{spec}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let widths: Vec<usize> = if let Some((range, step)) = spec.rsplit_once(':') {
        let (start, end) = range.split_once(':').ok_or_else(bad)?;
        let (start, end) = (num(start)?, num(end)?);
        if start == 0 || end < start {
            return Err(bad());
        }
        let step = step.trim();
        let mut out = Vec::new();
        let mut w = start;
        if let Some(f) = step.strip_prefix('x') {
            let f = num(f)?;
            if f < 2 {
                return Err(bad());
            }
            while w <= end {
                out.push(w);
                w = w.checked_mul(f).ok_or_else(bad)?;
            }
        } else if let Some(s) = step.strip_prefix('+') {
            let s = num(s)?;
            if s == 0 {
                return Err(bad());
            }
            while w <= end {
                out.push(w);
                w += s;
            }
        } else {
            return Err(bad());
        }
        out
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if widths.is_empty() || widths.contains(&0) {
        return Err(bad());
    }
    Ok(widths)
}

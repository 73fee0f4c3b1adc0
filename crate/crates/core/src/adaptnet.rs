//! Adaptation network trained with a joint classification and
//! domain-confusion objective.
//!
//! The network is `input -> backbone (affine, optional) -> adaptation layer
//! (affine + ReLU) -> classifier (affine + softmax)`. The backbone stands in
//! for pretrained lower layers: it starts at the identity and is updated at
//! learning-rate multiplier 1, while the adaptation layer and classifier are
//! trained from scratch at multiplier 10.
//!
//! The objective on one minibatch is
//!
//! ```text
//! loss = CE(labeled) + lambda * || mean(act(source_pool)) - mean(act(target_pool)) ||^2
//! ```
//!
//! where `act` is the adaptation-layer activation. Only labeled rows enter the
//! cross-entropy; both pools enter the discrepancy term.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::mmd::mmd_linear;
use crate::numerics::FeatureMatrix;
use crate::rng;

pub const BACKBONE_LR_MULTIPLIER: f64 = 1.0;
pub const ADAPT_LR_MULTIPLIER: f64 = 10.0;
pub const CLASSIFIER_LR_MULTIPLIER: f64 = 10.0;

const MAGIC: &[u8; 4] = b"DBNT";
const FORMAT_VERSION: u32 = 1;

/// Affine layer `z = W x + b`, with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub lr_multiplier: f64,
}

impl Dense {
    fn zeros(out: usize, inp: usize, lr_multiplier: f64) -> Self {
        Dense {
            weights: DMatrix::zeros(out, inp),
            bias: DVector::zeros(out),
            lr_multiplier,
        }
    }

    fn he_normal(out: usize, inp: usize, lr_multiplier: f64, rng: &mut rng::Rng) -> Self {
        let sd = (2.0 / inp as f64).sqrt();
        let weights = DMatrix::from_fn(out, inp, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        });
        Dense {
            weights,
            bias: DVector::zeros(out),
            lr_multiplier,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * self.weights.transpose();
        for mut row in z.row_iter_mut() {
            row += self.bias.transpose();
        }
        z
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        for r in 0..self.weights.nrows() {
            out.extend(self.weights.row(r).iter());
        }
        out.extend(self.bias.iter());
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let (rows, cols) = self.weights.shape();
        for r in 0..rows {
            for c in 0..cols {
                self.weights[(r, c)] = src[r * cols + c];
            }
        }
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[rows * cols..rows * cols + nb]);
        rows * cols + nb
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationNet {
    input_dim: usize,
    width: usize,
    n_classes: usize,
    pub backbone: Option<Dense>,
    pub adapt: Dense,
    pub classifier: Dense,
}

/// Activations produced by [`AdaptationNet::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// Post-ReLU adaptation-layer output, `rows × width`.
    pub adapt_activations: FeatureMatrix,
    /// Softmax class probabilities, `rows × n_classes`.
    pub class_probabilities: FeatureMatrix,
}

struct Cache {
    h0: DMatrix<f64>,
    z1: DMatrix<f64>,
    a1: DMatrix<f64>,
    probs: DMatrix<f64>,
    log_probs: DMatrix<f64>,
}

impl AdaptationNet {
    /// Fresh network: identity backbone, He-normal adaptation layer and
    /// classifier, zero biases. Deterministic in `seed`.
    pub fn new(input_dim: usize, width: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || width == 0 || n_classes == 0 {
            return Err(Error::invalid("network dimensions must be at least 1"));
        }
        let mut rng = rng::stream(seed, 0x6e6574);
        let backbone = Dense {
            weights: DMatrix::identity(input_dim, input_dim),
            bias: DVector::zeros(input_dim),
            lr_multiplier: BACKBONE_LR_MULTIPLIER,
        };
        let adapt = Dense::he_normal(width, input_dim, ADAPT_LR_MULTIPLIER, &mut rng);
        let classifier = Dense::he_normal(n_classes, width, CLASSIFIER_LR_MULTIPLIER, &mut rng);
        Ok(AdaptationNet {
            input_dim,
            width,
            n_classes,
            backbone: Some(backbone),
            adapt,
            classifier,
        })
    }

    pub fn without_backbone(mut self) -> Self {
        self.backbone = None;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.backbone.iter().chain([&self.adapt, &self.classifier])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.backbone.iter_mut().chain([&mut self.adapt, &mut self.classifier])
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    /// All parameters: per layer (backbone, adaptation, classifier) the
    /// weights row-major followed by the bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            l.push_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut at = 0;
        for l in self.layers_mut() {
            at += l.read_params(&values[at..]);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(Dense::is_finite)
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::invalid(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn adapt_forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let h0 = match &self.backbone {
            Some(b) => b.apply(x),
            None => x.clone(),
        };
        let z1 = self.adapt.apply(&h0);
        let a1 = z1.map(|v| v.max(0.0));
        (h0, z1, a1)
    }

    fn cache(&self, x: &DMatrix<f64>) -> Cache {
        let (h0, z1, a1) = self.adapt_forward(x);
        let z2 = self.classifier.apply(&a1);
        let log_probs = log_softmax_rows(&z2);
        let probs = log_probs.map(f64::exp);
        Cache {
            h0,
            z1,
            a1,
            probs,
            log_probs,
        }
    }

    pub fn forward(&self, x: &FeatureMatrix) -> Result<Forward> {
        self.check_input(x.as_matrix())?;
        let c = self.cache(x.as_matrix());
        Ok(Forward {
            adapt_activations: FeatureMatrix::from_matrix(c.a1)?,
            class_probabilities: FeatureMatrix::from_matrix(c.probs)?,
        })
    }

    /// Adaptation-layer activations only.
    pub fn adapt_activations(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_input(x.as_matrix())?;
        FeatureMatrix::from_matrix(self.adapt_forward(x.as_matrix()).2)
    }

    /// Predicted class per row; ties go to the lower class index.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        self.check_input(x.as_matrix())?;
        let c = self.cache(x.as_matrix());
        Ok(c.probs.row_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Serialize to the flat binary weight format: `DBNT`, version, then
    /// `input_dim`, `width`, `n_classes`, `has_backbone` as little-endian
    /// u32, then every parameter as little-endian f64 in [`params`] order.
    ///
    /// [`params`]: AdaptationNet::params
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.param_count());
        out.extend_from_slice(MAGIC);
        for v in [
            FORMAT_VERSION,
            self.input_dim as u32,
            self.width as u32,
            self.n_classes as u32,
            self.backbone.is_some() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Data(format!("weight file: {m}"));
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(bad("missing DBNT header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {}", word(0))));
        }
        let (input_dim, width, n_classes) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let mut net = AdaptationNet::new(input_dim, width, n_classes, 0)?;
        match word(4) {
            0 => net.backbone = None,
            1 => {}
            other => return Err(bad(&format!("backbone flag {other}"))),
        }
        let body = &bytes[24..];
        if body.len() != 8 * net.param_count() {
            return Err(bad("parameter block has the wrong length"));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        net.set_params(&params)?;
        if !net.is_finite() {
            return Err(bad("non-finite weights"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn log_softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.add_scalar_mut(-lse);
    }
    out
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(m.ncols());
    for row in m.row_iter() {
        acc += row.transpose();
    }
    acc / m.nrows() as f64
}

fn column_sum(m: &DMatrix<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(m.ncols());
    for row in m.row_iter() {
        acc += row.transpose();
    }
    acc
}

/// Gradient of the joint loss, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub backbone: Option<Dense>,
    pub adapt: Dense,
    pub classifier: Dense,
}

impl Gradient {
    fn zeros_like(net: &AdaptationNet) -> Self {
        let z = |l: &Dense| Dense::zeros(l.weights.nrows(), l.weights.ncols(), l.lr_multiplier);
        Gradient {
            backbone: net.backbone.as_ref().map(z),
            adapt: z(&net.adapt),
            classifier: z(&net.classifier),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.backbone.iter().chain([&self.adapt, &self.classifier])
    }

    /// Flattened in the same order as [`AdaptationNet::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in self.layers() {
            l.push_params(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLossConfig {
    pub lambda: f64,
    /// Rows per minibatch, split evenly between source and target pools.
    pub batch_size: usize,
    /// Whether labeled target rows join the classification term.
    pub supervised: bool,
}

impl Default for JointLossConfig {
    fn default() -> Self {
        JointLossConfig {
            lambda: 0.25,
            batch_size: 64,
            supervised: false,
        }
    }
}

impl JointLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size < 2 || !self.batch_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "batch_size must be even and >= 2, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// One evaluation of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub cross_entropy: f64,
    /// Linear MMD between pooled adaptation activations (not squared).
    pub mmd: f64,
    pub total: f64,
}

/// Minibatch for the joint objective.
#[derive(Debug, Clone, Copy)]
pub struct JointBatch<'a> {
    /// Rows entering the cross-entropy.
    pub labeled: &'a LabeledDataset,
    pub source_pool: &'a FeatureMatrix,
    pub target_pool: &'a FeatureMatrix,
}

struct RawBatch<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    source_pool: &'a DMatrix<f64>,
    target_pool: &'a DMatrix<f64>,
}

impl<'a> JointBatch<'a> {
    fn raw(&self, net: &AdaptationNet) -> Result<RawBatch<'a>> {
        if self.labeled.is_empty() {
            return Err(Error::invalid("labeled batch is empty"));
        }
        for m in [self.labeled.features(), self.source_pool, self.target_pool] {
            net.check_input(m.as_matrix())?;
        }
        if self.labeled.labels().iter().any(|&l| l >= net.n_classes) {
            return Err(Error::invalid("label exceeds the network's class count"));
        }
        Ok(RawBatch {
            x: self.labeled.features().as_matrix(),
            y: self.labeled.labels(),
            source_pool: self.source_pool.as_matrix(),
            target_pool: self.target_pool.as_matrix(),
        })
    }
}

fn loss_terms_raw(net: &AdaptationNet, b: &RawBatch<'_>, lambda: f64) -> LossTerms {
    let c = net.cache(b.x);
    let ce = -b
        .y
        .iter()
        .enumerate()
        .map(|(i, &y)| c.log_probs[(i, y)])
        .sum::<f64>()
        / b.y.len() as f64;
    let a_s = net.adapt_forward(b.source_pool).2;
    let a_t = net.adapt_forward(b.target_pool).2;
    let mmd = (column_mean(&a_s) - column_mean(&a_t)).norm();
    LossTerms {
        cross_entropy: ce,
        mmd,
        total: ce + lambda * mmd * mmd,
    }
}

/// Backpropagate `d_a1` (gradient w.r.t. post-ReLU adaptation activations)
/// into the adaptation layer and backbone.
fn backprop_adapt(
    net: &AdaptationNet,
    x: &DMatrix<f64>,
    h0: &DMatrix<f64>,
    z1: &DMatrix<f64>,
    mut d_a1: DMatrix<f64>,
    g: &mut Gradient,
) {
    d_a1.zip_apply(z1, |d, z| {
        if z <= 0.0 {
            *d = 0.0
        }
    });
    let d_z1 = d_a1;
    g.adapt.weights += d_z1.transpose() * h0;
    g.adapt.bias += column_sum(&d_z1);
    if let (Some(gb), Some(_)) = (g.backbone.as_mut(), net.backbone.as_ref()) {
        let d_h0 = &d_z1 * &net.adapt.weights;
        gb.weights += d_h0.transpose() * x;
        gb.bias += column_sum(&d_h0);
    }
}

fn gradient_raw(net: &AdaptationNet, b: &RawBatch<'_>, lambda: f64) -> Gradient {
    let mut g = Gradient::zeros_like(net);

    // cross-entropy
    let c = net.cache(b.x);
    let n = b.y.len() as f64;
    let mut d_z2 = c.probs.clone();
    for (i, &y) in b.y.iter().enumerate() {
        d_z2[(i, y)] -= 1.0;
    }
    d_z2 /= n;
    g.classifier.weights += d_z2.transpose() * &c.a1;
    g.classifier.bias += column_sum(&d_z2);
    let d_a1 = &d_z2 * &net.classifier.weights;
    backprop_adapt(net, b.x, &c.h0, &c.z1, d_a1, &mut g);

    // lambda * ||mean(a_s) - mean(a_t)||^2
    if lambda != 0.0 {
        let (h_s, z_s, a_s) = net.adapt_forward(b.source_pool);
        let (h_t, z_t, a_t) = net.adapt_forward(b.target_pool);
        let delta = column_mean(&a_s) - column_mean(&a_t);
        let rows = |m: usize, scale: f64| {
            let r = (&delta * scale).transpose();
            DMatrix::from_fn(m, delta.len(), |_, j| r[j])
        };
        let ns = a_s.nrows();
        let nt = a_t.nrows();
        backprop_adapt(net, b.source_pool, &h_s, &z_s, rows(ns, 2.0 * lambda / ns as f64), &mut g);
        backprop_adapt(net, b.target_pool, &h_t, &z_t, rows(nt, -2.0 * lambda / nt as f64), &mut g);
    }
    g
}

pub fn loss_terms(net: &AdaptationNet, batch: &JointBatch<'_>, cfg: &JointLossConfig) -> Result<LossTerms> {
    cfg.validate()?;
    Ok(loss_terms_raw(net, &batch.raw(net)?, cfg.lambda))
}

/// Cross-entropy over `batch.labeled` plus `lambda * MMD²` between the
/// adaptation activations of the two pools.
pub fn joint_loss(net: &AdaptationNet, batch: &JointBatch<'_>, cfg: &JointLossConfig) -> Result<f64> {
    loss_terms(net, batch, cfg).map(|t| t.total)
}

/// Analytic gradient of [`joint_loss`] with respect to every parameter.
pub fn gradient(net: &AdaptationNet, batch: &JointBatch<'_>, cfg: &JointLossConfig) -> Result<Gradient> {
    cfg.validate()?;
    Ok(gradient_raw(net, &batch.raw(net)?, cfg.lambda))
}

/// Worst coordinate-wise relative error `|a - f| / max(|a|, |f|, 1e-8)`
/// between the analytic gradient `a` and central differences `f`.
pub fn grad_check(
    net: &AdaptationNet,
    batch: &JointBatch<'_>,
    cfg: &JointLossConfig,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    cfg.validate()?;
    let raw = batch.raw(net)?;
    let analytic = gradient_raw(net, &raw, cfg.lambda).flatten();
    let base = net.params();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst = 0.0_f64;
    for (i, &a) in analytic.iter().enumerate() {
        params[i] = base[i] + step;
        probe.set_params(&params)?;
        let up = loss_terms_raw(&probe, &raw, cfg.lambda).total;
        params[i] = base[i] - step;
        probe.set_params(&params)?;
        let down = loss_terms_raw(&probe, &raw, cfg.lambda).total;
        params[i] = base[i];
        let f = (up - down) / (2.0 * step);
        let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Randomized tiny problem used for gradient verification.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub net: AdaptationNet,
    pub labeled: LabeledDataset,
    pub source_pool: FeatureMatrix,
    pub target_pool: FeatureMatrix,
    pub cfg: JointLossConfig,
}

impl GradCheckCase {
    /// Input dim 2..=6, width 1..=4, 2..=4 classes, lambda cycling through
    /// {0, 0.25, 2}, with a perturbed (non-identity) backbone.
    pub fn random(seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, 0x6763);
        let dim = rng.random_range(2..=6);
        let width = rng.random_range(1..=4);
        let n_classes = rng.random_range(2..=4);
        let lambda = [0.0, 0.25, 2.0][(seed % 3) as usize];
        let mut net = AdaptationNet::new(dim, width, n_classes, seed)?;
        let params: Vec<f64> = net
            .params()
            .into_iter()
            .map(|p| {
                let z: f64 = rng.sample(StandardNormal);
                p + 0.3 * z
            })
            .collect();
        net.set_params(&params)?;
        let mat = |rng: &mut rng::Rng, rows: usize, shift: f64| {
            let v: Vec<f64> = (0..rows * dim)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z + shift
                })
                .collect();
            FeatureMatrix::from_row_major(rows, dim, &v)
        };
        let n_lab = rng.random_range(2..=6);
        let x_lab = mat(&mut rng, n_lab, 0.0)?;
        let n_src = rng.random_range(2..=6);
        let source_pool = mat(&mut rng, n_src, 0.0)?;
        let n_tgt = rng.random_range(2..=6);
        let target_pool = mat(&mut rng, n_tgt, 0.5)?;
        let labels = (0..n_lab).map(|_| rng.random_range(0..n_classes)).collect();
        let labeled =
            LabeledDataset::with_generated_ids(x_lab, labels, Some(n_classes), "check", "g")?;
        Ok(GradCheckCase {
            net,
            labeled,
            source_pool,
            target_pool,
            cfg: JointLossConfig {
                lambda,
                batch_size: 2,
                supervised: false,
            },
        })
    }

    pub fn batch(&self) -> JointBatch<'_> {
        JointBatch {
            labeled: &self.labeled,
            source_pool: &self.source_pool,
            target_pool: &self.target_pool,
        }
    }

    pub fn max_relative_error(&self, step: f64) -> Result<f64> {
        grad_check(&self.net, &self.batch(), &self.cfg, step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub eval_interval: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            base_lr: 1e-3,
            momentum: 0.9,
            iterations: 1000,
            eval_interval: 10,
        }
    }
}

/// SGD with momentum and per-layer learning-rate multipliers:
/// `v <- momentum * v - base_lr * multiplier * g; w <- w + v`.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    base_lr: f64,
    momentum: f64,
    velocity: Gradient,
}

impl SgdMomentum {
    pub fn new(net: &AdaptationNet, base_lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            base_lr,
            momentum,
            velocity: Gradient::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut AdaptationNet, grad: &Gradient) {
        let (lr, mu) = (self.base_lr, self.momentum);
        let update = |layer: &mut Dense, v: &mut Dense, g: &Dense| {
            let rate = lr * layer.lr_multiplier;
            v.weights *= mu;
            v.weights -= &g.weights * rate;
            v.bias *= mu;
            v.bias -= &g.bias * rate;
            layer.weights += &v.weights;
            layer.bias += &v.bias;
        };
        if let (Some(l), Some(v), Some(g)) =
            (net.backbone.as_mut(), self.velocity.backbone.as_mut(), grad.backbone.as_ref())
        {
            update(l, v, g);
        }
        update(&mut net.adapt, &mut self.velocity.adapt, &grad.adapt);
        update(&mut net.classifier, &mut self.velocity.classifier, &grad.classifier);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    /// Cross-entropy over the full labeled training set.
    pub cls_loss: f64,
    /// Linear MMD between activations of all source rows and all target pool rows.
    pub mmd: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
    pub net: AdaptationNet,
    pub seed: u64,
}

impl TrainReport {
    pub fn last(&self) -> &TrainRecord {
        self.records.last().expect("reports always hold the initial record")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub source: &'a LabeledDataset,
    /// Present exactly when training is supervised.
    pub target_labeled: Option<&'a LabeledDataset>,
    /// Every available target row; feeds the discrepancy term.
    pub target_unlabeled: &'a FeatureMatrix,
    /// Scored at each evaluation when given.
    pub test: Option<&'a LabeledDataset>,
}

/// Draw `n` indices from `0..len`: without replacement when the pool is large
/// enough, with replacement otherwise.
fn draw(rng: &mut rng::Rng, len: usize, n: usize) -> Vec<usize> {
    if len >= n {
        rand::seq::index::sample(rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Minibatch SGD on the joint objective.
///
/// Every iteration draws `batch_size / 2` source rows and `batch_size / 2`
/// target-pool rows for the discrepancy term. The source half is also the
/// labeled classification set; in the supervised regime up to
/// `batch_size / 2` labeled target rows join it.
pub fn train(
    mut net: AdaptationNet,
    inputs: &TrainInputs<'_>,
    cfg: &JointLossConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.supervised != inputs.target_labeled.is_some() {
        return Err(Error::invalid(if cfg.supervised {
            "supervised training needs labeled target data"
        } else {
            "labeled target data given to unsupervised training"
        }));
    }
    if opt.eval_interval == 0 {
        return Err(Error::invalid("eval_interval must be at least 1"));
    }
    if !(opt.base_lr > 0.0) || !(0.0..1.0).contains(&opt.momentum) {
        return Err(Error::invalid("base_lr must be > 0 and momentum in [0, 1)"));
    }
    for m in [inputs.source.features(), inputs.target_unlabeled] {
        net.check_input(m.as_matrix())?;
    }
    let labeled_all = match inputs.target_labeled {
        Some(t) => LabeledDataset::concat(&[inputs.source, t], "labeled")?,
        None => inputs.source.clone(),
    };
    if labeled_all.labels().iter().any(|&l| l >= net.n_classes) {
        return Err(Error::invalid("label exceeds the network's class count"));
    }

    let evaluate_now = |net: &AdaptationNet, iteration: usize| -> Result<TrainRecord> {
        let cls_loss = loss_terms_raw(
            net,
            &RawBatch {
                x: labeled_all.features().as_matrix(),
                y: labeled_all.labels(),
                source_pool: inputs.source.features().as_matrix(),
                target_pool: inputs.target_unlabeled.as_matrix(),
            },
            0.0,
        )
        .cross_entropy;
        let mmd = mmd_linear(
            &net.adapt_activations(inputs.source.features())?,
            &net.adapt_activations(inputs.target_unlabeled)?,
        )?;
        let test_accuracy = inputs.test.map(|t| evaluate(net, t)).transpose()?;
        if !cls_loss.is_finite() || !mmd.is_finite() {
            return Err(Error::TrainingDiverged { iteration });
        }
        Ok(TrainRecord {
            iteration,
            cls_loss,
            mmd,
            test_accuracy,
        })
    };

    let mut rng = rng::stream(seed, 0x7472);
    let mut sgd = SgdMomentum::new(&net, opt.base_lr, opt.momentum);
    let half = cfg.batch_size / 2;
    let src = inputs.source.features().as_matrix();
    let tgt = inputs.target_unlabeled.as_matrix();
    let mut records = vec![evaluate_now(&net, 0)?];

    for it in 1..=opt.iterations {
        let si = draw(&mut rng, src.nrows(), half);
        let ti = draw(&mut rng, tgt.nrows(), half);
        let xs = src.select_rows(&si);
        let xt = tgt.select_rows(&ti);
        let mut ys: Vec<usize> = si.iter().map(|&i| inputs.source.labels()[i]).collect();
        let x_lab = match inputs.target_labeled {
            Some(t) => {
                let li = draw(&mut rng, t.len(), half.min(t.len()));
                ys.extend(li.iter().map(|&i| t.labels()[i]));
                let xl = t.features().as_matrix().select_rows(&li);
                let mut stacked = DMatrix::zeros(xs.nrows() + xl.nrows(), xs.ncols());
                stacked.rows_mut(0, xs.nrows()).copy_from(&xs);
                stacked.rows_mut(xs.nrows(), xl.nrows()).copy_from(&xl);
                stacked
            }
            None => xs.clone(),
        };
        let batch = RawBatch {
            x: &x_lab,
            y: &ys,
            source_pool: &xs,
            target_pool: &xt,
        };
        let terms = loss_terms_raw(&net, &batch, cfg.lambda);
        if !terms.total.is_finite() {
            return Err(Error::TrainingDiverged { iteration: it });
        }
        let g = gradient_raw(&net, &batch, cfg.lambda);
        sgd.step(&mut net, &g);
        if !net.is_finite() {
            return Err(Error::TrainingDiverged { iteration: it });
        }
        if it % opt.eval_interval == 0 || it == opt.iterations {
            records.push(evaluate_now(&net, it)?);
        }
    }
    Ok(TrainReport { records, net, seed })
}

/// Fraction of rows whose most probable class equals the label.
pub fn evaluate(net: &AdaptationNet, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let pred = net.predict(test.features())?;
    Ok(accuracy(&pred, test.labels()))
}

pub(crate) fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

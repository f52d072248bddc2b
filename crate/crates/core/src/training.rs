//! Adversarial adaptation loop, supervised baselines and evaluation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dataio::{fit_norm_stats, DomainTag, LabelledWindow, NormStats, PolarVector, Window};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::losses::{disc_loss, DomainRoles, GeneratorTerms, LossReport, LossWeights, TermMask};
use crate::models::{batch_tensor, label_tensor, ModelBundle, ModelConfig, Trainable};
use crate::nn::{Adam, AdamConfig, Graph};

/// Every key a training config file must define.
pub const CONFIG_KEYS: [&str; 19] = [
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lr",
    "batch_size",
    "steps",
    "disc_steps_per_gen_step",
    "seed",
    "window",
    "d_z",
    "enc_hidden",
    "gen_hidden",
    "pred_hidden",
    "disc_channels",
    "disc_hidden",
    "source",
    "target",
    "checkpoint_every",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub disc_steps_per_gen_step: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub source: DomainTag,
    pub target: DomainTag,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    /// Defaults for a source/target pair.
    pub fn new(source: DomainTag, target: DomainTag) -> Self {
        Self {
            weights: LossWeights::default(),
            lr: 1e-3,
            batch_size: 32,
            steps: 2000,
            disc_steps_per_gen_step: 1,
            seed: 0,
            model: ModelConfig::default(),
            source,
            target,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.model.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::usage("lr must be positive"));
        }
        if self.batch_size == 0 || self.disc_steps_per_gen_step == 0 {
            return Err(Error::usage("batch_size and disc_steps_per_gen_step must be positive"));
        }
        if self.source == self.target {
            return Err(Error::usage("source and target domains must differ"));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        for key in kv.keys() {
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::usage(format!("unknown config key `{key}`")));
            }
        }
        let config = Self {
            weights: LossWeights {
                lambda1: kv.get("lambda1")?,
                lambda2: kv.get("lambda2")?,
                lambda3: kv.get("lambda3")?,
                lambda4: kv.get("lambda4")?,
            },
            lr: kv.get("lr")?,
            batch_size: kv.get("batch_size")?,
            steps: kv.get("steps")?,
            disc_steps_per_gen_step: kv.get("disc_steps_per_gen_step")?,
            seed: kv.get("seed")?,
            model: ModelConfig {
                n: kv.get("window")?,
                d_z: kv.get("d_z")?,
                enc_hidden: kv.get("enc_hidden")?,
                gen_hidden: kv.get("gen_hidden")?,
                pred_hidden: kv.get("pred_hidden")?,
                disc_channels: kv.get("disc_channels")?,
                disc_hidden: kv.get("disc_hidden")?,
            },
            source: DomainTag::new(kv.get::<String>("source")?)?,
            target: DomainTag::new(kv.get::<String>("target")?)?,
            checkpoint_every: kv.get("checkpoint_every")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text).map_err(|e| Error::usage(e.to_string()))?)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("lambda1", self.weights.lambda1);
        kv.insert("lambda2", self.weights.lambda2);
        kv.insert("lambda3", self.weights.lambda3);
        kv.insert("lambda4", self.weights.lambda4);
        kv.insert("lr", self.lr);
        kv.insert("batch_size", self.batch_size);
        kv.insert("steps", self.steps);
        kv.insert("disc_steps_per_gen_step", self.disc_steps_per_gen_step);
        kv.insert("seed", self.seed);
        kv.insert("window", self.model.n);
        kv.insert("d_z", self.model.d_z);
        kv.insert("enc_hidden", self.model.enc_hidden);
        kv.insert("gen_hidden", self.model.gen_hidden);
        kv.insert("pred_hidden", self.model.pred_hidden);
        kv.insert("disc_channels", self.model.disc_channels);
        kv.insert("disc_hidden", self.model.disc_hidden);
        kv.insert("source", &self.source);
        kv.insert("target", &self.target);
        kv.insert("checkpoint_every", self.checkpoint_every);
        kv
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }

    fn roles(&self) -> DomainRoles {
        DomainRoles {
            source: self.source.clone(),
            target: self.target.clone(),
        }
    }
}

/// Result of a training run, with the normalization statistics fitted on
/// each domain's training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub norms: BTreeMap<DomainTag, NormStats>,
    pub history: Vec<LossReport>,
}

impl Trained {
    pub fn norm(&self, domain: &DomainTag) -> Result<&NormStats> {
        self.norms
            .get(domain)
            .ok_or_else(|| Error::usage(format!("no normalization statistics for domain `{domain}`")))
    }
}

/// Epoch-wise shuffled index stream.
struct Sampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl Sampler {
    fn new(len: usize, rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            order: (0..len).collect(),
            pos: len,
        }
    }

    fn batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const INIT_STREAM: u64 = 1;
const SOURCE_STREAM: u64 = 2;
const TARGET_STREAM: u64 = 3;

/// Called after every generator step with the step index (from 1), the
/// current parameters and the step's losses.
pub type StepHook<'a> = dyn FnMut(usize, &ModelBundle, &LossReport) -> Result<()> + 'a;

/// Owns the parameters and optimizer state of one run.
pub struct Trainer {
    pub config: TrainConfig,
    pub bundle: ModelBundle,
    adams: BTreeMap<String, Adam>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, INIT_STREAM);
        let bundle = ModelBundle::init(
            config.model.clone(),
            &[config.source.clone(), config.target.clone()],
            &mut rng,
        )?;
        Ok(Self {
            config,
            bundle,
            adams: BTreeMap::new(),
        })
    }

    fn apply(&mut self, grads: BTreeMap<String, crate::nn::GradMap>) -> Result<()> {
        let adam_config = AdamConfig {
            lr: self.config.lr,
            ..AdamConfig::default()
        };
        for (set, g) in grads {
            let params = self
                .bundle
                .set_mut(&set)
                .ok_or_else(|| Error::usage(format!("unknown parameter set `{set}`")))?;
            self.adams
                .entry(set)
                .or_insert_with(|| Adam::new(adam_config))
                .step(params, &g)?;
        }
        Ok(())
    }

    /// One discriminator update on normalized batches. Returns the
    /// discriminator loss.
    pub fn disc_step(&mut self, x_s: &[&Window], x_t: &[&Window]) -> Result<f64> {
        let n = self.config.model.n;
        let roles = self.config.roles();
        let g = Graph::new();
        let b = self.bundle.bind(&g, Trainable::Discriminators);
        let xs = g.constant(batch_tensor(x_s.iter().copied(), n)?);
        let xt = g.constant(batch_tensor(x_t.iter().copied(), n)?);
        let fake_t = b.generate(&g, b.encode(&g, xs)?, &roles.target)?;
        let fake_s = b.generate(&g, b.encode(&g, xt)?, &roles.source)?;
        let loss = disc_loss(&g, &b, xs, xt, fake_s, fake_t, &roles)?;
        let value = g.item(loss);
        if !value.is_finite() {
            return Err(Error::numeric("discriminator loss is not finite"));
        }
        let grads = b.grads(&g, &g.backward(loss)?);
        self.apply(grads)?;
        Ok(value)
    }

    /// One update of encoder, generators, decoder and predictor on the
    /// masked objective.
    pub fn gen_step(
        &mut self,
        x_s: &[&Window],
        y_s: &[PolarVector],
        x_t: &[&Window],
        mask: TermMask,
    ) -> Result<LossReport> {
        let n = self.config.model.n;
        let g = Graph::new();
        let b = self.bundle.bind(&g, Trainable::Generators);
        let xs = g.constant(batch_tensor(x_s.iter().copied(), n)?);
        let ys = g.constant(label_tensor(y_s));
        let xt = g.constant(batch_tensor(x_t.iter().copied(), n)?);
        let terms = GeneratorTerms::compute(&g, &b, xs, ys, xt, &self.config.roles(), mask)?;
        let total = terms.total(&g, &self.config.weights)?;
        let report = terms.report(&g, &self.config.weights);
        if !g.item(total).is_finite() {
            return Err(Error::numeric("training loss is not finite"));
        }
        let grads = b.grads(&g, &g.backward(total)?);
        self.apply(grads)?;
        Ok(report)
    }

    fn run(
        &mut self,
        source: &[LabelledWindow],
        target: &[Window],
        mask: TermMask,
        hook: &mut StepHook<'_>,
    ) -> Result<Vec<LossReport>> {
        let mut src = Sampler::new(source.len(), stream(self.config.seed, SOURCE_STREAM));
        let mut tgt = Sampler::new(target.len(), stream(self.config.seed, TARGET_STREAM));
        let bs = self.config.batch_size;
        let mut history = Vec::with_capacity(self.config.steps);
        for step in 1..=self.config.steps {
            if mask.gan {
                for _ in 0..self.config.disc_steps_per_gen_step {
                    let xs: Vec<&Window> = src.batch(bs).into_iter().map(|i| &source[i].window).collect();
                    let xt: Vec<&Window> = tgt.batch(bs).into_iter().map(|i| &target[i]).collect();
                    self.disc_step(&xs, &xt)?;
                }
            }
            let idx = src.batch(bs);
            let xs: Vec<&Window> = idx.iter().map(|i| &source[*i].window).collect();
            let ys: Vec<PolarVector> = idx.iter().map(|i| source[*i].label).collect();
            let xt: Vec<&Window> = tgt.batch(bs).into_iter().map(|i| &target[i]).collect();
            let report = self.gen_step(&xs, &ys, &xt, mask)?;
            hook(step, &self.bundle, &report)?;
            history.push(report);
        }
        Ok(history)
    }
}

fn normalize_labelled(norm: &NormStats, set: &[LabelledWindow]) -> Vec<LabelledWindow> {
    set.iter()
        .map(|lw| LabelledWindow {
            window: norm.apply(&lw.window),
            label: lw.label,
        })
        .collect()
}

fn check_windows(config: &TrainConfig, windows: impl Iterator<Item = usize>) -> Result<()> {
    for len in windows {
        if len != config.model.n {
            return Err(Error::usage(format!(
                "window of {len} frames, config expects {}",
                config.model.n
            )));
        }
    }
    Ok(())
}

/// Adapt from labelled source windows to unlabelled target windows.
pub fn train_adapt(source: &[LabelledWindow], target: &[Window], config: &TrainConfig) -> Result<Trained> {
    train_adapt_with(source, target, config, TermMask::ALL, &mut |_, _, _| Ok(()))
}

/// [`train_adapt`] with a term mask and a per-step hook.
pub fn train_adapt_with(
    source: &[LabelledWindow],
    target: &[Window],
    config: &TrainConfig,
    mask: TermMask,
    hook: &mut StepHook<'_>,
) -> Result<Trained> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::usage("training needs non-empty source and target sets"));
    }
    check_windows(config, source.iter().map(|lw| lw.window.len()).chain(target.iter().map(Window::len)))?;
    let raw: Vec<Window> = source.iter().map(|lw| lw.window.clone()).collect();
    let source_norm = fit_norm_stats(&raw)?;
    let target_norm = fit_norm_stats(target)?;
    let source = normalize_labelled(&source_norm, source);
    let target: Vec<Window> = target.iter().map(|w| target_norm.apply(w)).collect();
    let mut trainer = Trainer::new(config.clone())?;
    let history = trainer.run(&source, &target, mask, hook)?;
    let norms = [(config.source.clone(), source_norm), (config.target.clone(), target_norm)].into();
    Ok(Trained {
        bundle: trainer.bundle,
        norms,
        history,
    })
}

/// Encoder and predictor trained on labelled windows with the prediction
/// term alone (weighted by `lambda2`). Used for the source-only and
/// target-only baselines.
pub fn train_supervised(labelled: &[LabelledWindow], config: &TrainConfig) -> Result<Trained> {
    train_supervised_with(labelled, config, &mut |_, _, _| Ok(()))
}

pub fn train_supervised_with(
    labelled: &[LabelledWindow],
    config: &TrainConfig,
    hook: &mut StepHook<'_>,
) -> Result<Trained> {
    if labelled.is_empty() {
        return Err(Error::usage("training needs a non-empty labelled set"));
    }
    check_windows(config, labelled.iter().map(|lw| lw.window.len()))?;
    let domain = labelled[0].window.domain.clone();
    if labelled.iter().any(|lw| lw.window.domain != domain) {
        return Err(Error::usage("supervised training needs windows from a single domain"));
    }
    let raw: Vec<Window> = labelled.iter().map(|lw| lw.window.clone()).collect();
    let norm = fit_norm_stats(&raw)?;
    let labelled = normalize_labelled(&norm, labelled);
    let mut trainer = Trainer::new(config.clone())?;
    let mut src = Sampler::new(labelled.len(), stream(config.seed, SOURCE_STREAM));
    let mut history = Vec::with_capacity(config.steps);
    for step in 1..=config.steps {
        let idx = src.batch(config.batch_size);
        let xs: Vec<&Window> = idx.iter().map(|i| &labelled[*i].window).collect();
        let ys: Vec<PolarVector> = idx.iter().map(|i| labelled[*i].label).collect();
        // The target slot is unused under the prediction-only mask.
        let report = trainer.gen_step(&xs, &ys, &xs, TermMask::PRED_ONLY)?;
        hook(step, &trainer.bundle, &report)?;
        history.push(report);
    }
    Ok(Trained {
        bundle: trainer.bundle,
        norms: [(domain, norm)].into(),
        history,
    })
}

/// Polar-vector prediction errors over labelled windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dl_rmse: f64,
    pub dpsi_rmse: f64,
    pub dl_mae: f64,
    pub dpsi_mae: f64,
    pub n_windows: usize,
}

impl EvalReport {
    /// Heading errors use the wrapped difference.
    pub fn from_predictions(pred: &[PolarVector], truth: &[PolarVector]) -> Result<Self> {
        if pred.len() != truth.len() || pred.is_empty() {
            return Err(Error::usage(format!(
                "need equal, non-zero numbers of predictions and labels, got {} and {}",
                pred.len(),
                truth.len()
            )));
        }
        let n = pred.len() as f64;
        let (mut dl2, mut dpsi2, mut dl1, mut dpsi1) = (0.0, 0.0, 0.0, 0.0);
        for (p, t) in pred.iter().zip(truth) {
            let e_dl = p.dl - t.dl;
            let e_psi = angle::diff(p.dpsi, t.dpsi);
            dl2 += e_dl * e_dl;
            dpsi2 += e_psi * e_psi;
            dl1 += e_dl.abs();
            dpsi1 += e_psi.abs();
        }
        Ok(Self {
            dl_rmse: (dl2 / n).sqrt(),
            dpsi_rmse: (dpsi2 / n).sqrt(),
            dl_mae: dl1 / n,
            dpsi_mae: dpsi1 / n,
            n_windows: pred.len(),
        })
    }

    pub fn render(&self) -> String {
        let mut kv = KeyValues::default();
        kv.insert("dl_rmse", self.dl_rmse);
        kv.insert("dpsi_rmse", self.dpsi_rmse);
        kv.insert("dl_mae", self.dl_mae);
        kv.insert("dpsi_mae", self.dpsi_mae);
        kv.insert("n_windows", self.n_windows);
        kv.render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let get = |k: &str| kv.get::<f64>(k).map_err(|e| Error::data(e.to_string()));
        Ok(Self {
            dl_rmse: get("dl_rmse")?,
            dpsi_rmse: get("dpsi_rmse")?,
            dl_mae: get("dl_mae")?,
            dpsi_mae: get("dpsi_mae")?,
            n_windows: kv.get("n_windows").map_err(|e| Error::data(e.to_string()))?,
        })
    }
}

const EVAL_BATCH: usize = 64;

/// Predict on raw windows with the run's normalization.
pub fn predict(bundle: &ModelBundle, norm: &NormStats, windows: &[Window]) -> Result<Vec<PolarVector>> {
    let normed: Vec<Window> = windows.iter().map(|w| norm.apply(w)).collect();
    bundle.predict_windows(&normed, EVAL_BATCH)
}

pub fn evaluate(bundle: &ModelBundle, norm: &NormStats, eval: &[LabelledWindow]) -> Result<EvalReport> {
    if eval.is_empty() {
        return Err(Error::usage("evaluation needs labelled windows"));
    }
    let windows: Vec<Window> = eval.iter().map(|lw| lw.window.clone()).collect();
    let pred = predict(bundle, norm, &windows)?;
    let truth: Vec<PolarVector> = eval.iter().map(|lw| lw.label).collect();
    EvalReport::from_predictions(&pred, &truth)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Biased squared maximum mean discrepancy with a Gaussian kernel whose
/// bandwidth is the median pairwise distance over both sets.
pub fn mmd2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::usage("mmd needs two non-empty sets"));
    }
    let all: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let mut dists: Vec<f64> = Vec::with_capacity(all.len() * (all.len() - 1) / 2);
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            dists.push(sq_dist(all[i], all[j]).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mut sigma = dists.get(dists.len() / 2).copied().unwrap_or(0.0);
    if sigma == 0.0 {
        // Degenerate median: fall back to the largest distance, or 1.
        sigma = dists.last().copied().filter(|d| *d > 0.0).unwrap_or(1.0);
    }
    let k = |x: &[f64], y: &[f64]| (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp();
    let mean_k = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in p {
            for y in q {
                s += k(x, y);
            }
        }
        s / (p.len() * q.len()) as f64
    };
    Ok((mean_k(a, a) + mean_k(b, b) - 2.0 * mean_k(a, b)).max(0.0))
}

/// Squared MMD between the time-pooled latent codes of two raw window sets,
/// each normalized with its own domain statistics.
pub fn latent_domain_gap(
    bundle: &ModelBundle,
    source: (&NormStats, &[Window]),
    target: (&NormStats, &[Window]),
) -> Result<f64> {
    let codes = |(norm, ws): (&NormStats, &[Window])| {
        let normed: Vec<Window> = ws.iter().map(|w| norm.apply(w)).collect();
        bundle.pooled_codes(&normed, EVAL_BATCH)
    };
    mmd2(&codes(source)?, &codes(target)?)
}

/// Which model a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Labelled source plus unlabelled target, full objective.
    Adapted,
    /// Supervised on source labels only.
    SourceOnly,
    /// Supervised on target labels; the fully supervised reference.
    TargetOnly,
}

impl TrainMode {
    pub const ALL: [Self; 3] = [Self::SourceOnly, Self::TargetOnly, Self::Adapted];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Adapted => "adapted",
            Self::SourceOnly => "source-only",
            Self::TargetOnly => "target-only",
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown mode `{s}`; expected source-only, target-only or adapted")))
    }
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Saved model: layout, normalization and flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub mode: TrainMode,
    pub model: ModelConfig,
    pub domains: Vec<DomainTag>,
    pub norms: BTreeMap<DomainTag, NormStats>,
    pub params: crate::nn::ParamSet,
}

impl Checkpoint {
    pub fn new(mode: TrainMode, bundle: &ModelBundle, norms: &BTreeMap<DomainTag, NormStats>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            mode,
            model: bundle.config.clone(),
            domains: bundle.domains().cloned().collect(),
            norms: norms.clone(),
            params: bundle.flatten(),
        }
    }

    /// Rebuild the bundle; every parameter of the layout must be present
    /// with its expected shape.
    pub fn bundle(&self) -> Result<ModelBundle> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let template = ModelBundle::init(self.model.clone(), &self.domains, &mut rng)?;
        let expected = template.flatten();
        if expected.len() != self.params.len() {
            return Err(Error::data(format!(
                "checkpoint has {} parameters, layout needs {}",
                self.params.len(),
                expected.len()
            )));
        }
        for (name, t) in expected.iter() {
            match self.params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => {
                    return Err(Error::data(format!(
                        "parameter `{name}` has shape {:?}, expected {:?}",
                        p.shape(),
                        t.shape()
                    )))
                }
                None => return Err(Error::data(format!("checkpoint lacks parameter `{name}`"))),
            }
        }
        template.unflatten(&self.params)
    }

    pub fn norm(&self, domain: &DomainTag) -> Result<&NormStats> {
        self.norms
            .get(domain)
            .ok_or_else(|| Error::usage(format!("checkpoint has no normalization for domain `{domain}`")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Self = serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::data(format!(
                "{}: unsupported checkpoint format version {}",
                path.display(),
                c.format_version
            )));
        }
        Ok(c)
    }
}

//! The network set: a shared encoder, one generator per domain, a
//! reconstruction decoder, the polar-vector predictor and one discriminator
//! per domain.
//!
//! All networks work on batches of normalized windows `[batch, n, 6]`. The
//! latent code is a sequence `[batch, n / 4, d_z]`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{DomainTag, PolarVector, Window, CHANNELS};
use crate::error::{Error, Result};
use crate::nn::{Bound, GradMap, Graph, ParamSet, Tensor, Var};

/// Time downsampling between a window and its latent code.
pub const POOL: usize = 4;
/// Time downsampling of the discriminator's strided stack (three stride-2 layers).
pub const DISC_STRIDE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Window length in frames; a multiple of 8.
    pub n: usize,
    pub d_z: usize,
    pub enc_hidden: usize,
    pub gen_hidden: usize,
    pub pred_hidden: usize,
    pub disc_channels: usize,
    pub disc_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d_z: 64,
            enc_hidden: 32,
            gen_hidden: 32,
            pred_hidden: 32,
            disc_channels: 16,
            disc_hidden: 16,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % DISC_STRIDE != 0 {
            return Err(Error::usage(format!("window length {} must be a positive multiple of {DISC_STRIDE}", self.n)));
        }
        let widths = [self.d_z, self.enc_hidden, self.gen_hidden, self.pred_hidden, self.disc_channels, self.disc_hidden];
        if widths.contains(&0) {
            return Err(Error::usage("network widths must be positive"));
        }
        Ok(())
    }

    pub fn latent_len(&self) -> usize {
        self.n / POOL
    }
}

/// Which networks receive gradients in a bound graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    /// Encoder, generators, decoder and predictor.
    Generators,
    Discriminators,
    All,
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub encoder: ParamSet,
    pub generators: BTreeMap<DomainTag, ParamSet>,
    pub decoder: ParamSet,
    pub predictor: ParamSet,
    pub discriminators: BTreeMap<DomainTag, ParamSet>,
}

fn init_encoder(c: &ModelConfig, rng: &mut impl Rng) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    p.init_gru("fwd", CHANNELS, c.enc_hidden, rng)?;
    p.init_gru("bwd", CHANNELS, c.enc_hidden, rng)?;
    p.init_linear("proj", 2 * c.enc_hidden, c.d_z, rng)?;
    Ok(p)
}

fn init_generator(c: &ModelConfig, rng: &mut impl Rng) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    p.init_gru("rnn", c.d_z, c.gen_hidden, rng)?;
    p.init_linear("out", c.gen_hidden, POOL * CHANNELS, rng)?;
    Ok(p)
}

fn init_predictor(c: &ModelConfig, rng: &mut impl Rng) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    p.init_gru("rnn", c.d_z, c.pred_hidden, rng)?;
    p.init_linear("out", c.pred_hidden, 2, rng)?;
    Ok(p)
}

fn init_discriminator(c: &ModelConfig, rng: &mut impl Rng) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    p.init_linear("conv1", 2 * CHANNELS, c.disc_channels, rng)?;
    p.init_linear("conv2", 2 * c.disc_channels, c.disc_channels, rng)?;
    p.init_linear("conv3", 2 * c.disc_channels, c.disc_channels, rng)?;
    p.init_gru("rnn", c.disc_channels, c.disc_hidden, rng)?;
    p.init_linear("out", c.disc_hidden, 1, rng)?;
    Ok(p)
}

impl ModelBundle {
    /// Fresh parameters for the given domains, drawn from `rng` in a fixed
    /// order.
    pub fn init(config: ModelConfig, domains: &[DomainTag], rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if domains.is_empty() {
            return Err(Error::usage("a model bundle needs at least one domain"));
        }
        let encoder = init_encoder(&config, rng)?;
        let decoder = init_generator(&config, rng)?;
        let predictor = init_predictor(&config, rng)?;
        let mut generators = BTreeMap::new();
        let mut discriminators = BTreeMap::new();
        for d in domains {
            if generators.insert(d.clone(), init_generator(&config, rng)?).is_some() {
                return Err(Error::usage(format!("domain `{d}` listed twice")));
            }
            discriminators.insert(d.clone(), init_discriminator(&config, rng)?);
        }
        Ok(Self {
            config,
            encoder,
            generators,
            decoder,
            predictor,
            discriminators,
        })
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainTag> {
        self.generators.keys()
    }

    pub fn has_domain(&self, d: &DomainTag) -> bool {
        self.generators.contains_key(d) && self.discriminators.contains_key(d)
    }

    pub fn num_values(&self) -> usize {
        self.encoder.num_values()
            + self.decoder.num_values()
            + self.predictor.num_values()
            + self.generators.values().map(ParamSet::num_values).sum::<usize>()
            + self.discriminators.values().map(ParamSet::num_values).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite()
            && self.decoder.all_finite()
            && self.predictor.all_finite()
            && self.generators.values().all(ParamSet::all_finite)
            && self.discriminators.values().all(ParamSet::all_finite)
    }

    pub fn bind(&self, graph: &Graph, trainable: Trainable) -> BoundBundle {
        let gens = matches!(trainable, Trainable::Generators | Trainable::All);
        let discs = matches!(trainable, Trainable::Discriminators | Trainable::All);
        BoundBundle {
            config: self.config.clone(),
            encoder: self.encoder.bind(graph, gens),
            generators: self.generators.iter().map(|(d, p)| (d.clone(), p.bind(graph, gens))).collect(),
            decoder: self.decoder.bind(graph, gens),
            predictor: self.predictor.bind(graph, gens),
            discriminators: self.discriminators.iter().map(|(d, p)| (d.clone(), p.bind(graph, discs))).collect(),
        }
    }

    /// Every parameter set with a stable name, for optimizers and checks.
    pub fn sets(&self) -> Vec<(String, &ParamSet)> {
        let mut out = vec![
            ("encoder".to_string(), &self.encoder),
            ("decoder".to_string(), &self.decoder),
            ("predictor".to_string(), &self.predictor),
        ];
        out.extend(self.generators.iter().map(|(d, p)| (format!("generator/{d}"), p)));
        out.extend(self.discriminators.iter().map(|(d, p)| (format!("discriminator/{d}"), p)));
        out
    }

    pub fn set_mut(&mut self, name: &str) -> Option<&mut ParamSet> {
        match name {
            "encoder" => Some(&mut self.encoder),
            "decoder" => Some(&mut self.decoder),
            "predictor" => Some(&mut self.predictor),
            _ => {
                if let Some(d) = name.strip_prefix("generator/") {
                    self.generators.iter_mut().find(|(k, _)| k.as_str() == d).map(|(_, p)| p)
                } else if let Some(d) = name.strip_prefix("discriminator/") {
                    self.discriminators.iter_mut().find(|(k, _)| k.as_str() == d).map(|(_, p)| p)
                } else {
                    None
                }
            }
        }
    }

    /// Flatten into one parameter set with `set/param` names.
    pub fn flatten(&self) -> ParamSet {
        let mut flat = ParamSet::new();
        for (set, p) in self.sets() {
            for (name, t) in p.iter() {
                flat.insert(&format!("{set}::{name}"), t.clone()).expect("unique names");
            }
        }
        flat
    }

    /// Inverse of [`ModelBundle::flatten`] for a bundle of the same layout.
    pub fn unflatten(&self, flat: &ParamSet) -> Result<Self> {
        let mut out = self.clone();
        for (key, t) in flat.iter() {
            let (set, name) = key
                .split_once("::")
                .ok_or_else(|| Error::usage(format!("bad flattened name `{key}`")))?;
            let slot = out
                .set_mut(set)
                .and_then(|p| p.get_mut(name))
                .ok_or_else(|| Error::usage(format!("unknown parameter `{key}`")))?;
            *slot = t.clone();
        }
        Ok(out)
    }

    /// Predicted polar vectors for normalized windows, in batches.
    pub fn predict_windows(&self, windows: &[Window], batch: usize) -> Result<Vec<PolarVector>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(batch.max(1)) {
            let g = Graph::new();
            let b = self.bind(&g, Trainable::Nothing);
            let x = g.constant(batch_tensor(chunk, self.config.n)?);
            let z = b.encode(&g, x)?;
            let y = g.value(b.predict(&g, z)?);
            out.extend(y.data().chunks_exact(2).map(|p| PolarVector::new(p[0], p[1])));
        }
        Ok(out)
    }

    /// Time-pooled latent codes `[d_z]` of normalized windows.
    pub fn pooled_codes(&self, windows: &[Window], batch: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(batch.max(1)) {
            let g = Graph::new();
            let b = self.bind(&g, Trainable::Nothing);
            let x = g.constant(batch_tensor(chunk, self.config.n)?);
            let z = g.mean_time(b.encode(&g, x)?)?;
            out.extend(g.value(z).data().chunks_exact(self.config.d_z).map(<[f64]>::to_vec));
        }
        Ok(out)
    }
}

/// Stack windows into `[batch, n, 6]`.
pub fn batch_tensor<'a>(windows: impl IntoIterator<Item = &'a Window>, n: usize) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut count = 0;
    for w in windows {
        if w.len() != n {
            return Err(Error::usage(format!("window of {} frames, model expects {n}", w.len())));
        }
        data.extend_from_slice(w.frames());
        count += 1;
    }
    if count == 0 {
        return Err(Error::usage("empty batch"));
    }
    Tensor::new(vec![count, n, CHANNELS], data)
}

/// Stack labels into `[batch, 2]`.
pub fn label_tensor<'a>(labels: impl IntoIterator<Item = &'a PolarVector>) -> Tensor {
    let data: Vec<f64> = labels.into_iter().flat_map(|p| [p.dl, p.dpsi]).collect();
    Tensor::new(vec![data.len() / 2, 2], data).expect("whole rows")
}

/// A [`ModelBundle`] recorded in one graph.
pub struct BoundBundle {
    pub config: ModelConfig,
    pub encoder: Bound,
    pub generators: BTreeMap<DomainTag, Bound>,
    pub decoder: Bound,
    pub predictor: Bound,
    pub discriminators: BTreeMap<DomainTag, Bound>,
}

fn unknown(domain: &DomainTag) -> Error {
    Error::usage(format!("domain `{domain}` is not registered in the model"))
}

impl BoundBundle {
    fn check_window(&self, g: &Graph, x: Var) -> Result<usize> {
        let s = g.shape(x);
        if s.len() != 3 || s[1] != self.config.n || s[2] != CHANNELS {
            return Err(Error::usage(format!(
                "expected windows [batch, {}, {CHANNELS}], got {s:?}",
                self.config.n
            )));
        }
        Ok(s[0])
    }

    fn check_latent(&self, g: &Graph, z: Var) -> Result<usize> {
        let s = g.shape(z);
        if s.len() != 3 || s[1] != self.config.latent_len() || s[2] != self.config.d_z {
            return Err(Error::usage(format!(
                "expected latent [batch, {}, {}], got {s:?}",
                self.config.latent_len(),
                self.config.d_z
            )));
        }
        Ok(s[0])
    }

    /// Bidirectional GRU, mean pooling over blocks of 4 frames, projection.
    pub fn encode(&self, g: &Graph, x: Var) -> Result<Var> {
        self.check_window(g, x)?;
        let e = &self.encoder;
        let fwd = g.gru(x, e.gru("fwd"))?;
        let bwd = g.reverse_time(g.gru(g.reverse_time(x)?, e.gru("bwd"))?)?;
        let h = g.pool_time(g.concat(&[fwd, bwd])?, POOL)?;
        e.linear(g, "proj", h)
    }

    fn render(&self, g: &Graph, p: &Bound, z: Var) -> Result<Var> {
        let batch = self.check_latent(g, z)?;
        let h = g.gru(z, p.gru("rnn"))?;
        let y = p.linear(g, "out", h)?;
        g.reshape(y, &[batch, self.config.n, CHANNELS])
    }

    /// Window in `domain`'s style from a latent code.
    pub fn generate(&self, g: &Graph, z: Var, domain: &DomainTag) -> Result<Var> {
        let p = self.generators.get(domain).ok_or_else(|| unknown(domain))?;
        self.render(g, p, z)
    }

    pub fn decode(&self, g: &Graph, z: Var) -> Result<Var> {
        self.render(g, &self.decoder, z)
    }

    /// `[batch, 2]` rows of `(dl, dpsi)`, with `dl` through softplus.
    pub fn predict(&self, g: &Graph, z: Var) -> Result<Var> {
        self.check_latent(g, z)?;
        let p = &self.predictor;
        let h = g.mean_time(g.gru(z, p.gru("rnn"))?)?;
        let y = p.linear(g, "out", h)?;
        let dl = g.softplus(g.slice(y, 0, 1)?);
        let dpsi = g.slice(y, 1, 2)?;
        g.concat(&[dl, dpsi])
    }

    /// One score per window, `[batch, 1]`.
    pub fn discriminate(&self, g: &Graph, x: Var, domain: &DomainTag) -> Result<Var> {
        let batch = self.check_window(g, x)?;
        let p = self.discriminators.get(domain).ok_or_else(|| unknown(domain))?;
        let mut h = x;
        let mut len = self.config.n;
        let mut width = CHANNELS;
        for layer in ["conv1", "conv2", "conv3"] {
            // kernel 2, stride 2: pairs of consecutive frames side by side
            len /= 2;
            h = g.reshape(h, &[batch, len, 2 * width])?;
            h = g.tanh(p.linear(g, layer, h)?);
            width = self.config.disc_channels;
        }
        let h = g.mean_time(g.gru(h, p.gru("rnn"))?)?;
        p.linear(g, "out", h)
    }

    /// Gradients of every trainable set, keyed like [`ModelBundle::sets`].
    pub fn grads(&self, g: &Graph, grads: &crate::nn::Gradients) -> BTreeMap<String, GradMap> {
        let mut out = BTreeMap::new();
        let mut put = |name: String, b: &Bound| {
            if b.iter().next().is_some_and(|(_, v)| g.requires_grad(*v)) {
                out.insert(name, b.grads(g, grads));
            }
        };
        put("encoder".into(), &self.encoder);
        put("decoder".into(), &self.decoder);
        put("predictor".into(), &self.predictor);
        for (d, b) in &self.generators {
            put(format!("generator/{d}"), b);
        }
        for (d, b) in &self.discriminators {
            put(format!("discriminator/{d}"), b);
        }
        out
    }
}

/// Largest relative error between analytic and central-difference gradients
/// of `f` over every parameter of `bundle`; see [`crate::nn::grad_check`].
pub fn grad_check_bundle<F>(bundle: &ModelBundle, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&Graph, &BoundBundle) -> Result<Var>,
{
    let all: Vec<String> = bundle.sets().into_iter().map(|(n, _)| n).collect();
    let names: Vec<&str> = all.iter().map(String::as_str).collect();
    grad_check_sets(bundle, eps, &names, f)
}

/// [`grad_check_bundle`] restricted to the named parameter sets.
pub fn grad_check_sets<F>(bundle: &ModelBundle, eps: f64, sets: &[&str], f: F) -> Result<f64>
where
    F: Fn(&Graph, &BoundBundle) -> Result<Var>,
{
    let g = Graph::new();
    let b = bundle.bind(&g, Trainable::All);
    let loss = f(&g, &b)?;
    let analytic = b.grads(&g, &g.backward(loss)?);
    let eval = |m: &ModelBundle| -> Result<f64> {
        let g = Graph::new();
        let b = m.bind(&g, Trainable::Nothing);
        let out = f(&g, &b)?;
        Ok(g.item(out))
    };
    let mut probe = bundle.clone();
    let mut worst = 0.0_f64;
    for (set, params) in bundle.sets() {
        if !sets.contains(&set.as_str()) {
            continue;
        }
        for (name, t) in params.iter() {
            for i in 0..t.len() {
                let orig = t.data()[i];
                let mut at = |v: f64| -> Result<f64> {
                    probe.set_mut(&set).and_then(|p| p.get_mut(name)).expect("known parameter").data_mut()[i] = v;
                    eval(&probe)
                };
                let up = at(orig + eps)?;
                let down = at(orig - eps)?;
                at(orig)?;
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic.get(&set).map_or(0.0, |m| m[name][i]);
                if !(numeric.is_finite() && a.is_finite()) {
                    return Err(Error::numeric(format!("non-finite gradient for `{set}::{name}`")));
                }
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(crate::nn::GRAD_CHECK_FLOOR);
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Gradients, Graph, Var};
use crate::nn::gru::GruVars;
use crate::nn::tensor::Tensor;

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    params: BTreeMap<String, Tensor>,
}

/// Gradients keyed like the [`ParamSet`] they belong to.
pub type GradMap = BTreeMap<String, Vec<f64>>;

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::usage(format!("duplicate parameter `{name}`")));
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(Tensor::all_finite)
    }

    /// Glorot-uniform weight `[fan_in, fan_out]`.
    pub fn init_weight(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<()> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).map_err(|e| Error::usage(e.to_string()))?;
        let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        self.insert(name, Tensor::new(vec![fan_in, fan_out], data)?)
    }

    /// `{prefix}.w: [input, output]` and zero `{prefix}.b`.
    pub fn init_linear(&mut self, prefix: &str, input: usize, output: usize, rng: &mut impl Rng) -> Result<()> {
        self.init_weight(&format!("{prefix}.w"), input, output, rng)?;
        self.insert(&format!("{prefix}.b"), Tensor::zeros(&[output]))
    }

    pub fn init_gru(&mut self, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<()> {
        self.init_weight(&format!("{prefix}.w_ih"), input, 3 * hidden, rng)?;
        self.init_weight(&format!("{prefix}.w_hh"), hidden, 3 * hidden, rng)?;
        self.insert(&format!("{prefix}.b_ih"), Tensor::zeros(&[3 * hidden]))?;
        self.insert(&format!("{prefix}.b_hh"), Tensor::zeros(&[3 * hidden]))
    }

    /// Record every parameter in `graph`, as trainable leaves or as constants.
    pub fn bind(&self, graph: &Graph, trainable: bool) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, t)| {
                let v = if trainable {
                    graph.leaf(t.clone())
                } else {
                    graph.constant(t.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    pub fn zero_grads(&self) -> GradMap {
        self.params.iter().map(|(k, t)| (k.clone(), vec![0.0; t.len()])).collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = ParamFile {
            format_version: PARAM_FORMAT_VERSION,
            params: self.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ParamFile =
            serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if file.format_version != PARAM_FORMAT_VERSION {
            return Err(Error::data(format!(
                "{}: unsupported format version {}",
                path.display(),
                file.format_version
            )));
        }
        for (name, t) in &file.params.params {
            if t.len() != t.shape().iter().product::<usize>() {
                return Err(Error::data(format!("{}: parameter `{name}` has a bad shape", path.display())));
            }
        }
        Ok(file.params)
    }
}

pub const PARAM_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamFile {
    format_version: u32,
    params: ParamSet,
}

/// Graph handles of a bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    /// Panics on an unknown name: parameter names are fixed by the code that
    /// builds the set.
    pub fn var(&self, name: &str) -> Var {
        match self.vars.get(name) {
            Some(v) => *v,
            None => panic!("parameter `{name}` not bound"),
        }
    }

    pub fn gru(&self, prefix: &str) -> GruVars {
        GruVars {
            w_ih: self.var(&format!("{prefix}.w_ih")),
            w_hh: self.var(&format!("{prefix}.w_hh")),
            b_ih: self.var(&format!("{prefix}.b_ih")),
            b_hh: self.var(&format!("{prefix}.b_hh")),
        }
    }

    /// `x · w + b` over the last axis of `x`.
    pub fn linear(&self, graph: &Graph, prefix: &str, x: Var) -> Result<Var> {
        graph.linear(x, self.var(&format!("{prefix}.w")), self.var(&format!("{prefix}.b")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    /// Gradients for every bound parameter; zero where the loss does not
    /// depend on it.
    pub fn grads(&self, graph: &Graph, grads: &Gradients) -> GradMap {
        self.vars
            .iter()
            .map(|(name, v)| {
                let g = match grads.get(*v) {
                    Some(g) => g.to_vec(),
                    None => vec![0.0; graph.shape(*v).iter().product()],
                };
                (name.clone(), g)
            })
            .collect()
    }
}

impl Graph {
    /// Affine map over the last axis: `[.., in] · [in, out] + [out]`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Result<Var> {
        let shape = self.shape(x);
        let input = *shape.last().unwrap_or(&0);
        let rows = shape.iter().product::<usize>() / input.max(1);
        let flat = if shape.len() == 2 { x } else { self.reshape(x, &[rows, input])? };
        let y = self.add_row(self.matmul(flat, w)?, b)?;
        if shape.len() == 2 {
            return Ok(y);
        }
        let mut out_shape = shape;
        *out_shape.last_mut().expect("non-empty") = self.shape(w)[1];
        self.reshape(y, &out_shape)
    }
}

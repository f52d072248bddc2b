//! Gated recurrent unit, gate order (r, z, n):
//!
//! ```text
//! r  = σ(x W_ir + b_ir + h W_hr + b_hr)
//! z  = σ(x W_iz + b_iz + h W_hz + b_hz)
//! n  = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! Weights are stored as `w_ih: [input, 3·hidden]`, `w_hh: [hidden, 3·hidden]`
//! and biases `[3·hidden]`, the three gate blocks side by side.

use crate::error::{Error, Result};
use crate::nn::graph::{accumulate_into, sigmoid_f, Graph, Node, Op, Var};
use crate::nn::tensor::{gemm_acc, Tensor};

/// Parameter handles of one GRU cell.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b_ih: Var,
    pub b_hh: Var,
}

#[derive(Debug)]
pub(crate) struct GruTape {
    x: Var,
    p: GruVars,
    batch: usize,
    steps: usize,
    input: usize,
    hidden: usize,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    gh_n: Vec<f64>,
}

impl GruVars {
    fn hidden(&self, graph: &Graph) -> Result<(usize, usize)> {
        let wi = graph.shape(self.w_ih);
        let wh = graph.shape(self.w_hh);
        let bad = || {
            Error::usage(format!(
                "gru: inconsistent parameter shapes w_ih {wi:?}, w_hh {wh:?}, b_ih {:?}, b_hh {:?}",
                graph.shape(self.b_ih),
                graph.shape(self.b_hh)
            ))
        };
        if wi.len() != 2 || wh.len() != 2 || wi[1] % 3 != 0 {
            return Err(bad());
        }
        let h = wi[1] / 3;
        if wh != [h, 3 * h] || graph.shape(self.b_ih) != [3 * h] || graph.shape(self.b_hh) != [3 * h] {
            return Err(bad());
        }
        Ok((wi[0], h))
    }
}

impl Graph {
    /// Run a GRU over `x: [batch, time, input]` from a zero state; returns all
    /// hidden states `[batch, time, hidden]`.
    pub fn gru(&self, x: Var, p: GruVars) -> Result<Var> {
        let (input, hidden) = p.hidden(self)?;
        let xs = self.shape(x);
        if xs.len() != 3 || xs[2] != input {
            return Err(Error::usage(format!(
                "gru: input of shape {xs:?} does not match input width {input}"
            )));
        }
        let (batch, steps) = (xs[0], xs[1]);
        let h3 = 3 * hidden;
        let (xv, wi, wh, bi, bh) = (
            self.value(x),
            self.value(p.w_ih),
            self.value(p.w_hh),
            self.value(p.b_ih),
            self.value(p.b_hh),
        );
        let len = batch * steps * hidden;
        let mut out = vec![0.0; len];
        let (mut r, mut z, mut n, mut gh_n) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut h = vec![0.0; batch * hidden];
        let mut x_t = vec![0.0; batch * input];
        let mut gi = vec![0.0; batch * h3];
        let mut gh = vec![0.0; batch * h3];

        for t in 0..steps {
            for b in 0..batch {
                let src = (b * steps + t) * input;
                x_t[b * input..(b + 1) * input].copy_from_slice(&xv.data()[src..src + input]);
                gi[b * h3..(b + 1) * h3].copy_from_slice(bi.data());
                gh[b * h3..(b + 1) * h3].copy_from_slice(bh.data());
            }
            gemm_acc(&mut gi, &x_t, wi.data(), batch, input, h3, false, false);
            gemm_acc(&mut gh, &h, wh.data(), batch, hidden, h3, false, false);
            for b in 0..batch {
                let g = b * h3;
                let o = (b * steps + t) * hidden;
                for j in 0..hidden {
                    let rj = sigmoid_f(gi[g + j] + gh[g + j]);
                    let zj = sigmoid_f(gi[g + hidden + j] + gh[g + hidden + j]);
                    let hn = gh[g + 2 * hidden + j];
                    let nj = (gi[g + 2 * hidden + j] + rj * hn).tanh();
                    let hj = (1.0 - zj) * nj + zj * h[b * hidden + j];
                    r[o + j] = rj;
                    z[o + j] = zj;
                    n[o + j] = nj;
                    gh_n[o + j] = hn;
                    out[o + j] = hj;
                    h[b * hidden + j] = hj;
                }
            }
        }

        let tape = GruTape {
            x,
            p,
            batch,
            steps,
            input,
            hidden,
            r,
            z,
            n,
            gh_n,
        };
        let rg = [x, p.w_ih, p.w_hh, p.b_ih, p.b_hh].iter().any(|v| self.requires_grad(*v));
        let value = Tensor::new(vec![batch, steps, hidden], out)?;
        Ok(self.push(value, Op::Gru(Box::new(tape)), rg))
    }

    /// One GRU update `[batch, input] × [batch, hidden] → [batch, hidden]`,
    /// composed from elementary ops.
    pub fn gru_step(&self, x_t: Var, h: Var, p: GruVars) -> Result<Var> {
        let (_, hidden) = p.hidden(self)?;
        let gi = self.add_row(self.matmul(x_t, p.w_ih)?, p.b_ih)?;
        let gh = self.add_row(self.matmul(h, p.w_hh)?, p.b_hh)?;
        let gate = |g: Var, k: usize| self.slice(g, k * hidden, (k + 1) * hidden);
        let r = self.sigmoid(self.add(gate(gi, 0)?, gate(gh, 0)?)?);
        let z = self.sigmoid(self.add(gate(gi, 1)?, gate(gh, 1)?)?);
        let n = self.tanh(self.add(gate(gi, 2)?, self.mul(r, gate(gh, 2)?)?)?);
        // (1 − z) n + z h = n + z (h − n)
        self.add(n, self.mul(z, self.sub(h, n)?)?)
    }
}

impl GruTape {
    pub(crate) fn backward(&self, nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let (batch, steps, input, hidden) = (self.batch, self.steps, self.input, self.hidden);
        let h3 = 3 * hidden;
        let xv = nodes[self.x.index()].value.data();
        let wi = nodes[self.p.w_ih.index()].value.data();
        let wh = nodes[self.p.w_hh.index()].value.data();
        let hs = node.value.data();

        let mut dx = vec![0.0; batch * steps * input];
        let mut dwi = vec![0.0; input * h3];
        let mut dwh = vec![0.0; hidden * h3];
        let mut dbi = vec![0.0; h3];
        let mut dbh = vec![0.0; h3];

        let mut dh = vec![0.0; batch * hidden];
        let mut dgi = vec![0.0; batch * h3];
        let mut dgh = vec![0.0; batch * h3];
        let mut h_prev = vec![0.0; batch * hidden];
        let mut x_t = vec![0.0; batch * input];
        let mut dx_t = vec![0.0; batch * input];

        for t in (0..steps).rev() {
            for b in 0..batch {
                let o = (b * steps + t) * hidden;
                for j in 0..hidden {
                    dh[b * hidden + j] += g[o + j];
                    h_prev[b * hidden + j] = if t == 0 { 0.0 } else { hs[o - hidden + j] };
                }
                let src = (b * steps + t) * input;
                x_t[b * input..(b + 1) * input].copy_from_slice(&xv[src..src + input]);
            }
            for b in 0..batch {
                let o = (b * steps + t) * hidden;
                let gb = b * h3;
                for j in 0..hidden {
                    let (r, z, n, hn) = (self.r[o + j], self.z[o + j], self.n[o + j], self.gh_n[o + j]);
                    let d = dh[b * hidden + j];
                    let dn = d * (1.0 - z);
                    let dz = d * (h_prev[b * hidden + j] - n);
                    let dan = dn * (1.0 - n * n);
                    let dar = dan * hn * r * (1.0 - r);
                    let daz = dz * z * (1.0 - z);
                    dgi[gb + j] = dar;
                    dgi[gb + hidden + j] = daz;
                    dgi[gb + 2 * hidden + j] = dan;
                    dgh[gb + j] = dar;
                    dgh[gb + hidden + j] = daz;
                    dgh[gb + 2 * hidden + j] = dan * r;
                    // direct path through z ⊙ h
                    dh[b * hidden + j] = d * z;
                }
            }
            gemm_acc(&mut dwi, &x_t, &dgi, input, batch, h3, true, false);
            gemm_acc(&mut dwh, &h_prev, &dgh, hidden, batch, h3, true, false);
            for row in dgi.chunks_exact(h3) {
                dbi.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            for row in dgh.chunks_exact(h3) {
                dbh.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            gemm_acc(&mut dh, &dgh, wh, batch, h3, hidden, false, true);
            dx_t.iter_mut().for_each(|v| *v = 0.0);
            gemm_acc(&mut dx_t, &dgi, wi, batch, h3, input, false, true);
            for b in 0..batch {
                let dst = (b * steps + t) * input;
                dx[dst..dst + input].copy_from_slice(&dx_t[b * input..(b + 1) * input]);
            }
        }

        let add = |d: &mut [f64], s: &[f64]| d.iter_mut().zip(s).for_each(|(a, v)| *a += v);
        accumulate_into(nodes, grads, self.x, |d| add(d, &dx));
        accumulate_into(nodes, grads, self.p.w_ih, |d| add(d, &dwi));
        accumulate_into(nodes, grads, self.p.w_hh, |d| add(d, &dwh));
        accumulate_into(nodes, grads, self.p.b_ih, |d| add(d, &dbi));
        accumulate_into(nodes, grads, self.p.b_hh, |d| add(d, &dbh));
    }
}

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Var};
use crate::nn::params::{Bound, ParamSet};

/// Gradients below this magnitude are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Largest relative error between analytic gradients and central differences
/// of the scalar `f`, over every parameter value.
///
/// The relative error of one entry is `|a − n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check<F>(params: &ParamSet, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&Graph, &Bound) -> Result<Var>,
{
    let graph = Graph::new();
    let bound = params.bind(&graph, true);
    let loss = f(&graph, &bound)?;
    let grads = graph.backward(loss)?;
    let analytic = bound.grads(&graph, &grads);

    let eval = |p: &ParamSet| -> Result<f64> {
        let g = Graph::new();
        let b = p.bind(&g, false);
        let out = f(&g, &b)?;
        Ok(g.item(out))
    };

    let mut probe = params.clone();
    let mut worst = 0.0_f64;
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let n = params.get(&name).map_or(0, |t| t.len());
        for i in 0..n {
            let orig = params.get(&name).expect("known name").data()[i];
            probe.get_mut(&name).expect("known name").data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(&name).expect("known name").data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(&name).expect("known name").data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[&name][i];
            if !(numeric.is_finite() && a.is_finite()) {
                return Err(Error::numeric(format!("non-finite gradient for `{name}`[{i}]")));
            }
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

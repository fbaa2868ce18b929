use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamId, ParamStore, Var};
use crate::{Error, Result};

/// Parameters of one LSTM layer, stored in `x W` orientation:
/// `input` is `[in, 4h]`, `recurrent` is `[h, 4h]`, `bias` is `[4h]`.
/// Gate blocks are ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmWeights {
    pub input: ParamId,
    pub recurrent: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmWeights {
    /// Input projection `x W_in + b` for a whole sequence (`[t, in]`).
    pub fn project(&self, g: &mut Graph, xs: Var) -> Result<Var> {
        let w = g.param(self.input);
        let b = g.param(self.bias);
        let proj = g.matmul(xs, w)?;
        g.add_row(proj, b)
    }

    /// Recurrent step from a pre-computed input projection.
    pub fn step(&self, g: &mut Graph, projected: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let u = g.param(self.recurrent);
        let rec = g.matmul(h, u)?;
        let gates = g.add(projected, rec)?;
        let n = self.hidden;
        let i = g.slice(gates, 0, n)?;
        let f = g.slice(gates, n, n)?;
        let z = g.slice(gates, 2 * n, n)?;
        let o = g.slice(gates, 3 * n, n)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let z = g.tanh(z);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, z)?;
        let c_new = g.add(keep, write)?;
        let squashed = g.tanh(c_new);
        let h_new = g.mul(o, squashed)?;
        Ok((h_new, c_new))
    }
}

/// One LSTM step: `c' = f*c + i*tanh(.)`, `h' = o*tanh(c')`.
pub fn lstm_cell(
    g: &mut Graph,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    weights: &LstmWeights,
) -> Result<(Var, Var)> {
    let w = g.param(weights.input);
    let b = g.param(weights.bias);
    let proj = g.matmul(x, w)?;
    let proj = g.add(proj, b)?;
    weights.step(g, proj, h_prev, c_prev)
}

/// Compare reverse-mode gradients with central differences.
///
/// For each parameter in `ids`, up to `samples` coordinates are chosen
/// with a generator seeded by `seed`. Returns the largest
/// `|analytic - numeric| / max(1, |analytic| + |numeric|)`.
/// `loss` must be deterministic: graphs are built with dropout disabled.
pub fn grad_check<F>(
    params: &mut ParamStore,
    ids: &[ParamId],
    step: f64,
    samples: usize,
    seed: u64,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&mut Graph) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Argument(format!("finite-difference step {step} must be positive")));
    }
    let analytic = {
        let mut g = Graph::new(params, false, 0);
        let out = loss(&mut g)?;
        g.backward(out)?
    };
    let mut eval = |params: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(params, false, 0);
        let out = loss(&mut g)?;
        Ok(g.scalar(out))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for &id in ids {
        let n = params.get(id).len();
        let coords = sample(&mut rng, n, samples.min(n));
        for j in coords {
            let original = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = original + step;
            let plus = eval(params)?;
            params.get_mut(id).data_mut()[j] = original - step;
            let minus = eval(params)?;
            params.get_mut(id).data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let exact = analytic.get(id).map_or(0.0, |g| g[j]);
            let err = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

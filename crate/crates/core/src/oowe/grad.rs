use std::collections::BTreeMap;

use super::model::{activations, check_ngram, Activations, Ngram, OoweModel};
use crate::error::{Error, Result};

pub const ADAGRAD_EPS: f64 = 1e-8;

/// Loss gradient. Embedding gradients are kept only for touched rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `(row, gradient)` sorted by row.
    pub emb: Vec<(usize, Vec<f64>)>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn is_zero(&self) -> bool {
        let dense = [&self.w1, &self.b1, &self.w2, &self.b2];
        dense.iter().all(|g| g.iter().all(|&x| x == 0.0))
            && self.emb.iter().all(|(_, g)| g.iter().all(|&x| x == 0.0))
    }

    /// Gradient of one embedding entry (zero for untouched rows).
    pub fn emb_entry(&self, row: usize, col: usize) -> f64 {
        self.emb
            .binary_search_by_key(&row, |(r, _)| *r)
            .map(|i| self.emb[i].1[col])
            .unwrap_or(0.0)
    }
}

fn check_inputs(model: &OoweModel, t: &Ngram, t_r: &Ngram, gold: usize, alpha: f64) -> Result<()> {
    check_ngram(model, t)?;
    check_ngram(model, t_r)?;
    let c = model.shape.categories;
    if gold == 0 || gold > c {
        return Err(Error::invalid(format!("gold category {gold} outside 1..={c}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if c < 2 && alpha > 0.0 {
        return Err(Error::invalid("opinion hinge divides by C - 1; need C >= 2 when alpha > 0"));
    }
    Ok(())
}

/// Loss value and output-layer sensitivities for both ngrams.
fn loss_and_douts(out_t: &[f64], out_r: &[f64], gold: usize, alpha: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let c = out_t.len() - 1;
    let mut d_t = vec![0.0; c + 1];
    let mut d_r = vec![0.0; c + 1];
    let mut loss = 0.0;

    let margin_s = 1.0 + out_r[0] - out_t[0];
    if margin_s > 0.0 {
        loss += (1.0 - alpha) * margin_s;
        d_t[0] -= 1.0 - alpha;
        d_r[0] += 1.0 - alpha;
    }
    if alpha > 0.0 {
        let scale = alpha / (c - 1) as f64;
        for j in (1..=c).filter(|&j| j != gold) {
            let margin = 1.0 + out_t[j] - out_t[gold];
            if margin > 0.0 {
                loss += scale * margin;
                d_t[j] += scale;
                d_t[gold] -= scale;
            }
        }
    }
    (loss, d_t, d_r)
}

/// Composite ranking loss of an ngram `t` against its corruption `t_r`:
///
/// `(1 - alpha) * max(0, 1 + f_s(t_r) - f_s(t))
///   + alpha / (C - 1) * sum_{j != P} max(0, 1 + f_j(t) - f_P(t))`.
pub fn loss(model: &OoweModel, t: &Ngram, t_r: &Ngram, gold: usize, alpha: f64) -> Result<f64> {
    check_inputs(model, t, t_r, gold, alpha)?;
    let out_t = activations(model, t).out;
    let out_r = activations(model, t_r).out;
    Ok(loss_and_douts(&out_t, &out_r, gold, alpha).0)
}

fn backprop(
    model: &OoweModel,
    ngram: &Ngram,
    act: &Activations,
    dout: &[f64],
    g: &mut Gradients,
    emb: &mut BTreeMap<usize, Vec<f64>>,
) {
    let s = model.shape;
    let p = &model.params;
    if dout.iter().all(|&x| x == 0.0) {
        for &id in &ngram.ids {
            emb.entry(id).or_insert_with(|| vec![0.0; s.dim]);
        }
        return;
    }
    let mut dhidden = vec![0.0; s.hidden];
    for (o, &d) in dout.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        g.b2[o] += d;
        let row = o * s.hidden;
        for h in 0..s.hidden {
            g.w2[row + h] += d * act.hidden[h];
            dhidden[h] += d * p.w2[row + h];
        }
    }
    let n_in = s.input_len();
    let mut dinput = vec![0.0; n_in];
    for h in 0..s.hidden {
        let a = act.pre[h];
        if !(a > -1.0 && a < 1.0) {
            continue;
        }
        let dpre = dhidden[h];
        g.b1[h] += dpre;
        let row = h * n_in;
        for i in 0..n_in {
            g.w1[row + i] += dpre * act.input[i];
            dinput[i] += dpre * p.w1[row + i];
        }
    }
    for (slot, &id) in ngram.ids.iter().enumerate() {
        let acc = emb.entry(id).or_insert_with(|| vec![0.0; s.dim]);
        for (a, d) in acc.iter_mut().zip(&dinput[slot * s.dim..(slot + 1) * s.dim]) {
            *a += d;
        }
    }
}

/// Loss and its exact subgradient with respect to every parameter.
///
/// Hinges contribute nothing when their margin is exactly zero, and hard-tanh
/// passes gradient only strictly inside `(-1, 1)`.
pub fn gradients(model: &OoweModel, t: &Ngram, t_r: &Ngram, gold: usize, alpha: f64) -> Result<(f64, Gradients)> {
    check_inputs(model, t, t_r, gold, alpha)?;
    let s = model.shape;
    let act_t = activations(model, t);
    let act_r = activations(model, t_r);
    let (loss, d_t, d_r) = loss_and_douts(&act_t.out, &act_r.out, gold, alpha);
    let mut g = Gradients {
        emb: Vec::new(),
        w1: vec![0.0; s.hidden * s.input_len()],
        b1: vec![0.0; s.hidden],
        w2: vec![0.0; s.outputs() * s.hidden],
        b2: vec![0.0; s.outputs()],
    };
    let mut emb = BTreeMap::new();
    backprop(model, t, &act_t, &d_t, &mut g, &mut emb);
    backprop(model, t_r, &act_r, &d_r, &mut g, &mut emb);
    g.emb = emb.into_iter().collect();
    Ok((loss, g))
}

/// One AdaGrad update of a single scalar.
#[inline]
pub fn adagrad_update(param: &mut f64, accum: &mut f64, grad: f64, eta: f64) {
    if grad == 0.0 {
        return;
    }
    *accum += grad * grad;
    *param -= eta * grad / (accum.sqrt() + ADAGRAD_EPS);
}

/// Applies `G += g^2; theta -= eta * g / (sqrt(G) + 1e-8)` to every parameter.
pub fn adagrad_step(model: &mut OoweModel, grads: &Gradients, eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let d = model.shape.dim;
    let p = &mut model.params;
    let a = &mut model.accum;
    for (row, g) in &grads.emb {
        let range = row * d..(row + 1) * d;
        for ((x, acc), &gi) in p.emb[range.clone()].iter_mut().zip(&mut a.emb[range]).zip(g) {
            adagrad_update(x, acc, gi, eta);
        }
    }
    let pairs: [(&mut Vec<f64>, &mut Vec<f64>, &Vec<f64>); 4] = [
        (&mut p.w1, &mut a.w1, &grads.w1),
        (&mut p.b1, &mut a.b1, &grads.b1),
        (&mut p.w2, &mut a.w2, &grads.w2),
        (&mut p.b2, &mut a.b2, &grads.b2),
    ];
    for (param, accum, g) in pairs {
        for ((x, acc), &gi) in param.iter_mut().zip(accum.iter_mut()).zip(g) {
            adagrad_update(x, acc, gi, eta);
        }
    }
    Ok(())
}

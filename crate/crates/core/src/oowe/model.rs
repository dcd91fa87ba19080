use rand::Rng;

use crate::error::{Error, Result};

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OoweConfig {
    /// Ngram length; odd so the center word is well defined.
    pub window: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Weight of the opinion hinge against the language-model hinge.
    pub alpha: f64,
    /// Number of opinion categories.
    pub categories: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for OoweConfig {
    fn default() -> Self {
        OoweConfig {
            window: 3,
            embed_dim: 50,
            hidden_dim: 20,
            learning_rate: 0.1,
            alpha: 0.5,
            categories: 6,
            epochs: 10,
            seed: 1,
        }
    }
}

impl OoweConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::invalid(format!("window must be odd and positive, got {}", self.window)));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.categories == 0 {
            return Err(Error::invalid("embed_dim, hidden_dim and categories must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.categories < 2 && self.alpha > 0.0 {
            return Err(Error::invalid("the opinion hinge needs at least two categories"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Layer sizes of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    /// Embedding rows (vocabulary plus padding and unknown).
    pub rows: usize,
    pub dim: usize,
    pub hidden: usize,
    pub categories: usize,
    pub window: usize,
}

impl Shape {
    pub fn input_len(&self) -> usize {
        self.window * self.dim
    }

    pub fn outputs(&self) -> usize {
        self.categories + 1
    }
}

/// One value per trainable scalar, grouped by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `rows x dim`, row-major.
    pub emb: Vec<f64>,
    /// `hidden x (window * dim)`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `(categories + 1) x hidden`, row-major; row 0 is the language score.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Params {
    pub fn zeros(s: Shape) -> Self {
        Params {
            emb: vec![0.0; s.rows * s.dim],
            w1: vec![0.0; s.hidden * s.input_len()],
            b1: vec![0.0; s.hidden],
            w2: vec![0.0; s.outputs() * s.hidden],
            b2: vec![0.0; s.outputs()],
        }
    }

    pub fn groups(&self) -> [&[f64]; 5] {
        [&self.emb, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.emb, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Lookup table followed by a hard-tanh hidden layer and `C + 1` linear outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OoweModel {
    pub shape: Shape,
    pub params: Params,
    /// AdaGrad squared-gradient accumulators, same layout as `params`.
    pub accum: Params,
}

impl OoweModel {
    pub fn zeros(shape: Shape) -> Self {
        OoweModel {
            shape,
            params: Params::zeros(shape),
            accum: Params::zeros(shape),
        }
    }

    /// Embeddings uniform in `[-0.01, 0.01]`, weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng>(shape: Shape, rng: &mut R) -> Self {
        let mut m = OoweModel::zeros(shape);
        for x in &mut m.params.emb {
            *x = rng.random_range(-0.01..=0.01);
        }
        let a1 = 1.0 / (shape.input_len() as f64).sqrt();
        for x in &mut m.params.w1 {
            *x = rng.random_range(-a1..=a1);
        }
        let a2 = 1.0 / (shape.hidden as f64).sqrt();
        for x in &mut m.params.w2 {
            *x = rng.random_range(-a2..=a2);
        }
        m
    }

    pub fn embedding(&self, row: usize) -> &[f64] {
        let d = self.shape.dim;
        &self.params.emb[row * d..(row + 1) * d]
    }
}

/// Token ids of one window, center in the middle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ngram {
    pub ids: Vec<usize>,
    /// Gold category in `1..=C`.
    pub gold: usize,
    pub corrupted: bool,
}

impl Ngram {
    pub fn new(ids: Vec<usize>, gold: usize) -> Self {
        Ngram {
            ids,
            gold,
            corrupted: false,
        }
    }

    pub fn center(&self) -> usize {
        self.ids.len() / 2
    }
}

/// Intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

pub fn htanh(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub(crate) fn check_ngram(model: &OoweModel, ngram: &Ngram) -> Result<()> {
    let s = model.shape;
    if ngram.ids.len() != s.window {
        return Err(Error::invalid(format!("ngram has {} ids, window is {}", ngram.ids.len(), s.window)));
    }
    if let Some(&bad) = ngram.ids.iter().find(|&&i| i >= s.rows) {
        return Err(Error::invalid(format!("token id {bad} outside embedding table of {} rows", s.rows)));
    }
    Ok(())
}

pub fn activations(model: &OoweModel, ngram: &Ngram) -> Activations {
    let s = model.shape;
    let p = &model.params;
    let mut input = Vec::with_capacity(s.input_len());
    for &id in &ngram.ids {
        input.extend_from_slice(model.embedding(id));
    }
    let n_in = s.input_len();
    let pre: Vec<f64> = (0..s.hidden)
        .map(|h| {
            let row = &p.w1[h * n_in..(h + 1) * n_in];
            p.b1[h] + row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect();
    let hidden: Vec<f64> = pre.iter().map(|&a| htanh(a)).collect();
    let out = (0..s.outputs())
        .map(|o| {
            let row = &p.w2[o * s.hidden..(o + 1) * s.hidden];
            p.b2[o] + row.iter().zip(&hidden).map(|(w, z)| w * z).sum::<f64>()
        })
        .collect();
    Activations {
        input,
        pre,
        hidden,
        out,
    }
}

/// Scores of one ngram: index 0 is the language score, `1..=C` the opinion scores.
pub fn forward(model: &OoweModel, ngram: &Ngram) -> Result<Vec<f64>> {
    check_ngram(model, ngram)?;
    Ok(activations(model, ngram).out)
}

/// Replaces the center word with a different word drawn uniformly from `0..n_words`.
pub fn corrupt<R: Rng>(ngram: &Ngram, n_words: usize, rng: &mut R) -> Result<Ngram> {
    if n_words < 2 {
        return Err(Error::invalid("corruption needs at least two words"));
    }
    let c = ngram.center();
    let orig = ngram.ids[c];
    let mut ids = ngram.ids.clone();
    ids[c] = if orig < n_words {
        let r = rng.random_range(0..n_words - 1);
        if r >= orig {
            r + 1
        } else {
            r
        }
    } else {
        rng.random_range(0..n_words)
    };
    Ok(Ngram {
        ids,
        gold: ngram.gold,
        corrupted: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn shape(rows: usize, dim: usize, hidden: usize, c: usize, w: usize) -> Shape {
        Shape {
            rows,
            dim,
            hidden,
            categories: c,
            window: w,
        }
    }

    #[test]
    fn zero_model_outputs_zero() {
        let mut m = OoweModel::init(shape(10, 4, 3, 6, 3), &mut seeded(1));
        m.params.w1.iter_mut().for_each(|x| *x = 0.0);
        m.params.w2.iter_mut().for_each(|x| *x = 0.0);
        let out = forward(&m, &Ngram::new(vec![1, 2, 3], 1)).unwrap();
        assert_eq!(out, vec![0.0; 7]);
    }

    #[test]
    fn hand_arithmetic() {
        let s = shape(2, 1, 1, 1, 3);
        let mut m = OoweModel::zeros(s);
        m.params.emb.iter_mut().for_each(|x| *x = 1.0);
        m.params.w1.iter_mut().for_each(|x| *x = 1.0);
        m.params.w2.iter_mut().for_each(|x| *x = 1.0);
        let a = activations(&m, &Ngram::new(vec![0, 1, 0], 1));
        assert_eq!(a.pre, vec![3.0]);
        assert_eq!(a.hidden, vec![1.0]);
        assert_eq!(a.out, vec![1.0, 1.0]);
    }

    #[test]
    fn bad_ngrams_rejected() {
        let m = OoweModel::zeros(shape(4, 2, 2, 2, 3));
        assert!(forward(&m, &Ngram::new(vec![0, 1], 1)).is_err());
        assert!(forward(&m, &Ngram::new(vec![0, 1, 4], 1)).is_err());
    }

    #[test]
    fn corruption_rules() {
        let g = Ngram::new(vec![1, 0, 1], 1);
        for s in 0..20 {
            let c = corrupt(&g, 2, &mut seeded(s)).unwrap();
            assert_eq!(c.ids, vec![1, 1, 1]);
            assert!(c.corrupted);
        }
        let g = Ngram::new(vec![3, 5, 7], 2);
        let mut rng = seeded(9);
        for _ in 0..200 {
            let c = corrupt(&g, 50, &mut rng).unwrap();
            let diff = c.ids.iter().zip(&g.ids).filter(|(a, b)| a != b).count();
            assert_eq!(diff, 1);
            assert_ne!(c.ids[1], 5);
            assert!(c.ids[1] < 50);
        }
        assert!(corrupt(&g, 1, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OoweConfig::default().validate().is_ok());
        assert!(OoweConfig { window: 2, ..Default::default() }.validate().is_err());
        assert!(OoweConfig { alpha: 1.5, ..Default::default() }.validate().is_err());
        assert!(OoweConfig { categories: 1, ..Default::default() }.validate().is_err());
        assert!(OoweConfig { categories: 1, alpha: 0.0, ..Default::default() }.validate().is_ok());
    }
}

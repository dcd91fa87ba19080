use rand::seq::SliceRandom;

use super::grad::{adagrad_step, gradients};
use super::model::{corrupt, Ngram, OoweConfig, OoweModel, Shape};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::hashtag::{OpinionLabel, Side, TrainingSet};
use crate::rng::seeded;

/// How opinion labels map onto output categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryMap {
    /// The six training categories, `1..=6`.
    Six,
    /// Clinton side = 1, Trump side = 2.
    Sides,
}

impl CategoryMap {
    pub fn categories(self) -> usize {
        match self {
            CategoryMap::Six => 6,
            CategoryMap::Sides => 2,
        }
    }

    pub fn map(self, label: OpinionLabel) -> Option<usize> {
        match self {
            CategoryMap::Six => label.category(),
            CategoryMap::Sides => label.side().map(|s| match s {
                Side::Clinton => 1,
                Side::Trump => 2,
            }),
        }
    }
}

/// A training example as token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDoc {
    pub gold: usize,
    pub ids: Vec<usize>,
}

pub fn encode(set: &TrainingSet, vocab: &Vocabulary, map: CategoryMap) -> Result<Vec<EncodedDoc>> {
    set.examples
        .iter()
        .map(|e| {
            let gold = map
                .map(e.label)
                .ok_or_else(|| Error::Data(format!("label {} has no category", e.label)))?;
            Ok(EncodedDoc {
                gold,
                ids: e.tokens.iter().map(|t| vocab.lookup(t)).collect(),
            })
        })
        .collect()
}

/// All windows of a document, padded at both ends.
pub fn ngrams(doc: &EncodedDoc, window: usize, pad: usize) -> Vec<Ngram> {
    let half = window / 2;
    let n = doc.ids.len();
    (0..n)
        .map(|center| {
            let ids = (0..window)
                .map(|k| {
                    let pos = center as isize + k as isize - half as isize;
                    if pos < 0 || pos >= n as isize {
                        pad
                    } else {
                        doc.ids[pos as usize]
                    }
                })
                .collect();
            Ngram::new(ids, doc.gold)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean loss per ngram for each epoch.
    pub epoch_losses: Vec<f64>,
    pub ngrams_per_epoch: usize,
}

/// Trains a fresh model with AdaGrad.
///
/// Every epoch visits all ngrams in a new shuffled order; each visit draws
/// one corruption of the center word. The run is a pure function of
/// `config.seed`.
pub fn train(docs: &[EncodedDoc], vocab: &Vocabulary, config: &OoweConfig) -> Result<(OoweModel, TrainLog)> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some(bad) = docs.iter().find(|d| d.gold == 0 || d.gold > config.categories) {
        return Err(Error::invalid(format!("gold category {} outside 1..={}", bad.gold, config.categories)));
    }
    let all: Vec<Ngram> = docs
        .iter()
        .flat_map(|d| ngrams(d, config.window, vocab.pad_index()))
        .collect();
    if all.is_empty() {
        return Err(Error::Empty("training set has no tokens"));
    }
    let shape = Shape {
        rows: vocab.table_size(),
        dim: config.embed_dim,
        hidden: config.hidden_dim,
        categories: config.categories,
        window: config.window,
    };
    let mut rng = seeded(config.seed);
    let mut model = OoweModel::init(shape, &mut rng);
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut log = TrainLog {
        epoch_losses: Vec::with_capacity(config.epochs),
        ngrams_per_epoch: all.len(),
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let t = &all[i];
            let t_r = corrupt(t, vocab.len(), &mut rng)?;
            let (l, g) = gradients(&model, t, &t_r, t.gold, config.alpha)?;
            total += l;
            adagrad_step(&mut model, &g, config.learning_rate)?;
        }
        let mean = total / all.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        log.epoch_losses.push(mean);
    }
    if !model.params.is_finite() {
        return Err(Error::Data("training diverged to non-finite parameters".into()));
    }
    Ok((model, log))
}

/// Embedding row of a token; unknown tokens get the unknown row.
pub fn embed_word<'m>(model: &'m OoweModel, vocab: &Vocabulary, token: &str) -> &'m [f64] {
    model.embedding(vocab.lookup(token))
}

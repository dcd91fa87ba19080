//! Opinion-oriented word embedding.
//!
//! A window of `w` token embeddings is concatenated, passed through a
//! hard-tanh hidden layer and mapped to `C + 1` scores: a language-model
//! score and one opinion score per category. Training minimizes a blend of
//! a ranking hinge against corrupted windows and a multi-class opinion hinge.

mod grad;
mod io;
mod model;
mod train;

pub use grad::{adagrad_step, adagrad_update, gradients, loss, Gradients, ADAGRAD_EPS};
pub use io::{read_model, write_embeddings, write_model};
pub use model::{activations, corrupt, forward, htanh, Activations, Ngram, OoweConfig, OoweModel, Params, Shape};
pub use train::{embed_word, encode, ngrams, train, CategoryMap, EncodedDoc, TrainLog};

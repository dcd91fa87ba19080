use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Token index with occurrence counts.
///
/// Retained tokens occupy `0..len()`, ordered by descending count with a
/// lexicographic tiebreak. Two extra rows follow them: padding at `len()` and
/// the unknown token at `len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_counts(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        let (words, counts) = entries.into_iter().unzip();
        Vocabulary {
            words,
            counts,
            index,
        }
    }

    /// Number of retained tokens (excluding padding and unknown).
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows needed in an embedding table: retained tokens plus the two specials.
    pub fn table_size(&self) -> usize {
        self.words.len() + 2
    }

    pub fn pad_index(&self) -> usize {
        self.words.len()
    }

    pub fn unk_index(&self) -> usize {
        self.words.len() + 1
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or the unknown index.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or_else(|| self.unk_index())
    }

    pub fn word(&self, idx: usize) -> Option<&str> {
        self.words.get(idx).map(String::as_str)
    }

    pub fn count(&self, idx: usize) -> Option<u64> {
        self.counts.get(idx).copied()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    /// Writes `token<TAB>count` lines in index order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, count) in self.words() {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("vocabulary line {}: {e}", n + 1)))?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::Data(format!("vocabulary line {}: missing tab", n + 1)))?;
            let count = count
                .parse()
                .map_err(|_| Error::Data(format!("vocabulary line {}: bad count", n + 1)))?;
            entries.push((word.to_string(), count));
        }
        Ok(Vocabulary::from_counts(entries))
    }
}

/// Counts tokens over a corpus and keeps those seen at least `min_count` times.
pub fn build_vocab<D, T>(corpus: &[D], min_count: u64) -> Result<Vocabulary>
where
    D: AsRef<[T]>,
    T: AsRef<str>,
{
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0usize;
    for doc in corpus {
        for tok in doc.as_ref() {
            *counts.entry(tok.as_ref()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty("corpus has no tokens"));
    }
    let entries = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    Ok(Vocabulary::from_counts(entries))
}

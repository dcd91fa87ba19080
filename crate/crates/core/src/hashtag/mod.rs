//! Hashtag co-occurrence network and opinion-labeled training data.

mod graph;
mod label;
mod propagate;
mod tweets;

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

pub use graph::{build_cooccurrence, edge_log_pvalue, edge_pvalue, significance_filter, CoocEdge, HashtagGraph};
pub use label::{OpinionLabel, Side};
pub use propagate::{propagate_hashtag_labels, HashtagLabels, PropagationOptions};
pub use tweets::{assign_label, label_tweets, prune_labels, TrainingExample, TrainingSet};

use crate::error::Result;

pub const DEFAULT_P_O: f64 = 1e-6;
pub const DEFAULT_PRUNE_R: f64 = 0.001;

/// The four seed hashtags and their categories.
pub fn default_seeds() -> HashMap<String, OpinionLabel> {
    [
        ("#maga", OpinionLabel::ProTrump),
        ("#imwithher", OpinionLabel::ProClinton),
        ("#nevertrump", OpinionLabel::AntiTrump),
        ("#neverhillary", OpinionLabel::AntiClinton),
    ]
    .into_iter()
    .map(|(t, l)| (t.to_string(), l))
    .collect()
}

/// Reads a `hashtag,label` CSV.
pub fn read_seeds<R: Read>(r: R) -> Result<HashMap<String, OpinionLabel>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let tag = rec.get(0).unwrap_or("").trim().to_lowercase();
        let label: OpinionLabel = rec.get(1).unwrap_or("").parse()?;
        let tag = if tag.starts_with('#') { tag } else { format!("#{tag}") };
        out.insert(tag, label);
    }
    Ok(out)
}

/// Writes `hashtag,label,n_i` rows in hashtag order.
pub fn write_label_map<W: Write>(
    w: W,
    labels: &BTreeMap<String, OpinionLabel>,
    counts: &HashMap<String, u64>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["hashtag", "label", "n_i"])?;
    for (tag, l) in labels {
        let n = counts.get(tag).copied().unwrap_or(0).to_string();
        wtr.write_record([tag.as_str(), l.as_str(), n.as_str()])?;
    }
    wtr.flush().map_err(|e| crate::Error::io("<label map>", e))?;
    Ok(())
}

pub fn read_label_map<R: Read>(r: R) -> Result<BTreeMap<String, OpinionLabel>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert(rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").parse()?);
    }
    Ok(out)
}

impl HashtagGraph {
    pub fn count_map(&self) -> HashMap<String, u64> {
        self.tags.iter().cloned().zip(self.counts.iter().copied()).collect()
    }
}

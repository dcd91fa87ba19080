use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use super::label::OpinionLabel;
use crate::corpus::Document;
use crate::error::{Error, Result};

/// Keeps a labeled hashtag only if `n_i > r * max n_j` over hashtags sharing its label.
pub fn prune_labels(
    labels: &BTreeMap<String, OpinionLabel>,
    counts: &HashMap<String, u64>,
    r: f64,
) -> Result<BTreeMap<String, OpinionLabel>> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    let count = |t: &str| counts.get(t).copied().unwrap_or(0);
    let mut class_max: HashMap<OpinionLabel, u64> = HashMap::new();
    for (tag, &l) in labels {
        let m = class_max.entry(l).or_default();
        *m = (*m).max(count(tag));
    }
    Ok(labels
        .iter()
        .filter(|(tag, l)| count(tag) as f64 > r * class_max[*l] as f64)
        .map(|(t, &l)| (t.clone(), l))
        .collect())
}

/// Category of a tweet from the labels of its hashtags.
///
/// Labeled hashtags are counted per label (repeats included). A single most
/// common label wins outright. When exactly the two labels of one side tie
/// for first place the tweet is `Support*` for that side; any other tie is
/// `Mixed`. A tweet without labeled hashtags is `Unidentified`.
pub fn assign_label<'a, I>(hashtags: I, labels: &BTreeMap<String, OpinionLabel>) -> OpinionLabel
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<OpinionLabel, usize> = BTreeMap::new();
    for tag in hashtags {
        if let Some(&l) = labels.get(tag) {
            *counts.entry(l).or_default() += 1;
        }
    }
    let Some(&best) = counts.values().max() else {
        return OpinionLabel::Unidentified;
    };
    let top: Vec<OpinionLabel> = counts
        .iter()
        .filter(|&(_, &c)| c == best)
        .map(|(&l, _)| l)
        .collect();
    use OpinionLabel::*;
    match top.as_slice() {
        [one] => *one,
        [ProClinton, AntiTrump] => SupportClinton,
        [ProTrump, AntiClinton] => SupportTrump,
        _ => Mixed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub label: OpinionLabel,
    pub tokens: Vec<String>,
}

/// Labeled tweets for embedding training.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainingSet {
    pub examples: Vec<TrainingExample>,
    /// Category counts over every input tweet, `Mixed` and `Unidentified` included.
    pub category_counts: BTreeMap<OpinionLabel, usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn token_streams(&self) -> Vec<&[String]> {
        self.examples.iter().map(|e| e.tokens.as_slice()).collect()
    }

    /// `label<TAB>space-joined tokens`, one example per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.examples {
            writeln!(w, "{}\t{}", e.label, e.tokens.join(" "))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut set = TrainingSet::default();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("training line {}: {e}", n + 1)))?;
            if line.is_empty() {
                continue;
            }
            let (label, toks) = line.split_once('\t').unwrap_or((line.as_str(), ""));
            let label: OpinionLabel = label.parse()?;
            if !label.is_training() {
                return Err(Error::Data(format!("training line {}: label {label} not allowed", n + 1)));
            }
            *set.category_counts.entry(label).or_default() += 1;
            set.examples.push(TrainingExample {
                label,
                tokens: toks.split(' ').filter(|s| !s.is_empty()).map(String::from).collect(),
            });
        }
        Ok(set)
    }
}

/// Labels every document and keeps the six training categories.
///
/// With `exclude_labeled` the labeled hashtags are dropped from the token
/// streams, so the embedding cannot simply memorize the labeling rule.
pub fn label_tweets(
    docs: &[Document],
    labels: &BTreeMap<String, OpinionLabel>,
    exclude_labeled: bool,
) -> TrainingSet {
    let mut set = TrainingSet::default();
    for l in OpinionLabel::ALL {
        set.category_counts.insert(l, 0);
    }
    for doc in docs {
        let label = assign_label(doc.hashtags(), labels);
        *set.category_counts.entry(label).or_default() += 1;
        if !label.is_training() {
            continue;
        }
        let tokens = doc
            .tokens
            .iter()
            .filter(|t| !(exclude_labeled && labels.contains_key(&t.surface)))
            .map(|t| t.surface.clone())
            .collect();
        set.examples.push(TrainingExample { label, tokens });
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use OpinionLabel::*;

    fn seeds() -> BTreeMap<String, OpinionLabel> {
        [
            ("#maga", ProTrump),
            ("#imwithher", ProClinton),
            ("#nevertrump", AntiTrump),
            ("#neverhillary", AntiClinton),
        ]
        .into_iter()
        .map(|(t, l)| (t.to_string(), l))
        .collect()
    }

    #[test]
    fn assignment_rules() {
        let s = seeds();
        assert_eq!(assign_label(["#maga", "#maga", "#neverhillary"], &s), ProTrump);
        assert_eq!(assign_label(["#maga", "#neverhillary"], &s), SupportTrump);
        assert_eq!(assign_label(["#imwithher", "#nevertrump"], &s), SupportClinton);
        assert_eq!(assign_label(["#maga", "#imwithher"], &s), Mixed);
        assert_eq!(assign_label(["#maga", "#imwithher", "#nevertrump"], &s), Mixed);
        assert_eq!(assign_label(["#other"], &s), Unidentified);
        assert_eq!(assign_label([], &s), Unidentified);
    }

    #[test]
    fn prune_boundary() {
        let labels: BTreeMap<String, OpinionLabel> = [("#big", ProTrump), ("#ten", ProTrump), ("#eleven", ProTrump), ("#solo", ProClinton)]
            .into_iter()
            .map(|(t, l)| (t.to_string(), l))
            .collect();
        let counts: HashMap<String, u64> = [("#big", 10_000), ("#ten", 10), ("#eleven", 11), ("#solo", 3)]
            .into_iter()
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        let kept = prune_labels(&labels, &counts, 0.001).unwrap();
        assert!(!kept.contains_key("#ten"));
        assert!(kept.contains_key("#eleven"));
        assert!(kept.contains_key("#big"));
        assert!(kept.contains_key("#solo"));
        assert!(prune_labels(&labels, &counts, 0.0).is_err());
    }

    #[test]
    fn training_set_excludes_mixed_and_labeled_tags() {
        let doc = |id: &str, toks: &[&str]| Document {
            post_id: id.into(),
            user_id: "u".into(),
            state: None,
            tokens: toks.iter().map(|t| Token::from_surface(t)).collect(),
        };
        let docs = vec![
            doc("1", &["great", "#maga", "rally"]),
            doc("2", &["#maga", "#imwithher"]),
            doc("3", &["nothing", "here"]),
            doc("4", &["#nevertrump", "#imwithher", "#free"]),
        ];
        let set = label_tweets(&docs, &seeds(), true);
        assert_eq!(set.len(), 2);
        assert_eq!(set.examples[0].label, ProTrump);
        assert_eq!(set.examples[0].tokens, ["great", "rally"]);
        assert_eq!(set.examples[1].label, SupportClinton);
        assert_eq!(set.examples[1].tokens, ["#free"]);
        assert_eq!(set.category_counts.values().sum::<usize>(), docs.len());
        assert!(set.examples.iter().all(|e| e.label.is_training()));

        let keep = label_tweets(&docs, &seeds(), false);
        assert_eq!(keep.examples[0].tokens, ["great", "#maga", "rally"]);

        let mut buf = Vec::new();
        set.write_tsv(&mut buf).unwrap();
        let back = TrainingSet::read_tsv(&buf[..]).unwrap();
        assert_eq!(back.examples, set.examples);
    }
}

//! Aggregation of word vectors into tweet, user and state opinion points.
//!
//! Every level is an unweighted mean of the level below, so each user
//! contributes exactly one point to its state no matter how much it posts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use crate::corpus::{Document, StateCode, Vocabulary};
use crate::error::{Error, Result};
use crate::oowe::OoweModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Tweet,
    User,
    State,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Tweet => "tweet",
            Level::User => "user",
            Level::State => "state",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionPoint {
    pub entity_id: String,
    pub level: Level,
    pub vector: Vec<f64>,
    /// Number of units averaged into this point.
    pub support_count: usize,
}

/// Sum in a fixed binary tree, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Mean of a multiset of equal-length vectors.
///
/// Identical vectors are grouped and weighted by `count / total`, and the
/// groups are summed in a canonical order with [`pairwise_sum`]. The result
/// is therefore bitwise independent of input order and unchanged when every
/// input is repeated the same number of times.
pub fn mean_vector(vectors: &[&[f64]]) -> Option<Vec<f64>> {
    let first = vectors.first()?;
    let d = first.len();
    let mut keyed: Vec<(Vec<u64>, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (v.iter().map(|x| x.to_bits()).collect(), i))
        .collect();
    keyed.sort();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for (pos, (key, idx)) in keyed.iter().enumerate() {
        match groups.last_mut() {
            Some((_, count)) if pos > 0 && keyed[pos - 1].0 == *key => *count += 1,
            _ => groups.push((*idx, 1)),
        }
    }
    let total = vectors.len() as f64;
    let weights: Vec<f64> = groups.iter().map(|&(_, c)| c as f64 / total).collect();
    let mean = (0..d)
        .map(|k| {
            let terms: Vec<f64> = groups
                .iter()
                .zip(&weights)
                .map(|(&(idx, _), &w)| w * vectors[idx][k])
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Some(mean)
}

/// Mean embedding of a tweet's usable tokens.
///
/// Tokens in `excluded` (labeled hashtags) and out-of-vocabulary tokens are
/// ignored; `None` when nothing usable remains.
pub fn tweet_vector(
    model: &OoweModel,
    vocab: &Vocabulary,
    doc_id: &str,
    tokens: &[&str],
    excluded: &HashSet<String>,
) -> Option<OpinionPoint> {
    let rows: Vec<&[f64]> = tokens
        .iter()
        .filter(|t| !excluded.contains(**t))
        .filter_map(|t| vocab.get(t))
        .map(|i| model.embedding(i))
        .collect();
    let vector = mean_vector(&rows)?;
    Some(OpinionPoint {
        entity_id: doc_id.to_string(),
        level: Level::Tweet,
        vector,
        support_count: rows.len(),
    })
}

fn mean_point(id: &str, level: Level, points: &[&OpinionPoint]) -> Result<OpinionPoint> {
    let rows: Vec<&[f64]> = points.iter().map(|p| p.vector.as_slice()).collect();
    let vector = mean_vector(&rows).ok_or(Error::Empty("no points to aggregate"))?;
    Ok(OpinionPoint {
        entity_id: id.to_string(),
        level,
        vector,
        support_count: points.len(),
    })
}

pub fn user_vector(user_id: &str, tweets: &[&OpinionPoint]) -> Result<OpinionPoint> {
    mean_point(user_id, Level::User, tweets)
}

pub fn state_vector(state: &str, users: &[&OpinionPoint]) -> Result<OpinionPoint> {
    mean_point(state, Level::State, users)
}

/// Mean over dimensions of the per-dimension population standard deviation.
pub fn state_variation(users: &[&[f64]]) -> Result<f64> {
    let mean = mean_vector(users).ok_or(Error::Empty("no users"))?;
    let n = users.len() as f64;
    let sds: Vec<f64> = mean
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let sq: Vec<f64> = users.iter().map(|u| (u[k] - m).powi(2)).collect();
            (pairwise_sum(&sq) / n).sqrt()
        })
        .collect();
    Ok(pairwise_sum(&sds) / sds.len().max(1) as f64)
}

/// Users captured per head of population; `None` without a population figure.
pub fn representativeness(user_count: usize, population: Option<u64>) -> Option<f64> {
    match population {
        Some(p) if p > 0 => Some(user_count as f64 / p as f64),
        _ => None,
    }
}

/// Each user's most frequent state over its located posts, ties to the
/// lexicographically smallest code.
pub fn assign_user_states(docs: &[Document]) -> BTreeMap<String, StateCode> {
    let mut tally: HashMap<&str, BTreeMap<StateCode, usize>> = HashMap::new();
    for d in docs {
        if let Some(s) = d.state {
            *tally.entry(&d.user_id).or_default().entry(s).or_default() += 1;
        }
    }
    tally
        .into_iter()
        .filter_map(|(user, counts)| {
            let best = counts.values().copied().max()?;
            let state = counts.into_iter().find(|&(_, c)| c == best)?.0;
            Some((user.to_string(), state))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSummary {
    pub state: StateCode,
    pub vector: Vec<f64>,
    pub user_stddev: f64,
    pub user_count: usize,
    pub representativeness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub tweets: Vec<OpinionPoint>,
    pub users: Vec<OpinionPoint>,
    pub states: Vec<StateSummary>,
    /// Tweets with no usable token.
    pub skipped_tweets: usize,
}

impl Aggregation {
    pub fn state_points(&self) -> Vec<OpinionPoint> {
        self.states
            .iter()
            .map(|s| OpinionPoint {
                entity_id: s.state.to_string(),
                level: Level::State,
                vector: s.vector.clone(),
                support_count: s.user_count,
            })
            .collect()
    }
}

/// Runs the tweet, user and state aggregation over a corpus.
pub fn aggregate(
    model: &OoweModel,
    vocab: &Vocabulary,
    docs: &[Document],
    excluded: &HashSet<String>,
    population: &HashMap<StateCode, u64>,
) -> Result<Aggregation> {
    let tweet_opts: Vec<Option<OpinionPoint>> = crate::par::map_slice(docs, |d| {
        let toks: Vec<&str> = d.tokens.iter().map(|t| t.surface.as_str()).collect();
        tweet_vector(model, vocab, &d.post_id, &toks, excluded)
    });
    let mut by_user: BTreeMap<&str, Vec<&OpinionPoint>> = BTreeMap::new();
    let mut skipped = 0;
    for (d, p) in docs.iter().zip(&tweet_opts) {
        match p {
            Some(p) => by_user.entry(&d.user_id).or_default().push(p),
            None => skipped += 1,
        }
    }
    let user_groups: Vec<(&str, Vec<&OpinionPoint>)> = by_user.into_iter().collect();
    let users: Vec<OpinionPoint> = crate::par::try_map_slice(&user_groups, |(u, ts)| user_vector(u, ts))?;

    let user_state = assign_user_states(docs);
    let mut by_state: BTreeMap<StateCode, Vec<&OpinionPoint>> = BTreeMap::new();
    for u in &users {
        if let Some(&s) = user_state.get(&u.entity_id) {
            by_state.entry(s).or_default().push(u);
        }
    }
    let state_groups: Vec<(StateCode, Vec<&OpinionPoint>)> = by_state.into_iter().collect();
    let states = crate::par::try_map_slice(&state_groups, |(s, us)| {
        let point = state_vector(s.as_str(), us)?;
        let rows: Vec<&[f64]> = us.iter().map(|u| u.vector.as_slice()).collect();
        Ok::<_, Error>(StateSummary {
            state: *s,
            vector: point.vector,
            user_stddev: state_variation(&rows)?,
            user_count: us.len(),
            representativeness: representativeness(us.len(), population.get(s).copied()),
        })
    })?;
    let tweets = tweet_opts.into_iter().flatten().collect();
    Ok(Aggregation {
        tweets,
        users,
        states,
        skipped_tweets: skipped,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t")
}

/// `level<TAB>entity_id<TAB>count<TAB>v1...vd`.
pub fn write_points<W: Write>(mut w: W, points: &[OpinionPoint]) -> std::io::Result<()> {
    for p in points {
        writeln!(w, "{}\t{}\t{}\t{}", p.level, p.entity_id, p.support_count, fmt_vec(&p.vector))?;
    }
    Ok(())
}

/// `state,user_count,stddev,representativeness`; an unknown ratio is left empty.
pub fn write_state_summary<W: Write>(w: W, states: &[StateSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["state", "user_count", "stddev", "representativeness"])?;
    for s in states {
        wtr.write_record([
            s.state.to_string(),
            s.user_count.to_string(),
            s.user_stddev.to_string(),
            s.representativeness.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<state summary>", e))?;
    Ok(())
}

pub fn read_state_summary<R: Read>(r: R) -> Result<Vec<(StateCode, usize, f64, Option<f64>)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Data(format!("bad number in state summary row {rec:?}")))
        };
        let repr = match rec.get(3).unwrap_or("") {
            "" => None,
            _ => Some(num(3)?),
        };
        out.push((rec.get(0).unwrap_or("").parse()?, num(1)? as usize, num(2)?, repr));
    }
    Ok(out)
}

/// Reads `state_code,population`.
pub fn read_population<R: Read>(r: R) -> Result<HashMap<StateCode, u64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let state: StateCode = rec.get(0).unwrap_or("").parse()?;
        let pop = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad population for {state}")))?;
        out.insert(state, pop);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::oowe::Shape;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn naive_mean(vs: &[Vec<f64>]) -> Vec<f64> {
        let d = vs[0].len();
        let mut m = vec![0.0; d];
        for v in vs {
            for k in 0..d {
                m[k] += v[k];
            }
        }
        m.iter().map(|x| x / vs.len() as f64).collect()
    }

    #[test]
    fn trivial_means() {
        let v = vec![0.3, -1.7, 2.5];
        assert_eq!(mean_vector(&[&v]).unwrap(), v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!(mean_vector(&[&v, &neg]).unwrap().iter().all(|&x| x == 0.0));
        assert!(mean_vector(&[]).is_none());
    }

    #[test]
    fn matches_naive_mean() {
        let mut rng = seeded(3);
        let vs: Vec<Vec<f64>> = (0..10).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
        let got = mean_vector(&refs).unwrap();
        for (a, b) in got.iter().zip(naive_mean(&vs)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn variation() {
        let a = [1.0];
        let b = [-1.0];
        assert_eq!(state_variation(&[&a, &b]).unwrap(), 1.0);
        let c = [0.4, 0.2];
        assert_eq!(state_variation(&[&c, &c, &c]).unwrap(), 0.0);
        let mut rng = seeded(8);
        let us: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let refs: Vec<&[f64]> = us.iter().map(Vec::as_slice).collect();
        // two-pass oracle
        let m = naive_mean(&us);
        let mut sd = 0.0;
        for k in 0..4 {
            let var: f64 = us.iter().map(|u| (u[k] - m[k]).powi(2)).sum::<f64>() / 20.0;
            sd += var.sqrt();
        }
        assert!((state_variation(&refs).unwrap() - sd / 4.0).abs() < 1e-10);
    }

    #[test]
    fn representativeness_cases() {
        assert_eq!(representativeness(0, Some(10)), Some(0.0));
        assert_eq!(representativeness(100, Some(1_000_000)), Some(1e-4));
        assert_eq!(representativeness(5, None), None);
        assert_eq!(representativeness(5, Some(0)), None);
    }

    #[test]
    fn user_state_majority() {
        let doc = |u: &str, s: Option<&str>| Document {
            post_id: "p".into(),
            user_id: u.into(),
            state: s.map(|s| s.parse().unwrap()),
            tokens: vec![Token::word("x")],
        };
        let docs = vec![
            doc("a", Some("TX")),
            doc("a", Some("NY")),
            doc("a", Some("TX")),
            doc("b", Some("WY")),
            doc("b", Some("CA")),
            doc("c", None),
        ];
        let m = assign_user_states(&docs);
        assert_eq!(m["a"].as_str(), "TX");
        assert_eq!(m["b"].as_str(), "CA");
        assert!(!m.contains_key("c"));
    }

    fn toy_model() -> (OoweModel, Vocabulary) {
        let vocab = crate::corpus::build_vocab(&[vec!["good", "bad", "wall", "#maga"]], 1).unwrap();
        let shape = Shape { rows: vocab.table_size(), dim: 3, hidden: 2, categories: 2, window: 3 };
        (OoweModel::init(shape, &mut seeded(5)), vocab)
    }

    #[test]
    fn tweet_vector_rules() {
        let (m, v) = toy_model();
        let none = HashSet::new();
        let p = tweet_vector(&m, &v, "t", &["good"], &none).unwrap();
        assert_eq!(p.vector, m.embedding(v.get("good").unwrap()));
        let ex: HashSet<String> = ["#maga".to_string()].into();
        let p = tweet_vector(&m, &v, "t", &["good", "#maga", "unseen"], &ex).unwrap();
        assert_eq!(p.support_count, 1);
        assert!(tweet_vector(&m, &v, "t", &["#maga", "unseen"], &ex).is_none());
    }

    #[test]
    fn participation_control_differs_from_tweet_mean() {
        let a = OpinionPoint { entity_id: "1".into(), level: Level::Tweet, vector: vec![1.0], support_count: 1 };
        let b = OpinionPoint { entity_id: "2".into(), level: Level::Tweet, vector: vec![0.0], support_count: 1 };
        // user x posts a three times, user y posts b once
        let ux = user_vector("x", &[&a, &a, &a]).unwrap();
        let uy = user_vector("y", &[&b]).unwrap();
        let state = state_vector("TX", &[&ux, &uy]).unwrap();
        let tweet_mean = mean_vector(&[&a.vector, &a.vector, &a.vector, &b.vector]).unwrap();
        assert_eq!(state.vector, vec![0.5]);
        assert_ne!(state.vector, tweet_mean);
    }

    proptest! {
        #[test]
        fn permutation_and_duplication_invariant(
            vs in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..12),
            rot in 0usize..12,
            dup in 1usize..12,
        ) {
            let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
            let base = mean_vector(&refs).unwrap();
            let mut shuffled = refs.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
            prop_assert_eq!(&mean_vector(&shuffled).unwrap(), &base);
            let repeated: Vec<&[f64]> = refs.iter().flat_map(|v| std::iter::repeat(*v).take(dup)).collect();
            prop_assert_eq!(&mean_vector(&repeated).unwrap(), &base);
        }
    }
}

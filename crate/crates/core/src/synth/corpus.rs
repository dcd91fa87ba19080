use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{Post, StateCode};
use crate::error::{Error, Result};
use crate::hashtag::{OpinionLabel, Side};
use crate::rng::{cell_rng, seeded};

#[derive(Debug, Clone)]
pub struct SynthCorpusConfig {
    pub tweets: usize,
    pub users: usize,
    pub lexicon_per_class: usize,
    pub neutral_vocab: usize,
    /// Co-occurring hashtags planted per class.
    pub cooc_per_class: usize,
    pub tokens_per_tweet: usize,
    /// Chance that a word slot is filled from the class lexicon.
    pub lexicon_rate: f64,
    /// Chance that a tweet carries its class' seed hashtag.
    pub seed_rate: f64,
    /// Chance of an extra hashtag from another class on the same side.
    pub sibling_rate: f64,
    /// Chance of an extra hashtag from the opposite side.
    pub cross_rate: f64,
    /// Side-neutral hashtags, each tweet carrying one with probability 0.2.
    pub neutral_hashtags: usize,
    /// Chance a tweet follows its author's side.
    pub loyalty: f64,
    /// Fraction of posts from an unofficial client.
    pub bot_rate: f64,
    /// One class per seed hashtag.
    pub seeds: Vec<(String, OpinionLabel)>,
    /// Probability of the Trump side per state; empty leaves posts unlocated.
    pub states: Vec<(StateCode, f64)>,
    pub seed: u64,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        let mut seeds: Vec<(String, OpinionLabel)> = crate::hashtag::default_seeds().into_iter().collect();
        seeds.sort();
        SynthCorpusConfig {
            tweets: 1000,
            users: 200,
            lexicon_per_class: 15,
            neutral_vocab: 150,
            cooc_per_class: 5,
            tokens_per_tweet: 10,
            lexicon_rate: 0.5,
            seed_rate: 0.5,
            sibling_rate: 0.1,
            cross_rate: 0.03,
            neutral_hashtags: 5,
            loyalty: 0.9,
            bot_rate: 0.03,
            seeds,
            states: Vec::new(),
            seed: 1,
        }
    }
}

impl SynthCorpusConfig {
    /// Two classes, one seed per side.
    pub fn two_sided() -> Self {
        SynthCorpusConfig {
            seeds: vec![
                ("#imwithher".into(), OpinionLabel::ProClinton),
                ("#maga".into(), OpinionLabel::ProTrump),
            ],
            ..Default::default()
        }
    }

    pub fn classes(&self) -> usize {
        self.seeds.len()
    }

    fn validate(&self) -> Result<()> {
        if self.tweets == 0 || self.users == 0 || self.tokens_per_tweet == 0 || self.neutral_vocab == 0 {
            return Err(Error::invalid("corpus sizes must be positive"));
        }
        if self.seeds.len() < 2 {
            return Err(Error::invalid("need at least two seed classes"));
        }
        if self.seeds.iter().any(|(_, l)| l.side().is_none()) {
            return Err(Error::invalid("seed labels must take a side"));
        }
        let rates = [self.lexicon_rate, self.seed_rate, self.sibling_rate, self.cross_rate, self.loyalty, self.bot_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// What the generator planted.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// Class index (position in the seed list) per post.
    pub tweet_class: Vec<usize>,
    /// Planted co-occurring hashtags and the class label they belong to.
    pub cooc_labels: BTreeMap<String, OpinionLabel>,
    pub lexicon: Vec<Vec<String>>,
    pub user_side: BTreeMap<String, Side>,
    pub user_state: BTreeMap<String, StateCode>,
}

impl SynthTruth {
    pub fn class_words(&self, class: usize) -> &[String] {
        &self.lexicon[class]
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub posts: Vec<Post>,
    pub truth: SynthTruth,
}

impl SynthCorpus {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.posts {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n").map_err(|e| Error::io("posts", e))?;
        }
        Ok(())
    }
}

fn lexicon_word(class: usize, i: usize) -> String {
    format!("lex{class}w{i}")
}

fn cooc_tag(class: usize, i: usize) -> String {
    format!("#tag{class}x{i}")
}

/// Random state leans around the given winners: the winner's side gets
/// probability `0.5 + margin` with margin uniform in `[0.08, 0.2]`.
pub fn leans_from_outcome(outcome: &[(String, String)], seed: u64) -> Result<Vec<(StateCode, f64)>> {
    let mut rng = cell_rng(seed, "leans", &[]);
    let mut out = Vec::with_capacity(outcome.len());
    for (state, winner) in outcome {
        let code: StateCode = state.parse()?;
        let margin = rng.random_range(0.08..=0.2);
        let p = match winner.to_ascii_lowercase().as_str() {
            "trump" => 0.5 + margin,
            "clinton" => 0.5 - margin,
            other => return Err(Error::Data(format!("unknown winner {other:?} for {state}"))),
        };
        out.push((code, p));
    }
    Ok(out)
}

/// Posts mixing class lexicon, neutral words and class-consistent hashtags.
pub fn gen_opinion_corpus(cfg: &SynthCorpusConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let classes = cfg.classes();
    let side_of: Vec<Side> = cfg.seeds.iter().map(|(_, l)| l.side().expect("validated")).collect();
    let lexicon: Vec<Vec<String>> = (0..classes)
        .map(|c| (0..cfg.lexicon_per_class).map(|i| lexicon_word(c, i)).collect())
        .collect();
    let neutral: Vec<String> = (0..cfg.neutral_vocab).map(|i| format!("word{i}")).collect();
    let neutral_tags: Vec<String> = (0..cfg.neutral_hashtags).map(|i| format!("#topic{i}")).collect();
    let mut cooc_labels = BTreeMap::new();
    let cooc: Vec<Vec<String>> = (0..classes)
        .map(|c| {
            (0..cfg.cooc_per_class)
                .map(|i| {
                    let t = cooc_tag(c, i);
                    cooc_labels.insert(t.clone(), cfg.seeds[c].1);
                    t
                })
                .collect()
        })
        .collect();
    // Classes available to each side, and a class-agnostic tag pool per class.
    let by_side = |s: Side| -> Vec<usize> { (0..classes).filter(|&c| side_of[c] == s).collect() };
    let (clinton, trump) = (by_side(Side::Clinton), by_side(Side::Trump));
    let pool = |c: usize| -> Vec<&String> { std::iter::once(&cfg.seeds[c].0).chain(&cooc[c]).collect() };

    let mut user_side = BTreeMap::new();
    let mut user_state = BTreeMap::new();
    let mut users = Vec::with_capacity(cfg.users);
    for u in 0..cfg.users {
        let id = format!("u{u}");
        let state = (!cfg.states.is_empty()).then(|| cfg.states[u % cfg.states.len()]);
        let p_trump = state.map_or(0.5, |s| s.1);
        let side = if rng.random::<f64>() < p_trump { Side::Trump } else { Side::Clinton };
        user_side.insert(id.clone(), side);
        if let Some((code, _)) = state {
            user_state.insert(id.clone(), code);
        }
        users.push((id, side, state.map(|s| s.0)));
    }
    // Uneven participation: a few users post far more than others.
    let activity: Vec<f64> = (0..cfg.users).map(|u| 1.0 / (1 + u % 7) as f64).collect();
    let pick_user = WeightedIndex::new(&activity).map_err(|e| Error::invalid(e.to_string()))?;

    let mut posts = Vec::with_capacity(cfg.tweets);
    let mut tweet_class = Vec::with_capacity(cfg.tweets);
    for t in 0..cfg.tweets {
        let (uid, side, state) = &users[pick_user.sample(&mut rng)];
        let side = if rng.random::<f64>() < cfg.loyalty {
            *side
        } else {
            match side {
                Side::Clinton => Side::Trump,
                Side::Trump => Side::Clinton,
            }
        };
        let options = match side {
            Side::Clinton if !clinton.is_empty() => &clinton,
            Side::Trump if !trump.is_empty() => &trump,
            _ => &clinton,
        };
        let class = *options.choose(&mut rng).expect("nonempty side");
        let mut words: Vec<String> = Vec::with_capacity(cfg.tokens_per_tweet + 4);
        // Both candidates are named so every post passes the relevance filter.
        let names = if rng.random::<bool>() { ["trump", "hillary"] } else { ["hillary", "trump"] };
        words.extend(names.map(String::from));
        for _ in 0..cfg.tokens_per_tweet {
            let w = if cfg.lexicon_per_class > 0 && rng.random::<f64>() < cfg.lexicon_rate {
                lexicon[class].choose(&mut rng)
            } else {
                neutral.choose(&mut rng)
            };
            words.push(w.expect("nonempty pool").clone());
        }
        let mut tags: Vec<String> = Vec::new();
        if rng.random::<f64>() < cfg.seed_rate || cooc[class].is_empty() {
            tags.push(cfg.seeds[class].0.clone());
        }
        if let Some(tag) = cooc[class].choose(&mut rng) {
            tags.push(tag.clone());
            if rng.random::<bool>() {
                tags.push(cooc[class].choose(&mut rng).expect("nonempty").clone());
            }
        }
        let siblings: Vec<usize> = options.iter().copied().filter(|&c| c != class).collect();
        if !siblings.is_empty() && rng.random::<f64>() < cfg.sibling_rate {
            let c = *siblings.choose(&mut rng).expect("nonempty");
            tags.push((*pool(c).choose(&mut rng).expect("nonempty")).clone());
        }
        let opposite: Vec<usize> = (0..classes).filter(|&c| side_of[c] != side_of[class]).collect();
        if !opposite.is_empty() && rng.random::<f64>() < cfg.cross_rate {
            let c = *opposite.choose(&mut rng).expect("nonempty");
            tags.push((*pool(c).choose(&mut rng).expect("nonempty")).clone());
        }
        if !neutral_tags.is_empty() && rng.random::<f64>() < 0.2 {
            tags.push(neutral_tags.choose(&mut rng).expect("nonempty").clone());
        }
        // Hashtags land at random positions among the words.
        for tag in tags {
            let at = rng.random_range(0..=words.len());
            words.insert(at, tag);
        }
        let (geo_field, profile_location) = match state {
            Some(code) => {
                let r = rng.random::<f64>();
                if r < 0.5 {
                    (Some(format!("Springfield, {code}")), None)
                } else if r < 0.9 {
                    (None, Some(code.to_string()))
                } else {
                    (None, None)
                }
            }
            None => (None, None),
        };
        let client = if rng.random::<f64>() < cfg.bot_rate {
            "AutoPoster 3000"
        } else {
            "Twitter for iPhone"
        };
        posts.push(Post {
            id: format!("p{t}"),
            text: words.join(" "),
            user_id: uid.clone(),
            client: client.into(),
            geo_field,
            profile_location,
            timestamp: 1_470_000_000 + t as i64,
        });
        tweet_class.push(class);
    }
    Ok(SynthCorpus {
        posts,
        truth: SynthTruth {
            tweet_class,
            cooc_labels,
            lexicon,
            user_side,
            user_state,
        },
    })
}

//! Post ingestion: parsing, relevance and bot filtering, tokenization and
//! state inference.

mod geo;
mod tokenize;
mod vocab;

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

pub use geo::{infer_state, Gazetteer, StateCode, STATE_CODES};
pub use tokenize::{tokenize, training_tokens, Token, TokenKind};
pub use vocab::{build_vocab, Vocabulary};

use crate::error::{Error, Result};

pub const DEFAULT_GROUP_A: [&str; 3] = ["trump", "realdonaldtrump", "donaldtrump"];
pub const DEFAULT_GROUP_B: [&str; 3] = ["hillary", "clinton", "hillaryclinton"];

pub const DEFAULT_OFFICIAL_CLIENTS: [&str; 6] = [
    "Twitter for iPhone",
    "Twitter for Android",
    "Twitter Web Client",
    "Twitter for iPad",
    "Twitter Lite",
    "TweetDeck",
];

/// One social-media message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub user_id: String,
    pub client: String,
    #[serde(rename = "geo")]
    pub geo_field: Option<String>,
    pub profile_location: Option<String>,
    #[serde(rename = "ts")]
    pub timestamp: i64,
}

impl Post {
    fn is_valid(&self) -> bool {
        !self.id.is_empty() && !self.text.trim().is_empty()
    }
}

/// Posts read from a JSON Lines stream plus the number of rejected lines.
#[derive(Debug, Default)]
pub struct ParsedPosts {
    pub posts: Vec<Post>,
    pub skipped: usize,
}

/// Parses one post per line. Malformed or invalid lines are logged and skipped;
/// blank lines are ignored.
pub fn parse_posts<R: BufRead>(input: R) -> Result<ParsedPosts> {
    let mut out = ParsedPosts::default();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<post stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Post>(&line) {
            Ok(post) if post.is_valid() => out.posts.push(post),
            Ok(_) => {
                log::warn!("line {}: empty id or text, skipped", n + 1);
                out.skipped += 1;
            }
            Err(e) => {
                log::warn!("line {}: {e}, skipped", n + 1);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn matches_keyword(tokens: &[Token], keywords: &[String]) -> bool {
    tokens.iter().any(|t| match t.kind {
        TokenKind::Word | TokenKind::Mention => keywords.iter().any(|k| t.body() == k),
        TokenKind::Hashtag => keywords.iter().any(|k| t.body().contains(k.as_str())),
        TokenKind::Url => false,
    })
}

/// Whether a text mentions both sides.
///
/// A keyword hits a word or mention token when equal to it, and a hashtag
/// when contained in it.
pub fn is_relevant(text: &str, group_a: &[String], group_b: &[String]) -> bool {
    let tokens = tokenize(text);
    matches_keyword(&tokens, group_a) && matches_keyword(&tokens, group_b)
}

pub fn filter_relevant(posts: Vec<Post>, group_a: &[String], group_b: &[String]) -> Vec<Post> {
    posts
        .into_iter()
        .filter(|p| is_relevant(&p.text, group_a, group_b))
        .collect()
}

/// Keeps posts sent from an official client; returns them with the retained fraction.
pub fn filter_bots(posts: Vec<Post>, official_clients: &HashSet<String>) -> (Vec<Post>, f64) {
    let before = posts.len();
    let kept: Vec<Post> = posts
        .into_iter()
        .filter(|p| official_clients.contains(&p.client))
        .collect();
    let frac = if before == 0 {
        1.0
    } else {
        kept.len() as f64 / before as f64
    };
    (kept, frac)
}

/// A cleaned, tokenized post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub post_id: String,
    pub user_id: String,
    pub state: Option<StateCode>,
    /// Training-stream tokens: words and hashtags only.
    pub tokens: Vec<Token>,
}

impl Document {
    pub fn from_post(post: &Post, gazetteer: &Gazetteer) -> Self {
        Document {
            post_id: post.id.clone(),
            user_id: post.user_id.clone(),
            state: infer_state(post, gazetteer),
            tokens: training_tokens(&post.text),
        }
    }

    pub fn hashtags(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Hashtag)
            .map(|t| t.surface.as_str())
    }

    /// `id<TAB>user<TAB>state<TAB>tokens`, with `-` for an unknown state.
    pub fn to_tsv_line(&self) -> String {
        let toks: Vec<&str> = self.tokens.iter().map(|t| t.surface.as_str()).collect();
        format!(
            "{}\t{}\t{}\t{}",
            self.post_id,
            self.user_id,
            self.state.map_or("-", |s| s.as_str()),
            toks.join(" ")
        )
    }

    pub fn from_tsv_line(line: &str) -> Result<Self> {
        let mut parts = line.splitn(4, '\t');
        let mut field = || {
            parts
                .next()
                .ok_or_else(|| Error::Data(format!("corpus line has too few fields: {line:?}")))
        };
        let post_id = field()?.to_string();
        let user_id = field()?.to_string();
        let state = match field()? {
            "-" => None,
            s => Some(s.parse()?),
        };
        let tokens = field()?
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(Token::from_surface)
            .collect();
        Ok(Document {
            post_id,
            user_id,
            state,
            tokens,
        })
    }
}

/// Full ingest: relevance filter, bot filter, tokenization, geolocation.
pub fn ingest(
    posts: Vec<Post>,
    group_a: &[String],
    group_b: &[String],
    official_clients: &HashSet<String>,
    gazetteer: &Gazetteer,
) -> (Vec<Document>, IngestCounts) {
    let read = posts.len();
    let relevant = filter_relevant(posts, group_a, group_b);
    let n_relevant = relevant.len();
    let (kept, bot_fraction) = filter_bots(relevant, official_clients);
    let docs: Vec<Document> = crate::par::map_slice(&kept, |p| Document::from_post(p, gazetteer));
    let located = docs.iter().filter(|d| d.state.is_some()).count();
    let counts = IngestCounts {
        read,
        relevant: n_relevant,
        retained: docs.len(),
        retained_fraction: bot_fraction,
        located,
    };
    (docs, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IngestCounts {
    pub read: usize,
    pub relevant: usize,
    pub retained: usize,
    pub retained_fraction: f64,
    pub located: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kw(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn post(id: &str, text: &str, client: &str) -> Post {
        Post {
            id: id.into(),
            text: text.into(),
            user_id: "u1".into(),
            client: client.into(),
            geo_field: None,
            profile_location: None,
            timestamp: 1,
        }
    }

    #[test]
    fn parse_counts_bad_lines() {
        let empty = parse_posts("".as_bytes()).unwrap();
        assert!(empty.posts.is_empty());
        assert_eq!(empty.skipped, 0);

        let good = r#"{"id":"1","text":"a","user_id":"u","client":"c","geo":null,"profile_location":null,"ts":5}"#;
        let no_text = r#"{"id":"4","user_id":"u","client":"c","geo":null,"profile_location":null,"ts":5}"#;
        let input = format!("{good}\n{good}\n{good}\n{{\"id\":\"9\",\"te\n{no_text}\n");
        let parsed = parse_posts(input.as_bytes()).unwrap();
        assert_eq!(parsed.posts.len(), 3);
        assert_eq!(parsed.skipped, 2);
        assert_eq!(parsed.posts[0].timestamp, 5);
    }

    #[test]
    fn relevance() {
        let a = kw(&DEFAULT_GROUP_A);
        let b = kw(&DEFAULT_GROUP_B);
        assert!(is_relevant("Hillary will beat Trump", &a, &b));
        assert!(!is_relevant("trump trump trump", &a, &b));
        assert!(is_relevant("#nevertrump #imwithher tonight clinton", &a, &b));
        assert!(!is_relevant("trumpet player likes clintonesque prose", &a, &b));
        assert!(is_relevant("@realDonaldTrump vs hillary", &a, &b));
    }

    #[test]
    fn bots() {
        let official: HashSet<String> = DEFAULT_OFFICIAL_CLIENTS.iter().map(|s| s.to_string()).collect();
        let mut posts: Vec<Post> = (0..9).map(|i| post(&i.to_string(), "x", "Twitter for iPhone")).collect();
        posts.push(post("bot", "x", "SuperBot3000"));
        let (kept, frac) = filter_bots(posts, &official);
        assert_eq!(kept.len(), 9);
        assert!((frac - 0.9).abs() < 1e-15);
        assert!(kept.iter().all(|p| p.client != "SuperBot3000"));
    }

    #[test]
    fn document_tsv_roundtrip() {
        let g = Gazetteer::default();
        let mut p = post("7", "Go #MAGA now @x http://t.co", "c");
        p.geo_field = Some("NC".into());
        let d = Document::from_post(&p, &g);
        assert_eq!(d.state.unwrap().as_str(), "NC");
        assert_eq!(d.hashtags().collect::<Vec<_>>(), ["#maga"]);
        let back = Document::from_tsv_line(&d.to_tsv_line()).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn filters_idempotent(texts in proptest::collection::vec("(trump|hillary|#nevertrump|clinton|vote|now| )+", 0..20),
                              clients in proptest::collection::vec(0usize..3, 20)) {
            let a = kw(&DEFAULT_GROUP_A);
            let b = kw(&DEFAULT_GROUP_B);
            let names = ["Twitter for iPhone", "bot", "TweetDeck"];
            let official: HashSet<String> = DEFAULT_OFFICIAL_CLIENTS.iter().map(|s| s.to_string()).collect();
            let posts: Vec<Post> = texts.iter().enumerate().map(|(i, t)| post(&i.to_string(), t, names[clients[i]])).collect();
            let once = filter_relevant(posts.clone(), &a, &b);
            prop_assert_eq!(filter_relevant(once.clone(), &a, &b), once);
            let (once, _) = filter_bots(posts, &official);
            let (twice, frac) = filter_bots(once.clone(), &official);
            prop_assert_eq!(twice, once);
            prop_assert_eq!(frac, 1.0);
        }
    }
}

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::Deserialize;

use super::tokenize::{tokenize, TokenKind};
use super::Post;
use crate::error::{Error, Result};

/// The 50 U.S. states plus DC.
pub const STATE_CODES: [&str; 51] = [
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN",
    "KS", "KY", "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ",
    "NM", "NV", "NY", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA",
    "WI", "WV", "WY",
];

/// Two-letter region code; always one of [`STATE_CODES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateCode(u8);

impl StateCode {
    pub fn as_str(&self) -> &'static str {
        STATE_CODES[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = StateCode> {
        (0..STATE_CODES.len() as u8).map(StateCode)
    }
}

impl FromStr for StateCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        STATE_CODES
            .binary_search(&up.as_str())
            .map(|i| StateCode(i as u8))
            .map_err(|_| Error::Data(format!("unknown state code {s:?}")))
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn normalize(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

#[derive(Deserialize)]
struct GazetteerRow {
    name: String,
    state_code: String,
}

/// Place-name lookup. State codes always resolve to themselves.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    names: HashMap<String, StateCode>,
    max_words: usize,
}

impl Default for Gazetteer {
    fn default() -> Self {
        let names = StateCode::all()
            .map(|c| (c.as_str().to_lowercase(), c))
            .collect();
        Gazetteer { names, max_words: 1 }
    }
}

impl Gazetteer {
    /// Reads a `name,state_code` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut g = Gazetteer::default();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize() {
            let row: GazetteerRow = row?;
            let code: StateCode = row.state_code.parse()?;
            g.insert(&row.name, code);
        }
        Ok(g)
    }

    pub fn insert(&mut self, name: &str, code: StateCode) {
        let key = normalize(name);
        if key.is_empty() {
            return;
        }
        self.max_words = self.max_words.max(key.split(' ').count());
        self.names.insert(key, code);
    }

    pub fn lookup(&self, name: &str) -> Option<StateCode> {
        self.names.get(&normalize(name)).copied()
    }

    /// Resolves a structured location string such as `"Charlotte, NC"`.
    ///
    /// The whole string is tried first, then comma-separated parts from the
    /// last one backwards.
    pub fn resolve_field(&self, field: &str) -> Option<StateCode> {
        self.lookup(field)
            .or_else(|| field.rsplit(',').find_map(|part| self.lookup(part)))
    }

    /// Finds a place mentioned in free text by whole-token match.
    ///
    /// Multi-word entries are matched as consecutive word tokens. Two-letter
    /// state codes only count when written in upper case, so that words such
    /// as "in", "me" or "ok" are not read as states.
    pub fn resolve_text(&self, text: &str) -> Option<StateCode> {
        let raw: Vec<&str> = text.split_whitespace().collect();
        let words: Vec<(String, bool)> = raw
            .iter()
            .filter_map(|chunk| {
                let tok = tokenize(chunk).into_iter().next()?;
                if tok.kind != TokenKind::Word {
                    return None;
                }
                let upper = chunk
                    .trim_matches(|c: char| !c.is_alphanumeric())
                    .chars()
                    .all(|c| c.is_ascii_uppercase());
                Some((tok.surface, upper))
            })
            .collect();
        for start in 0..words.len() {
            for len in (1..=self.max_words.min(words.len() - start)).rev() {
                let phrase: Vec<&str> = words[start..start + len]
                    .iter()
                    .map(|(w, _)| w.as_str())
                    .collect();
                let phrase = phrase.join(" ");
                if let Some(&code) = self.names.get(&phrase) {
                    let is_code = len == 1 && phrase.len() == 2 && phrase == code.as_str().to_lowercase();
                    if is_code && !words[start].1 {
                        continue;
                    }
                    return Some(code);
                }
            }
        }
        None
    }
}

/// Geo tag first, then profile location, then a place named in the text.
pub fn infer_state(post: &Post, gazetteer: &Gazetteer) -> Option<StateCode> {
    post.geo_field
        .as_deref()
        .and_then(|g| gazetteer.resolve_field(g))
        .or_else(|| {
            post.profile_location
                .as_deref()
                .and_then(|p| gazetteer.resolve_field(p))
        })
        .or_else(|| gazetteer.resolve_text(&post.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> Gazetteer {
        let csv = "name,state_code\nCharlotte,NC\nNYC,NY\nNew York,NY\nTexas,TX\nNew York City,NY\n";
        Gazetteer::from_csv(csv.as_bytes()).unwrap()
    }

    fn post(geo: Option<&str>, profile: Option<&str>, text: &str) -> Post {
        Post {
            id: "1".into(),
            text: text.into(),
            user_id: "u".into(),
            client: "Twitter Web Client".into(),
            geo_field: geo.map(Into::into),
            profile_location: profile.map(Into::into),
            timestamp: 0,
        }
    }

    #[test]
    fn state_codes_sorted_and_closed() {
        assert_eq!(STATE_CODES.len(), 51);
        assert!(STATE_CODES.windows(2).all(|w| w[0] < w[1]));
        assert_eq!("nc".parse::<StateCode>().unwrap().as_str(), "NC");
        assert!("XX".parse::<StateCode>().is_err());
    }

    #[test]
    fn geo_field_direct() {
        let g = gaz();
        assert_eq!(infer_state(&post(Some("Charlotte, NC"), None, "hi"), &g).unwrap().as_str(), "NC");
    }

    #[test]
    fn priority_order() {
        let g = gaz();
        let p = post(None, Some("NYC"), "greetings from in texas");
        assert_eq!(infer_state(&p, &g).unwrap().as_str(), "NY");
        let p = post(None, Some("somewhere"), "greetings from texas");
        assert_eq!(infer_state(&p, &g).unwrap().as_str(), "TX");
    }

    #[test]
    fn unresolvable() {
        let g = gaz();
        assert_eq!(infer_state(&post(Some("Mars"), Some("the moon"), "nowhere"), &g), None);
    }

    #[test]
    fn lowercase_codes_ignored_in_text() {
        let g = gaz();
        assert_eq!(g.resolve_text("i am in love, ok"), None);
        assert_eq!(g.resolve_text("back in OK tonight").unwrap().as_str(), "OK");
        assert_eq!(g.resolve_text("visiting new york city soon").unwrap().as_str(), "NY");
    }
}

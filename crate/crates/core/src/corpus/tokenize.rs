use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Url,
}

/// A lowercased token with its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn word(s: &str) -> Self {
        Token {
            surface: s.to_string(),
            kind: TokenKind::Word,
        }
    }

    pub fn hashtag(s: &str) -> Self {
        let surface = if s.starts_with('#') {
            s.to_string()
        } else {
            format!("#{s}")
        };
        Token {
            surface,
            kind: TokenKind::Hashtag,
        }
    }

    /// Reconstructs a token from its stored surface form.
    pub fn from_surface(s: &str) -> Self {
        let kind = if s.starts_with('#') {
            TokenKind::Hashtag
        } else if s.starts_with('@') {
            TokenKind::Mention
        } else if url_regex().is_match(s) {
            TokenKind::Url
        } else {
            TokenKind::Word
        };
        Token {
            surface: s.to_string(),
            kind,
        }
    }

    /// Words and hashtags feed the embedding; mentions and URLs do not.
    pub fn is_trainable(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Hashtag)
    }

    /// The surface without a leading `#` or `@`.
    pub fn body(&self) -> &str {
        match self.kind {
            TokenKind::Hashtag | TokenKind::Mention => &self.surface[1..],
            _ => &self.surface,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(https?://|www\.)").expect("static regex"))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn split_chunk(chunk: &str) -> Option<Token> {
    if url_regex().is_match(chunk) {
        return Some(Token {
            surface: chunk.to_lowercase(),
            kind: TokenKind::Url,
        });
    }
    let lead = chunk.trim_start_matches(|c: char| !is_word_char(c) && c != '#' && c != '@');
    let (kind, rest) = match lead.chars().next() {
        Some('#') => (TokenKind::Hashtag, lead.trim_start_matches('#')),
        Some('@') => (TokenKind::Mention, lead.trim_start_matches('@')),
        _ => (TokenKind::Word, lead),
    };
    let body = rest
        .trim_start_matches(|c: char| !is_word_char(c))
        .trim_end_matches(|c: char| !is_word_char(c));
    if body.is_empty() {
        return None;
    }
    let body = body.to_lowercase();
    let surface = match kind {
        TokenKind::Hashtag => format!("#{body}"),
        TokenKind::Mention => format!("@{body}"),
        _ => body,
    };
    Some(Token { surface, kind })
}

/// Splits text on whitespace and classifies each piece.
///
/// URLs (`http://`, `https://`, `www.`) are kept whole; other pieces are
/// lowercased and stripped of surrounding punctuation, keeping a leading
/// `#` or `@`. Pieces that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().filter_map(split_chunk).collect()
}

/// Tokens that enter the training stream (mentions and URLs removed).
pub fn training_tokens(text: &str) -> Vec<Token> {
    tokenize(text).into_iter().filter(Token::is_trainable).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(ts: &[Token]) -> Vec<&str> {
        ts.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn strips_mentions_and_urls() {
        let toks = training_tokens("Vote NOW http://x.co @bob #maga!");
        assert_eq!(surfaces(&toks), ["vote", "now", "#maga"]);
        assert_eq!(toks[2].kind, TokenKind::Hashtag);
        let all = tokenize("Vote NOW http://x.co @bob #maga!");
        assert_eq!(all[2].kind, TokenKind::Url);
        assert_eq!(all[3].surface, "@bob");
        assert_eq!(all[3].kind, TokenKind::Mention);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
        assert!(tokenize("... !!! #").is_empty());
    }

    #[test]
    fn hashtags_lowercased() {
        let toks = tokenize("#MAGA #maga");
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0], toks[1]);
        assert_eq!(toks[0].surface, "#maga");
    }

    #[test]
    fn punctuation_split_off() {
        assert_eq!(
            surfaces(&tokenize("(Hillary), \"trump\"... don't www.Example.com")),
            ["hillary", "trump", "don't", "www.example.com"]
        );
        assert_eq!(surfaces(&tokenize("(#ImWithHer)")), ["#imwithher"]);
    }

    proptest! {
        #[test]
        fn concatenation(a in "[a-zA-Z#@ ,.!]{0,30}", b in "[a-zA-Z#@ ,.!]{0,30}") {
            let joined = format!("{a} {b}");
            let mut expect = tokenize(&a);
            expect.extend(tokenize(&b));
            prop_assert_eq!(tokenize(&joined), expect);
        }

        #[test]
        fn tokens_are_well_formed(s in "\\PC{0,60}") {
            for t in tokenize(&s) {
                prop_assert!(!t.surface.is_empty());
                prop_assert!(!t.surface.chars().any(char::is_whitespace));
                match t.kind {
                    TokenKind::Hashtag => prop_assert!(t.surface.starts_with('#')),
                    TokenKind::Mention => prop_assert!(t.surface.starts_with('@')),
                    _ => {}
                }
            }
        }
    }
}

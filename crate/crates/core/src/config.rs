//! Flat `key = value` pipeline configuration.
//!
//! Every key has a default, so an empty file is a complete configuration.
//! Relative paths in a file resolve against the file's directory; paths given
//! on the command line resolve against the working directory. An empty path
//! selects the built-in fixture or the stage artifact in `out_dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifold::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    Path,
    /// Comma-separated non-negative integers.
    IntList,
}

pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub kind: Kind,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, kind: Kind, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        default,
        kind,
        help,
    }
}

pub const KEYS: &[KeySpec] = &[
    key("seed", "1", Kind::Int, "master seed; stage seeds are derived from it"),
    key("out_dir", "out", Kind::Path, "artifact directory"),
    // inputs
    key("posts", "", Kind::Path, "JSON Lines posts; empty = out_dir/posts.jsonl"),
    key("gazetteer", "", Kind::Path, "name,state_code CSV; empty = built-in"),
    key("seeds_file", "", Kind::Path, "hashtag,label CSV; empty = the four default seeds"),
    key("population", "", Kind::Path, "state,population CSV; empty = built-in 2016 table"),
    key("truth", "", Kind::Path, "entity,class outcome CSV; empty = built-in 2016 outcome"),
    key("labels", "", Kind::Path, "entity,class initial labels; empty = built-in 8-label set"),
    key("polling", "", Kind::Path, "entity,class polling calls; empty = built-in"),
    // ingest
    key("keywords_a", "trump,realdonaldtrump,donaldtrump", Kind::Str, "first keyword group"),
    key("keywords_b", "hillary,clinton,hillaryclinton", Kind::Str, "second keyword group"),
    key(
        "official_clients",
        "Twitter for iPhone,Twitter for Android,Twitter Web Client,Twitter for iPad,Twitter Lite,TweetDeck",
        Kind::Str,
        "comma-separated client names kept by the bot filter",
    ),
    key("min_count", "2", Kind::Int, "vocabulary frequency threshold"),
    // hashtag network
    key("p_o", "1e-6", Kind::Float, "edge significance threshold"),
    key("prune_r", "0.001", Kind::Float, "label pruning ratio"),
    key("lpa_max_sweeps", "100", Kind::Int, "label propagation sweep limit"),
    key("lpa_weighted", "false", Kind::Bool, "weight neighbor votes by significance"),
    key("exclude_labeled", "true", Kind::Bool, "drop labeled hashtags from training and aggregation"),
    // embedding
    key("categories", "six", Kind::Str, "six | sides"),
    key("window", "3", Kind::Int, "ngram window"),
    key("embed_dim", "50", Kind::Int, "embedding dimension"),
    key("hidden_dim", "20", Kind::Int, "hidden units"),
    key("learning_rate", "0.1", Kind::Float, "AdaGrad learning rate"),
    key("alpha", "0.5", Kind::Float, "opinion hinge weight"),
    key("epochs", "10", Kind::Int, "training epochs"),
    // lnp
    key("k", "8", Kind::Int, "neighbors for predict"),
    key("metric", "geodesic", Kind::Str, "euclidean | geodesic"),
    key("k_min", "2", Kind::Int, "sweep range start"),
    key("k_max", "25", Kind::Int, "sweep range end"),
    key("runs", "50", Kind::Int, "runs per sweep cell"),
    key("label_counts", "4,8,12,16", Kind::IntList, "initial label counts for the sweep"),
    key("lnp_epsilon", "1e-3", Kind::Float, "Gram ridge factor"),
    key("lnp_nonnegative", "false", Kind::Bool, "solve weights under w >= 0"),
    key("lnp_tol", "1e-9", Kind::Float, "propagation tolerance"),
    key("lnp_max_iters", "10000", Kind::Int, "propagation iteration limit"),
    key("smacof_max_iters", "500", Kind::Int, "smacof iteration limit"),
    key("smacof_tol", "1e-9", Kind::Float, "smacof relative stress tolerance"),
    key("pne_dim", "2", Kind::Int, "embedding dimension for PNE"),
    // synthetic corpus
    key("synth_tweets", "5000", Kind::Int, "synthetic posts"),
    key("synth_users", "1000", Kind::Int, "synthetic users"),
    key("synth_lexicon", "15", Kind::Int, "planted words per class"),
    key("synth_neutral_vocab", "150", Kind::Int, "neutral words"),
    key("synth_cooc", "5", Kind::Int, "planted co-occurring hashtags per class"),
    key("synth_tokens", "10", Kind::Int, "words per post"),
    key("synth_bot_rate", "0.03", Kind::Float, "fraction of posts from unofficial clients"),
    // plotting
    key("plot_size", "variation", Kind::Str, "variation | representativeness | none"),
    key("plot_min_radius", "3", Kind::Float, "smallest circle radius"),
    key("plot_max_radius", "12", Kind::Float, "largest circle radius"),
];

fn spec(name: &str) -> Result<&'static KeySpec> {
    KEYS.iter()
        .find(|k| k.name == name)
        .ok_or_else(|| Error::Config(format!("unknown key {name:?}")))
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// Directory a relative path value resolves against.
    base: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, Entry>,
}

impl Default for Config {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|k| {
                (
                    k.name,
                    Entry {
                        value: k.default.to_string(),
                        base: PathBuf::from("."),
                    },
                )
            })
            .collect();
        Config { values }
    }
}

fn check_value(k: &KeySpec, v: &str) -> Result<()> {
    let bad = || Error::Config(format!("{}: cannot parse {v:?}", k.name));
    match k.kind {
        Kind::Int => v.parse::<u64>().map(drop).map_err(|_| bad()),
        Kind::Float => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(()),
            _ => Err(bad()),
        },
        Kind::Bool => parse_bool(v).map(drop).ok_or_else(bad),
        Kind::IntList => parse_list(v).map(drop).map_err(|_| bad()),
        Kind::Str | Kind::Path => Ok(()),
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

impl Config {
    /// Parses a config text. `base` is the directory of the file.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set_with_base(k.trim(), v.trim(), base)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Config::parse(&text, &base)
    }

    fn set_with_base(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let k = spec(key)?;
        check_value(k, value)?;
        self.values.insert(
            k.name,
            Entry {
                value: value.to_string(),
                base: base.to_path_buf(),
            },
        );
        Ok(())
    }

    /// Command-line override; relative paths resolve against the working directory.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_with_base(key, value, Path::new("."))
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.values[spec(key).expect("known key").name].value
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn bool(&self, key: &str) -> bool {
        parse_bool(self.raw(key)).expect("validated on set")
    }

    pub fn list(&self, key: &str) -> Vec<usize> {
        parse_list(self.raw(key)).expect("validated on set")
    }

    pub fn strings(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    /// Resolved path, `None` when the value is empty.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let e = &self.values[spec(key).expect("known key").name];
        if e.value.is_empty() {
            return None;
        }
        let p = Path::new(&e.value);
        Some(if p.is_absolute() { p.to_path_buf() } else { e.base.join(p) })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out_dir").unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn metric(&self) -> Result<Metric> {
        self.raw("metric").parse()
    }

    /// Every key in name order, one `key = value` line each.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, e) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&e.value);
            out.push('\n');
        }
        out
    }

    /// Hex sha256 of [`Config::dump`].
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.dump().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_defaults() {
        let c = Config::parse("", Path::new(".")).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.f64("p_o"), 1e-6);
        assert_eq!(c.f64("prune_r"), 0.001);
        assert_eq!(c.usize("window"), 3);
        assert_eq!(c.usize("embed_dim"), 50);
        assert_eq!(c.usize("hidden_dim"), 20);
        assert_eq!(c.f64("learning_rate"), 0.1);
        assert_eq!(c.list("label_counts"), vec![4, 8, 12, 16]);
        assert_eq!(c.path("truth"), None);
    }

    #[test]
    fn parse_and_override() {
        let mut c = Config::parse("# comment\n seed = 7 \nruns=3\ntruth = data/t.csv\n", Path::new("/cfg")).unwrap();
        assert_eq!(c.u64("seed"), 7);
        assert_eq!(c.path("truth").unwrap(), PathBuf::from("/cfg/data/t.csv"));
        c.set("truth", "/abs.csv").unwrap();
        assert_eq!(c.path("truth").unwrap(), PathBuf::from("/abs.csv"));
        c.set("runs", "9").unwrap();
        assert_eq!(c.usize("runs"), 9);
    }

    #[test]
    fn errors() {
        assert!(matches!(Config::parse("nope = 1", Path::new(".")), Err(Error::Config(_))));
        assert!(Config::parse("seed 1", Path::new(".")).is_err());
        assert!(Config::parse("seed = -1", Path::new(".")).is_err());
        assert!(Config::parse("lnp_nonnegative = maybe", Path::new(".")).is_err());
        assert!(Config::parse("p_o = nan", Path::new(".")).is_err());
    }

    #[test]
    fn dump_is_canonical() {
        let a = Config::parse("seed = 2\nruns = 5", Path::new(".")).unwrap();
        let b = Config::parse("runs = 5\n\nseed   =   2", Path::new("/elsewhere")).unwrap();
        assert_eq!(a.dump(), b.dump());
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Config::default().hash());
        let dump = a.dump();
        let names: Vec<&str> = dump.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(names.len(), KEYS.len());
        // the dump parses back to the same values
        assert_eq!(Config::parse(&a.dump(), Path::new(".")).unwrap().dump(), a.dump());
    }

    #[test]
    fn defaults_are_valid() {
        for k in KEYS {
            check_value(k, k.default).unwrap();
        }
    }
}

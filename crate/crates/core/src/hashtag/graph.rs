use std::collections::HashMap;

use crate::error::{Error, Result};

/// An undirected co-occurrence edge between hashtags `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocEdge {
    pub i: usize,
    pub j: usize,
    /// Tweets containing both hashtags.
    pub k: u64,
    /// Probability of exactly `k` co-occurrences by chance.
    pub p: f64,
    /// `ln p`, kept separately so tiny probabilities survive underflow.
    pub ln_p: f64,
    /// Significance weight `ln(p_o / p)`, set by [`significance_filter`].
    pub s: Option<f64>,
}

/// Hashtag co-occurrence network.
#[derive(Debug, Clone, PartialEq)]
pub struct HashtagGraph {
    /// Hashtags in lexicographic order.
    pub tags: Vec<String>,
    /// `counts[i]` is the number of tweets containing `tags[i]`.
    pub counts: Vec<u64>,
    /// Edges sorted by `(i, j)`.
    pub edges: Vec<CoocEdge>,
    /// Number of tweets the graph was built from.
    pub n_docs: u64,
}

impl HashtagGraph {
    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).ok()
    }

    pub fn n_vertices(&self) -> usize {
        self.tags.len()
    }

    /// Neighbor lists `(vertex, weight)`; weight is `s` when set, else 1.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.tags.len()];
        for e in &self.edges {
            let w = e.s.unwrap_or(1.0);
            adj[e.i].push((e.j, w));
            adj[e.j].push((e.i, w));
        }
        adj
    }
}

type Counts = (HashMap<String, u64>, HashMap<(String, String), u64>);

fn count_chunk<D, S>(docs: &[D]) -> Counts
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut n: HashMap<String, u64> = HashMap::new();
    let mut k: HashMap<(String, String), u64> = HashMap::new();
    for doc in docs {
        let mut tags: Vec<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        tags.sort_unstable();
        tags.dedup();
        for (a, &ta) in tags.iter().enumerate() {
            *n.entry(ta.to_string()).or_default() += 1;
            for &tb in &tags[a + 1..] {
                *k.entry((ta.to_string(), tb.to_string())).or_default() += 1;
            }
        }
    }
    (n, k)
}

/// Builds the co-occurrence network from per-tweet hashtag lists.
///
/// Hashtags repeated inside a tweet count once, so a pair is counted at most
/// once per tweet. Counting runs in parallel over chunks of tweets.
pub fn build_cooccurrence<D, S>(docs: &[D]) -> HashtagGraph
where
    D: AsRef<[S]> + Sync,
    S: AsRef<str>,
{
    const CHUNK: usize = 4096;
    let chunks: Vec<&[D]> = docs.chunks(CHUNK).collect();
    let partial = crate::par::map_slice(&chunks, |c| count_chunk(c));
    let mut n: HashMap<String, u64> = HashMap::new();
    let mut k: HashMap<(String, String), u64> = HashMap::new();
    for (pn, pk) in partial {
        for (t, c) in pn {
            *n.entry(t).or_default() += c;
        }
        for (pair, c) in pk {
            *k.entry(pair).or_default() += c;
        }
    }
    let mut tags: Vec<String> = n.keys().cloned().collect();
    tags.sort();
    let index: HashMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let counts = tags.iter().map(|t| n[t]).collect();
    let mut edges: Vec<CoocEdge> = k
        .iter()
        .map(|((a, b), &c)| CoocEdge {
            i: index[a.as_str()],
            j: index[b.as_str()],
            k: c,
            p: f64::NAN,
            ln_p: f64::NAN,
            s: None,
        })
        .collect();
    edges.sort_by_key(|e| (e.i, e.j));
    let mut g = HashtagGraph {
        tags,
        counts,
        edges,
        n_docs: docs.len() as u64,
    };
    compute_pvalues(&mut g);
    g
}

fn compute_pvalues(g: &mut HashtagGraph) {
    let counts = &g.counts;
    let n_docs = g.n_docs;
    let lnps = crate::par::map_slice(&g.edges, |e| {
        edge_log_pvalue(counts[e.i], counts[e.j], e.k, n_docs).expect("counts from a real corpus are consistent")
    });
    for (e, ln_p) in g.edges.iter_mut().zip(lnps) {
        e.ln_p = ln_p;
        e.p = ln_p.exp().clamp(0.0, 1.0);
    }
}

/// Natural log of the chance probability of exactly `k` co-occurrences.
///
/// Evaluates
///
/// ```text
/// p(k) = prod_{m=0}^{n_j-k-1} (1 - n_i/(N-m)) * prod_{m=0}^{k-1} (n_i-m)(n_j-m) / ((N-n_j+k-m)(k-m))
/// ```
///
/// as a sum of logarithms of its factors. Returns `-inf` when a factor is
/// zero (more co-occurrences are forced than `k` allows).
pub fn edge_log_pvalue(n_i: u64, n_j: u64, k: u64, n_docs: u64) -> Result<f64> {
    if k > n_i.min(n_j) || n_i > n_docs || n_j > n_docs {
        return Err(Error::invalid(format!(
            "need 0 <= k <= min(n_i, n_j) and n_i, n_j <= N; got n_i={n_i} n_j={n_j} k={k} N={n_docs}"
        )));
    }
    let mut acc = 0.0f64;
    for m in 0..(n_j - k) {
        let rest = n_docs - m;
        if rest <= n_i {
            return Ok(f64::NEG_INFINITY);
        }
        acc += ((rest - n_i) as f64).ln() - (rest as f64).ln();
    }
    for m in 0..k {
        acc += ((n_i - m) as f64).ln() + ((n_j - m) as f64).ln()
            - ((n_docs - n_j + k - m) as f64).ln()
            - ((k - m) as f64).ln();
    }
    Ok(acc)
}

/// Probability of exactly `k` co-occurrences by chance, in `[0, 1]`.
pub fn edge_pvalue(n_i: u64, n_j: u64, k: u64, n_docs: u64) -> Result<f64> {
    edge_log_pvalue(n_i, n_j, k, n_docs).map(|l| l.exp().clamp(0.0, 1.0))
}

/// Keeps edges with `p < p_o` and weights them by `s = ln(p_o / p)`.
/// Vertices are kept even when they lose all edges.
pub fn significance_filter(graph: &HashtagGraph, p_o: f64) -> Result<HashtagGraph> {
    if !(p_o > 0.0 && p_o < 1.0) {
        return Err(Error::invalid(format!("p_o must lie in (0, 1), got {p_o}")));
    }
    let ln_po = p_o.ln();
    let edges = graph
        .edges
        .iter()
        .filter(|e| e.ln_p < ln_po)
        .map(|e| CoocEdge {
            s: Some(ln_po - e.ln_p),
            ..e.clone()
        })
        .collect();
    Ok(HashtagGraph {
        edges,
        ..graph.clone()
    })
}

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::HashtagGraph;
use super::label::OpinionLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Sweep limit.
    pub max_sweeps: usize,
    /// Count neighbors by significance weight instead of by number.
    pub weighted: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            max_sweeps: 100,
            weighted: false,
        }
    }
}

/// Labels found by propagation together with run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HashtagLabels {
    pub labels: BTreeMap<String, OpinionLabel>,
    pub sweeps: usize,
    pub stable: bool,
}

/// Labels with the highest neighbor score around `v`.
fn leaders(
    v: usize,
    adj: &[Vec<(usize, f64)>],
    current: &[Option<OpinionLabel>],
    weighted: bool,
) -> Vec<OpinionLabel> {
    let mut score: Vec<(OpinionLabel, f64)> = Vec::new();
    for &(u, w) in &adj[v] {
        if let Some(l) = current[u] {
            let add = if weighted { w } else { 1.0 };
            match score.iter_mut().find(|(m, _)| *m == l) {
                Some(entry) => entry.1 += add,
                None => score.push((l, add)),
            }
        }
    }
    let best = score.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let mut top: Vec<OpinionLabel> = score
        .into_iter()
        .filter(|&(_, s)| s == best)
        .map(|(l, _)| l)
        .collect();
    top.sort();
    top
}

/// Asynchronous majority-label propagation from clamped seed hashtags.
///
/// Each sweep visits the unseeded vertices in a fresh random order; a vertex
/// takes the label most common among its labeled neighbors, choosing
/// uniformly among tied labels. Propagation stops once every labeled vertex
/// holds a label that no other label outnumbers among its neighbors and no
/// unlabeled vertex touches a labeled one, or after `max_sweeps`.
/// Vertices that no seed can reach stay unlabeled.
pub fn propagate_hashtag_labels<R: Rng>(
    graph: &HashtagGraph,
    seeds: &HashMap<String, OpinionLabel>,
    rng: &mut R,
    opts: PropagationOptions,
) -> HashtagLabels {
    let n = graph.n_vertices();
    let adj = graph.adjacency();
    let mut current: Vec<Option<OpinionLabel>> = vec![None; n];
    let mut is_seed = vec![false; n];
    let mut seed_list: Vec<(&String, &OpinionLabel)> = seeds.iter().collect();
    seed_list.sort();
    for (tag, &label) in seed_list {
        if let Some(i) = graph.index_of(tag) {
            current[i] = Some(label);
            is_seed[i] = true;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&v| !is_seed[v]).collect();
    let mut sweeps = 0;
    let mut stable = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        order.shuffle(rng);
        for &v in &order {
            let top = leaders(v, &adj, &current, opts.weighted);
            let pick = match top.len() {
                0 => continue,
                1 => top[0],
                len => top[rng.random_range(0..len)],
            };
            current[v] = Some(pick);
        }
        stable = order.iter().all(|&v| {
            let top = leaders(v, &adj, &current, opts.weighted);
            match current[v] {
                Some(l) => top.contains(&l),
                None => top.is_empty(),
            }
        });
        if stable {
            break;
        }
    }
    let labels = current
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|l| (graph.tags[i].clone(), l)))
        .collect();
    HashtagLabels {
        labels,
        sweeps,
        stable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashtag::graph::CoocEdge;
    use crate::rng::seeded;

    fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> HashtagGraph {
        let tags: Vec<String> = (0..n).map(|i| format!("#t{i:03}")).collect();
        let edges = edges
            .iter()
            .map(|&(a, b)| CoocEdge {
                i: a.min(b),
                j: a.max(b),
                k: 1,
                p: 0.0,
                ln_p: f64::NEG_INFINITY,
                s: Some(1.0),
            })
            .collect();
        HashtagGraph {
            tags,
            counts: vec![1; n],
            edges,
            n_docs: 1,
        }
    }

    fn seed(g: &HashtagGraph, pairs: &[(usize, OpinionLabel)]) -> HashMap<String, OpinionLabel> {
        pairs.iter().map(|&(i, l)| (g.tags[i].clone(), l)).collect()
    }

    #[test]
    fn star_takes_center_label() {
        let g = graph_from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let seeds = seed(&g, &[(0, OpinionLabel::ProTrump)]);
        let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(1), PropagationOptions::default());
        assert!(out.stable);
        for i in 1..5 {
            assert_eq!(out.labels[&g.tags[i]], OpinionLabel::ProTrump);
        }
        assert!(!out.labels.contains_key(&g.tags[5]), "isolated vertex stays unlabeled");
    }

    #[test]
    fn seeds_never_relabeled() {
        let g = graph_from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        let seeds = seed(&g, &[(0, OpinionLabel::ProTrump), (1, OpinionLabel::ProClinton)]);
        for s in 0..20 {
            let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(s), PropagationOptions::default());
            assert_eq!(out.labels[&g.tags[0]], OpinionLabel::ProTrump);
            assert_eq!(out.labels[&g.tags[1]], OpinionLabel::ProClinton);
        }
    }

    #[test]
    fn two_cliques_follow_their_seed() {
        let mut edges = Vec::new();
        for c in 0..2 {
            for a in 0..10 {
                for b in a + 1..10 {
                    edges.push((c * 10 + a, c * 10 + b));
                }
            }
        }
        edges.push((9, 10));
        let g = graph_from_edges(20, &edges);
        let seeds = seed(&g, &[(0, OpinionLabel::ProTrump), (19, OpinionLabel::ProClinton)]);
        let mut correct = 0;
        let runs = 50;
        for s in 0..runs {
            let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(s), PropagationOptions::default());
            for i in 0..20 {
                let want = if i < 10 { OpinionLabel::ProTrump } else { OpinionLabel::ProClinton };
                correct += usize::from(out.labels.get(&g.tags[i]) == Some(&want));
            }
        }
        let acc = correct as f64 / (20 * runs) as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn ties_split_evenly() {
        let g = graph_from_edges(3, &[(0, 2), (1, 2)]);
        let seeds = seed(&g, &[(0, OpinionLabel::ProTrump), (1, OpinionLabel::ProClinton)]);
        let runs = 1000;
        let trump = (0..runs)
            .filter(|&s| {
                let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(s), PropagationOptions::default());
                out.labels[&g.tags[2]] == OpinionLabel::ProTrump
            })
            .count();
        let frac = trump as f64 / runs as f64;
        assert!((frac - 0.5).abs() <= 0.05, "ProTrump fraction {frac}");
    }

    #[test]
    fn weighted_option_follows_strong_edge() {
        let mut g = graph_from_edges(4, &[(0, 3), (1, 3), (2, 3)]);
        g.edges[2].s = Some(10.0);
        let seeds = seed(
            &g,
            &[(0, OpinionLabel::ProTrump), (1, OpinionLabel::ProTrump), (2, OpinionLabel::ProClinton)],
        );
        let opts = PropagationOptions { weighted: true, ..Default::default() };
        let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(3), opts);
        assert_eq!(out.labels[&g.tags[3]], OpinionLabel::ProClinton);
        let out = propagate_hashtag_labels(&g, &seeds, &mut seeded(3), PropagationOptions::default());
        assert_eq!(out.labels[&g.tags[3]], OpinionLabel::ProTrump);
    }
}

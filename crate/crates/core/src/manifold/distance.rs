use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::{DistanceMatrix, Metric, PointSet};
use crate::error::{Error, Result};
use crate::par;

pub fn pairwise_euclidean(points: &PointSet) -> DistanceMatrix {
    let n = points.len();
    let mut data = vec![0.0; n * n];
    par::fill_rows(&mut data, n, |i, row| {
        let a = points.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                let b = points.row(j);
                *out = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            }
        }
    });
    DistanceMatrix {
        n,
        data,
        metric: Metric::Euclidean,
    }
}

/// The `k` nearest neighbours of every point, ties broken by index.
pub fn knn_sets(d: &DistanceMatrix, k: usize) -> Vec<Vec<usize>> {
    par::map_range(d.n, |i| {
        let row = d.row(i);
        let mut others: Vec<usize> = (0..d.n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        others.truncate(k);
        others
    })
}

/// Symmetrized `m`-NN adjacency lists with distance weights.
pub fn knn_graph(d: &DistanceMatrix, m: usize) -> Vec<Vec<(usize, f64)>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d.n];
    for (i, nbrs) in knn_sets(d, m).into_iter().enumerate() {
        for j in nbrs {
            adj[i].push((j, d.get(i, j)));
            adj[j].push((i, d.get(i, j)));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    adj
}

fn connected(adj: &[Vec<(usize, f64)>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize, out: &mut [f64]) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let mut heap = BinaryHeap::from([State(0.0, source)]);
    while let Some(State(dist, u)) = heap.pop() {
        if dist > out[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = dist + w;
            if nd < out[v] {
                out[v] = nd;
                heap.push(State(nd, v));
            }
        }
    }
}

/// Geodesic distances plus the neighbourhood size that made the graph connected.
#[derive(Debug, Clone)]
pub struct GeodesicGraph {
    pub m: usize,
    pub distances: DistanceMatrix,
}

/// Shortest paths over the smallest connected `m`-NN graph, `m` counted up from 2.
pub fn geodesic_distances(points: &PointSet) -> Result<GeodesicGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("geodesic distances need at least two points"));
    }
    let euclid = pairwise_euclidean(points);
    let mut m = 2.min(n - 1);
    let adj = loop {
        let adj = knn_graph(&euclid, m);
        if connected(&adj) {
            break adj;
        }
        m += 1;
    };
    let mut data = vec![0.0; n * n];
    par::fill_rows(&mut data, n, |i, row| {
        dijkstra(&adj, i, row);
        // Path sums can round a hair below the straight line.
        for (j, x) in row.iter_mut().enumerate() {
            *x = x.max(euclid.get(i, j));
        }
    });
    // Symmetrize against rounding in the two directions.
    for i in 0..n {
        for j in i + 1..n {
            let v = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    log::debug!("geodesic graph connected at m = {m}");
    Ok(GeodesicGraph {
        m,
        distances: DistanceMatrix {
            n,
            data,
            metric: Metric::Geodesic,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_basics() {
        let d = pairwise_euclidean(&line(&[0.0, 3.0]));
        assert_eq!(d.get(0, 1), 3.0);
        let d = pairwise_euclidean(&PointSet::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap());
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn knn_ties_by_index() {
        let d = pairwise_euclidean(&line(&[0.0, 1.0, -1.0, 2.0]));
        assert_eq!(knn_sets(&d, 2)[0], vec![1, 2]);
        assert_eq!(knn_sets(&d, 1)[0], vec![1]);
    }

    #[test]
    fn geodesic_path_additivity() {
        let g = geodesic_distances(&line(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(g.m, 2);
        assert_eq!(g.distances.get(0, 3), 3.0);
    }

    #[test]
    fn geodesic_triangle_equals_euclidean() {
        let p = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.3, 0.8]).unwrap();
        let g = geodesic_distances(&p).unwrap().distances;
        let e = pairwise_euclidean(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.get(i, j) - e.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn geodesic_grows_m_until_connected() {
        // Two far-apart triples: each 2-NN list stays inside its own triple.
        let mut xs = Vec::new();
        for c in [0.0, 100.0] {
            xs.extend([c, c + 0.1, c + 0.2]);
        }
        let g = geodesic_distances(&line(&xs)).unwrap();
        assert_eq!(g.m, 3);
        assert!(g.distances.data.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn duplicates_allowed() {
        let g = geodesic_distances(&line(&[1.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(g.distances.get(0, 1), 0.0);
        assert_eq!(g.distances.get(0, 3), 1.0);
    }

    proptest! {
        #[test]
        fn geodesic_invariants(xs in prop::collection::vec(-10.0f64..10.0, 6..40)) {
            let p = PointSet::new(2, xs[..xs.len() / 2 * 2].to_vec()).unwrap();
            prop_assume!(p.len() >= 3);
            let g = geodesic_distances(&p).unwrap().distances;
            let e = pairwise_euclidean(&p);
            let n = p.len();
            for i in 0..n {
                prop_assert_eq!(g.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(g.get(i, j), g.get(j, i));
                    prop_assert!(g.get(i, j) >= e.get(i, j));
                    for l in 0..n {
                        prop_assert!(g.get(i, j) <= g.get(i, l) + g.get(l, j) + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn euclidean_matches_naive(xs in prop::collection::vec(-5.0f64..5.0, 3..30)) {
            let p = PointSet::new(3, xs[..xs.len() / 3 * 3].to_vec()).unwrap();
            let d = pairwise_euclidean(&p);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    let mut s = 0.0;
                    for c in 0..3 {
                        s += (p.row(i)[c] - p.row(j)[c]).powi(2);
                    }
                    prop_assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
                }
            }
        }
    }
}

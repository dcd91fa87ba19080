use std::io::{Read, Write};

use rand::seq::SliceRandom;

use super::{discretize, lle_embedding, prepare, propagate, reconstruction_weights, PropagateOptions, WeightOptions};
use crate::error::{Error, Result};
use crate::manifold::{pairwise_euclidean, pne, select_k, KSelection, Metric, PointSet, SmacofOptions};
use crate::rng::{cell_rng, Rng};
use crate::{par, stats};

/// Balanced random labels: `count` entities split as evenly as possible over
/// the classes, the remainder going to the lowest classes.
pub fn draw_balanced(truth: &[usize], classes: usize, count: usize, rng: &mut Rng) -> Vec<Option<usize>> {
    let mut out = vec![None; truth.len()];
    for c in 0..classes {
        let want = count / classes + usize::from(c < count % classes);
        let mut members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == c).collect();
        members.shuffle(rng);
        for &i in members.iter().take(want) {
            out[i] = Some(c);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub label_counts: Vec<usize>,
    pub k_range: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub weights: WeightOptions,
    pub propagate: PropagateOptions,
    pub smacof: SmacofOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            label_counts: vec![4, 8, 12, 16],
            k_range: (2..=25).collect(),
            runs: 50,
            seed: 1,
            metrics: vec![Metric::Euclidean, Metric::Geodesic],
            weights: WeightOptions::default(),
            propagate: PropagateOptions::default(),
            smacof: SmacofOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub metric: Metric,
    pub label_count: usize,
    pub k: usize,
    pub run: usize,
    /// Wrong or undecided unlabeled entities.
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub metric: Metric,
    pub label_count: usize,
    pub k: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Median and 2.5/97.5 percentiles of errors per (metric, label count, k).
    pub fn summary(&self) -> Vec<SweepSummary> {
        use std::collections::BTreeMap;
        let mut groups: BTreeMap<(String, usize, usize), (Metric, Vec<f64>)> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((r.metric.to_string(), r.label_count, r.k))
                .or_insert_with(|| (r.metric, Vec::new()))
                .1
                .push(r.errors as f64);
        }
        groups
            .into_iter()
            .map(|((_, label_count, k), (metric, v))| SweepSummary {
                metric,
                label_count,
                k,
                median: stats::median(&v),
                lo: stats::quantile(&v, 0.025),
                hi: stats::quantile(&v, 0.975),
            })
            .collect()
    }

    pub fn median(&self, metric: Metric, label_count: usize, k: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric && r.label_count == label_count && r.k == k)
            .map(|r| r.errors as f64)
            .collect();
        (!v.is_empty()).then(|| stats::median(&v))
    }
}

/// Error counts for every (metric, run, k, label count) cell.
///
/// The unfolding depends only on (metric, run) and the weights only on
/// (metric, run, k), so each is computed once and shared by the cells below
/// it. Label draws depend only on (label count, run), so both metrics see
/// the same initial labels.
pub fn sensitivity_sweep(points: &PointSet, truth: &[usize], classes: usize, cfg: &SweepConfig) -> Result<SweepTable> {
    if truth.len() != points.len() {
        return Err(Error::invalid("truth does not match the point count"));
    }
    if truth.iter().any(|&c| c >= classes) {
        return Err(Error::invalid("truth class out of range"));
    }
    if cfg.runs == 0 || cfg.k_range.is_empty() || cfg.label_counts.is_empty() {
        return Err(Error::invalid("sweep needs runs, k values and label counts"));
    }
    let jobs: Vec<(Metric, usize)> = cfg
        .metrics
        .iter()
        .flat_map(|&m| (0..cfg.runs).map(move |r| (m, r)))
        .collect();
    let blocks = par::try_map_slice(&jobs, |&(metric, run)| -> Result<Vec<SweepRow>> {
        let mut rng = cell_rng(cfg.seed, "unfold", &[run as u64]);
        let prepared = prepare(points, metric, &mut rng, &cfg.smacof)?;
        let mut rows = Vec::new();
        for &k in &cfg.k_range {
            let w = reconstruction_weights(&prepared, k, &cfg.weights)?;
            for &count in &cfg.label_counts {
                let mut lrng = cell_rng(cfg.seed, "labels", &[count as u64, run as u64]);
                let labels = draw_balanced(truth, classes, count, &mut lrng);
                let p = propagate(&w, &labels, classes, &cfg.propagate)?;
                let predicted = discretize(&p.scores);
                let errors = (0..truth.len())
                    .filter(|&i| labels[i].is_none() && predicted[i] != Some(truth[i]))
                    .count();
                rows.push(SweepRow {
                    metric,
                    label_count: count,
                    k,
                    run,
                    errors,
                });
            }
        }
        Ok(rows)
    })?;
    let mut rows: Vec<SweepRow> = blocks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.metric.to_string(), a.label_count, a.k, a.run).cmp(&(b.metric.to_string(), b.label_count, b.k, b.run))
    });
    Ok(SweepTable { rows })
}

/// Median reconstruction-embedding PNE per `k`, and its argmin.
///
/// For each run the points are prepared (unfolded for the geodesic metric),
/// weights are solved for `k`, and the `dim`-dimensional embedding those
/// weights reconstruct best is compared with the prepared points. Both
/// distance matrices are scaled to unit mean before comparison.
pub fn pne_curve(
    points: &PointSet,
    metric: Metric,
    k_range: &[usize],
    runs: usize,
    seed: u64,
    dim: usize,
    weights: &WeightOptions,
    smacof: &SmacofOptions,
) -> Result<KSelection> {
    let runs = if metric == Metric::Euclidean { 1 } else { runs };
    let prepared: Vec<PointSet> = par::map_range(runs, |run| {
        let mut rng = cell_rng(seed, "unfold", &[run as u64]);
        prepare(points, metric, &mut rng, smacof)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let originals: Vec<_> = prepared.iter().map(|p| pairwise_euclidean(p).normalized()).collect();
    select_k(k_range, runs, |k, run| {
        let w = reconstruction_weights(&prepared[run], k, weights)?;
        let y = lle_embedding(&w, dim)?;
        pne(&originals[run], &pairwise_euclidean(&y).normalized(), k)
    })
}

/// `metric,label_count,k,run,errors`.
pub fn write_sweep_table<W: Write>(w: W, table: &SweepTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["metric", "label_count", "k", "run", "errors"])?;
    for r in &table.rows {
        wtr.write_record([
            r.metric.to_string(),
            r.label_count.to_string(),
            r.k.to_string(),
            r.run.to_string(),
            r.errors.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("sweep table", e))?;
    Ok(())
}

pub fn read_sweep_table<R: Read>(r: R) -> Result<SweepTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Data("short sweep row".into()));
        let num = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|_| Error::Data(format!("bad number in sweep row: {:?}", rec.get(i))))
        };
        rows.push(SweepRow {
            metric: field(0)?.parse().map_err(|_| Error::Data("bad metric".into()))?,
            label_count: num(1)?,
            k: num(2)?,
            run: num(3)?,
            errors: num(4)?,
        });
    }
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn blobs() -> (PointSet, Vec<usize>) {
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for i in 0..20 {
            let c = i % 2;
            let off = if c == 0 { -5.0 } else { 5.0 };
            data.extend([off + (i as f64 * 0.37).sin() * 0.5, (i as f64 * 0.91).cos() * 0.5]);
            truth.push(c);
        }
        (PointSet::new(2, data).unwrap(), truth)
    }

    #[test]
    fn balanced_draw() {
        let truth = vec![0, 0, 0, 1, 1, 1, 1];
        let l = draw_balanced(&truth, 2, 4, &mut seeded(1));
        assert_eq!(l.iter().filter(|x| **x == Some(0)).count(), 2);
        assert_eq!(l.iter().filter(|x| **x == Some(1)).count(), 2);
        assert!(l.iter().enumerate().all(|(i, x)| x.is_none_or(|c| c == truth[i])));
        let l = draw_balanced(&truth, 2, 8, &mut seeded(1));
        assert!(l.iter().all(Option::is_some));
    }

    #[test]
    fn all_labeled_has_no_errors_and_is_deterministic() {
        let (p, truth) = blobs();
        let cfg = SweepConfig {
            label_counts: vec![2, 20],
            k_range: vec![3, 5],
            runs: 3,
            ..Default::default()
        };
        let t = sensitivity_sweep(&p, &truth, 2, &cfg).unwrap();
        assert_eq!(t.rows.len(), 2 * 3 * 2 * 2);
        assert!(t.rows.iter().filter(|r| r.label_count == 20).all(|r| r.errors == 0));
        assert_eq!(t, sensitivity_sweep(&p, &truth, 2, &cfg).unwrap());
        let mut buf = Vec::new();
        write_sweep_table(&mut buf, &t).unwrap();
        assert_eq!(read_sweep_table(&buf[..]).unwrap(), t);
        let s = t.summary();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|r| r.lo <= r.median && r.median <= r.hi));
    }
}

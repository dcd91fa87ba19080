//! Stage orchestration: inputs and outputs on disk, run manifest, locking.
//!
//! Each stage reads its inputs from `out_dir` (or from configured paths),
//! writes its outputs under temporary names and renames them only once the
//! whole stage has succeeded. One JSON line per completed stage is appended
//! to `manifest.jsonl`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::aggregate::{aggregate, read_population, read_state_summary, write_points, write_state_summary};
use crate::config::{hex, Config};
use crate::corpus::{build_vocab, ingest, parse_posts, Document, Gazetteer, Vocabulary};
use crate::error::{Error, Result};
use crate::hashtag::{
    build_cooccurrence, default_seeds, label_tweets, propagate_hashtag_labels, prune_labels, read_label_map,
    read_seeds, significance_filter, write_label_map, OpinionLabel, PropagationOptions, TrainingSet,
};
use crate::lnp::{
    evaluate_fixture, pne_curve, predict, read_labels, read_sweep_table, sensitivity_sweep, write_predictions,
    write_sweep_table, ClassSet, LnpProblem, PropagateOptions, SweepConfig, WeightOptions,
};
use crate::manifold::{classical_mds, pairwise_euclidean, Metric, PointSet, SmacofOptions};
use crate::oowe::{encode, read_model, train, write_embeddings, write_model, CategoryMap, OoweConfig};
use crate::plot::{plot_error_curves, plot_scatter, PlotOptions, ScatterPoint};
use crate::rng::{derive_seed, seeded};
use crate::synth::checks::{
    check_gradients, check_harmonic, check_hypergeometric, check_procrustes, check_smacof_monotone, check_weights,
    gradient_errors, Check,
};
use crate::synth::{gen_opinion_corpus, leans_from_outcome, SynthCorpusConfig};

/// Reference data compiled into the binary, used when a path key is empty.
pub mod fixtures {
    pub const GAZETTEER: &str = include_str!("../fixtures/gazetteer.csv");
    pub const POPULATION: &str = include_str!("../fixtures/population_2016.csv");
    pub const OUTCOME: &str = include_str!("../fixtures/outcome_2016.csv");
    pub const POLLING: &str = include_str!("../fixtures/polling_2016.csv");
    pub const LABELS_8: &str = include_str!("../fixtures/labels_8.csv");
    pub const LABELS_12: &str = include_str!("../fixtures/labels_12.csv");
    pub const SEEDS: &str = include_str!("../fixtures/seeds.csv");
}

pub const STAGES: [&str; 12] = [
    "synth",
    "ingest",
    "hashtag-net",
    "label-tweets",
    "train",
    "embed",
    "aggregate",
    "predict",
    "sweep",
    "metrics",
    "plot",
    "verify",
];

/// Stages run by `all`, in dependency order.
pub const CHAIN: [&str; 11] = [
    "synth",
    "ingest",
    "hashtag-net",
    "label-tweets",
    "train",
    "embed",
    "aggregate",
    "predict",
    "sweep",
    "metrics",
    "plot",
];

pub const MANIFEST: &str = "manifest.jsonl";
const LOCK: &str = ".relop.lock";
const PARTIAL: &str = ".partial";

/// What a stage has to say after it ran.
#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub stage: String,
    pub lines: Vec<String>,
    /// Set by `verify` when a check failed.
    pub failed: bool,
}

pub fn file_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Data(format!(
                "{} exists: another run is using this output directory",
                path.display()
            ))),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Bookkeeping for one stage invocation.
struct Ctx<'a> {
    cfg: &'a Config,
    out: PathBuf,
    seed: u64,
    inputs: Map<String, Value>,
    outputs: Vec<String>,
    counts: Map<String, Value>,
    lines: Vec<String>,
}

impl Ctx<'_> {
    fn record(&mut self, name: String, bytes: &[u8]) {
        self.inputs.insert(name, Value::String(file_hash(bytes)));
    }

    /// Reads an artifact produced by an earlier stage.
    fn artifact(&mut self, name: &str) -> Result<Vec<u8>> {
        let bytes = read_bytes(&self.out.join(name))?;
        self.record(name.to_string(), &bytes);
        Ok(bytes)
    }

    fn has_artifact(&self, name: &str) -> bool {
        self.out.join(name).exists()
    }

    /// Reads the file named by a path key, or the built-in text when it is empty.
    fn keyed(&mut self, key: &str, builtin: &'static str) -> Result<Vec<u8>> {
        match self.cfg.path(key) {
            Some(p) => {
                let bytes = read_bytes(&p)?;
                self.record(p.display().to_string(), &bytes);
                Ok(bytes)
            }
            None => {
                self.record(format!("builtin:{key}"), builtin.as_bytes());
                Ok(builtin.as_bytes().to_vec())
            }
        }
    }

    /// Opens `name` for writing under its temporary name.
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(format!("{name}{PARTIAL}"));
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w)?;
        let path = self.out.join(name);
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn count(&mut self, key: &str, v: impl Into<Value>) {
        self.counts.insert(key.to_string(), v.into());
    }

    fn say(&mut self, line: String) {
        log::info!("{line}");
        self.lines.push(line);
    }

    fn discard(&self) {
        for name in &self.outputs {
            let _ = fs::remove_file(self.out.join(format!("{name}{PARTIAL}")));
        }
    }

    fn commit(&self) -> Result<Map<String, Value>> {
        let mut hashes = Map::new();
        for name in &self.outputs {
            let from = self.out.join(format!("{name}{PARTIAL}"));
            let to = self.out.join(name);
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
            hashes.insert(name.clone(), Value::String(file_hash(&read_bytes(&to)?)));
        }
        Ok(hashes)
    }
}

fn io_err(name: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(name, e)
}

/// Runs one stage (or `all`) and appends its manifest record.
pub fn run_stage(name: &str, cfg: &Config) -> Result<Vec<StageReport>> {
    if name == "all" {
        return CHAIN.iter().map(|s| run_one(s, cfg)).collect();
    }
    let stage = STAGES
        .iter()
        .find(|s| **s == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {name:?}; expected one of {}", STAGES.join(", "))))?;
    Ok(vec![run_one(stage, cfg)?])
}

fn run_one(stage: &'static str, cfg: &Config) -> Result<StageReport> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let _lock = Lock::acquire(&out)?;
    let master = cfg.u64("seed");
    let mut ctx = Ctx {
        cfg,
        out: out.clone(),
        seed: derive_seed(master, &[stage]),
        inputs: Map::new(),
        outputs: Vec::new(),
        counts: Map::new(),
        lines: Vec::new(),
    };
    let start = Instant::now();
    let result = match stage {
        "synth" => stage_synth(&mut ctx),
        "ingest" => stage_ingest(&mut ctx),
        "hashtag-net" => stage_hashtag_net(&mut ctx),
        "label-tweets" => stage_label_tweets(&mut ctx),
        "train" => stage_train(&mut ctx),
        "embed" => stage_embed(&mut ctx),
        "aggregate" => stage_aggregate(&mut ctx),
        "predict" => stage_predict(&mut ctx),
        "sweep" => stage_sweep(&mut ctx),
        "metrics" => stage_metrics(&mut ctx),
        "plot" => stage_plot(&mut ctx),
        "verify" => stage_verify(&mut ctx),
        _ => unreachable!("stage list is closed"),
    };
    let failed = match result {
        Ok(failed) => failed,
        Err(e) => {
            ctx.discard();
            return Err(e);
        }
    };
    let outputs = match ctx.commit() {
        Ok(h) => h,
        Err(e) => {
            ctx.discard();
            return Err(e);
        }
    };
    let record = json!({
        "stage": stage,
        "config_hash": cfg.hash(),
        "seed": ctx.seed,
        "duration_ms": start.elapsed().as_millis() as u64,
        "counts": ctx.counts,
        "inputs": ctx.inputs,
        "outputs": outputs,
    });
    let mpath = out.join(MANIFEST);
    let mut m = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&mpath)
        .map_err(|e| Error::io(&mpath, e))?;
    writeln!(m, "{record}").map_err(|e| Error::io(&mpath, e))?;
    Ok(StageReport {
        stage: stage.to_string(),
        lines: ctx.lines,
        failed,
    })
}

fn seeds(ctx: &mut Ctx) -> Result<HashMap<String, OpinionLabel>> {
    match ctx.cfg.path("seeds_file") {
        Some(_) => read_seeds(&ctx.keyed("seeds_file", fixtures::SEEDS)?[..]),
        None => Ok(default_seeds()),
    }
}

fn stage_synth(ctx: &mut Ctx) -> Result<bool> {
    let truth = read_labels(&ctx.keyed("truth", fixtures::OUTCOME)?[..])?;
    let mut seed_list: Vec<(String, OpinionLabel)> = seeds(ctx)?.into_iter().collect();
    seed_list.sort();
    let c = ctx.cfg;
    let sc = SynthCorpusConfig {
        tweets: c.usize("synth_tweets"),
        users: c.usize("synth_users"),
        lexicon_per_class: c.usize("synth_lexicon"),
        neutral_vocab: c.usize("synth_neutral_vocab"),
        cooc_per_class: c.usize("synth_cooc"),
        tokens_per_tweet: c.usize("synth_tokens"),
        bot_rate: c.f64("synth_bot_rate"),
        seeds: seed_list,
        states: leans_from_outcome(&truth, ctx.seed)?,
        seed: ctx.seed,
        ..Default::default()
    };
    let corpus = gen_opinion_corpus(&sc)?;
    ctx.write("posts.jsonl", |w| corpus.write_jsonl(w))?;
    ctx.write("synth_truth.csv", |w| {
        let counts = HashMap::new();
        write_label_map(w, &corpus.truth.cooc_labels, &counts)
    })?;
    ctx.count("posts", corpus.posts.len());
    ctx.say(format!("synth: {} posts", corpus.posts.len()));
    Ok(false)
}

fn read_docs(ctx: &mut Ctx) -> Result<Vec<Document>> {
    let bytes = ctx.artifact("corpus.tsv")?;
    bytes
        .lines()
        .map(|l| l.map_err(io_err("corpus.tsv")))
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .map(|l| Document::from_tsv_line(&l?))
        .collect()
}

fn read_vocab(ctx: &mut Ctx) -> Result<Vocabulary> {
    Vocabulary::read_tsv(&ctx.artifact("vocab.tsv")?[..])
}

fn stage_ingest(ctx: &mut Ctx) -> Result<bool> {
    let posts = match ctx.cfg.path("posts") {
        Some(p) => {
            let b = read_bytes(&p)?;
            ctx.record(p.display().to_string(), &b);
            b
        }
        None => ctx.artifact("posts.jsonl")?,
    };
    let parsed = parse_posts(&posts[..])?;
    let gaz = Gazetteer::from_csv(&ctx.keyed("gazetteer", fixtures::GAZETTEER)?[..])?;
    let c = ctx.cfg;
    let clients: HashSet<String> = c.strings("official_clients").into_iter().collect();
    let (docs, counts) = ingest(parsed.posts, &c.strings("keywords_a"), &c.strings("keywords_b"), &clients, &gaz);
    let streams: Vec<Vec<&str>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| t.surface.as_str()).collect())
        .collect();
    let vocab = build_vocab(&streams, c.u64("min_count"))?;
    ctx.write("corpus.tsv", |w| {
        for d in &docs {
            writeln!(w, "{}", d.to_tsv_line()).map_err(io_err("corpus.tsv"))?;
        }
        Ok(())
    })?;
    ctx.write("vocab.tsv", |w| vocab.write_tsv(w).map_err(io_err("vocab.tsv")))?;
    ctx.count("skipped", parsed.skipped);
    ctx.count("read", counts.read);
    ctx.count("relevant", counts.relevant);
    ctx.count("retained", counts.retained);
    ctx.count("retained_fraction", counts.retained_fraction);
    ctx.count("located", counts.located);
    ctx.count("vocab", vocab.len());
    ctx.say(format!(
        "ingest: {} read, {} relevant, {} kept, {} located, vocabulary {}",
        counts.read,
        counts.relevant,
        counts.retained,
        counts.located,
        vocab.len()
    ));
    Ok(false)
}

fn stage_hashtag_net(ctx: &mut Ctx) -> Result<bool> {
    let docs = read_docs(ctx)?;
    let seeds = seeds(ctx)?;
    let tags: Vec<Vec<&str>> = docs.iter().map(|d| d.hashtags().collect()).collect();
    let graph = build_cooccurrence(&tags);
    let sig = significance_filter(&graph, ctx.cfg.f64("p_o"))?;
    let opts = PropagationOptions {
        max_sweeps: ctx.cfg.usize("lpa_max_sweeps"),
        weighted: ctx.cfg.bool("lpa_weighted"),
    };
    let found = propagate_hashtag_labels(&sig, &seeds, &mut seeded(ctx.seed), opts);
    let counts = sig.count_map();
    let pruned = prune_labels(&found.labels, &counts, ctx.cfg.f64("prune_r"))?;
    ctx.write("hashtag_graph.tsv", |w| {
        for e in &sig.edges {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                sig.tags[e.i],
                sig.tags[e.j],
                e.k,
                e.ln_p,
                e.s.unwrap_or(0.0)
            )
            .map_err(io_err("hashtag_graph.tsv"))?;
        }
        Ok(())
    })?;
    ctx.write("hashtag_labels.csv", |w| write_label_map(w, &pruned, &counts))?;
    ctx.count("hashtags", graph.n_vertices());
    ctx.count("edges", graph.edges.len());
    ctx.count("significant_edges", sig.edges.len());
    ctx.count("labeled", found.labels.len());
    ctx.count("kept_after_pruning", pruned.len());
    ctx.count("sweeps", found.sweeps);
    ctx.say(format!(
        "hashtag-net: {} hashtags, {} of {} edges significant, {} labeled, {} after pruning",
        graph.n_vertices(),
        sig.edges.len(),
        graph.edges.len(),
        found.labels.len(),
        pruned.len()
    ));
    Ok(false)
}

fn read_labels_map(ctx: &mut Ctx) -> Result<BTreeMap<String, OpinionLabel>> {
    read_label_map(&ctx.artifact("hashtag_labels.csv")?[..])
}

fn stage_label_tweets(ctx: &mut Ctx) -> Result<bool> {
    let docs = read_docs(ctx)?;
    let labels = read_labels_map(ctx)?;
    let set = label_tweets(&docs, &labels, ctx.cfg.bool("exclude_labeled"));
    ctx.write("training.tsv", |w| set.write_tsv(w).map_err(io_err("training.tsv")))?;
    for (l, n) in &set.category_counts {
        ctx.count(l.as_str(), *n);
    }
    ctx.say(format!("label-tweets: {} of {} posts labeled", set.len(), docs.len()));
    Ok(false)
}

fn category_map(cfg: &Config) -> Result<CategoryMap> {
    match cfg.raw("categories") {
        "six" => Ok(CategoryMap::Six),
        "sides" => Ok(CategoryMap::Sides),
        other => Err(Error::Config(format!("categories: expected six or sides, got {other:?}"))),
    }
}

fn stage_train(ctx: &mut Ctx) -> Result<bool> {
    let set = TrainingSet::read_tsv(&ctx.artifact("training.tsv")?[..])?;
    let vocab = read_vocab(ctx)?;
    let map = category_map(ctx.cfg)?;
    let c = ctx.cfg;
    let oc = OoweConfig {
        window: c.usize("window"),
        embed_dim: c.usize("embed_dim"),
        hidden_dim: c.usize("hidden_dim"),
        learning_rate: c.f64("learning_rate"),
        alpha: c.f64("alpha"),
        categories: map.categories(),
        epochs: c.usize("epochs"),
        seed: ctx.seed,
    };
    oc.validate()?;
    let docs = encode(&set, &vocab, map)?;
    let (model, log) = train(&docs, &vocab, &oc)?;
    ctx.write("model.bin", |w| write_model(w, &model).map_err(io_err("model.bin")))?;
    ctx.write("train_log.csv", |w| {
        writeln!(w, "epoch,mean_loss").map_err(io_err("train_log.csv"))?;
        for (e, l) in log.epoch_losses.iter().enumerate() {
            writeln!(w, "{},{l}", e + 1).map_err(io_err("train_log.csv"))?;
        }
        Ok(())
    })?;
    ctx.count("examples", docs.len());
    ctx.count("ngrams_per_epoch", log.ngrams_per_epoch);
    let last = log.epoch_losses.last().copied().unwrap_or(f64::NAN);
    ctx.count("final_loss", last);
    ctx.say(format!("train: {} ngrams per epoch, final mean loss {last:.6}", log.ngrams_per_epoch));
    Ok(false)
}

fn load_model(ctx: &mut Ctx) -> Result<crate::oowe::OoweModel> {
    read_model(&ctx.artifact("model.bin")?[..])
}

fn stage_embed(ctx: &mut Ctx) -> Result<bool> {
    let model = load_model(ctx)?;
    let vocab = read_vocab(ctx)?;
    if model.shape.rows != vocab.table_size() {
        return Err(Error::Data("model and vocabulary sizes differ".into()));
    }
    ctx.write("embeddings.tsv", |w| write_embeddings(w, &model, &vocab).map_err(io_err("embeddings.tsv")))?;
    ctx.count("words", vocab.len());
    ctx.say(format!("embed: {} word vectors", vocab.len()));
    Ok(false)
}

fn stage_aggregate(ctx: &mut Ctx) -> Result<bool> {
    let model = load_model(ctx)?;
    let vocab = read_vocab(ctx)?;
    let docs = read_docs(ctx)?;
    let excluded: HashSet<String> = if ctx.cfg.bool("exclude_labeled") {
        read_labels_map(ctx)?.into_keys().collect()
    } else {
        HashSet::new()
    };
    let population = read_population(&ctx.keyed("population", fixtures::POPULATION)?[..])?;
    let agg = aggregate(&model, &vocab, &docs, &excluded, &population)?;
    let states = agg.state_points();
    if states.len() < 3 {
        return Err(Error::Data(format!("only {} located states; need at least 3", states.len())));
    }
    let ids: Vec<String> = states.iter().map(|p| p.entity_id.clone()).collect();
    let rows: Vec<Vec<f64>> = states.iter().map(|p| p.vector.clone()).collect();
    let sp = PointSet::from_rows(&rows)?;
    let mds = classical_mds(&pairwise_euclidean(&sp), 2)?;
    let plane = mds.points.with_ids(ids)?;
    ctx.write("points.tsv", |w| {
        write_points(&mut *w, &agg.tweets)
            .and_then(|_| write_points(&mut *w, &agg.users))
            .and_then(|_| write_points(&mut *w, &states))
            .map_err(io_err("points.tsv"))
    })?;
    ctx.write("state_summary.csv", |w| write_state_summary(w, &agg.states))?;
    ctx.write("state_mds.tsv", |w| plane.write_tsv(w).map_err(io_err("state_mds.tsv")))?;
    ctx.count("tweets", agg.tweets.len());
    ctx.count("skipped_tweets", agg.skipped_tweets);
    ctx.count("users", agg.users.len());
    ctx.count("states", states.len());
    ctx.say(format!(
        "aggregate: {} tweets ({} skipped), {} users, {} states",
        agg.tweets.len(),
        agg.skipped_tweets,
        agg.users.len(),
        states.len()
    ));
    Ok(false)
}

fn state_points(ctx: &mut Ctx) -> Result<PointSet> {
    let p = PointSet::read_tsv(&ctx.artifact("points.tsv")?[..], Some("state"))?;
    if p.len() < 3 {
        return Err(Error::Data("points.tsv holds fewer than 3 states".into()));
    }
    Ok(p)
}

fn weight_options(cfg: &Config) -> WeightOptions {
    WeightOptions {
        epsilon: cfg.f64("lnp_epsilon"),
        nonnegative: cfg.bool("lnp_nonnegative"),
    }
}

fn propagate_options(cfg: &Config) -> PropagateOptions {
    PropagateOptions {
        tol: cfg.f64("lnp_tol"),
        max_iters: cfg.usize("lnp_max_iters"),
        ..Default::default()
    }
}

fn smacof_options(cfg: &Config) -> SmacofOptions {
    SmacofOptions {
        max_iters: cfg.usize("smacof_max_iters"),
        tol: cfg.f64("smacof_tol"),
        init: None,
    }
}

fn stage_predict(ctx: &mut Ctx) -> Result<bool> {
    let points = state_points(ctx)?;
    let truth = read_labels(&ctx.keyed("truth", fixtures::OUTCOME)?[..])?;
    let initial = read_labels(&ctx.keyed("labels", fixtures::LABELS_8)?[..])?;
    let classes = ClassSet::from_names(truth.iter().map(|(_, c)| c.as_str()));
    let index: HashMap<&str, usize> = points.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut labels = vec![None; points.len()];
    for (entity, class) in &initial {
        let c = classes
            .index(class)
            .ok_or_else(|| Error::Data(format!("label class {class:?} for {entity} not in truth classes")))?;
        match index.get(entity.as_str()) {
            Some(&i) => labels[i] = Some(c),
            None => log::warn!("labeled entity {entity} has no point; ignored"),
        }
    }
    let labeled = labels.iter().flatten().count();
    if labeled == 0 {
        return Err(Error::Data("no initial label matches a point".into()));
    }
    let k = ctx.cfg.usize("k").min(points.len() - 1);
    let mut problem = LnpProblem::new(points.clone(), labels, classes.len(), k, ctx.cfg.metric()?);
    problem.seed = ctx.seed;
    problem.weights = weight_options(ctx.cfg);
    problem.propagate = propagate_options(ctx.cfg);
    problem.smacof = smacof_options(ctx.cfg);
    let pred = predict(&problem)?;
    ctx.write("predictions.csv", |w| {
        write_predictions(w, &points.ids, &classes, &pred.classes, &pred.propagation.scores)
    })?;
    if pred.propagation.diverged {
        log::warn!("label propagation diverged; diverged rows are left undecided (lnp_nonnegative = true keeps it bounded)");
    }
    let undecided = pred.classes.iter().filter(|c| c.is_none()).count();
    ctx.count("entities", points.len());
    ctx.count("labeled", labeled);
    ctx.count("k", k);
    ctx.count("undecided", undecided);
    ctx.count("iterations", pred.propagation.iterations);
    ctx.count("converged", pred.propagation.converged);
    ctx.count("diverged", pred.propagation.diverged);
    ctx.say(format!(
        "predict: {} entities, {labeled} labeled, k={k}, {} iterations{}",
        points.len(),
        pred.propagation.iterations,
        if pred.propagation.diverged { ", diverged" } else { "" }
    ));
    Ok(false)
}

/// Truth class index per point; every point must have a truth row.
fn truth_indices(points: &PointSet, truth: &[(String, String)], classes: &ClassSet) -> Result<Vec<usize>> {
    let map: HashMap<&str, &str> = truth.iter().map(|(e, c)| (e.as_str(), c.as_str())).collect();
    points
        .ids
        .iter()
        .map(|id| {
            map.get(id.as_str())
                .and_then(|c| classes.index(c))
                .ok_or_else(|| Error::Data(format!("no truth class for {id}")))
        })
        .collect()
}

fn stage_sweep(ctx: &mut Ctx) -> Result<bool> {
    let points = state_points(ctx)?;
    let truth = read_labels(&ctx.keyed("truth", fixtures::OUTCOME)?[..])?;
    let classes = ClassSet::from_names(truth.iter().map(|(_, c)| c.as_str()));
    let t = truth_indices(&points, &truth, &classes)?;
    let c = ctx.cfg;
    let k_max = c.usize("k_max").min(points.len() - 1);
    let k_range: Vec<usize> = (c.usize("k_min").max(2)..=k_max).collect();
    if k_range.is_empty() {
        return Err(Error::Config("empty k range".into()));
    }
    let cfg = SweepConfig {
        label_counts: c.list("label_counts"),
        k_range: k_range.clone(),
        runs: c.usize("runs"),
        seed: ctx.seed,
        metrics: vec![Metric::Euclidean, Metric::Geodesic],
        weights: weight_options(c),
        propagate: propagate_options(c),
        smacof: smacof_options(c),
    };
    let table = sensitivity_sweep(&points, &t, classes.len(), &cfg)?;
    let summary = table.summary();
    ctx.write("sweep.csv", |w| write_sweep_table(w, &table))?;
    ctx.write("sweep_summary.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["metric", "label_count", "k", "median", "lo", "hi"])?;
        for s in &summary {
            wtr.write_record([
                s.metric.to_string(),
                s.label_count.to_string(),
                s.k.to_string(),
                s.median.to_string(),
                s.lo.to_string(),
                s.hi.to_string(),
            ])?;
        }
        wtr.flush().map_err(io_err("sweep_summary.csv"))
    })?;
    let dim = c.usize("pne_dim").min(points.len() - 2).max(1);
    let mut selections = Vec::new();
    for metric in [Metric::Euclidean, Metric::Geodesic] {
        let sel = pne_curve(&points, metric, &k_range, cfg.runs, ctx.seed, dim, &cfg.weights, &cfg.smacof)?;
        ctx.count(&format!("pne_k_{metric}"), sel.k);
        ctx.say(format!("sweep: PNE selects k={} ({metric})", sel.k));
        selections.push((metric, sel));
    }
    ctx.write("pne.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["metric", "k", "median", "p05", "p95"])?;
        for (metric, sel) in &selections {
            for r in &sel.table {
                wtr.write_record([
                    metric.to_string(),
                    r.k.to_string(),
                    r.median.to_string(),
                    r.p05.to_string(),
                    r.p95.to_string(),
                ])?;
            }
        }
        wtr.flush().map_err(io_err("pne.csv"))
    })?;
    ctx.count("cells", table.rows.len());
    ctx.say(format!("sweep: {} cells", table.rows.len()));
    Ok(false)
}

fn read_prediction_classes(bytes: &[u8]) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").to_string()));
    }
    Ok(out)
}

fn stage_metrics(ctx: &mut Ctx) -> Result<bool> {
    let predicted = read_prediction_classes(&ctx.artifact("predictions.csv")?)?;
    let truth = read_labels(&ctx.keyed("truth", fixtures::OUTCOME)?[..])?;
    let polling = read_labels(&ctx.keyed("polling", fixtures::POLLING)?[..])?;
    let present: HashSet<&str> = predicted.iter().map(|(e, _)| e.as_str()).collect();
    let truth_here: Vec<(String, String)> = truth.iter().filter(|(e, _)| present.contains(e.as_str())).cloned().collect();
    let pred_eval = evaluate_fixture(&predicted, &truth_here)?;
    let poll_eval = evaluate_fixture(&polling, &truth)?;
    ctx.write("metrics.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["metric", "value"])?;
        wtr.write_record(["prediction_entities", &predicted.len().to_string()])?;
        wtr.write_record(["prediction_errors", &pred_eval.errors.to_string()])?;
        wtr.write_record(["prediction_misses", &pred_eval.misses.join(";")])?;
        wtr.write_record(["polling_errors", &poll_eval.errors.to_string()])?;
        wtr.write_record(["polling_misses", &poll_eval.misses.join(";")])?;
        wtr.flush().map_err(io_err("metrics.csv"))
    })?;
    ctx.count("prediction_errors", pred_eval.errors);
    ctx.count("polling_errors", poll_eval.errors);
    ctx.say(format!(
        "metrics: prediction {} errors of {} ({}); polling {} misses ({})",
        pred_eval.errors,
        predicted.len(),
        pred_eval.misses.join(","),
        poll_eval.errors,
        poll_eval.misses.join(",")
    ));
    Ok(false)
}

fn stage_plot(ctx: &mut Ctx) -> Result<bool> {
    let plane = PointSet::read_tsv(&ctx.artifact("state_mds.tsv")?[..], None)?;
    if plane.dim < 2 {
        return Err(Error::Data("state_mds.tsv must hold 2-D points".into()));
    }
    let summary = read_state_summary(&ctx.artifact("state_summary.csv")?[..])?;
    let truth = read_labels(&ctx.keyed("truth", fixtures::OUTCOME)?[..])?;
    let truth: HashMap<String, String> = truth.into_iter().collect();
    let channel = ctx.cfg.raw("plot_size").to_string();
    let sizes: HashMap<String, Option<f64>> = summary
        .iter()
        .map(|(s, _, sd, rep)| {
            let v = match channel.as_str() {
                "variation" => Some(*sd),
                "representativeness" => *rep,
                _ => None,
            };
            (s.to_string(), v)
        })
        .collect();
    if !["variation", "representativeness", "none"].contains(&channel.as_str()) {
        return Err(Error::Config(format!("plot_size: unknown channel {channel:?}")));
    }
    let pts: Vec<ScatterPoint> = plane
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| ScatterPoint {
            id: id.clone(),
            x: plane.row(i)[0],
            y: plane.row(i)[1],
            class: truth.get(id).cloned().unwrap_or_else(|| "unknown".into()),
            size: sizes.get(id).copied().flatten(),
        })
        .collect();
    let opts = PlotOptions {
        min_radius: ctx.cfg.f64("plot_min_radius"),
        max_radius: ctx.cfg.f64("plot_max_radius"),
        ..Default::default()
    };
    let svg = plot_scatter(&pts, &opts);
    ctx.write("scatter.svg", |w| w.write_all(svg.as_bytes()).map_err(io_err("scatter.svg")))?;
    let mut made = vec!["scatter.svg"];
    if ctx.has_artifact("sweep.csv") {
        let table = read_sweep_table(&ctx.artifact("sweep.csv")?[..])?;
        let svg = plot_error_curves(&table.summary(), &PlotOptions::default());
        ctx.write("errors.svg", |w| w.write_all(svg.as_bytes()).map_err(io_err("errors.svg")))?;
        made.push("errors.svg");
    }
    ctx.say(format!("plot: wrote {}", made.join(", ")));
    Ok(false)
}

/// Oracle cross-checks used by `verify`, at sizes that finish in seconds.
pub fn oracle_checks(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        check_hypergeometric(40),
        check_gradients(3, 10, &[0.0, 0.5, 1.0], seed),
        check_weights(100, seed),
        check_harmonic(20, seed)?,
        check_procrustes(10, seed)?,
        check_smacof_monotone(10)?,
    ])
}

fn stage_verify(ctx: &mut Ctx) -> Result<bool> {
    let mut checks = oracle_checks(ctx.seed)?;
    if ctx.has_artifact("model.bin") {
        let bytes = ctx.artifact("model.bin")?;
        let (cases, skipped, err) = match read_model(&bytes[..]) {
            Ok(m) => gradient_errors(&m, 3, ctx.cfg.f64("alpha"), &mut seeded(ctx.seed)),
            Err(e) => {
                ctx.say(format!("model.bin unreadable: {e}"));
                (1, 0, f64::NAN)
            }
        };
        checks.push(Check {
            name: "model-gradients",
            cases,
            skipped,
            max_error: err,
            tolerance: 1e-4,
        });
    }
    let mut failed = false;
    for c in &checks {
        failed |= !c.passed();
        ctx.count(c.name, c.max_error);
        ctx.say(c.to_string());
    }
    ctx.count("failed", failed);
    Ok(failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        assert_eq!(read_labels(fixtures::OUTCOME.as_bytes()).unwrap().len(), 51);
        assert_eq!(read_labels(fixtures::POLLING.as_bytes()).unwrap().len(), 51);
        assert_eq!(read_labels(fixtures::LABELS_8.as_bytes()).unwrap().len(), 8);
        assert_eq!(read_labels(fixtures::LABELS_12.as_bytes()).unwrap().len(), 12);
        assert_eq!(read_population(fixtures::POPULATION.as_bytes()).unwrap().len(), 51);
        assert_eq!(read_seeds(fixtures::SEEDS.as_bytes()).unwrap(), default_seeds());
        Gazetteer::from_csv(fixtures::GAZETTEER.as_bytes()).unwrap();
    }

    #[test]
    fn unknown_stage_is_usage_error() {
        let e = run_stage("frobnicate", &Config::default()).unwrap_err();
        assert!(matches!(e, Error::InvalidArgument(_)));
    }

    #[test]
    fn lock_rejects_second_holder() {
        let dir = tempfile::tempdir().unwrap();
        let first = Lock::acquire(dir.path()).unwrap();
        assert!(matches!(Lock::acquire(dir.path()), Err(Error::Data(_))));
        drop(first);
        Lock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn missing_input_named_and_partials_removed() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = Config::default();
        cfg.set("out_dir", dir.path().to_str().unwrap()).unwrap();
        match run_stage("ingest", &cfg) {
            Err(Error::MissingInput(p)) => assert!(p.ends_with("posts.jsonl")),
            other => panic!("unexpected {other:?}"),
        }
        // a failing stage leaves nothing behind
        fs::write(dir.path().join("corpus.tsv"), "1\tu\tZZ\tx\n").unwrap();
        assert!(run_stage("label-tweets", &cfg).is_err());
        let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(left, vec![std::ffi::OsString::from("corpus.tsv")]);
    }
}

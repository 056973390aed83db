use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use ncgc::clustering::{sinkhorn_pseudo_labels, soft_assign};
use ncgc::graph::{load_dataset, normalized_adjacency, normalized_laplacian, Graph, LoadOptions};
use ncgc::model::checkpoint::{encode_checkpoint, load_into, read_checkpoint};
use ncgc::model::{forward, init_params, NodeFeatures};
use ncgc::numerics::{set_deterministic, DenseMatrix, Parameter, RngState};
use ncgc::spectral::{clustering_accuracy, kmeans_round, ratiocut_trace, subspace_iteration, SubspaceOptions};
use ncgc::trainer::{
    ablate, accuracy, run_seeds, run_seeds_with_outcomes, split_for_seed, SeedSummary, TrainReport, INIT_STREAM,
};

use crate::error::{CliError, CliResult};
use crate::settings::RunConfig;

fn load(cfg: &RunConfig) -> CliResult<Graph> {
    let dir = cfg.require_dataset()?;
    Ok(load_dataset(dir, &LoadOptions { row_normalize: cfg.row_normalize })?)
}

/// Output directory, created on demand. Commands still print their summary
/// when none is given.
fn out_dir(cfg: &RunConfig) -> CliResult<Option<&Path>> {
    match cfg.out.as_deref() {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            Ok(Some(dir))
        }
        None => Ok(None),
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write(dir, name, text)
}

fn echo_config(dir: Option<&Path>, cfg: &RunConfig, command: &str) -> CliResult<()> {
    match dir {
        Some(d) => write(d, "config.resolved", cfg.to_resolved(command)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct DatasetStats<'a> {
    name: &'a str,
    n: usize,
    m: usize,
    d: usize,
    k: usize,
    labeled: usize,
    label_histogram: Vec<usize>,
    fixed_split: Option<[usize; 3]>,
}

pub fn validate(cfg: &RunConfig) -> CliResult<()> {
    let g = load(cfg)?;
    let hist = g.label_histogram();
    let stats = DatasetStats {
        name: &g.name,
        n: g.node_count(),
        m: g.edge_count(),
        d: g.feature_dim(),
        k: g.class_count(),
        labeled: hist.iter().sum(),
        label_histogram: hist,
        fixed_split: g.fixed_split.as_ref().map(|s| [s.train.len(), s.val.len(), s.test.len()]),
    };
    let dir = out_dir(cfg)?;
    echo_config(dir, cfg, "validate")?;
    if let Some(d) = dir {
        write_json(d, "report.json", &stats)?;
    }
    println!("n={} m={} d={} k={}", stats.n, stats.m, stats.d, stats.k);
    let hist: Vec<String> = stats.label_histogram.iter().enumerate().map(|(c, n)| format!("{c}:{n}")).collect();
    println!("labeled={} classes={}", stats.labeled, hist.join(","));
    match stats.fixed_split {
        Some([tr, va, te]) => println!("split=fixed train={tr} val={va} test={te}"),
        None => println!("split=none"),
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    run_wall_time: Vec<Option<f64>>,
}

/// Wall times are moved out of the reports when determinism is on, so that
/// `report.json` is reproducible byte for byte.
fn split_timing(summary: &mut SeedSummary, determinism: bool) -> Timing {
    let times = summary.runs.iter().map(|r| r.report.wall_time).collect();
    if determinism {
        for r in &mut summary.runs {
            r.report.wall_time = None;
        }
    }
    Timing { run_wall_time: times }
}

fn epochs_csv(summary: &SeedSummary) -> String {
    let mut out = format!("run,seed,{}\n", TrainReport::CSV_HEADER);
    for (r, run) in summary.runs.iter().enumerate() {
        for line in run.report.to_csv().lines().skip(1) {
            let _ = writeln!(out, "{r},{},{line}", run.seed);
        }
    }
    out
}

fn summary_line(name: &str, s: &SeedSummary) -> String {
    format!("dataset={name} acc_mean={:.4} acc_std={:.4} runs={}", s.mean, s.std, s.runs.len())
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    summary: &'a SeedSummary,
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    cfg.require_seed()?;
    set_deterministic(cfg.hp.determinism);
    let g = load(cfg)?;
    let dir = out_dir(cfg)?;
    echo_config(dir, cfg, "train")?;
    let (mut summary, outcomes) = run_seeds_with_outcomes(&g, &cfg.hp, &cfg.split, cfg.runs)?;
    let timing = split_timing(&mut summary, cfg.hp.determinism);
    if let Some(d) = dir {
        write_json(d, "report.json", &TrainOutput { dataset: &g.name, summary: &summary })?;
        write_json(d, "timing.json", &timing)?;
        write(d, "epochs.csv", epochs_csv(&summary))?;
        // first run's best-validation weights, plus centroids when present
        let first = &outcomes[0];
        let mut store = first.params.store.clone();
        if let Some(c) = &first.centroids {
            store.add(Parameter::new("centroids", c.clone()).without_decay());
        }
        write(d, "checkpoint.bin", encode_checkpoint(&store))?;
    }
    println!("{}", summary_line(&g.name, &summary));
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    dataset: &'a str,
    train_acc: f64,
    val_acc: f64,
    test_acc: f64,
}

fn matrix_tsv(nodes: &[usize], m: &DenseMatrix) -> String {
    let mut out = String::new();
    for (r, &node) in nodes.iter().enumerate() {
        out.push_str(&node.to_string());
        for v in m.row(r) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn evaluate(cfg: &RunConfig) -> CliResult<()> {
    let seed = cfg.require_seed()?;
    set_deterministic(cfg.hp.determinism);
    let ckpt = cfg.checkpoint.as_deref().ok_or_else(|| CliError::Flags("--checkpoint is required".into()))?;
    let g = load(cfg)?;
    let config = cfg.hp.sogn_config();
    let records = read_checkpoint(ckpt)?;
    let (centroids, model): (Vec<_>, Vec<_>) = records.into_iter().partition(|(name, _)| name == "centroids");
    let master = RngState::new(seed);
    let mut params = init_params(&config, g.feature_dim(), g.class_count(), &mut master.fork(INIT_STREAM))?;
    load_into(&mut params.store, model)?;

    let split = split_for_seed(&g, &cfg.split, seed)?;
    let a = normalized_adjacency(&g, cfg.hp.self_loops);
    let (h, y) =
        forward(&NodeFeatures::new(g.features.clone()), &a, &params, &config, &mut RngState::new(seed), false)?;
    let out = EvalOutput {
        dataset: &g.name,
        train_acc: accuracy(&y, g.labels(), &split.train)?,
        val_acc: accuracy(&y, g.labels(), &split.val)?,
        test_acc: accuracy(&y, g.labels(), &split.test)?,
    };

    let dir = out_dir(cfg)?;
    echo_config(dir, cfg, "evaluate")?;
    if let Some(d) = dir {
        write_json(d, "report.json", &out)?;
        if cfg.dump {
            let all: Vec<usize> = (0..g.node_count()).collect();
            write(d, "predictions.tsv", matrix_tsv(&all, &y))?;
            if let Some((_, c)) = centroids.first() {
                write(d, "soft_assignments.tsv", matrix_tsv(&all, &soft_assign(&h, c)?))?;
            }
            let unlabeled = split.unlabeled(g.node_count());
            if !unlabeled.is_empty() {
                let psi = sinkhorn_pseudo_labels(&y.select_rows(&unlabeled), cfg.hp.epsilon, cfg.hp.sinkhorn_iters)?;
                write(d, "pseudo_labels.tsv", matrix_tsv(&unlabeled, &psi.psi))?;
            }
        }
    }
    println!(
        "dataset={} train_acc={:.4} val_acc={:.4} test_acc={:.4}",
        out.dataset, out.train_acc, out.val_acc, out.test_acc
    );
    Ok(())
}

#[derive(Serialize)]
struct VariantRow {
    variant: String,
    #[serde(flatten)]
    summary: SeedSummary,
}

#[derive(Serialize)]
struct TableOutput<'a> {
    dataset: &'a str,
    rows: Vec<VariantRow>,
}

fn table_csv(first: &str, rows: &[VariantRow]) -> String {
    let mut out = format!("{first},acc_mean,acc_std,runs\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.variant, r.summary.mean, r.summary.std, r.summary.runs.len());
    }
    out
}

fn finish_table(cfg: &RunConfig, command: &str, first: &str, g: &Graph, rows: Vec<VariantRow>) -> CliResult<()> {
    let dir = out_dir(cfg)?;
    if let Some(d) = dir {
        write(d, &format!("{command}.csv"), table_csv(first, &rows))?;
        write_json(d, "report.json", &TableOutput { dataset: &g.name, rows })?;
    }
    Ok(())
}

/// One row per label; each is printed as `key=label` followed by the
/// summary line.
fn run_table<F>(cfg: &RunConfig, g: &Graph, key: &str, labels: Vec<String>, mut run: F) -> CliResult<Vec<VariantRow>>
where
    F: FnMut(usize) -> CliResult<SeedSummary>,
{
    let mut rows = Vec::with_capacity(labels.len());
    for (i, label) in labels.into_iter().enumerate() {
        let mut summary = run(i)?;
        split_timing(&mut summary, cfg.hp.determinism);
        println!("{key}={label} {}", summary_line(&g.name, &summary));
        rows.push(VariantRow { variant: label, summary });
    }
    Ok(rows)
}

pub fn ablate_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.require_seed()?;
    set_deterministic(cfg.hp.determinism);
    let g = load(cfg)?;
    echo_config(out_dir(cfg)?, cfg, "ablate")?;
    let variants = &cfg.variants;
    let labels = variants.iter().map(ToString::to_string).collect();
    let rows = run_table(cfg, &g, "variant", labels, |i| Ok(ablate(&g, &cfg.hp, variants[i], &cfg.split, cfg.runs)?))?;
    finish_table(cfg, "ablation", "variant", &g, rows)
}

pub fn sweep(cfg: &RunConfig) -> CliResult<()> {
    cfg.require_seed()?;
    let axis = cfg.axis.ok_or_else(|| CliError::Flags("--axis is required".into()))?;
    if cfg.values.is_empty() {
        return Err(CliError::Flags("--values must list at least one value".into()));
    }
    let mut grid = Vec::with_capacity(cfg.values.len());
    for &v in &cfg.values {
        let hp = axis.apply(&cfg.hp, v).map_err(CliError::Flags)?;
        hp.validate().map_err(|e| CliError::Flags(format!("--values {v}: {e}")))?;
        grid.push(hp);
    }
    set_deterministic(cfg.hp.determinism);
    let g = load(cfg)?;
    echo_config(out_dir(cfg)?, cfg, "sweep")?;
    let key = axis.to_string();
    let labels = cfg.values.iter().map(ToString::to_string).collect();
    let rows = run_table(cfg, &g, &key, labels, |i| Ok(run_seeds(&g, &grid[i], &cfg.split, cfg.runs)?))?;
    finish_table(cfg, "sweep", &key, &g, rows)
}

#[derive(Serialize)]
struct SpectralOutput<'a> {
    dataset: &'a str,
    k: usize,
    ritz_values: Vec<f64>,
    iterations: usize,
    converged: bool,
    ratiocut: f64,
    cluster_sizes: Vec<usize>,
    clustering_acc: Option<f64>,
}

pub fn spectral(cfg: &RunConfig) -> CliResult<()> {
    let seed = cfg.require_seed()?;
    set_deterministic(cfg.hp.determinism);
    let g = load(cfg)?;
    let k = cfg.k.unwrap_or(g.class_count());
    let a = normalized_adjacency(&g, cfg.hp.self_loops);
    let opts = SubspaceOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() };
    let master = RngState::new(seed);
    let basis = subspace_iteration(&a, k, &opts, &mut master.fork(0))?;
    let ind = kmeans_round(&basis.q, k, &mut master.fork(1), cfg.restarts)?;
    let ratiocut = ratiocut_trace(&ind.c, &normalized_laplacian(&g))?;
    let clustering_acc = if g.has_labels() { Some(clustering_accuracy(&ind.assignments, g.labels())?) } else { None };
    let out = SpectralOutput {
        dataset: &g.name,
        k,
        ritz_values: basis.ritz_values.clone(),
        iterations: basis.iterations_used,
        converged: basis.converged,
        ratiocut,
        cluster_sizes: ind.cluster_sizes(),
        clustering_acc,
    };
    let dir = out_dir(cfg)?;
    echo_config(dir, cfg, "spectral")?;
    if let Some(d) = dir {
        let mut tsv = String::new();
        for (i, c) in ind.assignments.iter().enumerate() {
            let _ = writeln!(tsv, "{i}\t{c}");
        }
        write(d, "assignments.tsv", tsv)?;
        write_json(d, "report.json", &out)?;
    }
    if !basis.converged {
        eprintln!("warning: subspace iteration stopped at max_iter={} before reaching tol={}", cfg.max_iter, cfg.tol);
    }
    let acc = clustering_acc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
    println!(
        "dataset={} k={k} clustering_acc={acc} ratiocut={ratiocut:.6} iterations={}",
        g.name, basis.iterations_used
    );
    Ok(())
}

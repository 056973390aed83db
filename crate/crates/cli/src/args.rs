use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ncgc::model::{Backbone, InputTransform};
use ncgc::trainer::KlScope;

use crate::settings::{parse_switch, Setting};

#[derive(Debug, Parser)]
#[command(name = "ncgc", version, about = "Soft-orthogonal GNN training with self-supervised clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset directory and print its statistics.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one model per seed and report mean test accuracy.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a saved checkpoint on the dataset split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Write per-node predictions, soft assignments and pseudo-labels.
        #[arg(long, value_name = "on|off", value_parser = parse_switch)]
        dump: Option<bool>,
    },
    /// Train the full model and each single-component ablation.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated subset of full,no_soc,no_kl,no_pl,no_skn.
        #[arg(long, value_name = "LIST")]
        variants: Option<String>,
    },
    /// Train over a grid of one hyperparameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// beta, epsilon or sinkhorn_t.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_name = "LIST")]
        values: Option<String>,
    },
    /// Spectral clustering baseline: subspace iteration plus k-means.
    Spectral {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, value_name = "on|off", value_parser = parse_switch)]
        self_loops: Option<bool>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    pub determinism: Option<bool>,
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    pub row_normalize: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Start from a listed configuration: cora, citeseer or pubmed.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    pub sinkhorn: Option<bool>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub lambda_kl: Option<f64>,
    #[arg(long)]
    pub lambda_pl: Option<f64>,
    #[arg(long)]
    pub backbone: Option<Backbone>,
    #[arg(long)]
    pub kl_scope: Option<KlScope>,
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    pub self_loops: Option<bool>,
    #[arg(long)]
    pub appnp_alpha: Option<f64>,
    #[arg(long)]
    pub appnp_hops: Option<usize>,
    #[arg(long)]
    pub input_transform: Option<InputTransform>,
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    pub final_relu: Option<bool>,
    /// planetoid or per_class.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub split_train: Option<usize>,
    #[arg(long)]
    pub split_val: Option<usize>,
    #[arg(long)]
    pub split_val_total: Option<usize>,
    #[arg(long)]
    pub split_test_total: Option<usize>,
}

fn push<T: Display>(out: &mut Vec<Setting>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        out.push(Setting::flag(key, v));
    }
}

fn push_path(out: &mut Vec<Setting>, key: &str, v: &Option<PathBuf>) {
    push(out, key, &v.as_ref().map(|p| p.display().to_string()));
}

impl CommonArgs {
    pub fn settings(&self) -> Vec<Setting> {
        let mut s = Vec::new();
        push_path(&mut s, "dataset", &self.dataset);
        push_path(&mut s, "out", &self.out);
        push(&mut s, "seed", &self.seed);
        push(&mut s, "runs", &self.runs);
        push(&mut s, "determinism", &self.determinism);
        push(&mut s, "row_normalize", &self.row_normalize);
        s
    }
}

impl TrainArgs {
    pub fn settings(&self) -> Vec<Setting> {
        let mut s = Vec::new();
        push(&mut s, "preset", &self.preset);
        push(&mut s, "beta", &self.beta);
        push(&mut s, "epsilon", &self.epsilon);
        push(&mut s, "sinkhorn_iters", &self.sinkhorn_iters);
        push(&mut s, "sinkhorn", &self.sinkhorn);
        push(&mut s, "layers", &self.layers);
        push(&mut s, "hidden", &self.hidden);
        push(&mut s, "lr", &self.lr);
        push(&mut s, "weight_decay", &self.weight_decay);
        push(&mut s, "dropout", &self.dropout);
        push(&mut s, "epochs", &self.epochs);
        push(&mut s, "patience", &self.patience);
        push(&mut s, "warmup", &self.warmup);
        push(&mut s, "lambda_kl", &self.lambda_kl);
        push(&mut s, "lambda_pl", &self.lambda_pl);
        push(&mut s, "backbone", &self.backbone);
        push(&mut s, "kl_scope", &self.kl_scope);
        push(&mut s, "self_loops", &self.self_loops);
        push(&mut s, "appnp_alpha", &self.appnp_alpha);
        push(&mut s, "appnp_hops", &self.appnp_hops);
        push(&mut s, "input_transform", &self.input_transform);
        push(&mut s, "final_relu", &self.final_relu);
        push(&mut s, "split", &self.split);
        push(&mut s, "split_train", &self.split_train);
        push(&mut s, "split_val", &self.split_val);
        push(&mut s, "split_val_total", &self.split_val_total);
        push(&mut s, "split_test_total", &self.split_test_total);
        s
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Validate { .. } => "validate",
            Self::Train { .. } => "train",
            Self::Evaluate { .. } => "evaluate",
            Self::Ablate { .. } => "ablate",
            Self::Sweep { .. } => "sweep",
            Self::Spectral { .. } => "spectral",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Self::Validate { common }
            | Self::Train { common, .. }
            | Self::Evaluate { common, .. }
            | Self::Ablate { common, .. }
            | Self::Sweep { common, .. }
            | Self::Spectral { common, .. } => common,
        }
    }

    /// Flag values as settings, in the order they override the config file.
    pub fn settings(&self) -> Vec<Setting> {
        let mut s = self.common().settings();
        match self {
            Self::Validate { .. } => {}
            Self::Train { train, .. } => s.extend(train.settings()),
            Self::Evaluate { train, checkpoint, dump, .. } => {
                s.extend(train.settings());
                push_path(&mut s, "checkpoint", checkpoint);
                push(&mut s, "dump", dump);
            }
            Self::Ablate { train, variants, .. } => {
                s.extend(train.settings());
                push(&mut s, "variants", variants);
            }
            Self::Sweep { train, axis, values, .. } => {
                s.extend(train.settings());
                push(&mut s, "axis", axis);
                push(&mut s, "values", values);
            }
            Self::Spectral { k, restarts, tol, max_iter, self_loops, .. } => {
                push(&mut s, "k", k);
                push(&mut s, "restarts", restarts);
                push(&mut s, "tol", tol);
                push(&mut s, "max_iter", max_iter);
                push(&mut s, "self_loops", self_loops);
            }
        }
        s
    }
}

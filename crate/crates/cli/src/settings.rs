//! Layered run configuration: built-in defaults, an optional named preset,
//! a `key = value` file, then command-line flags, later layers winning.

use std::fmt::{self, Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ncgc::graph::{SplitConfig, SplitPolicy};
use ncgc::trainer::{AblationVariant, HyperParams};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Beta,
    Epsilon,
    SinkhornIters,
}

impl SweepAxis {
    pub fn apply(self, hp: &HyperParams, value: f64) -> Result<HyperParams, String> {
        let mut out = hp.clone();
        match self {
            Self::Beta => out.beta = value,
            Self::Epsilon => out.epsilon = value,
            Self::SinkhornIters => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(format!("sinkhorn_t sweep value {value} is not a positive integer"));
                }
                out.sinkhorn_iters = value as usize;
            }
        }
        Ok(out)
    }
}

impl FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta" => Ok(Self::Beta),
            "epsilon" | "eps" => Ok(Self::Epsilon),
            "sinkhorn_t" | "sinkhorn_iters" | "t" => Ok(Self::SinkhornIters),
            other => Err(format!("unknown sweep axis '{other}' (expected beta, epsilon, sinkhorn_t)")),
        }
    }
}

impl Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Beta => "beta",
            Self::Epsilon => "epsilon",
            Self::SinkhornIters => "sinkhorn_t",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: usize,
    pub row_normalize: bool,
    pub split: SplitConfig,
    pub hp: HyperParams,
    pub checkpoint: Option<PathBuf>,
    pub dump: bool,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub variants: Vec<AblationVariant>,
    pub k: Option<usize>,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out: None,
            seed: None,
            runs: 1,
            row_normalize: true,
            split: SplitConfig::planetoid(),
            hp: HyperParams::default(),
            checkpoint: None,
            dump: false,
            axis: None,
            values: Vec::new(),
            variants: AblationVariant::ALL.to_vec(),
            k: None,
            restarts: ncgc::spectral::DEFAULT_RESTARTS,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Where a key came from, for error attribution and exit codes.
#[derive(Clone, Debug)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

#[derive(Clone, Debug)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Setting {
    pub fn flag(key: &str, value: impl Display) -> Self {
        Self { key: key.to_string(), value: value.to_string(), origin: Origin::Flag }
    }

    fn error(&self, msg: String) -> CliError {
        match &self.origin {
            Origin::File { path, line } => CliError::Input(format!("{}:{line}: {msg}", path.display())),
            Origin::Flag => CliError::Flags(format!("--{}: {msg}", self.key.replace('_', "-"))),
        }
    }
}

fn canonical_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parse a flat `key = value` document. Blank lines and `#` comments are
/// skipped.
pub fn parse_config_text(text: &str, path: &Path) -> CliResult<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Input(format!("{}:{}: expected `key = value`, got '{line}'", path.display(), i + 1))
        })?;
        out.push(Setting {
            key: canonical_key(key),
            value: value.trim().to_string(),
            origin: Origin::File { path: path.to_path_buf(), line: i + 1 },
        });
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> CliResult<Vec<Setting>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config_text(&text, path)
}

pub fn parse_switch(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected on or off, got '{other}'")),
    }
}

fn switch(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.trim().parse::<T>().map_err(|e| format!("invalid value '{s}': {e}"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    s.split(',').filter(|v| !v.trim().is_empty()).map(parse).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Layer `settings` (file entries first, then flags) over the defaults.
    /// A `preset` key anywhere replaces the hyperparameter defaults before
    /// any other key is applied.
    pub fn resolve(settings: &[Setting]) -> CliResult<Self> {
        let mut cfg = Self::default();
        if let Some(s) = settings.iter().rev().find(|s| s.key == "preset") {
            match s.value.to_ascii_lowercase().as_str() {
                "" | "none" => {}
                name => {
                    cfg.hp = HyperParams::citation_preset(name)
                        .ok_or_else(|| s.error(format!("unknown preset '{name}' (expected cora, citeseer, pubmed)")))?;
                }
            }
        }
        for s in settings.iter().filter(|s| s.key != "preset") {
            cfg.set(&s.key, &s.value).map_err(|msg| s.error(msg))?;
        }
        if let Some(seed) = cfg.seed {
            cfg.hp.seed = seed;
        }
        cfg.hp.validate().map_err(|e| CliError::Flags(e.to_string()))?;
        if cfg.runs == 0 {
            return Err(CliError::Flags("--runs must be >= 1".into()));
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let hp = &mut self.hp;
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "seed" => self.seed = Some(parse(v)?),
            "runs" => self.runs = parse(v)?,
            "determinism" => hp.determinism = parse_switch(v)?,
            "row_normalize" => self.row_normalize = parse_switch(v)?,
            "split" => {
                self.split = match v.trim().to_ascii_lowercase().as_str() {
                    "planetoid" => SplitConfig { policy: SplitPolicy::PlanetoidStyle, ..self.split },
                    "per_class" => SplitConfig { policy: SplitPolicy::PerClass, ..self.split },
                    other => return Err(format!("unknown split policy '{other}' (expected planetoid, per_class)")),
                }
            }
            "split_train" => self.split.per_class_train = parse(v)?,
            "split_val" => self.split.per_class_val = parse(v)?,
            "split_val_total" => self.split.val_total = parse(v)?,
            "split_test_total" => self.split.test_total = parse(v)?,
            "beta" => hp.beta = parse(v)?,
            "epsilon" => hp.epsilon = parse(v)?,
            "sinkhorn_iters" => hp.sinkhorn_iters = parse(v)?,
            "layers" => hp.layers = parse(v)?,
            "hidden" => hp.hidden_dim = parse(v)?,
            "lr" => hp.lr = parse(v)?,
            "weight_decay" => hp.weight_decay = parse(v)?,
            "dropout" => hp.dropout = parse(v)?,
            "epochs" => hp.epochs = parse(v)?,
            "patience" => hp.patience = parse(v)?,
            "warmup" => hp.warmup_epochs = parse(v)?,
            "lambda_kl" => hp.lambda_kl = parse(v)?,
            "lambda_pl" => hp.lambda_pl = parse(v)?,
            "backbone" => hp.backbone = parse(v)?,
            "kl_scope" => hp.kl_scope = parse(v)?,
            "self_loops" => hp.self_loops = parse_switch(v)?,
            "appnp_alpha" => hp.appnp_alpha = parse(v)?,
            "appnp_hops" => hp.appnp_hops = parse(v)?,
            "input_transform" => hp.input_transform = parse(v)?,
            "final_relu" => hp.final_relu = parse_switch(v)?,
            "sinkhorn" => hp.sinkhorn = parse_switch(v)?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(v)),
            "dump" => self.dump = parse_switch(v)?,
            "axis" => self.axis = Some(parse(v)?),
            "values" => self.values = parse_list(v)?,
            "variants" => self.variants = parse_list(v)?,
            "k" => self.k = Some(parse(v)?),
            "restarts" => self.restarts = parse(v)?,
            "tol" => self.tol = parse(v)?,
            "max_iter" => self.max_iter = parse(v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> CliResult<&Path> {
        self.dataset.as_deref().ok_or_else(|| CliError::Flags("--dataset is required".into()))
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Flags("--seed is required for this command".into()))
    }

    /// The configuration as a `key = value` document that resolves back to
    /// the same run. Only keys read by `command` are written.
    pub fn to_resolved(&self, command: &str) -> String {
        let mut out = format!("# ncgc {command}\n");
        let mut put = |k: &str, v: &dyn Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(d) = &self.dataset {
            put("dataset", &d.display());
        }
        if let Some(o) = &self.out {
            put("out", &o.display());
        }
        if let Some(s) = self.seed {
            put("seed", &s);
        }
        put("row_normalize", &switch(self.row_normalize));
        if command == "validate" {
            return out;
        }
        put("determinism", &switch(self.hp.determinism));
        put("self_loops", &switch(self.hp.self_loops));
        if command == "spectral" {
            if let Some(k) = self.k {
                put("k", &k);
            }
            put("restarts", &self.restarts);
            put("tol", &self.tol);
            put("max_iter", &self.max_iter);
            return out;
        }

        let (sp, hp) = (&self.split, &self.hp);
        put("runs", &self.runs);
        put("split", &if sp.policy == SplitPolicy::PerClass { "per_class" } else { "planetoid" });
        put("split_train", &sp.per_class_train);
        put("split_val", &sp.per_class_val);
        put("split_val_total", &sp.val_total);
        put("split_test_total", &sp.test_total);
        put("backbone", &hp.backbone);
        put("layers", &hp.layers);
        put("hidden", &hp.hidden_dim);
        put("input_transform", &hp.input_transform);
        put("final_relu", &switch(hp.final_relu));
        put("appnp_alpha", &hp.appnp_alpha);
        put("appnp_hops", &hp.appnp_hops);
        put("beta", &hp.beta);
        put("dropout", &hp.dropout);
        put("lr", &hp.lr);
        put("weight_decay", &hp.weight_decay);
        put("epochs", &hp.epochs);
        put("patience", &hp.patience);
        put("warmup", &hp.warmup_epochs);
        put("lambda_kl", &hp.lambda_kl);
        put("lambda_pl", &hp.lambda_pl);
        put("kl_scope", &hp.kl_scope);
        put("sinkhorn", &switch(hp.sinkhorn));
        put("epsilon", &hp.epsilon);
        put("sinkhorn_iters", &hp.sinkhorn_iters);
        match command {
            "evaluate" => {
                if let Some(c) = &self.checkpoint {
                    put("checkpoint", &c.display());
                }
                put("dump", &switch(self.dump));
            }
            "ablate" => put("variants", &join(&self.variants)),
            "sweep" => {
                if let Some(a) = self.axis {
                    put("axis", &a);
                }
                put("values", &join(&self.values));
            }
            _ => {}
        }
        out
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Backbone, InputTransform, SognConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlScope {
    All,
    Unlabeled,
}

impl FromStr for KlScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Self::All),
            "unlabeled" => Ok(Self::Unlabeled),
            other => Err(Error::Parameter(format!("unknown kl scope '{other}' (expected all, unlabeled)"))),
        }
    }
}

impl fmt::Display for KlScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::Unlabeled => "unlabeled",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub beta: f64,
    pub epsilon: f64,
    pub sinkhorn_iters: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub patience: usize,
    pub warmup_epochs: usize,
    pub lambda_kl: f64,
    pub lambda_pl: f64,
    pub seed: u64,
    pub backbone: Backbone,
    pub kl_scope: KlScope,
    pub self_loops: bool,
    pub determinism: bool,
    pub appnp_alpha: f64,
    pub appnp_hops: usize,
    pub input_transform: InputTransform,
    pub final_relu: bool,
    /// When false the pseudo-label target is the raw detached prediction.
    pub sinkhorn: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            beta: 0.005,
            epsilon: 0.04,
            sinkhorn_iters: 3,
            layers: 2,
            hidden_dim: 64,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            epochs: 1000,
            patience: 100,
            warmup_epochs: 20,
            lambda_kl: 1.0,
            lambda_pl: 1.0,
            seed: 0,
            backbone: Backbone::Gcn,
            kl_scope: KlScope::All,
            self_loops: true,
            determinism: true,
            appnp_alpha: 0.1,
            appnp_hops: 10,
            input_transform: InputTransform::Auto,
            final_relu: false,
            sinkhorn: true,
        }
    }
}

impl HyperParams {
    /// The NCGC(GCN) settings listed for the three citation graphs. The
    /// listed ε values are an order of magnitude below the best region of the
    /// ε sensitivity study; callers sweep both.
    pub fn citation_preset(dataset: &str) -> Option<Self> {
        let base = Self::default();
        let (beta, epsilon, sinkhorn_iters, layers, lr, hidden_dim, weight_decay, dropout) =
            match dataset.to_ascii_lowercase().as_str() {
                "cora" => (0.003, 0.004, 3, 3, 0.001, 512, 5e-4, 0.8),
                "citeseer" => (0.008, 0.003, 3, 2, 0.001, 512, 1e-2, 0.5),
                "pubmed" => (0.008, 0.004, 4, 2, 0.001, 256, 5e-4, 0.7),
                _ => return None,
            };
        Some(Self { beta, epsilon, sinkhorn_iters, layers, lr, hidden_dim, weight_decay, dropout, ..base })
    }

    pub fn validate(&self) -> Result<()> {
        self.sogn_config().validate()?;
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.sinkhorn_iters == 0 {
            return bad("sinkhorn_iters must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.patience > self.epochs {
            return bad(format!("patience {} exceeds epochs {}", self.patience, self.epochs));
        }
        if self.warmup_epochs >= self.epochs {
            return bad(format!("warmup_epochs {} must be below epochs {}", self.warmup_epochs, self.epochs));
        }
        for (name, v) in [("lambda_kl", self.lambda_kl), ("lambda_pl", self.lambda_pl)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn sogn_config(&self) -> SognConfig {
        SognConfig {
            backbone: self.backbone,
            layers: self.layers,
            hidden_dim: self.hidden_dim,
            beta: self.beta,
            dropout: self.dropout,
            appnp_alpha: self.appnp_alpha,
            appnp_hops: self.appnp_hops,
            input_transform: self.input_transform,
            final_relu: self.final_relu,
        }
    }

    /// Loss weights `(λ_kl, λ_pl)` in effect at a 0-based epoch.
    pub fn clustering_weights(&self, epoch: usize) -> (f64, f64) {
        if epoch < self.warmup_epochs {
            (0.0, 0.0)
        } else {
            (self.lambda_kl, self.lambda_pl)
        }
    }
}

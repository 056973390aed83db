use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Gcn,
    Appnp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    /// Linear for 1–3 layers, MLP for deeper models.
    Auto,
    /// `ReLU(XW + b)`.
    Linear,
    /// `ReLU(ReLU(XW₁ + b₁)W₂ + b₂)`.
    Mlp,
    /// Raw features feed the first layer directly.
    Identity,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::Parameter(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $variant => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(Backbone, "backbone", "gcn" => Backbone::Gcn, "appnp" => Backbone::Appnp);
keyword_enum!(
    InputTransform, "input transform",
    "auto" => InputTransform::Auto,
    "linear" => InputTransform::Linear,
    "mlp" => InputTransform::Mlp,
    "identity" => InputTransform::Identity,
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SognConfig {
    pub backbone: Backbone,
    pub layers: usize,
    pub hidden_dim: usize,
    /// Strength of the soft-orthogonal correction; 0 gives the plain backbone.
    pub beta: f64,
    pub dropout: f64,
    pub appnp_alpha: f64,
    pub appnp_hops: usize,
    pub input_transform: InputTransform,
    /// Apply ReLU after the last layer too. Off by default so the embedding
    /// used for clustering is not clipped to the nonnegative orthant.
    pub final_relu: bool,
}

impl Default for SognConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Gcn,
            layers: 2,
            hidden_dim: 64,
            beta: 0.005,
            dropout: 0.5,
            appnp_alpha: 0.1,
            appnp_hops: 10,
            input_transform: InputTransform::Auto,
            final_relu: false,
        }
    }
}

impl SognConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Parameter("layers must be >= 1".into()));
        }
        if self.hidden_dim < 2 {
            return Err(Error::Parameter(format!("hidden_dim must be >= 2, got {}", self.hidden_dim)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.backbone == Backbone::Appnp && !(self.appnp_alpha > 0.0 && self.appnp_alpha <= 1.0) {
            return Err(Error::Parameter(format!("appnp_alpha must lie in (0, 1], got {}", self.appnp_alpha)));
        }
        Ok(())
    }

    /// The transform actually used once `Auto` is resolved.
    pub fn resolved_input_transform(&self) -> InputTransform {
        match self.input_transform {
            InputTransform::Auto if self.layers <= 3 => InputTransform::Linear,
            InputTransform::Auto => InputTransform::Mlp,
            other => other,
        }
    }
}

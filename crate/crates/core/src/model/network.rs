use super::config::{Backbone, InputTransform, SognConfig};
use super::features::NodeFeatures;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::numerics::{ops, DenseMatrix, ParamId, ParamStore, Parameter, RngState, Tape, Var};

#[derive(Clone, Debug)]
enum InputParams {
    Identity,
    Linear { w: ParamId, b: ParamId },
    Mlp { w1: ParamId, b1: ParamId, w2: ParamId, b2: ParamId },
}

/// All trainable model weights, held in one [`ParamStore`] so the optimizer
/// and checkpoints see a flat list.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub store: ParamStore,
    input: InputParams,
    layers: Vec<ParamId>,
    proto: ParamId,
    input_dim: usize,
    class_count: usize,
}

impl ModelParams {
    pub fn layer_weights(&self) -> &[ParamId] {
        &self.layers
    }

    /// The bias-free `d × K` prototype matrix of the classification head.
    pub fn prototype(&self) -> ParamId {
        self.proto
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn embedding_dim(&self) -> usize {
        self.store.value(self.proto).rows()
    }
}

fn glorot(name: String, rows: usize, cols: usize, rng: &mut RngState) -> Parameter {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Parameter::new(name, DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_in(-bound, bound)))
}

pub fn init_params(
    config: &SognConfig,
    input_dim: usize,
    class_count: usize,
    rng: &mut RngState,
) -> Result<ModelParams> {
    config.validate()?;
    if input_dim == 0 || class_count == 0 {
        return Err(Error::Parameter(format!(
            "model needs input_dim >= 1 and class_count >= 1, got {input_dim} and {class_count}"
        )));
    }
    let d = config.hidden_dim;
    let mut store = ParamStore::new();
    let input = match config.resolved_input_transform() {
        InputTransform::Identity => InputParams::Identity,
        InputTransform::Linear => InputParams::Linear {
            w: store.add(glorot("input.w".into(), input_dim, d, rng)),
            b: store.add(Parameter::new("input.b", DenseMatrix::zeros(1, d))),
        },
        InputTransform::Mlp => InputParams::Mlp {
            w1: store.add(glorot("input.w1".into(), input_dim, d, rng)),
            b1: store.add(Parameter::new("input.b1", DenseMatrix::zeros(1, d))),
            w2: store.add(glorot("input.w2".into(), d, d, rng)),
            b2: store.add(Parameter::new("input.b2", DenseMatrix::zeros(1, d))),
        },
        InputTransform::Auto => unreachable!("resolved above"),
    };
    let first_in = if matches!(input, InputParams::Identity) { input_dim } else { d };
    let layers = (0..config.layers)
        .map(|l| {
            let rows = if l == 0 { first_in } else { d };
            store.add(glorot(format!("layer{l}.w"), rows, d, rng))
        })
        .collect();
    let proto = store.add(glorot("proto.w".into(), d, class_count, rng));
    Ok(ModelParams { store, input, layers, proto, input_dim, class_count })
}

/// Linear propagation operator of the chosen backbone applied to `z`.
/// GCN is one multiplication by `Ã`. APPNP runs `hops` steps of
/// `H ← (1 − α)ÃH + αZ` from `H = Z`, which expands to
/// `α Σ_{t<hops} (1 − α)^t Ã^t Z + (1 − α)^hops Ã^hops Z`.
pub fn backbone_on_tape<'g>(
    tape: &mut Tape<'g>,
    a_tilde: &'g CsrMatrix,
    z: Var,
    backbone: Backbone,
    appnp_alpha: f64,
    appnp_hops: usize,
) -> Result<Var> {
    match backbone {
        Backbone::Gcn => tape.sparse_matmul(a_tilde, z),
        Backbone::Appnp => {
            let teleport = tape.scale(z, appnp_alpha);
            let mut h = z;
            for _ in 0..appnp_hops {
                let spread = tape.sparse_matmul(a_tilde, h)?;
                let spread = tape.scale(spread, 1.0 - appnp_alpha);
                h = tape.add(spread, teleport)?;
            }
            Ok(h)
        }
    }
}

pub fn backbone_propagate(
    a_tilde: &CsrMatrix,
    z: &DenseMatrix,
    backbone: Backbone,
    appnp_alpha: f64,
    appnp_hops: usize,
) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let out = backbone_on_tape(&mut tape, a_tilde, zv, backbone, appnp_alpha, appnp_hops)?;
    Ok(tape.value(out).clone())
}

/// One soft-orthogonal layer:
/// `act(backbone(Z) − β Z̃ (Z̃ᵀ Z))` with `Z = dropout(H) W` and `Z̃` the
/// column-normalized `Z`. With `β = 0` the correction is not recorded at all.
#[allow(clippy::too_many_arguments)]
pub fn sogn_layer<'g>(
    tape: &mut Tape<'g>,
    h: Var,
    w: Var,
    a_tilde: &'g CsrMatrix,
    config: &SognConfig,
    activate: bool,
    rng: &mut RngState,
    training: bool,
) -> Result<Var> {
    let dropped = tape.dropout(h, config.dropout, rng, training)?;
    let z = tape.matmul(dropped, w)?;
    let mut out = backbone_on_tape(tape, a_tilde, z, config.backbone, config.appnp_alpha, config.appnp_hops)?;
    if config.beta != 0.0 {
        let z_norm = tape.column_l2_normalize(z);
        let z_norm_t = tape.transpose(z_norm);
        let gram = tape.matmul(z_norm_t, z)?;
        let correction = tape.matmul(z_norm, gram)?;
        let correction = tape.scale(correction, config.beta);
        out = tape.sub(out, correction)?;
    }
    Ok(if activate { tape.relu(out) } else { out })
}

/// Tape handles for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    /// Final-layer embedding `H`, n×d.
    pub h: Var,
    /// `H W_proto`, n×K.
    pub logits: Var,
    pub log_probs: Var,
    /// `Y′`, row-stochastic.
    pub probs: Var,
}

/// `X W`, through the CSR copy of `X` when there is one.
fn feature_product<'g>(tape: &mut Tape<'g>, features: &'g NodeFeatures, w: Var) -> Result<Var> {
    match features.sparse() {
        Some(x) => tape.sparse_matmul(x, w),
        None => {
            let x = tape.constant(features.dense().clone());
            tape.matmul(x, w)
        }
    }
}

pub fn forward_on_tape<'g>(
    tape: &mut Tape<'g>,
    features: &'g NodeFeatures,
    a_tilde: &'g CsrMatrix,
    params: &ModelParams,
    config: &SognConfig,
    rng: &mut RngState,
    training: bool,
) -> Result<ForwardVars> {
    let (rows, cols) = (features.rows(), features.cols());
    if cols != params.input_dim || a_tilde.rows() != rows || a_tilde.cols() != rows {
        return Err(Error::dim(
            "forward",
            format!(
                "features {:?}, operator {}x{}, model input {}",
                (rows, cols),
                a_tilde.rows(),
                a_tilde.cols(),
                params.input_dim
            ),
        ));
    }
    let store = &params.store;
    let mut h = match params.input {
        InputParams::Identity => tape.constant(features.dense().clone()),
        InputParams::Linear { w, b } => {
            let (w, b) = (tape.param(store, w), tape.param(store, b));
            let xw = feature_product(tape, features, w)?;
            let xw = tape.add_row_vector(xw, b)?;
            tape.relu(xw)
        }
        InputParams::Mlp { w1, b1, w2, b2 } => {
            let (w1, b1) = (tape.param(store, w1), tape.param(store, b1));
            let (w2, b2) = (tape.param(store, w2), tape.param(store, b2));
            let hidden = feature_product(tape, features, w1)?;
            let hidden = tape.add_row_vector(hidden, b1)?;
            let hidden = tape.relu(hidden);
            let out = tape.matmul(hidden, w2)?;
            let out = tape.add_row_vector(out, b2)?;
            tape.relu(out)
        }
    };
    let last = params.layers.len() - 1;
    for (l, &w) in params.layers.iter().enumerate() {
        let w = tape.param(store, w);
        let activate = l < last || config.final_relu;
        h = sogn_layer(tape, h, w, a_tilde, config, activate, rng, training)?;
    }
    let proto = tape.param(store, params.proto);
    let logits = tape.matmul(h, proto)?;
    let log_probs = tape.log_softmax_rows(logits)?;
    let probs = tape.softmax_rows(logits)?;
    Ok(ForwardVars { h, logits, log_probs, probs })
}

/// Evaluate without keeping the tape, returning `(H, Y′)`.
pub fn forward(
    features: &NodeFeatures,
    a_tilde: &CsrMatrix,
    params: &ModelParams,
    config: &SognConfig,
    rng: &mut RngState,
    training: bool,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut tape = Tape::new();
    let out = forward_on_tape(&mut tape, features, a_tilde, params, config, rng, training)?;
    Ok((tape.value(out.h).clone(), tape.value(out.probs).clone()))
}

/// `‖HᵀH − I‖²_F`.
pub fn soc_penalty(h: &DenseMatrix) -> f64 {
    let gram = h.t_matmul(h).expect("gram of a single matrix");
    ops::frobenius_sq_diff(&gram, &DenseMatrix::identity(h.cols())).expect("square gram")
}

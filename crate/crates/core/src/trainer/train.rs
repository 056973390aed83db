use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::hyper::{HyperParams, KlScope};
use super::losses::{accuracy, class_loss_on_tape, total_loss, LossComponents};
use crate::clustering::{
    kl_loss, pseudo_label_loss, sinkhorn_pseudo_labels, soft_assign_on_tape, target_distribution, ClusterState,
};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, Graph, Split};
use crate::model::{forward, forward_on_tape, init_params, soc_penalty, ModelParams, NodeFeatures, SognConfig};
use crate::numerics::{AdamState, DenseMatrix, RngState, Tape};

/// RNG stream ids derived from a run seed. Keeping dropout and clustering on
/// separate streams means switching the clustering losses off leaves the
/// dropout masks unchanged.
pub const INIT_STREAM: u64 = 0;
pub const DROPOUT_STREAM: u64 = 1;
pub const CLUSTER_STREAM: u64 = 2;
pub const SPLIT_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub class_loss: f64,
    pub kl_loss: f64,
    pub pl_loss: f64,
    pub total_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// `‖HᵀH − I‖²_F` of the evaluation-mode embedding.
    pub soc_penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub test_at_best_val: f64,
    pub stopped_early: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,class_loss,kl_loss,pl_loss,total_loss,val_acc,test_acc,soc_penalty";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch, r.class_loss, r.kl_loss, r.pl_loss, r.total_loss, r.val_acc, r.test_acc, r.soc_penalty
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the best validation epoch.
    pub params: ModelParams,
    /// Cluster centroids at that epoch, if they had been initialized by then.
    pub centroids: Option<DenseMatrix>,
    pub report: TrainReport,
}

fn check_split(g: &Graph, split: &Split) -> Result<()> {
    split.validate(g.node_count())?;
    if split.val.is_empty() {
        return Err(Error::Split("empty validation set".into()));
    }
    for (part, idx) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if let Some(&i) = idx.iter().find(|&&i| g.label(i).is_none()) {
            return Err(Error::Split(format!("{part} node {i} has no label")));
        }
    }
    Ok(())
}

/// Full-batch multi-task training with early stopping on validation
/// accuracy. `a_tilde` is the propagation operator (normally the normalized
/// adjacency with self-loops).
pub fn train(g: &Graph, a_tilde: &CsrMatrix, split: &Split, hp: &HyperParams) -> Result<TrainOutcome> {
    hp.validate()?;
    check_split(g, split)?;
    if g.class_count() == 0 {
        return Err(Error::Contract("graph has no classes".into()));
    }
    let started = Instant::now();
    let n = g.node_count();
    let config = hp.sogn_config();
    let labels = g.labels();
    let unlabeled = split.unlabeled(n);
    let all_nodes: Vec<usize> = (0..n).collect();
    let kl_scope: &[usize] = match hp.kl_scope {
        KlScope::All => &all_nodes,
        KlScope::Unlabeled => &unlabeled,
    };

    let features = NodeFeatures::new(g.features.clone());
    let master = RngState::new(hp.seed);
    let mut dropout_rng = master.fork(DROPOUT_STREAM);
    let mut cluster_rng = master.fork(CLUSTER_STREAM);
    let mut params = init_params(&config, g.feature_dim(), g.class_count(), &mut master.fork(INIT_STREAM))?;
    let model_len = params.store.len();
    let mut adam = AdamState::new(&params.store);
    let mut clusters = ClusterState::new(g.class_count());

    let mut records = Vec::new();
    let mut best: Option<(usize, f64, f64, Vec<DenseMatrix>)> = None;
    let mut stopped_early = false;

    for epoch in 0..hp.epochs {
        let (w_kl, w_pl) = hp.clustering_weights(epoch);
        if w_kl > 0.0 && !clusters.is_initialized() {
            let (h, _) = forward(&features, a_tilde, &params, &config, &mut dropout_rng, false)?;
            clusters.initialize(&mut params.store, &h, &mut cluster_rng)?;
        }

        let mut tape = Tape::new();
        let out = forward_on_tape(&mut tape, &features, a_tilde, &params, &config, &mut dropout_rng, true)?;
        let class = class_loss_on_tape(&mut tape, out.log_probs, labels, &split.train)?;
        let mut components = LossComponents { class: tape.value(class).item(), ..Default::default() };
        let mut loss = class;

        if w_kl > 0.0 {
            let c = tape.param(&params.store, clusters.centroids()?);
            let q = soft_assign_on_tape(&mut tape, out.h, c)?;
            let p = target_distribution(tape.value(q))?;
            let kl = kl_loss(&mut tape, &p, q, kl_scope)?;
            components.kl = tape.value(kl).item();
            let weighted = tape.scale(kl, w_kl);
            loss = tape.add(loss, weighted)?;
        }
        if w_pl > 0.0 && !unlabeled.is_empty() {
            let psi_prime = tape.value(out.probs).select_rows(&unlabeled);
            let targets = if hp.sinkhorn {
                sinkhorn_pseudo_labels(&psi_prime, hp.epsilon, hp.sinkhorn_iters)?.psi
            } else {
                psi_prime
            };
            let log_pred = tape.gather_rows(out.log_probs, &unlabeled)?;
            let pl = pseudo_label_loss(&mut tape, &targets, log_pred)?;
            components.pl = tape.value(pl).item();
            let weighted = tape.scale(pl, w_pl);
            loss = tape.add(loss, weighted)?;
        }

        let total = tape.value(loss).item();
        debug_assert!((total - total_loss(components, hp, epoch)).abs() <= 1e-9 * total.abs().max(1.0));
        if !total.is_finite() {
            return Err(Error::Numeric(format!(
                "epoch {epoch}: non-finite loss (class={}, kl={}, pl={})",
                components.class, components.kl, components.pl
            )));
        }
        tape.backward(loss, &mut params.store)?;
        drop(tape);
        adam.step(&mut params.store, hp.lr, hp.weight_decay)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;

        let (h, y) = forward(&features, a_tilde, &params, &config, &mut dropout_rng, false)?;
        let val_acc = accuracy(&y, labels, &split.val)?;
        let test_acc = accuracy(&y, labels, &split.test)?;
        records.push(EpochRecord {
            epoch,
            class_loss: components.class,
            kl_loss: components.kl,
            pl_loss: components.pl,
            total_loss: total,
            val_acc,
            test_acc,
            soc_penalty: soc_penalty(&h),
        });

        if best.as_ref().is_none_or(|b| val_acc > b.1) {
            let snapshot = params.store.iter().map(|p| p.value.clone()).collect();
            best = Some((epoch, val_acc, test_acc, snapshot));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch >= hp.patience {
            stopped_early = epoch + 1 < hp.epochs;
            break;
        }
    }

    let (best_epoch, best_val, test_at_best_val, snapshot) = best.expect("at least one epoch ran");
    for (p, v) in params.store.iter_mut().zip(snapshot.iter()) {
        p.value = v.clone();
    }
    let centroids = (snapshot.len() > model_len).then(|| snapshot[model_len].clone());
    params.store.split_off(model_len);
    params.store.zero_grads();

    Ok(TrainOutcome {
        params,
        centroids,
        report: TrainReport {
            epochs: records,
            best_epoch,
            best_val,
            test_at_best_val,
            stopped_early,
            wall_time: Some(started.elapsed().as_secs_f64()),
        },
    })
}

/// Evaluation-mode accuracy of `params` on the nodes `idx`.
pub fn evaluate(
    params: &ModelParams,
    config: &SognConfig,
    g: &Graph,
    a_tilde: &CsrMatrix,
    idx: &[usize],
) -> Result<f64> {
    // dropout is off, so the generator is never consulted
    let (_, y) =
        forward(&NodeFeatures::new(g.features.clone()), a_tilde, params, config, &mut RngState::new(0), false)?;
    accuracy(&y, g.labels(), idx)
}

use ncgc::clustering::{
    init_centroids, kl_loss, pseudo_label_loss, sinkhorn_pseudo_labels, soft_assign, soft_assign_on_tape,
    target_distribution,
};
use ncgc::graph::synthetic::{stochastic_block_model, SbmConfig};
use ncgc::graph::{make_split, normalized_adjacency, SplitConfig};
use ncgc::model::{forward, forward_on_tape, init_params, Backbone, InputTransform, NodeFeatures, SognConfig};
use ncgc::numerics::gradcheck::check_gradients;
use ncgc::numerics::{Parameter, RngState};
use ncgc::trainer::class_loss_on_tape;

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;

fn config(backbone: Backbone, input_transform: InputTransform, layers: usize) -> SognConfig {
    SognConfig {
        backbone,
        layers,
        hidden_dim: 5,
        beta: 0.3,
        dropout: 0.2,
        input_transform,
        appnp_hops: 3,
        ..Default::default()
    }
}

/// The full training objective with the clustering targets computed once from
/// the starting parameters and then frozen. If the tape differentiated
/// through the targets, this would disagree with finite differences.
fn check_objective(config: SognConfig, seed: u64, sparse: bool) {
    let sbm = SbmConfig { feature_dim: if sparse { 12 } else { 6 }, ..SbmConfig::new(vec![5, 5, 4], 0.5, 0.1) };
    let mut g = stochastic_block_model(&sbm, &mut RngState::new(seed)).unwrap();
    if sparse {
        // keep one entry per row so the CSR path carries the input product
        let d = g.feature_dim();
        g.features = ncgc::numerics::DenseMatrix::from_fn(g.node_count(), d, |i, j| {
            if j == i % d {
                g.features.get(i, j)
            } else {
                0.0
            }
        });
    }
    let features = NodeFeatures::new(g.features.clone());
    assert_eq!(features.sparse().is_some(), sparse);
    let a = normalized_adjacency(&g, true);
    let split = make_split(&g, &SplitConfig::per_class(1, 1), &mut RngState::new(seed + 1)).unwrap();
    let unlabeled = split.unlabeled(g.node_count());
    let mut params = init_params(&config, g.feature_dim(), g.class_count(), &mut RngState::new(seed + 2)).unwrap();

    let (h, y) = forward(&features, &a, &params, &config, &mut RngState::new(seed + 3), true).unwrap();
    let c0 = init_centroids(&h, g.class_count(), &mut RngState::new(seed + 4)).unwrap();
    let p = target_distribution(&soft_assign(&h, &c0).unwrap()).unwrap();
    let psi = sinkhorn_pseudo_labels(&y.select_rows(&unlabeled), 0.5, 3).unwrap().psi;
    let cid = params.store.add(Parameter::new("centroids", c0));
    let all: Vec<usize> = (0..g.node_count()).collect();
    let template = params.clone();

    let report = check_gradients(&mut params.store, STEP, |t, store| {
        let mut view = template.clone();
        view.store = store.clone();
        let out = forward_on_tape(t, &features, &a, &view, &config, &mut RngState::new(seed + 3), true)?;
        let class = class_loss_on_tape(t, out.log_probs, g.labels(), &split.train)?;
        let c = t.param(store, cid);
        let q = soft_assign_on_tape(t, out.h, c)?;
        let kl = kl_loss(t, &p, q, &all)?;
        let lp = t.gather_rows(out.log_probs, &unlabeled)?;
        let pl = pseudo_label_loss(t, &psi, lp)?;
        let s = t.add(class, kl)?;
        t.add(s, pl)
    })
    .unwrap();
    assert!(report.max_rel_err < TOL, "{config:?}: {report:?}");
    assert!(report.entries > 0);
}

#[test]
fn objective_gradients_with_frozen_targets() {
    let cases = [
        config(Backbone::Gcn, InputTransform::Linear, 2),
        config(Backbone::Gcn, InputTransform::Mlp, 3),
        config(Backbone::Gcn, InputTransform::Identity, 2),
        config(Backbone::Appnp, InputTransform::Linear, 2),
        SognConfig { final_relu: true, ..config(Backbone::Gcn, InputTransform::Linear, 2) },
    ];
    for (i, c) in cases.into_iter().enumerate() {
        check_objective(c.clone(), 10 * i as u64, false);
        if c.input_transform != InputTransform::Identity {
            check_objective(c, 10 * i as u64 + 5, true);
        }
    }
}

#[test]
fn recomputed_targets_give_identical_gradients() {
    let config = config(Backbone::Gcn, InputTransform::Linear, 2);
    let g = stochastic_block_model(&SbmConfig::new(vec![4, 4], 0.6, 0.1), &mut RngState::new(3)).unwrap();
    let a = normalized_adjacency(&g, true);
    let split = make_split(&g, &SplitConfig::per_class(1, 1), &mut RngState::new(4)).unwrap();
    let unlabeled = split.unlabeled(g.node_count());
    let all: Vec<usize> = (0..g.node_count()).collect();
    let mut params = init_params(&config, g.feature_dim(), g.class_count(), &mut RngState::new(5)).unwrap();
    let (h, y) =
        forward(&NodeFeatures::new(g.features.clone()), &a, &params, &config, &mut RngState::new(6), true).unwrap();
    let c0 = init_centroids(&h, g.class_count(), &mut RngState::new(7)).unwrap();
    let stored_p = target_distribution(&soft_assign(&h, &c0).unwrap()).unwrap();
    let stored_psi = sinkhorn_pseudo_labels(&y.select_rows(&unlabeled), 0.5, 3).unwrap().psi;
    let cid = params.store.add(Parameter::new("centroids", c0));

    let mut grads = Vec::new();
    for recompute in [false, true] {
        params.store.zero_grads();
        let mut t = ncgc::numerics::Tape::new();
        let features = NodeFeatures::new(g.features.clone());
        let out = forward_on_tape(&mut t, &features, &a, &params, &config, &mut RngState::new(6), true).unwrap();
        let c = t.param(&params.store, cid);
        let q = soft_assign_on_tape(&mut t, out.h, c).unwrap();
        let (p, psi) = if recompute {
            let p = target_distribution(t.value(q)).unwrap();
            let psi = sinkhorn_pseudo_labels(&t.value(out.probs).select_rows(&unlabeled), 0.5, 3).unwrap().psi;
            (p, psi)
        } else {
            (stored_p.clone(), stored_psi.clone())
        };
        let kl = kl_loss(&mut t, &p, q, &all).unwrap();
        let lp = t.gather_rows(out.log_probs, &unlabeled).unwrap();
        let pl = pseudo_label_loss(&mut t, &psi, lp).unwrap();
        let loss = t.add(kl, pl).unwrap();
        t.backward(loss, &mut params.store).unwrap();
        grads.push(params.store.iter().map(|p| p.grad.clone()).collect::<Vec<_>>());
    }
    assert_eq!(grads[0], grads[1]);
}

use ncgc::graph::synthetic::{stochastic_block_model, SbmConfig};
use ncgc::graph::{make_split, normalized_adjacency, Graph, Split, SplitConfig};
use ncgc::model::{init_params, NodeFeatures};
use ncgc::numerics::{ops, AdamState, RngState, Tape};
use ncgc::trainer::{
    ablate, accuracy, evaluate, run_seeds, train, AblationVariant, HyperParams, DROPOUT_STREAM, INIT_STREAM,
};

fn sbm(blocks: Vec<usize>, p_in: f64, p_out: f64, seed: u64) -> Graph {
    stochastic_block_model(&SbmConfig::new(blocks, p_in, p_out), &mut RngState::new(seed)).unwrap()
}

fn small_hp() -> HyperParams {
    HyperParams {
        hidden_dim: 16,
        epochs: 120,
        patience: 120,
        warmup_epochs: 10,
        lr: 0.01,
        dropout: 0.3,
        seed: 7,
        ..Default::default()
    }
}

/// Plain two-layer GCN with a linear input transform, written directly
/// against the tape. Returns the training loss of every epoch.
fn plain_gcn_losses(g: &Graph, split: &Split, hp: &HyperParams) -> Vec<f64> {
    let a = normalized_adjacency(g, true);
    let config = hp.sogn_config();
    let master = RngState::new(hp.seed);
    let mut params = init_params(&config, g.feature_dim(), g.class_count(), &mut master.fork(INIT_STREAM)).unwrap();
    let mut drop_rng = master.fork(DROPOUT_STREAM);
    let mut adam = AdamState::new(&params.store);
    let s = &params.store;
    let (w_in, b_in) = (s.find("input.w").unwrap(), s.find("input.b").unwrap());
    let (w0, w1, proto) = (s.find("layer0.w").unwrap(), s.find("layer1.w").unwrap(), params.prototype());
    let targets = ncgc::numerics::DenseMatrix::from_fn(split.train.len(), g.class_count(), |r, c| {
        f64::from(g.label(split.train[r]) == Some(c))
    });

    let mut losses = Vec::new();
    for _ in 0..hp.epochs {
        let mut t = Tape::new();
        let x = t.constant(g.features.clone());
        let (wi, bi) = (t.param(&params.store, w_in), t.param(&params.store, b_in));
        let h = t.matmul(x, wi).unwrap();
        let h = t.add_row_vector(h, bi).unwrap();
        let h = t.relu(h);
        let h = t.dropout(h, hp.dropout, &mut drop_rng, true).unwrap();
        let w = t.param(&params.store, w0);
        let h = t.matmul(h, w).unwrap();
        let h = t.sparse_matmul(&a, h).unwrap();
        let h = t.relu(h);
        let h = t.dropout(h, hp.dropout, &mut drop_rng, true).unwrap();
        let w = t.param(&params.store, w1);
        let h = t.matmul(h, w).unwrap();
        let h = t.sparse_matmul(&a, h).unwrap();
        let p = t.param(&params.store, proto);
        let logits = t.matmul(h, p).unwrap();
        let lp = t.log_softmax_rows(logits).unwrap();
        let picked = t.gather_rows(lp, &split.train).unwrap();
        let tv = t.constant(targets.clone());
        let prod = t.hadamard(tv, picked).unwrap();
        let total = t.sum(prod);
        let loss = t.scale(total, -1.0 / split.train.len() as f64);
        losses.push(t.value(loss).item());
        t.backward(loss, &mut params.store).unwrap();
        adam.step(&mut params.store, hp.lr, hp.weight_decay).unwrap();
    }
    losses
}

#[test]
fn zero_beta_zero_lambda_reproduces_plain_gcn() {
    let g = sbm(vec![15, 15, 15], 0.3, 0.05, 1);
    let split = make_split(&g, &SplitConfig::per_class(3, 3), &mut RngState::new(2)).unwrap();
    let hp = HyperParams { beta: 0.0, lambda_kl: 0.0, lambda_pl: 0.0, epochs: 60, patience: 60, ..small_hp() };
    let expect = plain_gcn_losses(&g, &split, &hp);
    let got = train(&g, &normalized_adjacency(&g, true), &split, &hp).unwrap();
    assert_eq!(got.report.epochs.len(), expect.len());
    for (r, e) in got.report.epochs.iter().zip(&expect) {
        assert!((r.class_loss - e).abs() < 1e-10, "epoch {}: {} vs {e}", r.epoch, r.class_loss);
        assert_eq!(r.total_loss, r.class_loss);
    }
}

#[test]
fn two_block_sbm_is_learned_perfectly() {
    let g = sbm(vec![10, 10], 0.6, 0.05, 3);
    let split = make_split(&g, &SplitConfig::per_class(3, 2), &mut RngState::new(4)).unwrap();
    let hp = HyperParams { epochs: 200, patience: 200, warmup_epochs: 20, ..small_hp() };
    let out = train(&g, &normalized_adjacency(&g, true), &split, &hp).unwrap();
    assert_eq!(out.report.test_at_best_val, 1.0);
    assert_eq!(out.centroids.is_some(), out.report.best_epoch >= hp.warmup_epochs);
    let acc = evaluate(&out.params, &hp.sogn_config(), &g, &normalized_adjacency(&g, true), &split.test).unwrap();
    assert_eq!(acc, out.report.test_at_best_val);
}

fn without_time(mut r: ncgc::trainer::TrainReport) -> ncgc::trainer::TrainReport {
    r.wall_time = None;
    r
}

#[test]
fn identical_hyperparameters_identical_reports() {
    let g = sbm(vec![12, 12, 12], 0.3, 0.05, 5);
    let split = make_split(&g, &SplitConfig::per_class(3, 3), &mut RngState::new(6)).unwrap();
    let a = normalized_adjacency(&g, true);
    let hp = small_hp();
    let r1 = train(&g, &a, &split, &hp).unwrap();
    let r2 = train(&g, &a, &split, &hp).unwrap();
    assert_eq!(without_time(r1.report), without_time(r2.report));
    for (p, q) in r1.params.store.iter().zip(r2.params.store.iter()) {
        assert_eq!(p.value, q.value);
    }
}

#[test]
fn early_stopping_bookkeeping() {
    let g = sbm(vec![10, 10], 0.5, 0.05, 8);
    let split = make_split(&g, &SplitConfig::per_class(3, 2), &mut RngState::new(9)).unwrap();
    let hp = HyperParams { epochs: 300, patience: 15, ..small_hp() };
    let out = train(&g, &normalized_adjacency(&g, true), &split, &hp).unwrap();
    let r = &out.report;

    let mut running = f64::NEG_INFINITY;
    let mut last_improvement = 0;
    for e in &r.epochs {
        if e.val_acc > running {
            running = e.val_acc;
            last_improvement = e.epoch;
        }
    }
    assert_eq!(r.best_val, running);
    assert_eq!(r.best_epoch, last_improvement);
    assert_eq!(r.test_at_best_val, r.epochs[r.best_epoch].test_acc);
    assert!(r.stopped_early);
    assert_eq!(r.epochs.last().unwrap().epoch, r.best_epoch + hp.patience);
}

#[test]
fn warmup_epochs_only_train_the_classifier() {
    let g = sbm(vec![10, 10], 0.5, 0.05, 10);
    let split = make_split(&g, &SplitConfig::per_class(3, 2), &mut RngState::new(11)).unwrap();
    let hp = HyperParams { warmup_epochs: 25, epochs: 40, patience: 40, ..small_hp() };
    let out = train(&g, &normalized_adjacency(&g, true), &split, &hp).unwrap();
    for e in &out.report.epochs {
        if e.epoch < 25 {
            assert_eq!((e.kl_loss, e.pl_loss), (0.0, 0.0));
            assert_eq!(e.total_loss, e.class_loss);
        } else {
            assert!(e.kl_loss > 0.0 && e.pl_loss > 0.0);
            assert!((e.total_loss - (e.class_loss + e.kl_loss + e.pl_loss)).abs() < 1e-12);
        }
    }
}

fn mean_offdiag_cosine(h: &ncgc::numerics::DenseMatrix) -> f64 {
    let (hn, _) = ops::column_l2_normalize(h);
    let gram = hn.t_matmul(&hn).unwrap();
    let d = gram.rows();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                total += gram.get(i, j).abs();
            }
        }
    }
    total / (d * (d - 1)) as f64
}

#[test]
fn soft_orthogonality_decorrelates_embedding_columns() {
    let g = sbm(vec![20, 20], 0.3, 0.03, 12);
    let a = normalized_adjacency(&g, true);
    let mut with_soc = 0.0;
    let mut without = 0.0;
    for seed in 0..5 {
        let split = make_split(&g, &SplitConfig::per_class(4, 4), &mut RngState::new(100 + seed)).unwrap();
        for (beta, slot) in [(0.005, &mut with_soc), (0.0, &mut without)] {
            let hp = HyperParams { beta, seed, epochs: 100, patience: 100, warmup_epochs: 10, ..Default::default() };
            let out = train(&g, &a, &split, &hp).unwrap();
            let (h, _) = ncgc::model::forward(
                &NodeFeatures::new(g.features.clone()),
                &a,
                &out.params,
                &hp.sogn_config(),
                &mut RngState::new(0),
                false,
            )
            .unwrap();
            *slot += mean_offdiag_cosine(&h) / 5.0;
        }
    }
    assert!(with_soc < without, "with {with_soc} vs without {without}");
}

#[test]
fn seeds_and_ablations() {
    let g = sbm(vec![10, 10], 0.5, 0.05, 13);
    let hp = HyperParams { epochs: 40, patience: 40, ..small_hp() };
    let split_cfg = SplitConfig::per_class(3, 2);
    let one = run_seeds(&g, &hp, &split_cfg, 1).unwrap();
    assert_eq!(one.std, 0.0);
    assert_eq!(one.runs[0].seed, hp.seed);

    let three = run_seeds(&g, &hp, &split_cfg, 3).unwrap();
    let seeds: Vec<u64> = three.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![7, 8, 9]);
    assert_eq!(three.runs[0].report.epochs, one.runs[0].report.epochs);

    let full = ablate(&g, &hp, AblationVariant::Full, &split_cfg, 1).unwrap();
    assert_eq!(full.runs[0].report.epochs, one.runs[0].report.epochs);

    let no_soc = ablate(&g, &hp, AblationVariant::NoSoc, &split_cfg, 1).unwrap();
    let plain = run_seeds(&g, &HyperParams { beta: 0.0, ..hp.clone() }, &split_cfg, 1).unwrap();
    assert_eq!(no_soc.runs[0].report.epochs, plain.runs[0].report.epochs);
}

#[test]
fn parallel_runs_match_sequential() {
    let g = sbm(vec![8, 8], 0.5, 0.05, 14);
    let hp = HyperParams { epochs: 30, patience: 30, ..small_hp() };
    let split_cfg = SplitConfig::per_class(3, 2);
    let seq = run_seeds(&g, &hp, &split_cfg, 3).unwrap();
    ncgc::numerics::set_deterministic(false);
    let par = run_seeds(&g, &hp, &split_cfg, 3);
    ncgc::numerics::set_deterministic(true);
    let par = par.unwrap();
    for (a, b) in seq.runs.iter().zip(&par.runs) {
        assert_eq!(a.report.epochs, b.report.epochs);
    }
}

#[test]
fn evaluation_helpers_agree() {
    let g = sbm(vec![6, 6], 0.6, 0.05, 15);
    let split = make_split(&g, &SplitConfig::per_class(2, 2), &mut RngState::new(1)).unwrap();
    let hp = HyperParams { epochs: 30, patience: 30, ..small_hp() };
    let a = normalized_adjacency(&g, true);
    let out = train(&g, &a, &split, &hp).unwrap();
    let (_, y) = ncgc::model::forward(
        &NodeFeatures::new(g.features.clone()),
        &a,
        &out.params,
        &hp.sogn_config(),
        &mut RngState::new(0),
        false,
    )
    .unwrap();
    assert_eq!(
        accuracy(&y, g.labels(), &split.val).unwrap(),
        evaluate(&out.params, &hp.sogn_config(), &g, &a, &split.val).unwrap()
    );
}

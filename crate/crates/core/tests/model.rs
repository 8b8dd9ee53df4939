mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use tagcn::nn::{
    inverted_dropout, load_checkpoint, masked_softmax_xent, save_checkpoint, Layer, LayerKind, Mode, Model,
    OperatorSet,
};
use tagcn::Error;

const KINDS: [LayerKind; 4] = [LayerKind::Tagcn, LayerKind::Gcn, LayerKind::Cheb, LayerKind::Dcnn];

fn setup(kind: LayerKind, seed: u64) -> (tagcn::Graph, Array2<f64>, Model) {
    let mut rng = common::rng(seed);
    let g = common::ring_with_chords(&mut rng, 12, 0.2);
    let x = common::random_matrix(&mut rng, 12, 5);
    let model = Model::build(kind, 5, &[8], 3, 2, 0.5, &mut rng).unwrap();
    (g, x, model)
}

#[test]
fn eval_forward_is_deterministic() {
    for kind in KINDS {
        let (g, x, model) = setup(kind, 1);
        let ops = OperatorSet::for_kinds(&g, &model.kinds()).unwrap();
        let a = model.predict(&ops, x.view()).unwrap();
        let b = model.predict(&ops, x.view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), (12, 3));
    }
}

#[test]
fn train_mode_depends_on_the_dropout_stream() {
    let (g, x, model) = setup(LayerKind::Tagcn, 2);
    let ops = OperatorSet::for_kinds(&g, &model.kinds()).unwrap();
    let run = |seed| {
        let mut r = common::rng(seed);
        model.forward(&ops, x.view(), Mode::Train(&mut r)).unwrap().0
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
    assert_ne!(run(5), model.predict(&ops, x.view()).unwrap());
}

#[test]
fn outputs_follow_vertex_relabeling() {
    for kind in KINDS {
        let (g, x, model) = setup(kind, 3);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut common::rng(99));
        let gp = g.permute(&perm).unwrap();
        let mut xp = Array2::zeros(x.dim());
        for (v, &p) in perm.iter().enumerate() {
            xp.row_mut(p).assign(&x.row(v));
        }
        let y = model.predict(&OperatorSet::for_kinds(&g, &model.kinds()).unwrap(), x.view()).unwrap();
        let yp = model.predict(&OperatorSet::for_kinds(&gp, &model.kinds()).unwrap(), xp.view()).unwrap();
        for (v, &p) in perm.iter().enumerate() {
            for f in 0..y.ncols() {
                assert!((y[[v, f]] - yp[[p, f]]).abs() < 1e-12, "{kind:?}");
            }
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for kind in KINDS {
        let (g, x, model) = setup(kind, 4);
        let path = dir.path().join(format!("{kind:?}.json"));
        save_checkpoint(&path, &model).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        for (a, b) in model.layers().iter().zip(back.layers()) {
            for (pa, pb) in a.params().iter().zip(b.params()) {
                assert!(pa.iter().zip(pb).all(|(u, v)| u.to_bits() == v.to_bits()));
            }
        }
        let ops = OperatorSet::for_kinds(&g, &model.kinds()).unwrap();
        assert_eq!(model.predict(&ops, x.view()).unwrap(), back.predict(&ops, x.view()).unwrap());
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = setup(LayerKind::Tagcn, 5);
    let path = dir.path().join("m.json");
    save_checkpoint(&path, &model).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();

    let bad_version = dir.path().join("v.json");
    std::fs::write(&bad_version, text.replacen("\"version\":1", "\"version\":99", 1)).unwrap();
    assert!(load_checkpoint(&bad_version).is_err());

    let truncated = dir.path().join("t.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert!(load_checkpoint(&truncated).is_err());

    assert!(load_checkpoint(&dir.path().join("missing.json")).is_err());
}

#[test]
fn backward_rejects_state_from_another_architecture() {
    let (g, x, model) = setup(LayerKind::Tagcn, 6);
    let other = Model::build(LayerKind::Tagcn, 5, &[4], 3, 2, 0.5, &mut common::rng(7)).unwrap();
    let ops = OperatorSet::for_kinds(&g, &model.kinds()).unwrap();
    let (logits, state) = model.forward(&ops, x.view(), Mode::Eval).unwrap();
    let labels = vec![0i64; 12];
    let (_, grad) = masked_softmax_xent(logits.view(), &labels, &[0, 1]).unwrap();
    assert!(matches!(other.backward(&ops, &state, grad.view()), Err(Error::StaleState(_))));
    assert!(model.backward(&ops, &state, grad.view()).is_ok());
}

#[test]
fn widths_must_chain() {
    let mut rng = common::rng(8);
    let layers = vec![Layer::tagcn(4, 6, 2, true, &mut rng), Layer::tagcn(5, 2, 2, true, &mut rng)];
    assert!(Model::new(layers, 0.5).is_err());
    assert!(Model::build(LayerKind::Tagcn, 4, &[6], 2, 2, 1.0, &mut rng).is_err());
}

#[test]
fn loss_rejects_bad_labels_and_masks() {
    let logits = Array2::<f64>::zeros((3, 2));
    assert!(masked_softmax_xent(logits.view(), &[0, 1, 0], &[]).is_err());
    assert!(masked_softmax_xent(logits.view(), &[0, 2, 0], &[1]).is_err());
    assert!(masked_softmax_xent(logits.view(), &[0, 1, 0], &[3]).is_err());
    let (loss, _) = masked_softmax_xent(logits.view(), &[0, 1, 0], &[0, 1, 2]).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dropout_keeps_or_rescales(rate in 0.0f64..0.95, seed in any::<u64>()) {
        let x = common::random_matrix(&mut common::rng(seed), 6, 4);
        let (y, mask) = inverted_dropout(x.view(), rate, &mut common::rng(seed ^ 1)).unwrap();
        for ((&xv, &yv), &m) in x.iter().zip(&y).zip(&mask) {
            prop_assert!(m == 0.0 || m == 1.0);
            prop_assert_eq!(yv, xv * m * (1.0 / (1.0 - rate)));
        }
    }

    #[test]
    fn softmax_gradient_rows_sum_to_zero(seed in any::<u64>(), n in 2usize..10, c in 2usize..5) {
        let mut rng = common::rng(seed);
        let logits = common::random_matrix(&mut rng, n, c) * 20.0;
        let labels: Vec<i64> = (0..n).map(|i| (i % c) as i64).collect();
        let mask: Vec<usize> = (0..n).step_by(2).collect();
        let (loss, grad) = masked_softmax_xent(logits.view(), &labels, &mask).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        for (i, row) in grad.rows().into_iter().enumerate() {
            prop_assert!(row.sum().abs() < 1e-12);
            if i % 2 == 1 {
                prop_assert!(row.iter().all(|&v| v == 0.0));
            }
        }
    }
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn softmax_uniform() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store, false, 0);
    let x = g.constant(Tensor::vector(vec![0.0; 3]));
    let y = g.softmax(x);
    for &p in g.value(y) {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn matmul_identity() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store, false, 0);
    let eye = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let x = g.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let y = g.matmul(eye, x).unwrap();
    assert_eq!(g.shape(y), &[2, 3]);
    assert_eq!(g.value(y), g.value(x));

    let v = g.constant(Tensor::vector(vec![7.0, 8.0]));
    let y = g.matmul(eye, v).unwrap();
    assert_eq!((g.shape(y), g.value(y)), (&[2usize][..], &[7.0, 8.0][..]));
    let dot = g.matmul(v, v).unwrap();
    assert_eq!((g.shape(dot), g.scalar(dot)), (&[][..], 113.0));
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store, false, 0);
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    match g.matmul(a, b) {
        Err(Error::Dimension { left, right, .. }) => {
            assert_eq!((left, right), (vec![2, 3], vec![2, 3]));
        }
        other => panic!("{other:?}"),
    }
    let c = g.constant(Tensor::zeros(&[3]));
    assert!(g.add(a, c).is_err());
    let msg = g.mul(a, c).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[3]"), "{msg}");
}

#[test]
fn lstm_zero_weights_give_zero_state() {
    let mut store = ParamStore::new();
    let w = LstmWeights {
        input: store.add("w", Tensor::zeros(&[3, 8])),
        recurrent: store.add("u", Tensor::zeros(&[2, 8])),
        bias: store.add("b", Tensor::zeros(&[8])),
        hidden: 2,
    };
    let mut g = Graph::new(&store, false, 0);
    let x = g.constant(Tensor::zeros(&[3]));
    let h = g.constant(Tensor::zeros(&[2]));
    let c = g.constant(Tensor::zeros(&[2]));
    let (h, c) = lstm_cell(&mut g, x, h, c, &w).unwrap();
    assert_eq!(g.value(h), &[0.0, 0.0]);
    assert_eq!(g.value(c), &[0.0, 0.0]);
}

#[test]
fn lstm_matches_closed_form() {
    // One hidden unit, all gate pre-activations equal to a.
    let a = 0.3;
    let mut store = ParamStore::new();
    let w = LstmWeights {
        input: store.add("w", Tensor::matrix(1, 4, vec![1.0; 4]).unwrap()),
        recurrent: store.add("u", Tensor::zeros(&[1, 4])),
        bias: store.add("b", Tensor::zeros(&[4])),
        hidden: 1,
    };
    let mut g = Graph::new(&store, false, 0);
    let x = g.constant(Tensor::vector(vec![a]));
    let h = g.constant(Tensor::vector(vec![0.0]));
    let c = g.constant(Tensor::vector(vec![0.5]));
    let (h, c) = lstm_cell(&mut g, x, h, c, &w).unwrap();
    let s = 1.0 / (1.0 + (-a).exp());
    let c_exp = s * 0.5 + s * a.tanh();
    assert!((g.scalar(c) - c_exp).abs() < 1e-15);
    assert!((g.scalar(h) - s * c_exp.tanh()).abs() < 1e-15);
}

#[test]
fn backward_of_sum() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(vec![0.5, -1.0, 2.0]));
    let mut g = Graph::new(&store, false, 0);
    let xv = g.param(x);
    let loss = g.sum(xv);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[1.0, 1.0, 1.0]);
}

#[test]
fn backward_of_square() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(vec![1.0, 2.0]));
    let mut g = Graph::new(&store, false, 0);
    let xv = g.param(x);
    let sq = g.mul(xv, xv).unwrap();
    let loss = g.sum(sq);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0]);
}

#[test]
fn shared_parameter_gradients_add() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(vec![1.0, 2.0]));
    let mut g = Graph::new(&store, false, 0);
    // loss = sum(3x) + sum(x * x), two separate param nodes
    let a = g.param(x);
    let a3 = g.scale(a, 3.0);
    let s1 = g.sum(a3);
    let b = g.param(x);
    let bb = g.mul(b, b).unwrap();
    let s2 = g.sum(bb);
    let loss = g.add(s1, s2).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[5.0, 7.0]);
    drop(g);

    store.accumulate(&grads);
    store.accumulate(&grads);
    assert_eq!(store.get(x).grad().unwrap(), &[10.0, 14.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(vec![1.0, 2.0]));
    let mut g = Graph::new(&store, false, 0);
    let v = g.param(x);
    assert!(matches!(g.backward(v), Err(Error::Usage(_))));
}

#[test]
fn grad_check_linear_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let w = store.add("w", random(&[4, 3], &mut rng));
    let x = random(&[4], &mut rng);
    let err = grad_check(&mut store, &[w], 1e-5, 12, 1, |g| {
        let xv = g.constant(x.clone());
        let wv = g.param(w);
        let y = g.matmul(xv, wv)?;
        Ok(g.sum(y))
    })
    .unwrap();
    assert!(err < 1e-9, "{err}");
}

/// Every differentiable op in one loss, checked against central
/// differences.
#[test]
fn grad_check_all_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let m = store.add("m", random(&[3, 4], &mut rng));
    let v = store.add("v", random(&[4], &mut rng));
    let emb = store.add("emb", random(&[5, 2], &mut rng));
    let filt = store.add("filt", random(&[6, 3], &mut rng));
    let w = LstmWeights {
        input: store.add("lstm.w", random(&[3, 8], &mut rng)),
        recurrent: store.add("lstm.u", random(&[2, 8], &mut rng)),
        bias: store.add("lstm.b", random(&[8], &mut rng)),
        hidden: 2,
    };
    let ids: Vec<ParamId> = store.ids().collect();

    let err = grad_check(&mut store, &ids, 1e-5, 20, 3, |g| {
        let mv = g.param(m);
        let vv = g.param(v);
        let mt = g.transpose(mv)?; // [4,3]
        let a = g.matmul(vv, mt)?; // [3]
        let b = g.matmul(mv, vv)?; // [3]
        let prod = g.mul(a, b)?;
        let diff = g.sub(prod, a)?;
        let t = g.tanh(diff);
        let s = g.sigmoid(b);
        let e = g.elu(a);
        let sm = g.softmax(e);
        let ls = g.log_softmax(t);
        let cat = g.concat(&[sm, ls, s]); // [9]
        let part = g.slice(cat, 2, 6)?;
        let sq = g.reshape(part, &[2, 3])?;
        let bias = g.slice(cat, 0, 3)?;
        let shifted = g.add_row(sq, bias)?;
        let r0 = g.row(shifted, 1)?;

        let e_all = g.param(emb);
        let chars = g.gather_rows(e_all, &[0, 3, 3, 1, 4])?; // [5,2]
        let fv = g.param(filt);
        let pooled = g.conv1d_maxpool(chars, fv, 3)?; // [3]

        let h0 = g.scale(r0, 0.5);
        let c0 = g.constant(Tensor::vector(vec![0.1, -0.2]));
        let h0 = g.slice(h0, 0, 2)?;
        let (h1, c1) = lstm_cell(g, pooled, h0, c0, &w)?;
        let (h2, _) = lstm_cell(g, s, h1, c1, &w)?;
        let stacked = g.stack_rows(&[h1, h2])?;
        let flat = g.reshape(stacked, &[4])?;
        let ce = g.cross_entropy(flat, 2)?;
        let total = g.sum(cat);
        let total = g.scale(total, 0.1);
        g.add(ce, total)
    })
    .unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn dropout_modes() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store, false, 1);
    let x = g.constant(Tensor::vector(vec![1.0; 1000]));
    assert_eq!(g.dropout(x, 0.33).unwrap(), x);

    let mut g = Graph::new(&store, true, 1);
    let x = g.constant(Tensor::vector(vec![1.0; 1000]));
    let y = g.dropout(x, 0.5).unwrap();
    let kept = g.value(y).iter().filter(|&&v| v != 0.0).count();
    assert!((400..600).contains(&kept), "{kept}");
    assert!(g.value(y).iter().all(|&v| v == 0.0 || v == 2.0));
    assert!(g.dropout(x, 1.0).is_err());

    let mut again = Graph::new(&store, true, 1);
    let x2 = again.constant(Tensor::vector(vec![1.0; 1000]));
    let y2 = again.dropout(x2, 0.5).unwrap();
    assert_eq!(g.value(y), again.value(y2));
}

#[test]
fn conv_needs_window_rows() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store, false, 0);
    let x = g.constant(Tensor::zeros(&[2, 4]));
    let f = g.constant(Tensor::zeros(&[12, 5]));
    assert!(g.conv1d_maxpool(x, f, 3).is_err());
    let x = g.constant(Tensor::zeros(&[3, 4]));
    let y = g.conv1d_maxpool(x, f, 3).unwrap();
    assert_eq!(g.shape(y), &[5]);
}

#[test]
fn container_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    store.add("a.weight", random(&[3, 5], &mut rng));
    store.add("b", Tensor::new(vec![3], vec![f64::MIN_POSITIVE, -0.0, 1e300]).unwrap());
    store.add("scalar", Tensor::scalar(std::f64::consts::PI));
    let mut buf = Vec::new();
    store.write_to(&mut buf).unwrap();
    let back = ParamStore::read_from(&buf[..]).unwrap();
    assert_eq!(back.len(), 3);
    for ((_, n1, t1), (_, n2, t2)) in store.iter().zip(back.iter()) {
        assert_eq!(n1, n2);
        assert_eq!(t1.shape(), t2.shape());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(t1), bits(t2));
    }
    assert!(ParamStore::read_from(&buf[..10]).is_err());
    assert!(ParamStore::read_from(&b"NOTATENSORFILE"[..]).is_err());
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
        let store = ParamStore::new();
        let mut g = Graph::new(&store, false, 0);
        let x = g.constant(Tensor::vector(xs));
        let y = g.softmax(x);
        let total: f64 = g.value(y).iter().sum();
        prop_assert!(g.value(y).iter().all(|&p| p >= 0.0));
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn row_wise_losses_match_per_row_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut store = ParamStore::new();
    let m = store.add("m", random(&[3, 4], &mut rng));
    let targets = [2, 0, 3];

    let mut g = Graph::new(&store, false, 0);
    let mv = g.param(m);
    let whole = g.cross_entropy_rows(mv, &targets).unwrap();
    let ls = g.log_softmax_rows(mv).unwrap();
    let mut expected = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = g.row(mv, r).unwrap();
        let ce = g.cross_entropy(row, t).unwrap();
        expected += g.scalar(ce);
        assert!((g.value(ls)[r * 4 + t] + g.scalar(ce)).abs() < 1e-14);
    }
    assert!((g.scalar(whole) - expected).abs() < 1e-14);
    assert!(g.cross_entropy_rows(mv, &[0, 4, 1]).is_err());

    let ids = [m];
    let err = grad_check(&mut store, &ids, 1e-5, 12, 2, |g| {
        let mv = g.param(m);
        let ls = g.log_softmax_rows(mv)?;
        let t = g.tanh(ls);
        let a = g.sum(t);
        let b = g.cross_entropy_rows(mv, &targets)?;
        g.add(a, b)
    })
    .unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn gradient_norm_and_scaling() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::vector(vec![1.0, 2.0]));
    let _unused = store.add("unused", Tensor::vector(vec![1.0]));
    let mut g = Graph::new(&store, false, 0);
    let av = g.param(a);
    let scaled = g.scale(av, 3.0);
    let b = g.scale(av, 4.0);
    let both = g.concat(&[scaled, b]);
    let loss = g.sum(both);
    let mut grads = g.backward(loss).unwrap();
    assert_eq!(grads.iter().count(), 1);
    assert_eq!(grads.norm(), (49.0f64 * 2.0).sqrt());
    grads.scale(0.5);
    assert_eq!(grads.get(a).unwrap(), &[3.5, 3.5]);
}

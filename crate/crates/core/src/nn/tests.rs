use super::*;
use crate::rng::seeded;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng as _;

fn spec(inputs: usize, hidden: &[usize], actions: usize) -> NetworkSpec {
    NetworkSpec::mlp(inputs, hidden, actions)
}

fn random_input(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

#[test]
fn zero_weights_give_zero_output() {
    let mut net = Network::new(spec(3, &[4], 2), &mut seeded(1)).unwrap();
    for p in net.params_mut() {
        p.value.fill(0.0);
    }
    let y = net.infer(array![[1.0, 2.0, 3.0]].view()).unwrap();
    assert_eq!(y, Array2::<f64>::zeros((1, 2)));
}

#[test]
fn identity_layer_passes_input_through() {
    let mut net = Network::new(spec(3, &[], 3), &mut seeded(1)).unwrap();
    let mut ps = net.params_mut();
    ps[0].value = Array2::eye(3);
    ps[1].value.fill(0.0);
    let x = array![[0.5, -1.5, 2.0]];
    assert_eq!(net.infer(x.view()).unwrap(), x);
}

#[test]
fn two_layer_hand_computed() {
    let mut net = Network::new(spec(2, &[2], 2), &mut seeded(1)).unwrap();
    {
        let mut ps = net.params_mut();
        ps[0].value = array![[1.0, -1.0], [2.0, 0.5]];
        ps[1].value = array![[0.0, 0.1]];
        ps[2].value = array![[1.0, 2.0], [3.0, -1.0]];
        ps[3].value = array![[0.5, 0.0]];
    }
    // h = relu([1*1 + 1*2, 1*(-1) + 1*0.5 + 0.1]) = [3, 0]
    // y = [3*1 + 0.5, 3*2] = [3.5, 6]
    let y = net.infer(array![[1.0, 1.0]].view()).unwrap();
    assert_eq!(y, array![[3.5, 6.0]]);
}

#[test]
fn shape_mismatch_is_an_error() {
    let net = Network::new(spec(3, &[4], 2), &mut seeded(1)).unwrap();
    assert!(matches!(
        net.infer(array![[1.0, 2.0]].view()),
        Err(NnError::Shape { expected: 3, got: 2 })
    ));
}

#[test]
fn backward_without_forward_fails() {
    let mut net = Network::new(spec(2, &[2], 1), &mut seeded(1)).unwrap();
    assert!(matches!(
        net.backward(array![[1.0]].view()),
        Err(NnError::NoForward)
    ));
}

#[test]
fn linear_mse_gradient_closed_form() {
    let mut net = Network::new(spec(3, &[], 1), &mut seeded(2)).unwrap();
    let x = array![[0.3, -0.7, 1.1]];
    let target = array![[0.25]];
    let pred = net.forward(x.view()).unwrap();
    let (_, dy) = mse_loss(&pred, &target);
    net.backward(dy.view()).unwrap();
    let g = 2.0 * (pred[[0, 0]] - target[[0, 0]]);
    let ps = net.params();
    for i in 0..3 {
        assert!((ps[0].grad[[i, 0]] - g * x[[0, i]]).abs() < 1e-14);
    }
    assert!((ps[1].grad[[0, 0]] - g).abs() < 1e-14);
}

#[test]
fn unused_parameter_has_zero_gradient() {
    // The loss only looks at output 0, so head weights for output 1 get nothing.
    let mut net = Network::new(spec(3, &[4], 2), &mut seeded(3)).unwrap();
    let x = random_input(5, 3, 1);
    let y = net.forward(x.view()).unwrap();
    let mut dy = Array2::zeros(y.raw_dim());
    dy.column_mut(0).fill(1.0);
    net.backward(dy.view()).unwrap();
    let head_w = &net.params()[2].grad;
    assert!(head_w.column(1).iter().all(|&g| g == 0.0));
}

#[test]
fn linear_net_gradient_check_is_tight() {
    let mut net = Network::new(spec(4, &[], 3), &mut seeded(4)).unwrap();
    let x = random_input(6, 4, 2);
    let t = random_input(6, 3, 3);
    let err = gradient_check(&mut net, x.view(), 1e-5, |y| mse_loss(y, &t)).unwrap();
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn zero_input_zero_target_gradient_is_finite() {
    let mut net = Network::new(spec(3, &[5], 2), &mut seeded(5)).unwrap();
    let x = Array2::zeros((2, 3));
    let t = Array2::zeros((2, 2));
    let err = gradient_check(&mut net, x.view(), 1e-5, |y| mse_loss(y, &t)).unwrap();
    assert!(err.is_finite());
    assert!(err <= 1e-4, "{err}");
}

fn kl_against(target: Array2<f64>, atoms: usize) -> impl Fn(&Array2<f64>) -> (f64, Array2<f64>) {
    move |logits| {
        let p = distribution_head(logits.view(), atoms);
        let n = logits.nrows() as f64;
        let mut loss = 0.0;
        for (m, d) in target.iter().zip(p.iter()) {
            if *m > 0.0 {
                loss += m * (m.ln() - d.ln());
            }
        }
        // d KL / d logit = p - m per action block whose target mass sums to 1.
        let grad = (&p - &target) / n;
        (loss / n, grad)
    }
}

#[test]
fn dueling_noisy_categorical_kl_gradient() {
    let mut rng = seeded(6);
    let s = NetworkSpec {
        inputs: 5,
        hidden: vec![8, 6],
        actions: 3,
        atoms: 7,
        dueling: true,
        noisy: true,
        sigma0: 0.5,
        output: OutputActivation::Identity,
    };
    let mut net = Network::new(s, &mut rng).unwrap();
    net.sample_noise(&mut rng);
    let x = random_input(4, 5, 7);
    let raw = random_input(4, 21, 8).mapv(f64::exp);
    let mut target = raw.clone();
    for mut row in target.outer_iter_mut() {
        for chunk in row.as_slice_mut().unwrap().chunks_mut(7) {
            let sum: f64 = chunk.iter().sum();
            chunk.iter_mut().for_each(|v| *v /= sum);
        }
    }
    let err = gradient_check(&mut net, x.view(), 1e-5, kl_against(target, 7)).unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn tanh_output_gradient() {
    let mut s = spec(3, &[6], 2);
    s.output = OutputActivation::Tanh;
    let mut net = Network::new(s, &mut seeded(9)).unwrap();
    let x = random_input(3, 3, 9);
    let t = random_input(3, 2, 10);
    let err = gradient_check(&mut net, x.view(), 1e-5, |y| mse_loss(y, &t)).unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut net = Network::new(spec(3, &[7], 1), &mut seeded(11)).unwrap();
    let x = random_input(1, 3, 12);
    net.forward(x.view()).unwrap();
    let dx = net.backward(array![[1.0]].view()).unwrap();
    for i in 0..3 {
        let mut p = x.clone();
        p[[0, i]] += 1e-6;
        let mut m = x.clone();
        m[[0, i]] -= 1e-6;
        let num = (net.infer(p.view()).unwrap()[[0, 0]] - net.infer(m.view()).unwrap()[[0, 0]]) / 2e-6;
        assert!((num - dx[[0, i]]).abs() < 1e-6);
    }
}

#[test]
fn dueling_examples() {
    let q = dueling_combine(array![[1.0]].view(), array![[1.0, 3.0]].view(), 2);
    assert_eq!(q, array![[0.0, 2.0]]);
    let q = dueling_combine(array![[0.7]].view(), array![[4.0, 4.0, 4.0]].view(), 3);
    assert_eq!(q, array![[0.7, 0.7, 0.7]]);
}

#[test]
fn distribution_head_examples() {
    let p = distribution_head(Array2::zeros((1, 51)).view(), 51);
    assert!(p.iter().all(|&v| (v - 1.0 / 51.0).abs() < 1e-15));

    let mut logits = Array2::zeros((1, 51));
    logits[[0, 17]] = 1000.0;
    let p = distribution_head(logits.view(), 51);
    assert!((p[[0, 17]] - 1.0).abs() < 1e-12);
    assert!(p.iter().all(|v| v.is_finite()));

    let p = distribution_head(array![[0.0, 3f64.ln()]].view(), 2);
    assert!((p[[0, 0]] - 0.25).abs() < 1e-15);
    assert!((p[[0, 1]] - 0.75).abs() < 1e-15);
}

#[test]
fn cleared_noise_makes_network_deterministic() {
    let mut rng = seeded(12);
    let mut s = spec(4, &[8], 3);
    s.noisy = true;
    let mut net = Network::new(s, &mut rng).unwrap();
    net.sample_noise(&mut rng);
    let x = random_input(2, 4, 13);
    let noisy = net.infer(x.view()).unwrap();
    net.clear_noise();
    let a = net.infer(x.view()).unwrap();
    let b = net.infer(x.view()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, noisy);
    assert!(!net.noise_active());
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut net = Network::new(spec(3, &[4], 2), &mut seeded(14)).unwrap();
    let before = net.clone();
    let mut opt = Adam::new(1e-3, &net);
    opt.step(&mut net);
    assert_eq!(net, before);
}

#[test]
fn adam_first_step_is_lr_times_sign() {
    let mut net = Network::new(spec(2, &[], 1), &mut seeded(15)).unwrap();
    let before: Vec<_> = net.params().iter().map(|p| p.value.clone()).collect();
    net.params_mut()[0].grad = array![[0.3], [-2.0]];
    net.params_mut()[1].grad = array![[1e-3]];
    let mut opt = Adam::new(1e-3, &net);
    opt.step(&mut net);
    let after = net.params();
    let d0 = &after[0].value - &before[0];
    assert!((d0[[0, 0]] + 1e-3).abs() < 1e-10);
    assert!((d0[[1, 0]] - 1e-3).abs() < 1e-10);
    let d1 = &after[1].value - &before[1];
    assert!((d1[[0, 0]] + 1e-3).abs() < 1e-7);
}

#[test]
fn adam_constant_gradient_step_approaches_lr() {
    let mut net = Network::new(spec(1, &[], 1), &mut seeded(16)).unwrap();
    let mut opt = Adam::new(1e-3, &net);
    let mut last = 0.0;
    for _ in 0..5000 {
        let before = net.params()[0].value[[0, 0]];
        net.params_mut()[0].grad.fill(0.5);
        opt.step(&mut net);
        last = before - net.params()[0].value[[0, 0]];
    }
    assert!((last - 1e-3).abs() < 1e-9, "{last}");
}

#[test]
fn adam_clip_norm_rescales() {
    let mut net = Network::new(spec(1, &[], 1), &mut seeded(17)).unwrap();
    let mut clipped = net.clone();
    let mut a = Adam::new(1e-3, &net);
    let mut b = Adam::new(1e-3, &clipped);
    b.clip_norm = Some(1.0);
    for _ in 0..3 {
        net.params_mut()[0].grad.fill(10.0);
        clipped.params_mut()[0].grad.fill(10.0);
        a.step(&mut net);
        b.step(&mut clipped);
    }
    // Adam is scale invariant once the moments are consistent, bar epsilon.
    let d = (net.params()[0].value[[0, 0]] - clipped.params()[0].value[[0, 0]]).abs();
    assert!(d < 1e-9);
}

#[test]
fn soft_update_and_copy() {
    let a = Network::new(spec(2, &[3], 1), &mut seeded(18)).unwrap();
    let mut b = Network::new(spec(2, &[3], 1), &mut seeded(19)).unwrap();
    let b0 = b.clone();
    b.soft_update(&a, 0.25).unwrap();
    let (pa, pb, p0) = (a.params(), b.params(), b0.params());
    let expect = 0.25 * pa[0].value[[1, 2]] + 0.75 * p0[0].value[[1, 2]];
    assert!((pb[0].value[[1, 2]] - expect).abs() < 1e-15);
    b.copy_from(&a).unwrap();
    assert_eq!(b.params()[0].value, a.params()[0].value);
    let other = Network::new(spec(2, &[4], 1), &mut seeded(1)).unwrap();
    assert!(matches!(b.copy_from(&other), Err(NnError::ArchitectureMismatch)));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let s = NetworkSpec {
        inputs: 4,
        hidden: vec![5, 3],
        actions: 2,
        atoms: 3,
        dueling: true,
        noisy: true,
        sigma0: 0.5,
        output: OutputActivation::Identity,
    };
    let net = Network::new(s, &mut seeded(20)).unwrap();
    let mut buf = Vec::new();
    write_network(&net, &mut buf).unwrap();
    let back = read_network(buf.as_slice()).unwrap();
    assert_eq!(back, net);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.txt");
    save_network(&net, &path).unwrap();
    assert_eq!(load_network(&path).unwrap(), net);

    let text = String::from_utf8(buf).unwrap().replace("tensor 0 4 5", "tensor 0 4 6");
    assert!(matches!(read_network(text.as_bytes()), Err(NnError::Checkpoint(_))));
}

#[test]
fn expected_values_collapse_atoms() {
    let p = array![[0.5, 0.5, 0.0, 1.0]];
    assert_eq!(expected_values(p.view(), &[-1.0, 3.0]), array![[1.0, 3.0]]);
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(logits in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let x = Array2::from_shape_vec((1, 12), logits).unwrap();
        let p = distribution_head(x.view(), 4);
        for chunk in p.as_slice().unwrap().chunks(4) {
            prop_assert!((chunk.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(chunk.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn dueling_is_shift_invariant(a in proptest::collection::vec(-10.0f64..10.0, 6), v in -5.0f64..5.0, k in -100.0f64..100.0) {
        let adv = Array2::from_shape_vec((1, 6), a).unwrap();
        let shifted = adv.mapv(|x| x + k);
        let val = array![[v, -v]];
        let q1 = dueling_combine(val.view(), adv.view(), 3);
        let q2 = dueling_combine(val.view(), shifted.view(), 3);
        for (x, y) in q1.iter().zip(q2.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn random_dense_nets_pass_gradient_check(seed in 0u64..1000, dueling in any::<bool>(), noisy in any::<bool>()) {
        let mut rng = seeded(seed);
        let s = NetworkSpec {
            inputs: 3,
            hidden: vec![5],
            actions: 2,
            atoms: 1,
            dueling,
            noisy,
            sigma0: 0.5,
            output: OutputActivation::Identity,
        };
        let mut net = Network::new(s, &mut rng).unwrap();
        net.sample_noise(&mut rng);
        let x = random_input(3, 3, seed + 1);
        let t = random_input(3, 2, seed + 2);
        let err = gradient_check(&mut net, x.view(), 1e-5, |y| mse_loss(y, &t)).unwrap();
        prop_assert!(err <= 1e-4, "{}", err);
    }
}

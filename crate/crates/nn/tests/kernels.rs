mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssp_nn::{
    conv1d, conv1d_grad, maxpool1d, maxpool1d_grad, relu, relu_grad, sigmoid, sigmoid_grad,
    transposed_conv1d, transposed_conv1d_grad, Conv1d, Tensor, TransposedConv1d,
};
use support::oracle::{
    central_difference, direct_conv1d, direct_transposed_conv1d, flatten, grid_from_flat,
    max_rel_error,
};

const FD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn random_tensor(rng: &mut ChaCha8Rng, b: usize, c: usize, t: usize) -> Tensor {
    Tensor::from_fn(b, c, t, |_, _, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn randomize_bias(rng: &mut ChaCha8Rng, bias: &mut [f64]) {
    bias.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
}

#[test]
fn conv1d_matches_direct_summation_on_small_shape_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for batch in 1..=3 {
        for in_ch in 1..=4 {
            for out_ch in 1..=4 {
                for time in 1..=9 {
                    for k in [1, 3, 5] {
                        let mut layer = Conv1d::same(in_ch, out_ch, k, &mut rng).unwrap();
                        randomize_bias(&mut rng, &mut layer.bias.value);
                        let x = random_tensor(&mut rng, batch, in_ch, time);
                        let got = conv1d(&x, &layer).unwrap();
                        let want = direct_conv1d(
                            &grid_from_flat(x.data(), batch, in_ch, time),
                            &grid_from_flat(&layer.weight.value, out_ch, in_ch, k),
                            &layer.bias.value,
                            1,
                            (k - 1) / 2,
                        );
                        for (a, b) in got.data().iter().zip(flatten(&want)) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
            }
        }
    }
    assert!(worst <= 1e-12, "max abs deviation {worst}");
}

#[test]
fn strided_conv_and_transposed_conv_match_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for (k, s) in [(2, 2), (4, 2), (3, 1), (6, 2), (3, 3)] {
        let p = (k - s) / 2;
        for time in 2..=9 {
            let conv = Conv1d::new(3, 2, k, s, p, &mut rng).unwrap();
            if let Ok(t_out) = conv.output_len(time) {
                let x = random_tensor(&mut rng, 2, 3, time);
                let got = conv1d(&x, &conv).unwrap();
                assert_eq!(got.time(), t_out);
                let want = direct_conv1d(
                    &grid_from_flat(x.data(), 2, 3, time),
                    &grid_from_flat(&conv.weight.value, 2, 3, k),
                    &conv.bias.value,
                    s,
                    p,
                );
                assert!(max_rel_error(got.data(), &flatten(&want), 1.0) <= 1e-12);
            }

            let mut tconv = TransposedConv1d::new(3, 2, k, s, &mut rng).unwrap();
            randomize_bias(&mut rng, &mut tconv.bias.value);
            let x = random_tensor(&mut rng, 2, 3, time);
            let got = transposed_conv1d(&x, &tconv).unwrap();
            assert_eq!(got.time(), s * time);
            let want = direct_transposed_conv1d(
                &grid_from_flat(x.data(), 2, 3, time),
                &grid_from_flat(&tconv.weight.value, 3, 2, k),
                &tconv.bias.value,
                s,
                p,
            );
            assert!(max_rel_error(got.data(), &flatten(&want), 1.0) <= 1e-12);
        }
    }
}

#[test]
fn transposed_conv_is_adjoint_of_strided_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for (k, s) in [(4, 2), (2, 2), (3, 1), (5, 1)] {
        for time in 1..=8 {
            let tconv = TransposedConv1d::new(3, 5, k, s, &mut rng).unwrap();
            // the same weight array read as (out=3, in=5, k) for the forward conv
            let mut conv = Conv1d::new(5, 3, k, s, tconv.padding, &mut rng).unwrap();
            conv.weight.value = tconv.weight.value.clone();
            let x = random_tensor(&mut rng, 2, 3, time);
            let y = random_tensor(&mut rng, 2, 5, s * time);
            let lhs = transposed_conv1d(&x, &tconv).unwrap().dot(&y).unwrap();
            let rhs = x.dot(&conv1d(&y, &conv).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10, "k={k} s={s} T={time}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn conv1d_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for &(b, cin, cout, t, k) in &[(2, 3, 4, 7, 3), (1, 2, 2, 5, 5), (3, 4, 1, 6, 1)] {
        let layer = Conv1d::same(cin, cout, k, &mut rng).unwrap();
        let x = random_tensor(&mut rng, b, cin, t);
        let r = random_tensor(&mut rng, b, cout, t);
        let g = conv1d_grad(&x, &layer, &r).unwrap();

        let num_dx = central_difference(x.data(), FD_STEP, |v| {
            let xx = Tensor::from_vec(b, cin, t, v.to_vec()).unwrap();
            conv1d(&xx, &layer).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(g.dx.data(), &num_dx, 1e-6) < GRAD_TOL);

        let num_dw = central_difference(&layer.weight.value, FD_STEP, |v| {
            let mut l = layer.clone();
            l.weight.value = v.to_vec();
            conv1d(&x, &l).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(&g.dw, &num_dw, 1e-6) < GRAD_TOL);

        let num_db = central_difference(&layer.bias.value, FD_STEP, |v| {
            let mut l = layer.clone();
            l.bias.value = v.to_vec();
            conv1d(&x, &l).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(&g.db, &num_db, 1e-6) < GRAD_TOL);
    }
}

#[test]
fn transposed_conv1d_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for &(b, cin, cout, t, k) in &[(2, 3, 4, 5, 4), (1, 2, 3, 3, 2), (2, 1, 2, 4, 6)] {
        let layer = TransposedConv1d::new(cin, cout, k, 2, &mut rng).unwrap();
        let x = random_tensor(&mut rng, b, cin, t);
        let r = random_tensor(&mut rng, b, cout, 2 * t);
        let g = transposed_conv1d_grad(&x, &layer, &r).unwrap();

        let num_dx = central_difference(x.data(), FD_STEP, |v| {
            let xx = Tensor::from_vec(b, cin, t, v.to_vec()).unwrap();
            transposed_conv1d(&xx, &layer).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(g.dx.data(), &num_dx, 1e-6) < GRAD_TOL);

        let num_dw = central_difference(&layer.weight.value, FD_STEP, |v| {
            let mut l = layer.clone();
            l.weight.value = v.to_vec();
            transposed_conv1d(&x, &l).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(&g.dw, &num_dw, 1e-6) < GRAD_TOL);

        let num_db = central_difference(&layer.bias.value, FD_STEP, |v| {
            let mut l = layer.clone();
            l.bias.value = v.to_vec();
            transposed_conv1d(&x, &l).unwrap().dot(&r).unwrap()
        });
        assert!(max_rel_error(&g.db, &num_db, 1e-6) < GRAD_TOL);
    }
}

#[test]
fn maxpool_gradient_matches_central_differences_away_from_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    // pairs separated by at least 0.1 so the step never changes a winner
    let x = Tensor::from_fn(2, 3, 8, |_, _, t| {
        let base: f64 = rng.random_range(-1.0..1.0);
        base + if t % 2 == 0 { 0.0 } else { 0.2 * rng.random_range(-1.0..1.0_f64).signum() }
    })
    .unwrap();
    let r = random_tensor(&mut rng, 2, 3, 4);
    let pooled = maxpool1d(&x).unwrap();
    let dx = maxpool1d_grad(x.dims(), &pooled.argmax, &r).unwrap();
    let num = central_difference(x.data(), FD_STEP, |v| {
        let xx = Tensor::from_vec(2, 3, 8, v.to_vec()).unwrap();
        maxpool1d(&xx).unwrap().output.dot(&r).unwrap()
    });
    assert!(max_rel_error(dx.data(), &num, 1e-6) < GRAD_TOL);
}

#[test]
fn activation_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let x = Tensor::from_fn(2, 2, 6, |_, _, _| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random::<bool>() { v } else { -v }
    })
    .unwrap();
    let r = random_tensor(&mut rng, 2, 2, 6);
    let f = |g: &dyn Fn(&Tensor) -> Tensor| {
        central_difference(x.data(), FD_STEP, |v| {
            g(&Tensor::from_vec(2, 2, 6, v.to_vec()).unwrap()).dot(&r).unwrap()
        })
    };
    let dr = relu_grad(&x, &r).unwrap();
    assert!(max_rel_error(dr.data(), &f(&relu), 1e-6) < GRAD_TOL);
    let ds = sigmoid_grad(&sigmoid(&x), &r).unwrap();
    assert!(max_rel_error(ds.data(), &f(&sigmoid), 1e-6) < GRAD_TOL);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn same_conv_preserves_time(b in 1usize..4, c in 1usize..5, t in 1usize..12, k in prop::sample::select(vec![1usize, 3, 5, 7]), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layer = Conv1d::same(c, 2, k, &mut rng).unwrap();
            let x = random_tensor(&mut rng, b, c, t);
            prop_assert_eq!(conv1d(&x, &layer).unwrap().dims(), [b, 2, t]);
        }

        #[test]
        fn pool_then_transposed_conv_restores_even_length(half in 1usize..20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&mut rng, 1, 2, 2 * half);
            let pooled = maxpool1d(&x).unwrap().output;
            let up = TransposedConv1d::new(2, 2, 4, 2, &mut rng).unwrap();
            prop_assert_eq!(transposed_conv1d(&pooled, &up).unwrap().time(), 2 * half);
        }
    }
}

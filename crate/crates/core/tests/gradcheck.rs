//! Central-difference verification of every differentiable tape operation.
//!
//! Each case replays the op on fresh tapes while one input coordinate is
//! nudged by 1e-5, and demands relative agreement better than 1e-4 between
//! the reverse-mode gradient and the numeric estimate.

mod common;

use common::{check_gradients, fold_matmul, rand_tensor, rand_tensor_off_zero, test_rng};
use sem_core::nn::{EncoderSpec, Mlp};
use sem_core::ssl::{byol_loss_tape, nce_loss_tape, NceForm};
use sem_core::tape::{BnState, Var};
use sem_core::tensor::Tensor;

#[test]
fn matmul_gradients() {
    for (seed, (r, k, c)) in [(1u64, (2, 3, 4)), (2, (1, 5, 2)), (3, (4, 4, 4)), (4, (3, 1, 6))]
        .into_iter()
    {
        let mut rng = test_rng(seed);
        let a = rand_tensor(&[r, k], &mut rng);
        let b = rand_tensor(&[k, c], &mut rng);
        check_gradients(&[a, b], &format!("matmul {r}x{k}x{c}"), |tape, xs| {
            let y = tape.matmul(xs[0], xs[1]).unwrap();
            tape.sum(y).unwrap()
        });
    }
}

#[test]
fn add_and_bias_gradients() {
    for (seed, (r, c)) in [(10u64, (2, 3)), (11, (5, 1)), (12, (3, 7))].into_iter() {
        let mut rng = test_rng(seed);
        let a = rand_tensor(&[r, c], &mut rng);
        let b = rand_tensor(&[r, c], &mut rng);
        check_gradients(&[a, b], &format!("add {r}x{c}"), |tape, xs| {
            let y = tape.add(xs[0], xs[1]).unwrap();
            fold_matmul(tape, y)
        });
        let x = rand_tensor(&[r, c], &mut rng);
        let bias = rand_tensor(&[c], &mut rng);
        check_gradients(&[x, bias], &format!("add_bias {r}x{c}"), |tape, xs| {
            let y = tape.add_bias(xs[0], xs[1]).unwrap();
            fold_matmul(tape, y)
        });
    }
}

#[test]
fn relu_gradients_away_from_the_kink() {
    for (seed, (r, c)) in [(20u64, (2, 4)), (21, (6, 3)), (22, (1, 9))].into_iter() {
        let mut rng = test_rng(seed);
        let x = rand_tensor_off_zero(&[r, c], 1e-3, &mut rng);
        check_gradients(&[x], &format!("relu {r}x{c}"), |tape, xs| {
            let y = tape.relu(xs[0]).unwrap();
            fold_matmul(tape, y)
        });
    }
}

#[test]
fn affine_and_sum_gradients() {
    for (seed, n) in [(30u64, 4), (31, 9)].into_iter() {
        let mut rng = test_rng(seed);
        let x = rand_tensor(&[2, n], &mut rng);
        check_gradients(&[x], &format!("affine n={n}"), |tape, xs| {
            let y = tape.affine(xs[0], -1.75, 0.4).unwrap();
            fold_matmul(tape, y)
        });
        let x2 = rand_tensor(&[3, n], &mut rng);
        check_gradients(&[x2], &format!("sum n={n}"), |tape, xs| tape.sum(xs[0]).unwrap());
    }
}

#[test]
fn row_and_concat_gradients() {
    for (seed, (r, c)) in [(40u64, (3, 4)), (41, (5, 2))].into_iter() {
        let mut rng = test_rng(seed);
        let x = rand_tensor(&[r, c], &mut rng);
        check_gradients(&[x], &format!("row/concat {r}x{c}"), |tape, xs| {
            let parts: Vec<Var> = (0..r)
                .map(|i| {
                    let row = tape.row(xs[0], i).unwrap();
                    let lse = tape.log_sum_exp(row).unwrap();
                    tape.affine(lse, 1.0 + i as f64, 0.0).unwrap()
                })
                .collect();
            let cat = tape.concat_scalars(&parts).unwrap();
            tape.sum(cat).unwrap()
        });
    }
}

#[test]
fn cosine_gradients() {
    for (seed, n) in [(50u64, 2), (51, 3), (52, 8), (53, 16)].into_iter() {
        let mut rng = test_rng(seed);
        let a = rand_tensor_off_zero(&[n], 0.05, &mut rng);
        let b = rand_tensor_off_zero(&[n], 0.05, &mut rng);
        check_gradients(&[a, b], &format!("cosine n={n}"), |tape, xs| {
            tape.cosine(xs[0], xs[1]).unwrap()
        });
    }
}

#[test]
fn softmax_block_gradients() {
    for (seed, (rows, l, v, tau)) in [
        (60u64, (2, 1, 4, 1.0)),
        (61, (1, 3, 2, 0.5)),
        (62, (3, 2, 5, 2.0)),
        (63, (2, 4, 3, 0.1)),
    ]
    .into_iter()
    {
        let mut rng = test_rng(seed);
        let x = rand_tensor(&[rows, l * v], &mut rng);
        check_gradients(&[x], &format!("softmax L={l} V={v} tau={tau}"), |tape, xs| {
            let y = tape.softmax_blocks(xs[0], v, tau).unwrap();
            fold_matmul(tape, y)
        });
    }
}

#[test]
fn log_sum_exp_and_cross_entropy_gradients() {
    for (seed, n) in [(70u64, 3), (71, 10)].into_iter() {
        let mut rng = test_rng(seed);
        let x = rand_tensor(&[n], &mut rng);
        check_gradients(&[x], &format!("lse n={n}"), |tape, xs| {
            tape.log_sum_exp(xs[0]).unwrap()
        });
    }
    for (seed, (b, c)) in [(72u64, (2, 3)), (73, (5, 4)), (74, (1, 6))].into_iter() {
        let mut rng = test_rng(seed);
        let logits = rand_tensor(&[b, c], &mut rng);
        let labels: Vec<usize> = (0..b).map(|i| (i * 2 + seed as usize) % c).collect();
        check_gradients(&[logits], &format!("ce {b}x{c}"), |tape, xs| {
            tape.cross_entropy_mean(xs[0], &labels).unwrap()
        });
    }
}

#[test]
fn batch_norm_gradients_in_training_mode() {
    for (seed, (b, d)) in [(80u64, (4, 3)), (81, (8, 2)), (82, (3, 5))].into_iter() {
        let mut rng = test_rng(seed);
        let x = rand_tensor(&[b, d], &mut rng);
        let gamma = rand_tensor_off_zero(&[d], 0.2, &mut rng);
        let beta = rand_tensor(&[d], &mut rng);
        check_gradients(&[x, gamma, beta], &format!("batch_norm {b}x{d}"), |tape, xs| {
            let mut state = BnState::new(d);
            let y = tape.batch_norm(xs[0], xs[1], xs[2], &mut state, true).unwrap();
            fold_matmul(tape, y)
        });
    }
}

#[test]
fn ssl_loss_gradients() {
    for (seed, (b, d)) in [(90u64, (2, 4)), (91, (3, 6))].into_iter() {
        let mut rng = test_rng(seed);
        let q = rand_tensor_off_zero(&[b, d], 0.05, &mut rng);
        let z = rand_tensor_off_zero(&[b, d], 0.05, &mut rng);
        check_gradients(&[q, z], &format!("byol_loss {b}x{d}"), |tape, xs| {
            byol_loss_tape(tape, xs[0], xs[1]).unwrap()
        });
    }
    for (seed, (b, k, d, form)) in [
        (92u64, (2, 3, 4, NceForm::Standard)),
        (93, (3, 2, 5, NceForm::Standard)),
        (94, (2, 4, 3, NceForm::NegativesOnly)),
    ]
    .into_iter()
    {
        let mut rng = test_rng(seed);
        let anchors = rand_tensor_off_zero(&[b, d], 0.05, &mut rng);
        let positives = rand_tensor_off_zero(&[b, d], 0.05, &mut rng);
        let negatives = rand_tensor_off_zero(&[k, d], 0.05, &mut rng);
        check_gradients(
            &[anchors, positives, negatives],
            &format!("nce_loss {b}x{k}x{d} {form:?}"),
            |tape, xs| nce_loss_tape(tape, xs[0], xs[1], xs[2], 0.5, form).unwrap(),
        );
    }
}

#[test]
fn encoder_forward_composes_differentiably() {
    // End-to-end through linear, batch norm, and rectifier layers: checks
    // gradients for every parameter and for the input batch.
    let spec = EncoderSpec { input_dim: 5, hidden: vec![4], repr_dim: 3, batch_norm: true };
    let mut rng = test_rng(100);
    let mlp = Mlp::encoder(&spec, &mut rng).unwrap();
    let n_params = mlp.params().len();
    let mut inputs: Vec<Tensor> = mlp.params().iter().map(|p| (*p).clone()).collect();
    inputs.push(rand_tensor(&[4, 5], &mut rng));
    check_gradients(&inputs, "encoder params + input", |tape, xs| {
        let mut m = mlp.clone();
        let (params, x) = xs.split_at(n_params);
        let y = m.forward_tape(tape, params, x[0], true).unwrap();
        fold_matmul(tape, y)
    });
}

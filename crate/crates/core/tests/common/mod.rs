#![allow(dead_code)]

use std::path::PathBuf;

use crossmpt::channel::seeded_rng;
use crossmpt::codes::read_pcm;
use crossmpt::masks::AttentionMask;
use crossmpt::tensor::{grad_check, GradCheckReport, Tape, Tensor, Var};
use crossmpt::{BitMatrix, LinearCode, RedundantRows};
use rand::Rng;

pub fn codes_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../codes")
}

pub fn load(name: &str) -> LinearCode {
    let path = codes_dir().join(format!("{name}.alist"));
    let h = read_pcm(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    LinearCode::from_pcm(name, h, RedundantRows::Keep).unwrap()
}

pub fn hamming() -> LinearCode {
    load("hamming_7_4")
}

pub fn tree() -> LinearCode {
    let h = BitMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1]]).unwrap();
    LinearCode::from_pcm("tree", h, RedundantRows::Reject).unwrap()
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = seeded_rng(seed, 7);
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Reduces `v` to a scalar through a fixed random weighting so every output
/// coordinate reaches the gradient with a distinct coefficient.
fn weighted_sum(tape: &mut Tape<f64>, v: Var) -> Var {
    let shape = tape.shape(v).to_vec();
    let w = tape.constant(random_tensor(&shape, 99));
    let prod = tape.mul(v, w).unwrap();
    tape.sum(prod)
}

pub const PRIMITIVE_TOL: f64 = 1e-4;
pub const PRIMITIVE_EPS: f64 = 1e-6;

fn check(
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
    shapes: &[&[usize]],
) -> GradCheckReport {
    let params: Vec<Tensor<f64>> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| random_tensor(s, i as u64 + 1))
        .collect();
    grad_check(f, &params, PRIMITIVE_EPS, PRIMITIVE_TOL, 64, 3)
}

fn partial_mask(rows: usize, cols: usize) -> AttentionMask {
    AttentionMask::from_fn(rows, cols, |r, c| (r + c) % 3 != 1 || c == r % cols)
}

/// Finite-difference checks of every tape primitive, by name.
pub fn primitive_checks() -> Vec<(&'static str, GradCheckReport)> {
    let mut out = Vec::new();
    out.push((
        "matmul",
        check(
            |t, v| {
                let y = t.matmul(v[0], v[1]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 4], &[4, 2]],
        ),
    ));
    out.push((
        "add",
        check(
            |t, v| {
                let y = t.add(v[0], v[1]).unwrap();
                weighted_sum(t, y)
            },
            &[&[2, 3], &[2, 3]],
        ),
    ));
    out.push((
        "mul",
        check(
            |t, v| {
                let y = t.mul(v[0], v[1]).unwrap();
                weighted_sum(t, y)
            },
            &[&[2, 3], &[2, 3]],
        ),
    ));
    out.push((
        "scale",
        check(
            |t, v| {
                let y = t.scale(v[0], -1.7);
                weighted_sum(t, y)
            },
            &[&[4]],
        ),
    ));
    out.push((
        "add_row",
        check(
            |t, v| {
                let y = t.add_row(v[0], v[1]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 4], &[4]],
        ),
    ));
    out.push((
        "linear",
        check(
            |t, v| {
                let y = t.linear(v[0], v[1], v[2]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 4], &[4, 5], &[5]],
        ),
    ));
    out.push((
        "transpose",
        check(
            |t, v| {
                let y = t.transpose(v[0]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 5]],
        ),
    ));
    out.push((
        "reshape",
        check(
            |t, v| {
                let y = t.reshape(v[0], vec![6, 2]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 4]],
        ),
    ));
    for axis in [0, 1] {
        out.push((
            if axis == 0 { "concat_rows" } else { "concat_cols" },
            check(
                move |t, v| {
                    let y = t.concat(v[0], v[1], axis).unwrap();
                    weighted_sum(t, y)
                },
                if axis == 0 { &[&[2, 3], &[4, 3]] } else { &[&[2, 3], &[2, 5]] },
            ),
        ));
    }
    out.push(("sum", check(|t, v| t.sum(v[0]), &[&[2, 5]])));
    out.push((
        "gelu",
        check(
            |t, v| {
                let y = t.gelu(v[0]);
                weighted_sum(t, y)
            },
            &[&[3, 4]],
        ),
    ));
    out.push((
        "sigmoid",
        check(
            |t, v| {
                let y = t.sigmoid(v[0]);
                weighted_sum(t, y)
            },
            &[&[3, 4]],
        ),
    ));
    out.push((
        "masked_softmax",
        check(
            |t, v| {
                let y = t.masked_softmax(v[0], &partial_mask(4, 5)).unwrap();
                weighted_sum(t, y)
            },
            &[&[4, 5]],
        ),
    ));
    out.push((
        "layer_norm",
        check(
            |t, v| {
                let y = t.layer_norm(v[0], v[1], v[2]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 6], &[6], &[6]],
        ),
    ));
    out.push((
        "bce_with_logits_sum",
        check(
            |t, v| t.bce_with_logits_sum(v[0], vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap(),
            &[&[2, 3]],
        ),
    ));
    out.push((
        "gather_scale",
        check(
            |t, v| {
                let y = t.gather_scale(v[0], vec![2, 0, 2, 1], vec![0.5, -1.0, 2.0, 1.5]).unwrap();
                weighted_sum(t, y)
            },
            &[&[3, 4]],
        ),
    ));
    out.push((
        "attention",
        check(
            |t, v| {
                // Batch of two, 3 queries over 4 keys, two heads of width 2.
                let y = t.attention(v[0], v[1], v[2], &partial_mask(3, 4), 2).unwrap();
                weighted_sum(t, y)
            },
            &[&[6, 4], &[8, 4], &[8, 4]],
        ),
    ));
    out
}

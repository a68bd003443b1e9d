use super::*;
use crate::channel::{modulate_bpsk, seeded_rng};
use crate::tensor::{grad_check, Tensor};

fn tree_h() -> BitMatrix {
    BitMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1]]).unwrap()
}

fn tiny(arch: Arch) -> (ModelConfig, ModelParams<f64>) {
    let cfg = ModelConfig::new(3, 1, 2, 2, 8, arch).with_heads(2);
    let params = ModelParams::init(&cfg, &mut seeded_rng(5, 0)).unwrap();
    (cfg, params)
}

fn word(y: &[f64]) -> ReceivedWord {
    ReceivedWord::new(y.to_vec(), &tree_h()).unwrap()
}

#[test]
fn parameter_parity_between_architectures() {
    for (n, k, layers, d) in [(31, 16, 2, 32), (49, 24, 6, 128), (121, 70, 2, 32)] {
        let a = ModelConfig::new(n, k, n - k, layers, d, Arch::CrossMpt);
        let b = a.clone().with_arch(Arch::Ecct);
        let pa = ModelParams::<f32>::init(&a, &mut seeded_rng(0, 0)).unwrap();
        let pb = ModelParams::<f32>::init(&b, &mut seeded_rng(0, 0)).unwrap();
        assert_eq!(pa.param_count(), pb.param_count());
    }
}

#[test]
fn parameter_count_closed_form() {
    let (n, k, layers, d, r) = (32usize, 16usize, 2usize, 32usize, 4usize);
    let cfg = ModelConfig::new(n, k, n - k, layers, d, Arch::CrossMpt);
    let p = ModelParams::<f32>::init(&cfg, &mut seeded_rng(0, 0)).unwrap();
    let len = 2 * n - k;
    let per_layer = 4 * d * d + 4 * d + 2 * r * d * d + r * d + d + 4 * d;
    let expected = len * d + layers * per_layer + 2 * d + (d + 1) + (len * n + n);
    assert_eq!(p.param_count().total(), expected);
    let named: usize = p.named().iter().map(|(_, t)| t.numel()).sum();
    assert_eq!(named, expected);

    let doubled = ModelConfig::new(n, k, n - k, 2 * layers, d, Arch::CrossMpt);
    let p2 = ModelParams::<f32>::init(&doubled, &mut seeded_rng(0, 0)).unwrap();
    assert_eq!(p2.param_count().total() - expected, layers * per_layer);
}

#[test]
fn init_is_seeded_and_finite() {
    let (cfg, a) = tiny(Arch::CrossMpt);
    let b = ModelParams::<f64>::init(&cfg, &mut seeded_rng(5, 0)).unwrap();
    let c = ModelParams::<f64>::init(&cfg, &mut seeded_rng(6, 0)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.is_finite());
}

#[test]
fn logits_have_code_length_and_are_reproducible() {
    for arch in [Arch::CrossMpt, Arch::Ecct] {
        let (cfg, params) = tiny(arch);
        let dec = NeuralDecoder::new(cfg, params, tree_h()).unwrap();
        let w = word(&[0.8, -0.3, 1.1]);
        let a = dec.logits(std::slice::from_ref(&w)).unwrap();
        let b = dec.logits(std::slice::from_ref(&w)).unwrap();
        assert_eq!(a[0].len(), 3);
        assert!(a[0].iter().all(|v| v.is_finite()));
        assert_eq!(a, b);
    }
}

#[test]
fn batching_does_not_change_logits() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let dec = NeuralDecoder::new(cfg, params, tree_h()).unwrap();
    let words = [word(&[0.8, -0.3, 1.1]), word(&[-0.2, 0.5, 0.9]), word(&[1.0, 1.0, -1.0])];
    let joint = dec.logits(&words).unwrap();
    for (w, row) in words.iter().zip(&joint) {
        let single = dec.logits(std::slice::from_ref(w)).unwrap();
        for (a, b) in single[0].iter().zip(row) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn logits_depend_only_on_magnitude_and_syndrome() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let dec = NeuralDecoder::new(cfg, params, tree_h()).unwrap();
    let y = [0.8, -0.3, 1.1];
    // Flipping every sign of a codeword pattern (here all three bits, the
    // codeword 111) keeps the syndrome.
    let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
    let a = dec.logits(&[word(&y)]).unwrap();
    let b = dec.logits(&[word(&flipped)]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedding_scales_linearly() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let input = |scale: f64| ModelInput {
        batch: 1,
        magnitude: vec![0.0, 0.5 * scale, 1.5 * scale],
        synd: vec![1, 0],
    };
    let run = |inp: &ModelInput| {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape, false);
        let (m, s) = embed(&mut tape, &vars, &cfg, inp).unwrap();
        (tape.value(m).to_vec(), tape.value(s).to_vec())
    };
    let (m1, s1) = run(&input(1.0));
    let (m2, s2) = run(&input(2.0));
    let d = cfg.embed_dim;
    assert!(m1[..d].iter().all(|&v| v == 0.0));
    for (a, b) in m1.iter().zip(&m2) {
        assert_eq!(2.0 * a, *b);
    }
    assert_eq!(s1, s2);
    // Unsatisfied check 0 embeds to minus its positional row.
    for j in 0..d {
        assert_eq!(s1[j], -params.pos_embed.data[3 * d + j]);
        assert_eq!(s1[d + j], params.pos_embed.data[4 * d + j]);
    }
}

#[test]
fn shared_query_weights_affect_both_blocks() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let masks = ModelMasks::build(&tree_h(), Arch::CrossMpt);
    let input = ModelInput::from_received([&word(&[0.8, -0.3, 1.1])]);
    let outputs = |p: &ModelParams<f64>| {
        let mut tape = Tape::new();
        let vars = p.register(&mut tape, false);
        let trace = forward(&mut tape, &vars, &cfg, &masks, &input).unwrap();
        let l0 = &trace.attention[0];
        (tape.value(l0[0]).to_vec(), tape.value(l0[1]).to_vec())
    };
    let (a1, a2) = outputs(&params);
    let mut bumped = params.clone();
    for (i, v) in bumped.layers[0].w_q.data.iter_mut().enumerate() {
        *v += 0.05 * (i % 7) as f64;
    }
    let (b1, b2) = outputs(&bumped);
    assert_ne!(a1, b1);
    assert_ne!(a2, b2);
}

#[test]
fn attention_shapes_and_mask_zeros() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let h = tree_h();
    let dec = NeuralDecoder::new(cfg, params, h.clone()).unwrap();
    let maps = dec
        .attention_scores(&word(&[0.8, -0.3, 1.1]), Aggregate::PerLayer, Reduce::None)
        .unwrap();
    assert_eq!(maps.len(), 4);
    for m in &maps {
        let (rows, cols) = if m.map == "m2s" { (3, 2) } else { (2, 3) };
        assert_eq!((m.rows, m.cols), (rows, cols));
        for r in 0..rows {
            let row = &m.values[r * cols..(r + 1) * cols];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for c in 0..cols {
                let open = if m.map == "m2s" { h.get(c, r) } else { h.get(r, c) };
                if !open {
                    assert_eq!(row[c], 0.0);
                }
            }
        }
    }
    let sums = dec
        .attention_scores(&word(&[0.8, -0.3, 1.1]), Aggregate::MeanOverLayers, Reduce::ColumnSum)
        .unwrap();
    assert_eq!(sums.len(), 2);
    for m in &sums {
        assert_eq!(m.values.len(), m.cols);
        assert!((m.values.iter().sum::<f64>() - m.rows as f64).abs() < 1e-9);
    }
}

#[test]
fn ecct_attention_map_is_square() {
    let (cfg, params) = tiny(Arch::Ecct);
    let dec = NeuralDecoder::new(cfg, params, tree_h()).unwrap();
    let maps = dec
        .attention_scores(&word(&[0.8, -0.3, 1.1]), Aggregate::PerLayer, Reduce::None)
        .unwrap();
    assert_eq!(maps.len(), 2);
    assert!(maps.iter().all(|m| m.rows == 5 && m.cols == 5 && m.map == "self"));
}

#[test]
fn decision_rule() {
    let h = tree_h();
    let w = word(&[0.8, -0.3, 1.1]);
    let none = decode_from_logits(&w, &[-1.0, -2.0, -0.1], &h).unwrap();
    assert_eq!(none.bits, w.hard);
    let one = decode_from_logits(&w, &[-1.0, 0.5, -0.1], &h).unwrap();
    assert_eq!(one.bits.bits(), &[0, 0, 0]);
    assert!(one.converged);
    // Equivalent form: bin(sign(y · ẑ_s)).
    let y = [0.4, -1.2, 0.7];
    let logits = [0.3, -0.2, 2.0];
    let w = word(&y);
    let xor_form = decode_from_logits(&w, &logits, &h).unwrap().bits;
    let sign_form: Vec<u8> = y
        .iter()
        .zip(&logits)
        .map(|(v, l)| {
            let z = if *l > 0.0 { -1.0 } else { 1.0 };
            u8::from(v * z < 0.0)
        })
        .collect();
    assert_eq!(xor_form.bits(), &sign_form[..]);
}

#[test]
fn decoder_rejects_wrong_pcm() {
    let (cfg, params) = tiny(Arch::CrossMpt);
    let h = BitMatrix::from_rows(&[[1u8, 1, 1]]).unwrap();
    assert!(matches!(NeuralDecoder::new(cfg, params, h), Err(ModelError::Config(_))));
}

#[test]
fn full_graph_gradient_check() {
    let h = tree_h();
    let cfg = ModelConfig::new(3, 1, 2, 1, 4, Arch::CrossMpt).with_heads(2);
    let params = ModelParams::<f64>::init(&cfg, &mut seeded_rng(2, 0)).unwrap();
    let masks = ModelMasks::build(&h, Arch::CrossMpt);
    let words = [word(&[0.7, -0.4, 1.3]), word(&[-0.9, 0.2, 0.6])];
    let input = ModelInput::from_received(words.iter());
    let targets = [0u8, 1, 0, 1, 0, 0];
    let tensors: Vec<Tensor<f64>> = params.named().into_iter().map(|(_, t)| t.clone()).collect();
    let layers = cfg.num_layers;
    let report = grad_check(
        |tape, vars| {
            let pv = ParamVars::from_vars(vars, layers);
            let trace = forward(tape, &pv, &cfg, &masks, &input).unwrap();
            bce_loss(tape, trace.logits, &targets, 2).unwrap()
        },
        &tensors,
        1e-5,
        1e-3,
        32,
        0,
    );
    assert!(report.passed(), "{report:#?}");
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = ModelConfig::new(3, 1, 2, 2, 8, Arch::Ecct).with_heads(4);
    let params = ModelParams::<f32>::init(&cfg, &mut seeded_rng(1, 1)).unwrap();
    let ckpt = Checkpoint {
        config: cfg.clone(),
        params,
        optimizer: None,
    };
    let bytes = ckpt.to_bytes();
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.to_bytes(), bytes);

    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated(_))));
    let mut bad = bytes.clone();
    bad[0] = b'Y';
    assert_eq!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic));
    let other = cfg.clone().with_arch(Arch::CrossMpt);
    assert!(matches!(back.expect_config(&other), Err(CheckpointError::ConfigMismatch { .. })));
}

#[test]
fn bpsk_codeword_gets_zero_syndrome_input() {
    let w = ReceivedWord::new(modulate_bpsk(&[1, 1, 1]), &tree_h()).unwrap();
    let input = ModelInput::from_received([&w]);
    assert_eq!(input.synd, vec![0, 0]);
    assert_eq!(input.magnitude, vec![1.0; 3]);
}

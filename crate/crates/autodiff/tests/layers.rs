use approx::assert_relative_eq;
use autodiff::nn::{bigru, gru_cell, ConvBank, GruParams};
use autodiff::{gradient_check, Adam, AdamConfig, GradCheckOptions, ParamSet, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn randomize_biases(params: &mut ParamSet, rng: &mut ChaCha8Rng) {
    for p in params.iter_mut() {
        if p.value.shape().len() == 1 {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    }
}

#[test]
fn gru_cell_with_zero_params_gives_zero_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ParamSet::new();
    let p = GruParams::register(&mut params, "g", 3, 4, &mut rng).unwrap();
    for q in params.iter_mut() {
        q.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, &params);
    let x = tape.constant(Tensor::new(vec![1, 3], vec![1.0, -2.0, 0.5]).unwrap());
    let h0 = tape.constant(Tensor::zeros(&[1, 4]));
    let h = gru_cell(&mut tape, x, h0, &vars).unwrap();
    assert_eq!(tape.value(h).data(), &[0.0; 4]);
}

#[test]
fn gru_cell_scalar_case_matches_hand_evaluation() {
    // H = 1, input = 1. Expected value from a 50-digit evaluation of
    // z=σ(wz x+uz h+bz), r=σ(wr x+ur h+br), c=tanh(wh x+uh(r h)+bh), h'=(1-z)h+zc.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ParamSet::new();
    let p = GruParams::register(&mut params, "g", 1, 1, &mut rng).unwrap();
    let set = |params: &mut ParamSet, id, v: f64| params.get_mut(id).value.data_mut()[0] = v;
    set(&mut params, p.w_z, 0.5);
    set(&mut params, p.w_r, -0.4);
    set(&mut params, p.w_h, 0.9);
    set(&mut params, p.u_z, 0.2);
    set(&mut params, p.u_r, 0.3);
    set(&mut params, p.u_h, -0.6);
    set(&mut params, p.b_z, 0.1);
    set(&mut params, p.b_r, -0.2);
    set(&mut params, p.b_h, 0.05);
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, &params);
    let x = tape.constant(Tensor::new(vec![1, 1], vec![0.7]).unwrap());
    let h0 = tape.constant(Tensor::new(vec![1, 1], vec![-0.3]).unwrap());
    let h = gru_cell(&mut tape, x, h0, &vars).unwrap();
    assert_relative_eq!(tape.value(h).item(), 0.255_836_921_681_858_2, epsilon = 1e-14);
}

#[test]
fn gru_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ParamSet::new();
    let p = GruParams::register(&mut params, "g", 3, 4, &mut rng).unwrap();
    randomize_biases(&mut params, &mut rng);
    let xs: Vec<Tensor> = (0..3).map(|_| random(&[2, 3], &mut rng, 1.0)).collect();
    let report = gradient_check(
        &mut params,
        |ps, tape| {
            let vars = p.bind(tape, ps);
            let mut h = tape.constant(Tensor::zeros(&[2, 4]));
            for x in &xs {
                let xv = tape.constant(x.clone());
                h = gru_cell(tape, xv, h, &vars)?;
            }
            tape.mse(h, &[0.1, -0.2, 0.3, 0.0, 0.5, 0.4, -0.1, 0.2])
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert_eq!(report.checked, params.num_scalars());
}

#[test]
fn bigru_single_step_is_concat_of_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut params = ParamSet::new();
    let f = GruParams::register(&mut params, "f", 3, 2, &mut rng).unwrap();
    let b = GruParams::register(&mut params, "b", 3, 2, &mut rng).unwrap();
    randomize_biases(&mut params, &mut rng);
    let x = random(&[1, 3], &mut rng, 1.0);
    let mut tape = Tape::new();
    let (fv, bv) = (f.bind(&mut tape, &params), b.bind(&mut tape, &params));
    let xv = tape.constant(x);
    let out = bigru(&mut tape, &[xv], &[1], &fv, &bv).unwrap();
    let h0 = tape.constant(Tensor::zeros(&[1, 2]));
    let hf = gru_cell(&mut tape, xv, h0, &fv).unwrap();
    let hb = gru_cell(&mut tape, xv, h0, &bv).unwrap();
    let mut want = tape.value(hf).data().to_vec();
    want.extend_from_slice(tape.value(hb).data());
    assert_eq!(tape.value(out[0]).data(), want.as_slice());
}

#[test]
fn bigru_zero_params_give_zero_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut params = ParamSet::new();
    let f = GruParams::register(&mut params, "f", 3, 2, &mut rng).unwrap();
    let b = GruParams::register(&mut params, "b", 3, 2, &mut rng).unwrap();
    params.iter_mut().for_each(|p| p.value.data_mut().iter_mut().for_each(|v| *v = 0.0));
    let mut tape = Tape::new();
    let (fv, bv) = (f.bind(&mut tape, &params), b.bind(&mut tape, &params));
    let seq: Vec<_> = (0..4).map(|_| tape.constant(random(&[2, 3], &mut rng, 1.0))).collect();
    let out = bigru(&mut tape, &seq, &[4, 2], &fv, &bv).unwrap();
    for o in out {
        assert!(tape.value(o).data().iter().all(|&v| v == 0.0));
    }
}

fn encoder_output(params: &ParamSet, f: &GruParams, b: &GruParams, bank: &ConvBank, rows: &[Tensor], len: usize) -> Vec<f64> {
    let mut tape = Tape::new();
    let (fv, bv) = (f.bind(&mut tape, params), b.bind(&mut tape, params));
    let seq: Vec<_> = rows.iter().map(|r| tape.constant(r.clone())).collect();
    let hs = bigru(&mut tape, &seq, &[len], &fv, &bv).unwrap();
    let stacked = tape.stack(&hs, 1).unwrap();
    let pooled = bank.forward(&mut tape, params, stacked, &[len]).unwrap();
    tape.value(pooled).data().to_vec()
}

#[test]
fn padding_does_not_change_pooled_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut params = ParamSet::new();
    let f = GruParams::register(&mut params, "f", 3, 4, &mut rng).unwrap();
    let b = GruParams::register(&mut params, "b", 3, 4, &mut rng).unwrap();
    let bank = ConvBank::register(&mut params, "conv", 8, &[2, 3], 5, &mut rng).unwrap();
    randomize_biases(&mut params, &mut rng);
    let real: Vec<Tensor> = (0..4).map(|_| random(&[1, 3], &mut rng, 1.0)).collect();
    let unpadded = encoder_output(&params, &f, &b, &bank, &real, 4);
    let mut padded = real.clone();
    padded.extend((0..6).map(|_| random(&[1, 3], &mut rng, 1.0)));
    let with_junk = encoder_output(&params, &f, &b, &bank, &padded, 4);
    assert_eq!(unpadded, with_junk);
}

#[test]
fn conv_maxpool_matches_brute_force() {
    // T = 4, D = 1, one width-2 filter.
    let xs = [0.5, -1.0, 2.0, 0.25];
    let (w0, w1, bias) = (0.8, -0.3, 0.1);
    let mut tape = Tape::new();
    let seq = tape.constant(Tensor::new(vec![1, 4, 1], xs.to_vec()).unwrap());
    let w = tape.leaf(Tensor::new(vec![2, 1], vec![w0, w1]).unwrap());
    let b = tape.leaf(Tensor::vector(vec![bias]));
    let out = tape.conv1d_maxpool(seq, w, b, 2, &[4]).unwrap();

    let dots: Vec<f64> = (0..3).map(|t| xs[t] * w0 + xs[t + 1] * w1 + bias).collect();
    assert_eq!(dots.len(), 3);
    let best = dots.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    assert_relative_eq!(tape.value(out).item(), best, epsilon = 1e-15);

    // Pooled over the first 3 steps only when the length is 3.
    let short = tape.conv1d_maxpool(seq, w, b, 2, &[3]).unwrap();
    let best3 = dots[..2].iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    assert_relative_eq!(tape.value(short).item(), best3, epsilon = 1e-15);

    // Gradient routes entirely to the argmax window.
    let l = tape.sum(out);
    let g = tape.backward(l).unwrap();
    let arg = (0..3).max_by(|&a, &b| dots[a].partial_cmp(&dots[b]).unwrap()).unwrap();
    assert_eq!(g.get(w).unwrap(), &[xs[arg], xs[arg + 1]]);
}

#[test]
fn conv_position_count_and_zero_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(autodiff::pool_positions(50, 2), 49);
    assert_eq!(autodiff::pool_positions(3, 6), 1);
    let mut params = ParamSet::new();
    let bank = ConvBank::register(&mut params, "c", 4, &[2, 3, 4, 5, 6], 3, &mut rng).unwrap();
    let mut tape = Tape::new();
    let seq = tape.constant(Tensor::zeros(&[2, 50, 4]));
    let out = bank.forward(&mut tape, &params, seq, &[50, 7]).unwrap();
    assert_eq!(tape.shape(out), &[2, 15]);
    assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
}

#[test]
fn maxpool_ties_break_to_lowest_position() {
    let mut tape = Tape::new();
    let seq = tape.leaf(Tensor::new(vec![1, 3, 1], vec![1.0, 1.0, 1.0]).unwrap());
    let w = tape.constant(Tensor::new(vec![1, 1], vec![1.0]).unwrap());
    let b = tape.constant(Tensor::vector(vec![0.0]));
    let out = tape.conv1d_maxpool(seq, w, b, 1, &[3]).unwrap();
    let l = tape.sum(out);
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(seq).unwrap(), &[1.0, 0.0, 0.0]);
}

#[test]
fn short_sequence_pools_over_padded_window() {
    let mut tape = Tape::new();
    let seq = tape.constant(Tensor::new(vec![1, 4, 1], vec![2.0, 0.0, 0.0, 0.0]).unwrap());
    let w = tape.constant(Tensor::new(vec![3, 1], vec![1.0, 1.0, 1.0]).unwrap());
    let b = tape.constant(Tensor::vector(vec![0.5]));
    let out = tape.conv1d_maxpool(seq, w, b, 3, &[1]).unwrap();
    assert_eq!(tape.value(out).item(), 2.5);
}

#[test]
fn tiny_encoder_gradients_match_finite_differences() {
    // T = 5, D = 8, H = 4, two filters for each of widths {2, 3}.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut params = ParamSet::new();
    let f = GruParams::register(&mut params, "f", 8, 4, &mut rng).unwrap();
    let b = GruParams::register(&mut params, "b", 8, 4, &mut rng).unwrap();
    let bank = ConvBank::register(&mut params, "conv", 8, &[2, 3], 2, &mut rng).unwrap();
    let head_w = params.add("head.w", random(&[4, 3], &mut rng, 0.5)).unwrap();
    let head_b = params.add("head.b", random(&[3], &mut rng, 0.5)).unwrap();
    randomize_biases(&mut params, &mut rng);
    let seq_rows: Vec<Tensor> = (0..5).map(|_| random(&[2, 8], &mut rng, 1.0)).collect();
    let lengths = [5, 3];
    let report = gradient_check(
        &mut params,
        |ps, tape| {
            let (fv, bv) = (f.bind(tape, ps), b.bind(tape, ps));
            let seq: Vec<_> = seq_rows.iter().map(|r| tape.constant(r.clone())).collect();
            let hs = bigru(tape, &seq, &lengths, &fv, &bv)?;
            let stacked = tape.stack(&hs, 1)?;
            let pooled = bank.forward(tape, ps, stacked, &lengths)?;
            let (hw, hb) = (tape.param(ps, head_w), tape.param(ps, head_b));
            let logits = tape.affine(pooled, hw, hb)?;
            tape.softmax_cross_entropy(logits, &[2, 0])
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert!(report.checked > params.num_scalars() / 2, "{report:?}");
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let mut params = ParamSet::new();
    let w = params.add("w", Tensor::vector(vec![0.3, -0.2])).unwrap();
    let mut opt = Adam::new(AdamConfig::default(), &params);
    opt.step(&mut params).unwrap();
    assert_eq!(params.value(w).data(), &[0.3, -0.2]);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut params = ParamSet::new();
    let w = params.add("w", Tensor::scalar(1.0)).unwrap();
    params.get_mut(w).grad = vec![1.0];
    let mut opt = Adam::new(AdamConfig::default(), &params);
    opt.step(&mut params).unwrap();
    // m̂ = 1, v̂ = 1, Δ = -lr / (1 + ε)
    assert_relative_eq!(params.value(w).item(), 1.0 - 1e-3 / (1.0 + 1e-8), epsilon = 1e-15);
    assert_relative_eq!(params.value(w).item() - 1.0, -1e-3, epsilon = 1e-10);
}

#[test]
fn adam_two_steps_match_scalar_reference() {
    let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
    let grads = [0.5, -1.25];
    // Independent scalar re-derivation.
    let (mut theta, mut m, mut v) = (0.2f64, 0.0f64, 0.0f64);
    for (t, g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        theta -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
    }

    let mut params = ParamSet::new();
    let w = params.add("w", Tensor::scalar(0.2)).unwrap();
    let mut opt = Adam::new(AdamConfig::default(), &params);
    for g in grads {
        params.get_mut(w).grad = vec![g];
        opt.step(&mut params).unwrap();
    }
    assert!((params.value(w).item() - theta).abs() < 1e-12);
    assert_eq!(opt.steps_taken(), 2);
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let mut params = ParamSet::new();
    let w = params.add("layer.w", Tensor::scalar(1.0)).unwrap();
    params.get_mut(w).grad = vec![f64::NAN];
    let mut opt = Adam::new(AdamConfig::default(), &params);
    let err = opt.step(&mut params).unwrap_err();
    assert!(err.to_string().contains("layer.w"));
    assert_eq!(params.value(w).item(), 1.0);
}

#[test]
fn gru_params_report_inconsistent_hidden_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ParamSet::new();
    let p = GruParams::register(&mut params, "g", 3, 4, &mut rng).unwrap();
    params.get_mut(p.u_r).value = Tensor::zeros(&[3, 3]);
    assert!(p.validate(&params).is_err());
}

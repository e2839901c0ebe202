use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::nnblocks::{randomize_params, Builder};
use crate::tensorkernels::{grad_check, GradCheckOptions, ParamStore, Tape, Tensor};

fn inputs(h: usize, w: usize, seed: u64) -> (Tensor<f32>, Tensor<f32>) {
    (
        Tensor::random(vec![3, h, w], 0.0, 1.0, seed),
        Tensor::random(vec![4, h / 2, w / 2], 0.0, 1.0, seed + 1),
    )
}

fn max_abs_diff(a: &Tensor<f32>, b: &Tensor<f32>) -> f32 {
    assert_eq!(a.dims(), b.dims());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn small_cfg() -> ModelConfig {
    ModelConfig { base_channels: 4, blocks: crate::nnblocks::BlockConfig { rstb_window: 4, ..Default::default() }, ..ModelConfig::toy() }
}

#[test]
fn build_is_deterministic_and_toy_is_small() {
    let a = build_model(&ModelConfig::toy(), 5).unwrap();
    let b = build_model(&ModelConfig::toy(), 5).unwrap();
    let c = build_model(&ModelConfig::toy(), 6).unwrap();
    assert!(a.params.iter().zip(b.params.iter()).all(|(p, q)| p.name == q.name && p.value == q.value));
    assert!(a.params.iter().zip(c.params.iter()).any(|(p, q)| p.value != q.value));
    let n = a.param_count();
    println!("toy parameter count: {n}");
    assert!(n < 200_000, "{n}");
    println!("large parameter count: {}", build_model(&ModelConfig::large(), 0).unwrap().param_count());
}

#[test]
fn output_shapes() {
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    for (h, w) in [(16, 16), (32, 32), (64, 64), (128, 128), (24, 40)] {
        let (rgb, raw) = inputs(h, w, 1);
        let (y, r) = model.forward_tensors(&model.params, &rgb, &raw).unwrap();
        assert_eq!(y.dims(), &[3, h, w]);
        assert_eq!(r.dims(), &[4, h / 2, w / 2]);
    }
}

#[test]
fn bad_input_dims_rejected() {
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    let (rgb, _) = inputs(20, 16, 1);
    let raw = Tensor::zeros(vec![4, 10, 8]);
    assert!(model.forward_tensors(&model.params, &rgb, &raw).is_err());
    let (rgb, _) = inputs(16, 16, 1);
    assert!(model.forward_tensors(&model.params, &rgb, &Tensor::zeros(vec![4, 8, 6])).is_err());
    assert!(model.forward_tensors(&model.params, &rgb, &Tensor::zeros(vec![3, 8, 8])).is_err());
}

#[test]
fn identity_at_init_for_every_variant() {
    let (rgb, raw) = inputs(32, 32, 3);
    for v in Variant::ALL {
        let model = build_model(&ModelConfig::toy().with_variant(v), 1).unwrap();
        let (y, r) = model.forward_tensors(&model.params, &rgb, &raw).unwrap();
        // Without an sRGB input there is nothing to pass through.
        if v != Variant::B2 {
            assert!(max_abs_diff(&y, &rgb) < 1e-3, "{v}");
        }
        if v != Variant::B3 {
            assert!(max_abs_diff(&r, &raw) < 1e-3, "{v}");
        }
    }
}

#[test]
fn variants_differ_structurally() {
    let names = |v: Variant| -> BTreeSet<String> {
        build_model(&ModelConfig::toy().with_variant(v), 0).unwrap().param_names().into_iter().collect()
    };
    let layout = |v: Variant| -> Vec<(String, Vec<usize>)> {
        let m = build_model(&ModelConfig::toy().with_variant(v), 0).unwrap();
        m.params.iter().map(|p| (p.name.clone(), p.value.dims().to_vec())).collect()
    };
    let mut seen: Vec<Vec<(String, Vec<usize>)>> = Vec::new();
    for v in Variant::ALL {
        let s = layout(v);
        assert!(!seen.contains(&s), "{v} has the same parameters as an earlier variant");
        seen.push(s);
    }
    let full = names(Variant::Full);
    let b4 = names(Variant::B4);
    assert!(full.iter().any(|n| n.starts_with("rgisp.")) && !b4.iter().any(|n| n.starts_with("rgisp.")));
    assert!(!names(Variant::S2).iter().any(|n| n.starts_with("raw.scdm.skip")));
    assert!(!names(Variant::S3).iter().any(|n| n.starts_with("rgb.scdm.skip")));
    assert!(names(Variant::S6).iter().all(|n| !n.contains(".ca.")));
    assert!(names(Variant::B1).iter().all(|n| !n.starts_with("raw")));
}

#[test]
fn scdm_shapes_and_identity() {
    let cfg = ModelConfig::toy();
    for skip in [SkipKind::Gfm, SkipKind::Fsm] {
        let mut store = ParamStore::new();
        let scdm = Scdm::new(&mut Builder::new(&mut store, 2), "s", &cfg, skip, false).unwrap();
        for n in [16, 32, 64] {
            let x = Tensor::random(vec![8, n, n], -1.0, 1.0, n as u64);
            let mut tape = Tape::new();
            let v = tape.input(x.clone());
            let y = scdm.forward(&mut tape, &store, v).unwrap();
            assert!(max_abs_diff(tape.value(y), &x) < 1e-4);
        }
        let mut tape = Tape::new();
        let v = tape.input(Tensor::zeros(vec![8, 18, 16]));
        assert!(scdm.forward(&mut tape, &store, v).is_err());
    }
}

#[test]
fn scdm_gradients() {
    let cfg = small_cfg();
    for skip in [SkipKind::Gfm, SkipKind::Fsm] {
        let mut store = ParamStore::new();
        let scdm = Scdm::new(&mut Builder::new(&mut store, 2), "s", &cfg, skip, false).unwrap();
        let mut ps = store.cast::<f64>();
        randomize_params(&mut ps, 9, 0.3);
        let x = Tensor::random(vec![4, 8, 8], -1.0, 1.0, 4).cast::<f64>();
        let opts = GradCheckOptions { max_coords_per_tensor: Some(6), ..Default::default() };
        let r = grad_check::<f32, _>("scdm", &scdm, &ps, &[x], &opts).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

fn rgisp(c: usize, policy: LambdaPolicy) -> (Rgisp, ParamStore<f32>) {
    let mut store = ParamStore::new();
    let m = Rgisp::new(&mut Builder::new(&mut store, 4), "g", c, policy).unwrap();
    (m, store)
}

#[test]
fn rgisp_mixing_rows_are_distributions() {
    let (m, mut store) = rgisp(8, LambdaPolicy::FixedSqrtN);
    randomize_params(&mut store, 1, 1.0);
    let mut tape = Tape::new();
    let g = tape.input(Tensor::random(vec![8, 6, 4], -2.0, 2.0, 3));
    let mm = m.mixing_matrix(&mut tape, &store, g).unwrap();
    let mm = tape.value(mm);
    assert_eq!(mm.dims(), &[8, 8]);
    for row in mm.data().chunks(8) {
        assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        assert!(row.iter().all(|&p| p > 0.0));
    }
}

#[test]
fn rgisp_zero_projections_mix_uniformly() {
    let (m, mut store) = rgisp(4, LambdaPolicy::FixedSqrtN);
    for conv in [&m.q, &m.k] {
        for id in [Some(conv.weight), conv.bias].into_iter().flatten() {
            store.get_mut(id).value.fill(0.0);
        }
    }
    let mut tape = Tape::new();
    let g = tape.input(Tensor::random(vec![4, 4, 4], -1.0, 1.0, 8));
    let src = Tensor::random(vec![4, 4, 4], -1.0, 1.0, 9);
    let s = tape.input(src.clone());
    let mm = m.mixing_matrix(&mut tape, &store, g).unwrap();
    assert!(tape.value(mm).data().iter().all(|&p| (p - 0.25).abs() < 1e-7));
    let out = m.mix(&mut tape, &store, g, s).unwrap();
    let out = tape.value(out);
    // V is the identity projection at init, so every channel is the channel mean of the source.
    for i in 0..16 {
        let mean = (0..4).map(|c| src.data()[c * 16 + i]).sum::<f32>() / 4.0;
        for c in 0..4 {
            assert!((out.data()[c * 16 + i] - mean).abs() < 1e-6);
        }
    }
}

#[test]
fn rgisp_rejects_mismatched_branches() {
    let (m, store) = rgisp(4, LambdaPolicy::FixedSqrtN);
    let mut tape = Tape::new();
    let a = tape.input(Tensor::zeros(vec![4, 4, 4]));
    let b = tape.input(Tensor::zeros(vec![4, 4, 2]));
    assert!(m.forward(&mut tape, &store, a, b).is_err());
}

#[test]
fn rgisp_gradients() {
    for policy in [LambdaPolicy::FixedSqrtN, LambdaPolicy::Learnable] {
        let (m, store) = rgisp(4, policy);
        let mut ps = store.cast::<f64>();
        randomize_params(&mut ps, 5, 0.5);
        let a = Tensor::random(vec![4, 4, 4], -1.0, 1.0, 6).cast::<f64>();
        let b = Tensor::random(vec![4, 4, 4], -1.0, 1.0, 7).cast::<f64>();
        let r = grad_check::<f32, _>("rgisp", &m, &ps, &[a, b], &GradCheckOptions::default()).unwrap();
        assert!(r.passed, "{policy:?}: {r:?}");
    }
}

#[test]
fn full_model_gradients() {
    let cfg = small_cfg();
    let model = build_model(&cfg, 3).unwrap();
    let mut ps = model.params.cast::<f64>();
    randomize_params(&mut ps, 11, 0.3);
    let (rgb, raw) = inputs(16, 16, 12);
    let opts = GradCheckOptions { max_coords_per_tensor: Some(3), ..Default::default() };
    let r = grad_check::<f32, _>("rrid", &model.net, &ps, &[rgb.cast(), raw.cast()], &opts).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn loss_examples() {
    let (rgb, raw) = inputs(16, 16, 1);
    assert_eq!(joint_loss_value(&rgb, &rgb, &raw, &raw, 0.5).unwrap(), 0.0);
    let rgb_off = rgb.map(|v| v + 0.1);
    let l = joint_loss_value(&rgb_off, &rgb, &raw, &raw, 0.5).unwrap();
    assert!((l - 0.1).abs() < 1e-6, "{l}");
    let raw_off = raw.map(|v| v + 0.2);
    let l = joint_loss_value(&rgb, &rgb, &raw_off, &raw, 0.5).unwrap();
    assert!((l - 0.1).abs() < 1e-6, "{l}");
    assert!(joint_loss_value(&rgb, &raw, &raw, &raw, 0.5).is_err());
}

#[test]
fn loss_gradients_point_at_targets() {
    let mut tape = Tape::<f64>::new();
    let p = tape.leaf(Tensor::full(vec![2, 2], 1.0));
    let t = tape.input(Tensor::zeros(vec![2, 2]));
    let q = tape.leaf(Tensor::full(vec![1, 2], -1.0));
    let u = tape.input(Tensor::zeros(vec![1, 2]));
    let l = joint_loss(&mut tape, p, t, q, u, 0.5).unwrap();
    let g = tape.backward(l).unwrap();
    assert!(g.wrt(p).unwrap().data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    assert!(g.wrt(q).unwrap().data().iter().all(|&v| (v + 0.25).abs() < 1e-12));
}

proptest! {
    #[test]
    fn loss_exchange_symmetry(err in 0.0f64..1.0, alpha in 0.0f64..2.0, seed in 0u64..100) {
        let a = Tensor::random(vec![3, 4, 4], 0.0, 1.0, seed).cast::<f64>();
        let b = Tensor::random(vec![4, 2, 2], 0.0, 1.0, seed + 7).cast::<f64>();
        let rgb_err = joint_loss_value(&a.map(|v| v + err), &a, &b, &b, alpha).unwrap();
        let raw_err = joint_loss_value(&a, &a, &b.map(|v| v + err), &b, alpha).unwrap();
        prop_assert!((raw_err - alpha * rgb_err).abs() <= 1e-12 * (1.0 + rgb_err));
    }
}

#[test]
fn checkpoint_roundtrip() {
    let cfg = ModelConfig::toy().with_variant(Variant::R2);
    let mut model = build_model(&cfg, 9).unwrap();
    randomize_params(&mut model.params, 3, 0.1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let state = serde_json::json!({"step": 12});
    Checkpoint::from_model(&model, Some(state.clone())).save(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.header.model, cfg);
    assert_eq!(ck.header.train_state, Some(state));
    let back = ck.into_model().unwrap();
    let (rgb, raw) = inputs(16, 16, 2);
    let (y1, r1) = model.forward_tensors(&model.params, &rgb, &raw).unwrap();
    let (y2, r2) = back.forward_tensors(&back.params, &rgb, &raw).unwrap();
    assert_eq!((y1, r1), (y2, r2));
}

#[test]
fn corrupt_checkpoints_rejected() {
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    let mut bytes = Vec::new();
    Checkpoint::from_model(&model, None).write_to(&mut bytes).unwrap();
    assert!(Checkpoint::read_from(&bytes[..bytes.len() - 5]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::read_from(&bad[..]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(Checkpoint::read_from(&extra[..]).is_err());

    let mut ck = Checkpoint::read_from(&bytes[..]).unwrap();
    ck.tensors.pop();
    assert!(ck.into_model().is_err());
    let mut ck = Checkpoint::read_from(&bytes[..]).unwrap();
    ck.tensors[0].1 = Tensor::zeros(vec![1]);
    assert!(ck.into_model().is_err());
}

#[test]
fn gradient_suite_passes_and_detects_faults() {
    let reports = gradient_suite(&ModelConfig::toy(), 1e-3, None).unwrap();
    assert_eq!(reports.len(), 8);
    for r in &reports {
        assert!(r.passed, "{r:?}");
    }
    let faulty = gradient_suite(&ModelConfig::toy(), 1e-3, Some("window_attention")).unwrap();
    let failed: Vec<&str> = faulty.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    assert_eq!(failed, ["rstb", "rrid"]);
}


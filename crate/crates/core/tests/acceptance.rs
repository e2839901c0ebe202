//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives the table.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrid::architecture::{build_model, gradient_suite, Fusion, ModelConfig, RridModel, Variant};
use rrid::dataio::{
    load_dataset, pack_rggb, read_tensor_from, unpack_rggb, write_tensor_to, RawMosaic, SamplePair, Split, SrgbImage,
};
use rrid::frequency::{dct2_block, idct2_block, DctPlan};
use rrid::moiresynth::{synth_pair, synthesize_split, Mat3, SynthConfig, SynthParams};
use rrid::nnblocks::randomize_params;
use rrid::train_eval::{evaluate, evaluate_inputs, psnr, ssim, train_loop, TrainConfig, TrainOptions};
use rrid::{Tape, Tensor};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[track_caller]
fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    println!("criterion {id} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn max_abs_diff(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).fold(0.0, f64::max)
}

fn random_inputs(h: usize, w: usize, seed: u64) -> (Tensor<f32>, Tensor<f32>) {
    (Tensor::random(vec![3, h, w], 0.0, 1.0, seed), Tensor::random(vec![4, h / 2, w / 2], 0.0, 1.0, seed + 1))
}

#[test]
fn c1_dct_suite() {
    let t = Instant::now();
    let plan = DctPlan::new(8).unwrap();
    let b = plan.basis::<f64>();
    let mut ortho = 0.0f64;
    for i in 0..8 {
        for j in 0..8 {
            let dot: f64 = (0..8).map(|k| b.data()[i * 8 + k] * b.data()[j * 8 + k]).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let (mut roundtrip, mut parseval) = (0.0f64, 0.0f64);
    for seed in 0..1000 {
        let x = Tensor::random(vec![8, 8], -1.0, 1.0, seed);
        let c = dct2_block(&plan, &x).unwrap();
        let back = idct2_block(&plan, &c).unwrap();
        roundtrip = roundtrip.max(max_abs_diff(&x, &back));
        let (ex, ec) = (x.data().iter().map(|v| (v * v) as f64).sum::<f64>(), c.data().iter().map(|v| (v * v) as f64).sum::<f64>());
        parseval = parseval.max((ec - ex).abs() / ex);
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        1,
        "DCT suite",
        roundtrip < 1e-5 && parseval < 1e-4 && ortho < 1e-6 && secs < 5.0,
        format!("roundtrip {roundtrip:.2e}, parseval {parseval:.2e}, orthonormality {ortho:.2e}, {secs:.2}s"),
    );
}

#[test]
fn c2_gradient_suite() {
    let t = Instant::now();
    let reports = gradient_suite(&ModelConfig::toy(), 1e-3, None).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    let expected = ["conv2d", "channel_attention", "dcab", "gfm", "fsm", "rstb", "rgisp", "rrid"];
    let worst = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed || r.precision != "f32").map(|r| r.name.as_str()).collect();
    verdict(
        2,
        "gradient suite",
        names == expected && failed.is_empty() && secs < 300.0,
        format!("{} blocks, worst rel err {worst:.2e}, failed {failed:?}, {secs:.1}s", names.len()),
    );
}

#[test]
fn c3_identity_at_init() {
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..3 {
        let (rgb, raw) = random_inputs(32, 48, 10 * seed);
        let (y, r) = model.forward_tensors(&model.params, &rgb, &raw).unwrap();
        worst = (worst.0.max(max_abs_diff(&y, &rgb)), worst.1.max(max_abs_diff(&r, &raw)));
    }
    verdict(
        3,
        "identity at init",
        worst.0 < 1e-3 && worst.1 < 1e-3,
        format!("max |Y_rgb - I_rgb| {:.2e}, max |Y_raw - I_raw| {:.2e}", worst.0, worst.1),
    );
}

#[test]
fn c4_structural_contracts() {
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    let mut shapes_ok = true;
    for n in [16, 32, 64, 128] {
        let (rgb, raw) = random_inputs(n, n, n as u64);
        let (y, r) = model.forward_tensors(&model.params, &rgb, &raw).unwrap();
        shapes_ok &= y.dims() == [3, n, n] && r.dims() == [4, n / 2, n / 2];
    }

    let Fusion::Rgisp(rgisp) = &model.net.fusion else { panic!("full model fuses with RGISP") };
    let mut ps = model.params.clone();
    randomize_params(&mut ps, 5, 1.0);
    let mut row_err = 0.0f64;
    for n in [8, 16, 32] {
        let mut tape = Tape::new();
        let g = tape.input(Tensor::random(vec![rgisp.channels, n, n], -2.0, 2.0, n as u64));
        let m = rgisp.mixing_matrix(&mut tape, &ps, g).unwrap();
        for row in tape.value(m).data().chunks(rgisp.channels) {
            row_err = row_err.max((row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
        }
    }

    let mut pack_ok = true;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (2 * rng.random_range(1..20), 2 * rng.random_range(1..20));
        let m = RawMosaic::new(h, w, Tensor::random(vec![h * w], 0.0, 1.0, seed).into_data()).unwrap();
        let p = pack_rggb(&m);
        pack_ok &= unpack_rggb(&p) == m && pack_rggb(&unpack_rggb(&p)) == p;
    }

    let mut file_ok = true;
    for (seed, dims) in [(0u64, vec![3, 5, 7]), (1, vec![4, 8, 8]), (2, vec![17])] {
        let t = Tensor::random(dims, -1e6, 1e6, seed);
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        let back = read_tensor_from(&buf[..]).unwrap();
        file_ok &= back.dims() == t.dims() && back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    verdict(
        4,
        "structural contracts",
        shapes_ok && row_err < 1e-5 && pack_ok && file_ok,
        format!("shapes {shapes_ok}, RGISP row-sum err {row_err:.2e}, pack/unpack {pack_ok}, tensor file {file_ok}"),
    );
}

#[test]
fn c5_moire_spectral_check() {
    let t = Instant::now();
    let (h, w) = (16, 256);
    // Card varies along y only, so each row sees the bare stripe/CFA beat.
    let card = SrgbImage::new(Tensor::from_fn(vec![3, h, w], |k| {
        let y = k / w % h;
        0.5 + 0.2 * (2.0 * std::f32::consts::PI * y as f32 / 16.0).sin()
    }))
    .unwrap();
    let n = w / 2;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut hits = 0;
    let mut detail = Vec::new();
    for scale in [0.95, 0.97, 0.985, 1.02, 1.04] {
        let p = SynthParams {
            warp: Mat3([[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, 1.0]]),
            noise_read: 0.0,
            noise_shot: 0.0,
            cast_strength: 0.0,
            ..SynthParams::default()
        };
        let pair = synth_pair(&card, &p).unwrap();
        let red = pair.moire_raw.tensor().channel(0);
        let mut spectrum = vec![0.0; n];
        for row in red.chunks(n) {
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v as f64 - mean, 0.0)).collect();
            fft.process(&mut buf);
            spectrum.iter_mut().zip(&buf).for_each(|(s, c)| *s += c.norm());
        }
        let peak = (1..n / 2).max_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b])).unwrap();
        // Stripes at `scale` cycles per sensor pixel, sampled every 2 pixels
        // on the red sites, alias to `|scale - 1|·w` bins of an n-point FFT.
        let expected = (scale - 1.0).abs() * w as f64;
        if (peak as f64 - expected).abs() <= 1.0 {
            hits += 1;
        }
        detail.push(format!("{scale}: {peak} vs {expected:.2}"));
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        5,
        "moire spectral check",
        hits >= 4 && secs < 30.0,
        format!("{hits}/5 within 1 bin [{}], {secs:.1}s", detail.join(", ")),
    );
}

/// 200 train / 50 test pairs at 64×64, synthesized once per test binary.
fn toy_dataset() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::default();
        synthesize_split(dir.path(), Split::Train, 200, 64, &cfg, 7).unwrap();
        synthesize_split(dir.path(), Split::Test, 50, 64, &cfg, 8).unwrap();
        dir
    })
    .path()
}

fn load(split: Split) -> Vec<SamplePair> {
    load_dataset(toy_dataset(), split).unwrap()
}

fn toy_train_config(steps: usize, train_len: usize) -> TrainConfig {
    let batch_size = 4;
    let per_epoch = train_len.div_ceil(batch_size);
    assert_eq!(steps % per_epoch, 0);
    TrainConfig { epochs: steps / per_epoch, batch_size, lr0: 1e-3, patch_size: 64, seed: 0, ..TrainConfig::default() }
}

#[test]
fn c6_toy_end_to_end() {
    let t = Instant::now();
    let (train, test) = (load(Split::Train), load(Split::Test));
    let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
    assert!(model.param_count() < 200_000);
    let cfg = toy_train_config(2000, train.len());
    let report = train_loop(&mut model, &train, &[], &cfg, &TrainOptions::default()).unwrap();
    let before = evaluate_inputs(&test).unwrap();
    let after = evaluate(&model, &test).unwrap();
    let (dp, ds) = (after.mean_psnr - before.mean_psnr, after.mean_ssim - before.mean_ssim);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        6,
        "toy end-to-end",
        report.final_step == 2000 && dp >= 2.0 && ds >= 0.02,
        format!(
            "{} params, {} steps, PSNR {:.3} -> {:.3} dB ({dp:+.3}), SSIM {:.4} -> {:.4} ({ds:+.4}), {secs:.0}s",
            model.param_count(),
            report.final_step,
            before.mean_psnr,
            after.mean_psnr,
            before.mean_ssim,
            after.mean_ssim
        ),
    );
}

#[test]
fn c7_metric_oracles() {
    let a = Tensor::random(vec![3, 32, 32], 0.0, 0.9, 1);
    let shifted = a.map(|v| v + 0.1);
    let p = psnr(&a, &shifted, 1.0).unwrap();
    let x = SrgbImage::new(Tensor::random(vec![3, 32, 32], 0.0, 1.0, 2)).unwrap();
    let s_self = ssim(&x, &x).unwrap();
    // Constant images: sigma terms vanish and SSIM = (2·mu_a·mu_b + C1)/(mu_a² + mu_b² + C1).
    let (ma, mb, c1) = (0.7f64, 0.4f64, 1e-4f64);
    let closed = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    let ca = SrgbImage::new(Tensor::full(vec![3, 16, 16], ma as f32)).unwrap();
    let cb = SrgbImage::new(Tensor::full(vec![3, 16, 16], mb as f32)).unwrap();
    let s_const = ssim(&ca, &cb).unwrap();
    verdict(
        7,
        "metric oracles",
        (p - 20.0).abs() <= 0.01 && (s_self - 1.0).abs() <= 1e-9 && (s_const - closed).abs() <= 1e-3,
        format!("PSNR {p:.4} dB, SSIM(x,x) {s_self:.12}, constant SSIM {s_const:.5} vs {closed:.5}"),
    );
}

#[test]
fn c8_ablation_harness() {
    let t = Instant::now();
    let (train, test) = (load(Split::Train), load(Split::Test));
    let cfg = toy_train_config(500, train.len());
    let names = |m: &RridModel| -> BTreeSet<String> { m.param_names().into_iter().collect() };
    let full = build_model(&ModelConfig::toy(), 0).unwrap();
    let full_names = names(&full);
    // Each variant must drop the parameters of the module it ablates.
    let removed_prefix = [(Variant::B4, "rgisp."), (Variant::S2, "raw.scdm.skip"), (Variant::S3, "rgb.scdm.skip")];
    let mut table = vec!["variant,params,added,removed,steps,psnr,ssim".to_string()];
    let mut ok = true;
    let mut runs = vec![(Variant::Full, full)];
    for (v, _) in removed_prefix {
        runs.push((v, build_model(&ModelConfig::toy().with_variant(v), 0).unwrap()));
    }
    for (v, mut model) in runs {
        let n = names(&model);
        let added = n.difference(&full_names).count();
        let removed: Vec<&String> = full_names.difference(&n).collect();
        if let Some((_, prefix)) = removed_prefix.iter().find(|(x, _)| *x == v) {
            ok &= !removed.is_empty() && removed.iter().any(|r| r.starts_with(prefix)) && !n.iter().any(|r| r.starts_with(prefix));
        }
        let report = train_loop(&mut model, &train, &[], &cfg, &TrainOptions::default()).unwrap();
        let ev = evaluate(&model, &test).unwrap();
        ok &= report.final_step == 500 && ev.mean_psnr.is_finite();
        table.push(format!(
            "{},{},{added},{},{},{:.3},{:.4}",
            v.name(),
            model.param_count(),
            removed.len(),
            report.final_step,
            ev.mean_psnr,
            ev.mean_ssim
        ));
    }
    println!("{}", table.join("\n"));
    let secs = t.elapsed().as_secs_f64();
    verdict(8, "ablation harness", ok, format!("full + B4, S2, S3 trained 500 steps each, {secs:.0}s"));
}

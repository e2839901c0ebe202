use super::*;
use crate::architecture::{build_model, ModelConfig};
use crate::dataio::SamplePair;
use crate::moiresynth::{procedural_scene, synth_pair, SynthConfig};

fn dataset(n: usize, size: usize, seed: u64) -> Vec<SamplePair> {
    let cfg = SynthConfig::default();
    (0..n as u64)
        .map(|i| {
            let clean = procedural_scene(size, size, seed + i);
            let mut p = cfg.sample(seed * 1000 + i).unwrap();
            p.seed = seed + i;
            let mut s = synth_pair(&clean, &p).unwrap();
            s.id = format!("{i:03}");
            s
        })
        .collect()
}

fn small_train(epochs: usize, patch: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 2, patch_size: patch, seed: 3, lr0: 1e-3, ..TrainConfig::default() }
}

#[test]
fn overfits_single_sample() {
    let data = dataset(1, 32, 1);
    let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
    let cfg = TrainConfig { epochs: 10, batch_size: 1, patch_size: 32, ..TrainConfig::default() };
    let r = train_loop(&mut model, &data, &[], &cfg, &TrainOptions::default()).unwrap();
    assert_eq!(r.losses.len(), 10);
    assert!(r.losses[9] <= r.losses[0], "{:?}", r.losses);
}

#[test]
fn reproducible_across_thread_counts() {
    let data = dataset(4, 32, 2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
            train_loop(&mut model, &data, &[], &small_train(2, 16), &TrainOptions::default()).unwrap().losses
        })
    };
    let a = run(1);
    assert_eq!(a.len(), 4);
    assert_eq!(a, run(1));
    assert_eq!(a, run(3));
}

#[test]
fn empty_or_small_data_rejected() {
    let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
    let e = train_loop(&mut model, &[], &[], &small_train(1, 16), &TrainOptions::default());
    assert!(e.is_err());
    let data = dataset(1, 16, 1);
    assert!(train_loop(&mut model, &data, &[], &small_train(1, 24), &TrainOptions::default()).is_err());
}

#[test]
fn resume_continues_bit_exact() {
    let data = dataset(4, 32, 3);
    let val = dataset(2, 32, 50);
    let dir = tempfile::tempdir().unwrap();
    let opts = TrainOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() };

    let mut full = build_model(&ModelConfig::toy(), 0).unwrap();
    let straight = train_loop(&mut full, &data, &val, &small_train(2, 16), &TrainOptions::default()).unwrap();

    let mut first = build_model(&ModelConfig::toy(), 0).unwrap();
    train_loop(&mut first, &data, &val, &small_train(1, 16), &opts).unwrap();
    let mut t = Trainer::resume(dir.path().join(LAST_CHECKPOINT)).unwrap();
    assert_eq!(t.state.step, 2);
    t.state.config.epochs = 2;
    let rest = t.run(&data, &val, &opts).unwrap();
    assert_eq!(rest.final_step, 4);
    assert_eq!(rest.losses[..], straight.losses[2..]);
    for (a, b) in t.model.params.iter().zip(full.params.iter()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
    assert!(dir.path().join(BEST_CHECKPOINT).exists());

    let log = std::fs::read_to_string(dir.path().join(TRAIN_LOG)).unwrap();
    let recs: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let steps: Vec<u64> = recs.iter().filter_map(|r| r.get("step").and_then(|s| s.as_u64())).collect();
    assert_eq!(steps, vec![1, 2, 3, 4]);
    assert_eq!(recs.iter().filter(|r| r.get("psnr").is_some()).count(), 2);
}

#[test]
fn non_finite_loss_aborts_and_keeps_last_good() {
    let data = dataset(2, 16, 4);
    let dir = tempfile::tempdir().unwrap();
    let opts = TrainOptions { out_dir: Some(dir.path().to_path_buf()), nan_at_step: Some(2) };
    let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
    let cfg = TrainConfig { batch_size: 1, ..small_train(3, 16) };
    let e = train_loop(&mut model, &data, &[], &cfg, &opts).unwrap_err();
    assert!(matches!(e, crate::Error::NonFinite(_)), "{e}");
    // Epoch 0 ends after step 2, so no checkpoint was written.
    assert!(!dir.path().join(LAST_CHECKPOINT).exists());

    let opts = TrainOptions { nan_at_step: Some(3), ..opts };
    let mut model = build_model(&ModelConfig::toy(), 0).unwrap();
    assert!(train_loop(&mut model, &data, &[], &cfg, &opts).is_err());
    let t = Trainer::resume(dir.path().join(LAST_CHECKPOINT)).unwrap();
    assert_eq!(t.state.step, 2);
}

#[test]
fn identity_model_scores_the_inputs() {
    let data = dataset(3, 32, 5);
    let model = build_model(&ModelConfig::toy(), 0).unwrap();
    let rep = evaluate(&model, &data).unwrap();
    let base = evaluate_inputs(&data).unwrap();
    for (r, s) in rep.rows.iter().zip(&data) {
        let direct = psnr(s.moire_rgb.tensor(), s.clean_rgb.tensor(), 1.0).unwrap();
        assert!((r.psnr - direct).abs() < 1e-9);
    }
    assert!((rep.mean_psnr - base.mean_psnr).abs() < 1e-9);
    let mean = rep.rows.iter().map(|r| r.psnr).sum::<f64>() / 3.0;
    assert!((rep.mean_psnr - mean).abs() < 1e-9);
    assert_eq!(rep.rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["000", "001", "002"]);
    assert!(evaluate(&model, &[]).is_err());
}

#[test]
fn csv_report_format() {
    let rep = EvalReport::from_rows(vec![
        EvalRow { id: "a".into(), psnr: f64::INFINITY, ssim: 1.0 },
        EvalRow { id: "b".into(), psnr: 20.0, ssim: 0.5 },
    ])
    .unwrap();
    assert_eq!(rep.to_csv(), "id,psnr,ssim\na,inf,1\nb,20,0.5\nmean,inf,0.75\n");
}

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rrid::architecture::{build_model, Checkpoint, RridModel, Variant};
use rrid::dataio::{load_dataset, read_mosaic_png, read_rgb_png, unpack_rggb, write_mosaic_png, write_rgb_png};
use rrid::dataio::{pack_rggb, SamplePair, Split};
use rrid::moiresynth::synthesize_split;
use rrid::train_eval::{evaluate, format_metric, TrainConfig, TrainOptions, Trainer, LAST_CHECKPOINT};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{AblateArgs, EvalArgs, GradcheckArgs, InferArgs, SynthArgs, TrainArgs, TrainOverrides};

fn parse_split(s: &str) -> CliResult<Split> {
    Ok(s.parse::<Split>()?)
}

fn parse_variant(s: &str) -> CliResult<Variant> {
    Ok(s.parse::<Variant>()?)
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainConfig) -> CliResult<()> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr0 = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.patch_size {
            cfg.patch_size = v;
        }
        Ok(cfg.validate()?)
    }
}

/// Train split plus the test split as validation when present. A missing
/// dataset root is a usage error.
fn load_train_val(root: &Path) -> CliResult<(Vec<SamplePair>, Vec<SamplePair>)> {
    if !root.is_dir() {
        return Err(CliError::usage(format!("data directory {} does not exist", root.display())));
    }
    let train = load_dataset(root, Split::Train).map_err(|e| CliError::from(e).context(root.display()))?;
    let val = if root.join(Split::Test.as_str()).is_dir() {
        load_dataset(root, Split::Test).map_err(|e| CliError::from(e).context(root.display()))?
    } else {
        Vec::new()
    };
    Ok((train, val))
}

fn load_checkpoint_model(path: &Path) -> CliResult<RridModel> {
    let ck = Checkpoint::load(path).map_err(|e| CliError::from(e).context(path.display()))?;
    ck.into_model().map_err(|e| CliError::from(e).context(path.display()))
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let split = parse_split(&a.split)?;
    if a.count == 0 {
        log::warn!("--count 0: writing an empty {split} split");
    }
    let side = synthesize_split(&a.out, split, a.count, a.size, &cfg.synth, a.seed)?;
    println!("wrote {} pairs to {}", side.samples.len(), a.out.join(split.as_str()).display());
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let (train, val) = load_train_val(&a.data)?;
    let mut trainer = match &a.resume {
        Some(path) => {
            let mut t = Trainer::resume(path).map_err(|e| CliError::from(e).context(path.display()))?;
            // Only the run length may change on resume; the rest would break reproducibility.
            if let Some(e) = a.overrides.epochs {
                t.state.config.epochs = e;
            }
            t
        }
        None => {
            let mut model_cfg = cfg.model.clone();
            if let Some(v) = &a.variant {
                model_cfg = model_cfg.with_variant(parse_variant(v)?);
            }
            let mut train_cfg = cfg.train.clone();
            a.overrides.apply(&mut train_cfg)?;
            Trainer::new(build_model(&model_cfg, train_cfg.seed)?, train_cfg)?
        }
    };
    log::info!(
        "training {} ({} params) on {} pairs, {} validation",
        trainer.model.config.variant,
        trainer.model.param_count(),
        train.len(),
        val.len()
    );
    let opts = TrainOptions { out_dir: Some(a.out.clone()), nan_at_step: a.inject_nan_step };
    let report = trainer.run(&train, &val, &opts)?;
    let last = report.losses.last().map_or("n/a".to_string(), |l| format!("{l:.5}"));
    match report.best_psnr {
        Some(p) => println!("step {}: last loss {last}, best val psnr {}", report.final_step, format_metric(p)),
        None => println!("step {}: last loss {last}", report.final_step),
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let model = load_checkpoint_model(&a.checkpoint)?;
    let split = parse_split(&a.split)?;
    let data = load_dataset(&a.data, split).map_err(|e| CliError::from(e).context(a.data.display()))?;
    let report = evaluate(&model, &data)?;
    match &a.out {
        Some(path) => {
            report.write_csv(path)?;
            println!("psnr {} ssim {}", format_metric(report.mean_psnr), format_metric(report.mean_ssim));
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

pub fn infer(a: InferArgs) -> CliResult<()> {
    let model = load_checkpoint_model(&a.checkpoint)?;
    let rgb = read_rgb_png(&a.rgb)?;
    let mosaic = read_mosaic_png(&a.raw)?;
    let (h, w) = rgb.dims();
    if (mosaic.height(), mosaic.width()) != (h, w) {
        return Err(CliError::usage(format!(
            "sRGB is {h}×{w} but the RAW mosaic is {}×{}",
            mosaic.height(),
            mosaic.width()
        )));
    }
    let (out_rgb, out_raw) = model.infer(&rgb, &pack_rggb(&mosaic))?;
    write_rgb_png(&a.out, &out_rgb)?;
    if let Some(p) = &a.out_raw {
        write_mosaic_png(p, &unpack_rggb(&out_raw))?;
    }
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> CliResult<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(CliError::usage(format!("--tolerance must be positive, got {}", a.tolerance)));
    }
    let reports = rrid::architecture::gradient_suite(&cfg.model, a.tolerance, a.inject_fault.as_deref())?;
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<18} {} coords={:<4} max_rel={:.3e} max_abs={:.3e} worst={}",
            r.name, r.precision, r.checked, r.max_rel_err, r.max_abs_err, r.worst
        );
        if !r.passed {
            failed.push(r.name.as_str());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "gradient check failed at tolerance {:e} for: {}",
            a.tolerance,
            failed.join(", ")
        )))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn ablate(a: AblateArgs) -> CliResult<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let mut variants = vec![Variant::Full];
    for name in &a.variants {
        let v = parse_variant(name.trim())?;
        if !variants.contains(&v) {
            variants.push(v);
        }
    }
    let mut train_cfg = cfg.train.clone();
    a.overrides.apply(&mut train_cfg)?;
    let (train, val) = load_train_val(&a.data)?;
    let scored = if val.is_empty() { &train } else { &val };
    std::fs::create_dir_all(&a.out)?;

    let mut csv = String::from("variant,description,params,added_params,removed_params,psnr,ssim\n");
    let mut full_names = BTreeSet::new();
    for v in variants {
        let dir = a.out.join(v.name());
        let model = build_model(&cfg.model.with_variant(v), train_cfg.seed)?;
        log::info!("ablation {v}: {} params", model.param_count());
        let opts = TrainOptions { out_dir: Some(dir.clone()), nan_at_step: None };
        Trainer::new(model, train_cfg.clone())?.run(&train, &val, &opts)?;
        // Score the saved checkpoint so the row matches `rrid eval` on it.
        let model = load_checkpoint_model(&dir.join(LAST_CHECKPOINT))?;
        let report = evaluate(&model, scored)?;
        let names: BTreeSet<String> = model.param_names().into_iter().collect();
        if v == Variant::Full {
            full_names = names.clone();
        }
        let added: Vec<&str> = names.difference(&full_names).map(String::as_str).collect();
        let removed: Vec<&str> = full_names.difference(&names).map(String::as_str).collect();
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            v.name(),
            csv_field(v.description()),
            model.param_count(),
            csv_field(&added.join(";")),
            csv_field(&removed.join(";")),
            format_metric(report.mean_psnr),
            format_metric(report.mean_ssim)
        )
        .expect("writing to a String cannot fail");
        println!(
            "{:<5} params {:>8} psnr {:.3} ssim {:.4}",
            v.name(),
            model.param_count(),
            report.mean_psnr,
            report.mean_ssim
        );
    }
    let path = a.out.join("ablation.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use recast::codebook::quantize_rows;
use recast::forecaster::{forward, prepare_window};
use recast::pipeline::{evaluate, fit, naive_metrics, Checkpoint, Datasets, Metrics, TrainConfig, HISTORY_FILE};
use recast::series::{load_csv, make_windows, save_csv, synth_generate, CsvOptions, DatasetKind, SeriesFrame, SynthSpec};
use recast::verify::{run_suites, VerifyOptions, SUITES};
use serde_json::json;

use crate::args::{EvalArgs, ForecastArgs, InspectArgs, Split, SynthArgs, TrainArgs, VerifyArgs};
use crate::report::{append_jsonl, fmt_metric, table};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const CONFIG_FILE: &str = "config.txt";

fn load_frame(path: &Path) -> Result<SeriesFrame<f64>> {
    ensure!(path.is_file(), "data file {} does not exist", path.display());
    load_csv(path, &CsvOptions::default()).with_context(|| format!("loading {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint<f64>> {
    ensure!(path.is_file(), "checkpoint {} does not exist", path.display());
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn pick(data: &Datasets<f64>, split: Split) -> &SeriesFrame<f64> {
    match split {
        Split::Train => &data.train,
        Split::Valid => &data.valid,
        Split::Test => &data.test,
    }
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Valid => "valid",
        Split::Test => "test",
    }
}

fn metrics_json(m: &Metrics) -> serde_json::Value {
    json!({ "mse": m.mse, "mae": m.mae, "count": m.count })
}

fn score_split(ckpt: &Checkpoint<f64>, frame: &SeriesFrame<f64>) -> Result<(Metrics, Metrics)> {
    let cfg = &ckpt.config;
    let windows = make_windows(frame, cfg.lookback, cfg.horizon, 1);
    let model = evaluate(&ckpt.model, &ckpt.codebook, &windows)?;
    let naive = naive_metrics(&windows)?;
    Ok((model, naive))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let base = args.config.resolve(None)?;
    let horizons = if args.horizons.is_empty() { vec![base.horizon] } else { args.horizons.clone() };
    let frame = load_frame(&args.data.data)?;
    let kind: DatasetKind = args.data.kind.into();
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let metrics_path = args.out.join(METRICS_FILE);
    if metrics_path.exists() {
        fs::remove_file(&metrics_path).with_context(|| format!("replacing {}", metrics_path.display()))?;
    }

    let mut rows = Vec::new();
    for &h in &horizons {
        let cfg = args.config.resolve(Some(h))?;
        let data = Datasets::split(&frame, kind, &cfg.model_dims()?)
            .with_context(|| format!("splitting {} for H={h}", args.data.data.display()))?;
        let dir = args.out.join(format!("h{h}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(CONFIG_FILE), cfg.to_kv()).with_context(|| format!("writing config to {}", dir.display()))?;

        let result = fit(&data, &cfg, Some(&dir)).with_context(|| format!("training H={h}"))?;
        let ckpt = Checkpoint::new(&cfg, result.model, result.codebook, result.best_epoch, Some(result.best_valid_mse));
        let (test, naive) = score_split(&ckpt, &data.test)?;
        append_jsonl(
            &metrics_path,
            &json!({
                "horizon": h,
                "epochs_run": result.history.len(),
                "best_epoch": result.best_epoch,
                "valid_mse": result.best_valid_mse,
                "test": metrics_json(&test),
                "naive": metrics_json(&naive),
                "ablations": cfg.ablations.iter().map(|a| a.name()).collect::<Vec<_>>(),
                "config_hash": cfg.hash(),
            }),
        )?;
        rows.push(vec![
            h.to_string(),
            format!("{}/{}", result.best_epoch, result.history.len()),
            fmt_metric(result.best_valid_mse),
            fmt_metric(test.mse),
            fmt_metric(test.mae),
            fmt_metric(naive.mse),
            fmt_metric(naive.mae),
        ]);
    }
    print!(
        "{}",
        table(&["H", "best/run", "valid_mse", "test_mse", "test_mae", "naive_mse", "naive_mae"], &rows)
    );
    println!("checkpoints and {HISTORY_FILE} under {}", args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let mut ckpts = Vec::new();
    for path in &args.checkpoints {
        let ckpt = load_checkpoint(path)?;
        check_flags_agree(&ckpt.config, args, path)?;
        ckpts.push((path, ckpt));
    }
    if !args.horizons.is_empty() {
        for &h in &args.horizons {
            if !ckpts.iter().any(|(_, c)| c.config.horizon == h) {
                let trained: Vec<String> = ckpts.iter().map(|(_, c)| c.config.horizon.to_string()).collect();
                bail!("no checkpoint was trained for H={h} (available: {})", trained.join(", "));
            }
        }
        ckpts.retain(|(_, c)| args.horizons.contains(&c.config.horizon));
    }

    let frame = load_frame(&args.data.data)?;
    let kind: DatasetKind = args.data.kind.into();
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let mut rows = Vec::new();
    for (path, ckpt) in &ckpts {
        let data = Datasets::split(&frame, kind, &ckpt.config.model_dims()?)?;
        let (m, naive) = score_split(ckpt, pick(&data, args.split))?;
        if let Some(out) = &args.out {
            append_jsonl(
                &out.join(EVAL_FILE),
                &json!({
                    "checkpoint": path.display().to_string(),
                    "horizon": ckpt.config.horizon,
                    "split": split_name(args.split),
                    "metrics": metrics_json(&m),
                    "naive": metrics_json(&naive),
                }),
            )?;
        }
        rows.push(vec![
            ckpt.config.horizon.to_string(),
            split_name(args.split).to_string(),
            fmt_metric(m.mse),
            fmt_metric(m.mae),
            fmt_metric(naive.mse),
            fmt_metric(naive.mae),
            path.display().to_string(),
        ]);
    }
    print!("{}", table(&["H", "split", "mse", "mae", "naive_mse", "naive_mae", "checkpoint"], &rows));
    Ok(())
}

/// Hyperparameter flags passed to `eval` must describe the checkpoint being scored.
fn check_flags_agree(config: &TrainConfig, args: &EvalArgs, path: &Path) -> Result<()> {
    for (key, value) in args.config.explicit(None) {
        let mut probe = config.clone();
        probe.set(&key, &value)?;
        if probe.hash() != config.hash() {
            bail!("{key}={value} disagrees with the configuration stored in {}", path.display());
        }
    }
    if let Some(file) = &args.config.config {
        let text = fs::read_to_string(file).with_context(|| format!("reading config {}", file.display()))?;
        let mut probe = config.clone();
        probe.apply_kv_text(&text)?;
        if probe.hash() != config.hash() {
            bail!("{} disagrees with the configuration stored in {}", file.display(), path.display());
        }
    }
    Ok(())
}

pub fn forecast(args: &ForecastArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let frame = load_frame(&args.data)?;
    let lookback = ckpt.config.lookback;
    ensure!(
        frame.len() >= lookback,
        "{} has {} steps but the model needs a lookback of {lookback}",
        args.data.display(),
        frame.len()
    );
    let window = frame.slice(frame.len() - lookback..frame.len());
    let out = forward(&ckpt.model, &ckpt.codebook, window.values.view())?;
    let prediction = SeriesFrame::new(out.y_hat, frame.channel_names.clone())?;
    match &args.out {
        Some(path) => {
            save_csv(&prediction, path).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} steps × {} channels to {}", prediction.len(), prediction.channels(), path.display());
        }
        None => print!("{}", csv_text(&prediction)),
    }
    Ok(())
}

fn csv_text(frame: &SeriesFrame<f64>) -> String {
    let mut s = frame.channel_names.join(",");
    s.push('\n');
    for col in frame.values.columns() {
        let cells: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn inspect_codebook(args: &InspectArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cb = &ckpt.codebook;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut text = String::from("codeword");
    for j in 0..cb.dim() {
        write!(text, ",v{j}")?;
    }
    text.push('\n');
    for (k, row) in cb.codewords.outer_iter().enumerate() {
        write!(text, "{k}")?;
        for v in row {
            write!(text, ",{v:?}")?;
        }
        text.push('\n');
    }
    let book_path = args.out.join("codebook.csv");
    fs::write(&book_path, text).with_context(|| format!("writing {}", book_path.display()))?;

    let counts = match &args.data {
        Some(path) => {
            let frame = load_frame(path)?;
            let dims = ckpt.config.model_dims()?;
            let data = Datasets::split(&frame, args.kind.into(), &dims)?;
            Some(codeword_usage(&ckpt, pick(&data, args.split))?)
        }
        None => None,
    };

    let mut rows = Vec::new();
    let total: usize = counts.as_ref().map_or(0, |c| c.iter().sum());
    let mut usage = String::from("codeword,count,share\n");
    for (k, row) in cb.codewords.outer_iter().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut cells = vec![k.to_string(), format!("{norm:.4}")];
        if let Some(c) = &counts {
            let share = c[k] as f64 / total.max(1) as f64;
            writeln!(usage, "{k},{},{share:?}", c[k])?;
            cells.push(c[k].to_string());
            cells.push(format!("{share:.3}"));
        }
        rows.push(cells);
    }
    let header: &[&str] = if counts.is_some() { &["codeword", "norm", "count", "share"] } else { &["codeword", "norm"] };
    print!("{}", table(header, &rows));
    println!("codebook epoch {}, {} codewords of dim {}", cb.epoch, cb.k(), cb.dim());
    if counts.is_some() {
        let usage_path = args.out.join("usage.csv");
        fs::write(&usage_path, usage).with_context(|| format!("writing {}", usage_path.display()))?;
        println!("{total} patches assigned");
    }
    Ok(())
}

/// Nearest-codeword counts over non-overlapping lookback windows of `frame`.
fn codeword_usage(ckpt: &Checkpoint<f64>, frame: &SeriesFrame<f64>) -> Result<Vec<usize>> {
    let dims = &ckpt.model.dims;
    let mut counts = vec![0usize; ckpt.codebook.k()];
    let mut start = 0;
    while start + dims.lookback <= frame.len() {
        let window = frame.slice(start..start + dims.lookback);
        let prepared = prepare_window(window.values.view(), dims)?;
        for k in quantize_rows(prepared.reduced.view(), ckpt.codebook.codewords.view())? {
            counts[k] += 1;
        }
        start += dims.lookback;
    }
    ensure!(start > 0, "split is shorter than one lookback window of {}", dims.lookback);
    Ok(counts)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        channels: args.channels,
        length: args.length,
        motif_count: args.motifs.unwrap_or(args.length / 50),
        noise_std: args.noise,
        ..SynthSpec::default()
    };
    let out = synth_generate::<f64>(&spec, args.seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_csv(&out.frame, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} channels × {} steps with {} motifs to {}",
        args.channels,
        args.length,
        out.placements.len(),
        args.out.display()
    );
    Ok(())
}

/// Returns whether every suite that ran passed.
pub fn verify(args: &VerifyArgs) -> Result<bool> {
    let names: Vec<&str> = if args.suites.is_empty() {
        SUITES.to_vec()
    } else {
        args.suites.iter().map(String::as_str).collect()
    };
    let opts = VerifyOptions {
        seed: args.seed,
        inject_fault: args.inject_fault,
    };
    let reports = run_suites(&names, &opts, args.all)?;
    let mut rows = Vec::new();
    for r in &reports {
        for c in &r.checks {
            rows.push(vec![
                r.suite.clone(),
                c.name.clone(),
                format!("{:.3e}", c.value),
                format!("{:.1e}", c.bound),
                if c.passed { "ok" } else { "FAIL" }.to_string(),
            ]);
        }
    }
    print!("{}", table(&["suite", "check", "value", "bound", "status"], &rows));
    for r in &reports {
        println!(
            "{:<12} {} in {:.2}s",
            r.suite,
            if r.passed() { "passed" } else { "FAILED" },
            r.elapsed.as_secs_f64()
        );
    }
    let ok = reports.iter().all(|r| r.passed());
    if reports.len() < names.len() {
        println!("stopped after the first failing suite; pass --all to run the rest");
    }
    Ok(ok)
}

//! Acceptance criteria, one line each.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed
//! in order. Exits nonzero when any asserted criterion fails. The ETT check
//! runs only when `RECAST_ETTH1_CSV` names a file and is never asserted.

use std::env;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recast::nn::Activation;
use recast::pipeline::{evaluate, fit, naive_metrics, Ablation, Datasets, Metrics, TrainConfig, HISTORY_FILE};
use recast::reliability::DEFAULT_ORACLE_RESOLUTION;
use recast::series::{load_csv, make_windows, synth_generate, CsvOptions, DatasetKind, SeriesFrame, SynthSpec};
use recast::verify::{
    clustering_violations, dro_oracle_gap, forecaster_gradient_error, roundtrip_errors, score_property_check,
    telescoping_gap,
};

const SEED: u64 = 2024;

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

impl Outcome {
    fn line(&self) -> String {
        let status = if !self.passed {
            "FAIL"
        } else if self.elapsed > self.budget {
            "SLOW"
        } else {
            "PASS"
        };
        format!(
            "[{status}] {:>2} {:<34} {}  ({:.2}s, budget {}s)",
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }

    fn ok(&self) -> bool {
        self.passed && self.elapsed <= self.budget
    }
}

fn run(
    id: &'static str,
    title: &'static str,
    budget_secs: u64,
    body: impl FnOnce() -> recast::Result<(bool, String)>,
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    let outcome = Outcome {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    };
    println!("{}", outcome.line());
    outcome
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn dro_vs_oracle() -> recast::Result<(bool, String)> {
    let mut r = rng(1);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for gamma in [0.1, 1.0, 10.0] {
        let gap = dro_oracle_gap(&mut r, 200, gamma, DEFAULT_ORACLE_RESOLUTION, false)?;
        worst = worst.max(gap);
        parts.push(format!("γ={gamma}: {gap:.1e}"));
    }
    Ok((worst <= 1e-4, format!("max |fuse − oracle| {} ≤ 1e-4", parts.join(", "))))
}

fn telescoping() -> recast::Result<(bool, String)> {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        worst = worst.max(telescoping_gap(&mut r, 10, 8, 8)?);
    }
    Ok((worst <= 1e-10, format!("max-abs deviation {worst:.2e} ≤ 1e-10 over 20 × 10 epochs")))
}

fn gradients() -> recast::Result<(bool, String)> {
    let mut r = rng(3);
    let (mut quant, mut res) = (0.0f64, 0.0f64);
    for i in 0..40 {
        let act = if i % 2 == 0 { Activation::Relu } else { Activation::Gelu };
        let (q, s) = forecaster_gradient_error(&mut r, 32, act)?;
        quant = quant.max(q);
        res = res.max(s);
    }
    Ok((
        quant <= 1e-4 && res <= 1e-4,
        format!("worst rel. error quant {quant:.1e}, residual {res:.1e} ≤ 1e-4 over 40 configs"),
    ))
}

fn clustering() -> recast::Result<(bool, String)> {
    let (rising, not_mean, energy_bad) = clustering_violations(&mut rng(4), 100)?;
    Ok((
        rising == 0 && not_mean == 0 && energy_bad == 0,
        format!("100 instances: energy rises {rising}, update ≠ cluster mean {not_mean}, energy mismatches {energy_bad}"),
    ))
}

fn roundtrips() -> recast::Result<(bool, String)> {
    let (norm_err, patch_bad, pool_bad) = roundtrip_errors(&mut rng(5), 100)?;
    Ok((
        norm_err <= 1e-6 && patch_bad == 0 && pool_bad == 0,
        format!("norm {norm_err:.1e} ≤ 1e-6, patch mismatches {patch_bad}, pooling mismatches {pool_bad}"),
    ))
}

fn scores() -> recast::Result<(bool, String)> {
    let (bound_bad, worst, compared) = score_property_check(&mut rng(6), 100)?;
    Ok((
        bound_bad == 0 && worst <= 1e-9 && compared > 0,
        format!("range violations {bound_bad}, log vs direct {worst:.1e} ≤ 1e-9 on {compared} codewords of 100 instances"),
    ))
}

fn desk_config() -> TrainConfig {
    TrainConfig {
        lookback: 96,
        horizon: 96,
        patch_len: 16,
        codebook_size: 8,
        epochs: 15,
        seed: SEED,
        ..TrainConfig::default()
    }
}

fn synth_frame(seed: u64) -> recast::Result<SeriesFrame<f64>> {
    let spec = SynthSpec {
        channels: 3,
        length: 3000,
        ..SynthSpec::default()
    };
    Ok(synth_generate::<f64>(&spec, seed)?.frame)
}

/// Test-split metrics of a fitted model.
fn train_and_test(data: &Datasets<f64>, config: &TrainConfig, out: Option<&Path>) -> recast::Result<Metrics> {
    let result = fit(data, config, out)?;
    let windows = make_windows(&data.test, config.lookback, config.horizon, 1);
    evaluate(&result.model, &result.codebook, &windows)
}

struct EndToEnd {
    full: Metrics,
    no_residual: Metrics,
    naive: Metrics,
}

fn end_to_end(seed: u64, out: Option<&Path>) -> recast::Result<EndToEnd> {
    let mut config = desk_config();
    config.seed = seed;
    let data = Datasets::split(&synth_frame(seed)?, DatasetKind::Other, &config.model_dims()?)?;
    let full = train_and_test(&data, &config, out)?;
    let mut ablated = config.clone();
    ablated.ablations.insert(Ablation::NoResidual);
    let no_residual = train_and_test(&data, &ablated, None)?;
    let naive = naive_metrics(&make_windows(&data.test, config.lookback, config.horizon, 1))?;
    Ok(EndToEnd { full, no_residual, naive })
}

fn ett_check(path: &Path) -> recast::Result<(bool, String)> {
    let frame: SeriesFrame<f64> = load_csv(path, &CsvOptions::default())?;
    // Benchmark numbers are reported on data standardized with train-split statistics.
    let train_len = frame.len() * 6 / 10;
    let train = frame.values.slice(ndarray::s![.., ..train_len]);
    let mean = train.mean_axis(Axis(1)).expect("non-empty train split");
    let std = train.std_axis(Axis(1), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    let mut values = frame.values.clone();
    for (c, mut row) in values.outer_iter_mut().enumerate() {
        row.mapv_inplace(|v| (v - mean[c]) / std[c]);
    }
    let frame = SeriesFrame::new(values, frame.channel_names)?;
    let config = desk_config();
    let data = Datasets::split(&frame, DatasetKind::Ett, &config.model_dims()?)?;
    let m = train_and_test(&data, &config, None)?;
    Ok((m.mse <= 0.50, format!("test MSE {:.4} (soft target ≤ 0.50), MAE {:.4}", m.mse, m.mae)))
}

fn main() -> ExitCode {
    println!("acceptance: seed {SEED}");
    let mut outcomes = vec![
        run("1", "robust fusion vs KL-ball oracle", 30, dro_vs_oracle),
        run("2", "incremental update telescoping", 1, telescoping),
        run("3", "gradient checks, both paths", 30, gradients),
        run("4", "clustering energy and means", 30, clustering),
        run("5", "normalize/patch/pool roundtrips", 5, roundtrips),
        run("6", "reliability score properties", 30, scores),
    ];

    let dir_a = tempfile::tempdir().expect("temp dir");
    let dir_b = tempfile::tempdir().expect("temp dir");
    outcomes.push(run("7", "desk-scale end-to-end", 180, || {
        let r = end_to_end(SEED, Some(dir_a.path()))?;
        let gain = 1.0 - r.full.mse / r.naive.mse;
        Ok((
            gain >= 0.20 && r.full.mse < r.no_residual.mse,
            format!(
                "test MSE full {:.4}, naive {:.4} ({:+.1}% better, need ≥ 20%), no_residual {:.4}",
                r.full.mse,
                r.naive.mse,
                100.0 * gain,
                r.no_residual.mse
            ),
        ))
    }));
    outcomes.push(run("8", "bitwise reproducible history", 180, || {
        let config = desk_config();
        let data = Datasets::split(&synth_frame(SEED)?, DatasetKind::Other, &config.model_dims()?)?;
        train_and_test(&data, &config, Some(dir_b.path()))?;
        let read = |d: &Path| fs::read(d.join(HISTORY_FILE)).map_err(|e| recast::RecastError::Internal(e.to_string()));
        let (a, b) = (read(dir_a.path())?, read(dir_b.path())?);
        Ok((
            !a.is_empty() && a == b,
            format!("{} history bytes, identical: {}", a.len(), a == b),
        ))
    }));

    // Extra seeds show how stable criterion 7 is; they are reported, not asserted.
    let mut wins = (0, 0, 0);
    for seed in 1..=3u64 {
        match end_to_end(seed, None) {
            Ok(r) => {
                wins.0 += 1;
                wins.1 += usize::from(r.full.mse <= 0.8 * r.naive.mse);
                wins.2 += usize::from(r.full.mse < r.no_residual.mse);
                println!(
                    "[INFO]    seed {seed}: full {:.4}, naive {:.4}, no_residual {:.4}",
                    r.full.mse, r.naive.mse, r.no_residual.mse
                );
            }
            Err(e) => println!("[INFO]    seed {seed}: error {e}"),
        }
    }
    println!(
        "[INFO]    extra seeds: ≥20% over naive {}/{}, beats no_residual {}/{}",
        wins.1, wins.0, wins.2, wins.0
    );

    match env::var_os("RECAST_ETTH1_CSV") {
        Some(path) => {
            let o = run("9", "ETTh1-format run (reported)", 900, || ett_check(Path::new(&path)));
            if !o.ok() {
                println!("           criterion 9 is a soft target and does not fail the run");
            }
        }
        None => println!("[SKIP]  9 ETTh1-format run (reported)     set RECAST_ETTH1_CSV to a CSV to run it"),
    }

    let failed = outcomes.iter().filter(|o| !o.ok()).count();
    println!("acceptance: {} of {} asserted criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

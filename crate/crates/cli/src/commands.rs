use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use glmvae_core::activity::{analytical_activity, empirical_activity, histogram_distance, write_histograms_csv};
use glmvae_core::closed_form::{
    activity_predict, expected_remainder, mle_fit, objective_hat, variational_optima, MleOptions, MleSolution,
};
use glmvae_core::data::{synthetic_bernoulli, write_csv_matrix, write_idx, Dataset};
use glmvae_core::edf::FamilyKind;
use glmvae_core::nn::{build_architecture, init_bench, init_mle_b, train, TrainHistory, VaeModel};
use glmvae_core::Matrix;

use crate::config::{ExperimentConfig, InitScheme, OUTPUT_ROOT_VAR};
use crate::error::CliError;
use crate::plot::{self, Band, Reference};

/// z-value of the two-sided 0.95 normal interval.
const CI_Z: f64 = 1.96;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn prepare(cfg: &ExperimentConfig) -> Result<(PathBuf, Dataset), CliError> {
    let ds = cfg.load_dataset()?;
    if ds.test.rows() > 0 && ds.test.cols() != ds.train.cols() {
        return Err(CliError::Config(format!(
            "train has {} columns, test has {}",
            ds.train.cols(),
            ds.test.cols()
        )));
    }
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok((dir, ds))
}

fn fit(cfg: &ExperimentConfig, x: &Matrix, beta: f64) -> Result<MleSolution, CliError> {
    let fam = cfg.family()?;
    let mut opts = MleOptions::new(beta, cfg.kappa);
    if fam.kind() == FamilyKind::Gaussian && cfg.fixed_dispersion {
        opts = opts.with_fixed_dispersion(cfg.dispersion);
    }
    Ok(mle_fit(x, &fam, &opts)?)
}

/// `(L̂, E[R₂])` at the closed-form solution.
fn reference_values(sol: &MleSolution, x: &Matrix) -> Result<(f64, f64), CliError> {
    let lhat = objective_hat(&sol.decoder(), x, &sol.family, sol.beta)?;
    let opt = variational_optima(sol);
    let mus = x.row_iter().map(|r| opt.mu(r)).collect::<glmvae_core::Result<Vec<_>>>()?;
    let er = expected_remainder(&sol.decoder(), &mus, std::slice::from_ref(&opt.sigma_z), &sol.family)?;
    Ok((lhat, er))
}

fn build_model(cfg: &ExperimentConfig, d: usize, beta: f64) -> Result<VaeModel, CliError> {
    let act = cfg.output_activation()?;
    let model = build_architecture(cfg.architecture()?, d, cfg.kappa, cfg.family()?, beta, cfg.hidden_scale)
        .and_then(|m| m.with_output_activation(act))
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(model)
}

fn initialized_model(
    cfg: &ExperimentConfig,
    d: usize,
    beta: f64,
    seed: u64,
    sol: Option<&MleSolution>,
) -> Result<VaeModel, CliError> {
    let mut model = build_model(cfg, d, beta)?;
    let mut rng = cfg.train_config(seed).init_rng();
    match (cfg.init, sol) {
        (InitScheme::MleB, Some(sol)) => init_mle_b(&mut model, sol, &mut rng)?,
        (InitScheme::MleB, None) => unreachable!("mle_b initialization needs a solution"),
        (InitScheme::Bench, _) => init_bench(&mut model, &mut rng),
    }
    Ok(model)
}

pub fn cmd_mle(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (dir, ds) = prepare(cfg)?;
    let sol = fit(cfg, &ds.train, cfg.beta)?;
    sol.write_csv(create(&dir, "mle.csv")?, &activity_predict(&sol))?;
    let mut bin = create(&dir, "mle.bin")?;
    sol.write_binary(&mut bin)?;
    bin.flush()?;
    let (lhat, er) = reference_values(&sol, &ds.train)?;
    let mut out = create(&dir, "lhat.txt")?;
    writeln!(out, "objective_hat {lhat}")?;
    writeln!(out, "expected_remainder {er}")?;
    writeln!(out, "active_count {}", sol.active_count())?;
    out.flush()?;
    log::info!(
        "L_hat = {lhat:.6}, E[R2] = {er:.6}, {} of {} units active (cutoff {})",
        sol.active_count(),
        cfg.kappa,
        sol.cutoff
    );
    Ok(dir)
}

pub fn cmd_init_export(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (dir, ds) = prepare(cfg)?;
    let sol = fit(cfg, &ds.train, cfg.beta)?;
    for &seed in &cfg.seeds {
        let model = initialized_model(cfg, ds.d(), cfg.beta, seed, Some(&sol))?;
        let name = format!("init_{}_seed{seed}.ckpt", init_name(cfg.init));
        let mut w = create(&dir, &name)?;
        model.write_checkpoint(&mut w)?;
        w.flush()?;
    }
    Ok(dir)
}

fn init_name(init: InitScheme) -> &'static str {
    match init {
        InitScheme::Bench => "bench",
        InitScheme::MleB => "mle_b",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub batch: usize,
    pub split: &'static str,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub seeds: usize,
}

/// Pointwise mean and normal-approximation 0.95 interval
/// `mean ± 1.96·sd/√n` across runs, for every batch evaluated in all runs.
pub fn aggregate(histories: &[TrainHistory]) -> Vec<AggregateRow> {
    let Some(first) = histories.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for split in ["train", "test"] {
        for rec in &first.records {
            let values: Option<Vec<f64>> = histories
                .iter()
                .map(|h| {
                    let r = h.at_batch(rec.batch)?;
                    if split == "train" {
                        Some(r.train.mean)
                    } else {
                        r.test.map(|t| t.mean)
                    }
                })
                .collect();
            let Some(values) = values else { continue };
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = CI_Z * sd / n.sqrt();
            rows.push(AggregateRow {
                batch: rec.batch,
                split,
                mean,
                ci_lower: mean - half,
                ci_upper: mean + half,
                seeds: values.len(),
            });
        }
    }
    rows
}

fn write_aggregate(w: impl Write, rows: &[AggregateRow]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["batch", "split", "mean", "ci_lower", "ci_upper", "seeds"])
        .map_err(glmvae_core::Error::from)?;
    for r in rows {
        out.write_record([
            r.batch.to_string(),
            r.split.to_string(),
            r.mean.to_string(),
            r.ci_lower.to_string(),
            r.ci_upper.to_string(),
            r.seeds.to_string(),
        ])
        .map_err(glmvae_core::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

fn curves_svg(cfg: &ExperimentConfig, rows: &[AggregateRow], refs: Option<(f64, f64)>) -> String {
    let band = |split: &str, color: &'static str| {
        let sel: Vec<&AggregateRow> = rows.iter().filter(|r| r.split == split).collect();
        Band {
            label: format!("{split} ({})", init_name(cfg.init)),
            color,
            x: sel.iter().map(|r| r.batch as f64).collect(),
            mean: sel.iter().map(|r| r.mean).collect(),
            lower: sel.iter().map(|r| r.ci_lower).collect(),
            upper: sel.iter().map(|r| r.ci_upper).collect(),
        }
    };
    let bands: Vec<Band> = [("train", "#1f77b4"), ("test", "#ff7f0e")]
        .into_iter()
        .map(|(s, c)| band(s, c))
        .filter(|b| !b.x.is_empty())
        .collect();
    let refs: Vec<Reference> = refs
        .map(|(lhat, er)| {
            vec![
                Reference { label: "L_hat".into(), color: "#2ca02c", y: lhat },
                Reference { label: "L_hat + E[R2]".into(), color: "#d62728", y: lhat + er },
            ]
        })
        .unwrap_or_default();
    let title = format!("{} {} kappa={} beta={}", cfg.dataset, cfg.architecture, cfg.kappa, cfg.beta);
    plot::render(&title, "batch", "ELBO", &bands, &refs)
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (dir, ds) = prepare(cfg)?;
    let needs_sol = cfg.init == InitScheme::MleB || cfg.svg;
    let sol = if needs_sol {
        match fit(cfg, &ds.train, cfg.beta) {
            Ok(s) => Some(s),
            Err(e) if cfg.init == InitScheme::Bench => {
                log::warn!("no closed-form reference lines: {e}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let test = (ds.test.rows() > 0).then_some(&ds.test);
    let mut histories = Vec::new();
    let mut failed = 0;
    for &seed in &cfg.seeds {
        let mut model = initialized_model(cfg, ds.d(), cfg.beta, seed, sol.as_ref())?;
        match train(&mut model, &ds.train, test, &cfg.train_config(seed)) {
            Ok(h) => {
                h.write_csv(create(&dir, &format!("history_seed{seed}.csv"))?)?;
                if cfg.save_checkpoints {
                    let mut w = create(&dir, &format!("model_seed{seed}.ckpt"))?;
                    model.write_checkpoint(&mut w)?;
                    w.flush()?;
                }
                if let Some(last) = h.last() {
                    log::info!("seed {seed}: final train ELBO {:.4}", last.train.mean);
                }
                histories.push(h);
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failed += 1;
            }
        }
    }
    let rows = aggregate(&histories);
    write_aggregate(create(&dir, "aggregate.csv")?, &rows)?;
    if cfg.svg {
        let refs = match &sol {
            Some(s) => Some(reference_values(s, &ds.train)?),
            None => None,
        };
        fs::write(dir.join("curves.svg"), curves_svg(cfg, &rows, refs))?;
    }
    if failed > 0 {
        return Err(CliError::SeedsFailed { failed, total: cfg.seeds.len() });
    }
    Ok(dir)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

pub fn cmd_activity(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (dir, ds) = prepare(cfg)?;
    let mut summary = csv::Writer::from_writer(create(&dir, "distance.csv")?);
    summary
        .write_record(["beta", "analytical_active", "empirical_active_mean", "distance_mean", "distance_std", "seeds"])
        .map_err(glmvae_core::Error::from)?;
    let mut by_seed = csv::Writer::from_writer(create(&dir, "distance_by_seed.csv")?);
    by_seed
        .write_record(["beta", "seed", "empirical_active", "distance"])
        .map_err(glmvae_core::Error::from)?;
    let mut failed = 0;
    let mut total = 0;
    for &beta in &cfg.betas {
        let sol = fit(cfg, &ds.train, beta)?;
        let analytical = analytical_activity(&sol);
        analytical.write_csv(create(&dir, &format!("activity_beta{beta}_analytical.csv"))?)?;
        let mut distances = Vec::new();
        let mut actives = Vec::new();
        for &seed in &cfg.seeds {
            total += 1;
            let mut model = initialized_model(cfg, ds.d(), beta, seed, Some(&sol))?;
            if let Err(e) = train(&mut model, &ds.train, None, &cfg.train_config(seed)) {
                log::error!("beta {beta} seed {seed} failed: {e}");
                failed += 1;
                continue;
            }
            let empirical = empirical_activity(&model, &ds.train)?;
            empirical.write_csv(create(&dir, &format!("activity_beta{beta}_seed{seed}.csv"))?)?;
            write_histograms_csv(
                create(&dir, &format!("histograms_beta{beta}_seed{seed}.csv"))?,
                &[&analytical, &empirical],
            )?;
            let dist = histogram_distance(&analytical.histogram, &empirical.histogram)?;
            by_seed
                .write_record([beta.to_string(), seed.to_string(), empirical.active_count.to_string(), dist.to_string()])
                .map_err(glmvae_core::Error::from)?;
            log::info!(
                "beta {beta} seed {seed}: {} active (predicted {}), distance {dist}",
                empirical.active_count,
                analytical.active_count
            );
            distances.push(dist);
            actives.push(empirical.active_count as f64);
        }
        if distances.is_empty() {
            continue;
        }
        let (dm, ds_) = mean_std(&distances);
        let (am, _) = mean_std(&actives);
        summary
            .write_record([
                beta.to_string(),
                analytical.active_count.to_string(),
                am.to_string(),
                dm.to_string(),
                ds_.to_string(),
                distances.len().to_string(),
            ])
            .map_err(glmvae_core::Error::from)?;
    }
    summary.flush()?;
    by_seed.flush()?;
    if failed > 0 {
        return Err(CliError::SeedsFailed { failed, total });
    }
    Ok(dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Idx,
    Csv,
}

pub fn cmd_synth(n: usize, d: usize, seed: u64, out: &Path, format: DataFormat) -> Result<PathBuf, CliError> {
    let dir = match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if out.is_relative() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    };
    fs::create_dir_all(&dir)?;
    let ds = synthetic_bernoulli(n, d, seed)?;
    for (name, x) in [("synthetic_train", &ds.train), ("synthetic_test", &ds.test)] {
        match format {
            DataFormat::Idx => write_idx(dir.join(format!("{name}.idx")), x, None)?,
            DataFormat::Csv => write_csv_matrix(create(&dir, &format!("{name}.csv"))?, x)?,
        }
    }
    Ok(dir)
}

use std::fs;
use std::path::{Path, PathBuf};

use glmvae_core::data::{load_csv, load_idx, synthetic_bernoulli, synthetic_train_rows, Dataset};
use glmvae_core::edf::{EdfFamily, FamilyKind};
use glmvae_core::nn::{default_output_activation, Activation, AdamConfig, Architecture, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUTPUT_ROOT_VAR: &str = "GLMVAE_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Bench,
    MleB,
}

/// One experiment. Every field has a default so a config file only lists
/// what differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `synthetic`, or a path to an `.idx`/`-ubyte` or `.csv` file.
    pub dataset: String,
    /// Optional held-out file; synthetic data are split 67/33 instead.
    pub test_dataset: Option<String>,
    /// Keep only the first rows of the training file.
    pub max_rows: Option<usize>,
    pub synthetic_n: usize,
    pub synthetic_d: usize,
    pub data_seed: u64,
    pub family: String,
    pub trials: u32,
    /// Gaussian `φ` for training from `bench`; `mle_b` and `mle` estimate it.
    pub dispersion: f64,
    pub fixed_dispersion: bool,
    pub output_activation: Option<String>,
    pub architecture: String,
    pub kappa: usize,
    pub beta: f64,
    /// β values swept by `activity`.
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub batch: usize,
    pub total_batches: usize,
    pub lr: f64,
    pub eval_every: usize,
    pub eval_mc: usize,
    pub train_mc: usize,
    pub init: InitScheme,
    pub hidden_scale: f64,
    pub output_dir: PathBuf,
    pub svg: bool,
    pub save_checkpoints: bool,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            dataset: "synthetic".into(),
            test_dataset: None,
            max_rows: None,
            synthetic_n: 10_000,
            synthetic_d: 200,
            data_seed: 0,
            family: "bernoulli".into(),
            trials: 1,
            dispersion: 1.0,
            fixed_dispersion: false,
            output_activation: None,
            architecture: "canonical".into(),
            kappa: 2,
            beta: 1.0,
            betas: vec![1.0, 20.0],
            seeds: vec![1],
            batch: train.batch_size,
            total_batches: train.total_batches,
            lr: train.adam.lr,
            eval_every: train.eval_every,
            eval_mc: train.eval_mc,
            train_mc: train.train_mc,
            init: InitScheme::MleB,
            hidden_scale: 1.0,
            output_dir: PathBuf::from("out"),
            svg: false,
            save_checkpoints: false,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.kappa == 0 {
            return bad("kappa must be positive".into());
        }
        if !(self.beta >= 0.0) || self.betas.iter().any(|b| !(*b >= 0.0)) {
            return bad("beta values must be >= 0".into());
        }
        if self.batch == 0 || self.eval_mc == 0 || self.train_mc == 0 {
            return bad("batch, eval_mc and train_mc must be positive".into());
        }
        if !(self.lr > 0.0) || !(self.hidden_scale > 0.0) || !(self.dispersion > 0.0) {
            return bad("lr, hidden_scale and dispersion must be positive".into());
        }
        self.family()?;
        self.architecture()?;
        self.output_activation()?;
        Ok(())
    }

    pub fn family(&self) -> Result<EdfFamily, CliError> {
        let kind: FamilyKind = self.family.parse().map_err(|e: glmvae_core::Error| CliError::Config(e.to_string()))?;
        let fam = match kind {
            FamilyKind::Gaussian => EdfFamily::gaussian(self.dispersion),
            FamilyKind::Bernoulli => Ok(EdfFamily::bernoulli()),
            FamilyKind::Binomial => EdfFamily::binomial(self.trials),
            FamilyKind::Poisson => Ok(EdfFamily::poisson()),
        };
        fam.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        self.architecture.parse().map_err(|e: glmvae_core::Error| CliError::Config(e.to_string()))
    }

    pub fn output_activation(&self) -> Result<Activation, CliError> {
        match &self.output_activation {
            Some(name) => name.parse().map_err(|e: glmvae_core::Error| CliError::Config(e.to_string())),
            None => Ok(default_output_activation(self.family()?.kind())),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch,
            total_batches: self.total_batches,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            eval_every: self.eval_every,
            seed,
            train_mc: self.train_mc,
            eval_mc: self.eval_mc,
            timing: self.timing,
        }
    }

    /// `output_dir`, placed under `$GLMVAE_OUTPUT_ROOT` when that is set and
    /// the configured directory is relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, CliError> {
        if self.dataset == "synthetic" {
            let ds = synthetic_bernoulli(self.synthetic_n, self.synthetic_d, self.data_seed)?;
            log::info!(
                "synthetic data: {} train / {} test rows ({} expected)",
                ds.train.rows(),
                ds.test.rows(),
                synthetic_train_rows(self.synthetic_n)
            );
            return Ok(ds);
        }
        let mut train = load_matrix(&self.dataset)?;
        if let Some(n) = self.max_rows {
            train = train.slice_rows(0, n.min(train.rows()));
        }
        let test = match &self.test_dataset {
            Some(p) => load_matrix(p)?,
            None => glmvae_core::Matrix::zeros(0, train.cols()),
        };
        let name = Path::new(&self.dataset)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if self.family()?.kind() == FamilyKind::Bernoulli {
            Ok(Dataset::new(train, test, name)?)
        } else {
            Ok(Dataset { train, test, name })
        }
    }
}

fn load_matrix(path: &str) -> Result<glmvae_core::Matrix, CliError> {
    let p = Path::new(path);
    if !p.exists() {
        return Err(CliError::Config(format!("dataset {path} does not exist")));
    }
    let is_csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv { load_csv(p, true, true)? } else { load_idx(p)? })
}

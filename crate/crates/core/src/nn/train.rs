use std::io::Write;
use std::time::Instant;

use log::info;

use super::adam::{AdamConfig, AdamState};
use super::elbo::{elbo_minibatch, evaluate, ElboEstimate};
use super::model::VaeModel;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Stream offsets derived from the run seed.
pub const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const EVAL_STREAM_BASE: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_batches: usize,
    pub adam: AdamConfig,
    /// Evaluate every this many batches; 0 evaluates only at start and end.
    pub eval_every: usize,
    pub seed: u64,
    pub train_mc: usize,
    pub eval_mc: usize,
    /// Record wall-clock seconds in the history. Off by default so repeated
    /// runs produce identical files.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            total_batches: 25_000,
            adam: AdamConfig::default(),
            eval_every: 500,
            seed: 0,
            train_mc: 1,
            eval_mc: 16,
            timing: false,
        }
    }
}

impl TrainConfig {
    /// Generator used for parameter initialization under this seed.
    pub fn init_rng(&self) -> Rng {
        Rng::new(self.seed).split(INIT_STREAM)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub batch: usize,
    pub train: ElboEstimate,
    pub test: Option<ElboEstimate>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EvalRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EvalRecord> {
        self.records.last()
    }

    pub fn at_batch(&self, batch: usize) -> Option<&EvalRecord> {
        self.records.iter().find(|r| r.batch == batch)
    }

    /// CSV with header `batch,split,elbo,seconds`, one row per split.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["batch", "split", "elbo", "seconds"])?;
        for r in &self.records {
            let secs = format!("{:.3}", r.seconds);
            out.write_record([r.batch.to_string(), "train".into(), format!("{:.10e}", r.train.mean), secs.clone()])?;
            if let Some(t) = r.test {
                out.write_record([r.batch.to_string(), "test".into(), format!("{:.10e}", t.mean), secs])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn eval_points(cfg: &TrainConfig) -> Vec<usize> {
    let mut pts = vec![0];
    if cfg.eval_every > 0 {
        pts.extend((1..).map(|k| k * cfg.eval_every).take_while(|&b| b <= cfg.total_batches));
    }
    if *pts.last().unwrap() != cfg.total_batches {
        pts.push(cfg.total_batches);
    }
    pts
}

/// Minibatch training with Adam on shuffled batches (epoch-wise permutation
/// from the seed, last partial batch dropped). Records ELBO estimates at
/// batch 0, every `eval_every` batches and at the end.
pub fn train(model: &mut VaeModel, train_x: &Matrix, test_x: Option<&Matrix>, cfg: &TrainConfig) -> Result<TrainHistory> {
    model.validate()?;
    let n = train_x.rows();
    if cfg.batch_size == 0 || cfg.batch_size > n {
        return Err(Error::Domain(format!(
            "batch size {} must lie in 1..={n} (training rows)",
            cfg.batch_size
        )));
    }
    let base = Rng::new(cfg.seed);
    let mut shuffle = base.split(SHUFFLE_STREAM);
    let mut noise = base.split(NOISE_STREAM);
    let mut adam = AdamState::for_model(cfg.adam, model);
    let start = Instant::now();
    let points = eval_points(cfg);
    let mut history = TrainHistory::default();

    let mut record = |model: &VaeModel, batch: usize, k: usize| -> Result<()> {
        let mut rng = base.split(EVAL_STREAM_BASE + k as u64);
        let train = evaluate(model, train_x, &mut rng, cfg.eval_mc)?;
        let test = test_x.map(|t| evaluate(model, t, &mut rng, cfg.eval_mc)).transpose()?;
        let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        info!("seed {} batch {batch}: train ELBO {:.4}", cfg.seed, train.mean);
        history.records.push(EvalRecord { batch, train, test, seconds });
        Ok(())
    };

    record(model, 0, 0)?;
    let batches_per_epoch = n / cfg.batch_size;
    let mut perm = Vec::new();
    let mut next_eval = 1;
    for step in 0..cfg.total_batches {
        let slot = step % batches_per_epoch;
        if slot == 0 {
            perm = shuffle.permutation(n);
        }
        let idx = &perm[slot * cfg.batch_size..(slot + 1) * cfg.batch_size];
        let batch = train_x.select_rows(idx);
        let (_, grads) = elbo_minibatch(model, &batch, &mut noise, cfg.train_mc).map_err(|e| match e {
            Error::NonFinite(_) => Error::NonFiniteLoss { batch_index: step },
            other => other,
        })?;
        adam.update_model(model, &grads)?;
        if next_eval < points.len() && points[next_eval] == step + 1 {
            record(model, step + 1, next_eval)?;
            next_eval += 1;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf::EdfFamily;
    use crate::nn::{build_architecture, init_bench, Architecture};

    fn setup() -> (VaeModel, Matrix) {
        let mut rng = Rng::new(1);
        let x = Matrix::from_fn(60, 5, |_, j| rng.bernoulli(0.2 + 0.15 * j as f64) as u8 as f64);
        let mut m = build_architecture(Architecture::Canonical, 5, 2, EdfFamily::bernoulli(), 1.0, 0.005).unwrap();
        init_bench(&mut m, &mut Rng::new(2));
        (m, x)
    }

    #[test]
    fn eval_schedule() {
        let cfg = TrainConfig { total_batches: 10, eval_every: 4, ..Default::default() };
        assert_eq!(eval_points(&cfg), vec![0, 4, 8, 10]);
        let cfg = TrainConfig { total_batches: 8, eval_every: 4, ..Default::default() };
        assert_eq!(eval_points(&cfg), vec![0, 4, 8]);
        let cfg = TrainConfig { total_batches: 0, eval_every: 4, ..Default::default() };
        assert_eq!(eval_points(&cfg), vec![0]);
        let cfg = TrainConfig { total_batches: 7, eval_every: 0, ..Default::default() };
        assert_eq!(eval_points(&cfg), vec![0, 7]);
    }

    #[test]
    fn zero_batches_keeps_parameters() {
        let (mut m, x) = setup();
        let before = m.clone();
        let cfg = TrainConfig { total_batches: 0, batch_size: 10, ..Default::default() };
        let h = train(&mut m, &x, None, &cfg).unwrap();
        assert_eq!(h.records.len(), 1);
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_reproducible_and_improves() {
        let cfg = TrainConfig {
            total_batches: 300,
            batch_size: 20,
            eval_every: 100,
            adam: AdamConfig { lr: 1e-2, ..Default::default() },
            seed: 5,
            ..Default::default()
        };
        let (mut a, x) = setup();
        let mut b = a.clone();
        let ha = train(&mut a, &x, Some(&x), &cfg).unwrap();
        let hb = train(&mut b, &x, Some(&x), &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        let batches: Vec<usize> = ha.records.iter().map(|r| r.batch).collect();
        assert_eq!(batches, vec![0, 100, 200, 300]);
        assert!(ha.last().unwrap().train.mean > ha.records[0].train.mean);
        let mut buf = Vec::new();
        ha.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("batch,split,elbo,seconds\n"));
        assert_eq!(text.lines().count(), 1 + 8);
    }

    #[test]
    fn batch_larger_than_data_is_rejected() {
        let (mut m, x) = setup();
        let cfg = TrainConfig { batch_size: 100, total_batches: 1, ..Default::default() };
        assert!(train(&mut m, &x, None, &cfg).is_err());
    }
}

//! Latent activity statistics: `A_j = Var_x(E_q[z_j])`, activity
//! histograms and the distance between histograms.

use std::fmt;
use std::io::Write;

use crate::closed_form::{activity_predict, MleSolution};
use crate::error::{Error, Result};
use crate::nn::VaeModel;
use crate::numerics::{column_variances, Matrix};

/// Units with activity above this are counted as active.
pub const ACTIVE_THRESHOLD: f64 = 0.01;
pub const HISTOGRAM_BINS: usize = 10;
const ENCODE_CHUNK: usize = 1024;

pub type Histogram = [usize; HISTOGRAM_BINS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivitySource {
    Analytical,
    Empirical,
}

impl ActivitySource {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivitySource::Analytical => "analytical",
            ActivitySource::Empirical => "empirical",
        }
    }
}

impl fmt::Display for ActivitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityReport {
    pub values: Vec<f64>,
    pub active_count: usize,
    pub histogram: Histogram,
    pub source: ActivitySource,
}

impl ActivityReport {
    pub fn from_values(values: Vec<f64>, source: ActivitySource) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("activity values must be finite and >= 0, got {v}")));
        }
        Ok(Self {
            active_count: values.iter().filter(|&&v| v > ACTIVE_THRESHOLD).count(),
            histogram: histogram(&values),
            values,
            source,
        })
    }

    /// Rows `dim,value,source`, then `active_count,<n>,<source>`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dim", "value", "source"])?;
        for (j, v) in self.values.iter().enumerate() {
            out.write_record([j.to_string(), format!("{v:e}"), self.source.to_string()])?;
        }
        out.write_record(["active_count".to_string(), self.active_count.to_string(), self.source.to_string()])?;
        out.flush()?;
        Ok(())
    }
}

/// Ten bins `[0, 0.1), [0.1, 0.2), …, [0.9, ∞)`.
pub fn histogram(values: &[f64]) -> Histogram {
    let mut h = [0; HISTOGRAM_BINS];
    for &v in values {
        // count the edges k/10 that v reaches, so boundary values land in
        // the upper bin without relying on v·10 rounding
        let bin = (1..HISTOGRAM_BINS).filter(|&k| v >= k as f64 / 10.0).count();
        h[bin] += 1;
    }
    h
}

/// Rows `bin_lower,count,source` for each report.
pub fn write_histograms_csv(w: impl Write, reports: &[&ActivityReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_lower", "count", "source"])?;
    for r in reports {
        for (k, c) in r.histogram.iter().enumerate() {
            out.write_record([format!("{:.1}", k as f64 / 10.0), c.to_string(), r.source.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn analytical_activity(sol: &MleSolution) -> ActivityReport {
    ActivityReport::from_values(activity_predict(sol), ActivitySource::Analytical)
        .expect("predicted activities are finite and nonnegative")
}

/// Population variance (divisor `N`) over the rows of `x` of each
/// coordinate of the encoder mean.
pub fn empirical_activity(model: &VaeModel, x: &Matrix) -> Result<ActivityReport> {
    if x.rows() == 0 {
        return Err(Error::DimensionMismatch("activity of an empty data set".into()));
    }
    let mut means = Vec::with_capacity(x.rows() * model.kappa);
    let mut start = 0;
    while start < x.rows() {
        let end = (start + ENCODE_CHUNK).min(x.rows());
        let (mu, _) = model.encode(&x.slice_rows(start, end))?;
        means.extend_from_slice(mu.as_slice());
        start = end;
    }
    let mu = Matrix::from_vec(x.rows(), model.kappa, means)?;
    ActivityReport::from_values(column_variances(&mu), ActivitySource::Empirical)
}

/// `1 − Σ min(h1ᵢ, h2ᵢ) / κ` for histograms of equal mass `κ`.
pub fn histogram_distance(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    let m1: usize = h1.iter().sum();
    let m2: usize = h2.iter().sum();
    if m1 != m2 {
        return Err(Error::Domain(format!("histogram masses differ: {m1} vs {m2}")));
    }
    if m1 == 0 {
        return Err(Error::Domain("histograms are empty".into()));
    }
    let overlap: usize = h1.iter().zip(h2).map(|(a, b)| a.min(b)).sum();
    Ok(1.0 - overlap as f64 / m1 as f64)
}

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::mle::MleSolution;
use crate::edf::{EdfFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"GLMVMLE\0";
const VERSION: u32 = 1;

pub(crate) fn write_family(w: &mut impl Write, family: &EdfFamily) -> Result<()> {
    w.write_u8(family.kind().code())?;
    w.write_u32::<LittleEndian>(family.trials())?;
    w.write_f64::<LittleEndian>(family.dispersion())?;
    w.write_f64::<LittleEndian>(family.rho())?;
    Ok(())
}

pub(crate) fn read_family(r: &mut impl Read) -> Result<EdfFamily> {
    let kind = FamilyKind::from_code(r.read_u8()?)?;
    let trials = r.read_u32::<LittleEndian>()?;
    let dispersion = r.read_f64::<LittleEndian>()?;
    let rho = r.read_f64::<LittleEndian>()?;
    EdfFamily::new(kind, trials, dispersion, rho)
}

pub(crate) fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub(crate) fn read_dim(r: &mut impl Read, what: &str) -> Result<usize> {
    let v = r.read_u64::<LittleEndian>()?;
    if v == 0 || v > (1 << 32) {
        return Err(Error::Format(format!("implausible {what} {v}")));
    }
    Ok(v as usize)
}

impl MleSolution {
    /// Little-endian binary container: magic, version, family, dimensions,
    /// scalars, then the raw arrays.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let (d, kappa) = (self.d(), self.kappa());
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_family(w, &self.family)?;
        w.write_u64::<LittleEndian>(d as u64)?;
        w.write_u64::<LittleEndian>(kappa as u64)?;
        w.write_f64::<LittleEndian>(self.beta)?;
        w.write_f64::<LittleEndian>(self.cutoff)?;
        w.write_u8(self.sigma2_hat.is_some() as u8)?;
        w.write_f64::<LittleEndian>(self.sigma2_hat.unwrap_or(0.0))?;
        w.write_u8(self.dispersion_floored as u8)?;
        write_f64s(w, &self.b_hat)?;
        write_f64s(w, self.w_hat.as_slice())?;
        write_f64s(w, self.rotation_r.as_slice())?;
        write_f64s(w, &self.eigenvalues)?;
        for &a in &self.active_mask {
            w.write_u8(a as u8)?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an MLE solution file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported MLE file version {version}")));
        }
        let family = read_family(r)?;
        let d = read_dim(r, "data dimension")?;
        let kappa = read_dim(r, "latent dimension")?;
        if kappa > d {
            return Err(Error::Format(format!("latent dimension {kappa} exceeds {d}")));
        }
        let beta = r.read_f64::<LittleEndian>()?;
        let cutoff = r.read_f64::<LittleEndian>()?;
        let has_sigma = r.read_u8()? != 0;
        let sigma = r.read_f64::<LittleEndian>()?;
        let dispersion_floored = r.read_u8()? != 0;
        let b_hat = read_f64s(r, d)?;
        let w_hat = Matrix::from_vec(d, kappa, read_f64s(r, d * kappa)?)?;
        let rotation_r = Matrix::from_vec(kappa, kappa, read_f64s(r, kappa * kappa)?)?;
        let eigenvalues = read_f64s(r, d)?;
        let mut active_mask = Vec::with_capacity(kappa);
        for _ in 0..kappa {
            active_mask.push(r.read_u8()? != 0);
        }
        Ok(MleSolution {
            b_hat,
            w_hat,
            rotation_r,
            eigenvalues,
            sigma2_hat: has_sigma.then_some(sigma),
            cutoff,
            active_mask,
            beta,
            family,
            dispersion_floored,
        })
    }

    /// Long-format CSV with header `quantity,i,j,value`. Scalars use
    /// `i = j = 0`, vectors use `j = 0`.
    pub fn write_csv(&self, w: impl Write, predicted_activity: &[f64]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["quantity", "i", "j", "value"])?;
        let mut put = |q: &str, i: usize, j: usize, v: f64| {
            out.write_record([q, &i.to_string(), &j.to_string(), &format!("{v:e}")])
        };
        put("beta", 0, 0, self.beta)?;
        put("dispersion", 0, 0, self.dispersion())?;
        if let Some(s2) = self.sigma2_hat {
            put("sigma2_hat", 0, 0, s2)?;
        }
        put("cutoff", 0, 0, self.cutoff)?;
        put("active_count", 0, 0, self.active_count() as f64)?;
        for (i, &v) in self.b_hat.iter().enumerate() {
            put("b_hat", i, 0, v)?;
        }
        for (i, &v) in self.eigenvalues.iter().enumerate() {
            put("eigenvalue", i, 0, v)?;
        }
        for (i, &v) in predicted_activity.iter().enumerate() {
            put("predicted_activity", i, 0, v)?;
        }
        for i in 0..self.d() {
            for j in 0..self.kappa() {
                put("w_hat", i, j, self.w_hat[(i, j)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

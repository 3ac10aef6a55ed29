use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::layer::{Activation, Dense};
use super::model::VaeModel;
use crate::closed_form::{read_dim, read_f64s, read_family, write_f64s, write_family};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"GLMVCKPT";
const VERSION: u32 = 1;

fn write_layer(w: &mut impl Write, l: &Dense) -> Result<()> {
    w.write_u64::<LittleEndian>(l.in_dim() as u64)?;
    w.write_u64::<LittleEndian>(l.out_dim() as u64)?;
    w.write_u8(l.activation.code())?;
    write_f64s(w, l.w.as_slice())?;
    write_f64s(w, &l.b)
}

fn read_layer(r: &mut impl Read) -> Result<Dense> {
    let in_dim = read_dim(r, "layer input width")?;
    let out_dim = read_dim(r, "layer output width")?;
    let activation = Activation::from_code(r.read_u8()?)?;
    let w = Matrix::from_vec(out_dim, in_dim, read_f64s(r, in_dim * out_dim)?)?;
    let b = read_f64s(r, out_dim)?;
    Ok(Dense { w, b, activation })
}

impl VaeModel {
    /// Versioned little-endian container: magic, family, β, κ, then every
    /// layer as `(in, out, activation, weights, biases)`.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_family(w, &self.family)?;
        w.write_f64::<LittleEndian>(self.beta)?;
        w.write_u64::<LittleEndian>(self.kappa as u64)?;
        w.write_u32::<LittleEndian>(self.encoder_trunk.len() as u32)?;
        w.write_u32::<LittleEndian>(self.decoder.len() as u32)?;
        for l in self.layers() {
            write_layer(w, l)?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model checkpoint (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let family = read_family(r)?;
        let beta = r.read_f64::<LittleEndian>()?;
        let kappa = read_dim(r, "latent dimension")?;
        let n_trunk = r.read_u32::<LittleEndian>()? as usize;
        let n_dec = r.read_u32::<LittleEndian>()? as usize;
        if n_trunk > 64 || n_dec == 0 || n_dec > 64 {
            return Err(Error::Format(format!("implausible layer counts {n_trunk}/{n_dec}")));
        }
        let encoder_trunk = (0..n_trunk).map(|_| read_layer(r)).collect::<Result<Vec<_>>>()?;
        let mu_head = read_layer(r)?;
        let logvar_head = read_layer(r)?;
        let decoder = (0..n_dec).map(|_| read_layer(r)).collect::<Result<Vec<_>>>()?;
        let model = VaeModel {
            encoder_trunk,
            mu_head,
            logvar_head,
            decoder,
            family,
            beta,
            kappa,
        };
        model.validate().map_err(|e| Error::Format(format!("inconsistent checkpoint: {e}")))?;
        Ok(model)
    }
}

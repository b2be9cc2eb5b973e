//! Checkpoint format (little-endian):
//!
//! ```text
//! magic     8 bytes  "LFCKPT\0\0"
//! version   u32      1
//! config    u32 x 8  h k n_classes layers heads dim latent_dim n_cond
//!           f64 x 2  beta p_drop_cond
//! count     u32      number of parameter tensors
//! count x { name_len u32, name utf-8, rows u32, cols u32, rows*cols f64 }
//! has_train u8
//! if has_train:
//!   lr f64, batch_size u32, epochs u32, seed u64, epoch u64,
//!   adam_step u64, beta1 f64, beta2 f64, eps f64,
//!   first moments then second moments, each tensor as rows*cols f64
//!   in the parameter order above
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::config::ModelConfig;
use super::model::Network;
use super::optim::Adam;
use super::params::ModelParams;
use super::train::{TrainConfig, Trainer};
use crate::corpus::files::write_atomic;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LFCKPT\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: Network,
    pub train: Option<TrainState>,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: TrainConfig,
    pub epoch: usize,
    pub adam: Adam,
}

impl Checkpoint {
    pub fn from_trainer(tr: &Trainer) -> Self {
        Self {
            net: tr.net.clone(),
            train: Some(TrainState {
                config: tr.config.clone(),
                epoch: tr.epoch,
                adam: tr.adam.clone(),
            }),
        }
    }

    pub fn into_trainer(self, fallback: TrainConfig) -> Result<Trainer> {
        match self.train {
            Some(state) => Ok(Trainer {
                net: self.net,
                adam: state.adam,
                config: state.config,
                epoch: state.epoch,
            }),
            None => Trainer::new(self.net, fallback),
        }
    }
}

pub fn save_ckpt(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION)?;
    let c = ckpt.net.config();
    for v in [
        c.h,
        c.k,
        c.n_classes,
        c.layers,
        c.heads,
        c.dim,
        c.latent_dim,
        c.n_cond,
    ] {
        buf.write_u32::<LittleEndian>(v as u32)?;
    }
    buf.write_f64::<LittleEndian>(c.beta)?;
    buf.write_f64::<LittleEndian>(c.p_drop_cond)?;
    let tensors = ckpt.net.params.tensors();
    buf.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (name, t) in &tensors {
        buf.write_u32::<LittleEndian>(name.len() as u32)?;
        buf.extend_from_slice(name.as_bytes());
        buf.write_u32::<LittleEndian>(t.nrows() as u32)?;
        buf.write_u32::<LittleEndian>(t.ncols() as u32)?;
        for &v in t.iter() {
            buf.write_f64::<LittleEndian>(v)?;
        }
    }
    match &ckpt.train {
        None => buf.write_u8(0)?,
        Some(s) => {
            buf.write_u8(1)?;
            buf.write_f64::<LittleEndian>(s.config.lr)?;
            buf.write_u32::<LittleEndian>(s.config.batch_size as u32)?;
            buf.write_u32::<LittleEndian>(s.config.epochs as u32)?;
            buf.write_u64::<LittleEndian>(s.config.seed)?;
            buf.write_u64::<LittleEndian>(s.epoch as u64)?;
            buf.write_u64::<LittleEndian>(s.adam.step)?;
            buf.write_f64::<LittleEndian>(s.adam.beta1)?;
            buf.write_f64::<LittleEndian>(s.adam.beta2)?;
            buf.write_f64::<LittleEndian>(s.adam.eps)?;
            for moments in [&s.adam.m, &s.adam.v] {
                for (_, t) in moments.tensors() {
                    for &v in t.iter() {
                        buf.write_f64::<LittleEndian>(v)?;
                    }
                }
            }
        }
    }
    write_atomic(path, &buf)
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    path: &'a Path,
}

impl Reader<'_> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur
            .read_u8()
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur
            .read_u32::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    fn u64(&mut self) -> Result<u64> {
        self.cur
            .read_u64::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    fn f64(&mut self) -> Result<f64> {
        self.cur
            .read_f64::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        let remaining = self.cur.get_ref().len() - self.cur.position() as usize;
        if remaining < out.len() * 8 {
            return Err(self.corrupt("unexpected end of file"));
        }
        self.cur
            .read_f64_into::<LittleEndian>(out)
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    fn params_into(&mut self, dst: &mut ModelParams) -> Result<()> {
        for t in dst.tensors_mut() {
            self.fill(t.as_slice_mut().expect("standard layout"))?;
        }
        Ok(())
    }
}

pub fn load_ckpt(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        cur: Cursor::new(bytes.as_slice()),
        path,
    };
    let mut magic = [0u8; 8];
    r.cur
        .read_exact(&mut magic)
        .map_err(|_| r.corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(r.corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 8];
    for d in dims.iter_mut() {
        *d = r.u32()? as usize;
    }
    let [h, k, n_classes, layers, heads, dim, latent_dim, n_cond] = dims;
    let config = ModelConfig {
        h,
        k,
        n_classes,
        layers,
        heads,
        dim,
        latent_dim,
        n_cond,
        beta: r.f64()?,
        p_drop_cond: r.f64()?,
    };
    config
        .validate()
        .map_err(|e| r.corrupt(format!("invalid config: {e}")))?;
    // Lower bound on the stored f64 count; rejects absurd sizes before
    // allocating.
    let budget = bytes.len() / 8;
    let weights = [
        layers.saturating_mul(dim.saturating_mul(dim).saturating_mul(16)),
        h.saturating_mul(dim).saturating_mul(2),
        n_classes
            .saturating_add(1)
            .saturating_mul(n_cond)
            .saturating_mul(dim),
        k.saturating_mul(dim).saturating_mul(2),
    ];
    if weights.iter().fold(0usize, |a, &w| a.saturating_add(w)) > budget {
        return Err(r.corrupt("config larger than file"));
    }
    let mut params = ModelParams::init(&config, 0)?;
    let count = r.u32()? as usize;
    let expected: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.dim()))
        .collect();
    if count != expected.len() {
        return Err(r.corrupt(format!(
            "expected {} tensors, found {count}",
            expected.len()
        )));
    }
    for ((name, shape), dst) in expected.iter().zip(params.tensors_mut()) {
        let len = r.u32()? as usize;
        if len > 256 {
            return Err(r.corrupt("tensor name too long"));
        }
        let mut raw = vec![0u8; len];
        r.cur
            .read_exact(&mut raw)
            .map_err(|_| r.corrupt("unexpected end of file"))?;
        if raw != name.as_bytes() {
            return Err(r.corrupt(format!(
                "expected tensor {name}, found {}",
                String::from_utf8_lossy(&raw)
            )));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != *shape {
            return Err(r.corrupt(format!(
                "tensor {name} has shape {rows}x{cols}, expected {}x{}",
                shape.0, shape.1
            )));
        }
        r.fill(dst.as_slice_mut().expect("standard layout"))?;
    }
    if !params.all_finite() {
        return Err(r.corrupt("non-finite parameter"));
    }
    let train = match r.u8()? {
        0 => None,
        1 => {
            let config = TrainConfig {
                lr: r.f64()?,
                batch_size: r.u32()? as usize,
                epochs: r.u32()? as usize,
                seed: r.u64()?,
            };
            let epoch = r.u64()? as usize;
            let mut adam = Adam::new(&params, config.lr);
            adam.step = r.u64()?;
            adam.beta1 = r.f64()?;
            adam.beta2 = r.f64()?;
            adam.eps = r.f64()?;
            r.params_into(&mut adam.m)?;
            r.params_into(&mut adam.v)?;
            Some(TrainState {
                config,
                epoch,
                adam,
            })
        }
        other => return Err(r.corrupt(format!("bad train-state flag {other}"))),
    };
    if (r.cur.position() as usize) != bytes.len() {
        return Err(r.corrupt("trailing bytes"));
    }
    Ok(Checkpoint {
        net: Network::new(params)?,
        train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        Network::init(
            &ModelConfig {
                h: 3,
                k: 5,
                n_classes: 2,
                layers: 1,
                heads: 1,
                dim: 4,
                latent_dim: 2,
                n_cond: 1,
                beta: 0.5,
                p_drop_cond: 0.2,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_with_train_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut tr = Trainer::new(
            tiny(),
            TrainConfig {
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        tr.adam.step = 17;
        tr.adam.m.head.b.fill(0.25);
        tr.epoch = 3;
        save_ckpt(&path, &Checkpoint::from_trainer(&tr)).unwrap();
        let back = load_ckpt(&path).unwrap();
        assert_eq!(back.net.params, tr.net.params);
        let state = back.train.unwrap();
        assert_eq!(state.adam, tr.adam);
        assert_eq!(state.config, tr.config);
        assert_eq!(state.epoch, 3);
    }

    #[test]
    fn corrupt_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_ckpt(
            &path,
            &Checkpoint {
                net: tiny(),
                train: None,
            },
        )
        .unwrap();
        let bytes = fs::read(&path).unwrap();
        for cut in [0, 7, 12, 60, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            assert!(
                matches!(load_ckpt(&path), Err(Error::Corrupt { .. })),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[1] = b'?';
        fs::write(&path, &bad).unwrap();
        assert!(load_ckpt(&path)
            .unwrap_err()
            .to_string()
            .contains("bad magic"));
        let mut extra = bytes;
        extra.push(0);
        fs::write(&path, &extra).unwrap();
        assert!(matches!(load_ckpt(&path), Err(Error::Corrupt { .. })));
    }
}

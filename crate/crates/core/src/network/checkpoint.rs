//! `NDEW1` parameter checkpoints.
//!
//! Layout (little-endian): `b"NDEW1"`, u32 lambda layer count, u32 phi layer
//! count, then `(u32 in, u32 out)` for every layer, then for every layer its
//! `out x in` row-major weights followed by its `out` biases. Lambda layers
//! come first throughout.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::mlp::{Layer, Mlp};
use super::neurde::MlpParams;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"NDEW1";

pub fn write_checkpoint<W: Write>(params: &MlpParams, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(params.lambda.layers.len() as u32).to_le_bytes())?;
    w.write_all(&(params.phi.layers.len() as u32).to_le_bytes())?;
    let layers: Vec<&Layer> = params.lambda.layers.iter().chain(&params.phi.layers).collect();
    for l in &layers {
        w.write_all(&(l.fan_in() as u32).to_le_bytes())?;
        w.write_all(&(l.fan_out() as u32).to_le_bytes())?;
    }
    let mut buf = Vec::new();
    for l in &layers {
        for v in l.w.data().iter().chain(l.b.data()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    Ok(raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpParams> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let nl = read_u32(&mut r)? as usize;
    let np = read_u32(&mut r)? as usize;
    if nl == 0 || np == 0 || nl + np > 1024 {
        return Err(Error::Format(format!("implausible layer counts {nl}, {np}")));
    }
    let mut dims = Vec::with_capacity(nl + np);
    for _ in 0..nl + np {
        let i = read_u32(&mut r)? as usize;
        let o = read_u32(&mut r)? as usize;
        if i == 0 || o == 0 || i * o > 1 << 26 {
            return Err(Error::Format(format!("implausible layer shape {i}x{o}")));
        }
        dims.push((i, o));
    }
    let mut layers = Vec::with_capacity(dims.len());
    for &(i, o) in &dims {
        let w = Tensor::from_vec(o, i, read_f64s(&mut r, i * o)?)?;
        let b = Tensor::from_vec(1, o, read_f64s(&mut r, o)?)?;
        layers.push(Layer { w, b });
    }
    let phi = Mlp {
        layers: layers.split_off(nl),
    };
    let lambda = Mlp { layers };
    for net in [&lambda, &phi] {
        for pair in net.layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Format("consecutive layer dimensions do not chain".into()));
            }
        }
    }
    MlpParams::from_parts(lambda, phi).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_checkpoint(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let f = fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let p = MlpParams::new(5, 3, 11);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"NDEW1");
        assert_eq!(&buf[5..9], &4u32.to_le_bytes());
        assert_eq!(&buf[9..13], &4u32.to_le_bytes());
        // first lambda layer is 4 -> 5
        assert_eq!(&buf[13..17], &4u32.to_le_bytes());
        assert_eq!(&buf[17..21], &5u32.to_le_bytes());
        let header = 13 + 8 * 8;
        assert_eq!(buf.len(), header + 8 * p.num_params());
        assert_eq!(&buf[header..header + 8], &p.lambda.layers[0].w.data()[0].to_le_bytes());
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = MlpParams::new(4, 2, 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[4] = b'2';
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Format(_))));
    }
}

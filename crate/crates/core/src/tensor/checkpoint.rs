//! Portable network checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes  "DMLP"
//! version      u32      1
//! activation   u8       0 = relu
//! head         u8       0 = linear, 1 = tanh, 2 = tanh-gaussian
//! layer count  u32      L
//! dims         u32 x (L + 1)
//! per layer    f64 x (out * in) weight (row-major), then f64 x out bias
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Head, Linear, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DMLP";
pub const FORMAT_VERSION: u32 = 1;

fn head_tag(head: Head) -> u8 {
    match head {
        Head::Linear => 0,
        Head::Tanh => 1,
        Head::TanhGaussian => 2,
    }
}

pub fn write_mlp<W: Write>(w: &mut W, mlp: &Mlp) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[match mlp.activation() {
        Activation::Relu => 0u8,
    }])?;
    w.write_all(&[head_tag(mlp.head())])?;
    w.write_all(&(mlp.layers().len() as u32).to_le_bytes())?;
    for d in mlp.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for l in mlp.layers() {
        for v in l.weight.iter().chain(l.bias.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::config("not a network checkpoint (bad magic)"));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::config(format!("unsupported checkpoint version {version}")));
    }
    let activation = match read_u8(r)? {
        0 => Activation::Relu,
        t => return Err(Error::config(format!("unknown activation tag {t}"))),
    };
    let head = match read_u8(r)? {
        0 => Head::Linear,
        1 => Head::Tanh,
        2 => Head::TanhGaussian,
        t => return Err(Error::config(format!("unknown head tag {t}"))),
    };
    let count = read_u32(r)? as usize;
    if count == 0 || count > 1024 {
        return Err(Error::config(format!("implausible layer count {count}")));
    }
    let dims = (0..=count).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weight = Array2::from_shape_vec((fan_out, fan_in), read_f64s(r, fan_in * fan_out)?)
            .map_err(|e| Error::config(e.to_string()))?;
        let bias = Array1::from_vec(read_f64s(r, fan_out)?);
        layers.push(Linear { weight, bias });
    }
    Mlp::from_layers(layers, activation, head)
}

pub fn save_mlp(path: &Path, mlp: &Mlp) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mlp(&mut w, mlp)?;
    w.flush()?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    read_mlp(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(&[3, 2, 4], Head::TanhGaussian, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &mlp).unwrap();
        assert_eq!(&buf[..4], b"DMLP");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(buf[8], 0);
        assert_eq!(buf[9], 2);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 2);
        let header = 14 + 3 * 4;
        assert_eq!(buf.len(), header + 8 * mlp.param_count());
        let first = f64::from_le_bytes(buf[header..header + 8].try_into().unwrap());
        assert_eq!(first, mlp.layers()[0].weight[[0, 0]]);
    }

    #[test]
    fn truncated_file_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(&[3, 2], Head::Linear, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &mlp).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_mlp(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), width in 1usize..8, depth in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dims = vec![3];
            dims.extend(std::iter::repeat_n(width, depth));
            dims.push(2);
            let mlp = Mlp::new(&dims, Head::Tanh, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_mlp(&mut buf, &mlp).unwrap();
            let back = read_mlp(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            mlp.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, mlp);
        }
    }
}

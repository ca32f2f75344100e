//! Single-file network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "GBRCNNCK"
//! version      u32      1
//! seed         u64
//! steps        u64      optimizer steps applied
//! input shape  3 x u32  height, width, channels
//! layer count  u32
//! per layer:   u8 tag, then
//!   1 Conv2D          u32 out_channels, u32 kernel_size, u32 stride, u32 pad
//!   2 ReLU
//!   3 MaxPool         u32 size, u32 stride
//!   4 FullyConnected  u32 out_dim
//!   5 Dropout         f64 rate
//!   6 Fusion1x1
//! per layer:   u64 parameter count, then that many f64
//! ```
//!
//! Reading rebuilds the network from the layer list and then overwrites
//! every parameter, so a write/read round trip is bit-exact.

use std::io::{Read, Write};

use super::layer::LayerSpec;
use super::network::Network;
use super::tensor::Shape;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GBRCNNCK";
pub const VERSION: u32 = 1;

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Format(format!("{v} does not fit in u32")))
}

pub fn write_checkpoint(net: &Network, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&net.seed().to_le_bytes())?;
    w.write_all(&net.steps().to_le_bytes())?;
    let s = net.input_shape();
    for d in [s.height, s.width, s.channels] {
        w.write_all(&u32_of(d)?)?;
    }
    w.write_all(&u32_of(net.layers().len())?)?;
    for layer in net.layers() {
        match *layer.spec() {
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                stride,
                pad,
            } => {
                w.write_all(&[1])?;
                for v in [out_channels, kernel_size, stride, pad] {
                    w.write_all(&u32_of(v)?)?;
                }
            }
            LayerSpec::ReLU => w.write_all(&[2])?,
            LayerSpec::MaxPool { size, stride } => {
                w.write_all(&[3])?;
                w.write_all(&u32_of(size)?)?;
                w.write_all(&u32_of(stride)?)?;
            }
            LayerSpec::FullyConnected { out_dim } => {
                w.write_all(&[4])?;
                w.write_all(&u32_of(out_dim)?)?;
            }
            LayerSpec::Dropout { rate } => {
                w.write_all(&[5])?;
                w.write_all(&rate.to_le_bytes())?;
            }
            LayerSpec::Fusion1x1 => w.write_all(&[6])?,
        }
    }
    for layer in net.layers() {
        w.write_all(&(layer.params().len() as u64).to_le_bytes())?;
        for p in layer.params() {
            w.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn checkpoint_bytes(net: &Network) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(net, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated checkpoint".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Network> {
    let mut rd = Reader { inner: r };
    if &rd.bytes::<8>()? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = rd.u32()? as u32;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let seed = rd.u64()?;
    let steps = rd.u64()?;
    let shape = Shape::new(rd.u32()?, rd.u32()?, rd.u32()?);
    let n_layers = rd.u32()?;
    if n_layers == 0 || n_layers > 4096 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let spec = match rd.u8()? {
            1 => LayerSpec::Conv2D {
                out_channels: rd.u32()?,
                kernel_size: rd.u32()?,
                stride: rd.u32()?,
                pad: rd.u32()?,
            },
            2 => LayerSpec::ReLU,
            3 => LayerSpec::MaxPool {
                size: rd.u32()?,
                stride: rd.u32()?,
            },
            4 => LayerSpec::FullyConnected { out_dim: rd.u32()? },
            5 => LayerSpec::Dropout { rate: rd.f64()? },
            6 => LayerSpec::Fusion1x1,
            t => return Err(Error::Format(format!("unknown layer tag {t}"))),
        };
        specs.push(spec);
    }
    let mut net = Network::new(shape, &specs, seed)?;
    for i in 0..n_layers {
        let n = rd.u64()? as usize;
        let expected = net.layers()[i].params().len();
        if n != expected {
            return Err(Error::Format(format!(
                "layer {i} stores {n} parameters, its spec needs {expected}"
            )));
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            params.push(rd.f64()?);
        }
        net.set_params(i, params)?;
    }
    net.set_steps(steps);
    Ok(net)
}

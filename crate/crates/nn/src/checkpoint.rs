//! `THNV` checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "THNV"
//! version      u32      (currently 1)
//! meta_len     u32      followed by meta_len bytes of UTF-8 "key=value\n" lines
//! block_count  u32
//! per block:
//!   name_len u32, name bytes
//!   input rank u8, dims u32 * rank
//!   layer_count u32
//!   per layer:
//!     kind u8, hparam_count u8, hparams u32 * hparam_count
//!     tensor_count u8, per tensor: rank u8, dims u32 * rank
//! payload      every tensor of every layer in table order, f32 LE
//! crc32        u32 over every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{NnError, Result};
use crate::gru::Gru;
use crate::layers::{Activation, Layer, LayerKind, LayerSpec};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"THNV";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerRecord {
    pub kind: LayerKind,
    pub hparams: Vec<u32>,
    pub tensors: Vec<Tensor<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub blocks: Vec<Block>,
}

fn u(v: usize) -> u32 {
    v as u32
}

impl LayerRecord {
    pub fn from_layer(layer: &Layer<f32>) -> Self {
        let hparams = match layer.spec() {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => vec![
                u(*in_ch),
                u(*out_ch),
                u(kernel[0]),
                u(kernel[1]),
                u(*stride),
                u(padding[0]),
                u(padding[1]),
            ],
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                out_hw,
            } => vec![
                u(*in_ch),
                u(*out_ch),
                u(kernel[0]),
                u(kernel[1]),
                u(*stride),
                u(padding[0]),
                u(padding[1]),
                u(out_hw[0]),
                u(out_hw[1]),
            ],
            LayerSpec::Dense { input, output } => vec![u(*input), u(*output)],
            LayerSpec::Activation(a) => vec![a.code() as u32],
            LayerSpec::Flatten => vec![],
            LayerSpec::Reshape { shape } => shape.iter().map(|v| u(*v)).collect(),
        };
        Self {
            kind: layer.spec().kind(),
            hparams,
            tensors: layer.params().to_vec(),
        }
    }

    fn hp(&self, n: usize) -> Result<Vec<usize>> {
        if self.hparams.len() != n {
            return Err(NnError::Checkpoint(format!(
                "{:?} record has {} hyper-parameters, expected {n}",
                self.kind,
                self.hparams.len()
            )));
        }
        Ok(self.hparams.iter().map(|v| *v as usize).collect())
    }

    pub fn spec(&self) -> Result<LayerSpec> {
        Ok(match self.kind {
            LayerKind::Conv => {
                let h = self.hp(7)?;
                LayerSpec::Conv {
                    in_ch: h[0],
                    out_ch: h[1],
                    kernel: [h[2], h[3]],
                    stride: h[4],
                    padding: [h[5], h[6]],
                }
            }
            LayerKind::Deconv => {
                let h = self.hp(9)?;
                LayerSpec::Deconv {
                    in_ch: h[0],
                    out_ch: h[1],
                    kernel: [h[2], h[3]],
                    stride: h[4],
                    padding: [h[5], h[6]],
                    out_hw: [h[7], h[8]],
                }
            }
            LayerKind::Dense => {
                let h = self.hp(2)?;
                LayerSpec::Dense {
                    input: h[0],
                    output: h[1],
                }
            }
            LayerKind::Activation => {
                let h = self.hp(1)?;
                LayerSpec::Activation(
                    Activation::from_code(h[0] as u8)
                        .ok_or_else(|| NnError::Checkpoint(format!("unknown activation code {}", h[0])))?,
                )
            }
            LayerKind::Flatten => LayerSpec::Flatten,
            LayerKind::Reshape => LayerSpec::Reshape {
                shape: self.hparams.iter().map(|v| *v as usize).collect(),
            },
            LayerKind::Gru => {
                return Err(NnError::Checkpoint("gru record is not a feed-forward layer".into()));
            }
        })
    }

    pub fn to_layer(&self) -> Result<Layer<f32>> {
        Layer::with_params(self.spec()?, self.tensors.clone())
    }
}

impl Gru<f32> {
    pub fn to_record(&self) -> LayerRecord {
        LayerRecord {
            kind: LayerKind::Gru,
            hparams: vec![u(self.input_size()), u(self.hidden_size())],
            tensors: self.params().to_vec(),
        }
    }

    pub fn from_record(r: &LayerRecord) -> Result<Self> {
        if r.kind != LayerKind::Gru {
            return Err(NnError::Checkpoint(format!("expected gru record, found {:?}", r.kind)));
        }
        let h = r.hp(2)?;
        Gru::with_params(h[0], h[1], r.tensors.clone())
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| NnError::Checkpoint(format!("missing metadata key `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.meta_str(key)?;
        s.parse()
            .map_err(|_| NnError::Checkpoint(format!("metadata `{key}` = `{s}` does not parse")))
    }

    pub fn block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing block `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        let mut meta = String::new();
        for (k, v) in &self.meta {
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        put_u32(&mut out, meta.len() as u32);
        out.extend_from_slice(meta.as_bytes());
        put_u32(&mut out, self.blocks.len() as u32);
        for b in &self.blocks {
            put_u32(&mut out, b.name.len() as u32);
            out.extend_from_slice(b.name.as_bytes());
            out.push(b.input_shape.len() as u8);
            for d in &b.input_shape {
                put_u32(&mut out, *d as u32);
            }
            put_u32(&mut out, b.layers.len() as u32);
            for l in &b.layers {
                out.push(l.kind.code());
                out.push(l.hparams.len() as u8);
                for h in &l.hparams {
                    put_u32(&mut out, *h);
                }
                out.push(l.tensors.len() as u8);
                for t in &l.tensors {
                    out.push(t.shape().len() as u8);
                    for d in t.shape() {
                        put_u32(&mut out, *d as u32);
                    }
                }
            }
        }
        for b in &self.blocks {
            for l in &b.layers {
                for t in &l.tensors {
                    for v in t.data() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(NnError::Checkpoint("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(NnError::CrcMismatch { stored, computed });
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| NnError::Checkpoint("metadata is not UTF-8".into()))?;
        let mut meta = BTreeMap::new();
        for line in meta_text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NnError::Checkpoint(format!("bad metadata line `{line}`")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let nblocks = r.u32()? as usize;
        let mut tables = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let nl = r.u32()? as usize;
            let name = String::from_utf8(r.take(nl)?.to_vec())
                .map_err(|_| NnError::Checkpoint("block name is not UTF-8".into()))?;
            let rank = r.u8()? as usize;
            let input_shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            let nlayers = r.u32()? as usize;
            let mut layers = Vec::with_capacity(nlayers);
            for _ in 0..nlayers {
                let code = r.u8()?;
                let kind = LayerKind::from_code(code)
                    .ok_or_else(|| NnError::Checkpoint(format!("unknown layer kind {code}")))?;
                let nh = r.u8()? as usize;
                let hparams = (0..nh).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                let nt = r.u8()? as usize;
                let mut shapes = Vec::with_capacity(nt);
                for _ in 0..nt {
                    let rk = r.u8()? as usize;
                    shapes.push((0..rk).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?);
                }
                layers.push((kind, hparams, shapes));
            }
            tables.push((name, input_shape, layers));
        }
        let mut blocks = Vec::with_capacity(nblocks);
        for (name, input_shape, layers) in tables {
            let mut recs = Vec::with_capacity(layers.len());
            for (kind, hparams, shapes) in layers {
                let mut tensors = Vec::with_capacity(shapes.len());
                for s in shapes {
                    let n: usize = s.iter().product();
                    let raw = r.take(n * 4)?;
                    let data = raw
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect();
                    tensors.push(Tensor::new(&s, data)?);
                }
                recs.push(LayerRecord { kind, hparams, tensors });
            }
            blocks.push(Block {
                name,
                input_shape,
                layers: recs,
            });
        }
        if r.pos != body.len() {
            return Err(NnError::Checkpoint(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self { meta, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Checkpoint("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::<f32>::new(
            &[1, 6, 8],
            &[
                LayerSpec::conv(1, 2, 3, 2),
                LayerSpec::Activation(Activation::LeakyRelu),
                LayerSpec::Flatten,
                LayerSpec::dense(24, 3),
                LayerSpec::Reshape { shape: vec![3, 1, 1] },
                LayerSpec::deconv(3, 1, 3, 2, [2, 2]),
            ],
            &mut rng,
        )
        .unwrap();
        let gru = Gru::<f32>::new(2, 3, &mut rng).unwrap();
        let mut ck = Checkpoint::new();
        ck.set_meta("model", "test");
        ck.set_meta("j", 32);
        ck.blocks.push(net.to_block("net"));
        ck.blocks.push(Block {
            name: "gru".into(),
            input_shape: vec![2],
            layers: vec![gru.to_record()],
        });
        ck
    }

    #[test]
    fn bytes_roundtrip_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        let net = Network::from_block(back.block("net").unwrap()).unwrap();
        assert_eq!(net.output_shape(), &[1, 2, 2]);
        assert_eq!(back.meta_parse::<usize>("j").unwrap(), 32);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = sample().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(NnError::CrcMismatch { .. })));
    }

    #[test]
    fn magic_checked() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(NnError::Checkpoint(_))));
    }
}

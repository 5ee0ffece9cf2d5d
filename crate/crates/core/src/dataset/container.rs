//! `THDS` dataset container.
//!
//! Little-endian layout:
//!
//! | field    | type       | notes                                            |
//! |----------|------------|--------------------------------------------------|
//! | magic    | `[u8; 4]`  | `THDS`                                           |
//! | version  | `u32`      | 1                                                |
//! | kind     | `u8`       | 0 = vae-frame, 1 = collision-d, 2 = collision-dprime |
//! | h, w     | `u32` x2   | frame size (0 for collision-dprime)              |
//! | j        | `u32`      | latent size (0 unless collision-dprime)          |
//! | t        | `u32`      | horizon (0 for vae-frame)                        |
//! | count    | `u64`      | number of samples                                |
//! | payload  |            | `count` samples, see below                       |
//! | crc      | `u32`      | CRC32 of every preceding byte                    |
//!
//! A frame is `h*w` `f32` depths, `h*w` `u8` validity flags and `h*w` `u16`
//! instance IDs. A collision sample is its input (frame, or `j` `f32`
//! latent means), 6 `f32` state values, `t` actions of 4 `f32`
//! (`v_x, v_y, v_z, delta`) and `t` `u8` labels.

use std::path::Path;

use super::label::{CollisionDatapoint, FrameDatapoint, LatentDatapoint};
use crate::error::{invalid, Error, Result};
use crate::io::{crc_append, crc_split, Reader};
use crate::render::DepthFrame;

const MAGIC: &[u8; 4] = b"THDS";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    VaeFrame,
    CollisionD,
    CollisionDPrime,
}

impl SampleKind {
    pub fn name(self) -> &'static str {
        match self {
            SampleKind::VaeFrame => "vae-frame",
            SampleKind::CollisionD => "collision-d",
            SampleKind::CollisionDPrime => "collision-dprime",
        }
    }

    fn code(self) -> u8 {
        match self {
            SampleKind::VaeFrame => 0,
            SampleKind::CollisionD => 1,
            SampleKind::CollisionDPrime => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(SampleKind::VaeFrame),
            1 => Ok(SampleKind::CollisionD),
            2 => Ok(SampleKind::CollisionDPrime),
            _ => Err(Error::Format(format!("unknown sample kind {c}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Frames { h: usize, w: usize, frames: Vec<DepthFrame> },
    Collision { h: usize, w: usize, t: usize, samples: Vec<FrameDatapoint> },
    Latent { j: usize, t: usize, samples: Vec<LatentDatapoint> },
}

/// Dimensions and counts of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetInfo {
    pub kind: SampleKind,
    pub h: usize,
    pub w: usize,
    pub j: usize,
    pub t: usize,
    pub count: usize,
    /// Samples with at least one positive label (collision kinds only).
    pub positives: usize,
}

impl std::fmt::Display for DatasetInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "kind={} h={} w={} j={} t={} count={} with_collision={}",
            self.kind.name(),
            self.h,
            self.w,
            self.j,
            self.t,
            self.count,
            self.positives
        )
    }
}

fn check_frame(f: &DepthFrame, h: usize, w: usize) -> Result<()> {
    if f.dims() != (h, w) {
        return Err(Error::Resolution { expected: (h, w), got: f.dims() });
    }
    Ok(())
}

fn check_sample<X>(s: &CollisionDatapoint<X>, t: usize) -> Result<()> {
    if s.actions.len() != t || s.labels.len() != t {
        return Err(invalid(format!(
            "sample with {} actions and {} labels in a T = {t} dataset",
            s.actions.len(),
            s.labels.len()
        )));
    }
    if s.labels.iter().any(|l| *l > 1) || !s.labels_monotone() {
        return Err(invalid("labels must be binary and monotone"));
    }
    Ok(())
}

impl Dataset {
    /// Frames dataset; every frame must share the first one's size.
    pub fn frames(frames: Vec<DepthFrame>) -> Result<Self> {
        let (h, w) = frames.first().ok_or_else(|| invalid("empty frame set"))?.dims();
        let d = Dataset::Frames { h, w, frames };
        d.validate()?;
        Ok(d)
    }

    pub fn collision(samples: Vec<FrameDatapoint>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| invalid("empty collision set"))?;
        let (h, w) = first.input.dims();
        let t = first.horizon();
        let d = Dataset::Collision { h, w, t, samples };
        d.validate()?;
        Ok(d)
    }

    pub fn latent(samples: Vec<LatentDatapoint>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| invalid("empty latent set"))?;
        let (j, t) = (first.input.len(), first.horizon());
        let d = Dataset::Latent { j, t, samples };
        d.validate()?;
        Ok(d)
    }

    pub fn kind(&self) -> SampleKind {
        match self {
            Dataset::Frames { .. } => SampleKind::VaeFrame,
            Dataset::Collision { .. } => SampleKind::CollisionD,
            Dataset::Latent { .. } => SampleKind::CollisionDPrime,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Frames { frames, .. } => frames.len(),
            Dataset::Collision { samples, .. } => samples.len(),
            Dataset::Latent { samples, .. } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn info(&self) -> DatasetInfo {
        let positives = |labels: &mut dyn Iterator<Item = &Vec<u8>>| labels.filter(|l| l.contains(&1)).count();
        let (h, w, j, t, positives) = match self {
            Dataset::Frames { h, w, .. } => (*h, *w, 0, 0, 0),
            Dataset::Collision { h, w, t, samples } => (*h, *w, 0, *t, positives(&mut samples.iter().map(|s| &s.labels))),
            Dataset::Latent { j, t, samples } => (0, 0, *j, *t, positives(&mut samples.iter().map(|s| &s.labels))),
        };
        DatasetInfo {
            kind: self.kind(),
            h,
            w,
            j,
            t,
            count: self.len(),
            positives,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dataset::Frames { h, w, frames } => {
                for f in frames {
                    check_frame(f, *h, *w)?;
                }
            }
            Dataset::Collision { h, w, t, samples } => {
                for s in samples {
                    check_frame(&s.input, *h, *w)?;
                    check_sample(s, *t)?;
                }
            }
            Dataset::Latent { j, t, samples } => {
                for s in samples {
                    if s.input.len() != *j {
                        return Err(invalid(format!("latent of length {} in a J = {j} dataset", s.input.len())));
                    }
                    check_sample(s, *t)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let info = self.info();
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(info.kind.code());
        for v in [info.h, info.w, info.j, info.t] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        b.extend_from_slice(&(info.count as u64).to_le_bytes());
        match self {
            Dataset::Frames { frames, .. } => frames.iter().for_each(|f| put_frame(&mut b, f)),
            Dataset::Collision { samples, .. } => {
                for s in samples {
                    put_frame(&mut b, &s.input);
                    put_tail(&mut b, s);
                }
            }
            Dataset::Latent { samples, .. } => {
                for s in samples {
                    put_f32s(&mut b, &s.input);
                    put_tail(&mut b, s);
                }
            }
        }
        crc_append(&mut b);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = crc_split(bytes)?;
        let mut r = Reader::new(body);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a THDS dataset".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let kind = SampleKind::from_code(r.u8()?)?;
        let (h, w, j, t) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let count = r.u64()? as usize;
        // Smallest possible sample is one byte; reject absurd counts before allocating.
        if count > r.remaining() {
            return Err(Error::Format(format!("sample count {count} exceeds payload")));
        }
        let d = match kind {
            SampleKind::VaeFrame => {
                let frames = (0..count).map(|_| get_frame(&mut r, h, w)).collect::<Result<_>>()?;
                Dataset::Frames { h, w, frames }
            }
            SampleKind::CollisionD => {
                let mut samples = Vec::with_capacity(count);
                for _ in 0..count {
                    let f = get_frame(&mut r, h, w)?;
                    samples.push(get_tail(&mut r, f, t)?);
                }
                Dataset::Collision { h, w, t, samples }
            }
            SampleKind::CollisionDPrime => {
                let mut samples = Vec::with_capacity(count);
                for _ in 0..count {
                    let mu = get_f32s(&mut r, j)?;
                    samples.push(get_tail(&mut r, mu, t)?);
                }
                Dataset::Latent { j, t, samples }
            }
        };
        r.finish()?;
        d.validate()?;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("dataset {}", path.display())),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn into_frames(self) -> Result<Vec<DepthFrame>> {
        match self {
            Dataset::Frames { frames, .. } => Ok(frames),
            d => Err(invalid(format!("expected a vae-frame dataset, found {}", d.kind().name()))),
        }
    }

    pub fn into_collision(self) -> Result<Vec<FrameDatapoint>> {
        match self {
            Dataset::Collision { samples, .. } => Ok(samples),
            d => Err(invalid(format!("expected a collision-d dataset, found {}", d.kind().name()))),
        }
    }

    pub fn into_latent(self) -> Result<Vec<LatentDatapoint>> {
        match self {
            Dataset::Latent { samples, .. } => Ok(samples),
            d => Err(invalid(format!("expected a collision-dprime dataset, found {}", d.kind().name()))),
        }
    }
}

fn put_f32s(b: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        b.extend_from_slice(&x.to_le_bytes());
    }
}

fn get_f32s(r: &mut Reader<'_>, n: usize) -> Result<Vec<f32>> {
    (0..n).map(|_| r.f32()).collect()
}

fn put_frame(b: &mut Vec<u8>, f: &DepthFrame) {
    put_f32s(b, f.x());
    b.extend_from_slice(f.val());
    for s in f.seg() {
        b.extend_from_slice(&s.to_le_bytes());
    }
}

fn get_frame(r: &mut Reader<'_>, h: usize, w: usize) -> Result<DepthFrame> {
    let n = h * w;
    let x = get_f32s(r, n)?;
    let val = r.take(n)?.to_vec();
    let seg = (0..n).map(|_| r.u16()).collect::<Result<_>>()?;
    DepthFrame::new(h, w, x, val, seg).map_err(|e| Error::Format(format!("stored frame: {e}")))
}

fn put_tail<X>(b: &mut Vec<u8>, s: &CollisionDatapoint<X>) {
    put_f32s(b, &s.state);
    for a in &s.actions {
        put_f32s(b, a);
    }
    b.extend_from_slice(&s.labels);
}

fn get_tail<X>(r: &mut Reader<'_>, input: X, t: usize) -> Result<CollisionDatapoint<X>> {
    let st = get_f32s(r, 6)?;
    let state = [st[0], st[1], st[2], st[3], st[4], st[5]];
    let actions = (0..t)
        .map(|_| {
            let a = get_f32s(r, 4)?;
            Ok([a[0], a[1], a[2], a[3]])
        })
        .collect::<Result<_>>()?;
    let labels = r.take(t)?.to_vec();
    Ok(CollisionDatapoint {
        input,
        state,
        actions,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(seed: u16) -> DepthFrame {
        let mut f = DepthFrame::invalid(3, 4);
        for i in 0..12 {
            if (i as u16 + seed) % 3 != 0 {
                f.set(i, 0.1 + i as f32 / 20.0, (i as u16 + seed) % 2);
            }
        }
        f
    }

    fn tail<X>(input: X) -> CollisionDatapoint<X> {
        CollisionDatapoint {
            input,
            state: [0.1, -0.2, 0.3, 0.0, 0.01, -0.02],
            actions: vec![[1.0, 0.0, 0.1, 0.2]; 3],
            labels: vec![0, 1, 1],
        }
    }

    #[test]
    fn every_kind_roundtrips() {
        let sets = [
            Dataset::frames(vec![frame(0), frame(1)]).unwrap(),
            Dataset::collision(vec![tail(frame(2)), tail(frame(3))]).unwrap(),
            Dataset::latent(vec![tail(vec![0.5, -1.0]), tail(vec![2.0, 0.0])]).unwrap(),
        ];
        for d in sets {
            let b = d.to_bytes();
            let back = Dataset::from_bytes(&b).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.to_bytes(), b);
        }
    }

    #[test]
    fn corruption_detected() {
        let mut b = Dataset::frames(vec![frame(0)]).unwrap().to_bytes();
        b[30] ^= 1;
        assert!(matches!(Dataset::from_bytes(&b), Err(Error::Crc { .. })));
    }

    #[test]
    fn mixed_dims_rejected() {
        assert!(Dataset::frames(vec![frame(0), DepthFrame::invalid(2, 2)]).is_err());
        let mut bad = tail(frame(0));
        bad.labels = vec![1, 0, 0];
        assert!(Dataset::collision(vec![bad]).is_err());
    }

    #[test]
    fn info_counts() {
        let d = Dataset::latent(vec![tail(vec![0.0]), {
            let mut s = tail(vec![1.0]);
            s.labels = vec![0, 0, 0];
            s
        }])
        .unwrap();
        let i = d.info();
        assert_eq!((i.j, i.t, i.count, i.positives), (1, 3, 2, 1));
    }
}

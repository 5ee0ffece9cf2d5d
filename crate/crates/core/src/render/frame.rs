//! The `{x, x_val, x_seg}` depth-frame triple and min-pool downsampling.

use crate::error::{invalid, Error, Result};

/// Normalized depth grid with validity and semantic-instance masks.
///
/// Invariants: `val == 0` implies `x == 0` and `seg == 0`; valid depths lie
/// in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthFrame {
    h: usize,
    w: usize,
    x: Vec<f32>,
    val: Vec<u8>,
    seg: Vec<u16>,
}

impl DepthFrame {
    pub fn new(h: usize, w: usize, x: Vec<f32>, val: Vec<u8>, seg: Vec<u16>) -> Result<Self> {
        let f = Self { h, w, x, val, seg };
        f.validate()?;
        Ok(f)
    }

    /// Frame with every pixel invalid.
    pub fn invalid(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            x: vec![0.0; h * w],
            val: vec![0; h * w],
            seg: vec![0; h * w],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h * self.w;
        if n == 0 || self.x.len() != n || self.val.len() != n || self.seg.len() != n {
            return Err(invalid(format!(
                "frame {}x{} with buffers {}/{}/{}",
                self.h,
                self.w,
                self.x.len(),
                self.val.len(),
                self.seg.len()
            )));
        }
        for i in 0..n {
            let ok = match self.val[i] {
                0 => self.x[i] == 0.0 && self.seg[i] == 0,
                1 => self.x[i] > 0.0 && self.x[i] <= 1.0,
                _ => false,
            };
            if !ok {
                return Err(invalid(format!(
                    "pixel {i}: x = {}, val = {}, seg = {}",
                    self.x[i], self.val[i], self.seg[i]
                )));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn x(&self) -> &[f32] {
        &self.x
    }

    pub fn val(&self) -> &[u8] {
        &self.val
    }

    pub fn seg(&self) -> &[u16] {
        &self.seg
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.val[i] == 1
    }

    pub fn valid_count(&self) -> usize {
        self.val.iter().filter(|v| **v == 1).count()
    }

    pub fn semantic_count(&self) -> usize {
        self.seg.iter().filter(|s| **s > 0).count()
    }

    /// Sets pixel `i` valid at depth `x` with instance `seg`.
    pub fn set(&mut self, i: usize, x: f32, seg: u16) {
        self.x[i] = x;
        self.val[i] = 1;
        self.seg[i] = seg;
    }

    pub fn invalidate(&mut self, i: usize) {
        self.x[i] = 0.0;
        self.val[i] = 0;
        self.seg[i] = 0;
    }

    /// Drops all semantic labels.
    pub fn without_semantics(mut self) -> Self {
        self.seg.iter_mut().for_each(|s| *s = 0);
        self
    }

    /// Left-right mirror image.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.h {
            for c in 0..self.w {
                let a = r * self.w + c;
                let b = r * self.w + (self.w - 1 - c);
                out.x[a] = self.x[b];
                out.val[a] = self.val[b];
                out.seg[a] = self.seg[b];
            }
        }
        out
    }

    /// Min-pool downsampling: the nearest valid depth in each source block
    /// survives, validity is any-valid, semantics come from the min-depth
    /// source pixel. Non-integer ratios fall back to nearest-neighbour.
    pub fn downsample(&self, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || h > self.h || w > self.w {
            return Err(Error::InvalidInput(format!(
                "downsample {}x{} -> {h}x{w}: target must be non-empty and no larger",
                self.h, self.w
            )));
        }
        if (h, w) == (self.h, self.w) {
            return Ok(self.clone());
        }
        let mut out = DepthFrame::invalid(h, w);
        if self.h % h == 0 && self.w % w == 0 {
            let (fh, fw) = (self.h / h, self.w / w);
            for r in 0..h {
                for c in 0..w {
                    let mut best: Option<usize> = None;
                    for dr in 0..fh {
                        for dc in 0..fw {
                            let i = (r * fh + dr) * self.w + c * fw + dc;
                            if self.val[i] == 1 && best.map_or(true, |b| self.x[i] < self.x[b]) {
                                best = Some(i);
                            }
                        }
                    }
                    if let Some(b) = best {
                        out.set(r * w + c, self.x[b], self.seg[b]);
                    }
                }
            }
        } else {
            for r in 0..h {
                let sr = ((r as f64 + 0.5) * self.h as f64 / h as f64) as usize;
                for c in 0..w {
                    let sc = ((c as f64 + 0.5) * self.w as f64 / w as f64) as usize;
                    let i = sr.min(self.h - 1) * self.w + sc.min(self.w - 1);
                    if self.val[i] == 1 {
                        out.set(r * w + c, self.x[i], self.seg[i]);
                    }
                }
            }
        }
        Ok(out)
    }
}

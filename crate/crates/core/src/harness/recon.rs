//! Reconstruction error of the compression methods on clean and corrupted
//! frames.
//!
//! Per image, the error is the sum of squared differences between the
//! normalized input and its reconstruction over a pixel set; the reported
//! value is the mean over images. The whole-image set is every valid pixel.
//! The semantic set is every valid pixel with a non-zero instance label, and
//! its mean is taken over the images that have at least one such pixel.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::fft::fft_topk_reconstruct;
use crate::render::DepthFrame;
use crate::vae::Vae;

const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Clean,
    Corrupted,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Clean => "clean",
            Domain::Corrupted => "corrupted",
        }
    }
}

/// A compression method under evaluation.
#[derive(Clone, Copy)]
pub enum Codec<'a> {
    Fft { k: usize },
    Vae { name: &'a str, vae: &'a Vae },
}

impl Codec<'_> {
    pub fn name(&self) -> String {
        match self {
            Codec::Fft { k } => format!("fft-top{k}"),
            Codec::Vae { name, .. } => name.to_string(),
        }
    }

    /// Reconstructions of `frames`, row-major per frame.
    pub fn reconstruct(&self, frames: &[DepthFrame]) -> Result<Vec<Vec<f64>>> {
        match self {
            Codec::Fft { k } => frames
                .iter()
                .map(|f| {
                    let (h, w) = f.dims();
                    let grid: Vec<f64> = f.x().iter().map(|v| *v as f64).collect();
                    fft_topk_reconstruct(&grid, h, w, *k)
                })
                .collect(),
            Codec::Vae { vae, .. } => {
                let mut out = Vec::with_capacity(frames.len());
                for chunk in frames.chunks(CHUNK) {
                    let refs: Vec<&DepthFrame> = chunk.iter().collect();
                    let mus: Vec<Vec<f32>> = vae.encode_batch(&refs)?.into_iter().map(|c| c.mu).collect();
                    for r in vae.decode_batch(&mus)? {
                        out.push(r.into_iter().map(|v| v as f64).collect());
                    }
                }
                Ok(out)
            }
        }
    }
}

/// `(whole-image error, semantic error if the frame has semantic pixels)`.
pub fn image_errors(frame: &DepthFrame, recon: &[f64]) -> Result<(f64, Option<f64>)> {
    if recon.len() != frame.len() {
        return Err(invalid(format!("reconstruction of {} pixels for a {}-pixel frame", recon.len(), frame.len())));
    }
    let mut whole = 0.0;
    let mut sem = 0.0;
    let mut sem_pixels = 0usize;
    for (i, r) in recon.iter().enumerate() {
        if !frame.is_valid(i) {
            continue;
        }
        let d = frame.x()[i] as f64 - r;
        whole += d * d;
        if frame.seg()[i] > 0 {
            sem += d * d;
            sem_pixels += 1;
        }
    }
    Ok((whole, (sem_pixels > 0).then_some(sem)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconRow {
    pub method: String,
    pub domain: Domain,
    pub images: usize,
    pub whole: f64,
    /// Images with at least one semantic pixel.
    pub semantic_images: usize,
    pub semantic: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconReport {
    pub rows: Vec<ReconRow>,
}

impl ReconReport {
    pub fn get(&self, method: &str, domain: Domain) -> Option<&ReconRow> {
        self.rows.iter().find(|r| r.method == method && r.domain == domain)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,domain,images,whole_image_error,semantic_images,semantic_error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                r.domain.name(),
                r.images,
                r.whole,
                r.semantic_images,
                r.semantic
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

impl fmt::Display for ReconReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "error = per-image sum of squared normalized depth error, mean over images")?;
        writeln!(f, "{:<14} {:<10} {:>7} {:>14} {:>10} {:>14}", "method", "domain", "images", "whole-image", "sem-imgs", "semantic")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<14} {:<10} {:>7} {:>14.3} {:>10} {:>14.3}",
                r.method,
                r.domain.name(),
                r.images,
                r.whole,
                r.semantic_images,
                r.semantic
            )?;
        }
        Ok(())
    }
}

/// Evaluates every codec on every domain's frames.
pub fn eval_reconstruction(domains: &[(Domain, &[DepthFrame])], codecs: &[Codec<'_>]) -> Result<ReconReport> {
    let mut rows = Vec::new();
    for codec in codecs {
        for (domain, frames) in domains {
            if frames.is_empty() {
                return Err(invalid(format!("no {} frames to evaluate", domain.name())));
            }
            let recons = codec.reconstruct(frames)?;
            let mut whole = 0.0;
            let mut sem = 0.0;
            let mut sem_n = 0usize;
            for (f, r) in frames.iter().zip(&recons) {
                let (w, s) = image_errors(f, r)?;
                whole += w;
                if let Some(s) = s {
                    sem += s;
                    sem_n += 1;
                }
            }
            rows.push(ReconRow {
                method: codec.name(),
                domain: *domain,
                images: frames.len(),
                whole: whole / frames.len() as f64,
                semantic_images: sem_n,
                semantic: if sem_n > 0 { sem / sem_n as f64 } else { 0.0 },
            });
        }
    }
    Ok(ReconReport { rows })
}

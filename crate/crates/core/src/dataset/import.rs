//! Import of externally recorded depth images stored as PGM files.
//!
//! Each frame is `<stem>_depth.pgm` (16-bit millimetres) with an optional
//! `<stem>_seg.pgm` whose non-zero values are used as instance IDs. A depth
//! of 0, the file's maxval, or beyond the maximum range marks the pixel
//! invalid.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::render::{mm_to_depth, DepthFrame, Pgm};

#[derive(Clone, Debug, Default)]
pub struct ImportReport {
    pub frames: Vec<DepthFrame>,
    /// Files that were skipped, with the reason.
    pub rejected: Vec<(PathBuf, String)>,
}

/// Frame from a depth PGM and an optional label PGM of the same size.
pub fn frame_from_pgm(depth: &Pgm, seg: Option<&Pgm>, max_range: f64) -> Result<DepthFrame> {
    let (h, w) = (depth.height, depth.width);
    if let Some(s) = seg {
        if (s.height, s.width) != (h, w) {
            return Err(Error::Resolution {
                expected: (h, w),
                got: (s.height, s.width),
            });
        }
    }
    let mut f = DepthFrame::invalid(h, w);
    for i in 0..h * w {
        let mm = depth.data[i];
        if mm == 0 || mm >= depth.maxval {
            continue;
        }
        let x = mm_to_depth(mm, max_range);
        if x > 1.0 {
            continue;
        }
        f.set(i, x, seg.map_or(0, |s| s.data[i]));
    }
    Ok(f)
}

/// Imports every `*_depth.pgm` in `dir` in file-name order. Frames whose
/// size differs from `expected` (or from the first accepted frame when
/// `expected` is `None`) are rejected and listed in the report.
pub fn import_depth_images(dir: &Path, max_range: f64, expected: Option<(usize, usize)>) -> Result<ImportReport> {
    let entries = std::fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("image directory {}", dir.display())),
        _ => Error::Io(e),
    })?;
    let mut depth_files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_depth.pgm")))
        .collect();
    depth_files.sort();
    let mut report = ImportReport::default();
    let mut dims = expected;
    for path in depth_files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let seg_path = path.with_file_name(name.replace("_depth.pgm", "_seg.pgm"));
        let loaded = Pgm::read(&path).and_then(|d| {
            let s = if seg_path.exists() { Some(Pgm::read(&seg_path)?) } else { None };
            Ok((d, s))
        });
        let (depth, seg) = match loaded {
            Ok(v) => v,
            Err(e) => {
                report.rejected.push((path, e.to_string()));
                continue;
            }
        };
        let got = (depth.height, depth.width);
        match dims {
            Some(want) if want != got => {
                report
                    .rejected
                    .push((path, format!("resolution {}x{}, expected {}x{}", got.0, got.1, want.0, want.1)));
                continue;
            }
            None => dims = Some(got),
            _ => {}
        }
        match frame_from_pgm(&depth, seg.as_ref(), max_range) {
            Ok(f) => report.frames.push(f),
            Err(e) => report.rejected.push((path, e.to_string())),
        }
    }
    Ok(report)
}

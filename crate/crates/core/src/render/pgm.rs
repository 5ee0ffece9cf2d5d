//! Binary (P5) PGM reading and writing, 8- and 16-bit.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl Pgm {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.data.iter().map(|v| *v as u8));
        } else {
            for v in &self.data {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse(BufReader::new(f)).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse<R: BufRead>(mut r: R) -> Result<Self> {
        let mut fields = Vec::new();
        let mut tok = String::new();
        while fields.len() < 4 {
            let mut b = [0u8; 1];
            if r.read(&mut b)? == 0 {
                return Err(Error::Format("truncated PGM header".into()));
            }
            let ch = b[0] as char;
            if ch == '#' && tok.is_empty() {
                let mut skip = String::new();
                r.read_line(&mut skip)?;
                continue;
            }
            if ch.is_ascii_whitespace() {
                if !tok.is_empty() {
                    fields.push(std::mem::take(&mut tok));
                }
            } else {
                tok.push(ch);
            }
        }
        if fields[0] != "P5" {
            return Err(Error::Format(format!("unsupported magic {:?}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad header number {s:?}")));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Format(format!("maxval {maxval} out of range")));
        }
        let n = width * height;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let mut buf = vec![0u8; n * bpp];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("expected {} pixel bytes", n * bpp)))?;
        let data = if bpp == 1 {
            buf.into_iter().map(u16::from).collect()
        } else {
            buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_both_depths() {
        for maxval in [255u16, 65535] {
            let p = Pgm {
                width: 3,
                height: 2,
                maxval,
                data: vec![0, 1, 2, 200, maxval, 7],
            };
            let q = Pgm::parse(std::io::Cursor::new(p.to_bytes())).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn header_comments_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x05\x06".to_vec();
        let p = Pgm::parse(std::io::Cursor::new(bytes)).unwrap();
        assert_eq!(p.data, vec![5, 6]);
    }

    #[test]
    fn truncated_rejected() {
        let bytes = b"P5\n2 2\n255\n\x05".to_vec();
        assert!(Pgm::parse(std::io::Cursor::new(bytes)).is_err());
    }
}

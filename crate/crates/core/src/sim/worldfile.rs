//! Versioned binary world files and a plain-text summary.
//!
//! Layout (little-endian):
//!
//! | field | type |
//! |---|---|
//! | magic `THWD` | 4 bytes |
//! | version | u32 |
//! | has bounds | u8, then floor, ceiling as f64 |
//! | section count | u32, then x0, y0, x1, y1 as f64 each |
//! | obstacle count | u32 |
//! | per obstacle | kind u8 (0 cylinder, 1 box), cx, cy, z0, z1, a, b, c as f64, instance u16 |
//! | crc32 of all preceding bytes | u32 |
//!
//! For cylinders `a` is the radius and `b = c = 0`; for boxes `a, b` are
//! half extents and `c` the yaw.

use std::fmt::Write as _;
use std::path::Path;

use super::world::{Bounds, Obstacle, Rect, Shape, World};
use crate::error::{Error, Result};
use crate::io::{crc_append, crc_split, Reader};

const MAGIC: &[u8; 4] = b"THWD";
const VERSION: u32 = 1;

pub fn world_to_bytes(world: &World) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    match world.bounds() {
        Some(bd) => {
            b.push(1);
            b.extend_from_slice(&bd.floor.to_le_bytes());
            b.extend_from_slice(&bd.ceiling.to_le_bytes());
        }
        None => b.push(0),
    }
    b.extend_from_slice(&(world.sections().len() as u32).to_le_bytes());
    for s in world.sections() {
        for v in [s.x0, s.y0, s.x1, s.y1] {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b.extend_from_slice(&(world.obstacles().len() as u32).to_le_bytes());
    for o in world.obstacles() {
        let (kind, a, bb, c) = match o.shape {
            Shape::Cylinder { radius } => (0u8, radius, 0.0, 0.0),
            Shape::Box { half, yaw } => (1u8, half[0], half[1], yaw),
        };
        b.push(kind);
        for v in [o.center[0], o.center[1], o.z0, o.z1, a, bb, c] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&o.instance.to_le_bytes());
    }
    crc_append(&mut b);
    b
}

pub fn world_from_bytes(bytes: &[u8]) -> Result<World> {
    let body = crc_split(bytes)?;
    let mut r = Reader::new(body);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a world file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported world version {version}")));
    }
    let bounds = match r.u8()? {
        0 => None,
        1 => Some(Bounds {
            floor: r.f64()?,
            ceiling: r.f64()?,
        }),
        k => return Err(Error::Format(format!("bad bounds flag {k}"))),
    };
    let ns = r.u32()? as usize;
    let mut sections = Vec::with_capacity(ns.min(1024));
    for _ in 0..ns {
        sections.push(Rect::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?));
    }
    let no = r.u32()? as usize;
    let mut obstacles = Vec::with_capacity(no.min(1 << 20));
    for _ in 0..no {
        let kind = r.u8()?;
        let v: Vec<f64> = (0..7).map(|_| r.f64()).collect::<Result<_>>()?;
        let instance = r.u16()?;
        let shape = match kind {
            0 => Shape::Cylinder { radius: v[4] },
            1 => Shape::Box {
                half: [v[4], v[5]],
                yaw: v[6],
            },
            k => return Err(Error::Format(format!("bad obstacle kind {k}"))),
        };
        obstacles.push(Obstacle {
            center: [v[0], v[1]],
            z0: v[2],
            z1: v[3],
            shape,
            instance,
        });
    }
    r.finish()?;
    Ok(World::new(obstacles, bounds, sections))
}

pub fn save_world(world: &World, path: &Path) -> Result<()> {
    std::fs::write(path, world_to_bytes(world))?;
    Ok(())
}

pub fn load_world(path: &Path) -> Result<World> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("world file {}", path.display())),
        _ => Error::Io(e),
    })?;
    world_from_bytes(&bytes)
}

/// Human-readable per-section obstacle counts.
pub fn world_summary(world: &World) -> String {
    let mut s = String::new();
    let thin = world.obstacles().iter().filter(|o| o.is_thin()).count();
    let _ = writeln!(s, "obstacles: {} ({} thin, {} large)", world.obstacles().len(), thin, world.obstacles().len() - thin);
    if let Some(b) = world.bounds() {
        let _ = writeln!(s, "bounds: floor {:.2} m, ceiling {:.2} m", b.floor, b.ceiling);
    }
    for (i, r) in world.sections().iter().enumerate() {
        let inside: Vec<_> = world.obstacles().iter().filter(|o| r.contains(o.center)).collect();
        let t = inside.iter().filter(|o| o.is_thin()).count();
        let _ = writeln!(
            s,
            "section {}: x [{:.1}, {:.1}] y [{:.1}, {:.1}]: {} large, {} thin",
            i + 1,
            r.x0,
            r.x1,
            r.y0,
            r.y1,
            inside.len() - t,
            t
        );
    }
    s
}

//! Model checkpoint files.

use std::path::Path;

use thinnav_nn::Checkpoint;

use crate::cpn::Cpn;
use crate::error::{Error, Result};
use crate::vae::Vae;

fn read_checkpoint(path: &Path, what: &str) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("{what} checkpoint {}", path.display())),
        _ => Error::Io(e),
    })?;
    Ok(Checkpoint::from_bytes(&bytes)?)
}

pub fn save_vae(vae: &Vae, path: &Path) -> Result<()> {
    std::fs::write(path, vae.to_checkpoint().to_bytes())?;
    Ok(())
}

pub fn load_vae(path: &Path) -> Result<Vae> {
    Vae::from_checkpoint(&read_checkpoint(path, "vae")?)
}

pub fn save_cpn(cpn: &Cpn, path: &Path) -> Result<()> {
    std::fs::write(path, cpn.to_checkpoint().to_bytes())?;
    Ok(())
}

pub fn load_cpn(path: &Path) -> Result<Cpn> {
    Cpn::from_checkpoint(&read_checkpoint(path, "cpn")?)
}

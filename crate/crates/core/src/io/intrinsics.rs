//! Pinhole intrinsics stored as TOML:
//! `fx`, `fy`, `cx`, `cy`, `width`, `height`.

use std::fs;
use std::path::Path;

use crate::geometry::Intrinsics;
use crate::{Error, Result};

pub fn read(path: &Path) -> Result<Intrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let intr: Intrinsics = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    intr.validate()?;
    Ok(intr)
}

pub fn write(path: &Path, intr: &Intrinsics) -> Result<()> {
    let text = toml::to_string(intr).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.toml");
        let intr = Intrinsics::from_fov(320, 240, 45.0);
        write(&path, &intr).unwrap();
        assert_eq!(read(&path).unwrap(), intr);
    }

    #[test]
    fn rejects_missing_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.toml");
        fs::write(&path, "fx = 1.0\n").unwrap();
        assert!(matches!(read(&path), Err(Error::Format { .. })));
    }
}

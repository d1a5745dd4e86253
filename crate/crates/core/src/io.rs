//! JSON files on disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Compact JSON with a trailing newline. Floats use the shortest text that
/// parses back to the same value.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

/// One JSON-lines record.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    to_json_string(value)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// `*.json` files directly inside `dir`, sorted by name.
pub fn json_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_assembly, Family, FamilyParams};

    #[test]
    fn sample_round_trips_exactly() {
        let s = synth_assembly(&FamilyParams::default_for(Family::FlangeRing)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        write_json(&p, &s).unwrap();
        let back: crate::synth::AssemblySample = read_json(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(json_files(dir.path()).unwrap(), vec![p]);
    }
}

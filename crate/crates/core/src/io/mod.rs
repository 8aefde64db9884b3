//! Run configuration, JSON artifacts, trajectory CSVs and run manifests.

mod config;
mod csv;
mod manifest;
mod starts;

pub use config::RunConfig;
pub use csv::{write_mean_norm_csv, write_summary_csv, write_trajectory_csv, SummaryRow};
pub use manifest::{sha256_hex, RunManifest};
pub use starts::{boundary_starts, random_starts};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::Region;

/// Pretty JSON with shortest round-trip floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// A region given inline as JSON or as a path to a JSON file.
pub fn parse_region(spec: &str) -> Result<Region> {
    let trimmed = spec.trim_start();
    if trimmed.starts_with('{') {
        Ok(serde_json::from_str(trimmed)?)
    } else {
        read_json(Path::new(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_inline_and_file() {
        let inline = r#"{"kind":"box","lower":[-5.0,5.0],"upper":[5.0,6.25]}"#;
        let r = parse_region(inline).unwrap();
        assert_eq!(r, Region::boxed(vec![-5.0, 5.0], vec![5.0, 6.25]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_json(&p, &r).unwrap();
        assert_eq!(parse_region(p.to_str().unwrap()).unwrap(), r);
    }
}

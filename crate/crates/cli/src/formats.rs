//! JSON case and partition file formats.
//!
//! Case schema:
//! `{"buses":[{"id":1,"injection":0.0},...],"branches":[{"from":1,"to":2,"x":0.05917},...],"slack":1}`
//!
//! Partition schema: `{"areas":[[6,11,12,13],...]}` with bus ids.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dse_core::{Branch, Bus, Network, Partition};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] dse_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct BusDto {
    pub id: usize,
    pub injection: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BranchDto {
    pub from: usize,
    pub to: usize,
    pub x: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseFile {
    pub buses: Vec<BusDto>,
    pub branches: Vec<BranchDto>,
    pub slack: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PartitionFile {
    pub areas: Vec<Vec<usize>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a network case file.
pub fn load_case(path: &Path) -> Result<Network> {
    let case: CaseFile = read_json(path)?;
    let buses = case
        .buses
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            injection: b.injection,
        })
        .collect();
    let branches = case
        .branches
        .into_iter()
        .map(|b| Branch {
            from: b.from,
            to: b.to,
            reactance: b.x,
        })
        .collect();
    Ok(Network::new(buses, branches, case.slack)?)
}

/// Loads and validates a partition file.
pub fn load_partition(path: &Path) -> Result<Partition> {
    let file: PartitionFile = read_json(path)?;
    Ok(Partition::new(file.areas)?)
}

/// Writes a partition as pretty-printed JSON.
pub fn save_partition(path: &Path, partition: &Partition) -> Result<()> {
    let file = PartitionFile {
        areas: partition.areas().to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).expect("serializable");
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
    }

    #[test]
    fn bundled_cases_load() {
        let n14 = load_case(&data("ieee14.json")).unwrap();
        assert_eq!(n14.bus_count(), 14);
        assert_eq!(n14.branches().len(), 20);
        let n118 = load_case(&data("ieee118.json")).unwrap();
        assert_eq!(n118.bus_count(), 118);
        assert_eq!(n118.branches().len(), 186);
    }

    #[test]
    fn bundled_partitions_cover_their_cases() {
        let n14 = load_case(&data("ieee14.json")).unwrap();
        for name in ["ieee14_case1.json", "ieee14_case2.json"] {
            let p = load_partition(&data(name)).unwrap();
            p.validate_for(&n14).unwrap();
            assert_eq!(p.area_count(), 4);
        }
        let n118 = load_case(&data("ieee118.json")).unwrap();
        let p = load_partition(&data("ieee118_areas6.json")).unwrap();
        p.validate_for(&n118).unwrap();
        assert_eq!(p.area_count(), 6);
    }

    #[test]
    fn partition_roundtrip() {
        let p = Partition::new(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_partition(&path, &p).unwrap();
        let back = load_partition(&path).unwrap();
        assert_eq!(back.areas(), p.areas());
    }

    #[test]
    fn malformed_json_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{").unwrap();
        let err = load_case(&path).unwrap_err();
        assert!(format!("{err}").contains("bad.json"));
    }
}

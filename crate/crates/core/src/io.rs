//! JSON files for datasets and single points.
//!
//! Dataset layout:
//!
//! ```json
//! {"dimension": 2,
//!  "atoms": [{"mean": [0.0, 0.0], "cov": [1.0, 0.0, 0.0, 1.0]}],
//!  "weights": [1.0],
//!  "metadata": {"spec": null, "seed": null}}
//! ```
//!
//! Covariances are row-major. Floats are written in shortest round-trip
//! form, so a write/read cycle is bitwise exact.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{BwError, Result};
use crate::geometry::{GaussianMeasure, SpdMatrix};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    /// Generator description, free-form.
    #[serde(default)]
    pub spec: Option<serde_json::Value>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub dimension: usize,
    pub atoms: Vec<PointRecord>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub metadata: DatasetMetadata,
}

/// A single Gaussian, e.g. a reference point or a solver output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    pub dimension: usize,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    pub cov: Vec<f64>,
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl PointRecord {
    pub fn from_measure(g: &GaussianMeasure) -> Self {
        Self {
            mean: g.mean.as_slice().to_vec(),
            cov: row_major(g.cov.matrix()),
        }
    }

    fn to_measure(&self, d: usize, index: usize) -> Result<GaussianMeasure> {
        if self.mean.len() != d || self.cov.len() != d * d {
            return Err(BwError::Format(format!(
                "atom {index}: expected mean of length {d} and cov of length {}, found {} and {}",
                d * d,
                self.mean.len(),
                self.cov.len()
            )));
        }
        let cov = SpdMatrix::from_row_slice(d, &self.cov)
            .map_err(|e| BwError::Format(format!("atom {index}: {e}")))?;
        GaussianMeasure::new(DVector::from_vec(self.mean.clone()), cov)
    }
}

impl DatasetFile {
    pub fn from_distribution(p: &DiscreteDistribution, metadata: DatasetMetadata) -> Self {
        Self {
            dimension: p.dim(),
            atoms: p.atoms().iter().map(PointRecord::from_measure).collect(),
            weights: p.weights().to_vec(),
            metadata,
        }
    }

    pub fn to_distribution(&self) -> Result<DiscreteDistribution> {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| a.to_measure(self.dimension, i))
            .collect::<Result<Vec<_>>>()?;
        DiscreteDistribution::new(atoms, self.weights.clone())
    }
}

impl PointFile {
    pub fn from_measure(g: &GaussianMeasure) -> Self {
        Self {
            dimension: g.dim(),
            mean: Some(g.mean.as_slice().to_vec()),
            cov: row_major(g.cov.matrix()),
        }
    }

    pub fn to_measure(&self) -> Result<GaussianMeasure> {
        let d = self.dimension;
        let mean = self.mean.clone().unwrap_or_else(|| vec![0.0; d]);
        PointRecord { mean, cov: self.cov.clone() }.to_measure(d, 0)
    }
}

fn with_path(path: &Path, e: serde_json::Error) -> BwError {
    BwError::Format(format!("{}: {e}", path.display()))
}

pub fn parse_dataset(text: &str) -> Result<(DiscreteDistribution, DatasetMetadata)> {
    let file: DatasetFile = serde_json::from_str(text)?;
    Ok((file.to_distribution()?, file.metadata))
}

pub fn dataset_to_string(p: &DiscreteDistribution, metadata: DatasetMetadata) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DatasetFile::from_distribution(p, metadata))?)
}

pub fn read_dataset(path: &Path) -> Result<(DiscreteDistribution, DatasetMetadata)> {
    let text = fs::read_to_string(path)?;
    let file: DatasetFile = serde_json::from_str(&text).map_err(|e| with_path(path, e))?;
    let p = file
        .to_distribution()
        .map_err(|e| BwError::Format(format!("{}: {e}", path.display())))?;
    Ok((p, file.metadata))
}

pub fn write_dataset(path: &Path, p: &DiscreteDistribution, metadata: DatasetMetadata) -> Result<()> {
    fs::write(path, dataset_to_string(p, metadata)?)?;
    Ok(())
}

pub fn read_point(path: &Path) -> Result<GaussianMeasure> {
    let text = fs::read_to_string(path)?;
    let file: PointFile = serde_json::from_str(&text).map_err(|e| with_path(path, e))?;
    file.to_measure()
        .map_err(|e| BwError::Format(format!("{}: {e}", path.display())))
}

pub fn write_point(path: &Path, g: &GaussianMeasure) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&PointFile::from_measure(g))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, GenSpec};

    #[test]
    fn bitwise_round_trip() {
        let spec = GenSpec::new(2, 9, 4, 0.1, 7.0, 42);
        let p = generate(&spec).unwrap();
        let meta = DatasetMetadata {
            spec: Some(serde_json::to_value(&spec).unwrap()),
            seed: Some(42),
        };
        let text = dataset_to_string(&p, meta.clone()).unwrap();
        let (q, meta2) = parse_dataset(&text).unwrap();
        assert_eq!(meta, meta2);
        for (a, b) in p.atoms().iter().zip(q.atoms()) {
            let bits = |m: &DMatrix<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.cov.matrix()), bits(b.cov.matrix()));
            assert_eq!(a.mean, b.mean);
        }
        assert_eq!(p.weights(), q.weights());
    }

    #[test]
    fn row_major_layout() {
        let text = r#"{"dimension": 2, "atoms": [{"mean": [1.0, -1.0], "cov": [2.0, 0.5, 0.5, 1.0]}],
                       "weights": [1.0]}"#;
        let (p, meta) = parse_dataset(text).unwrap();
        assert_eq!(meta, DatasetMetadata::default());
        assert_eq!(p.covariance(0).matrix()[(0, 1)], 0.5);
        assert_eq!(p.atoms()[0].mean[1], -1.0);
    }

    #[test]
    fn malformed_inputs() {
        let bad_len = r#"{"dimension": 2, "atoms": [{"mean": [0.0, 0.0], "cov": [1.0, 0.0, 0.0]}], "weights": [1.0]}"#;
        assert!(matches!(parse_dataset(bad_len), Err(BwError::Format(_))));
        let indefinite = r#"{"dimension": 1, "atoms": [{"mean": [0.0], "cov": [-1.0]}], "weights": [1.0]}"#;
        assert!(parse_dataset(indefinite).is_err());
        let bad_weights = r#"{"dimension": 1, "atoms": [{"mean": [0.0], "cov": [1.0]}], "weights": [0.5]}"#;
        assert!(parse_dataset(bad_weights).is_err());
        assert!(matches!(parse_dataset("{"), Err(BwError::Json(_))));
    }

    #[test]
    fn point_files() {
        let dir = std::env::temp_dir().join(format!("bwopt-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("point.json");
        let g = GaussianMeasure::new(
            DVector::from_vec(vec![0.1, 0.2]),
            SpdMatrix::from_row_slice(2, &[1.0, 0.1, 0.1, 3.0]).unwrap(),
        )
        .unwrap();
        write_point(&path, &g).unwrap();
        assert_eq!(read_point(&path).unwrap(), g);
        fs::write(&path, r#"{"dimension": 1, "cov": [2.0]}"#).unwrap();
        assert!(read_point(&path).unwrap().is_centered());
        fs::write(&path, "{\n  \"dimension\": 1,\n  oops\n}").unwrap();
        let msg = read_point(&path).unwrap_err().to_string();
        assert!(msg.contains("point.json") && msg.contains("line 3"), "{msg}");
        fs::remove_dir_all(&dir).unwrap();
    }
}

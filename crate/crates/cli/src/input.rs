//! Dataset sources, generator specs and seed derivation.

use std::path::{Path, PathBuf};

use bwopt::datasets::{generate, generate_known_barycenter, GenSpec};
use bwopt::io::{read_dataset, read_point, DatasetMetadata};
use bwopt::{BwError, DiscreteDistribution, GaussianMeasure};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::exit::{CliError, CliResult};

/// Label under which `--gen` datasets draw their seed, shared by every
/// command so one spec and seed give the same dataset everywhere.
pub const DATASET_LABEL: &str = "dataset";

/// Sub-seed for one labeled consumer of randomness. Labels are fixed
/// strings, so a new command never shifts the stream of an existing one.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"bwopt:");
    h.update(label.as_bytes());
    h.update(b":");
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// A `--gen` argument: `method=1,n=50,d=5,alpha=1,beta=1000[,m=2][,seed=7]`,
/// or `method=known,n=100,d=20,delta=0.1[,seed=7]` for a dataset whose
/// barycenter is the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum GenArg {
    Method { spec: GenSpec, explicit_seed: bool },
    Known { n: usize, d: usize, delta: f64, seed: Option<u64> },
}

fn field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value for {key}: {value:?}"))
}

impl std::str::FromStr for GenArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut method = None;
        let (mut n, mut d, mut m, mut seed) = (None, None, None, None);
        let (mut alpha, mut beta, mut delta) = (None, None, None);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found {part:?}"))?;
            match key.trim() {
                "method" => method = Some(value.trim().to_string()),
                "n" => n = Some(field::<usize>(key, value)?),
                "d" => d = Some(field::<usize>(key, value)?),
                "m" => m = Some(field::<usize>(key, value)?),
                "seed" => seed = Some(field::<u64>(key, value)?),
                "alpha" => alpha = Some(field::<f64>(key, value)?),
                "beta" => beta = Some(field::<f64>(key, value)?),
                "delta" => delta = Some(field::<f64>(key, value)?),
                other => return Err(format!("unknown generator key {other:?}")),
            }
        }
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| format!("generator spec needs {k}="));
        let method = method.ok_or("generator spec needs method=")?;
        if method == "known" {
            return Ok(GenArg::Known {
                n: need(n, "n")?,
                d: need(d, "d")?,
                delta: delta.ok_or("method=known needs delta=")?,
                seed,
            });
        }
        let method: u8 = field("method", &method)?;
        let mut spec = GenSpec::new(
            method,
            need(n, "n")?,
            need(d, "d")?,
            alpha.ok_or("generator spec needs alpha=")?,
            beta.ok_or("generator spec needs beta=")?,
            seed.unwrap_or(0),
        );
        spec.m = m;
        Ok(GenArg::Method { spec, explicit_seed: seed.is_some() })
    }
}

impl GenArg {
    /// Generates the dataset; without an explicit `seed=` the generator
    /// seed is derived from the CLI seed under `label`.
    pub fn generate(&self, cli_seed: u64, label: &str) -> CliResult<(DiscreteDistribution, DatasetMetadata)> {
        let derived = derive_seed(cli_seed, label);
        match self {
            GenArg::Method { spec, explicit_seed } => {
                let mut spec = spec.clone();
                if !explicit_seed {
                    spec.seed = derived;
                }
                let p = generate(&spec)?;
                let meta = DatasetMetadata {
                    spec: Some(serde_json::to_value(&spec).expect("spec serializes")),
                    seed: Some(spec.seed),
                };
                Ok((p, meta))
            }
            GenArg::Known { n, d, delta, seed } => {
                let seed = seed.unwrap_or(derived);
                let p = generate_known_barycenter(*n, *d, *delta, seed)?;
                let meta = DatasetMetadata {
                    spec: Some(json!({"method": "known", "n": n, "d": d, "delta": delta, "seed": seed})),
                    seed: Some(seed),
                };
                Ok((p, meta))
            }
        }
    }
}

/// Read errors from the library carry no path; parse errors already do.
fn with_path(path: &Path, e: BwError) -> CliError {
    match e {
        BwError::Io(e) => CliError::io(path, e),
        e => e.into(),
    }
}

/// Where a dataset came from, echoed into summaries.
pub struct Loaded {
    pub dist: DiscreteDistribution,
    pub source: Value,
}

pub fn load(input: Option<&PathBuf>, gen: Option<&GenArg>, cli_seed: u64, label: &str) -> CliResult<Loaded> {
    match (input, gen) {
        (Some(path), None) => {
            let (dist, meta) = read_dataset(path).map_err(|e| with_path(path, e))?;
            Ok(Loaded {
                dist,
                source: json!({"path": path.display().to_string(), "metadata": meta}),
            })
        }
        (None, Some(g)) => {
            let (dist, meta) = g.generate(cli_seed, label)?;
            Ok(Loaded { dist, source: json!({"gen": meta}) })
        }
        _ => Err(CliError::invalid("exactly one of --input and --gen is required")),
    }
}

pub fn load_point(path: Option<&Path>, d: usize) -> CliResult<Option<GaussianMeasure>> {
    let Some(path) = path else { return Ok(None) };
    let g = read_point(path).map_err(|e| with_path(path, e))?;
    if g.dim() != d {
        return Err(CliError::invalid(format!(
            "{}: point has dimension {}, dataset has {d}",
            path.display(),
            g.dim()
        )));
    }
    Ok(Some(g))
}

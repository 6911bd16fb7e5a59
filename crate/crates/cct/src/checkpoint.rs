//! Ensemble persistence: one JSON document per ensemble.
//!
//! The document carries metadata (architecture, per-network init seeds, the
//! epoch it was taken at, a config digest) plus per-network flat weight and
//! bias arrays in row-major layer order. Floats serialize with round-trip
//! precision, so save/load is bit-exact. Optimizer state is not persisted;
//! a loaded ensemble starts with fresh Adam accumulators.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Network;
use crate::train::Ensemble;

const FORMAT_TAG: &str = "cct-ensemble-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epoch: u32,
    pub config_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkParams {
    /// Row-major weights, one flat array per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    arch: Vec<usize>,
    seeds: Vec<u64>,
    epoch: u32,
    config_hash: String,
    networks: Vec<NetworkParams>,
}

/// Writes `ens` to `path` as a single JSON document.
pub fn save(path: &Path, ens: &Ensemble, epoch: u32, config_hash: &str) -> Result<()> {
    let file = CheckpointFile {
        format: FORMAT_TAG.to_string(),
        arch: ens.arch(),
        seeds: ens.networks().iter().map(|n| n.seed()).collect(),
        epoch,
        config_hash: config_hash.to_string(),
        networks: ens
            .networks()
            .iter()
            .map(|net| NetworkParams {
                weights: net.layers().iter().map(|l| l.weights().to_vec()).collect(),
                biases: net.layers().iter().map(|l| l.biases().to_vec()).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads an ensemble and its metadata, validating shape and finiteness.
pub fn load(path: &Path) -> Result<(Ensemble, CheckpointMeta)> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&raw)
        .map_err(|e| Error::Checkpoint(format!("cannot decode {}: {e}", path.display())))?;

    if file.format != FORMAT_TAG {
        return Err(Error::Checkpoint(format!(
            "unknown checkpoint format {:?}",
            file.format
        )));
    }
    if file.seeds.len() != file.networks.len() || file.networks.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{} seeds for {} networks",
            file.seeds.len(),
            file.networks.len()
        )));
    }

    let mut networks = Vec::with_capacity(file.networks.len());
    for (params, &seed) in file.networks.iter().zip(&file.seeds) {
        let net = Network::from_parameters(&file.arch, seed, &params.weights, &params.biases)
            .map_err(|e| Error::Checkpoint(format!("invalid parameters: {e}")))?;
        if !net.all_finite() {
            return Err(Error::Checkpoint("non-finite parameter in checkpoint".into()));
        }
        networks.push(net);
    }
    let ensemble = Ensemble::from_networks(networks)
        .map_err(|e| Error::Checkpoint(format!("invalid ensemble: {e}")))?;
    let meta = CheckpointMeta {
        arch: file.arch,
        seeds: file.seeds,
        epoch: file.epoch,
        config_hash: file.config_hash,
    };
    Ok((ensemble, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.json");
        let ens = Ensemble::init(&[3, 8, 4], 3, 99).unwrap();
        save(&path, &ens, 17, "deadbeef").unwrap();

        let (loaded, meta) = load(&path).unwrap();
        assert_eq!(meta.arch, vec![3, 8, 4]);
        assert_eq!(meta.epoch, 17);
        assert_eq!(meta.config_hash, "deadbeef");
        assert_eq!(meta.seeds.len(), 3);

        for (a, b) in ens.networks().iter().zip(loaded.networks()) {
            assert_eq!(a.seed(), b.seed());
            for (la, lb) in a.layers().iter().zip(b.layers()) {
                let bits = |xs: &[f64]| xs.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(la.weights()), bits(lb.weights()));
                assert_eq!(bits(la.biases()), bits(lb.biases()));
            }
        }
    }

    #[test]
    fn load_rejects_garbage_and_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load(&path), Err(Error::Checkpoint(_))));

        let path2 = dir.path().join("bad2.json");
        std::fs::write(
            &path2,
            r#"{"format":"cct-ensemble-v1","arch":[2,3],"seeds":[1],"epoch":0,
                "config_hash":"","networks":[{"weights":[[1.0,2.0]],"biases":[[0.0,0.0,0.0]]}]}"#,
        )
        .unwrap();
        assert!(matches!(load(&path2), Err(Error::Checkpoint(_))));
    }
}

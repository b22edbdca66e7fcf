//! Trajectory directories: `ckpt_000.ply`, `ckpt_001.ply`, ... plus
//! `manifest.json`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ply::{read_ply, write_ply};
use super::unix_millis;
use crate::error::{Error, Result};
use crate::optimizer::{Checkpoint, FitConfig, Trajectory};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConventions {
    pub rest_distance: String,
    pub progress: String,
}

impl Default for DistanceConventions {
    fn default() -> Self {
        DistanceConventions {
            rest_distance: "squared_l2".into(),
            progress: "sum_l2_travelled_over_sum_l2_total".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Creation {
    pub seed: Option<u64>,
    pub tool_version: String,
}

/// Run-specific data excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub created_unix_ms: u64,
}

impl Metadata {
    pub fn now() -> Self {
        Metadata {
            created_unix_ms: unix_millis(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    pub version: u32,
    pub config: Option<FitConfig>,
    pub checkpoint_files: Vec<String>,
    pub iterations: Vec<usize>,
    pub alphas: Vec<f64>,
    pub alpha_fallback: bool,
    pub distance_conventions: DistanceConventions,
    pub creation: Creation,
    pub metadata: Metadata,
}

pub fn checkpoint_file_name(index: usize) -> String {
    format!("ckpt_{index:03}.ply")
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Strict JSON read: unknown fields are rejected by the target type.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes one PLY per checkpoint (attributes blended at each checkpoint's
/// `alpha`) and the manifest.
pub fn write_trajectory(trajectory: &Trajectory, dir: impl AsRef<Path>) -> Result<TrajectoryManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(trajectory.len());
    for i in 0..trajectory.len() {
        let name = checkpoint_file_name(i);
        write_ply(&trajectory.checkpoint_cloud(i)?, dir.join(&name))?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        version: MANIFEST_VERSION,
        config: trajectory.config.clone(),
        checkpoint_files: files,
        iterations: trajectory.checkpoints.iter().map(|c| c.iteration).collect(),
        alphas: trajectory.alphas(),
        alpha_fallback: trajectory.alpha_fallback,
        distance_conventions: DistanceConventions::default(),
        creation: Creation {
            seed: trajectory.config.as_ref().map(|c| c.rng_seed),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        },
        metadata: Metadata::now(),
    };
    write_json(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn read_trajectory(dir: impl AsRef<Path>) -> Result<Trajectory> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: TrajectoryManifest = read_json(&manifest_path)?;
    let bad = |msg: String| Error::format(&manifest_path, msg);
    if manifest.version != MANIFEST_VERSION {
        return Err(bad(format!("unsupported manifest version {}", manifest.version)));
    }
    let count = manifest.checkpoint_files.len();
    if manifest.alphas.len() != count || manifest.iterations.len() != count {
        return Err(bad(format!(
            "{count} checkpoint files but {} alphas and {} iterations",
            manifest.alphas.len(),
            manifest.iterations.len()
        )));
    }
    if count < 2 {
        return Err(bad("a trajectory needs at least two checkpoints".into()));
    }
    if manifest.alphas[0] != 0.0 || manifest.alphas[count - 1] != 1.0 {
        return Err(bad("alphas must start at 0 and end at 1".into()));
    }
    if manifest.iterations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("checkpoint iterations must be strictly increasing".into()));
    }

    let mut clouds = Vec::with_capacity(count);
    for name in &manifest.checkpoint_files {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(bad(format!("checkpoint file '{name}' is missing")));
        }
        clouds.push(read_ply(&path)?);
    }
    let n = clouds[0].len();
    if let Some(c) = clouds.iter().find(|c| c.len() != n) {
        return Err(bad(format!("checkpoints disagree on point count ({n} vs {})", c.len())));
    }

    let (first, last) = (&clouds[0], &clouds[count - 1]);
    let (start_attributes, end_attributes) = match (first.attributes(), last.attributes()) {
        (Some(a), Some(b)) => (Some(a.clone()), Some(b.clone())),
        _ => (None, None),
    };
    Ok(Trajectory {
        start_positions: first.positions().to_vec(),
        end_positions: last.positions().to_vec(),
        checkpoints: clouds
            .iter()
            .zip(manifest.iterations.iter().zip(&manifest.alphas))
            .map(|(c, (&iteration, &alpha))| Checkpoint {
                iteration,
                positions: c.positions().to_vec(),
                alpha,
            })
            .collect(),
        config: manifest.config,
        alpha_fallback: manifest.alpha_fallback,
        start_attributes,
        end_attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn alphas_survive_json_exactly(alphas in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("a.json");
            write_json(&alphas, &path).unwrap();
            let back: Vec<f64> = read_json(&path).unwrap();
            prop_assert_eq!(back, alphas);
        }
    }
}

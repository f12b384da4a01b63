//! Reference-profile clustering and task cluster selection.
//!
//! Profiles are grouped by plain seeded k-means over their layered speed
//! vectors; a task picks the cluster owning the plurality of its `psi`
//! nearest profiles under the spatio-temporal distance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{spatio_temporal_distance, CodedLocation, SoundSpeedProfile};

/// A cluster of profile ids with its centroid on the common depth grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCluster {
    pub members: Vec<String>,
    pub centroid: Vec<f64>,
}

/// How a task selects its reference cluster.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSelectionConfig {
    /// Number of nearest profiles considered.
    pub psi: usize,
    /// Balance between the time and space terms of the distance.
    pub lambda_tk: f64,
}

impl Default for TaskSelectionConfig {
    fn default() -> Self {
        // lambda_tk 0.02 weights the distance heavily toward space; psi
        // has no canonical value, 5 chosen.
        TaskSelectionConfig { psi: 5, lambda_tk: 0.02 }
    }
}

impl TaskSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.psi < 1 {
            return Err(Error::Config("psi must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_tk) {
            return Err(Error::Config(format!(
                "lambda_tk {} outside [0, 1]",
                self.lambda_tk
            )));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means over layered speed vectors. Deterministic for a fixed
/// seed: initial centroids are k distinct profiles chosen by the seeded RNG,
/// Lloyd iterations run to a fixed cap or until assignments stop changing.
pub fn cluster_profiles(
    profiles: &[(String, Vec<f64>)],
    k: usize,
    seed: u64,
) -> Result<Vec<ProfileCluster>> {
    if k < 1 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    if k > profiles.len() {
        return Err(Error::Config(format!(
            "cluster count {k} exceeds profile count {}",
            profiles.len()
        )));
    }
    let dim = profiles[0].1.len();
    if profiles.iter().any(|(_, v)| v.len() != dim) {
        return Err(Error::Shape(
            "profiles do not share a common layer grid".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..profiles.len()).collect();
    indices.shuffle(&mut rng);
    let mut centroids: Vec<Vec<f64>> = indices[..k]
        .iter()
        .map(|&i| profiles[i].1.clone())
        .collect();

    let mut assignment = vec![usize::MAX; profiles.len()];
    const MAX_ITERS: usize = 100;
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (i, (_, v)) in profiles.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    sq_dist(v, &centroids[a])
                        .partial_cmp(&sq_dist(v, &centroids[b]))
                        .unwrap()
                })
                .unwrap();
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = profiles
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == c)
                .map(|(_, (_, v))| v)
                .collect();
            if members.is_empty() {
                continue; // keep the old centroid
            }
            for (d, slot) in centroid.iter_mut().enumerate() {
                *slot = members.iter().map(|v| v[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }

    Ok((0..k)
        .map(|c| {
            let members: Vec<String> = profiles
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == c)
                .map(|(_, (id, _))| id.clone())
                .collect();
            ProfileCluster {
                members,
                centroid: centroids[c].clone(),
            }
        })
        .collect())
}

/// Pick the cluster owning the plurality of the `psi` profiles nearest to
/// the task under the combined spatio-temporal distance. Ties break toward
/// the lower cluster index.
pub fn select_task_cluster(
    task_location: CodedLocation,
    task_day: u32,
    clusters: &[ProfileCluster],
    profiles: &[SoundSpeedProfile],
    cfg: &TaskSelectionConfig,
) -> Result<usize> {
    cfg.validate()?;
    if clusters.is_empty() {
        return Err(Error::Config("empty cluster set".into()));
    }
    if cfg.psi > profiles.len() {
        return Err(Error::Config(format!(
            "psi {} exceeds profile count {}",
            cfg.psi,
            profiles.len()
        )));
    }
    let mut ranked: Vec<(f64, &str)> = profiles
        .iter()
        .map(|p| {
            spatio_temporal_distance(task_location, task_day, p, cfg.lambda_tk)
                .map(|d| (d, p.id.as_str()))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));

    let owner = |id: &str| -> Option<usize> {
        clusters
            .iter()
            .position(|c| c.members.iter().any(|m| m == id))
    };
    let mut votes = vec![0usize; clusters.len()];
    for (_, id) in ranked.iter().take(cfg.psi) {
        if let Some(c) = owner(id) {
            votes[c] += 1;
        }
    }
    let best = votes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    if votes[best] == 0 {
        return Err(Error::Data(
            "no nearest profile belongs to any cluster".into(),
        ));
    }
    Ok(best)
}

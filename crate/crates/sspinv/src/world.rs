//! Synthetic ocean generator: clustered families of deep-ocean profiles
//! built from a canonical Munk-form base curve plus seasonal perturbation
//! modes, with a held-out task profile.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{layer_grid, SoundSpeedProfile};
use crate::ray::AcousticScenario;

/// Canonical deep-ocean (Munk) curve parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MunkParams {
    /// Sound speed at the channel axis (m/s).
    pub axis_speed: f64,
    /// Channel axis depth (m).
    pub axis_depth: f64,
    /// Perturbation strength.
    pub epsilon: f64,
    /// Channel width scale (m).
    pub width: f64,
}

impl Default for MunkParams {
    fn default() -> Self {
        MunkParams { axis_speed: 1500.0, axis_depth: 1300.0, epsilon: 0.00737, width: 1300.0 }
    }
}

/// c(z) = c1 (1 + eps (eta + e^-eta - 1)), eta = 2 (z - z1) / B.
pub fn munk_speed(p: &MunkParams, depth: f64) -> f64 {
    let eta = 2.0 * (depth - p.axis_depth) / p.width;
    p.axis_speed * (1.0 + p.epsilon * (eta + (-eta).exp() - 1.0))
}

/// Synthetic world settings; defaults give 10 clusters of 30 profiles on a
/// 50-layer grid to 3500 m.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticWorldConfig {
    pub cluster_count: usize,
    pub profiles_per_cluster: usize,
    pub layer_count: usize,
    pub max_depth: f64,
    pub munk: MunkParams,
    /// Half-range of the per-cluster axis-speed offset (m/s).
    pub cluster_speed_spread: f64,
    /// Half-range of the per-cluster axis-depth offset (m).
    pub cluster_depth_spread: f64,
    /// Longitude interval the cluster centers are spread over (east +).
    pub lon_range: (f64, f64),
    pub lat_range: (f64, f64),
    /// Geographic scatter of profiles around their cluster center (deg).
    pub cluster_radius: f64,
    /// Peak amplitude of the two seasonal perturbation modes (m/s).
    pub seasonal_amplitudes: [f64; 2],
    /// Standard deviation of the non-seasonal residual per mode (m/s).
    pub residual_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            cluster_count: 10,
            profiles_per_cluster: 30,
            layer_count: 50,
            max_depth: 3500.0,
            munk: MunkParams::default(),
            cluster_speed_spread: 4.0,
            cluster_depth_spread: 120.0,
            lon_range: (110.0, 120.0),
            lat_range: (8.0, 22.0),
            cluster_radius: 0.4,
            seasonal_amplitudes: [6.0, 2.5],
            residual_sigma: 0.4,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_count < 1 || self.profiles_per_cluster < 1 {
            return Err(Error::Config("world counts must be at least 1".into()));
        }
        if self.layer_count < 2 {
            return Err(Error::Config("world needs at least 2 layers".into()));
        }
        if !(self.max_depth > 0.0) {
            return Err(Error::Config("max depth must be positive".into()));
        }
        if self.lon_range.0 >= self.lon_range.1 || self.lat_range.0 >= self.lat_range.1 {
            return Err(Error::Config("degenerate geographic ranges".into()));
        }
        Ok(())
    }
}

/// A generated world: clustered reference profiles plus one held-out task
/// profile drawn from `task_cluster`'s family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub clusters: Vec<Vec<SoundSpeedProfile>>,
    pub task: SoundSpeedProfile,
    pub task_cluster: usize,
}

impl SyntheticWorld {
    pub fn all_references(&self) -> Vec<&SoundSpeedProfile> {
        self.clusters.iter().flatten().collect()
    }

    /// The task profile must never appear among the references.
    pub fn assert_no_leakage(&self) -> Result<()> {
        for r in self.all_references() {
            if r.id == self.task.id {
                return Err(Error::Data(format!(
                    "task profile {} leaked into the reference set",
                    r.id
                )));
            }
        }
        Ok(())
    }
}

/// Per-cluster family parameters drawn once from the master seed.
struct ClusterFamily {
    munk: MunkParams,
    center_lon: f64,
    center_lat: f64,
    /// Phase of the annual cycle (days).
    season_phase: f64,
}

/// Depth shapes of the two perturbation modes: a surface-trapped mode and a
/// thermocline mode. Both decay to zero by mid-depth so the deep profile
/// stays close to the canonical curve.
fn mode_shapes(depth: f64) -> [f64; 2] {
    let surface = (-depth / 300.0).exp();
    let thermocline = (std::f64::consts::PI * depth / 1600.0).sin() * (-depth / 900.0).exp();
    [surface, thermocline]
}

fn draw_families(cfg: &SyntheticWorldConfig, rng: &mut ChaCha8Rng) -> Vec<ClusterFamily> {
    (0..cfg.cluster_count)
        .map(|k| {
            // spread cluster centers over a grid walk of the region so
            // clusters are geographically distinct
            let f = if cfg.cluster_count > 1 {
                k as f64 / (cfg.cluster_count - 1) as f64
            } else {
                0.5
            };
            let center_lon = cfg.lon_range.0 + f * (cfg.lon_range.1 - cfg.lon_range.0);
            let center_lat = rng.gen_range(cfg.lat_range.0..cfg.lat_range.1);
            ClusterFamily {
                munk: MunkParams {
                    axis_speed: cfg.munk.axis_speed
                        + rng.gen_range(-cfg.cluster_speed_spread..=cfg.cluster_speed_spread),
                    axis_depth: cfg.munk.axis_depth
                        + rng.gen_range(-cfg.cluster_depth_spread..=cfg.cluster_depth_spread),
                    ..cfg.munk
                },
                center_lon,
                center_lat,
                season_phase: rng.gen_range(0.0..365.0),
            }
        })
        .collect()
}

/// One family draw: seasonal mode coefficients depend smoothly on the day
/// of year, with a small random residual, so profiles taken close together
/// in time are more alike than profiles taken close together in space.
fn draw_profile(
    cfg: &SyntheticWorldConfig,
    family: &ClusterFamily,
    id: String,
    rng: &mut ChaCha8Rng,
) -> Result<SoundSpeedProfile> {
    let lon = family.center_lon + rng.gen_range(-cfg.cluster_radius..=cfg.cluster_radius);
    let lat = family.center_lat + rng.gen_range(-cfg.cluster_radius..=cfg.cluster_radius);
    let day = rng.gen_range(1..=365u32);
    let residual = Normal::new(0.0, cfg.residual_sigma.max(0.0))
        .map_err(|e| Error::Config(format!("bad residual sigma: {e}")))?;

    let phase = 2.0 * std::f64::consts::PI * (day as f64 - family.season_phase) / 365.0;
    let coeff = [
        cfg.seasonal_amplitudes[0] * phase.cos() + residual.sample(rng),
        cfg.seasonal_amplitudes[1] * phase.sin() + residual.sample(rng),
    ];

    let samples = layer_grid(cfg.max_depth, cfg.layer_count)
        .into_iter()
        .map(|z| {
            let shapes = mode_shapes(z);
            let c = munk_speed(&family.munk, z)
                + coeff[0] * shapes[0]
                + coeff[1] * shapes[1];
            (z, c)
        })
        .collect();
    SoundSpeedProfile::new(samples, lon, lat, day, id)
}

/// Generate the clustered reference set plus the held-out task profile
/// (drawn from the first cluster's family). Deterministic per seed.
pub fn generate_world(cfg: &SyntheticWorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let families = draw_families(cfg, &mut rng);
    let mut clusters = Vec::with_capacity(cfg.cluster_count);
    for (k, family) in families.iter().enumerate() {
        let members = (0..cfg.profiles_per_cluster)
            .map(|i| draw_profile(cfg, family, format!("c{k}-p{i}"), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        clusters.push(members);
    }
    let task_cluster = 0;
    let task = draw_profile(cfg, &families[task_cluster], "task".into(), &mut rng)?;
    let world = SyntheticWorld { clusters, task, task_cluster };
    world.assert_no_leakage()?;
    Ok(world)
}

/// Fixed acquisition geometry shared by every simulated observation: one
/// surface source pinged from 30 positions, 4 moored receivers. 30 x 4 =
/// 120 travel times per observation.
pub struct Geometry {
    pub source: [f64; 3],
    pub receivers: Vec<[f64; 3]>,
    pub pings: Vec<[f64; 3]>,
}

pub fn default_geometry() -> Geometry {
    let receivers = vec![
        [1500.0, 0.0, 500.0],
        [2500.0, 0.0, 1000.0],
        [2000.0, 0.0, 1500.0],
        [3000.0, 0.0, 2000.0],
    ];
    let pings = (0..30).map(|i| [100.0 * i as f64, 50.0, 0.0]).collect();
    Geometry { source: [0.0, 50.0, 0.0], receivers, pings }
}

impl Geometry {
    /// Scenario over a profile's layered medium.
    pub fn scenario_for(&self, profile: &SoundSpeedProfile) -> Result<AcousticScenario> {
        let medium =
            crate::ray::LayeredMedium::new(profile.depths(), profile.speeds())?;
        Ok(AcousticScenario {
            source: self.source,
            receivers: self.receivers.clone(),
            medium,
        })
    }
}

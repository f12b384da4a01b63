//! File formats shared by the CLI subcommands: profile and observation
//! CSV, cluster manifest JSON, EOF basis JSON, model checkpoints, and the
//! benchmark configuration document.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::BenchmarkConfig;
use crate::eof::EofBasis;
use crate::error::{Error, Result};
use crate::net::{Matrix, Standardizer};
use crate::profile::SoundSpeedProfile;
use crate::ray::TravelTimeObservation;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| parse_error(path, e.to_string()))?;
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.to_string()))
}

/// Parse a float, rejecting non-finite values.
fn parse_finite(path: &Path, field: &str, token: &str) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| parse_error(path, format!("invalid {field}: {token:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, format!("non-finite {field}: {token:?}")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Profile CSV: `# id=`, `# lon=`, `# lat=`, `# day=` headers, then
// `depth_m,speed_mps` rows in ascending depth.
// ---------------------------------------------------------------------------

pub fn profile_to_csv(profile: &SoundSpeedProfile) -> String {
    let mut out = String::new();
    out.push_str(&format!("# id={}\n", profile.id));
    out.push_str(&format!("# lon={}\n", profile.longitude));
    out.push_str(&format!("# lat={}\n", profile.latitude));
    out.push_str(&format!("# day={}\n", profile.day_of_year));
    out.push_str("depth_m,speed_mps\n");
    for (d, s) in &profile.samples {
        out.push_str(&format!("{d},{s}\n"));
    }
    out
}

pub fn write_profile_csv(path: &Path, profile: &SoundSpeedProfile) -> Result<()> {
    write_text(path, &profile_to_csv(profile))
}

pub fn read_profile_csv(path: &Path) -> Result<SoundSpeedProfile> {
    let text = read_text(path)?;
    let mut id = None;
    let mut lon = None;
    let mut lat = None;
    let mut day = None;
    let mut samples = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once('=') {
                match key.trim() {
                    "id" => id = Some(value.trim().to_string()),
                    "lon" => lon = Some(parse_finite(path, "lon", value)?),
                    "lat" => lat = Some(parse_finite(path, "lat", value)?),
                    "day" => {
                        day = Some(value.trim().parse::<u32>().map_err(|_| {
                            parse_error(path, format!("invalid day: {value:?}"))
                        })?)
                    }
                    other => {
                        return Err(parse_error(path, format!("unknown header key {other:?}")))
                    }
                }
            }
            continue;
        }
        if line.starts_with("depth_m") {
            continue; // column header
        }
        let (d, s) = line
            .split_once(',')
            .ok_or_else(|| parse_error(path, format!("expected depth,speed row: {line:?}")))?;
        samples.push((
            parse_finite(path, "depth", d)?,
            parse_finite(path, "speed", s)?,
        ));
    }
    let missing = |field: &str| parse_error(path, format!("missing header # {field}="));
    SoundSpeedProfile::new(
        samples,
        lon.ok_or_else(|| missing("lon"))?,
        lat.ok_or_else(|| missing("lat"))?,
        day.ok_or_else(|| missing("day"))?,
        id.ok_or_else(|| missing("id"))?,
    )
}

// ---------------------------------------------------------------------------
// Observation CSV: `# pings=, receivers=, sigma=, seed=` header, then
// `ping,receiver,time_s` rows in ping-major order.
// ---------------------------------------------------------------------------

pub fn observation_to_csv(obs: &TravelTimeObservation, sigma: f64, seed: u64) -> String {
    let mut out = format!(
        "# pings={}, receivers={}, sigma={}, seed={}\n",
        obs.ping_count, obs.receiver_count, sigma, seed
    );
    out.push_str("ping,receiver,time_s\n");
    for p in 0..obs.ping_count {
        for r in 0..obs.receiver_count {
            out.push_str(&format!("{p},{r},{}\n", obs.times[p * obs.receiver_count + r]));
        }
    }
    out
}

pub fn write_observation_csv(
    path: &Path,
    obs: &TravelTimeObservation,
    sigma: f64,
    seed: u64,
) -> Result<()> {
    write_text(path, &observation_to_csv(obs, sigma, seed))
}

/// Returns the observation plus the sigma and seed echoed in the header.
pub fn read_observation_csv(path: &Path) -> Result<(TravelTimeObservation, f64, u64)> {
    let text = read_text(path)?;
    let mut pings = None;
    let mut receivers = None;
    let mut sigma = None;
    let mut seed = None;
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for part in rest.split(',') {
                if let Some((key, value)) = part.split_once('=') {
                    let value = value.trim();
                    match key.trim() {
                        "pings" => pings = value.parse::<usize>().ok(),
                        "receivers" => receivers = value.parse::<usize>().ok(),
                        "sigma" => sigma = Some(parse_finite(path, "sigma", value)?),
                        "seed" => seed = value.parse::<u64>().ok(),
                        other => {
                            return Err(parse_error(
                                path,
                                format!("unknown header key {other:?}"),
                            ))
                        }
                    }
                }
            }
            continue;
        }
        if line.starts_with("ping") {
            continue; // column header
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| parse_error(path, format!("missing {name} in row {line:?}")))
        };
        let p = next("ping")?
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_error(path, format!("invalid ping index in {line:?}")))?;
        let r = next("receiver")?
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_error(path, format!("invalid receiver index in {line:?}")))?;
        let t = parse_finite(path, "time_s", next("time_s")?)?;
        rows.push((p, r, t));
    }
    let ping_count = pings.ok_or_else(|| parse_error(path, "missing pings= header"))?;
    let receiver_count =
        receivers.ok_or_else(|| parse_error(path, "missing receivers= header"))?;
    if rows.len() != ping_count * receiver_count {
        return Err(parse_error(
            path,
            format!(
                "expected {} rows, found {}",
                ping_count * receiver_count,
                rows.len()
            ),
        ));
    }
    let mut times = vec![f64::NAN; rows.len()];
    for (p, r, t) in rows {
        if p >= ping_count || r >= receiver_count {
            return Err(parse_error(path, format!("row index ({p},{r}) out of range")));
        }
        times[p * receiver_count + r] = t;
    }
    let obs = TravelTimeObservation { times, ping_count, receiver_count };
    obs.validate()?;
    Ok((
        obs,
        sigma.ok_or_else(|| parse_error(path, "missing sigma= header"))?,
        seed.ok_or_else(|| parse_error(path, "missing seed= header"))?,
    ))
}

// ---------------------------------------------------------------------------
// Cluster manifest JSON: array of {clusterId, memberIds}.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterManifestEntry {
    pub cluster_id: usize,
    pub member_ids: Vec<String>,
}

pub fn write_cluster_manifest(path: &Path, entries: &[ClusterManifestEntry]) -> Result<()> {
    write_json(path, &entries)
}

pub fn read_cluster_manifest(path: &Path) -> Result<Vec<ClusterManifestEntry>> {
    read_json(path)
}

// ---------------------------------------------------------------------------
// EOF basis JSON: {grid, mean, eigenvalues, eigenvectors} with the
// eigenvectors stored column-major (one array per retained mode).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BasisFile {
    grid: Vec<f64>,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

pub fn write_basis(path: &Path, basis: &EofBasis) -> Result<()> {
    write_json(
        path,
        &BasisFile {
            grid: basis.grid.clone(),
            mean: basis.mean.clone(),
            eigenvalues: basis.values.clone(),
            eigenvectors: basis.vectors.clone(),
        },
    )
}

pub fn read_basis(path: &Path) -> Result<EofBasis> {
    let file: BasisFile = read_json(path)?;
    let basis = EofBasis {
        grid: file.grid,
        mean: file.mean,
        vectors: file.eigenvectors,
        values: file.eigenvalues,
    };
    for v in basis.values.iter().chain(basis.grid.iter()).chain(basis.mean.iter()) {
        if !v.is_finite() {
            return Err(parse_error(path, "non-finite basis entry"));
        }
    }
    if basis.vectors.iter().any(|col| col.len() != basis.grid.len()) {
        return Err(parse_error(path, "eigenvector length does not match grid"));
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// Model checkpoint JSON: config echo, both weight matrices, standardizer
// statistics, and the training seed.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub config: BenchmarkConfig,
    pub hidden_weights: Matrix,
    pub output_weights: Matrix,
    pub standardizer: Standardizer,
    pub seed: u64,
}

pub fn write_checkpoint(path: &Path, checkpoint: &ModelCheckpoint) -> Result<()> {
    write_json(path, checkpoint)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let ckpt: ModelCheckpoint = read_json(path)?;
    let dims = ckpt.config.mtl.dims;
    if ckpt.hidden_weights.rows != dims.hidden
        || ckpt.hidden_weights.cols != dims.input + 1
        || ckpt.output_weights.rows != dims.output
        || ckpt.output_weights.cols != dims.hidden + 1
    {
        return Err(parse_error(path, "weight shapes do not match the config echo"));
    }
    if ckpt
        .hidden_weights
        .data
        .iter()
        .chain(&ckpt.output_weights.data)
        .any(|v| !v.is_finite())
    {
        return Err(parse_error(path, "non-finite weight entry"));
    }
    Ok(ckpt)
}

/// Load the benchmark configuration document; missing sections and keys
/// fall back to the defaults.
pub fn load_config(path: &Path) -> Result<BenchmarkConfig> {
    let cfg: BenchmarkConfig = read_json(path)?;
    cfg.world.validate()?;
    cfg.mtl.validate()?;
    cfg.selection.validate()?;
    Ok(cfg)
}

//! Ray-theory forward model for a horizontally stratified medium.
//!
//! Within each layer the sound speed varies linearly with depth and the ray
//! obeys the Snell invariant cos(theta)/s = const. Horizontal range and
//! travel time have closed forms per layer; isovelocity layers use the
//! analytic limits. Only direct, non-turning paths are modeled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speeds below this gradient difference are treated as isovelocity.
const ISO_EPS: f64 = 1e-9;

/// A stack of depth layers with linear speed segments between grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredMedium {
    pub depths: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl LayeredMedium {
    pub fn new(depths: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if depths.len() < 2 || depths.len() != speeds.len() {
            return Err(Error::Shape(format!(
                "medium needs >= 2 matched depth/speed samples, got {}/{}",
                depths.len(),
                speeds.len()
            )));
        }
        for w in depths.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidProfile(
                    "medium depths not strictly increasing".into(),
                ));
            }
        }
        if speeds.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidProfile("medium speeds must be positive".into()));
        }
        Ok(LayeredMedium { depths, speeds })
    }

    pub fn layer_count(&self) -> usize {
        self.depths.len()
    }

    /// Index of the grid depth nearest to `depth`.
    pub fn nearest_index(&self, depth: f64) -> usize {
        self.depths
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - depth)
                    .abs()
                    .partial_cmp(&(b.1 - depth).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap()
    }
}

/// Source plus receiver geometry over a layered medium.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcousticScenario {
    /// Source position (x, y, z) in meters; z is depth, positive down.
    pub source: [f64; 3],
    /// Receiver positions (anchor nodes).
    pub receivers: Vec<[f64; 3]>,
    pub medium: LayeredMedium,
}

impl AcousticScenario {
    pub fn validate(&self) -> Result<()> {
        if self.receivers.is_empty() {
            return Err(Error::Config("scenario needs at least one receiver".into()));
        }
        let max = *self.medium.depths.last().unwrap();
        let min = self.medium.depths[0];
        for r in &self.receivers {
            if r[2] < min || r[2] > max {
                return Err(Error::Config(format!(
                    "receiver depth {} m outside medium range [{min}, {max}]",
                    r[2]
                )));
            }
        }
        Ok(())
    }
}

/// Flattened vector of propagation times, ping-major / receiver-minor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeObservation {
    pub times: Vec<f64>,
    pub ping_count: usize,
    pub receiver_count: usize,
}

impl TravelTimeObservation {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.ping_count * self.receiver_count {
            return Err(Error::Shape(format!(
                "observation length {} != pings {} x receivers {}",
                self.times.len(),
                self.ping_count,
                self.receiver_count
            )));
        }
        if self.times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::Data("observation times must be positive and finite".into()));
        }
        Ok(())
    }
}

fn ordered(src: usize, rcv: usize) -> (usize, usize) {
    if src <= rcv { (src, rcv) } else { (rcv, src) }
}

/// Horizontal distance traveled by a ray leaving the source grid depth at
/// grazing angle `theta` until it reaches the receiver grid depth.
pub fn horizontal_range(
    medium: &LayeredMedium,
    theta: f64,
    source_index: usize,
    receiver_index: usize,
) -> Result<f64> {
    per_layer_sum(medium, theta, source_index, receiver_index, LayerTerm::Range)
}

/// Signal propagation time along the same ray.
pub fn travel_time(
    medium: &LayeredMedium,
    theta: f64,
    source_index: usize,
    receiver_index: usize,
) -> Result<f64> {
    per_layer_sum(medium, theta, source_index, receiver_index, LayerTerm::Time)
}

enum LayerTerm {
    Range,
    Time,
}

fn per_layer_sum(
    medium: &LayeredMedium,
    theta: f64,
    source_index: usize,
    receiver_index: usize,
    term: LayerTerm,
) -> Result<f64> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::Domain(format!(
            "grazing angle {theta} rad outside (0, pi/2]"
        )));
    }
    let (lo, hi) = ordered(source_index, receiver_index);
    if hi >= medium.layer_count() {
        return Err(Error::Shape(format!(
            "depth index {hi} outside medium with {} layers",
            medium.layer_count()
        )));
    }
    let s_src = medium.speeds[source_index];
    let a = theta.cos() / s_src; // Snell invariant

    let gamma = |s: f64, depth: f64| -> Result<f64> {
        let g = 1.0 - (a * s) * (a * s);
        if g <= 0.0 {
            Err(Error::RayTurns { depth })
        } else {
            Ok(g)
        }
    };

    let mut total = 0.0;
    for d in lo..hi {
        let (s0, s1) = (medium.speeds[d], medium.speeds[d + 1]);
        let dz = medium.depths[d + 1] - medium.depths[d];
        let g0 = gamma(s0, medium.depths[d])?;
        let g1 = gamma(s1, medium.depths[d + 1])?;
        let ds = s1 - s0;
        total += match term {
            LayerTerm::Range => {
                if ds.abs() < ISO_EPS {
                    // straight segment: dz / tan(theta_d)
                    dz * (a * s0) / g0.sqrt()
                } else {
                    (s_src / theta.cos()) * (dz / ds * (g0.sqrt() - g1.sqrt())).abs()
                }
            }
            LayerTerm::Time => {
                if ds.abs() < ISO_EPS {
                    dz / (s0 * g0.sqrt())
                } else {
                    (dz / ds * ((s0 * (1.0 + g1.sqrt())) / (s1 * (1.0 + g0.sqrt()))).ln()).abs()
                }
            }
        };
    }
    Ok(total)
}

/// Smallest non-turning grazing angle for the traversed depth span, plus a
/// small guard.
fn theta_min(medium: &LayeredMedium, source_index: usize, receiver_index: usize) -> f64 {
    let (lo, hi) = ordered(source_index, receiver_index);
    let s_src = medium.speeds[source_index];
    let s_max = medium.speeds[lo..=hi].iter().cloned().fold(f64::MIN, f64::max);
    // cos(theta_min) = s_src / s_max; clamp for media where the source layer
    // is the fastest (any angle works).
    let c = (s_src / s_max).min(1.0);
    c.acos()
}

/// Bisection tolerance on the achieved horizontal range, meters.
pub const RANGE_TOLERANCE: f64 = 1e-3;

/// Find the grazing angle whose ray reaches horizontal range `target` at the
/// receiver grid depth. Bisection over (theta_min, pi/2]; the range is
/// strictly decreasing in theta on that interval.
pub fn solve_grazing_angle(
    medium: &LayeredMedium,
    source_index: usize,
    receiver_index: usize,
    target: f64,
) -> Result<f64> {
    if target < 0.0 {
        return Err(Error::Domain(format!("target range {target} m is negative")));
    }
    const GUARD: f64 = 1e-6;
    const MAX_ITERS: usize = 200;
    let mut lo = theta_min(medium, source_index, receiver_index) + GUARD;
    let mut hi = std::f64::consts::FRAC_PI_2;
    if lo >= hi {
        lo = hi - GUARD;
    }

    // range(hi) = 0 <= target; reachability is bounded by range just above
    // the turning threshold.
    let range_at = |t: f64| horizontal_range(medium, t, source_index, receiver_index);
    let max_range = range_at(lo)?;
    if target > max_range + RANGE_TOLERANCE {
        return Err(Error::NoDirectPath { range: target });
    }

    let mut best = hi;
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let r = range_at(mid)?;
        if (r - target).abs() < RANGE_TOLERANCE * 0.1 {
            return Ok(mid);
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
        best = 0.5 * (lo + hi);
    }
    let residual = (range_at(best)? - target).abs();
    if residual < RANGE_TOLERANCE {
        Ok(best)
    } else {
        Err(Error::NoDirectPath { range: target })
    }
}

/// Simulate one travel time for a source/receiver pair given their
/// horizontal separation; positions are snapped to the nearest grid depths.
pub fn pair_travel_time(
    medium: &LayeredMedium,
    source: [f64; 3],
    receiver: [f64; 3],
) -> Result<f64> {
    let si = medium.nearest_index(source[2]);
    let ri = medium.nearest_index(receiver[2]);
    let h = ((source[0] - receiver[0]).powi(2) + (source[1] - receiver[1]).powi(2)).sqrt();
    if si == ri {
        // horizontal propagation in one layer
        return Ok(h / medium.speeds[si]);
    }
    let theta = solve_grazing_angle(medium, si, ri, h)?;
    travel_time(medium, theta, si, ri)
}

/// Simulate the full observation vector: for each ping position and each
/// receiver, solve the grazing angle matching the horizontal separation,
/// evaluate the travel time, and add seeded Gaussian noise. Flattening is
/// ping-major, receiver-minor.
pub fn simulate_observation(
    scenario: &AcousticScenario,
    pings: &[[f64; 3]],
    noise_sigma: f64,
    seed: u64,
) -> Result<TravelTimeObservation> {
    scenario.validate()?;
    if pings.is_empty() {
        return Err(Error::Config("at least one ping position required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma.max(0.0))
        .map_err(|e| Error::Config(format!("bad noise sigma: {e}")))?;
    let mut times = Vec::with_capacity(pings.len() * scenario.receivers.len());
    for ping in pings {
        for receiver in &scenario.receivers {
            let mut t = pair_travel_time(&scenario.medium, *ping, *receiver)?;
            if noise_sigma > 0.0 {
                t += normal.sample(&mut rng);
            }
            times.push(t);
        }
    }
    let obs = TravelTimeObservation {
        times,
        ping_count: pings.len(),
        receiver_count: scenario.receivers.len(),
    };
    obs.validate()?;
    Ok(obs)
}

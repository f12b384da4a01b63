//! Sound speed profile data model, resampling, and spatio-temporal distances.
//!
//! A profile is a depth-ordered list of (depth, speed) samples tagged with
//! where and when it was measured. Distances between a task location and a
//! reference profile combine a cyclic day-of-year difference with a planar
//! Euclidean distance in coded longitude/latitude degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sanity bounds on ocean sound speeds, m/s.
pub const SPEED_MIN: f64 = 1300.0;
pub const SPEED_MAX: f64 = 1700.0;

/// Longitude/latitude after longitude recoding; `x` lives in [-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodedLocation {
    pub x: f64,
    pub y: f64,
}

/// A depth-indexed sound speed profile with sampling metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeedProfile {
    /// (depth m, speed m/s), depths strictly increasing, first depth >= 0.
    pub samples: Vec<(f64, f64)>,
    /// Longitude in (-180, 180], east positive.
    pub longitude: f64,
    pub latitude: f64,
    /// Day of year, 1..=365 (366 clamps to 365 on construction).
    pub day_of_year: u32,
    pub id: String,
}

impl SoundSpeedProfile {
    pub fn new(
        samples: Vec<(f64, f64)>,
        longitude: f64,
        latitude: f64,
        day_of_year: u32,
        id: impl Into<String>,
    ) -> Result<Self> {
        let day_of_year = if day_of_year == 366 { 365 } else { day_of_year };
        let p = SoundSpeedProfile {
            samples,
            longitude,
            latitude,
            day_of_year,
            id: id.into(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "profile {} has {} samples, need at least 2",
                self.id,
                self.samples.len()
            )));
        }
        if self.samples[0].0 < 0.0 {
            return Err(Error::InvalidProfile(format!(
                "profile {} starts above the surface ({} m)",
                self.id, self.samples[0].0
            )));
        }
        for w in self.samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidProfile(format!(
                    "profile {}: depths not strictly increasing at {} m",
                    self.id, w[0].0
                )));
            }
        }
        for &(d, s) in &self.samples {
            if !d.is_finite() || !s.is_finite() || !(SPEED_MIN..=SPEED_MAX).contains(&s) {
                return Err(Error::InvalidProfile(format!(
                    "profile {}: speed {s} m/s at {d} m outside [{SPEED_MIN}, {SPEED_MAX}]",
                    self.id
                )));
            }
        }
        if !(1..=365).contains(&self.day_of_year) {
            return Err(Error::InvalidProfile(format!(
                "profile {}: day of year {} outside 1..365",
                self.id, self.day_of_year
            )));
        }
        Ok(())
    }

    pub fn max_depth(&self) -> f64 {
        self.samples.last().map(|&(d, _)| d).unwrap_or(0.0)
    }

    pub fn depths(&self) -> Vec<f64> {
        self.samples.iter().map(|&(d, _)| d).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, s)| s).collect()
    }

    /// Speed at `depth` by linear interpolation, clamped to the endpoints
    /// outside the sampled range.
    pub fn speed_at(&self, depth: f64) -> f64 {
        interpolate(&self.samples, depth)
    }

    pub fn coded_location(&self) -> CodedLocation {
        CodedLocation {
            x: code_longitude(self.longitude),
            y: self.latitude,
        }
    }
}

fn interpolate(samples: &[(f64, f64)], depth: f64) -> f64 {
    if depth <= samples[0].0 {
        return samples[0].1;
    }
    if depth >= samples[samples.len() - 1].0 {
        return samples[samples.len() - 1].1;
    }
    // binary search for the bracketing pair
    let idx = samples.partition_point(|&(d, _)| d <= depth);
    let (d0, s0) = samples[idx - 1];
    let (d1, s1) = samples[idx];
    let t = (depth - d0) / (d1 - d0);
    s0 + t * (s1 - s0)
}

/// Resample a profile to a uniform depth grid of the given spacing.
///
/// The grid runs from the first to the last original depth; the final
/// original depth is always kept even when it is not a multiple of the
/// spacing. Speeds are linearly interpolated.
pub fn resample_uniform(profile: &SoundSpeedProfile, spacing: f64) -> Result<SoundSpeedProfile> {
    profile.validate()?;
    if !(spacing > 0.0) {
        return Err(Error::Config(format!("spacing {spacing} must be positive")));
    }
    let first = profile.samples[0].0;
    let last = profile.max_depth();
    let mut samples = Vec::new();
    let mut k = 0usize;
    loop {
        let d = first + k as f64 * spacing;
        if d >= last - 1e-9 {
            break;
        }
        samples.push((d, interpolate(&profile.samples, d)));
        k += 1;
    }
    samples.push((last, profile.samples[profile.samples.len() - 1].1));
    SoundSpeedProfile::new(
        samples,
        profile.longitude,
        profile.latitude,
        profile.day_of_year,
        profile.id.clone(),
    )
}

/// Down-sample a profile to `layer_count` evenly spaced depths spanning
/// [0, max depth]. This is the label/output representation of the inverter.
pub fn downsample_to_layers(profile: &SoundSpeedProfile, layer_count: usize) -> Result<Vec<f64>> {
    if layer_count < 2 {
        return Err(Error::Config(format!(
            "layer count {layer_count} must be at least 2"
        )));
    }
    let max = profile.max_depth();
    Ok(layer_grid(max, layer_count)
        .into_iter()
        .map(|d| profile.speed_at(d))
        .collect())
}

/// The evenly spaced depth grid used by [`downsample_to_layers`].
pub fn layer_grid(max_depth: f64, layer_count: usize) -> Vec<f64> {
    (0..layer_count)
        .map(|i| max_depth * i as f64 / (layer_count - 1) as f64)
        .collect()
}

/// Cyclic day-of-year difference: |a-b| when below 183, otherwise the
/// wrap-around 365 + min - max. Result lies in [0, 182]; symmetric.
pub fn time_difference(day_a: u32, day_b: u32) -> Result<f64> {
    let clamp = |d: u32| if d == 366 { 365 } else { d };
    let (a, b) = (clamp(day_a), clamp(day_b));
    for d in [a, b] {
        if !(1..=365).contains(&d) {
            return Err(Error::Domain(format!("day {d} outside 1..365")));
        }
    }
    let diff = a.abs_diff(b);
    Ok(if diff < 183 {
        diff as f64
    } else {
        (365 + a.min(b) - a.max(b)) as f64
    })
}

/// Recode a signed longitude (east positive) into a single continuous chart.
///
/// Eastern longitudes map to |lon| - 180, western ones to 180 - |lon|, which
/// makes the chart continuous across the antimeridian. The boundaries are
/// resolved by routing 0 and 180 through the eastern branch.
pub fn code_longitude(longitude: f64) -> f64 {
    if longitude >= 0.0 {
        longitude.abs() - 180.0
    } else {
        180.0 - longitude.abs()
    }
}

/// Weighted spatio-temporal distance between a task and a reference profile:
/// lambda * (cyclic day difference) + (1 - lambda) * (planar coded distance).
pub fn spatio_temporal_distance(
    task_location: CodedLocation,
    task_day: u32,
    reference: &SoundSpeedProfile,
    lambda: f64,
) -> Result<f64> {
    let phi_alpha = time_difference(task_day, reference.day_of_year)?;
    let r = reference.coded_location();
    let phi_beta = ((task_location.x - r.x).powi(2) + (task_location.y - r.y).powi(2)).sqrt();
    Ok(lambda * phi_alpha + (1.0 - lambda) * phi_beta)
}

/// Spatial-only distance (the location term of the combined metric).
pub fn spatial_distance(task_location: CodedLocation, reference: &SoundSpeedProfile) -> f64 {
    let r = reference.coded_location();
    ((task_location.x - r.x).powi(2) + (task_location.y - r.y).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(samples: Vec<(f64, f64)>) -> SoundSpeedProfile {
        SoundSpeedProfile::new(samples, 115.0, 18.0, 100, "t").unwrap()
    }

    #[test]
    fn resample_linear_midpoint() {
        let p = profile(vec![(0.0, 1500.0), (2.0, 1502.0)]);
        let r = resample_uniform(&p, 1.0).unwrap();
        assert_eq!(
            r.samples,
            vec![(0.0, 1500.0), (1.0, 1501.0), (2.0, 1502.0)]
        );
    }

    #[test]
    fn resample_constant_profile() {
        let p = profile(vec![(0.0, 1500.0), (100.0, 1500.0), (250.0, 1500.0)]);
        let r = resample_uniform(&p, 7.0).unwrap();
        assert!(r.samples.iter().all(|&(_, s)| s == 1500.0));
        assert_eq!(r.max_depth(), 250.0);
    }

    #[test]
    fn resample_rejects_short_profiles() {
        let p = SoundSpeedProfile {
            samples: vec![(0.0, 1500.0)],
            longitude: 0.0,
            latitude: 0.0,
            day_of_year: 1,
            id: "x".into(),
        };
        assert!(matches!(
            resample_uniform(&p, 1.0),
            Err(Error::InvalidProfile(_))
        ));
    }

    /// Munk canonical profile sampled at 10 m, resampled to 1 m, against the
    /// analytic formula on the 1 m grid.
    #[test]
    fn resample_munk_against_analytic() {
        let munk = |z: f64| {
            let eta = 2.0 * (z - 1300.0) / 1300.0;
            1500.0 * (1.0 + 0.00737 * (eta + (-eta).exp() - 1.0))
        };
        let coarse: Vec<(f64, f64)> = (0..=350).map(|i| (i as f64 * 10.0, munk(i as f64 * 10.0))).collect();
        let p = profile(coarse);
        let r = resample_uniform(&p, 1.0).unwrap();
        let max_err = r
            .samples
            .iter()
            .map(|&(d, s)| (s - munk(d)).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.05, "max abs error {max_err}");
    }

    #[test]
    fn downsample_linear_profile_is_arithmetic() {
        let p = profile(vec![(0.0, 1500.0), (3500.0, 1550.0)]);
        let r = resample_uniform(&p, 1.0).unwrap();
        let layers = downsample_to_layers(&r, 50).unwrap();
        for (i, &s) in layers.iter().enumerate() {
            let expect = 1500.0 + 50.0 * i as f64 / 49.0;
            assert_abs_diff_eq!(s, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn downsample_two_layers_is_endpoints() {
        let p = profile(vec![(0.0, 1502.0), (100.0, 1490.0), (900.0, 1512.0)]);
        let layers = downsample_to_layers(&p, 2).unwrap();
        assert_eq!(layers, vec![1502.0, 1512.0]);
    }

    #[test]
    fn downsample_rejects_single_layer() {
        let p = profile(vec![(0.0, 1500.0), (10.0, 1501.0)]);
        assert!(matches!(
            downsample_to_layers(&p, 1),
            Err(Error::Config(_))
        ));
    }

    /// Re-upsampling the 50-layer representation and down-sampling again is
    /// the identity.
    #[test]
    fn downsample_idempotent() {
        let p = profile(vec![
            (0.0, 1530.0),
            (200.0, 1510.0),
            (1300.0, 1481.5),
            (3500.0, 1545.0),
        ]);
        let r = resample_uniform(&p, 1.0).unwrap();
        let layers = downsample_to_layers(&r, 50).unwrap();
        let grid = layer_grid(r.max_depth(), 50);
        let up = profile(grid.iter().copied().zip(layers.iter().copied()).collect());
        let again = downsample_to_layers(&up, 50).unwrap();
        for (a, b) in layers.iter().zip(&again) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn time_difference_cases() {
        assert_eq!(time_difference(100, 110).unwrap(), 10.0);
        assert_eq!(time_difference(1, 365).unwrap(), 1.0);
        assert_eq!(time_difference(10, 193).unwrap(), 182.0);
        assert_eq!(time_difference(5, 366).unwrap(), 5.0); // leap clamp to 365
        assert!(time_difference(0, 10).is_err());
        assert!(time_difference(10, 367).is_err());
    }

    #[test]
    fn time_difference_exhaustive_symmetric_bounded() {
        for a in 1..=365u32 {
            for b in 1..=365u32 {
                let ab = time_difference(a, b).unwrap();
                let ba = time_difference(b, a).unwrap();
                assert_eq!(ab, ba);
                assert!(ab <= 183.0);
                assert!(ab >= 0.0);
            }
        }
    }

    #[test]
    fn code_longitude_cases() {
        assert_eq!(code_longitude(90.0), -90.0); // 90E
        assert_eq!(code_longitude(-90.0), 90.0); // 90W
        assert_eq!(code_longitude(179.0), -1.0);
        assert_eq!(code_longitude(-179.0), 1.0);
        assert_eq!(code_longitude(0.0), -180.0);
        assert_eq!(code_longitude(180.0), 0.0);
    }

    #[test]
    fn code_longitude_continuous_across_antimeridian() {
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let east = code_longitude(180.0 - eps);
            let west = code_longitude(-(180.0 - eps));
            assert!((east - west).abs() <= 2.0 * eps + 1e-12);
        }
    }

    #[test]
    fn distance_cases() {
        let p = profile(vec![(0.0, 1500.0), (10.0, 1501.0)]);
        let loc = p.coded_location();
        assert_eq!(
            spatio_temporal_distance(loc, p.day_of_year, &p, 0.5).unwrap(),
            0.0
        );
        // lambda = 1 suppresses the space term
        let far = CodedLocation { x: loc.x + 3.0, y: loc.y - 4.0 };
        let d = spatio_temporal_distance(far, p.day_of_year + 10, &p, 1.0).unwrap();
        assert_abs_diff_eq!(d, 10.0, epsilon = 1e-12);
        // direct evaluation: 0.02*50 + 0.98*2 = 2.96
        let q = SoundSpeedProfile::new(
            vec![(0.0, 1500.0), (10.0, 1501.0)],
            115.0,
            18.0,
            150,
            "q",
        )
        .unwrap();
        let task = CodedLocation {
            x: q.coded_location().x + 2.0,
            y: q.coded_location().y,
        };
        let d = spatio_temporal_distance(task, 100, &q, 0.02).unwrap();
        assert_abs_diff_eq!(d, 0.02 * 50.0 + 0.98 * 2.0, epsilon = 1e-12);
    }
}

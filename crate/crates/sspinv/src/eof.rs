//! Empirical orthogonal function decomposition and partial-profile extension.
//!
//! A basis is built from the residual covariance of a profile set; a partial
//! profile is extended to full depth by projecting onto the partial-depth
//! basis and recombining the coefficients with the full-depth basis, modes
//! paired by eigenvalue rank. Below the measured range a least-squares
//! linear extension is also available.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::SoundSpeedProfile;

/// Mean profile, retained eigenvectors (columns), and eigenvalues on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EofBasis {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    /// Column-major: vectors[k] is the k-th eigenvector, length = grid len.
    pub vectors: Vec<Vec<f64>>,
    /// Descending, nonnegative.
    pub values: Vec<f64>,
}

/// Projection coefficients of a profile onto a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EofCoefficients {
    pub values: Vec<f64>,
}

impl EofBasis {
    pub fn retain_order(&self) -> usize {
        self.vectors.len()
    }

    /// Max abs deviation of V^T V from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, vi) in self.vectors.iter().enumerate() {
            for (j, vj) in self.vectors.iter().enumerate() {
                let dot: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major,
/// n x n). Returns (eigenvalues, eigenvectors as columns), unsorted.
/// Off-diagonal tolerance is 1e-12 times the Frobenius norm; 100 sweeps max.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let frob: f64 = matrix
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let tol = 1e-12 * frob.max(f64::MIN_POSITIVE);

    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }

    let values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|i| v[i][k]).collect()).collect();
    (values, vectors)
}

/// Truncate each full-depth profile at `cut_depth`, keeping metadata.
pub fn intercept_profiles(
    full: &[SoundSpeedProfile],
    cut_depth: f64,
) -> Result<Vec<SoundSpeedProfile>> {
    full.iter()
        .map(|p| {
            if p.max_depth() < cut_depth {
                return Err(Error::DepthCoverage {
                    required: cut_depth,
                    available: p.max_depth(),
                });
            }
            let samples: Vec<(f64, f64)> = p
                .samples
                .iter()
                .cloned()
                .filter(|&(d, _)| d <= cut_depth + 1e-9)
                .collect();
            SoundSpeedProfile::new(
                samples,
                p.longitude,
                p.latitude,
                p.day_of_year,
                p.id.clone(),
            )
        })
        .collect()
}

/// Build an EOF basis from profiles sharing one depth grid.
///
/// Covariance is (1/I) X X^T over the residuals against the mean profile;
/// eigenpairs are sorted by descending eigenvalue, the top `retain_order`
/// kept, negative round-off eigenvalues clamped to zero, and each vector's
/// largest-magnitude component made positive.
pub fn build_eof_basis(profiles: &[SoundSpeedProfile], retain_order: usize) -> Result<EofBasis> {
    if profiles.len() < 2 {
        return Err(Error::Data("need at least 2 profiles for an EOF basis".into()));
    }
    let grid = profiles[0].depths();
    for p in profiles {
        if p.depths() != grid {
            return Err(Error::Shape(format!(
                "profile {} not on the common depth grid",
                p.id
            )));
        }
    }
    let count = profiles.len();
    if retain_order < 1 || retain_order > grid.len().min(count) {
        return Err(Error::Config(format!(
            "retain order {retain_order} outside 1..=min(grid {}, profiles {count})",
            grid.len()
        )));
    }

    let n = grid.len();
    let mut mean = vec![0.0; n];
    for p in profiles {
        for (m, &(_, s)) in mean.iter_mut().zip(&p.samples) {
            *m += s;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }

    // residual columns
    let residuals: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| {
            p.samples
                .iter()
                .zip(&mean)
                .map(|(&(_, s), &m)| s - m)
                .collect()
        })
        .collect();

    let mut cov = vec![vec![0.0; n]; n];
    for r in &residuals {
        for i in 0..n {
            for j in i..n {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= count as f64;
            cov[j][i] = cov[i][j];
        }
    }

    let (values, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());

    let mut kept_values = Vec::with_capacity(retain_order);
    let mut kept_vectors = Vec::with_capacity(retain_order);
    for &idx in order.iter().take(retain_order) {
        kept_values.push(values[idx].max(0.0));
        let mut v = vectors[idx].clone();
        fix_sign(&mut v);
        kept_vectors.push(v);
    }

    Ok(EofBasis {
        grid,
        mean,
        vectors: kept_vectors,
        values: kept_values,
    })
}

/// Sign convention: the largest-magnitude component is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Project a profile on the basis grid onto the retained eigenvectors:
/// cf = V^T (s - mean).
pub fn project_onto_basis(basis: &EofBasis, target: &SoundSpeedProfile) -> Result<EofCoefficients> {
    if target.depths() != basis.grid {
        return Err(Error::Shape(format!(
            "profile {} not on the basis grid",
            target.id
        )));
    }
    let residual: Vec<f64> = target
        .samples
        .iter()
        .zip(&basis.mean)
        .map(|(&(_, s), &m)| s - m)
        .collect();
    Ok(EofCoefficients {
        values: basis
            .vectors
            .iter()
            .map(|v| v.iter().zip(&residual).map(|(a, b)| a * b).sum())
            .collect(),
    })
}

/// Reconstruct mean + V cf on the basis grid.
pub fn reconstruct(basis: &EofBasis, coefficients: &EofCoefficients) -> Result<Vec<f64>> {
    if coefficients.values.len() != basis.retain_order() {
        return Err(Error::Config(format!(
            "coefficient count {} != retained order {}",
            coefficients.values.len(),
            basis.retain_order()
        )));
    }
    let mut out = basis.mean.clone();
    for (v, &c) in basis.vectors.iter().zip(&coefficients.values) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// Extend a partial-depth profile to the empirical set's full depth.
///
/// Builds partial and full bases of the same order from the empirical set,
/// sign-aligns each full-depth vector with its truncation's inner product
/// against the partial vector of the same rank, projects the target, and
/// recombines with the full basis. The returned profile is the raw
/// reconstruction on the full grid; use [`splice_measured`] to restore the
/// measured shallow section.
pub fn extend_profile(
    partial_target: &SoundSpeedProfile,
    empirical_full: &[SoundSpeedProfile],
    retain_order: usize,
) -> Result<SoundSpeedProfile> {
    let cut_depth = partial_target.max_depth();
    let intercepted = intercept_profiles(empirical_full, cut_depth)?;
    let partial_basis = build_eof_basis(&intercepted, retain_order)?;
    let mut full_basis = build_eof_basis(empirical_full, retain_order)?;
    if partial_basis.retain_order() != full_basis.retain_order() {
        return Err(Error::Config("basis orders differ".into()));
    }

    // mode pairing is by eigenvalue rank; resolve the per-mode sign
    // ambiguity by aligning each full vector's shallow section with the
    // partial vector of the same rank
    let k = partial_basis.grid.len();
    for (full_vec, part_vec) in full_basis.vectors.iter_mut().zip(&partial_basis.vectors) {
        let dot: f64 = full_vec[..k].iter().zip(part_vec).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            for x in full_vec.iter_mut() {
                *x = -*x;
            }
        }
    }

    let cf = project_onto_basis(&partial_basis, partial_target)?;
    let speeds = reconstruct(&full_basis, &cf)?;
    SoundSpeedProfile::new(
        full_basis.grid.iter().cloned().zip(speeds).collect(),
        partial_target.longitude,
        partial_target.latitude,
        partial_target.day_of_year,
        format!("{}-extended", partial_target.id),
    )
}

/// Replace the reconstruction's shallow section with the measured samples,
/// cross-fading linearly over the last `fade_meters` before the junction so
/// the splice is continuous.
pub fn splice_measured(
    extended: &SoundSpeedProfile,
    measured: &SoundSpeedProfile,
    fade_meters: f64,
) -> Result<SoundSpeedProfile> {
    let cut = measured.max_depth();
    let fade_start = cut - fade_meters;
    let samples: Vec<(f64, f64)> = extended
        .samples
        .iter()
        .map(|&(d, s)| {
            if d <= fade_start {
                (d, measured.speed_at(d))
            } else if d <= cut {
                let w = (d - fade_start) / fade_meters;
                (d, (1.0 - w) * measured.speed_at(d) + w * s)
            } else {
                (d, s)
            }
        })
        .collect();
    SoundSpeedProfile::new(
        samples,
        measured.longitude,
        measured.latitude,
        measured.day_of_year,
        measured.id.clone(),
    )
}

/// Result of a linear deep extension.
pub struct LinearExtension {
    pub profile: SoundSpeedProfile,
    /// True when the target depth did not exceed the profile and the input
    /// was returned unchanged.
    pub no_op: bool,
}

/// Extend a profile to `to_depth` on a 1 m grid, following the
/// least-squares slope of its last `window_meters`.
pub fn linear_extend(
    profile: &SoundSpeedProfile,
    to_depth: f64,
    window_meters: f64,
) -> Result<LinearExtension> {
    profile.validate()?;
    let max = profile.max_depth();
    if max < window_meters {
        return Err(Error::DepthCoverage {
            required: window_meters,
            available: max,
        });
    }
    if to_depth <= max {
        return Ok(LinearExtension {
            profile: profile.clone(),
            no_op: true,
        });
    }
    let tail: Vec<(f64, f64)> = profile
        .samples
        .iter()
        .cloned()
        .filter(|&(d, _)| d >= max - window_meters - 1e-9)
        .collect();
    let slope = least_squares_slope(&tail);
    let last_speed = profile.samples.last().unwrap().1;

    let mut samples = profile.samples.clone();
    let mut d = max + 1.0;
    while d < to_depth - 1e-9 {
        samples.push((d, last_speed + slope * (d - max)));
        d += 1.0;
    }
    samples.push((to_depth, last_speed + slope * (to_depth - max)));
    Ok(LinearExtension {
        profile: SoundSpeedProfile::new(
            samples,
            profile.longitude,
            profile.latitude,
            profile.day_of_year,
            profile.id.clone(),
        )?,
        no_op: false,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn on_grid(id: &str, grid: &[f64], speeds: &[f64]) -> SoundSpeedProfile {
        SoundSpeedProfile::new(
            grid.iter().cloned().zip(speeds.iter().cloned()).collect(),
            115.0,
            18.0,
            100,
            id,
        )
        .unwrap()
    }

    fn grid(n: usize, max: f64) -> Vec<f64> {
        (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn jacobi_reconstructs_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10;
        let mut c = vec![vec![0.0; n]; n];
        // random SPD-ish symmetric matrix
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.gen_range(-1.0..1.0);
                c[i][j] = x;
                c[j][i] = x;
            }
            c[i][i] += n as f64;
        }
        let (vals, vecs) = jacobi_eigen(&c);
        // rebuild C = V diag V^T
        for i in 0..n {
            for j in 0..n {
                let mut x = 0.0;
                for k in 0..n {
                    x += vecs[k][i] * vals[k] * vecs[k][j];
                }
                assert_abs_diff_eq!(x, c[i][j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn intercept_cases() {
        let g = grid(8, 3500.0);
        let speeds = vec![1500.0; 8];
        let p = on_grid("a", &g, &speeds);
        let same = intercept_profiles(&[p.clone()], 3500.0).unwrap();
        assert_eq!(same[0].samples, p.samples);
        let cut = intercept_profiles(&[p.clone()], 2000.0).unwrap();
        assert!(cut[0].max_depth() <= 2000.0);
        assert_eq!(cut[0].longitude, p.longitude);
        // shallower than requested cut
        let err = intercept_profiles(&[cut[0].clone()], 3000.0);
        assert!(matches!(err, Err(Error::DepthCoverage { .. })));
        // degenerate cut leaves < 2 samples
        let err = intercept_profiles(&[p], 0.0);
        assert!(matches!(err, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn identical_profiles_have_zero_variance() {
        let g = grid(6, 1000.0);
        let speeds = vec![1500.0, 1495.0, 1490.0, 1488.0, 1489.0, 1492.0];
        let profiles: Vec<_> = (0..5).map(|i| on_grid(&format!("p{i}"), &g, &speeds)).collect();
        let basis = build_eof_basis(&profiles, 2).unwrap();
        assert!(basis.values.iter().all(|&v| v == 0.0));
        for (m, s) in basis.mean.iter().zip(&speeds) {
            assert_abs_diff_eq!(m, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_one_construction() {
        let g = grid(5, 1000.0);
        let v = [0.6, -0.4, 0.4, 0.5, 0.28];
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let mean = vec![1500.0; 5];
        let a = 3.0;
        let plus: Vec<f64> = mean.iter().zip(&v).map(|(m, x)| m + a * x).collect();
        let minus: Vec<f64> = mean.iter().zip(&v).map(|(m, x)| m - a * x).collect();
        let profiles = vec![on_grid("p", &g, &plus), on_grid("m", &g, &minus)];
        let basis = build_eof_basis(&profiles, 1).unwrap();
        assert_abs_diff_eq!(basis.values[0], a * a, epsilon = 1e-9);
        let dot: f64 = basis.vectors[0].iter().zip(&v).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_cases() {
        let g = grid(6, 1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let profiles: Vec<_> = (0..8)
            .map(|i| {
                let speeds: Vec<f64> =
                    (0..6).map(|_| 1500.0 + rng.gen_range(-5.0..5.0)).collect();
                on_grid(&format!("p{i}"), &g, &speeds)
            })
            .collect();
        let basis = build_eof_basis(&profiles, 3).unwrap();
        assert!(basis.orthonormality_defect() < 1e-8);

        // mean projects to zero
        let mean_p = on_grid("mean", &g, &basis.mean);
        let cf = project_onto_basis(&basis, &mean_p).unwrap();
        assert!(cf.values.iter().all(|c| c.abs() < 1e-9));

        // mean + 2 v1 projects to (2, 0, 0)
        let shifted: Vec<f64> = basis
            .mean
            .iter()
            .zip(&basis.vectors[0])
            .map(|(m, v)| m + 2.0 * v)
            .collect();
        let cf = project_onto_basis(&basis, &on_grid("s", &g, &shifted)).unwrap();
        assert_abs_diff_eq!(cf.values[0], 2.0, epsilon = 1e-9);
        assert!(cf.values[1].abs() < 1e-9 && cf.values[2].abs() < 1e-9);

        // in-span round trip
        let in_span: Vec<f64> = basis
            .mean
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m + 1.5 * basis.vectors[0][i] - 0.7 * basis.vectors[1][i]
                    + 0.3 * basis.vectors[2][i]
            })
            .collect();
        let p = on_grid("r", &g, &in_span);
        let cf = project_onto_basis(&basis, &p).unwrap();
        let back = reconstruct(&basis, &cf).unwrap();
        for (a, b) in back.iter().zip(&in_span) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_is_contraction() {
        let g = grid(7, 1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let profiles: Vec<_> = (0..10)
            .map(|i| {
                let speeds: Vec<f64> =
                    (0..7).map(|_| 1500.0 + rng.gen_range(-6.0..6.0)).collect();
                on_grid(&format!("p{i}"), &g, &speeds)
            })
            .collect();
        let basis = build_eof_basis(&profiles, 3).unwrap();
        for trial in 0..20 {
            let speeds: Vec<f64> = (0..7).map(|_| 1500.0 + rng.gen_range(-8.0..8.0)).collect();
            let p = on_grid(&format!("t{trial}"), &g, &speeds);
            let cf = project_onto_basis(&basis, &p).unwrap();
            let rec = reconstruct(&basis, &cf).unwrap();
            let norm = |v: &[f64]| -> f64 {
                v.iter()
                    .zip(&basis.mean)
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
                    .sqrt()
            };
            assert!(norm(&rec) <= norm(&speeds) + 1e-9);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        let g = grid(6, 1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let profiles: Vec<_> = (0..9)
            .map(|i| {
                let speeds: Vec<f64> =
                    (0..6).map(|_| 1500.0 + rng.gen_range(-5.0..5.0)).collect();
                on_grid(&format!("p{i}"), &g, &speeds)
            })
            .collect();
        let basis = build_eof_basis(&profiles, 6).unwrap();
        // trace of covariance recomputed independently
        let count = profiles.len() as f64;
        let mut mean = vec![0.0; 6];
        for p in &profiles {
            for (m, &(_, s)) in mean.iter_mut().zip(&p.samples) {
                *m += s / count;
            }
        }
        let trace: f64 = (0..6)
            .map(|d| {
                profiles
                    .iter()
                    .map(|p| (p.samples[d].1 - mean[d]).powi(2))
                    .sum::<f64>()
                    / count
            })
            .sum();
        let sum: f64 = basis.values.iter().sum();
        assert!((sum - trace).abs() / trace < 1e-6);
    }

    /// In-span family with modes supported above the cut depth: the partial
    /// basis then matches the full basis exactly and the extension is exact.
    #[test]
    fn extend_recovers_in_span_family() {
        let n = 50;
        let g = grid(n, 3500.0);
        let cut = 2000.0;
        // three orthonormal modes supported in [0, cut]
        let modes = shallow_modes(&g, cut);
        let mean_speed: Vec<f64> = g.iter().map(|d| 1500.0 + 0.01 * d.sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scales = [4.0, 2.0, 1.0];
        let empirical: Vec<_> = (0..20)
            .map(|i| {
                let speeds: Vec<f64> = (0..n)
                    .map(|d| {
                        let mut s = mean_speed[d];
                        for (m, sc) in modes.iter().zip(&scales) {
                            s += sc * rng.gen_range(-1.0..1.0) * m[d];
                        }
                        s
                    })
                    .collect();
                on_grid(&format!("e{i}"), &g, &speeds)
            })
            .collect();
        let full_basis = build_eof_basis(&empirical, 3).unwrap();
        let coeffs = EofCoefficients { values: vec![1.2, -0.8, 0.5] };
        let truth = reconstruct(&full_basis, &coeffs).unwrap();
        let truth_p = on_grid("truth", &g, &truth);
        let partial = intercept_profiles(&[truth_p.clone()], cut).unwrap().remove(0);
        let extended = extend_profile(&partial, &empirical, 3).unwrap();
        let max_err = extended
            .samples
            .iter()
            .zip(&truth_p.samples)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "max err {max_err}");
    }

    pub(super) fn shallow_modes(grid: &[f64], cut: f64) -> Vec<Vec<f64>> {
        let raw: Vec<Vec<f64>> = (1..=3)
            .map(|k| {
                grid.iter()
                    .map(|&d| {
                        if d <= cut {
                            (std::f64::consts::PI * k as f64 * d / cut).sin()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        // Gram-Schmidt
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mut v in raw {
            for u in &out {
                let dot: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            out.push(v);
        }
        out
    }

    #[test]
    fn extend_truncated_mean_returns_full_mean() {
        let g = grid(40, 3500.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let empirical: Vec<_> = (0..12)
            .map(|i| {
                let speeds: Vec<f64> = g
                    .iter()
                    .map(|d| 1500.0 + 0.005 * d + rng.gen_range(-2.0..2.0))
                    .collect();
                on_grid(&format!("e{i}"), &g, &speeds)
            })
            .collect();
        let full_basis = build_eof_basis(&empirical, 3).unwrap();
        let mean_p = on_grid("mean", &g, &full_basis.mean);
        let partial = intercept_profiles(&[mean_p], 2000.0).unwrap().remove(0);
        let extended = extend_profile(&partial, &empirical, 3).unwrap();
        for ((_, s), m) in extended.samples.iter().zip(&full_basis.mean) {
            assert_abs_diff_eq!(s, m, epsilon = 1e-8);
        }
    }

    #[test]
    fn extend_rejects_oversized_order() {
        let g = grid(10, 3500.0);
        let empirical: Vec<_> = (0..3)
            .map(|i| on_grid(&format!("e{i}"), &g, &vec![1500.0 + i as f64; 10]))
            .collect();
        let partial = intercept_profiles(&[empirical[0].clone()], 2000.0)
            .unwrap()
            .remove(0);
        assert!(matches!(
            extend_profile(&partial, &empirical, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_basis() {
        let g = grid(12, 2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let profiles: Vec<_> = (0..8)
            .map(|i| {
                let speeds: Vec<f64> =
                    (0..12).map(|_| 1500.0 + rng.gen_range(-4.0..4.0)).collect();
                on_grid(&format!("p{i}"), &g, &speeds)
            })
            .collect();
        let a = build_eof_basis(&profiles, 4).unwrap();
        let b = build_eof_basis(&profiles, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_extend_cases() {
        // constant tail extends flat
        let p = on_grid("c", &grid(101, 1000.0), &vec![1500.0; 101]);
        let ext = linear_extend(&p, 1200.0, 50.0).unwrap();
        assert!(!ext.no_op);
        assert_eq!(ext.profile.max_depth(), 1200.0);
        assert_abs_diff_eq!(ext.profile.samples.last().unwrap().1, 1500.0, epsilon = 1e-9);

        // exactly linear tail with slope g
        let g1m: Vec<f64> = (0..=3200).map(|i| i as f64).collect();
        let speeds: Vec<f64> = g1m.iter().map(|d| 1480.0 + 0.016 * d).collect();
        let p = on_grid("l", &g1m, &speeds);
        let ext = linear_extend(&p, 3300.0, 50.0).unwrap();
        let last = ext.profile.samples.last().unwrap();
        assert_abs_diff_eq!(last.1, 1480.0 + 0.016 * 3200.0 + 100.0 * 0.016, epsilon = 1e-6);

        // 3200 -> 3500 two-step pipeline depth
        let ext = linear_extend(&p, 3500.0, 50.0).unwrap();
        assert_eq!(ext.profile.max_depth(), 3500.0);

        // no-op below current depth
        let ext = linear_extend(&p, 1000.0, 50.0).unwrap();
        assert!(ext.no_op);
    }

    #[test]
    fn splice_keeps_measurement_and_is_continuous() {
        let g = grid(71, 3500.0); // 50 m spacing
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let empirical: Vec<_> = (0..10)
            .map(|i| {
                let speeds: Vec<f64> = g
                    .iter()
                    .map(|d| 1500.0 + 0.004 * d + rng.gen_range(-3.0..3.0))
                    .collect();
                on_grid(&format!("e{i}"), &g, &speeds)
            })
            .collect();
        let speeds: Vec<f64> = g.iter().map(|d| 1498.0 + 0.0045 * d).collect();
        let truth = on_grid("t", &g, &speeds);
        let partial = intercept_profiles(&[truth.clone()], 2000.0).unwrap().remove(0);
        let extended = extend_profile(&partial, &empirical, 3).unwrap();
        let spliced = splice_measured(&extended, &partial, 20.0).unwrap();
        // shallow section equals the measurement
        for &(d, s) in spliced.samples.iter().filter(|&&(d, _)| d <= 1980.0) {
            assert_abs_diff_eq!(s, partial.speed_at(d), epsilon = 1e-12);
        }
        // deep section equals the reconstruction
        for (a, b) in spliced
            .samples
            .iter()
            .zip(&extended.samples)
            .filter(|(&(d, _), _)| d > 2000.0)
        {
            assert_eq!(a.1, b.1);
        }
    }
}

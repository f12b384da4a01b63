//! End-to-end acceptance checks: one test per criterion, each printing a
//! single pass/fail line (visible with `--nocapture`, or on failure).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sspinv::bench::{run_benchmark, sign_test_p, BenchmarkConfig, Method};
use sspinv::eof::{build_eof_basis, extend_profile, intercept_profiles, reconstruct, EofCoefficients};
use sspinv::net::{
    init_params, pretrain_cost, pretrain_gradient, task_cost, task_learning_rates, Matrix,
    NetDims, NetworkParams, TrainingSample,
};
use sspinv::profile::{layer_grid, time_difference, CodedLocation, SoundSpeedProfile};
use sspinv::ray::{horizontal_range, solve_grazing_angle, travel_time, LayeredMedium};

fn report(criterion: usize, what: &str, pass: bool) {
    println!(
        "acceptance criterion {criterion} ({what}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {criterion} failed: {what}");
}

// ---------------------------------------------------------------------------
// Independent fine-step ray oracle: the medium is piecewise linear in depth;
// integrate dx = cot(theta(z)) dz and dt = dz / (s(z) sin(theta(z))) with the
// Snell invariant cos(theta(z))/s(z) = cos(theta_0)/s(z_0), midpoint rule.
// ---------------------------------------------------------------------------

fn speed_at(medium: &LayeredMedium, z: f64) -> f64 {
    let d = &medium.depths;
    let s = &medium.speeds;
    for i in 0..d.len() - 1 {
        if z <= d[i + 1] + 1e-12 {
            let t = (z - d[i]) / (d[i + 1] - d[i]);
            return s[i] + t * (s[i + 1] - s[i]);
        }
    }
    *s.last().unwrap()
}

fn oracle_range_time(medium: &LayeredMedium, theta: f64, step: f64) -> (f64, f64) {
    let a = theta.cos() / medium.speeds[0];
    let z_end = *medium.depths.last().unwrap();
    let z_start = medium.depths[0];
    let n = ((z_end - z_start) / step).ceil() as usize;
    let dz = (z_end - z_start) / n as f64;
    let mut range = 0.0;
    let mut time = 0.0;
    for i in 0..n {
        let z = z_start + (i as f64 + 0.5) * dz;
        let s = speed_at(medium, z);
        let cos_t = a * s;
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        range += dz * cos_t / sin_t;
        time += dz / (s * sin_t);
    }
    (range, time)
}

fn random_gradient_medium(rng: &mut ChaCha8Rng) -> LayeredMedium {
    let layers = rng.gen_range(4..=10usize);
    let mut depths = vec![0.0];
    for _ in 0..layers {
        depths.push(depths.last().unwrap() + rng.gen_range(50.0..200.0));
    }
    let mut speeds = vec![rng.gen_range(1480.0..1520.0)];
    for _ in 0..layers {
        // nonzero gradients, modest spread so mid-range angles never turn
        let mut delta: f64 = rng.gen_range(-8.0..8.0);
        if delta.abs() < 0.5 {
            delta = 0.5_f64.copysign(delta + 0.1);
        }
        speeds.push(speeds.last().unwrap() + delta);
    }
    LayeredMedium::new(depths, speeds).unwrap()
}

fn safe_angle(medium: &LayeredMedium, rng: &mut ChaCha8Rng) -> f64 {
    let s0 = medium.speeds[0];
    let s_max = medium.speeds.iter().cloned().fold(f64::MIN, f64::max);
    let theta_min = (s0 / s_max).min(1.0).acos();
    rng.gen_range((theta_min + 0.2)..1.5)
}

#[test]
fn criterion_1_ray_oracle_agreement() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_range = 0.0f64;
    let mut worst_time = 0.0f64;
    for _ in 0..20 {
        let medium = random_gradient_medium(&mut rng);
        let theta = safe_angle(&medium, &mut rng);
        let last = medium.layer_count() - 1;
        let r = horizontal_range(&medium, theta, 0, last).unwrap();
        let t = travel_time(&medium, theta, 0, last).unwrap();
        let (r_o, t_o) = oracle_range_time(&medium, theta, 0.01);
        worst_range = worst_range.max((r - r_o).abs());
        worst_time = worst_time.max((t - t_o).abs());
    }
    // constant-speed closed forms
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        let c = rng.gen_range(1450.0..1550.0);
        let z = rng.gen_range(200.0..2000.0);
        let theta: f64 = rng.gen_range(0.3..1.5);
        let medium = LayeredMedium::new(vec![0.0, z / 2.0, z], vec![c, c, c]).unwrap();
        let r = horizontal_range(&medium, theta, 0, 2).unwrap();
        let t = travel_time(&medium, theta, 0, 2).unwrap();
        worst_rel = worst_rel.max((r - z / theta.tan()).abs() / (z / theta.tan()));
        worst_rel = worst_rel.max((t - z / (c * theta.sin())).abs() / (z / (c * theta.sin())));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "ray model matches the fine-step refraction oracle",
        worst_range < 1e-3 && worst_time < 1e-7 && worst_rel < 1e-9 && elapsed < 10.0,
    );
}

#[test]
fn criterion_2_grazing_angle_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let medium = random_gradient_medium(&mut rng);
        let theta = safe_angle(&medium, &mut rng);
        let last = medium.layer_count() - 1;
        let h = horizontal_range(&medium, theta, 0, last).unwrap();
        let back = solve_grazing_angle(&medium, 0, last, h).unwrap();
        worst = worst.max((back - theta).abs());
    }
    report(2, "grazing-angle solver round trip within 1e-6 rad", worst < 1e-6);
}

#[test]
fn criterion_3_eof_extension_exactness() {
    // Family spanned by 3 orthonormal modes supported above the 2000 m cut:
    // the truncated basis then spans the same coefficients as the full one.
    let n = 50;
    let grid = layer_grid(3500.0, n);
    let cut = 2000.0;
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
    let mut modes: Vec<Vec<f64>> = Vec::new();
    for mut v in raw {
        for u in &modes {
            let dot: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        modes.push(v);
    }
    let mean: Vec<f64> = grid.iter().map(|d| 1500.0 + 0.01 * d.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let on_grid = |id: &str, speeds: &[f64]| {
        SoundSpeedProfile::new(
            grid.iter().cloned().zip(speeds.iter().cloned()).collect(),
            115.0,
            15.0,
            100,
            id,
        )
        .unwrap()
    };
    let empirical: Vec<SoundSpeedProfile> = (0..20)
        .map(|i| {
            let speeds: Vec<f64> = (0..n)
                .map(|d| {
                    let mut s = mean[d];
                    for (m, scale) in modes.iter().zip(&[4.0, 2.0, 1.0]) {
                        s += scale * rng.gen_range(-1.0..1.0) * m[d];
                    }
                    s
                })
                .collect();
            on_grid(&format!("e{i}"), &speeds)
        })
        .collect();
    let basis = build_eof_basis(&empirical, 3).unwrap();
    let truth_speeds =
        reconstruct(&basis, &EofCoefficients { values: vec![1.2, -0.8, 0.5] }).unwrap();
    let truth = on_grid("truth", &truth_speeds);
    let partial = intercept_profiles(&[truth.clone()], cut).unwrap().remove(0);
    let extended = extend_profile(&partial, &empirical, 3).unwrap();
    let max_err = extended
        .samples
        .iter()
        .zip(&truth.samples)
        .map(|(a, b)| (a.1 - b.1).abs())
        .fold(0.0, f64::max);
    report(
        3,
        "profile extension recovers in-span truncations exactly",
        max_err < 1e-6,
    );
}

// ---------------------------------------------------------------------------
// Gradient checks: analytic vs central finite differences on small shapes.
// ---------------------------------------------------------------------------

fn random_sample(dims: NetDims, rng: &mut ChaCha8Rng) -> TrainingSample {
    TrainingSample {
        input: (0..dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        label: (0..dims.output).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        location: CodedLocation { x: 0.0, y: 0.0 },
        day_of_year: 1,
    }
}

fn max_rel_error<F: Fn(&NetworkParams) -> f64>(
    params: &NetworkParams,
    analytic: (&Matrix, &Matrix),
    cost: F,
) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for layer in 0..2 {
        let (grad, len) = match layer {
            0 => (analytic.0, params.hidden_weights.data.len()),
            _ => (analytic.1, params.output_weights.data.len()),
        };
        for i in 0..len {
            let mut plus = params.clone();
            let mut minus = params.clone();
            match layer {
                0 => {
                    plus.hidden_weights.data[i] += h;
                    minus.hidden_weights.data[i] -= h;
                }
                _ => {
                    plus.output_weights.data[i] += h;
                    minus.output_weights.data[i] -= h;
                }
            }
            let fd = (cost(&plus) - cost(&minus)) / (2.0 * h);
            worst = worst.max((fd - grad.data[i]).abs());
            scale = scale.max(grad.data[i].abs());
        }
    }
    worst / scale.max(1.0)
}

#[test]
fn criterion_4_gradient_checks() {
    let dims = NetDims { input: 4, hidden: 5, output: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let params = init_params(dims, 404 + trial);
        let samples: Vec<TrainingSample> =
            (0..3).map(|_| random_sample(dims, &mut rng)).collect();
        let mu = 0.01;
        let per_shot = trial % 2 == 0;

        // regularized multi-shot pretraining cost
        let (gh, go, _) = pretrain_gradient(
            &params.hidden_weights,
            &params.output_weights,
            &samples,
            mu,
            per_shot,
        )
        .unwrap();
        worst = worst.max(max_rel_error(&params, (&gh, &go), |p| {
            pretrain_cost(p, &samples, mu, per_shot).unwrap()
        }));

        // plain single-sample task cost
        let (gh, go, _) = pretrain_gradient(
            &params.hidden_weights,
            &params.output_weights,
            &samples[..1],
            0.0,
            false,
        )
        .unwrap();
        worst = worst.max(max_rel_error(&params, (&gh, &go), |p| {
            task_cost(p, &samples[0]).unwrap()
        }));
    }
    report(4, "analytic gradients match finite differences", worst < 1e-5);
}

#[test]
fn criterion_5_learning_rate_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let base = 0.01;
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30usize);
        let phis: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-3.0..2.0)))
            .collect();
        let rates = task_learning_rates(&phis, base).unwrap();
        ok &= (rates.iter().sum::<f64>() - base).abs() < 1e-12;
    }
    // equal distances split the budget exactly
    for n in 1..=30usize {
        let phi = rng.gen_range(0.1..10.0);
        let rates = task_learning_rates(&vec![phi; n], base).unwrap();
        ok &= rates.iter().all(|r| *r == base / n as f64);
    }
    report(5, "distance-weighted rates sum to the task budget", ok);
}

#[test]
fn criterion_6_accuracy_ordering() {
    let start = Instant::now();
    let cfg = BenchmarkConfig {
        repetitions: 100,
        methods: vec![Method::Sip, Method::Fnn, Method::Mtl],
        measure_timing: false,
        ..BenchmarkConfig::default()
    };
    let (rep, _) = run_benchmark(&cfg).unwrap();
    println!("{}", rep.accuracy_markdown());
    let mtl = rep.method("MTL").unwrap();
    let fnn = rep.method("FNN").unwrap();
    let sip = rep.method("SIP").unwrap();
    let wins = |a: &[f64], b: &[f64]| a.iter().zip(b).filter(|(x, y)| x < y).count();
    let n = cfg.repetitions;
    let p_fnn = sign_test_p(wins(&mtl.per_repetition_overall, &fnn.per_repetition_overall), n);
    let p_sip = sign_test_p(wins(&mtl.per_repetition_overall, &sip.per_repetition_overall), n);
    println!(
        "mean RMSE: MTL {:.3}, FNN {:.3}, SIP {:.3}; sign tests p = {:.2e} (vs FNN), {:.2e} (vs SIP)",
        mtl.mean_overall_rmse, fnn.mean_overall_rmse, sip.mean_overall_rmse, p_fnn, p_sip
    );
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        "multi-task inverter beats the plain network and interpolation",
        mtl.mean_overall_rmse < fnn.mean_overall_rmse
            && mtl.mean_overall_rmse < sip.mean_overall_rmse
            && p_fnn < 0.05
            && p_sip < 0.05
            && elapsed < 600.0,
    );
}

#[test]
fn criterion_7_warm_start_epoch_one_loss() {
    let cfg = BenchmarkConfig {
        repetitions: 20,
        methods: vec![Method::Fnn, Method::Mtl],
        measure_timing: false,
        ..BenchmarkConfig::default()
    };
    let (rep, _) = run_benchmark(&cfg).unwrap();
    let mtl = rep.method("MTL").unwrap().mean_epoch_losses[0];
    let fnn = rep.method("FNN").unwrap().mean_epoch_losses[0];
    println!("mean epoch-1 task loss over 20 seeds: MTL {mtl:.3}, FNN {fnn:.3}");
    report(7, "pretrained warm start lowers the epoch-1 task loss", mtl < fnn);
}

#[test]
fn criterion_8_inversion_timing() {
    let cfg = BenchmarkConfig {
        repetitions: 1,
        methods: vec![Method::EofMfp, Method::Mtl],
        ..BenchmarkConfig::default()
    };
    let (rep, _) = run_benchmark(&cfg).unwrap();
    println!("{}", rep.timing_markdown());
    let mtl = rep.method("MTL").unwrap().inversion_seconds;
    let mfp = rep.method("EOF-MFP").unwrap().inversion_seconds;
    report(
        8,
        "network inversion under 10 ms and 100x faster than the search",
        mtl < 0.01 && mfp / mtl >= 100.0,
    );
}

#[test]
fn criterion_9_report_determinism() {
    let cfg = BenchmarkConfig {
        repetitions: 2,
        measure_timing: false,
        ..BenchmarkConfig::default()
    };
    let (a, _) = run_benchmark(&cfg).unwrap();
    let (b, _) = run_benchmark(&cfg).unwrap();
    report(
        9,
        "benchmark reports are byte-identical for a fixed master seed",
        a.to_masked_json() == b.to_masked_json(),
    );
}

#[test]
fn criterion_10_cyclic_time_exhaustive() {
    let mut ok = true;
    for a in 1..=365u32 {
        for b in 1..=365u32 {
            let t = time_difference(a, b).unwrap();
            let diff = (a as f64 - b as f64).abs();
            ok &= t == diff.min(365.0 - diff);
            ok &= t == time_difference(b, a).unwrap();
            ok &= (0.0..=183.0).contains(&t);
        }
    }
    report(10, "cyclic day distance is symmetric and bounded by 183", ok);
}

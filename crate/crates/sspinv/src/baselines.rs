//! Comparison methods: inverse-distance spatial interpolation (SIP),
//! EOF matched-field processing driven by particle-swarm search (EOF-MFP),
//! and a plain feedforward network without pretraining.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eof::{reconstruct, EofBasis, EofCoefficients};
use crate::error::{Error, Result};
use crate::net::{
    init_params, invert, train_task_learner, FinetuneResult, MtlConfig, NetworkParams,
    Standardizer, TrainingSample,
};
use crate::profile::{spatial_distance, CodedLocation, SoundSpeedProfile};
use crate::ray::{simulate_observation, AcousticScenario, LayeredMedium, TravelTimeObservation};

/// Normalized inverse-spatial-distance weights; zero distances take the
/// whole mass, split equally.
pub fn sip_weights(task: CodedLocation, references: &[SoundSpeedProfile]) -> Result<Vec<f64>> {
    if references.is_empty() {
        return Err(Error::Data("spatial interpolation needs references".into()));
    }
    let dists: Vec<f64> = references.iter().map(|r| spatial_distance(task, r)).collect();
    let zeros = dists.iter().filter(|d| **d == 0.0).count();
    if zeros > 0 {
        return Ok(dists
            .iter()
            .map(|d| if *d == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect());
    }
    let inv_sum: f64 = dists.iter().map(|d| 1.0 / d).sum();
    Ok(dists.iter().map(|d| (1.0 / d) / inv_sum).collect())
}

/// Inverse-distance weighted average of the reference profiles at the task
/// location. A zero-distance reference is returned verbatim.
pub fn sip_invert(
    task: CodedLocation,
    task_day: u32,
    references: &[SoundSpeedProfile],
) -> Result<SoundSpeedProfile> {
    let weights = sip_weights(task, references)?;
    let grid = references[0].depths();
    for r in references.iter().skip(1) {
        if r.depths() != grid {
            return Err(Error::Shape(format!(
                "reference {} not on the common grid",
                r.id
            )));
        }
    }
    if let Some(i) = weights.iter().position(|w| *w == 1.0) {
        let mut exact = references[i].clone();
        exact.id = "sip-inverted".into();
        exact.day_of_year = task_day;
        return Ok(exact);
    }
    let mut speeds = vec![0.0; grid.len()];
    for (r, w) in references.iter().zip(&weights) {
        for (s, &(_, v)) in speeds.iter_mut().zip(&r.samples) {
            *s += w * v;
        }
    }
    SoundSpeedProfile::new(
        grid.into_iter().zip(speeds).collect(),
        references[0].longitude,
        references[0].latitude,
        task_day,
        "sip-inverted",
    )
}

/// Particle-swarm search settings; the per-mode coefficient bounds are
/// closed intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub coefficient_bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl PsoConfig {
    /// Defaults with bounds of +-3 standard deviations per retained mode.
    pub fn for_basis(basis: &EofBasis, seed: u64) -> Self {
        PsoConfig {
            particles: 20,
            iterations: 30,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            coefficient_bounds: basis
                .values
                .iter()
                .map(|l| {
                    let r = 3.0 * l.max(0.0).sqrt();
                    (-r, r)
                })
                .collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config("swarm needs at least 2 particles".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("swarm needs at least 1 iteration".into()));
        }
        if self.coefficient_bounds.is_empty() {
            return Err(Error::Config("no coefficient bounds".into()));
        }
        for (lo, hi) in &self.coefficient_bounds {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!("bad coefficient bound ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Matched-field search output.
pub struct MfpResult {
    pub profile: SoundSpeedProfile,
    pub coefficients: EofCoefficients,
    /// Global-best fitness after each iteration (index 0 = after init).
    pub fitness_history: Vec<f64>,
}

/// L2 misfit between a candidate coefficient vector's simulated times and
/// the observation; candidates whose rays turn (or otherwise fail the
/// forward model) score +infinity.
pub fn mfp_fitness(
    cf: &[f64],
    observation: &TravelTimeObservation,
    basis: &EofBasis,
    scenario: &AcousticScenario,
    pings: &[[f64; 3]],
) -> f64 {
    let candidate = match candidate_medium(cf, basis) {
        Ok(m) => m,
        Err(_) => return f64::INFINITY,
    };
    let trial = AcousticScenario {
        source: scenario.source,
        receivers: scenario.receivers.clone(),
        medium: candidate,
    };
    match simulate_observation(&trial, pings, 0.0, 0) {
        Ok(sim) => sim
            .times
            .iter()
            .zip(&observation.times)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        Err(_) => f64::INFINITY,
    }
}

fn candidate_medium(cf: &[f64], basis: &EofBasis) -> Result<LayeredMedium> {
    let speeds = reconstruct(basis, &EofCoefficients { values: cf.to_vec() })?;
    LayeredMedium::new(basis.grid.clone(), speeds)
}

/// Matched-field inversion: particle-swarm minimization of the travel-time
/// misfit over the retained EOF coefficients, returning mean + V cf*.
pub fn mfp_invert(
    observation: &TravelTimeObservation,
    basis: &EofBasis,
    scenario: &AcousticScenario,
    pings: &[[f64; 3]],
    pso: &PsoConfig,
) -> Result<MfpResult> {
    pso.validate()?;
    if pso.coefficient_bounds.len() != basis.retain_order() {
        return Err(Error::Config(format!(
            "{} coefficient bounds for order-{} basis",
            pso.coefficient_bounds.len(),
            basis.retain_order()
        )));
    }
    observation.validate()?;
    if observation.times.len() != pings.len() * scenario.receivers.len() {
        return Err(Error::Shape(
            "observation does not match the scenario geometry".into(),
        ));
    }
    let dims = pso.coefficient_bounds.len();
    let ranges: Vec<f64> = pso.coefficient_bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let vmax: Vec<f64> = ranges.iter().map(|r| 0.5 * r).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(pso.seed);

    let sample_in = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };

    let mut positions: Vec<Vec<f64>> = (0..pso.particles)
        .map(|_| {
            pso.coefficient_bounds
                .iter()
                .map(|b| sample_in(&mut rng, *b))
                .collect()
        })
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..pso.particles)
        .map(|_| vmax.iter().map(|v| if *v > 0.0 { rng.gen_range(-v..*v) } else { 0.0 }).collect())
        .collect();

    let fitness =
        |cf: &[f64]| mfp_fitness(cf, observation, basis, scenario, pings);

    let mut personal_best = positions.clone();
    let mut personal_fit: Vec<f64> = positions.iter().map(|p| fitness(p)).collect();
    let (mut best_idx, mut best_fit) = personal_fit
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, f)| (i, *f))
        .unwrap();
    let mut global_best = personal_best[best_idx].clone();
    let mut history = vec![best_fit];

    for _ in 0..pso.iterations {
        for p in 0..pso.particles {
            for d in 0..dims {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = pso.inertia * velocities[p][d]
                    + pso.cognitive * r1 * (personal_best[p][d] - positions[p][d])
                    + pso.social * r2 * (global_best[d] - positions[p][d]);
                velocities[p][d] = v.clamp(-vmax[d], vmax[d]);
                let (lo, hi) = pso.coefficient_bounds[d];
                positions[p][d] = (positions[p][d] + velocities[p][d]).clamp(lo, hi);
            }
            let f = fitness(&positions[p]);
            if f < personal_fit[p] {
                personal_fit[p] = f;
                personal_best[p] = positions[p].clone();
            }
        }
        let (i, f) = personal_fit
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, f)| (i, *f))
            .unwrap();
        if f < best_fit {
            best_fit = f;
            best_idx = i;
            global_best = personal_best[best_idx].clone();
        }
        history.push(best_fit);
    }

    if !best_fit.is_finite() {
        return Err(Error::Data(
            "matched-field search found no feasible coefficient vector".into(),
        ));
    }
    let coefficients = EofCoefficients { values: global_best };
    let speeds = reconstruct(basis, &coefficients)?;
    let profile = SoundSpeedProfile::new(
        basis.grid.iter().cloned().zip(speeds).collect(),
        0.0,
        0.0,
        1,
        "mfp-inverted",
    )?;
    Ok(MfpResult { profile, coefficients, fitness_history: history })
}

/// Plain feedforward baseline: the task learner's training loop from a
/// fully random initialization with one uniform learning rate, no
/// pretraining. Same epoch and shot budget as the task learner.
pub fn fnn_train(
    samples: &[TrainingSample],
    cfg: &MtlConfig,
    seed: u64,
) -> Result<FinetuneResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: NetworkParams = init_params(cfg.dims, rng.gen());
    let rates = vec![cfg.task_base_rate; samples.len()];
    train_task_learner(
        initial,
        samples,
        &rates,
        cfg.task_epochs,
        cfg.task_shots_per_epoch,
        &mut rng,
    )
}

/// Train the plain network and invert one observation onto a layer grid.
pub fn fnn_invert(
    samples: &[TrainingSample],
    observation: &[f64],
    standardizer: &Standardizer,
    cfg: &MtlConfig,
    max_depth: f64,
    seed: u64,
) -> Result<(FinetuneResult, Vec<(f64, f64)>)> {
    let trained = fnn_train(samples, cfg, seed)?;
    let samples_out = invert(&trained.params, observation, standardizer, max_depth)?;
    Ok((trained, samples_out))
}

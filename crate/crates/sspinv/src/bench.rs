//! Experiment orchestration: prepare a synthetic world into training data,
//! run the four inversion methods over seeded repetitions, and aggregate
//! RMSE-by-depth-band and inversion-stage timing into a report.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{fnn_train, mfp_invert, sip_invert, PsoConfig};
use crate::cluster::{cluster_profiles, select_task_cluster, TaskSelectionConfig};
use crate::eof::{build_eof_basis, EofBasis};
use crate::error::{Error, Result};
use crate::net::{
    finetune_task, invert, pretrain_epoch, MtlConfig, MultiTaskLearner, NetworkParams,
    Standardizer, TrainingSample,
};
use crate::profile::SoundSpeedProfile;
use crate::ray::{simulate_observation, AcousticScenario, LayeredMedium, TravelTimeObservation};
use crate::world::{default_geometry, generate_world, Geometry, SyntheticWorldConfig};

/// The inversion methods under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SIP")]
    Sip,
    #[serde(rename = "EOF-MFP")]
    EofMfp,
    #[serde(rename = "FNN")]
    Fnn,
    #[serde(rename = "MTL")]
    Mtl,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sip => "SIP",
            Method::EofMfp => "EOF-MFP",
            Method::Fnn => "FNN",
            Method::Mtl => "MTL",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "sip" => Ok(Method::Sip),
            "eof-mfp" | "mfp" => Ok(Method::EofMfp),
            "fnn" => Ok(Method::Fnn),
            "mtl" => Ok(Method::Mtl),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Depth bands of the accuracy tables (meters); a layer on a band edge
/// belongs to the lower (shallower) band.
pub const DEPTH_BANDS: [(f64, f64); 4] =
    [(0.0, 200.0), (200.0, 800.0), (800.0, 1300.0), (1300.0, 3500.0)];

/// RMSE per depth band plus the all-layer average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRmse {
    pub bands: Vec<f64>,
    pub overall: f64,
}

/// RMSE over the layers falling in each band. Band membership is
/// lo < depth <= hi, with depth 0 in the first band; the overall figure is
/// the RMSE over every layer.
pub fn rmse_by_band(
    truth: &SoundSpeedProfile,
    estimate: &SoundSpeedProfile,
    bands: &[(f64, f64)],
) -> Result<BandRmse> {
    if truth.depths() != estimate.depths() {
        return Err(Error::Shape(
            "truth and estimate are on different grids".into(),
        ));
    }
    let residuals: Vec<(f64, f64)> = truth
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(&(d, t), &(_, e))| (d, t - e))
        .collect();
    let rms = |sel: &dyn Fn(f64) -> bool| -> f64 {
        let picked: Vec<f64> = residuals
            .iter()
            .filter(|(d, _)| sel(*d))
            .map(|(_, r)| r * r)
            .collect();
        if picked.is_empty() {
            0.0
        } else {
            (picked.iter().sum::<f64>() / picked.len() as f64).sqrt()
        }
    };
    let band_values = bands
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| rms(&move |d: f64| (d > lo || (i == 0 && d == lo)) && d <= hi))
        .collect();
    Ok(BandRmse { bands: band_values, overall: rms(&|_| true) })
}

/// One-sided sign test: probability of at least `wins` successes in
/// `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    if wins > trials {
        return 0.0;
    }
    // log-space binomial tail to stay stable for trials ~ hundreds
    let ln_fact = |n: usize| -> f64 { (1..=n).map(|i| (i as f64).ln()).sum() };
    let ln_n = ln_fact(trials);
    let ln_half = (0.5f64).ln();
    (wins..=trials)
        .map(|k| {
            (ln_n - ln_fact(k) - ln_fact(trials - k) + trials as f64 * ln_half).exp()
        })
        .sum()
}

/// Full benchmark settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub world: SyntheticWorldConfig,
    pub mtl: MtlConfig,
    pub selection: TaskSelectionConfig,
    /// EOF order of the matched-field baseline.
    pub retain_order: usize,
    /// Few-shot pool: number of nearest references (spatio-temporal
    /// distance, rate lambda) from the task cluster used to train the task
    /// learner and the plain network.
    pub task_reference_count: usize,
    /// Travel-time noise (s) added to every simulated observation.
    pub noise_sigma: f64,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    /// Timing calls for sub-millisecond inversions (median taken).
    pub fast_timing_calls: usize,
    /// Timing calls for the matched-field search, which runs for seconds.
    pub slow_timing_calls: usize,
    /// Skip the timing stage entirely (timings reported as 0).
    pub measure_timing: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            world: SyntheticWorldConfig::default(),
            mtl: MtlConfig::default(),
            selection: TaskSelectionConfig::default(),
            retain_order: 3,
            task_reference_count: 5,
            noise_sigma: 1e-4,
            repetitions: 10,
            methods: vec![Method::Sip, Method::EofMfp, Method::Fnn, Method::Mtl],
            master_seed: 0,
            fast_timing_calls: 100,
            slow_timing_calls: 3,
            measure_timing: true,
        }
    }
}

/// World converted into training data: standardized samples, k-means
/// clusters over the reference set, and the selected task cluster.
pub struct PreparedWorld {
    pub geometry: Geometry,
    pub references: Vec<SoundSpeedProfile>,
    pub samples: Vec<TrainingSample>,
    pub standardizer: Standardizer,
    /// Reference indices per k-means cluster.
    pub cluster_members: Vec<Vec<usize>>,
    pub task_cluster: usize,
    /// Few-shot task pool: the nearest task-cluster references by
    /// spatio-temporal distance.
    pub task_pool: Vec<usize>,
    pub task: SoundSpeedProfile,
    /// EOF basis of the task cluster (for the matched-field baseline).
    pub basis: EofBasis,
    pub max_depth: f64,
}

impl PreparedWorld {
    pub fn cluster_samples(&self) -> Vec<Vec<TrainingSample>> {
        self.cluster_members
            .iter()
            .map(|m| m.iter().map(|&i| self.samples[i].clone()).collect())
            .collect()
    }

    pub fn task_samples(&self) -> Vec<TrainingSample> {
        self.task_pool.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn task_references(&self) -> Vec<SoundSpeedProfile> {
        self.cluster_members[self.task_cluster]
            .iter()
            .map(|&i| self.references[i].clone())
            .collect()
    }

    pub fn simulate_task_observation(&self, seed: u64, sigma: f64) -> Result<TravelTimeObservation> {
        let scenario = self.geometry.scenario_for(&self.task)?;
        simulate_observation(&scenario, &self.geometry.pings, sigma, seed)
    }

    pub fn mean_scenario(&self) -> Result<AcousticScenario> {
        let medium = LayeredMedium::new(self.basis.grid.clone(), self.basis.mean.clone())?;
        Ok(AcousticScenario {
            source: self.geometry.source,
            receivers: self.geometry.receivers.clone(),
            medium,
        })
    }
}

/// Generate the world, simulate every reference observation, standardize,
/// cluster, and pick the task cluster. Deterministic per config.
pub fn prepare_world(cfg: &BenchmarkConfig) -> Result<PreparedWorld> {
    let world = generate_world(&cfg.world)?;
    world.assert_no_leakage()?;
    let geometry = default_geometry();
    let references: Vec<SoundSpeedProfile> =
        world.clusters.iter().flatten().cloned().collect();

    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let mut raw_inputs = Vec::with_capacity(references.len());
    let mut labels = Vec::with_capacity(references.len());
    for r in &references {
        let scenario = geometry.scenario_for(r)?;
        let obs =
            simulate_observation(&scenario, &geometry.pings, cfg.noise_sigma, seed_rng.gen())?;
        raw_inputs.push(obs.times);
        labels.push(r.speeds());
    }
    let standardizer = Standardizer::fit(&raw_inputs, &labels)?;
    let samples: Vec<TrainingSample> = references
        .iter()
        .zip(&raw_inputs)
        .map(|(r, raw)| {
            Ok(TrainingSample {
                input: standardizer.standardize_input(raw)?,
                label: standardizer.standardize_speeds(&r.speeds()),
                location: r.coded_location(),
                day_of_year: r.day_of_year,
            })
        })
        .collect::<Result<_>>()?;

    let keyed: Vec<(String, Vec<f64>)> =
        references.iter().map(|r| (r.id.clone(), r.speeds())).collect();
    let clusters = cluster_profiles(&keyed, cfg.mtl.cluster_count, seed_rng.gen())?;
    let cluster_members: Vec<Vec<usize>> = clusters
        .iter()
        .map(|c| {
            c.members
                .iter()
                .map(|id| {
                    references
                        .iter()
                        .position(|r| &r.id == id)
                        .ok_or_else(|| Error::Data(format!("unknown member id {id}")))
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<_>>()?;
    if cluster_members.iter().any(|m| m.is_empty()) {
        return Err(Error::Data("k-means produced an empty cluster".into()));
    }

    let task_cluster = select_task_cluster(
        world.task.coded_location(),
        world.task.day_of_year,
        &clusters,
        &references,
        &cfg.selection,
    )?;

    let task_refs: Vec<SoundSpeedProfile> = cluster_members[task_cluster]
        .iter()
        .map(|&i| references[i].clone())
        .collect();
    let basis = build_eof_basis(&task_refs, cfg.retain_order)?;

    // few-shot task pool: nearest cluster members under the task learner's
    // rate distance
    let mut ranked: Vec<(f64, usize)> = cluster_members[task_cluster]
        .iter()
        .map(|&i| {
            crate::profile::spatio_temporal_distance(
                world.task.coded_location(),
                world.task.day_of_year,
                &references[i],
                cfg.mtl.lambda_rate,
            )
            .map(|d| (d, i))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let pool_size = cfg.task_reference_count.max(1).min(ranked.len());
    let task_pool: Vec<usize> = ranked[..pool_size].iter().map(|&(_, i)| i).collect();

    Ok(PreparedWorld {
        geometry,
        references,
        samples,
        standardizer,
        cluster_members,
        task_cluster,
        task_pool,
        task: world.task,
        basis,
        max_depth: cfg.world.max_depth,
    })
}

fn profile_from_layers(
    layers: &[(f64, f64)],
    like: &SoundSpeedProfile,
    id: &str,
) -> Result<SoundSpeedProfile> {
    SoundSpeedProfile::new(
        layers.to_vec(),
        like.longitude,
        like.latitude,
        like.day_of_year,
        id.to_string(),
    )
}

/// Pretrain the multi-task learner and finetune on the task cluster.
/// Returns the trained parameters and the task-phase loss series.
pub fn run_mtl(
    prep: &PreparedWorld,
    mtl: &MtlConfig,
    seed: u64,
) -> Result<(NetworkParams, Vec<f64>)> {
    let cfg = MtlConfig { seed, ..mtl.clone() };
    let mut learner = MultiTaskLearner::init(&cfg)?;
    let cluster_samples = prep.cluster_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    for _ in 0..cfg.pretrain_epochs {
        pretrain_epoch(&mut learner, &cluster_samples, &cfg, &mut rng)?;
    }
    let task_samples = prep.task_samples();
    let result = finetune_task(
        &learner.shared_hidden,
        prep.task.coded_location(),
        prep.task.day_of_year,
        &task_samples,
        &cfg,
        seed ^ 0x5851f42d4c957f2d,
    )?;
    Ok((result.params, result.epoch_losses))
}

/// Accuracy and timing aggregate for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub successes: usize,
    pub failures: usize,
    /// Mean RMSE per band over successful repetitions.
    pub mean_band_rmse: Vec<f64>,
    pub mean_overall_rmse: f64,
    pub per_repetition_overall: Vec<f64>,
    /// Mean training-loss series (start-of-epoch pool loss); empty for
    /// methods without a training phase.
    pub mean_epoch_losses: Vec<f64>,
    /// Median inversion-stage wall time (seconds); training is excluded.
    pub inversion_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub repetitions: usize,
    pub depth_bands: Vec<(f64, f64)>,
    pub methods: Vec<MethodAggregate>,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodAggregate> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with every timing field zeroed, for determinism comparisons.
    pub fn to_masked_json(&self) -> String {
        let mut masked = self.clone();
        for m in masked.methods.iter_mut() {
            m.inversion_seconds = 0.0;
        }
        masked.to_json()
    }

    /// Accuracy table: depth-band rows, method columns.
    pub fn accuracy_markdown(&self) -> String {
        let mut out = String::from("| RMSE (m/s) |");
        for m in &self.methods {
            out.push_str(&format!(" {} |", m.method));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.methods.len()));
        out.push('\n');
        for (b, &(lo, hi)) in self.depth_bands.iter().enumerate() {
            out.push_str(&format!("| {:.0}-{:.0} (m) |", lo, hi));
            for m in &self.methods {
                out.push_str(&format!(" {:.3} |", m.mean_band_rmse[b]));
            }
            out.push('\n');
        }
        out.push_str("| Average |");
        for m in &self.methods {
            out.push_str(&format!(" {:.3} |", m.mean_overall_rmse));
        }
        out.push('\n');
        out
    }

    /// Timing table: method rows, inversion-stage seconds.
    pub fn timing_markdown(&self) -> String {
        let mut out = String::from("| Method | Inversion stage (s) |\n|---|---|\n");
        for m in &self.methods {
            out.push_str(&format!("| {} | {:.6} |\n", m.method, m.inversion_seconds));
        }
        out
    }
}

/// Example artifacts for plotting: rep-0 inverted profiles and the mean
/// loss series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotArtifacts {
    pub depths: Vec<f64>,
    pub truth: Vec<f64>,
    /// (method name, speeds) from the first successful repetition.
    pub example_profiles: Vec<(String, Vec<f64>)>,
    /// (method name, mean start-of-epoch loss series).
    pub loss_series: Vec<(String, Vec<f64>)>,
}

/// Median wall time of `calls` invocations after one warm-up call.
pub fn time_median<F: FnMut()>(calls: usize, mut f: F) -> f64 {
    f();
    let mut times: Vec<f64> = (0..calls.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times[times.len() / 2]
}

struct RepOutcome {
    rmse: BandRmse,
    speeds: Vec<f64>,
    losses: Vec<f64>,
}

/// Run every configured method over `repetitions` seeded repetitions on
/// one prepared world. Within a repetition all methods see the identical
/// observation and reference set; initialization and sampling seeds are
/// fresh per repetition. Failures are excluded from the averages and
/// counted.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<(ExperimentReport, PlotArtifacts)> {
    if cfg.repetitions < 1 {
        return Err(Error::Config("at least one repetition required".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    let prep = prepare_world(cfg)?;
    let task_refs = prep.task_references();
    let task_samples = prep.task_samples();
    let mean_scenario = prep.mean_scenario()?;
    let band_count = DEPTH_BANDS.len();

    let mut per_method: Vec<Vec<RepOutcome>> =
        cfg.methods.iter().map(|_| Vec::new()).collect();
    let mut failures = vec![0usize; cfg.methods.len()];

    let mut rep_rng = ChaCha8Rng::seed_from_u64(cfg.master_seed ^ 0xd1b54a32d192ed03);
    for _rep in 0..cfg.repetitions {
        let rep_seed: u64 = rep_rng.gen();
        let obs = prep.simulate_task_observation(rep_seed ^ 0xa076_1d64, cfg.noise_sigma)?;

        for (mi, method) in cfg.methods.iter().enumerate() {
            let outcome: Result<RepOutcome> = run_method(
                *method,
                &prep,
                &task_refs,
                &task_samples,
                &mean_scenario,
                &obs,
                cfg,
                rep_seed,
            );
            match outcome {
                Ok(o) => per_method[mi].push(o),
                Err(_) => failures[mi] += 1,
            }
        }
    }

    let timing = if cfg.measure_timing {
        measure_timing(cfg, &prep, &task_refs, &task_samples, &mean_scenario)?
    } else {
        vec![0.0; cfg.methods.len()]
    };

    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut example_profiles = Vec::new();
    let mut loss_series = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        let runs = &per_method[mi];
        let n = runs.len().max(1) as f64;
        let mean_band_rmse: Vec<f64> = (0..band_count)
            .map(|b| runs.iter().map(|r| r.rmse.bands[b]).sum::<f64>() / n)
            .collect();
        let mean_overall = runs.iter().map(|r| r.rmse.overall).sum::<f64>() / n;
        let epoch_count = runs.iter().map(|r| r.losses.len()).max().unwrap_or(0);
        let mean_losses: Vec<f64> = (0..epoch_count)
            .map(|e| runs.iter().map(|r| r.losses[e]).sum::<f64>() / n)
            .collect();
        if let Some(first) = runs.first() {
            example_profiles.push((method.name().to_string(), first.speeds.clone()));
        }
        if !mean_losses.is_empty() {
            loss_series.push((method.name().to_string(), mean_losses.clone()));
        }
        methods.push(MethodAggregate {
            method: method.name().to_string(),
            successes: runs.len(),
            failures: failures[mi],
            mean_band_rmse,
            mean_overall_rmse: mean_overall,
            per_repetition_overall: runs.iter().map(|r| r.rmse.overall).collect(),
            mean_epoch_losses: mean_losses,
            inversion_seconds: timing[mi],
        });
    }

    let report = ExperimentReport {
        master_seed: cfg.master_seed,
        repetitions: cfg.repetitions,
        depth_bands: DEPTH_BANDS.to_vec(),
        methods,
    };
    let artifacts = PlotArtifacts {
        depths: prep.task.depths(),
        truth: prep.task.speeds(),
        example_profiles,
        loss_series,
    };
    Ok((report, artifacts))
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: Method,
    prep: &PreparedWorld,
    task_refs: &[SoundSpeedProfile],
    task_samples: &[TrainingSample],
    mean_scenario: &AcousticScenario,
    obs: &TravelTimeObservation,
    cfg: &BenchmarkConfig,
    rep_seed: u64,
) -> Result<RepOutcome> {
    let (estimate, losses): (SoundSpeedProfile, Vec<f64>) = match method {
        Method::Sip => {
            let p = sip_invert(
                prep.task.coded_location(),
                prep.task.day_of_year,
                task_refs,
            )?;
            (p, Vec::new())
        }
        Method::EofMfp => {
            let pso = PsoConfig::for_basis(&prep.basis, rep_seed ^ 0x2545_f491);
            let res = mfp_invert(obs, &prep.basis, mean_scenario, &prep.geometry.pings, &pso)?;
            (res.profile, Vec::new())
        }
        Method::Fnn => {
            let trained = fnn_train(task_samples, &cfg.mtl, rep_seed ^ 0x9e37_79b9)?;
            let layers =
                invert(&trained.params, &obs.times, &prep.standardizer, prep.max_depth)?;
            (
                profile_from_layers(&layers, &prep.task, "fnn-inverted")?,
                trained.epoch_losses,
            )
        }
        Method::Mtl => {
            let (params, losses) = run_mtl(prep, &cfg.mtl, rep_seed)?;
            let layers = invert(&params, &obs.times, &prep.standardizer, prep.max_depth)?;
            (profile_from_layers(&layers, &prep.task, "mtl-inverted")?, losses)
        }
    };
    let rmse = rmse_by_band(&prep.task, &estimate, &DEPTH_BANDS)?;
    Ok(RepOutcome { rmse, speeds: estimate.speeds(), losses })
}

/// Inversion-stage timing per method. Training happens outside the timed
/// region for the network methods; the matched-field search is its
/// inversion stage, timed with fewer calls.
fn measure_timing(
    cfg: &BenchmarkConfig,
    prep: &PreparedWorld,
    task_refs: &[SoundSpeedProfile],
    task_samples: &[TrainingSample],
    mean_scenario: &AcousticScenario,
) -> Result<Vec<f64>> {
    let obs = prep.simulate_task_observation(1, cfg.noise_sigma)?;
    let mut out = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let seconds = match method {
            Method::Sip => time_median(cfg.fast_timing_calls, || {
                let _ = sip_invert(
                    prep.task.coded_location(),
                    prep.task.day_of_year,
                    task_refs,
                );
            }),
            Method::EofMfp => {
                let pso = PsoConfig::for_basis(&prep.basis, 1);
                time_median(cfg.slow_timing_calls, || {
                    let _ =
                        mfp_invert(&obs, &prep.basis, mean_scenario, &prep.geometry.pings, &pso);
                })
            }
            Method::Fnn => {
                let trained = fnn_train(task_samples, &cfg.mtl, 1)?;
                time_median(cfg.fast_timing_calls, || {
                    let _ =
                        invert(&trained.params, &obs.times, &prep.standardizer, prep.max_depth);
                })
            }
            Method::Mtl => {
                let (params, _) = run_mtl(prep, &cfg.mtl, 1)?;
                time_median(cfg.fast_timing_calls, || {
                    let _ = invert(&params, &obs.times, &prep.standardizer, prep.max_depth);
                })
            }
        };
        out.push(seconds);
    }
    Ok(out)
}

/// Write the plot data: truth-vs-inverted profile series and per-epoch
/// loss series, each as CSV plus a static SVG line rendering.
pub fn emit_plot_data(artifacts: &PlotArtifacts, out_dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    };

    let mut profiles_csv = String::from("depth_m,truth");
    for (name, _) in &artifacts.example_profiles {
        profiles_csv.push(',');
        profiles_csv.push_str(&name.to_ascii_lowercase());
    }
    profiles_csv.push('\n');
    for (i, d) in artifacts.depths.iter().enumerate() {
        profiles_csv.push_str(&format!("{d},{}", artifacts.truth[i]));
        for (_, speeds) in &artifacts.example_profiles {
            profiles_csv.push_str(&format!(",{}", speeds[i]));
        }
        profiles_csv.push('\n');
    }
    write("profiles.csv", profiles_csv)?;

    let epochs = artifacts.loss_series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut loss_csv = String::from("epoch");
    for (name, _) in &artifacts.loss_series {
        loss_csv.push(',');
        loss_csv.push_str(&name.to_ascii_lowercase());
    }
    loss_csv.push('\n');
    for e in 0..epochs {
        loss_csv.push_str(&format!("{}", e + 1));
        for (_, series) in &artifacts.loss_series {
            match series.get(e) {
                Some(v) => loss_csv.push_str(&format!(",{v}")),
                None => loss_csv.push(','),
            }
        }
        loss_csv.push('\n');
    }
    write("loss.csv", loss_csv)?;

    let profile_series: Vec<(String, Vec<(f64, f64)>)> =
        std::iter::once(("truth".to_string(), artifacts.truth.clone()))
            .chain(
                artifacts
                    .example_profiles
                    .iter()
                    .map(|(n, s)| (n.clone(), s.clone())),
            )
            .map(|(n, speeds)| {
                // depth grows downward in the rendering: x = speed, y = depth
                (n, speeds.iter().cloned().zip(artifacts.depths.iter().cloned()).collect())
            })
            .collect();
    write("profiles.svg", render_svg("sound speed (m/s) vs depth (m)", &profile_series, true))?;

    let loss_plot: Vec<(String, Vec<(f64, f64)>)> = artifacts
        .loss_series
        .iter()
        .map(|(n, s)| {
            (
                n.clone(),
                s.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
            )
        })
        .collect();
    write("loss.svg", render_svg("training loss vs epoch", &loss_plot, false))?;
    Ok(())
}

/// Minimal SVG line chart; `flip_y` renders the y axis downward (depth).
fn render_svg(title: &str, series: &[(String, Vec<(f64, f64)>)], flip_y: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 48.0;
    const COLORS: [&str; 6] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];

    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().cloned()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() || x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if !y0.is_finite() || y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| {
        let f = (y - y0) / (y1 - y0);
        let f = if flip_y { f } else { 1.0 - f };
        M + f * (H - 2.0 * M)
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> =
            pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            W - M - 80.0,
            40.0 + 16.0 * i as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

//! Three-layer inverter network with multi-task pretraining and
//! distance-weighted task finetuning.
//!
//! The input->hidden weights are shared across pretraining clusters; each
//! cluster owns its hidden->output weights. Only the shared weights
//! transfer to the task learner, whose per-sample learning rates are
//! proportional to inverse spatio-temporal distance and sum to the task
//! base rate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::CodedLocation;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    /// self -= scale * other
    pub fn sub_scaled(&mut self, other: &Matrix, scale: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= scale * b;
        }
    }
}

/// Weight matrices of the inverter; the last column of each is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// hidden x (input + 1)
    pub hidden_weights: Matrix,
    /// output x (hidden + 1)
    pub output_weights: Matrix,
}

impl NetworkParams {
    pub fn input_size(&self) -> usize {
        self.hidden_weights.cols - 1
    }
    pub fn hidden_size(&self) -> usize {
        self.hidden_weights.rows
    }
    pub fn output_size(&self) -> usize {
        self.output_weights.rows
    }
}

/// Network layer sizes; the defaults match the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        NetDims { input: 120, hidden: 300, output: 50 }
    }
}

/// Multi-task training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MtlConfig {
    pub dims: NetDims,
    /// K: available training clusters.
    pub cluster_count: usize,
    /// N: clusters sampled per pretraining epoch.
    pub clusters_per_epoch: usize,
    /// V: shots per sampled cluster.
    pub shots_per_cluster: usize,
    pub pretrain_epochs: usize,
    /// J: task learner epochs.
    pub task_epochs: usize,
    pub task_shots_per_epoch: usize,
    /// xi: multi-task pretraining rate, split across the clusters visited
    /// in an epoch. At the reference default the shared weights move very
    /// little on standardized data; raise it (up to ~4e-3) for pretraining
    /// that visibly converges within the epoch budget. See README.
    pub base_rate: f64,
    pub task_base_rate: f64,
    /// mu: L1 regularization weight (the cost formula uses an implicit
    /// unit weight; unit scale swamps the data term, hence configurable).
    pub l1_coefficient: f64,
    /// lambda for the learning-rate distance (default 0.9).
    pub lambda_rate: f64,
    /// Count the L1 term once per shot (the original formulation) rather than
    /// once per batch.
    pub per_shot_regularizer: bool,
    pub seed: u64,
}

impl Default for MtlConfig {
    fn default() -> Self {
        MtlConfig {
            dims: NetDims::default(),
            cluster_count: 10,
            clusters_per_epoch: 3,
            shots_per_cluster: 10,
            pretrain_epochs: 20,
            task_epochs: 20,
            task_shots_per_epoch: 5,
            base_rate: 2e-6,
            task_base_rate: 0.01,
            l1_coefficient: 1e-4,
            lambda_rate: 0.9,
            per_shot_regularizer: true,
            seed: 0,
        }
    }
}

impl MtlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters_per_epoch > self.cluster_count {
            return Err(Error::Config(format!(
                "clusters per epoch {} exceeds cluster count {}",
                self.clusters_per_epoch, self.cluster_count
            )));
        }
        for (name, v) in [
            ("cluster_count", self.cluster_count),
            ("clusters_per_epoch", self.clusters_per_epoch),
            ("shots_per_cluster", self.shots_per_cluster),
            ("task_shots_per_epoch", self.task_shots_per_epoch),
        ] {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.base_rate > 0.0) || !(self.task_base_rate > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_rate) {
            return Err(Error::Config(format!(
                "lambda_rate {} outside [0, 1]",
                self.lambda_rate
            )));
        }
        Ok(())
    }
}

/// One (standardized observation, standardized label) pair with the source
/// profile's sampling metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSample {
    pub input: Vec<f64>,
    pub label: Vec<f64>,
    pub location: CodedLocation,
    pub day_of_year: u32,
}

/// Z-score statistics: per-component for observations, scalar for speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub speed_mean: f64,
    pub speed_std: f64,
}

impl Standardizer {
    /// Fit on raw observation vectors and raw speed labels.
    pub fn fit(inputs: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<Self> {
        if inputs.is_empty() || labels.is_empty() {
            return Err(Error::Data("cannot fit a standardizer on empty data".into()));
        }
        let dim = inputs[0].len();
        let n = inputs.len() as f64;
        let mut input_mean = vec![0.0; dim];
        for v in inputs {
            if v.len() != dim {
                return Err(Error::Shape("inconsistent observation lengths".into()));
            }
            for (m, x) in input_mean.iter_mut().zip(v) {
                *m += x / n;
            }
        }
        let mut input_std = vec![0.0; dim];
        for v in inputs {
            for ((s, x), m) in input_std.iter_mut().zip(v).zip(&input_mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        for s in input_std.iter_mut() {
            *s = s.sqrt().max(1e-12);
        }

        let total: usize = labels.iter().map(|l| l.len()).sum();
        let speed_mean: f64 =
            labels.iter().flat_map(|l| l.iter()).sum::<f64>() / total as f64;
        let speed_var: f64 = labels
            .iter()
            .flat_map(|l| l.iter())
            .map(|s| (s - speed_mean) * (s - speed_mean))
            .sum::<f64>()
            / total as f64;
        Ok(Standardizer {
            input_mean,
            input_std,
            speed_mean,
            speed_std: speed_var.sqrt().max(1e-12),
        })
    }

    pub fn standardize_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_mean.len() {
            return Err(Error::Shape(format!(
                "observation length {} != standardizer dimension {}",
                raw.len(),
                self.input_mean.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn standardize_speeds(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|s| (s - self.speed_mean) / self.speed_std).collect()
    }

    pub fn destandardize_speeds(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|s| s * self.speed_std + self.speed_mean).collect()
    }

    /// Identity transform of a given input dimension, used in tests and by
    /// callers that pre-standardize.
    pub fn identity(input_dim: usize) -> Self {
        Standardizer {
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            speed_mean: 0.0,
            speed_std: 1.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Glorot-style uniform initialization, biases zero, seeded.
pub fn init_params(dims: NetDims, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |rows: usize, cols_no_bias: usize| {
        let r = (6.0 / (rows + cols_no_bias) as f64).sqrt();
        let mut m = Matrix::zeros(rows, cols_no_bias + 1);
        for row in 0..rows {
            for col in 0..cols_no_bias {
                m.set(row, col, rng.gen_range(-r..r));
            }
        }
        m
    };
    NetworkParams {
        hidden_weights: layer(dims.hidden, dims.input),
        output_weights: layer(dims.output, dims.hidden),
    }
}

/// Activations kept for backpropagation.
pub struct ForwardCache {
    pub hidden: Vec<f64>,
}

/// hidden = sigmoid(W_h [x;1]); output = W_o [hidden;1] (linear output).
pub fn forward(params: &NetworkParams, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != params.input_size() {
        return Err(Error::Shape(format!(
            "input length {} != network input size {}",
            input.len(),
            params.input_size()
        )));
    }
    let h_rows = params.hidden_size();
    let mut hidden = vec![0.0; h_rows];
    for (r, h) in hidden.iter_mut().enumerate() {
        let base = r * params.hidden_weights.cols;
        let row = &params.hidden_weights.data[base..base + params.hidden_weights.cols];
        let mut acc = row[input.len()]; // bias
        for (w, x) in row[..input.len()].iter().zip(input) {
            acc += w * x;
        }
        *h = sigmoid(acc);
    }
    let o_rows = params.output_size();
    let mut output = vec![0.0; o_rows];
    for (r, o) in output.iter_mut().enumerate() {
        let base = r * params.output_weights.cols;
        let row = &params.output_weights.data[base..base + params.output_weights.cols];
        let mut acc = row[hidden.len()];
        for (w, h) in row[..hidden.len()].iter().zip(&hidden) {
            acc += w * h;
        }
        *o = acc;
    }
    Ok((output, ForwardCache { hidden }))
}

/// Task cost: half squared error over the output layers.
pub fn task_cost(params: &NetworkParams, sample: &TrainingSample) -> Result<f64> {
    let (output, _) = forward(params, &sample.input)?;
    if output.len() != sample.label.len() {
        return Err(Error::Shape("label length != network output size".into()));
    }
    Ok(0.5
        * output
            .iter()
            .zip(&sample.label)
            .map(|(o, l)| (l - o) * (l - o))
            .sum::<f64>())
}

/// Pretraining cost over V shots: per-shot half squared error plus the L1
/// term, counted per shot when `per_shot_regularizer` holds.
pub fn pretrain_cost(
    params: &NetworkParams,
    samples: &[TrainingSample],
    mu: f64,
    per_shot_regularizer: bool,
) -> Result<f64> {
    let l1 = mu * (params.hidden_weights.l1_norm() + params.output_weights.l1_norm());
    let mut total = 0.0;
    for s in samples {
        total += task_cost(params, s)?;
        if per_shot_regularizer {
            total += l1;
        }
    }
    if !per_shot_regularizer {
        total += l1;
    }
    Ok(total)
}

/// Gradient of the half-squared-error data term for one sample; the
/// returned matrices have the same shapes as the weights.
fn data_gradient(
    params: &NetworkParams,
    sample: &TrainingSample,
    grad_hidden: &mut Matrix,
    grad_output: &mut Matrix,
) -> Result<f64> {
    let (output, cache) = forward(params, &sample.input)?;
    if output.len() != sample.label.len() {
        return Err(Error::Shape("label length != network output size".into()));
    }
    let h = &cache.hidden;
    let delta_out: Vec<f64> = output.iter().zip(&sample.label).map(|(o, l)| o - l).collect();

    for (r, d) in delta_out.iter().enumerate() {
        let base = r * grad_output.cols;
        for (c, hv) in h.iter().enumerate() {
            grad_output.data[base + c] += d * hv;
        }
        grad_output.data[base + h.len()] += d; // bias
    }

    let mut delta_h = vec![0.0; h.len()];
    for (r, d) in delta_out.iter().enumerate() {
        let base = r * params.output_weights.cols;
        for (c, dh) in delta_h.iter_mut().enumerate() {
            *dh += d * params.output_weights.data[base + c];
        }
    }
    for (dh, hv) in delta_h.iter_mut().zip(h) {
        *dh *= hv * (1.0 - hv);
    }
    for (r, d) in delta_h.iter().enumerate() {
        let base = r * grad_hidden.cols;
        for (c, x) in sample.input.iter().enumerate() {
            grad_hidden.data[base + c] += d * x;
        }
        grad_hidden.data[base + sample.input.len()] += d;
    }

    let cost = 0.5
        * delta_out.iter().map(|d| d * d).sum::<f64>();
    Ok(cost)
}

/// L1 subgradient with sign(0) = 0.
fn add_l1_subgradient(grad: &mut Matrix, weights: &Matrix, scale: f64) {
    for (g, w) in grad.data.iter_mut().zip(&weights.data) {
        *g += scale * w.signum() * if *w == 0.0 { 0.0 } else { 1.0 };
    }
}

/// Full gradient of the pretraining cost over a cluster's shots.
pub fn pretrain_gradient(
    shared_hidden: &Matrix,
    cluster_output: &Matrix,
    samples: &[TrainingSample],
    mu: f64,
    per_shot_regularizer: bool,
) -> Result<(Matrix, Matrix, f64)> {
    let params = NetworkParams {
        hidden_weights: shared_hidden.clone(),
        output_weights: cluster_output.clone(),
    };
    let mut grad_h = Matrix::zeros(shared_hidden.rows, shared_hidden.cols);
    let mut grad_o = Matrix::zeros(cluster_output.rows, cluster_output.cols);
    let mut cost = 0.0;
    for s in samples {
        cost += data_gradient(&params, s, &mut grad_h, &mut grad_o)?;
    }
    let reg_count = if per_shot_regularizer { samples.len() as f64 } else { 1.0 };
    add_l1_subgradient(&mut grad_h, shared_hidden, mu * reg_count);
    add_l1_subgradient(&mut grad_o, cluster_output, mu * reg_count);
    cost += reg_count * mu * (shared_hidden.l1_norm() + cluster_output.l1_norm());
    Ok((grad_h, grad_o, cost))
}

/// State of the multi-task learner: one shared hidden matrix plus one
/// output matrix per cluster.
#[derive(Debug, Clone)]
pub struct MultiTaskLearner {
    pub shared_hidden: Matrix,
    pub cluster_outputs: Vec<Matrix>,
}

impl MultiTaskLearner {
    pub fn init(cfg: &MtlConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let base = init_params(cfg.dims, rng.gen());
        let cluster_outputs = (0..cfg.cluster_count)
            .map(|_| init_params(cfg.dims, rng.gen()).output_weights)
            .collect();
        Ok(MultiTaskLearner {
            shared_hidden: base.hidden_weights,
            cluster_outputs,
        })
    }
}

/// One pretraining epoch: sample N clusters, compute each cluster's batch
/// gradient at the current shared weights, then apply every step at rate
/// xi/N — the shared matrix receives the sum of the N hidden-weight steps,
/// each cluster's output matrix its own step.
pub fn pretrain_epoch(
    learner: &mut MultiTaskLearner,
    cluster_samples: &[Vec<TrainingSample>],
    cfg: &MtlConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if cluster_samples.len() != learner.cluster_outputs.len() {
        return Err(Error::Config(format!(
            "{} sample groups for {} clusters",
            cluster_samples.len(),
            learner.cluster_outputs.len()
        )));
    }
    if cluster_samples.iter().any(|c| c.is_empty()) {
        return Err(Error::Data("empty pretraining cluster".into()));
    }
    let n = cfg.clusters_per_epoch;
    let chosen = sample_distinct(cluster_samples.len(), n, rng);
    let rate = cfg.base_rate / n as f64;

    let mut hidden_steps: Vec<Matrix> = Vec::with_capacity(n);
    let mut epoch_cost = 0.0;
    for &c in &chosen {
        let shots = sample_shots(&cluster_samples[c], cfg.shots_per_cluster, rng);
        let (grad_h, grad_o, cost) = pretrain_gradient(
            &learner.shared_hidden,
            &learner.cluster_outputs[c],
            &shots,
            cfg.l1_coefficient,
            cfg.per_shot_regularizer,
        )?;
        learner.cluster_outputs[c].sub_scaled(&grad_o, rate);
        hidden_steps.push(grad_h);
        epoch_cost += cost;
    }
    for grad_h in &hidden_steps {
        learner.shared_hidden.sub_scaled(grad_h, rate);
    }
    Ok(epoch_cost)
}

fn sample_distinct(total: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    idx
}

fn sample_shots(pool: &[TrainingSample], count: usize, rng: &mut ChaCha8Rng) -> Vec<TrainingSample> {
    if pool.len() >= count {
        sample_distinct(pool.len(), count, rng)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    } else {
        (0..count).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
    }
}

/// Per-reference learning rates: eta_i = xi * (1/phi_i) / sum_j (1/phi_j).
/// Zero distances take the whole budget, split equally among themselves.
pub fn task_learning_rates(phis: &[f64], base_rate: f64) -> Result<Vec<f64>> {
    if phis.is_empty() {
        return Err(Error::Data("no reference distances".into()));
    }
    if phis.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Domain("distances must be finite and nonnegative".into()));
    }
    let zeros = phis.iter().filter(|p| **p == 0.0).count();
    if zeros > 0 {
        return Ok(phis
            .iter()
            .map(|p| if *p == 0.0 { base_rate / zeros as f64 } else { 0.0 })
            .collect());
    }
    if phis.iter().all(|p| *p == phis[0]) {
        // equal distances reduce to an exact even split
        return Ok(vec![base_rate / phis.len() as f64; phis.len()]);
    }
    let inv_sum: f64 = phis.iter().map(|p| 1.0 / p).sum();
    Ok(phis.iter().map(|p| base_rate * (1.0 / p) / inv_sum).collect())
}

/// Per-sample SGD step on the task cost, updating both layers.
fn sgd_step(params: &mut NetworkParams, sample: &TrainingSample, rate: f64) -> Result<f64> {
    let mut grad_h = Matrix::zeros(params.hidden_weights.rows, params.hidden_weights.cols);
    let mut grad_o = Matrix::zeros(params.output_weights.rows, params.output_weights.cols);
    let cost = data_gradient(params, sample, &mut grad_h, &mut grad_o)?;
    params.hidden_weights.sub_scaled(&grad_h, rate);
    params.output_weights.sub_scaled(&grad_o, rate);
    Ok(cost)
}

/// Finetuning trace: the converged parameters plus the training-loss
/// series. `epoch_losses[j]` is the mean task cost over the whole sample
/// pool evaluated at the start of epoch j (before its updates), so the
/// first entry reflects the initialization alone.
pub struct FinetuneResult {
    pub params: NetworkParams,
    pub epoch_losses: Vec<f64>,
}

/// Train a task learner for `epochs` epochs of `shots_per_epoch` per-sample
/// SGD steps; `rates[i]` is the learning rate used whenever sample `i` is
/// drawn. Shots are drawn without replacement when the pool is large
/// enough, with replacement otherwise. This is the single training path
/// shared by the multi-task learner's task phase and the plain-FNN
/// baseline, which differ only in the hidden-weight initialization and the
/// rate vector.
pub fn train_task_learner(
    initial: NetworkParams,
    samples: &[TrainingSample],
    rates: &[f64],
    epochs: usize,
    shots_per_epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FinetuneResult> {
    if samples.is_empty() {
        return Err(Error::Data("no task samples".into()));
    }
    if rates.len() != samples.len() {
        return Err(Error::Shape("one learning rate per task sample required".into()));
    }
    let mut params = initial;
    let mut epoch_losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut pool_loss = 0.0;
        for s in samples {
            pool_loss += task_cost(&params, s)?;
        }
        epoch_losses.push(pool_loss / samples.len() as f64);

        let drawn: Vec<usize> = if samples.len() >= shots_per_epoch {
            sample_distinct(samples.len(), shots_per_epoch, rng)
        } else {
            (0..shots_per_epoch).map(|_| rng.gen_range(0..samples.len())).collect()
        };
        for i in drawn.iter() {
            sgd_step(&mut params, &samples[*i], rates[*i])?;
        }
    }
    Ok(FinetuneResult { params, epoch_losses })
}

/// Finetune from pretrained shared weights: fresh random output weights,
/// inverse-distance rates against the task metadata.
pub fn finetune_task(
    shared_hidden: &Matrix,
    task_location: CodedLocation,
    task_day: u32,
    samples: &[TrainingSample],
    cfg: &MtlConfig,
    seed: u64,
) -> Result<FinetuneResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh = init_params(cfg.dims, rng.gen());
    let initial = NetworkParams {
        hidden_weights: shared_hidden.clone(),
        output_weights: fresh.output_weights,
    };
    let phis: Vec<f64> = samples
        .iter()
        .map(|s| {
            crate::profile::time_difference(task_day, s.day_of_year).map(|phi_a| {
                let phi_b = ((task_location.x - s.location.x).powi(2)
                    + (task_location.y - s.location.y).powi(2))
                .sqrt();
                cfg.lambda_rate * phi_a + (1.0 - cfg.lambda_rate) * phi_b
            })
        })
        .collect::<Result<_>>()?;
    let rates = task_learning_rates(&phis, cfg.task_base_rate)?;
    train_task_learner(
        initial,
        samples,
        &rates,
        cfg.task_epochs,
        cfg.task_shots_per_epoch,
        &mut rng,
    )
}

/// One forward pass plus de-standardization onto a layer grid.
pub fn invert(
    params: &NetworkParams,
    observation: &[f64],
    standardizer: &Standardizer,
    max_depth: f64,
) -> Result<Vec<(f64, f64)>> {
    let input = standardizer.standardize_input(observation)?;
    let (output, _) = forward(params, &input)?;
    let speeds = standardizer.destandardize_speeds(&output);
    let grid = crate::profile::layer_grid(max_depth, speeds.len());
    Ok(grid.into_iter().zip(speeds).collect())
}

//! Neural inverse kinematics: a small MLP trained to recover the bending
//! angle from a desired tip position.
//!
//! The dataset is produced by the forward kinematics (uniform curvature,
//! tip angles sampled over the motion range), split into training and
//! validation parts. The network is a sigmoid MLP with a linear output,
//! trained with ADAM on mean-squared error; inputs and targets are
//! standardized per feature. Training is single threaded and fully seeded:
//! a fixed seed reproduces the final weights bit for bit.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{BendingMode, WristModel};
use crate::error::{Error, Result};
use crate::kinematics::{tip_position, PccState};

/// Hidden-layer activation. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
    LeakyRelu,
    Tanh,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    0.01 * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative in terms of pre-activation `z` and activation `a`.
    fn derivative(&self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.01
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Per-feature standardization constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: DVector::zeros(dim),
            std: DVector::from_element(dim, 1.0),
        }
    }

    /// Fit mean and standard deviation over the columns of `data`.
    pub fn fit(data: &DMatrix<f64>) -> Self {
        let n = data.ncols().max(1) as f64;
        let mean = data.column_sum() / n;
        let mut var = DVector::zeros(data.nrows());
        for col in data.column_iter() {
            let d = col - &mean;
            var += d.component_mul(&d);
        }
        let std = (var / n).map(|v| v.sqrt().max(1e-12));
        Normalizer { mean, std }
    }

    pub fn normalize(&self, v: &DVector<f64>) -> DVector<f64> {
        (v - &self.mean).component_div(&self.std)
    }

    pub fn denormalize(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.std) + &self.mean
    }

    fn normalize_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_columns(
            &m.column_iter()
                .map(|c| self.normalize(&c.clone_owned()))
                .collect::<Vec<_>>(),
        )
    }
}

/// One tip-position sample with its ground-truth bending angle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IkSample {
    /// Desired tip position (m).
    pub x: f64,
    pub y: f64,
    /// Tip bending angle that reaches it (rad).
    pub theta: f64,
}

/// Train/validation split of the generated samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<IkSample>,
    pub validation: Vec<IkSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sample tip angles uniformly over the motion range, compute tip positions
/// by forward kinematics, and split train/validation. Same seed, same
/// dataset.
pub fn generate_dataset(
    model: &WristModel,
    n_samples: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    model.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("dataset needs at least one sample"));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid("train fraction must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let theta = rng.gen_range(-model.theta_max..model.theta_max);
        let tip = tip_of_angle(model, theta)?;
        samples.push(IkSample {
            x: tip.0,
            y: tip.1,
            theta,
        });
    }
    let n_train = (n_samples as f64 * train_fraction).round() as usize;
    let validation = samples.split_off(n_train.min(n_samples));
    Ok(Dataset {
        train: samples,
        validation,
    })
}

/// Tip position for a uniform-curvature tip angle.
pub fn tip_of_angle(model: &WristModel, theta: f64) -> Result<(f64, f64)> {
    let coupling = BendingMode::Uniform.coupling(model.n());
    let seg_angles = coupling * nalgebra::dvector![theta];
    let state = PccState::at_rest(seg_angles)?;
    let tip = tip_position(&state, &model.geometry)?;
    Ok((tip.x, tip.y))
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    /// Initial learning rate; decays exponentially to `lr_final` over the
    /// epoch budget.
    pub lr_initial: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay per step.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden: vec![200, 100, 100],
            activation: Activation::Sigmoid,
            batch_size: 100,
            epochs: 100,
            lr_initial: 0.01,
            lr_final: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            seed: 7,
        }
    }
}

impl TrainingConfig {
    fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_initial;
        }
        let u = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_initial * (self.lr_final / self.lr_initial).powf(u)
    }
}

/// The trained network: layer weights, activation tag, and the
/// standardization constants baked in at training time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpNetwork {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub activation: Activation,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    /// Axis-aligned hull of the training inputs; queries outside it carry an
    /// out-of-workspace warning.
    pub input_min: DVector<f64>,
    pub input_max: DVector<f64>,
}

impl MlpNetwork {
    /// Seeded Xavier-uniform initialization.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("network needs input and output layers"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let last = layer_sizes.len() - 2;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            // Glorot uniform; sigmoid hidden layers take the classic x4 gain
            // (sigmoid has 1/4 the slope of tanh at the origin).
            let gain = if l < last && activation == Activation::Sigmoid {
                4.0
            } else {
                1.0
            };
            let limit = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                rng.gen_range(-limit..limit)
            }));
            biases.push(DVector::zeros(fan_out));
        }
        let dim = layer_sizes[0];
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
            input_norm: Normalizer::identity(dim),
            output_norm: Normalizer::identity(*layer_sizes.last().unwrap()),
            input_min: DVector::from_element(dim, f64::NEG_INFINITY),
            input_max: DVector::from_element(dim, f64::INFINITY),
        })
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass on normalized column-sample batches, keeping pre- and
    /// post-activation values for backprop.
    fn forward_cached(&self, input: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut act = Vec::with_capacity(self.n_layers() + 1);
        act.push(input.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * act.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b;
            }
            let a = if l + 1 == self.n_layers() {
                z.clone()
            } else {
                z.map(|v| self.activation.apply(v))
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    /// Normalized-space forward pass.
    fn forward_normalized(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let (_, act) = self.forward_cached(input);
        act.last().unwrap().clone()
    }

    /// Mean-squared-error loss and parameter gradients for one batch of
    /// normalized samples (columns). Exposed so the backprop path can be
    /// checked against finite differences from outside.
    pub fn loss_and_gradients(
        &self,
        input: &DMatrix<f64>,
        target: &DMatrix<f64>,
    ) -> (f64, Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
        let (pre, act) = self.forward_cached(input);
        let output = act.last().unwrap();
        let diff = output - target;
        let count = (diff.nrows() * diff.ncols()) as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;

        let mut w_grads = vec![DMatrix::zeros(0, 0); self.n_layers()];
        let mut b_grads = vec![DVector::zeros(0); self.n_layers()];
        let mut delta = diff * (2.0 / count);
        for l in (0..self.n_layers()).rev() {
            if l + 1 != self.n_layers() {
                // Hidden layer: fold in the activation derivative.
                delta.zip_zip_apply(&pre[l], &act[l + 1], |d, z, a| {
                    *d *= self.activation.derivative(z, a)
                });
            }
            w_grads[l] = &delta * act[l].transpose();
            b_grads[l] = delta.column_sum();
            if l > 0 {
                delta = self.weights[l].transpose() * delta;
            }
        }
        (loss, w_grads, b_grads)
    }

    /// MSE over a sample set, in normalized target space.
    fn normalized_loss(&self, samples: &[IkSample]) -> f64 {
        let (x, y) = to_matrices(samples);
        let xn = self.input_norm.normalize_columns(&x);
        let yn = self.output_norm.normalize_columns(&y);
        let out = self.forward_normalized(&xn);
        let diff = out - yn;
        diff.iter().map(|d| d * d).sum::<f64>() / (diff.ncols().max(1) as f64)
    }

    /// RMSE of the denormalized prediction (rad) over a sample set.
    pub fn rmse(&self, samples: &[IkSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let se: f64 = samples
            .iter()
            .map(|s| {
                let p = self.predict(s.x, s.y).theta;
                (p - s.theta) * (p - s.theta)
            })
            .sum();
        (se / samples.len() as f64).sqrt()
    }
}

/// Prediction with an out-of-workspace flag for queries outside the
/// training hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub theta: f64,
    pub out_of_workspace: bool,
}

impl MlpNetwork {
    /// Predict the bending angle for a desired tip position.
    pub fn predict(&self, x: f64, y: f64) -> Prediction {
        let input = nalgebra::dvector![x, y];
        let margin = 0.05;
        let out_of_workspace = input.iter().enumerate().any(|(i, v)| {
            let span = (self.input_max[i] - self.input_min[i]).abs().max(1e-12);
            *v < self.input_min[i] - margin * span || *v > self.input_max[i] + margin * span
        });
        let xn = self.input_norm.normalize(&input);
        let out = self.forward_normalized(&DMatrix::from_columns(&[xn]));
        let theta = self.output_norm.denormalize(&out.column(0).clone_owned())[0];
        Prediction {
            theta,
            out_of_workspace,
        }
    }
}

/// Per-epoch training statistics (losses in normalized target space).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

/// Training outcome summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    /// L2 norm of the last minibatch gradient.
    pub final_gradient_norm: f64,
    /// Validation RMSE in radians.
    pub val_rmse: f64,
    /// 100 * (1 - RMSE / target range), the headline accuracy figure.
    pub accuracy: f64,
}

fn to_matrices(samples: &[IkSample]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = samples.len();
    let mut x = DMatrix::zeros(2, n);
    let mut y = DMatrix::zeros(1, n);
    for (i, s) in samples.iter().enumerate() {
        x[(0, i)] = s.x;
        x[(1, i)] = s.y;
        y[(0, i)] = s.theta;
    }
    (x, y)
}

struct AdamState {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
    step: u64,
}

impl AdamState {
    fn new(net: &MlpNetwork) -> Self {
        AdamState {
            m_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            v_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            m_b: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            v_b: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            step: 0,
        }
    }

    fn update(
        &mut self,
        net: &mut MlpNetwork,
        w_grads: &[DMatrix<f64>],
        b_grads: &[DVector<f64>],
        lr: f64,
        cfg: &TrainingConfig,
    ) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for l in 0..net.weights.len() {
            adam_tensor(
                &mut net.weights[l],
                &mut self.m_w[l],
                &mut self.v_w[l],
                &w_grads[l],
                lr,
                bc1,
                bc2,
                cfg,
            );
            adam_vector(
                &mut net.biases[l],
                &mut self.m_b[l],
                &mut self.v_b[l],
                &b_grads[l],
                lr,
                bc1,
                bc2,
                cfg,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_tensor(
    w: &mut DMatrix<f64>,
    m: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    g: &DMatrix<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
    cfg: &TrainingConfig,
) {
    for i in 0..w.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * w[i]);
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_vector(
    w: &mut DVector<f64>,
    m: &mut DVector<f64>,
    v: &mut DVector<f64>,
    g: &DVector<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
    cfg: &TrainingConfig,
) {
    for i in 0..w.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        // No decay on biases.
        w[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Train an MLP on the dataset. Returns the network with normalization
/// constants baked in plus the per-epoch report.
pub fn train(dataset: &Dataset, config: &TrainingConfig) -> Result<(MlpNetwork, TrainingReport)> {
    if dataset.train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if config.batch_size == 0 || config.batch_size > dataset.train.len() {
        return Err(Error::invalid(format!(
            "batch size {} outside 1..={}",
            config.batch_size,
            dataset.train.len()
        )));
    }

    let mut sizes = vec![2usize];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut net = MlpNetwork::init(&sizes, config.activation, config.seed)?;

    let (x_train, y_train) = to_matrices(&dataset.train);
    net.input_norm = Normalizer::fit(&x_train);
    net.output_norm = Normalizer::fit(&y_train);
    net.input_min = DVector::from_fn(2, |i, _| x_train.row(i).min());
    net.input_max = DVector::from_fn(2, |i, _| x_train.row(i).max());

    let xn = net.input_norm.normalize_columns(&x_train);
    let yn = net.output_norm.normalize_columns(&y_train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut adam = AdamState::new(&net);
    let mut indices: Vec<usize> = (0..dataset.train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut final_gradient_norm = 0.0;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        indices.shuffle(&mut rng);
        let mut batch_losses = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            let xb = DMatrix::from_columns(
                &chunk.iter().map(|&i| xn.column(i).clone_owned()).collect::<Vec<_>>(),
            );
            let yb = DMatrix::from_columns(
                &chunk.iter().map(|&i| yn.column(i).clone_owned()).collect::<Vec<_>>(),
            );
            let (loss, w_grads, b_grads) = net.loss_and_gradients(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::TrainingFailure { epoch });
            }
            adam.update(&mut net, &w_grads, &b_grads, lr, config);
            final_gradient_norm = gradient_norm(&w_grads, &b_grads);
            batch_losses += loss;
            batches += 1;
        }
        // Epoch training loss is the mean minibatch loss, validation is the
        // full held-out set at epoch end.
        let train_loss = batch_losses / batches as f64;
        let val_loss = net.normalized_loss(&dataset.validation);
        if !val_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch });
        }
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            learning_rate: lr,
        });
    }

    let val_rmse = net.rmse(&dataset.validation);
    let range = {
        let min = dataset.train.iter().map(|s| s.theta).fold(f64::INFINITY, f64::min);
        let max = dataset.train.iter().map(|s| s.theta).fold(f64::NEG_INFINITY, f64::max);
        (max - min).max(1e-12)
    };
    let report = TrainingReport {
        epochs,
        final_gradient_norm,
        val_rmse,
        accuracy: 100.0 * (1.0 - val_rmse / range),
    };
    Ok((net, report))
}

fn gradient_norm(w_grads: &[DMatrix<f64>], b_grads: &[DVector<f64>]) -> f64 {
    let sum: f64 = w_grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        + b_grads
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>();
    sum.sqrt()
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct NetworkFile {
    version: u32,
    network: MlpNetwork,
}

impl MlpNetwork {
    /// Write the network as versioned JSON; floats round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = NetworkFile {
            version: NETWORK_FORMAT_VERSION,
            network: self.clone(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| Error::invalid(format!("network serialization failed: {e}")))?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(json.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.display().to_string(),
            });
        }
        let text = std::fs::read_to_string(path)?;
        let file: NetworkFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad network file {}: {e}", path.display())))?;
        if file.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported network format version {}",
                file.version
            )));
        }
        Ok(file.network)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tiny_config(epochs: usize) -> TrainingConfig {
        TrainingConfig {
            hidden: vec![16, 8],
            batch_size: 50,
            epochs,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn dataset_size_split_and_determinism() {
        let model = WristModel::default();
        let a = generate_dataset(&model, 1000, 0.75, 42).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a.train.len(), 750);
        assert_eq!(a.validation.len(), 250);
        let b = generate_dataset(&model, 1000, 0.75, 42).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        // Reachability: every sample reproduces its tip position.
        for s in a.train.iter().take(20) {
            let (x, y) = tip_of_angle(&model, s.theta).unwrap();
            assert_abs_diff_eq!(x, s.x, epsilon = 1e-15);
            assert_abs_diff_eq!(y, s.y, epsilon = 1e-15);
        }
    }

    #[test]
    fn straight_pose_maps_to_total_length() {
        let model = WristModel::default();
        let (x, y) = tip_of_angle(&model, 0.0).unwrap();
        assert_abs_diff_eq!(x, model.total_length(), epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_epoch_run_returns_initialization() {
        let model = WristModel::default();
        let data = generate_dataset(&model, 200, 0.75, 1).unwrap();
        let cfg = tiny_config(0);
        let (net, report) = train(&data, &cfg).unwrap();
        assert!(report.epochs.is_empty());
        let mut sizes = vec![2usize];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let fresh = MlpNetwork::init(&sizes, cfg.activation, cfg.seed).unwrap();
        assert_eq!(net.weights, fresh.weights);
        assert_eq!(net.biases, fresh.biases);
    }

    #[test]
    fn training_is_deterministic_bit_for_bit() {
        let model = WristModel::default();
        let data = generate_dataset(&model, 300, 0.75, 3).unwrap();
        let cfg = tiny_config(5);
        let (a, _) = train(&data, &cfg).unwrap();
        let (b, _) = train(&data, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }

    #[test]
    fn gradients_match_finite_differences_on_a_tiny_network() {
        for activation in [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::LeakyRelu,
        ] {
            let mut net = MlpNetwork::init(&[2, 3, 2, 1], activation, 17).unwrap();
            // Nonzero biases exercise their gradient path too.
            for b in net.biases.iter_mut() {
                b.fill(0.1);
            }
            let x = DMatrix::from_column_slice(2, 3, &[0.3, -0.8, 1.1, 0.4, -0.2, 0.9]);
            let y = DMatrix::from_column_slice(1, 3, &[0.5, -0.3, 0.8]);
            let (_, w_grads, b_grads) = net.loss_and_gradients(&x, &y);

            let h = 1e-5;
            let mut check = |analytic: f64, perturbed: &mut f64, net: &mut MlpNetwork| {
                let orig = *perturbed;
                // This closure owns no borrow of net; recompute loss at +/-h.
                *perturbed = orig + h;
                let (lp, _, _) = net.loss_and_gradients(&x, &y);
                *perturbed = orig - h;
                let (lm, _, _) = net.loss_and_gradients(&x, &y);
                *perturbed = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    rel < 1e-6,
                    "{activation:?}: grad {analytic:.9e} vs fd {fd:.9e} (rel {rel:.3e})"
                );
            };
            for l in 0..net.weights.len() {
                for idx in 0..net.weights[l].len() {
                    let g = w_grads[l][idx];
                    let mut n2 = net.clone();
                    let ptr = &mut n2.weights[l][idx] as *mut f64;
                    // Safe: ptr stays valid for the closure call below.
                    unsafe { check(g, &mut *ptr, &mut n2) };
                }
                for idx in 0..net.biases[l].len() {
                    let g = b_grads[l][idx];
                    let mut n2 = net.clone();
                    let ptr = &mut n2.biases[l][idx] as *mut f64;
                    unsafe { check(g, &mut *ptr, &mut n2) };
                }
            }
        }
    }

    #[test]
    fn loss_decreases_and_round_trip_prediction_works() {
        let model = WristModel::default();
        let data = generate_dataset(&model, 600, 0.75, 11).unwrap();
        let cfg = TrainingConfig {
            hidden: vec![32, 16],
            batch_size: 75,
            epochs: 60,
            ..TrainingConfig::default()
        };
        let (net, report) = train(&data, &cfg).unwrap();
        let first = report.epochs.first().unwrap().train_loss;
        let last = report.epochs.last().unwrap().train_loss;
        assert!(
            last * 10.0 < first,
            "training loss only moved {first:.3e} -> {last:.3e}"
        );
        // Transient tolerance: 5% relative, or 5% of the initial loss in
        // absolute terms once the loss sits at its noise floor.
        for pair in report.epochs.windows(2) {
            let rise = pair[1].train_loss - pair[0].train_loss;
            assert!(
                rise <= 0.05 * pair[0].train_loss.max(first),
                "transient increase beyond tolerance: {} -> {}",
                pair[0].train_loss,
                pair[1].train_loss
            );
        }
        // Straight pose.
        let p = net.predict(model.total_length(), 0.0);
        assert!(p.theta.abs() < 0.01, "straight pose predicted {}", p.theta);
        assert!(!p.out_of_workspace);
        // Far outside the reachable tube.
        let p = net.predict(0.5, 0.5);
        assert!(p.out_of_workspace);
    }

    #[test]
    fn serialization_round_trips_bit_for_bit() {
        let model = WristModel::default();
        let data = generate_dataset(&model, 200, 0.75, 23).unwrap();
        let (net, _) = train(&data, &tiny_config(3)).unwrap();
        let dir = std::env::temp_dir().join("softwrist-net-test");
        let path = dir.join("ik.json");
        net.save(&path).unwrap();
        let loaded = MlpNetwork::load(&path).unwrap();
        assert_eq!(net, loaded);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_network_file_is_reported() {
        let err = MlpNetwork::load(Path::new("/nonexistent/net.json")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { .. }));
    }

    proptest! {
        #[test]
        fn normalization_round_trip(
            x in -1.0e3..1.0e3f64,
            y in -1.0e3..1.0e3f64,
            mx in -10.0..10.0f64,
            sx in 0.01..100.0f64,
        ) {
            let norm = Normalizer {
                mean: nalgebra::dvector![mx, -mx],
                std: nalgebra::dvector![sx, 2.0 * sx],
            };
            let v = nalgebra::dvector![x, y];
            let back = norm.denormalize(&norm.normalize(&v));
            prop_assert!((back - &v).amax() < 1e-12 * (1.0 + x.abs().max(y.abs())));
        }
    }
}

//! ReLU multilayer perceptron regressor trained with mini-batch Adam,
//! seeded restarts, a held-out validation split, and early stopping. Serves
//! as the learning baseline next to the interpolants.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::numkit::{dot, Matrix};
use crate::par;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum MlpError {
    /// Every restart diverged to a non-finite loss.
    #[error("all {restarts} restarts diverged to non-finite loss")]
    AllRestartsDiverged { restarts: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Training protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub early_stop_threshold: f64,
    pub max_epochs: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100, 100, 100],
            learning_rate: 1e-3,
            batch_size: 20,
            validation_fraction: 0.1,
            early_stop_threshold: 1e-6,
            max_epochs: 500,
            restarts: 10,
            seed: 0,
        }
    }
}

impl MlpConfig {
    /// The published protocol's literal settings (10^-8 learning rate, 100
    /// restarts); far slower to converge than the defaults.
    pub fn paper_mode() -> Self {
        Self {
            learning_rate: 1e-8,
            restarts: 100,
            ..Self::default()
        }
    }
}

/// One affine layer; hidden layers apply ReLU, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// A trained network mapping `R^d -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Per-restart training diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub validation_mse: f64,
    pub epochs_run: usize,
    /// Non-finite loss was hit; the restart was abandoned.
    pub diverged: bool,
}

/// Outcome of a full training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub selected_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

/// Trains and returns the best restart's model.
pub fn train(data: &Dataset, config: &MlpConfig) -> Result<MlpModel, MlpError> {
    train_detailed(data, config).map(|o| o.model)
}

/// Trains with per-restart diagnostics. Restarts run independently (in
/// parallel when enabled) and the winner is the lowest `(validation MSE,
/// restart index)`, so the result is schedule-independent.
pub fn train_detailed(data: &Dataset, config: &MlpConfig) -> Result<TrainOutcome, MlpError> {
    let n = data.len();
    assert!(n >= 10, "training needs at least 10 points");
    assert!(config.batch_size >= 1 && config.restarts >= 1);
    assert!(
        config.validation_fraction > 0.0 && config.validation_fraction < 1.0,
        "validation fraction must be in (0,1)"
    );
    assert!(config.hidden_layers.iter().all(|&w| w >= 1));

    let results = par::map_range(0..config.restarts, |r| run_restart(data, config, r));

    let mut best: Option<(usize, f64)> = None;
    let mut summaries = Vec::with_capacity(config.restarts);
    for (r, res) in results.iter().enumerate() {
        summaries.push(res.summary.clone());
        if !res.summary.diverged {
            let mse = res.summary.validation_mse;
            if best.is_none_or(|(_, b)| mse < b) {
                best = Some((r, mse));
            }
        }
    }
    let Some((selected, _)) = best else {
        return Err(MlpError::AllRestartsDiverged {
            restarts: config.restarts,
        });
    };
    let model = results
        .into_iter()
        .nth(selected)
        .and_then(|r| r.model)
        .expect("selected restart has a model");
    Ok(TrainOutcome {
        model,
        selected_restart: selected,
        restarts: summaries,
    })
}

struct RestartResult {
    summary: RestartSummary,
    model: Option<MlpModel>,
}

fn run_restart(data: &Dataset, config: &MlpConfig, restart: usize) -> RestartResult {
    let n = data.len();
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, restart as u64));

    // Seeded validation split.
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = indices.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let mut model = init_model(d, &config.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&model);
    let mut step = 0u64;
    let mut epochs_run = 0;
    let mut diverged = false;

    'epochs: for _ in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.batch_size) {
            let (loss, grads) = batch_gradients(&model, data, batch);
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            step += 1;
            adam.update(&mut model, &grads, config.learning_rate, step);
        }
        epochs_run += 1;
        if !model_is_finite(&model) {
            diverged = true;
            break;
        }
        if validation_mse(&model, data, val_idx) < config.early_stop_threshold {
            break;
        }
    }

    let validation_mse = if diverged {
        f64::INFINITY
    } else {
        validation_mse(&model, data, val_idx)
    };
    RestartResult {
        summary: RestartSummary {
            restart,
            validation_mse,
            epochs_run,
            diverged,
        },
        model: (!diverged).then_some(model),
    }
}

fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 step keeps restart streams well separated.
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn init_model(d: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> MlpModel {
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let weights = Matrix::from_fn(fan_out, fan_in, |_, _| {
                (rng.random::<f64>() * 2.0 - 1.0) * limit
            });
            Layer {
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    MlpModel { layers }
}

fn model_is_finite(model: &MlpModel) -> bool {
    model
        .layers
        .iter()
        .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
}

impl MlpModel {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    /// ReLU on/off pattern per hidden layer at `x`.
    pub fn activation_pattern(&self, x: &[f64]) -> Vec<Vec<bool>> {
        let mut pattern = Vec::with_capacity(self.layers.len() - 1);
        let mut a = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            a = layer_forward(layer, &a, true);
            pattern.push(a.iter().map(|&v| v > 0.0).collect());
        }
        pattern
    }

    pub fn to_json(&self) -> serde_json::Value {
        let layers: Vec<LayerJson> = self
            .layers
            .iter()
            .map(|l| LayerJson {
                rows: l.weights.rows(),
                cols: l.weights.cols(),
                weights: l.weights.data().to_vec(),
                bias: l.bias.clone(),
            })
            .collect();
        serde_json::json!({ "layers": layers })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, MlpError> {
        let parsed: ModelJson = serde_json::from_value(v.clone())?;
        let layers = parsed
            .layers
            .into_iter()
            .map(|l| Layer {
                weights: Matrix::from_vec(l.rows, l.cols, l.weights),
                bias: l.bias,
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), MlpError> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_json(&v)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
struct ModelJson {
    layers: Vec<LayerJson>,
}

fn layer_forward(layer: &Layer, input: &[f64], relu: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(layer.weights.rows());
    for (r, b) in layer.bias.iter().enumerate() {
        let z = dot(layer.weights.row(r), input) + b;
        out.push(if relu { z.max(0.0) } else { z });
    }
    out
}

/// Forward pass; finite input yields finite output for finite weights.
pub fn predict(model: &MlpModel, q: &[f64]) -> f64 {
    assert_eq!(q.len(), model.input_dim(), "query dimension mismatch");
    let last = model.layers.len() - 1;
    let mut a = q.to_vec();
    for (l, layer) in model.layers.iter().enumerate() {
        a = layer_forward(layer, &a, l < last);
    }
    a[0]
}

/// Batch prediction over query rows; parallel when enabled.
pub fn predict_batch(model: &MlpModel, queries: &Matrix) -> Vec<f64> {
    par::map_range(0..queries.rows(), |i| predict(model, queries.row(i)))
}

struct LayerGrad {
    weights: Matrix,
    bias: Vec<f64>,
}

/// Mean-squared-error loss and gradients over one batch.
fn batch_gradients(model: &MlpModel, data: &Dataset, batch: &[usize]) -> (f64, Vec<LayerGrad>) {
    let mut grads: Vec<LayerGrad> = model
        .layers
        .iter()
        .map(|l| LayerGrad {
            weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
            bias: vec![0.0; l.bias.len()],
        })
        .collect();
    let last = model.layers.len() - 1;
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;

    for &idx in batch {
        // Forward, keeping post-activation values per layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(model.layers.len() + 1);
        acts.push(data.point(idx).to_vec());
        for (l, layer) in model.layers.iter().enumerate() {
            let a = layer_forward(layer, &acts[l], l < last);
            acts.push(a);
        }
        let pred = acts[last + 1][0];
        let err = pred - data.response(idx);
        loss += err * err * inv;

        // Backward.
        let mut delta = vec![2.0 * err * inv];
        for l in (0..model.layers.len()).rev() {
            let input = &acts[l];
            let grad = &mut grads[l];
            for (r, &dr) in delta.iter().enumerate() {
                grad.bias[r] += dr;
                let grow = grad.weights.row_mut(r);
                for (g, x) in grow.iter_mut().zip(input) {
                    *g += dr * x;
                }
            }
            if l > 0 {
                let layer = &model.layers[l];
                let mut prev = vec![0.0; layer.weights.cols()];
                for (r, &dr) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(layer.weights.row(r)) {
                        *p += dr * w;
                    }
                }
                // ReLU mask: gradient flows only through active units.
                for (p, &a) in prev.iter_mut().zip(&acts[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
    (loss, grads)
}

fn validation_mse(model: &MlpModel, data: &Dataset, indices: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &i in indices {
        let e = predict(model, data.point(i)) - data.response(i);
        acc += e * e;
    }
    acc / indices.len() as f64
}

struct AdamState {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        let zero = |m: &MlpModel| -> Vec<LayerGrad> {
            m.layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect()
        };
        Self {
            m: zero(model),
            v: zero(model),
        }
    }

    fn update(&mut self, model: &mut MlpModel, grads: &[LayerGrad], lr: f64, step: u64) {
        let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
        for (l, grad) in grads.iter().enumerate() {
            let layer = &mut model.layers[l];
            adam_step(
                layer.weights.data_mut(),
                grad.weights.data(),
                self.m[l].weights.data_mut(),
                self.v[l].weights.data_mut(),
                lr,
                bc1,
                bc2,
            );
            adam_step(
                &mut layer.bias,
                &grad.bias,
                &mut self.m[l].bias,
                &mut self.v[l].bias,
                lr,
                bc1,
                bc2,
            );
        }
    }
}

fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
        let mhat = *mi / bc1;
        let vhat = *vi / bc2;
        *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SampleMethod;
    use crate::synthetic::{generate_dataset, SyntheticSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = Matrix::from_fn(n, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let ys: Vec<f64> = (0..n)
            .map(|i| {
                let p = pts.row(i);
                p[0] * p[0] - 0.5 * p[1]
            })
            .collect();
        Dataset::new(pts, ys).unwrap()
    }

    #[test]
    fn zero_weights_predict_zero() {
        let model = MlpModel {
            layers: vec![
                Layer {
                    weights: Matrix::zeros(3, 2),
                    bias: vec![0.0; 3],
                },
                Layer {
                    weights: Matrix::zeros(1, 3),
                    bias: vec![0.0],
                },
            ],
        };
        assert_eq!(predict(&model, &[1.0, -2.0]), 0.0);
    }

    #[test]
    fn hand_evaluated_two_layer_composition() {
        // Single hidden unit with a positive path: relu(2x + 1) * 3 - 4.
        let model = MlpModel {
            layers: vec![
                Layer {
                    weights: Matrix::from_rows(&[&[2.0]]),
                    bias: vec![1.0],
                },
                Layer {
                    weights: Matrix::from_rows(&[&[3.0]]),
                    bias: vec![-4.0],
                },
            ],
        };
        assert_eq!(predict(&model, &[1.5]), (2.0 * 1.5 + 1.0) * 3.0 - 4.0);
        // Negative side of the ReLU.
        assert_eq!(predict(&model, &[-1.0]), -4.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let data = small_data(20, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = init_model(2, &[5, 5], &mut rng);
        let batch: Vec<usize> = (0..20).collect();
        let (_, grads) = batch_gradients(&model, &data, &batch);
        let eps = 1e-6;
        for l in 0..model.layers.len() {
            for k in 0..model.layers[l].weights.data().len() {
                let orig = model.layers[l].weights.data()[k];
                model.layers[l].weights.data_mut()[k] = orig + eps;
                let (lp, _) = batch_gradients(&model, &data, &batch);
                model.layers[l].weights.data_mut()[k] = orig - eps;
                let (lm, _) = batch_gradients(&model, &data, &batch);
                model.layers[l].weights.data_mut()[k] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let an = grads[l].weights.data()[k];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / denom < 1e-5,
                    "layer {l} weight {k}: fd {fd} vs analytic {an}"
                );
            }
            for (k, &an) in grads[l].bias.iter().enumerate() {
                let orig = model.layers[l].bias[k];
                model.layers[l].bias[k] = orig + eps;
                let (lp, _) = batch_gradients(&model, &data, &batch);
                model.layers[l].bias[k] = orig - eps;
                let (lm, _) = batch_gradients(&model, &data, &batch);
                model.layers[l].bias[k] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!((fd - an).abs() / denom < 1e-5, "layer {l} bias {k}");
            }
        }
    }

    #[test]
    fn constant_zero_responses_stop_early() {
        let pts = Matrix::from_fn(40, 2, |i, j| ((i * 2 + j) as f64 * 0.37).sin());
        let data = Dataset::new(pts, vec![0.0; 40]).unwrap();
        let config = MlpConfig {
            hidden_layers: vec![8, 8],
            restarts: 2,
            max_epochs: 200,
            ..MlpConfig::default()
        };
        let out = train_detailed(&data, &config).unwrap();
        let chosen = &out.restarts[out.selected_restart];
        assert!(chosen.validation_mse < 1e-6);
        assert!(chosen.epochs_run < 200, "early stopping should trigger");
    }

    #[test]
    fn training_is_deterministic() {
        let data = small_data(30, 7);
        let config = MlpConfig {
            hidden_layers: vec![6],
            restarts: 3,
            max_epochs: 30,
            ..MlpConfig::default()
        };
        let a = train(&data, &config).unwrap();
        let b = train(&data, &config).unwrap();
        assert_eq!(a, b, "identical config and data must give identical weights");
        let c = par::sequential(|| train(&data, &config).unwrap());
        assert_eq!(a, c, "parallel and sequential training must agree");
    }

    #[test]
    fn selected_model_beats_all_restarts() {
        let data = small_data(40, 11);
        let config = MlpConfig {
            hidden_layers: vec![10],
            restarts: 4,
            max_epochs: 40,
            ..MlpConfig::default()
        };
        let out = train_detailed(&data, &config).unwrap();
        let chosen = out.restarts[out.selected_restart].validation_mse;
        for r in &out.restarts {
            assert!(chosen <= r.validation_mse);
        }
    }

    #[test]
    fn fixed_activation_pattern_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let model = init_model(3, &[12, 12], &mut rng);
        let mut checked = 0;
        for trial in 0..40 {
            let q1: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let q2: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let ts = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
            let pts: Vec<Vec<f64>> = ts
                .iter()
                .map(|&t| q1.iter().zip(&q2).map(|(a, b)| a + t * (b - a)).collect())
                .collect();
            let pattern = model.activation_pattern(&pts[0]);
            if !pts.iter().all(|p| model.activation_pattern(p) == pattern) {
                continue; // a ReLU boundary is crossed
            }
            checked += 1;
            let v0 = predict(&model, &pts[0]);
            let v1 = predict(&model, &pts[5]);
            for (&t, p) in ts.iter().zip(&pts) {
                let want = v0 + t * (v1 - v0);
                assert!(
                    (predict(&model, p) - want).abs() < 1e-8,
                    "trial {trial} t={t}"
                );
            }
        }
        assert!(checked > 0, "no segment with a fixed pattern found");
    }

    #[test]
    fn reaches_low_validation_error_on_smooth_synthetic() {
        let spec = SyntheticSpec {
            d: 2,
            n: 128,
            spacing: SampleMethod::Sobol,
            seed: 5,
            omega: 0.0,
            alpha: 0.0,
        };
        let data = generate_dataset(&spec).unwrap();
        let config = MlpConfig {
            hidden_layers: vec![32, 32],
            restarts: 2,
            max_epochs: 300,
            ..MlpConfig::default()
        };
        let out = train_detailed(&data, &config).unwrap();
        assert!(
            out.restarts[out.selected_restart].validation_mse < 1e-2,
            "validation mse {}",
            out.restarts[out.selected_restart].validation_mse
        );
    }

    #[test]
    fn save_load_roundtrip() {
        let data = small_data(20, 2);
        let config = MlpConfig {
            hidden_layers: vec![4],
            restarts: 1,
            max_epochs: 5,
            ..MlpConfig::default()
        };
        let model = train(&data, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let loaded = MlpModel::load_json(&path).unwrap();
        assert_eq!(model, loaded);
    }
}

//! Feedforward classifiers for decoded architectures.
//!
//! A network is the architecture's active hidden layers followed by a single
//! sigmoid output unit. Training minimizes class-weighted binary cross
//! entropy by mini-batch gradient descent with momentum; everything is
//! deterministic given the seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::{Activation, DecodedArchitecture};
use crate::error::{Error, Result};
use crate::market_data::FeatureDataset;

const MOMENTUM: f64 = 0.9;
const LOSS_IMPROVEMENT_TOL: f64 = 1e-5;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Consecutive epochs without loss improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            seed: 0,
            patience: 10,
        }
    }
}

/// One dense layer, weights stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn zeros_like(&self) -> DenseLayer {
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
            activation: self.activation,
        }
    }
}

/// Per-layer weight matrices and bias vectors for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub layers: Vec<DenseLayer>,
}

impl WeightSet {
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn zeros_like(&self) -> WeightSet {
        WeightSet {
            layers: self.layers.iter().map(DenseLayer::zeros_like).collect(),
        }
    }
}

/// Layer dimensions for an architecture: input |X|, active hidden layers,
/// single sigmoid output.
fn layer_shapes(arch: &DecodedArchitecture) -> Vec<(usize, usize, Activation)> {
    let mut shapes = Vec::new();
    let mut in_dim = arch.n_selected();
    for layer in arch.active_layers() {
        shapes.push((in_dim, layer.size, layer.activation));
        in_dim = layer.size;
    }
    shapes.push((in_dim, 1, Activation::Logsig));
    shapes
}

/// Scaled uniform initialization, range +-sqrt(6 / (fan_in + fan_out)).
pub fn init_weights(arch: &DecodedArchitecture, seed: u64) -> WeightSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_shapes(arch)
        .into_iter()
        .map(|(in_dim, out_dim, activation)| {
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            let bias = (0..out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
            DenseLayer { in_dim, out_dim, weights, bias, activation }
        })
        .collect();
    WeightSet { layers }
}

fn layer_forward(layer: &DenseLayer, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for o in 0..layer.out_dim {
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + layer.bias[o];
        out.push(layer.activation.apply(z));
    }
}

/// Forward pass; returns the output probability in [0, 1].
pub fn forward(weights: &WeightSet, x: &[f64]) -> Result<f64> {
    if x.len() != weights.input_dim() {
        return Err(Error::Specification(format!(
            "input has {} entries, network expects {}",
            x.len(),
            weights.input_dim()
        )));
    }
    let mut cur = x.to_vec();
    let mut next = Vec::new();
    for layer in &weights.layers {
        layer_forward(layer, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur[0])
}

/// Class weights inversely proportional to class frequency.
pub fn class_weights(ys: &[u8]) -> Result<(f64, f64)> {
    let n1 = ys.iter().filter(|&&y| y == 1).count();
    let n0 = ys.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateData(
            "training set contains a single class".into(),
        ));
    }
    let n = ys.len() as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

fn sample_weight(cw: (f64, f64), y: u8) -> f64 {
    if y == 1 {
        cw.1
    } else {
        cw.0
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

/// Mean class-weighted binary cross entropy over a batch.
pub fn batch_loss(weights: &WeightSet, xs: &[Vec<f64>], ys: &[u8], cw: (f64, f64)) -> f64 {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let p = clamp_prob(forward(weights, x).expect("projected input matches network"));
        let bce = if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
        total += sample_weight(cw, y) * bce;
    }
    total / xs.len() as f64
}

/// Mean loss and its analytic gradient over a batch.
pub fn batch_gradient(
    weights: &WeightSet,
    xs: &[Vec<f64>],
    ys: &[u8],
    cw: (f64, f64),
) -> (f64, WeightSet) {
    let mut grad = weights.zeros_like();
    let mut total_loss = 0.0;
    let inv_b = 1.0 / xs.len() as f64;
    let n_layers = weights.layers.len();

    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    for (x, &y) in xs.iter().zip(ys) {
        activations.clear();
        let mut cur = x.clone();
        for layer in &weights.layers {
            let mut out = Vec::new();
            layer_forward(layer, &cur, &mut out);
            activations.push(out.clone());
            cur = out;
        }
        let p = clamp_prob(activations[n_layers - 1][0]);
        let w = sample_weight(cw, y);
        total_loss += w * if y == 1 { -p.ln() } else { -(1.0 - p).ln() };

        // sigmoid + BCE shortcut at the output unit
        let mut delta = vec![w * (p - y as f64) * inv_b];
        for k in (0..n_layers).rev() {
            let layer = &weights.layers[k];
            let input: &[f64] = if k == 0 { x } else { &activations[k - 1] };
            let g = &mut grad.layers[k];
            for o in 0..layer.out_dim {
                g.bias[o] += delta[o];
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, &xi) in row.iter_mut().zip(input) {
                    *gw += delta[o] * xi;
                }
            }
            if k > 0 {
                let prev_act = &activations[k - 1];
                let prev_layer = &weights.layers[k - 1];
                let mut new_delta = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (nd, &wv) in new_delta.iter_mut().zip(row) {
                        *nd += wv * delta[o];
                    }
                }
                for (i, nd) in new_delta.iter_mut().enumerate() {
                    *nd *= prev_layer.activation.derivative_from_output(prev_act[i]);
                }
                delta = new_delta;
            }
        }
    }
    (total_loss * inv_b, grad)
}

/// Train on projected, standardized samples. Both classes must be present.
pub fn train_on_samples(
    weights0: &WeightSet,
    xs: &[Vec<f64>],
    ys: &[u8],
    cfg: &TrainConfig,
) -> Result<WeightSet> {
    let cw = class_weights(ys)?;
    let mut weights = weights0.clone();
    if cfg.max_epochs == 0 {
        return Ok(weights);
    }
    let mut velocity = weights.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut best_loss = f64::INFINITY;
    let mut stall = 0usize;

    let mut batch_x: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch_size);
    let mut batch_y: Vec<u8> = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(xs[i].clone());
                batch_y.push(ys[i]);
            }
            let (loss, grad) = batch_gradient(&weights, &batch_x, &batch_y, cw);
            epoch_loss += loss * chunk.len() as f64;
            for (l, (v, g)) in weights
                .layers
                .iter_mut()
                .zip(velocity.layers.iter_mut().zip(grad.layers.iter()))
            {
                for i in 0..l.weights.len() {
                    v.weights[i] = MOMENTUM * v.weights[i] + g.weights[i];
                    l.weights[i] -= cfg.learning_rate * v.weights[i];
                }
                for i in 0..l.bias.len() {
                    v.bias[i] = MOMENTUM * v.bias[i] + g.bias[i];
                    l.bias[i] -= cfg.learning_rate * v.bias[i];
                }
            }
        }
        epoch_loss /= xs.len() as f64;
        if best_loss - epoch_loss < LOSS_IMPROVEMENT_TOL {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        } else {
            stall = 0;
        }
        best_loss = best_loss.min(epoch_loss);
    }
    Ok(weights)
}

/// Project dataset rows onto an architecture's selected features.
pub fn project_features(ds: &FeatureDataset, selected: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
    let xs = ds
        .rows
        .iter()
        .map(|r| selected.iter().map(|&i| r.features[i]).collect())
        .collect();
    let ys = ds.rows.iter().map(|r| r.label).collect();
    (xs, ys)
}

/// Train an architecture's weights on a (standardized) feature dataset.
pub fn train(
    arch: &DecodedArchitecture,
    weights0: &WeightSet,
    train_set: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<WeightSet> {
    let (xs, ys) = project_features(train_set, &arch.selected_features);
    train_on_samples(weights0, &xs, &ys, cfg)
}

/// Classification metrics and confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub balanced_accuracy: f64,
    pub balanced_error: f64,
    pub mcc: f64,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Metrics from predictions and true labels. Absent classes are skipped in
/// the balanced-accuracy average; MCC is 0 when any marginal is empty.
pub fn evaluate_predictions(preds: &[u8], ys: &[u8]) -> Result<EvalReport> {
    if ys.is_empty() {
        return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &y) in preds.iter().zip(ys) {
        match (y, p) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => return Err(Error::Value("labels must be 0 or 1".into())),
        }
    }
    let n = ys.len() as f64;
    let overall_accuracy = (tp + tn) as f64 / n;

    let mut recall_sum = 0.0;
    let mut present = 0.0;
    if tp + fn_ > 0 {
        recall_sum += tp as f64 / (tp + fn_) as f64;
        present += 1.0;
    }
    if tn + fp > 0 {
        recall_sum += tn as f64 / (tn + fp) as f64;
        present += 1.0;
    }
    let balanced_accuracy = recall_sum / present;

    let factors = [(tp + fp), (tp + fn_), (tn + fp), (tn + fn_)];
    let mcc = if factors.iter().any(|&f| f == 0) {
        0.0
    } else {
        let num = (tp * tn) as f64 - (fp * fn_) as f64;
        let den: f64 = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
        num / den
    };

    Ok(EvalReport {
        overall_accuracy,
        balanced_accuracy,
        balanced_error: 1.0 - balanced_accuracy,
        mcc,
        tp,
        tn,
        fp,
        fn_,
    })
}

/// Threshold the network at 0.5 over projected samples and report metrics.
pub fn evaluate_on_samples(weights: &WeightSet, xs: &[Vec<f64>], ys: &[u8]) -> Result<EvalReport> {
    let preds: Vec<u8> = xs
        .iter()
        .map(|x| Ok((forward(weights, x)? > 0.5) as u8))
        .collect::<Result<_>>()?;
    evaluate_predictions(&preds, ys)
}

/// Evaluate a trained architecture on a (standardized) feature dataset.
pub fn evaluate(
    arch: &DecodedArchitecture,
    weights: &WeightSet,
    ds: &FeatureDataset,
) -> Result<EvalReport> {
    let (xs, ys) = project_features(ds, &arch.selected_features);
    evaluate_on_samples(weights, &xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::{DecodedArchitecture, GenomeLayout, LayerSpec};

    fn arch(n_features: usize, layers: Vec<LayerSpec>) -> DecodedArchitecture {
        DecodedArchitecture {
            selected_features: (0..n_features).collect(),
            layers,
            layout: GenomeLayout::default(),
        }
    }

    fn tansig(size: usize) -> LayerSpec {
        LayerSpec { size, activation: Activation::Tansig }
    }

    fn logsig(size: usize) -> LayerSpec {
        LayerSpec { size, activation: Activation::Logsig }
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = arch(5, vec![tansig(32), tansig(0)]);
        let w1 = init_weights(&a, 7);
        let w2 = init_weights(&a, 7);
        assert_eq!(w1, w2);
        assert_ne!(w1, init_weights(&a, 8));
        assert_eq!(w1.layers.len(), 2);
        assert_eq!((w1.layers[0].in_dim, w1.layers[0].out_dim), (5, 32));
        assert_eq!((w1.layers[1].in_dim, w1.layers[1].out_dim), (32, 1));
    }

    #[test]
    fn zero_weights_output_half() {
        let a = arch(3, vec![tansig(4), tansig(0)]);
        let mut w = init_weights(&a, 0);
        for l in &mut w.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(forward(&w, &[1.0, -2.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn tansig_saturates() {
        let a = arch(1, vec![tansig(1), tansig(0)]);
        let mut w = init_weights(&a, 0);
        w.layers[0].weights[0] = 100.0;
        w.layers[0].bias[0] = 0.0;
        // read the hidden activation through an identity-ish output
        let hidden = Activation::Tansig.apply(100.0 * 5.0);
        assert!((hidden - 1.0).abs() < 1e-6);
        let _ = forward(&w, &[5.0]).unwrap();
    }

    #[test]
    fn hand_evaluated_two_layer_composition() {
        // single input, 1-unit logsig hidden layer with unit weight and zero
        // bias; x = 0 -> hidden output sigmoid(0) = 0.5
        let a = arch(1, vec![logsig(1), tansig(0)]);
        let mut w = init_weights(&a, 3);
        w.layers[0].weights[0] = 1.0;
        w.layers[0].bias[0] = 0.0;
        let w_out = w.layers[1].weights[0];
        let b_out = w.layers[1].bias[0];
        let expected = Activation::Logsig.apply(w_out * 0.5 + b_out);
        let got = forward(&w, &[0.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let a = arch(3, vec![tansig(2), tansig(0)]);
        let w = init_weights(&a, 0);
        assert!(forward(&w, &[1.0, 2.0]).is_err());
    }

    fn blob_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        use rand::SeedableRng;
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 2) as u8;
            let center = if y == 1 { 2.0 } else { -2.0 };
            let x1: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5 + center;
            let x2: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5 - center;
            xs.push(vec![x1, x2]);
            ys.push(y);
        }
        (xs, ys)
    }

    /// Plain logistic regression, gradient descent: the independent oracle
    /// for the separable-blob bound.
    fn logreg_balanced_error(xs: &[Vec<f64>], ys: &[u8]) -> f64 {
        let mut w = vec![0.0; xs[0].len()];
        let mut b = 0.0;
        for _ in 0..500 {
            let mut gw = vec![0.0; w.len()];
            let mut gb = 0.0;
            for (x, &y) in xs.iter().zip(ys) {
                let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
                let p = 1.0 / (1.0 + (-z).exp());
                let d = p - y as f64;
                for (g, &xi) in gw.iter_mut().zip(x) {
                    *g += d * xi;
                }
                gb += d;
            }
            let lr = 0.1 / xs.len() as f64;
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= lr * g;
            }
            b -= lr * gb;
        }
        let preds: Vec<u8> = xs
            .iter()
            .map(|x| {
                let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
                (z > 0.0) as u8
            })
            .collect();
        evaluate_predictions(&preds, ys).unwrap().balanced_error
    }

    #[test]
    fn learns_separable_blobs() {
        let (xs, ys) = blob_data(200, 13);
        assert!(logreg_balanced_error(&xs, &ys) < 0.05, "oracle failed on blobs");

        let a = arch(2, vec![tansig(8), tansig(0)]);
        let w0 = init_weights(&a, 1);
        let cfg = TrainConfig { max_epochs: 100, learning_rate: 0.1, ..Default::default() };
        let w = train_on_samples(&w0, &xs, &ys, &cfg).unwrap();
        let report = evaluate_on_samples(&w, &xs, &ys).unwrap();
        assert!(report.balanced_error < 0.05, "balanced error {}", report.balanced_error);
    }

    #[test]
    fn zero_epochs_is_noop() {
        let (xs, ys) = blob_data(20, 2);
        let a = arch(2, vec![tansig(4), tansig(0)]);
        let w0 = init_weights(&a, 9);
        let cfg = TrainConfig { max_epochs: 0, ..Default::default() };
        assert_eq!(train_on_samples(&w0, &xs, &ys, &cfg).unwrap(), w0);
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = blob_data(60, 4);
        let a = arch(2, vec![tansig(6), logsig(3)]);
        let w0 = init_weights(&a, 5);
        let cfg = TrainConfig { max_epochs: 20, ..Default::default() };
        let w1 = train_on_samples(&w0, &xs, &ys, &cfg).unwrap();
        let w2 = train_on_samples(&w0, &xs, &ys, &cfg).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn single_class_is_degenerate() {
        let xs = vec![vec![0.0, 0.0]; 10];
        let ys = vec![1u8; 10];
        let a = arch(2, vec![tansig(2), tansig(0)]);
        let w0 = init_weights(&a, 0);
        assert!(matches!(
            train_on_samples(&w0, &xs, &ys, &TrainConfig::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..5 {
            let a = arch(4, vec![tansig(5), logsig(3)]);
            let mut w = init_weights(&a, trial);
            let xs: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let ys: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();
            let cw = class_weights(&ys).unwrap();
            let (_, grad) = batch_gradient(&w, &xs, &ys, cw);
            let h = 1e-5;
            for l in 0..w.layers.len() {
                for i in 0..w.layers[l].weights.len() {
                    let orig = w.layers[l].weights[i];
                    w.layers[l].weights[i] = orig + h;
                    let lp = batch_loss(&w, &xs, &ys, cw);
                    w.layers[l].weights[i] = orig - h;
                    let lm = batch_loss(&w, &xs, &ys, cw);
                    w.layers[l].weights[i] = orig;
                    let fd = (lp - lm) / (2.0 * h);
                    let an = grad.layers[l].weights[i];
                    let denom = fd.abs().max(an.abs()).max(1e-8);
                    assert!(
                        (fd - an).abs() / denom < 1e-4,
                        "layer {l} weight {i}: fd {fd} vs analytic {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn feature_permutation_invariance() {
        // permuting feature order with correspondingly permuted first-layer
        // weight columns leaves forward outputs unchanged
        let a = arch(4, vec![tansig(6), tansig(0)]);
        let w = init_weights(&a, 21);
        let x = [0.3, -1.2, 0.7, 2.1];
        let perm = [2usize, 0, 3, 1];
        let mut wp = w.clone();
        let in_dim = 4;
        for o in 0..wp.layers[0].out_dim {
            for (new_i, &old_i) in perm.iter().enumerate() {
                wp.layers[0].weights[o * in_dim + new_i] = w.layers[0].weights[o * in_dim + old_i];
            }
        }
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let y1 = forward(&w, &x).unwrap();
        let y2 = forward(&wp, &xp).unwrap();
        assert!((y1 - y2).abs() < 1e-12);
    }

    #[test]
    fn metric_identities() {
        // perfect predictions
        let r = evaluate_predictions(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(r.balanced_error, 0.0);
        assert_eq!(r.mcc, 1.0);
        // majority bias on a 70/30 set
        let ys: Vec<u8> = std::iter::repeat(1).take(7).chain(std::iter::repeat(0).take(3)).collect();
        let preds = vec![1u8; 10];
        let r = evaluate_predictions(&preds, &ys).unwrap();
        assert_eq!(r.balanced_accuracy, 0.5);
        assert_eq!(r.mcc, 0.0);
        assert_eq!(r.overall_accuracy, 0.7);
    }

    #[test]
    fn derived_confusion_example() {
        // TP=40, TN=30, FP=20, FN=10
        let mut preds = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..40 { preds.push(1); ys.push(1); }
        for _ in 0..30 { preds.push(0); ys.push(0); }
        for _ in 0..20 { preds.push(1); ys.push(0); }
        for _ in 0..10 { preds.push(0); ys.push(1); }
        let r = evaluate_predictions(&preds, &ys).unwrap();
        assert!((r.overall_accuracy - 0.70).abs() < 1e-12);
        assert!((r.balanced_accuracy - 0.70).abs() < 1e-12);
        assert!((r.mcc - 0.4082).abs() < 1e-4);
        assert!((r.balanced_error + r.balanced_accuracy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mcc_symmetry_under_class_swap() {
        let preds = [1u8, 0, 1, 1, 0, 0, 1, 0];
        let ys = [1u8, 0, 0, 1, 1, 0, 1, 1];
        let r = evaluate_predictions(&preds, &ys).unwrap();
        let swapped_p: Vec<u8> = preds.iter().map(|&p| 1 - p).collect();
        let swapped_y: Vec<u8> = ys.iter().map(|&y| 1 - y).collect();
        let rs = evaluate_predictions(&swapped_p, &swapped_y).unwrap();
        assert!((r.mcc - rs.mcc).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_is_error() {
        assert!(matches!(
            evaluate_predictions(&[], &[]),
            Err(Error::EmptyData(_))
        ));
    }
}

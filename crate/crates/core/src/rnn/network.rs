use super::cell::{step_backward, step_forward, StepCache};
use super::params::{DirectionParams, ModelParams};
use super::{Architecture, CellKind};
use crate::encoder::SceneMetadata;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Class probabilities and the logits they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    /// Argmax of `probs`, lowest index on ties.
    pub label: usize,
}

impl<T: Scalar> Prediction<T> {
    pub fn from_logits(logits: Vec<T>) -> Self {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        let probs: Vec<T> = exps.into_iter().map(|e| e / sum).collect();
        let label = argmax(&probs);
        Self { logits, probs, label }
    }

    /// Wraps an explicit probability vector; logits are `ln p`.
    pub fn from_probs(probs: Vec<T>) -> Self {
        let logits = probs.iter().map(|p| p.ln()).collect();
        let label = argmax(&probs);
        Self { logits, probs, label }
    }
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy `-ln p[label]` via log-sum-exp over the logits.
pub fn cross_entropy<T: Scalar>(pred: &Prediction<T>, label: usize) -> T {
    let max = pred.logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + pred.logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    lse - pred.logits[label]
}

struct DirectionCache<T> {
    /// Timestep index of each processed step, in processing order.
    order: Vec<usize>,
    steps: Vec<StepCache<T>>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache<T> {
    /// `layers[l][d]`
    layers: Vec<Vec<DirectionCache<T>>>,
    feature: Vec<T>,
    prediction: Prediction<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn prediction(&self) -> &Prediction<T> {
        &self.prediction
    }

    pub fn feature(&self) -> &[T] {
        &self.feature
    }
}

/// Converts encoder output to the model's scalar type.
pub fn to_inputs<T: Scalar>(meta: &SceneMetadata) -> Vec<Vec<T>> {
    meta.sequence.iter().map(|v| v.0.iter().map(|&x| T::of(x)).collect()).collect()
}

fn run_direction<T: Scalar>(
    cell: CellKind,
    p: &DirectionParams<T>,
    hidden: usize,
    inputs: &[Vec<T>],
    reverse: bool,
) -> DirectionCache<T> {
    let len = inputs.len();
    let mut h = vec![T::zero(); hidden];
    let mut c = vec![T::zero(); hidden];
    let mut order = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(len);
    for k in 0..len {
        let t = if reverse { len - 1 - k } else { k };
        let step = step_forward(cell, p, hidden, &h, &c, &inputs[t]);
        h.clone_from(&step.h);
        if cell == CellKind::Lstm {
            c.clone_from(&step.c);
        }
        order.push(t);
        steps.push(step);
    }
    DirectionCache { order, steps }
}

impl<T> DirectionCache<T> {
    fn output_at(&self, t: usize) -> &[T] {
        let k = self.order.iter().position(|&o| o == t).expect("timestep");
        &self.steps[k].h
    }

    fn final_hidden(&self) -> &[T] {
        &self.steps.last().expect("non-empty sequence").h
    }
}

fn check_inputs<T: Scalar>(params: &ModelParams<T>, inputs: &[Vec<T>]) -> Result<()> {
    let cfg = &params.config;
    if inputs.len() != cfg.sequence_length {
        return Err(Error::LengthMismatch { expected: cfg.sequence_length, actual: inputs.len() });
    }
    if let Some(bad) = inputs.iter().find(|x| x.len() != cfg.input_size) {
        return Err(Error::DimensionMismatch(format!(
            "input vector of width {} (expected {})",
            bad.len(),
            cfg.input_size
        )));
    }
    Ok(())
}

/// Forward pass over raw input vectors, keeping the activations.
pub fn forward_inputs<T: Scalar>(params: &ModelParams<T>, inputs: &[Vec<T>]) -> Result<ForwardCache<T>> {
    check_inputs(params, inputs)?;
    let cfg = &params.config;
    let hidden = cfg.hidden_size;
    let len = cfg.sequence_length;

    let mut layer_in: Vec<Vec<T>> = inputs.to_vec();
    let mut layers = Vec::with_capacity(cfg.num_layers);
    for layer in &params.layers {
        let dirs: Vec<DirectionCache<T>> = layer
            .directions
            .iter()
            .enumerate()
            .map(|(d, p)| run_direction(cfg.cell, p, hidden, &layer_in, d == 1))
            .collect();
        layer_in = (0..len).map(|t| dirs.iter().flat_map(|dc| dc.output_at(t).iter().copied()).collect()).collect();
        layers.push(dirs);
    }

    let feature: Vec<T> = match cfg.architecture {
        Architecture::UniLastConcat => layer_in.into_iter().flatten().collect(),
        Architecture::BiAllConcat => {
            layers.iter().flat_map(|dirs| dirs.iter().flat_map(|dc| dc.final_hidden().iter().copied())).collect()
        }
    };

    let mut logits = params.head_bias.clone();
    params.head_weight.block_matvec_acc(0, &feature, &mut logits);
    let prediction = Prediction::from_logits(logits);
    Ok(ForwardCache { layers, feature, prediction })
}

pub fn forward<T: Scalar>(params: &ModelParams<T>, meta: &SceneMetadata) -> Result<(Prediction<T>, ForwardCache<T>)> {
    let cache = forward_inputs(params, &to_inputs(meta))?;
    Ok((cache.prediction.clone(), cache))
}

pub fn predict<T: Scalar>(params: &ModelParams<T>, meta: &SceneMetadata) -> Result<Prediction<T>> {
    Ok(forward_inputs(params, &to_inputs(meta))?.prediction)
}

/// Gradient of the cross-entropy loss for `label` w.r.t. every parameter.
pub fn backward<T: Scalar>(params: &ModelParams<T>, cache: &ForwardCache<T>, label: usize) -> ModelParams<T> {
    let mut grads = params.zeros_like();
    backward_into(params, cache, label, &mut grads);
    grads
}

/// Like [`backward`] but adds into an existing gradient buffer.
/// Returns the gradient w.r.t. the input sequence.
pub fn backward_into<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    label: usize,
    grads: &mut ModelParams<T>,
) -> Vec<Vec<T>> {
    let cfg = &params.config;
    let hidden = cfg.hidden_size;
    let len = cfg.sequence_length;
    let ndir = cfg.architecture.directions();

    let mut dlogits = cache.prediction.probs.clone();
    dlogits[label] -= T::one();
    grads.head_weight.block_outer_acc(0, &dlogits, &cache.feature);
    for (b, d) in grads.head_bias.iter_mut().zip(&dlogits) {
        *b += *d;
    }
    let mut dfeature = vec![T::zero(); cache.feature.len()];
    params.head_weight.block_t_matvec_acc(0, &dlogits, &mut dfeature);

    // dh_out[l][d][t]: loss gradient w.r.t. the output of direction d of layer l at t.
    let mut dh_out: Vec<Vec<Vec<Vec<T>>>> = vec![vec![vec![vec![T::zero(); hidden]; len]; ndir]; cfg.num_layers];
    match cfg.architecture {
        Architecture::UniLastConcat => {
            let top = cfg.num_layers - 1;
            for t in 0..len {
                dh_out[top][0][t].copy_from_slice(&dfeature[t * hidden..(t + 1) * hidden]);
            }
        }
        Architecture::BiAllConcat => {
            for (l, dirs) in cache.layers.iter().enumerate() {
                for (d, dc) in dirs.iter().enumerate() {
                    let off = (l * ndir + d) * hidden;
                    let t_final = *dc.order.last().expect("non-empty");
                    add_assign(&mut dh_out[l][d][t_final], &dfeature[off..off + hidden]);
                }
            }
        }
    }

    let mut dinputs = Vec::new();
    for l in (0..cfg.num_layers).rev() {
        let in_width = cfg.layer_input(l);
        let mut dx_layer = vec![vec![T::zero(); in_width]; len];
        for d in 0..ndir {
            let dc = &cache.layers[l][d];
            let p = &params.layers[l].directions[d];
            let g = &mut grads.layers[l].directions[d];
            let mut dh_carry = vec![T::zero(); hidden];
            let mut dc_carry = vec![T::zero(); hidden];
            for k in (0..len).rev() {
                let t = dc.order[k];
                let mut dh = dh_out[l][d][t].clone();
                add_assign(&mut dh, &dh_carry);
                let sg = step_backward(cfg.cell, p, g, hidden, &dc.steps[k], &dh, &dc_carry);
                dh_carry = sg.dh_prev;
                if cfg.cell == CellKind::Lstm {
                    dc_carry = sg.dc_prev;
                }
                add_assign(&mut dx_layer[t], &sg.dx);
            }
        }
        if l > 0 {
            for (t, dx) in dx_layer.iter().enumerate() {
                for d in 0..ndir {
                    add_assign(&mut dh_out[l - 1][d][t], &dx[d * hidden..(d + 1) * hidden]);
                }
            }
        } else {
            dinputs = dx_layer;
        }
    }
    dinputs
}

fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, EncoderKind, SemanticVector};
    use crate::rnn::params::{init_params, Matrix};
    use crate::rnn::ModelConfig;

    fn zeros_meta(l: usize) -> SceneMetadata {
        SceneMetadata { sequence: vec![SemanticVector::ZERO; l], kind: EncoderKind::Layout, reversed: false }
    }

    #[test]
    fn uniform_when_everything_is_zero() {
        for cell in CellKind::ALL {
            for arch in Architecture::ALL {
                let cfg = ModelConfig::new(cell, arch, 25);
                let p = ModelParams::<f64>::zeros(&cfg);
                let pred = predict(&p, &zeros_meta(25)).unwrap();
                assert!(pred.probs.iter().all(|&v| v == 0.25));
                assert_eq!(pred.label, 0);
                assert!((cross_entropy(&pred, 2) - 4f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let boxes =
            [crate::scene::BBox::new(3, 0.9, 0.1, 0.2, 0.3, 0.3), crate::scene::BBox::new(6, 0.7, 0.5, 0.5, 0.2, 0.4)];
        let meta = crate::encoder::encode_layout(&boxes, &EncoderConfig::default());
        for cell in CellKind::ALL {
            for arch in Architecture::ALL {
                let p: ModelParams<f64> = init_params(&ModelConfig::new(cell, arch, 25), 3);
                let pred = predict(&p, &arch.orient(&meta)).unwrap();
                let s: f64 = pred.probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
                assert!(pred.probs.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn length_mismatch_errors() {
        let p: ModelParams<f64> = init_params(&ModelConfig::new(CellKind::Gru, Architecture::BiAllConcat, 25), 0);
        assert!(matches!(predict(&p, &zeros_meta(24)), Err(Error::LengthMismatch { expected: 25, actual: 24 })));
    }

    #[test]
    fn loss_examples() {
        let p = Prediction::<f64>::from_probs(vec![0.7, 0.1, 0.1, 0.1]);
        assert!((cross_entropy(&p, 0) - 0.356_674_943_938_732_4).abs() < 1e-12);
        let sure = Prediction::<f64>::from_logits(vec![60.0, 0.0, 0.0, 0.0]);
        assert!(cross_entropy(&sure, 0) < 1e-20);
    }

    /// Tiny simple-cell network, hand-unrolled with scalar arithmetic.
    #[test]
    fn simple_uni_matches_hand_unrolled() {
        let mut cfg = ModelConfig::new(CellKind::Simple, Architecture::UniLastConcat, 3).with_hidden(2);
        cfg.input_size = 2;
        cfg.num_classes = 2;
        let mut p = ModelParams::<f64>::zeros(&cfg);
        // layer 0: rows [h0 h1 x0 x1]
        p.layers[0].directions[0].weight = Matrix::from_vec(2, 4, vec![0.5, -0.3, 0.8, 0.1, 0.2, 0.4, -0.6, 0.9]);
        p.layers[0].directions[0].bias = vec![0.1, -0.2];
        p.layers[1].directions[0].weight = Matrix::from_vec(2, 4, vec![0.3, 0.7, -0.5, 0.2, -0.4, 0.1, 0.6, 0.3]);
        p.layers[1].directions[0].bias = vec![0.05, 0.0];
        p.head_weight = Matrix::from_vec(2, 6, vec![1.0, -1.0, 0.5, 0.5, -0.2, 0.3, 0.4, 0.2, -0.7, 0.1, 0.9, -0.5]);
        p.head_bias = vec![0.1, -0.1];
        let xs = vec![vec![1.0, 0.0], vec![0.0, 0.5], vec![0.2, 0.3]];

        let cell = |w: &[f64; 8], b: [f64; 2], h: [f64; 2], x: [f64; 2]| -> [f64; 2] {
            [
                (w[0] * h[0] + w[1] * h[1] + w[2] * x[0] + w[3] * x[1] + b[0]).tanh(),
                (w[4] * h[0] + w[5] * h[1] + w[6] * x[0] + w[7] * x[1] + b[1]).tanh(),
            ]
        };
        let w0 = [0.5, -0.3, 0.8, 0.1, 0.2, 0.4, -0.6, 0.9];
        let w1 = [0.3, 0.7, -0.5, 0.2, -0.4, 0.1, 0.6, 0.3];
        let a1 = cell(&w0, [0.1, -0.2], [0.0, 0.0], [1.0, 0.0]);
        let a2 = cell(&w0, [0.1, -0.2], a1, [0.0, 0.5]);
        let a3 = cell(&w0, [0.1, -0.2], a2, [0.2, 0.3]);
        let b1 = cell(&w1, [0.05, 0.0], [0.0, 0.0], a1);
        let b2 = cell(&w1, [0.05, 0.0], b1, a2);
        let b3 = cell(&w1, [0.05, 0.0], b2, a3);
        let feat = [b1[0], b1[1], b2[0], b2[1], b3[0], b3[1]];
        let hw = &p.head_weight.data;
        let logit = |r: usize, bias: f64| (0..6).map(|j| hw[r * 6 + j] * feat[j]).sum::<f64>() + bias;
        let expected = [logit(0, 0.1), logit(1, -0.1)];

        let cache = forward_inputs(&p, &xs).unwrap();
        for (got, want) in cache.prediction().logits.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_inputs_give_zero_input_weight_gradients() {
        let cfg = ModelConfig::new(CellKind::Simple, Architecture::UniLastConcat, 6).with_hidden(5);
        let p: ModelParams<f64> = init_params(&cfg, 9);
        let cache = forward_inputs(&p, &vec![vec![0.0; 8]; 6]).unwrap();
        let g = backward(&p, &cache, 1);
        let w = &g.layers[0].directions[0].weight;
        for r in 0..w.rows {
            assert!(w.row(r)[5..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn duplicate_sample_doubles_gradient() {
        let cfg = ModelConfig::new(CellKind::Lstm, Architecture::BiAllConcat, 4).with_hidden(3);
        let p: ModelParams<f64> = init_params(&cfg, 2);
        let xs: Vec<Vec<f64>> = (0..4).map(|t| (0..8).map(|j| ((t * 8 + j) % 5) as f64 / 5.0).collect()).collect();
        let cache = forward_inputs(&p, &xs).unwrap();
        let once = backward(&p, &cache, 3);
        let mut twice = p.zeros_like();
        backward_into(&p, &cache, 3, &mut twice);
        backward_into(&p, &cache, 3, &mut twice);
        for (a, b) in once.blocks().iter().zip(twice.blocks()) {
            for (x, y) in a.iter().zip(b) {
                assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn uni_consumes_leading_vector_last() {
        let boxes =
            [crate::scene::BBox::new(1, 0.9, 0.1, 0.1, 0.5, 0.5), crate::scene::BBox::new(4, 0.6, 0.7, 0.7, 0.1, 0.1)];
        let meta = crate::encoder::encode_layout(&boxes, &EncoderConfig::with_length(5));
        let oriented = Architecture::UniLastConcat.orient(&meta);
        let p: ModelParams<f64> = init_params(&ModelConfig::new(CellKind::Simple, Architecture::UniLastConcat, 5), 0);
        let cache = forward_inputs(&p, &to_inputs::<f64>(&oriented)).unwrap();
        let last = &cache.layers[0][0];
        let k_last = last.order.len() - 1;
        let consumed = &last.steps[k_last].hx[p.config.hidden_size..];
        assert_eq!(consumed, &meta.sequence[0].0[..]);
    }
}

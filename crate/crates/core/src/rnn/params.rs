use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out[i] += sum_j self[row0 + i][j] * x[j]` for `i < out.len()`.
    pub fn block_matvec_acc(&self, row0: usize, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(row0 + i);
            let mut acc = T::zero();
            for (w, xv) in row.iter().zip(x) {
                acc += *w * *xv;
            }
            *o += acc;
        }
    }

    /// `out[j] += sum_i self[row0 + i][j] * y[i]`.
    pub fn block_t_matvec_acc(&self, row0: usize, y: &[T], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.cols);
        for (i, &yv) in y.iter().enumerate() {
            if yv == T::zero() {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(row0 + i)) {
                *o += *w * yv;
            }
        }
    }

    /// `self[row0 + i][j] += y[i] * x[j]`.
    pub fn block_outer_acc(&mut self, row0: usize, y: &[T], x: &[T]) {
        let cols = self.cols;
        for (i, &yv) in y.iter().enumerate() {
            if yv == T::zero() {
                continue;
            }
            let row = &mut self.data[(row0 + i) * cols..(row0 + i + 1) * cols];
            for (w, xv) in row.iter_mut().zip(x) {
                *w += yv * *xv;
            }
        }
    }
}

/// Weights of one direction of one layer: every gate's `[h; x]` weights
/// stacked row-wise, so the block is `(gates * hidden) x (hidden + input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionParams<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub directions: Vec<DirectionParams<T>>,
}

/// All weights of one classifier. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub layers: Vec<LayerParams<T>>,
    pub head_weight: Matrix<T>,
    pub head_bias: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden_size;
        let g = config.cell.gates();
        let layers = (0..config.num_layers)
            .map(|layer| LayerParams {
                directions: (0..config.architecture.directions())
                    .map(|_| DirectionParams {
                        weight: Matrix::zeros(g * h, h + config.layer_input(layer)),
                        bias: vec![T::zero(); g * h],
                    })
                    .collect(),
            })
            .collect();
        Self {
            config: *config,
            layers,
            head_weight: Matrix::zeros(config.num_classes, config.feature_width()),
            head_bias: vec![T::zero(); config.num_classes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    /// Block names in storage order, e.g. `layer0.fwd.weight`, `head.bias`.
    pub fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for d in 0..layer.directions.len() {
                let dir = if d == 0 { "fwd" } else { "bwd" };
                names.push(format!("layer{l}.{dir}.weight"));
                names.push(format!("layer{l}.{dir}.bias"));
            }
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    /// `(rows, cols)` of each block, matching [`block_names`](Self::block_names).
    pub fn block_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        for layer in &self.layers {
            for dir in &layer.directions {
                shapes.push((dir.weight.rows, dir.weight.cols));
                shapes.push((dir.bias.len(), 1));
            }
        }
        shapes.push((self.head_weight.rows, self.head_weight.cols));
        shapes.push((self.head_bias.len(), 1));
        shapes
    }

    pub fn blocks(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for layer in &self.layers {
            for dir in &layer.directions {
                out.push(&dir.weight.data);
                out.push(&dir.bias);
            }
        }
        out.push(&self.head_weight.data);
        out.push(&self.head_bias);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            for dir in &mut layer.directions {
                out.push(&mut dir.weight.data);
                out.push(&mut dir.bias);
            }
        }
        out.push(&mut self.head_weight.data);
        out.push(&mut self.head_bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(T::zero());
        }
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * *s;
            }
        }
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config);
        for (dst, src) in out.blocks_mut().into_iter().zip(self.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::of(s.to_f64_lossy());
            }
        }
        out
    }
}

/// Weights uniform in `±1/sqrt(fan_in)` (fan-in = block columns), biases zero.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> ModelParams<T> {
    let mut params = ModelParams::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |m: &mut Matrix<T>| {
        let bound = 1.0 / (m.cols as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in &mut m.data {
            *w = T::of(dist.sample(&mut rng));
        }
    };
    for layer in &mut params.layers {
        for dir in &mut layer.directions {
            fill(&mut dir.weight);
        }
    }
    fill(&mut params.head_weight);
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{Architecture, CellKind};

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::new(CellKind::Lstm, Architecture::BiAllConcat, 25);
        let a: ModelParams<f64> = init_params(&cfg, 42);
        let b: ModelParams<f64> = init_params(&cfg, 42);
        let c: ModelParams<f64> = init_params(&cfg, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn first_layer_simple_shape_and_bound() {
        let cfg = ModelConfig::new(CellKind::Simple, Architecture::UniLastConcat, 25);
        let p: ModelParams<f64> = init_params(&cfg, 1);
        let w = &p.layers[0].directions[0].weight;
        assert_eq!((w.rows, w.cols), (16, 24));
        let bound = 1.0 / 24f64.sqrt();
        assert!(w.data.iter().all(|v| v.abs() <= bound));
        assert!(p.layers[0].directions[0].bias.iter().all(|&b| b == 0.0));
        assert_eq!((p.head_weight.rows, p.head_weight.cols), (4, 400));
    }

    #[test]
    fn gated_shapes() {
        let cfg = ModelConfig::new(CellKind::Gru, Architecture::BiAllConcat, 25);
        let p: ModelParams<f32> = init_params(&cfg, 1);
        assert_eq!(p.layers[0].directions.len(), 2);
        assert_eq!((p.layers[0].directions[1].weight.rows, p.layers[0].directions[1].weight.cols), (48, 24));
        assert_eq!((p.layers[1].directions[0].weight.rows, p.layers[1].directions[0].weight.cols), (48, 48));
        assert_eq!(p.head_weight.cols, 64);
        assert_eq!(p.block_names().len(), p.blocks().len());
        assert_eq!(p.block_shapes().len(), p.blocks().len());
    }
}

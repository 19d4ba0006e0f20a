use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{backward, cross_entropy, forward_inputs};
use super::params::{init_params, ModelParams};
use super::{Architecture, CellKind, ModelConfig};
use crate::error::Result;

/// Floor of the relative-error denominator. Central differences of an O(1)
/// loss carry ~1e-11 of roundoff at epsilon 1e-5, so gradients smaller than
/// this are held to an absolute tolerance of `1e-5 * DENOMINATOR_FLOOR`.
pub const DENOMINATOR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub cell: CellKind,
    pub architecture: Architecture,
    pub num_params: usize,
    pub max_rel_error: f64,
    /// Block and index of the worst entry.
    pub worst_block: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

fn loss_of(params: &ModelParams<f64>, inputs: &[Vec<f64>], label: usize) -> Result<f64> {
    Ok(cross_entropy(forward_inputs(params, inputs)?.prediction(), label))
}

/// Compares the analytic gradient with central differences over every
/// parameter of a randomly initialized model on a random input sequence.
///
/// Biases are randomized as well so that no gate sits at a trivial point.
pub fn grad_check(config: &ModelConfig, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    config.validate()?;
    let mut params: ModelParams<f64> = init_params(config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let bias = Uniform::new(-0.5, 0.5);
    for layer in &mut params.layers {
        for dir in &mut layer.directions {
            for b in &mut dir.bias {
                *b = bias.sample(&mut rng);
            }
        }
    }
    for b in &mut params.head_bias {
        *b = bias.sample(&mut rng);
    }
    // Semantic-vector-like inputs: one scored slot per step, some padding.
    let inputs: Vec<Vec<f64>> = (0..config.sequence_length)
        .map(|_| {
            let mut v = vec![0.0; config.input_size];
            if rng.gen_bool(0.8) {
                v[rng.gen_range(0..config.input_size)] = rng.gen_range(0.05..1.0);
            }
            v
        })
        .collect();
    let label = rng.gen_range(0..config.num_classes);

    let cache = forward_inputs(&params, &inputs)?;
    let grads = backward(&params, &cache, label);
    let names = params.block_names();

    let mut report = GradCheckReport {
        cell: config.cell,
        architecture: config.architecture,
        num_params: params.num_params(),
        max_rel_error: 0.0,
        worst_block: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let analytic: Vec<Vec<f64>> = grads.blocks().iter().map(|b| b.to_vec()).collect();
    for (bi, name) in names.iter().enumerate() {
        for i in 0..analytic[bi].len() {
            let orig = params.blocks()[bi][i];
            params.blocks_mut()[bi][i] = orig + epsilon;
            let plus = loss_of(&params, &inputs, label)?;
            params.blocks_mut()[bi][i] = orig - epsilon;
            let minus = loss_of(&params, &inputs, label)?;
            params.blocks_mut()[bi][i] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[bi][i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(DENOMINATOR_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_block = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Runs [`grad_check`] for every cell and architecture.
pub fn grad_check_all(sequence_length: usize, hidden: usize, seed: u64, epsilon: f64) -> Result<Vec<GradCheckReport>> {
    let mut out = Vec::new();
    for cell in CellKind::ALL {
        for arch in Architecture::ALL {
            let cfg = ModelConfig::new(cell, arch, sequence_length).with_hidden(hidden);
            out.push(grad_check(&cfg, seed, epsilon)?);
        }
    }
    Ok(out)
}

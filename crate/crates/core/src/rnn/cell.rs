//! Single-timestep forward and backward passes for the three cell types.
//!
//! Gate blocks inside a [`DirectionParams`] weight matrix, top to bottom:
//! simple `[a]`, GRU `[z, r, n]`, LSTM `[i, f, g, o]`. Every block multiplies
//! `[h_prev; x]`, except the GRU candidate which multiplies `[r * h_prev; x]`.

use super::params::DirectionParams;
use super::CellKind;
use crate::scalar::Scalar;

#[inline]
fn sigmoid<T: Scalar>(a: T) -> T {
    T::one() / (T::one() + (-a).exp())
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache<T> {
    /// `[h_prev; x]`
    pub hx: Vec<T>,
    /// Post-activation gate values, `gates * hidden` entries.
    pub gates: Vec<T>,
    /// GRU: `[r * h_prev; x]`. Empty otherwise.
    pub rhx: Vec<T>,
    /// LSTM: previous and new cell state. Empty otherwise.
    pub c_prev: Vec<T>,
    pub c: Vec<T>,
    pub h: Vec<T>,
}

pub(crate) fn step_forward<T: Scalar>(
    cell: CellKind,
    p: &DirectionParams<T>,
    hidden: usize,
    h_prev: &[T],
    c_prev: &[T],
    x: &[T],
) -> StepCache<T> {
    let mut hx = Vec::with_capacity(hidden + x.len());
    hx.extend_from_slice(h_prev);
    hx.extend_from_slice(x);
    let mut gates = p.bias.clone();

    match cell {
        CellKind::Simple => {
            p.weight.block_matvec_acc(0, &hx, &mut gates);
            for a in &mut gates {
                *a = a.tanh();
            }
            let h = gates.clone();
            StepCache { hx, gates, rhx: Vec::new(), c_prev: Vec::new(), c: Vec::new(), h }
        }
        CellKind::Gru => {
            p.weight.block_matvec_acc(0, &hx, &mut gates[..2 * hidden]);
            for a in &mut gates[..2 * hidden] {
                *a = sigmoid(*a);
            }
            let mut rhx = hx.clone();
            for k in 0..hidden {
                rhx[k] = gates[hidden + k] * h_prev[k];
            }
            p.weight.block_matvec_acc(2 * hidden, &rhx, &mut gates[2 * hidden..]);
            for a in &mut gates[2 * hidden..] {
                *a = a.tanh();
            }
            let h = (0..hidden)
                .map(|k| {
                    let z = gates[k];
                    (T::one() - z) * gates[2 * hidden + k] + z * h_prev[k]
                })
                .collect();
            StepCache { hx, gates, rhx, c_prev: Vec::new(), c: Vec::new(), h }
        }
        CellKind::Lstm => {
            p.weight.block_matvec_acc(0, &hx, &mut gates);
            for (k, a) in gates.iter_mut().enumerate() {
                *a = if k / hidden == 2 { a.tanh() } else { sigmoid(*a) };
            }
            let (i, f, g, o) =
                (&gates[..hidden], &gates[hidden..2 * hidden], &gates[2 * hidden..3 * hidden], &gates[3 * hidden..]);
            let c: Vec<T> = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let h = (0..hidden).map(|k| o[k] * c[k].tanh()).collect();
            StepCache { hx, gates, rhx: Vec::new(), c_prev: c_prev.to_vec(), c, h }
        }
    }
}

/// Gradients flowing out of one step.
pub(crate) struct StepGrads<T> {
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
    pub dx: Vec<T>,
}

/// Backpropagates `dh` (and `dc` for LSTM) through one step, accumulating
/// weight gradients into `grads`.
pub(crate) fn step_backward<T: Scalar>(
    cell: CellKind,
    p: &DirectionParams<T>,
    grads: &mut DirectionParams<T>,
    hidden: usize,
    cache: &StepCache<T>,
    dh: &[T],
    dc: &[T],
) -> StepGrads<T> {
    let one = T::one();
    let mut dhx = vec![T::zero(); cache.hx.len()];
    let mut dh_prev = vec![T::zero(); hidden];
    let mut dc_prev = Vec::new();

    match cell {
        CellKind::Simple => {
            let da: Vec<T> = (0..hidden).map(|k| dh[k] * (one - cache.h[k] * cache.h[k])).collect();
            grads.weight.block_outer_acc(0, &da, &cache.hx);
            add_into(&mut grads.bias, &da);
            p.weight.block_t_matvec_acc(0, &da, &mut dhx);
        }
        CellKind::Gru => {
            let g = &cache.gates;
            let h_prev = &cache.hx[..hidden];
            let mut da = vec![T::zero(); 3 * hidden];
            for k in 0..hidden {
                let (z, n) = (g[k], g[2 * hidden + k]);
                dh_prev[k] = dh[k] * z;
                let dn = dh[k] * (one - z);
                let dz = dh[k] * (h_prev[k] - n);
                da[2 * hidden + k] = dn * (one - n * n);
                da[k] = dz * z * (one - z);
            }
            grads.weight.block_outer_acc(2 * hidden, &da[2 * hidden..], &cache.rhx);
            let mut drhx = vec![T::zero(); cache.rhx.len()];
            p.weight.block_t_matvec_acc(2 * hidden, &da[2 * hidden..], &mut drhx);
            for k in 0..hidden {
                let r = g[hidden + k];
                let drh = drhx[k];
                dh_prev[k] += drh * r;
                let dr = drh * h_prev[k];
                da[hidden + k] = dr * r * (one - r);
            }
            for (d, v) in dhx[hidden..].iter_mut().zip(&drhx[hidden..]) {
                *d += *v;
            }
            grads.weight.block_outer_acc(0, &da[..2 * hidden], &cache.hx);
            p.weight.block_t_matvec_acc(0, &da[..2 * hidden], &mut dhx);
            add_into(&mut grads.bias, &da);
        }
        CellKind::Lstm => {
            let g = &cache.gates;
            let mut da = vec![T::zero(); 4 * hidden];
            dc_prev = vec![T::zero(); hidden];
            for k in 0..hidden {
                let (i, f, gg, o) = (g[k], g[hidden + k], g[2 * hidden + k], g[3 * hidden + k]);
                let tc = cache.c[k].tanh();
                let dcell = dc[k] + dh[k] * o * (one - tc * tc);
                da[k] = dcell * gg * i * (one - i);
                da[hidden + k] = dcell * cache.c_prev[k] * f * (one - f);
                da[2 * hidden + k] = dcell * i * (one - gg * gg);
                da[3 * hidden + k] = dh[k] * tc * o * (one - o);
                dc_prev[k] = dcell * f;
            }
            grads.weight.block_outer_acc(0, &da, &cache.hx);
            add_into(&mut grads.bias, &da);
            p.weight.block_t_matvec_acc(0, &da, &mut dhx);
        }
    }

    for (d, v) in dh_prev.iter_mut().zip(&dhx[..hidden]) {
        *d += *v;
    }
    StepGrads { dh_prev, dc_prev, dx: dhx[hidden..].to_vec() }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

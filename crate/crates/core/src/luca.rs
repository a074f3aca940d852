//! Adapter + calibrator module applied to a single frozen feature vector.
//!
//! The adapter is a residual bottleneck `A(z) = act(z W_down) W_up + z`.
//! The calibrator gates its input element-wise,
//! `C(z) = z * (act(z V_down) V_up)`, optionally as `z * (1 + gate)`.
//! The composed module is `C(A(z))`, or `A(C(z))` when `reversed` is set.
//!
//! There are no bias terms. Trainable parameters are exactly the four
//! matrices, `4 * d * r` scalars.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_len, to_f64_vec, Activation, Matrix, Real};
use crate::rng;

/// Standard deviation of the normal initializer.
pub const INIT_STD: f64 = 0.02;

/// Activation and composition choices for a [`LucaModule`].
///
/// The default uses gelu for both branches and a residual gate, so a freshly
/// initialized module starts close to the identity map. `gate_residual: false`
/// gives the plain `z * gate` calibrator, which starts close to the zero map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LucaConfig {
    pub adapter_act: Activation,
    pub gate_act: Activation,
    /// Use `z * (1 + gate)` instead of `z * gate`.
    pub gate_residual: bool,
    /// Apply the calibrator before the adapter.
    pub reversed: bool,
}

impl Default for LucaConfig {
    fn default() -> Self {
        LucaConfig {
            adapter_act: Activation::Gelu,
            gate_act: Activation::Gelu,
            gate_residual: true,
            reversed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LucaModule<T = f32> {
    dim: usize,
    rank: usize,
    pub w_down: Matrix<T>,
    pub w_up: Matrix<T>,
    pub v_down: Matrix<T>,
    pub v_up: Matrix<T>,
    pub config: LucaConfig,
}

/// Trainable scalars of one module.
pub const fn param_count(d: usize, r: usize) -> usize {
    4 * d * r
}

/// Parameters of residual adapters inserted into each of `layers` blocks.
pub const fn layerwise_adapter_count(layers: usize, d: usize, r: usize) -> usize {
    layers * 2 * d * r
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    adapter: AdapterTrace,
    calibrator: CalibratorTrace,
    reversed: bool,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone)]
struct AdapterTrace {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

#[derive(Debug, Clone)]
struct CalibratorTrace {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    /// Effective multiplier, already including the residual `1 +` if enabled.
    gate: Vec<f64>,
}

/// Gradients of `<upstream, L(z)>` with respect to every parameter and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct LucaGradients {
    pub w_down: Matrix<f64>,
    pub w_up: Matrix<f64>,
    pub v_down: Matrix<f64>,
    pub v_up: Matrix<f64>,
    pub input: Vec<f64>,
}

impl LucaGradients {
    pub fn zeros(d: usize, r: usize) -> Self {
        LucaGradients {
            w_down: Matrix::zeros(d, r),
            w_up: Matrix::zeros(r, d),
            v_down: Matrix::zeros(d, r),
            v_up: Matrix::zeros(r, d),
            input: vec![0.0; d],
        }
    }

    pub fn matrices(&self) -> [&Matrix<f64>; 4] {
        [&self.w_down, &self.w_up, &self.v_down, &self.v_up]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix<f64>; 4] {
        [&mut self.w_down, &mut self.w_up, &mut self.v_down, &mut self.v_up]
    }

    pub fn clear(&mut self) {
        for m in self.matrices_mut() {
            m.as_mut_slice().fill(0.0);
        }
        self.input.fill(0.0);
    }
}

impl<T: Real> LucaModule<T> {
    /// All-zero module. With `gate_residual` it is the identity map.
    pub fn zeros(d: usize, r: usize, config: LucaConfig) -> Result<Self> {
        validate_dims(d, r)?;
        Ok(LucaModule {
            dim: d,
            rank: r,
            w_down: Matrix::zeros(d, r),
            w_up: Matrix::zeros(r, d),
            v_down: Matrix::zeros(d, r),
            v_up: Matrix::zeros(r, d),
            config,
        })
    }

    /// Builds a module from explicit matrices, checking all four shapes.
    pub fn from_parts(
        w_down: Matrix<T>,
        w_up: Matrix<T>,
        v_down: Matrix<T>,
        v_up: Matrix<T>,
        config: LucaConfig,
    ) -> Result<Self> {
        let (d, r) = (w_down.rows(), w_down.cols());
        validate_dims(d, r)?;
        for (m, rows, cols) in [(&w_up, r, d), (&v_down, d, r), (&v_up, r, d)] {
            check_len(rows, m.rows())?;
            check_len(cols, m.cols())?;
        }
        let module = LucaModule { dim: d, rank: r, w_down, w_up, v_down, v_up, config };
        if !module.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(module)
    }

    /// Seeded initialization: `W_down`, `V_down`, `V_up` drawn from
    /// `Normal(0, 0.02^2)` in that order, `W_up` zero so the adapter starts
    /// as the identity.
    pub fn init(d: usize, r: usize, config: LucaConfig, seed: u64) -> Result<Self> {
        let mut module = Self::zeros(d, r, config)?;
        let mut stream = rng::seeded(seed);
        for m in [&mut module.w_down, &mut module.v_down, &mut module.v_up] {
            for v in m.as_mut_slice() {
                *v = T::from_f64(INIT_STD * rng::standard_normal(&mut stream));
            }
        }
        Ok(module)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Matrices in their canonical order `W_down, W_up, V_down, V_up`.
    pub fn matrices(&self) -> [&Matrix<T>; 4] {
        [&self.w_down, &self.w_up, &self.v_down, &self.v_up]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix<T>; 4] {
        [&mut self.w_down, &mut self.w_up, &mut self.v_down, &mut self.v_up]
    }

    /// Number of stored trainable scalars.
    pub fn param_count(&self) -> usize {
        self.matrices().iter().map(|m| m.len()).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = T> + '_ {
        self.matrices().into_iter().flat_map(|m| m.as_slice().iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }

    /// Sum of absolute values over the four matrices.
    pub fn l1_norm(&self) -> f64 {
        self.parameters().map(|v| v.to_f64().abs()).sum()
    }

    /// Fraction of parameters with `|theta| < threshold`; at threshold 0 it
    /// counts exact zeros.
    pub fn sparsity_ratio(&self, threshold: f64) -> f64 {
        let small = self
            .parameters()
            .filter(|v| {
                let a = v.to_f64().abs();
                if threshold == 0.0 {
                    a == 0.0
                } else {
                    a < threshold
                }
            })
            .count();
        small as f64 / self.param_count() as f64
    }

    pub fn cast<U: Real>(&self) -> LucaModule<U> {
        LucaModule {
            dim: self.dim,
            rank: self.rank,
            w_down: self.w_down.cast(),
            w_up: self.w_up.cast(),
            v_down: self.v_down.cast(),
            v_up: self.v_up.cast(),
            config: self.config,
        }
    }

    pub fn adapter_forward<S: Real>(&self, z: &[S]) -> Result<Vec<f64>> {
        check_len(self.dim, z.len())?;
        let z = to_f64_vec(z);
        let trace = self.adapter_trace(&z)?;
        self.adapter_output(&trace)
    }

    pub fn calibrator_forward<S: Real>(&self, z: &[S]) -> Result<Vec<f64>> {
        check_len(self.dim, z.len())?;
        let z = to_f64_vec(z);
        let trace = self.calibrator_trace(&z)?;
        Ok(calibrator_output(&trace))
    }

    /// Composed forward pass.
    pub fn forward<S: Real>(&self, z: &[S]) -> Result<Vec<f64>> {
        Ok(self.forward_traced(z)?.output)
    }

    pub fn forward_traced<S: Real>(&self, z: &[S]) -> Result<ForwardTrace> {
        check_len(self.dim, z.len())?;
        let z = to_f64_vec(z);
        if self.config.reversed {
            let calibrator = self.calibrator_trace(&z)?;
            let mid = calibrator_output(&calibrator);
            let adapter = self.adapter_trace(&mid)?;
            let output = self.adapter_output(&adapter)?;
            Ok(ForwardTrace { adapter, calibrator, reversed: true, output })
        } else {
            let adapter = self.adapter_trace(&z)?;
            let mid = self.adapter_output(&adapter)?;
            let calibrator = self.calibrator_trace(&mid)?;
            let output = calibrator_output(&calibrator);
            Ok(ForwardTrace { adapter, calibrator, reversed: false, output })
        }
    }

    /// Gradients of `<upstream, L(z)>`; recomputes the forward pass.
    pub fn backward<S: Real>(&self, z: &[S], upstream: &[f64]) -> Result<LucaGradients> {
        let trace = self.forward_traced(z)?;
        let mut grads = LucaGradients::zeros(self.dim, self.rank);
        self.backward_into(&trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients for one traced sample into `grads`. The `input`
    /// field is overwritten, not accumulated.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
        grads: &mut LucaGradients,
    ) -> Result<()> {
        check_len(self.dim, upstream.len())?;
        check_len(self.dim, grads.input.len())?;
        let input_grad = if trace.reversed {
            let mid = self.adapter_backward(&trace.adapter, upstream, grads)?;
            self.calibrator_backward(&trace.calibrator, &mid, grads)?
        } else {
            let mid = self.calibrator_backward(&trace.calibrator, upstream, grads)?;
            self.adapter_backward(&trace.adapter, &mid, grads)?
        };
        grads.input = input_grad;
        Ok(())
    }

    fn adapter_trace(&self, z: &[f64]) -> Result<AdapterTrace> {
        let pre = self.w_down.vec_mul(z)?;
        let act = pre.iter().map(|&h| self.config.adapter_act.apply(h)).collect();
        Ok(AdapterTrace { input: z.to_vec(), pre, act })
    }

    fn adapter_output(&self, t: &AdapterTrace) -> Result<Vec<f64>> {
        let mut out = self.w_up.vec_mul(&t.act)?;
        for (o, &z) in out.iter_mut().zip(&t.input) {
            *o += z;
        }
        Ok(out)
    }

    fn calibrator_trace(&self, z: &[f64]) -> Result<CalibratorTrace> {
        let pre = self.v_down.vec_mul(z)?;
        let act: Vec<f64> = pre.iter().map(|&s| self.config.gate_act.apply(s)).collect();
        let mut gate = self.v_up.vec_mul(&act)?;
        if self.config.gate_residual {
            for g in &mut gate {
                *g += 1.0;
            }
        }
        Ok(CalibratorTrace { input: z.to_vec(), pre, act, gate })
    }

    fn adapter_backward(
        &self,
        t: &AdapterTrace,
        upstream: &[f64],
        grads: &mut LucaGradients,
    ) -> Result<Vec<f64>> {
        outer_add(&mut grads.w_up, &t.act, upstream);
        let d_act = self.w_up.mul_vec(upstream)?;
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&t.pre)
            .map(|(&g, &h)| g * self.config.adapter_act.derivative(h))
            .collect();
        outer_add(&mut grads.w_down, &t.input, &d_pre);
        let mut d_in = self.w_down.mul_vec(&d_pre)?;
        for (d, &u) in d_in.iter_mut().zip(upstream) {
            *d += u;
        }
        Ok(d_in)
    }

    fn calibrator_backward(
        &self,
        t: &CalibratorTrace,
        upstream: &[f64],
        grads: &mut LucaGradients,
    ) -> Result<Vec<f64>> {
        let d_gate: Vec<f64> = upstream.iter().zip(&t.input).map(|(&u, &z)| u * z).collect();
        outer_add(&mut grads.v_up, &t.act, &d_gate);
        let d_act = self.v_up.mul_vec(&d_gate)?;
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&t.pre)
            .map(|(&g, &s)| g * self.config.gate_act.derivative(s))
            .collect();
        outer_add(&mut grads.v_down, &t.input, &d_pre);
        let mut d_in = self.v_down.mul_vec(&d_pre)?;
        for ((d, &u), &g) in d_in.iter_mut().zip(upstream).zip(&t.gate) {
            *d += u * g;
        }
        Ok(d_in)
    }
}

impl ForwardTrace {
    /// Pre-activations of both bottlenecks, for kink detection.
    pub fn pre_activations(&self) -> (&[f64], &[f64]) {
        (&self.adapter.pre, &self.calibrator.pre)
    }
}

fn calibrator_output(t: &CalibratorTrace) -> Vec<f64> {
    t.input.iter().zip(&t.gate).map(|(&z, &g)| z * g).collect()
}

/// `m[i][j] += a[i] * b[j]`
fn outer_add(m: &mut Matrix<f64>, a: &[f64], b: &[f64]) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (cell, &bj) in data[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *cell += ai * bj;
        }
    }
}

fn validate_dims(d: usize, r: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidDimension("feature dimension must be positive"));
    }
    if r == 0 {
        return Err(Error::InvalidDimension("bottleneck rank must be positive"));
    }
    Ok(())
}

/// Free-function forms of the module operations.
pub fn adapter_forward<S: Real, T: Real>(z: &[S], m: &LucaModule<T>) -> Result<Vec<f64>> {
    m.adapter_forward(z)
}

pub fn calibrator_forward<S: Real, T: Real>(z: &[S], m: &LucaModule<T>) -> Result<Vec<f64>> {
    m.calibrator_forward(z)
}

pub fn luca_forward<S: Real, T: Real>(z: &[S], m: &LucaModule<T>) -> Result<Vec<f64>> {
    m.forward(z)
}

pub fn luca_backward<S: Real, T: Real>(
    z: &[S],
    m: &LucaModule<T>,
    upstream: &[f64],
) -> Result<LucaGradients> {
    m.backward(z, upstream)
}

pub fn init_luca(d: usize, r: usize, config: LucaConfig, seed: u64) -> Result<LucaModule> {
    LucaModule::init(d, r, config, seed)
}

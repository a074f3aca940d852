//! Central finite-difference check of the analytic module gradients.
//!
//! The scalar probed is `f(theta, z) = <upstream, L(z)>`, evaluated with
//! forward passes only.

use alloc::vec::Vec;

use crate::error::Result;
use crate::luca::{LucaConfig, LucaModule};
use crate::numerics::{Activation, Matrix};
use crate::rng;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Denominator floor for the relative error. Central differences with
/// `h = 1e-5` carry about `1e-10` of rounding noise, so entries with a
/// gradient below the floor are judged on absolute error instead.
const REL_FLOOR: f64 = 1e-4;

/// Pre-activations closer than this to a relu kink trigger a resample.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub entries: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn probe(m: &LucaModule<f64>, z: &[f64], upstream: &[f64]) -> Result<f64> {
    Ok(m.forward(z)?.iter().zip(upstream).map(|(a, b)| a * b).sum())
}

/// Compares analytic and central-difference gradients for every parameter
/// and input entry.
pub fn check_module(
    m: &LucaModule<f64>,
    z: &[f64],
    upstream: &[f64],
    h: f64,
) -> Result<GradCheck> {
    let analytic = m.backward(z, upstream)?;
    let mut worst = 0.0f64;
    let mut entries = 0;

    let mut probe_m = m.clone();
    for k in 0..4 {
        let len = analytic.matrices()[k].len();
        for idx in 0..len {
            let orig = probe_m.matrices()[k].as_slice()[idx];
            probe_m.matrices_mut()[k].as_mut_slice()[idx] = orig + h;
            let plus = probe(&probe_m, z, upstream)?;
            probe_m.matrices_mut()[k].as_mut_slice()[idx] = orig - h;
            let minus = probe(&probe_m, z, upstream)?;
            probe_m.matrices_mut()[k].as_mut_slice()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic.matrices()[k].as_slice()[idx], numeric));
            entries += 1;
        }
    }

    let mut zp = z.to_vec();
    for i in 0..z.len() {
        zp[i] = z[i] + h;
        let plus = probe(m, &zp, upstream)?;
        zp[i] = z[i] - h;
        let minus = probe(m, &zp, upstream)?;
        zp[i] = z[i];
        worst = worst.max(relative_error(analytic.input[i], (plus - minus) / (2.0 * h)));
        entries += 1;
    }

    Ok(GradCheck { max_rel_error: worst, entries })
}

/// Every (adapter activation, gate activation, gate residual, reversed)
/// combination, in a fixed order.
pub fn all_configs() -> Vec<LucaConfig> {
    let mut out = Vec::new();
    for adapter_act in Activation::ALL {
        for gate_act in Activation::ALL {
            for gate_residual in [false, true] {
                for reversed in [false, true] {
                    out.push(LucaConfig { adapter_act, gate_act, gate_residual, reversed });
                }
            }
        }
    }
    out
}

/// A random problem instance: module with `N(0, 0.5^2)` weights, input and
/// upstream with `N(0, 1)` entries. Instances whose relu pre-activations sit
/// near the kink are redrawn.
pub fn random_instance(
    d: usize,
    r: usize,
    config: LucaConfig,
    stream: &mut rng::Rng,
) -> Result<(LucaModule<f64>, Vec<f64>, Vec<f64>)> {
    loop {
        let mut normal = |rows, cols, scale: f64| {
            Matrix::from_fn(rows, cols, |_, _| scale * rng::standard_normal(stream))
        };
        let m = LucaModule::from_parts(
            normal(d, r, 0.5),
            normal(r, d, 0.5),
            normal(d, r, 0.5),
            normal(r, d, 0.5),
            config,
        )?;
        let z: Vec<f64> = (0..d).map(|_| rng::standard_normal(stream)).collect();
        let upstream: Vec<f64> = (0..d).map(|_| rng::standard_normal(stream)).collect();
        let trace = m.forward_traced(&z)?;
        let (a_pre, c_pre) = trace.pre_activations();
        let kinked = a_pre.iter().any(|&x| config.adapter_act.near_kink(x, KINK_MARGIN))
            || c_pre.iter().any(|&x| config.gate_act.near_kink(x, KINK_MARGIN));
        if !kinked {
            return Ok((m, z, upstream));
        }
    }
}

/// Runs `count` random checks with `d <= max_dim`, `r <= max_rank`,
/// cycling through [`all_configs`]. Returns the worst check.
pub fn run_suite(count: usize, max_dim: usize, max_rank: usize, seed: u64) -> Result<GradCheck> {
    let configs = all_configs();
    let mut stream = rng::seeded(seed);
    let mut worst = GradCheck { max_rel_error: 0.0, entries: 0 };
    for i in 0..count {
        let d = 1 + rng::below(&mut stream, max_dim as u64) as usize;
        let r = 1 + rng::below(&mut stream, max_rank as u64) as usize;
        let config = configs[i % configs.len()];
        let (m, z, up) = random_instance(d, r, config, &mut stream)?;
        let check = check_module(&m, &z, &up, DEFAULT_STEP)?;
        worst.entries += check.entries;
        worst.max_rel_error = worst.max_rel_error.max(check.max_rel_error);
    }
    Ok(worst)
}

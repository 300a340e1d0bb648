//! Seeded noise injection, normalized so the noisy trace sits at exactly
//! the requested distance from the clean one.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lsr_core::grid::BoundaryTrace;
use lsr_core::Error;

use crate::Result;

/// Relative noise level and RNG seed.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub delta_rel: f64,
    pub seed: u64,
}

/// Perturb a trace along a seeded Gaussian direction scaled so that
/// `|y_delta - y| = delta_rel * |y|` holds exactly (up to rounding);
/// returns the absolute noise level. `delta_rel = 0` returns the input
/// bit for bit.
pub fn add_noise(y: &BoundaryTrace, spec: &NoiseSpec) -> Result<(BoundaryTrace, f64)> {
    if spec.delta_rel < 0.0 {
        return Err(Error::InvalidParameter("delta_rel must be non-negative").into());
    }
    if spec.delta_rel == 0.0 {
        return Ok((y.clone(), 0.0));
    }
    let y_norm = y.l2_norm();
    if y_norm == 0.0 {
        return Err(Error::ZeroNormData.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xi = BoundaryTrace::zeros(y.grid());
    for v in xi.values_mut() {
        *v = rng.sample(StandardNormal);
    }
    let xi_norm = xi.l2_norm();
    if xi_norm == 0.0 {
        return Err(Error::ZeroNormData.into());
    }
    let delta_abs = spec.delta_rel * y_norm;
    let mut noisy = y.clone();
    noisy.scaled_add(delta_abs / xi_norm, &xi);
    Ok((noisy, delta_abs))
}

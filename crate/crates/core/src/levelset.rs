//! The level-set parametrization: smoothed Heaviside projector, the level
//! combination `q`, admissible-box clamping and the penalty functional.

use crate::error::{Error, Result};
use crate::grid::{NormKind, ScalarField};

/// Sharp Heaviside: indicator of the positive part of the level-set function.
#[inline]
pub fn heaviside_sharp(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Piecewise-linear smoothed Heaviside: `1 + t/eps` on `[-eps, 0]`, sharp
/// outside the transition band.
pub fn heaviside_smooth(t: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive"));
    }
    Ok(heaviside_smooth_unchecked(t, eps))
}

#[inline]
pub(crate) fn heaviside_smooth_unchecked(t: f64, eps: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < -eps {
        0.0
    } else {
        1.0 + t / eps
    }
}

/// Derivative of [`heaviside_smooth`]: `1/eps` on the open band `(-eps, 0)`,
/// zero elsewhere including both endpoints.
pub fn heaviside_smooth_deriv(t: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive"));
    }
    Ok(heaviside_deriv_unchecked(t, eps))
}

#[inline]
pub(crate) fn heaviside_deriv_unchecked(t: f64, eps: f64) -> f64 {
    if t > -eps && t < 0.0 {
        1.0 / eps
    } else {
        0.0
    }
}

/// Apply the smoothed Heaviside to a whole field.
pub fn heaviside_field(phi: &ScalarField, eps: f64) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive"));
    }
    Ok(phi.map(|t| heaviside_smooth_unchecked(t, eps)))
}

/// Apply the Heaviside derivative to a whole field.
pub fn heaviside_deriv_field(phi: &ScalarField, eps: f64) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive"));
    }
    Ok(phi.map(|t| heaviside_deriv_unchecked(t, eps)))
}

/// The box `[m, M]` of admissible level values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleBox {
    m: f64,
    max: f64,
}

impl AdmissibleBox {
    pub fn new(m: f64, max: f64) -> Result<Self> {
        if !(m < max) || !m.is_finite() || !max.is_finite() {
            return Err(Error::InvalidBox { m, max });
        }
        Ok(Self { m, max })
    }

    pub fn lower(&self) -> f64 {
        self.m
    }

    pub fn upper(&self) -> f64 {
        self.max
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.m, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.m && v <= self.max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.m + self.max)
    }
}

/// Pointwise clamp of a field to the admissible box.
pub fn clamp_to_box(f: &ScalarField, bounds: &AdmissibleBox) -> ScalarField {
    f.map(|v| bounds.clamp(v))
}

/// The iterate triple: level-set function, both level-value functions and
/// the current smoothing width.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub phi: ScalarField,
    pub psi1: ScalarField,
    pub psi2: ScalarField,
    pub eps: f64,
}

impl LevelSetState {
    pub fn new(phi: ScalarField, psi1: ScalarField, psi2: ScalarField, eps: f64) -> Result<Self> {
        if phi.grid() != psi1.grid() || phi.grid() != psi2.grid() {
            return Err(Error::GridMismatch);
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive"));
        }
        Ok(Self { phi, psi1, psi2, eps })
    }

    /// Smoothed indicator of the current positive region.
    pub fn indicator(&self) -> ScalarField {
        self.phi.map(|t| heaviside_smooth_unchecked(t, self.eps))
    }

    /// The coefficient `psi1 * H_eps(phi) + psi2 * (1 - H_eps(phi))`
    /// represented by this iterate.
    pub fn coefficient(&self) -> ScalarField {
        let z = self.indicator();
        apply_q(&z, &self.psi1, &self.psi2).expect("fields share one grid by construction")
    }

    /// Clamp both level-value functions to the box.
    pub fn clamp_levels(&mut self, bounds: &AdmissibleBox) {
        for v in self.psi1.values_mut() {
            *v = bounds.clamp(*v);
        }
        for v in self.psi2.values_mut() {
            *v = bounds.clamp(*v);
        }
    }
}

/// Combine two level-value fields with an explicit indicator:
/// `psi1 * z + psi2 * (1 - z)` pointwise. The indicator must stay within
/// `[0, 1]` up to a `1e-12` tolerance.
pub fn apply_q(z: &ScalarField, psi1: &ScalarField, psi2: &ScalarField) -> Result<ScalarField> {
    if z.grid() != psi1.grid() || z.grid() != psi2.grid() {
        return Err(Error::GridMismatch);
    }
    const TOL: f64 = 1e-12;
    for &v in z.values() {
        if v < -TOL || v > 1.0 + TOL {
            return Err(Error::IndicatorOutOfRange { worst: v });
        }
    }
    let mut out = ScalarField::zeros(z.grid());
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        let zk = z.values()[k];
        *o = psi1.values()[k] * zk + psi2.values()[k] * (1.0 - zk);
    }
    Ok(out)
}

/// Rebuild a level-set function as the signed distance to its own zero
/// level set (fast sweeping on the Eikonal equation, second-order crossing
/// initialization). The zero set is preserved to interpolation accuracy;
/// optional hook for long iterations, off by default.
pub fn redistance(phi: &ScalarField) -> ScalarField {
    let g = phi.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let mut dist = alloc::vec![f64::INFINITY; g.n_nodes()];

    // seed nodes adjacent to a sign change with the interpolated crossing
    let mut seed = |a: usize, b: usize, h: f64| {
        let (pa, pb) = (phi.values()[a], phi.values()[b]);
        if pa == 0.0 {
            dist[a] = 0.0;
        }
        if pb == 0.0 {
            dist[b] = 0.0;
        }
        if (pa > 0.0) != (pb > 0.0) && pa != 0.0 && pb != 0.0 {
            let theta = pa / (pa - pb);
            dist[a] = dist[a].min(libm::fabs(theta) * h);
            dist[b] = dist[b].min(libm::fabs(1.0 - theta) * h);
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            if i + 1 < nx {
                seed(k, k + 1, hx);
            }
            if j + 1 < ny {
                seed(k, k + nx, hy);
            }
        }
    }
    if dist.iter().all(|d| d.is_infinite()) {
        // no zero crossing: nothing to measure distances from
        return phi.clone();
    }

    // four ordered Gauss-Seidel sweeps of the anisotropic Eikonal update
    let update = |dist: &mut alloc::vec::Vec<f64>, i: usize, j: usize| {
        let k = g.idx(i, j);
        let dx = {
            let w = if i > 0 { dist[k - 1] } else { f64::INFINITY };
            let e = if i + 1 < nx { dist[k + 1] } else { f64::INFINITY };
            w.min(e)
        };
        let dy = {
            let s = if j > 0 { dist[k - nx] } else { f64::INFINITY };
            let n = if j + 1 < ny { dist[k + nx] } else { f64::INFINITY };
            s.min(n)
        };
        let cand = if dx == f64::INFINITY {
            dy + hy
        } else if dy == f64::INFINITY {
            dx + hx
        } else {
            // solve ((d-dx)/hx)^2 + ((d-dy)/hy)^2 = 1 for the larger root
            let (a, b) = (1.0 / (hx * hx), 1.0 / (hy * hy));
            let sum = a + b;
            let mean = (a * dx + b * dy) / sum;
            let disc = mean * mean - (a * dx * dx + b * dy * dy - 1.0) / sum;
            if disc >= 0.0 {
                let d = mean + libm::sqrt(disc);
                if d >= dx && d >= dy {
                    d
                } else {
                    dx.min(dy) + if dx < dy { hx } else { hy }
                }
            } else {
                dx.min(dy) + if dx < dy { hx } else { hy }
            }
        };
        if cand < dist[k] {
            dist[k] = cand;
        }
    };
    for _ in 0..2 {
        for j in 0..ny {
            for i in 0..nx {
                update(&mut dist, i, j);
            }
        }
        for j in (0..ny).rev() {
            for i in 0..nx {
                update(&mut dist, i, j);
            }
        }
        for j in 0..ny {
            for i in (0..nx).rev() {
                update(&mut dist, i, j);
            }
        }
        for j in (0..ny).rev() {
            for i in (0..nx).rev() {
                update(&mut dist, i, j);
            }
        }
    }

    let mut out = ScalarField::zeros(g);
    for k in 0..g.n_nodes() {
        let s = if phi.values()[k] > 0.0 { 1.0 } else { -1.0 };
        out.values_mut()[k] = s * dist[k];
    }
    out
}

/// Scaling factors of the three penalty addends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Betas {
    pub fn new(beta1: f64, beta2: f64, beta3: f64) -> Result<Self> {
        if beta1 < 0.0 || beta2 < 0.0 || beta3 < 0.0 {
            return Err(Error::InvalidParameter("betas must be non-negative"));
        }
        Ok(Self { beta1, beta2, beta3 })
    }
}

/// The three weighted addends of the regularization functional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PenaltyTerms {
    /// `beta1 * TV(H_eps(phi))`: interface length.
    pub interface: f64,
    /// `beta2 * |phi - phi0|_{H1}^2`: level-set drift.
    pub phi_h1: f64,
    /// `beta3 * sum_j TV(psi_j - psi0_j)`: level-value variation.
    pub levels: f64,
}

impl PenaltyTerms {
    pub fn total(&self) -> f64 {
        self.interface + self.phi_h1 + self.levels
    }
}

/// Evaluate the penalty functional
/// `beta1*TV(H_eps(phi)) + beta2*|phi-phi0|_{H1}^2 + beta3*sum_j TV(psi_j-psi0_j)`
/// with the smoothed total variation, returning the three weighted addends.
pub fn evaluate_r(
    state: &LevelSetState,
    phi0: &ScalarField,
    psi0_1: &ScalarField,
    psi0_2: &ScalarField,
    betas: Betas,
    beta_tv: f64,
) -> Result<PenaltyTerms> {
    if state.phi.grid() != phi0.grid()
        || state.phi.grid() != psi0_1.grid()
        || state.phi.grid() != psi0_2.grid()
    {
        return Err(Error::GridMismatch);
    }
    if !(beta_tv > 0.0) {
        return Err(Error::InvalidParameter("beta_tv must be positive"));
    }
    Betas::new(betas.beta1, betas.beta2, betas.beta3)?;

    let z = state.indicator();
    let interface = betas.beta1 * z.norm(NormKind::TvSmoothed(beta_tv));

    let dphi = state.phi.zip_map(phi0, |a, b| a - b)?;
    let h1 = dphi.norm(NormKind::H1);
    let phi_h1 = betas.beta2 * h1 * h1;

    let d1 = state.psi1.zip_map(psi0_1, |a, b| a - b)?;
    let d2 = state.psi2.zip_map(psi0_2, |a, b| a - b)?;
    let levels = betas.beta3
        * (d1.norm(NormKind::TvSmoothed(beta_tv)) + d2.norm(NormKind::TvSmoothed(beta_tv)));

    Ok(PenaltyTerms { interface, phi_h1, levels })
}

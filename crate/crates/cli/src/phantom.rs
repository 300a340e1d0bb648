//! Ground-truth phantoms: a shape with a signed-distance level-set
//! function and two spatially varying level laws.

use lsr_core::grid::{Grid2D, ScalarField};
use lsr_core::levelset::{apply_q, heaviside_sharp, AdmissibleBox, LevelSetState};

use crate::Result;

/// Interface geometry of the inclusion, strictly inside the domain.
#[derive(Debug, Clone, Copy)]
pub enum PhantomShape {
    Disk { center: (f64, f64), radius: f64 },
    TwoDisks { centers: [(f64, f64); 2], radii: [f64; 2] },
    Square { center: (f64, f64), half_side: f64 },
}

/// Level-value laws; the levels are functions, not constants.
#[derive(Debug, Clone, Copy)]
pub enum LevelLaw {
    Constant(f64),
    /// Linear in x across the domain, from `a` at the left to `b` at the right.
    RampX(f64, f64),
    /// Linear in y across the domain.
    RampY(f64, f64),
    /// Linear in the distance from the domain center: `a` there, `b` at the
    /// far corner.
    Radial(f64, f64),
}

impl LevelLaw {
    fn range(&self) -> (f64, f64) {
        match *self {
            LevelLaw::Constant(c) => (c, c),
            LevelLaw::RampX(a, b) | LevelLaw::RampY(a, b) | LevelLaw::Radial(a, b) => {
                (a.min(b), a.max(b))
            }
        }
    }

    fn sample(&self, grid: Grid2D) -> ScalarField {
        let x0 = grid.x(0);
        let x1 = grid.x(grid.nx() - 1);
        let y0 = grid.y(0);
        let y1 = grid.y(grid.ny() - 1);
        match *self {
            LevelLaw::Constant(c) => ScalarField::constant(grid, c),
            LevelLaw::RampX(a, b) => {
                ScalarField::from_fn(grid, move |x, _| a + (b - a) * (x - x0) / (x1 - x0))
            }
            LevelLaw::RampY(a, b) => {
                ScalarField::from_fn(grid, move |_, y| a + (b - a) * (y - y0) / (y1 - y0))
            }
            LevelLaw::Radial(a, b) => {
                let cx = 0.5 * (x0 + x1);
                let cy = 0.5 * (y0 + y1);
                let rmax = (x1 - cx).hypot(y1 - cy);
                ScalarField::from_fn(grid, move |x, y| {
                    let rho = ((x - cx).hypot(y - cy) / rmax).min(1.0);
                    a + (b - a) * rho
                })
            }
        }
    }
}

/// Full phantom description: geometry, level laws and the admissible box
/// the laws must respect.
#[derive(Debug, Clone, Copy)]
pub struct PhantomSpec {
    pub shape: PhantomShape,
    pub psi1: LevelLaw,
    pub psi2: LevelLaw,
    pub bounds: AdmissibleBox,
}

impl PhantomSpec {
    /// Check that the shape sits strictly inside the domain and both laws
    /// fit inside the box; messages name the offending part.
    pub fn validate(&self, grid: Grid2D) -> std::result::Result<(), String> {
        let x0 = grid.x(0);
        let x1 = grid.x(grid.nx() - 1);
        let y0 = grid.y(0);
        let y1 = grid.y(grid.ny() - 1);
        let inside = |cx: f64, cy: f64, reach: f64| {
            cx - reach > x0 && cx + reach < x1 && cy - reach > y0 && cy + reach < y1
        };
        let ok = match self.shape {
            PhantomShape::Disk { center, radius } => {
                radius > 0.0 && inside(center.0, center.1, radius)
            }
            PhantomShape::TwoDisks { centers, radii } => {
                radii.iter().all(|&r| r > 0.0)
                    && inside(centers[0].0, centers[0].1, radii[0])
                    && inside(centers[1].0, centers[1].1, radii[1])
            }
            PhantomShape::Square { center, half_side } => {
                half_side > 0.0 && inside(center.0, center.1, half_side)
            }
        };
        if !ok {
            return Err("phantom.shape: must lie strictly inside the domain".into());
        }
        for (name, law) in [("phantom.psi1", self.psi1), ("phantom.psi2", self.psi2)] {
            let (lo, hi) = law.range();
            if !(self.bounds.contains(lo) && self.bounds.contains(hi)) {
                return Err(format!("{name}: law range [{lo}, {hi}] leaves the admissible box"));
            }
        }
        Ok(())
    }

    /// Signed distance to the shape, positive inside.
    pub fn signed_distance(&self, grid: Grid2D) -> ScalarField {
        match self.shape {
            PhantomShape::Disk { center, radius } => ScalarField::from_fn(grid, move |x, y| {
                radius - (x - center.0).hypot(y - center.1)
            }),
            PhantomShape::TwoDisks { centers, radii } => {
                ScalarField::from_fn(grid, move |x, y| {
                    let d0 = radii[0] - (x - centers[0].0).hypot(y - centers[0].1);
                    let d1 = radii[1] - (x - centers[1].0).hypot(y - centers[1].1);
                    d0.max(d1)
                })
            }
            PhantomShape::Square { center, half_side } => {
                // L-infinity signed distance keeps |grad| = 1 a.e.
                ScalarField::from_fn(grid, move |x, y| {
                    half_side - (x - center.0).abs().max((y - center.1).abs())
                })
            }
        }
    }
}

/// Build the ground truth: the coefficient composed with the sharp
/// Heaviside, plus the generating level-set state.
pub fn make_phantom(
    spec: &PhantomSpec,
    grid: Grid2D,
    eps: f64,
) -> Result<(ScalarField, LevelSetState)> {
    spec.validate(grid).map_err(crate::CliError::Config)?;
    let phi = spec.signed_distance(grid);
    let psi1 = spec.psi1.sample(grid);
    let psi2 = spec.psi2.sample(grid);
    let z = phi.map(heaviside_sharp);
    let u_true = apply_q(&z, &psi1, &psi2)?;
    let state = LevelSetState::new(phi, psi1, psi2, eps)?;
    Ok((u_true, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lsr_core::grid::NormKind;

    fn grid(n: usize) -> Grid2D {
        Grid2D::unit_square(n, n).unwrap()
    }

    fn bounds() -> AdmissibleBox {
        AdmissibleBox::new(1.0, 3.0).unwrap()
    }

    #[test]
    fn piecewise_constant_disk() {
        let spec = PhantomSpec {
            shape: PhantomShape::Disk { center: (0.5, 0.5), radius: 0.3 },
            psi1: LevelLaw::Constant(2.0),
            psi2: LevelLaw::Constant(1.0),
            bounds: bounds(),
        };
        let g = grid(33);
        let (u, state) = make_phantom(&spec, g, 0.05).unwrap();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let inside = (g.x(i) - 0.5).hypot(g.y(j) - 0.5) < 0.3;
                let expect = if inside { 2.0 } else { 1.0 };
                if (state.phi.get(i, j)).abs() > 1e-9 {
                    assert_eq!(u.get(i, j), expect, "node {i},{j}");
                }
            }
        }
    }

    #[test]
    fn equal_laws_make_the_shape_invisible() {
        let spec = PhantomSpec {
            shape: PhantomShape::Disk { center: (0.5, 0.5), radius: 0.3 },
            psi1: LevelLaw::RampX(1.0, 2.0),
            psi2: LevelLaw::RampX(1.0, 2.0),
            bounds: bounds(),
        };
        let g = grid(17);
        let (u, _) = make_phantom(&spec, g, 0.05).unwrap();
        let ramp = LevelLaw::RampX(1.0, 2.0).sample(g);
        for k in 0..g.n_nodes() {
            assert!((u.values()[k] - ramp.values()[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_phantom_area_fraction() {
        let spec = PhantomSpec {
            shape: PhantomShape::Disk { center: (0.5, 0.5), radius: 0.3 },
            psi1: LevelLaw::RampX(2.0, 3.0),
            psi2: LevelLaw::RampY(1.0, 1.5),
            bounds: bounds(),
        };
        let g = grid(128);
        let (u, _) = make_phantom(&spec, g, 0.05).unwrap();
        let count = u.values().iter().filter(|&&v| v >= 2.0).count();
        let area = count as f64 * g.cell_area();
        let expect = std::f64::consts::PI * 0.09;
        // one grid-cell band around the circle
        let band = 2.0 * std::f64::consts::PI * 0.3 * g.hx() * 1.5;
        assert!((area - expect).abs() < band, "area {area} vs {expect}");
    }

    #[test]
    fn truth_stays_inside_the_box() {
        for shape in [
            PhantomShape::Disk { center: (0.4, 0.6), radius: 0.2 },
            PhantomShape::TwoDisks { centers: [(0.3, 0.3), (0.7, 0.7)], radii: [0.15, 0.12] },
            PhantomShape::Square { center: (0.5, 0.5), half_side: 0.22 },
        ] {
            let spec = PhantomSpec {
                shape,
                psi1: LevelLaw::Radial(2.5, 3.0),
                psi2: LevelLaw::Constant(1.5),
                bounds: bounds(),
            };
            let g = grid(33);
            let (u, _) = make_phantom(&spec, g, 0.05).unwrap();
            assert!(u.min_value() >= 1.0 && u.max_value() <= 3.0);
        }
    }

    #[test]
    fn square_sdf_is_eikonal() {
        let spec = PhantomSpec {
            shape: PhantomShape::Square { center: (0.5, 0.5), half_side: 0.25 },
            psi1: LevelLaw::Constant(2.0),
            psi2: LevelLaw::Constant(1.0),
            bounds: bounds(),
        };
        let g = grid(65);
        let phi = spec.signed_distance(g);
        let grad = lsr_core::grid::gradient(&phi);
        let mut on_diag = 0;
        for j in 2..g.ny() - 2 {
            for i in 2..g.nx() - 2 {
                let k = g.idx(i, j);
                let m = grad.x[k].hypot(grad.y[k]);
                // away from the diagonal kinks the slope is one
                if (m - 1.0).abs() > 0.2 {
                    on_diag += 1;
                }
            }
        }
        assert!(on_diag < g.n_nodes() / 8, "too many non-eikonal nodes: {on_diag}");
        let _ = phi.norm(NormKind::L1);
    }

    #[test]
    fn rejects_shapes_touching_the_boundary() {
        let spec = PhantomSpec {
            shape: PhantomShape::Disk { center: (0.5, 0.5), radius: 0.6 },
            psi1: LevelLaw::Constant(2.0),
            psi2: LevelLaw::Constant(1.0),
            bounds: bounds(),
        };
        assert!(spec.validate(grid(17)).is_err());
        let spec = PhantomSpec {
            shape: PhantomShape::Disk { center: (0.5, 0.5), radius: 0.3 },
            psi1: LevelLaw::Constant(5.0),
            psi2: LevelLaw::Constant(1.0),
            bounds: bounds(),
        };
        assert!(spec.validate(grid(17)).unwrap_err().contains("psi1"));
    }
}

//! Fast invariant battery behind `lsr check`: one line per check, nonzero
//! exit on any failure.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lsr_core::elliptic::{solve_dirichlet, SolverSettings};
use lsr_core::grid::{
    boundary_trace, gradient, laplacian, BoundaryTrace, Grid2D, NormKind, ScalarField,
};
use lsr_core::inversion::{compute_l_terms, evaluate_objective, InversionConfig, PriorData};
use lsr_core::levelset::{heaviside_smooth, heaviside_smooth_deriv, AdmissibleBox};
use lsr_core::operators::{
    f1_adjoint, f1_forward, f2_discrete_gradient, f2_forward, AdjointMode, ConductivityProblem,
    PotentialProblem, Problem,
};

use crate::noise::{add_noise, NoiseSpec};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn record(results: &mut Vec<Outcome>, name: &'static str, passed: bool, detail: String) {
    results.push(Outcome { name, passed, detail });
}

/// Run every check, printing one `ok`/`FAIL` line each; returns overall
/// success.
pub fn run_checks() -> bool {
    let mut results = Vec::new();

    let g = Grid2D::unit_square(17, 17).unwrap();

    // second-order differences are exact on quadratics inside
    {
        let f = ScalarField::from_fn(g, |x, y| x * x + 0.5 * y * y);
        let grad = gradient(&f);
        let lap = laplacian(&f);
        let mut worst: f64 = 0.0;
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                let k = g.idx(i, j);
                worst = worst.max((grad.x[k] - 2.0 * g.x(i)).abs());
                worst = worst.max((lap.values()[k] - 3.0).abs());
            }
        }
        record(&mut results, "difference operators exact on quadratics", worst < 1e-10, format!("max dev {worst:.2e}"));
    }

    // smoothed Heaviside values and bounds
    {
        let a = heaviside_smooth(-0.05, 0.1).unwrap();
        let b = heaviside_smooth_deriv(-0.05, 0.1).unwrap();
        let mut inside = (a - 0.5).abs() < 1e-14 && (b - 10.0).abs() < 1e-12;
        for t in -30..30 {
            let v = heaviside_smooth(t as f64 * 0.01, 0.07).unwrap();
            inside &= (0.0..=1.0).contains(&v);
        }
        record(&mut results, "smoothed Heaviside profile and bounds", inside, String::new());
    }

    // calibrated noise hits its level and reproduces bitwise
    {
        let y = BoundaryTrace::from_fn(g, |x, y| x + (2.0 * y).cos());
        let spec = NoiseSpec { delta_rel: 0.02, seed: 42 };
        let r1 = add_noise(&y, &spec);
        let r2 = add_noise(&y, &spec);
        let passed = match (r1, r2) {
            (Ok((n1, d1)), Ok((n2, _))) => {
                let mut diff = n1.clone();
                diff.scaled_add(-1.0, &y);
                (diff.l2_norm() - d1).abs() < 1e-12 && n1 == n2
            }
            _ => false,
        };
        record(&mut results, "noise level exact and seed-reproducible", passed, String::new());
    }

    // adjoint identity of the discrete potential operator
    {
        let g16 = Grid2D::unit_square(16, 16).unwrap();
        let prob = PotentialProblem::new(
            ScalarField::constant(g16, 1.0),
            BoundaryTrace::zeros(g16),
            SolverSettings::direct(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let u = ScalarField::from_values(
                g16,
                (0..g16.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let r = BoundaryTrace::from_values(
                g16,
                (0..g16.n_boundary()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (fu, _) = f1_forward(&u, &prob).unwrap();
            let fstar = f1_adjoint(&r, &prob, AdjointMode::Discrete).unwrap();
            let rel = (fu.inner(&r) - u.inner(&fstar)).abs()
                / (u.norm(NormKind::L2) * r.l2_norm());
            worst = worst.max(rel);
        }
        record(&mut results, "potential adjoint identity", worst < 1e-8, format!("worst rel {worst:.2e}"));
    }

    // conductivity misfit gradient vs finite differences
    {
        let prob = ConductivityProblem::new(
            ScalarField::zeros(g),
            BoundaryTrace::from_fn(g, |x, _| x),
            AdmissibleBox::new(0.5, 4.0).unwrap(),
            SolverSettings::direct(),
        )
        .unwrap();
        let u = ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * (2.0 * x + y).sin());
        let d = {
            let bump = ScalarField::from_fn(g, |x, y| {
                if (x - 0.5).hypot(y - 0.5) < 0.3 {
                    1.5
                } else {
                    1.0
                }
            });
            f2_forward(&bump, &prob).unwrap().0
        };
        let misfit = |u: &ScalarField| {
            let (y, _) = f2_forward(u, &prob).unwrap();
            let mut res = y.clone();
            res.scaled_add(-1.0, &d);
            0.5 * res.inner(&res)
        };
        let (y, w) = f2_forward(&u, &prob).unwrap();
        let mut residual = y.clone();
        residual.scaled_add(-1.0, &d);
        let grad = f2_discrete_gradient(&u, &w, &residual, &prob).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for _ in 0..2 {
            let dir = ScalarField::from_values(
                g,
                (0..g.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let tau = 1e-4;
            let mut up = u.clone();
            up.scaled_add(tau, &dir);
            let mut dn = u.clone();
            dn.scaled_add(-tau, &dir);
            let fd = (misfit(&up) - misfit(&dn)) / (2.0 * tau);
            worst = worst.max((fd - grad.inner(&dir)).abs() / fd.abs().max(1e-14));
        }
        record(&mut results, "conductivity gradient matches finite differences", worst < 1e-3, format!("worst rel {worst:.2e}"));
    }

    // optimality-term identity L1 + L2 = F'* r / (2 beta3)
    {
        let bounds = AdmissibleBox::new(1.0, 3.0).unwrap();
        let prob = Problem::Potential(
            PotentialProblem::new(
                ScalarField::constant(g, 1.0),
                BoundaryTrace::zeros(g),
                SolverSettings::direct(),
            )
            .unwrap(),
        );
        let prior = PriorData::centered_disk(g, bounds);
        let cfg = {
            let mut c = InversionConfig::new(bounds, 2.0 * g.hx());
            c.solver = SolverSettings::direct();
            c
        };
        let mut state = prior.initial_state(cfg.eps0, &bounds).unwrap();
        state.psi1 = ScalarField::from_fn(g, |x, _| 2.0 + 0.5 * x);
        let data = BoundaryTrace::from_fn(g, |x, y| 0.1 * x - 0.05 * y);
        let eval = evaluate_objective(&state, &data, &prob, &prior, &cfg).unwrap();
        let (_, l1, l2) = compute_l_terms(&state, &eval.residual, &eval.field, &prob, &cfg).unwrap();
        let gf = prob
            .adjoint_gradient(&state.coefficient(), &eval.field, &eval.residual, cfg.adjoint_mode)
            .unwrap();
        let scale = 1.0 / (2.0 * cfg.betas.beta3);
        let mut worst: f64 = 0.0;
        for k in 0..g.n_nodes() {
            worst = worst
                .max((l1.values()[k] + l2.values()[k] - scale * gf.values()[k]).abs());
        }
        record(&mut results, "level-update sum identity", worst < 1e-12, format!("max dev {worst:.2e}"));
    }

    // manufactured solution converges at second order
    {
        let pi = std::f64::consts::PI;
        let err = |n: usize| {
            let gn = Grid2D::unit_square(n, n).unwrap();
            let coeff = ScalarField::constant(gn, 1.0);
            let rhs =
                ScalarField::from_fn(gn, |x, y| 2.0 * pi * pi * (pi * x).sin() * (pi * y).sin());
            let w =
                solve_dirichlet(&coeff, &rhs, &BoundaryTrace::zeros(gn), SolverSettings::direct())
                    .unwrap();
            let exact = ScalarField::from_fn(gn, |x, y| (pi * x).sin() * (pi * y).sin());
            let diff = w.zip_map(&exact, |a, b| a - b).unwrap();
            diff.norm(NormKind::L2) / exact.norm(NormKind::L2)
        };
        let ratio = err(17) / err(33);
        record(&mut results, "Poisson solve second-order convergent", (2.5..6.0).contains(&ratio), format!("ratio {ratio:.2}"));
    }

    // boundary extraction round trip
    {
        let f = ScalarField::from_fn(g, |x, y| (x - y).sin());
        let t = boundary_trace(&f);
        let mut embedded = ScalarField::zeros(g);
        embedded.apply_boundary(&t).unwrap();
        record(&mut results, "boundary trace round trip", boundary_trace(&embedded) == t, String::new());
    }

    let mut all = true;
    for o in &results {
        let status = if o.passed { "ok" } else { "FAIL" };
        if o.detail.is_empty() {
            println!("check {:<48} {}", o.name, status);
        } else {
            println!("check {:<48} {} ({})", o.name, status, o.detail);
        }
        all &= o.passed;
    }
    all
}

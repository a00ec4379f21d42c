use dslab::continuation::SteadyProblem;
use dslab::evolve::{Domain2D, Field2DC, Stepper};
use dslab::grid::DEFAULT_CHEBYSHEV_MAP;
use dslab::operators::{assemble_a1, assemble_a2, quadratic_form_a1, quadratic_form_identity, sech};
use dslab::resolvent::{apply_l, iooss_residual, solve_iooss_zero_mode, Resolvent};
use dslab::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn spectral(n: usize) -> Grid1D {
    Grid1D::new(20.0, n, Scheme::ChebyshevMapped, DEFAULT_CHEBYSHEV_MAP).unwrap()
}

fn params() -> impl Strategy<Value = Params> {
    (0.1f64..1.9, 0.2f64..3.0).prop_map(|(g2, g3)| Params::new(2.0 - g2, g2, g3).unwrap())
}

/// Gaussian bump `a e^{−b(x−c)²}` with zero boundary values.
fn bump(g: &Grid1D, (a, b, c): (f64, f64, f64)) -> Vec<f64> {
    let mut f = g.sample(|x| a * (-b * (x - c).powi(2)).exp());
    let n = f.len();
    f[0] = 0.0;
    f[n - 1] = 0.0;
    f
}

fn bump_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0f64..1.0, 0.2f64..1.0, -3.0f64..3.0)
}

fn even(f: &[f64]) -> Vec<f64> {
    f.iter().zip(f.iter().rev()).map(|(a, b)| 0.5 * (a + b)).collect()
}

fn odd(f: &[f64]) -> Vec<f64> {
    f.iter().zip(f.iter().rev()).map(|(a, b)| 0.5 * (a - b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn summation_by_parts_holds(n in (8usize..48).prop_map(|k| 2 * k), u in bump_params(), v in bump_params()) {
        let g = spectral(n);
        let (fu, fv) = (g.sample(|x| u.0 * (-u.1 * (x - u.2).powi(2)).exp()), g.sample(|x| v.0 * (-v.1 * (x - v.2).powi(2)).exp()));
        let lhs = g.inner(&fu, &g.apply_d1(&fv)) + g.inner(&g.apply_d1(&fu), &fv);
        let bnd = fu[n - 1] * fv[n - 1] - fu[0] * fv[0];
        prop_assert!((lhs - bnd).abs() < 1e-11);
    }

    #[test]
    fn operators_are_weighted_symmetric(p in params(), n in (12usize..40).prop_map(|k| 2 * k)) {
        let g = spectral(n);
        prop_assert!(assemble_a1(&g, &p).unwrap().symmetry_defect() < 1e-10);
        prop_assert!(assemble_a2(&g, &p).unwrap().symmetry_defect() < 1e-10);
    }

    #[test]
    fn quadratic_form_identity_is_exact(p in params(), u in bump_params(), f in bump_params()) {
        let g = spectral(128);
        let (uu, ff) = (bump(&g, u), bump(&g, f));
        let phi = odd(&ff);
        let direct = quadratic_form_a1(&uu, &phi, &g, &p);
        let ident = quadratic_form_identity(&uu, &phi, &g, &p);
        prop_assert!((direct - ident).abs() <= 1e-8 * direct.abs().max(ident.abs()).max(1e-12));
    }

    #[test]
    fn l_anticommutes_with_reverser_and_commutes_with_reflection(p in params(), seeds in prop::array::uniform6(bump_params())) {
        let g = spectral(64);
        let s = StateVector::from_fields(seeds.map(|b| bump(&g, b)));
        let (a, b) = (apply_l(&s.reverse(), &g, &p), apply_l(&s, &g, &p).reverse());
        let (c, d) = (apply_l(&s.reflect(), &g, &p), apply_l(&s, &g, &p).reflect());
        for ((x, y), (z, w)) in a.fields().iter().zip(b.fields()).zip(c.fields().iter().zip(d.fields())) {
            for i in 0..x.len() {
                prop_assert!((x[i] + y[i]).abs() < 1e-10);
                prop_assert!((z[i] - w[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_mode_solve_has_small_residual(p in params(), u in bump_params(), f in bump_params()) {
        let g = spectral(128);
        let mut wd = StateVector::zeros(g.len());
        wd.u1 = even(&bump(&g, (u.0, u.1, 0.0)));
        wd.phi = odd(&bump(&g, f));
        let w = solve_iooss_zero_mode(&wd, &g, &p).unwrap();
        prop_assert!(iooss_residual(&w, &wd, &g, &p) < 1e-8);
        prop_assert!(w.parity_defect() < 1e-12);
    }

    #[test]
    fn evolver_conserves_mass_and_reverses(c in bump_params(), k in 0.3f64..1.5) {
        let d = Domain2D::new(64, 8, 20.0, k).unwrap();
        let f0 = Field2DC::from_fn(d, |x, y| Complex64::new(sech(x) * (1.0 + 0.2 * c.0 * (k * y).cos()), c.0 * (-c.1 * (x - c.2).powi(2)).exp()));
        let s = Stepper::new(d, &Params::default()).unwrap();
        let mut f = f0.clone();
        s.step(&mut f, 1e-2).unwrap();
        prop_assert!((f.mass() - f0.mass()).abs() < 1e-10 * f0.mass());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn resolvent_solutions_satisfy_the_equation(k in 3.0f64..40.0, seeds in prop::array::uniform6(bump_params())) {
        let g = spectral(96);
        let r = Resolvent::new(&g, &Params::default()).unwrap();
        let rhs = StateVector::from_fields(seeds.map(|b| bump(&g, b))).project_symmetric().to_complex();
        let sol = r.solve(k, &rhs).unwrap();
        prop_assert!(sol.residual < 1e-9, "residual {}", sol.residual);
    }

    #[test]
    fn predictor_amplitude_is_exact(s in -0.1f64..0.1) {
        let g = spectral(64);
        let p = SteadyProblem::new(&g, &Params::default(), 8).unwrap();
        prop_assert!((p.amplitude(&p.predictor(s)).unwrap() - s).abs() < 1e-13);
    }

    #[test]
    fn pencil_modes_certify(frac in 0.1f64..0.95) {
        let g = spectral(128);
        let ins = instability::Instability::new(&g, &Params::default()).unwrap();
        let gp = ins.growth_rate(frac * ins.omega0()).unwrap();
        prop_assert!(gp.lambda > 0.0);
        prop_assert!(gp.residual < 1e-7);
    }
}

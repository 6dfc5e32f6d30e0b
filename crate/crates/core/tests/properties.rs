use std::sync::Arc;

use levydrift_core::catalog::{self, geometry};
use levydrift_core::drift::{e_v_alpha, e_w_alpha, t_alpha};
use levydrift_core::geometry::{norm, sphere_area};
use levydrift_core::quadruple::{
    abc_functionals, constant_matrix, integrate_small_jumps, integrate_tail_mass, scaled_identity, Atom,
    LevyMeasureSpec, LevyQuadruple, TailMoment,
};
use levydrift_core::symbol::eval_symbol;
use levydrift_core::testfn::{build_extension, eval_extension, eval_extension_derivs, CriterionParams, TestKind};
use levydrift_core::Extended;
use proptest::prelude::*;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    point_in(d, -2.0, 2.0)
}

/// Uniform direction with `log10 |x|` uniform on `[lo, hi)`.
fn point_in(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d), lo..hi).prop_filter_map("degenerate direction", |(u, lr)| {
        let n = norm(&u);
        (n > 1e-3).then(|| u.iter().map(|v| v / n * 10f64.powf(lr)).collect())
    })
}

fn dim_and_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| (Just(d), point(d)))
}

/// States outside `B(0, 1.5)`, where the drift terms with `x0 = 2` are defined.
fn dim_and_far_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| (Just(d), point_in(d, 0.18, 2.0)))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn state_dependent_stable(d: usize) -> LevyQuadruple {
    let mut q = LevyQuadruple::null(d);
    q.jumps = LevyMeasureSpec::StableLike {
        alpha: Arc::new(|x: &[f64]| 1.2 + 0.5 * x[0].sin()),
        gamma: Arc::new(|x: &[f64]| 1.0 + 0.5 * x[0].cos().powi(2)),
    };
    q
}

fn atoms_quadruple(d: usize, ys: &[Vec<f64>], masses: &[f64]) -> LevyQuadruple {
    let mut q = LevyQuadruple::null(d);
    q.jumps = LevyMeasureSpec::FiniteAtoms(
        ys.iter()
            .zip(masses)
            .map(|(y, &m)| Atom {
                y: y.clone(),
                mass: Arc::new(move |x: &[f64]| m * (1.0 + 0.1 * x[0].tanh())),
            })
            .collect(),
    );
    q
}

fn atoms_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(point(d), 1..6),
            prop::collection::vec(0.01f64..2.0, 6),
            point_in(d, 0.18, 1.5),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stable_like_small_jumps_normalise_to_sphere_area((d, x) in dim_and_point()) {
        let q = state_dependent_stable(d);
        let (a, g) = (1.2 + 0.5 * x[0].sin(), 1.0 + 0.5 * x[0].cos().powi(2));
        let m = integrate_small_jumps(&q, &x).unwrap();
        prop_assert!(rel_err(m * (2.0 - a) / g, sphere_area(d)) < 1e-8);
    }

    #[test]
    fn atom_integrals_are_literal_sums((d, ys, masses, x) in atoms_strategy()) {
        let q = atoms_quadruple(d, &ys, &masses);
        let w = 1.0 + 0.1 * x[0].tanh();
        let small: f64 = ys.iter().zip(&masses).filter(|(y, _)| norm(y) < 1.0).map(|(y, m)| m * w * norm(y).powi(2)).sum();
        prop_assert!((integrate_small_jumps(&q, &x).unwrap() - small).abs() <= 1e-12 * small.max(1.0));
        for p in [0.0, 0.5, 1.7] {
            let tail: f64 = ys.iter().zip(&masses).filter(|(y, _)| norm(y) >= 1.0).map(|(y, m)| m * w * norm(y).powf(p)).sum();
            let got = integrate_tail_mass(&q, &x, TailMoment::Power(p)).unwrap().finite().unwrap();
            prop_assert!((got - tail).abs() <= 1e-12 * tail.max(1.0));
        }
    }

    #[test]
    fn stable_tail_moments_follow_closed_form(d in 1usize..=3, alpha in 0.1f64..1.95, gamma in 0.1f64..3.0, f in 0.0f64..0.95) {
        let mut q = LevyQuadruple::null(d);
        q.jumps = LevyMeasureSpec::stable(alpha, gamma);
        let x = vec![0.3; d];
        let p1 = f * alpha * 0.5;
        let p2 = f * alpha;
        let m1 = integrate_tail_mass(&q, &x, TailMoment::Power(p1)).unwrap().finite().unwrap();
        let m2 = integrate_tail_mass(&q, &x, TailMoment::Power(p2)).unwrap().finite().unwrap();
        prop_assert!(rel_err(m1, gamma * sphere_area(d) / (alpha - p1)) < 1e-8);
        prop_assert!(rel_err(m2, gamma * sphere_area(d) / (alpha - p2)) < 1e-8);
        prop_assert!(m1 <= m2);
        prop_assert_eq!(integrate_tail_mass(&q, &x, TailMoment::Power(alpha + 0.01)).unwrap(), Extended::PosInfinity);
    }

    #[test]
    fn isotropic_diffusion_functionals_are_rotation_invariant((d, x) in dim_and_point(), sigma2 in 0.01f64..5.0, angle in 0.0f64..6.3) {
        let mut q = LevyQuadruple::null(d);
        q.diffusion = constant_matrix(scaled_identity(d, sigma2));
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        let mut y = x.clone();
        if d >= 2 {
            let (s, c) = angle.sin_cos();
            y[0] = c * x[0] - s * x[1];
            y[1] = s * x[0] + c * x[1];
        }
        for z in [&x, &y] {
            let f = abc_functionals(&q, z).unwrap();
            prop_assert!(rel_err(f.A, d as f64 * sigma2 / (2.0 * r2)) < 1e-12);
            prop_assert!(rel_err(f.C, sigma2 / r2) < 1e-12);
            prop_assert_eq!(f.B, 0.0);
        }
    }

    #[test]
    fn brownian_t_alpha_closed_form((d, x) in dim_and_far_point(), alpha in 0.0f64..3.0) {
        let q = catalog::brownian(d).unwrap();
        let r = norm(&x);
        let p = CriterionParams::new(alpha, 2.0);
        let t = t_alpha(&q, &x, &p).unwrap().total.finite().unwrap();
        let want = alpha * r.powf(-alpha - 2.0) * (d as f64 / 2.0 - 1.0 - alpha / 2.0);
        prop_assert!((t - want).abs() <= 1e-12 * want.abs().max(r.powf(-alpha - 2.0)));
    }

    #[test]
    fn atom_big_jump_terms_match_direct_sums((d, ys, masses, x) in atoms_strategy(), alpha in 0.1f64..2.5) {
        let q = atoms_quadruple(d, &ys, &masses);
        let p = CriterionParams::new(alpha, 2.0);
        let r = norm(&x);
        let w = |s: f64| 1.0 - s.powf(-alpha);
        let v = |s: f64| s.powf(alpha);
        let mass = 1.0 + 0.1 * x[0].tanh();
        let (mut ew, mut ev) = (0.0, 0.0);
        for (y, m) in ys.iter().zip(&masses) {
            if norm(y) < 1.0 {
                continue;
            }
            let rho = norm(&x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>());
            if rho > p.r0 {
                ew += m * mass * (w(rho) - w(r));
                ev += m * mass * (v(rho) - v(r));
            } else {
                ew += m * mass * (w(p.r0) - p.eps_value() - w(r));
                ev += m * mass * (v(p.r0) - v(r));
            }
        }
        let gw = e_w_alpha(&q, &x, &p).unwrap().value.finite().unwrap();
        let gv = e_v_alpha(&q, &x, &p).unwrap().value.finite().unwrap();
        prop_assert!((gw - ew).abs() <= 1e-10 * ew.abs().max(1.0));
        prop_assert!((gv - ev).abs() <= 1e-10 * ev.abs().max(1.0));
    }

    #[test]
    fn symmetric_symbols_are_real_and_scale((d, x) in dim_and_point(), xi in point(3), t in 0.1f64..10.0, alpha in 0.2f64..1.9) {
        let xi = &xi[..d];
        let txi: Vec<f64> = xi.iter().map(|v| v * t).collect();
        let b = catalog::brownian(d).unwrap();
        let s = catalog::stable(d, alpha, 1.0).unwrap();
        for (q, exponent) in [(&b, 2.0), (&s, alpha)] {
            let v = eval_symbol(q, &x, xi).unwrap();
            let w = eval_symbol(q, &x, &txi).unwrap();
            prop_assert!(v.im.abs() < 1e-10 && w.im.abs() < 1e-10);
            let (v, w) = (v.re.finite().unwrap(), w.re.finite().unwrap());
            prop_assert!(rel_err(w, t.powf(exponent) * v) < 1e-10);
        }
        let y: Vec<f64> = (0..d).map(|i| 1.5 - 0.7 * i as f64).collect();
        let minus: Vec<f64> = y.iter().map(|v| -v).collect();
        let atoms = atoms_quadruple(d, &[y, minus], &[0.8, 0.8]);
        prop_assert!(eval_symbol(&atoms, &x, &txi).unwrap().im.abs() < 1e-10);
    }
}

fn extension_params() -> impl Strategy<Value = (TestKind, CriterionParams)> {
    (
        prop_oneof![Just(TestKind::W), Just(TestKind::V)],
        0.0f64..3.0,
        1.5f64..10.0,
    )
        .prop_filter_map("W needs α > 0", |(kind, alpha, x0)| {
            (kind == TestKind::V || alpha > 0.05).then(|| (kind, CriterionParams::new(alpha, x0)))
        })
}

fn vec_err(fd: &[f64], exact: &[f64]) -> f64 {
    let diff = norm(&fd.iter().zip(exact).map(|(a, b)| a - b).collect::<Vec<_>>());
    diff / norm(exact).max(1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn extension_derivatives_match_finite_differences((kind, p) in extension_params(), x in point(3)) {
        prop_assume!(norm(&x) > 0.05);
        let f = build_extension(kind, &p).unwrap();
        let d = eval_extension_derivs(&f, &x);
        let h = 1e-5 * (1.0 + norm(&x));
        let mut fd_grad = vec![0.0; 3];
        let mut fd_hess = vec![0.0; 9];
        for i in 0..3 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            fd_grad[i] = (eval_extension(&f, &xp) - eval_extension(&f, &xm)) / (2.0 * h);
            let (gp, gm) = (eval_extension_derivs(&f, &xp).gradient, eval_extension_derivs(&f, &xm).gradient);
            for j in 0..3 {
                fd_hess[j * 3 + i] = (gp[j] - gm[j]) / (2.0 * h);
            }
        }
        prop_assert!(vec_err(&fd_grad, &d.gradient) < 1e-4, "gradient {:?} vs {:?}", fd_grad, d.gradient);
        prop_assert!(vec_err(&fd_hess, &d.hessian) < 1e-3, "hessian {:?} vs {:?}", fd_hess, d.hessian);
    }

    #[test]
    fn extensions_are_c2_across_seams((kind, p) in extension_params()) {
        let f = build_extension(kind, &p).unwrap();
        for s in f.seams() {
            let lo = f.radial(s * (1.0 - 1e-12));
            let hi = f.radial(s * (1.0 + 1e-12));
            for k in 0..3 {
                prop_assert!((lo[k] - hi[k]).abs() <= 1e-8 * lo[k].abs().max(1.0), "order {} at seam {}", k, s);
            }
        }
    }

    #[test]
    fn extensions_are_radially_monotone((kind, p) in extension_params(), a in point(2), b in point(2)) {
        let f = build_extension(kind, &p).unwrap();
        let (x1, x2) = if norm(&a) <= norm(&b) { (a, b) } else { (b, a) };
        prop_assert!(eval_extension(&f, &x1) <= eval_extension(&f, &x2) + 1e-12);
    }
}

#[test]
fn sphere_constants() {
    for (d, s) in [
        (1, 2.0),
        (2, 2.0 * std::f64::consts::PI),
        (3, 4.0 * std::f64::consts::PI),
    ] {
        let g = geometry(d).unwrap();
        assert!((g.s_d - s).abs() < 1e-12);
        assert!((g.s_d - d as f64 * g.v_d).abs() < 1e-12);
    }
}

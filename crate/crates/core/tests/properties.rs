use proptest::prelude::*;

use speclp_core::evolution::{build_multiplier, verify_composition, ComposedOperator, TimeIntegralRule};
use speclp_core::lp_decomp::{besov_norm0, build_decomposition, sobolev_norm};
use speclp_core::spectral::{apply_lattice_multiplier, lp_norm};
use speclp_core::symbols::{audit_s1, audit_s2, check_homogeneity, S1_TOLERANCE, S2_TOLERANCE};
use speclp_core::{Complex, Field64, Grid64, Symbol64};

fn field_from(grid: Grid64, coeffs: &[(f64, f64, f64)]) -> Field64 {
    // Sum of Gaussian bumps (amplitude, center, width) along every axis.
    Field64::from_real_fn(grid, |x: &[f64]| {
        coeffs
            .iter()
            .map(|&(a, c, w)| a * x.iter().map(|&v| (-(v - c).powi(2) / (w * w)).exp()).product::<f64>())
            .sum()
    })
}

fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -3.0..3.0f64, 0.5..2.0f64), 1..5)
}

fn small_grid() -> impl Strategy<Value = Grid64> {
    (1usize..=2, prop::sample::select(vec![16usize, 32, 64]), 6.0..12.0f64)
        .prop_map(|(d, n, l)| Grid64::new(d, n, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plancherel_and_roundtrip(grid in small_grid(), b in bumps()) {
        let f = field_from(grid, &b);
        let spec = f.forward();
        let n2 = lp_norm(&f, 2.0).unwrap();
        prop_assert!((spec.l2_norm() - n2).abs() <= 1e-12 * n2.max(1e-300));
        let back = spec.inverse();
        prop_assert!(back.sub(&f).unwrap().sup_norm() <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn transform_is_linear(grid in small_grid(), b1 in bumps(), b2 in bumps(), c in -3.0..3.0f64) {
        let f = field_from(grid, &b1);
        let g = field_from(grid, &b2);
        let lhs = f.scale(c).add(&g).unwrap().forward();
        let (sf, sg) = (f.forward(), g.forward());
        for i in 0..grid.len() {
            let rhs = sf.coeffs[i] * c + sg.coeffs[i];
            prop_assert!((lhs.coeffs[i] - rhs).norm() <= 1e-11);
        }
    }

    #[test]
    fn multipliers_compose(grid in small_grid(), b in bumps(), p in 0.1..2.0f64, t in 0.05..1.0f64) {
        let f = field_from(grid, &b);
        let m1 = grid.map_frequencies(|xi| {
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            Complex::new(-r.powf(p), r)
        });
        let m2 = grid.map_frequencies(|xi| Complex::new((-t * xi.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0));
        let prod: Vec<_> = m1.iter().zip(&m2).map(|(a, b)| a * b).collect();
        let two_step = apply_lattice_multiplier(&apply_lattice_multiplier(&f, &m1).unwrap(), &m2).unwrap();
        let one_step = apply_lattice_multiplier(&f, &prod).unwrap();
        prop_assert!(two_step.sub(&one_step).unwrap().sup_norm() <= 1e-10 * one_step.sup_norm().max(1.0));
    }

    #[test]
    fn norms_are_absolutely_homogeneous(b in bumps(), c in -5.0..5.0f64, q in 1.0..4.0f64, alpha in -1.0..2.0f64) {
        let grid = Grid64::new(1, 128, 10.0).unwrap();
        let d = build_decomposition(&grid);
        let f = field_from(grid, &b);
        let cf = f.scale(c);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-11 * a.abs().max(b.abs()).max(1e-300);
        prop_assert!(close(lp_norm(&cf, q).unwrap(), c.abs() * lp_norm(&f, q).unwrap()));
        prop_assert!(close(besov_norm0(&cf, q, &d).unwrap(), c.abs() * besov_norm0(&f, q, &d).unwrap()));
        prop_assert!(close(sobolev_norm(&cf, alpha, q).unwrap(), c.abs() * sobolev_norm(&f, alpha, q).unwrap()));
    }

    #[test]
    fn evolution_composes(s in 0.0..1.0f64, d1 in 0.0..1.0f64, d2 in 0.01..1.0f64, gamma in 0.5..2.5f64) {
        let grid = Grid64::new(1, 32, 8.0).unwrap();
        let psi = Symbol64::power(gamma, 1).unwrap();
        let e = verify_composition(&psi, s, s + d1, s + d1 + d2, &grid, &TimeIntegralRule::exact()).unwrap();
        prop_assert!(e <= 1e-12, "{e:e}");
        let pt = speclp_core::symbols::lookup::<f64>(&format!("power-t:{gamma}"), 1).unwrap();
        let e = verify_composition(&pt, s, s + d1, s + d1 + d2, &grid, &TimeIntegralRule::gauss_legendre(8)).unwrap();
        prop_assert!(e <= 1e-10, "{e:e}");
    }

    #[test]
    fn dissipative_evolution_is_a_contraction(b in bumps(), gamma in 0.5..2.5f64, t in 0.01..3.0f64) {
        let grid = Grid64::new(1, 128, 10.0).unwrap();
        let psi = Symbol64::power(gamma, 1).unwrap();
        let m = build_multiplier(&psi, 0.0, t, &grid, &TimeIntegralRule::exact(), None).unwrap();
        prop_assert!(m.values.iter().all(|v| v.norm() <= 1.0));
        let f = field_from(grid, &b);
        let u = speclp_core::evolution::apply_evolution(&f, &m).unwrap();
        prop_assert!(lp_norm(&u, 2.0).unwrap() <= lp_norm(&f, 2.0).unwrap() * (1.0 + 1e-12));
        prop_assert!((u.mean() - f.mean()).norm() <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn power_laws_meet_their_certificates(gamma in 0.3..3.0f64, dim in 1usize..=3) {
        let psi = Symbol64::power(gamma, dim).unwrap();
        let xi: Vec<Vec<f64>> = (0..12)
            .map(|k| {
                let r = 2f64.powf(k as f64 - 5.0);
                (0..dim).map(|a| r * (1.0 + a as f64) / (dim as f64)).collect()
            })
            .collect();
        prop_assert!(audit_s1(&psi, &[0.0, 1.0], &xi, S1_TOLERANCE).unwrap().pass);
        prop_assert!(audit_s2(&psi, psi.n_cert.min(3), &[0.0], &xi, S2_TOLERANCE).unwrap().pass);
        prop_assert!(check_homogeneity(&psi, &[0.5, 2.0, 7.0], &xi, 1e-10).unwrap().pass);
    }

    #[test]
    fn composed_operator_is_translation_invariant(b in bumps(), k in 1usize..20) {
        let grid = Grid64::new(1, 128, 10.0).unwrap();
        let heat = Symbol64::heat(1);
        let pois = Symbol64::poisson(1);
        let op = ComposedOperator::new(&grid, Some((&pois, 0.0)), &heat, 0.0, TimeIntegralRule::exact()).unwrap();
        let f = field_from(grid, &b);
        let y = [k as f64 * grid.spacing()];
        let a = op.apply(&f.translate(&y).unwrap(), 0.7).unwrap();
        let b2 = op.apply(&f, 0.7).unwrap().translate(&y).unwrap();
        prop_assert!(a.sub(&b2).unwrap().sup_norm() <= 1e-12 * b2.sup_norm().max(1.0));
    }
}

#[test]
fn single_precision_pipeline() {
    let grid = speclp_core::Grid32::new(1, 256, 16.0).unwrap();
    let f = speclp_core::Field32::from_real_fn(grid, |x: &[f32]| (-x[0] * x[0] / 2.0).exp());
    let heat = speclp_core::Symbol32::heat(1);
    let m = build_multiplier(&heat, 0.0, 1.0, &grid, &TimeIntegralRule::exact(), None).unwrap();
    let u = speclp_core::evolution::apply_evolution(&f, &m).unwrap();
    let exact = speclp_core::Field32::from_real_fn(grid, |x: &[f32]| 3f32.powf(-0.5) * (-x[0] * x[0] / 6.0).exp());
    assert!(u.sub(&exact).unwrap().sup_norm() < 1e-5);
}

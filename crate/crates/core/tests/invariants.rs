use std::f64::consts::PI;

use proptest::prelude::*;
use starcyl::clifford::build_gammas;
use starcyl::crossed::{
    action_from_deformation, crossed_convolution, q_map, star_partial, Direction,
};
use starcyl::fourier::{FourierFunction, Geometry, NormKind, Normed, PartialFunction, Signature};
use starcyl::morita::{
    module_action, phi_pairing, psi_pairing, Action, CylFunction, LineFunction, MoritaGrid,
    SequenceFunction,
};
use starcyl::star::{involution, mu_convolution, star_cylinder, DeformationParams};
use starcyl::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small_geometry() -> Geometry {
    Geometry::with_grid(1, 1, 6.0, vec![64, 16], Signature::Euclidean).unwrap()
}

fn gaussian_mode(g: &Geometry, p0: f64, m0: f64, w: f64) -> FourierFunction {
    FourierFunction::from_fn(g.clone(), |k| {
        let e = (-PI * ((k[0] - p0).powi(2) + (k[1] - m0).powi(2)) / w).exp();
        c(e, 0.3 * k[1] * e)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn star_is_associative_and_reduces_at_zero_hbar(
        hbar in -1.0f64..1.0, p0 in -0.5f64..0.5, m0 in -1.0f64..1.0,
    ) {
        let g = small_geometry();
        let a = gaussian_mode(&g, p0, m0, 0.5);
        let b = gaussian_mode(&g, -p0, 0.0, 0.4);
        let d = gaussian_mode(&g, 0.2, -m0, 0.6);
        let p = DeformationParams::cylinder(hbar, 1);
        let lhs = star_cylinder(&star_cylinder(&a, &b, &p).unwrap(), &d, &p).unwrap();
        let rhs = star_cylinder(&a, &star_cylinder(&b, &d, &p).unwrap(), &p).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * lhs.norm(NormKind::Sup).max(1.0));

        let flat = star_cylinder(&a, &b, &DeformationParams::cylinder(0.0, 1)).unwrap();
        prop_assert!(flat.max_abs_diff(&mu_convolution(&a, &b).unwrap()) < 1e-12);

        let inv = involution(&star_cylinder(&a, &b, &p).unwrap());
        let rev = star_cylinder(&involution(&b), &involution(&a), &p).unwrap();
        prop_assert!(inv.max_abs_diff(&rev) < 1e-12);
    }

    #[test]
    fn q_is_multiplicative(hbar in 0.1f64..1.5, x0 in -0.4f64..0.4) {
        let g = Geometry::with_grid(1, 1, 8.0, vec![32, 16], Signature::Euclidean).unwrap();
        let s = action_from_deformation(hbar);
        let a = PartialFunction::from_fn(g.clone(), |x, t| {
            c((-4.0 * (x[0] - x0).powi(2)).exp(), 0.0) * (1.0 + 0.5 * (2.0 * PI * t[0]).cos())
        }).unwrap();
        let b = PartialFunction::from_fn(g.clone(), |x, t| {
            c((-3.0 * x[0] * x[0]).exp(), (-3.0 * x[0] * x[0]).exp() * (2.0 * PI * t[0]).sin())
        }).unwrap();
        let lhs = q_map(&star_partial(&a, &b, s).unwrap(), s, Direction::Forward).unwrap();
        let rhs = crossed_convolution(
            &q_map(&a, s, Direction::Forward).unwrap(),
            &q_map(&b, s, Direction::Forward).unwrap(),
            s,
        ).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9 * a.sup_norm() * b.sup_norm());
    }

    #[test]
    fn clifford_relations_hold(p in 0usize..4, q in 0usize..4) {
        prop_assume!(p + q > 0);
        let rep = build_gammas(p, q).unwrap();
        prop_assert!(rep.anticommutator_residual() < 1e-14);
    }

    #[test]
    fn morita_pairings_are_balanced(
        x0 in -0.5f64..0.5, w in 0.6f64..1.1, a1 in -1.0f64..1.0, amp in -0.8f64..0.8,
    ) {
        let grid = MoritaGrid::new(8, 16).unwrap();
        let f = LineFunction::from_fn(grid, |x| c((-PI * (x - x0).powi(2) / (w * w)).exp(), 0.0)).unwrap();
        let g = LineFunction::from_fn(grid, |x| c(0.0, (-PI * x * x).exp())).unwrap();
        let a = SequenceFunction::from_fn(3, |n| match n {
            0 => c(1.0, 0.0),
            1 => c(a1, 0.0),
            -2 => c(0.0, a1),
            _ => c(0.0, 0.0),
        }).unwrap();
        let big = CylFunction::from_fn(grid, |x, t| {
            c((-PI * x * x / (w * w)).exp() * (1.0 + amp * (2.0 * PI * t).cos()), 0.0)
        }).unwrap();
        let fa = module_action(Action::ZOnRight(&a), &f).unwrap();
        let ag = module_action(Action::ZOnLeft(&a), &g).unwrap();
        let l = phi_pairing(&fa, &g).unwrap();
        prop_assert!(l.l1_distance(&phi_pairing(&f, &ag).unwrap()).unwrap() < 1e-10 * l.l1_norm());
        let ff = module_action(Action::COnRight(&big), &f).unwrap();
        let fg = module_action(Action::COnLeft(&big), &g).unwrap();
        let s = psi_pairing(&ff, &g).unwrap();
        prop_assert!(s.max_abs_diff(&psi_pairing(&f, &fg).unwrap()) < 1e-10 * s.sup_norm());
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use liegroup_index::dual::{enumerate, rep_matrix, Cutoff, IrrepLabel};
use liegroup_index::fourier::{fourier_inverse_sampled, plancherel_norm, FourierCoefficients};
use liegroup_index::galerkin::{adjoint, assemble, assemble_truncated, index_codomain, PeterWeylBasis};
use liegroup_index::group::{group_inv, group_mul, haar_quadrature, identity, resolving_level, su2_point, su3_point, GroupPoint, GroupSpec};
use liegroup_index::index::{heat_trace_index, kernel_count_index, stabilization_sweep, SweepOptions};
use liegroup_index::linalg::{c, max_abs, max_abs_diff, unitarity_defect, CMat};
use liegroup_index::operator::OperatorSpec;
use liegroup_index::symbol::{true_composition, MatrixSymbol};
use proptest::prelude::*;

fn su2_strategy() -> impl Strategy<Value = GroupPoint> {
    (0.05..2.0 * PI - 0.05, -1.0..1.0_f64, 0.0..2.0 * PI).prop_map(|(t, u, s)| su2_point(t, u * (t / 2.0).sin(), s).unwrap())
}

fn su3_strategy() -> impl Strategy<Value = GroupPoint> {
    (prop::array::uniform3(0.0..PI / 2.0), prop::array::uniform5(0.0..2.0 * PI)).prop_map(|(th, ph)| su3_point(th, ph).unwrap())
}

fn torus_strategy(n: usize) -> impl Strategy<Value = GroupPoint> {
    prop::collection::vec(0.0..1.0_f64, n).prop_map(|v| GroupPoint::torus(&v))
}

fn cmat_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = CMat> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, k)| {
        prop::collection::vec((-1.0..1.0_f64, -1.0..1.0_f64), r * k)
            .prop_map(move |v| CMat::from_iterator(r, k, v.into_iter().map(|(a, b)| c(a, b))))
    })
}

fn torus_dist(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.chart()
        .iter()
        .zip(b.chart())
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn su2_group_axioms(a in su2_strategy(), b in su2_strategy(), x in su2_strategy()) {
        let ab_x = group_mul(&group_mul(&a, &b).unwrap(), &x).unwrap();
        let a_bx = group_mul(&a, &group_mul(&b, &x).unwrap()).unwrap();
        prop_assert!(max_abs_diff(ab_x.matrix().unwrap(), a_bx.matrix().unwrap()) < 1e-12);
        let e = group_mul(&a, &group_inv(&a)).unwrap();
        prop_assert!(max_abs_diff(e.matrix().unwrap(), identity(GroupSpec::Su2).matrix().unwrap()) < 1e-12);
        prop_assert!(unitarity_defect(ab_x.matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn su2_chart_round_trip(x in su2_strategy()) {
        let back = GroupPoint::from_matrix(GroupSpec::Su2, x.matrix().unwrap().clone()).unwrap();
        for (p, q) in back.chart().iter().zip(x.chart()) {
            prop_assert!((p - q).abs() < 1e-7, "{:?} vs {:?}", back.chart(), x.chart());
        }
    }

    #[test]
    fn su3_points_are_special_unitary(x in su3_strategy(), y in su3_strategy()) {
        let xy = group_mul(&x, &y).unwrap();
        let m = xy.matrix().unwrap();
        prop_assert!(unitarity_defect(m) < 1e-12);
        prop_assert!((liegroup_index::linalg::det(m) - c(1.0, 0.0)).norm() < 1e-12);
        let reparsed = GroupPoint::from_matrix(GroupSpec::Su3, m.clone()).unwrap();
        prop_assert!(reparsed.chart().len() == 8);
    }

    #[test]
    fn torus_group_axioms(a in torus_strategy(3), b in torus_strategy(3), x in torus_strategy(3)) {
        let ab_x = group_mul(&group_mul(&a, &b).unwrap(), &x).unwrap();
        let a_bx = group_mul(&a, &group_mul(&b, &x).unwrap()).unwrap();
        prop_assert!(torus_dist(&ab_x, &a_bx) < 1e-12);
        prop_assert!(torus_dist(&group_mul(&a, &group_inv(&a)).unwrap(), &identity(GroupSpec::torus(3))) < 1e-12);
    }

    #[test]
    fn representations_are_homomorphisms(n in 0u32..6, x in su2_strategy(), y in su2_strategy()) {
        let xi = IrrepLabel::su2(n);
        let xy = group_mul(&x, &y).unwrap();
        let lhs = rep_matrix(&xi, &xy).unwrap();
        let rhs = rep_matrix(&xi, &x).unwrap() * rep_matrix(&xi, &y).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
        prop_assert!(unitarity_defect(&lhs) < 1e-10);
    }

    #[test]
    fn weight_invariant(l in prop::collection::vec(-20i64..20, 1..4), n in 0u32..30) {
        for xi in [IrrepLabel::torus(&l), IrrepLabel::su2(n)] {
            prop_assert!(xi.weight >= 1.0);
            prop_assert!((xi.weight * xi.weight - 1.0 - xi.casimir).abs() <= 1e-12 * xi.weight * xi.weight);
        }
    }

    #[test]
    fn mckean_singer_gamma_independence(m in cmat_strategy(12, 12), g1 in 0.05..5.0_f64, g2 in 0.05..5.0_f64) {
        let kc = kernel_count_index(&m, 1e-10).unwrap();
        let h1 = heat_trace_index(&m, g1).unwrap();
        let h2 = heat_trace_index(&m, g2).unwrap();
        let expected = m.ncols() as f64 - m.nrows() as f64;
        prop_assert_eq!(kc.index as f64, expected);
        prop_assert!((h1 - expected).abs() < 1e-8);
        prop_assert!((h2 - expected).abs() < 1e-8);
    }

    #[test]
    fn index_of_adjoint_is_negated(m in cmat_strategy(10, 10)) {
        let a = kernel_count_index(&m, 1e-10).unwrap();
        let b = kernel_count_index(&m.adjoint(), 1e-10).unwrap();
        prop_assert_eq!(a.index, -b.index);
        prop_assert!((heat_trace_index(&m, 1.0).unwrap() + heat_trace_index(&m.adjoint(), 1.0).unwrap()).abs() < 1e-8);
    }
}

fn random_coefficients(group: GroupSpec, band: u32, seed: &[f64]) -> FourierCoefficients {
    let dual = enumerate(group, Cutoff::band(band)).unwrap();
    let mut k = 0;
    let entries = dual
        .into_iter()
        .map(|xi| {
            let d = xi.dim;
            let m = CMat::from_fn(d, d, |_, _| {
                k += 2;
                c(seed[k % seed.len()], seed[(k + 1) % seed.len()])
            });
            (xi, m)
        })
        .collect();
    FourierCoefficients::new(group, entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plancherel_identity(seed in prop::collection::vec(-1.0..1.0_f64, 7..40), su2 in any::<bool>()) {
        let (g, band) = if su2 { (GroupSpec::Su2, 4) } else { (GroupSpec::torus(2), 3) };
        let fc = random_coefficients(g, band, &seed);
        let rule = Arc::new(haar_quadrature(g, resolving_level(g, 2 * band)).unwrap());
        let f = fourier_inverse_sampled(&fc, rule).unwrap();
        prop_assert!((plancherel_norm(&fc) - f.l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn assembly_is_linear(a in -2.0..2.0_f64, b in -2.0..2.0_f64, k in -2i64..=2) {
        let g = GroupSpec::torus(1);
        let basis = PeterWeylBasis::from_cutoff(g, Cutoff::band(6)).unwrap();
        let s1 = MatrixSymbol::lambda(g, 1.0);
        let s2 = MatrixSymbol::scalar_multiplier(g, 0.0, move |xi| c((k as f64) * xi.weight.recip(), 0.5));
        let combo = s1.linear_combination(c(a, 0.0), &s2, c(b, 0.0)).unwrap();
        let lhs = assemble(&combo, &basis, &basis).unwrap().matrix;
        let rhs = assemble(&s1, &basis, &basis).unwrap().matrix * c(a, 0.0) + assemble(&s2, &basis, &basis).unwrap().matrix * c(b, 0.0);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn adjoint_is_an_involution(k in -3i64..=3, band in 3u32..8) {
        let g = GroupSpec::torus(1);
        let dom = PeterWeylBasis::from_cutoff(g, Cutoff::band(band)).unwrap();
        let s = MatrixSymbol::winding(k);
        let cod = index_codomain(&s, &dom).unwrap();
        let op = assemble_truncated(&s, &dom, &cod, None).unwrap();
        let back = adjoint(&adjoint(&op));
        prop_assert_eq!(back.matrix, op.matrix.clone());
        prop_assert!(adjoint(&op).domain.same_labels(&op.codomain));
        let fwd = kernel_count_index(&op.matrix, 1e-10).unwrap().index;
        let rev = kernel_count_index(&adjoint(&op).matrix, 1e-10).unwrap().index;
        prop_assert_eq!(fwd, -rev);
    }

    #[test]
    fn winding_indices_add_under_composition(j in -2i64..=2, k in -2i64..=2) {
        let g = GroupSpec::torus(1);
        let composed = true_composition(&MatrixSymbol::winding(j), &MatrixSymbol::winding(k)).unwrap();
        let x = GroupPoint::torus(&[0.3]);
        let direct = MatrixSymbol::winding(j + k).eval(&x, &IrrepLabel::torus(&[2])).unwrap();
        prop_assert!(max_abs_diff(&composed.eval(&x, &IrrepLabel::torus(&[2])).unwrap(), &direct) < 1e-12);
        let op = OperatorSpec::Product { factors: vec![OperatorSpec::Winding { k: j }, OperatorSpec::Winding { k }] };
        let (rep, _) = stabilization_sweep(&op, g, &[Cutoff::band(8), Cutoff::band(12)], &[1.0], &SweepOptions { rel_tol: 1e-10, ..Default::default() }).unwrap();
        for row in &rep.rows {
            prop_assert_eq!(row.kernel_count, Some(-(j + k)));
        }
    }
}

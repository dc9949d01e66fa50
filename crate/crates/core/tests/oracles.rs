//! Checks against values computed by hand or by an independent route.

use std::f64::consts::PI;
use std::sync::Arc;

use liegroup_index::dual::{enumerate, Cutoff, IrrepLabel, Label};
use liegroup_index::fourier::{fourier_forward, fourier_inverse_sampled, FourierCoefficients, SampledFunction};
use liegroup_index::galerkin::{assemble, PeterWeylBasis};
use liegroup_index::group::{haar_quadrature, GroupPoint, GroupSpec};
use liegroup_index::index::{extract_adjoint_symbol, order_reduce, stabilization_sweep, trace_via_symbol, SweepOptions};
use liegroup_index::linalg::{c, hermitian_eigenvalues, max_abs, CMat, C64};
use liegroup_index::operator::{CoefficientTerm, Multiplier, OperatorSpec};
use liegroup_index::symbol::{frozen_symbol_product, kernel_from_symbol, quantize, symbol_of_operator, true_composition, MatrixSymbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expi(a: f64) -> C64 {
    c(a.cos(), a.sin())
}

fn t1() -> GroupSpec {
    GroupSpec::torus(1)
}

fn coeff(x: f64) -> f64 {
    2.0 + (2.0 * PI * x).cos()
}

fn scalar(sigma: &MatrixSymbol, x: f64, l: i64) -> C64 {
    sigma.eval(&GroupPoint::torus(&[x]), &IrrepLabel::torus(&[l])).unwrap()[(0, 0)]
}

#[test]
fn extracted_symbol_of_modulated_bessel_potential() {
    // A f = c(x) * (Lambda_1 f), applied by an explicit DFT on the grid.
    let dual = enumerate(t1(), Cutoff::band(5)).unwrap();
    let grid = Arc::new(haar_quadrature(t1(), 16).unwrap());
    let apply = |f: &SampledFunction| {
        let mut fc = fourier_forward(f, &dual)?;
        for (xi, m) in fc.iter_mut() {
            *m *= c(xi.weight, 0.0);
        }
        let g = fourier_inverse_sampled(&fc, f.rule.clone())?;
        let vals = f.rule.nodes().zip(&g.values).map(|(x, v)| v * coeff(x.chart()[0])).collect();
        SampledFunction::new(f.rule.clone(), vals)
    };
    let sigma = symbol_of_operator(apply, grid, &dual, 1).unwrap();
    assert!(!sigma.is_invariant());
    for x in [0.0, 0.17, 0.5, 0.83] {
        for l in -5..=5 {
            let expected = coeff(x) * (1.0 + 4.0 * PI * PI * (l * l) as f64).sqrt();
            assert!((scalar(&sigma, x, l) - c(expected, 0.0)).norm() < 1e-9, "x={x} l={l}");
        }
    }
}

#[test]
fn quantization_matches_direct_series() {
    let sigma = MatrixSymbol::variable(t1(), 1.0, 1, |x, xi| Ok(CMat::identity(1, 1) * c(coeff(x.chart()[0]) * xi.weight, 0.0)));
    let dual = enumerate(t1(), Cutoff::band(4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entries: Vec<(IrrepLabel, CMat)> = dual
        .iter()
        .map(|xi| (xi.clone(), CMat::from_element(1, 1, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))))
        .collect();
    let fc = FourierCoefficients::new(t1(), entries.clone()).unwrap();
    for x in [0.0, 0.3, 0.71] {
        let mut direct = c(0.0, 0.0);
        for (xi, m) in &entries {
            let Label::Torus(l) = &xi.label else { unreachable!() };
            direct += m[(0, 0)] * xi.weight * expi(2.0 * PI * l[0] as f64 * x);
        }
        direct *= coeff(x);
        let got = quantize(&sigma, &fc, &GroupPoint::torus(&[x])).unwrap();
        assert!((got - direct).norm() < 1e-12);
    }
}

#[test]
fn kernel_is_the_inverse_dft_of_the_symbol() {
    let sigma = MatrixSymbol::lambda(t1(), -2.0);
    let dual = enumerate(t1(), Cutoff::band(6)).unwrap();
    for (x, y) in [(0.0, 0.0), (0.2, 0.45), (0.9, 0.1)] {
        let direct: C64 = (-6..=6_i64).map(|l| expi(2.0 * PI * l as f64 * y) / (1.0 + 4.0 * PI * PI * (l * l) as f64)).sum();
        let got = kernel_from_symbol(&sigma, &GroupPoint::torus(&[x]), &GroupPoint::torus(&[y]), &dual).unwrap();
        assert!((got - direct).norm() < 1e-13);
    }
}

#[test]
fn invariant_su2_symbol_has_block_spectrum() {
    let g = GroupSpec::Su2;
    let basis = PeterWeylBasis::from_cutoff(g, Cutoff::band(4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut expected = Vec::new();
    let table: Vec<(IrrepLabel, CMat)> = basis
        .labels()
        .iter()
        .map(|xi| {
            let d = xi.dim;
            let a = CMat::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = &a + a.adjoint();
            for ev in hermitian_eigenvalues(&h) {
                expected.extend(std::iter::repeat_n(ev, d));
            }
            (xi.clone(), h)
        })
        .collect();
    let sigma = MatrixSymbol::invariant_table(g, 0.0, table).unwrap();
    let m = assemble(&sigma, &basis, &basis).unwrap().matrix;
    let mut got = hermitian_eigenvalues(&m);
    got.sort_by(f64::total_cmp);
    expected.sort_by(f64::total_cmp);
    assert_eq!(got.len(), expected.len());
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    // Blocks of different labels do not couple.
    for (i, (xi, _, _)) in basis.entries().enumerate() {
        for (j, (eta, _, _)) in basis.entries().enumerate() {
            if xi != eta {
                assert!(m[(i, j)].norm() < 1e-10);
            }
        }
    }
}

#[test]
fn frozen_and_true_composition_differ_only_at_the_seam() {
    let a = MatrixSymbol::winding(1);
    let b = MatrixSymbol::winding(-1);
    let frozen = frozen_symbol_product(&a, &b).unwrap();
    let truth = true_composition(&a, &b).unwrap();
    for x in [0.0, 0.25, 0.6] {
        // W_1 W_{-1} sends e_0 to e_{-1} and fixes every other mode.
        assert!((scalar(&truth, x, 0) - expi(-2.0 * PI * x)).norm() < 1e-12);
        assert!((scalar(&frozen, x, 0) - c(1.0, 0.0)).norm() < 1e-12);
        for l in [-3, -1, 1, 4] {
            assert!((scalar(&truth, x, l) - c(1.0, 0.0)).norm() < 1e-12, "l={l}");
            assert!((scalar(&frozen, x, l) - c(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn adjoint_symbol_of_winding() {
    let labels = enumerate(t1(), Cutoff::band(4)).unwrap();
    let op = OperatorSpec::Winding { k: 1 };
    let star = extract_adjoint_symbol(t1(), 1, &labels, |dom| op.galerkin(t1(), dom, None)).unwrap();
    for x in [0.0, 0.4] {
        assert!(scalar(&star, x, 0).norm() < 1e-12);
        for l in 1..=4 {
            assert!((scalar(&star, x, l) - expi(-2.0 * PI * x)).norm() < 1e-10);
        }
        for l in -4..=-1 {
            assert!((scalar(&star, x, l) - c(1.0, 0.0)).norm() < 1e-10);
        }
    }
}

#[test]
fn order_reduction_of_bessel_potential_is_identity() {
    for (g, band) in [(t1(), 8), (GroupSpec::torus(2), 3), (GroupSpec::Su2, 4)] {
        let dom = PeterWeylBasis::from_cutoff(g, Cutoff::band(band)).unwrap();
        let r = order_reduce(&MatrixSymbol::lambda(g, 2.0), &dom, None).unwrap();
        let err = max_abs(&(r.matrix - CMat::identity(dom.len(), dom.len())));
        assert!(err < 1e-10, "{g}: {err}");
    }
}

#[test]
fn trace_of_modulated_smoothing_symbol() {
    let sigma = MatrixSymbol::variable(t1(), -3.0, 1, |x, xi| Ok(CMat::identity(1, 1) * c(coeff(x.chart()[0]) * xi.weight.powi(-3), 0.0)));
    let labels = enumerate(t1(), Cutoff::band(12)).unwrap();
    let grid = haar_quadrature(t1(), 8).unwrap();
    let expected: f64 = 2.0 * (-12..=12_i64).map(|l| (1.0 + 4.0 * PI * PI * (l * l) as f64).powf(-1.5)).sum::<f64>();
    let got = trace_via_symbol(&sigma, &labels, &grid).unwrap();
    assert!((got - c(expected, 0.0)).norm() < 1e-12);
}

#[test]
fn su3_dimensions_and_trivial_quadrature() {
    let dims: Vec<usize> = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1), (3, 0)]
        .iter()
        .map(|&(a, b)| IrrepLabel::su3(a, b).dim)
        .collect();
    assert_eq!(dims, vec![1, 3, 3, 8, 6, 15, 10]);
    let rule = haar_quadrature(GroupSpec::Su3, 4).unwrap();
    assert!((rule.total_weight() - 1.0).abs() < 1e-12);
}

#[test]
fn order_reduction_preserves_the_index_of_modulated_laplacian() {
    let c_of_x = OperatorSpec::Multiply {
        coefficients: vec![
            CoefficientTerm { label: Label::Torus(vec![0]), row: 0, col: 0, re: 2.0, im: 0.0 },
            CoefficientTerm { label: Label::Torus(vec![1]), row: 0, col: 0, re: 0.5, im: 0.0 },
            CoefficientTerm { label: Label::Torus(vec![-1]), row: 0, col: 0, re: 0.5, im: 0.0 },
        ],
    };
    let op = OperatorSpec::Product {
        factors: vec![c_of_x, OperatorSpec::Multiplier { multiplier: Multiplier::WeightPower { s: 2.0 } }],
    };
    let cut = [Cutoff::band(6), Cutoff::band(10)];
    let plain = SweepOptions { rel_tol: 1e-10, ..Default::default() };
    let reduced = SweepOptions { order_reduce: true, ..plain.clone() };
    let (a, _) = stabilization_sweep(&op, t1(), &cut, &[1.0], &plain).unwrap();
    let (b, _) = stabilization_sweep(&op, t1(), &cut, &[1.0], &reduced).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.kernel_count, Some(0));
        assert_eq!(rb.kernel_count, Some(0));
    }
}

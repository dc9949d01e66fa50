//! Peter-Weyl bases and rectangular Galerkin matrices of quantized symbols.
//!
//! Basis functions are `b = sqrt(d_xi) xi_ij`, ordered by label (Casimir,
//! then canonical order) and row-major within a label block.

pub mod cache;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dual::{enumerate, rep_matrix, within_distance, Cutoff, IrrepLabel, Label};
use crate::error::{check_group, Error, Result};
use crate::fourier::SampledFunction;
use crate::group::{haar_quadrature, resolving_level, GroupPoint, GroupSpec, QuadratureRule};
use crate::linalg::{c, det, matmul, CMat, C64};
use crate::symbol::MatrixSymbol;

pub use crate::symbol::frozen_symbol_product;

/// Nodes per block of the assembly quadrature loop.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeterWeylBasis {
    pub group: GroupSpec,
    pub cutoff: Option<Cutoff>,
    labels: Vec<IrrepLabel>,
    offsets: Vec<usize>,
    size: usize,
}

impl PeterWeylBasis {
    pub fn from_cutoff(group: GroupSpec, cutoff: Cutoff) -> Result<Self> {
        let mut b = PeterWeylBasis::from_labels(group, enumerate(group, cutoff)?)?;
        b.cutoff = Some(cutoff);
        Ok(b)
    }

    pub fn from_labels(group: GroupSpec, mut labels: Vec<IrrepLabel>) -> Result<Self> {
        for xi in &labels {
            check_group(group, xi.group)?;
        }
        labels.sort();
        labels.dedup();
        let mut offsets = Vec::with_capacity(labels.len());
        let mut size = 0;
        for xi in &labels {
            offsets.push(size);
            size += xi.dim * xi.dim;
        }
        Ok(PeterWeylBasis { group, cutoff: None, labels, offsets, size })
    }

    pub fn labels(&self) -> &[IrrepLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn offset(&self, label_index: usize) -> usize {
        self.offsets[label_index]
    }

    pub fn position(&self, xi: &IrrepLabel) -> Option<usize> {
        self.labels.binary_search(xi).ok()
    }

    /// Index of `sqrt(d) xi_ij`.
    pub fn index_of(&self, xi: &IrrepLabel, i: usize, j: usize) -> Option<usize> {
        let p = self.position(xi)?;
        (i < xi.dim && j < xi.dim).then(|| self.offsets[p] + i * xi.dim + j)
    }

    /// `(label, i, j)` for every basis index, in order.
    pub fn entries(&self) -> impl Iterator<Item = (&IrrepLabel, usize, usize)> + '_ {
        self.labels
            .iter()
            .flat_map(|xi| (0..xi.dim).flat_map(move |i| (0..xi.dim).map(move |j| (xi, i, j))))
    }

    pub fn max_degree(&self) -> u32 {
        self.labels.iter().map(|x| x.degree()).max().unwrap_or(0)
    }

    pub fn same_labels(&self, other: &PeterWeylBasis) -> bool {
        self.group == other.group && self.labels == other.labels
    }

    /// `<b_a, b_b>` under `rule`.
    pub fn gram(&self, rule: &QuadratureRule) -> Result<CMat> {
        check_group(self.group, rule.group())?;
        let table = self.sample(rule)?;
        let mut weighted = table.clone();
        for k in 0..rule.len() {
            let w = rule.weight(k);
            for v in weighted.row_mut(k).iter_mut() {
                *v *= w;
            }
        }
        Ok(matmul(&table.adjoint(), &weighted))
    }

    /// Basis functions at the nodes: a `nodes x N` matrix.
    pub fn sample(&self, rule: &QuadratureRule) -> Result<CMat> {
        let mut out = CMat::zeros(rule.len(), self.size);
        for (k, x) in rule.nodes().enumerate() {
            for (p, xi) in self.labels.iter().enumerate() {
                let r = rep_matrix(xi, &x)?;
                let s = (xi.dim as f64).sqrt();
                for i in 0..xi.dim {
                    for j in 0..xi.dim {
                        out[(k, self.offsets[p] + i * xi.dim + j)] = r[(i, j)] * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `<f, b>` for every basis function, by quadrature on `f`'s rule.
    pub fn coefficients_of(&self, f: &SampledFunction) -> Result<DVector<C64>> {
        check_group(self.group, f.rule.group())?;
        let table = self.sample(&f.rule)?;
        let wf = DVector::from_iterator(f.values.len(), (0..f.values.len()).map(|k| f.values[k] * f.rule.weight(k)));
        Ok(table.adjoint() * wf)
    }

    /// `sum_a v_a b_a(x)`.
    pub fn evaluate(&self, v: &DVector<C64>, x: &GroupPoint) -> Result<C64> {
        if v.len() != self.size {
            return Err(Error::ShapeMismatch(format!("{} coefficients for a basis of size {}", v.len(), self.size)));
        }
        let mut acc = c(0.0, 0.0);
        for (p, xi) in self.labels.iter().enumerate() {
            let r = rep_matrix(xi, x)?;
            let s = (xi.dim as f64).sqrt();
            for i in 0..xi.dim {
                for j in 0..xi.dim {
                    acc += v[self.offsets[p] + i * xi.dim + j] * r[(i, j)] * s;
                }
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinOperator {
    pub domain: PeterWeylBasis,
    pub codomain: PeterWeylBasis,
    /// `codomain.len() x domain.len()`.
    pub matrix: CMat,
    /// Largest quadrature level used during assembly (0 when none was needed).
    pub quadrature_level: usize,
    pub description: String,
}

impl GalerkinOperator {
    pub fn new(domain: PeterWeylBasis, codomain: PeterWeylBasis, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (codomain.len(), domain.len()) {
            return Err(Error::ShapeMismatch(format!(
                "matrix {:?} does not match bases {}x{}",
                matrix.shape(),
                codomain.len(),
                domain.len()
            )));
        }
        Ok(GalerkinOperator { domain, codomain, matrix, quadrature_level: 0, description: String::new() })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    /// Apply to a sampled function, returning samples on the same rule.
    /// Exact when the rule resolves products of domain and codomain entries.
    pub fn apply_sampled(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let v = self.domain.coefficients_of(f)?;
        let w = &self.matrix * v;
        let table = self.codomain.sample(&f.rule)?;
        let out = table * w;
        SampledFunction::new(f.rule.clone(), out.iter().copied().collect())
    }
}

/// Conjugate transpose with the bases swapped.
pub fn adjoint(g: &GalerkinOperator) -> GalerkinOperator {
    GalerkinOperator {
        domain: g.codomain.clone(),
        codomain: g.domain.clone(),
        matrix: g.matrix.adjoint(),
        quadrature_level: g.quadrature_level,
        description: format!("({})^*", g.description),
    }
}

/// `g1 g2`; `g2.codomain` must equal `g1.domain`.
pub fn compose(g1: &GalerkinOperator, g2: &GalerkinOperator) -> Result<GalerkinOperator> {
    if !g2.codomain.same_labels(&g1.domain) {
        return Err(Error::BasisMismatch(format!(
            "codomain of the right factor ({} functions) differs from the domain of the left ({} functions)",
            g2.codomain.len(),
            g1.domain.len()
        )));
    }
    Ok(GalerkinOperator {
        domain: g2.domain.clone(),
        codomain: g1.codomain.clone(),
        matrix: matmul(&g1.matrix, &g2.matrix),
        quadrature_level: g1.quadrature_level.max(g2.quadrature_level),
        description: format!("{} . {}", g1.description, g2.description),
    })
}

/// Labels within `x_bandwidth` of a domain label that `codomain` lacks.
fn missing_image_labels(sigma: &MatrixSymbol, domain: &PeterWeylBasis, codomain: &PeterWeylBasis) -> Vec<IrrepLabel> {
    crate::dual::expand_labels(domain.group, domain.labels(), sigma.x_bandwidth)
        .into_iter()
        .filter(|eta| codomain.position(eta).is_none())
        .collect()
}

/// Galerkin matrix `<A b_dom, b_cod>`, rejecting codomains that miss part of
/// the image band `domain + x_bandwidth`.
pub fn assemble(sigma: &MatrixSymbol, domain: &PeterWeylBasis, codomain: &PeterWeylBasis) -> Result<GalerkinOperator> {
    let missing = missing_image_labels(sigma, domain, codomain);
    if !missing.is_empty() {
        let need = domain.max_degree() + sigma.x_bandwidth;
        return Err(Error::InsufficientCodomain {
            required: format!("band {need} ({} labels missing, first {})", missing.len(), missing[0]),
        });
    }
    assemble_truncated(sigma, domain, codomain, None)
}

/// `P_cod A` on the domain basis, with the quadrature level chosen per
/// domain label to resolve `deg xi + x_bandwidth + deg eta`, or at least
/// `min_level` when given.
pub fn assemble_truncated(
    sigma: &MatrixSymbol,
    domain: &PeterWeylBasis,
    codomain: &PeterWeylBasis,
    min_level: Option<usize>,
) -> Result<GalerkinOperator> {
    check_group(sigma.group, domain.group)?;
    check_group(sigma.group, codomain.group)?;
    let group = sigma.group;
    let w = sigma.x_bandwidth;
    let mut matrix = CMat::zeros(codomain.len(), domain.len());
    let mut rules: HashMap<usize, Arc<QuadratureRule>> = HashMap::new();
    let mut max_level = 0;

    for (p, xi) in domain.labels().iter().enumerate() {
        let targets: Vec<usize> = codomain
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, eta)| within_distance(xi, eta, w))
            .map(|(q, _)| q)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let top = targets.iter().map(|&q| codomain.labels()[q].degree()).max().unwrap_or(0);
        let level = resolving_level(group, xi.degree() + w + top).max(min_level.unwrap_or(0));
        max_level = max_level.max(level);
        let rule = match rules.get(&level) {
            Some(r) => r.clone(),
            None => {
                let r = Arc::new(haar_quadrature(group, level)?);
                rules.insert(level, r.clone());
                r
            }
        };
        let blocks = assemble_column_block(sigma, xi, &targets, codomain, &rule)?;
        let col = domain.offset(p);
        for (q, block) in targets.iter().zip(blocks) {
            let row = codomain.offset(*q);
            matrix.view_mut((row, col), block.shape()).copy_from(&block);
        }
    }
    Ok(GalerkinOperator {
        domain: domain.clone(),
        codomain: codomain.clone(),
        matrix,
        quadrature_level: max_level,
        description: sigma.description().to_string(),
    })
}

/// Blocks `<A sqrt(d) xi_ij, sqrt(d') eta_ab>` for every target `eta`.
fn assemble_column_block(
    sigma: &MatrixSymbol,
    xi: &IrrepLabel,
    targets: &[usize],
    codomain: &PeterWeylBasis,
    rule: &QuadratureRule,
) -> Result<Vec<CMat>> {
    let d = xi.dim;
    let sd = (d as f64).sqrt();
    let frozen = if sigma.is_invariant() { Some(sigma.eval_invariant(xi)?) } else { None };
    let mut blocks: Vec<CMat> = targets
        .iter()
        .map(|&q| {
            let de = codomain.labels()[q].dim;
            CMat::zeros(de * de, d * d)
        })
        .collect();

    let mut start = 0;
    while start < rule.len() {
        let end = (start + CHUNK).min(rule.len());
        let nodes: Vec<GroupPoint> = (start..end).map(|k| rule.node(k)).collect();
        let n = nodes.len();
        let xi_reps: Vec<CMat> = nodes.iter().map(|x| rep_matrix(xi, x)).collect::<Result<_>>()?;

        let mut p = CMat::zeros(n, d * d);
        for (r, (x, rep)) in nodes.iter().zip(&xi_reps).enumerate() {
            let s = match &frozen {
                Some(m) => rep * m,
                None => rep * sigma.eval(x, xi)?,
            };
            let wk = rule.weight(start + r) * sd;
            for i in 0..d {
                for j in 0..d {
                    p[(r, i * d + j)] = s[(i, j)] * wk;
                }
            }
        }

        for (block, &q) in blocks.iter_mut().zip(targets) {
            let eta = &codomain.labels()[q];
            let de = eta.dim;
            let se = (de as f64).sqrt();
            // rows of the adjoint: conj(sqrt(d') eta_ab(x_k))
            let mut qh = CMat::zeros(de * de, n);
            for (r, x) in nodes.iter().enumerate() {
                let rep = if eta == xi { xi_reps[r].clone() } else { rep_matrix(eta, x)? };
                for a in 0..de {
                    for b in 0..de {
                        qh[(a * de + b, r)] = rep[(a, b)].conj() * se;
                    }
                }
            }
            *block += matmul(&qh, &p);
        }
        start = end;
    }
    Ok(blocks)
}

/// Winding number of `x -> det sigma(x, xi)` on the circle.
fn det_winding(sigma: &MatrixSymbol, xi: &IrrepLabel) -> Result<i64> {
    let n = (16 * (sigma.x_bandwidth as usize + 1)).max(256);
    let values: Vec<C64> = (0..n)
        .map(|k| sigma.eval(&GroupPoint::torus(&[k as f64 / n as f64]), xi).map(|m| det(&m)))
        .collect::<Result<_>>()?;
    let scale = values.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if values.iter().any(|z| z.norm() <= 1e-10 * scale) || scale == 0.0 {
        return Err(Error::NotElliptic(format!("det sigma(., {xi}) vanishes on the circle")));
    }
    let mut turns = 0.0;
    for k in 0..n {
        turns += (values[(k + 1) % n] / values[k]).arg();
    }
    Ok((turns / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// The codomain used for index computations.
///
/// On the circle with an x-dependent symbol, the band `[a, b]` maps to
/// `[a + w(a), b + w(b)]`, where `w(l)` is the winding number of
/// `det sigma(., l)`; this keeps the finite-rank index equal to the Toeplitz
/// index. Everywhere else the codomain equals the domain.
pub fn index_codomain(sigma: &MatrixSymbol, domain: &PeterWeylBasis) -> Result<PeterWeylBasis> {
    check_group(sigma.group, domain.group)?;
    if sigma.is_invariant() || domain.group != GroupSpec::torus(1) || domain.labels().is_empty() {
        return Ok(domain.clone());
    }
    let freq = |xi: &IrrepLabel| match &xi.label {
        Label::Torus(l) => l[0],
        _ => unreachable!(),
    };
    let mut ls: Vec<i64> = domain.labels().iter().map(freq).collect();
    ls.sort();
    let (a, b) = (ls[0], ls[ls.len() - 1]);
    if (b - a + 1) as usize != ls.len() {
        return Err(Error::InvalidArgument("circle domain band must be a contiguous interval".into()));
    }
    let lo = a + det_winding(sigma, &IrrepLabel::torus(&[a]))?;
    let hi = b + det_winding(sigma, &IrrepLabel::torus(&[b]))?;
    if hi < lo {
        return Err(Error::BandExhausted(format!("domain [{a}, {b}] is too small for the symbol's winding")));
    }
    PeterWeylBasis::from_labels(domain.group, (lo..=hi).map(|l| IrrepLabel::torus(&[l])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity_defect, max_abs_diff};

    #[test]
    fn basis_ordering_and_size() {
        let b = PeterWeylBasis::from_cutoff(GroupSpec::Su2, Cutoff::band(2)).unwrap();
        assert_eq!(b.len(), 1 + 4 + 9);
        let e: Vec<(Label, usize, usize)> = b.entries().map(|(x, i, j)| (x.label.clone(), i, j)).take(3).collect();
        assert_eq!(e, vec![(Label::Su2(0), 0, 0), (Label::Su2(1), 0, 0), (Label::Su2(1), 0, 1)]);
        assert_eq!(b.index_of(&IrrepLabel::su2(2), 1, 2), Some(5 + 3 + 2));
    }

    #[test]
    fn gram_is_identity() {
        for (g, cut) in [(GroupSpec::torus(2), Cutoff::band(3)), (GroupSpec::Su2, Cutoff::band(4))] {
            let b = PeterWeylBasis::from_cutoff(g, cut).unwrap();
            let rule = haar_quadrature(g, resolving_level(g, 2 * b.max_degree())).unwrap();
            assert!(identity_defect(&b.gram(&rule).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn identity_symbol_gives_identity_matrix() {
        let g = GroupSpec::Su2;
        let b = PeterWeylBasis::from_cutoff(g, Cutoff::band(3)).unwrap();
        let m = assemble(&MatrixSymbol::identity(g), &b, &b).unwrap();
        assert!(identity_defect(&m.matrix) < 1e-10);
    }

    #[test]
    fn winding_one_is_the_shift() {
        let g = GroupSpec::torus(1);
        let dom = PeterWeylBasis::from_cutoff(g, Cutoff::band(4)).unwrap();
        let sigma = MatrixSymbol::winding(1);
        let cod = index_codomain(&sigma, &dom).unwrap();
        assert_eq!(cod.len(), dom.len() + 1);
        let m = assemble_truncated(&sigma, &dom, &cod, None).unwrap();
        for (col, (xi, _, _)) in dom.entries().enumerate() {
            let Label::Torus(l) = &xi.label else { unreachable!() };
            let target = if l[0] >= 0 { l[0] + 1 } else { l[0] };
            for (row, (eta, _, _)) in cod.entries().enumerate() {
                let Label::Torus(e) = &eta.label else { unreachable!() };
                let expected = if e[0] == target { 1.0 } else { 0.0 };
                assert!((m.matrix[(row, col)] - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn insufficient_codomain_is_rejected() {
        let g = GroupSpec::torus(1);
        let dom = PeterWeylBasis::from_cutoff(g, Cutoff::band(4)).unwrap();
        let r = assemble(&MatrixSymbol::winding(2), &dom, &dom);
        match r {
            Err(Error::InsufficientCodomain { required }) => assert!(required.starts_with("band 6")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compose_checks_bases() {
        let g = GroupSpec::torus(1);
        let a = PeterWeylBasis::from_cutoff(g, Cutoff::band(2)).unwrap();
        let b = PeterWeylBasis::from_cutoff(g, Cutoff::band(3)).unwrap();
        let ga = assemble(&MatrixSymbol::identity(g), &a, &a).unwrap();
        let gb = assemble(&MatrixSymbol::identity(g), &b, &b).unwrap();
        assert!(matches!(compose(&ga, &gb), Err(Error::BasisMismatch(_))));
        let gg = compose(&ga, &ga).unwrap();
        assert!(max_abs_diff(&gg.matrix, &ga.matrix) < 1e-12);
    }

    #[test]
    fn apply_sampled_matches_matrix() {
        let g = GroupSpec::torus(1);
        let b = PeterWeylBasis::from_cutoff(g, Cutoff::band(3)).unwrap();
        let op = assemble(&MatrixSymbol::lambda(g, 2.0), &b, &b).unwrap();
        let rule = Arc::new(haar_quadrature(g, 8).unwrap());
        let f = SampledFunction::from_fn(rule, |x| {
            let a = 2.0 * std::f64::consts::PI * x.chart()[0];
            c(a.cos(), a.sin())
        });
        let af = op.apply_sampled(&f).unwrap();
        let k = 1.0 + 4.0 * std::f64::consts::PI.powi(2);
        for (u, v) in f.values.iter().zip(&af.values) {
            assert!((u * k - v).norm() < 1e-10);
        }
    }
}

//! Group Fourier transform, inversion, Plancherel and Sobolev norms.
//!
//! Resolvability: a function whose representation entries have degree
//! `<= B` (torus `|l|_inf <= B`, SU(2) twice-spin `<= B`) is transformed
//! exactly by `haar_quadrature(group, resolving_level(group, 2 B))`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dual::{rep_matrix, IrrepLabel, Label};
use crate::error::{check_group, Error, Result};
use crate::group::{GroupPoint, GroupSpec, QuadratureRule};
use crate::linalg::{c, frobenius_sq, CMat, C64};

/// Values of a function at the nodes of a quadrature rule.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    pub rule: Arc<QuadratureRule>,
    pub values: Vec<C64>,
}

impl SampledFunction {
    pub fn new(rule: Arc<QuadratureRule>, values: Vec<C64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a rule with {} nodes",
                values.len(),
                rule.len()
            )));
        }
        Ok(SampledFunction { rule, values })
    }

    pub fn from_fn<F: Fn(&GroupPoint) -> C64>(rule: Arc<QuadratureRule>, f: F) -> Self {
        let values = rule.nodes().map(|x| f(&x)).collect();
        SampledFunction { rule, values }
    }

    /// `sum_k w_k |f(x_k)|^2`, square-rooted.
    pub fn l2_norm(&self) -> f64 {
        (0..self.values.len())
            .map(|k| self.rule.weight(k) * self.values[k].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_k w_k f(x_k) conj(g(x_k))`.
    pub fn inner(&self, other: &SampledFunction) -> Result<C64> {
        if self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch("sampled on different rules".into()));
        }
        Ok((0..self.values.len())
            .map(|k| self.values[k] * other.values[k].conj() * self.rule.weight(k))
            .sum())
    }
}

/// `f^(xi)` for a finite set of labels, in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub group: GroupSpec,
    /// Largest weight among the stored labels.
    pub cutoff: f64,
    entries: Vec<(IrrepLabel, CMat)>,
}

impl FourierCoefficients {
    pub fn new(group: GroupSpec, mut entries: Vec<(IrrepLabel, CMat)>) -> Result<Self> {
        for (xi, m) in &entries {
            check_group(group, xi.group)?;
            if m.shape() != (xi.dim, xi.dim) {
                return Err(Error::ShapeMismatch(format!("coefficient for {xi} must be {0}x{0}", xi.dim)));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        let cutoff = entries.iter().map(|(xi, _)| xi.weight).fold(1.0, f64::max);
        Ok(FourierCoefficients { group, cutoff, entries })
    }

    /// Coefficients that vanish on every label of `dual`.
    pub fn zeros(group: GroupSpec, dual: &[IrrepLabel]) -> Result<Self> {
        FourierCoefficients::new(group, dual.iter().map(|xi| (xi.clone(), CMat::zeros(xi.dim, xi.dim))).collect())
    }

    pub fn entries(&self) -> &[(IrrepLabel, CMat)] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<IrrepLabel> {
        self.entries.iter().map(|(xi, _)| xi.clone()).collect()
    }

    pub fn get(&self, xi: &IrrepLabel) -> Option<&CMat> {
        self.entries
            .binary_search_by(|(l, _)| l.cmp(xi))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, xi: &IrrepLabel) -> Option<&mut CMat> {
        self.entries
            .binary_search_by(|(l, _)| l.cmp(xi))
            .ok()
            .map(move |i| &mut self.entries[i].1)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&IrrepLabel, &mut CMat)> {
        self.entries.iter_mut().map(|(l, m)| (&*l, m))
    }

    /// Largest entry modulus difference over the union of labels.
    pub fn max_abs_diff(&self, other: &FourierCoefficients) -> f64 {
        let mut worst = 0.0_f64;
        for (xi, m) in &self.entries {
            let d = match other.get(xi) {
                Some(o) => crate::linalg::max_abs_diff(m, o),
                None => crate::linalg::max_abs(m),
            };
            worst = worst.max(d);
        }
        for (xi, m) in &other.entries {
            if self.get(xi).is_none() {
                worst = worst.max(crate::linalg::max_abs(m));
            }
        }
        worst
    }

    /// `sum d_xi Tr(f^(xi) g^(xi)^*)`.
    pub fn inner(&self, other: &FourierCoefficients) -> C64 {
        self.entries
            .iter()
            .filter_map(|(xi, m)| other.get(xi).map(|o| (m * o.adjoint()).trace() * xi.dim as f64))
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CoefficientsDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CoefficientsDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    label: Label,
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientsDoc {
    group: GroupSpec,
    cutoff: f64,
    entries: Vec<EntryDoc>,
}

impl From<&FourierCoefficients> for CoefficientsDoc {
    fn from(fc: &FourierCoefficients) -> Self {
        let entries = fc
            .entries
            .iter()
            .map(|(xi, m)| EntryDoc {
                label: xi.label.clone(),
                dim: xi.dim,
                re: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect(),
                im: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect(),
            })
            .collect();
        CoefficientsDoc { group: fc.group, cutoff: fc.cutoff, entries }
    }
}

impl TryFrom<CoefficientsDoc> for FourierCoefficients {
    type Error = Error;

    fn try_from(doc: CoefficientsDoc) -> Result<Self> {
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in doc.entries {
            let xi = IrrepLabel::new(doc.group, e.label)?;
            if xi.dim != e.dim || e.re.len() != e.dim || e.im.len() != e.dim {
                return Err(Error::ShapeMismatch(format!("entry {xi} has inconsistent dimensions")));
            }
            let mut m = CMat::zeros(e.dim, e.dim);
            for i in 0..e.dim {
                if e.re[i].len() != e.dim || e.im[i].len() != e.dim {
                    return Err(Error::ShapeMismatch(format!("entry {xi} row {i} has the wrong length")));
                }
                for j in 0..e.dim {
                    m[(i, j)] = c(e.re[i][j], e.im[i][j]);
                }
            }
            entries.push((xi, m));
        }
        FourierCoefficients::new(doc.group, entries)
    }
}

/// `f^(xi) = sum_k w_k f(x_k) xi(x_k)^*` for each label of `dual`.
pub fn fourier_forward(f: &SampledFunction, dual: &[IrrepLabel]) -> Result<FourierCoefficients> {
    let group = f.rule.group();
    let mut entries = Vec::with_capacity(dual.len());
    for xi in dual {
        check_group(group, xi.group)?;
        let mut acc = CMat::zeros(xi.dim, xi.dim);
        for k in 0..f.rule.len() {
            let v = f.values[k] * f.rule.weight(k);
            if v == c(0.0, 0.0) {
                continue;
            }
            let r = rep_matrix(xi, &f.rule.node(k))?;
            acc += r.adjoint() * v;
        }
        entries.push((xi.clone(), acc));
    }
    FourierCoefficients::new(group, entries)
}

/// Forward transform of several functions sampled on one rule, sharing the
/// representation evaluations.
pub fn fourier_forward_many(rule: &QuadratureRule, values: &[Vec<C64>], dual: &[IrrepLabel]) -> Result<Vec<FourierCoefficients>> {
    let group = rule.group();
    let mut per_fn: Vec<Vec<(IrrepLabel, CMat)>> = vec![Vec::with_capacity(dual.len()); values.len()];
    for xi in dual {
        check_group(group, xi.group)?;
        let mut accs = vec![CMat::zeros(xi.dim, xi.dim); values.len()];
        for k in 0..rule.len() {
            let w = rule.weight(k);
            let r_star = rep_matrix(xi, &rule.node(k))?.adjoint();
            for (acc, vals) in accs.iter_mut().zip(values) {
                let v = vals[k] * w;
                if v != c(0.0, 0.0) {
                    *acc += &r_star * v;
                }
            }
        }
        for (slot, acc) in per_fn.iter_mut().zip(accs) {
            slot.push((xi.clone(), acc));
        }
    }
    per_fn.into_iter().map(|e| FourierCoefficients::new(group, e)).collect()
}

/// `f(x) = sum d_xi Tr(xi(x) f^(xi))` over the stored labels.
pub fn fourier_inverse(coeffs: &FourierCoefficients, x: &GroupPoint) -> Result<C64> {
    check_group(coeffs.group, x.group())?;
    let mut acc = c(0.0, 0.0);
    for (xi, m) in &coeffs.entries {
        let r = rep_matrix(xi, x)?;
        acc += (r * m).trace() * xi.dim as f64;
    }
    Ok(acc)
}

/// Evaluate the inverse transform at every node of `rule`.
pub fn fourier_inverse_sampled(coeffs: &FourierCoefficients, rule: Arc<QuadratureRule>) -> Result<SampledFunction> {
    let values = rule
        .nodes()
        .map(|x| fourier_inverse(coeffs, &x))
        .collect::<Result<Vec<_>>>()?;
    SampledFunction::new(rule, values)
}

/// `(sum d_xi ||f^(xi)||_HS^2)^{1/2}`.
pub fn plancherel_norm(coeffs: &FourierCoefficients) -> f64 {
    coeffs
        .entries
        .iter()
        .map(|(xi, m)| xi.dim as f64 * frobenius_sq(m))
        .sum::<f64>()
        .sqrt()
}

/// Plancherel norm of `<xi>^s f^(xi)`.
pub fn sobolev_norm(coeffs: &FourierCoefficients, s: f64) -> f64 {
    if s == 0.0 {
        return plancherel_norm(coeffs);
    }
    coeffs
        .entries
        .iter()
        .map(|(xi, m)| xi.dim as f64 * xi.weight.powf(2.0 * s) * frobenius_sq(m))
        .sum::<f64>()
        .sqrt()
}

/// The x-independent symbol `<xi>^s I`.
pub fn lambda_multiplier(group: GroupSpec, s: f64) -> crate::symbol::MatrixSymbol {
    crate::symbol::MatrixSymbol::lambda(group, s)
}

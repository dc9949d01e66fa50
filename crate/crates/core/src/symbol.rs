//! Matrix-valued symbols `sigma(x, xi)`, their extraction from operator
//! actions, quantization, kernels, difference operators, and the
//! ellipticity and symbol-class diagnostics.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::dual::{enumerate, expand_labels, rep_matrix, within_distance, Cutoff, IrrepLabel, Label, LieBasis};
use crate::error::{check_group, Error, Result};
use crate::fourier::{fourier_forward_many, FourierCoefficients, SampledFunction};
use crate::group::{haar_quadrature, identity, resolving_level, GroupPoint, GroupSpec, QuadratureRule};
use crate::linalg::{c, max_abs, op_norm, singular_values, CMat, C64};

type InvariantEval = dyn Fn(&IrrepLabel) -> Result<CMat> + Send + Sync;
type VariableEval = dyn Fn(&GroupPoint, &IrrepLabel) -> Result<CMat> + Send + Sync;

#[derive(Clone)]
enum Eval {
    Invariant(Arc<InvariantEval>),
    Variable(Arc<VariableEval>),
}

/// A symbol on `G x G^`, evaluated lazily.
///
/// `x_bandwidth` is the degree of the x-dependence: torus frequency
/// `|k|_inf`, SU(2) twice-spin. Invariant symbols have bandwidth 0.
#[derive(Clone)]
pub struct MatrixSymbol {
    pub group: GroupSpec,
    pub order: f64,
    pub x_bandwidth: u32,
    support: Option<Arc<Vec<IrrepLabel>>>,
    eval: Eval,
    description: String,
}

impl fmt::Debug for MatrixSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixSymbol")
            .field("group", &self.group)
            .field("order", &self.order)
            .field("x_bandwidth", &self.x_bandwidth)
            .field("invariant", &self.is_invariant())
            .field("description", &self.description)
            .finish()
    }
}

impl MatrixSymbol {
    pub fn invariant<F>(group: GroupSpec, order: f64, f: F) -> Self
    where
        F: Fn(&IrrepLabel) -> Result<CMat> + Send + Sync + 'static,
    {
        MatrixSymbol {
            group,
            order,
            x_bandwidth: 0,
            support: None,
            eval: Eval::Invariant(Arc::new(f)),
            description: "invariant".into(),
        }
    }

    pub fn variable<F>(group: GroupSpec, order: f64, x_bandwidth: u32, f: F) -> Self
    where
        F: Fn(&GroupPoint, &IrrepLabel) -> Result<CMat> + Send + Sync + 'static,
    {
        MatrixSymbol {
            group,
            order,
            x_bandwidth,
            support: None,
            eval: Eval::Variable(Arc::new(f)),
            description: "variable".into(),
        }
    }

    /// `g(xi) I`.
    pub fn scalar_multiplier<F>(group: GroupSpec, order: f64, g: F) -> Self
    where
        F: Fn(&IrrepLabel) -> C64 + Send + Sync + 'static,
    {
        MatrixSymbol::invariant(group, order, move |xi| Ok(CMat::identity(xi.dim, xi.dim) * g(xi)))
    }

    pub fn identity(group: GroupSpec) -> Self {
        MatrixSymbol::scalar_multiplier(group, 0.0, |_| c(1.0, 0.0)).with_description("identity")
    }

    pub fn zero(group: GroupSpec) -> Self {
        MatrixSymbol::invariant(group, f64::NEG_INFINITY, |xi| Ok(CMat::zeros(xi.dim, xi.dim))).with_description("zero")
    }

    /// `<xi>^s I`, the symbol of the Bessel potential of order `s`.
    pub fn lambda(group: GroupSpec, s: f64) -> Self {
        MatrixSymbol::scalar_multiplier(group, s, move |xi| c(xi.weight.powf(s), 0.0)).with_description(format!("lambda({s})"))
    }

    /// A finite table of invariant blocks; labels outside it are unsupported.
    pub fn invariant_table(group: GroupSpec, order: f64, table: Vec<(IrrepLabel, CMat)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (xi, m) in table {
            check_group(group, xi.group)?;
            if m.shape() != (xi.dim, xi.dim) {
                return Err(Error::ShapeMismatch(format!("block for {xi} must be {0}x{0}", xi.dim)));
            }
            map.insert(xi.label.clone(), m);
        }
        let mut labels: Vec<IrrepLabel> = map.keys().map(|l| IrrepLabel::new(group, l.clone())).collect::<Result<_>>()?;
        labels.sort();
        let map = Arc::new(map);
        Ok(MatrixSymbol::invariant(group, order, move |xi| {
            map.get(&xi.label)
                .cloned()
                .ok_or_else(|| Error::BandExhausted(format!("no table entry for {xi}")))
        })
        .restricted(labels)
        .with_description("table"))
    }

    /// Pointwise multiplication by `c(x) = sum d Tr(eta(x) c^(eta))`.
    pub fn multiplication(coeffs: FourierCoefficients) -> Self {
        let group = coeffs.group;
        let band = coeffs.entries().iter().map(|(eta, _)| eta.degree()).max().unwrap_or(0);
        let coeffs = Arc::new(coeffs);
        MatrixSymbol::variable(group, 0.0, band, move |x, xi| {
            let v = crate::fourier::fourier_inverse(&coeffs, x)?;
            Ok(CMat::identity(xi.dim, xi.dim) * v)
        })
        .with_description("multiply")
    }

    /// Circle symbol `e^{2 pi i k x}` for `l >= 0` and `1` for `l < 0`.
    pub fn winding(k: i64) -> Self {
        MatrixSymbol::variable(GroupSpec::torus(1), 0.0, k.unsigned_abs() as u32, move |x, xi| {
            let Label::Torus(l) = &xi.label else {
                return Err(Error::GroupMismatch { expected: GroupSpec::torus(1), found: xi.group });
            };
            if l[0] >= 0 {
                let a = 2.0 * std::f64::consts::PI * k as f64 * x.chart()[0];
                Ok(CMat::from_element(1, 1, c(a.cos(), a.sin())))
            } else {
                Ok(CMat::identity(1, 1))
            }
        })
        .with_description(format!("winding({k})"))
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    /// The same symbol, defined only on `labels`.
    pub fn restricted(mut self, mut labels: Vec<IrrepLabel>) -> Self {
        labels.sort();
        labels.dedup();
        if let Some(old) = &self.support {
            labels.retain(|l| old.binary_search(l).is_ok());
        }
        self.support = Some(Arc::new(labels));
        self
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self.eval, Eval::Invariant(_))
    }

    /// Labels the symbol is defined on, or `None` for the whole dual.
    pub fn support(&self) -> Option<&[IrrepLabel]> {
        self.support.as_deref().map(|v| v.as_slice())
    }

    pub fn supports(&self, xi: &IrrepLabel) -> bool {
        xi.group == self.group && self.support.as_ref().is_none_or(|s| s.binary_search(xi).is_ok())
    }

    fn check_label(&self, xi: &IrrepLabel) -> Result<()> {
        check_group(self.group, xi.group)?;
        if !self.supports(xi) {
            return Err(Error::BandExhausted(format!("symbol '{}' is not defined at {xi}", self.description)));
        }
        Ok(())
    }

    pub fn eval(&self, x: &GroupPoint, xi: &IrrepLabel) -> Result<CMat> {
        check_group(self.group, x.group())?;
        self.check_label(xi)?;
        match &self.eval {
            Eval::Invariant(f) => f(xi),
            Eval::Variable(f) => f(x, xi),
        }
    }

    /// `sigma(xi)` of an invariant symbol.
    pub fn eval_invariant(&self, xi: &IrrepLabel) -> Result<CMat> {
        self.check_label(xi)?;
        match &self.eval {
            Eval::Invariant(f) => f(xi),
            Eval::Variable(_) => Err(Error::InvalidArgument(format!("symbol '{}' depends on x", self.description))),
        }
    }

    /// `a sigma + b tau`.
    pub fn linear_combination(&self, a: C64, other: &MatrixSymbol, b: C64) -> Result<MatrixSymbol> {
        check_group(self.group, other.group)?;
        let (s, o) = (self.clone(), other.clone());
        let order = self.order.max(other.order);
        let description = format!("{a}*{} + {b}*{}", self.description, other.description);
        let mut out = if self.is_invariant() && other.is_invariant() {
            MatrixSymbol::invariant(self.group, order, move |xi| Ok(s.eval_invariant(xi)? * a + o.eval_invariant(xi)? * b))
        } else {
            MatrixSymbol::variable(self.group, order, self.x_bandwidth.max(other.x_bandwidth), move |x, xi| {
                Ok(s.eval(x, xi)? * a + o.eval(x, xi)? * b)
            })
        };
        out.support = intersect_support(self, other);
        Ok(out.with_description(description))
    }

    pub fn add(&self, other: &MatrixSymbol) -> Result<MatrixSymbol> {
        self.linear_combination(c(1.0, 0.0), other, c(1.0, 0.0))
    }

    pub fn scale(&self, z: C64) -> MatrixSymbol {
        let s = self.clone();
        let mut out = match &self.eval {
            Eval::Invariant(_) => MatrixSymbol::invariant(self.group, self.order, move |xi| Ok(s.eval_invariant(xi)? * z)),
            Eval::Variable(_) => MatrixSymbol::variable(self.group, self.order, self.x_bandwidth, move |x, xi| Ok(s.eval(x, xi)? * z)),
        };
        out.support = self.support.clone();
        out.with_description(format!("{z}*{}", self.description))
    }

    /// Pointwise adjoint `sigma(x, xi)^*`. This is not the symbol of the
    /// adjoint operator unless the symbol is invariant.
    pub fn pointwise_adjoint(&self) -> MatrixSymbol {
        let s = self.clone();
        let mut out = match &self.eval {
            Eval::Invariant(_) => MatrixSymbol::invariant(self.group, self.order, move |xi| Ok(s.eval_invariant(xi)?.adjoint())),
            Eval::Variable(_) => {
                MatrixSymbol::variable(self.group, self.order, self.x_bandwidth, move |x, xi| Ok(s.eval(x, xi)?.adjoint()))
            }
        };
        out.support = self.support.clone();
        out.with_description(format!("({})^*", self.description))
    }
}

fn intersect_support(a: &MatrixSymbol, b: &MatrixSymbol) -> Option<Arc<Vec<IrrepLabel>>> {
    match (&a.support, &b.support) {
        (None, None) => None,
        (Some(s), None) | (None, Some(s)) => Some(s.clone()),
        (Some(s), Some(t)) => Some(Arc::new(s.iter().filter(|l| t.binary_search(l).is_ok()).cloned().collect())),
    }
}

/// `sigma_a(x, xi) sigma_b(x, xi)`; invariant iff both factors are.
pub fn frozen_symbol_product(a: &MatrixSymbol, b: &MatrixSymbol) -> Result<MatrixSymbol> {
    check_group(a.group, b.group)?;
    let (sa, sb) = (a.clone(), b.clone());
    let order = a.order + b.order;
    let mut out = if a.is_invariant() && b.is_invariant() {
        MatrixSymbol::invariant(a.group, order, move |xi| Ok(sa.eval_invariant(xi)? * sb.eval_invariant(xi)?))
    } else {
        MatrixSymbol::variable(a.group, order, a.x_bandwidth + b.x_bandwidth, move |x, xi| Ok(sa.eval(x, xi)? * sb.eval(x, xi)?))
    };
    out.support = intersect_support(a, b);
    Ok(out.with_description(format!("frozen({} . {})", a.description, b.description)))
}

/// Per-label expansion of `y -> xi(y) sigma_b(y, xi)` into representation
/// coefficients: `coeffs[eta][i * d + j]` is the transform of entry `(i,j)`.
type BlockExpansion = Vec<(IrrepLabel, Vec<CMat>)>;

fn expand_block(b: &MatrixSymbol, xi: &IrrepLabel) -> Result<BlockExpansion> {
    let etas = expand_labels(b.group, std::slice::from_ref(xi), b.x_bandwidth);
    let top = etas.iter().map(|e| e.degree()).max().unwrap_or(0);
    let rule = haar_quadrature(b.group, resolving_level(b.group, xi.degree() + b.x_bandwidth + top))?;
    let d = xi.dim;
    let mut values = vec![Vec::with_capacity(rule.len()); d * d];
    for x in rule.nodes() {
        let m = rep_matrix(xi, &x)? * b.eval(&x, xi)?;
        for i in 0..d {
            for j in 0..d {
                values[i * d + j].push(m[(i, j)]);
            }
        }
    }
    let per_entry = fourier_forward_many(&rule, &values, &etas)?;
    Ok(etas
        .iter()
        .enumerate()
        .map(|(k, eta)| (eta.clone(), per_entry.iter().map(|fc| fc.entries()[k].1.clone()).collect()))
        .collect())
}

/// The symbol of the composed operator `A B`, computed exactly as
/// `xi(x)^* A(B xi)(x)` for band-limited `sigma_b`.
pub fn true_composition(a: &MatrixSymbol, b: &MatrixSymbol) -> Result<MatrixSymbol> {
    check_group(a.group, b.group)?;
    if b.is_invariant() {
        return Ok(frozen_symbol_product(a, b)?.with_description(format!("{} . {}", a.description, b.description)));
    }
    let (sa, sb) = (a.clone(), b.clone());
    let memo: Arc<Mutex<HashMap<Label, Arc<BlockExpansion>>>> = Arc::default();
    let mut out = MatrixSymbol::variable(a.group, a.order + b.order, a.x_bandwidth + b.x_bandwidth, move |x, xi| {
        let cached = memo.lock().expect("memo lock").get(&xi.label).cloned();
        let exp = match cached {
            Some(e) => e,
            None => {
                let e = Arc::new(expand_block(&sb, xi)?);
                memo.lock().expect("memo lock").insert(xi.label.clone(), e.clone());
                e
            }
        };
        let d = xi.dim;
        let mut m = CMat::zeros(d, d);
        for (eta, blocks) in exp.iter() {
            let left = rep_matrix(eta, x)? * sa.eval(x, eta)?;
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += (&left * &blocks[i * d + j]).trace() * eta.dim as f64;
                }
            }
        }
        Ok(rep_matrix(xi, x)?.adjoint() * m)
    });
    out.support = b.support.clone();
    Ok(out.with_description(format!("{} . {}", a.description, b.description)))
}

/// Extract `sigma(x, xi) = xi(x)^* (A xi)(x)` on `dual`, expanding the
/// x-dependence in representation coefficients of degree `<= x_band`.
///
/// The grid must resolve products of degree `2 x_band`; `apply` must be
/// exact on the entries of every label in `dual`. A symbol whose
/// x-coefficients vanish (relative `1e-10`) is stored as an invariant table.
pub fn symbol_of_operator<F>(apply: F, grid: Arc<QuadratureRule>, dual: &[IrrepLabel], x_band: u32) -> Result<MatrixSymbol>
where
    F: Fn(&SampledFunction) -> Result<SampledFunction>,
{
    let group = grid.group();
    let x_dual = enumerate(group, Cutoff::band(x_band))?;
    let mut tables: Vec<(IrrepLabel, Vec<FourierCoefficients>)> = Vec::with_capacity(dual.len());
    let mut invariant = true;
    for xi in dual {
        check_group(group, xi.group)?;
        let d = xi.dim;
        let reps: Vec<CMat> = grid.nodes().map(|x| rep_matrix(xi, &x)).collect::<Result<_>>()?;
        let mut images = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let f = SampledFunction::new(grid.clone(), reps.iter().map(|r| r[(i, j)]).collect())?;
                images.push(apply(&f)?.values);
            }
        }
        let mut values = vec![Vec::with_capacity(grid.len()); d * d];
        for (k, r) in reps.iter().enumerate() {
            let ax = CMat::from_fn(d, d, |i, j| images[i * d + j][k]);
            let s = r.adjoint() * ax;
            for a in 0..d {
                for b in 0..d {
                    values[a * d + b].push(s[(a, b)]);
                }
            }
        }
        let coeffs = fourier_forward_many(&grid, &values, &x_dual)?;
        let scale = values.iter().flatten().fold(1.0_f64, |m, z| m.max(z.norm()));
        let varying = coeffs
            .iter()
            .flat_map(|fc| fc.entries().iter().filter(|(eta, _)| !eta.is_trivial()))
            .fold(0.0_f64, |m, (_, blk)| m.max(max_abs(blk)));
        if varying > 1e-10 * scale {
            invariant = false;
        }
        tables.push((xi.clone(), coeffs));
    }
    let labels: Vec<IrrepLabel> = dual.to_vec();
    if invariant {
        let table = tables
            .into_iter()
            .map(|(xi, coeffs)| {
                let d = xi.dim;
                let m = CMat::from_fn(d, d, |a, b| coeffs[a * d + b].entries()[0].1[(0, 0)]);
                (xi, m)
            })
            .collect();
        return Ok(MatrixSymbol::invariant_table(group, 0.0, table)?.with_description("extracted"));
    }
    let table: Arc<HashMap<Label, Vec<FourierCoefficients>>> =
        Arc::new(tables.into_iter().map(|(xi, fc)| (xi.label, fc)).collect());
    let x_dual = Arc::new(x_dual);
    Ok(MatrixSymbol::variable(group, 0.0, x_band, move |x, xi| {
        let coeffs = table
            .get(&xi.label)
            .ok_or_else(|| Error::BandExhausted(format!("extracted symbol has no data at {xi}")))?;
        let reps: Vec<CMat> = x_dual.iter().map(|eta| rep_matrix(eta, x)).collect::<Result<_>>()?;
        let d = xi.dim;
        let mut m = CMat::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] = coeffs[a * d + b]
                    .entries()
                    .iter()
                    .zip(&reps)
                    .map(|((eta, blk), r)| (r * blk).trace() * eta.dim as f64)
                    .sum();
            }
        }
        Ok(m)
    })
    .restricted(labels)
    .with_description("extracted"))
}

/// `sum d_xi Tr(xi(x) sigma(x, xi) f^(xi))`.
pub fn quantize(sigma: &MatrixSymbol, f_hat: &FourierCoefficients, x: &GroupPoint) -> Result<C64> {
    check_group(sigma.group, f_hat.group)?;
    let mut acc = c(0.0, 0.0);
    for (xi, m) in f_hat.entries() {
        let r = rep_matrix(xi, x)? * sigma.eval(x, xi)?;
        acc += (r * m).trace() * xi.dim as f64;
    }
    Ok(acc)
}

/// `R(x, y) = sum_{xi in dual} d_xi Tr(xi(y) sigma(x, xi))`.
pub fn kernel_from_symbol(sigma: &MatrixSymbol, x: &GroupPoint, y: &GroupPoint, dual: &[IrrepLabel]) -> Result<C64> {
    let mut acc = c(0.0, 0.0);
    for xi in dual {
        acc += (rep_matrix(xi, y)? * sigma.eval(x, xi)?).trace() * xi.dim as f64;
    }
    Ok(acc)
}

/// `R(x_k, y_k')` for all node pairs of two rules.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub values: CMat,
}

pub fn kernel_table(sigma: &MatrixSymbol, x_grid: &QuadratureRule, y_grid: &QuadratureRule, dual: &[IrrepLabel]) -> Result<KernelTable> {
    let mut values = CMat::zeros(x_grid.len(), y_grid.len());
    let y_nodes: Vec<GroupPoint> = y_grid.nodes().collect();
    for (k, x) in x_grid.nodes().enumerate() {
        for (kp, y) in y_nodes.iter().enumerate() {
            values[(k, kp)] = kernel_from_symbol(sigma, &x, y, dual)?;
        }
    }
    Ok(KernelTable { values })
}

/// Labels of `band` whose whole distance-`r` neighbourhood lies in `band`.
fn interior(group: GroupSpec, band: &[IrrepLabel], r: u32) -> Vec<IrrepLabel> {
    let mut sorted = band.to_vec();
    sorted.sort();
    sorted
        .iter()
        .filter(|xi| {
            expand_labels(group, std::slice::from_ref(*xi), r)
                .iter()
                .all(|eta| sorted.binary_search(eta).is_ok())
        })
        .cloned()
        .collect()
}

fn band_of(sigma: &MatrixSymbol, band: &[IrrepLabel]) -> Result<Vec<IrrepLabel>> {
    for xi in band {
        sigma.check_label(xi)?;
    }
    let mut b = band.to_vec();
    b.sort();
    b.dedup();
    Ok(b)
}

/// Difference operator `D = xi0(.)_{ij} - delta_ij` applied to `sigma`,
/// whose values are taken on `band`.
///
/// On tori this uses the shift rule `(D sigma)(l) = sigma(l - l0) - sigma(l)`;
/// elsewhere it goes through [`difference_apply_kernel_route`]. The result
/// is defined on the labels whose needed neighbours lie in `band`.
pub fn difference_apply(sigma: &MatrixSymbol, xi0: &IrrepLabel, i: usize, j: usize, band: &[IrrepLabel]) -> Result<MatrixSymbol> {
    check_group(sigma.group, xi0.group)?;
    let GroupSpec::Torus { .. } = sigma.group else {
        return difference_apply_kernel_route(sigma, xi0, i, j, band);
    };
    let Label::Torus(l0) = &xi0.label else { unreachable!() };
    let band = band_of(sigma, band)?;
    let l0 = l0.clone();
    let shift = move |xi: &IrrepLabel| -> IrrepLabel {
        let Label::Torus(l) = &xi.label else { unreachable!() };
        let shifted: Vec<i64> = l.iter().zip(&l0).map(|(a, b)| a - b).collect();
        IrrepLabel::torus(&shifted)
    };
    let out: Vec<IrrepLabel> = band.iter().filter(|xi| band.binary_search(&shift(xi)).is_ok()).cloned().collect();
    if out.is_empty() {
        return Err(Error::BandExhausted(format!("no label of the band keeps its {xi0} neighbour")));
    }
    let s = sigma.clone();
    let result = if sigma.is_invariant() {
        let shift = shift.clone();
        MatrixSymbol::invariant(sigma.group, sigma.order - 1.0, move |xi| Ok(s.eval_invariant(&shift(xi))? - s.eval_invariant(xi)?))
    } else {
        MatrixSymbol::variable(sigma.group, sigma.order - 1.0, sigma.x_bandwidth, move |x, xi| {
            Ok(s.eval(x, &shift(xi))? - s.eval(x, xi)?)
        })
    };
    let _ = (i, j);
    Ok(result.restricted(out).with_description(format!("D[{xi0}]({})", sigma.description)))
}

/// Difference operator through the frozen kernel: the symbol of
/// `q(y) R(x, y)` with `q = xi0(.)_{ij} - delta_ij`, recovered by a forward
/// transform in `y`.
pub fn difference_apply_kernel_route(sigma: &MatrixSymbol, xi0: &IrrepLabel, i: usize, j: usize, band: &[IrrepLabel]) -> Result<MatrixSymbol> {
    check_group(sigma.group, xi0.group)?;
    if i >= xi0.dim || j >= xi0.dim {
        return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside the {0}x{0} label {xi0}", xi0.dim)));
    }
    let group = sigma.group;
    let band = band_of(sigma, band)?;
    let out = interior(group, &band, xi0.degree());
    if out.is_empty() {
        return Err(Error::BandExhausted(format!("band leaves no headroom for {xi0}")));
    }
    let top = band.iter().map(|x| x.degree()).max().unwrap_or(0);
    let rule = Arc::new(haar_quadrature(group, resolving_level(group, xi0.degree() + 2 * top))?);
    let delta = if i == j { 1.0 } else { 0.0 };
    let q: Vec<C64> = rule.nodes().map(|y| rep_matrix(xi0, &y).map(|r| r[(i, j)] - delta)).collect::<Result<_>>()?;
    let band_reps: Vec<Vec<CMat>> = band
        .iter()
        .map(|eta| rule.nodes().map(|y| rep_matrix(eta, &y)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let shared = Arc::new((rule, q, band, band_reps));
    let s = sigma.clone();
    let reach = xi0.degree();
    let compute = move |x: &GroupPoint, xi: &IrrepLabel| -> Result<CMat> {
        let (rule, q, band, band_reps) = &*shared;
        let blocks: Vec<(usize, CMat)> = band
            .iter()
            .enumerate()
            .filter(|(_, eta)| within_distance(xi, eta, reach))
            .map(|(n, eta)| s.eval(x, eta).map(|m| (n, m)))
            .collect::<Result<_>>()?;
        let mut acc = CMat::zeros(xi.dim, xi.dim);
        for k in 0..rule.len() {
            let mut r = c(0.0, 0.0);
            for (n, m) in &blocks {
                r += (&band_reps[*n][k] * m).trace() * band[*n].dim as f64;
            }
            let v = q[k] * r * rule.weight(k);
            if v != c(0.0, 0.0) {
                acc += rep_matrix(xi, &rule.node(k))?.adjoint() * v;
            }
        }
        Ok(acc)
    };
    let result = if sigma.is_invariant() {
        let e = identity(group);
        let table: Vec<(IrrepLabel, CMat)> = out.iter().map(|xi| compute(&e, xi).map(|m| (xi.clone(), m))).collect::<Result<_>>()?;
        MatrixSymbol::invariant_table(group, sigma.order - 1.0, table)?
    } else {
        MatrixSymbol::variable(group, sigma.order - 1.0, sigma.x_bandwidth, compute).restricted(out)
    };
    Ok(result.with_description(format!("D[{xi0};{i},{j}]({})", sigma.description)))
}

/// A grid point where the symbol is numerically singular.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticitySite {
    pub node: usize,
    pub coords: Vec<f64>,
    pub label: Label,
    pub smallest_singular: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub group: GroupSpec,
    pub order: f64,
    pub cutoff: Cutoff,
    pub doubled_cutoff: Cutoff,
    pub threshold: f64,
    pub largest_singular: f64,
    /// `max ||sigma^{-1}||_op <xi>^m` over the invertible sites.
    pub constant: f64,
    pub sites_checked: usize,
    pub non_invertible: Vec<EllipticitySite>,
    pub non_invertible_labels: Vec<Label>,
    pub non_invertible_labels_doubled: Vec<Label>,
    pub elliptic: bool,
}

impl EllipticityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per non-invertible site.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names = self.group.chart_names();
        writeln!(out, "node,{},label,smallest_singular", names.join(","))?;
        for s in &self.non_invertible {
            let coords: Vec<String> = s.coords.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{},{},{},{:.16e}", s.node, coords.join(","), s.label, s.smallest_singular)?;
        }
        Ok(())
    }
}

struct SingularScan {
    largest: f64,
    sites: Vec<(usize, IrrepLabel, f64)>,
}

fn scan_singular(sigma: &MatrixSymbol, labels: &[IrrepLabel], nodes: &[GroupPoint]) -> Result<SingularScan> {
    let mut largest = 0.0_f64;
    let mut sites = Vec::with_capacity(labels.len() * nodes.len());
    for xi in labels {
        if sigma.is_invariant() {
            let sv = singular_values(&sigma.eval_invariant(xi)?);
            largest = largest.max(sv[0]);
            let smin = *sv.last().unwrap();
            sites.extend((0..nodes.len()).map(|k| (k, xi.clone(), smin)));
        } else {
            for (k, x) in nodes.iter().enumerate() {
                let sv = singular_values(&sigma.eval(x, xi)?);
                largest = largest.max(sv[0]);
                sites.push((k, xi.clone(), *sv.last().unwrap()));
            }
        }
    }
    Ok(SingularScan { largest, sites })
}

fn doubled(cutoff: Cutoff) -> Cutoff {
    match cutoff {
        Cutoff::Weight(w) => Cutoff::Weight(2.0 * w),
        Cutoff::Band { band } => Cutoff::band(2 * band.max(1)),
    }
}

/// Smallest singular value of `sigma(x, xi)` over `grid x cutoff`, the
/// constant `C` of `||sigma^{-1}|| <= C <xi>^{-m}`, and a finite-band
/// ellipticity verdict.
///
/// A site is non-invertible when its smallest singular value is below
/// `1e-10` times the largest singular value over the band. The verdict is
/// elliptic when the set of labels carrying non-invertible sites does not
/// grow once the cutoff is doubled and `C` is finite.
pub fn ellipticity_check(sigma: &MatrixSymbol, m: f64, cutoff: Cutoff, grid: &QuadratureRule) -> Result<EllipticityReport> {
    check_group(sigma.group, grid.group())?;
    cutoff.validate()?;
    let nodes: Vec<GroupPoint> = grid.nodes().collect();
    let labels: Vec<IrrepLabel> = enumerate(sigma.group, cutoff)?;
    let base = scan_singular(sigma, &labels, &nodes)?;
    let threshold = 1e-10 * base.largest;

    let mut constant = 0.0_f64;
    let mut non_invertible = Vec::new();
    let mut bad_labels: Vec<Label> = Vec::new();
    for (k, xi, smin) in &base.sites {
        if *smin <= threshold {
            non_invertible.push(EllipticitySite {
                node: *k,
                coords: nodes[*k].chart().to_vec(),
                label: xi.label.clone(),
                smallest_singular: *smin,
            });
            if bad_labels.last() != Some(&xi.label) {
                bad_labels.push(xi.label.clone());
            }
        } else {
            constant = constant.max(xi.weight.powf(m) / smin);
        }
    }
    bad_labels.dedup();

    let doubled_cutoff = doubled(cutoff);
    let wide_labels = enumerate(sigma.group, doubled_cutoff)?;
    let wide = scan_singular(sigma, &wide_labels, &nodes)?;
    let wide_threshold = 1e-10 * wide.largest;
    let mut wide_bad: Vec<Label> = wide
        .sites
        .iter()
        .filter(|(_, _, s)| *s <= wide_threshold)
        .map(|(_, xi, _)| xi.label.clone())
        .collect();
    wide_bad.dedup();
    let mut wide_sorted = wide_bad.clone();
    wide_sorted.sort();
    wide_sorted.dedup();
    let mut base_sorted = bad_labels.clone();
    base_sorted.sort();

    let invertible_sites = base.sites.len() - non_invertible.len();
    let elliptic = wide_sorted.iter().all(|l| base_sorted.binary_search(l).is_ok()) && constant.is_finite() && invertible_sites > 0;
    if !elliptic {
        log::info!("ellipticity check failed: {} non-invertible sites", non_invertible.len());
    }
    Ok(EllipticityReport {
        group: sigma.group,
        order: m,
        cutoff,
        doubled_cutoff,
        threshold,
        largest_singular: base.largest,
        constant: if invertible_sites > 0 { constant } else { f64::INFINITY },
        sites_checked: base.sites.len(),
        non_invertible,
        non_invertible_labels: bad_labels,
        non_invertible_labels_doubled: wide_bad,
        elliptic,
    })
}

/// One entry `C_{alpha,beta}` of the symbol-class table.
#[derive(Debug, Clone, Serialize)]
pub struct ClassConstant {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub value: f64,
}

fn multi_indices(n: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            let used: u32 = v.iter().sum();
            for k in 0..=(max - used) {
                let mut w = v.clone();
                w.push(k);
                next.push(w);
            }
        }
        out = next;
    }
    out.sort_by_key(|v| (v.iter().sum::<u32>(), std::cmp::Reverse(v.clone())));
    out
}

fn derivative_of(sigma: &MatrixSymbol, basis: &LieBasis, alpha: &mut Vec<u32>, x: &GroupPoint, xi: &IrrepLabel, h: f64) -> Result<CMat> {
    let Some(j) = alpha.iter().position(|&a| a > 0) else {
        return sigma.eval(x, xi);
    };
    alpha[j] -= 1;
    let plus = derivative_of(sigma, basis, alpha, &basis.flow(x, j, h), xi, h)?;
    let minus = derivative_of(sigma, basis, alpha, &basis.flow(x, j, -h), xi, h)?;
    alpha[j] += 1;
    Ok((plus - minus) / c(2.0 * h, 0.0))
}

/// `sup ||d^alpha D^beta sigma(x, xi)||_op <xi>^{|beta| - m}` over the grid and
/// the labels of `cutoff`, for `|alpha| <= alpha_max`, `|beta| <= beta_max`.
///
/// `d` is a central difference along left-invariant fields with step `h`;
/// `D` is the torus difference in the coordinate directions, so
/// `beta_max > 0` needs a torus.
pub fn symbol_class_diagnostic(
    sigma: &MatrixSymbol,
    m: f64,
    alpha_max: u32,
    beta_max: u32,
    grid: &QuadratureRule,
    cutoff: Cutoff,
    h: f64,
) -> Result<Vec<ClassConstant>> {
    check_group(sigma.group, grid.group())?;
    let group = sigma.group;
    let n_beta = match group {
        GroupSpec::Torus { n } => n,
        _ if beta_max == 0 => 0,
        _ => return Err(Error::Unsupported("difference orders beyond 0 need a torus".into())),
    };
    let basis = LieBasis::standard(group);
    let nodes: Vec<GroupPoint> = grid.nodes().collect();
    let band = enumerate(group, cutoff)?;
    let mut out = Vec::new();
    for beta in multi_indices(n_beta, beta_max) {
        let mut d = sigma.clone();
        let mut labels = band.clone();
        for (dir, &times) in beta.iter().enumerate() {
            let mut e = vec![0_i64; n_beta];
            e[dir] = 1;
            let xi0 = IrrepLabel::torus(&e);
            for _ in 0..times {
                d = difference_apply(&d, &xi0, 0, 0, &labels)?;
                labels = d.support().expect("restricted").to_vec();
            }
        }
        let bsum: u32 = beta.iter().sum();
        for alpha in multi_indices(basis.len(), alpha_max) {
            let mut worst = 0.0_f64;
            for xi in &labels {
                let scale = xi.weight.powf(bsum as f64 - m);
                for x in &nodes {
                    let mut a = alpha.clone();
                    let v = derivative_of(&d, &basis, &mut a, x, xi, h)?;
                    worst = worst.max(op_norm(&v) * scale);
                }
            }
            out.push(ClassConstant { alpha: alpha.clone(), beta: beta.clone(), value: worst });
        }
    }
    Ok(out)
}

/// CSV with columns `alpha,beta,value`; multi-indices are `;`-joined.
pub fn write_class_csv<W: Write>(table: &[ClassConstant], mut out: W) -> std::io::Result<()> {
    writeln!(out, "alpha,beta,value")?;
    let join = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    for row in table {
        writeln!(out, "{},{},{:.16e}", join(&row.alpha), join(&row.beta), row.value)?;
    }
    Ok(())
}

//! The unitary dual: labels, representation matrices, Casimir data, and
//! left-invariant derivatives.
//!
//! Casimir conventions: torus characters `e^{2 pi i l.x}` have
//! `lambda = 4 pi^2 |l|^2`; SU(2) spin `l` has `lambda = l(l+1)`; SU(3)
//! highest weight `(a, b)` has `lambda = (a^2 + b^2 + ab)/3 + a + b`.
//! SU(2) spins are stored as twice-spin integers.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_group, Error, Result};
use crate::group::{group_mul, matrix_point, GroupPoint, GroupSpec, QuadratureRule};
use crate::linalg::{c, expm, CMat, C64, I};

/// A point of the unitary dual, without its derived data.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Torus(Vec<i64>),
    /// Twice the spin.
    Su2(u32),
    Su3(u32, u32),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Torus(l) => {
                let parts: Vec<String> = l.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(";"))
            }
            Label::Su2(n) if n % 2 == 0 => write!(f, "l={}", n / 2),
            Label::Su2(n) => write!(f, "l={n}/2"),
            Label::Su3(a, b) => write!(f, "({a};{b})"),
        }
    }
}

impl Label {
    /// Polynomial degree of the representation entries: max torus frequency,
    /// SU(2) twice-spin, SU(3) `a + b`.
    pub fn degree(&self) -> u32 {
        match self {
            Label::Torus(l) => l.iter().map(|x| x.unsigned_abs() as u32).max().unwrap_or(0),
            Label::Su2(n) => *n,
            Label::Su3(a, b) => a + b,
        }
    }

    /// An integer that orders labels of one group by Casimir eigenvalue.
    fn casimir_key(&self) -> u64 {
        match self {
            Label::Torus(l) => l.iter().map(|x| (x * x) as u64).sum(),
            Label::Su2(n) => *n as u64,
            Label::Su3(a, b) => {
                let (a, b) = (*a as u64, *b as u64);
                a * a + b * b + a * b + 3 * a + 3 * b
            }
        }
    }

    fn group_matches(&self, group: GroupSpec) -> bool {
        match (self, group) {
            (Label::Torus(l), GroupSpec::Torus { n }) => l.len() == n,
            (Label::Su2(_), GroupSpec::Su2) | (Label::Su3(..), GroupSpec::Su3) => true,
            _ => false,
        }
    }
}

/// A point of the unitary dual with dimension, Casimir eigenvalue, and weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrrepLabel {
    pub group: GroupSpec,
    pub label: Label,
    pub dim: usize,
    pub casimir: f64,
    pub weight: f64,
}

impl PartialEq for IrrepLabel {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.label == other.label
    }
}
impl Eq for IrrepLabel {}

impl Hash for IrrepLabel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.group.hash(state);
        self.label.hash(state);
    }
}

impl PartialOrd for IrrepLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by weight, then by canonical label order.
impl Ord for IrrepLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.label
            .casimir_key()
            .cmp(&other.label.casimir_key())
            .then_with(|| self.label.cmp(&other.label))
    }
}

impl fmt::Display for IrrepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

impl IrrepLabel {
    pub fn new(group: GroupSpec, label: Label) -> Result<Self> {
        if !label.group_matches(group) {
            return Err(Error::InvalidArgument(format!("label {label} does not belong to {group}")));
        }
        let (dim, casimir) = match &label {
            Label::Torus(l) => (1, 4.0 * PI * PI * l.iter().map(|&x| (x * x) as f64).sum::<f64>()),
            Label::Su2(n) => {
                let spin = *n as f64 / 2.0;
                (*n as usize + 1, spin * (spin + 1.0))
            }
            Label::Su3(a, b) => {
                let (af, bf) = (*a as f64, *b as f64);
                (
                    ((a + 1) * (b + 1) * (a + b + 2) / 2) as usize,
                    (af * af + bf * bf + af * bf) / 3.0 + af + bf,
                )
            }
        };
        Ok(IrrepLabel { group, label, dim, casimir, weight: (1.0 + casimir).sqrt() })
    }

    pub fn trivial(group: GroupSpec) -> Self {
        let label = match group {
            GroupSpec::Torus { n } => Label::Torus(vec![0; n]),
            GroupSpec::Su2 => Label::Su2(0),
            GroupSpec::Su3 => Label::Su3(0, 0),
        };
        IrrepLabel::new(group, label).expect("trivial label")
    }

    pub fn torus(l: &[i64]) -> Self {
        IrrepLabel::new(GroupSpec::torus(l.len()), Label::Torus(l.to_vec())).unwrap()
    }

    pub fn su2(twice_spin: u32) -> Self {
        IrrepLabel::new(GroupSpec::Su2, Label::Su2(twice_spin)).unwrap()
    }

    pub fn su3(a: u32, b: u32) -> Self {
        IrrepLabel::new(GroupSpec::Su3, Label::Su3(a, b)).unwrap()
    }

    pub fn is_trivial(&self) -> bool {
        self.label.casimir_key() == 0
    }

    pub fn degree(&self) -> u32 {
        self.label.degree()
    }
}

pub fn casimir_eigenvalue(xi: &IrrepLabel) -> f64 {
    xi.casimir
}

pub fn weight(xi: &IrrepLabel) -> f64 {
    xi.weight
}

/// Which labels a finite computation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cutoff {
    /// `<xi> <= w`.
    Weight(f64),
    /// Torus `|l|_inf <= band`, SU(2) twice-spin `<= band`, SU(3) `a + b <= band`.
    Band { band: u32 },
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Weight(w) => write!(f, "weight<={w}"),
            Cutoff::Band { band } => write!(f, "band<={band}"),
        }
    }
}

impl Cutoff {
    pub fn band(band: u32) -> Self {
        Cutoff::Band { band }
    }

    pub fn contains(&self, xi: &IrrepLabel) -> bool {
        match *self {
            Cutoff::Weight(w) => xi.weight <= w * (1.0 + 1e-12),
            Cutoff::Band { band } => xi.degree() <= band,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Cutoff::Weight(w) if !(w >= 1.0) => Err(Error::InvalidArgument(format!("weight cutoff {w} must be >= 1"))),
            _ => Ok(()),
        }
    }

    /// Largest label degree the cutoff admits.
    pub fn max_degree(&self, group: GroupSpec) -> u32 {
        match *self {
            Cutoff::Band { band } => band,
            Cutoff::Weight(w) => {
                let lam = (w * w - 1.0).max(0.0) * (1.0 + 1e-12);
                match group {
                    GroupSpec::Torus { .. } => (lam / (4.0 * PI * PI)).sqrt().floor() as u32,
                    // l(l+1) <= lam  =>  l <= (-1 + sqrt(1 + 4 lam)) / 2
                    GroupSpec::Su2 => ((-1.0 + (1.0 + 4.0 * lam).sqrt()) + 1e-12).floor() as u32,
                    // lambda >= (a+b)^2 / 4 + (a + b) on the boundary a=b, so
                    // degree d satisfies d^2/4 + d <= lam.
                    GroupSpec::Su3 => (2.0 * (-1.0 + (1.0 + lam).sqrt()) + 1e-12).floor() as u32,
                }
            }
        }
    }
}

/// All labels with `<xi> <= cutoff`, sorted by weight then label.
pub fn enumerate_dual(group: GroupSpec, cutoff: f64) -> Result<Vec<IrrepLabel>> {
    if !(cutoff >= 1.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be >= 1")));
    }
    enumerate(group, Cutoff::Weight(cutoff))
}

/// All labels admitted by `cutoff`, sorted by weight then label.
pub fn enumerate(group: GroupSpec, cutoff: Cutoff) -> Result<Vec<IrrepLabel>> {
    group.validate()?;
    cutoff.validate()?;
    let d = cutoff.max_degree(group);
    let mut out: Vec<IrrepLabel> = candidates(group, d).into_iter().filter(|x| cutoff.contains(x)).collect();
    out.sort();
    Ok(out)
}

/// Every label of degree `<= d`.
fn candidates(group: GroupSpec, d: u32) -> Vec<IrrepLabel> {
    match group {
        GroupSpec::Torus { n } => {
            let d = d as i64;
            let mut out = Vec::new();
            let mut cur = vec![-d; n];
            loop {
                out.push(IrrepLabel::torus(&cur));
                let mut i = n;
                loop {
                    if i == 0 {
                        return out;
                    }
                    i -= 1;
                    if cur[i] < d {
                        cur[i] += 1;
                        break;
                    }
                    cur[i] = -d;
                }
            }
        }
        GroupSpec::Su2 => (0..=d).map(IrrepLabel::su2).collect(),
        GroupSpec::Su3 => {
            let mut out = Vec::new();
            for a in 0..=d {
                for b in 0..=(d - a) {
                    out.push(IrrepLabel::su3(a, b));
                }
            }
            out
        }
    }
}

/// Labels `eta` reachable from `xi` by tensoring with a representation of
/// degree `<= r`: torus `|eta - xi|_inf <= r`, SU(2) `|n_eta - n_xi| <= r`.
pub fn within_distance(xi: &IrrepLabel, eta: &IrrepLabel, r: u32) -> bool {
    match (&xi.label, &eta.label) {
        (Label::Torus(a), Label::Torus(b)) => a.iter().zip(b).all(|(x, y)| (x - y).unsigned_abs() <= r as u64),
        (Label::Su2(a), Label::Su2(b)) => a.abs_diff(*b) <= r,
        (Label::Su3(a1, b1), Label::Su3(a2, b2)) => a1.abs_diff(*a2) + b1.abs_diff(*b2) <= 2 * r,
        _ => false,
    }
}

/// `labels` together with every label within distance `r` of one of them.
pub fn expand_labels(group: GroupSpec, labels: &[IrrepLabel], r: u32) -> Vec<IrrepLabel> {
    let d = labels.iter().map(|x| x.degree()).max().unwrap_or(0) + r;
    let mut out: Vec<IrrepLabel> = candidates(group, d)
        .into_iter()
        .filter(|eta| labels.iter().any(|xi| within_distance(xi, eta, r)))
        .collect();
    out.sort();
    out
}

/// The irreducible matrix `xi(x)`.
///
/// SU(2) matrices are symmetric tensor powers of the defining
/// representation in the orthonormal monomial basis; spin 1/2 reproduces
/// the defining matrix itself. SU(3) supports only the trivial label.
pub fn rep_matrix(xi: &IrrepLabel, x: &GroupPoint) -> Result<CMat> {
    check_group(xi.group, x.group())?;
    match &xi.label {
        Label::Torus(l) => {
            let phase: f64 = l.iter().zip(x.chart()).map(|(&k, &t)| k as f64 * t).sum();
            let a = 2.0 * PI * phase;
            Ok(CMat::from_element(1, 1, c(a.cos(), a.sin())))
        }
        Label::Su2(n) => Ok(symmetric_power(x.su2_matrix_ref(), *n)),
        Label::Su3(0, 0) => Ok(CMat::identity(1, 1)),
        Label::Su3(..) => Err(Error::Unsupported("SU(3) representation matrices beyond the trivial one".into())),
    }
}

/// `Sym^n` of a 2x2 matrix in the orthonormal basis `sqrt(C(n,k)) e1^{n-k} e2^k`.
pub fn symmetric_power(g: &CMat, n: u32) -> CMat {
    let size = n as usize + 1;
    if n == 0 {
        return CMat::identity(1, 1);
    }
    let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let pows = |z: C64| -> Vec<C64> {
        let mut v = Vec::with_capacity(size);
        let mut acc = c(1.0, 0.0);
        for _ in 0..size {
            v.push(acc);
            acc *= z;
        }
        v
    };
    let (p00, p01, p10, p11) = (pows(g00), pows(g01), pows(g10), pows(g11));
    let binom: Vec<Vec<f64>> = (0..=n).map(|m| (0..=m).map(|k| binomial(m, k)).collect()).collect();
    let mut out = CMat::zeros(size, size);
    for k in 0..size {
        let a = size - 1 - k; // factors of g e1 = g00 e1 + g10 e2
        let poly1: Vec<C64> = (0..=a).map(|i| p00[a - i] * p10[i] * binom[a][i]).collect();
        let poly2: Vec<C64> = (0..=k).map(|j| p01[k - j] * p11[j] * binom[k][j]).collect();
        for (i, &u) in poly1.iter().enumerate() {
            for (j, &v) in poly2.iter().enumerate() {
                out[(i + j, k)] += u * v;
            }
        }
        let nk = binom[n as usize][k];
        for kp in 0..size {
            out[(kp, k)] *= (nk / binom[n as usize][kp]).sqrt();
        }
    }
    out
}

/// `xi(x_k)` at every node of `rule`.
pub fn rep_table(xi: &IrrepLabel, rule: &QuadratureRule) -> Result<Vec<CMat>> {
    check_group(xi.group, rule.group())?;
    (0..rule.len()).map(|k| rep_matrix(xi, &rule.node(k))).collect()
}

/// A basis of the Lie algebra as anti-Hermitian matrices (empty on tori,
/// where the coordinate directions are used).
#[derive(Debug, Clone)]
pub struct LieBasis {
    pub group: GroupSpec,
    pub generators: Vec<CMat>,
}

impl LieBasis {
    /// SU(2): `i sigma_j / 2`; SU(3): `i lambda_j / 2` (Gell-Mann).
    pub fn standard(group: GroupSpec) -> Self {
        let z = c(0.0, 0.0);
        let generators = match group {
            GroupSpec::Torus { .. } => Vec::new(),
            GroupSpec::Su2 => {
                let half = c(0.0, 0.5);
                let sx = CMat::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]);
                let sy = CMat::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]);
                let sz = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]);
                vec![sx * half, sy * half, sz * half]
            }
            GroupSpec::Su3 => {
                let half = c(0.0, 0.5);
                let one = c(1.0, 0.0);
                let mut gm = Vec::with_capacity(8);
                let unit = |i: usize, j: usize, v: C64| {
                    let mut m = CMat::zeros(3, 3);
                    m[(i, j)] = v;
                    m
                };
                gm.push(unit(0, 1, one) + unit(1, 0, one));
                gm.push(unit(0, 1, -I) + unit(1, 0, I));
                gm.push(unit(0, 0, one) + unit(1, 1, -one));
                gm.push(unit(0, 2, one) + unit(2, 0, one));
                gm.push(unit(0, 2, -I) + unit(2, 0, I));
                gm.push(unit(1, 2, one) + unit(2, 1, one));
                gm.push(unit(1, 2, -I) + unit(2, 1, I));
                let r3 = 1.0 / 3.0_f64.sqrt();
                gm.push(unit(0, 0, c(r3, 0.0)) + unit(1, 1, c(r3, 0.0)) + unit(2, 2, c(-2.0 * r3, 0.0)));
                gm.into_iter().map(|m| m * half).collect()
            }
        };
        LieBasis { group, generators }
    }

    pub fn len(&self) -> usize {
        self.group.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x * exp(s Y_j)`.
    pub fn flow(&self, x: &GroupPoint, j: usize, s: f64) -> GroupPoint {
        match self.group {
            GroupSpec::Torus { .. } => {
                let mut ch = x.chart().to_vec();
                ch[j] += s;
                GroupPoint::torus(&ch)
            }
            GroupSpec::Su2 => {
                // exp(s i sigma_j / 2) = cos(s/2) I + i sin(s/2) sigma_j
                let (sn, cs) = (s / 2.0).sin_cos();
                let step = CMat::identity(2, 2) * c(cs, 0.0) + &self.generators[j] * c(2.0 * sn, 0.0);
                let e = matrix_point(self.group, step);
                group_mul(x, &e).expect("same group")
            }
            GroupSpec::Su3 => {
                let e = matrix_point(self.group, expm(&(&self.generators[j] * c(s, 0.0))));
                group_mul(x, &e).expect("same group")
            }
        }
    }
}

/// Central difference of `s -> f(x exp(s Y_j))` at `s = 0`.
pub fn left_invariant_derivative<F>(f: F, j: usize, x: &GroupPoint, h: f64) -> C64
where
    F: Fn(&GroupPoint) -> C64,
{
    let basis = LieBasis::standard(x.group());
    (f(&basis.flow(x, j, h)) - f(&basis.flow(x, j, -h))) / (2.0 * h)
}

/// Richardson-extrapolated central difference, `O(h^4)`.
pub fn left_invariant_derivative_richardson<F>(f: F, j: usize, x: &GroupPoint, h: f64) -> C64
where
    F: Fn(&GroupPoint) -> C64,
{
    let coarse = left_invariant_derivative(&f, j, x, h);
    let fine = left_invariant_derivative(&f, j, x, h / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// `sum_j d_j^2 f` at `x` by second central differences.
pub fn left_invariant_laplacian<F>(f: F, x: &GroupPoint, h: f64) -> C64
where
    F: Fn(&GroupPoint) -> C64,
{
    let basis = LieBasis::standard(x.group());
    let center = f(x);
    (0..basis.len())
        .map(|j| (f(&basis.flow(x, j, h)) - center * 2.0 + f(&basis.flow(x, j, -h))) / (h * h))
        .sum()
}

/// CSV with columns `label,dim,casimir,weight`.
pub fn write_dual_csv<W: Write>(labels: &[IrrepLabel], mut out: W) -> std::io::Result<()> {
    writeln!(out, "label,dim,casimir,weight")?;
    for xi in labels {
        writeln!(out, "{},{},{:.17e},{:.17e}", xi.label, xi.dim, xi.casimir, xi.weight)?;
    }
    Ok(())
}

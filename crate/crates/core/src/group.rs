//! Charts, group law, and normalized Haar product rules for `T^n`, SU(2), SU(3).
//!
//! Points carry a chart tuple, a defining matrix, or both; whichever is
//! missing is filled in lazily on first access. Quadrature rules are stored
//! as tensor products of one-dimensional axes, so even an 8-dimensional
//! SU(3) rule costs a few hundred bytes until nodes are decoded.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_group, Error, Result};
use crate::linalg::{c, CMat, C64};

const TWO_PI: f64 = 2.0 * PI;
const CHART_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupSpec {
    Torus { n: usize },
    Su2,
    Su3,
}

impl GroupSpec {
    pub fn torus(n: usize) -> Self {
        assert!(n >= 1, "torus dimension must be at least 1");
        GroupSpec::Torus { n }
    }

    /// Dimension of the group manifold.
    pub fn dim(&self) -> usize {
        match *self {
            GroupSpec::Torus { n } => n,
            GroupSpec::Su2 => 3,
            GroupSpec::Su3 => 8,
        }
    }

    /// Size of the defining matrix; `None` for tori.
    pub fn matrix_size(&self) -> Option<usize> {
        match self {
            GroupSpec::Torus { .. } => None,
            GroupSpec::Su2 => Some(2),
            GroupSpec::Su3 => Some(3),
        }
    }

    pub fn chart_len(&self) -> usize {
        self.dim()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Torus { n: 0 } => Err(Error::InvalidArgument("torus dimension must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn chart_names(&self) -> Vec<String> {
        match *self {
            GroupSpec::Torus { n } => (1..=n).map(|i| format!("x{i}")).collect(),
            GroupSpec::Su2 => vec!["t".into(), "nu".into(), "s".into()],
            GroupSpec::Su3 => ["theta1", "theta2", "theta3", "phi1", "phi2", "phi3", "phi4", "phi5"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Torus { n } => write!(f, "T^{n}"),
            GroupSpec::Su2 => write!(f, "SU(2)"),
            GroupSpec::Su3 => write!(f, "SU(3)"),
        }
    }
}

/// A point of one of the supported groups.
#[derive(Clone)]
pub struct GroupPoint {
    group: GroupSpec,
    chart: OnceLock<Vec<f64>>,
    matrix: OnceLock<CMat>,
}

impl fmt::Debug for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupPoint")
            .field("group", &self.group)
            .field("chart", &self.chart.get())
            .field("matrix", &self.matrix.get())
            .finish()
    }
}

impl GroupPoint {
    fn from_chart_unchecked(group: GroupSpec, chart: Vec<f64>) -> Self {
        let p = GroupPoint { group, chart: OnceLock::new(), matrix: OnceLock::new() };
        let _ = p.chart.set(chart);
        p
    }

    fn from_matrix_unchecked(group: GroupSpec, matrix: CMat) -> Self {
        let p = GroupPoint { group, chart: OnceLock::new(), matrix: OnceLock::new() };
        let _ = p.matrix.set(matrix);
        p
    }

    /// Torus point; coordinates are reduced mod 1 into `[0, 1)`.
    pub fn torus(coords: &[f64]) -> Self {
        let n = coords.len();
        GroupPoint::from_chart_unchecked(GroupSpec::torus(n), coords.iter().map(|&x| wrap_unit(x)).collect())
    }

    /// A matrix-group point from its defining matrix. The matrix must be
    /// special unitary within `1e-10`.
    pub fn from_matrix(group: GroupSpec, matrix: CMat) -> Result<Self> {
        let size = group
            .matrix_size()
            .ok_or_else(|| Error::Unsupported(format!("{group} points have no defining matrix")))?;
        if matrix.shape() != (size, size) {
            return Err(Error::ShapeMismatch(format!("{group} needs a {size}x{size} matrix")));
        }
        let defect = crate::linalg::unitarity_defect(&matrix);
        let det = crate::linalg::det(&matrix);
        if defect > 1e-10 || (det - c(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Domain(format!("matrix is not special unitary (defect {defect:e}, det {det})")));
        }
        Ok(GroupPoint::from_matrix_unchecked(group, matrix))
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    /// Chart coordinates, recovered from the matrix on first use if needed.
    pub fn chart(&self) -> &[f64] {
        self.chart.get_or_init(|| {
            let m = self.matrix.get().expect("point has neither chart nor matrix");
            match self.group {
                GroupSpec::Su2 => su2_chart_of(m),
                GroupSpec::Su3 => su3_chart_of(m),
                GroupSpec::Torus { .. } => unreachable!("torus points always carry a chart"),
            }
        })
    }

    /// Defining matrix; `None` on tori.
    pub fn matrix(&self) -> Option<&CMat> {
        match self.group {
            GroupSpec::Torus { .. } => None,
            GroupSpec::Su2 => Some(self.matrix.get_or_init(|| {
                let ch = self.chart.get().expect("point has neither chart nor matrix");
                su2_matrix(ch[0], ch[1], ch[2])
            })),
            GroupSpec::Su3 => Some(self.matrix.get_or_init(|| {
                let ch = self.chart.get().expect("point has neither chart nor matrix");
                su3_matrix(&[ch[0], ch[1], ch[2]], &[ch[3], ch[4], ch[5], ch[6], ch[7]])
            })),
        }
    }

    pub(crate) fn su2_matrix_ref(&self) -> &CMat {
        self.matrix().expect("SU(2) point")
    }
}

fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

pub fn identity(group: GroupSpec) -> GroupPoint {
    GroupPoint::from_chart_unchecked(group, vec![0.0; group.chart_len()])
}

fn su2_matrix(t: f64, nu: f64, s: f64) -> CMat {
    let x1 = (t / 2.0).cos();
    let x2 = nu;
    let r = ((t / 2.0).sin().powi(2) - nu * nu).max(0.0).sqrt();
    let x3 = r * s.cos();
    let x4 = r * s.sin();
    CMat::from_row_slice(2, 2, &[c(x1, x2), c(x3, x4), c(-x3, x4), c(x1, -x2)])
}

fn su2_chart_of(m: &CMat) -> Vec<f64> {
    let x1 = m[(0, 0)].re.clamp(-1.0, 1.0);
    let x2 = m[(0, 0)].im;
    let x3 = m[(0, 1)].re;
    let x4 = m[(0, 1)].im;
    let t = 2.0 * x1.acos();
    let half = (t / 2.0).sin();
    let nu = x2.clamp(-half, half);
    let s = if x3 == 0.0 && x4 == 0.0 { 0.0 } else { wrap_angle(x4.atan2(x3)) };
    vec![t, nu, s]
}

/// The SU(2) point with chart `(t, nu, s)`, `|nu| <= sin(t/2)`, `0 <= t, s <= 2 pi`.
pub fn su2_point(t: f64, nu: f64, s: f64) -> Result<GroupPoint> {
    if !(t.is_finite() && nu.is_finite() && s.is_finite()) {
        return Err(Error::Domain("non-finite SU(2) chart coordinate".into()));
    }
    if !(-CHART_SLACK..=TWO_PI + CHART_SLACK).contains(&t) || !(-CHART_SLACK..=TWO_PI + CHART_SLACK).contains(&s) {
        return Err(Error::Domain(format!("SU(2) angles t={t}, s={s} must lie in [0, 2pi]")));
    }
    let bound = (t / 2.0).sin().abs();
    if nu.abs() > bound + CHART_SLACK {
        return Err(Error::Domain(format!("|nu|={} exceeds sin(t/2)={bound}", nu.abs())));
    }
    Ok(GroupPoint::from_chart_unchecked(GroupSpec::Su2, vec![t, nu, s]))
}

fn expi(a: f64) -> C64 {
    c(a.cos(), a.sin())
}

fn su3_matrix(theta: &[f64; 3], phi: &[f64; 5]) -> CMat {
    let (s1, c1) = theta[0].sin_cos();
    let (s2, c2) = theta[1].sin_cos();
    let (s3, c3) = theta[2].sin_cos();
    let [p1, p2, p3, p4, p5] = *phi;
    let u11 = expi(p1) * (c1 * c2);
    let u12 = expi(p3) * s1;
    let u13 = expi(p4) * (c1 * s2);
    let u21 = expi(-p4 - p5) * (s2 * s3) - expi(p1 + p2 - p3) * (s1 * c2 * c3);
    let u22 = expi(p2) * (c1 * c3);
    let u23 = -expi(-p1 - p5) * (c2 * s3) - expi(p2 - p3 + p4) * (s1 * s2 * c3);
    let u31 = -expi(p1 - p3 + p5) * (s1 * c2 * s3) - expi(-p2 - p4) * (s2 * c3);
    let u32 = expi(p5) * (c1 * s3);
    let u33 = expi(-p1 - p2) * (c2 * c3) - expi(-p3 + p4 + p5) * (s1 * s2 * s3);
    CMat::from_row_slice(3, 3, &[u11, u12, u13, u21, u22, u23, u31, u32, u33])
}

fn su3_chart_of(m: &CMat) -> Vec<f64> {
    let arg = |z: C64| if z.norm() == 0.0 { 0.0 } else { wrap_angle(z.arg()) };
    let theta1 = m[(0, 1)].norm().clamp(0.0, 1.0).asin();
    let theta2 = m[(0, 2)].norm().atan2(m[(0, 0)].norm());
    let theta3 = m[(2, 1)].norm().atan2(m[(1, 1)].norm());
    vec![
        theta1,
        theta2,
        theta3,
        arg(m[(0, 0)]),
        arg(m[(1, 1)]),
        arg(m[(0, 1)]),
        arg(m[(0, 2)]),
        arg(m[(2, 1)]),
    ]
}

/// The SU(3) point with Bronzan angles `theta in [0, pi/2]^3`, `phi in [0, 2pi]^5`.
pub fn su3_point(theta: [f64; 3], phi: [f64; 5]) -> Result<GroupPoint> {
    for (i, &th) in theta.iter().enumerate() {
        if !th.is_finite() || !(-CHART_SLACK..=PI / 2.0 + CHART_SLACK).contains(&th) {
            return Err(Error::Domain(format!("theta{} = {th} outside [0, pi/2]", i + 1)));
        }
    }
    for (i, &p) in phi.iter().enumerate() {
        if !p.is_finite() || !(-CHART_SLACK..=TWO_PI + CHART_SLACK).contains(&p) {
            return Err(Error::Domain(format!("phi{} = {p} outside [0, 2pi]", i + 1)));
        }
    }
    let mut chart = theta.to_vec();
    chart.extend_from_slice(&phi);
    Ok(GroupPoint::from_chart_unchecked(GroupSpec::Su3, chart))
}

pub fn group_mul(a: &GroupPoint, b: &GroupPoint) -> Result<GroupPoint> {
    check_group(a.group, b.group)?;
    match a.group {
        GroupSpec::Torus { .. } => {
            let sum: Vec<f64> = a.chart().iter().zip(b.chart()).map(|(x, y)| wrap_unit(x + y)).collect();
            Ok(GroupPoint::from_chart_unchecked(a.group, sum))
        }
        _ => {
            let m = a.matrix().unwrap() * b.matrix().unwrap();
            Ok(GroupPoint::from_matrix_unchecked(a.group, m))
        }
    }
}

pub fn group_inv(a: &GroupPoint) -> GroupPoint {
    match a.group {
        GroupSpec::Torus { .. } => {
            let neg: Vec<f64> = a.chart().iter().map(|x| wrap_unit(-x)).collect();
            GroupPoint::from_chart_unchecked(a.group, neg)
        }
        _ => GroupPoint::from_matrix_unchecked(a.group, a.matrix().unwrap().adjoint()),
    }
}

/// Right translation `x * exp(s Y)` for a Lie-algebra element `Y`, given its
/// exponential `e = exp(s Y)` as a point.
pub(crate) fn matrix_point(group: GroupSpec, m: CMat) -> GroupPoint {
    GroupPoint::from_matrix_unchecked(group, m)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Legendre P_n and its derivative at z.
    let eval = |z: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, 0.0);
        for k in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
        }
        (p0, n as f64 * (z * p0 - p1) / (z * z - 1.0))
    };
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = eval(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = eval(z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
struct Axis {
    points: Vec<f64>,
    /// Effective weights (quadrature weight times this axis' density factor),
    /// normalized to sum 1.
    weights: Vec<f64>,
}

impl Axis {
    fn new(points: Vec<f64>, raw: Vec<f64>) -> (Self, f64) {
        let mass: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / mass).collect();
        (Axis { points, weights }, mass)
    }
}

/// A normalized Haar product rule.
///
/// Node counts: torus `level^n`; SU(2) `2 level^3`; SU(3) `level^8`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    group: GroupSpec,
    level: usize,
    axes: Vec<Axis>,
    raw_mass: f64,
}

impl QuadratureRule {
    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total mass of the chart density as printed (before normalization).
    ///
    /// For SU(3) this includes the `1/(2 pi^5)` prefactor and should be 1;
    /// for SU(2) the density `sin(t/2) dt dnu ds` carries no prefactor.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    fn decode(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (slot, axis) in idx.iter_mut().zip(&self.axes).rev() {
            let n = axis.points.len();
            *slot = k % n;
            k /= n;
        }
        idx
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.decode(k)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.weights[i])
            .product()
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        let idx = self.decode(k);
        let raw: Vec<f64> = idx.iter().zip(&self.axes).map(|(&i, a)| a.points[i]).collect();
        match self.group {
            GroupSpec::Torus { .. } | GroupSpec::Su3 => raw,
            GroupSpec::Su2 => {
                // axes: theta = t/2, w = nu / sin(theta), s
                let theta = raw[0];
                vec![2.0 * theta, theta.sin() * raw[1], raw[2]]
            }
        }
    }

    pub fn node(&self, k: usize) -> GroupPoint {
        GroupPoint::from_chart_unchecked(self.group, self.coords(k))
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = GroupPoint> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    /// Sum of the normalized weights, accumulated axis by axis.
    pub fn total_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.weights.iter().sum::<f64>()).product()
    }

    /// `sum_k w_k f(x_k)`.
    pub fn integrate<F: Fn(&GroupPoint) -> C64>(&self, f: F) -> C64 {
        (0..self.len()).map(|k| f(&self.node(k)) * self.weight(k)).sum()
    }

    /// CSV with columns `index,<chart names...>,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names = self.group.chart_names();
        writeln!(out, "index,{},weight", names.join(","))?;
        for k in 0..self.len() {
            let coords: Vec<String> = self.coords(k).iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{k},{},{:.17e}", coords.join(","), self.weight(k))?;
        }
        Ok(())
    }
}

/// Normalized Haar product rule at `level >= 1`.
///
/// * Torus: uniform grid, exact for trigonometric polynomials with every
///   frequency component `< level`.
/// * SU(2): midpoint (Gauss-Chebyshev) rule in `t/2`, Gauss-Legendre in the
///   scaled variable `nu / sin(t/2)`, trapezoid with `2 level` points in `s`.
///   Exact for polynomials in the matrix entries and their conjugates of
///   total degree `<= 2 level - 3`.
/// * SU(3): Gauss-Legendre per `theta_i` on `[0, pi/2]`, uniform per `phi_i`,
///   weighted by the Bronzan density `sin t1 cos^3 t1 sin t2 cos t2 sin t3 cos t3 / (2 pi^5)`.
pub fn haar_quadrature(group: GroupSpec, level: usize) -> Result<QuadratureRule> {
    group.validate()?;
    if level == 0 {
        return Err(Error::InvalidArgument("quadrature level must be >= 1".into()));
    }
    let uniform = |n: usize, period: f64| -> (Vec<f64>, Vec<f64>) {
        let h = period / n as f64;
        ((0..n).map(|i| i as f64 * h).collect(), vec![h; n])
    };
    let (axes, raw_mass) = match group {
        GroupSpec::Torus { n } => {
            let axis = Axis {
                points: (0..level).map(|i| i as f64 / level as f64).collect(),
                weights: vec![1.0 / level as f64; level],
            };
            (vec![axis; n], 1.0)
        }
        GroupSpec::Su2 => {
            // sin(t/2) dt dnu ds with t = 2 theta, nu = sin(theta) w:
            // 2 sin^2(theta) dtheta dw ds.
            let h = PI / level as f64;
            let thetas: Vec<f64> = (0..level).map(|i| (i as f64 + 0.5) * h).collect();
            let raw_theta: Vec<f64> = thetas.iter().map(|th| 2.0 * th.sin().powi(2) * h).collect();
            let (a0, m0) = Axis::new(thetas, raw_theta);
            let (wn, ww) = gauss_legendre(level);
            let (a1, m1) = Axis::new(wn, ww);
            let (sp, sw) = uniform(2 * level, TWO_PI);
            let (a2, m2) = Axis::new(sp, sw);
            (vec![a0, a1, a2], m0 * m1 * m2)
        }
        GroupSpec::Su3 => {
            let (gn, gw) = gauss_legendre(level);
            let thetas: Vec<f64> = gn.iter().map(|z| (z + 1.0) * PI / 4.0).collect();
            let base: Vec<f64> = gw.iter().map(|w| w * PI / 4.0).collect();
            let mut axes = Vec::with_capacity(8);
            let mut mass = 1.0 / (2.0 * PI.powi(5));
            let densities: [fn(f64) -> f64; 3] = [
                |t| t.sin() * t.cos().powi(3),
                |t| t.sin() * t.cos(),
                |t| t.sin() * t.cos(),
            ];
            for dens in densities {
                let raw: Vec<f64> = thetas.iter().zip(&base).map(|(&t, &w)| w * dens(t)).collect();
                let (a, m) = Axis::new(thetas.clone(), raw);
                mass *= m;
                axes.push(a);
            }
            for _ in 0..5 {
                let (p, w) = uniform(level, TWO_PI);
                let (a, m) = Axis::new(p, w);
                mass *= m;
                axes.push(a);
            }
            (axes, mass)
        }
    };
    Ok(QuadratureRule { group, level, axes, raw_mass })
}

/// Smallest level whose rule integrates products of the given polynomial
/// degree exactly.
///
/// `degree` counts torus frequency per coordinate, or the total degree in
/// the SU(2) matrix entries (twice-spin units). SU(3) has no exactness
/// statement; the torus-style map is returned.
pub fn resolving_level(group: GroupSpec, degree: u32) -> usize {
    match group {
        GroupSpec::Torus { .. } | GroupSpec::Su3 => degree as usize + 1,
        GroupSpec::Su2 => ((degree as usize + 4) / 2).max(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn identities() {
        assert_eq!(identity(GroupSpec::torus(2)).chart(), &[0.0, 0.0]);
        assert_eq!(identity(GroupSpec::Su2).matrix().unwrap(), &CMat::identity(2, 2));
        assert_eq!(identity(GroupSpec::Su3).matrix().unwrap(), &CMat::identity(3, 3));
    }

    #[test]
    fn su2_half_turn() {
        let g = su2_point(PI, 0.0, 0.0).unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(max_abs_diff(g.matrix().unwrap(), &expected) < 1e-15);
    }

    #[test]
    fn su2_rejects_outside_domain() {
        assert!(matches!(su2_point(0.2, 0.5, 0.0), Err(Error::Domain(_))));
        assert!(su2_point(7.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn su3_rejects_outside_domain() {
        assert!(su3_point([2.0, 0.0, 0.0], [0.0; 5]).is_err());
        assert!(su3_point([0.0; 3], [0.0, 0.0, -1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn torus_addition_wraps() {
        let a = GroupPoint::torus(&[0.3]);
        let b = GroupPoint::torus(&[0.9]);
        let s = group_mul(&a, &b).unwrap();
        assert!((s.chart()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_groups_are_rejected() {
        let a = GroupPoint::torus(&[0.3]);
        let b = identity(GroupSpec::Su2);
        assert!(matches!(group_mul(&a, &b), Err(Error::GroupMismatch { .. })));
    }

    #[test]
    fn su2_chart_recovery_roundtrips() {
        let g = su2_point(2.1, 0.3, 4.0).unwrap();
        let h = identity(GroupSpec::Su2);
        let prod = group_mul(&g, &h).unwrap();
        let ch = prod.chart();
        assert!((ch[0] - 2.1).abs() < 1e-12 && (ch[1] - 0.3).abs() < 1e-12 && (ch[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn su3_chart_recovery_roundtrips() {
        let g = su3_point([0.3, 0.7, 1.1], [0.5, 1.5, 2.5, 3.5, 4.5]).unwrap();
        let m = g.matrix().unwrap().clone();
        let back = GroupPoint::from_matrix(GroupSpec::Su3, m.clone()).unwrap();
        let rebuilt = su3_point(
            [back.chart()[0], back.chart()[1], back.chart()[2]],
            [back.chart()[3], back.chart()[4], back.chart()[5], back.chart()[6], back.chart()[7]],
        )
        .unwrap();
        assert!(max_abs_diff(rebuilt.matrix().unwrap(), &m) < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn torus_rule_is_uniform() {
        let r = haar_quadrature(GroupSpec::torus(1), 8).unwrap();
        assert_eq!(r.len(), 8);
        assert!((0..8).all(|k| r.weight(k) == 1.0 / 8.0));
    }

    #[test]
    fn su2_rule_masses() {
        for level in 1..6 {
            let r = haar_quadrature(GroupSpec::Su2, level).unwrap();
            assert_eq!(r.len(), 2 * level.pow(3));
            assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        // The printed density has total mass 4 pi^2 over t, s in [0, 2 pi].
        let r = haar_quadrature(GroupSpec::Su2, 4).unwrap();
        assert!((r.raw_mass() - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = haar_quadrature(GroupSpec::Su2, 1).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,t,nu,s,weight");
        assert_eq!(lines.len(), 1 + r.len());
    }
}

//! Fredholm index by heat traces, kernel counting, and the symbol density,
//! plus order reduction, trace via symbol, and cutoff sweeps.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::dual::{expand_labels, Cutoff, IrrepLabel, Label};
use crate::error::{check_group, Error, Result};
use crate::galerkin::cache::GalerkinCache;
use crate::galerkin::{adjoint, assemble_truncated, compose, index_codomain, GalerkinOperator, PeterWeylBasis};
use crate::group::{haar_quadrature, resolving_level, GroupSpec, QuadratureRule};
use crate::linalg::{c, hermitian_eigenvalues, is_hermitian, matmul, singular_values, CMat, C64};
use crate::operator::OperatorSpec;
use crate::symbol::{symbol_of_operator, true_composition, MatrixSymbol};

/// Rows whose heat trace and kernel count differ by more than this are unstable.
pub const STABILITY_TOL: f64 = 1e-6;
/// Density and kernel count differing by more than this raise the discrepancy flag.
pub const DISCREPANCY_TOL: f64 = 1e-6;
/// Spectral gaps below this make a kernel count marginal.
pub const MARGINAL_GAP: f64 = 1e3;

/// `tr exp(-gamma M^* M) - tr exp(-gamma M M^*)`.
pub fn heat_trace_index(m: &CMat, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let mh = m.adjoint();
    let q_side = hermitian_eigenvalues(&matmul(&mh, m));
    let p_side = hermitian_eigenvalues(&matmul(m, &mh));
    let sum = |ev: &[f64]| ev.iter().map(|&l| (-gamma * l).exp()).sum::<f64>();
    let v = sum(&q_side) - sum(&p_side);
    if !v.is_finite() {
        return Err(Error::Numerical("heat trace is not finite".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCount {
    pub index: i64,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest retained over largest discarded singular value; `None` when
    /// nothing was discarded.
    pub gap: Option<f64>,
    pub marginal: bool,
}

/// `dim ker M - dim ker M^*` from one SVD, discarding singular values
/// `<= rel_tol * sigma_max`.
pub fn kernel_count_index(m: &CMat, rel_tol: f64) -> Result<KernelCount> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let (p, q) = m.shape();
    let sv = singular_values(m);
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank = if sigma_max == 0.0 { 0 } else { sv.iter().filter(|&&s| s > rel_tol * sigma_max).count() };
    let gap = if rank > 0 && rank < sv.len() {
        Some(if sv[rank] == 0.0 { f64::INFINITY } else { sv[rank - 1] / sv[rank] })
    } else {
        None
    };
    Ok(KernelCount {
        index: q as i64 - p as i64,
        dim_ker: q - rank,
        dim_coker: p - rank,
        rank,
        sigma_max,
        gap,
        marginal: gap.is_some_and(|g| g < MARGINAL_GAP),
    })
}

/// `e^{-gamma h}` for Hermitian `h`.
fn hermitian_exp(h: &CMat, gamma: f64) -> CMat {
    let n = h.nrows();
    if n == 1 {
        return CMat::from_element(1, 1, c((-gamma * h[(0, 0)].re).exp(), 0.0));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| c((-gamma * l).exp(), 0.0)));
    &eig.eigenvectors * CMat::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCell {
    pub node: usize,
    pub label: Label,
    #[serde(skip)]
    pub matrix: CMat,
    /// `d_xi Tr` of the matrix (real part).
    pub trace: f64,
}

/// `e^{-gamma s* s} - e^{-gamma s s*}` per node and label.
#[derive(Debug, Clone, Serialize)]
pub struct IndexDensity {
    pub gamma: f64,
    pub cells: Vec<DensityCell>,
}

impl IndexDensity {
    /// CSV with columns `node,label,trace`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,label,trace")?;
        for cell in &self.cells {
            writeln!(out, "{},{},{:.16e}", cell.node, cell.label, cell.trace)?;
        }
        Ok(())
    }
}

/// Quadrature over the grid of `sum d_xi Tr[e^{-gamma s_* s} - e^{-gamma s s_*}]`
/// with `s = sigma_a(x, xi)` and `s_* = sigma_a_star(x, xi)`.
pub fn density_route_index(
    sigma_a: &MatrixSymbol,
    sigma_a_star: &MatrixSymbol,
    gamma: f64,
    labels: &[IrrepLabel],
    grid: &QuadratureRule,
) -> Result<(f64, IndexDensity)> {
    check_group(sigma_a.group, sigma_a_star.group)?;
    check_group(sigma_a.group, grid.group())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let mut cells = Vec::with_capacity(grid.len() * labels.len());
    let mut total = 0.0;
    for (k, x) in grid.nodes().enumerate() {
        let mut at_node = 0.0;
        for xi in labels {
            let s = sigma_a.eval(&x, xi)?;
            let s_star = sigma_a_star.eval(&x, xi)?;
            let left = &s_star * &s;
            let right = &s * &s_star;
            if !is_hermitian(&left, 1e-8) || !is_hermitian(&right, 1e-8) {
                return Err(Error::Numerical(format!("non-Hermitian symbol product at node {k}, label {xi}")));
            }
            let m = hermitian_exp(&left, gamma) - hermitian_exp(&right, gamma);
            let tr = m.trace().re * xi.dim as f64;
            if !tr.is_finite() {
                return Err(Error::Numerical(format!("non-finite density at node {k}, label {xi}")));
            }
            at_node += tr;
            cells.push(DensityCell { node: k, label: xi.label.clone(), matrix: m, trace: tr });
        }
        total += grid.weight(k) * at_node;
    }
    Ok((total, IndexDensity { gamma, cells }))
}

/// `Lambda_{-m} A` at finite rank on `domain`.
pub fn order_reduce(sigma: &MatrixSymbol, domain: &PeterWeylBasis, min_level: Option<usize>) -> Result<GalerkinOperator> {
    let codomain = index_codomain(sigma, domain)?;
    let a = assemble_truncated(sigma, domain, &codomain, min_level)?;
    let lam = assemble_truncated(&MatrixSymbol::lambda(sigma.group, -sigma.order), &codomain, &codomain, min_level)?;
    compose(&lam, &a)
}

/// `sum_k w_k sum_xi d_xi Tr sigma(x_k, xi)`.
pub fn trace_via_symbol(sigma: &MatrixSymbol, labels: &[IrrepLabel], grid: &QuadratureRule) -> Result<C64> {
    check_group(sigma.group, grid.group())?;
    if sigma.order >= -(sigma.group.dim() as f64) {
        log::warn!(
            "trace of a symbol of order {} >= -dim G = -{}: the band sum need not converge",
            sigma.order,
            sigma.group.dim()
        );
    }
    let mut acc = c(0.0, 0.0);
    if sigma.is_invariant() {
        for xi in labels {
            acc += sigma.eval_invariant(xi)?.trace() * xi.dim as f64;
        }
        return Ok(acc * grid.total_weight());
    }
    for (k, x) in grid.nodes().enumerate() {
        let mut s = c(0.0, 0.0);
        for xi in labels {
            s += sigma.eval(&x, xi)?.trace() * xi.dim as f64;
        }
        acc += s * grid.weight(k);
    }
    Ok(acc)
}

/// The symbol of `A^*` on `labels`, read off the adjoint of a Galerkin
/// matrix built by `build` on a domain wide enough for exact columns.
pub fn extract_adjoint_symbol<F>(group: GroupSpec, x_bandwidth: u32, labels: &[IrrepLabel], build: F) -> Result<MatrixSymbol>
where
    F: Fn(&PeterWeylBasis) -> Result<GalerkinOperator>,
{
    let big = PeterWeylBasis::from_labels(group, expand_labels(group, labels, 2 * x_bandwidth))?;
    let g = build(&big)?;
    if let Some(xi) = labels.iter().find(|xi| g.codomain.position(xi).is_none()) {
        return Err(Error::BandExhausted(format!("adjoint extraction: codomain misses {xi}")));
    }
    let g_star = adjoint(&g);
    let top = labels.iter().map(|x| x.degree()).max().unwrap_or(0);
    let x_band = match group {
        GroupSpec::Torus { .. } => x_bandwidth,
        _ if x_bandwidth == 0 => 0,
        _ => 2 * top + x_bandwidth,
    };
    let level = resolving_level(group, (top + g_star.domain.max_degree()).max(2 * x_band));
    let grid = Arc::new(haar_quadrature(group, level)?);
    let t_in = g_star.domain.sample(&grid)?;
    let t_out = g_star.codomain.sample(&grid)?;
    let t_in_h = t_in.adjoint();
    let weights = grid.weights();
    let apply = |f: &crate::fourier::SampledFunction| -> Result<crate::fourier::SampledFunction> {
        let wf = CMat::from_iterator(f.values.len(), 1, f.values.iter().zip(&weights).map(|(v, w)| v * *w));
        let v = matmul(&t_in_h, &wf);
        let out = matmul(&t_out, &matmul(&g_star.matrix, &v));
        crate::fourier::SampledFunction::new(f.rule.clone(), out.iter().copied().collect())
    };
    symbol_of_operator(apply, grid.clone(), labels, x_band)
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexRow {
    pub cutoff: Cutoff,
    pub gamma: f64,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub heat_trace: Option<f64>,
    pub kernel_count: Option<i64>,
    pub dim_ker: Option<usize>,
    pub dim_coker: Option<usize>,
    pub density_route: Option<f64>,
    pub spectral_gap: Option<f64>,
    pub marginal: bool,
    /// `|density - kernel_count| > DISCREPANCY_TOL`.
    pub discrepancy: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub operator: OperatorSpec,
    pub group: GroupSpec,
    pub order_reduced: bool,
    pub rel_tol: f64,
    pub rows: Vec<IndexRow>,
    pub verdict: Verdict,
    pub marginal: bool,
    pub discrepancy: bool,
}

impl IndexReport {
    /// One row per `(cutoff, gamma)` cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "cutoff,gamma,domain_dim,codomain_dim,heat_trace,kernel_count,dim_ker,dim_coker,density_route,spectral_gap,marginal,discrepancy"
        )?;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let i = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
        let u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let cut = match r.cutoff {
                Cutoff::Weight(w) => format!("weight:{w}"),
                Cutoff::Band { band } => format!("band:{band}"),
            };
            writeln!(
                out,
                "{cut},{:.16e},{},{},{},{},{},{},{},{},{},{}",
                r.gamma,
                r.domain_dim,
                r.codomain_dim,
                f(r.heat_trace),
                i(r.kernel_count),
                u(r.dim_ker),
                u(r.dim_coker),
                f(r.density_route),
                f(r.spectral_gap),
                r.marginal,
                r.discrepancy
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub rel_tol: f64,
    pub quadrature_level: Option<usize>,
    pub cache: Option<GalerkinCache>,
    /// Replace `A` by `Lambda_{-m} A` before computing the index.
    pub order_reduce: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepStats {
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub assembly_seconds: f64,
    pub linear_algebra_seconds: f64,
    pub density_seconds: f64,
}

fn reduced_symbol(op: &OperatorSpec, group: GroupSpec, order_reduce: bool) -> Result<MatrixSymbol> {
    let sigma = op.symbol(group)?;
    if order_reduce {
        Ok(true_composition(&MatrixSymbol::lambda(group, -sigma.order), &sigma)?.with_order(0.0))
    } else {
        Ok(sigma)
    }
}

fn build(op: &OperatorSpec, group: GroupSpec, domain: &PeterWeylBasis, opts: &SweepOptions) -> Result<GalerkinOperator> {
    let g = op.galerkin(group, domain, opts.quadrature_level)?;
    if !opts.order_reduce {
        return Ok(g);
    }
    let lam = assemble_truncated(&MatrixSymbol::lambda(group, -op.order()), &g.codomain, &g.codomain, opts.quadrature_level)?;
    compose(&lam, &g)
}

fn cached_build(
    op: &OperatorSpec,
    group: GroupSpec,
    domain: &PeterWeylBasis,
    opts: &SweepOptions,
    stats: &mut SweepStats,
) -> Result<GalerkinOperator> {
    let Some(cache) = &opts.cache else {
        return build(op, group, domain, opts);
    };
    let fingerprint = format!("{}:{}:{:?}", op.fingerprint(group), opts.order_reduce, opts.quadrature_level);
    let key = GalerkinCache::key(group, domain, &fingerprint);
    match cache.load(&key) {
        Ok(Some(g)) => {
            stats.cache_hits += 1;
            return Ok(g);
        }
        Ok(None) => {}
        Err(e) => log::warn!("ignoring unreadable cache entry: {e}"),
    }
    stats.cache_misses += 1;
    let g = build(op, group, domain, opts)?;
    cache.store(&key, &g, &fingerprint)?;
    Ok(g)
}

/// All three index routes for every `(cutoff, gamma)` cell.
///
/// The verdict is stable when the kernel count agrees across the two
/// largest cutoffs and every heat trace matches its kernel count within
/// [`STABILITY_TOL`]. Failures in one cell are recorded in that row.
pub fn stabilization_sweep(
    op: &OperatorSpec,
    group: GroupSpec,
    cutoffs: &[Cutoff],
    gammas: &[f64],
    opts: &SweepOptions,
) -> Result<(IndexReport, SweepStats)> {
    if cutoffs.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one cutoff and one gamma".into()));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}")));
    }
    op.validate(group)?;
    let rel_tol = if opts.rel_tol > 0.0 { opts.rel_tol } else { 1e-10 };
    let mut stats = SweepStats::default();
    let mut rows = Vec::new();
    let mut counts_per_cutoff: Vec<Option<i64>> = Vec::new();

    let sigma = reduced_symbol(op, group, opts.order_reduce);

    for &cutoff in cutoffs {
        let mut cell_errors = Vec::new();
        let domain = PeterWeylBasis::from_cutoff(group, cutoff)?;

        let t0 = Instant::now();
        let g = cached_build(op, group, &domain, opts, &mut stats);
        stats.assembly_seconds += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let kc = g.as_ref().map_err(|e| e.to_string()).and_then(|g| kernel_count_index(&g.matrix, rel_tol).map_err(|e| e.to_string()));
        let heats: Vec<std::result::Result<f64, String>> = gammas
            .iter()
            .map(|&gamma| match &g {
                Ok(g) => heat_trace_index(&g.matrix, gamma).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            })
            .collect();
        stats.linear_algebra_seconds += t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let densities: Vec<std::result::Result<f64, String>> = match &sigma {
            Err(e) => gammas.iter().map(|_| Err(e.to_string())).collect(),
            Ok(sigma) => {
                let star = extract_adjoint_symbol(group, sigma.x_bandwidth, domain.labels(), |d| build(op, group, d, opts));
                match star {
                    Err(e) => gammas.iter().map(|_| Err(format!("adjoint symbol: {e}"))).collect(),
                    Ok(star) => {
                        let level = resolving_level(group, 4 * sigma.x_bandwidth + 2).max(opts.quadrature_level.unwrap_or(0));
                        match haar_quadrature(group, level) {
                            Err(e) => gammas.iter().map(|_| Err(e.to_string())).collect(),
                            Ok(grid) => gammas
                                .iter()
                                .map(|&gamma| {
                                    density_route_index(sigma, &star, gamma, domain.labels(), &grid)
                                        .map(|(v, _)| v)
                                        .map_err(|e| format!("density: {e}"))
                                })
                                .collect(),
                        }
                    }
                }
            }
        };
        stats.density_seconds += t2.elapsed().as_secs_f64();

        if let Err(e) = &kc {
            cell_errors.push(e.clone());
        }
        counts_per_cutoff.push(kc.as_ref().ok().map(|k| k.dim_ker as i64 - k.dim_coker as i64));
        for (n, &gamma) in gammas.iter().enumerate() {
            let mut errors = cell_errors.clone();
            let heat = match &heats[n] {
                Ok(v) => Some(*v),
                Err(e) => {
                    errors.push(e.clone());
                    None
                }
            };
            let density = match &densities[n] {
                Ok(v) => Some(*v),
                Err(e) => {
                    errors.push(e.clone());
                    None
                }
            };
            errors.dedup();
            let k = kc.as_ref().ok();
            let count = k.map(|k| k.dim_ker as i64 - k.dim_coker as i64);
            rows.push(IndexRow {
                cutoff,
                gamma,
                domain_dim: domain.len(),
                codomain_dim: g.as_ref().map(|g| g.codomain.len()).unwrap_or(0),
                heat_trace: heat,
                kernel_count: count,
                dim_ker: k.map(|k| k.dim_ker),
                dim_coker: k.map(|k| k.dim_coker),
                density_route: density,
                spectral_gap: k.and_then(|k| k.gap),
                marginal: k.is_some_and(|k| k.marginal),
                discrepancy: matches!((density, count), (Some(d), Some(c)) if (d - c as f64).abs() > DISCREPANCY_TOL),
                errors,
            });
        }
    }

    let tail = &counts_per_cutoff[counts_per_cutoff.len().saturating_sub(2)..];
    let counts_agree = tail.iter().all(|c| c.is_some()) && tail.windows(2).all(|w| w[0] == w[1]);
    let heats_agree = rows.iter().all(|r| match (r.heat_trace, r.kernel_count) {
        (Some(h), Some(k)) => (h - k as f64).abs() <= STABILITY_TOL,
        _ => false,
    });
    let verdict = if counts_agree && heats_agree { Verdict::Stable } else { Verdict::Unstable };
    let report = IndexReport {
        operator: op.clone(),
        group,
        order_reduced: opts.order_reduce,
        rel_tol,
        marginal: rows.iter().any(|r| r.marginal),
        discrepancy: rows.iter().any(|r| r.discrepancy),
        rows,
        verdict,
    };
    Ok((report, stats))
}

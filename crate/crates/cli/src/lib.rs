//! Experiment driver behind the `liegroup-index` binary.
//!
//! Every command writes into one output directory:
//! `report.json` (byte-stable for a given config and tool version),
//! `tables/*.csv` and `manifest.json` (timings and cache statistics).
//! The report and each table carry the manifest id, a hash of the
//! config hash, tool version and command.

pub mod config;
pub mod json;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use liegroup_index::dual::{enumerate, write_dual_csv, IrrepLabel};
use liegroup_index::fourier::{fourier_forward, fourier_inverse_sampled, plancherel_norm, FourierCoefficients};
use liegroup_index::galerkin::cache::{GalerkinCache, VerifyOutcome};
use liegroup_index::galerkin::PeterWeylBasis;
use liegroup_index::group::{haar_quadrature, resolving_level, GroupSpec, QuadratureRule};
use liegroup_index::index::{stabilization_sweep, trace_via_symbol, SweepOptions, SweepStats, Verdict};
use liegroup_index::linalg::{c, identity_defect, CMat};
use liegroup_index::symbol::ellipticity_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CACHE_ENV: &str = "LIEGROUP_INDEX_CACHE";

/// Tolerance for the round-trip, Schur and trace checks.
pub const CHECK_TOL: f64 = 1e-8;
/// Tolerance on the total Haar mass.
pub const MASS_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: field `{field}`: {message}", location(*.line, *.column))]
    Config { line: Option<usize>, column: Option<usize>, field: String, message: String },
    #[error(transparent)]
    Core(#[from] liegroup_index::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Process exit status shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The run completed but the result is unstable or a check failed.
    Failed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Plancherel,
    Schur,
    Ellipticity,
    Trace,
    Quadrature,
}

impl std::str::FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "plancherel" => CheckKind::Plancherel,
            "schur" => CheckKind::Schur,
            "ellipticity" => CheckKind::Ellipticity,
            "trace" => CheckKind::Trace,
            "quadrature" => CheckKind::Quadrature,
            _ => return Err(format!("unknown check `{s}` (plancherel, schur, ellipticity, trace, quadrature)")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheAction {
    List,
    Purge,
    Verify,
}

impl std::str::FromStr for CacheAction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "list" => CacheAction::List,
            "purge" => CacheAction::Purge,
            "verify" => CacheAction::Verify,
            _ => return Err(format!("unknown cache action `{s}` (list, purge, verify)")),
        })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimings {
    pub assembly: f64,
    pub linear_algebra: f64,
    pub density: f64,
    pub checks: f64,
    pub write: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub command: String,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub timings_seconds: StageTimings,
    pub cache_dir: Option<String>,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub outputs: Vec<String>,
}

fn manifest_id(config_sha: &str, command: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_sha.as_bytes());
    h.update(b"\0");
    h.update(VERSION.as_bytes());
    h.update(b"\0");
    h.update(command.as_bytes());
    hex::encode(h.finalize())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Where a run writes and which cache it uses.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
}

impl RunPaths {
    /// `--out` beats the config's `output_dir` (default `out`); the cache
    /// environment variable beats the config's `cache_dir`.
    pub fn new(cfg: &ExperimentConfig, base: &Path, out: Option<PathBuf>, env_cache: Option<PathBuf>) -> Self {
        let out_dir = out.unwrap_or_else(|| resolve(base, cfg.output_dir.as_deref().unwrap_or(Path::new("out"))));
        let cache_dir = env_cache.or_else(|| cfg.cache_dir.as_ref().map(|p| resolve(base, p)));
        RunPaths { out_dir, cache_dir }
    }
}

struct Writer {
    dir: PathBuf,
    id: String,
    outputs: Vec<String>,
}

impl Writer {
    fn new(dir: &Path, id: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir.join("tables"))?;
        Ok(Writer { dir: dir.to_path_buf(), id, outputs: Vec::new() })
    }

    /// A CSV table whose first line names the manifest.
    fn table(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# manifest_id={}", self.id)?;
        body(&mut buf)?;
        let rel = format!("tables/{name}.csv");
        fs::write(self.dir.join(&rel), buf)?;
        self.outputs.push(rel);
        Ok(())
    }

    fn report<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        fs::write(self.dir.join("report.json"), json::to_canonical(value)?)?;
        self.outputs.push("report.json".into());
        Ok(())
    }

    fn finish(mut self, mut manifest: RunManifest) -> Result<(), CliError> {
        self.outputs.sort();
        manifest.outputs = self.outputs;
        fs::write(self.dir.join("manifest.json"), json::to_canonical(&manifest)?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct IndexReportFile<'a> {
    manifest_id: &'a str,
    tool_version: &'static str,
    config_sha256: &'a str,
    command: &'static str,
    report: &'a liegroup_index::index::IndexReport,
}

/// Outcome of `index` or `check`, for the caller to report.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: Status,
    pub out_dir: PathBuf,
    pub manifest_id: String,
    pub lines: Vec<String>,
}

pub fn cmd_index(cfg: &ExperimentConfig, paths: &RunPaths) -> Result<RunSummary, CliError> {
    let config_sha = cfg.sha256();
    let id = manifest_id(&config_sha, "index");
    let cache = match &paths.cache_dir {
        Some(d) => Some(GalerkinCache::open(d)?),
        None => None,
    };
    let opts = SweepOptions { rel_tol: cfg.rel_tol, quadrature_level: cfg.quadrature_level, cache, order_reduce: cfg.order_reduce };
    let (report, stats): (_, SweepStats) = stabilization_sweep(&cfg.operator, cfg.group, &cfg.cutoffs, &cfg.gammas, &opts)?;

    let t_write = Instant::now();
    let mut w = Writer::new(&paths.out_dir, id.clone())?;
    w.report(&IndexReportFile { manifest_id: &id, tool_version: VERSION, config_sha256: &config_sha, command: "index", report: &report })?;
    w.table("index", |b| report.write_csv(b))?;
    let largest = *cfg.cutoffs.last().expect("validated non-empty");
    let dual = enumerate(cfg.group, largest)?;
    w.table("dual", |b| write_dual_csv(&dual, b))?;
    let timings = StageTimings {
        assembly: stats.assembly_seconds,
        linear_algebra: stats.linear_algebra_seconds,
        density: stats.density_seconds,
        write: t_write.elapsed().as_secs_f64(),
        ..Default::default()
    };
    w.finish(RunManifest {
        manifest_id: id.clone(),
        command: "index".into(),
        tool: "liegroup-index",
        tool_version: VERSION,
        config_sha256: config_sha,
        timings_seconds: timings,
        cache_dir: paths.cache_dir.as_ref().map(|p| p.display().to_string()),
        cache_hits: stats.cache_hits,
        cache_misses: stats.cache_misses,
        outputs: Vec::new(),
    })?;

    let mut lines = vec![format!("{} on {}: verdict {:?}", report.operator.describe(), report.group, report.verdict)];
    for r in &report.rows {
        lines.push(format!(
            "  {} gamma={} heat={} kernel={} density={}{}",
            r.cutoff,
            r.gamma,
            r.heat_trace.map(|v| format!("{v:.10}")).unwrap_or("-".into()),
            r.kernel_count.map(|v| v.to_string()).unwrap_or("-".into()),
            r.density_route.map(|v| format!("{v:.10}")).unwrap_or("-".into()),
            if r.errors.is_empty() { String::new() } else { format!(" errors: {}", r.errors.join("; ")) }
        ));
    }
    let status = if report.verdict == Verdict::Stable { Status::Ok } else { Status::Failed };
    Ok(RunSummary { status, out_dir: paths.out_dir.clone(), manifest_id: id, lines })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

impl CheckRow {
    fn within(name: String, measured: f64, tolerance: f64, note: String) -> Self {
        CheckRow { pass: measured.is_finite() && measured <= tolerance, name, measured, tolerance, note }
    }
}

#[derive(Serialize)]
struct CheckReportFile<'a> {
    manifest_id: &'a str,
    tool_version: &'static str,
    config_sha256: &'a str,
    command: String,
    check: CheckKind,
    pass: bool,
    rows: &'a [CheckRow],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ellipticity: Vec<liegroup_index::symbol::EllipticityReport>,
}

fn rule_for(cfg: &ExperimentConfig, degree: u32) -> Result<QuadratureRule, CliError> {
    let level = cfg.quadrature_level.unwrap_or_else(|| resolving_level(cfg.group, degree));
    if cfg.group == GroupSpec::Su3 && level > config::SU3_MAX_LEVEL {
        return Err(CliError::Config {
            line: None,
            column: None,
            field: "quadrature_level".into(),
            message: format!("this check needs SU(3) level {level}, above the cap {}", config::SU3_MAX_LEVEL),
        });
    }
    Ok(haar_quadrature(cfg.group, level)?)
}

fn seeded_coefficients(group: GroupSpec, dual: Vec<IrrepLabel>) -> Result<FourierCoefficients, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let entries = dual
        .into_iter()
        .map(|xi| {
            let d = xi.dim;
            let m = CMat::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            (xi, m)
        })
        .collect();
    Ok(FourierCoefficients::new(group, entries)?)
}

fn check_rows(cfg: &ExperimentConfig, which: CheckKind) -> Result<(Vec<CheckRow>, Vec<liegroup_index::symbol::EllipticityReport>), CliError> {
    let mut rows = Vec::new();
    let mut elliptic = Vec::new();
    match which {
        CheckKind::Plancherel => {
            for &cut in &cfg.cutoffs {
                let fc = seeded_coefficients(cfg.group, enumerate(cfg.group, cut)?)?;
                let top = fc.entries().iter().map(|(x, _)| x.degree()).max().unwrap_or(0);
                let rule = Arc::new(rule_for(cfg, 2 * top)?);
                let f = fourier_inverse_sampled(&fc, rule)?;
                let back = fourier_forward(&f, &fc.labels())?;
                rows.push(CheckRow::within(format!("round_trip {cut}"), back.max_abs_diff(&fc), CHECK_TOL, format!("{} labels", fc.entries().len())));
                rows.push(CheckRow::within(format!("plancherel {cut}"), (plancherel_norm(&fc) - f.l2_norm()).abs(), CHECK_TOL, String::new()));
            }
        }
        CheckKind::Schur => {
            for &cut in &cfg.cutoffs {
                let basis = PeterWeylBasis::from_cutoff(cfg.group, cut)?;
                let rule = rule_for(cfg, 2 * basis.max_degree())?;
                let defect = identity_defect(&basis.gram(&rule)?);
                rows.push(CheckRow::within(format!("gram {cut}"), defect, CHECK_TOL, format!("N={} level={}", basis.len(), rule.level())));
            }
        }
        CheckKind::Ellipticity => {
            let sigma = cfg.operator.symbol(cfg.group)?;
            let rule = rule_for(cfg, (2 * sigma.x_bandwidth).max(4))?;
            for &cut in &cfg.cutoffs {
                let rep = ellipticity_check(&sigma, sigma.order, cut, &rule)?;
                let sites: Vec<String> = rep
                    .non_invertible
                    .iter()
                    .take(8)
                    .map(|s| format!("node {} {:?} {}", s.node, s.coords, s.label))
                    .collect();
                let note = if rep.elliptic {
                    format!("C={:.6e}", rep.constant)
                } else {
                    format!("{} non-invertible sites: {}", rep.non_invertible.len(), sites.join("; "))
                };
                rows.push(CheckRow {
                    name: format!("ellipticity {cut}"),
                    measured: rep.constant,
                    tolerance: f64::INFINITY,
                    pass: rep.elliptic,
                    note,
                });
                elliptic.push(rep);
            }
        }
        CheckKind::Trace => {
            let sigma = cfg.operator.symbol(cfg.group)?;
            for &cut in &cfg.cutoffs {
                let basis = PeterWeylBasis::from_cutoff(cfg.group, cut)?;
                let grid = rule_for(cfg, 2 * sigma.x_bandwidth)?;
                let via_symbol = trace_via_symbol(&sigma, basis.labels(), &grid)?;
                let g = cfg.operator.galerkin(cfg.group, &basis, cfg.quadrature_level)?;
                let mut diag = c(0.0, 0.0);
                for (xi, i, j) in basis.entries() {
                    if let (Some(r), Some(col)) = (g.codomain.index_of(xi, i, j), basis.index_of(xi, i, j)) {
                        diag += g.matrix[(r, col)];
                    }
                }
                let scale = via_symbol.norm().max(1.0);
                rows.push(CheckRow::within(
                    format!("trace {cut}"),
                    (via_symbol - diag).norm() / scale,
                    CHECK_TOL,
                    format!("symbol {:.12e} galerkin {:.12e}", via_symbol.re, diag.re),
                ));
            }
        }
        CheckKind::Quadrature => {
            let level = cfg.quadrature_level.unwrap_or(6);
            let rule = rule_for(&ExperimentConfig { quadrature_level: Some(level), ..cfg.clone() }, 0)?;
            rows.push(CheckRow::within(format!("mass level {level}"), (rule.raw_mass() - 1.0).abs(), MASS_TOL, format!("{} nodes", rule.len())));
        }
    }
    Ok((rows, elliptic))
}

pub fn cmd_check(cfg: &ExperimentConfig, which: CheckKind, paths: &RunPaths) -> Result<RunSummary, CliError> {
    let config_sha = cfg.sha256();
    let command = format!("check:{}", serde_json::to_value(which)?.as_str().unwrap_or("?"));
    let id = manifest_id(&config_sha, &command);
    let t0 = Instant::now();
    let (rows, ellipticity) = check_rows(cfg, which)?;
    let checks = t0.elapsed().as_secs_f64();
    let pass = rows.iter().all(|r| r.pass);

    let t_write = Instant::now();
    let mut w = Writer::new(&paths.out_dir, id.clone())?;
    w.report(&CheckReportFile {
        manifest_id: &id,
        tool_version: VERSION,
        config_sha256: &config_sha,
        command: command.clone(),
        check: which,
        pass,
        rows: &rows,
        ellipticity: ellipticity.clone(),
    })?;
    w.table("check", |b| {
        writeln!(b, "name,measured,tolerance,pass,note")?;
        for r in &rows {
            writeln!(b, "{},{:.16e},{:.16e},{},\"{}\"", r.name, r.measured, r.tolerance, r.pass, r.note.replace('"', "'"))?;
        }
        Ok(())
    })?;
    for (i, rep) in ellipticity.iter().enumerate() {
        w.table(&format!("ellipticity_sites_{i}"), |b| rep.write_csv(b))?;
    }
    w.finish(RunManifest {
        manifest_id: id.clone(),
        command,
        tool: "liegroup-index",
        tool_version: VERSION,
        config_sha256: config_sha,
        timings_seconds: StageTimings { checks, write: t_write.elapsed().as_secs_f64(), ..Default::default() },
        cache_dir: None,
        cache_hits: 0,
        cache_misses: 0,
        outputs: Vec::new(),
    })?;
    let lines = rows
        .iter()
        .map(|r| format!("{} {} measured={:.3e} tol={:.1e} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.measured, r.tolerance, r.note))
        .collect();
    Ok(RunSummary { status: if pass { Status::Ok } else { Status::Failed }, out_dir: paths.out_dir.clone(), manifest_id: id, lines })
}

/// Runs a cache action and returns the table it prints.
pub fn cmd_cache(dir: &Path, action: CacheAction) -> Result<(Status, Vec<String>), CliError> {
    let cache = GalerkinCache::existing(dir)?;
    match action {
        CacheAction::List => {
            let mut lines = vec!["key\tgroup\trows\tcols\tlevel\tdescription".to_string()];
            for h in cache.list()? {
                lines.push(format!("{}\t{}\t{}\t{}\t{}\t{}", h.key, h.group, h.rows, h.cols, h.quadrature_level, h.description));
            }
            Ok((Status::Ok, lines))
        }
        CacheAction::Purge => {
            let n = cache.purge()?;
            Ok((Status::Ok, vec![format!("removed {n} entries")]))
        }
        CacheAction::Verify => {
            let outcomes: Vec<VerifyOutcome> = cache.verify()?;
            let bad = outcomes.iter().filter(|o| !o.ok).count();
            let mut lines: Vec<String> = outcomes
                .iter()
                .map(|o| match &o.reason {
                    None => format!("ok\t{}", o.key),
                    Some(r) => format!("CORRUPT\t{}\t{r}", o.key),
                })
                .collect();
            lines.push(format!("{} entries, {bad} corrupt", outcomes.len()));
            Ok((if bad == 0 { Status::Ok } else { Status::Failed }, lines))
        }
    }
}

//! Run configuration, report files and restart checkpoints.

use crate::domain::{Domain, DomainOptions};
use crate::elliptic::CompositeField;
use crate::experiments::{
    run_sweep_checkpointed, sweep_checks, sweep_rates, CheckpointPolicy, ExperimentError, ExperimentRecord, IcSpec,
    NormPlan, RunOutcome, RunProgress, SweepCheck, SweepPlan, SweepRates, SweepReport,
};
use crate::fields::ModeField;
use crate::geometry::CurveKind;
use crate::solver::{SolverState, SplitOptions};
use num_complex::Complex64;
use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_EPS0: f64 = 0.25;
pub const DEFAULT_ZETA: f64 = 0.5;

/// Column order of `records.csv`.
pub const RECORD_COLUMNS: [&str; 19] = [
    "nu",
    "t",
    "step",
    "l2_diff",
    "l4_diff",
    "l8_diff",
    "bdry_vort",
    "bdry_vort_max",
    "kato_integrand",
    "kato_integral",
    "kato_abs_integral",
    "euler_grad_max",
    "gronwall_rhs",
    "viscous_slack",
    "energy_lhs",
    "energy_rhs",
    "a_beta",
    "spectral_tail",
    "resolved",
];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{source_name}: at `{key}` (line {line}, column {column}): {message}")]
    Parse { source_name: String, key: String, line: usize, column: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("plot {0}: {1}")]
    Plot(String, String),
    #[error("checkpoint does not fit the domain: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub curve: CurveKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationBlock {
    pub n_theta: usize,
    pub n_z: usize,
    /// Interior Cartesian spacing.
    pub h: f64,
    /// Fixed step; the run aborts with a suggested step if the CFL limit is hit.
    pub dt: f64,
    #[serde(default = "default_cfl")]
    pub cfl_max: f64,
    /// Wall-layer thickness the z-grid resolves; defaults to `√ν_min`.
    #[serde(default)]
    pub layer: Option<f64>,
    #[serde(default = "default_strip_depth")]
    pub strip_depth: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_cfl() -> f64 {
    0.5
}
fn default_strip_depth() -> f64 {
    1.0
}
fn default_record_every() -> usize {
    10
}

/// One viscosity or a descending list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Viscosity {
    One(f64),
    List(Vec<f64>),
}

impl Viscosity {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Viscosity::One(v) => vec![*v],
            Viscosity::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub nu: Viscosity,
    pub t_end: f64,
    pub ic: IcSpec,
    #[serde(default)]
    pub split: SplitOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsBlock {
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// With `delta0`; both default to depths derived from the chart.
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub sobolev_h: Option<f64>,
}

fn default_eps0() -> f64 {
    DEFAULT_EPS0
}
fn default_zeta() -> f64 {
    DEFAULT_ZETA
}
fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl Default for NormsBlock {
    fn default() -> Self {
        Self {
            eps0: DEFAULT_EPS0,
            rho0: None,
            zeta: DEFAULT_ZETA,
            beta: None,
            lambda: DEFAULT_LAMBDA,
            delta0: None,
            sobolev_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Steps between restart files; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_plots")]
    pub plots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_plots() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir(), checkpoint_every: 0, plots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryBlock,
    pub discretization: DiscretizationBlock,
    pub physics: PhysicsBlock,
    #[serde(default)]
    pub norms: NormsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn invalid(key: &str, message: impl Into<String>) -> IoError {
    IoError::Invalid { key: key.into(), message: message.into() }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.norms;
        if let Some(r) = n.rho0.filter(|r| !(*r > 0.0 && *r < 0.1)) {
            return Err(invalid("norms.rho0", format!("{r} must lie in (0, 1/10)")));
        }
        if !(n.eps0 > 0.0 && n.eps0 <= 0.5) {
            return Err(invalid("norms.eps0", format!("{} must lie in (0, 1/2]", n.eps0)));
        }
        if !(n.lambda > 0.0 && n.lambda < 1.0) {
            return Err(invalid("norms.lambda", format!("{} must lie in (0, 1)", n.lambda)));
        }
        if !(n.zeta > 0.0 && n.zeta < 1.0) {
            return Err(invalid("norms.zeta", format!("{} must lie in (0, 1)", n.zeta)));
        }
        if let Some(b) = n.beta.filter(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(invalid("norms.beta", format!("{b} must be nonnegative")));
        }
        if let Some(d) = n.delta0.filter(|d| !(*d > 0.0)) {
            return Err(invalid("norms.delta0", format!("{d} must be positive")));
        }
        if n.delta0.is_some() != n.rho0.is_some() {
            return Err(invalid("norms.delta0", "delta0 and rho0 must be given together"));
        }
        let nus = self.physics.nu.values();
        if nus.is_empty() {
            return Err(invalid("physics.nu", "no viscosity given"));
        }
        if let Some(v) = nus.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid("physics.nu", format!("{v} is not a positive viscosity")));
        }
        if nus.windows(2).any(|w| w[1] >= w[0]) {
            let mut sorted = nus.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted.dedup();
            return Err(invalid(
                "physics.nu",
                format!("viscosities must be strictly descending; reorder as {sorted:?}"),
            ));
        }
        if !(self.physics.t_end > 0.0 && self.physics.t_end.is_finite()) {
            return Err(invalid("physics.t_end", format!("{} must be positive", self.physics.t_end)));
        }
        let d = &self.discretization;
        if !(d.dt > 0.0 && d.dt <= self.physics.t_end) {
            return Err(invalid("discretization.dt", format!("{} must lie in (0, t_end]", d.dt)));
        }
        if d.n_theta < 4 || d.n_z < 8 {
            return Err(invalid("discretization", format!("grid {}x{} too small", d.n_theta, d.n_z)));
        }
        if !(d.h > 0.0) {
            return Err(invalid("discretization.h", format!("{} must be positive", d.h)));
        }
        if !(d.cfl_max > 0.0) {
            return Err(invalid("discretization.cfl_max", format!("{} must be positive", d.cfl_max)));
        }
        if d.record_every == 0 {
            return Err(invalid("discretization.record_every", "must be at least 1"));
        }
        self.physics.ic.check_curve(&self.geometry.curve).map_err(|e| invalid("physics.ic", e.to_string()))
    }

    pub fn to_plan(&self) -> SweepPlan {
        let d = &self.discretization;
        SweepPlan {
            nus: self.physics.nu.values(),
            t_end: self.physics.t_end,
            curve: self.geometry.curve.clone(),
            ic: self.physics.ic.clone(),
            resolution: DomainOptions {
                n_theta: d.n_theta,
                n_z: d.n_z,
                h: d.h,
                lambda: self.norms.lambda,
                delta0: self.norms.delta0,
                rho0: self.norms.rho0,
                strip_depth: d.strip_depth,
                layer: d.layer,
            },
            dt: d.dt,
            record_every: d.record_every,
            norms: NormPlan {
                eps0: self.norms.eps0,
                zeta: self.norms.zeta,
                beta: self.norms.beta,
                sobolev_h: self.norms.sobolev_h,
            },
            split: self.physics.split,
            cfl_max: d.cfl_max,
            output: Some(self.output.dir.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration; `source_name` labels errors.
pub fn parse_config(text: &str, source_name: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        IoError::Parse {
            source_name: source_name.into(),
            key,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| IoError::Parse {
        source_name: source_name.into(),
        key: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, &path.display().to_string())
}

/// Per-viscosity line of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub nu: f64,
    pub completed: bool,
    pub failure: Option<String>,
    pub rows: usize,
    pub l2_diff_max: f64,
    pub bdry_vort_max: f64,
    pub kato_integral: f64,
    pub energy_excess_max: f64,
    pub a_beta: f64,
    pub resolution_lost_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub note: Option<String>,
    pub per_run: Vec<RunSummary>,
    pub rates: SweepRates,
    pub checks: Vec<SweepCheck>,
}

impl Summary {
    pub fn from_runs(runs: &[RunOutcome]) -> Self {
        let per_run = runs
            .iter()
            .map(|r| {
                let last = r.last();
                RunSummary {
                    nu: r.nu,
                    completed: r.completed,
                    failure: r.failure.clone(),
                    rows: r.records.len(),
                    l2_diff_max: r.l2_diff_max(),
                    bdry_vort_max: last.map_or(0.0, |x| x.bdry_vort_max),
                    kato_integral: last.map_or(0.0, |x| x.kato_integral),
                    energy_excess_max: r.energy_excess_max,
                    a_beta: last.map_or(0.0, |x| x.a_beta),
                    resolution_lost_at: r.resolution_lost_at,
                }
            })
            .collect();
        Summary {
            runs: runs.len(),
            note: runs.is_empty().then(|| "zero runs: no records".to_string()),
            per_run,
            rates: sweep_rates(runs),
            checks: if runs.is_empty() { Vec::new() } else { sweep_checks(runs) },
        }
    }
}

/// Regroups flat records into runs, ordered by descending ν. Energy excess
/// is taken over the recorded rows only.
pub fn runs_from_records(records: &[ExperimentRecord]) -> Vec<RunOutcome> {
    let mut runs: Vec<RunOutcome> = Vec::new();
    for r in records {
        let run = match runs.iter_mut().position(|x| x.nu == r.nu) {
            Some(i) => &mut runs[i],
            None => {
                runs.push(RunOutcome {
                    nu: r.nu,
                    records: Vec::new(),
                    completed: true,
                    failure: None,
                    energy_excess_max: 0.0,
                    resolution_lost_at: None,
                });
                runs.last_mut().expect("just pushed")
            }
        };
        if r.energy_rhs > 0.0 {
            run.energy_excess_max = run.energy_excess_max.max((r.energy_lhs - r.energy_rhs) / r.energy_rhs);
        }
        if !r.resolved && run.resolution_lost_at.is_none() {
            run.resolution_lost_at = Some(r.t);
        }
        run.records.push(r.clone());
    }
    runs.sort_by(|a, b| b.nu.total_cmp(&a.nu));
    runs
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn write_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rd = csv::Reader::from_reader(file);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header != RECORD_COLUMNS {
        return Err(invalid("records.csv", format!("unexpected header {header:?}")));
    }
    Ok(rd.deserialize().collect::<std::result::Result<Vec<ExperimentRecord>, _>>()?)
}

fn emit(runs: &[RunOutcome], dir: &Path, plots: bool) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let records: Vec<ExperimentRecord> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let csv_path = dir.join("records.csv");
    write_csv(&records, &csv_path)?;
    let summary_path = dir.join("summary.json");
    let summary = Summary::from_runs(runs);
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    fs::write(&summary_path, text).map_err(io_err(&summary_path))?;
    let plot_paths = if plots && !records.is_empty() { write_plots(runs, &dir.join("plots"))? } else { Vec::new() };
    Ok(ReportFiles { csv: csv_path, summary: summary_path, plots: plot_paths })
}

/// Writes `records.csv`, `summary.json` and `plots/*.svg` under `dir`.
pub fn write_report(records: &[ExperimentRecord], dir: &Path) -> Result<ReportFiles> {
    emit(&runs_from_records(records), dir, true)
}

/// As [`write_report`], keeping failures and per-step energy data of a sweep.
pub fn write_sweep_report(report: &SweepReport, dir: &Path, plots: bool) -> Result<ReportFiles> {
    emit(&report.runs, dir, plots)
}

/// Re-renders summary and plots from an existing `records.csv`.
pub fn rerender(dir: &Path) -> Result<ReportFiles> {
    let records = read_records(&dir.join("records.csv"))?;
    write_report(&records, dir)
}

type Series = (String, Vec<(f64, f64)>);

fn plot_err(path: &Path) -> impl Fn(String) -> IoError + '_ {
    move |e| IoError::Plot(path.display().to_string(), e)
}

fn bounds(series: &[Series], log: bool) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.1.iter()).filter(|p| !log || (p.0 > 0.0 && p.1 > 0.0));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    let widen = |a: f64, b: f64| -> (f64, f64) {
        if !(a.is_finite() && b.is_finite()) {
            return if log { (0.1, 10.0) } else { (0.0, 1.0) };
        }
        match (log, a == b) {
            (true, true) => (a / 2.0, b * 2.0),
            (true, false) => (a / 1.2, b * 1.2),
            (false, true) => (a - 0.5 * a.abs().max(1e-12), b + 0.5 * b.abs().max(1e-12)),
            (false, false) => (a - 0.05 * (b - a), b + 0.05 * (b - a)),
        }
    };
    (widen(x0, x1), widen(y0, y1))
}

const PALETTE: [RGBColor; 6] = [RED, BLUE, GREEN, MAGENTA, CYAN, BLACK];

fn plot(path: &Path, title: &str, xlabel: &str, ylabel: &str, series: &[Series], log: bool) -> Result<()> {
    let pe = plot_err(path);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| pe(e.to_string()))?;
    let ((x0, x1), (y0, y1)) = bounds(series, log);
    let mut b = ChartBuilder::on(&root);
    b.caption(title, ("sans-serif", 20)).margin(12).x_label_area_size(40).y_label_area_size(70);
    macro_rules! draw {
        ($chart:expr) => {{
            let mut ch = $chart.map_err(|e| pe(e.to_string()))?;
            ch.configure_mesh().x_desc(xlabel).y_desc(ylabel).draw().map_err(|e| pe(e.to_string()))?;
            for (i, (label, pts)) in series.iter().enumerate() {
                let c = PALETTE[i % PALETTE.len()];
                let pts: Vec<(f64, f64)> = pts.iter().copied().filter(|p| !log || (p.0 > 0.0 && p.1 > 0.0)).collect();
                ch.draw_series(LineSeries::new(pts.clone(), c))
                    .map_err(|e| pe(e.to_string()))?
                    .label(label.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
                ch.draw_series(pts.iter().map(|p| Circle::new(*p, 3, c.filled()))).map_err(|e| pe(e.to_string()))?;
            }
            ch.configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| pe(e.to_string()))?;
        }};
    }
    if log {
        draw!(b.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale()));
    } else {
        draw!(b.build_cartesian_2d(x0..x1, y0..y1));
    }
    root.present().map_err(|e| pe(e.to_string()))?;
    Ok(())
}

fn write_plots(runs: &[RunOutcome], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let done: Vec<&RunOutcome> = runs.iter().filter(|r| !r.records.is_empty()).collect();
    let by_nu = |f: &dyn Fn(&RunOutcome) -> f64| -> Vec<(f64, f64)> { done.iter().map(|r| (r.nu, f(r))).collect() };
    let in_time = |f: &dyn Fn(&ExperimentRecord) -> f64| -> Vec<Series> {
        done.iter().map(|r| (format!("nu = {:e}", r.nu), r.records.iter().map(|x| (x.t, f(x))).collect())).collect()
    };
    let last = |r: &RunOutcome| r.last().cloned().expect("nonempty");
    let jobs: Vec<(&str, &str, &str, Vec<Series>, bool)> = vec![
        ("l2_diff_vs_nu", "max_t |u_nu - u|_L2", "nu", vec![("L2".into(), by_nu(&|r| r.l2_diff_max()))], true),
        (
            "bdry_vort_vs_nu",
            "sqrt(nu) |omega_nu|_Linf(boundary)",
            "nu",
            vec![("max over t".into(), by_nu(&|r| last(r).bdry_vort_max))],
            true,
        ),
        (
            "kato_vs_nu",
            "|Kato integral| at T",
            "nu",
            vec![("|K|".into(), by_nu(&|r| last(r).kato_integral.abs()))],
            true,
        ),
        ("l2_diff_vs_t", "|u_nu - u|_L2", "t", in_time(&|x| x.l2_diff), false),
        ("bdry_vort_vs_t", "sqrt(nu) |omega_nu|_Linf(boundary)", "t", in_time(&|x| x.bdry_vort), false),
        ("kato_integral_vs_t", "Kato integral", "t", in_time(&|x| x.kato_integral), false),
    ];
    let mut out = Vec::new();
    for (name, title, xlabel, series, log) in jobs {
        let path = dir.join(format!("{name}.svg"));
        plot(&path, title, xlabel, title, &series, log)?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldData {
    n_theta: usize,
    nz: usize,
    /// Interleaved real and imaginary parts.
    chart: Vec<f64>,
    interior: Vec<f64>,
}

impl FieldData {
    fn of(f: &CompositeField) -> Self {
        Self {
            n_theta: f.chart.n_theta(),
            nz: f.chart.nz(),
            chart: f.chart.modes().iter().flat_map(|c| [c.re, c.im]).collect(),
            interior: f.interior.clone(),
        }
    }

    fn restore(self, dom: &Domain) -> Result<CompositeField> {
        if self.n_theta != dom.n_theta() || self.nz != dom.zgrid().len() {
            return Err(IoError::Checkpoint(format!("grid {}x{}", self.n_theta, self.nz)));
        }
        if self.interior.len() != dom.zero_interior().len() {
            return Err(IoError::Checkpoint(format!("{} interior unknowns", self.interior.len())));
        }
        let modes = self.chart.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let chart = ModeField::from_modes(self.n_theta, dom.period(), dom.zgrid().clone(), modes)
            .map_err(|e| IoError::Checkpoint(e.to_string()))?;
        Ok(CompositeField { chart, interior: self.interior })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    nu: f64,
    t: f64,
    step_index: usize,
    omega: FieldData,
    psi: FieldData,
    forcing_guess: FieldData,
    progress: RunProgress,
}

pub fn checkpoint_path(dir: &Path, nu: f64) -> PathBuf {
    dir.join(format!("checkpoint_nu_{nu:e}.json"))
}

/// Writes the state atomically (temporary file, then rename).
pub fn save_checkpoint(path: &Path, st: &SolverState, progress: &RunProgress) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let cp = Checkpoint {
        nu: st.nu,
        t: st.t,
        step_index: st.step_index,
        omega: FieldData::of(&st.omega),
        psi: FieldData::of(&st.psi),
        forcing_guess: FieldData::of(&st.forcing_guess),
        progress: progress.clone(),
    };
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&cp)?).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, dom: &Domain) -> Result<(SolverState, RunProgress)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let cp: Checkpoint = serde_json::from_slice(&bytes)?;
    let st = SolverState {
        t: cp.t,
        nu: cp.nu,
        step_index: cp.step_index,
        omega: cp.omega.restore(dom)?,
        psi: cp.psi.restore(dom)?,
        forcing_guess: cp.forcing_guess.restore(dom)?,
    };
    Ok((st, cp.progress))
}

/// Runs a configuration and writes its report under `output.dir`.
pub fn run_config(cfg: &RunConfig, threads: Option<usize>, resume: bool) -> Result<(SweepReport, ReportFiles)> {
    cfg.validate()?;
    let plan = cfg.to_plan();
    let policy = CheckpointPolicy {
        dir: cfg.output.dir.join("checkpoints"),
        every: cfg.output.checkpoint_every,
        resume,
    };
    let use_policy = policy.every > 0 || resume;
    let report = run_sweep_checkpointed(&plan, threads, use_policy.then_some(&policy))?;
    let files = write_sweep_report(&report, &cfg.output.dir, cfg.output.plots)?;
    Ok((report, files))
}

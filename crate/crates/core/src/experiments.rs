//! Inviscid-limit sweeps: one shared Euler reference, Navier–Stokes runs for
//! a list of viscosities, and the boundary-vorticity, Kato and Gronwall
//! diagnostics recorded along the way.

use crate::domain::{Domain, DomainError, DomainOptions};
use crate::elliptic::{CompositeField, CoupledOperator, EllipticError};
use crate::geometry::{BoundaryCurve, CurveKind, GeometryError};
use crate::norms::{interior_sobolev, iterative_norm_a, sobolev_sample, AnalyticNormConfig, NormError, NormSnapshot};
use crate::solver::{
    euler_reference, l2_sq, velocity_lp, EulerRun, NavierStokes, SolverError, SolverState, SplitOptions, StepOptions,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Relative spectral energy above which a run counts as under-resolved.
pub const TAIL_LIMIT: f64 = 1e-4;

/// Environment variable selecting the worker count; `0` runs sequentially.
pub const THREADS_ENV: &str = "VORTEXLAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("time grids do not match: {0}")]
    MismatchedGrids(String),
    #[error("rate fit needs at least 3 positive points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Initial vorticity presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    Zero,
    /// `ω₀ = 1 − 2r²` on the unit disk.
    Radial,
    /// `ω₀ = a·Δ[z²e^{−z²}(1 + ½cos x)]` on the flat strip.
    Strip { amplitude: f64 },
    /// `ψ₀ = (1−r²)^p Σ r^m (a cos mθ + b sin mθ)` on the unit disk, one
    /// `[m, a, b]` triple per entry; `p ≥ 2`, and `p ≥ 3` also clears the wall
    /// vorticity.
    Clamped {
        modes: Vec<[f64; 3]>,
        #[serde(default = "default_power")]
        power: u32,
    },
}

fn default_power() -> u32 {
    2
}

impl IcSpec {
    /// Checks that the preset is defined on `curve`.
    pub fn check_curve(&self, curve: &CurveKind) -> Result<()> {
        let unit_disk = matches!(curve, CurveKind::Circle { radius } if (*radius - 1.0).abs() < 1e-12);
        match self {
            IcSpec::Zero => Ok(()),
            IcSpec::Radial | IcSpec::Clamped { .. } if !unit_disk => {
                Err(ExperimentError::InvalidPlan("radial and clamped presets need the unit circle".into()))
            }
            IcSpec::Strip { .. } if !matches!(curve, CurveKind::FlatStrip { .. }) => {
                Err(ExperimentError::InvalidPlan("strip preset needs a flat strip".into()))
            }
            IcSpec::Clamped { modes, power } => {
                if *power < 2 {
                    return Err(ExperimentError::InvalidPlan(format!("clamped power {power} < 2 breaks no-slip")));
                }
                for m in modes {
                    if !(m[0] >= 0.0 && m[0].fract() == 0.0 && m[1].is_finite() && m[2].is_finite()) {
                        return Err(ExperimentError::InvalidPlan(format!("bad clamped mode {m:?}")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Vorticity at physical point `p`.
    pub fn vorticity(&self, p: [f64; 2]) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self {
            IcSpec::Zero => 0.0,
            IcSpec::Radial => 1.0 - 2.0 * (x * x + y * y),
            IcSpec::Strip { amplitude } => {
                let e = (-y * y).exp();
                let f = y * y * e;
                let f2 = (2.0 - 10.0 * y * y + 4.0 * y.powi(4)) * e;
                amplitude * (f2 * (1.0 + 0.5 * x.cos()) - 0.5 * f * x.cos())
            }
            IcSpec::Clamped { modes, power } => {
                let r2 = x * x + y * y;
                let (r, th) = (r2.sqrt(), y.atan2(x));
                let p = *power as i32;
                let pf = p as f64;
                let s = 1.0 - r2;
                // ΔA·H + 2∇A·∇H with A = (1−r²)^p and r∂_rH = mH
                let lap_a = -4.0 * pf * s.powi(p - 1) + 4.0 * pf * (pf - 1.0) * r2 * s.powi(p - 2);
                let cross = -4.0 * pf * s.powi(p - 1);
                modes
                    .iter()
                    .map(|&[m, a, b]| {
                        let h = r.powi(m as i32) * (a * (m * th).cos() + b * (m * th).sin());
                        h * (lap_a + m * cross)
                    })
                    .sum()
            }
        }
    }
}

/// Analytic-norm settings; unset fields follow the domain's chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormPlan {
    pub eps0: f64,
    pub zeta: f64,
    /// Defaults to `ρ₀/(2λ²T)` so the window covers the whole run.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Spacing of the Cartesian sample used for the `H⁴` part.
    #[serde(default)]
    pub sobolev_h: Option<f64>,
}

impl Default for NormPlan {
    fn default() -> Self {
        Self { eps0: 0.25, zeta: 0.5, beta: None, sobolev_h: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// Descending, all positive.
    pub nus: Vec<f64>,
    pub t_end: f64,
    pub curve: CurveKind,
    pub ic: IcSpec,
    /// Grids; an unset `layer` becomes `√ν_min`.
    pub resolution: DomainOptions,
    pub dt: f64,
    /// Steps between output rows.
    pub record_every: usize,
    #[serde(default)]
    pub norms: NormPlan,
    #[serde(default)]
    pub split: SplitOptions,
    #[serde(default = "default_cfl")]
    pub cfl_max: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_cfl() -> f64 {
    0.5
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::InvalidPlan(m));
        if self.nus.is_empty() {
            return bad("nus is empty".into());
        }
        if let Some(nu) = self.nus.iter().find(|nu| !(**nu > 0.0 && nu.is_finite())) {
            return bad(format!("viscosity {nu} is not positive"));
        }
        if self.nus.windows(2).any(|w| w[1] >= w[0]) {
            return bad("nus must be strictly descending".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end {} is not positive", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return bad(format!("dt {} not in (0, t_end]", self.dt));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        self.ic.check_curve(&self.curve)
    }

    /// Number of steps and the step actually taken (`t_end / steps`).
    pub fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }

    pub fn nu_min(&self) -> f64 {
        self.nus.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Builds the shared domain.
    pub fn domain(&self) -> Result<Domain> {
        let mut opts = self.resolution.clone();
        if opts.layer.is_none() {
            opts.layer = Some(self.nu_min().sqrt());
        }
        Ok(Domain::new(BoundaryCurve::new(self.curve.clone())?, &opts)?)
    }

    pub fn norm_config(&self, dom: &Domain) -> AnalyticNormConfig {
        let ch = dom.chart();
        let lambda = ch.lambda();
        let beta = self.norms.beta.unwrap_or(0.5 * ch.rho0() / (lambda * lambda * self.t_end));
        AnalyticNormConfig {
            eps0: self.norms.eps0,
            delta0: ch.delta0(),
            rho: 0.5 * ch.rho0(),
            rho0: ch.rho0(),
            zeta: self.norms.zeta,
            beta,
            lambda,
        }
    }
}

/// One output row of a run. Column order in CSV follows field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub nu: f64,
    pub t: f64,
    pub step: usize,
    /// `‖u_ν − u‖_{L²}`.
    pub l2_diff: f64,
    pub l4_diff: f64,
    pub l8_diff: f64,
    /// `√ν‖ω_ν(t)‖_{L∞(∂Ω)}`.
    pub bdry_vort: f64,
    /// Running max of `bdry_vort` over all steps so far.
    pub bdry_vort_max: f64,
    /// `−∮ν ω_ν (u·τ) dσ`.
    pub kato_integrand: f64,
    pub kato_integral: f64,
    /// `∫₀ᵗ |kato_integrand|`.
    pub kato_abs_integral: f64,
    /// `max_t ‖∇u‖_∞` of the Euler reference.
    pub euler_grad_max: f64,
    /// `e^{2tG}‖u_ν(0) − u(0)‖²`.
    pub gronwall_rhs: f64,
    /// `ν∫₀ᵗ‖ω_E‖²`.
    pub viscous_slack: f64,
    /// `‖u_ν‖² + 2ν∫₀ᵗ‖ω_ν‖²`.
    pub energy_lhs: f64,
    /// `‖u_ν(0)‖²`.
    pub energy_rhs: f64,
    /// Running `A(β)`.
    pub a_beta: f64,
    pub spectral_tail: f64,
    pub resolved: bool,
}

/// Result of one viscosity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub nu: f64,
    pub records: Vec<ExperimentRecord>,
    pub completed: bool,
    pub failure: Option<String>,
    /// `max_t (energy_lhs − energy_rhs)/energy_rhs` over every step.
    pub energy_excess_max: f64,
    pub resolution_lost_at: Option<f64>,
}

impl RunOutcome {
    pub fn last(&self) -> Option<&ExperimentRecord> {
        self.records.last()
    }

    /// `max_t ‖u_ν − u‖_{L²}` over the recorded times.
    pub fn l2_diff_max(&self) -> f64 {
        self.records.iter().map(|r| r.l2_diff).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub plan: SweepPlan,
    pub dt: f64,
    pub euler_grad_max: f64,
    pub runs: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn records(&self) -> impl Iterator<Item = &ExperimentRecord> {
        self.runs.iter().flat_map(|r| r.records.iter())
    }

    pub fn all_completed(&self) -> bool {
        self.runs.iter().all(|r| r.completed)
    }
}

/// Boundary traces sampled on a common time grid.
#[derive(Debug, Clone, Default)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    /// Values at the `N_θ` boundary nodes, one vector per time.
    pub values: Vec<Vec<f64>>,
}

/// `−∮ν ω (u·τ) dσ` by the periodic trapezoid rule.
pub fn kato_integrand(nu: f64, period: f64, omega_trace: &[f64], slip: &[f64]) -> f64 {
    let n = omega_trace.len();
    let s: f64 = omega_trace.iter().zip(slip).map(|(w, u)| w * u).sum();
    -nu * s * period / n as f64
}

/// `−∫₀ᵀ∮ ν ω_ν (u·τ) dσ dt`, trapezoidal in time.
pub fn kato_integral(nu: f64, period: f64, ns: &TraceSeries, euler: &TraceSeries) -> Result<f64> {
    if ns.times.len() != euler.times.len() || ns.values.len() != ns.times.len() || euler.values.len() != euler.times.len() {
        return Err(ExperimentError::MismatchedGrids(format!(
            "{} vs {} samples",
            ns.times.len(),
            euler.times.len()
        )));
    }
    for (a, b) in ns.times.iter().zip(&euler.times) {
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(ExperimentError::MismatchedGrids(format!("t = {a} vs {b}")));
        }
    }
    for (a, b) in ns.values.iter().zip(&euler.values) {
        if a.len() != b.len() || a.is_empty() {
            return Err(ExperimentError::MismatchedGrids(format!("{} vs {} boundary nodes", a.len(), b.len())));
        }
    }
    let k: Vec<f64> = ns.values.iter().zip(&euler.values).map(|(w, u)| kato_integrand(nu, period, w, u)).collect();
    Ok(ns.times.windows(2).zip(k.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum())
}

/// One row of [`stability_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    /// `‖u_ν − u‖²`.
    pub lhs: f64,
    /// `e^{2Gt}(‖u_ν(0)−u(0)‖² + ν∫‖∇u‖² + ∫|K|)`.
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Gronwall chain of the Kato energy argument at each recorded time.
pub fn stability_check(records: &[ExperimentRecord]) -> Vec<StabilityRow> {
    records
        .iter()
        .map(|r| {
            let growth = (2.0 * r.t * r.euler_grad_max).exp();
            let rhs = r.gronwall_rhs + growth * (r.viscous_slack + r.kato_abs_integral);
            let lhs = r.l2_diff * r.l2_diff;
            StabilityRow { t: r.t, lhs, rhs, margin: rhs - lhs, holds: lhs <= rhs }
        })
        .collect()
}

/// Least-squares fit of `log metric = p log ν + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of the exponent.
    pub std_error: f64,
    pub r_squared: f64,
    pub max_residual: f64,
    pub points: usize,
    pub excluded: usize,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(nu, m)| *nu > 0.0 && *m > 0.0 && nu.is_finite() && m.is_finite())
        .map(|(nu, m)| (nu.ln(), m.ln()))
        .collect();
    let excluded = pairs.len() - usable.len();
    if excluded > 0 {
        warn!("fit_rate: excluded {excluded} non-positive or non-finite points");
    }
    let n = usable.len();
    if n < 3 {
        return Err(ExperimentError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res: Vec<f64> = usable.iter().map(|p| p.1 - icpt - slope * p.0).collect();
    let sse: f64 = res.iter().map(|r| r * r).sum();
    Ok(RateFit {
        exponent: slope,
        prefactor: icpt.exp(),
        std_error: (sse / (nf - 2.0) / sxx).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        max_residual: res.iter().map(|r| r.abs()).fold(0.0, f64::max),
        points: n,
        excluded,
    })
}

/// Fraction of chart enstrophy carried by `|α| > N_θ/3`.
pub fn spectral_tail(f: &crate::fields::ModeField) -> f64 {
    let w = f.zgrid().weights();
    let cut = f.n_theta() as i64 / 3;
    let (mut tail, mut total) = (0.0, 0.0);
    for k in 0..f.n_theta() {
        let e: f64 = f.mode(k).iter().zip(w).map(|(c, w)| c.norm_sqr() * w).sum();
        total += e;
        if f.alpha(k).abs() > cut {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Worker count from [`THREADS_ENV`]: `Some(0)` means sequential.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

fn wall_values(dom: &Domain, f: &CompositeField) -> Vec<f64> {
    let nz = dom.zgrid().len();
    let phys = f.chart.to_physical_with(dom.transform());
    (0..dom.n_theta()).map(|i| phys[i * nz]).collect()
}

fn diff_norms(dom: &Domain, a: &CompositeField, b: &CompositeField) -> (f64, f64, f64) {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    (
        velocity_lp(dom, &d, 2.0).sqrt(),
        velocity_lp(dom, &d, 4.0).powf(0.25),
        velocity_lp(dom, &d, 8.0).powf(0.125),
    )
}

/// Where and how often runs write restart files.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    /// Steps between checkpoints; 0 disables writing.
    pub every: usize,
    /// Continue from an existing checkpoint when one is present.
    pub resume: bool,
}

/// Accumulators of one run; together with the solver state this is all a
/// restart needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunProgress {
    pub step: usize,
    pub w0_sq: f64,
    pub e0: f64,
    pub ens_prev: f64,
    pub dissipated: f64,
    pub kato: f64,
    pub kato_abs: f64,
    pub viscous: f64,
    pub k_prev: f64,
    pub bdry_max: f64,
    pub a_beta: f64,
    pub outcome: RunOutcome,
}

struct Shared<'a> {
    plan: &'a SweepPlan,
    dom: &'a Domain,
    euler: &'a EulerRun,
    psi0: &'a CompositeField,
    norm_cfg: AnalyticNormConfig,
    sobolev_h: f64,
    steps: usize,
    dt: f64,
    checkpoints: Option<&'a CheckpointPolicy>,
}

fn a_beta_at(sh: &Shared, st: &SolverState) -> Option<f64> {
    let sample = sobolev_sample(sh.dom, &st.omega, sh.sobolev_h);
    let h4 = interior_sobolev(&sample, 4, &sample.mask).ok()?;
    let snap = NormSnapshot { t: st.t, chart: st.omega_b(sh.dom), h4 };
    iterative_norm_a(&[snap], &sh.norm_cfg).ok().map(|a| a.value)
}

fn empty_outcome(nu: f64) -> RunOutcome {
    RunOutcome { nu, records: Vec::new(), completed: false, failure: None, energy_excess_max: 0.0, resolution_lost_at: None }
}

fn run_one(sh: &Shared, nu: f64) -> RunOutcome {
    match run_into(sh, nu) {
        Ok(out) => out,
        Err((mut out, e)) => {
            warn!("run nu = {nu:e} aborted: {e}");
            out.failure = Some(e.to_string());
            out
        }
    }
}

fn start(sh: &Shared, ns: &NavierStokes, nu: f64) -> Result<(SolverState, RunProgress)> {
    if let Some(cp) = sh.checkpoints.filter(|c| c.resume) {
        let path = crate::cli_io::checkpoint_path(&cp.dir, nu);
        if path.exists() {
            let (st, pr) = crate::cli_io::load_checkpoint(&path, sh.dom)
                .map_err(|e| ExperimentError::InvalidPlan(format!("checkpoint {}: {e}", path.display())))?;
            info!("nu = {nu:e}: resuming at step {}", pr.step);
            return Ok((st, pr));
        }
    }
    let ic = sh.plan.ic.clone();
    let (st, _) = ns.initial_state(&move |p| ic.vorticity(p), &sh.plan.split)?;
    let w0 = diff_norms(sh.dom, &st.psi, sh.psi0).0;
    let pr = RunProgress {
        step: 0,
        w0_sq: w0 * w0,
        e0: velocity_lp(sh.dom, &st.psi, 2.0),
        ens_prev: l2_sq(sh.dom, &st.omega),
        dissipated: 0.0,
        kato: 0.0,
        kato_abs: 0.0,
        viscous: 0.0,
        k_prev: 0.0,
        bdry_max: 0.0,
        a_beta: 0.0,
        outcome: empty_outcome(nu),
    };
    Ok((st, pr))
}

/// Diagnostics of the current step; pushes a record on output steps.
fn observe(sh: &Shared, nu: f64, st: &SolverState, pr: &mut RunProgress) -> Result<()> {
    let dom = sh.dom;
    let step = pr.step;
    if step > 0 {
        let ens = l2_sq(dom, &st.omega);
        pr.dissipated += 0.5 * sh.dt * (ens + pr.ens_prev);
        pr.ens_prev = ens;
        pr.viscous += 0.5 * sh.dt * nu * (sh.euler.enstrophy[step] + sh.euler.enstrophy[step - 1]);
    }
    let trace = wall_values(dom, &st.omega);
    let k = kato_integrand(nu, dom.period(), &trace, &sh.euler.wall_slip[step]);
    if step > 0 {
        pr.kato += 0.5 * sh.dt * (k + pr.k_prev);
        pr.kato_abs += 0.5 * sh.dt * (k.abs() + pr.k_prev.abs());
    }
    pr.k_prev = k;
    let bdry = nu.sqrt() * trace.iter().map(|v| v.abs()).fold(0.0, f64::max);
    pr.bdry_max = pr.bdry_max.max(bdry);
    let lhs = velocity_lp(dom, &st.psi, 2.0) + 2.0 * nu * pr.dissipated;
    if pr.e0 > 0.0 {
        pr.outcome.energy_excess_max = pr.outcome.energy_excess_max.max((lhs - pr.e0) / pr.e0);
    }
    if step % sh.plan.record_every != 0 && step != sh.steps {
        return Ok(());
    }
    let psi_e = sh
        .euler
        .psi_at(step)
        .ok_or_else(|| ExperimentError::MismatchedGrids(format!("no Euler snapshot at step {step}")))?;
    let (l2, l4, l8) = diff_norms(dom, &st.psi, psi_e);
    if let Some(a) = a_beta_at(sh, st) {
        pr.a_beta = pr.a_beta.max(a);
    }
    let tail = spectral_tail(&st.omega.chart);
    let resolved = tail <= TAIL_LIMIT;
    if !resolved && pr.outcome.resolution_lost_at.is_none() {
        warn!("nu = {nu:e}: spectral tail {tail:.2e} at t = {:.4}", st.t);
        pr.outcome.resolution_lost_at = Some(st.t);
    }
    let grad_max = sh.euler.max_grad_u();
    pr.outcome.records.push(ExperimentRecord {
        nu,
        t: st.t,
        step,
        l2_diff: l2,
        l4_diff: l4,
        l8_diff: l8,
        bdry_vort: bdry,
        bdry_vort_max: pr.bdry_max,
        kato_integrand: k,
        kato_integral: pr.kato,
        kato_abs_integral: pr.kato_abs,
        euler_grad_max: grad_max,
        gronwall_rhs: (2.0 * st.t * grad_max).exp() * pr.w0_sq,
        viscous_slack: pr.viscous,
        energy_lhs: lhs,
        energy_rhs: pr.e0,
        a_beta: pr.a_beta,
        spectral_tail: tail,
        resolved,
    });
    Ok(())
}

type Partial = (RunOutcome, ExperimentError);

fn run_into(sh: &Shared, nu: f64) -> std::result::Result<RunOutcome, Partial> {
    let opts = StepOptions { dt: sh.dt, cfl_max: sh.plan.cfl_max, rannacher: true };
    let ns = NavierStokes::new(sh.dom, nu, opts).map_err(|e| (empty_outcome(nu), e.into()))?;
    let (mut st, mut pr) = start(sh, &ns, nu).map_err(|e| (empty_outcome(nu), e))?;
    let fresh = pr.step == 0 && pr.outcome.records.is_empty();
    if fresh {
        observe(sh, nu, &st, &mut pr).map_err(|e| (pr.outcome.clone(), e))?;
    }
    while pr.step < sh.steps {
        if let Err(e) = ns.step(&mut st) {
            return Err((pr.outcome, e.into()));
        }
        pr.step += 1;
        observe(sh, nu, &st, &mut pr).map_err(|e| (pr.outcome.clone(), e))?;
        if let Some(cp) = sh.checkpoints.filter(|c| c.every > 0 && pr.step % c.every == 0) {
            let path = crate::cli_io::checkpoint_path(&cp.dir, nu);
            if let Err(e) = crate::cli_io::save_checkpoint(&path, &st, &pr) {
                warn!("checkpoint {} not written: {e}", path.display());
            }
        }
    }
    pr.outcome.completed = true;
    info!("run nu = {nu:e} finished: {} rows", pr.outcome.records.len());
    Ok(pr.outcome)
}

/// Runs every viscosity of `plan` against one Euler reference using the
/// worker count from [`THREADS_ENV`].
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    run_sweep_with(plan, threads_from_env())
}

/// As [`run_sweep`] with an explicit worker count (`Some(0)` sequential,
/// `None` rayon's default).
pub fn run_sweep_with(plan: &SweepPlan, threads: Option<usize>) -> Result<SweepReport> {
    run_sweep_checkpointed(plan, threads, None)
}

/// As [`run_sweep_with`], writing or resuming from restart files.
pub fn run_sweep_checkpointed(
    plan: &SweepPlan,
    threads: Option<usize>,
    checkpoints: Option<&CheckpointPolicy>,
) -> Result<SweepReport> {
    plan.validate()?;
    let dom = plan.domain()?;
    let (steps, dt) = plan.steps();
    let poisson = CoupledOperator::poisson(&dom)?;
    let w0 = CompositeField::from_fn(&dom, |p| plan.ic.vorticity(p));
    let euler = euler_reference(&dom, &poisson, &w0, dt, plan.t_end, plan.record_every)?;
    info!("Euler reference: {} steps, max |grad u| = {:.4e}", steps, euler.max_grad_u());
    let psi0 = euler.psi_at(0).expect("step 0 snapshot").clone();
    let sh = Shared {
        plan,
        dom: &dom,
        euler: &euler,
        psi0: &psi0,
        norm_cfg: plan.norm_config(&dom),
        sobolev_h: plan.norms.sobolev_h.unwrap_or(plan.resolution.h),
        steps,
        dt,
        checkpoints,
    };
    let runs: Vec<RunOutcome> = match threads {
        Some(0) => plan.nus.iter().map(|&nu| run_one(&sh, nu)).collect(),
        n => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(n) = n {
                b = b.num_threads(n);
            }
            let pool = b.build().map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
            pool.install(|| plan.nus.par_iter().map(|&nu| run_one(&sh, nu)).collect())
        }
    };
    Ok(SweepReport { plan: plan.clone(), dt, euler_grad_max: euler.max_grad_u(), runs })
}

/// Outcome of one sweep-level check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCheck {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn check(name: &str, pass: bool, value: f64, detail: String) -> SweepCheck {
    SweepCheck { name: name.into(), pass, value, detail }
}

/// Fitted exponents of the sweep metrics against ν.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepRates {
    pub l2_diff: Option<RateFit>,
    pub bdry_vort: Option<RateFit>,
    pub kato: Option<RateFit>,
}

pub fn sweep_rates(runs: &[RunOutcome]) -> SweepRates {
    let done: Vec<&RunOutcome> = runs.iter().filter(|r| r.completed).collect();
    let fit = |f: &dyn Fn(&RunOutcome) -> f64| fit_rate(&done.iter().map(|r| (r.nu, f(r))).collect::<Vec<_>>()).ok();
    SweepRates {
        l2_diff: fit(&|r| r.l2_diff_max()),
        bdry_vort: fit(&|r| r.last().map_or(0.0, |x| x.bdry_vort_max)),
        kato: fit(&|r| r.last().map_or(0.0, |x| x.kato_integral.abs())),
    }
}

/// Inviscid-limit checks on a finished sweep.
pub fn sweep_checks(runs: &[RunOutcome]) -> Vec<SweepCheck> {
    let mut out = vec![check(
        "all_runs_completed",
        runs.iter().all(|r| r.completed),
        runs.iter().filter(|r| r.completed).count() as f64,
        runs.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("nu {:e}: {f}", r.nu))).collect::<Vec<_>>().join("; "),
    )];
    let done: Vec<&RunOutcome> = runs.iter().filter(|r| r.completed && !r.records.is_empty()).collect();
    if done.is_empty() {
        return out;
    }
    let last = |r: &RunOutcome| r.last().cloned().expect("nonempty");
    let bv: Vec<f64> = done.iter().map(|r| last(r).bdry_vort_max).collect();
    let (lo, hi) = bv.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let ratio = if lo > 0.0 { hi / lo } else if hi == 0.0 { 1.0 } else { f64::INFINITY };
    out.push(check("bdry_vort_ratio", ratio < 3.0, ratio, format!("max/min of sqrt(nu)|omega|_bdry = {ratio:.4}")));

    let kato: Vec<f64> = done.iter().map(|r| last(r).kato_integral.abs()).collect();
    let decreasing = kato.windows(2).all(|w| w[1] < w[0]);
    out.push(check("kato_decreasing", decreasing, kato.last().copied().unwrap_or(0.0), format!("|kato| by nu: {}", sci(&kato))));
    let frac = if kato[0] > 0.0 { kato[kato.len() - 1] / kato[0] } else { 0.0 };
    out.push(check("kato_small", frac < 0.1, frac, format!("smallest/largest nu |kato| = {frac:.4}")));

    let excess = done.iter().map(|r| r.energy_excess_max).fold(f64::NEG_INFINITY, f64::max);
    out.push(check("energy_inequality", excess < 1e-3, excess, format!("max relative energy excess {excess:.3e}")));

    let worst = done
        .iter()
        .flat_map(|r| stability_check(&r.records))
        .map(|row| row.margin)
        .fold(f64::INFINITY, f64::min);
    out.push(check("gronwall_chain", worst >= 0.0, worst, format!("min margin {worst:.3e}")));

    let l2: Vec<f64> = done.iter().map(|r| r.l2_diff_max()).collect();
    let mono = l2.windows(2).all(|w| w[1] <= w[0]);
    out.push(check("l2_monotone", mono, l2.last().copied().unwrap_or(0.0), format!("max_t L2 diff by nu: {}", sci(&l2))));
    match sweep_rates(runs).l2_diff {
        Some(fit) => out.push(check("l2_rate", fit.exponent >= 0.4, fit.exponent, format!("exponent {:.3} ± {:.3}", fit.exponent, fit.std_error))),
        None => out.push(check("l2_rate", false, f64::NAN, "fewer than 3 positive points".into())),
    }

    let kato_to_zero = kato.windows(2).all(|w| w[1] <= w[0]);
    let final_l2: Vec<f64> = done.iter().map(|r| last(r).l2_diff).collect();
    let implied = !kato_to_zero || final_l2.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    out.push(check("kato_implies_convergence", implied, final_l2.last().copied().unwrap_or(0.0), format!("l2 at T by nu: {}", sci(&final_l2))));
    out
}

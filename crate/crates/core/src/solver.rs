//! Navier–Stokes in vorticity form on the composite domain.
//!
//! The full vorticity is carried on both grids (chart and interior) and the
//! blended views `ω^b = φ^b ω_chart`, `ω^i = (1−φ^b) ω_cart` are derived. The
//! wall condition is `ν(∂_z + |∂_θ|)ω = g − νBω` with `g = ∂_zΦ(0)`,
//! `ΔΦ = u·∇ω`, `Φ|_{∂Ω} = 0`. Time stepping is a Heun predictor–corrector
//! around the Crank–Nicolson Stokes stepper.

use crate::dn::{harmonic_extend, DNDecomposition, DnAssembly};
use crate::domain::Domain;
use crate::elliptic::{
    divide_by_jacobian, physical_trace_to_modes, stream_function, velocity, CompositeField, CoupledOperator,
    EllipticError,
};
use crate::fields::{dealiased_product, ModeField, VelocityField};
use crate::stokes::{chart_mass, SemigroupStepper, StokesError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Allowed relative mismatch of the two representations on the overlap.
pub const OVERLAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("initial data violates no-slip: max |u·τ| = {0:.3e}")]
    IncompatibleData(f64),
    #[error("CFL number {cfl:.3} exceeds the limit; suggested dt = {suggested_dt:.3e}")]
    StepRejected { cfl: f64, suggested_dt: f64 },
    #[error("chart and interior representations drifted apart (relative mismatch {0:.3e})")]
    Desync(f64),
    #[error("Euler reference blew up at t = {t}: |∇u|_∞ = {grad:.3e}")]
    EulerBlowup { t: f64, grad: f64 },
    #[error("non-finite values at t = {0}")]
    NonFinite(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// Time, viscosity and the composite vorticity, plus warm-start guesses of the
/// elliptic solves (kept so that a restart reproduces the run bit for bit).
#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub nu: f64,
    pub step_index: usize,
    pub omega: CompositeField,
    pub psi: CompositeField,
    pub forcing_guess: CompositeField,
}

impl SolverState {
    /// Boundary view `φ^b ω_chart`.
    pub fn omega_b(&self, dom: &Domain) -> ModeField {
        let mut f = self.omega.chart.clone();
        let phi = dom.phi_b();
        let nz = f.nz();
        let closed = dom.curve().is_closed();
        for k in 0..f.n_theta() {
            let m = f.mode_mut(k);
            for j in 0..nz {
                if closed {
                    m[j] *= phi[j][0];
                }
            }
        }
        f
    }

    /// Interior view `(1−φ^b) ω_cart` at the interior unknowns.
    pub fn omega_i(&self, dom: &Domain) -> Vec<f64> {
        match dom.interior() {
            Some(int) => {
                let c = dom.cutoff();
                self.omega.interior.iter().zip(&int.dist).map(|(w, &d)| (1.0 - c.value(d)) * w).collect()
            }
            None => Vec::new(),
        }
    }

    /// Vorticity at a physical point through the partition of unity.
    pub fn sample(&self, dom: &Domain, p: [f64; 2]) -> Option<f64> {
        let f = self.omega.interior_field(dom);
        dom.sample(&self.omega.chart, f.as_ref(), p).ok()
    }
}

/// Options of [`split_initial`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitOptions {
    /// Remove the slip of the initial data by subtracting harmonic modes.
    pub project: bool,
    /// Accepted `max |u·τ| / max |u|` at the wall without projection.
    pub slip_tol: f64,
    /// Target of the projection, same scale.
    pub project_tol: f64,
    /// Warn when the Fourier decay rate of the wall trace is below this.
    pub min_decay_rate: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { project: false, slip_tol: 1e-2, project_tol: 1e-8, min_decay_rate: 0.09 }
    }
}

/// Outcome of the initial split.
#[derive(Debug, Clone, Default)]
pub struct SplitReport {
    /// `max |u|` of the initial velocity.
    pub u_max: f64,
    /// Wall slip `max |u·τ|` before and after projection.
    pub slip_before: f64,
    pub slip_after: f64,
    pub projected_modes: usize,
    pub decay_rate: Option<f64>,
}

/// Weights of the fourth-order one-sided derivative at `z_0` through the
/// first five nodes.
pub fn wall_derivative_weights(z: &[f64]) -> [f64; 5] {
    let mut w = [0.0; 5];
    for (i, wi) in w.iter_mut().enumerate() {
        // d/dz of the Lagrange basis polynomial ℓ_i at z_0
        let denom: f64 = (0..5).filter(|&m| m != i).map(|m| z[i] - z[m]).product();
        let mut num = 0.0;
        for skip in 0..5 {
            if skip == i {
                continue;
            }
            num += (0..5).filter(|&m| m != i && m != skip).map(|m| z[0] - z[m]).product::<f64>();
        }
        *wi = num / denom;
    }
    w
}

/// `∂_zf(0)` per mode.
pub fn wall_derivative(f: &ModeField) -> Vec<Complex64> {
    let w = wall_derivative_weights(f.zgrid().nodes());
    (0..f.n_theta()).map(|k| f.mode(k).iter().zip(&w).map(|(c, w)| c * w).sum()).collect()
}

/// Wall slip `u·τ = ∂_zψ(0)` per mode.
fn wall_slip(psi: &ModeField) -> Vec<Complex64> {
    wall_derivative(psi)
}

fn max_physical(dom: &Domain, modes: &[Complex64]) -> f64 {
    let mut buf = modes.to_vec();
    dom.transform().inverse(&mut buf);
    buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max)
}

/// Samples `ω₀` on both grids, checks the no-slip compatibility of the
/// induced velocity and optionally projects the slip away.
pub fn split_initial(
    dom: &Domain,
    poisson: &CoupledOperator,
    omega0: &dyn Fn([f64; 2]) -> f64,
    nu: f64,
    opts: &SplitOptions,
) -> Result<(SolverState, SplitReport)> {
    if !(nu > 0.0) {
        return Err(StokesError::InviscidNotSupported(nu).into());
    }
    let mut omega = CompositeField::from_fn(dom, omega0);
    let mut psi = stream_function(dom, poisson, &omega, None)?;
    let mut slip = wall_slip(&psi.chart);
    let u0 = velocity(dom, &psi);
    let u_max = max_speed(dom, &u0).max(1e-300);
    let mut report = SplitReport { u_max, slip_before: max_physical(dom, &slip), ..Default::default() };
    report.decay_rate = crate::norms::trace_decay_rate(&omega.chart.trace(), 1e-13);
    if let Some(r) = report.decay_rate {
        if r < opts.min_decay_rate {
            log::warn!("initial vorticity trace decays at rate {r:.3}, below {}", opts.min_decay_rate);
        }
    }
    if opts.project && report.slip_before > opts.project_tol * u_max {
        let n = dom.n_theta();
        let mut basis: Vec<Option<SlipBasis>> = vec![None; n / 2];
        for _ in 0..8 {
            let scale = slip.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for k in 0..n / 2 {
                if slip[k].norm() <= 1e-3 * scale {
                    continue;
                }
                if basis[k].is_none() {
                    basis[k] = Some(SlipBasis::new(dom, poisson, k)?);
                }
                let b = basis[k].as_ref().unwrap();
                let (x, y) = b.coefficients(slip[k]);
                omega.axpy(-x, &b.fields[0]);
                if let Some(sf) = &b.fields.get(1) {
                    omega.axpy(-y, sf);
                }
            }
            psi = stream_function(dom, poisson, &omega, Some(&psi))?;
            slip = wall_slip(&psi.chart);
            report.slip_after = max_physical(dom, &slip);
            if report.slip_after <= opts.project_tol * u_max {
                break;
            }
        }
        report.projected_modes = basis.iter().filter(|b| b.is_some()).count();
        if report.slip_after > opts.project_tol * u_max {
            return Err(SolverError::IncompatibleData(report.slip_after));
        }
    } else {
        report.slip_after = report.slip_before;
        if report.slip_after > opts.slip_tol * u_max {
            return Err(SolverError::IncompatibleData(report.slip_after));
        }
    }
    let state = SolverState {
        t: 0.0,
        nu,
        step_index: 0,
        omega,
        psi,
        forcing_guess: CompositeField::zeros(dom),
    };
    Ok((state, report))
}

/// `max |u|` over both grids.
pub fn max_speed(dom: &Domain, u: &VelocityField) -> f64 {
    let tr = dom.transform();
    let ut = u.u_tau.to_physical_with(tr);
    let un = u.u_n.to_physical_with(tr);
    let mut m = ut.iter().zip(&un).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
    if let (Some(int), Some((u1, u2))) = (dom.interior(), &u.far) {
        for &node in &int.nodes {
            m = m.max(u1.values[node].hypot(u2.values[node]));
        }
    }
    m
}

/// Real correction fields for slot `k` (cos and sin harmonic extensions, or
/// a decaying profile for the zero mode of a chart-only domain) with their
/// wall slip at slot `k`.
#[derive(Debug, Clone)]
struct SlipBasis {
    fields: Vec<CompositeField>,
    slips: Vec<Complex64>,
}

impl SlipBasis {
    fn new(dom: &Domain, poisson: &CoupledOperator, k: usize) -> Result<Self> {
        let n = dom.n_theta();
        let fields = if k == 0 {
            if dom.interior().is_none() {
                let mut f = CompositeField::zeros(dom);
                let z = dom.zgrid().nodes().to_vec();
                for (j, c) in f.chart.mode_mut(0).iter_mut().enumerate() {
                    *c = Complex64::new((-z[j]).exp(), 0.0);
                }
                vec![f]
            } else {
                let mut tr = vec![C0; n];
                tr[0] = Complex64::new(1.0, 0.0);
                vec![harmonic_extend(dom, poisson, &tr)?]
            }
        } else {
            let mut cos = vec![C0; n];
            cos[k] = Complex64::new(0.5, 0.0);
            cos[n - k] = Complex64::new(0.5, 0.0);
            let mut sin = vec![C0; n];
            sin[k] = Complex64::new(0.0, -0.5);
            sin[n - k] = Complex64::new(0.0, 0.5);
            vec![harmonic_extend(dom, poisson, &cos)?, harmonic_extend(dom, poisson, &sin)?]
        };
        let mut slips = Vec::new();
        for f in &fields {
            let ps = stream_function(dom, poisson, f, None)?;
            slips.push(wall_slip(&ps.chart)[k]);
        }
        Ok(Self { fields, slips })
    }

    /// Real coefficients `(x, y)` with `x a + y b = s` at slot `k`.
    fn coefficients(&self, s: Complex64) -> (f64, f64) {
        if self.slips.len() == 1 {
            return (s.re / self.slips[0].re, 0.0);
        }
        let (a, b) = (self.slips[0], self.slips[1]);
        let det = a.re * b.im - a.im * b.re;
        ((s.re * b.im - s.im * b.re) / det, (a.re * s.im - a.im * s.re) / det)
    }
}

/// Summation-by-parts first derivative in z: centred in the interior,
/// one-sided at both ends, skew-adjoint under the trapezoid weights up to the
/// end terms.
pub fn sbp_dz(f: &ModeField) -> ModeField {
    let z = f.zgrid().nodes();
    let nz = f.nz();
    let mut out = f.zeros_like();
    for k in 0..f.n_theta() {
        let m = f.mode(k);
        let o = out.mode_mut(k);
        o[0] = (m[1] - m[0]) / (z[1] - z[0]);
        for j in 1..nz - 1 {
            o[j] = (m[j + 1] - m[j - 1]) / (z[j + 1] - z[j - 1]);
        }
        o[nz - 1] = (m[nz - 1] - m[nz - 2]) / (z[nz - 1] - z[nz - 2]);
    }
    out
}

/// Chart part of `u·∇ω` in skew-symmetric form,
/// `J^{−1}·½[ψ_z ω_θ − ψ_θ Dω + ∂_θ(ψ_z ω) − D(ψ_θ ω)]`, with 3/2-rule
/// products and `D` the summation-by-parts derivative.
pub fn chart_advection(dom: &Domain, psi: &ModeField, omega: &ModeField) -> ModeField {
    let psi_z = psi.d_z();
    let psi_t = psi.d_theta();
    let w_t = omega.d_theta();
    let w_z = sbp_dz(omega);
    let mut jn = dealiased_product(&psi_z, &w_t);
    jn.axpy(-1.0, &dealiased_product(&psi_t, &w_z));
    jn.axpy(1.0, &dealiased_product(&psi_z, omega).d_theta());
    jn.axpy(-1.0, &sbp_dz(&dealiased_product(&psi_t, omega)));
    jn.scale(0.5);
    divide_by_jacobian(dom, &mut jn);
    jn
}

/// Interior part of `u·∇ω` with `(u₁, u₂) = (∂₂ψ, −∂₁ψ)`.
pub fn interior_advection(dom: &Domain, psi: &CompositeField, omega: &CompositeField) -> Vec<f64> {
    match dom.interior() {
        Some(int) => {
            let (px, py) = int.gradient(&psi.interior, &int.edge_values(&psi.chart));
            let (wx, wy) = int.gradient(&omega.interior, &int.edge_values(&omega.chart));
            (0..int.n()).map(|u| py[u] * wx[u] - px[u] * wy[u]).collect()
        }
        None => Vec::new(),
    }
}

/// `u·∇ω` on both grids; interior fringe nodes take the chart value.
pub fn nonlinear_term(dom: &Domain, psi: &CompositeField, omega: &CompositeField) -> CompositeField {
    let chart = chart_advection(dom, &psi.chart, &omega.chart);
    let mut interior = interior_advection(dom, psi, omega);
    if let Some(int) = dom.interior() {
        for &(u, z, th) in &int.fringe {
            interior[u] = chart.eval(z, th);
        }
    }
    CompositeField { chart, interior }
}

/// Wall forcing `g = ∂_zΦ(0)` per mode with `ΔΦ = n`, `Φ|_{∂Ω} = 0`. Returns
/// `g` and `Φ`.
pub fn boundary_forcing_g(
    dom: &Domain,
    poisson: &CoupledOperator,
    n: &CompositeField,
    guess: Option<&CompositeField>,
) -> Result<(Vec<Complex64>, CompositeField)> {
    let zero = vec![C0; dom.n_theta()];
    let (phi, _) = poisson.solve(dom, n, &zero, guess)?;
    Ok((wall_slip(&phi.chart), phi))
}

/// Largest `|u| Δt / h` over both grids. In the chart the θ-direction uses
/// the spectral resolution `1/α_max`, the z-direction the local spacing.
pub fn cfl_number(dom: &Domain, u: &VelocityField, dt: f64) -> f64 {
    let tr = dom.transform();
    let ut = u.u_tau.to_physical_with(tr);
    let un = u.u_n.to_physical_with(tr);
    let z = dom.zgrid().nodes();
    let nz = z.len();
    let n = dom.n_theta();
    let alpha_max = (n / 2) as f64 * 2.0 * std::f64::consts::PI / dom.period();
    let mut c = 0.0f64;
    for i in 0..n {
        let jg = dom.gamma()[i];
        for j in 0..nz {
            let hz = if j == 0 {
                z[1] - z[0]
            } else if j == nz - 1 {
                z[j] - z[j - 1]
            } else {
                (z[j + 1] - z[j]).min(z[j] - z[j - 1])
            };
            let jac = 1.0 + z[j] * jg;
            c = c.max(ut[i * nz + j].abs() * alpha_max / jac.max(1e-12) * dt);
            c = c.max(un[i * nz + j].abs() / hz * dt);
        }
    }
    if let (Some(int), Some((u1, u2))) = (dom.interior(), &u.far) {
        let h = int.grid.h;
        for &node in &int.nodes {
            c = c.max(u1.values[node].abs().max(u2.values[node].abs()) * dt / h);
        }
    }
    c
}

/// Relative mismatch of chart and interior values at interior unknowns that
/// the chart also covers.
#[derive(Debug, Clone)]
pub struct OverlapProbe {
    points: Vec<(usize, f64, f64)>,
}

impl OverlapProbe {
    pub fn new(dom: &Domain) -> Self {
        let mut points = Vec::new();
        if let Some(int) = dom.interior() {
            let zmax = dom.z_max();
            let inner = dom.cutoff().inner();
            for u in 0..int.n() {
                let d = int.dist[u];
                if d >= inner && d < 0.95 * zmax {
                    let (z, th) = dom.locate(int.point(u));
                    points.push((u, z, th));
                }
            }
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mismatch(&self, omega: &CompositeField) -> f64 {
        let scale = omega.max_abs().max(1e-300);
        self.points
            .iter()
            .map(|&(u, z, th)| (omega.chart.eval(z, th) - omega.interior[u]).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Cutoff commutator `[∂_t + u·∇ − νΔ, φ^b]ω` on the chart:
/// `(u·n) φ^b′ ω − ν(φ^b″ + γJ^{−1}φ^b′)ω − 2νφ^b′ ∂_zω`. It is the source
/// by which the views `ω^b` and `ω^i` exchange vorticity; the full field does
/// not see it.
pub fn cutoff_commutator(dom: &Domain, u: &VelocityField, omega: &ModeField, nu: f64) -> ModeField {
    let tr = dom.transform();
    let z = dom.zgrid().nodes();
    let nz = z.len();
    let phi = dom.phi_b();
    let w = omega.to_physical_with(tr);
    let wz = omega.d_z().to_physical_with(tr);
    let un = u.u_n.to_physical_with(tr);
    let mut out = vec![0.0; w.len()];
    for (i, &g) in dom.gamma().iter().enumerate() {
        for j in 0..nz {
            let [_, p1, p2] = phi[j];
            let idx = i * nz + j;
            let lap_phi = p2 + g / (1.0 + z[j] * g) * p1;
            out[idx] = un[idx] * p1 * w[idx] - nu * lap_phi * w[idx] - 2.0 * nu * p1 * wz[idx];
        }
    }
    ModeField::from_physical(&out, omega.n_theta(), omega.period(), omega.zgrid().clone(), tr)
}

/// Time-step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOptions {
    pub dt: f64,
    /// Largest accepted `|u|Δt/h`.
    pub cfl_max: f64,
    /// Replace the first Crank–Nicolson step by two backward-Euler half steps.
    pub rannacher: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { dt: 1e-3, cfl_max: 0.5, rannacher: true }
    }
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub cfl: f64,
    pub sweeps: usize,
    pub overlap: f64,
    /// Chart zero-mode mass change predicted by the wall flux and the source;
    /// exact for chart-only domains.
    pub circulation_budget: f64,
}

/// Navier–Stokes driver: operators and steppers for one `(ν, Δt)`.
#[derive(Debug, Clone)]
pub struct NavierStokes<'a> {
    dom: &'a Domain,
    nu: f64,
    opts: StepOptions,
    poisson: CoupledOperator,
    dn: Option<DNDecomposition>,
    cn: SemigroupStepper,
    be: SemigroupStepper,
    probe: OverlapProbe,
}

impl<'a> NavierStokes<'a> {
    /// Builds the operators; `B` is assembled only when the curvature varies.
    pub fn new(dom: &'a Domain, nu: f64, opts: StepOptions) -> Result<Self> {
        let poisson = CoupledOperator::poisson(dom)?;
        let dn = if dom.uniform_curvature() {
            None
        } else {
            Some(DNDecomposition::build(dom, &poisson, DnAssembly::Integral)?)
        };
        Self::with_dn(dom, nu, opts, dn)
    }

    /// As [`new`](Self::new) with a prebuilt `DN` decomposition (shared across
    /// viscosities).
    pub fn with_dn(dom: &'a Domain, nu: f64, opts: StepOptions, dn: Option<DNDecomposition>) -> Result<Self> {
        if !(opts.dt > 0.0) {
            return Err(StokesError::NonPositiveTime(opts.dt).into());
        }
        if !(opts.cfl_max > 0.0) {
            return Err(SolverError::InvalidParameter(format!("cfl_max {}", opts.cfl_max)));
        }
        let poisson = CoupledOperator::poisson(dom)?;
        let cn = SemigroupStepper::new(dom, nu, opts.dt)?;
        let be = SemigroupStepper::with_theta(dom, nu, 0.5 * opts.dt, 1.0)?;
        Ok(Self { dom, nu, opts, poisson, dn, cn, be, probe: OverlapProbe::new(dom) })
    }

    pub fn domain(&self) -> &Domain {
        self.dom
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn options(&self) -> &StepOptions {
        &self.opts
    }

    pub fn poisson(&self) -> &CoupledOperator {
        &self.poisson
    }

    pub fn dn(&self) -> Option<&DNDecomposition> {
        self.dn.as_ref()
    }

    /// Initial state from a vorticity function.
    pub fn initial_state(&self, omega0: &dyn Fn([f64; 2]) -> f64, split: &SplitOptions) -> Result<(SolverState, SplitReport)> {
        split_initial(self.dom, &self.poisson, omega0, self.nu, split)
    }

    /// Wall data `s = g/ν − Bω(0)`.
    pub fn wall_data(&self, g: &[Complex64], trace: &[Complex64]) -> Vec<Complex64> {
        let mut s: Vec<Complex64> = g.iter().map(|c| c / self.nu).collect();
        if let Some(dn) = &self.dn {
            for (x, b) in s.iter_mut().zip(dn.apply_b(trace)) {
                *x -= b;
            }
        }
        s
    }

    /// Velocity of the current state.
    pub fn velocity(&self, st: &SolverState) -> VelocityField {
        velocity(self.dom, &st.psi)
    }

    fn substep(&self, stepper: &SemigroupStepper, st: &mut SolverState) -> Result<(usize, f64)> {
        let dom = self.dom;
        let mut sweeps = 0;
        let n0 = nonlinear_term(dom, &st.psi, &st.omega);
        let (g0, phi0) = boundary_forcing_g(dom, &self.poisson, &n0, Some(&st.forcing_guess))?;
        let s0 = self.wall_data(&g0, &st.omega.chart.trace());
        let mut q = n0.clone();
        q.scale(-1.0);
        let wall0 = |tr: &[Complex64]| self.wall_data(&g0, tr);
        let (w_pred, stats) = stepper.step_feedback(dom, &st.omega, &s0, &wall0, Some(&q))?;
        sweeps += stats.sweeps;
        let psi_pred = stream_function(dom, &self.poisson, &w_pred, Some(&st.psi))?;
        let n1 = nonlinear_term(dom, &psi_pred, &w_pred);
        let (g1, phi1) = boundary_forcing_g(dom, &self.poisson, &n1, Some(&phi0))?;
        let mut q = n0;
        q.axpy(1.0, &n1);
        q.scale(-0.5);
        let wall1 = |tr: &[Complex64]| self.wall_data(&g1, tr);
        let (w_new, stats) = stepper.step_feedback(dom, &st.omega, &s0, &wall1, Some(&q))?;
        sweeps += stats.sweeps;
        let s1 = self.wall_data(&g1, &w_new.chart.trace());
        let th = stepper.theta();
        let dt = stepper.dt();
        let budget = dt * (-self.nu * ((1.0 - th) * s0[0].re + th * s1[0].re) * dom.period() + chart_mass(dom, &q.chart));
        st.psi = stream_function(dom, &self.poisson, &w_new, Some(&psi_pred))?;
        st.omega = w_new;
        st.forcing_guess = phi1;
        Ok((sweeps, budget))
    }

    /// One step of length `Δt`.
    pub fn step(&self, st: &mut SolverState) -> Result<StepReport> {
        let cfl = cfl_number(self.dom, &self.velocity(st), self.opts.dt);
        if cfl > self.opts.cfl_max {
            return Err(SolverError::StepRejected { cfl, suggested_dt: 0.9 * self.opts.dt * self.opts.cfl_max / cfl });
        }
        let (sweeps, circulation_budget) = if self.opts.rannacher && st.step_index == 0 {
            let a = self.substep(&self.be, st)?;
            let b = self.substep(&self.be, st)?;
            (a.0 + b.0, a.1 + b.1)
        } else {
            self.substep(&self.cn, st)?
        };
        st.step_index += 1;
        st.t = st.step_index as f64 * self.opts.dt;
        if !st.omega.chart.modes().iter().all(|c| c.re.is_finite() && c.im.is_finite())
            || !st.omega.interior.iter().all(|v| v.is_finite())
        {
            return Err(SolverError::NonFinite(st.t));
        }
        let overlap = self.probe.mismatch(&st.omega);
        if overlap > 10.0 * OVERLAP_TOL {
            return Err(SolverError::Desync(overlap));
        }
        Ok(StepReport { t: st.t, cfl, sweeps, overlap, circulation_budget })
    }
}

/// Integral quantities of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    /// `‖u‖²_{L²}`.
    pub energy: f64,
    /// `‖ω‖²_{L²}`.
    pub enstrophy: f64,
    /// `∫_Ω ω`.
    pub circulation: f64,
    /// `max |u·τ|` on the wall.
    pub slip_max: f64,
    /// `max |ω|` on the wall.
    pub wall_vorticity_max: f64,
    /// `‖∇u‖_∞`.
    pub grad_u_max: f64,
}

/// Cartesian velocity `u_τ τ + u_n n` at the interior edge points.
fn edge_velocity(dom: &Domain, u: &VelocityField) -> (Vec<f64>, Vec<f64>) {
    let int = dom.interior().expect("interior");
    let ut = int.edge_values(&u.u_tau);
    let un = int.edge_values(&u.u_n);
    let curve = dom.curve();
    let mut e1 = Vec::with_capacity(ut.len());
    let mut e2 = Vec::with_capacity(ut.len());
    for (k, e) in int.edges.iter().enumerate() {
        let t = curve.tangent(e.theta);
        let n = curve.normal(e.theta);
        e1.push(ut[k] * t[0] + un[k] * n[0]);
        e2.push(ut[k] * t[1] + un[k] * n[1]);
    }
    (e1, e2)
}

/// `‖∇u‖_∞` from second derivatives of the stream function.
pub fn grad_u_max(dom: &Domain, psi: &CompositeField, u: &VelocityField) -> f64 {
    let tr = dom.transform();
    let pzz = u.u_tau.d_z().to_physical_with(tr);
    let mut pzt = u.u_tau.d_theta();
    divide_by_jacobian(dom, &mut pzt);
    let pzt = pzt.to_physical_with(tr);
    let mut ptt = u.u_n.d_theta();
    divide_by_jacobian(dom, &mut ptt);
    let ptt = ptt.to_physical_with(tr);
    let mut m = 0.0f64;
    for i in 0..pzz.len() {
        m = m.max((pzz[i] * pzz[i] + 2.0 * pzt[i] * pzt[i] + ptt[i] * ptt[i]).sqrt());
    }
    if let (Some(int), Some((u1, u2))) = (dom.interior(), &u.far) {
        let (e1, e2) = edge_velocity(dom, u);
        let v1 = int.from_field(u1);
        let v2 = int.from_field(u2);
        let (a, b) = int.gradient(&v1, &e1);
        let (c, d) = int.gradient(&v2, &e2);
        for k in 0..int.n() {
            m = m.max((a[k] * a[k] + b[k] * b[k] + c[k] * c[k] + d[k] * d[k]).sqrt());
        }
    }
    let _ = psi;
    m
}

/// Energy, enstrophy, circulation and wall quantities.
pub fn diagnostics(dom: &Domain, st: &SolverState) -> Diagnostics {
    let tr = dom.transform();
    let u = velocity(dom, &st.psi);
    let ut = u.u_tau.to_physical_with(tr);
    let un = u.u_n.to_physical_with(tr);
    let w = st.omega.chart.to_physical_with(tr);
    let nz = dom.zgrid().len();
    let chart_u2: Vec<f64> = ut.iter().zip(&un).map(|(a, b)| a * a + b * b).collect();
    let chart_w2: Vec<f64> = w.iter().map(|v| v * v).collect();
    let (int_u2, int_w2) = match (dom.interior(), &u.far) {
        (Some(int), Some((u1, u2))) => {
            let a = int.from_field(u1);
            let b = int.from_field(u2);
            (
                a.iter().zip(&b).map(|(x, y)| x * x + y * y).collect::<Vec<_>>(),
                st.omega.interior.iter().map(|v| v * v).collect::<Vec<_>>(),
            )
        }
        _ => (Vec::new(), Vec::new()),
    };
    let n = dom.n_theta();
    Diagnostics {
        t: st.t,
        energy: dom.integrate(&chart_u2, &int_u2),
        enstrophy: dom.integrate(&chart_w2, &int_w2),
        circulation: dom.integrate(&w, &st.omega.interior),
        slip_max: max_physical(dom, &wall_slip(&st.psi.chart)),
        wall_vorticity_max: (0..n).map(|i| w[i * nz].abs()).fold(0.0, f64::max),
        grad_u_max: grad_u_max(dom, &st.psi, &u),
    }
}

/// Inviscid reference run. Per-step series start at `t = 0`; stream-function
/// snapshots are kept every `snapshot_every` steps and at the final time.
#[derive(Debug, Clone)]
pub struct EulerRun {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `‖∇u‖_∞` per step.
    pub grad_u: Vec<f64>,
    /// `‖ω‖²_{L²}` per step.
    pub enstrophy: Vec<f64>,
    /// Wall slip `u·τ(0, θ_i)` per step.
    pub wall_slip: Vec<Vec<f64>>,
    pub snapshot_steps: Vec<usize>,
    pub snapshots: Vec<CompositeField>,
    pub final_omega: CompositeField,
}

impl EulerRun {
    /// `max_t ‖∇u‖_∞`.
    pub fn max_grad_u(&self) -> f64 {
        self.grad_u.iter().copied().fold(0.0, f64::max)
    }

    /// Stream function at step `step`, if kept.
    pub fn psi_at(&self, step: usize) -> Option<&CompositeField> {
        self.snapshot_steps.iter().position(|&s| s == step).map(|i| &self.snapshots[i])
    }
}

/// Abort threshold for `‖∇u‖_∞` of the Euler reference.
pub const EULER_BLOWUP: f64 = 1e6;

/// Overwrites the chart bottom row by the interior interpolation.
fn sync_bottom(dom: &Domain, f: &mut CompositeField) {
    if let Some(int) = dom.interior() {
        let b = physical_trace_to_modes(dom, &int.bottom_values(&f.interior));
        let nz = f.chart.nz();
        for (k, v) in b.into_iter().enumerate() {
            f.chart.mode_mut(k)[nz - 1] = v;
        }
    }
}

/// `∂_tω + u·∇ω = 0` with `u·n = 0` by classical RK4 on the same grids.
pub fn euler_reference(
    dom: &Domain,
    poisson: &CoupledOperator,
    omega0: &CompositeField,
    dt: f64,
    t_end: f64,
    snapshot_every: usize,
) -> Result<EulerRun> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(SolverError::InvalidParameter(format!("dt {dt}, t_end {t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { dt };
    let every = snapshot_every.max(1);
    let tr = dom.transform();
    let nz = dom.zgrid().len();
    let n = dom.n_theta();
    let mut run = EulerRun {
        dt: h,
        times: Vec::new(),
        grad_u: Vec::new(),
        enstrophy: Vec::new(),
        wall_slip: Vec::new(),
        snapshot_steps: Vec::new(),
        snapshots: Vec::new(),
        final_omega: omega0.clone(),
    };
    let mut w = omega0.clone();
    sync_bottom(dom, &mut w);
    let mut psi = stream_function(dom, poisson, &w, None)?;
    let rhs = |w: &CompositeField, guess: &CompositeField| -> Result<(CompositeField, CompositeField)> {
        let p = stream_function(dom, poisson, w, Some(guess))?;
        let mut k = nonlinear_term(dom, &p, w);
        k.scale(-1.0);
        Ok((k, p))
    };
    for step in 0..=steps {
        let t = step as f64 * h;
        let u = velocity(dom, &psi);
        let grad = grad_u_max(dom, &psi, &u);
        let ut = u.u_tau.to_physical_with(tr);
        run.times.push(t);
        run.grad_u.push(grad);
        run.enstrophy.push(l2_sq(dom, &w));
        run.wall_slip.push((0..n).map(|i| ut[i * nz]).collect());
        if step % every == 0 || step == steps {
            run.snapshot_steps.push(step);
            run.snapshots.push(psi.clone());
        }
        if !(grad <= EULER_BLOWUP) {
            return Err(SolverError::EulerBlowup { t, grad });
        }
        if step == steps {
            break;
        }
        let (k1, _) = rhs(&w, &psi)?;
        let mut s = w.clone();
        s.axpy(0.5 * h, &k1);
        sync_bottom(dom, &mut s);
        let (k2, p2) = rhs(&s, &psi)?;
        let mut s = w.clone();
        s.axpy(0.5 * h, &k2);
        sync_bottom(dom, &mut s);
        let (k3, p3) = rhs(&s, &p2)?;
        let mut s = w.clone();
        s.axpy(h, &k3);
        sync_bottom(dom, &mut s);
        let (k4, _) = rhs(&s, &p3)?;
        w.axpy(h / 6.0, &k1);
        w.axpy(h / 3.0, &k2);
        w.axpy(h / 3.0, &k3);
        w.axpy(h / 6.0, &k4);
        sync_bottom(dom, &mut w);
        if !w.max_abs().is_finite() {
            return Err(SolverError::NonFinite(t + h));
        }
        psi = stream_function(dom, poisson, &w, Some(&psi))?;
    }
    run.final_omega = w;
    Ok(run)
}

/// `∫_Ω f²` of a composite field.
pub fn l2_sq(dom: &Domain, f: &CompositeField) -> f64 {
    let c: Vec<f64> = f.chart.to_physical_with(dom.transform()).iter().map(|v| v * v).collect();
    let i: Vec<f64> = f.interior.iter().map(|v| v * v).collect();
    dom.integrate(&c, &i)
}

/// `∫_Ω |u|^p` of the velocity of a stream function.
pub fn velocity_lp(dom: &Domain, psi: &CompositeField, p: f64) -> f64 {
    let u = velocity(dom, psi);
    let tr = dom.transform();
    let ut = u.u_tau.to_physical_with(tr);
    let un = u.u_n.to_physical_with(tr);
    let c: Vec<f64> = ut.iter().zip(&un).map(|(a, b)| a.hypot(*b).powf(p)).collect();
    let i: Vec<f64> = match (dom.interior(), &u.far) {
        (Some(int), Some((u1, u2))) => {
            int.nodes.iter().map(|&nd| u1.values[nd].hypot(u2.values[nd]).powf(p)).collect()
        }
        _ => Vec::new(),
    };
    dom.integrate(&c, &i)
}

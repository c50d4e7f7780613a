//! Linear Stokes semigroup: `(∂_t − νΔ)ω = 0` with the wall row
//! `ν(∂_z + |∂_θ|)ω = data`, stepped by Crank–Nicolson on the composite domain.

use crate::dn::DNDecomposition;
use crate::domain::Domain;
use crate::elliptic::{flux_laplacian, CompositeField, CoupledOperator, EllipticError, SolveStats};
use crate::fields::ModeField;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StokesError {
    #[error("inviscid limit not supported by the Stokes stepper (nu = {0})")]
    InviscidNotSupported(f64),
    #[error("time must be positive (got {0})")]
    NonPositiveTime(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

pub type Result<T> = std::result::Result<T, StokesError>;

/// Constants of the half-line Stokes kernel for one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesKernelParams {
    pub nu: f64,
    pub alpha: f64,
    /// Boundary-layer rate `|α| + ν^{−1/2}`.
    pub mu_f: f64,
    pub theta0: f64,
}

impl StokesKernelParams {
    pub fn new(nu: f64, alpha: f64, theta0: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(StokesError::InviscidNotSupported(nu));
        }
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(StokesError::InvalidParameter(format!("theta0 {theta0} not in (0,1)")));
        }
        Ok(Self { nu, alpha, mu_f: alpha.abs() + nu.powf(-0.5), theta0 })
    }

    /// Normalized Neumann heat kernel
    /// `H_α = (4πνt)^{−1/2}(e^{−(y−z)²/4νt} + e^{−(y+z)²/4νt}) e^{−α²νt}`.
    pub fn heat_kernel(&self, t: f64, y: f64, z: f64) -> f64 {
        let s = 4.0 * self.nu * t;
        ((-(y - z).powi(2) / s).exp() + (-(y + z).powi(2) / s).exp()) * (-self.alpha * self.alpha * self.nu * t).exp()
            / (PI * s).sqrt()
    }

    /// Bound structure `H_α + μ_f e^{−θ₀μ_f(y+z)} + (νt)^{−1/2}e^{−θ₀(y+z)²/νt}`.
    pub fn green_bound(&self, t: f64, y: f64, z: f64) -> f64 {
        let nt = self.nu * t;
        self.heat_kernel(t, y, z)
            + self.mu_f * (-self.theta0 * self.mu_f * (y + z)).exp()
            + (-self.theta0 * (y + z).powi(2) / nt).exp() / nt.sqrt()
    }
}

/// Crank–Nicolson stepper for `∂_tω = νΔω + q` with wall data
/// `s = ∂_zω + |k|ω` (per mode) at `z = 0`. The chart uses the flux form, so
/// the zero-mode mass `∫ωJ dz` changes exactly by `−ν∫s dt`.
#[derive(Debug, Clone)]
pub struct SemigroupStepper {
    nu: f64,
    dt: f64,
    theta: f64,
    op: CoupledOperator,
    bottom_dirichlet: bool,
}

impl SemigroupStepper {
    pub fn new(dom: &Domain, nu: f64, dt: f64) -> Result<Self> {
        Self::with_theta(dom, nu, dt, 0.5)
    }

    /// θ-scheme: `θ = 1/2` is Crank–Nicolson, `θ = 1` backward Euler.
    pub fn with_theta(dom: &Domain, nu: f64, dt: f64, theta: f64) -> Result<Self> {
        if !(theta >= 0.5 && theta <= 1.0) {
            return Err(StokesError::InvalidParameter(format!("theta {theta} not in [1/2, 1]")));
        }
        if !(nu > 0.0) {
            return Err(StokesError::InviscidNotSupported(nu));
        }
        if !(dt > 0.0) {
            return Err(StokesError::NonPositiveTime(dt));
        }
        let op = CoupledOperator::flux(dom, 1.0, theta * nu * dt)?;
        Ok(Self { nu, dt, theta, op, bottom_dirichlet: dom.interior().is_some() })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn operator(&self) -> &CoupledOperator {
        &self.op
    }

    /// `ω + (1−θ)νΔt Δω` with wall data `s` (the explicit part of the step).
    pub fn explicit_half(&self, dom: &Domain, omega: &CompositeField, s: &[Complex64]) -> CompositeField {
        let b = (1.0 - self.theta) * self.nu * self.dt;
        let mut chart = omega.chart.clone();
        chart.axpy(b, &flux_laplacian(dom, &omega.chart, s, self.bottom_dirichlet));
        let interior = match (dom.interior(), &self.op.interior) {
            (Some(int), Some(iop)) => {
                let lap = iop.laplacian(&omega.interior, &int.edge_values(&omega.chart));
                omega.interior.iter().zip(&lap).map(|(w, l)| w + b * l).collect()
            }
            _ => Vec::new(),
        };
        CompositeField { chart, interior }
    }

    /// One step with wall data `s_old`, `s_new` and optional source `q`
    /// (already time-centred).
    pub fn step(
        &self,
        dom: &Domain,
        omega: &CompositeField,
        s_old: &[Complex64],
        s_new: &[Complex64],
        source: Option<&CompositeField>,
    ) -> Result<(CompositeField, SolveStats)> {
        let mut rhs = self.explicit_half(dom, omega, s_old);
        if let Some(q) = source {
            rhs.axpy(self.dt, q);
        }
        Ok(self.op.solve(dom, &rhs, s_new, Some(omega))?)
    }

    /// As [`step`](Self::step) with the new wall data a function of the new
    /// wall trace, iterated to convergence inside the coupled solve.
    pub fn step_feedback(
        &self,
        dom: &Domain,
        omega: &CompositeField,
        s_old: &[Complex64],
        s_new: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
        source: Option<&CompositeField>,
    ) -> Result<(CompositeField, SolveStats)> {
        let mut rhs = self.explicit_half(dom, omega, s_old);
        if let Some(q) = source {
            rhs.axpy(self.dt, q);
        }
        let top = |c: &ModeField| s_new(&c.trace());
        Ok(self.op.solve_feedback(dom, &rhs, &top, Some(omega))?)
    }

    /// Homogeneous step on a domain without interior grid (the flat strip).
    pub fn step_homogeneous(&self, dom: &Domain, omega: &ModeField) -> Result<ModeField> {
        if dom.interior().is_some() {
            return Err(StokesError::InvalidParameter("step_homogeneous needs a chart-only domain".into()));
        }
        let zero = vec![Complex64::new(0.0, 0.0); dom.n_theta()];
        let w = CompositeField { chart: omega.clone(), interior: Vec::new() };
        Ok(self.step(dom, &w, &zero, &zero, None)?.0.chart)
    }

    /// Homogeneous step of the curved problem `ν(∂_z + |k|)ω = −νBω`, with
    /// `B` implicit at the new level.
    pub fn step_curved(&self, dom: &Domain, omega: &CompositeField, dn: &DNDecomposition) -> Result<CompositeField> {
        let neg_b = |tr: &[Complex64]| dn.apply_b(tr).into_iter().map(|c| -c).collect::<Vec<_>>();
        let s_old = neg_b(&omega.chart.trace());
        Ok(self.step_feedback(dom, omega, &s_old, &neg_b, None)?.0)
    }

    /// Field at time `t` from zero initial data under constant wall forcing
    /// `ν(∂_z + |k|)ω = g`. Its time derivative is the boundary trace
    /// operator applied to `g`; for the zero mode the mass is `−g t`.
    pub fn boundary_trace_inject(&self, dom: &Domain, g: &[Complex64], t: f64) -> Result<CompositeField> {
        if !(t > 0.0) {
            return Err(StokesError::NonPositiveTime(t));
        }
        let steps = (t / self.dt - 1e-9).ceil().max(1.0) as usize;
        let stepper = Self::new(dom, self.nu, t / steps as f64)?;
        let s: Vec<Complex64> = g.iter().map(|c| c / self.nu).collect();
        let mut w = CompositeField::zeros(dom);
        for _ in 0..steps {
            w = stepper.step(dom, &w, &s, &s, None)?.0;
        }
        Ok(w)
    }
}

/// Zero-mode mass `Σ_j J_j w_j ω_0(z_j)` of the chart at the mean curvature.
pub fn chart_mass(dom: &Domain, omega: &ModeField) -> f64 {
    let z = dom.zgrid().nodes();
    let w = dom.zgrid().weights();
    let g = dom.gamma_bar();
    omega.mode(0).iter().enumerate().map(|(j, c)| c.re * w[j] * (1.0 + z[j] * g)).sum::<f64>() * dom.period()
}

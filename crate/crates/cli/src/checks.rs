//! Quick self-checks against closed forms, run by `vortexlab validate`.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;
use vortexlab::dn::apply_dn;
use vortexlab::domain::{Domain, DomainOptions};
use vortexlab::elliptic::{CompositeField, CoupledOperator};
use vortexlab::experiments::{fit_rate, run_sweep_with, IcSpec, SweepPlan};
use vortexlab::fields::{ModeField, ZGrid};
use vortexlab::geometry::{BoundaryCurve, CurveKind};
use vortexlab::norms::{exact_product, l1_rho, linf_rho, AnalyticNormConfig};
use vortexlab::solver::{euler_reference, l2_sq};
use vortexlab::stokes::{chart_mass, SemigroupStepper};

pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> anyhow::Result<(bool, String)>;

const CHECKS: [(&str, Check); 7] = [
    ("poisson_disk", poisson_disk),
    ("dn_disk_spectrum", dn_disk_spectrum),
    ("stokes_mass", stokes_mass),
    ("norm_algebra", norm_algebra),
    ("euler_radial_steady", euler_radial_steady),
    ("zero_sweep", zero_sweep),
    ("rate_fit", rate_fit),
];

pub fn run_all() -> Vec<Outcome> {
    CHECKS
        .iter()
        .map(|&(name, f)| {
            let t0 = Instant::now();
            let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e:#}")));
            Outcome { name, pass, detail, seconds: t0.elapsed().as_secs_f64() }
        })
        .collect()
}

fn disk(n_theta: usize, n_z: usize, h: f64) -> anyhow::Result<Domain> {
    let curve = BoundaryCurve::new(CurveKind::Circle { radius: 1.0 })?;
    Ok(Domain::new(curve, &DomainOptions { n_theta, n_z, h, ..Default::default() })?)
}

fn max_diff(a: &CompositeField, b: &CompositeField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.max_abs()
}

/// `Δψ = 2 − 14x² − 2y²` with `ψ = (1 − r²)x²`.
fn poisson_disk() -> anyhow::Result<(bool, String)> {
    let dom = disk(32, 128, 0.02)?;
    let op = CoupledOperator::poisson(&dom)?;
    let rhs = CompositeField::from_fn(&dom, |p| 2.0 - 14.0 * p[0] * p[0] - 2.0 * p[1] * p[1]);
    let zero = vec![Complex64::new(0.0, 0.0); dom.n_theta()];
    let (psi, _) = op.solve(&dom, &rhs, &zero, None)?;
    let exact = CompositeField::from_fn(&dom, |p| (1.0 - p[0] * p[0] - p[1] * p[1]) * p[0] * p[0]);
    let err = max_diff(&psi, &exact);
    Ok((err < 1e-3, format!("max error {err:.2e}")))
}

/// The disk DN map acts as multiplication by `n` on `cos nθ`.
fn dn_disk_spectrum() -> anyhow::Result<(bool, String)> {
    let n_theta = 32;
    let dom = disk(n_theta, 256, 0.02)?;
    let op = CoupledOperator::poisson(&dom)?;
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let mut tr = vec![Complex64::new(0.0, 0.0); n_theta];
        tr[n] += 0.5;
        tr[n_theta - n] += 0.5;
        let out = apply_dn(&dom, &op, &tr)?;
        worst = worst.max((2.0 * out[n].re - n as f64).abs() / n as f64);
    }
    Ok((worst < 0.01, format!("max relative eigenvalue error {worst:.2e}")))
}

/// The zero mode of the homogeneous Stokes step conserves mass.
fn stokes_mass() -> anyhow::Result<(bool, String)> {
    let curve = BoundaryCurve::new(CurveKind::FlatStrip { period: 2.0 * PI })?;
    let opts = DomainOptions { n_theta: 8, n_z: 400, lambda: 0.05, strip_depth: 5.0, ..Default::default() };
    let dom = Domain::new(curve, &opts)?;
    let st = SemigroupStepper::new(&dom, 0.05, 0.02)?;
    let mut w = ModeField::from_fn(8, dom.period(), dom.zgrid().clone(), |z, th| {
        1.0 + (-(z - 0.3f64).powi(2) * 20.0).exp() * (1.0 + 0.5 * th.sin())
    });
    let m0 = chart_mass(&dom, &w);
    for _ in 0..20 {
        w = st.step_homogeneous(&dom, &w)?;
    }
    let drift = ((chart_mass(&dom, &w) - m0) / m0).abs();
    Ok((drift < 1e-8, format!("relative mass drift {drift:.2e}")))
}

/// `‖fg‖₁ ≤ ‖f‖_∞ ‖g‖₁` on deterministic smooth fields.
fn norm_algebra() -> anyhow::Result<(bool, String)> {
    let cfg = AnalyticNormConfig { eps0: 0.25, delta0: 0.04, rho: 0.05, rho0: 0.09, zeta: 0.5, beta: 1.0, lambda: 0.1 };
    let zg = Arc::new(ZGrid::uniform(2.0, 200)?);
    let field = |s: f64| {
        ModeField::from_fn(32, 2.0 * PI, zg.clone(), move |z, th| {
            (1..6).map(|k| (s * k as f64).sin() * (-(k as f64) * z).exp() * (k as f64 * th + s).cos() / k as f64).sum()
        })
    };
    let mut worst = 0.0f64;
    for i in 0..8 {
        let (f, g) = (field(0.7 + i as f64), field(1.9 + 2.0 * i as f64));
        worst = worst.max(l1_rho(&exact_product(&f, &g), &cfg) / (linf_rho(&f, &cfg) * l1_rho(&g, &cfg)));
    }
    Ok((worst <= 1.0 + 1e-12, format!("max ratio {worst:.6}")))
}

/// Radial vorticity is a steady Euler state.
fn euler_radial_steady() -> anyhow::Result<(bool, String)> {
    let dom = disk(16, 128, 0.025)?;
    let op = CoupledOperator::poisson(&dom)?;
    let w0 = CompositeField::from_fn(&dom, |p| 1.0 - 2.0 * (p[0] * p[0] + p[1] * p[1]));
    let run = euler_reference(&dom, &op, &w0, 0.01, 0.2, 10)?;
    let mut d = run.final_omega.clone();
    d.axpy(-1.0, &w0);
    let rel = (l2_sq(&dom, &d) / l2_sq(&dom, &w0)).sqrt();
    Ok((rel < 1e-3, format!("relative drift {rel:.2e}")))
}

/// Zero data gives zero diagnostics through the whole sweep.
fn zero_sweep() -> anyhow::Result<(bool, String)> {
    let plan = SweepPlan {
        nus: vec![1e-2, 1e-3],
        t_end: 0.02,
        curve: CurveKind::Circle { radius: 1.0 },
        ic: IcSpec::Zero,
        resolution: DomainOptions { n_theta: 16, n_z: 64, h: 0.03, ..Default::default() },
        dt: 0.01,
        record_every: 1,
        norms: Default::default(),
        split: Default::default(),
        cfl_max: 0.5,
        output: None,
    };
    let rep = run_sweep_with(&plan, Some(0))?;
    let worst = rep
        .records()
        .map(|r| r.l2_diff.abs().max(r.bdry_vort.abs()).max(r.kato_integral.abs()))
        .fold(0.0, f64::max);
    Ok((rep.all_completed() && worst == 0.0, format!("max diagnostic {worst:.1e}")))
}

/// Power-law fit recovers an exact exponent.
fn rate_fit() -> anyhow::Result<(bool, String)> {
    let pairs: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3, 3e-4].iter().map(|&nu: &f64| (nu, 2.0 * nu.sqrt())).collect();
    let fit = fit_rate(&pairs)?;
    let err = (fit.exponent - 0.5).abs().max((fit.prefactor - 2.0).abs());
    Ok((err < 1e-10, format!("exponent {:.6}, prefactor {:.6}", fit.exponent, fit.prefactor)))
}

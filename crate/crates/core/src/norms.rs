//! Analytic-weight norms of chart fields, interior Sobolev norms and the
//! iterative norm `A(β)`.
//!
//! Chart norms use the scaled depth `z̃ = λz` and the integer Fourier index
//! `α` of each θ-mode. The weight `e^{ε₀(δ₀+ρ−z̃)|α|}` is clamped to 1 for
//! `z̃ > δ₀+ρ`. Only the real trace (`η = 0`) is evaluated.

use crate::domain::Domain;
use crate::elliptic::CompositeField;
use crate::fields::{CartGrid, InteriorField, ModeField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// The chart norms are lower bounds: only the real path is evaluated.
pub const REAL_TRACE_ONLY: bool = true;

/// Number of ρ values sampled in the sup of [`iterative_norm_a`].
pub const RHO_GRID: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormError {
    #[error("invalid norm configuration: {0}")]
    InvalidConfig(String),
    #[error("derivative order {0} not supported (max 4)")]
    UnsupportedOrder(usize),
    #[error("no snapshot inside the window lambda^2 beta t < rho0")]
    EmptyWindow,
}

pub type Result<T> = std::result::Result<T, NormError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticNormConfig {
    pub eps0: f64,
    pub delta0: f64,
    pub rho: f64,
    pub rho0: f64,
    pub zeta: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl AnalyticNormConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NormError::InvalidConfig(m));
        if !(self.eps0 > 0.0 && self.eps0 <= 0.5) {
            return bad(format!("eps0 {} not in (0, 1/2]", self.eps0));
        }
        if !(self.rho0 > 0.0 && self.rho0 < 0.1) {
            return bad(format!("rho0 {} not in (0, 1/10)", self.rho0));
        }
        if !(self.rho > 0.0 && self.rho < self.rho0) {
            return bad(format!("rho {} not in (0, rho0)", self.rho));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad(format!("zeta {} not in (0,1)", self.zeta));
        }
        if !(self.delta0 > 0.0 && self.lambda > 0.0 && self.beta >= 0.0) {
            return bad("delta0, lambda must be positive and beta nonnegative".into());
        }
        Ok(())
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }

    /// `e^{ε₀(δ₀+ρ−z̃)|α|}` clamped to 1 beyond `z̃ = δ₀+ρ`.
    pub fn weight(&self, alpha: i64, zt: f64) -> f64 {
        let d = self.delta0 + self.rho - zt;
        if d <= 0.0 {
            1.0
        } else {
            (self.eps0 * d * alpha.unsigned_abs() as f64).exp()
        }
    }
}

/// `Σ_α ∫ w_α(z̃)|f_α(z̃)| dz̃` (trapezoid in z).
pub fn l1_rho(f: &ModeField, cfg: &AnalyticNormConfig) -> f64 {
    let z = f.zgrid().nodes();
    let w = f.zgrid().weights();
    let mut total = 0.0;
    for k in 0..f.n_theta() {
        let a = f.alpha(k);
        total += f
            .mode(k)
            .iter()
            .enumerate()
            .map(|(j, c)| cfg.weight(a, cfg.lambda * z[j]) * c.norm() * w[j])
            .sum::<f64>();
    }
    total * cfg.lambda
}

/// `Σ_α sup_z̃ w_α(z̃)|f_α(z̃)|`.
pub fn linf_rho(f: &ModeField, cfg: &AnalyticNormConfig) -> f64 {
    let z = f.zgrid().nodes();
    (0..f.n_theta())
        .map(|k| {
            let a = f.alpha(k);
            f.mode(k)
                .iter()
                .enumerate()
                .map(|(j, c)| cfg.weight(a, cfg.lambda * z[j]) * c.norm())
                .fold(0.0, f64::max)
        })
        .sum()
}

/// `∂_θ̃` with the integer index: multiplication of mode `α` by `iα`.
pub fn d_theta_index(f: &ModeField) -> ModeField {
    let mut out = f.clone();
    for k in 0..f.n_theta() {
        let m = Complex64::new(0.0, f.alpha(k) as f64);
        out.mode_mut(k).iter_mut().for_each(|c| *c *= m);
    }
    out
}

/// `z̃∂_z̃ = z∂_z`.
pub fn z_dz(f: &ModeField) -> ModeField {
    let mut out = f.d_z();
    let z = f.zgrid().nodes().to_vec();
    for k in 0..f.n_theta() {
        for (c, &zj) in out.mode_mut(k).iter_mut().zip(&z) {
            *c *= zj;
        }
    }
    out
}

fn sobolev_sum(f: &ModeField, k: usize, norm: impl Fn(&ModeField) -> f64) -> Result<f64> {
    if k > 4 {
        return Err(NormError::UnsupportedOrder(k));
    }
    let mut total = 0.0;
    let mut zj = f.clone();
    for j in 0..=k {
        let mut d = zj.clone();
        for i in 0..=(k - j) {
            total += norm(&d);
            if i < k - j {
                d = d_theta_index(&d);
            }
        }
        if j < k {
            zj = z_dz(&zj);
        }
    }
    Ok(total)
}

/// `Σ_{i+j≤k} ‖∂_θ̃^i (z̃∂_z̃)^j f‖_{𝓛¹_ρ}`.
pub fn w_k1(f: &ModeField, k: usize, cfg: &AnalyticNormConfig) -> Result<f64> {
    sobolev_sum(f, k, |g| l1_rho(g, cfg))
}

/// `Σ_{i+j≤k} ‖∂_θ̃^i (z̃∂_z̃)^j f‖_{𝓛^∞_ρ}`.
pub fn w_kinf(f: &ModeField, k: usize, cfg: &AnalyticNormConfig) -> Result<f64> {
    sobolev_sum(f, k, |g| linf_rho(g, cfg))
}

/// Exact (alias-free) product of two chart fields on a grid with twice the
/// number of θ-modes.
pub fn exact_product(f: &ModeField, g: &ModeField) -> ModeField {
    let n = f.n_theta();
    let pad = |a: &ModeField| {
        let mut out = ModeField::zeros(2 * n, a.period(), a.zgrid().clone());
        for k in 0..n {
            let al = a.alpha(k);
            let slot = if al >= 0 { al as usize } else { (2 * n as i64 + al) as usize };
            out.mode_mut(slot).copy_from_slice(a.mode(k));
        }
        out
    };
    let (pf, pg) = (pad(f), pad(g));
    let (xf, xg) = (pf.to_physical(), pg.to_physical());
    let prod: Vec<f64> = xf.iter().zip(&xg).map(|(a, b)| a * b).collect();
    let tr = crate::fields::ThetaTransform::new(2 * n);
    ModeField::from_physical(&prod, 2 * n, f.period(), f.zgrid().clone(), &tr)
}

/// One recorded state for [`iterative_norm_a`].
#[derive(Debug, Clone)]
pub struct NormSnapshot {
    pub t: f64,
    pub chart: ModeField,
    /// `H⁴` norm on `{λd ≥ δ₀/2}`.
    pub h4: f64,
}

/// Value of `A(β)` and where the sup is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeNorm {
    pub value: f64,
    pub t: f64,
    pub rho: f64,
}

/// The ρ-grid `ρ_i = (i+1)/(RHO_GRID+1)·(ρ₀ − λ²βt)`.
pub fn rho_grid(cfg: &AnalyticNormConfig, t: f64) -> Vec<f64> {
    let top = cfg.rho0 - cfg.lambda * cfg.lambda * cfg.beta * t;
    (0..RHO_GRID).map(|i| (i + 1) as f64 / (RHO_GRID + 1) as f64 * top).collect()
}

/// `A(β) = sup_t [sup_ρ {‖ω‖_{𝓦^{1,1}_ρ} + ‖ω‖_{𝓦^{2,1}_ρ}(ρ₀−ρ−λ²βt)^ζ} + ‖ω‖_{H⁴}]`
/// over the snapshots with `λ²βt < ρ₀`.
pub fn iterative_norm_a(history: &[NormSnapshot], cfg: &AnalyticNormConfig) -> Result<IterativeNorm> {
    let mut best: Option<IterativeNorm> = None;
    for snap in history {
        let slack = cfg.rho0 - cfg.lambda * cfg.lambda * cfg.beta * snap.t;
        if slack <= 0.0 {
            continue;
        }
        for rho in rho_grid(cfg, snap.t) {
            let c = cfg.with_rho(rho);
            let v = w_k1(&snap.chart, 1, &c)? + w_k1(&snap.chart, 2, &c)? * (slack - rho).powf(cfg.zeta) + snap.h4;
            if best.map_or(true, |b| v > b.value) {
                best = Some(IterativeNorm { value: v, t: snap.t, rho });
            }
        }
    }
    best.ok_or(NormError::EmptyWindow)
}

/// Discrete `H^k` norm `(Σ_{|m|≤k} h² Σ |D^m f|²)^{1/2}` over the nodes of
/// `region` whose centred difference stencils stay inside `f.mask`.
pub fn interior_sobolev(f: &InteriorField, k: usize, region: &[bool]) -> Result<f64> {
    if k > 4 {
        return Err(NormError::UnsupportedOrder(k));
    }
    let g = &f.grid;
    let reach = (k as i64 + 1) / 2;
    let inside = |i: i64, j: i64| i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny && f.mask[g.index(i as usize, j as usize)];
    // second-order central difference weights for derivative orders 0..=4
    let stencil: [&[f64]; 5] = [&[1.0], &[-0.5, 0.0, 0.5], &[1.0, -2.0, 1.0], &[-0.5, 1.0, 0.0, -1.0, 0.5], &[1.0, -4.0, 6.0, -4.0, 1.0]];
    let mut total = 0.0;
    for j in 0..g.ny as i64 {
        for i in 0..g.nx as i64 {
            let id = g.index(i as usize, j as usize);
            if !region[id] || !f.mask[id] {
                continue;
            }
            let ok = (-reach..=reach).all(|dj| (-reach..=reach).all(|di| inside(i + di, j + dj)));
            if !ok {
                continue;
            }
            for order in 0..=k {
                for ax in 0..=order {
                    let ay = order - ax;
                    let (sx, sy) = (stencil[ax], stencil[ay]);
                    let (cx, cy) = ((sx.len() / 2) as i64, (sy.len() / 2) as i64);
                    let mut d = 0.0;
                    for (q, wy) in sy.iter().enumerate() {
                        for (p, wx) in sx.iter().enumerate() {
                            if *wx == 0.0 || *wy == 0.0 {
                                continue;
                            }
                            let ii = (i + p as i64 - cx) as usize;
                            let jj = (j + q as i64 - cy) as usize;
                            d += wx * wy * f.values[g.index(ii, jj)];
                        }
                    }
                    let scale = g.h.powi(order as i32);
                    total += (d / scale).powi(2) * g.h * g.h;
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// Samples a composite field on a Cartesian grid of spacing `h` covering
/// `{λd ≥ δ₀/2}`; returns the field (mask = region) for [`interior_sobolev`].
pub fn sobolev_sample(dom: &Domain, omega: &CompositeField, h: f64) -> InteriorField {
    let depth = 0.5 * dom.chart().delta0() / dom.chart().lambda();
    let interior = omega.interior_field(dom);
    let curve = dom.curve();
    let zmax = dom.z_max();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..512 {
        let th = curve.period() * i as f64 / 512.0;
        let p = curve.position(th);
        let n = curve.normal(th);
        for q in [p, [p[0] + zmax * n[0], p[1] + zmax * n[1]]] {
            x0 = x0.min(q[0]);
            y0 = y0.min(q[1]);
            x1 = x1.max(q[0]);
            y1 = y1.max(q[1]);
        }
    }
    let nx = ((x1 - x0) / h).ceil() as usize + 1;
    let ny = ((y1 - y0) / h).ceil() as usize + 1;
    let grid = CartGrid { x0, y0, h, nx, ny };
    let mut mask = vec![false; nx * ny];
    let mut values = vec![0.0; nx * ny];
    for k in 0..ny {
        for i in 0..nx {
            let p = grid.point(i, k);
            let (d, _) = dom.locate(p);
            if d >= depth {
                if let Ok(v) = dom.sample(&omega.chart, interior.as_ref(), p) {
                    let id = grid.index(i, k);
                    mask[id] = true;
                    values[id] = v;
                }
            }
        }
    }
    InteriorField { grid, values, mask: Arc::new(mask) }
}

/// Least-squares decay rate `r` in `|c_α| ≈ C e^{−r|α|}` over the modes above
/// `floor·max|c|`; `None` when fewer than three modes qualify.
pub fn trace_decay_rate(trace: &[Complex64], floor: f64) -> Option<f64> {
    let n = trace.len();
    let max = trace.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let mut pts = Vec::new();
    for k in 1..n / 2 {
        let a = trace[k].norm().max(trace[n - k].norm());
        if a > floor * max {
            pts.push((k as f64, a.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some(-(m * sxy - sx * sy) / (m * sxx - sx * sx))
}

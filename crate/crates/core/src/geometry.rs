//! Analytic boundary curves and the geodesic `(z, θ)` chart around them.
//!
//! Conventions used throughout the crate: θ is arc length, counterclockwise;
//! the unit normal `n = (-x2', x1')` points into the domain; the curvature is
//! `γ = x1'' x2' - x1' x2''`, so a disk of radius `R` has `γ = -1/R`.
//! With these conventions `n' = γ τ`, `τ' = -γ n` and the chart Jacobian is
//! `J(z, θ) = 1 + z γ(θ)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("curve is not arc-length parameterized (max | |x'| - 1 | = {0:.3e}); reparameterize first")]
    ReparameterizationRequired(f64),
    #[error("point z = {z} lies outside the chart (delta = {delta})")]
    OutOfChart { z: f64, delta: f64 },
    #[error("singular chart: 1 + lambda^2 z~ gamma~ = {0} <= 0")]
    SingularChart(f64),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid scaled chart: {0}")]
    InvalidScaling(String),
}

/// Curve definition block as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveKind {
    FlatStrip {
        period: f64,
    },
    Circle {
        radius: f64,
    },
    /// `r(φ) = radius * (1 + Σ_k cos_coeffs[k-1] cos kφ + sin_coeffs[k-1] sin kφ)`.
    FourierPerturbedCircle {
        radius: f64,
        #[serde(default)]
        cos_coeffs: Vec<f64>,
        #[serde(default)]
        sin_coeffs: Vec<f64>,
    },
}

/// Truncated Fourier series of a real periodic function.
#[derive(Debug, Clone)]
pub struct PeriodicSeries {
    period: f64,
    // (wavenumber index k, coefficient)
    coeffs: Vec<(i64, Complex64)>,
}

impl PeriodicSeries {
    /// Builds the series from `n` uniform samples on `[0, period)`.
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let cmax = buf.iter().map(|c| c.norm()).fold(0.0, f64::max) * scale;
        let mut coeffs = Vec::with_capacity(n);
        for (i, c) in buf.into_iter().enumerate() {
            let k = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
            // drop the Nyquist term; negligible for analytic curves
            if n % 2 == 0 && i == n / 2 {
                continue;
            }
            let c = c * scale;
            if c.norm() > 1e-15 * cmax {
                coeffs.push((k, c));
            }
        }
        Self { period, coeffs }
    }

    /// Value of the `order`-th derivative at `t`.
    pub fn eval(&self, t: f64, order: u32) -> f64 {
        let w0 = 2.0 * PI / self.period;
        let mut acc = 0.0;
        for &(k, c) in &self.coeffs {
            let w = w0 * k as f64;
            let d = Complex64::new(0.0, w).powu(order);
            acc += (c * d * Complex64::from_polar(1.0, w * t)).re;
        }
        acc
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Flat,
    Circle { radius: f64 },
    Series { x1: PeriodicSeries, x2: PeriodicSeries },
}

/// Analytic, simply closed (or periodic flat) boundary curve.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    kind: Option<CurveKind>,
    period: f64,
    arc_length: bool,
    repr: Repr,
}

const RESAMPLE_N: usize = 1024;

impl BoundaryCurve {
    pub fn new(kind: CurveKind) -> Result<Self, GeometryError> {
        match &kind {
            CurveKind::FlatStrip { period } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(GeometryError::InvalidCurve(format!("period {period}")));
                }
                Ok(Self { period: *period, arc_length: true, repr: Repr::Flat, kind: Some(kind) })
            }
            CurveKind::Circle { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::InvalidCurve(format!("radius {radius}")));
                }
                Ok(Self {
                    period: 2.0 * PI * radius,
                    arc_length: true,
                    repr: Repr::Circle { radius: *radius },
                    kind: Some(kind),
                })
            }
            CurveKind::FourierPerturbedCircle { radius, cos_coeffs, sin_coeffs } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::InvalidCurve(format!("radius {radius}")));
                }
                let r = |phi: f64| {
                    let mut v = 1.0;
                    for (k, a) in cos_coeffs.iter().enumerate() {
                        v += a * ((k + 1) as f64 * phi).cos();
                    }
                    for (k, b) in sin_coeffs.iter().enumerate() {
                        v += b * ((k + 1) as f64 * phi).sin();
                    }
                    radius * v
                };
                let n = RESAMPLE_N;
                let mut pts = Vec::with_capacity(n);
                for j in 0..n {
                    let phi = 2.0 * PI * j as f64 / n as f64;
                    let rv = r(phi);
                    if rv <= 0.0 {
                        return Err(GeometryError::InvalidCurve(
                            "perturbation makes the radius non-positive".into(),
                        ));
                    }
                    pts.push([rv * phi.cos(), rv * phi.sin()]);
                }
                let mut c = Self::from_samples(&pts)?;
                c.reparameterize()?;
                c.kind = Some(kind);
                Ok(c)
            }
        }
    }

    /// Closed curve through uniformly-parameterized samples (counterclockwise).
    /// The result is generally not unit speed; call [`reparameterize`].
    ///
    /// [`reparameterize`]: BoundaryCurve::reparameterize
    pub fn from_samples(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        if points.len() < 8 {
            return Err(GeometryError::InvalidCurve("need at least 8 samples".into()));
        }
        let p = 2.0 * PI;
        let x1: Vec<f64> = points.iter().map(|q| q[0]).collect();
        let x2: Vec<f64> = points.iter().map(|q| q[1]).collect();
        let x1 = PeriodicSeries::from_samples(&x1, p);
        let x2 = PeriodicSeries::from_samples(&x2, p);
        // signed area decides orientation
        let n = 512;
        let mut area = 0.0;
        for j in 0..n {
            let s = p * j as f64 / n as f64;
            area += x1.eval(s, 0) * x2.eval(s, 1) - x2.eval(s, 0) * x1.eval(s, 1);
        }
        if area <= 0.0 {
            return Err(GeometryError::InvalidCurve("samples must run counterclockwise".into()));
        }
        let mut c = Self { kind: None, period: p, arc_length: false, repr: Repr::Series { x1, x2 } };
        c.arc_length = c.max_speed_deviation() < 1e-10;
        Ok(c)
    }

    /// Resample to unit speed by inverting the cumulative arc length.
    pub fn reparameterize(&mut self) -> Result<(), GeometryError> {
        let (x1, x2) = match &self.repr {
            Repr::Series { x1, x2 } => (x1, x2),
            _ => {
                self.arc_length = true;
                return Ok(());
            }
        };
        let p = self.period;
        let n = RESAMPLE_N;
        let speed: Vec<f64> = (0..n)
            .map(|j| {
                let s = p * j as f64 / n as f64;
                x1.eval(s, 1).hypot(x2.eval(s, 1))
            })
            .collect();
        let sp = PeriodicSeries::from_samples(&speed, p);
        let mean = sp.coeffs.iter().find(|(k, _)| *k == 0).map(|(_, c)| c.re).unwrap_or(0.0);
        let length = mean * p;
        let w0 = 2.0 * PI / p;
        // arc(s) = mean*s + Σ_{k≠0} c_k/(i k w0) e^{i k w0 s}
        let arc = |s: f64| {
            let mut a = mean * s;
            for &(k, c) in &sp.coeffs {
                if k != 0 {
                    let w = w0 * k as f64;
                    a += (c / Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * s)).re;
                }
            }
            a
        };
        let arc0 = arc(0.0);
        let mut y1 = Vec::with_capacity(n);
        let mut y2 = Vec::with_capacity(n);
        let mut s = 0.0;
        for j in 0..n {
            let target = length * j as f64 / n as f64;
            for _ in 0..50 {
                let f = arc(s) - arc0 - target;
                let df = sp.eval(s, 0);
                let ds = f / df;
                s -= ds;
                if ds.abs() < 1e-15 * p {
                    break;
                }
            }
            y1.push(x1.eval(s, 0));
            y2.push(x2.eval(s, 0));
        }
        self.repr = Repr::Series {
            x1: PeriodicSeries::from_samples(&y1, length),
            x2: PeriodicSeries::from_samples(&y2, length),
        };
        self.period = length;
        let dev = self.max_speed_deviation();
        if dev > 1e-10 {
            return Err(GeometryError::InvalidCurve(format!(
                "arc-length resampling left speed deviation {dev:.2e}"
            )));
        }
        self.arc_length = true;
        Ok(())
    }

    pub fn kind(&self) -> Option<&CurveKind> {
        self.kind.as_ref()
    }

    /// Arc-length period `L` of the boundary.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self.repr, Repr::Flat)
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.repr, Repr::Circle { .. })
    }

    pub fn is_arc_length(&self) -> bool {
        self.arc_length
    }

    /// Derivative of order `k` of `x(θ)`.
    pub fn derivative(&self, theta: f64, k: u32) -> [f64; 2] {
        match &self.repr {
            Repr::Flat => match k {
                0 => [theta, 0.0],
                1 => [1.0, 0.0],
                _ => [0.0, 0.0],
            },
            Repr::Circle { radius } => {
                let a = theta / radius;
                let f = radius.powi(1 - k as i32);
                // d^k/da^k (cos a, sin a) = (cos(a + kπ/2), sin(a + kπ/2))
                let ph = a + k as f64 * PI / 2.0;
                [f * ph.cos(), f * ph.sin()]
            }
            Repr::Series { x1, x2 } => [x1.eval(theta, k), x2.eval(theta, k)],
        }
    }

    pub fn position(&self, theta: f64) -> [f64; 2] {
        self.derivative(theta, 0)
    }

    pub fn tangent(&self, theta: f64) -> [f64; 2] {
        self.derivative(theta, 1)
    }

    /// Inward unit normal `(-x2', x1')`.
    pub fn normal(&self, theta: f64) -> [f64; 2] {
        let t = self.tangent(theta);
        [-t[1], t[0]]
    }

    fn curvature_unchecked(&self, theta: f64) -> f64 {
        let d1 = self.derivative(theta, 1);
        let d2 = self.derivative(theta, 2);
        d2[0] * d1[1] - d1[0] * d2[1]
    }

    /// `γ'(θ) = x1''' x2' - x1' x2'''`.
    pub fn curvature_derivative(&self, theta: f64) -> f64 {
        let d1 = self.derivative(theta, 1);
        let d3 = self.derivative(theta, 3);
        d3[0] * d1[1] - d1[0] * d3[1]
    }

    /// Largest `| |x'(θ)| - 1 |` over a uniform sample of the curve.
    pub fn max_speed_deviation(&self) -> f64 {
        let n = 256;
        (0..n)
            .map(|j| {
                let d = self.derivative(self.period * j as f64 / n as f64, 1);
                (d[0].hypot(d[1]) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_curvature(&self) -> f64 {
        let n = 512;
        (0..n)
            .map(|j| self.curvature_unchecked(self.period * j as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Mean curvature `(1/L) ∮ γ dθ` (equals `-2π/L` for closed curves).
    pub fn mean_curvature(&self) -> f64 {
        if self.is_closed() {
            -2.0 * PI / self.period
        } else {
            0.0
        }
    }

    /// Uniform θ-grid with `n` nodes on `[0, L)`.
    pub fn theta_grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.period * j as f64 / n as f64).collect()
    }

    /// Closest boundary point: returns `(distance, θ)` for a point near the
    /// curve (the signed distance is positive inside the domain).
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        match &self.repr {
            Repr::Flat => (p[1], p[0].rem_euclid(self.period)),
            Repr::Circle { radius } => {
                let r = p[0].hypot(p[1]);
                let a = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                (radius - r, a * radius)
            }
            Repr::Series { .. } => {
                let n = 256;
                let mut best = (f64::INFINITY, 0.0);
                for j in 0..n {
                    let th = self.period * j as f64 / n as f64;
                    let x = self.position(th);
                    let d2 = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
                    if d2 < best.0 {
                        best = (d2, th);
                    }
                }
                self.project_from(p, best.1)
            }
        }
    }

    /// Newton projection onto the curve starting from the foot guess `seed`.
    pub fn project_from(&self, p: [f64; 2], seed: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Flat | Repr::Circle { .. } => self.project(p),
            Repr::Series { .. } => {
                let mut th = seed;
                for _ in 0..40 {
                    let x = self.position(th);
                    let t = self.tangent(th);
                    let g = self.curvature_unchecked(th);
                    let nn = self.normal(th);
                    let diff = [x[0] - p[0], x[1] - p[1]];
                    let f = diff[0] * t[0] + diff[1] * t[1];
                    // d/dθ [(x-p)·τ] = 1 + (x-p)·τ' = 1 - γ (x-p)·n
                    let df = 1.0 - g * (diff[0] * nn[0] + diff[1] * nn[1]);
                    let step = f / df;
                    th -= step;
                    if step.abs() < 1e-14 * self.period {
                        break;
                    }
                }
                let th = th.rem_euclid(self.period);
                let x = self.position(th);
                let nn = self.normal(th);
                let d = (p[0] - x[0]) * nn[0] + (p[1] - x[1]) * nn[1];
                (d, th)
            }
        }
    }
}

/// Curvature `γ(θ)` of an arc-length parameterized curve.
pub fn curvature(curve: &BoundaryCurve, theta: f64) -> Result<f64, GeometryError> {
    if !curve.is_arc_length() {
        return Err(GeometryError::ReparameterizationRequired(curve.max_speed_deviation()));
    }
    Ok(curve.curvature_unchecked(theta))
}

/// Geodesic chart `X(z, θ) = x(θ) + z n(θ)` on `[0, δ) × 𝕋`.
#[derive(Debug, Clone)]
pub struct GeodesicChart {
    curve: BoundaryCurve,
    delta: f64,
}

impl GeodesicChart {
    /// Chooses `δ = min(0.5 / max|γ|, injectivity radius)`, which keeps
    /// `J ≥ 1/2` on the chart.
    pub fn new(curve: BoundaryCurve) -> Result<Self, GeometryError> {
        if !curve.is_arc_length() {
            return Err(GeometryError::ReparameterizationRequired(curve.max_speed_deviation()));
        }
        let gmax = curve.max_abs_curvature();
        let delta = if curve.is_closed() {
            let jac_limit = 0.5 / gmax;
            let mut lo = 0.0;
            let mut hi = 2.0 / gmax;
            if Self::sampled_injective(&curve, hi) {
                lo = hi;
            } else {
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if Self::sampled_injective(&curve, mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            jac_limit.min(lo)
        } else {
            f64::INFINITY
        };
        Ok(Self { curve, delta })
    }

    /// Chart with an explicit half-width (must pass the injectivity check).
    pub fn with_delta(curve: BoundaryCurve, delta: f64) -> Result<Self, GeometryError> {
        let auto = Self::new(curve)?;
        if delta > auto.delta {
            return Err(GeometryError::InvalidCurve(format!(
                "requested delta {delta} exceeds admissible {}",
                auto.delta
            )));
        }
        Ok(Self { delta, ..auto })
    }

    /// No two non-adjacent grid images closer than half the smallest local
    /// grid spacing.
    fn sampled_injective(curve: &BoundaryCurve, depth: f64) -> bool {
        let nt = 96;
        let nz = 8;
        let l = curve.period();
        let mut pts = Vec::with_capacity(nt * nz);
        let mut hmin = f64::INFINITY;
        for i in 0..nt {
            let th = l * i as f64 / nt as f64;
            let x = curve.position(th);
            let n = curve.normal(th);
            let g = curve.curvature_unchecked(th);
            for j in 0..nz {
                let z = depth * j as f64 / nz as f64;
                pts.push((i, j, [x[0] + z * n[0], x[1] + z * n[1]]));
                let jac = 1.0 + z * g;
                if jac <= 0.0 {
                    return false;
                }
                hmin = hmin.min(jac * l / nt as f64).min(depth / nz as f64);
            }
        }
        let tol2 = (0.5 * hmin).powi(2);
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let (ia, ja, pa) = pts[a];
                let (ib, jb, pb) = pts[b];
                let di = (ia as i64 - ib as i64).rem_euclid(nt as i64);
                let di = di.min(nt as i64 - di);
                let dj = (ja as i64 - jb as i64).abs();
                if di <= 1 && dj <= 1 {
                    continue;
                }
                let d2 = (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2);
                if d2 < tol2 {
                    return false;
                }
            }
        }
        true
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    /// Tubular half-width δ (infinite for the flat strip).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self, theta: f64) -> f64 {
        self.curve.curvature_unchecked(theta)
    }

    pub fn gamma_prime(&self, theta: f64) -> f64 {
        self.curve.curvature_derivative(theta)
    }

    pub fn chart_map(&self, z: f64, theta: f64) -> Result<[f64; 2], GeometryError> {
        if !(0.0..self.delta).contains(&z) {
            return Err(GeometryError::OutOfChart { z, delta: self.delta });
        }
        let x = self.curve.position(theta);
        let n = self.curve.normal(theta);
        Ok([x[0] + z * n[0], x[1] + z * n[1]])
    }

    pub fn jacobian_at(&self, z: f64, theta: f64) -> f64 {
        1.0 + z * self.gamma(theta)
    }

    /// Inverse chart map `x ↦ (z, θ)`.
    pub fn inverse(&self, p: [f64; 2]) -> (f64, f64) {
        self.curve.project(p)
    }
}

/// Coefficients of `R̃_Δ` for given `λ, z̃, γ̃, γ̃'`:
/// `(m̃, γ̃/(1+λ²z̃γ̃), -z̃γ̃'/(1+λ²z̃γ̃)³)`.
pub fn remainder_coefficients_raw(
    lambda: f64,
    zt: f64,
    gt: f64,
    gt_prime: f64,
) -> Result<(f64, f64, f64), GeometryError> {
    let jac = 1.0 + lambda * lambda * zt * gt;
    if jac <= 0.0 {
        return Err(GeometryError::SingularChart(jac));
    }
    let zg = zt * gt;
    let m = -(2.0 * zg + lambda * lambda * zg * zg) / (jac * jac);
    Ok((m, gt / jac, -zt * gt_prime / jac.powi(3)))
}

/// The scaled chart `(z̃, θ̃) = (λz, λθ)` with cutoff depths δ₀ and ρ₀.
#[derive(Debug, Clone)]
pub struct ScaledChart {
    base: GeodesicChart,
    lambda: f64,
    delta0: f64,
    rho0: f64,
}

impl ScaledChart {
    /// Requires `λ ∈ (0,1)`, `ρ₀ ∈ (0, 1/10)`, `δ₀ > 0` and `δ₀ + 2ρ₀ < λδ`.
    pub fn new(base: GeodesicChart, lambda: f64, delta0: f64, rho0: f64) -> Result<Self, GeometryError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(GeometryError::InvalidScaling(format!("lambda {lambda} not in (0,1)")));
        }
        if !(rho0 > 0.0 && rho0 < 0.1) {
            return Err(GeometryError::InvalidScaling(format!("rho0 {rho0} not in (0, 1/10)")));
        }
        if delta0 <= 0.0 {
            return Err(GeometryError::InvalidScaling(format!("delta0 {delta0} must be positive")));
        }
        if delta0 + 2.0 * rho0 >= lambda * base.delta() {
            return Err(GeometryError::InvalidScaling(format!(
                "delta0 + 2 rho0 = {} must be < lambda*delta = {}",
                delta0 + 2.0 * rho0,
                lambda * base.delta()
            )));
        }
        Ok(Self { base, lambda, delta0, rho0 })
    }

    /// Default depths derived from the chart: `δ₀ = 0.4λδ`, `ρ₀ = min(0.09, 0.2λδ)`.
    /// For the flat strip (δ = ∞) `depth` bounds the strip instead of δ.
    pub fn with_default_depths(base: GeodesicChart, lambda: f64, depth: f64) -> Result<Self, GeometryError> {
        let d = base.delta().min(depth);
        let ld = lambda * d;
        let rho0 = (0.2 * ld).min(0.09);
        let delta0 = 0.4 * ld;
        Self::new(base, lambda, delta0, rho0)
    }

    pub fn base(&self) -> &GeodesicChart {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    /// Physical depth where the cutoff `φ^b` starts to drop: `(δ₀+ρ₀)/λ`.
    pub fn cutoff_inner(&self) -> f64 {
        (self.delta0 + self.rho0) / self.lambda
    }

    /// Physical depth of the cutoff support edge: `(δ₀+2ρ₀)/λ`.
    pub fn cutoff_outer(&self) -> f64 {
        (self.delta0 + 2.0 * self.rho0) / self.lambda
    }

    /// Physical depth of the inner edge of the interior region: `δ₀/λ`.
    pub fn interior_edge(&self) -> f64 {
        self.delta0 / self.lambda
    }

    /// `γ̃(θ̃) = γ(θ̃/λ)/λ³`.
    pub fn tilde_gamma(&self, theta_t: f64) -> f64 {
        self.base.gamma(theta_t / self.lambda) / self.lambda.powi(3)
    }

    /// `dγ̃/dθ̃ = γ'(θ̃/λ)/λ⁴`.
    pub fn tilde_gamma_prime(&self, theta_t: f64) -> f64 {
        self.base.gamma_prime(theta_t / self.lambda) / self.lambda.powi(4)
    }

    /// Coefficients of `∂²_θ̃`, `∂_z̃` and `∂_θ̃` in `R̃_Δ` at `(z̃, θ̃)`.
    pub fn remainder_coefficients(&self, zt: f64, theta_t: f64) -> Result<(f64, f64, f64), GeometryError> {
        remainder_coefficients_raw(
            self.lambda,
            zt,
            self.tilde_gamma(theta_t),
            self.tilde_gamma_prime(theta_t),
        )
    }
}

/// Physical-coordinate coefficients of `R_Δ = m ∂²_θ + c_z ∂_z + c_θ ∂_θ`.
pub fn physical_remainder(gamma: f64, gamma_prime: f64, z: f64) -> (f64, f64, f64) {
    let jac = 1.0 + z * gamma;
    let zg = z * gamma;
    (-(2.0 * zg + zg * zg) / (jac * jac), gamma / jac, -z * gamma_prime / jac.powi(3))
}

/// Residual of the chart Laplacian against a Cartesian five-point Laplacian
/// for a test function `psi`, on the sample points `(z_j, θ_i)`. Both sides
/// use finite differences with step `h`; used only for validation.
pub fn full_laplacian_check<F>(chart: &GeodesicChart, psi: F, zs: &[f64], thetas: &[f64], h: f64) -> Vec<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    let at = |z: f64, th: f64| {
        let x = chart.curve.position(th);
        let n = chart.curve.normal(th);
        psi([x[0] + z * n[0], x[1] + z * n[1]])
    };
    let mut out = Vec::with_capacity(zs.len() * thetas.len());
    for &th in thetas {
        let g = chart.gamma(th);
        let gp = chart.gamma_prime(th);
        for &z in zs {
            let x = chart.curve.position(th);
            let n = chart.curve.normal(th);
            let p = [x[0] + z * n[0], x[1] + z * n[1]];
            let cart = (psi([p[0] + h, p[1]]) + psi([p[0] - h, p[1]]) + psi([p[0], p[1] + h])
                + psi([p[0], p[1] - h])
                - 4.0 * psi(p))
                / (h * h);
            let c = at(z, th);
            let dzz = (at(z + h, th) - 2.0 * c + at(z - h, th)) / (h * h);
            let dz = (at(z + h, th) - at(z - h, th)) / (2.0 * h);
            let dtt = (at(z, th + h) - 2.0 * c + at(z, th - h)) / (h * h);
            let dt = (at(z, th + h) - at(z, th - h)) / (2.0 * h);
            let (m, cz, ct) = physical_remainder(g, gp, z);
            let chart_lap = dzz + dtt + m * dtt + cz * dz + ct * dt;
            out.push(cart - chart_lap);
        }
    }
    out
}

//! Field representations: θ-Fourier modes over a wall-normal grid for the
//! near-boundary strip, masked Cartesian grids for the interior.

use crate::fd::{cubic_stencil, lagrange4, NonuniformStencils};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("theta grid is not uniform (node {0} off by {1:.3e})")]
    NonUniformTheta(usize, f64),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
    #[error("point ({0}, {1}) is not covered by either grid representation")]
    NotCovered(f64, f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Strictly increasing wall-normal nodes `0 = z_0 < … < z_N = Z`.
#[derive(Debug, Clone)]
pub struct ZGrid {
    nodes: Vec<f64>,
    stencils: NonuniformStencils,
    weights: Vec<f64>,
}

impl ZGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, FieldError> {
        if nodes.len() < 4 || nodes[0] != 0.0 {
            return Err(FieldError::InvalidGrid("need >= 4 nodes starting at z = 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FieldError::InvalidGrid("nodes must be strictly increasing".into()));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for j in 0..n - 1 {
            let h = nodes[j + 1] - nodes[j];
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        let stencils = NonuniformStencils::new(&nodes);
        Ok(Self { nodes, stencils, weights })
    }

    /// `n` intervals of equal width on `[0, z_max]`.
    pub fn uniform(z_max: f64, n: usize) -> Result<Self, FieldError> {
        Self::from_nodes((0..=n).map(|j| z_max * j as f64 / n as f64).collect())
    }

    /// Geometrically stretched grid with `n` intervals, clustered at `z = 0` so
    /// that at least `min_nodes` nodes (besides `z = 0`) lie inside `[0, layer]`.
    /// Falls back to uniform spacing when that already suffices.
    pub fn graded(z_max: f64, n: usize, layer: f64, min_nodes: usize) -> Result<Self, FieldError> {
        if min_nodes >= n {
            return Err(FieldError::InvalidGrid("min_nodes must be < n".into()));
        }
        let map = |s: f64, xi: f64| {
            if s < 1e-12 {
                z_max * xi
            } else {
                z_max * ((s * xi).exp() - 1.0) / (s.exp() - 1.0)
            }
        };
        let xi_k = min_nodes as f64 / n as f64;
        if map(0.0, xi_k) <= layer {
            return Self::uniform(z_max, n);
        }
        // node `min_nodes` position decreases monotonically with s
        let (mut lo, mut hi) = (0.0, 1.0);
        while map(hi, xi_k) > layer {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(FieldError::InvalidGrid("cannot resolve layer with given nodes".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if map(mid, xi_k) > layer {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut nodes: Vec<f64> = (0..=n).map(|j| map(hi, j as f64 / n as f64)).collect();
        nodes[0] = 0.0;
        nodes[n] = z_max;
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn z_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn stencils(&self) -> &NonuniformStencils {
        &self.stencils
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn integrate<T>(&self, f: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        f.iter().zip(&self.weights).map(|(&v, &w)| v * w).sum()
    }
}

/// Forward/inverse DFT along θ with the convention
/// `f_α = (1/N) Σ_i f(θ_i) e^{-iαθ_i}`.
#[derive(Clone)]
pub struct ThetaTransform {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ThetaTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ThetaTransform({})", self.n)
    }
}

impl ThetaTransform {
    pub fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self { n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }
}

/// Integer Fourier index of FFT slot `k` for `n` slots: `{-n/2, …, n/2-1}`.
pub fn alpha_index(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// A real scalar field on the chart grid stored as θ-Fourier modes.
/// Layout: `modes[k * nz + j]` with `k` the FFT slot and `j` the z-node.
#[derive(Debug, Clone)]
pub struct ModeField {
    n_theta: usize,
    period: f64,
    zgrid: Arc<ZGrid>,
    modes: Vec<Complex64>,
}

impl ModeField {
    pub fn zeros(n_theta: usize, period: f64, zgrid: Arc<ZGrid>) -> Self {
        let nz = zgrid.len();
        Self { n_theta, period, zgrid, modes: vec![Complex64::new(0.0, 0.0); n_theta * nz] }
    }

    pub fn from_modes(n_theta: usize, period: f64, zgrid: Arc<ZGrid>, modes: Vec<Complex64>) -> Result<Self, FieldError> {
        let expected = n_theta * zgrid.len();
        if modes.len() != expected {
            return Err(FieldError::Shape { expected, got: modes.len() });
        }
        Ok(Self { n_theta, period, zgrid, modes })
    }

    /// Samples `f(z, θ)` on the grid and transforms.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(n_theta: usize, period: f64, zgrid: Arc<ZGrid>, f: F) -> Self {
        let nz = zgrid.len();
        let mut phys = vec![0.0; n_theta * nz];
        for i in 0..n_theta {
            let th = period * i as f64 / n_theta as f64;
            for (j, &z) in zgrid.nodes().iter().enumerate() {
                phys[i * nz + j] = f(z, th);
            }
        }
        let tr = ThetaTransform::new(n_theta);
        Self::from_physical(&phys, n_theta, period, zgrid, &tr)
    }

    /// Transform physical samples `values[i * nz + j]` at uniform θ_i.
    pub fn from_physical(values: &[f64], n_theta: usize, period: f64, zgrid: Arc<ZGrid>, tr: &ThetaTransform) -> Self {
        let nz = zgrid.len();
        assert_eq!(values.len(), n_theta * nz);
        let mut modes = vec![Complex64::new(0.0, 0.0); n_theta * nz];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_theta];
        for j in 0..nz {
            for i in 0..n_theta {
                buf[i] = Complex64::new(values[i * nz + j], 0.0);
            }
            tr.forward(&mut buf);
            for k in 0..n_theta {
                modes[k * nz + j] = buf[k];
            }
        }
        let mut f = Self { n_theta, period, zgrid, modes };
        f.enforce_hermitian();
        f
    }

    pub fn to_physical_with(&self, tr: &ThetaTransform) -> Vec<f64> {
        let nz = self.nz();
        let n = self.n_theta;
        let mut out = vec![0.0; n * nz];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..nz {
            for k in 0..n {
                buf[k] = self.modes[k * nz + j];
            }
            tr.inverse(&mut buf);
            for i in 0..n {
                out[i * nz + j] = buf[i].re;
            }
        }
        out
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.to_physical_with(&ThetaTransform::new(self.n_theta))
    }

    /// Makes `mode(-α) = conj(mode(α))` and the zero/Nyquist modes real.
    pub fn enforce_hermitian(&mut self) {
        let n = self.n_theta;
        let nz = self.nz();
        for j in 0..nz {
            self.modes[j].im = 0.0;
            if n % 2 == 0 {
                self.modes[(n / 2) * nz + j].im = 0.0;
            }
            for k in 1..(n + 1) / 2 {
                let a = self.modes[k * nz + j];
                let b = self.modes[(n - k) * nz + j];
                let avg = 0.5 * (a + b.conj());
                self.modes[k * nz + j] = avg;
                self.modes[(n - k) * nz + j] = avg.conj();
            }
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn nz(&self) -> usize {
        self.zgrid.len()
    }

    /// Arc-length period of θ.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn zgrid(&self) -> &Arc<ZGrid> {
        &self.zgrid
    }

    pub fn alpha(&self, k: usize) -> i64 {
        alpha_index(k, self.n_theta)
    }

    /// Physical wavenumber `2π α / L` of slot `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * self.alpha(k) as f64 / self.period
    }

    pub fn mode(&self, k: usize) -> &[Complex64] {
        let nz = self.nz();
        &self.modes[k * nz..(k + 1) * nz]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        let nz = self.nz();
        &mut self.modes[k * nz..(k + 1) * nz]
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    /// Mode values at `z = 0`.
    pub fn trace(&self) -> Vec<Complex64> {
        (0..self.n_theta).map(|k| self.mode(k)[0]).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_theta, self.period, self.zgrid.clone())
    }

    pub fn scale(&mut self, s: f64) {
        self.modes.iter_mut().for_each(|c| *c *= s);
    }

    pub fn axpy(&mut self, a: f64, other: &ModeField) {
        for (x, y) in self.modes.iter_mut().zip(&other.modes) {
            *x += *y * a;
        }
    }

    pub fn max_abs_mode(&self) -> f64 {
        self.modes.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Spectral θ-derivative (physical arc length).
    pub fn d_theta(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.n_theta {
            let w = if self.n_theta % 2 == 0 && k == self.n_theta / 2 { 0.0 } else { self.wavenumber(k) };
            out.mode_mut(k).iter_mut().for_each(|c| *c *= Complex64::new(0.0, w));
        }
        out
    }

    /// Second-order finite-difference z-derivative.
    pub fn d_z(&self) -> Self {
        let mut out = self.clone();
        let st = self.zgrid.stencils();
        for k in 0..self.n_theta {
            let d = st.d1(self.mode(k));
            out.mode_mut(k).copy_from_slice(&d);
        }
        out
    }

    /// Mode values interpolated (cubic) at depth `z`.
    pub fn modes_at_depth(&self, z: f64) -> Vec<Complex64> {
        let (s, w) = cubic_stencil(z, self.zgrid.nodes());
        (0..self.n_theta)
            .map(|k| {
                let m = self.mode(k);
                m[s] * w[0] + m[s + 1] * w[1] + m[s + 2] * w[2] + m[s + 3] * w[3]
            })
            .collect()
    }

    /// Point evaluation: cubic in z, spectral in θ.
    pub fn eval(&self, z: f64, theta: f64) -> f64 {
        eval_series(&self.modes_at_depth(z), self.period, theta)
    }
}

/// Real value of the θ-series with slot-ordered coefficients at `theta`.
pub fn eval_series(coeffs: &[Complex64], period: f64, theta: f64) -> f64 {
    let n = coeffs.len();
    let mut acc = coeffs[0].re;
    let w0 = 2.0 * PI / period;
    for k in 1..(n + 1) / 2 {
        let e = Complex64::from_polar(1.0, w0 * k as f64 * theta);
        acc += 2.0 * (coeffs[k] * e).re;
    }
    if n % 2 == 0 {
        acc += (coeffs[n / 2] * Complex64::from_polar(1.0, -w0 * (n / 2) as f64 * theta)).re;
    }
    acc
}

/// Pointwise product of two mode fields with 3/2-rule dealiasing in θ.
pub fn dealiased_product(a: &ModeField, b: &ModeField) -> ModeField {
    let n = a.n_theta;
    let m = (3 * n).div_ceil(2);
    let nz = a.nz();
    let big = ThetaTransform::new(m);
    let mut out = a.zeros_like();
    let mut ba = vec![Complex64::new(0.0, 0.0); m];
    let mut bb = vec![Complex64::new(0.0, 0.0); m];
    let pad = |src: &ModeField, j: usize, buf: &mut [Complex64]| {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for k in 0..n {
            let al = alpha_index(k, n);
            if n % 2 == 0 && k == n / 2 {
                continue;
            }
            let slot = if al >= 0 { al as usize } else { (m as i64 + al) as usize };
            buf[slot] = src.modes[k * nz + j];
        }
    };
    for j in 0..nz {
        pad(a, j, &mut ba);
        pad(b, j, &mut bb);
        big.inverse(&mut ba);
        big.inverse(&mut bb);
        for i in 0..m {
            ba[i] = Complex64::new(ba[i].re * bb[i].re, 0.0);
        }
        big.forward(&mut ba);
        for k in 0..n {
            if n % 2 == 0 && k == n / 2 {
                continue;
            }
            let al = alpha_index(k, n);
            let slot = if al >= 0 { al as usize } else { (m as i64 + al) as usize };
            out.modes[k * nz + j] = ba[slot];
        }
    }
    out
}

/// Uniform Cartesian grid: node `(i, k)` sits at `(x0 + i h, y0 + k h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartGrid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CartGrid {
    pub fn index(&self, i: usize, k: usize) -> usize {
        k * self.nx + i
    }

    pub fn point(&self, i: usize, k: usize) -> [f64; 2] {
        [self.x0 + i as f64 * self.h, self.y0 + k as f64 * self.h]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Real field on the masked interior Cartesian grid.
#[derive(Debug, Clone)]
pub struct InteriorField {
    pub grid: CartGrid,
    pub values: Vec<f64>,
    pub mask: Arc<Vec<bool>>,
}

impl InteriorField {
    pub fn zeros(grid: CartGrid, mask: Arc<Vec<bool>>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], mask }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: CartGrid, mask: Arc<Vec<bool>>, f: F) -> Self {
        let mut out = Self::zeros(grid, mask);
        for k in 0..out.grid.ny {
            for i in 0..out.grid.nx {
                let idx = out.grid.index(i, k);
                if out.mask[idx] {
                    out.values[idx] = f(out.grid.point(i, k));
                }
            }
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.grid.clone(), self.mask.clone())
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mask.iter())
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bicubic Lagrange interpolation; `None` if the 4×4 stencil leaves the mask.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        let g = &self.grid;
        let fx = (p[0] - g.x0) / g.h;
        let fy = (p[1] - g.y0) / g.h;
        let i0 = fx.floor() as i64 - 1;
        let k0 = fy.floor() as i64 - 1;
        if i0 < 0 || k0 < 0 || i0 + 3 >= g.nx as i64 || k0 + 3 >= g.ny as i64 {
            return None;
        }
        let (i0, k0) = (i0 as usize, k0 as usize);
        let xs = [0.0, 1.0, 2.0, 3.0];
        let wx = lagrange4(fx - i0 as f64, &xs);
        let wy = lagrange4(fy - k0 as f64, &xs);
        let mut acc = 0.0;
        for b in 0..4 {
            for a in 0..4 {
                let idx = g.index(i0 + a, k0 + b);
                if !self.mask[idx] {
                    return None;
                }
                acc += wx[a] * wy[b] * self.values[idx];
            }
        }
        Some(acc)
    }
}

/// Velocity split into the chart representation (tangential and normal
/// components) and the Cartesian interior representation.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub u_tau: ModeField,
    pub u_n: ModeField,
    pub far: Option<(InteriorField, InteriorField)>,
}

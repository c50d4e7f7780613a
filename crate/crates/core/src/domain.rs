//! Composite computational domain: the chart strip `[0, Z] × 𝕋` next to the
//! boundary and, for closed curves, a Cartesian grid on `{d > d_in}` whose
//! cut cells meet the curve `d = d_in`. The two grids overlap on
//! `d_in ≤ d ≤ Z`, which contains the transition layer of the cutoff `φ^b`.

use crate::fd::{cubic_stencil, lagrange4};
use crate::fields::{CartGrid, FieldError, InteriorField, ModeField, ThetaTransform, ZGrid};
use crate::geometry::{BoundaryCurve, GeodesicChart, GeometryError, ScaledChart};
use crate::linalg::SparseRows;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid domain options: {0}")]
    InvalidOptions(String),
    #[error("grids do not overlap enough: {0}")]
    InsufficientOverlap(String),
}

/// Smooth cutoff `φ^b(d)`: 1 for `λd ≤ δ₀+ρ₀`, 0 for `λd ≥ δ₀+2ρ₀`, quintic
/// smoothstep in between (two continuous derivatives).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFunction {
    pub lambda: f64,
    pub delta0: f64,
    pub rho0: f64,
}

fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (s, s1, s2)
    }
}

impl CutoffFunction {
    pub fn new(lambda: f64, delta0: f64, rho0: f64) -> Self {
        Self { lambda, delta0, rho0 }
    }

    pub fn from_chart(chart: &ScaledChart) -> Self {
        Self::new(chart.lambda(), chart.delta0(), chart.rho0())
    }

    /// Physical depth where the transition starts.
    pub fn inner(&self) -> f64 {
        (self.delta0 + self.rho0) / self.lambda
    }

    /// Physical depth where `φ^b` reaches zero.
    pub fn outer(&self) -> f64 {
        (self.delta0 + 2.0 * self.rho0) / self.lambda
    }

    fn t(&self, d: f64) -> f64 {
        (self.lambda * d - self.delta0 - self.rho0) / self.rho0
    }

    pub fn value(&self, d: f64) -> f64 {
        1.0 - smoothstep(self.t(d)).0
    }

    /// `dφ^b/dd`.
    pub fn d1(&self, d: f64) -> f64 {
        -smoothstep(self.t(d)).1 * self.lambda / self.rho0
    }

    /// `d²φ^b/dd²`.
    pub fn d2(&self, d: f64) -> f64 {
        -smoothstep(self.t(d)).2 * (self.lambda / self.rho0).powi(2)
    }
}

/// Discretization and chart-scaling options for [`Domain::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainOptions {
    pub n_theta: usize,
    pub n_z: usize,
    /// Interior Cartesian spacing.
    pub h: f64,
    pub lambda: f64,
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub rho0: Option<f64>,
    /// Physical depth scale for open (flat) boundaries.
    #[serde(default = "default_strip_depth")]
    pub strip_depth: f64,
    /// Boundary-layer thickness the z-grid must resolve (typically √ν_min).
    #[serde(default)]
    pub layer: Option<f64>,
}

fn default_strip_depth() -> f64 {
    1.0
}

impl Default for DomainOptions {
    fn default() -> Self {
        Self {
            n_theta: 64,
            n_z: 128,
            h: 0.025,
            lambda: 0.1,
            delta0: None,
            rho0: None,
            strip_depth: 1.0,
            layer: None,
        }
    }
}

/// Neighbor of an interior unknown in one of the four axis directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Node(usize),
    /// Dirichlet point at fractional distance `frac · h` (index into `edges`).
    Edge { id: usize, frac: f64 },
}

/// Point where a grid line leaves the interior region; values there come
/// from the chart representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub pos: [f64; 2],
    pub z: f64,
    pub theta: f64,
}

/// Cartesian interior grid with cut-cell connectivity.
#[derive(Debug, Clone)]
pub struct Interior {
    pub grid: CartGrid,
    pub mask: Arc<Vec<bool>>,
    /// Unknown index → grid node index.
    pub nodes: Vec<usize>,
    node_unk: Vec<usize>,
    /// Distance to the boundary per unknown.
    pub dist: Vec<f64>,
    /// Links per unknown in order east, west, north, south.
    pub links: Vec<[Link; 4]>,
    pub edges: Vec<EdgePoint>,
    edge_stencil: Vec<(usize, [f64; 4])>,
    bottom: Vec<[(usize, f64); 16]>,
    /// Unknowns with a cut-cell link and their chart coordinates `(u, z, θ)`;
    /// transport there is interpolated from the chart.
    pub fringe: Vec<(usize, f64, f64)>,
}

impl Interior {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        let u = self.node_unk[node];
        (u != usize::MAX).then_some(u)
    }

    pub fn point(&self, u: usize) -> [f64; 2] {
        let n = self.nodes[u];
        self.grid.point(n % self.grid.nx, n / self.grid.nx)
    }

    /// Five-point Laplacian with Shortley–Weller rows at cut cells:
    /// `Δv ≈ A v + E e` with `e` the edge values.
    pub fn laplacian(&self) -> (SparseRows, Vec<Vec<(usize, f64)>>) {
        let h2 = self.grid.h * self.grid.h;
        let mut a = Vec::with_capacity(self.n());
        let mut e = Vec::with_capacity(self.n());
        for (u, links) in self.links.iter().enumerate() {
            let mut row = Vec::with_capacity(5);
            let mut erow = Vec::new();
            let mut diag = 0.0;
            for axis in 0..2 {
                let (p, m) = (links[2 * axis], links[2 * axis + 1]);
                let fp = link_frac(p);
                let fm = link_frac(m);
                let cp = 2.0 / (fp * (fp + fm) * h2);
                let cm = 2.0 / (fm * (fp + fm) * h2);
                diag -= 2.0 / (fp * fm * h2);
                for (l, c) in [(p, cp), (m, cm)] {
                    match l {
                        Link::Node(v) => row.push((v, c)),
                        Link::Edge { id, .. } => erow.push((id, c)),
                    }
                }
            }
            row.push((u, diag));
            a.push(row);
            e.push(erow);
        }
        (SparseRows { rows: a }, e)
    }

    /// Second-order gradient `(∂₁v, ∂₂v)` at every unknown.
    pub fn gradient(&self, v: &[f64], edge: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h;
        let val = |l: Link| match l {
            Link::Node(w) => v[w],
            Link::Edge { id, .. } => edge[id],
        };
        let mut gx = vec![0.0; self.n()];
        let mut gy = vec![0.0; self.n()];
        for (u, links) in self.links.iter().enumerate() {
            for axis in 0..2 {
                let (p, m) = (links[2 * axis], links[2 * axis + 1]);
                let hp = link_frac(p) * h;
                let hm = link_frac(m) * h;
                let d = -hp / (hm * (hm + hp)) * val(m) + (hp - hm) / (hm * hp) * v[u] + hm / (hp * (hm + hp)) * val(p);
                if axis == 0 {
                    gx[u] = d;
                } else {
                    gy[u] = d;
                }
            }
        }
        (gx, gy)
    }

    pub fn to_field(&self, v: &[f64]) -> InteriorField {
        let mut f = InteriorField::zeros(self.grid.clone(), self.mask.clone());
        for (u, &n) in self.nodes.iter().enumerate() {
            f.values[n] = v[u];
        }
        f
    }

    pub fn from_field(&self, f: &InteriorField) -> Vec<f64> {
        self.nodes.iter().map(|&n| f.values[n]).collect()
    }

    /// Values at the edge points from a chart field (cubic in z, spectral in θ).
    pub fn edge_values(&self, f: &ModeField) -> Vec<f64> {
        let n = f.n_theta();
        let nz = f.nz();
        let w0 = 2.0 * PI / f.period();
        let half = n / 2;
        let modes = f.modes();
        self.edges
            .iter()
            .zip(&self.edge_stencil)
            .map(|(e, &(s, w))| {
                let step = Complex64::from_polar(1.0, w0 * e.theta);
                let mut ph = Complex64::new(1.0, 0.0);
                let mut acc = 0.0;
                for k in 0..=half {
                    let c = (0..4).fold(Complex64::new(0.0, 0.0), |a, m| a + modes[k * nz + s + m] * w[m]);
                    let contrib = (c * ph).re;
                    acc += if k == 0 || (n % 2 == 0 && k == half) { contrib } else { 2.0 * contrib };
                    ph *= step;
                }
                acc
            })
            .collect()
    }

    /// Bicubic interpolation of interior unknowns at the chart's bottom row.
    pub fn bottom_values(&self, v: &[f64]) -> Vec<f64> {
        self.bottom.iter().map(|st| st.iter().map(|&(u, w)| w * v[u]).sum()).collect()
    }
}

fn link_frac(l: Link) -> f64 {
    match l {
        Link::Node(_) => 1.0,
        Link::Edge { frac, .. } => frac,
    }
}

/// Chart strip, its geometry samples, the cutoff and the optional interior.
#[derive(Debug, Clone)]
pub struct Domain {
    chart: ScaledChart,
    cutoff: CutoffFunction,
    n_theta: usize,
    period: f64,
    zgrid: Arc<ZGrid>,
    transform: ThetaTransform,
    theta: Vec<f64>,
    gamma: Vec<f64>,
    gamma_prime: Vec<f64>,
    gamma_bar: f64,
    phi_b: Vec<[f64; 3]>,
    interior: Option<Interior>,
    samples: Option<CurveSamples>,
}

impl Domain {
    pub fn new(curve: BoundaryCurve, opts: &DomainOptions) -> Result<Self, DomainError> {
        if opts.n_theta < 8 || opts.n_theta % 2 != 0 {
            return Err(DomainError::InvalidOptions("n_theta must be even and >= 8".into()));
        }
        if opts.n_z < 16 {
            return Err(DomainError::InvalidOptions("n_z must be >= 16".into()));
        }
        let base = GeodesicChart::new(curve)?;
        let chart = match (opts.delta0, opts.rho0) {
            (Some(d0), Some(r0)) => ScaledChart::new(base, opts.lambda, d0, r0)?,
            (None, None) => ScaledChart::with_default_depths(base, opts.lambda, opts.strip_depth)?,
            _ => return Err(DomainError::InvalidOptions("delta0 and rho0 must be given together".into())),
        };
        let cutoff = CutoffFunction::from_chart(&chart);
        let curve = chart.base().curve().clone();
        let z_max = cutoff.outer();
        let zgrid = Arc::new(match opts.layer {
            Some(l) if l < z_max => ZGrid::graded(z_max, opts.n_z, l, 8)?,
            _ => ZGrid::uniform(z_max, opts.n_z)?,
        });
        let period = curve.period();
        let theta = curve.theta_grid(opts.n_theta);
        let gamma: Vec<f64> = theta.iter().map(|&t| chart.base().gamma(t)).collect();
        let gamma_prime: Vec<f64> = theta.iter().map(|&t| chart.base().gamma_prime(t)).collect();
        let gamma_bar = if curve.is_closed() { curve.mean_curvature() } else { 0.0 };
        let closed = curve.is_closed();
        let phi_b = zgrid
            .nodes()
            .iter()
            .map(|&z| if closed { [cutoff.value(z), cutoff.d1(z), cutoff.d2(z)] } else { [1.0, 0.0, 0.0] })
            .collect();
        let mut dom = Self {
            chart,
            cutoff,
            n_theta: opts.n_theta,
            period,
            zgrid,
            transform: ThetaTransform::new(opts.n_theta),
            theta,
            gamma,
            gamma_prime,
            gamma_bar,
            phi_b,
            interior: None,
            samples: (closed && !curve.is_circle()).then(|| CurveSamples::new(&curve, 1024)),
        };
        if closed {
            dom.interior = Some(dom.build_interior(opts.h)?);
        }
        Ok(dom)
    }

    fn build_interior(&self, h: f64) -> Result<Interior, DomainError> {
        let d_in = self.chart.interior_edge();
        let z_max = self.z_max();
        if !(h > 0.0) || h > (self.cutoff.inner() - d_in) / 3.0 {
            return Err(DomainError::InvalidOptions(format!(
                "interior spacing h = {h} must be positive and <= {:.4}",
                (self.cutoff.inner() - d_in) / 3.0
            )));
        }
        let curve = self.curve();
        let samples = CurveSamples::new(curve, 1024);
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &samples.pos {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let grid = CartGrid {
            x0: xmin - h,
            y0: ymin - h,
            h,
            nx: ((xmax - xmin) / h).ceil() as usize + 3,
            ny: ((ymax - ymin) / h).ceil() as usize + 3,
        };
        let dist_of = |p: [f64; 2]| signed_distance(curve, &samples, p, 2.0 * z_max);
        let threshold = d_in + 1e-2 * h;
        let mut node_d = vec![(f64::NEG_INFINITY, 0.0); grid.len()];
        let mut node_unk = vec![usize::MAX; grid.len()];
        let mut nodes = Vec::new();
        let mut dist = Vec::new();
        let mut foot = Vec::new();
        for k in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = grid.index(i, k);
                let dt = dist_of(grid.point(i, k));
                node_d[idx] = dt;
                if dt.0 > threshold {
                    node_unk[idx] = nodes.len();
                    nodes.push(idx);
                    dist.push(dt.0);
                    foot.push(dt.1);
                }
            }
        }
        let mut edges = Vec::new();
        let mut links = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            let (i, k) = ((n % grid.nx) as i64, (n / grid.nx) as i64);
            let mut l = [Link::Node(0); 4];
            for (dir, (di, dk)) in [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().enumerate() {
                let (ni, nk) = (i + di, k + dk);
                let nb = grid.index(ni as usize, nk as usize);
                if node_unk[nb] != usize::MAX {
                    l[dir] = Link::Node(node_unk[nb]);
                    continue;
                }
                let a = grid.point(i as usize, k as usize);
                let b = grid.point(ni as usize, nk as usize);
                let (db, thb) = node_d[nb];
                let (frac, z, theta) = if db > d_in {
                    (1.0, db, thb)
                } else {
                    let g = |t: f64| dist_of([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).0 - d_in;
                    let t = illinois(g, 0.0, 1.0);
                    let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let (zd, th) = dist_of(p);
                    (t, zd, th)
                };
                let pos = [a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])];
                l[dir] = Link::Edge { id: edges.len(), frac };
                edges.push(EdgePoint { pos, z, theta });
            }
            links.push(l);
        }
        let fringe = (0..nodes.len())
            .filter(|&u| links[u].iter().any(|l| matches!(l, Link::Edge { .. })))
            .map(|u| (u, dist[u], foot[u]))
            .collect();
        let mask: Vec<bool> = node_unk.iter().map(|&u| u != usize::MAX).collect();
        let edge_stencil = edges.iter().map(|e| cubic_stencil(e.z, self.zgrid.nodes())).collect();
        let xs = [0.0, 1.0, 2.0, 3.0];
        let mut bottom = Vec::with_capacity(self.n_theta);
        for &th in &self.theta {
            let x = curve.position(th);
            let nn = curve.normal(th);
            let p = [x[0] + z_max * nn[0], x[1] + z_max * nn[1]];
            let fx = (p[0] - grid.x0) / h;
            let fy = (p[1] - grid.y0) / h;
            let (i0, k0) = (fx.floor() as usize - 1, fy.floor() as usize - 1);
            let wx = lagrange4(fx - i0 as f64, &xs);
            let wy = lagrange4(fy - k0 as f64, &xs);
            let mut st = [(0usize, 0.0); 16];
            for b in 0..4 {
                for a in 0..4 {
                    let u = node_unk[grid.index(i0 + a, k0 + b)];
                    if u == usize::MAX {
                        return Err(DomainError::InsufficientOverlap(format!(
                            "bicubic stencil at chart bottom (theta = {th:.4}) leaves the interior grid"
                        )));
                    }
                    st[4 * b + a] = (u, wx[a] * wy[b]);
                }
            }
            bottom.push(st);
        }
        Ok(Interior { grid, mask: Arc::new(mask), nodes, node_unk, dist, links, edges, edge_stencil, bottom, fringe })
    }

    pub fn chart(&self) -> &ScaledChart {
        &self.chart
    }

    pub fn curve(&self) -> &BoundaryCurve {
        self.chart.base().curve()
    }

    pub fn cutoff(&self) -> &CutoffFunction {
        &self.cutoff
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn zgrid(&self) -> &Arc<ZGrid> {
        &self.zgrid
    }

    pub fn z_max(&self) -> f64 {
        self.zgrid.z_max()
    }

    pub fn transform(&self) -> &ThetaTransform {
        &self.transform
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Curvature samples on the θ-grid.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_prime(&self) -> &[f64] {
        &self.gamma_prime
    }

    /// Mean curvature `-2π/L` (0 for open curves); exact curvature for circles.
    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    /// Whether the curvature is θ-independent (flat strip or circle).
    pub fn uniform_curvature(&self) -> bool {
        !self.curve().is_closed() || self.curve().is_circle()
    }

    /// `(φ^b, ∂_zφ^b, ∂_z²φ^b)` at each z-node.
    pub fn phi_b(&self) -> &[[f64; 3]] {
        &self.phi_b
    }

    pub fn interior(&self) -> Option<&Interior> {
        self.interior.as_ref()
    }

    pub fn zero_chart(&self) -> ModeField {
        ModeField::zeros(self.n_theta, self.period, self.zgrid.clone())
    }

    pub fn zero_interior(&self) -> Vec<f64> {
        vec![0.0; self.interior.as_ref().map_or(0, |i| i.n())]
    }

    /// Chart field sampled from a function of the physical point.
    pub fn chart_from_fn<F: Fn([f64; 2]) -> f64>(&self, f: F) -> ModeField {
        let curve = self.curve();
        ModeField::from_fn(self.n_theta, self.period, self.zgrid.clone(), |z, th| {
            let x = curve.position(th);
            let n = curve.normal(th);
            f([x[0] + z * n[0], x[1] + z * n[1]])
        })
    }

    pub fn interior_from_fn<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        match &self.interior {
            Some(int) => (0..int.n()).map(|u| f(int.point(u))).collect(),
            None => Vec::new(),
        }
    }

    /// Signed distance and foot parameter of a physical point.
    pub fn locate(&self, p: [f64; 2]) -> (f64, f64) {
        let curve = self.curve();
        match &self.samples {
            Some(s) => signed_distance(curve, s, p, f64::INFINITY),
            None => curve.project(p),
        }
    }

    /// Evaluates `ω = φ^b ω_chart + (1-φ^b) ω_cart` at a physical point.
    pub fn sample(&self, chart: &ModeField, interior: Option<&InteriorField>, p: [f64; 2]) -> Result<f64, FieldError> {
        let (d, th) = self.locate(p);
        if d < -1e-12 {
            return Err(FieldError::OutsideDomain(p[0], p[1]));
        }
        let closed = self.curve().is_closed();
        let phi = if closed { self.cutoff.value(d) } else { 1.0 };
        let mut acc = 0.0;
        if phi > 0.0 {
            if d > self.z_max() {
                return Err(FieldError::NotCovered(p[0], p[1]));
            }
            acc += phi * chart.eval(d.max(0.0), th);
        }
        if phi < 1.0 {
            let f = interior.ok_or(FieldError::NotCovered(p[0], p[1]))?;
            acc += (1.0 - phi) * f.interpolate(p).ok_or(FieldError::NotCovered(p[0], p[1]))?;
        }
        Ok(acc)
    }

    /// Quadrature weights for `∫_Ω f` under the partition `φ^b + (1-φ^b) = 1`:
    /// chart weights per `(θ_i, z_j)` (layout `i * nz + j`) and interior
    /// weights per unknown.
    pub fn quadrature_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let nz = self.zgrid.len();
        let dth = self.period / self.n_theta as f64;
        let mut wc = vec![0.0; self.n_theta * nz];
        for i in 0..self.n_theta {
            for (j, &z) in self.zgrid.nodes().iter().enumerate() {
                let jac = 1.0 + z * self.gamma[i];
                wc[i * nz + j] = dth * self.zgrid.weights()[j] * jac * self.phi_b[j][0];
            }
        }
        let wi = match &self.interior {
            Some(int) => {
                let h2 = int.grid.h * int.grid.h;
                int.dist.iter().map(|&d| h2 * (1.0 - self.cutoff.value(d))).collect()
            }
            None => Vec::new(),
        };
        (wc, wi)
    }

    /// `∫_Ω f` from physical chart samples and interior unknown values.
    pub fn integrate(&self, chart_phys: &[f64], interior: &[f64]) -> f64 {
        let (wc, wi) = self.quadrature_weights();
        let a: f64 = wc.iter().zip(chart_phys).map(|(w, v)| w * v).sum();
        let b: f64 = wi.iter().zip(interior).map(|(w, v)| w * v).sum();
        a + b
    }

    /// Boundary trace `∮ f dσ` of a chart field.
    pub fn boundary_integral(&self, f: &ModeField) -> f64 {
        f.mode(0)[0].re * self.period
    }
}

/// Dense boundary samples for fast signed-distance queries.
#[derive(Debug, Clone)]
struct CurveSamples {
    theta: Vec<f64>,
    pos: Vec<[f64; 2]>,
    normal: Vec<[f64; 2]>,
}

impl CurveSamples {
    fn new(curve: &BoundaryCurve, n: usize) -> Self {
        let theta = curve.theta_grid(n);
        let pos = theta.iter().map(|&t| curve.position(t)).collect();
        let normal = theta.iter().map(|&t| curve.normal(t)).collect();
        Self { theta, pos, normal }
    }
}

/// Signed distance (positive inside) and foot parameter. The nearest sample
/// seeds a Newton projection; points farther than `refine_below` keep the
/// sampled distance.
fn signed_distance(curve: &BoundaryCurve, s: &CurveSamples, p: [f64; 2], refine_below: f64) -> (f64, f64) {
    if !curve.is_closed() || curve.is_circle() {
        return curve.project(p);
    }
    let mut best = (f64::INFINITY, 0usize);
    for (j, q) in s.pos.iter().enumerate() {
        let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if d2 < best.0 {
            best = (d2, j);
        }
    }
    let dmin = best.0.sqrt();
    if dmin > refine_below {
        let (q, n) = (s.pos[best.1], s.normal[best.1]);
        let sign = if (p[0] - q[0]) * n[0] + (p[1] - q[1]) * n[1] >= 0.0 { 1.0 } else { -1.0 };
        return (sign * dmin, s.theta[best.1]);
    }
    curve.project_from(p, s.theta[best.1])
}

/// Root of `g` on `[a, b]` with `g(a) > 0 >= g(b)` by the Illinois method.
fn illinois<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    let (mut fa, mut fb) = (g(a), g(b));
    if fb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c);
        if fc.abs() < 1e-15 || (b - a).abs() < 1e-15 {
            return c;
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveKind;

    fn disk(h: f64) -> Domain {
        let curve = BoundaryCurve::new(CurveKind::Circle { radius: 1.0 }).unwrap();
        Domain::new(curve, &DomainOptions { h, ..Default::default() }).unwrap()
    }

    #[test]
    fn cutoff_regions_and_smoothness() {
        let c = CutoffFunction::new(0.1, 0.02, 0.01);
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(0.1), 1.0);
        assert_eq!(c.value(0.4), 0.0);
        assert_eq!(c.value(0.5), 0.0);
        for k in 0..200 {
            let d = 0.28 + 0.14 * k as f64 / 200.0;
            let v = c.value(d);
            assert!((0.0..=1.0).contains(&v));
            let e = 1e-6;
            let fd1 = (c.value(d + e) - c.value(d - e)) / (2.0 * e);
            let fd2 = (c.d1(d + e) - c.d1(d - e)) / (2.0 * e);
            assert!((fd1 - c.d1(d)).abs() < 1e-5);
            assert!((fd2 - c.d2(d)).abs() < 1e-3);
        }
        assert!(c.d2(0.3).abs() < 1e-12 && c.d2(0.4).abs() < 1e-12);
    }

    #[test]
    fn interior_laplacian_exact_on_quadratics() {
        let dom = disk(0.02);
        let int = dom.interior().unwrap();
        let f = |p: [f64; 2]| 1.0 - 2.0 * (p[0] * p[0] + p[1] * p[1]) + 0.3 * p[0] * p[1];
        let v: Vec<f64> = (0..int.n()).map(|u| f(int.point(u))).collect();
        let e: Vec<f64> = int.edges.iter().map(|e| f(e.pos)).collect();
        let (a, erows) = int.laplacian();
        let av = a.matvec(&v);
        for u in 0..int.n() {
            let lap = av[u] + erows[u].iter().map(|&(id, c)| c * e[id]).sum::<f64>();
            assert!((lap + 8.0).abs() < 1e-7, "u={u} lap={lap}");
        }
        let (gx, gy) = int.gradient(&v, &e);
        for u in 0..int.n() {
            let p = int.point(u);
            assert!((gx[u] - (-4.0 * p[0] + 0.3 * p[1])).abs() < 1e-9);
            assert!((gy[u] - (-4.0 * p[1] + 0.3 * p[0])).abs() < 1e-9);
        }
        for e in &int.edges {
            assert!(e.z >= dom.chart().interior_edge() - 1e-12);
        }
    }

    #[test]
    fn transfers_between_grids() {
        let dom = disk(0.02);
        let int = dom.interior().unwrap();
        let f = |p: [f64; 2]| (-(p[0] - 0.2).powi(2) - (p[1] + 0.1).powi(2)).exp();
        let chart = dom.chart_from_fn(f);
        let ev = int.edge_values(&chart);
        for (e, v) in int.edges.iter().zip(&ev) {
            assert!((v - f(e.pos)).abs() < 1e-6);
        }
        let vals = dom.interior_from_fn(f);
        let bv = int.bottom_values(&vals);
        for (i, &th) in dom.theta().iter().enumerate() {
            let p = dom.chart().base().chart_map(dom.z_max(), th).unwrap();
            assert!((bv[i] - f(p)).abs() < 1e-6);
        }
    }

    #[test]
    fn quadrature_of_constant_is_area() {
        let dom = disk(0.02);
        let nz = dom.zgrid().len();
        let ones = vec![1.0; dom.n_theta() * nz];
        let area = dom.integrate(&ones, &vec![1.0; dom.interior().unwrap().n()]);
        assert!((area - PI).abs() < 1e-3, "area {area}");
    }

    #[test]
    fn perturbed_circle_interior_builds() {
        let curve = BoundaryCurve::new(CurveKind::FourierPerturbedCircle {
            radius: 1.0,
            cos_coeffs: vec![0.0, 0.0, 0.03],
            sin_coeffs: vec![],
        })
        .unwrap();
        let dom = Domain::new(curve, &DomainOptions { h: 0.025, ..Default::default() }).unwrap();
        let int = dom.interior().unwrap();
        let d_in = dom.chart().interior_edge();
        for e in &int.edges {
            assert!(e.z >= d_in - 1e-9 && e.z < d_in + 0.03, "{e:?}");
        }
    }
}

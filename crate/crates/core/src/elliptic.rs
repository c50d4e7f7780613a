//! Elliptic solves: the per-mode half-line problem `(∂_z² − α²)φ = f`, the
//! chart and Cartesian operators of the composite domain, their overlapping
//! Schwarz coupling, and velocity recovery `u = ∇^⊥φ`.

use crate::domain::{Domain, Interior};
use crate::fields::{FieldError, InteriorField, ModeField, VelocityField, ZGrid};
use crate::linalg::{BandedLu, LinalgError, SparseRows, ThreeBand, ThreeBandLu};
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EllipticError {
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error("curvature fixed point does not contract (update ratio {0:.3}); lambda too large")]
    LambdaTooLarge(f64),
    #[error("Schwarz iteration did not converge in {sweeps} sweeps (last update {update:.3e})")]
    NotConverged { sweeps: usize, update: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, EllipticError>;

/// Green function of `−(∂_z² − α²)` on the half line with Dirichlet data at 0:
/// `K(y, z) = (e^{−α|y−z|} − e^{−α(y+z)}) / 2α`.
pub fn green_kernel(alpha: f64, y: f64, z: f64) -> f64 {
    let a = alpha.abs();
    ((-a * (y - z).abs()).exp() - (-a * (y + z)).exp()) / (2.0 * a)
}

/// Boundary row `dz·∂_z + (id + abs_k·|k|)` imposed at an end of the z-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndRow {
    pub dz: f64,
    pub id: f64,
    pub abs_k: f64,
}

impl EndRow {
    pub const DIRICHLET: EndRow = EndRow { dz: 0.0, id: 1.0, abs_k: 0.0 };
    /// `∂_z + |k|`: exact decay closure for homogeneous solutions `e^{−|k|z}`.
    pub const DECAY: EndRow = EndRow { dz: 1.0, id: 0.0, abs_k: 1.0 };

    /// Vorticity boundary row `ν(∂_z + |k|)`.
    pub fn vorticity(nu: f64) -> Self {
        EndRow { dz: nu, id: 0.0, abs_k: nu }
    }

    fn coeffs(&self, first: [f64; 3], k: f64, at_start: bool) -> [f64; 3] {
        let mut w = [self.dz * first[0], self.dz * first[1], self.dz * first[2]];
        let diag = self.id + self.abs_k * k.abs();
        if at_start {
            w[0] += diag;
        } else {
            w[2] += diag;
        }
        w
    }
}

/// Three-band matrix of `a − b(∂_z² + c(z)∂_z − k²/J(z)²)` with end rows;
/// `c(z) = γ/J`, `J = 1 + zγ`.
pub fn mode_rows(zgrid: &ZGrid, k: f64, gamma: f64, a: f64, b: f64, top: EndRow, bottom: EndRow) -> ThreeBand {
    let st = zgrid.stencils();
    let n = zgrid.len();
    let mut rows = Vec::with_capacity(n);
    rows.push((0, top.coeffs(st.first[0].1, k, true)));
    for j in 1..n - 1 {
        let z = zgrid.nodes()[j];
        let jac = 1.0 + z * gamma;
        let (s, d2) = st.second[j];
        let d1 = st.first[j].1;
        let c = gamma / jac;
        let mut w = [0.0; 3];
        for m in 0..3 {
            w[m] = -b * (d2[m] + c * d1[m]);
        }
        w[1] += a + b * k * k / (jac * jac);
        rows.push((s, w));
    }
    rows.push((n - 3, bottom.coeffs(st.first[n - 1].1, k, false)));
    ThreeBand { rows }
}

/// Half-line problem `(∂_z² − α²)φ = f`, `φ(0) = bc`, decaying as `z → ∞`.
#[derive(Debug, Clone)]
pub struct ModeEllipticProblem {
    pub alpha: f64,
    pub rhs: Vec<Complex64>,
    pub bc: Complex64,
    pub zgrid: Arc<ZGrid>,
}

/// Second-order finite-difference solve of a [`ModeEllipticProblem`]; the far
/// end carries the decay row `(∂_z + |α|)φ = 0` (pure Neumann for `α = 0`).
pub fn solve_mode(p: &ModeEllipticProblem) -> Result<Vec<Complex64>> {
    let n = p.zgrid.len();
    if p.rhs.len() != n {
        return Err(EllipticError::Field(FieldError::Shape { expected: n, got: p.rhs.len() }));
    }
    if !p.bc.re.is_finite() || !p.bc.im.is_finite() || p.rhs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(EllipticError::Precondition("non-finite data".into()));
    }
    if p.alpha == 0.0 {
        let fmax = p.rhs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tail = p.rhs[n - n / 10..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        if fmax > 0.0 && tail > 1e-6 * fmax {
            return Err(EllipticError::IllPosed(format!(
                "zero mode with non-decaying rhs (tail/max = {:.2e})",
                tail / fmax
            )));
        }
    }
    let sys = mode_rows(&p.zgrid, p.alpha, 0.0, 0.0, -1.0, EndRow::DIRICHLET, EndRow::DECAY);
    let lu = sys.factor()?;
    let mut rhs = p.rhs.clone();
    rhs[0] = p.bc;
    rhs[n - 1] = Complex64::new(0.0, 0.0);
    Ok(lu.solve(&rhs))
}

/// Flux-form rows of `a − b L̄_k` with `L̄_k f = J^{−1}∂_z(J∂_z f) − k²J^{−2}f`
/// on the dual cells of the z-grid. Row 0 takes the wall flux
/// `∂_z f(0) = s − |k| f(0)` with `s` moved to the right-hand side; the last row
/// is Dirichlet or carries the decay flux `∂_z f = −|k| f`.
pub fn flux_rows(zgrid: &ZGrid, k: f64, gamma: f64, a: f64, b: f64, bottom_dirichlet: bool) -> ThreeBand {
    let z = zgrid.nodes();
    let w = zgrid.weights();
    let n = z.len();
    let jac = |x: f64| 1.0 + x * gamma;
    let kk = k.abs();
    let mut rows = Vec::with_capacity(n);
    let h0 = z[1] - z[0];
    let c0 = jac(0.5 * (z[0] + z[1])) / (jac(z[0]) * w[0] * h0);
    rows.push((0, [a + b * (c0 - kk / w[0] + k * k / jac(z[0]).powi(2)), -b * c0, 0.0]));
    for j in 1..n - 1 {
        let jj = jac(z[j]);
        let cm = jac(0.5 * (z[j - 1] + z[j])) / (jj * w[j] * (z[j] - z[j - 1]));
        let cp = jac(0.5 * (z[j] + z[j + 1])) / (jj * w[j] * (z[j + 1] - z[j]));
        rows.push((j - 1, [-b * cm, a + b * (cm + cp + k * k / (jj * jj)), -b * cp]));
    }
    if bottom_dirichlet {
        rows.push((n - 3, [0.0, 0.0, 1.0]));
    } else {
        let jn = jac(z[n - 1]);
        let cm = jac(0.5 * (z[n - 2] + z[n - 1])) / (jn * w[n - 1] * (z[n - 1] - z[n - 2]));
        rows.push((n - 3, [0.0, -b * cm, a + b * (cm + kk / w[n - 1] + k * k / (jn * jn))]));
    }
    ThreeBand { rows }
}

/// End closure of a [`ModeOperator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    /// Rows 0 and `N` replaced by pointwise boundary rows.
    Rows { top: EndRow, bottom: EndRow },
    /// Flux form with wall data `s = ∂_z f + |k| f` at `z = 0`.
    Flux { bottom_dirichlet: bool },
}

/// Per-mode chart operator `a − b L̄_k` with `L̄_k` the Laplacian at the mean
/// curvature. With [`Closure::Rows`], rows 0 and `N` of the right-hand side are
/// replaced by the boundary data; with [`Closure::Flux`], `top` is the wall
/// data `s` and `bottom` is used only for a Dirichlet bottom.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    systems: Vec<ThreeBand>,
    lus: Vec<ThreeBandLu>,
    pub a: f64,
    pub b: f64,
    pub closure: Closure,
    w0: f64,
}

impl ModeOperator {
    pub fn new(dom: &Domain, a: f64, b: f64, top: EndRow, bottom: EndRow) -> Result<Self> {
        Self::with_closure(dom, a, b, Closure::Rows { top, bottom })
    }

    pub fn with_closure(dom: &Domain, a: f64, b: f64, closure: Closure) -> Result<Self> {
        let proto = dom.zero_chart();
        let mut systems = Vec::with_capacity(dom.n_theta());
        let mut lus = Vec::with_capacity(dom.n_theta());
        for k in 0..dom.n_theta() {
            let wk = proto.wavenumber(k);
            let sys = match closure {
                Closure::Rows { top, bottom } => mode_rows(dom.zgrid(), wk, dom.gamma_bar(), a, b, top, bottom),
                Closure::Flux { bottom_dirichlet } => flux_rows(dom.zgrid(), wk, dom.gamma_bar(), a, b, bottom_dirichlet),
            };
            lus.push(sys.factor()?);
            systems.push(sys);
        }
        Ok(Self { systems, lus, a, b, closure, w0: dom.zgrid().weights()[0] })
    }

    pub fn solve(&self, rhs: &ModeField, top: &[Complex64], bottom: &[Complex64]) -> ModeField {
        let mut out = rhs.clone();
        let nz = rhs.nz();
        let mut buf = vec![Complex64::new(0.0, 0.0); nz];
        for (k, lu) in self.lus.iter().enumerate() {
            buf.copy_from_slice(rhs.mode(k));
            match self.closure {
                Closure::Rows { .. } => {
                    buf[0] = top[k];
                    buf[nz - 1] = bottom[k];
                }
                Closure::Flux { bottom_dirichlet } => {
                    buf[0] -= top[k] * (self.b / self.w0);
                    if bottom_dirichlet {
                        buf[nz - 1] = bottom[k];
                    }
                }
            }
            out.mode_mut(k).copy_from_slice(&lu.solve(&buf));
        }
        out.enforce_hermitian();
        out
    }

    /// Applies the matrix (including end rows) to `f`.
    pub fn apply(&self, f: &ModeField) -> ModeField {
        let mut out = f.clone();
        for (k, sys) in self.systems.iter().enumerate() {
            let v = sys.apply(f.mode(k));
            out.mode_mut(k).copy_from_slice(&v);
        }
        out
    }
}

/// Flux-form chart Laplacian with wall data `s = ∂_z f + |k| f` at `z = 0`;
/// the last row is zero for a Dirichlet bottom and uses the decay flux
/// otherwise. Includes the θ-varying curvature remainder.
pub fn flux_laplacian(dom: &Domain, f: &ModeField, s: &[Complex64], bottom_dirichlet: bool) -> ModeField {
    let mut out = f.zeros_like();
    let zg = dom.zgrid();
    let w0 = zg.weights()[0];
    for k in 0..f.n_theta() {
        let rows = flux_rows(zg, f.wavenumber(k), dom.gamma_bar(), 0.0, -1.0, bottom_dirichlet);
        let mut v = rows.apply(f.mode(k));
        v[0] -= s[k] / w0;
        if bottom_dirichlet {
            let n = v.len();
            v[n - 1] = Complex64::new(0.0, 0.0);
        }
        out.mode_mut(k).copy_from_slice(&v);
    }
    if !dom.uniform_curvature() {
        out.axpy(1.0, &curvature_remainder(dom, f));
    }
    out
}

/// Laplacian of a chart field in geodesic coordinates,
/// `∂_z² + (γ/J)∂_z + (1/J)∂_θ((1/J)∂_θ)`, at all z-nodes (one-sided at the ends).
pub fn chart_laplacian(dom: &Domain, f: &ModeField) -> ModeField {
    let mut out = mean_laplacian(dom, f);
    if !dom.uniform_curvature() {
        out.axpy(1.0, &curvature_remainder(dom, f));
    }
    out
}

/// Laplacian at the mean curvature `γ̄`, mode by mode.
pub fn mean_laplacian(dom: &Domain, f: &ModeField) -> ModeField {
    let st = dom.zgrid().stencils();
    let z = dom.zgrid().nodes();
    let g = dom.gamma_bar();
    let mut out = f.zeros_like();
    for k in 0..f.n_theta() {
        let w = f.wavenumber(k);
        let m = f.mode(k);
        let d1 = st.d1(m);
        let d2 = st.d2(m);
        let o = out.mode_mut(k);
        for j in 0..m.len() {
            let jac = 1.0 + z[j] * g;
            o[j] = d2[j] + d1[j] * (g / jac) - m[j] * (w * w / (jac * jac));
        }
    }
    out
}

/// `L f − L̄ f`: the part of the chart Laplacian due to θ-varying curvature.
pub fn curvature_remainder(dom: &Domain, f: &ModeField) -> ModeField {
    let tr = dom.transform();
    let nz = f.nz();
    let n = f.n_theta();
    let z = dom.zgrid().nodes();
    let g = dom.gamma();
    let gb = dom.gamma_bar();
    let fz = f.d_z().to_physical_with(tr);
    let fth = f.d_theta();
    let fthth = fth.d_theta().to_physical_with(tr);
    let mut q = fth.to_physical_with(tr);
    for i in 0..n {
        for j in 0..nz {
            q[i * nz + j] /= 1.0 + z[j] * g[i];
        }
    }
    let q = ModeField::from_physical(&q, n, f.period(), f.zgrid().clone(), tr).d_theta().to_physical_with(tr);
    let mut r = vec![0.0; n * nz];
    for i in 0..n {
        for j in 0..nz {
            let jac = 1.0 + z[j] * g[i];
            let jb = 1.0 + z[j] * gb;
            let idx = i * nz + j;
            r[idx] = (g[i] / jac - gb / jb) * fz[idx] + q[idx] / jac - fthth[idx] / (jb * jb);
        }
    }
    ModeField::from_physical(&r, n, f.period(), f.zgrid().clone(), tr)
}

/// Cartesian operator `a − bΔ_h` on the interior unknowns with Dirichlet
/// values at the cut-cell edge points.
#[derive(Debug, Clone)]
pub struct InteriorOperator {
    lap: SparseRows,
    edge_rows: Vec<Vec<(usize, f64)>>,
    lu: BandedLu,
    pub a: f64,
    pub b: f64,
}

impl InteriorOperator {
    pub fn new(int: &Interior, a: f64, b: f64) -> Result<Self> {
        let (lap, edge_rows) = int.laplacian();
        let lu = BandedLu::factor(&lap.shifted(a, -b))?;
        Ok(Self { lap, edge_rows, lu, a, b })
    }

    pub fn solve(&self, rhs: &[f64], edge: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = rhs
            .iter()
            .zip(&self.edge_rows)
            .map(|(&f, er)| f + self.b * er.iter().map(|&(id, c)| c * edge[id]).sum::<f64>())
            .collect();
        self.lu.solve(&r)
    }

    /// Discrete Laplacian `A v + E e`.
    pub fn laplacian(&self, v: &[f64], edge: &[f64]) -> Vec<f64> {
        let mut out = self.lap.matvec(v);
        for (o, er) in out.iter_mut().zip(&self.edge_rows) {
            *o += er.iter().map(|&(id, c)| c * edge[id]).sum::<f64>();
        }
        out
    }
}

/// A field on the composite domain: chart modes plus interior unknowns.
#[derive(Debug, Clone)]
pub struct CompositeField {
    pub chart: ModeField,
    pub interior: Vec<f64>,
}

impl CompositeField {
    pub fn zeros(dom: &Domain) -> Self {
        Self { chart: dom.zero_chart(), interior: dom.zero_interior() }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(dom: &Domain, f: F) -> Self {
        Self { chart: dom.chart_from_fn(&f), interior: dom.interior_from_fn(&f) }
    }

    pub fn axpy(&mut self, a: f64, other: &CompositeField) {
        self.chart.axpy(a, &other.chart);
        for (x, y) in self.interior.iter_mut().zip(&other.interior) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.chart.scale(s);
        self.interior.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        let c = self.chart.max_abs_mode();
        self.interior.iter().fold(c, |m, v| m.max(v.abs()))
    }

    pub fn interior_field(&self, dom: &Domain) -> Option<InteriorField> {
        dom.interior().map(|int| int.to_field(&self.interior))
    }
}

/// Convergence record of a coupled solve.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub sweeps: usize,
    pub updates: Vec<f64>,
}

/// `a − bΔ` on the composite domain: chart and interior operators coupled by
/// Dirichlet–Dirichlet alternating Schwarz on the overlap, plus a fixed-point
/// for the θ-varying curvature remainder in the chart.
#[derive(Debug, Clone)]
pub struct CoupledOperator {
    pub chart: ModeOperator,
    pub interior: Option<InteriorOperator>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl CoupledOperator {
    /// `top` is the row at `z = 0`; the chart bottom is Dirichlet when an
    /// interior exists and the decay row otherwise.
    pub fn new(dom: &Domain, a: f64, b: f64, top: EndRow) -> Result<Self> {
        let bottom = if dom.interior().is_some() { EndRow::DIRICHLET } else { EndRow::DECAY };
        Self::with_closure(dom, a, b, Closure::Rows { top, bottom })
    }

    /// Flux-form chart closure with wall data `s = ∂_z u + |k| u`.
    pub fn flux(dom: &Domain, a: f64, b: f64) -> Result<Self> {
        Self::with_closure(dom, a, b, Closure::Flux { bottom_dirichlet: dom.interior().is_some() })
    }

    fn with_closure(dom: &Domain, a: f64, b: f64, closure: Closure) -> Result<Self> {
        let chart = ModeOperator::with_closure(dom, a, b, closure)?;
        let interior = dom.interior().map(|int| InteriorOperator::new(int, a, b)).transpose()?;
        Ok(Self { chart, interior, tol: 1e-8, max_sweeps: 100 })
    }

    /// Poisson operator `Δ` with `φ = 0` on the boundary.
    pub fn poisson(dom: &Domain) -> Result<Self> {
        Self::new(dom, 0.0, -1.0, EndRow::DIRICHLET)
    }

    /// Solves `(a − bΔ)u = rhs` with the `z = 0` data `top`. For the row
    /// closure, rows 0 and `N` of `rhs.chart` are ignored.
    pub fn solve(
        &self,
        dom: &Domain,
        rhs: &CompositeField,
        top: &[Complex64],
        guess: Option<&CompositeField>,
    ) -> Result<(CompositeField, SolveStats)> {
        self.solve_inner(dom, rhs, &|_: &ModeField| top.to_vec(), false, guess)
    }

    /// As [`solve`](Self::solve), with wall data recomputed from the current
    /// chart iterate at every sweep.
    pub fn solve_feedback(
        &self,
        dom: &Domain,
        rhs: &CompositeField,
        top: &dyn Fn(&ModeField) -> Vec<Complex64>,
        guess: Option<&CompositeField>,
    ) -> Result<(CompositeField, SolveStats)> {
        self.solve_inner(dom, rhs, top, true, guess)
    }

    fn solve_inner(
        &self,
        dom: &Domain,
        rhs: &CompositeField,
        top: &dyn Fn(&ModeField) -> Vec<Complex64>,
        feedback: bool,
        guess: Option<&CompositeField>,
    ) -> Result<(CompositeField, SolveStats)> {
        let n = dom.n_theta();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let curved = !dom.uniform_curvature();
        let mut stats = SolveStats::default();
        let int = dom.interior();
        if int.is_none() && curved {
            return Err(EllipticError::Precondition("curved boundary without interior grid".into()));
        }
        let mut cur = match guess {
            Some(g) => g.clone(),
            None => CompositeField::zeros(dom),
        };
        if int.is_none() && !feedback {
            let chart = self.chart.solve(&rhs.chart, &top(&cur.chart), &zero);
            stats.sweeps = 1;
            return Ok((CompositeField { chart, interior: Vec::new() }, stats));
        }
        let mut prev_update = f64::INFINITY;
        for sweep in 1..=self.max_sweeps {
            let bottom = match int {
                Some(int) => physical_trace_to_modes(dom, &int.bottom_values(&cur.interior)),
                None => zero.clone(),
            };
            let s = top(&cur.chart);
            let chart = if curved {
                let mut r = rhs.chart.clone();
                r.axpy(self.chart.b, &curvature_remainder(dom, &cur.chart));
                self.chart.solve(&r, &s, &bottom)
            } else {
                self.chart.solve(&rhs.chart, &s, &bottom)
            };
            let interior = match (int, &self.interior) {
                (Some(int), Some(iop)) => iop.solve(&rhs.interior, &int.edge_values(&chart)),
                _ => Vec::new(),
            };
            let mut du = 0.0f64;
            for (x, y) in chart.modes().iter().zip(cur.chart.modes()) {
                du = du.max((x - y).norm());
            }
            for (x, y) in interior.iter().zip(&cur.interior) {
                du = du.max((x - y).abs());
            }
            cur = CompositeField { chart, interior };
            let scale = cur.max_abs().max(1e-300);
            let update = du / scale;
            stats.sweeps = sweep;
            stats.updates.push(update);
            if update < self.tol || du == 0.0 {
                return Ok((cur, stats));
            }
            if sweep >= 3 && update > prev_update && update > 1e-3 {
                return Err(if curved {
                    EllipticError::LambdaTooLarge(update / prev_update)
                } else {
                    EllipticError::NotConverged { sweeps: sweep, update }
                });
            }
            prev_update = update;
        }
        Err(EllipticError::NotConverged { sweeps: self.max_sweeps, update: prev_update })
    }

    /// Composite Laplacian `Δu` at interior rows of both grids, with the chart
    /// bottom/interior edge values taken from the other representation.
    pub fn laplacian(&self, dom: &Domain, u: &CompositeField) -> CompositeField {
        let chart = chart_laplacian(dom, &u.chart);
        let interior = match (dom.interior(), &self.interior) {
            (Some(int), Some(iop)) => iop.laplacian(&u.interior, &int.edge_values(&u.chart)),
            _ => Vec::new(),
        };
        CompositeField { chart, interior }
    }
}

/// θ-samples at the chart nodes → slot-ordered Fourier coefficients.
pub fn physical_trace_to_modes(dom: &Domain, vals: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dom.transform().forward(&mut buf);
    buf
}

/// Curvature-remainder fixed point for the chart alone with given Dirichlet
/// data at both ends: `L̄φ^{m+1} = f − Rφ^m`. Returns the solution and the
/// relative update of each iteration. Fails if the second update is more than
/// half the first.
pub fn chart_fixed_point(
    dom: &Domain,
    op: &ModeOperator,
    rhs: &ModeField,
    top: &[Complex64],
    bottom: &[Complex64],
) -> Result<(ModeField, Vec<f64>)> {
    let mut phi = op.solve(rhs, top, bottom);
    let mut updates = Vec::new();
    if dom.uniform_curvature() {
        return Ok((phi, updates));
    }
    for it in 0..50 {
        let mut r = rhs.clone();
        r.axpy(op.b, &curvature_remainder(dom, &phi));
        let next = op.solve(&r, top, bottom);
        let du = next.modes().iter().zip(phi.modes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let upd = du / next.max_abs_mode().max(1e-300);
        phi = next;
        updates.push(upd);
        if it == 1 && upd > 0.5 * updates[0] && updates[0] > 1e-12 {
            return Err(EllipticError::LambdaTooLarge(upd / updates[0]));
        }
        if upd < 1e-10 {
            return Ok((phi, updates));
        }
    }
    Err(EllipticError::LambdaTooLarge(updates[updates.len() - 1] / updates[updates.len() - 2]))
}

/// Stream function (chart and interior) with `Δφ = ω`, `φ|_{∂Ω} = 0`.
pub fn stream_function(
    dom: &Domain,
    poisson: &CoupledOperator,
    omega: &CompositeField,
    guess: Option<&CompositeField>,
) -> Result<CompositeField> {
    let zero = vec![Complex64::new(0.0, 0.0); dom.n_theta()];
    if dom.interior().is_none() {
        check_zero_mode_decay(&omega.chart)?;
    }
    Ok(poisson.solve(dom, omega, &zero, guess)?.0)
}

fn check_zero_mode_decay(f: &ModeField) -> Result<()> {
    let m = f.mode(0);
    let n = m.len();
    let fmax = f.max_abs_mode();
    let tail = m[n - n / 10..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    if fmax > 0.0 && tail > 1e-6 * fmax {
        return Err(EllipticError::IllPosed(format!(
            "zero mode of the source does not decay toward the strip bottom (tail/max = {:.2e})",
            tail / fmax
        )));
    }
    Ok(())
}

/// Velocity `u = ∇^⊥φ`: chart components `u·τ = ∂_zφ`, `u·n = −J^{−1}∂_θφ`;
/// Cartesian `(u₁, u₂) = (∂₂φ, −∂₁φ)` in the interior.
pub fn velocity(dom: &Domain, psi: &CompositeField) -> VelocityField {
    let u_tau = psi.chart.d_z();
    let mut u_n = psi.chart.d_theta();
    divide_by_jacobian(dom, &mut u_n);
    u_n.scale(-1.0);
    let far = dom.interior().map(|int| {
        let edge = int.edge_values(&psi.chart);
        let (gx, gy) = int.gradient(&psi.interior, &edge);
        let u1 = int.to_field(&gy);
        let u2 = int.to_field(&gx.iter().map(|v| -v).collect::<Vec<_>>());
        (u1, u2)
    });
    VelocityField { u_tau, u_n, far }
}

/// In-place division by `J = 1 + zγ(θ)`.
pub fn divide_by_jacobian(dom: &Domain, f: &mut ModeField) {
    let z = dom.zgrid().nodes();
    if dom.uniform_curvature() {
        let g = dom.gamma_bar();
        for k in 0..f.n_theta() {
            for (j, c) in f.mode_mut(k).iter_mut().enumerate() {
                *c /= 1.0 + z[j] * g;
            }
        }
    } else {
        let tr = dom.transform();
        let nz = f.nz();
        let mut p = f.to_physical_with(tr);
        for (i, &g) in dom.gamma().iter().enumerate() {
            for j in 0..nz {
                p[i * nz + j] /= 1.0 + z[j] * g;
            }
        }
        *f = ModeField::from_physical(&p, f.n_theta(), f.period(), f.zgrid().clone(), tr);
    }
}

/// Biot–Savart: stream function and velocity of a composite vorticity.
pub fn biot_savart(
    dom: &Domain,
    poisson: &CoupledOperator,
    omega: &CompositeField,
    guess: Option<&CompositeField>,
) -> Result<(CompositeField, VelocityField)> {
    let psi = stream_function(dom, poisson, omega, guess)?;
    let u = velocity(dom, &psi);
    Ok((psi, u))
}

/// Chart divergence `J^{−1}[∂_z(J u·n) + ∂_θ(u·τ)]`.
pub fn chart_divergence(dom: &Domain, u: &VelocityField) -> ModeField {
    let z = dom.zgrid().nodes();
    let tr = dom.transform();
    let nz = u.u_n.nz();
    let n = u.u_n.n_theta();
    let mut ju = u.u_n.to_physical_with(tr);
    for (i, &g) in dom.gamma().iter().enumerate() {
        for j in 0..nz {
            ju[i * nz + j] *= 1.0 + z[j] * g;
        }
    }
    let ju = ModeField::from_physical(&ju, n, u.u_n.period(), u.u_n.zgrid().clone(), tr);
    let mut div = ju.d_z();
    div.axpy(1.0, &u.u_tau.d_theta());
    divide_by_jacobian(dom, &mut div);
    div
}

/// `(1/z)∂_θφ` with the `z = 0` value taken as the limit `∂_z∂_θφ(0)`.
pub fn weighted_stream_ratio(phi: &ModeField) -> Result<ModeField> {
    let scale = phi.max_abs_mode().max(1e-300);
    for k in 0..phi.n_theta() {
        if phi.mode(k)[0].norm() > 1e-12 * scale {
            return Err(EllipticError::Precondition(format!(
                "stream function does not vanish at z = 0 (mode slot {k})"
            )));
        }
    }
    let dth = phi.d_theta();
    let lim = dth.d_z();
    let z = phi.zgrid().nodes().to_vec();
    let mut out = dth.clone();
    for k in 0..phi.n_theta() {
        let l0 = lim.mode(k)[0];
        for (j, c) in out.mode_mut(k).iter_mut().enumerate() {
            *c = if j == 0 { l0 } else { *c / z[j] };
        }
    }
    Ok(out)
}

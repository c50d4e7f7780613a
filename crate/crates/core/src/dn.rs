//! Dirichlet–Neumann operator `DN ω = −∂_n ω*` with `ω*` the harmonic
//! extension of a boundary trace, split as `DN = |∂_θ| + B`.

use crate::domain::Domain;
use crate::elliptic::{chart_laplacian, CompositeField, CoupledOperator, EllipticError};
use crate::fields::ModeField;
use num_complex::Complex64;

/// Harmonic extension of a trace given as slot-ordered θ-Fourier coefficients.
pub fn harmonic_extend(dom: &Domain, laplace: &CoupledOperator, trace: &[Complex64]) -> Result<CompositeField, EllipticError> {
    if trace.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(EllipticError::Precondition("non-finite trace".into()));
    }
    // the zero mode extends as a constant
    let mean = trace[0].re;
    let mut rest = trace.to_vec();
    rest[0] = Complex64::new(0.0, 0.0);
    let rhs = CompositeField::zeros(dom);
    let mut ext = if rest.iter().all(|c| c.norm() == 0.0) { rhs.clone() } else { laplace.solve(dom, &rhs, &rest, None)?.0 };
    if mean != 0.0 {
        for c in ext.chart.mode_mut(0) {
            *c += mean;
        }
        ext.interior.iter_mut().for_each(|v| *v += mean);
    }
    Ok(ext)
}

/// `B` from a harmonic extension:
/// `(Bω)_α = ∫₀^Z e^{−|k|y} [Δ(φ^b ω*) − R(φ^b ω*)]_α dy` where `R` is the
/// curvature part of the chart Laplacian. Zero for the zero mode.
pub fn correction_from_extension(dom: &Domain, ext: &ModeField) -> Vec<Complex64> {
    let n = dom.n_theta();
    let nz = ext.nz();
    let z = dom.zgrid().nodes();
    let phi_b = dom.phi_b();
    // F = (Δφ^b)ω* + 2∂_zφ^b ∂_zω*, with Δφ^b = φ^b'' + (γ/J)φ^b'
    let mut w = ext.clone();
    for k in 0..n {
        for (j, c) in w.mode_mut(k).iter_mut().enumerate() {
            *c *= phi_b[j][0];
        }
    }
    let lap_w = chart_laplacian(dom, &w);
    let st = dom.zgrid().stencils();
    let ext_z = ext.d_z();
    let gamma_terms = commutator_geometry(dom, ext);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        if k == 0 || k == n / 2 {
            continue;
        }
        let kk = ext.wavenumber(k).abs();
        let wm = w.mode(k);
        let d2 = st.d2(wm);
        let lw = lap_w.mode(k);
        let f = gamma_terms.mode(k);
        let e = ext_z.mode(k);
        let em = ext.mode(k);
        let integrand: Vec<Complex64> = (0..nz)
            .map(|j| {
                // flat part ∂_z² − k² of Δ(φ^b ω*), discretized like the chart Laplacian
                let flat = d2[j] - wm[j] * (kk * kk);
                let remainder = lw[j] - flat;
                let commutator = em[j] * phi_b[j][2] + e[j] * (2.0 * phi_b[j][1]) + f[j];
                (commutator - remainder) * (-kk * z[j]).exp()
            })
            .collect();
        *o = dom.zgrid().integrate(&integrand);
    }
    out
}

/// `(γ/J) φ^b' ω*` per mode.
fn commutator_geometry(dom: &Domain, ext: &ModeField) -> ModeField {
    let z = dom.zgrid().nodes();
    let phi_b = dom.phi_b();
    let nz = ext.nz();
    if dom.uniform_curvature() {
        let g = dom.gamma_bar();
        let mut out = ext.clone();
        for k in 0..ext.n_theta() {
            for (j, c) in out.mode_mut(k).iter_mut().enumerate() {
                *c *= phi_b[j][1] * g / (1.0 + z[j] * g);
            }
        }
        out
    } else {
        let tr = dom.transform();
        let mut p = ext.to_physical_with(tr);
        for (i, &g) in dom.gamma().iter().enumerate() {
            for j in 0..nz {
                p[i * nz + j] *= phi_b[j][1] * g / (1.0 + z[j] * g);
            }
        }
        ModeField::from_physical(&p, ext.n_theta(), ext.period(), ext.zgrid().clone(), tr)
    }
}

/// `DN` applied to a trace: `|k| ω_α + (Bω)_α`.
pub fn apply_dn(dom: &Domain, laplace: &CoupledOperator, trace: &[Complex64]) -> Result<Vec<Complex64>, EllipticError> {
    let ext = harmonic_extend(dom, laplace, trace)?;
    let b = correction_from_extension(dom, &ext.chart);
    let proto = dom.zero_chart();
    Ok(trace
        .iter()
        .enumerate()
        .map(|(k, &t)| if k == 0 { Complex64::new(0.0, 0.0) } else { t * proto.wavenumber(k).abs() + b[k] })
        .collect())
}

/// `−∂_z ω*(0)` from a one-sided difference; cross-check for [`apply_dn`].
pub fn dn_direct(dom: &Domain, laplace: &CoupledOperator, trace: &[Complex64]) -> Result<Vec<Complex64>, EllipticError> {
    let ext = harmonic_extend(dom, laplace, trace)?;
    let (s, w) = dom.zgrid().stencils().first[0];
    Ok((0..dom.n_theta())
        .map(|k| {
            let m = ext.chart.mode(k);
            -(m[s] * w[0] + m[s + 1] * w[1] + m[s + 2] * w[2])
        })
        .collect())
}

/// Real orthonormal Fourier coordinates of a trace: `[c₀, c₁, s₁, …]`,
/// scaled so that the Euclidean norm equals the `L²(∂Ω)` norm.
pub fn to_real_coords(trace: &[Complex64], period: f64) -> Vec<f64> {
    let n = trace.len();
    let mut v = Vec::with_capacity(n - 1);
    v.push(trace[0].re * period.sqrt());
    let s = (2.0 * period).sqrt();
    for c in &trace[1..n / 2] {
        v.push(c.re * s);
        v.push(-c.im * s);
    }
    v
}

pub fn from_real_coords(v: &[f64], n: usize, period: f64) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(0.0, 0.0); n];
    t[0] = Complex64::new(v[0] / period.sqrt(), 0.0);
    let s = (2.0 * period).sqrt();
    for m in 1..n / 2 {
        let c = Complex64::new(v[2 * m - 1] / s, -v[2 * m] / s);
        t[m] = c;
        t[n - m] = c.conj();
    }
    t
}

/// How the dense `B` is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnAssembly {
    /// Columns from the integral formula of [`correction_from_extension`].
    Integral,
    /// Dirichlet energy `∫_Ω ∇ω*_a·∇ω*_b` of the extensions minus `|k|`:
    /// symmetric and positive semidefinite by construction.
    Energy,
}

/// Gradient samples `[∂_zω, J^{−1}∂_θω]` on the chart followed by `[∂₁ω, ∂₂ω]`
/// at the interior unknowns, matching the layout of the quadrature weights.
fn gradient_samples(dom: &Domain, f: &CompositeField) -> Vec<f64> {
    let tr = dom.transform();
    let mut out = f.chart.d_z().to_physical_with(tr);
    let mut th = f.chart.d_theta();
    crate::elliptic::divide_by_jacobian(dom, &mut th);
    out.extend(th.to_physical_with(tr));
    if let Some(int) = dom.interior() {
        let (gx, gy) = int.gradient(&f.interior, &int.edge_values(&f.chart));
        out.extend(gx);
        out.extend(gy);
    }
    out
}

/// `DN = |∂_θ| + B` with `B` materialized as a dense matrix in the real
/// orthonormal Fourier coordinates (the Nyquist mode is excluded).
#[derive(Debug, Clone)]
pub struct DNDecomposition {
    n_theta: usize,
    period: f64,
    principal: Vec<f64>,
    dim: usize,
    b: Vec<f64>,
}

impl DNDecomposition {
    /// Builds the dense operator from harmonic extensions of the unit traces.
    pub fn build(dom: &Domain, laplace: &CoupledOperator, assembly: DnAssembly) -> Result<Self, EllipticError> {
        let n = dom.n_theta();
        let period = dom.period();
        let dim = n - 1;
        let proto = dom.zero_chart();
        let principal: Vec<f64> = (0..n).map(|k| if k == n / 2 { 0.0 } else { proto.wavenumber(k).abs() }).collect();
        let mut b = vec![0.0; dim * dim];
        if dom.curve().is_closed() {
            let mut exts = Vec::with_capacity(dim);
            for col in 0..dim {
                let mut e = vec![0.0; dim];
                e[col] = 1.0;
                let trace = from_real_coords(&e, n, period);
                let ext = harmonic_extend(dom, laplace, &trace)?;
                if assembly == DnAssembly::Integral {
                    let v = to_real_coords(&correction_from_extension(dom, &ext.chart), period);
                    for row in 0..dim {
                        b[row * dim + col] = v[row];
                    }
                } else {
                    exts.push(gradient_samples(dom, &ext));
                }
            }
            if assembly == DnAssembly::Energy {
                let (wc, wi) = dom.quadrature_weights();
                let w: Vec<f64> = wc.iter().chain(wc.iter()).chain(wi.iter()).chain(wi.iter()).copied().collect();
                for r in 0..dim {
                    for c in r..dim {
                        let e: f64 = exts[r].iter().zip(&exts[c]).zip(&w).map(|((x, y), w)| w * x * y).sum();
                        b[r * dim + c] = e;
                        b[c * dim + r] = e;
                    }
                }
                for m in 1..n / 2 {
                    b[(2 * m - 1) * dim + 2 * m - 1] -= principal[m];
                    b[(2 * m) * dim + 2 * m] -= principal[m];
                }
            }
        }
        Ok(Self { n_theta: n, period, principal, dim, b })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// `|k|` per FFT slot.
    pub fn principal(&self) -> &[f64] {
        &self.principal
    }

    /// Dense `B` (row-major, `dim × dim`).
    pub fn b_matrix(&self) -> (&[f64], usize) {
        (&self.b, self.dim)
    }

    pub fn apply_b(&self, trace: &[Complex64]) -> Vec<Complex64> {
        let v = to_real_coords(trace, self.period);
        let d = self.dim;
        let out: Vec<f64> = (0..d).map(|r| (0..d).map(|c| self.b[r * d + c] * v[c]).sum()).collect();
        from_real_coords(&out, self.n_theta, self.period)
    }

    pub fn apply(&self, trace: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_b(trace);
        for (k, o) in out.iter_mut().enumerate() {
            *o += trace[k] * self.principal[k];
        }
        out
    }

    /// Dense DN matrix in the same coordinates.
    pub fn dn_matrix(&self) -> Vec<f64> {
        let d = self.dim;
        let mut m = self.b.clone();
        for m_idx in 1..self.n_theta / 2 {
            let k = self.principal[m_idx];
            m[(2 * m_idx - 1) * d + 2 * m_idx - 1] += k;
            m[(2 * m_idx) * d + 2 * m_idx] += k;
        }
        m
    }

    /// Spectral norm of `B` by power iteration on `BᵀB`.
    pub fn b_norm(&self) -> f64 {
        let d = self.dim;
        let mut v = vec![1.0 / (d as f64).sqrt(); d];
        let mut sigma = 0.0;
        for _ in 0..500 {
            let bv: Vec<f64> = (0..d).map(|r| (0..d).map(|c| self.b[r * d + c] * v[c]).sum()).collect();
            let btbv: Vec<f64> = (0..d).map(|c| (0..d).map(|r| self.b[r * d + c] * bv[r]).sum()).collect();
            let nrm = btbv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return 0.0;
            }
            let next = nrm.sqrt();
            v = btbv.iter().map(|x| x / nrm).collect();
            if (next - sigma).abs() < 1e-12 * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }
}

//! Radial heat-equation reference shared by the integration tests.

#![allow(dead_code)]

/// θ-scheme for `∂_tω = ν r^{−1}∂_r(r∂_rω)` on `[0,1]` with `∂_rω(1) = 0`,
/// flux form on a uniform grid.
pub fn radial_theta_step(w: &mut [f64], nu: f64, dt: f64, theta: f64) {
    let n = w.len() - 1;
    let h = 1.0 / n as f64;
    let r: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let vol: Vec<f64> = (0..=n)
        .map(|i| {
            let lo = (r[i] - 0.5 * h).max(0.0);
            let hi = (r[i] + 0.5 * h).min(1.0);
            0.5 * (hi * hi - lo * lo)
        })
        .collect();
    let cp: Vec<f64> = (0..=n).map(|i| if i < n { (r[i] + 0.5 * h) / (h * vol[i]) } else { 0.0 }).collect();
    let cm: Vec<f64> = (0..=n).map(|i| if i > 0 { (r[i] - 0.5 * h) / (h * vol[i]) } else { 0.0 }).collect();
    let (bi, be) = (theta * nu * dt, (1.0 - theta) * nu * dt);
    let mut rhs: Vec<f64> = (0..=n)
        .map(|i| {
            let mut l = -(cp[i] + cm[i]) * w[i];
            if i < n {
                l += cp[i] * w[i + 1];
            }
            if i > 0 {
                l += cm[i] * w[i - 1];
            }
            w[i] + be * l
        })
        .collect();
    let lower: Vec<f64> = cm.iter().map(|c| -bi * c).collect();
    let upper: Vec<f64> = cp.iter().map(|c| -bi * c).collect();
    let mut diag: Vec<f64> = (0..=n).map(|i| 1.0 + bi * (cp[i] + cm[i])).collect();
    for i in 1..=n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    w[n] = rhs[n] / diag[n];
    for i in (0..n).rev() {
        w[i] = (rhs[i] - upper[i] * w[i + 1]) / diag[i];
    }
}

/// Radial reference with the same startup as the solver.
pub fn radial_oracle(w0: impl Fn(f64) -> f64, nu: f64, dt: f64, steps: usize, n: usize) -> impl Fn(f64) -> f64 {
    let mut w: Vec<f64> = (0..=n).map(|i| w0(i as f64 / n as f64)).collect();
    radial_theta_step(&mut w, nu, 0.5 * dt, 1.0);
    radial_theta_step(&mut w, nu, 0.5 * dt, 1.0);
    for _ in 1..steps {
        radial_theta_step(&mut w, nu, dt, 0.5);
    }
    move |r: f64| {
        let x = r * n as f64;
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        w[i] * (1.0 - t) + w[i + 1] * t
    }
}

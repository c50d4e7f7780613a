//! Finite-difference weights on arbitrary (nonuniform) stencils.

/// Fornberg weights for derivatives `0..=max_order` at `x0` from nodes `xs`.
///
/// Returns `w[k][j]`, the weight of `f(xs[j])` in the k-th derivative.
pub fn fornberg(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Three-point first and second derivative weights at every node of a
/// nonuniform grid. End nodes use one-sided three-point stencils.
#[derive(Debug, Clone)]
pub struct NonuniformStencils {
    /// `(offset of first stencil node, [w0, w1, w2])` for d/dz.
    pub first: Vec<(usize, [f64; 3])>,
    /// Same layout for d²/dz²; end rows are one-sided (first order accurate).
    pub second: Vec<(usize, [f64; 3])>,
}

impl NonuniformStencils {
    pub fn new(z: &[f64]) -> Self {
        let n = z.len();
        assert!(n >= 3, "need at least three nodes");
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for j in 0..n {
            let s = if j == 0 { 0 } else if j == n - 1 { n - 3 } else { j - 1 };
            let w = fornberg(z[j], &z[s..s + 3], 2);
            first.push((s, [w[1][0], w[1][1], w[1][2]]));
            second.push((s, [w[2][0], w[2][1], w[2][2]]));
        }
        Self { first, second }
    }

    pub fn d1<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        apply(&self.first, f)
    }

    pub fn d2<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        apply(&self.second, f)
    }
}

fn apply<T>(rows: &[(usize, [f64; 3])], f: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    rows.iter()
        .map(|&(s, w)| f[s] * w[0] + f[s + 1] * w[1] + f[s + 2] * w[2])
        .collect()
}

/// Lagrange weights for interpolating at `x` from the four nodes `xs`.
pub fn lagrange4(x: f64, xs: &[f64; 4]) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
    }
    w
}

/// Cubic interpolation weights on a sorted grid: returns the first stencil
/// index and the four weights.
pub fn cubic_stencil(x: f64, grid: &[f64]) -> (usize, [f64; 4]) {
    let n = grid.len();
    assert!(n >= 4);
    let k = match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    let s = k.saturating_sub(1).min(n - 4);
    let xs = [grid[s], grid[s + 1], grid[s + 2], grid[s + 3]];
    (s, lagrange4(x, &xs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_centered_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn nonuniform_stencils_exact_for_quadratics() {
        let z: Vec<f64> = (0..12).map(|j| (j as f64 * 0.3).powf(1.7)).collect();
        let f: Vec<f64> = z.iter().map(|&x| 2.0 + 3.0 * x - 0.7 * x * x).collect();
        let st = NonuniformStencils::new(&z);
        let d1 = st.d1(&f);
        let d2 = st.d2(&f);
        for (j, &x) in z.iter().enumerate() {
            assert!((d1[j] - (3.0 - 1.4 * x)).abs() < 1e-9);
            assert!((d2[j] + 1.4).abs() < 1e-8);
        }
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let g: Vec<f64> = (0..9).map(|j| (j as f64).powi(2) * 0.1).collect();
        let f = |x: f64| 1.0 - x + 0.5 * x * x - 0.25 * x * x * x;
        for &x in &[0.0, 0.05, 1.3, 5.0, 6.4] {
            let (s, w) = cubic_stencil(x, &g);
            let v: f64 = (0..4).map(|i| w[i] * f(g[s + i])).sum();
            assert!((v - f(x)).abs() < 1e-10, "x={x}");
        }
    }
}

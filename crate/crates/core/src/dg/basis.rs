//! Gauss-Legendre quadrature and the scaled Legendre modal basis
//! `phi_j = sqrt(2j + 1) P_j(xi)` on the reference element `[-1, 1]`.
//!
//! With this scaling `int_I phi_i phi_j dz = dz * delta_ij`, so the mass matrix
//! is `dz * I` and coefficient 0 is the cell average.

/// `P_0..=P_n` and their derivatives at `x`.
pub fn legendre(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for j in 2..=n {
        let jf = j as f64;
        p[j] = ((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
        // P'_j = P'_{j-2} + (2j - 1) P_{j-1}
        dp[j] = dp[j - 2] + (2.0 * jf - 1.0) * p[j - 1];
    }
    (p, dp)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p[n] / dp[n];
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp[n] * dp[n]);
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub struct Basis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `phi[q * n_modes + j]` at quadrature node `q`.
    phi: Vec<f64>,
    /// `d phi_j / d xi` at quadrature node `q`.
    dphi: Vec<f64>,
    phi_left: Vec<f64>,
    phi_right: Vec<f64>,
}

impl Basis {
    /// Basis of degree `k` with a `k + 2` point rule.
    pub fn new(degree: usize) -> Self {
        Self::with_quadrature(degree, degree + 2)
    }

    pub fn with_quadrature(degree: usize, n_quad: usize) -> Self {
        let m = degree + 1;
        let (nodes, weights) = gauss_legendre(n_quad);
        let mut phi = Vec::with_capacity(n_quad * m);
        let mut dphi = Vec::with_capacity(n_quad * m);
        for &x in &nodes {
            let (p, dp) = legendre(degree, x);
            for j in 0..m {
                let s = (2.0 * j as f64 + 1.0).sqrt();
                phi.push(s * p[j]);
                dphi.push(s * dp[j]);
            }
        }
        let phi_right = (0..m).map(|j| (2.0 * j as f64 + 1.0).sqrt()).collect();
        let phi_left = (0..m)
            .map(|j| {
                let s = (2.0 * j as f64 + 1.0).sqrt();
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Self {
            degree,
            nodes,
            weights,
            phi,
            dphi,
            phi_left,
            phi_right,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_modes(&self) -> usize {
        self.degree + 1
    }

    pub fn n_quad(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn phi_at_node(&self, q: usize) -> &[f64] {
        let m = self.n_modes();
        &self.phi[q * m..(q + 1) * m]
    }

    #[inline]
    pub fn dphi_at_node(&self, q: usize) -> &[f64] {
        let m = self.n_modes();
        &self.dphi[q * m..(q + 1) * m]
    }

    pub fn phi_left(&self) -> &[f64] {
        &self.phi_left
    }

    pub fn phi_right(&self) -> &[f64] {
        &self.phi_right
    }

    /// Basis values and `xi`-derivatives at an arbitrary reference point.
    pub fn eval_at(&self, xi: f64) -> (Vec<f64>, Vec<f64>) {
        let (p, dp) = legendre(self.degree, xi);
        let scale = |j: usize| (2.0 * j as f64 + 1.0).sqrt();
        (
            p.iter().enumerate().map(|(j, v)| scale(j) * v).collect(),
            dp.iter().enumerate().map(|(j, v)| scale(j) * v).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-14, "n={n} p={p}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn basis_is_orthogonal_with_weight_two() {
        for k in 0..=4 {
            let b = Basis::with_quadrature(k, k + 2);
            for i in 0..=k {
                for j in 0..=k {
                    let s: f64 = (0..b.n_quad())
                        .map(|q| b.weights()[q] * b.phi_at_node(q)[i] * b.phi_at_node(q)[j])
                        .sum();
                    let expected = if i == j { 2.0 } else { 0.0 };
                    assert!((s - expected).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn trace_values_match_evaluation() {
        let b = Basis::new(3);
        let (r, _) = b.eval_at(1.0);
        let (l, _) = b.eval_at(-1.0);
        for j in 0..4 {
            assert!((r[j] - b.phi_right()[j]).abs() < 1e-14);
            assert!((l[j] - b.phi_left()[j]).abs() < 1e-14);
        }
    }
}

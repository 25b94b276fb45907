//! Chebyshev–Lobatto grids on [a, b]: spectral differentiation and
//! Clenshaw–Curtis cumulative integration.

use std::f64::consts::PI;

/// Lobatto nodes x_j = (a+b)/2 − (b−a)/2·cos(πj/n), j = 0..=n, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
}

impl ChebGrid {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 2 && b > a, "need n >= 2 and b > a");
        let nodes = (0..=n)
            .map(|j| 0.5 * (a + b) - 0.5 * (b - a) * (PI * j as f64 / n as f64).cos())
            .collect();
        Self { a, b, nodes }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Chebyshev coefficients of the interpolant through `f` at the nodes,
    /// in the variable s = (2x − a − b)/(b − a).
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let n = self.degree();
        assert_eq!(f.len(), n + 1);
        // Node j sits at s = −cos(πj/n) = cos(π(n−j)/n).
        (0..=n)
            .map(|k| {
                let mut sum = 0.0;
                for (j, fj) in f.iter().enumerate() {
                    let m = n - j;
                    let w = if m == 0 || m == n { 0.5 } else { 1.0 };
                    sum += w * fj * (PI * (k * m) as f64 / n as f64).cos();
                }
                let c = 2.0 * sum / n as f64;
                if k == 0 || k == n {
                    0.5 * c
                } else {
                    c
                }
            })
            .collect()
    }

    /// Values at the nodes of Σ c_k T_k(s).
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let n = self.degree();
        (0..=n)
            .map(|j| {
                let m = n - j;
                c.iter().enumerate().map(|(k, ck)| ck * (PI * (k * m) as f64 / n as f64).cos()).sum()
            })
            .collect()
    }

    /// Derivative at the nodes via the coefficient recurrence
    /// c'_{k−1} = c'_{k+1} + 2k c_k.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let c = self.coefficients(f);
        let n = self.degree();
        let mut dc = vec![0.0; n + 2];
        for k in (1..=n).rev() {
            dc[k - 1] = dc[k + 1] + 2.0 * k as f64 * c[k];
        }
        dc[0] *= 0.5;
        dc.truncate(n + 1);
        let jac = 2.0 / (self.b - self.a);
        self.synthesize(&dc).into_iter().map(|v| v * jac).collect()
    }

    /// ∫_a^{x_j} f at every node.
    pub fn cumulative_integral(&self, f: &[f64]) -> Vec<f64> {
        let c = self.coefficients(f);
        let n = self.degree();
        // ∫T_k = T_{k+1}/(2(k+1)) − T_{k−1}/(2(k−1)) for k ≥ 2.
        let mut ic = vec![0.0; n + 2];
        for (k, ck) in c.iter().enumerate() {
            match k {
                0 => ic[1] += ck,
                1 => ic[2] += 0.25 * ck,
                _ => {
                    ic[k + 1] += ck / (2.0 * (k + 1) as f64);
                    ic[k - 1] -= ck / (2.0 * (k - 1) as f64);
                }
            }
        }
        // Anchor at s = −1 where T_k(−1) = (−1)^k.
        let at_a: f64 = ic.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).sum();
        ic[0] -= at_a;
        let half = 0.5 * (self.b - self.a);
        let n1 = n + 1;
        (0..=n)
            .map(|j| {
                let m = n - j;
                let theta = PI * m as f64 / n as f64;
                let mut s: f64 = ic[..n1].iter().enumerate().map(|(k, v)| v * (theta * k as f64).cos()).sum();
                s += ic[n1] * (theta * n1 as f64).cos();
                s * half
            })
            .collect()
    }

    /// Relative size of the last two Chebyshev coefficients: a resolution
    /// estimate for the interpolant of `f`.
    pub fn tail_estimate(&self, f: &[f64]) -> f64 {
        let c = self.coefficients(f);
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let n = c.len();
        c[n - 1].abs().max(c[n - 2].abs()) / scale
    }
}

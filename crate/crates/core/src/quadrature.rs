//! Gauss–Legendre rules and the momentum integral ∫dp/2π over the real line
//! for even integrands.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1],
/// ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// (P_n(z), P_n'(z)) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Points p_i and weights w_i approximating ∫_0^∞ g(p) dp.
pub type HalfLineRule = Vec<(f64, f64)>;

/// A feature of width `width` at momentum `at` that the rule must resolve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub at: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Starting node budget; the error estimate compares against half of it.
    /// With a breakpoint it sets the nodes per panel to `nodes / 8`.
    pub nodes: usize,
    /// Tangent-map scale s in p = s·tan θ.
    pub scale: f64,
    pub breakpoint: Option<Breakpoint>,
    /// Relative tolerance on the error estimate.
    pub tolerance: f64,
    pub max_nodes: usize,
}

impl QuadratureSpec {
    pub fn new(nodes: usize, scale: f64) -> Self {
        Self { nodes, scale, breakpoint: None, tolerance: 1e-6, max_nodes: nodes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 || self.max_nodes < self.nodes {
            return Err(Error::InvalidParams("node budget must be >= 16 and <= max_nodes".into()));
        }
        if !(self.scale > 0.0 && self.tolerance > 0.0) {
            return Err(Error::InvalidParams("scale and tolerance must be positive".into()));
        }
        if let Some(b) = self.breakpoint {
            if !(b.at > 0.0 && b.width > 0.0 && b.width < b.at) {
                return Err(Error::InvalidParams("breakpoint needs 0 < width < at".into()));
            }
        }
        Ok(())
    }

    /// Half-line rule using `n` nodes in total.
    pub fn rule(&self, n: usize) -> HalfLineRule {
        match self.breakpoint {
            None => tangent_rule(n, 0.0, self.scale),
            Some(b) => graded_rule(n, b, self.scale),
        }
    }
}

/// ∫_{p0}^∞ with p = p0 + s·tan θ, θ ∈ [0, π/2).
fn tangent_rule(n: usize, p0: f64, s: f64) -> HalfLineRule {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let th = FRAC_PI_2 * 0.5 * (xi + 1.0);
            let c = th.cos();
            (p0 + s * th.tan(), wi * FRAC_PI_2 * 0.5 * s / (c * c))
        })
        .collect()
}

fn panel_rule(m: usize, a: f64, b: f64, out: &mut HalfLineRule) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (b - a);
    for (xi, wi) in x.iter().zip(&w) {
        out.push((a + h * (xi + 1.0), wi * h));
    }
}

/// Panels shrinking geometrically towards the breakpoint from both sides,
/// then a tangent tail from 2·at. Every panel and the tail get n/8 nodes.
fn graded_rule(n: usize, bp: Breakpoint, s: f64) -> HalfLineRule {
    let mut edges = vec![bp.at];
    let mut h = bp.width;
    while bp.at - h > 0.0 {
        edges.push(bp.at - h);
        edges.push(bp.at + h);
        h *= 2.0;
    }
    edges.push(0.0);
    edges.push(2.0 * bp.at);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let panels = edges.len() - 1;
    let m = (n / 8).max(2);
    let mut out = Vec::with_capacity(m * (panels + 1));
    for e in edges.windows(2) {
        panel_rule(m, e[0], e[1], &mut out);
    }
    out.extend(tangent_rule(m, 2.0 * bp.at, s));
    out
}

/// Value, error estimate and the node count that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub nodes: usize,
}

fn apply_rule<F>(f: &F, rule: &HalfLineRule) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Vec<Result<f64>> = rule.par_iter().map(|(p, _)| f(*p)).collect();
    let mut sum = 0.0;
    for ((_, w), v) in rule.iter().zip(vals) {
        sum += w * v?;
    }
    Ok(sum / PI)
}

/// ∫_{−∞}^{∞} dp/2π f(p) for even f, as (1/π)∫_0^∞ f.
///
/// The error estimate is |I_n − I_{n/2}|; n doubles from `spec.nodes`
/// until the estimate meets the relative tolerance or `max_nodes` is hit.
/// Node evaluations run in parallel and are summed in a fixed order.
pub fn momentum_integral<F>(f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    spec.validate()?;
    let mut n = spec.nodes;
    let mut coarse = apply_rule(&f, &spec.rule(n / 2))?;
    loop {
        let rule = spec.rule(n);
        let fine = apply_rule(&f, &rule)?;
        let error = (fine - coarse).abs();
        if error <= spec.tolerance * fine.abs() || error == 0.0 {
            return Ok(QuadratureResult { value: fine, error, nodes: rule.len() });
        }
        if 2 * n > spec.max_nodes {
            return Err(Error::QuadratureNonConvergent { estimate: error, tolerance: spec.tolerance * fine.abs() });
        }
        coarse = fine;
        n *= 2;
    }
}

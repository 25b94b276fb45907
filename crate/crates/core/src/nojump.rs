//! Dynamics without the recycling term on the PT ramp γ(t) = Δt/τ.
//!
//! In the eigenbasis of the no-jump Liouvillian the state splits into the
//! trace-sector amplitude r₀ and the oscillating pair P = r₂ + r₃,
//! M = i(r₂ − r₃). With w = √(1 + y² − x²) and T = Δτ,
//!
//!   r₀' = x r₀/w² − (1+y²) M/w³,  P' = 2T w M,  M' = −r₀/w − 2T w P,
//!
//! and ⟨σ_z⟩ = P/(r₀ + xM/w). Everything is singular at the exceptional
//! point w = 0.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chebyshev::ChebGrid;
use crate::error::{Error, Result};
use crate::model::{initial_ground_state, CoherenceVector, InitialState, Kind, ModeParams};
use crate::ode::Controls;
use crate::propagator::defect_at;
use crate::quadrature::QuadratureSpec;
use crate::sweep::{fit_power_law, integrated_defect, momentum_profile, ExponentFit};

pub const DEFAULT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoJumpState {
    pub r0: f64,
    pub p: f64,
    pub m: f64,
}

fn check_guard(x: f64, y: f64, guard: f64) -> Result<f64> {
    let singular = (1.0 + y * y).sqrt();
    if x > singular - guard {
        return Err(Error::SingularPoint { x, singular, guard });
    }
    Ok((1.0 + y * y - x * x).sqrt())
}

/// x-derivatives of (r₀, P, M).
pub fn nojump_rhs(x: f64, y: f64, rate: f64, s: NoJumpState, guard: f64) -> Result<NoJumpState> {
    let w = check_guard(x, y, guard)?;
    let w2 = w * w;
    Ok(NoJumpState {
        r0: x * s.r0 / w2 - (1.0 + y * y) * s.m / (w2 * w),
        p: 2.0 * rate * w * s.m,
        m: -s.r0 / w - 2.0 * rate * w * s.p,
    })
}

/// Coherence vector r₀|D₀⟩ + r₁|D₁⟩ + r₂|D₂⟩ + r₃|D₃⟩ at coupling γ below
/// the exceptional point, in the biorthogonal basis D₀ = (1, −γΔ/E², γp/E², 0),
/// D₁ = (0, p, Δ, 0), with the oscillating pair expressed through (P, M).
/// Rescaled to unit trace coordinate v₀ = ½.
pub fn state_from_amplitudes(params: &ModeParams, gamma: f64, r1: f64, s: NoJumpState) -> Result<CoherenceVector> {
    let (p, d) = (params.p, params.delta);
    let e2 = params.energy_sq();
    if gamma * gamma >= e2 {
        return Err(Error::InvalidParams("amplitude basis needs gamma below the exceptional point".into()));
    }
    let w = (e2 - gamma * gamma).sqrt();
    let v = [
        s.r0 + gamma * s.m / w,
        -s.r0 * gamma * d / e2 + r1 * p - d * s.m / w,
        s.r0 * gamma * p / e2 + r1 * d + p * s.m / w,
        s.p,
    ];
    if !(v[0] > 0.0) {
        return Err(Error::InvalidParams("amplitudes give a non-positive trace".into()));
    }
    let k = 0.5 / v[0];
    Ok(CoherenceVector::from_array(v.map(|c| c * k)))
}

/// Normalised σ_z defect at x_end on the PT ramp (γ₀ = Δ), starting from
/// the ground state. The reference is the adiabatic no-jump value.
pub fn nojump_evolve(params: &ModeParams, x_end: f64, controls: &Controls) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_end) {
        return Err(Error::InvalidParams(format!("x_end must lie in [0, 1], got {x_end}")));
    }
    if x_end == 0.0 {
        return Ok(0.0);
    }
    Ok(defect_at(params, Kind::NoJump, initial_ground_state(params)?, x_end, controls)?.n_z)
}

/// Same as `nojump_evolve` but starting from `initial`.
pub fn nojump_evolve_from(
    params: &ModeParams,
    initial: CoherenceVector,
    x_end: f64,
    controls: &Controls,
) -> Result<f64> {
    Ok(defect_at(params, Kind::NoJump, initial, x_end, controls)?.n_z)
}

/// c_k, d_k, e_k sampled on a Chebyshev grid for one y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCoefficient {
    pub order: usize,
    pub y: f64,
    pub x_grid: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

/// Trace-sector constant that reproduces r₀(0) = 1, the ground-state start.
pub fn default_e0_constant(y: f64) -> f64 {
    (1.0 + y * y).sqrt()
}

/// Grid coefficients for orders 0..=K.
///
/// e₀ = const/w; for k ≥ 1
///   c_k = −e_{k−1}/(2w²) − d'_{k−1}/(2w),   d_k = c'_{k−1}/(2w),
///   e_k = −(1+y²)/(2w) ∫₀ˣ c'_{k−1}/w³,
/// the last being the particular solution of the r₀ equation at order k
/// that vanishes at x = 0.
pub fn nojump_coefficients(
    orders: usize,
    y: f64,
    grid: &ChebGrid,
    e0_constant: f64,
    guard: f64,
    tolerance: f64,
) -> Result<Vec<GridCoefficient>> {
    if grid.a != 0.0 {
        return Err(Error::InvalidParams("grid must start at x = 0".into()));
    }
    check_guard(grid.b, y, guard)?;
    let xs = &grid.nodes;
    let a = 1.0 + y * y;
    let w: Vec<f64> = xs.iter().map(|x| (a - x * x).sqrt()).collect();
    let n = xs.len();
    let mut out = vec![GridCoefficient {
        order: 0,
        y,
        x_grid: xs.clone(),
        c: vec![0.0; n],
        d: vec![0.0; n],
        e: w.iter().map(|wi| e0_constant / wi).collect(),
    }];
    let deriv = |f: &[f64]| -> Result<Vec<f64>> {
        if f.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; f.len()]);
        }
        let estimate = grid.tail_estimate(f);
        if estimate > tolerance {
            return Err(Error::GridTooCoarse { estimate, tolerance });
        }
        Ok(grid.derivative(f))
    };
    for k in 1..=orders {
        let prev = &out[k - 1];
        let cp = deriv(&prev.c)?;
        let dp = deriv(&prev.d)?;
        let c: Vec<f64> = (0..n).map(|i| -prev.e[i] / (2.0 * w[i] * w[i]) - dp[i] / (2.0 * w[i])).collect();
        let d: Vec<f64> = (0..n).map(|i| cp[i] / (2.0 * w[i])).collect();
        let integrand: Vec<f64> = (0..n).map(|i| cp[i] / w[i].powi(3)).collect();
        let e = if integrand.iter().all(|v| *v == 0.0) {
            vec![0.0; n]
        } else {
            let estimate = grid.tail_estimate(&integrand);
            if estimate > tolerance {
                return Err(Error::GridTooCoarse { estimate, tolerance });
            }
            let cum = grid.cumulative_integral(&integrand);
            (0..n).map(|i| -a / (2.0 * w[i]) * cum[i]).collect()
        };
        out.push(GridCoefficient { order: k, y, x_grid: xs.clone(), c, d, e });
    }
    Ok(out)
}

/// Truncated series for (r₀, P, M) at grid node `i`.
pub fn series_state(coeffs: &[GridCoefficient], rate: f64, i: usize) -> NoJumpState {
    let mut s = NoJumpState::default();
    let mut t = 1.0;
    for g in coeffs {
        s.r0 += g.e[i] * t;
        s.p += g.c[i] * t;
        s.m += g.d[i] * t;
        t /= rate;
    }
    s
}

/// Series prediction of ⟨σ_z⟩ = P/(r₀ + xM/w) at every grid node. Below
/// the exceptional point the adiabatic ⟨σ_z⟩ vanishes, so this is n_z.
pub fn series_defect(coeffs: &[GridCoefficient], rate: f64) -> Vec<f64> {
    let Some(first) = coeffs.first() else { return Vec::new() };
    let a = 1.0 + first.y * first.y;
    (0..first.x_grid.len())
        .map(|i| {
            let x = first.x_grid[i];
            let s = series_state(coeffs, rate, i);
            s.p / (s.r0 + x * s.m / (a - x * x).sqrt())
        })
        .collect()
}

/// Ground state with the adiabatic P(0) of the series: P = c₁(0)/T, which
/// removes the O(1/T) homogeneous oscillation a bare ground-state start
/// carries into the whole ramp.
pub fn dressed_initial_state(params: &ModeParams, coeffs: &[GridCoefficient]) -> Result<CoherenceVector> {
    let s = series_state(coeffs, params.rate(), 0);
    let e = params.energy_sq().sqrt();
    let scale = 1.0 / s.r0;
    let amps = NoJumpState { r0: 1.0, p: s.p * scale, m: s.m * scale };
    state_from_amplitudes(params, 0.0, -1.0 / e, amps)
}

/// Curves (Δτ)^a n_z against q = (p/Δ)(Δτ)^a on a shared q axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCollapse {
    pub exponent: f64,
    pub scaled_momentum: Vec<f64>,
    pub tau_list: Vec<f64>,
    /// One row per τ, aligned with `scaled_momentum`.
    pub scaled_defect: Vec<Vec<f64>>,
    /// Largest pointwise spread between curves divided by the peak |f|.
    pub residual: f64,
}

impl ScalingCollapse {
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# exponent={} residual={}", self.exponent, self.residual)?;
        writeln!(w, "scaled_p,scaled_nz,tau")?;
        for (tau, row) in self.tau_list.iter().zip(&self.scaled_defect) {
            for (q, f) in self.scaled_momentum.iter().zip(row) {
                writeln!(w, "{q},{f:.16e},{tau}")?;
            }
        }
        Ok(())
    }
}

/// Linear interpolation of (xs, ys) at x; `None` outside [xs₀, xs_last].
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|v| *v <= x).min(xs.len() - 1).max(1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return Some(ys[i]);
    }
    let t = (x - x0) / (x1 - x0);
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

/// Max spread between curves on the union of their abscissae (restricted to
/// the common range), relative to the largest |value|.
pub fn collapse_residual(curves: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    if curves.len() < 2 {
        return 0.0;
    }
    let lo = curves.iter().map(|c| c.0[0]).fold(f64::MIN, f64::max);
    let hi = curves.iter().map(|c| c.0[c.0.len() - 1]).fold(f64::MAX, f64::min);
    let peak = curves.iter().flat_map(|c| c.1.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for (xs, _) in curves {
        for &x in xs.iter().filter(|x| **x >= lo && **x <= hi) {
            let vals: Vec<f64> = curves.iter().filter_map(|c| interpolate(&c.0, &c.1, x)).collect();
            let mx = vals.iter().cloned().fold(f64::MIN, f64::max);
            let mn = vals.iter().cloned().fold(f64::MAX, f64::min);
            worst = worst.max(mx - mn);
        }
    }
    worst / peak
}

/// Kibble–Zurek collapse of ground-state no-jump ramps ending at x = 1.
///
/// `template` fixes Δ (and γ₀ = Δ); `q_grid` is the scaled momentum axis,
/// mapped to p = qΔ(Δτ)^(−exponent) for every τ.
pub fn scaling_collapse(
    template: &ModeParams,
    tau_list: &[f64],
    q_grid: &[f64],
    exponent: f64,
    controls: &Controls,
) -> Result<ScalingCollapse> {
    if tau_list.is_empty() {
        return Err(Error::InvalidParams("tau_list is empty".into()));
    }
    let delta = template.scale();
    let mut rows = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let params = template.with_tau(tau);
        let f = params.rate().powf(exponent);
        let p_grid: Vec<f64> = q_grid.iter().map(|q| q * delta / f).collect();
        let recs = momentum_profile(&params, Kind::NoJump, &p_grid, controls)?;
        rows.push(recs.iter().map(|r| f * r.n_z).collect::<Vec<f64>>());
    }
    let curves: Vec<(Vec<f64>, Vec<f64>)> = rows.iter().map(|r| (q_grid.to_vec(), r.clone())).collect();
    Ok(ScalingCollapse {
        exponent,
        scaled_momentum: q_grid.to_vec(),
        tau_list: tau_list.to_vec(),
        residual: collapse_residual(&curves),
        scaled_defect: rows,
    })
}

/// Log-log slope of |∫dp/2π n_z| against τ for no-jump ramps.
///
/// The tangent-map scale follows the Kibble–Zurek momentum window
/// s·(rate)^(−1/3), and an optional breakpoint (gapless case: p = γ₀, where
/// each mode's ramp ends exactly on its exceptional point) is resolved by
/// graded panels of width ∝ (rate)^(−2/3). A `Dressed` start keeps the
/// integrand free of undamped precession the rule cannot resolve.
pub fn integrated_kz_exponent(
    template: &ModeParams,
    tau_list: &[f64],
    initial: InitialState,
    spec: &QuadratureSpec,
    controls: &Controls,
) -> Result<(ExponentFit, Vec<(f64, f64)>)> {
    let mut pts = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let params = template.with_tau(tau);
        let mut s = *spec;
        let r = params.rate();
        s.scale *= r.powf(-1.0 / 3.0);
        if let Some(b) = s.breakpoint.as_mut() {
            b.width *= r.powf(-2.0 / 3.0);
        }
        let q = integrated_defect(&params, Kind::NoJump, initial, &s, controls)?;
        pts.push((tau, q.value));
    }
    Ok((fit_power_law(&pts)?, pts))
}

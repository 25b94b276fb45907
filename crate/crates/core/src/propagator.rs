//! Time evolution |ρ̇⟩ = L(t)|ρ⟩ under the linear coupling ramp and defect
//! extraction at the end of the ramp.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    adiabatic_reference, build_supermatrix, initial_ground_state, steady_state, steady_state_slope,
    CoherenceVector, InitialState, Kind, ModeParams, RampProtocol,
};
use crate::ode::{self, Controls, Stats};

/// Sampled solution of the master equation.
///
/// No-jump states are stored rescaled to v₀ = ½; `log_scale[i]` holds the
/// logarithm of the factor removed, so the physical state is
/// `states[i] · exp(log_scale[i])`. Full-Lindblad trajectories never rescale.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: Kind,
    pub params: ModeParams,
    pub protocol: RampProtocol,
    pub times: Vec<f64>,
    pub states: Vec<CoherenceVector>,
    pub log_scale: Vec<f64>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&CoherenceVector> {
        self.states.last()
    }

    /// Unscaled state at sample `i` (may overflow for long PT-broken runs).
    pub fn physical_state(&self, i: usize) -> CoherenceVector {
        let s = self.log_scale[i].exp();
        CoherenceVector::from_array(self.states[i].to_array().map(|v| v * s))
    }

    /// CSV with `#` header lines followed by `t,v0,v1,v2,v3` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(
            w,
            "# kind={} p={} delta={} gamma0={} tau={}",
            self.kind.label(),
            self.params.p,
            self.params.delta,
            self.protocol.gamma0,
            self.protocol.tau
        )?;
        writeln!(w, "t,v0,v1,v2,v3")?;
        for i in 0..self.len() {
            let s = self.physical_state(i);
            writeln!(w, "{},{:.16e},{:.16e},{:.16e},{:.16e}", self.times[i], s.v0, s.v1, s.v2, s.v3)?;
        }
        Ok(())
    }
}

/// Defects ⟨σ_i(τ)⟩ − σ_i^(ref) at the end of a ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub p: f64,
    pub tau: f64,
    pub n_x: f64,
    pub n_y: f64,
    pub n_z: f64,
    pub ss_x: f64,
    pub ss_y: f64,
    pub ss_z: f64,
}

/// `n + 1` equally spaced times on [0, t_end].
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

fn renormalise(y: &[f64; 4]) -> f64 {
    2.0 * y[0]
}

/// Integrate from t = 0 and record the state at each entry of `times`.
pub fn evolve(
    params: &ModeParams,
    protocol: &RampProtocol,
    kind: Kind,
    initial: CoherenceVector,
    controls: &Controls,
    times: &[f64],
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidParams("no sample times requested".into()));
    }
    let rhs = |t: f64, y: &[f64; 4]| build_supermatrix(params, protocol.gamma(t), kind).apply(y);
    let renorm: Option<&dyn Fn(&[f64; 4]) -> f64> = match kind {
        Kind::FullLindblad => None,
        Kind::NoJump => Some(&renormalise),
    };
    let (samples, stats) = ode::integrate(rhs, 0.0, initial.to_array(), times, controls, renorm)?;
    let (states, log_scale) = samples
        .into_iter()
        .map(|(y, ls)| (CoherenceVector::from_array(y), ls))
        .unzip();
    Ok(Trajectory {
        kind,
        params: *params,
        protocol: *protocol,
        times: times.to_vec(),
        states,
        log_scale,
        stats,
    })
}

/// Final state at t = x_end·τ starting from `initial`.
pub fn final_state(
    params: &ModeParams,
    kind: Kind,
    initial: CoherenceVector,
    x_end: f64,
    controls: &Controls,
) -> Result<CoherenceVector> {
    let traj = evolve(params, &params.protocol(), kind, initial, controls, &[x_end * params.tau])?;
    Ok(traj.states[0])
}

/// Full-kind deviation δ = ρ − ρ_ss(γ(t)) at t = x_end·τ.
///
/// δ̇ = L(t)δ − γ̇ ∂_γρ_ss, so step-size control acts on the defect itself
/// rather than on an O(1) state, which matters once the defect is small.
fn full_deviation(
    params: &ModeParams,
    initial: CoherenceVector,
    x_end: f64,
    controls: &Controls,
) -> Result<[f64; 3]> {
    let protocol = params.protocol();
    let rate = protocol.gamma_dot();
    let ss0 = steady_state(params, 0.0)?.to_array();
    let y0: [f64; 4] = std::array::from_fn(|k| initial.to_array()[k] - ss0[k]);
    let rhs = |t: f64, y: &[f64; 4]| {
        let g = protocol.gamma(t);
        let mut out = build_supermatrix(params, g, Kind::FullLindblad).apply(y);
        if let Ok(slope) = steady_state_slope(params, g) {
            for k in 0..3 {
                out[k + 1] -= 0.5 * rate * slope[k];
            }
        }
        out
    };
    let (samples, _) = ode::integrate(rhs, 0.0, y0, &[x_end * params.tau], controls, None)?;
    let y = samples[0].0;
    Ok([2.0 * y[1], 2.0 * y[2], 2.0 * y[3]])
}

/// Defects at t = x_end·τ measured from the adiabatic reference at γ(t).
pub fn defect_at(
    params: &ModeParams,
    kind: Kind,
    initial: CoherenceVector,
    x_end: f64,
    controls: &Controls,
) -> Result<DefectRecord> {
    let gamma = params.protocol().gamma(x_end * params.tau);
    let reference = adiabatic_reference(params, gamma, kind)?;
    let n = match kind {
        Kind::FullLindblad => full_deviation(params, initial, x_end, controls)?,
        Kind::NoJump => {
            let ex = final_state(params, kind, initial, x_end, controls)?.expectation();
            std::array::from_fn(|k| ex[k] - reference[k])
        }
    };
    Ok(DefectRecord {
        p: params.p,
        tau: params.tau,
        n_x: n[0],
        n_y: n[1],
        n_z: n[2],
        ss_x: reference[0],
        ss_y: reference[1],
        ss_z: reference[2],
    })
}

/// Defects at the end of the ramp starting from the ground state of H_p.
pub fn defect_at_end(params: &ModeParams, kind: Kind, controls: &Controls) -> Result<DefectRecord> {
    defect_at(params, kind, initial_ground_state(params)?, 1.0, controls)
}

pub fn defect_at_end_from(
    params: &ModeParams,
    kind: Kind,
    initial: InitialState,
    controls: &Controls,
) -> Result<DefectRecord> {
    defect_at(params, kind, initial.state(params)?, 1.0, controls)
}

/// Largest midpoint residual ‖(s_{i+1} − s_i)/Δt − L(t_{i+½})(s_i + s_{i+1})/2‖_∞
/// over consecutive samples. Second order in the sample spacing.
pub fn residual_check(traj: &Trajectory, params: &ModeParams, protocol: &RampProtocol, kind: Kind) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..traj.len().saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i];
        if dt <= 0.0 {
            continue;
        }
        let a = traj.states[i].to_array();
        let scale = (traj.log_scale[i + 1] - traj.log_scale[i]).exp();
        let b = traj.states[i + 1].to_array().map(|v| v * scale);
        let mid: [f64; 4] = std::array::from_fn(|k| 0.5 * (a[k] + b[k]));
        let lm = build_supermatrix(params, protocol.gamma(traj.times[i] + 0.5 * dt), kind).apply(&mid);
        for k in 0..4 {
            worst = worst.max(((b[k] - a[k]) / dt - lm[k]).abs());
        }
    }
    worst
}

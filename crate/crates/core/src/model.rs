//! Two-level mode model: parameters, coherence vectors, the Liouvillian
//! supermatrices with and without the recycling term, and their closed-form
//! eigensystems.
//!
//! The coherence vector stores |ρ⟩ = ½(v₀, v₁, v₂, v₃) with Bloch components
//! v_i = Tr(ρσ_i)·v₀. Under the full Lindbladian v₀ ≡ 1 and the stored trace
//! coordinate is ½; without the recycling term v₀ evolves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative distance to an exceptional point below which the
/// biorthogonal eigenbasis is reported as degenerate.
pub const DEFAULT_EP_TOLERANCE: f64 = 1e-9;

/// Which Liouvillian drives the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Full Lindbladian with the jump operator 2√γ σ₋.
    FullLindblad,
    /// Effective non-Hermitian Hamiltonian dynamics, recycling term dropped.
    NoJump,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::FullLindblad => "full",
            Kind::NoJump => "nojump",
        }
    }
}

/// Gapped (Δ > 0, γ₀ = εΔ) or gapless (Δ = 0, energy scale γ₀) protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "case")]
pub enum Case {
    Gapped { epsilon: f64 },
    Gapless,
}

/// Physical parameters of one momentum mode (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub p: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub tau: f64,
}

impl ModeParams {
    pub fn new(p: f64, delta: f64, gamma0: f64, tau: f64) -> Result<Self> {
        let finite = [p, delta, gamma0, tau].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if tau <= 0.0 {
            return Err(Error::InvalidParams(format!("tau must be positive, got {tau}")));
        }
        if delta < 0.0 {
            return Err(Error::InvalidParams(format!("delta must be >= 0, got {delta}")));
        }
        if gamma0 < 0.0 {
            return Err(Error::InvalidParams(format!("gamma0 must be >= 0, got {gamma0}")));
        }
        Ok(Self { p, delta, gamma0, tau })
    }

    /// Gapped mode with γ₀ = εΔ.
    pub fn gapped(p: f64, delta: f64, epsilon: f64, tau: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParams("gapped mode needs delta > 0".into()));
        }
        Self::new(p, delta, epsilon * delta, tau)
    }

    pub fn gapless(p: f64, gamma0: f64, tau: f64) -> Result<Self> {
        if !(gamma0 > 0.0) {
            return Err(Error::InvalidParams("gapless mode needs gamma0 > 0".into()));
        }
        Self::new(p, 0.0, gamma0, tau)
    }

    pub fn case(&self) -> Result<Case> {
        if self.delta > 0.0 {
            Ok(Case::Gapped { epsilon: self.gamma0 / self.delta })
        } else if self.gamma0 > 0.0 {
            Ok(Case::Gapless)
        } else {
            Err(Error::DegenerateMode("delta = gamma0 = 0 has no energy scale".into()))
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        (self.delta > 0.0).then(|| self.gamma0 / self.delta)
    }

    /// Natural energy scale: Δ when gapped, γ₀ when gapless.
    pub fn scale(&self) -> f64 {
        if self.delta > 0.0 {
            self.delta
        } else {
            self.gamma0
        }
    }

    /// Dimensionless ramp time Δτ (gapped) or γ₀τ (gapless).
    pub fn rate(&self) -> f64 {
        self.scale() * self.tau
    }

    /// Scaled momentum y = p/Δ or p/γ₀.
    pub fn scaled_momentum(&self) -> f64 {
        self.p / self.scale()
    }

    pub fn energy_sq(&self) -> f64 {
        self.p * self.p + self.delta * self.delta
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..*self }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }

    pub fn protocol(&self) -> RampProtocol {
        RampProtocol { gamma0: self.gamma0, tau: self.tau }
    }
}

/// Linear ramp γ(t) = γ₀ t/τ on [0, τ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    pub gamma0: f64,
    pub tau: f64,
}

impl RampProtocol {
    #[inline]
    pub fn gamma(&self, t: f64) -> f64 {
        self.gamma0 * t / self.tau
    }

    #[inline]
    pub fn gamma_dot(&self) -> f64 {
        self.gamma0 / self.tau
    }
}

/// Stored coherence vector |ρ⟩ = ½(v₀, v₁, v₂, v₃).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceVector {
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl CoherenceVector {
    pub fn from_array(a: [f64; 4]) -> Self {
        Self { v0: a[0], v1: a[1], v2: a[2], v3: a[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.v0, self.v1, self.v2, self.v3]
    }

    /// Normalised state with the given Bloch vector.
    pub fn from_bloch(b: [f64; 3]) -> Self {
        Self { v0: 0.5, v1: 0.5 * b[0], v2: 0.5 * b[1], v3: 0.5 * b[2] }
    }

    /// Normalised expectation values ⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩.
    pub fn expectation(&self) -> [f64; 3] {
        [self.v1 / self.v0, self.v2 / self.v0, self.v3 / self.v0]
    }

    pub fn bloch_length(&self) -> f64 {
        let [x, y, z] = self.expectation();
        (x * x + y * y + z * z).sqrt()
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.v0
    }
}

/// Real 4×4 Liouvillian acting on the stored coherence vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Supermatrix {
    pub entries: [[f64; 4]; 4],
    pub kind: Kind,
}

impl Supermatrix {
    #[inline]
    pub fn apply(&self, v: &[f64; 4]) -> [f64; 4] {
        let m = &self.entries;
        let mut out = [0.0; 4];
        for (row, o) in m.iter().zip(out.iter_mut()) {
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }

    pub fn apply_complex(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let m = &self.entries;
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (row, o) in m.iter().zip(out.iter_mut()) {
            *o = v.iter().zip(row).map(|(vi, mij)| vi * mij).sum();
        }
        out
    }

    /// Row vector times matrix.
    pub fn apply_left(&self, w: &[Complex64; 4]) -> [Complex64; 4] {
        let m = &self.entries;
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|i| w[i] * m[i][j]).sum();
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }
}

/// Supermatrix at instantaneous coupling `gamma`.
pub fn build_supermatrix(params: &ModeParams, gamma: f64, kind: Kind) -> Supermatrix {
    let (p, d, g) = (params.p, params.delta, gamma);
    let entries = match kind {
        Kind::FullLindblad => [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, -2.0 * g, 0.0, 2.0 * d],
            [0.0, 0.0, -2.0 * g, -2.0 * p],
            [-4.0 * g, -2.0 * d, 2.0 * p, -4.0 * g],
        ],
        Kind::NoJump => [
            [0.0, 0.0, 0.0, -2.0 * g],
            [0.0, 0.0, 0.0, 2.0 * d],
            [0.0, 0.0, 0.0, -2.0 * p],
            [-2.0 * g, -2.0 * d, 2.0 * p, 0.0],
        ],
    };
    Supermatrix { entries, kind }
}

/// Instantaneous eigenvalues, valid at exceptional points too.
///
/// Full: 0, −2γ, −3γ ± i√(4E² − γ²). No-jump: 0, 0, ±2i√(E² − γ²).
pub fn eigenvalues(params: &ModeParams, gamma: f64, kind: Kind) -> [Complex64; 4] {
    let e2 = params.energy_sq();
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::i();
    match kind {
        Kind::FullLindblad => {
            let s = Complex64::new(4.0 * e2 - gamma * gamma, 0.0).sqrt();
            let c = Complex64::new(-3.0 * gamma, 0.0);
            [zero, Complex64::new(-2.0 * gamma, 0.0), c + i * s, c - i * s]
        }
        Kind::NoJump => {
            let s = Complex64::new(e2 - gamma * gamma, 0.0).sqrt();
            [zero, zero, 2.0 * i * s, -2.0 * i * s]
        }
    }
}

/// Coupling at which λ₂ and λ₃ coalesce.
pub fn find_ep(params: &ModeParams, kind: Kind) -> f64 {
    let e = params.energy_sq().sqrt();
    match kind {
        Kind::FullLindblad => 2.0 * e,
        Kind::NoJump => e,
    }
}

/// Biorthogonal left/right eigensystem of the supermatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub kind: Kind,
    pub lambdas: [Complex64; 4],
    /// Right eigenvectors |D_α⟩ (columns).
    pub right: [[Complex64; 4]; 4],
    /// Left eigenvectors ⟨E_α| (rows).
    pub left: [[Complex64; 4]; 4],
    /// ⟨E_α|D_α⟩.
    pub norms: [Complex64; 4],
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn dot(a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn eigensystem(params: &ModeParams, gamma: f64, kind: Kind) -> Result<EigenSystem> {
    eigensystem_with_tolerance(params, gamma, kind, DEFAULT_EP_TOLERANCE)
}

/// Closed-form eigensystem; `ep_tolerance` is relative to p² + Δ².
pub fn eigensystem_with_tolerance(
    params: &ModeParams,
    gamma: f64,
    kind: Kind,
    ep_tolerance: f64,
) -> Result<EigenSystem> {
    let (p, d, g) = (params.p, params.delta, gamma);
    let e2 = params.energy_sq();
    if e2 == 0.0 {
        return Err(Error::DegenerateMode("p = delta = 0".into()));
    }
    let distance = match kind {
        Kind::FullLindblad => 4.0 * e2 - g * g,
        Kind::NoJump => e2 - g * g,
    };
    if distance.abs() < ep_tolerance * e2 {
        return Err(Error::EpDegenerate {
            distance: distance / e2,
            tolerance: ep_tolerance,
        });
    }
    let lambdas = eigenvalues(params, gamma, kind);
    let i = Complex64::i();
    // The λ₁ pair is rescaled by Δ so the gapless limit stays finite.
    let d1 = [c(0.0), c(p), c(d), c(0.0)];
    let (right, left) = match kind {
        Kind::FullLindblad => {
            let w = e2 + 2.0 * g * g;
            let s = c(distance).sqrt();
            let d0 = [c(0.5), c(-d * g / w), c(p * g / w), c(-g * g / w)];
            let e0 = [c(1.0), c(0.0), c(0.0), c(0.0)];
            let pair = |sign: f64| {
                let a = c(g) + sign * i * s;
                let right = [c(0.0), -d * a / (2.0 * e2), p * a / (2.0 * e2), c(1.0)];
                let left = [
                    g * (3.0 * g + sign * i * s) / w,
                    d * a / (2.0 * e2),
                    -p * a / (2.0 * e2),
                    c(1.0),
                ];
                (right, left)
            };
            let (r2, l2) = pair(1.0);
            let (r3, l3) = pair(-1.0);
            ([d0, d1, r2, r3], [e0, d1, l2, l3])
        }
        Kind::NoJump => {
            // Kernel pair chosen biorthogonal to the rescaled λ₁ pair.
            let d0 = [c(1.0), c(-g * d / e2), c(g * p / e2), c(0.0)];
            let e0 = [c(1.0), c(g * d / e2), c(-g * p / e2), c(0.0)];
            let is = i * c(distance).sqrt();
            let pair = |sign: f64| {
                let right = [-sign * g / is, sign * d / is, -sign * p / is, c(1.0)];
                let left = [-sign * g / is, -sign * d / is, sign * p / is, c(1.0)];
                (right, left)
            };
            let (r2, l2) = pair(1.0);
            let (r3, l3) = pair(-1.0);
            ([d0, d1, r2, r3], [e0, d1, l2, l3])
        }
    };
    let norms = [0, 1, 2, 3].map(|a| dot(&left[a], &right[a]));
    Ok(EigenSystem { kind, lambdas, right, left, norms })
}

/// Coefficients r_α = ⟨E_α|ρ⟩ / ⟨E_α|D_α⟩ of |ρ⟩ = Σ r_α |D_α⟩.
pub fn project_onto_eigenbasis(state: &CoherenceVector, eig: &EigenSystem) -> [Complex64; 4] {
    let v = state.to_array().map(c);
    [0, 1, 2, 3].map(|a| dot(&eig.left[a], &v) / eig.norms[a])
}

/// Σ r_α |D_α⟩.
pub fn reconstruct(coeffs: &[Complex64; 4], eig: &EigenSystem) -> [Complex64; 4] {
    let mut out = [c(0.0); 4];
    for (r, col) in coeffs.iter().zip(&eig.right) {
        for (o, x) in out.iter_mut().zip(col) {
            *o += r * x;
        }
    }
    out
}

/// Normalised steady state |D₀⟩ of the full Lindbladian.
pub fn steady_state(params: &ModeParams, gamma: f64) -> Result<CoherenceVector> {
    let (p, d, g) = (params.p, params.delta, gamma);
    let w = p * p + d * d + 2.0 * g * g;
    if w == 0.0 {
        return Err(Error::DegenerateMode("p = delta = gamma = 0".into()));
    }
    Ok(CoherenceVector::from_bloch([-2.0 * d * g / w, 2.0 * p * g / w, -2.0 * g * g / w]))
}

/// ∂/∂γ of the steady-state Bloch vector.
pub fn steady_state_slope(params: &ModeParams, gamma: f64) -> Result<[f64; 3]> {
    let (p, d, g) = (params.p, params.delta, gamma);
    let e2 = params.energy_sq();
    let w = e2 + 2.0 * g * g;
    if w == 0.0 {
        return Err(Error::DegenerateMode("p = delta = gamma = 0".into()));
    }
    let a = (e2 - 2.0 * g * g) / (w * w);
    Ok([-2.0 * d * a, 2.0 * p * a, -4.0 * g * e2 / (w * w)])
}

/// Ground state of H_p = pσ_x + Δσ_y.
pub fn initial_ground_state(params: &ModeParams) -> Result<CoherenceVector> {
    let e = params.energy_sq().sqrt();
    if e == 0.0 {
        return Err(Error::DegenerateMode("ground state undefined for p = delta = 0".into()));
    }
    Ok(CoherenceVector::from_bloch([-params.p / e, -params.delta / e, 0.0]))
}

/// Ground state of H_p tilted out of the plane by the first-order adiabatic
/// response to the ramp, tan θ = γ̇/(2E²). A bare ground-state start differs
/// from it by an O(γ̇/E²) precession that never damps without jumps.
pub fn dressed_ground_state(params: &ModeParams) -> Result<CoherenceVector> {
    let e2 = params.energy_sq();
    if e2 == 0.0 {
        return Err(Error::DegenerateMode("ground state undefined for p = delta = 0".into()));
    }
    let e = e2.sqrt();
    let th = (params.protocol().gamma_dot() / (2.0 * e2)).atan();
    let (sin, cos) = th.sin_cos();
    Ok(CoherenceVector::from_bloch([-params.p / e * cos, -params.delta / e * cos, -sin]))
}

/// Starting state of a ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    Ground,
    Dressed,
}

impl InitialState {
    pub fn state(self, params: &ModeParams) -> Result<CoherenceVector> {
        match self {
            InitialState::Ground => initial_ground_state(params),
            InitialState::Dressed => dressed_ground_state(params),
        }
    }
}

/// Expectation values the mode approaches for an infinitely slow ramp.
///
/// With jumps this is the steady state. Without them it is the instantaneous
/// ground eigenstate of the effective Hamiltonian while the spectrum is real,
/// and the dominant (least-damped) eigenvector once it turns complex.
pub fn adiabatic_reference(params: &ModeParams, gamma: f64, kind: Kind) -> Result<[f64; 3]> {
    match kind {
        Kind::FullLindblad => Ok(steady_state(params, gamma)?.expectation()),
        Kind::NoJump => {
            let (p, d, g) = (params.p, params.delta, gamma);
            let e2 = params.energy_sq();
            if e2 == 0.0 {
                return Err(Error::DegenerateMode("p = delta = 0".into()));
            }
            if g * g <= e2 {
                let s = (e2 - g * g).sqrt();
                Ok([(-g * d - p * s) / e2, (g * p - d * s) / e2, 0.0])
            } else {
                let kappa = (g * g - e2).sqrt();
                Ok([-d / g, p / g, -kappa / g])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mode(p: f64, d: f64) -> ModeParams {
        ModeParams::new(p, d, 1.0, 1.0).unwrap()
    }

    #[test]
    fn full_matrix_closed_system_row() {
        let m = build_supermatrix(&mode(1.0, 1.0), 0.0, Kind::FullLindblad);
        assert_eq!(m.entries[3], [0.0, -2.0, 2.0, 0.0]);
        assert_eq!(m.entries[1][1], 0.0);
        assert_eq!(m.entries[2][2], 0.0);
        let z = build_supermatrix(&ModeParams::new(0.0, 0.0, 0.0, 1.0).unwrap(), 0.0, Kind::FullLindblad);
        assert!(z.entries.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn nojump_matrix_pattern() {
        let m = build_supermatrix(&mode(1.0, 1.0), 1.0, Kind::NoJump).entries;
        assert_eq!(m[0][3], -2.0);
        assert_eq!(m[3][0], -2.0);
        assert_eq!(m[1][3], 2.0);
        assert_eq!(m[3][1], -2.0);
        assert_eq!(m[2][3], -2.0);
        assert_eq!(m[3][2], 2.0);
        let nonzero = m.iter().flatten().filter(|x| **x != 0.0).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn full_trace_preserving_row() {
        let m = build_supermatrix(&mode(0.3, 0.7), 1.3, Kind::FullLindblad);
        assert_eq!(m.entries[0], [0.0; 4]);
        assert_abs_diff_eq!(m.trace(), -8.0 * 1.3, epsilon = 1e-15);
    }

    #[test]
    fn closed_system_eigenvalues_are_imaginary() {
        let l = eigenvalues(&mode(1.0, 1.0), 0.0, Kind::FullLindblad);
        assert_abs_diff_eq!(l[2].re, 0.0);
        assert_abs_diff_eq!(l[2].im, 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(l[3].im, -2.0 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn eigenvalues_coalesce_at_eps() {
        let l = eigenvalues(&mode(0.0, 1.0), 2.0, Kind::FullLindblad);
        assert_abs_diff_eq!(l[2].re, -6.0);
        assert_abs_diff_eq!((l[2] - l[3]).norm(), 0.0);
        let l = eigenvalues(&mode(0.0, 1.0), 1.0, Kind::NoJump);
        assert!(l.iter().all(|z| z.norm() == 0.0));
        assert!(matches!(
            eigensystem(&mode(0.0, 1.0), 2.0, Kind::FullLindblad),
            Err(Error::EpDegenerate { .. })
        ));
        assert!(matches!(
            eigensystem(&mode(0.0, 1.0), 1.0, Kind::NoJump),
            Err(Error::EpDegenerate { .. })
        ));
    }

    #[test]
    fn ep_locations() {
        assert_eq!(find_ep(&mode(0.0, 1.0), Kind::FullLindblad), 2.0);
        assert_eq!(find_ep(&mode(0.0, 1.0), Kind::NoJump), 1.0);
        let g = 0.8;
        let gapless = ModeParams::gapless(g / 2.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(find_ep(&gapless, Kind::FullLindblad), g, epsilon = 1e-15);
    }

    #[test]
    fn steady_state_examples() {
        let ss = steady_state(&mode(0.0, 1.0), 1.0).unwrap().expectation();
        assert_abs_diff_eq!(ss[0], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ss[1], 0.0);
        assert_abs_diff_eq!(ss[2], -2.0 / 3.0, epsilon = 1e-15);
        let ss = steady_state(&mode(0.4, 0.9), 0.0).unwrap();
        assert_eq!(ss.to_array(), [0.5, 0.0, 0.0, 0.0]);
        let ss = steady_state(&ModeParams::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0.7).unwrap();
        assert_abs_diff_eq!(ss.expectation()[2], -1.0);
        assert!(matches!(
            steady_state(&ModeParams::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0.0),
            Err(Error::DegenerateMode(_))
        ));
    }

    #[test]
    fn ground_state_examples() {
        // ⟨ψ₋|σ_i|ψ₋⟩ from the explicit spinor (E₋, p + iΔ)/√(2E²).
        for (p, d) in [(0.0, 1.0), (1.0, 0.0), (0.3, -0.0), (2.0, 0.5)] {
            let e = f64::hypot(p, d);
            let a = Complex64::new(-e, 0.0) / (2.0 * e * e).sqrt();
            let b = Complex64::new(p, d) / (2.0 * e * e).sqrt();
            let sx = 2.0 * (a.conj() * b).re;
            let sy = 2.0 * (a.conj() * b).im;
            let sz = a.norm_sqr() - b.norm_sqr();
            let g = initial_ground_state(&ModeParams::new(p, d.abs(), 0.0, 1.0).unwrap()).unwrap();
            let ex = g.expectation();
            assert_abs_diff_eq!(ex[0], sx, epsilon = 1e-15);
            assert_abs_diff_eq!(ex[1], sy, epsilon = 1e-15);
            assert_abs_diff_eq!(ex[2], sz, epsilon = 1e-15);
            assert_abs_diff_eq!(g.bloch_length(), 1.0, epsilon = 1e-15);
        }
        assert!(initial_ground_state(&ModeParams::new(0.0, 0.0, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn gapless_eigensystem_is_finite() {
        let m = ModeParams::gapless(0.7, 1.0, 1.0).unwrap();
        for kind in [Kind::FullLindblad, Kind::NoJump] {
            let eig = eigensystem(&m, 0.3, kind).unwrap();
            assert!(eig.right.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()));
        }
    }

    #[test]
    fn projection_of_eigenvectors() {
        let m = mode(0.4, 1.1);
        let eig = eigensystem(&m, 0.6, Kind::FullLindblad).unwrap();
        let ss = steady_state(&m, 0.6).unwrap();
        let r = project_onto_eigenbasis(&ss, &eig);
        assert_abs_diff_eq!(r[0].re, 1.0, epsilon = 1e-14);
        for a in 1..4 {
            assert!(r[a].norm() < 1e-14);
        }
        let d1 = eig.right[1].map(|z| z.re * 2.5);
        let r = project_onto_eigenbasis(&CoherenceVector::from_array(d1), &eig);
        assert_abs_diff_eq!(r[1].re, 2.5, epsilon = 1e-14);
        assert!(r[0].norm() + r[2].norm() + r[3].norm() < 1e-14);
    }

    #[test]
    fn nojump_reference_matches_kernel_and_dominant_mode() {
        let m = mode(0.6, 0.8);
        // Unbroken: pure state in the λ = 0 kernel, continuous with the ground state.
        let r = adiabatic_reference(&m, 0.5, Kind::NoJump).unwrap();
        let v = [1.0, r[0], r[1], r[2]];
        let l = build_supermatrix(&m, 0.5, Kind::NoJump).apply(&v);
        assert!(l.iter().all(|x| x.abs() < 1e-15));
        assert_abs_diff_eq!(r[0] * r[0] + r[1] * r[1], 1.0, epsilon = 1e-15);
        let g0 = adiabatic_reference(&m, 0.0, Kind::NoJump).unwrap();
        assert_abs_diff_eq!(g0[0], -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(g0[1], -0.8, epsilon = 1e-15);
        // Broken: eigenvector of the largest real eigenvalue 2κ.
        let (g, kappa) = (1.5, (1.5f64 * 1.5 - 1.0).sqrt());
        let r = adiabatic_reference(&m, g, Kind::NoJump).unwrap();
        let v = [1.0, r[0], r[1], r[2]];
        let l = build_supermatrix(&m, g, Kind::NoJump).apply(&v);
        for (a, b) in l.iter().zip(&v) {
            assert_abs_diff_eq!(*a, 2.0 * kappa * b, epsilon = 1e-14);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModeParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(ModeParams::new(0.0, -1.0, 1.0, 1.0).is_err());
        assert!(ModeParams::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(ModeParams::gapless(1.0, 0.0, 1.0).is_err());
        assert!(ModeParams::gapped(1.0, 0.0, 1.0, 1.0).is_err());
        let m = ModeParams::gapped(0.5, 2.0, 1.5, 10.0).unwrap();
        assert_eq!(m.epsilon(), Some(1.5));
        assert_eq!(m.gamma0, 3.0);
        assert_eq!(m.rate(), 20.0);
        assert_eq!(ModeParams::gapless(0.5, 2.0, 10.0).unwrap().case().unwrap(), Case::Gapless);
    }
}

//! Benchmark fixtures shared by the criterion targets.

use lindramp::ModeParams;

/// Gapped mode at ε = 1 with Δ = 1.
pub fn gapped(p: f64, tau: f64) -> ModeParams {
    ModeParams::gapped(p, 1.0, 1.0, tau).expect("valid fixture")
}

//! Momentum-integrated defect densities, τ sweeps and power-law fits.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::model::{InitialState, Kind, ModeParams};
use crate::ode::Controls;
use crate::propagator::{defect_at_end, defect_at_end_from, DefectRecord};
use crate::quadrature::{momentum_integral, QuadratureResult, QuadratureSpec};

/// One τ sweep. `template` fixes Δ and γ₀; its p and τ are overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub kind: Kind,
    pub initial: InitialState,
    pub template: ModeParams,
    pub tau_list: Vec<f64>,
    pub quadrature: QuadratureSpec,
    /// When set, the tangent scale becomes `scale · (rate)^(−exponent)` for
    /// each τ, tracking a momentum window that narrows with the ramp time.
    pub scale_exponent: Option<f64>,
    pub controls: Controls,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        self.controls.validate()?;
        if self.tau_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("tau_list must be strictly increasing".into()));
        }
        if self.tau_list.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParams("tau values must be positive".into()));
        }
        Ok(())
    }

    fn spec_for(&self, params: &ModeParams) -> QuadratureSpec {
        let mut spec = self.quadrature;
        if let Some(a) = self.scale_exponent {
            let f = params.rate().powf(-a);
            spec.scale *= f;
            if let Some(b) = spec.breakpoint.as_mut() {
                b.width *= params.rate().powf(-2.0 * a);
            }
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub tau: f64,
    pub n_z_integrated: f64,
    pub quadrature_error_estimate: f64,
    pub nodes: usize,
}

/// Largest |n_z(p) − n_z(−p)| relative to |n_z(p)| over a few momenta.
pub fn parity_defect(template: &ModeParams, kind: Kind, initial: InitialState, controls: &Controls) -> Result<f64> {
    let s = template.scale();
    let mut worst: f64 = 0.0;
    for q in [0.37, 1.3] {
        let a = defect_at_end_from(&template.with_p(q * s), kind, initial, controls)?.n_z;
        let b = defect_at_end_from(&template.with_p(-q * s), kind, initial, controls)?.n_z;
        worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// ∫dp/2π n_z(p) at the end of the ramp for one τ.
pub fn integrated_defect(
    template: &ModeParams,
    kind: Kind,
    initial: InitialState,
    spec: &QuadratureSpec,
    controls: &Controls,
) -> Result<QuadratureResult> {
    momentum_integral(|p| Ok(defect_at_end_from(&template.with_p(p), kind, initial, controls)?.n_z), spec)
}

/// One `DensityRecord` per τ. Evenness of n_z in p is checked once, at the
/// first τ, before the half-line integrals are trusted.
pub fn tau_sweep(plan: &SweepPlan) -> Result<Vec<DensityRecord>> {
    plan.validate()?;
    let Some(&tau0) = plan.tau_list.first() else {
        return Ok(Vec::new());
    };
    // Checked at a rate of at most 100, where a solve is cheap.
    let rate0 = plan.template.with_tau(tau0).rate();
    let check = plan.template.with_tau(tau0 * (100.0 / rate0).min(1.0));
    let asym = parity_defect(&check, plan.kind, plan.initial, &plan.controls)?;
    if asym > 1e-6 {
        return Err(Error::InvalidParams(format!("n_z is not even in p (asymmetry {asym:e})")));
    }
    plan.tau_list
        .iter()
        .map(|&tau| {
            let params = plan.template.with_tau(tau);
            let r = integrated_defect(&params, plan.kind, plan.initial, &plan.spec_for(&params), &plan.controls)?;
            Ok(DensityRecord { tau, n_z_integrated: r.value, quadrature_error_estimate: r.error, nodes: r.nodes })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub tau_range: [f64; 2],
    /// Number of leading (smallest-τ) records dropped by the window rule.
    pub excluded: usize,
}

impl ExponentFit {
    pub fn write_json<W: Write>(&self, w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(io::Error::from)
    }
}

/// OLS slope of log|n| against log τ.
///
/// Needs ≥ 3 records spanning ≥ 1 decade and a single sign. The smallest τ
/// is dropped once if its residual exceeds three slope standard errors
/// and at least three records remain.
pub fn fit_exponent(records: &[DensityRecord]) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.tau, r.n_z_integrated)).collect();
    fit_power_law(&pts)
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    check_window(&pts)?;
    let mut fit = ols(&pts)?;
    let mut excluded = 0;
    if pts.len() > 3 && fit.1.residuals[0].abs() > 3.0 * fit.0.stderr {
        pts.remove(0);
        check_window(&pts)?;
        fit = ols(&pts)?;
        excluded = 1;
    }
    let mut out = fit.0;
    out.excluded = excluded;
    Ok(out)
}

fn check_window(pts: &[(f64, f64)]) -> Result<()> {
    let span = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if a.0 > 0.0 => (b.0 / a.0).log10(),
        _ => 0.0,
    };
    if pts.len() < 3 || span < 1.0 - 1e-12 {
        return Err(Error::InsufficientData { needed: 3, span, got: pts.len() });
    }
    let first = pts[0].1.signum();
    if pts.iter().any(|(_, v)| *v == 0.0 || v.signum() != first) {
        return Err(Error::SignChange);
    }
    Ok(())
}

fn ols(pts: &[(f64, f64)]) -> Result<(ExponentFit, crate::fit::LineFit)> {
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok((
        ExponentFit {
            exponent: line.slope,
            stderr: line.slope_stderr,
            tau_range: [pts[0].0, pts[pts.len() - 1].0],
            excluded: 0,
        },
        line,
    ))
}

/// Per-momentum defects across `p_grid`, in grid order.
pub fn momentum_profile(
    template: &ModeParams,
    kind: Kind,
    p_grid: &[f64],
    controls: &Controls,
) -> Result<Vec<DefectRecord>> {
    p_grid.par_iter().map(|&p| defect_at_end(&template.with_p(p), kind, controls)).collect()
}

pub fn write_density_csv<W: Write>(mut w: W, header: &[String], records: &[DensityRecord]) -> io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "tau,n_z,err")?;
    for r in records {
        writeln!(w, "{},{:.16e},{:.3e}", r.tau, r.n_z_integrated, r.quadrature_error_estimate)?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(mut w: W, header: &[String], records: &[DefectRecord]) -> io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "p,n_x,n_y,n_z")?;
    for r in records {
        writeln!(w, "{},{:.16e},{:.16e},{:.16e}", r.p, r.n_x, r.n_y, r.n_z)?;
    }
    Ok(())
}

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use lindramp::model::Case;
use lindramp::propagator::{defect_at_end_from, evolve as run_evolve, uniform_times};
use lindramp::quadrature::{Breakpoint, QuadratureSpec};
use lindramp::series::{coefficients, convergence_report, SeriesCase, DEFAULT_BIT_BUDGET};
use lindramp::sweep::{fit_exponent, fit_power_law, tau_sweep, write_density_csv, write_profile_csv};
use lindramp::nojump::scaling_collapse;
use lindramp::{InitialState, Kind, SweepPlan};
use rayon::prelude::*;

use crate::config::{CaseArg, FormatArg, RunConfig};
use crate::CliError;

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn json_out<T: serde::Serialize>(cfg: &RunConfig, value: &T) -> Result<(), CliError> {
    let mut w = sink(cfg)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn format(cfg: &RunConfig) -> FormatArg {
    cfg.format.unwrap_or(FormatArg::Csv)
}

/// Momentum grid 0..p_max·scale with p_points nodes.
fn momentum_grid(cfg: &RunConfig, scale: f64) -> Result<Vec<f64>, CliError> {
    let p_max = cfg.p_max.unwrap_or(5.0);
    let n = cfg.p_points.unwrap_or(51);
    if n < 2 || !(p_max > 0.0) {
        return Err(CliError::usage("momentum grid needs --p-points >= 2 and --p-max > 0".into()));
    }
    Ok((0..n).map(|i| p_max * scale * i as f64 / (n - 1) as f64).collect())
}

pub fn evolve(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let tau = cfg.require_tau()?;
    let m = cfg.mode(tau)?;
    let controls = cfg.controls()?;
    let start = cfg.initial().state(&m)?;
    let times = uniform_times(tau, cfg.samples.unwrap_or(200));
    let traj = run_evolve(&m, &m.protocol(), cfg.kind(), start, &controls, &times)?;
    match format(cfg) {
        FormatArg::Csv => {
            let mut w = sink(cfg)?;
            traj.write_csv(&mut w, &cfg.header(name))?;
            w.flush()?;
        }
        FormatArg::Json => {
            let states: Vec<[f64; 4]> = (0..traj.len()).map(|i| traj.physical_state(i).to_array()).collect();
            json_out(cfg, &serde_json::json!({ "params": m, "kind": traj.kind, "times": traj.times, "states": states }))?;
        }
    }
    Ok(())
}

pub fn defect_profile(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let taus = cfg.taus()?;
    let kind = cfg.kind();
    let controls = cfg.controls()?;
    let initial = cfg.initial();
    let template = cfg.mode(taus[0])?;
    let grid = momentum_grid(cfg, template.scale())?;
    let leading = match kind {
        Kind::FullLindblad => Some(coefficients(&SeriesCase::from_case(template.case()?)?, 1, DEFAULT_BIT_BUDGET)?),
        Kind::NoJump => None,
    };
    let mut rows = Vec::new();
    for &tau in &taus {
        let m = template.with_tau(tau);
        let recs = grid
            .par_iter()
            .map(|&p| defect_at_end_from(&m.with_p(p), kind, initial, &controls))
            .collect::<lindramp::Result<Vec<_>>>()?;
        rows.extend(recs);
    }
    if format(cfg) == FormatArg::Json {
        return json_out(cfg, &rows);
    }
    let mut w = sink(cfg)?;
    if leading.is_none() {
        write_profile_csv(&mut w, &cfg.header(name), &rows)?;
        return Ok(w.flush()?);
    }
    let table = leading.unwrap();
    for line in cfg.header(name) {
        writeln!(w, "# {line}")?;
    }
    // τ·n_z to leading order is 2c₁(1, p/s)/s for energy scale s
    writeln!(w, "p,tau,tau_n_z,tau_n_z_leading")?;
    let s = template.scale();
    for r in &rows {
        let lead = 2.0 * table.c_at(1, 1.0, r.p / s) / s;
        writeln!(w, "{},{},{:.12e},{:.12e}", r.p, r.tau, r.tau * r.n_z, lead)?;
    }
    Ok(w.flush()?)
}

pub fn collapse(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let taus = cfg.taus()?;
    let template = cfg.mode(taus[0])?;
    if !matches!(template.case()?, Case::Gapped { .. }) {
        return Err(CliError::usage("collapse needs a gapped mode (--delta > 0)".into()));
    }
    let grid = momentum_grid(cfg, 1.0)?;
    let exponent = cfg.exponent.unwrap_or(1.0 / 3.0);
    let result = scaling_collapse(&template, &taus, &grid, exponent, &cfg.controls()?)?;
    match format(cfg) {
        FormatArg::Json => json_out(cfg, &result),
        FormatArg::Csv => {
            let mut w = sink(cfg)?;
            result.write_csv(&mut w, &cfg.header(name))?;
            Ok(w.flush()?)
        }
    }
}

pub fn density_sweep(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let taus = cfg.taus()?;
    let kind = cfg.kind();
    let template = cfg.mode(taus[0])?;
    let nodes = cfg.nodes.unwrap_or(32);
    let mut quadrature = QuadratureSpec::new(nodes, template.scale());
    quadrature.tolerance = cfg.quad_tol.unwrap_or(1e-3);
    quadrature.max_nodes = nodes * 16;
    let (initial, scale_exponent) = match kind {
        Kind::FullLindblad => (cfg.initial(), None),
        Kind::NoJump => {
            // Gapless modes end on their exceptional point at p = γ₀.
            if template.case()? == Case::Gapless {
                quadrature.breakpoint = Some(Breakpoint { at: template.gamma0, width: 0.5 * template.gamma0 });
            }
            (cfg.initial.map(Into::into).unwrap_or(InitialState::Dressed), Some(1.0 / 3.0))
        }
    };
    let plan = SweepPlan {
        kind,
        initial,
        template,
        tau_list: taus,
        quadrature,
        scale_exponent,
        controls: cfg.controls()?,
    };
    let records = tau_sweep(&plan)?;
    match format(cfg) {
        FormatArg::Json => json_out(cfg, &records)?,
        FormatArg::Csv => {
            let mut w = sink(cfg)?;
            write_density_csv(&mut w, &cfg.header(name), &records)?;
            w.flush()?;
        }
    }
    if records.len() >= 3 {
        let fit = fit_exponent(&records)?;
        match &cfg.fit_out {
            Some(path) => fit.write_json(BufWriter::new(File::create(path)?))?,
            None => eprintln!("{}", serde_json::to_string(&fit).map_err(io::Error::from)?),
        }
    }
    Ok(())
}

pub fn series(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let orders = cfg.orders.ok_or_else(|| CliError::usage("missing --orders".into()))?;
    if orders == 0 {
        return Err(CliError::usage("--orders must be >= 1".into()));
    }
    let case = match cfg.case.unwrap_or(CaseArg::Gapped) {
        CaseArg::Gapped => SeriesCase::gapped(cfg.epsilon.unwrap_or(1.0))?,
        CaseArg::Gapless => SeriesCase::Gapless,
    };
    match format(cfg) {
        FormatArg::Json => {
            let table = coefficients(&case, orders, DEFAULT_BIT_BUDGET)?;
            let mut w = sink(cfg)?;
            table.write_json(&mut w)?;
            Ok(w.flush()?)
        }
        FormatArg::Csv => {
            let ys = cfg.y_list.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0]);
            let report = convergence_report(&case, &ys, orders)?;
            let mut w = sink(cfg)?;
            report.write_csv(&mut w, &cfg.header(name))?;
            Ok(w.flush()?)
        }
    }
}

/// Reads `tau,n_z[,...]` rows, skipping `#` lines and a header row.
fn read_density_csv(cfg: &RunConfig) -> Result<Vec<(f64, f64)>, CliError> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::usage("missing --input".into()))?;
    let file = File::open(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("tau") {
            continue;
        }
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        match (cols.next(), cols.next()) {
            (Some(Ok(t)), Some(Ok(n))) => pts.push((t, n)),
            _ => return Err(CliError::usage(format!("{}:{}: expected tau,n_z", path.display(), i + 1))),
        }
    }
    Ok(pts)
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let pts = read_density_csv(cfg)?;
    let fit = fit_power_law(&pts)?;
    json_out(cfg, &fit)
}

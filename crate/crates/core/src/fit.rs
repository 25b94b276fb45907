//! Ordinary least squares for a straight line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance (n − 2 dof).
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InsufficientData { needed: 2, span: 0.0, got: n.min(ys.len()) });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData { needed: 2, span: 0.0, got: n });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let slope_stderr = if n > 2 {
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr, residuals })
}

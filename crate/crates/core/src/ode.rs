//! Explicit Runge–Kutta integrators for small fixed-size linear systems.
//!
//! Two modes: a Dormand–Prince 5(4) embedded pair with adaptive step control
//! and classical fixed-step RK4. Both land exactly on the requested sample
//! times. An optional renormalisation hook rescales the state after every
//! step; the accumulated logarithm of the scale is reported alongside each
//! sample so that exponentially growing solutions stay representable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Stepping {
    /// Classical RK4 with `steps` equal steps over the whole span.
    Fixed { steps: usize },
    /// Dormand–Prince 5(4) with mixed error tolerance atol + rtol·|y|.
    Adaptive { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub stepping: Stepping,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            stepping: Stepping::Adaptive { rtol: 1e-10, atol: 1e-20 },
            max_steps: 500_000_000,
        }
    }
}

impl Controls {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self { stepping: Stepping::Adaptive { rtol, atol }, ..Self::default() }
    }

    pub fn fixed(steps: usize) -> Self {
        Self { stepping: Stepping::Fixed { steps }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.stepping {
            Stepping::Fixed { steps } if steps == 0 => {
                Err(Error::InvalidParams("fixed step count must be >= 1".into()))
            }
            Stepping::Adaptive { rtol, atol } if !(rtol > 0.0 && atol >= 0.0) => {
                Err(Error::InvalidParams("tolerances must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Integration statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// State at a sample time together with the log of the factor divided out.
pub type Sample<const N: usize> = ([f64; N], f64);

type Renorm<'a, const N: usize> = Option<&'a dyn Fn(&[f64; N]) -> f64>;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

fn check_finite<const N: usize>(y: &[f64; N], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t })
    }
}

fn apply_renorm<const N: usize>(renorm: Renorm<'_, N>, y: &mut [f64; N], log_scale: &mut f64) {
    if let Some(r) = renorm {
        let s = r(y);
        if s > 0.0 && s.is_finite() && s != 1.0 {
            for v in y.iter_mut() {
                *v /= s;
            }
            *log_scale += s.ln();
        }
    }
}

/// Integrate y' = f(t, y) from `t0`, recording the state at each of the
/// (non-decreasing, ≥ t0) `samples`.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    samples: &[f64],
    controls: &Controls,
    renorm: Renorm<'_, N>,
) -> Result<(Vec<Sample<N>>, Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    controls.validate()?;
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(Error::InvalidParams("sample times must be sorted and >= t0".into()));
    }
    check_finite(&y0, t0)?;
    match controls.stepping {
        Stepping::Fixed { steps } => fixed_rk4(&f, t0, y0, samples, steps, controls.max_steps, renorm),
        Stepping::Adaptive { rtol, atol } => {
            dopri5(&f, t0, y0, samples, rtol, atol, controls.max_steps, renorm)
        }
    }
}

fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]));
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]));
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}

fn fixed_rk4<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    samples: &[f64],
    steps: usize,
    max_steps: usize,
    renorm: Renorm<'_, N>,
) -> Result<(Vec<Sample<N>>, Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let t_end = samples.last().copied().unwrap_or(t0);
    let span = t_end - t0;
    let h_nominal = if span > 0.0 { span / steps as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(samples.len());
    let mut stats = Stats::default();
    let (mut t, mut y, mut log_scale) = (t0, y0, 0.0);
    for &target in samples {
        let gap = target - t;
        if gap > 0.0 {
            let n = ((gap / h_nominal) - 1e-9).ceil().max(1.0) as usize;
            let h = gap / n as f64;
            for j in 0..n {
                let tj = t + j as f64 * h;
                y = rk4_step(f, tj, &y, h);
                check_finite(&y, tj + h)?;
                apply_renorm(renorm, &mut y, &mut log_scale);
                stats.accepted += 1;
                if stats.accepted > max_steps {
                    return Err(Error::StepBudgetExhausted { t: tj, max_steps });
                }
            }
            t = target;
        }
        out.push((y, log_scale));
    }
    Ok((out, stats))
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[allow(clippy::too_many_arguments)]
fn dopri5<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    samples: &[f64],
    rtol: f64,
    atol: f64,
    max_steps: usize,
    renorm: Renorm<'_, N>,
) -> Result<(Vec<Sample<N>>, Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(samples.len());
    let mut stats = Stats::default();
    let (mut t, mut y, mut log_scale) = (t0, y0, 0.0);
    let mut k1 = f(t, &y);
    let t_end = samples.last().copied().unwrap_or(t0);
    let mut h = initial_step(f, t, &y, &k1, rtol, atol, t_end - t0);

    for &target in samples {
        while t < target {
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + hs, &y_new);

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
                if e != 0.0 {
                    err_sq += (e / sc) * (e / sc);
                }
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::NonFiniteState { t });
            }

            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = y_new;
                k1 = k7;
                if renorm.is_some() {
                    let before = log_scale;
                    apply_renorm(renorm, &mut y, &mut log_scale);
                    if log_scale != before {
                        k1 = f(t, &y);
                    }
                }
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // A step shortened to hit a sample says nothing about the natural size.
                if !last || hs >= h {
                    h = hs * fac;
                }
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            if stats.accepted + stats.rejected > max_steps {
                return Err(Error::StepBudgetExhausted { t, max_steps });
            }
        }
        out.push((y, log_scale));
    }
    Ok((out, stats))
}

/// Starting step from the scale of y and y' (Hairer, Nørsett & Wanner).
fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    rtol: f64,
    atol: f64,
    span: f64,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if span <= 0.0 {
        return 1.0;
    }
    let norm = |v: &[f64; N]| {
        let s: f64 = (0..N)
            .map(|i| {
                let sc = atol + rtol * y[i].abs();
                if v[i] == 0.0 {
                    0.0
                } else {
                    (v[i] / sc).powi(2)
                }
            })
            .sum();
        (s / N as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = f(t + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_oscillator_adaptive() {
        let samples: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let (out, _) =
            integrate(oscillator, 0.0, [0.0, 1.0], &samples, &Controls::adaptive(1e-11, 1e-13), None)
                .unwrap();
        for (t, (y, _)) in samples.iter().zip(&out) {
            assert!((y[0] - t.sin()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |n| {
            let (out, _) =
                integrate(oscillator, 0.0, [0.0, 1.0], &[5.0], &Controls::fixed(n), None).unwrap();
            let y = out[0].0;
            f64::hypot(y[0] - 5f64.sin(), y[1] - 5f64.cos())
        };
        let ratio = run(100) / run(200);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = 2t y, y(0) = 1 → exp(t²)
        let f = |t: f64, y: &[f64; 1]| [2.0 * t * y[0]];
        let (out, _) = integrate(f, 0.0, [1.0], &[1.5], &Controls::adaptive(1e-12, 1e-14), None).unwrap();
        assert!((out[0].0[0] / 2.25f64.exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn renormalisation_tracks_log_scale() {
        let f = |_t: f64, y: &[f64; 1]| [50.0 * y[0]];
        let renorm = |y: &[f64; 1]| y[0];
        let (out, _) =
            integrate(f, 0.0, [1.0], &[30.0], &Controls::adaptive(1e-10, 1e-12), Some(&renorm)).unwrap();
        let (y, ls) = out[0];
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!((ls - 1500.0).abs() < 1e-6, "log scale {ls}");
    }

    #[test]
    fn overflow_is_reported() {
        let f = |_t: f64, y: &[f64; 1]| [50.0 * y[0]];
        let err = integrate(f, 0.0, [1.0], &[30.0], &Controls::adaptive(1e-8, 1e-10), None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }), "{err:?}");
    }

    #[test]
    fn bad_controls_rejected() {
        assert!(integrate(oscillator, 0.0, [0.0, 1.0], &[1.0], &Controls::fixed(0), None).is_err());
        assert!(integrate(oscillator, 0.0, [0.0, 1.0], &[1.0, 0.5], &Controls::default(), None).is_err());
    }
}

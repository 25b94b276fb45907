//! Asymptotic 1/τ expansion of the transient sector.
//!
//! With x = t/τ and the rate T = Δτ (gapped) or γ₀τ (gapless), the defect
//! amplitudes obey
//!
//!   P' = T(−3εxP + M) + S_P(x, y)
//!   M' = T(−3εxM − (4(1+y²) − ε²x²)P) − εP + S_M(x, y)
//!
//! with the steady-state drift S_P = 2ε²x(1+y²)/D² and
//! S_M = −2ε(1+y²)(1+y²−ε²x²)/D², and P = Σ c_k T^{−k}, M = Σ d_k T^{−k}. Each c_k, d_k is N_k(x, y²)/D^{2k+1}
//! with D = 1 + y² + 2ε²x² (gapped) or y² + 2x² (gapless, ε → 1), computed
//! exactly over the rationals.

use std::fmt::Write as _;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::model::{Case, ModeParams};
use crate::poly::{rational, square_dd, DdPoly, Poly2};

/// Default cap on the bit length of any rational coefficient.
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PMState {
    pub p: f64,
    pub m: f64,
}

impl PMState {
    pub fn new(p: f64, m: f64) -> Self {
        Self { p, m }
    }
}

/// x-derivatives of (P, M) in the gapped case.
pub fn pm_rhs_gapped(x: f64, y: f64, epsilon: f64, rate: f64, s: PMState) -> PMState {
    let e2 = epsilon * epsilon;
    let a = 1.0 + y * y;
    let d = a + 2.0 * e2 * x * x;
    let d2 = d * d;
    PMState {
        p: rate * (-3.0 * epsilon * x * s.p + s.m) + 2.0 * e2 * x * a / d2,
        m: rate * (-3.0 * epsilon * x * s.m - (4.0 * a - e2 * x * x) * s.p) - epsilon * s.p
            - 2.0 * epsilon * a * (a - e2 * x * x) / d2,
    }
}

/// x-derivatives of (P, M) in the gapless case.
pub fn pm_rhs_gapless(x: f64, y: f64, rate: f64, s: PMState) -> PMState {
    let u = y * y;
    let d = u + 2.0 * x * x;
    let d2 = d * d;
    // Both sources carry a factor u; at u = 0 they vanish even where D does.
    let (sp, sm) = if u == 0.0 { (0.0, 0.0) } else { (2.0 * x * u / d2, -2.0 * u * (u - x * x) / d2) };
    PMState {
        p: rate * (-3.0 * x * s.p + s.m) + sp,
        m: rate * (-3.0 * x * s.m - (4.0 * u - x * x) * s.p) - s.p + sm,
    }
}

/// Which recursion a coefficient table follows. The gapped ε is carried as an
/// exact rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesCase {
    Gapped { epsilon: BigRational },
    Gapless,
}

impl SeriesCase {
    /// Gapped case with ε rounded to the nearest fraction with denominator
    /// at most 10⁶.
    pub fn gapped(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
        }
        let r = Ratio::<i64>::approximate_float(epsilon)
            .filter(|r| *r.denom() <= 1_000_000)
            .unwrap_or_else(|| Ratio::new((epsilon * 1e6).round() as i64, 1_000_000));
        Ok(Self::Gapped { epsilon: rational(*r.numer(), *r.denom()) })
    }

    pub fn from_case(case: Case) -> Result<Self> {
        match case {
            Case::Gapped { epsilon } => Self::gapped(epsilon),
            Case::Gapless => Ok(Self::Gapless),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Gapped { .. } => "gapped",
            Self::Gapless => "gapless",
        }
    }

    /// ε of the recursion (1 in the gapless case).
    pub fn epsilon(&self) -> BigRational {
        match self {
            Self::Gapped { epsilon } => epsilon.clone(),
            Self::Gapless => BigRational::one(),
        }
    }

    pub fn epsilon_f64(&self) -> f64 {
        ratio_to_f64(&self.epsilon())
    }

    /// Canonical denominator D(x, u).
    pub fn denominator(&self) -> Poly2 {
        let e = self.epsilon();
        match self {
            Self::Gapped { .. } => Poly2::from_terms([
                (0, 0, BigRational::one()),
                (0, 1, BigRational::one()),
                (2, 0, &e * &e * rational(2, 1)),
            ]),
            Self::Gapless => Poly2::from_terms([(0, 1, BigRational::one()), (2, 0, rational(2, 1))]),
        }
    }

    /// The constant part A(u) of the restoring coefficient A − ε²x².
    fn restoring(&self) -> Poly2 {
        match self {
            Self::Gapped { .. } => {
                Poly2::from_terms([(0, 0, rational(4, 1)), (0, 1, rational(4, 1))])
            }
            Self::Gapless => Poly2::from_terms([(0, 1, rational(4, 1))]),
        }
    }

    /// First-order numerators (c₁, d₁) over D³.
    fn first_order(&self) -> (Poly2, Poly2) {
        let e = self.epsilon();
        let half = rational(1, 2);
        match self {
            Self::Gapped { .. } => {
                // c₁ = ε(1+u)(4ε²x² − 1 − u)/(2D³), d₁ = ε²x(1+u)(4ε²x² − 7(1+u))/(2D³)
                let e2 = &e * &e;
                let a = Poly2::from_terms([(0, 0, BigRational::one()), (0, 1, BigRational::one())]);
                let c_inner = Poly2::from_terms([
                    (2, 0, &e2 * rational(4, 1)),
                    (0, 1, rational(-1, 1)),
                    (0, 0, rational(-1, 1)),
                ]);
                let d_inner = Poly2::from_terms([
                    (3, 0, &e2 * rational(4, 1)),
                    (1, 1, rational(-7, 1)),
                    (1, 0, rational(-7, 1)),
                ]);
                let c1 = (&a * &c_inner).scale(&(&e * &half));
                let d1 = (&a * &d_inner).scale(&(&e2 * &half));
                (c1, d1)
            }
            Self::Gapless => {
                let c1 = Poly2::from_terms([(2, 1, rational(2, 1)), (0, 2, -half.clone())]);
                let d1 = Poly2::from_terms([(3, 1, rational(2, 1)), (1, 2, rational(-7, 2))]);
                (c1, d1)
            }
        }
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// c_k or d_k as numerator / D^denom_power.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficient {
    pub order: usize,
    pub numerator: Poly2,
    pub denom_power: u32,
}

impl SeriesCoefficient {
    pub fn eval(&self, denominator: &Poly2, x: f64, y: f64) -> f64 {
        let u = y * y;
        self.numerator.eval(x, u) / denominator.eval(x, u).powi(self.denom_power as i32)
    }

    pub fn eval_rational(&self, denominator: &Poly2, x: &BigRational, y: &BigRational) -> BigRational {
        let u = y * y;
        let d = denominator.eval_rational(x, &u);
        self.numerator.eval_rational(x, &u) / num_traits::pow(d, self.denom_power as usize)
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub case: SeriesCase,
    pub denominator: Poly2,
    /// c_k at index k − 1.
    pub c: Vec<SeriesCoefficient>,
    pub d: Vec<SeriesCoefficient>,
    c_dd: Vec<DdPoly>,
    d_dd: Vec<DdPoly>,
    den_dd: DdPoly,
}

impl CoefficientTable {
    pub fn orders(&self) -> usize {
        self.c.len()
    }

    fn eval_with(&self, nums: &[DdPoly], k: usize, x: f64, y: f64) -> f64 {
        let u = square_dd(y);
        let xd = crate::poly::Dd::from_f64(x);
        let n = nums[k - 1].eval_dd(xd, u);
        if n.to_f64() == 0.0 {
            return 0.0;
        }
        let d = self.den_dd.eval_dd(xd, u);
        let mut dp = crate::poly::Dd::from_f64(1.0);
        for _ in 0..self.c[k - 1].denom_power {
            dp = dp.mul(d);
        }
        n.to_f64() / dp.to_f64()
    }

    /// c_k(x, y) for 1 ≤ k ≤ orders().
    pub fn c_at(&self, k: usize, x: f64, y: f64) -> f64 {
        self.eval_with(&self.c_dd, k, x, y)
    }

    pub fn d_at(&self, k: usize, x: f64, y: f64) -> f64 {
        self.eval_with(&self.d_dd, k, x, y)
    }

    /// Partial sums (Σ_{k≤K} c_k T^{−k}, Σ_{k≤K} d_k T^{−k}).
    pub fn pm_at(&self, order: usize, x: f64, y: f64, rate: f64) -> PMState {
        let mut s = PMState::default();
        let mut w = 1.0;
        for k in 1..=order.min(self.orders()) {
            w /= rate;
            s.p += self.c_at(k, x, y) * w;
            s.m += self.d_at(k, x, y) * w;
        }
        s
    }

    pub fn max_bits(&self) -> u64 {
        self.c.iter().chain(&self.d).map(|s| s.numerator.max_bits()).max().unwrap_or(0)
    }

    /// One JSON object holding every coefficient; rationals are written as
    /// [numerator, denominator] integer pairs, grouped by power of x, each
    /// group listing powers of u = y².
    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut s = String::new();
        let eps = self.case.epsilon();
        let _ = write!(
            s,
            "{{\"case\":\"{}\",\"epsilon\":[{},{}],\"variable\":\"u=y^2\",\"denominator\":{},\"coefficients\":[",
            self.case.label(),
            eps.numer(),
            eps.denom(),
            poly_json(&self.denominator)
        );
        let mut first = true;
        for (name, list) in [("c", &self.c), ("d", &self.d)] {
            for coef in list {
                if !first {
                    s.push(',');
                }
                first = false;
                let _ = write!(
                    s,
                    "{{\"name\":\"{name}\",\"order\":{},\"denom_power\":{},\"numerator\":{}}}",
                    coef.order,
                    coef.denom_power,
                    poly_json(&coef.numerator)
                );
            }
        }
        s.push_str("]}\n");
        w.write_all(s.as_bytes())
    }
}

fn poly_json(p: &Poly2) -> String {
    let mut s = String::from("[");
    for (i, row) in p.rows().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, c) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "[{},{}]", c.numer(), c.denom());
        }
        s.push(']');
    }
    s.push(']');
    s
}

/// N' D − a N D_x: numerator of (N/D^a)' over D^{a+1}.
fn quotient_derivative(n: &Poly2, a: u32, d: &Poly2, dx: &Poly2) -> Poly2 {
    let a = BigRational::from_integer(BigInt::from(a));
    &(&n.deriv_x() * d) - &(n * dx).scale(&a)
}

/// Exact c_k, d_k for k = 1..=orders.
pub fn coefficients(case: &SeriesCase, orders: usize, bit_budget: u64) -> Result<CoefficientTable> {
    if orders == 0 {
        return Err(Error::InvalidParams("need at least one order".into()));
    }
    let eps = case.epsilon();
    let den = case.denominator();
    let den_x = den.deriv_x();
    let x = Poly2::x();
    let e2x2 = Poly2::from_terms([(2, 0, &eps * &eps)]);
    let restoring = &case.restoring() - &e2x2;
    let quarter = rational(1, 4);

    let (mut cn, mut dn) = case.first_order();
    let mut power = 3u32;
    let mut c = Vec::with_capacity(orders);
    let mut d = Vec::with_capacity(orders);
    for k in 1..=orders {
        let bits = cn.max_bits().max(dn.max_bits());
        if bits > bit_budget {
            return Err(Error::OrderOverflow { order: k, bits, budget: bit_budget });
        }
        c.push(SeriesCoefficient { order: k, numerator: cn.clone(), denom_power: power });
        d.push(SeriesCoefficient { order: k, numerator: dn.clone(), denom_power: power });
        if k == orders {
            break;
        }
        // Primed quantities and the lifted c_{k-1} all sit over D^{power+1}.
        let cp = quotient_derivative(&cn, power, &den, &den_x);
        let dp = quotient_derivative(&dn, power, &den, &den_x);
        let c_lift = &cn * &den;
        let three_eps = &eps * rational(3, 1);
        let next_c = &(&(&x * &cp).scale(&-three_eps.clone()) - &dp) - &c_lift.scale(&eps);
        let next_d = &(&(&restoring * &cp) - &(&x * &dp).scale(&three_eps))
            - &(&x * &c_lift).scale(&(&eps * &eps * rational(3, 1)));
        cn = next_c.scale(&quarter);
        dn = next_d.scale(&quarter);
        power += 2;
    }
    Ok(CoefficientTable {
        case: case.clone(),
        c_dd: c.iter().map(|s| s.numerator.to_dd()).collect(),
        d_dd: d.iter().map(|s| s.numerator.to_dd()).collect(),
        den_dd: den.to_dd(),
        denominator: den,
        c,
        d,
    })
}

pub fn coefficients_gapped(orders: usize, epsilon: f64) -> Result<CoefficientTable> {
    coefficients(&SeriesCase::gapped(epsilon)?, orders, DEFAULT_BIT_BUDGET)
}

pub fn coefficients_gapless(orders: usize) -> Result<CoefficientTable> {
    coefficients(&SeriesCase::Gapless, orders, DEFAULT_BIT_BUDGET)
}

/// Defects (n_x, n_y, n_z) from the transient amplitudes at coupling γ.
pub fn defect_from_pm(params: &ModeParams, gamma: f64, pm: PMState) -> Result<[f64; 3]> {
    let n_z = 2.0 * pm.p;
    if params.delta > 0.0 {
        let e2 = params.energy_sq();
        let g = gamma * pm.p + params.delta * pm.m;
        Ok([-params.delta * g / e2, params.p * g / e2, n_z])
    } else {
        if params.p == 0.0 {
            return Err(Error::DegenerateMode("gapless n_y is undefined at p = 0".into()));
        }
        Ok([0.0, (gamma * pm.p + params.gamma0 * pm.m) / params.p, n_z])
    }
}

/// Closed-form leading gapped defect at ε = 1:
/// Δ(p²+Δ²)(3Δ²−p²) / (τ(p²+3Δ²)³).
pub fn leading_defect_gapped(p: f64, delta: f64, tau: f64) -> f64 {
    let (p2, d2) = (p * p, delta * delta);
    delta * (p2 + d2) * (3.0 * d2 - p2) / (tau * (p2 + 3.0 * d2).powi(3))
}

/// Closed-form leading gapless defect γ₀p²(4γ₀²−p²) / (τ(p²+2γ₀²)³).
pub fn leading_defect_gapless(p: f64, gamma0: f64, tau: f64) -> f64 {
    let (p2, g2) = (p * p, gamma0 * gamma0);
    gamma0 * p2 * (4.0 * g2 - p2) / (tau * (p2 + 2.0 * g2).powi(3))
}

/// Cross-multiplied difference 2·c₁(1, u)·Q(u) − R(u)·D(1, u)^a between the
/// series and the closed form R/Q written in the dimensionless variable
/// u = y². Zero exactly when the two agree.
pub fn leading_order_identity(table: &CoefficientTable) -> Result<Poly2> {
    let u = Poly2::u();
    let one = BigRational::one();
    let (r, q) = match &table.case {
        SeriesCase::Gapped { epsilon } if epsilon.is_one() => {
            // (1+u)(3−u) / (3+u)³
            let a = &Poly2::constant(one.clone()) + &u;
            let b = &Poly2::constant(rational(3, 1)) - &u;
            let c = &Poly2::constant(rational(3, 1)) + &u;
            (&a * &b, &(&c * &c) * &c)
        }
        SeriesCase::Gapped { .. } => {
            return Err(Error::InvalidParams("closed form is only known at epsilon = 1".into()))
        }
        SeriesCase::Gapless => {
            // u(4−u) / (u+2)³
            let b = &Poly2::constant(rational(4, 1)) - &u;
            let c = &u + &Poly2::constant(rational(2, 1));
            (&u * &b, &(&c * &c) * &c)
        }
    };
    let c1 = &table.c[0];
    let n1 = c1.numerator.substitute_x(&one);
    let d1 = table.denominator.substitute_x(&one);
    let mut dpow = Poly2::constant(one);
    for _ in 0..c1.denom_power {
        dpow = &dpow * &d1;
    }
    Ok(&(&n1 * &q).scale(&rational(2, 1)) - &(&r * &dpow))
}

/// Truncated series prediction Σ_{k≤K} 2c_k(1, p/Δ)(Δτ)^{−k} for n_z.
///
/// Fails with `RadiusExceeded` when Δτ is below the growth radius fitted
/// from the same table at y = p/Δ (tables shorter than six orders are
/// extended to six for the check).
pub fn predict_defect_gapped(p: f64, delta: f64, tau: f64, epsilon: f64, order: usize) -> Result<f64> {
    let params = ModeParams::gapped(p, delta, epsilon, tau)?;
    let table = coefficients_gapped(order.max(6), epsilon)?;
    predict_defect(&table, &params, order)
}

pub fn predict_defect(table: &CoefficientTable, params: &ModeParams, order: usize) -> Result<f64> {
    if order == 0 || order > table.orders() {
        return Err(Error::InvalidParams(format!("order {order} outside 1..={}", table.orders())));
    }
    let y = params.scaled_momentum();
    let rate = params.rate();
    let growth = growth_fit(table, y)?;
    if rate <= growth.radius {
        return Err(Error::RadiusExceeded { rate, radius: growth.radius });
    }
    Ok(2.0 * table.pm_at(order, 1.0, y, rate).p)
}

/// Least-squares growth of log|c_k(1, y)| against k over k ∈ [3, K].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub y: f64,
    pub log_abs_ck: Vec<f64>,
    pub growth_rate: f64,
    pub radius: f64,
}

pub fn growth_fit(table: &CoefficientTable, y: f64) -> Result<GrowthFit> {
    let k_max = table.orders();
    if k_max < 6 {
        return Err(Error::InsufficientData { needed: 6, span: 0.0, got: k_max });
    }
    let log_abs_ck: Vec<f64> = (1..=k_max).map(|k| table.c_at(k, 1.0, y).abs().ln()).collect();
    let (ks, ls): (Vec<f64>, Vec<f64>) = (3..=k_max)
        .filter(|&k| log_abs_ck[k - 1].is_finite())
        .map(|k| (k as f64, log_abs_ck[k - 1]))
        .unzip();
    let line = fit_line(&ks, &ls)?;
    Ok(GrowthFit { y, log_abs_ck, growth_rate: line.slope, radius: line.slope.exp() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub case: String,
    pub epsilon: f64,
    pub orders: Vec<usize>,
    pub fits: Vec<GrowthFit>,
    /// Largest coefficient bit length in the table.
    pub max_bits: u64,
}

impl ConvergenceReport {
    /// Growth CSV: `k` then one `log_abs_ck` column per y.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        for f in &self.fits {
            writeln!(w, "# y={} growth_rate={} radius_estimate={}", f.y, f.growth_rate, f.radius)?;
        }
        let cols: Vec<String> = self.fits.iter().map(|f| format!("log_abs_ck_y{}", f.y)).collect();
        writeln!(w, "k,{}", cols.join(","))?;
        for (i, k) in self.orders.iter().enumerate() {
            let vals: Vec<String> = self.fits.iter().map(|f| format!("{:.12e}", f.log_abs_ck[i])).collect();
            writeln!(w, "{k},{}", vals.join(","))?;
        }
        Ok(())
    }
}

pub fn convergence_report(case: &SeriesCase, ys: &[f64], orders: usize) -> Result<ConvergenceReport> {
    if orders < 6 {
        return Err(Error::InvalidParams(format!("convergence report needs K >= 6, got {orders}")));
    }
    let table = coefficients(case, orders, DEFAULT_BIT_BUDGET)?;
    report_from_table(&table, ys)
}

pub fn report_from_table(table: &CoefficientTable, ys: &[f64]) -> Result<ConvergenceReport> {
    let fits = ys.iter().map(|&y| growth_fit(table, y)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        case: table.case.label().to_string(),
        epsilon: table.case.epsilon_f64(),
        orders: (1..=table.orders()).collect(),
        fits,
        max_bits: table.max_bits(),
    })
}

/// Largest |coefficient| of any numerator, a crude finiteness witness.
pub fn largest_coefficient(table: &CoefficientTable) -> BigRational {
    table
        .c
        .iter()
        .chain(&table.d)
        .map(|s| crate::poly::abs_max_coeff(&s.numerator))
        .max_by(|a, b| a.abs().cmp(&b.abs()))
        .unwrap_or_else(BigRational::zero)
}

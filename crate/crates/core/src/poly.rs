//! Dense bivariate polynomials in (x, u) with exact rational coefficients.
//!
//! The series coefficients depend on the momentum only through u = y², so
//! every numerator lives in Q[x, u]. Storage is `coeffs[i][j]` for x^i u^j.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly2 {
    coeffs: Vec<Vec<BigRational>>,
}

impl fmt::Debug for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                write!(f, "({c})x^{i}u^{j}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl Poly2 {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_terms([(0, 0, c)])
    }

    pub fn x() -> Self {
        Self::from_terms([(1, 0, BigRational::one())])
    }

    pub fn u() -> Self {
        Self::from_terms([(0, 1, BigRational::one())])
    }

    /// Sum of `c · x^i u^j` terms; repeated exponents accumulate.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, BigRational)>,
    {
        let mut p = Self::zero();
        for (i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p.trim();
        p
    }

    fn add_term(&mut self, i: usize, j: usize, c: BigRational) {
        if self.coeffs.len() <= i {
            self.coeffs.resize(i + 1, Vec::new());
        }
        let row = &mut self.coeffs[i];
        if row.len() <= j {
            row.resize(j + 1, BigRational::zero());
        }
        row[j] += c;
    }

    fn trim(&mut self) {
        for row in &mut self.coeffs {
            while row.last().is_some_and(Zero::is_zero) {
                row.pop();
            }
        }
        while self.coeffs.last().is_some_and(Vec::is_empty) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree in x, or `None` for the zero polynomial.
    pub fn degree_x(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn degree_u(&self) -> Option<usize> {
        self.coeffs.iter().filter_map(|r| r.len().checked_sub(1)).max()
    }

    pub fn coeff(&self, i: usize, j: usize) -> BigRational {
        self.coeffs.get(i).and_then(|r| r.get(j)).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Rows indexed by the power of x; each row is indexed by the power of u.
    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.coeffs
    }

    pub fn term_count(&self) -> usize {
        self.coeffs.iter().flatten().filter(|c| !c.is_zero()).count()
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self { coeffs: self.coeffs.iter().map(|r| r.iter().map(|c| c * s).collect()).collect() }
    }

    pub fn deriv_x(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, r)| {
                let k = BigRational::from_integer(BigInt::from(i));
                r.iter().map(|c| c * &k).collect()
            })
            .collect();
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    /// Polynomial in u alone obtained by fixing x = `x`.
    pub fn substitute_x(&self, x: &BigRational) -> Self {
        let mut out: Vec<BigRational> = Vec::new();
        let mut xp = BigRational::one();
        for row in &self.coeffs {
            if out.len() < row.len() {
                out.resize(row.len(), BigRational::zero());
            }
            for (j, c) in row.iter().enumerate() {
                out[j] += c * &xp;
            }
            xp *= x;
        }
        let mut p = Self { coeffs: vec![out] };
        p.trim();
        p
    }

    pub fn eval_rational(&self, x: &BigRational, u: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for row in self.coeffs.iter().rev() {
            let mut inner = BigRational::zero();
            for c in row.iter().rev() {
                inner = inner * u + c;
            }
            acc = acc * x + inner;
        }
        acc
    }

    /// Largest bit length of any numerator or denominator.
    pub fn max_bits(&self) -> u64 {
        self.coeffs
            .iter()
            .flatten()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }

    /// Floating-point evaluation in double-double arithmetic.
    ///
    /// High-order numerators have large alternating coefficients; plain f64
    /// Horner loses up to seven digits near x = 1, the double-double pass
    /// keeps the result at full f64 accuracy.
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        self.to_dd().eval(x, u)
    }

    pub fn to_dd(&self) -> DdPoly {
        DdPoly {
            coeffs: self.coeffs.iter().map(|r| r.iter().map(Dd::from_rational).collect()).collect(),
        }
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (i, row) in rhs.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    out.add_term(i, j, c.clone());
                }
            }
        }
        out.trim();
        out
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self + &(-rhs)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        Poly2 { coeffs: self.coeffs.iter().map(|r| r.iter().map(|c| -c).collect()).collect() }
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        if self.is_zero() || rhs.is_zero() {
            return Poly2::zero();
        }
        let nx = self.coeffs.len() + rhs.coeffs.len() - 1;
        let nu = self.degree_u().unwrap_or(0) + rhs.degree_u().unwrap_or(0) + 1;
        let mut coeffs = vec![vec![BigRational::zero(); nu]; nx];
        for (i, a_row) in self.coeffs.iter().enumerate() {
            for (j, a) in a_row.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (k, b_row) in rhs.coeffs.iter().enumerate() {
                    for (l, b) in b_row.iter().enumerate() {
                        if !b.is_zero() {
                            coeffs[i + k][j + l] += a * b;
                        }
                    }
                }
            }
        }
        let mut p = Poly2 { coeffs };
        p.trim();
        p
    }
}

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        let hi = r.to_f64().unwrap_or(f64::NAN);
        if !hi.is_finite() {
            return Self { hi, lo: 0.0 };
        }
        let rest = r - BigRational::from_float(hi).expect("finite");
        let lo = if rest.is_zero() { 0.0 } else { rest.to_f64().unwrap_or(0.0) };
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Self { hi, lo }
    }
}

/// Poly2 with coefficients rounded to double-double, for fast repeated
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DdPoly {
    coeffs: Vec<Vec<Dd>>,
}

impl DdPoly {
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        self.eval_dd(Dd::from_f64(x), Dd::from_f64(u)).to_f64()
    }

    pub fn eval_dd(&self, x: Dd, u: Dd) -> Dd {
        let mut acc = Dd::default();
        for row in self.coeffs.iter().rev() {
            let mut inner = Dd::default();
            for c in row.iter().rev() {
                inner = inner.mul(u).add(*c);
            }
            acc = acc.mul(x).add(inner);
        }
        acc
    }
}

/// u = y² formed exactly in double-double.
pub fn square_dd(y: f64) -> Dd {
    let (hi, lo) = two_prod(y, y);
    Dd { hi, lo }
}

pub fn abs_max_coeff(p: &Poly2) -> BigRational {
    p.coeffs.iter().flatten().map(|c| c.abs()).max().unwrap_or_else(BigRational::zero)
}

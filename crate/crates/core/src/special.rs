//! Scalar special functions behind the closed-form matrix elements:
//! associated Laguerre polynomials, Pochhammer symbols, falling factorials
//! and the two finite `F` sums that appear in the su(1,1) and su(2)
//! matrix elements.
//!
//! Every function here is pure. Sums are accumulated from the lowest index
//! upward with Neumaier compensation, and any intermediate beyond
//! [`OVERFLOW_THRESHOLD`] is reported as [`Error::Range`] instead of being
//! allowed to turn into an infinity.

use crate::error::{Error, Result};

/// Magnitude above which an intermediate is treated as an overflow.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

/// Relative error estimate above which the Laguerre term sum is abandoned in
/// favour of the three-term recurrence.
const LAGUERRE_CANCELLATION_LIMIT: f64 = 1e-13;

/// Result of evaluating a finite alternating sum, with enough bookkeeping to
/// judge how much cancellation took place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyEvalReport {
    pub value: f64,
    pub terms_summed: usize,
    /// Largest `|term|` encountered. May exceed `|value|` by many orders of
    /// magnitude when the sum cancels.
    pub max_term_magnitude: f64,
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
    terms: usize,
    max_term: f64,
    abs_sum: f64,
}

impl CompensatedSum {
    fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
        self.terms += 1;
        self.max_term = self.max_term.max(term.abs());
        self.abs_sum += term.abs();
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    fn report(&self) -> PolyEvalReport {
        PolyEvalReport { value: self.value(), terms_summed: self.terms, max_term_magnitude: self.max_term }
    }
}

fn guard(x: f64, what: &str) -> Result<f64> {
    if !x.is_finite() || x.abs() > OVERFLOW_THRESHOLD {
        Err(Error::range(format!("{what} overflows ({x:e})")))
    } else {
        Ok(x)
    }
}

/// `n!` as a float. Fails past 170!.
pub fn factorial(n: u32) -> Result<f64> {
    let mut p = 1.0_f64;
    for i in 2..=n {
        p *= i as f64;
    }
    guard(p, "factorial")
}

/// `ln n!`, usable far beyond the range of [`factorial`].
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Binomial coefficient `C(n, k)` in multiplicative form; zero for `k > n`.
pub fn binomial(n: u32, k: u32) -> Result<f64> {
    if k > n {
        return Ok(0.0);
    }
    let k = k.min(n - k);
    let mut c = 1.0_f64;
    for i in 1..=k {
        c = c * ((n - k + i) as f64) / (i as f64);
    }
    guard(c.round(), "binomial coefficient")
}

/// Pochhammer symbol `(a)_n = a (a+1) ... (a+n-1)`, with `(a)_0 = 1`.
///
/// The product is accumulated left to right, so
/// `pochhammer(a, n + 1) == pochhammer(a, n) * (a + n)` holds bit for bit.
pub fn pochhammer(a: f64, n: u32) -> f64 {
    let mut p = 1.0;
    for i in 0..n {
        p *= a + i as f64;
    }
    p
}

/// `ln (a)_n` for `a > 0`.
pub fn ln_pochhammer(a: f64, n: u32) -> f64 {
    (0..n).map(|i| (a + i as f64).ln()).sum()
}

/// Falling factorial `(2J)! / (2J - n)!`.
pub fn falling_perm(two_j: u32, n: u32) -> Result<f64> {
    if n > two_j {
        return Err(Error::domain(format!("falling factorial needs n <= 2J, got n = {n}, 2J = {two_j}")));
    }
    let mut p = 1.0_f64;
    for i in 0..n {
        p *= (two_j - i) as f64;
    }
    guard(p, "falling factorial")
}

/// Associated Laguerre polynomial `L_k^(alpha)(x)`.
pub fn laguerre_assoc(k: i32, alpha: i32, x: f64) -> Result<f64> {
    laguerre_assoc_report(k, alpha, x).map(|r| r.value)
}

/// [`laguerre_assoc`] together with its cancellation diagnostics.
///
/// The defining sum `sum_j (-1)^j C(k+alpha, k-j) x^j / j!` is used whenever
/// its estimated relative rounding error is small. For large positive `x`
/// the terms cancel catastrophically and the value is produced by the
/// three-term recurrence in `k` instead, which is stable for `x >= 0`.
pub fn laguerre_assoc_report(k: i32, alpha: i32, x: f64) -> Result<PolyEvalReport> {
    if k < 0 {
        return Err(Error::domain(format!("Laguerre degree must be >= 0, got {k}")));
    }
    if alpha < -k {
        return Err(Error::domain(format!("Laguerre order alpha = {alpha} must be >= -k = {}", -k)));
    }
    if !x.is_finite() {
        return Err(Error::domain("Laguerre argument must be finite"));
    }
    let upper = (k + alpha) as u32;
    let mut acc = CompensatedSum::default();
    let mut power = 1.0_f64; // x^j / j!
    for j in 0..=k {
        if j > 0 {
            power *= x / j as f64;
        }
        let c = binomial(upper, (k - j) as u32)?;
        let term = guard(c * power, "Laguerre term")?;
        acc.add(if j % 2 == 0 { term } else { -term });
    }
    let value = acc.value();
    let estimated_error = f64::EPSILON * acc.abs_sum * (k as f64 + 1.0);
    if x <= 0.0 || estimated_error <= LAGUERRE_CANCELLATION_LIMIT * value.abs() {
        return Ok(acc.report());
    }

    let a = alpha as f64;
    let mut prev = 1.0_f64;
    let mut cur = 1.0 + a - x;
    if k == 0 {
        cur = 1.0;
    }
    for i in 1..k {
        let fi = i as f64;
        let next = ((2.0 * fi + 1.0 + a - x) * cur - (fi + a) * prev) / (fi + 1.0);
        prev = cur;
        cur = guard(next, "Laguerre recurrence")?;
    }
    Ok(PolyEvalReport { value: cur, terms_summed: acc.terms, max_term_magnitude: acc.max_term })
}

/// su(1,1) matrix-element sum `F_m^{(d)}(x; 2K)` with `n = m + d`:
///
/// `sum_{j=0}^{m} (-1)^{m-j} (2K)_{m+n-j} / ((m-j)! (n-j)! j!) (1+x)^j x^{m-j}`.
///
/// The gamma ratio `Gamma(2K+m+n-j) / Gamma(2K)` is evaluated as the
/// Pochhammer product `(2K)_{m+n-j}`.
pub fn f_su11(m: u32, d: u32, x: f64, two_k: f64) -> Result<f64> {
    f_su11_report(m, d, x, two_k).map(|r| r.value)
}

pub fn f_su11_report(m: u32, d: u32, x: f64, two_k: f64) -> Result<PolyEvalReport> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("F(x; 2K) needs finite x >= 0, got {x}")));
    }
    if !(two_k > 0.0) || !two_k.is_finite() {
        return Err(Error::domain(format!("F(x; 2K) needs 2K > 0, got {two_k}")));
    }
    let n = m + d;
    let mut acc = CompensatedSum::default();
    for j in 0..=m {
        let gamma_ratio = guard(pochhammer(two_k, m + n - j), "Pochhammer (2K)_k")?;
        let denom = factorial(m - j)? * factorial(n - j)? * factorial(j)?;
        let powers = guard((1.0 + x).powi(j as i32) * x.powi((m - j) as i32), "power")?;
        let term = guard(gamma_ratio / denom * powers, "F(x; 2K) term")?;
        acc.add(if (m - j).is_multiple_of(2) { term } else { -term });
    }
    Ok(acc.report())
}

/// su(2) matrix-element sum `F_m^{(d)}(x; 2J)` with `n = m + d`:
///
/// `sum*_{j=0}^{m} (-1)^{m-j} (2J)! / ((2J-m-n+j)! (m-j)! (n-j)! j!) (1-x)^j x^{m-j}`
///
/// where the starred sum skips every `j` with `2J - m - n + j < 0`.
pub fn f_su2(m: u32, d: u32, x: f64, two_j: u32) -> Result<f64> {
    f_su2_report(m, d, x, two_j).map(|r| r.value)
}

pub fn f_su2_report(m: u32, d: u32, x: f64, two_j: u32) -> Result<PolyEvalReport> {
    su2_sum(m, d, x, two_j, |j, _| (1.0 - x).powi(j as i32))
}

/// `(1-x)^{J-(m+n)/2} F_m^{(d)}(x; 2J)` with the prefactor folded into each
/// admitted term.
///
/// Every admitted term carries a non-negative total power of `(1-x)`, so this
/// stays finite at `x = 1` where the unfolded prefactor alone would diverge.
pub fn f_su2_weighted(m: u32, d: u32, x: f64, two_j: u32) -> Result<f64> {
    f_su2_weighted_root(m, d, x, (1.0 - x).max(0.0).sqrt(), two_j)
}

/// As [`f_su2_weighted`], with `sqrt(1-x)` replaced by a caller-supplied
/// `root` whose square is `1-x` but whose sign may be negative.
///
/// Admitted terms carry the integer power `2J - m - n + 2j` of `root`.
pub fn f_su2_weighted_root(m: u32, d: u32, x: f64, root: f64, two_j: u32) -> Result<f64> {
    su2_sum(m, d, x, two_j, |j, n| root.powi((2 * j + two_j - m - n) as i32)).map(|r| r.value)
}

fn su2_sum(m: u32, d: u32, x: f64, two_j: u32, one_minus_x_power: impl Fn(u32, u32) -> f64) -> Result<PolyEvalReport> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("F(x; 2J) needs x in [0, 1], got {x}")));
    }
    let n = m + d;
    let mut acc = CompensatedSum::default();
    for j in 0..=m {
        if two_j + j < m + n {
            continue;
        }
        let coeff = falling_perm(two_j, m + n - j)? / (factorial(m - j)? * factorial(n - j)? * factorial(j)?);
        let term = guard(coeff * one_minus_x_power(j, n) * x.powi((m - j) as i32), "F(x; 2J) term")?;
        acc.add(if (m - j).is_multiple_of(2) { term } else { -term });
    }
    if acc.terms == 0 {
        // every index excluded by the starred rule
        acc.add(0.0);
    }
    Ok(acc.report())
}

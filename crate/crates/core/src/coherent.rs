//! Closed-form matrix elements `<n| exp(z L_+ - conj(z) L_-) |m>` for the
//! oscillator (`U`), su(1,1) (`V`) and su(2) (`W`) displacement operators.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{displacement_numeric, AlgebraSpec};
use crate::special::{f_su11, f_su2_weighted_root, laguerre_assoc, ln_factorial, ln_pochhammer};

/// Below this `|z|` the `sinh|z|/|z|` and `sin|z|/|z|` factors use their series.
const KAPPA_SERIES_CUTOFF: f64 = 1e-6;

/// Displacement parameter together with the `kappa` that enters the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParameter {
    pub z: C64,
    pub kappa: C64,
    pub algebra: AlgebraSpec,
}

impl CoherentParameter {
    pub fn new(algebra: AlgebraSpec, z: C64) -> Self {
        let r = z.norm();
        let factor = match algebra {
            AlgebraSpec::Oscillator => 1.0,
            AlgebraSpec::Su11 { .. } if r < KAPPA_SERIES_CUTOFF => 1.0 + r * r / 6.0,
            AlgebraSpec::Su11 { .. } => r.sinh() / r,
            AlgebraSpec::Su2 { .. } if r < KAPPA_SERIES_CUTOFF => 1.0 - r * r / 6.0,
            AlgebraSpec::Su2 { .. } => r.sin() / r,
        };
        CoherentParameter { z, kappa: z * factor, algebra }
    }
}

/// `kappa^d` for the lower triangle, `(-conj kappa)^d` for the upper.
fn gap_power(kappa: C64, d: u32, upper: bool) -> C64 {
    let base = if upper { -kappa.conj() } else { kappa };
    base.powu(d)
}

fn check_finite(z: C64) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("displacement parameter must be finite"))
    }
}

fn kronecker(n: u32, m: u32) -> C64 {
    C64::new(if n == m { 1.0 } else { 0.0 }, 0.0)
}

fn guard_value(v: C64, what: &str) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::range(format!("{what} overflows")))
    }
}

/// `<n| U(z) |m>` for the oscillator displacement.
pub fn matelem_u(n: u32, m: u32, z: C64) -> Result<C64> {
    check_finite(z)?;
    if z == C64::new(0.0, 0.0) {
        return Ok(kronecker(n, m));
    }
    let (lo, hi) = (n.min(m), n.max(m));
    let x = z.norm_sqr();
    let d = hi - lo;
    let ln_ratio = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) - 0.5 * x;
    let lag = laguerre_assoc(lo as i32, d as i32, x)?;
    guard_value(gap_power(z, d, n < m) * (ln_ratio.exp() * lag), "oscillator matrix element")
}

/// `<n| V(z) |m>` for su(1,1) with Bargmann index `k`.
pub fn matelem_v(k: f64, n: u32, m: u32, z: C64) -> Result<C64> {
    AlgebraSpec::su11(k)?;
    check_finite(z)?;
    if z == C64::new(0.0, 0.0) {
        return Ok(kronecker(n, m));
    }
    let p = CoherentParameter::new(AlgebraSpec::Su11 { k }, z);
    let (lo, hi) = (n.min(m), n.max(m));
    let x = p.kappa.norm_sqr();
    let two_k = 2.0 * k;
    let ln_pref = 0.5 * (ln_factorial(n) + ln_factorial(m) - ln_pochhammer(two_k, n) - ln_pochhammer(two_k, m))
        - (k + 0.5 * (n + m) as f64) * x.ln_1p();
    let f = f_su11(lo, hi - lo, x, two_k)?;
    guard_value(gap_power(p.kappa, hi - lo, n < m) * (ln_pref.exp() * f), "su(1,1) matrix element")
}

/// `<n| W(z) |m>` for su(2) with spin `two_j / 2`.
pub fn matelem_w(two_j: u32, n: u32, m: u32, z: C64) -> Result<C64> {
    AlgebraSpec::su2(two_j)?;
    check_finite(z)?;
    for index in [n, m] {
        if index > two_j {
            return Err(Error::IndexOutOfRange { index: index as usize, max: two_j as usize });
        }
    }
    if z == C64::new(0.0, 0.0) {
        return Ok(kronecker(n, m));
    }
    let p = CoherentParameter::new(AlgebraSpec::Su2 { two_j }, z);
    let (lo, hi) = (n.min(m), n.max(m));
    // rounding can push sin^2 a hair above 1
    let x = p.kappa.norm_sqr().min(1.0);
    let ln_pref = 0.5 * (ln_factorial(n) + ln_factorial(m) - ln_falling(two_j, n) - ln_falling(two_j, m));
    // sqrt(1 - |kappa|^2) is cos|z|, negative past |z| = pi/2
    let f = f_su2_weighted_root(lo, hi - lo, x, z.norm().cos(), two_j)?;
    guard_value(gap_power(p.kappa, hi - lo, n < m) * (ln_pref.exp() * f), "su(2) matrix element")
}

fn ln_falling(two_j: u32, n: u32) -> f64 {
    (0..n).map(|i| ((two_j - i) as f64).ln()).sum()
}

/// Dispatches to [`matelem_u`], [`matelem_v`] or [`matelem_w`].
pub fn matelem(algebra: AlgebraSpec, n: u32, m: u32, z: C64) -> Result<C64> {
    match algebra {
        AlgebraSpec::Oscillator => matelem_u(n, m, z),
        AlgebraSpec::Su11 { k } => matelem_v(k, n, m, z),
        AlgebraSpec::Su2 { two_j } => matelem_w(two_j, n, m, z),
    }
}

/// Result of comparing the closed forms with the numerical exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_deviation: f64,
    /// `(n, m)` where the largest deviation occurred.
    pub worst: (u32, u32),
    pub dim: usize,
    /// Deviation at twice the dimension; `None` for su(2), which is exact.
    pub doubled_deviation: Option<f64>,
    pub converged: bool,
}

impl OracleReport {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::Tolerance {
                tol: 0.1 * self.max_deviation,
                achieved: (self.doubled_deviation.unwrap_or(f64::NAN) - self.max_deviation).abs(),
            })
        }
    }
}

// Deviations below this are roundoff and excluded from the 10% stability rule.
const ORACLE_ROUNDOFF_FLOOR: f64 = 1e-11;

fn max_deviation(algebra: AlgebraSpec, z: C64, max_index: u32, dim: usize) -> Result<(f64, (u32, u32))> {
    let numeric = displacement_numeric(algebra, dim, z)?;
    let mut worst = (0.0, (0, 0));
    for n in 0..=max_index {
        for m in 0..=max_index {
            let dev = (matelem(algebra, n, m, z)? - numeric[(n as usize, m as usize)]).norm();
            if dev > worst.0 {
                worst = (dev, (n, m));
            }
        }
    }
    Ok(worst)
}

/// Largest `|closed form - expm|` over `n, m <= max_index`, with a rerun at
/// `2 dim` for truncated algebras to flag truncation effects.
pub fn oracle_check(algebra: AlgebraSpec, z: C64, max_index: u32, dim: usize) -> Result<OracleReport> {
    algebra.validate()?;
    let dim = algebra.exact_dim().unwrap_or(dim);
    if max_index as usize >= dim {
        return Err(Error::dimension(format!("max_index {max_index} does not fit in dimension {dim}")));
    }
    let (dev, worst) = max_deviation(algebra, z, max_index, dim)?;
    if !algebra.is_truncated() {
        return Ok(OracleReport { max_deviation: dev, worst, dim, doubled_deviation: None, converged: true });
    }
    let (dev2, _) = max_deviation(algebra, z, max_index, 2 * dim)?;
    let converged = (dev2 - dev).abs() <= (0.1 * dev).max(ORACLE_ROUNDOFF_FLOOR);
    Ok(OracleReport { max_deviation: dev, worst, dim, doubled_deviation: Some(dev2), converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    const ALGEBRAS: [AlgebraSpec; 5] = [
        AlgebraSpec::Oscillator,
        AlgebraSpec::Su11 { k: 0.25 },
        AlgebraSpec::Su11 { k: 1.5 },
        AlgebraSpec::Su2 { two_j: 1 },
        AlgebraSpec::Su2 { two_j: 6 },
    ];

    fn max_index(alg: AlgebraSpec) -> u32 {
        alg.exact_dim().map_or(8, |d| d as u32 - 1)
    }

    #[test]
    fn oscillator_examples() {
        assert!((matelem_u(0, 0, c(1.0, 0.0)).unwrap() - c((-0.5f64).exp(), 0.0)).norm() < 1e-16);
        for n in 0..6 {
            for m in 0..6 {
                let expected = if n == m { 1.0 } else { 0.0 };
                assert_eq!(matelem_u(n, m, C64::new(0.0, 0.0)).unwrap(), c(expected, 0.0));
            }
        }
        let z = c(0.7, 0.2);
        let oracle = displacement_numeric(AlgebraSpec::Oscillator, 192, z).unwrap()[(3, 1)];
        assert!((matelem_u(3, 1, z).unwrap() - oracle).norm() < 1e-12);
    }

    #[test]
    fn su11_examples() {
        let v = matelem_v(0.25, 0, 0, c(0.5, 0.0)).unwrap();
        let expected = (1.0 + 0.5f64.sinh().powi(2)).powf(-0.25);
        assert!((v - c(expected, 0.0)).norm() < 1e-15);
        let oracle = displacement_numeric(AlgebraSpec::Su11 { k: 0.25 }, 256, c(0.5, 0.0)).unwrap();
        assert!((v - oracle[(0, 0)]).norm() < 1e-12);

        let z = c(0.0, 0.3);
        let oracle = displacement_numeric(AlgebraSpec::Su11 { k: 1.0 }, 256, z).unwrap()[(2, 1)];
        assert!((matelem_v(1.0, 2, 1, z).unwrap() - oracle).norm() < 1e-12);
        assert_eq!(matelem_v(0.75, 3, 3, C64::new(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(matelem_v(0.75, 3, 1, C64::new(0.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn su2_examples() {
        for &r in &[0.0, 0.4, 1.2, std::f64::consts::FRAC_PI_2, 2.5] {
            let w = matelem_w(1, 0, 0, c(r, 0.0)).unwrap();
            assert!((w - c(r.cos(), 0.0)).norm() < 1e-15, "r = {r}");
        }
        let z = c(0.4, -0.1);
        let oracle = displacement_numeric(AlgebraSpec::Su2 { two_j: 4 }, 5, z).unwrap()[(3, 1)];
        assert!((matelem_w(4, 3, 1, z).unwrap() - oracle).norm() < 1e-14);
        assert_eq!(matelem_w(2, 3, 0, z), Err(Error::IndexOutOfRange { index: 3, max: 2 }));
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let z = c(0.3, -0.6);
        assert_eq!(matelem(AlgebraSpec::Oscillator, 4, 2, z), matelem_u(4, 2, z));
        assert_eq!(matelem(AlgebraSpec::Su2 { two_j: 1 }, 1, 0, z), matelem_w(1, 1, 0, z));
        assert_eq!(matelem(AlgebraSpec::Su11 { k: 0.75 }, 2, 5, z), matelem_v(0.75, 2, 5, z));
    }

    #[test]
    fn oracle_check_examples() {
        let su2 = oracle_check(AlgebraSpec::Su2 { two_j: 5 }, c(0.9, 0.4), 5, 0).unwrap();
        assert!(su2.max_deviation <= 1e-10 && su2.converged);

        let zero = oracle_check(AlgebraSpec::Oscillator, C64::new(0.0, 0.0), 6, 32).unwrap();
        assert!(zero.max_deviation < 1e-15 && zero.converged);

        let su11 = oracle_check(AlgebraSpec::Su11 { k: 1.0 }, c(0.8, 0.0), 6, 256).unwrap();
        assert!(su11.max_deviation <= 1e-8, "{su11:?}");
        assert!(su11.converged);
        su11.ensure_converged().unwrap();

        assert!(matches!(oracle_check(AlgebraSpec::Oscillator, c(0.1, 0.0), 8, 8), Err(Error::Dimension(_))));
    }

    #[test]
    fn oracle_check_flags_truncation() {
        // dim 12 is far too small for |z| = 2
        let r = oracle_check(AlgebraSpec::Oscillator, c(2.0, 0.0), 6, 12).unwrap();
        assert!(!r.converged);
        assert!(r.ensure_converged().is_err());
    }

    #[test]
    fn adjoint_symmetry() {
        let z = c(0.45, -0.8);
        for alg in ALGEBRAS {
            for n in 0..=max_index(alg) {
                for m in 0..=max_index(alg) {
                    let a = matelem(alg, n, m, z).unwrap();
                    let b = matelem(alg, m, n, -z).unwrap().conj();
                    assert!((a - b).norm() <= 1e-10, "{alg} n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn column_sums_are_unit() {
        let z = c(0.6, 0.5);
        for alg in ALGEBRAS {
            for m in 0..=max_index(alg).min(3) {
                let mut total = 0.0;
                let mut n = 0;
                loop {
                    if alg.exact_dim().is_some_and(|d| n as usize >= d) {
                        break;
                    }
                    let p = matelem(alg, n, m, z).unwrap().norm_sqr();
                    total += p;
                    if n > m + 10 && p < 1e-16 {
                        break;
                    }
                    n += 1;
                }
                let tol = if alg.is_truncated() { 1e-8 } else { 1e-13 };
                assert!((total - 1.0).abs() <= tol, "{alg} m={m} sum={total}");
            }
        }
    }

    #[test]
    fn branches_agree_on_the_diagonal() {
        // n == m goes through the n < m (upper) formula when asked for (m, m)
        // via the lower branch and vice versa; gap_power is 1 in both.
        let z = c(1.1, 0.3);
        for alg in ALGEBRAS {
            for m in 0..=max_index(alg).min(8) {
                let v = matelem(alg, m, m, z).unwrap();
                let lower = gap_power(CoherentParameter::new(alg, z).kappa, 0, false);
                let upper = gap_power(CoherentParameter::new(alg, z).kappa, 0, true);
                assert_eq!(lower, upper);
                assert!((v * lower - v * upper).norm() <= 1e-12);
                assert!(v.im.abs() <= 1e-12, "diagonal elements are real");
            }
        }
    }

    #[test]
    fn kappa_limit() {
        let z = c(6e-9, 8e-9);
        for alg in [AlgebraSpec::Su11 { k: 1.0 }, AlgebraSpec::Su2 { two_j: 3 }] {
            let kappa = CoherentParameter::new(alg, z).kappa;
            assert!((kappa - z).norm() <= 1e-7 * z.norm());
        }
        // series and direct branches meet at the cutoff
        for alg in [AlgebraSpec::Su11 { k: 1.0 }, AlgebraSpec::Su2 { two_j: 3 }] {
            let ratio = |r: f64| CoherentParameter::new(alg, c(r, 0.0)).kappa.re / r;
            let below = ratio(KAPPA_SERIES_CUTOFF * 0.999999);
            let above = ratio(KAPPA_SERIES_CUTOFF * 1.000001);
            assert!((below - above).abs() <= 1e-15);
        }
        let p = CoherentParameter::new(AlgebraSpec::Oscillator, c(2.0, 1.0));
        assert_eq!(p.kappa, p.z);
    }

    #[test]
    fn su2_at_full_rotation_stays_finite() {
        // |kappa| = 1 exactly at |z| = pi/2
        let z = c(std::f64::consts::FRAC_PI_2, 0.0);
        for n in 0..=3 {
            for m in 0..=3 {
                let w = matelem_w(3, n, m, z).unwrap();
                assert!(w.re.is_finite() && w.im.is_finite());
            }
        }
        let oracle = displacement_numeric(AlgebraSpec::Su2 { two_j: 3 }, 4, z).unwrap();
        for n in 0..=3 {
            for m in 0..=3 {
                assert!((matelem_w(3, n, m, z).unwrap() - oracle[(n as usize, m as usize)]).norm() < 1e-13);
            }
        }
    }
}

//! First-order dynamics around the dressed eigenstates: the level shifts
//! `Theta_{m,j}`, complex Rabi frequencies, resonance conditions, the
//! rotating-wave two-level solution and time integration of both the
//! reduced amplitude equations and the full Schrödinger equation.
//!
//! Amplitudes `a_{m,j}` refer to the multi-cat states `|{sigma^j, psi_m}>` in
//! the interaction picture, with `exp(-i t (E_m + Theta_{m,j}))` stripped.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{AlgebraSpec, CMatrix, StateVector};
use crate::model::{build_hamiltonian, dressed_constants, spectral_data, ModelConfig};
use crate::special::{f_su11, f_su2_weighted_root, laguerre_assoc, ln_factorial, ln_pochhammer};

/// Relative phase-rate threshold below which a coupling counts as resonant.
pub const RESONANT_PHASE_TOL: f64 = 1e-9;

/// `|kappa|` for the neighbouring-displacement difference `C sin(pi/n)`.
pub fn kappa_abs(cfg: &ModelConfig) -> Result<f64> {
    let c = dressed_constants(cfg)?.c;
    let s = c * (PI / cfg.n as f64).sin();
    Ok(match cfg.algebra {
        AlgebraSpec::Oscillator => s,
        AlgebraSpec::Su11 { .. } => s.sinh(),
        AlgebraSpec::Su2 { .. } => s.sin(),
    })
}

fn check_level(cfg: &ModelConfig, level: usize) -> Result<()> {
    if let Some(d) = cfg.algebra.exact_dim() {
        if level >= d {
            return Err(Error::IndexOutOfRange { index: level, max: d - 1 });
        }
    }
    Ok(())
}

fn check_atom(cfg: &ModelConfig, j: usize) -> Result<()> {
    if j >= cfg.n {
        return Err(Error::IndexOutOfRange { index: j, max: cfg.n - 1 });
    }
    Ok(())
}

/// Real amplitude `G_{m,r}` (`m <= r`) of the neighbouring-displacement
/// matrix element, so that `<r|D|m> = G_{m,r} kappa^(r-m)`.
pub fn gap_amplitude(cfg: &ModelConfig, m: usize, r: usize) -> Result<f64> {
    if m > r {
        return Err(Error::domain(format!("gap amplitude needs m <= r, got m = {m}, r = {r}")));
    }
    check_level(cfg, r)?;
    let c = dressed_constants(cfg)?.c;
    let s = c * (PI / cfg.n as f64).sin();
    let kappa = kappa_abs(cfg)?;
    let x = kappa * kappa;
    let (mu, ru) = (m as u32, r as u32);
    let d = ru - mu;
    Ok(match cfg.algebra {
        AlgebraSpec::Oscillator => {
            let ln_pref = 0.5 * (ln_factorial(mu) - ln_factorial(ru)) - 0.5 * x;
            ln_pref.exp() * laguerre_assoc(m as i32, d as i32, x)?
        }
        AlgebraSpec::Su11 { k } => {
            let two_k = 2.0 * k;
            let ln_pref = 0.5
                * (ln_factorial(mu) + ln_factorial(ru) - ln_pochhammer(two_k, mu) - ln_pochhammer(two_k, ru))
                - (k + 0.5 * (m + r) as f64) * x.ln_1p();
            ln_pref.exp() * f_su11(mu, d, x, two_k)?
        }
        AlgebraSpec::Su2 { two_j } => {
            let ln_falling = |k: u32| (0..k).map(|i| ((two_j - i) as f64).ln()).sum::<f64>();
            let ln_pref = 0.5 * (ln_factorial(mu) + ln_factorial(ru) - ln_falling(mu) - ln_falling(ru));
            ln_pref.exp() * f_su2_weighted_root(mu, d, x.min(1.0), s.cos(), two_j)?
        }
    })
}

/// `f_m`, the diagonal factor in `Theta_{m,j} = Re(D sigma^j) f_m`.
pub fn diagonal_factor(cfg: &ModelConfig, m: usize) -> Result<f64> {
    gap_amplitude(cfg, m, m)
}

/// First-order level shift of `|{sigma^j, psi_m}>`.
pub fn theta(cfg: &ModelConfig, m: usize, j: usize) -> Result<f64> {
    check_atom(cfg, j)?;
    Ok((cfg.delta() * cfg.sigma(j as i64)).re * diagonal_factor(cfg, m)?)
}

fn gap(n: usize, m: usize, r: usize) -> usize {
    (r - m) % n
}

/// True when `(r - m + j' - j) mod n == 0`.
pub fn selection_rule(n: usize, m: usize, r: usize, j: usize, j_prime: usize) -> bool {
    (gap(n, m, r) + j_prime + n - j).is_multiple_of(n)
}

/// Complex Rabi frequency `R` coupling `a_{m,j}` to `a_{r,j'}` (`m < r`).
/// Exactly zero when the selection rule fails.
pub fn rabi_frequency(cfg: &ModelConfig, m: usize, r: usize, j: usize, j_prime: usize) -> Result<C64> {
    if m >= r {
        return Err(Error::domain(format!("Rabi frequency needs m < r, got m = {m}, r = {r}")));
    }
    check_atom(cfg, j)?;
    check_atom(cfg, j_prime)?;
    check_level(cfg, r)?;
    if !selection_rule(cfg.n, m, r, j, j_prime) {
        return Ok(C64::new(0.0, 0.0));
    }
    let d = r - m;
    let delta = cfg.delta();
    let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
    let bracket = delta * cfg.sigma(j as i64) + delta.conj() * cfg.sigma(-(j_prime as i64)) * sign;
    let kappa = kappa_abs(cfg)?;
    // (i |kappa|)^d sigma^(-d/2), principal root sigma^(1/2) = exp(i pi/n)
    let phase = C64::from_polar(1.0, d as f64 * (0.5 * PI - PI / cfg.n as f64));
    Ok(bracket * phase * (gap_amplitude(cfg, m, r)? * kappa.powi(d as i32)))
}

/// Coefficient of `a_{q,j'}` in `i da_{p,j}/dt`, without the time phase.
///
/// Diagonal-level terms vanish once `Theta` is stripped.
pub fn coupling_coefficient(cfg: &ModelConfig, p: usize, j: usize, q: usize, j_prime: usize) -> Result<C64> {
    use std::cmp::Ordering;
    Ok(match p.cmp(&q) {
        Ordering::Equal => C64::new(0.0, 0.0),
        Ordering::Greater => rabi_frequency(cfg, q, p, j_prime, j)? * 0.5,
        Ordering::Less => rabi_frequency(cfg, p, q, j, j_prime)?.conj() * 0.5,
    })
}

/// Phase rate of the `(p,j) <- (q,j')` coupling: `W(p - q) + Theta_{p,j} - Theta_{q,j'}`.
pub fn coupling_phase_rate(cfg: &ModelConfig, p: usize, j: usize, q: usize, j_prime: usize) -> Result<f64> {
    let omega = dressed_constants(cfg)?.omega_dressed;
    Ok(omega * (p as f64 - q as f64) + theta(cfg, p, j)? - theta(cfg, q, j_prime)?)
}

/// `W(m - r) + Theta_{m,j} - Theta_{r,j'}`.
pub fn resonance_residual(cfg: &ModelConfig, m: usize, r: usize, j: usize, j_prime: usize) -> Result<f64> {
    coupling_phase_rate(cfg, m, j, r, j_prime)
}

/// `cos(phi + 2 pi j/n) f_m - cos(phi + 2 pi j'/n) f_r`.
pub fn resonance_bracket(cfg: &ModelConfig, m: usize, r: usize, j: usize, j_prime: usize) -> Result<f64> {
    check_atom(cfg, j)?;
    check_atom(cfg, j_prime)?;
    let unit = cfg.with_delta_abs(1.0);
    Ok(theta(&unit, m, j)? - theta(&unit, r, j_prime)?)
}

/// Solved `|D|` for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceSolution {
    pub delta_abs: f64,
    /// `|D| / g`; the strong-coupling treatment wants this small.
    pub ratio_to_g: f64,
    pub residual: f64,
    pub cfg: ModelConfig,
}

/// Solves the resonance condition for `|D|` at the configured phase.
/// `None` when no positive solution exists.
pub fn resonance_solve(
    cfg: &ModelConfig,
    m: usize,
    r: usize,
    j: usize,
    j_prime: usize,
) -> Result<Option<ResonanceSolution>> {
    if m >= r {
        return Err(Error::domain(format!("resonance needs m < r, got m = {m}, r = {r}")));
    }
    let bracket = resonance_bracket(cfg, m, r, j, j_prime)?;
    // roundoff scale of the bracket; cos(pi/2) is not exactly zero
    let scale = diagonal_factor(cfg, m)?.abs() + diagonal_factor(cfg, r)?.abs();
    if bracket <= 64.0 * f64::EPSILON * scale {
        return Ok(None);
    }
    let omega = dressed_constants(cfg)?.omega_dressed;
    let target = omega * (r - m) as f64;
    if !(bracket > 0.0) || !(target / bracket).is_finite() {
        return Ok(None);
    }
    let delta_abs = target / bracket;
    let solved = cfg.with_delta_abs(delta_abs);
    Ok(Some(ResonanceSolution {
        delta_abs,
        ratio_to_g: delta_abs / cfg.g,
        residual: resonance_residual(&solved, m, r, j, j_prime)?,
        cfg: solved,
    }))
}

/// A pair of coupled amplitudes `a_{m,j} <-> a_{r,j'}` and its Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiChannel {
    pub m: usize,
    pub r: usize,
    pub j: usize,
    pub j_prime: usize,
    pub rabi: C64,
    pub resonance_residual: f64,
}

impl RabiChannel {
    pub fn new(cfg: &ModelConfig, m: usize, r: usize, j: usize, j_prime: usize) -> Result<Self> {
        Ok(RabiChannel {
            m,
            r,
            j,
            j_prime,
            rabi: rabi_frequency(cfg, m, r, j, j_prime)?,
            resonance_residual: resonance_residual(cfg, m, r, j, j_prime)?,
        })
    }

    /// Channel with only `R` set, for gate construction from a known frequency.
    pub fn from_rabi(m: usize, r: usize, j: usize, j_prime: usize, rabi: C64) -> Self {
        RabiChannel { m, r, j, j_prime, rabi, resonance_residual: 0.0 }
    }
}

/// The `n` pairs `(j', j)` obeying the selection rule for levels `m < r`,
/// in the order `j = 0..d`, then `j = n-1` down to `d`.
pub fn channel_enumerate(n: usize, m: usize, r: usize) -> Vec<(usize, usize)> {
    let d = gap(n, m, r);
    let partner = |j: usize| ((j + n - d) % n, j);
    (0..d).map(partner).chain((d..n).rev().map(partner)).collect()
}

/// The 2x2 rotating-wave propagator on `(a_{m,j}, a_{r,j'})`.
pub fn rwa_two_level_matrix(rabi: C64, t: f64) -> CMatrix {
    let abs = rabi.norm();
    let half = 0.5 * abs * t;
    let (cos, sin) = (half.cos(), half.sin());
    let unit = if abs > 0.0 { rabi / abs } else { C64::new(0.0, 0.0) };
    let i = C64::new(0.0, 1.0);
    CMatrix::from_row_major(2, 2, vec![C64::new(cos, 0.0), -i * unit.conj() * sin, -i * unit * sin, C64::new(cos, 0.0)])
        .expect("2x2")
}

pub fn rwa_two_level_evolve(rabi: C64, t: f64, a0: [C64; 2]) -> [C64; 2] {
    let u = rwa_two_level_matrix(rabi, t);
    [u[(0, 0)] * a0[0] + u[(0, 1)] * a0[1], u[(1, 0)] * a0[0] + u[(1, 1)] * a0[1]]
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Two successive step halvings must agree to this in max amplitude.
    pub tol: f64,
    /// Upper bound on RK4 substeps per grid interval.
    pub max_substeps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { tol: 1e-10, max_substeps: 1 << 16 }
    }
}

/// Time series of interaction-picture amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `(level m, atom index j)` for each amplitude component.
    pub labels: Vec<(usize, usize)>,
    pub amplitudes: Vec<StateVector>,
    /// Largest deviation of the state norm squared from its initial value.
    pub norm_drift: f64,
    pub substeps: usize,
    /// Difference between the last two refinements.
    pub refinement_error: f64,
    pub delta_over_g: f64,
    /// Largest `|R| / W` among the couplings in play.
    pub rabi_over_omega: f64,
}

impl Trajectory {
    pub fn label_index(&self, m: usize, j: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == (m, j))
    }

    pub fn population(&self, index: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a[index].norm_sqr()).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.iter().map(|z| z.norm_sqr()).sum()).collect()
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 2 {
        return Err(Error::domain("time grid needs at least two points"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("time grid must be finite and strictly ascending"));
    }
    Ok(())
}

fn rk4_run(
    rhs: &dyn Fn(f64, &StateVector) -> StateVector,
    t_grid: &[f64],
    y0: &StateVector,
    substeps: usize,
) -> Vec<StateVector> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut y = y0.clone();
    out.push(y.clone());
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for s in 0..substeps {
            let t = w[0] + s as f64 * h;
            let k1 = rhs(t, &y);
            let k2 = rhs(t + 0.5 * h, &(&y + &(&k1 * C64::new(0.5 * h, 0.0))));
            let k3 = rhs(t + 0.5 * h, &(&y + &(&k2 * C64::new(0.5 * h, 0.0))));
            let k4 = rhs(t + h, &(&y + &(&k3 * C64::new(h, 0.0))));
            let incr = &(&(&k1 + &(&k2 * C64::new(2.0, 0.0))) + &(&k3 * C64::new(2.0, 0.0))) + &k4;
            y.scaled_add(C64::new(h / 6.0, 0.0), &incr);
        }
        out.push(y.clone());
    }
    out
}

fn max_difference(a: &[StateVector], b: &[StateVector]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).norm())).fold(0.0, f64::max)
}

/// Fixed-step RK4, halving the step until two successive runs agree to `tol`.
fn integrate_refined(
    rhs: &dyn Fn(f64, &StateVector) -> StateVector,
    t_grid: &[f64],
    y0: &StateVector,
    opts: IntegratorOptions,
) -> Result<(Vec<StateVector>, usize, f64)> {
    let mut substeps = 1;
    let mut prev = rk4_run(rhs, t_grid, y0, substeps);
    let mut err = f64::INFINITY;
    while substeps * 2 <= opts.max_substeps {
        substeps *= 2;
        let next = rk4_run(rhs, t_grid, y0, substeps);
        err = max_difference(&prev, &next);
        prev = next;
        if err < opts.tol {
            return Ok((prev, substeps, err));
        }
    }
    Err(Error::Tolerance { tol: opts.tol, achieved: err })
}

fn norm_drift(states: &[StateVector]) -> f64 {
    let norm = |v: &StateVector| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let n0 = norm(&states[0]);
    states.iter().map(|s| (norm(s) - n0).abs()).fold(0.0, f64::max)
}

/// Which couplings the reduced equations keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedMode {
    FullTerms,
    /// Only couplings with zero phase rate, to `RESONANT_PHASE_TOL * W`.
    RwaOnly,
}

struct Coupling {
    row: usize,
    col: usize,
    coeff: C64,
    rate: f64,
}

/// Integrates `i da/dt = M(t) a` over the amplitudes `a_{p,j}`, `p` in `levels`.
///
/// Component order is level-major: index `level_pos * n + j`.
pub fn integrate_reduced(
    cfg: &ModelConfig,
    levels: &[usize],
    t_grid: &[f64],
    a0: &StateVector,
    mode: ReducedMode,
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    let n = cfg.n;
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("levels must hold at least two strictly ascending entries"));
    }
    if a0.len() != n * levels.len() {
        return Err(Error::dimension(format!(
            "initial amplitudes have length {}, expected {}",
            a0.len(),
            n * levels.len()
        )));
    }
    validate_grid(t_grid)?;
    let omega = dressed_constants(cfg)?.omega_dressed;
    let mut couplings = Vec::new();
    let mut max_rabi: f64 = 0.0;
    for (pi, &p) in levels.iter().enumerate() {
        for (qi, &q) in levels.iter().enumerate() {
            if p == q {
                continue;
            }
            for j in 0..n {
                for jp in 0..n {
                    let coeff = coupling_coefficient(cfg, p, j, q, jp)?;
                    if coeff == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let rate = coupling_phase_rate(cfg, p, j, q, jp)?;
                    if mode == ReducedMode::RwaOnly && rate.abs() > RESONANT_PHASE_TOL * omega {
                        continue;
                    }
                    max_rabi = max_rabi.max(2.0 * coeff.norm());
                    couplings.push(Coupling { row: pi * n + j, col: qi * n + jp, coeff, rate });
                }
            }
        }
    }
    let rhs = |t: f64, y: &StateVector| {
        let mut dy = StateVector::zeros(y.len());
        for c in &couplings {
            let phase = if c.rate == 0.0 { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, c.rate * t) };
            // i da/dt = M a
            dy[c.row] += C64::new(0.0, -1.0) * c.coeff * phase * y[c.col];
        }
        dy
    };
    let (states, substeps, err) = integrate_refined(&rhs, t_grid, a0, opts)?;
    let labels = levels.iter().flat_map(|&p| (0..n).map(move |j| (p, j))).collect();
    Ok(Trajectory {
        times: t_grid.to_vec(),
        labels,
        norm_drift: norm_drift(&states),
        amplitudes: states,
        substeps,
        refinement_error: err,
        delta_over_g: cfg.delta_abs / cfg.g,
        rabi_over_omega: max_rabi / omega,
    })
}

/// Integrates `i dPsi/dt = H Psi` on the full space and projects onto the
/// multi-cat states of `levels`, returning interaction-picture amplitudes.
pub fn integrate_full(
    cfg: &ModelConfig,
    t_grid: &[f64],
    psi0: &StateVector,
    levels: &[usize],
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    if psi0.len() != cfg.full_dim() {
        return Err(Error::dimension(format!("initial state has length {}, expected {}", psi0.len(), cfg.full_dim())));
    }
    if levels.is_empty() {
        return Err(Error::domain("at least one level must be projected"));
    }
    for &m in levels {
        if m >= cfg.field_dim() {
            return Err(Error::IndexOutOfRange { index: m, max: cfg.field_dim() - 1 });
        }
    }
    validate_grid(t_grid)?;
    let spectral = spectral_data(cfg)?;
    let h = build_hamiltonian(cfg)?.matrix;
    let minus_i_h = h.scaled(C64::new(0.0, -1.0));
    let rhs = |_t: f64, y: &StateVector| minus_i_h.apply(y);
    let (states, substeps, err) = integrate_refined(&rhs, t_grid, psi0, opts)?;

    let n = cfg.n;
    let mut cats = Vec::new();
    let mut shifts = Vec::new();
    for &m in levels {
        for (j, state) in spectral.multi_cat_states(m).into_iter().enumerate() {
            cats.push(state);
            shifts.push(spectral.energy(m) + theta(cfg, m, j)?);
        }
    }
    let amplitudes = states
        .iter()
        .zip(t_grid)
        .map(|(psi, &t)| {
            cats.iter()
                .zip(&shifts)
                .map(|(cat, &shift)| {
                    let overlap: C64 = cat.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum();
                    C64::from_polar(1.0, shift * t) * overlap
                })
                .collect()
        })
        .collect();
    let mut max_rabi: f64 = 0.0;
    for (a, &p) in levels.iter().enumerate() {
        for &q in &levels[a + 1..] {
            for j in 0..n {
                for jp in 0..n {
                    max_rabi = max_rabi.max(rabi_frequency(cfg, p, q, j, jp)?.norm());
                }
            }
        }
    }
    Ok(Trajectory {
        times: t_grid.to_vec(),
        labels: levels.iter().flat_map(|&m| (0..n).map(move |j| (m, j))).collect(),
        norm_drift: norm_drift(&states),
        amplitudes,
        substeps,
        refinement_error: err,
        delta_over_g: cfg.delta_abs / cfg.g,
        rabi_over_omega: max_rabi / spectral.omega_dressed,
    })
}

/// Angular frequency of `values` from the spacing of its crossings of `level`
/// (linear interpolation between samples). Needs at least two crossings.
pub fn crossing_frequency(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let mut crossings = Vec::new();
    for i in 0..times.len().min(values.len()).saturating_sub(1) {
        let (a, b) = (values[i] - level, values[i + 1] - level);
        if a == 0.0 {
            crossings.push(times[i]);
        } else if a * b < 0.0 {
            crossings.push(times[i] + (times[i + 1] - times[i]) * a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(PI * (crossings.len() - 1) as f64 / span)
}

/// Evenly spaced grid with `steps` intervals.
pub fn linear_grid(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| start + (stop - start) * i as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::matelem;
    use crate::fock::displacement_numeric;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg(n: usize, algebra: AlgebraSpec, g: f64, delta: f64, phase: f64) -> ModelConfig {
        ModelConfig::new(n, algebra, 1.0, g, delta, phase, 96).unwrap()
    }

    /// `<p| exp(+-(w L+ - conj w L-)) |q>` from the numerical exponential,
    /// `w_k = (z_k - z_(k-1))/2`.
    fn neighbour_elements(cfg: &ModelConfig, dim: usize) -> Vec<(CMatrix, CMatrix)> {
        let c = dressed_constants(cfg).unwrap().c;
        (0..cfg.n)
            .map(|k| {
                let w = (cfg.sigma(k as i64) - cfg.sigma(k as i64 - 1)) * (0.5 * c);
                let plus = displacement_numeric(cfg.algebra, dim, w).unwrap();
                let minus = displacement_numeric(cfg.algebra, dim, -w).unwrap();
                (plus, minus)
            })
            .collect()
    }

    /// The defining k-sum of the coupling `(p,j) <- (q,j')`.
    fn coupling_ksum(cfg: &ModelConfig, elems: &[(CMatrix, CMatrix)], p: usize, j: usize, q: usize, jp: usize) -> C64 {
        let n = cfg.n as i64;
        let delta = cfg.delta();
        let (j, jp) = (j as i64, jp as i64);
        let mut acc = c(0.0, 0.0);
        for (k, (plus, minus)) in elems.iter().enumerate() {
            let k = k as i64;
            acc += delta / (2.0 * n as f64) * plus[(p, q)] * cfg.sigma(k * j - (k - 1) * jp);
            acc += delta.conj() / (2.0 * n as f64) * minus[(p, q)] * cfg.sigma((k - 1) * j - k * jp);
        }
        acc
    }

    const ALGEBRAS: [AlgebraSpec; 3] =
        [AlgebraSpec::Oscillator, AlgebraSpec::Su11 { k: 0.75 }, AlgebraSpec::Su2 { two_j: 5 }];

    #[test]
    fn theta_examples() {
        let zero = cfg(3, AlgebraSpec::Oscillator, 0.2, 0.0, 0.0);
        for m in 0..5 {
            for j in 0..3 {
                assert_eq!(theta(&zero, m, j).unwrap(), 0.0);
            }
        }
        // n = 2: kappa = i C, C = 2g/w
        let osc = cfg(2, AlgebraSpec::Oscillator, 0.2, 0.01, 0.0);
        let x: f64 = 0.4 * 0.4;
        for m in 0..4 {
            let expected = 0.01 * (-x / 2.0).exp() * laguerre_assoc(m as i32, 0, x).unwrap();
            assert!((theta(&osc, m, 0).unwrap() - expected).abs() < 1e-17);
        }
    }

    #[test]
    fn theta_matches_numerical_diagonal() {
        let cfg = cfg(3, AlgebraSpec::Su2 { two_j: 2 }, 0.3, 0.02, 0.7);
        let elems = neighbour_elements(&cfg, 3);
        for j in 0..3 {
            let oracle = coupling_ksum(&cfg, &elems, 1, j, 1, j);
            let th = theta(&cfg, 1, j).unwrap();
            assert!((oracle - c(th, 0.0)).norm() < 1e-14, "j = {j}");
        }
    }

    #[test]
    fn diagonal_factor_is_a_matrix_element() {
        for alg in ALGEBRAS {
            let cfg = cfg(4, alg, 0.2, 0.01, 0.0);
            let s = dressed_constants(&cfg).unwrap().c * (PI / 4.0).sin();
            for m in 0..5 {
                let direct = matelem(alg, m as u32, m as u32, c(s, 0.0)).unwrap();
                assert!((diagonal_factor(&cfg, m).unwrap() - direct.re).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn selection_rule_is_exact() {
        for n in 2..=8 {
            let cfg = cfg(n, AlgebraSpec::Su2 { two_j: 7 }, 0.25, 0.01, 0.4);
            for m in 0..2 {
                for d in 1..=5 {
                    let r = m + d;
                    for j in 0..n {
                        for jp in 0..n {
                            let rabi = rabi_frequency(&cfg, m, r, j, jp).unwrap();
                            let allowed = (d + jp + n - j % n) % n == 0 || (d + jp) % n == j;
                            assert_eq!(rabi == c(0.0, 0.0), !allowed, "n={n} m={m} r={r} j={j} j'={jp}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rabi_closed_form_matches_ksum() {
        for alg in ALGEBRAS {
            for n in [2, 3] {
                let cfg = cfg(n, alg, 0.2, 0.01, 0.9);
                let dim = alg.exact_dim().unwrap_or(96);
                let elems = neighbour_elements(&cfg, dim);
                for m in 0..3 {
                    for r in m + 1..=4.min(dim - 1) {
                        for (jp, j) in channel_enumerate(n, m, r) {
                            let closed = rabi_frequency(&cfg, m, r, j, jp).unwrap();
                            let sum = coupling_ksum(&cfg, &elems, r, jp, m, j) * 2.0;
                            assert!((closed - sum).norm() <= 1e-10, "{alg} n={n} m={m} r={r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rabi_example_two_level_oscillator() {
        let cfg = ModelConfig::new(2, AlgebraSpec::Oscillator, 1.0, 0.2, 0.01, 0.0, 128).unwrap();
        let elems = neighbour_elements(&cfg, 128);
        let closed = rabi_frequency(&cfg, 0, 1, 0, 1).unwrap();
        let sum = coupling_ksum(&cfg, &elems, 1, 1, 0, 0) * 2.0;
        assert!((closed - sum).norm() < 1e-14);
        assert!(closed.norm() > 0.0);
        assert_eq!(rabi_frequency(&cfg.with_delta_abs(0.0), 0, 1, 0, 1).unwrap(), c(0.0, 0.0));
        assert_eq!(rabi_frequency(&cfg, 0, 1, 0, 0).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn reduced_generator_is_hermitian_against_ksum() {
        for alg in ALGEBRAS {
            let cfg = cfg(3, alg, 0.2, 0.013, 2.1);
            let dim = alg.exact_dim().unwrap_or(96);
            let elems = neighbour_elements(&cfg, dim);
            let levels = [0usize, 1, 2, 4];
            for &p in &levels {
                for &q in &levels {
                    for j in 0..3 {
                        for jp in 0..3 {
                            let a = coupling_coefficient(&cfg, p, j, q, jp).unwrap();
                            let b = coupling_coefficient(&cfg, q, jp, p, j).unwrap();
                            assert!((a - b.conj()).norm() <= 1e-12);
                            if p != q {
                                let oracle = coupling_ksum(&cfg, &elems, p, j, q, jp);
                                assert!((a - oracle).norm() <= 1e-10, "{alg} p={p} q={q}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn theta_is_real_for_any_phase() {
        for alg in ALGEBRAS {
            for phase in [0.0, 0.3, 2.0, 5.9] {
                let cfg = cfg(5, alg, 0.2, 0.05, phase);
                for j in 0..5 {
                    let z = cfg.delta() * cfg.sigma(j) + cfg.delta().conj() * cfg.sigma(-j);
                    assert!(z.im.abs() <= 1e-15);
                    let _ = theta(&cfg, 2, j as usize).unwrap();
                }
            }
        }
    }

    #[test]
    fn resonance_examples() {
        // phi = pi/2, j = j' = 0: both cosines vanish
        let perp = cfg(4, AlgebraSpec::Oscillator, 0.2, 0.0, PI / 2.0);
        assert!(resonance_solve(&perp, 0, 4, 0, 0).unwrap().is_none());
        // negative bracket
        let neg = cfg(2, AlgebraSpec::Oscillator, 0.2, 0.0, PI);
        assert!(resonance_solve(&neg, 0, 1, 0, 1).unwrap().is_none());

        let cfg = ModelConfig::new(2, AlgebraSpec::Su2 { two_j: 2 }, 1.0, 0.3, 0.0, 0.0, 0).unwrap();
        let sol = resonance_solve(&cfg, 0, 1, 0, 1).unwrap().unwrap();
        assert!(sol.residual.abs() <= 1e-10);
        // closed form: |D| (f_0 + f_1) = W
        let omega = (1.0f64 + 0.36).sqrt();
        let expected = omega / (diagonal_factor(&cfg, 0).unwrap() + diagonal_factor(&cfg, 1).unwrap());
        assert!((sol.delta_abs - expected).abs() <= 1e-14 * expected);
        assert!((sol.ratio_to_g - expected / 0.3).abs() < 1e-13);
        assert!(matches!(resonance_solve(&cfg, 1, 1, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn channel_enumeration() {
        assert_eq!(channel_enumerate(2, 0, 1), vec![(1, 0), (0, 1)]);
        assert_eq!(channel_enumerate(3, 0, 1), vec![(2, 0), (1, 2), (0, 1)]);
        assert_eq!(channel_enumerate(5, 1, 3), vec![(3, 0), (4, 1), (2, 4), (1, 3), (0, 2)]);
        for n in 2..9 {
            for r in 1..12 {
                let ch = channel_enumerate(n, 0, r);
                assert_eq!(ch.len(), n);
                assert!(ch.iter().all(|&(jp, j)| selection_rule(n, 0, r, j, jp)));
            }
        }
    }

    #[test]
    fn two_level_evolution() {
        let rabi = c(0.3, -0.4);
        assert_eq!(rwa_two_level_matrix(rabi, 0.0), CMatrix::identity(2));
        let half = rwa_two_level_matrix(rabi, 2.0 * PI / rabi.norm());
        assert!(half.max_abs_diff(&CMatrix::identity(2).scaled(c(-1.0, 0.0))) < 1e-15);
        assert_eq!(rwa_two_level_matrix(c(0.0, 0.0), 3.0), CMatrix::identity(2));
        for t in [0.1, 1.0, 7.3, 100.0] {
            for r in [c(1.0, 0.0), c(-0.2, 3.0), c(1e-3, 1e-3)] {
                assert!(rwa_two_level_matrix(r, t).unitarity_defect() <= 1e-14);
            }
        }
    }

    #[test]
    fn two_level_matches_ode() {
        let rabi = c(0.3, -0.4);
        let a0 = StateVector::from(vec![c(0.8, 0.0), c(0.0, 0.6)]);
        let gen = CMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), rabi.conj() * 0.5, rabi * 0.5, c(0.0, 0.0)]).unwrap();
        let rhs = |_t: f64, y: &StateVector| gen.apply(y) * c(0.0, -1.0);
        let grid = linear_grid(0.0, 20.0, 40);
        let (states, _, _) =
            integrate_refined(&rhs, &grid, &a0, IntegratorOptions { tol: 1e-12, max_substeps: 1 << 14 }).unwrap();
        for (s, &t) in states.iter().zip(&grid) {
            let exact = rwa_two_level_evolve(rabi, t, [a0[0], a0[1]]);
            assert!((s[0] - exact[0]).norm() < 1e-10 && (s[1] - exact[1]).norm() < 1e-10);
        }
    }

    #[test]
    fn reduced_rwa_matches_two_level() {
        let base = ModelConfig::new(2, AlgebraSpec::Su2 { two_j: 1 }, 1.0, 0.5, 0.0, 0.0, 0).unwrap();
        let sol = resonance_solve(&base, 0, 1, 0, 1).unwrap().unwrap();
        let rabi = rabi_frequency(&sol.cfg, 0, 1, 0, 1).unwrap();
        let period = 2.0 * PI / rabi.norm();
        let grid = linear_grid(0.0, 2.0 * period, 200);
        let mut a0 = StateVector::zeros(4);
        a0[0] = c(1.0, 0.0);
        let traj = integrate_reduced(&sol.cfg, &[0, 1], &grid, &a0, ReducedMode::RwaOnly, IntegratorOptions::default())
            .unwrap();
        let (im, ir) = (traj.label_index(0, 0).unwrap(), traj.label_index(1, 1).unwrap());
        for (a, &t) in traj.amplitudes.iter().zip(&grid) {
            let exact = rwa_two_level_evolve(rabi, t, [c(1.0, 0.0), c(0.0, 0.0)]);
            assert!((a[im] - exact[0]).norm() <= 1e-8 && (a[ir] - exact[1]).norm() <= 1e-8);
        }
        assert!(traj.norm_drift <= 1e-9);
    }

    #[test]
    fn no_splitting_means_frozen_amplitudes() {
        let cfg = cfg(3, AlgebraSpec::Su11 { k: 0.5 }, 0.2, 0.0, 0.0);
        let a0 = StateVector::from_elem(9, c(1.0 / 3.0, 0.0));
        let grid = linear_grid(0.0, 10.0, 20);
        for mode in [ReducedMode::FullTerms, ReducedMode::RwaOnly] {
            let traj = integrate_reduced(&cfg, &[0, 1, 2], &grid, &a0, mode, IntegratorOptions::default()).unwrap();
            assert!(traj.amplitudes.iter().all(|a| a == a0));
        }
        let full = integrate_full(
            &ModelConfig::new(2, AlgebraSpec::Oscillator, 1.0, 0.0, 0.0, 0.0, 6).unwrap(),
            &grid,
            &StateVector::from_elem(12, c(12f64.sqrt().recip(), 0.0)),
            &[0, 1, 2],
            IntegratorOptions::default(),
        )
        .unwrap();
        for a in &full.amplitudes {
            for (x, y) in a.iter().zip(full.amplitudes[0].iter()) {
                assert!((x.norm() - y.norm()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn three_level_reduced_conserves_norm() {
        let cfg = cfg(3, AlgebraSpec::Oscillator, 0.2, 0.02, 0.3);
        let mut a0 = StateVector::zeros(9);
        a0[0] = c(1.0, 0.0);
        let grid = linear_grid(0.0, 50.0, 100);
        let traj =
            integrate_reduced(&cfg, &[0, 1, 3], &grid, &a0, ReducedMode::FullTerms, IntegratorOptions::default())
                .unwrap();
        assert!(traj.norm_drift <= 1e-9);
    }

    #[test]
    fn full_dynamics_follow_rabi_frequency() {
        let base = ModelConfig::new(2, AlgebraSpec::Su2 { two_j: 1 }, 1.0, 0.5, 0.0, 0.0, 0).unwrap();
        let sol = resonance_solve(&base, 0, 1, 0, 1).unwrap().unwrap();
        let rabi = rabi_frequency(&sol.cfg, 0, 1, 0, 1).unwrap();
        let grid = linear_grid(0.0, 2.0 * 2.0 * PI / rabi.norm(), 800);
        let sd = spectral_data(&sol.cfg).unwrap();
        let psi0 = sd.multi_cat_states(0)[0].clone();
        let traj = integrate_full(&sol.cfg, &grid, &psi0, &[0, 1], IntegratorOptions::default()).unwrap();
        let pop = traj.population(traj.label_index(0, 0).unwrap());
        let freq = crossing_frequency(&traj.times, &pop, 0.5).unwrap();
        assert!((freq - rabi.norm()).abs() <= 0.1 * rabi.norm(), "{freq} vs {}", rabi.norm());
        assert!(traj.norm_drift <= 1e-8);
    }

    #[test]
    fn crossing_frequency_of_a_cosine() {
        let t = linear_grid(0.0, 30.0, 3000);
        let v: Vec<f64> = t.iter().map(|&x| 0.5 + 0.5 * (1.7 * x).cos()).collect();
        let f = crossing_frequency(&t, &v, 0.5).unwrap();
        assert!((f - 1.7).abs() < 1e-4);
        assert!(crossing_frequency(&t[..5], &v[..5], 0.5).is_none());
    }

    #[test]
    fn integrator_reports_tolerance_failure() {
        let cfg = cfg(2, AlgebraSpec::Oscillator, 0.2, 0.01, 0.0);
        let a0 = StateVector::from(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let grid = linear_grid(0.0, 1e4, 2);
        let err = integrate_reduced(
            &cfg,
            &[0, 1],
            &grid,
            &a0,
            ReducedMode::FullTerms,
            IntegratorOptions { tol: 1e-12, max_substeps: 8 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Tolerance { .. }));
    }
}

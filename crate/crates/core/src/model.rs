//! n-level atom coupled to one mode: clock and shift matrices, the
//! generalized Walsh-Hadamard matrix, the Hamiltonian
//!
//! `H = w 1 (x) L3 + (conj(D)/2) S3 (x) 1 + (D/2) S3^dag (x) 1 + g (S1 (x) L+ + S1^dag (x) L-)`
//!
//! and the eigensystem of its `D = 0` part together with multi-cat states.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{build_ladder, expm, kron, kron_vec, AlgebraSpec, CMatrix, LadderTriple, StateVector};

/// `|D|` above this fraction of `g` triggers the strong-coupling warning.
pub const STRONG_COUPLING_RATIO: f64 = 0.1;

/// `sigma^k` with `sigma = exp(2 pi i / n)`, from `k mod n` directly.
///
/// Quarter turns are returned exactly.
pub fn root_of_unity(n: usize, k: i64) -> C64 {
    let n_i = n as i64;
    let k = k.rem_euclid(n_i);
    if (4 * k) % n_i == 0 {
        return match 4 * k / n_i {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    let angle = 2.0 * PI * k as f64 / n as f64;
    C64::new(angle.cos(), angle.sin())
}

/// Full set of model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of atomic levels.
    pub n: usize,
    pub omega: f64,
    pub g: f64,
    pub delta_abs: f64,
    /// Phase of `D`, normalized to `[0, 2 pi)`.
    pub delta_phase: f64,
    pub algebra: AlgebraSpec,
    /// Field dimension for truncated algebras; ignored for su(2).
    pub trunc_dim: usize,
}

impl ModelConfig {
    pub fn new(
        n: usize,
        algebra: AlgebraSpec,
        omega: f64,
        g: f64,
        delta_abs: f64,
        delta_phase: f64,
        trunc_dim: usize,
    ) -> Result<Self> {
        let cfg =
            ModelConfig { n, omega, g, delta_abs, delta_phase: delta_phase.rem_euclid(2.0 * PI), algebra, trunc_dim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.algebra.validate()?;
        if self.n < 2 {
            return Err(Error::domain(format!("need n >= 2 atomic levels, got {}", self.n)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::domain(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(Error::domain(format!("g must be non-negative, got {}", self.g)));
        }
        if !(self.delta_abs >= 0.0) || !self.delta_abs.is_finite() {
            return Err(Error::domain(format!("|delta| must be non-negative, got {}", self.delta_abs)));
        }
        if !self.delta_phase.is_finite() {
            return Err(Error::domain("delta phase must be finite"));
        }
        if self.algebra.is_truncated() && self.trunc_dim < 2 {
            return Err(Error::dimension(format!("trunc_dim must be >= 2, got {}", self.trunc_dim)));
        }
        Ok(())
    }

    /// Same configuration with a different `|D|`.
    pub fn with_delta_abs(&self, delta_abs: f64) -> Self {
        ModelConfig { delta_abs, ..*self }
    }

    pub fn with_trunc_dim(&self, trunc_dim: usize) -> Self {
        ModelConfig { trunc_dim, ..*self }
    }

    pub fn delta(&self) -> C64 {
        C64::from_polar(self.delta_abs, self.delta_phase)
    }

    pub fn sigma(&self, k: i64) -> C64 {
        root_of_unity(self.n, k)
    }

    pub fn field_dim(&self) -> usize {
        self.algebra.exact_dim().unwrap_or(self.trunc_dim)
    }

    pub fn full_dim(&self) -> usize {
        self.n * self.field_dim()
    }

    /// `2g / w`.
    pub fn coupling_ratio(&self) -> f64 {
        2.0 * self.g / self.omega
    }

    /// Message when `|D|` is not small against `g`.
    pub fn strong_coupling_warning(&self) -> Option<String> {
        if self.delta_abs > STRONG_COUPLING_RATIO * self.g {
            Some(format!(
                "|delta|/g = {:.3e} is not small; the strong-coupling treatment assumes |delta| << g",
                self.delta_abs / self.g
            ))
        } else {
            None
        }
    }

    /// The dressed spectrum needs `2g/w < 1` for su(1,1).
    pub fn check_spectral_domain(&self) -> Result<()> {
        if matches!(self.algebra, AlgebraSpec::Su11 { .. }) && self.coupling_ratio() >= 1.0 {
            return Err(Error::domain(format!(
                "su(1,1) needs 2g/omega < 1 for the dressed spectrum, got {}",
                self.coupling_ratio()
            )));
        }
        Ok(())
    }

    pub fn ladder(&self) -> Result<LadderTriple> {
        build_ladder(self.algebra, self.field_dim())
    }
}

/// Cyclic shift: ones on the subdiagonal and in the top-right corner.
pub fn sigma1(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        m[((k + 1) % n, k)] = C64::new(1.0, 0.0);
    }
    m
}

/// `diag(1, sigma, ..., sigma^(n-1))`.
pub fn sigma3(n: usize) -> CMatrix {
    let diag: Vec<C64> = (0..n).map(|k| root_of_unity(n, k as i64)).collect();
    CMatrix::from_diag(&diag)
}

/// `W[r][c] = sigma^((n-r) c) / sqrt(n)`; column `j` is the atom eigenstate `|sigma^j>`.
pub fn hadamard_w(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |(r, c)| root_of_unity(n, ((n - r) * c) as i64) * scale)
}

/// `max |W S3 W^dag - S1|`.
pub fn diagonalization_check(n: usize) -> f64 {
    let w = hadamard_w(n);
    (&(&w * &sigma3(n)) * &w.adjoint()).max_abs_diff(&sigma1(n))
}

/// `|sigma^j>`, the eigenvector of `S1` with eigenvalue `sigma^j`.
pub fn atom_eigenstate(n: usize, j: usize) -> StateVector {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n).map(|k| root_of_unity(n, ((n - k) * j) as i64) * scale).collect()
}

/// Assembled Hamiltonian on the atom (x) field space.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub matrix: CMatrix,
    /// False for su(1,1) with `2g/w >= 1`, where the dressed spectrum does not exist.
    pub spectral_valid: bool,
}

fn coupling_part(cfg: &ModelConfig, ladder: &LadderTriple) -> CMatrix {
    let n = cfg.n;
    let s1 = sigma1(n);
    let ladder_term = &kron(&s1, &ladder.l_plus) + &kron(&s1.adjoint(), &ladder.l_minus);
    let field = &kron(&CMatrix::identity(n), &ladder.l_3).scaled(C64::new(cfg.omega, 0.0));
    field + &ladder_term.scaled(C64::new(cfg.g, 0.0))
}

/// The `D = 0` part `w 1 (x) L3 + g (S1 (x) L+ + S1^dag (x) L-)`.
pub fn build_h0(cfg: &ModelConfig) -> Result<CMatrix> {
    cfg.validate()?;
    Ok(coupling_part(cfg, &cfg.ladder()?))
}

pub fn build_hamiltonian(cfg: &ModelConfig) -> Result<Hamiltonian> {
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let h0 = coupling_part(cfg, &ladder);
    let s3 = sigma3(cfg.n);
    let delta = cfg.delta();
    let atom = &s3.scaled(delta.conj() / 2.0) + &s3.adjoint().scaled(delta / 2.0);
    let h = &h0 + &kron(&atom, &CMatrix::identity(ladder.dim));
    Ok(Hamiltonian { matrix: h, spectral_valid: cfg.check_spectral_domain().is_ok() })
}

/// Dressed frequency `W`, displacement constant `C` and energy shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedConstants {
    pub omega_dressed: f64,
    pub c: f64,
    /// Oscillator only: `-g^2/w^2`; zero otherwise.
    pub shift: f64,
}

pub fn dressed_constants(cfg: &ModelConfig) -> Result<DressedConstants> {
    cfg.validate()?;
    cfg.check_spectral_domain()?;
    let x = cfg.coupling_ratio();
    let w = cfg.omega;
    Ok(match cfg.algebra {
        AlgebraSpec::Oscillator => DressedConstants { omega_dressed: w, c: x, shift: -(cfg.g * cfg.g) / (w * w) },
        AlgebraSpec::Su11 { .. } => {
            DressedConstants { omega_dressed: w * (1.0 - x * x).sqrt(), c: x.atanh(), shift: 0.0 }
        }
        AlgebraSpec::Su2 { .. } => {
            DressedConstants { omega_dressed: w * (1.0 + x * x).sqrt(), c: x.atan(), shift: 0.0 }
        }
    })
}

/// Eigensystem of the `D = 0` Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub cfg: ModelConfig,
    pub omega_dressed: f64,
    pub c: f64,
    pub shift: f64,
    /// `z_j = C sigma^j`.
    pub z: Vec<C64>,
    /// `E_m` for every field index of the representation.
    pub energies: Vec<f64>,
    /// `exp(-(z_j L+ - conj(z_j) L-)/2)` for each `j`.
    pub displacements: Vec<CMatrix>,
}

impl SpectralData {
    pub fn energy(&self, m: usize) -> f64 {
        self.energies[m]
    }

    /// Field part `exp(-X_j/2)|m>` of the eigenvector.
    pub fn field_state(&self, j: usize, m: usize) -> StateVector {
        self.displacements[j].column(m)
    }

    /// `|{sigma^j, m}> = |sigma^j> (x) exp(-X_j/2)|m>`.
    pub fn eigenvector(&self, j: usize, m: usize) -> StateVector {
        kron_vec(&atom_eigenstate(self.cfg.n, j), &self.field_state(j, m))
    }

    /// `|{sigma^j, psi_m}> = sum_k W[k][j] |{sigma^k, m}>` for `j = 0..n`.
    pub fn multi_cat_states(&self, m: usize) -> Vec<StateVector> {
        let n = self.cfg.n;
        let w = hadamard_w(n);
        let basis: Vec<StateVector> = (0..n).map(|k| self.eigenvector(k, m)).collect();
        (0..n)
            .map(|j| {
                let mut acc = StateVector::zeros(self.cfg.full_dim());
                for (k, v) in basis.iter().enumerate() {
                    acc.scaled_add(w[(k, j)], v);
                }
                acc
            })
            .collect()
    }

    /// `max |sum_j |{s^j,m}><{s^(j-1),m}| - sum_j sigma^j |psi_j><psi_j||`:
    /// the atom-hopping operator is diagonal in the multi-cat basis.
    pub fn hopping_diagonal_check(&self, m: usize) -> f64 {
        let n = self.cfg.n;
        let basis: Vec<StateVector> = (0..n).map(|k| self.eigenvector(k, m)).collect();
        let cats = self.multi_cat_states(m);
        let lam = CMatrix::from_columns(&basis).expect("equal lengths");
        let psi = CMatrix::from_columns(&cats).expect("equal lengths");
        let hop = &(&lam * &sigma1(n)) * &lam.adjoint();
        let diag = &(&psi * &sigma3(n)) * &psi.adjoint();
        hop.max_abs_diff(&diag)
    }
}

pub fn spectral_data(cfg: &ModelConfig) -> Result<SpectralData> {
    let consts = dressed_constants(cfg)?;
    let ladder = cfg.ladder()?;
    let z: Vec<C64> = (0..cfg.n).map(|j| cfg.sigma(j as i64) * consts.c).collect();
    let displacements =
        z.iter().map(|&zj| expm(&ladder.displacement_generator(zj * -0.5))).collect::<Result<Vec<_>>>()?;
    let energies =
        (0..ladder.dim).map(|m| consts.omega_dressed * (cfg.algebra.l3_eigenvalue(m) + consts.shift)).collect();
    Ok(SpectralData {
        cfg: *cfg,
        omega_dressed: consts.omega_dressed,
        c: consts.c,
        shift: consts.shift,
        z,
        energies,
        displacements,
    })
}

/// Deviation of the conjugated single-`j` Hamiltonian from `W(L3 + shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyFormulaReport {
    pub j: usize,
    pub dim: usize,
    /// Size of the compared leading block.
    pub block: usize,
    pub deviation: f64,
}

pub fn key_formula_check(cfg: &ModelConfig, j: usize) -> Result<KeyFormulaReport> {
    let consts = dressed_constants(cfg)?;
    let ladder = cfg.ladder()?;
    let s = cfg.sigma(j as i64);
    let zj = s * consts.c;
    let up = expm(&ladder.displacement_generator(zj * 0.5))?;
    let down = up.adjoint();
    let hj = &ladder.l_3.scaled(C64::new(cfg.omega, 0.0))
        + &(&ladder.l_plus.scaled(s * cfg.g) + &ladder.l_minus.scaled(s.conj() * cfg.g));
    let lhs = &(&up * &hj) * &down;
    let rhs = (&ladder.l_3 + &CMatrix::identity(ladder.dim).scaled(C64::new(consts.shift, 0.0)))
        .scaled(C64::new(consts.omega_dressed, 0.0));
    let block = if ladder.truncated { ladder.dim / 2 } else { ladder.dim };
    Ok(KeyFormulaReport {
        j,
        dim: ladder.dim,
        block,
        deviation: lhs.leading_block(block).max_abs_diff(&rhs.leading_block(block)),
    })
}

/// Residuals of the `D = 0` eigensystem for field levels `m <= max_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReport {
    pub max_residual: f64,
    /// Largest spread of Rayleigh quotients across `j` at fixed `m`.
    pub max_degeneracy_spread: f64,
    pub max_m: usize,
}

pub fn eigensystem_check(spectral: &SpectralData, max_m: usize) -> Result<EigenReport> {
    let h0 = build_h0(&spectral.cfg)?;
    let mut max_residual: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for m in 0..=max_m.min(spectral.energies.len() - 1) {
        let e = spectral.energy(m);
        let mut quotients = Vec::with_capacity(spectral.cfg.n);
        for j in 0..spectral.cfg.n {
            let v = spectral.eigenvector(j, m);
            let hv = h0.apply(&v);
            let residual = (&hv - &(&v * C64::new(e, 0.0))).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            max_residual = max_residual.max(residual);
            let num: C64 = v.iter().zip(hv.iter()).map(|(a, b)| a.conj() * b).sum();
            let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
            quotients.push(num.re / den);
        }
        let lo = quotients.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = quotients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
    }
    Ok(EigenReport { max_residual, max_degeneracy_spread: spread, max_m })
}

/// `multi_cat_states` for a configuration, building the eigensystem first.
pub fn multi_cat_states(cfg: &ModelConfig, m: usize) -> Result<Vec<StateVector>> {
    let spectral = spectral_data(cfg)?;
    if m >= spectral.energies.len() {
        return Err(Error::IndexOutOfRange { index: m, max: spectral.energies.len() - 1 });
    }
    Ok(spectral.multi_cat_states(m))
}

/// Max deviation of the Gram matrix of `states` from the identity.
pub fn gram_deviation(states: &[StateVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, u) in states.iter().enumerate() {
        for (b, v) in states.iter().enumerate() {
            let ip: C64 = u.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

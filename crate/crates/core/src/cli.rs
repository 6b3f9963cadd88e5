//! Batch command-line front end: JSON config in, `report.json`,
//! `trajectory.csv`, `channels.csv` and `plot.svg` out.
//!
//! Exit codes: 0 all checks pass, 1 a numerical check failed, 2 bad
//! configuration or domain error.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::matelem;
use crate::error::{Error, Result};
use crate::fock::{displacement_numeric, AlgebraSpec, CMatrix};
use crate::gates::{
    controlled_shift_target, elementary_count, elementary_unitary, gate_set_candidates, generator_slots, synthesize,
    ControlWire, GateSetEntry, SynthesisOptions,
};
use crate::model::{
    diagonalization_check, eigensystem_check, gram_deviation, key_formula_check, spectral_data, ModelConfig,
};
use crate::rwa::{
    channel_enumerate, crossing_frequency, integrate_full, integrate_reduced, linear_grid, rabi_frequency,
    resonance_solve, IntegratorOptions, RabiChannel, ReducedMode, Trajectory,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qudit-rabi",
    version,
    about = "Rabi oscillations of an n-level atom strongly coupled to a field mode"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Closed-form matrix elements against the numerical exponential.
    Matelem(CommonArgs),
    /// Diagonalization, key-formula and eigensystem checks.
    Verify(CommonArgs),
    /// Channel table with resonance solutions and Rabi frequencies.
    Rabi(CommonArgs),
    /// Time evolution of one channel.
    Simulate(CommonArgs),
    /// Elementary two-qudit unitaries and synthesis.
    Gates(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the pass/fail tolerance of the command's checks.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides `command.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub svg: bool,
}

/// `g` as a single value or a sweep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    One(f64),
    Many(Vec<f64>),
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Sweep::One(x) => vec![*x],
            Sweep::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaInput {
    pub abs: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexInput {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Reduced equations, resonant terms only.
    Rwa,
    /// Reduced equations, all terms.
    Reduced,
    /// Full Schrödinger equation, projected.
    Full,
}

impl Dynamics {
    fn name(self) -> &'static str {
        match self {
            Dynamics::Rwa => "rwa",
            Dynamics::Reduced => "reduced",
            Dynamics::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateTarget {
    #[default]
    ControlledShift,
    /// Product of two gate-set elements drawn with the seed.
    Planted,
}

/// Command-specific parameters; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandParams {
    pub m: usize,
    pub r: usize,
    pub j: usize,
    /// Defaults to the selection-rule partner of `j`.
    pub j_prime: Option<usize>,
    /// `matelem` sample points.
    pub z: Vec<ComplexInput>,
    pub max_index: u32,
    pub t_start: f64,
    /// Defaults to two Rabi periods.
    pub t_stop: Option<f64>,
    pub t_steps: usize,
    pub dynamics: Vec<Dynamics>,
    /// Replace `delta.abs` by the resonance solution of the channel.
    pub solve_resonance: bool,
    /// Reduced-equation levels (`[m, r]` by default); `gates` uses them as the
    /// full level set (`0..n` by default).
    pub levels: Option<Vec<usize>>,
    pub integrator_tol: f64,
    /// Relative tolerance on the extracted Rabi frequency.
    pub frequency_tol: f64,
    /// Absolute gate durations; otherwise `period_fractions` of each channel's Rabi period.
    pub durations: Option<Vec<f64>>,
    pub period_fractions: Vec<f64>,
    pub max_depth: usize,
    pub beam_width: usize,
    pub target: GateTarget,
    pub control: ControlWire,
    pub seed: u64,
}

impl Default for CommandParams {
    fn default() -> Self {
        CommandParams {
            m: 0,
            r: 1,
            j: 0,
            j_prime: None,
            z: vec![
                ComplexInput { re: 0.3, im: 0.0 },
                ComplexInput { re: 0.0, im: 0.8 },
                ComplexInput { re: 0.7, im: 0.2 },
                ComplexInput { re: 1.5, im: 0.0 },
            ],
            max_index: 4,
            t_start: 0.0,
            t_stop: None,
            t_steps: 400,
            dynamics: vec![Dynamics::Rwa],
            solve_resonance: false,
            levels: None,
            integrator_tol: 1e-10,
            frequency_tol: 0.1,
            durations: None,
            period_fractions: vec![0.125, 0.25, 0.5, 0.75],
            max_depth: 2,
            beam_width: 32,
            target: GateTarget::ControlledShift,
            control: ControlWire::Lower,
            seed: 0,
        }
    }
}

fn default_trunc_dim() -> usize {
    64
}

/// The JSON config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub algebra: AlgebraSpec,
    pub omega: f64,
    pub g: Sweep,
    pub delta: DeltaInput,
    #[serde(default = "default_trunc_dim")]
    pub trunc_dim: usize,
    #[serde(default)]
    pub command: CommandParams,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// One validated model configuration per sweep point, in order.
    pub fn models(&self) -> Result<Vec<ModelConfig>> {
        let points = self.g.points();
        if points.is_empty() {
            return Err(Error::Config("g sweep is empty".into()));
        }
        points
            .into_iter()
            .map(|g| {
                ModelConfig::new(self.n, self.algebra, self.omega, g, self.delta.abs, self.delta.phase, self.trunc_dim)
            })
            .collect()
    }
}

/// Formats with 17 significant digits.
pub fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Tolerance { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Parses arguments (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match execute(&cli.command) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_NUMERICAL,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command; `Ok(pass)` on completion.
pub fn execute(command: &CliCommand) -> Result<bool> {
    let (args, kind) = match command {
        CliCommand::Matelem(a) => (a, "matelem"),
        CliCommand::Verify(a) => (a, "verify"),
        CliCommand::Rabi(a) => (a, "rabi"),
        CliCommand::Simulate(a) => (a, "simulate"),
        CliCommand::Gates(a) => (a, "gates"),
    };
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.command.seed = seed;
    }
    if let Some(tol) = args.tol {
        if !(tol >= 0.0) {
            return Err(Error::Config(format!("--tol must be non-negative, got {tol}")));
        }
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;
    let out = Outputs { dir: args.out.clone() };
    let models = cfg.models()?;
    for model in &models {
        if let Some(w) = model.strong_coupling_warning() {
            log::warn!("{w}");
        }
    }
    let pass = match command {
        CliCommand::Matelem(_) => cmd_matelem(&cfg, args.tol, &out)?,
        CliCommand::Verify(_) => cmd_verify(&cfg, &models, args.tol, &out)?,
        CliCommand::Rabi(_) => cmd_rabi(&cfg, &models, args.tol, &out)?,
        CliCommand::Simulate(_) => cmd_simulate(&cfg, &models, args.tol, args.svg, &out)?,
        CliCommand::Gates(_) => cmd_gates(&cfg, &models, args.tol, &out)?,
    };
    log::info!("{kind}: {}", if pass { "pass" } else { "fail" });
    Ok(pass)
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn report<T: Serialize>(&self, report: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write("report.json", &text)
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, P> {
    command: &'a str,
    config: &'a RunConfig,
    pass: bool,
    points: Vec<P>,
}

// ---- matelem ----

#[derive(Debug, Serialize)]
pub struct MatelemRow {
    pub z_re: f64,
    pub z_im: f64,
    pub n: u32,
    pub m: u32,
    pub re: f64,
    pub im: f64,
    pub oracle_re: f64,
    pub oracle_im: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Serialize)]
struct MatelemReport {
    dim: usize,
    tol: f64,
    max_abs_diff: f64,
    rows: Vec<MatelemRow>,
}

pub fn matelem_rows(
    algebra: AlgebraSpec,
    z: &[ComplexInput],
    max_index: u32,
    trunc_dim: usize,
) -> Result<(Vec<MatelemRow>, usize)> {
    let dim = algebra.exact_dim().unwrap_or(trunc_dim);
    let top = match algebra.exact_dim() {
        Some(d) => max_index.min(d as u32 - 1),
        None => max_index,
    };
    if top as usize >= dim {
        return Err(Error::dimension(format!("max_index {top} needs trunc_dim > {top}")));
    }
    let mut rows = Vec::new();
    for zi in z {
        let zc = C64::new(zi.re, zi.im);
        let oracle = displacement_numeric(algebra, dim, zc)?;
        for n in 0..=top {
            for m in 0..=top {
                let v = matelem(algebra, n, m, zc)?;
                let o = oracle[(n as usize, m as usize)];
                rows.push(MatelemRow {
                    z_re: zi.re,
                    z_im: zi.im,
                    n,
                    m,
                    re: v.re,
                    im: v.im,
                    oracle_re: o.re,
                    oracle_im: o.im,
                    abs_diff: (v - o).norm(),
                });
            }
        }
    }
    Ok((rows, dim))
}

fn cmd_matelem(cfg: &RunConfig, tol: Option<f64>, out: &Outputs) -> Result<bool> {
    let tol = tol.unwrap_or(1e-8);
    let (rows, dim) = matelem_rows(cfg.algebra, &cfg.command.z, cfg.command.max_index, cfg.trunc_dim)?;
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    println!(
        "{:>8} {:>8} {:>3} {:>3} {:>24} {:>24} {:>10}",
        "Re z", "Im z", "n", "m", "closed form", "oracle", "|diff|"
    );
    for r in &rows {
        println!(
            "{:>8.4} {:>8.4} {:>3} {:>3} {:>11.4e}{:+11.4e}i {:>11.4e}{:+11.4e}i {:>10.2e}",
            r.z_re, r.z_im, r.n, r.m, r.re, r.im, r.oracle_re, r.oracle_im, r.abs_diff
        );
    }
    let pass = max_abs_diff <= tol;
    out.report(&Report {
        command: "matelem",
        config: cfg,
        pass,
        points: vec![MatelemReport { dim, tol, max_abs_diff, rows }],
    })?;
    Ok(pass)
}

// ---- verify ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, deviation: f64, tol: f64) -> Check {
    Check { name: name.into(), deviation, tol, pass: deviation <= tol }
}

/// The named checks of `verify` for one model configuration.
pub fn verify_checks(model: &ModelConfig, tol: Option<f64>) -> Result<Vec<Check>> {
    let t = |default: f64| tol.unwrap_or(default);
    let exact = !model.algebra.is_truncated();
    let mut checks = vec![check("hadamard_diagonalization", diagonalization_check(model.n), t(1e-12))];
    for j in 0..model.n {
        let rep = key_formula_check(model, j)?;
        checks.push(check(format!("key_formula_j{j}"), rep.deviation, t(if exact { 1e-12 } else { 1e-8 })));
    }
    let spectral = spectral_data(model)?;
    let max_m = model.field_dim() / 4;
    let eig = eigensystem_check(&spectral, max_m)?;
    checks.push(check("eigen_residual", eig.max_residual, t(1e-8)));
    checks.push(check("eigen_degeneracy", eig.max_degeneracy_spread, t(1e-9)));
    let mut gram: f64 = 0.0;
    let mut hop: f64 = 0.0;
    for m in 0..=max_m {
        gram = gram.max(gram_deviation(&spectral.multi_cat_states(m)));
        hop = hop.max(spectral.hopping_diagonal_check(m));
    }
    checks.push(check("multicat_orthonormality", gram, t(1e-10)));
    checks.push(check("hopping_diagonal", hop, t(1e-9)));
    Ok(checks)
}

#[derive(Debug, Serialize)]
struct VerifyPoint {
    g: f64,
    pass: bool,
    checks: Vec<Check>,
}

fn cmd_verify(cfg: &RunConfig, models: &[ModelConfig], tol: Option<f64>, out: &Outputs) -> Result<bool> {
    let points = models
        .par_iter()
        .map(|model| {
            let checks = verify_checks(model, tol)?;
            Ok(VerifyPoint { g: model.g, pass: checks.iter().all(|c| c.pass), checks })
        })
        .collect::<Result<Vec<_>>>()?;
    for p in &points {
        for c in &p.checks {
            println!(
                "g={:<8} {:<26} {:>10.3e} <= {:<8.1e} {}",
                p.g,
                c.name,
                c.deviation,
                c.tol,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    let pass = points.iter().all(|p| p.pass);
    out.report(&Report { command: "verify", config: cfg, pass, points })?;
    Ok(pass)
}

// ---- rabi ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRow {
    pub g: f64,
    pub m: usize,
    pub r: usize,
    pub j: usize,
    pub j_prime: usize,
    /// Resonant `|D|`, `None` when the condition has no positive solution.
    pub delta_abs: Option<f64>,
    pub rabi_re: f64,
    pub rabi_im: f64,
    pub rabi_abs: f64,
    pub delta_over_g: Option<f64>,
    pub residual: Option<f64>,
}

/// One row per channel of `(m, r)`, in enumeration order. `R` is evaluated
/// at the resonant `|D|` when one exists, else at the configured `|D|`.
pub fn channel_rows(model: &ModelConfig, m: usize, r: usize) -> Result<Vec<ChannelRow>> {
    channel_enumerate(model.n, m, r)
        .into_iter()
        .map(|(jp, j)| {
            let sol = resonance_solve(model, m, r, j, jp)?;
            let at = sol.map(|s| s.cfg).unwrap_or(*model);
            let rabi = rabi_frequency(&at, m, r, j, jp)?;
            Ok(ChannelRow {
                g: model.g,
                m,
                r,
                j,
                j_prime: jp,
                delta_abs: sol.map(|s| s.delta_abs),
                rabi_re: rabi.re,
                rabi_im: rabi.im,
                rabi_abs: rabi.norm(),
                delta_over_g: sol.map(|s| s.ratio_to_g),
                residual: sol.map(|s| s.residual),
            })
        })
        .collect()
}

fn optional(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct RabiPoint {
    g: f64,
    channels: Vec<ChannelRow>,
}

fn cmd_rabi(cfg: &RunConfig, models: &[ModelConfig], tol: Option<f64>, out: &Outputs) -> Result<bool> {
    let (m, r) = (cfg.command.m, cfg.command.r);
    if m >= r {
        return Err(Error::Config(format!("rabi needs m < r, got m = {m}, r = {r}")));
    }
    let tol = tol.unwrap_or(1e-10);
    let points = models
        .par_iter()
        .map(|model| Ok(RabiPoint { g: model.g, channels: channel_rows(model, m, r)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("g,m,r,j,j_prime,delta_abs,rabi_re,rabi_im,rabi_abs,delta_over_g,residual\n");
    for row in points.iter().flat_map(|p| &p.channels) {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_number(row.g),
            row.m,
            row.r,
            row.j,
            row.j_prime,
            optional(row.delta_abs),
            csv_number(row.rabi_re),
            csv_number(row.rabi_im),
            csv_number(row.rabi_abs),
            optional(row.delta_over_g),
            optional(row.residual)
        )
        .expect("string write");
    }
    print!("{csv}");
    out.write("channels.csv", &csv)?;
    let pass = points.iter().flat_map(|p| &p.channels).all(|c| c.residual.is_none_or(|res| res.abs() <= tol));
    out.report(&Report { command: "rabi", config: cfg, pass, points })?;
    Ok(pass)
}

// ---- simulate ----

#[derive(Debug, Serialize)]
struct RunSummary {
    dynamics: Dynamics,
    substeps: usize,
    refinement_error: f64,
    norm_drift: f64,
    delta_over_g: f64,
    rabi_over_omega: f64,
    /// From crossings of `|a_{m,j}|^2 - 1/2`.
    extracted_frequency: Option<f64>,
    frequency_relative_error: Option<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct SimulatePoint {
    g: f64,
    delta_abs: f64,
    channel: ChannelSummary,
    norm_tol: f64,
    runs: Vec<RunSummary>,
}

#[derive(Debug, Serialize)]
struct ChannelSummary {
    m: usize,
    r: usize,
    j: usize,
    j_prime: usize,
    rabi_re: f64,
    rabi_im: f64,
    rabi_abs: f64,
    resonance_residual: f64,
}

fn cmd_simulate(cfg: &RunConfig, models: &[ModelConfig], tol: Option<f64>, svg: bool, out: &Outputs) -> Result<bool> {
    if models.len() != 1 {
        return Err(Error::Config("simulate takes a single g, not a sweep".into()));
    }
    let p = &cfg.command;
    let n = cfg.n;
    let (m, r, j) = (p.m, p.r, p.j);
    if m >= r {
        return Err(Error::Config(format!("simulate needs m < r, got m = {m}, r = {r}")));
    }
    if j >= n {
        return Err(Error::Config(format!("j = {j} out of range for n = {n}")));
    }
    let jp = p.j_prime.unwrap_or((j + n - (r - m) % n) % n);
    let mut model = models[0];
    if p.solve_resonance {
        model = resonance_solve(&model, m, r, j, jp)?
            .ok_or_else(|| Error::Config(format!("channel ({m},{j})-({r},{jp}) has no resonant |delta|")))?
            .cfg;
    }
    let channel = RabiChannel::new(&model, m, r, j, jp)?;
    let rabi_abs = channel.rabi.norm();
    let t_stop = match p.t_stop {
        Some(t) => t,
        None if rabi_abs > 0.0 => p.t_start + 2.0 * 2.0 * PI / rabi_abs,
        None => return Err(Error::Config("R = 0 for this channel; set command.t_stop".into())),
    };
    if p.t_steps == 0 || !(t_stop > p.t_start) {
        return Err(Error::Config("time grid needs t_steps > 0 and t_stop > t_start".into()));
    }
    if p.dynamics.is_empty() {
        return Err(Error::Config("command.dynamics is empty".into()));
    }
    let grid = linear_grid(p.t_start, t_stop, p.t_steps);
    let levels = p.levels.clone().unwrap_or(vec![m, r]);
    if !levels.contains(&m) || !levels.contains(&r) {
        return Err(Error::Config("levels must contain m and r".into()));
    }
    let opts = IntegratorOptions { tol: p.integrator_tol, ..Default::default() };
    let norm_tol = tol.unwrap_or(1e-8);

    let mut trajectories: Vec<(Dynamics, Trajectory)> = Vec::new();
    for &dyn_kind in &p.dynamics {
        let traj = match dyn_kind {
            Dynamics::Rwa | Dynamics::Reduced => {
                let mode = if dyn_kind == Dynamics::Rwa { ReducedMode::RwaOnly } else { ReducedMode::FullTerms };
                let pos = levels.iter().position(|&l| l == m).expect("checked");
                let mut a0 = crate::fock::StateVector::zeros(n * levels.len());
                a0[pos * n + j] = C64::new(1.0, 0.0);
                integrate_reduced(&model, &levels, &grid, &a0, mode, opts)?
            }
            Dynamics::Full => {
                let spectral = spectral_data(&model)?;
                if m >= spectral.energies.len() || r >= spectral.energies.len() {
                    return Err(Error::Config("levels exceed the field dimension".into()));
                }
                let psi0 = spectral.multi_cat_states(m)[j].clone();
                integrate_full(&model, &grid, &psi0, &levels, opts)?
            }
        };
        trajectories.push((dyn_kind, traj));
    }

    let mut runs = Vec::new();
    for (kind, traj) in &trajectories {
        let idx = traj.label_index(m, j).expect("label present");
        let freq = crossing_frequency(&traj.times, &traj.population(idx), 0.5);
        let rel = freq.filter(|_| rabi_abs > 0.0).map(|f| (f - rabi_abs).abs() / rabi_abs);
        let freq_ok = rabi_abs == 0.0 || rel.is_some_and(|e| e <= p.frequency_tol);
        runs.push(RunSummary {
            dynamics: *kind,
            substeps: traj.substeps,
            refinement_error: traj.refinement_error,
            norm_drift: traj.norm_drift,
            delta_over_g: traj.delta_over_g,
            rabi_over_omega: traj.rabi_over_omega,
            extracted_frequency: freq,
            frequency_relative_error: rel,
            pass: traj.norm_drift <= norm_tol && freq_ok,
        });
    }

    out.write("trajectory.csv", &trajectory_csv(&trajectories))?;
    if svg {
        let mut series = Vec::new();
        for (kind, traj) in &trajectories {
            for &(lm, lj) in &[(m, j), (r, jp)] {
                let idx = traj.label_index(lm, lj).expect("label present");
                series.push((format!("{} |a({lm},{lj})|^2", kind.name()), traj.population(idx)));
            }
        }
        out.write("plot.svg", &svg_plot(&grid, &series, "t", "population"))?;
    }
    let pass = runs.iter().all(|r| r.pass);
    for run in &runs {
        println!(
            "{:<8} norm drift {:.2e}, frequency {} vs |R| {:.6e}: {}",
            run.dynamics.name(),
            run.norm_drift,
            run.extracted_frequency.map_or("n/a".to_string(), |f| format!("{f:.6e}")),
            rabi_abs,
            if run.pass { "PASS" } else { "FAIL" }
        );
    }
    let point = SimulatePoint {
        g: model.g,
        delta_abs: model.delta_abs,
        channel: ChannelSummary {
            m,
            r,
            j,
            j_prime: jp,
            rabi_re: channel.rabi.re,
            rabi_im: channel.rabi.im,
            rabi_abs,
            resonance_residual: channel.resonance_residual,
        },
        norm_tol,
        runs,
    };
    out.report(&Report { command: "simulate", config: cfg, pass, points: vec![point] })?;
    Ok(pass)
}

/// `time`, then per run and label `re`/`im`, then populations, then the norm.
pub fn trajectory_csv(trajectories: &[(Dynamics, Trajectory)]) -> String {
    let mut csv = String::from("time");
    for (kind, traj) in trajectories {
        let k = kind.name();
        for &(m, j) in &traj.labels {
            write!(csv, ",{k}_re_a{m}_{j},{k}_im_a{m}_{j}").expect("string write");
        }
        for &(m, j) in &traj.labels {
            write!(csv, ",{k}_pop_{m}_{j}").expect("string write");
        }
        write!(csv, ",{k}_norm").expect("string write");
    }
    csv.push('\n');
    let times = &trajectories[0].1.times;
    for (i, t) in times.iter().enumerate() {
        csv.push_str(&csv_number(*t));
        for (_, traj) in trajectories {
            let a = &traj.amplitudes[i];
            for z in a.iter() {
                write!(csv, ",{},{}", csv_number(z.re), csv_number(z.im)).expect("string write");
            }
            for z in a.iter() {
                write!(csv, ",{}", csv_number(z.norm_sqr())).expect("string write");
            }
            write!(csv, ",{}", csv_number(a.iter().map(|z| z.norm_sqr()).sum())).expect("string write");
        }
        csv.push('\n');
    }
    csv
}

/// Static line plot with axes and a legend.
pub fn svg_plot(x: &[f64], series: &[(String, Vec<f64>)], x_label: &str, y_label: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 480.0;
    const L: f64 = 70.0;
    const R: f64 = 200.0;
    const T: f64 = 20.0;
    const B: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let finite = |v: &f64| v.is_finite();
    let (x0, x1) = minmax(x.iter().copied().filter(finite));
    let (mut y0, mut y1) = minmax(series.iter().flat_map(|s| s.1.iter().copied()).filter(finite));
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |v: f64| L + (v - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - L - R);
    let py = |v: f64| H - B - (v - y0) / (y1 - y0) * (H - T - B);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<path d="M{L} {T} V{} H{}" fill="none" stroke="black"/>"#, H - B, W - R).unwrap();
    for (v, anchor_x) in [(x0, px(x0)), (x1, px(x1))] {
        writeln!(
            s,
            r#"<text x="{anchor_x:.2}" y="{}" font-size="12" text-anchor="middle">{v:.4}</text>"#,
            H - B + 18.0
        )
        .unwrap();
    }
    for v in [y0, y1] {
        writeln!(s, r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{v:.4}</text>"#, L - 6.0, py(v) + 4.0)
            .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{x_label}</text>"#,
        (L + W - R) / 2.0,
        H - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        (T + H - B) / 2.0,
        (T + H - B) / 2.0
    )
    .unwrap();
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "))
            .unwrap();
        let ly = T + 16.0 + 18.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            W - R + 12.0,
            W - R + 36.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, W - R + 42.0, ly + 4.0, xml_escape(name))
            .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---- gates ----

#[derive(Debug, Serialize)]
struct GateRow {
    k: usize,
    l: usize,
    j: usize,
    j_prime: usize,
    rabi_re: f64,
    rabi_im: f64,
    t: f64,
    unitarity_defect: f64,
    /// Row-major `[re, im]` pairs of the `2n x 2n` matrix.
    matrix_2n: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize)]
struct SynthesisSummary {
    target: GateTarget,
    control: ControlWire,
    planted: Option<[usize; 2]>,
    max_depth: usize,
    beam_width: usize,
    seed: u64,
    fidelity: f64,
    choices: Vec<usize>,
    candidates: usize,
}

#[derive(Debug, Serialize)]
struct GatesPoint {
    g: f64,
    elementary_count: usize,
    enumerated: usize,
    max_unitarity_defect: f64,
    composed_unitarity_defect: f64,
    controlled_shift_power_defect: f64,
    tol: f64,
    pass: bool,
    elementary: Vec<GateRow>,
    synthesis: SynthesisSummary,
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

fn gates_point(model: &ModelConfig, p: &CommandParams, tol: f64) -> Result<GatesPoint> {
    let n = model.n;
    let levels = p.levels.clone().unwrap_or_else(|| (0..n).collect());
    let slots = generator_slots(n, &levels)?;
    let mut entries = Vec::with_capacity(slots.len());
    for &(k, l, jp, j) in &slots {
        let channel = RabiChannel::new(model, levels[k], levels[l], j, jp)?;
        let abs = channel.rabi.norm();
        let durations = match &p.durations {
            Some(d) => d.clone(),
            None if abs > 0.0 => p.period_fractions.iter().map(|f| f * 2.0 * PI / abs).collect(),
            None => vec![0.0],
        };
        if durations.is_empty() {
            return Err(Error::Config("gate durations are empty".into()));
        }
        entries.push(GateSetEntry { k, l, channel, durations });
    }
    let candidates = gate_set_candidates(n, &entries)?;
    let dim = n * n;
    let mut composed = CMatrix::identity(dim);
    let mut max_defect: f64 = 0.0;
    for c in &candidates {
        max_defect = max_defect.max(c.unitary.matrix_2n.unitarity_defect()).max(c.matrix.unitarity_defect());
        composed = &c.matrix * &composed;
    }
    let mut elementary = Vec::with_capacity(entries.len());
    for e in &entries {
        let t = e.durations[0];
        let u = elementary_unitary(n, e.channel, t)?;
        elementary.push(GateRow {
            k: e.k,
            l: e.l,
            j: e.channel.j,
            j_prime: e.channel.j_prime,
            rabi_re: e.channel.rabi.re,
            rabi_im: e.channel.rabi.im,
            t,
            unitarity_defect: u.matrix_2n.unitarity_defect(),
            matrix_2n: matrix_rows(&u.matrix_2n),
        });
    }
    let shift = controlled_shift_target(n, p.control);
    let shift_defect = shift.pow(n as u32).max_abs_diff(&CMatrix::identity(dim));
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (target, planted) = match p.target {
        GateTarget::ControlledShift => (shift, None),
        GateTarget::Planted => {
            let a = rng.gen_range(0..candidates.len());
            let b = rng.gen_range(0..candidates.len());
            (&candidates[b].matrix * &candidates[a].matrix, Some([a, b]))
        }
    };
    let result = synthesize(
        n,
        &target,
        &entries,
        SynthesisOptions { max_depth: p.max_depth, beam_width: p.beam_width, seed: p.seed },
    )?;
    let composed_defect = composed.unitarity_defect();
    let count = elementary_count(n);
    let pass = slots.len() == count && max_defect <= tol && composed_defect <= tol && shift_defect <= tol;
    Ok(GatesPoint {
        g: model.g,
        elementary_count: count,
        enumerated: slots.len(),
        max_unitarity_defect: max_defect,
        composed_unitarity_defect: composed_defect,
        controlled_shift_power_defect: shift_defect,
        tol,
        pass,
        elementary,
        synthesis: SynthesisSummary {
            target: p.target,
            control: p.control,
            planted,
            max_depth: p.max_depth,
            beam_width: p.beam_width,
            seed: p.seed,
            fidelity: result.fidelity,
            choices: result.choices,
            candidates: candidates.len(),
        },
    })
}

fn cmd_gates(cfg: &RunConfig, models: &[ModelConfig], tol: Option<f64>, out: &Outputs) -> Result<bool> {
    let tol = tol.unwrap_or(1e-10);
    let points = models.par_iter().map(|model| gates_point(model, &cfg.command, tol)).collect::<Result<Vec<_>>>()?;
    for p in &points {
        println!(
            "g={} count {} (enumerated {}), unitarity {:.2e}, synthesis fidelity {:.6}: {}",
            p.g,
            p.elementary_count,
            p.enumerated,
            p.max_unitarity_defect.max(p.composed_unitarity_defect),
            p.synthesis.fidelity,
            if p.pass { "PASS" } else { "FAIL" }
        );
    }
    let pass = points.iter().all(|p| p.pass);
    out.report(&Report { command: "gates", config: cfg, pass, points })?;
    Ok(pass)
}

//! Two-qudit gates built from resonant Rabi channels.
//!
//! The amplitude `a_{k,j}` is identified with `|k> (x) |j>`, level index
//! first: basis index `k * n + j` of the `n^2`-dimensional space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::CMatrix;
use crate::rwa::{rwa_two_level_matrix, RabiChannel};
use num_complex::Complex64 as C64;

/// `U(j, j'; t)` on the `2n` amplitudes `(a_{m,0..n}, a_{r,0..n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryUnitary {
    pub n: usize,
    pub channel: RabiChannel,
    pub t: f64,
    pub matrix_2n: CMatrix,
}

pub fn elementary_unitary(n: usize, channel: RabiChannel, t: f64) -> Result<ElementaryUnitary> {
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    for idx in [channel.j, channel.j_prime] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, max: n - 1 });
        }
    }
    if !t.is_finite() {
        return Err(Error::domain("gate duration must be finite"));
    }
    let block = rwa_two_level_matrix(channel.rabi, t);
    let mut matrix_2n = CMatrix::identity(2 * n);
    let idx = [channel.j, n + channel.j_prime];
    for (a, &row) in idx.iter().enumerate() {
        for (b, &col) in idx.iter().enumerate() {
            matrix_2n[(row, col)] = block[(a, b)];
        }
    }
    Ok(ElementaryUnitary { n, channel, t, matrix_2n })
}

/// Places the four `n x n` blocks of `u` at block positions `(k,k)`, `(k,l)`,
/// `(l,k)`, `(l,l)` of the `n^2` identity.
pub fn embed_block(n: usize, k: usize, l: usize, u: &ElementaryUnitary) -> Result<CMatrix> {
    if u.n != n {
        return Err(Error::dimension(format!("unitary built for n = {}, embedding for n = {n}", u.n)));
    }
    if k == l {
        return Err(Error::domain(format!("block positions must differ, got {k} twice")));
    }
    for idx in [k, l] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, max: n - 1 });
        }
    }
    let mut out = CMatrix::identity(n * n);
    let blocks = [k, l];
    for (bi, &br) in blocks.iter().enumerate() {
        for (bj, &bc) in blocks.iter().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    out[(br * n + a, bc * n + b)] = u.matrix_2n[(bi * n + a, bj * n + b)];
                }
            }
        }
    }
    Ok(out)
}

/// `n * C(n, 2)`.
pub fn elementary_count(n: usize) -> usize {
    n * n * n.saturating_sub(1) / 2
}

/// Every `(k, l, j', j)` generator slot for a full level set: level pairs
/// `k < l`, and for each the `n` channels of `channel_enumerate`.
pub fn generator_slots(n: usize, levels: &[usize]) -> Result<Vec<(usize, usize, usize, usize)>> {
    if levels.len() != n || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!("need {n} strictly ascending levels")));
    }
    let mut out = Vec::with_capacity(elementary_count(n));
    for k in 0..n {
        for l in k + 1..n {
            for (jp, j) in crate::rwa::channel_enumerate(n, levels[k], levels[l]) {
                out.push((k, l, jp, j));
            }
        }
    }
    Ok(out)
}

/// Which wire of the controlled shift carries the control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlWire {
    /// `|a>|b> -> (S^b |a>) |b>`.
    #[default]
    Lower,
    /// `|a>|b> -> |a> (S^a |b>)`.
    Upper,
}

/// Controlled cyclic shift on the two-qudit space, `S` the shift matrix.
pub fn controlled_shift_target(n: usize, control: ControlWire) -> CMatrix {
    let mut out = CMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let image = match control {
                ControlWire::Lower => ((a + b) % n) * n + b,
                ControlWire::Upper => a * n + (a + b) % n,
            };
            out[(image, a * n + b)] = C64::new(1.0, 0.0);
        }
    }
    out
}

/// `|tr(u^dagger v)| / dim`.
pub fn fidelity(u: &CMatrix, v: &CMatrix) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() || !u.is_square() {
        return Err(Error::dimension(format!("fidelity of {}x{} and {}x{}", u.rows(), u.cols(), v.rows(), v.cols())));
    }
    let tr: C64 = u.as_array().iter().zip(v.as_array().iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(tr.norm() / u.rows() as f64)
}

/// An elementary unitary embedded at block pair `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedGate {
    pub k: usize,
    pub l: usize,
    pub unitary: ElementaryUnitary,
    pub matrix: CMatrix,
}

impl EmbeddedGate {
    pub fn new(n: usize, k: usize, l: usize, unitary: ElementaryUnitary) -> Result<Self> {
        let matrix = embed_block(n, k, l, &unitary)?;
        Ok(EmbeddedGate { k, l, unitary, matrix })
    }
}

/// Gates applied in order; `product` is the last gate times ... times the first.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    pub gates: Vec<EmbeddedGate>,
    pub product: CMatrix,
}

impl GateSequence {
    pub fn new(dim: usize) -> Self {
        GateSequence { gates: Vec::new(), product: CMatrix::identity(dim) }
    }

    pub fn push(&mut self, gate: EmbeddedGate) -> Result<()> {
        if gate.matrix.rows() != self.product.rows() {
            return Err(Error::dimension("gate does not match sequence dimension"));
        }
        self.product = &gate.matrix * &self.product;
        self.gates.push(gate);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// One searchable generator: a channel at block pair `(k, l)` with the
/// allowed durations.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSetEntry {
    pub k: usize,
    pub l: usize,
    pub channel: RabiChannel,
    pub durations: Vec<f64>,
}

/// Expands a gate set into concrete embedded gates, in entry then duration order.
pub fn gate_set_candidates(n: usize, gate_set: &[GateSetEntry]) -> Result<Vec<EmbeddedGate>> {
    let mut out = Vec::new();
    for entry in gate_set {
        for &t in &entry.durations {
            out.push(EmbeddedGate::new(n, entry.k, entry.l, elementary_unitary(n, entry.channel, t)?)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub max_depth: usize,
    pub beam_width: usize,
    /// Seeds the tie-break between equal-fidelity branches.
    pub seed: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { max_depth: 3, beam_width: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub sequence: GateSequence,
    pub fidelity: f64,
    /// Index into the candidate list for each gate, in application order.
    pub choices: Vec<usize>,
}

struct Branch {
    product: CMatrix,
    choices: Vec<usize>,
    fidelity: f64,
}

/// Beam search over products of gate-set elements, best-effort.
///
/// Each depth extends every beam member by every candidate and keeps the
/// `beam_width` best. Ties in fidelity are broken by a key drawn from a
/// ChaCha stream seeded with `seed`, then by enumeration order.
pub fn synthesize(
    n: usize,
    target: &CMatrix,
    gate_set: &[GateSetEntry],
    opts: SynthesisOptions,
) -> Result<SynthesisResult> {
    let dim = n * n;
    if target.rows() != dim || target.cols() != dim {
        return Err(Error::dimension(format!("target must be {dim}x{dim}")));
    }
    let candidates = gate_set_candidates(n, gate_set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let identity = CMatrix::identity(dim);
    // the empty sequence only stands when nothing can be searched
    let mut best = Branch { fidelity: fidelity(target, &identity)?, product: identity.clone(), choices: Vec::new() };
    let mut beam = vec![Branch { product: identity, choices: Vec::new(), fidelity: best.fidelity }];
    for depth in 0..opts.max_depth {
        if candidates.is_empty() || (depth > 0 && best.fidelity >= 1.0 - 1e-14) {
            break;
        }
        let mut next: Vec<Branch> = beam
            .par_iter()
            .flat_map_iter(|branch| {
                candidates.iter().enumerate().map(move |(ci, gate)| {
                    let product = &gate.matrix * &branch.product;
                    let mut choices = branch.choices.clone();
                    choices.push(ci);
                    let f = fidelity(target, &product).expect("square, matching");
                    Branch { product, choices, fidelity: f }
                })
            })
            .collect();
        let keys: Vec<u64> = (0..next.len()).map(|_| rng.gen()).collect();
        let mut order: Vec<usize> = (0..next.len()).collect();
        order.sort_by(|&a, &b| {
            next[b].fidelity.total_cmp(&next[a].fidelity).then(keys[a].cmp(&keys[b])).then(a.cmp(&b))
        });
        order.truncate(opts.beam_width.max(1));
        let mut slots: Vec<Option<Branch>> = next.drain(..).map(Some).collect();
        beam = order.into_iter().map(|i| slots[i].take().expect("unique")).collect();
        if depth == 0 || beam[0].fidelity > best.fidelity {
            best = Branch {
                product: beam[0].product.clone(),
                choices: beam[0].choices.clone(),
                fidelity: beam[0].fidelity,
            };
        }
    }
    let mut sequence = GateSequence::new(dim);
    for &ci in &best.choices {
        sequence.push(candidates[ci].clone())?;
    }
    Ok(SynthesisResult { fidelity: best.fidelity, sequence, choices: best.choices })
}

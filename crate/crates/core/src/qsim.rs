//! Dense statevector simulation for the direction/position register pair.
//!
//! Amplitudes are stored densely. Qubit `i` addresses bit `n - 1 - i` of the
//! basis index, so qubit 0 is the most significant. The `q` register holds
//! qubits `0..q_qubits`, the `d` register the rest.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used for norm checks on states.
pub const NORM_TOL: f64 = 1e-12;

/// Probabilities below this make a post-selection fail.
pub const MIN_POSTSELECT_PROB: f64 = 1e-14;

/// Register structure: `q_qubits` direction qubits followed by `axes` blocks
/// of `axis_qubits` position qubits each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitLayout {
    pub q_qubits: usize,
    pub axis_qubits: usize,
    pub axes: usize,
}

impl QubitLayout {
    pub fn new(q_qubits: usize, axis_qubits: usize, axes: usize) -> Self {
        Self {
            q_qubits,
            axis_qubits,
            axes,
        }
    }

    pub fn d_qubits(&self) -> usize {
        self.axis_qubits * self.axes
    }

    pub fn total_qubits(&self) -> usize {
        self.q_qubits + self.d_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn d_dim(&self) -> usize {
        1 << self.d_qubits()
    }

    pub fn q_dim(&self) -> usize {
        1 << self.q_qubits
    }

    /// Bit mask of a qubit inside a basis index.
    pub fn mask(&self, qubit: usize) -> usize {
        1 << (self.total_qubits() - 1 - qubit)
    }

    /// Position block of one axis (0 = x, 1 = y).
    pub fn axis_block(&self, axis: usize) -> QubitBlock {
        QubitBlock {
            start: self.q_qubits + axis * self.axis_qubits,
            len: self.axis_qubits,
        }
    }

    pub fn q_block(&self) -> QubitBlock {
        QubitBlock {
            start: 0,
            len: self.q_qubits,
        }
    }

    pub fn d_block(&self) -> QubitBlock {
        QubitBlock {
            start: self.q_qubits,
            len: self.d_qubits(),
        }
    }
}

/// Contiguous run of qubits, `start` being the most significant one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitBlock {
    pub start: usize,
    pub len: usize,
}

impl QubitBlock {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn qubits(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    /// Qubit holding bit `bit` of the block value (bit 0 = least significant).
    pub fn qubit_of_bit(&self, bit: usize) -> usize {
        self.start + self.len - 1 - bit
    }

    fn shift_in(&self, total: usize) -> usize {
        total - self.start - self.len
    }

    fn value_mask(&self) -> usize {
        (1 << self.len) - 1
    }

    pub fn extract(&self, index: usize, total: usize) -> usize {
        (index >> self.shift_in(total)) & self.value_mask()
    }

    pub fn replace(&self, index: usize, value: usize, total: usize) -> usize {
        let s = self.shift_in(total);
        (index & !(self.value_mask() << s)) | ((value & self.value_mask()) << s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftDirection {
    /// `|k> -> |k + 1 mod 2^n>`
    Up,
    /// `|k> -> |k - 1 mod 2^n>`
    Down,
}

impl ShiftDirection {
    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Self::Up),
            -1 => Some(Self::Down),
            _ => None,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Self::Up => Self::Down,
            Self::Down => Self::Up,
        }
    }

    fn apply(self, k: usize, len: usize) -> usize {
        let m = 1usize << len;
        match self {
            Self::Up => (k + 1) % m,
            Self::Down => (k + m - 1) % m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X(usize),
    H(usize),
    Ry(usize, f64),
    Swap(usize, usize),
    /// Cyclic increment or decrement of a position block.
    Shift {
        block: QubitBlock,
        direction: ShiftDirection,
    },
    /// Diagonal unitary on a block; `entries[k]` multiplies block value `k`.
    Diagonal {
        block: QubitBlock,
        entries: Vec<Complex64>,
    },
}

impl Gate {
    fn targets(&self) -> Vec<usize> {
        match self {
            Gate::X(t) | Gate::H(t) | Gate::Ry(t, _) => vec![*t],
            Gate::Swap(a, b) => vec![*a, *b],
            Gate::Shift { block, .. } | Gate::Diagonal { block, .. } => block.qubits().collect(),
        }
    }
}

/// A control line: the gate fires when `qubit` reads `polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub polarity: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: true,
        }
    }

    pub fn off(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub gate: Gate,
    pub controls: Vec<Control>,
}

impl GateOp {
    pub fn new(gate: Gate) -> Self {
        Self {
            gate,
            controls: Vec::new(),
        }
    }

    pub fn controlled(gate: Gate, controls: Vec<Control>) -> Self {
        Self { gate, controls }
    }

    /// Controls expressed as a list of bit patterns: `(mask, wanted)`.
    fn control_pattern(&self, layout: &QubitLayout) -> (usize, usize) {
        self.controls.iter().fold((0, 0), |(mask, want), c| {
            let m = layout.mask(c.qubit);
            (mask | m, if c.polarity { want | m } else { want })
        })
    }

    pub fn validate(&self, layout: &QubitLayout) -> Result<()> {
        let total = layout.total_qubits();
        let targets = self.gate.targets();
        for &q in targets.iter().chain(self.controls.iter().map(|c| &c.qubit)) {
            if q >= total {
                return Err(Error::IndexOutOfRange { index: q, total });
            }
        }
        for (i, c) in self.controls.iter().enumerate() {
            if targets.contains(&c.qubit) {
                return Err(Error::InvalidGate(format!(
                    "control {} overlaps a target",
                    c.qubit
                )));
            }
            if self.controls[..i].iter().any(|o| o.qubit == c.qubit) {
                return Err(Error::InvalidGate(format!("duplicate control {}", c.qubit)));
            }
        }
        match &self.gate {
            Gate::Swap(a, b) if a == b => {
                Err(Error::InvalidGate("swap needs two distinct qubits".into()))
            }
            Gate::Shift { block, .. } if block.len == 0 => {
                Err(Error::InvalidGate("empty shift block".into()))
            }
            Gate::Diagonal { block, entries } => {
                if entries.len() != 1 << block.len {
                    return Err(Error::InvalidGate(format!(
                        "diagonal needs {} entries, got {}",
                        1 << block.len,
                        entries.len()
                    )));
                }
                if entries.iter().any(|e| (e.norm() - 1.0).abs() > 1e-12) {
                    return Err(Error::InvalidGate("diagonal entries must have modulus 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Ordered gate list over a fixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub layout: QubitLayout,
    pub ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(layout: QubitLayout) -> Self {
        Self {
            layout,
            ops: Vec::new(),
        }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn extend(&mut self, other: &Circuit) -> &mut Self {
        self.ops.extend(other.ops.iter().cloned());
        self
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Result of amplitude encoding.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub state: QState,
    pub l2_norm: f64,
    pub l1_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    amplitudes: Vec<Complex64>,
    layout: QubitLayout,
}

impl QState {
    /// `|0...0>` on the full layout.
    pub fn zero(layout: QubitLayout) -> Self {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: QubitLayout, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes, layout }
    }

    /// Wraps raw amplitudes, normalizing them to unit length.
    pub fn from_amplitudes(layout: QubitLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::LengthMismatch {
                expected: layout.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::EmptyField);
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self { amplitudes, layout })
    }

    /// Amplitude-encodes a nonnegative vector into the `d` register with `q`
    /// in `|0...0>`. Also reports the 2-norm and 1-norm of the input.
    pub fn encode_amplitudes(values: &[f64], layout: QubitLayout) -> Result<Encoded> {
        if values.len() != layout.d_dim() {
            return Err(Error::LengthMismatch {
                expected: layout.d_dim(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::NonEncodableField { index, value });
        }
        let l1_norm: f64 = values.iter().sum();
        let l2_norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if l2_norm == 0.0 {
            return Err(Error::EmptyField);
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
        for (a, v) in amplitudes.iter_mut().zip(values) {
            *a = Complex64::new(v / l2_norm, 0.0);
        }
        Ok(Encoded {
            state: Self { amplitudes, layout },
            l2_norm,
            l1_norm,
        })
    }

    pub fn layout(&self) -> QubitLayout {
        self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Amplitudes of the `d` register with `q` fixed to `q_value`.
    pub fn d_block(&self, q_value: usize) -> &[Complex64] {
        let d = self.layout.d_dim();
        &self.amplitudes[q_value * d..(q_value + 1) * d]
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(&self.layout)?;
        let layout = self.layout;
        let total = layout.total_qubits();
        let (cmask, cwant) = op.control_pattern(&layout);
        let fires = |i: usize| i & cmask == cwant;
        match &op.gate {
            Gate::X(t) => {
                let m = layout.mask(*t);
                for i in 0..self.amplitudes.len() {
                    if i & m == 0 && fires(i) {
                        self.amplitudes.swap(i, i | m);
                    }
                }
            }
            Gate::H(t) => {
                let h = [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]];
                self.apply_real_2x2(layout.mask(*t), h, fires);
            }
            Gate::Ry(t, theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.apply_real_2x2(layout.mask(*t), [[c, -s], [s, c]], fires);
            }
            Gate::Swap(a, b) => {
                let (ma, mb) = (layout.mask(*a), layout.mask(*b));
                for i in 0..self.amplitudes.len() {
                    if i & ma == 0 && i & mb != 0 && fires(i) {
                        self.amplitudes.swap(i, (i | ma) & !mb);
                    }
                }
            }
            Gate::Shift { block, direction } => {
                let mut out = self.amplitudes.clone();
                for (i, a) in self.amplitudes.iter().enumerate() {
                    if fires(i) {
                        let k = block.extract(i, total);
                        out[block.replace(i, direction.apply(k, block.len), total)] = *a;
                    }
                }
                self.amplitudes = out;
            }
            Gate::Diagonal { block, entries } => {
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if fires(i) {
                        *a *= entries[block.extract(i, total)];
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_real_2x2(&mut self, m: usize, u: [[f64; 2]; 2], fires: impl Fn(usize) -> bool) {
        for i in 0..self.amplitudes.len() {
            if i & m == 0 && fires(i) {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | m]);
                self.amplitudes[i] = a0 * u[0][0] + a1 * u[0][1];
                self.amplitudes[i | m] = a0 * u[1][0] + a1 * u[1][1];
            }
        }
    }

    pub fn run(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.layout != self.layout {
            return Err(Error::InvalidGate("circuit layout differs from state layout".into()));
        }
        circuit.ops.iter().try_for_each(|op| self.apply(op))
    }

    /// Projects the listed qubits onto `bits` and renormalizes.
    pub fn project(&self, qubits: &[usize], bits: &[bool]) -> Result<(f64, QState)> {
        if qubits.len() != bits.len() {
            return Err(Error::LengthMismatch {
                expected: qubits.len(),
                got: bits.len(),
            });
        }
        let total = self.layout.total_qubits();
        if let Some(&index) = qubits.iter().find(|&&q| q >= total) {
            return Err(Error::IndexOutOfRange { index, total });
        }
        let (mask, want) = qubits.iter().zip(bits).fold((0, 0), |(m, w), (&q, &b)| {
            let bit = self.layout.mask(q);
            (m | bit, if b { w | bit } else { w })
        });
        let probability: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if probability < MIN_POSTSELECT_PROB {
            return Err(Error::PostSelectionImpossible { probability });
        }
        let scale = probability.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & mask == want {
                    a / scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            probability,
            QState {
                amplitudes,
                layout: self.layout,
            },
        ))
    }

    /// Post-selects the whole `q` register on `q_value` (usually 0).
    pub fn project_q(&self, q_value: usize) -> Result<(f64, QState)> {
        let n = self.layout.q_qubits;
        let qubits: Vec<usize> = (0..n).collect();
        let bits: Vec<bool> = (0..n).map(|i| q_value >> (n - 1 - i) & 1 == 1).collect();
        self.project(&qubits, &bits)
    }

    /// Draws `shots` full-register measurements from the Born distribution.
    pub fn sample(&self, shots: u64, seed: u64) -> ShotHistogram {
        let probs = self.probabilities();
        ShotHistogram::multinomial(&probs, self.layout.total_qubits(), shots, seed)
    }
}

/// Measurement counts keyed by basis index over `n_bits` qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub n_bits: usize,
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotHistogram {
    /// Exact multinomial draw via sequential conditional binomials.
    pub fn multinomial(probs: &[f64], n_bits: usize, shots: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        let mut remaining = shots;
        let mut mass_left: f64 = probs.iter().sum();
        for (i, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let ratio = (p / mass_left).clamp(0.0, 1.0);
            let drawn = if ratio >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, ratio)
                    .expect("ratio is in [0, 1]")
                    .sample(&mut rng)
            };
            if drawn > 0 {
                counts.insert(i, drawn);
            }
            remaining -= drawn;
            mass_left -= p;
        }
        Self {
            n_bits,
            counts,
            shots,
            seed,
        }
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn bitstring(&self, index: usize) -> String {
        format!("{:0width$b}", index, width = self.n_bits)
    }

    /// Marginal over the lowest `bits` bits (e.g. the `d` register).
    pub fn marginal_low(&self, bits: usize) -> ShotHistogram {
        let mask = (1usize << bits) - 1;
        let mut counts = BTreeMap::new();
        for (&i, &c) in &self.counts {
            *counts.entry(i & mask).or_insert(0) += c;
        }
        Self {
            n_bits: bits,
            counts,
            shots: self.shots,
            seed: self.seed,
        }
    }

    /// Counts keyed by bitstring, for serialization.
    pub fn bitstring_counts(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&i, &c)| (self.bitstring(i), c))
            .collect()
    }
}

impl fmt::Display for ShotHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "shots={} seed={}", self.shots, self.seed)?;
        for (&i, &c) in &self.counts {
            writeln!(f, "{} {}", self.bitstring(i), c)?;
        }
        Ok(())
    }
}

/// Checks the multi-controlled-NOT lowering of a cyclic shift against the
/// permutation definition on every basis state.
pub fn shift_unitary_check(n_qubits: usize, direction: ShiftDirection) -> bool {
    if !(1..=8).contains(&n_qubits) {
        return false;
    }
    let layout = QubitLayout::new(0, n_qubits, 1);
    let block = layout.axis_block(0);
    let lowered = crate::analysis::lower_shift(block, direction, &[]);
    (0..layout.dim()).all(|k| {
        let mut state = QState::basis(layout, k);
        if lowered.iter().any(|op| state.apply(op).is_err()) {
            return false;
        }
        let expected = direction.apply(k, n_qubits);
        state
            .amplitudes()
            .iter()
            .enumerate()
            .all(|(i, a)| *a == Complex64::new(if i == expected { 1.0 } else { 0.0 }, 0.0))
    })
}

//! Gate-resource accounting and post-selection probability analysis.
//!
//! Resource counts follow the multi-controlled-NOT metric: an `n`-controlled
//! NOT costs `2n - 3` Toffoli gates for `n >= 2`, a CNOT or bare X costs none.
//! Negative controls are canonicalized to positive ones plus a pair of X
//! gates, which the metric treats as free.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::afqlbm;
use crate::lattice::Scheme;
use crate::qsim::{Circuit, Control, Gate, GateOp, QState, QubitBlock, QubitLayout, ShiftDirection};

/// Ripple-carry lowering of a cyclic shift into multi-controlled NOTs.
///
/// Bit `j` of the block flips when all lower bits are 1. Incrementing walks
/// from the most significant bit down; decrementing is the same list reversed.
pub fn lower_shift(block: QubitBlock, direction: ShiftDirection, controls: &[Control]) -> Vec<GateOp> {
    let gate_for_bit = |j: usize| {
        let mut c = controls.to_vec();
        c.extend((0..j).map(|i| Control::on(block.qubit_of_bit(i))));
        GateOp::controlled(Gate::X(block.qubit_of_bit(j)), c)
    };
    match direction {
        ShiftDirection::Up => (0..block.len).rev().map(gate_for_bit).collect(),
        ShiftDirection::Down => (0..block.len).map(gate_for_bit).collect(),
    }
}

/// Toffoli cost of one NOT with `controls` positive controls.
pub fn toffoli_cost(controls: usize) -> u64 {
    (2 * controls as u64).saturating_sub(3)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateInventory {
    /// Controlled NOTs keyed by control count (>= 1).
    pub mcx: BTreeMap<usize, u64>,
    /// Uncontrolled X gates, including canonicalization pairs.
    pub x: u64,
    pub h: u64,
    pub ry: u64,
    /// Controlled rotations keyed by control count.
    pub controlled_ry: BTreeMap<usize, u64>,
    pub swap: u64,
    pub diagonal: u64,
}

impl GateInventory {
    pub fn toffoli_total(&self) -> u64 {
        self.mcx.iter().map(|(&n, &c)| c * toffoli_cost(n)).sum()
    }

    fn add_not(&mut self, controls: usize) {
        if controls == 0 {
            self.x += 1;
        } else {
            *self.mcx.entry(controls).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &GateInventory) {
        for (&n, &c) in &other.mcx {
            *self.mcx.entry(n).or_insert(0) += c;
        }
        for (&n, &c) in &other.controlled_ry {
            *self.controlled_ry.entry(n).or_insert(0) += c;
        }
        self.x += other.x;
        self.h += other.h;
        self.ry += other.ry;
        self.swap += other.swap;
        self.diagonal += other.diagonal;
    }

    /// Rows of `kind,controls,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,controls,count\n");
        for (n, c) in &self.mcx {
            let _ = writeln!(out, "mcx,{n},{c}");
        }
        for (n, c) in &self.controlled_ry {
            let _ = writeln!(out, "cry,{n},{c}");
        }
        for (kind, c) in [
            ("x", self.x),
            ("h", self.h),
            ("ry", self.ry),
            ("swap", self.swap),
            ("diagonal", self.diagonal),
        ] {
            let _ = writeln!(out, "{kind},0,{c}");
        }
        let _ = writeln!(out, "toffoli,,{}", self.toffoli_total());
        out
    }
}

/// Canonicalized inventory of a circuit, shifts lowered to MCX form.
pub fn inventory(circuit: &Circuit) -> GateInventory {
    let mut inv = GateInventory::default();
    for op in &circuit.ops {
        let negative = op.controls.iter().filter(|c| !c.polarity).count() as u64;
        inv.x += 2 * negative;
        let n = op.controls.len();
        match &op.gate {
            Gate::X(_) => inv.add_not(n),
            Gate::Shift { block, direction } => {
                let positive: Vec<Control> = op.controls.iter().map(|c| Control::on(c.qubit)).collect();
                for lowered in lower_shift(*block, *direction, &positive) {
                    inv.add_not(lowered.controls.len());
                }
            }
            Gate::H(_) => inv.h += 1,
            Gate::Ry(..) if n == 0 => inv.ry += 1,
            Gate::Ry(..) => *inv.controlled_ry.entry(n).or_insert(0) += 1,
            Gate::Swap(..) => inv.swap += 1,
            Gate::Diagonal { .. } => inv.diagonal += 1,
        }
    }
    inv
}

/// Inventory of one shift on `n_qubits` with `extra_controls` direction
/// controls: control counts `extra, extra + 1, ..., extra + n - 1`.
pub fn decompose_shift(n_qubits: usize, direction: ShiftDirection, extra_controls: usize) -> GateInventory {
    let layout = QubitLayout::new(extra_controls, n_qubits, 1);
    let controls: Vec<Control> = (0..extra_controls).map(Control::on).collect();
    let mut circuit = Circuit::new(layout);
    circuit.ops = lower_shift(layout.axis_block(0), direction, &controls);
    inventory(&circuit)
}

fn log2(m: usize) -> u64 {
    assert!(m.is_power_of_two() && m >= 2, "M must be a power of two >= 2");
    m.trailing_zeros() as u64
}

/// Toffoli gates per loop, summed from the per-direction shift decompositions.
pub fn toffoli_count(scheme: Scheme, m: usize) -> u64 {
    let n = log2(m) as usize;
    scheme
        .velocities()
        .iter()
        .flat_map(|e| e.iter().filter(|c| **c != 0))
        .map(|&sign| {
            let dir = ShiftDirection::from_sign(sign).expect("unit lattice velocity");
            decompose_shift(n, dir, scheme.q_qubits()).toffoli_total()
        })
        .sum()
}

/// Closed forms: `4 log2(M)^2 + 8 log2(M)` for D2Q5, `2 log2(M)^2` for D1Q3.
pub fn toffoli_formula(scheme: Scheme, m: usize) -> u64 {
    let n = log2(m);
    match scheme {
        Scheme::D2Q5 => 4 * n * n + 8 * n,
        Scheme::D1Q3 => 2 * n * n,
    }
}

/// Toffoli count of the ancilla-based D2Q5 circuit: `4 log2(M)^2 + 16 log2(M)`.
pub fn prior_toffoli(m: usize) -> u64 {
    let n = log2(m);
    4 * n * n + 16 * n
}

/// Toffoli count of the streaming circuit actually emitted for `scheme`.
pub fn emitted_streaming_toffoli(scheme: Scheme, m: usize) -> u64 {
    let layout = afqlbm::layout_for(scheme, m);
    inventory(&afqlbm::build_streaming(scheme, layout)).toffoli_total()
}

/// Probability of reading `q = 0...0` once Hadamards hit the whole `q`
/// register, computed from the pre-summation amplitudes.
pub fn postselect_probability(state: &QState) -> f64 {
    let layout = state.layout();
    let mut summed = vec![Complex64::new(0.0, 0.0); layout.d_dim()];
    for q in 0..layout.q_dim() {
        for (s, a) in summed.iter_mut().zip(state.d_block(q)) {
            *s += a;
        }
    }
    summed.iter().map(|s| s.norm_sqr()).sum::<f64>() / layout.q_dim() as f64
}

/// Per-loop success probability bounds for nonnegative fields:
/// `[1, m] / 2^q` with `m` directions.
pub fn probability_bounds(scheme: Scheme) -> (f64, f64) {
    let q = (1u64 << scheme.q_qubits()) as f64;
    (1.0 / q, scheme.directions() as f64 / q)
}

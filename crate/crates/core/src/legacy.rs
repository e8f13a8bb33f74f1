//! Reconstruction of the ancilla-based D1Q2 QLBM step, kept as a baseline.
//!
//! Layout: qubit 0 is the ancilla, qubit 1 the direction (0 = +x, 1 = -x) and
//! the remaining qubits hold the position, most significant first. The work
//! register (direction + position) is the `d` register of the layout, so the
//! duplicated field `(phi, phi)` is amplitude encoded directly into it.
//!
//! The collision is a linear combination of the two diagonal unitaries
//! `A +- i sqrt(I - A^2)` selected by the Hadamard-sandwiched ancilla.
//! Summation swaps the ancilla with the direction qubit and applies a
//! Hadamard to the ancilla; post-selecting the ancilla on `|0>` leaves the
//! macroscopic block in the direction slot `0` next to a residual block in
//! slot `1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::lattice::{Geometry, MacroField, Scheme};
use crate::qsim::{Circuit, Control, Gate, GateOp, QState, QubitBlock, QubitLayout, ShiftDirection};
use crate::{Error, Result};

pub const ANCILLA: usize = 0;
pub const DIRECTION: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegacySpec {
    pub cells: usize,
    /// Effective weights of the `+x` and `-x` directions.
    pub w_hat: [f64; 2],
    pub initial: Vec<f64>,
}

impl LegacySpec {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 || !self.cells.is_power_of_two() {
            return Err(Error::InvalidSpec(format!(
                "cells must be a power of two >= 2, got {}",
                self.cells
            )));
        }
        if self.initial.len() != self.cells {
            return Err(Error::GeometryMismatch(format!(
                "{} initial values for {} cells",
                self.initial.len(),
                self.cells
            )));
        }
        if self.w_hat.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidSpec(format!(
                "weights {:?} must lie in [0, 1]",
                self.w_hat
            )));
        }
        if (self.w_hat[0] + self.w_hat[1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("weights must sum to 1".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> QubitLayout {
        QubitLayout::new(1, 1 + self.position_qubits(), 1)
    }

    fn position_qubits(&self) -> usize {
        self.cells.trailing_zeros() as usize
    }

    pub fn position_block(&self) -> QubitBlock {
        QubitBlock::new(2, self.position_qubits())
    }

    fn work_block(&self) -> QubitBlock {
        QubitBlock::new(1, 1 + self.position_qubits())
    }
}

/// `(H x I)(|0><0| x C1 + |1><1| x C2)(H x I)`.
pub fn build_lcu_collision(spec: &LegacySpec) -> Result<Circuit> {
    spec.validate()?;
    let m = spec.cells;
    let diag = |sign: f64| -> Vec<Complex64> {
        (0..2 * m)
            .map(|k| {
                let a = spec.w_hat[k / m];
                Complex64::new(a, sign * (1.0 - a * a).max(0.0).sqrt())
            })
            .collect()
    };
    let block = spec.work_block();
    let mut c = Circuit::new(spec.layout());
    c.push(GateOp::new(Gate::H(ANCILLA)));
    c.push(GateOp::controlled(
        Gate::Diagonal {
            block,
            entries: diag(1.0),
        },
        vec![Control::off(ANCILLA)],
    ));
    c.push(GateOp::controlled(
        Gate::Diagonal {
            block,
            entries: diag(-1.0),
        },
        vec![Control::on(ANCILLA)],
    ));
    c.push(GateOp::new(Gate::H(ANCILLA)));
    Ok(c)
}

/// `R` on the `+x` block and `L` on the `-x` block of the ancilla-0 branch.
pub fn build_legacy_streaming(spec: &LegacySpec) -> Circuit {
    let block = spec.position_block();
    let mut c = Circuit::new(spec.layout());
    for (polarity, direction) in [(false, ShiftDirection::Up), (true, ShiftDirection::Down)] {
        c.push(GateOp::controlled(
            Gate::Shift { block, direction },
            vec![
                Control::off(ANCILLA),
                Control {
                    qubit: DIRECTION,
                    polarity,
                },
            ],
        ));
    }
    c
}

pub fn build_legacy_summation(spec: &LegacySpec) -> Circuit {
    let mut c = Circuit::new(spec.layout());
    c.push(GateOp::new(Gate::Swap(ANCILLA, DIRECTION)));
    c.push(GateOp::new(Gate::H(ANCILLA)));
    c
}

#[derive(Debug, Clone)]
pub struct LegacyStep {
    pub field: MacroField,
    /// Probability of the ancilla reading `|0>`.
    pub probability: f64,
    /// Ancilla-0 work amplitudes rescaled by `2 |phi|_2`; the slot-0 block is
    /// the next field, the slot-1 block is residue.
    pub rescaled: Vec<Complex64>,
    /// State just before post-selection.
    pub pre_selection: QState,
    /// Renormalized post-selected state.
    pub post_selected: QState,
}

pub fn run_legacy_step(spec: &LegacySpec) -> Result<LegacyStep> {
    spec.validate()?;
    let m = spec.cells;
    let duplicated: Vec<f64> = spec.initial.iter().chain(&spec.initial).copied().collect();
    let encoded = QState::encode_amplitudes(&duplicated, spec.layout())?;
    let mut state = encoded.state;
    state.run(&build_lcu_collision(spec)?)?;
    state.run(&build_legacy_streaming(spec))?;
    state.run(&build_legacy_summation(spec))?;
    let (probability, post_selected) = state.project(&[ANCILLA], &[false])?;
    // |Phi| = sqrt2 |phi|, so the rescaling 2 |Phi| / sqrt2 is 2 |phi|.
    let scale = 2.0 * encoded.l2_norm / 2f64.sqrt();
    let rescaled: Vec<Complex64> = state.d_block(0).iter().map(|a| a * scale).collect();
    let field = MacroField::new(rescaled[..m].iter().map(|a| a.re).collect(), Geometry::Line(m))?;
    Ok(LegacyStep {
        field,
        probability,
        rescaled,
        pre_selection: state,
        post_selected,
    })
}

/// Squared overlap between the post-selected work register, reused as is,
/// and the duplicated encoding that a second legacy step would need.
pub fn reuse_fidelity(step: &LegacyStep, spec: &LegacySpec) -> Result<f64> {
    let f = &step.field.phi;
    let duplicated: Vec<f64> = f.iter().chain(f).copied().collect();
    let wanted = QState::encode_amplitudes(&duplicated, spec.layout())?.state;
    let overlap: Complex64 = step
        .post_selected
        .amplitudes()
        .iter()
        .zip(wanted.amplitudes())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(overlap.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub m: usize,
    pub legacy_qubits: usize,
    pub afqlbm_qubits: usize,
    pub legacy_toffoli: u64,
    pub afqlbm_toffoli: u64,
    pub toffoli_saving: u64,
}

/// D2Q5 resource comparison on an `M x M` lattice.
pub fn compare_overhead(m: usize) -> OverheadReport {
    let afqlbm_qubits = Scheme::D2Q5.q_qubits() + 2 * m.trailing_zeros() as usize;
    let legacy_toffoli = analysis::prior_toffoli(m);
    let afqlbm_toffoli = analysis::toffoli_formula(Scheme::D2Q5, m);
    OverheadReport {
        m,
        legacy_qubits: afqlbm_qubits + 1,
        afqlbm_qubits,
        legacy_toffoli,
        afqlbm_toffoli,
        toffoli_saving: legacy_toffoli - afqlbm_toffoli,
    }
}

//! Ancilla-free QLBM circuits and the post-selected loop driver.
//!
//! One loop is: local-unitary collision on `q`, streaming controlled by the
//! direction labels, Hadamards on `q`, then post-selection of `q = 0...0`.
//! The surviving `d` amplitudes are proportional to the classical field after
//! one more BGK cycle at `omega = 1`, and they feed the next loop directly.
//!
//! Direction labels (most significant bit first):
//!
//! | scheme | rest  | +x    | -x    | +y    | -y    |
//! |--------|-------|-------|-------|-------|-------|
//! | D1Q3   | `00`  | `10`  | `11`  |       |       |
//! | D2Q5   | `000` | `100` | `101` | `110` | `111` |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::lattice::{effective_weights, DirectionWeights, MacroField, ModelSpec, Scheme};
use crate::qsim::{Circuit, Control, Gate, GateOp, QState, QubitLayout, ShiftDirection, ShotHistogram};
use crate::{Error, Result};

/// Register layout for `scheme` on `m` cells per axis.
pub fn layout_for(scheme: Scheme, m: usize) -> QubitLayout {
    QubitLayout::new(scheme.q_qubits(), m.trailing_zeros() as usize, scheme.dims())
}

/// `q` basis value labelling direction `alpha`.
pub fn direction_label(scheme: Scheme, alpha: usize) -> usize {
    match scheme {
        Scheme::D1Q3 => [0b00, 0b10, 0b11][alpha],
        Scheme::D2Q5 => [0b000, 0b100, 0b101, 0b110, 0b111][alpha],
    }
}

fn scheme_for_directions(n: usize) -> Result<Scheme> {
    match n {
        3 => Ok(Scheme::D1Q3),
        5 => Ok(Scheme::D2Q5),
        _ => Err(Error::InvalidSpec(format!("no scheme with {n} directions"))),
    }
}

/// Rotation angles of the collision unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionAngles(pub Vec<f64>);

/// `2 arccos(num / den)`, with an empty subtree mapped to no rotation.
fn rotation(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        2.0 * (num / den).clamp(0.0, 1.0).acos()
    }
}

pub fn collision_angles(weights: &DirectionWeights) -> Result<CollisionAngles> {
    let w = &weights.w_hat;
    let scheme = scheme_for_directions(w.len())?;
    if let Some((direction, &value)) = w.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(Error::AdvectionTooStrong { direction, value });
    }
    let norm = |ws: &[f64]| ws.iter().map(|v| v * v).sum::<f64>().sqrt();
    let total = norm(w);
    if total == 0.0 {
        return Err(Error::ZeroWeights);
    }
    let angles = match scheme {
        Scheme::D1Q3 => vec![rotation(w[0], total), rotation(w[1], norm(&w[1..3]))],
        Scheme::D2Q5 => vec![
            rotation(w[0], total),
            rotation(norm(&w[1..3]), norm(&w[1..5])),
            rotation(w[1], norm(&w[1..3])),
            rotation(w[3], norm(&w[3..5])),
        ],
    };
    Ok(CollisionAngles(angles))
}

/// Rotations taking `q = 0...0` to `sum_a w_hat_a |label_a> / |w_hat|`.
pub fn build_collision(weights: &DirectionWeights, layout: QubitLayout) -> Result<Circuit> {
    let scheme = scheme_for_directions(weights.w_hat.len())?;
    if layout.q_qubits != scheme.q_qubits() {
        return Err(Error::InvalidSpec(format!(
            "{scheme} needs {} direction qubits, layout has {}",
            scheme.q_qubits(),
            layout.q_qubits
        )));
    }
    let a = collision_angles(weights)?.0;
    let mut circuit = Circuit::new(layout);
    circuit.push(GateOp::new(Gate::Ry(0, a[0])));
    circuit.push(GateOp::controlled(Gate::Ry(1, a[1]), vec![Control::on(0)]));
    if scheme == Scheme::D2Q5 {
        circuit.push(GateOp::controlled(
            Gate::Ry(2, a[2]),
            vec![Control::on(0), Control::off(1)],
        ));
        circuit.push(GateOp::controlled(
            Gate::Ry(2, a[3]),
            vec![Control::on(0), Control::on(1)],
        ));
    }
    Ok(circuit)
}

/// Shifts of the position blocks, each controlled on one direction label.
pub fn build_streaming(scheme: Scheme, layout: QubitLayout) -> Circuit {
    let q = scheme.q_qubits();
    let mut circuit = Circuit::new(layout);
    for (alpha, e) in scheme.velocities().iter().enumerate() {
        let Some(axis) = e.iter().position(|c| *c != 0) else {
            continue;
        };
        let label = direction_label(scheme, alpha);
        let controls = (0..q)
            .map(|i| Control {
                qubit: i,
                polarity: label >> (q - 1 - i) & 1 == 1,
            })
            .collect();
        let direction = ShiftDirection::from_sign(e[axis]).expect("unit lattice velocity");
        circuit.push(GateOp::controlled(
            Gate::Shift {
                block: layout.axis_block(axis),
                direction,
            },
            controls,
        ));
    }
    circuit
}

/// Hadamard on every direction qubit.
pub fn build_summation(scheme: Scheme, layout: QubitLayout) -> Circuit {
    let mut circuit = Circuit::new(layout);
    for i in 0..scheme.q_qubits() {
        circuit.push(GateOp::new(Gate::H(i)));
    }
    circuit
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub state: QState,
    pub loop_index: usize,
    /// 1-norm of the encoded field (of the difference field in difference mode).
    pub initial_l1: f64,
    pub cumulative_postselect_prob: f64,
    /// Uniform offset removed before encoding, in difference mode.
    pub baseline: Option<f64>,
    pub postselect_probs: Vec<f64>,
}

/// Circuits for one loop, built once per model.
#[derive(Debug, Clone)]
pub struct Afqlbm {
    spec: ModelSpec,
    weights: DirectionWeights,
    layout: QubitLayout,
    collision: Circuit,
    streaming: Circuit,
    summation: Circuit,
}

impl Afqlbm {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.omega != 1.0 {
            return Err(Error::UnsupportedOmega(spec.omega));
        }
        let weights = effective_weights(spec)?;
        let layout = layout_for(spec.scheme, spec.cells_per_axis);
        Ok(Self {
            collision: build_collision(&weights, layout)?,
            streaming: build_streaming(spec.scheme, layout),
            summation: build_summation(spec.scheme, layout),
            spec: spec.clone(),
            weights,
            layout,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &DirectionWeights {
        &self.weights
    }

    pub fn layout(&self) -> QubitLayout {
        self.layout
    }

    pub fn collision(&self) -> &Circuit {
        &self.collision
    }

    pub fn streaming(&self) -> &Circuit {
        &self.streaming
    }

    pub fn summation(&self) -> &Circuit {
        &self.summation
    }

    /// Full gate list of one loop, before measurement.
    pub fn loop_circuit(&self) -> Circuit {
        let mut c = self.collision.clone();
        c.extend(&self.streaming).extend(&self.summation);
        c
    }

    /// Encodes `field`, or `field - min(field)` in difference mode.
    pub fn encode_initial(&self, field: &MacroField, difference_mode: bool) -> Result<LoopState> {
        if field.geometry != self.spec.geometry() {
            return Err(Error::GeometryMismatch(format!(
                "field is {:?}, model is {:?}",
                field.geometry,
                self.spec.geometry()
            )));
        }
        let (values, baseline) = if difference_mode {
            let base = field.min();
            let delta: Vec<f64> = field.phi.iter().map(|v| v - base).collect();
            if delta.iter().all(|d| *d == 0.0) {
                return Err(Error::DegenerateDifference);
            }
            (delta, Some(base))
        } else {
            (field.phi.clone(), None)
        };
        let encoded = QState::encode_amplitudes(&values, self.layout)?;
        Ok(LoopState {
            state: encoded.state,
            loop_index: 0,
            initial_l1: encoded.l1_norm,
            cumulative_postselect_prob: 1.0,
            baseline,
            postselect_probs: Vec::new(),
        })
    }

    /// State after collision and streaming, before the Hadamards.
    pub fn pre_summation(&self, state: &QState) -> Result<QState> {
        let mut s = state.clone();
        s.run(&self.collision)?;
        s.run(&self.streaming)?;
        Ok(s)
    }

    pub fn run_loop_exact(&self, ls: LoopState) -> Result<LoopState> {
        let mut s = self.pre_summation(&ls.state)?;
        s.run(&self.summation)?;
        let (p, state) = s.project_q(0)?;
        let mut postselect_probs = ls.postselect_probs;
        postselect_probs.push(p);
        Ok(LoopState {
            state,
            loop_index: ls.loop_index + 1,
            initial_l1: ls.initial_l1,
            cumulative_postselect_prob: ls.cumulative_postselect_prob * p,
            baseline: ls.baseline,
            postselect_probs,
        })
    }

    pub fn run_exact(&self, field: &MacroField, loops: usize, difference_mode: bool) -> Result<LoopState> {
        let mut ls = self.encode_initial(field, difference_mode)?;
        for _ in 0..loops {
            ls = self.run_loop_exact(ls)?;
        }
        Ok(ls)
    }

    /// Tracks the post-selected branch exactly for `loops` loops, then
    /// samples the `d` register `shots` times.
    pub fn run_sampled(
        &self,
        field: &MacroField,
        loops: usize,
        shots: u64,
        seed: u64,
        difference_mode: bool,
    ) -> Result<SampledRun> {
        if loops == 0 || shots == 0 {
            return Err(Error::InvalidSpec("sampled runs need loops >= 1 and shots >= 1".into()));
        }
        let final_state = self.run_exact(field, loops, difference_mode)?;
        let histogram = final_state
            .state
            .sample(shots, seed)
            .marginal_low(self.layout.d_qubits());
        Ok(SampledRun {
            histogram,
            final_state,
        })
    }

    /// Hardware-style run: every shot measures `q` after each loop and is
    /// discarded unless all readings are `0...0`.
    pub fn run_rejection_sampled(
        &self,
        field: &MacroField,
        loops: usize,
        shots: u64,
        seed: u64,
        difference_mode: bool,
    ) -> Result<RejectionRun> {
        let final_state = self.run_exact(field, loops, difference_mode)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut survivors = shots;
        for &p in &final_state.postselect_probs {
            if survivors == 0 {
                break;
            }
            survivors = Binomial::new(survivors, p.clamp(0.0, 1.0))
                .expect("probability in [0, 1]")
                .sample(&mut rng);
        }
        let histogram = final_state
            .state
            .sample(survivors, rng.random())
            .marginal_low(self.layout.d_qubits());
        Ok(RejectionRun {
            histogram,
            attempted: shots,
            accepted: survivors,
            final_state,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SampledRun {
    /// Counts keyed by `d` register value.
    pub histogram: ShotHistogram,
    pub final_state: LoopState,
}

#[derive(Debug, Clone)]
pub struct RejectionRun {
    pub histogram: ShotHistogram,
    pub attempted: u64,
    pub accepted: u64,
    pub final_state: LoopState,
}

/// One loop for a bare spec; rebuilds the circuits each call.
pub fn run_loop_exact(ls: LoopState, spec: &ModelSpec) -> Result<LoopState> {
    Afqlbm::new(spec)?.run_loop_exact(ls)
}

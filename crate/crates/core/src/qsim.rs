//! Exact single-qubit statevector simulation.
//!
//! Rotation convention: `R_a(t) = exp(-i t/2 * sigma_a)`, so
//! `Ry(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]`. With this convention
//! the circuit `H` then `Ry(t)` applied to `|0>` has `<Z> = -sin t`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use rand::Rng;

use crate::{rng, Error, Result};

type Matrix = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    pub const ZERO: QubitState = QubitState {
        amp0: Complex64::new(1.0, 0.0),
        amp1: Complex64::new(0.0, 0.0),
    };

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    fn apply(self, m: &Matrix) -> QubitState {
        QubitState {
            amp0: m[0][0] * self.amp0 + m[0][1] * self.amp1,
            amp1: m[1][0] * self.amp0 + m[1][1] * self.amp1,
        }
    }
}

impl Default for QubitState {
    fn default() -> Self {
        QubitState::ZERO
    }
}

/// A gate angle, either fixed or bound to a free circuit parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Slot(usize),
}

impl Angle {
    fn resolve(self, bindings: &[f64]) -> Result<f64> {
        match self {
            Angle::Fixed(a) => Ok(a),
            Angle::Slot(i) => bindings.get(i).copied().ok_or(Error::Arity {
                what: "circuit bindings",
                expected: i + 1,
                actual: bindings.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Hadamard,
    Rx(Angle),
    Ry(Angle),
    Rz(Angle),
}

impl Gate {
    pub fn angle(&self) -> Option<Angle> {
        match *self {
            Gate::Hadamard => None,
            Gate::Rx(a) | Gate::Ry(a) | Gate::Rz(a) => Some(a),
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match self.angle() {
            Some(Angle::Slot(i)) => Some(i),
            _ => None,
        }
    }

    /// The gate's unitary with any parameter slot resolved from `bindings`.
    pub fn matrix(&self, bindings: &[f64]) -> Result<Matrix> {
        let zero = Complex64::new(0.0, 0.0);
        let real = |x: f64| Complex64::new(x, 0.0);
        let half = |a: Angle| {
            a.resolve(bindings)
                .map(|t| (libm::cos(t / 2.0), libm::sin(t / 2.0)))
        };
        Ok(match *self {
            Gate::Hadamard => {
                let h = real(FRAC_1_SQRT_2);
                [[h, h], [h, -h]]
            }
            Gate::Rx(a) => {
                let (c, s) = half(a)?;
                let mis = Complex64::new(0.0, -s);
                [[real(c), mis], [mis, real(c)]]
            }
            Gate::Ry(a) => {
                let (c, s) = half(a)?;
                [[real(c), real(-s)], [real(s), real(c)]]
            }
            Gate::Rz(a) => {
                let (c, s) = half(a)?;
                [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]]
            }
        })
    }
}

/// Applies one gate. Fixed-angle gates ignore `bindings`.
pub fn apply_gate(state: QubitState, gate: &Gate, bindings: &[f64]) -> Result<QubitState> {
    Ok(state.apply(&gate.matrix(bindings)?))
}

/// An ordered single-qubit gate list whose parameter slots are dense.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    gates: Vec<Gate>,
    parameter_count: usize,
}

impl Circuit {
    pub fn new(gates: Vec<Gate>) -> Result<Circuit> {
        let parameter_count = gates
            .iter()
            .filter_map(Gate::slot)
            .max()
            .map_or(0, |m| m + 1);
        for slot in 0..parameter_count {
            if !gates.iter().any(|g| g.slot() == Some(slot)) {
                return Err(Error::Contract(alloc::format!(
                    "parameter slots must be dense, slot {slot} is unused"
                )));
            }
        }
        Ok(Circuit {
            gates,
            parameter_count,
        })
    }

    /// Hadamard followed by `Ry` on free parameter 0.
    pub fn hadamard_ry() -> Circuit {
        Circuit {
            gates: alloc::vec![Gate::Hadamard, Gate::Ry(Angle::Slot(0))],
            parameter_count: 1,
        }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_count
    }
}

/// Runs `circuit` from `|0>`.
pub fn run_circuit(circuit: &Circuit, bindings: &[f64]) -> Result<QubitState> {
    if bindings.len() != circuit.parameter_count {
        return Err(Error::Arity {
            what: "circuit bindings",
            expected: circuit.parameter_count,
            actual: bindings.len(),
        });
    }
    circuit
        .gates
        .iter()
        .try_fold(QubitState::ZERO, |s, g| apply_gate(s, g, bindings))
}

/// Measured quantities. Both are expectation values of Hermitian operators
/// that are affine in `Z`: `P1 = (I - Z) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    PauliZ,
    /// Projector onto `|1>`, whose expectation is the probability of reading 1.
    ProjectorOne,
}

pub fn expectation_z(state: &QubitState) -> f64 {
    state.amp0.norm_sqr() - state.amp1.norm_sqr()
}

pub fn prob_one(state: &QubitState) -> f64 {
    state.amp1.norm_sqr()
}

pub fn prob_zero(state: &QubitState) -> f64 {
    1.0 - prob_one(state)
}

pub fn expectation(state: &QubitState, observable: Observable) -> f64 {
    match observable {
        Observable::PauliZ => expectation_z(state),
        Observable::ProjectorOne => prob_one(state),
    }
}

/// Computational-basis measurement repeated `shots` times; returns the
/// counts of 0 and 1 outcomes.
pub fn sample_shots(state: &QubitState, shots: u64, seed: u64) -> Result<(u64, u64)> {
    if shots == 0 {
        return Err(Error::Contract("shot count must be positive".into()));
    }
    let p1 = prob_one(state);
    let mut r = rng::stream(seed, &[]);
    let ones = (0..shots).filter(|_| r.random::<f64>() < p1).count() as u64;
    Ok((shots - ones, ones))
}

/// Shot-based estimate of an observable's expectation.
pub fn sampled_expectation(
    state: &QubitState,
    observable: Observable,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    let (n0, n1) = sample_shots(state, shots, seed)?;
    Ok(match observable {
        Observable::PauliZ => (n0 as f64 - n1 as f64) / shots as f64,
        Observable::ProjectorOne => n1 as f64 / shots as f64,
    })
}

/// Sum over the gates bound to `slot` of `(E(+pi/2) - E(-pi/2)) / 2`, where
/// only that one gate's angle is shifted. Exact for rotation gates.
fn shift_rule(
    circuit: &Circuit,
    bindings: &[f64],
    slot: usize,
    mut estimate: impl FnMut(&QubitState, usize, bool) -> Result<f64>,
) -> Result<f64> {
    if slot >= circuit.parameter_count {
        return Err(Error::Arity {
            what: "parameter slot",
            expected: circuit.parameter_count,
            actual: slot + 1,
        });
    }
    if bindings.len() != circuit.parameter_count {
        return Err(Error::Arity {
            what: "circuit bindings",
            expected: circuit.parameter_count,
            actual: bindings.len(),
        });
    }
    let mut grad = 0.0;
    for (target, gate) in circuit.gates.iter().enumerate() {
        if gate.slot() != Some(slot) {
            continue;
        }
        let mut diff = 0.0;
        for (sign, up) in [(1.0, true), (-1.0, false)] {
            let angle = Angle::Fixed(bindings[slot] + sign * FRAC_PI_2);
            let shifted = match gate {
                Gate::Rx(_) => Gate::Rx(angle),
                Gate::Ry(_) => Gate::Ry(angle),
                Gate::Rz(_) => Gate::Rz(angle),
                Gate::Hadamard => return Err(Error::UnsupportedGate("Hadamard has no parameter")),
            };
            let mut state = QubitState::ZERO;
            for (i, g) in circuit.gates.iter().enumerate() {
                let g = if i == target { &shifted } else { g };
                state = apply_gate(state, g, bindings)?;
            }
            diff += sign * estimate(&state, target, up)?;
        }
        grad += diff / 2.0;
    }
    Ok(grad)
}

/// Exact parameter-shift derivative of `<observable>` with respect to the
/// parameter in `slot`.
pub fn param_shift_grad(
    circuit: &Circuit,
    bindings: &[f64],
    slot: usize,
    observable: Observable,
) -> Result<f64> {
    shift_rule(circuit, bindings, slot, |s, _, _| {
        Ok(expectation(s, observable))
    })
}

/// Parameter shift with each shifted expectation estimated from `shots`
/// samples. Seeds for the individual estimates are derived from `seed`.
pub fn param_shift_grad_sampled(
    circuit: &Circuit,
    bindings: &[f64],
    slot: usize,
    observable: Observable,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    shift_rule(circuit, bindings, slot, |s, gate, up| {
        sampled_expectation(
            s,
            observable,
            shots,
            rng::derive_seed(seed, &[gate as u64, up as u64]),
        )
    })
}

//! Parameter-shift differentiation of Pauli-rotation circuits.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::gates::{pauli_rotation, Pauli};
use super::state::StateVector;
use crate::error::{Error, Result};

/// How the two shifted evaluations are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ShiftRule {
    /// `(f(θ+s) - f(θ-s)) / (2 sin s)`, exact for `exp(-iθ/2 P)`.
    #[default]
    Difference,
    /// Wrong-sign variant `(f(θ+s) + f(θ-s)) / (2 sin s)`. Only useful for
    /// checking that the gradient checker catches a broken rule.
    Sum,
}

impl ShiftRule {
    pub fn combine(self, plus: f64, minus: f64, shift: f64) -> f64 {
        let denom = 2.0 * shift.sin();
        match self {
            ShiftRule::Difference => (plus - minus) / denom,
            ShiftRule::Sum => (plus + minus) / denom,
        }
    }
}

/// One rotation `exp(-i params[param]/2 P)` on `targets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliGate {
    pub word: Vec<Pauli>,
    pub targets: Vec<usize>,
    pub param: usize,
}

/// Sequence of Pauli rotations; several gates may share a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliCircuit {
    pub num_qubits: usize,
    pub num_params: usize,
    pub gates: Vec<PauliGate>,
}

impl PauliCircuit {
    pub fn validate(&self) -> Result<()> {
        for (g, gate) in self.gates.iter().enumerate() {
            if gate.word.len() != gate.targets.len() || gate.word.is_empty() {
                return Err(Error::InvalidArgument(format!("gate {g}: word and targets differ in length")));
            }
            if gate.param >= self.num_params {
                return Err(Error::InvalidArgument(format!("gate {g}: parameter {} out of range", gate.param)));
            }
            for (i, &t) in gate.targets.iter().enumerate() {
                if t >= self.num_qubits || gate.targets[..i].contains(&t) {
                    return Err(Error::InvalidArgument(format!("gate {g}: bad target {t}")));
                }
            }
        }
        Ok(())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        self.validate()?;
        if params.len() != self.num_params {
            return Err(Error::Dimension(format!("{} parameters for a circuit with {}", params.len(), self.num_params)));
        }
        Ok(())
    }

    fn apply_from(&self, state: &mut StateVector, params: &[f64], from: usize) {
        for gate in &self.gates[from..] {
            state.apply_unchecked(&pauli_rotation(&gate.word, params[gate.param]), &gate.targets);
        }
    }

    pub fn run(&self, input: &StateVector, params: &[f64]) -> Result<StateVector> {
        self.check_params(params)?;
        if input.num_qubits() != self.num_qubits {
            return Err(Error::Dimension(format!("{}-qubit input for a {}-qubit circuit", input.num_qubits(), self.num_qubits)));
        }
        let mut s = input.clone();
        self.apply_from(&mut s, params, 0);
        Ok(s)
    }

    /// `<Z_qubit>` after the circuit starting from |0...0>.
    pub fn expectation_z(&self, params: &[f64], qubit: usize) -> Result<f64> {
        let s = self.run(&StateVector::zero(self.num_qubits)?, params)?;
        Ok(s.expectation_z(qubit))
    }
}

/// Gradient of `<Z_qubit>` with respect to every parameter, shifting each
/// gate occurrence by `shift` and accumulating over shared parameters.
pub fn parameter_shift_gradient(
    circuit: &PauliCircuit,
    params: &[f64],
    qubit: usize,
    rule: ShiftRule,
    shift: f64,
) -> Result<Vec<f64>> {
    circuit.check_params(params)?;
    if qubit >= circuit.num_qubits {
        return Err(Error::InvalidArgument(format!("qubit {qubit} out of range")));
    }
    if shift.sin().abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("shift {shift} has zero sine")));
    }
    let mut prefix = StateVector::zero(circuit.num_qubits)?;
    let mut grad = vec![0.0; circuit.num_params];
    for (g, gate) in circuit.gates.iter().enumerate() {
        let theta = params[gate.param];
        let eval = |delta: f64| {
            let mut s = prefix.clone();
            s.apply_unchecked(&pauli_rotation(&gate.word, theta + delta), &gate.targets);
            circuit.apply_from(&mut s, params, g + 1);
            s.expectation_z(qubit)
        };
        grad[gate.param] += rule.combine(eval(shift), eval(-shift), shift);
        prefix.apply_unchecked(&pauli_rotation(&gate.word, theta), &gate.targets);
    }
    Ok(grad)
}

/// [`parameter_shift_gradient`] with the standard `π/2` shift.
pub fn parameter_shift(circuit: &PauliCircuit, params: &[f64], qubit: usize) -> Result<Vec<f64>> {
    parameter_shift_gradient(circuit, params, qubit, ShiftRule::Difference, FRAC_PI_2)
}

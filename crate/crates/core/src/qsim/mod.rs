//! Small exact quantum simulator: statevectors, density matrices and the
//! convolutional circuit used by the hybrid model.

pub mod density;
pub mod gates;
pub mod qcnn;
pub mod shift;
pub mod state;
pub mod zne;

pub use density::{depolarize, DensityMatrix};
pub use gates::{pauli_rotation, pauli_word, pqc15, Pauli, Pqc15Params, Unitary, PQC15_LEN};
pub use qcnn::{
    qcnn_forward, qcnn_forward_noisy, qcnn_forward_with, qcnn_jacobian, CircuitLayout, ConvLayer, QcnnJacobian,
    QcnnParams,
};
pub use shift::{parameter_shift, parameter_shift_gradient, PauliCircuit, PauliGate, ShiftRule};
pub use state::{angle_embedding, init_state, StateVector};
pub use zne::{richardson, sample_shots, zne_expectation};

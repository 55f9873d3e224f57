//! Quantum convolutional network: shared two-qubit convolutions on a ring of
//! active qubits, pooling by discarding half of them, Pauli-Z readout.
//!
//! Pooling applies no gate. Discarded qubits are simply never touched again,
//! which leaves the reduced state of the survivors identical to tracing them
//! out at the pooling step.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::density::DensityMatrix;
use super::gates::{pqc15, Pqc15Params, Unitary, PQC15_LEN};
use super::shift::ShiftRule;
use super::state::{angle_embedding, StateVector};
use crate::error::{Error, Result};

/// One convolution + pooling stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    /// Pairs `(a0,a1), (a2,a3), ...` of the active ring.
    pub even_pairs: Vec<(usize, usize)>,
    /// Pairs `(a1,a2), (a3,a4), ..., (a_last,a0)`; empty when only two qubits are active.
    pub odd_pairs: Vec<(usize, usize)>,
    /// Qubits discarded after the convolution.
    pub pooled: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub n0: usize,
    pub layers: Vec<ConvLayer>,
    pub measured: Vec<usize>,
}

impl CircuitLayout {
    /// Ring layout with `stages` conv+pool stages; every stage keeps the
    /// even-position active qubits. All survivors are measured.
    pub fn ring(n0: usize, stages: usize) -> Result<Self> {
        let mut active: Vec<usize> = (0..n0).collect();
        let mut layers = Vec::with_capacity(stages);
        for stage in 0..stages {
            if active.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "{n0} qubits cannot support {stages} pooling stages (stage {stage} has {} active)",
                    active.len()
                )));
            }
            let a = active.len();
            let even_pairs = (0..a / 2).map(|i| (active[2 * i], active[2 * i + 1])).collect();
            let odd_pairs = if a > 2 {
                (0..a / 2)
                    .filter(|i| 2 * i + 1 < a && (2 * i + 2 < a || a.is_multiple_of(2)))
                    .map(|i| (active[2 * i + 1], active[(2 * i + 2) % a]))
                    .collect()
            } else {
                Vec::new()
            };
            let pooled: Vec<usize> = active.iter().skip(1).step_by(2).copied().collect();
            active.retain(|q| !pooled.contains(q));
            layers.push(ConvLayer { even_pairs, odd_pairs, pooled });
        }
        let layout = CircuitLayout { n0, layers, measured: active };
        layout.validate()?;
        Ok(layout)
    }

    /// Halve until two qubits remain (8 -> 4 -> 2 for eight qubits).
    pub fn default_for(n0: usize) -> Result<Self> {
        let mut stages = 0;
        let mut active = n0;
        while active > 2 {
            active = active.div_ceil(2);
            stages += 1;
        }
        Self::ring(n0, stages)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n0 > super::state::MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("layout has {} qubits", self.n0)));
        }
        let mut active = vec![true; self.n0];
        for (l, layer) in self.layers.iter().enumerate() {
            for &(a, b) in layer.even_pairs.iter().chain(&layer.odd_pairs) {
                if a == b || a >= self.n0 || b >= self.n0 {
                    return Err(Error::InvalidArgument(format!("layer {l}: bad pair ({a}, {b})")));
                }
                if !active[a] || !active[b] {
                    return Err(Error::InvalidArgument(format!("layer {l}: pair ({a}, {b}) uses a pooled qubit")));
                }
            }
            for &q in &layer.pooled {
                if q >= self.n0 || !active[q] {
                    return Err(Error::InvalidArgument(format!("layer {l}: qubit {q} cannot be pooled")));
                }
                active[q] = false;
            }
        }
        if self.measured.is_empty() {
            return Err(Error::InvalidArgument("layout measures no qubit".into()));
        }
        for &q in &self.measured {
            if q >= self.n0 || !active[q] {
                return Err(Error::InvalidArgument(format!("measured qubit {q} is not active at the end")));
            }
        }
        Ok(())
    }

    pub fn num_outputs(&self) -> usize {
        self.measured.len()
    }

    pub fn num_conv_layers(&self) -> usize {
        self.layers.len()
    }

    /// All convolution gates in application order as `(layer, pair)`.
    pub fn gates(&self) -> Vec<(usize, (usize, usize))> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.even_pairs.iter().chain(&layer.odd_pairs).map(move |p| (l, *p)))
            .collect()
    }

    /// Number of depolarizing insertions in the noisy pipeline: one per
    /// non-empty conv sub-step and one per pool.
    pub fn noise_locations(&self) -> usize {
        self.layers
            .iter()
            .map(|l| usize::from(!l.even_pairs.is_empty()) + usize::from(!l.odd_pairs.is_empty()) + 1)
            .sum()
    }
}

/// Convolution parameters: one set shared by every layer, or one set per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcnnParams {
    pub sets: Vec<Pqc15Params>,
}

impl QcnnParams {
    pub fn shared(theta: Pqc15Params) -> Self {
        QcnnParams { sets: vec![theta] }
    }

    pub fn per_layer(sets: Vec<Pqc15Params>) -> Self {
        QcnnParams { sets }
    }

    fn set_for(&self, layer: usize) -> usize {
        if self.sets.len() == 1 {
            0
        } else {
            layer
        }
    }

    pub fn check(&self, layout: &CircuitLayout) -> Result<()> {
        if self.sets.len() != 1 && self.sets.len() != layout.num_conv_layers() {
            return Err(Error::Dimension(format!(
                "{} parameter sets for {} conv layers",
                self.sets.len(),
                layout.num_conv_layers()
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.sets.len() * PQC15_LEN
    }
}

fn check_input(state0_qubits: usize, layout: &CircuitLayout, params: &QcnnParams) -> Result<()> {
    layout.validate()?;
    params.check(layout)?;
    if state0_qubits != layout.n0 {
        return Err(Error::Dimension(format!("{state0_qubits}-qubit input for a {}-qubit layout", layout.n0)));
    }
    Ok(())
}

/// `<Z>` of each measured qubit after the shared-parameter network.
pub fn qcnn_forward(state0: &StateVector, layout: &CircuitLayout, shared: &Pqc15Params) -> Result<Vec<f64>> {
    qcnn_forward_with(state0, layout, &QcnnParams::shared(*shared))
}

/// Like [`qcnn_forward`] with shared or per-layer parameters.
pub fn qcnn_forward_with(state0: &StateVector, layout: &CircuitLayout, params: &QcnnParams) -> Result<Vec<f64>> {
    check_input(state0.num_qubits(), layout, params)?;
    let mut state = state0.clone();
    run_layers(&mut state, layout, params, |_, _| {});
    Ok(layout.measured.iter().map(|&q| state.expectation_z(q)).collect())
}

/// Evolves `state`, calling `after_pool(layer, state)` once each layer's qubits are discarded.
pub(crate) fn run_layers(
    state: &mut StateVector,
    layout: &CircuitLayout,
    params: &QcnnParams,
    mut after_pool: impl FnMut(usize, &mut StateVector),
) {
    let unitaries: Vec<Unitary> = params.sets.iter().map(pqc15).collect();
    for (l, layer) in layout.layers.iter().enumerate() {
        let u = &unitaries[params.set_for(l)];
        for &(a, b) in layer.even_pairs.iter().chain(&layer.odd_pairs) {
            state.apply_unchecked(u, &[a, b]);
        }
        after_pool(l, state);
    }
}

/// Measured expectations under global depolarizing noise of rate `p`
/// after every conv sub-step and every pool.
pub fn qcnn_forward_noisy(
    state0: &StateVector,
    layout: &CircuitLayout,
    params: &QcnnParams,
    p: f64,
) -> Result<Vec<f64>> {
    check_input(state0.num_qubits(), layout, params)?;
    if layout.n0 > MAX_DENSITY_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "density-matrix simulation supports at most {MAX_DENSITY_QUBITS} qubits, layout has {}",
            layout.n0
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("depolarizing rate {p} outside [0, 1]")));
    }
    let unitaries: Vec<Unitary> = params.sets.iter().map(pqc15).collect();
    let mut rho = DensityMatrix::from_pure(state0);
    for (l, layer) in layout.layers.iter().enumerate() {
        let u = &unitaries[params.set_for(l)];
        for step in [&layer.even_pairs, &layer.odd_pairs] {
            if step.is_empty() {
                continue;
            }
            for &(a, b) in step {
                rho.apply_unchecked(u, &[a, b]);
            }
            rho.depolarize(p)?;
        }
        rho.depolarize(p)?;
    }
    Ok(layout.measured.iter().map(|&q| rho.expectation_z(q)).collect())
}

/// Largest register accepted by the density-matrix pipeline.
pub const MAX_DENSITY_QUBITS: usize = 10;

/// Measured expectations and their derivatives, all from parameter-shift evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct QcnnJacobian {
    pub values: Vec<f64>,
    /// `d_theta[o][s * 15 + i]` = d values[o] / d angle i of parameter set s.
    pub d_theta: Vec<Vec<f64>>,
    /// `d_h[o][i]` = d values[o] / d embedding angle h_i.
    pub d_h: Vec<Vec<f64>>,
}

/// Embeds `h`, runs the network and differentiates every output with the
/// two-term shift rule.
///
/// A shared angle appears once in every convolution gate; its derivative is
/// the sum of the shift-rule derivatives taken at each occurrence separately.
/// Embedding angles enter as `RY(2 h)`, so their derivative carries a factor 2.
pub fn qcnn_jacobian(h: &[f64], layout: &CircuitLayout, params: &QcnnParams, rule: ShiftRule) -> Result<QcnnJacobian> {
    check_input(h.len(), layout, params)?;
    let gates = layout.gates();
    let base: Vec<Unitary> = params.sets.iter().map(pqc15).collect();
    let shifted: Vec<Vec<[Unitary; 2]>> = params
        .sets
        .iter()
        .map(|set| {
            (0..PQC15_LEN)
                .map(|i| [pqc15(&set.shifted(i, FRAC_PI_2)), pqc15(&set.shifted(i, -FRAC_PI_2))])
                .collect()
        })
        .collect();
    let readout = |s: &StateVector| -> Vec<f64> { layout.measured.iter().map(|&q| s.expectation_z(q)).collect() };
    let gate_of = |g: usize| &base[params.set_for(gates[g].0)];

    let start = angle_embedding(h)?;
    let mut prefix = Vec::with_capacity(gates.len() + 1);
    let mut state = start;
    for (g, &(_, (a, b))) in gates.iter().enumerate() {
        prefix.push(state.clone());
        state.apply_unchecked(gate_of(g), &[a, b]);
    }
    let values = readout(&state);
    let n_out = values.len();

    let finish = |mut s: StateVector, from: usize| {
        for (g, &(_, (a, b))) in gates.iter().enumerate().skip(from) {
            s.apply_unchecked(gate_of(g), &[a, b]);
        }
        readout(&s)
    };

    let mut d_theta = vec![vec![0.0; params.num_params()]; n_out];
    for (g, &(layer, (a, b))) in gates.iter().enumerate() {
        let set = params.set_for(layer);
        for (i, pair) in shifted[set].iter().enumerate() {
            let mut plus = prefix[g].clone();
            plus.apply_unchecked(&pair[0], &[a, b]);
            let plus = finish(plus, g + 1);
            let mut minus = prefix[g].clone();
            minus.apply_unchecked(&pair[1], &[a, b]);
            let minus = finish(minus, g + 1);
            for o in 0..n_out {
                d_theta[o][set * PQC15_LEN + i] += rule.combine(plus[o], minus[o], FRAC_PI_2);
            }
        }
    }

    let mut d_h = vec![vec![0.0; h.len()]; n_out];
    let mut shifted_h = h.to_vec();
    for i in 0..h.len() {
        shifted_h[i] = h[i] + FRAC_PI_4;
        let plus = finish(angle_embedding(&shifted_h)?, 0);
        shifted_h[i] = h[i] - FRAC_PI_4;
        let minus = finish(angle_embedding(&shifted_h)?, 0);
        shifted_h[i] = h[i];
        for o in 0..n_out {
            d_h[o][i] = 2.0 * rule.combine(plus[o], minus[o], FRAC_PI_2);
        }
    }
    Ok(QcnnJacobian { values, d_theta, d_h })
}

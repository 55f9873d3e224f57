//! Finite-difference audit of every analytic and parameter-shift gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::hqcnn::{build_model, loss_from_logits, ArchConfig, LossMode, Model, ModelKind};
use crate::qsim::gates::Pauli;
use crate::qsim::qcnn::{qcnn_forward_with, qcnn_jacobian, CircuitLayout, QcnnParams};
use crate::qsim::shift::{parameter_shift_gradient, PauliCircuit, PauliGate, ShiftRule};
use crate::qsim::state::angle_embedding;
use crate::qsim::Pqc15Params;
use crate::scenario::{generate_topology, lsf_matrix, SystemConfig};
use crate::throughput::PilotAssignment;

pub const GRADCHECK_RTOL: f64 = 1e-4;
pub const GRADCHECK_ATOL: f64 = 1e-6;
const STEP: f64 = 1e-6;

/// Worst mismatch within one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub suite: String,
    pub group: String,
    pub count: usize,
    /// Largest `|a - b| / max(|a|, |b|)`, ignoring pairs inside the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub seed: u64,
    pub groups: Vec<GroupCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("gradcheck seed {} (rtol {GRADCHECK_RTOL:e}, atol {GRADCHECK_ATOL:e})\n", self.seed);
        for g in &self.groups {
            out.push_str(&format!(
                "{:<5} {:<14} {:<16} n={:<5} max_rel={:.3e} max_abs={:.3e}\n",
                if g.passed { "PASS" } else { "FAIL" },
                g.suite,
                g.group,
                g.count,
                g.max_rel_err,
                g.max_abs_err
            ));
        }
        out
    }
}

/// Whether analytic value `a` agrees with reference `b`.
pub fn grad_close(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= GRADCHECK_ATOL || diff <= GRADCHECK_RTOL * a.abs().max(b.abs())
}

fn compare(suite: &str, group: &str, analytic: &[f64], reference: &[f64]) -> GroupCheck {
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut passed = analytic.len() == reference.len();
    for (&a, &b) in analytic.iter().zip(reference) {
        let diff = (a - b).abs();
        max_abs = max_abs.max(diff);
        if diff > GRADCHECK_ATOL {
            max_rel = max_rel.max(diff / a.abs().max(b.abs()));
        }
        passed &= grad_close(a, b) && a.is_finite();
    }
    GroupCheck { suite: suite.into(), group: group.into(), count: analytic.len(), max_rel_err: max_rel, max_abs_err: max_abs, passed }
}

fn central(f: &mut dyn FnMut(f64) -> f64) -> f64 {
    (f(STEP) - f(-STEP)) / (2.0 * STEP)
}

/// Random circuit of single- and two-qubit Pauli rotations with shared parameters.
pub fn random_pauli_circuit(rng: &mut ChaCha8Rng, num_qubits: usize, num_params: usize, depth: usize) -> PauliCircuit {
    let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
    let gates = (0..depth)
        .map(|_| {
            let a = rng.random_range(0..num_qubits);
            let mut targets = vec![a];
            if num_qubits > 1 && rng.random_bool(0.5) {
                let b = (a + rng.random_range(1..num_qubits)) % num_qubits;
                targets.push(b);
            }
            let word = targets.iter().map(|_| paulis[rng.random_range(0..3)]).collect();
            PauliGate { word, targets, param: rng.random_range(0..num_params) }
        })
        .collect();
    PauliCircuit { num_qubits, num_params, gates }
}

/// Parameter shift on a random 4-qubit circuit against central differences.
pub fn check_pauli_circuit(seed: u64, rule: ShiftRule) -> Result<GroupCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let circuit = random_pauli_circuit(&mut rng, 4, 8, 24);
    let params: Vec<f64> = (0..8).map(|_| rng.random_range(-3.2..3.2)).collect();
    let qubit = rng.random_range(0..4);
    let analytic = parameter_shift_gradient(&circuit, &params, qubit, rule, FRAC_PI_2)?;
    let mut reference = Vec::with_capacity(8);
    for i in 0..8 {
        let mut f = |d: f64| {
            let mut p = params.clone();
            p[i] += d;
            circuit.expectation_z(&p, qubit).expect("valid circuit")
        };
        reference.push(central(&mut f));
    }
    Ok(compare("qsim", "pauli-circuit", &analytic, &reference))
}

/// QCNN Jacobian (angles and embedding inputs) against central differences.
pub fn check_qcnn(seed: u64, rule: ShiftRule) -> Result<Vec<GroupCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = CircuitLayout::default_for(4)?;
    let mut theta = [0.0; 15];
    theta.iter_mut().for_each(|t| *t = rng.random_range(-3.2..3.2));
    let params = QcnnParams::shared(Pqc15Params(theta));
    let h: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
    let jac = qcnn_jacobian(&h, &layout, &params, rule)?;
    let eval = |h: &[f64], p: &QcnnParams| qcnn_forward_with(&angle_embedding(h).expect("angles"), &layout, p).expect("layout");
    let (mut a_t, mut r_t, mut a_h, mut r_h) = (vec![], vec![], vec![], vec![]);
    for i in 0..15 {
        let plus = eval(&h, &QcnnParams::shared(params.sets[0].shifted(i, STEP)));
        let minus = eval(&h, &QcnnParams::shared(params.sets[0].shifted(i, -STEP)));
        for o in 0..plus.len() {
            a_t.push(jac.d_theta[o][i]);
            r_t.push((plus[o] - minus[o]) / (2.0 * STEP));
        }
    }
    for i in 0..h.len() {
        let mut hp = h.clone();
        hp[i] += STEP;
        let mut hm = h.clone();
        hm[i] -= STEP;
        let (plus, minus) = (eval(&hp, &params), eval(&hm, &params));
        for o in 0..plus.len() {
            a_h.push(jac.d_h[o][i]);
            r_h.push((plus[o] - minus[o]) / (2.0 * STEP));
        }
    }
    Ok(vec![compare("qsim", "qcnn.theta", &a_t, &r_t), compare("qsim", "qcnn.h", &a_h, &r_h)])
}

/// Full model gradient at (M, K, tau_p, n) = (4, 3, 2, 4), both loss modes, grouped by parameter block.
pub fn check_model(seed: u64, kind: ModelKind, rule: ShiftRule) -> Result<Vec<GroupCheck>> {
    let cfg = SystemConfig::with_dims(4, 2, 3, 2);
    let arch = ArchConfig { qubits: 4, stages: None };
    let model = build_model(kind, &cfg, &arch, seed)?;
    let beta = lsf_matrix(&generate_topology(&cfg, seed), &cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.5..1.5)).collect();
    let label = PilotAssignment::new((0..3).map(|_| rng.random_range(0..2)).collect());
    let mut out = Vec::new();
    for mode in [LossMode::Supervised, LossMode::Unsupervised] {
        let mut head = |l: &[f64]| loss_from_logits(l, mode, &beta, Some(&label), &cfg);
        let (_, analytic) = match &model {
            Model::Quantum(m) => m.value_and_grad_rule(&x, &mut head, rule)?,
            Model::Classical(m) => m.value_and_grad(&x, &mut head)?,
        };
        let mut probe = model.clone();
        let mut reference = Vec::with_capacity(analytic.len());
        for i in 0..analytic.len() {
            let orig = probe.params()[i];
            let mut f = |d: f64| {
                probe.params_mut()[i] = orig + d;
                let l = loss_from_logits(&probe.logits(&x).expect("dims"), mode, &beta, Some(&label), &cfg).expect("loss").0;
                probe.params_mut()[i] = orig;
                l
            };
            reference.push(central(&mut f));
        }
        let suite = format!("{}.{}", kind.name(), if mode == LossMode::Supervised { "sup" } else { "unsup" });
        for (name, range) in model.groups() {
            out.push(compare(&suite, &name, &analytic[range.clone()], &reference[range]));
        }
    }
    Ok(out)
}

/// Runs every suite. `rule` replaces the shift rule for mutation testing.
pub fn run_gradcheck(seed: u64, rule: ShiftRule) -> Result<GradcheckReport> {
    let mut groups = vec![check_pauli_circuit(seed, rule)?];
    groups.extend(check_qcnn(seed, rule)?);
    for kind in [ModelKind::Hqcnn, ModelKind::HqcnnHur, ModelKind::Mlp, ModelKind::CnnLight] {
        groups.extend(check_model(seed, kind, rule)?);
    }
    Ok(GradcheckReport { seed, groups })
}

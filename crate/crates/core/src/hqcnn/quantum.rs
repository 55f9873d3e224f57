//! The hybrid model: affine pre-processing, angle embedding, QCNN readout and
//! affine post-processing to per-user pilot logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::qsim::density::DensityMatrix;
use crate::qsim::qcnn::{qcnn_forward_noisy, qcnn_forward_with, qcnn_jacobian, CircuitLayout, QcnnParams};
use crate::qsim::shift::ShiftRule;
use crate::qsim::state::angle_embedding;
use crate::qsim::zne::{sample_z, zne_expectation};
use crate::qsim::{Pqc15Params, PQC15_LEN};
use crate::scenario::SystemConfig;

/// How the convolution angles are tied across layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSharing {
    /// One 15-angle set for every convolution gate.
    Shared,
    /// One 15-angle set per convolution layer.
    PerLayer,
}

/// Slices of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HqcnnOffsets {
    pub w0: Range<usize>,
    pub b0: Range<usize>,
    pub theta: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
}

/// How `<Z>` readouts are produced at inference time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Readout {
    /// Global depolarizing rate per noise location.
    pub noise: f64,
    /// Noise scale factors for zero-noise extrapolation, if any.
    pub zne_scales: Option<Vec<f64>>,
    /// Finite-shot estimation instead of exact expectations.
    pub shots: Option<u64>,
    pub shot_seed: u64,
}

impl Readout {
    pub fn exact() -> Self {
        Readout::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqcnnModel {
    pub num_aps: usize,
    pub num_users: usize,
    pub num_pilots: usize,
    pub layout: CircuitLayout,
    pub sharing: ParamSharing,
    /// w0 (n x MK, row-major), b0 (n), angle sets, w2 (K tau x n_out), b2 (K tau).
    pub params: Vec<f64>,
}

impl HqcnnModel {
    pub fn zeros(config: &SystemConfig, layout: CircuitLayout, sharing: ParamSharing) -> Result<Self> {
        layout.validate()?;
        let mut model = HqcnnModel {
            num_aps: config.num_aps,
            num_users: config.num_users,
            num_pilots: config.num_pilots,
            layout,
            sharing,
            params: Vec::new(),
        };
        model.params = vec![0.0; model.offsets().b2.end];
        Ok(model)
    }

    /// Random initialization: uniform affine weights scaled by fan-in, angles in [-pi, pi].
    pub fn new(config: &SystemConfig, layout: CircuitLayout, sharing: ParamSharing, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, layout, sharing)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let off = model.offsets();
        let a0 = 1.0 / (model.num_inputs() as f64).sqrt();
        let a2 = 1.0 / (model.layout.num_outputs() as f64).sqrt();
        for v in &mut model.params[off.w0] {
            *v = rng.random_range(-a0..a0);
        }
        for v in &mut model.params[off.theta] {
            *v = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        }
        for v in &mut model.params[off.w2] {
            *v = rng.random_range(-a2..a2);
        }
        Ok(model)
    }

    pub fn num_inputs(&self) -> usize {
        self.num_aps * self.num_users
    }

    pub fn num_logits(&self) -> usize {
        self.num_users * self.num_pilots
    }

    pub fn num_angle_sets(&self) -> usize {
        match self.sharing {
            ParamSharing::Shared => 1,
            ParamSharing::PerLayer => self.layout.num_conv_layers(),
        }
    }

    pub fn offsets(&self) -> HqcnnOffsets {
        let n = self.layout.n0;
        let n_out = self.layout.num_outputs();
        let w0 = 0..n * self.num_inputs();
        let b0 = w0.end..w0.end + n;
        let theta = b0.end..b0.end + PQC15_LEN * self.num_angle_sets();
        let w2 = theta.end..theta.end + self.num_logits() * n_out;
        let b2 = w2.end..w2.end + self.num_logits();
        HqcnnOffsets { w0, b0, theta, w2, b2 }
    }

    pub fn groups(&self) -> Vec<(&'static str, Range<usize>)> {
        let o = self.offsets();
        vec![("w0", o.w0), ("b0", o.b0), ("theta", o.theta), ("w2", o.w2), ("b2", o.b2)]
    }

    /// Number of trainable angles in the quantum part.
    pub fn num_quantum_params(&self) -> usize {
        self.offsets().theta.len()
    }

    pub fn check(&self) -> Result<()> {
        self.layout.validate()?;
        if self.params.len() != self.offsets().b2.end {
            return Err(Error::Dimension(format!(
                "{} parameters stored, architecture needs {}",
                self.params.len(),
                self.offsets().b2.end
            )));
        }
        Ok(())
    }

    pub fn qcnn_params(&self) -> QcnnParams {
        let sets = self.params[self.offsets().theta]
            .chunks(PQC15_LEN)
            .map(|c| Pqc15Params(c.try_into().expect("15-angle chunk")))
            .collect();
        QcnnParams { sets }
    }

    /// `h = w0 x + b0`.
    pub fn embedding_angles(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_inputs() {
            return Err(Error::Dimension(format!("input of length {}, model expects {}", x.len(), self.num_inputs())));
        }
        let off = self.offsets();
        let w0 = &self.params[off.w0];
        let b0 = &self.params[off.b0];
        Ok((0..self.layout.n0)
            .map(|i| b0[i] + w0[i * x.len()..(i + 1) * x.len()].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect())
    }

    fn post_process(&self, z: &[f64]) -> Vec<f64> {
        let off = self.offsets();
        let w2 = &self.params[off.w2];
        let b2 = &self.params[off.b2];
        let n_out = z.len();
        (0..self.num_logits())
            .map(|r| b2[r] + w2[r * n_out..(r + 1) * n_out].iter().zip(z).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Exact `<Z>` readout of the measured qubits.
    pub fn quantum_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.embedding_angles(x)?;
        qcnn_forward_with(&angle_embedding(&h)?, &self.layout, &self.qcnn_params())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.post_process(&self.quantum_features(x)?))
    }

    /// Logits under noisy, mitigated or finite-shot readout.
    pub fn logits_with(&self, x: &[f64], readout: &Readout) -> Result<Vec<f64>> {
        let h = self.embedding_angles(x)?;
        let state0 = angle_embedding(&h)?;
        let params = self.qcnn_params();
        let mut rng = ChaCha8Rng::seed_from_u64(readout.shot_seed);
        let mut measure = |scale: f64| -> Result<Vec<f64>> {
            let p = readout.noise * scale;
            let z = if p == 0.0 {
                qcnn_forward_with(&state0, &self.layout, &params)?
            } else {
                qcnn_forward_noisy(&state0, &self.layout, &params, p)?
            };
            match readout.shots {
                None => Ok(z),
                Some(shots) => z.iter().map(|&v| sample_z((1.0 + v) / 2.0, shots, &mut rng)).collect(),
            }
        };
        let z = match &readout.zne_scales {
            Some(scales) => zne_expectation(scales, &mut measure)?,
            None => measure(1.0)?,
        };
        Ok(self.post_process(&z))
    }

    /// Logits and the gradient of `head(logits)` with respect to every parameter.
    pub fn value_and_grad(
        &self,
        x: &[f64],
        head: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<(f64, Vec<f64>)> {
        self.value_and_grad_rule(x, head, ShiftRule::Difference)
    }

    pub(crate) fn value_and_grad_rule(
        &self,
        x: &[f64],
        head: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
        rule: ShiftRule,
    ) -> Result<(f64, Vec<f64>)> {
        let off = self.offsets();
        let h = self.embedding_angles(x)?;
        let jac = qcnn_jacobian(&h, &self.layout, &self.qcnn_params(), rule)?;
        let z = &jac.values;
        let n_out = z.len();
        let logits = self.post_process(z);
        let (loss, g_logits) = head(&logits)?;
        if g_logits.len() != logits.len() {
            return Err(Error::Dimension("loss gradient does not match the logits".into()));
        }

        let mut grad = vec![0.0; self.params.len()];
        let w2 = &self.params[off.w2.clone()];
        let mut g_z = vec![0.0; n_out];
        for (r, &g) in g_logits.iter().enumerate() {
            grad[off.b2.start + r] = g;
            for o in 0..n_out {
                grad[off.w2.start + r * n_out + o] = g * z[o];
                g_z[o] += g * w2[r * n_out + o];
            }
        }
        for (o, &gz) in g_z.iter().enumerate() {
            for (i, d) in jac.d_theta[o].iter().enumerate() {
                grad[off.theta.start + i] += gz * d;
            }
        }
        let n_in = x.len();
        for i in 0..self.layout.n0 {
            let g_h: f64 = (0..n_out).map(|o| g_z[o] * jac.d_h[o][i]).sum();
            grad[off.b0.start + i] = g_h;
            for (j, &xj) in x.iter().enumerate() {
                grad[off.w0.start + i * n_in + j] = g_h * xj;
            }
        }
        Ok((loss, grad))
    }

    /// Density matrix right after the embedding, for noise studies.
    pub fn embedded_density(&self, x: &[f64]) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_pure(&angle_embedding(&self.embedding_angles(x)?)?))
    }
}

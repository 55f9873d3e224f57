//! Sum rate of a trained hybrid model under depolarizing noise, with and
//! without zero-noise extrapolation.

use std::fmt::Write as _;

use super::benchmark::learned_assignment;
use super::checkpoint::Checkpoint;
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hqcnn::{Model, Readout};
use crate::qsim::qcnn::MAX_DENSITY_QUBITS;
use crate::throughput::sum_rate;

pub const DEFAULT_ZNE_SCALES: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    /// `noiseless`, `noisy` or `zne`.
    pub pipeline: &'static str,
    pub p: f64,
    pub qubits: usize,
    pub mean_mbps: f64,
    pub std_mbps: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    pub rows: Vec<NoiseRow>,
    pub config_hash: String,
    pub realization_hash: String,
    pub seed: u64,
}

pub const NOISE_CSV_HEADER: &str = "pipeline,p,qubits,mean_mbps,std_mbps,samples,realization_hash,config_hash,seed";

impl NoiseSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(NOISE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.pipeline, r.p, r.qubits, r.mean_mbps, r.std_mbps, r.samples, self.realization_hash, self.config_hash, self.seed
            );
        }
        out
    }
}

/// Mean sum rate over `dataset` for the noiseless pipeline and, per rate,
/// the noisy and (if `zne_scales` is given) mitigated pipelines.
pub fn run_noise_sweep(
    ck: &Checkpoint,
    dataset: &Dataset,
    rates: &[f64],
    zne_scales: Option<&[f64]>,
    shots: Option<u64>,
    seed: u64,
) -> Result<NoiseSweep> {
    dataset.validate()?;
    let Model::Quantum(model) = &ck.model else {
        return Err(Error::InvalidArgument("noise sweeps need a hybrid quantum checkpoint".into()));
    };
    let qubits = model.layout.n0;
    if qubits > MAX_DENSITY_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "{qubits} qubits exceed the density-matrix limit of {MAX_DENSITY_QUBITS}"
        )));
    }
    if let Some(p) = rates.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("noise rate {p} outside [0, 1]")));
    }
    let cfg = &dataset.config;
    let betas = dataset.betas()?;
    let evaluate = |pipeline: &'static str, p: f64, readout: Readout| -> Result<NoiseRow> {
        let mut rates = Vec::with_capacity(betas.len());
        for (i, beta) in betas.iter().enumerate() {
            let ro = Readout { shot_seed: seed ^ dataset.samples[i].seed, ..readout.clone() };
            rates.push(sum_rate(beta, &learned_assignment(ck, beta, &ro)?, cfg)?.sum_mbps);
        }
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let std = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        Ok(NoiseRow { pipeline, p, qubits, mean_mbps: mean, std_mbps: std, samples: rates.len() })
    };
    let base = Readout { shots, ..Readout::default() };
    let mut rows = vec![evaluate("noiseless", 0.0, base.clone())?];
    for &p in rates {
        rows.push(evaluate("noisy", p, Readout { noise: p, ..base.clone() })?);
        if let Some(scales) = zne_scales {
            rows.push(evaluate("zne", p, Readout { noise: p, zne_scales: Some(scales.to_vec()), ..base.clone() })?);
        }
    }
    Ok(NoiseSweep { rows, config_hash: dataset.config_hash.clone(), realization_hash: dataset.realization_hash(), seed })
}

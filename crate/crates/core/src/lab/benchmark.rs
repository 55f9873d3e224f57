//! Side-by-side evaluation of pilot assigners on one realization set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use super::checkpoint::Checkpoint;
use super::dataset::Dataset;
use crate::baselines::{
    default_location_subsets, exhaustive_search, greedy_assignment, location_based_assignment, master_ap_assignment,
    random_assignment, DEFAULT_SEARCH_LIMIT,
};
use crate::error::{Error, Result};
use crate::hqcnn::{count_parameters, hard_decision, normalize_input, softmax_rows, ModelKind, Readout};
use crate::hqcnn::Model;
use crate::scenario::Topology;
use crate::throughput::{sum_rate, PilotAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Random,
    Greedy,
    Location,
    MasterAp,
    Epas,
    Learned(ModelKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Greedy => "greedy",
            Method::Location => "location",
            Method::MasterAp => "master-ap",
            Method::Epas => "epas",
            Method::Learned(k) => k.name(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => Method::Random,
            "greedy" => Method::Greedy,
            "location" => Method::Location,
            "master-ap" => Method::MasterAp,
            "epas" => Method::Epas,
            other => Method::Learned(
                ModelKind::parse(other).ok_or_else(|| Error::InvalidArgument(format!("unknown method `{other}`")))?,
            ),
        })
    }

    /// Comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(Self::parse).collect()
    }

    pub const HEURISTICS: [Method; 5] = [Method::Random, Method::Greedy, Method::Location, Method::MasterAp, Method::Epas];
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub seed: u64,
    pub greedy_iters: usize,
    pub epas_limit: u128,
    pub readout: Readout,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions { seed: 0, greedy_iters: 100, epas_limit: DEFAULT_SEARCH_LIMIT, readout: Readout::exact() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: String,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_users: usize,
    pub num_pilots: usize,
    pub mean_mbps: f64,
    pub std_mbps: f64,
    pub samples: usize,
    pub parameters: usize,
    pub seconds: f64,
    pub realization_hash: String,
    /// Per-sample sum rates in dataset order.
    pub per_sample: Vec<f64>,
}

impl BenchmarkRow {
    /// Mean sum rate per trainable parameter; `None` for model-free methods.
    pub fn mbps_per_param(&self) -> Option<f64> {
        (self.parameters > 0).then(|| self.mean_mbps / self.parameters as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub warnings: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "method,M,L,K,tau_p,mean_mbps,std_mbps,samples,parameters,seconds,mbps_per_param,realization_hash,config_hash,seed";

impl BenchmarkReport {
    pub fn row(&self, method: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let eff = r.mbps_per_param().map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.num_aps,
                r.antennas_per_ap,
                r.num_users,
                r.num_pilots,
                r.mean_mbps,
                r.std_mbps,
                r.samples,
                r.parameters,
                r.seconds,
                eff,
                r.realization_hash,
                self.config_hash,
                self.seed
            );
        }
        out
    }

    /// Human-readable table with two-decimal rates.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<11} {:>10} {:>9} {:>7} {:>10} {:>9}\n", "method", "mean Mbps", "std", "params", "Mbps/param", "seconds");
        for r in &self.rows {
            let eff = r.mbps_per_param().map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<11} {:>10.2} {:>9.2} {:>7} {:>10} {:>9.2}",
                r.method, r.mean_mbps, r.std_mbps, r.parameters, eff, r.seconds
            );
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Pilot choice of a learned model for one fading matrix.
pub fn learned_assignment(ck: &Checkpoint, beta: &crate::scenario::LsfMatrix, readout: &Readout) -> Result<PilotAssignment> {
    let x = normalize_input(beta, &ck.stats)?;
    let logits = match (&ck.model, readout == &Readout::exact()) {
        (Model::Quantum(m), false) => m.logits_with(&x, readout)?,
        _ => ck.model.logits(&x)?,
    };
    let (_, k, t) = ck.model.dims();
    Ok(hard_decision(&softmax_rows(&logits, k, t)?))
}

/// Scores every method on every sample of `dataset`.
///
/// Exhaustive search over its enumeration limit is skipped with a warning.
pub fn run_benchmark(
    dataset: &Dataset,
    methods: &[Method],
    checkpoints: &BTreeMap<ModelKind, Checkpoint>,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    dataset.validate()?;
    let cfg = &dataset.config;
    let betas = dataset.betas()?;
    let hash = dataset.realization_hash();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &method in methods {
        let mut parameters = 0;
        if let Method::Learned(kind) = method {
            let ck = checkpoints
                .get(&kind)
                .ok_or_else(|| Error::InvalidArgument(format!("method `{}` needs a checkpoint", kind.name())))?;
            let (m, k, t) = ck.model.dims();
            if (m, k, t) != (cfg.num_aps, cfg.num_users, cfg.num_pilots) {
                return Err(Error::Dimension(format!(
                    "checkpoint for `{}` is ({m}, {k}, {t}), dataset is ({}, {}, {})",
                    kind.name(),
                    cfg.num_aps,
                    cfg.num_users,
                    cfg.num_pilots
                )));
            }
            parameters = count_parameters(&ck.model);
        }
        if method == Method::Epas {
            let count = crate::baselines::canonical_count(cfg.num_users, cfg.num_pilots);
            if count > options.epas_limit {
                warnings.push(format!("epas skipped: {count} canonical assignments exceed the limit {}", options.epas_limit));
                continue;
            }
        }
        let started = Instant::now();
        let mut per_sample = Vec::with_capacity(betas.len());
        for (i, beta) in betas.iter().enumerate() {
            let sample = &dataset.samples[i];
            let seed = options.seed ^ sample.seed;
            let rate = match method {
                Method::Random => sum_rate(beta, &random_assignment(cfg.num_users, cfg.num_pilots, seed), cfg)?.sum_mbps,
                Method::Greedy => greedy_assignment(beta, cfg, seed, options.greedy_iters)?.sum_mbps,
                Method::Location => {
                    let topo: &Topology = &sample.topology;
                    let a = location_based_assignment(topo, cfg, default_location_subsets(cfg.num_pilots))?;
                    sum_rate(beta, &a, cfg)?.sum_mbps
                }
                Method::MasterAp => sum_rate(beta, &master_ap_assignment(beta, cfg.num_pilots), cfg)?.sum_mbps,
                Method::Epas => exhaustive_search(beta, cfg, options.epas_limit)?.sum_mbps,
                Method::Learned(kind) => {
                    let ro = Readout { shot_seed: seed, ..options.readout.clone() };
                    sum_rate(beta, &learned_assignment(&checkpoints[&kind], beta, &ro)?, cfg)?.sum_mbps
                }
            };
            per_sample.push(rate);
        }
        let (mean_mbps, std_mbps) = mean_std(&per_sample);
        rows.push(BenchmarkRow {
            method: method.name().to_string(),
            num_aps: cfg.num_aps,
            antennas_per_ap: cfg.antennas_per_ap,
            num_users: cfg.num_users,
            num_pilots: cfg.num_pilots,
            mean_mbps,
            std_mbps,
            samples: per_sample.len(),
            parameters,
            seconds: started.elapsed().as_secs_f64(),
            realization_hash: hash.clone(),
            per_sample,
        });
    }
    if rows.windows(2).any(|w| w[0].realization_hash != w[1].realization_hash) {
        return Err(Error::Invariant("benchmark rows were scored on different realizations".into()));
    }
    Ok(BenchmarkReport { rows, warnings, config_hash: dataset.config_hash.clone(), seed: options.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::dataset::generate_dataset;
    use crate::scenario::SystemConfig;

    #[test]
    fn method_names_round_trip() {
        for m in Method::HEURISTICS {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert_eq!(Method::parse("hqcnn").unwrap(), Method::Learned(ModelKind::Hqcnn));
        assert!(Method::parse("oracle").is_err());
        assert_eq!(Method::parse_list("random, epas").unwrap(), vec![Method::Random, Method::Epas]);
    }

    #[test]
    fn epas_dominates_and_report_is_deterministic() {
        let ds = generate_dataset(&SystemConfig::default(), 15, 5, false).unwrap();
        let opts = BenchmarkOptions::default();
        let a = run_benchmark(&ds, &Method::HEURISTICS, &BTreeMap::new(), &opts).unwrap();
        let b = run_benchmark(&ds, &Method::HEURISTICS, &BTreeMap::new(), &opts).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.per_sample, y.per_sample);
        }
        let epas = a.row("epas").unwrap();
        for r in &a.rows {
            for (v, best) in r.per_sample.iter().zip(&epas.per_sample) {
                assert!(v <= &(best * (1.0 + 1e-12)), "{} beat epas", r.method);
            }
        }
        let csv = a.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 6);
        assert!(a.to_table().contains("master-ap"));
    }

    #[test]
    fn oversized_search_skipped_with_warning() {
        let ds = generate_dataset(&SystemConfig::with_dims(4, 1, 12, 6), 2, 1, false).unwrap();
        let opts = BenchmarkOptions { epas_limit: 1000, ..BenchmarkOptions::default() };
        let r = run_benchmark(&ds, &[Method::Random, Method::Epas], &BTreeMap::new(), &opts).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn learned_method_needs_checkpoint() {
        let ds = generate_dataset(&SystemConfig::default(), 2, 1, false).unwrap();
        let err = run_benchmark(&ds, &[Method::Learned(ModelKind::Mlp)], &BTreeMap::new(), &BenchmarkOptions::default());
        assert!(err.is_err());
    }
}

//! Closed-form downlink ergodic throughput under conjugate beamforming,
//! for hard pilot assignments and for the soft (probabilistic) relaxation
//! used as the unsupervised training objective.
//!
//! The soft relaxation replaces the co-pilot indicator of users j and k by
//! the overlap `w_jk = q_j . q_k` of their pilot distributions. It enters the
//! LMMSE contamination sum linearly and the coherent interference amplitude
//! (so squared overall). A user's own term in the estimator keeps weight 1:
//! `|q_k|^2 < 1` off the vertices would otherwise shrink the user's own
//! channel in its estimate and let `gamma` exceed `beta`. At one-hot rows all
//! forms reduce exactly to the hard-assignment expressions.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{channel_stats_weighted, ChannelStats, LsfMatrix, SystemConfig};

/// One pilot index per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PilotAssignment {
    pub pilot_of: Vec<usize>,
}

impl PilotAssignment {
    pub fn new(pilot_of: Vec<usize>) -> Self {
        PilotAssignment { pilot_of }
    }

    pub fn num_users(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn validate(&self, num_users: usize, num_pilots: usize) -> Result<()> {
        if self.pilot_of.len() != num_users {
            return Err(Error::InvalidAssignment(format!(
                "{} users assigned, expected {num_users}",
                self.pilot_of.len()
            )));
        }
        if let Some((user, p)) = self.pilot_of.iter().enumerate().find(|(_, p)| **p >= num_pilots) {
            return Err(Error::InvalidAssignment(format!("user {user} has pilot {p}, only {num_pilots} pilots exist")));
        }
        Ok(())
    }

    /// One-hot K x tau_p probability matrix.
    pub fn to_soft(&self, num_pilots: usize) -> SoftAssignment {
        let mut q = Array2::zeros((self.pilot_of.len(), num_pilots));
        for (k, &t) in self.pilot_of.iter().enumerate() {
            q[[k, t]] = 1.0;
        }
        SoftAssignment { q }
    }
}

/// Row-stochastic K x tau_p matrix of pilot-selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    pub q: Array2<f64>,
}

impl SoftAssignment {
    pub fn new(q: Array2<f64>) -> Result<Self> {
        let soft = SoftAssignment { q };
        soft.validate()?;
        Ok(soft)
    }

    pub fn uniform(num_users: usize, num_pilots: usize) -> Self {
        SoftAssignment { q: Array2::from_elem((num_users, num_pilots), 1.0 / num_pilots as f64) }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, row) in self.q.outer_iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidArgument(format!("row {k} of q has a negative or non-finite entry")));
            }
            let total = row.sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("row {k} of q sums to {total}, not 1")));
            }
        }
        Ok(())
    }

    /// Pairwise pilot overlap `w_jk = q_j . q_k`.
    pub fn overlap(&self) -> Array2<f64> {
        self.q.dot(&self.q.t())
    }
}

/// Per-user and total rates in Mbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_mbps: Vec<f64>,
    pub sum_mbps: f64,
}

impl RateReport {
    fn from_rates(per_user_mbps: Vec<f64>) -> Self {
        let sum_mbps = per_user_mbps.iter().sum();
        RateReport { per_user_mbps, sum_mbps }
    }

    pub fn min_mbps(&self) -> f64 {
        self.per_user_mbps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `(j, k)` is 1 exactly when users j and k share a pilot.
pub fn copilot_matrix(assignment: &PilotAssignment) -> Array2<u8> {
    let k = assignment.num_users();
    Array2::from_shape_fn((k, k), |(a, b)| u8::from(assignment.pilot_of[a] == assignment.pilot_of[b]))
}

fn rate_mbps(sinr: f64, config: &SystemConfig) -> f64 {
    config.bandwidth_hz * (1.0 + sinr).log2() / 1e6
}

/// Intermediate quantities of one rate evaluation, kept for the backward pass.
struct Forward {
    stats: ChannelStats,
    /// Coherent beamforming gain `sum_m amp_mk` per user.
    gain: Vec<f64>,
    /// `cross[(j, k)] = sum_m amp_mj * beta_mk / beta_mj`
    cross: Array2<f64>,
    signal: Vec<f64>,
    coherent: Vec<f64>,
    noncoherent: Vec<f64>,
    sinr: Vec<f64>,
}

/// Evaluates SINRs with pilot overlap `overlap` inside the estimator and
/// `coherent_weight` on the coherent interference terms.
fn forward(
    beta: &LsfMatrix,
    overlap: &Array2<f64>,
    coherent_weight: &Array2<f64>,
    config: &SystemConfig,
) -> Result<Forward> {
    let stats = channel_stats_weighted(beta, overlap, config)?;
    let (m, k) = beta.0.dim();
    let b = &beta.0;
    let l = config.antennas_per_ap as f64;
    let rho_d = config.rho_d();

    let amp = Array2::from_shape_fn((m, k), |(ap, u)| stats.eta[[ap, u]].sqrt() * stats.gamma[[ap, u]]);
    let gain: Vec<f64> = (0..k).map(|u| amp.column(u).sum()).collect();
    let mut cross = Array2::zeros((k, k));
    for j in 0..k {
        for u in 0..k {
            if j != u && coherent_weight[[j, u]] != 0.0 {
                cross[[j, u]] = (0..m).map(|ap| amp[[ap, j]] * b[[ap, u]] / b[[ap, j]]).sum();
            }
        }
    }

    let mut signal = vec![0.0; k];
    let mut coherent = vec![0.0; k];
    let mut noncoherent = vec![0.0; k];
    let mut sinr = vec![0.0; k];
    for u in 0..k {
        signal[u] = rho_d * l * l * gain[u] * gain[u];
        coherent[u] = rho_d
            * l
            * l
            * (0..k)
                .filter(|&j| j != u)
                .map(|j| coherent_weight[[j, u]] * cross[[j, u]] * cross[[j, u]])
                .sum::<f64>();
        noncoherent[u] = rho_d
            * l
            * (0..m)
                .map(|ap| {
                    let spent: f64 = (0..k).map(|j| stats.eta[[ap, j]] * stats.gamma[[ap, j]]).sum();
                    spent * b[[ap, u]]
                })
                .sum::<f64>();
        sinr[u] = signal[u] / (coherent[u] + noncoherent[u] + 1.0);
    }
    Ok(Forward { stats, gain, cross, signal, coherent, noncoherent, sinr })
}

/// Rate of user `k` in Mbps given statistics and co-pilot matrix of the same assignment.
pub fn user_rate(
    k: usize,
    beta: &LsfMatrix,
    stats: &ChannelStats,
    copilot: &Array2<u8>,
    config: &SystemConfig,
) -> Result<f64> {
    let (m, users) = beta.0.dim();
    if stats.gamma.dim() != (m, users) || stats.eta.dim() != (m, users) || copilot.dim() != (users, users) {
        return Err(Error::Dimension(format!(
            "beta {m}x{users}, gamma {:?}, eta {:?}, copilot {:?}",
            stats.gamma.dim(),
            stats.eta.dim(),
            copilot.dim()
        )));
    }
    if k >= users {
        return Err(Error::Dimension(format!("user {k} out of range for {users} users")));
    }
    let b = &beta.0;
    let l = config.antennas_per_ap as f64;
    let rho_d = config.rho_d();
    let amp = |ap: usize, j: usize| stats.eta[[ap, j]].sqrt() * stats.gamma[[ap, j]];
    let gain: f64 = (0..m).map(|ap| amp(ap, k)).sum();
    let coherent: f64 = (0..users)
        .filter(|&j| j != k && copilot[[j, k]] == 1)
        .map(|j| (0..m).map(|ap| amp(ap, j) * b[[ap, k]] / b[[ap, j]]).sum::<f64>().powi(2))
        .sum();
    let noncoherent: f64 = (0..m)
        .map(|ap| (0..users).map(|j| stats.eta[[ap, j]] * stats.gamma[[ap, j]] * b[[ap, k]]).sum::<f64>())
        .sum();
    let sinr = rho_d * l * l * gain * gain / (rho_d * l * l * coherent + rho_d * l * noncoherent + 1.0);
    Ok(rate_mbps(sinr, config))
}

/// Per-user and sum rate of a hard pilot assignment.
pub fn sum_rate(beta: &LsfMatrix, assignment: &PilotAssignment, config: &SystemConfig) -> Result<RateReport> {
    beta.check_dims(config)?;
    assignment.validate(config.num_users, config.num_pilots)?;
    let indicator = copilot_matrix(assignment).mapv(f64::from);
    let fwd = forward(beta, &indicator, &indicator, config)?;
    Ok(RateReport::from_rates(fwd.sinr.iter().map(|s| rate_mbps(*s, config)).collect()))
}

/// Channel statistics under the soft pilot overlap `q_j . q_k`.
pub fn soft_channel_stats(beta: &LsfMatrix, q: &SoftAssignment, config: &SystemConfig) -> Result<ChannelStats> {
    check_soft(beta, q, config)?;
    channel_stats_weighted(beta, &estimator_overlap(&q.overlap()), config)
}

/// Overlap with the diagonal pinned to 1, as used inside the estimator.
fn estimator_overlap(overlap: &Array2<f64>) -> Array2<f64> {
    let mut est = overlap.clone();
    est.diag_mut().fill(1.0);
    est
}

fn check_soft(beta: &LsfMatrix, q: &SoftAssignment, config: &SystemConfig) -> Result<()> {
    beta.check_dims(config)?;
    if q.q.dim() != (config.num_users, config.num_pilots) {
        return Err(Error::Dimension(format!(
            "q is {:?}, expected {}x{}",
            q.q.dim(),
            config.num_users,
            config.num_pilots
        )));
    }
    q.validate()
}

/// Soft sum rate (Mbps) and the unsupervised loss `-sum_mbps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftRate {
    pub report: RateReport,
    pub loss: f64,
}

pub fn soft_sum_rate(beta: &LsfMatrix, q: &SoftAssignment, config: &SystemConfig) -> Result<SoftRate> {
    check_soft(beta, q, config)?;
    let overlap = q.overlap();
    let weight = overlap.mapv(|w| w * w);
    let fwd = forward(beta, &estimator_overlap(&overlap), &weight, config)?;
    let report = RateReport::from_rates(fwd.sinr.iter().map(|s| rate_mbps(*s, config)).collect());
    Ok(SoftRate { loss: -report.sum_mbps, report })
}

/// Unsupervised loss and its gradient with respect to every entry of q.
///
/// The gradient treats q as unconstrained (no projection onto the simplex).
pub fn soft_loss_gradient(beta: &LsfMatrix, q: &SoftAssignment, config: &SystemConfig) -> Result<(f64, Array2<f64>)> {
    check_soft(beta, q, config)?;
    let overlap = q.overlap();
    let est = estimator_overlap(&overlap);
    let weight = overlap.mapv(|w| w * w);
    let f = forward(beta, &est, &weight, config)?;
    let (m, k) = beta.0.dim();
    let b = &beta.0;
    let l = config.antennas_per_ap as f64;
    let rho_d = config.rho_d();
    let snr = config.num_pilots as f64 * config.rho_p();

    let loss = -f.sinr.iter().map(|s| rate_mbps(*s, config)).sum::<f64>();
    let rate_scale = config.bandwidth_hz / (1e6 * std::f64::consts::LN_2);

    // Reverse pass; `g_*` is dLoss/d(*).
    let mut g_amp = Array2::<f64>::zeros((m, k));
    let mut g_gamma = Array2::<f64>::zeros((m, k));
    let mut g_eta_ap = vec![0.0; m];
    let mut g_overlap = Array2::<f64>::zeros((k, k));
    for u in 0..k {
        let g_sinr = -rate_scale / (1.0 + f.sinr[u]);
        let denom = f.coherent[u] + f.noncoherent[u] + 1.0;
        let g_signal = g_sinr / denom;
        let g_interf = -g_sinr * f.signal[u] / (denom * denom);

        let g_gain = g_signal * 2.0 * rho_d * l * l * f.gain[u];
        for ap in 0..m {
            g_amp[[ap, u]] += g_gain;
        }
        for j in (0..k).filter(|&j| j != u) {
            let cross = f.cross[[j, u]];
            g_overlap[[j, u]] += g_interf * rho_d * l * l * cross * cross * 2.0 * overlap[[j, u]];
            let g_cross = g_interf * rho_d * l * l * weight[[j, u]] * 2.0 * cross;
            for ap in 0..m {
                g_amp[[ap, j]] += g_cross * b[[ap, u]] / b[[ap, j]];
            }
        }
        for ap in 0..m {
            let eta = f.stats.eta[[ap, 0]];
            let spent: f64 = (0..k).map(|j| f.stats.gamma[[ap, j]]).sum::<f64>();
            g_eta_ap[ap] += g_interf * rho_d * l * spent * b[[ap, u]];
            for j in 0..k {
                g_gamma[[ap, j]] += g_interf * rho_d * l * eta * b[[ap, u]];
            }
        }
    }
    for ap in 0..m {
        let eta = f.stats.eta[[ap, 0]];
        let root = eta.sqrt();
        for u in 0..k {
            g_gamma[[ap, u]] += g_amp[[ap, u]] * root;
            g_eta_ap[ap] += g_amp[[ap, u]] * f.stats.gamma[[ap, u]] / (2.0 * root);
        }
        // eta = 1 / (L * S), S = sum_k gamma
        let total: f64 = f.stats.gamma.row(ap).sum();
        let g_total = -g_eta_ap[ap] / (l * total * total);
        for u in 0..k {
            g_gamma[[ap, u]] += g_total;
        }
        // gamma = snr * beta^2 / D, D = snr * sum_j est_jk beta_mj + 1
        for u in 0..k {
            let d = snr * (0..k).map(|j| est[[j, u]] * b[[ap, j]]).sum::<f64>() + 1.0;
            let g_d = -g_gamma[[ap, u]] * snr * b[[ap, u]] * b[[ap, u]] / (d * d);
            for j in (0..k).filter(|&j| j != u) {
                g_overlap[[j, u]] += g_d * snr * b[[ap, j]];
            }
        }
    }
    // overlap = q q^T
    let g_q = g_overlap.dot(&q.q) + g_overlap.t().dot(&q.q);
    Ok((loss, g_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{channel_stats, generate_topology, lsf_matrix};
    use proptest::prelude::*;

    fn instance(cfg: &SystemConfig, seed: u64) -> LsfMatrix {
        lsf_matrix(&generate_topology(cfg, seed), cfg, seed)
    }

    #[test]
    fn copilot_indicator() {
        let distinct = copilot_matrix(&PilotAssignment::new(vec![0, 1, 2]));
        assert_eq!(distinct, Array2::<u8>::eye(3));
        let shared = copilot_matrix(&PilotAssignment::new(vec![1, 1, 1]));
        assert!(shared.iter().all(|&v| v == 1));
        let mixed = copilot_matrix(&PilotAssignment::new(vec![0, 0, 1]));
        let expected = ndarray::arr2(&[[1, 1, 0], [1, 1, 0], [0, 0, 1]]);
        assert_eq!(mixed, expected);
    }

    #[test]
    fn single_user_rate_has_no_interference() {
        let cfg = SystemConfig::with_dims(4, 2, 1, 1);
        let beta = instance(&cfg, 9);
        let assignment = PilotAssignment::new(vec![0]);
        let stats = channel_stats(&beta, &assignment, &cfg).unwrap();
        let (l, rho) = (2.0, cfg.rho_d());
        let gain: f64 = (0..4).map(|m| stats.eta[[m, 0]].sqrt() * stats.gamma[[m, 0]]).sum();
        let nc: f64 = (0..4).map(|m| stats.eta[[m, 0]] * stats.gamma[[m, 0]] * beta.get(m, 0)).sum();
        let sinr = rho * l * l * gain * gain / (rho * l * nc + 1.0);
        let expected = 20.0 * (1.0 + sinr).log2();
        let report = sum_rate(&beta, &assignment, &cfg).unwrap();
        assert!((report.sum_mbps - expected).abs() < 1e-12 * expected);
        let direct = user_rate(0, &beta, &stats, &copilot_matrix(&assignment), &cfg).unwrap();
        assert!((direct - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn vanishing_downlink_power_kills_rate() {
        let cfg = SystemConfig { dl_power_mw: 1e-20, ..SystemConfig::default() };
        let beta = instance(&cfg, 4);
        let report = sum_rate(&beta, &PilotAssignment::new(vec![0, 1, 2, 0, 1, 2]), &cfg).unwrap();
        assert!(report.sum_mbps < 1e-6);
    }

    #[test]
    fn user_rate_matches_sum_rate_entries() {
        let cfg = SystemConfig::default();
        let beta = instance(&cfg, 21);
        let assignment = PilotAssignment::new(vec![0, 0, 1, 2, 1, 0]);
        let stats = channel_stats(&beta, &assignment, &cfg).unwrap();
        let copilot = copilot_matrix(&assignment);
        let report = sum_rate(&beta, &assignment, &cfg).unwrap();
        for k in 0..6 {
            let r = user_rate(k, &beta, &stats, &copilot, &cfg).unwrap();
            assert!((r - report.per_user_mbps[k]).abs() < 1e-12 * r.max(1e-12));
        }
        let total: f64 = report.per_user_mbps.iter().sum();
        assert!((total - report.sum_mbps).abs() <= 1e-9 * total);
        assert!(user_rate(6, &beta, &stats, &copilot, &cfg).is_err());
        let wrong = Array2::<u8>::eye(5);
        assert!(user_rate(0, &beta, &stats, &wrong, &cfg).is_err());
    }

    #[test]
    fn separating_a_contaminating_pair_raises_the_soft_objective() {
        // Two users next to the same AP, two pilots: sharing a pilot must be worse.
        let cfg = SystemConfig::with_dims(2, 2, 2, 2);
        let beta = LsfMatrix::from_rows(2, 2, vec![1e-9, 8e-10, 1e-13, 2e-13]).unwrap();
        let vertices = [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let losses: Vec<f64> = vertices
            .iter()
            .map(|v| soft_sum_rate(&beta, &PilotAssignment::new(v.clone()).to_soft(2), &cfg).unwrap().loss)
            .collect();
        assert!(losses[1] < losses[0] && losses[2] < losses[3]);
        assert!((losses[1] - losses[2]).abs() < 1e-9 * losses[1].abs());
    }

    #[test]
    fn uniform_soft_rate_stays_below_the_best_hard_rate() {
        let cfg = SystemConfig::default();
        let (mut soft, mut best) = (0.0, 0.0);
        for seed in 0..30 {
            let beta = instance(&cfg, seed);
            soft += soft_sum_rate(&beta, &SoftAssignment::uniform(6, 3), &cfg).unwrap().report.sum_mbps;
            best += crate::baselines::exhaustive_search(&beta, &cfg, 1 << 20).unwrap().sum_mbps;
        }
        assert!(soft < best, "{soft} vs {best}");
    }

    #[test]
    fn soft_estimate_never_exceeds_the_channel() {
        let cfg = SystemConfig::default();
        let beta = instance(&cfg, 2);
        let stats = soft_channel_stats(&beta, &SoftAssignment::uniform(6, 3), &cfg).unwrap();
        assert!(stats.gamma.iter().zip(beta.0.iter()).all(|(g, b)| g <= b));
    }

    #[test]
    fn uniform_soft_overlap() {
        let q = SoftAssignment::uniform(4, 4);
        assert!(q.overlap().iter().all(|w| (w - 0.25).abs() < 1e-15));
        let q = SoftAssignment::new(ndarray::arr2(&[[0.5, 0.5], [1.0, 0.0]])).unwrap();
        let w = q.overlap();
        assert!(w[[0, 0]] < 1.0 && w[[1, 1]] == 1.0);
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        let cfg = SystemConfig::with_dims(2, 1, 2, 2);
        let beta = LsfMatrix::from_rows(2, 2, vec![1e-10; 4]).unwrap();
        let q = SoftAssignment { q: ndarray::arr2(&[[0.5, 0.6], [1.0, 0.0]]) };
        assert!(soft_sum_rate(&beta, &q, &cfg).is_err());
        let q = SoftAssignment { q: ndarray::arr2(&[[1.5, -0.5], [1.0, 0.0]]) };
        assert!(soft_channel_stats(&beta, &q, &cfg).is_err());
    }

    #[test]
    fn one_hot_soft_stats_equal_hard_stats() {
        let cfg = SystemConfig::default();
        let beta = instance(&cfg, 17);
        let assignment = PilotAssignment::new(vec![2, 0, 1, 1, 0, 2]);
        let hard = channel_stats(&beta, &assignment, &cfg).unwrap();
        let soft = soft_channel_stats(&beta, &assignment.to_soft(3), &cfg).unwrap();
        assert_eq!(hard, soft);
    }

    fn random_soft(k: usize, t: usize, seed: u64) -> SoftAssignment {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut q = Array2::from_shape_fn((k, t), |_| rng.random::<f64>() + 0.05);
        for mut row in q.outer_iter_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        SoftAssignment { q }
    }

    #[test]
    fn soft_gradient_matches_central_differences() {
        let cfg = SystemConfig::with_dims(5, 2, 4, 3);
        for seed in 0..5 {
            let beta = instance(&cfg, seed);
            let q = random_soft(4, 3, seed + 100);
            let (_, grad) = soft_loss_gradient(&beta, &q, &cfg).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                for t in 0..3 {
                    // perturb without renormalising: evaluate the raw rate expression
                    let eval = |delta: f64| {
                        let mut p = q.clone();
                        p.q[[k, t]] += delta;
                        let overlap = p.overlap();
                        let weight = overlap.mapv(|w| w * w);
                        let f = forward(&beta, &estimator_overlap(&overlap), &weight, &cfg).unwrap();
                        -f.sinr.iter().map(|s| rate_mbps(*s, &cfg)).sum::<f64>()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let err = (fd - grad[[k, t]]).abs();
                    assert!(err <= 1e-4 * fd.abs().max(grad[[k, t]].abs()) + 1e-6, "seed {seed} ({k},{t}): fd {fd} analytic {}", grad[[k, t]]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn one_hot_soft_rate_equals_hard_rate(seed in any::<u64>(), pilots in proptest::collection::vec(0usize..3, 6)) {
            let cfg = SystemConfig::default();
            let beta = instance(&cfg, seed);
            let assignment = PilotAssignment::new(pilots);
            let hard = sum_rate(&beta, &assignment, &cfg).unwrap().sum_mbps;
            let soft = soft_sum_rate(&beta, &assignment.to_soft(3), &cfg).unwrap();
            prop_assert!((soft.report.sum_mbps - hard).abs() <= 1e-9 * hard);
            prop_assert!((soft.loss + hard).abs() <= 1e-9 * hard);
        }

        #[test]
        fn relabelling_pilots_preserves_sum_rate(seed in any::<u64>(), pilots in proptest::collection::vec(0usize..3, 6), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
            let cfg = SystemConfig::default();
            let beta = instance(&cfg, seed);
            let base = sum_rate(&beta, &PilotAssignment::new(pilots.clone()), &cfg).unwrap();
            let relabelled = PilotAssignment::new(pilots.iter().map(|&p| perm[p]).collect());
            let moved = sum_rate(&beta, &relabelled, &cfg).unwrap();
            prop_assert!((base.sum_mbps - moved.sum_mbps).abs() <= 1e-9 * base.sum_mbps);
            prop_assert!(base.per_user_mbps.iter().all(|r| *r >= 0.0));
        }

        #[test]
        fn swapping_users_preserves_sum_rate(seed in any::<u64>(), pilots in proptest::collection::vec(0usize..3, 6), a in 0usize..6, b in 0usize..6) {
            let cfg = SystemConfig::default();
            let beta = instance(&cfg, seed);
            let base = sum_rate(&beta, &PilotAssignment::new(pilots.clone()), &cfg).unwrap();
            let mut swapped_beta = beta.0.clone();
            for m in 0..cfg.num_aps {
                swapped_beta.swap([m, a], [m, b]);
            }
            let mut swapped = pilots.clone();
            swapped.swap(a, b);
            let other = sum_rate(&LsfMatrix(swapped_beta), &PilotAssignment::new(swapped), &cfg).unwrap();
            prop_assert!((base.sum_mbps - other.sum_mbps).abs() <= 1e-9 * base.sum_mbps);
        }
    }

    #[test]
    fn removing_a_copilot_almost_never_hurts() {
        // Uniform power control couples all users through eta, so relieving
        // contamination can occasionally lower a user's rate by a few percent.
        let cfg = SystemConfig::with_dims(6, 2, 4, 2);
        let (mut trials, mut worse) = (0, 0);
        for seed in 0..500 {
            let beta = instance(&cfg, seed);
            let crowded = sum_rate(&beta, &PilotAssignment::new(vec![0, 0, 0, 0]), &cfg).unwrap();
            for intruder in 1..4 {
                let mut pilots = vec![0, 0, 0, 0];
                pilots[intruder] = 1;
                let relieved = sum_rate(&beta, &PilotAssignment::new(pilots), &cfg).unwrap();
                trials += 1;
                let change = relieved.per_user_mbps[0] / crowded.per_user_mbps[0] - 1.0;
                if change < 0.0 {
                    worse += 1;
                    assert!(change > -0.05, "seed {seed}: {change}");
                }
            }
        }
        assert!(worse * 100 <= trials, "{worse} of {trials} got worse");
    }
}

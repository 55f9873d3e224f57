//! Network geometry, large-scale fading and LMMSE channel statistics.
//!
//! Positions are kept in meters; the three-slope path-loss model is
//! evaluated with distances in kilometers. Pilots are orthonormal, so the
//! pilot cross-correlations collapse to a co-pilot weight per user pair.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::throughput::PilotAssignment;

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Reference noise temperature in kelvin.
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

/// Physical and dimensional constants of one cell-free deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of access points (M).
    pub num_aps: usize,
    /// Antennas per access point (L).
    pub antennas_per_ap: usize,
    /// Number of single-antenna users (K).
    pub num_users: usize,
    /// Number of orthogonal pilots (tau_p).
    pub num_pilots: usize,
    pub pilot_power_mw: f64,
    pub dl_power_mw: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub area_side_m: f64,
    /// Path-loss constant in dB (the "L = 141" of the three-slope model).
    pub pl_const_db: f64,
    pub d1_km: f64,
    pub d0_km: f64,
    pub sigma_sh_db: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_aps: 10,
            antennas_per_ap: 2,
            num_users: 6,
            num_pilots: 3,
            pilot_power_mw: 100.0,
            dl_power_mw: 200.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            area_side_m: 1000.0,
            pl_const_db: 141.0,
            d1_km: 0.05,
            d0_km: 0.01,
            sigma_sh_db: 8.0,
        }
    }
}

impl SystemConfig {
    /// Scenario with the given (M, L, K, tau_p) and the remaining constants at their defaults.
    pub fn with_dims(num_aps: usize, antennas_per_ap: usize, num_users: usize, num_pilots: usize) -> Self {
        SystemConfig {
            num_aps,
            antennas_per_ap,
            num_users,
            num_pilots,
            ..SystemConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn at_least_one(field: &'static str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::InvalidConfig { field, reason: "must be at least 1".into() });
            }
            Ok(())
        }
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig { field, reason: format!("must be finite and > 0, got {v}") });
            }
            Ok(())
        }
        at_least_one("num_aps", self.num_aps)?;
        at_least_one("antennas_per_ap", self.antennas_per_ap)?;
        at_least_one("num_users", self.num_users)?;
        at_least_one("num_pilots", self.num_pilots)?;
        positive("pilot_power_mw", self.pilot_power_mw)?;
        positive("dl_power_mw", self.dl_power_mw)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("area_side_m", self.area_side_m)?;
        positive("d1_km", self.d1_km)?;
        positive("d0_km", self.d0_km)?;
        if !self.noise_figure_db.is_finite() {
            return Err(Error::InvalidConfig { field: "noise_figure_db", reason: "must be finite".into() });
        }
        if !self.pl_const_db.is_finite() {
            return Err(Error::InvalidConfig { field: "pl_const_db", reason: "must be finite".into() });
        }
        if !(self.sigma_sh_db.is_finite() && self.sigma_sh_db >= 0.0) {
            return Err(Error::InvalidConfig { field: "sigma_sh_db", reason: "must be finite and >= 0".into() });
        }
        if self.d0_km >= self.d1_km {
            return Err(Error::InvalidConfig { field: "d0_km", reason: "must be below d1_km".into() });
        }
        Ok(())
    }

    /// Normalized pilot SNR.
    pub fn rho_p(&self) -> f64 {
        self.pilot_power_mw * 1e-3 / noise_power(self)
    }

    /// Normalized downlink SNR per AP.
    pub fn rho_d(&self) -> f64 {
        self.dl_power_mw * 1e-3 / noise_power(self)
    }
}

/// Thermal noise power in watts, `k_B * T0 * B * NF`.
pub fn noise_power(config: &SystemConfig) -> f64 {
    BOLTZMANN * NOISE_TEMPERATURE_K * config.bandwidth_hz * 10f64.powf(config.noise_figure_db / 10.0)
}

/// AP and user positions in meters on the square `[0, area_side]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub seed: u64,
}

fn uniform_points(rng: &mut impl Rng, count: usize, side: f64) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect()
}

/// Drops APs and users i.i.d. uniformly on the coverage square.
pub fn generate_topology(config: &SystemConfig, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ap_positions = uniform_points(&mut rng, config.num_aps, config.area_side_m);
    let user_positions = uniform_points(&mut rng, config.num_users, config.area_side_m);
    Topology { ap_positions, user_positions, seed }
}

/// Like [`generate_topology`] but keeps the given AP positions.
pub fn generate_users(config: &SystemConfig, ap_positions: Vec<[f64; 2]>, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user_positions = uniform_points(&mut rng, config.num_users, config.area_side_m);
    Topology { ap_positions, user_positions, seed }
}

/// Three-slope path loss in dB for a distance in kilometers.
pub fn path_loss_db(d_km: f64, config: &SystemConfig) -> f64 {
    let (d0, d1) = (config.d0_km, config.d1_km);
    if d_km > d1 {
        -config.pl_const_db - 35.0 * d_km.log10()
    } else if d_km > d0 {
        -config.pl_const_db - 15.0 * d1.log10() - 20.0 * d_km.log10()
    } else {
        -config.pl_const_db - 15.0 * d1.log10() - 20.0 * d0.log10()
    }
}

fn distance_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 1000.0
}

/// Linear-scale large-scale fading coefficients, M rows (APs) by K columns (users).
#[derive(Debug, Clone, PartialEq)]
pub struct LsfMatrix(pub Array2<f64>);

impl LsfMatrix {
    pub fn new(beta: Array2<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Dimension("empty large-scale fading matrix".into()));
        }
        if let Some(bad) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidArgument(format!("large-scale fading must be positive and finite, got {bad}")));
        }
        Ok(LsfMatrix(beta))
    }

    pub fn from_rows(num_aps: usize, num_users: usize, values: Vec<f64>) -> Result<Self> {
        let beta = Array2::from_shape_vec((num_aps, num_users), values)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(beta)
    }

    pub fn num_aps(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, ap: usize, user: usize) -> f64 {
        self.0[[ap, user]]
    }

    pub fn check_dims(&self, config: &SystemConfig) -> Result<()> {
        if self.num_aps() != config.num_aps || self.num_users() != config.num_users {
            return Err(Error::Dimension(format!(
                "beta is {}x{}, config expects {}x{}",
                self.num_aps(),
                self.num_users(),
                config.num_aps,
                config.num_users
            )));
        }
        Ok(())
    }
}

/// Path loss plus log-normal shadowing for every AP-user pair.
pub fn lsf_matrix(topology: &Topology, config: &SystemConfig, seed: u64) -> LsfMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (m, k) = (topology.ap_positions.len(), topology.user_positions.len());
    let beta = Array2::from_shape_fn((m, k), |(ap, user)| {
        let d = distance_km(topology.ap_positions[ap], topology.user_positions[user]);
        let z: f64 = rng.sample(StandardNormal);
        10f64.powf((path_loss_db(d, config) + config.sigma_sh_db * z) / 10.0)
    });
    LsfMatrix(beta)
}

/// LMMSE scaling `c`, estimate second moment `gamma`, and power control `eta`, all M x K.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub c: Array2<f64>,
    pub gamma: Array2<f64>,
    pub eta: Array2<f64>,
}

/// Channel statistics for a hard pilot assignment.
pub fn channel_stats(beta: &LsfMatrix, assignment: &PilotAssignment, config: &SystemConfig) -> Result<ChannelStats> {
    beta.check_dims(config)?;
    assignment.validate(config.num_users, config.num_pilots)?;
    let weights = crate::throughput::copilot_matrix(assignment).mapv(f64::from);
    channel_stats_weighted(beta, &weights, config)
}

/// Channel statistics where `weights[(j, k)]` is the pilot overlap between users j and k.
///
/// A 0/1 co-pilot matrix reproduces the hard-assignment statistics; a soft
/// overlap `q_j . q_k` gives the relaxed statistics.
pub(crate) fn channel_stats_weighted(beta: &LsfMatrix, weights: &Array2<f64>, config: &SystemConfig) -> Result<ChannelStats> {
    let (m, k) = beta.0.dim();
    if weights.dim() != (k, k) {
        return Err(Error::Dimension(format!("pilot overlap is {:?}, expected {k}x{k}", weights.dim())));
    }
    let snr = config.num_pilots as f64 * config.rho_p();
    let root = snr.sqrt();
    let b = &beta.0;
    let mut c = Array2::zeros((m, k));
    let mut gamma = Array2::zeros((m, k));
    for ap in 0..m {
        for user in 0..k {
            let contamination: f64 = (0..k).map(|j| weights[[j, user]] * b[[ap, j]]).sum();
            let c_mk = root * b[[ap, user]] / (snr * contamination + 1.0);
            c[[ap, user]] = c_mk;
            gamma[[ap, user]] = root * b[[ap, user]] * c_mk;
        }
    }
    let eta = power_control(&gamma, config.antennas_per_ap)?;
    Ok(ChannelStats { c, gamma, eta })
}

/// Uniform power control: `eta_mk = 1 / (L * sum_k' gamma_mk')` for every user of AP m.
pub fn power_control(gamma: &Array2<f64>, antennas_per_ap: usize) -> Result<Array2<f64>> {
    let mut eta = Array2::zeros(gamma.dim());
    for (ap, row) in gamma.outer_iter().enumerate() {
        let total: f64 = row.sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument(format!("AP {ap} has no usable channel estimate (sum gamma = {total})")));
        }
        eta.row_mut(ap).fill(1.0 / (antennas_per_ap as f64 * total));
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn noise_power_at_default_bandwidth() {
        let cfg = SystemConfig::default();
        let p = noise_power(&cfg);
        // 1.380649e-23 * 290 * 2e7 * 10^0.9
        let expected = 1.380649e-23 * 290.0 * 2e7 * 7.943_282_347_242_815;
        assert!(close(p, expected, 1e-12));
        assert!(close(p, 6.36e-13, 1e-3));
        let dbm = 10.0 * (p * 1e3).log10();
        assert!((dbm + 91.97).abs() < 0.01, "{dbm}");
    }

    #[test]
    fn noise_power_unit_bandwidth_and_linearity() {
        let cfg = SystemConfig { bandwidth_hz: 1.0, noise_figure_db: 0.0, ..SystemConfig::default() };
        assert!(close(noise_power(&cfg), 4.004e-21, 1e-3));
        let doubled = SystemConfig { bandwidth_hz: 2.0, ..cfg.clone() };
        assert_eq!(noise_power(&doubled), 2.0 * noise_power(&cfg));
    }

    #[test]
    fn path_loss_branches() {
        let cfg = SystemConfig::default();
        assert!((path_loss_db(0.1, &cfg) + 106.0).abs() < 1e-12);
        let lower = -141.0 - 15.0 * 0.05f64.log10() - 20.0 * 0.05f64.log10();
        let upper = -141.0 - 35.0 * 0.05f64.log10();
        assert!((lower - upper).abs() < 1e-9);
        assert!((path_loss_db(0.05, &cfg) + 95.46).abs() < 0.01);
        assert!((path_loss_db(0.01, &cfg) + 81.485).abs() < 0.001);
        assert_eq!(path_loss_db(0.0, &cfg), path_loss_db(0.005, &cfg));
    }

    #[test]
    fn path_loss_continuous_at_breakpoints() {
        let cfg = SystemConfig::default();
        for d in [cfg.d0_km, cfg.d1_km] {
            let left = path_loss_db(d, &cfg);
            let right = path_loss_db(d * (1.0 + 1e-13), &cfg);
            assert!((left - right).abs() < 1e-9, "jump at {d}: {left} vs {right}");
        }
    }

    #[test]
    fn topology_is_deterministic_and_inside_area() {
        let cfg = SystemConfig::default();
        let a = generate_topology(&cfg, 7);
        assert_eq!(a, generate_topology(&cfg, 7));
        assert_ne!(a, generate_topology(&cfg, 8));
        for p in a.ap_positions.iter().chain(&a.user_positions) {
            assert!((0.0..=1000.0).contains(&p[0]) && (0.0..=1000.0).contains(&p[1]));
        }
    }

    #[test]
    fn topology_mean_coordinate_is_centered() {
        let cfg = SystemConfig { num_aps: 1, num_users: 10_000, ..SystemConfig::default() };
        let topo = generate_topology(&cfg, 3);
        let n = topo.user_positions.len() as f64;
        let mean = topo.user_positions.iter().map(|p| p[0]).sum::<f64>() / n;
        // uniform on [0, 1000]: std = 1000/sqrt(12)
        let se = 1000.0 / 12f64.sqrt() / n.sqrt();
        assert!((mean - 500.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn no_shadowing_gives_pure_path_loss() {
        let cfg = SystemConfig { sigma_sh_db: 0.0, ..SystemConfig::default() };
        let topo = generate_topology(&cfg, 11);
        let beta = lsf_matrix(&topo, &cfg, 11);
        for ap in 0..cfg.num_aps {
            for user in 0..cfg.num_users {
                let d = distance_km(topo.ap_positions[ap], topo.user_positions[user]);
                assert_eq!(beta.get(ap, user), 10f64.powf(path_loss_db(d, &cfg) / 10.0));
            }
        }
    }

    #[test]
    fn shadowing_has_configured_spread() {
        let cfg = SystemConfig { num_aps: 50, num_users: 100, ..SystemConfig::default() };
        let topo = generate_topology(&cfg, 5);
        let beta = lsf_matrix(&topo, &cfg, 5);
        let mut residuals = Vec::new();
        for ap in 0..cfg.num_aps {
            for user in 0..cfg.num_users {
                let d = distance_km(topo.ap_positions[ap], topo.user_positions[user]);
                residuals.push(10.0 * beta.get(ap, user).log10() - path_loss_db(d, &cfg));
            }
        }
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let std = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 8.0).abs() < 0.3, "std {std}");
    }

    #[test]
    fn colocated_users_favor_their_ap() {
        let cfg = SystemConfig { sigma_sh_db: 0.0, ..SystemConfig::default() };
        let mut topo = generate_topology(&cfg, 2);
        let target = topo.ap_positions[4];
        topo.user_positions.iter_mut().for_each(|p| *p = target);
        let beta = lsf_matrix(&topo, &cfg, 2);
        for user in 0..cfg.num_users {
            for ap in 0..cfg.num_aps {
                assert!(beta.get(4, user) >= beta.get(ap, user));
            }
        }
    }

    #[test]
    fn single_user_gamma_closed_form() {
        let cfg = SystemConfig::with_dims(3, 2, 1, 1);
        let beta = LsfMatrix::from_rows(3, 1, vec![1e-12, 3e-11, 7e-13]).unwrap();
        let stats = channel_stats(&beta, &PilotAssignment::new(vec![0]), &cfg).unwrap();
        let a = cfg.num_pilots as f64 * cfg.rho_p();
        for ap in 0..3 {
            let b = beta.get(ap, 0);
            let expected = a * b * b / (a * b + 1.0);
            assert!(close(stats.gamma[[ap, 0]], expected, 1e-12));
            assert!(close(stats.eta[[ap, 0]], 1.0 / (2.0 * expected), 1e-12));
        }
    }

    #[test]
    fn lone_user_estimate_becomes_perfect_at_high_pilot_power() {
        let cfg = SystemConfig { pilot_power_mw: 1e12, ..SystemConfig::with_dims(2, 1, 2, 2) };
        let beta = LsfMatrix::from_rows(2, 2, vec![1e-10, 2e-10, 3e-10, 4e-10]).unwrap();
        let stats = channel_stats(&beta, &PilotAssignment::new(vec![0, 1]), &cfg).unwrap();
        for ap in 0..2 {
            for user in 0..2 {
                assert!(close(stats.gamma[[ap, user]], beta.get(ap, user), 1e-6));
            }
        }
    }

    #[test]
    fn invalid_assignment_rejected() {
        let cfg = SystemConfig::with_dims(2, 1, 2, 2);
        let beta = LsfMatrix::from_rows(2, 2, vec![1e-10; 4]).unwrap();
        assert!(channel_stats(&beta, &PilotAssignment::new(vec![0, 2]), &cfg).is_err());
        assert!(channel_stats(&beta, &PilotAssignment::new(vec![0]), &cfg).is_err());
    }

    #[test]
    fn power_control_rules() {
        let gamma = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 0.5, 0.25, 0.25]).unwrap();
        let eta = power_control(&gamma, 2).unwrap();
        for ap in 0..2 {
            let total: f64 = (0..3).map(|k| 2.0 * eta[[ap, k]] * gamma[[ap, k]]).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
        let scaled = power_control(&gamma.mapv(|g| 4.0 * g), 2).unwrap();
        for (a, b) in scaled.iter().zip(eta.iter()) {
            assert!(close(*a, b / 4.0, 1e-15));
        }
        let single = power_control(&Array2::from_elem((1, 1), 0.2), 3).unwrap();
        assert!(close(single[[0, 0]], 1.0 / 0.6, 1e-15));
        assert!(power_control(&Array2::zeros((1, 2)), 2).is_err());
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = SystemConfig { num_pilots: 0, ..SystemConfig::default() };
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "num_pilots"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SystemConfig { bandwidth_hz: -1.0, ..SystemConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(SystemConfig::default().validate().is_ok());
    }

    fn random_instance() -> impl Strategy<Value = (u64, Vec<usize>)> {
        (any::<u64>(), proptest::collection::vec(0usize..3, 6))
    }

    proptest! {
        #[test]
        fn path_loss_non_increasing(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let cfg = SystemConfig::default();
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(path_loss_db(near, &cfg) >= path_loss_db(far, &cfg) - 1e-12);
        }

        #[test]
        fn gamma_bounded_and_power_constraint_met((seed, pilots) in random_instance()) {
            let cfg = SystemConfig::default();
            let topo = generate_topology(&cfg, seed);
            let beta = lsf_matrix(&topo, &cfg, seed);
            let stats = channel_stats(&beta, &PilotAssignment::new(pilots), &cfg).unwrap();
            for ap in 0..cfg.num_aps {
                let mut total = 0.0;
                for user in 0..cfg.num_users {
                    let g = stats.gamma[[ap, user]];
                    prop_assert!(g > 0.0 && g <= beta.get(ap, user));
                    prop_assert!(stats.eta[[ap, user]] > 0.0);
                    total += cfg.antennas_per_ap as f64 * stats.eta[[ap, user]] * g;
                }
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn adding_copilot_never_raises_gamma((seed, pilots) in random_instance(), joiner in 1usize..6) {
            let cfg = SystemConfig::default();
            let topo = generate_topology(&cfg, seed);
            let beta = lsf_matrix(&topo, &cfg, seed);
            let before = channel_stats(&beta, &PilotAssignment::new(pilots.clone()), &cfg).unwrap();
            let mut moved = pilots.clone();
            moved[joiner] = pilots[0];
            let after = channel_stats(&beta, &PilotAssignment::new(moved), &cfg).unwrap();
            for ap in 0..cfg.num_aps {
                prop_assert!(after.gamma[[ap, 0]] <= before.gamma[[ap, 0]] * (1.0 + 1e-12));
            }
        }
    }
}

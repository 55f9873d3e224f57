//! Model-based pilot assigners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scenario::{LsfMatrix, SystemConfig, Topology};
use crate::throughput::{sum_rate, PilotAssignment};

/// Default cap on the number of canonical assignments exhaustive search will score.
pub const DEFAULT_SEARCH_LIMIT: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignerResult {
    pub assignment: PilotAssignment,
    pub sum_mbps: f64,
    /// Number of sum-rate evaluations spent.
    pub evaluations: u64,
}

/// Every user picks a pilot uniformly at random.
pub fn random_assignment(num_users: usize, num_pilots: usize, seed: u64) -> PilotAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PilotAssignment::new((0..num_users).map(|_| rng.random_range(0..num_pilots)).collect())
}

/// Max-min greedy refinement of a random start.
///
/// Each iteration moves the worst user to the pilot that maximizes its own
/// rate. The move is kept only if the minimum user rate strictly improves;
/// otherwise the search stops.
pub fn greedy_assignment(beta: &LsfMatrix, config: &SystemConfig, seed: u64, max_iters: usize) -> Result<AssignerResult> {
    let start = random_assignment(config.num_users, config.num_pilots, seed);
    greedy_from(beta, config, start, max_iters)
}

/// Greedy refinement from a given starting assignment.
pub fn greedy_from(
    beta: &LsfMatrix,
    config: &SystemConfig,
    start: PilotAssignment,
    max_iters: usize,
) -> Result<AssignerResult> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("greedy needs max_iters >= 1".into()));
    }
    let mut current = start;
    let mut report = sum_rate(beta, &current, config)?;
    let mut evaluations = 1;
    for _ in 0..max_iters {
        let worst = argmin(&report.per_user_mbps);
        let mut best_pilot = current.pilot_of[worst];
        let mut best_rate = report.per_user_mbps[worst];
        let mut best_report = None;
        for pilot in 0..config.num_pilots {
            if pilot == current.pilot_of[worst] {
                continue;
            }
            let mut trial = current.clone();
            trial.pilot_of[worst] = pilot;
            let r = sum_rate(beta, &trial, config)?;
            evaluations += 1;
            if r.per_user_mbps[worst] > best_rate {
                best_rate = r.per_user_mbps[worst];
                best_pilot = pilot;
                best_report = Some(r);
            }
        }
        match best_report {
            Some(r) if r.min_mbps() > report.min_mbps() => {
                current.pilot_of[worst] = best_pilot;
                report = r;
            }
            _ => break,
        }
    }
    Ok(AssignerResult { assignment: current, sum_mbps: report.sum_mbps, evaluations })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Master-AP assignment: users, strongest first, take the pilot least used
/// (in received power) at their master AP.
pub fn master_ap_assignment(beta: &LsfMatrix, num_pilots: usize) -> PilotAssignment {
    let (m, k) = beta.0.dim();
    let master: Vec<usize> = (0..k)
        .map(|user| {
            let mut best = 0;
            for ap in 1..m {
                if beta.get(ap, user) > beta.get(best, user) {
                    best = ap;
                }
            }
            best
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps the lower user index first on equal gains
    order.sort_by(|&a, &b| beta.get(master[b], b).total_cmp(&beta.get(master[a], a)));

    let mut pilot_of = vec![usize::MAX; k];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_pilots];
    for &user in &order {
        let ap = master[user];
        let load = |t: usize| members[t].iter().map(|&j| beta.get(ap, j)).sum::<f64>();
        let mut best = 0;
        let mut best_load = load(0);
        for t in 1..num_pilots {
            let l = load(t);
            if l < best_load {
                best = t;
                best_load = l;
            }
        }
        pilot_of[user] = best;
        members[best].push(user);
    }
    PilotAssignment::new(pilot_of)
}

/// Default number of location subsets for `num_pilots` pilots.
pub fn default_location_subsets(num_pilots: usize) -> usize {
    if num_pilots.is_multiple_of(4) {
        4
    } else if num_pilots.is_multiple_of(2) {
        2
    } else {
        1
    }
}

/// Grid-based assignment: the area is split into `subsets` equal cells,
/// each owning a disjoint block of pilots that its users take round-robin
/// in order of distance to the cell center.
pub fn location_based_assignment(
    topology: &Topology,
    config: &SystemConfig,
    subsets: usize,
) -> Result<PilotAssignment> {
    let tau = config.num_pilots;
    if subsets == 0 || !tau.is_multiple_of(subsets) {
        return Err(Error::InvalidArgument(format!("{subsets} subsets do not divide {tau} pilots")));
    }
    let (cols, rows) = if subsets == 2 {
        (2, 1)
    } else {
        let side = (subsets as f64).sqrt().round() as usize;
        if side * side != subsets {
            return Err(Error::InvalidArgument(format!("{subsets} subsets is neither 2 nor a perfect square")));
        }
        (side, side)
    };
    let block = tau / subsets;
    let area = config.area_side_m;
    let (cell_w, cell_h) = (area / cols as f64, area / rows as f64);

    let cell_of = |p: [f64; 2]| {
        let cx = ((p[0] / cell_w) as usize).min(cols - 1);
        let cy = ((p[1] / cell_h) as usize).min(rows - 1);
        (cx, cy)
    };
    let mut pilot_of = vec![0; topology.user_positions.len()];
    for cell in 0..subsets {
        let (cx, cy) = (cell % cols, cell / cols);
        let center = [(cx as f64 + 0.5) * cell_w, (cy as f64 + 0.5) * cell_h];
        let mut users: Vec<(f64, usize)> = topology
            .user_positions
            .iter()
            .enumerate()
            .filter(|(_, p)| cell_of(**p) == (cx, cy))
            .map(|(u, p)| (((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt(), u))
            .collect();
        users.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (rank, (_, user)) in users.into_iter().enumerate() {
            pilot_of[user] = cell * block + rank % block;
        }
    }
    Ok(PilotAssignment::new(pilot_of))
}

/// Number of assignments of `num_users` users to at most `num_pilots`
/// pilots up to pilot relabelling, `sum_{b <= tau} S(K, b)`.
pub fn canonical_count(num_users: usize, num_pilots: usize) -> u128 {
    // stirling[b] holds S(n, b) for the current n
    let mut stirling = vec![0u128; num_pilots + 1];
    stirling[0] = 1;
    for _ in 0..num_users {
        for b in (1..=num_pilots).rev() {
            stirling[b] = stirling[b].saturating_mul(b as u128).saturating_add(stirling[b - 1]);
        }
        stirling[0] = 0;
    }
    stirling.iter().fold(0u128, |acc, s| acc.saturating_add(*s))
}

/// Restricted growth strings of length `len` with values below `max_blocks`,
/// in lexicographic order.
#[derive(Debug, Clone)]
pub struct RestrictedGrowth {
    current: Vec<usize>,
    /// `prefix_max[i]` = max of `current[..=i]`
    prefix_max: Vec<usize>,
    max_blocks: usize,
    started: bool,
    done: bool,
}

impl RestrictedGrowth {
    pub fn new(len: usize, max_blocks: usize) -> Self {
        RestrictedGrowth {
            current: vec![0; len],
            prefix_max: vec![0; len],
            max_blocks,
            started: false,
            done: len == 0 || max_blocks == 0,
        }
    }

    fn advance(&mut self) -> bool {
        let n = self.current.len();
        for i in (1..n).rev() {
            let cap = (self.prefix_max[i - 1] + 1).min(self.max_blocks - 1);
            if self.current[i] < cap {
                self.current[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.current[i]);
                for j in i + 1..n {
                    self.current[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for RestrictedGrowth {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        Some(self.current.clone())
    }
}

/// Global optimum over canonical assignments (one representative per pilot relabelling class).
///
/// Ties go to the lexicographically smallest canonical assignment.
pub fn exhaustive_search(beta: &LsfMatrix, config: &SystemConfig, limit: u128) -> Result<AssignerResult> {
    let count = canonical_count(config.num_users, config.num_pilots);
    if count > limit {
        return Err(Error::SearchTooLarge { count, limit });
    }
    best_of(beta, config, RestrictedGrowth::new(config.num_users, config.num_pilots))
}

/// Reference optimum over all `tau_p^K` raw assignments.
pub fn exhaustive_search_raw(beta: &LsfMatrix, config: &SystemConfig, limit: u128) -> Result<AssignerResult> {
    let (k, tau) = (config.num_users, config.num_pilots);
    let count = (tau as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::SearchTooLarge { count, limit });
    }
    let raw = (0..count).map(|mut code| {
        let mut pilots = vec![0; k];
        for slot in pilots.iter_mut().rev() {
            *slot = (code % tau as u128) as usize;
            code /= tau as u128;
        }
        pilots
    });
    best_of(beta, config, raw)
}

fn best_of(beta: &LsfMatrix, config: &SystemConfig, candidates: impl Iterator<Item = Vec<usize>>) -> Result<AssignerResult> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluations = 0;
    for pilots in candidates {
        let rate = sum_rate(beta, &PilotAssignment::new(pilots.clone()), config)?.sum_mbps;
        evaluations += 1;
        if best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, pilots));
        }
    }
    let (sum_mbps, pilots) = best.ok_or_else(|| Error::InvalidArgument("no assignment to search".into()))?;
    Ok(AssignerResult { assignment: PilotAssignment::new(pilots), sum_mbps, evaluations })
}

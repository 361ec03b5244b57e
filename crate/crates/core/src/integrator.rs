//! Time evolution with annihilation.
//!
//! Between collisions the positions follow the interaction ODE, integrated
//! with an adaptive Dormand-Prince 5(4) pair. Opposite-sign neighbours close
//! in as `d^2 = d0^2 - 4 * coupling * t`, so the step is additionally capped
//! at a fraction of the time that law leaves before contact. Once a group of
//! alternating charges is closer than `cluster_gap` and still approaching,
//! the remaining time to contact is extrapolated from the decay rate of the
//! group's second moment and the group is merged at its centroid.

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::particles::{self, validate_state, ParticleError, ParticleState, Violation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegratorError {
    #[error("initial state is not admissible: {0:?}")]
    InvalidInitialState(Vec<Violation>),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("step size collapsed to {dt:e} at t = {time} without a collision in sight")]
    StepSizeUnderflow { time: f64, dt: f64 },
    #[error("cluster {cluster:?} does not alternate in sign; cluster_gap is too large")]
    NonAlternatingCluster { cluster: Vec<usize> },
    #[error("cluster {cluster:?} has net charge {net}")]
    NetChargeTooLarge { cluster: Vec<usize>, net: i64 },
    #[error(transparent)]
    Particle(#[from] ParticleError),
}

/// Failure of [`evolve`], carrying everything computed before it.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error} (after {} samples, {} events)", partial.samples.len(), partial.events.len())]
pub struct EvolveError {
    pub error: IntegratorError,
    pub partial: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Gap below which approaching opposite charges are merged. `None` means
    /// `1e-7` times the initial spread of charged particles.
    pub cluster_gap: Option<f64>,
    pub max_step: f64,
    pub t_end: f64,
    /// Fraction of the closed-form time-to-contact a single step may use.
    pub safety: f64,
    /// Times at which snapshots are recorded (in addition to the initial and
    /// final state and the states around each event).
    pub sample_times: Vec<f64>,
    /// Record every accepted step.
    pub record_steps: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            cluster_gap: None,
            max_step: 0.05,
            t_end: 1.0,
            safety: 0.25,
            sample_times: Vec::new(),
            record_steps: false,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        IntegratorConfig { t_end, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let positive = [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("max_step", self.max_step),
            ("safety", self.safety),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(IntegratorError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.safety >= 1.0 {
            return Err(IntegratorError::InvalidConfig("safety must be below 1".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(IntegratorError::InvalidConfig(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if let Some(g) = self.cluster_gap {
            if !(g > 0.0 && g.is_finite()) {
                return Err(IntegratorError::InvalidConfig(format!("cluster_gap must be positive, got {g}")));
            }
        }
        if self.sample_times.iter().any(|t| !t.is_finite()) {
            return Err(IntegratorError::InvalidConfig("sample_times must be finite".into()));
        }
        Ok(())
    }

    /// The merge threshold used for a run starting at `initial`.
    pub fn resolved_cluster_gap(&self, initial: &ParticleState) -> f64 {
        self.cluster_gap.unwrap_or_else(|| {
            let spread = initial.charged_spread();
            1e-7 * if spread > 0.0 { spread } else { 1.0 }
        })
    }
}

/// One annihilation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tau: f64,
    pub y: f64,
    /// Colliding particles, ordered by position.
    pub cluster: Vec<usize>,
    #[serde(rename = "pre")]
    pub pre_charges: Vec<i8>,
    #[serde(rename = "post")]
    pub post_charges: Vec<i8>,
}

impl EventRecord {
    pub fn net_charge_change(&self) -> i64 {
        self.post_charges.iter().zip(&self.pre_charges).map(|(&a, &b)| (a - b) as i64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Snapshots in non-decreasing time order.
    pub samples: Vec<ParticleState>,
    /// Events in non-decreasing time order.
    pub events: Vec<EventRecord>,
    pub config: IntegratorConfig,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time()).collect()
    }

    pub fn initial(&self) -> &ParticleState {
        &self.samples[0]
    }

    pub fn last(&self) -> &ParticleState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Sample taken exactly at `t`, if any (the last one when several match).
    pub fn sample_at(&self, t: f64) -> Option<&ParticleState> {
        self.samples.iter().rev().find(|s| s.time() == t)
    }
}

// Dormand-Prince 5(4) tableau. The field is autonomous, so the nodes are not
// needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive stepper that remembers its step-size suggestion between calls.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    config: &'a IntegratorConfig,
    suggested: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(config: &'a IntegratorConfig) -> Self {
        Stepper { config, suggested: config.max_step }
    }

    /// Collision-safe bound `safety * g^2 / (4 coupling)` for the smallest
    /// opposite-sign neighbour gap `g`.
    pub fn collision_cap(&self, state: &ParticleState) -> f64 {
        let g = state.opposite_sign_gap();
        self.config.safety * g * g / (4.0 * state.coupling())
    }

    /// Attempts a step of size `h`; returns new positions and the scaled
    /// error norm, or `None` if a stage left the admissible set.
    fn attempt(&self, state: &ParticleState, h: f64) -> Option<(Vec<f64>, f64)> {
        let n = state.n();
        let x0 = state.positions();
        let charges = state.charges();
        let gamma = state.coupling();
        let mut k = [(); 7].map(|_| vec![0.0; n]);
        let mut stage = vec![0.0; n];
        for s in 0..7 {
            if s == 6 {
                // FSAL stage: evaluated at the 5th-order solution.
                for i in 0..n {
                    stage[i] = x0[i] + h * (0..6).map(|j| B5[j] * k[j][i]).sum::<f64>();
                }
            } else {
                for i in 0..n {
                    stage[i] = x0[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
            }
            particles::velocity_field(&stage, charges, gamma, &mut k[s]).ok()?;
        }
        let mut next = vec![0.0; n];
        let mut err = 0.0f64;
        for i in 0..n {
            if charges[i] == 0 {
                next[i] = x0[i];
                continue;
            }
            let mut acc = CompensatedSum::new();
            for j in 0..6 {
                acc.add(B5[j] * k[j][i]);
            }
            next[i] = x0[i] + h * acc.value();
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let scale = self.config.abs_tol + self.config.rel_tol * x0[i].abs().max(next[i].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() || !charged_order_preserved(&next, charges) {
            return None;
        }
        Some((next, err))
    }

    /// One accepted step of size at most `dt_max`.
    pub fn step(
        &mut self,
        state: &ParticleState,
        dt_max: f64,
    ) -> Result<(ParticleState, f64), IntegratorError> {
        let t = state.time();
        let charged = state.charges().iter().filter(|&&b| b != 0).count();
        if charged < 2 {
            return Ok((state.with_positions(state.positions().to_vec(), t + dt_max), dt_max));
        }
        let cap = self.collision_cap(state).min(self.config.max_step);
        let mut h = self.suggested.min(dt_max).min(cap);
        loop {
            if !(h > 0.0) || t + h == t {
                return Err(IntegratorError::StepSizeUnderflow { time: t, dt: h });
            }
            match self.attempt(state, h) {
                Some((next, err)) if err <= 1.0 => {
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    self.suggested = (h * grow).min(self.config.max_step);
                    return Ok((state.with_positions(next, t + h), h));
                }
                Some((_, err)) => h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9),
                None => h *= 0.25,
            }
        }
    }

    pub fn reset(&mut self) {
        self.suggested = self.config.max_step;
    }
}

fn charged_order_preserved(positions: &[f64], charges: &[i8]) -> bool {
    let mut last: Option<f64> = None;
    for (x, &b) in positions.iter().zip(charges) {
        if b == 0 {
            continue;
        }
        if !x.is_finite() {
            return false;
        }
        if let Some(prev) = last {
            if *x <= prev {
                return false;
            }
        }
        last = Some(*x);
    }
    true
}

/// A single adaptive step with a fresh stepper.
pub fn step(
    state: &ParticleState,
    dt_max: f64,
    config: &IntegratorConfig,
) -> Result<(ParticleState, f64), IntegratorError> {
    Stepper::new(config).step(state, dt_max)
}

/// Groups of charged neighbours closer than `cluster_gap` that are still
/// closing in. Each group is returned ordered by position.
pub fn detect_cluster(state: &ParticleState, cluster_gap: f64) -> Result<Vec<Vec<usize>>, IntegratorError> {
    let idx = state.charged_indices();
    if idx.len() < 2 {
        return Ok(Vec::new());
    }
    let x = state.positions();
    let b = state.charges();
    let linked: Vec<bool> = idx
        .windows(2)
        .map(|w| x[w[1]] - x[w[0]] < cluster_gap)
        .collect();
    if !linked.iter().any(|&l| l) {
        return Ok(Vec::new());
    }
    let v = particles::velocities(state)?;
    let mut clusters = Vec::new();
    let mut current: Vec<usize> = vec![idx[0]];
    for (k, w) in idx.windows(2).enumerate() {
        let approaching = v[w[1]] - v[w[0]] < 0.0;
        if linked[k] && approaching {
            current.push(w[1]);
        } else {
            if current.len() > 1 {
                clusters.push(std::mem::take(&mut current));
            }
            current = vec![w[1]];
        }
    }
    if current.len() > 1 {
        clusters.push(current);
    }
    for cluster in &clusters {
        if cluster.windows(2).any(|w| b[w[0]] == b[w[1]]) {
            return Err(IntegratorError::NonAlternatingCluster { cluster: cluster.clone() });
        }
    }
    Ok(clusters)
}

/// Merges `cluster` at its centroid.
///
/// The returned state keeps the current time; the record's `tau` adds the
/// extrapolated time to contact `M / B`, where `M = 1/2 sum (x_j - y)^2` and
/// `B = coupling/2 * (|I| - (sum b_j)^2)` is the second-moment decay rate of
/// the group. Non-cluster particles are not advanced by this function.
pub fn resolve_annihilation(
    state: &ParticleState,
    cluster: &[usize],
) -> Result<(ParticleState, EventRecord), IntegratorError> {
    let x = state.positions();
    let b = state.charges();
    let net: i64 = cluster.iter().map(|&i| b[i] as i64).sum();
    if net.abs() > 1 || cluster.len() < 2 {
        return Err(IntegratorError::NetChargeTooLarge { cluster: cluster.to_vec(), net });
    }
    let y = cluster.iter().map(|&i| x[i]).collect::<CompensatedSum>().value() / cluster.len() as f64;
    let second_moment = 0.5 * cluster.iter().map(|&i| (x[i] - y) * (x[i] - y)).collect::<CompensatedSum>().value();
    let decay = 0.5 * state.coupling() * (cluster.len() as f64 - (net * net) as f64);
    let tau = state.time() + second_moment / decay;

    let survivor = (net != 0).then(|| {
        cluster
            .iter()
            .copied()
            .filter(|&i| b[i] as i64 == net)
            .min_by(|&p, &q| (x[p] - y).abs().total_cmp(&(x[q] - y).abs()).then(p.cmp(&q)))
            .expect("an alternating cluster with nonzero net charge has a matching member")
    });

    let mut positions = x.to_vec();
    let mut charges = b.to_vec();
    for &i in cluster {
        positions[i] = y;
        charges[i] = if Some(i) == survivor { net as i8 } else { 0 };
    }
    let record = EventRecord {
        tau,
        y,
        cluster: cluster.to_vec(),
        pre_charges: cluster.iter().map(|&i| b[i]).collect(),
        post_charges: cluster.iter().map(|&i| charges[i]).collect(),
    };
    let next = state.with_positions(positions, state.time()).with_charges(charges);
    Ok((next, record))
}

/// Integrates from `initial` to `config.t_end`, resolving every collision.
pub fn evolve(initial: &ParticleState, config: &IntegratorConfig) -> Result<Trajectory, Box<EvolveError>> {
    let mut traj = Trajectory { samples: Vec::new(), events: Vec::new(), config: config.clone() };
    let fail = |error: IntegratorError, traj: Trajectory| Box::new(EvolveError { error, partial: traj });
    if let Err(e) = config.validate() {
        return Err(fail(e, traj));
    }
    if let Err(v) = validate_state(initial) {
        return Err(fail(IntegratorError::InvalidInitialState(v), traj));
    }
    let cluster_gap = config.resolved_cluster_gap(initial);
    let t_end = config.t_end.max(initial.time());

    let mut sample_times: Vec<f64> =
        config.sample_times.iter().copied().filter(|&t| t > initial.time() && t <= t_end).collect();
    sample_times.sort_by(f64::total_cmp);
    sample_times.dedup();
    let mut next_sample = 0usize;

    let mut stepper = Stepper::new(config);
    let mut state = initial.clone();
    traj.samples.push(state.clone());

    while state.time() < t_end {
        let clusters = match detect_cluster(&state, cluster_gap) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, traj)),
        };
        if !clusters.is_empty() {
            traj.samples.push(state.clone());
            let mut records = Vec::with_capacity(clusters.len());
            for cluster in &clusters {
                match resolve_annihilation(&state, cluster) {
                    Ok((next, rec)) => {
                        state = next;
                        records.push(rec);
                    }
                    Err(e) => return Err(fail(e, traj)),
                }
            }
            records.sort_by(|a, b| a.tau.total_cmp(&b.tau));
            let contact = records.last().map(|r| r.tau).unwrap_or(state.time()).min(t_end);
            stepper.reset();
            while state.time() < contact {
                match stepper.step(&state, contact - state.time()) {
                    Ok((next, _)) => state = next,
                    Err(e) => return Err(fail(e, traj)),
                }
            }
            state = state.clone().at_time(contact);
            traj.events.extend(records);
            traj.samples.push(state.clone());
            while next_sample < sample_times.len() && sample_times[next_sample] <= state.time() {
                next_sample += 1;
            }
            stepper.reset();
            continue;
        }

        let target = sample_times.get(next_sample).copied().unwrap_or(t_end).min(t_end);
        let (next, dt) = match stepper.step(&state, target - state.time()) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, traj)),
        };
        let landed = dt == target - state.time();
        state = if landed { next.at_time(target) } else { next };
        let on_sample = next_sample < sample_times.len() && state.time() >= sample_times[next_sample];
        if on_sample {
            while next_sample < sample_times.len() && sample_times[next_sample] <= state.time() {
                next_sample += 1;
            }
        }
        if config.record_steps || on_sample || state.time() >= t_end {
            traj.samples.push(state.clone());
        }
    }
    if traj.last().time() != state.time() {
        traj.samples.push(state);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(d0: f64, b: [i8; 2]) -> ParticleState {
        ParticleState::new(vec![0.0, d0], b.to_vec()).unwrap()
    }

    #[test]
    fn single_step_follows_gap_law() {
        let cfg = IntegratorConfig::default();
        for (b, sign) in [([1, 1], 1.0), ([1, -1], -1.0)] {
            let s = pair(1.0, b);
            let (next, dt) = step(&s, 0.01, &cfg).unwrap();
            let gap = next.positions()[1] - next.positions()[0];
            let expected = (1.0 + sign * 2.0 * dt).sqrt();
            assert!((gap - expected).abs() < 1e-10, "{gap} vs {expected}");
        }
    }

    #[test]
    fn neutral_state_does_not_move() {
        let s = ParticleState::new(vec![0.0, 1.0, 3.0], vec![0, 0, 1]).unwrap();
        let (next, dt) = step(&s, 0.3, &IntegratorConfig::default()).unwrap();
        assert_eq!(dt, 0.3);
        assert_eq!(next.positions(), s.positions());
    }

    #[test]
    fn step_respects_collision_cap() {
        let cfg = IntegratorConfig::default();
        let s = pair(1e-3, [1, -1]);
        let (_, dt) = step(&s, 1.0, &cfg).unwrap();
        assert!(dt <= cfg.safety * 1e-6 / 2.0 * (1.0 + 1e-12));
    }

    #[test]
    fn detect_cluster_examples() {
        let s = ParticleState::new(vec![0.0, 1e-9, 1.0], vec![1, -1, 1]).unwrap();
        assert_eq!(detect_cluster(&s, 1e-7).unwrap(), vec![vec![0, 1]]);

        let s = ParticleState::new(vec![-1e-9, 0.0, 1e-9], vec![1, -1, 1]).unwrap();
        assert_eq!(detect_cluster(&s, 1e-7).unwrap(), vec![vec![0, 1, 2]]);

        // equal charges separate, so they are never linked
        let s = ParticleState::new(vec![0.0, 1e-9], vec![1, 1]).unwrap();
        assert!(detect_cluster(&s, 1e-7).unwrap().is_empty());
    }

    #[test]
    fn detect_cluster_rejects_equal_signs_pushed_together() {
        // The inner pair of + charges is squeezed by close outer + charges;
        // a gap threshold this large links them.
        let s = ParticleState::new(vec![0.0, 1e-3, 1.0, 1.001], vec![1, 1, 1, 1]).unwrap();
        let err = detect_cluster(&s, 1.0).unwrap_err();
        assert!(matches!(err, IntegratorError::NonAlternatingCluster { .. }));
    }

    #[test]
    fn pair_annihilation() {
        let s = pair(1e-9, [1, -1]);
        let (next, rec) = resolve_annihilation(&s, &[0, 1]).unwrap();
        assert_eq!(next.charges(), &[0, 0]);
        assert_eq!(next.positions(), &[5e-10, 5e-10]);
        assert_eq!(rec.y, 5e-10);
        assert_eq!(rec.net_charge_change(), 0);
        // gap^2 / (4 coupling) with coupling 1/2
        assert!((rec.tau - 1e-18 / 2.0).abs() < 1e-30);
    }

    #[test]
    fn triple_annihilation_leaves_one_survivor() {
        let s = ParticleState::new(vec![-1e-9, 0.0, 1e-9], vec![1, -1, 1]).unwrap();
        let (next, rec) = resolve_annihilation(&s, &[0, 1, 2]).unwrap();
        assert_eq!(rec.pre_charges, vec![1, -1, 1]);
        assert_eq!(rec.post_charges.iter().filter(|&&c| c != 0).count(), 1);
        // equidistant survivors: smallest index wins
        assert_eq!(next.charges(), &[1, 0, 0]);
        assert_eq!(next.positions(), &[0.0, 0.0, 0.0]);
        assert_eq!(rec.net_charge_change(), 0);
    }

    #[test]
    fn net_charge_guard() {
        let s = ParticleState::new(vec![0.0, 1e-9, 2e-9], vec![1, 1, 1]).unwrap();
        assert!(matches!(
            resolve_annihilation(&s, &[0, 1, 2]),
            Err(IntegratorError::NetChargeTooLarge { net: 3, .. })
        ));
    }

    #[test]
    fn evolve_pair_collides_on_schedule() {
        let a = 0.7;
        let s = ParticleState::new(vec![-a, a], vec![1, -1]).unwrap();
        let traj = evolve(&s, &IntegratorConfig::with_t_end(2.0)).unwrap();
        assert_eq!(traj.events.len(), 1);
        let tau = traj.events[0].tau;
        assert!((tau - 2.0 * a * a).abs() <= 1e-6 * 2.0 * a * a, "tau = {tau}");
        assert_eq!(traj.last().charges(), &[0, 0]);
        assert_eq!(traj.last().time(), 2.0);
    }

    #[test]
    fn evolve_single_charge_is_static() {
        let s = ParticleState::new(vec![-1.0, 0.0, 2.0], vec![0, 1, 0]).unwrap();
        let traj = evolve(&s, &IntegratorConfig::with_t_end(1.0)).unwrap();
        assert!(traj.samples.iter().all(|p| p.positions() == s.positions()));
        assert!(traj.events.is_empty());
    }

    #[test]
    fn evolve_three_lattice_matches_equality_case() {
        // n = 3, unit lattice of + charges: d^2 = 1 + t exactly.
        let s = ParticleState::new(vec![1.0, 2.0, 3.0], vec![1, 1, 1]).unwrap();
        let cfg = IntegratorConfig {
            sample_times: (1..=10).map(|k| k as f64).collect(),
            ..IntegratorConfig::with_t_end(10.0)
        };
        let traj = evolve(&s, &cfg).unwrap();
        for p in &traj.samples {
            let d = p.equal_sign_gap(1);
            assert!((d * d - (1.0 + p.time())).abs() < 1e-8);
        }
    }

    #[test]
    fn evolve_records_requested_samples() {
        let s = ParticleState::new(vec![0.0, 1.0, 2.5], vec![1, -1, 1]).unwrap();
        let cfg = IntegratorConfig { sample_times: vec![0.1, 0.2, 0.3], ..IntegratorConfig::with_t_end(0.3) };
        let traj = evolve(&s, &cfg).unwrap();
        for t in [0.0, 0.1, 0.2, 0.3] {
            assert!(traj.sample_at(t).is_some(), "missing {t}");
        }
    }

    #[test]
    fn evolve_rejects_inadmissible_start() {
        let s = ParticleState::new(vec![1.0, 1.0], vec![1, -1]).unwrap();
        let err = evolve(&s, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err.error, IntegratorError::InvalidInitialState(_)));
    }

    #[test]
    fn config_validation() {
        let bad = IntegratorConfig { safety: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { abs_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }
}

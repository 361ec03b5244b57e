//! Level-set description of a particle configuration.
//!
//! A state is encoded as the right-continuous step function
//! `u(x) = base + eps * sum_i b_i H(x - x_i)` with `H(0) = 1`. Jumps are kept
//! as integer multiples of `eps` so that level arithmetic is exact.

use serde::{Deserialize, Serialize};

use crate::integrator::{evolve, IntegratorConfig, Trajectory};
use crate::numeric::CompensatedSum;
use crate::particles::ParticleState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LevelSetError {
    #[error("level spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("jump location {0} is not finite")]
    NonFiniteJump(f64),
    #[error("jump index {index} out of range for {len} jumps")]
    JumpIndexOutOfRange { index: usize, len: usize },
    #[error("{x} is not a jump location")]
    NotAtJump { x: f64 },
    #[error("radius {rho} is not below the distance {distance} to the nearest other jump")]
    JumpTooClose { rho: f64, distance: f64 },
    #[error("principal value diverges at a jump of {count} levels")]
    DivergentPrincipalValue { count: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    locations: Vec<f64>,
    counts: Vec<i64>,
    base: f64,
    eps: f64,
}

impl StepFunction {
    /// Builds from `(location, count)` pairs; coincident locations are merged
    /// and zero jumps dropped.
    pub fn new(base: f64, eps: f64, jumps: impl IntoIterator<Item = (f64, i64)>) -> Result<Self, LevelSetError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(LevelSetError::InvalidSpacing(eps));
        }
        let mut jumps: Vec<(f64, i64)> = jumps.into_iter().collect();
        if let Some(&(x, _)) = jumps.iter().find(|(x, _)| !x.is_finite()) {
            return Err(LevelSetError::NonFiniteJump(x));
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(jumps.len());
        let mut counts: Vec<i64> = Vec::with_capacity(jumps.len());
        for (x, c) in jumps {
            if locations.last() == Some(&x) {
                *counts.last_mut().unwrap() += c;
            } else {
                locations.push(x);
                counts.push(c);
            }
        }
        let (locations, counts) = locations.into_iter().zip(counts).filter(|&(_, c)| c != 0).unzip();
        Ok(StepFunction { locations, counts, base, eps })
    }

    pub fn constant(base: f64, eps: f64) -> Result<Self, LevelSetError> {
        Self::new(base, eps, std::iter::empty())
    }

    /// `u_n` of a particle state; the level spacing is the state's coupling.
    pub fn from_particles(state: &ParticleState) -> Self {
        Self::from_particles_with_base(state, 0.0)
    }

    pub fn from_particles_with_base(state: &ParticleState, base: f64) -> Self {
        let jumps = state
            .positions()
            .iter()
            .zip(state.charges())
            .filter(|(_, &b)| b != 0)
            .map(|(&x, &b)| (x, b as i64));
        Self::new(base, state.coupling(), jumps).expect("a valid state yields a valid step function")
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    fn value_of(&self, level: i64) -> f64 {
        self.base + self.eps * level as f64
    }

    /// Integer level at `x` (right limit), i.e. `(u(x) - base) / eps`.
    pub fn level(&self, x: f64) -> i64 {
        let k = self.locations.partition_point(|&p| p <= x);
        self.counts[..k].iter().sum()
    }

    /// Integer level just left of `x`.
    pub fn level_left(&self, x: f64) -> i64 {
        let k = self.locations.partition_point(|&p| p < x);
        self.counts[..k].iter().sum()
    }

    /// `u(x)` with the right-continuous convention `H(0) = 1`.
    pub fn eval(&self, x: f64) -> f64 {
        self.value_of(self.level(x))
    }

    pub fn left_limit(&self, x: f64) -> f64 {
        self.value_of(self.level_left(x))
    }

    /// Upper semicontinuous envelope `u^*`.
    pub fn upper(&self, x: f64) -> f64 {
        self.value_of(self.level(x).max(self.level_left(x)))
    }

    /// Lower semicontinuous envelope `u_*`.
    pub fn lower(&self, x: f64) -> f64 {
        self.value_of(self.level(x).min(self.level_left(x)))
    }

    /// Values on `(-inf, x_0)`, `[x_0, x_1)`, ..., `[x_last, inf)`.
    pub fn piece_values(&self) -> Vec<f64> {
        let mut level = 0;
        let mut out = vec![self.base];
        for &c in &self.counts {
            level += c;
            out.push(self.value_of(level));
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.piece_values().into_iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn total_variation(&self) -> f64 {
        self.eps * self.counts.iter().map(|c| c.abs()).sum::<i64>() as f64
    }

    /// Value at `+inf`.
    pub fn right_tail(&self) -> f64 {
        *self.piece_values().last().unwrap()
    }

    /// Distance from jump `i` to the nearest other jump (infinite if alone).
    pub fn isolation(&self, i: usize) -> f64 {
        let left = if i > 0 { self.locations[i] - self.locations[i - 1] } else { f64::INFINITY };
        let right = self.locations.get(i + 1).map_or(f64::INFINITY, |&r| r - self.locations[i]);
        left.min(right)
    }

    /// Half the distance to the nearest other jump, or 1 for a lone jump.
    pub fn default_rho(&self, i: usize) -> f64 {
        let d = self.isolation(i);
        if d.is_finite() {
            0.5 * d
        } else {
            1.0
        }
    }

    fn check_index(&self, i: usize) -> Result<(), LevelSetError> {
        if i >= self.len() {
            return Err(LevelSetError::JumpIndexOutOfRange { index: i, len: self.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    Upper,
    Lower,
}

/// Quantized identity: `eps * (floor(alpha/eps) + 1/2)` (upper) or
/// `eps * ceil(alpha/eps) - eps/2` (lower).
pub fn staircase(alpha: f64, eps: f64, variant: Envelope) -> f64 {
    let r = alpha / eps;
    match variant {
        Envelope::Upper => eps * (r.floor() + 0.5),
        Envelope::Lower => eps * r.ceil() - 0.5 * eps,
    }
}

/// `-eps * sum_{j != i} c_j / (x_i - x_j)` at jump `i`.
pub fn nonlocal_operator_closed_form(u: &StepFunction, at_jump: usize) -> Result<f64, LevelSetError> {
    u.check_index(at_jump)?;
    let xi = u.locations[at_jump];
    let sum: CompensatedSum = u
        .locations
        .iter()
        .zip(&u.counts)
        .enumerate()
        .filter(|&(j, _)| j != at_jump)
        .map(|(_, (&xj, &c))| c as f64 / (xi - xj))
        .collect();
    Ok(-u.eps * sum.value())
}

/// Near (`|z| < rho`) and far contributions to the operator at a jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParts {
    pub near: f64,
    pub far: f64,
}

impl OperatorParts {
    pub fn total(&self) -> f64 {
        self.near + self.far
    }
}

/// `pv int E*(u^*(x+z) - u^*(x)) dz / z^2`, split at `rho`.
///
/// The integrand only takes values `eps * (k + 1/2)` for integers `k` and
/// changes only at jumps, so every piece integrates in closed form. Inside
/// `rho` the two sides are `+-eps/2` and cancel in the principal value.
pub fn operator_parts(u: &StepFunction, x: f64, rho: f64) -> Result<OperatorParts, LevelSetError> {
    let i = u.locations.iter().position(|&p| p == x).ok_or(LevelSetError::NotAtJump { x })?;
    let distance = u.isolation(i);
    if !(rho > 0.0 && rho < distance) {
        return Err(LevelSetError::JumpTooClose { rho, distance });
    }
    let left_level: i64 = u.counts[..i].iter().sum();
    let right_level = left_level + u.counts[i];
    let star = left_level.max(right_level);
    if (right_level - left_level).abs() != 1 {
        return Err(LevelSetError::DivergentPrincipalValue { count: right_level - left_level });
    }
    let height = |level: i64| u.eps * ((level - star) as f64 + 0.5);

    let mut far = CompensatedSum::new();
    // right side: pieces [lo, hi) in z > 0
    let mut level = right_level;
    let mut lo = rho;
    for j in i + 1..u.len() {
        let hi = u.locations[j] - x;
        far.add(height(level) * (1.0 / lo - 1.0 / hi));
        level += u.counts[j];
        lo = hi;
    }
    far.add(height(level) / lo);
    // left side: |z| in [lo, hi)
    let mut level = left_level;
    let mut lo = rho;
    for j in (0..i).rev() {
        let hi = x - u.locations[j];
        far.add(height(level) * (1.0 / lo - 1.0 / hi));
        level -= u.counts[j];
        lo = hi;
    }
    far.add(height(level) / lo);
    Ok(OperatorParts { near: 0.0, far: far.value() })
}

pub fn nonlocal_operator_quadrature(u: &StepFunction, x: f64, rho: f64) -> Result<f64, LevelSetError> {
    operator_parts(u, x, rho).map(|p| p.total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub time: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub checked: Vec<ResidualEntry>,
    /// Requested times that were skipped because an event is too close or
    /// no snapshot exists there.
    pub skipped: Vec<f64>,
}

/// Compares crossing velocities against `-b_i * M[u](x_i)`.
///
/// For every requested time that has a snapshot in `traj`, the crossings are
/// advanced by `delta` and `2 delta` with the trajectory's own integrator
/// settings and differentiated with a second-order one-sided difference; the
/// operator is evaluated by [`nonlocal_operator_quadrature`] on the step
/// function of the snapshot.
pub fn hje_residual(traj: &Trajectory, sample_times: &[f64], delta: f64) -> ResidualReport {
    let mut report = ResidualReport { max_residual: 0.0, checked: Vec::new(), skipped: Vec::new() };
    for &t in sample_times {
        match residual_at(traj, t, delta) {
            Some(r) => {
                report.max_residual = report.max_residual.max(r);
                report.checked.push(ResidualEntry { time: t, residual: r });
            }
            None => report.skipped.push(t),
        }
    }
    report
}

fn residual_at(traj: &Trajectory, t: f64, delta: f64) -> Option<f64> {
    let state = traj.sample_at(t)?;
    if traj.events.iter().any(|e| (e.tau - t).abs() <= 4.0 * delta) {
        return None;
    }
    let cfg = IntegratorConfig {
        t_end: t + 2.0 * delta,
        sample_times: vec![t + delta],
        record_steps: false,
        ..traj.config.clone()
    };
    let local = evolve(state, &cfg).ok()?;
    if !local.events.is_empty() {
        return None;
    }
    let x1 = local.sample_at(t + delta)?.positions();
    let x2 = local.sample_at(t + 2.0 * delta)?.positions();
    let x0 = state.positions();
    let u = StepFunction::from_particles(state);
    let mut worst = 0.0f64;
    for i in state.charged_indices() {
        let dxdt = (-3.0 * x0[i] + 4.0 * x1[i] - x2[i]) / (2.0 * delta);
        let j = u.locations.iter().position(|&p| p == x0[i])?;
        let m = nonlocal_operator_quadrature(&u, x0[i], u.default_rho(j)).ok()?;
        worst = worst.max((dxdt + state.charges()[i] as f64 * m).abs());
    }
    Some(worst)
}

/// Velocity `-b_i M[u](x_i)` for every charged particle, via the closed form.
/// Neutral particles get zero.
pub fn velocities_from_operator(state: &ParticleState) -> Vec<f64> {
    let u = StepFunction::from_particles(state);
    let mut out = vec![0.0; state.n()];
    for (k, &i) in state.charged_indices().iter().enumerate() {
        let m = nonlocal_operator_closed_form(&u, k).expect("index in range");
        out[i] = -(state.charges()[i] as f64) * m;
    }
    out
}

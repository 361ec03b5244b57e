//! Explicit monotone solver for `u_t = I[u] |u_x|`, where
//! `I[u](x) = pv int (u(x+z) - u(x)) dz / z^2`.
//!
//! The grid covers `[-L, L]` and `u` is extended by its constant tails beyond
//! it. The operator is split at `rho = m h`. The near part integrates the
//! second difference `(u(x+z) + u(x-z) - 2u(x)) / z^2` with the trapezoid
//! rule; the far part integrates cellwise constant data against exact cell
//! integrals of `1/z^2`, with the analytic remainder taken by the tails. The
//! gradient is upwinded in the direction of the normal velocity, so under
//! the step restriction of [`stable_dt`] the update is nondecreasing in every
//! nodal value.

use serde::{Deserialize, Serialize};

use crate::exec::{map_range, Execution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HjError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("time step {dt:e} exceeds the stable limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("grids differ in shape")]
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    half_width: f64,
    h: f64,
    values: Vec<f64>,
    tails: (f64, f64),
    time: f64,
}

impl GridFunction {
    pub fn new(half_width: f64, h: f64, values: Vec<f64>, tails: (f64, f64), time: f64) -> Result<Self, HjError> {
        let cells = cell_count(half_width, h)?;
        if values.len() != cells + 1 {
            return Err(HjError::InvalidGrid(format!("expected {} values, got {}", cells + 1, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) || !tails.0.is_finite() || !tails.1.is_finite() {
            return Err(HjError::InvalidGrid("values must be finite".into()));
        }
        Ok(GridFunction { half_width, h, values, tails, time })
    }

    /// Samples `f` on the grid; the tails are the boundary values.
    pub fn from_fn(f: impl Fn(f64) -> f64, half_width: f64, h: f64) -> Result<Self, HjError> {
        let cells = cell_count(half_width, h)?;
        let values: Vec<f64> = (0..=cells).map(|i| f(-half_width + i as f64 * h)).collect();
        let tails = (values[0], values[cells]);
        Self::new(half_width, h, values, tails, 0.0)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tails(&self) -> (f64, f64) {
        self.tails
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Value at (possibly out-of-grid) index `i`.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        if i < 0 {
            self.tails.0
        } else if i as usize >= self.values.len() {
            self.tails.1
        } else {
            self.values[i as usize]
        }
    }

    /// Piecewise-linear interpolation, constant tails outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x + self.half_width) / self.h;
        let last = self.values.len() - 1;
        if s < 0.0 {
            return self.tails.0;
        }
        if s >= last as f64 {
            return if s == last as f64 { self.values[last] } else { self.tails.1 };
        }
        let k = s.floor() as usize;
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(self.tails.0.abs().max(self.tails.1.abs()), |m, v| m.max(v.abs()))
    }

    /// `max |u_{i+1} - u_i| / h`, including the steps into the tails.
    pub fn lipschitz(&self) -> f64 {
        let n = self.values.len() as isize;
        (-1..n).map(|i| (self.at(i + 1) - self.at(i)).abs()).fold(0.0, f64::max) / self.h
    }

    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Self {
        GridFunction { values, time, ..self.clone() }
    }

    fn same_shape(&self, other: &GridFunction) -> bool {
        self.values.len() == other.values.len() && self.h == other.h && self.half_width == other.half_width
    }
}

fn cell_count(half_width: f64, h: f64) -> Result<usize, HjError> {
    if !(half_width > 0.0 && half_width.is_finite() && h > 0.0 && h.is_finite()) {
        return Err(HjError::InvalidGrid(format!("need L > 0 and h > 0, got L = {half_width}, h = {h}")));
    }
    let cells = (2.0 * half_width / h).round();
    if (cells * h - 2.0 * half_width).abs() > 1e-9 * half_width || cells < 2.0 {
        return Err(HjError::InvalidGrid(format!("h = {h} does not divide 2L = {}", 2.0 * half_width)));
    }
    Ok(cells as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Domain half-width `L`.
    pub half_width: f64,
    pub h: f64,
    /// Near/far split radius in cells, `rho = rho_cells * h`.
    pub rho_cells: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub execution: Execution,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            half_width: 4.0,
            h: 1.0 / 64.0,
            rho_cells: 4,
            cfl: 0.9,
            t_end: 1.0,
            snapshot_times: Vec::new(),
            execution: Execution::default(),
        }
    }
}

impl SchemeConfig {
    pub fn rho(&self) -> f64 {
        self.rho_cells as f64 * self.h
    }

    pub fn validate(&self) -> Result<(), HjError> {
        cell_count(self.half_width, self.h)?;
        if self.rho_cells < 2 {
            return Err(HjError::InvalidConfig(format!("rho_cells must be at least 2, got {}", self.rho_cells)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(HjError::InvalidConfig(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(HjError::InvalidConfig(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            return Err(HjError::InvalidConfig("snapshot_times must be finite".into()));
        }
        Ok(())
    }
}

/// Trapezoid approximation of `int_{|z|<rho} (u(x+z) - u(x) - u'(x) z) / z^2 dz`
/// at node `i`, `rho = m h`. The value at `z = 0` is the second difference.
pub fn near_field(u: &GridFunction, i: usize, m: usize) -> f64 {
    let h = u.h;
    let c = i as isize;
    let ui = u.values[i];
    let s = |k: usize| u.at(c + k as isize) + u.at(c - k as isize) - 2.0 * ui;
    let mut acc = 0.5 * s(1);
    for k in 1..m {
        acc += s(k) / (k * k) as f64;
    }
    acc += 0.5 * s(m) / (m * m) as f64;
    acc / h
}

/// `int_{|z|>rho} (u(x+z) - u(x)) dz / z^2` at node `i` for cellwise constant
/// data.
///
/// Every node sums the same offsets `m..=K`, with `K` the number of grid
/// nodes, reading tail values off the grid; the exact remainder beyond `K`
/// goes to the tails. Using the same terms in the same order everywhere makes
/// the operator exactly translation equivariant.
pub fn far_field(u: &GridFunction, i: usize, m: usize) -> f64 {
    let h = u.h;
    let ui = u.values[i];
    let c = i as isize;
    let reach = u.values.len().max(m);
    let mut acc = 0.0;
    let first = 1.0 / (m as f64 * h) - 1.0 / ((m as f64 + 0.5) * h);
    acc += first * ((u.at(c + m as isize) - ui) + (u.at(c - m as isize) - ui));
    for k in m + 1..=reach {
        let w = 1.0 / ((k as f64 - 0.5) * h) - 1.0 / ((k as f64 + 0.5) * h);
        acc += w * ((u.at(c + k as isize) - ui) + (u.at(c - k as isize) - ui));
    }
    let remainder = 1.0 / ((reach as f64 + 0.5) * h);
    acc + remainder * ((u.tails.1 - ui) + (u.tails.0 - ui))
}

pub fn levy_operator(u: &GridFunction, i: usize, m: usize) -> f64 {
    near_field(u, i, m) + far_field(u, i, m)
}

pub fn levy_operator_all(u: &GridFunction, m: usize, exec: Execution) -> Vec<f64> {
    map_range(exec, u.len(), |i| levy_operator(u, i, m))
}

/// Sum of the magnitudes of the operator's stencil weights on `u_i`.
fn operator_diagonal(h: f64, m: usize) -> f64 {
    let near: f64 = 1.0 + 2.0 * (1..m).map(|k| 1.0 / (k * k) as f64).sum::<f64>() + 1.0 / (m * m) as f64;
    near / h + 2.0 / (m as f64 * h)
}

fn upwind(u: &GridFunction, i: usize, v: f64) -> f64 {
    let c = i as isize;
    let dp = (u.at(c + 1) - u.values[i]) / u.h;
    let dm = (u.values[i] - u.at(c - 1)) / u.h;
    if v >= 0.0 {
        v * dp.max(-dm).max(0.0)
    } else {
        v * (-dp).max(dm).max(0.0)
    }
}

/// Largest step for which the update stays monotone, scaled by `cfl`.
pub fn stable_dt(u: &GridFunction, operator: &[f64], m: usize, cfl: f64) -> f64 {
    let w = operator_diagonal(u.h, m);
    let worst = (0..u.len())
        .map(|i| {
            let c = i as isize;
            let g = ((u.at(c + 1) - u.values[i]).abs()).max((u.values[i] - u.at(c - 1)).abs()) / u.h;
            w * g + operator[i].abs() / u.h
        })
        .fold(0.0, f64::max);
    if worst == 0.0 {
        f64::INFINITY
    } else {
        cfl / worst
    }
}

/// One step with the largest stable time step, capped at `dt_max`.
pub fn step_hj(u: &GridFunction, config: &SchemeConfig, dt_max: f64) -> Result<(GridFunction, f64), HjError> {
    let op = levy_operator_all(u, config.rho_cells, config.execution);
    let dt = stable_dt(u, &op, config.rho_cells, config.cfl).min(dt_max);
    Ok((advance(u, &op, dt), dt))
}

/// One step of prescribed size; fails if `dt` exceeds the stable limit.
pub fn step_hj_with_dt(u: &GridFunction, config: &SchemeConfig, dt: f64) -> Result<GridFunction, HjError> {
    let op = levy_operator_all(u, config.rho_cells, config.execution);
    let limit = stable_dt(u, &op, config.rho_cells, config.cfl);
    if !(dt >= 0.0) || dt > limit {
        return Err(HjError::CflViolation { dt, limit });
    }
    Ok(advance(u, &op, dt))
}

/// Stable step valid for both grids, for comparison runs.
pub fn common_stable_dt(u: &GridFunction, w: &GridFunction, config: &SchemeConfig) -> Result<f64, HjError> {
    if !u.same_shape(w) {
        return Err(HjError::ShapeMismatch);
    }
    let m = config.rho_cells;
    let a = stable_dt(u, &levy_operator_all(u, m, config.execution), m, config.cfl);
    let b = stable_dt(w, &levy_operator_all(w, m, config.execution), m, config.cfl);
    Ok(a.min(b))
}

fn advance(u: &GridFunction, operator: &[f64], dt: f64) -> GridFunction {
    if dt == 0.0 {
        return u.clone();
    }
    let values = (0..u.len()).map(|i| u.values[i] + dt * upwind(u, i, operator[i])).collect();
    u.with_values(values, u.time + dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjSolution {
    /// Initial state, requested snapshot times and the final state.
    pub snapshots: Vec<GridFunction>,
    pub steps: usize,
}

impl HjSolution {
    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("solution has at least the initial snapshot")
    }

    pub fn at(&self, t: f64) -> Option<&GridFunction> {
        self.snapshots.iter().find(|s| s.time() == t)
    }
}

/// Runs the scheme from the sampled initial datum to `config.t_end`.
pub fn solve_hj(u0: impl Fn(f64) -> f64, config: &SchemeConfig) -> Result<HjSolution, HjError> {
    config.validate()?;
    let initial = GridFunction::from_fn(u0, config.half_width, config.h)?;
    solve_from(initial, config)
}

pub fn solve_from(initial: GridFunction, config: &SchemeConfig) -> Result<HjSolution, HjError> {
    config.validate()?;
    let mut stops: Vec<f64> =
        config.snapshot_times.iter().copied().filter(|&t| t > initial.time() && t < config.t_end).collect();
    stops.push(config.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut u = initial;
    let mut snapshots = vec![u.clone()];
    let mut steps = 0;
    for stop in stops {
        while u.time < stop {
            let (next, dt) = step_hj(&u, config, stop - u.time)?;
            u = if dt == stop - u.time { next.with_values(next.values.clone(), stop) } else { next };
            steps += 1;
        }
        snapshots.push(u.clone());
    }
    Ok(HjSolution { snapshots, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub h: f64,
    /// Sup distance at `t_end` to the run with half the spacing, on the
    /// coarse nodes.
    pub difference: f64,
    /// `log2` of the ratio to the next row's difference.
    pub order: Option<f64>,
}

/// Self-convergence study: runs at `h, h/2, ..., h/2^levels`, keeping `rho`
/// fixed in physical units.
pub fn refinement_study(
    u0: impl Fn(f64) -> f64 + Sync,
    config: &SchemeConfig,
    levels: usize,
) -> Result<Vec<RefinementRow>, HjError> {
    let runs: Vec<Result<GridFunction, HjError>> = (0..=levels)
        .map(|k| {
            let scale = 1usize << k;
            let cfg = SchemeConfig {
                h: config.h / scale as f64,
                rho_cells: config.rho_cells * scale,
                snapshot_times: Vec::new(),
                ..config.clone()
            };
            solve_hj(&u0, &cfg).map(|s| s.last().clone())
        })
        .collect();
    let runs: Vec<GridFunction> = runs.into_iter().collect::<Result<_, _>>()?;
    let mut rows: Vec<RefinementRow> = runs
        .windows(2)
        .map(|w| {
            let difference =
                (0..w[0].len()).map(|i| (w[0].values[i] - w[1].values[2 * i]).abs()).fold(0.0, f64::max);
            RefinementRow { h: w[0].h, difference, order: None }
        })
        .collect();
    for k in 0..rows.len().saturating_sub(1) {
        let (a, b) = (rows[k].difference, rows[k + 1].difference);
        if a > 0.0 && b > 0.0 {
            rows[k].order = Some((a / b).log2());
        }
    }
    Ok(rows)
}

/// Constant in the barrier speed; the analysis only fixes its existence.
pub const BARRIER_CONSTANT: f64 = 4.0;

/// Speed of the moving barrier `v0 + sigma t`, with a safety factor of 2.
pub fn barrier_speed(lipschitz: f64, semiconcavity: f64, sup_norm: f64) -> f64 {
    let (l, k) = (lipschitz, semiconcavity);
    2.0 * (k * l + BARRIER_CONSTANT * (k + l * l) + 4.0 * sup_norm * l + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub sigma: f64,
    /// `min over snapshots and nodes of v0(x) + sigma t - u(t, x)`.
    pub margin: f64,
    pub pass: bool,
}

/// Checks that every snapshot lies below `v0 + sigma t`.
pub fn barrier_check(
    v0: impl Fn(f64) -> f64,
    lipschitz: f64,
    semiconcavity: f64,
    v0_sup: f64,
    snapshots: &[GridFunction],
) -> BarrierReport {
    let sigma = barrier_speed(lipschitz, semiconcavity, v0_sup);
    let margin = snapshots
        .iter()
        .flat_map(|s| (0..s.len()).map(move |i| (s.x(i), s.values[i], s.time)))
        .map(|(x, u, t)| v0(x) + sigma * t - u)
        .fold(f64::INFINITY, f64::min);
    BarrierReport { sigma, margin, pass: margin >= -1e-12 }
}

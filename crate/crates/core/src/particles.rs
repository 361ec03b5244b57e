//! State of the signed-charge particle system and its interaction field.
//!
//! A configuration is `n` points on the line with charges in `{-1, 0, +1}`.
//! Charged particles repel when their charges agree and attract otherwise,
//! with velocity
//!
//! ```text
//! dx_i/dt = coupling * sum_{j != i} b_i b_j / (x_i - x_j)
//! ```
//!
//! Neutral particles (charge 0) neither exert nor feel a force. They stay in
//! the arrays with frozen positions so indices remain stable across
//! annihilation events.

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParticleError {
    #[error("positions ({positions}) and charges ({charges}) differ in length")]
    LengthMismatch { positions: usize, charges: usize },
    #[error("coupling must be positive and finite, got {0}")]
    InvalidCoupling(f64),
    #[error("particle index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("charged particles {i} and {j} coincide; force is not finite")]
    NonFiniteForce { i: usize, j: usize },
    #[error("charged particles {i} and {j} coincide; energy is not finite")]
    NonFiniteEnergy { i: usize, j: usize },
}

/// A single violated constraint reported by [`validate_state`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooFewParticles { n: usize },
    InvalidCharge { index: usize, value: i8 },
    NonFinitePosition { index: usize },
    /// Charged particles `lower < upper` (by index) with `x[upper] <= x[lower]`.
    OutOfOrder { lower: usize, upper: usize },
}

/// Particle positions, charges, coupling and the current time.
///
/// Immutable once built; evolution produces new values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    positions: Vec<f64>,
    charges: Vec<i8>,
    coupling: f64,
    time: f64,
}

impl ParticleState {
    /// Builds a state at time 0 with the default coupling `1/n`.
    ///
    /// Only the shape is checked here; use [`validate_state`] for membership
    /// in the admissible state space.
    pub fn new(positions: Vec<f64>, charges: Vec<i8>) -> Result<Self, ParticleError> {
        let n = positions.len().max(1);
        Self::with_coupling(positions, charges, 1.0 / n as f64)
    }

    pub fn with_coupling(
        positions: Vec<f64>,
        charges: Vec<i8>,
        coupling: f64,
    ) -> Result<Self, ParticleError> {
        if positions.len() != charges.len() {
            return Err(ParticleError::LengthMismatch {
                positions: positions.len(),
                charges: charges.len(),
            });
        }
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(ParticleError::InvalidCoupling(coupling));
        }
        Ok(ParticleState { positions, charges, coupling, time: 0.0 })
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn charges(&self) -> &[i8] {
        &self.charges
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Same charges and coupling, new positions and time.
    pub fn with_positions(&self, positions: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(positions.len(), self.n());
        ParticleState { positions, charges: self.charges.clone(), coupling: self.coupling, time }
    }

    /// Same positions and coupling, new charges.
    pub fn with_charges(&self, charges: Vec<i8>) -> Self {
        debug_assert_eq!(charges.len(), self.n());
        ParticleState { positions: self.positions.clone(), charges, coupling: self.coupling, time: self.time }
    }

    /// Indices of charged particles ordered by position.
    pub fn charged_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).filter(|&i| self.charges[i] != 0).collect();
        idx.sort_by(|&a, &b| self.positions[a].total_cmp(&self.positions[b]).then(a.cmp(&b)));
        idx
    }

    pub fn net_charge(&self) -> i64 {
        self.charges.iter().map(|&b| b as i64).sum()
    }

    /// `(n_plus, n_minus)`.
    pub fn charge_counts(&self) -> (usize, usize) {
        let plus = self.charges.iter().filter(|&&b| b > 0).count();
        let minus = self.charges.iter().filter(|&&b| b < 0).count();
        (plus, minus)
    }

    /// Smallest gap between neighbouring charged particles of charge `sign`
    /// (`+1` or `-1`); `+inf` when there is no such pair.
    pub fn equal_sign_gap(&self, sign: i8) -> f64 {
        let idx = self.charged_indices();
        idx.windows(2)
            .filter(|w| self.charges[w[0]] == sign && self.charges[w[1]] == sign)
            .map(|w| self.positions[w[1]] - self.positions[w[0]])
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest gap between neighbouring charged particles of opposite sign.
    pub fn opposite_sign_gap(&self) -> f64 {
        let idx = self.charged_indices();
        idx.windows(2)
            .filter(|w| self.charges[w[0]] != self.charges[w[1]])
            .map(|w| self.positions[w[1]] - self.positions[w[0]])
            .fold(f64::INFINITY, f64::min)
    }

    /// `max - min` over charged positions (0 for fewer than two).
    pub fn charged_spread(&self) -> f64 {
        let idx = self.charged_indices();
        match (idx.first(), idx.last()) {
            (Some(&a), Some(&b)) => self.positions[b] - self.positions[a],
            _ => 0.0,
        }
    }
}

/// Checks membership in the admissible state space.
///
/// Charged particles must be strictly increasing in position with their
/// index; neutral particles are unconstrained.
pub fn validate_state(state: &ParticleState) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if state.n() < 2 {
        violations.push(Violation::TooFewParticles { n: state.n() });
    }
    for (index, &value) in state.charges.iter().enumerate() {
        if !(-1..=1).contains(&value) {
            violations.push(Violation::InvalidCharge { index, value });
        }
    }
    for (index, x) in state.positions.iter().enumerate() {
        if !x.is_finite() {
            violations.push(Violation::NonFinitePosition { index });
        }
    }
    let mut last: Option<usize> = None;
    for i in 0..state.n() {
        if state.charges[i] == 0 {
            continue;
        }
        if let Some(j) = last {
            if !(state.positions[i] > state.positions[j]) {
                violations.push(Violation::OutOfOrder { lower: j, upper: i });
            }
        }
        last = Some(i);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Velocity of every particle for the given positions and charges.
///
/// This is the vector field used by the integrator; `positions` need not come
/// from a [`ParticleState`].
pub fn velocity_field(
    positions: &[f64],
    charges: &[i8],
    coupling: f64,
    out: &mut [f64],
) -> Result<(), ParticleError> {
    let charged: Vec<usize> = (0..positions.len()).filter(|&i| charges[i] != 0).collect();
    out.iter_mut().for_each(|v| *v = 0.0);
    for &i in &charged {
        let mut acc = CompensatedSum::new();
        let xi = positions[i];
        let bi = charges[i] as f64;
        for &j in &charged {
            if j == i {
                continue;
            }
            let dx = xi - positions[j];
            if dx == 0.0 {
                return Err(ParticleError::NonFiniteForce { i: i.min(j), j: i.max(j) });
            }
            acc.add(bi * charges[j] as f64 / dx);
        }
        out[i] = coupling * acc.value();
    }
    Ok(())
}

/// Velocity of particle `i`.
pub fn force(state: &ParticleState, i: usize) -> Result<f64, ParticleError> {
    if i >= state.n() {
        return Err(ParticleError::IndexOutOfRange { index: i, n: state.n() });
    }
    if state.charges[i] == 0 {
        return Ok(0.0);
    }
    let xi = state.positions[i];
    let bi = state.charges[i] as f64;
    let mut acc = CompensatedSum::new();
    for (j, (&xj, &bj)) in state.positions.iter().zip(&state.charges).enumerate() {
        if j == i || bj == 0 {
            continue;
        }
        let dx = xi - xj;
        if dx == 0.0 {
            return Err(ParticleError::NonFiniteForce { i: i.min(j), j: i.max(j) });
        }
        acc.add(bi * bj as f64 / dx);
    }
    Ok(state.coupling * acc.value())
}

/// All velocities at once.
pub fn velocities(state: &ParticleState) -> Result<Vec<f64>, ParticleError> {
    let mut out = vec![0.0; state.n()];
    velocity_field(&state.positions, &state.charges, state.coupling, &mut out)?;
    Ok(out)
}

/// Interaction energy with the logarithmic potential `V(x) = -log|x|`.
///
/// Normalised as `coupling / (2n) * sum_{i != j} b_i b_j V(x_i - x_j)`, which
/// is `1/(2n^2)` for the default coupling, so that the flow is
/// `dx/dt = -n * grad E`.
pub fn energy(state: &ParticleState) -> Result<f64, ParticleError> {
    let n = state.n();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        if state.charges[i] == 0 {
            continue;
        }
        for j in (i + 1)..n {
            if state.charges[j] == 0 {
                continue;
            }
            let dx = (state.positions[i] - state.positions[j]).abs();
            if dx == 0.0 {
                return Err(ParticleError::NonFiniteEnergy { i, j });
            }
            // Each unordered pair appears twice in the double sum.
            acc.add(2.0 * (state.charges[i] * state.charges[j]) as f64 * -dx.ln());
        }
    }
    Ok(state.coupling / (2.0 * n as f64) * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(x: &[f64], b: &[i8]) -> ParticleState {
        ParticleState::new(x.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_state(&state(&[0.0, 1.0], &[1, -1])).is_ok());
        let err = validate_state(&state(&[1.0, 0.0], &[1, -1])).unwrap_err();
        assert_eq!(err, vec![Violation::OutOfOrder { lower: 0, upper: 1 }]);
        // neutral particles may be anywhere
        assert!(validate_state(&state(&[1.0, 0.0], &[1, 0])).is_ok());
    }

    #[test]
    fn validate_reports_every_problem() {
        let s = ParticleState::new(vec![f64::NAN], vec![3]).unwrap();
        let err = validate_state(&s).unwrap_err();
        assert!(err.contains(&Violation::TooFewParticles { n: 1 }));
        assert!(err.contains(&Violation::InvalidCharge { index: 0, value: 3 }));
        assert!(err.contains(&Violation::NonFinitePosition { index: 0 }));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            ParticleState::new(vec![0.0], vec![1, 1]),
            Err(ParticleError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ParticleState::with_coupling(vec![0.0, 1.0], vec![1, 1], 0.0),
            Err(ParticleError::InvalidCoupling(_))
        ));
    }

    #[test]
    fn force_examples() {
        let s = state(&[-1.0, 1.0], &[1, -1]);
        assert_eq!(s.coupling(), 0.5);
        assert!((force(&s, 0).unwrap() - 0.25).abs() < 1e-16);
        assert!((force(&s, 1).unwrap() + 0.25).abs() < 1e-16);

        let s = state(&[-1.0, 0.0, 1.0], &[1, -1, 1]);
        assert_eq!(force(&s, 1).unwrap(), 0.0);

        let s = state(&[-1.0, 0.3, 1.0], &[1, 0, -1]);
        assert_eq!(force(&s, 1).unwrap(), 0.0);
    }

    #[test]
    fn coincident_charged_pair_is_an_error() {
        let s = state(&[0.5, 0.5], &[1, -1]);
        assert_eq!(force(&s, 0), Err(ParticleError::NonFiniteForce { i: 0, j: 1 }));
        assert_eq!(energy(&s), Err(ParticleError::NonFiniteEnergy { i: 0, j: 1 }));
        // a neutral particle on top of a charged one is harmless
        let s = state(&[0.5, 0.5], &[1, 0]);
        assert_eq!(force(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&state(&[0.0, 1.0], &[1, 1])).unwrap(), 0.0);
        let e = energy(&state(&[0.0, std::f64::consts::E], &[1, -1])).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        assert_eq!(energy(&state(&[0.0, 2.0, 5.0], &[0, 1, 0])).unwrap(), 0.0);
    }

    #[test]
    fn energy_gradient_matches_velocity() {
        let s = state(&[-1.3, -0.2, 0.4, 1.9], &[1, -1, 1, 1]);
        let v = velocities(&s).unwrap();
        let n = s.n() as f64;
        let h = 1e-6;
        for i in 0..s.n() {
            let mut xp = s.positions().to_vec();
            let mut xm = s.positions().to_vec();
            xp[i] += h;
            xm[i] -= h;
            let grad = (energy(&s.with_positions(xp, 0.0)).unwrap()
                - energy(&s.with_positions(xm, 0.0)).unwrap())
                / (2.0 * h);
            assert!((v[i] + n * grad).abs() < 1e-7, "i={i}");
        }
    }

    #[test]
    fn gap_helpers() {
        let s = state(&[0.0, 0.5, 2.0, 2.1, 3.0], &[1, 1, -1, 0, -1]);
        assert_eq!(s.equal_sign_gap(1), 0.5);
        assert_eq!(s.equal_sign_gap(-1), 1.0);
        assert_eq!(s.opposite_sign_gap(), 1.5);
        assert_eq!(s.charged_spread(), 3.0);
        assert_eq!(s.net_charge(), 0);
        assert_eq!(s.charge_counts(), (2, 2));
    }

    fn config() -> impl Strategy<Value = (Vec<f64>, Vec<i8>)> {
        (2usize..10).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.05f64..1.0, n),
                proptest::collection::vec(prop_oneof![Just(-1i8), Just(0i8), Just(1i8)], n),
            )
                .prop_map(|(gaps, b)| {
                    let mut x = Vec::with_capacity(gaps.len());
                    let mut acc = -1.0;
                    for g in gaps {
                        acc += g;
                        x.push(acc);
                    }
                    (x, b)
                })
        })
    }

    proptest! {
        #[test]
        fn translation_and_scale((x, b) in config(), shift in -50.0f64..50.0, scale in 0.1f64..10.0) {
            let s = state(&x, &b);
            let shifted = s.with_positions(x.iter().map(|v| v + shift).collect(), 0.0);
            let scaled = s.with_positions(x.iter().map(|v| v * scale).collect(), 0.0);
            for i in 0..s.n() {
                let f = force(&s, i).unwrap();
                let fs = force(&shifted, i).unwrap();
                let fa = force(&scaled, i).unwrap();
                prop_assert!((f - fs).abs() <= 1e-9 * (1.0 + f.abs()) * (1.0 + shift.abs()));
                prop_assert!((f / scale - fa).abs() <= 1e-12 * (1.0 + f.abs() / scale));
            }
        }

        #[test]
        fn forces_sum_to_zero((x, b) in config()) {
            let s = state(&x, &b);
            let v = velocities(&s).unwrap();
            let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0);
            let total: f64 = v.iter().sum();
            prop_assert!(total.abs() <= 1e-12 * scale);
        }

        #[test]
        fn charge_flip_leaves_velocities((x, b) in config()) {
            let s = state(&x, &b);
            let flipped = s.with_charges(b.iter().map(|c| -c).collect());
            prop_assert_eq!(velocities(&s).unwrap(), velocities(&flipped).unwrap());
        }
    }
}

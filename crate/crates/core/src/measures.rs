//! Signed atomic measures `sum_i w_i delta_{x_i}` and diagnostics that tell
//! narrow convergence apart from uniform convergence of distribution
//! functions.

use serde::{Deserialize, Serialize};

use crate::exec::{map_slice, Execution};
use crate::levelset::{LevelSetError, StepFunction};
use crate::numeric::CompensatedSum;
use crate::particles::ParticleState;

/// Atoms with weights `count * unit`, sorted by location, no zero counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedAtomicMeasure {
    atoms: Vec<(f64, i64)>,
    unit: f64,
}

impl SignedAtomicMeasure {
    pub fn new(unit: f64, atoms: impl IntoIterator<Item = (f64, i64)>) -> Result<Self, LevelSetError> {
        // Reuse the step-function normalization: sorted, merged, no zeros.
        let u = StepFunction::new(0.0, unit, atoms)?;
        Ok(Self::from_step_function(&u))
    }

    pub fn zero(unit: f64) -> Self {
        SignedAtomicMeasure { atoms: Vec::new(), unit }
    }

    /// `kappa_n = coupling * sum_i b_i delta_{x_i}`.
    pub fn from_state(state: &ParticleState) -> Self {
        Self::from_step_function(&StepFunction::from_particles(state))
    }

    /// The distributional derivative of `u`.
    pub fn from_step_function(u: &StepFunction) -> Self {
        SignedAtomicMeasure {
            atoms: u.locations().iter().copied().zip(u.counts().iter().copied()).collect(),
            unit: u.eps(),
        }
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn atoms(&self) -> &[(f64, i64)] {
        &self.atoms
    }

    pub fn weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().map(move |&(x, c)| (x, c as f64 * self.unit))
    }

    pub fn total_mass(&self) -> f64 {
        self.unit * self.atoms.iter().map(|a| a.1).sum::<i64>() as f64
    }

    pub fn total_variation(&self) -> f64 {
        self.unit * self.atoms.iter().map(|a| a.1.abs()).sum::<i64>() as f64
    }

    /// `|kappa|` of the complement of `[-r, r]`.
    pub fn mass_outside(&self, r: f64) -> f64 {
        self.unit * self.atoms.iter().filter(|a| a.0.abs() > r).map(|a| a.1.abs()).sum::<i64>() as f64
    }

    /// `kappa((a, b])`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.unit * self.atoms.iter().filter(|p| p.0 > a && p.0 <= b).map(|p| p.1).sum::<i64>() as f64
    }

    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.weights().map(|(x, w)| w * phi(x)).collect::<CompensatedSum>().value()
    }

    /// Smallest interval containing every atom.
    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.atoms.first()?.0, self.atoms.last()?.0))
    }
}

/// `x -> kappa((-inf, x])`.
pub fn cdf(mu: &SignedAtomicMeasure) -> StepFunction {
    StepFunction::new(0.0, mu.unit, mu.atoms.iter().copied()).expect("measure atoms are already normalized")
}

/// `sup_x |F_mu(x) - F_nu(x)|` for the right-continuous distribution functions.
pub fn cdf_sup_distance(mu: &SignedAtomicMeasure, nu: &SignedAtomicMeasure) -> f64 {
    let (f, g) = (cdf(mu), cdf(nu));
    f.locations()
        .iter()
        .chain(g.locations())
        .map(|&x| (f.eval(x) - g.eval(x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AecReport {
    /// `s_n` for each measure of the sequence.
    pub s: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// `max_{i <= j} (|kappa([x_i, x_j])| - omega(x_j - x_i))^+`.
///
/// For a nondecreasing `omega` this is the supremum over all half-open
/// intervals of `|kappa((x, y])| - omega(y - x)`.
pub fn aec_excess(mu: &SignedAtomicMeasure, omega: &(impl Fn(f64) -> f64 + ?Sized)) -> f64 {
    let atoms = &mu.atoms;
    let mut best = 0.0f64;
    for i in 0..atoms.len() {
        let mut count = 0i64;
        for j in i..atoms.len() {
            count += atoms[j].1;
            let excess = (count.abs() as f64) * mu.unit - omega(atoms[j].0 - atoms[i].0);
            best = best.max(excess);
        }
    }
    best
}

/// Asymptotic equicontinuity check along a sequence of measures.
///
/// Passes when every value in the second half of the sequence is at most
/// `threshold`.
pub fn aec_modulus<F>(mus: &[SignedAtomicMeasure], omega: F, threshold: f64) -> AecReport
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    aec_modulus_with(Execution::default(), mus, omega, threshold)
}

pub fn aec_modulus_with<F>(exec: Execution, mus: &[SignedAtomicMeasure], omega: F, threshold: f64) -> AecReport
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let s = map_slice(exec, mus, |mu| aec_excess(mu, &omega));
    let tail = &s[s.len() / 2..];
    let pass = tail.iter().all(|&v| v <= threshold);
    AecReport { s, threshold, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFunction {
    /// `max(0, 1 - |x - center| / width)`
    Bump { center: f64, width: f64 },
    /// `tanh((x - center) / width)`
    Sigmoid { center: f64, width: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Bump { center, width } => (1.0 - (x - center).abs() / width).max(0.0),
            TestFunction::Sigmoid { center, width } => ((x - center) / width).tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            TestFunction::Bump { width, .. } | TestFunction::Sigmoid { width, .. } => 1.0 / width,
        }
    }
}

/// Bumps and sigmoids at dyadic scales over a window: at level `l` the
/// window is cut into `2^l` cells of width `w`, and each cell centre carries
/// a bump and a sigmoid of width `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDictionary {
    pub functions: Vec<TestFunction>,
}

impl TestDictionary {
    pub fn dyadic(lo: f64, hi: f64, levels: u32) -> Self {
        let mut functions = Vec::new();
        for level in 0..=levels {
            let cells = 1usize << level;
            let width = (hi - lo) / cells as f64;
            for j in 0..cells {
                let center = lo + width * (j as f64 + 0.5);
                functions.push(TestFunction::Bump { center, width });
                functions.push(TestFunction::Sigmoid { center, width });
            }
        }
        TestDictionary { functions }
    }

    /// Largest Lipschitz constant in the family.
    pub fn lipschitz(&self) -> f64 {
        self.functions.iter().map(TestFunction::lipschitz).fold(0.0, f64::max)
    }

    /// Dyadic dictionary over the joint support of the measures, padded by
    /// half its length (at least 1) on each side.
    pub fn for_measures(mus: &[&SignedAtomicMeasure], levels: u32) -> Self {
        let (lo, hi) = mus
            .iter()
            .filter_map(|m| m.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let pad = (0.5 * (hi - lo)).max(1.0);
        Self::dyadic(lo - pad, hi + pad, levels)
    }
}

/// `max_phi |int phi dmu - int phi dnu|` over the dictionary.
pub fn narrow_distance_proxy(mu: &SignedAtomicMeasure, nu: &SignedAtomicMeasure, family: &TestDictionary) -> f64 {
    family
        .functions
        .iter()
        .map(|f| (mu.integrate(|x| f.eval(x)) - nu.integrate(|x| f.eval(x))).abs())
        .fold(0.0, f64::max)
}

/// The counterexample `delta_{1/n} - delta_0` (unit weights).
pub fn dipole(n: usize) -> SignedAtomicMeasure {
    SignedAtomicMeasure::new(1.0, [(0.0, -1), (1.0 / n as f64, 1)]).expect("valid atoms")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lipschitz_family(n: usize) -> SignedAtomicMeasure {
        // F(x) = clamp(x, 0, 1) sampled at levels (k + 1/2) / n.
        let eps = 1.0 / n as f64;
        SignedAtomicMeasure::new(eps, (0..n).map(|k| ((k as f64 + 0.5) * eps, 1))).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let delta = SignedAtomicMeasure::new(1.0, [(0.0, 1)]).unwrap();
        let h = cdf(&delta);
        assert_eq!((h.eval(-1e-12), h.eval(0.0), h.eval(3.0)), (0.0, 1.0, 1.0));

        let empty = cdf(&SignedAtomicMeasure::zero(0.5));
        assert!(empty.is_empty());
        assert_eq!(empty.eval(0.0), 0.0);

        for n in [1, 10, 1000] {
            assert_eq!(cdf(&dipole(n)).sup_norm(), 1.0);
            assert_eq!(cdf_sup_distance(&dipole(n), &SignedAtomicMeasure::zero(1.0)), 1.0);
        }
    }

    #[test]
    fn cdf_matches_level_set() {
        let s = ParticleState::new(vec![-1.0, 0.0, 0.3, 2.0], vec![-1, 0, 1, -1]).unwrap();
        let (f, u) = (cdf(&SignedAtomicMeasure::from_state(&s)), StepFunction::from_particles(&s));
        assert_eq!(f, u);
        for x in [-2.0, -1.0, -0.5, 0.0, 0.3, 1.0, 2.0, 5.0] {
            assert_eq!(f.eval(x), u.eval(x));
        }
    }

    #[test]
    fn masses() {
        let s = ParticleState::new(vec![-2.0, -0.5, 0.5, 3.0], vec![1, -1, 1, 1]).unwrap();
        let k = SignedAtomicMeasure::from_state(&s);
        assert_eq!(k.total_mass(), 0.5);
        assert_eq!(k.total_variation(), 1.0);
        assert_eq!(k.mass_outside(1.0), 0.5);
        assert_eq!(k.mass_outside(5.0), 0.0);
        assert_eq!(k.interval_mass(-0.5, 0.5), 0.25);
        assert!(k.mass_outside(0.1) >= k.mass_outside(1.0));
    }

    #[test]
    fn aec_on_lipschitz_family() {
        let ns = [8, 16, 32, 64, 128, 256];
        let mus: Vec<_> = ns.iter().map(|&n| lipschitz_family(n)).collect();
        let report = aec_modulus(&mus, |d| d, 0.05);
        for (s, &n) in report.s.iter().zip(&ns) {
            assert!(*s <= 2.0 / n as f64, "s = {s} at n = {n}");
        }
        assert!(report.pass);
    }

    #[test]
    fn aec_rejects_dipoles() {
        let mus: Vec<_> = (1..=8).map(|k| dipole(1 << k)).collect();
        let omega = |d: f64| 3.0 * d;
        let report = aec_modulus(&mus, omega, 0.05);
        for (s, k) in report.s.iter().zip(1..) {
            assert!(*s >= 1.0 - omega(1.0 / (1 << k) as f64) - 1e-15);
        }
        assert!(!report.pass);
    }

    #[test]
    fn aec_zero_measures() {
        let report = aec_modulus(&vec![SignedAtomicMeasure::zero(1.0); 3], |d| d, 0.0);
        assert_eq!(report.s, vec![0.0; 3]);
        assert!(report.pass);
    }

    #[test]
    fn narrow_proxy() {
        let zero = SignedAtomicMeasure::zero(1.0);
        let dict = TestDictionary::dyadic(-2.0, 2.0, 6);
        let d = dipole(4);
        assert_eq!(narrow_distance_proxy(&d, &d, &dict), 0.0);

        let mut last = f64::INFINITY;
        for k in 2..12 {
            let n = 1usize << k;
            let shifted = SignedAtomicMeasure::new(1.0, [(1.0 / n as f64, 1)]).unwrap();
            let origin = SignedAtomicMeasure::new(1.0, [(0.0, 1)]).unwrap();
            let a = narrow_distance_proxy(&shifted, &origin, &dict);
            let b = narrow_distance_proxy(&dipole(n), &zero, &dict);
            assert_eq!(a, b);
            assert!(b < last);
            last = b;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn dictionary_shape() {
        let dict = TestDictionary::dyadic(0.0, 1.0, 3);
        assert_eq!(dict.functions.len(), 2 * (1 + 2 + 4 + 8));
        let dict = TestDictionary::for_measures(&[&SignedAtomicMeasure::zero(1.0)], 0);
        assert_eq!(dict.functions.len(), 2);
    }
}

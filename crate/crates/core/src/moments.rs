//! Power moments of a configuration and the moment distance.
//!
//! `M_k(x) = (1/k) sum_i x_i^k` for `k = 1..=n`. Because the first `n` power
//! sums determine the elementary symmetric polynomials (Newton's identities),
//! the moment vector identifies a configuration up to permutation, and the
//! Euclidean distance between moment vectors is a metric on unordered
//! configurations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numeric::{CompensatedSum, DoubleDouble};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MomentError {
    #[error("configurations have different sizes ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("moment vector has no real realization: root {re} + {im}i exceeds tolerance {tolerance}")]
    ComplexRoots { re: f64, im: f64, tolerance: f64 },
}

/// Orders at and above this are accumulated in double-double arithmetic.
const EXTENDED_FROM_ORDER: usize = 8;

/// `(M_1, ..., M_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector(Vec<f64>);

impl MomentVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        MomentVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `M_k`, 1-based.
    pub fn order(&self, k: usize) -> f64 {
        self.0[k - 1]
    }
}

pub fn moments(positions: &[f64]) -> MomentVector {
    let n = positions.len();
    let values = (1..=n)
        .map(|k| {
            if k < EXTENDED_FROM_ORDER {
                let sum: CompensatedSum = positions.iter().map(|x| x.powi(k as i32)).collect();
                sum.value() / k as f64
            } else {
                let mut acc = DoubleDouble::ZERO;
                for &x in positions {
                    acc += DoubleDouble::new(x).powi(k as u32);
                }
                (acc / k as f64).to_f64()
            }
        })
        .collect();
    MomentVector(values)
}

/// `d_M(x, y) = |M(x) - M(y)|_2`.
pub fn moment_distance(x: &[f64], y: &[f64]) -> Result<f64, MomentError> {
    if x.len() != y.len() {
        return Err(MomentError::LengthMismatch(x.len(), y.len()));
    }
    let (mx, my) = (moments(x), moments(y));
    Ok(moment_vector_distance(&mx, &my))
}

/// Euclidean distance of two moment vectors of equal length.
pub fn moment_vector_distance(a: &MomentVector, b: &MomentVector) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.0.iter().zip(&b.0).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn elementary_extended(m: &MomentVector) -> Vec<DoubleDouble> {
    let n = m.len();
    let mut e = vec![DoubleDouble::ZERO; n + 1];
    e[0] = DoubleDouble::ONE;
    for order in 1..=n {
        // m e_m = sum_{k=1}^m (-1)^{k-1} e_{m-k} k M_k
        let mut acc = DoubleDouble::ZERO;
        for k in 1..=order {
            let term = e[order - k] * (DoubleDouble::new(m.order(k)) * k as f64);
            if k % 2 == 1 {
                acc += term;
            } else {
                acc = acc - term;
            }
        }
        e[order] = acc / order as f64;
    }
    e
}

/// Elementary symmetric values `e_0 = 1, e_1, ..., e_n` via Newton's identities.
///
/// The recursion is carried out in double-double arithmetic; its alternating
/// sums cancel heavily for moderate `n`.
pub fn moments_to_elementary(m: &MomentVector) -> Vec<f64> {
    elementary_extended(m).into_iter().map(DoubleDouble::to_f64).collect()
}

/// Recovers the configuration (sorted) whose moment vector is `m`.
///
/// Roots of `prod (z - x_i) = sum_k (-1)^k e_k z^{n-k}` come from the
/// companion-matrix eigenvalues and are then refined with Aberth iterations
/// in double-double precision against the extended coefficients.
pub fn reconstruct_positions(m: &MomentVector) -> Result<Vec<f64>, MomentError> {
    let n = m.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let e = elementary_extended(m);
    // monic coefficients, highest degree first
    let coeffs: Vec<DoubleDouble> =
        e.iter().enumerate().map(|(k, &ek)| if k % 2 == 0 { ek } else { -ek }).collect();
    if n == 1 {
        return Ok(vec![e[1].to_f64()]);
    }

    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -coeffs[j + 1].to_f64();
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    let initial: Vec<Complex> = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex::new(DoubleDouble::new(z.re), DoubleDouble::new(z.im)))
        .collect();
    let roots = aberth_polish(&coeffs, initial.clone()).unwrap_or(initial);

    let scale = e
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, ek)| ek.to_f64().abs().powf(1.0 / k as f64))
        .fold(1.0f64, f64::max);
    let tolerance = 1e-6 * scale;
    let mut out = Vec::with_capacity(n);
    for z in &roots {
        let (re, im) = (z.re.to_f64(), z.im.to_f64());
        if im.abs() > tolerance {
            return Err(MomentError::ComplexRoots { re, im, tolerance });
        }
        out.push(re);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Complex {
    re: DoubleDouble,
    im: DoubleDouble,
}

impl Complex {
    fn new(re: DoubleDouble, im: DoubleDouble) -> Self {
        Complex { re, im }
    }
    fn zero() -> Self {
        Complex::new(DoubleDouble::ZERO, DoubleDouble::ZERO)
    }
    fn add(self, o: Self) -> Self {
        Complex::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Self) -> Self {
        Complex::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Self) -> Self {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    fn div(self, o: Self) -> Self {
        let den = o.re * o.re + o.im * o.im;
        Complex::new(
            (self.re * o.re + self.im * o.im) / den,
            (self.im * o.re - self.re * o.im) / den,
        )
    }
    fn norm(self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }
    fn is_zero(self) -> bool {
        self.re.hi == 0.0 && self.im.hi == 0.0
    }
    fn is_finite(self) -> bool {
        self.re.hi.is_finite() && self.im.hi.is_finite()
    }
}

fn horner(coeffs: &[DoubleDouble], z: Complex) -> (Complex, Complex) {
    let mut p = Complex::zero();
    let mut dp = Complex::zero();
    for &c in coeffs {
        dp = dp.mul(z).add(p);
        p = p.mul(z).add(Complex::new(c, DoubleDouble::ZERO));
    }
    (p, dp)
}

fn aberth_polish(coeffs: &[DoubleDouble], mut z: Vec<Complex>) -> Option<Vec<Complex>> {
    const MAX_ITER: usize = 200;
    let one = Complex::new(DoubleDouble::ONE, DoubleDouble::ZERO);
    for _ in 0..MAX_ITER {
        let mut largest = 0.0f64;
        for k in 0..z.len() {
            let (p, dp) = horner(coeffs, z[k]);
            if p.is_zero() {
                continue;
            }
            let ratio = p.div(dp);
            let mut repulsion = Complex::zero();
            for j in 0..z.len() {
                let d = z[k].sub(z[j]);
                if j != k && !d.is_zero() {
                    repulsion = repulsion.add(one.div(d));
                }
            }
            let step = ratio.div(one.sub(ratio.mul(repulsion)));
            if !step.is_finite() {
                return None;
            }
            z[k] = z[k].sub(step);
            largest = largest.max(step.norm() / z[k].norm().max(1.0));
        }
        if largest < 1e-30 {
            break;
        }
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moment_examples() {
        assert_eq!(moments(&[1.0, 2.0, 3.0]).values(), &[6.0, 7.0, 12.0]);
        assert_eq!(moments(&[0.0; 4]).values(), &[0.0; 4]);
        assert_eq!(moments(&[3.0, 1.0, 2.0]), moments(&[1.0, 2.0, 3.0]));
    }

    #[test]
    fn high_orders_use_extended_accumulation() {
        // 1e8 + 1 - 1e8 style cancellation at order 8
        let x = [10.0, -10.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let m = moments(&x);
        assert_eq!(m.order(8), 2.0 * 1e8 / 8.0 + 1.0 / 8.0);
        assert_eq!(m.order(7), 1.0 / 7.0);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(moment_distance(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(moment_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(moment_distance(&[0.0], &[1.0, 2.0]), Err(MomentError::LengthMismatch(1, 2)));
    }

    #[test]
    fn elementary_examples() {
        assert_eq!(moments_to_elementary(&moments(&[1.0, 2.0])), vec![1.0, 3.0, 2.0]);
        assert_eq!(moments_to_elementary(&MomentVector(vec![0.0; 3])), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(moments_to_elementary(&moments(&[-2.5])), vec![1.0, -2.5]);
    }

    #[test]
    fn reconstruct_examples() {
        let r = reconstruct_positions(&moments(&[1.0, 2.0, 3.0])).unwrap();
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(reconstruct_positions(&moments(&[0.0, 0.0])).unwrap(), vec![0.0, 0.0]);
        let r = reconstruct_positions(&moments(&[-5.0, 5.0])).unwrap();
        assert!((r[0] + 5.0).abs() < 1e-8 && (r[1] - 5.0).abs() < 1e-8);
        assert!(reconstruct_positions(&MomentVector(vec![])).unwrap().is_empty());
    }

    #[test]
    fn unrealizable_moments_are_rejected() {
        // M_1 = 0, M_2 = -1 would need x^2 + y^2 = -2
        let err = reconstruct_positions(&MomentVector(vec![0.0, -1.0])).unwrap_err();
        assert!(matches!(err, MomentError::ComplexRoots { .. }));
    }

    #[test]
    fn round_trip_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let n = rng.gen_range(1..=12);
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let r = reconstruct_positions(&moments(&x)).unwrap();
            x.sort_by(f64::total_cmp);
            for (a, b) in r.iter().zip(&x) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-6, "worst round-trip error {worst}");
    }

    #[test]
    fn second_moment_is_half_squared_norm() {
        let x = [0.3, -1.7, 2.2, 4.0];
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(2.0 * moments(&x).order(2), norm2);
    }

    #[test]
    fn distance_convergence_gives_coordinate_convergence() {
        let x = [-1.0, 0.5, 2.0];
        let mut previous = f64::INFINITY;
        for m in 1..8 {
            let delta = 10f64.powi(-m);
            let xm = [0.5 + delta, -1.0 - delta, 2.0 + 0.5 * delta];
            let d = moment_distance(&xm, &x).unwrap();
            assert!(d < previous);
            previous = d;
            let r = reconstruct_positions(&moments(&xm)).unwrap();
            let err = r.iter().zip([-1.0, 0.5, 2.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 2.0 * delta + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn metric_axioms(
            x in proptest::collection::vec(-3.0f64..3.0, 4),
            y in proptest::collection::vec(-3.0f64..3.0, 4),
            z in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let dxy = moment_distance(&x, &y).unwrap();
            let dyx = moment_distance(&y, &x).unwrap();
            let dxz = moment_distance(&x, &z).unwrap();
            let dzy = moment_distance(&z, &y).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= dxz + dzy + 1e-9 * (1.0 + dxy));
        }
    }
}

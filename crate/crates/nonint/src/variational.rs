//! Resonance detection, the reduced variational equation along a resonant
//! torus, its monodromy, and the resulting nonintegrability certificate.
//!
//! Along `I = I*`, `θ = ω(I*)t + θ₀` the reduced variational equation
//! `η̇ = hᵏ`, `ζ̇ = Dω(I*)η + gᵏ` has the fundamental matrix
//!
//! ```text
//!        ⎡ 1       0   Ξᵏ(t) ⎤
//! Φᵏ  =  ⎢ Dω t    1   Ψᵏ(t) ⎥ ,   Ξᵏ = ∫₀ᵗ hᵏ,   Ψᵏ = ∫₀ᵗ (Dω Ξᵏ + gᵏ),
//!        ⎣ 0       0   1     ⎦
//! ```
//!
//! so monodromy matrices are elements `M(C₁, C₂, C₃)` of the same block
//! shape, see [`UnipotentElement`].

use std::ops::Neg;

use nalgebra::{ClosedAddAssign, ClosedMulAssign, ClosedSubAssign, DMatrix, DVector, Scalar};
use num_complex::Complex64 as C64;
use num_traits::{FromPrimitive, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{polyline, ContourPath};
use crate::melnikov::{apply_real, integrate_along, margin, row_sum_norm, track, GenericSystem, MelnikovError, VERDICT_MARGIN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("frequencies {0:?} are not resonant")]
    NotResonant(Vec<f64>),
    #[error("{0}")]
    Path(String),
    #[error(transparent)]
    Melnikov(#[from] MelnikovError),
}

/// Default tolerance of resonance detection.
pub const RESONANCE_TOL: f64 = 1e-9;
/// Default denominator bound of resonance detection.
pub const RESONANCE_Q: u64 = 1_000_000;

/// Base frequency `ω*` with `ω = ω* k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFrequency {
    pub omega_star: f64,
    pub k_vec: Vec<i64>,
}

impl BaseFrequency {
    /// Replaces `ω*` by `ω*/n`.
    pub fn refine(&self, n: u32) -> Self {
        Self { omega_star: self.omega_star / n as f64, k_vec: self.k_vec.iter().map(|k| k * n as i64).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Resonance {
    Resonant(BaseFrequency),
    NotResonant,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// First continued-fraction convergent `p/q` of `x` with `|q x - p| < tol`
/// and `q ≤ q_max`.
fn rationalize(x: f64, tol: f64, q_max: u64) -> Option<(i64, i64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i128;
        (p0, p1) = (p1, a * p1 + p0);
        (q0, q1) = (q1, a * q1 + q0);
        if q1 > q_max as i128 {
            return None;
        }
        if (q1 as f64 * x - p1 as f64).abs() < tol {
            return Some((p1 as i64, q1 as i64));
        }
        let frac = rest - a as f64;
        if frac == 0.0 {
            return None;
        }
        rest = 1.0 / frac;
    }
    None
}

/// Finds `ω* > 0` and integers `k` with `|ω_j/ω* - k_j| < tol`.
///
/// Integer-valued inputs are handled exactly. Otherwise every ratio to the
/// smallest nonzero frequency is rationalised by continued fractions with
/// denominators at most `q_max`, and the common denominator fixes `ω*`.
pub fn detect_resonance(omega: &[f64], tol: f64, q_max: u64) -> Resonance {
    let scale = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Resonance::NotResonant;
    }
    if omega.iter().all(|w| w.fract() == 0.0 && w.abs() < 9.0e15) {
        let ints: Vec<i64> = omega.iter().map(|w| *w as i64).collect();
        let g = ints.iter().fold(0, |g, &k| gcd(g, k));
        return Resonance::Resonant(BaseFrequency { omega_star: g as f64, k_vec: ints.iter().map(|k| k / g).collect() });
    }
    let zero = |w: f64| w.abs() <= tol * scale;
    let reference = omega.iter().copied().filter(|w| !zero(*w)).fold(f64::INFINITY, |m, w| m.min(w.abs()));
    let mut fractions = Vec::with_capacity(omega.len());
    for &w in omega {
        if zero(w) {
            fractions.push((0, 1));
        } else {
            match rationalize(w / reference, tol, q_max) {
                Some(pq) => fractions.push(pq),
                None => return Resonance::NotResonant,
            }
        }
    }
    let mut lcm: i64 = 1;
    for &(_, q) in &fractions {
        lcm = lcm / gcd(lcm, q) * q;
        if lcm as u64 > q_max {
            return Resonance::NotResonant;
        }
    }
    let mut k: Vec<i64> = fractions.iter().map(|&(p, q)| p * (lcm / q)).collect();
    let g = k.iter().fold(0, |g, &x| gcd(g, x));
    k.iter_mut().for_each(|x| *x /= g);
    let omega_star = reference * g as f64 / lcm as f64;
    let fits = omega.iter().zip(&k).all(|(w, &kj)| if kj == 0 { zero(*w) } else { (w / omega_star - kj as f64).abs() < tol });
    if fits {
        Resonance::Resonant(BaseFrequency { omega_star, k_vec: k })
    } else {
        Resonance::NotResonant
    }
}

/// A resonant torus `I = I*` of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceData {
    pub i_star: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_star: f64,
    pub k_vec: Vec<i64>,
    pub t_star: f64,
    pub d_omega: DMatrix<f64>,
}

impl ResonanceData {
    pub fn new<S: GenericSystem>(sys: &S, i_star: &[f64], base: BaseFrequency) -> Self {
        Self {
            i_star: i_star.to_vec(),
            omega: sys.omega(i_star),
            omega_star: base.omega_star,
            t_star: std::f64::consts::TAU / base.omega_star,
            k_vec: base.k_vec,
            d_omega: sys.d_omega(i_star),
        }
    }

    /// Detects the resonance of `sys` at `i_star`.
    pub fn detect<S: GenericSystem>(sys: &S, i_star: &[f64], tol: f64, q_max: u64) -> Result<Self, VariationalError> {
        let omega = sys.omega(i_star);
        match detect_resonance(&omega, tol, q_max) {
            Resonance::Resonant(base) => Ok(Self::new(sys, i_star, base)),
            Resonance::NotResonant => Err(VariationalError::NotResonant(omega)),
        }
    }

    /// The same torus with `ω*` replaced by `ω*/n`, so that `T*` grows `n`-fold.
    pub fn refine(&self, n: u32) -> Self {
        let base = BaseFrequency { omega_star: self.omega_star, k_vec: self.k_vec.clone() }.refine(n);
        Self {
            t_star: std::f64::consts::TAU / base.omega_star,
            omega_star: base.omega_star,
            k_vec: base.k_vec,
            ..self.clone()
        }
    }
}

/// Scalars for which the block algebra is exact (integers) or as exact as
/// the arithmetic allows (floating point).
pub trait GroupScalar:
    Scalar + Zero + One + ClosedAddAssign + ClosedSubAssign + ClosedMulAssign + Neg<Output = Self> + FromPrimitive
{
}

impl<T> GroupScalar for T where
    T: Scalar + Zero + One + ClosedAddAssign + ClosedSubAssign + ClosedMulAssign + Neg<Output = T> + FromPrimitive
{
}

/// The block matrix
///
/// ```text
///                  ⎡ 1    0   C₁ ⎤
/// M(C₁, C₂, C₃) =  ⎢ C₃   1   C₂ ⎥
///                  ⎣ 0    0   1  ⎦
/// ```
///
/// with `C₁ ∈ K^ℓ`, `C₂ ∈ K^m`, `C₃ ∈ K^{m×ℓ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnipotentElement<T: Scalar> {
    pub c1: DVector<T>,
    pub c2: DVector<T>,
    pub c3: DMatrix<T>,
}

impl<T: GroupScalar> UnipotentElement<T> {
    pub fn new(c1: DVector<T>, c2: DVector<T>, c3: DMatrix<T>) -> Result<Self, VariationalError> {
        if c3.shape() != (c2.len(), c1.len()) {
            return Err(VariationalError::Dimension(format!(
                "C3 is {:?} but C1, C2 have lengths {}, {}",
                c3.shape(),
                c1.len(),
                c2.len()
            )));
        }
        Ok(Self { c1, c2, c3 })
    }

    pub fn identity(ell: usize, m: usize) -> Self {
        Self { c1: DVector::zeros(ell), c2: DVector::zeros(m), c3: DMatrix::zeros(m, ell) }
    }

    /// `(ℓ, m)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.c1.len(), self.c2.len())
    }

    fn check(&self, other: &Self) -> Result<(), VariationalError> {
        if self.dims() != other.dims() {
            return Err(VariationalError::Dimension(format!("{:?} vs {:?}", self.dims(), other.dims())));
        }
        Ok(())
    }

    /// `M(a)M(b) = M(a₁ + b₁, a₂ + b₂ + a₃b₁, a₃ + b₃)`.
    pub fn product(&self, other: &Self) -> Result<Self, VariationalError> {
        self.check(other)?;
        Ok(Self {
            c1: &self.c1 + &other.c1,
            c2: &self.c2 + &other.c2 + &self.c3 * &other.c1,
            c3: &self.c3 + &other.c3,
        })
    }

    /// `Mᵏ = M(kC₁, k(k-1)/2 · C₃C₁ + kC₂, kC₃)` for any integer `k`.
    pub fn power(&self, k: i64) -> Self {
        let kk = T::from_i64(k).expect("integer fits the scalar type");
        let tri = T::from_i64(k * (k - 1) / 2).expect("integer fits the scalar type");
        Self {
            c1: &self.c1 * kk.clone(),
            c2: &self.c3 * &self.c1 * tri + &self.c2 * kk.clone(),
            c3: &self.c3 * kk,
        }
    }

    /// `M(kC₁, (k-1)C₃C₁ + kC₂, kC₃)`, which equals `Mᵏ` for `k = 1, 2`
    /// only (and for every `k` when `C₃C₁ = 0`).
    pub fn power_linear_cross_term(&self, k: i64) -> Self {
        let kk = T::from_i64(k).expect("integer fits the scalar type");
        let km1 = T::from_i64(k - 1).expect("integer fits the scalar type");
        Self {
            c1: &self.c1 * kk.clone(),
            c2: &self.c3 * &self.c1 * km1 + &self.c2 * kk.clone(),
            c3: &self.c3 * kk,
        }
    }

    /// `M⁻¹ = M(-C₁, C₃C₁ - C₂, -C₃)`.
    pub fn inverse(&self) -> Self {
        Self { c1: -self.c1.clone(), c2: &self.c3 * &self.c1 - &self.c2, c3: -self.c3.clone() }
    }

    /// `ab = ba ⇔ C₃C₁' = C₃'C₁`.
    pub fn commutes(&self, other: &Self) -> Result<bool, VariationalError> {
        self.check(other)?;
        Ok(&self.c3 * &other.c1 == &other.c3 * &self.c1)
    }

    /// The full `(ℓ + m + 1)`-square matrix.
    pub fn to_matrix(&self) -> DMatrix<T> {
        let (ell, m) = self.dims();
        let n = ell + m + 1;
        let mut a = DMatrix::identity(n, n);
        a.view_mut((0, n - 1), (ell, 1)).copy_from(&self.c1);
        a.view_mut((ell, n - 1), (m, 1)).copy_from(&self.c2);
        a.view_mut((ell, 0), (m, ell)).copy_from(&self.c3);
        a
    }
}

/// `Φᵏ(t; θ)` along `path`, which must run from `0` to `t`.
pub fn fundamental_matrix<S: GenericSystem>(
    sys: &S,
    res: &ResonanceData,
    theta: &[f64],
    t: C64,
    path: &ContourPath,
    tol: f64,
) -> Result<DMatrix<C64>, VariationalError> {
    let (ell, m) = (sys.ell(), sys.m());
    if t == C64::new(0.0, 0.0) {
        return Ok(DMatrix::identity(ell + m + 1, ell + m + 1));
    }
    if path.start() != C64::new(0.0, 0.0) || path.end() != t {
        return Err(VariationalError::Path(format!("path runs from {} to {}, not from 0 to {t}", path.start(), path.end())));
    }
    let tracker = track(sys, res, theta, path)?;
    let i_star = res.i_star.clone();
    let dom = res.d_omega.clone();
    let mut h = vec![C64::new(0.0, 0.0); ell];
    let q = integrate_along(&tracker, 0..path.segments.len(), ell + m, tol, |tau, angles, state, out| {
        sys.h_k(&i_star, angles, state, &mut h);
        sys.g_k(&i_star, angles, state, &mut out[ell..]);
        let weighted: Vec<C64> = h.iter().map(|v| v * (t - tau)).collect();
        for (o, v) in out[ell..].iter_mut().zip(apply_real(&dom, &weighted)) {
            *o += v;
        }
        out[..ell].copy_from_slice(&h);
    })?;
    let element = UnipotentElement {
        c1: DVector::from_column_slice(&q.values[..ell]),
        c2: DVector::from_column_slice(&q.values[ell..]),
        c3: res.d_omega.map(|x| C64::new(x, 0.0)) * t,
    };
    Ok(element.to_matrix())
}

/// A monodromy matrix with the quadrature error of its entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub element: UnipotentElement<C64>,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Monodromy of `Φᵏ` around the closed loop `gamma` based at its (real)
/// start point: `M(Ĉ₁, Ĉ₂, 0)` with `Ĉ₁ = ∮ hᵏ dτ` and
/// `Ĉ₂ = ∮ (gᵏ - Dω τ hᵏ) dτ`.
pub fn monodromy_gamma<S: GenericSystem>(
    sys: &S,
    res: &ResonanceData,
    theta: &[f64],
    gamma: &ContourPath,
    tol: f64,
) -> Result<Monodromy, VariationalError> {
    if gamma.start() != gamma.end() {
        return Err(VariationalError::Path(format!("loop starts at {} but ends at {}", gamma.start(), gamma.end())));
    }
    let (ell, m) = (sys.ell(), sys.m());
    let tracker = track(sys, res, theta, gamma)?;
    let i_star = res.i_star.clone();
    let dom = res.d_omega.clone();
    let mut h = vec![C64::new(0.0, 0.0); ell];
    let q = integrate_along(&tracker, 0..gamma.segments.len(), ell + m, tol, |tau, angles, state, out| {
        sys.h_k(&i_star, angles, state, &mut h);
        sys.g_k(&i_star, angles, state, &mut out[ell..]);
        let weighted: Vec<C64> = h.iter().map(|v| v * tau).collect();
        for (o, v) in out[ell..].iter_mut().zip(apply_real(&dom, &weighted)) {
            *o -= v;
        }
        out[..ell].copy_from_slice(&h);
    })?;
    Ok(Monodromy {
        element: UnipotentElement {
            c1: DVector::from_column_slice(&q.values[..ell]),
            c2: DVector::from_column_slice(&q.values[ell..]),
            c3: DMatrix::zeros(m, ell),
        },
        error_estimate: q.error_estimate,
        nodes_used: q.nodes_used,
    })
}

/// Monodromy along the real period `[0, T*]`:
/// `M(Ξᵏ(T*), Ψᵏ(T*), Dω T*)`.
pub fn monodromy_period<S: GenericSystem>(sys: &S, res: &ResonanceData, theta: &[f64], tol: f64) -> Result<Monodromy, VariationalError> {
    let t = C64::new(res.t_star, 0.0);
    let path = polyline(&[C64::new(0.0, 0.0), t], res.t_star).map_err(MelnikovError::from)?;
    let (ell, m) = (sys.ell(), sys.m());
    let tracker = track(sys, res, theta, &path)?;
    let i_star = res.i_star.clone();
    let dom = res.d_omega.clone();
    let mut h = vec![C64::new(0.0, 0.0); ell];
    let q = integrate_along(&tracker, 0..1, ell + m, tol, |tau, angles, state, out| {
        sys.h_k(&i_star, angles, state, &mut h);
        sys.g_k(&i_star, angles, state, &mut out[ell..]);
        let weighted: Vec<C64> = h.iter().map(|v| v * (t - tau)).collect();
        for (o, v) in out[ell..].iter_mut().zip(apply_real(&dom, &weighted)) {
            *o += v;
        }
        out[..ell].copy_from_slice(&h);
    })?;
    Ok(Monodromy {
        element: UnipotentElement {
            c1: DVector::from_column_slice(&q.values[..ell]),
            c2: DVector::from_column_slice(&q.values[ell..]),
            c3: (&res.d_omega * res.t_star).map(|x| C64::new(x, 0.0)),
        },
        error_estimate: q.error_estimate,
        nodes_used: q.nodes_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Positive,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `|Dω(I*)Ĉ₁|` over its error bound.
    pub loop_integral: f64,
    /// `|C̄₃Ĉ₁|` over its error bound.
    pub noncommutation: f64,
}

/// Outcome of [`certify_nonintegrability`]. A positive verdict means the
/// loop integral is nonzero and the two monodromy matrices do not commute;
/// an inconclusive one claims nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub system: String,
    #[serde(rename = "I_star")]
    pub i_star: Vec<f64>,
    pub k_vec: Vec<i64>,
    pub omega_star: f64,
    pub t_star: f64,
    pub theta: Vec<f64>,
    #[serde(rename = "C1_hat")]
    pub c1_hat: Vec<C64>,
    #[serde(rename = "C2_hat")]
    pub c2_hat: Vec<C64>,
    /// Rows of `C̄₃ = Dω(I*)T*`.
    #[serde(rename = "C3_bar")]
    pub c3_bar: Vec<Vec<f64>>,
    pub d_omega_c1: Vec<C64>,
    pub error_estimate: f64,
    pub margins: Margins,
    pub verdict: Verdict,
}

/// Computes `M_γ` and the period monodromy `M_γ̄` and checks
/// `Dω(I*)Ĉ₁ ≠ 0` and `C̄₃Ĉ₁ ≠ 0`, each by a factor of ten over its error
/// bound.
pub fn certify_nonintegrability<S: GenericSystem>(
    sys: &S,
    res: &ResonanceData,
    theta: &[f64],
    gamma: &ContourPath,
    tol: f64,
) -> Result<Certificate, VariationalError> {
    let loop_m = monodromy_gamma(sys, res, theta, gamma, tol)?;
    let period_m = monodromy_period(sys, res, theta, tol)?;
    let c1: Vec<C64> = loop_m.element.c1.iter().copied().collect();
    let err = loop_m.error_estimate;
    let c3_bar = &res.d_omega * res.t_star;
    let w1 = apply_real(&res.d_omega, &c1);
    let w2 = apply_real(&c3_bar, &c1);
    let norm = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let margins = Margins {
        loop_integral: margin(norm(&w1), row_sum_norm(&res.d_omega) * err),
        noncommutation: margin(norm(&w2), row_sum_norm(&c3_bar) * err),
    };
    let noncommuting = !loop_m.element.commutes(&period_m.element)?;
    let verdict = if margins.loop_integral > VERDICT_MARGIN && margins.noncommutation > VERDICT_MARGIN && noncommuting {
        Verdict::Positive
    } else {
        Verdict::Inconclusive
    };
    Ok(Certificate {
        system: sys.name(),
        i_star: res.i_star.clone(),
        k_vec: res.k_vec.clone(),
        omega_star: res.omega_star,
        t_star: res.t_star,
        theta: theta.to_vec(),
        c1_hat: c1,
        c2_hat: loop_m.element.c2.iter().copied().collect(),
        c3_bar: c3_bar.row_iter().map(|r| r.iter().copied().collect()).collect(),
        d_omega_c1: w1,
        error_estimate: err,
        margins,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::contour::{build_gamma, Side};
    use crate::melnikov::{ClosureSystem, WithoutH};
    use proptest::prelude::*;

    fn el(c1: &[i64], c2: &[i64], c3: &[i64]) -> UnipotentElement<i64> {
        let (l, m) = (c1.len(), c2.len());
        UnipotentElement::new(DVector::from_column_slice(c1), DVector::from_column_slice(c2), DMatrix::from_row_slice(m, l, c3)).unwrap()
    }

    #[test]
    fn resonance_examples() {
        assert_eq!(detect_resonance(&[2.0, 3.0], 1e-9, 1_000_000), Resonance::Resonant(BaseFrequency { omega_star: 1.0, k_vec: vec![2, 3] }));
        assert_eq!(detect_resonance(&[1.0, 2f64.sqrt()], 1e-9, 1_000_000), Resonance::NotResonant);
        let w = 0.7 / 1.3f64.powi(3);
        match detect_resonance(&[w, 0.0], 1e-9, 1_000_000) {
            Resonance::Resonant(b) => {
                assert_eq!(b.k_vec, vec![1, 0]);
                let r = b.refine(3);
                assert_eq!(r.k_vec, vec![3, 0]);
                assert!((r.omega_star - w / 3.0).abs() < 1e-15);
            }
            Resonance::NotResonant => panic!(),
        }
        match detect_resonance(&[0.3 * 2.0, 0.3 * 5.0, -0.3 * 3.0], 1e-9, 1_000_000) {
            Resonance::Resonant(b) => {
                assert_eq!(b.k_vec, vec![2, 5, -3]);
                assert!((b.omega_star - 0.3).abs() < 1e-12);
            }
            Resonance::NotResonant => panic!(),
        }
        assert_eq!(detect_resonance(&[0.0, 0.0], 1e-9, 10), Resonance::NotResonant);
    }

    #[test]
    fn noncommuting_example() {
        let a = el(&[1], &[0], &[1]);
        let b = el(&[0], &[0], &[1]);
        assert!(!a.commutes(&b).unwrap());
        assert!(a.commutes(&UnipotentElement::identity(1, 1)).unwrap());
        assert!(a.product(&el(&[1, 2], &[0], &[0, 0])).is_err());
    }

    #[test]
    fn product_matches_block_matrices() {
        let a = el(&[1, -2], &[3, 0, 1], &[1, 2, 0, -1, 4, 3]);
        let b = el(&[0, 5], &[-1, 2, 2], &[2, 2, 1, 0, -3, 1]);
        assert_eq!(a.product(&b).unwrap().to_matrix(), a.to_matrix() * b.to_matrix());
    }

    #[test]
    fn linear_cross_term_power_is_wrong_from_the_cube_on() {
        let a = el(&[1], &[0], &[1]);
        assert_eq!(a.power_linear_cross_term(2), a.product(&a).unwrap());
        let cube = a.product(&a).unwrap().product(&a).unwrap();
        assert_eq!(a.power(3), cube);
        assert_ne!(a.power_linear_cross_term(3), cube);
    }

    fn arb_element(l: usize, m: usize) -> impl Strategy<Value = UnipotentElement<i64>> {
        (
            proptest::collection::vec(-50i64..50, l),
            proptest::collection::vec(-50i64..50, m),
            proptest::collection::vec(-50i64..50, l * m),
        )
            .prop_map(move |(a, b, c)| el(&a, &b, &c))
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_element(2, 3), b in arb_element(2, 3), c in arb_element(2, 3), k in -6i64..9) {
            let id = UnipotentElement::identity(2, 3);
            prop_assert_eq!(a.product(&id).unwrap(), a.clone());
            prop_assert_eq!(a.product(&a.inverse()).unwrap(), id.clone());
            prop_assert_eq!(a.product(&b).unwrap().product(&c).unwrap(), a.product(&b.product(&c).unwrap()).unwrap());
            let mut repeated = id.clone();
            let step = if k >= 0 { a.clone() } else { a.inverse() };
            for _ in 0..k.abs() {
                repeated = repeated.product(&step).unwrap();
            }
            prop_assert_eq!(a.power(k), repeated);
            let commute = a.product(&b).unwrap() == b.product(&a).unwrap();
            prop_assert_eq!(a.commutes(&b).unwrap(), commute);
            prop_assert_eq!(b.commutes(&a).unwrap(), commute);
        }
    }

    fn sample_system() -> ClosureSystem {
        ClosureSystem::new("sample", 1, 2, 1)
            .with_frequencies(|i| vec![i[0], 0.0], |_| DMatrix::from_column_slice(2, 1, &[1.0, 0.5]))
            .with_h(|_, th, out| out[0] = 1.0 / (2.0 - (C64::new(0.0, 1.0) * th[0]).exp()) + th[1].cos())
            .with_g(|_, th, out| {
                out[0] = th[0].sin() * th[1].cos();
                out[1] = (th[0] + th[1]).cos();
            })
            .registered(&[1.0])
            .unwrap()
    }

    #[test]
    fn fundamental_matrix_solves_the_variational_equation() {
        let sys = sample_system();
        let res = ResonanceData::detect(&sys, &[1.0], RESONANCE_TOL, RESONANCE_Q).unwrap();
        let theta = [0.2, 0.4];
        let phi = |t: C64| {
            let path = polyline(&[C64::new(0.0, 0.0), C64::new(t.re, 0.0), t], res.t_star).unwrap();
            fundamental_matrix(&sys, &res, &theta, t, &path, 1e-13).unwrap()
        };
        let t = C64::new(1.3, 0.2);
        let h = 1e-3;
        let eight = C64::new(8.0, 0.0);
        let d = (phi(t - 2.0 * h) - phi(t - h) * eight + phi(t + h) * eight - phi(t + 2.0 * h)) / C64::new(12.0 * h, 0.0);
        let mut hv = [C64::new(0.0, 0.0)];
        let mut gv = [C64::new(0.0, 0.0); 2];
        let angles = [t + theta[0], C64::new(theta[1], 0.0)];
        sys.h_k(&[1.0], &angles, &(), &mut hv);
        sys.g_k(&[1.0], &angles, &(), &mut gv);
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 3)] = hv[0];
        a[(1, 0)] = C64::new(1.0, 0.0);
        a[(2, 0)] = C64::new(0.5, 0.0);
        a[(1, 3)] = gv[0];
        a[(2, 3)] = gv[1];
        let residual = (d - a * phi(t)).norm();
        assert!(residual < 1e-8, "{residual}");
        assert_eq!(phi(C64::new(0.0, 0.0)), DMatrix::identity(4, 4));
        let m = phi(t);
        assert_eq!(m[(1, 0)], t);
        assert_eq!(m[(2, 0)], t * 0.5);
    }

    #[test]
    fn contractible_loop_gives_identity() {
        let sys = ClosureSystem::new("entire", 1, 1, 1)
            .with_frequencies(|_| vec![1.0], |_| DMatrix::from_element(1, 1, 1.0))
            .with_h(|_, th, out| out[0] = th[0].cos().exp())
            .with_g(|_, th, out| out[0] = th[0].sin())
            .registered(&[1.0])
            .unwrap();
        let res = ResonanceData::detect(&sys, &[1.0], RESONANCE_TOL, RESONANCE_Q).unwrap();
        let gamma = build_gamma(res.t_star, 1.0, 0.2, 2.0, Side::Left).unwrap();
        let m = monodromy_gamma(&sys, &res, &[0.1], &gamma, 1e-11).unwrap();
        assert!(m.element.c1.norm() < 1e-9 && m.element.c2.norm() < 1e-9);
        assert_eq!(m.element.c3, DMatrix::zeros(1, 1));
    }

    #[test]
    fn monodromy_matches_continuation_of_the_fundamental_matrix() {
        let sys = sample_system();
        let res = ResonanceData::detect(&sys, &[1.0], RESONANCE_TOL, RESONANCE_Q).unwrap();
        // The pole of h at θ₁ = -i ln 2 sits at the centre of the arc
        // around T*/3 - i ln 2 of the mirrored loop.
        let theta = [4.0 * PI / 3.0, 0.4];
        let gamma = build_gamma(res.t_star, 2f64.ln(), 0.1, 2.0, Side::Left).unwrap();
        let gamma = ContourPath::new(gamma.segments.iter().map(conj_segment).collect(), res.t_star).unwrap();
        let t0 = gamma.start();
        let m = monodromy_gamma(&sys, &res, &theta, &gamma, 1e-12).unwrap().element;
        // Φ(t₀) continued around γ equals Φ(t₀) M_γ.
        let to_base = polyline(&[C64::new(0.0, 0.0), t0], res.t_star).unwrap();
        let phi0 = fundamental_matrix(&sys, &res, &theta, t0, &to_base, 1e-12).unwrap();
        let mut around = to_base.segments.clone();
        around.extend(gamma.segments.iter().copied());
        let around = ContourPath::new(around, res.t_star).unwrap();
        let phi1 = fundamental_matrix(&sys, &res, &theta, t0, &around, 1e-12).unwrap();
        assert!((phi0 * m.to_matrix() - phi1).norm() < 1e-9);
        assert!(m.c1.norm() > 1.0);
    }

    fn conj_segment(s: &crate::contour::Segment) -> crate::contour::Segment {
        use crate::contour::Segment;
        match *s {
            Segment::Line { from, to } => Segment::Line { from: from.conj(), to: to.conj() },
            Segment::Arc { center, from, to, sweep } => Segment::Arc { center: center.conj(), from: from.conj(), to: to.conj(), sweep: -sweep },
        }
    }

    #[test]
    fn period_monodromy_blocks() {
        let sys = ClosureSystem::new("free", 1, 1, 1).with_frequencies(|_| vec![2.0], |_| DMatrix::from_element(1, 1, -3.0));
        let res = ResonanceData::detect(&sys, &[1.0], RESONANCE_TOL, RESONANCE_Q).unwrap();
        let m = monodromy_period(&sys, &res, &[0.0], 1e-12).unwrap().element;
        assert_eq!(m.c1[0], C64::new(0.0, 0.0));
        assert_eq!(m.c2[0], C64::new(0.0, 0.0));
        assert_eq!(m.c3[(0, 0)], C64::new(-3.0 * res.t_star, 0.0));
    }

    #[test]
    fn zeroed_h_or_frequency_jacobian_is_inconclusive() {
        let sys = sample_system();
        let res = ResonanceData::detect(&sys, &[1.0], RESONANCE_TOL, RESONANCE_Q).unwrap();
        let gamma = build_gamma(res.t_star, 2f64.ln(), 0.1, 2.0, Side::Left).unwrap();
        let gamma = ContourPath::new(gamma.segments.iter().map(conj_segment).collect(), res.t_star).unwrap();
        let theta = [4.0 * PI / 3.0, 0.4];
        let c = certify_nonintegrability(&sys, &res, &theta, &gamma, 1e-11).unwrap();
        assert_eq!(c.verdict, Verdict::Positive);
        let c = certify_nonintegrability(&WithoutH(sample_system()), &res, &theta, &gamma, 1e-11).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let mut flat = res.clone();
        flat.d_omega = DMatrix::zeros(2, 1);
        let c = certify_nonintegrability(&sys, &flat, &theta, &gamma, 1e-11).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let json = serde_json::to_string(&c).unwrap();
        for key in ["\"I_star\"", "\"C1_hat\"", "\"C2_hat\"", "\"C3_bar\"", "\"margins\"", "\"INCONCLUSIVE\""] {
            assert!(json.contains(key), "{key}");
        }
    }
}

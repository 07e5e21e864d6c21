//! Loop integrals `𝓘ᵏ(θ) = Dω(I*) ∮ hᵏ(I*, ω(I*)τ + θ) dτ` along closed
//! complex-time paths.
//!
//! A system enters through [`GenericSystem`]. Its perturbation terms may be
//! many-valued in complex time (for the three-body problem they depend on the
//! eccentric anomaly), so each system carries a continuation state that is
//! tracked along the path by [`TorusFlow`] before any quadrature happens.

mod crtbp;

pub use crtbp::{
    melnikov_planar, melnikov_planar_raw, melnikov_planar_with_sign, melnikov_spatial, planar_segment_contributions,
    small_circle_integral, top_segment_leading, top_segment_numeric, ContourParams, EccentricSign, PlanarCrtbp,
    SpatialCrtbp, CRTBP_ORDER,
};

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{accept_corrected, integrate_vector, Continuation, ContourError, ContourPath, PathTracker, Side, VectorQuadrature};
use crate::delaunay::DelaunayError;
use crate::kepler_core::KeplerError;
use crate::variational::ResonanceData;

/// A result is reported as nonzero when `|value|` exceeds this multiple of
/// its error estimate.
pub const VERDICT_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MelnikovError {
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Kepler(#[from] KeplerError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// A perturbed integrable system `İ = ε h(I, θ; ε)`, `θ̇ = ω(I) + ε g(I, θ; ε)`
/// with `I ∈ ℝ^ℓ`, `θ ∈ 𝕋^m`, seen through its order-`k` terms
/// `hᵏ = (1/k!) ∂ᵏ_ε h` and `gᵏ = (1/k!) ∂ᵏ_ε g` at `ε = 0`.
pub trait GenericSystem {
    /// Data that selects the sheet of `hᵏ`, `gᵏ` at complex angles.
    type State: Clone;

    fn name(&self) -> String;
    fn ell(&self) -> usize;
    fn m(&self) -> usize;
    fn order(&self) -> usize;
    fn omega(&self, i: &[f64]) -> Vec<f64>;
    /// The `m × ℓ` Jacobian `Dω(I)`.
    fn d_omega(&self, i: &[f64]) -> DMatrix<f64>;
    /// Continuation state at real angles.
    fn real_state(&self, i: &[f64], theta: &[f64]) -> Result<Self::State, MelnikovError>;
    /// Carries `state` from angles `from` to nearby angles `to`; `None` when
    /// the step is too long.
    fn continue_state(&self, i: &[f64], from: &[C64], state: &Self::State, to: &[C64]) -> Option<Self::State>;
    fn h_k(&self, i: &[f64], theta: &[C64], state: &Self::State, out: &mut [C64]);
    fn g_k(&self, i: &[f64], theta: &[C64], state: &Self::State, out: &mut [C64]);
}

/// The resonant flow `τ ↦ ω(I*)τ + θ` together with the system whose
/// continuation state it carries.
pub struct TorusFlow<'a, S: GenericSystem> {
    pub sys: &'a S,
    pub i_star: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
}

impl<'a, S: GenericSystem> TorusFlow<'a, S> {
    pub fn new(sys: &'a S, res: &ResonanceData, theta: &[f64]) -> Result<Self, MelnikovError> {
        if theta.len() != sys.m() || res.omega.len() != sys.m() || res.i_star.len() != sys.ell() {
            return Err(MelnikovError::Invalid(format!(
                "dimension mismatch: m = {}, l = {}, theta has {}, omega has {}, I* has {}",
                sys.m(),
                sys.ell(),
                theta.len(),
                res.omega.len(),
                res.i_star.len()
            )));
        }
        Ok(Self { sys, i_star: res.i_star.clone(), omega: res.omega.clone(), theta: theta.to_vec() })
    }

    pub fn angles(&self, tau: C64) -> Vec<C64> {
        self.omega.iter().zip(&self.theta).map(|(w, t)| tau * w + t).collect()
    }
}

impl<S: GenericSystem> Continuation for TorusFlow<'_, S> {
    type State = S::State;

    fn step(&self, z0: C64, from: &S::State, z1: C64) -> Option<S::State> {
        self.sys.continue_state(&self.i_star, &self.angles(z0), from, &self.angles(z1))
    }
}

/// Tracks the continuation state of `sys` along `path`, which must start on
/// the real axis.
pub fn track<'a, S: GenericSystem>(
    sys: &'a S,
    res: &ResonanceData,
    theta: &[f64],
    path: &ContourPath,
) -> Result<PathTracker<TorusFlow<'a, S>>, MelnikovError> {
    let start = path.start();
    if start.im != 0.0 {
        return Err(ContourError::Geometry(format!("path must start on the real axis, not at {start}")).into());
    }
    let flow = TorusFlow::new(sys, res, theta)?;
    let real: Vec<f64> = flow.angles(start).iter().map(|a| a.re).collect();
    let initial = sys.real_state(&flow.i_star, &real)?;
    Ok(PathTracker::new(path.clone(), flow, initial)?)
}

/// Integrates `f(τ, angles, state, out)` over the segments `range` of the
/// tracked path.
pub fn integrate_along<S, F>(
    tracker: &PathTracker<TorusFlow<'_, S>>,
    range: Range<usize>,
    dim: usize,
    tol: f64,
    mut f: F,
) -> Result<VectorQuadrature, MelnikovError>
where
    S: GenericSystem,
    F: FnMut(C64, &[C64], &S::State, &mut [C64]),
{
    let sub = tracker.path().slice(range.clone())?;
    let flow = tracker.continuation();
    integrate_vector::<MelnikovError, _>(&sub, dim, tol, |seg, u, z, out| {
        let state = tracker.state_at(seg + range.start, u)?;
        f(z, &flow.angles(z), &state, out);
        Ok(())
    })
}

/// Parameters of a loop of the form built by [`crate::contour::build_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMeta {
    pub height: f64,
    pub delta: f64,
    pub big_m: f64,
    pub side: Side,
}

/// What a result was integrated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourMeta {
    pub period_cell: f64,
    pub segments: usize,
    pub length: f64,
    pub closed: bool,
    pub gamma: Option<GammaMeta>,
}

impl ContourMeta {
    pub fn of(path: &ContourPath, gamma: Option<GammaMeta>) -> Self {
        Self {
            period_cell: path.period_cell,
            segments: path.segments.len(),
            length: path.length(),
            closed: path.is_closed(),
            gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovResult {
    pub system: String,
    pub theta: Vec<f64>,
    pub value: Vec<C64>,
    pub error_estimate: f64,
    /// `|value| / error_estimate`.
    pub margin: f64,
    pub nonzero_verdict: bool,
    pub nodes_used: usize,
    pub contour: ContourMeta,
}

impl MelnikovResult {
    pub fn new(system: String, theta: Vec<f64>, value: Vec<C64>, error_estimate: f64, nodes_used: usize, contour: ContourMeta) -> Self {
        let size = value.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let margin = margin(size, error_estimate);
        Self { system, theta, value, error_estimate, margin, nonzero_verdict: margin > VERDICT_MARGIN, nodes_used, contour }
    }

    /// First component, the only nonzero one for the three-body systems.
    pub fn scalar(&self) -> C64 {
        self.value[0]
    }
}

/// `size / error`, saturating instead of dividing by zero.
pub fn margin(size: f64, error: f64) -> f64 {
    if size == 0.0 {
        0.0
    } else if error > 0.0 {
        (size / error).min(f64::MAX)
    } else {
        f64::MAX
    }
}

/// Largest absolute row sum, which bounds `‖A x‖_∞ / ‖x‖_∞`.
pub fn row_sum_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `A x` for a real matrix and a complex vector.
pub fn apply_real(a: &DMatrix<f64>, x: &[C64]) -> Vec<C64> {
    a.row_iter().map(|r| r.iter().zip(x).map(|(a, x)| x * a).sum()).collect()
}

/// `𝓘ᵏ(θ) = Dω(I*) ∮_path hᵏ(I*, ω(I*)τ + θ) dτ`.
pub fn melnikov_generic<S: GenericSystem>(
    sys: &S,
    res: &ResonanceData,
    theta: &[f64],
    path: &ContourPath,
    tol: f64,
) -> Result<MelnikovResult, MelnikovError> {
    melnikov_generic_meta(sys, res, theta, path, tol, None)
}

pub(crate) fn melnikov_generic_meta<S: GenericSystem>(
    sys: &S,
    res: &ResonanceData,
    theta: &[f64],
    path: &ContourPath,
    tol: f64,
    gamma: Option<GammaMeta>,
) -> Result<MelnikovResult, MelnikovError> {
    let tracker = track(sys, res, theta, path)?;
    let i_star = res.i_star.clone();
    let q = integrate_along(&tracker, 0..path.segments.len(), sys.ell(), tol, |_, angles, state, out| {
        sys.h_k(&i_star, angles, state, out)
    })?;
    let value = apply_real(&res.d_omega, &q.values);
    let error = row_sum_norm(&res.d_omega) * q.error_estimate;
    Ok(MelnikovResult::new(sys.name(), theta.to_vec(), value, error, q.nodes_used, ContourMeta::of(path, gamma)))
}

type Frequencies = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type Jacobian = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type Field = Box<dyn Fn(&[f64], &[C64], &mut [C64]) + Send + Sync>;

/// A system given by closures that are single-valued in the angles.
///
/// ```
/// use nalgebra::DMatrix;
/// use nonint::melnikov::ClosureSystem;
///
/// let sys = ClosureSystem::new("pendulum-like", 1, 1, 1)
///     .with_frequencies(|i| vec![i[0]], |_| DMatrix::from_element(1, 1, 1.0))
///     .with_h(|_, th, out| out[0] = th[0].sin())
///     .registered(&[1.0])
///     .unwrap();
/// ```
pub struct ClosureSystem {
    name: String,
    ell: usize,
    m: usize,
    order: usize,
    omega: Frequencies,
    d_omega: Jacobian,
    h: Field,
    g: Field,
}

impl ClosureSystem {
    /// A system with zero frequencies and zero perturbation terms.
    pub fn new(name: impl Into<String>, ell: usize, m: usize, order: usize) -> Self {
        Self {
            name: name.into(),
            ell,
            m,
            order,
            omega: Box::new(move |_| vec![0.0; m]),
            d_omega: Box::new(move |_| DMatrix::zeros(m, ell)),
            h: Box::new(|_, _, out| out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0))),
            g: Box::new(|_, _, out| out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0))),
        }
    }

    pub fn with_frequencies(
        mut self,
        omega: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        d_omega: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.omega = Box::new(omega);
        self.d_omega = Box::new(d_omega);
        self
    }

    pub fn with_h(mut self, h: impl Fn(&[f64], &[C64], &mut [C64]) + Send + Sync + 'static) -> Self {
        self.h = Box::new(h);
        self
    }

    pub fn with_g(mut self, g: impl Fn(&[f64], &[C64], &mut [C64]) + Send + Sync + 'static) -> Self {
        self.g = Box::new(g);
        self
    }

    /// Checks dimensions and `2π`-periodicity of `hᵏ`, `gᵏ` in every angle
    /// at the action `probe` on a few fixed sample points.
    pub fn registered(self, probe: &[f64]) -> Result<Self, MelnikovError> {
        if probe.len() != self.ell {
            return Err(MelnikovError::Invalid(format!("probe action has {} entries, expected {}", probe.len(), self.ell)));
        }
        let om = (self.omega)(probe);
        let dom = (self.d_omega)(probe);
        if om.len() != self.m || dom.shape() != (self.m, self.ell) {
            return Err(MelnikovError::Invalid(format!(
                "frequency map returns {} entries and a {:?} Jacobian for m = {}, l = {}",
                om.len(),
                dom.shape(),
                self.m,
                self.ell
            )));
        }
        let zero = C64::new(0.0, 0.0);
        for sample in 0..4 {
            let base: Vec<C64> = (0..self.m).map(|j| C64::new(0.37 + 1.13 * j as f64 + 1.71 * sample as f64, 0.0)).collect();
            for (label, field, dim) in [("h", &self.h, self.ell), ("g", &self.g, self.m)] {
                let mut at = vec![zero; dim];
                field(probe, &base, &mut at);
                for j in 0..self.m {
                    let mut shifted = base.clone();
                    shifted[j] += std::f64::consts::TAU;
                    let mut there = vec![zero; dim];
                    field(probe, &shifted, &mut there);
                    for (a, b) in at.iter().zip(&there) {
                        if (a - b).norm() > 1e-8 * (1.0 + a.norm()) {
                            return Err(MelnikovError::Invalid(format!("{label} is not 2π-periodic in angle {j}")));
                        }
                    }
                }
            }
        }
        Ok(self)
    }
}

impl GenericSystem for ClosureSystem {
    type State = ();

    fn name(&self) -> String {
        self.name.clone()
    }

    fn ell(&self) -> usize {
        self.ell
    }

    fn m(&self) -> usize {
        self.m
    }

    fn order(&self) -> usize {
        self.order
    }

    fn omega(&self, i: &[f64]) -> Vec<f64> {
        (self.omega)(i)
    }

    fn d_omega(&self, i: &[f64]) -> DMatrix<f64> {
        (self.d_omega)(i)
    }

    fn real_state(&self, _: &[f64], _: &[f64]) -> Result<(), MelnikovError> {
        Ok(())
    }

    fn continue_state(&self, _: &[f64], _: &[C64], _: &(), _: &[C64]) -> Option<()> {
        Some(())
    }

    fn h_k(&self, i: &[f64], theta: &[C64], _: &(), out: &mut [C64]) {
        (self.h)(i, theta, out)
    }

    fn g_k(&self, i: &[f64], theta: &[C64], _: &(), out: &mut [C64]) {
        (self.g)(i, theta, out)
    }
}

/// A system with the `hᵏ` of `inner` replaced by zero.
pub struct WithoutH<S>(pub S);

impl<S: GenericSystem> GenericSystem for WithoutH<S> {
    type State = S::State;

    fn name(&self) -> String {
        format!("{} (h = 0)", self.0.name())
    }

    fn ell(&self) -> usize {
        self.0.ell()
    }

    fn m(&self) -> usize {
        self.0.m()
    }

    fn order(&self) -> usize {
        self.0.order()
    }

    fn omega(&self, i: &[f64]) -> Vec<f64> {
        self.0.omega(i)
    }

    fn d_omega(&self, i: &[f64]) -> DMatrix<f64> {
        self.0.d_omega(i)
    }

    fn real_state(&self, i: &[f64], theta: &[f64]) -> Result<S::State, MelnikovError> {
        self.0.real_state(i, theta)
    }

    fn continue_state(&self, i: &[f64], from: &[C64], state: &S::State, to: &[C64]) -> Option<S::State> {
        self.0.continue_state(i, from, state, to)
    }

    fn h_k(&self, _: &[f64], _: &[C64], _: &S::State, out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    }

    fn g_k(&self, i: &[f64], theta: &[C64], state: &S::State, out: &mut [C64]) {
        self.0.g_k(i, theta, state, out)
    }
}

/// Continuation of the eccentric anomaly `E` of Kepler's equation
/// `E - e sin E = M` from `(mean0, ecc0)` to `mean1`.
pub fn continue_anomaly(e: f64, mean0: C64, ecc0: C64, mean1: C64) -> Option<C64> {
    if mean1 == mean0 {
        return Some(ecc0);
    }
    let predicted = crate::contour::rk4(|x| 1.0 / (1.0 - e * x.cos()), ecc0, mean1 - mean0);
    if !predicted.is_finite() {
        return None;
    }
    let corrected = crate::kepler_core::solve_kepler(e, mean1, predicted).ok()?;
    accept_corrected(ecc0, predicted, corrected)
}

//! The restricted three-body problem near the primary, as a system of the
//! form handled by [`super::melnikov_generic`], and the specialised
//! front ends that integrate over the true anomaly instead.
//!
//! The first nonvanishing perturbation order is `k = 5`, where
//! `h⁵ = -∂H₆/∂θ` and `g⁵ = ∂H₆/∂I` with
//! `H₆ = -¼ μ R² (3 cos 2(θ₂ - χ₂(R)) + 1)` in the planar problem.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{
    continue_anomaly, melnikov_generic_meta, ContourMeta, GammaMeta, GenericSystem, MelnikovError, MelnikovResult,
};
use crate::contour::{
    build_gamma, circle, continue_phi, gamma_segments, integrate_vector, polyline, ContourPath, PathTracker,
    PhiContinuation, QuadratureResult, Side,
};
use crate::delaunay::{HatParts, PlanarDelaunay, RadialState, SpatialDelaunay};
use crate::kepler_core::{k1, solve_kepler_real, KeplerOrbit};
use crate::variational::{detect_resonance, Resonance, ResonanceData};

/// Perturbation order at which the three-body integrals first appear.
pub const CRTBP_ORDER: usize = 5;

/// Shape of the loop `γ_θ` and the quadrature tolerance.
///
/// `delta` and `big_m` are multiples of the singular height `K₁/ω₁`; the
/// period cell is `period_multiple` orbital periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    pub delta: f64,
    pub big_m: f64,
    pub tol: f64,
    pub side: Side,
    pub period_multiple: u32,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self { delta: 0.05, big_m: 10.0, tol: 1e-10, side: Side::Left, period_multiple: 3 }
    }
}

impl ContourParams {
    /// The loop `γ_θ` for `orbit`.
    pub fn gamma(&self, orbit: &KeplerOrbit) -> Result<(ContourPath, GammaMeta), MelnikovError> {
        if self.period_multiple < 2 {
            return Err(MelnikovError::Invalid("the period cell must hold at least two periods".into()));
        }
        let height = k1(orbit.e()) / orbit.omega1();
        let meta = GammaMeta { height, delta: self.delta * height, big_m: self.big_m * height, side: self.side };
        let t_star = self.period_multiple as f64 * orbit.period();
        let path = build_gamma(t_star, height, meta.delta, meta.big_m, self.side)?;
        Ok((path, meta))
    }
}

/// Sign in front of the `e sin φ` term of the true-anomaly integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EccentricSign {
    Minus,
    Plus,
}

fn check_params(e: f64, mu: f64, i1: f64) -> Result<(), MelnikovError> {
    if !(e > 0.0 && e < 1.0) || !(mu > 0.0 && mu < 1.0) || !(i1 > 0.0 && i1.is_finite()) {
        return Err(MelnikovError::Invalid(format!("need 0 < e < 1, 0 < mu < 1, I1* > 0 (e = {e}, mu = {mu}, I1* = {i1})")));
    }
    Ok(())
}

/// `cos 2(φ₀ + f)` and `sin 2(φ₀ + f)` from the true anomaly's cosine and sine.
fn double_angle(phase: C64, cos_f: C64, sin_f: C64) -> (C64, C64) {
    let (c2f, s2f) = (cos_f * cos_f - sin_f * sin_f, 2.0 * cos_f * sin_f);
    let (c2p, s2p) = ((2.0 * phase).cos(), (2.0 * phase).sin());
    (c2p * c2f - s2p * s2f, s2p * c2f + c2p * s2f)
}

fn omega_of(mu: f64, i1: f64) -> f64 {
    (1.0 - mu) / i1.powi(3)
}

fn d_omega_of(mu: f64, i1: f64) -> f64 {
    -3.0 * (1.0 - mu) / i1.powi(4)
}

fn resonance_for<S: GenericSystem>(sys: &S, i_star: &[f64], n: u32) -> ResonanceData {
    match detect_resonance(&sys.omega(i_star), 1e-9, 1_000_000) {
        Resonance::Resonant(base) => ResonanceData::new(sys, i_star, base).refine(n),
        Resonance::NotResonant => unreachable!("a single nonzero frequency is always resonant"),
    }
}

/// The planar problem with actions `(I₁, I₂)` and angles `(θ₁, θ₂)`; the
/// continuation state is the eccentric anomaly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarCrtbp {
    delaunay: PlanarDelaunay,
}

impl PlanarCrtbp {
    pub fn new(e: f64, mu: f64, i1_star: f64) -> Result<Self, MelnikovError> {
        check_params(e, mu, i1_star)?;
        Ok(Self { delaunay: PlanarDelaunay::resonant(mu, e, i1_star)? })
    }

    pub fn delaunay(&self) -> &PlanarDelaunay {
        &self.delaunay
    }

    pub fn orbit(&self) -> Result<KeplerOrbit, MelnikovError> {
        Ok(self.delaunay.orbit()?)
    }

    pub fn i_star(&self) -> Vec<f64> {
        vec![self.delaunay.i1(), self.delaunay.i2()]
    }

    /// Resonance data with `ω* = ω₁/n`.
    pub fn resonance(&self, n: u32) -> ResonanceData {
        resonance_for(self, &self.i_star(), n)
    }

    fn at(&self, i: &[f64]) -> PlanarDelaunay {
        if i[0] == self.delaunay.i1() && i[1] == self.delaunay.i2() {
            self.delaunay
        } else {
            PlanarDelaunay::new(self.delaunay.mu(), i[0], i[1]).unwrap_or(self.delaunay)
        }
    }

    /// `H₆` at real angles.
    pub fn h6(&self, i: &[f64], theta: [f64; 2]) -> f64 {
        let d = self.at(i);
        let rs = d.radial_state(C64::new(solve_kepler_real(d.eccentricity(), theta[0]), 0.0));
        let (cos_2u, _) = double_angle(C64::new(theta[1], 0.0), rs.cos_f, rs.sin_f);
        (-0.25 * d.mu() * rs.r * rs.r * (3.0 * cos_2u + 1.0)).re
    }

    /// The planar integrand `h₁ = R_θ₁ R (3 cos 2u + 1) + 3 R² χ₂ᵣ R_θ₁ sin 2u`
    /// with `u = θ₂ - χ₂(R)`.
    pub fn h1(rs: &RadialState, cos_2u: C64, sin_2u: C64) -> C64 {
        rs.r_theta1 * rs.r * (3.0 * cos_2u + 1.0) + 3.0 * rs.r * rs.r * rs.chi2_r_r_theta1 * sin_2u
    }
}

impl GenericSystem for PlanarCrtbp {
    type State = C64;

    fn name(&self) -> String {
        "crtbp-planar".into()
    }

    fn ell(&self) -> usize {
        2
    }

    fn m(&self) -> usize {
        2
    }

    fn order(&self) -> usize {
        CRTBP_ORDER
    }

    fn omega(&self, i: &[f64]) -> Vec<f64> {
        vec![omega_of(self.delaunay.mu(), i[0]), 0.0]
    }

    fn d_omega(&self, i: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[d_omega_of(self.delaunay.mu(), i[0]), 0.0, 0.0, 0.0])
    }

    fn real_state(&self, i: &[f64], theta: &[f64]) -> Result<C64, MelnikovError> {
        Ok(C64::new(solve_kepler_real(self.at(i).eccentricity(), theta[0]), 0.0))
    }

    fn continue_state(&self, i: &[f64], from: &[C64], ecc: &C64, to: &[C64]) -> Option<C64> {
        continue_anomaly(self.at(i).eccentricity(), from[0], *ecc, to[0])
    }

    fn h_k(&self, i: &[f64], theta: &[C64], ecc: &C64, out: &mut [C64]) {
        let d = self.at(i);
        let mu = d.mu();
        let rs = d.radial_state(*ecc);
        let (cos_2u, sin_2u) = double_angle(theta[1], rs.cos_f, rs.sin_f);
        out[0] = 0.5 * mu * Self::h1(&rs, cos_2u, sin_2u);
        out[1] = -1.5 * mu * rs.r * rs.r * sin_2u;
    }

    fn g_k(&self, i: &[f64], theta: &[C64], ecc: &C64, out: &mut [C64]) {
        let d = self.at(i);
        let (mu, a, e) = (d.mu(), d.semi_major_axis(), d.eccentricity());
        let s = (1.0 - e * e).sqrt();
        let (i1, l) = (d.i1(), d.gm().cbrt() * d.i1());
        let rs = d.radial_state(*ecc);
        let (r, cf, sf) = (rs.r, rs.cos_f, rs.sin_f);
        let (cos_2u, sin_2u) = double_angle(theta[1], cf, sf);
        let bracket = 3.0 * cos_2u + 1.0;
        // Derivatives of r and f with respect to the actions at fixed mean
        // anomaly, through a(I₁) and e(I₁, I₂).
        let f_e = sf * (2.0 + e * cf) / (s * s);
        let r_i = [2.0 * r / i1 - a * s * s * cf / (e * i1), a * s * cf / (e * l)];
        let f_i = [f_e * s * s / (e * i1), -f_e * s / (e * l)];
        for j in 0..2 {
            out[j] = -0.25 * mu * (2.0 * r * r_i[j] * bracket - 6.0 * r * r * sin_2u * f_i[j]);
        }
    }
}

/// The spatial problem on the equatorial resonant family `I₂ = I₃ = I₂*`,
/// with angles `(θ₁, θ₂, θ₃)`.
///
/// The colatitude is `Ψ ≡ π/2` on this family and `hᵏ` is the three-term
/// `ĥ₁` form with its `θ₂`, `θ₃` companions. The `gᵏ` terms involve
/// derivatives across the inclination singularity at `I₂ = I₃` and are set
/// to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialCrtbp {
    planar: PlanarCrtbp,
    spatial: SpatialDelaunay,
}

impl SpatialCrtbp {
    pub fn new(e: f64, mu: f64, i1_star: f64) -> Result<Self, MelnikovError> {
        let planar = PlanarCrtbp::new(e, mu, i1_star)?;
        Ok(Self { planar, spatial: SpatialDelaunay::equatorial(mu, e, i1_star)? })
    }

    pub fn spatial(&self) -> &SpatialDelaunay {
        &self.spatial
    }

    pub fn i_star(&self) -> Vec<f64> {
        vec![self.spatial.planar.i1(), self.spatial.planar.i2(), self.spatial.i3]
    }

    pub fn resonance(&self, n: u32) -> ResonanceData {
        resonance_for(self, &self.i_star(), n)
    }

    /// The pieces of `ĥ₁` at a (complex) eccentric anomaly. The colatitude
    /// is returned alongside so callers can check that it stays at `π/2`.
    pub fn parts(&self, theta: &[C64], ecc: C64) -> (HatParts, C64) {
        let d = &self.spatial.planar;
        let rs = d.radial_state(ecc);
        let (cos_2w, sin_2w) = double_angle(theta[1] + theta[2], rs.cos_f, rs.sin_f);
        let psi = C64::new(FRAC_PI_2, 0.0);
        (HatParts::from_trig(rs, psi, cos_2w, sin_2w, d.i2(), self.spatial.i3), psi)
    }
}

impl GenericSystem for SpatialCrtbp {
    type State = C64;

    fn name(&self) -> String {
        "crtbp-spatial".into()
    }

    fn ell(&self) -> usize {
        3
    }

    fn m(&self) -> usize {
        3
    }

    fn order(&self) -> usize {
        CRTBP_ORDER
    }

    fn omega(&self, i: &[f64]) -> Vec<f64> {
        vec![omega_of(self.spatial.planar.mu(), i[0]), 0.0, 0.0]
    }

    fn d_omega(&self, i: &[f64]) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 0)] = d_omega_of(self.spatial.planar.mu(), i[0]);
        d
    }

    fn real_state(&self, i: &[f64], theta: &[f64]) -> Result<C64, MelnikovError> {
        self.planar.real_state(&i[..2], &theta[..2])
    }

    fn continue_state(&self, _: &[f64], from: &[C64], ecc: &C64, to: &[C64]) -> Option<C64> {
        continue_anomaly(self.spatial.planar.eccentricity(), from[0], *ecc, to[0])
    }

    fn h_k(&self, _: &[f64], theta: &[C64], ecc: &C64, out: &mut [C64]) {
        let mu = self.spatial.planar.mu();
        let (parts, _) = self.parts(theta, *ecc);
        out[0] = 0.5 * mu * parts.h_hat1();
        out[1] = 0.25 * mu * parts.profile_theta2();
        out[2] = 0.25 * mu * parts.profile_theta3();
    }

    fn g_k(&self, _: &[f64], _: &[C64], _: &C64, out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    }
}

/// `9μI₂*/(2I₁*)`, the factor in front of the true-anomaly integral.
fn prefactor(sys: &PlanarCrtbp) -> f64 {
    let d = sys.delaunay();
    4.5 * d.mu() * d.i2() / d.i1()
}

/// `sin 2(φ + θ₂) ∓ e sin φ (cos 2(φ + θ₂) + ⅓)/(1 + e cos φ)`.
fn anomaly_integrand(e: f64, theta2: f64, phi: C64, sign: EccentricSign) -> C64 {
    let u = phi + theta2;
    let term = e * phi.sin() * ((2.0 * u).cos() + 1.0 / 3.0) / (1.0 + e * phi.cos());
    match sign {
        EccentricSign::Minus => (2.0 * u).sin() - term,
        EccentricSign::Plus => (2.0 * u).sin() + term,
    }
}

/// Integrates `f(φ)` over the segments `range` of a tracked path.
fn integrate_phi(
    tracker: &PathTracker<PhiContinuation>,
    range: Range<usize>,
    tol: f64,
    f: impl Fn(C64) -> C64,
) -> Result<QuadratureResult, MelnikovError> {
    let sub = tracker.path().slice(range.clone())?;
    let q = integrate_vector::<MelnikovError, _>(&sub, 1, tol, |seg, u, _, out| {
        out[0] = f(tracker.state_at(seg + range.start, u)?);
        Ok(())
    })?;
    Ok(QuadratureResult { value: q.values[0], error_estimate: q.error_estimate, nodes_used: q.nodes_used })
}

/// `𝓘⁵₁(θ)` from the true-anomaly form
/// `(9μI₂*/2I₁*) ∮ [sin 2(φ + θ₂) - e sin φ (cos 2(φ + θ₂) + ⅓)/(1 + e cos φ)] dt`.
pub fn melnikov_planar(e: f64, mu: f64, i1_star: f64, theta2: f64, params: &ContourParams) -> Result<MelnikovResult, MelnikovError> {
    melnikov_planar_with_sign(e, mu, i1_star, theta2, params, EccentricSign::Minus)
}

/// [`melnikov_planar`] with a choice of sign in front of the `e sin φ` term.
pub fn melnikov_planar_with_sign(
    e: f64,
    mu: f64,
    i1_star: f64,
    theta2: f64,
    params: &ContourParams,
    sign: EccentricSign,
) -> Result<MelnikovResult, MelnikovError> {
    let sys = PlanarCrtbp::new(e, mu, i1_star)?;
    let orbit = sys.orbit()?;
    let (path, meta) = params.gamma(&orbit)?;
    let tracker = continue_phi(&orbit, &path)?;
    let q = integrate_phi(&tracker, 0..path.segments.len(), params.tol, |phi| anomaly_integrand(e, theta2, phi, sign))?;
    let c = prefactor(&sys);
    let name = match sign {
        EccentricSign::Minus => "crtbp-planar-anomaly",
        EccentricSign::Plus => "crtbp-planar-anomaly-plus",
    };
    Ok(MelnikovResult::new(
        name.into(),
        vec![0.0, theta2],
        vec![c * q.value, C64::new(0.0, 0.0)],
        c * q.error_estimate,
        q.nodes_used,
        ContourMeta::of(&path, Some(meta)),
    ))
}

/// Contribution of each segment of `γ_θ` to [`melnikov_planar`], in the
/// order of [`gamma_segments`].
pub fn planar_segment_contributions(
    e: f64,
    mu: f64,
    i1_star: f64,
    theta2: f64,
    params: &ContourParams,
) -> Result<Vec<QuadratureResult>, MelnikovError> {
    let sys = PlanarCrtbp::new(e, mu, i1_star)?;
    let orbit = sys.orbit()?;
    let (path, _) = params.gamma(&orbit)?;
    let tracker = continue_phi(&orbit, &path)?;
    let c = prefactor(&sys);
    (0..gamma_segments::COUNT)
        .map(|k| {
            let q = integrate_phi(&tracker, k..k + 1, params.tol, |phi| anomaly_integrand(e, theta2, phi, EccentricSign::Minus))?;
            Ok(QuadratureResult { value: c * q.value, error_estimate: c * q.error_estimate, nodes_used: q.nodes_used })
        })
        .collect()
}

/// `𝓘⁵(θ)` from the radius and `χ₂` form, through [`super::melnikov_generic`]
/// applied to [`PlanarCrtbp`] with `θ = (0, θ₂)`.
pub fn melnikov_planar_raw(e: f64, mu: f64, i1_star: f64, theta2: f64, params: &ContourParams) -> Result<MelnikovResult, MelnikovError> {
    let sys = PlanarCrtbp::new(e, mu, i1_star)?;
    let (path, meta) = params.gamma(&sys.orbit()?)?;
    let res = sys.resonance(params.period_multiple);
    melnikov_generic_meta(&sys, &res, &[0.0, theta2], &path, params.tol, Some(meta))
}

/// `𝓘⁵(θ)` for the spatial problem on the equatorial family, with
/// `θ = (0, 0, θ₃)`.
pub fn melnikov_spatial(e: f64, mu: f64, i1_star: f64, theta3: f64, params: &ContourParams) -> Result<MelnikovResult, MelnikovError> {
    let sys = SpatialCrtbp::new(e, mu, i1_star)?;
    let (path, meta) = params.gamma(&sys.planar.orbit()?)?;
    let res = sys.resonance(params.period_multiple);
    melnikov_generic_meta(&sys, &res, &[0.0, 0.0, theta3], &path, params.tol, Some(meta))
}

/// Closed-form coefficient
/// `(2π/e³)((2-e²)/√(1-e²) i cos 2θ₂ + 2 sin 2θ₂ + i e²/(3√(1-e²)))`
/// for the top segment of `γ_θ`.
pub fn top_segment_leading(e: f64, theta2: f64) -> C64 {
    let s = (1.0 - e * e).sqrt();
    let i = C64::new(0.0, 1.0);
    TAU / e.powi(3) * (i * (2.0 - e * e) / s * (2.0 * theta2).cos() + 2.0 * (2.0 * theta2).sin() + i * e * e / (3.0 * s))
}

/// `∫ sin φ (cos 2(φ + θ₂) + ⅓)/(1 + e cos φ) dt` over the top segment of
/// `γ_θ`, traversed from `2T*/3 + iM` to `T*/3 + iM`.
pub fn top_segment_numeric(e: f64, mu: f64, i1_star: f64, theta2: f64, params: &ContourParams) -> Result<QuadratureResult, MelnikovError> {
    let sys = PlanarCrtbp::new(e, mu, i1_star)?;
    let orbit = sys.orbit()?;
    let (path, _) = params.gamma(&orbit)?;
    let tracker = continue_phi(&orbit, &path)?;
    let top = gamma_segments::TOP;
    integrate_phi(&tracker, top..top + 1, params.tol, |phi| {
        phi.sin() * ((2.0 * (phi + theta2)).cos() + 1.0 / 3.0) / (1.0 + e * phi.cos())
    })
}

/// The true-anomaly integral of [`melnikov_planar`] (prefactor included)
/// over a circle of radius `radius · K₁/ω₁` about the singular time
/// `T + iK₁/ω₁`, traversed `turns` times counter-clockwise. The anomaly is
/// carried to the circle from `T` along a vertical line.
pub fn small_circle_integral(
    e: f64,
    mu: f64,
    i1_star: f64,
    theta2: f64,
    radius: f64,
    turns: f64,
    tol: f64,
) -> Result<QuadratureResult, MelnikovError> {
    let sys = PlanarCrtbp::new(e, mu, i1_star)?;
    let orbit = sys.orbit()?;
    let height = k1(e) / orbit.omega1();
    let delta = radius * height;
    let t = orbit.period();
    let cell = 3.0 * t;
    let centre = C64::new(t, height);
    let approach = polyline(&[C64::new(t, 0.0), centre - C64::new(0.0, delta)], cell)?;
    let mut segments = approach.segments;
    segments.extend(circle(centre, delta, turns, cell)?.segments);
    let path = ContourPath::new(segments, cell)?;
    let tracker = continue_phi(&orbit, &path)?;
    let q = integrate_phi(&tracker, 1..2, tol, |phi| anomaly_integrand(e, theta2, phi, EccentricSign::Minus))?;
    let c = prefactor(&sys);
    Ok(QuadratureResult { value: c * q.value, error_estimate: c * q.error_estimate, nodes_used: q.nodes_used })
}

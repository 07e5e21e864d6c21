//! Delaunay elements of the scaled Kepler problem.
//!
//! The planar generating function is `W = I₂φ + χ(r, I₁, I₂)` with
//! `χ = ∫ p_r dr` from the inner turning point. The ellipse it describes has
//! gravitational parameter `1-μ` and semi-major axis `a = I₁²(1-μ)^{-1/3}`,
//! so that the mean motion is `(1-μ)/I₁³` and the Delaunay action conjugate
//! to the mean anomaly is `L = (1-μ)^{1/3} I₁`. With this scaling the angle
//! `θ₁` is the mean anomaly and `θ₂ - χ₂(R) = θ₂ + f` carries the true
//! anomaly `f`.
//!
//! Complex-time evaluations are parametrised by the eccentric anomaly `E`,
//! which uniformises both `R` and the trigonometric functions of `χ₂`.
//!
//! The spatial part adds `χ̂(ψ, I₂, I₃)` for the colatitude, the implicit
//! colatitude `Ψ(θ₁, θ₂, I)` and the perturbation function `ĥ₁`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kepler_core::{solve_kepler, solve_kepler_real, KeplerError, KeplerOrbit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelaunayError {
    #[error("inadmissible actions: {0}")]
    Actions(String),
    #[error("{quantity} = {value} outside its domain [{lo}, {hi}]")]
    Domain { quantity: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("Newton iteration for {0} did not converge")]
    NoConvergence(&'static str),
    #[error(transparent)]
    Kepler(#[from] KeplerError),
}

/// Inner and outer radial turning points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoints {
    pub r_minus: f64,
    pub r_plus: f64,
}

/// Planar actions `(I₁, I₂)` with the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarDelaunay {
    mu: f64,
    i1: f64,
    i2: f64,
    a: f64,
    e: f64,
}

impl PlanarDelaunay {
    /// Requires `0 < I₂ ≤ (1-μ)^{1/3} I₁`.
    pub fn new(mu: f64, i1: f64, i2: f64) -> Result<Self, DelaunayError> {
        if !(0.0..1.0).contains(&mu) || !(i1 > 0.0) || !(i2 > 0.0) {
            return Err(DelaunayError::Actions(format!("mu = {mu}, I1 = {i1}, I2 = {i2}")));
        }
        let l = (1.0 - mu).cbrt() * i1;
        let ratio = i2 / l;
        if ratio > 1.0 + 1e-14 {
            return Err(DelaunayError::Actions(format!("I2 = {i2} exceeds (1-mu)^(1/3) I1 = {l}")));
        }
        let e = (1.0 - ratio.min(1.0).powi(2)).max(0.0).sqrt();
        Ok(Self { mu, i1, i2, a: i1 * i1 / (1.0 - mu).cbrt(), e })
    }

    /// Actions of the resonant orbit with eccentricity `e` and first action
    /// `I₁*`: `I₂* = I₁*(1-μ)^{1/3}√(1-e²)`.
    pub fn resonant(mu: f64, e: f64, i1_star: f64) -> Result<Self, DelaunayError> {
        let i2 = i1_star * (1.0 - mu).cbrt() * (1.0 - e * e).sqrt();
        let mut d = Self::new(mu, i1_star, i2)?;
        d.e = e;
        Ok(d)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn i1(&self) -> f64 {
        self.i1
    }

    pub fn i2(&self) -> f64 {
        self.i2
    }

    pub fn eccentricity(&self) -> f64 {
        self.e
    }

    pub fn semi_major_axis(&self) -> f64 {
        self.a
    }

    /// Gravitational parameter of the primary in scaled units.
    pub fn gm(&self) -> f64 {
        1.0 - self.mu
    }

    /// Mean motion `(1-μ)/I₁³`.
    pub fn mean_motion(&self) -> f64 {
        (1.0 - self.mu) / self.i1.powi(3)
    }

    /// The Kepler orbit traced with `θ₁ = 0` at perihelion.
    pub fn orbit(&self) -> Result<KeplerOrbit, KeplerError> {
        KeplerOrbit::new(self.mu, self.e, self.i2)
    }

    pub fn turning_points(&self) -> TurningPoints {
        TurningPoints { r_minus: self.a * (1.0 - self.e), r_plus: self.a * (1.0 + self.e) }
    }

    fn check_radius(&self, r: f64) -> Result<TurningPoints, DelaunayError> {
        let tp = self.turning_points();
        let slack = 1e-14 * self.a;
        if !(r >= tp.r_minus - slack && r <= tp.r_plus + slack) {
            return Err(DelaunayError::Domain { quantity: "r", value: r, lo: tp.r_minus, hi: tp.r_plus });
        }
        Ok(tp)
    }

    /// `p_r = ∂χ/∂r = (2(1-μ)/r - (1-μ)/a - I₂²/r²)^{1/2}`.
    pub fn radial_momentum(&self, r: f64) -> f64 {
        let gm = self.gm();
        (2.0 * gm / r - gm / self.a - self.i2 * self.i2 / (r * r)).max(0.0).sqrt()
    }

    /// Eccentric anomaly in `[0, π]` of a radius on the outbound half.
    pub fn anomaly_of_radius(&self, r: f64) -> Result<f64, DelaunayError> {
        let tp = self.check_radius(r)?;
        let width = tp.r_plus - tp.r_minus;
        if width == 0.0 {
            return Ok(0.0);
        }
        let lower = ((r - tp.r_minus) / width).clamp(0.0, 1.0);
        Ok(if lower <= 0.5 {
            2.0 * lower.sqrt().asin()
        } else {
            PI - 2.0 * (1.0 - lower).sqrt().asin()
        })
    }

    fn bracket(&self, r: f64, tp: TurningPoints) -> f64 {
        let (rm, rp) = (tp.r_minus, tp.r_plus);
        let width = rp - rm;
        let outer = ((rp - r) / width).clamp(0.0, 1.0);
        -2.0 * self.a * outer.sqrt().asin()
            + ((rp - r).max(0.0) * (r - rm).max(0.0)).sqrt()
            + 2.0 * (rp * rm).sqrt() * f64::atan2((rm * (rp - r).max(0.0)).sqrt(), (rp * (r - rm).max(0.0)).sqrt())
    }

    /// Closed form of `χ(r)`, normalised so that `χ(r₋) = 0`.
    pub fn chi(&self, r: f64) -> Result<f64, DelaunayError> {
        let tp = self.check_radius(r)?;
        if self.e == 0.0 {
            return Ok(0.0);
        }
        let scale = (self.gm() / self.a).sqrt();
        Ok(scale * (self.bracket(r, tp) - self.bracket(tp.r_minus, tp)))
    }

    /// `χ₁ = (1-μ)^{-1/3} ∂χ/∂I₁`, the mean anomaly on the outbound half.
    pub fn chi1(&self, r: f64) -> Result<f64, DelaunayError> {
        let ecc = self.anomaly_of_radius(r)?;
        Ok(ecc - self.e * ecc.sin())
    }

    /// `χ₂ = ∂χ/∂I₂`, minus the true anomaly on the outbound half.
    pub fn chi2(&self, r: f64) -> Result<f64, DelaunayError> {
        let ecc = self.anomaly_of_radius(r)?;
        Ok(-true_anomaly(self.e, ecc))
    }

    /// `∂χ₂/∂r` on the outbound half; it diverges at the turning points.
    pub fn chi2_r(&self, r: f64) -> Result<f64, DelaunayError> {
        let ecc = self.anomaly_of_radius(r)?;
        let s = (1.0 - self.e * self.e).sqrt();
        Ok(-s / ((1.0 - self.e * ecc.cos()) * self.a * self.e * ecc.sin()))
    }

    /// `χ₁` continued along the orbit: `inbound` selects the half with
    /// `p_r < 0`, on which `χ₁ = 2π - χ₁(outbound)`.
    pub fn chi1_branch(&self, r: f64, inbound: bool) -> Result<f64, DelaunayError> {
        let v = self.chi1(r)?;
        Ok(if inbound { TAU - v } else { v })
    }

    /// `χ₂(R(θ₁))` continued along the orbit, equal to `-f(θ₁)` with `f`
    /// increasing by `2π` per revolution.
    pub fn chi2_on_orbit(&self, theta1: f64) -> Result<f64, DelaunayError> {
        let turns = (theta1 / TAU).floor();
        let m = theta1 - TAU * turns;
        let r = self.solve_r(m, None)?;
        let outbound = -self.chi2(r)?;
        let f = if m <= PI { outbound } else { TAU - outbound };
        Ok(-(f + TAU * turns))
    }

    /// `R(θ₁)`: the radius whose mean anomaly is `θ₁`.
    ///
    /// The eccentric anomaly is found by Newton iteration on Kepler's
    /// equation with a bisection safeguard, seeded from `seed` (a nearby
    /// radius on the same half of the orbit) when given. Circular orbits
    /// short-circuit to `R = a`.
    pub fn solve_r(&self, theta1: f64, seed: Option<f64>) -> Result<f64, DelaunayError> {
        if self.e < 1e-6 {
            return Ok(self.a);
        }
        let ecc = match seed {
            Some(r) => {
                let m = theta1.rem_euclid(TAU);
                let e0 = self.anomaly_of_radius(r.clamp(self.turning_points().r_minus, self.turning_points().r_plus))?;
                let e0 = if m <= PI { e0 } else { TAU - e0 };
                newton_kepler_bracketed(self.e, m, e0)
            }
            None => solve_kepler_real(self.e, theta1),
        };
        Ok(self.a * (1.0 - self.e * ecc.cos()))
    }

    /// `∂R/∂θ₁` at mean anomaly `θ₁`.
    pub fn radius_rate(&self, theta1: f64) -> f64 {
        let ecc = solve_kepler_real(self.e, theta1);
        self.a * self.e * ecc.sin() / (1.0 - self.e * ecc.cos())
    }

    /// Radial quantities at a (complex) eccentric anomaly.
    pub fn radial_state(&self, ecc: C64) -> RadialState {
        let (c, s_e) = (ecc.cos(), ecc.sin());
        let e = self.e;
        let s = (1.0 - e * e).sqrt();
        let q = 1.0 - e * c;
        RadialState {
            r: self.a * q,
            r_theta1: self.a * e * s_e / q,
            cos_f: (c - e) / q,
            sin_f: s * s_e / q,
            chi2_r: -s / (q * self.a * e * s_e),
            chi2_r_r_theta1: -s / (q * q),
        }
    }

    /// Eccentric anomaly for a complex mean anomaly, from a nearby `seed`.
    pub fn anomaly(&self, theta1: C64, seed: C64) -> Result<C64, DelaunayError> {
        Ok(solve_kepler(self.e, theta1, seed)?)
    }
}

/// True anomaly for eccentric anomaly `E ∈ [-π, π]`, continuous in `E`.
pub fn true_anomaly(e: f64, ecc: f64) -> f64 {
    let turns = (ecc / TAU).round();
    let x = ecc - TAU * turns;
    let half = 0.5 * x;
    2.0 * f64::atan2((1.0 + e).sqrt() * half.sin(), (1.0 - e).sqrt() * half.cos()) + TAU * turns
}

fn newton_kepler_bracketed(e: f64, m: f64, seed: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, TAU);
    let mut x = seed.clamp(lo, hi);
    for _ in 0..200 {
        let f = x - e * x.sin() - m;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - f / (1.0 - e * x.cos());
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Radius, its mean-anomaly derivative, the true anomaly (through its
/// cosine and sine) and `∂χ₂/∂r` at one point of the orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub r: C64,
    pub r_theta1: C64,
    pub cos_f: C64,
    pub sin_f: C64,
    pub chi2_r: C64,
    /// `(∂χ₂/∂r)(∂R/∂θ₁)`, finite at the turning points where the factors
    /// are not.
    pub chi2_r_r_theta1: C64,
}

fn colatitude_root(psi: f64, i2: f64, i3: f64) -> Result<f64, DelaunayError> {
    let v = i2 * i2 * psi.sin().powi(2) - i3 * i3;
    if v < -1e-14 * i2 * i2 {
        return Err(DelaunayError::Domain { quantity: "psi", value: psi, lo: (i3 / i2).asin(), hi: PI - (i3 / i2).asin() });
    }
    Ok(v.max(0.0).sqrt())
}

fn check_spatial(i2: f64, i3: f64) -> Result<(), DelaunayError> {
    if !(i2 > 0.0 && i3 >= 0.0 && i3 <= i2) {
        return Err(DelaunayError::Actions(format!("need 0 <= I3 <= I2, got I2 = {i2}, I3 = {i3}")));
    }
    Ok(())
}

/// `χ̂(ψ) = ∫_{ψ₀}^{ψ} (I₂² - I₃²/sin²s)^{1/2} ds` on `ψ ∈ [ψ₀, π - ψ₀]`.
pub fn hat_chi(psi: f64, i2: f64, i3: f64) -> Result<f64, DelaunayError> {
    check_spatial(i2, i3)?;
    let s = colatitude_root(psi, i2, i3)?;
    Ok(i2 * f64::atan2(s, i2 * psi.cos()) - i3 * f64::atan2(s, i3 * psi.cos()))
}

/// `χ̂₂ = ∂χ̂/∂I₂`.
pub fn hat_chi2(psi: f64, i2: f64, i3: f64) -> Result<f64, DelaunayError> {
    check_spatial(i2, i3)?;
    let s = colatitude_root(psi, i2, i3)?;
    Ok(f64::atan2(s, i2 * psi.cos()))
}

/// `χ̂₃ = ∂χ̂/∂I₃`.
pub fn hat_chi3(psi: f64, i2: f64, i3: f64) -> Result<f64, DelaunayError> {
    check_spatial(i2, i3)?;
    let s = colatitude_root(psi, i2, i3)?;
    Ok(-f64::atan2(s, i3 * psi.cos()))
}

/// Actions of the spatial problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialDelaunay {
    pub planar: PlanarDelaunay,
    pub i3: f64,
}

impl SpatialDelaunay {
    pub fn new(mu: f64, i1: f64, i2: f64, i3: f64) -> Result<Self, DelaunayError> {
        check_spatial(i2, i3)?;
        Ok(Self { planar: PlanarDelaunay::new(mu, i1, i2)?, i3 })
    }

    /// The equatorial resonant family `I₂ = I₃ = I₂*`.
    pub fn equatorial(mu: f64, e: f64, i1_star: f64) -> Result<Self, DelaunayError> {
        let planar = PlanarDelaunay::resonant(mu, e, i1_star)?;
        Ok(Self { planar, i3: planar.i2() })
    }

    pub fn is_equatorial(&self) -> bool {
        self.i3 == self.planar.i2()
    }

    /// `sin i = √(1 - I₃²/I₂²)`.
    pub fn sin_inclination(&self) -> f64 {
        (1.0 - (self.i3 / self.planar.i2()).powi(2)).max(0.0).sqrt()
    }

    /// Argument of latitude `θ₂ - χ₂(R(θ₁))`.
    pub fn latitude_argument(&self, theta1: f64, theta2: f64) -> Result<f64, DelaunayError> {
        Ok(theta2 - self.planar.chi2_on_orbit(theta1)?)
    }

    /// `Ψ(θ₁, θ₂)`: solves `χ̂₂(Ψ) + χ₂(R(θ₁)) = θ₂`.
    ///
    /// The argument of latitude must lie in `[0, π]`, the range of the
    /// principal branch of `χ̂₂`. On the equatorial family `Ψ ≡ π/2`.
    pub fn solve_psi(&self, theta1: f64, theta2: f64) -> Result<f64, DelaunayError> {
        if self.is_equatorial() {
            return Ok(FRAC_PI_2);
        }
        let u = self.latitude_argument(theta1, theta2)?;
        if !(0.0..=PI).contains(&u) {
            return Err(DelaunayError::Domain { quantity: "argument of latitude", value: u, lo: 0.0, hi: PI });
        }
        let (i2, i3) = (self.planar.i2(), self.i3);
        let mut psi = (self.sin_inclination() * u.cos()).clamp(-1.0, 1.0).acos();
        for _ in 0..crate::kepler_core::NEWTON_MAX_ITER {
            let residual = hat_chi2(psi, i2, i3)? - u;
            if residual.abs() < 1e-12 {
                return Ok(psi);
            }
            let slope = i2 / (i2 * i2 - i3 * i3 / psi.sin().powi(2)).max(0.0).sqrt();
            if !slope.is_finite() {
                return Ok(psi);
            }
            psi -= residual / slope;
        }
        Err(DelaunayError::NoConvergence("Psi"))
    }

    /// The pieces of `ĥ₁` at real angles.
    pub fn h_hat_parts(&self, theta: [f64; 3]) -> Result<HatParts, DelaunayError> {
        let p = &self.planar;
        let ecc = solve_kepler_real(p.eccentricity(), theta[0]);
        let rs = p.radial_state(C64::new(ecc, 0.0));
        let u = self.latitude_argument(theta[0], theta[1])?;
        let psi = self.solve_psi(theta[0], theta[1])?;
        let (i2, i3) = (p.i2(), self.i3);
        let w = if self.is_equatorial() {
            theta[2] + u
        } else {
            theta[2] - hat_chi3(psi, i2, i3)?
        };
        Ok(HatParts::new(rs, psi, w, i2, i3))
    }

    /// `ĥ₁(I, θ)` at real angles.
    pub fn eval_h_hat1(&self, theta: [f64; 3]) -> Result<f64, DelaunayError> {
        Ok(self.h_hat_parts(theta)?.h_hat1().re)
    }

    /// `R² sin²Ψ (3 cos 2(θ₃ - χ̂₃(Ψ)) + 1)`, the angular profile of the
    /// sixth-order term of the Hamiltonian (which is `-μ/4` times it).
    pub fn perturbation_profile(&self, theta: [f64; 3]) -> Result<f64, DelaunayError> {
        Ok(self.h_hat_parts(theta)?.profile().re)
    }
}

/// Ingredients of `ĥ₁` and of the other angle derivatives of the sixth-order
/// Hamiltonian term, valid for real and complex angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatParts {
    pub r: C64,
    pub r_theta1: C64,
    pub sin_psi: C64,
    pub cos_psi: C64,
    /// `∂Ψ/∂θ₁`.
    pub psi_theta1: C64,
    /// `∂Ψ/∂θ₂`.
    pub psi_theta2: C64,
    /// `(∂χ̂₃/∂ψ)(∂Ψ/∂θ₁)`, kept as a product because both factors are
    /// singular or zero on the equator.
    pub chi3_psi_psi_theta1: C64,
    /// `(∂χ̂₃/∂ψ)(∂Ψ/∂θ₂) = -I₃/(I₂ sin²Ψ)`.
    pub chi3_psi_psi_theta2: C64,
    pub cos_2w: C64,
    pub sin_2w: C64,
}

impl HatParts {
    /// Assembles the parts from the radial state, the colatitude `Ψ` and the
    /// azimuth argument `w = θ₃ - χ̂₃(Ψ)`.
    pub fn new(rs: RadialState, psi: impl Into<C64>, w: impl Into<C64>, i2: f64, i3: f64) -> Self {
        let w = w.into();
        Self::from_trig(rs, psi, (2.0 * w).cos(), (2.0 * w).sin(), i2, i3)
    }

    /// As [`new`](Self::new), with `w` given through `cos 2w` and `sin 2w`.
    pub fn from_trig(rs: RadialState, psi: impl Into<C64>, cos_2w: C64, sin_2w: C64, i2: f64, i3: f64) -> Self {
        let psi = psi.into();
        let (sin_psi, cos_psi) = (psi.sin(), psi.cos());
        let root = (i2 * i2 - i3 * i3 / (sin_psi * sin_psi)).sqrt();
        let coupling = rs.chi2_r_r_theta1;
        HatParts {
            r: rs.r,
            r_theta1: rs.r_theta1,
            sin_psi,
            cos_psi,
            psi_theta1: -coupling * root / i2,
            psi_theta2: root / i2,
            chi3_psi_psi_theta1: coupling * i3 / (i2 * sin_psi * sin_psi),
            chi3_psi_psi_theta2: -C64::from(i3) / (i2 * sin_psi * sin_psi),
            cos_2w,
            sin_2w,
        }
    }

    /// The three-term expression of `ĥ₁`.
    pub fn h_hat1(&self) -> C64 {
        let bracket = 3.0 * self.cos_2w + 1.0;
        let s2 = self.sin_psi * self.sin_psi;
        self.r_theta1 * self.r * s2 * bracket
            + self.r * self.r * self.psi_theta1 * self.sin_psi * self.cos_psi * bracket
            + 3.0 * self.r * self.r * s2 * self.chi3_psi_psi_theta1 * self.sin_2w
    }

    /// `∂/∂θ₂` of [`profile`](Self::profile).
    pub fn profile_theta2(&self) -> C64 {
        let bracket = 3.0 * self.cos_2w + 1.0;
        let s2 = self.sin_psi * self.sin_psi;
        self.r * self.r
            * (2.0 * self.sin_psi * self.cos_psi * self.psi_theta2 * bracket
                + 6.0 * s2 * self.chi3_psi_psi_theta2 * self.sin_2w)
    }

    /// `∂/∂θ₃` of [`profile`](Self::profile).
    pub fn profile_theta3(&self) -> C64 {
        -6.0 * self.r * self.r * self.sin_psi * self.sin_psi * self.sin_2w
    }

    pub fn profile(&self) -> C64 {
        self.r * self.r * self.sin_psi * self.sin_psi * (3.0 * self.cos_2w + 1.0)
    }
}

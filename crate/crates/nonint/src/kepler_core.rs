//! Scaled two-body kinematics in the rotating frame.
//!
//! The unperturbed motion is the ellipse `r = p²/((1-μ)(1 + e cos φ))` with
//! period `T = 2π p³ / ((1-μ)² (1-e²)^{3/2})`. The true anomaly obeys
//! `dφ/dt = ω₁ (1 + e cos φ)² / (1-e²)^{3/2}`, whose closed-form integral is
//! continued here into complex time. In complex time the anomaly escapes to
//! `i∞` at the singular times `nT + iK₁/ω₁`, and `1 + e cos φ` vanishes at
//! `φ = π + iK₂`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Newton residual accepted by the complex inversions (scaled by `1 + |t|`).
pub const NEWTON_TOL: f64 = 1e-12;
/// Iteration cap for every Newton loop in this module.
pub const NEWTON_MAX_ITER: usize = 50;
/// Smallest admissible `|1 + e cos φ|` before a pole error is raised.
pub const POLE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KeplerError {
    #[error("invalid orbit parameters: {0}")]
    InvalidParameters(String),
    #[error("|1 + e cos(phi)| = {magnitude:e} is below the pole guard at phi = {phi}")]
    Pole { phi: C64, magnitude: f64 },
    #[error("phi = {phi} lies outside the strip of the {branch:?} branch")]
    BranchDomain { phi: C64, branch: Branch },
    #[error("Newton iteration failed after {iterations} steps (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
}

/// Which closed form of the time law to evaluate.
///
/// `Principal` is valid for `|Re φ| < π` and `Shifted` for `0 < Re φ < 2π`.
/// The two coincide on `0 < Re φ < π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Principal,
    Shifted,
}

/// Parameters of a scaled Kepler ellipse together with its derived mean
/// motion and period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerOrbit {
    mu: f64,
    e: f64,
    p_phi: f64,
    omega1: f64,
    period: f64,
}

impl KeplerOrbit {
    pub fn new(mu: f64, e: f64, p_phi: f64) -> Result<Self, KeplerError> {
        if !(0.0..1.0).contains(&mu) {
            return Err(KeplerError::InvalidParameters(format!("mu = {mu} not in [0, 1)")));
        }
        if !(0.0..1.0).contains(&e) {
            return Err(KeplerError::InvalidParameters(format!("e = {e} not in [0, 1)")));
        }
        if !(p_phi > 0.0 && p_phi.is_finite()) {
            return Err(KeplerError::InvalidParameters(format!("p_phi = {p_phi} must be positive")));
        }
        let s = (1.0 - e * e).sqrt();
        let gm = 1.0 - mu;
        let period = TAU * p_phi.powi(3) / (gm * gm * s * s * s);
        Ok(Self { mu, e, p_phi, omega1: TAU / period, period })
    }

    /// The orbit on the resonant torus with first action `i1_star`: its
    /// angular momentum is `I₁*(1-μ)^{1/3}√(1-e²)`, which makes the period
    /// equal to `2π I₁*³/(1-μ)`.
    pub fn resonant(mu: f64, e: f64, i1_star: f64) -> Result<Self, KeplerError> {
        if !(i1_star > 0.0 && i1_star.is_finite()) {
            return Err(KeplerError::InvalidParameters(format!("I1* = {i1_star} must be positive")));
        }
        let p = i1_star * (1.0 - mu).cbrt() * (1.0 - e * e).sqrt();
        Self::new(mu, e, p)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn p_phi(&self) -> f64 {
        self.p_phi
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn s(&self) -> f64 {
        (1.0 - self.e * self.e).sqrt()
    }

    fn guarded_denominator(&self, phi: C64) -> Result<C64, KeplerError> {
        let d = 1.0 + self.e * phi.cos();
        if d.norm() < POLE_GUARD || !d.is_finite() {
            return Err(KeplerError::Pole { phi, magnitude: d.norm() });
        }
        Ok(d)
    }

    pub fn radius_of_phi(&self, phi: C64) -> Result<C64, KeplerError> {
        let d = self.guarded_denominator(phi)?;
        Ok(self.p_phi * self.p_phi / ((1.0 - self.mu) * d))
    }

    /// `dφ/dt` along the unperturbed orbit.
    pub fn phi_rate(&self, phi: C64) -> C64 {
        let d = 1.0 + self.e * phi.cos();
        self.omega1 * d * d / self.s().powi(3)
    }

    /// `dt/dφ`, the reciprocal of [`phi_rate`](Self::phi_rate).
    pub fn time_rate(&self, phi: C64) -> Result<C64, KeplerError> {
        let d = self.guarded_denominator(phi)?;
        Ok(self.s().powi(3) / (self.omega1 * d * d))
    }

    fn equation_of_center_term(&self, phi: C64) -> Result<C64, KeplerError> {
        let d = self.guarded_denominator(phi)?;
        Ok(self.e * self.s() * phi.sin() / d)
    }

    /// Time since perihelion on the requested branch of the closed-form time
    /// law.
    pub fn time_of_flight(&self, phi: C64, branch: Branch) -> Result<C64, KeplerError> {
        let c = ((1.0 - self.e) / (1.0 + self.e)).sqrt();
        let phase = match branch {
            Branch::Principal => {
                if !(phi.re.abs() < PI) {
                    return Err(KeplerError::BranchDomain { phi, branch });
                }
                2.0 * (c * (0.5 * phi).tan()).atan() - self.equation_of_center_term(phi)?
            }
            Branch::Shifted => {
                if !(phi.re > 0.0 && phi.re < TAU) {
                    return Err(KeplerError::BranchDomain { phi, branch });
                }
                // arccot(c cot((φ+π)/2)) written as arctan of the reciprocal,
                // which stays finite through φ = π.
                let half = 0.5 * phi;
                let recip = -(half.cos() / half.sin()) / c;
                2.0 * recip.atan() - self.equation_of_center_term(phi)? + PI
            }
        };
        Ok(phase / self.omega1)
    }

    /// Time law for arbitrary `φ`: reduces `φ` by multiples of `2π`, picks the
    /// branch whose strip keeps the reduced angle farthest from its edges, and
    /// adds the matching multiple of the period.
    ///
    /// Across the vertical rays `Re φ = π (mod 2π)`, `|Im φ| ≥ K₂` the result
    /// jumps by a full period; the function is single-valued only modulo `T`.
    pub fn time_of_flight_reduced(&self, phi: C64) -> Result<C64, KeplerError> {
        let n = (phi.re / TAU).round();
        let reduced = phi - TAU * n;
        let (shift, value) = if reduced.re.abs() <= 0.5 * PI {
            (n, self.time_of_flight(reduced, Branch::Principal)?)
        } else if reduced.re > 0.0 {
            (n, self.time_of_flight(reduced, Branch::Shifted)?)
        } else {
            (n - 1.0, self.time_of_flight(reduced + TAU, Branch::Shifted)?)
        };
        Ok(value + shift * self.period)
    }

    /// Residual `t(φ) - t` folded into `Re ∈ [-T/2, T/2]`.
    pub fn time_residual(&self, phi: C64, t: C64) -> Result<C64, KeplerError> {
        let r = self.time_of_flight_reduced(phi)? - t;
        Ok(r - self.period * (r.re / self.period).round())
    }

    /// Inverts the time law by Newton iteration started at `seed`.
    ///
    /// The seed selects the sheet: it must come from a nearby point of a
    /// continuation path (or from the real orbit), never from a cold start in
    /// the complex plane.
    pub fn phi_of_time(&self, t: C64, seed: C64) -> Result<C64, KeplerError> {
        let tol = NEWTON_TOL * (1.0 + t.norm());
        let mut phi = seed;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let r = self.time_residual(phi, t)?;
            residual = r.norm();
            if residual <= tol {
                return Ok(phi);
            }
            let step = r / self.time_rate(phi)?;
            phi -= step;
            if !phi.is_finite() {
                break;
            }
        }
        Err(KeplerError::NewtonDivergence { iterations: NEWTON_MAX_ITER, residual })
    }

    /// True anomaly at real time `t`, measured from perihelion at `t = 0` and
    /// increasing by `2π` per period.
    pub fn phi_real(&self, t: f64) -> f64 {
        let mean = self.omega1 * t;
        let turns = (mean / TAU).round();
        let ecc = solve_kepler_real(self.e, mean - TAU * turns);
        let half = 0.5 * ecc;
        let f = 2.0 * f64::atan2((1.0 + self.e).sqrt() * half.sin(), (1.0 - self.e).sqrt() * half.cos());
        f + TAU * turns
    }

    /// Singularity constants and the singular times `nT + iK₁/ω₁` inside one
    /// cell `[0, T*)` of the complex-time cylinder.
    pub fn singularity_data(&self, t_star: f64) -> Result<SingularityData, KeplerError> {
        if !(self.e > 0.0) {
            return Err(KeplerError::InvalidParameters("singular times require e > 0".into()));
        }
        let cells = t_star / self.period;
        let count = cells.round();
        if count < 1.0 || (cells - count).abs() > 1e-9 * cells.max(1.0) {
            return Err(KeplerError::InvalidParameters(format!(
                "T* = {t_star} is not a multiple of the period {}",
                self.period
            )));
        }
        let height = k1(self.e) / self.omega1;
        let singular_times = (0..count as usize).map(|n| C64::new(n as f64 * self.period, height)).collect();
        Ok(SingularityData { k1: k1(self.e), k2: k2(self.e), singular_times })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityData {
    pub k1: f64,
    pub k2: f64,
    pub singular_times: Vec<C64>,
}

/// Imaginary phase `ω₁t → iK₁` reached as `Im φ → ∞`.
pub fn k1(e: f64) -> f64 {
    let s = (1.0 - e * e).sqrt();
    2.0 * ((1.0 - e) / s).atanh() - s
}

/// Imaginary height of the zero `φ = π + iK₂` of `1 + e cos φ`.
pub fn k2(e: f64) -> f64 {
    (1.0 / e).acosh()
}

/// Eccentric anomaly for a real mean anomaly, by safeguarded Newton.
pub fn solve_kepler_real(e: f64, mean: f64) -> f64 {
    let turns = (mean / TAU).round();
    let m = mean - TAU * turns;
    if e == 0.0 || m == 0.0 {
        return m + TAU * turns;
    }
    // E - e sin E is increasing, so [-π, π] brackets the root.
    let (mut lo, mut hi) = (-PI, PI);
    let mut x = if e < 0.8 { m + e * m.sin() } else { PI.copysign(m) };
    for _ in 0..100 {
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
            x = next;
            break;
        }
        x = next;
    }
    x + TAU * turns
}

/// Eccentric anomaly for a complex mean anomaly by Newton from `seed`.
pub fn solve_kepler(e: f64, mean: C64, seed: C64) -> Result<C64, KeplerError> {
    let tol = NEWTON_TOL * (1.0 + mean.norm());
    let mut x = seed;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let f = x - e * x.sin() - mean;
        residual = f.norm();
        if residual <= tol {
            return Ok(x);
        }
        x -= f / (1.0 - e * x.cos());
        if !x.is_finite() {
            break;
        }
    }
    Err(KeplerError::NewtonDivergence { iterations: NEWTON_MAX_ITER, residual })
}

use num_complex::Complex64 as C64;

use super::{ContourError, ContourPath};
use crate::kepler_core::KeplerOrbit;

/// Largest continuation step, as a fraction of the segment parameter range.
pub const MAX_STEP: f64 = 1.0 / 64.0;
/// Smallest step before the continuation gives up.
pub const MIN_STEP: f64 = 1.0 / 1_048_576.0;

/// A quantity that can be carried analytically from one point of the complex
/// time plane to a nearby one.
pub trait Continuation {
    type State: Clone;

    /// Carries `from`, valid at `z0`, to `z1`. Returns `None` when the step
    /// is too long for the corrector to stay on the same sheet.
    fn step(&self, z0: C64, from: &Self::State, z1: C64) -> Option<Self::State>;
}

/// Sequential continuation of a [`Continuation`] along a whole path.
///
/// Construction walks the path once with adaptive steps and keeps every
/// accepted node. Later queries at arbitrary points are answered by a short
/// step from the nearest preceding node, so they always land on the sheet
/// reached by the walk.
#[derive(Debug, Clone)]
pub struct PathTracker<C: Continuation> {
    path: ContourPath,
    cont: C,
    nodes: Vec<Vec<(f64, C::State)>>,
}

impl<C: Continuation> PathTracker<C> {
    pub fn new(path: ContourPath, cont: C, initial: C::State) -> Result<Self, ContourError> {
        let mut nodes = Vec::with_capacity(path.segments.len());
        let mut state = initial;
        for (index, seg) in path.segments.iter().enumerate() {
            let mut seg_nodes = vec![(0.0, state.clone())];
            let (mut u, mut h) = (0.0f64, MAX_STEP);
            while u < 1.0 {
                let next = (u + h).min(1.0);
                match cont.step(seg.point(u), &state, seg.point(next)) {
                    Some(s) => {
                        state = s;
                        u = next;
                        seg_nodes.push((u, state.clone()));
                        h = (2.0 * h).min(MAX_STEP);
                    }
                    None => {
                        h *= 0.5;
                        if h < MIN_STEP {
                            return Err(ContourError::ContinuationFailure { segment: index, u });
                        }
                    }
                }
            }
            nodes.push(seg_nodes);
        }
        Ok(Self { path, cont, nodes })
    }

    pub fn path(&self) -> &ContourPath {
        &self.path
    }

    pub fn continuation(&self) -> &C {
        &self.cont
    }

    /// State at the end of the path.
    pub fn final_state(&self) -> &C::State {
        &self.nodes.last().and_then(|v| v.last()).expect("tracker holds nodes").1
    }

    /// Accepted continuation nodes as `(segment, u, state)`.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, f64, &C::State)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(k, v)| v.iter().map(move |(u, s)| (k, *u, s)))
    }

    /// State at parameter `u` of segment `segment`.
    pub fn state_at(&self, segment: usize, u: f64) -> Result<C::State, ContourError> {
        let seg_nodes = &self.nodes[segment];
        let seg = &self.path.segments[segment];
        let k = seg_nodes.partition_point(|(v, _)| *v <= u).max(1) - 1;
        let (mut v, mut state) = (seg_nodes[k].0, seg_nodes[k].1.clone());
        let mut h = u - v;
        while v < u {
            let next = if v + h >= u { u } else { v + h };
            match self.cont.step(seg.point(v), &state, seg.point(next)) {
                Some(s) => {
                    state = s;
                    v = next;
                }
                None => {
                    h *= 0.5;
                    if h < MIN_STEP * MIN_STEP {
                        return Err(ContourError::ContinuationFailure { segment, u });
                    }
                }
            }
        }
        Ok(state)
    }
}

/// Continuation of the true anomaly `φ(t)`: a fourth-order Runge-Kutta
/// predictor on `dφ/dt` followed by a Newton corrector on the time law.
#[derive(Debug, Clone, Copy)]
pub struct PhiContinuation {
    pub orbit: KeplerOrbit,
}

impl Continuation for PhiContinuation {
    type State = C64;

    fn step(&self, z0: C64, phi0: &C64, z1: C64) -> Option<C64> {
        let predicted = rk4(|p| self.orbit.phi_rate(p), *phi0, z1 - z0);
        if !predicted.is_finite() {
            return None;
        }
        let phi1 = self.orbit.phi_of_time(z1, predicted).ok()?;
        accept_corrected(*phi0, predicted, phi1)
    }
}

/// One classical Runge-Kutta step for the autonomous equation `y' = f(y)`.
pub fn rk4(f: impl Fn(C64) -> C64, y: C64, h: C64) -> C64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * h * k1);
    let k3 = f(y + 0.5 * h * k2);
    let k4 = f(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Rejects corrector results that moved far from the predictor, which is
/// how a jump to a neighbouring sheet shows up.
pub fn accept_corrected(start: C64, predicted: C64, corrected: C64) -> Option<C64> {
    let step = (predicted - start).norm();
    if (corrected - predicted).norm() <= 0.05 * step + 1e-9 {
        Some(corrected)
    } else {
        None
    }
}

/// Continues `φ` along `path`, starting from the real orbit at the path's
/// start point (which must lie on the real axis).
pub fn continue_phi(orbit: &KeplerOrbit, path: &ContourPath) -> Result<PathTracker<PhiContinuation>, ContourError> {
    let start = path.start();
    if start.im != 0.0 {
        return Err(ContourError::Geometry(format!("continuation must start on the real axis, not at {start}")));
    }
    let phi0 = C64::new(orbit.phi_real(start.re), 0.0);
    PathTracker::new(path.clone(), PhiContinuation { orbit: *orbit }, phi0)
}

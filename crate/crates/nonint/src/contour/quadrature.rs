use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{ContourError, ContourPath};

/// Nodes per Gauss-Legendre panel.
pub const PANEL_NODES: usize = 16;
/// Default absolute tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Integrand evaluations allowed before giving up.
pub const NODE_BUDGET: usize = 4_000_000;
const INITIAL_PANELS: usize = 4;
const MIN_PANEL_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: C64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Result of integrating a vector-valued integrand; the error estimate is
/// the largest componentwise estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorQuadrature {
    pub values: Vec<C64>,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

fn gauss_legendre() -> &'static ([f64; PANEL_NODES], [f64; PANEL_NODES]) {
    static RULE: OnceLock<([f64; PANEL_NODES], [f64; PANEL_NODES])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = PANEL_NODES;
        let mut x = [0.0; PANEL_NODES];
        let mut w = [0.0; PANEL_NODES];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

struct Panel {
    segment: usize,
    a: f64,
    b: f64,
    /// Integral over each half of the panel.
    halves: [Vec<C64>; 2],
    error: f64,
    l1: f64,
}

impl Panel {
    fn value(&self) -> impl Iterator<Item = C64> + '_ {
        self.halves[0].iter().zip(&self.halves[1]).map(|(x, y)| x + y)
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive quadrature of a vector-valued integrand along `path`.
///
/// `f(segment, u, z, out)` writes the integrand at parameter `u` of the given
/// segment (point `z`) into `out`; the factor `dz/du` is applied here. Every
/// panel carries a 16-node rule on the whole panel and on both halves; the
/// difference is its error estimate, and the panel with the largest estimate
/// is bisected until the total falls below `tol` (or below the roundoff
/// floor `50 ε ∫|f||dz|`, when that is larger).
pub fn integrate_vector<E, F>(path: &ContourPath, dim: usize, tol: f64, mut f: F) -> Result<VectorQuadrature, E>
where
    E: From<ContourError>,
    F: FnMut(usize, f64, C64, &mut [C64]) -> Result<(), E>,
{
    let (xs, ws) = gauss_legendre();
    let mut nodes_used = 0usize;
    let mut scratch = vec![C64::new(0.0, 0.0); dim];

    let mut rule = |segment: usize, a: f64, b: f64, nodes_used: &mut usize| -> Result<(Vec<C64>, f64), E> {
        let seg = &path.segments[segment];
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        let mut l1 = 0.0;
        for (x, w) in xs.iter().zip(ws) {
            let u = mid + half * x;
            f(segment, u, seg.point(u), &mut scratch)?;
            let jac = seg.tangent(u) * (w * half);
            for (a, v) in acc.iter_mut().zip(&scratch) {
                *a += v * jac;
                l1 += v.norm() * jac.norm();
            }
        }
        *nodes_used += PANEL_NODES;
        Ok((acc, l1))
    };

    let mut make_panel = |segment: usize, a: f64, b: f64, whole: Option<Vec<C64>>, nodes_used: &mut usize| -> Result<Panel, E> {
        let whole = match whole {
            Some(w) => w,
            None => rule(segment, a, b, nodes_used)?.0,
        };
        let m = 0.5 * (a + b);
        let (left, l1a) = rule(segment, a, m, nodes_used)?;
        let (right, l1b) = rule(segment, m, b, nodes_used)?;
        let error = whole
            .iter()
            .zip(left.iter().zip(&right))
            .map(|(w, (x, y))| (w - x - y).norm())
            .fold(0.0, f64::max);
        Ok(Panel { segment, a, b, halves: [left, right], error, l1: l1a + l1b })
    };

    let mut heap = BinaryHeap::new();
    let mut settled = Vec::new();
    for segment in 0..path.segments.len() {
        for k in 0..INITIAL_PANELS {
            let a = k as f64 / INITIAL_PANELS as f64;
            let b = (k + 1) as f64 / INITIAL_PANELS as f64;
            heap.push(make_panel(segment, a, b, None, &mut nodes_used)?);
        }
    }

    loop {
        let total: f64 = heap.iter().chain(settled.iter()).map(|p: &Panel| p.error).sum();
        let l1: f64 = heap.iter().chain(settled.iter()).map(|p: &Panel| p.l1).sum();
        let floor = 50.0 * f64::EPSILON * l1;
        if total <= tol.max(floor) || heap.is_empty() {
            let mut values = vec![C64::new(0.0, 0.0); dim];
            for p in heap.iter().chain(settled.iter()) {
                for (v, x) in values.iter_mut().zip(p.value()) {
                    *v += x;
                }
            }
            if total > tol.max(floor) {
                return Err(ContourError::ToleranceNotReached { error: total, tol, nodes: nodes_used }.into());
            }
            return Ok(VectorQuadrature { values, error_estimate: total, nodes_used });
        }
        if nodes_used > NODE_BUDGET {
            return Err(ContourError::ToleranceNotReached { error: total, tol, nodes: nodes_used }.into());
        }
        let worst = heap.pop().expect("heap is non-empty");
        if worst.b - worst.a < MIN_PANEL_WIDTH || worst.error <= 50.0 * f64::EPSILON * worst.l1 {
            settled.push(worst);
            continue;
        }
        let m = 0.5 * (worst.a + worst.b);
        let [left, right] = worst.halves;
        heap.push(make_panel(worst.segment, worst.a, m, Some(left), &mut nodes_used)?);
        heap.push(make_panel(worst.segment, m, worst.b, Some(right), &mut nodes_used)?);
    }
}

/// Adaptive quadrature of a single-valued analytic function along `path`.
pub fn integrate(path: &ContourPath, f: impl Fn(C64) -> C64, tol: f64) -> Result<QuadratureResult, ContourError> {
    let r = integrate_vector::<ContourError, _>(path, 1, tol, |_, _, z, out| {
        out[0] = f(z);
        Ok(())
    })?;
    Ok(QuadratureResult { value: r.values[0], error_estimate: r.error_estimate, nodes_used: r.nodes_used })
}

/// Winding number of `path` about `p`.
pub fn winding_number(path: &ContourPath, p: C64) -> Result<f64, ContourError> {
    let r = integrate(path, |z| 1.0 / (z - p), 1e-10)?;
    Ok((r.value / C64::new(0.0, 2.0 * PI)).re)
}

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::ContourError;

/// One piece of a contour, parametrised by `u ∈ [0, 1]`.
///
/// Arcs store their endpoints explicitly so that consecutive segments share
/// bit-identical junction points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Line { from: C64, to: C64 },
    /// Circular arc about `center` from `from`, turning by `sweep` radians
    /// (positive is counter-clockwise) and ending at `to`.
    Arc { center: C64, from: C64, to: C64, sweep: f64 },
}

impl Segment {
    pub fn line(from: C64, to: C64) -> Self {
        Segment::Line { from, to }
    }

    /// Arc from `from` about `center`. Half and whole turns get exact end
    /// points; other sweeps rotate the start point once.
    pub fn arc(center: C64, from: C64, sweep: f64) -> Self {
        let turns = sweep / TAU;
        let to = if turns.fract() == 0.0 {
            from
        } else if (turns - 0.5).fract() == 0.0 {
            2.0 * center - from
        } else {
            center + (from - center) * C64::from_polar(1.0, sweep)
        };
        Segment::Arc { center, from, to, sweep }
    }

    pub fn start(&self) -> C64 {
        match *self {
            Segment::Line { from, .. } | Segment::Arc { from, .. } => from,
        }
    }

    pub fn end(&self) -> C64 {
        match *self {
            Segment::Line { to, .. } | Segment::Arc { to, .. } => to,
        }
    }

    pub fn point(&self, u: f64) -> C64 {
        if u == 0.0 {
            return self.start();
        }
        if u == 1.0 {
            return self.end();
        }
        match *self {
            Segment::Line { from, to } => from + (to - from) * u,
            Segment::Arc { center, from, sweep, .. } => center + (from - center) * C64::from_polar(1.0, sweep * u),
        }
    }

    /// `dz/du`.
    pub fn tangent(&self, u: f64) -> C64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc { center, from, sweep, .. } => {
                C64::new(0.0, sweep) * (from - center) * C64::from_polar(1.0, sweep * u)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { center, from, sweep, .. } => (from - center).norm() * sweep.abs(),
        }
    }

    pub fn reversed(&self) -> Self {
        match *self {
            Segment::Line { from, to } => Segment::Line { from: to, to: from },
            Segment::Arc { center, from, to, sweep } => Segment::Arc { center, from: to, to: from, sweep: -sweep },
        }
    }

    /// Euclidean distance from `p` to the segment.
    pub fn distance_to(&self, p: C64) -> f64 {
        match *self {
            Segment::Line { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (p - from).norm();
                }
                let u = ((p - from) * d.conj()).re / len2;
                (p - (from + d * u.clamp(0.0, 1.0))).norm()
            }
            Segment::Arc { center, from, to, sweep } => {
                let radius = (from - center).norm();
                let offset = p - center;
                let start = (from - center).arg();
                let swept = if sweep >= 0.0 {
                    (offset.arg() - start).rem_euclid(TAU) <= sweep
                } else {
                    (start - offset.arg()).rem_euclid(TAU) <= -sweep
                };
                if swept || sweep.abs() >= TAU {
                    (offset.norm() - radius).abs()
                } else {
                    (p - from).norm().min((p - to).norm())
                }
            }
        }
    }
}

/// Piecewise path in the complex-time cylinder `ℂ / T*ℤ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    pub segments: Vec<Segment>,
    pub period_cell: f64,
}

impl ContourPath {
    /// Checks that consecutive segments meet exactly.
    pub fn new(segments: Vec<Segment>, period_cell: f64) -> Result<Self, ContourError> {
        if segments.is_empty() {
            return Err(ContourError::Geometry("a path needs at least one segment".into()));
        }
        if !(period_cell > 0.0) {
            return Err(ContourError::Geometry(format!("period cell {period_cell} must be positive")));
        }
        for (k, pair) in segments.windows(2).enumerate() {
            if pair[0].end() != pair[1].start() {
                return Err(ContourError::Geometry(format!(
                    "segment {k} ends at {} but segment {} starts at {}",
                    pair[0].end(),
                    k + 1,
                    pair[1].start()
                )));
            }
        }
        Ok(Self { segments, period_cell })
    }

    pub fn start(&self) -> C64 {
        self.segments[0].start()
    }

    pub fn end(&self) -> C64 {
        self.segments[self.segments.len() - 1].end()
    }

    /// Whether the end point equals the start point modulo `T*`, compared
    /// bit for bit.
    pub fn is_closed(&self) -> bool {
        let (a, b) = (self.start(), self.end());
        if a == b {
            return true;
        }
        let k = ((b.re - a.re) / self.period_cell).round();
        a.im == b.im && k != 0.0 && a.re + k * self.period_cell == b.re
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
            period_cell: self.period_cell,
        }
    }

    /// Sub-path made of the segments in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, ContourError> {
        Self::new(self.segments[range].to_vec(), self.period_cell)
    }

    /// Smallest distance from the path to any of `points` or their
    /// translates by `±T*`.
    pub fn clearance(&self, points: &[C64]) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.segments {
            for &p in points {
                for shift in [-1.0, 0.0, 1.0] {
                    best = best.min(seg.distance_to(p + shift * self.period_cell));
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("paths serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ContourError> {
        let raw: ContourPath = serde_json::from_str(text).map_err(|e| ContourError::Geometry(e.to_string()))?;
        Self::new(raw.segments, raw.period_cell)
    }
}

/// Side on which the loop detours around the singular times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown side '{other}' (expected left or right)")),
        }
    }
}

/// Index of the segments of the loop returned by [`build_gamma`].
pub mod gamma_segments {
    pub const REAL: usize = 0;
    pub const RIGHT_LOWER: usize = 1;
    pub const RIGHT_ARC: usize = 2;
    pub const RIGHT_UPPER: usize = 3;
    pub const TOP: usize = 4;
    pub const LEFT_UPPER: usize = 5;
    pub const LEFT_ARC: usize = 6;
    pub const LEFT_LOWER: usize = 7;
    pub const COUNT: usize = 8;
}

/// The rectangular loop through `T*/3`, `2T*/3`, `2T*/3 + iM`, `T*/3 + iM`.
///
/// The vertical legs detour around the points `T*/3 + i h` and `2T*/3 + i h`
/// (`h = height`) on half circles of radius `delta`. With [`Side::Left`] both
/// half circles lie to the left of their leg, so the loop winds once around
/// `T*/3 + ih` and not around `2T*/3 + ih`; [`Side::Right`] mirrors both.
pub fn build_gamma(t_star: f64, height: f64, delta: f64, big_m: f64, side: Side) -> Result<ContourPath, ContourError> {
    if !(delta > 0.0 && delta < height && height + delta < big_m) {
        return Err(ContourError::Geometry(format!(
            "need 0 < delta < height and height + delta < M (delta = {delta}, height = {height}, M = {big_m})"
        )));
    }
    if !(delta < t_star / 6.0) {
        return Err(ContourError::Geometry(format!("delta = {delta} too large for T* = {t_star}")));
    }
    let i = C64::new(0.0, 1.0);
    let (a, b) = (C64::new(t_star / 3.0, 0.0), C64::new(2.0 * t_star / 3.0, 0.0));
    // Going up the right leg, a left detour turns clockwise; going down the
    // left leg, a left detour (as seen in the complex plane) turns
    // counter-clockwise.
    let (right_sweep, left_sweep) = match side {
        Side::Left => (-PI, PI),
        Side::Right => (PI, -PI),
    };
    let right_arc = Segment::arc(b + i * height, b + i * (height - delta), right_sweep);
    let left_arc = Segment::arc(a + i * height, a + i * (height + delta), left_sweep);
    let segments = vec![
        Segment::line(a, b),
        Segment::line(b, right_arc.start()),
        right_arc,
        Segment::line(right_arc.end(), b + i * big_m),
        Segment::line(b + i * big_m, a + i * big_m),
        Segment::line(a + i * big_m, left_arc.start()),
        left_arc,
        Segment::line(left_arc.end(), a),
    ];
    ContourPath::new(segments, t_star)
}

/// Circle of radius `radius` about `center`, entered from directly below and
/// traversed `turns` times (negative for clockwise).
pub fn circle(center: C64, radius: f64, turns: f64, period_cell: f64) -> Result<ContourPath, ContourError> {
    let start = center - C64::new(0.0, radius);
    ContourPath::new(vec![Segment::arc(center, start, TAU * turns)], period_cell)
}

/// Polyline through the given vertices.
pub fn polyline(vertices: &[C64], period_cell: f64) -> Result<ContourPath, ContourError> {
    let segments = vertices.windows(2).map(|w| Segment::line(w[0], w[1])).collect();
    ContourPath::new(segments, period_cell)
}

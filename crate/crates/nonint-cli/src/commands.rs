//! Record producers for each subcommand.
//!
//! A sweep expands the config into grid points ordered by
//! `(e, mu, theta)` index, evaluates them on the worker pool and returns one
//! JSON value per point in grid order. A failing point yields an error
//! record instead of stopping the run.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use nonint::contour::ContourPath;
use nonint::kepler_core::{k1, KeplerOrbit};
use nonint::melnikov::{melnikov_planar, melnikov_spatial, ContourParams, GenericSystem, PlanarCrtbp, SpatialCrtbp};
use nonint::variational::{certify_nonintegrability, monodromy_gamma, monodromy_period, Monodromy, ResonanceData};

use crate::config::{RunConfig, SystemKind};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridPoint {
    pub e: f64,
    pub mu: f64,
    pub i1: f64,
    pub theta: f64,
}

/// Outcome of a sweep: records in grid order and the number that failed.
pub struct Sweep {
    pub records: Vec<Value>,
    pub failures: usize,
}

pub fn contour_params(cfg: &RunConfig) -> ContourParams {
    ContourParams { delta: cfg.delta, big_m: cfg.big_m, tol: cfg.tol, side: cfg.side, ..ContourParams::default() }
}

fn grid(cfg: &RunConfig) -> Vec<GridPoint> {
    let mut points = Vec::with_capacity(cfg.e.len() * cfg.mu.len() * cfg.theta.len());
    for &e in &cfg.e {
        for &mu in &cfg.mu {
            for &theta in &cfg.theta {
                points.push(GridPoint { e, mu, i1: cfg.i1, theta });
            }
        }
    }
    points
}

type Eval = dyn Fn(&GridPoint) -> Result<Value, String> + Sync;

fn sweep(cfg: &RunConfig, points: Vec<GridPoint>, eval: &Eval) -> Sweep {
    let hash = cfg.hash();
    let outcomes: Vec<Result<Value, String>> = points.par_iter().map(eval).collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    let records = points
        .iter()
        .zip(outcomes)
        .map(|(p, o)| match o {
            Ok(v) => json!({ "config_hash": hash, "params": p, "result": v }),
            Err(msg) => json!({ "config_hash": hash, "params": p, "error": msg }),
        })
        .collect();
    Sweep { records, failures }
}

fn to_value(v: impl Serialize) -> Result<Value, String> {
    serde_json::to_value(v).map_err(|e| e.to_string())
}

pub fn melnikov(cfg: &RunConfig, spatial: bool) -> Sweep {
    let params = contour_params(cfg);
    sweep(cfg, grid(cfg), &move |p: &GridPoint| {
        let r = if spatial {
            melnikov_spatial(p.e, p.mu, p.i1, p.theta, &params)
        } else {
            melnikov_planar(p.e, p.mu, p.i1, p.theta, &params)
        };
        r.map_err(|e| e.to_string()).and_then(to_value)
    })
}

fn element_value(m: &Monodromy) -> Value {
    let el = &m.element;
    let c3: Vec<Vec<C64>> = el.c3.row_iter().map(|r| r.iter().copied().collect()).collect();
    json!({
        "C1": el.c1.iter().copied().collect::<Vec<C64>>(),
        "C2": el.c2.iter().copied().collect::<Vec<C64>>(),
        "C3": c3,
        "error_estimate": m.error_estimate,
        "nodes_used": m.nodes_used,
    })
}

fn monodromy_record<S: GenericSystem>(sys: &S, res: &ResonanceData, theta: &[f64], gamma: &ContourPath, tol: f64) -> Result<Value, String> {
    let loop_m = monodromy_gamma(sys, res, theta, gamma, tol).map_err(|e| e.to_string())?;
    let period_m = monodromy_period(sys, res, theta, tol).map_err(|e| e.to_string())?;
    let commutes = loop_m.element.commutes(&period_m.element).map_err(|e| e.to_string())?;
    Ok(json!({
        "system": sys.name(),
        "theta": theta,
        "k_vec": res.k_vec,
        "t_star": res.t_star,
        "gamma": element_value(&loop_m),
        "period": element_value(&period_m),
        "commute": commutes,
    }))
}

fn certificate_record<S: GenericSystem>(sys: &S, res: &ResonanceData, theta: &[f64], gamma: &ContourPath, tol: f64) -> Result<Value, String> {
    certify_nonintegrability(sys, res, theta, gamma, tol).map_err(|e| e.to_string()).and_then(to_value)
}

type Recorder<S> = fn(&S, &ResonanceData, &[f64], &ContourPath, f64) -> Result<Value, String>;

fn run_point(
    kind: SystemKind,
    p: &GridPoint,
    params: &ContourParams,
    planar_rec: Recorder<PlanarCrtbp>,
    spatial_rec: Recorder<SpatialCrtbp>,
) -> Result<Value, String> {
    let tol = params.tol;
    match kind {
        SystemKind::Planar => {
            let sys = PlanarCrtbp::new(p.e, p.mu, p.i1).map_err(|e| e.to_string())?;
            let orbit = sys.orbit().map_err(|e| e.to_string())?;
            let (gamma, _) = params.gamma(&orbit).map_err(|e| e.to_string())?;
            planar_rec(&sys, &sys.resonance(params.period_multiple), &[0.0, p.theta], &gamma, tol)
        }
        SystemKind::Spatial => {
            let sys = SpatialCrtbp::new(p.e, p.mu, p.i1).map_err(|e| e.to_string())?;
            let orbit = sys.spatial().planar.orbit().map_err(|e| e.to_string())?;
            let (gamma, _) = params.gamma(&orbit).map_err(|e| e.to_string())?;
            spatial_rec(&sys, &sys.resonance(params.period_multiple), &[0.0, 0.0, p.theta], &gamma, tol)
        }
    }
}

pub fn monodromy(cfg: &RunConfig, kind: SystemKind) -> Sweep {
    let params = contour_params(cfg);
    sweep(cfg, grid(cfg), &move |p: &GridPoint| run_point(kind, p, &params, monodromy_record, monodromy_record))
}

pub fn certify(cfg: &RunConfig, kind: SystemKind) -> Sweep {
    let params = contour_params(cfg);
    sweep(cfg, grid(cfg), &move |p: &GridPoint| run_point(kind, p, &params, certificate_record, certificate_record))
}

/// The loop `γ_θ` for each `(e, mu)` pair, with its geometry.
pub fn gamma_dump(cfg: &RunConfig) -> Sweep {
    let params = contour_params(cfg);
    let points: Vec<GridPoint> =
        cfg.e.iter().flat_map(|&e| cfg.mu.iter().map(move |&mu| GridPoint { e, mu, i1: cfg.i1, theta: 0.0 })).collect();
    sweep(cfg, points, &move |p: &GridPoint| {
        let orbit = KeplerOrbit::resonant(p.mu, p.e, p.i1).map_err(|e| e.to_string())?;
        let (path, meta) = params.gamma(&orbit).map_err(|e| e.to_string())?;
        let singular = orbit.singularity_data(path.period_cell).map_err(|e| e.to_string())?;
        Ok(json!({ "gamma": meta, "singularities": singular, "path": path }))
    })
}

/// `(e, K₁(e))` on `n` evenly spaced eccentricities.
pub fn k1_curve(e_min: f64, e_max: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let e = if n == 1 { e_min } else { e_min + (e_max - e_min) * k as f64 / (n - 1) as f64 };
            (e, k1(e))
        })
        .collect()
}

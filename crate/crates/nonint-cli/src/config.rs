//! Run configuration shared by every subcommand and its content hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nonint::contour::Side;

/// Which three-body system a sweep runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Planar,
    Spatial,
}

/// Everything that determines the data a run writes. The worker count is
/// deliberately absent: it never changes the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub system: Option<SystemKind>,
    pub e: Vec<f64>,
    pub mu: Vec<f64>,
    pub i1: f64,
    pub theta: Vec<f64>,
    pub delta: f64,
    pub big_m: f64,
    pub tol: f64,
    pub side: Side,
    pub out: Option<String>,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }

    /// Hex SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rejects parameter combinations no grid point could satisfy.
    pub fn validate(&self) -> Result<(), String> {
        let bad = |name: &str, v: f64| format!("invalid {name} = {v}");
        if let Some(&e) = self.e.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(bad("e (need 0 < e < 1)", e));
        }
        if let Some(&mu) = self.mu.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(bad("mu (need 0 < mu < 1)", mu));
        }
        if !(self.i1 > 0.0 && self.i1.is_finite()) {
            return Err(bad("i1", self.i1));
        }
        if !(self.tol > 0.0) {
            return Err(bad("tol", self.tol));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(bad("delta (a multiple of K1/omega1 below 1)", self.delta));
        }
        if !(self.big_m > 1.0 + self.delta) {
            return Err(bad("big-m (a multiple of K1/omega1 above 1 + delta)", self.big_m));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err("theta grid holds a non-finite value".into());
        }
        Ok(())
    }
}

/// Parses `--theta-grid`: an integer `n` gives `kπ/n` for `k < n` (so `0`
/// is an empty grid), anything else is a comma-separated list of angles.
pub fn parse_theta_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if let Ok(n) = text.parse::<usize>() {
        return Ok((0..n).map(|k| k as f64 * std::f64::consts::PI / n as f64).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad theta value '{s}': {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> RunConfig {
        RunConfig {
            command: "melnikov".into(),
            system: Some(SystemKind::Planar),
            e: vec![0.2, 0.5, 0.8],
            mu: vec![0.3],
            i1: 1.0,
            theta: parse_theta_grid("8").unwrap(),
            delta: 0.05,
            big_m: 10.0,
            tol: 1e-10,
            side: Side::Left,
            out: None,
        }
    }

    #[test]
    fn theta_grid_forms() {
        assert!(parse_theta_grid("0").unwrap().is_empty());
        assert!(parse_theta_grid("").unwrap().is_empty());
        assert_eq!(parse_theta_grid("2").unwrap(), vec![0.0, std::f64::consts::FRAC_PI_2]);
        assert_eq!(parse_theta_grid("0.5, 1.5").unwrap(), vec![0.5, 1.5]);
        assert!(parse_theta_grid("a,b").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = sample();
        assert_eq!(a.hash(), sample().hash());
        assert_eq!(a.hash().len(), 64);
        let mut b = sample();
        b.tol = 1e-11;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation() {
        assert!(sample().validate().is_ok());
        let mut c = sample();
        c.e.push(1.0);
        assert!(c.validate().is_err());
        let mut c = sample();
        c.big_m = 1.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            e in proptest::collection::vec(proptest::num::f64::NORMAL, 0..5),
            theta in proptest::collection::vec(proptest::num::f64::ANY.prop_filter("finite", |x| x.is_finite()), 0..9),
            tol in proptest::num::f64::POSITIVE,
        ) {
            let c = RunConfig { e, theta, tol, ..sample() };
            let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.e), bits(&c.e));
            prop_assert_eq!(bits(&back.theta), bits(&c.theta));
            prop_assert_eq!(back.tol.to_bits(), c.tol.to_bits());
            prop_assert_eq!(back.hash(), c.hash());
        }
    }
}

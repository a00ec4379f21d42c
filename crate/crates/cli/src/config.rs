//! Flat JSON run configuration.
//!
//! ```json
//! {
//!   "gamma1": 1.0, "gamma2": 1.0, "gamma3": 1.0,
//!   "half_length": 20.0, "n": 512, "scheme": "chebyshev-mapped",
//!   "modes": 16,
//!   "tol_newton": 1e-10, "tol_eig": 1e-6, "tol_resolvent": 1e-8,
//!   "seed": 20240917,
//!   "output_dir": "out"
//! }
//! ```
//!
//! Every key is optional; missing keys take the defaults above.
//! `tol_newton` is the continuation residual target, `tol_eig` the allowed
//! two-scheme gap on `ω₀²`, and `tol_resolvent` the allowed relative
//! residual of the probe solve in `resolvent-scan`.

use std::path::{Path, PathBuf};

use dslab::grid::DEFAULT_CHEBYSHEV_MAP;
use dslab::{Grid1D, Params, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub half_length: f64,
    pub n: usize,
    pub scheme: Scheme,
    pub modes: usize,
    pub tol_newton: f64,
    pub tol_eig: f64,
    pub tol_resolvent: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            gamma1: 1.0,
            gamma2: 1.0,
            gamma3: 1.0,
            half_length: 20.0,
            n: 512,
            scheme: Scheme::ChebyshevMapped,
            modes: 16,
            tol_newton: 1e-10,
            tol_eig: 1e-6,
            tol_resolvent: 1e-8,
            seed: 20240917,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every module precondition that depends only on the config.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        self.grid()?;
        if self.modes < dslab::continuation::MIN_MODES {
            return Err(CliError::Config(format!(
                "modes must be at least {}, got {}",
                dslab::continuation::MIN_MODES,
                self.modes
            )));
        }
        for (name, v) in [
            ("tol_newton", self.tol_newton),
            ("tol_eig", self.tol_eig),
            ("tol_resolvent", self.tol_resolvent),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CliError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, CliError> {
        Params::new(self.gamma1, self.gamma2, self.gamma3).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::new(self.half_length, self.n, self.scheme, DEFAULT_CHEBYSHEV_MAP)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// The spectral grid with the configured box, for runs that need it
    /// whatever the configured scheme.
    pub fn spectral_grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::new(self.half_length, self.n, Scheme::ChebyshevMapped, DEFAULT_CHEBYSHEV_MAP)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = Config::default();
        c.validate().unwrap();
        let back: Config = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: Config = serde_json::from_str(r#"{"n": 128, "scheme": "finite-difference"}"#).unwrap();
        assert_eq!(c.n, 128);
        assert_eq!(c.scheme, Scheme::FiniteDifference);
        assert_eq!(c.modes, 16);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(serde_json::from_str::<Config>(r#"{"bogus": 1}"#).is_err());
        let c = Config {
            gamma1: 1.5,
            ..Config::default()
        };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = Config {
            modes: 2,
            ..Config::default()
        };
        assert!(c.validate().is_err());
    }
}

//! JSON / TOML coefficient definition files.
//!
//! ```json
//! { "period": 1.0, "alpha": 1.0, "kind": "shigesada", "fraction": 0.5 }
//! ```
//!
//! Kinds: `constant` (optional `grid`), `delta_comb`, `shigesada`
//! (`fraction`, optional `contrast`; absent means the outer level is zero),
//! `samples` (`values`, optional `normalize`), `piecewise` (`breakpoints`,
//! `levels`), `atoms` (`atoms` as `{position, mass}` objects) and `mixture`
//! (`continuous` with its own `kind` of `samples` or `piecewise`, plus
//! `atoms`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    make_constant_with_grid, make_delta_comb, make_shigesada, Atom, Continuous,
    PeriodicCoefficient, DEFAULT_SAMPLES,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub period: f64,
    pub alpha: f64,
    #[serde(flatten)]
    pub kind: CoefficientKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<usize>,
    },
    DeltaComb,
    Shigesada {
        fraction: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<f64>,
    },
    Samples {
        values: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    Atoms {
        atoms: Vec<Atom>,
    },
    Mixture {
        continuous: ContinuousFile,
        atoms: Vec<Atom>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousFile {
    Samples { values: Vec<f64> },
    Piecewise { breakpoints: Vec<f64>, levels: Vec<f64> },
}

impl From<ContinuousFile> for Continuous {
    fn from(c: ContinuousFile) -> Self {
        match c {
            ContinuousFile::Samples { values } => Continuous::Samples { values },
            ContinuousFile::Piecewise { breakpoints, levels } => {
                Continuous::Piecewise { breakpoints, levels }
            }
        }
    }
}

impl CoefficientFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }
    }

    /// The explicit description of `b` (samples, piecewise, atoms or mixture).
    pub fn from_coefficient(b: &PeriodicCoefficient) -> Self {
        let atoms = b.atoms().to_vec();
        let kind = match (b.continuous().cloned(), atoms.is_empty()) {
            (None, _) => CoefficientKind::Atoms { atoms },
            (Some(Continuous::Samples { values }), true) => CoefficientKind::Samples {
                values,
                normalize: false,
            },
            (Some(Continuous::Piecewise { breakpoints, levels }), true) => {
                CoefficientKind::Piecewise { breakpoints, levels }
            }
            (Some(c), false) => CoefficientKind::Mixture {
                continuous: match c {
                    Continuous::Samples { values } => ContinuousFile::Samples { values },
                    Continuous::Piecewise { breakpoints, levels } => {
                        ContinuousFile::Piecewise { breakpoints, levels }
                    }
                },
                atoms,
            },
        };
        Self {
            period: b.period(),
            alpha: b.alpha(),
            kind,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficient file serialises")
    }

    pub fn build(&self) -> Result<PeriodicCoefficient> {
        let (l, alpha) = (self.period, self.alpha);
        match &self.kind {
            CoefficientKind::Constant { grid } => {
                make_constant_with_grid(alpha, l, grid.unwrap_or(DEFAULT_SAMPLES))
            }
            CoefficientKind::DeltaComb => make_delta_comb(alpha, l),
            CoefficientKind::Shigesada { fraction, contrast } => {
                make_shigesada(alpha, l, *fraction, contrast.unwrap_or(f64::INFINITY))
            }
            CoefficientKind::Samples { values, normalize } => {
                if *normalize {
                    PeriodicCoefficient::from_samples_normalized(l, alpha, values.clone())
                } else {
                    PeriodicCoefficient::new(
                        l,
                        alpha,
                        Some(Continuous::Samples {
                            values: values.clone(),
                        }),
                        vec![],
                    )
                }
            }
            CoefficientKind::Piecewise { breakpoints, levels } => PeriodicCoefficient::new(
                l,
                alpha,
                Some(Continuous::Piecewise {
                    breakpoints: breakpoints.clone(),
                    levels: levels.clone(),
                }),
                vec![],
            ),
            CoefficientKind::Atoms { atoms } => {
                PeriodicCoefficient::new(l, alpha, None, atoms.clone())
            }
            CoefficientKind::Mixture { continuous, atoms } => PeriodicCoefficient::new(
                l,
                alpha,
                Some(continuous.clone().into()),
                atoms.clone(),
            ),
        }
    }
}

/// Loads and validates a coefficient file.
pub fn load_coefficient(path: &Path) -> Result<PeriodicCoefficient> {
    CoefficientFile::load(path)?.build()
}

//! Run configuration read from TOML. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridSpec, DEFAULT_DECAY_TOL};
use crate::krylov::KrylovOptions;
use crate::model::{
    EnergyModel, Monomial, Nonlinearity, Polynomial, Potential, PowerTerm, RemainderTerm,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub grid: GridConfig,
    pub nonlinearity: NonlinearityConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "default_decay_tol")]
    pub decay_tol: f64,
}

fn default_decay_tol() -> f64 {
    DEFAULT_DECAY_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub terms: Vec<PowerTerm>,
}

/// Leading part of `V`: explicit monomials, or `|x|^degree` when `monomials` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub degree: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monomials: Vec<Monomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remainder: Vec<RemainderTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisMode {
    /// Radial eigenfields of a compact self-adjoint operator built from the ground state.
    #[serde(rename = "eigen")]
    Eigen,
    /// Compactly supported mollifications of an orthonormal family, re-orthonormalized.
    #[serde(rename = "mollified", alias = "appendixA")]
    Mollified,
}

/// Galerkin dimension and the neighborhood radii, the latter relative to the ground-state norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionConfig {
    pub k: usize,
    pub mode: BasisMode,
    pub delta_rel: f64,
    pub tau_rel: f64,
    pub rho_rel: f64,
    /// Bound on the concentration point; defaults to a quarter of the box half-width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            k: 16,
            mode: BasisMode::Eigen,
            delta_rel: 0.2,
            tau_rel: 0.1,
            rho_rel: 0.1,
            radius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub eps: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            eps: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub eigenpairs: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { eigenpairs: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub lin: f64,
    pub lin_max_iter: usize,
    pub crit: f64,
    pub crit_max_iter: usize,
    pub fix: f64,
    pub fix_max_iter: usize,
    pub final_residual: f64,
    pub eig: f64,
    pub eig_max_iter: usize,
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lin: 1e-10,
            lin_max_iter: 500,
            crit: 1e-8,
            crit_max_iter: 10_000,
            fix: 1e-10,
            fix_max_iter: 100,
            final_residual: 1e-7,
            eig: 1e-7,
            eig_max_iter: 2000,
            uniqueness: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn krylov(&self) -> KrylovOptions {
        KrylovOptions {
            tol: self.lin,
            max_iter: self.lin_max_iter,
        }
    }
}

impl Default for RunConfig {
    /// Two-dimensional cubic model with `V = |x|^2` on the standard box.
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: None,
            grid: GridConfig {
                dim: 2,
                half_width: 16.0,
                points: 256,
                decay_tol: DEFAULT_DECAY_TOL,
            },
            nonlinearity: NonlinearityConfig {
                terms: vec![PowerTerm {
                    coeff: 1.0,
                    exponent: 4.0,
                }],
            },
            potential: PotentialConfig {
                degree: 2,
                monomials: Vec::new(),
                cap_width: None,
                remainder: Vec::new(),
            },
            reduction: ReductionConfig::default(),
            scan: ScanConfig::default(),
            spectrum: SpectrumConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks; the analytic hypotheses are checked separately.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        let t = &self.tolerances;
        for (name, v) in [
            ("lin", t.lin),
            ("crit", t.crit),
            ("fix", t.fix),
            ("final_residual", t.final_residual),
            ("eig", t.eig),
            ("uniqueness", t.uniqueness),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "tolerance {name} = {v} must be positive"
                )));
            }
        }
        for (name, v) in [
            ("lin_max_iter", t.lin_max_iter),
            ("crit_max_iter", t.crit_max_iter),
            ("fix_max_iter", t.fix_max_iter),
            ("eig_max_iter", t.eig_max_iter),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let r = &self.reduction;
        for (name, v) in [
            ("delta_rel", r.delta_rel),
            ("tau_rel", r.tau_rel),
            ("rho_rel", r.rho_rel),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if let Some(rad) = r.radius {
            if !(rad.is_finite() && rad > 0.0) {
                return Err(Error::Config(format!("radius = {rad} must be positive")));
            }
        }
        let eps = &self.scan.eps;
        if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config(format!(
                "eps values {eps:?} must be finite and nonnegative"
            )));
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config(format!(
                "eps values {eps:?} must be strictly decreasing"
            )));
        }
        if self.spectrum.eigenpairs == 0 {
            return Err(Error::Config("eigenpairs must be positive".into()));
        }
        if self
            .nonlinearity
            .terms
            .iter()
            .any(|t| !(t.coeff.is_finite() && t.exponent.is_finite()))
        {
            return Err(Error::Config("nonlinearity terms must be finite".into()));
        }
        self.potential()?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::with_decay_tol(g.dim, g.half_width, g.points, g.decay_tol)
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::new(self.nonlinearity.terms.clone())
    }

    pub fn potential(&self) -> Result<Potential> {
        let p = &self.potential;
        let dim = self.grid.dim;
        let leading = if p.monomials.is_empty() {
            Polynomial::isotropic(dim, p.degree)?
        } else {
            Polynomial::new(dim, p.monomials.clone())?
        };
        Potential::new(leading, p.degree, p.cap_width, p.remainder.clone())
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        EnergyModel::new(self.nonlinearity(), self.potential()?, self.grid_spec()?)
    }

    /// Concentration radius, defaulting to a quarter of the half-width.
    pub fn radius(&self) -> f64 {
        self.reduction.radius.unwrap_or(self.grid.half_width / 4.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[grid]
dim = 2
half_width = 16.0
points = 128

[nonlinearity]
terms = [{ coeff = 1.0, exponent = 4.0 }, { coeff = 0.1, exponent = 3.3 }]

[potential]
degree = 2
cap_width = 2.5
remainder = [{ coeff = 0.01, powers = [3, 0], width = 1.0 }]

[scan]
eps = [0.3, 0.1, 0.0]

[tolerances]
crit = 1e-9
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.tolerances.crit, 1e-9);
        assert_eq!(c.tolerances.lin, 1e-10);
        assert_eq!(c.reduction.k, 16);
        assert!(c.energy_model().is_ok());
    }

    #[test]
    fn round_trips_bit_exactly() {
        for c in [
            RunConfig::default(),
            RunConfig::from_toml_str(SAMPLE).unwrap(),
        ] {
            let s = c.to_toml_string().unwrap();
            let back = RunConfig::from_toml_str(&s).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml_string().unwrap(), s);
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SAMPLE.replace("seed = 7", "seed = 7\ncolour = 3");
        assert!(matches!(
            RunConfig::from_toml_str(&bad),
            Err(Error::Config(_))
        ));
        let bad = SAMPLE.replace("crit = 1e-9", "crit = 1e-9\nsloppy = 1.0");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(
            RunConfig::from_toml_str(&SAMPLE.replace("[0.3, 0.1, 0.0]", "[0.1, 0.3]")).is_err()
        );
        assert!(RunConfig::from_toml_str(&SAMPLE.replace("crit = 1e-9", "crit = -1.0")).is_err());
        assert!(RunConfig::from_toml_str(&SAMPLE.replace("points = 128", "points = 100")).is_err());
    }

    #[test]
    fn accepts_mode_alias() {
        let s = format!("{SAMPLE}\n[reduction]\nmode = \"appendixA\"\n");
        assert_eq!(
            RunConfig::from_toml_str(&s).unwrap().reduction.mode,
            BasisMode::Mollified
        );
    }
}

//! Experiment configuration: TOML with one level of sections.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use alphamod::bapu::{BapuSystem, Profile};
use alphamod::covering::{CoveringParams, Ix};
use alphamod::grid::Grid;
use alphamod::linalg;
use alphamod::norms::{SmoothnessParams, Q};
use alphamod::weights::{MatrixWeight, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every experiment id, one harness each.
pub const EXPERIMENTS: [&str; 14] = [
    "covering-check",
    "bapu-check",
    "frame-tightness",
    "norm-equivalence",
    "ap-diagnostics",
    "doubling",
    "reducing",
    "ad-membership",
    "ad-boundedness",
    "sampling-ineq",
    "conv-probe",
    "multiplier",
    "bessel",
    "embedding-decay",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub covering: CoveringConfig,
    pub grid: GridConfig,
    pub weight: WeightConfig,
    pub smoothness: SmoothnessConfig,
    pub run: RunConfig,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoveringConfig {
    pub alpha: f64,
    pub dim: usize,
    pub kmax: i64,
    pub c1: Option<f64>,
    pub a: Option<f64>,
    pub profile: String,
}

impl Default for CoveringConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            dim: 1,
            kmax: 3,
            c1: None,
            a: None,
            profile: "smooth_step".into(),
        }
    }
}

/// `halfwidth` wins over `halfwidth_pi` (in units of pi); default `32 pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub halfwidth: Option<f64>,
    pub halfwidth_pi: Option<f64>,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            halfwidth: None,
            halfwidth_pi: None,
            points: 1024,
        }
    }
}

impl GridConfig {
    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
            .or(self.halfwidth_pi.map(|t| t * PI))
            .unwrap_or(32.0 * PI)
    }
}

/// Weight generator. `kind` is one of `identity`, `constant`, `power`,
/// `bracket_power`, `rotated_power`, `constant_plus_power`, `scalar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub kind: String,
    pub n: usize,
    pub gammas: Vec<f64>,
    pub eps: f64,
    pub angle: f64,
    pub base: Vec<Vec<f64>>,
    pub id: String,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            kind: "identity".into(),
            n: 1,
            gammas: Vec::new(),
            eps: 0.0,
            angle: 0.0,
            base: Vec::new(),
            id: "one".into(),
        }
    }
}

/// `q` as a number or the string `inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothnessConfig {
    pub s: f64,
    pub p: f64,
    pub q: QValue,
    pub b: f64,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        Self {
            s: 0.0,
            p: 2.0,
            q: QValue::Num(2.0),
            b: 0.0,
        }
    }
}

/// Harness knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub samples: Option<usize>,
    pub corpus: Option<usize>,
    pub trials: Option<usize>,
    pub packets: Option<usize>,
    pub band: Option<f64>,
    pub lrad: Option<i64>,
    pub h_q: Option<f64>,
    pub domain: Option<f64>,
    pub step: Option<f64>,
    pub decay: Option<bool>,
    pub direct: Option<usize>,
    pub levels: Option<usize>,
    pub side0: Option<f64>,
    pub centers: Option<Vec<Vec<f64>>>,
    pub extent: Option<f64>,
    pub expect: Option<String>,
    pub expect_a1: Option<String>,
    pub expect_beta: Option<f64>,
    pub expect_le_sq: Option<f64>,
    pub method: Option<String>,
    pub profile_b: Option<String>,
    pub j: Option<f64>,
    pub delta: Option<f64>,
    pub m: Option<f64>,
    pub beta: Option<f64>,
    pub big_l: Option<f64>,
    pub le_sq_weight: Option<String>,
    pub symbol: Option<String>,
    pub order: Option<usize>,
    pub deltas: Option<Vec<f64>>,
    pub signal: Option<String>,
    pub sigma: Option<f64>,
    pub kmin: Option<f64>,
    pub refine: Option<usize>,
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parsed objects shared by every harness.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cover: CoveringParams,
    pub system: BapuSystem,
    pub grid: Grid,
    pub weight: MatrixWeight,
    pub smooth: SmoothnessParams,
    pub h_q: f64,
}

impl ExperimentConfig {
    /// Parse TOML; errors carry the line/column and field from the parser.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn q(&self) -> Result<Q, CliError> {
        match &self.smoothness.q {
            QValue::Num(v) => Q::parse(&v.to_string()),
            QValue::Text(s) => Q::parse(s),
        }
        .map_err(cfg_err)
    }

    pub fn covering_params(&self) -> Result<CoveringParams, CliError> {
        let c = &self.covering;
        let base = CoveringParams::new(c.alpha, c.dim, c.kmax).map_err(cfg_err)?;
        let c1 = c.c1.unwrap_or(base.c1);
        let a = c.a.unwrap_or(CoveringParams::a_floor(c.dim, c1) + 0.25);
        CoveringParams::with_constants(c.alpha, c.dim, c1, a, c.kmax).map_err(cfg_err)
    }

    pub fn weight(&self) -> Result<MatrixWeight, CliError> {
        let w = &self.weight;
        let dim = self.covering.dim;
        let base = || -> Result<linalg::CMat, CliError> {
            if w.base.is_empty() {
                Ok(linalg::identity(w.n))
            } else {
                linalg::from_real(&w.base).map_err(cfg_err)
            }
        };
        let gammas = || -> Vec<f64> {
            if w.gammas.is_empty() {
                vec![0.0; w.n]
            } else {
                w.gammas.clone()
            }
        };
        let out = match w.kind.as_str() {
            "identity" => {
                if !(1..=3).contains(&w.n) {
                    return Err(CliError::Config(format!(
                        "weight.n must be 1..=3, got {}",
                        w.n
                    )));
                }
                Ok(MatrixWeight::identity(dim, w.n))
            }
            "constant" => MatrixWeight::constant(dim, base()?),
            "power" => MatrixWeight::power(dim, gammas(), w.eps),
            "bracket_power" => MatrixWeight::bracket_power(dim, gammas()),
            "rotated_power" => MatrixWeight::rotated_power(dim, w.angle, gammas(), w.eps),
            "constant_plus_power" => MatrixWeight::new(
                dim,
                WeightSpec::ConstantPlusPower {
                    base: base()?,
                    gammas: gammas(),
                    eps: w.eps,
                },
            ),
            "scalar" => MatrixWeight::scalar(dim, &w.id),
            other => {
                return Err(CliError::Config(format!(
                    "weight.kind: unknown id `{other}`"
                )))
            }
        };
        out.map_err(|e| CliError::Config(format!("weight: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let cover = self
            .covering_params()
            .map_err(|e| CliError::Config(format!("covering: {e}")))?;
        let profile = Profile::from_name(&self.covering.profile)
            .map_err(|e| CliError::Config(format!("covering.profile: {e}")))?;
        let grid = Grid::new(self.covering.dim, self.grid.halfwidth(), self.grid.points)
            .map_err(|e| CliError::Config(format!("grid: {e}")))?;
        let weight = self.weight()?;
        let smooth = SmoothnessParams::new(
            self.covering.alpha,
            self.smoothness.s,
            self.smoothness.p,
            self.q()?,
        )
        .map_err(|e| CliError::Config(format!("smoothness: {e}")))?;
        let h_q = self.run.h_q.unwrap_or(grid.h());
        if !(h_q > 0.0) {
            return Err(CliError::Config("run.h_q must be positive".into()));
        }
        Ok(Resolved {
            system: BapuSystem::new(cover, profile),
            cover,
            grid,
            weight,
            smooth,
            h_q,
        })
    }

    /// Cross-field diagnostics without running; empty means consistent.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.experiment.is_empty() && !EXPERIMENTS.contains(&self.experiment.as_str()) {
            out.push(format!("experiment: unknown id `{}`", self.experiment));
        }
        if self.experiment.is_empty() {
            out.push("experiment: missing id".into());
        }
        let r = match self.resolve() {
            Ok(r) => r,
            Err(e) => {
                out.push(e.to_string());
                return out;
            }
        };
        let reach = r.system.band_reach();
        if reach > r.grid.guard() {
            out.push(format!(
                "band exceeds guard band: windows reach |xi| = {reach:.4} at kmax = {}, guard 0.9 pi/h = {:.4}",
                r.cover.kmax,
                r.grid.guard()
            ));
        }
        let kfar = Ix::d1(r.cover.kmax);
        let side = r.cover.cube_side(kfar);
        if side < 2.0 * r.h_q {
            out.push(format!(
                "quadrature under-resolved: cube side {side:.4e} at k = {} is below 2 h = {:.4e}",
                r.cover.kmax,
                2.0 * r.h_q
            ));
        }
        if let Some(s) = &self.run.symbol {
            if let Err(e) = alphamod::multiplier::Symbol::parse(s) {
                out.push(format!("run.symbol: {e}"));
            }
        }
        if let Some(m) = &self.run.method {
            if let Err(e) = alphamod::weights::ReducingMethod::from_name(m) {
                out.push(format!("run.method: {e}"));
            }
        }
        if let Some(p) = &self.run.profile_b {
            if let Err(e) = Profile::from_name(p) {
                out.push(format!("run.profile_b: {e}"));
            }
        }
        if let Some(id) = &self.run.le_sq_weight {
            if let Err(e) = MatrixWeight::scalar(self.covering.dim, id) {
                out.push(format!("run.le_sq_weight: {e}"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let cfg = ExperimentConfig {
            experiment: "bapu-check".into(),
            ..Default::default()
        };
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    }

    #[test]
    fn guard_band_diagnostic() {
        let mut cfg = ExperimentConfig {
            experiment: "bapu-check".into(),
            ..Default::default()
        };
        cfg.covering.kmax = 12;
        let d = cfg.validate();
        assert!(
            d.iter().any(|m| m.starts_with("band exceeds guard band")),
            "{d:?}"
        );
    }

    #[test]
    fn quadrature_diagnostic() {
        let mut cfg = ExperimentConfig {
            experiment: "sampling-ineq".into(),
            ..Default::default()
        };
        cfg.run.h_q = Some(1.0);
        let d = cfg.validate();
        assert!(
            d.iter().any(|m| m.starts_with("quadrature under-resolved")),
            "{d:?}"
        );
    }

    #[test]
    fn unknown_field_is_rejected_with_position() {
        let err = ExperimentConfig::from_toml("experiment = \"doubling\"\n[grid]\npoint = 3\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("point") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn toml_round_trip() {
        let text = "experiment = \"bessel\"\nseed = 9\n[smoothness]\nq = \"inf\"\nb = 1.0\n[run]\ncorpus = 5\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.q().unwrap(), Q::Infinity);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn weight_kinds_resolve() {
        for (kind, gammas) in [
            ("identity", vec![]),
            ("power", vec![0.5, -0.2]),
            ("bracket_power", vec![0.0, 2.0]),
            ("rotated_power", vec![0.5, -0.2]),
            ("constant_plus_power", vec![0.5, 0.3]),
        ] {
            let mut cfg = ExperimentConfig::default();
            cfg.weight.kind = kind.into();
            cfg.weight.n = 2;
            cfg.weight.gammas = gammas;
            assert_eq!(cfg.weight().unwrap().n, 2, "{kind}");
        }
        let mut cfg = ExperimentConfig::default();
        cfg.weight.kind = "scalar".into();
        cfg.weight.id = "abs_pow:0.5".into();
        assert_eq!(cfg.weight().unwrap().n, 1);
        cfg.weight.kind = "nope".into();
        assert!(matches!(cfg.weight(), Err(CliError::Config(_))));
    }
}

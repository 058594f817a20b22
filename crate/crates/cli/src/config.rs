//! TOML run configuration and its conversion into engine types.
//!
//! The key paths are part of the command-line contract (`model.rate.kappa`,
//! `model.equity.a1`, `bond.coupon_dates`, `numerics.mesh`,
//! `numerics.steps_per_year`, `truncation.s_max`, `truncation.y_half`,
//! `mc.n_paths`, `mc.seed`, …); `--dump-config` echoes a file that re-parses
//! to the identical configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use defbond::{
    BondSpec, EquityParams, LinearSolver, MarketState, McConfig, PricerConfig, RateParams,
    TruncationConfig,
};

use crate::CliError;

/// Whole configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub bond: BondSection,
    /// Optional truncation window; omitted, the engine sizes a default from
    /// the market state and horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSection>,
    pub numerics: NumericsSection,
    /// Monte Carlo sampling choices; omitted, the documented defaults below
    /// apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    /// Default output paths, overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub equity: EquitySection,
    pub rate: RateSection,
    pub market: MarketSection,
}

/// JDCEV equity/credit leg: σ(t,S) = a(t)·S^β with a(t) = a1·t + a2, and
/// λ(t,S) = b(t) + c·σ²(t,S) with b(t) = b1·t + b2.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquitySection {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub beta: f64,
}

/// Vasicek short rate dr = κ(θ − r)dt + δ dW.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub kappa: f64,
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub s0: f64,
    pub r0: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondSection {
    pub face_value: f64,
    pub coupon_dates: Vec<f64>,
    /// Coupon amounts as fractions of face value, aligned with
    /// `coupon_dates`.
    pub coupon_amounts: Vec<f64>,
    pub recovery: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub s_max: f64,
    pub y_half: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    /// Elements per axis ("Mesh n" = n×n).
    pub mesh: usize,
    pub steps_per_year: u32,
    /// `"direct"` (banded LDLᵀ, default) or `"cg"` (Jacobi-preconditioned
    /// conjugate gradients).
    #[serde(default = "default_solver")]
    pub solver: String,
    /// CG relative residual target (only with `solver = "cg"`).
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    /// CG iteration cap (only with `solver = "cg"`).
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
}

fn default_solver() -> String {
    "direct".to_owned()
}

fn default_cg_tol() -> f64 {
    1e-10
}

fn default_cg_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub seed: u64,
    /// Euler step in years (default 1/360).
    #[serde(default = "default_mc_dt")]
    pub dt: f64,
    #[serde(default)]
    pub antithetic: bool,
}

fn default_mc_dt() -> f64 {
    1.0 / 360.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Machine-readable pricing result (JSON).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<PathBuf>,
    /// Surface export (CSV).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
}

/// Tags engine validation errors with the config key path they came from.
fn at(key: &str) -> impl Fn(defbond::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            // toml's multi-line report compressed to one machine-parsable line.
            let msg = e.to_string().replace('\n', " ");
            CliError::Config(msg.split_whitespace().collect::<Vec<_>>().join(" "))
        })
    }

    pub fn equity(&self) -> Result<EquityParams, CliError> {
        let e = &self.model.equity;
        EquityParams::new(e.a1, e.a2, e.b1, e.b2, e.c, e.beta).map_err(at("model.equity"))
    }

    pub fn rate(&self) -> Result<RateParams, CliError> {
        let r = &self.model.rate;
        RateParams::new(r.kappa, r.theta, r.delta).map_err(at("model.rate"))
    }

    pub fn market(&self) -> Result<MarketState, CliError> {
        let m = &self.model.market;
        MarketState::new(m.s0, m.r0, m.rho).map_err(at("model.market"))
    }

    pub fn bond(&self) -> Result<BondSpec, CliError> {
        let b = &self.bond;
        BondSpec::new(
            b.face_value,
            b.coupon_dates.clone(),
            b.coupon_amounts.clone(),
            b.recovery,
        )
        .map_err(at("bond"))
    }

    pub fn truncation(&self) -> Result<Option<TruncationConfig>, CliError> {
        self.truncation
            .as_ref()
            .map(|t| TruncationConfig::new(t.s_max, t.y_half).map_err(at("truncation")))
            .transpose()
    }

    pub fn solver(&self) -> Result<LinearSolver, CliError> {
        let n = &self.numerics;
        match n.solver.as_str() {
            "direct" => Ok(LinearSolver::Direct),
            "cg" => Ok(LinearSolver::ConjugateGradient {
                tol: n.cg_tol,
                max_iter: n.cg_max_iter,
            }),
            other => Err(CliError::Config(format!(
                "numerics.solver: expected \"direct\" or \"cg\", got \"{other}\""
            ))),
        }
    }

    /// Assembles the full PDE pricer configuration, applying command-line
    /// overrides for the mesh and step density.
    pub fn pricer(
        &self,
        mesh_override: Option<usize>,
        steps_override: Option<u32>,
    ) -> Result<PricerConfig, CliError> {
        let n = &self.numerics;
        let mesh = mesh_override.unwrap_or(n.mesh);
        let steps_per_year = steps_override.unwrap_or(n.steps_per_year);
        if mesh == 0 {
            return Err(CliError::Config("numerics.mesh: must be ≥ 1".into()));
        }
        if steps_per_year == 0 {
            return Err(CliError::Config(
                "numerics.steps_per_year: must be ≥ 1".into(),
            ));
        }
        Ok(PricerConfig {
            equity: self.equity()?,
            rate: self.rate()?,
            market: self.market()?,
            mesh,
            steps_per_year,
            solver: self.solver()?,
            trunc: self.truncation()?,
        })
    }

    /// Assembles the Monte Carlo configuration (documented defaults when
    /// the `[mc]` section is omitted: 10⁵ paths, dt = 1/360, seed 20240901,
    /// no antithetic pairing).
    pub fn mc(&self) -> Result<McConfig, CliError> {
        let mut cfg = McConfig::standard(self.equity()?, self.rate()?, self.market()?);
        if let Some(mc) = &self.mc {
            cfg.n_paths = mc.n_paths;
            cfg.seed = mc.seed;
            cfg.dt = mc.dt;
            cfg.antithetic = mc.antithetic;
        }
        Ok(cfg)
    }
}

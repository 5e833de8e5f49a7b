//! JSON run configuration.
//!
//! ```json
//! {
//!   "law": {"kind": "geometric", "p": 0.5},
//!   "prior": {"kind": "poisson", "v": 1.0},
//!   "policy": {"alpha": 1e-12, "hard_cap": 100000},
//!   "simulation": {"replicates": 100000, "seed": 7}
//! }
//! ```

use serde::{Deserialize, Serialize};
use solicit_core::planner::{Economics, PriceCurve};
use solicit_core::{Error, PriorSpec, ResponseLaw, TruncationPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawConfig {
    Geometric {
        p: f64,
    },
    Mixture {
        w1: f64,
        winf: f64,
        wg: f64,
        p: f64,
    },
    Table {
        masses: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<f64>,
    },
}

impl LawConfig {
    pub fn build(&self) -> Result<ResponseLaw, Error> {
        match self {
            LawConfig::Geometric { p } => ResponseLaw::geometric(*p),
            LawConfig::Mixture { w1, winf, wg, p } => ResponseLaw::mixture(*w1, *winf, *wg, *p),
            LawConfig::Table { masses, tail } => ResponseLaw::table(masses.clone(), *tail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorConfig {
    Poisson { v: f64 },
    Binomial { s: u64, theta: f64 },
    Fixed { r: u64 },
}

impl PriorConfig {
    pub fn build(&self) -> Result<PriorSpec, Error> {
        let prior = match *self {
            PriorConfig::Poisson { v } => PriorSpec::Poisson { v },
            PriorConfig::Binomial { s, theta } => PriorSpec::Binomial { s, theta },
            PriorConfig::Fixed { r } => PriorSpec::Fixed { r },
        };
        prior.validate()?;
        Ok(prior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_hard_cap")]
    pub hard_cap: usize,
}

fn default_alpha() -> f64 {
    TruncationPolicy::default().alpha
}

fn default_hard_cap() -> usize {
    TruncationPolicy::default().hard_cap
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            hard_cap: default_hard_cap(),
        }
    }
}

impl PolicyConfig {
    pub fn build(&self) -> Result<TruncationPolicy, Error> {
        TruncationPolicy::new(self.alpha, self.hard_cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriceCurveConfig {
    Exponential {
        a: f64,
        b: f64,
    },
    Power {
        a: f64,
        b: f64,
    },
    /// `[[w, p], ...]`.
    Table {
        knots: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicsConfig {
    pub purchase_rate: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub price_curve: PriceCurveConfig,
}

impl EconomicsConfig {
    pub fn build(&self) -> Result<Economics, Error> {
        let price_curve = match &self.price_curve {
            PriceCurveConfig::Exponential { a, b } => PriceCurve::Exponential { a: *a, b: *b },
            PriceCurveConfig::Power { a, b } => PriceCurve::Power { a: *a, b: *b },
            PriceCurveConfig::Table { knots } => PriceCurve::Table {
                knots: knots.clone(),
            },
        };
        let econ = Economics {
            purchase_rate: self.purchase_rate,
            c0: self.c0,
            c1: self.c1,
            c2: self.c2,
            price_curve,
        };
        econ.validate()?;
        Ok(econ)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    /// Also compute the law of `Y` on `0..=y_max` (Poisson prior only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<u64>,
}

fn one() -> f64 {
    1.0
}

/// `plan-pool`: smallest `v` in `bounds` reaching `target` expected sales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolPlanConfig {
    /// Defaults to the `p` of a geometric `law`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub target: f64,
    #[serde(default = "one")]
    pub purchase_rate: f64,
    pub bounds: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// `plan-prob`: smallest `p` in `bounds` reaching `target` expected sales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbPlanConfig {
    /// Defaults to the `v` of a Poisson `prior`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    pub target: f64,
    #[serde(default = "one")]
    pub purchase_rate: f64,
    pub bounds: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfitPlanConfig {
    pub v_grid: Vec<f64>,
    pub w_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Replicates for the Monte Carlo checks; 0 skips them.
    #[serde(default = "default_verify_replicates")]
    pub replicates: u64,
    #[serde(default = "default_verify_seed")]
    pub seed: u64,
}

fn default_verify_replicates() -> u64 {
    100_000
}

fn default_verify_seed() -> u64 {
    20_240_917
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            replicates: default_verify_replicates(),
            seed: default_verify_seed(),
        }
    }
}

/// Top-level configuration. Each command reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub economics: Option<EconomicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolPlanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<ProbPlanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profit: Option<ProfitPlanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

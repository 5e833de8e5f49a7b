//! Command dispatch and document rendering for the `solicit` binary.

use std::collections::hash_map::RandomState;
use std::fmt::Write as _;
use std::hash::{BuildHasher, Hasher};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use solicit_core::finite;
use solicit_core::geometric::GeometricPoissonCampaign;
use solicit_core::planner::{self, Choice, PlanResult, SearchMethod};
use solicit_core::poisson;
use solicit_core::{Error, PriorSpec, ResponseLaw, TruncationPolicy};

use crate::config::{LawConfig, PriorConfig, RunConfig};
use crate::sim::{self, SimConfig, SimReport, DEFAULT_CHUNK_SIZE};
use crate::verify::{self, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Law,
    Stats,
    Simulate,
    PlanPool,
    PlanProb,
    PlanProfit,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// `--seed <u64>` or `--seed auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedArg {
    Fixed(u64),
    Auto,
}

impl FromStr for SeedArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(SeedArg::Auto);
        }
        s.parse()
            .map(SeedArg::Fixed)
            .map_err(|_| format!("expected an unsigned 64-bit integer or `auto`, got `{s}`"))
    }
}

impl SeedArg {
    fn resolve(self) -> u64 {
        match self {
            SeedArg::Fixed(seed) => seed,
            SeedArg::Auto => RandomState::new().build_hasher().finish(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Infeasible(_) => "infeasible",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// 1 is reserved for a failed `verify` run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    /// `{"error": {"kind": ..., "exit_code": ..., "message": ...}}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::CurveDomain { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            Error::ConditioningOnNull { .. }
            | Error::TruncationFailure { .. }
            | Error::StateBudgetExceeded { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

/// The rendered document and whether the run counts as successful.
#[derive(Debug)]
pub struct Outcome {
    pub document: String,
    pub success: bool,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn require<'a, T>(section: &'a Option<T>, name: &str, command: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("`{command}` needs a `{name}` section")))
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn csv_unsupported(command: &str) -> CliError {
    CliError::Config(format!("`{command}` emits JSON only"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawDocument {
    pub command: String,
    pub engine: String,
    pub prior: PriorConfig,
    /// `P(T = n)` for `n = 1, 2, ...`.
    pub probs: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engines {
    pub law_t: String,
    #[serde(rename = "e_T")]
    pub e_t: String,
    #[serde(rename = "e_Y")]
    pub e_y: String,
    #[serde(rename = "var_Y")]
    pub var_y: String,
    #[serde(rename = "e_M")]
    pub e_m: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldLawDocument {
    pub probs: Vec<f64>,
    pub lost_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub command: String,
    pub prior: PriorConfig,
    pub engines: Engines,
    pub law_t: Vec<f64>,
    pub law_t_residual: f64,
    #[serde(rename = "e_T")]
    pub e_t: f64,
    #[serde(rename = "e_Y")]
    pub e_y: f64,
    #[serde(rename = "var_Y")]
    pub var_y: f64,
    #[serde(rename = "e_M")]
    pub e_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law_y: Option<YieldLawDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateDocument {
    pub command: String,
    pub prior: PriorConfig,
    pub chunk_size: u64,
    pub report: SimReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoiceDocument {
    PoolSize { v: f64 },
    ResponseProbability { p: f64 },
    PoolAndPrice { v: f64, w: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub v: f64,
    pub w: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub command: String,
    pub choice: ChoiceDocument,
    pub expected_sales: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_profit: Option<f64>,
    pub method: String,
    /// The parameter one tolerance below the answer and the expected sales
    /// there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub below: Option<CurvePoint>,
    pub curve: Vec<CurvePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surface: Vec<SurfacePoint>,
}

impl PlanDocument {
    fn new(command: &str, plan: PlanResult) -> Self {
        let choice = match plan.choice {
            Choice::PoolSize(v) => ChoiceDocument::PoolSize { v },
            Choice::ResponseProbability(p) => ChoiceDocument::ResponseProbability { p },
            Choice::PoolAndPrice { v, w } => ChoiceDocument::PoolAndPrice { v, w },
        };
        let method = match plan.method {
            SearchMethod::LowerBound => "lower_bound",
            SearchMethod::Bisection => "bisection",
            SearchMethod::GridScan => "grid_scan",
            SearchMethod::Exhaustive => "exhaustive",
        };
        let point = |(param, value)| CurvePoint { param, value };
        Self {
            command: command.into(),
            choice,
            expected_sales: plan.expected_sales,
            expected_profit: plan.expected_profit,
            method: method.into(),
            below: plan.below.map(point),
            curve: plan.curve.into_iter().map(point).collect(),
            surface: plan
                .surface
                .into_iter()
                .map(|c| SurfacePoint {
                    v: c.v,
                    w: c.w,
                    profit: c.profit,
                })
                .collect(),
        }
    }

    fn curve_csv(&self) -> String {
        let mut out = String::from("param,value\n");
        for c in &self.curve {
            let _ = writeln!(out, "{},{}", fmt_f64(c.param), fmt_f64(c.value));
        }
        out
    }

    fn surface_csv(&self) -> String {
        let mut out = String::from("v,w,profit\n");
        for c in &self.surface {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(c.v),
                fmt_f64(c.w),
                fmt_f64(c.profit)
            );
        }
        out
    }
}

struct Model {
    law: ResponseLaw,
    law_config: LawConfig,
    prior: PriorSpec,
    prior_config: PriorConfig,
}

fn model(config: &RunConfig, command: &str) -> Result<Model, CliError> {
    let law_config = require(&config.law, "law", command)?.clone();
    let prior_config = *require(&config.prior, "prior", command)?;
    Ok(Model {
        law: law_config.build()?,
        law_config,
        prior: prior_config.build()?,
        prior_config,
    })
}

fn law_command(
    config: &RunConfig,
    policy: &TruncationPolicy,
    format: Format,
) -> Result<String, CliError> {
    let m = model(config, "law")?;
    let (engine, probs, residual) = match m.prior {
        PriorSpec::Poisson { v } => {
            let t = poisson::despair_law(&m.law, v, policy)?;
            ("poisson", t.probs, t.residual)
        }
        PriorSpec::Fixed { r } => ("finite", finite::law_t_given_r(&m.law, r)?, 0.0),
        PriorSpec::Binomial { .. } => {
            let stats = finite::campaign_stats(&m.law, &m.prior)?;
            ("finite", stats.law_t.probs, stats.law_t.residual)
        }
    };
    Ok(match format {
        Format::Json => to_json(&LawDocument {
            command: "law".into(),
            engine: engine.into(),
            prior: m.prior_config,
            probs,
            residual,
        }),
        Format::Csv => {
            let mut out = String::from("n,prob\n");
            for (i, p) in probs.iter().enumerate() {
                let _ = writeln!(out, "{},{}", i + 1, fmt_f64(*p));
            }
            let _ = writeln!(out, "residual,{}", fmt_f64(residual));
            out
        }
    })
}

fn stats_command(config: &RunConfig, policy: &TruncationPolicy) -> Result<StatsDocument, CliError> {
    let m = model(config, "stats")?;
    let y_max = config.stats.and_then(|s| s.y_max);
    let engines = |all: &str, yield_engine: &str| Engines {
        law_t: all.into(),
        e_t: all.into(),
        e_y: yield_engine.into(),
        var_y: all.into(),
        e_m: yield_engine.into(),
    };
    let (stats, engines) = match (m.prior, &m.law_config) {
        (PriorSpec::Poisson { v }, LawConfig::Geometric { p }) => {
            let mut stats = poisson::campaign_stats(&m.law, v, policy, y_max)?;
            let campaign = GeometricPoissonCampaign::new(*p, v, *policy)?;
            stats.e_y = campaign.expected_yield()?;
            stats.e_m = campaign.expected_effort()?;
            (stats, engines("poisson", "geometric"))
        }
        (PriorSpec::Poisson { v }, _) => (
            poisson::campaign_stats(&m.law, v, policy, y_max)?,
            engines("poisson", "poisson"),
        ),
        _ => {
            if y_max.is_some() {
                return Err(CliError::Config(
                    "the law of Y is only available under a Poisson prior".into(),
                ));
            }
            (
                finite::campaign_stats(&m.law, &m.prior)?,
                engines("finite", "finite"),
            )
        }
    };
    Ok(StatsDocument {
        command: "stats".into(),
        prior: m.prior_config,
        engines,
        law_t: stats.law_t.probs.clone(),
        law_t_residual: stats.law_t.residual,
        e_t: stats.e_t,
        e_y: stats.e_y,
        var_y: stats.var_y,
        e_m: stats.e_m,
        law_y: stats.law_y.map(|y| YieldLawDocument {
            probs: y.probs,
            lost_mass: y.lost_mass,
        }),
    })
}

fn simulate_command(
    config: &RunConfig,
    seed: Option<SeedArg>,
) -> Result<SimulateDocument, CliError> {
    let m = model(config, "simulate")?;
    let section = require(&config.simulation, "simulation", "simulate")?;
    let seed = match (seed, section.seed) {
        (Some(arg), _) => arg.resolve(),
        (None, Some(seed)) => seed,
        (None, None) => {
            return Err(CliError::Config(
                "no seed: set simulation.seed or pass --seed <u64> or --seed auto".into(),
            ))
        }
    };
    let mut sim_config = SimConfig::new(m.law, m.prior, section.replicates, seed);
    sim_config.chunk_size = section.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE);
    Ok(SimulateDocument {
        command: "simulate".into(),
        prior: m.prior_config,
        chunk_size: sim_config.chunk_size,
        report: sim::simulate(&sim_config)?,
    })
}

fn geometric_p(config: &RunConfig, given: Option<f64>, command: &str) -> Result<f64, CliError> {
    match (given, &config.law) {
        (Some(p), _) => Ok(p),
        (None, Some(LawConfig::Geometric { p })) => Ok(*p),
        _ => Err(CliError::Config(format!(
            "`{command}` needs `p` in its section or a geometric `law`"
        ))),
    }
}

fn plan_command(
    config: &RunConfig,
    policy: &TruncationPolicy,
    command: Command,
) -> Result<PlanDocument, CliError> {
    let plan = match command {
        Command::PlanPool => {
            let section = require(&config.pool, "pool", "plan-pool")?;
            let p = geometric_p(config, section.p, "plan-pool")?;
            let tol = section.tol.unwrap_or(planner::default_tol(section.bounds));
            let plan = planner::min_pool_size(
                p,
                section.target,
                section.purchase_rate,
                section.bounds,
                tol,
                policy,
            )?;
            PlanDocument::new("plan-pool", plan)
        }
        Command::PlanProb => {
            let section = require(&config.prob, "prob", "plan-prob")?;
            let v = match (section.v, config.prior) {
                (Some(v), _) => v,
                (None, Some(PriorConfig::Poisson { v })) => v,
                _ => {
                    return Err(CliError::Config(
                        "`plan-prob` needs `v` in its section or a Poisson `prior`".into(),
                    ))
                }
            };
            let tol = section.tol.unwrap_or(planner::default_tol(section.bounds));
            let plan = planner::min_response_prob(
                v,
                section.target,
                section.purchase_rate,
                section.bounds,
                tol,
                policy,
            )?;
            PlanDocument::new("plan-prob", plan)
        }
        _ => {
            let econ = require(&config.economics, "economics", "plan-profit")?.build()?;
            let section = require(&config.profit, "profit", "plan-profit")?;
            let plan = planner::optimize_profit(&econ, &section.v_grid, &section.w_grid, policy)?;
            PlanDocument::new("plan-profit", plan)
        }
    };
    Ok(plan)
}

/// Runs `command` against `config` and renders the output document.
pub fn run(
    command: Command,
    config: &RunConfig,
    format: Format,
    seed: Option<SeedArg>,
) -> Result<Outcome, CliError> {
    let policy = config.policy.build()?;
    let ok = |document| {
        Ok(Outcome {
            document,
            success: true,
        })
    };
    match command {
        Command::Law => ok(law_command(config, &policy, format)?),
        Command::Stats => match format {
            Format::Json => ok(to_json(&stats_command(config, &policy)?)),
            Format::Csv => Err(csv_unsupported("stats")),
        },
        Command::Simulate => match format {
            Format::Json => ok(to_json(&simulate_command(config, seed)?)),
            Format::Csv => Err(csv_unsupported("simulate")),
        },
        Command::PlanPool | Command::PlanProb | Command::PlanProfit => {
            let doc = plan_command(config, &policy, command)?;
            ok(match (format, command) {
                (Format::Json, _) => to_json(&doc),
                (Format::Csv, Command::PlanProfit) => doc.surface_csv(),
                (Format::Csv, _) => doc.curve_csv(),
            })
        }
        Command::Verify => {
            if format == Format::Csv {
                return Err(csv_unsupported("verify"));
            }
            let mut verify_config = config.verify.unwrap_or_default();
            if let Some(arg) = seed {
                verify_config.seed = arg.resolve();
            }
            let report: VerifyReport = verify::run(&verify_config, &policy)?;
            Ok(Outcome {
                success: report.passed,
                document: to_json(&report),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn seed_argument_parses() {
        assert_eq!("17".parse::<SeedArg>().unwrap(), SeedArg::Fixed(17));
        assert_eq!("auto".parse::<SeedArg>().unwrap(), SeedArg::Auto);
        assert!("-3".parse::<SeedArg>().is_err());
    }

    #[test]
    fn empty_pool_law_csv() {
        let c =
            config(r#"{"law":{"kind":"geometric","p":0.5},"prior":{"kind":"poisson","v":0.0}}"#);
        let out = run(Command::Law, &c, Format::Csv, None).unwrap();
        assert_eq!(out.document, "n,prob\n1,1.0\nresidual,0.0\n");
    }

    #[test]
    fn stats_dispatches_to_the_generating_function_path() {
        let c =
            config(r#"{"law":{"kind":"geometric","p":0.5},"prior":{"kind":"poisson","v":1.0}}"#);
        let doc = stats_command(&c, &TruncationPolicy::default()).unwrap();
        assert_eq!(doc.engines.e_y, "geometric");
        assert_eq!(doc.engines.e_t, "poisson");
        assert!((doc.e_t - 1.491_370_322_943_653).abs() < 1e-12);
        assert!((doc.e_y - 0.609_905_567_948_438_5).abs() < 1e-12);
        assert!((doc.e_m - 1.219_811_135_896_877).abs() < 1e-12);
        let fixed =
            config(r#"{"law":{"kind":"geometric","p":0.5},"prior":{"kind":"fixed","r":2}}"#);
        let doc = stats_command(&fixed, &TruncationPolicy::default()).unwrap();
        assert_eq!(doc.engines.e_y, "finite");
        assert!((doc.e_y - 1.25).abs() < 1e-14);
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let missing = run(Command::Stats, &RunConfig::default(), Format::Json, None).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
        let c = config(r#"{"pool":{"p":0.5,"target":100.0,"bounds":[0.0,10.0]}}"#);
        assert_eq!(
            run(Command::PlanPool, &c, Format::Json, None)
                .unwrap_err()
                .exit_code(),
            3
        );
        let c = config(
            r#"{"law":{"kind":"geometric","p":0.001},"prior":{"kind":"poisson","v":1000.0},
                "policy":{"alpha":1e-12,"hard_cap":10}}"#,
        );
        let e = run(Command::Law, &c, Format::Json, None).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        let parsed: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(parsed["error"]["kind"], "numerical");
    }

    #[test]
    fn simulate_requires_a_seed() {
        let text = r#"{"law":{"kind":"geometric","p":0.5},"prior":{"kind":"poisson","v":1.0},
                       "simulation":{"replicates":10}}"#;
        let e = run(Command::Simulate, &config(text), Format::Json, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let a = run(
            Command::Simulate,
            &config(text),
            Format::Json,
            Some(SeedArg::Fixed(3)),
        )
        .unwrap();
        let b = run(
            Command::Simulate,
            &config(text),
            Format::Json,
            Some(SeedArg::Fixed(3)),
        )
        .unwrap();
        assert_eq!(a.document, b.document);
    }
}

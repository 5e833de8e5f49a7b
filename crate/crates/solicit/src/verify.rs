//! Cross-engine identity suite behind `solicit verify`.
//!
//! Each check compares two independent computations of the same quantity
//! and reports the worst discrepancy against its tolerance. Monte Carlo
//! checks compare in standard errors.

use serde::{Deserialize, Serialize};
use solicit_core::finite::{self, DEFAULT_STATE_BUDGET};
use solicit_core::geometric::GeometricPoissonCampaign;
use solicit_core::poisson;
use solicit_core::{Error, PriorSpec, ResponseLaw, TruncationPolicy};

use crate::config::VerifyConfig;
use crate::sim::{self, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst discrepancy observed, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

/// Running maximum of a discrepancy, remembering where it occurred.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: String::from("-"),
        }
    }

    fn see(&mut self, gap: f64, at: impl FnOnce() -> String) {
        if gap > self.value || gap.is_nan() {
            self.value = if gap.is_nan() { f64::INFINITY } else { gap };
            self.at = at();
        }
    }

    fn finish(self, name: &str, tolerance: f64) -> CheckOutcome {
        CheckOutcome {
            name: name.to_string(),
            passed: self.value <= tolerance,
            worst: self.value,
            tolerance,
            detail: format!("worst at {}", self.at),
        }
    }
}

fn geo(p: f64) -> Result<ResponseLaw, Error> {
    ResponseLaw::geometric(p)
}

fn brute_force_equivalence() -> Result<CheckOutcome, Error> {
    let mut laws = Vec::new();
    for p in [0.2, 0.5, 0.8] {
        laws.push((format!("geometric({p})"), geo(p)?));
    }
    laws.push((
        "table[0.5,0.3,0.2]".into(),
        ResponseLaw::table(vec![0.5, 0.3, 0.2], None)?,
    ));
    let mut worst = Worst::new();
    for (name, law) in &laws {
        let moments = finite::pool_moments(law, 6)?;
        for r in 0..=6u64 {
            let exact = finite::brute_force(law, r, r + 1, DEFAULT_STATE_BUDGET)?;
            let law_t = finite::law_t_given_r(law, r)?;
            let len = law_t.len().max(exact.law_t.len());
            for n in 0..len {
                let a = law_t.get(n).copied().unwrap_or(0.0);
                let b = exact.law_t.get(n).copied().unwrap_or(0.0);
                worst.see((a - b).abs(), || format!("{name} r={r} P(T={})", n + 1));
            }
            let m = moments[r as usize];
            for (label, a, b) in [
                ("E[T]", m.e_t, exact.e_t),
                ("E[Y]", m.e_y, exact.e_y),
                ("E[M]", m.e_m, exact.e_m),
                ("Var(Y)", m.var_y(), exact.var_y),
            ] {
                worst.see((a - b).abs(), || format!("{name} r={r} {label}"));
            }
        }
    }
    Ok(worst.finish("recursions match exhaustive enumeration", 1e-12))
}

fn poisson_weights(v: f64, cutoff: f64) -> Vec<f64> {
    let mut w = vec![(-v).exp()];
    let mut r = 0u64;
    loop {
        r += 1;
        let next = w[w.len() - 1] * v / r as f64;
        w.push(next);
        if r as f64 > v && next < cutoff {
            return w;
        }
    }
}

fn poisson_mixture_consistency(policy: &TruncationPolicy) -> Result<CheckOutcome, Error> {
    let mut worst = Worst::new();
    let law = geo(0.5)?;
    for v in [0.5, 1.0, 3.0] {
        let weights = poisson_weights(v, 1e-18);
        let fs: [(&str, &dyn Fn(u64) -> f64); 4] = [
            ("1", &|_| 1.0),
            ("identity", &|k| k as f64),
            ("F", &|k| law.cdf(k)),
            ("H", &|k| law.truncated_mean(k)),
        ];
        for (label, f) in fs {
            let mixed: f64 = weights
                .iter()
                .enumerate()
                .map(|(r, w)| Ok(w * finite::phi_f(&law, r as u64, f)?))
                .sum::<Result<f64, Error>>()?;
            let direct = poisson::expect_at_despair(&law, v, policy, f)?.value;
            worst.see((mixed - direct).abs(), || format!("v={v} f={label}"));
        }
    }
    Ok(worst.finish(
        "fixed-pool recursion mixed over Poisson matches the Poisson engine",
        1e-8,
    ))
}

fn expectation_paths(policy: &TruncationPolicy) -> Result<CheckOutcome, Error> {
    let mut worst = Worst::new();
    let laws = [
        ("geometric(0.3)", geo(0.3)?),
        ("mixture", ResponseLaw::mixture(0.2, 0.3, 0.5, 0.25)?),
        ("table", ResponseLaw::table(vec![0.4, 0.1, 0.2], None)?),
    ];
    for (name, law) in &laws {
        for v in [0.5, 4.0, 50.0] {
            let a = poisson::expect_at_despair(law, v, policy, |k| law.cdf(k))?.value;
            let b = poisson::expect_via_mixture_recursion(law, v, policy, |k| law.cdf(k))?.value;
            worst.see((a - b).abs(), || format!("{name} v={v}"));
        }
    }
    Ok(worst.finish("closed-form and hazard-recursion expectations agree", 1e-10))
}

fn cross_path(policy: &TruncationPolicy) -> Result<Vec<CheckOutcome>, Error> {
    let mut agree = Worst::new();
    let mut ratio = Worst::new();
    for p in [0.5, 1.0 / 512.0] {
        for v in [1.0, 1000.0] {
            let law = geo(p)?;
            let campaign = GeometricPoissonCampaign::new(p, v, *policy)?;
            let (yg, mg) = (campaign.expected_yield()?, campaign.expected_effort()?);
            let y = poisson::expected_yield(&law, v, policy)?;
            let m = poisson::expected_effort(&law, v, policy)?;
            agree.see((y - yg).abs() / y.max(1.0), || format!("p={p} v={v} E[Y]"));
            agree.see((m - mg).abs() / m.max(1.0), || format!("p={p} v={v} E[M]"));
            ratio.see((mg * p - yg).abs() / yg.max(1.0), || format!("p={p} v={v}"));
        }
    }
    Ok(vec![
        agree.finish(
            "general and generating-function paths agree (relative)",
            1e-10,
        ),
        ratio.finish("E[M] p = E[Y] on the generating-function path", 1e-12),
    ])
}

fn functional_equations(policy: &TruncationPolicy) -> Result<Vec<CheckOutcome>, Error> {
    let mut poisson_eq = Worst::new();
    for p in [0.5, 1.0 / 512.0] {
        for v in [1.0, 100.0, 1000.0] {
            let c = GeometricPoissonCampaign::new(p, v, *policy)?;
            let shifted = c.with_pool(c.q() * v)?;
            let stay = (-p * v).exp();
            for z in [0.2, 0.5, 0.9, 1.0] {
                let gap = c.pgf(z)? / z - stay - (1.0 - stay) * shifted.pgf(z)?;
                poisson_eq.see(gap.abs(), || format!("p={p} v={v} z={z}"));
            }
        }
    }
    let mut binomial_eq = Worst::new();
    let mut fixed_eq = Worst::new();
    for p in [0.3f64, 0.5] {
        let q = 1.0 - p;
        for s in 0..=20u64 {
            for z in [0.4, 0.9] {
                for theta in [0.3, 0.7, 1.0] {
                    let keep = (1.0 - theta * p).powi(s as i32);
                    let lhs = finite::pgf_binomial(p, s, theta, z)?;
                    let rhs = z
                        * (finite::pgf_binomial(p, s, theta * q, z)?
                            + keep
                                * (1.0
                                    - finite::pgf_binomial(
                                        p,
                                        s,
                                        theta * q / (1.0 - theta * p),
                                        z,
                                    )?));
                    binomial_eq.see((lhs - rhs).abs(), || {
                        format!("p={p} s={s} theta={theta} z={z}")
                    });
                }
                let qs = q.powi(s as i32);
                let lhs = finite::pgf_given_r(p, s, z)? * (1.0 + z * qs);
                let rhs = z * (qs + finite::pgf_binomial(p, s, q, z)?);
                fixed_eq.see((lhs - rhs).abs(), || format!("p={p} s={s} z={z}"));
            }
        }
    }
    Ok(vec![
        poisson_eq.finish(
            "Poisson-pool generating function functional equation",
            1e-10,
        ),
        binomial_eq.finish(
            "binomial-pool generating function functional equation",
            1e-10,
        ),
        fixed_eq.finish("fixed-pool generating function identity", 1e-10),
    ])
}

fn binomial_limit(policy: &TruncationPolicy) -> Result<CheckOutcome, Error> {
    let target = GeometricPoissonCampaign::new(0.1, 2.0, *policy)?.expected_yield()?;
    let gaps = [100u64, 1000, 10_000]
        .into_iter()
        .map(|s| {
            let y = finite::expected_yield_binomial(0.1, s, 2.0 / s as f64)?;
            Ok((y - target).abs() / target)
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(CheckOutcome {
        name: "binomial pool converges to the Poisson pool".into(),
        passed: monotone && gaps[2] < 1e-3,
        worst: gaps[2],
        tolerance: 1e-3,
        detail: format!("relative gaps at s = 100, 1000, 10000: {gaps:?}"),
    })
}

/// Lost probability `L` moves the mean by about `L y` and the second moment
/// by about `L y²`, so the tolerances scale with `y_max + 1`.
fn yield_law_consistency(policy: &TruncationPolicy) -> Result<CheckOutcome, Error> {
    let y_max = 30u64;
    let stats = poisson::campaign_stats(&geo(0.5)?, 1.0, policy, Some(y_max))?;
    let y = stats.law_y.expect("requested");
    let scale = (y_max + 1) as f64;
    let mean_tol = y.lost_mass * scale;
    let var_tol = mean_tol * scale;
    let gap_mean = (y.mean() - stats.e_y).abs();
    let gap_var = (y.variance() - stats.var_y).abs();
    Ok(CheckOutcome {
        name: "law of Y reproduces E[Y] and Var(Y)".into(),
        passed: gap_mean <= mean_tol && gap_var <= var_tol,
        worst: (gap_mean / mean_tol).max(gap_var / var_tol),
        tolerance: 1.0,
        detail: format!(
            "mean gap {gap_mean:e}, variance gap {gap_var:e}, lost mass {:e}",
            y.lost_mass
        ),
    })
}

fn monte_carlo(
    config: &VerifyConfig,
    policy: &TruncationPolicy,
) -> Result<Vec<CheckOutcome>, Error> {
    let law = geo(0.5)?;
    let v = 1.0;
    let sim_config = SimConfig::new(
        law.clone(),
        PriorSpec::Poisson { v },
        config.replicates,
        config.seed,
    );
    let report = sim::simulate(&sim_config)?;
    let stats = poisson::campaign_stats(&law, v, policy, None)?;
    let mut analytic = Worst::new();
    for (label, est, target) in [
        ("E[T]", report.despair, stats.e_t),
        ("E[Y]", report.responses, stats.e_y),
        ("E[M]", report.effort, stats.e_m),
        ("Var(Y)", report.yield_variance, stats.var_y),
    ] {
        analytic.see(est.z_score(target).abs(), || label.to_string());
    }
    let mut out = vec![analytic.finish("simulation matches exact moments (in SE)", 4.0)];
    out.push(CheckOutcome {
        name: "per-replicate effort and despair identities".into(),
        passed: report.identity_violations == 0,
        worst: report.identity_violations as f64,
        tolerance: 0.0,
        detail: format!("{} replicates", report.replicates),
    });
    let mut martingale = Worst::new();
    for z in [0.5, 1.5] {
        let est = sim::martingale_probe(&sim_config, 0.5, z)?;
        martingale.see(est.z_score(1.0).abs(), || format!("z={z}"));
    }
    out.push(martingale.finish("martingale z^Y/(q+pz)^M has mean one (in SE)", 4.0));
    let mut probe = Worst::new();
    for (label, g) in [
        ("1", &(|_| 1.0) as &(dyn Fn(u64) -> f64 + Sync)),
        ("n", &|n| n as f64),
    ] {
        let est = sim::identity_probe(&sim_config, g)?;
        let f = |k: u64| (1..=k).map(|n| g(n) * law.mass_at(n)).sum::<f64>();
        let target = v * poisson::expect_at_despair(&law, v, policy, f)?.value;
        probe.see(est.z_score(target).abs(), || format!("g={label}"));
    }
    out.push(probe.finish("weighted response sums match v E[f(T)] (in SE)", 4.0));
    Ok(out)
}

/// Runs the whole suite.
pub fn run(config: &VerifyConfig, policy: &TruncationPolicy) -> Result<VerifyReport, Error> {
    let mut checks = vec![
        brute_force_equivalence()?,
        poisson_mixture_consistency(policy)?,
        expectation_paths(policy)?,
    ];
    checks.extend(cross_path(policy)?);
    checks.extend(functional_equations(policy)?);
    checks.push(binomial_limit(policy)?);
    checks.push(yield_law_consistency(policy)?);
    if config.replicates > 0 {
        checks.extend(monte_carlo(config, policy)?);
    }
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

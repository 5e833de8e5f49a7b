//! Exact engine under a Poisson pool-size prior.
//!
//! With `S_0 ~ Poisson(v)` the per-epoch response counts `X_1, X_2, ...` are
//! independent Poisson variables with means `π_n v`. The despair time then has
//! the product law `P(T = n) = λ_1 ⋯ λ_{n-1} (1 - λ_n)` with
//! `λ_n = 1 - exp(-π_n v)`, and given `T = k` the yield is a sum of `k - 1`
//! independent zero-truncated Poisson counts. Everything here is built on
//! those two facts, for an arbitrary [`ResponseLaw`].
//!
//! Infinite series are cut by a [`TruncationPolicy`]: summation stops at the
//! first `n` with `P(T > n) = λ_1 ⋯ λ_n ≤ alpha`.

use alloc::vec::Vec;

use crate::law::ResponseLaw;
use crate::Error;

/// Products `λ_1 ⋯ λ_n` below this switch to log-space accumulation.
const LOG_SPACE_THRESHOLD: f64 = 1e-300;

/// Series cut-off rule: stop once `P(T > n) ≤ alpha`, never exceed `hard_cap`
/// terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub alpha: f64,
    pub hard_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            alpha: 1e-12,
            hard_cap: 100_000,
        }
    }
}

impl TruncationPolicy {
    pub fn new(alpha: f64, hard_cap: usize) -> Result<Self, Error> {
        let policy = Self { alpha, hard_cap };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(alloc::format!(
                "truncation alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.hard_cap == 0 {
            return Err(Error::invalid("truncation hard_cap must be at least 1"));
        }
        Ok(())
    }
}

/// Truncated law of the despair time `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DespairLaw {
    /// `probs[n - 1] = P(T = n)` for `n = 1..=n_max`.
    pub probs: Vec<f64>,
    /// `P(T > n_max)`.
    pub residual: f64,
    /// `exceed[n - 1] = P(T > n)`.
    exceed: Vec<f64>,
}

impl DespairLaw {
    pub(crate) fn from_probs(probs: Vec<f64>) -> Self {
        let mut exceed = Vec::with_capacity(probs.len());
        let mut left: f64 = 1.0;
        for &p in &probs {
            left -= p;
            exceed.push(left.max(0.0));
        }
        if let Some(last) = exceed.last_mut() {
            *last = 0.0;
        }
        Self {
            probs,
            residual: 0.0,
            exceed,
        }
    }

    pub fn n_max(&self) -> u64 {
        self.probs.len() as u64
    }

    /// `P(T = n)`, zero outside the computed support.
    pub fn prob(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.probs.get((n - 1) as usize).copied().unwrap_or(0.0)
    }

    /// `P(T > n)` for `n ≤ n_max`.
    pub fn exceedance(&self, n: u64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        self.exceed
            .get((n - 1) as usize)
            .copied()
            .unwrap_or(self.residual)
    }

    /// `E[f(T)]` over the computed support.
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> Expectation {
        let mut value = 0.0;
        let mut sup: f64 = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            let fx = f(i as u64 + 1);
            value += p * fx;
            sup = sup.max(fx);
        }
        Expectation {
            value,
            tail_bound: self.residual * sup,
        }
    }
}

/// A truncated expectation together with `residual · sup f` over the
/// computed support, an estimate of the mass the truncation dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub tail_bound: f64,
}

/// Truncated law of the total yield `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldLaw {
    /// `probs[y] = P(Y = y)` for `y = 0..=y_max`.
    pub probs: Vec<f64>,
    /// Probability mass not represented in `probs`.
    pub lost_mass: f64,
}

impl YieldLaw {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(y, p)| y as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(y, p)| {
                let d = y as f64 - mean;
                d * d * p
            })
            .sum()
    }
}

/// `E[T]`, `E[Y]`, `Var(Y)`, `E[M]` and the laws of `T` and (optionally) `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignStats {
    pub law_t: DespairLaw,
    pub e_t: f64,
    pub e_y: f64,
    pub var_y: f64,
    pub e_m: f64,
    pub law_y: Option<YieldLaw>,
}

pub(crate) fn check_pool_mean(v: f64) -> Result<(), Error> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "expected pool size must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// `λ_n = P(X_n > 0) = 1 - exp(-π_n v)` for `n = 1..=count`.
pub fn lambda_seq(law: &ResponseLaw, v: f64, count: usize) -> Vec<f64> {
    (1..=count as u64)
        .map(|n| -libm::expm1(-law.mass_at(n) * v))
        .collect()
}

/// Law of `T` under `S_0 ~ Poisson(v)`, truncated per `policy`.
pub fn despair_law(
    law: &ResponseLaw,
    v: f64,
    policy: &TruncationPolicy,
) -> Result<DespairLaw, Error> {
    policy.validate()?;
    check_pool_mean(v)?;
    if v == 0.0 {
        return Ok(DespairLaw {
            probs: alloc::vec![1.0],
            residual: 0.0,
            exceed: alloc::vec![0.0],
        });
    }

    let ln_alpha = libm::log(policy.alpha);
    let mut probs = Vec::new();
    let mut exceed = Vec::new();
    // λ_1 ⋯ λ_{n-1}, either directly or as a logarithm once it gets tiny.
    let mut product = 1.0;
    let mut ln_product: Option<f64> = None;

    for n in 1..=policy.hard_cap as u64 {
        let mu = law.mass_at(n) * v;
        let lambda = -libm::expm1(-mu);
        match ln_product {
            None => {
                probs.push(product * libm::exp(-mu));
                let next = product * lambda;
                if next > 0.0 && next < LOG_SPACE_THRESHOLD {
                    ln_product = Some(libm::log(product) + libm::log(lambda));
                    product = 0.0;
                } else {
                    product = next;
                }
            }
            Some(ref mut ln) => {
                probs.push(libm::exp(*ln - mu));
                *ln += libm::log(lambda);
            }
        }
        let (residual, done) = match ln_product {
            None => (product, product <= policy.alpha),
            Some(ln) => (libm::exp(ln), ln <= ln_alpha),
        };
        exceed.push(residual);
        if done {
            return Ok(DespairLaw {
                probs,
                residual,
                exceed,
            });
        }
    }

    Err(Error::TruncationFailure {
        hard_cap: policy.hard_cap,
        residual: exceed.last().copied().unwrap_or(1.0),
        alpha: policy.alpha,
    })
}

/// `E[f(T)]` under the Poisson prior, summed over the truncated support.
pub fn expect_at_despair(
    law: &ResponseLaw,
    v: f64,
    policy: &TruncationPolicy,
    f: impl Fn(u64) -> f64,
) -> Result<Expectation, Error> {
    Ok(despair_law(law, v, policy)?.expect(f))
}

/// `E[T] = 1 + Σ_{n≥1} λ_1 ⋯ λ_n`.
pub fn expected_despair(
    law: &ResponseLaw,
    v: f64,
    policy: &TruncationPolicy,
) -> Result<f64, Error> {
    let t = despair_law(law, v, policy)?;
    Ok(despair_mean(&t))
}

fn despair_mean(t: &DespairLaw) -> f64 {
    1.0 + t.exceed.iter().sum::<f64>()
}

/// `E[Y] = v E[F(T)]` with `F` the response-time distribution function.
pub fn expected_yield(law: &ResponseLaw, v: f64, policy: &TruncationPolicy) -> Result<f64, Error> {
    let t = despair_law(law, v, policy)?;
    Ok(v * t.expect(|k| law.cdf(k)).value)
}

/// `E[M] = v E[H(T)]` with `H(k) = E[min(U, k)]`.
pub fn expected_effort(law: &ResponseLaw, v: f64, policy: &TruncationPolicy) -> Result<f64, Error> {
    let t = despair_law(law, v, policy)?;
    Ok(v * t.expect(|k| law.truncated_mean(k)).value)
}

/// `Var(Y) = v E[J(T)] + v² Var(R(T))`.
pub fn yield_variance(law: &ResponseLaw, v: f64, policy: &TruncationPolicy) -> Result<f64, Error> {
    let t = despair_law(law, v, policy)?;
    Ok(variance_from(law, v, &t))
}

fn variance_from(law: &ResponseLaw, v: f64, t: &DespairLaw) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let n_max = t.probs.len();
    // j[k-1] = J(k), r[k-1] = R(k)
    let mut j = Vec::with_capacity(n_max);
    let mut r = Vec::with_capacity(n_max);
    let (mut j_acc, mut r_acc) = (0.0, 0.0);
    for n in 1..=n_max as u64 {
        r.push(r_acc);
        let pi = law.mass_at(n);
        let mu = pi * v;
        if pi > 0.0 {
            j_acc += pi * one_minus_x_over_expm1(mu);
            let lambda = -libm::expm1(-mu);
            r_acc += if lambda > 0.0 { pi / lambda } else { 1.0 / v };
        }
        j.push(j_acc);
    }
    let e_j: f64 = t.probs.iter().zip(&j).map(|(p, x)| p * x).sum();
    let e_r: f64 = t.probs.iter().zip(&r).map(|(p, x)| p * x).sum();
    let var_r: f64 = t
        .probs
        .iter()
        .zip(&r)
        .map(|(p, x)| p * (x - e_r) * (x - e_r))
        .sum();
    (v * e_j + v * v * var_r).max(0.0)
}

/// `1 - x / (e^x - 1)`, the per-epoch variance factor of a zero-truncated
/// Poisson count.
fn one_minus_x_over_expm1(x: f64) -> f64 {
    if x < 1e-5 {
        x / 2.0 - x * x / 12.0
    } else {
        1.0 - x / libm::expm1(x)
    }
}

/// `P(Y = y)` for `y = 0..=y_max`.
///
/// Given `T = k`, `Y` is the sum of `k - 1` independent zero-truncated
/// Poisson counts with means `π_n v`; the laws are convolved on `[0, y_max]`
/// and mixed over `P(T = k)`. Mass pushed above `y_max` or beyond the
/// truncated support of `T` is reported in [`YieldLaw::lost_mass`].
pub fn yield_law(
    law: &ResponseLaw,
    v: f64,
    y_max: u64,
    policy: &TruncationPolicy,
) -> Result<YieldLaw, Error> {
    let t = despair_law(law, v, policy)?;
    Ok(yield_law_from(law, v, y_max, &t))
}

fn yield_law_from(law: &ResponseLaw, v: f64, y_max: u64, t: &DespairLaw) -> YieldLaw {
    let width = y_max as usize + 1;
    let mut out = alloc::vec![0.0; width];
    // Law of X'_1 + ... + X'_{k-1}.
    let mut partial = alloc::vec![0.0; width];
    partial[0] = 1.0;
    let mut ztp = alloc::vec![0.0; width];
    let mut next = alloc::vec![0.0; width];

    for (i, &pk) in t.probs.iter().enumerate() {
        for (o, s) in out.iter_mut().zip(&partial) {
            *o += pk * s;
        }
        if i + 1 == t.probs.len() {
            break;
        }
        zero_truncated_poisson(law.mass_at(i as u64 + 1) * v, &mut ztp);
        for (y, slot) in next.iter_mut().enumerate() {
            *slot = (1..=y).map(|m| ztp[m] * partial[y - m]).sum();
        }
        core::mem::swap(&mut partial, &mut next);
    }

    let kept: f64 = out.iter().sum();
    YieldLaw {
        probs: out,
        lost_mass: (1.0 - kept).max(t.residual),
    }
}

/// Fills `pmf[m] = P(X = m | X > 0)` for `X ~ Poisson(mu)`.
fn zero_truncated_poisson(mu: f64, pmf: &mut [f64]) {
    pmf.iter_mut().for_each(|x| *x = 0.0);
    if pmf.len() < 2 {
        return;
    }
    if mu <= 0.0 {
        pmf[1] = 1.0;
        return;
    }
    let ln_mu = libm::log(mu);
    let ln_lambda = libm::log(-libm::expm1(-mu));
    for (m, slot) in pmf.iter_mut().enumerate().skip(1) {
        let mf = m as f64;
        *slot = libm::exp(mf * ln_mu - mu - libm::lgamma(mf + 1.0) - ln_lambda);
    }
}

/// `E[f(T)]` by unrolling the Poisson-mixture recursion
/// `Φ_v^(n)(f) = e^{-p_n v} f(n+1) + (1 - e^{-p_n v}) Φ_{q_n v}^(n+1)(f)`,
/// where `(p_n, q_n)` are the law's hazards. This path never touches `π_n`
/// directly and serves as a cross-check on [`expect_at_despair`].
pub fn expect_via_mixture_recursion(
    law: &ResponseLaw,
    v: f64,
    policy: &TruncationPolicy,
    f: impl Fn(u64) -> f64,
) -> Result<Expectation, Error> {
    policy.validate()?;
    check_pool_mean(v)?;
    let mut scaled = v;
    let mut weight = 1.0;
    let mut value = 0.0;
    let mut sup: f64 = 0.0;
    for n in 0..policy.hard_cap as u64 {
        let fx = f(n + 1);
        sup = sup.max(fx);
        if scaled == 0.0 {
            // Φ_0^(n)(f) = f(n+1)
            value += weight * fx;
            return Ok(Expectation {
                value,
                tail_bound: 0.0,
            });
        }
        let hazard = law.hazard(n + 1)?;
        let rate = hazard.respond * scaled;
        value += weight * libm::exp(-rate) * fx;
        weight *= -libm::expm1(-rate);
        scaled *= hazard.silent;
        if weight <= policy.alpha {
            return Ok(Expectation {
                value,
                tail_bound: weight * sup,
            });
        }
    }
    Err(Error::TruncationFailure {
        hard_cap: policy.hard_cap,
        residual: weight,
        alpha: policy.alpha,
    })
}

/// All Poisson-prior statistics from one evaluation of the law of `T`.
/// `y_max` requests the law of `Y` on `0..=y_max`.
pub fn campaign_stats(
    law: &ResponseLaw,
    v: f64,
    policy: &TruncationPolicy,
    y_max: Option<u64>,
) -> Result<CampaignStats, Error> {
    let t = despair_law(law, v, policy)?;
    let e_t = despair_mean(&t);
    let e_y = v * t.expect(|k| law.cdf(k)).value;
    let e_m = v * t.expect(|k| law.truncated_mean(k)).value;
    let var_y = variance_from(law, v, &t);
    let law_y = y_max.map(|y| yield_law_from(law, v, y, &t));
    Ok(CampaignStats {
        law_t: t,
        e_t,
        e_y,
        var_y,
        e_m,
        law_y,
    })
}

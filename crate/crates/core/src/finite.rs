//! Fixed and binomial pool sizes.
//!
//! For a fixed pool of `r` clients the survivor counts form a Markov chain:
//! given `S_n = k`, the next count is `Binomial(k, q_n)` where `(p_n, q_n)`
//! are the response law's hazards at epoch `n + 1`. Despair happens at the
//! first epoch where nobody responds, so `T ≤ r + 1` and every recursion here
//! has bounded depth.
//!
//! [`brute_force`] enumerates all response-time assignments and is the
//! oracle the recursions are checked against.

use alloc::vec::Vec;

use crate::binom::{Binomials, TRIANGLE_LIMIT};
use crate::law::{pow_u, Hazard, ResponseLaw};
use crate::poisson::{check_pool_mean, DespairLaw};
use crate::{CampaignStats, Error};

/// Default cap on the number of assignments [`brute_force`] will visit.
pub const DEFAULT_STATE_BUDGET: u128 = 100_000_000;

/// Prior on the initial pool size `S_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Poisson { v: f64 },
    Binomial { s: u64, theta: f64 },
    Fixed { r: u64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            PriorSpec::Poisson { v } => check_pool_mean(v),
            PriorSpec::Binomial { theta, .. } if !(0.0..=1.0).contains(&theta) => {
                Err(Error::invalid(alloc::format!(
                    "binomial theta must lie in [0, 1], got {theta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PriorSpec::Poisson { v } => v,
            PriorSpec::Binomial { s, theta } => s as f64 * theta,
            PriorSpec::Fixed { r } => r as f64,
        }
    }
}

/// Hazards at epoch `epoch`, with certain response once nobody can still be
/// silent.
fn hazard_or_certain(law: &ResponseLaw, epoch: u64) -> Result<Hazard, Error> {
    match law.hazard(epoch) {
        Err(Error::ConditioningOnNull { .. }) => Ok(Hazard {
            respond: 1.0,
            silent: 0.0,
        }),
        other => other,
    }
}

/// Transition weights `w(k, j) = C(k, j) q^j p^(k-j)` of one epoch: `k`
/// silent clients before, `j` after.
struct Transition<'a> {
    binomials: &'a Binomials,
    hazard: Hazard,
    silent_pow: Vec<f64>,
    respond_pow: Vec<f64>,
}

impl<'a> Transition<'a> {
    fn new(binomials: &'a Binomials, hazard: Hazard, k_max: u64) -> Self {
        let small = k_max.min(TRIANGLE_LIMIT);
        Self {
            binomials,
            hazard,
            silent_pow: (0..=small).map(|j| pow_u(hazard.silent, j)).collect(),
            respond_pow: (0..=small).map(|j| pow_u(hazard.respond, j)).collect(),
        }
    }

    fn weight(&self, k: u64, j: u64) -> f64 {
        if k <= TRIANGLE_LIMIT {
            self.binomials.coef(k, j)
                * self.silent_pow[j as usize]
                * self.respond_pow[(k - j) as usize]
        } else {
            self.binomials
                .term(k, j, self.hazard.silent, self.hazard.respond)
        }
    }
}

/// `E[f(T) | S_0 = r]` by the backward recursion
/// `φ_k^(n) = f(n+1) q_n^k + Σ_{j<k} C(k,j) p_n^(k-j) q_n^j φ_j^(n+1)`,
/// `φ_0^(n) = f(n+1)`.
pub fn phi_f(law: &ResponseLaw, r: u64, f: impl Fn(u64) -> f64) -> Result<f64, Error> {
    let binomials = Binomials::new(r);
    // Depth r only admits an empty pool.
    let mut next = alloc::vec![f(r + 1)];
    for depth in (0..r).rev() {
        let width = r - depth;
        let step = Transition::new(&binomials, hazard_or_certain(law, depth + 1)?, width);
        let despair_value = f(depth + 1);
        let level: Vec<f64> = (0..=width)
            .map(|k| {
                let mut acc = despair_value * step.weight(k, k);
                for j in 0..k {
                    acc += step.weight(k, j) * next[j as usize];
                }
                acc
            })
            .collect();
        next = level;
    }
    Ok(next[r as usize])
}

/// Exact law of `T` given `S_0 = r`, as `P(T = 1), ..., P(T = r + 1)`.
pub fn law_t_given_r(law: &ResponseLaw, r: u64) -> Result<Vec<f64>, Error> {
    let mut initial = alloc::vec![0.0; r as usize + 1];
    initial[r as usize] = 1.0;
    despair_law_from_pool(law, &initial)
}

/// Forward propagation of `P(S_n = k, T > n)` from an initial pool law
/// `initial[k] = P(S_0 = k)`.
fn despair_law_from_pool(law: &ResponseLaw, initial: &[f64]) -> Result<Vec<f64>, Error> {
    let r_max = initial.len().saturating_sub(1) as u64;
    let binomials = Binomials::new(r_max);
    let mut alive = initial.to_vec();
    let mut out = Vec::with_capacity(initial.len());
    for depth in 0..=r_max {
        let width = r_max - depth;
        let step = Transition::new(&binomials, hazard_or_certain(law, depth + 1)?, width);
        let mut stop = 0.0;
        let mut next = alloc::vec![0.0; width as usize];
        for (k, &mass) in alive.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let k = k as u64;
            stop += mass * step.weight(k, k);
            for j in 0..k {
                next[j as usize] += mass * step.weight(k, j);
            }
        }
        out.push(stop);
        alive = next;
    }
    Ok(out)
}

/// Per-pool-size moments from the backward recursions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoolMoments {
    pub e_t: f64,
    pub e_y: f64,
    pub e_y2: f64,
    pub e_m: f64,
}

impl PoolMoments {
    pub fn var_y(&self) -> f64 {
        (self.e_y2 - self.e_y * self.e_y).max(0.0)
    }
}

/// `E[T]`, `E[Y]`, `E[Y²]` and `E[M]` given `S_0 = k`, for every `k ≤ r_max`.
///
/// From depth `n` with `k` silent clients, an epoch with `j < k` survivors
/// yields `k - j` responses and costs `k` solicitations; an epoch with `j = k`
/// ends the campaign after those same `k` solicitations.
pub fn pool_moments(law: &ResponseLaw, r_max: u64) -> Result<Vec<PoolMoments>, Error> {
    let binomials = Binomials::new(r_max);
    let mut next = alloc::vec![PoolMoments {
        e_t: (r_max + 1) as f64,
        ..PoolMoments::default()
    }];
    for depth in (0..r_max).rev() {
        let width = r_max - depth;
        let step = Transition::new(&binomials, hazard_or_certain(law, depth + 1)?, width);
        let level: Vec<PoolMoments> = (0..=width)
            .map(|k| {
                let stop = step.weight(k, k);
                let mut m = PoolMoments {
                    e_t: (depth + 1) as f64 * stop,
                    e_y: 0.0,
                    e_y2: 0.0,
                    e_m: k as f64,
                };
                for j in 0..k {
                    let w = step.weight(k, j);
                    let after = &next[j as usize];
                    let gained = (k - j) as f64;
                    m.e_t += w * after.e_t;
                    m.e_y += w * (gained + after.e_y);
                    m.e_y2 += w * (gained * gained + 2.0 * gained * after.e_y + after.e_y2);
                    m.e_m += w * after.e_m;
                }
                m
            })
            .collect();
        next = level;
    }
    Ok(next)
}

/// Statistics under a fixed or binomial pool-size prior.
pub fn campaign_stats(law: &ResponseLaw, prior: &PriorSpec) -> Result<CampaignStats, Error> {
    prior.validate()?;
    let weights: Vec<f64> = match *prior {
        PriorSpec::Fixed { r } => {
            let mut w = alloc::vec![0.0; r as usize + 1];
            w[r as usize] = 1.0;
            w
        }
        PriorSpec::Binomial { s, theta } => {
            let binomials = Binomials::new(s);
            (0..=s)
                .map(|k| binomials.term(s, k, theta, 1.0 - theta))
                .collect()
        }
        PriorSpec::Poisson { .. } => {
            return Err(Error::invalid(
                "Poisson priors are handled by the Poisson engine",
            ))
        }
    };
    let moments = pool_moments(law, weights.len() as u64 - 1)?;
    let mix = |f: fn(&PoolMoments) -> f64| -> f64 {
        weights.iter().zip(&moments).map(|(w, m)| w * f(m)).sum()
    };
    let e_y = mix(|m| m.e_y);
    let var_y = (mix(|m| m.e_y2) - e_y * e_y).max(0.0);
    let law_t = despair_law_from_pool(law, &weights)?;
    Ok(CampaignStats {
        e_t: mix(|m| m.e_t),
        e_y,
        var_y,
        e_m: mix(|m| m.e_m),
        law_t: DespairLaw::from_probs(law_t),
        law_y: None,
    })
}

/// `E[Σ_{n<T} g(n) X_n | S_0 = r] = r E[f(T) | S_0 = r - 1]` with
/// `f(k) = Σ_{n≤k} g(n) π_n`.
pub fn weighted_response_expectation(
    law: &ResponseLaw,
    r: u64,
    g: impl Fn(u64) -> f64,
) -> Result<f64, Error> {
    if r == 0 {
        return Err(Error::invalid("weighted response expectation needs r ≥ 1"));
    }
    let mut f = Vec::with_capacity(r as usize + 1);
    let mut acc = 0.0;
    for n in 1..=r {
        acc += g(n) * law.mass_at(n);
        f.push(acc);
    }
    Ok(r as f64 * phi_f(law, r - 1, |k| f[k as usize - 1])?)
}

/// Exact statistics for a fixed pool, by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceStats {
    /// `law_t[n - 1] = P(T = n)` for `n = 1..=r + 1`.
    pub law_t: Vec<f64>,
    pub e_t: f64,
    pub e_y: f64,
    pub var_y: f64,
    pub e_m: f64,
}

/// Enumerates all `(horizon + 1)^r` assignments of clients to response
/// buckets `1..=horizon` or "later", weighting each by its probability.
/// Exact because `T ≤ r + 1 ≤ horizon`, so "later" behaves like infinity.
pub fn brute_force(
    law: &ResponseLaw,
    r: u64,
    horizon: u64,
    budget: u128,
) -> Result<BruteForceStats, Error> {
    if horizon < r + 1 {
        return Err(Error::invalid(alloc::format!(
            "horizon {horizon} must be at least r + 1 = {}",
            r + 1
        )));
    }
    let buckets = horizon as usize + 1;
    let states = (buckets as u128)
        .checked_pow(r as u32)
        .filter(|&s| r <= u32::MAX as u64 && s <= budget)
        .ok_or(Error::StateBudgetExceeded {
            states: (buckets as u128).saturating_pow(r.min(u32::MAX as u64) as u32),
            budget,
        })?;

    // bucket b < horizon is epoch b + 1; bucket `horizon` is "later".
    let bucket_prob: Vec<f64> = (0..buckets as u64)
        .map(|b| {
            if b < horizon {
                law.mass_at(b + 1)
            } else {
                law.survival(horizon)
            }
        })
        .collect();

    // Probabilities are binned by outcome and each bin is summed with
    // Neumaier compensation, so the moments below are free of the
    // accumulated rounding of hundreds of thousands of terms.
    let mut law_t = alloc::vec![Compensated::default(); r as usize + 1];
    let mut law_y = alloc::vec![Compensated::default(); r as usize + 1];
    let mut law_m = alloc::vec![Compensated::default(); (r * horizon) as usize + 1];
    let mut digits = alloc::vec![0usize; r as usize];
    let mut counts = alloc::vec![0u64; buckets];
    for _ in 0..states {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut prob = 1.0;
        for &d in &digits {
            counts[d] += 1;
            prob *= bucket_prob[d];
        }
        let despair = (0..horizon as usize)
            .find(|&b| counts[b] == 0)
            .expect("T ≤ r + 1 ≤ horizon") as u64
            + 1;
        let mut responses = 0u64;
        let mut effort = 0u64;
        for (b, &c) in counts[..(despair - 1) as usize].iter().enumerate() {
            responses += c;
            effort += (b as u64 + 1) * c;
        }
        effort += despair * (r - responses);
        law_t[despair as usize - 1].add(prob);
        law_y[responses as usize].add(prob);
        law_m[effort as usize].add(prob);

        for d in digits.iter_mut() {
            *d += 1;
            if *d < buckets {
                break;
            }
            *d = 0;
        }
    }
    let law_t: Vec<f64> = law_t.iter().map(Compensated::value).collect();
    let law_y: Vec<f64> = law_y.iter().map(Compensated::value).collect();
    let law_m: Vec<f64> = law_m.iter().map(Compensated::value).collect();
    let mean = |probs: &[f64], offset: f64| -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 + offset) * p)
            .sum()
    };
    let e_y = mean(&law_y, 0.0);
    let var_y = law_y
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 - e_y) * (i as f64 - e_y) * p)
        .sum();
    Ok(BruteForceStats {
        e_t: mean(&law_t, 1.0),
        e_y,
        var_y,
        e_m: mean(&law_m, 0.0),
        law_t,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn check_geometric(p: f64) -> Result<(), Error> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "response probability must lie in (0, 1], got {p}"
        )));
    }
    Ok(())
}

/// `g_k(z) = E[z^T | S_0 = k]` for `k = 0..=r` under Geometric(p):
/// `g_0(z) = z`, `g_k(z) = z (q^k + Σ_{j<k} C(k,j) q^j p^(k-j) g_j(z))`.
fn pgf_table(binomials: &Binomials, p: f64, r: u64, z: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let mut g = Vec::with_capacity(r as usize + 1);
    g.push(z);
    for k in 1..=r {
        let mut acc = pow_u(q, k);
        for j in 0..k {
            acc += binomials.term(k, j, q, p) * g[j as usize];
        }
        g.push(z * acc);
    }
    g
}

/// `g_r(z) = E[z^T | S_0 = r]` for Geometric(p) response times.
pub fn pgf_given_r(p: f64, r: u64, z: f64) -> Result<f64, Error> {
    check_geometric(p)?;
    let binomials = Binomials::new(r);
    Ok(pgf_table(&binomials, p, r, z)[r as usize])
}

/// Prior weights below this, past the mode, are dropped from binomial
/// mixtures.
const NEGLIGIBLE_WEIGHT: f64 = 1e-18;

/// `G_{s,θ}(z) = Σ_k C(s,k) θ^k (1-θ)^(s-k) g_k(z)`, the generating function
/// of `T` when `S_0 ~ Binomial(s, θ)`.
pub fn pgf_binomial(p: f64, s: u64, theta: f64, z: f64) -> Result<f64, Error> {
    check_geometric(p)?;
    PriorSpec::Binomial { s, theta }.validate()?;
    let binomials = Binomials::new(s);
    let mode = libm::floor((s + 1) as f64 * theta) as u64;
    let mut weights = Vec::new();
    for k in 0..=s {
        let w = binomials.term(s, k, theta, 1.0 - theta);
        if k > mode && w < NEGLIGIBLE_WEIGHT {
            break;
        }
        weights.push(w);
    }
    let g = pgf_table(&binomials, p, weights.len() as u64 - 1, z);
    Ok(weights.iter().zip(&g).map(|(w, gk)| w * gk).sum())
}

/// `E[Y] = sθ (1 - G_{s-1,θ}(q))` under Geometric(p) response times and
/// `S_0 ~ Binomial(s, θ)`.
pub fn expected_yield_binomial(p: f64, s: u64, theta: f64) -> Result<f64, Error> {
    if s == 0 {
        return Err(Error::invalid("binomial yield needs s ≥ 1"));
    }
    let g = pgf_binomial(p, s - 1, theta, 1.0 - p)?;
    Ok(s as f64 * theta * (1.0 - g))
}

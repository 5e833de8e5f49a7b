//! Parallel, seed-reproducible Monte Carlo over many replicates.
//!
//! Replicate `i` draws from its own ChaCha8 stream `(seed, i)`, so a
//! replicate's outcome does not depend on which worker ran it. Replicates are
//! grouped into fixed chunks and chunk tallies are merged in chunk order;
//! counts and sums are kept as integers, so the report is bit-identical for
//! any thread count.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use solicit_core::sim::{draw_pool, simulate_with, Replicate};
use solicit_core::{Error, PriorSpec, ResponseLaw};

pub const DEFAULT_CHUNK_SIZE: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub law: ResponseLaw,
    pub prior: PriorSpec,
    pub replicates: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl SimConfig {
    pub fn new(law: ResponseLaw, prior: PriorSpec, replicates: u64, seed: u64) -> Self {
        Self {
            law,
            prior,
            replicates,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter(
                "replicates must be at least 1".into(),
            ));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidParameter(
                "chunk_size must be at least 1".into(),
            ));
        }
        self.prior.validate()
    }

    fn chunks(&self) -> Vec<(u64, u64)> {
        (0..self.replicates.div_ceil(self.chunk_size))
            .map(|c| {
                let start = c * self.chunk_size;
                (start, (start + self.chunk_size).min(self.replicates))
            })
            .collect()
    }
}

/// The random stream of replicate `index`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A sample mean and its standard error `s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|mean - target| ≤ k · std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub replicates: u64,
    pub seed: u64,
    pub despair: Estimate,
    pub responses: Estimate,
    pub effort: Estimate,
    /// Sample variance of `Y`, with standard error from the fourth central
    /// moment.
    pub yield_variance: Estimate,
    /// Empirical `P(T = n)` for `n = 1..=max observed T`.
    pub law_t: Vec<f64>,
    pub law_t_counts: Vec<u64>,
    /// Replicates where the two effort counts disagreed or `T > S_0 + 1`.
    pub identity_violations: u64,
    /// Set when standard errors are meaningless.
    pub caveat: Option<String>,
}

#[derive(Default)]
struct Tally {
    n: u64,
    t: BTreeMap<u64, u64>,
    y: BTreeMap<u64, u64>,
    m_sum: u128,
    m_sq: u128,
    violations: u64,
}

impl Tally {
    fn add(&mut self, rep: &Replicate) {
        self.n += 1;
        *self.t.entry(rep.despair).or_default() += 1;
        *self.y.entry(rep.responses).or_default() += 1;
        self.m_sum += rep.effort as u128;
        self.m_sq += (rep.effort as u128) * (rep.effort as u128);
        if rep.effort != rep.effort_by_client || rep.despair > rep.pool + 1 {
            self.violations += 1;
        }
    }

    fn merge(&mut self, other: Tally) {
        self.n += other.n;
        for (k, c) in other.t {
            *self.t.entry(k).or_default() += c;
        }
        for (k, c) in other.y {
            *self.y.entry(k).or_default() += c;
        }
        self.m_sum += other.m_sum;
        self.m_sq += other.m_sq;
        self.violations += other.violations;
    }
}

/// Sample mean and unbiased variance from exact integer power sums.
fn mean_and_variance(n: u64, s1: u128, s2: u128) -> (f64, f64) {
    let mean = s1 as f64 / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let n128 = n as u128;
    let var = match n128.checked_mul(s2).and_then(|a| a.checked_sub(s1 * s1)) {
        Some(num) => num as f64 / (n as f64 * (n - 1) as f64),
        None => (s2 as f64 - s1 as f64 * mean) / (n - 1) as f64,
    };
    (mean, var.max(0.0))
}

fn power_sums(hist: &BTreeMap<u64, u64>) -> (u128, u128) {
    hist.iter().fold((0, 0), |(s1, s2), (&k, &c)| {
        let (k, c) = (k as u128, c as u128);
        (s1 + k * c, s2 + k * k * c)
    })
}

fn estimate(n: u64, s1: u128, s2: u128) -> Estimate {
    let (mean, var) = mean_and_variance(n, s1, s2);
    Estimate {
        mean,
        std_error: (var / n as f64).sqrt(),
    }
}

fn variance_estimate(n: u64, hist: &BTreeMap<u64, u64>) -> Estimate {
    let (s1, s2) = power_sums(hist);
    let (mean, s2_hat) = mean_and_variance(n, s1, s2);
    if n < 4 {
        return Estimate {
            mean: s2_hat,
            std_error: 0.0,
        };
    }
    let nf = n as f64;
    let m4 = hist
        .iter()
        .map(|(&k, &c)| c as f64 * (k as f64 - mean).powi(4))
        .sum::<f64>()
        / nf;
    let inner = m4 - s2_hat * s2_hat * (nf - 3.0) / (nf - 1.0);
    Estimate {
        mean: s2_hat,
        std_error: (inner.max(0.0) / nf).sqrt(),
    }
}

fn run_chunk(config: &SimConfig, (start, end): (u64, u64)) -> Result<Tally, Error> {
    let mut tally = Tally::default();
    for i in start..end {
        let mut rng = replicate_rng(config.seed, i);
        let pool = draw_pool(&config.prior, &mut rng)?;
        let rep = simulate_with(&config.law, pool, &mut rng, |_, _| {});
        tally.add(&rep);
    }
    Ok(tally)
}

/// Simulates `config.replicates` campaigns and summarizes them.
pub fn simulate(config: &SimConfig) -> Result<SimReport, Error> {
    config.validate()?;
    let tallies: Vec<Tally> = config
        .chunks()
        .into_par_iter()
        .map(|chunk| run_chunk(config, chunk))
        .collect::<Result<_, _>>()?;
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }
    let n = total.n;
    let (t1, t2) = power_sums(&total.t);
    let (y1, y2) = power_sums(&total.y);
    let t_max = total.t.keys().next_back().copied().unwrap_or(1);
    let mut law_t_counts = vec![0u64; t_max as usize];
    for (&k, &c) in &total.t {
        law_t_counts[k as usize - 1] = c;
    }
    let law_t = law_t_counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(SimReport {
        replicates: n,
        seed: config.seed,
        despair: estimate(n, t1, t2),
        responses: estimate(n, y1, y2),
        effort: estimate(n, total.m_sum, total.m_sq),
        yield_variance: variance_estimate(n, &total.y),
        law_t,
        law_t_counts,
        identity_violations: total.violations,
        caveat: (n < 4)
            .then(|| format!("only {n} replicate(s): standard errors are reported as zero")),
    })
}

/// One replicate together with its per-epoch response counts
/// `X_1, ..., X_{T-1}`.
pub struct Trajectory<'a> {
    pub replicate: Replicate,
    pub responses_by_epoch: &'a [u64],
}

/// Monte Carlo mean of `statistic` over replicates, with its standard
/// error. Chunk sums are combined in chunk order.
pub fn estimate_mean<F>(config: &SimConfig, statistic: F) -> Result<Estimate, Error>
where
    F: Fn(&Trajectory<'_>) -> f64 + Sync,
{
    config.validate()?;
    let sums: Vec<(f64, f64)> = config
        .chunks()
        .into_par_iter()
        .map(|(start, end)| {
            let mut epochs = Vec::new();
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in start..end {
                let mut rng = replicate_rng(config.seed, i);
                let pool = draw_pool(&config.prior, &mut rng)?;
                epochs.clear();
                let replicate = simulate_with(&config.law, pool, &mut rng, |_, x| epochs.push(x));
                let value = statistic(&Trajectory {
                    replicate,
                    responses_by_epoch: &epochs,
                });
                s1 += value;
                s2 += value * value;
            }
            Ok((s1, s2))
        })
        .collect::<Result<_, Error>>()?;
    let (s1, s2) = sums
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = config.replicates as f64;
    let mean = s1 / n;
    let var = if config.replicates < 2 {
        0.0
    } else {
        ((s2 - s1 * mean) / (n - 1.0)).max(0.0)
    };
    Ok(Estimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}

/// Estimates `E[Σ_{n<T} g(n) X_n]`, which under a Poisson(v) pool equals
/// `v E[f(T)]` with `f(k) = Σ_{n≤k} g(n) π_n`.
pub fn identity_probe<G>(config: &SimConfig, g: G) -> Result<Estimate, Error>
where
    G: Fn(u64) -> f64 + Sync,
{
    if !matches!(config.prior, PriorSpec::Poisson { .. }) {
        return Err(Error::InvalidParameter(
            "identity probe needs a Poisson pool-size prior".into(),
        ));
    }
    estimate_mean(config, |tr| {
        tr.responses_by_epoch
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x == 0 {
                    0.0
                } else {
                    g(i as u64 + 1) * x as f64
                }
            })
            .sum()
    })
}

/// Estimates `E[z^Y / (q + p z)^M]` for Geometric(p) response times.
pub fn martingale_probe(config: &SimConfig, p: f64, z: f64) -> Result<Estimate, Error> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "z must be positive, got {z}"
        )));
    }
    let base = (1.0 - p + p * z).ln();
    let ln_z = z.ln();
    estimate_mean(config, |tr| {
        (tr.replicate.responses as f64 * ln_z - tr.replicate.effort as f64 * base).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use solicit_core::sim::simulate_once;

    fn geo(p: f64) -> ResponseLaw {
        ResponseLaw::geometric(p).unwrap()
    }

    /// Draws every client's response time and replays the campaign.
    fn per_client<R: Rng>(law: &ResponseLaw, pool: u64, rng: &mut R) -> (u64, u64, u64) {
        let times: Vec<Option<u64>> = (0..pool)
            .map(|_| {
                let u: f64 = rng.random();
                if u >= 1.0 - law.tail_mass() {
                    return None;
                }
                (1..100_000).find(|&n| u < law.cdf(n))
            })
            .collect();
        let mut t = 1;
        while times.contains(&Some(t)) {
            t += 1;
        }
        let y = times
            .iter()
            .filter(|u| matches!(u, Some(n) if *n < t))
            .count() as u64;
        let m = times
            .iter()
            .map(|u| match u {
                Some(n) if *n < t => *n,
                _ => t,
            })
            .sum();
        (t, y, m)
    }

    #[test]
    fn single_replicate_report() {
        let config = SimConfig::new(geo(0.5), PriorSpec::Fixed { r: 5 }, 1, 11);
        let report = simulate(&config).unwrap();
        let rep = simulate_once(&geo(0.5), 5, &mut {
            let mut rng = replicate_rng(11, 0);
            draw_pool(&PriorSpec::Fixed { r: 5 }, &mut rng).unwrap();
            rng
        });
        assert_eq!(report.despair.mean, rep.despair as f64);
        assert_eq!(report.responses.mean, rep.responses as f64);
        assert_eq!(report.effort.mean, rep.effort as f64);
        assert_eq!(report.despair.std_error, 0.0);
        assert!(report.caveat.is_some());
        assert_eq!(report.law_t.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn chunking_does_not_change_the_report() {
        let mut config = SimConfig::new(geo(0.3), PriorSpec::Poisson { v: 4.0 }, 5000, 99);
        config.chunk_size = 7;
        let a = simulate(&config).unwrap();
        config.chunk_size = 5000;
        let b = simulate(&config).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| simulate(&config)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.identity_violations, 0);
        assert_eq!(a.law_t_counts.iter().sum::<u64>(), 5000);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(simulate(&SimConfig::new(geo(0.5), PriorSpec::Fixed { r: 1 }, 0, 1)).is_err());
        let fixed = SimConfig::new(geo(0.5), PriorSpec::Fixed { r: 1 }, 10, 1);
        assert!(identity_probe(&fixed, |_| 1.0).is_err());
    }

    #[test]
    fn zero_weight_probe_is_exactly_zero() {
        let config = SimConfig::new(geo(0.5), PriorSpec::Poisson { v: 1.0 }, 1000, 5);
        let e = identity_probe(&config, |_| 0.0).unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn fixed_pool_of_two_matches_exact_values() {
        let config = SimConfig::new(geo(0.5), PriorSpec::Fixed { r: 2 }, 200_000, 2024);
        let report = simulate(&config).unwrap();
        assert!(report.despair.within(2.0, 4.0), "{:?}", report.despair);
        assert!(report.responses.within(1.25, 4.0), "{:?}", report.responses);
        assert!(report.effort.within(2.5, 4.0), "{:?}", report.effort);
    }

    #[test]
    fn chain_form_matches_per_client_sampler() {
        let law = ResponseLaw::mixture(0.2, 0.3, 0.5, 0.4).unwrap();
        let n = 100_000u64;
        let mut chain = [0.0f64; 3];
        let mut client = [0.0f64; 3];
        let mut rng = replicate_rng(7, 0);
        for _ in 0..n {
            let rep = simulate_once(&law, 4, &mut rng);
            let (t, y, m) = per_client(&law, 4, &mut rng);
            for (acc, x) in chain
                .iter_mut()
                .zip([rep.despair, rep.responses, rep.effort])
            {
                *acc += x as f64;
            }
            for (acc, x) in client.iter_mut().zip([t, y, m]) {
                *acc += x as f64;
            }
        }
        let exact = solicit_core::finite::pool_moments(&law, 4).unwrap()[4];
        for (i, target) in [exact.e_t, exact.e_y, exact.e_m].into_iter().enumerate() {
            // Both samplers within 1% of the exact mean.
            assert!((chain[i] / n as f64 - target).abs() < 0.01 * target);
            assert!((client[i] / n as f64 - target).abs() < 0.01 * target);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn report_ignores_chunking(seed in any::<u64>(), chunk in 1u64..600, reps in 1u64..1500) {
            let mut config = SimConfig::new(geo(0.4), PriorSpec::Binomial { s: 30, theta: 0.5 }, reps, seed);
            let reference = simulate(&config).unwrap();
            config.chunk_size = chunk;
            let chunked = simulate(&config).unwrap();
            prop_assert_eq!(&reference, &chunked);
            prop_assert_eq!(reference.identity_violations, 0);
            prop_assert_eq!(reference.law_t_counts.iter().sum::<u64>(), reps);
        }
    }
}

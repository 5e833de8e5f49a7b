//! One replicate of the solicitation process.
//!
//! The process is simulated in chain form: with `S` silent clients before
//! epoch `n`, the number of responses is `Binomial(S, p_{n-1})` where
//! `p_{n-1}` is the hazard at epoch `n`. Individual response times are never
//! drawn. Binomial draws use `rand_distr::Binomial`, which inverts the CDF
//! for small means and otherwise uses the BTPE acceptance/rejection scheme of
//! Kachitvichyanukul and Schmeiser (1988).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::finite::PriorSpec;
use crate::law::{Hazard, ResponseLaw};
use crate::Error;

/// Outcome of one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replicate {
    /// Initial pool size `S_0`.
    pub pool: u64,
    /// Despair epoch `T`.
    pub despair: u64,
    /// Total yield `Y = X_1 + ... + X_{T-1}`.
    pub responses: u64,
    /// Total effort `M = Σ_{n=1}^{T} S_{n-1}`, counted per epoch.
    pub effort: u64,
    /// The same effort counted per client: respondents contribute their
    /// response epoch, everyone else contributes `T`.
    pub effort_by_client: u64,
}

impl Replicate {
    /// Clients still silent when the solicitor gave up.
    pub fn survivors(&self) -> u64 {
        self.pool - self.responses
    }
}

fn hazard_or_certain(law: &ResponseLaw, epoch: u64) -> Hazard {
    law.hazard(epoch).unwrap_or(Hazard {
        respond: 1.0,
        silent: 0.0,
    })
}

fn draw_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("hazard lies in (0, 1)")
        .sample(rng)
}

/// Runs one campaign from a pool of `pool` clients, calling
/// `on_epoch(n, X_n)` for every epoch before despair.
pub fn simulate_with<R: Rng + ?Sized>(
    law: &ResponseLaw,
    pool: u64,
    rng: &mut R,
    mut on_epoch: impl FnMut(u64, u64),
) -> Replicate {
    let mut silent = pool;
    let mut effort = 0u64;
    let mut weighted_epochs = 0u64;
    let mut epoch = 1u64;
    loop {
        effort += silent;
        let responded = if silent == 0 {
            0
        } else {
            draw_binomial(rng, silent, hazard_or_certain(law, epoch).respond)
        };
        if responded == 0 {
            let responses = pool - silent;
            return Replicate {
                pool,
                despair: epoch,
                responses,
                effort,
                effort_by_client: weighted_epochs + epoch * silent,
            };
        }
        on_epoch(epoch, responded);
        weighted_epochs += epoch * responded;
        silent -= responded;
        epoch += 1;
    }
}

/// Runs one campaign from a pool of `pool` clients.
pub fn simulate_once<R: Rng + ?Sized>(law: &ResponseLaw, pool: u64, rng: &mut R) -> Replicate {
    simulate_with(law, pool, rng, |_, _| {})
}

/// Draws `S_0` from the prior.
pub fn draw_pool<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> Result<u64, Error> {
    prior.validate()?;
    Ok(match *prior {
        PriorSpec::Fixed { r } => r,
        PriorSpec::Binomial { s, theta } => draw_binomial(rng, s, theta),
        PriorSpec::Poisson { v } => {
            if v == 0.0 {
                0
            } else {
                let poisson = Poisson::new(v)
                    .map_err(|e| Error::invalid(alloc::format!("Poisson({v}): {e}")))?;
                let x: f64 = poisson.sample(rng);
                x as u64
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_pool_despairs_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let law = ResponseLaw::geometric(0.5).unwrap();
        let rep = simulate_once(&law, 0, &mut rng);
        assert_eq!((rep.despair, rep.responses, rep.effort), (1, 0, 0));
    }

    #[test]
    fn certain_first_epoch_response_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let law = ResponseLaw::table(vec![1.0], None).unwrap();
        let rep = simulate_once(&law, 3, &mut rng);
        assert_eq!((rep.despair, rep.responses, rep.effort), (2, 3, 3));
        assert_eq!(rep.effort_by_client, 3);
    }

    #[test]
    fn per_replicate_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let law = ResponseLaw::mixture(0.2, 0.3, 0.5, 0.1).unwrap();
        for pool in 0..200u64 {
            let mut seen = Vec::new();
            let rep = simulate_with(&law, pool, &mut rng, |n, x| seen.push((n, x)));
            assert_eq!(rep.effort, rep.effort_by_client);
            assert!(rep.despair <= pool + 1);
            let y: u64 = seen.iter().map(|&(_, x)| x).sum();
            assert_eq!(y, rep.responses);
            assert_eq!(rep.responses + rep.survivors(), pool);
            assert_eq!(seen.len() as u64, rep.despair - 1);
        }
    }

    #[test]
    fn pool_draws_respect_the_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(draw_pool(&PriorSpec::Fixed { r: 7 }, &mut rng).unwrap(), 7);
        assert_eq!(
            draw_pool(&PriorSpec::Poisson { v: 0.0 }, &mut rng).unwrap(),
            0
        );
        assert_eq!(
            draw_pool(&PriorSpec::Binomial { s: 9, theta: 1.0 }, &mut rng).unwrap(),
            9
        );
        assert!(draw_pool(&PriorSpec::Binomial { s: 9, theta: 1.5 }, &mut rng).is_err());
        let n = 20_000;
        let mean = (0..n)
            .map(|_| draw_pool(&PriorSpec::Poisson { v: 3.0 }, &mut rng).unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 3.0).abs() < 4.0 * (3.0f64 / n as f64).sqrt());
    }
}

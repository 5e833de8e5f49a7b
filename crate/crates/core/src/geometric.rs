//! Closed-form path for geometric response times under a Poisson prior.
//!
//! With `P(U > m) = q^m` the despair-time generating function
//! `G_v(z) = E[z^T]` is the series `Σ_n λ_1 ⋯ λ_{n-1} (1 - λ_n) z^n` with
//! `λ_j = 1 - exp(-p q^{j-1} v)`, and
//!
//! ```text
//! E[Y] = v (1 - G_v(q)),    E[M] = E[Y] / p.
//! ```

use crate::poisson::{check_pool_mean, TruncationPolicy};
use crate::Error;

/// Geometric(p) response times with a Poisson(v) pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricPoissonCampaign {
    p: f64,
    q: f64,
    v: f64,
    policy: TruncationPolicy,
}

/// A generating-function value and the truncation residual `P(T > n_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfValue {
    pub value: f64,
    pub residual: f64,
    pub terms: usize,
}

impl GeometricPoissonCampaign {
    pub fn new(p: f64, v: f64, policy: TruncationPolicy) -> Result<Self, Error> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(alloc::format!(
                "response probability must lie in (0, 1], got {p}"
            )));
        }
        check_pool_mean(v)?;
        policy.validate()?;
        Ok(Self {
            p,
            q: 1.0 - p,
            v,
            policy,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    /// Same response law with the pool mean replaced.
    pub fn with_pool(&self, v: f64) -> Result<Self, Error> {
        check_pool_mean(v)?;
        Ok(Self { v, ..*self })
    }

    /// `G_v(z) = E[z^T]`, truncated per the policy.
    pub fn pgf(&self, z: f64) -> Result<f64, Error> {
        Ok(self.pgf_detailed(z)?.value)
    }

    pub fn pgf_detailed(&self, z: f64) -> Result<PgfValue, Error> {
        if !(z >= 0.0) {
            return Err(Error::invalid(alloc::format!(
                "generating function argument must be nonnegative, got {z}"
            )));
        }
        if self.v == 0.0 {
            return Ok(PgfValue {
                value: z,
                residual: 0.0,
                terms: 1,
            });
        }
        let mut sum = 0.0;
        let mut product = 1.0;
        let mut z_pow = z;
        let mut q_pow = 1.0;
        for n in 1..=self.policy.hard_cap {
            let rate = self.p * q_pow * self.v;
            sum += product * libm::exp(-rate) * z_pow;
            product *= -libm::expm1(-rate);
            if product <= self.policy.alpha {
                return Ok(PgfValue {
                    value: sum,
                    residual: product,
                    terms: n,
                });
            }
            z_pow *= z;
            q_pow *= self.q;
        }
        Err(Error::TruncationFailure {
            hard_cap: self.policy.hard_cap,
            residual: product,
            alpha: self.policy.alpha,
        })
    }

    /// `1 - G_v(z)` for `z` in `[0, 1]`, summed as
    /// `Σ_n P(T = n) (1 - z^n) + P(T > n_max)` so that no digits are lost when
    /// `G_v(z)` is close to one.
    pub fn pgf_complement(&self, z: f64) -> Result<PgfValue, Error> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::invalid(alloc::format!(
                "complement is evaluated on [0, 1], got {z}"
            )));
        }
        if self.v == 0.0 {
            return Ok(PgfValue {
                value: 1.0 - z,
                residual: 0.0,
                terms: 1,
            });
        }
        let ln_z = if z == self.q {
            libm::log1p(-self.p)
        } else {
            libm::log(z)
        };
        let mut sum = 0.0;
        let mut product = 1.0;
        let mut q_pow = 1.0;
        for n in 1..=self.policy.hard_cap {
            let rate = self.p * q_pow * self.v;
            let miss = if z == 0.0 {
                1.0
            } else {
                -libm::expm1(n as f64 * ln_z)
            };
            sum += product * libm::exp(-rate) * miss;
            product *= -libm::expm1(-rate);
            if product <= self.policy.alpha {
                return Ok(PgfValue {
                    value: sum + product,
                    residual: product,
                    terms: n,
                });
            }
            q_pow *= self.q;
        }
        Err(Error::TruncationFailure {
            hard_cap: self.policy.hard_cap,
            residual: product,
            alpha: self.policy.alpha,
        })
    }

    /// `E[Y] = v (1 - G_v(q))`.
    pub fn expected_yield(&self) -> Result<f64, Error> {
        Ok(self.v * self.pgf_complement(self.q)?.value)
    }

    /// `E[M] = v (1 - G_v(q)) / p`.
    pub fn expected_effort(&self) -> Result<f64, Error> {
        Ok(self.expected_yield()? / self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::ResponseLaw;
    use crate::poisson;

    fn campaign(p: f64, v: f64) -> GeometricPoissonCampaign {
        GeometricPoissonCampaign::new(p, v, TruncationPolicy::default()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn pgf_examples() {
        let c = campaign(0.5, 1.0);
        assert_eq!(c.pgf(0.0).unwrap(), 0.0);
        let at_one = c.pgf_detailed(1.0).unwrap();
        close(at_one.value, 1.0 - at_one.residual, 1e-15);
        // Σ_n P(T = n) 2^{-n} from the frozen law of T.
        close(c.pgf(0.5).unwrap(), 0.390_094_432_051_561_5, 1e-13);
    }

    #[test]
    fn yield_and_effort_examples() {
        assert_eq!(campaign(0.5, 0.0).expected_yield().unwrap(), 0.0);
        assert_eq!(campaign(0.5, 0.0).expected_effort().unwrap(), 0.0);
        close(campaign(1.0, 7.5).expected_yield().unwrap(), 7.5, 0.0);
        close(campaign(1.0, 3.0).expected_effort().unwrap(), 3.0, 0.0);
        close(
            campaign(0.5, 1.0).expected_yield().unwrap(),
            0.609_905_567_948_438_5,
            1e-13,
        );
        close(
            campaign(0.5, 1.0).expected_effort().unwrap(),
            1.219_811_135_896_877,
            1e-13,
        );
    }

    #[test]
    fn complement_matches_pgf() {
        for &(p, v) in &[(0.5, 1.0), (0.1, 30.0), (1.0 / 512.0, 1000.0)] {
            let c = campaign(p, v);
            for &z in &[0.0, 0.3, 1.0 - p, 0.999, 1.0] {
                let g = c.pgf(z).unwrap();
                let h = c.pgf_complement(z).unwrap().value;
                close(g + h, 1.0, 1e-14);
            }
        }
        assert!(campaign(0.5, 1.0).pgf_complement(1.5).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let policy = TruncationPolicy::default();
        assert!(GeometricPoissonCampaign::new(0.0, 1.0, policy).is_err());
        assert!(GeometricPoissonCampaign::new(0.5, -1.0, policy).is_err());
        assert!(campaign(0.5, 1.0).pgf(-0.1).is_err());
    }

    #[test]
    fn functional_equation_holds() {
        for &p in &[0.5, 1.0 / 512.0] {
            for &v in &[1.0, 100.0, 1000.0] {
                let c = campaign(p, v);
                let shifted = c.with_pool(c.q() * v).unwrap();
                let stay = (-p * v).exp();
                for &z in &[0.2, 0.5, 0.9, 1.0] {
                    let lhs = c.pgf(z).unwrap() / z;
                    let rhs = stay + (1.0 - stay) * shifted.pgf(z).unwrap();
                    assert!((lhs - rhs).abs() < 1e-10, "p={p} v={v} z={z}");
                }
            }
        }
    }

    #[test]
    fn pgf_is_monotone_on_unit_interval() {
        let c = campaign(0.2, 40.0);
        let mut prev = 0.0;
        for i in 0..=100 {
            let g = c.pgf(i as f64 / 100.0).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        let loose =
            GeometricPoissonCampaign::new(0.2, 40.0, TruncationPolicy::new(1e-3, 1000).unwrap())
                .unwrap()
                .pgf(1.0)
                .unwrap();
        assert!(prev >= loose && (1.0 - prev) < 1e-12);
    }

    #[test]
    fn matches_general_engine() {
        let policy = TruncationPolicy::default();
        for &p in &[0.5, 0.1, 1.0 / 512.0] {
            for &v in &[0.3, 1.0, 1000.0] {
                let c = campaign(p, v);
                let law = ResponseLaw::geometric(p).unwrap();
                let y = poisson::expected_yield(&law, v, &policy).unwrap();
                let m = poisson::expected_effort(&law, v, &policy).unwrap();
                let yg = c.expected_yield().unwrap();
                let mg = c.expected_effort().unwrap();
                assert!(
                    (y - yg).abs() <= 1e-10 * y.max(1.0),
                    "E[Y] p={p} v={v}: {y} vs {yg}"
                );
                assert!(
                    (m - mg).abs() <= 1e-10 * m.max(1.0),
                    "E[M] p={p} v={v}: {m} vs {mg}"
                );
                assert!((mg * p - yg).abs() <= 1e-12 * yg.max(1.0));
            }
        }
    }
}

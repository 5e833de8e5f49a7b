//! Binomial coefficients and binomial-law terms.

use alloc::vec::Vec;

use crate::law::pow_u;

/// Rows above this size switch from the Pascal triangle to log-gamma.
pub(crate) const TRIANGLE_LIMIT: u64 = 1000;

/// Pascal triangle `C(n, k)` for `n ≤ min(n_max, TRIANGLE_LIMIT)`.
pub(crate) struct Binomials {
    rows: u64,
    flat: Vec<f64>,
}

impl Binomials {
    pub(crate) fn new(n_max: u64) -> Self {
        let rows = n_max.min(TRIANGLE_LIMIT);
        let len = ((rows + 1) * (rows + 2) / 2) as usize;
        let mut flat = Vec::with_capacity(len);
        for n in 0..=rows {
            for k in 0..=n {
                let c = if k == 0 || k == n {
                    1.0
                } else {
                    let prev = offset(n - 1);
                    flat[prev + k as usize - 1] + flat[prev + k as usize]
                };
                flat.push(c);
            }
        }
        Self { rows, flat }
    }

    pub(crate) fn coef(&self, n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        if n <= self.rows {
            self.flat[offset(n) + k as usize]
        } else {
            libm::exp(ln_choose(n, k))
        }
    }

    /// `C(n, k) a^k b^(n-k)`.
    pub(crate) fn term(&self, n: u64, k: u64, a: f64, b: f64) -> f64 {
        if k > n {
            return 0.0;
        }
        if n <= self.rows {
            return self.coef(n, k) * pow_u(a, k) * pow_u(b, n - k);
        }
        if a == 0.0 {
            return if k == 0 { pow_u(b, n) } else { 0.0 };
        }
        if b == 0.0 {
            return if k == n { pow_u(a, n) } else { 0.0 };
        }
        libm::exp(ln_choose(n, k) + k as f64 * libm::log(a) + (n - k) as f64 * libm::log(b))
    }
}

fn offset(n: u64) -> usize {
    (n * (n + 1) / 2) as usize
}

pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_matches_small_values() {
        let b = Binomials::new(10);
        assert_eq!(b.coef(0, 0), 1.0);
        assert_eq!(b.coef(5, 2), 10.0);
        assert_eq!(b.coef(10, 5), 252.0);
        assert_eq!(b.coef(4, 7), 0.0);
    }

    #[test]
    fn log_gamma_route_agrees_with_triangle() {
        let b = Binomials::new(TRIANGLE_LIMIT);
        for &(n, k) in &[(1000u64, 3u64), (1000, 500), (999, 998)] {
            let exact = b.coef(n, k);
            let via_lgamma = libm::exp(ln_choose(n, k));
            assert!((exact - via_lgamma).abs() / exact < 1e-9, "C({n},{k})");
        }
    }

    #[test]
    fn terms_form_a_distribution_above_the_triangle() {
        let b = Binomials::new(TRIANGLE_LIMIT);
        let n = 5000;
        let total: f64 = (0..=n).map(|k| b.term(n, k, 0.3, 0.7)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(b.term(n, 0, 0.0, 1.0), 1.0);
        assert_eq!(b.term(n, n, 1.0, 0.0), 1.0);
    }
}

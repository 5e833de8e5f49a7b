//! Response-time distributions.
//!
//! A [`ResponseLaw`] is the common law of the epoch `U` at which a client
//! would first respond if solicited forever. `U` takes values in
//! `{1, 2, ..., ∞}`; the atom at infinity models clients who never respond.

use alloc::vec::Vec;

use crate::{Error, MASS_TOLERANCE};

/// Distribution of a client's response epoch, including mass at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseLaw {
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Geometric {
        p: f64,
        q: f64,
    },
    /// Point mass `w1` at 1, `winf` at infinity, `wg` spread as Geometric(p).
    Mixture {
        w1: f64,
        winf: f64,
        wg: f64,
        p: f64,
        q: f64,
    },
    Table(Table),
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    masses: Vec<f64>,
    tail: f64,
    /// `survival[m] = P(U > m)` for `m = 0..=N`, with `survival[0] = 1`.
    survival: Vec<f64>,
    /// `truncated_mean[k] = Σ_{m<k} survival[m]` for `k = 0..=N+1`.
    truncated_mean: Vec<f64>,
}

/// Conditional response and silence probabilities at one epoch, given that
/// the client has stayed silent so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hazard {
    pub respond: f64,
    pub silent: f64,
}

/// Borrowed view of how a law is parameterized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind<'a> {
    Geometric { p: f64 },
    Mixture { w1: f64, winf: f64, wg: f64, p: f64 },
    Table { masses: &'a [f64], tail: f64 },
}

fn check_probability(name: &str, x: f64) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(alloc::format!(
            "{name} must lie in [0, 1], got {x}"
        )));
    }
    Ok(())
}

fn check_response_probability(p: f64) -> Result<(), Error> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "geometric response probability must lie in (0, 1], got {p}"
        )));
    }
    Ok(())
}

impl ResponseLaw {
    /// `P(U = n) = p (1 - p)^(n-1)`.
    pub fn geometric(p: f64) -> Result<Self, Error> {
        check_response_probability(p)?;
        Ok(Self {
            repr: Repr::Geometric { p, q: 1.0 - p },
        })
    }

    /// Pent-up demand at epoch 1, indifference at infinity, and a geometric
    /// body. The three weights must sum to one.
    pub fn mixture(w1: f64, winf: f64, wg: f64, p: f64) -> Result<Self, Error> {
        check_probability("w1", w1)?;
        check_probability("winf", winf)?;
        check_probability("wg", wg)?;
        check_response_probability(p)?;
        let total = w1 + winf + wg;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(alloc::format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            repr: Repr::Mixture {
                w1,
                winf,
                wg,
                p,
                q: 1.0 - p,
            },
        })
    }

    /// Explicit masses `π_1..π_N`; everything else sits at infinity.
    ///
    /// When `tail` is `None` it is inferred as `1 - Σ masses`, clamped to
    /// zero if the deficit is within tolerance.
    pub fn table(masses: Vec<f64>, tail: Option<f64>) -> Result<Self, Error> {
        for (i, &m) in masses.iter().enumerate() {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::invalid(alloc::format!(
                    "mass at n={} must lie in [0, 1], got {m}",
                    i + 1
                )));
            }
        }
        let finite: f64 = masses.iter().sum();
        let tail = match tail {
            Some(t) => {
                check_probability("tail", t)?;
                if (finite + t - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::invalid(alloc::format!(
                        "masses plus tail sum to {}, expected 1",
                        finite + t
                    )));
                }
                t
            }
            None => {
                let t = 1.0 - finite;
                if t < -MASS_TOLERANCE {
                    return Err(Error::invalid(alloc::format!(
                        "masses sum to {finite}, exceeding 1"
                    )));
                }
                t.max(0.0)
            }
        };

        let n = masses.len();
        let mut survival = alloc::vec![0.0; n + 1];
        let mut acc = tail;
        for m in (1..=n).rev() {
            survival[m] = acc;
            acc += masses[m - 1];
        }
        survival[0] = 1.0;
        let mut truncated_mean = Vec::with_capacity(n + 2);
        let mut h = 0.0;
        truncated_mean.push(h);
        for &s in &survival {
            h += s;
            truncated_mean.push(h);
        }

        Ok(Self {
            repr: Repr::Table(Table {
                masses,
                tail,
                survival,
                truncated_mean,
            }),
        })
    }

    pub fn kind(&self) -> LawKind<'_> {
        match &self.repr {
            Repr::Geometric { p, .. } => LawKind::Geometric { p: *p },
            Repr::Mixture {
                w1, winf, wg, p, ..
            } => LawKind::Mixture {
                w1: *w1,
                winf: *winf,
                wg: *wg,
                p: *p,
            },
            Repr::Table(t) => LawKind::Table {
                masses: &t.masses,
                tail: t.tail,
            },
        }
    }

    /// The response probability when the law is a pure geometric.
    pub fn as_geometric(&self) -> Option<f64> {
        match self.repr {
            Repr::Geometric { p, .. } => Some(p),
            _ => None,
        }
    }

    /// `P(U = ∞)`.
    pub fn tail_mass(&self) -> f64 {
        match &self.repr {
            Repr::Geometric { .. } => 0.0,
            Repr::Mixture { winf, .. } => *winf,
            Repr::Table(t) => t.tail,
        }
    }

    /// `π_n = P(U = n)`. Zero for `n = 0`.
    pub fn mass_at(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Geometric { p, q } => p * pow_u(*q, n - 1),
            Repr::Mixture { w1, wg, p, q, .. } => {
                let body = wg * p * pow_u(*q, n - 1);
                if n == 1 {
                    w1 + body
                } else {
                    body
                }
            }
            Repr::Table(t) => t.masses.get((n - 1) as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P(U > m)`, counting the mass at infinity. Equals 1 at `m = 0`.
    pub fn survival(&self, m: u64) -> f64 {
        if m == 0 {
            return 1.0;
        }
        match &self.repr {
            Repr::Geometric { q, .. } => pow_u(*q, m),
            Repr::Mixture { winf, wg, q, .. } => winf + wg * pow_u(*q, m),
            Repr::Table(t) => t.survival.get(m as usize).copied().unwrap_or(t.tail),
        }
    }

    /// `F(k) = π_1 + ... + π_k`.
    pub fn cdf(&self, k: u64) -> f64 {
        match &self.repr {
            Repr::Geometric { p, .. } => geometric_cdf(*p, k),
            _ => 1.0 - self.survival(k),
        }
    }

    /// Response and silence probabilities at epoch `n`, given silence through
    /// epoch `n - 1`.
    pub fn hazard(&self, n: u64) -> Result<Hazard, Error> {
        if n == 0 {
            return Err(Error::invalid("hazard epoch must be at least 1"));
        }
        if let Repr::Geometric { p, q } = self.repr {
            return Ok(Hazard {
                respond: p,
                silent: q,
            });
        }
        let before = self.survival(n - 1);
        if before <= 0.0 {
            return Err(Error::ConditioningOnNull { epoch: n });
        }
        let respond = (self.mass_at(n) / before).min(1.0);
        let silent = (self.survival(n) / before).min(1.0);
        Ok(Hazard { respond, silent })
    }

    /// `H(k) = E[min(U, k)] = Σ_{m=0}^{k-1} P(U > m)`. Finite even with mass
    /// at infinity. Zero at `k = 0`.
    pub fn truncated_mean(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Geometric { p, .. } => geometric_cdf(*p, k) / p,
            Repr::Mixture { winf, wg, p, q, .. } => {
                // 1 + Σ_{m=1}^{k-1} (winf + wg q^m)
                1.0 + (k - 1) as f64 * winf + wg * (q - pow_u(*q, k)) / p
            }
            Repr::Table(t) => {
                let last = t.truncated_mean.len() as u64 - 1;
                if k <= last {
                    t.truncated_mean[k as usize]
                } else {
                    t.truncated_mean[last as usize] + (k - last) as f64 * t.tail
                }
            }
        }
    }
}

pub(crate) fn pow_u(x: f64, n: u64) -> f64 {
    libm::pow(x, n as f64)
}

fn geometric_cdf(p: f64, k: u64) -> f64 {
    if p < 0.5 {
        -libm::expm1(k as f64 * libm::log1p(-p))
    } else {
        1.0 - pow_u(1.0 - p, k)
    }
}

//! Campaign planning on top of the geometric engine.
//!
//! All plans assume Geometric(p) response times and a Poisson(v) pool. A
//! known fraction `purchase_rate` of respondents buys, so expected sales are
//! `purchase_rate · E_{v,p}[Y]`.
//!
//! The two "smallest parameter" searches rely on expected sales being
//! nondecreasing in the searched parameter. That premise is checked on a
//! probe grid before bisecting; if it fails the search falls back to a dense
//! grid scan.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometric::GeometricPoissonCampaign;
use crate::poisson::{check_pool_mean, TruncationPolicy};
use crate::Error;

/// Default bisection tolerance, relative to the upper end of the bracket.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-6;

const PROBE_POINTS: usize = 33;
const SCAN_POINTS: usize = 1025;

/// `DEFAULT_RELATIVE_TOL` scaled to a search bracket.
pub fn default_tol(bounds: (f64, f64)) -> f64 {
    DEFAULT_RELATIVE_TOL * bounds.1.abs().max(f64::MIN_POSITIVE)
}

/// Response probability as a function of the selling price `w`.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceCurve {
    /// `p(w) = a e^{-b w}`.
    Exponential { a: f64, b: f64 },
    /// `p(w) = a w^{-b}`.
    Power { a: f64, b: f64 },
    /// Knots `(w, p)` with strictly increasing `w` and nonincreasing `p`,
    /// interpolated linearly in `log p`. No extrapolation.
    Table { knots: Vec<(f64, f64)> },
}

impl PriceCurve {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            PriceCurve::Exponential { a, b } | PriceCurve::Power { a, b } => {
                if !(*a > 0.0 && *a <= 1.0) || !(*b >= 0.0) {
                    return Err(Error::invalid(alloc::format!(
                        "parametric price curve needs 0 < a ≤ 1 and b ≥ 0, got a={a}, b={b}"
                    )));
                }
            }
            PriceCurve::Table { knots } => {
                if knots.is_empty() {
                    return Err(Error::invalid("price table needs at least one knot"));
                }
                for &(w, p) in knots {
                    if !(p > 0.0 && p <= 1.0) || !w.is_finite() {
                        return Err(Error::invalid(alloc::format!(
                            "price knot ({w}, {p}) needs finite w and p in (0, 1]"
                        )));
                    }
                }
                for pair in knots.windows(2) {
                    if !(pair[1].0 > pair[0].0) || pair[1].1 > pair[0].1 {
                        return Err(Error::invalid(
                            "price table must have increasing w and nonincreasing p",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `p(w)`.
    pub fn response_probability(&self, w: f64) -> Result<f64, Error> {
        let p = match self {
            PriceCurve::Exponential { a, b } => a * libm::exp(-b * w),
            PriceCurve::Power { a, b } => {
                if !(w > 0.0) {
                    return Err(Error::invalid(alloc::format!(
                        "power price curve needs w > 0, got {w}"
                    )));
                }
                a * libm::pow(w, -b)
            }
            PriceCurve::Table { knots } => {
                let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
                if !(w >= lo && w <= hi) {
                    return Err(Error::CurveDomain { w, lo, hi });
                }
                let i = knots.partition_point(|&(x, _)| x <= w);
                if i == knots.len() {
                    knots[i - 1].1
                } else {
                    let (w0, p0) = knots[i - 1];
                    let (w1, p1) = knots[i];
                    let t = (w - w0) / (w1 - w0);
                    libm::exp(libm::log(p0) * (1.0 - t) + libm::log(p1) * t)
                }
            }
        };
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(alloc::format!(
                "price curve gives p({w}) = {p}, outside (0, 1]"
            )));
        }
        Ok(p)
    }
}

/// Purchase rate, unit costs and the price-response curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Economics {
    /// Fraction of respondents who buy.
    pub purchase_rate: f64,
    /// Cost of the product per unit sold.
    pub c0: f64,
    /// Cost of acquiring one prospect.
    pub c1: f64,
    /// Cost of one solicitation.
    pub c2: f64,
    pub price_curve: PriceCurve,
}

impl Economics {
    pub fn validate(&self) -> Result<(), Error> {
        check_purchase_rate(self.purchase_rate)?;
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "{name} must be finite and nonnegative, got {c}"
                )));
            }
        }
        self.price_curve.validate()
    }
}

fn check_purchase_rate(rate: f64) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(alloc::format!(
            "purchase rate must lie in [0, 1], got {rate}"
        )));
    }
    Ok(())
}

/// What a plan settled on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    PoolSize(f64),
    ResponseProbability(f64),
    PoolAndPrice { v: f64, w: f64 },
}

/// How a plan was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    /// The lower end of the bracket already meets the target.
    LowerBound,
    Bisection,
    /// Expected sales were not monotone on the probe grid.
    GridScan,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitCell {
    pub v: f64,
    pub w: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub choice: Choice,
    /// `purchase_rate · E[Y]` at the chosen parameters.
    pub expected_sales: f64,
    pub expected_profit: Option<f64>,
    pub method: SearchMethod,
    /// For threshold searches: the parameter one tolerance below the answer
    /// and the expected sales there (below target when the search succeeded).
    pub below: Option<(f64, f64)>,
    /// Evaluated `(parameter, expected sales)` pairs, sorted by parameter.
    pub curve: Vec<(f64, f64)>,
    /// Full profit surface in grid order, for profit optimization.
    pub surface: Vec<ProfitCell>,
}

/// `(v, E_{v,p}[Y])` along `v_grid`.
pub fn yield_curve(
    p: f64,
    v_grid: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<(f64, f64)>, Error> {
    let base = GeometricPoissonCampaign::new(p, 0.0, *policy)?;
    v_grid
        .iter()
        .map(|&v| Ok((v, base.with_pool(v)?.expected_yield()?)))
        .collect()
}

/// `(p, E_{v,p}[Y])` along `p_grid`.
pub fn response_curve(
    v: f64,
    p_grid: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<(f64, f64)>, Error> {
    p_grid
        .iter()
        .map(|&p| {
            Ok((
                p,
                GeometricPoissonCampaign::new(p, v, *policy)?.expected_yield()?,
            ))
        })
        .collect()
}

struct Threshold {
    param: f64,
    sales: f64,
    method: SearchMethod,
    below: Option<(f64, f64)>,
    curve: Vec<(f64, f64)>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Smallest parameter in `[lo, hi]` with `sales(param) ≥ target`, to within
/// `tol`.
fn smallest_feasible(
    bounds: (f64, f64),
    tol: f64,
    target: f64,
    sales: impl Fn(f64) -> Result<f64, Error>,
) -> Result<Threshold, Error> {
    let (lo, hi) = bounds;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(alloc::format!(
            "search bracket [{lo}, {hi}] is empty or not finite"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(alloc::format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(target >= 0.0) {
        return Err(Error::invalid(alloc::format!(
            "target must be nonnegative, got {target}"
        )));
    }

    let probe: Vec<(f64, f64)> = linspace(lo, hi, PROBE_POINTS)
        .into_iter()
        .map(|x| Ok((x, sales(x)?)))
        .collect::<Result<_, Error>>()?;
    let at_hi = probe[probe.len() - 1].1;
    if at_hi < target {
        return Err(Error::Infeasible {
            target,
            achieved: at_hi,
        });
    }
    if probe[0].1 >= target {
        return Ok(Threshold {
            param: lo,
            sales: probe[0].1,
            method: SearchMethod::LowerBound,
            below: None,
            curve: probe,
        });
    }

    let monotone = probe.windows(2).all(|w| w[1].1 >= w[0].1);
    let (grid, method) = if monotone {
        (probe.clone(), SearchMethod::Bisection)
    } else {
        let scan = linspace(lo, hi, SCAN_POINTS)
            .into_iter()
            .map(|x| Ok((x, sales(x)?)))
            .collect::<Result<Vec<_>, Error>>()?;
        (scan, SearchMethod::GridScan)
    };
    let first = grid
        .iter()
        .position(|&(_, s)| s >= target)
        .expect("upper end is feasible");
    let (mut infeasible, mut feasible) = (grid[first - 1].0, grid[first]);
    while feasible.0 - infeasible > tol / 2.0 {
        let mid = 0.5 * (infeasible + feasible.0);
        if mid <= infeasible || mid >= feasible.0 {
            break;
        }
        let s = sales(mid)?;
        if s >= target {
            feasible = (mid, s);
        } else {
            infeasible = mid;
        }
    }

    let below = feasible.0 - tol;
    let below = if below >= lo {
        Some((below, sales(below)?))
    } else {
        None
    };
    let mut curve = grid;
    curve.push(feasible);
    curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    curve.dedup_by(|a, b| a.0 == b.0);
    Ok(Threshold {
        param: feasible.0,
        sales: feasible.1,
        method,
        below,
        curve,
    })
}

/// Smallest expected pool size `v` in `v_bounds` with
/// `purchase_rate · E_{v,p}[Y] ≥ target`.
pub fn min_pool_size(
    p: f64,
    target: f64,
    purchase_rate: f64,
    v_bounds: (f64, f64),
    tol: f64,
    policy: &TruncationPolicy,
) -> Result<PlanResult, Error> {
    check_purchase_rate(purchase_rate)?;
    check_pool_mean(v_bounds.0)?;
    let base = GeometricPoissonCampaign::new(p, 0.0, *policy)?;
    let found = smallest_feasible(v_bounds, tol, target, |v| {
        Ok(purchase_rate * base.with_pool(v)?.expected_yield()?)
    })?;
    Ok(PlanResult {
        choice: Choice::PoolSize(found.param),
        expected_sales: found.sales,
        expected_profit: None,
        method: found.method,
        below: found.below,
        curve: found.curve,
        surface: Vec::new(),
    })
}

/// Smallest response probability `p` in `p_bounds` with
/// `purchase_rate · E_{v,p}[Y] ≥ target`.
pub fn min_response_prob(
    v: f64,
    target: f64,
    purchase_rate: f64,
    p_bounds: (f64, f64),
    tol: f64,
    policy: &TruncationPolicy,
) -> Result<PlanResult, Error> {
    check_purchase_rate(purchase_rate)?;
    let found = smallest_feasible(p_bounds, tol, target, |p| {
        Ok(purchase_rate * GeometricPoissonCampaign::new(p, v, *policy)?.expected_yield()?)
    })?;
    Ok(PlanResult {
        choice: Choice::ResponseProbability(found.param),
        expected_sales: found.sales,
        expected_profit: None,
        method: found.method,
        below: found.below,
        curve: found.curve,
        surface: Vec::new(),
    })
}

fn profit_and_sales(
    v: f64,
    w: f64,
    econ: &Economics,
    policy: &TruncationPolicy,
) -> Result<(f64, f64), Error> {
    let p = econ.price_curve.response_probability(w)?;
    let campaign = GeometricPoissonCampaign::new(p, v, *policy)?;
    let e_y = campaign.expected_yield()?;
    let e_m = campaign.expected_effort()?;
    let sales = econ.purchase_rate * e_y;
    // The purchase rate scales revenue only; every solicitation is paid for.
    let profit = econ.purchase_rate * (w - econ.c0) * e_y - econ.c1 * v - econ.c2 * e_m;
    Ok((profit, sales))
}

/// `F(v, w) = θ (w - c0) E[Y] - c1 v - c2 E[M]` with `p = p(w)` and `θ` the
/// purchase rate.
pub fn expected_profit(
    v: f64,
    w: f64,
    econ: &Economics,
    policy: &TruncationPolicy,
) -> Result<f64, Error> {
    econ.validate()?;
    Ok(profit_and_sales(v, w, econ, policy)?.0)
}

/// `true` when `a` beats `b`: higher profit, then smaller `v`, then smaller
/// `w`.
fn better(a: &ProfitCell, b: &ProfitCell) -> bool {
    match a.profit.partial_cmp(&b.profit) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => (a.v, a.w) < (b.v, b.w),
    }
}

/// Exhaustive search of `F(v, w)` over `v_grid × w_grid`.
pub fn optimize_profit(
    econ: &Economics,
    v_grid: &[f64],
    w_grid: &[f64],
    policy: &TruncationPolicy,
) -> Result<PlanResult, Error> {
    econ.validate()?;
    if v_grid.is_empty() || w_grid.is_empty() {
        return Err(Error::invalid("profit grids must be nonempty"));
    }
    let mut surface = Vec::with_capacity(v_grid.len() * w_grid.len());
    let mut sales = Vec::with_capacity(surface.capacity());
    for &v in v_grid {
        for &w in w_grid {
            let (profit, s) = profit_and_sales(v, w, econ, policy)?;
            surface.push(ProfitCell { v, w, profit });
            sales.push(s);
        }
    }
    let mut best = 0;
    for i in 1..surface.len() {
        if better(&surface[i], &surface[best]) {
            best = i;
        }
    }
    let cell = surface[best];
    Ok(PlanResult {
        choice: Choice::PoolAndPrice {
            v: cell.v,
            w: cell.w,
        },
        expected_sales: sales[best],
        expected_profit: Some(cell.profit),
        method: SearchMethod::Exhaustive,
        below: None,
        curve: Vec::new(),
        surface,
    })
}

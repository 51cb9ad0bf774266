//! Capped single-user water-filling.
//!
//! Maximizes `Σ_j ln(1 + ε_j p_j)` subject to `Σ_j p_j = P` and
//! `0 ≤ p_j ≤ cap_j`. The optimum has the form `p_j = clip(μ − 1/ε_j, 0,
//! cap_j)`; the water level `μ` is bracketed by bisection and then fixed
//! exactly on the resulting active set.

use crate::error::{NbError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub power: Vec<f64>,
    /// `Σ_j ln(1 + ε_j p_j)` in nats.
    pub rate: f64,
    /// Water level `μ`; 0 when nothing is allocated.
    pub level: f64,
}

fn fill(eps: &[f64], caps: &[f64], level: f64) -> Vec<f64> {
    eps.iter()
        .zip(caps)
        .map(|(&e, &c)| if e > 0.0 { (level - 1.0 / e).clamp(0.0, c) } else { 0.0 })
        .collect()
}

fn rate_of(eps: &[f64], power: &[f64]) -> f64 {
    eps.iter().zip(power).map(|(e, p)| (e * p).ln_1p()).sum()
}

fn check_inputs(eps: &[f64], caps: &[f64]) -> Result<()> {
    if eps.len() != caps.len() {
        return Err(NbError::Domain(format!(
            "{} channel measures for {} caps",
            eps.len(),
            caps.len()
        )));
    }
    for (j, (&e, &c)) in eps.iter().zip(caps).enumerate() {
        if !(e.is_finite() && e >= 0.0) {
            return Err(NbError::Domain(format!("eps[{j}] = {e} must be finite and >= 0")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(NbError::Domain(format!("cap[{j}] = {c} must be finite and >= 0")));
        }
    }
    Ok(())
}

/// Water-filling with the full budget spent.
///
/// Bins with `ε_j = 0` get no power; if the remaining caps cannot absorb
/// the budget the useful bins are filled to their caps and the rest of the
/// budget is left unspent.
pub fn waterfill(eps: &[f64], budget: f64, caps: &[f64]) -> Result<WaterFill> {
    check_inputs(eps, caps)?;
    let total_cap: f64 = caps.iter().sum();
    if budget > total_cap {
        return Err(NbError::Infeasible(format!(
            "budget {budget} exceeds the sum of caps {total_cap}"
        )));
    }
    Ok(solve(eps, budget, caps))
}

/// Water-filling with the budget clamped to `Σ caps`.
pub fn waterfill_clamped(eps: &[f64], budget: f64, caps: &[f64]) -> Result<WaterFill> {
    check_inputs(eps, caps)?;
    let total_cap: f64 = caps.iter().sum();
    Ok(solve(eps, budget.min(total_cap), caps))
}

fn solve(eps: &[f64], budget: f64, caps: &[f64]) -> WaterFill {
    let n = eps.len();
    let zero = || WaterFill {
        power: vec![0.0; n],
        rate: 0.0,
        level: 0.0,
    };
    if !(budget > 0.0) {
        return zero();
    }
    let useful: f64 = eps
        .iter()
        .zip(caps)
        .filter(|(&e, _)| e > 0.0)
        .map(|(_, &c)| c)
        .sum();
    let top = eps
        .iter()
        .zip(caps)
        .filter(|(&e, _)| e > 0.0)
        .map(|(&e, &c)| 1.0 / e + c)
        .fold(0.0, f64::max);
    if useful == 0.0 {
        return zero();
    }
    if budget >= useful {
        // every useful bin at its cap; `fill` could land an ulp short
        let power: Vec<f64> = eps
            .iter()
            .zip(caps)
            .map(|(&e, &c)| if e > 0.0 { c } else { 0.0 })
            .collect();
        let rate = rate_of(eps, &power);
        return WaterFill {
            power,
            rate,
            level: top,
        };
    }

    let spent = |level: f64| fill(eps, caps, level).iter().sum::<f64>();
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut level = 0.5 * (lo + hi);

    // exact level on the active set found by bisection
    let mut capped = 0.0;
    let mut inv_sum = 0.0;
    let mut free = 0usize;
    for (&e, &c) in eps.iter().zip(caps) {
        if e <= 0.0 {
            continue;
        }
        let p = level - 1.0 / e;
        if p >= c {
            capped += c;
        } else if p > 0.0 {
            inv_sum += 1.0 / e;
            free += 1;
        }
    }
    if free > 0 {
        let exact = (budget - capped + inv_sum) / free as f64;
        let consistent = eps.iter().zip(caps).all(|(&e, &c)| {
            if e <= 0.0 {
                return true;
            }
            let (before, after) = (level - 1.0 / e, exact - 1.0 / e);
            if before >= c {
                after >= c
            } else if before > 0.0 {
                after > 0.0 && after < c
            } else {
                after <= 0.0
            }
        });
        if consistent {
            level = exact;
        }
    }
    let power = fill(eps, caps, level);
    let rate = rate_of(eps, &power);
    WaterFill { power, rate, level }
}

/// Largest violation of the optimality conditions of `power` for the
/// budget `budget`: bounds, the budget, and the marginal-rate ordering
/// `ε_j/(1 + ε_j p_j)` between bins that could give and bins that could
/// take power.
pub fn kkt_residual(eps: &[f64], budget: f64, caps: &[f64], power: &[f64]) -> f64 {
    let mut residual: f64 = 0.0;
    let mut can_take = f64::NEG_INFINITY;
    let mut can_give = f64::INFINITY;
    for ((&e, &c), &p) in eps.iter().zip(caps).zip(power) {
        residual = residual.max(-p).max(p - c);
        let slope = e / (1.0 + e * p);
        if p < c {
            can_take = can_take.max(slope);
        }
        if p > 0.0 {
            can_give = can_give.min(slope);
        }
    }
    let spent: f64 = power.iter().sum();
    residual = residual.max(spent - budget);
    if spent < budget - 1e-12 * (1.0 + budget) {
        // unspent budget is only optimal if no bin can still use it
        residual = residual.max(can_take.max(0.0));
    }
    if can_take.is_finite() && can_give.is_finite() {
        residual = residual.max(can_take - can_give);
    }
    residual
}

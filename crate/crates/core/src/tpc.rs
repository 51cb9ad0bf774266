//! Two-user games with spectral masks and total-power limits.
//!
//! The problem is non-convex in the joint time-fraction/power variables.
//! [`classify`] decides whether part of the mask-only TDM/FDM Pareto
//! boundary survives the power limits (bandwidth-dominant) or not
//! (power-dominant). The first case bargains on that surviving part; the
//! second time-shares between a small sampled family of FDM points with
//! water-filled powers.

use serde::{Deserialize, Serialize};

use crate::bargaining::{log_nf_rates, nb_on_segment, pareto_frontier, Allocation, UtilityPoint};
use crate::channel::{Disagreement, GameInstance};
use crate::error::{NbError, Result};
use crate::report::{Diagnostics, FdmPoint, Method, SharedBin, SolveReport, TimeShare};
use crate::smc::{order_bins, SplitTable};
use crate::tol;
use crate::waterfill::waterfill_clamped;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    BandwidthDominant,
    PowerDominant,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::BandwidthDominant => "bandwidth_dominant",
            SystemKind::PowerDominant => "power_dominant",
        }
    }
}

/// A split position whose shared-bin fraction can be chosen anywhere in
/// `[alpha_lo, alpha_hi]` without breaking either power limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Position in the comparative-advantage order.
    pub position: usize,
    /// Original bin index.
    pub bin: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: SystemKind,
    pub witness: Option<Witness>,
    pub tau: f64,
}

/// Range of user 1's share of the bin at ordered position `q` that keeps
/// both users within their power limits, before intersecting with
/// `[0, 1]`: user 1 pays for positions `< q`, user 2 for positions `> q`.
/// Returns `(lower, upper)`, already clamped as `max(0, ·)` / `min(1, ·)`.
fn share_bounds(p1: &[f64], p2: &[f64], limits: [f64; 2], q: usize, before1: f64, from2: f64) -> (f64, f64) {
    let upper = ((limits[0] - before1) / p1[q]).min(1.0);
    let lower = ((from2 - limits[1]) / p2[q]).max(0.0);
    (lower, upper)
}

/// Classification from the per-bin caps listed in comparative-advantage
/// order.
pub fn classify_ordered(p1: &[f64], p2: &[f64], limits: [f64; 2]) -> Classification {
    let n = p1.len();
    let total2: f64 = p2.iter().sum();
    let mut before1 = 0.0;
    let mut from2 = total2;
    let mut witness = None;
    for q in 0..n {
        let (lo, hi) = share_bounds(p1, p2, limits, q, before1, from2);
        if hi >= lo && hi >= 0.0 && lo <= 1.0 {
            witness = Some(Witness {
                position: q,
                bin: q,
                alpha_lo: lo,
                alpha_hi: hi,
            });
            break;
        }
        before1 += p1[q];
        from2 -= p2[q];
    }
    Classification {
        kind: if witness.is_some() {
            SystemKind::BandwidthDominant
        } else {
            SystemKind::PowerDominant
        },
        witness,
        tau: tau_ordered(p1, p2, limits),
    }
}

/// Normalized bandwidth a user can cover at full mask power, walking the
/// caps in the given order.
fn coverage(caps: impl Iterator<Item = f64>, limit: f64, n: usize) -> f64 {
    let mut spent = 0.0;
    let mut whole = 0usize;
    for cap in caps {
        if spent + cap > limit {
            return whole as f64 + (limit - spent) / cap;
        }
        spent += cap;
        whole += 1;
    }
    n as f64
}

/// `τ = 1 − (b₁ + b₂)/N`, with `b₁` the bandwidth user 1 covers from the
/// front of the order and `b₂` what user 2 covers from the back.
/// `τ ≤ 0` exactly when the system is bandwidth-dominant.
pub fn tau_ordered(p1: &[f64], p2: &[f64], limits: [f64; 2]) -> f64 {
    let n = p1.len();
    let b1 = coverage(p1.iter().copied(), limits[0], n);
    let b2 = coverage(p2.iter().rev().copied(), limits[1], n);
    1.0 - (b1 + b2) / n as f64
}

fn require_tpc(inst: &GameInstance) -> Result<[f64; 2]> {
    if inst.users() != 2 {
        return Err(NbError::Domain(format!(
            "power-limited games are two-user only, got {} users",
            inst.users()
        )));
    }
    match inst.tpc() {
        Some(l) => Ok([l[0], l[1]]),
        None => Err(NbError::Domain("instance has no total-power limits".into())),
    }
}

fn ordered_caps(inst: &GameInstance, order: &[usize]) -> [Vec<f64>; 2] {
    [0, 1].map(|i| order.iter().map(|&k| inst.mask().cap(i, k)).collect())
}

pub fn classify(inst: &GameInstance) -> Result<Classification> {
    let limits = require_tpc(inst)?;
    let order = order_bins(inst)?;
    let [p1, p2] = ordered_caps(inst, &order);
    let mut c = classify_ordered(&p1, &p2, limits);
    if let Some(w) = &mut c.witness {
        w.bin = order[w.position];
    }
    Ok(c)
}

/// The greedy comparative-advantage allocation at full mask power: user 1
/// takes bins from the front of the order until its power limit runs out,
/// user 2 from the back. Under power limits this is generally not Pareto
/// optimal.
pub fn comparative_advantage_allocation(inst: &GameInstance) -> Result<Allocation> {
    let limits = require_tpc(inst)?;
    let order = order_bins(inst)?;
    let n = inst.bins();
    let mut alloc = Allocation::zeros(2, n);
    let mut left = limits[0];
    for &k in &order {
        let cap = inst.mask().cap(0, k);
        let a = (left / cap).clamp(0.0, 1.0);
        if a <= 0.0 {
            break;
        }
        alloc.alpha[0][k] = a;
        alloc.power[0][k] = cap;
        left -= a * cap;
    }
    let mut left = limits[1];
    for &k in order.iter().rev() {
        let cap = inst.mask().cap(1, k);
        let a = (left / cap).clamp(0.0, 1.0).min(1.0 - alloc.alpha[0][k]);
        if a <= 0.0 {
            break;
        }
        alloc.alpha[1][k] = a;
        alloc.power[1][k] = cap;
        left -= a * cap;
    }
    Ok(alloc)
}

fn require_origin(inst: &GameInstance) -> Result<()> {
    if inst.disagreement() != Disagreement::Origin {
        return Err(NbError::Domain(
            "power-limited games bargain from the origin".into(),
        ));
    }
    Ok(())
}

/// Bargains on the part of the mask-only TDM/FDM boundary that the power
/// limits leave reachable.
pub fn solve_bandwidth_dominant(inst: &GameInstance) -> Result<SolveReport> {
    let limits = require_tpc(inst)?;
    require_origin(inst)?;
    let classification = classify(inst)?;
    let table = SplitTable::new(inst)?;
    let [p1, p2] = ordered_caps(inst, &table.order);
    let d = UtilityPoint::origin(2);

    let mut before1 = 0.0;
    let mut from2: f64 = p2.iter().sum();
    let mut any_feasible = false;
    let mut best: Option<(usize, f64, f64)> = None;
    for q in 0..table.bins() {
        let (lo, hi) = share_bounds(&p1, &p2, limits, q, before1, from2);
        before1 += p1[q];
        from2 -= p2[q];
        if !(hi >= lo && hi >= 0.0 && lo <= 1.0) {
            continue;
        }
        any_feasible = true;
        let at = |beta: f64| UtilityPoint::new(table.shared_rates(q, beta).to_vec(), "");
        let Ok((lambda, point)) = nb_on_segment(&at(hi), &at(lo), &d) else {
            continue;
        };
        let Ok(value) = log_nf_rates(&point.rates, &d.rates) else {
            continue;
        };
        let beta = if lambda == 0.0 { lo } else { lo + lambda * (hi - lo) };
        if best.map_or(true, |(_, _, v)| value > v) {
            best = Some((q, beta, value));
        }
    }
    if !any_feasible {
        return Err(NbError::EmptyFeasibleBoundary);
    }
    let Some((q, beta, _)) = best else {
        return Err(NbError::DegenerateRegion(
            "every reachable boundary point leaves a user at zero rate".into(),
        ));
    };

    let allocation = table.allocation(inst, q, beta);
    allocation.validate(inst, tol::FEASIBILITY)?;
    let rates = allocation.rates(inst);
    let log_nf = log_nf_rates(&rates, &d.rates)?;
    let k = table.order[q];
    let shared = (beta > 0.0 && beta < 1.0).then_some(SharedBin {
        bin: k,
        position: q,
        beta,
    });
    Ok(SolveReport {
        method: Method::BandwidthDominant,
        allocation,
        rates,
        disagreement: d.rates,
        log_nf,
        diagnostics: Diagnostics {
            iterations: table.bins(),
            shared_bin: shared,
            classification: Some(classification),
            ..Default::default()
        },
    })
}

/// Water-filling of one user restricted to a bin subset. Bins outside
/// `allowed` get no power; a budget above the subset's caps is clamped.
pub(crate) fn waterfill_on(inst: &GameInstance, user: usize, limit: f64, allowed: &[bool]) -> (Vec<f64>, f64) {
    let n = inst.bins();
    let eps: Vec<f64> = (0..n)
        .map(|k| if allowed[k] { inst.channels().snr_per_watt(user, k) } else { 0.0 })
        .collect();
    let caps: Vec<f64> = (0..n)
        .map(|k| if allowed[k] { inst.mask().cap(user, k) } else { 0.0 })
        .collect();
    let wf = waterfill_clamped(&eps, limit, &caps).expect("inputs validated by the instance");
    (wf.power, wf.rate)
}

fn support(power: &[f64]) -> Vec<bool> {
    power.iter().map(|&p| p > tol::SUPPORT).collect()
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect()
}

/// Unrestricted water-filling supports of both users.
pub(crate) fn own_supports(inst: &GameInstance, limits: [f64; 2]) -> [Vec<bool>; 2] {
    let all = vec![true; inst.bins()];
    [0, 1].map(|i| support(&waterfill_on(inst, i, limits[i], &all).0))
}

/// `first` water-fills on `allowed`; the other user water-fills on every
/// bin `first` does not end up using.
fn fdm_point(inst: &GameInstance, limits: [f64; 2], first: usize, allowed: &[bool]) -> FdmPoint {
    let other = 1 - first;
    let (p_first, r_first) = waterfill_on(inst, first, limits[first], allowed);
    let taken = support(&p_first);
    let rest: Vec<bool> = taken.iter().map(|t| !t).collect();
    let (p_other, r_other) = waterfill_on(inst, other, limits[other], &rest);

    let mut bins = [Vec::new(), Vec::new()];
    let mut power = [Vec::new(), Vec::new()];
    let mut rates = [0.0; 2];
    bins[first] = indices(&taken);
    bins[other] = indices(&support(&p_other));
    rates[first] = r_first;
    rates[other] = r_other;
    power[first] = p_first;
    power[other] = p_other;
    FdmPoint { bins, power, rates }
}

/// The sampled FDM points: for each user in turn, round `j` gives up the
/// `j − 1` contested bins on which that user's channel is weakest.
pub fn sampled_fdm_points(inst: &GameInstance) -> Result<Vec<FdmPoint>> {
    let limits = require_tpc(inst)?;
    let n = inst.bins();
    let [s1, s2] = own_supports(inst, limits);
    let contested: Vec<usize> = (0..n).filter(|&k| s1[k] && s2[k]).collect();
    let rounds = contested.len().max(1);

    let mut points = Vec::with_capacity(2 * rounds);
    for first in 0..2 {
        let mut weakest = contested.clone();
        weakest.sort_by(|&a, &b| {
            inst.channels()
                .snr_per_watt(first, a)
                .total_cmp(&inst.channels().snr_per_watt(first, b))
                .then(a.cmp(&b))
        });
        for j in 1..=rounds {
            let mut allowed = vec![true; n];
            for &k in &weakest[..j - 1] {
                allowed[k] = false;
            }
            points.push(fdm_point(inst, limits, first, &allowed));
        }
    }
    Ok(points)
}

/// Time-sharing bargain over the Pareto boundary of a set of FDM points.
pub(crate) fn bargain_over_points(points: &[FdmPoint], d: &UtilityPoint) -> Result<TimeShare> {
    let tagged: Vec<UtilityPoint> = points
        .iter()
        .enumerate()
        .map(|(i, p)| UtilityPoint::new(p.rates.to_vec(), i.to_string()))
        .collect();
    let frontier = pareto_frontier(&tagged);
    let fb = frontier.bargain(d)?;
    let pick = |v: &UtilityPoint| points[v.tag.parse::<usize>().expect("numeric tag")].clone();
    let first = pick(&frontier.vertices[fb.segment]);
    let second = frontier
        .vertices
        .get(fb.segment + 1)
        .map_or_else(|| first.clone(), pick);
    Ok(TimeShare {
        first,
        second,
        lambda: fb.lambda,
    })
}

pub fn solve_power_dominant(inst: &GameInstance) -> Result<SolveReport> {
    require_tpc(inst)?;
    require_origin(inst)?;
    let classification = classify(inst)?;
    let points = sampled_fdm_points(inst)?;
    let d = UtilityPoint::origin(2);
    let time_share = bargain_over_points(&points, &d)?;

    let rates = time_share.rates().to_vec();
    let log_nf = log_nf_rates(&rates, &d.rates)?;
    let allocation = time_share.allocation(inst.bins());
    allocation.validate(inst, tol::FEASIBILITY)?;
    Ok(SolveReport {
        method: Method::PowerDominant,
        allocation,
        rates,
        disagreement: d.rates,
        log_nf,
        diagnostics: Diagnostics {
            iterations: points.len(),
            classification: Some(classification),
            time_share: Some(time_share),
            ..Default::default()
        },
    })
}

/// Upper bound on how far the sampled scheme can fall behind the full
/// FDM/time-sharing optimum `opt`, in log Nash function:
/// `min(ln(WF²(B₂^opt2)/WF²(B − B̃₂)), ln(WF¹(B₁^opt1)/WF¹(B − B̃₁)))`, where
/// `opt1` is the generating point with the larger rate for user 1 and `B̃ᵢ`
/// is user `i`'s unrestricted water-filling support. A zero denominator
/// makes its term `+∞`.
pub fn theorem7_bound(inst: &GameInstance, opt: &TimeShare) -> Result<f64> {
    let limits = require_tpc(inst)?;
    let n = inst.bins();
    let supports = own_supports(inst, limits);
    let (opt1, opt2) = if opt.first.rates[0] >= opt.second.rates[0] {
        (&opt.first, &opt.second)
    } else {
        (&opt.second, &opt.first)
    };
    let term = |user: usize, held: &[usize]| {
        let mut allowed = vec![false; n];
        for &k in held {
            allowed[k] = true;
        }
        let numerator = waterfill_on(inst, user, limits[user], &allowed).1;
        let outside: Vec<bool> = supports[user].iter().map(|s| !s).collect();
        let denominator = waterfill_on(inst, user, limits[user], &outside).1;
        if denominator <= 0.0 {
            f64::INFINITY
        } else {
            (numerator / denominator).ln()
        }
    };
    Ok(term(1, &opt2.bins[1]).min(term(0, &opt1.bins[0])))
}

/// Classifies and dispatches to the matching solver.
pub fn solve_tpc(inst: &GameInstance) -> Result<SolveReport> {
    match classify(inst)?.kind {
        SystemKind::BandwidthDominant => solve_bandwidth_dominant(inst),
        SystemKind::PowerDominant => solve_power_dominant(inst),
    }
}

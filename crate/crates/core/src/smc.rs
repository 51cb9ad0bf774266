//! Bargaining under spectral masks only.
//!
//! For two users the optimum splits the bins in comparative-advantage
//! order: a prefix goes to user 1, a suffix to user 2, and at most one bin
//! in between is time-shared. Scanning the split position and maximizing
//! the Nash function in closed form on each one-bin segment is exact.

use serde::{Deserialize, Serialize};

use crate::bargaining::{
    log_nf_rates, nb_on_segment, pareto_frontier, Allocation, Frontier, UtilityPoint,
};
use crate::channel::GameInstance;
use crate::error::{NbError, Result};
use crate::report::{Diagnostics, Method, SharedBin, SolveReport};

/// Sorts bins by `r1/r2` descending. Bins only user 1 can use come first,
/// bins nobody can use come last; equal ratios keep index order.
pub fn order_by_rates(r1: &[f64], r2: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r1.len()).collect();
    let dead = |k: usize| r1[k] <= 0.0 && r2[k] <= 0.0;
    idx.sort_by(|&a, &b| {
        dead(a)
            .cmp(&dead(b))
            // r1[a]/r2[a] > r1[b]/r2[b]  <=>  r1[a]·r2[b] > r1[b]·r2[a]
            .then_with(|| (r1[b] * r2[a]).total_cmp(&(r1[a] * r2[b])))
            .then(a.cmp(&b))
    });
    idx
}

fn require_two_users(inst: &GameInstance) -> Result<()> {
    if inst.users() != 2 {
        return Err(NbError::Domain(format!(
            "two-user solver called with {} users",
            inst.users()
        )));
    }
    Ok(())
}

pub fn order_bins(inst: &GameInstance) -> Result<Vec<usize>> {
    require_two_users(inst)?;
    let r = inst.full_power_rates();
    Ok(order_by_rates(&r[0], &r[1]))
}

/// Cumulative rates of split allocations over the ordered bins.
///
/// Split `q` gives ordered positions `< q` to user 1 and `>= q` to user 2.
#[derive(Debug, Clone)]
pub(crate) struct SplitTable {
    pub order: Vec<usize>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    prefix1: Vec<f64>,
    suffix2: Vec<f64>,
}

impl SplitTable {
    pub fn new(inst: &GameInstance) -> Result<Self> {
        require_two_users(inst)?;
        let r = inst.full_power_rates();
        let order = order_by_rates(&r[0], &r[1]);
        let n = order.len();
        let mut prefix1 = vec![0.0; n + 1];
        let mut suffix2 = vec![0.0; n + 1];
        for q in 0..n {
            prefix1[q + 1] = prefix1[q] + r[0][order[q]];
        }
        for q in (0..n).rev() {
            suffix2[q] = suffix2[q + 1] + r[1][order[q]];
        }
        let [r1, r2]: [Vec<f64>; 2] = r.try_into().expect("two users");
        Ok(Self {
            order,
            r1,
            r2,
            prefix1,
            suffix2,
        })
    }

    pub fn bins(&self) -> usize {
        self.order.len()
    }

    /// Rates at split `q`, `0 ..= N`.
    pub fn split_point(&self, q: usize) -> UtilityPoint {
        UtilityPoint::new(
            vec![self.prefix1[q], self.suffix2[q]],
            format!("split {q}"),
        )
    }

    /// Rates when the bin at position `q` is shared with fraction `beta`
    /// for user 1.
    pub fn shared_rates(&self, q: usize, beta: f64) -> [f64; 2] {
        let k = self.order[q];
        [
            self.prefix1[q] + beta * self.r1[k],
            self.suffix2[q + 1] + (1.0 - beta) * self.r2[k],
        ]
    }

    /// Prefix/suffix allocation at full mask power with position `q`
    /// shared. Bins worthless to both users stay unassigned.
    pub fn allocation(&self, inst: &GameInstance, q: usize, beta: f64) -> Allocation {
        let n = self.bins();
        let mut alloc = Allocation::zeros(2, n);
        for (pos, &k) in self.order.iter().enumerate() {
            if self.r1[k] <= 0.0 && self.r2[k] <= 0.0 {
                continue;
            }
            let a1 = match pos.cmp(&q) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => beta,
                std::cmp::Ordering::Greater => 0.0,
            };
            for (user, a) in [(0, a1), (1, 1.0 - a1)] {
                if a > 0.0 {
                    alloc.alpha[user][k] = a;
                    alloc.power[user][k] = inst.mask().cap(user, k);
                }
            }
        }
        alloc
    }
}

/// Exact two-user NB solution under spectral masks.
pub fn solve_two_user_smc(inst: &GameInstance) -> Result<SolveReport> {
    if inst.tpc().is_some() {
        return Err(NbError::Domain(
            "instance has total-power limits; use the TPC solver".into(),
        ));
    }
    let table = SplitTable::new(inst)?;
    let d = inst.disagreement_point();
    let dp = UtilityPoint::new(d.clone(), "disagreement");

    let mut best: Option<(usize, f64, f64)> = None;
    for q in 0..table.bins() {
        let a = table.split_point(q + 1);
        let b = table.split_point(q);
        let Ok((beta, point)) = nb_on_segment(&a, &b, &dp) else {
            continue;
        };
        let Ok(value) = log_nf_rates(&point.rates, &d) else {
            continue;
        };
        if best.map_or(true, |(_, _, v)| value > v) {
            best = Some((q, beta, value));
        }
    }
    let Some((q, beta, _)) = best else {
        let totals = [table.prefix1[table.bins()], table.suffix2[0]];
        let user = if totals[0] - d[0] <= totals[1] - d[1] { 0 } else { 1 };
        return Err(NbError::BelowDisagreement {
            user,
            rate: totals[user],
            disagreement: d[user],
        });
    };

    let allocation = table.allocation(inst, q, beta);
    let rates = allocation.rates(inst);
    let log_nf = log_nf_rates(&rates, &d)?;
    let k = table.order[q];
    let shared = (beta > 0.0 && beta < 1.0 && (table.r1[k] > 0.0 || table.r2[k] > 0.0))
        .then_some(SharedBin {
            bin: k,
            position: q,
            beta,
        });
    Ok(SolveReport {
        method: Method::TwoUserSmc,
        allocation,
        rates,
        disagreement: d,
        log_nf,
        diagnostics: Diagnostics {
            iterations: table.bins(),
            shared_bin: shared,
            ..Default::default()
        },
    })
}

/// Pareto boundary of the two-user TDM/FDM rate region.
pub fn tdmfdm_frontier(inst: &GameInstance) -> Result<Frontier> {
    let table = SplitTable::new(inst)?;
    let points: Vec<UtilityPoint> = (0..=table.bins()).map(|q| table.split_point(q)).collect();
    Ok(pareto_frontier(&points))
}

/// Per-bin full-power rates and the disagreement point of an SMC game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemView {
    pub users: usize,
    pub bins: usize,
    pub rates: Vec<Vec<f64>>,
    pub disagreement: Vec<f64>,
}

impl ProblemView {
    /// `R_i = Σ_k α_i(k)·r_i(k)`.
    pub fn user_rates(&self, alpha: &[Vec<f64>]) -> Vec<f64> {
        self.rates
            .iter()
            .zip(alpha)
            .map(|(r, a)| r.iter().zip(a).map(|(r, a)| r * a).sum())
            .collect()
    }

    pub fn log_nf(&self, alpha: &[Vec<f64>]) -> Result<f64> {
        log_nf_rates(&self.user_rates(alpha), &self.disagreement)
    }
}

pub fn mbody_problem(inst: &GameInstance) -> Result<ProblemView> {
    if inst.tpc().is_some() {
        return Err(NbError::Domain(
            "the time-fraction problem assumes spectral masks only".into(),
        ));
    }
    Ok(ProblemView {
        users: inst.users(),
        bins: inst.bins(),
        rates: inst.full_power_rates(),
        disagreement: inst.disagreement_point(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Disagreement;

    fn from_rates(r1: &[f64], r2: &[f64], d: Disagreement) -> GameInstance {
        let n = r1.len();
        GameInstance::from_exclusive_rates(
            &[r1.to_vec(), r2.to_vec()],
            vec![vec![1.0; n]; 2],
            None,
            d,
        )
        .unwrap()
    }

    #[test]
    fn order_worked_example() {
        let order = order_by_rates(&[0.5, 2.0, 1.0, 0.3], &[0.1, 1.0, 3.0, 1.0]);
        assert_eq!(order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn order_ties_and_swaps() {
        assert_eq!(order_by_rates(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), vec![0, 1, 2]);
        assert_eq!(order_by_rates(&[1.0, 3.0], &[1.0, 1.0]), vec![1, 0]);
        // r2 = 0 first, both zero last
        assert_eq!(
            order_by_rates(&[0.0, 1.0, 2.0, 0.0], &[0.0, 1.0, 0.0, 1.0]),
            vec![2, 1, 3, 0]
        );
    }

    #[test]
    fn two_bins_split_cleanly() {
        let g = from_rates(&[2.0, 1.0], &[1.0, 2.0], Disagreement::Origin);
        let rep = solve_two_user_smc(&g).unwrap();
        assert!((rep.rates[0] - 2.0).abs() < 1e-12 && (rep.rates[1] - 2.0).abs() < 1e-12);
        assert!(rep.allocation.fractional_bins().is_empty());
        assert_eq!(rep.allocation.alpha, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        // β grid oracle, step 1e-4
        let mut best = f64::NEG_INFINITY;
        for q in 0..2 {
            for s in 0..=10_000 {
                let beta = s as f64 * 1e-4;
                let (r1, r2) = if q == 0 {
                    (2.0 * beta, 2.0 + (1.0 - beta))
                } else {
                    (2.0 + beta, 2.0 * (1.0 - beta))
                };
                if r1 > 0.0 && r2 > 0.0 {
                    best = best.max(r1.ln() + r2.ln());
                }
            }
        }
        assert!(rep.log_nf >= best - 1e-12);
    }

    #[test]
    fn single_symmetric_bin_is_halved() {
        let g = from_rates(&[3.0], &[3.0], Disagreement::Origin);
        let rep = solve_two_user_smc(&g).unwrap();
        let s = rep.diagnostics.shared_bin.unwrap();
        assert_eq!(s.beta, 0.5);
        assert!((rep.rates[0] - 1.5).abs() < 1e-12 && (rep.rates[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn no_gain_over_disagreement() {
        // strong NE: without interference NE takes everything
        let g = from_rates(&[2.0, 1.0], &[1.0, 2.0], Disagreement::NashEquilibrium);
        assert!(matches!(
            solve_two_user_smc(&g),
            Err(NbError::BelowDisagreement { .. })
        ));
    }

    #[test]
    fn frontier_of_two_bins() {
        let g = from_rates(&[2.0, 1.0], &[1.0, 2.0], Disagreement::Origin);
        let f = tdmfdm_frontier(&g).unwrap();
        let v: Vec<_> = f.vertices.iter().map(|p| p.rates.clone()).collect();
        let expect = [[3.0, 0.0], [2.0, 2.0], [0.0, 3.0]];
        assert_eq!(v.len(), 3);
        for (a, b) in v.iter().zip(expect) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn frontier_single_bin_is_a_segment() {
        let g = from_rates(&[1.5], &[2.5], Disagreement::Origin);
        let f = tdmfdm_frontier(&g).unwrap();
        assert_eq!(f.vertices.len(), 2);
        assert!((f.vertices[0].rates[0] - 1.5).abs() < 1e-12);
        assert!((f.vertices[1].rates[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_bins_stay_unassigned() {
        let g = from_rates(&[2.0, 0.0, 1.0], &[1.0, 0.0, 2.0], Disagreement::Origin);
        let rep = solve_two_user_smc(&g).unwrap();
        assert_eq!(rep.allocation.alpha[0][1], 0.0);
        assert_eq!(rep.allocation.alpha[1][1], 0.0);
    }

    #[test]
    fn mbody_single_user_view() {
        let g = GameInstance::from_exclusive_rates(
            &[vec![1.0, 2.0]],
            vec![vec![1.0; 2]],
            None,
            Disagreement::Origin,
        )
        .unwrap();
        let view = mbody_problem(&g).unwrap();
        assert_eq!((view.users, view.bins), (1, 2));
        let full = view.log_nf(&[vec![1.0, 1.0]]).unwrap();
        let half = view.log_nf(&[vec![0.5, 1.0]]).unwrap();
        assert!(full > half);
    }
}

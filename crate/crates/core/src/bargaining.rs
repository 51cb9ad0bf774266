//! Nash-function geometry: utility points, Pareto frontiers of convex
//! hulls, the closed-form maximizer along a time-sharing segment, and
//! turning time fractions into an explicit per-bin schedule.

use serde::{Deserialize, Serialize};

use crate::channel::GameInstance;
use crate::error::{NbError, Result};
use crate::tol;

/// A point in rate space with a label saying where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub rates: Vec<f64>,
    pub tag: String,
}

impl UtilityPoint {
    pub fn new(rates: Vec<f64>, tag: impl Into<String>) -> Self {
        Self {
            rates,
            tag: tag.into(),
        }
    }

    pub fn pair(r1: f64, r2: f64) -> Self {
        Self::new(vec![r1, r2], "")
    }

    pub fn origin(users: usize) -> Self {
        Self::new(vec![0.0; users], "origin")
    }

    /// Weakly better for everyone and strictly better for someone.
    pub fn dominates(&self, other: &Self) -> bool {
        self.rates.iter().zip(&other.rates).all(|(a, b)| a >= b)
            && self.rates.iter().zip(&other.rates).any(|(a, b)| a > b)
    }
}

/// `Σ_i ln(rates[i] − disagreement[i])`.
pub fn log_nf(point: &UtilityPoint, disagreement: &UtilityPoint) -> Result<f64> {
    log_nf_rates(&point.rates, &disagreement.rates)
}

pub fn log_nf_rates(rates: &[f64], disagreement: &[f64]) -> Result<f64> {
    if rates.len() != disagreement.len() {
        return Err(NbError::Domain("dimension mismatch".into()));
    }
    let mut total = 0.0;
    for (user, (&rate, &d)) in rates.iter().zip(disagreement).enumerate() {
        let gap = rate - d;
        if !(gap > 0.0) {
            return Err(NbError::BelowDisagreement {
                user,
                rate,
                disagreement: d,
            });
        }
        total += gap.ln();
    }
    Ok(total)
}

/// Maximizes `(u₁(λ) − d₁)(u₂(λ) − d₂)` over `u(λ) = λa + (1 − λ)b`,
/// `λ ∈ [0, 1]`, among points that beat `d` in both coordinates.
/// Equal products resolve to the smaller `λ`.
pub fn nb_on_segment(
    a: &UtilityPoint,
    b: &UtilityPoint,
    d: &UtilityPoint,
) -> Result<(f64, UtilityPoint)> {
    if a.rates.len() != 2 || b.rates.len() != 2 || d.rates.len() != 2 {
        return Err(NbError::Domain("segment bargaining is two-user only".into()));
    }
    let c1 = b.rates[0] - d.rates[0];
    let c2 = b.rates[1] - d.rates[1];
    let e1 = a.rates[0] - b.rates[0];
    let e2 = a.rates[1] - b.rates[1];

    let mut candidates = vec![0.0, 1.0];
    if e1 * e2 < 0.0 {
        // concave quadratic; vertex halfway between the two roots
        let vertex = -(e1 * c2 + e2 * c1) / (2.0 * e1 * e2);
        candidates.push(vertex.clamp(0.0, 1.0));
    }
    candidates.sort_by(f64::total_cmp);

    let mut best: Option<(f64, f64)> = None;
    for lambda in candidates {
        let g1 = c1 + lambda * e1;
        let g2 = c2 + lambda * e2;
        if g1 <= tol::STRICT_GAP || g2 <= tol::STRICT_GAP {
            continue;
        }
        let product = g1 * g2;
        if best.map_or(true, |(_, p)| product > p) {
            best = Some((lambda, product));
        }
    }
    let Some((lambda, _)) = best else {
        // report the user with the smaller best-case gain
        let best_gap = |i: usize| a.rates[i].max(b.rates[i]) - d.rates[i];
        let user = if best_gap(0) <= best_gap(1) { 0 } else { 1 };
        return Err(NbError::BelowDisagreement {
            user,
            rate: a.rates[user].max(b.rates[user]),
            disagreement: d.rates[user],
        });
    };
    let point = UtilityPoint::new(
        vec![
            lambda * a.rates[0] + (1.0 - lambda) * b.rates[0],
            lambda * a.rates[1] + (1.0 - lambda) * b.rates[1],
        ],
        format!("{}|{}@{lambda}", a.tag, b.tag),
    );
    Ok((lambda, point))
}

/// Two-user Pareto boundary of the convex hull of a point set. Vertices
/// run with rate 1 strictly decreasing and rate 2 strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub vertices: Vec<UtilityPoint>,
}

impl Frontier {
    pub fn segments(&self) -> impl Iterator<Item = (&UtilityPoint, &UtilityPoint)> {
        self.vertices.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn is_strictly_ordered(&self) -> bool {
        self.vertices
            .windows(2)
            .all(|w| w[0].rates[0] > w[1].rates[0] && w[0].rates[1] < w[1].rates[1])
    }

    /// The chain bulges away from the origin.
    pub fn is_upper_concave(&self) -> bool {
        self.vertices.windows(3).all(|w| {
            let (p, q, r) = (&w[0].rates, &w[1].rates, &w[2].rates);
            // walking towards larger r2 every turn is counter-clockwise
            let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
            cross >= -1e-12 * (1.0 + p[0].abs() + p[1].abs())
        })
    }

    /// Best NB point over all vertices and segments.
    pub fn bargain(&self, d: &UtilityPoint) -> Result<FrontierBargain> {
        let mut best: Option<(FrontierBargain, f64)> = None;
        let mut consider = |segment: usize, lambda: f64, point: UtilityPoint| {
            if let Ok(value) = log_nf(&point, d) {
                if best.as_ref().map_or(true, |(_, v)| value > *v) {
                    best = Some((
                        FrontierBargain {
                            segment,
                            lambda,
                            point,
                        },
                        value,
                    ));
                }
            }
        };
        if self.vertices.len() == 1 {
            consider(0, 1.0, self.vertices[0].clone());
        }
        for (s, (a, b)) in self.segments().enumerate() {
            if let Ok((lambda, point)) = nb_on_segment(a, b, d) {
                consider(s, lambda, point);
            }
        }
        best.map(|(fb, _)| fb).ok_or_else(|| {
            NbError::DegenerateRegion("no frontier point beats the disagreement point".into())
        })
    }
}

/// NB point on a frontier: `point = λ·vertices[segment] + (1 − λ)·vertices[segment + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierBargain {
    pub segment: usize,
    pub lambda: f64,
    pub point: UtilityPoint,
}

pub fn pareto_frontier(points: &[UtilityPoint]) -> Frontier {
    let mut pts: Vec<&UtilityPoint> = points.iter().collect();
    pts.sort_by(|p, q| {
        p.rates[0]
            .total_cmp(&q.rates[0])
            .then(p.rates[1].total_cmp(&q.rates[1]))
    });
    pts.dedup_by(|p, q| p.rates[..2] == q.rates[..2]);

    // upper hull, left to right; collinear points are dropped
    let mut hull: Vec<&UtilityPoint> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (&hull[hull.len() - 2].rates, &hull[hull.len() - 1].rates);
            let cross = (a[0] - o[0]) * (p.rates[1] - o[1]) - (a[1] - o[1]) * (p.rates[0] - o[0]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    // keep from the rightmost highest vertex onwards
    let top = hull
        .iter()
        .map(|p| p.rates[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let start = hull.iter().rposition(|p| p.rates[1] == top).unwrap_or(0);
    let vertices = hull[start..].iter().rev().map(|p| (*p).clone()).collect();
    Frontier { vertices }
}

/// Time fractions `alpha[i][k]` and powers `power[i][k]` while user `i`
/// holds bin `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub alpha: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn zeros(users: usize, bins: usize) -> Self {
        Self {
            alpha: vec![vec![0.0; bins]; users],
            power: vec![vec![0.0; bins]; users],
        }
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }

    pub fn bins(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn occupancy(&self, k: usize) -> f64 {
        self.alpha.iter().map(|row| row[k]).sum()
    }

    /// `Σ_k α_i(k)·ln(1 + snr_i(k)·p_i(k))`.
    pub fn rates(&self, inst: &GameInstance) -> Vec<f64> {
        (0..self.users())
            .map(|i| {
                (0..self.bins())
                    .filter(|&k| self.alpha[i][k] > 0.0)
                    .map(|k| {
                        self.alpha[i][k]
                            * (inst.channels().snr_per_watt(i, k) * self.power[i][k]).ln_1p()
                    })
                    .sum()
            })
            .collect()
    }

    pub fn energy(&self, user: usize) -> f64 {
        self.alpha[user]
            .iter()
            .zip(&self.power[user])
            .map(|(a, p)| a * p)
            .sum()
    }

    /// Bins with `0 < α < 1` for some user.
    pub fn fractional_bins(&self) -> Vec<usize> {
        (0..self.bins())
            .filter(|&k| {
                self.alpha
                    .iter()
                    .any(|row| row[k] > tol::FRACTION_EPS && row[k] < 1.0 - tol::FRACTION_EPS)
            })
            .collect()
    }

    /// Checks shapes, `α ∈ [0,1]`, per-bin occupancy, the mask and, when
    /// present, the total-power limits, all up to `tol`.
    pub fn validate(&self, inst: &GameInstance, tol: f64) -> Result<()> {
        let (m, n) = (inst.users(), inst.bins());
        let bad = |msg: String| Err(NbError::Infeasible(msg));
        if self.alpha.len() != m
            || self.power.len() != m
            || self.alpha.iter().chain(&self.power).any(|r| r.len() != n)
        {
            return bad(format!("allocation must be {m}x{n}"));
        }
        for i in 0..m {
            for k in 0..n {
                let (a, p) = (self.alpha[i][k], self.power[i][k]);
                if !(a >= -tol && a <= 1.0 + tol) {
                    return bad(format!("alpha[{i}][{k}] = {a}"));
                }
                if !(p >= -tol && p <= inst.mask().cap(i, k) + tol) {
                    return bad(format!("power[{i}][{k}] = {p} exceeds mask"));
                }
            }
        }
        for k in 0..n {
            let occ = self.occupancy(k);
            if occ > 1.0 + tol {
                return bad(format!("bin {k} occupied {occ}"));
            }
        }
        if let Some(limits) = inst.tpc() {
            for (i, &limit) in limits.iter().enumerate() {
                let e = self.energy(i);
                if e > limit + tol {
                    return bad(format!("user {i} spends {e} > {limit}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub user: usize,
    pub begin: f64,
    pub end: f64,
}

/// Who holds each bin when, within a slot `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub duration: f64,
    pub bins: Vec<Vec<Interval>>,
}

impl Schedule {
    /// Total time user `i` holds bin `k`.
    pub fn held(&self, user: usize, k: usize) -> f64 {
        self.bins[k]
            .iter()
            .filter(|iv| iv.user == user)
            .map(|iv| iv.end - iv.begin)
            .sum()
    }

    pub fn idle(&self, k: usize) -> f64 {
        self.duration - self.bins[k].iter().map(|iv| iv.end - iv.begin).sum::<f64>()
    }
}

/// Packs users onto each bin left to right in index order; any unused
/// share stays idle at the end of the slot.
pub fn realize_schedule(alloc: &Allocation, duration: f64) -> Schedule {
    let bins = (0..alloc.bins())
        .map(|k| {
            let mut t = 0.0;
            let mut out = Vec::new();
            for (user, row) in alloc.alpha.iter().enumerate() {
                let a = row[k].clamp(0.0, 1.0);
                if a <= 0.0 || t >= duration {
                    continue;
                }
                let end = (t + a * duration).min(duration);
                out.push(Interval {
                    user,
                    begin: t,
                    end,
                });
                t = end;
            }
            out
        })
        .collect();
    Schedule { duration, bins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(r1: f64, r2: f64) -> UtilityPoint {
        UtilityPoint::pair(r1, r2)
    }

    fn rates(f: &Frontier) -> Vec<(f64, f64)> {
        f.vertices.iter().map(|v| (v.rates[0], v.rates[1])).collect()
    }

    #[test]
    fn log_nf_symmetric() {
        let v = log_nf(&p(2.0, 2.0), &p(0.0, 0.0)).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((v - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn log_nf_four_user_rates() {
        let nb = UtilityPoint::new(vec![2.2707, 2.4906, 2.3992, 2.4175], "nb");
        let ne = UtilityPoint::new(vec![1.1296, 1.4014, 1.2952, 1.6957], "ne");
        let v = log_nf(&nb, &ne).unwrap();
        let expected = 1.1411f64.ln() + 1.0892f64.ln() + 1.1040f64.ln() + 0.7218f64.ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - (-0.0096)).abs() < 1e-4, "{v}");
    }

    #[test]
    fn log_nf_degenerate() {
        assert!(matches!(
            log_nf(&p(1.0, 1.0), &p(1.0, 1.0)),
            Err(NbError::BelowDisagreement { .. })
        ));
    }

    #[test]
    fn segment_symmetric() {
        let (l, u) = nb_on_segment(&p(4.0, 0.0), &p(0.0, 4.0), &p(0.0, 0.0)).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(u.rates, vec![2.0, 2.0]);
    }

    #[test]
    fn segment_degenerate_ties_to_zero() {
        let (l, u) = nb_on_segment(&p(2.0, 2.0), &p(2.0, 2.0), &p(0.0, 0.0)).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(u.rates, vec![2.0, 2.0]);
    }

    #[test]
    fn segment_shifted_disagreement_matches_grid() {
        let (a, b, d) = (p(3.0, 1.0), p(1.0, 3.0), p(1.0, 1.0));
        let (l, u) = nb_on_segment(&a, &b, &d).unwrap();
        // grid oracle, step 1e-6
        let mut best = (0.0, f64::NEG_INFINITY);
        for s in 0..=1_000_000 {
            let x = s as f64 * 1e-6;
            let v = (1.0 + 2.0 * x - 1.0) * (3.0 - 2.0 * x - 1.0);
            if v > best.1 {
                best = (x, v);
            }
        }
        assert!((l - best.0).abs() < 1e-6);
        assert_eq!(l, 0.5);
        assert_eq!(u.rates, vec![2.0, 2.0]);
    }

    #[test]
    fn segment_without_feasible_point() {
        let r = nb_on_segment(&p(1.0, 0.5), &p(0.5, 1.0), &p(1.0, 1.0));
        assert!(matches!(r, Err(NbError::BelowDisagreement { .. })));
    }

    #[test]
    fn segment_monotone_case_picks_endpoint() {
        let (l, u) = nb_on_segment(&p(3.0, 3.0), &p(1.0, 1.0), &p(0.0, 0.0)).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(u.rates, vec![3.0, 3.0]);
    }

    #[test]
    fn frontier_collinear_and_interior() {
        let pts = [p(1.0, 3.0), p(2.0, 2.0), p(3.0, 1.0), p(1.0, 1.0)];
        assert_eq!(rates(&pareto_frontier(&pts)), vec![(3.0, 1.0), (1.0, 3.0)]);
    }

    #[test]
    fn frontier_single_point() {
        let f = pareto_frontier(&[p(1.0, 2.0)]);
        assert_eq!(rates(&f), vec![(1.0, 2.0)]);
    }

    #[test]
    fn frontier_bulging_point() {
        let pts = [p(1.0, 0.0), p(0.0, 1.0), p(0.9, 0.9)];
        assert_eq!(
            rates(&pareto_frontier(&pts)),
            vec![(1.0, 0.0), (0.9, 0.9), (0.0, 1.0)]
        );
    }

    #[test]
    fn frontier_drops_weakly_dominated_edges() {
        let pts = [p(0.0, 1.0), p(0.5, 1.0), p(1.0, 0.0), p(1.0, 0.2)];
        assert_eq!(rates(&pareto_frontier(&pts)), vec![(1.0, 0.2), (0.5, 1.0)]);
    }

    #[test]
    fn schedule_examples() {
        let alloc = Allocation {
            alpha: vec![vec![0.3, 1.0, 0.5], vec![0.7, 0.0, 0.25]],
            power: vec![vec![1.0; 3]; 2],
        };
        let s = realize_schedule(&alloc, 1.0);
        assert_eq!(
            s.bins[0],
            vec![
                Interval { user: 0, begin: 0.0, end: 0.3 },
                Interval { user: 1, begin: 0.3, end: 1.0 }
            ]
        );
        assert_eq!(s.bins[1], vec![Interval { user: 0, begin: 0.0, end: 1.0 }]);
        let s2 = realize_schedule(&alloc, 2.0);
        assert_eq!(
            s2.bins[2],
            vec![
                Interval { user: 0, begin: 0.0, end: 1.0 },
                Interval { user: 1, begin: 1.0, end: 1.5 }
            ]
        );
        assert!((s2.idle(2) - 0.5).abs() < 1e-15);
    }

    fn arb_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..25)
    }

    proptest! {
        #[test]
        fn frontier_is_ordered_and_concave(pts in arb_points()) {
            let pts: Vec<_> = pts.into_iter().map(|(a, b)| p(a, b)).collect();
            let f = pareto_frontier(&pts);
            prop_assert!(!f.vertices.is_empty());
            prop_assert!(f.is_strictly_ordered());
            prop_assert!(f.is_upper_concave());
            // no input point lies strictly above the chain
            for q in &pts {
                prop_assert!(!f.vertices.iter().any(|v| q.dominates(v)));
            }
        }

        #[test]
        fn frontier_ignores_order_and_dominated_points(
            pts in arb_points(), shrink in 0.0f64..1.0, pick in 0usize..25
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(a, b)| p(a, b)).collect();
            let base = rates(&pareto_frontier(&pts));
            let mut rev: Vec<_> = pts.iter().rev().cloned().collect();
            prop_assert_eq!(&rates(&pareto_frontier(&rev)), &base);
            let q = &pts[pick % pts.len()];
            rev.push(p(q.rates[0] * shrink, q.rates[1] * shrink));
            prop_assert_eq!(&rates(&pareto_frontier(&rev)), &base);
        }

        #[test]
        fn segment_beats_endpoints(
            a in (0.0f64..5.0, 0.0f64..5.0), b in (0.0f64..5.0, 0.0f64..5.0),
            d in (0.0f64..1.0, 0.0f64..1.0)
        ) {
            let (a, b, d) = (p(a.0, a.1), p(b.0, b.1), p(d.0, d.1));
            if let Ok((l, u)) = nb_on_segment(&a, &b, &d) {
                prop_assert!((0.0..=1.0).contains(&l));
                let v = log_nf(&u, &d).unwrap();
                for end in [&a, &b] {
                    if let Ok(e) = log_nf(end, &d) {
                        prop_assert!(v >= e - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn schedule_recovers_alpha(
            cols in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..6),
            duration in 0.1f64..10.0
        ) {
            // normalise each bin so occupancy <= 1
            let bins = cols.len();
            let mut alpha = vec![vec![0.0; bins]; 3];
            for (k, col) in cols.iter().enumerate() {
                let s: f64 = col.iter().sum::<f64>().max(1.0);
                for i in 0..3 {
                    alpha[i][k] = col[i] / s;
                }
            }
            let alloc = Allocation { power: alpha.clone(), alpha: alpha.clone() };
            let sched = realize_schedule(&alloc, duration);
            for k in 0..bins {
                let mut t = 0.0;
                for iv in &sched.bins[k] {
                    prop_assert!(iv.begin >= t - 1e-15 && iv.end >= iv.begin);
                    t = iv.end;
                }
                prop_assert!(t <= duration * (1.0 + 1e-15));
                for i in 0..3 {
                    prop_assert!((sched.held(i, k) - alpha[i][k] * duration).abs() <= 1e-12 * duration.max(1.0));
                }
            }
        }
    }
}

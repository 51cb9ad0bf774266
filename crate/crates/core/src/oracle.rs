//! Brute-force references for testing the solvers.
//!
//! Nothing here calls into the production solvers; the only shared code is
//! the channel model (rates, NE point) and the Nash-function evaluation.
//! Every search is exhaustive or plainly iterative and is capped in size.

use crate::bargaining::{log_nf_rates, Allocation};
use crate::channel::GameInstance;
use crate::error::{NbError, Result};
use crate::report::{Diagnostics, FdmPoint, Method, SolveReport, TimeShare};

pub const GRID_MAX_BINS: usize = 16;
pub const FDM_TS_MAX_BINS: usize = 12;

fn two_user(inst: &GameInstance, what: &str) -> Result<()> {
    if inst.users() != 2 {
        return Err(NbError::Domain(format!("{what} is two-user only")));
    }
    Ok(())
}

/// Exhaustive search over split position and a `β` grid of the given step.
pub fn grid_nb_two_user_smc(inst: &GameInstance, beta_step: f64) -> Result<SolveReport> {
    two_user(inst, "grid oracle")?;
    if inst.tpc().is_some() {
        return Err(NbError::Domain("grid oracle handles mask-only games".into()));
    }
    let n = inst.bins();
    if n > GRID_MAX_BINS {
        return Err(NbError::Refused(format!("{n} bins > {GRID_MAX_BINS}")));
    }
    if !(beta_step > 0.0 && beta_step <= 1.0) {
        return Err(NbError::Domain(format!("beta step {beta_step} not in (0, 1]")));
    }
    let rate = |i: usize, k: usize| {
        inst.exclusive_rate(i, k, inst.mask().cap(i, k))
            .expect("cap is in range")
    };
    let r1: Vec<f64> = (0..n).map(|k| rate(0, k)).collect();
    let r2: Vec<f64> = (0..n).map(|k| rate(1, k)).collect();
    // descending r1/r2 with r2 = 0 as +inf; bins worthless to both go last
    let key = |k: usize| {
        if r1[k] == 0.0 && r2[k] == 0.0 {
            f64::NEG_INFINITY
        } else if r2[k] == 0.0 {
            f64::INFINITY
        } else {
            r1[k] / r2[k]
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap().then(a.cmp(&b)));

    let steps = (1.0 / beta_step).round() as usize;
    let d = inst.disagreement_point();
    let mut best: Option<(f64, usize, f64)> = None;
    for q in 0..n {
        let before: f64 = order[..q].iter().map(|&k| r1[k]).sum();
        let after: f64 = order[q + 1..].iter().map(|&k| r2[k]).sum();
        let k = order[q];
        for s in 0..=steps {
            let beta = (s as f64 * beta_step).min(1.0);
            let rates = [before + beta * r1[k], after + (1.0 - beta) * r2[k]];
            if let Ok(v) = log_nf_rates(&rates, &d) {
                if best.map_or(true, |(b, _, _)| v > b) {
                    best = Some((v, q, beta));
                }
            }
        }
    }
    let Some((_, q, beta)) = best else {
        return Err(NbError::BelowDisagreement {
            user: 0,
            rate: r1.iter().sum(),
            disagreement: d[0],
        });
    };
    let mut alloc = Allocation::zeros(2, n);
    for (pos, &k) in order.iter().enumerate() {
        let a1 = if pos < q {
            1.0
        } else if pos == q {
            beta
        } else {
            0.0
        };
        alloc.alpha[0][k] = a1;
        alloc.alpha[1][k] = 1.0 - a1;
        alloc.power[0][k] = if a1 > 0.0 { inst.mask().cap(0, k) } else { 0.0 };
        alloc.power[1][k] = if a1 < 1.0 { inst.mask().cap(1, k) } else { 0.0 };
    }
    let rates = alloc.rates(inst);
    let log_nf = log_nf_rates(&rates, &d)?;
    Ok(SolveReport {
        method: Method::GridOracle,
        allocation: alloc,
        rates,
        disagreement: d,
        log_nf,
        diagnostics: Diagnostics {
            iterations: n * (steps + 1),
            ..Default::default()
        },
    })
}

/// Water level by walking the sorted breakpoints of the piecewise-linear
/// total `Σ clip(μ − 1/ε, 0, cap)`.
fn breakpoint_waterfill(eps: &[f64], caps: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let n = eps.len();
    let live: Vec<usize> = (0..n).filter(|&j| eps[j] > 0.0 && caps[j] > 0.0).collect();
    let room: f64 = live.iter().map(|&j| caps[j]).sum();
    let budget = budget.min(room);
    let mut power = vec![0.0; n];
    if live.is_empty() || budget <= 0.0 {
        return (power, 0.0);
    }
    let mut marks: Vec<f64> = live
        .iter()
        .flat_map(|&j| [1.0 / eps[j], 1.0 / eps[j] + caps[j]])
        .collect();
    marks.sort_by(f64::total_cmp);
    let total = |mu: f64| -> f64 {
        live.iter()
            .map(|&j| (mu - 1.0 / eps[j]).max(0.0).min(caps[j]))
            .sum()
    };
    let mut level = *marks.last().unwrap();
    let mut prev = marks[0];
    for &m in &marks[1..] {
        let (lo, hi) = (total(prev), total(m));
        if hi >= budget {
            // linear between prev and m
            level = if hi > lo {
                prev + (m - prev) * (budget - lo) / (hi - lo)
            } else {
                m
            };
            break;
        }
        prev = m;
    }
    for &j in &live {
        power[j] = (level - 1.0 / eps[j]).max(0.0).min(caps[j]);
    }
    let rate = live.iter().map(|&j| (eps[j] * power[j]).ln_1p()).sum();
    (power, rate)
}

/// Exhaustive FDM/time-sharing reference for power-limited two-user
/// games: every bipartition of the bins, both users water-filling on their
/// part, then the best time share between any two of those points.
pub fn fdm_ts_oracle(inst: &GameInstance) -> Result<SolveReport> {
    two_user(inst, "FDM/TS oracle")?;
    let n = inst.bins();
    if n > FDM_TS_MAX_BINS {
        return Err(NbError::Refused(format!("{n} bins > {FDM_TS_MAX_BINS}")));
    }
    let limits: Vec<f64> = match inst.tpc() {
        Some(l) => l.to_vec(),
        None => return Err(NbError::Domain("FDM/TS oracle needs total-power limits".into())),
    };
    let d = inst.disagreement_point();
    let eps: Vec<Vec<f64>> = (0..2)
        .map(|i| (0..n).map(|k| inst.channels().snr_per_watt(i, k)).collect())
        .collect();

    let mut points: Vec<FdmPoint> = Vec::with_capacity(1 << n);
    for set in 0u32..(1 << n) {
        let mine = |i: usize, k: usize| ((set >> k) & 1 == 0) == (i == 0);
        let mut bins = [Vec::new(), Vec::new()];
        let mut power = [Vec::new(), Vec::new()];
        let mut rates = [0.0; 2];
        for i in 0..2 {
            let caps: Vec<f64> = (0..n)
                .map(|k| if mine(i, k) { inst.mask().cap(i, k) } else { 0.0 })
                .collect();
            let (p, r) = breakpoint_waterfill(&eps[i], &caps, limits[i]);
            bins[i] = (0..n).filter(|&k| mine(i, k)).collect();
            power[i] = p;
            rates[i] = r;
        }
        points.push(FdmPoint { bins, power, rates });
    }

    // best product over all segments (a, b), a time share λa + (1 − λ)b
    let gain = |p: &FdmPoint, i: usize| p.rates[i] - d[i];
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for a in 0..points.len() {
        for b in a..points.len() {
            let (a1, a2) = (gain(&points[a], 0), gain(&points[a], 1));
            let (b1, b2) = (gain(&points[b], 0), gain(&points[b], 1));
            // (b1 + λ(a1 − b1))(b2 + λ(a2 − b2))
            let (u, v) = (a1 - b1, a2 - b2);
            let mut lambdas = vec![0.0, 1.0];
            if u * v < 0.0 {
                lambdas.push((-(b1 * v + b2 * u) / (2.0 * u * v)).clamp(0.0, 1.0));
            }
            for lambda in lambdas {
                let g1 = b1 + lambda * u;
                let g2 = b2 + lambda * v;
                if g1 <= 0.0 || g2 <= 0.0 {
                    continue;
                }
                let value = g1.ln() + g2.ln();
                if best.map_or(true, |(bv, ..)| value > bv) {
                    best = Some((value, a, b, lambda));
                }
            }
        }
    }
    let Some((_, a, b, lambda)) = best else {
        return Err(NbError::DegenerateRegion(
            "no FDM time share beats the disagreement point".into(),
        ));
    };
    // first = the point with the larger rate for user 1
    let (first, second, lambda) = if points[a].rates[0] >= points[b].rates[0] {
        (points[a].clone(), points[b].clone(), lambda)
    } else {
        (points[b].clone(), points[a].clone(), 1.0 - lambda)
    };
    let rates = vec![
        lambda * first.rates[0] + (1.0 - lambda) * second.rates[0],
        lambda * first.rates[1] + (1.0 - lambda) * second.rates[1],
    ];
    let log_nf = log_nf_rates(&rates, &d)?;
    let time_share = TimeShare {
        first,
        second,
        lambda,
    };
    Ok(SolveReport {
        method: Method::FdmTsOracle,
        allocation: time_share.allocation(n),
        rates,
        disagreement: d,
        log_nf,
        diagnostics: Diagnostics {
            iterations: points.len(),
            time_share: Some(time_share),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgOptions {
    pub initial_step: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Below this gap the logarithm is continued linearly.
    pub floor: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-2,
            max_iters: 100_000,
            tolerance: 1e-9,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgSolution {
    pub alpha: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
    pub log_nf: f64,
    pub iterations: usize,
}

/// Euclidean projection onto `{x ≥ 0, Σx ≤ 1}`.
fn project_capped_simplex(x: &mut [f64]) {
    let clipped: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if clipped <= 1.0 {
        for v in x.iter_mut() {
            *v = v.max(0.0);
        }
        return;
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Projected gradient ascent with backtracking on
/// `Σ_i φ(Σ_k α_ik r_ik − d_i)`, `φ = ln` continued linearly below
/// `floor`, over `α ≥ 0` with per-bin occupancy at most one.
pub fn projected_gradient_reference(
    rates: &[Vec<f64>],
    disagreement: &[f64],
    opts: &PgOptions,
) -> Result<PgSolution> {
    let m = rates.len();
    let n = rates.first().map_or(0, Vec::len);
    if disagreement.len() != m || rates.iter().any(|r| r.len() != n) {
        return Err(NbError::Domain("rate matrix and disagreement disagree in shape".into()));
    }
    let eps = opts.floor;
    let phi = |g: f64| if g >= eps { g.ln() } else { eps.ln() + (g - eps) / eps };
    let dphi = |g: f64| if g >= eps { 1.0 / g } else { 1.0 / eps };
    let gaps = |a: &[Vec<f64>]| -> Vec<f64> {
        (0..m)
            .map(|i| (0..n).map(|k| a[i][k] * rates[i][k]).sum::<f64>() - disagreement[i])
            .collect()
    };
    let value = |a: &[Vec<f64>]| gaps(a).into_iter().map(phi).sum::<f64>();

    let mut alpha = vec![vec![1.0 / m as f64; n]; m];
    let mut f = value(&alpha);
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut moved = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        let g = gaps(&alpha);
        let grad: Vec<Vec<f64>> = (0..m)
            .map(|i| rates[i].iter().map(|r| dphi(g[i]) * r).collect())
            .collect();
        loop {
            let mut cand = alpha.clone();
            for k in 0..n {
                let mut col: Vec<f64> = (0..m).map(|i| alpha[i][k] + step * grad[i][k]).collect();
                project_capped_simplex(&mut col);
                for i in 0..m {
                    cand[i][k] = col[i];
                }
            }
            let mut ascent = 0.0;
            moved = 0.0;
            for i in 0..m {
                for k in 0..n {
                    let dx = cand[i][k] - alpha[i][k];
                    ascent += grad[i][k] * dx;
                    moved = f64::max(moved, dx.abs());
                }
            }
            let fc = value(&cand);
            if fc >= f + 1e-4 * ascent || step < 1e-16 {
                alpha = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if moved / step <= opts.tolerance || moved <= 1e-15 {
            converged = true;
            break;
        }
        step *= 2.0;
    }
    if gaps(&alpha).iter().any(|&g| g < eps) {
        return Err(NbError::Infeasible(format!(
            "no time-share above the disagreement point found in {iterations} iterations"
        )));
    }
    if !converged {
        return Err(NbError::NoConvergence {
            iterations,
            residual: moved / step,
        });
    }
    let user_rates: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|k| alpha[i][k] * rates[i][k]).sum())
        .collect();
    let log_nf = log_nf_rates(&user_rates, disagreement)?;
    Ok(PgSolution {
        alpha,
        rates: user_rates,
        log_nf,
        iterations,
    })
}

/// [`projected_gradient_reference`] on a mask-only game at full mask
/// power.
pub fn projected_gradient_for(inst: &GameInstance, opts: &PgOptions) -> Result<PgSolution> {
    if inst.tpc().is_some() {
        return Err(NbError::Domain("time-fraction reference is mask-only".into()));
    }
    projected_gradient_reference(&inst.full_power_rates(), &inst.disagreement_point(), opts)
}

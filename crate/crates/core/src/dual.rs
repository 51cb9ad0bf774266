//! Distributed bargaining for any number of users under spectral masks.
//!
//! A coordinator prices each bin with a multiplier `λ_k`. In every round it
//! broadcasts the prices, each user agent independently picks time
//! fractions maximizing `ln(Σ_k α_k r_k − R^NE) − Σ_k λ_k α_k`, and the
//! coordinator moves the prices along the occupancy gradient. Rounds are
//! bulk-synchronous: agents only ever see the current broadcast and the
//! coordinator waits for every response.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bargaining::{log_nf_rates, Allocation};
use crate::channel::GameInstance;
use crate::error::{NbError, Result};
use crate::report::{Diagnostics, DualIterate, Method, SolveReport};
use crate::smc::{mbody_problem, ProblemView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
}

impl Multipliers {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(NbError::Domain(format!("multiplier {bad} must be finite and >= 0")));
        }
        Ok(Self { lambda })
    }

    pub fn zeros(bins: usize) -> Self {
        Self {
            lambda: vec![0.0; bins],
        }
    }

    pub fn uniform(bins: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; bins])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `δ` every round.
    Constant,
    /// `δ/√t` in round `t`.
    Diminishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub delta: f64,
    pub xi: f64,
    pub max_iters: usize,
    /// Starting prices; all zero when absent.
    pub lambda0: Option<Multipliers>,
    pub step: StepRule,
    /// Run the user agents of a round on the rayon pool.
    pub parallel: bool,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            xi: 1e-5,
            max_iters: 100_000,
            lambda0: None,
            step: StepRule::Constant,
            parallel: false,
        }
    }
}

impl DualConfig {
    pub fn validate(&self, bins: usize) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(NbError::Domain(format!("delta = {} must be > 0", self.delta)));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(NbError::Domain(format!("xi = {} must be > 0", self.xi)));
        }
        if self.max_iters == 0 {
            return Err(NbError::Domain("max_iters must be positive".into()));
        }
        if let Some(l0) = &self.lambda0 {
            if l0.lambda.len() != bins {
                return Err(NbError::Domain(format!(
                    "lambda0 has {} entries for {bins} bins",
                    l0.lambda.len()
                )));
            }
            Multipliers::new(l0.lambda.clone())?;
        }
        Ok(())
    }

    fn step(&self, round: usize) -> f64 {
        match self.step {
            StepRule::Constant => self.delta,
            StepRule::Diminishing => self.delta / (round as f64).sqrt(),
        }
    }
}

/// Coordinator to agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub round: usize,
    pub lambda: Vec<f64>,
}

/// Agent to coordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub round: usize,
    pub user: usize,
    pub alpha: Vec<f64>,
    /// The agent's optimal subproblem value `U_i(λ)`.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

/// Maximizes `ln(Σ_k α_k r_k − r_ne) − Σ_k λ_k α_k` over `α ∈ [0,1]^N`.
///
/// With `t = Σ α_k r_k − r_ne`, a bin is used fully when `r_k/λ_k > t`,
/// not at all when `< t`, and fractionally only at equality. Bins are
/// scanned by that ratio (descending, ties by index) until adding the next
/// one whole would push `t` past its ratio.
pub fn solve_subproblem(r: &[f64], r_ne: f64, lambda: &[f64]) -> Result<Subsolution> {
    if r.len() != lambda.len() {
        return Err(NbError::Domain(format!(
            "{} rates for {} multipliers",
            r.len(),
            lambda.len()
        )));
    }
    let total: f64 = r.iter().sum();
    if !(total > r_ne) {
        return Err(NbError::Infeasible(format!(
            "full use of every bin gives {total} <= disagreement rate {r_ne}"
        )));
    }
    let ratio = |k: usize| {
        if lambda[k] > 0.0 {
            r[k] / lambda[k]
        } else {
            f64::INFINITY
        }
    };
    let mut order: Vec<usize> = (0..r.len()).filter(|&k| r[k] > 0.0).collect();
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));

    let mut alpha = vec![0.0; r.len()];
    // t if the first j ordered bins are used whole
    let mut t = -r_ne;
    for &k in &order {
        let rho = ratio(k);
        let next = t + r[k];
        if next > rho {
            if t < rho {
                alpha[k] = (rho - t) / r[k];
                t = rho;
            }
            break;
        }
        alpha[k] = 1.0;
        t = next;
    }
    let objective = t.ln() - alpha.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
    Ok(Subsolution { alpha, objective })
}

/// `λ̂_k = max(0, λ_k − δ(1 − Σ_i α_i(k)))`.
pub fn master_update(lambda: &Multipliers, alphas: &[Vec<f64>], delta: f64) -> Result<Multipliers> {
    let n = lambda.lambda.len();
    if alphas.iter().any(|a| a.len() != n) {
        return Err(NbError::Domain(format!("responses must cover {n} bins")));
    }
    let lambda = (0..n)
        .map(|k| {
            let occupancy: f64 = alphas.iter().map(|a| a[k]).sum();
            (lambda.lambda[k] - delta * (1.0 - occupancy)).max(0.0)
        })
        .collect();
    Ok(Multipliers { lambda })
}

/// Per-bin proportional rescaling so that no bin is over-subscribed.
pub fn rescale_to_feasible(alphas: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = alphas.first().map_or(0, Vec::len);
    let mut out = alphas.to_vec();
    for k in 0..n {
        let occupancy: f64 = alphas.iter().map(|a| a[k]).sum();
        if occupancy > 1.0 {
            for row in out.iter_mut() {
                row[k] /= occupancy;
            }
        }
    }
    out
}

fn agent(view: &ProblemView, user: usize, msg: &Broadcast) -> Result<Response> {
    let sub = solve_subproblem(&view.rates[user], view.disagreement[user], &msg.lambda)?;
    Ok(Response {
        round: msg.round,
        user,
        alpha: sub.alpha,
        objective: sub.objective,
    })
}

fn collect_round(view: &ProblemView, msg: &Broadcast, parallel: bool) -> Result<Vec<Response>> {
    let users = 0..view.users;
    let responses: Result<Vec<Response>> = if parallel {
        users.into_par_iter().map(|i| agent(view, i, msg)).collect()
    } else {
        users.map(|i| agent(view, i, msg)).collect()
    };
    responses
}

/// Runs the coordinator/agent protocol to convergence.
///
/// The reported allocation is the last round's responses after per-bin
/// rescaling; users transmit at full mask power on every bin they hold.
/// Result of running the iteration to its stopping rule or round limit.
#[derive(Debug, Clone)]
pub struct DualRun {
    /// Whether `|λ(t+1) − λ(t)|_∞ ≤ ξ` was reached.
    pub converged: bool,
    /// The final responses rescaled to a feasible allocation. Its `log_nf`
    /// is `-∞` if the rescaled rates fall to the disagreement point.
    pub report: SolveReport,
}

/// Runs the price iteration and fails with `NoConvergence` when the round
/// limit is hit first.
pub fn run_dual(inst: &GameInstance, cfg: &DualConfig) -> Result<SolveReport> {
    let run = iterate_dual(inst, cfg)?;
    if !run.converged {
        return Err(NbError::NoConvergence {
            iterations: run.report.diagnostics.iterations,
            residual: run.report.diagnostics.residual,
        });
    }
    Ok(run.report)
}

/// Like [`run_dual`] but keeps the trace and last iterate of a run that
/// did not converge.
pub fn iterate_dual(inst: &GameInstance, cfg: &DualConfig) -> Result<DualRun> {
    let view = mbody_problem(inst)?;
    cfg.validate(view.bins)?;
    let mut lambda = cfg
        .lambda0
        .clone()
        .unwrap_or_else(|| Multipliers::zeros(view.bins));

    let mut trace = Vec::new();
    let mut last: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut residual = f64::INFINITY;
    let mut rounds = 0;
    for round in 1..=cfg.max_iters {
        rounds = round;
        let msg = Broadcast {
            round,
            lambda: lambda.lambda.clone(),
        };
        let responses = collect_round(&view, &msg, cfg.parallel)?;
        debug_assert!(responses.iter().enumerate().all(|(i, r)| r.user == i && r.round == round));
        let alphas: Vec<Vec<f64>> = responses.iter().map(|r| r.alpha.clone()).collect();

        let dual_value = responses.iter().map(|r| r.objective).sum::<f64>()
            + lambda.lambda.iter().sum::<f64>();
        let rates = view.user_rates(&alphas);
        let raw_log_nf = log_nf_rates(&rates, &view.disagreement)?;
        let feasible_log_nf = view.log_nf(&rescale_to_feasible(&alphas)).ok();

        let next = master_update(&lambda, &alphas, cfg.step(round))?;
        residual = next
            .lambda
            .iter()
            .zip(&lambda.lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(DualIterate {
            round,
            rates,
            log_nf: raw_log_nf,
            feasible_log_nf,
            dual_value,
            residual,
        });
        last = Some((alphas, dual_value));
        lambda = next;
        if residual <= cfg.xi {
            break;
        }
    }
    let (alphas, dual_value) = last.expect("at least one round");
    let alpha = rescale_to_feasible(&alphas);
    let mut allocation = Allocation::zeros(view.users, view.bins);
    for i in 0..view.users {
        for k in 0..view.bins {
            if alpha[i][k] > 0.0 {
                allocation.alpha[i][k] = alpha[i][k];
                allocation.power[i][k] = inst.mask().cap(i, k);
            }
        }
    }
    let rates = allocation.rates(inst);
    let log_nf = match log_nf_rates(&rates, &view.disagreement) {
        Ok(v) => v,
        Err(NbError::BelowDisagreement { .. }) => f64::NEG_INFINITY,
        Err(e) => return Err(e),
    };
    let report = SolveReport {
        method: Method::DualDecomposition,
        allocation,
        rates,
        disagreement: view.disagreement,
        log_nf,
        diagnostics: Diagnostics {
            iterations: rounds,
            residual,
            duality_gap: Some(dual_value - log_nf),
            trace,
            ..Default::default()
        },
    };
    Ok(DualRun {
        converged: residual <= cfg.xi,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Disagreement;

    #[test]
    fn subproblem_all_bins_worth_their_price() {
        let s = solve_subproblem(&[2.0, 1.0], 1.0, &[0.5, 0.5]).unwrap();
        assert_eq!(s.alpha, vec![1.0, 1.0]);
        assert!((s.objective - (2f64.ln() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn subproblem_fractional_bin() {
        let s = solve_subproblem(&[2.0, 1.0], 0.1, &[2.0, 2.0]).unwrap();
        assert!((s.alpha[0] - 0.55).abs() < 1e-15);
        assert_eq!(s.alpha[1], 0.0);
        assert!((s.objective + 1.1).abs() < 1e-15);
    }

    #[test]
    fn subproblem_free_bins_are_taken() {
        let s = solve_subproblem(&[0.3, 1.0, 2.0], 0.5, &[0.0; 3]).unwrap();
        assert_eq!(s.alpha, vec![1.0; 3]);
        assert!(matches!(
            solve_subproblem(&[0.3, 0.2], 0.5, &[0.0; 2]),
            Err(NbError::Infeasible(_))
        ));
    }

    #[test]
    fn subproblem_equal_ratios_fill_by_index() {
        let s = solve_subproblem(&[1.0, 1.0, 1.0], 0.0, &[0.5, 0.5, 0.5]).unwrap();
        // t = 2 stops after two whole bins
        assert_eq!(s.alpha, vec![1.0, 1.0, 0.0]);
        let s = solve_subproblem(&[1.0, 1.0, 1.0], 0.5, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.alpha, vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn master_update_examples() {
        let upd = |l: f64, occ: f64| {
            master_update(&Multipliers::new(vec![l]).unwrap(), &[vec![occ]], 0.2)
                .unwrap()
                .lambda[0]
        };
        assert_eq!(upd(1.0, 1.0), 1.0);
        assert_eq!(upd(0.1, 0.0), 0.0);
        assert!((upd(1.0, 2.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn single_user_takes_everything() {
        let g = GameInstance::from_exclusive_rates(
            &[vec![1.0, 2.0, 0.5]],
            vec![vec![1.0; 3]],
            None,
            Disagreement::NashEquilibrium,
        )
        .unwrap();
        // one user: NE is the full rate, so bargain from the origin
        let g = GameInstance::new(g.channels().clone(), g.mask().clone(), None, Disagreement::Origin)
            .unwrap();
        let rep = run_dual(&g, &DualConfig::default()).unwrap();
        for a in &rep.allocation.alpha[0] {
            assert!((a - 1.0).abs() < 1e-9);
        }
        assert!((rep.log_nf - 3.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = DualConfig {
            delta: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate(2).is_err());
        let cfg = DualConfig {
            lambda0: Some(Multipliers { lambda: vec![1.0] }),
            ..Default::default()
        };
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn messages_round_trip() {
        let b = Broadcast {
            round: 3,
            lambda: vec![0.5, 0.25],
        };
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<Broadcast>(&json).unwrap(), b);
    }
}

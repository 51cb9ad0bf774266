//! Solver results and their on-disk forms.
//!
//! A report is written as a human-readable text file plus a CSV sidecar
//! with one row per (user, bin). Numbers carry 10 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bargaining::Allocation;
use crate::tpc::Classification;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoUserSmc,
    DualDecomposition,
    BandwidthDominant,
    PowerDominant,
    GridOracle,
    FdmTsOracle,
    ProjectedGradient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TwoUserSmc => "two_user_smc",
            Method::DualDecomposition => "dual_decomposition",
            Method::BandwidthDominant => "bandwidth_dominant",
            Method::PowerDominant => "power_dominant",
            Method::GridOracle => "grid_oracle",
            Method::FdmTsOracle => "fdm_ts_oracle",
            Method::ProjectedGradient => "projected_gradient",
        }
    }
}

/// The one bin two users time-share in a split allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedBin {
    /// Original bin index.
    pub bin: usize,
    /// Position in the comparative-advantage order.
    pub position: usize,
    /// Fraction of the slot held by user 1.
    pub beta: f64,
}

/// A frequency-division operating point: disjoint bin sets and the
/// water-filled powers on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmPoint {
    pub bins: [Vec<usize>; 2],
    pub power: [Vec<f64>; 2],
    pub rates: [f64; 2],
}

/// `rates = lambda·first + (1 − lambda)·second`, with `first` the point
/// with the larger rate for user 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShare {
    pub first: FdmPoint,
    pub second: FdmPoint,
    pub lambda: f64,
}

impl TimeShare {
    pub fn rates(&self) -> [f64; 2] {
        let l = self.lambda;
        [
            l * self.first.rates[0] + (1.0 - l) * self.second.rates[0],
            l * self.first.rates[1] + (1.0 - l) * self.second.rates[1],
        ]
    }

    /// Equivalent time fractions; power is the mean power while the bin
    /// is held, which keeps both mask and total-power limits.
    pub fn allocation(&self, bins: usize) -> Allocation {
        let mut alloc = Allocation::zeros(2, bins);
        for (weight, point) in [(self.lambda, &self.first), (1.0 - self.lambda, &self.second)] {
            if weight <= 0.0 {
                continue;
            }
            for user in 0..2 {
                for &k in &point.bins[user] {
                    alloc.alpha[user][k] += weight;
                    alloc.power[user][k] += weight * point.power[user][k];
                }
            }
        }
        for user in 0..2 {
            for k in 0..bins {
                let a = alloc.alpha[user][k];
                alloc.power[user][k] = if a > 0.0 { alloc.power[user][k] / a } else { 0.0 };
            }
        }
        alloc
    }
}

/// One bulk-synchronous round of the dual solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualIterate {
    pub round: usize,
    /// Rates of the users' raw responses.
    pub rates: Vec<f64>,
    /// Log Nash function of the raw responses.
    pub log_nf: f64,
    /// Log Nash function after per-bin rescaling to a feasible point;
    /// `None` if rescaling drops someone to the disagreement point.
    pub feasible_log_nf: Option<f64>,
    /// `Σ_i U_i(λ) + Σ_k λ_k`.
    pub dual_value: f64,
    /// `max_k |λ̂_k − λ_k|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub shared_bin: Option<SharedBin>,
    pub classification: Option<Classification>,
    pub time_share: Option<TimeShare>,
    pub duality_gap: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<DualIterate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub allocation: Allocation,
    pub rates: Vec<f64>,
    pub disagreement: Vec<f64>,
    pub log_nf: f64,
    pub diagnostics: Diagnostics,
}

/// `%g`-style formatting with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{:.*e}", digits - 1, x);
        // trim mantissa zeros: 1.500000000e3 -> 1.5e3
        match s.split_once('e') {
            Some((m, e)) if m.contains('.') => {
                format!("{}e{}", m.trim_end_matches('0').trim_end_matches('.'), e)
            }
            _ => s,
        }
    }
}

pub fn num(x: f64) -> String {
    fmt_sig(x, 10)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

impl SolveReport {
    /// Human-readable structured report. Rates are in nats.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.diagnostics;
        let _ = writeln!(out, "# Nash bargaining solution (rates in nats)");
        let _ = writeln!(out, "method = {}", self.method.name());
        let _ = writeln!(out, "users = {}", self.allocation.users());
        let _ = writeln!(out, "bins = {}", self.allocation.bins());
        let _ = writeln!(out, "rates = [{}]", join(&self.rates));
        let _ = writeln!(out, "disagreement = [{}]", join(&self.disagreement));
        let _ = writeln!(out, "log_nf = {}", num(self.log_nf));
        let _ = writeln!(out);
        let _ = writeln!(out, "[diagnostics]");
        let _ = writeln!(out, "iterations = {}", d.iterations);
        let _ = writeln!(out, "residual = {}", num(d.residual));
        if let Some(gap) = d.duality_gap {
            let _ = writeln!(out, "duality_gap = {}", num(gap));
        }
        if let Some(s) = d.shared_bin {
            let _ = writeln!(
                out,
                "shared_bin = {{ bin = {}, position = {}, beta = {} }}",
                s.bin + 1,
                s.position + 1,
                num(s.beta)
            );
        }
        if let Some(c) = &d.classification {
            let _ = writeln!(out, "classification = \"{}\"", c.kind.name());
            let _ = writeln!(out, "tau = {}", num(c.tau));
            if let Some(w) = &c.witness {
                let _ = writeln!(
                    out,
                    "witness = {{ position = {}, alpha_lo = {}, alpha_hi = {} }}",
                    w.position + 1,
                    num(w.alpha_lo),
                    num(w.alpha_hi)
                );
            }
        }
        if let Some(ts) = &d.time_share {
            let _ = writeln!(out, "time_share_lambda = {}", num(ts.lambda));
            for (name, p) in [("first", &ts.first), ("second", &ts.second)] {
                let bins = |v: &[usize]| {
                    v.iter()
                        .map(|k| (k + 1).to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                let _ = writeln!(
                    out,
                    "{name} = {{ rates = [{}], user1_bins = [{}], user2_bins = [{}] }}",
                    join(&p.rates),
                    bins(&p.bins[0]),
                    bins(&p.bins[1])
                );
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[allocation]");
        for (i, (a, p)) in self
            .allocation
            .alpha
            .iter()
            .zip(&self.allocation.power)
            .enumerate()
        {
            let _ = writeln!(out, "alpha_{} = [{}]", i + 1, join(a));
            let _ = writeln!(out, "power_{} = [{}]", i + 1, join(p));
        }
        out
    }

    /// `user,bin,alpha,power` rows, 1-based indices.
    pub fn allocation_csv(&self) -> String {
        let mut out = String::from("user,bin,alpha,power\n");
        for (i, (a, p)) in self
            .allocation
            .alpha
            .iter()
            .zip(&self.allocation.power)
            .enumerate()
        {
            for k in 0..a.len() {
                let _ = writeln!(out, "{},{},{},{}", i + 1, k + 1, num(a[k]), num(p[k]));
            }
        }
        out
    }
}

//! CSV generators for the experiment figures and Table V.
//!
//! All indices in CSVs are 1-based. Empty fields mean "undefined" (a
//! log-NF at or below the disagreement point, a failed run). Figures that
//! need a bargaining-feasible instance scan seeds upward from the given one
//! and record the seed they used in `<name>_meta.csv`.

use rayon::prelude::*;

use crate::channel::GameInstance;
use crate::dual::{iterate_dual, DualRun};
use crate::error::{NbError, Result};
use crate::harness::config::Config;
use crate::oracle::{fdm_ts_oracle, projected_gradient_for, PgOptions, PgSolution};
use crate::report::num;
use crate::scenario::{generate_scenario, ScenarioRng, ScenarioSpec};
use crate::smc::{solve_two_user_smc, tdmfdm_frontier, SplitTable};
use crate::tpc::{classify, solve_tpc, theorem7_bound};
use crate::bargaining::log_nf_rates;

pub const FIGURES: [&str; 9] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "table5",
];

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

/// The shipped config for a figure, used when none is given.
pub fn default_config(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => include_str!("../../../../configs/fig1.toml"),
        "fig2" => include_str!("../../../../configs/fig2.toml"),
        "fig3" => include_str!("../../../../configs/fig3.toml"),
        "fig4" => include_str!("../../../../configs/fig4.toml"),
        "fig5" => include_str!("../../../../configs/fig5.toml"),
        "fig6" => include_str!("../../../../configs/fig6.toml"),
        "fig7" => include_str!("../../../../configs/fig7.toml"),
        "fig8" => include_str!("../../../../configs/fig8.toml"),
        "table5" => include_str!("../../../../configs/table5.toml"),
        _ => return None,
    })
}

pub fn run_figure(name: &str, cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    match name {
        "fig1" => fig1(cfg, seed),
        "fig2" => fig2(cfg, seed),
        "fig3" => fig3(cfg, seed),
        "fig4" => fig4(cfg, seed),
        "fig5" => fig5(cfg, seed),
        "fig6" => fig6(cfg, seed),
        "fig7" => fig7(cfg, seed),
        "fig8" => fig8(cfg, seed),
        "table5" => table5(cfg, seed),
        _ => Err(NbError::Config(format!(
            "unknown figure {name:?}; expected one of {}",
            FIGURES.join(", ")
        ))),
    }
}

struct Csv {
    file: String,
    contents: String,
}

impl Csv {
    fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            contents: header.join(",") + "\n",
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.contents.push_str(&fields.join(","));
        self.contents.push('\n');
    }

    fn done(self) -> Artifact {
        Artifact {
            file: self.file,
            contents: self.contents,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map_or(String::new(), num)
}

fn meta(file: &str, pairs: &[(&str, String)]) -> Artifact {
    let mut csv = Csv::new(file, &["key", "value"]);
    for (k, v) in pairs {
        csv.row(&[k.to_string(), v.clone()]);
    }
    csv.done()
}

/// First seed in `seed .. seed + scan` whose instance passes `accept`.
fn scan<T>(
    spec: &ScenarioSpec,
    seed: u64,
    scan: u64,
    what: &str,
    mut accept: impl FnMut(&GameInstance) -> Option<T>,
) -> Result<(u64, GameInstance, T)> {
    for s in seed..seed.saturating_add(scan.max(1)) {
        let inst = generate_scenario(spec, s)?;
        if let Some(found) = accept(&inst) {
            return Ok((s, inst, found));
        }
    }
    Err(NbError::Infeasible(format!(
        "no seed in {seed}..{} gives {what}",
        seed.saturating_add(scan.max(1))
    )))
}

fn two_user_instance(cfg: &Config, seed: u64) -> Result<(u64, GameInstance)> {
    let spec = cfg.scenario()?;
    let (s, inst, _) = scan(spec, seed, cfg.figure.seed_scan, "a feasible bargain", |g| {
        solve_two_user_smc(g).ok()
    })?;
    Ok((s, inst))
}

fn fig1(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, inst) = two_user_instance(cfg, seed)?;
    let report = solve_two_user_smc(&inst)?;
    let frontier = tdmfdm_frontier(&inst)?;

    let mut region = Csv::new("fig1_region.csv", &["vertex", "r1", "r2"]);
    for (v, p) in frontier.vertices.iter().enumerate() {
        region.row(&[(v + 1).to_string(), num(p.rates[0]), num(p.rates[1])]);
    }
    let mut points = Csv::new("fig1_points.csv", &["point", "r1", "r2"]);
    points.row(&["ne".into(), num(report.disagreement[0]), num(report.disagreement[1])]);
    points.row(&["nb".into(), num(report.rates[0]), num(report.rates[1])]);
    let shared = report.diagnostics.shared_bin;
    Ok(vec![
        region.done(),
        points.done(),
        meta(
            "fig1_meta.csv",
            &[
                ("seed", used.to_string()),
                ("log_nf", num(report.log_nf)),
                ("shared_bin", shared.map_or(String::new(), |s| (s.bin + 1).to_string())),
                ("beta", opt(shared.map(|s| s.beta))),
            ],
        ),
    ])
}

fn fig2(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, inst) = two_user_instance(cfg, seed)?;
    let table = SplitTable::new(&inst)?;
    let d = inst.disagreement_point();
    let steps = (1.0 / cfg.figure.alpha_step).round().max(1.0) as usize;

    let mut csv = Csv::new("fig2.csv", &["k", "position", "alpha", "log_nf"]);
    for q in 0..table.bins() {
        for s in 0..=steps {
            let alpha = s as f64 / steps as f64;
            let rates = table.shared_rates(q, alpha);
            csv.row(&[
                (table.order[q] + 1).to_string(),
                (q + 1).to_string(),
                num(alpha),
                opt(log_nf_rates(&rates, &d).ok()),
            ]);
        }
    }
    let best = solve_two_user_smc(&inst)?;
    Ok(vec![
        csv.done(),
        meta(
            "fig2_meta.csv",
            &[("seed", used.to_string()), ("best_log_nf", num(best.log_nf))],
        ),
    ])
}

/// Instance for the M-user figures: the first seed on which bargaining is
/// feasible, with its projected-gradient reference solution.
fn mbody_instance(cfg: &Config, seed: u64) -> Result<(u64, GameInstance, PgSolution)> {
    let spec = cfg.scenario()?;
    scan(spec, seed, cfg.figure.seed_scan, "a feasible bargain", |g| {
        projected_gradient_for(g, &PgOptions::default()).ok()
    })
}

fn mbody_meta(file: &str, used: u64, run: &DualRun, reference: &PgSolution) -> Artifact {
    let d = &run.report.diagnostics;
    meta(
        file,
        &[
            ("seed", used.to_string()),
            ("converged", run.converged.to_string()),
            ("iterations", d.iterations.to_string()),
            ("residual", num(d.residual)),
            ("log_nf", opt(Some(run.report.log_nf))),
            ("reference_log_nf", num(reference.log_nf)),
            ("duality_gap", opt(d.duality_gap)),
        ],
    )
}

fn mbody_run(cfg: &Config, seed: u64) -> Result<(u64, GameInstance, PgSolution, DualRun)> {
    let (used, inst, reference) = mbody_instance(cfg, seed)?;
    let run = iterate_dual(&inst, &cfg.dual.to_config(inst.bins())?)?;
    Ok((used, inst, reference, run))
}

fn fig3(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, inst, reference, run) = mbody_run(cfg, seed)?;
    let m = inst.users();
    let mut header = vec!["iter".to_string()];
    header.extend((1..=m).map(|i| format!("rate_{i}")));
    header.extend(["log_nf", "feasible_log_nf", "dual_value", "residual"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new("fig3.csv", &header);
    for it in &run.report.diagnostics.trace {
        let mut row = vec![it.round.to_string()];
        row.extend(it.rates.iter().map(|&r| num(r)));
        row.extend([
            num(it.log_nf),
            opt(it.feasible_log_nf),
            num(it.dual_value),
            num(it.residual),
        ]);
        csv.row(&row);
    }
    Ok(vec![csv.done(), mbody_meta("fig3_meta.csv", used, &run, &reference)])
}

fn fig4(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, _, reference, run) = mbody_run(cfg, seed)?;
    let mut csv = Csv::new("fig4.csv", &["user", "bin", "alpha"]);
    for (i, row) in run.report.allocation.alpha.iter().enumerate() {
        for (k, &a) in row.iter().enumerate() {
            csv.row(&[(i + 1).to_string(), (k + 1).to_string(), num(a)]);
        }
    }
    Ok(vec![csv.done(), mbody_meta("fig4_meta.csv", used, &run, &reference)])
}

fn fig5(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, inst, reference) = mbody_instance(cfg, seed)?;
    let runs: Vec<(f64, DualRun)> = cfg
        .figure
        .deltas
        .par_iter()
        .map(|&delta| {
            let mut dual = cfg.dual.clone();
            dual.delta = delta;
            Ok((delta, iterate_dual(&inst, &dual.to_config(inst.bins())?)?))
        })
        .collect::<Result<_>>()?;

    let mut csv = Csv::new("fig5.csv", &["delta", "iter", "log_nf"]);
    let mut summary = Csv::new(
        "fig5_meta.csv",
        &["delta", "seed", "converged", "iterations", "log_nf", "reference_log_nf"],
    );
    for (delta, run) in &runs {
        for it in &run.report.diagnostics.trace {
            csv.row(&[num(*delta), it.round.to_string(), num(it.log_nf)]);
        }
        summary.row(&[
            num(*delta),
            used.to_string(),
            run.converged.to_string(),
            run.report.diagnostics.iterations.to_string(),
            opt(Some(run.report.log_nf)),
            num(reference.log_nf),
        ]);
    }
    Ok(vec![csv.done(), summary.done()])
}

fn table5(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let (used, inst, reference, run) = mbody_run(cfg, seed)?;
    let ne = inst.ne_rates();
    let mut csv = Csv::new(
        "table5.csv",
        &["user", "ne_rate", "nb_rate", "increase_pct", "reference_rate"],
    );
    for i in 0..inst.users() {
        let nb = run.report.rates[i];
        let pct = if ne[i] > 0.0 { Some(100.0 * (nb - ne[i]) / ne[i]) } else { None };
        csv.row(&[
            (i + 1).to_string(),
            num(ne[i]),
            num(nb),
            opt(pct),
            num(reference.rates[i]),
        ]);
    }
    Ok(vec![csv.done(), mbody_meta("table5_meta.csv", used, &run, &reference)])
}

fn fig6(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let mut spec = cfg.scenario()?.clone();
    let [n_lo, n_hi] = cfg.figure.bins;
    let powers = cfg.figure.powers.values()?;
    spec.bins = n_hi;
    spec.tpc = Some(vec![powers[0]; spec.users]);
    // one draw of n_hi bins; smaller systems are its prefixes
    let full = generate_scenario(&spec, seed)?;
    let columns: Vec<Vec<(f64, usize, f64, &'static str)>> = (n_lo..=n_hi)
        .into_par_iter()
        .map(|n| {
            let keep: Vec<usize> = (0..n).collect();
            let sub = full.restrict_bins(&keep)?;
            powers
                .iter()
                .map(|&p| {
                    let c = classify(&sub.with_tpc(Some(vec![p; 2]))?)?;
                    Ok((p, n, c.tau, c.kind.name()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut csv = Csv::new("fig6.csv", &["P", "N", "tau", "kind"]);
    for pi in 0..powers.len() {
        for col in &columns {
            let (p, n, tau, kind) = col[pi];
            csv.row(&[num(p), n.to_string(), num(tau), kind.into()]);
        }
    }
    Ok(vec![csv.done()])
}

/// One power-dominant comparison between the sampled scheme and the
/// exhaustive FDM/TS optimum.
#[derive(Debug, Clone)]
pub struct TpcComparison {
    pub bins: usize,
    pub seed: u64,
    pub kind: &'static str,
    pub opt: Option<[f64; 2]>,
    pub sts: Option<[f64; 2]>,
    pub log_nf_opt: Option<f64>,
    pub log_nf_sts: Option<f64>,
    pub bound: Option<f64>,
    pub status: String,
}

pub fn compare_tpc(inst: &GameInstance, seed: u64) -> TpcComparison {
    let mut out = TpcComparison {
        bins: inst.bins(),
        seed,
        kind: "",
        opt: None,
        sts: None,
        log_nf_opt: None,
        log_nf_sts: None,
        bound: None,
        status: "ok".into(),
    };
    let mut run = || -> Result<()> {
        out.kind = classify(inst)?.kind.name();
        let o = fdm_ts_oracle(inst)?;
        out.opt = Some([o.rates[0], o.rates[1]]);
        out.log_nf_opt = Some(o.log_nf);
        if let Some(ts) = &o.diagnostics.time_share {
            out.bound = Some(theorem7_bound(inst, ts)?);
        }
        let s = solve_tpc(inst)?;
        out.sts = Some([s.rates[0], s.rates[1]]);
        out.log_nf_sts = Some(s.log_nf);
        Ok(())
    };
    if let Err(e) = run() {
        out.status = e.to_string().replace(',', ";");
    }
    out
}

/// Seeds for `runs` runs at each bin count, drawn from one stream so a
/// run's channels do not depend on the power limit being swept.
fn run_seeds(seed: u64, bins: [usize; 2], runs: usize) -> Vec<(usize, usize, u64)> {
    let mut rng = ScenarioRng::new(seed);
    let mut out = Vec::new();
    for n in bins[0]..=bins[1] {
        for r in 0..runs {
            out.push((n, r, rng.next_u64()));
        }
    }
    out
}

fn tpc_instance(spec: &ScenarioSpec, n: usize, seed: u64, power: Option<f64>) -> Result<GameInstance> {
    let mut spec = spec.clone();
    spec.bins = n;
    if let Some(p) = power {
        spec.tpc = Some(vec![p; spec.users]);
    }
    generate_scenario(&spec, seed)
}

fn fig7(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let spec = cfg.scenario()?;
    let rows: Vec<(usize, TpcComparison)> = run_seeds(seed, cfg.figure.bins, cfg.figure.runs)
        .into_par_iter()
        .map(|(n, r, s)| Ok((r, compare_tpc(&tpc_instance(spec, n, s, None)?, s))))
        .collect::<Result<_>>()?;

    let mut csv = Csv::new(
        "fig7.csv",
        &[
            "N", "run", "seed", "kind", "r1_opt", "r2_opt", "r1_sts", "r2_sts", "log_nf_opt",
            "log_nf_sts", "d", "bound", "status",
        ],
    );
    for (r, c) in rows {
        let d = c.log_nf_opt.zip(c.log_nf_sts).map(|(a, b)| a - b);
        csv.row(&[
            c.bins.to_string(),
            (r + 1).to_string(),
            c.seed.to_string(),
            c.kind.into(),
            opt(c.opt.map(|x| x[0])),
            opt(c.opt.map(|x| x[1])),
            opt(c.sts.map(|x| x[0])),
            opt(c.sts.map(|x| x[1])),
            opt(c.log_nf_opt),
            opt(c.log_nf_sts),
            opt(d),
            c.bound.map_or(String::new(), num),
            c.status,
        ]);
    }
    Ok(vec![csv.done()])
}

fn fig8(cfg: &Config, seed: u64) -> Result<Vec<Artifact>> {
    let spec = cfg.scenario()?;
    let powers = cfg.figure.powers.values()?;
    let seeds = run_seeds(seed, cfg.figure.bins, cfg.figure.runs);
    let mut csv = Csv::new("fig8.csv", &["N", "P", "nf_opt_mean", "nf_sts_mean", "runs"]);
    for n in cfg.figure.bins[0]..=cfg.figure.bins[1] {
        for &p in &powers {
            let runs: Vec<TpcComparison> = seeds
                .par_iter()
                .filter(|(bins, ..)| *bins == n)
                .map(|&(_, _, s)| Ok(compare_tpc(&tpc_instance(spec, n, s, Some(p))?, s)))
                .collect::<Result<_>>()?;
            let both: Vec<(f64, f64)> = runs
                .iter()
                .filter_map(|c| c.log_nf_opt.zip(c.log_nf_sts))
                .collect();
            let mean = |f: fn(&(f64, f64)) -> f64| {
                (!both.is_empty()).then(|| both.iter().map(f).sum::<f64>() / both.len() as f64)
            };
            csv.row(&[
                n.to_string(),
                num(p),
                opt(mean(|x| x.0)),
                opt(mean(|x| x.1)),
                both.len().to_string(),
            ]);
        }
    }
    Ok(vec![csv.done()])
}

//! The eight acceptance criteria, one test each. Every test prints a
//! single `criterion N ...: PASS|FAIL` line with the measured numbers
//! before asserting. Run with `--nocapture` to see the lines.

use std::time::Instant;

use rayon::prelude::*;

use nbshare::bargaining::log_nf_rates;
use nbshare::oracle::{fdm_ts_oracle, grid_nb_two_user_smc, projected_gradient_for, PgOptions};
use nbshare::scenario::ScenarioRng;
use nbshare::tpc::{comparative_advantage_allocation, solve_power_dominant, theorem7_bound};
use nbshare::waterfill::{kkt_residual, waterfill};
use nbshare::{
    classify, generate_scenario, pareto_frontier, run_dual, solve_tpc, solve_two_user_smc,
    tdmfdm_frontier, Disagreement, DualConfig, Frontier, GameInstance, MaskSpec, NbError,
    ScenarioSpec, SystemKind, UtilityPoint,
};

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {n} ({name}): {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn spec(users: usize, bins: usize, cross: f64) -> ScenarioSpec {
    ScenarioSpec {
        users,
        bins,
        noise: 0.01,
        desired_mean: 1.0,
        cross_means: Some(vec![vec![cross; users]; users]),
        mask: MaskSpec::Rayleigh { mean: 1.0 },
        tpc: None,
        seed: None,
        disagreement: None,
    }
}

#[test]
fn c1_worked_example() {
    let start = Instant::now();
    let inst = GameInstance::from_exclusive_rates(
        &[vec![0.5, 2.0, 1.0, 0.3], vec![0.1, 1.0, 3.0, 1.0]],
        vec![vec![1.0; 4]; 2],
        Some(vec![1.5, 1.5]),
        Disagreement::Origin,
    )
    .unwrap();
    let greedy = comparative_advantage_allocation(&inst).unwrap().rates(&inst);
    let kind = classify(&inst).unwrap().kind;
    let pd = solve_power_dominant(&inst).unwrap();
    let elapsed = start.elapsed();

    let greedy_ok = (greedy[0] - 1.5).abs() <= 1e-9 && (greedy[1] - 2.5).abs() <= 1e-9;
    let greedy_nf = (1.5f64 * 2.5).ln();
    let pass = greedy_ok
        && kind == SystemKind::PowerDominant
        && pd.log_nf > greedy_nf + 1e-9
        && elapsed.as_millis() < 10;
    verdict(
        1,
        "worked example",
        pass,
        format!(
            "greedy rates ({:.12}, {:.12}), kind {}, power-dominant log-NF {:.6} vs greedy {:.6}, {:.2} ms",
            greedy[0],
            greedy[1],
            kind.name(),
            pd.log_nf,
            greedy_nf,
            elapsed.as_secs_f64() * 1e3
        ),
    );
}

#[test]
fn c2_two_user_structure() {
    let start = Instant::now();
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut infeasible_agree = 0;
    let mut seed = 0u64;
    while checked < 1000 {
        seed += 1;
        let n = 1 + (seed as usize % 10);
        let inst = generate_scenario(&spec(2, n, 1.0), seed).unwrap();
        match (solve_two_user_smc(&inst), grid_nb_two_user_smc(&inst, 1e-3)) {
            (Ok(r), Ok(g)) => {
                checked += 1;
                let frac = r.allocation.fractional_bins().len();
                if frac > 1 || r.log_nf < g.log_nf - 1e-6 {
                    failures.push((seed, frac, r.log_nf - g.log_nf));
                }
            }
            (Err(NbError::BelowDisagreement { .. }), Err(_)) => infeasible_agree += 1,
            (a, b) => failures.push((seed, usize::MAX, {
                eprintln!("seed {seed}: solver {:?} oracle {:?}", a.err(), b.err());
                f64::NAN
            })),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "two-user SMC structure",
        failures.is_empty() && elapsed.as_secs_f64() < 5.0,
        format!(
            "{checked} feasible instances, {infeasible_agree} infeasible on both sides, {} failures {:?}, {:.2} s",
            failures.len(),
            &failures[..failures.len().min(5)],
            elapsed.as_secs_f64()
        ),
    );
}

#[derive(Debug)]
struct DualCase {
    seed: u64,
    users: usize,
    converged: bool,
    nf_error: f64,
    gap: f64,
    feasible: bool,
    beats_ne: bool,
}

#[test]
fn c3_dual_decomposition() {
    // cycle M over 2..=4 and N over 2..=8; keep the first 100 instances
    // on which some time share beats the NE point
    let mut candidates = Vec::new();
    let mut seed = 0u64;
    while candidates.len() < 100 {
        seed += 1;
        let m = 2 + (seed as usize % 3);
        let n = 2 + (seed as usize % 7);
        let inst = generate_scenario(&spec(m, n, 1.0), seed).unwrap();
        if let Ok(reference) = projected_gradient_for(&inst, &PgOptions::default()) {
            candidates.push((seed, inst, reference));
        }
    }
    let cfg = DualConfig {
        delta: 0.2,
        xi: 1e-5,
        ..DualConfig::default()
    };
    let cases: Vec<DualCase> = candidates
        .par_iter()
        .map(|(seed, inst, reference)| {
            let ne = inst.ne_rates();
            match run_dual(inst, &cfg) {
                Ok(r) => DualCase {
                    seed: *seed,
                    users: inst.users(),
                    converged: true,
                    nf_error: (r.log_nf - reference.log_nf).abs(),
                    gap: r.diagnostics.duality_gap.unwrap_or(f64::INFINITY),
                    feasible: r.allocation.validate(inst, 1e-6).is_ok(),
                    beats_ne: r.rates.iter().zip(&ne).all(|(a, b)| a > b),
                },
                Err(_) => DualCase {
                    seed: *seed,
                    users: inst.users(),
                    converged: false,
                    nf_error: f64::INFINITY,
                    gap: f64::INFINITY,
                    feasible: false,
                    beats_ne: false,
                },
            }
        })
        .collect();

    let ok = |c: &DualCase| c.converged && c.nf_error <= 1e-3 && c.gap <= 1e-3 && c.feasible && c.beats_ne;
    let by_m: Vec<String> = (2..=4)
        .map(|m| {
            let of_m: Vec<&DualCase> = cases.iter().filter(|c| c.users == m).collect();
            format!(
                "M={m}: {}/{} pass, {} unconverged",
                of_m.iter().filter(|c| ok(c)).count(),
                of_m.len(),
                of_m.iter().filter(|c| !c.converged).count()
            )
        })
        .collect();
    let converged_bad: Vec<&DualCase> = cases.iter().filter(|c| c.converged && !ok(c)).collect();
    verdict(
        3,
        "dual decomposition",
        cases.iter().all(ok),
        format!(
            "{} of {} instances pass; {}; converged but failing: {:?}",
            cases.iter().filter(|c| ok(c)).count(),
            cases.len(),
            by_m.join(", "),
            converged_bad.iter().map(|c| c.seed).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn c4_waterfilling() {
    let mut rng = ScenarioRng::new(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = 1 + (rng.uniform() * 12.0) as usize;
        let eps: Vec<f64> = (0..n)
            .map(|_| if rng.uniform() < 0.1 { 0.0 } else { rng.rayleigh(1.0) * 100.0 })
            .collect();
        let caps: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.1, 2.0)).collect();
        let budget = rng.uniform() * caps.iter().sum::<f64>();
        let wf = waterfill(&eps, budget, &caps).unwrap();
        worst = worst.max(kkt_residual(&eps, budget, &caps, &wf.power));
    }
    let a = waterfill(&[3.0, 1.0], 1.0, &[10.0, 10.0]).unwrap().power;
    let b = waterfill(&[3.0, 1.0], 1.0, &[0.5, 10.0]).unwrap().power;
    let hand = (a[0] - 5.0 / 6.0).abs().max((a[1] - 1.0 / 6.0).abs());
    let capped = (b[0] - 0.5).abs().max((b[1] - 0.5).abs());
    verdict(
        4,
        "water-filling",
        worst <= 1e-8 && hand <= 1e-12 && capped <= 1e-12,
        format!("worst KKT residual {worst:.3e} over 10^4 instances, hand case error {hand:.1e}, cap case error {capped:.1e}"),
    );
}

#[test]
fn c5_theorem7_bound() {
    let start = Instant::now();
    let base = ScenarioSpec {
        users: 2,
        bins: 4,
        noise: 0.01,
        desired_mean: 1.0,
        cross_means: None,
        mask: MaskSpec::Uniform { lo: 1.2, hi: 1.25 },
        tpc: Some(vec![2.0, 2.0]),
        seed: None,
        disagreement: None,
    };
    let mut rng = ScenarioRng::new(5);
    let jobs: Vec<(usize, u64)> = (4..=8)
        .flat_map(|n| (0..60).map(move |_| n))
        .map(|n| (n, rng.next_u64()))
        .collect();
    let results: Vec<(usize, f64, f64)> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let mut s = base.clone();
            s.bins = n;
            let inst = generate_scenario(&s, seed).unwrap();
            assert_eq!(classify(&inst).unwrap().kind, SystemKind::PowerDominant);
            let opt = fdm_ts_oracle(&inst).unwrap();
            let sts = solve_tpc(&inst).unwrap();
            let bound = theorem7_bound(&inst, opt.diagnostics.time_share.as_ref().unwrap()).unwrap();
            (n, opt.log_nf - sts.log_nf, bound)
        })
        .collect();
    let elapsed = start.elapsed();
    let below = results.iter().filter(|r| r.1 < -1e-9).count();
    let above = results.iter().filter(|r| r.1 > r.2 + 1e-9).count();
    let zero = results.iter().filter(|r| r.1.abs() <= 1e-9).count();
    let infinite = results.iter().filter(|r| r.2.is_infinite()).count();
    let per_n: Vec<String> = (4..=8)
        .map(|n| {
            format!(
                "N={n}: {}/60",
                results.iter().filter(|r| r.0 == n && r.1.abs() <= 1e-9).count()
            )
        })
        .collect();
    verdict(
        5,
        "sampled time sharing bound",
        below == 0 && above == 0 && 2 * zero > results.len() && elapsed.as_secs_f64() < 60.0,
        format!(
            "{} runs, d < 0 in {below}, d > bound in {above}, d = 0 in {zero} ({}), bound infinite in {infinite}, {:.1} s",
            results.len(),
            per_n.join(" "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c6_classification_monotonicity() {
    let spec = ScenarioSpec {
        users: 2,
        bins: 64,
        noise: 0.01,
        desired_mean: 1.0,
        cross_means: None,
        mask: MaskSpec::Uniform { lo: 1.8, hi: 2.2 },
        tpc: Some(vec![1.0, 1.0]),
        seed: None,
        disagreement: None,
    };
    // one draw of 64 bins; the system with N bins is its first N
    let full = generate_scenario(&spec, 6).unwrap();
    let grid: Vec<Vec<(f64, SystemKind)>> = (1..=64)
        .map(|n| {
            let sub = full.restrict_bins(&(0..n).collect::<Vec<_>>()).unwrap();
            (1..=51)
                .map(|p| {
                    let c = classify(&sub.with_tpc(Some(vec![p as f64; 2])).unwrap()).unwrap();
                    (c.tau, c.kind)
                })
                .collect()
        })
        .collect();
    let mut n_drops = Vec::new();
    let mut p_rises = 0;
    let mut flips = 0;
    for n in 0..64 {
        for p in 0..51 {
            if n > 0 {
                let (before, after) = (grid[n - 1][p], grid[n][p]);
                if after.0 < before.0 {
                    n_drops.push((n + 1, p + 1, before.0 - after.0));
                }
                if before.1 == SystemKind::PowerDominant && after.1 == SystemKind::BandwidthDominant {
                    flips += 1;
                }
            }
            if p > 0 && grid[n][p].0 > grid[n][p - 1].0 {
                p_rises += 1;
            }
        }
    }
    let worst = n_drops.iter().map(|d| d.2).fold(0.0, f64::max);
    verdict(
        6,
        "classification monotonicity",
        n_drops.is_empty() && p_rises == 0 && flips == 0,
        format!(
            "tau decreases with N in {} of {} steps (largest drop {worst:.2e}, first {:?}), increases with P in {p_rises}, power-to-bandwidth flips {flips}",
            n_drops.len(),
            63 * 51,
            n_drops.first()
        ),
    );
}

#[test]
fn c7_bargaining_axioms() {
    let mut rng = ScenarioRng::new(7);
    let mut worst_sym: f64 = 0.0;
    let mut iia_worst: f64 = 0.0;
    let mut cases = 0;
    for trial in 0..200 {
        let n = 1 + trial % 8;
        let r: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.1, 3.0)).collect();
        // identical users, and users whose bins are mirror images
        let mirrored: Vec<f64> = r.iter().rev().copied().collect();
        for r2 in [r.clone(), mirrored] {
            let inst = GameInstance::from_exclusive_rates(
                &[r.clone(), r2.clone()],
                vec![vec![1.0; n]; 2],
                None,
                Disagreement::Origin,
            )
            .unwrap();
            let sol = solve_two_user_smc(&inst).unwrap();
            worst_sym = worst_sym.max((sol.rates[0] - sol.rates[1]).abs());

            // IIA: bargaining on the segments next to the NB point alone
            let frontier = tdmfdm_frontier(&inst).unwrap();
            let d = UtilityPoint::origin(2);
            let full = frontier.bargain(&d).unwrap();
            let lo = full.segment.saturating_sub(1);
            let hi = (full.segment + 2).min(frontier.vertices.len() - 1);
            let local = Frontier {
                vertices: frontier.vertices[lo..=hi].to_vec(),
            };
            let restricted = local.bargain(&d).unwrap();
            let gap = full
                .point
                .rates
                .iter()
                .zip(&restricted.point.rates)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            iia_worst = iia_worst.max(gap);
            // and the same through the hull of the local vertices only
            let rebuilt = pareto_frontier(&local.vertices).bargain(&d).unwrap();
            iia_worst = iia_worst.max(
                (log_nf_rates(&rebuilt.point.rates, &d.rates).unwrap()
                    - log_nf_rates(&full.point.rates, &d.rates).unwrap())
                .abs(),
            );
            cases += 1;
        }
    }
    verdict(
        7,
        "bargaining axioms",
        worst_sym <= 1e-9 && iia_worst <= 1e-9,
        format!("{cases} games, largest symmetric rate difference {worst_sym:.1e}, largest IIA deviation {iia_worst:.1e}"),
    );
}

#[test]
fn c8_scale() {
    let inst = generate_scenario(&spec(2, 256, 1.0), 8).unwrap();
    let start = Instant::now();
    let two = solve_two_user_smc(&inst);
    let t_two = start.elapsed().as_secs_f64();

    let inst = generate_scenario(&spec(4, 64, 1.0), 8).unwrap();
    let start = Instant::now();
    let dual = run_dual(&inst, &DualConfig::default());
    let t_dual = start.elapsed().as_secs_f64();
    let outcome = match &dual {
        Ok(r) => format!("converged in {} rounds", r.diagnostics.iterations),
        Err(e) => e.to_string(),
    };
    verdict(
        8,
        "scale",
        t_two < 1.0 && t_dual < 10.0,
        format!(
            "two-user N=256 {:.3} s ({}), dual M=4 N=64 {:.2} s ({outcome})",
            t_two,
            if two.is_ok() { "solved" } else { "no feasible bargain" },
            t_dual
        ),
    );
}

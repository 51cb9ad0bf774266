//! Command implementations behind the `nbshare` binary.

pub mod config;
pub mod figures;

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::channel::GameInstance;
use crate::error::{NbError, Result};
use crate::oracle::{fdm_ts_oracle, grid_nb_two_user_smc, projected_gradient_for, PgOptions};
use crate::report::{num, Method, SolveReport};
use crate::smc::solve_two_user_smc;
use crate::tpc::solve_tpc;
use crate::dual::run_dual;
use crate::bargaining::Allocation;
use crate::report::Diagnostics;

pub use config::Config;
pub use figures::{default_config, run_figure, Artifact, FIGURES};

/// Reference solvers selectable with `--oracle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// β grid over the two-user split structure.
    Grid,
    /// Exhaustive FDM/time sharing for two users with power limits.
    FdmTs,
    /// Projected-gradient ascent on the time-share problem.
    ProjectedGradient,
}

impl OracleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "fdm-ts" => Ok(Self::FdmTs),
            "pg" => Ok(Self::ProjectedGradient),
            _ => Err(NbError::Config(format!(
                "unknown oracle {s:?}; expected grid, fdm-ts or pg"
            ))),
        }
    }

    /// The oracle matching the solver `solve` would pick.
    pub fn for_instance(inst: &GameInstance) -> Self {
        if inst.tpc().is_some() {
            Self::FdmTs
        } else if inst.users() == 2 {
            Self::Grid
        } else {
            Self::ProjectedGradient
        }
    }
}

/// Runs the solver matching the instance: the TPC scheme with power limits,
/// the exact two-user solver for two users, dual decomposition otherwise.
pub fn solve(inst: &GameInstance, cfg: &Config) -> Result<SolveReport> {
    if inst.tpc().is_some() {
        solve_tpc(inst)
    } else if inst.users() == 2 {
        solve_two_user_smc(inst)
    } else {
        run_dual(inst, &cfg.dual.to_config(inst.bins())?)
    }
}

pub fn solve_with_oracle(inst: &GameInstance, oracle: OracleKind) -> Result<SolveReport> {
    match oracle {
        OracleKind::Grid => grid_nb_two_user_smc(inst, 1e-3),
        OracleKind::FdmTs => fdm_ts_oracle(inst),
        OracleKind::ProjectedGradient => {
            let pg = projected_gradient_for(inst, &PgOptions::default())?;
            let mut allocation = Allocation::zeros(inst.users(), inst.bins());
            for (i, row) in pg.alpha.iter().enumerate() {
                for (k, &a) in row.iter().enumerate() {
                    if a > 0.0 {
                        allocation.alpha[i][k] = a;
                        allocation.power[i][k] = inst.mask().cap(i, k);
                    }
                }
            }
            Ok(SolveReport {
                method: Method::ProjectedGradient,
                allocation,
                rates: pg.rates,
                disagreement: inst.disagreement_point(),
                log_nf: pg.log_nf,
                diagnostics: Diagnostics {
                    iterations: pg.iterations,
                    ..Default::default()
                },
            })
        }
    }
}

/// Solver and oracle side by side.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub solver: SolveReport,
    pub oracle: SolveReport,
}

impl OracleCheck {
    /// `log_nf(oracle) − log_nf(solver)`; positive when the oracle is better.
    pub fn shortfall(&self) -> f64 {
        self.oracle.log_nf - self.solver.log_nf
    }

    pub fn to_text(&self) -> String {
        format!(
            "solver = {}\noracle = {}\nsolver_log_nf = {}\noracle_log_nf = {}\nshortfall = {}\n",
            self.solver.method.name(),
            self.oracle.method.name(),
            num(self.solver.log_nf),
            num(self.oracle.log_nf),
            num(self.shortfall())
        )
    }
}

pub fn oracle_check(inst: &GameInstance, cfg: &Config, oracle: Option<OracleKind>) -> Result<OracleCheck> {
    let solver = solve(inst, cfg)?;
    let oracle = solve_with_oracle(inst, oracle.unwrap_or(OracleKind::for_instance(inst)))?;
    Ok(OracleCheck { solver, oracle })
}

/// Writes `contents` to `dir/file` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, file: &str, contents: &str) -> Result<PathBuf> {
    let io = |e: std::io::Error| NbError::Config(format!("{}: {e}", dir.join(file).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let target = dir.join(file);
    let tmp = dir.join(format!(".{file}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, &target).map_err(io)?;
    Ok(target)
}

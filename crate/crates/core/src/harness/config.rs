//! Run configuration files.
//!
//! A config is TOML with these tables, all optional except that `solve`
//! needs exactly one of `[scenario]` or `[instance]`:
//!
//! ```toml
//! [scenario]            # random instance, see ScenarioSpec
//! users = 2
//! bins = 4
//! noise = 0.01
//! desired_mean = 1.0
//! cross_means = [[0.0, 0.7], [0.2, 0.0]]
//! mask = { kind = "rayleigh", mean = 1.0 }
//! seed = 1
//!
//! [instance]            # explicit instance instead of [scenario]
//! rates = [[0.5, 2.0], [0.1, 1.0]]    # or gain = [rx][tx][k] plus noise
//! pmax = [[1.0, 1.0], [1.0, 1.0]]
//! tpc = [1.5, 1.5]
//!
//! [dual]
//! delta = 0.2
//! xi = 1e-5
//! max_iters = 100000
//! lambda0 = 0.0
//! step = "constant"     # or "diminishing"
//!
//! [figure]              # sweep parameters, see configs/*.toml
//! runs = 50
//! bins = [4, 9]
//! powers = [1.5, 2.0, 2.5]
//! ```
//!
//! Errors carry the file name and line of the offending key.

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;

use crate::channel::{ChannelSet, Disagreement, GameInstance, SpectralMask};
use crate::dual::{DualConfig, Multipliers, StepRule};
use crate::error::{NbError, Result};
use crate::scenario::{generate_scenario, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Option<ScenarioSpec>,
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub dual: DualSection,
    #[serde(default)]
    pub figure: FigureSection,
}

/// Explicit instance. Give either `rates` (full-mask exclusive rates,
/// interference-free) or `gain` with `noise`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub rates: Option<Vec<Vec<f64>>>,
    /// `gain[rx][tx][k]`, magnitudes.
    pub gain: Option<Vec<Vec<Vec<f64>>>>,
    pub noise: Option<Vec<f64>>,
    pub pmax: Vec<Vec<f64>>,
    pub tpc: Option<Vec<f64>>,
    pub disagreement: Option<Disagreement>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualSection {
    pub delta: f64,
    pub xi: f64,
    pub max_iters: usize,
    /// Uniform starting price; zero when absent.
    pub lambda0: Option<f64>,
    pub step: StepRule,
    pub parallel: bool,
}

impl Default for DualSection {
    fn default() -> Self {
        let d = DualConfig::default();
        Self {
            delta: d.delta,
            xi: d.xi,
            max_iters: d.max_iters,
            lambda0: None,
            step: d.step,
            parallel: d.parallel,
        }
    }
}

impl DualSection {
    pub fn to_config(&self, bins: usize) -> Result<DualConfig> {
        let lambda0 = match self.lambda0 {
            Some(v) => Some(Multipliers::uniform(bins, v)?),
            None => None,
        };
        let cfg = DualConfig {
            delta: self.delta,
            xi: self.xi,
            max_iters: self.max_iters,
            lambda0,
            step: self.step,
            parallel: self.parallel,
        };
        cfg.validate(bins)?;
        Ok(cfg)
    }
}

/// A list of values or an arithmetic range `{ from, to, step }` with both
/// ends included.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ValueSet {
    List(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

impl ValueSet {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            ValueSet::List(ref v) => Ok(v.clone()),
            ValueSet::Range { from, to, step } => {
                if !(step > 0.0 && from.is_finite() && to.is_finite() && to >= from) {
                    return Err(NbError::Config(format!(
                        "powers range {{ from = {from}, to = {to}, step = {step} }} is empty or unbounded"
                    )));
                }
                let count = ((to - from) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| from + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureSection {
    /// Seeds tried, starting at the run seed, when a figure needs an
    /// instance on which bargaining is feasible.
    pub seed_scan: u64,
    /// Grid step for the shared-bin fraction in fig2.
    pub alpha_step: f64,
    /// Step lengths compared in fig5.
    pub deltas: Vec<f64>,
    /// Inclusive range of bin counts for fig6, fig7 and fig8.
    pub bins: [usize; 2],
    /// Total power limits (the same for both users).
    pub powers: ValueSet,
    /// Runs per bin count in fig7 and fig8.
    pub runs: usize,
}

impl Default for FigureSection {
    fn default() -> Self {
        Self {
            seed_scan: 1000,
            alpha_step: 0.01,
            deltas: vec![0.1, 0.2, 0.3],
            bins: [4, 9],
            powers: ValueSet::List(vec![2.0]),
            runs: 50,
        }
    }
}

impl Config {
    /// Parses `src`; `origin` names the source in error messages.
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(src).map_err(|e| {
            let at = e
                .span()
                .map(|s| position(src, s))
                .map_or(String::new(), |(l, c)| format!(":{l}:{c}"));
            NbError::Config(format!("{origin}{at}: {}", e.message().trim_end()))
        })?;
        cfg.check().map_err(|e| match e {
            NbError::Config(msg) | NbError::InvalidInstance(msg) | NbError::Domain(msg) => {
                let at = blame(src, &msg).map_or(String::new(), |l| format!(":{l}"));
                NbError::Config(format!("{origin}{at}: {msg}"))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| NbError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&src, &path.display().to_string())
    }

    fn check(&self) -> Result<()> {
        if self.scenario.is_some() && self.instance.is_some() {
            return Err(NbError::Config(
                "instance: give either [scenario] or [instance], not both".into(),
            ));
        }
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        if let Some(i) = &self.instance {
            i.build()?;
        }
        let d = &self.dual;
        if !(d.delta.is_finite() && d.delta > 0.0) {
            return Err(NbError::Config(format!("delta = {} must be > 0", d.delta)));
        }
        if !(d.xi.is_finite() && d.xi > 0.0) {
            return Err(NbError::Config(format!("xi = {} must be > 0", d.xi)));
        }
        if d.max_iters == 0 {
            return Err(NbError::Config("max_iters must be at least 1".into()));
        }
        if let Some(l) = d.lambda0 {
            if !(l.is_finite() && l >= 0.0) {
                return Err(NbError::Config(format!("lambda0 = {l} must be >= 0")));
            }
        }
        let f = &self.figure;
        if !(f.alpha_step > 0.0 && f.alpha_step <= 1.0) {
            return Err(NbError::Config(format!("alpha_step = {} must be in (0, 1]", f.alpha_step)));
        }
        if f.bins[0] == 0 || f.bins[1] < f.bins[0] {
            return Err(NbError::Config(format!("bins = {:?} must be a range of positive counts", f.bins)));
        }
        if f.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(NbError::Config("deltas must all be > 0".into()));
        }
        if f.powers.values()?.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(NbError::Config("powers must all be > 0".into()));
        }
        Ok(())
    }

    /// The game to solve. `seed` overrides the scenario's own seed.
    pub fn instance(&self, seed: Option<u64>) -> Result<GameInstance> {
        match (&self.scenario, &self.instance) {
            (Some(s), None) => generate_scenario(s, seed.or(s.seed).unwrap_or(0)),
            (None, Some(i)) => i.build(),
            _ => Err(NbError::Config(
                "solving needs exactly one of [scenario] or [instance]".into(),
            )),
        }
    }

    /// The scenario table, required by the figure sweeps.
    pub fn scenario(&self) -> Result<&ScenarioSpec> {
        self.scenario
            .as_ref()
            .ok_or_else(|| NbError::Config("this command needs a [scenario] table".into()))
    }
}

impl InstanceSpec {
    pub fn build(&self) -> Result<GameInstance> {
        let disagreement = self.disagreement.unwrap_or(if self.tpc.is_some() {
            Disagreement::Origin
        } else {
            Disagreement::NashEquilibrium
        });
        match (&self.rates, &self.gain, &self.noise) {
            (Some(rates), None, None) => {
                if rates.len() != self.pmax.len()
                    || rates.iter().zip(&self.pmax).any(|(r, p)| r.len() != p.len())
                {
                    return Err(NbError::Config("pmax must have the shape of rates".into()));
                }
                GameInstance::from_exclusive_rates(
                    rates,
                    self.pmax.clone(),
                    self.tpc.clone(),
                    disagreement,
                )
            }
            (None, Some(gain), Some(noise)) => GameInstance::new(
                ChannelSet::new(gain.clone(), noise.clone())?,
                SpectralMask::new(self.pmax.clone())?,
                self.tpc.clone(),
                disagreement,
            ),
            _ => Err(NbError::Config(
                "rates: [instance] needs either rates, or gain together with noise".into(),
            )),
        }
    }
}

fn position(src: &str, span: Range<usize>) -> (usize, usize) {
    let before = &src[..span.start.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Line of the key an error message starts with, if the file has it.
fn blame(src: &str, msg: &str) -> Option<usize> {
    let key: String = msg
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    if key.is_empty() {
        return None;
    }
    src.lines().position(|line| {
        let t = line.trim_start();
        t.strip_prefix(key.as_str())
            .is_some_and(|rest| rest.trim_start().starts_with('='))
            || t.strip_prefix('[')
                .is_some_and(|rest| rest.trim_end().trim_end_matches(']') == key)
    })
    .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
[scenario]
users = 2
bins = 4
noise = 0.01
desired_mean = 1.0
cross_means = [[0.0, 0.7], [0.2, 0.0]]
mask = { kind = "rayleigh", mean = 1.0 }
seed = 3
"#;

    #[test]
    fn scenario_round_trip() {
        let cfg = Config::parse(FIG1, "fig1.toml").unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!((s.users, s.bins, s.seed), (2, 4, Some(3)));
        assert_eq!(cfg.dual, DualSection::default());
        let a = cfg.instance(None).unwrap();
        let b = cfg.instance(Some(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, cfg.instance(Some(4)).unwrap());
    }

    #[test]
    fn syntax_error_names_line() {
        let src = "[scenario]\nusers = 2\nbins = = 4\n";
        let err = Config::parse(src, "x.toml").unwrap_err().to_string();
        assert!(err.contains("x.toml:3:"), "{err}");
    }

    #[test]
    fn unknown_key_names_line() {
        let src = format!("{FIG1}colour = 3\n");
        let err = Config::parse(&src, "x.toml").unwrap_err().to_string();
        assert!(err.contains("x.toml:"), "{err}");
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn semantic_error_names_line() {
        let src = FIG1.replace("noise = 0.01", "noise = -1.0");
        let err = Config::parse(&src, "x.toml").unwrap_err().to_string();
        assert!(err.contains("x.toml:5: noise"), "{err}");

        let src = format!("{FIG1}\n[dual]\ndelta = 0.0\n");
        let err = Config::parse(&src, "x.toml").unwrap_err().to_string();
        assert!(err.contains("x.toml:12: delta"), "{err}");
    }

    #[test]
    fn explicit_rates_instance() {
        let src = r#"
[instance]
rates = [[0.5, 2.0, 1.0, 0.3], [0.1, 1.0, 3.0, 1.0]]
pmax = [[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0]]
tpc = [1.5, 1.5]
"#;
        let cfg = Config::parse(src, "ex.toml").unwrap();
        let inst = cfg.instance(None).unwrap();
        assert_eq!(inst.disagreement(), Disagreement::Origin);
        assert!((inst.exclusive_rate(1, 2, 1.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_and_instance_conflict() {
        let src = format!("{FIG1}\n[instance]\nrates = [[1.0]]\npmax = [[1.0]]\n");
        assert!(Config::parse(&src, "x.toml").is_err());
    }

    #[test]
    fn power_ranges() {
        let r = ValueSet::Range { from: 1.0, to: 51.0, step: 1.0 };
        let v = r.values().unwrap();
        assert_eq!((v.len(), v[0], v[50]), (51, 1.0, 51.0));
        assert!(ValueSet::Range { from: 2.0, to: 1.0, step: 1.0 }.values().is_err());
    }
}

//! Seeded random scenarios.
//!
//! Random numbers come from ChaCha20 (20 rounds, RFC 8439 block function,
//! 64-bit block counter starting at 0, zero nonce) keyed by the seed: the
//! 32-byte key is the seed as little-endian `u64` followed by 24 zero
//! bytes. Each uniform variate consumes one 64-bit output word `w`
//! (little-endian word order of the keystream) and is `(w >> 11) * 2^-53`,
//! so `u ∈ [0, 1)`. A Rayleigh variate with mean `m` uses scale
//! `s = m·√(2/π)` and inversion `s·√(−2 ln(1 − u))`.
//!
//! Draw order: gains for `rx` in users, `tx` in users, `k` in bins (one
//! draw each, even when the mean is zero), then the mask for user, bin
//! (no draws for a constant mask).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, Disagreement, GameInstance, SpectralMask};
use crate::error::{NbError, Result};

/// Distribution of the per-bin power caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaskSpec {
    Const { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Rayleigh { mean: f64 },
}

/// Recipe for a random game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub users: usize,
    pub bins: usize,
    pub noise: f64,
    pub desired_mean: f64,
    /// `cross_means[i][j]`: mean magnitude from transmitter `j` into
    /// receiver `i`. Diagonal entries are ignored. Zero means no coupling.
    #[serde(default)]
    pub cross_means: Option<Vec<Vec<f64>>>,
    pub mask: MaskSpec,
    #[serde(default)]
    pub tpc: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Defaults to the Nash equilibrium without power limits, origin with.
    #[serde(default)]
    pub disagreement: Option<Disagreement>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NbError::Config(msg));
        if self.users == 0 || self.bins == 0 {
            return bad("users and bins must be positive".into());
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return bad(format!("noise = {} must be > 0", self.noise));
        }
        if !(self.desired_mean.is_finite() && self.desired_mean > 0.0) {
            return bad(format!("desired_mean = {} must be > 0", self.desired_mean));
        }
        if let Some(cm) = &self.cross_means {
            if cm.len() != self.users || cm.iter().any(|r| r.len() != self.users) {
                return bad(format!("cross_means must be {0}x{0}", self.users));
            }
            for (i, row) in cm.iter().enumerate() {
                for (j, &m) in row.iter().enumerate() {
                    if i != j && !(m.is_finite() && m >= 0.0) {
                        return bad(format!("cross_means[{i}][{j}] = {m} must be >= 0"));
                    }
                }
            }
        }
        match self.mask {
            MaskSpec::Const { value } if !(value.is_finite() && value > 0.0) => {
                return bad(format!("mask value {value} must be > 0"));
            }
            MaskSpec::Uniform { lo, hi } if !(lo.is_finite() && lo > 0.0 && hi >= lo) => {
                return bad(format!("mask uniform({lo}, {hi}) needs 0 < lo <= hi"));
            }
            MaskSpec::Rayleigh { mean } if !(mean.is_finite() && mean > 0.0) => {
                return bad(format!("mask rayleigh mean {mean} must be > 0"));
            }
            _ => {}
        }
        if let Some(tpc) = &self.tpc {
            if tpc.len() != self.users || tpc.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
                return bad(format!("tpc must list {} positive limits", self.users));
            }
            if self.disagreement == Some(Disagreement::NashEquilibrium) {
                return bad("games with tpc bargain from the origin".into());
            }
        }
        Ok(())
    }
}

/// Portable uniform/Rayleigh source; see the module docs for the exact
/// bit-level definition.
pub struct ScenarioRng(ChaCha20Rng);

impl ScenarioRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self(ChaCha20Rng::from_seed(key))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Raw 64-bit output word, used to derive per-run seeds.
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn rayleigh(&mut self, mean: f64) -> f64 {
        let scale = mean * (2.0 / std::f64::consts::PI).sqrt();
        let u = self.uniform();
        scale * (-2.0 * (-u).ln_1p()).sqrt()
    }
}

pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<GameInstance> {
    spec.validate()?;
    let (m, n) = (spec.users, spec.bins);
    let mut rng = ScenarioRng::new(seed);

    let mut gain = vec![vec![vec![0.0; n]; m]; m];
    for rx in 0..m {
        for tx in 0..m {
            let mean = if rx == tx {
                spec.desired_mean
            } else {
                spec.cross_means.as_ref().map_or(0.0, |cm| cm[rx][tx])
            };
            for g in gain[rx][tx].iter_mut() {
                let draw = rng.rayleigh(mean.max(f64::MIN_POSITIVE));
                *g = if mean > 0.0 { draw } else { 0.0 };
            }
        }
    }

    let pmax: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| match spec.mask {
                    MaskSpec::Const { value } => value,
                    MaskSpec::Uniform { lo, hi } => rng.uniform_in(lo, hi),
                    // a zero draw has probability 2^-53; keep the mask positive
                    MaskSpec::Rayleigh { mean } => rng.rayleigh(mean).max(f64::MIN_POSITIVE),
                })
                .collect()
        })
        .collect();

    let disagreement = spec.disagreement.unwrap_or(if spec.tpc.is_some() {
        Disagreement::Origin
    } else {
        Disagreement::NashEquilibrium
    });
    GameInstance::new(
        ChannelSet::new(gain, vec![spec.noise; m])?,
        SpectralMask::new(pmax)?,
        spec.tpc.clone(),
        disagreement,
    )
}

//! Per-bin channel description of a multi-user game and the rates that
//! follow from it.
//!
//! Every rate in this crate is in nats. Channel gains are magnitudes
//! `|Φ_ji(k)|`; only their squares enter the rate formulas.

use serde::{Deserialize, Serialize};

use crate::error::{NbError, Result};

/// Channel magnitudes and receiver noise for `M` users on `N` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    users: usize,
    bins: usize,
    /// Flattened `[rx][tx][bin]`.
    gain: Vec<f64>,
    noise: Vec<f64>,
}

impl ChannelSet {
    /// `gain[i][j][k]` is the magnitude of the channel from transmitter `j`
    /// to receiver `i` on bin `k`.
    pub fn new(gain: Vec<Vec<Vec<f64>>>, noise: Vec<f64>) -> Result<Self> {
        let users = gain.len();
        if users == 0 {
            return Err(NbError::InvalidInstance("at least one user is required".into()));
        }
        if noise.len() != users {
            return Err(NbError::InvalidInstance(format!(
                "noise has {} entries for {} users",
                noise.len(),
                users
            )));
        }
        let bins = gain[0].first().map_or(0, Vec::len);
        if bins == 0 {
            return Err(NbError::InvalidInstance("at least one bin is required".into()));
        }
        let mut flat = Vec::with_capacity(users * users * bins);
        for (rx, row) in gain.iter().enumerate() {
            if row.len() != users {
                return Err(NbError::InvalidInstance(format!(
                    "gain[{rx}] has {} transmitters, expected {users}",
                    row.len()
                )));
            }
            for (tx, per_bin) in row.iter().enumerate() {
                if per_bin.len() != bins {
                    return Err(NbError::InvalidInstance(format!(
                        "gain[{rx}][{tx}] has {} bins, expected {bins}",
                        per_bin.len()
                    )));
                }
                for (k, &g) in per_bin.iter().enumerate() {
                    if !(g.is_finite() && g >= 0.0) {
                        return Err(NbError::InvalidInstance(format!(
                            "gain[{rx}][{tx}][{k}] = {g} must be finite and >= 0"
                        )));
                    }
                    flat.push(g);
                }
            }
        }
        for (i, &s) in noise.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(NbError::InvalidInstance(format!("noise[{i}] = {s} must be > 0")));
            }
        }
        Ok(Self {
            users,
            bins,
            gain: flat,
            noise,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Magnitude of the channel from `tx` into `rx` on bin `k`.
    #[inline]
    pub fn gain(&self, rx: usize, tx: usize, k: usize) -> f64 {
        self.gain[(rx * self.users + tx) * self.bins + k]
    }

    pub fn noise(&self, user: usize) -> f64 {
        self.noise[user]
    }

    /// Interference-free SNR per unit power, `|Φ_ii(k)|² / σ_i²`.
    #[inline]
    pub fn snr_per_watt(&self, user: usize, k: usize) -> f64 {
        let g = self.gain(user, user, k);
        g * g / self.noise[user]
    }

    fn restrict(&self, keep: &[usize]) -> Self {
        let bins = keep.len();
        let mut gain = Vec::with_capacity(self.users * self.users * bins);
        for rx in 0..self.users {
            for tx in 0..self.users {
                gain.extend(keep.iter().map(|&k| self.gain(rx, tx, k)));
            }
        }
        Self {
            users: self.users,
            bins,
            gain,
            noise: self.noise.clone(),
        }
    }
}

/// Per-user, per-bin power caps `p_i^max(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMask {
    pmax: Vec<Vec<f64>>,
}

impl SpectralMask {
    pub fn new(pmax: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in pmax.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(NbError::InvalidInstance(format!(
                        "pmax[{i}][{k}] = {p} must be finite and > 0"
                    )));
                }
            }
        }
        Ok(Self { pmax })
    }

    pub fn uniform(users: usize, bins: usize, value: f64) -> Result<Self> {
        Self::new(vec![vec![value; bins]; users])
    }

    #[inline]
    pub fn cap(&self, user: usize, k: usize) -> f64 {
        self.pmax[user][k]
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.pmax[user]
    }

    pub fn total(&self, user: usize) -> f64 {
        self.pmax[user].iter().sum()
    }
}

/// Which utility vector users fall back to when cooperation breaks up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disagreement {
    NashEquilibrium,
    Origin,
}

/// A complete bargaining game: channels, masks, optional total-power
/// limits and the disagreement rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    channels: ChannelSet,
    mask: SpectralMask,
    tpc: Option<Vec<f64>>,
    disagreement: Disagreement,
}

impl GameInstance {
    pub fn new(
        channels: ChannelSet,
        mask: SpectralMask,
        tpc: Option<Vec<f64>>,
        disagreement: Disagreement,
    ) -> Result<Self> {
        let (m, n) = (channels.users(), channels.bins());
        if mask.pmax.len() != m || mask.pmax.iter().any(|row| row.len() != n) {
            return Err(NbError::InvalidInstance(format!(
                "spectral mask must be {m}x{n}"
            )));
        }
        if let Some(limits) = &tpc {
            if limits.len() != m {
                return Err(NbError::InvalidInstance(format!(
                    "{} total-power limits for {m} users",
                    limits.len()
                )));
            }
            for (i, &p) in limits.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(NbError::InvalidInstance(format!(
                        "total-power limit {i} = {p} must be finite and > 0"
                    )));
                }
            }
            if disagreement != Disagreement::Origin {
                return Err(NbError::InvalidInstance(
                    "games with total-power limits bargain from the origin".into(),
                ));
            }
        }
        Ok(Self {
            channels,
            mask,
            tpc,
            disagreement,
        })
    }

    /// Interference-free instance whose full-mask exclusive rate for user `i`
    /// on bin `k` is `rates[i][k]`. Noise is 1 and cross gains are 0.
    pub fn from_exclusive_rates(
        rates: &[Vec<f64>],
        pmax: Vec<Vec<f64>>,
        tpc: Option<Vec<f64>>,
        disagreement: Disagreement,
    ) -> Result<Self> {
        let m = rates.len();
        let n = rates.first().map_or(0, Vec::len);
        let mut gain = vec![vec![vec![0.0; n]; m]; m];
        for i in 0..m {
            if rates[i].len() != n {
                return Err(NbError::InvalidInstance("ragged rate matrix".into()));
            }
            for k in 0..n {
                let r = rates[i][k];
                if !(r.is_finite() && r >= 0.0) {
                    return Err(NbError::InvalidInstance(format!("rate[{i}][{k}] = {r}")));
                }
                // ln(1 + g² p / 1) = r
                gain[i][i][k] = (r.exp_m1() / pmax[i][k]).sqrt();
            }
        }
        let channels = ChannelSet::new(gain, vec![1.0; m])?;
        Self::new(channels, SpectralMask::new(pmax)?, tpc, disagreement)
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn mask(&self) -> &SpectralMask {
        &self.mask
    }

    pub fn tpc(&self) -> Option<&[f64]> {
        self.tpc.as_deref()
    }

    pub fn disagreement(&self) -> Disagreement {
        self.disagreement
    }

    pub fn users(&self) -> usize {
        self.channels.users()
    }

    pub fn bins(&self) -> usize {
        self.channels.bins()
    }

    /// True when every total-power limit is strictly below the mask total.
    pub fn tpc_is_tight(&self) -> bool {
        self.tpc.as_ref().is_some_and(|limits| {
            limits
                .iter()
                .enumerate()
                .all(|(i, &p)| p < self.mask.total(i))
        })
    }

    /// Same game with a different total-power vector (or none).
    pub fn with_tpc(&self, tpc: Option<Vec<f64>>) -> Result<Self> {
        let disagreement = if tpc.is_some() {
            Disagreement::Origin
        } else {
            self.disagreement
        };
        Self::new(self.channels.clone(), self.mask.clone(), tpc, disagreement)
    }

    /// Sub-game on the listed bins, in the listed order.
    pub fn restrict_bins(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(NbError::InvalidInstance("at least one bin is required".into()));
        }
        if let Some(&bad) = keep.iter().find(|&&k| k >= self.bins()) {
            return Err(NbError::InvalidInstance(format!("bin {bad} out of range")));
        }
        let mask = SpectralMask {
            pmax: self
                .mask
                .pmax
                .iter()
                .map(|row| keep.iter().map(|&k| row[k]).collect())
                .collect(),
        };
        Ok(Self {
            channels: self.channels.restrict(keep),
            mask,
            tpc: self.tpc.clone(),
            disagreement: self.disagreement,
        })
    }

    /// Rate user `i` gets on bin `k` alone, interference-free, at power `p`.
    pub fn exclusive_rate(&self, i: usize, k: usize, p: f64) -> Result<f64> {
        if i >= self.users() || k >= self.bins() {
            return Err(NbError::Domain(format!("user {i} / bin {k} out of range")));
        }
        let cap = self.mask.cap(i, k);
        if !(p.is_finite() && (0.0..=cap).contains(&p)) {
            return Err(NbError::Domain(format!(
                "power {p} outside [0, {cap}] for user {i} on bin {k}"
            )));
        }
        Ok((self.channels.snr_per_watt(i, k) * p).ln_1p())
    }

    /// `rates[i][k]` at full mask power.
    pub fn full_power_rates(&self) -> Vec<Vec<f64>> {
        (0..self.users())
            .map(|i| {
                (0..self.bins())
                    .map(|k| (self.channels.snr_per_watt(i, k) * self.mask.cap(i, k)).ln_1p())
                    .collect()
            })
            .collect()
    }

    /// Rates when every user transmits at full mask power on every bin and
    /// treats interference as noise.
    pub fn ne_rates(&self) -> Vec<f64> {
        let (m, n) = (self.users(), self.bins());
        (0..m)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let g = self.channels.gain(i, i, k);
                        let interference: f64 = (0..m)
                            .filter(|&j| j != i)
                            .map(|j| {
                                let c = self.channels.gain(i, j, k);
                                c * c * self.mask.cap(j, k)
                            })
                            .sum();
                        (g * g * self.mask.cap(i, k) / (self.channels.noise(i) + interference))
                            .ln_1p()
                    })
                    .sum()
            })
            .collect()
    }

    /// Utility vector of the disagreement point.
    pub fn disagreement_point(&self) -> Vec<f64> {
        match self.disagreement {
            Disagreement::NashEquilibrium => self.ne_rates(),
            Disagreement::Origin => vec![0.0; self.users()],
        }
    }
}

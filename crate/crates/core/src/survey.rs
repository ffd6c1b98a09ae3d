//! Offline radio-map model: raw RSS time series, time averaging,
//! per-AP reliability indicators and fingerprint stability.
//!
//! Indexing convention used throughout the crate: orientation `o`, reference
//! point `j`, access point `i`, sample `m`, all zero based. Reference points
//! additionally carry a one-based `id`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ORIENTATIONS: [u16; 4] = [0, 90, 180, 270];
pub const DEFAULT_GAMMA_DBM: f64 = -70.0;
pub const DEFAULT_ETA_FRACTION: f64 = 0.92;
pub const DEFAULT_MISSING_DBM: f64 = -100.0;
pub const DEFAULT_RELIABILITY_FRACTION: f64 = 0.9;

/// Dimensions and thresholds shared by the offline and online phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub num_aps: usize,
    pub num_rps: usize,
    pub samples_per_rp: usize,
    /// Device headings in degrees, in survey order.
    pub orientations: Vec<u16>,
    /// RSS threshold `γ` in dBm above which a reading counts as reliable.
    pub reliability_threshold: f64,
    /// Cluster membership tightness `η` expressed as a fraction of `L`.
    pub cluster_threshold: f64,
    pub missing_sentinel: f64,
    /// Fraction of samples that must clear `γ` for an AP to be reliable.
    #[serde(default = "default_reliability_fraction")]
    pub reliability_fraction: f64,
}

fn default_reliability_fraction() -> f64 {
    DEFAULT_RELIABILITY_FRACTION
}

impl SurveyConfig {
    pub fn new(num_aps: usize, num_rps: usize, samples_per_rp: usize) -> Self {
        Self {
            num_aps,
            num_rps,
            samples_per_rp,
            orientations: DEFAULT_ORIENTATIONS.to_vec(),
            reliability_threshold: DEFAULT_GAMMA_DBM,
            cluster_threshold: DEFAULT_ETA_FRACTION,
            missing_sentinel: DEFAULT_MISSING_DBM,
            reliability_fraction: DEFAULT_RELIABILITY_FRACTION,
        }
    }

    pub fn num_orientations(&self) -> usize {
        self.orientations.len()
    }

    /// Structural checks. `M = 1` is accepted here (a single online row can be
    /// viewed as a one-sample survey); operations needing a variance reject it.
    pub fn validate(&self) -> Result<()> {
        if self.num_aps == 0 {
            return Err(Error::InvalidConfig("num_aps must be at least 1".into()));
        }
        if self.num_rps == 0 {
            return Err(Error::InvalidConfig("num_rps must be at least 1".into()));
        }
        if self.samples_per_rp == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                actual: 0,
            });
        }
        if self.orientations.is_empty() {
            return Err(Error::InvalidConfig("at least one orientation required".into()));
        }
        if !(self.missing_sentinel < self.reliability_threshold) {
            return Err(Error::InvalidConfig(format!(
                "missing sentinel {} must lie below the reliability threshold {}",
                self.missing_sentinel, self.reliability_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.reliability_fraction) {
            return Err(Error::InvalidConfig(
                "reliability_fraction must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cluster_threshold) {
            return Err(Error::InvalidConfig(
                "cluster_threshold (eta fraction) must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    /// One-based identifier.
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl ReferencePoint {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Raw survey: `M` RSS samples for every (orientation, RP, AP).
#[derive(Debug, Clone, PartialEq)]
pub struct RawRadioMap {
    config: SurveyConfig,
    rps: Vec<ReferencePoint>,
    /// Flattened `[o][j][i][m]`.
    samples: Vec<f64>,
}

impl RawRadioMap {
    pub fn new(config: SurveyConfig, rps: Vec<ReferencePoint>, samples: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if rps.len() != config.num_rps {
            return Err(Error::DimensionMismatch {
                expected: config.num_rps,
                actual: rps.len(),
                context: "reference point list",
            });
        }
        for (j, rp) in rps.iter().enumerate() {
            if rp.id != j + 1 {
                return Err(Error::InvalidConfig(format!(
                    "reference point ids must be contiguous from 1; position {} has id {}",
                    j, rp.id
                )));
            }
        }
        let expected =
            config.num_orientations() * config.num_rps * config.num_aps * config.samples_per_rp;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: samples.len(),
                context: "sample tensor",
            });
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Malformed(format!("non-finite RSS sample {bad}")));
        }
        Ok(Self {
            config,
            rps,
            samples,
        })
    }

    /// Builds a map from a closure evaluated at every `(o, j, i, m)`.
    pub fn from_fn(
        config: SurveyConfig,
        rps: Vec<ReferencePoint>,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(
            config.num_orientations() * config.num_rps * config.num_aps * config.samples_per_rp,
        );
        for o in 0..config.num_orientations() {
            for j in 0..config.num_rps {
                for i in 0..config.num_aps {
                    for m in 0..config.samples_per_rp {
                        samples.push(f(o, j, i, m));
                    }
                }
            }
        }
        Self::new(config, rps, samples)
    }

    pub fn config(&self) -> &SurveyConfig {
        &self.config
    }

    pub fn rps(&self) -> &[ReferencePoint] {
        &self.rps
    }

    /// The `M` samples recorded for `(o, j, i)`.
    pub fn series(&self, o: usize, j: usize, i: usize) -> &[f64] {
        let c = &self.config;
        let start = ((o * c.num_rps + j) * c.num_aps + i) * c.samples_per_rp;
        &self.samples[start..start + c.samples_per_rp]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Time-averaged fingerprints `ψ_j^{i,o}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedRadioMap {
    pub num_orientations: usize,
    pub num_rps: usize,
    pub num_aps: usize,
    /// Flattened `[o][j][i]`.
    psi: Vec<f64>,
}

impl AveragedRadioMap {
    pub fn from_parts(
        num_orientations: usize,
        num_rps: usize,
        num_aps: usize,
        psi: Vec<f64>,
    ) -> Result<Self> {
        let expected = num_orientations * num_rps * num_aps;
        if psi.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: psi.len(),
                context: "averaged radio map",
            });
        }
        Ok(Self {
            num_orientations,
            num_rps,
            num_aps,
            psi,
        })
    }

    /// Fingerprint (length `L`) of RP `j` at orientation `o`.
    pub fn fingerprint(&self, o: usize, j: usize) -> &[f64] {
        let start = (o * self.num_rps + j) * self.num_aps;
        &self.psi[start..start + self.num_aps]
    }

    pub fn value(&self, o: usize, j: usize, i: usize) -> f64 {
        self.psi[(o * self.num_rps + j) * self.num_aps + i]
    }
}

/// Reliability indicators `I_j^{i,o}` and the counts `|T_j^{i,o}|` behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityProfile {
    pub num_orientations: usize,
    pub num_rps: usize,
    pub num_aps: usize,
    counts: Vec<usize>,
    indicators: Vec<bool>,
}

impl ReliabilityProfile {
    /// Builds a profile directly from indicator bits laid out `[o][j][i]`.
    /// Counts are set to 1 for reliable and 0 for unreliable entries.
    pub fn from_indicators(
        num_orientations: usize,
        num_rps: usize,
        num_aps: usize,
        indicators: Vec<bool>,
    ) -> Result<Self> {
        let expected = num_orientations * num_rps * num_aps;
        if indicators.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: indicators.len(),
                context: "reliability indicators",
            });
        }
        let counts = indicators.iter().map(|&b| usize::from(b)).collect();
        Ok(Self {
            num_orientations,
            num_rps,
            num_aps,
            counts,
            indicators,
        })
    }

    pub fn count(&self, o: usize, j: usize, i: usize) -> usize {
        self.counts[(o * self.num_rps + j) * self.num_aps + i]
    }

    /// Indicator vector `I_j^o` (length `L`).
    pub fn indicators(&self, o: usize, j: usize) -> &[bool] {
        let start = (o * self.num_rps + j) * self.num_aps;
        &self.indicators[start..start + self.num_aps]
    }

    /// Reliable AP set `L_j^o`, ascending.
    pub fn reliable_set(&self, o: usize, j: usize) -> Vec<usize> {
        self.indicators(o, j)
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Fingerprint variances. `per_rp_variance` is `+∞` for an RP whose reliable
/// AP set is empty at that orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub num_orientations: usize,
    pub num_rps: usize,
    pub num_aps: usize,
    per_ap_variance: Vec<f64>,
    #[serde(with = "crate::io::infinite_as_null")]
    per_rp_variance: Vec<f64>,
}

impl StabilityProfile {
    /// Assembles a profile from per-RP variances only (used for clustering
    /// experiments that bypass the raw survey). Per-AP variances are zero.
    pub fn from_rp_variances(num_orientations: usize, num_rps: usize, per_rp: Vec<f64>) -> Result<Self> {
        if per_rp.len() != num_orientations * num_rps {
            return Err(Error::DimensionMismatch {
                expected: num_orientations * num_rps,
                actual: per_rp.len(),
                context: "per-RP variances",
            });
        }
        Ok(Self {
            num_orientations,
            num_rps,
            num_aps: 0,
            per_ap_variance: Vec::new(),
            per_rp_variance: per_rp,
        })
    }

    pub fn ap_variance(&self, o: usize, j: usize, i: usize) -> f64 {
        self.per_ap_variance[(o * self.num_rps + j) * self.num_aps + i]
    }

    pub fn rp_variance(&self, o: usize, j: usize) -> f64 {
        self.per_rp_variance[o * self.num_rps + j]
    }

    /// `Δ^o` over all RPs.
    pub fn orientation_profile(&self, o: usize) -> &[f64] {
        &self.per_rp_variance[o * self.num_rps..(o + 1) * self.num_rps]
    }

    pub fn has_ap_variances(&self) -> bool {
        !self.per_ap_variance.is_empty()
    }
}

/// A single online RSS vector `y` (length `L`, dBm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineMeasurement {
    pub rss: Vec<f64>,
}

impl OnlineMeasurement {
    pub fn new(rss: Vec<f64>) -> Self {
        Self { rss }
    }

    pub fn len(&self) -> usize {
        self.rss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss.is_empty()
    }
}

pub fn time_average(raw: &RawRadioMap) -> Result<AveragedRadioMap> {
    let c = raw.config();
    if c.samples_per_rp == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    let m = c.samples_per_rp as f64;
    let psi = raw
        .samples()
        .chunks_exact(c.samples_per_rp)
        .map(|s| s.iter().sum::<f64>() / m)
        .collect();
    AveragedRadioMap::from_parts(c.num_orientations(), c.num_rps, c.num_aps, psi)
}

/// Counts samples at or above `gamma` and derives the indicator bits using
/// the configured reliability fraction.
pub fn reliability_indicators(raw: &RawRadioMap, gamma: f64) -> ReliabilityProfile {
    let c = raw.config();
    let needed = c.reliability_fraction * c.samples_per_rp as f64;
    let counts: Vec<usize> = raw
        .samples()
        .chunks_exact(c.samples_per_rp)
        .map(|s| s.iter().filter(|&&v| v >= gamma).count())
        .collect();
    let indicators = counts
        .iter()
        .map(|&n| n as f64 >= needed - 1e-9)
        .collect();
    ReliabilityProfile {
        num_orientations: c.num_orientations(),
        num_rps: c.num_rps,
        num_aps: c.num_aps,
        counts,
        indicators,
    }
}

pub fn stability(raw: &RawRadioMap, rel: &ReliabilityProfile) -> Result<StabilityProfile> {
    let c = raw.config();
    if c.samples_per_rp < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: c.samples_per_rp,
        });
    }
    if rel.num_orientations != c.num_orientations()
        || rel.num_rps != c.num_rps
        || rel.num_aps != c.num_aps
    {
        return Err(Error::DimensionMismatch {
            expected: c.num_orientations() * c.num_rps * c.num_aps,
            actual: rel.num_orientations * rel.num_rps * rel.num_aps,
            context: "reliability profile vs radio map",
        });
    }
    let m = c.samples_per_rp as f64;
    let per_ap_variance: Vec<f64> = raw
        .samples()
        .chunks_exact(c.samples_per_rp)
        .map(|s| {
            let mean = s.iter().sum::<f64>() / m;
            s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        })
        .collect();

    let mut per_rp_variance = Vec::with_capacity(c.num_orientations() * c.num_rps);
    for o in 0..c.num_orientations() {
        for j in 0..c.num_rps {
            let base = (o * c.num_rps + j) * c.num_aps;
            let (sum, n) = rel
                .indicators(o, j)
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .fold((0.0, 0usize), |(s, n), (i, _)| (s + per_ap_variance[base + i], n + 1));
            per_rp_variance.push(if n == 0 { f64::INFINITY } else { sum / n as f64 });
        }
    }
    Ok(StabilityProfile {
        num_orientations: c.num_orientations(),
        num_rps: c.num_rps,
        num_aps: c.num_aps,
        per_ap_variance,
        per_rp_variance,
    })
}

/// Online indicator vector `I_y`: bit `i` set iff `y_i >= gamma`.
pub fn online_reliability(y: &[f64], num_aps: usize, gamma: f64) -> Result<Vec<bool>> {
    if y.len() != num_aps {
        return Err(Error::DimensionMismatch {
            expected: num_aps,
            actual: y.len(),
            context: "online measurement",
        });
    }
    Ok(y.iter().map(|&v| v >= gamma).collect())
}

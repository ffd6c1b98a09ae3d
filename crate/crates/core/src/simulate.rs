//! Synthetic survey generator: log-distance path loss with frozen log-normal
//! shadowing, per-sample temporal noise, a per-orientation body offset and a
//! detection floor, plus outlier injection for online fixes.
//!
//! Randomness comes from ChaCha8 seeded with the environment seed. Every
//! quantity draws from its own stream, so the value of, say, the shadowing
//! term for (AP 3, RP 17) is independent of the map size or of any other
//! draw. Stream ids (64 bit):
//!
//! | quantity                   | stream id                                  |
//! |----------------------------|--------------------------------------------|
//! | shadowing (AP i, RP j)     | `1 << 60 \| i << 32 \| j`                  |
//! | survey noise (o, RP j, AP i) | `2 << 60 \| o << 48 \| i << 32 \| j`     |
//! | online fix                 | `3 << 60`, seeded with the fix seed        |
//!
//! Normals are produced by Box–Muller from two 53-bit uniforms, keeping only
//! the cosine branch.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{
    OnlineMeasurement, RawRadioMap, ReferencePoint, SurveyConfig, DEFAULT_ETA_FRACTION,
    DEFAULT_GAMMA_DBM, DEFAULT_MISSING_DBM, DEFAULT_ORIENTATIONS,
};

const STREAM_SHADOW: u64 = 1 << 60;
const STREAM_SURVEY: u64 = 2 << 60;
const STREAM_ONLINE: u64 = 3 << 60;

/// Seedable normal source with explicit stream selection.
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Floor extent in feet.
    pub width: f64,
    pub height: f64,
    pub grid_spacing: f64,
    pub grid_columns: usize,
    pub grid_rows: usize,
    /// Position of the first reference point.
    pub grid_origin: (f64, f64),
    pub ap_positions: Vec<(f64, f64)>,
    /// Transmit power `P0` in dBm measured at `reference_distance` feet.
    pub tx_power: f64,
    pub reference_distance: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma: f64,
    pub temporal_sigma: f64,
    /// dB offset added at each orientation.
    pub orientation_bias: Vec<f64>,
    pub orientations: Vec<u16>,
    /// Readings below this level are reported missing.
    pub detection_floor: f64,
    pub missing_sentinel: f64,
    pub samples_per_rp: usize,
    pub reliability_threshold: f64,
    pub cluster_threshold: f64,
    pub seed: u64,
}

impl Default for EnvironmentSpec {
    /// A 300 ft × 35 ft office floor surveyed along its corridor: two rows of
    /// 96 reference points on a 3 ft grid (192 RPs), 100 samples each at four
    /// orientations, 20 APs staggered along both walls.
    fn default() -> Self {
        let width = 300.0;
        let height = 35.0;
        let num_aps = 20;
        let ap_positions = (0..num_aps)
            .map(|i| {
                let x = width * (i as f64 + 0.5) / num_aps as f64;
                let y = if i % 2 == 0 { 0.25 * height } else { 0.75 * height };
                (x, y)
            })
            .collect();
        Self {
            width,
            height,
            grid_spacing: 3.0,
            grid_columns: 96,
            grid_rows: 2,
            grid_origin: (7.5, 16.0),
            ap_positions,
            tx_power: -30.0,
            reference_distance: 3.0,
            path_loss_exponent: 3.0,
            shadowing_sigma: 4.0,
            temporal_sigma: 2.0,
            orientation_bias: vec![0.0, -2.0, -4.0, -2.0],
            orientations: DEFAULT_ORIENTATIONS.to_vec(),
            detection_floor: -95.0,
            missing_sentinel: DEFAULT_MISSING_DBM,
            samples_per_rp: 100,
            reliability_threshold: DEFAULT_GAMMA_DBM,
            cluster_threshold: DEFAULT_ETA_FRACTION,
            seed: 7,
        }
    }
}

impl EnvironmentSpec {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_rps(&self) -> usize {
        self.grid_columns * self.grid_rows
    }

    pub fn validate(&self) -> Result<()> {
        if self.ap_positions.is_empty() {
            return Err(Error::Empty("access point list"));
        }
        if !(self.grid_spacing > 0.0) || self.grid_columns == 0 || self.grid_rows == 0 {
            return Err(Error::InvalidConfig("grid must have positive spacing and size".into()));
        }
        if !(self.shadowing_sigma >= 0.0 && self.temporal_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be non-negative".into()));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::InvalidConfig("reference distance must be positive".into()));
        }
        if self.orientation_bias.len() != self.orientations.len() {
            return Err(Error::InvalidConfig(
                "one orientation bias per orientation required".into(),
            ));
        }
        let (x_max, y_max) = self.rp_position(self.num_rps() - 1);
        let slack = self.grid_spacing;
        if self.grid_origin.0 < -slack
            || self.grid_origin.1 < -slack
            || x_max > self.width + slack
            || y_max > self.height + slack
        {
            return Err(Error::InvalidConfig("reference grid exceeds the floor area".into()));
        }
        Ok(())
    }

    /// RP `j` lies in row `j / columns`, column `j % columns`.
    pub fn rp_position(&self, j: usize) -> (f64, f64) {
        let col = j % self.grid_columns;
        let row = j / self.grid_columns;
        (
            self.grid_origin.0 + col as f64 * self.grid_spacing,
            self.grid_origin.1 + row as f64 * self.grid_spacing,
        )
    }

    pub fn reference_points(&self) -> Vec<ReferencePoint> {
        (0..self.num_rps())
            .map(|j| {
                let (x, y) = self.rp_position(j);
                ReferencePoint { id: j + 1, x, y }
            })
            .collect()
    }

    /// Bounding box of the reference grid, `(x_min, y_min, x_max, y_max)`.
    pub fn grid_bounds(&self) -> (f64, f64, f64, f64) {
        let (x1, y1) = self.rp_position(self.num_rps() - 1);
        (self.grid_origin.0, self.grid_origin.1, x1, y1)
    }

    pub fn survey_config(&self) -> SurveyConfig {
        SurveyConfig {
            num_aps: self.num_aps(),
            num_rps: self.num_rps(),
            samples_per_rp: self.samples_per_rp,
            orientations: self.orientations.clone(),
            reliability_threshold: self.reliability_threshold,
            cluster_threshold: self.cluster_threshold,
            missing_sentinel: self.missing_sentinel,
            reliability_fraction: crate::survey::DEFAULT_RELIABILITY_FRACTION,
        }
    }

    /// Distance-dependent part of the model: `P0 − 10·n·log10(max(d, d0)/d0)`.
    pub fn path_loss_rss(&self, ap: usize, pos: (f64, f64)) -> f64 {
        let (ax, ay) = self.ap_positions[ap];
        let d = ((pos.0 - ax).powi(2) + (pos.1 - ay).powi(2)).sqrt();
        let d = d.max(self.reference_distance);
        self.tx_power - 10.0 * self.path_loss_exponent * (d / self.reference_distance).log10()
    }

    /// Frozen shadowing term for (AP, RP).
    pub fn shadowing(&self, ap: usize, rp: usize) -> f64 {
        if self.shadowing_sigma == 0.0 {
            return 0.0;
        }
        let stream = STREAM_SHADOW | (ap as u64) << 32 | rp as u64;
        self.shadowing_sigma * SimRng::new(self.seed, stream).normal()
    }

    /// Shadowing at an arbitrary point: bilinear interpolation of the
    /// per-RP values, clamped to the grid.
    pub fn shadowing_at(&self, ap: usize, pos: (f64, f64)) -> f64 {
        let locate = |v: f64, origin: f64, count: usize| -> (usize, usize, f64) {
            let f = ((v - origin) / self.grid_spacing).clamp(0.0, (count - 1) as f64);
            let lo = (f.floor() as usize).min(count - 1);
            let hi = (lo + 1).min(count - 1);
            (lo, hi, f - lo as f64)
        };
        let (c0, c1, tx) = locate(pos.0, self.grid_origin.0, self.grid_columns);
        let (r0, r1, ty) = locate(pos.1, self.grid_origin.1, self.grid_rows);
        let s = |r: usize, c: usize| self.shadowing(ap, r * self.grid_columns + c);
        let mut acc = 0.0;
        for (r, wy) in [(r0, 1.0 - ty), (r1, ty)] {
            for (c, wx) in [(c0, 1.0 - tx), (c1, tx)] {
                let w = wx * wy;
                if w != 0.0 {
                    acc += w * s(r, c);
                }
            }
        }
        acc
    }

    /// Noise-free RSS at `pos` and orientation index `o`.
    pub fn mean_rss(&self, ap: usize, pos: (f64, f64), o: usize) -> f64 {
        self.path_loss_rss(ap, pos) + self.shadowing_at(ap, pos) + self.orientation_bias[o]
    }

    fn detect(&self, v: f64) -> f64 {
        if v < self.detection_floor {
            self.missing_sentinel
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSurvey {
    pub map: RawRadioMap,
    pub env: EnvironmentSpec,
}

pub fn generate_survey(env: &EnvironmentSpec) -> Result<SyntheticSurvey> {
    env.validate()?;
    let l = env.num_aps();
    let n = env.num_rps();
    let rps = env.reference_points();
    let shadow: Vec<f64> = (0..l)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| env.shadowing(i, j))
        .collect();

    let m = env.samples_per_rp;
    let mut samples = Vec::with_capacity(env.orientations.len() * n * l * m);
    for o in 0..env.orientations.len() {
        for (j, rp) in rps.iter().enumerate() {
            for i in 0..l {
                let mean =
                    env.path_loss_rss(i, rp.position()) + shadow[i * n + j] + env.orientation_bias[o];
                let stream = STREAM_SURVEY | (o as u64) << 48 | (i as u64) << 32 | j as u64;
                let mut rng = SimRng::new(env.seed, stream);
                for _ in 0..m {
                    let v = if env.temporal_sigma > 0.0 {
                        mean + env.temporal_sigma * rng.normal()
                    } else {
                        mean
                    };
                    samples.push(env.detect(v));
                }
            }
        }
    }
    let map = RawRadioMap::new(env.survey_config(), rps, samples)?;
    Ok(SyntheticSurvey {
        map,
        env: env.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierMode {
    Bias,
    Dropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub ap_indices: Vec<usize>,
    pub mode: OutlierMode,
    pub bias_magnitude: f64,
}

impl OutlierSpec {
    pub fn none() -> Self {
        Self {
            ap_indices: Vec::new(),
            mode: OutlierMode::Bias,
            bias_magnitude: 0.0,
        }
    }

    pub fn bias(ap_indices: Vec<usize>, magnitude: f64) -> Self {
        Self {
            ap_indices,
            mode: OutlierMode::Bias,
            bias_magnitude: magnitude,
        }
    }

    pub fn dropout(ap_indices: Vec<usize>) -> Self {
        Self {
            ap_indices,
            mode: OutlierMode::Dropout,
            bias_magnitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineTruth {
    pub position: (f64, f64),
    pub orientation: usize,
    /// Reading before outlier injection (after noise and detection).
    pub clean_rss: Vec<f64>,
    pub outlier_aps: Vec<usize>,
}

/// Draws one online RSS vector at `position`. The device orientation is
/// drawn from `seed`.
pub fn generate_online(
    env: &EnvironmentSpec,
    position: (f64, f64),
    outliers: &OutlierSpec,
    seed: u64,
) -> Result<(OnlineMeasurement, OnlineTruth)> {
    env.validate()?;
    if let Some(&bad) = outliers.ap_indices.iter().find(|&&i| i >= env.num_aps()) {
        return Err(Error::InvalidConfig(format!("outlier AP index {bad} out of range")));
    }
    let mut rng = SimRng::new(seed, STREAM_ONLINE);
    let orientation = rng.below(env.orientations.len());
    let mut model = Vec::with_capacity(env.num_aps());
    for i in 0..env.num_aps() {
        let mut v = env.mean_rss(i, position, orientation);
        if env.temporal_sigma > 0.0 {
            v += env.temporal_sigma * rng.normal();
        }
        model.push(v);
    }
    let clean: Vec<f64> = model.iter().map(|&v| env.detect(v)).collect();
    let mut rss = clean.clone();
    for &i in &outliers.ap_indices {
        rss[i] = match outliers.mode {
            OutlierMode::Bias => env.detect(model[i] + outliers.bias_magnitude),
            OutlierMode::Dropout => env.missing_sentinel,
        };
    }
    Ok((
        OnlineMeasurement::new(rss),
        OnlineTruth {
            position,
            orientation,
            clean_rss: clean,
            outlier_aps: outliers.ap_indices.clone(),
        },
    ))
}

/// Uniform random test positions over the reference grid's bounding box.
pub fn random_positions(env: &EnvironmentSpec, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let (x0, y0, x1, y1) = env.grid_bounds();
    let mut rng = SimRng::new(seed, 4 << 60);
    (0..count)
        .map(|_| (x0 + (x1 - x0) * rng.uniform(), y0 + (y1 - y0) * rng.uniform()))
        .collect()
}

/// A clean or contaminated test set drawn from one seed: positions, then
/// one online fix per position seeded by [`fix_seed`].
pub fn generate_test_set(
    env: &EnvironmentSpec,
    count: usize,
    outliers: &OutlierSpec,
    seed: u64,
) -> Result<Vec<(OnlineMeasurement, OnlineTruth)>> {
    random_positions(env, count, seed)
        .into_iter()
        .enumerate()
        .map(|(k, pos)| generate_online(env, pos, outliers, fix_seed(seed, k)))
        .collect()
}

pub fn fix_seed(seed: u64, k: usize) -> u64 {
    seed ^ ((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

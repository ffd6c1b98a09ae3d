//! Reference estimators: weighted k-nearest neighbours and a Gaussian-kernel
//! weighted centroid.
//!
//! Both compare the full `L`-vector, missing readings included at the
//! sentinel value. The distance to an RP is the smallest distance over its
//! orientation fingerprints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{AveragedRadioMap, OnlineMeasurement, ReferencePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub k: usize,
    pub kernel_sigma: f64,
    pub distance_floor: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k: 10,
            kernel_sigma: 5.0,
            distance_floor: 1e-6,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.kernel_sigma > 0.0) || !(self.distance_floor > 0.0) {
            return Err(Error::InvalidConfig(
                "kernel sigma and distance floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineEstimate {
    pub x: f64,
    pub y: f64,
    /// KDE only: every kernel weight underflowed and the nearest RP was used.
    pub fallback: bool,
}

impl BaselineEstimate {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// `min_o ‖y − ψ_j^o‖₂` for every RP.
pub fn rp_distances(y: &OnlineMeasurement, avg: &AveragedRadioMap) -> Result<Vec<f64>> {
    if y.len() != avg.num_aps {
        return Err(Error::DimensionMismatch {
            expected: avg.num_aps,
            actual: y.len(),
            context: "online measurement length",
        });
    }
    Ok((0..avg.num_rps)
        .map(|j| {
            (0..avg.num_orientations)
                .map(|o| {
                    avg.fingerprint(o, j)
                        .iter()
                        .zip(&y.rss)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

fn centroid(rps: &[ReferencePoint], weights: impl Iterator<Item = (usize, f64)>) -> (f64, f64) {
    let (mut x, mut y, mut total) = (0.0, 0.0, 0.0);
    for (j, w) in weights {
        x += w * rps[j].x;
        y += w * rps[j].y;
        total += w;
    }
    (x / total, y / total)
}

pub fn wknn(
    y: &OnlineMeasurement,
    avg: &AveragedRadioMap,
    rps: &[ReferencePoint],
    cfg: &BaselineConfig,
) -> Result<BaselineEstimate> {
    cfg.validate()?;
    if cfg.k > avg.num_rps {
        return Err(Error::InvalidConfig(format!(
            "k = {} exceeds the {} reference points",
            cfg.k, avg.num_rps
        )));
    }
    let d = rp_distances(y, avg)?;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let (x, yy) = centroid(
        rps,
        order[..cfg.k]
            .iter()
            .map(|&j| (j, 1.0 / d[j].max(cfg.distance_floor))),
    );
    Ok(BaselineEstimate {
        x,
        y: yy,
        fallback: false,
    })
}

pub fn kde(
    y: &OnlineMeasurement,
    avg: &AveragedRadioMap,
    rps: &[ReferencePoint],
    cfg: &BaselineConfig,
) -> Result<BaselineEstimate> {
    cfg.validate()?;
    let d = rp_distances(y, avg)?;
    let two_s2 = 2.0 * cfg.kernel_sigma * cfg.kernel_sigma;
    let w: Vec<f64> = d.iter().map(|dj| (-dj * dj / two_s2).exp()).collect();
    if w.iter().all(|&v| v == 0.0) {
        let nearest = (0..d.len())
            .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
            .ok_or(Error::Empty("reference point set"))?;
        return Ok(BaselineEstimate {
            x: rps[nearest].x,
            y: rps[nearest].y,
            fallback: true,
        });
    }
    let (x, yy) = centroid(rps, w.iter().copied().enumerate());
    Ok(BaselineEstimate {
        x,
        y: yy,
        fallback: false,
    })
}

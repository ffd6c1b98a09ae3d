//! Online access-point selection by the Fisher criterion over the ROI.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::roi::ModifiedRadioMap;
use crate::survey::{AveragedRadioMap, RawRadioMap, StabilityProfile};

/// Floor applied to the within-RP scatter so noiseless maps stay finite.
pub const FISHER_DENOMINATOR_FLOOR: f64 = 1e-9;
pub const DEFAULT_SELECTED_APS: usize = 10;

/// Fisher score of every AP at orientation `o`, restricted to the RPs in
/// `roi`. Works directly from the raw samples.
pub fn fisher_scores(
    raw: &RawRadioMap,
    avg: &AveragedRadioMap,
    roi: &[usize],
    o: usize,
) -> Result<Vec<f64>> {
    if roi.is_empty() {
        return Err(Error::Empty("region of interest"));
    }
    let c = raw.config();
    if c.samples_per_rp < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: c.samples_per_rp,
        });
    }
    let scale = 1.0 / (c.samples_per_rp as f64 - 1.0);
    Ok((0..c.num_aps)
        .map(|i| {
            let mean = roi.iter().map(|&j| avg.value(o, j, i)).sum::<f64>() / roi.len() as f64;
            let between: f64 = roi.iter().map(|&j| (avg.value(o, j, i) - mean).powi(2)).sum();
            let mut within = 0.0;
            for &j in roi {
                let psi = avg.value(o, j, i);
                for &r in raw.series(o, j, i) {
                    within += (r - psi).powi(2);
                }
            }
            between / (scale * within).max(FISHER_DENOMINATOR_FLOOR)
        })
        .collect())
}

/// Same score computed from the stored unbiased per-AP variances, which
/// equal the scaled within-RP scatter of each RP. Lets the online phase run
/// without the raw samples.
pub fn fisher_scores_from_stability(
    avg: &AveragedRadioMap,
    stab: &StabilityProfile,
    roi: &[usize],
    o: usize,
) -> Result<Vec<f64>> {
    if roi.is_empty() {
        return Err(Error::Empty("region of interest"));
    }
    if !stab.has_ap_variances() {
        return Err(Error::InvalidConfig(
            "stability profile carries no per-AP variances".into(),
        ));
    }
    let inv = 1.0 / roi.len() as f64;
    Ok((0..avg.num_aps)
        .map(|i| {
            let mean = roi.iter().map(|&j| avg.value(o, j, i)).sum::<f64>() * inv;
            let between: f64 = roi.iter().map(|&j| (avg.value(o, j, i) - mean).powi(2)).sum();
            let within: f64 = roi.iter().map(|&j| stab.ap_variance(o, j, i)).sum();
            between / within.max(FISHER_DENOMINATOR_FLOOR)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApSelection {
    pub num_aps: usize,
    pub per_orientation_scores: Vec<Vec<f64>>,
    pub averaged_scores: Vec<f64>,
    /// Selected AP indices in selection order (descending score).
    pub selected: Vec<usize>,
}

impl ApSelection {
    /// `Φ` as a dense 0/1 matrix, `|L̃| × L`.
    pub fn selection_matrix(&self) -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(self.selected.len(), self.num_aps);
        for (row, &i) in self.selected.iter().enumerate() {
            phi[(row, i)] = 1.0;
        }
        phi
    }

    /// `Φ v` for an `L`-vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.num_aps {
            return Err(Error::DimensionMismatch {
                expected: self.num_aps,
                actual: v.len(),
                context: "AP selection input",
            });
        }
        Ok(self.selected.iter().map(|&i| v[i]).collect())
    }

    /// `Φ Ψ̃`.
    pub fn apply_to_map(&self, map: &ModifiedRadioMap) -> Result<DMatrix<f64>> {
        if map.num_aps != self.num_aps {
            return Err(Error::DimensionMismatch {
                expected: self.num_aps,
                actual: map.num_aps,
                context: "AP selection vs modified radio map",
            });
        }
        Ok(DMatrix::from_fn(self.selected.len(), map.num_columns(), |r, v| {
            map.column(v)[self.selected[r]]
        }))
    }
}

/// Averages per-orientation scores and keeps the `count` best APs
/// (ties go to the lower AP index).
pub fn select_aps(per_orientation: Vec<Vec<f64>>, count: usize) -> Result<ApSelection> {
    let num_aps = per_orientation
        .first()
        .map(Vec::len)
        .ok_or(Error::Empty("orientation score list"))?;
    if per_orientation.iter().any(|s| s.len() != num_aps) {
        return Err(Error::Malformed("score vectors differ in length".into()));
    }
    if count > num_aps {
        return Err(Error::TooManyAps {
            requested: count,
            available: num_aps,
        });
    }
    let norm = 1.0 / per_orientation.len() as f64;
    let averaged: Vec<f64> = (0..num_aps)
        .map(|i| per_orientation.iter().map(|s| s[i]).sum::<f64>() * norm)
        .collect();
    let mut order: Vec<usize> = (0..num_aps).collect();
    order.sort_by(|&a, &b| averaged[b].total_cmp(&averaged[a]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(ApSelection {
        num_aps,
        per_orientation_scores: per_orientation,
        averaged_scores: averaged,
        selected: order,
    })
}

//! Online coarse localization: pick the closest cluster head per orientation
//! and gather the fingerprints of the region of interest.

use serde::Serialize;

use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::survey::{AveragedRadioMap, ReliabilityProfile};

/// Tag identifying which RP and orientation a column of `Ψ̃` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnTag {
    pub rp: usize,
    pub orientation: usize,
}

/// Winner and included clusters at one orientation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoiTrace {
    pub orientation: usize,
    pub winner: usize,
    pub winner_distance: usize,
    /// Winner plus every cluster sharing an RP with it, ascending.
    pub included: Vec<usize>,
}

/// Fingerprint matrix restricted to the region of interest, `L` rows by one
/// column per selected (RP, orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedRadioMap {
    pub num_aps: usize,
    pub tags: Vec<ColumnTag>,
    /// Column-major `L × tags.len()`.
    values: Vec<f64>,
    /// Union of selected RPs, ascending.
    pub roi_rps: Vec<usize>,
    pub trace: Vec<RoiTrace>,
}

impl ModifiedRadioMap {
    pub fn num_columns(&self) -> usize {
        self.tags.len()
    }

    pub fn column(&self, v: usize) -> &[f64] {
        &self.values[v * self.num_aps..(v + 1) * self.num_aps]
    }
}

pub fn select_roi(
    online_bits: &[bool],
    clusters: &[ClusterSet],
    rel: &ReliabilityProfile,
    avg: &AveragedRadioMap,
) -> Result<ModifiedRadioMap> {
    if online_bits.len() != avg.num_aps {
        return Err(Error::DimensionMismatch {
            expected: avg.num_aps,
            actual: online_bits.len(),
            context: "online reliability vector",
        });
    }
    let empty: Vec<usize> = clusters
        .iter()
        .filter(|c| c.is_empty())
        .map(|c| c.orientation)
        .collect();
    if clusters.is_empty() {
        return Err(Error::Empty("cluster set"));
    }
    if !empty.is_empty() {
        return Err(Error::EmptyRoi(empty));
    }

    let mut tags = Vec::new();
    let mut values = Vec::new();
    let mut trace = Vec::with_capacity(clusters.len());
    let mut in_roi = vec![false; avg.num_rps];

    for cs in clusters {
        let o = cs.orientation;
        let distance = |k: usize| {
            rel.indicators(o, cs.clusters[k].head)
                .iter()
                .zip(online_bits)
                .filter(|(a, b)| a != b)
                .count()
        };
        let (winner, winner_distance) = (0..cs.len())
            .map(|k| (k, distance(k)))
            .min_by_key(|&(k, d)| (d, k))
            .expect("non-empty cluster set");

        let mut included: Vec<usize> = cs.clusters[winner]
            .members
            .iter()
            .flat_map(|&j| cs.membership[j].iter().copied())
            .collect();
        included.sort_unstable();
        included.dedup();

        let mut selected = vec![false; avg.num_rps];
        for &k in &included {
            for &j in &cs.clusters[k].members {
                selected[j] = true;
            }
        }
        for (j, _) in selected.iter().enumerate().filter(|(_, &s)| s) {
            tags.push(ColumnTag { rp: j, orientation: o });
            values.extend_from_slice(avg.fingerprint(o, j));
            in_roi[j] = true;
        }
        trace.push(RoiTrace {
            orientation: o,
            winner,
            winner_distance,
            included,
        });
    }

    let roi_rps = in_roi
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| b.then_some(j))
        .collect();
    Ok(ModifiedRadioMap {
        num_aps: avg.num_aps,
        tags,
        values,
        roi_rps,
        trace,
    })
}

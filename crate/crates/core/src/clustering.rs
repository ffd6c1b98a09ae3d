//! Offline graph clustering of reference points.
//!
//! RPs are nodes; edge weights are inverse Hamming distances between their
//! reliability vectors. Clusters are grown around seeds taken in ascending RP
//! order, followers may belong to several clusters, and each cluster head is
//! finally re-elected as the member with the smallest fingerprint variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{ReliabilityProfile, StabilityProfile};

pub fn hamming_distance(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
            context: "reliability vectors",
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Pairwise Hamming distances and similarities at one orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub orientation: usize,
    pub num_rps: usize,
    pub num_aps: usize,
    /// Similarity assigned to zero-distance pairs.
    pub lambda_cap: f64,
    hamming: Vec<usize>,
    similarity: Vec<f64>,
}

impl SimilarityGraph {
    pub fn hamming(&self, j: usize, k: usize) -> usize {
        self.hamming[j * self.num_rps + k]
    }

    /// `s(j, k)`; the diagonal is not part of the graph and reads as 0.
    pub fn similarity(&self, j: usize, k: usize) -> f64 {
        self.similarity[j * self.num_rps + k]
    }
}

pub fn build_similarity_graph(rel: &ReliabilityProfile, o: usize) -> SimilarityGraph {
    let n = rel.num_rps;
    let lambda_cap = rel.num_aps as f64 + 1.0;
    let mut hamming = vec![0; n * n];
    let mut similarity = vec![0.0; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let h = rel
                .indicators(o, j)
                .iter()
                .zip(rel.indicators(o, k))
                .filter(|(a, b)| a != b)
                .count();
            let s = if h == 0 { lambda_cap } else { 1.0 / h as f64 };
            hamming[j * n + k] = h;
            hamming[k * n + j] = h;
            similarity[j * n + k] = s;
            similarity[k * n + j] = s;
        }
    }
    SimilarityGraph {
        orientation: o,
        num_rps: n,
        num_aps: rel.num_aps,
        lambda_cap,
        hamming,
        similarity,
    }
}

/// Largest Hamming distance admitted by the membership test: reliability
/// vectors must agree on at least `eta_fraction` of their `L` bits.
pub fn membership_radius(eta_fraction: f64, num_aps: usize) -> usize {
    ((1.0 - eta_fraction) * num_aps as f64 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// RP the cluster was grown from; membership was tested against it.
    pub seed: usize,
    /// Re-elected head: minimum per-RP variance among members.
    pub head: usize,
    /// All members including the head, ascending.
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn followers(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied().filter(move |&j| j != self.head)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.members.binary_search(&j).is_ok()
    }
}

/// Overlapping clusters for one orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub orientation: usize,
    pub max_hamming: usize,
    pub clusters: Vec<Cluster>,
    /// For every RP, the indices of the clusters containing it.
    pub membership: Vec<Vec<usize>>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn build_clusters(
    graph: &SimilarityGraph,
    stab: &StabilityProfile,
    eta_fraction: f64,
) -> Result<ClusterSet> {
    let n = graph.num_rps;
    if n == 0 {
        return Err(Error::Empty("reference point set"));
    }
    if stab.num_rps != n || graph.orientation >= stab.num_orientations {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: stab.num_rps,
            context: "stability profile vs similarity graph",
        });
    }
    let radius = membership_radius(eta_fraction, graph.num_aps);
    let variance = stab.orientation_profile(graph.orientation);

    // Followers are drawn from every RP, not only the remaining candidates,
    // so an RP already covered can still join later clusters.
    let mut candidate = vec![true; n];
    let mut clusters = Vec::new();
    while let Some(seed) = candidate.iter().position(|&c| c) {
        let members: Vec<usize> = (0..n)
            .filter(|&j| j == seed || graph.hamming(j, seed) <= radius)
            .collect();
        for &j in &members {
            candidate[j] = false;
        }
        clusters.push(Cluster {
            seed,
            head: seed,
            members,
        });
    }

    for c in &mut clusters {
        // strict `<` keeps the lowest id on ties; members are ascending
        let mut best = c.members[0];
        for &j in &c.members[1..] {
            if variance[j] < variance[best] {
                best = j;
            }
        }
        c.head = best;
    }

    let mut membership = vec![Vec::new(); n];
    for (k, c) in clusters.iter().enumerate() {
        for &j in &c.members {
            membership[j].push(k);
        }
    }

    Ok(ClusterSet {
        orientation: graph.orientation,
        max_hamming: radius,
        clusters,
        membership,
    })
}

/// Clusters every orientation of a profile.
pub fn cluster_all(
    rel: &ReliabilityProfile,
    stab: &StabilityProfile,
    eta_fraction: f64,
) -> Result<Vec<ClusterSet>> {
    (0..rel.num_orientations)
        .map(|o| build_clusters(&build_similarity_graph(rel, o), stab, eta_fraction))
        .collect()
}

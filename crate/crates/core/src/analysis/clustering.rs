//! DBSCAN and cluster-vs-label scoring.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 0.5;
/// Neighborhood size (the point itself included) that makes a point core.
pub const DEFAULT_MIN_PTS: usize = 5;

/// Cluster assignment per point; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<Option<usize>>,
    n_clusters: usize,
}

impl Clustering {
    pub fn from_assignment(assignment: Vec<Option<usize>>) -> Self {
        let n_clusters = assignment.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
        Clustering { assignment, n_clusters }
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_noise(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(cluster))
            .map(|(i, _)| i)
            .collect()
    }

    /// Most frequent ground-truth label in each cluster; ties go to the lower label.
    pub fn majority_labels(&self, labels: &[usize], n_classes: usize) -> Vec<usize> {
        let mut counts = vec![vec![0usize; n_classes]; self.n_clusters];
        for (a, &l) in self.assignment.iter().zip(labels) {
            if let Some(c) = a {
                counts[*c][l] += 1;
            }
        }
        counts
            .iter()
            .map(|row| {
                let mut best = 0;
                for (l, &n) in row.iter().enumerate() {
                    if n > row[best] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    /// Clusters whose majority label holds more than half of their members.
    pub fn majority_pure_labels(&self, labels: &[usize], n_classes: usize) -> Vec<usize> {
        let majority = self.majority_labels(labels, n_classes);
        let mut out: Vec<usize> = (0..self.n_clusters)
            .filter(|&c| {
                let members = self.members(c);
                let hits = members.iter().filter(|&&i| labels[i] == majority[c]).count();
                2 * hits > members.len()
            })
            .map(|c| majority[c])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Density-based clustering with Euclidean `eps`-neighborhoods.
///
/// A point is core when its neighborhood, itself included, holds at least
/// `min_pts` points. Points are scanned in index order; each unassigned core
/// point seeds a cluster that is expanded breadth-first, so a border point
/// joins the earliest cluster that reaches it.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Result<Clustering> {
    if !(eps > 0.0) {
        return Err(Error::config("eps", "must be positive"));
    }
    if min_pts == 0 {
        return Err(Error::config("min_pts", "must be at least 1"));
    }
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let p = points[i].as_ref();
            (0..n).filter(|&j| sq_dist(p, points[j].as_ref()) <= eps2).collect()
        })
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut queued = vec![false; n];
    let mut next_cluster = 0;
    let mut queue = VecDeque::new();
    for i in 0..n {
        if assignment[i].is_some() || !is_core[i] {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        assignment[i] = Some(cluster);
        queued[i] = true;
        queue.push_back(i);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if assignment[q].is_none() {
                    assignment[q] = Some(cluster);
                }
                if !queued[q] && assignment[q] == Some(cluster) {
                    queued[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(Clustering {
        assignment,
        n_clusters: next_cluster,
    })
}

/// Macro-averaged F1 over `n_classes` true labels.
///
/// Each clustered point predicts its cluster's majority label. Noise points
/// predict nothing: they count as false negatives for their true class.
pub fn cluster_f1(clustering: &Clustering, labels: &[usize], n_classes: usize) -> Result<f64> {
    if labels.len() != clustering.len() {
        return Err(Error::shape("labels", clustering.len(), labels.len()));
    }
    if n_classes == 0 {
        return Err(Error::config("n_classes", "must be at least 1"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::shape("label", n_classes, bad));
    }
    let majority = clustering.majority_labels(labels, n_classes);
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    for (a, &truth) in clustering.assignment.iter().zip(labels) {
        match a.map(|c| majority[c]) {
            Some(pred) if pred == truth => tp[truth] += 1,
            Some(pred) => {
                fp[pred] += 1;
                fneg[truth] += 1;
            }
            None => fneg[truth] += 1,
        }
    }
    let total: f64 = (0..n_classes)
        .map(|k| {
            if tp[k] == 0 {
                0.0
            } else {
                2.0 * tp[k] as f64 / (2 * tp[k] + fp[k] + fneg[k]) as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

//! Partitions of the observation set into auxiliary states.
//!
//! Auxiliary ids are canonical: clusters are numbered in order of their
//! smallest member, so two equal partitions always compare equal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ucrl::AuxEstimates;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Canonical component labels (ordered by smallest member).
    pub fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut root_label = vec![usize::MAX; n];
        let mut next = 0;
        (0..n)
            .map(|x| {
                let r = self.find(x);
                if root_label[r] == usize::MAX {
                    root_label[r] = next;
                    next += 1;
                }
                root_label[r]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clustering {
    num_obs: usize,
    assignment: Vec<usize>,
    num_aux: usize,
}

impl Clustering {
    /// Every observation in its own auxiliary state.
    pub fn identity(num_obs: usize) -> Self {
        Self {
            num_obs,
            assignment: (0..num_obs).collect(),
            num_aux: num_obs,
        }
    }

    /// Builds a clustering from any labelling, renumbering labels canonically.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self {
            num_obs: labels.len(),
            num_aux: map.len(),
            assignment,
        }
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_aux(&self) -> usize {
        self.num_aux
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn label(&self, obs: usize) -> usize {
        self.assignment[obs]
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_aux];
        for (y, &s) in self.assignment.iter().enumerate() {
            out[s].push(y);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.num_aux == self.num_obs
    }

    /// Whether every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Clustering) -> bool {
        if self.num_obs != coarser.num_obs {
            return false;
        }
        let mut image = vec![None; self.num_aux];
        self.assignment
            .iter()
            .zip(&coarser.assignment)
            .all(|(&fine, &coarse)| match image[fine] {
                None => {
                    image[fine] = Some(coarse);
                    true
                }
                Some(c) => c == coarse,
            })
    }

    /// Lifts a clustering of this clustering's auxiliary states to the observations.
    pub fn compose(&self, over_aux: &Clustering) -> Result<Clustering> {
        if over_aux.num_obs != self.num_aux {
            return Err(Error::Dimension(format!(
                "clustering over {} symbols applied to {} auxiliary states",
                over_aux.num_obs, self.num_aux
            )));
        }
        let labels: Vec<usize> = self
            .assignment
            .iter()
            .map(|&s| over_aux.assignment[s])
            .collect();
        Ok(Clustering::from_labels(&labels))
    }
}

/// Connected components of the hypergraph whose hyperedges are `sets`;
/// observations in no set stay singletons.
pub fn merge_overlapping<'a, I>(sets: I, num_obs: usize) -> Result<Clustering>
where
    I: IntoIterator<Item = &'a BTreeSet<usize>>,
{
    let mut dsu = DisjointSets::new(num_obs);
    for set in sets {
        if let Some(&bad) = set.iter().find(|&&y| y >= num_obs) {
            return Err(Error::OutOfRange {
                what: "observation",
                index: bad,
                size: num_obs,
            });
        }
        let mut it = set.iter();
        if let Some(&first) = it.next() {
            for &y in it {
                dsu.union(first, y);
            }
        }
    }
    Ok(Clustering::from_labels(&dsu.labels()))
}

/// Joins two clusterings over the same observations: the finest partition that
/// both refine.
pub fn merge_epochs(current: &Clustering, previous: &Clustering) -> Result<Clustering> {
    if current.num_obs != previous.num_obs {
        return Err(Error::Dimension(format!(
            "clusterings over {} and {} observations",
            current.num_obs, previous.num_obs
        )));
    }
    let sets: Vec<BTreeSet<usize>> = current
        .members()
        .into_iter()
        .chain(previous.members())
        .map(|m| m.into_iter().collect())
        .collect();
    merge_overlapping(&sets, current.num_obs)
}

/// Whether auxiliary states `s` and `t` have overlapping reward and transition
/// confidence sets for every action.
pub fn confidence_sets_overlap(est: &AuxEstimates, s: usize, t: usize) -> bool {
    (0..est.num_actions()).all(|a| {
        let dr = (est.reward_mean(s, a) - est.reward_mean(t, a)).abs();
        let dp: f64 = est
            .transition_row(s, a)
            .iter()
            .zip(est.transition_row(t, a))
            .map(|(p, q)| (p - q).abs())
            .sum();
        dr <= est.reward_radius(s, a) + est.reward_radius(t, a)
            && dp <= est.transition_radius(s, a) + est.transition_radius(t, a)
    })
}

/// Merges auxiliary states whose confidence sets overlap for every action.
///
/// Returns the coarser clustering only when it has exactly `x_known`
/// clusters; otherwise `None` and the caller keeps `clustering`.
pub fn minimal_clustering_step(
    clustering: &Clustering,
    estimates: &AuxEstimates,
    x_known: usize,
) -> Result<Option<Clustering>> {
    let s_count = clustering.num_aux();
    if estimates.num_states() != s_count {
        return Err(Error::Dimension(format!(
            "estimates cover {} auxiliary states, clustering has {}",
            estimates.num_states(),
            s_count
        )));
    }
    if x_known == 0 {
        return Err(Error::InvalidConfig("X must be ≥ 1".into()));
    }
    let mut dsu = DisjointSets::new(s_count);
    for s in 0..s_count {
        for t in (s + 1)..s_count {
            if confidence_sets_overlap(estimates, s, t) {
                dsu.union(s, t);
            }
        }
    }
    let over_aux = Clustering::from_labels(&dsu.labels());
    if over_aux.num_aux() != x_known {
        return Ok(None);
    }
    clustering.compose(&over_aux).map(Some)
}

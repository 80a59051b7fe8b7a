//! Feedback graphs over the action set.
//!
//! An edge `i -> j` means that playing `i` also reveals the loss of `j`.
//! Self-observation is implicit and never stored: every formula adds the
//! self term explicitly.

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest action count accepted by [`FeedbackGraph::independence_number_exact`].
pub const EXACT_INDEPENDENCE_MAX_ACTIONS: usize = 25;

/// Tolerance on `sum(pi) == 1` used by simplex checks.
pub const SIMPLEX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackGraph {
    num_actions: usize,
    undirected: bool,
    out_neighbors: Vec<FixedBitSet>,
    in_neighbors: Vec<FixedBitSet>,
}

/// Actions whose losses are revealed when `action` is played.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub action: usize,
    /// Sorted, always contains `action`.
    pub members: Vec<usize>,
}

impl ObservationSet {
    pub fn contains(&self, action: usize) -> bool {
        self.members.binary_search(&action).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl FeedbackGraph {
    fn empty(num_actions: usize, undirected: bool) -> Result<Self> {
        if num_actions == 0 {
            return Err(Error::InvalidGraph("graph needs at least one action".into()));
        }
        Ok(Self {
            num_actions,
            undirected,
            out_neighbors: vec![FixedBitSet::with_capacity(num_actions); num_actions],
            in_neighbors: vec![FixedBitSet::with_capacity(num_actions); num_actions],
        })
    }

    fn insert(&mut self, from: usize, to: usize) {
        self.out_neighbors[from].insert(to);
        self.in_neighbors[to].insert(from);
    }

    pub fn edgeless(num_actions: usize) -> Result<Self> {
        Self::empty(num_actions, true)
    }

    pub fn complete(num_actions: usize) -> Result<Self> {
        let mut g = Self::empty(num_actions, true)?;
        for i in 0..num_actions {
            for j in 0..num_actions {
                if i != j {
                    g.insert(i, j);
                }
            }
        }
        Ok(g)
    }

    /// Clique on the first `clique` actions followed by `isolated` isolated actions.
    pub fn complete_plus_isolated(clique: usize, isolated: usize) -> Result<Self> {
        let mut g = Self::empty(clique + isolated, true)?;
        for i in 0..clique {
            for j in 0..clique {
                if i != j {
                    g.insert(i, j);
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from zero-based edge pairs. Undirected graphs are
    /// symmetrized.
    pub fn from_edges(num_actions: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        let mut g = Self::empty(num_actions, !directed)?;
        for &(i, j) in edges {
            if i >= num_actions || j >= num_actions {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references an action outside 0..{num_actions}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!(
                    "self-loop on action {i}; self-observation is implicit"
                )));
            }
            g.insert(i, j);
            if !directed {
                g.insert(j, i);
            }
        }
        Ok(g)
    }

    pub fn erdos_renyi<R: Rng + ?Sized>(num_actions: usize, p: f64, directed: bool, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidGraph(format!("edge probability {p} outside [0, 1]")));
        }
        let mut g = Self::empty(num_actions, !directed)?;
        for i in 0..num_actions {
            let start = if directed { 0 } else { i + 1 };
            for j in start..num_actions {
                if i != j && rng.random::<f64>() < p {
                    g.insert(i, j);
                    if !directed {
                        g.insert(j, i);
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.num_actions && self.out_neighbors[from].contains(to)
    }

    pub fn out_neighbors(&self, action: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_neighbors[action].ones()
    }

    pub fn in_neighbors(&self, action: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_neighbors[action].ones()
    }

    pub fn edge_count(&self) -> usize {
        self.out_neighbors.iter().map(|s| s.count_ones(..)).sum()
    }

    /// All stored directed edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_actions)
            .flat_map(|i| self.out_neighbors[i].ones().map(move |j| (i, j)))
            .collect()
    }

    /// Stable 64-bit identifier of the edge structure (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.num_actions as u64);
        feed(u64::from(self.undirected));
        for (i, j) in self.edges() {
            feed(i as u64);
            feed(j as u64);
        }
        h
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions {
            return Err(Error::ActionOutOfRange {
                index: action,
                num_actions: self.num_actions,
            });
        }
        Ok(())
    }

    pub fn observation_set(&self, action: usize) -> Result<ObservationSet> {
        self.check_action(action)?;
        let mut members: Vec<usize> = self.out_neighbors[action].ones().collect();
        members.push(action);
        members.sort_unstable();
        Ok(ObservationSet { action, members })
    }

    /// Probability that each action's loss gets revealed when the played
    /// action is drawn from `pi`: own mass plus the mass of in-neighbors.
    pub fn observation_probabilities(&self, pi: &[f64]) -> Result<Vec<f64>> {
        if pi.len() != self.num_actions {
            return Err(Error::DimensionMismatch {
                expected: self.num_actions,
                actual: pi.len(),
            });
        }
        check_simplex(pi)?;
        Ok((0..self.num_actions)
            .map(|i| pi[i] + self.in_neighbors[i].ones().map(|j| pi[j]).sum::<f64>())
            .collect())
    }

    /// Neighborhoods of the undirected closure: `j` is adjacent to `i` when
    /// an edge exists in either direction.
    fn undirected_closure(&self) -> Vec<FixedBitSet> {
        (0..self.num_actions)
            .map(|i| {
                let mut s = self.out_neighbors[i].clone();
                s.union_with(&self.in_neighbors[i]);
                s
            })
            .collect()
    }

    /// Exact independence number by branch and bound. Two actions are
    /// adjacent when an edge joins them in either direction.
    pub fn independence_number_exact(&self) -> Result<usize> {
        if self.num_actions > EXACT_INDEPENDENCE_MAX_ACTIONS {
            return Err(Error::IndependenceTooLarge {
                num_actions: self.num_actions,
                max: EXACT_INDEPENDENCE_MAX_ACTIONS,
            });
        }
        let closed: Vec<u32> = self
            .undirected_closure()
            .iter()
            .enumerate()
            .map(|(i, s)| s.ones().fold(1u32 << i, |m, j| m | (1u32 << j)))
            .collect();
        let all = (1u32 << self.num_actions) - 1;
        let mut best = 0;
        max_independent(&closed, all, 0, &mut best);
        Ok(best as usize)
    }

    /// Upper bound on the independence number valid for any size: the
    /// smaller of a greedy clique cover count and `K` minus a greedy
    /// maximal matching.
    pub fn independence_number_greedy_bound(&self) -> usize {
        let adj = self.undirected_closure();
        let k = self.num_actions;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(adj[i].count_ones(..)), i));

        let mut covered = FixedBitSet::with_capacity(k);
        let mut cliques = 0;
        for &seed in &order {
            if covered.contains(seed) {
                continue;
            }
            cliques += 1;
            covered.insert(seed);
            let mut common = adj[seed].clone();
            for &v in &order {
                if !covered.contains(v) && common.contains(v) {
                    covered.insert(v);
                    common.intersect_with(&adj[v]);
                }
            }
        }

        let mut matched = FixedBitSet::with_capacity(k);
        let mut matching = 0;
        for &i in &order {
            if matched.contains(i) {
                continue;
            }
            if let Some(j) = adj[i].ones().find(|&j| !matched.contains(j)) {
                matched.insert(i);
                matched.insert(j);
                matching += 1;
            }
        }

        cliques.min(k - matching).max(1)
    }

    /// Exact value when affordable, otherwise the greedy upper bound.
    pub fn independence_number(&self) -> usize {
        self.independence_number_exact()
            .unwrap_or_else(|_| self.independence_number_greedy_bound())
    }

    /// Same action set with every edge removed.
    pub fn without_edges(&self) -> Self {
        Self::empty(self.num_actions, true).expect("num_actions is positive")
    }
}

fn max_independent(closed: &[u32], candidates: u32, size: u32, best: &mut u32) {
    if candidates == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + candidates.count_ones() <= *best {
        return;
    }
    let mut pivot = 0;
    let mut pivot_degree = u32::MAX;
    let mut rest = candidates;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let degree = (closed[v] & candidates).count_ones() - 1;
        if degree < pivot_degree {
            pivot = v;
            pivot_degree = degree;
        }
    }
    if pivot_degree <= 1 {
        // some maximum set always contains a vertex of degree at most one
        max_independent(closed, candidates & !closed[pivot], size + 1, best);
        return;
    }
    // a maximum set contains at least one member of the pivot's closed neighborhood
    let mut branch = closed[pivot] & candidates;
    while branch != 0 {
        let u = branch.trailing_zeros() as usize;
        branch &= branch - 1;
        max_independent(closed, candidates & !closed[u], size + 1, best);
    }
}

pub(crate) fn check_simplex(pi: &[f64]) -> Result<()> {
    if let Some((i, v)) = pi.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::NotASimplex(format!("entry {i} is {v}")));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotASimplex(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Graph literal as written in experiment configs. Action indices are
/// one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Edgeless,
    Complete,
    CompletePlusIsolated {
        clique: usize,
        isolated: usize,
    },
    Explicit {
        directed: bool,
        edges: Vec<[usize; 2]>,
    },
    ErdosRenyi {
        p: f64,
        directed: bool,
        #[serde(default)]
        per_round: bool,
    },
}

impl GraphSpec {
    /// True when the same graph is used on every round of a trial.
    pub fn is_time_invariant(&self) -> bool {
        !matches!(self, GraphSpec::ErdosRenyi { per_round: true, .. })
    }

    /// True when the graph is deterministic (does not consume randomness).
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, GraphSpec::ErdosRenyi { .. })
    }

    pub fn is_directed(&self) -> bool {
        match self {
            GraphSpec::Explicit { directed, .. } | GraphSpec::ErdosRenyi { directed, .. } => *directed,
            _ => false,
        }
    }

    pub fn validate(&self, num_actions: usize) -> Result<()> {
        match self {
            GraphSpec::CompletePlusIsolated { clique, isolated } if clique + isolated != num_actions => {
                Err(Error::InvalidGraph(format!(
                    "clique {clique} + isolated {isolated} does not match {num_actions} actions"
                )))
            }
            GraphSpec::Explicit { edges, .. } => {
                for e in edges {
                    if e[0] == 0 || e[1] == 0 || e[0] > num_actions || e[1] > num_actions {
                        return Err(Error::InvalidGraph(format!(
                            "edge [{}, {}] outside 1..={num_actions}",
                            e[0], e[1]
                        )));
                    }
                    if e[0] == e[1] {
                        return Err(Error::InvalidGraph(format!("self-loop on action {}", e[0])));
                    }
                }
                Ok(())
            }
            GraphSpec::ErdosRenyi { p, .. } if !(0.0..=1.0).contains(p) => {
                Err(Error::InvalidGraph(format!("edge probability {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Materializes the graph. `rng` is only consumed by random graphs.
    pub fn build<R: Rng + ?Sized>(&self, num_actions: usize, rng: &mut R) -> Result<FeedbackGraph> {
        self.validate(num_actions)?;
        match self {
            GraphSpec::Edgeless => FeedbackGraph::edgeless(num_actions),
            GraphSpec::Complete => FeedbackGraph::complete(num_actions),
            GraphSpec::CompletePlusIsolated { clique, isolated } => {
                FeedbackGraph::complete_plus_isolated(*clique, *isolated)
            }
            GraphSpec::Explicit { directed, edges } => {
                let zero_based: Vec<(usize, usize)> = edges.iter().map(|e| (e[0] - 1, e[1] - 1)).collect();
                FeedbackGraph::from_edges(num_actions, &zero_based, *directed)
            }
            GraphSpec::ErdosRenyi { p, directed, .. } => FeedbackGraph::erdos_renyi(num_actions, *p, *directed, rng),
        }
    }
}

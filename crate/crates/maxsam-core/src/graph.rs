//! Graph storage and the reciprocity decomposition of node pairs.

use crate::error::{Error, Result};

/// A simple graph with non-negative integer weights and zero diagonal.
///
/// Binary graphs restrict entries to {0,1}; undirected graphs keep the
/// entry matrix symmetric. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    weighted: bool,
    entries: Vec<u64>,
}

/// Split of one directed pair into reciprocated and non-reciprocated
/// weight: `recip = min(w_ij, w_ji)`, `right = w_ij - recip`,
/// `left = w_ji - recip`. At most one of `right`, `left` is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDecomposition {
    pub recip: u64,
    pub right: u64,
    pub left: u64,
}

impl Graph {
    /// Validates and wraps a dense row-major entry matrix.
    pub fn from_entries(n: usize, directed: bool, weighted: bool, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for n={n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0 {
                return Err(Error::SelfLoop { node: i });
            }
        }
        if !directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (entries[i * n + j], entries[j * n + i]);
                    if a != b {
                        return Err(Error::Asymmetric { i, j, w_ij: a, w_ji: b });
                    }
                }
            }
        }
        if !weighted {
            if let Some(pos) = entries.iter().position(|&w| w > 1) {
                return Err(Error::Constraint(format!(
                    "binary graph has entry {} > 1 at ({},{})",
                    entries[pos],
                    pos / n,
                    pos % n
                )));
            }
        }
        Ok(Graph { n, directed, weighted, entries })
    }

    /// Builds a graph from an edge iterator; undirected edges are mirrored.
    pub fn from_edges(
        n: usize,
        directed: bool,
        weighted: bool,
        edges: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut entries = vec![0u64; n * n];
        for (src, dst, w) in edges {
            if src >= n || dst >= n {
                return Err(Error::Dimension(format!(
                    "node id out of range: ({src},{dst}) with n={n}"
                )));
            }
            if src == dst {
                return Err(Error::SelfLoop { node: src });
            }
            entries[src * n + dst] = w;
            if !directed {
                entries[dst * n + src] = w;
            }
        }
        Graph::from_entries(n, directed, weighted, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn weighted(&self) -> bool {
        self.weighted
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Edge count: ordered pairs with nonzero weight for directed
    /// graphs, unordered for undirected ones.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.entries.iter().filter(|&&w| w > 0).count()
        } else {
            (0..self.n)
                .map(|i| ((i + 1)..self.n).filter(|&j| self.entry(i, j) > 0).count())
                .sum()
        }
    }

    /// Thresholds w > 0 to 1, dropping the weighted flag.
    pub fn binarize(&self) -> Graph {
        Graph {
            n: self.n,
            directed: self.directed,
            weighted: false,
            entries: self.entries.iter().map(|&w| u64::from(w > 0)).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<u64> {
        (0..self.n)
            .map(|i| self.row(i).iter().filter(|&&w| w > 0).count() as u64)
            .collect()
    }

    pub fn strengths(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                if !seen[j] && (self.entry(i, j) > 0 || self.entry(j, i) > 0) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Reciprocity decomposition of the ordered pair (i, j) of a directed
/// graph.
pub fn reciprocal_decompose(g: &Graph, i: usize, j: usize) -> Result<PairDecomposition> {
    if i == j {
        return Err(Error::SelfLoop { node: i });
    }
    if !g.directed() {
        return Err(Error::Incompatible(
            "reciprocity decomposition requires a directed graph".into(),
        ));
    }
    let w_ij = g.entry(i, j);
    let w_ji = g.entry(j, i);
    let recip = w_ij.min(w_ji);
    Ok(PairDecomposition { recip, right: w_ij - recip, left: w_ji - recip })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn directed_weighted(n: usize, edges: &[(usize, usize, u64)]) -> Graph {
        Graph::from_edges(n, true, true, edges.iter().copied()).unwrap()
    }

    #[test]
    fn rejects_self_loop() {
        let err = Graph::from_entries(2, false, false, vec![1, 1, 1, 0]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { node: 0 }));
    }

    #[test]
    fn rejects_asymmetric_undirected() {
        let err = Graph::from_entries(2, false, true, vec![0, 2, 3, 0]).unwrap_err();
        assert!(matches!(err, Error::Asymmetric { .. }));
    }

    #[test]
    fn rejects_binary_overflow() {
        let err = Graph::from_entries(2, true, false, vec![0, 2, 0, 0]).unwrap_err();
        assert!(matches!(err, Error::Constraint(_)));
    }

    #[test]
    fn decompose_weighted_pair() {
        let g = directed_weighted(2, &[(0, 1, 2), (1, 0, 3)]);
        let d = reciprocal_decompose(&g, 0, 1).unwrap();
        assert_eq!(d, PairDecomposition { recip: 2, right: 0, left: 1 });
        // reconstruction: w_ij = recip + right, w_ji = recip + left
        assert_eq!(d.recip + d.right, g.entry(0, 1));
        assert_eq!(d.recip + d.left, g.entry(1, 0));
        // at most one non-reciprocated direction
        assert_eq!(d.right * d.left, 0);
    }

    #[test]
    fn decompose_empty_and_binary_pairs() {
        let g = directed_weighted(3, &[]);
        let d = reciprocal_decompose(&g, 0, 2).unwrap();
        assert_eq!(d, PairDecomposition { recip: 0, right: 0, left: 0 });

        let g = Graph::from_edges(2, true, false, [(0, 1, 1), (1, 0, 1)]).unwrap();
        let d = reciprocal_decompose(&g, 0, 1).unwrap();
        assert_eq!(d, PairDecomposition { recip: 1, right: 0, left: 0 });
    }

    #[test]
    fn decompose_rejects_diagonal() {
        let g = directed_weighted(2, &[]);
        assert!(reciprocal_decompose(&g, 1, 1).is_err());
    }

    #[test]
    fn reconstruction_holds_on_random_entries() {
        // mixed-weight directed graph, every pair reconstructs
        let mut entries = vec![0u64; 25];
        let mut state = 0x1234_5678_u64;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    entries[i * 5 + j] = (state >> 60) % 5;
                }
            }
        }
        let g = Graph::from_entries(5, true, true, entries).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let d = reciprocal_decompose(&g, i, j).unwrap();
                assert_eq!(d.recip + d.right, g.entry(i, j));
                assert_eq!(d.recip + d.left, g.entry(j, i));
                assert_eq!(d.right * d.left, 0);
            }
        }
    }
}

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::ConceptId;
use crate::{Error, Result};

/// Prerequisite relation among concepts; edge `(i, j)` means `i` is a
/// prerequisite of `j`. Acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrereqDag {
    edges: BTreeSet<(ConceptId, ConceptId)>,
    preds: Vec<Vec<ConceptId>>,
    succs: Vec<Vec<ConceptId>>,
}

impl PrereqDag {
    /// Builds the DAG, rejecting out-of-range ids, self loops and cycles.
    pub fn new(
        num_concepts: usize,
        edges: impl IntoIterator<Item = (ConceptId, ConceptId)>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut preds = vec![Vec::new(); num_concepts];
        let mut succs = vec![Vec::new(); num_concepts];
        for (a, b) in edges {
            for c in [a, b] {
                if c.0 >= num_concepts {
                    return Err(Error::UnknownId {
                        kind: "concept",
                        id: c.0,
                    });
                }
            }
            if a == b {
                return Err(Error::PrerequisiteCycle(vec![a.0, a.0]));
            }
            if set.insert((a, b)) {
                preds[b.0].push(a);
                succs[a.0].push(b);
            }
        }
        for v in preds.iter_mut().chain(succs.iter_mut()) {
            v.sort_unstable();
        }
        let dag = PrereqDag {
            edges: set,
            preds,
            succs,
        };
        if let Some(cycle) = dag.find_cycle() {
            return Err(Error::PrerequisiteCycle(cycle));
        }
        Ok(dag)
    }

    pub fn num_concepts(&self) -> usize {
        self.preds.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (ConceptId, ConceptId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, from: ConceptId, to: ConceptId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Direct prerequisites of `c`.
    pub fn direct_predecessors(&self, c: ConceptId) -> &[ConceptId] {
        &self.preds[c.0]
    }

    pub fn direct_successors(&self, c: ConceptId) -> &[ConceptId] {
        &self.succs[c.0]
    }

    /// Every concept with a directed path to `target`, in topological order
    /// with ties broken by ascending id.
    pub fn predecessors(&self, target: ConceptId) -> Vec<ConceptId> {
        let mut seen = vec![false; self.num_concepts()];
        let mut stack = vec![target];
        let mut members = Vec::new();
        while let Some(c) = stack.pop() {
            for &p in &self.preds[c.0] {
                if !seen[p.0] {
                    seen[p.0] = true;
                    members.push(p);
                    stack.push(p);
                }
            }
        }
        self.topo_sort_subset(&members, &seen)
    }

    /// Topological order of all concepts, ties by ascending id.
    pub fn topological_order(&self) -> Vec<ConceptId> {
        let all: Vec<ConceptId> = (0..self.num_concepts()).map(ConceptId).collect();
        self.topo_sort_subset(&all, &vec![true; self.num_concepts()])
    }

    fn topo_sort_subset(&self, members: &[ConceptId], in_set: &[bool]) -> Vec<ConceptId> {
        let mut indeg = vec![0usize; self.num_concepts()];
        for &c in members {
            indeg[c.0] = self.preds[c.0].iter().filter(|p| in_set[p.0]).count();
        }
        let mut heap: BinaryHeap<Reverse<ConceptId>> = members
            .iter()
            .filter(|c| indeg[c.0] == 0)
            .map(|&c| Reverse(c))
            .collect();
        let mut out = Vec::with_capacity(members.len());
        while let Some(Reverse(c)) = heap.pop() {
            out.push(c);
            for &s in &self.succs[c.0] {
                if in_set[s.0] {
                    indeg[s.0] -= 1;
                    if indeg[s.0] == 0 {
                        heap.push(Reverse(s));
                    }
                }
            }
        }
        out
    }

    /// One cycle as a closed walk `[a, b, ..., a]`, if any.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.num_concepts();
        let mut mark = vec![Mark::New; n];
        let mut parent = vec![usize::MAX; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // Iterative DFS with an explicit child cursor.
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Open;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&w) = self.succs[v].get(*next) {
                    *next += 1;
                    match mark[w.0] {
                        Mark::New => {
                            mark[w.0] = Mark::Open;
                            parent[w.0] = v;
                            stack.push((w.0, 0));
                        }
                        Mark::Open => {
                            let mut cycle = vec![v];
                            let mut x = v;
                            while x != w.0 {
                                x = parent[x];
                                cycle.push(x);
                            }
                            cycle.reverse();
                            cycle.push(w.0);
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn c(i: usize) -> ConceptId {
        ConceptId(i)
    }

    /// Reachability by exhaustive DFS from every concept.
    fn brute_ancestors(n: usize, edges: &[(usize, usize)], target: usize) -> BTreeSet<usize> {
        (0..n)
            .filter(|&s| {
                if s == target {
                    return false;
                }
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                while let Some(v) = stack.pop() {
                    if v == target {
                        return true;
                    }
                    for &(a, b) in edges {
                        if a == v && !seen[b] {
                            seen[b] = true;
                            stack.push(b);
                        }
                    }
                }
                false
            })
            .collect()
    }

    #[test]
    fn isolated_concept_has_no_predecessors() {
        let dag = PrereqDag::new(3, [(c(0), c(1))]).unwrap();
        assert!(dag.predecessors(c(2)).is_empty());
    }

    #[test]
    fn chain_and_diamond() {
        let chain = PrereqDag::new(3, [(c(0), c(1)), (c(1), c(2))]).unwrap();
        assert_eq!(chain.predecessors(c(2)), vec![c(0), c(1)]);
        let diamond =
            PrereqDag::new(4, [(c(0), c(1)), (c(0), c(2)), (c(1), c(3)), (c(2), c(3))]).unwrap();
        assert_eq!(diamond.predecessors(c(3)), vec![c(0), c(1), c(2)]);
    }

    #[test]
    fn order_is_topological_not_by_id() {
        let dag = PrereqDag::new(3, [(c(2), c(1)), (c(1), c(0))]).unwrap();
        assert_eq!(dag.predecessors(c(0)), vec![c(2), c(1)]);
    }

    #[test]
    fn cycle_reports_witness() {
        let err = PrereqDag::new(2, [(c(0), c(1)), (c(1), c(0))]).unwrap_err();
        match err {
            Error::PrerequisiteCycle(w) => {
                assert!(w.contains(&0) && w.contains(&1));
                assert_eq!(w.first(), w.last());
            }
            other => panic!("unexpected {other}"),
        }
        assert!(PrereqDag::new(2, [(c(1), c(1))]).is_err());
        assert!(matches!(
            PrereqDag::new(2, [(c(0), c(5))]),
            Err(Error::UnknownId { .. })
        ));
    }

    proptest! {
        #[test]
        fn predecessors_match_dfs(n in 1usize..9, raw in proptest::collection::vec((0usize..9, 0usize..9), 0..20), t in 0usize..9) {
            // Orient every pair low -> high so the graph is acyclic.
            let edges: Vec<(usize, usize)> = raw.into_iter()
                .map(|(a, b)| (a % n, b % n))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            let target = t % n;
            let dag = PrereqDag::new(n, edges.iter().map(|&(a, b)| (c(a), c(b)))).unwrap();
            let got = dag.predecessors(c(target));
            let set: BTreeSet<usize> = got.iter().map(|x| x.0).collect();
            prop_assert_eq!(set.len(), got.len());
            prop_assert_eq!(set, brute_ancestors(n, &edges, target));
            // Topological: no later element is a prerequisite of an earlier one.
            for (i, a) in got.iter().enumerate() {
                for b in &got[..i] {
                    prop_assert!(!dag.contains(*a, *b));
                }
            }
            prop_assert_eq!(dag.topological_order().len(), n);
        }
    }
}

//! Rooted sample genealogies with branch lengths.

mod newick;

pub use newick::{parse_newick, parse_newick_many};

use crate::error::{Error, Result};
use crate::times::CoalescenceTimes;

/// Default relative tolerance for the ultrametric check.
pub const DEFAULT_ULTRAMETRIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: Option<String>,
    /// Length of the edge above this node. On the root this is the stem.
    pub length: Option<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Node {
    fn new(parent: Option<usize>) -> Self {
        Self {
            label: None,
            length: None,
            parent,
            children: Vec::new(),
        }
    }

    pub fn is_tip(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted tree stored as an arena of nodes.
///
/// `horizon` is set on trees built from a coalescent point process and
/// records the observation time `T`; it is not an edge, so it never enters
/// branch-length sums. An explicit stem only exists when the root carries a
/// length, as in `"(A:1,B:1):0.5;"`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTree {
    nodes: Vec<Node>,
    root: usize,
    horizon: Option<f64>,
}

impl SampleTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn root_stem(&self) -> Option<f64> {
        self.nodes[self.root].length
    }

    /// Explicit stem if present, else `T` minus the root height for
    /// point-process trees.
    pub fn stem_length(&self) -> Option<f64> {
        self.root_stem().or_else(|| {
            let h = self.horizon?;
            let depth = self.tip_depths().ok()?.into_iter().fold(0.0, f64::max);
            Some(h - depth)
        })
    }

    pub fn tips(&self) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .filter(|&i| self.nodes[i].is_tip())
            .collect()
    }

    pub fn n_tips(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_tip()).count()
    }

    fn describe(&self, id: usize) -> String {
        match &self.nodes[id].label {
            Some(l) if !l.is_empty() => format!("'{l}'"),
            _ => format!("#{id}"),
        }
    }

    /// Node ids with every parent before its children.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        order
    }

    pub fn is_binary(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.is_tip() || n.children.len() == 2)
    }

    fn require_binary(&self) -> Result<()> {
        for id in self.preorder() {
            let k = self.nodes[id].children.len();
            if k != 0 && k != 2 {
                return Err(Error::NotBinary {
                    node: self.describe(id),
                    children: k,
                });
            }
        }
        Ok(())
    }

    fn edge_length(&self, id: usize) -> Result<f64> {
        self.nodes[id]
            .length
            .ok_or_else(|| Error::MissingBranchLength {
                node: self.describe(id),
            })
    }

    /// Root-to-tip distance for every tip, in preorder.
    pub fn tip_depths(&self) -> Result<Vec<f64>> {
        let mut depth = vec![0.0; self.nodes.len()];
        let mut out = Vec::new();
        for id in self.preorder() {
            if id != self.root {
                let p = self.nodes[id].parent.expect("non-root node has a parent");
                depth[id] = depth[p] + self.edge_length(id)?;
            }
            if self.nodes[id].is_tip() {
                out.push(depth[id]);
            }
        }
        Ok(out)
    }

    /// Height of the root above the tips, after checking that all tip depths
    /// agree to within `tol` relative to that height.
    pub fn ultrametric_height(&self, tol: f64) -> Result<f64> {
        let depths = self.tip_depths()?;
        let height = depths.iter().copied().fold(0.0, f64::max);
        if height == 0.0 {
            return Ok(0.0);
        }
        let worst = depths
            .iter()
            .map(|d| (height - d) / height)
            .fold(0.0, f64::max);
        if worst > tol {
            return Err(Error::NotUltrametric {
                worst_deviation: worst,
            });
        }
        Ok(height)
    }

    /// Per-node (sum of distances to descendant tips, number of descendant tips).
    fn descendant_sums(&self) -> Result<Vec<(f64, usize)>> {
        let mut acc = vec![(0.0, 0usize); self.nodes.len()];
        for id in self.preorder().into_iter().rev() {
            let node = &self.nodes[id];
            if node.is_tip() {
                acc[id] = (0.0, 1);
                continue;
            }
            let mut sum = 0.0;
            let mut count = 0;
            for &c in &node.children {
                let (s, k) = acc[c];
                sum += s + k as f64 * self.edge_length(c)?;
                count += k;
            }
            acc[id] = (sum, count);
        }
        Ok(acc)
    }

    /// Coalescence times of a binary ultrametric tree: the heights of its
    /// `n - 1` internal nodes, each taken as the mean distance to its
    /// descendant tips. Returned in decreasing order, since a reconstructed
    /// tree carries no point-process branch order.
    pub fn coalescence_times(&self, tol: f64) -> Result<CoalescenceTimes> {
        let n = self.n_tips();
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        self.require_binary()?;
        let height = self.ultrametric_height(tol)?;
        let sums = self.descendant_sums()?;
        let times = self
            .preorder()
            .into_iter()
            .filter(|&i| !self.nodes[i].is_tip())
            .map(|i| sums[i].0 / sums[i].1 as f64)
            .collect();
        let horizon = match (self.horizon, self.root_stem()) {
            (Some(h), _) => Some(h),
            (None, Some(stem)) if stem > 0.0 => Some(height + stem),
            _ => None,
        };
        CoalescenceTimes::descending(times, horizon)
    }

    /// Total length of edges ancestral to two or more tips. The root stem
    /// counts only when the tree carries one explicitly.
    pub fn internal_branch_length(&self) -> Result<f64> {
        let n = self.n_tips();
        if n < 3 {
            return Err(Error::SampleTooSmall { n, min: 3 });
        }
        let sums = self.descendant_sums()?;
        let mut total = 0.0;
        for id in self.preorder() {
            if sums[id].1 < 2 {
                continue;
            }
            if id == self.root {
                total += self.root_stem().unwrap_or(0.0);
            } else {
                total += self.edge_length(id)?;
            }
        }
        Ok(total)
    }

    /// Builds the coalescent-point-process tree for branch heights
    /// `H_1..H_{n-1}` below a first branch of height `horizon`.
    ///
    /// Tips are labelled `t1..tn` left to right. Coalescences are processed
    /// in increasing height; each joins the clade holding branch `i - 1` to
    /// the clade holding branch `i`, which is exactly the "join leftward to
    /// the first taller line" rule.
    pub(crate) fn from_point_process(heights: &[f64], horizon: f64) -> Result<Self> {
        let n = heights.len() + 1;
        let mut nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                label: Some(format!("t{}", i + 1)),
                ..Node::new(None)
            })
            .collect();
        let mut node_height = vec![0.0; n];

        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by(|&a, &b| heights[a - 1].total_cmp(&heights[b - 1]).then(a.cmp(&b)));

        // union-find over branches; each block is a contiguous run of branches
        let mut uf: Vec<usize> = (0..n).collect();
        let mut block_root: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], mut i: usize) -> usize {
            while uf[i] != i {
                uf[i] = uf[uf[i]];
                i = uf[i];
            }
            i
        }

        for i in order {
            let h = heights[i - 1];
            let left = find(&mut uf, i - 1);
            let right = find(&mut uf, i);
            let id = nodes.len();
            let (lc, rc) = (block_root[left], block_root[right]);
            nodes.push(Node {
                children: vec![lc, rc],
                ..Node::new(None)
            });
            node_height.push(h);
            for c in [lc, rc] {
                nodes[c].parent = Some(id);
                nodes[c].length = Some(h - node_height[c]);
            }
            uf[right] = left;
            block_root[left] = id;
        }
        let root = block_root[find(&mut uf, 0)];
        Ok(Self {
            nodes,
            root,
            horizon: Some(horizon),
        })
    }

    /// Canonical Newick text: children ordered by their smallest tip label,
    /// lengths to 12 significant digits.
    pub fn to_newick(&self) -> String {
        newick::serialize(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_tip_example() {
        let t = parse_newick("((A:1,B:1):1,C:2);").unwrap();
        assert_eq!(t.n_tips(), 3);
        assert_eq!(t.tip_depths().unwrap(), vec![2.0, 2.0, 2.0]);
        let times = t.coalescence_times(DEFAULT_ULTRAMETRIC_TOL).unwrap();
        assert_eq!(times.times(), &[2.0, 1.0]);
        assert_eq!(t.internal_branch_length().unwrap(), 1.0);
    }

    #[test]
    fn non_ultrametric_is_reported() {
        let t = parse_newick("((A:1,B:2):1,C:2);").unwrap();
        match t.coalescence_times(DEFAULT_ULTRAMETRIC_TOL) {
            Err(Error::NotUltrametric { worst_deviation }) => {
                assert!((worst_deviation - 1.0 / 3.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jitter_within_tolerance_is_averaged() {
        let t = parse_newick("((A:1.0000001,B:0.9999999):1,C:2);").unwrap();
        let times = t.coalescence_times(1e-6).unwrap();
        assert!((times.times()[1] - 1.0).abs() < 1e-12);
        assert!(t.coalescence_times(1e-9).is_err());
    }

    #[test]
    fn cherry() {
        let t = parse_newick("(A:3,B:3);").unwrap();
        assert_eq!(t.coalescence_times(1e-6).unwrap().times(), &[3.0]);
        assert!(matches!(
            t.internal_branch_length(),
            Err(Error::SampleTooSmall { n: 2, .. })
        ));
    }

    #[test]
    fn multifurcation_parses_but_is_rejected() {
        let t = parse_newick("(A:1,B:1,C:1);").unwrap();
        assert!(!t.is_binary());
        assert!(matches!(
            t.coalescence_times(1e-6),
            Err(Error::NotBinary { children: 3, .. })
        ));
    }

    #[test]
    fn missing_length() {
        let t = parse_newick("((A,B:1):1,C:2);").unwrap();
        assert!(matches!(
            t.coalescence_times(1e-6),
            Err(Error::MissingBranchLength { .. })
        ));
    }

    #[test]
    fn explicit_stem_counts_as_internal() {
        let t = parse_newick("((A:1,B:1):1,C:2):0.5;").unwrap();
        assert_eq!(t.internal_branch_length().unwrap(), 1.5);
        let times = t.coalescence_times(1e-6).unwrap();
        assert_eq!(times.horizon(), Some(2.5));
    }

    #[test]
    fn point_process_three_tips() {
        let t = SampleTree::from_point_process(&[2.0, 1.0], 3.0).unwrap();
        // tips t2, t3 join at depth 1, then join t1 at depth 2
        assert_eq!(t.to_newick(), "(t1:2,(t2:1,t3:1):1);");
        assert_eq!(t.stem_length(), Some(1.0));
        assert_eq!(t.root_stem(), None);
    }

    #[test]
    fn point_process_cherry_stem() {
        let t = SampleTree::from_point_process(&[1.5], 4.0).unwrap();
        assert_eq!(t.n_tips(), 2);
        assert_eq!(t.tip_depths().unwrap(), vec![1.5, 1.5]);
        assert_eq!(t.stem_length(), Some(2.5));
    }

    #[test]
    fn rotation_invariance() {
        let a = parse_newick("((A:1.3,B:1.3):0.7,(C:0.4,D:0.4):1.6);").unwrap();
        let b = parse_newick("((D:0.4,C:0.4):1.6,(B:1.3,A:1.3):0.7);").unwrap();
        assert_eq!(
            a.coalescence_times(1e-6).unwrap(),
            b.coalescence_times(1e-6).unwrap()
        );
        assert_eq!(a.to_newick(), b.to_newick());
    }
}

//! Static weighted dominance counting in the plane.
//!
//! Points are sorted by x, so a dominance query `(qx, qy)` asks for the
//! weight of a y-constrained prefix. The prefix is decomposed into binary
//! indexed tree nodes, each holding its points sorted by y with cumulative
//! weights; one binary search per node finishes the query.

/// Immutable structure answering signed weight sums over dominance quadrants.
#[derive(Clone, Debug)]
pub struct DominanceCounter {
    xs: Vec<i64>,
    /// nodes[i] covers positions [i − lowbit(i), i), 1-based.
    nodes: Vec<Vec<(i64, i64)>>,
}

impl DominanceCounter {
    /// Builds from `(x, y, weight)` points. Input order does not matter.
    pub fn new(points: &[(i64, i64, i64)]) -> DominanceCounter {
        let mut sorted = points.to_vec();
        sorted.sort_unstable();
        let xs = sorted.iter().map(|p| p.0).collect();

        let len = sorted.len();
        let mut nodes = vec![Vec::new(); len + 1];
        for (i, node) in nodes.iter_mut().enumerate().skip(1) {
            let lo = i - (i & i.wrapping_neg());
            let mut span: Vec<(i64, i64)> = sorted[lo..i].iter().map(|p| (p.1, p.2)).collect();
            span.sort_unstable();
            let mut acc = 0i64;
            for entry in &mut span {
                acc += entry.1;
                entry.1 = acc;
            }
            *node = span;
        }
        DominanceCounter { xs, nodes }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Σ weights of points p with p.x ≤ qx and p.y ≤ qy, exact.
    pub fn dominance_sum(&self, qx: i64, qy: i64) -> i64 {
        let mut i = self.xs.partition_point(|&x| x <= qx);
        let mut total = 0i64;
        while i > 0 {
            let node = &self.nodes[i];
            let cut = node.partition_point(|&(y, _)| y <= qy);
            if cut > 0 {
                total += node[cut - 1].1;
            }
            i -= i & i.wrapping_neg();
        }
        total
    }
}

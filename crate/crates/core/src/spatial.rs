//! Exact 2D nearest-neighbor search over token coordinates.
//!
//! A small kd-tree specialized for the boundary-assignment workload:
//! a few thousand static points, many queries, and results that must match
//! a brute-force scan bit for bit. Distances are squared Euclidean
//! computed with the same `dx * dx + dy * dy` expression a linear scan
//! would use, and equal distances resolve to the lowest point index.

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

/// Static kd-tree over 2D points.
#[derive(Debug, Clone)]
pub struct KdTree2 {
    points: Vec<[f64; 2]>,
    root: Option<Box<Node>>,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn build(points: &[[f64; 2]], idx: &mut [usize], depth: usize) -> Option<Box<Node>> {
    if idx.is_empty() {
        return None;
    }
    let axis = depth % 2;
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let point = idx[mid];
    let (lo, rest) = idx.split_at_mut(mid);
    let hi = &mut rest[1..];
    Some(Box::new(Node {
        point,
        axis,
        left: build(points, lo, depth + 1),
        right: build(points, hi, depth + 1),
    }))
}

impl KdTree2 {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let root = build(&points, &mut idx, 0);
        Self { points, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point; ties go to the
    /// lowest index. `None` only for an empty tree.
    pub fn nearest(&self, query: [f64; 2]) -> Option<(usize, f64)> {
        let root = self.root.as_ref()?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(root, query, &mut best);
        Some(best)
    }

    fn search(&self, node: &Node, query: [f64; 2], best: &mut (usize, f64)) {
        let p = self.points[node.point];
        let d2 = dist2(p, query);
        if d2 < best.1 || (d2 == best.1 && node.point < best.0) {
            *best = (node.point, d2);
        }
        let delta = query[node.axis] - p[node.axis];
        let (near, far) =
            if delta < 0.0 { (&node.left, &node.right) } else { (&node.right, &node.left) };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        // Equal split distances must still be explored so distance ties
        // resolve to the lowest index, exactly like a linear scan.
        if let Some(f) = far {
            if delta * delta <= best.1 {
                self.search(f, query, best);
            }
        }
    }
}

/// Linear-scan reference with the tie rule the tree must reproduce.
pub fn brute_force_nearest(points: &[[f64; 2]], query: [f64; 2]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in points.iter().enumerate() {
        let d2 = dist2(p, query);
        if best.map_or(true, |(_, bd)| d2 < bd) {
            best = Some((i, d2));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_tree_has_no_neighbor() {
        assert!(KdTree2::new(Vec::new()).nearest([0.0, 0.0]).is_none());
    }

    #[test]
    fn single_point_always_wins() {
        let tree = KdTree2::new(vec![[2.0, 3.0]]);
        assert_eq!(tree.nearest([0.0, 0.0]), Some((0, 13.0)));
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let tree = KdTree2::new(vec![[1.0, 1.0], [5.0, 5.0], [1.0, 1.0]]);
        let (idx, d2) = tree.nearest([1.0, 1.0]).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(d2, 0.0);
    }

    #[test]
    fn symmetric_tie_matches_brute_force() {
        // Query equidistant from indices 0 and 1.
        let pts = vec![[0.0, 0.0], [2.0, 0.0]];
        let tree = KdTree2::new(pts.clone());
        assert_eq!(tree.nearest([1.0, 0.0]), brute_force_nearest(&pts, [1.0, 0.0]));
    }

    proptest! {
        #[test]
        fn agrees_with_linear_scan(
            pts in prop::collection::vec((-50i32..50, -50i32..50), 1..120),
            qx in -60i32..60, qy in -60i32..60,
        ) {
            // Integer coordinates make exact distance ties common.
            let pts: Vec<[f64; 2]> =
                pts.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
            let tree = KdTree2::new(pts.clone());
            let q = [qx as f64, qy as f64];
            prop_assert_eq!(tree.nearest(q), brute_force_nearest(&pts, q));
        }
    }
}

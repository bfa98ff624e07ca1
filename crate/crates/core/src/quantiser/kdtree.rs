//! Static 2-D k-d tree for nearest-codeword queries.

const LEAF: usize = 8;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub(crate) struct KdTree<'a> {
    points: &'a [[f64; 2]],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [[f64; 2]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0, points.len());
        Self {
            points,
            order,
            root,
        }
    }

    /// Index of the nearest point to `q`; exact ties go to the lower index.
    /// `hint` seeds the search bound.
    pub fn nearest(&self, q: [f64; 2], hint: usize) -> usize {
        let mut best = hint;
        let mut best_d = dist2(self.points[hint], q);
        self.search(&self.root, q, &mut best, &mut best_d);
        best
    }

    fn search(&self, node: &Node, q: [f64; 2], best: &mut usize, best_d: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = dist2(self.points[i], q);
                    if d < *best_d || (d == *best_d && i < *best) {
                        *best_d = d;
                        *best = i;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best, best_d);
                if diff * diff <= *best_d {
                    self.search(far, q, best, best_d);
                }
            }
        }
    }
}

fn build(points: &[[f64; 2]], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in slice.iter() {
        for a in 0..2 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[inline]
pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..2000 {
            let q = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let brute = (0..pts.len())
                .min_by(|&a, &b| dist2(pts[a], q).total_cmp(&dist2(pts[b], q)))
                .unwrap();
            assert_eq!(tree.nearest(q, 17), brute);
        }
    }
}

//! Exact diameters of finite point sets and of index ranges along a curve.
//!
//! The value returned is always an actual pairwise distance of the input,
//! computed with [`MetricSpace::d`]. Planar Euclidean sets go through a convex
//! hull, sup-norm and one-dimensional sets through coordinate extremes, and
//! everything else is brute force.

use crate::metric::{Backend, MetricSpace};

/// Maximum pairwise distance among `ids` (0 for fewer than two points).
pub fn diameter(space: &MetricSpace, ids: &[usize]) -> f64 {
    if ids.len() < 2 {
        return 0.0;
    }
    match (space.backend(), space.dim()) {
        (Backend::Euclidean, 1) => {
            let (lo, hi) = extremes(space, ids, 0);
            space.d(lo, hi)
        }
        (Backend::Euclidean, 2) => planar_diameter(space, &hull(space, ids.to_vec())),
        (Backend::Sup, dim) => (0..dim)
            .map(|k| {
                let (lo, hi) = extremes(space, ids, k);
                space.point(hi)[k] - space.point(lo)[k]
            })
            .fold(0.0, f64::max),
        _ => brute_force(space, ids),
    }
}

pub(crate) fn brute_force(space: &MetricSpace, ids: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (k, &a) in ids.iter().enumerate() {
        for &b in &ids[k + 1..] {
            best = best.max(space.d(a, b));
        }
    }
    best
}

fn extremes(space: &MetricSpace, ids: &[usize], axis: usize) -> (usize, usize) {
    let mut lo = ids[0];
    let mut hi = ids[0];
    for &i in ids {
        let x = space.point(i)[axis];
        if x < space.point(lo)[axis] {
            lo = i;
        }
        if x > space.point(hi)[axis] {
            hi = i;
        }
    }
    (lo, hi)
}

#[inline]
fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counterclockwise convex hull (monotone chain), collinear points dropped.
pub(crate) fn hull(space: &MetricSpace, mut ids: Vec<usize>) -> Vec<usize> {
    let p = |i: usize| space.point(i);
    ids.sort_by(|&a, &b| {
        let (pa, pb) = (p(a), p(b));
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
    });
    ids.dedup_by(|a, b| p(*a) == p(*b));
    if ids.len() < 3 {
        return ids;
    }
    let mut out: Vec<usize> = Vec::with_capacity(2 * ids.len());
    for &i in &ids {
        while out.len() >= 2 && cross(p(out[out.len() - 2]), p(out[out.len() - 1]), p(i)) <= 0.0 {
            out.pop();
        }
        out.push(i);
    }
    let lower = out.len() + 1;
    for &i in ids.iter().rev().skip(1) {
        while out.len() >= lower && cross(p(out[out.len() - 2]), p(out[out.len() - 1]), p(i)) <= 0.0 {
            out.pop();
        }
        out.push(i);
    }
    out.pop();
    out
}

fn planar_diameter(space: &MetricSpace, h: &[usize]) -> f64 {
    let n = h.len();
    if n <= 64 {
        return brute_force(space, h);
    }
    // rotating calipers over the ccw hull
    let p = |k: usize| space.point(h[k % n]);
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..n {
        while cross(p(i), p(i + 1), p(j + 1)).abs() > cross(p(i), p(i + 1), p(j)).abs() {
            j += 1;
        }
        best = best
            .max(space.d(h[i], h[j % n]))
            .max(space.d(h[(i + 1) % n], h[j % n]));
    }
    best
}

const BLOCK: usize = 64;

/// Answers diameter queries for contiguous index ranges of one space.
///
/// For planar Euclidean spaces a segment tree of block hulls makes each query
/// touch `O(log n)` hulls; other backends scan the range.
#[derive(Debug, Clone)]
pub struct RangeDiameter<'a> {
    space: &'a MetricSpace,
    tree: Option<HullTree>,
}

#[derive(Debug, Clone)]
struct HullTree {
    len: usize,
    size: usize,
    nodes: Vec<Vec<usize>>,
}

impl<'a> RangeDiameter<'a> {
    pub fn new(space: &'a MetricSpace) -> Self {
        let planar = space.backend() == Backend::Euclidean && space.dim() == 2;
        let tree = (planar && space.len() > 4 * BLOCK).then(|| {
            let blocks = space.len().div_ceil(BLOCK);
            let size = blocks.next_power_of_two();
            let mut nodes = vec![Vec::new(); 2 * size];
            for b in 0..blocks {
                let ids = (b * BLOCK..((b + 1) * BLOCK).min(space.len())).collect();
                nodes[size + b] = hull(space, ids);
            }
            for v in (1..size).rev() {
                let mut ids = nodes[2 * v].clone();
                ids.extend_from_slice(&nodes[2 * v + 1]);
                nodes[v] = if ids.len() > 2 { hull(space, ids) } else { ids };
            }
            HullTree { len: space.len(), size, nodes }
        });
        Self { space, tree }
    }

    pub fn space(&self) -> &'a MetricSpace {
        self.space
    }

    /// Diameter of the union of the inclusive index ranges.
    pub fn query(&self, ranges: &[(usize, usize)]) -> f64 {
        let Some(tree) = &self.tree else {
            let ids: Vec<usize> = ranges.iter().flat_map(|&(lo, hi)| lo..=hi).collect();
            return diameter(self.space, &ids);
        };
        let mut ids = Vec::new();
        for &(lo, hi) in ranges {
            tree.collect(lo, hi, &mut ids);
        }
        if ids.len() < 2 {
            return 0.0;
        }
        planar_diameter(self.space, &hull(self.space, ids))
    }
}

impl HullTree {
    fn collect(&self, lo: usize, hi: usize, out: &mut Vec<usize>) {
        let (blo, bhi) = (lo / BLOCK, hi / BLOCK);
        if blo == bhi {
            out.extend(lo..=hi);
            return;
        }
        // partial head and tail blocks as raw points
        let first_full = if lo % BLOCK == 0 { blo } else { blo + 1 };
        let last_full = if (hi + 1) % BLOCK == 0 || hi + 1 == self.len {
            bhi as isize
        } else {
            bhi as isize - 1
        };
        if first_full != blo {
            out.extend(lo..(blo + 1) * BLOCK);
        }
        if last_full != bhi as isize {
            out.extend(bhi * BLOCK..=hi);
        }
        if (first_full as isize) <= last_full {
            let (mut l, mut r) = (first_full + self.size, last_full as usize + self.size + 1);
            while l < r {
                if l & 1 == 1 {
                    out.extend_from_slice(&self.nodes[l]);
                    l += 1;
                }
                if r & 1 == 1 {
                    r -= 1;
                    out.extend_from_slice(&self.nodes[r]);
                }
                l >>= 1;
                r >>= 1;
            }
        }
    }
}

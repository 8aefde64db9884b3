//! Bounding-volume hierarchy over norm balls, answering the normalized
//! nearest-neighbor query `argmin_i ‖x − x_i‖ / r_i`.

use std::f64::consts::PI;

use super::norm::Metric;
use super::region::Ball;

const LEAF: usize = 8;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Leaf: `items[start..end]`; inner: children at `start` and `end`.
    start: usize,
    end: usize,
    leaf: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BallIndex {
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    items: Vec<usize>,
    nodes: Vec<Node>,
    angular: Vec<usize>,
}

impl BallIndex {
    pub fn new(balls: &[Ball], metric: &Metric) -> Self {
        let w = &metric.norm.weights;
        let mut idx = BallIndex {
            centers: balls.iter().map(|b| b.center.clone()).collect(),
            radii: balls.iter().map(|b| b.radius).collect(),
            lo: balls
                .iter()
                .map(|b| b.center.iter().zip(w).map(|(c, w)| c - b.radius / w).collect())
                .collect(),
            hi: balls
                .iter()
                .map(|b| b.center.iter().zip(w).map(|(c, w)| c + b.radius / w).collect())
                .collect(),
            items: (0..balls.len()).collect(),
            nodes: Vec::new(),
            angular: (0..metric.dim()).filter(|&k| metric.angular[k]).collect(),
        };
        if !balls.is_empty() {
            idx.build(0, balls.len());
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let d = self.lo[self.items[start]].len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut clo = vec![f64::INFINITY; d];
        let mut chi = vec![f64::NEG_INFINITY; d];
        for &i in &self.items[start..end] {
            for k in 0..d {
                lo[k] = lo[k].min(self.lo[i][k]);
                hi[k] = hi[k].max(self.hi[i][k]);
                clo[k] = clo[k].min(self.centers[i][k]);
                chi[k] = chi[k].max(self.centers[i][k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, end, leaf: true });
        if end - start <= LEAF {
            return id;
        }
        let axis = (0..d)
            .max_by(|&a, &b| (chi[a] - clo[a]).total_cmp(&(chi[b] - clo[b])))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let centers = &self.centers;
        self.items[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a][axis].total_cmp(&centers[b][axis]).then(a.cmp(&b))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let n = &mut self.nodes[id];
        n.leaf = false;
        n.start = left;
        n.end = right;
        id
    }

    /// Copies of `x` shifted by ±2π along angular axes, so balls stored
    /// near ±π are found from either side.
    fn images(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![x.to_vec()];
        for &k in &self.angular {
            let n = out.len();
            for j in 0..n {
                for s in [-2.0 * PI, 2.0 * PI] {
                    let mut y = out[j].clone();
                    y[k] += s;
                    out.push(y);
                }
            }
        }
        out
    }

    fn visit(&self, qlo: &[f64], qhi: &[f64], f: &mut impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if (0..qlo.len()).any(|k| qhi[k] < n.lo[k] || qlo[k] > n.hi[k]) {
                continue;
            }
            if n.leaf {
                for &i in &self.items[n.start..n.end] {
                    if (0..qlo.len()).all(|k| qhi[k] >= self.lo[i][k] && qlo[k] <= self.hi[i][k]) {
                        f(i);
                    }
                }
            } else {
                stack.push(n.start);
                stack.push(n.end);
            }
        }
    }

    /// `(i, ‖x − x_i‖ / r_i)` minimizing the ratio among balls containing
    /// `x`; ties go to the lowest `i`.
    pub fn nearest_containing(&self, x: &[f64], metric: &Metric) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for y in self.images(x) {
            self.visit(&y, &y, &mut |i| {
                let ratio = metric.dist(x, &self.centers[i]) / self.radii[i];
                if ratio <= 1.0 {
                    let better = match best {
                        None => true,
                        Some((j, r)) => ratio < r || (ratio == r && i < j),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            });
        }
        best
    }

    pub fn covers(&self, x: &[f64], metric: &Metric) -> bool {
        self.nearest_containing(x, metric).is_some()
    }

    /// Indices of balls intersecting `b`, sorted.
    pub fn intersecting(&self, b: &Ball, metric: &Metric) -> Vec<usize> {
        let w = &metric.norm.weights;
        let mut hits = Vec::new();
        for y in self.images(&b.center) {
            let qlo: Vec<f64> = y.iter().zip(w).map(|(c, w)| c - b.radius / w).collect();
            let qhi: Vec<f64> = y.iter().zip(w).map(|(c, w)| c + b.radius / w).collect();
            self.visit(&qlo, &qhi, &mut |i| {
                if metric.dist(&b.center, &self.centers[i]) <= b.radius + self.radii[i] {
                    hits.push(i);
                }
            });
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(balls: &[Ball], x: &[f64], m: &Metric) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in balls.iter().enumerate() {
            let r = m.dist(x, &b.center) / b.radius;
            if r <= 1.0 && best.is_none_or(|(_, br)| r < br) {
                best = Some((i, r));
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan() {
        let m = Metric::new(Norm::max(3), vec![false, false, true]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let balls: Vec<Ball> = (0..500)
            .map(|_| Ball {
                center: vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI)],
                radius: rng.random_range(0.05..1.0),
            })
            .collect();
        let idx = BallIndex::new(&balls, &m);
        for _ in 0..3000 {
            let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), rng.random_range(-PI..PI)];
            assert_eq!(idx.nearest_containing(&x, &m), brute(&balls, &x, &m));
        }
    }

    #[test]
    fn finds_balls_across_the_angle_seam() {
        let m = Metric::new(Norm::max(2), vec![true, false]).unwrap();
        let balls = vec![Ball { center: vec![PI - 0.05, 0.0], radius: 0.2 }];
        let idx = BallIndex::new(&balls, &m);
        assert!(idx.covers(&[-PI + 0.1, 0.0], &m));
        assert_eq!(idx.intersecting(&Ball { center: vec![-PI + 0.2, 0.0], radius: 0.1 }, &m), vec![0]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let m = Metric::flat(Norm::max(1));
        let balls = vec![Ball { center: vec![-1.0], radius: 2.0 }, Ball { center: vec![1.0], radius: 2.0 }];
        let idx = BallIndex::new(&balls, &m);
        assert_eq!(idx.nearest_containing(&[0.0], &m), Some((0, 0.5)));
    }
}

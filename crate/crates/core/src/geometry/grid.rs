//! Annulus covering grid and the 3^d cube split.
//!
//! Cells are cubes in the weighted max-norm around `x*`. The grid places `n`
//! concentric annuli between `eps` and `r_max`; annulus `i` starts at
//! `a_{i-1} = eps (3^{i-1} + 1) / 2` and is tiled by the `3^d - 1` outer cubes
//! of side `2 a_{i-1}`, each split `m` times into `3^d` subcubes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::norm::{wrap_angle, Metric};
use super::region::{Ball, Region};
use crate::error::{NcpError, Result};

/// Relative padding of cell balls.
pub const FACE_PAD: f64 = 1e-12;

/// Cube in weighted max-norm coordinates: every `y` with
/// `max_k w_k |y_k - center_k| <= half_width` (angular differences wrapped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl Cell {
    /// Smallest cube containing `ball` (exact for the max-norm).
    pub fn enclosing(ball: &Ball) -> Self {
        Cell { center: ball.center.clone(), half_width: ball.radius }
    }

    /// Circumscribed ball in the metric's norm.
    pub fn ball(&self, metric: &Metric) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius(metric) }
    }

    /// Circumradius padded by [`FACE_PAD`] so points on a face shared by
    /// two cubes stay covered after rounding.
    pub fn radius(&self, metric: &Metric) -> f64 {
        metric.norm.circumradius(self.half_width) * (1.0 + FACE_PAD)
    }

    pub fn contains(&self, x: &[f64], metric: &Metric) -> bool {
        let w = &metric.norm.weights;
        (0..x.len()).all(|k| {
            let mut d = x[k] - self.center[k];
            if metric.angular[k] {
                d = wrap_angle(d);
            }
            (d * w[k]).abs() <= self.half_width
        })
    }

    /// The `3^d` equal subcubes, first axis varying slowest.
    pub fn split(&self, metric: &Metric) -> Vec<Cell> {
        let d = self.center.len();
        let h = self.half_width / 3.0;
        let mut out = Vec::with_capacity(3usize.pow(d as u32));
        let mut digits = vec![0usize; d];
        loop {
            let mut c = self.center.clone();
            for k in 0..d {
                c[k] += (digits[k] as f64 - 1.0) * 2.0 * h / metric.norm.weights[k];
            }
            metric.wrap(&mut c);
            out.push(Cell { center: c, half_width: h });
            // odometer, last axis fastest
            let mut k = d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < 3 {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
}

/// Splits `b` into `3^d` balls whose union covers it. Errors when `b` is
/// already at or below `floor`.
pub fn split_ball(b: &Ball, metric: &Metric, floor: f64) -> Result<Vec<Ball>> {
    if b.radius <= floor {
        return Err(NcpError::MaxSplitsExceeded { radius: b.radius, floor });
    }
    Ok(Cell::enclosing(b)
        .split(metric)
        .into_iter()
        .map(|c| c.ball(metric))
        .collect())
}

/// Covering ratio trading decay rate against grid density:
/// `(1 - K e^{-(λ-α)τ}) / (1 + e^{(L+α)τ})`.
pub fn compute_rho(k_gain: f64, lambda: f64, alpha: f64, tau: f64, lipschitz: f64) -> Result<f64> {
    if !(k_gain >= 1.0) {
        return Err(NcpError::InfeasibleRate(format!("gain K must be >= 1, got {k_gain}")));
    }
    if !(alpha < lambda) {
        return Err(NcpError::InfeasibleRate(format!(
            "alpha = {alpha} must be below lambda = {lambda}"
        )));
    }
    let tau_min = k_gain.ln() / (lambda - alpha);
    let num = 1.0 - k_gain * (-(lambda - alpha) * tau).exp();
    if !(tau > tau_min) || !(num > 0.0) {
        return Err(NcpError::InfeasibleRate(format!(
            "tau = {tau} must exceed ln(K)/(lambda - alpha) = {tau_min}"
        )));
    }
    Ok(num / (1.0 + ((lipschitz + alpha) * tau).exp()))
}

/// Number of annuli `ceil(log3(2 r_max / eps - 1))`, at least one.
pub fn annulus_count(r_max: f64, eps: f64) -> usize {
    let target = 2.0 * r_max / eps - 1.0;
    let mut n = 1usize;
    let mut p = 3.0f64;
    while p < target {
        n += 1;
        p *= 3.0;
    }
    n
}

/// Splits per cube `ceil(log3(1/rho))`.
pub fn split_depth(rho: f64) -> usize {
    let target = 1.0 / rho;
    let mut m = 0usize;
    let mut p = 1.0f64;
    while p < target {
        m += 1;
        p *= 3.0;
    }
    m
}

/// Upper bound `n (3^d - 1) 3^{d m}` on the cell count.
pub fn grid_count_bound(n: usize, m: usize, dim: usize) -> f64 {
    let t = 3f64.powi(dim as i32);
    n as f64 * (t - 1.0) * t.powi(m as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusGrid {
    pub annuli: usize,
    pub splits: usize,
    pub cells: Vec<Cell>,
}

impl AnnulusGrid {
    pub fn balls(&self, metric: &Metric) -> Vec<Ball> {
        self.cells.iter().map(|c| c.ball(metric)).collect()
    }
}

/// Smallest weighted |offset| over an axis interval, on the circle for angular axes.
fn axis_min_abs(lo: f64, hi: f64, angular: bool) -> f64 {
    if !angular {
        if lo <= 0.0 && hi >= 0.0 {
            return 0.0;
        }
        return lo.abs().min(hi.abs());
    }
    if hi - lo >= 2.0 * PI {
        return 0.0;
    }
    let k = (lo / (2.0 * PI)).ceil();
    if 2.0 * PI * k <= hi {
        return 0.0;
    }
    wrap_angle(lo).abs().min(wrap_angle(hi).abs())
}

struct GridBuilder<'a> {
    metric: &'a Metric,
    center: &'a [f64],
    r_max: f64,
    clip: Option<(Vec<f64>, Vec<f64>)>,
    out: Vec<Cell>,
}

impl GridBuilder<'_> {
    /// Cell extent along axis k, offset relative to x*, unwrapped.
    fn min_norm(&self, offset: &[f64], h: f64) -> f64 {
        let w = &self.metric.norm.weights;
        let mut m = 0.0f64;
        for k in 0..offset.len() {
            let hk = h / w[k];
            let v = axis_min_abs(offset[k] - hk, offset[k] + hk, self.metric.angular[k]);
            m = m.max(v * w[k]);
        }
        m
    }

    fn keep(&self, offset: &[f64], h: f64, outer: f64) -> bool {
        let mn = self.min_norm(offset, h);
        if mn > self.r_max || mn > outer {
            return false;
        }
        let w = &self.metric.norm.weights;
        for k in 0..offset.len() {
            let hk = h / w[k];
            let (lo, hi) = (self.center[k] + offset[k] - hk, self.center[k] + offset[k] + hk);
            if self.metric.angular[k] && hi - lo < 2.0 * PI && (hi < -PI || lo > PI) {
                return false;
            }
            if let Some((clo, chi)) = &self.clip {
                if !self.metric.angular[k] && (hi < clo[k] || lo > chi[k]) {
                    return false;
                }
            }
        }
        true
    }

    fn descend(&mut self, offset: Vec<f64>, h: f64, depth: usize, outer: f64) {
        if !self.keep(&offset, h, outer) {
            return;
        }
        if depth == 0 {
            let mut c: Vec<f64> = offset.iter().zip(self.center).map(|(o, x)| o + x).collect();
            self.metric.wrap(&mut c);
            self.out.push(Cell { center: c, half_width: h });
            return;
        }
        let d = offset.len();
        let hc = h / 3.0;
        let total = 3usize.pow(d as u32);
        for idx in 0..total {
            let mut o = offset.clone();
            let mut rem = idx;
            for k in (0..d).rev() {
                let digit = (rem % 3) as f64 - 1.0;
                rem /= 3;
                o[k] += digit * 2.0 * hc / self.metric.norm.weights[k];
            }
            self.descend(o, hc, depth - 1, outer);
        }
    }
}

/// Builds the annulus covering of `cl(B_{r_max}(x*) \ B_eps(x*))` in the
/// weighted max-norm, optionally restricted to cells meeting `clip`.
/// Every returned cube has half-width at most `rho` times its center's
/// distance to `x*` (for non-angular coordinates).
pub fn build_annulus_grid(
    r_max: f64,
    eps: f64,
    rho: f64,
    metric: &Metric,
    center: &[f64],
    clip: Option<&Region>,
) -> Result<AnnulusGrid> {
    if !(rho > 0.0) {
        return Err(NcpError::InfeasibleRate(format!("covering ratio rho must be > 0, got {rho}")));
    }
    if !(rho < 1.0) {
        return Err(NcpError::InvalidInput(format!("covering ratio rho must be < 1, got {rho}")));
    }
    if !(eps > 0.0 && eps < r_max) {
        return Err(NcpError::InvalidInput(format!(
            "need 0 < eps < r_max, got eps = {eps}, r_max = {r_max}"
        )));
    }
    let d = metric.dim();
    let n = annulus_count(r_max, eps);
    let m = split_depth(rho);
    let mut b = GridBuilder {
        metric,
        center,
        r_max,
        clip: clip.map(|r| r.bounding_box(metric)),
        out: Vec::new(),
    };
    let w = metric.norm.weights.clone();
    for i in 1..=n {
        let inner = eps * (3f64.powi(i as i32 - 1) + 1.0) / 2.0;
        let outer = if i == n { f64::INFINITY } else { eps * (3f64.powi(i as i32) + 1.0) / 2.0 };
        let total = 3usize.pow(d as u32);
        for idx in 0..total {
            let mut o = vec![0.0; d];
            let mut rem = idx;
            let mut zero = true;
            for k in (0..d).rev() {
                let digit = (rem % 3) as f64 - 1.0;
                rem /= 3;
                if digit != 0.0 {
                    zero = false;
                }
                o[k] = digit * 2.0 * inner / w[k];
            }
            if zero {
                continue;
            }
            b.descend(o, inner, m, outer);
        }
    }
    Ok(AnnulusGrid { annuli: n, splits: m, cells: b.out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::norm::Norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn annulus_count_examples() {
        assert_eq!(annulus_count(13.0 * 0.01, 0.01), 3);
        assert_eq!(annulus_count(1.0, 0.5), 1);
        for n in 1..8 {
            let eps = 0.1;
            let r = eps * (3f64.powi(n) - 1.0) / 2.0;
            assert_eq!(annulus_count(r, eps), n as usize);
        }
    }

    #[test]
    fn split_depth_examples() {
        assert_eq!(split_depth(0.5), 1);
        assert_eq!(split_depth(1.0 / 3.0), 1);
        assert_eq!(split_depth(0.34), 1);
        assert_eq!(split_depth(0.2), 2);
        assert_eq!(split_depth(0.1), 3);
    }

    #[test]
    fn split_ball_1d() {
        let m = Metric::flat(Norm::max(1));
        let kids = split_ball(&Ball { center: vec![0.0], radius: 1.0 }, &m, 0.01).unwrap();
        let centers: Vec<f64> = kids.iter().map(|b| b.center[0]).collect();
        assert_eq!(kids.len(), 3);
        for (c, want) in centers.iter().zip([-2.0 / 3.0, 0.0, 2.0 / 3.0]) {
            assert!((c - want).abs() < 1e-15);
        }
        assert!(kids.iter().all(|b| (b.radius - (1.0 + FACE_PAD) / 3.0).abs() < 1e-15));
    }

    #[test]
    fn split_ball_2d_covers_parent() {
        let m = Metric::flat(Norm::max(2));
        let parent = Ball { center: vec![0.3, -1.0], radius: 0.9 };
        let kids = split_ball(&parent, &m, 1e-3).unwrap();
        assert_eq!(kids.len(), 9);
        let steps = 60;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [
                    0.3 - 0.9 + 1.8 * i as f64 / steps as f64,
                    -1.0 - 0.9 + 1.8 * j as f64 / steps as f64,
                ];
                assert!(kids.iter().any(|b| m.dist(&x, &b.center) <= b.radius + 1e-12), "{x:?}");
            }
        }
    }

    #[test]
    fn split_ball_3d_count_and_floor() {
        let m = Metric::flat(Norm::max(3));
        let b = Ball { center: vec![1.0, 2.0, 3.0], radius: 0.3 };
        assert_eq!(split_ball(&b, &m, 0.01).unwrap().len(), 27);
        assert!(matches!(split_ball(&b, &m, 0.3), Err(NcpError::MaxSplitsExceeded { .. })));
    }

    #[test]
    fn euclidean_split_uses_circumradius() {
        let m = Metric::flat(Norm::euclidean(2));
        let kids = split_ball(&Ball { center: vec![0.0, 0.0], radius: 3.0 }, &m, 0.01).unwrap();
        assert!(kids.iter().all(|b| (b.radius - 2f64.sqrt() * (1.0 + FACE_PAD)).abs() < 1e-15));
    }

    #[test]
    fn rho_closed_form() {
        let (k, lam, a, tau, l) = (1.0, 2.0f64, 0.5f64, 1.2f64, 0.7f64);
        let want = (1.0 - (-(lam - a) * tau).exp()) / (1.0 + ((l + a) * tau).exp());
        assert!((compute_rho(k, lam, a, tau, l).unwrap() - want).abs() < 1e-15);
        assert!(compute_rho(2.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(compute_rho(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn infeasible_rho_is_rejected() {
        let m = Metric::flat(Norm::max(2));
        assert!(matches!(
            build_annulus_grid(1.0, 0.1, 0.0, &m, &[0.0, 0.0], None),
            Err(NcpError::InfeasibleRate(_))
        ));
    }

    #[test]
    fn one_dim_grid_tiles_exactly() {
        let m = Metric::flat(Norm::max(1));
        let eps = 0.1;
        let r = eps * (3f64.powi(4) - 1.0) / 2.0;
        let g = build_annulus_grid(r, eps, 0.5, &m, &[0.0], None).unwrap();
        assert_eq!(g.annuli, 4);
        for i in 0..=4000 {
            let x = eps * (1.0 + 1e-12) + (r - eps) * i as f64 / 4000.0;
            for s in [x, -x] {
                assert!(g.cells.iter().any(|c| c.contains(&[s], &m)), "{s}");
            }
        }
    }

    #[test]
    fn radius_law_and_coverage_2d() {
        let m = Metric::flat(Norm::max(2));
        let (r, eps, rho) = (3.0, 0.05, 0.2);
        let x0 = [0.5, -0.25];
        let g = build_annulus_grid(r, eps, rho, &m, &x0, None).unwrap();
        for c in &g.cells {
            assert!(c.half_width <= rho * m.dist(&c.center, &x0) + 1e-12);
        }
        assert!(g.cells.len() as f64 <= grid_count_bound(g.annuli, g.splits, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 5000 {
            let x = [x0[0] + rng.random_range(-r..r), x0[1] + rng.random_range(-r..r)];
            let dist = m.dist(&x, &x0);
            if dist < eps {
                continue;
            }
            checked += 1;
            assert!(g.cells.iter().any(|c| c.contains(&x, &m)), "{x:?}");
        }
    }

    #[test]
    fn angular_axis_is_tiled_as_circle() {
        let m = Metric::new(Norm::max(2), vec![true, false]).unwrap();
        let region = Region::boxed(vec![-PI, -10.0], vec![PI, 10.0]);
        let g = build_annulus_grid(10.0, 0.05, 0.5, &m, &[0.0, 0.0], Some(&region)).unwrap();
        assert!(g.cells.iter().all(|c| c.center[0] > -PI && c.center[0] <= PI));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5000 {
            let x = [rng.random_range(-PI..PI), rng.random_range(-10.0..10.0)];
            if m.dist(&x, &[0.0, 0.0]) < 0.05 {
                continue;
            }
            assert!(g.cells.iter().any(|c| c.contains(&x, &m)), "{x:?}");
        }
    }
}

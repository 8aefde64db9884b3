use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::norm::{wrap_angle, Metric};
use crate::error::{NcpError, Result};

/// Closed ball in the working norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NcpError::InvalidRegion(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, x: &[f64], metric: &Metric) -> bool {
        metric.dist(x, &self.center) <= self.radius
    }
}

/// Target region `S`: a norm ball, an axis-aligned box, or a union of those
/// (the union only arises after incremental expansion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Union { parts: Vec<Region> },
}

fn full_circle(lo: f64, hi: f64) -> bool {
    hi - lo >= 2.0 * PI - 1e-9
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Region::Box { lower, upper }
    }

    pub fn validate(&self, metric: &Metric) -> Result<()> {
        let d = metric.dim();
        match self {
            Region::Ball { center, radius } => {
                if center.len() != d {
                    return Err(NcpError::InvalidRegion(format!(
                        "ball center has dimension {}, expected {d}",
                        center.len()
                    )));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(NcpError::InvalidRegion(format!("ball radius must be > 0, got {radius}")));
                }
            }
            Region::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(NcpError::InvalidRegion(format!("box bounds must have dimension {d}")));
                }
                for k in 0..d {
                    if !(lower[k] < upper[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                        return Err(NcpError::InvalidRegion(format!(
                            "box needs lower < upper on axis {k}, got [{}, {}]",
                            lower[k], upper[k]
                        )));
                    }
                }
            }
            Region::Union { parts } => {
                if parts.is_empty() {
                    return Err(NcpError::InvalidRegion("empty union".into()));
                }
                for p in parts {
                    p.validate(metric)?;
                }
            }
        }
        Ok(())
    }

    /// Signed distance: negative inside, zero on the boundary, positive
    /// outside. Boxes use the max over axes of the weighted per-axis signed
    /// distances; a full-circle angular axis has no boundary.
    pub fn signed_distance(&self, x: &[f64], metric: &Metric) -> f64 {
        match self {
            Region::Ball { center, radius } => metric.dist(x, center) - radius,
            Region::Box { lower, upper } => {
                let w = &metric.norm.weights;
                let mut sd = f64::NEG_INFINITY;
                for k in 0..x.len() {
                    let (lo, hi) = (lower[k], upper[k]);
                    let axis = if metric.angular[k] {
                        if full_circle(lo, hi) {
                            continue;
                        }
                        let mid = 0.5 * (lo + hi);
                        wrap_angle(x[k] - mid).abs() - 0.5 * (hi - lo)
                    } else {
                        (lo - x[k]).max(x[k] - hi)
                    };
                    sd = sd.max(axis * w[k]);
                }
                sd
            }
            // min over parts: exact outside, conservative inside
            Region::Union { parts } => parts
                .iter()
                .map(|p| p.signed_distance(x, metric))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64], metric: &Metric) -> bool {
        self.signed_distance(x, metric) <= 0.0
    }

    /// Axis-aligned bounding box in state coordinates. Angular axes that
    /// wrap fully are reported as `[-pi, pi]`.
    pub fn bounding_box(&self, metric: &Metric) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Ball { center, radius } => {
                let mut lo = Vec::with_capacity(center.len());
                let mut hi = Vec::with_capacity(center.len());
                for k in 0..center.len() {
                    let h = radius / metric.norm.weights[k];
                    if metric.angular[k] && h >= PI {
                        lo.push(-PI);
                        hi.push(PI);
                    } else {
                        lo.push(center[k] - h);
                        hi.push(center[k] + h);
                    }
                }
                (lo, hi)
            }
            Region::Box { lower, upper } => {
                let mut lo = lower.clone();
                let mut hi = upper.clone();
                for k in 0..lo.len() {
                    if metric.angular[k] && full_circle(lo[k], hi[k]) {
                        lo[k] = -PI;
                        hi[k] = PI;
                    }
                }
                (lo, hi)
            }
            Region::Union { parts } => {
                let (mut lo, mut hi) = parts[0].bounding_box(metric);
                for p in &parts[1..] {
                    let (l, h) = p.bounding_box(metric);
                    for k in 0..lo.len() {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Uniform-ish sample of a point in the region (rejection from the
    /// bounding box; unions pick a part uniformly first).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, metric: &Metric) -> Vec<f64> {
        if let Region::Union { parts } = self {
            let i = rng.random_range(0..parts.len());
            return parts[i].sample(rng, metric);
        }
        let (lo, hi) = self.bounding_box(metric);
        loop {
            let mut x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect();
            metric.wrap(&mut x);
            if self.contains(&x, metric) {
                return x;
            }
        }
    }

    /// Largest radius `R` with `B_R(x) ⊂ S` in the working norm.
    pub fn inradius_at(&self, x: &[f64], metric: &Metric) -> f64 {
        -self.signed_distance(x, metric)
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lower, .. } => lower.len(),
            Region::Union { parts } => parts[0].dim(),
        }
    }

    /// True when the interiors of the two regions cannot intersect: some
    /// non-angular axis separates their bounding boxes. Shared faces are allowed.
    pub fn interiors_disjoint(&self, other: &Region, metric: &Metric) -> bool {
        if let Region::Union { parts } = self {
            return parts.iter().all(|p| p.interiors_disjoint(other, metric));
        }
        if let Region::Union { parts } = other {
            return parts.iter().all(|p| self.interiors_disjoint(p, metric));
        }
        let (alo, ahi) = self.bounding_box(metric);
        let (blo, bhi) = other.bounding_box(metric);
        (0..alo.len()).any(|k| !metric.angular[k] && (ahi[k] <= blo[k] || bhi[k] <= alo[k]))
    }
}

/// Signed distance of `x` to `region` in the given metric.
pub fn signed_distance(x: &[f64], region: &Region, metric: &Metric) -> f64 {
    region.signed_distance(x, metric)
}

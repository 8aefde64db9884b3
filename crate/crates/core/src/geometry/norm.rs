use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NcpError, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil();
    // ceil can land one period low when (a - pi) is an exact negative multiple.
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Max,
    Euclidean,
}

/// Weighted max- or Euclidean norm. Weights scale each coordinate before the
/// norm is taken, so `max{|x|, |y|, |θ|}` is `Max` with unit weights and
/// `sqrt(x² + y² + 0.01 θ²)` is `Euclidean` with weights `[1, 1, 0.1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub kind: NormKind,
    pub weights: Vec<f64>,
}

impl Norm {
    pub fn new(kind: NormKind, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(NcpError::InvalidInput("norm needs at least one weight".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(NcpError::InvalidInput(format!(
                "norm weights must be positive and finite, got {weights:?}"
            )));
        }
        Ok(Norm { kind, weights })
    }

    pub fn max(dim: usize) -> Self {
        Norm { kind: NormKind::Max, weights: vec![1.0; dim] }
    }

    pub fn euclidean(dim: usize) -> Self {
        Norm { kind: NormKind::Euclidean, weights: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn eval(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.weights.len());
        match self.kind {
            NormKind::Max => v
                .iter()
                .zip(&self.weights)
                .fold(0.0, |m, (x, w)| f64::max(m, (x * w).abs())),
            NormKind::Euclidean => v
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| (x * w) * (x * w))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Radius, in this norm, of the smallest ball around a cube's center that
    /// contains the cube, for a cube of weighted max-norm half-width `h`.
    pub fn circumradius(&self, h: f64) -> f64 {
        match self.kind {
            NormKind::Max => h,
            NormKind::Euclidean => h * (self.dim() as f64).sqrt(),
        }
    }
}

/// A norm together with the set of angular coordinates. All state-space
/// distances go through here so angular differences are taken on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub norm: Norm,
    pub angular: Vec<bool>,
}

impl Metric {
    pub fn new(norm: Norm, angular: Vec<bool>) -> Result<Self> {
        if norm.dim() != angular.len() {
            return Err(NcpError::InvalidInput(format!(
                "norm has {} weights but {} angular flags were given",
                norm.dim(),
                angular.len()
            )));
        }
        Ok(Metric { norm, angular })
    }

    /// Plain metric with no angular coordinates.
    pub fn flat(norm: Norm) -> Self {
        let angular = vec![false; norm.dim()];
        Metric { norm, angular }
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// Writes `a - b` into `out`, wrapping angular components.
    #[inline]
    pub fn diff_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for k in 0..a.len() {
            let d = a[k] - b[k];
            out[k] = if self.angular[k] { wrap_angle(d) } else { d };
        }
    }

    pub fn diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        self.diff_into(a, b, &mut out);
        out
    }

    #[inline]
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let w = &self.norm.weights;
        match self.norm.kind {
            NormKind::Max => {
                let mut m = 0.0f64;
                for k in 0..a.len() {
                    let mut d = a[k] - b[k];
                    if self.angular[k] {
                        d = wrap_angle(d);
                    }
                    m = m.max((d * w[k]).abs());
                }
                m
            }
            NormKind::Euclidean => {
                let mut s = 0.0;
                for k in 0..a.len() {
                    let mut d = a[k] - b[k];
                    if self.angular[k] {
                        d = wrap_angle(d);
                    }
                    s += (d * w[k]) * (d * w[k]);
                }
                s.sqrt()
            }
        }
    }

    /// Wraps the angular coordinates of `x` in place.
    pub fn wrap(&self, x: &mut [f64]) {
        for (v, ang) in x.iter_mut().zip(&self.angular) {
            if *ang {
                *v = wrap_angle(*v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
        assert!((wrap_angle(-2.0 * PI - 0.25) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn paper_norms() {
        let v1 = Norm::max(3);
        assert_eq!(v1.eval(&[1.0, -3.0, 2.0]), 3.0);
        let v2 = Norm::new(NormKind::Euclidean, vec![1.0, 1.0, 0.1]).unwrap();
        let got = v2.eval(&[3.0, 4.0, 10.0]);
        assert!((got - (9.0f64 + 16.0 + 1.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn angular_distance_wraps() {
        let m = Metric::new(Norm::max(2), vec![false, true]).unwrap();
        let d = m.dist(&[0.0, PI - 0.1], &[0.0, -PI + 0.1]);
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Norm::new(NormKind::Max, vec![1.0, 0.0]).is_err());
        assert!(Norm::new(NormKind::Max, vec![]).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 3)
    }

    proptest! {
        #[test]
        fn norm_axioms(x in vec3(), y in vec3(), s in -10.0f64..10.0, euclid in any::<bool>()) {
            let kind = if euclid { NormKind::Euclidean } else { NormKind::Max };
            let n = Norm::new(kind, vec![1.0, 2.0, 0.1]).unwrap();
            prop_assert_eq!(n.eval(&[0.0, 0.0, 0.0]), 0.0);
            let sx: Vec<f64> = x.iter().map(|v| v * s).collect();
            prop_assert!((n.eval(&sx) - s.abs() * n.eval(&x)).abs() <= 1e-12 * (1.0 + n.eval(&sx)));
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            prop_assert!(n.eval(&xy) <= n.eval(&x) + n.eval(&y) + 1e-12 * (1.0 + n.eval(&xy)));
        }
    }
}

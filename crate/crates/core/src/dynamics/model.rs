use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{NcpError, Result};
use crate::geometry::Norm;

/// Right-hand side `f(x, u)` of `ẋ = f(x, u)`, written into `out`.
pub trait VectorField: Send + Sync {
    fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self(x, u, out)
    }
}

/// A control-affine-or-not system with box-constrained inputs and an
/// equilibrium pair `(x*, u*)`.
#[derive(Clone)]
pub struct SystemModel {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub input_dim: usize,
    field: Arc<dyn VectorField>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub equilibrium_state: Vec<f64>,
    pub equilibrium_input: Vec<f64>,
    pub angular_dims: Vec<usize>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("dim", &self.dim)
            .field("input_dim", &self.input_dim)
            .field("input_lower", &self.input_lower)
            .field("input_upper", &self.input_upper)
            .field("equilibrium_state", &self.equilibrium_state)
            .field("equilibrium_input", &self.equilibrium_input)
            .field("angular_dims", &self.angular_dims)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    /// Builds a model, checking dimensions and the input box. The
    /// equilibrium condition is checked separately by
    /// [`SystemModel::check_equilibrium`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        field: impl VectorField + 'static,
        input_lower: Vec<f64>,
        input_upper: Vec<f64>,
        equilibrium_state: Vec<f64>,
        equilibrium_input: Vec<f64>,
        angular_dims: Vec<usize>,
    ) -> Result<Self> {
        let input_dim = input_lower.len();
        if dim == 0 {
            return Err(NcpError::InvalidModel("state dimension must be >= 1".into()));
        }
        if input_upper.len() != input_dim || equilibrium_input.len() != input_dim {
            return Err(NcpError::InvalidModel(format!(
                "input bounds and u* must all have length {input_dim}"
            )));
        }
        if equilibrium_state.len() != dim {
            return Err(NcpError::InvalidModel(format!("x* must have length {dim}")));
        }
        for k in 0..input_dim {
            if !(input_lower[k] <= input_upper[k]) {
                return Err(NcpError::InvalidModel(format!(
                    "input_lower[{k}] = {} exceeds input_upper[{k}] = {}",
                    input_lower[k], input_upper[k]
                )));
            }
            let u = equilibrium_input[k];
            if !(input_lower[k] <= u && u <= input_upper[k]) {
                return Err(NcpError::InvalidModel(format!("u*[{k}] = {u} is outside the input box")));
            }
        }
        if let Some(&k) = angular_dims.iter().find(|&&k| k >= dim) {
            return Err(NcpError::InvalidModel(format!("angular dimension {k} out of range")));
        }
        Ok(SystemModel {
            id: id.into(),
            params: BTreeMap::new(),
            dim,
            input_dim,
            field: Arc::new(field),
            input_lower,
            input_upper,
            equilibrium_state,
            equilibrium_input,
            angular_dims,
        })
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.field.eval(x, u, out)
    }

    pub fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(x, u, &mut out);
        out
    }

    /// Requires `‖f(x*, u*)‖ <= 1e-9`.
    pub fn check_equilibrium(&self, norm: &Norm) -> Result<()> {
        let r = norm.eval(&self.f(&self.equilibrium_state, &self.equilibrium_input));
        if r > 1e-9 {
            return Err(NcpError::InvalidModel(format!(
                "‖f(x*, u*)‖ = {r:e} exceeds 1e-9; (x*, u*) is not an equilibrium"
            )));
        }
        Ok(())
    }

    pub fn angular_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.dim];
        for &k in &self.angular_dims {
            flags[k] = true;
        }
        flags
    }

    pub fn input_in_bounds(&self, u: &[f64]) -> bool {
        u.len() == self.input_dim
            && (0..self.input_dim).all(|k| self.input_lower[k] <= u[k] && u[k] <= self.input_upper[k])
    }

    pub fn clip_input(&self, u: &mut [f64]) {
        for k in 0..self.input_dim {
            u[k] = u[k].clamp(self.input_lower[k], self.input_upper[k]);
        }
    }

    /// The `2^m` vertices of the input box.
    pub fn input_corners(&self) -> Vec<Vec<f64>> {
        let m = self.input_dim;
        (0..1usize << m)
            .map(|mask| {
                (0..m)
                    .map(|k| if mask >> k & 1 == 1 { self.input_upper[k] } else { self.input_lower[k] })
                    .collect()
            })
            .collect()
    }

    pub fn input_range(&self) -> Vec<f64> {
        self.input_upper.iter().zip(&self.input_lower).map(|(h, l)| h - l).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(u_star: f64) -> Result<SystemModel> {
        SystemModel::new(
            "scalar",
            1,
            |_: &[f64], u: &[f64], out: &mut [f64]| out[0] = u[0],
            vec![-1.0],
            vec![1.0],
            vec![0.0],
            vec![u_star],
            vec![],
        )
    }

    #[test]
    fn input_box_is_validated() {
        assert!(scalar(0.0).is_ok());
        assert!(matches!(scalar(2.0), Err(NcpError::InvalidModel(_))));
    }

    #[test]
    fn equilibrium_condition() {
        let m = scalar(0.0).unwrap();
        assert!(m.check_equilibrium(&Norm::max(1)).is_ok());
        let off = scalar(0.5).unwrap();
        assert!(off.check_equilibrium(&Norm::max(1)).is_err());
    }

    #[test]
    fn corners_cover_box() {
        let m = SystemModel::new(
            "two",
            1,
            |_: &[f64], _: &[f64], out: &mut [f64]| out[0] = 0.0,
            vec![0.0, -1.0],
            vec![1.0, 1.0],
            vec![0.0],
            vec![0.0, 0.0],
            vec![],
        )
        .unwrap();
        let c = m.input_corners();
        assert_eq!(c.len(), 4);
        assert!(c.contains(&vec![1.0, -1.0]));
        assert!(c.iter().all(|u| m.input_in_bounds(u)));
    }
}

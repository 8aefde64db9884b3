//! Built-in systems and the registry that maps config names to them.

use std::collections::{BTreeMap, HashMap};

use super::model::SystemModel;
use crate::error::{NcpError, Result};

pub type ModelBuilder = fn(&BTreeMap<String, f64>) -> Result<SystemModel>;

/// Named model constructors. Built-ins are registered by
/// [`ModelRegistry::builtin`]; callers may add their own.
#[derive(Clone)]
pub struct ModelRegistry {
    builders: HashMap<String, ModelBuilder>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry { builders: HashMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("unicycle", unicycle_from_params);
        r.register("inverted_pendulum", |p| inverted_pendulum(&PendulumParams::from_map(p)?));
        r.register("linear_test", |p| linear_test(&LinearParams::from_map(p)?));
        r
    }

    pub fn register(&mut self, name: impl Into<String>, builder: ModelBuilder) {
        self.builders.insert(name.into(), builder);
    }

    pub fn build(&self, name: &str, params: &BTreeMap<String, f64>) -> Result<SystemModel> {
        let b = self.builders.get(name).ok_or_else(|| NcpError::UnknownModel(name.to_string()))?;
        Ok(b(params)?.with_params(params.clone()))
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.builders.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

fn take(params: &BTreeMap<String, f64>, allowed: &[&str], model: &str) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(NcpError::InvalidModel(format!(
            "unknown parameter `{k}` for {model}; expected one of {allowed:?}"
        ))),
        None => Ok(()),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(NcpError::InvalidModel(format!("{name} must be > 0, got {v}")))
    }
}

/// Unicycle `(x, y, θ)` with forward speed `v ∈ [0, v_max]` and turn rate
/// `ω ∈ [-omega_max, omega_max]`.
pub fn unicycle_with(v_max: f64, omega_max: f64) -> Result<SystemModel> {
    SystemModel::new(
        "unicycle",
        3,
        |x: &[f64], u: &[f64], out: &mut [f64]| {
            let (s, c) = x[2].sin_cos();
            out[0] = u[0] * c;
            out[1] = u[0] * s;
            out[2] = u[1];
        },
        vec![0.0, -positive("omega_max", omega_max)?],
        vec![positive("v_max", v_max)?, omega_max],
        vec![0.0; 3],
        vec![0.0, 0.0],
        vec![2],
    )
}

pub fn unicycle() -> SystemModel {
    unicycle_with(1.0, 1.0).expect("default unicycle is valid")
}

fn unicycle_from_params(p: &BTreeMap<String, f64>) -> Result<SystemModel> {
    take(p, &["v_max", "omega_max"], "unicycle")?;
    unicycle_with(
        p.get("v_max").copied().unwrap_or(1.0),
        p.get("omega_max").copied().unwrap_or(1.0),
    )
}

/// Pendulum `m l² θ̈ = m g l sin θ + u` with `θ = 0` upright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub torque_max: f64,
}

impl Default for PendulumParams {
    /// Normalized so that `g / l = 1`, which makes the max-norm Lipschitz
    /// constant of the vector field exactly 1.
    fn default() -> Self {
        PendulumParams { mass: 1.0, length: 1.0, gravity: 1.0, torque_max: 4.0 }
    }
}

impl PendulumParams {
    pub fn from_map(p: &BTreeMap<String, f64>) -> Result<Self> {
        take(p, &["mass", "length", "gravity", "torque_max"], "inverted_pendulum")?;
        let d = Self::default();
        Ok(PendulumParams {
            mass: p.get("mass").copied().unwrap_or(d.mass),
            length: p.get("length").copied().unwrap_or(d.length),
            gravity: p.get("gravity").copied().unwrap_or(d.gravity),
            torque_max: p.get("torque_max").copied().unwrap_or(d.torque_max),
        })
    }
}

pub fn inverted_pendulum(p: &PendulumParams) -> Result<SystemModel> {
    let g_over_l = positive("gravity", p.gravity)? / positive("length", p.length)?;
    let inv_inertia = 1.0 / (positive("mass", p.mass)? * p.length * p.length);
    let tmax = positive("torque_max", p.torque_max)?;
    SystemModel::new(
        "inverted_pendulum",
        2,
        move |x: &[f64], u: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = g_over_l * x[0].sin() + inv_inertia * u[0];
        },
        vec![-tmax],
        vec![tmax],
        vec![0.0, 0.0],
        vec![0.0],
        vec![0],
    )
}

/// Decoupled `ẋ_k = a x_k + b u_k`, `u_k ∈ [-u_max, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub u_max: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { dim: 1, a: 0.0, b: 1.0, u_max: 1.0 }
    }
}

impl LinearParams {
    pub fn from_map(p: &BTreeMap<String, f64>) -> Result<Self> {
        take(p, &["dim", "a", "b", "u_max"], "linear_test")?;
        let d = Self::default();
        let dim = p.get("dim").copied().unwrap_or(d.dim as f64);
        if !(dim >= 1.0 && dim.fract() == 0.0 && dim <= 16.0) {
            return Err(NcpError::InvalidModel(format!("dim must be an integer in 1..=16, got {dim}")));
        }
        Ok(LinearParams {
            dim: dim as usize,
            a: p.get("a").copied().unwrap_or(d.a),
            b: p.get("b").copied().unwrap_or(d.b),
            u_max: p.get("u_max").copied().unwrap_or(d.u_max),
        })
    }
}

pub fn linear_test(p: &LinearParams) -> Result<SystemModel> {
    let (a, b, n) = (p.a, p.b, p.dim);
    let umax = positive("u_max", p.u_max)?;
    SystemModel::new(
        "linear_test",
        n,
        move |x: &[f64], u: &[f64], out: &mut [f64]| {
            for k in 0..x.len() {
                out[k] = a * x[k] + b * u[k];
            }
        },
        vec![-umax; n],
        vec![umax; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![],
    )
}

/// Scalar `ẋ = u`, `u ∈ [-1, 1]`.
pub fn single_integrator() -> SystemModel {
    linear_test(&LinearParams::default()).expect("default linear model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Norm;

    #[test]
    fn builtins_are_registered_and_at_equilibrium() {
        let r = ModelRegistry::builtin();
        assert_eq!(r.names(), ["inverted_pendulum", "linear_test", "unicycle"]);
        for name in r.names() {
            let m = r.build(name, &BTreeMap::new()).unwrap();
            m.check_equilibrium(&Norm::max(m.dim)).unwrap();
        }
    }

    #[test]
    fn unknown_model_and_parameter() {
        let r = ModelRegistry::builtin();
        assert!(matches!(r.build("cartpole", &BTreeMap::new()), Err(NcpError::UnknownModel(_))));
        let p = BTreeMap::from([("mas".to_string(), 1.0)]);
        assert!(r.build("inverted_pendulum", &p).is_err());
    }

    #[test]
    fn plug_in_model() {
        let mut r = ModelRegistry::builtin();
        r.register("double_integrator", |_| {
            SystemModel::new(
                "double_integrator",
                2,
                |x: &[f64], u: &[f64], out: &mut [f64]| {
                    out[0] = x[1];
                    out[1] = u[0];
                },
                vec![-1.0],
                vec![1.0],
                vec![0.0, 0.0],
                vec![0.0],
                vec![],
            )
        });
        assert_eq!(r.build("double_integrator", &BTreeMap::new()).unwrap().dim, 2);
    }

    #[test]
    fn pendulum_vector_field() {
        let m = inverted_pendulum(&PendulumParams { mass: 2.0, length: 0.5, gravity: 9.81, torque_max: 1.0 }).unwrap();
        let f = m.f(&[0.3, 1.5], &[0.5]);
        assert!((f[0] - 1.5).abs() < 1e-15);
        assert!((f[1] - (9.81 / 0.5 * 0.3f64.sin() + 0.5 / (2.0 * 0.25))).abs() < 1e-12);
    }
}

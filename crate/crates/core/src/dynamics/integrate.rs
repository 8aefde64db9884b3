//! Classical fixed-step RK4.

use super::model::SystemModel;
use super::signal::{ControlSignal, Segment, Trajectory};
use crate::error::{NcpError, Result};
use crate::geometry::wrap_angle;

/// Reusable stage buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// Advances `x` by one step of length `dt` under constant `u`, then wraps
/// angular coordinates.
#[inline]
pub fn rk4_step(model: &SystemModel, x: &mut [f64], u: &[f64], dt: f64, s: &mut Rk4Scratch) {
    let d = x.len();
    model.eval(x, u, &mut s.k1);
    for k in 0..d {
        s.tmp[k] = x[k] + 0.5 * dt * s.k1[k];
    }
    model.eval(&s.tmp, u, &mut s.k2);
    for k in 0..d {
        s.tmp[k] = x[k] + 0.5 * dt * s.k2[k];
    }
    model.eval(&s.tmp, u, &mut s.k3);
    for k in 0..d {
        s.tmp[k] = x[k] + dt * s.k3[k];
    }
    model.eval(&s.tmp, u, &mut s.k4);
    for k in 0..d {
        x[k] += dt / 6.0 * (s.k1[k] + 2.0 * s.k2[k] + 2.0 * s.k3[k] + s.k4[k]);
    }
    for &k in &model.angular_dims {
        x[k] = wrap_angle(x[k]);
    }
}

/// Integrates `signal` from `x0`, returning the flat state history
/// (`steps + 1` rows of length `dim`). `t0` only offsets reported times.
pub fn integrate_flat(model: &SystemModel, x0: &[f64], signal: &ControlSignal, t0: f64) -> Result<Vec<f64>> {
    let d = model.dim;
    if x0.len() != d {
        return Err(NcpError::InvalidInput(format!("initial state has length {}, expected {d}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(NcpError::InvalidInput("initial state is not finite".into()));
    }
    if signal.input_dim() != model.input_dim && signal.steps() > 0 {
        return Err(NcpError::InvalidInput(format!(
            "signal input dimension {} does not match model ({})",
            signal.input_dim(),
            model.input_dim
        )));
    }
    let n = signal.steps();
    let dt = signal.dt();
    let mut out = Vec::with_capacity((n + 1) * d);
    let mut x = x0.to_vec();
    for &k in &model.angular_dims {
        x[k] = wrap_angle(x[k]);
    }
    out.extend_from_slice(&x);
    let mut s = Rk4Scratch::new(d);
    for step in 0..n {
        rk4_step(model, &mut x, signal.value(step), dt, &mut s);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NcpError::IntegrationDiverged { time: t0 + (step + 1) as f64 * dt });
        }
        out.extend_from_slice(&x);
    }
    Ok(out)
}

/// Final state only, without storing the history.
pub fn integrate_final(model: &SystemModel, x0: &[f64], signal: &ControlSignal) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for &k in &model.angular_dims {
        x[k] = wrap_angle(x[k]);
    }
    let mut s = Rk4Scratch::new(model.dim);
    for step in 0..signal.steps() {
        rk4_step(model, &mut x, signal.value(step), signal.dt(), &mut s);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NcpError::IntegrationDiverged { time: (step + 1) as f64 * signal.dt() });
        }
    }
    Ok(x)
}

/// `φ(t, x0, signal)` sampled at every integrator step.
pub fn integrate(model: &SystemModel, x0: &[f64], signal: &ControlSignal) -> Result<Trajectory> {
    let flat = integrate_flat(model, x0, signal, 0.0)?;
    let states: Vec<Vec<f64>> = flat.chunks_exact(model.dim).map(<[f64]>::to_vec).collect();
    let times = (0..states.len()).map(|k| k as f64 * signal.dt()).collect();
    Ok(Trajectory {
        times,
        states,
        applied_segments: vec![Segment { index: 0, start: 0.0, duration: signal.duration() }],
    })
}

use serde::{Deserialize, Serialize};

use super::model::SystemModel;
use crate::error::{NcpError, Result};

/// Number of integrator steps in `tau`, which must be a multiple of `dt`.
pub fn steps_for(tau: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NcpError::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let n = (tau / dt).round();
    if !(tau >= 0.0) || (n * dt - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(NcpError::InvalidInput(format!("duration {tau} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Piecewise-constant input, one value per integrator step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SignalDoc", try_from = "SignalDoc")]
pub struct ControlSignal {
    dt: f64,
    input_dim: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SignalDoc {
    dt: f64,
    values: Vec<Vec<f64>>,
}

impl From<ControlSignal> for SignalDoc {
    fn from(s: ControlSignal) -> Self {
        SignalDoc { dt: s.dt, values: s.iter().map(<[f64]>::to_vec).collect() }
    }
}

impl TryFrom<SignalDoc> for ControlSignal {
    type Error = NcpError;

    fn try_from(d: SignalDoc) -> Result<Self> {
        ControlSignal::new(d.dt, d.values)
    }
}

impl ControlSignal {
    pub fn new(dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let input_dim = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != input_dim) {
            return Err(NcpError::InvalidInput("signal values have mixed lengths".into()));
        }
        Self::from_flat(dt, input_dim, values.concat())
    }

    pub fn from_flat(dt: f64, input_dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NcpError::InvalidInput(format!("signal dt must be > 0, got {dt}")));
        }
        if input_dim == 0 && !values.is_empty() || input_dim > 0 && values.len() % input_dim != 0 {
            return Err(NcpError::InvalidInput("signal values do not divide into inputs".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NcpError::InvalidInput("signal has non-finite values".into()));
        }
        Ok(ControlSignal { dt, input_dim, values })
    }

    /// `u` held for `tau`, checked against the model's input box.
    pub fn constant_hold(model: &SystemModel, u: &[f64], tau: f64, dt: f64) -> Result<Self> {
        if !model.input_in_bounds(u) {
            return Err(NcpError::InvalidInput(format!("input {u:?} is outside the input box")));
        }
        let n = steps_for(tau, dt)?;
        Self::from_flat(dt, u.len(), u.repeat(n))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn steps(&self) -> usize {
        if self.input_dim == 0 {
            0
        } else {
            self.values.len() / self.input_dim
        }
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    #[inline]
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.input_dim..(k + 1) * self.input_dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.input_dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Restriction to the first `steps` steps.
    pub fn truncate(&self, steps: usize) -> Self {
        let n = steps.min(self.steps());
        ControlSignal {
            dt: self.dt,
            input_dim: self.input_dim,
            values: self.values[..n * self.input_dim].to_vec(),
        }
    }

    /// Restriction to `(0, t]`; `t` must be a multiple of dt.
    pub fn prefix(&self, t: f64) -> Result<Self> {
        let n = steps_for(t, self.dt)?;
        if n > self.steps() {
            return Err(NcpError::InvalidInput(format!(
                "prefix {t} exceeds signal duration {}",
                self.duration()
            )));
        }
        Ok(self.truncate(n))
    }

    pub fn within_bounds(&self, model: &SystemModel) -> bool {
        self.input_dim == model.input_dim && self.iter().all(|u| model.input_in_bounds(u))
    }
}

/// One link of the chain: the signal index applied, when, and for how long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub start: f64,
    pub duration: f64,
}

/// Time-stamped states on the integrator grid (`t_k = k dt`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub applied_segments: Vec<Segment>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Segment index active at step `k` (the segment starting at `k` for chain points).
    pub fn segment_at_step(&self, k: usize, dt: f64) -> Option<usize> {
        let t = k as f64 * dt;
        self.applied_segments
            .iter()
            .rev()
            .find(|s| s.start <= t + 1e-9 * dt)
            .map(|s| s.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> SystemModel {
        SystemModel::new(
            "scalar",
            1,
            |_: &[f64], u: &[f64], out: &mut [f64]| out[0] = u[0],
            vec![-1.0],
            vec![1.0],
            vec![0.0],
            vec![0.0],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn constant_hold_duration_and_prefix() {
        let m = scalar();
        let s = ControlSignal::constant_hold(&m, &[0.5], 0.01, 0.01).unwrap();
        assert_eq!(s.steps(), 1);
        assert!((s.duration() - 0.01).abs() < 1e-15);
        let long = ControlSignal::constant_hold(&m, &[0.5], 1.0, 0.01).unwrap();
        let short = ControlSignal::constant_hold(&m, &[0.5], 0.4, 0.01).unwrap();
        assert_eq!(long.prefix(0.4).unwrap(), short);
    }

    #[test]
    fn rejects_out_of_box_and_misaligned() {
        let m = scalar();
        assert!(ControlSignal::constant_hold(&m, &[1.5], 1.0, 0.01).is_err());
        assert!(ControlSignal::constant_hold(&m, &[0.5], 0.015, 0.01).is_err());
    }

    #[test]
    fn serializes_as_dt_and_rows() {
        let s = ControlSignal::new(0.1, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"dt":0.1,"values":[[1.0,2.0],[3.0,4.0]]}"#);
        let back: ControlSignal = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}

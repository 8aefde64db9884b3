use super::assignment::AssignmentSet;
use super::certificate::Certificate;
use crate::dynamics::{integrate_flat, ControlSignal, Segment, SystemModel, Trajectory};
use crate::error::{NcpError, Result};
use crate::geometry::Metric;

/// Signal and step count applied at a chain point with policy index `i`.
fn segment_signal(set: &AssignmentSet, i: usize) -> (ControlSignal, usize) {
    if i == 0 {
        let s = set.alphabet.default_signal().clone();
        let n = s.steps();
        (s, n)
    } else {
        let t = &set.triples[i - 1];
        (set.alphabet.get(t.signal).truncate(t.steps), t.steps)
    }
}

/// Closed-loop chain execution: at each chain point look up
/// `i = index_map(x)`, apply `v_i` open-loop for its verified duration (or
/// the default for `τ₀`), and repeat until `horizon` is reached.
pub fn rollout(model: &SystemModel, set: &AssignmentSet, x0: &[f64], horizon: f64) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(NcpError::InvalidInput(format!("horizon must be > 0, got {horizon}")));
    }
    if x0.len() != model.dim {
        return Err(NcpError::InvalidInput(format!("start has length {}, expected {}", x0.len(), model.dim)));
    }
    let d = model.dim;
    let dt = set.dt;
    let total = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let mut x = x0.to_vec();
    set.metric.wrap(&mut x);
    let mut states = vec![x.clone()];
    let mut segments = Vec::new();
    let mut step = 0usize;
    while step < total {
        let i = set.index_map(&x);
        let (sig, n) = segment_signal(set, i);
        let n = n.max(1);
        let flat = integrate_flat(model, &x, &sig, step as f64 * dt).map_err(|e| match e {
            NcpError::IntegrationDiverged { time } => NcpError::RolloutDiverged { segment: segments.len(), time },
            other => other,
        })?;
        segments.push(Segment { index: i, start: step as f64 * dt, duration: n as f64 * dt });
        for row in flat[d..].chunks_exact(d) {
            states.push(row.to_vec());
        }
        x.copy_from_slice(&flat[flat.len() - d..]);
        step += n;
    }
    let times = (0..states.len()).map(|k| k as f64 * dt).collect();
    Ok(Trajectory { times, states, applied_segments: segments })
}

/// Chain points `x_n` (states at segment starts) of a rollout, plus the final state.
pub fn chain_points(traj: &Trajectory, dt: f64) -> Vec<(f64, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>)> = traj
        .applied_segments
        .iter()
        .map(|s| {
            let k = (s.start / dt).round() as usize;
            (traj.times[k], traj.states[k].clone())
        })
        .collect();
    let last = traj.states.len() - 1;
    out.push((traj.times[last], traj.states[last].clone()));
    out
}

/// How a rollout sits against the certified envelope
/// `K e^{−λt} ‖x0 − x*‖ + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    /// `max_t (‖φ(t) − x*‖ − envelope(t))`; at most zero when the bound holds.
    pub max_violation: f64,
    /// First time after which the state never leaves the closed c-ball.
    pub settle_time: Option<f64>,
    pub final_distance: f64,
}

pub fn envelope_check(traj: &Trajectory, cert: &Certificate, metric: &Metric, x_star: &[f64]) -> EnvelopeCheck {
    let r0 = metric.dist(&traj.states[0], x_star);
    let dists: Vec<f64> = traj.states.iter().map(|x| metric.dist(x, x_star)).collect();
    let max_violation = traj
        .times
        .iter()
        .zip(&dists)
        .map(|(&t, &d)| d - cert.envelope(t, r0))
        .fold(f64::NEG_INFINITY, f64::max);
    let settle_time = match dists.iter().rposition(|&d| d > cert.c) {
        None => Some(traj.times[0]),
        Some(k) if k + 1 < dists.len() => Some(traj.times[k + 1]),
        Some(_) => None,
    };
    EnvelopeCheck { max_violation, settle_time, final_distance: *dists.last().unwrap_or(&0.0) }
}

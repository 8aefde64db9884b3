//! Sampled estimates of the reachable tube, the Lipschitz constant `L` and
//! the speed bound `F`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::integrate::integrate_flat;
use super::model::SystemModel;
use super::signal::ControlSignal;
use crate::error::{NcpError, Result};
use crate::geometry::{Metric, Region};

/// Sample counts and inflation for [`estimate_tube`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationParams {
    pub boundary_samples: usize,
    pub interior_samples: usize,
    pub pair_samples: usize,
    pub speed_samples: usize,
    pub inflation: f64,
}

impl Default for EstimationParams {
    fn default() -> Self {
        EstimationParams {
            boundary_samples: 64,
            interior_samples: 32,
            pair_samples: 4000,
            speed_samples: 2000,
            inflation: 1.2,
        }
    }
}

/// Box enclosing `R^τ(S)` together with `L` and `F` over it. Both constants
/// already include `inflation`; the raw sampled maxima are kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub region: Region,
    pub lipschitz: f64,
    pub speed_bound: f64,
    pub inflation: f64,
    pub raw_lipschitz: f64,
    pub raw_speed_bound: f64,
}

fn uniform_input<R: Rng>(model: &SystemModel, rng: &mut R) -> Vec<f64> {
    (0..model.input_dim)
        .map(|k| {
            let (l, h) = (model.input_lower[k], model.input_upper[k]);
            if h > l {
                rng.random_range(l..=h)
            } else {
                l
            }
        })
        .collect()
}

fn in_box<R: Rng>(lo: &[f64], hi: &[f64], rng: &mut R) -> Vec<f64> {
    lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
}

fn box_corners(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    if d > 10 {
        return Vec::new();
    }
    (0..1usize << d)
        .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect())
        .collect()
}

/// Points on the boundary of `region`: box corners and random face points, or
/// random directions scaled to the sphere for balls.
fn boundary_points<R: Rng>(region: &Region, metric: &Metric, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    match region {
        Region::Union { parts } => {
            let per = count.div_ceil(parts.len());
            parts.iter().flat_map(|p| boundary_points(p, metric, per, rng)).collect()
        }
        Region::Ball { center, radius } => (0..count)
            .map(|_| {
                let dir: Vec<f64> = (0..center.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = metric.norm.eval(&dir).max(1e-12);
                let mut x: Vec<f64> = center.iter().zip(&dir).map(|(c, v)| c + radius * v / n).collect();
                metric.wrap(&mut x);
                x
            })
            .collect(),
        Region::Box { .. } => {
            let (lo, hi) = region.bounding_box(metric);
            let mut pts = box_corners(&lo, &hi);
            pts.truncate(count);
            while pts.len() < count {
                let mut x = in_box(&lo, &hi, rng);
                let k = rng.random_range(0..lo.len());
                x[k] = if rng.random::<bool>() { hi[k] } else { lo[k] };
                pts.push(x);
            }
            pts
        }
    }
}

/// Bounding box of the states visited by constant admissible inputs from
/// boundary and interior samples of `region` over `[0, tau]`, with half-widths
/// scaled by `inflation`. `L` and `F` are then estimated over that box.
pub fn estimate_tube(
    model: &SystemModel,
    region: &Region,
    metric: &Metric,
    tau: f64,
    dt: f64,
    params: &EstimationParams,
    seed: u64,
) -> Result<TubeEstimate> {
    if !(tau > 0.0) {
        return Err(NcpError::InvalidInput(format!("tube horizon must be > 0, got {tau}")));
    }
    if params.boundary_samples < 2 * model.dim {
        return Err(NcpError::config(
            "estimation.boundary_samples",
            format!("must be >= 2 d = {}", 2 * model.dim),
        ));
    }
    if !(params.inflation >= 1.0) {
        return Err(NcpError::config("estimation.inflation", "must be >= 1"));
    }
    region.validate(metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = boundary_points(region, metric, params.boundary_samples, &mut rng);
    starts.extend((0..params.interior_samples).map(|_| region.sample(&mut rng, metric)));

    let mut inputs = model.input_corners();
    inputs.push(model.equilibrium_input.clone());
    let (mut lo, mut hi) = region.bounding_box(metric);
    let steps_tau = (tau / dt).ceil() * dt;
    for x0 in &starts {
        let mut us = inputs.clone();
        us.push(uniform_input(model, &mut rng));
        for u in &us {
            let sig = ControlSignal::constant_hold(model, u, steps_tau, dt)?;
            let flat = integrate_flat(model, x0, &sig, 0.0)?;
            for x in flat.chunks_exact(model.dim) {
                for k in 0..model.dim {
                    lo[k] = lo[k].min(x[k]);
                    hi[k] = hi[k].max(x[k]);
                }
            }
        }
    }
    for k in 0..model.dim {
        let (c, h) = (0.5 * (lo[k] + hi[k]), 0.5 * (hi[k] - lo[k]) * params.inflation);
        lo[k] = c - h;
        hi[k] = c + h;
        if metric.angular[k] && (lo[k] <= -PI || hi[k] >= PI) {
            lo[k] = -PI;
            hi[k] = PI;
        }
    }
    let tube = Region::boxed(lo, hi);
    let raw_l = estimate_lipschitz(model, &tube, metric, params.pair_samples, 1.0, seed ^ 0x4c)?;
    let raw_f = estimate_speed_bound(model, &tube, metric, params.speed_samples, 1.0, seed ^ 0x46)?;
    Ok(TubeEstimate {
        region: tube,
        lipschitz: raw_l * params.inflation,
        speed_bound: raw_f * params.inflation,
        inflation: params.inflation,
        raw_lipschitz: raw_l,
        raw_speed_bound: raw_f,
    })
}

/// `inflation · max ‖f(y,u) − f(x,u)‖ / ‖y − x‖` over sampled pairs in
/// `tube`. Half the pairs are short-range (`‖y − x‖ ~ 1e-4`) to approach the
/// local supremum.
pub fn estimate_lipschitz(
    model: &SystemModel,
    tube: &Region,
    metric: &Metric,
    pair_samples: usize,
    inflation: f64,
    seed: u64,
) -> Result<f64> {
    if pair_samples < 100 {
        return Err(NcpError::config("estimation.pair_samples", "must be >= 100"));
    }
    tube.validate(metric)
        .map_err(|e| NcpError::InvalidRegion(format!("cannot estimate a Lipschitz constant: {e}")))?;
    let (lo, hi) = tube.bounding_box(metric);
    if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
        return Err(NcpError::InvalidRegion("Lipschitz region has zero volume".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners = model.input_corners();
    let (mut fx, mut fy, mut df) = (vec![0.0; model.dim], vec![0.0; model.dim], vec![0.0; model.dim]);
    let mut best = 0.0f64;
    for i in 0..pair_samples {
        let x = tube.sample(&mut rng, metric);
        let u = if i % 2 == 0 { uniform_input(model, &mut rng) } else { corners[i / 2 % corners.len()].clone() };
        let mut y = if i % 2 == 0 {
            tube.sample(&mut rng, metric)
        } else {
            x.iter()
                .zip(&lo)
                .zip(&hi)
                .map(|((v, l), h)| v + 1e-4 * (h - l).min(1.0) * rng.random_range(-1.0..1.0))
                .collect()
        };
        metric.wrap(&mut y);
        let dist = metric.dist(&y, &x);
        if dist < 1e-12 {
            continue;
        }
        model.eval(&x, &u, &mut fx);
        model.eval(&y, &u, &mut fy);
        for k in 0..model.dim {
            df[k] = fy[k] - fx[k];
        }
        best = best.max(metric.norm.eval(&df) / dist);
    }
    Ok(best * inflation)
}

/// `inflation · max ‖f(x,u)‖` over sampled states of `region` (plus its box
/// corners) and inputs from `U` (plus its vertices).
pub fn estimate_speed_bound(
    model: &SystemModel,
    region: &Region,
    metric: &Metric,
    samples: usize,
    inflation: f64,
    seed: u64,
) -> Result<f64> {
    if samples < 100 {
        return Err(NcpError::config("estimation.speed_samples", "must be >= 100"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = region.bounding_box(metric);
    let mut states: Vec<Vec<f64>> =
        box_corners(&lo, &hi).into_iter().filter(|x| region.contains(x, metric)).collect();
    states.extend((0..samples).map(|_| region.sample(&mut rng, metric)));
    let mut inputs = model.input_corners();
    inputs.push(model.equilibrium_input.clone());
    let mut f = vec![0.0; model.dim];
    let mut best = 0.0f64;
    for x in &states {
        for u in inputs.iter().cloned().chain(std::iter::once(uniform_input(model, &mut rng))) {
            model.eval(x, &u, &mut f);
            best = best.max(metric.norm.eval(&f));
        }
    }
    Ok(best * inflation)
}

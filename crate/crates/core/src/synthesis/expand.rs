use std::f64::consts::PI;
use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use super::cells::{tau_cap_steps, CellResult, Ctx};
use super::config::{GridMode, SynthesisConfig};
use super::synthesize::{assemble, finish, trim, Assembled};
use crate::dynamics::{estimate_tube, steps_for, SystemModel, TubeEstimate};
use crate::error::{NcpError, Result};
use crate::geometry::{Cell, Metric, Region};
use crate::policy::{AssignmentSet, Certificate};

/// Slack allowed when checking that a new ball stays out of the old region.
const FACE_TOL: f64 = 1e-9;

/// Centers along one axis for cubes of weighted half-width `h` tiling
/// `[lo, hi]`; the last cube is pulled back inside instead of overhanging.
fn axis_centers(lo: f64, hi: f64, half: f64) -> Vec<f64> {
    let n = ((hi - lo) / (2.0 * half) - 1e-12).ceil().max(1.0) as usize;
    (0..n).map(|j| (lo + (2 * j + 1) as f64 * half).min(hi - half)).collect()
}

/// Tiles the bounding box of `region` with equal cubes of weighted
/// half-width at most `h`, all contained in the box.
fn tile_box(region: &Region, metric: &Metric, h: f64) -> Vec<Cell> {
    let (lo, hi) = region.bounding_box(metric);
    let w = &metric.norm.weights;
    let h = (0..lo.len()).map(|k| 0.5 * (hi[k] - lo[k]) * w[k]).fold(h, f64::min);
    let axes: Vec<Vec<f64>> = (0..lo.len()).map(|k| axis_centers(lo[k], hi[k], h / w[k])).collect();
    let mut cells = vec![Vec::new()];
    for axis in &axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    cells.into_iter().map(|center| Cell { center, half_width: h }).collect()
}

/// Weighted max-norm distance from `x` to the bounding box of `region`.
fn box_distance(region: &Region, metric: &Metric, x: &[f64]) -> f64 {
    let (lo, hi) = region.bounding_box(metric);
    (0..lo.len())
        .map(|k| {
            if metric.angular[k] && hi[k] - lo[k] >= 2.0 * PI - 1e-9 {
                0.0
            } else {
                (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0) * metric.norm.weights[k]
            }
        })
        .fold(0.0, f64::max)
}

/// Splits cells whose ball reaches into the interior of `old` until they
/// clear it; cells still touching after `depth` splits are returned apart.
fn clear_of(old: &Region, metric: &Metric, cells: Vec<Cell>, depth: usize, ctx: &Ctx<'_>) -> (Vec<Cell>, Vec<Cell>) {
    let mut clear = Vec::new();
    let mut stuck = Vec::new();
    let mut todo: Vec<(Cell, usize)> = cells.into_iter().map(|c| (c, 0)).collect();
    while let Some((c, d)) = todo.pop() {
        if old.signed_distance(&c.center, metric) >= c.radius(metric) - FACE_TOL {
            clear.push(c);
        } else if old.contains(&c.center, metric) {
            continue;
        } else if d < depth {
            todo.extend(c.split(metric).into_iter().filter(|k| ctx.keep(k)).map(|k| (k, d + 1)));
        } else {
            stuck.push(c);
        }
    }
    (clear, stuck)
}

fn flatten_union(a: &Region, b: &Region) -> Region {
    let mut parts = match a {
        Region::Union { parts } => parts.clone(),
        r => vec![r.clone()],
    };
    parts.push(b.clone());
    Region::Union { parts }
}

/// Extends a verified set to a region disjoint from the one it certifies.
/// New cells must land in the old region (directly, or through a bootstrap
/// into existing direct triples) and their balls never reach the old
/// interior, so the policy on the old region is left untouched.
pub fn expand(
    model: &SystemModel,
    set: &AssignmentSet,
    new_region: &Region,
    cfg: &SynthesisConfig,
) -> Result<(AssignmentSet, Certificate)> {
    let started = Instant::now();
    cfg.validate()?;
    set.validate(model)?;
    let metric = set.metric.clone();
    new_region.validate(&metric)?;
    if !set.region.interiors_disjoint(new_region, &metric) {
        return Err(NcpError::RegionOverlap(format!("{new_region:?} meets {:?}", set.region)));
    }
    let old = &set.region;
    let x_star = set.equilibrium.clone();

    let fresh = estimate_tube(model, new_region, &metric, cfg.tau_max, cfg.dt, &cfg.estimation, cfg.seed)?;
    let estimate = TubeEstimate {
        region: flatten_union(&set.estimate.region, &fresh.region),
        lipschitz: set.estimate.lipschitz.max(fresh.lipschitz),
        speed_bound: set.estimate.speed_bound.max(fresh.speed_bound),
        inflation: set.estimate.inflation,
        raw_lipschitz: set.estimate.raw_lipschitz.max(fresh.raw_lipschitz),
        raw_speed_bound: set.estimate.raw_speed_bound.max(fresh.raw_speed_bound),
    };
    log::info!("expansion: L = {:.4} (was {:.4})", estimate.lipschitz, set.estimate.lipschitz);

    let inradius = old.inradius_at(&x_star, &metric);
    let tau_steps = steps_for(cfg.tau_max, cfg.dt)?;
    let max_steps = tau_cap_steps(cfg.eps, estimate.lipschitz, cfg.dt, tau_steps, inradius)?;
    let ctx = Ctx {
        model,
        metric: &metric,
        target: old,
        cover: new_region,
        cfg,
        lipschitz: estimate.lipschitz,
        max_steps,
        floor: cfg.eps / 100.0,
        progress: AtomicUsize::new(0),
    };

    let fraction = match cfg.grid {
        GridMode::Fraction { initial_radius_fraction } => initial_radius_fraction,
        GridMode::Rho { lambda, k_gain } => {
            crate::geometry::compute_rho(k_gain, lambda, cfg.alpha, max_steps as f64 * cfg.dt, estimate.lipschitz)?
        }
    };
    let h = (fraction * box_distance(new_region, &metric, &x_star)).max(cfg.eps);
    let tiles: Vec<Cell> = tile_box(new_region, &metric, h).into_iter().filter(|c| ctx.keep(c)).collect();
    let initial_cells = tiles.len();
    let (cells, stuck) = clear_of(old, &metric, tiles, cfg.max_splits, &ctx);
    log::info!("expansion grid: {initial_cells} tiles, {} cells clear of the old region", cells.len());

    let mut results = ctx.process_all(cells)?;
    results.retain(|r| match r {
        CellResult::Verified { cell, .. } | CellResult::Failed { cell, .. } => {
            old.signed_distance(&cell.center, &metric) >= cell.radius(&metric) - FACE_TOL
        }
    });

    let mut base = set.clone();
    base.estimate = estimate.clone();
    let from = base.len();
    let budget = max_steps as f64 * cfg.dt + 1e-9;
    let Assembled { mut set, mut failed, verified, bootstrapped } = assemble(&ctx, results, base, budget, true)?;
    let trimmed = trim(&ctx, &mut set, from)?;
    failed.extend(trimmed.cells);
    failed.extend(stuck);
    set.region = flatten_union(old, new_region);
    let counts = (verified - trimmed.direct, bootstrapped - trimmed.bootstrapped);
    log::info!("expansion: verified {}, bootstrapped {}, failed {}", counts.0, counts.1, failed.len());

    match finish(&ctx, set, failed, counts, initial_cells, fraction, &estimate, started, None) {
        Ok(out) if out.failed.is_empty() => Ok((out.assignments, out.certificate)),
        Ok(out) => Err(NcpError::ExpansionIncomplete {
            cells: out.failed,
            partial: Box::new((out.assignments, out.certificate)),
        }),
        Err(NcpError::SynthesisIncomplete { partial, .. }) => {
            let p = *partial;
            Err(NcpError::ExpansionIncomplete { cells: p.failed, partial: Box::new((p.assignments, p.certificate)) })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Norm;

    #[test]
    fn tiles_stay_inside_and_cover() {
        let m = Metric::flat(Norm::max(2));
        let r = Region::boxed(vec![0.0, 5.0], vec![3.0, 6.25]);
        let cells = tile_box(&r, &m, 0.5);
        assert!(cells.iter().all(|c| c.half_width == 0.5));
        for c in &cells {
            assert!(c.center[0] - 0.5 >= -1e-12 && c.center[0] + 0.5 <= 3.0 + 1e-12);
            assert!(c.center[1] - 0.5 >= 5.0 - 1e-12 && c.center[1] + 0.5 <= 6.25 + 1e-12);
        }
        for i in 0..=30 {
            for j in 0..=10 {
                let x = [3.0 * i as f64 / 30.0, 5.0 + 1.25 * j as f64 / 10.0];
                assert!(cells.iter().any(|c| c.contains(&x, &m)), "{x:?}");
            }
        }
    }

    #[test]
    fn narrow_axis_shrinks_cells() {
        let m = Metric::flat(Norm::max(2));
        let cells = tile_box(&Region::boxed(vec![0.0, 0.0], vec![4.0, 0.5]), &m, 1.0);
        assert!(cells.iter().all(|c| c.half_width == 0.25));
        assert_eq!(cells.len(), 8);
    }

    #[test]
    fn union_flattens() {
        let a = Region::boxed(vec![0.0], vec![1.0]);
        let b = Region::boxed(vec![1.0], vec![2.0]);
        let c = Region::boxed(vec![2.0], vec![3.0]);
        match flatten_union(&flatten_union(&a, &b), &c) {
            Region::Union { parts } => assert_eq!(parts.len(), 3),
            r => panic!("{r:?}"),
        }
    }
}

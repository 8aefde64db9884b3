use std::f64::consts::PI;
use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use rayon::prelude::*;

use super::cells::{recheck_bootstrap, try_bootstrap, tau_cap_steps, BootstrapLedger, CellResult, Ctx};
use super::config::{GridMode, SynthesisConfig};
use super::{alpha_stats, Synthesis, SynthesisReport};
use crate::dynamics::{estimate_tube, steps_for, SystemModel, TubeEstimate};
use crate::error::{NcpError, Result};
use crate::geometry::{build_annulus_grid, compute_rho, BallIndex, Cell, Metric, Norm, NormKind, Region};
use crate::policy::{AssignmentSet, Certificate, ModelRef, Triple, TripleKind};
use crate::search::Alphabet;
use crate::verification::{check_covering, check_decrease, check_excursion, check_feasibility};

/// Largest weighted max-norm distance from `x*` to a point of the bounding
/// box of `region`.
fn outer_radius(region: &Region, metric: &Metric, x_star: &[f64]) -> f64 {
    let (lo, hi) = region.bounding_box(metric);
    (0..lo.len())
        .map(|k| {
            let w = metric.norm.weights[k];
            if metric.angular[k] && hi[k] - lo[k] >= 2.0 * PI - 1e-9 {
                PI * w
            } else {
                (lo[k] - x_star[k]).abs().max((hi[k] - x_star[k]).abs()) * w
            }
        })
        .fold(0.0, f64::max)
}

/// Inner radius of the max-norm grid so that it covers the annulus
/// `‖x − x*‖ >= ε` of the working norm.
fn grid_eps(norm: &Norm, eps: f64) -> f64 {
    match norm.kind {
        NormKind::Max => eps,
        NormKind::Euclidean => eps / (norm.dim() as f64).sqrt(),
    }
}

pub(crate) struct Assembled {
    pub set: AssignmentSet,
    pub failed: Vec<Cell>,
    pub verified: usize,
    pub bootstrapped: usize,
}

/// Turns per-cell results into triples, runs the bootstrap pass over the
/// failures and trims anything that no longer re-checks.
pub(crate) fn assemble(
    ctx: &Ctx<'_>,
    results: Vec<CellResult>,
    mut set: AssignmentSet,
    tau_budget: f64,
    require_feasible: bool,
) -> Result<Assembled> {
    let mut failures = Vec::new();
    let mut fresh = Vec::new();
    for r in results {
        match r {
            CellResult::Verified { cell, signal, outcome } => {
                let idx = set.alphabet.push(signal.truncate(outcome.steps));
                fresh.push(Triple {
                    radius: cell.radius(ctx.metric),
                    center: cell.center,
                    half_width: cell.half_width,
                    signal: idx,
                    tau: outcome.tau_i,
                    steps: outcome.steps,
                    alpha: outcome.alpha_i,
                    slack: outcome.slack,
                    kind: TripleKind::Direct,
                });
            }
            CellResult::Failed { cell, signal } => failures.push((cell, signal)),
        }
    }
    let verified = fresh.len();
    set.extend(fresh);

    let mut failed = Vec::new();
    let mut boot = Vec::new();
    if ctx.cfg.bootstrap.enabled && !failures.is_empty() {
        let anchors: Vec<Triple> = set.triples.iter().filter(|t| t.is_direct()).cloned().collect();
        let balls: Vec<_> = anchors.iter().map(Triple::ball).collect();
        let index = BallIndex::new(&balls, ctx.metric);
        let mut ledger = BootstrapLedger::default();
        for (cell, signal) in failures {
            match try_bootstrap(ctx, &cell, &signal, &anchors, &index, &ledger, tau_budget, require_feasible)? {
                Some(hit) => {
                    let idx = set.alphabet.push(signal.truncate(hit.steps));
                    ledger.balls.push(cell.ball(ctx.metric));
                    ledger.landings.push(hit.landing);
                    boot.push(Triple {
                        radius: cell.radius(ctx.metric),
                        center: cell.center,
                        half_width: cell.half_width,
                        signal: idx,
                        tau: hit.steps as f64 * ctx.cfg.dt,
                        steps: hit.steps,
                        alpha: ctx.cfg.bootstrap.alpha_ratio * ctx.cfg.alpha,
                        slack: 1.0 - hit.worst_ratio,
                        kind: TripleKind::Bootstrap { anchor_tau: hit.anchor_tau },
                    });
                }
                None => failed.push(cell),
            }
        }
    } else {
        failed.extend(failures.into_iter().map(|(c, _)| c));
    }
    let bootstrapped = boot.len();
    set.extend(boot);
    Ok(Assembled { set, failed, verified, bootstrapped })
}

/// Cells removed by [`trim`], split by how they had been certified.
#[derive(Default)]
pub(crate) struct Trimmed {
    pub direct: usize,
    pub bootstrapped: usize,
    pub cells: Vec<Cell>,
}

/// Re-checks every triple from index `from` on and drops the ones that fail.
pub(crate) fn trim(ctx: &Ctx<'_>, set: &mut AssignmentSet, from: usize) -> Result<Trimmed> {
    let anchors: Vec<Triple> = set.triples.iter().filter(|t| t.is_direct()).cloned().collect();
    let balls: Vec<_> = anchors.iter().map(Triple::ball).collect();
    let index = BallIndex::new(&balls, ctx.metric);
    let keep: Result<Vec<bool>> = set.triples[from..]
        .par_iter()
        .map(|t| {
            let sig = set.alphabet.get(t.signal);
            match t.kind {
                TripleKind::Direct => {
                    let dec = check_decrease(ctx.model, ctx.metric, &t.center, t.radius, sig, t.tau, t.alpha, ctx.lipschitz)?;
                    let feas =
                        check_feasibility(ctx.model, ctx.metric, &t.center, t.radius, sig, t.tau, ctx.lipschitz, ctx.target)?;
                    let exc =
                        check_excursion(ctx.model, ctx.metric, &t.center, t.radius, sig, t.tau, ctx.lipschitz, &ctx.excursion())?;
                    Ok(dec.passed && feas.passed && exc.passed)
                }
                TripleKind::Bootstrap { .. } => recheck_bootstrap(ctx, t, sig, &anchors, &index),
            }
        })
        .collect();
    let keep = keep?;
    let mut out = Trimmed::default();
    let mut i = 0;
    set.triples.retain(|t| {
        let k = i < from || keep[i - from];
        i += 1;
        if !k {
            if t.is_direct() {
                out.direct += 1;
            } else {
                out.bootstrapped += 1;
            }
            out.cells.push(Cell { center: t.center.clone(), half_width: t.half_width });
        }
        k
    });
    if !out.cells.is_empty() {
        log::warn!("trim dropped {} triples that failed re-verification", out.cells.len());
        set.reindex();
    }
    Ok(out)
}

pub(crate) fn finish(
    ctx: &Ctx<'_>,
    set: AssignmentSet,
    failed: Vec<Cell>,
    counts: (usize, usize),
    initial_cells: usize,
    rho: f64,
    estimate: &TubeEstimate,
    started: Instant,
    previous: Option<(f64, f64)>,
) -> Result<Synthesis> {
    let cfg = ctx.cfg;
    let tau = Certificate::realized_tau(&set);
    let covering = check_covering(
        set.ball_index(),
        &set.region,
        ctx.x_star(),
        cfg.eps,
        estimate.lipschitz,
        tau,
        ctx.metric,
        cfg.covering_samples,
    )?;
    let certificate = Certificate::assemble(
        Certificate::realized_alpha(&set, cfg.alpha),
        tau,
        estimate.lipschitz,
        estimate.speed_bound,
        estimate.inflation,
        cfg.eps,
        cfg.seed,
        cfg.dt,
        cfg.estimation.pair_samples,
        &covering,
    );
    let (min_alpha, mean_alpha) = alpha_stats(&set);
    let report = SynthesisReport {
        verified_cells: counts.0,
        failed_cells: failed.len(),
        bootstrapped_cells: counts.1,
        min_alpha,
        mean_alpha,
        total_signals: set.alphabet.len(),
        initial_cells,
        covering_ratio: rho,
        uncovered_samples: covering.uncovered.len(),
        wall_time: started.elapsed().as_secs_f64(),
        previous_min_alpha: previous.map(|p| p.0),
        previous_mean_alpha: previous.map(|p| p.1),
        certificate: certificate.clone(),
    };
    let out = Synthesis { assignments: set, certificate, report, failed };
    if covering.complete() {
        Ok(out)
    } else {
        log::warn!(
            "covering incomplete: {} uncovered samples, nesting ok = {}",
            covering.uncovered.len(),
            covering.nesting_ok
        );
        Err(NcpError::SynthesisIncomplete { uncovered: covering.uncovered, partial: Box::new(out) })
    }
}

/// Builds a verified assignment set for `region`: estimate `L`, `F` over
/// the reachable tube, grid the annulus around `x*`, search and verify a
/// signal per cell (splitting failures), bootstrap what is left, trim, and
/// check the covering. An incomplete covering returns
/// [`NcpError::SynthesisIncomplete`] carrying the partial result.
pub fn synthesize(model: &SystemModel, norm: &Norm, region: &Region, cfg: &SynthesisConfig) -> Result<Synthesis> {
    let started = Instant::now();
    cfg.validate()?;
    let metric = Metric::new(norm.clone(), model.angular_flags())?;
    region.validate(&metric)?;
    model.check_equilibrium(norm)?;
    let x_star = model.equilibrium_state.clone();
    let inradius = region.inradius_at(&x_star, &metric);
    if !(inradius > 0.0) {
        return Err(NcpError::InvalidRegion("x* must lie in the interior of S".into()));
    }

    let estimate = estimate_tube(model, region, &metric, cfg.tau_max, cfg.dt, &cfg.estimation, cfg.seed)?;
    log::info!(
        "estimated L = {:.4}, F = {:.4} (inflation {})",
        estimate.lipschitz,
        estimate.speed_bound,
        estimate.inflation
    );
    let tau_steps = steps_for(cfg.tau_max, cfg.dt)?;
    let max_steps = tau_cap_steps(cfg.eps, estimate.lipschitz, cfg.dt, tau_steps, inradius)?;
    if max_steps < tau_steps {
        log::info!("durations capped at {} so the ε-ball nesting holds", max_steps as f64 * cfg.dt);
    }

    let rho = match cfg.grid {
        GridMode::Fraction { initial_radius_fraction } => initial_radius_fraction,
        GridMode::Rho { lambda, k_gain } => {
            compute_rho(k_gain, lambda, cfg.alpha, max_steps as f64 * cfg.dt, estimate.lipschitz)?
        }
    };
    let r_max = outer_radius(region, &metric, &x_star);
    let eps_grid = grid_eps(norm, cfg.eps);
    if !(eps_grid < r_max) {
        return Err(NcpError::config("eps", format!("must be smaller than the region radius {r_max}")));
    }

    let ctx = Ctx {
        model,
        metric: &metric,
        target: region,
        cover: region,
        cfg,
        lipschitz: estimate.lipschitz,
        max_steps,
        floor: cfg.eps / 100.0,
        progress: AtomicUsize::new(0),
    };
    let grid = build_annulus_grid(r_max, eps_grid, rho, &metric, &x_star, Some(region))?;
    let cells: Vec<Cell> = grid.cells.into_iter().filter(|c| ctx.keep(c)).collect();
    let initial_cells = cells.len();
    log::info!("grid: {} annuli, {} splits, {initial_cells} cells (rho = {rho:.4})", grid.annuli, grid.splits);

    let results = ctx.process_all(cells)?;
    let set = AssignmentSet::new(
        ModelRef { name: model.id.clone(), params: model.params.clone() },
        metric.clone(),
        region.clone(),
        x_star.clone(),
        cfg.dt,
        cfg.tau0(),
        Alphabet::with_default(model, cfg.tau0(), cfg.dt)?,
        Vec::new(),
        estimate.clone(),
    );
    let budget = max_steps as f64 * cfg.dt + 1e-9;
    let Assembled { mut set, mut failed, verified, bootstrapped } = assemble(&ctx, results, set, budget, false)?;
    let trimmed = trim(&ctx, &mut set, 0)?;
    let verified = verified - trimmed.direct;
    let bootstrapped = bootstrapped - trimmed.bootstrapped;
    failed.extend(trimmed.cells);
    log::info!("verified {verified}, bootstrapped {bootstrapped}, failed {}", failed.len());
    finish(&ctx, set, failed, (verified, bootstrapped), initial_cells, rho, &estimate, started, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::models;

    #[test]
    fn outer_radius_of_unicycle_box() {
        let m = Metric::new(Norm::max(3), vec![false, false, true]).unwrap();
        let s = Region::boxed(vec![-5.0, -4.0, -PI], vec![3.0, 5.0, PI]);
        assert_eq!(outer_radius(&s, &m, &[0.0; 3]), 5.0);
        let w = Metric::new(Norm::new(NormKind::Euclidean, vec![1.0, 1.0, 0.1]).unwrap(), vec![false, false, true]).unwrap();
        assert_eq!(outer_radius(&Region::boxed(vec![-1.0, -1.0, -PI], vec![1.0, 1.0, PI]), &w, &[0.0; 3]), 1.0);
    }

    #[test]
    fn unstable_scalar_full_coverage() {
        // with L = 0 the excursion factor is 1 and no ball of positive radius passes
        let model = models::linear_test(&models::LinearParams { dim: 1, a: 0.5, b: 1.0, u_max: 2.0 }).unwrap();
        let cfg = SynthesisConfig {
            alpha: 0.1,
            tau_max: 2.0,
            eps: 0.05,
            dt: 0.01,
            search: crate::search::SearchParams { rollouts: 32, iterations: 5, ..Default::default() },
            ..Default::default()
        };
        let out = synthesize(&model, &Norm::max(1), &Region::ball(vec![0.0], 2.0), &cfg).unwrap();
        assert_eq!(out.report.failed_cells, 0);
        assert!(out.certificate.coverage.uncovered == 0 && out.certificate.coverage.nesting_ok);
        assert!(out.assignments.triples.iter().all(|t| t.alpha >= 0.1));
    }

    #[test]
    fn eps_too_large_is_rejected() {
        let model = models::single_integrator();
        let cfg = SynthesisConfig { eps: 3.0, ..Default::default() };
        assert!(synthesize(&model, &Norm::max(1), &Region::ball(vec![0.0], 2.0), &cfg).is_err());
    }
}

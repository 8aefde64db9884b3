//! Per-cell search/verify/split recursion shared by synthesis, refinement
//! and expansion.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::config::SynthesisConfig;
use crate::dynamics::{integrate_flat, ControlSignal, SystemModel};
use crate::error::{NcpError, Result};
use crate::geometry::{Ball, BallIndex, Cell, Metric, Region};
use crate::policy::{Triple, TripleKind};
use crate::search::{search_signal, SearchObjective, SearchParams};
use crate::verification::{
    best_tau, check_bootstrap, excursion_profile, excursion_slack, feasibility_slack, nesting_radius, Anchor, BootstrapCandidate, ExcursionTarget,
    VerificationOutcome,
};

pub(crate) struct Ctx<'a> {
    pub model: &'a SystemModel,
    pub metric: &'a Metric,
    /// Region the endpoint ball must land in.
    pub target: &'a Region,
    /// Region the cells are meant to cover.
    pub cover: &'a Region,
    pub cfg: &'a SynthesisConfig,
    pub lipschitz: f64,
    pub max_steps: usize,
    pub floor: f64,
    pub progress: AtomicUsize,
}

pub(crate) enum CellResult {
    Verified { cell: Cell, signal: ControlSignal, outcome: VerificationOutcome },
    Failed { cell: Cell, signal: ControlSignal },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a cell's search, independent of processing order.
pub(crate) fn cell_seed(seed: u64, cell: &Cell) -> u64 {
    let mut h = splitmix(seed);
    for v in cell.center.iter().chain(std::iter::once(&cell.half_width)) {
        h = splitmix(h ^ v.to_bits());
    }
    h
}

/// Largest step count whose nesting radius `ε(1 + Lτe^{Lτ})` stays strictly
/// inside `S` around `x*`.
pub(crate) fn tau_cap_steps(
    eps: f64,
    lipschitz: f64,
    dt: f64,
    tau_max_steps: usize,
    inradius: f64,
) -> Result<usize> {
    let k = (1..=tau_max_steps)
        .take_while(|&k| nesting_radius(eps, lipschitz, k as f64 * dt) < inradius)
        .last()
        .unwrap_or(0);
    if k == 0 {
        return Err(NcpError::InfeasibleRate(format!(
            "eps = {eps} is too large: eps (1 + L dt e^(L dt)) already reaches the distance {inradius} from x* to the boundary of S"
        )));
    }
    Ok(k)
}

impl Ctx<'_> {
    pub fn x_star(&self) -> &[f64] {
        &self.model.equilibrium_state
    }

    pub fn excursion(&self) -> ExcursionTarget {
        ExcursionTarget::new(self.cfg.eps, self.lipschitz, self.cfg.tau0())
    }

    /// False for cells lying entirely inside the open ε-ball or entirely
    /// outside the region being covered.
    pub fn keep(&self, cell: &Cell) -> bool {
        let m = self.metric;
        let far: Vec<f64> = m
            .diff(&cell.center, self.x_star())
            .iter()
            .zip(&m.norm.weights)
            .map(|(d, w)| d.abs() + cell.half_width / w)
            .collect();
        if m.norm.eval(&far) < self.cfg.eps {
            return false;
        }
        self.cover.signed_distance(&cell.center, m) <= cell.radius(m)
    }

    pub fn search(&self, cell: &Cell, params: &SearchParams, alpha: f64, warm: Option<&ControlSignal>) -> Result<ControlSignal> {
        let objective = SearchObjective {
            alpha,
            radius: cell.radius(self.metric),
            lipschitz: self.lipschitz,
            region: Some(self.target),
            max_steps: Some(self.max_steps),
            excursion: Some(self.excursion()),
        };
        let params = SearchParams { seed: cell_seed(params.seed, cell), ..params.clone() };
        Ok(search_signal(
            self.model,
            &cell.center,
            self.x_star(),
            self.cfg.tau_max,
            self.cfg.dt,
            self.metric,
            &params,
            objective,
            warm,
        )?
        .signal)
    }

    pub fn verify(&self, cell: &Cell, signal: &ControlSignal, alpha: f64) -> Result<VerificationOutcome> {
        best_tau(
            self.model,
            self.metric,
            &cell.center,
            cell.radius(self.metric),
            signal,
            alpha,
            self.lipschitz,
            self.target,
            Some(self.max_steps),
            Some(&self.excursion()),
        )
    }

    /// Search and verify `cell`; on failure split into `3^d` children (warm
    /// started from this cell's signal) until `max_splits` or the radius
    /// floor is reached.
    pub fn process(&self, cell: Cell, depth: usize, warm: Option<&ControlSignal>) -> Result<Vec<CellResult>> {
        let alpha = self.cfg.alpha;
        if let Some(w) = warm {
            let out = self.verify(&cell, w, alpha)?;
            if out.passed {
                return Ok(vec![CellResult::Verified { cell, signal: w.clone(), outcome: out }]);
            }
        }
        let signal = self.search(&cell, &self.cfg.search, alpha, warm)?;
        let out = self.verify(&cell, &signal, alpha)?;
        let done = self.progress.fetch_add(1, Ordering::Relaxed) + 1;
        if done % 1000 == 0 {
            log::info!("searched {done} cells");
        }
        if out.passed {
            return Ok(vec![CellResult::Verified { cell, signal, outcome: out }]);
        }
        if depth >= self.cfg.max_splits || cell.radius(self.metric) / 3.0 <= self.floor {
            return Ok(vec![CellResult::Failed { cell, signal }]);
        }
        let children: Vec<Cell> = cell.split(self.metric).into_iter().filter(|c| self.keep(c)).collect();
        let nested: Result<Vec<Vec<CellResult>>> =
            children.into_par_iter().map(|c| self.process(c, depth + 1, Some(&signal))).collect();
        Ok(nested?.into_iter().flatten().collect())
    }

    pub fn process_all(&self, cells: Vec<Cell>) -> Result<Vec<CellResult>> {
        let nested: Result<Vec<Vec<CellResult>>> =
            cells.into_par_iter().map(|c| self.process(c, 0, None)).collect();
        Ok(nested?.into_iter().flatten().collect())
    }
}

/// A bootstrap admission found by [`try_bootstrap`].
pub(crate) struct BootstrapHit {
    pub steps: usize,
    pub anchor_tau: f64,
    pub worst_ratio: f64,
    pub landing: Ball,
}

/// Bootstrapped triples accepted so far, kept apart from their anchors.
#[derive(Default)]
pub(crate) struct BootstrapLedger {
    pub balls: Vec<Ball>,
    pub landings: Vec<Ball>,
}

impl BootstrapLedger {
    fn clashes(&self, a: &Ball, list: &[Ball], metric: &Metric) -> bool {
        list.iter().any(|b| metric.dist(&a.center, &b.center) <= a.radius + b.radius)
    }
}

/// Looks for the longest grid time at which `signal` carries `cell` into the
/// support of `anchors` with the bootstrap ratio condition satisfied. The
/// landing ball must avoid every bootstrapped ball (including this one), and
/// this ball must avoid every earlier landing ball, so chains leaving a
/// bootstrapped cell always continue in an anchor.
#[allow(clippy::too_many_arguments)]
pub(crate) fn try_bootstrap(
    ctx: &Ctx<'_>,
    cell: &Cell,
    signal: &ControlSignal,
    anchors: &[Triple],
    anchor_index: &BallIndex,
    ledger: &BootstrapLedger,
    tau_budget: f64,
    require_feasible: bool,
) -> Result<Option<BootstrapHit>> {
    let m = ctx.metric;
    let r = cell.radius(m);
    let own = cell.ball(m);
    let target = ctx.excursion();
    // chain points do not decrease across a bootstrap, so keep them out of the stay zone
    if m.dist(&cell.center, ctx.x_star()) - r <= target.stay || ledger.clashes(&own, &ledger.landings, m) {
        return Ok(None);
    }
    let alpha = ctx.cfg.alpha;
    let alpha_prime = ctx.cfg.bootstrap.alpha_ratio * alpha;
    let flat = integrate_flat(ctx.model, &cell.center, signal, 0.0)?;
    let d = ctx.model.dim;
    let dt = signal.dt();
    let profile = excursion_profile(m, ctx.x_star(), &cell.center, r, &flat, d, dt, ctx.lipschitz, &target);
    for k in (1..=signal.steps()).rev() {
        let t = k as f64 * dt;
        let end = &flat[k * d..(k + 1) * d];
        if excursion_slack(m, ctx.x_star(), &cell.center, r, profile[k], t, ctx.lipschitz, &target) < 0.0 {
            continue;
        }
        if require_feasible && feasibility_slack(m, ctx.target, r, end, t, ctx.lipschitz) < 0.0 {
            continue;
        }
        if !anchor_index.covers(end, m) {
            continue;
        }
        let landing = Ball { center: end.to_vec(), radius: r * (ctx.lipschitz * t).exp() };
        let hits = anchor_index.intersecting(&landing, m);
        let anchor_tau = hits.iter().map(|&i| anchors[i].tau).fold(0.0, f64::max);
        if t + anchor_tau > tau_budget {
            continue;
        }
        if ledger.clashes(&landing, &ledger.balls, m) || ledger.clashes(&landing, std::slice::from_ref(&own), m) {
            continue;
        }
        let list: Vec<Anchor<'_>> = hits
            .iter()
            .map(|&i| Anchor { center: &anchors[i].center, radius: anchors[i].radius, tau: anchors[i].tau })
            .collect();
        let cand = BootstrapCandidate { center: &cell.center, radius: r, endpoint: end, tau: t, lipschitz: ctx.lipschitz };
        let out = check_bootstrap(&cand, &list, alpha, alpha_prime, m, ctx.x_star(), ctx.cfg.bootstrap.probe_samples)?;
        if out.passed {
            return Ok(Some(BootstrapHit { steps: k, anchor_tau, worst_ratio: out.worst_ratio, landing }));
        }
    }
    Ok(None)
}

/// Re-checks a bootstrapped triple against the current direct triples.
pub(crate) fn recheck_bootstrap(
    ctx: &Ctx<'_>,
    t: &Triple,
    signal: &ControlSignal,
    anchors: &[Triple],
    anchor_index: &BallIndex,
) -> Result<bool> {
    let flat = integrate_flat(ctx.model, &t.center, &signal.truncate(t.steps), 0.0)?;
    let end = &flat[flat.len() - ctx.model.dim..];
    let target = ctx.excursion();
    if ctx.metric.dist(&t.center, ctx.x_star()) - t.radius <= target.stay {
        return Ok(false);
    }
    let profile =
        excursion_profile(ctx.metric, ctx.x_star(), &t.center, t.radius, &flat, ctx.model.dim, signal.dt(), ctx.lipschitz, &target);
    let need = profile[profile.len() - 1];
    if excursion_slack(ctx.metric, ctx.x_star(), &t.center, t.radius, need, t.tau, ctx.lipschitz, &target) < 0.0 {
        return Ok(false);
    }
    let landing = Ball { center: end.to_vec(), radius: t.radius * (ctx.lipschitz * t.tau).exp() };
    let hits = anchor_index.intersecting(&landing, ctx.metric);
    let list: Vec<Anchor<'_>> = hits
        .iter()
        .map(|&i| Anchor { center: &anchors[i].center, radius: anchors[i].radius, tau: anchors[i].tau })
        .collect();
    let anchor_tau = hits.iter().map(|&i| anchors[i].tau).fold(0.0, f64::max);
    if let TripleKind::Bootstrap { anchor_tau: stored } = t.kind {
        if anchor_tau > stored + 1e-12 {
            return Ok(false);
        }
    }
    let cand = BootstrapCandidate { center: &t.center, radius: t.radius, endpoint: end, tau: t.tau, lipschitz: ctx.lipschitz };
    let alpha_prime = ctx.cfg.bootstrap.alpha_ratio * ctx.cfg.alpha;
    Ok(check_bootstrap(&cand, &list, ctx.cfg.alpha, alpha_prime, ctx.metric, ctx.x_star(), ctx.cfg.bootstrap.probe_samples)?
        .passed)
}

use std::collections::BTreeMap;
use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use rayon::prelude::*;

use super::cells::{tau_cap_steps, Ctx};
use super::config::SynthesisConfig;
use super::synthesize::{finish, trim};
use super::{alpha_stats, Synthesis};
use crate::dynamics::{integrate_flat, steps_for, ControlSignal, SystemModel};
use crate::error::Result;
use crate::geometry::Cell;
use crate::policy::{AssignmentSet, Triple, TripleKind};
use crate::search::Alphabet;
use crate::verification::{bisect_max, decrease_slack, excursion_profile, excursion_slack, feasibility_slack, ALPHA_TOL};

/// A refined child: the cell, where its signal comes from, and its certificate.
struct Child {
    cell: Cell,
    signal: Source,
    steps: usize,
    alpha: f64,
    slack: f64,
}

enum Source {
    Parent,
    Fresh(ControlSignal),
}

/// Rate the parent's signal certifies on `cell` at the parent's duration,
/// bisected upwards from `floor`; `None` if it does not verify at `floor`.
fn parent_rate(ctx: &Ctx<'_>, cell: &Cell, sig: &ControlSignal, steps: usize, floor: f64) -> Result<Option<(f64, f64)>> {
    let m = ctx.metric;
    let r = cell.radius(m);
    let flat = integrate_flat(ctx.model, &cell.center, &sig.truncate(steps), 0.0)?;
    let end = &flat[flat.len() - ctx.model.dim..];
    let t = steps as f64 * sig.dt();
    let x_star = ctx.x_star();
    let fs = feasibility_slack(m, ctx.target, r, end, t, ctx.lipschitz);
    let ds = decrease_slack(m, x_star, &cell.center, r, end, t, floor, ctx.lipschitz);
    let target = ctx.excursion();
    let need = excursion_profile(m, x_star, &cell.center, r, &flat, ctx.model.dim, sig.dt(), ctx.lipschitz, &target)[steps];
    let es = excursion_slack(m, x_star, &cell.center, r, need, t, ctx.lipschitz, &target);
    if fs < 0.0 || ds < 0.0 || es < 0.0 {
        return Ok(None);
    }
    let pass = |a: f64| decrease_slack(m, x_star, &cell.center, r, end, t, a, ctx.lipschitz) >= 0.0;
    let alpha = bisect_max(floor, floor + 1.0 + 10.0 / t, ALPHA_TOL, pass);
    let slack = fs.min(es).min(decrease_slack(m, x_star, &cell.center, r, end, t, ctx.cfg.alpha, ctx.lipschitz));
    Ok(Some((alpha, slack)))
}

/// Splits a direct triple once. Each child keeps the better of the parent
/// signal and a fresh search; if any child cannot reach the parent's rate
/// the parent is kept whole.
fn refine_triple(ctx: &Ctx<'_>, t: &Triple, sig: &ControlSignal) -> Result<Option<Vec<Child>>> {
    let cell = Cell { center: t.center.clone(), half_width: t.half_width };
    let children: Vec<Cell> = cell.split(ctx.metric).into_iter().filter(|c| ctx.keep(c)).collect();
    let mut out = Vec::with_capacity(children.len());
    for c in children {
        let inherited = parent_rate(ctx, &c, sig, t.steps, t.alpha)?;
        let fresh_sig = ctx.search(&c, &ctx.cfg.search, t.alpha.max(ctx.cfg.alpha), Some(sig))?;
        let fresh = ctx.verify(&c, &fresh_sig, ctx.cfg.alpha)?;
        let fresh_alpha = if fresh.passed { fresh.alpha_i } else { f64::NEG_INFINITY };
        let child = match inherited {
            Some((a, s)) if a >= fresh_alpha => {
                Child { cell: c, signal: Source::Parent, steps: t.steps, alpha: a, slack: s }
            }
            _ if fresh.passed && fresh_alpha >= t.alpha => Child {
                cell: c,
                signal: Source::Fresh(fresh_sig.truncate(fresh.steps)),
                steps: fresh.steps,
                alpha: fresh_alpha,
                slack: fresh.slack,
            },
            _ => return Ok(None),
        };
        out.push(child);
    }
    Ok(Some(out))
}

/// Splits every direct ball once and re-verifies the children with
/// maximized rates. Per-cell rates never drop below the parent's;
/// bootstrapped triples are carried over and re-checked.
pub fn refine(model: &SystemModel, set: &AssignmentSet, cfg: &SynthesisConfig) -> Result<Synthesis> {
    let started = Instant::now();
    cfg.validate()?;
    set.validate(model)?;
    let metric = set.metric.clone();
    let estimate = set.estimate.clone();
    let inradius = set.region.inradius_at(&set.equilibrium, &metric);
    let tau_steps = steps_for(cfg.tau_max, cfg.dt)?;
    let max_steps = tau_cap_steps(cfg.eps, estimate.lipschitz, cfg.dt, tau_steps, inradius)?;
    let ctx = Ctx {
        model,
        metric: &metric,
        target: &set.region,
        cover: &set.region,
        cfg,
        lipschitz: estimate.lipschitz,
        max_steps,
        floor: cfg.eps / 100.0,
        progress: AtomicUsize::new(0),
    };
    let previous = alpha_stats(set);

    let refined: Result<Vec<Option<Vec<Child>>>> = set
        .triples
        .par_iter()
        .map(|t| if t.is_direct() { refine_triple(&ctx, t, set.alphabet.get(t.signal)) } else { Ok(None) })
        .collect();
    let refined = refined?;

    let mut alphabet = Alphabet::new(set.alphabet.default_signal().clone());
    let mut reused: BTreeMap<usize, usize> = BTreeMap::new();
    let mut carry = |alphabet: &mut Alphabet, old: usize| -> usize {
        *reused.entry(old).or_insert_with(|| alphabet.push(set.alphabet.get(old).clone()))
    };
    let mut direct = Vec::new();
    let mut boot = Vec::new();
    let mut split_count = 0;
    for (t, r) in set.triples.iter().zip(refined) {
        match (t.kind, r) {
            (TripleKind::Direct, Some(children)) => {
                split_count += 1;
                for c in children {
                    let signal = match c.signal {
                        Source::Parent => carry(&mut alphabet, t.signal),
                        Source::Fresh(s) => alphabet.push(s),
                    };
                    direct.push(Triple {
                        radius: c.cell.radius(&metric),
                        center: c.cell.center,
                        half_width: c.cell.half_width,
                        signal,
                        tau: c.steps as f64 * cfg.dt,
                        steps: c.steps,
                        alpha: c.alpha,
                        slack: c.slack,
                        kind: TripleKind::Direct,
                    });
                }
            }
            (TripleKind::Direct, None) => {
                let signal = carry(&mut alphabet, t.signal);
                direct.push(Triple { signal, ..t.clone() });
            }
            (TripleKind::Bootstrap { .. }, _) => {
                let signal = carry(&mut alphabet, t.signal);
                boot.push(Triple { signal, ..t.clone() });
            }
        }
    }
    log::info!("refined {split_count} of {} direct triples", set.direct_count());
    let n_direct = direct.len();
    let n_boot = boot.len();
    direct.extend(boot);
    let mut out = AssignmentSet::new(
        set.model.clone(),
        metric.clone(),
        set.region.clone(),
        set.equilibrium.clone(),
        set.dt,
        set.default_tau,
        alphabet,
        direct,
        estimate.clone(),
    );
    let trimmed = trim(&ctx, &mut out, 0)?;
    finish(
        &ctx,
        out,
        trimmed.cells,
        (n_direct - trimmed.direct, n_boot - trimmed.bootstrapped),
        set.len(),
        0.0,
        &estimate,
        started,
        Some(previous),
    )
}

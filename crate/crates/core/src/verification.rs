//! Certification inequalities: containment margin, per-triple decrease and
//! feasibility, covering, and the bootstrapping condition.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_flat, steps_for, ControlSignal, SystemModel};
use crate::error::{NcpError, Result};
use crate::geometry::{Ball, BallIndex, Halton, Metric, Region};

/// Tolerance used when maximizing the certified rate.
pub const ALPHA_TOL: f64 = 1e-4;

/// `F τ e^{Lτ}`: how far a trajectory can drift from its start within `τ`.
pub fn containment_margin(speed_bound: f64, lipschitz: f64, tau: f64) -> f64 {
    speed_bound * tau * (lipschitz * tau).exp()
}

/// Radius of the ball around `x*` that the chain never leaves once inside:
/// `ε (1 + L τ e^{Lτ})`.
pub fn nesting_radius(eps: f64, lipschitz: f64, tau: f64) -> f64 {
    eps * (1.0 + lipschitz * tau * (lipschitz * tau).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub slack: f64,
}

impl Check {
    fn from_slack(slack: f64) -> Self {
        Check { passed: slack >= 0.0, slack }
    }
}

/// Right minus left side of
/// `e^{αt}(‖φ(t) − x*‖ + r e^{Lt}) <= ‖x_i − x*‖ − r`.
#[allow(clippy::too_many_arguments)]
pub fn decrease_slack(
    metric: &Metric,
    x_star: &[f64],
    x_i: &[f64],
    r_i: f64,
    endpoint: &[f64],
    t: f64,
    alpha: f64,
    lipschitz: f64,
) -> f64 {
    let lhs = (alpha * t).exp() * (metric.dist(endpoint, x_star) + r_i * (lipschitz * t).exp());
    metric.dist(x_i, x_star) - r_i - lhs
}

/// `−(sd(φ(t), S) + r e^{Lt})`.
pub fn feasibility_slack(metric: &Metric, region: &Region, r_i: f64, endpoint: &[f64], t: f64, lipschitz: f64) -> f64 {
    -(region.signed_distance(endpoint, metric) + r_i * (lipschitz * t).exp())
}

/// `1 + L t e^{Lt}`: how far a chain may stray relative to its last chain point.
pub fn growth(lipschitz: f64, t: f64) -> f64 {
    1.0 + lipschitz * t * (lipschitz * t).exp()
}

/// Radii the excursion condition is measured against: `eps` from the
/// certificate and `stay`, the largest distance from `x*` a chain point can
/// have once the chain has reached the ε-ball (a default segment of length
/// `τ₀` may push it out to `ε e^{Lτ₀}`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionTarget {
    pub eps: f64,
    pub stay: f64,
}

impl ExcursionTarget {
    pub fn new(eps: f64, lipschitz: f64, default_tau: f64) -> Self {
        ExcursionTarget { eps, stay: eps * (lipschitz * default_tau).exp() }
    }

    /// Smallest growth factor `M` for which the state at `t` respects the
    /// envelope `M (‖x − x*‖ + ε)` for every `x` in the ball and, for balls
    /// reaching into the stay zone, the c-ball `M ε`. `dist` is
    /// `‖φ(t, x_i) − x*‖` and `moved` is `‖φ(t, x_i) − x_i‖`. Each bound takes
    /// the better of the ball estimate `dist + r e^{Lt}` and the displacement
    /// estimate `‖x − x*‖ + moved + r (e^{Lt} − 1)`.
    pub(crate) fn required(&self, near: f64, r_i: f64, dist: f64, moved: f64, t: f64, lipschitz: f64) -> f64 {
        let spread = r_i * (lipschitz * t).exp();
        let ball = dist + spread;
        let drift = moved + spread - r_i;
        let env = ball.min(near + drift) / (near + self.eps);
        if near <= self.stay {
            env.max(ball.min(self.stay + drift) / self.eps)
        } else {
            env
        }
    }
}

/// Running maximum of [`ExcursionTarget::required`] over the grid times of
/// the flat state sequence `flat` (one row per step, starting at `x_i`).
#[allow(clippy::too_many_arguments)]
pub fn excursion_profile(
    metric: &Metric,
    x_star: &[f64],
    x_i: &[f64],
    r_i: f64,
    flat: &[f64],
    dim: usize,
    dt: f64,
    lipschitz: f64,
    target: &ExcursionTarget,
) -> Vec<f64> {
    let near = (metric.dist(x_i, x_star) - r_i).max(0.0);
    let mut need = f64::NEG_INFINITY;
    flat.chunks_exact(dim)
        .enumerate()
        .map(|(k, x)| {
            let t = k as f64 * dt;
            need = need.max(target.required(near, r_i, metric.dist(x, x_star), metric.dist(x, x_i), t, lipschitz));
            need
        })
        .collect()
}

/// `(M(t) − required)(‖x_i − x*‖ − r + ε)` with `M(t) = 1 + Lte^{Lt}`:
/// non-negative when every trajectory from the ball stays within
/// `M (‖x − x*‖ + ε)` up to `t`, and within `ε M` when the ball reaches the
/// stay zone. Those are the containment steps behind the envelope
/// `K e^{−λt}‖x₀ − x*‖ + c` and the c-ball.
#[allow(clippy::too_many_arguments)]
pub fn excursion_slack(
    metric: &Metric,
    x_star: &[f64],
    x_i: &[f64],
    r_i: f64,
    required: f64,
    t: f64,
    lipschitz: f64,
    target: &ExcursionTarget,
) -> f64 {
    let near = (metric.dist(x_i, x_star) - r_i).max(0.0);
    (growth(lipschitz, t) - required) * (near + target.eps)
}

fn endpoint(model: &SystemModel, x_i: &[f64], v_i: &ControlSignal, tau_i: f64) -> Result<Vec<f64>> {
    let n = steps_for(tau_i, v_i.dt())?;
    if n == 0 || n > v_i.steps() {
        return Err(NcpError::InvalidInput(format!(
            "tau_i = {tau_i} must lie in (0, {}]",
            v_i.duration()
        )));
    }
    let flat = integrate_flat(model, x_i, &v_i.truncate(n), 0.0)?;
    Ok(flat[flat.len() - model.dim..].to_vec())
}

/// Decrease condition for the triple `(x_i, r_i, v_i)` at `τ_i`.
#[allow(clippy::too_many_arguments)]
pub fn check_decrease(
    model: &SystemModel,
    metric: &Metric,
    x_i: &[f64],
    r_i: f64,
    v_i: &ControlSignal,
    tau_i: f64,
    alpha: f64,
    lipschitz: f64,
) -> Result<Check> {
    let end = endpoint(model, x_i, v_i, tau_i)?;
    Ok(Check::from_slack(decrease_slack(
        metric,
        &model.equilibrium_state,
        x_i,
        r_i,
        &end,
        tau_i,
        alpha,
        lipschitz,
    )))
}

/// Feasibility condition: the inflated endpoint ball stays in `S`.
#[allow(clippy::too_many_arguments)]
pub fn check_feasibility(
    model: &SystemModel,
    metric: &Metric,
    x_i: &[f64],
    r_i: f64,
    v_i: &ControlSignal,
    tau_i: f64,
    lipschitz: f64,
    region: &Region,
) -> Result<Check> {
    let end = endpoint(model, x_i, v_i, tau_i)?;
    Ok(Check::from_slack(feasibility_slack(metric, region, r_i, &end, tau_i, lipschitz)))
}

/// Excursion condition for the triple `(x_i, r_i, v_i)` over `[0, τ_i]`.
#[allow(clippy::too_many_arguments)]
pub fn check_excursion(
    model: &SystemModel,
    metric: &Metric,
    x_i: &[f64],
    r_i: f64,
    v_i: &ControlSignal,
    tau_i: f64,
    lipschitz: f64,
    target: &ExcursionTarget,
) -> Result<Check> {
    let n = steps_for(tau_i, v_i.dt())?;
    let flat = integrate_flat(model, x_i, &v_i.truncate(n), 0.0)?;
    let x_star = &model.equilibrium_state;
    let profile = excursion_profile(metric, x_star, x_i, r_i, &flat, model.dim, v_i.dt(), lipschitz, target);
    let need = *profile.last().expect("profile includes the start");
    Ok(Check::from_slack(excursion_slack(metric, x_star, x_i, r_i, need, tau_i, lipschitz, target)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailingCondition {
    None,
    Decrease,
    Feasibility,
    Excursion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub passed: bool,
    pub tau_i: f64,
    pub steps: usize,
    pub alpha_i: f64,
    /// Smallest slack at the requested rate (best time when failed).
    pub slack: f64,
    pub failing_condition: FailingCondition,
}

/// Largest `a` in `[lo, hi]` with `pred(a)`, assuming `pred(lo)` and
/// monotonicity, to within `tol`.
pub fn bisect_max(lo: f64, hi: f64, tol: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let (mut a, mut b) = (lo, hi);
    if pred(b) {
        return b;
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if pred(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}

/// Scans grid times `t ∈ (0, duration]` (capped at `max_steps`), keeps the
/// largest one at which the feasibility and decrease conditions (and the
/// excursion condition, given a target) hold, then bisects the largest rate
/// the decrease condition still certifies there.
#[allow(clippy::too_many_arguments)]
pub fn best_tau(
    model: &SystemModel,
    metric: &Metric,
    x_i: &[f64],
    r_i: f64,
    v_i: &ControlSignal,
    alpha: f64,
    lipschitz: f64,
    region: &Region,
    max_steps: Option<usize>,
    excursion: Option<&ExcursionTarget>,
) -> Result<VerificationOutcome> {
    let flat = integrate_flat(model, x_i, v_i, 0.0)?;
    let d = model.dim;
    let x_star = &model.equilibrium_state;
    let dt = v_i.dt();
    let n = max_steps.unwrap_or(usize::MAX).min(v_i.steps());
    let profile = excursion
        .map(|e| excursion_profile(metric, x_star, x_i, r_i, &flat[..(n + 1) * d], d, dt, lipschitz, e));
    let mut chosen: Option<(usize, f64)> = None;
    let mut best_fail = f64::NEG_INFINITY;
    let mut fail = FailingCondition::Feasibility;
    for k in (1..=n).rev() {
        let t = k as f64 * dt;
        let end = &flat[k * d..(k + 1) * d];
        let fs = feasibility_slack(metric, region, r_i, end, t, lipschitz);
        let ds = decrease_slack(metric, x_star, x_i, r_i, end, t, alpha, lipschitz);
        let es = match (excursion, &profile) {
            (Some(e), Some(p)) => excursion_slack(metric, x_star, x_i, r_i, p[k], t, lipschitz, e),
            _ => f64::INFINITY,
        };
        let worst = fs.min(ds).min(es);
        if worst >= 0.0 {
            chosen = Some((k, worst));
            break;
        }
        if worst > best_fail {
            best_fail = worst;
            fail = if fs < 0.0 {
                FailingCondition::Feasibility
            } else if ds < 0.0 {
                FailingCondition::Decrease
            } else {
                FailingCondition::Excursion
            };
        }
    }
    let Some((k, slack)) = chosen else {
        return Ok(VerificationOutcome {
            passed: false,
            tau_i: 0.0,
            steps: 0,
            alpha_i: 0.0,
            slack: best_fail,
            failing_condition: fail,
        });
    };
    let t = k as f64 * dt;
    let end = &flat[k * d..(k + 1) * d];
    let passes = |a: f64| decrease_slack(metric, x_star, x_i, r_i, end, t, a, lipschitz) >= 0.0;
    // the closed-form supremum only brackets the search
    let budget = metric.dist(x_i, x_star) - r_i;
    let base = metric.dist(end, x_star) + r_i * (lipschitz * t).exp();
    let hi = if base > 0.0 { (budget / base).ln() / t + 1.0 } else { alpha + 1e3 };
    let alpha_i = bisect_max(alpha, hi.max(alpha), ALPHA_TOL, passes);
    Ok(VerificationOutcome {
        passed: true,
        tau_i: t,
        steps: k,
        alpha_i,
        slack,
        failing_condition: FailingCondition::None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    /// `ε (1 + L τ e^{Lτ})`.
    pub nesting_radius: f64,
    /// Distance from `x*` to the boundary of `S`.
    pub inradius: f64,
    pub nesting_ok: bool,
    pub samples_checked: usize,
    pub uncovered: Vec<Vec<f64>>,
}

impl CoveringReport {
    pub fn complete(&self) -> bool {
        self.nesting_ok && self.uncovered.is_empty()
    }
}

/// Checks the ε-ball nesting analytically and that every low-discrepancy
/// sample of `S` at distance `>= ε` from `x*` lies in some ball of `index`.
#[allow(clippy::too_many_arguments)]
pub fn check_covering(
    index: &BallIndex,
    region: &Region,
    x_star: &[f64],
    eps: f64,
    lipschitz: f64,
    tau: f64,
    metric: &Metric,
    sample_count: usize,
) -> Result<CoveringReport> {
    if sample_count < 10_000 {
        return Err(NcpError::config("covering_samples", "must be >= 10000"));
    }
    let nesting = nesting_radius(eps, lipschitz, tau);
    let inradius = region.inradius_at(x_star, metric);
    let (lo, hi) = region.bounding_box(metric);
    let mut seq = Halton::new(metric.dim());
    let mut checked = 0;
    let mut uncovered = Vec::new();
    let mut drawn = 0usize;
    while checked < sample_count && drawn < 1000 * sample_count {
        drawn += 1;
        let mut x = seq.next_in(&lo, &hi);
        metric.wrap(&mut x);
        if !region.contains(&x, metric) || metric.dist(&x, x_star) < eps {
            continue;
        }
        checked += 1;
        if !index.covers(&x, metric) {
            uncovered.push(x);
        }
    }
    Ok(CoveringReport {
        nesting_radius: nesting,
        inradius,
        nesting_ok: nesting < inradius,
        samples_checked: checked,
        uncovered,
    })
}

/// A cell being admitted through already-verified anchors.
#[derive(Debug, Clone)]
pub struct BootstrapCandidate<'a> {
    pub center: &'a [f64],
    pub radius: f64,
    /// `φ(τ_j, x_j, v_j)`.
    pub endpoint: &'a [f64],
    pub tau: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<'a> {
    pub center: &'a [f64],
    pub radius: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub passed: bool,
    /// Whether the inflated endpoint ball is covered by the anchors.
    pub landing_covered: bool,
    /// Position (in the anchor slice) of the anchor attaining the maximum.
    pub binding: Option<usize>,
    pub worst_ratio: f64,
}

/// Points of the ball used to test its inclusion in a union of balls:
/// the center, the axis extremes and Halton points of its enclosing cube
/// that lie in the ball.
pub fn ball_probe_points(ball: &Ball, metric: &Metric, count: usize) -> Vec<Vec<f64>> {
    let d = metric.dim();
    let w = &metric.norm.weights;
    let mut pts = vec![ball.center.clone()];
    for k in 0..d {
        for s in [-1.0, 1.0] {
            let mut x = ball.center.clone();
            x[k] += s * ball.radius / w[k];
            pts.push(x);
        }
    }
    let lo: Vec<f64> = (0..d).map(|k| ball.center[k] - ball.radius / w[k]).collect();
    let hi: Vec<f64> = (0..d).map(|k| ball.center[k] + ball.radius / w[k]).collect();
    if d <= 10 && metric.norm.kind == crate::geometry::NormKind::Max {
        for mask in 0..1usize << d {
            pts.push((0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect());
        }
    }
    let mut seq = Halton::new(d);
    let mut tries = 0;
    let target = pts.len() + count;
    while pts.len() < target && tries < 20 * count {
        tries += 1;
        let x = seq.next_in(&lo, &hi);
        if metric.dist(&x, &ball.center) <= ball.radius {
            pts.push(x);
        }
    }
    for p in &mut pts {
        metric.wrap(p);
    }
    pts
}

/// Admits `candidate` when its inflated endpoint ball
/// `B_{r_j e^{L_j τ_j}}(φ(τ_j))` is covered by `anchors` and
/// `max_i e^{−(α−α′)τ_i} e^{ατ_j} (‖x_i − x*‖ + r_i) / (‖x_j − x*‖ − r_j) <= 1`.
#[allow(clippy::too_many_arguments)]
pub fn check_bootstrap(
    candidate: &BootstrapCandidate<'_>,
    anchors: &[Anchor<'_>],
    alpha: f64,
    alpha_prime: f64,
    metric: &Metric,
    x_star: &[f64],
    probe_samples: usize,
) -> Result<BootstrapOutcome> {
    if !(alpha_prime < alpha) {
        return Err(NcpError::InvalidInput(format!(
            "bootstrap rate alpha' = {alpha_prime} must be below alpha = {alpha}"
        )));
    }
    let dist = metric.dist(candidate.center, x_star);
    if dist <= candidate.radius {
        return Err(NcpError::DegenerateCandidate { distance: dist, radius: candidate.radius });
    }
    let denom = dist - candidate.radius;
    let mut worst = f64::NEG_INFINITY;
    let mut binding = None;
    for (i, a) in anchors.iter().enumerate() {
        let ratio = (-(alpha - alpha_prime) * a.tau).exp()
            * (alpha * candidate.tau).exp()
            * (metric.dist(a.center, x_star) + a.radius)
            / denom;
        if ratio > worst {
            worst = ratio;
            binding = Some(i);
        }
    }
    let landing = Ball {
        center: candidate.endpoint.to_vec(),
        radius: candidate.radius * (candidate.lipschitz * candidate.tau).exp(),
    };
    let covered = !anchors.is_empty()
        && ball_probe_points(&landing, metric, probe_samples)
            .iter()
            .all(|p| anchors.iter().any(|a| metric.dist(p, a.center) <= a.radius));
    Ok(BootstrapOutcome {
        passed: covered && worst <= 1.0,
        landing_covered: covered,
        binding,
        worst_ratio: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::models;
    use crate::geometry::Norm;

    fn scalar_setup() -> (SystemModel, Metric) {
        (models::single_integrator(), Metric::flat(Norm::max(1)))
    }

    #[test]
    fn excursion_uses_the_displacement_bound_early_on() {
        // ẋ = u towards x* from x_i = 1; L = 0.2 is a valid (loose) Lipschitz bound
        let (m, metric) = scalar_setup();
        let target = ExcursionTarget::new(0.01, 0.2, 0.01);
        let v = ControlSignal::constant_hold(&m, &[-1.0], 0.5, 0.01).unwrap();
        let check = check_excursion(&m, &metric, &[1.0], 0.1, &v, 0.5, 0.2, &target).unwrap();
        assert!(check.passed, "{check:?}");
        // the ball estimate alone needs (x_i + r) / (x_i − r + ε) at t = 0
        assert!(1.1 / 0.91 > growth(0.2, 0.5));
    }

    #[test]
    fn excursion_rejects_drifting_away() {
        let (m, metric) = scalar_setup();
        let target = ExcursionTarget::new(0.01, 0.2, 0.01);
        let v = ControlSignal::constant_hold(&m, &[1.0], 0.5, 0.01).unwrap();
        // oracle: the displacement bound 0.9 + t + 0.1(e^{0.2t} − 1) grows fastest and
        // peaks at t = 0.5, against (1 + 0.1 e^{0.1}) · 0.91
        let oracle = (1.0 + 0.1 * 0.1f64.exp()) * 0.91 - (1.3 + 0.1 * 0.1f64.exp());
        let check = check_excursion(&m, &metric, &[1.0], 0.1, &v, 0.5, 0.2, &target).unwrap();
        assert!(!check.passed);
        assert!((check.slack - oracle).abs() < 1e-9, "{} vs {oracle}", check.slack);
    }

    #[test]
    fn containment_margin_values() {
        assert_eq!(containment_margin(2.0, 1.0, 0.0), 0.0);
        assert_eq!(containment_margin(2.0, 0.0, 1.5), 3.0);
        assert!((containment_margin(1.0, 1.0, 1.5) - 1.5 * 1.5f64.exp()).abs() < 1e-12);
        assert!((containment_margin(1.0, 1.0, 1.5) - 6.7225).abs() < 1e-4);
    }

    #[test]
    fn decrease_on_single_integrator() {
        let (m, metric) = scalar_setup();
        let v = ControlSignal::constant_hold(&m, &[-1.0], 0.5, 0.01).unwrap();
        let c = check_decrease(&m, &metric, &[1.0], 0.01, &v, 0.5, 0.1, 0.0).unwrap();
        let lhs = 0.05f64.exp() * (0.5 + 0.01);
        assert!(c.passed);
        assert!((c.slack - (0.99 - lhs)).abs() < 1e-9);
    }

    #[test]
    fn decrease_fails_at_equilibrium() {
        let (m, metric) = scalar_setup();
        let v = ControlSignal::constant_hold(&m, &[0.0], 0.5, 0.01).unwrap();
        assert!(!check_decrease(&m, &metric, &[0.0], 0.01, &v, 0.5, 0.1, 0.0).unwrap().passed);
    }

    #[test]
    fn feasibility_cases() {
        let (m, metric) = scalar_setup();
        let s = Region::ball(vec![0.0], 2.0);
        let hold = ControlSignal::constant_hold(&m, &[0.0], 0.5, 0.01).unwrap();
        let c = check_feasibility(&m, &metric, &[0.0], 0.1, &hold, 0.5, 1.0, &s).unwrap();
        assert!(c.passed);
        assert!((c.slack - (2.0 - 0.1 * 0.5f64.exp())).abs() < 1e-12);
        assert!(!check_feasibility(&m, &metric, &[2.0], 0.01, &hold, 0.5, 0.0, &s).unwrap().passed);
        assert!(!check_feasibility(&m, &metric, &[2.5], 0.01, &hold, 0.5, 0.0, &s).unwrap().passed);
    }

    #[test]
    fn best_tau_reports_feasibility_failure() {
        let (m, metric) = scalar_setup();
        let s = Region::ball(vec![0.0], 2.0);
        let away = ControlSignal::constant_hold(&m, &[1.0], 2.0, 0.01).unwrap();
        let out = best_tau(&m, &metric, &[1.99], 0.005, &away, 0.1, 0.0, &s, None, None).unwrap();
        assert!(!out.passed);
        assert_eq!(out.failing_condition, FailingCondition::Feasibility);
    }

    #[test]
    fn best_tau_on_decay_matches_analytic_rate() {
        let m = SystemModel::new(
            "decay",
            1,
            |x: &[f64], _: &[f64], out: &mut [f64]| out[0] = -x[0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![],
        )
        .unwrap();
        let metric = Metric::flat(Norm::max(1));
        let s = Region::ball(vec![0.0], 2.0);
        let v = ControlSignal::constant_hold(&m, &[0.0], 2.0, 0.01).unwrap();
        let out = best_tau(&m, &metric, &[1.0], 0.01, &v, 0.1, 0.0, &s, None, None).unwrap();
        assert!(out.passed);
        assert!((out.tau_i - 2.0).abs() < 1e-12);
        // oracle: e^{a·2}(e^{-2} + 0.01) = 0.99
        let exact = ((0.99f64) / ((-2.0f64).exp() + 0.01)).ln() / 2.0;
        assert!(out.alpha_i <= exact + 1e-6 && out.alpha_i >= exact - 2e-4, "{} vs {exact}", out.alpha_i);
        assert!(out.alpha_i > 0.9);
        let above = check_decrease(&m, &metric, &[1.0], 0.01, &v, 2.0, out.alpha_i + 1e-3, 0.0).unwrap();
        assert!(!above.passed);
    }

    #[test]
    fn covering_with_single_ball() {
        let metric = Metric::flat(Norm::max(2));
        let s = Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let idx = BallIndex::new(&[Ball { center: vec![0.0, 0.0], radius: 1.0 }], &metric);
        let rep = check_covering(&idx, &s, &[0.0, 0.0], 0.01, 1.0, 1.0, &metric, 10_000).unwrap();
        assert!(rep.complete());
        assert_eq!(rep.samples_checked, 10_000);
        let big = check_covering(&idx, &s, &[0.0, 0.0], 0.5, 1.0, 1.0, &metric, 10_000).unwrap();
        assert!(!big.nesting_ok);
    }

    #[test]
    fn bootstrap_ratio_condition() {
        let metric = Metric::flat(Norm::max(1));
        let anchors = [Anchor { center: &[0.5], radius: 0.2, tau: 1.0 }];
        let cand = BootstrapCandidate { center: &[3.0], radius: 0.1, endpoint: &[0.5], tau: 1.0, lipschitz: 0.0 };
        let out = check_bootstrap(&cand, &anchors, 0.1, 0.05, &metric, &[0.0], 64).unwrap();
        let expect = (-0.05f64).exp() * 0.1f64.exp() * 0.7 / 2.9;
        assert!((out.worst_ratio - expect).abs() < 1e-12);
        assert!(out.passed);

        let far = [Anchor { center: &[2.0], radius: 1.5, tau: 1.0 }];
        let cand_far = BootstrapCandidate { endpoint: &[2.0], ..cand.clone() };
        assert!(!check_bootstrap(&cand_far, &far, 0.1, 0.09, &metric, &[0.0], 64).unwrap().passed);

        let none = check_bootstrap(&cand, &[], 0.1, 0.05, &metric, &[0.0], 64).unwrap();
        assert!(!none.passed);

        let degenerate = BootstrapCandidate { center: &[0.05], ..cand };
        assert!(matches!(
            check_bootstrap(&degenerate, &anchors, 0.1, 0.05, &metric, &[0.0], 64),
            Err(NcpError::DegenerateCandidate { .. })
        ));
    }
}

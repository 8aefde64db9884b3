use serde::{Deserialize, Serialize};

use super::assignment::{AssignmentSet, TripleKind};
use crate::verification::{containment_margin, nesting_radius, CoveringReport};

/// `(λ, K, c, δ)` of the practical-stability bound
/// `‖φ(t) − x*‖ <= K e^{−λt} ‖x0 − x*‖ + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub k_gain: f64,
    pub c: f64,
    pub delta: f64,
}

/// `λ = α`, `K = e^{ατ}(1 + Lτe^{Lτ})`, `c = δ = ε(1 + Lτe^{Lτ})`.
pub fn certificate_constants(alpha: f64, tau: f64, lipschitz: f64, eps: f64) -> Constants {
    let growth = 1.0 + lipschitz * tau * (lipschitz * tau).exp();
    let c = eps * growth;
    Constants { lambda: alpha, k_gain: (alpha * tau).exp() * growth, c, delta: c }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub nesting_ok: bool,
    pub nesting_radius: f64,
    pub inradius: f64,
    pub samples_checked: usize,
    pub uncovered: usize,
}

impl From<&CoveringReport> for CoverageSummary {
    fn from(r: &CoveringReport) -> Self {
        CoverageSummary {
            nesting_ok: r.nesting_ok,
            nesting_radius: r.nesting_radius,
            inradius: r.inradius,
            samples_checked: r.samples_checked,
            uncovered: r.uncovered.len(),
        }
    }
}

/// Certified constants together with the estimates they rest on. `L` and
/// `F` are sampled estimates, already multiplied by `inflation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    pub tau: f64,
    pub lipschitz: f64,
    pub speed_bound: f64,
    pub inflation: f64,
    pub eps: f64,
    pub delta: f64,
    pub lambda: f64,
    pub k_gain: f64,
    pub c: f64,
    pub containment_margin: f64,
    pub seed: u64,
    pub dt: f64,
    pub pair_samples: usize,
    pub covering_samples: usize,
    pub coverage: CoverageSummary,
}

impl Certificate {
    /// `τ = max{τ₀, τ_i}` over direct triples; a bootstrapped triple counts
    /// as `τ_j` plus its anchors' duration.
    pub fn realized_tau(set: &AssignmentSet) -> f64 {
        set.triples
            .iter()
            .map(|t| match t.kind {
                TripleKind::Direct => t.tau,
                TripleKind::Bootstrap { anchor_tau } => t.tau + anchor_tau,
            })
            .fold(set.default_tau, f64::max)
    }

    /// Smallest per-triple rate, or `fallback` for an empty set.
    pub fn realized_alpha(set: &AssignmentSet, fallback: f64) -> f64 {
        set.triples.iter().map(|t| t.alpha).reduce(f64::min).unwrap_or(fallback)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        alpha: f64,
        tau: f64,
        lipschitz: f64,
        speed_bound: f64,
        inflation: f64,
        eps: f64,
        seed: u64,
        dt: f64,
        pair_samples: usize,
        covering: &CoveringReport,
    ) -> Self {
        let k = certificate_constants(alpha, tau, lipschitz, eps);
        Certificate {
            alpha,
            tau,
            lipschitz,
            speed_bound,
            inflation,
            eps,
            delta: k.delta,
            lambda: k.lambda,
            k_gain: k.k_gain,
            c: k.c,
            containment_margin: containment_margin(speed_bound, lipschitz, tau),
            seed,
            dt,
            pair_samples,
            covering_samples: covering.samples_checked,
            coverage: covering.into(),
        }
    }

    pub fn constants(&self) -> Constants {
        Constants { lambda: self.lambda, k_gain: self.k_gain, c: self.c, delta: self.delta }
    }

    /// Recomputes `(λ, K, c, δ)` from `(α, τ, L, ε)` and compares exactly up
    /// to `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let k = certificate_constants(self.alpha, self.tau, self.lipschitz, self.eps);
        let close = |a: f64, b: f64| (a - b).abs() <= tol * b.abs().max(1.0);
        close(k.lambda, self.lambda)
            && close(k.k_gain, self.k_gain)
            && close(k.c, self.c)
            && close(k.delta, self.delta)
            && (nesting_radius(self.eps, self.lipschitz, self.tau) - self.delta).abs() <= tol
    }

    /// Envelope `K e^{−λt} r0 + c`.
    pub fn envelope(&self, t: f64, r0: f64) -> f64 {
        self.k_gain * (-self.lambda * t).exp() * r0 + self.c
    }
}

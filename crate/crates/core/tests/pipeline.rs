use std::collections::BTreeMap;

use ncp_core::dynamics::{ModelRegistry, SystemModel};
use ncp_core::geometry::{Norm, Region};
use ncp_core::io::random_starts;
use ncp_core::policy::{envelope_check, rollout, AssignmentSet};
use ncp_core::search::SearchParams;
use ncp_core::synthesis::{expand, refine, synthesize, GridMode, Synthesis, SynthesisConfig};
use ncp_core::NcpError;

/// `ẋ = x/2 + u` with `|u_k| <= 2`: open-loop unstable, controllable on `[-2, 3]²`.
fn plane() -> SystemModel {
    let params = BTreeMap::from([("dim".to_string(), 2.0), ("a".to_string(), 0.5), ("u_max".to_string(), 2.0)]);
    ModelRegistry::builtin().build("linear_test", &params).unwrap()
}

fn config() -> SynthesisConfig {
    SynthesisConfig {
        alpha: 0.05,
        tau_max: 1.0,
        eps: 0.1,
        dt: 0.05,
        grid: GridMode::Fraction { initial_radius_fraction: 0.3 },
        search: SearchParams { rollouts: 32, iterations: 8, seed: 5, ..Default::default() },
        seed: 9,
        ..Default::default()
    }
}

fn square() -> Region {
    Region::boxed(vec![-2.0, -2.0], vec![2.0, 2.0])
}

fn base() -> Synthesis {
    synthesize(&plane(), &Norm::max(2), &square(), &config()).unwrap()
}

#[test]
fn synthesized_set_keeps_its_promises() {
    let model = plane();
    let out = base();
    assert_eq!(out.certificate.coverage.uncovered, 0);
    assert!(out.certificate.is_consistent(1e-12));
    assert!(out.assignments.triples.iter().all(|t| t.alpha >= 0.05 - 1e-12));
    let set = &out.assignments;
    for x0 in random_starts(&set.region, &set.metric, 40, 1) {
        let traj = rollout(&model, set, &x0, 12.0).unwrap();
        let env = envelope_check(&traj, &out.certificate, &set.metric, &set.equilibrium);
        assert!(env.max_violation <= 1e-6, "{x0:?}: {}", env.max_violation);
        assert!(env.settle_time.is_some(), "{x0:?} never settles in the c-ball");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = base();
    let b = base();
    let json = |s: &Synthesis| {
        (
            serde_json::to_string(&s.assignments).unwrap(),
            serde_json::to_string(&s.certificate).unwrap(),
            serde_json::to_string(&s.report).unwrap(),
        )
    };
    assert_eq!(json(&a), json(&b));
}

#[test]
fn refinement_never_lowers_a_rate() {
    let model = plane();
    let coarse = base();
    let fine = refine(&model, &coarse.assignments, &config()).unwrap();
    let parents: Vec<_> = coarse.assignments.triples.iter().filter(|t| t.is_direct()).collect();
    for child in fine.assignments.triples.iter().filter(|t| t.is_direct()) {
        // annulus cubes overlap, so a child may sit in several parents
        let inside = |p: &&&ncp_core::policy::Triple| {
            child.center.iter().zip(&p.center).all(|(c, q)| (c - q).abs() + child.half_width <= p.half_width + 1e-12)
        };
        let lowest = parents.iter().filter(inside).map(|p| p.alpha).fold(f64::INFINITY, f64::min);
        assert!(lowest.is_finite(), "child {:?} lies in no parent cube", child.center);
        assert!(child.alpha >= lowest, "{} < {lowest}", child.alpha);
    }
    assert!(fine.report.min_alpha >= coarse.report.min_alpha);
    assert!(fine.report.mean_alpha >= coarse.report.mean_alpha);
    assert!(fine.certificate.coverage.uncovered == 0);
}

#[test]
fn expansion_leaves_the_old_policy_alone() {
    let model = plane();
    let old = base().assignments;
    let strip = Region::boxed(vec![-2.0, 2.0], vec![2.0, 2.5]);
    let (grown, cert) = expand(&model, &old, &strip, &config()).unwrap();
    assert_eq!(&grown.triples[..old.len()], &old.triples[..]);
    for x0 in random_starts(&old.region, &old.metric, 50, 2) {
        let a = rollout(&model, &old, &x0, 8.0).unwrap();
        let b = rollout(&model, &grown, &x0, 8.0).unwrap();
        assert_eq!(a, b);
    }
    for x0 in random_starts(&strip, &grown.metric, 20, 3) {
        let traj = rollout(&model, &grown, &x0, 15.0).unwrap();
        let env = envelope_check(&traj, &cert, &grown.metric, &grown.equilibrium);
        assert!(env.max_violation <= 1e-6 && env.settle_time.is_some(), "{x0:?}");
    }
}

#[test]
fn overlapping_expansion_is_rejected() {
    let old: AssignmentSet = base().assignments;
    let overlap = Region::boxed(vec![-2.0, 1.0], vec![2.0, 3.0]);
    assert!(matches!(expand(&plane(), &old, &overlap, &config()), Err(NcpError::RegionOverlap(_))));
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemModel, TubeEstimate};
use crate::error::{NcpError, Result};
use crate::geometry::{Ball, BallIndex, Metric, Region};
use crate::search::Alphabet;

pub const SCHEMA_VERSION: u32 = 1;

/// Name and parameters of the model a set was synthesized for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TripleKind {
    /// Certified by the decrease and feasibility conditions.
    Direct,
    /// Certified through anchors; `anchor_tau` is the longest anchor duration
    /// a chain may spend after this cell before the decrease is realized.
    Bootstrap { anchor_tau: f64 },
}

/// Verified cell `(x_i, r_i, v_i)` with its duration and certified rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Weighted max-norm half-width of the cube the ball was built around.
    pub half_width: f64,
    /// Index into the alphabet.
    pub signal: usize,
    pub tau: f64,
    pub steps: usize,
    pub alpha: f64,
    pub slack: f64,
    pub kind: TripleKind,
}

impl Triple {
    pub fn ball(&self) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, TripleKind::Direct)
    }
}

/// Verified triples, their signals and the geometry they were certified in.
/// Policy index `i >= 1` refers to `triples[i - 1]`; index 0 is the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet")]
pub struct AssignmentSet {
    pub version: u32,
    pub model: ModelRef,
    pub metric: Metric,
    pub region: Region,
    pub equilibrium: Vec<f64>,
    pub dt: f64,
    pub default_tau: f64,
    pub alphabet: Alphabet,
    pub triples: Vec<Triple>,
    pub estimate: TubeEstimate,
    #[serde(skip)]
    index: BallIndex,
}

#[derive(Deserialize)]
struct RawSet {
    version: u32,
    model: ModelRef,
    metric: Metric,
    region: Region,
    equilibrium: Vec<f64>,
    dt: f64,
    default_tau: f64,
    alphabet: Alphabet,
    triples: Vec<Triple>,
    estimate: TubeEstimate,
}

impl TryFrom<RawSet> for AssignmentSet {
    type Error = NcpError;

    fn try_from(r: RawSet) -> Result<Self> {
        if r.version != SCHEMA_VERSION {
            return Err(NcpError::Schema(format!(
                "unsupported assignment-set version {} (expected {SCHEMA_VERSION})",
                r.version
            )));
        }
        let set = AssignmentSet::new(
            r.model,
            r.metric,
            r.region,
            r.equilibrium,
            r.dt,
            r.default_tau,
            r.alphabet,
            r.triples,
            r.estimate,
        );
        set.check_structure()?;
        Ok(set)
    }
}

impl AssignmentSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: ModelRef,
        metric: Metric,
        region: Region,
        equilibrium: Vec<f64>,
        dt: f64,
        default_tau: f64,
        alphabet: Alphabet,
        triples: Vec<Triple>,
        estimate: TubeEstimate,
    ) -> Self {
        let balls: Vec<Ball> = triples.iter().map(Triple::ball).collect();
        let index = BallIndex::new(&balls, &metric);
        AssignmentSet {
            version: SCHEMA_VERSION,
            model,
            metric,
            region,
            equilibrium,
            dt,
            default_tau,
            alphabet,
            triples,
            estimate,
            index,
        }
    }

    pub fn ball_index(&self) -> &BallIndex {
        &self.index
    }

    /// Normalized nearest-neighbor rule: the triple minimizing
    /// `‖x − x_i‖ / r_i` when that ratio is at most one, else 0.
    pub fn index_map(&self, x: &[f64]) -> usize {
        self.index.nearest_containing(x, &self.metric).map_or(0, |(i, _)| i + 1)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    fn check_structure(&self) -> Result<()> {
        let d = self.metric.dim();
        if self.equilibrium.len() != d {
            return Err(NcpError::Schema("equilibrium dimension does not match the norm".into()));
        }
        for (i, t) in self.triples.iter().enumerate() {
            if t.center.len() != d {
                return Err(NcpError::Schema(format!("triple {} has the wrong dimension", i + 1)));
            }
            if !(t.radius > 0.0) || !(t.tau > 0.0) {
                return Err(NcpError::Schema(format!("triple {} needs radius > 0 and tau > 0", i + 1)));
            }
            if t.signal == 0 || t.signal >= self.alphabet.len() {
                return Err(NcpError::Schema(format!("triple {} references a missing signal", i + 1)));
            }
            let s = self.alphabet.get(t.signal);
            if t.steps > s.steps() || (t.steps as f64 * self.dt - t.tau).abs() > 1e-9 {
                return Err(NcpError::Schema(format!("triple {} has an inconsistent duration", i + 1)));
            }
        }
        if self.alphabet.iter().any(|s| (s.dt() - self.dt).abs() > 0.0) {
            return Err(NcpError::Schema("all signals must share the set's dt".into()));
        }
        Ok(())
    }

    /// Structural checks plus consistency with `model`.
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        self.check_structure()?;
        if model.dim != self.metric.dim() || model.angular_flags() != self.metric.angular {
            return Err(NcpError::Schema(format!(
                "assignment set does not match model `{}` (dimension or angular axes)",
                model.id
            )));
        }
        let tau_max = self.alphabet.iter().map(|s| s.duration()).fold(0.0, f64::max);
        self.alphabet.validate(model, tau_max)
    }

    /// Appends triples, keeping existing policy indices.
    pub fn extend(&mut self, triples: impl IntoIterator<Item = Triple>) {
        self.triples.extend(triples);
        self.reindex();
    }

    pub fn reindex(&mut self) {
        let balls: Vec<Ball> = self.triples.iter().map(Triple::ball).collect();
        self.index = BallIndex::new(&balls, &self.metric);
    }

    pub fn direct_count(&self) -> usize {
        self.triples.iter().filter(|t| t.is_direct()).count()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dynamics::{models, ControlSignal};
    use crate::geometry::Norm;
    use proptest::prelude::*;

    pub(crate) fn triple(center: f64, radius: f64, signal: usize, steps: usize) -> Triple {
        Triple {
            center: vec![center],
            radius,
            half_width: radius,
            signal,
            tau: steps as f64 * 0.1,
            steps,
            alpha: 0.1,
            slack: 0.0,
            kind: TripleKind::Direct,
        }
    }

    /// 1-D single integrator: push left from the right, right from the left.
    pub(crate) fn toy_set(triples: Vec<Triple>) -> AssignmentSet {
        let model = models::single_integrator();
        let mut alphabet = Alphabet::with_default(&model, 0.1, 0.1).unwrap();
        alphabet.push(ControlSignal::new(0.1, vec![vec![-1.0]; 5]).unwrap());
        alphabet.push(ControlSignal::new(0.1, vec![vec![1.0]; 5]).unwrap());
        let region = Region::ball(vec![0.0], 2.0);
        AssignmentSet::new(
            ModelRef { name: "linear_test".into(), params: BTreeMap::new() },
            Metric::flat(Norm::max(1)),
            region.clone(),
            vec![0.0],
            0.1,
            0.1,
            alphabet,
            triples,
            TubeEstimate {
                region,
                lipschitz: 0.0,
                speed_bound: 1.2,
                inflation: 1.2,
                raw_lipschitz: 0.0,
                raw_speed_bound: 1.0,
            },
        )
    }

    #[test]
    fn index_map_ties_go_to_the_lowest_index() {
        let set = toy_set(vec![triple(0.25, 0.25, 1, 1), triple(0.75, 0.25, 1, 1), triple(0.5, 0.5, 1, 1)]);
        // ratios at 0.5: 1, 1, 0
        assert_eq!(set.index_map(&[0.5]), 3);
        let set = toy_set(vec![triple(0.25, 0.25, 1, 1), triple(0.75, 0.25, 1, 1)]);
        for _ in 0..10 {
            assert_eq!(set.index_map(&[0.5]), 1);
        }
    }

    #[test]
    fn index_map_normalizes_by_radius() {
        // closer to the small center in absolute terms, but relatively deeper in the big ball
        let set = toy_set(vec![triple(0.0, 0.1, 1, 1), triple(0.5, 1.0, 1, 1)]);
        assert_eq!(set.index_map(&[0.08]), 2);
        assert_eq!(set.index_map(&[0.01]), 1);
    }

    #[test]
    fn index_map_falls_back_to_default() {
        let set = toy_set(vec![triple(1.0, 0.5, 1, 5)]);
        assert_eq!(set.index_map(&[0.4]), 0);
        assert_eq!(set.index_map(&[1.5]), 1);
        assert_eq!(toy_set(Vec::new()).index_map(&[1.0]), 0);
    }

    #[test]
    fn rejects_wrong_version_and_dangling_signal() {
        let set = toy_set(vec![triple(1.0, 0.5, 1, 5)]);
        let text = serde_json::to_string(&set).unwrap();
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            serde_json::from_str::<AssignmentSet>(&bumped),
            Err(e) if e.to_string().contains("version")
        ));
        let dangling = serde_json::to_string(&toy_set(vec![triple(1.0, 0.5, 7, 5)])).unwrap();
        assert!(serde_json::from_str::<AssignmentSet>(&dangling).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_identity(
            cells in prop::collection::vec((-2.0f64..2.0, 1e-3f64..1.0, 1usize..3, 1usize..6, any::<f64>()), 0..20)
        ) {
            let triples = cells
                .into_iter()
                .map(|(c, r, s, k, a)| Triple { alpha: if a.is_finite() { a } else { 0.0 }, ..triple(c, r, s, k) })
                .collect();
            let set = toy_set(triples);
            let text = serde_json::to_string_pretty(&set).unwrap();
            let back: AssignmentSet = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &set);
            prop_assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
        }
    }
}

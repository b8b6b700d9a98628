//! Per-relation generative models: demonstrations are mapped into the
//! relation's cylindrical frame and folded into running estimates.

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build_relation_frame, wrap_angle, CylCoords, GeometryError, ObjectCatalog, Scene};
use crate::stats::{
    mle_cylindrical, CylAccumulator, CylindricalDistribution, DistributionRecord, GaussianAccumulator, StatsError,
    VonMisesAccumulator,
};

/// Number of noisy copies added to the first demonstration.
pub const AUGMENT_COPIES: usize = 2;
/// Standard deviation of the augmentation noise, in normalized units.
pub const AUGMENT_SIGMA: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("demonstration is for `{got}` but the model is `{expected}`")]
    RelationMismatch { expected: String, got: String },
    #[error("no demonstrations given")]
    EmptySampleSet,
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationSymbol {
    pub id: String,
    pub display_name: String,
}

impl RelationSymbol {
    pub fn new(id: impl Into<String>, display_name: impl Into<String>) -> Self {
        Self { id: id.into(), display_name: display_name.into() }
    }
}

/// The twelve relations used throughout the evaluation, with the short name
/// the robot uses when talking about them.
pub fn standard_relations() -> Vec<RelationSymbol> {
    [
        ("right_of", "right"),
        ("left_of", "left"),
        ("behind", "behind"),
        ("in_front_of", "in front"),
        ("on_top_of", "on top"),
        ("close_to", "close"),
        ("far_from", "far"),
        ("between", "between"),
        ("among", "among"),
        ("closer", "closer"),
        ("farther_from", "farther"),
        ("on_the_other_side_of", "other side"),
    ]
    .into_iter()
    .map(|(id, name)| RelationSymbol::new(id, name))
    .collect()
}

/// `⟨s, u, V⟩`: move `target` so that relation `s` holds w.r.t. `references`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCommand {
    pub relation: RelationSymbol,
    pub target: String,
    pub references: Vec<String>,
}

impl RelationCommand {
    pub fn new(
        relation: RelationSymbol,
        target: impl Into<String>,
        references: Vec<String>,
    ) -> Result<Self, ModelError> {
        let cmd = Self { relation, target: target.into(), references };
        cmd.validate()?;
        Ok(cmd)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.references.is_empty() {
            return Err(ModelError::InvalidCommand("reference set is empty".into()));
        }
        if self.references.contains(&self.target) {
            return Err(ModelError::InvalidCommand(format!("target `{}` is also a reference", self.target)));
        }
        for (i, r) in self.references.iter().enumerate() {
            if self.references[..i].contains(r) {
                return Err(ModelError::InvalidCommand(format!("reference `{r}` listed twice")));
            }
        }
        Ok(())
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.target.as_str()).chain(self.references.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub scene_before: Scene,
    pub command: RelationCommand,
    pub scene_after: Scene,
}

impl Demonstration {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.command.validate()?;
        for id in self.command.objects() {
            if !self.scene_before.contains(id) || !self.scene_after.contains(id) {
                return Err(ModelError::InvalidDemonstration(format!("object `{id}` missing from a scene")));
            }
        }
        if !(self.scene_after.timestamp > self.scene_before.timestamp) {
            return Err(ModelError::InvalidDemonstration("scene_after is not later than scene_before".into()));
        }
        Ok(())
    }

    /// Where the target ended up, in the frame of the references as they
    /// were before the demonstration.
    pub fn to_cyl(&self, catalog: &ObjectCatalog) -> Result<CylCoords, ModelError> {
        self.validate()?;
        let frame = build_relation_frame(&self.scene_before, catalog, &self.command.references)?;
        Ok(frame.to_cylindrical(&self.scene_after.pose(&self.command.target)?.position))
    }
}

/// Returns `[c, c + ε₁, c + ε₂]` with i.i.d. `N(0, AUGMENT_SIGMA)` noise.
pub fn augment_first_sample(c: &CylCoords, rng: &mut impl rand::Rng) -> [CylCoords; 1 + AUGMENT_COPIES] {
    let noise = Normal::new(0.0, AUGMENT_SIGMA).expect("valid sigma");
    let mut out = [*c; 1 + AUGMENT_COPIES];
    for copy in out.iter_mut().skip(1) {
        copy.r = (c.r + noise.sample(rng)).max(0.0);
        copy.phi = wrap_angle(c.phi + noise.sample(rng));
        copy.h = c.h + noise.sample(rng);
    }
    out
}

/// Deterministic RNG for the augmentation of demo `index` of `relation`, so
/// batch replays and incremental sessions draw identical noise.
pub fn augmentation_rng(relation_id: &str, index: u64) -> ChaCha8Rng {
    let hash = crate::seed::fnv1a(relation_id.bytes().chain(index.to_le_bytes()));
    ChaCha8Rng::seed_from_u64(hash)
}

/// Generative model `G_s` of one spatial relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct RelationModel {
    relation_id: String,
    accumulator: CylAccumulator,
    theta: Option<CylindricalDistribution>,
    demo_count: u64,
}

impl RelationModel {
    pub fn new(relation_id: impl Into<String>) -> Self {
        Self { relation_id: relation_id.into(), accumulator: CylAccumulator::default(), theta: None, demo_count: 0 }
    }

    pub fn relation_id(&self) -> &str {
        &self.relation_id
    }

    pub fn theta(&self) -> Option<&CylindricalDistribution> {
        self.theta.as_ref()
    }

    /// Real demonstrations seen, excluding augmentation copies.
    pub fn demo_count(&self) -> u64 {
        self.demo_count
    }

    pub fn accumulator(&self) -> &CylAccumulator {
        &self.accumulator
    }

    fn check_relation(&self, demo: &Demonstration) -> Result<(), ModelError> {
        if demo.command.relation.id != self.relation_id {
            return Err(ModelError::RelationMismatch {
                expected: self.relation_id.clone(),
                got: demo.command.relation.id.clone(),
            });
        }
        Ok(())
    }

    /// Folds one demonstration into the model. Reads nothing but the current
    /// model state and `demo`.
    pub fn update_incremental(&mut self, demo: &Demonstration, catalog: &ObjectCatalog) -> Result<(), ModelError> {
        self.check_relation(demo)?;
        let c = demo.to_cyl(catalog)?;
        let mut next = self.accumulator;
        if self.demo_count == 0 {
            let mut rng = augmentation_rng(&self.relation_id, 0);
            augment_first_sample(&c, &mut rng).iter().for_each(|s| next.push(s));
        } else {
            next.push(&c);
        }
        let theta = next.finalize()?;
        self.accumulator = next;
        self.theta = Some(theta);
        self.demo_count += 1;
        Ok(())
    }

    /// Fits the model from scratch by maximum likelihood over all `demos`.
    /// Produces the same parameters as folding them in order through
    /// [`RelationModel::update_incremental`].
    pub fn update_batch(demos: &[Demonstration], catalog: &ObjectCatalog) -> Result<Self, ModelError> {
        let first = demos.first().ok_or(ModelError::EmptySampleSet)?;
        let mut model = Self::new(first.command.relation.id.clone());
        let mut samples = Vec::with_capacity(demos.len() + AUGMENT_COPIES);
        for (i, demo) in demos.iter().enumerate() {
            model.check_relation(demo)?;
            let c = demo.to_cyl(catalog)?;
            if i == 0 {
                let mut rng = augmentation_rng(&model.relation_id, 0);
                samples.extend(augment_first_sample(&c, &mut rng));
            } else {
                samples.push(c);
            }
        }
        samples.iter().for_each(|s| model.accumulator.push(s));
        model.theta = Some(mle_cylindrical(&samples)?);
        model.demo_count = demos.len() as u64;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct AccumulatorRecord {
    n: u64,
    mean: [f64; 2],
    m2: [[f64; 2]; 2],
    direction_sum: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    relation_id: String,
    demo_count: u64,
    accumulators: AccumulatorRecord,
    theta: Option<DistributionRecord>,
}

impl From<RelationModel> for ModelRecord {
    fn from(m: RelationModel) -> Self {
        let g = m.accumulator.gaussian;
        let v = m.accumulator.vonmises;
        Self {
            relation_id: m.relation_id,
            demo_count: m.demo_count,
            accumulators: AccumulatorRecord {
                n: g.n,
                mean: [g.mean.x, g.mean.y],
                m2: [[g.m2[(0, 0)], g.m2[(0, 1)]], [g.m2[(1, 0)], g.m2[(1, 1)]]],
                direction_sum: [v.direction_sum.x, v.direction_sum.y],
            },
            theta: m.theta.map(Into::into),
        }
    }
}

impl TryFrom<ModelRecord> for RelationModel {
    type Error = ModelError;

    fn try_from(r: ModelRecord) -> Result<Self, Self::Error> {
        let a = r.accumulators;
        let accumulator = CylAccumulator {
            gaussian: GaussianAccumulator {
                n: a.n,
                mean: Vector2::from(a.mean),
                m2: Matrix2::new(a.m2[0][0], a.m2[0][1], a.m2[1][0], a.m2[1][1]),
            },
            vonmises: VonMisesAccumulator { n: a.n, direction_sum: Vector2::from(a.direction_sum) },
        };
        let expected_n = if r.demo_count == 0 { 0 } else { r.demo_count + AUGMENT_COPIES as u64 };
        if a.n != expected_n || r.theta.is_some() != (r.demo_count > 0) {
            return Err(ModelError::InvalidDemonstration(format!("inconsistent model record for `{}`", r.relation_id)));
        }
        Ok(Self {
            relation_id: r.relation_id,
            accumulator,
            theta: r.theta.map(CylindricalDistribution::try_from).transpose()?,
            demo_count: r.demo_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObjectModel, Pose, RelationFrame, Vec3};
    use crate::stats::{a2, mle_gaussian};
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn catalog() -> ObjectCatalog {
        ObjectCatalog::new([
            ObjectModel::new("cup", "cup", [0.08, 0.08, 0.1]).unwrap(),
            ObjectModel::new("tea", "tea", [0.06, 0.06, 0.12]).unwrap(),
        ])
        .unwrap()
    }

    fn right_of() -> RelationSymbol {
        RelationSymbol::new("right_of", "right")
    }

    fn before() -> Scene {
        Scene::new(0.0).with("cup", Pose::at(0.0, 0.0, 0.05)).with("tea", Pose::at(-0.3, 0.2, 0.06))
    }

    fn frame() -> RelationFrame {
        build_relation_frame(&before(), &catalog(), &["cup"]).unwrap()
    }

    fn demo_to(c: CylCoords) -> Demonstration {
        let mut after = before();
        after.timestamp = 1.0;
        after.pose_mut("tea").unwrap().position = frame().from_cylindrical(&c);
        Demonstration {
            scene_before: before(),
            command: RelationCommand::new(right_of(), "tea", vec!["cup".into()]).unwrap(),
            scene_after: after,
        }
    }

    #[test]
    fn cyl_axis_and_origin() {
        let f = frame();
        let mut d = demo_to(CylCoords::new(0.0, 0.0, 0.0));
        d.scene_after.pose_mut("tea").unwrap().position = f.origin + Vec3::new(f.horizontal_scale, 0.0, 0.0);
        let c = d.to_cyl(&catalog()).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12 && c.phi == 0.0 && c.h == 0.0);
        d.scene_after.pose_mut("tea").unwrap().position = f.origin;
        assert_eq!(d.to_cyl(&catalog()).unwrap(), CylCoords::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn cyl_round_trip_through_frame() {
        let c = CylCoords::new(2.3, -1.1, 0.6);
        let got = demo_to(c).to_cyl(&catalog()).unwrap();
        assert!((got.r - c.r).abs() < 1e-9 && (got.phi - c.phi).abs() < 1e-9 && (got.h - c.h).abs() < 1e-9);
    }

    #[test]
    fn invalid_demonstrations() {
        let mut d = demo_to(CylCoords::new(1.0, 0.0, 0.0));
        d.scene_after.timestamp = 0.0;
        assert!(matches!(d.to_cyl(&catalog()), Err(ModelError::InvalidDemonstration(_))));
        assert!(RelationCommand::new(right_of(), "cup", vec!["cup".into()]).is_err());
        assert!(RelationCommand::new(right_of(), "tea", vec![]).is_err());
    }

    #[test]
    fn augmentation_properties() {
        let c = CylCoords::new(1.5, 3.1, 0.4);
        let mut rng = augmentation_rng("x", 0);
        for _ in 0..1000 {
            let out = augment_first_sample(&c, &mut rng);
            assert_eq!(out[0], c);
            for copy in &out[1..] {
                assert!((copy.r - c.r).abs() < 6e-3 && (copy.h - c.h).abs() < 6e-3);
                assert!(wrap_angle(copy.phi - c.phi).abs() < 6e-3);
                assert!((-PI..PI).contains(&copy.phi));
            }
            let rh: Vec<_> = out.iter().map(|s| Vector2::new(s.r, s.h)).collect();
            let fit = mle_gaussian(&rh).unwrap();
            assert!((fit.mean() - Vector2::new(c.r, c.h)).amax() < 2e-3);
        }
    }

    #[test]
    fn augmentation_clamps_radius() {
        let mut rng = augmentation_rng("y", 0);
        for _ in 0..100 {
            assert!(augment_first_sample(&CylCoords::new(0.0, 0.0, 0.0), &mut rng).iter().all(|c| c.r >= 0.0));
        }
    }

    #[test]
    fn first_demo_concentrates_model() {
        let c = CylCoords::new(2.0, 0.3, 0.5);
        let mut model = RelationModel::new("right_of");
        model.update_incremental(&demo_to(c), &catalog()).unwrap();
        let theta = model.theta().unwrap();
        assert_eq!(model.demo_count(), 1);
        assert_eq!(model.accumulator().n(), 3);
        assert!((theta.mean().r - c.r).abs() < 2e-3 && (theta.mean().h - c.h).abs() < 2e-3);
        assert!(wrap_angle(theta.mean().phi - c.phi).abs() < 2e-3);
        assert!(theta.rh.covariance().amax() < 1e-5);
    }

    #[test]
    fn two_demos_mean_direction() {
        let mut model = RelationModel::new("right_of");
        model.update_incremental(&demo_to(CylCoords::new(1.0, 0.0, 0.0)), &catalog()).unwrap();
        model.update_incremental(&demo_to(CylCoords::new(1.0, FRAC_PI_2, 0.0)), &catalog()).unwrap();
        // three samples near 0 and one at π/2 pull the mean off π/4; the
        // closed form over the same four directions is the oracle
        let acc = model.accumulator().vonmises;
        let expected = acc.direction_sum.y.atan2(acc.direction_sum.x);
        assert!((model.theta().unwrap().phi.mean_angle() - expected).abs() < 1e-15);
        assert!(expected > 0.0 && expected < FRAC_PI_4);
    }

    #[test]
    fn mismatched_relation() {
        let mut model = RelationModel::new("left_of");
        let err = model.update_incremental(&demo_to(CylCoords::new(1.0, 0.0, 0.0)), &catalog()).unwrap_err();
        assert!(matches!(err, ModelError::RelationMismatch { .. }));
        assert_eq!(model.demo_count(), 0);
        assert!(model.theta().is_none());
    }

    #[test]
    fn batch_errors() {
        assert_eq!(RelationModel::update_batch(&[], &catalog()).unwrap_err(), ModelError::EmptySampleSet);
        let mut other = demo_to(CylCoords::new(1.0, 0.0, 0.0));
        other.command.relation = RelationSymbol::new("behind", "behind");
        let demos = [demo_to(CylCoords::new(1.0, 0.0, 0.0)), other];
        assert!(matches!(RelationModel::update_batch(&demos, &catalog()), Err(ModelError::RelationMismatch { .. })));
    }

    fn assert_theta_close(a: &CylindricalDistribution, b: &CylindricalDistribution, tol: f64) {
        assert!((a.rh.mean() - b.rh.mean()).amax() <= tol);
        assert!((a.rh.covariance() - b.rh.covariance()).amax() <= tol);
        assert!(wrap_angle(a.phi.mean_angle() - b.phi.mean_angle()).abs() <= tol);
        assert!((a2(a.phi.concentration()) - a2(b.phi.concentration())).abs() <= tol);
    }

    #[test]
    fn batch_equals_incremental() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for len in [1usize, 2, 5, 37, 100] {
            let demos: Vec<_> = (0..len)
                .map(|_| {
                    demo_to(CylCoords::new(
                        rng.random_range(1.0..3.0),
                        rng.random_range(-0.8..0.8),
                        rng.random_range(0.0..1.0),
                    ))
                })
                .collect();
            let batch = RelationModel::update_batch(&demos, &catalog()).unwrap();
            let mut inc = RelationModel::new("right_of");
            demos.iter().for_each(|d| inc.update_incremental(d, &catalog()).unwrap());
            assert_eq!(batch.demo_count(), inc.demo_count());
            assert_theta_close(batch.theta().unwrap(), inc.theta().unwrap(), 1e-9);
            assert_eq!(batch.accumulator(), inc.accumulator());
            if len == 1 {
                assert_theta_close(batch.theta().unwrap(), inc.theta().unwrap(), 1e-15);
            }
        }
    }

    #[test]
    fn record_round_trip_and_format() {
        let mut model = RelationModel::new("right_of");
        model.update_incremental(&demo_to(CylCoords::new(2.0, 0.1, 0.4)), &catalog()).unwrap();
        model.update_incremental(&demo_to(CylCoords::new(2.5, -0.1, 0.5)), &catalog()).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        assert_eq!(json["relation_id"], "right_of");
        assert_eq!(json["demo_count"], 2);
        assert_eq!(json["accumulators"]["n"], 4);
        assert!(json["theta"]["sigma_rh"].is_array());
        let back: RelationModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, model);
        let empty: RelationModel =
            serde_json::from_str(&serde_json::to_string(&RelationModel::new("x")).unwrap()).unwrap();
        assert_eq!(empty, RelationModel::new("x"));
    }
}

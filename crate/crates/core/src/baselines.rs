//! Fixed-offset placement rules, one per standard relation, used as the
//! comparison point for learned models.

use thiserror::Error;

use crate::geometry::{build_relation_frame, GeometryError, ObjectCatalog, Scene, Vec3};
use crate::planner::{check_feasible, select, Candidate, PlanConfig, PlanResult, Workspace};
use crate::relation::RelationCommand;

/// Offset used by the direction rules.
pub const DIRECTION_OFFSET: f64 = 0.20;
pub const ON_TOP_OFFSET: f64 = 0.10;
pub const CLOSE_OFFSET: f64 = 0.10;
pub const FAR_OFFSET: f64 = 0.50;
pub const AMONG_OFFSET: f64 = 0.10;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no baseline rule for relation `{0}`")]
    UnknownRelation(String),
    #[error("direction undefined: target and reference positions coincide")]
    DegenerateDirection,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn dir(v: Vec3) -> Result<Vec3, BaselineError> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(BaselineError::DegenerateDirection);
    }
    Ok(v / n)
}

/// Relation ids that have a rule.
pub const BASELINE_RELATIONS: [&str; 12] = [
    "right_of",
    "left_of",
    "behind",
    "in_front_of",
    "on_top_of",
    "close_to",
    "far_from",
    "between",
    "among",
    "closer",
    "farther_from",
    "on_the_other_side_of",
];

/// Placement from the rule for `relation`, given the target's initial
/// position `p_u` and the reference positions. With several references the
/// single-reference rules use their mean.
pub fn baseline_position(relation: &str, p_u: &Vec3, refs: &[Vec3]) -> Result<Vec3, BaselineError> {
    if refs.is_empty() {
        return Err(GeometryError::EmptyReferenceSet.into());
    }
    let mean = refs.iter().sum::<Vec3>() / refs.len() as f64;
    let p_v = mean;
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    Ok(match relation {
        "right_of" => p_v + DIRECTION_OFFSET * x,
        "left_of" => p_v - DIRECTION_OFFSET * x,
        "behind" => p_v + DIRECTION_OFFSET * y,
        "in_front_of" => p_v - DIRECTION_OFFSET * y,
        "on_top_of" => p_v + ON_TOP_OFFSET * z,
        "close_to" => p_v + CLOSE_OFFSET * dir(p_u - p_v)?,
        "far_from" => p_v + FAR_OFFSET * dir(p_u - p_v)?,
        "between" => mean,
        "among" => mean + AMONG_OFFSET * dir(p_u - mean)?,
        "closer" => p_v + 0.5 * (p_u - p_v),
        "farther_from" => p_v + 2.0 * (p_u - p_v),
        "on_the_other_side_of" => p_v - (p_u - p_v),
        other => return Err(BaselineError::UnknownRelation(other.to_owned())),
    })
}

/// Placement for `command` in `scene`, reading object positions from the
/// scene.
pub fn baseline_place(scene: &Scene, command: &RelationCommand) -> Result<Vec3, BaselineError> {
    let p_u = scene.pose(&command.target)?.position;
    let refs = command.references.iter().map(|r| scene.pose(r).map(|p| p.position)).collect::<Result<Vec<_>, _>>()?;
    baseline_position(&command.relation.id, &p_u, &refs)
}

/// Runs the single rule-based placement through the feasibility check.
pub fn baseline_plan(
    scene: &Scene,
    catalog: &ObjectCatalog,
    command: &RelationCommand,
    workspace: &Workspace,
    config: &PlanConfig,
) -> Result<PlanResult, BaselineError> {
    let position = baseline_place(scene, command)?;
    let frame = build_relation_frame(scene, catalog, &command.references)?;
    let verdict = check_feasible(scene, catalog, &command.target, &position, workspace, config)?;
    let candidate = Candidate {
        index: 0,
        position,
        coords: frame.to_cylindrical(&position),
        ln_density: 0.0,
        density: 1.0,
        verdict,
    };
    Ok(select(vec![candidate]))
}

//! Synthetic tabletop tasks and demonstrations drawn from known ground-truth
//! relation models. Stands in for recorded human demonstrations.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::geometry::{build_relation_frame, world_aabb, Aabb, ObjectCatalog, ObjectModel, Pose, Scene, Vec3};
use crate::planner::{check_feasible, PlanConfig, Workspace};
use crate::relation::{Demonstration, RelationCommand, RelationSymbol};
use crate::seed::substream;
use crate::stats::{CylindricalDistribution, Gaussian2D, VonMises};

pub const TABLE_TOP: f64 = 0.7;
pub const GENERATION_ATTEMPTS: usize = 1000;
const PLACEMENT_ATTEMPTS: usize = 500;

/// Twelve household objects, all 8 to 12 cm tall.
pub fn default_catalog() -> ObjectCatalog {
    let objects = [
        ("cup", [0.08, 0.08, 0.10]),
        ("mug", [0.09, 0.09, 0.09]),
        ("bowl", [0.12, 0.12, 0.08]),
        ("jar", [0.08, 0.08, 0.12]),
        ("can", [0.07, 0.07, 0.11]),
        ("box", [0.12, 0.08, 0.10]),
        ("teapot", [0.12, 0.10, 0.12]),
        ("glass", [0.07, 0.07, 0.11]),
        ("tin", [0.10, 0.10, 0.08]),
        ("carton", [0.09, 0.06, 0.12]),
        ("kettle", [0.12, 0.12, 0.12]),
        ("vase", [0.08, 0.08, 0.12]),
    ];
    ObjectCatalog::new(objects.map(|(id, ext)| ObjectModel::new(id, id, ext).expect("valid extents")))
        .expect("unique ids")
}

/// A 1.6 m × 1.0 m table with its top at 0.7 m.
pub fn default_workspace() -> Workspace {
    Workspace::single_table(Aabb::new(Vec3::new(-0.8, -0.5, 0.0), Vec3::new(0.8, 0.5, TABLE_TOP)))
}

pub fn reference_count(relation: &str) -> usize {
    match relation {
        "between" => 2,
        "among" => 3,
        _ => 1,
    }
}

fn truth(mu: [f64; 2], sd: [f64; 2], mu_phi: f64, kappa: f64) -> CylindricalDistribution {
    let rh = Gaussian2D::new(Vector2::new(mu[0], mu[1]), Matrix2::new(sd[0] * sd[0], 0.0, 0.0, sd[1] * sd[1]))
        .expect("positive definite");
    CylindricalDistribution::new(rh, VonMises::new(mu_phi, kappa).expect("valid concentration"))
}

/// Ground-truth placement distribution for each standard relation, in the
/// normalized frame of its references.
pub fn ground_truth(relation: &str) -> Option<CylindricalDistribution> {
    let flat = [0.5, 0.1];
    Some(match relation {
        "right_of" => truth([3.5, flat[0]], [0.5, flat[1]], 0.0, 8.0),
        "left_of" => truth([3.5, flat[0]], [0.5, flat[1]], PI, 8.0),
        "behind" => truth([3.5, flat[0]], [0.5, flat[1]], PI / 2.0, 8.0),
        "in_front_of" => truth([3.5, flat[0]], [0.5, flat[1]], -PI / 2.0, 8.0),
        "on_top_of" => truth([0.1, 1.5], [0.1, 0.1], 0.0, 0.0),
        "close_to" => truth([2.5, flat[0]], [0.4, flat[1]], 0.0, 0.0),
        "far_from" => truth([7.0, flat[0]], [0.8, flat[1]], 0.0, 0.0),
        "between" => truth([0.05, flat[0]], [0.08, flat[1]], 0.0, 0.0),
        "among" => truth([0.2, flat[0]], [0.15, flat[1]], 0.0, 0.0),
        "closer" => truth([2.0, flat[0]], [0.3, flat[1]], -PI / 2.0, 2.0),
        "farther_from" => truth([6.0, flat[0]], [0.7, flat[1]], PI / 2.0, 2.0),
        "on_the_other_side_of" => truth([3.5, flat[0]], [0.5, flat[1]], PI / 2.0, 4.0),
        _ => return None,
    })
}

/// Center height of `model` resting on a surface at `surface`.
fn rest_z(model: &ObjectModel, surface: f64) -> f64 {
    surface + 0.5 * model.extents[2]
}

/// Highest surface under `(x, y)` and the object providing it, if any.
fn surface_under(
    scene: &Scene,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    skip: &str,
    x: f64,
    y: f64,
) -> Result<Option<(f64, Option<String>)>, HarnessError> {
    let mut best: Option<(f64, Option<String>)> = workspace
        .tables
        .iter()
        .filter(|t| t.contains_xy(x, y))
        .map(|t| (t.max.z, None))
        .reduce(|a, b| if b.0 > a.0 { b } else { a });
    for (id, pose) in scene.iter().filter(|(id, _)| *id != skip) {
        let aabb = world_aabb(catalog.get(id)?, pose);
        if aabb.contains_xy(x, y) && best.as_ref().is_none_or(|(z, _)| aabb.max.z > *z) {
            best = Some((aabb.max.z, Some(id.to_owned())));
        }
    }
    Ok(best)
}

/// Puts `id` at a random collision-free spot in `region` (xy min/max).
fn place_free(
    rng: &mut ChaCha8Rng,
    scene: &mut Scene,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    config: &PlanConfig,
    id: &str,
    region: [f64; 4],
) -> Result<bool, HarnessError> {
    let model = catalog.get(id)?;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let x = rng.random_range(region[0]..region[1]);
        let y = rng.random_range(region[2]..region[3]);
        let yaw = rng.random_range(-PI..PI);
        if place_at(scene, catalog, workspace, config, model, x, y, yaw)? {
            return Ok(true);
        }
    }
    scene.remove(id);
    Ok(false)
}

#[allow(clippy::too_many_arguments)]
fn place_at(
    scene: &mut Scene,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    config: &PlanConfig,
    model: &ObjectModel,
    x: f64,
    y: f64,
    yaw: f64,
) -> Result<bool, HarnessError> {
    let at = Vec3::new(x, y, rest_z(model, TABLE_TOP));
    scene.insert(model.id.clone(), Pose::new(at, Pose::at(0.0, 0.0, 0.0).with_yaw(yaw).orientation));
    let ok = check_feasible(scene, catalog, &model.id, &at, workspace, config)?.feasible;
    if !ok {
        scene.remove(&model.id);
    }
    Ok(ok)
}

/// Random task scene for `relation`: target, references and `clutter`
/// distractors, plus the command. Objects are spread so that none overlap.
pub fn generate_task(
    rng: &mut ChaCha8Rng,
    relation: &RelationSymbol,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    clutter: usize,
    timestamp: f64,
) -> Result<(Scene, RelationCommand), HarnessError> {
    let config = PlanConfig::default();
    let n_refs = reference_count(&relation.id);
    let ids: Vec<&str> = catalog.iter().map(|o| o.id.as_str()).collect();
    if ids.len() < 1 + n_refs + clutter {
        return Err(HarnessError::InvalidScenario(format!(
            "catalog has {} objects, task needs {}",
            ids.len(),
            1 + n_refs + clutter
        )));
    }
    for _ in 0..GENERATION_ATTEMPTS {
        let chosen: Vec<&str> = ids.choose_multiple(rng, 1 + n_refs + clutter).copied().collect();
        let (target, rest) = chosen.split_first().expect("non-empty");
        let (refs, distractors) = rest.split_at(n_refs);
        let mut scene = Scene::new(timestamp);
        if !place_references(rng, &mut scene, catalog, workspace, &config, refs)? {
            continue;
        }
        let table = [-0.7, 0.7, -0.4, 0.4];
        if !place_free(rng, &mut scene, catalog, workspace, &config, target, table)? {
            continue;
        }
        let mut ok = true;
        for d in distractors {
            ok &= place_free(rng, &mut scene, catalog, workspace, &config, d, table)?;
        }
        if !ok {
            continue;
        }
        let command = RelationCommand::new(relation.clone(), *target, refs.iter().map(|r| r.to_string()).collect())?;
        return Ok((scene, command));
    }
    Err(HarnessError::InfeasibleGeneration { relation: relation.id.clone(), attempts: GENERATION_ATTEMPTS })
}

fn place_references(
    rng: &mut ChaCha8Rng,
    scene: &mut Scene,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    config: &PlanConfig,
    refs: &[&str],
) -> Result<bool, HarnessError> {
    match refs.len() {
        1 => place_free(rng, scene, catalog, workspace, config, refs[0], [-0.45, 0.45, -0.25, 0.25]),
        n => {
            // evenly spread around a center: a pair 0.4–0.5 m apart, or a
            // ring of radius 0.25–0.3 m
            let (cx, cy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.15..0.15));
            let radius = if n == 2 { rng.random_range(0.2..0.25) } else { rng.random_range(0.25..0.3) };
            let start = rng.random_range(-PI..PI);
            for (k, id) in refs.iter().enumerate() {
                let a = start + 2.0 * PI * k as f64 / n as f64 + rng.random_range(-0.2..0.2);
                let yaw = rng.random_range(-PI..PI);
                let model = catalog.get(id)?;
                if !place_at(
                    scene,
                    catalog,
                    workspace,
                    config,
                    model,
                    cx + radius * a.cos(),
                    cy + radius * a.sin(),
                    yaw,
                )? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Where the target ends up in a demonstration: a ground-truth sample
/// dropped onto the surface below it. On-top relations must land on a
/// reference, all others on the table.
pub fn sample_placement(
    rng: &mut ChaCha8Rng,
    truth: &CylindricalDistribution,
    scene: &Scene,
    command: &RelationCommand,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
) -> Result<Vec3, HarnessError> {
    let config = PlanConfig::default();
    let frame = build_relation_frame(scene, catalog, &command.references)?;
    let target = catalog.get(&command.target)?;
    let on_top = command.relation.id == "on_top_of";
    for _ in 0..GENERATION_ATTEMPTS {
        let p = frame.from_cylindrical(&truth.sample(rng));
        let Some((surface, by)) = surface_under(scene, catalog, workspace, &command.target, p.x, p.y)? else {
            continue;
        };
        let allowed = match &by {
            Some(id) => on_top && command.references.contains(id),
            None => !on_top,
        };
        if !allowed {
            continue;
        }
        let at = Vec3::new(p.x, p.y, rest_z(target, surface));
        if check_feasible(scene, catalog, &command.target, &at, workspace, &config)?.feasible {
            return Ok(at);
        }
    }
    Err(HarnessError::InfeasibleGeneration { relation: command.relation.id.clone(), attempts: GENERATION_ATTEMPTS })
}

/// `count` demonstrations of `relation` from `truth`, each in a fresh random
/// scene with `clutter` distractors.
pub fn generate_synthetic_demos(
    truth: &CylindricalDistribution,
    relation: &RelationSymbol,
    catalog: &ObjectCatalog,
    workspace: &Workspace,
    count: usize,
    clutter: usize,
    seed: u64,
) -> Result<Vec<Demonstration>, HarnessError> {
    let mut rng = substream(seed, &format!("demos/{}", relation.id), &[]);
    (0..count)
        .map(|i| {
            let t = 2.0 * i as f64;
            let (scene, command) = generate_task(&mut rng, relation, catalog, workspace, clutter, t)?;
            let at = sample_placement(&mut rng, truth, &scene, &command, catalog, workspace)?;
            let orientation = scene.pose(&command.target)?.orientation;
            let mut after = scene.clone().with(command.target.clone(), Pose::new(at, orientation));
            after.timestamp = t + 1.0;
            Ok(Demonstration { scene_before: scene, command, scene_after: after })
        })
        .collect()
}

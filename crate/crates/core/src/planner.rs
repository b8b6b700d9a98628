//! Placement planning: sample candidates from a relation model, keep the
//! feasible ones and pick the most probable.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    build_relation_frame, read_json, world_aabb, Aabb, CylCoords, GeometryError, ObjectCatalog, RelationFrame, Scene,
    Vec3,
};
use crate::relation::{RelationCommand, RelationModel};
use crate::stats::CylindricalDistribution;

/// Below this, touching boxes are not counted as overlapping in z.
const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    /// Support surfaces; the top face of each box is a table top.
    pub tables: Vec<Aabb>,
    /// Allowed placement region in xy.
    pub bounds: Aabb,
}

impl Workspace {
    pub fn new(tables: Vec<Aabb>, bounds: Aabb) -> Result<Self, GeometryError> {
        let ws = Self { tables, bounds };
        ws.validate()?;
        Ok(ws)
    }

    /// One table whose top face also serves as the bounds.
    pub fn single_table(table: Aabb) -> Self {
        Self { tables: vec![table], bounds: table }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (i, a) in self.tables.iter().enumerate() {
            for b in &self.tables[i + 1..] {
                let overlap = a.min.x < b.max.x && b.min.x < a.max.x && a.min.y < b.max.y && b.min.y < a.max.y;
                if overlap {
                    return Err(GeometryError::InvalidWorkspace("table surfaces overlap in xy".into()));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let ws: Self = read_json(path.as_ref())?;
        ws.validate()?;
        Ok(ws)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Space in which candidate densities are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySpace {
    /// Density of the normalized cylindrical coordinates.
    #[default]
    Normalized,
    /// Density per cubic meter of world space.
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub candidate_count: usize,
    pub collision_margin: f64,
    pub rotation_checks: usize,
    pub support_snap: f64,
    pub seed: u64,
    pub density_space: DensitySpace,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            candidate_count: 50,
            collision_margin: 0.025,
            rotation_checks: 8,
            support_snap: 0.02,
            seed: 0,
            density_space: DensitySpace::Normalized,
        }
    }
}

impl PlanConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    OutOfBounds,
    Unsupported,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub feasible: bool,
    pub reason: Option<RejectReason>,
    /// Candidate position with z moved onto the supporting surface, when
    /// one was found.
    pub snapped: Option<Vec3>,
    /// Object the target would collide with.
    pub blocker: Option<String>,
}

impl Verdict {
    fn reject(reason: RejectReason, snapped: Option<Vec3>) -> Self {
        Self { feasible: false, reason: Some(reason), snapped, blocker: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Success,
    NoModel,
    NoFeasibleCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub position: Vec3,
    pub coords: CylCoords,
    pub ln_density: f64,
    pub density: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub chosen: Option<Vec3>,
    pub candidates: Vec<Candidate>,
}

impl PlanResult {
    pub fn no_model() -> Self {
        Self { status: PlanStatus::NoModel, chosen: None, candidates: Vec::new() }
    }

    pub fn is_success(&self) -> bool {
        self.status == PlanStatus::Success
    }

    /// The selected candidate, if any.
    pub fn best(&self) -> Option<&Candidate> {
        let chosen = self.chosen?;
        self.candidates.iter().find(|c| c.verdict.snapped == Some(chosen) && c.verdict.feasible)
    }
}

/// Rectangle in the plane given by center, half sizes and rotation.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    center: Vector2<f64>,
    half: Vector2<f64>,
    yaw: f64,
}

impl Footprint {
    fn axes(&self) -> [Vector2<f64>; 2] {
        let (s, c) = self.yaw.sin_cos();
        [Vector2::new(c, s), Vector2::new(-s, c)]
    }

    fn project(&self, axis: &Vector2<f64>) -> (f64, f64) {
        let [a, b] = self.axes();
        let center = self.center.dot(axis);
        let radius = self.half.x * a.dot(axis).abs() + self.half.y * b.dot(axis).abs();
        (center - radius, center + radius)
    }

    /// Separating axis test; touching edges do not overlap.
    fn overlaps(&self, other: &Footprint) -> bool {
        self.axes().iter().chain(other.axes().iter()).all(|axis| {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            a0 < b1 && b0 < a1
        })
    }
}

/// Checks whether `target` centered at `candidate` is inside the workspace,
/// resting on a surface and clear of every other object in `scene`.
pub fn check_feasible(
    scene: &Scene,
    catalog: &ObjectCatalog,
    target: &str,
    candidate: &Vec3,
    workspace: &Workspace,
    config: &PlanConfig,
) -> Result<Verdict, GeometryError> {
    let model = catalog.get(target)?;
    let orientation = scene.pose(target)?.orientation;
    let mut pose = crate::geometry::Pose::new(*candidate, orientation);

    let aabb = world_aabb(model, &pose);
    if !workspace.bounds.contains_footprint(&aabb) {
        return Ok(Verdict::reject(RejectReason::OutOfBounds, None));
    }

    let bottom_offset = candidate.z - aabb.min.z;
    let obstacles: Vec<(&str, Aabb, f64)> = scene
        .iter()
        .filter(|(id, _)| *id != target)
        .map(|(id, p)| Ok((id, world_aabb(catalog.get(id)?, p), p.yaw())))
        .collect::<Result<_, GeometryError>>()?;

    let tables = workspace.tables.iter().filter(|t| t.contains_xy(candidate.x, candidate.y)).map(|t| t.max.z);
    let tops = obstacles.iter().filter(|(_, b, _)| b.contains_xy(candidate.x, candidate.y)).map(|(_, b, _)| b.max.z);
    let surfaces = tables.chain(tops);
    let mut support: Option<f64> = None;
    for top in surfaces {
        let gap = (aabb.min.z - top).abs();
        if gap > config.support_snap {
            continue;
        }
        support = match support {
            Some(s) => {
                let best = (aabb.min.z - s).abs();
                if gap < best || (gap == best && top > s) {
                    Some(top)
                } else {
                    Some(s)
                }
            }
            None => Some(top),
        };
    }
    let Some(top) = support else {
        return Ok(Verdict::reject(RejectReason::Unsupported, None));
    };
    let snapped = Vec3::new(candidate.x, candidate.y, top + bottom_offset);
    pose.position = snapped;

    let bottom = top;
    let height = aabb.max.z - aabb.min.z;
    let half = model.half_extents();
    let base_yaw = pose.yaw();
    let step = 2.0 * PI / config.rotation_checks.max(1) as f64;
    for (id, other, yaw) in &obstacles {
        let z_overlap = bottom < other.max.z - CONTACT_TOLERANCE && other.min.z < bottom + height - CONTACT_TOLERANCE;
        if !z_overlap {
            continue;
        }
        let other_model = catalog.get(id)?;
        let other_print = Footprint {
            center: Vector2::new(0.5 * (other.min.x + other.max.x), 0.5 * (other.min.y + other.max.y)),
            half: Vector2::new(other_model.extents[0], other_model.extents[1]) * 0.5,
            yaw: *yaw,
        };
        let hit = (0..config.rotation_checks.max(1)).any(|k| {
            let print = Footprint {
                center: Vector2::new(snapped.x, snapped.y),
                half: Vector2::new(half.x, half.y).add_scalar(config.collision_margin),
                yaw: base_yaw + k as f64 * step,
            };
            print.overlaps(&other_print)
        });
        if hit {
            let mut v = Verdict::reject(RejectReason::Collision, Some(snapped));
            v.blocker = Some((*id).to_owned());
            return Ok(v);
        }
    }
    Ok(Verdict { feasible: true, reason: None, snapped: Some(snapped), blocker: None })
}

/// Log density of a sampled point in the requested space.
pub fn ln_density(theta: &CylindricalDistribution, frame: &RelationFrame, c: &CylCoords, space: DensitySpace) -> f64 {
    let ln_p = theta.ln_pdf(c);
    match space {
        DensitySpace::Normalized => ln_p,
        DensitySpace::Metric => {
            let hs = frame.horizontal_scale;
            ln_p - (c.r.max(1e-12) * hs * hs * frame.vertical_scale).ln()
        }
    }
}

/// Samples placements for `command` from `model` and returns the most
/// probable feasible one.
pub fn plan(
    scene: &Scene,
    catalog: &ObjectCatalog,
    command: &RelationCommand,
    model: Option<&RelationModel>,
    workspace: &Workspace,
    config: &PlanConfig,
) -> Result<PlanResult, GeometryError> {
    for id in command.objects() {
        scene.pose(id)?;
        catalog.get(id)?;
    }
    let Some(theta) = model.and_then(RelationModel::theta) else {
        return Ok(PlanResult::no_model());
    };
    let frame = build_relation_frame(scene, catalog, &command.references)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut candidates = Vec::with_capacity(config.candidate_count);
    for index in 0..config.candidate_count.max(1) {
        let coords = theta.sample(&mut rng);
        let position = frame.from_cylindrical(&coords);
        let ln_d = ln_density(theta, &frame, &coords, config.density_space);
        let verdict = check_feasible(scene, catalog, &command.target, &position, workspace, config)?;
        candidates.push(Candidate { index, position, coords, ln_density: ln_d, density: ln_d.exp(), verdict });
    }
    Ok(select(candidates))
}

/// Picks the feasible candidate with the highest density, lowest index
/// first on ties.
pub fn select(candidates: Vec<Candidate>) -> PlanResult {
    let best = candidates
        .iter()
        .filter(|c| c.verdict.feasible)
        .fold(None::<&Candidate>, |best, c| match best {
            Some(b) if b.ln_density >= c.ln_density => Some(b),
            _ => Some(c),
        })
        .and_then(|c| c.verdict.snapped);
    PlanResult {
        status: if best.is_some() { PlanStatus::Success } else { PlanStatus::NoFeasibleCandidate },
        chosen: best,
        candidates,
    }
}

/// Row-major grid of densities over an xy rectangle at a fixed world
/// height. Cell values are taken at cell centers.
pub fn density_grid(
    theta: &CylindricalDistribution,
    frame: &RelationFrame,
    region: &Aabb,
    z: f64,
    width: usize,
    height: usize,
) -> Vec<f64> {
    let (dx, dy) = ((region.max.x - region.min.x) / width as f64, (region.max.y - region.min.y) / height as f64);
    let mut out = Vec::with_capacity(width * height);
    for j in 0..height {
        let y = region.min.y + (j as f64 + 0.5) * dy;
        for i in 0..width {
            let x = region.min.x + (i as f64 + 0.5) * dx;
            out.push(theta.pdf(&frame.to_cylindrical(&Vec3::new(x, y, z))));
        }
    }
    out
}

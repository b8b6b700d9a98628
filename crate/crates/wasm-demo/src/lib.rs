//! Browser playground: teach one relation by clicking on a table, look at
//! the learned density and compare planned placements with the fixed rules.

use relspace_core::baselines::baseline_place;
use relspace_core::geometry::{build_relation_frame, Aabb, ObjectCatalog, Pose, Scene};
use relspace_core::harness::synthetic::{default_catalog, default_workspace, reference_count, TABLE_TOP};
use relspace_core::planner::{density_grid, plan, PlanConfig, PlanStatus, Workspace};
use relspace_core::relation::{standard_relations, Demonstration, RelationCommand, RelationModel};
use relspace_core::seed::substream_seed;
use serde::Serialize;

#[cfg(target_arch = "wasm32")]
mod web;

pub const TARGET: &str = "cup";
const TARGET_START: (f64, f64) = (-0.6, -0.35);

#[derive(Debug, Clone, Serialize)]
pub struct ObjectView {
    pub id: String,
    pub role: &'static str,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub size: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateView {
    pub x: f64,
    pub y: f64,
    pub density: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanView {
    pub status: PlanStatus,
    pub chosen: Option<[f64; 2]>,
    pub candidates: Vec<CandidateView>,
    /// Where the fixed-offset rule puts the target, if it has one.
    pub baseline: Option<[f64; 2]>,
}

pub struct Playground {
    catalog: ObjectCatalog,
    workspace: Workspace,
    config: PlanConfig,
    scene: Scene,
    command: RelationCommand,
    model: RelationModel,
    clock: f64,
    plans: u64,
}

/// Reference layouts by number of references.
fn reference_layout(n: usize) -> &'static [(&'static str, f64, f64)] {
    match n {
        1 => &[("bowl", 0.0, 0.0)],
        2 => &[("bowl", -0.22, 0.0), ("jar", 0.22, 0.0)],
        _ => &[("bowl", -0.2, -0.12), ("jar", 0.2, -0.12), ("can", 0.0, 0.22)],
    }
}

fn resting(catalog: &ObjectCatalog, id: &str, x: f64, y: f64, surface: f64) -> Pose {
    let half = 0.5 * catalog.get(id).expect("object in default catalog").extents[2];
    Pose::at(x, y, surface + half)
}

impl Playground {
    pub fn new(relation: &str, seed: u64) -> Result<Self, String> {
        let symbol = standard_relations()
            .into_iter()
            .find(|s| s.id == relation)
            .ok_or_else(|| format!("unknown relation `{relation}`"))?;
        let catalog = default_catalog();
        let layout = reference_layout(reference_count(relation));
        let mut scene =
            Scene::new(0.0).with(TARGET, resting(&catalog, TARGET, TARGET_START.0, TARGET_START.1, TABLE_TOP));
        for (id, x, y) in layout {
            scene.insert(*id, resting(&catalog, id, *x, *y, TABLE_TOP));
        }
        scene.insert("box", resting(&catalog, "box", 0.6, 0.32, TABLE_TOP));
        let references = layout.iter().map(|(id, _, _)| id.to_string()).collect();
        let command = RelationCommand::new(symbol, TARGET, references).map_err(|e| e.to_string())?;
        Ok(Self {
            catalog,
            workspace: default_workspace(),
            config: PlanConfig::default().with_seed(seed),
            scene,
            model: RelationModel::new(relation),
            command,
            clock: 0.0,
            plans: 0,
        })
    }

    pub fn relation_ids() -> Vec<String> {
        standard_relations().into_iter().map(|s| s.id).collect()
    }

    pub fn bounds(&self) -> Aabb {
        self.workspace.bounds
    }

    pub fn demo_count(&self) -> u64 {
        self.model.demo_count()
    }

    pub fn objects(&self) -> Vec<ObjectView> {
        self.scene
            .ids()
            .map(|id| {
                let pose = self.scene.pose(id).expect("listed id");
                let role = if id == self.command.target {
                    "target"
                } else if self.command.references.iter().any(|r| r == id) {
                    "reference"
                } else {
                    "other"
                };
                ObjectView {
                    id: id.to_owned(),
                    role,
                    x: pose.position.x,
                    y: pose.position.y,
                    yaw: pose.yaw(),
                    size: self.catalog.get(id).expect("scene ids are in the catalog").extents,
                }
            })
            .collect()
    }

    /// Height of the highest surface under (x, y) that the target could stand on.
    fn surface_at(&self, x: f64, y: f64) -> f64 {
        self.scene
            .ids()
            .filter(|id| *id != self.command.target)
            .filter_map(|id| self.scene.aabb(&self.catalog, id).ok())
            .filter(|b| b.contains_xy(x, y))
            .map(|b| b.max.z)
            .fold(TABLE_TOP, f64::max)
    }

    /// Shows that the target belongs at (x, y) and updates the model.
    pub fn add_demo(&mut self, x: f64, y: f64) -> Result<u64, String> {
        if !self.workspace.bounds.contains_xy(x, y) {
            return Err("click on the table".into());
        }
        let mut before = self.scene.clone();
        before.timestamp = self.clock;
        let at = resting(&self.catalog, TARGET, x, y, self.surface_at(x, y));
        let mut after = before.clone().with(TARGET, at);
        after.timestamp = self.clock + 1.0;
        self.clock += 2.0;
        let demo = Demonstration { scene_before: before, command: self.command.clone(), scene_after: after };
        self.model.update_incremental(&demo, &self.catalog).map_err(|e| e.to_string())?;
        Ok(self.model.demo_count())
    }

    /// Model density over the table, row-major from the front-left corner,
    /// sliced at the height of the model mean. Empty without a model.
    pub fn heatmap(&self, width: usize, height: usize) -> Vec<f64> {
        let Some(theta) = self.model.theta() else { return Vec::new() };
        let Ok(frame) = build_relation_frame(&self.scene, &self.catalog, &self.command.references) else {
            return Vec::new();
        };
        let z = frame.from_cylindrical(&theta.mean()).z;
        density_grid(theta, &frame, &self.workspace.bounds, z, width, height)
    }

    /// Learned placement candidates next to the fixed-offset rule.
    pub fn plan(&mut self) -> Result<PlanView, String> {
        let config = self.config.with_seed(substream_seed(self.config.seed, "playground", &[self.plans]));
        self.plans += 1;
        let model = self.model.theta().map(|_| &self.model);
        let result = plan(&self.scene, &self.catalog, &self.command, model, &self.workspace, &config)
            .map_err(|e| e.to_string())?;
        let candidates = result
            .candidates
            .iter()
            .map(|c| CandidateView {
                x: c.position.x,
                y: c.position.y,
                density: c.density,
                feasible: c.verdict.feasible,
            })
            .collect();
        let baseline = baseline_place(&self.scene, &self.command).ok().map(|p| [p.x, p.y]);
        Ok(PlanView { status: result.status, chosen: result.chosen.map(|p| [p.x, p.y]), candidates, baseline })
    }

    pub fn reset(&mut self) {
        self.model = RelationModel::new(self.command.relation.id.clone());
        self.clock = 0.0;
        self.plans = 0;
    }
}

//! One live teaching session: commands in natural language, plans,
//! queries for help, scene edits by the human and the cue that turns the
//! edits into a demonstration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build_relation_frame, Aabb, GeometryError, ObjectCatalog, Pose, Scene, Vec3};
use crate::grounding::{verbalize_query, GroundingCatalog, GroundingError, QueryKind};
use crate::memory::{Memory, MemoryError};
use crate::planner::{density_grid, plan, PlanConfig, PlanResult, PlanStatus, Workspace};
use crate::relation::{standard_relations, Demonstration, RelationCommand};
use crate::seed::substream_seed;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("no model for relation `{0}`")]
    NoModel(String),
    #[error("no command to attach a demonstration to")]
    NoCommandContext,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Human,
    Robot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub clock: u64,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandStatus {
    Executed,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub status: CommandStatus,
    pub utterance: String,
    pub command: RelationCommand,
    pub plan: PlanResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueOutcome {
    pub utterance: String,
    pub relation: String,
    pub demo_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub relation: String,
    pub width: usize,
    pub height: usize,
    /// xy rectangle covered by the grid; z of both corners is the slice height.
    pub region: Aabb,
    /// Row-major, row 0 at `region.min.y`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState {
    pub clock: u64,
    pub scene: Scene,
    pub log: Vec<LogEntry>,
    pub demo_counts: BTreeMap<String, u64>,
    pub pending: bool,
    pub pending_command: Option<RelationCommand>,
}

/// A command together with the scene as it was when the command was given.
#[derive(Debug, Clone)]
struct CommandContext {
    command: RelationCommand,
    scene: Scene,
}

/// Static inputs of a session.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub catalog: ObjectCatalog,
    pub grounding: GroundingCatalog,
    pub workspace: Workspace,
    pub config: PlanConfig,
    pub scene: Scene,
}

#[derive(Debug)]
pub struct Session {
    setup: SessionSetup,
    scene: Scene,
    memory: Memory,
    clock: u64,
    pending: Option<CommandContext>,
    last_executed: Option<CommandContext>,
    log: Vec<LogEntry>,
    plans: u64,
}

fn fresh_memory(grounding: &GroundingCatalog) -> Memory {
    let mut symbols: BTreeMap<_, _> = standard_relations().into_iter().map(|s| (s.id.clone(), s)).collect();
    for s in grounding.relations() {
        symbols.entry(s.id.clone()).or_insert_with(|| s.clone());
    }
    Memory::new(symbols.into_values().map(|s| {
        let names = grounding.relation_phrase(&s.id).map(|p| vec![p.to_owned()]).unwrap_or_default();
        (s, names)
    }))
}

impl Session {
    pub fn new(setup: SessionSetup) -> Self {
        let memory = fresh_memory(&setup.grounding);
        let mut scene = setup.scene.clone();
        scene.timestamp = 0.0;
        Self { scene, memory, clock: 0, pending: None, last_executed: None, log: Vec::new(), plans: 0, setup }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn catalog(&self) -> &ObjectCatalog {
        &self.setup.catalog
    }

    fn tick(&mut self) {
        self.clock += 1;
        self.scene.timestamp = self.clock as f64;
    }

    fn say(&mut self, speaker: Speaker, text: impl Into<String>) {
        self.log.push(LogEntry { clock: self.clock, speaker, text: text.into() });
    }

    /// Grounds and plans `text`. On success the placement is applied to the
    /// scene; otherwise the robot asks for a demonstration.
    pub fn command(&mut self, text: &str) -> Result<CommandOutcome, SessionError> {
        let command = self.setup.grounding.ground(text, &self.scene)?;
        self.say(Speaker::Human, text);
        let snapshot = self.scene.clone();
        self.memory.record_command(self.clock as f64, &command)?;
        let config = self.setup.config.with_seed(substream_seed(self.setup.config.seed, "session", &[self.plans]));
        self.plans += 1;
        let model = self.memory.model(&command.relation.id);
        let result = plan(&self.scene, &self.setup.catalog, &command, model, &self.setup.workspace, &config)?;
        let context = CommandContext { command: command.clone(), scene: snapshot };
        let (status, utterance) = match (result.status, result.chosen) {
            (PlanStatus::Success, Some(at)) => {
                let pose = self.scene.pose_mut(&command.target)?;
                pose.position = at;
                self.tick();
                self.pending = None;
                self.last_executed = Some(context);
                (CommandStatus::Executed, "Okay.".to_owned())
            }
            (status, _) => {
                let kind =
                    if status == PlanStatus::NoModel { QueryKind::NoModel } else { QueryKind::InsufficientModel };
                self.pending = Some(context);
                (CommandStatus::Query, verbalize_query(kind, &command.relation))
            }
        };
        self.say(Speaker::Robot, utterance.clone());
        Ok(CommandOutcome { status, utterance, command, plan: result })
    }

    /// The human moves an object.
    pub fn move_object(&mut self, id: &str, pose: Pose) -> Result<(), SessionError> {
        if !self.scene.contains(id) {
            return Err(SessionError::UnknownObject(id.to_owned()));
        }
        self.scene.insert(id, pose);
        self.tick();
        Ok(())
    }

    /// The human signals that the scene now shows what the last command
    /// should have done. Works after a query and after an execution the
    /// human corrected; the command is consumed.
    pub fn cue(&mut self) -> Result<CueOutcome, SessionError> {
        let context =
            self.pending.take().or_else(|| self.last_executed.take()).ok_or(SessionError::NoCommandContext)?;
        self.tick();
        let demo =
            Demonstration { scene_before: context.scene, command: context.command, scene_after: self.scene.clone() };
        self.memory.learn(&demo, &self.setup.catalog)?;
        let relation = demo.command.relation;
        let utterance = verbalize_query(QueryKind::Thanks, &relation);
        self.say(Speaker::Robot, utterance.clone());
        Ok(CueOutcome { utterance, demo_count: self.memory.demo_count(&relation.id), relation: relation.id })
    }

    /// Model density over the workspace at the model's mean height, in the
    /// frame of the references of the latest command for `relation`.
    pub fn heatmap(&self, relation: &str, width: usize, height: usize) -> Result<Heatmap, SessionError> {
        let theta = self
            .memory
            .model(relation)
            .and_then(|m| m.theta())
            .ok_or_else(|| SessionError::NoModel(relation.to_owned()))?;
        let command = self
            .memory
            .commands()
            .all()
            .iter()
            .rev()
            .map(|c| &c.command)
            .find(|c| c.relation.id == relation && c.references.iter().all(|r| self.scene.contains(r)))
            .ok_or(SessionError::NoCommandContext)?;
        let frame = build_relation_frame(&self.scene, &self.setup.catalog, &command.references)?;
        let z = frame.from_cylindrical(&theta.mean()).z;
        let b = self.setup.workspace.bounds;
        let region = Aabb::new(Vec3::new(b.min.x, b.min.y, z), Vec3::new(b.max.x, b.max.y, z));
        let values = density_grid(theta, &frame, &region, z, width, height);
        Ok(Heatmap { relation: relation.to_owned(), width, height, region, values })
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            clock: self.clock,
            scene: self.scene.clone(),
            log: self.log.clone(),
            demo_counts: self
                .memory
                .relations()
                .iter()
                .map(|e| (e.symbol.id.clone(), self.memory.demo_count(&e.symbol.id)))
                .collect(),
            pending: self.pending.is_some(),
            pending_command: self.pending.as_ref().map(|c| c.command.clone()),
        }
    }

    /// Back to the initial scene with an empty memory.
    pub fn reset(&mut self) {
        *self = Self::new(self.setup.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic::{default_catalog, default_workspace, TABLE_TOP};

    fn session() -> Session {
        let catalog = default_catalog();
        let rest = |id: &str| TABLE_TOP + 0.5 * catalog.get(id).unwrap().extents[2];
        let scene = Scene::new(0.0)
            .with("cup", Pose::at(-0.4, -0.2, rest("cup")))
            .with("bowl", Pose::at(0.0, 0.0, rest("bowl")))
            .with("jar", Pose::at(0.4, 0.3, rest("jar")));
        Session::new(SessionSetup {
            grounding: GroundingCatalog::standard(&catalog),
            catalog,
            workspace: default_workspace(),
            config: PlanConfig::default(),
            scene,
        })
    }

    fn teach(s: &mut Session, at: Vec3) -> CueOutcome {
        let cup = *s.scene().pose("cup").unwrap();
        s.move_object("cup", Pose::new(at, cup.orientation)).unwrap();
        s.cue().unwrap()
    }

    #[test]
    fn query_then_teach_then_execute() {
        let mut s = session();
        let first = s.command("Put the cup to the right of the bowl.").unwrap();
        assert_eq!(first.status, CommandStatus::Query);
        assert_eq!(first.utterance, "I am sorry, I don't know what 'right' means yet, can you show me what to do?");
        assert!(s.state().pending);

        let z = s.scene().pose("cup").unwrap().position.z;
        let taught = teach(&mut s, Vec3::new(0.25, 0.0, z));
        assert_eq!(taught.demo_count, 1);
        assert!(taught.utterance.starts_with("Thanks"));
        assert!(!s.state().pending);

        // put the cup back and ask again
        let cup = *s.scene().pose("cup").unwrap();
        s.move_object("cup", Pose::new(Vec3::new(-0.4, -0.2, z), cup.orientation)).unwrap();
        let again = s.command("place the cup right of the bowl").unwrap();
        assert_eq!(again.status, CommandStatus::Executed);
        let at = s.scene().pose("cup").unwrap().position;
        assert!((at - Vec3::new(0.25, 0.0, z)).norm() < 0.03);
    }

    #[test]
    fn cue_needs_a_command() {
        let mut s = session();
        assert!(matches!(s.cue(), Err(SessionError::NoCommandContext)));
        s.command("put the cup near the jar").unwrap();
        s.cue().unwrap();
        assert!(matches!(s.cue(), Err(SessionError::NoCommandContext)));
    }

    #[test]
    fn correction_after_execution_updates_model() {
        let mut s = session();
        s.command("put the cup to the right of the bowl").unwrap();
        let z = s.scene().pose("cup").unwrap().position.z;
        teach(&mut s, Vec3::new(0.25, 0.0, z));
        let exec = s.command("put the cup to the right of the bowl").unwrap();
        assert_eq!(exec.status, CommandStatus::Executed);
        let corrected = teach(&mut s, Vec3::new(0.22, 0.05, z));
        assert_eq!(corrected.demo_count, 2);
    }

    #[test]
    fn grounding_errors_surface() {
        let mut s = session();
        let err = s.command("gibberish").unwrap_err();
        assert!(matches!(err, SessionError::Grounding(GroundingError::NoRelationMatch)));
        assert!(s.state().log.is_empty());
    }

    #[test]
    fn unknown_object_move() {
        let mut s = session();
        assert!(matches!(s.move_object("piano", Pose::at(0.0, 0.0, 0.0)), Err(SessionError::UnknownObject(_))));
        let before = s.state().clock;
        s.move_object("jar", Pose::at(0.1, 0.3, 0.76)).unwrap();
        assert_eq!(s.state().scene.pose("jar").unwrap().position, Vec3::new(0.1, 0.3, 0.76));
        assert_eq!(s.state().clock, before + 1);
    }

    #[test]
    fn heatmap_needs_model_and_peaks_near_mean() {
        let mut s = session();
        assert!(matches!(s.heatmap("right_of", 8, 5), Err(SessionError::NoModel(_))));
        s.command("put the cup to the right of the bowl").unwrap();
        let z = s.scene().pose("cup").unwrap().position.z;
        teach(&mut s, Vec3::new(0.25, 0.0, z));
        let h = s.heatmap("right_of", 160, 100).unwrap();
        assert_eq!(h.values.len(), 160 * 100);
        assert!(h.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn reset_forgets_everything() {
        let mut s = session();
        s.command("put the cup near the jar").unwrap();
        s.cue().unwrap();
        s.reset();
        let st = s.state();
        assert!(st.demo_counts.values().all(|c| *c == 0));
        assert!(st.log.is_empty());
        assert_eq!(st.clock, 0);
    }
}

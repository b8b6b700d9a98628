use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsRow;
use super::synthetic::{default_catalog, default_workspace, generate_synthetic_demos, ground_truth};
use super::HarnessError;
use crate::baselines::{baseline_plan, BaselineError};
use crate::geometry::{ObjectCatalog, Scene, Vec3};
use crate::memory::Memory;
use crate::planner::{plan, PlanConfig, PlanResult, PlanStatus, Workspace};
use crate::relation::{standard_relations, Demonstration, RelationCommand, RelationModel, RelationSymbol};
use crate::seed::{substream, substream_seed};

/// A scene and the command to carry out in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub scene: Scene,
    pub command: RelationCommand,
}

impl From<&Demonstration> for Task {
    fn from(d: &Demonstration) -> Self {
        Self { scene: d.scene_before.clone(), command: d.command.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Models learned from demonstrations given after failures.
    Learned,
    /// Fixed-offset rules, never updated.
    Baseline,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "learned" => Ok(Self::Learned),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!("unknown mode `{other}`, expected learned or baseline")),
        }
    }
}

/// Everything shared by all interactions of a run.
#[derive(Debug, Clone)]
pub struct Environment {
    pub catalog: ObjectCatalog,
    pub workspace: Workspace,
    pub config: PlanConfig,
}

impl Environment {
    pub fn synthetic() -> Self {
        Self { catalog: default_catalog(), workspace: default_workspace(), config: PlanConfig::default() }
    }

    fn plan(
        &self,
        mode: Mode,
        model: Option<&RelationModel>,
        task: &Task,
        seed: u64,
    ) -> Result<PlanResult, HarnessError> {
        let config = self.config.with_seed(seed);
        match mode {
            Mode::Learned => Ok(plan(&task.scene, &self.catalog, &task.command, model, &self.workspace, &config)?),
            Mode::Baseline => {
                match baseline_plan(&task.scene, &self.catalog, &task.command, &self.workspace, &config) {
                    Err(BaselineError::DegenerateDirection) => {
                        Ok(PlanResult { status: PlanStatus::NoFeasibleCandidate, chosen: None, candidates: Vec::new() })
                    }
                    other => Ok(other?),
                }
            }
        }
    }
}

/// One relation's demonstrations, each defining a task, and how often to
/// repeat the scenario.
#[derive(Debug, Clone)]
pub struct LearningScenario {
    pub relation: RelationSymbol,
    pub demonstrations: Vec<Demonstration>,
    pub repetitions: usize,
    pub seed: u64,
}

impl LearningScenario {
    pub fn new(demonstrations: Vec<Demonstration>, repetitions: usize, seed: u64) -> Result<Self, HarnessError> {
        let first = demonstrations.first().ok_or_else(|| HarnessError::InvalidScenario("no demonstrations".into()))?;
        let relation = first.command.relation.clone();
        for d in &demonstrations {
            d.validate()?;
            if d.command.relation.id != relation.id {
                return Err(HarnessError::InvalidScenario(format!(
                    "mixed relations `{}` and `{}`",
                    relation.id, d.command.relation.id
                )));
            }
        }
        Ok(Self { relation, demonstrations, repetitions, seed })
    }

    pub fn tasks(&self) -> Vec<Task> {
        self.demonstrations.iter().map(Task::from).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub status: PlanStatus,
    pub chosen: Option<Vec3>,
    pub demo_given: bool,
}

/// One command → plan → execute or demonstrate cycle. In learned mode a
/// failed plan is followed by `demo`, which is stored and folded into the
/// model; baseline mode never changes the memory's models.
pub fn run_interaction(
    memory: &mut Memory,
    env: &Environment,
    task: &Task,
    demo: &Demonstration,
    mode: Mode,
    seed: u64,
) -> Result<InteractionRecord, HarnessError> {
    memory.record_command(task.scene.timestamp, &task.command)?;
    let result = env.plan(mode, memory.model(&task.command.relation.id), task, seed)?;
    let demo_given = mode == Mode::Learned && !result.is_success();
    if demo_given {
        memory.learn(demo, &env.catalog)?;
    }
    Ok(InteractionRecord { status: result.status, chosen: result.chosen, demo_given })
}

/// Success of `model` on each task, each planned on its own pristine scene
/// with its own random substream of `seed`.
pub fn evaluate_model(
    model: Option<&RelationModel>,
    tasks: &[Task],
    env: &Environment,
    seed: u64,
) -> Result<Vec<bool>, HarnessError> {
    evaluate(Mode::Learned, model, tasks, env, seed)
}

pub fn evaluate(
    mode: Mode,
    model: Option<&RelationModel>,
    tasks: &[Task],
    env: &Environment,
    seed: u64,
) -> Result<Vec<bool>, HarnessError> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(env.plan(mode, model, t, substream_seed(seed, "task", &[i as u64]))?.is_success()))
        .collect()
}

fn ratio(bits: impl Iterator<Item = bool>) -> f64 {
    let (hits, n) = bits.fold((0usize, 0usize), |(h, n), b| (h + b as usize, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        hits as f64 / n as f64
    }
}

fn row(
    relation: &str,
    repetition: usize,
    interaction: usize,
    success: &[bool],
    seen: &[bool],
    demos: usize,
) -> MetricsRow {
    MetricsRow {
        relation: relation.to_owned(),
        repetition,
        interaction,
        seen_ratio: ratio(success.iter().zip(seen).filter(|(_, s)| **s).map(|(b, _)| *b)),
        unseen_ratio: ratio(success.iter().zip(seen).filter(|(_, s)| !**s).map(|(b, _)| *b)),
        all_ratio: ratio(success.iter().copied()),
        demos_received: demos,
    }
}

/// Runs every repetition of `scenario`: a fresh memory, a shuffled task
/// order, one evaluation before the first interaction and one after each.
pub fn run_learning_scenario(
    scenario: &LearningScenario,
    mode: Mode,
    env: &Environment,
) -> Result<Vec<MetricsRow>, HarnessError> {
    let rel = &scenario.relation;
    let tasks = scenario.tasks();
    let n = tasks.len();
    let mut rows = Vec::with_capacity(scenario.repetitions * (n + 1));
    for rep in 0..scenario.repetitions {
        let label = |what: &str| format!("{what}/{}", rel.id);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(scenario.seed, &label("shuffle"), &[rep as u64]));

        let mut memory = Memory::new([(rel.clone(), vec![rel.display_name.clone()])]);
        let mut seen = vec![false; n];
        let mut demos = 0;
        let eval_seed = |k: usize| substream_seed(scenario.seed, &label("eval"), &[rep as u64, k as u64]);

        let success = evaluate(mode, memory.model(&rel.id), &tasks, env, eval_seed(0))?;
        rows.push(row(&rel.id, rep, 0, &success, &seen, demos));
        for (k, &i) in order.iter().enumerate() {
            let k = k + 1;
            let seed = substream_seed(scenario.seed, &label("plan"), &[rep as u64, k as u64, i as u64]);
            let record = run_interaction(&mut memory, env, &tasks[i], &scenario.demonstrations[i], mode, seed)?;
            demos += record.demo_given as usize;
            seen[i] = true;
            let success = evaluate(mode, memory.model(&rel.id), &tasks, env, eval_seed(k))?;
            rows.push(row(&rel.id, rep, k, &success, &seen, demos));
        }
    }
    Ok(rows)
}

pub fn read_demos_jsonl(path: impl AsRef<Path>) -> Result<Vec<Demonstration>, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let d: Demonstration =
                serde_json::from_str(l).map_err(|e| HarnessError::io(path, format!("line {}: {e}", i + 1)))?;
            d.validate()?;
            Ok(d)
        })
        .collect()
}

pub fn write_demos_jsonl(path: impl AsRef<Path>, demos: &[Demonstration]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut text = String::new();
    for d in demos {
        text.push_str(&serde_json::to_string(d).expect("serializable"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn default_tasks() -> usize {
    10
}

fn default_repetitions() -> usize {
    10
}

fn default_clutter() -> usize {
    3
}

/// Run description read by the command line tool. Relations without a demo
/// file get synthetic demonstrations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    /// Relation ids to run; all standard relations when empty.
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default = "default_tasks")]
    pub tasks: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_clutter")]
    pub clutter: usize,
    /// Demonstration JSONL file per relation id.
    #[serde(default)]
    pub demos: BTreeMap<String, PathBuf>,
    pub catalog: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    #[serde(default)]
    pub plan: PlanConfig,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            relations: Vec::new(),
            tasks: default_tasks(),
            repetitions: default_repetitions(),
            clutter: default_clutter(),
            demos: BTreeMap::new(),
            catalog: None,
            workspace: None,
            plan: PlanConfig::default(),
        }
    }
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut file: Self = serde_json::from_str(&text).map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        file.demos.values_mut().for_each(resolve);
        file.catalog.iter_mut().for_each(resolve);
        file.workspace.iter_mut().for_each(resolve);
        Ok(file)
    }

    pub fn environment(&self) -> Result<Environment, HarnessError> {
        let catalog = match &self.catalog {
            Some(p) => ObjectCatalog::load(p)?,
            None => default_catalog(),
        };
        let workspace = match &self.workspace {
            Some(p) => Workspace::load(p)?,
            None => default_workspace(),
        };
        Ok(Environment { catalog, workspace, config: self.plan })
    }

    /// One scenario per relation, seeded from `seed`.
    pub fn scenarios(&self, env: &Environment, seed: u64) -> Result<Vec<LearningScenario>, HarnessError> {
        let standard = standard_relations();
        let ids: Vec<String> = if self.relations.is_empty() {
            standard.iter().map(|s| s.id.clone()).collect()
        } else {
            self.relations.clone()
        };
        ids.iter()
            .map(|id| {
                let demos = match self.demos.get(id) {
                    Some(path) => read_demos_jsonl(path)?,
                    None => {
                        let symbol = standard
                            .iter()
                            .find(|s| &s.id == id)
                            .ok_or_else(|| HarnessError::InvalidScenario(format!("no demos for `{id}`")))?;
                        let truth = ground_truth(id).expect("standard relations have a ground truth");
                        generate_synthetic_demos(
                            &truth,
                            symbol,
                            &env.catalog,
                            &env.workspace,
                            self.tasks,
                            self.clutter,
                            seed,
                        )?
                    }
                };
                LearningScenario::new(demos, self.repetitions, seed)
            })
            .collect()
    }
}

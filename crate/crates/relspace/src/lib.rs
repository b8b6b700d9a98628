//! Command line runs of the learning harness and the teaching service.

pub mod service;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use relspace_core::geometry::{ObjectCatalog, Pose, Scene};
use relspace_core::grounding::GroundingCatalog;
use relspace_core::harness::synthetic::{
    default_catalog, default_workspace, generate_synthetic_demos, ground_truth, TABLE_TOP,
};
use relspace_core::harness::{
    aggregate, read_metrics_csv, render_svg, run_learning_scenario, write_demos_jsonl, write_metrics_csv, MetricsRow,
    Mode, ScenarioFile,
};
use relspace_core::planner::{PlanConfig, Workspace};
use relspace_core::relation::standard_relations;
use relspace_core::session::SessionSetup;

/// Five objects on the default table.
pub fn demo_scene(catalog: &ObjectCatalog) -> Result<Scene> {
    let mut scene = Scene::new(0.0);
    for (id, x, y) in
        [("cup", -0.5, -0.2), ("bowl", 0.0, 0.0), ("jar", 0.45, 0.25), ("box", -0.3, 0.3), ("can", 0.3, -0.3)]
    {
        let half = 0.5 * catalog.get(id).with_context(|| format!("`{id}` missing from catalog"))?.extents[2];
        scene.insert(id, Pose::at(x, y, TABLE_TOP + half));
    }
    Ok(scene)
}

/// Session inputs from optional files, falling back to the built-in table.
pub fn session_setup(
    scene: Option<&Path>,
    catalog: Option<&Path>,
    workspace: Option<&Path>,
    seed: u64,
) -> Result<SessionSetup> {
    let catalog = match catalog {
        Some(p) => ObjectCatalog::load(p)?,
        None => default_catalog(),
    };
    let workspace = match workspace {
        Some(p) => Workspace::load(p)?,
        None => default_workspace(),
    };
    let scene = match scene {
        Some(p) => Scene::load(p)?,
        None => demo_scene(&catalog)?,
    };
    for id in scene.ids() {
        if !catalog.contains(id) {
            bail!("scene object `{id}` is not in the catalog");
        }
    }
    Ok(SessionSetup {
        grounding: GroundingCatalog::standard(&catalog),
        catalog,
        workspace,
        config: PlanConfig::default().with_seed(seed),
        scene,
    })
}

pub struct RunSummary {
    pub mode: Mode,
    pub metrics: PathBuf,
    pub rows: Vec<MetricsRow>,
}

/// Runs every scenario of `scenario` in each of `modes`, writing one metrics
/// CSV per mode and a plot into `out`.
pub fn run(scenario: &ScenarioFile, modes: &[Mode], seed: u64, out: &Path) -> Result<Vec<RunSummary>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let env = scenario.environment()?;
    let scenarios = scenario.scenarios(&env, seed)?;
    let mut summaries = Vec::new();
    for &mode in modes {
        let mut rows = Vec::new();
        for s in &scenarios {
            rows.extend(run_learning_scenario(s, mode, &env)?);
        }
        let metrics = out.join(format!("metrics_{}.csv", mode_name(mode)));
        write_metrics_csv(&metrics, &rows)?;
        summaries.push(RunSummary { mode, metrics, rows });
    }
    let learned = summaries.iter().find(|s| s.mode == Mode::Learned).map(|s| aggregate(&s.rows));
    let baseline = summaries.iter().find(|s| s.mode == Mode::Baseline).map(|s| aggregate(&s.rows));
    if let Some(learned) = &learned {
        fs::write(out.join("plot.svg"), render_svg(learned, baseline.as_deref(), "Task success per interaction"))?;
    }
    Ok(summaries)
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Learned => "learned",
        Mode::Baseline => "baseline",
    }
}

/// Writes the built-in catalog, workspace and scene as editable JSON files.
pub fn init(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let catalog = default_catalog();
    let files = [
        ("catalog.json", catalog.to_json()),
        ("workspace.json", default_workspace().to_json()),
        ("scene.json", serde_json::to_string_pretty(&demo_scene(&catalog)?)?),
    ];
    files
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            Ok(path)
        })
        .collect()
}

/// Synthetic demonstrations of one standard relation as JSONL.
pub fn gen_demos(relation: &str, count: usize, clutter: usize, seed: u64, out: &Path) -> Result<usize> {
    let symbol = standard_relations()
        .into_iter()
        .find(|s| s.id == relation)
        .with_context(|| format!("unknown relation `{relation}`"))?;
    let truth = ground_truth(relation).with_context(|| format!("no synthetic model for `{relation}`"))?;
    let demos =
        generate_synthetic_demos(&truth, &symbol, &default_catalog(), &default_workspace(), count, clutter, seed)?;
    write_demos_jsonl(out, &demos)?;
    Ok(demos.len())
}

/// Plot from metrics CSVs written by [`run`].
pub fn plot(learned: &Path, baseline: Option<&Path>, title: &str, out: &Path) -> Result<()> {
    let learned = aggregate(&read_metrics_csv(learned)?);
    let baseline = baseline.map(read_metrics_csv).transpose()?.map(|rows| aggregate(&rows));
    fs::write(out, render_svg(&learned, baseline.as_deref(), title))
        .with_context(|| format!("writing {}", out.display()))
}

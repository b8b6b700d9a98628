use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use relspace::{gen_demos, init, mode_name, plot, run, service, session_setup};
use relspace_core::harness::{aggregate, Mode, ScenarioFile};
use relspace_core::session::Session;

#[derive(Parser)]
#[command(name = "relspace", version, about = "Learn spatial relations from demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Learned,
    Baseline,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run learning scenarios and write metrics CSVs and a plot.
    Run {
        /// Scenario description; synthetic defaults when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write synthetic demonstrations of one relation as JSONL.
    GenDemos {
        #[arg(long)]
        relation: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        clutter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an SVG plot from metrics CSVs.
    Plot {
        #[arg(long)]
        learned: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value = "Task success per interaction")]
        title: String,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Write the built-in catalog, workspace and scene to a directory.
    Init {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
    /// Serve a teaching session over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        workspace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, mode, seed, out } => {
            let scenario = match scenario {
                Some(p) => ScenarioFile::load(&p)?,
                None => ScenarioFile::default(),
            };
            let modes: &[Mode] = match mode {
                ModeArg::Learned => &[Mode::Learned],
                ModeArg::Baseline => &[Mode::Baseline],
                ModeArg::Both => &[Mode::Learned, Mode::Baseline],
            };
            for s in run(&scenario, modes, seed, &out)? {
                let last = aggregate(&s.rows).pop().context("no interactions")?;
                println!(
                    "{:<8} final all-task success {:.3} ± {:.3}, demonstrations {:.2}  ({})",
                    mode_name(s.mode),
                    last.all.mean,
                    last.all.std,
                    last.demos.mean,
                    s.metrics.display()
                );
            }
        }
        Command::GenDemos { relation, count, clutter, seed, out } => {
            let n = gen_demos(&relation, count, clutter, seed, &out)?;
            println!("wrote {n} demonstrations to {}", out.display());
        }
        Command::Plot { learned, baseline, title, out } => {
            plot(&learned, baseline.as_deref(), &title, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Init { dir } => {
            for path in init(&dir)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Serve { addr, scene, catalog, workspace, seed } => {
            let setup = session_setup(scene.as_deref(), catalog.as_deref(), workspace.as_deref(), seed)?;
            let app = service::router(Session::new(setup));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                println!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

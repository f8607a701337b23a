use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use reflective_core::analysis::{render_table, report_tables, TABLE_NAMES};
use reflective_core::argumentation::DialogueType;
use reflective_core::generation::CreativityLevel;
use reflective_core::user_model::compact_user_model;
use reflective_service::config::ServiceConfig;
use reflective_service::http::StoryView;
use reflective_service::build_engine;

#[derive(Parser)]
#[command(name = "reflective", version, about = "Persona-grounded reflective stories with self-inspection")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "REFLECTIVE_CONFIG")]
    config: Option<PathBuf>,
    /// SQLite database path (overrides the config file).
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    /// Use the deterministic offline model instead of the HTTP endpoint.
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Persona operations.
    Personas {
        #[command(subcommand)]
        action: PersonaAction,
    },
    /// Generate one story and reflect on it.
    Generate {
        #[arg(long)]
        persona: String,
        #[arg(long = "type")]
        dialogue_type: DialogueType,
        #[arg(long)]
        creativity: CreativityLevel,
        #[arg(long)]
        prompt: Option<String>,
        /// Store the story with a pending reflection.
        #[arg(long)]
        no_reflect: bool,
    },
    /// Generate the story matrix (4 prompts x 2 creativity levels per persona).
    BatchGenerate {
        /// Restrict to these persona ids; all personas when omitted.
        #[arg(long = "persona")]
        personas: Vec<String>,
        /// Reflect on the new stories right away.
        #[arg(long)]
        reflect: bool,
    },
    /// Run reflections.
    Reflect {
        #[arg(long, conflicts_with = "pending", required_unless_present = "pending")]
        story: Option<String>,
        /// Every story without a finished reflection.
        #[arg(long)]
        pending: bool,
    },
    /// Export one row per (story, evaluation) as CSV.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print or write the aggregate report tables.
    Report {
        /// A single table; all tables when omitted.
        table: Option<String>,
        /// Directory to write `<table>.csv` files and `report.json` into.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Permutation iterations for the Spearman p-value.
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Subcommand)]
enum PersonaAction {
    List,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(db) = cli.db {
        config.db_path = db;
    }
    if cli.mock {
        config.llm.mock = true;
    }
    if let Command::Report { permutations: Some(n), .. } = &cli.command {
        config.analysis.permutation_iterations = *n;
    }
    if let Command::Serve { bind: Some(b) } = &cli.command {
        config.bind = b.clone();
    }
    let engine = build_engine(&config).context("starting engine")?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    match cli.command {
        Command::Personas { action: PersonaAction::List } => {
            for p in engine.personas() {
                writeln!(out, "{} ({}): {} activities", p.id, p.label, p.activities.len())?;
                writeln!(out, "{}", compact_user_model(p))?;
            }
        }
        Command::Generate { persona, dialogue_type, creativity, prompt, no_reflect } => {
            let record = engine.request_story(&persona, dialogue_type, creativity, prompt.as_deref())?;
            writeln!(out, "{}", serde_json::to_string_pretty(&StoryView::from(&record))?)?;
            if !no_reflect {
                let status = engine.reflect_story(record.id())?;
                writeln!(out, "reflection {}: {}", record.id(), status.as_str())?;
            }
        }
        Command::BatchGenerate { personas, reflect } => {
            let report = engine.batch_generate(&personas)?;
            writeln!(out, "generated {} stories, {} failed cells", report.story_ids.len(), report.failures.len())?;
            for f in &report.failures {
                writeln!(out, "  failed: {} / {} / {}: {}", f.persona_id, f.prompt_id, f.creativity, f.error)?;
            }
            if reflect {
                let summary = engine.reflect_many(report.story_ids)?;
                writeln!(out, "reflections: {} done, {} failed", summary.done, summary.failed)?;
            }
        }
        Command::Reflect { story, pending } => {
            if pending {
                let summary = engine.reflect_pending()?;
                writeln!(out, "reflections: {} done, {} failed", summary.done, summary.failed)?;
            } else if let Some(id) = story {
                let status = engine.reflect_story(&id)?;
                writeln!(out, "reflection {id}: {}", status.as_str())?;
            }
        }
        Command::Export { out: path } => {
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let rows = engine.store().export_dataset(file)?;
            writeln!(out, "wrote {rows} rows to {}", path.display())?;
        }
        Command::Report { table, out: dir, .. } => {
            let report = engine.report()?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            let tables: Vec<(&str, String)> = match &table {
                Some(name) => match render_table(&report, name) {
                    Some(body) => vec![(TABLE_NAMES.iter().find(|n| *n == name).copied().unwrap_or("table"), body)],
                    None => bail!("unknown table '{name}'; expected one of {}", TABLE_NAMES.join(", ")),
                },
                None => report_tables(&report),
            };
            match dir {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    for (name, body) in &tables {
                        fs::write(dir.join(format!("{name}.csv")), body)?;
                    }
                    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
                    writeln!(out, "wrote {} tables to {}", tables.len(), dir.display())?;
                }
                None => {
                    for (name, body) in &tables {
                        writeln!(out, "# {name}\n{body}")?;
                    }
                }
            }
        }
        Command::Serve { .. } => {
            drop(out);
            serve(Arc::new(engine), &config.bind)?;
        }
    }
    Ok(())
}

fn serve(engine: Arc<reflective_service::engine::Engine>, bind: &str) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        log::info!("listening on {bind}");
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, reflective_service::http::router(engine)).await?;
        Ok(())
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gifs_cli::pipeline::{available_stages, resolve_out_dir};
use gifs_cli::{parse_config, parse_stages, run_pipeline, PipelineError, Stage};

/// Turn a finite-type self-similar IFS into a non-overlapping graph-directed system.
#[derive(Parser)]
#[command(name = "gifs", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Neighbor graph.
    Nbr(Common),
    /// Neighbor and overlap graphs.
    Overlap(Common),
    /// Raw GIFS equations.
    Gifs(Common),
    /// Reduced GIFS.
    Reduce(Common),
    /// Incidence matrix, characteristic polynomial and dimension.
    Dim(Common),
    /// SVG and point-cloud output.
    Render(Common),
    /// Every stage the input supports, or those given by --stages.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to $GIFS_OUT_DIR, then ./gifs-out.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated stage list, e.g. nbr,overlap,gifs.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    max_vertices: Option<usize>,
    /// Expansion depth for rendering.
    #[arg(long)]
    depth: Option<usize>,
    /// Reverse the map numbering before any stage.
    #[arg(long)]
    reverse_order: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (last, common) = match cli.verb {
        Verb::Nbr(c) => (Some(Stage::Nbr), c),
        Verb::Overlap(c) => (Some(Stage::Overlap), c),
        Verb::Gifs(c) => (Some(Stage::Gifs), c),
        Verb::Reduce(c) => (Some(Stage::Reduce), c),
        Verb::Dim(c) => (Some(Stage::Dim), c),
        Verb::Render(c) => (Some(Stage::Render), c),
        Verb::Pipeline(c) => (None, c),
    };
    match run(last, &common) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gifs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(last: Option<Stage>, c: &Common) -> Result<String, PipelineError> {
    let mut cfg = parse_config(&c.config)?;
    if let Some(n) = c.max_vertices {
        cfg.options.max_vertices = n;
    }
    if let Some(d) = c.depth {
        cfg.options.depth = d;
    }
    if c.reverse_order {
        cfg.apply_ordering(None, true)?;
    }
    let avail = available_stages(&cfg.input);
    if let Some(last) = last.filter(|l| !avail.contains(l)) {
        return Err(gifs_cli::ConfigError {
            violations: vec![format!("{last} is not available for {} input", cfg.input.kind())],
        }
        .into());
    }
    let stages = match (&c.stages, last) {
        (Some(list), _) => parse_stages(list).map_err(|e| gifs_cli::ConfigError { violations: vec![e] })?,
        (None, Some(last)) => avail.into_iter().filter(|s| *s <= last).collect(),
        (None, None) => avail,
    };
    let out_dir = resolve_out_dir(c.out_dir.as_deref(), &cfg);
    let outcome = run_pipeline(&cfg, &stages, &out_dir)?;
    Ok(serde_json::to_string_pretty(&outcome.summary).expect("serializable"))
}

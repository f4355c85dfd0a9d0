use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Format;

/// Explore legislative-organizational graphs.
#[derive(Debug, Parser)]
#[command(name = "legiscout", version)]
pub struct Cli {
    /// TOML config file; falls back to $LEGISCOUT_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output style for reports.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Drop unknown fields with a warning instead of rejecting them.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a bundle and list every violation.
    Validate { bundle: PathBuf },
    /// Run the force layout to convergence and write a snapshot.
    Layout(LayoutArgs),
    /// Chunk and embed a bundle's corpus into an index file.
    Index(IndexArgs),
    /// Query an index file.
    Search(SearchArgs),
    /// Recover a graph from a chart image.
    Extract(ExtractArgs),
    /// Serve a bundle over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    pub bundle: PathBuf,
    /// Placement seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ideal edge length.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<u32>,
    #[arg(long)]
    pub cooling_factor: Option<f64>,
    /// Approximate repulsion with a quadtree.
    #[arg(long)]
    pub barnes_hut: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    pub bundle: PathBuf,
    /// `hash-ngram-v1` or the URL of an embedding service.
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub overlap_tokens: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub index: PathBuf,
    #[arg(short, long)]
    pub query: String,
    /// Number of hits.
    #[arg(short)]
    pub k: Option<usize>,
    #[arg(long)]
    pub embedder: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub image: PathBuf,
    /// JSON map of label to box index.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u8>,
    #[arg(long)]
    pub min_size: Option<u32>,
    #[arg(long)]
    pub attach_radius: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Report path; defaults to `<output stem>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    /// 0 asks the OS for a free port.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

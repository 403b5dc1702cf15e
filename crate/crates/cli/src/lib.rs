//! Command line and HTTP front end for the `featurekit` library.
pub mod commands;
pub mod server;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use featurekit::Execution;

#[derive(Debug, Parser)]
#[command(name = "featurekit", version, about = "Feature annotation, location and variant extraction for Java projects")]
pub struct Cli {
    /// Project root (holds featuremodel.afm).
    #[arg(short = 'C', long, global = true, default_value = ".")]
    pub project: PathBuf,
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the feature model and report its size and configuration count.
    CheckModel {
        /// Also validate this configuration (JSON object feature → bool).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Suggest feature names from description.txt and code identifiers.
    Recommend {
        #[arg(short, long, default_value_t = 10)]
        top: usize,
        /// Description text to use instead of description.txt.
        #[arg(long)]
        description: Option<PathBuf>,
        /// Extra lexicon entries (`word<TAB>tag` lines).
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Annotate traced methods (traces/<feature>.<scenario>.trace.csv).
    Seed {
        /// Trace files; all files under traces/ when omitted.
        traces: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Spread feature labels to neighbouring declarations.
    Propagate {
        #[command(flatten)]
        params: ParamArgs,
        /// Report only; leave .color files untouched.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        json: bool,
    },
    /// Detect requires / mutual exclusion interactions.
    Interactions {
        /// Write the suggestions JSON here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Add the constraint of this suggestion to the model.
        #[arg(long = "accept", value_name = "ID")]
        accept: Vec<String>,
        /// Add every constraint the model does not already imply.
        #[arg(long, conflicts_with = "accept")]
        accept_all: bool,
    },
    /// Annotate (or un-annotate) the nodes of a byte range.
    Annotate {
        /// Source path relative to the project root.
        #[arg(long)]
        file: String,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        end: usize,
        #[arg(long)]
        feature: String,
        /// Remove the feature from the nodes with exactly this span instead.
        #[arg(long)]
        remove: bool,
    },
    /// Write a static HTML view of all annotated sources.
    View {
        #[arg(short, long, default_value = "featurekit-view.html")]
        out: PathBuf,
    },
    /// Extract the variant for a configuration.
    Extract {
        /// JSON object feature → bool covering every feature.
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long, required_unless_present = "dry_run")]
        out: Option<PathBuf>,
        /// Print the plan without writing anything.
        #[arg(long, conflicts_with = "out")]
        dry_run: bool,
    },
    /// Show feature colors; `--write` completes color.json.
    Colors {
        #[arg(long)]
        write: bool,
    },
    /// Export sources with //#ifdef markers.
    ExportIfdef {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    #[arg(long, default_value_t = 2)]
    pub min_neighbors: usize,
    #[arg(long, default_value_t = 20)]
    pub max_rounds: usize,
}

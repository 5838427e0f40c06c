use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "blockgraph", version, about = "Out-of-core block-centric graph engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print tables instead of JSON.
    #[arg(long, global = true)]
    pub human: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an on-disk graph image from an edge list.
    Preprocess(PreprocessArgs),
    /// Run an algorithm over an image.
    Run(RunArgs),
    /// Replay a block access trace under OPT, LRU and SUB.
    SimulateCache(SimulateArgs),
    /// Describe an image or an access trace.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Detect from the file's first bytes.
    Auto,
    Text,
    Binary,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Edge list: text `u v` lines or the binary ACGE format.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output image directory.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Add the reverse of every edge.
    #[arg(long)]
    pub symmetrize: bool,
    /// Vertices with degree at most this stay in memory (0..=3).
    #[arg(long, default_value_t = 2)]
    pub degree_threshold: u32,
    /// Open blocks considered when placing a list.
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Partition contiguous vertex chunks independently.
    #[arg(long)]
    pub partition_threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Bfs,
    Wcc,
    Kcore,
    Ppr,
    Pr,
    Mis,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bfs => "bfs",
            Algorithm::Wcc => "wcc",
            Algorithm::Kcore => "kcore",
            Algorithm::Ppr => "ppr",
            Algorithm::Pr => "pr",
            Algorithm::Mis => "mis",
        }
    }

    pub fn needs_source(self) -> bool {
        matches!(self, Algorithm::Bfs | Algorithm::Ppr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Async,
    Sync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// `id value` per line.
    Text,
    /// Little-endian array indexed by dense vertex id.
    Binary,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub algorithm: Algorithm,
    /// Image directory written by `preprocess`.
    #[arg(long)]
    pub image: PathBuf,
    /// Source vertex as given in the input edge list; repeat for several runs.
    #[arg(long = "source")]
    pub sources: Vec<u64>,
    /// Pick this many sources at random among vertices with out-edges.
    #[arg(long, conflicts_with = "sources")]
    pub random_sources: Option<usize>,
    /// Seeds random sources and MIS labels.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub k: u32,
    #[arg(long, default_value_t = 0.15)]
    pub alpha: f64,
    /// Defaults to 1e-9 for ppr and 1e-10 for pr.
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long, env = "ACG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, env = "ACG_BUFFER_MB", default_value_t = 256.0)]
    pub buffer_mb: f64,
    #[arg(long, value_enum, default_value_t = Mode::Async)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Order::Min)]
    pub order: Order,
    /// Evict a block after this many consecutive reuses; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub early_stop: u32,
    /// Bypass the page cache where the platform allows it.
    #[arg(long)]
    pub direct_io: bool,
    /// Write results here instead of into the report.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output_format: OutputFormat,
    /// Record the block access trace (synchronous mode only).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write block state transitions as JSON lines.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Opt,
    Lru,
    Sub,
    All,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Trace written by `run --trace-out`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::All)]
    pub policy: PolicyArg,
    /// Cache capacity in blocks; repeatable.
    #[arg(long = "capacity")]
    pub capacities: Vec<usize>,
    /// `a,b,c` or `start:end[:step]`, inclusive.
    #[arg(long)]
    pub capacity_sweep: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct StatsArgs {
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Parses a capacity list: `4,8,16` or `1:64` or `1:64:4`.
pub fn parse_sweep(list: &str) -> Result<Vec<usize>, String> {
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("bad capacity {s:?}"));
    if list.contains(':') {
        let parts: Vec<&str> = list.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(format!("bad range {list:?}")),
        };
        if step == 0 || start > end {
            return Err(format!("empty range {list:?}"));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        list.split(',').map(num).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_specs() {
        assert_eq!(parse_sweep("1,4,9").unwrap(), vec![1, 4, 9]);
        assert_eq!(parse_sweep("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_sweep("1:10:4").unwrap(), vec![1, 5, 9]);
        assert!(parse_sweep("5:1").is_err());
        assert!(parse_sweep("1:2:0").is_err());
        assert!(parse_sweep("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

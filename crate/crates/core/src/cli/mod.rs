//! Command-line frontend.

mod bench;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::annotations::{load_registry, FormatError, Registry};
use crate::shell_ast::SyntaxError;
use crate::translate::{compile_script, CompileMode, CompileOptions, Compiled, EmitOptions};

pub use bench::{bench, BenchConfig, BenchError, BenchRecord, BenchReport};

#[derive(Debug, Parser)]
#[command(name = "odfc", version, about = "Parallelizes the pipelines of a shell script")]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    compile: CliConfig,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Time a suite of scripts under every mode and check their outputs.
    Bench(BenchArgs),
}

/// Flags of the compile command.
#[derive(Debug, Clone, Args)]
pub struct CliConfig {
    /// Script to compile.
    #[arg(required = true)]
    pub script: Option<PathBuf>,
    /// Where to write the compiled script; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Number of parallel copies per stage.
    #[arg(short, long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    pub width: u32,
    /// baseline, translate-only, no-cat-split or parallel.
    #[arg(short, long, default_value = "parallel")]
    pub mode: CompileMode,
    /// Extra command annotations, read on top of the built-in ones.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Execute the compiled script with `sh` and exit with its status.
    #[arg(long)]
    pub run: bool,
    /// Print the dataflow graph of every region to stderr.
    #[arg(long)]
    pub dump_ir: bool,
    /// Directory in which the compiled script creates its FIFOs.
    #[arg(long)]
    pub temp_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory holding one subdirectory per benchmark.
    suite: PathBuf,
    /// Widths to compile at.
    #[arg(short, long, value_delimiter = ',', default_value = "2,4,16")]
    widths: Vec<usize>,
    /// Timed runs per configuration; the fastest is reported.
    #[arg(short, long, default_value_t = 1)]
    repetitions: usize,
    /// Value of ODFC_SCALE passed to the input generators.
    #[arg(long, default_value_t = 10_000)]
    scale: usize,
    /// File receiving one JSON record per measurement.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Syntax { path: PathBuf, source: SyntaxError },
    #[error("annotations: {0}")]
    Annotations(#[from] FormatError),
    #[error("cannot run sh: {0}")]
    Spawn(std::io::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn registry(path: Option<&Path>) -> Result<Registry, CliError> {
    Ok(match path {
        Some(p) => load_registry(p)?,
        None => Registry::builtin(),
    })
}

impl CliConfig {
    pub fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            mode: self.mode,
            width: self.width as usize,
            emit: EmitOptions {
                temp_dir: self.temp_dir.as_ref().map(|d| d.display().to_string()),
            },
        }
    }
}

fn dump(compiled: &Compiled) {
    for (i, f) in compiled.fragments.iter().enumerate() {
        eprintln!("# region {}: {}", i + 1, f.source);
        eprint!("{}", f.translated);
        if f.parallelized > 0 {
            eprintln!("# optimized, {} stage(s) parallelized", f.parallelized);
            eprint!("{}", f.optimized);
        }
        if let Some(n) = &f.note {
            eprintln!("# {n}");
        }
    }
}

/// Compiles the script named by `cfg`; returns the exit code.
pub fn compile_command(cfg: &CliConfig) -> Result<i32, CliError> {
    let path = cfg.script.as_deref().expect("required by the parser");
    let src = std::fs::read_to_string(path).map_err(io_err(path))?;
    let registry = registry(cfg.annotations.as_deref())?;
    let compiled = compile_script(&src, &registry, &cfg.compile_options()).map_err(|source| CliError::Syntax {
        path: path.to_path_buf(),
        source,
    })?;
    if cfg.dump_ir {
        dump(&compiled);
    }
    if !compiled.changed() && cfg.mode != CompileMode::Baseline {
        eprintln!("odfc: no parallelizable region, script left unchanged");
    }
    if let Some(out) = &cfg.output {
        std::fs::write(out, &compiled.script).map_err(io_err(out))?;
    }
    if !cfg.run {
        if cfg.output.is_none() {
            std::io::stdout()
                .write_all(compiled.script.as_bytes())
                .map_err(io_err(Path::new("<stdout>")))?;
        }
        return Ok(0);
    }
    let status = Command::new("sh")
        .arg("-c")
        .arg(&compiled.script)
        .arg(path)
        .status()
        .map_err(CliError::Spawn)?;
    Ok(status.code().unwrap_or(1))
}

fn bench_command(args: &BenchArgs) -> Result<i32, CliError> {
    let cfg = BenchConfig {
        widths: args.widths.clone(),
        repetitions: args.repetitions.max(1),
        scale: args.scale,
        registry: registry(args.annotations.as_deref())?,
    };
    let report = bench(&args.suite, &cfg)?;
    print!("{}", report.table());
    if let Some(path) = &args.records {
        std::fs::write(path, report.jsonl()).map_err(io_err(path))?;
    }
    Ok(if report.all_ok() { 0 } else { 1 })
}

/// Entry point of the `odfc` binary; `argv` includes the program name.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Some(Sub::Bench(args)) => bench_command(args),
        None => compile_command(&cli.compile),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("odfc: {e}");
            1
        }
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::annotations::Registry;
use crate::shell_ast::SyntaxError;
use crate::translate::{compile_script, CompileMode, CompileOptions};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub widths: Vec<usize>,
    pub repetitions: usize,
    /// Passed to every generator as `ODFC_SCALE`.
    pub scale: usize,
    pub registry: Registry,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            widths: vec![2, 4, 16],
            repetitions: 1,
            scale: 10_000,
            registry: Registry::builtin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub script: String,
    pub mode: String,
    pub width: usize,
    pub seconds: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}: missing script.sh or gen.sh")]
    Incomplete(PathBuf),
    #[error("{name}: input generator failed: {stderr}")]
    Generator { name: String, stderr: String },
    #[error("{name}: {source}")]
    Syntax { name: String, source: SyntaxError },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything a run leaves behind: status, stdout and the files it wrote.
#[derive(Debug, PartialEq, Eq)]
struct Outcome {
    status: Option<i32>,
    stdout: Vec<u8>,
    files: BTreeMap<String, Vec<u8>>,
}

struct Entry {
    name: String,
    script: String,
    data: tempfile::TempDir,
    expected: Option<Vec<u8>>,
}

fn prepare(dir: &Path, cfg: &BenchConfig) -> Result<Entry, BenchError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (script, gen) = (dir.join("script.sh"), dir.join("gen.sh"));
    if !script.is_file() || !gen.is_file() {
        return Err(BenchError::Incomplete(dir.to_path_buf()));
    }
    let data = tempfile::tempdir().map_err(io(dir))?;
    let gen = gen.canonicalize().map_err(io(&gen))?;
    let out = Command::new("sh")
        .arg(&gen)
        .current_dir(data.path())
        .env("ODFC_SCALE", cfg.scale.to_string())
        .output()
        .map_err(io(&gen))?;
    if !out.status.success() {
        return Err(BenchError::Generator {
            name,
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        });
    }
    let expected_path = dir.join("expected");
    let expected = match expected_path.is_file() {
        true => Some(std::fs::read(&expected_path).map_err(io(&expected_path))?),
        false => None,
    };
    Ok(Entry {
        name,
        script: std::fs::read_to_string(&script).map_err(io(&script))?,
        data,
        expected,
    })
}

/// Runs `script` in a fresh directory whose inputs link to the generated
/// data, so only the files the script writes show up in the outcome.
fn execute(script: &str, data: &Path) -> Result<(f64, Outcome), BenchError> {
    let dir = tempfile::tempdir().map_err(io(data))?;
    for e in std::fs::read_dir(data).map_err(io(data))? {
        let e = e.map_err(io(data))?;
        std::os::unix::fs::symlink(e.path(), dir.path().join(e.file_name())).map_err(io(&e.path()))?;
    }
    let start = Instant::now();
    let out = Command::new("sh")
        .arg("-c")
        .arg(script)
        .current_dir(dir.path())
        .output()
        .map_err(io(dir.path()))?;
    let seconds = start.elapsed().as_secs_f64();
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir.path()).map_err(io(dir.path()))? {
        let e = e.map_err(io(dir.path()))?;
        if e.file_type().map_err(io(&e.path()))?.is_file() {
            files.insert(
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).map_err(io(&e.path()))?,
            );
        }
    }
    Ok((
        seconds,
        Outcome {
            status: out.status.code(),
            stdout: out.stdout,
            files,
        },
    ))
}

fn fastest(script: &str, data: &Path, reps: usize) -> Result<(f64, Outcome), BenchError> {
    let (mut best, first) = execute(script, data)?;
    for _ in 1..reps {
        best = best.min(execute(script, data)?.0);
    }
    Ok((best, first))
}

/// Runs every benchmark of `suite` sequentially and then compiled in each
/// mode and width. A compiled run whose outcome differs from the
/// sequential one is marked as failed.
pub fn bench(suite: &Path, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(suite)
        .map_err(io(suite))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut report = BenchReport::default();
    for dir in dirs {
        let entry = prepare(&dir, cfg)?;
        let (seconds, oracle) = fastest(&entry.script, entry.data.path(), cfg.repetitions)?;
        let ok = entry.expected.as_ref().is_none_or(|e| *e == oracle.stdout);
        report.records.push(BenchRecord {
            script: entry.name.clone(),
            mode: CompileMode::Baseline.name().into(),
            width: 1,
            seconds,
            ok,
        });
        for mode in [CompileMode::NoCatSplit, CompileMode::Parallel] {
            for &width in &cfg.widths {
                let opts = CompileOptions {
                    mode,
                    width,
                    ..CompileOptions::default()
                };
                let compiled = compile_script(&entry.script, &cfg.registry, &opts).map_err(|source| {
                    BenchError::Syntax {
                        name: entry.name.clone(),
                        source,
                    }
                })?;
                let (seconds, outcome) = fastest(&compiled.script, entry.data.path(), cfg.repetitions)?;
                report.records.push(BenchRecord {
                    script: entry.name.clone(),
                    mode: mode.name().into(),
                    width,
                    seconds,
                    ok: outcome == oracle,
                });
            }
        }
    }
    Ok(report)
}

impl BenchReport {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.ok)
    }

    fn baseline(&self, script: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.script == script && r.mode == CompileMode::Baseline.name())
            .map(|r| r.seconds)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<16} {:<14} {:>5} {:>9} {:>8}  {}\n",
            "script", "mode", "width", "seconds", "speedup", "result"
        );
        for r in &self.records {
            let speedup = self.baseline(&r.script).map_or(0.0, |b| b / r.seconds.max(1e-9));
            let _ = writeln!(
                s,
                "{:<16} {:<14} {:>5} {:>9.3} {:>7.2}x  {}",
                r.script,
                r.mode,
                r.width,
                r.seconds,
                speedup,
                if r.ok { "ok" } else { "FAILED" }
            );
        }
        s
    }

    pub fn jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

use crate::annotations::Registry;
use crate::odfm::DfgProgram;
use crate::shell_ast::{parse_script, print, OpaqueKind, ShellAst, SyntaxError};
use crate::transform::{optimize_report, OptimizerConfig};

use super::{emit, translate, EmitOptions, FragmentMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompileMode {
    /// Leave the script alone.
    Baseline,
    /// Emit every dataflow region as is, without rewriting it.
    TranslateOnly,
    /// Parallelize but keep the cat/split pairs between stages.
    NoCatSplit,
    #[default]
    Parallel,
}

impl CompileMode {
    pub fn name(self) -> &'static str {
        match self {
            CompileMode::Baseline => "baseline",
            CompileMode::TranslateOnly => "translate-only",
            CompileMode::NoCatSplit => "no-cat-split",
            CompileMode::Parallel => "parallel",
        }
    }
}

impl std::str::FromStr for CompileMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(CompileMode::Baseline),
            "translate-only" => Ok(CompileMode::TranslateOnly),
            "no-cat-split" => Ok(CompileMode::NoCatSplit),
            "parallel" => Ok(CompileMode::Parallel),
            other => Err(format!(
                "unknown mode `{other}` (expected baseline, translate-only, no-cat-split or parallel)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    pub mode: CompileMode,
    pub width: usize,
    pub emit: EmitOptions,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            mode: CompileMode::Parallel,
            width: OptimizerConfig::default().width,
            emit: EmitOptions::default(),
        }
    }
}

/// What happened to one dataflow region.
#[derive(Debug, Clone)]
pub struct FragmentReport {
    pub source: String,
    pub translated: DfgProgram,
    pub optimized: DfgProgram,
    pub parallelized: usize,
    /// False when the region was left as it was in the script.
    pub emitted: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub script: String,
    pub fragments: Vec<FragmentReport>,
}

impl Compiled {
    pub fn changed(&self) -> bool {
        self.fragments.iter().any(|f| f.emitted)
    }
}

fn lower_fragment(
    program: &DfgProgram,
    mode: FragmentMode,
    source: &ShellAst,
    registry: &Registry,
    opts: &CompileOptions,
) -> (ShellAst, FragmentReport) {
    let mut report = FragmentReport {
        source: print(source),
        translated: program.clone(),
        optimized: program.clone(),
        parallelized: 0,
        emitted: false,
        note: None,
    };
    let target = match opts.mode {
        CompileMode::Baseline => None,
        CompileMode::TranslateOnly => Some(program.clone()),
        CompileMode::NoCatSplit | CompileMode::Parallel => {
            let config = OptimizerConfig {
                width: opts.width,
                enable_concat_split: opts.mode == CompileMode::Parallel,
                ..OptimizerConfig::default()
            };
            match optimize_report(program, registry, config) {
                Ok(o) if o.parallelized > 0 => {
                    report.parallelized = o.parallelized;
                    report.optimized = o.program.clone();
                    Some(o.program)
                }
                Ok(_) => {
                    report.note = Some("nothing to parallelize".into());
                    None
                }
                Err(e) => {
                    report.note = Some(e.to_string());
                    None
                }
            }
        }
    };
    let Some(target) = target else {
        return (source.clone(), report);
    };
    match emit(&target, &opts.emit) {
        Ok(text) => {
            report.emitted = true;
            let block = ShellAst::opaque(OpaqueKind::BraceGroup, text);
            let ast = match mode {
                FragmentMode::Background => ShellAst::background(block),
                FragmentMode::Foreground => block,
            };
            (ast, report)
        }
        Err(e) => {
            report.note = Some(e.to_string());
            (source.clone(), report)
        }
    }
}

/// Replaces the dataflow regions of `ast` by parallel script fragments.
/// Everything else is kept as it was.
pub fn compile(ast: &ShellAst, registry: &Registry, opts: &CompileOptions) -> (ShellAst, Vec<FragmentReport>) {
    let t = translate(ast, registry);
    let mut reports = Vec::new();
    let out = t.lower(&mut |p, mode, source| {
        let (a, r) = lower_fragment(p, mode, source, registry, opts);
        reports.push(r);
        a
    });
    (out, reports)
}

/// Compiles script text. The text comes back byte for byte when no region
/// was rewritten.
pub fn compile_script(src: &str, registry: &Registry, opts: &CompileOptions) -> Result<Compiled, SyntaxError> {
    let unchanged = |fragments| Compiled {
        script: src.to_string(),
        fragments,
    };
    if opts.mode == CompileMode::Baseline {
        return Ok(unchanged(Vec::new()));
    }
    let Some(ast) = parse_script(src)? else {
        return Ok(unchanged(Vec::new()));
    };
    let (out, fragments) = compile(&ast, registry, opts);
    if !fragments.iter().any(|f| f.emitted) {
        return Ok(unchanged(fragments));
    }
    let mut script = String::new();
    if let Some(first) = src.lines().next().filter(|l| l.starts_with("#!")) {
        script.push_str(first);
        script.push('\n');
    }
    script.push_str(&print(&out));
    script.push('\n');
    Ok(Compiled { script, fragments })
}

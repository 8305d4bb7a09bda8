//! Text format of annotation records.
//!
//! One record per line, seven `|`-separated fields:
//!
//! ```text
//! name | flags | pure | choice | class | map | agg
//! ```
//!
//! * `flags` is a whitespace-separated list of tokens, or `-` for none:
//!   `-v` (switch), `-f:config` (option whose value is a configuration
//!   input file), `-d:arg` (option with a literal value), `[...]` around a
//!   switch or option to make it optional, `lit=N` (leading operands that
//!   are literals, not files), `ins=MAX` / `ins=MIN-MAX` (number of file
//!   operands, `*` for unbounded), `outs=*` (file operands are outputs),
//!   `matchN=RE` / `nomatchN=RE` (the N-th literal must / must not match).
//! * `pure` is `pure` or `impure`.
//! * `choice` is `seq` (config inputs first, then the others in order) or
//!   `any`.
//! * `class` is `none`, `stateless` or `dp`.
//! * `map` and `agg` are command templates for `dp` records (`-` for the
//!   command itself, or when unused). The `agg` field runs to the end of the
//!   line so it may contain pipes.
//!
//! A literal `|` inside the first six fields is written `\|`. Blank lines
//! and lines starting with `#` are ignored.

use regex::Regex;

use super::{
    AnnotationEntry, ChoiceSpec, CommandTemplate, FlagSpec, FormatError, OperandConstraint,
    OptionRole, OptionSpec, ParallelClass,
};

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

/// Splits off the first six fields at unescaped pipes; the rest is the
/// seventh field.
fn split_fields(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if fields.len() == 6 {
            fields.push(line[i..].to_string());
            return fields;
        }
        match c {
            '\\' if chars.peek().is_some_and(|&(_, n)| n == '|') => {
                chars.next();
                cur.push('|');
            }
            '|' => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

fn escape(field: &str) -> String {
    field.replace('|', "\\|")
}

pub fn parse_entries(text: &str) -> Result<Vec<AnnotationEntry>, FormatError> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        entries.push(parse_entry(trimmed, lineno)?);
    }
    Ok(entries)
}

fn parse_entry(line: &str, lineno: usize) -> Result<AnnotationEntry, FormatError> {
    let fields = split_fields(line);
    if fields.len() != 7 {
        return Err(err(
            lineno,
            format!("expected 7 fields, found {}", fields.len()),
        ));
    }
    let f: Vec<&str> = fields.iter().map(|s| s.trim()).collect();
    let name = f[0];
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(err(lineno, format!("invalid command name {name:?}")));
    }
    let flags = parse_flags(f[1], lineno)?;
    let pure = match f[2] {
        "pure" => true,
        "impure" => false,
        other => return Err(err(lineno, format!("purity must be pure or impure, got {other:?}"))),
    };
    let choice = match f[3] {
        "seq" => ChoiceSpec::Seq,
        "any" => ChoiceSpec::Any,
        other => return Err(err(lineno, format!("choice must be seq or any, got {other:?}"))),
    };
    let template = |s: &str| -> Result<Option<CommandTemplate>, FormatError> {
        if s == "-" {
            Ok(None)
        } else {
            CommandTemplate::parse(s).map(Some).map_err(|m| err(lineno, m))
        }
    };
    let map = template(f[5])?;
    let agg = template(f[6])?;
    let class = match f[4] {
        "none" | "stateless" if map.is_some() || agg.is_some() => {
            return Err(err(lineno, "map and agg must be - unless the class is dp"));
        }
        "none" => ParallelClass::NotParallelizable,
        "stateless" => ParallelClass::Stateless,
        "dp" => {
            let agg = agg.ok_or_else(|| err(lineno, "dp records need an aggregate"))?;
            if !agg.uses_partials() {
                return Err(err(lineno, "aggregate template must use $*"));
            }
            ParallelClass::DataParallel { map, agg }
        }
        other => {
            return Err(err(
                lineno,
                format!("class must be none, stateless or dp, got {other:?}"),
            ))
        }
    };
    if class.is_parallelizable() && choice != ChoiceSpec::Seq {
        return Err(err(lineno, "parallelizable commands must consume inputs sequentially"));
    }
    Ok(AnnotationEntry {
        name: name.to_string(),
        flags,
        pure,
        choice,
        class,
    })
}

fn parse_count(s: &str, lineno: usize) -> Result<Option<usize>, FormatError> {
    if s == "*" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| err(lineno, format!("invalid count {s:?}")))
}

fn parse_flags(field: &str, lineno: usize) -> Result<FlagSpec, FormatError> {
    let mut spec = FlagSpec::default();
    if field == "-" || field.is_empty() {
        return Ok(spec);
    }
    for tok in field.split_whitespace() {
        if let Some(v) = tok.strip_prefix("lit=") {
            spec.literals = parse_count(v, lineno)?
                .ok_or_else(|| err(lineno, "lit needs a number"))?;
        } else if let Some(v) = tok.strip_prefix("ins=") {
            match v.split_once('-') {
                Some((lo, hi)) => {
                    spec.min_inputs = parse_count(lo, lineno)?
                        .ok_or_else(|| err(lineno, "minimum input count must be a number"))?;
                    spec.max_inputs = parse_count(hi, lineno)?;
                }
                None => spec.max_inputs = parse_count(v, lineno)?,
            }
        } else if tok == "outs=*" {
            spec.operand_outputs = true;
        } else if let Some((key, re)) = tok.split_once('=') {
            let (negate, idx) = if let Some(i) = key.strip_prefix("nomatch") {
                (true, i)
            } else if let Some(i) = key.strip_prefix("match") {
                (false, i)
            } else {
                return Err(err(lineno, format!("unknown flag token {tok:?}")));
            };
            let operand: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("invalid operand index in {tok:?}")))?;
            let pattern =
                Regex::new(re).map_err(|e| err(lineno, format!("bad regex in {tok:?}: {e}")))?;
            spec.constraints.push(OperandConstraint {
                operand,
                pattern,
                negate,
            });
        } else {
            let (optional, inner) = match tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                Some(inner) => (true, inner),
                None => (false, tok),
            };
            if !inner.starts_with('-') || inner.len() < 2 {
                return Err(err(lineno, format!("unknown flag token {tok:?}")));
            }
            match inner.split_once(':') {
                Some((name, role)) => {
                    let role = match role {
                        "config" => OptionRole::Config,
                        "arg" => OptionRole::Arg,
                        other => {
                            return Err(err(lineno, format!("unknown option role {other:?}")))
                        }
                    };
                    spec.options.push(OptionSpec {
                        name: name.to_string(),
                        role,
                        optional,
                    });
                }
                None => spec.switches.push((inner.to_string(), optional)),
            }
        }
    }
    for c in &spec.constraints {
        if c.operand == 0 || c.operand > spec.literals {
            return Err(err(
                lineno,
                format!("constraint refers to operand {} but lit={}", c.operand, spec.literals),
            ));
        }
    }
    Ok(spec)
}

fn write_flags(spec: &FlagSpec) -> String {
    let mut toks: Vec<String> = Vec::new();
    let wrap = |s: String, optional: bool| if optional { format!("[{s}]") } else { s };
    for (name, optional) in &spec.switches {
        toks.push(wrap(name.clone(), *optional));
    }
    for o in &spec.options {
        let role = match o.role {
            OptionRole::Config => "config",
            OptionRole::Arg => "arg",
        };
        toks.push(wrap(format!("{}:{role}", o.name), o.optional));
    }
    if spec.literals > 0 {
        toks.push(format!("lit={}", spec.literals));
    }
    let count = |c: Option<usize>| c.map_or("*".to_string(), |n| n.to_string());
    match (spec.min_inputs, spec.max_inputs) {
        (0, None) => {}
        (0, max) => toks.push(format!("ins={}", count(max))),
        (min, max) => toks.push(format!("ins={min}-{}", count(max))),
    }
    if spec.operand_outputs {
        toks.push("outs=*".to_string());
    }
    for c in &spec.constraints {
        let key = if c.negate { "nomatch" } else { "match" };
        toks.push(format!("{key}{}={}", c.operand, c.pattern.as_str()));
    }
    if toks.is_empty() {
        "-".to_string()
    } else {
        toks.join(" ")
    }
}

/// Serializes records in the format read by [`parse_entries`].
pub fn write_entries(entries: &[AnnotationEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let (class, map, agg) = match &e.class {
            ParallelClass::NotParallelizable => ("none", "-".to_string(), "-".to_string()),
            ParallelClass::Stateless => ("stateless", "-".to_string(), "-".to_string()),
            ParallelClass::DataParallel { map, agg } => (
                "dp",
                map.as_ref().map_or("-".to_string(), |m| m.to_string()),
                agg.to_string(),
            ),
        };
        let fields = [
            escape(&e.name),
            escape(&write_flags(&e.flags)),
            (if e.pure { "pure" } else { "impure" }).to_string(),
            (match e.choice {
                ChoiceSpec::Seq => "seq",
                ChoiceSpec::Any => "any",
            })
            .to_string(),
            class.to_string(),
            escape(&map),
        ];
        out.push_str(&fields.join(" | "));
        out.push_str(" | ");
        out.push_str(&agg);
        out.push('\n');
    }
    out
}

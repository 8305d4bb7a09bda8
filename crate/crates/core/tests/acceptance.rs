//! One line per acceptance criterion. The process fails when a hard
//! criterion fails; the performance check only warns.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use odfc::annotations::{ParallelClass, Registry};
use odfc::interp::{check_completion, run, run_to_end, Fifo, Lifo, Random, RoundRobin, RunOptions, Scheduler, StreamValue};
use odfc::odfm::{DfgNode, DfgProgram, EdgeId, Helper};
use odfc::shell_ast::{parse, ShellAst};
use odfc::testkit;
use odfc::transform::{apply_parallel, has_cat_split_pair, optimize, OptimizerConfig, Rule};
use odfc::translate::{cmd_to_node, compile_script, CompileMode, CompileOptions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Warn(String),
}

const SPELL: &str = "cat f1.md f2.md | tr A-Z a-z | tr -cs A-Za-z '\\n' | sort | uniq | grep -vx -f dict.txt - > out ; cat out | wc -l | sed 's/$/ mispelled words!/'\n";

const SET_DIFF: &str = "mkfifo s1 s2
cat in1 | cut -d ' ' -f 1 | tr '[:lower:]' '[:upper:]' | sort > s1 &
cat in2 | cut -d ' ' -f 1 | sort > s2 &
cat s1 | grep -vx -f s2 -
rm s1 s2
";

const WORDS: &[&str] = &[
    "the", "The", "cat", "sat", "on", "a", "mat", "dog", "Dog", "barked", "zebra", "wombat", "quokka", "alpha",
    "beta", "gamma", "delta", "end.", "Start,", "x-ray", "42", "kappa", "lambda", "sigma", "omega", "theta",
    "hello", "world", "Rust", "shell",
];

fn text_corpus(rng: &mut ChaCha8Rng, bytes: usize) -> String {
    let mut s = String::with_capacity(bytes + 64);
    while s.len() < bytes {
        let n = rng.gen_range(0..10);
        let line: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn spell_files(rng: &mut ChaCha8Rng, bytes: usize) -> Vec<(String, String)> {
    vec![
        ("f1.md".into(), text_corpus(rng, bytes / 2)),
        ("f2.md".into(), text_corpus(rng, bytes / 2)),
        ("dict.txt".into(), "a\ncat\ndog\non\nsat\nthe\nmat\nhello\n".into()),
    ]
}

fn set_diff_files(rng: &mut ChaCha8Rng, bytes: usize) -> Vec<(String, String)> {
    vec![
        ("in1".into(), text_corpus(rng, bytes / 2)),
        ("in2".into(), text_corpus(rng, bytes / 2).to_uppercase()),
    ]
}

type Outcome = (Option<i32>, Vec<u8>, BTreeMap<String, Vec<u8>>);

fn sh_in(dir: &Path, script: &str) -> Outcome {
    let out = Command::new("sh").arg("-c").arg(script).current_dir(dir).output().expect("sh runs");
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            files.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
        }
    }
    (out.status.code(), out.stdout, files)
}

fn run_with(files: &[(String, String)], script: &str) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    for (n, c) in files {
        std::fs::write(dir.path().join(n), c).unwrap();
    }
    sh_in(dir.path(), script)
}

fn compiled(script: &str, mode: CompileMode, width: usize) -> String {
    let opts = CompileOptions {
        mode,
        width,
        ..CompileOptions::default()
    };
    compile_script(script, &Registry::builtin(), &opts).expect("script parses").script
}

fn semantics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut runs = 0;
    for i in 0..100 {
        let p = testkit::random_program(&mut rng, 6);
        let inputs = testkit::random_inputs(&mut rng, &p, 20);
        let mut schedulers: Vec<Box<dyn Scheduler>> = (0..10).map(|s| Box::new(Random::new(s)) as Box<dyn Scheduler>).collect();
        schedulers.push(Box::new(RoundRobin::new()));
        schedulers.push(Box::new(Fifo));
        schedulers.push(Box::new(Lifo));
        let mut first: Option<BTreeMap<EdgeId, StreamValue>> = None;
        for s in &mut schedulers {
            let state = match run_to_end(&p, inputs.clone(), s.as_mut(), RunOptions::default()) {
                Ok(st) => st,
                Err(e) => return Verdict::Fail(format!("program {i} did not finish: {e}\n{p}")),
            };
            if let Err(e) = check_completion(&p, &state) {
                return Verdict::Fail(format!("program {i}: {e}\n{p}"));
            }
            let out = state.outputs(&p);
            match &first {
                None => first = Some(out),
                Some(f) if *f != out => return Verdict::Fail(format!("program {i}: schedules disagree\n{p}")),
                Some(_) => {}
            }
            runs += 1;
        }
    }
    Verdict::Pass(format!("100 programs, {runs} schedules"))
}

fn soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rules = Rule::AUXILIARY
        .into_iter()
        .chain([Rule::Parallel, Rule::SequentialConsumption]);
    let mut names = Vec::new();
    for rule in rules {
        match testkit::check_rule(&mut rng, rule, 100) {
            Ok(n) => names.push(format!("{rule} {n}")),
            Err(e) => return Verdict::Fail(e),
        }
    }
    Verdict::Pass(names.join(", "))
}

/// A concrete invocation for a registry record: required flags, some
/// optional switches, and operands the record accepts.
fn invocation(entry: &odfc::annotations::AnnotationEntry, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words = vec![entry.name.clone()];
    for (s, optional) in &entry.flags.switches {
        if !optional || rng.gen_bool(0.4) {
            words.push(s.clone());
        }
    }
    for o in &entry.flags.options {
        if o.optional && rng.gen_bool(0.5) {
            continue;
        }
        let value = match (entry.name.as_str(), o.name.as_str(), o.role) {
            (_, _, odfc::annotations::OptionRole::Config) => "pat.txt",
            ("cut", "-d", _) => "' '",
            ("cut", "-f", _) => "1,3",
            ("cut", "-c", _) => "2-4",
            _ => "a",
        };
        words.push(o.name.clone());
        words.push(value.to_string());
    }
    let literals: &[&str] = match (entry.name.as_str(), entry.flags.literals) {
        ("tr", 2) if entry.flags.switches.iter().any(|(s, _)| s == "-c") => &["A-Za-z", "'\\n'"],
        ("tr", 2) => &["a-z", "A-Z"],
        ("tr", 1) if entry.flags.switches.iter().any(|(s, o)| s == "-d" && !o) => &["aeiou"],
        ("tr", 1) => &["a-z"],
        ("sed", 1) => &["s/a/x/g"],
        (_, 1) => &["a"],
        _ => &[],
    };
    words.extend(literals.iter().map(|s| s.to_string()));
    words
}

fn contiguous_partition(rng: &mut ChaCha8Rng, lines: &[String], k: usize) -> Vec<StreamValue> {
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.gen_range(0..=lines.len())).collect();
    cuts.sort();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(lines.len());
    bounds.windows(2).map(|w| StreamValue::closed(lines[w[0]..w[1]].to_vec())).collect()
}

fn random_lines(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.gen_range(0..25);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(0..5);
            (0..k).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

fn data_parallel_laws() -> Verdict {
    let registry = Registry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for entry in registry.entries() {
        if !entry.class.is_parallelizable() {
            continue;
        }
        for case in 0..50 {
            let raw = invocation(entry, &mut rng);
            let text = raw.join(" ");
            let Ok(ShellAst::Simple(cmd)) = parse(&text) else {
                return Verdict::Fail(format!("cannot parse `{text}`"));
            };
            let words: Vec<String> = raw[1..].iter().map(|w| odfc::shell_ast::unquote(w)).collect();
            if entry.resolve(&words).is_none() {
                return Verdict::Fail(format!("`{text}` does not fit its own record"));
            }
            let whole = match cmd_to_node(&cmd, &registry) {
                Ok(p) => p,
                Err(e) => return Verdict::Fail(format!("`{text}`: {e}")),
            };
            let f = *whole.nodes.keys().next().unwrap();
            if whole.nodes[&f].as_command().unwrap().class != entry.class {
                return Verdict::Fail(format!("`{text}` resolved to another record"));
            }
            let stream = *whole.nodes[&f].inputs.last().unwrap();
            let k = rng.gen_range(2..=4);
            let mut split = whole.clone();
            let chunks = split.fresh_edges(k).unwrap();
            split.inputs.retain(|e| *e != stream);
            split.inputs.extend(&chunks);
            split.bindings.remove(&stream);
            let cat = split.add_node(DfgNode::helper(Helper::Cat, chunks.clone(), vec![stream]));
            let parallel = match apply_parallel(&split, cat, f, &registry) {
                Ok(p) => p,
                Err(e) => return Verdict::Fail(format!("`{text}`: {e}")),
            };

            let lines = random_lines(&mut rng);
            let patterns = StreamValue::closed(vec!["a".into(), "the".into()]);
            let config: BTreeMap<EdgeId, StreamValue> = whole
                .inputs
                .iter()
                .filter(|e| **e != stream)
                .map(|e| (*e, patterns.clone()))
                .collect();
            let mut whole_in = config.clone();
            whole_in.insert(stream, StreamValue::closed(lines.clone()));
            let mut parts_in = config.clone();
            let parts = contiguous_partition(&mut rng, &lines, k);
            parts_in.extend(chunks.iter().copied().zip(parts.iter().cloned()));
            let interpreted = |p: &DfgProgram, i: BTreeMap<EdgeId, StreamValue>| {
                run(p, i, &mut RoundRobin::new(), RunOptions::default()).map(|o| o.into_values().collect::<Vec<_>>())
            };
            let expected = interpreted(&whole, whole_in.clone());
            let got = interpreted(&parallel, parts_in);
            if expected.is_err() || expected != got {
                return Verdict::Fail(format!("`{text}` case {case}: {lines:?} cut {parts:?}: {expected:?} vs {got:?}"));
            }

            // A map fed only a close either emits nothing (stateless) or
            // something the aggregate treats as neutral.
            let mut empty_in = config.clone();
            empty_in.insert(stream, StreamValue::closed(vec![]));
            let empty = interpreted(&whole, empty_in).unwrap();
            match &entry.class {
                ParallelClass::Stateless if empty.iter().any(|o| !o.elements.is_empty()) => {
                    return Verdict::Fail(format!("`{text}` emits on close alone: {empty:?}"));
                }
                ParallelClass::DataParallel { .. } => {
                    let mut with_empty = config.clone();
                    let padded = [vec![StreamValue::closed(vec![])], parts[1..].to_vec()].concat();
                    with_empty.extend(chunks.iter().copied().zip(padded));
                    let mut no_first = config.clone();
                    no_first.insert(stream, StreamValue::closed(parts[1..].iter().flat_map(|p| p.elements.clone()).collect()));
                    if interpreted(&whole, no_first) != interpreted(&parallel, with_empty) {
                        return Verdict::Fail(format!("`{text}`: an empty chunk is not neutral for the aggregate"));
                    }
                }
                _ => {}
            }
            checked += 1;
        }
    }
    Verdict::Pass(format!("{checked} partitioned inputs"))
}

fn round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (name, script, files) in [
        ("spell", SPELL, spell_files(&mut rng, 1 << 20)),
        ("set-diff", SET_DIFF, set_diff_files(&mut rng, 1 << 20)),
    ] {
        let translated = compiled(script, CompileMode::TranslateOnly, 1);
        if translated == script {
            return Verdict::Fail(format!("{name}: nothing was translated"));
        }
        if run_with(&files, script) != run_with(&files, &translated) {
            return Verdict::Fail(format!("{name}: outputs differ\n{translated}"));
        }
    }
    Verdict::Pass("spell and set-diff, 1 MiB each".into())
}

fn listing_shape(script: &str) -> Result<(), String> {
    let count = |needle: &str| script.matches(needle).count();
    if count("mkfifo ") != 2 || count("\nwait\n") != 2 || count("rm -rf \"$odfm_d\"") != 2 {
        return Err("expected two mkfifo/wait/rm fragments".into());
    }
    if count("sort -m ") == 0 || count("paste -d+ ") == 0 || !script.contains("| bc") {
        return Err("missing sort -m or paste -d+ ... | bc".into());
    }
    let dict_fifo = script
        .lines()
        .find_map(|l| l.strip_prefix("cat dict.txt > ")?.strip_suffix(" &"))
        .ok_or("dict.txt is not copied into a FIFO")?;
    let teed = script
        .lines()
        .any(|l| l.starts_with("tee ") && l.contains(&format!("< {dict_fifo} ")));
    if !teed {
        return Err("dict.txt is not replicated with tee".into());
    }
    Ok(())
}

fn parallel_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spell = spell_files(&mut rng, 1 << 19);
    let set_diff = set_diff_files(&mut rng, 1 << 19);
    for (name, script, files) in [("spell", SPELL, &spell), ("set-diff", SET_DIFF, &set_diff)] {
        let expected = run_with(files, script);
        for width in [2, 4, 16] {
            let c = compiled(script, CompileMode::Parallel, width);
            if run_with(files, &c) != expected {
                return Verdict::Fail(format!("{name} at width {width} differs\n{c}"));
            }
        }
    }
    match listing_shape(&compiled(SPELL, CompileMode::Parallel, 2)) {
        Ok(()) => Verdict::Pass("widths 2, 4, 16; width-2 spell has the two-fragment shape".into()),
        Err(e) => Verdict::Fail(format!("spell at width 2: {e}")),
    }
}

fn normal_form() -> Verdict {
    let registry = Registry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let config = |enable_concat_split| OptimizerConfig {
        width: 4,
        enable_concat_split,
        ..OptimizerConfig::default()
    };
    for i in 0..200 {
        let p = testkit::random_pipeline(&mut rng);
        let q = optimize(&p, &registry, config(true)).unwrap();
        if has_cat_split_pair(&q) {
            return Verdict::Fail(format!("pipeline {i} keeps a cat/split pair\n{q}"));
        }
    }
    let two_stage = odfc::odfm::parse_program(
        "input x1 file:in\noutput x3 stdout\nx2 <- `grep a <@i0 >@o0`(x1)\nx3 <- `tr a-z A-Z <@i0 >@o0`(x2)\n",
        &registry,
    )
    .unwrap();
    let without = optimize(&two_stage, &registry, config(false)).unwrap();
    let with = optimize(&two_stage, &registry, config(true)).unwrap();
    if !has_cat_split_pair(&without) || has_cat_split_pair(&with) {
        return Verdict::Fail("switching the rewrite off is not observable".into());
    }
    Verdict::Pass("200 pipelines in normal form; ablation keeps the pair".into())
}

fn performance() -> Verdict {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let script = "cat big.txt | grep -E '(a|e)[a-z]*(t|r)[a-z]* [a-z]+(ta|ka)$' | grep -v -E '^(the|a) ' | tr a-z A-Z\n";
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let files = vec![("big.txt".to_string(), text_corpus(&mut rng, 100 << 20))];
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("big.txt"), &files[0].1).unwrap();
    drop(files);
    let time = |s: &str| {
        let start = Instant::now();
        let out = Command::new("sh").arg("-c").arg(s).current_dir(dir.path()).output().unwrap();
        (start.elapsed().as_secs_f64(), out.stdout)
    };
    let (base, expected) = time(script);
    let (par, out_par) = time(&compiled(script, CompileMode::Parallel, 4));
    let (ncs, out_ncs) = time(&compiled(script, CompileMode::NoCatSplit, 4));
    if out_par != expected || out_ncs != expected {
        return Verdict::Fail("compiled grep pipeline output differs".into());
    }
    let msg = format!(
        "{cores} cores: baseline {base:.2}s, parallel {par:.2}s ({:.2}x), no-cat-split {ncs:.2}s",
        base / par
    );
    if cores >= 4 && base / par >= 1.5 && par < ncs {
        Verdict::Pass(msg)
    } else {
        Verdict::Warn(msg)
    }
}

const IMPURE: &[&str] = &[
    "ls -l", "rm -f tmp.txt", "echo hello", "date", "mkdir -p build", "cp a b", "mv x y", "curl -s http://localhost",
    "make all", "git status", "touch f", "printf '%s\\n' x", "find . -name '*.rs'", "python3 script.py", "sleep 0",
];

fn purity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ops = [" | ", " && ", " || ", "; ", " & ", "\n"];
    let mut scripts = vec![
        "#!/bin/sh\n# nothing to do here\nls   -la | less\n".to_string(),
        "for f in *.txt; do wc -l \"$f\"; done\nif [ -d x ]; then sort x; fi\n".to_string(),
        "sort f > f\n".to_string(),
    ];
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let mut s = String::new();
        if rng.gen_bool(0.3) {
            s.push_str("# generated\n");
        }
        for i in 0..n {
            if i > 0 {
                s.push_str(ops.choose(&mut rng).unwrap());
            }
            s.push_str(IMPURE.choose(&mut rng).unwrap());
            if rng.gen_bool(0.2) {
                s.push_str(" > out.log");
            }
        }
        s.push('\n');
        scripts.push(s);
    }
    for s in &scripts {
        for mode in [CompileMode::Parallel, CompileMode::NoCatSplit, CompileMode::TranslateOnly] {
            let c = compiled(s, mode, 4);
            if c != *s {
                return Verdict::Fail(format!("changed in {} mode:\n{s}\n=>\n{c}", mode.name()));
            }
        }
    }
    Verdict::Pass(format!("{} scripts unchanged", scripts.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("1 semantics: termination, schedule independence, completion", semantics),
        ("2 rewrite soundness", soundness),
        ("3 map/aggregate laws", data_parallel_laws),
        ("4 round-trip fidelity", round_trip),
        ("5 end-to-end parallel correctness", parallel_correctness),
        ("6 concat-split normal form", normal_form),
        ("7 performance (environment-dependent)", performance),
        ("8 purity safety", purity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(d) => println!("criterion {name}: PASS ({d}) [{secs:.1}s]"),
            Verdict::Warn(d) => println!("criterion {name}: WARN ({d}) [{secs:.1}s]"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {name}: FAIL [{secs:.1}s]\n{d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::interp::{bind_inputs, run, RoundRobin, RunOptions};
use crate::odfm::Helper;
use crate::shell_ast::parse;

fn registry() -> Registry {
    Registry::builtin()
}

fn simple(src: &str) -> SimpleCommand {
    match parse(src).unwrap() {
        ShellAst::Simple(c) => c,
        other => panic!("not a simple command: {other:?}"),
    }
}

fn only_node(p: &DfgProgram) -> (&DfgNode, &CommandNode) {
    assert_eq!(p.nodes.len(), 1);
    let n = p.nodes.values().next().unwrap();
    (n, n.as_command().unwrap())
}

const SPELL: &str = "cat f1.md f2.md | tr A-Z a-z | tr -cs A-Za-z '\\n' | sort | uniq | grep -vx -f dict.txt - > out ; cat out | wc -l | sed 's/$/ mispelled words!/'\n";

fn write_files(dir: &Path, files: &[(&str, String)]) {
    for (n, c) in files {
        std::fs::write(dir.join(n), c).unwrap();
    }
}

/// Runs `script` with `sh` in `dir`; returns stdout and every file.
fn sh(dir: &Path, script: &str) -> (String, BTreeMap<String, String>) {
    let out = Command::new("sh").arg("-c").arg(script).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            files.insert(
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read_to_string(e.path()).unwrap(),
            );
        }
    }
    (String::from_utf8(out.stdout).unwrap(), files)
}

/// Runs the script and its compiled form on copies of the same files.
fn same_behaviour(script: &str, files: &[(&str, String)], opts: &CompileOptions) -> Compiled {
    let compiled = compile_script(script, &registry(), opts).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_files(a.path(), files);
    write_files(b.path(), files);
    let want = sh(a.path(), script);
    let got = sh(b.path(), &compiled.script);
    assert_eq!(want, got, "compiled script:\n{}", compiled.script);
    compiled
}

fn words<R: Rng>(rng: &mut R, lines: usize) -> String {
    const W: &[&str] = &["The", "cat", "sat", "a", "dog", "zebra", "wombat", "CAT!", "end.", "Dog,", "ant"];
    let mut s = String::new();
    for _ in 0..lines {
        let n = rng.gen_range(0..6);
        let l: Vec<&str> = (0..n).map(|_| W[rng.gen_range(0..W.len())]).collect();
        s.push_str(&l.join(" "));
        s.push('\n');
    }
    s
}

fn spell_files<R: Rng>(rng: &mut R, lines: usize) -> Vec<(&'static str, String)> {
    vec![
        ("f1.md", words(rng, lines)),
        ("f2.md", words(rng, lines / 2)),
        ("dict.txt", "a\ncat\ndog\nthe\n".to_string()),
    ]
}

#[test]
fn config_input_comes_first() {
    let p = cmd_to_node(&simple("grep -vx -f dict.txt - < in"), &registry()).unwrap();
    let (n, c) = only_node(&p);
    assert_eq!(p.bindings[&n.inputs[0]], Binding::File("dict.txt".into()));
    assert_eq!(p.bindings[&n.inputs[1]], Binding::File("in".into()));
    assert_eq!(c.choice.configs().into_iter().collect::<Vec<_>>(), vec![0]);
    assert_eq!(c.stdin, Some(1));
    assert_eq!(n.outputs.len(), 1);
    assert_eq!(p.bindings[&n.outputs[0]], Binding::Stdout);
}

#[test]
fn file_operands_and_output_redirection() {
    let p = cmd_to_node(&simple("cat a b > c"), &registry()).unwrap();
    let (n, c) = only_node(&p);
    let ins: Vec<&Binding> = n.inputs.iter().map(|e| &p.bindings[e]).collect();
    assert_eq!(ins, [&Binding::File("a".into()), &Binding::File("b".into())]);
    assert_eq!(p.bindings[&n.outputs[0]], Binding::File("c".into()));
    assert!(c.choice.is_sequential());
}

#[test]
fn metadata_keeps_assignments_and_other_redirections() {
    let p = cmd_to_node(&simple("LC_ALL=C sort -r in.txt 2> err.log"), &registry()).unwrap();
    let (_, c) = only_node(&p);
    assert_eq!(c.metadata.assignments, vec![("LC_ALL".to_string(), "C".to_string())]);
    assert_eq!(c.metadata.redirs.len(), 1);
    assert_eq!(c.metadata.redirs[0].fd, 2);
}

#[test]
fn impure_commands_are_barriers() {
    assert!(matches!(cmd_to_node(&simple("ls"), &registry()), Err(TranslateError::Barrier(_))));
    assert!(matches!(cmd_to_node(&simple("sort f > f"), &registry()), Err(TranslateError::Barrier(_))));
}

#[test]
fn connectpipe_needs_stdout() {
    let p = cmd_to_node(&simple("cat a > b"), &registry()).unwrap();
    assert_eq!(connectpipe(&p, "1"), Err(TranslateError::NoStdout));
    let p = cmd_to_node(&simple("cat a"), &registry()).unwrap();
    let q = connectpipe(&p, "1").unwrap();
    assert_eq!(q.bindings[&q.outputs[0]], Binding::Pipe("1".into()));
}

#[test]
fn compose_splices_pipes_and_rejects_shared_files() {
    let p1 = connectpipe(&cmd_to_node(&simple("cat a"), &registry()).unwrap(), "x").unwrap();
    let p2 = read_pipe(&cmd_to_node(&simple("sort"), &registry()).unwrap(), "x").unwrap();
    let q = compose(&p1, &p2).unwrap();
    assert_eq!(q.inputs.len(), 1);
    assert_eq!(q.outputs.len(), 1);
    assert_eq!(q.nodes.len(), 2);
    assert!(!q.bindings.values().any(|b| matches!(b, Binding::Pipe(_))));

    let w1 = cmd_to_node(&simple("sort a > f"), &registry()).unwrap();
    let w2 = cmd_to_node(&simple("uniq b > f"), &registry()).unwrap();
    assert_eq!(compose(&w1, &w2), Err(ComposeError::SharedFile("f".into())));
    let r2 = cmd_to_node(&simple("uniq f"), &registry()).unwrap();
    assert_eq!(compose(&w1, &r2), Err(ComposeError::SharedFile("f".into())));
}

#[test]
fn spell_pipeline_is_a_chain() {
    let ast = parse(SPELL.split(';').next().unwrap()).unwrap();
    let ShellAst::Pipeline { commands, .. } = ast else { panic!() };
    let cmds: Vec<SimpleCommand> = commands
        .into_iter()
        .map(|c| match c {
            ShellAst::Simple(s) => s,
            _ => panic!(),
        })
        .collect();
    let p = pipeline_to_dfg(&cmds, &registry()).unwrap();
    assert_eq!(p.nodes.len(), 6);
    assert_eq!(p.inputs.len(), 3);
    assert_eq!(p.outputs.len(), 1);
    assert_eq!(p.bindings[&p.outputs[0]], Binding::File("out".into()));
    for id in p.topo_order() {
        assert!(p.nodes[&id].outputs.len() == 1);
    }
}

#[test]
fn spell_has_two_regions() {
    let t = translate(&parse(SPELL).unwrap(), &registry());
    let programs = t.programs();
    assert_eq!(programs.len(), 2);
    assert!(matches!(t, Translated::Seq(..)));
    assert_eq!(programs[1].0.nodes.len(), 3);
}

#[test]
fn background_pipeline_composes_with_the_next() {
    let t = translate(&parse("sort a | uniq & sort b | uniq -c").unwrap(), &registry());
    let programs = t.programs();
    assert_eq!(programs.len(), 1);
    assert_eq!(programs[0].0.nodes.len(), 4);
    assert_eq!(programs[0].1, FragmentMode::Foreground);
    let t = translate(&parse("sort a | uniq ; sort b | uniq -c").unwrap(), &registry());
    assert_eq!(t.programs().len(), 2);
}

#[test]
fn boolean_operands_on_the_left_stay_verbatim() {
    let t = translate(&parse("sort a | uniq > b && sort b | uniq -c").unwrap(), &registry());
    assert_eq!(t.programs().len(), 1);
    assert!(matches!(t, Translated::And(..)));
}

#[test]
fn barrier_scripts_are_returned_verbatim() {
    let src = "#!/bin/sh\n# list things\nls -l   /tmp\nfor f in *; do echo \"$f\"; done\necho done >&2\n";
    for mode in [CompileMode::Parallel, CompileMode::TranslateOnly, CompileMode::NoCatSplit] {
        let opts = CompileOptions {
            mode,
            ..CompileOptions::default()
        };
        let c = compile_script(src, &registry(), &opts).unwrap();
        assert_eq!(c.script, src);
        assert!(!c.changed());
    }
}

#[test]
fn emitted_command_uses_fifos() {
    let p = cmd_to_node(&simple("grep -f a b"), &registry()).unwrap();
    let s = emit(&p, &EmitOptions::default()).unwrap();
    assert!(s.contains("grep -f \"$odfm_d/p1\" \"$odfm_d/p2\" > \"$odfm_d/p3\" &"), "{s}");
    assert!(s.contains("cat a > \"$odfm_d/p1\" &"));
    assert!(s.contains("cat \"$odfm_d/p3\" &"));
    assert!(s.starts_with("{\nodfm_d=$(mktemp -d"));
    assert!(s.ends_with("wait\nrm -rf \"$odfm_d\"\n}"));
}

#[test]
fn empty_program_has_prologue_and_epilogue_only() {
    let s = emit(&DfgProgram::new(), &EmitOptions::default()).unwrap();
    assert_eq!(s.lines().count(), 5, "{s}");
    assert!(!s.contains("mkfifo"));
}

#[test]
fn wide_helpers_are_emitted_as_trees() {
    let registry = registry();
    let p = crate::odfm::parse_program(
        "input x1 file:in\noutput x2 stdout\nx2 <- `sort <@i0 >@o0`(x1)\n",
        &registry,
    )
    .unwrap();
    let q = crate::transform::optimize(
        &p,
        &registry,
        crate::transform::OptimizerConfig {
            width: 16,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(q.nodes.values().any(|n| n.is_helper(Helper::Split) && n.outputs.len() == 16));
    let s = emit(&q, &EmitOptions::default()).unwrap();
    assert!(!s.lines().any(|l| l.contains("9>")), "{s}");
    assert_eq!(s.matches("odfm_split ").count(), 5, "{s}");
}

#[test]
fn round_trip_matches_the_shell() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = CompileOptions {
        mode: CompileMode::TranslateOnly,
        ..CompileOptions::default()
    };
    for _ in 0..4 {
        let lines = rng.gen_range(0..60);
        let files = spell_files(&mut rng, lines);
        let c = same_behaviour(SPELL, &files, &opts);
        assert_eq!(c.fragments.iter().filter(|f| f.emitted).count(), 2);
    }
}

#[test]
fn parallel_spell_matches_the_shell() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for width in [2, 3, 16] {
        for mode in [CompileMode::Parallel, CompileMode::NoCatSplit] {
            let files = spell_files(&mut rng, 300);
            let c = same_behaviour(SPELL, &files, &CompileOptions { mode, width, ..CompileOptions::default() });
            assert_eq!(c.script.matches("mkfifo").count(), 2);
        }
    }
}

#[test]
fn large_chunks_do_not_deadlock() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let files = spell_files(&mut rng, 40_000);
    same_behaviour(SPELL, &files, &CompileOptions { width: 4, ..CompileOptions::default() });
}

#[test]
fn stdin_scripts_read_the_script_input() {
    let dir = tempfile::tempdir().unwrap();
    let opts = CompileOptions { width: 2, ..CompileOptions::default() };
    let c = compile_script("tr a-z A-Z | sort\n", &registry(), &opts).unwrap();
    assert!(c.changed());
    let out = Command::new("sh")
        .arg("-c")
        .arg(&c.script)
        .current_dir(dir.path())
        .stdin(std::fs::File::open({
            let f = dir.path().join("in");
            std::fs::write(&f, "b\na\nc\n").unwrap();
            f
        })
        .unwrap())
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "A\nB\nC\n");
}

#[test]
fn interpreter_agrees_with_the_shell_on_translations() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let first = "cat f1.md f2.md | tr A-Z a-z | tr -cs A-Za-z '\\n' | sort | uniq | grep -vx -f dict.txt -";
    let t = translate(&parse(first).unwrap(), &registry());
    let p = t.programs()[0].0.clone();
    for _ in 0..5 {
        let files = spell_files(&mut rng, 50);
        let map: BTreeMap<String, String> = files.iter().map(|(n, c)| (n.to_string(), c.clone())).collect();
        let out = run(&p, bind_inputs(&p, &map, "").unwrap(), &mut RoundRobin::new(), RunOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), &files);
        let (stdout, _) = sh(dir.path(), first);
        assert_eq!(out[&p.outputs[0]].to_text(), stdout);
    }
}

#[test]
fn compose_is_associative_on_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    const STAGES: &[&str] = &["tr a-z A-Z", "sort", "uniq", "grep a", "sort -r", "cut -c 1-3"];
    let registry = registry();
    for _ in 0..30 {
        let stage = |rng: &mut ChaCha8Rng| STAGES[rng.gen_range(0..STAGES.len())];
        let a = connectpipe(&cmd_to_node(&simple(&format!("{} < in", stage(&mut rng))), &registry).unwrap(), "1").unwrap();
        let b = cmd_to_node(&simple(stage(&mut rng)), &registry).unwrap();
        let b = connectpipe(&read_pipe(&b, "1").unwrap(), "2").unwrap();
        let c = read_pipe(&cmd_to_node(&simple(stage(&mut rng)), &registry).unwrap(), "2").unwrap();
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        let files = BTreeMap::from([("in".to_string(), words(&mut rng, 30).to_lowercase())]);
        let outputs = |p: &DfgProgram| {
            let o = run(p, bind_inputs(p, &files, "").unwrap(), &mut RoundRobin::new(), RunOptions::default()).unwrap();
            o[&p.outputs[0]].clone()
        };
        assert_eq!(outputs(&left), outputs(&right));
    }
}

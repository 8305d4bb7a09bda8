use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use proptest::prelude::*;

use super::*;
use crate::annotations::Registry;
use crate::odfm::parse_program;

fn program(text: &str) -> DfgProgram {
    parse_program(text, &Registry::builtin()).unwrap()
}

fn lines(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn single_input(p: &DfgProgram, v: &[&str]) -> BTreeMap<EdgeId, StreamValue> {
    [(p.inputs[0], StreamValue::closed(lines(v)))].into()
}

/// Output of a shell command run on `input`, or None when the tool is
/// missing.
fn system(cmd: &str, input: &str) -> Option<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .env("LC_ALL", "C")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    child.stdin.take()?.write_all(input.as_bytes()).ok()?;
    let out = child.wait_with_output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn relay_moves_one_element_per_step() {
    let p = program("input x1\noutput x2\nx2 <- relay(x1)\n");
    let inputs = [(EdgeId(1), StreamValue::open(lines(&["a"])))].into();
    assert_eq!(
        ExecState::init(&p, inputs, RunOptions::default()).err(),
        Some(InterpError::OpenInput(EdgeId(1)))
    );
    let mut st = ExecState::init(&p, single_input(&p, &["a"]), RunOptions::default()).unwrap();
    let ev = st.step(&p, &mut RoundRobin::new()).unwrap();
    assert_eq!(
        ev,
        StepOutcome::Progress(StepEvent {
            node: NodeId(1),
            edge: EdgeId(1),
            element: Some("a".into()),
            emitted: vec![(EdgeId(2), Some("a".into()))],
        })
    );
    assert_eq!(st.gamma[&EdgeId(2)], StreamValue::open(lines(&["a"])));
    assert_eq!(st.sigma[&EdgeId(1)].consumed, 1);
}

#[test]
fn init_checks_interface() {
    let p = program("input x1\noutput x2\nx2 <- relay(x1)\n");
    let r = ExecState::init(&p, BTreeMap::new(), RunOptions::default());
    assert_eq!(r.err(), Some(InterpError::MissingInput(EdgeId(1))));
    let extra = [
        (EdgeId(1), StreamValue::closed(vec![])),
        (EdgeId(9), StreamValue::closed(vec![])),
    ]
    .into();
    let r = ExecState::init(&p, extra, RunOptions::default());
    assert_eq!(r.err(), Some(InterpError::ExtraInput(EdgeId(9))));
}

#[test]
fn same_file_feeds_several_inputs() {
    let p = program("input x1 file:a\ninput x2 file:a\noutput x3\nx3 <- cat(x1,x2)\n");
    let files = [("a".to_string(), "l1\nl2\n".to_string())].into();
    let inputs = bind_inputs(&p, &files, "").unwrap();
    assert_eq!(inputs[&EdgeId(1)], inputs[&EdgeId(2)]);
    let out = run(&p, inputs, &mut RoundRobin::new(), RunOptions::default()).unwrap();
    assert_eq!(out[&EdgeId(3)].elements, lines(&["l1", "l2", "l1", "l2"]));
}

#[test]
fn cat_never_reads_ahead_of_an_open_input() {
    let p = program("input x1\ninput x2\noutput x3\nx3 <- cat(x1,x2)\n");
    let inputs = [
        (EdgeId(1), StreamValue::closed(lines(&["a", "b"]))),
        (EdgeId(2), StreamValue::closed(lines(&["c"]))),
    ]
    .into();
    let mut st = ExecState::init(&p, inputs, RunOptions::default()).unwrap();
    let mut sched = Lifo;
    while let StepOutcome::Progress(ev) = st.step(&p, &mut sched).unwrap() {
        if ev.edge == EdgeId(2) {
            assert!(st.sigma[&EdgeId(1)].closed);
        }
    }
    assert_eq!(st.gamma[&EdgeId(3)], StreamValue::closed(lines(&["a", "b", "c"])));
    check_completion(&p, &st).unwrap();
}

#[test]
fn wc_counts_lines_like_the_system_tool() {
    let p = program("input x1\noutput x2\nx2 <- `wc -l <@i0 >@o0`(x1)\n");
    let out = run(&p, single_input(&p, &["a", "b", "c"]), &mut RoundRobin::new(), RunOptions::default()).unwrap();
    assert_eq!(out[&EdgeId(2)].elements, lines(&["3"]));
    if let Some(real) = system("wc -l", "a\nb\nc\n") {
        assert_eq!(real.trim(), "3");
    }
}

#[test]
fn empty_inputs_give_empty_closed_outputs() {
    let p = program(
        "input x1\ninput x2\noutput x5\noutput x6\nx3,x4 <- split(x1)\nx5 <- `grep -vx -f @i0 <@i1 >@o0`(x2,x3)\nx6 <- `sort <@i0 >@o0`(x4)\n",
    );
    let inputs = p.inputs.iter().map(|e| (*e, StreamValue::closed(vec![]))).collect();
    let out = run(&p, inputs, &mut Random::new(3), RunOptions::default()).unwrap();
    for v in out.values() {
        assert_eq!(v, &StreamValue::closed(vec![]));
    }
}

#[test]
fn unsupported_commands_fail_at_init() {
    let p = program("input x1\noutput x2\nx2 <- `sha1sum <@i0 >@o0`(x1) :: seq :: none\n");
    let r = ExecState::init(&p, single_input(&p, &[]), RunOptions::default());
    assert!(matches!(r.err(), Some(InterpError::Unsupported { .. })));
}

#[test]
fn trailing_stages_run_after_the_command() {
    let p = program(
        "input x1\ninput x2\noutput x3\nx3 <- `paste -d+ @i0 @i1 >@o0 | bc`(x1,x2) :: any :: none\n",
    );
    let inputs = [
        (EdgeId(1), StreamValue::closed(lines(&["2"]))),
        (EdgeId(2), StreamValue::closed(lines(&["40"]))),
    ]
    .into();
    let out = run(&p, inputs, &mut Lifo, RunOptions::default()).unwrap();
    assert_eq!(out[&EdgeId(3)].elements, lines(&["42"]));
}

#[test]
fn trace_lines_describe_steps() {
    let p = program("input x1\noutput x2\nx2 <- relay(x1)\n");
    let opts = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    let st = run_to_end(&p, single_input(&p, &["a"]), &mut Fifo, opts).unwrap();
    assert_eq!(st.trace, vec!["n1 x1 \"a\" -> x2:\"a\"", "n1 x1 ⊥ -> x2:⊥"]);
}

const SPELL: &str = "cat f1.md f2.md | tr A-Z a-z | tr -cs A-Za-z '\\n' | sort | uniq | grep -vx -f dict.txt -";

const SPELL_DFG: &str = "\
input x1 file:f1.md
input x2 file:f2.md
input x3 file:dict.txt
output x9 stdout
x4 <- cat(x1,x2)
x5 <- `tr A-Z a-z <@i0 >@o0`(x4)
x6 <- `tr -cs A-Za-z '\\n' <@i0 >@o0`(x5)
x7 <- `sort <@i0 >@o0`(x6)
x8 <- `uniq <@i0 >@o0`(x7)
x9 <- `grep -vx -f @i0 - <@i1 >@o0`(x3,x8)
";

fn spell_files() -> BTreeMap<String, String> {
    [
        ("f1.md", "The cat sat.\nA dog, a CAT!\n"),
        ("f2.md", "zebra wombat\n"),
        ("dict.txt", "a\ncat\ndog\nthe\n"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

#[test]
fn spell_matches_the_system_shell() {
    let p = program(SPELL_DFG);
    let files = spell_files();
    let out = run(&p, bind_inputs(&p, &files, "").unwrap(), &mut Random::new(7), RunOptions::default()).unwrap();
    let got = out[&EdgeId(9)].to_text();
    assert_eq!(got, "sat\nwombat\nzebra\n");
    let dir = tempfile::tempdir().unwrap();
    for (n, c) in &files {
        std::fs::write(dir.path().join(n), c).unwrap();
    }
    if let Some(real) = system(&format!("cd {} && {SPELL}", dir.path().display()), "") {
        assert_eq!(got, real);
    }
}

/// Native commands agree with the installed tools on sample input.
#[test]
fn native_commands_agree_with_system_tools() {
    let text = "banana split\nApple pie\n\napple\n10 green\n9 bottles\n-3 x\nbanana split\nzz top\n";
    let cases = [
        "tr A-Z a-z",
        "tr -cs A-Za-z '\\n'",
        "tr -d aeiou",
        "tr -s 'a-z'",
        "sort",
        "sort -n",
        "sort -r",
        "sort -rn",
        "sort -u",
        "uniq",
        "uniq -c",
        "grep -c a",
        "grep -v a",
        "grep -i apple",
        "grep -x apple",
        "grep -w split",
        "grep -E 'an+a|pie'",
        "wc -l",
        "wc -w",
        "wc -c",
        "sed 's/a/A/g'",
        "sed -E 's/([a-z]+) ([a-z]+)/\\2 \\1/'",
        "cut -d ' ' -f 2",
        "cut -c 1-3",
        "head -n 3",
    ];
    for cmd in cases {
        let Some(real) = system(cmd, text) else { continue };
        let dfg = format!("input x1\noutput x2\nx2 <- `{cmd} <@i0 >@o0`(x1) :: seq :: none\n");
        let p = program(&dfg);
        let inputs = [(EdgeId(1), StreamValue::from_text(text))].into();
        let out = run(&p, inputs, &mut RoundRobin::new(), RunOptions::default()).unwrap();
        let mut got = out[&EdgeId(2)].to_text();
        if cmd.starts_with("wc") {
            got = got.trim().to_string();
            assert_eq!(got, real.trim(), "{cmd}");
        } else {
            assert_eq!(got, real, "{cmd}");
        }
    }
}

/// Random programs over small line streams: a mix of helpers and
/// commands with every consumption discipline.
fn arb_program() -> impl Strategy<Value = DfgProgram> {
    let op = (0u8..12, 1usize..4);
    (1usize..4, prop::collection::vec(op, 1..7)).prop_map(|(n_in, ops)| {
        let mut text = String::new();
        let mut next = 1u32;
        let mut open: Vec<u32> = Vec::new();
        for _ in 0..n_in {
            text.push_str(&format!("input x{next}\n"));
            open.push(next);
            next += 1;
        }
        let mut body = String::new();
        for (kind, k) in ops {
            let x = open.remove(0);
            let mut fresh = || {
                next += 1;
                next - 1
            };
            let two = |open: &mut Vec<u32>| (!open.is_empty()).then(|| open.remove(0));
            let unary = |cmd: &str, y: u32| format!("x{y} <- `{cmd} <@i0 >@o0`(x{x})\n");
            match kind {
                0 => {
                    let y = fresh();
                    body.push_str(&format!("x{y} <- relay(x{x})\n"));
                    open.push(y);
                }
                1 | 2 => {
                    let outs: Vec<u32> = (0..k).map(|_| fresh()).collect();
                    let h = if kind == 1 { "split" } else { "tee" };
                    let list: Vec<String> = outs.iter().map(|o| format!("x{o}")).collect();
                    body.push_str(&format!("{} <- {h}(x{x})\n", list.join(",")));
                    open.extend(outs);
                }
                3 => {
                    let mut ins = vec![x];
                    while ins.len() < k && !open.is_empty() {
                        ins.push(open.remove(0));
                    }
                    let y = fresh();
                    let list: Vec<String> = ins.iter().map(|o| format!("x{o}")).collect();
                    body.push_str(&format!("x{y} <- cat({})\n", list.join(",")));
                    open.push(y);
                }
                4..=8 => {
                    let cmd = ["tr a-z A-Z", "sort", "uniq", "grep a", "wc -l"][kind as usize - 4];
                    let y = fresh();
                    body.push_str(&unary(cmd, y));
                    open.push(y);
                }
                _ => {
                    let Some(z) = two(&mut open) else {
                        let y = fresh();
                        body.push_str(&unary("sort -r", y));
                        open.push(y);
                        continue;
                    };
                    let y = fresh();
                    let line = match kind {
                        9 => format!("x{y} <- `sort -m @i0 @i1 >@o0`(x{x},x{z})\n"),
                        10 => format!("x{y} <- `paste -d: @i0 @i1 >@o0`(x{x},x{z})\n"),
                        _ => format!("x{y} <- `grep -vx -f @i0 <@i1 >@o0`(x{x},x{z})\n"),
                    };
                    body.push_str(&line);
                    open.push(y);
                }
            }
        }
        for o in &open {
            text.push_str(&format!("output x{o}\n"));
        }
        text.push_str(&body);
        program(&text)
    })
}

fn arb_inputs(n: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    let line = prop::sample::select(vec!["a", "b", "ab", "c a", "", "b"]).prop_map(str::to_string);
    prop::collection::vec(prop::collection::vec(line, 0..8), n)
}

fn with_inputs() -> impl Strategy<Value = (DfgProgram, BTreeMap<EdgeId, StreamValue>)> {
    arb_program().prop_flat_map(|p| {
        let n = p.inputs.len();
        (Just(p), arb_inputs(n)).prop_map(|(p, vals)| {
            let m = p
                .inputs
                .iter()
                .zip(vals)
                .map(|(e, v)| (*e, StreamValue::closed(v)))
                .collect();
            (p, m)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn final_outputs_do_not_depend_on_the_schedule((p, inputs) in with_inputs()) {
        let reference = run(&p, inputs.clone(), &mut RoundRobin::new(), RunOptions::default()).unwrap();
        let mut schedulers: Vec<Box<dyn Scheduler>> = vec![Box::new(Lifo), Box::new(Fifo)];
        for seed in 0..8 {
            schedulers.push(Box::new(Random::new(seed)));
        }
        for s in &mut schedulers {
            let out = run(&p, inputs.clone(), s.as_mut(), RunOptions::default()).unwrap();
            prop_assert_eq!(&out, &reference);
        }
    }

    #[test]
    fn completion_holds_at_every_step((p, inputs) in with_inputs(), seed in any::<u64>(), block in 1usize..4) {
        for split in [SplitPolicy::Balanced, SplitPolicy::Eager { block }] {
            let opts = RunOptions { split, check_each_step: true, ..RunOptions::default() };
            let st = run_to_end(&p, inputs.clone(), &mut Random::new(seed), opts).unwrap();
            check_completion(&p, &st).unwrap();
            for (e, v) in &st.gamma {
                prop_assert!(v.closed, "edge {} left open", e);
                prop_assert!(st.consumed(*e).is_prefix_of(v));
            }
        }
    }

    #[test]
    fn split_policy_does_not_change_cat_of_split(vals in prop::collection::vec("[a-c]{0,2}", 0..12), m in 1usize..5, block in 1usize..4) {
        let outs: Vec<String> = (0..m).map(|i| format!("x{}", i + 2)).collect();
        let cat = format!("x{}", m + 2);
        let text = format!(
            "input x1\noutput {cat}\n{} <- split(x1)\n{cat} <- cat({})\n",
            outs.join(","),
            outs.join(",")
        );
        let p = program(&text);
        for split in [SplitPolicy::Balanced, SplitPolicy::Eager { block }] {
            let inputs = [(EdgeId(1), StreamValue::closed(vals.clone()))].into();
            let opts = RunOptions { split, ..RunOptions::default() };
            let out = run(&p, inputs, &mut Random::new(1), opts).unwrap();
            prop_assert_eq!(&out[&EdgeId(m as u32 + 2)].elements, &vals);
        }
    }
}

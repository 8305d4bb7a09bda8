use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::annotations::Registry;
use crate::interp::{bind_inputs, StreamValue};
use crate::odfm::{parse_program, EdgeId};
use crate::testkit;

fn program(text: &str) -> DfgProgram {
    parse_program(text, &Registry::builtin()).unwrap()
}

fn lines(v: &[&str]) -> StreamValue {
    StreamValue::closed(v.iter().map(|s| s.to_string()).collect())
}

fn same_outputs(a: &DfgProgram, b: &DfgProgram, inputs: &BTreeMap<EdgeId, StreamValue>) {
    assert_eq!(testkit::outputs(a, inputs), testkit::outputs(b, inputs), "\n{a}\n---\n{b}");
}

fn config(width: usize, enable_concat_split: bool) -> OptimizerConfig {
    OptimizerConfig {
        width,
        enable_concat_split,
        ..OptimizerConfig::default()
    }
}

const SPELL: &str = "\
input x1 file:f1.md
input x2 file:f2.md
input x3 file:dict.txt
output x9 stdout
x4 <- `cat @i0 @i1 >@o0`(x1,x2)
x5 <- `tr A-Z a-z <@i0 >@o0`(x4)
x6 <- `tr -cs A-Za-z '\\n' <@i0 >@o0`(x5)
x7 <- `sort <@i0 >@o0`(x6)
x8 <- `uniq <@i0 >@o0`(x7)
x9 <- `grep -vx -f @i0 - <@i1 >@o0`(x3,x8)
";

fn spell_inputs(p: &DfgProgram) -> BTreeMap<EdgeId, StreamValue> {
    let files: BTreeMap<String, String> = [
        ("f1.md", "The cat sat.\nA dog, a CAT!\nzebra\n"),
        ("f2.md", "zebra wombat\nthe end\n"),
        ("dict.txt", "a\ncat\ndog\nthe\n"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    bind_inputs(p, &files, "").unwrap()
}

macro_rules! rule_oracle {
    ($name:ident, $rule:expr, $seed:expr) => {
        #[test]
        fn $name() {
            let mut rng = ChaCha8Rng::seed_from_u64($seed);
            let n = testkit::check_rule(&mut rng, $rule, 100).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(n, 100);
        }
    };
}

rule_oracle!(relay_preserves_outputs, Rule::Relay, 1);
rule_oracle!(split_split_preserves_outputs, Rule::SplitSplit, 2);
rule_oracle!(concat_concat_preserves_outputs, Rule::ConcatConcat, 3);
rule_oracle!(split_concat_preserves_outputs, Rule::SplitConcat, 4);
rule_oracle!(tee_concat_preserves_outputs, Rule::TeeConcat, 5);
rule_oracle!(one_concat_preserves_outputs, Rule::OneConcat, 6);
rule_oracle!(one_split_preserves_outputs, Rule::OneSplit, 7);
rule_oracle!(concat_split_preserves_outputs, Rule::ConcatSplit, 8);
rule_oracle!(parallel_preserves_outputs, Rule::Parallel, 9);
rule_oracle!(sequential_consumption_preserves_outputs, Rule::SequentialConsumption, 10);

const PIPE: &str = "\
input x1
output x3
x2 <- `tr a-z A-Z <@i0 >@o0`(x1)
x3 <- `sort <@i0 >@o0`(x2)
";

#[test]
fn relay_round_trip_restores_the_census() {
    let p = program(PIPE);
    for e in p.edges() {
        let (q, r) = insert_relay(&p, e).unwrap();
        assert_eq!(q.nodes.len(), p.nodes.len() + 1);
        let back = remove_relay(&q, r).unwrap();
        assert_eq!(back.census(), p.census());
        assert_eq!(back.inputs, p.inputs);
        assert_eq!(back.outputs, p.outputs);
    }
}

#[test]
fn relay_between_input_and_output_stays() {
    let p = program("input x1\noutput x2\nx2 <- relay(x1)\n");
    let id = *p.nodes.keys().next().unwrap();
    assert!(remove_relay(&p, id).is_err());
}

#[test]
fn split_and_concat_rewrites_invert() {
    let p = program(PIPE);
    let inputs = BTreeMap::from([(EdgeId(1), lines(&["b", "a", "c", "ab", "", "ba"]))]);
    let (q, r) = insert_relay(&p, EdgeId(2)).unwrap();
    let (q, split, cat) = split_concat(&q, r, 4).unwrap();
    same_outputs(&p, &q, &inputs);

    let s2 = split_split(&q, split, 1).unwrap();
    same_outputs(&p, &s2, &inputs);
    let outer = s2
        .nodes
        .iter()
        .find(|(_, n)| n.is_helper(Helper::Split) && s2.producer(n.inputs[0]).is_none_or(|w| !s2.nodes[&w].is_helper(Helper::Split)))
        .map(|(id, _)| *id)
        .unwrap();
    assert_eq!(merge_split_split(&s2, outer).unwrap().census(), q.census());

    let c2 = concat_concat(&q, cat, 3).unwrap();
    same_outputs(&p, &c2, &inputs);
    let outer = c2
        .nodes
        .iter()
        .find(|(_, n)| n.is_helper(Helper::Cat) && c2.consumer(n.outputs[0]).is_none_or(|w| !c2.nodes[&w].is_helper(Helper::Cat)))
        .map(|(id, _)| *id)
        .unwrap();
    assert_eq!(merge_concat_concat(&c2, outer).unwrap().census(), q.census());

    let back = merge_split_concat(&q, split).unwrap();
    assert_eq!(back.census()["relay"], 1);
    assert_eq!(remove_relay(&back, r).unwrap().census(), p.census());
}

#[test]
fn one_way_helpers_become_relays_and_back() {
    let p = program(PIPE);
    let (q, r) = insert_relay(&p, EdgeId(2)).unwrap();
    let c = relay_to_one_concat(&q, r).unwrap();
    assert!(c.nodes[&r].is_helper(Helper::Cat));
    assert!(one_concat(&c, r).unwrap().nodes[&r].is_helper(Helper::Relay));
    let s = relay_to_one_split(&q, r).unwrap();
    assert!(s.nodes[&r].is_helper(Helper::Split));
    assert!(one_split(&s, r).unwrap().nodes[&r].is_helper(Helper::Relay));
    assert!(one_concat(&q, r).is_err());
}

#[test]
fn tee_concat_round_trip() {
    let p = program(
        "input x1\ninput x2\noutput x4\noutput x5\nx3 <- cat(x1,x2)\nx4,x5 <- tee(x3)\n",
    );
    let cat = p.producer(EdgeId(3)).unwrap();
    let tee = p.consumer(EdgeId(3)).unwrap();
    let q = tee_concat(&p, cat, tee).unwrap();
    assert_eq!(q.census()["tee"], 2);
    assert_eq!(q.census()["cat"], 2);
    let inputs = BTreeMap::from([(EdgeId(1), lines(&["a", "b"])), (EdgeId(2), lines(&["c"]))]);
    same_outputs(&p, &q, &inputs);
    let cats: Vec<NodeId> = q.nodes.iter().filter(|(_, n)| n.is_helper(Helper::Cat)).map(|(id, _)| *id).collect();
    let back = merge_tee_concat(&q, &cats).unwrap();
    assert_eq!(back.census(), p.census());
    same_outputs(&p, &back, &inputs);
}

#[test]
fn concat_split_requires_equal_arity() {
    let p = program("input x1\ninput x2\noutput x4\noutput x5\noutput x6\nx3 <- cat(x1,x2)\nx4,x5,x6 <- split(x3)\n");
    let cat = p.producer(EdgeId(3)).unwrap();
    let split = p.consumer(EdgeId(3)).unwrap();
    assert!(matches!(
        concat_split(&p, cat, split),
        Err(TransformError::ArityMismatch { fan_in: 2, fan_out: 3 })
    ));
}

#[test]
fn parallel_rejects_barriers_and_missing_cats() {
    let registry = Registry::builtin();
    let p = program("input x1\noutput x3\nx2 <- cat(x1)\nx3 <- `sha1sum <@i0 >@o0`(x2)\n");
    let cat = p.producer(EdgeId(2)).unwrap();
    let f = p.consumer(EdgeId(2)).unwrap();
    assert!(matches!(apply_parallel(&p, cat, f, &registry), Err(TransformError::NotDataParallel(_))));
    let p = program("input x1\noutput x3\nx2 <- relay(x1)\nx3 <- `sort <@i0 >@o0`(x2)\n");
    let r = p.producer(EdgeId(2)).unwrap();
    let f = p.consumer(EdgeId(2)).unwrap();
    assert!(matches!(
        apply_parallel(&p, r, f, &registry),
        Err(TransformError::MissingCatPredecessor(_))
    ));
}

#[test]
fn rewrites_only_touch_the_matched_nodes() {
    let p = program(SPELL);
    let registry = Registry::builtin();
    let sort = p.consumer(EdgeId(6)).unwrap();
    let (q, r) = insert_relay(&p, EdgeId(6)).unwrap();
    let (q, _, cat) = split_concat(&q, r, 3).unwrap();
    let after = apply_parallel(&q, cat, sort, &registry).unwrap();
    for (id, n) in &q.nodes {
        if *id != cat && *id != sort {
            assert_eq!(after.nodes.get(id), Some(n), "{id} changed");
        }
    }
}

#[test]
fn spell_width_two_has_the_expected_shape() {
    let p = program(SPELL);
    let o = optimize_report(&p, &Registry::builtin(), config(2, true)).unwrap();
    let q = &o.program;
    let census = q.census();
    assert_eq!(census.get("tr"), Some(&4), "{q}");
    assert_eq!(census.get("sort"), Some(&3), "{q}");
    assert_eq!(census.get("uniq"), Some(&2), "{q}");
    assert_eq!(census.get("grep"), Some(&2), "{q}");
    let merges = q.nodes.values().filter(|n| n.as_command().is_some_and(|c| c.label() == "sort -m @i0 @i1"));
    assert_eq!(merges.count(), 1, "{q}");
    assert!(!has_cat_split_pair(q), "{q}");
    assert!(o.parallelized >= 5);
    same_outputs(&p, q, &spell_inputs(&p));
    assert_eq!(testkit::outputs(q, &spell_inputs(q))[&EdgeId(9)].to_text(), "end\nsat\nwombat\nzebra\n");
}

#[test]
fn optimized_spell_matches_at_many_widths() {
    let p = program(SPELL);
    let inputs = spell_inputs(&p);
    for width in 1..=8 {
        for split in [true, false] {
            let q = optimize(&p, &Registry::builtin(), config(width, split)).unwrap();
            same_outputs(&p, &q, &inputs);
        }
    }
}

#[test]
fn barriers_are_left_alone() {
    let p = program("input x1\noutput x3\nx2 <- `sha1sum <@i0 >@o0`(x1)\nx3 <- `col -b <@i0 >@o0`(x2)\n");
    let q = optimize(&p, &Registry::builtin(), config(8, true)).unwrap();
    assert_eq!(q, p);
}

#[test]
fn width_one_adds_no_copies() {
    let p = program(PIPE);
    let q = optimize(&p, &Registry::builtin(), config(1, true)).unwrap();
    assert_eq!(q.census(), p.census());
}

#[test]
fn concat_split_switch_controls_the_normal_form() {
    let p = program("input x1\noutput x3\nx2 <- `tr a-z A-Z <@i0 >@o0`(x1)\nx3 <- `grep A <@i0 >@o0`(x2)\n");
    let registry = Registry::builtin();
    let with = optimize(&p, &registry, config(4, true)).unwrap();
    assert!(!has_cat_split_pair(&with), "{with}");
    let without = optimize(&p, &registry, config(4, false)).unwrap();
    assert!(has_cat_split_pair(&without), "{without}");
    let inputs = BTreeMap::from([(EdgeId(1), lines(&["a", "b", "ab", "c", "ba", "a"]))]);
    same_outputs(&p, &with, &inputs);
    same_outputs(&p, &without, &inputs);
}

#[test]
fn parallel_line_count_sums_partial_counts() {
    let p = program("input x1\noutput x2\nx2 <- `wc -l <@i0 >@o0`(x1)\n");
    let q = optimize(&p, &Registry::builtin(), config(2, true)).unwrap();
    assert_eq!(q.nodes.values().filter(|n| n.as_command().is_some_and(|c| c.name() == "wc")).count(), 2);
    let inputs = BTreeMap::from([(EdgeId(1), lines(&["a", "b", "c", "d", "e"]))]);
    assert_eq!(testkit::outputs(&q, &inputs)[&EdgeId(2)].to_text(), "5\n");
}

#[test]
fn budget_exhaustion_returns_the_best_program() {
    let p = program(SPELL);
    let cfg = OptimizerConfig {
        max_passes: 3,
        ..config(4, true)
    };
    match optimize(&p, &Registry::builtin(), cfg) {
        Err(TransformError::PassBudgetExceeded { passes: 3, best }) => {
            crate::odfm::validate(&best).unwrap();
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn optimizer_preserves_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let registry = Registry::builtin();
    for i in 0..150 {
        let p = testkit::random_pipeline(&mut rng);
        let q = optimize(&p, &registry, config(1 + i % 5, i % 2 == 0)).unwrap();
        let inputs = testkit::random_inputs(&mut rng, &p, 15);
        same_outputs(&p, &q, &inputs);
    }
}

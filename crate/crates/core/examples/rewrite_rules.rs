//! Applies the parallelizing rewrites to a two-stage pipeline by hand,
//! printing the graph after each one, then lets the optimizer do it.

use odfc::annotations::Registry;
use odfc::odfm::parse_program;
use odfc::testkit::outputs;
use odfc::transform::{apply_parallel, insert_relay, optimize_report, split_concat, OptimizerConfig};
use odfc::interp::StreamValue;

const PROGRAM: &str = "input x1 file:in
output x3 stdout
x2 <- `grep o <@i0 >@o0`(x1)
x3 <- `sort <@i0 >@o0`(x2)
";

fn main() {
    let registry = Registry::builtin();
    let p = parse_program(PROGRAM, &registry).unwrap();
    println!("original:\n{p}");

    let grep_input = p.inputs[0];
    let grep = p.consumer(grep_input).unwrap();
    let (q, relay) = insert_relay(&p, grep_input).unwrap();
    println!("relay inserted:\n{q}");
    let (q, _split, cat) = split_concat(&q, relay, 3).unwrap();
    println!("relay replaced by split and cat:\n{q}");
    let q = apply_parallel(&q, cat, grep, &registry).unwrap();
    println!("grep parallelized:\n{q}");

    let input = [(p.inputs[0], StreamValue::from_text("one\ntwo\nfour\nsix\nzero\n"))].into();
    assert_eq!(outputs(&p, &input), outputs(&q, &input));

    let config = OptimizerConfig {
        width: 3,
        ..OptimizerConfig::default()
    };
    let best = optimize_report(&p, &registry, config).unwrap();
    let names: Vec<&str> = best.rewrites.iter().map(|r| r.name()).collect();
    println!("optimizer ({} commands parallelized): {}", best.parallelized, names.join(", "));
    println!("{}", best.program);
    assert_eq!(outputs(&p, &input), outputs(&best.program, &input));
}

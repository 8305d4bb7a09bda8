//! Runs a small dataflow program under several schedulers and shows that
//! they agree, then prints the step trace of one run.

use std::collections::BTreeMap;

use odfc::annotations::Registry;
use odfc::interp::{check_completion, run_to_end, Random, RoundRobin, RunOptions, StreamValue};
use odfc::odfm::parse_program;

const PROGRAM: &str = "input x1 file:words
input x2 file:stop
output x5 stdout
x3 <- `sort <@i0 >@o0`(x1)
x4 <- `uniq <@i0 >@o0`(x3)
x5 <- `grep -vx -f @i0 - <@i1 >@o0`(x2, x4)
";

fn main() {
    let p = parse_program(PROGRAM, &Registry::builtin()).expect("valid program");
    let inputs = BTreeMap::from([
        (p.inputs[0], StreamValue::from_text("pear\napple\nfig\napple\nkiwi\n")),
        (p.inputs[1], StreamValue::from_text("fig\n")),
    ]);

    for seed in 0..3 {
        let state = run_to_end(&p, inputs.clone(), &mut Random::new(seed), RunOptions::default()).unwrap();
        check_completion(&p, &state).expect("every node produced what it should");
        let out = &state.outputs(&p)[&p.outputs[0]];
        println!("seed {seed}: {} steps, output {:?}", state.steps, out.to_text());
    }

    let options = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    let state = run_to_end(&p, inputs, &mut RoundRobin::new(), options).unwrap();
    for line in &state.trace {
        println!("{line}");
    }
}

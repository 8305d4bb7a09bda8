//! Compiles the spell-checking script at width 2, prints the result and
//! checks it against the original under `sh`.

use std::process::Command;

use odfc::annotations::Registry;
use odfc::translate::{compile_script, CompileOptions};

const SPELL: &str = "cat f1.md f2.md | tr A-Z a-z | tr -cs A-Za-z '\\n' | sort | uniq | grep -vx -f dict.txt - > out ; cat out | wc -l | sed 's/$/ mispelled words!/'\n";

fn run(dir: &std::path::Path, script: &str) -> String {
    let out = Command::new("sh").arg("-c").arg(script).current_dir(dir).output().unwrap();
    String::from_utf8_lossy(&out.stdout).into_owned() + &std::fs::read_to_string(dir.join("out")).unwrap()
}

fn main() {
    let opts = CompileOptions {
        width: 2,
        ..CompileOptions::default()
    };
    let compiled = compile_script(SPELL, &Registry::builtin(), &opts).unwrap();
    println!("{}", compiled.script);
    for f in &compiled.fragments {
        eprintln!("{} command(s) parallelized in: {}", f.parallelized, f.source);
    }

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f1.md"), "The quick brown Fox\njumps over the lazy dog.\n").unwrap();
    std::fs::write(dir.path().join("f2.md"), "A fox, a dog; and a wombat!\n").unwrap();
    std::fs::write(dir.path().join("dict.txt"), "a\nand\nbrown\ndog\nfox\nover\nthe\n").unwrap();
    let expected = run(dir.path(), SPELL);
    let got = run(dir.path(), &compiled.script);
    assert_eq!(expected, got);
    eprint!("both scripts report:\n{got}");
}

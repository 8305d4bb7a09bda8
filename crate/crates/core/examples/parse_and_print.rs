//! Parses a script and prints its tree, its normalized text and the
//! dataflow regions the compiler would work on.

use odfc::annotations::Registry;
use odfc::shell_ast::{parse_script, print};
use odfc::translate::translate;

fn main() {
    let src = "cat notes.txt | tr A-Z a-z | sort | uniq -c > counts &\nls -l ; grep -c todo notes.txt\nfor f in *.md; do wc -l \"$f\"; done\n";
    let ast = parse_script(src).expect("valid script").expect("non-empty script");
    println!("{ast:#?}");
    println!("normalized: {}", print(&ast));

    let translated = translate(&ast, &Registry::builtin());
    for (program, mode) in translated.programs() {
        println!("\nregion ({mode:?}):");
        print!("{program}");
    }
}

use super::{ShellAst, SimpleCommand};

/// Renders an AST as single-line shell text.
pub fn print(ast: &ShellAst) -> String {
    let mut out = String::new();
    write_ast(ast, &mut out);
    out
}

fn write_simple(cmd: &SimpleCommand, out: &mut String) {
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push(' ');
        }
        first = false;
    };
    for (name, value) in &cmd.assignments {
        sep(out);
        out.push_str(name);
        out.push('=');
        out.push_str(&value.to_string());
    }
    if !cmd.word.is_empty() {
        sep(out);
        out.push_str(&cmd.word.to_string());
    }
    for r in &cmd.redirs {
        sep(out);
        out.push_str(&r.to_string());
    }
}

fn ends_with_ampersand(ast: &ShellAst) -> bool {
    match ast {
        ShellAst::Seq(_, b) => ends_with_ampersand(b),
        other => other.is_backgrounded(),
    }
}

fn write_ast(ast: &ShellAst, out: &mut String) {
    match ast {
        ShellAst::Simple(cmd) => write_simple(cmd, out),
        ShellAst::Pipeline {
            commands,
            background,
        } => {
            for (i, c) in commands.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_ast(c, out);
            }
            if *background {
                out.push_str(" &");
            }
        }
        ShellAst::Background(inner) => {
            write_ast(inner, out);
            out.push_str(" &");
        }
        ShellAst::Subshell(inner) => {
            out.push_str("( ");
            write_ast(inner, out);
            out.push_str(" )");
        }
        ShellAst::Seq(a, b) => {
            write_ast(a, out);
            if ends_with_ampersand(a) {
                out.push(' ');
            } else {
                out.push_str("; ");
            }
            write_ast(b, out);
        }
        ShellAst::And(a, b) => {
            write_ast(a, out);
            out.push_str(" && ");
            write_ast(b, out);
        }
        ShellAst::Or(a, b) => {
            write_ast(a, out);
            out.push_str(" || ");
            write_ast(b, out);
        }
        ShellAst::Not(inner) => {
            out.push_str("! ");
            write_ast(inner, out);
        }
        ShellAst::Opaque(o) => out.push_str(&o.source),
    }
}

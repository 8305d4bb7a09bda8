//! Translation of POSIX basic and extended regular expressions into the
//! syntax of the `regex` crate.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Basic,
    Extended,
}

/// Copies a bracket expression starting at `chars[i] == '['`; returns the
/// translated text and the index after the closing `]`.
fn bracket(chars: &[char], mut i: usize) -> Result<(String, usize), String> {
    let mut out = String::from("[");
    i += 1;
    if chars.get(i) == Some(&'^') {
        out.push('^');
        i += 1;
    }
    let mut first = true;
    loop {
        let Some(&c) = chars.get(i) else {
            return Err("unterminated bracket expression".to_string());
        };
        if c == ']' && !first {
            out.push(']');
            return Ok((out, i + 1));
        }
        first = false;
        if c == '[' && matches!(chars.get(i + 1), Some(':') | Some('=') | Some('.')) {
            let delim = chars[i + 1];
            let start = i + 2;
            let mut j = start;
            while j + 1 < chars.len() && !(chars[j] == delim && chars[j + 1] == ']') {
                j += 1;
            }
            if j + 1 >= chars.len() {
                return Err("unterminated character class".to_string());
            }
            let name: String = chars[start..j].iter().collect();
            match delim {
                ':' => out.push_str(&format!("[:{name}:]")),
                _ => {
                    for ch in name.chars() {
                        push_escaped_in_class(&mut out, ch);
                    }
                }
            }
            i = j + 2;
            continue;
        }
        if c == '-' {
            // a range dash stays a dash; a leading or trailing one is literal
            let trailing = chars.get(i + 1) == Some(&']');
            if out.ends_with('[') || out.ends_with("[^") || trailing {
                out.push_str("\\-");
            } else {
                out.push('-');
            }
            i += 1;
            continue;
        }
        push_escaped_in_class(&mut out, c);
        i += 1;
    }
}

fn push_escaped_in_class(out: &mut String, c: char) {
    if matches!(c, '\\' | '[' | ']' | '&' | '~' | '^' | '-') {
        out.push('\\');
    }
    out.push(c);
}

fn push_literal(out: &mut String, c: char) {
    out.push_str(&regex::escape(&c.to_string()));
}

/// Translates `pattern` into `regex` crate syntax.
pub fn translate(pattern: &str, dialect: Dialect) -> Result<String, String> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    // true where a `*` would be literal (start of pattern or group, after an
    // anchor or alternation)
    let mut at_start = true;
    while i < chars.len() {
        let c = chars[i];
        let was_start = at_start;
        at_start = false;
        match c {
            '[' => {
                let (b, next) = bracket(&chars, i)?;
                out.push_str(&b);
                i = next;
                continue;
            }
            '.' => out.push('.'),
            '^' => {
                if was_start || dialect == Dialect::Extended {
                    out.push('^');
                    at_start = true;
                } else {
                    out.push_str("\\^");
                }
            }
            '$' => {
                let at_end = i + 1 == chars.len()
                    || (dialect == Dialect::Basic
                        && chars.get(i + 1) == Some(&'\\')
                        && matches!(chars.get(i + 2), Some(')') | Some('|')));
                if at_end || dialect == Dialect::Extended {
                    out.push('$');
                } else {
                    out.push_str("\\$");
                }
            }
            '*' => {
                if was_start {
                    out.push_str("\\*");
                } else {
                    out.push('*');
                }
            }
            '\\' => {
                let Some(&n) = chars.get(i + 1) else {
                    return Err("trailing backslash".to_string());
                };
                i += 2;
                match (dialect, n) {
                    (Dialect::Basic, '(') => {
                        out.push('(');
                        at_start = true;
                    }
                    (Dialect::Basic, ')') => out.push(')'),
                    (Dialect::Basic, '|') => {
                        out.push('|');
                        at_start = true;
                    }
                    (Dialect::Basic, '{') => {
                        let close = (i..chars.len().saturating_sub(1))
                            .find(|&j| chars[j] == '\\' && chars[j + 1] == '}')
                            .ok_or("unterminated interval")?;
                        let body: String = chars[i..close].iter().collect();
                        out.push('{');
                        out.push_str(&body);
                        out.push('}');
                        i = close + 2;
                    }
                    (Dialect::Basic, '+') | (Dialect::Basic, '?') => out.push(n),
                    (_, '<') | (_, '>') => out.push_str("\\b"),
                    (_, 'w') | (_, 'W') | (_, 's') | (_, 'S') | (_, 'b') | (_, 'B') => {
                        out.push('\\');
                        out.push(n);
                    }
                    (_, d) if d.is_ascii_digit() => {
                        return Err("back-references are not supported".to_string())
                    }
                    (_, 'n') => out.push_str("\\n"),
                    (_, 't') => out.push_str("\\t"),
                    (_, other) => push_literal(&mut out, other),
                }
                continue;
            }
            '+' | '?' | '|' | '(' | ')' | '{' | '}' if dialect == Dialect::Basic => {
                push_literal(&mut out, c)
            }
            '(' | '|' => {
                out.push(c);
                at_start = true;
            }
            '{' => {
                // `{` not starting a valid interval is literal in ERE
                let rest: String = chars[i..].iter().collect();
                let is_interval = rest
                    .find('}')
                    .map(|end| {
                        let body = &rest[1..end];
                        !body.is_empty() && body.chars().all(|ch| ch.is_ascii_digit() || ch == ',')
                    })
                    .unwrap_or(false);
                if is_interval && !was_start {
                    out.push('{');
                } else {
                    out.push_str("\\{");
                }
            }
            ')' | '}' | '+' | '?' => out.push(c),
            other => push_literal(&mut out, other),
        }
        i += 1;
    }
    Ok(out)
}

/// True when the pattern contains no characters special in either dialect.
pub fn is_literal(pattern: &str) -> bool {
    !pattern
        .chars()
        .any(|c| matches!(c, '.' | '[' | ']' | '\\' | '*' | '^' | '$' | '+' | '?' | '(' | ')' | '{' | '}' | '|'))
}

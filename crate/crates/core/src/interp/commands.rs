//! Native line-oriented implementations of the supported commands.
//!
//! Each command is a [`LineFilter`] over the concatenation of its data
//! inputs, or a multi-input [`Transducer`] for commands that read several
//! streams side by side (`paste`, `comm`, `sort -m`, `tee`).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use regex::{Regex, RegexBuilder};

use super::regex_compat::{self, Dialect};
use super::transducer::{Emission, Transducer};

/// A command argument after placeholder resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Word {
    Text(String),
    Input(usize),
}

impl Word {
    fn text(&self) -> Option<&str> {
        match self {
            Word::Text(s) => Some(s),
            Word::Input(_) => None,
        }
    }
}

/// Single-stream command: configuration lines first, then data lines.
pub trait LineFilter: Send {
    fn config(&mut self, _line: String) {}
    fn line(&mut self, line: String, out: &mut Vec<String>);
    fn end(&mut self, _out: &mut Vec<String>) {}
}

struct Parsed {
    flags: Vec<char>,
    values: Vec<(char, Word)>,
    operands: Vec<Word>,
}

impl Parsed {
    fn has(&self, c: char) -> bool {
        self.flags.contains(&c)
    }

    fn value(&self, c: char) -> Option<&Word> {
        self.values.iter().rev().find(|(k, _)| *k == c).map(|(_, w)| w)
    }

    fn text_value(&self, c: char) -> Result<Option<&str>, String> {
        match self.value(c) {
            None => Ok(None),
            Some(Word::Text(s)) => Ok(Some(s)),
            Some(Word::Input(_)) => Err(format!("-{c} does not take a stream")),
        }
    }

    fn only(&self, allowed: &str) -> Result<(), String> {
        match self.flags.iter().find(|c| !allowed.contains(**c)) {
            Some(c) => Err(format!("unsupported flag -{c}")),
            None => Ok(()),
        }
    }
}

/// Short-option parsing with permutation; `with_value` lists the options
/// that take an argument.
fn getopt(words: &[Word], with_value: &str) -> Result<Parsed, String> {
    let mut p = Parsed {
        flags: Vec::new(),
        values: Vec::new(),
        operands: Vec::new(),
    };
    let mut i = 0;
    let mut only_operands = false;
    while i < words.len() {
        let w = &words[i];
        i += 1;
        let s = match w {
            Word::Text(s) if !only_operands && s.starts_with('-') && s.len() > 1 => s,
            _ => {
                p.operands.push(w.clone());
                continue;
            }
        };
        if s == "--" {
            only_operands = true;
            continue;
        }
        if s.starts_with("--") {
            return Err(format!("unsupported option {s}"));
        }
        let chars: Vec<char> = s.chars().skip(1).collect();
        for (j, &c) in chars.iter().enumerate() {
            if with_value.contains(c) {
                let rest: String = chars[j + 1..].iter().collect();
                let v = if !rest.is_empty() {
                    Word::Text(rest)
                } else {
                    let v = words.get(i).cloned().ok_or(format!("-{c} needs a value"))?;
                    i += 1;
                    v
                };
                p.values.push((c, v));
                break;
            }
            p.flags.push(c);
        }
    }
    Ok(p)
}

fn no_operands(p: &Parsed, name: &str) -> Result<(), String> {
    if p.operands.iter().any(|w| matches!(w, Word::Text(s) if s != "-")) {
        return Err(format!("{name}: file operands are not supported"));
    }
    Ok(())
}

/// Builds a single-stream command.
pub fn build_filter(name: &str, words: &[Word]) -> Result<Box<dyn LineFilter>, String> {
    match name {
        "cat" => {
            let p = getopt(words, "")?;
            p.only("")?;
            no_operands(&p, name)?;
            Ok(Box::new(Identity))
        }
        "tr" => Ok(Box::new(Tr::new(words)?)),
        "sort" => {
            let p = getopt(words, "")?;
            p.only("nru")?;
            no_operands(&p, name)?;
            Ok(Box::new(Sort {
                key: SortKey::from(&p),
                lines: Vec::new(),
            }))
        }
        "uniq" => {
            let p = getopt(words, "")?;
            p.only("c")?;
            no_operands(&p, name)?;
            Ok(Box::new(Uniq {
                count: p.has('c'),
                last: None,
                n: 0,
            }))
        }
        "grep" => Ok(Box::new(Grep::new(words)?)),
        "wc" => {
            let p = getopt(words, "")?;
            p.only("lwc")?;
            no_operands(&p, name)?;
            let mode = match p.flags.as_slice() {
                [m] => *m,
                _ => return Err("wc: exactly one of -l, -w, -c is supported".into()),
            };
            Ok(Box::new(Wc { mode, n: 0 }))
        }
        "sed" => Ok(Box::new(Sed::new(words)?)),
        "cut" => Ok(Box::new(Cut::new(words)?)),
        "head" => {
            let p = getopt(words, "n")?;
            p.only("")?;
            no_operands(&p, name)?;
            let n = match p.text_value('n')? {
                Some(v) => v.parse().map_err(|_| format!("head: bad count {v}"))?,
                None => 10,
            };
            Ok(Box::new(Head { left: n }))
        }
        "bc" => {
            let p = getopt(words, "")?;
            p.only("")?;
            no_operands(&p, name)?;
            Ok(Box::new(Bc))
        }
        other => Err(format!("{other}: not supported by the interpreter")),
    }
}

/// A resolved command invocation as seen by a node.
pub struct Invocation<'a> {
    pub name: &'a str,
    pub words: &'a [Word],
    /// Configuration input indexes.
    pub configs: &'a BTreeSet<usize>,
    /// Data inputs in argument order (stdin where it is read).
    pub positional: Vec<usize>,
    /// Output indexes in argument order, standard output first.
    pub outputs: Vec<usize>,
}

/// Builds the transducer for a command node.
pub fn build(inv: &Invocation<'_>) -> Result<Box<dyn Transducer>, String> {
    let stdout = *inv.outputs.first().ok_or("command has no outputs")?;
    match inv.name {
        "tee" => {
            let p = getopt(inv.words, "")?;
            p.only("a")?;
            Ok(Box::new(Fanout {
                outputs: inv.outputs.clone(),
            }))
        }
        "paste" => {
            let p = getopt(inv.words, "d")?;
            p.only("")?;
            let delims = match p.text_value('d')? {
                Some(d) => paste_delims(d),
                None => vec!["\t".to_string()],
            };
            Ok(Box::new(Paste {
                side: SideBySide::new(&inv.positional),
                delims,
                out: stdout,
            }))
        }
        "comm" => {
            let p = getopt(inv.words, "")?;
            p.only("123")?;
            if inv.positional.len() != 2 {
                return Err("comm: needs exactly two inputs".into());
            }
            Ok(Box::new(Comm {
                side: SideBySide::new(&inv.positional),
                hide: [p.has('1'), p.has('2'), p.has('3')],
                out: stdout,
            }))
        }
        "sort" if getopt(inv.words, "")?.has('m') => {
            let p = getopt(inv.words, "")?;
            p.only("mnru")?;
            Ok(Box::new(Merge {
                side: SideBySide::new(&inv.positional),
                key: SortKey::from(&p),
                last: None,
                out: stdout,
            }))
        }
        name => {
            let data: Vec<Word> = inv
                .words
                .iter()
                .filter(|w| match w {
                    Word::Input(i) => inv.configs.contains(i),
                    Word::Text(_) => true,
                })
                .cloned()
                .collect();
            Ok(Box::new(Sequential {
                filter: build_filter(name, &data)?,
                configs: inv.configs.clone(),
                out: stdout,
            }))
        }
    }
}

/// Runs a [`LineFilter`] over its inputs in consumption order.
struct Sequential {
    filter: Box<dyn LineFilter>,
    configs: BTreeSet<usize>,
    out: usize,
}

impl Transducer for Sequential {
    fn feed(&mut self, input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        let Some(line) = element else { return };
        if self.configs.contains(&input) {
            self.filter.config(line);
            return;
        }
        let mut lines = Vec::new();
        self.filter.line(line, &mut lines);
        emit_lines(self.out, lines, out);
    }

    fn finish(&mut self, out: &mut Vec<Emission>) {
        let mut lines = Vec::new();
        self.filter.end(&mut lines);
        emit_lines(self.out, lines, out);
    }
}

fn emit_lines(idx: usize, lines: Vec<String>, out: &mut Vec<Emission>) {
    out.extend(lines.into_iter().map(|l| Emission::Line(idx, l)));
}

/// Splits text that may contain newlines into separate lines.
fn push_text(out: &mut Vec<String>, s: String) {
    if s.contains('\n') {
        out.extend(s.split('\n').map(str::to_string));
    } else {
        out.push(s);
    }
}

struct Identity;

impl LineFilter for Identity {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        out.push(line);
    }
}

// ---- tr ----

fn class_chars(name: &str) -> Option<Vec<char>> {
    let pred: fn(&u8) -> bool = match name {
        "alpha" => |c| c.is_ascii_alphabetic(),
        "digit" => |c| c.is_ascii_digit(),
        "alnum" => |c| c.is_ascii_alphanumeric(),
        "upper" => |c| c.is_ascii_uppercase(),
        "lower" => |c| c.is_ascii_lowercase(),
        "space" => |c| c.is_ascii_whitespace() || *c == 0x0b,
        "blank" => |c| *c == b' ' || *c == b'\t',
        "punct" => |c| c.is_ascii_punctuation(),
        "cntrl" => |c| c.is_ascii_control(),
        "print" => |c| (0x20..0x7f).contains(c),
        "graph" => |c| c.is_ascii_graphic(),
        "xdigit" => |c| c.is_ascii_hexdigit(),
        _ => return None,
    };
    Some((0u8..128).filter(pred).map(char::from).collect())
}

/// Expands a `tr` operand into its list of characters.
fn tr_set(spec: &str) -> Result<Vec<char>, String> {
    let chars: Vec<char> = spec.chars().collect();
    // first pass: escapes and classes; classes are never range endpoints
    let mut atoms: Vec<(char, bool)> = Vec::new();
    let mut expanded: Vec<Vec<char>> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '[' && chars.get(i + 1) == Some(&':') {
            let rest: String = chars[i + 2..].iter().collect();
            if let Some(end) = rest.find(":]") {
                let name = &rest[..end];
                let set = class_chars(name).ok_or(format!("tr: unknown class {name}"))?;
                expanded.push(set);
                atoms.push(('\0', true));
                i += 2 + name.chars().count() + 2;
                continue;
            }
        }
        if c == '\\' && i + 1 < chars.len() {
            let n = chars[i + 1];
            i += 2;
            let ch = match n {
                'n' => '\n',
                't' => '\t',
                'r' => '\r',
                'a' => '\x07',
                'b' => '\x08',
                'f' => '\x0c',
                'v' => '\x0b',
                '0'..='7' => {
                    let mut v = n.to_digit(8).unwrap_or(0);
                    let mut k = 0;
                    while k < 2 && i < chars.len() && chars[i].is_digit(8) {
                        v = v * 8 + chars[i].to_digit(8).unwrap_or(0);
                        i += 1;
                        k += 1;
                    }
                    char::from_u32(v).ok_or("tr: bad octal escape")?
                }
                other => other,
            };
            atoms.push((ch, false));
            expanded.push(vec![ch]);
            continue;
        }
        atoms.push((c, false));
        expanded.push(vec![c]);
        i += 1;
    }
    let mut out = Vec::new();
    let mut j = 0;
    while j < atoms.len() {
        let (a, is_class) = atoms[j];
        let dash = j + 2 < atoms.len() && atoms[j + 1] == ('-', false) && !atoms[j + 2].1;
        if !is_class && dash {
            let b = atoms[j + 2].0;
            if b < a {
                return Err(format!("tr: range {a}-{b} is reversed"));
            }
            out.extend(a..=b);
            j += 3;
            continue;
        }
        out.extend(expanded[j].iter().copied());
        j += 1;
    }
    Ok(out)
}

struct Tr {
    delete: Option<(HashSet<char>, bool)>,
    map: Option<(HashMap<char, char>, Option<char>)>,
    squeeze: Option<(HashSet<char>, bool)>,
    last: Option<char>,
    partial: String,
}

impl Tr {
    fn new(words: &[Word]) -> Result<Tr, String> {
        let p = getopt(words, "")?;
        p.only("cdsC")?;
        let complement = p.has('c') || p.has('C');
        let sets: Vec<&str> = p
            .operands
            .iter()
            .map(|w| w.text().ok_or("tr: operands must be literal"))
            .collect::<Result<_, _>>()?;
        let (delete_flag, squeeze_flag) = (p.has('d'), p.has('s'));
        let (set1, set2) = match sets.as_slice() {
            [a] => (tr_set(a)?, None),
            [a, b] => (tr_set(a)?, Some(tr_set(b)?)),
            _ => return Err("tr: needs one or two sets".into()),
        };
        let set = |v: &[char]| v.iter().copied().collect::<HashSet<char>>();
        let mut t = Tr {
            delete: None,
            map: None,
            squeeze: None,
            last: None,
            partial: String::new(),
        };
        match (delete_flag, squeeze_flag, &set2) {
            (true, false, None) => t.delete = Some((set(&set1), complement)),
            (true, true, Some(s2)) => {
                t.delete = Some((set(&set1), complement));
                t.squeeze = Some((set(s2), false));
            }
            (false, true, None) => t.squeeze = Some((set(&set1), complement)),
            (false, sq, Some(s2)) => {
                let Some(&fill) = s2.last() else {
                    return Err("tr: empty second set".into());
                };
                if complement {
                    let keep = set1.iter().map(|&c| (c, c)).collect();
                    t.map = Some((keep, Some(fill)));
                } else {
                    let mut m = HashMap::new();
                    for (k, &c) in set1.iter().enumerate() {
                        m.insert(c, *s2.get(k).unwrap_or(&fill));
                    }
                    t.map = Some((m, None));
                }
                if sq {
                    t.squeeze = Some((set(s2), false));
                }
            }
            _ => return Err("tr: unsupported combination of options".into()),
        }
        Ok(t)
    }

    fn put(&mut self, c: char, out: &mut Vec<String>) {
        if let Some((del, comp)) = &self.delete {
            if del.contains(&c) != *comp {
                return;
            }
        }
        let c = match &self.map {
            // complemented maps hold the characters that stay unchanged
            Some((m, Some(fill))) => {
                if m.contains_key(&c) {
                    c
                } else {
                    *fill
                }
            }
            Some((m, None)) => *m.get(&c).unwrap_or(&c),
            None => c,
        };
        if let Some((sq, comp)) = &self.squeeze {
            if sq.contains(&c) != *comp && self.last == Some(c) {
                return;
            }
        }
        self.last = Some(c);
        if c == '\n' {
            out.push(std::mem::take(&mut self.partial));
        } else {
            self.partial.push(c);
        }
    }
}

impl LineFilter for Tr {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        for c in line.chars() {
            self.put(c, out);
        }
        self.put('\n', out);
    }

    fn end(&mut self, out: &mut Vec<String>) {
        if !self.partial.is_empty() {
            out.push(std::mem::take(&mut self.partial));
        }
    }
}

// ---- sort ----

#[derive(Debug, Clone, Copy)]
struct SortKey {
    numeric: bool,
    reverse: bool,
    unique: bool,
}

impl SortKey {
    fn from(p: &Parsed) -> SortKey {
        SortKey {
            numeric: p.has('n'),
            reverse: p.has('r'),
            unique: p.has('u'),
        }
    }

    /// Comparison used for ordering; equal only for lines that are the same
    /// under the key (and, without `-u`, byte-identical).
    fn cmp(&self, a: &str, b: &str) -> Ordering {
        let mut c = if self.numeric {
            numeric_cmp(a, b)
        } else {
            a.as_bytes().cmp(b.as_bytes())
        };
        if c == Ordering::Equal && !self.unique {
            c = a.as_bytes().cmp(b.as_bytes());
        }
        if self.reverse {
            c.reverse()
        } else {
            c
        }
    }

    fn same(&self, a: &str, b: &str) -> bool {
        if self.numeric {
            numeric_cmp(a, b) == Ordering::Equal
        } else {
            a == b
        }
    }
}

/// Leading number of a line as (negative, integer digits, fraction digits),
/// normalized so that equal values compare equal.
fn numeric_prefix(s: &str) -> (bool, &str, &str) {
    let s = s.trim_start_matches([' ', '\t']);
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let int_len = s.bytes().take_while(u8::is_ascii_digit).count();
    let int = s[..int_len].trim_start_matches('0');
    let rest = &s[int_len..];
    let frac = match rest.strip_prefix('.') {
        Some(f) => {
            let n = f.bytes().take_while(u8::is_ascii_digit).count();
            f[..n].trim_end_matches('0')
        }
        None => "",
    };
    let zero = int.is_empty() && frac.is_empty();
    (neg && !zero, int, frac)
}

fn numeric_cmp(a: &str, b: &str) -> Ordering {
    let (na, ia, fa) = numeric_prefix(a);
    let (nb, ib, fb) = numeric_prefix(b);
    let magnitude = ia.len().cmp(&ib.len()).then(ia.cmp(ib)).then(fa.cmp(fb));
    match (na, nb) {
        (false, false) => magnitude,
        (true, true) => magnitude.reverse(),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
    }
}

struct Sort {
    key: SortKey,
    lines: Vec<String>,
}

impl LineFilter for Sort {
    fn line(&mut self, line: String, _out: &mut Vec<String>) {
        self.lines.push(line);
    }

    fn end(&mut self, out: &mut Vec<String>) {
        let key = self.key;
        let mut lines = std::mem::take(&mut self.lines);
        lines.sort_by(|a, b| key.cmp(a, b));
        for l in lines {
            if key.unique && out.last().is_some_and(|p: &String| key.same(p, &l)) {
                continue;
            }
            out.push(l);
        }
    }
}

// ---- uniq ----

struct Uniq {
    count: bool,
    last: Option<String>,
    n: usize,
}

impl LineFilter for Uniq {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        if self.last.as_deref() == Some(line.as_str()) {
            self.n += 1;
            return;
        }
        if self.count {
            if let Some(prev) = self.last.take() {
                out.push(format!("{:>7} {prev}", self.n));
            }
        } else {
            out.push(line.clone());
        }
        self.last = Some(line);
        self.n = 1;
    }

    fn end(&mut self, out: &mut Vec<String>) {
        if self.count {
            if let Some(prev) = self.last.take() {
                out.push(format!("{:>7} {prev}", self.n));
            }
        }
    }
}

// ---- grep ----

enum Matcher {
    Set(HashSet<String>),
    Regex(Regex),
    All,
    Nothing,
}

struct Grep {
    patterns: Vec<String>,
    fixed: bool,
    dialect: Dialect,
    icase: bool,
    whole_line: bool,
    word: bool,
    invert: bool,
    count: Option<usize>,
    matcher: Option<Matcher>,
}

impl Grep {
    fn new(words: &[Word]) -> Result<Grep, String> {
        let p = getopt(words, "ef")?;
        p.only("vxicFEGw")?;
        let mut patterns = Vec::new();
        let mut explicit = false;
        for (k, v) in &p.values {
            explicit = true;
            match (k, v) {
                ('e', Word::Text(s)) => patterns.extend(s.split('\n').map(str::to_string)),
                ('f', Word::Input(_)) => {}
                _ => return Err("grep: pattern files must be streams".into()),
            }
        }
        let mut operands = p.operands.iter();
        if !explicit {
            match operands.next() {
                Some(Word::Text(s)) => patterns.extend(s.split('\n').map(str::to_string)),
                _ => return Err("grep: missing pattern".into()),
            }
        }
        if operands.any(|w| matches!(w, Word::Text(s) if s != "-")) {
            return Err("grep: file operands are not supported".into());
        }
        Ok(Grep {
            patterns,
            fixed: p.has('F'),
            dialect: if p.has('E') {
                Dialect::Extended
            } else {
                Dialect::Basic
            },
            icase: p.has('i'),
            whole_line: p.has('x'),
            word: p.has('w'),
            invert: p.has('v'),
            count: p.has('c').then_some(0),
            matcher: None,
        })
    }

    fn compile(&self) -> Matcher {
        if self.patterns.is_empty() {
            return Matcher::Nothing;
        }
        let literal = |p: &String| self.fixed || regex_compat::is_literal(p);
        if self.whole_line && !self.icase && self.patterns.iter().all(literal) {
            return Matcher::Set(self.patterns.iter().cloned().collect());
        }
        if !self.whole_line && !self.word && self.patterns.iter().any(String::is_empty) {
            return Matcher::All;
        }
        let alts: Vec<String> = self
            .patterns
            .iter()
            .map(|p| {
                if self.fixed {
                    regex::escape(p)
                } else {
                    // untranslatable patterns fall back to a literal match
                    regex_compat::translate(p, self.dialect).unwrap_or_else(|_| regex::escape(p))
                }
            })
            .map(|p| format!("(?:{p})"))
            .collect();
        let body = alts.join("|");
        let wrapped = if self.whole_line {
            format!("^(?:{body})$")
        } else if self.word {
            format!(r"(?:^|\W)(?:{body})(?:\W|$)")
        } else {
            body
        };
        match RegexBuilder::new(&wrapped)
            .case_insensitive(self.icase)
            .size_limit(1 << 30)
            .dfa_size_limit(1 << 30)
            .build()
        {
            Ok(r) => Matcher::Regex(r),
            Err(_) => Matcher::Nothing,
        }
    }

    fn matches(&mut self, line: &str) -> bool {
        if self.matcher.is_none() {
            self.matcher = Some(self.compile());
        }
        let hit = match self.matcher.as_ref().expect("compiled above") {
            Matcher::Set(s) => s.contains(line),
            Matcher::Regex(r) => r.is_match(line),
            Matcher::All => true,
            Matcher::Nothing => false,
        };
        hit != self.invert
    }
}

impl LineFilter for Grep {
    fn config(&mut self, line: String) {
        self.patterns.push(line);
    }

    fn line(&mut self, line: String, out: &mut Vec<String>) {
        if self.matches(&line) {
            match &mut self.count {
                Some(n) => *n += 1,
                None => out.push(line),
            }
        }
    }

    fn end(&mut self, out: &mut Vec<String>) {
        if let Some(n) = self.count {
            out.push(n.to_string());
        }
    }
}

// ---- wc ----

struct Wc {
    mode: char,
    n: usize,
}

impl LineFilter for Wc {
    fn line(&mut self, line: String, _out: &mut Vec<String>) {
        self.n += match self.mode {
            'l' => 1,
            'w' => line.split_ascii_whitespace().count(),
            _ => line.len() + 1,
        };
    }

    fn end(&mut self, out: &mut Vec<String>) {
        out.push(self.n.to_string());
    }
}

// ---- sed ----

enum Repl {
    Lit(String),
    Group(usize),
}

struct Sed {
    re: Regex,
    repl: Vec<Repl>,
    global: bool,
}

impl Sed {
    fn new(words: &[Word]) -> Result<Sed, String> {
        let p = getopt(words, "e")?;
        p.only("Er")?;
        let dialect = if p.has('E') || p.has('r') {
            Dialect::Extended
        } else {
            Dialect::Basic
        };
        let script = match p.text_value('e')? {
            Some(s) => s.to_string(),
            None => p
                .operands
                .first()
                .and_then(Word::text)
                .ok_or("sed: missing script")?
                .to_string(),
        };
        let rest_operands = if p.value('e').is_some() { 0 } else { 1 };
        if p.operands.iter().skip(rest_operands).any(|w| matches!(w, Word::Text(s) if s != "-")) {
            return Err("sed: file operands are not supported".into());
        }
        let chars: Vec<char> = script.trim().chars().collect();
        if chars.first() != Some(&'s') || chars.len() < 2 {
            return Err("sed: only a single s command is supported".into());
        }
        let delim = chars[1];
        let mut i = 2;
        let field = |i: &mut usize| -> Result<String, String> {
            let mut s = String::new();
            while *i < chars.len() && chars[*i] != delim {
                if chars[*i] == '\\' && *i + 1 < chars.len() {
                    if chars[*i + 1] == delim {
                        s.push(delim);
                    } else {
                        s.push('\\');
                        s.push(chars[*i + 1]);
                    }
                    *i += 2;
                } else {
                    s.push(chars[*i]);
                    *i += 1;
                }
            }
            if *i >= chars.len() {
                return Err("sed: unterminated s command".into());
            }
            *i += 1;
            Ok(s)
        };
        let pattern = field(&mut i)?;
        let replacement = field(&mut i)?;
        let flags: String = chars[i..].iter().collect();
        let global = match flags.as_str() {
            "" => false,
            "g" => true,
            f => return Err(format!("sed: unsupported flags {f}")),
        };
        let re = Regex::new(&regex_compat::translate(&pattern, dialect)?).map_err(|e| e.to_string())?;
        Ok(Sed {
            re,
            repl: parse_replacement(&replacement),
            global,
        })
    }
}

fn parse_replacement(r: &str) -> Vec<Repl> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = r.chars();
    while let Some(c) = chars.next() {
        match c {
            '&' => {
                parts.push(Repl::Lit(std::mem::take(&mut lit)));
                parts.push(Repl::Group(0));
            }
            '\\' => match chars.next() {
                Some(d) if d.is_ascii_digit() => {
                    parts.push(Repl::Lit(std::mem::take(&mut lit)));
                    parts.push(Repl::Group(d as usize - '0' as usize));
                }
                Some('n') => lit.push('\n'),
                Some('t') => lit.push('\t'),
                Some(o) => lit.push(o),
                None => lit.push('\\'),
            },
            o => lit.push(o),
        }
    }
    parts.push(Repl::Lit(lit));
    parts
}

impl LineFilter for Sed {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        let expand = |caps: &regex::Captures<'_>| {
            let mut s = String::new();
            for p in &self.repl {
                match p {
                    Repl::Lit(l) => s.push_str(l),
                    Repl::Group(g) => s.push_str(caps.get(*g).map_or("", |m| m.as_str())),
                }
            }
            s
        };
        let result = if self.global {
            self.re.replace_all(&line, expand)
        } else {
            self.re.replace(&line, expand)
        };
        push_text(out, result.into_owned());
    }
}

// ---- cut ----

struct Cut {
    ranges: Vec<(usize, usize)>,
    fields: Option<(char, bool)>,
}

fn parse_list(list: &str) -> Result<Vec<(usize, usize)>, String> {
    list.split(',')
        .map(|item| {
            let num = |s: &str, default: usize| -> Result<usize, String> {
                if s.is_empty() {
                    Ok(default)
                } else {
                    s.parse::<usize>()
                        .ok()
                        .filter(|n| *n > 0)
                        .ok_or(format!("cut: bad list item {item}"))
                }
            };
            match item.split_once('-') {
                Some((a, b)) => {
                    if a.is_empty() && b.is_empty() {
                        return Err("cut: bad list item -".into());
                    }
                    Ok((num(a, 1)?, num(b, usize::MAX)?))
                }
                None => {
                    let n = num(item, 0)?;
                    Ok((n, n))
                }
            }
        })
        .collect()
}

impl Cut {
    fn new(words: &[Word]) -> Result<Cut, String> {
        let p = getopt(words, "dfc")?;
        p.only("s")?;
        no_operands(&p, "cut")?;
        let (list, fields) = match (p.text_value('f')?, p.text_value('c')?) {
            (Some(f), None) => {
                let delim = match p.text_value('d')? {
                    Some(d) => {
                        let mut it = d.chars();
                        match (it.next(), it.next()) {
                            (Some(c), None) => c,
                            _ => return Err("cut: the delimiter must be a single character".into()),
                        }
                    }
                    None => '\t',
                };
                (f, Some((delim, p.has('s'))))
            }
            (None, Some(c)) => (c, None),
            _ => return Err("cut: exactly one of -f or -c is required".into()),
        };
        Ok(Cut {
            ranges: parse_list(list)?,
            fields,
        })
    }

    fn selected(&self, i: usize) -> bool {
        self.ranges.iter().any(|&(a, b)| a <= i && i <= b)
    }
}

impl LineFilter for Cut {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        match self.fields {
            Some((d, only_delimited)) => {
                if !line.contains(d) {
                    if !only_delimited {
                        out.push(line);
                    }
                    return;
                }
                let picked: Vec<&str> = line
                    .split(d)
                    .enumerate()
                    .filter(|(i, _)| self.selected(i + 1))
                    .map(|(_, f)| f)
                    .collect();
                out.push(picked.join(&d.to_string()));
            }
            None => {
                let picked: String = line
                    .chars()
                    .enumerate()
                    .filter(|(i, _)| self.selected(i + 1))
                    .map(|(_, c)| c)
                    .collect();
                out.push(picked);
            }
        }
    }
}

// ---- head ----

struct Head {
    left: usize,
}

impl LineFilter for Head {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        if self.left > 0 {
            self.left -= 1;
            out.push(line);
        }
    }
}

// ---- bc ----

struct Bc;

fn bc_eval(s: &str) -> Option<i128> {
    struct P<'a> {
        b: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn ws(&mut self) {
            while self.i < self.b.len() && (self.b[self.i] == b' ' || self.b[self.i] == b'\t') {
                self.i += 1;
            }
        }
        fn expr(&mut self) -> Option<i128> {
            let mut v = self.term()?;
            loop {
                self.ws();
                match self.b.get(self.i) {
                    Some(b'+') => {
                        self.i += 1;
                        v = v.checked_add(self.term()?)?;
                    }
                    Some(b'-') => {
                        self.i += 1;
                        v = v.checked_sub(self.term()?)?;
                    }
                    _ => return Some(v),
                }
            }
        }
        fn term(&mut self) -> Option<i128> {
            let mut v = self.unary()?;
            loop {
                self.ws();
                match self.b.get(self.i) {
                    Some(b'*') => {
                        self.i += 1;
                        v = v.checked_mul(self.unary()?)?;
                    }
                    Some(b'/') => {
                        self.i += 1;
                        v = v.checked_div(self.unary()?)?;
                    }
                    Some(b'%') => {
                        self.i += 1;
                        v = v.checked_rem(self.unary()?)?;
                    }
                    _ => return Some(v),
                }
            }
        }
        fn unary(&mut self) -> Option<i128> {
            self.ws();
            match self.b.get(self.i) {
                Some(b'-') => {
                    self.i += 1;
                    self.unary()?.checked_neg()
                }
                Some(b'(') => {
                    self.i += 1;
                    let v = self.expr()?;
                    self.ws();
                    (self.b.get(self.i) == Some(&b')')).then_some(())?;
                    self.i += 1;
                    Some(v)
                }
                _ => {
                    let start = self.i;
                    while self.i < self.b.len() && self.b[self.i].is_ascii_digit() {
                        self.i += 1;
                    }
                    std::str::from_utf8(&self.b[start..self.i]).ok()?.parse().ok()
                }
            }
        }
    }
    let mut p = P { b: s.as_bytes(), i: 0 };
    let v = p.expr()?;
    p.ws();
    (p.i == p.b.len()).then_some(v)
}

impl LineFilter for Bc {
    fn line(&mut self, line: String, out: &mut Vec<String>) {
        if line.trim().is_empty() {
            return;
        }
        // malformed lines produce no output, as bc reports them on stderr
        if let Some(v) = bc_eval(&line) {
            out.push(v.to_string());
        }
    }
}

// ---- multi-input commands ----

/// Per-input queues for commands that read several streams side by side.
struct SideBySide {
    slot: BTreeMap<usize, usize>,
    queues: Vec<VecDeque<String>>,
    closed: Vec<bool>,
}

impl SideBySide {
    fn new(positional: &[usize]) -> SideBySide {
        SideBySide {
            slot: positional.iter().enumerate().map(|(s, &i)| (i, s)).collect(),
            queues: vec![VecDeque::new(); positional.len()],
            closed: vec![false; positional.len()],
        }
    }

    fn push(&mut self, input: usize, element: Option<String>) {
        let Some(&s) = self.slot.get(&input) else { return };
        match element {
            Some(l) => self.queues[s].push_back(l),
            None => self.closed[s] = true,
        }
    }

    /// True when every input has a pending line or is exhausted, and at
    /// least one has a pending line.
    fn row_ready(&self) -> bool {
        let all = self
            .queues
            .iter()
            .zip(&self.closed)
            .all(|(q, &c)| !q.is_empty() || c);
        all && self.queues.iter().any(|q| !q.is_empty())
    }
}

struct Fanout {
    outputs: Vec<usize>,
}

impl Transducer for Fanout {
    fn feed(&mut self, _input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        if let Some(l) = element {
            for &o in &self.outputs {
                out.push(Emission::Line(o, l.clone()));
            }
        }
    }

    fn finish(&mut self, _out: &mut Vec<Emission>) {}
}

fn paste_delims(d: &str) -> Vec<String> {
    let mut v = Vec::new();
    let mut chars = d.chars();
    while let Some(c) = chars.next() {
        v.push(match c {
            '\\' => match chars.next() {
                Some('t') => "\t".into(),
                Some('n') => "\n".into(),
                Some('0') => String::new(),
                Some(o) => o.to_string(),
                None => "\\".into(),
            },
            o => o.to_string(),
        });
    }
    if v.is_empty() {
        v.push(String::new());
    }
    v
}

struct Paste {
    side: SideBySide,
    delims: Vec<String>,
    out: usize,
}

impl Paste {
    fn drain(&mut self, out: &mut Vec<Emission>) {
        while self.side.row_ready() {
            let mut row = String::new();
            for s in 0..self.side.queues.len() {
                if s > 0 {
                    row.push_str(&self.delims[(s - 1) % self.delims.len()]);
                }
                if let Some(l) = self.side.queues[s].pop_front() {
                    row.push_str(&l);
                }
            }
            let mut lines = Vec::new();
            push_text(&mut lines, row);
            emit_lines(self.out, lines, out);
        }
    }
}

impl Transducer for Paste {
    fn feed(&mut self, input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        self.side.push(input, element);
        self.drain(out);
    }

    fn finish(&mut self, out: &mut Vec<Emission>) {
        self.drain(out);
    }
}

struct Comm {
    side: SideBySide,
    hide: [bool; 3],
    out: usize,
}

impl Transducer for Comm {
    fn feed(&mut self, input: usize, element: Option<String>, _out: &mut Vec<Emission>) {
        self.side.push(input, element);
    }

    fn finish(&mut self, out: &mut Vec<Emission>) {
        let [a, b] = [0, 1].map(|s| std::mem::take(&mut self.side.queues[s]));
        let (mut a, mut b) = (a.into_iter().peekable(), b.into_iter().peekable());
        let col = |c: usize, l: String| -> Option<String> {
            if self.hide[c] {
                return None;
            }
            let tabs = (0..c).filter(|&k| !self.hide[k]).count();
            Some(format!("{}{l}", "\t".repeat(tabs)))
        };
        loop {
            let (line, c) = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => (a.next(), 0),
                (None, Some(_)) => (b.next(), 1),
                (Some(x), Some(y)) => match x.as_bytes().cmp(y.as_bytes()) {
                    Ordering::Less => (a.next(), 0),
                    Ordering::Greater => (b.next(), 1),
                    Ordering::Equal => {
                        b.next();
                        (a.next(), 2)
                    }
                },
            };
            if let Some(l) = line.and_then(|l| col(c, l)) {
                out.push(Emission::Line(self.out, l));
            }
        }
    }
}

struct Merge {
    side: SideBySide,
    key: SortKey,
    last: Option<String>,
    out: usize,
}

impl Merge {
    fn drain(&mut self, out: &mut Vec<Emission>) {
        while self.side.row_ready() {
            let mut best: Option<usize> = None;
            for (s, q) in self.side.queues.iter().enumerate() {
                if let Some(h) = q.front() {
                    let better = match best {
                        None => true,
                        Some(b) => {
                            let cur = self.side.queues[b].front().expect("non-empty");
                            self.key.cmp(h, cur) == Ordering::Less
                        }
                    };
                    if better {
                        best = Some(s);
                    }
                }
            }
            let Some(s) = best else { break };
            let l = self.side.queues[s].pop_front().expect("non-empty");
            if self.key.unique && self.last.as_deref().is_some_and(|p| self.key.same(p, &l)) {
                continue;
            }
            if self.key.unique {
                self.last = Some(l.clone());
            }
            out.push(Emission::Line(self.out, l));
        }
    }
}

impl Transducer for Merge {
    fn feed(&mut self, input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        self.side.push(input, element);
        self.drain(out);
    }

    fn finish(&mut self, out: &mut Vec<Emission>) {
        self.drain(out);
    }
}

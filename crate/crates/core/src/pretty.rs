//! Rendering of processes, types and models in the `.ba` concrete syntax.
//!
//! Runtime-only forms render as `#warn(G)`, `#exerror(G,G')` and `#merror(G,G')`.
//! Those start a comment for the lexer, so they are for display only.

use std::fmt::Write;

use crate::parser::Model;
use crate::syntax::{ArgType, CapType, GroupName, GroupSet, Prefix, Process};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Proc,
    ParItem,
    SumItem,
    Unary,
}

pub fn pretty_process(p: &Process) -> String {
    let mut s = String::new();
    write_process(&mut s, p, Level::Proc);
    s
}

pub fn pretty_model(m: &Model) -> String {
    let mut s = String::new();
    for g in m.groups.iter() {
        let _ = writeln!(
            s,
            "group {} {{ stay: {}; cross: {}; }}",
            g.name,
            group_list(&g.stay),
            group_list(&g.cross)
        );
    }
    for (name, ty) in m.env.iter() {
        let _ = writeln!(s, "name {} : {}", name, type_expr(ty));
    }
    let _ = writeln!(s, "system {}", pretty_process(&m.system));
    s
}

fn group_list(gs: &GroupSet) -> String {
    gs.iter()
        .map(GroupName::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn cap_type(y: &CapType) -> String {
    format!(
        "cap({}, {{{}}}, {{{}}})",
        y.label,
        group_list(&y.movers),
        group_list(&y.hosts)
    )
}

/// A declared type, as written after `name n :` or in a restriction.
pub fn type_expr(t: &ArgType) -> String {
    match t {
        ArgType::Group(g) => format!("amb({g})"),
        ArgType::Cap(y) => cap_type(y),
        ArgType::Chan(inner) => format!("ch({})", arg_type(inner)),
    }
}

/// A channel payload type.
fn arg_type(t: &ArgType) -> String {
    match t {
        ArgType::Group(g) => format!("group {g}"),
        other => type_expr(other),
    }
}

pub fn prefix(p: &Prefix) -> String {
    match p {
        Prefix::Cap { op, name } => format!("{op} {name}"),
        Prefix::Output {
            dir,
            channel,
            payload,
        } => format!("{dir} {channel}!{{{payload}}}"),
        Prefix::Input {
            dir,
            channel,
            binder,
        } => format!("{dir} {channel}?{{{binder}}}"),
    }
}

fn paren(s: &mut String, needed: bool, f: impl FnOnce(&mut String)) {
    if needed {
        s.push('(');
    }
    f(s);
    if needed {
        s.push(')');
    }
}

fn write_process(s: &mut String, p: &Process, level: Level) {
    match p {
        Process::Zero => s.push('0'),
        Process::Restrict { name, ty, body } => paren(s, level > Level::Proc, |s| {
            let _ = write!(s, "(new {} : {}) ", name, type_expr(ty));
            write_process(s, body, Level::Proc);
        }),
        Process::Par(ps) => paren(s, level > Level::Proc, |s| {
            for (i, q) in ps.iter().enumerate() {
                if i > 0 {
                    s.push_str(" | ");
                }
                write_process(s, q, Level::ParItem);
            }
        }),
        Process::Repl(body) => {
            s.push('!');
            write_process(s, body, Level::Unary);
        }
        Process::Ambient { name, body } => {
            let _ = write!(s, "{name}[ ");
            write_process(s, body, Level::Proc);
            s.push_str(" ]");
        }
        Process::Sum { branches, .. } => {
            paren(s, branches.len() > 1 && level > Level::SumItem, |s| {
                for (i, (pre, cont)) in branches.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" + ");
                    }
                    s.push_str(&prefix(pre));
                    s.push('.');
                    write_process(s, cont, Level::Unary);
                }
            })
        }
        Process::Warn(g) => {
            let _ = write!(s, "#warn({g})");
        }
        Process::ExError { host, mover } => {
            let _ = write!(s, "#exerror({host},{mover})");
        }
        Process::MergeError { host, content } => {
            let _ = write!(s, "#merror({host},{content})");
        }
    }
}

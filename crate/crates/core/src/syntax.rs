//! Abstract syntax of processes and types, plus name hygiene.
//!
//! Binding occurrences are the restricted name of [`Process::Restrict`] and the
//! binder of an input prefix. Everything else is a free occurrence. Scoping is
//! by identifier text; the [`NameKind`] attached to a [`Name`] is metadata fixed
//! at the declaration or binding site.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// The reserved identifier of the universal group.
pub const UNIV: &str = "Univ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameKind {
    Ambient,
    Channel,
    Capability,
}

impl NameKind {
    /// Kind of a name declared with the given argument type.
    pub fn of(ty: &ArgType) -> NameKind {
        match ty {
            ArgType::Group(_) => NameKind::Ambient,
            ArgType::Cap(_) => NameKind::Capability,
            ArgType::Chan(_) => NameKind::Channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    text: String,
    kind: NameKind,
}

impl Name {
    pub fn new(text: impl Into<String>, kind: NameKind) -> Self {
        let text = text.into();
        debug_assert!(!text.is_empty());
        Name { text, kind }
    }

    pub fn ambient(text: impl Into<String>) -> Self {
        Name::new(text, NameKind::Ambient)
    }

    pub fn channel(text: impl Into<String>) -> Self {
        Name::new(text, NameKind::Channel)
    }

    pub fn capability(text: impl Into<String>) -> Self {
        Name::new(text, NameKind::Capability)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> NameKind {
        self.kind
    }

    /// Same kind, different text.
    pub fn renamed(&self, text: impl Into<String>) -> Name {
        Name::new(text, self.kind)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupName(String);

impl GroupName {
    pub fn new(text: impl Into<String>) -> Self {
        GroupName(text.into())
    }

    pub fn univ() -> Self {
        GroupName(UNIV.to_string())
    }

    pub fn is_univ(&self) -> bool {
        self.0 == UNIV
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type GroupSet = BTreeSet<GroupName>;

/// A group type `G = (S_G, C_G)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDecl {
    pub name: GroupName,
    pub stay: GroupSet,
    pub cross: GroupSet,
}

impl GroupDecl {
    pub fn new(
        name: impl Into<String>,
        stay: impl IntoIterator<Item = GroupName>,
        cross: impl IntoIterator<Item = GroupName>,
    ) -> Self {
        GroupDecl {
            name: GroupName::new(name),
            stay: stay.into_iter().collect(),
            cross: cross.into_iter().collect(),
        }
    }

    /// Cross-set members that the stay set does not admit (`C_G ⊆ S_G`, Univ absorbing).
    pub fn cross_outside_stay(&self) -> Vec<GroupName> {
        if self.stay.iter().any(GroupName::is_univ) {
            return Vec::new();
        }
        self.cross
            .iter()
            .filter(|g| !self.stay.contains(*g))
            .cloned()
            .collect()
    }
}

/// The declared universe of group types. `Univ` is implicit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTable {
    decls: BTreeMap<GroupName, GroupDecl>,
}

impl GroupTable {
    pub fn new() -> Self {
        GroupTable::default()
    }

    /// Inserts a declaration; returns the previous one with the same name, if any.
    pub fn insert(&mut self, decl: GroupDecl) -> Option<GroupDecl> {
        self.decls.insert(decl.name.clone(), decl)
    }

    pub fn get(&self, g: &GroupName) -> Option<&GroupDecl> {
        self.decls.get(g)
    }

    pub fn is_known(&self, g: &GroupName) -> bool {
        g.is_univ() || self.decls.contains_key(g)
    }

    /// `S_G`. Univ stays anywhere; an undeclared group stays nowhere.
    pub fn stay(&self, g: &GroupName) -> GroupSet {
        if g.is_univ() {
            return std::iter::once(GroupName::univ()).collect();
        }
        self.decls
            .get(g)
            .map(|d| d.stay.clone())
            .unwrap_or_default()
    }

    /// `C_G`, with the same conventions as [`GroupTable::stay`].
    pub fn cross(&self, g: &GroupName) -> GroupSet {
        if g.is_univ() {
            return std::iter::once(GroupName::univ()).collect();
        }
        self.decls
            .get(g)
            .map(|d| d.cross.clone())
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupDecl> {
        self.decls.values()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// enter / accept
    Ea,
    /// exit / expel
    Ee,
    /// merge+ / merge-
    Mm,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Ea => "ea",
            Label::Ee => "ee",
            Label::Mm => "mm",
        })
    }
}

/// Capability type `(Ḡ1, Ḡ2)^L`: movers, hosts and label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CapType {
    pub movers: GroupSet,
    pub hosts: GroupSet,
    pub label: Label,
}

impl CapType {
    pub fn new(
        label: Label,
        movers: impl IntoIterator<Item = GroupName>,
        hosts: impl IntoIterator<Item = GroupName>,
    ) -> Self {
        CapType {
            movers: movers.into_iter().collect(),
            hosts: hosts.into_iter().collect(),
            label,
        }
    }

    /// Whether the prefix `op` is one of the two paired by this type's label.
    pub fn admits(&self, op: CapOp) -> bool {
        op.label() == self.label
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgType {
    Group(GroupName),
    Cap(CapType),
    Chan(Box<ArgType>),
}

impl ArgType {
    pub fn group(g: impl Into<String>) -> Self {
        ArgType::Group(GroupName::new(g))
    }

    pub fn chan(payload: ArgType) -> Self {
        ArgType::Chan(Box::new(payload))
    }

    /// Every group name mentioned anywhere in the type.
    pub fn groups(&self) -> GroupSet {
        let mut out = GroupSet::new();
        self.collect_groups(&mut out);
        out
    }

    fn collect_groups(&self, out: &mut GroupSet) {
        match self {
            ArgType::Group(g) => {
                out.insert(g.clone());
            }
            ArgType::Cap(y) => {
                out.extend(y.movers.iter().cloned());
                out.extend(y.hosts.iter().cloned());
            }
            ArgType::Chan(t) => t.collect_groups(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Local,
    S2s,
    P2c,
    C2p,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Local => "local",
            Direction::S2s => "s2s",
            Direction::P2c => "p2c",
            Direction::C2p => "c2p",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapOp {
    Enter,
    Accept,
    Exit,
    Expel,
    MergePlus,
    MergeMinus,
}

impl CapOp {
    pub fn label(self) -> Label {
        match self {
            CapOp::Enter | CapOp::Accept => Label::Ea,
            CapOp::Exit | CapOp::Expel => Label::Ee,
            CapOp::MergePlus | CapOp::MergeMinus => Label::Mm,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            CapOp::Enter => "enter",
            CapOp::Accept => "accept",
            CapOp::Exit => "exit",
            CapOp::Expel => "expel",
            CapOp::MergePlus => "merge+",
            CapOp::MergeMinus => "merge-",
        }
    }
}

impl fmt::Display for CapOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prefix {
    Cap {
        op: CapOp,
        name: Name,
    },
    Output {
        dir: Direction,
        channel: Name,
        payload: Name,
    },
    Input {
        dir: Direction,
        channel: Name,
        binder: Name,
    },
}

impl Prefix {
    pub fn flavor(&self) -> SumFlavor {
        match self {
            Prefix::Cap { .. } => SumFlavor::Capability,
            _ => SumFlavor::Communication,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumFlavor {
    Capability,
    Communication,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Zero,
    Restrict {
        name: Name,
        ty: ArgType,
        body: Box<Process>,
    },
    Par(Vec<Process>),
    Repl(Box<Process>),
    Ambient {
        name: Name,
        body: Box<Process>,
    },
    Sum {
        flavor: SumFlavor,
        branches: Vec<(Prefix, Process)>,
    },
    /// Runtime-only: pending stay check for an exited ambient of this group.
    Warn(GroupName),
    /// Runtime-only: `exerror(host, mover)`.
    ExError {
        host: GroupName,
        mover: GroupName,
    },
    /// Runtime-only: `merror(host, content)`.
    MergeError {
        host: GroupName,
        content: GroupName,
    },
}

impl Process {
    pub fn restrict(name: Name, ty: ArgType, body: Process) -> Self {
        Process::Restrict {
            name,
            ty,
            body: Box::new(body),
        }
    }

    pub fn repl(body: Process) -> Self {
        Process::Repl(Box::new(body))
    }

    pub fn ambient(name: Name, body: Process) -> Self {
        Process::Ambient {
            name,
            body: Box::new(body),
        }
    }

    /// A single-branch sum, i.e. a plain prefix.
    pub fn prefixed(prefix: Prefix, cont: Process) -> Self {
        Process::Sum {
            flavor: prefix.flavor(),
            branches: vec![(prefix, cont)],
        }
    }

    /// Builds a choice, or `None` when the branches mix capabilities and communications.
    pub fn sum(branches: Vec<(Prefix, Process)>) -> Option<Self> {
        let flavor = branches.first()?.0.flavor();
        if branches.iter().any(|(p, _)| p.flavor() != flavor) {
            return None;
        }
        Some(Process::Sum { flavor, branches })
    }

    /// Parallel composition; collapses the zero- and one-component cases.
    pub fn par(mut components: Vec<Process>) -> Self {
        match components.len() {
            0 => Process::Zero,
            1 => components.pop().unwrap(),
            _ => Process::Par(components),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Process::Zero)
    }

    pub fn is_runtime_form(&self) -> bool {
        matches!(
            self,
            Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. }
        )
    }

    /// True when no warn/error form occurs anywhere in the term.
    pub fn is_runtime_free(&self) -> bool {
        match self {
            Process::Zero => true,
            Process::Restrict { body, .. }
            | Process::Repl(body)
            | Process::Ambient { body, .. } => body.is_runtime_free(),
            Process::Par(ps) => ps.iter().all(Process::is_runtime_free),
            Process::Sum { branches, .. } => branches.iter().all(|(_, p)| p.is_runtime_free()),
            _ => false,
        }
    }

    /// Components of a parallel composition, or the process itself.
    pub fn components(&self) -> Vec<&Process> {
        match self {
            Process::Par(ps) => ps.iter().collect(),
            Process::Zero => Vec::new(),
            p => vec![p],
        }
    }
}

/// Free names of a process.
pub fn free_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(p, &mut Vec::new(), &mut out);
    out
}

/// Whether a name with this text occurs free in `p`.
pub fn occurs_free(text: &str, p: &Process) -> bool {
    free_names(p).iter().any(|n| n.text() == text)
}

fn note(n: &Name, bound: &[&str], out: &mut BTreeSet<Name>) {
    if !bound.contains(&n.text()) {
        out.insert(n.clone());
    }
}

fn collect_free<'a>(p: &'a Process, bound: &mut Vec<&'a str>, out: &mut BTreeSet<Name>) {
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
        }
        Process::Restrict { name, body, .. } => {
            bound.push(name.text());
            collect_free(body, bound, out);
            bound.pop();
        }
        Process::Par(ps) => {
            for q in ps {
                collect_free(q, bound, out);
            }
        }
        Process::Repl(body) => collect_free(body, bound, out),
        Process::Ambient { name, body } => {
            note(name, bound, out);
            collect_free(body, bound, out);
        }
        Process::Sum { branches, .. } => {
            for (prefix, cont) in branches {
                match prefix {
                    Prefix::Cap { name, .. } => {
                        note(name, bound, out);
                        collect_free(cont, bound, out);
                    }
                    Prefix::Output {
                        channel, payload, ..
                    } => {
                        note(channel, bound, out);
                        note(payload, bound, out);
                        collect_free(cont, bound, out);
                    }
                    Prefix::Input {
                        channel, binder, ..
                    } => {
                        note(channel, bound, out);
                        bound.push(binder.text());
                        collect_free(cont, bound, out);
                        bound.pop();
                    }
                }
            }
        }
    }
}

/// Every identifier text occurring in `p`, free or bound.
pub fn all_name_texts(p: &Process) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_all(p, &mut out);
    out
}

fn collect_all(p: &Process, out: &mut BTreeSet<String>) {
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
        }
        Process::Restrict { name, body, .. } => {
            out.insert(name.text().to_string());
            collect_all(body, out);
        }
        Process::Par(ps) => ps.iter().for_each(|q| collect_all(q, out)),
        Process::Repl(body) => collect_all(body, out),
        Process::Ambient { name, body } => {
            out.insert(name.text().to_string());
            collect_all(body, out);
        }
        Process::Sum { branches, .. } => {
            for (prefix, cont) in branches {
                match prefix {
                    Prefix::Cap { name, .. } => {
                        out.insert(name.text().to_string());
                    }
                    Prefix::Output {
                        channel, payload, ..
                    } => {
                        out.insert(channel.text().to_string());
                        out.insert(payload.text().to_string());
                    }
                    Prefix::Input {
                        channel, binder, ..
                    } => {
                        out.insert(channel.text().to_string());
                        out.insert(binder.text().to_string());
                    }
                }
                collect_all(cont, out);
            }
        }
    }
}

/// A name with `hint`'s kind whose text is not used by anything in `avoid`:
/// the hint itself, else the hint suffixed with the smallest positive integer.
pub fn fresh_name(hint: &Name, avoid: &BTreeSet<Name>) -> Name {
    let texts: BTreeSet<&str> = avoid.iter().map(Name::text).collect();
    hint.renamed(fresh_text(hint.text(), |t| texts.contains(t)))
}

/// Text-level variant of [`fresh_name`].
pub fn fresh_text(hint: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(hint) {
        return hint.to_string();
    }
    (1u64..)
        .map(|i| format!("{hint}{i}"))
        .find(|t| !taken(t))
        .expect("unbounded suffix search")
}

/// Capture-avoiding substitution `p{replacement/target}`.
pub fn substitute(p: &Process, target: &Name, replacement: &Name) -> Process {
    if target.text() == replacement.text() && target.kind() == replacement.kind() {
        return p.clone();
    }
    subst(p, target.text(), replacement)
}

fn swap(n: &Name, target: &str, replacement: &Name) -> Name {
    if n.text() == target {
        replacement.clone()
    } else {
        n.clone()
    }
}

/// Renames a binder (if needed) so that substituting `replacement` under it
/// cannot be captured, then substitutes in the body.
fn under_binder(
    binder: &Name,
    body: &Process,
    target: &str,
    replacement: &Name,
) -> (Name, Process) {
    if binder.text() == target {
        // shadowed: no free occurrence of target below
        return (binder.clone(), body.clone());
    }
    let body_free = free_names(body);
    if !body_free.iter().any(|n| n.text() == target) {
        return (binder.clone(), body.clone());
    }
    if binder.text() == replacement.text() {
        let used = all_name_texts(body);
        let fresh = binder.renamed(fresh_text(binder.text(), |t| {
            used.contains(t) || t == target || t == replacement.text()
        }));
        let renamed = subst(body, binder.text(), &fresh);
        (fresh, subst(&renamed, target, replacement))
    } else {
        (binder.clone(), subst(body, target, replacement))
    }
}

fn subst(p: &Process, target: &str, replacement: &Name) -> Process {
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
            p.clone()
        }
        Process::Restrict { name, ty, body } => {
            let (name, body) = under_binder(name, body, target, replacement);
            Process::restrict(name, ty.clone(), body)
        }
        Process::Par(ps) => {
            Process::Par(ps.iter().map(|q| subst(q, target, replacement)).collect())
        }
        Process::Repl(body) => Process::repl(subst(body, target, replacement)),
        Process::Ambient { name, body } => Process::ambient(
            swap(name, target, replacement),
            subst(body, target, replacement),
        ),
        Process::Sum { flavor, branches } => Process::Sum {
            flavor: *flavor,
            branches: branches
                .iter()
                .map(|(prefix, cont)| match prefix {
                    Prefix::Cap { op, name } => (
                        Prefix::Cap {
                            op: *op,
                            name: swap(name, target, replacement),
                        },
                        subst(cont, target, replacement),
                    ),
                    Prefix::Output {
                        dir,
                        channel,
                        payload,
                    } => (
                        Prefix::Output {
                            dir: *dir,
                            channel: swap(channel, target, replacement),
                            payload: swap(payload, target, replacement),
                        },
                        subst(cont, target, replacement),
                    ),
                    Prefix::Input {
                        dir,
                        channel,
                        binder,
                    } => {
                        let (binder, cont) = under_binder(binder, cont, target, replacement);
                        (
                            Prefix::Input {
                                dir: *dir,
                                channel: swap(channel, target, replacement),
                                binder,
                            },
                            cont,
                        )
                    }
                })
                .collect(),
        },
    }
}

/// Structural audit: every sum is non-empty and its branches agree with its flavor.
pub fn sums_well_flavored(p: &Process) -> bool {
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
            true
        }
        Process::Restrict { body, .. } | Process::Repl(body) | Process::Ambient { body, .. } => {
            sums_well_flavored(body)
        }
        Process::Par(ps) => ps.iter().all(sums_well_flavored),
        Process::Sum { flavor, branches } => {
            !branches.is_empty()
                && branches
                    .iter()
                    .all(|(prefix, cont)| prefix.flavor() == *flavor && sums_well_flavored(cont))
        }
    }
}

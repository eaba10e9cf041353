//! Typed reduction semantics with warnings and errors.
//!
//! A [`RuntimeState`] keeps its term with every active restriction opened: the
//! binder is renamed fresh and recorded in the state's environment, so redexes
//! never have to look through a restriction. The state's identity is the
//! rendering of the canonical form of the re-closed term.
//!
//! Redexes are found on a view of the term in which every replication carries
//! `repl_budget` opened copies of its body. A step materializes exactly the
//! copies it touched, next to the replication it came from.

mod canon;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use canon::canonicalize;

use crate::parser::Model;
use crate::pretty::pretty_process;
use crate::syntax::{
    all_name_texts, fresh_text, occurs_free, substitute, ArgType, CapOp, Direction, GroupName,
    GroupSet, GroupTable, Name, Prefix, Process,
};
use crate::typing::{
    member_group, top_level_ambient_groups, type_process, type_process_with, Judgment, TypeEnv,
    TypeError, TypingOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    RedIn,
    RedOut,
    RedMerge,
    RedLocal,
    RedParentOutput,
    RedParentInput,
    RedSibling,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One step of an [`Addr`]: a component index, or a replication copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Idx(usize),
    Copy(usize),
}

/// Position in the redex view, e.g. `2.c0.1`: component 2, its replication's
/// copy 0, component 1 of that copy. Indices into an ambient continue in its body.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Addr(pub Vec<Step>);

impl Addr {
    pub fn is_top(&self) -> bool {
        self.0.is_empty()
    }

    fn join(&self, rel: &Addr) -> Addr {
        let mut v = self.0.clone();
        v.extend_from_slice(&rel.0);
        Addr(v)
    }

    fn push(&self, s: Step) -> Addr {
        let mut v = self.0.clone();
        v.push(s);
        Addr(v)
    }

    fn strip(&self, prefix: &Addr) -> Addr {
        Addr(self.0[prefix.0.len()..].to_vec())
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("top");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            match s {
                Step::Idx(k) => write!(f, "{k}")?,
                Step::Copy(k) => write!(f, "c{k}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Addr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "top" || s.is_empty() {
            return Ok(Addr::default());
        }
        s.split('.')
            .map(|part| match part.strip_prefix('c') {
                Some(k) => k.parse().map(Step::Copy),
                None => part.parse().map(Step::Idx),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Addr)
            .map_err(|_| format!("bad address `{s}`"))
    }
}

impl Serialize for Addr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Addr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One side of a redex. Addresses are relative to the redex site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Participant {
    pub ambient: Option<Addr>,
    pub sum: Addr,
    pub branch: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ambient_name: Option<String>,
}

impl Participant {
    fn same_position(&self, other: &Participant) -> bool {
        self.ambient == other.ambient && self.sum == other.sum && self.branch == other.branch
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.ambient_name {
            write!(f, "{n}:")?;
        }
        write!(f, "{}/{}", self.sum, self.branch)
    }
}

/// A pair of prefixes ready to synchronize. Participants are ordered
/// mover/host for movement, plus/minus for merge, sender/receiver otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Redex {
    pub site: Addr,
    pub rule: Rule,
    pub participants: [Participant; 2],
    pub sync: String,
    pub repl_unfoldings: usize,
}

impl fmt::Display for Redex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on {} at {}: {} with {}",
            self.rule, self.sync, self.site, self.participants[0], self.participants[1]
        )?;
        if self.repl_unfoldings > 0 {
            write!(f, " (unfolds {})", self.repl_unfoldings)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Exit,
    Merge,
}

/// `exerror(host, offender)` or `merror(host, offender)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorVerdict {
    #[serde(rename = "error")]
    pub kind: ErrorKind,
    pub host: GroupName,
    pub offender: GroupName,
}

impl ErrorVerdict {
    pub fn as_process(&self) -> Process {
        match self.kind {
            ErrorKind::Exit => Process::ExError {
                host: self.host.clone(),
                mover: self.offender.clone(),
            },
            ErrorKind::Merge => Process::MergeError {
                host: self.host.clone(),
                content: self.offender.clone(),
            },
        }
    }
}

impl fmt::Display for ErrorVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ErrorKind::Exit => "exerror",
            ErrorKind::Merge => "merror",
        };
        write!(f, "{tag}({}, {})", self.host, self.offender)
    }
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Next {
        state: RuntimeState,
        emitted_warn: Option<GroupName>,
    },
    Error(ErrorVerdict),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("redex `{0}` is not enabled in this state")]
pub struct StaleRedex(pub String);

/// Knobs of the reduction relation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Semantics {
    /// Also check every group of the whole merged body on merge, not only R and S.
    pub strict_merge: bool,
}

/// One line of a reduction trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub rule: Rule,
    pub sync: String,
    pub site: Addr,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub emitted_warn: Option<GroupName>,
    pub state_pretty: String,
    pub state_hash: String,
}

#[derive(Debug, Clone)]
pub struct RuntimeState {
    term: Process,
    env: TypeEnv,
    groups: Arc<GroupTable>,
    base_env: Arc<TypeEnv>,
    opened: Vec<(Name, ArgType)>,
    key: String,
}

impl PartialEq for RuntimeState {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for RuntimeState {}

pub fn state_hash(key: &str) -> String {
    let digest = Sha256::digest(key.as_bytes());
    hex::encode(&digest[..8])
}

impl RuntimeState {
    pub fn initial(m: &Model) -> Self {
        Self::from_process(&m.system, m.env.clone(), m.groups.clone())
    }

    /// A state for a closed term (free names in `env`).
    pub fn from_process(term: &Process, env: TypeEnv, groups: GroupTable) -> Self {
        Self::from_closed(term, Arc::new(env), Arc::new(groups))
    }

    fn from_closed(closed: &Process, base_env: Arc<TypeEnv>, groups: Arc<GroupTable>) -> Self {
        let canonical = canonicalize(closed);
        let key = pretty_process(&canonical);
        let mut taken: BTreeSet<String> = base_env.texts().map(str::to_string).collect();
        taken.extend(all_name_texts(&canonical));
        let mut opened = Vec::new();
        let mut comps = Vec::new();
        open_into(&canonical, &mut taken, &mut opened, &mut comps);
        let mut env = (*base_env).clone();
        for (n, t) in &opened {
            let _ = env.extend(n, t.clone());
        }
        RuntimeState {
            term: Process::par(comps),
            env,
            groups,
            base_env,
            opened,
            key,
        }
    }

    /// The term with active restrictions opened.
    pub fn term(&self) -> &Process {
        &self.term
    }

    /// Γ extended with the opened restrictions.
    pub fn env(&self) -> &TypeEnv {
        &self.env
    }

    pub fn groups(&self) -> &GroupTable {
        &self.groups
    }

    pub fn opened(&self) -> &[(Name, ArgType)] {
        &self.opened
    }

    /// Rendering of the canonical closed form; equal exactly for congruent states.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn hash(&self) -> String {
        state_hash(&self.key)
    }

    /// The canonical closed term.
    pub fn closed(&self) -> Process {
        canonicalize(&self.reclose(self.term.clone(), &[]))
    }

    /// Top-level warnings, in term order.
    pub fn warns(&self) -> Vec<GroupName> {
        self.term
            .components()
            .into_iter()
            .filter_map(|c| match c {
                Process::Warn(g) => Some(g.clone()),
                _ => None,
            })
            .collect()
    }

    fn reclose(&self, term: Process, extra: &[(Name, ArgType)]) -> Process {
        self.opened
            .iter()
            .chain(extra)
            .rev()
            .filter(|(n, _)| occurs_free(n.text(), &term))
            .cloned()
            .collect::<Vec<_>>()
            .into_iter()
            .fold(term, |acc, (n, t)| Process::restrict(n, t, acc))
    }

    fn group_of(&self, view: &View, name: &Name) -> GroupName {
        let ty = self.env.get(name).or_else(|| {
            view.opened
                .iter()
                .find(|(n, _)| n.text() == name.text())
                .map(|(_, t)| t)
        });
        match ty {
            Some(ArgType::Group(g)) => g.clone(),
            _ => GroupName::univ(),
        }
    }
}

fn push_flat(out: &mut Vec<Process>, p: Process) {
    match p {
        Process::Zero => {}
        Process::Par(ps) => ps.into_iter().for_each(|q| push_flat(out, q)),
        p => out.push(p),
    }
}

fn open_restriction(name: &Name, body: &Process, taken: &mut BTreeSet<String>) -> (Name, Process) {
    let text = fresh_text(name.text(), |t| taken.contains(t));
    taken.insert(text.clone());
    if text == name.text() {
        (name.clone(), body.clone())
    } else {
        let fresh = name.renamed(text);
        let body = substitute(body, name, &fresh);
        (fresh, body)
    }
}

fn open_into(
    p: &Process,
    taken: &mut BTreeSet<String>,
    opened: &mut Vec<(Name, ArgType)>,
    out: &mut Vec<Process>,
) {
    match p {
        Process::Zero => {}
        Process::Par(ps) => ps.iter().for_each(|q| open_into(q, taken, opened, out)),
        Process::Restrict { name, ty, body } => {
            let (fresh, body) = open_restriction(name, body, taken);
            opened.push((fresh, ty.clone()));
            open_into(&body, taken, opened, out);
        }
        Process::Ambient { name, body } => {
            let mut inner = Vec::new();
            open_into(body, taken, opened, &mut inner);
            out.push(Process::ambient(name.clone(), Process::par(inner)));
        }
        other => out.push(other.clone()),
    }
}

/// Strips top-level warnings and types what is left.
pub fn type_state(s: &RuntimeState) -> Result<Judgment, TypeError> {
    type_state_with(s, TypingOptions::default())
}

pub fn type_state_with(s: &RuntimeState, opts: TypingOptions) -> Result<Judgment, TypeError> {
    let rest: Vec<Process> = s
        .term
        .components()
        .into_iter()
        .filter(|c| !matches!(c, Process::Warn(_)))
        .cloned()
        .collect();
    type_process_with(&s.env, &s.groups, &Process::par(rest), opts)
}

// ---------------------------------------------------------------------------
// redex view

#[derive(Debug, Clone)]
enum VNode {
    Amb {
        name: Name,
        body: Vec<VNode>,
    },
    Sum {
        branches: Vec<(Prefix, Process)>,
    },
    Repl {
        body: Process,
        copies: Vec<Vec<VNode>>,
    },
    Warn(GroupName),
    Plain(Process),
    Gone,
}

#[derive(Debug, Clone)]
struct View {
    roots: Vec<VNode>,
    opened: Vec<(Name, ArgType)>,
}

struct Builder {
    taken: BTreeSet<String>,
    opened: Vec<(Name, ArgType)>,
    budget: usize,
}

impl Builder {
    fn build(&mut self, p: &Process, out: &mut Vec<VNode>) {
        match p {
            Process::Zero => {}
            Process::Par(ps) => ps.iter().for_each(|q| self.build(q, out)),
            Process::Restrict { name, ty, body } => {
                let (fresh, body) = open_restriction(name, body, &mut self.taken);
                self.opened.push((fresh, ty.clone()));
                self.build(&body, out);
            }
            Process::Ambient { name, body } => {
                let mut inner = Vec::new();
                self.build(body, &mut inner);
                out.push(VNode::Amb {
                    name: name.clone(),
                    body: inner,
                });
            }
            Process::Sum { branches, .. } => out.push(VNode::Sum {
                branches: branches.clone(),
            }),
            Process::Repl(body) => {
                let copies = (0..self.budget)
                    .map(|_| {
                        let mut c = Vec::new();
                        self.build(body, &mut c);
                        c
                    })
                    .collect();
                out.push(VNode::Repl {
                    body: (**body).clone(),
                    copies,
                });
            }
            Process::Warn(g) => out.push(VNode::Warn(g.clone())),
            other => out.push(VNode::Plain(other.clone())),
        }
    }
}

fn build_view(s: &RuntimeState, budget: usize) -> View {
    let mut taken: BTreeSet<String> = s.env.texts().map(str::to_string).collect();
    taken.extend(all_name_texts(&s.term));
    let mut b = Builder {
        taken,
        opened: Vec::new(),
        budget,
    };
    let mut roots = Vec::new();
    b.build(&s.term, &mut roots);
    View {
        roots,
        opened: b.opened,
    }
}

fn node_at<'a>(roots: &'a [VNode], addr: &Addr) -> Option<&'a VNode> {
    let mut list = roots;
    let mut steps = addr.0.iter().peekable();
    while let Some(step) = steps.next() {
        let Step::Idx(i) = step else { return None };
        let node = list.get(*i)?;
        match steps.peek() {
            None => return Some(node),
            Some(Step::Copy(j)) => {
                let VNode::Repl { copies, .. } = node else {
                    return None;
                };
                list = copies.get(*j)?;
                steps.next();
            }
            Some(Step::Idx(_)) => {
                let VNode::Amb { body, .. } = node else {
                    return None;
                };
                list = body;
            }
        }
    }
    None
}

fn node_mut<'a>(roots: &'a mut Vec<VNode>, addr: &Addr) -> Option<&'a mut VNode> {
    let (last, init) = addr.0.split_last()?;
    let Step::Idx(last) = last else { return None };
    list_mut(roots, &Addr(init.to_vec()))?.get_mut(*last)
}

/// The list addressed by `owner`: the roots, an ambient's body, or a copy.
fn list_mut<'a>(roots: &'a mut Vec<VNode>, owner: &Addr) -> Option<&'a mut Vec<VNode>> {
    let mut list = roots;
    let mut steps = owner.0.iter().peekable();
    while let Some(step) = steps.next() {
        let Step::Idx(i) = step else { return None };
        let node = list.get_mut(*i)?;
        match steps.peek() {
            Some(Step::Copy(j)) => {
                let j = *j;
                steps.next();
                let VNode::Repl { copies, .. } = node else {
                    return None;
                };
                list = copies.get_mut(j)?;
            }
            _ => {
                let VNode::Amb { body, .. } = node else {
                    return None;
                };
                list = body;
            }
        }
    }
    Some(list)
}

type Copies = BTreeSet<(Addr, usize)>;

struct SumRef<'a> {
    addr: Addr,
    copies: Copies,
    branches: &'a [(Prefix, Process)],
}

struct AmbRef<'a> {
    addr: Addr,
    copies: Copies,
    name: &'a Name,
    body: &'a [VNode],
}

fn scan<'a>(
    list: &'a [VNode],
    owner: &Addr,
    copies: &Copies,
    sums: &mut Vec<SumRef<'a>>,
    ambs: &mut Vec<AmbRef<'a>>,
) {
    for (i, node) in list.iter().enumerate() {
        let addr = owner.push(Step::Idx(i));
        match node {
            VNode::Sum { branches } => sums.push(SumRef {
                addr,
                copies: copies.clone(),
                branches,
            }),
            VNode::Amb { name, body } => ambs.push(AmbRef {
                addr,
                copies: copies.clone(),
                name,
                body,
            }),
            VNode::Repl { copies: cs, .. } => {
                for (j, c) in cs.iter().enumerate() {
                    let mut inner = copies.clone();
                    inner.insert((addr.clone(), j));
                    scan(c, &addr.push(Step::Copy(j)), &inner, sums, ambs);
                }
            }
            _ => {}
        }
    }
}

/// Copy usage is admissible when each replication's copies used are exactly
/// `0..k`; any other choice duplicates a redex on lower copies.
fn unfoldings(copies: &Copies) -> Option<usize> {
    let mut per: BTreeMap<&Addr, Vec<usize>> = BTreeMap::new();
    for (a, j) in copies {
        per.entry(a).or_default().push(*j);
    }
    per.values()
        .all(|js| js.iter().enumerate().all(|(i, j)| i == *j))
        .then_some(copies.len())
}

#[derive(Debug, Clone)]
struct Found {
    redex: Redex,
    copies: Copies,
}

struct Side<'a> {
    ambient: Option<(&'a Addr, &'a Name)>,
    sum: &'a SumRef<'a>,
    branch: usize,
}

struct SiteScan<'a> {
    site: &'a Addr,
    out: &'a mut Vec<Found>,
}

impl SiteScan<'_> {
    fn add(&mut self, rule: Rule, sync: &Name, sides: [Side<'_>; 2]) {
        let mut copies = Copies::new();
        for s in &sides {
            copies.extend(s.sum.copies.iter().cloned());
        }
        let Some(n) = unfoldings(&copies) else {
            return;
        };
        let participants = sides.map(|s| Participant {
            ambient: s.ambient.map(|(a, _)| a.strip(self.site)),
            sum: s.sum.addr.strip(self.site),
            branch: s.branch,
            ambient_name: s.ambient.map(|(_, n)| n.text().to_string()),
        });
        self.out.push(Found {
            redex: Redex {
                site: self.site.clone(),
                rule,
                participants,
                sync: sync.text().to_string(),
                repl_unfoldings: n,
            },
            copies,
        });
    }
}

fn cap_branches<'a>(s: &'a SumRef<'_>, op: CapOp) -> impl Iterator<Item = (usize, &'a Name)> + 'a {
    s.branches
        .iter()
        .enumerate()
        .filter_map(move |(i, (p, _))| match p {
            Prefix::Cap { op: o, name } if *o == op => Some((i, name)),
            _ => None,
        })
}

fn outputs<'a>(s: &'a SumRef<'_>, dir: Direction) -> impl Iterator<Item = (usize, &'a Name)> + 'a {
    s.branches
        .iter()
        .enumerate()
        .filter_map(move |(i, (p, _))| match p {
            Prefix::Output {
                dir: d, channel, ..
            } if *d == dir => Some((i, channel)),
            _ => None,
        })
}

fn inputs<'a>(s: &'a SumRef<'_>, dir: Direction) -> impl Iterator<Item = (usize, &'a Name)> + 'a {
    s.branches
        .iter()
        .enumerate()
        .filter_map(move |(i, (p, _))| match p {
            Prefix::Input {
                dir: d, channel, ..
            } if *d == dir => Some((i, channel)),
            _ => None,
        })
}

struct AmbInfo<'a> {
    amb: AmbRef<'a>,
    sums: Vec<SumRef<'a>>,
    children: Vec<AmbRef<'a>>,
}

fn amb_side<'a>(info: &'a AmbInfo<'_>) -> Option<(&'a Addr, &'a Name)> {
    Some((&info.amb.addr, info.amb.name))
}

fn visit_site(list: &[VNode], site: &Addr, site_copies: &Copies, out: &mut Vec<Found>) {
    let mut sums = Vec::new();
    let mut ambs = Vec::new();
    scan(list, site, site_copies, &mut sums, &mut ambs);
    let infos: Vec<AmbInfo> = ambs
        .into_iter()
        .map(|amb| {
            let mut s = Vec::new();
            let mut c = Vec::new();
            scan(amb.body, &amb.addr, &amb.copies, &mut s, &mut c);
            AmbInfo {
                amb,
                sums: s,
                children: c,
            }
        })
        .collect();
    for info in &infos {
        if unfoldings(&info.amb.copies).is_some() {
            visit_site(info.amb.body, &info.amb.addr, &info.amb.copies, out);
        }
    }
    let mut sc = SiteScan { site, out };

    // movement and merge between siblings, sibling communication
    for a in &infos {
        for b in &infos {
            if a.amb.addr == b.amb.addr {
                continue;
            }
            for (sa, sb) in a
                .sums
                .iter()
                .flat_map(|x| b.sums.iter().map(move |y| (x, y)))
            {
                let pairs: [(Rule, CapOp, CapOp); 2] = [
                    (Rule::RedIn, CapOp::Enter, CapOp::Accept),
                    (Rule::RedMerge, CapOp::MergePlus, CapOp::MergeMinus),
                ];
                for (rule, plus, minus) in pairs {
                    for (i, h) in cap_branches(sa, plus) {
                        for (j, k) in cap_branches(sb, minus) {
                            if h.text() == k.text() {
                                sc.add(
                                    rule,
                                    h,
                                    [
                                        Side {
                                            ambient: amb_side(a),
                                            sum: sa,
                                            branch: i,
                                        },
                                        Side {
                                            ambient: amb_side(b),
                                            sum: sb,
                                            branch: j,
                                        },
                                    ],
                                );
                            }
                        }
                    }
                }
                for (i, c) in outputs(sa, Direction::S2s) {
                    for (j, d) in inputs(sb, Direction::S2s) {
                        if c.text() == d.text() {
                            sc.add(
                                Rule::RedSibling,
                                c,
                                [
                                    Side {
                                        ambient: amb_side(a),
                                        sum: sa,
                                        branch: i,
                                    },
                                    Side {
                                        ambient: amb_side(b),
                                        sum: sb,
                                        branch: j,
                                    },
                                ],
                            );
                        }
                    }
                }
            }
        }
    }

    // exit: a child b of a leaves a
    for a in &infos {
        for b in &a.children {
            let mut b_sums = Vec::new();
            let mut ignored = Vec::new();
            scan(b.body, &b.addr, &b.copies, &mut b_sums, &mut ignored);
            for sb in &b_sums {
                for (i, h) in cap_branches(sb, CapOp::Exit) {
                    for sa in &a.sums {
                        for (j, k) in cap_branches(sa, CapOp::Expel) {
                            if h.text() == k.text() {
                                sc.add(
                                    Rule::RedOut,
                                    h,
                                    [
                                        Side {
                                            ambient: Some((&b.addr, b.name)),
                                            sum: sb,
                                            branch: i,
                                        },
                                        Side {
                                            ambient: amb_side(a),
                                            sum: sa,
                                            branch: j,
                                        },
                                    ],
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    // communication inside the site and across one ambient boundary
    for s1 in &sums {
        for s2 in &sums {
            if s1.addr == s2.addr {
                continue;
            }
            for (i, c) in outputs(s1, Direction::Local) {
                for (j, d) in inputs(s2, Direction::Local) {
                    if c.text() == d.text() {
                        sc.add(
                            Rule::RedLocal,
                            c,
                            [
                                Side {
                                    ambient: None,
                                    sum: s1,
                                    branch: i,
                                },
                                Side {
                                    ambient: None,
                                    sum: s2,
                                    branch: j,
                                },
                            ],
                        );
                    }
                }
            }
        }
    }
    for s in &sums {
        for a in &infos {
            for sa in &a.sums {
                for (i, c) in outputs(s, Direction::P2c) {
                    for (j, d) in inputs(sa, Direction::C2p) {
                        if c.text() == d.text() {
                            sc.add(
                                Rule::RedParentOutput,
                                c,
                                [
                                    Side {
                                        ambient: None,
                                        sum: s,
                                        branch: i,
                                    },
                                    Side {
                                        ambient: amb_side(a),
                                        sum: sa,
                                        branch: j,
                                    },
                                ],
                            );
                        }
                    }
                }
                for (i, c) in outputs(sa, Direction::C2p) {
                    for (j, d) in inputs(s, Direction::P2c) {
                        if c.text() == d.text() {
                            sc.add(
                                Rule::RedParentInput,
                                c,
                                [
                                    Side {
                                        ambient: amb_side(a),
                                        sum: sa,
                                        branch: i,
                                    },
                                    Side {
                                        ambient: None,
                                        sum: s,
                                        branch: j,
                                    },
                                ],
                            );
                        }
                    }
                }
            }
        }
    }
}

fn enumerate_view(view: &View) -> Vec<Found> {
    let mut out = Vec::new();
    visit_site(&view.roots, &Addr::default(), &Copies::new(), &mut out);
    out.sort_by(|a, b| a.redex.cmp(&b.redex));
    out
}

/// Every enabled redex, unfolding each replication at most `repl_budget` times.
pub fn enumerate_redexes(s: &RuntimeState, repl_budget: usize) -> Vec<Redex> {
    enumerate_view(&build_view(s, repl_budget))
        .into_iter()
        .map(|f| f.redex)
        .collect()
}

pub fn apply_redex(s: &RuntimeState, r: &Redex) -> Result<Outcome, StaleRedex> {
    apply_redex_with(s, r, Semantics::default())
}

pub fn apply_redex_with(
    s: &RuntimeState,
    r: &Redex,
    sem: Semantics,
) -> Result<Outcome, StaleRedex> {
    let view = build_view(s, r.repl_unfoldings);
    let found = enumerate_view(&view)
        .into_iter()
        .find(|f| {
            f.redex.rule == r.rule
                && f.redex.site == r.site
                && f.redex
                    .participants
                    .iter()
                    .zip(&r.participants)
                    .all(|(x, y)| x.same_position(y))
        })
        .ok_or_else(|| StaleRedex(r.to_string()))?;
    Ok(fire(s, &view, &found, sem))
}

/// Every successor, in enumeration order.
pub fn successors(s: &RuntimeState, repl_budget: usize) -> Vec<(Redex, Outcome)> {
    successors_with(s, repl_budget, Semantics::default())
}

pub fn successors_with(
    s: &RuntimeState,
    repl_budget: usize,
    sem: Semantics,
) -> Vec<(Redex, Outcome)> {
    let view = build_view(s, repl_budget);
    enumerate_view(&view)
        .into_iter()
        .map(|f| {
            let o = fire(s, &view, &f, sem);
            (f.redex, o)
        })
        .collect()
}

/// Host and mover groups of a `RedIn` redex; `None` for other rules.
pub fn entry_groups(s: &RuntimeState, r: &Redex) -> Option<(GroupName, GroupName)> {
    if r.rule != Rule::RedIn {
        return None;
    }
    let view = build_view(s, r.repl_unfoldings);
    let name_at = |p: &Participant| match node_at(&view.roots, &r.site.join(p.ambient.as_ref()?)) {
        Some(VNode::Amb { name, .. }) => Some(name.clone()),
        _ => None,
    };
    let mover = name_at(&r.participants[0])?;
    let host = name_at(&r.participants[1])?;
    Some((s.group_of(&view, &host), s.group_of(&view, &mover)))
}

fn fold_list(list: &[VNode], owner: &Addr, touched: &Copies, out: &mut Vec<Process>) {
    for (i, node) in list.iter().enumerate() {
        fold_node(node, &owner.push(Step::Idx(i)), touched, out);
    }
}

fn fold_node(node: &VNode, addr: &Addr, touched: &Copies, out: &mut Vec<Process>) {
    match node {
        VNode::Amb { name, body } => {
            let mut inner = Vec::new();
            fold_list(body, addr, touched, &mut inner);
            out.push(Process::ambient(name.clone(), Process::par(inner)));
        }
        VNode::Sum { branches } => out.push(Process::Sum {
            flavor: branches[0].0.flavor(),
            branches: branches.clone(),
        }),
        VNode::Repl { body, copies } => {
            out.push(Process::repl(body.clone()));
            for (j, c) in copies.iter().enumerate() {
                if touched.contains(&(addr.clone(), j)) {
                    fold_list(c, &addr.push(Step::Copy(j)), touched, out);
                }
            }
        }
        VNode::Warn(g) => out.push(Process::Warn(g.clone())),
        VNode::Plain(p) => push_flat(out, p.clone()),
        VNode::Gone => {}
    }
}

/// Removes the node at `addr`, returning it folded into a process.
fn take_folded(roots: &mut Vec<VNode>, addr: &Addr, touched: &Copies) -> Process {
    let node = node_mut(roots, addr).expect("participant address");
    let taken = std::mem::replace(node, VNode::Gone);
    let mut out = Vec::new();
    fold_node(&taken, addr, touched, &mut out);
    Process::par(out)
}

fn branch_at(roots: &[VNode], addr: &Addr, branch: usize) -> (Prefix, Process) {
    match node_at(roots, addr) {
        Some(VNode::Sum { branches }) => branches[branch].clone(),
        _ => panic!("redex participant at {addr} is not a choice"),
    }
}

fn set(roots: &mut Vec<VNode>, addr: &Addr, node: VNode) {
    *node_mut(roots, addr).expect("participant address") = node;
}

fn fire(s: &RuntimeState, view: &View, f: &Found, sem: Semantics) -> Outcome {
    let r = &f.redex;
    let mut roots = view.roots.clone();
    let site = &r.site;
    let [p0, p1] = &r.participants;
    let sum0 = site.join(&p0.sum);
    let sum1 = site.join(&p1.sum);
    let amb0 = p0.ambient.as_ref().map(|a| site.join(a));
    let amb1 = p1.ambient.as_ref().map(|a| site.join(a));
    let (pre0, cont0) = branch_at(&roots, &sum0, p0.branch);
    let (pre1, cont1) = branch_at(&roots, &sum1, p1.branch);
    let touched = &f.copies;
    let mut emitted_warn = None;

    match r.rule {
        Rule::RedIn => {
            set(&mut roots, &sum0, VNode::Plain(cont0));
            set(&mut roots, &sum1, VNode::Plain(cont1));
            let mover = take_folded(&mut roots, amb0.as_ref().unwrap(), touched);
            list_mut(&mut roots, amb1.as_ref().unwrap())
                .expect("host ambient")
                .push(VNode::Plain(mover));
        }
        Rule::RedOut => {
            set(&mut roots, &sum0, VNode::Plain(cont0));
            set(&mut roots, &sum1, VNode::Plain(cont1));
            let child_addr = amb0.as_ref().unwrap();
            let child_name = match node_at(&roots, child_addr) {
                Some(VNode::Amb { name, .. }) => name.clone(),
                _ => unreachable!("exiting participant is an ambient"),
            };
            let g_child = s.group_of(view, &child_name);
            let child = take_folded(&mut roots, child_addr, touched);
            let target = list_mut(&mut roots, site).expect("site list");
            target.push(VNode::Plain(child));
            if site.is_top() {
                target.push(VNode::Warn(g_child.clone()));
                emitted_warn = Some(g_child);
            } else {
                let host_name = match node_at(&roots, site) {
                    Some(VNode::Amb { name, .. }) => name.clone(),
                    _ => unreachable!("site is an ambient"),
                };
                let g_host = s.group_of(view, &host_name);
                if !member_group(&g_host, &s.groups.stay(&g_child)) {
                    return Outcome::Error(ErrorVerdict {
                        kind: ErrorKind::Exit,
                        host: g_host,
                        offender: g_child,
                    });
                }
            }
        }
        Rule::RedMerge => {
            let plus_addr = amb0.as_ref().unwrap();
            let minus_addr = amb1.as_ref().unwrap();
            let receiver = match node_at(&roots, plus_addr) {
                Some(VNode::Amb { name, .. }) => name.clone(),
                _ => unreachable!("merge participant is an ambient"),
            };
            let g_a = s.group_of(view, &receiver);
            set(&mut roots, &sum0, VNode::Plain(cont0));
            set(&mut roots, &sum1, VNode::Plain(Process::Zero));
            let rest = match take_folded(&mut roots, minus_addr, touched) {
                Process::Ambient { body, .. } => *body,
                _ => unreachable!("merge participant is an ambient"),
            };
            let env = view_env(s, view);
            let mut offenders = groups_of(&env, &s.groups, &cont1);
            offenders.extend(groups_of(&env, &s.groups, &rest));
            if sem.strict_merge {
                let mut inner = Vec::new();
                if let Some(VNode::Amb { body, .. }) = node_at(&roots, plus_addr) {
                    fold_list(body, plus_addr, touched, &mut inner);
                }
                offenders.extend(groups_of(&env, &s.groups, &Process::par(inner)));
            }
            if let Some(bad) = offenders
                .into_iter()
                .find(|g| !member_group(&g_a, &s.groups.stay(g)))
            {
                return Outcome::Error(ErrorVerdict {
                    kind: ErrorKind::Merge,
                    host: g_a,
                    offender: bad,
                });
            }
            let body = list_mut(&mut roots, plus_addr).expect("receiving ambient");
            body.push(VNode::Plain(cont1));
            body.push(VNode::Plain(rest));
        }
        Rule::RedLocal | Rule::RedParentOutput | Rule::RedParentInput | Rule::RedSibling => {
            let Prefix::Output { payload, .. } = pre0 else {
                unreachable!("sender is an output")
            };
            let Prefix::Input { binder, .. } = pre1 else {
                unreachable!("receiver is an input")
            };
            set(&mut roots, &sum0, VNode::Plain(cont0));
            set(
                &mut roots,
                &sum1,
                VNode::Plain(substitute(&cont1, &binder, &payload)),
            );
        }
    }

    let mut comps = Vec::new();
    fold_list(&roots, &Addr::default(), touched, &mut comps);
    let closed = s.reclose(Process::par(comps), &view.opened);
    Outcome::Next {
        state: RuntimeState::from_closed(&closed, s.base_env.clone(), s.groups.clone()),
        emitted_warn,
    }
}

fn view_env(s: &RuntimeState, view: &View) -> TypeEnv {
    let mut env = s.env.clone();
    for (n, t) in &view.opened {
        let _ = env.extend(n, t.clone());
    }
    env
}

/// Groups synthesized for `p`, read off the syntax when `p` does not type.
fn groups_of(env: &TypeEnv, groups: &GroupTable, p: &Process) -> GroupSet {
    match type_process(env, groups, p) {
        Ok(j) => j.groups,
        Err(_) => top_level_ambient_groups(env, p),
    }
}

//! Group-type system: capability well-formedness, capability/group
//! compatibility, and the synthesis judgment `Γ ⊢ P : Ḡ; Δ`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::Model;
use crate::pretty;
use crate::syntax::{
    free_names, fresh_text, substitute, ArgType, CapType, GroupName, GroupSet, GroupTable, Label,
    Name, NameKind, Prefix, Process,
};

/// Γ: names to argument types. Domain membership is by identifier text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnv {
    entries: BTreeMap<String, ArgType>,
}

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv::default()
    }

    /// `Γ, n : T`, refused when `n ∈ Dom(Γ)`; the existing type is returned.
    pub fn extend(&mut self, name: &Name, ty: ArgType) -> Result<(), ArgType> {
        if let Some(old) = self.entries.get(name.text()) {
            return Err(old.clone());
        }
        self.entries.insert(name.text().to_string(), ty);
        Ok(())
    }

    pub fn with(&self, name: &Name, ty: ArgType) -> TypeEnv {
        let mut env = self.clone();
        env.entries.insert(name.text().to_string(), ty);
        env
    }

    pub fn get(&self, name: &Name) -> Option<&ArgType> {
        self.entries.get(name.text())
    }

    pub fn get_text(&self, text: &str) -> Option<&ArgType> {
        self.entries.get(text)
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.contains_key(text)
    }

    /// Declared names, each carrying the kind its type implies.
    pub fn iter(&self) -> impl Iterator<Item = (Name, &ArgType)> {
        self.entries
            .iter()
            .map(|(t, ty)| (Name::new(t.clone(), NameKind::of(ty)), ty))
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Ḡ` and `Δ` of a successful judgment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub groups: GroupSet,
    pub caps: BTreeSet<CapType>,
}

impl Judgment {
    fn union(mut self, other: Judgment) -> Judgment {
        self.groups.extend(other.groups);
        self.caps.extend(other.caps);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeErrorKind {
    IllFormedCap,
    StayViolation,
    IncompatCap,
    PrefixMismatch,
    ChannelMismatch,
    UnknownName,
    KindMismatch,
    /// Declaration-level: a group's cross set is not contained in its stay set.
    CrossNotInStay,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::IllFormedCap => "ill_formed_cap",
            TypeErrorKind::StayViolation => "stay_violation",
            TypeErrorKind::IncompatCap => "incompat_cap",
            TypeErrorKind::PrefixMismatch => "prefix_mismatch",
            TypeErrorKind::ChannelMismatch => "channel_mismatch",
            TypeErrorKind::UnknownName => "unknown_name",
            TypeErrorKind::KindMismatch => "kind_mismatch",
            TypeErrorKind::CrossNotInStay => "cross_not_in_stay",
        })
    }
}

/// A failed premise, located by a root-to-leaf child-index path.
///
/// Child indices: component index under a parallel composition, branch index
/// under a choice, and 0 under restriction, replication and ambients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind}: {subject} ({context}) at {path:?}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub subject: String,
    pub context: String,
    pub path: Vec<usize>,
    /// `(host, mover)` pair violating capability well-formedness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<(GroupName, GroupName)>,
}

impl TypeError {
    fn new(kind: TypeErrorKind, subject: impl fmt::Display, context: impl Into<String>) -> Self {
        TypeError {
            kind,
            subject: subject.to_string(),
            context: context.into(),
            path: Vec::new(),
            witness: None,
        }
    }

    fn at(mut self, path: &[usize]) -> Self {
        self.path = path.to_vec();
        self
    }
}

/// Failure witness of capability well-formedness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllFormed {
    pub host: GroupName,
    pub mover: GroupName,
}

/// Membership with `Univ` read as "every group".
pub fn member_group(g: &GroupName, s: &GroupSet) -> bool {
    s.contains(g) || s.iter().any(GroupName::is_univ)
}

/// Capability-type well-formedness: for `ea`/`ee`, every host group must be
/// in the cross set of every mover group. `mm` types are always well formed.
pub fn well_formed_cap(y: &CapType, groups: &GroupTable) -> Result<(), IllFormed> {
    if y.label == Label::Mm {
        return Ok(());
    }
    for host in &y.hosts {
        for mover in &y.movers {
            if !member_group(host, &groups.cross(mover)) {
                return Err(IllFormed {
                    host: host.clone(),
                    mover: mover.clone(),
                });
            }
        }
    }
    Ok(())
}

/// `Y ⊳ G`: `Y` is well formed and `G` is one of its movers or hosts (plain membership).
pub fn compatible(y: &CapType, g: &GroupName, groups: &GroupTable) -> bool {
    well_formed_cap(y, groups).is_ok() && (y.movers.contains(g) || y.hosts.contains(g))
}

/// First ill-formed capability type nested anywhere in `t`.
pub fn type_well_formed(t: &ArgType, groups: &GroupTable) -> Result<(), IllFormed> {
    match t {
        ArgType::Group(_) => Ok(()),
        ArgType::Cap(y) => well_formed_cap(y, groups),
        ArgType::Chan(inner) => type_well_formed(inner, groups),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypingOptions {
    /// Admit ill-formed capability types. Only for building negative controls.
    #[doc(hidden)]
    pub skip_cap_well_formedness: bool,
}

pub fn type_process(
    env: &TypeEnv,
    groups: &GroupTable,
    p: &Process,
) -> Result<Judgment, TypeError> {
    type_process_with(env, groups, p, TypingOptions::default())
}

pub fn type_process_with(
    env: &TypeEnv,
    groups: &GroupTable,
    p: &Process,
    opts: TypingOptions,
) -> Result<Judgment, TypeError> {
    Checker { groups, opts }.synth(env, p, &mut Vec::new())
}

struct Checker<'a> {
    groups: &'a GroupTable,
    opts: TypingOptions,
}

impl Checker<'_> {
    fn check_wf(&self, subject: &Name, t: &ArgType, path: &[usize]) -> Result<(), TypeError> {
        if self.opts.skip_cap_well_formedness {
            return Ok(());
        }
        type_well_formed(t, self.groups).map_err(|w| ill_formed(subject, w).at(path))
    }

    /// Looks up a name used in a position that requires `kind`.
    fn lookup<'e>(
        &self,
        env: &'e TypeEnv,
        name: &Name,
        kind: NameKind,
        path: &[usize],
    ) -> Result<&'e ArgType, TypeError> {
        if name.kind() != kind {
            return Err(kind_mismatch(name, kind).at(path));
        }
        let ty = env
            .get(name)
            .ok_or_else(|| TypeError::new(TypeErrorKind::UnknownName, name, "not in Γ").at(path))?;
        if NameKind::of(ty) != kind && kind != NameKind::Channel {
            return Err(kind_mismatch(name, kind).at(path));
        }
        Ok(ty)
    }

    /// Extends Γ with a binder, alpha-renaming it when its text is already in `Dom(Γ)`.
    fn bind(
        &self,
        env: &TypeEnv,
        binder: &Name,
        ty: &ArgType,
        body: &Process,
    ) -> (TypeEnv, Process) {
        if !env.contains(binder.text()) {
            return (env.with(binder, ty.clone()), body.clone());
        }
        let used = crate::syntax::all_name_texts(body);
        let fresh = binder.renamed(fresh_text(binder.text(), |t| {
            env.contains(t) || used.contains(t)
        }));
        (
            env.with(&fresh, ty.clone()),
            substitute(body, binder, &fresh),
        )
    }

    fn synth(
        &self,
        env: &TypeEnv,
        p: &Process,
        path: &mut Vec<usize>,
    ) -> Result<Judgment, TypeError> {
        match p {
            // runtime forms are inert for typing
            Process::Zero
            | Process::Warn(_)
            | Process::ExError { .. }
            | Process::MergeError { .. } => Ok(Judgment::default()),
            Process::Restrict { name, ty, body } => {
                self.check_wf(name, ty, path)?;
                let (env, body) = self.bind(env, name, ty, body);
                self.child(&env, &body, path, 0)
            }
            Process::Par(ps) => {
                let mut acc = Judgment::default();
                for (i, q) in ps.iter().enumerate() {
                    acc = acc.union(self.child(env, q, path, i)?);
                }
                Ok(acc)
            }
            Process::Repl(body) => self.child(env, body, path, 0),
            Process::Ambient { name, body } => {
                let ty = self.lookup(env, name, NameKind::Ambient, path)?;
                let ArgType::Group(g) = ty else {
                    return Err(kind_mismatch(name, NameKind::Ambient).at(path));
                };
                let inner = self.child(env, body, path, 0)?;
                for gk in &inner.groups {
                    if !member_group(g, &self.groups.stay(gk)) {
                        return Err(TypeError::new(
                            TypeErrorKind::StayViolation,
                            gk,
                            format!("{g} ∉ S_{gk} (ambient {name})"),
                        )
                        .at(path));
                    }
                }
                for y in &inner.caps {
                    if !compatible(y, g, self.groups) && !self.bypassed_compat(y, g) {
                        return Err(TypeError::new(
                            TypeErrorKind::IncompatCap,
                            pretty::cap_type(y),
                            format!("{g} (ambient {name})"),
                        )
                        .at(path));
                    }
                }
                Ok(Judgment {
                    groups: [g.clone()].into(),
                    caps: BTreeSet::new(),
                })
            }
            Process::Sum { branches, .. } => {
                let mut acc = Judgment::default();
                for (i, (prefix, cont)) in branches.iter().enumerate() {
                    path.push(i);
                    let j = self.branch(env, prefix, cont, path);
                    path.pop();
                    acc = acc.union(j?);
                }
                Ok(acc)
            }
        }
    }

    fn bypassed_compat(&self, y: &CapType, g: &GroupName) -> bool {
        self.opts.skip_cap_well_formedness && (y.movers.contains(g) || y.hosts.contains(g))
    }

    fn child(
        &self,
        env: &TypeEnv,
        p: &Process,
        path: &mut Vec<usize>,
        index: usize,
    ) -> Result<Judgment, TypeError> {
        path.push(index);
        let r = self.synth(env, p, path);
        path.pop();
        r
    }

    fn branch(
        &self,
        env: &TypeEnv,
        prefix: &Prefix,
        cont: &Process,
        path: &mut Vec<usize>,
    ) -> Result<Judgment, TypeError> {
        match prefix {
            Prefix::Cap { op, name } => {
                let ty = self.lookup(env, name, NameKind::Capability, path)?;
                let ArgType::Cap(y) = ty else {
                    return Err(kind_mismatch(name, NameKind::Capability).at(path));
                };
                if !y.admits(*op) {
                    return Err(TypeError::new(
                        TypeErrorKind::PrefixMismatch,
                        name,
                        format!("{op} ∉ {}", pretty::cap_type(y)),
                    )
                    .at(path));
                }
                self.check_wf(name, ty, path)?;
                let mut j = self.synth(env, cont, path)?;
                j.caps.insert(y.clone());
                Ok(j)
            }
            Prefix::Output {
                channel, payload, ..
            } => {
                let payload_ty = self.channel_payload(env, channel, path)?;
                let actual = env.get(payload).ok_or_else(|| {
                    TypeError::new(TypeErrorKind::UnknownName, payload, "not in Γ").at(path)
                })?;
                if actual != payload_ty {
                    return Err(TypeError::new(
                        TypeErrorKind::ChannelMismatch,
                        payload,
                        format!(
                            "{channel} carries {}, got {}",
                            pretty::type_expr(payload_ty),
                            pretty::type_expr(actual)
                        ),
                    )
                    .at(path));
                }
                self.synth(env, cont, path)
            }
            Prefix::Input {
                channel, binder, ..
            } => {
                let payload_ty = self.channel_payload(env, channel, path)?.clone();
                let (env, cont) = self.bind(env, binder, &payload_ty, cont);
                self.synth(&env, &cont, path)
            }
        }
    }

    fn channel_payload<'e>(
        &self,
        env: &'e TypeEnv,
        channel: &Name,
        path: &[usize],
    ) -> Result<&'e ArgType, TypeError> {
        match self.lookup(env, channel, NameKind::Channel, path)? {
            ArgType::Chan(t) => Ok(t),
            other => Err(TypeError::new(
                TypeErrorKind::ChannelMismatch,
                channel,
                format!("not a channel: {}", pretty::type_expr(other)),
            )
            .at(path)),
        }
    }
}

fn kind_mismatch(name: &Name, expected: NameKind) -> TypeError {
    let expected = match expected {
        NameKind::Ambient => "ambient",
        NameKind::Channel => "channel",
        NameKind::Capability => "capability",
    };
    TypeError::new(
        TypeErrorKind::KindMismatch,
        name,
        format!("{expected} name expected"),
    )
}

fn ill_formed(subject: &Name, w: IllFormed) -> TypeError {
    let mut e = TypeError::new(
        TypeErrorKind::IllFormedCap,
        subject,
        format!("({}, {})", w.host, w.mover),
    );
    e.witness = Some((w.host, w.mover));
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Ok,
    Error,
}

/// Result of checking a whole model. Serializes as
/// `{status, groups[], deltas[], errors[{kind, subject, context, path}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub status: CheckStatus,
    pub groups: Vec<GroupName>,
    pub deltas: Vec<String>,
    pub errors: Vec<TypeError>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.status == CheckStatus::Ok
    }
}

/// Declaration-level findings: cross sets outside stay sets, ill-formed types in Γ.
pub fn declaration_findings(m: &Model, opts: TypingOptions) -> Vec<TypeError> {
    let mut errors = Vec::new();
    for g in m.groups.iter() {
        let outside = g.cross_outside_stay();
        if !outside.is_empty() {
            let list: Vec<_> = outside.iter().map(GroupName::as_str).collect();
            errors.push(TypeError::new(
                TypeErrorKind::CrossNotInStay,
                &g.name,
                format!("cross ⊄ stay: {}", list.join(", ")),
            ));
        }
    }
    if !opts.skip_cap_well_formedness {
        for (name, ty) in m.env.iter() {
            if let Err(w) = type_well_formed(ty, &m.groups) {
                errors.push(ill_formed(&name, w));
            }
        }
    }
    errors
}

pub fn check_model(m: &Model) -> CheckReport {
    check_model_with(m, TypingOptions::default())
}

pub fn check_model_with(m: &Model, opts: TypingOptions) -> CheckReport {
    let errors = declaration_findings(m, opts);
    if !errors.is_empty() {
        return CheckReport {
            status: CheckStatus::Error,
            groups: Vec::new(),
            deltas: Vec::new(),
            errors,
        };
    }
    match type_process_with(&m.env, &m.groups, &m.system, opts) {
        Ok(j) => CheckReport {
            status: CheckStatus::Ok,
            groups: j.groups.into_iter().collect(),
            deltas: j.caps.iter().map(pretty::cap_type).collect(),
            errors: Vec::new(),
        },
        Err(e) => CheckReport {
            status: CheckStatus::Error,
            groups: Vec::new(),
            deltas: Vec::new(),
            errors: vec![e],
        },
    }
}

/// Groups of the ambients of `p` that are not nested inside another ambient,
/// read straight off the syntax.
pub fn top_level_ambient_groups(env: &TypeEnv, p: &Process) -> GroupSet {
    let mut out = GroupSet::new();
    scan_top(env, p, &mut out);
    out
}

fn scan_top(env: &TypeEnv, p: &Process, out: &mut GroupSet) {
    match p {
        Process::Ambient { name, .. } => {
            if let Some(ArgType::Group(g)) = env.get(name) {
                out.insert(g.clone());
            }
        }
        Process::Par(ps) => ps.iter().for_each(|q| scan_top(env, q, out)),
        Process::Repl(b) => scan_top(env, b, out),
        Process::Restrict { name, ty, body } => {
            let env = env.with(name, ty.clone());
            scan_top(&env, body, out)
        }
        Process::Sum { branches, .. } => {
            for (prefix, cont) in branches {
                match prefix {
                    Prefix::Input {
                        channel, binder, ..
                    } => {
                        if let Some(ArgType::Chan(t)) = env.get(channel) {
                            let env = env.with(binder, (**t).clone());
                            scan_top(&env, cont, out);
                        }
                    }
                    _ => scan_top(env, cont, out),
                }
            }
        }
        _ => {}
    }
}

/// Names free in `p` but missing from Γ.
pub fn undeclared_names(env: &TypeEnv, p: &Process) -> Vec<Name> {
    free_names(p)
        .into_iter()
        .filter(|n| !env.contains(n.text()))
        .collect()
}

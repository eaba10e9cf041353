//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use bioamb::typing::TypingOptions;
use bioamb::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_AMBIENTS: usize = 4;
pub const MAX_GROUPS: usize = 3;
pub const MAX_PREFIXES: usize = 6;

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("models")
        .join(name)
}

pub fn load(name: &str) -> Model {
    let src = std::fs::read_to_string(model_path(name)).expect("fixture readable");
    parse_model(&src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn subset(rng: &mut ChaCha8Rng, pool: &[GroupName], min: usize) -> GroupSet {
    loop {
        let s: GroupSet = pool.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        if s.len() >= min || pool.len() < min {
            return s;
        }
    }
}

fn ops(label: Label) -> [CapOp; 2] {
    match label {
        Label::Ea => [CapOp::Enter, CapOp::Accept],
        Label::Ee => [CapOp::Exit, CapOp::Expel],
        Label::Mm => [CapOp::MergePlus, CapOp::MergeMinus],
    }
}

fn random_groups(rng: &mut ChaCha8Rng) -> (Vec<GroupName>, GroupTable) {
    let n = rng.gen_range(1..=MAX_GROUPS);
    let gs: Vec<GroupName> = (0..n).map(|i| GroupName::new(format!("G{i}"))).collect();
    let mut table = GroupTable::new();
    for g in &gs {
        let stay = if rng.gen_bool(0.25) {
            [GroupName::univ()].into()
        } else {
            subset(rng, &gs, 1)
        };
        let pool: Vec<GroupName> = if stay.contains(&GroupName::univ()) {
            gs.clone()
        } else {
            stay.iter().cloned().collect()
        };
        let cross = subset(rng, &pool, 0);
        table.insert(GroupDecl::new(g.as_str(), stay, cross));
    }
    (gs, table)
}

/// A well-formed capability type over `gs`.
fn random_cap_type(rng: &mut ChaCha8Rng, gs: &[GroupName], table: &GroupTable) -> CapType {
    let mut label = *[Label::Ea, Label::Ee, Label::Mm].choose(rng).unwrap();
    let movers = subset(rng, gs, 1);
    let allowed: Vec<GroupName> = gs
        .iter()
        .filter(|h| movers.iter().all(|m| member_group(h, &table.cross(m))))
        .cloned()
        .collect();
    let hosts = if label == Label::Mm || allowed.is_empty() {
        label = Label::Mm;
        subset(rng, gs, 1)
    } else {
        subset(rng, &allowed, 1)
    };
    CapType {
        movers,
        hosts,
        label,
    }
}

struct Node {
    name: Name,
    group: GroupName,
    restricted: bool,
    /// Wrapped in a restriction of an unused name.
    idle: bool,
    hidden: bool,
    parent: Option<usize>,
    threads: Vec<Process>,
    prefixes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Any prefix allowed by the type system.
    Full,
    /// Movers only enter and exit, hosts only accept and expel, no merges.
    Roles,
}

struct Gen<'a> {
    groups: &'a GroupTable,
    caps: &'a [(Name, CapType)],
    chan: &'a Name,
    profile: Profile,
}

impl Gen<'_> {
    fn allowed(&self, op: CapOp, y: &CapType, g: &GroupName) -> bool {
        compatible(y, g, self.groups)
            && match (self.profile, op) {
                (Profile::Full, _) => true,
                (Profile::Roles, CapOp::Enter | CapOp::Exit) => y.movers.contains(g),
                (Profile::Roles, CapOp::Accept | CapOp::Expel) => y.hosts.contains(g),
                (Profile::Roles, _) => false,
            }
    }

    /// Every capability prefix an ambient of group `g` may carry.
    fn cap_prefixes(&self, g: &GroupName) -> Vec<Prefix> {
        let mut out = Vec::new();
        for (name, y) in self.caps {
            for op in ops(y.label) {
                if self.allowed(op, y, g) {
                    out.push(Prefix::Cap {
                        op,
                        name: name.clone(),
                    });
                }
            }
        }
        out
    }

    /// Continuation of an input on `c`: use the received capability if allowed.
    fn use_received(&self, rng: &mut ChaCha8Rng, g: &GroupName, x: &Name) -> Process {
        let y = &self.caps[0].1;
        let usable: Vec<CapOp> = ops(y.label)
            .into_iter()
            .filter(|&op| self.allowed(op, y, g))
            .collect();
        match usable.choose(rng) {
            Some(&op) => Process::prefixed(
                Prefix::Cap {
                    op,
                    name: x.clone(),
                },
                Process::Zero,
            ),
            None => Process::Zero,
        }
    }

    fn output(&self, dir: Direction) -> Process {
        Process::prefixed(
            Prefix::Output {
                dir,
                channel: self.chan.clone(),
                payload: self.caps[0].0.clone(),
            },
            Process::Zero,
        )
    }

    fn input(&self, dir: Direction, cont: Process) -> Process {
        Process::prefixed(
            Prefix::Input {
                dir,
                channel: self.chan.clone(),
                binder: Name::capability("x"),
            },
            cont,
        )
    }

    fn threads(&self, rng: &mut ChaCha8Rng, mut budget: usize, g: &GroupName) -> Vec<Process> {
        let options = self.cap_prefixes(g);
        let pick = |rng: &mut ChaCha8Rng| options.choose(rng).unwrap().clone();
        let dir = |rng: &mut ChaCha8Rng| {
            *[
                Direction::Local,
                Direction::S2s,
                Direction::P2c,
                Direction::C2p,
            ]
            .choose(rng)
            .unwrap()
        };
        let mut out = Vec::new();
        while budget > 0 {
            let (thread, cost) = match rng.gen_range(0..6) {
                0..=3 if options.is_empty() => (self.output(dir(rng)), 1),
                0 => (Process::prefixed(pick(rng), Process::Zero), 1),
                1 if budget >= 2 => {
                    let inner = Process::prefixed(pick(rng), Process::Zero);
                    (Process::prefixed(pick(rng), inner), 2)
                }
                2 if budget >= 2 => {
                    let sum =
                        Process::sum(vec![(pick(rng), Process::Zero), (pick(rng), Process::Zero)])
                            .unwrap();
                    (sum, 2)
                }
                3 => (
                    Process::repl(Process::prefixed(pick(rng), Process::Zero)),
                    1,
                ),
                5 if budget >= 2 => {
                    let cont = self.use_received(rng, g, &Name::capability("x"));
                    (self.input(dir(rng), cont), 2)
                }
                _ => (self.output(dir(rng)), 1),
            };
            out.push(thread);
            budget = budget.saturating_sub(cost);
        }
        out
    }

    /// Two complementary prefixes placed so that they can react: in sibling
    /// ambients, in a child and its parent, or side by side in one ambient.
    fn add_pair(&self, rng: &mut ChaCha8Rng, nodes: &mut [Node]) {
        let i = rng.gen_range(0..nodes.len());
        let siblings: Vec<usize> = (0..nodes.len())
            .filter(|&j| j != i && nodes[j].parent == nodes[i].parent)
            .collect();
        let (j, pair) = match rng.gen_range(0..3) {
            0 if !siblings.is_empty() => {
                let ops = *[
                    [CapOp::Enter, CapOp::Accept],
                    [CapOp::MergePlus, CapOp::MergeMinus],
                ]
                .choose(rng)
                .unwrap();
                (*siblings.choose(rng).unwrap(), Some(ops))
            }
            1 if nodes[i].parent.is_some() => {
                (nodes[i].parent.unwrap(), Some([CapOp::Exit, CapOp::Expel]))
            }
            _ => {
                let j = match nodes[i].parent {
                    Some(p) if rng.gen_bool(0.5) => p,
                    _ if !siblings.is_empty() && rng.gen_bool(0.5) => {
                        *siblings.choose(rng).unwrap()
                    }
                    _ => i,
                };
                (j, None)
            }
        };
        let extra = if i == j { 4 } else { 2 };
        if nodes[i].prefixes + extra > MAX_PREFIXES || nodes[j].prefixes + extra > MAX_PREFIXES {
            return;
        }
        let (pi, pj) = match pair {
            Some([oi, oj]) => {
                let fits: Vec<&Name> = self
                    .caps
                    .iter()
                    .filter(|(_, y)| {
                        y.label == oi.label()
                            && self.allowed(oi, y, &nodes[i].group)
                            && self.allowed(oj, y, &nodes[j].group)
                    })
                    .map(|(h, _)| h)
                    .collect();
                let Some(h) = fits.choose(rng) else {
                    return;
                };
                let pre = |op| {
                    Process::prefixed(
                        Prefix::Cap {
                            op,
                            name: (*h).clone(),
                        },
                        Process::Zero,
                    )
                };
                (pre(oi), pre(oj))
            }
            None => {
                let parent_sends = Some(j) == nodes[i].parent && rng.gen_bool(0.5);
                let (out_dir, in_dir) = if j == i {
                    (Direction::Local, Direction::Local)
                } else if parent_sends {
                    (Direction::P2c, Direction::C2p)
                } else if Some(j) == nodes[i].parent {
                    (Direction::C2p, Direction::P2c)
                } else {
                    (Direction::S2s, Direction::S2s)
                };
                let receiver = if parent_sends { i } else { j };
                let cont = self.use_received(rng, &nodes[receiver].group, &Name::capability("x"));
                let send = self.output(out_dir);
                let recv = self.input(in_dir, cont);
                if parent_sends {
                    (recv, send)
                } else {
                    (send, recv)
                }
            }
        };
        for (k, p) in [(i, pi), (j, pj)] {
            let p = if rng.gen_bool(0.25) {
                Process::repl(p)
            } else {
                p
            };
            nodes[k].threads.push(p);
            nodes[k].prefixes += 2;
        }
    }
}

/// A runtime-free model with two to four ambients, at most three groups and at
/// most six prefixes per ambient. Nesting respects stay sets and capability
/// prefixes are compatible with their ambient, so almost every model is well
/// typed; callers filter with [`is_well_typed`].
pub fn random_model(seed: u64) -> Model {
    random_model_with(seed, Profile::Full)
}

pub fn random_model_with(seed: u64, profile: Profile) -> Model {
    let mut rng = rng(seed);
    let (gs, groups) = random_groups(&mut rng);
    let mut env = TypeEnv::new();

    let ambs: Vec<(Name, GroupName)> = (0..rng.gen_range(1..=3))
        .map(|i| {
            (
                Name::ambient(format!("a{i}")),
                gs.choose(&mut rng).unwrap().clone(),
            )
        })
        .collect();
    for (n, g) in &ambs {
        env.extend(n, ArgType::Group(g.clone())).unwrap();
    }
    let caps: Vec<(Name, CapType)> = (0..rng.gen_range(1..=2))
        .map(|i| {
            (
                Name::capability(format!("h{i}")),
                random_cap_type(&mut rng, &gs, &groups),
            )
        })
        .collect();
    for (n, y) in &caps {
        env.extend(n, ArgType::Cap(y.clone())).unwrap();
    }
    let chan = Name::channel("c");
    env.extend(&chan, ArgType::chan(ArgType::Cap(caps[0].1.clone())))
        .unwrap();
    let gen = Gen {
        groups: &groups,
        caps: &caps,
        chan: &chan,
        profile,
    };

    let mut nodes: Vec<Node> = Vec::new();
    for i in 0..rng.gen_range(2..=MAX_AMBIENTS) {
        let (name, group) = ambs.choose(&mut rng).unwrap().clone();
        let hosts: Vec<usize> = (0..i)
            .filter(|&j| member_group(&nodes[j].group, &groups.stay(&group)))
            .collect();
        let parent = if !hosts.is_empty() && rng.gen_bool(0.4) {
            hosts.choose(&mut rng).copied()
        } else {
            None
        };
        let restricted = rng.gen_bool(0.15);
        let name = if restricted {
            Name::ambient(format!("n{i}"))
        } else {
            name
        };
        nodes.push(Node {
            name,
            group,
            restricted,
            idle: rng.gen_bool(0.15),
            hidden: rng.gen_bool(0.15),
            parent,
            threads: Vec::new(),
            prefixes: 0,
        });
    }
    for _ in 0..rng.gen_range(1..=4) {
        gen.add_pair(&mut rng, &mut nodes);
    }
    for i in 0..nodes.len() {
        let budget = rng.gen_range(0..=MAX_PREFIXES - nodes[i].prefixes);
        let threads = gen.threads(&mut rng, budget, &nodes[i].group);
        nodes[i].threads.extend(threads);
    }

    fn build(i: usize, nodes: &[Node]) -> Process {
        let mut body = nodes[i].threads.clone();
        body.extend(
            (0..nodes.len())
                .filter(|&j| nodes[j].parent == Some(i))
                .map(|j| build(j, nodes)),
        );
        let ty = ArgType::Group(nodes[i].group.clone());
        let mut body = Process::par(body);
        if nodes[i].hidden {
            body = Process::restrict(Name::ambient(format!("j{i}")), ty.clone(), body);
        }
        let mut amb = Process::ambient(nodes[i].name.clone(), body);
        if nodes[i].restricted {
            amb = Process::restrict(nodes[i].name.clone(), ty.clone(), amb);
        }
        if nodes[i].idle {
            amb = Process::restrict(Name::ambient(format!("k{i}")), ty, amb);
        }
        amb
    }
    let roots = (0..nodes.len())
        .filter(|&i| nodes[i].parent.is_none())
        .map(|i| build(i, &nodes))
        .collect();
    Model {
        groups,
        env,
        system: Process::par(roots),
    }
}

pub fn is_well_typed(m: &Model) -> bool {
    check_model(m).is_ok()
}

/// The first `count` well-typed models from consecutive seeds starting at `start`.
pub fn well_typed_models(count: usize, start: u64) -> Vec<(u64, Model)> {
    well_typed_models_with(count, start, Profile::Full)
}

pub fn well_typed_models_with(count: usize, start: u64, profile: Profile) -> Vec<(u64, Model)> {
    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < count {
        let m = random_model_with(seed, profile);
        if is_well_typed(&m) {
            out.push((seed, m));
        }
        seed += 1;
        assert!(
            seed - start < 100 * count as u64 + 1000,
            "generator too sparse"
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Structural congruence rewrites

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    ParComm,
    ParAssocGroup,
    ParAssocFlatten,
    ParZeroAdd,
    ParZeroDrop,
    ResZeroAdd,
    ResZeroDrop,
    ResSwap,
    ExtrudeOut,
    ExtrudeIn,
    ResIntoAmbient,
    ResOutOfAmbient,
    Alpha,
    AlphaInput,
    ReplZeroAdd,
    ReplZeroDrop,
}

pub const AXIOMS: [Axiom; 16] = [
    Axiom::ParComm,
    Axiom::ParAssocGroup,
    Axiom::ParAssocFlatten,
    Axiom::ParZeroAdd,
    Axiom::ParZeroDrop,
    Axiom::ResZeroAdd,
    Axiom::ResZeroDrop,
    Axiom::ResSwap,
    Axiom::ExtrudeOut,
    Axiom::ExtrudeIn,
    Axiom::ResIntoAmbient,
    Axiom::ResOutOfAmbient,
    Axiom::Alpha,
    Axiom::AlphaInput,
    Axiom::ReplZeroAdd,
    Axiom::ReplZeroDrop,
];

fn positions(p: &Process, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    let mut visit = |i: usize, q: &Process, path: &mut Vec<usize>| {
        path.push(i);
        positions(q, path, out);
        path.pop();
    };
    match p {
        Process::Restrict { body, .. } | Process::Repl(body) | Process::Ambient { body, .. } => {
            visit(0, body, path)
        }
        Process::Par(ps) => {
            for (i, q) in ps.iter().enumerate() {
                visit(i, q, path);
            }
        }
        Process::Sum { branches, .. } => {
            for (i, (_, q)) in branches.iter().enumerate() {
                visit(i, q, path);
            }
        }
        _ => {}
    }
}

fn at_mut<'a>(p: &'a mut Process, path: &[usize]) -> &'a mut Process {
    let Some((&i, rest)) = path.split_first() else {
        return p;
    };
    let child = match p {
        Process::Restrict { body, .. } | Process::Repl(body) | Process::Ambient { body, .. } => {
            &mut **body
        }
        Process::Par(ps) => &mut ps[i],
        Process::Sum { branches, .. } => &mut branches[i].1,
        _ => unreachable!("position out of range"),
    };
    at_mut(child, rest)
}

fn fresh(rng: &mut ChaCha8Rng, taken: &BTreeSet<String>) -> String {
    loop {
        let t = format!("z{}", rng.gen_range(0..1000));
        if !taken.contains(&t) {
            return t;
        }
    }
}

/// One application of `ax` at the root of `t`, if the axiom applies there.
pub fn apply_axiom(
    t: &Process,
    ax: Axiom,
    rng: &mut ChaCha8Rng,
    taken: &BTreeSet<String>,
) -> Option<Process> {
    use Process as P;
    match (ax, t) {
        (Axiom::ParComm, P::Par(ps)) if ps.len() >= 2 => {
            let mut ps = ps.clone();
            let i = rng.gen_range(0..ps.len());
            let j = (i + rng.gen_range(1..ps.len())) % ps.len();
            ps.swap(i, j);
            Some(P::Par(ps))
        }
        (Axiom::ParAssocGroup, P::Par(ps)) if ps.len() >= 3 => {
            let mut ps = ps.clone();
            let i = rng.gen_range(0..ps.len() - 1);
            let pair: Vec<Process> = ps.drain(i..i + 2).collect();
            ps.insert(i, P::Par(pair));
            Some(P::Par(ps))
        }
        (Axiom::ParAssocFlatten, P::Par(ps)) => {
            let i = ps.iter().position(|q| matches!(q, P::Par(_)))?;
            let mut ps = ps.clone();
            let P::Par(inner) = ps.remove(i) else {
                unreachable!()
            };
            for (k, q) in inner.into_iter().enumerate() {
                ps.insert(i + k, q);
            }
            Some(P::Par(ps))
        }
        (Axiom::ParZeroAdd, _) => Some(P::Par(vec![t.clone(), P::Zero])),
        (Axiom::ParZeroDrop, P::Par(ps)) => {
            let i = ps.iter().position(Process::is_zero)?;
            let mut ps = ps.clone();
            ps.remove(i);
            Some(Process::par(ps))
        }
        (Axiom::ResZeroAdd, _) => {
            let n = Name::ambient(fresh(rng, taken));
            Some(P::Par(vec![
                t.clone(),
                Process::restrict(n, ArgType::group("G0"), P::Zero),
            ]))
        }
        (Axiom::ResZeroDrop, P::Restrict { body, .. }) if body.is_zero() => Some(P::Zero),
        (Axiom::ResSwap, P::Restrict { name, ty, body }) => match &**body {
            P::Restrict {
                name: n2,
                ty: t2,
                body: inner,
            } => Some(Process::restrict(
                n2.clone(),
                t2.clone(),
                Process::restrict(name.clone(), ty.clone(), (**inner).clone()),
            )),
            _ => None,
        },
        (Axiom::ExtrudeOut, P::Restrict { name, ty, body }) => {
            let P::Par(ps) = &**body else { return None };
            let idle: Vec<usize> = (0..ps.len())
                .filter(|&i| !occurs_free(name.text(), &ps[i]))
                .collect();
            let &i = idle.choose(rng)?;
            let mut rest = ps.clone();
            let out = rest.remove(i);
            Some(P::Par(vec![
                out,
                Process::restrict(name.clone(), ty.clone(), Process::par(rest)),
            ]))
        }
        (Axiom::ExtrudeIn, P::Par(ps)) => {
            let candidates: Vec<usize> = (0..ps.len())
                .filter(|&j| match &ps[j] {
                    P::Restrict { name, .. } => ps
                        .iter()
                        .enumerate()
                        .all(|(k, q)| k == j || !occurs_free(name.text(), q)),
                    _ => false,
                })
                .collect();
            let &j = candidates.choose(rng)?;
            let mut ps = ps.clone();
            let P::Restrict { name, ty, body } = ps[j].clone() else {
                unreachable!()
            };
            ps[j] = *body;
            Some(Process::restrict(name, ty, P::Par(ps)))
        }
        (Axiom::ResIntoAmbient, P::Restrict { name, ty, body }) => match &**body {
            P::Ambient {
                name: a,
                body: inner,
            } if a.text() != name.text() => Some(Process::ambient(
                a.clone(),
                Process::restrict(name.clone(), ty.clone(), (**inner).clone()),
            )),
            _ => None,
        },
        (Axiom::ResOutOfAmbient, P::Ambient { name: a, body }) => match &**body {
            P::Restrict {
                name,
                ty,
                body: inner,
            } if a.text() != name.text() => Some(Process::restrict(
                name.clone(),
                ty.clone(),
                Process::ambient(a.clone(), (**inner).clone()),
            )),
            _ => None,
        },
        (Axiom::Alpha, P::Restrict { name, ty, body }) => {
            let fresh = name.renamed(fresh(rng, taken));
            Some(Process::restrict(
                fresh.clone(),
                ty.clone(),
                substitute(body, name, &fresh),
            ))
        }
        (Axiom::AlphaInput, P::Sum { flavor, branches }) => {
            let inputs: Vec<usize> = (0..branches.len())
                .filter(|&i| matches!(branches[i].0, Prefix::Input { .. }))
                .collect();
            let &i = inputs.choose(rng)?;
            let mut branches = branches.clone();
            let (
                Prefix::Input {
                    dir,
                    channel,
                    binder,
                },
                cont,
            ) = branches[i].clone()
            else {
                unreachable!()
            };
            let fresh = binder.renamed(fresh(rng, taken));
            branches[i] = (
                Prefix::Input {
                    dir,
                    channel,
                    binder: fresh.clone(),
                },
                substitute(&cont, &binder, &fresh),
            );
            Some(P::Sum {
                flavor: *flavor,
                branches,
            })
        }
        (Axiom::ReplZeroAdd, P::Zero) => Some(Process::repl(P::Zero)),
        (Axiom::ReplZeroDrop, P::Repl(body)) if body.is_zero() => Some(P::Zero),
        _ => None,
    }
}

/// Applies one randomly chosen congruence axiom at a random position where it
/// applies. Returns the rewritten term and the axiom used.
pub fn rewrite_once(p: &Process, rng: &mut ChaCha8Rng) -> (Process, Axiom) {
    let mut all = Vec::new();
    positions(p, &mut Vec::new(), &mut all);
    let taken = all_name_texts(p);
    for _ in 0..200 {
        let pos = all.choose(rng).unwrap();
        let ax = *AXIOMS.choose(rng).unwrap();
        let mut q = p.clone();
        let slot = at_mut(&mut q, pos);
        if let Some(new) = apply_axiom(slot, ax, rng, &taken) {
            *slot = new;
            return (q, ax);
        }
    }
    (
        Process::Par(vec![p.clone(), Process::Zero]),
        Axiom::ParZeroAdd,
    )
}

/// Free-name texts, for comparisons that ignore kinds.
pub fn free_texts(p: &Process) -> BTreeSet<String> {
    free_names(p)
        .into_iter()
        .map(|n| n.text().to_string())
        .collect()
}

/// Names bound somewhere in `p`.
pub fn bound_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fn walk(p: &Process, out: &mut BTreeSet<Name>) {
        match p {
            Process::Restrict { name, body, .. } => {
                out.insert(name.clone());
                walk(body, out);
            }
            Process::Repl(b) | Process::Ambient { body: b, .. } => walk(b, out),
            Process::Par(ps) => ps.iter().for_each(|q| walk(q, out)),
            Process::Sum { branches, .. } => {
                for (pre, q) in branches {
                    if let Prefix::Input { binder, .. } = pre {
                        out.insert(binder.clone());
                    }
                    walk(q, out);
                }
            }
            _ => {}
        }
    }
    walk(p, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Merge configurations

/// `a[merge+ h.P | Q] | b[merge- h.R | S]` where `P`, `Q`, `R`, `S` hold child
/// ambients allowed to stay where they start. Always well typed.
pub fn merge_configuration(seed: u64) -> Model {
    let mut rng = rng(seed);
    let (gs, groups) = random_groups(&mut rng);
    let ga = gs.choose(&mut rng).unwrap().clone();
    let gb = gs.choose(&mut rng).unwrap().clone();
    let mut movers = subset(&mut rng, &gs, 0);
    let mut hosts = subset(&mut rng, &gs, 0);
    if rng.gen_bool(0.5) {
        movers.insert(ga.clone());
        hosts.insert(gb.clone());
    } else {
        hosts.insert(ga.clone());
        movers.insert(gb.clone());
    }
    if movers.is_empty() {
        movers.insert(ga.clone());
    }
    let h = Name::capability("h");
    let a = Name::ambient("a");
    let b = Name::ambient("b");
    let mut env = TypeEnv::new();
    env.extend(&a, ArgType::Group(ga.clone())).unwrap();
    env.extend(&b, ArgType::Group(gb.clone())).unwrap();
    env.extend(
        &h,
        ArgType::Cap(CapType {
            movers,
            hosts,
            label: Label::Mm,
        }),
    )
    .unwrap();
    let kids: Vec<(Name, GroupName)> = gs
        .iter()
        .enumerate()
        .map(|(i, g)| (Name::ambient(format!("c{i}")), g.clone()))
        .collect();
    for (n, g) in &kids {
        env.extend(n, ArgType::Group(g.clone())).unwrap();
    }

    let children = |rng: &mut ChaCha8Rng, host: &GroupName, max: usize| -> Process {
        let fits: Vec<&(Name, GroupName)> = kids
            .iter()
            .filter(|(_, g)| member_group(host, &groups.stay(g)))
            .collect();
        let n = if fits.is_empty() {
            0
        } else {
            rng.gen_range(0..=max)
        };
        let mut out = Vec::new();
        for _ in 0..n {
            let (c, g) = fits.choose(rng).unwrap();
            let inner: Vec<&(Name, GroupName)> = kids
                .iter()
                .filter(|(_, k)| member_group(g, &groups.stay(k)))
                .collect();
            let body = match inner.choose(rng) {
                Some((d, _)) if rng.gen_bool(0.3) => Process::ambient(d.clone(), Process::Zero),
                _ => Process::Zero,
            };
            let amb = Process::ambient(c.clone(), body);
            out.push(match rng.gen_range(0..6) {
                0 => Process::repl(amb),
                1 => {
                    let n = Name::ambient(format!("m{}", out.len()));
                    let renamed = Process::ambient(n.clone(), Process::Zero);
                    Process::restrict(n, ArgType::Group(g.clone()), renamed)
                }
                _ => amb,
            });
        }
        Process::par(out)
    };

    let p = children(&mut rng, &ga, 1);
    let q = children(&mut rng, &ga, 2);
    let r = children(&mut rng, &gb, 2);
    let s = children(&mut rng, &gb, 2);
    let plus = Process::prefixed(
        Prefix::Cap {
            op: CapOp::MergePlus,
            name: h.clone(),
        },
        p,
    );
    let minus = Process::prefixed(
        Prefix::Cap {
            op: CapOp::MergeMinus,
            name: h,
        },
        r,
    );
    let system = Process::par(vec![
        Process::ambient(a, Process::par(vec![plus, q])),
        Process::ambient(b, Process::par(vec![minus, s])),
    ]);
    Model {
        groups,
        env,
        system,
    }
}

/// Brute-force merge decision: type `a[P | Q | R | S]` and look for a stay
/// violation at the receiver itself.
pub fn merge_oracle(m: &Model) -> bool {
    let Process::Par(top) = &m.system else {
        panic!("not a merge configuration")
    };
    let (Process::Ambient { name: a, body: ab }, Process::Ambient { body: bb, .. }) =
        (&top[0], &top[1])
    else {
        panic!("not a merge configuration")
    };
    let mut merged = Vec::new();
    for (body, _) in [(ab, 0), (bb, 1)] {
        for c in body.components() {
            match c {
                Process::Sum { branches, .. } => merged.push(branches[0].1.clone()),
                other => merged.push(other.clone()),
            }
        }
    }
    let whole = Process::ambient(a.clone(), Process::par(merged));
    match bioamb::typing::type_process_with(&m.env, &m.groups, &whole, TypingOptions::default()) {
        Ok(_) => true,
        Err(e) if e.kind == TypeErrorKind::StayViolation && e.path.is_empty() => false,
        Err(e) => panic!("oracle hit an unrelated type error: {e}"),
    }
}

// ---------------------------------------------------------------------------
// Reference exploration

pub struct Reached {
    pub depth: std::collections::BTreeMap<String, usize>,
    pub states: Vec<RuntimeState>,
    pub verdicts: BTreeSet<ErrorVerdict>,
}

/// Plain sequential BFS over `successors`, no state cap.
pub fn bfs_oracle(m: &Model, max_depth: usize, budget: usize) -> Reached {
    let init = RuntimeState::initial(m);
    let mut depth = std::collections::BTreeMap::new();
    depth.insert(init.key().to_string(), 0);
    let mut states = vec![init.clone()];
    let mut verdicts = BTreeSet::new();
    let mut frontier = vec![init];
    for d in 0..max_depth {
        let mut next = Vec::new();
        for s in &frontier {
            for (_, o) in successors(s, budget) {
                match o {
                    Outcome::Next { state, .. } => {
                        if !depth.contains_key(state.key()) {
                            depth.insert(state.key().to_string(), d + 1);
                            states.push(state.clone());
                            next.push(state);
                        }
                    }
                    Outcome::Error(v) => {
                        verdicts.insert(v);
                    }
                }
            }
        }
        frontier = next;
    }
    Reached {
        depth,
        states,
        verdicts,
    }
}

/// Ambients named `name` anywhere in `p`, with their bodies.
pub fn ambients_named<'a>(p: &'a Process, name: &str, out: &mut Vec<&'a Process>) {
    match p {
        Process::Ambient { name: n, body } => {
            if n.text() == name {
                out.push(body);
            }
            ambients_named(body, name, out);
        }
        Process::Restrict { body, .. } | Process::Repl(body) => ambients_named(body, name, out),
        Process::Par(ps) => ps.iter().for_each(|q| ambients_named(q, name, out)),
        Process::Sum { branches, .. } => branches
            .iter()
            .for_each(|(_, q)| ambients_named(q, name, out)),
        _ => {}
    }
}

/// Whether some `outer` ambient has an `inner` ambient among its direct children.
pub fn directly_inside(p: &Process, outer: &str, inner: &str) -> bool {
    let mut bodies = Vec::new();
    ambients_named(p, outer, &mut bodies);
    bodies.iter().any(|b| {
        b.components().iter().any(|c| {
            let mut c = *c;
            while let Process::Restrict { body, .. } = c {
                c = body;
            }
            matches!(c, Process::Ambient { name, .. } if name.text() == inner)
        })
    })
}

/// Replaces the system of a fixture's source text.
pub fn with_system(fixture: &str, system: &str) -> Model {
    let src = std::fs::read_to_string(model_path(fixture)).unwrap();
    let head = &src[..src.rfind("\nsystem").expect("system section")];
    parse_model(&format!("{head}\nsystem {system}\n")).unwrap()
}

/// Whether the entering ambient is not a listed mover or the accepting one
/// is not a listed host of the synchronizing capability.
fn roles_swapped(s: &RuntimeState, r: &Redex) -> bool {
    let Some(ArgType::Cap(y)) = s.env().get_text(&r.sync) else {
        return false;
    };
    let group = |i: usize| {
        let name = r.participants[i].ambient_name.as_deref()?;
        match s.env().get_text(name) {
            Some(ArgType::Group(g)) => Some(g.clone()),
            _ => None,
        }
    };
    match (group(0), group(1)) {
        (Some(mover), Some(host)) => !y.movers.contains(&mover) || !y.hosts.contains(&host),
        _ => false,
    }
}

/// Counts counterexamples of `r` as `[swapped entry, incompatible merge]`,
/// or describes the first one that fits neither class.
pub fn classify_counterexamples(
    m: &Model,
    r: &TheoremReport,
    depth: usize,
) -> Result<[usize; 2], String> {
    let mut classes = [0usize; 2];
    if r.counterexamples.is_empty() {
        return Ok(classes);
    }
    let states = bfs_oracle(m, depth, 1).states;
    for c in &r.counterexamples {
        let s = states
            .iter()
            .find(|s| s.hash() == c.state)
            .ok_or_else(|| format!("state {} not reached by the oracle", c.state))?;
        let swapped_entry = c.redex.rule == Rule::RedIn
            && c.reason.contains("outside its stay set")
            && roles_swapped(s, &c.redex);
        let incompatible_merge =
            c.redex.rule == Rule::RedMerge && c.reason.contains("incompat_cap");
        if !(swapped_entry || incompatible_merge) {
            return Err(format!("{c:?}"));
        }
        classes[usize::from(incompatible_merge)] += 1;
    }
    Ok(classes)
}

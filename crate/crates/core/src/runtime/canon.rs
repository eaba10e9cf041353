//! Normal forms modulo structural congruence.
//!
//! Three passes: every binder is renamed to a unique scratch text (`%k`, which no
//! identifier can spell); restrictions are dropped when dead and pushed as far
//! inward as the congruence axioms allow; finally binders get depth-indexed
//! names and parallel components are sorted by their rendering.

use std::collections::{BTreeSet, HashMap};

use crate::pretty::pretty_process;
use crate::syntax::{free_names, occurs_free, ArgType, Name, NameKind, Prefix, Process};

/// Permutations of a restriction block are only searched up to this size.
const MAX_PERMUTED_BLOCK: usize = 6;

pub fn canonicalize(p: &Process) -> Process {
    let mut counter = 0;
    let scratch = scratch_names(p, &mut Vec::new(), &mut counter);
    let normal = norm(&scratch);
    let root_free: BTreeSet<String> = free_names(p)
        .into_iter()
        .map(|n| n.text().to_string())
        .collect();
    let mut namer = Namer {
        root_free,
        map: HashMap::new(),
    };
    namer.canon(&normal, 0)
}

fn scratch_names(p: &Process, scope: &mut Vec<(String, String)>, counter: &mut usize) -> Process {
    let rename = |n: &Name, scope: &Vec<(String, String)>| {
        scope
            .iter()
            .rev()
            .find(|(from, _)| from == n.text())
            .map_or_else(|| n.clone(), |(_, to)| n.renamed(to.clone()))
    };
    fn bind(n: &Name, scope: &mut Vec<(String, String)>, counter: &mut usize) -> Name {
        let to = format!("%{counter}");
        *counter += 1;
        scope.push((n.text().to_string(), to.clone()));
        n.renamed(to)
    }
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
            p.clone()
        }
        Process::Restrict { name, ty, body } => {
            let fresh = bind(name, scope, counter);
            let body = scratch_names(body, scope, counter);
            scope.pop();
            Process::restrict(fresh, ty.clone(), body)
        }
        Process::Par(ps) => Process::Par(
            ps.iter()
                .map(|q| scratch_names(q, scope, counter))
                .collect(),
        ),
        Process::Repl(b) => Process::repl(scratch_names(b, scope, counter)),
        Process::Ambient { name, body } => {
            Process::ambient(rename(name, scope), scratch_names(body, scope, counter))
        }
        Process::Sum { flavor, branches } => Process::Sum {
            flavor: *flavor,
            branches: branches
                .iter()
                .map(|(prefix, cont)| match prefix {
                    Prefix::Cap { op, name } => (
                        Prefix::Cap {
                            op: *op,
                            name: rename(name, scope),
                        },
                        scratch_names(cont, scope, counter),
                    ),
                    Prefix::Output {
                        dir,
                        channel,
                        payload,
                    } => (
                        Prefix::Output {
                            dir: *dir,
                            channel: rename(channel, scope),
                            payload: rename(payload, scope),
                        },
                        scratch_names(cont, scope, counter),
                    ),
                    Prefix::Input {
                        dir,
                        channel,
                        binder,
                    } => {
                        let channel = rename(channel, scope);
                        let binder = bind(binder, scope, counter);
                        let cont = scratch_names(cont, scope, counter);
                        scope.pop();
                        (
                            Prefix::Input {
                                dir: *dir,
                                channel,
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

type Binder = (Name, ArgType);

fn norm(p: &Process) -> Process {
    match p {
        Process::Zero | Process::Warn(_) | Process::ExError { .. } | Process::MergeError { .. } => {
            p.clone()
        }
        Process::Par(ps) => {
            let mut out = Vec::new();
            for q in ps {
                push_flat(&mut out, norm(q));
            }
            Process::par(out)
        }
        Process::Repl(b) => match norm(b) {
            Process::Zero => Process::Zero,
            b => Process::repl(b),
        },
        Process::Ambient { name, body } => Process::ambient(name.clone(), norm(body)),
        Process::Sum { flavor, branches } => Process::Sum {
            flavor: *flavor,
            branches: branches
                .iter()
                .map(|(prefix, cont)| (prefix.clone(), norm(cont)))
                .collect(),
        },
        Process::Restrict { .. } => {
            let (binders, body) = split_block(p);
            place(binders, norm(body))
        }
    }
}

fn push_flat(out: &mut Vec<Process>, p: Process) {
    match p {
        Process::Zero => {}
        Process::Par(ps) => out.extend(ps),
        p => out.push(p),
    }
}

fn split_block(p: &Process) -> (Vec<Binder>, &Process) {
    let mut binders = Vec::new();
    let mut cur = p;
    while let Process::Restrict { name, ty, body } = cur {
        binders.push((name.clone(), ty.clone()));
        cur = body;
    }
    (binders, cur)
}

fn wrap(binders: Vec<Binder>, body: Process) -> Process {
    binders
        .into_iter()
        .rev()
        .fold(body, |acc, (n, t)| Process::restrict(n, t, acc))
}

/// Places a block of restrictions over an already normal body, as deep as possible.
fn place(binders: Vec<Binder>, body: Process) -> Process {
    let mut binders: Vec<Binder> = binders
        .into_iter()
        .filter(|(n, _)| occurs_free(n.text(), &body))
        .collect();
    if binders.is_empty() {
        return body;
    }
    match body {
        Process::Restrict { .. } => {
            let (inner_binders, inner) = split_block(&body);
            binders.extend(inner_binders);
            let inner = inner.clone();
            place(binders, inner)
        }
        Process::Ambient { name, body } => {
            match binders.iter().position(|(n, _)| n.text() == name.text()) {
                Some(i) => {
                    let own = binders.remove(i);
                    wrap(vec![own], Process::ambient(name, place(binders, *body)))
                }
                None => Process::ambient(name, place(binders, *body)),
            }
        }
        Process::Par(comps) => place_par(binders, comps),
        stuck => wrap(binders, stuck),
    }
}

fn place_par(binders: Vec<Binder>, comps: Vec<Process>) -> Process {
    let occurs: Vec<Vec<usize>> = binders
        .iter()
        .map(|(n, _)| {
            comps
                .iter()
                .enumerate()
                .filter(|(_, c)| occurs_free(n.text(), c))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut own: Vec<Vec<Binder>> = vec![Vec::new(); comps.len()];
    let mut parent: Vec<usize> = (0..comps.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    let mut shared = Vec::new();
    for (b, at) in binders.into_iter().zip(&occurs) {
        match at.as_slice() {
            [] => {}
            [i] => own[*i].push(b),
            [first, rest @ ..] => {
                for j in rest {
                    let (x, y) = (find(&mut parent, *first), find(&mut parent, *j));
                    parent[y] = x;
                }
                shared.push((b, *first));
            }
        }
    }
    let placed: Vec<Process> = comps
        .into_iter()
        .zip(own)
        .map(|(c, bs)| place(bs, c))
        .collect();
    let mut clusters: Vec<(usize, Vec<Binder>, Vec<Process>)> = Vec::new();
    let mut out = Vec::new();
    let roots: Vec<usize> = (0..placed.len()).map(|i| find(&mut parent, i)).collect();
    let linked: BTreeSet<usize> = shared.iter().map(|(_, i)| find(&mut parent, *i)).collect();
    for (i, c) in placed.into_iter().enumerate() {
        if !linked.contains(&roots[i]) {
            push_flat(&mut out, c);
            continue;
        }
        match clusters.iter_mut().find(|(r, _, _)| *r == roots[i]) {
            Some((_, _, cs)) => cs.push(c),
            None => clusters.push((roots[i], Vec::new(), vec![c])),
        }
    }
    for (b, i) in shared {
        let r = find(&mut parent, i);
        if let Some((_, bs, _)) = clusters.iter_mut().find(|(root, _, _)| *root == r) {
            bs.push(b);
        }
    }
    for (_, bs, cs) in clusters {
        out.push(wrap(bs, Process::Par(cs)));
    }
    Process::par(out)
}

struct Namer {
    root_free: BTreeSet<String>,
    map: HashMap<String, String>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for i in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(i, n - 1);
            out.push(p);
        }
    }
    out
}

impl Namer {
    fn level_name(&self, kind: NameKind, depth: usize) -> String {
        let letter = match kind {
            NameKind::Ambient => "a",
            NameKind::Channel => "c",
            NameKind::Capability => "h",
        };
        let mut sep = String::from("_");
        loop {
            let text = format!("{letter}{sep}{depth}");
            if !self.root_free.contains(&text) {
                return text;
            }
            sep.push('_');
        }
    }

    fn name(&self, n: &Name) -> Name {
        match self.map.get(n.text()) {
            Some(t) => n.renamed(t.clone()),
            None => n.clone(),
        }
    }

    fn canon(&mut self, p: &Process, depth: usize) -> Process {
        match p {
            Process::Zero
            | Process::Warn(_)
            | Process::ExError { .. }
            | Process::MergeError { .. } => p.clone(),
            Process::Par(ps) => {
                let mut keyed: Vec<(String, Process)> = ps
                    .iter()
                    .map(|q| {
                        let c = self.canon(q, depth);
                        (pretty_process(&c), c)
                    })
                    .collect();
                keyed.sort_by(|a, b| a.0.cmp(&b.0));
                Process::Par(keyed.into_iter().map(|(_, c)| c).collect())
            }
            Process::Repl(b) => Process::repl(self.canon(b, depth)),
            Process::Ambient { name, body } => {
                Process::ambient(self.name(name), self.canon(body, depth))
            }
            Process::Sum { flavor, branches } => Process::Sum {
                flavor: *flavor,
                branches: branches
                    .iter()
                    .map(|(prefix, cont)| match prefix {
                        Prefix::Cap { op, name } => (
                            Prefix::Cap {
                                op: *op,
                                name: self.name(name),
                            },
                            self.canon(cont, depth),
                        ),
                        Prefix::Output {
                            dir,
                            channel,
                            payload,
                        } => (
                            Prefix::Output {
                                dir: *dir,
                                channel: self.name(channel),
                                payload: self.name(payload),
                            },
                            self.canon(cont, depth),
                        ),
                        Prefix::Input {
                            dir,
                            channel,
                            binder,
                        } => {
                            let channel = self.name(channel);
                            let text = self.level_name(binder.kind(), depth);
                            self.map.insert(binder.text().to_string(), text.clone());
                            let cont = self.canon(cont, depth + 1);
                            (
                                Prefix::Input {
                                    dir: *dir,
                                    channel,
                                    binder: binder.renamed(text),
                                },
                                cont,
                            )
                        }
                    })
                    .collect(),
            },
            Process::Restrict { .. } => {
                let (binders, body) = split_block(p);
                let orders = if binders.len() <= MAX_PERMUTED_BLOCK {
                    permutations(binders.len())
                } else {
                    vec![(0..binders.len()).collect()]
                };
                let mut best: Option<(String, Process)> = None;
                for order in orders {
                    let mut renamed = Vec::with_capacity(binders.len());
                    for (k, &i) in order.iter().enumerate() {
                        let (n, t) = &binders[i];
                        let text = self.level_name(n.kind(), depth + k);
                        self.map.insert(n.text().to_string(), text.clone());
                        renamed.push((n.renamed(text), t.clone()));
                    }
                    let candidate = wrap(renamed, self.canon(body, depth + binders.len()));
                    let rendered = pretty_process(&candidate);
                    if best.as_ref().is_none_or(|(r, _)| rendered < *r) {
                        best = Some((rendered, candidate));
                    }
                }
                best.expect("at least one ordering").1
            }
        }
    }
}

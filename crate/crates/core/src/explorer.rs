//! Bounded breadth-first exploration of the reachable state space.
//!
//! Each BFS level is expanded in parallel and merged back in frontier order, so
//! the resulting graph is identical to a sequential run.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::parser::Model;
use crate::runtime::{
    entry_groups, enumerate_redexes, successors_with, type_state_with, ErrorVerdict, Outcome,
    Redex, Rule, RuntimeState, Semantics,
};
use crate::syntax::GroupName;
use crate::typing::{check_model_with, member_group, TypeError, TypingOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub max_depth: usize,
    pub max_states: usize,
    pub repl_budget: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_depth: 32,
            max_states: 10_000,
            repl_budget: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExploreOptions {
    pub bounds: Bounds,
    pub semantics: Semantics,
    pub typing: TypingOptions,
}

impl From<Bounds> for ExploreOptions {
    fn from(bounds: Bounds) -> Self {
        ExploreOptions {
            bounds,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInfo {
    pub pretty: String,
    pub depth: usize,
    pub typed: bool,
    pub warns: Vec<GroupName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    State(String),
    Error(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub redex: Redex,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitted_warn: Option<GroupName>,
}

/// A reachable error verdict with a shortest trace from the initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    #[serde(flatten)]
    pub verdict: ErrorVerdict,
    pub depth: usize,
    pub witness: Vec<Redex>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateGraph {
    pub initial: String,
    pub states: IndexMap<String, StateInfo>,
    pub edges: Vec<Edge>,
    pub errors: Vec<ErrorRecord>,
    pub truncated: bool,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("model is not well typed: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    IllTyped(Vec<TypeError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremStatus {
    Pass,
    Fail,
    TruncatedPass,
}

impl fmt::Display for TheoremStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremStatus::Pass => "pass",
            TheoremStatus::Fail => "fail",
            TheoremStatus::TruncatedPass => "truncated-pass",
        })
    }
}

/// A transition out of a well-typed state that breaks subject reduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub state: String,
    pub state_pretty: String,
    pub redex: Redex,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub status: TheoremStatus,
    pub states_checked: usize,
    pub transitions_checked: usize,
    pub counterexamples: Vec<Counterexample>,
    #[serde(skip)]
    pub graph: StateGraph,
}

pub fn explore(m: &Model, b: Bounds) -> Result<StateGraph, ExploreError> {
    explore_with(m, &b.into())
}

pub fn explore_with(m: &Model, opts: &ExploreOptions) -> Result<StateGraph, ExploreError> {
    run(m, opts, false).map(|(g, _)| g)
}

pub fn verify_subject_reduction(m: &Model, b: Bounds) -> Result<TheoremReport, ExploreError> {
    verify_with(m, &b.into())
}

pub fn verify_with(m: &Model, opts: &ExploreOptions) -> Result<TheoremReport, ExploreError> {
    let (graph, counterexamples) = run(m, opts, true)?;
    let states_checked = graph
        .states
        .values()
        .filter(|s| s.typed && s.depth < opts.bounds.max_depth)
        .count();
    let transitions_checked = graph
        .edges
        .iter()
        .filter(|e| graph.states.get(&e.from).is_some_and(|s| s.typed))
        .count();
    let status = if !counterexamples.is_empty() {
        TheoremStatus::Fail
    } else if graph.truncated {
        TheoremStatus::TruncatedPass
    } else {
        TheoremStatus::Pass
    };
    Ok(TheoremReport {
        status,
        states_checked,
        transitions_checked,
        counterexamples,
        graph,
    })
}

struct Expansion {
    steps: Vec<(Redex, Outcome)>,
    problems: Vec<(usize, String)>,
}

fn check_step(s: &RuntimeState, r: &Redex, o: &Outcome, opts: &ExploreOptions) -> Option<String> {
    if r.rule == Rule::RedIn {
        if let Some((host, mover)) = entry_groups(s, r) {
            if !member_group(&host, &s.groups().stay(&mover)) {
                return Some(format!(
                    "{mover} ambient entered a {host} host outside its stay set"
                ));
            }
        }
    }
    match o {
        Outcome::Next { state, .. } => type_state_with(state, opts.typing)
            .err()
            .map(|e| format!("successor does not type: {e}")),
        Outcome::Error(v) => member_group(&v.host, &s.groups().stay(&v.offender)).then(|| {
            format!(
                "{v} signalled although {} is in the stay set of {}",
                v.host, v.offender
            )
        }),
    }
}

fn expand(s: &RuntimeState, typed: bool, opts: &ExploreOptions, verify: bool) -> Expansion {
    let steps = successors_with(s, opts.bounds.repl_budget, opts.semantics);
    let problems = if verify && typed {
        steps
            .iter()
            .enumerate()
            .filter_map(|(i, (r, o))| check_step(s, r, o, opts).map(|why| (i, why)))
            .collect()
    } else {
        Vec::new()
    };
    Expansion { steps, problems }
}

fn run(
    m: &Model,
    opts: &ExploreOptions,
    verify: bool,
) -> Result<(StateGraph, Vec<Counterexample>), ExploreError> {
    let report = check_model_with(m, opts.typing);
    if !report.is_ok() {
        return Err(ExploreError::IllTyped(report.errors));
    }
    let b = opts.bounds;
    let init = RuntimeState::initial(m);
    let mut g = StateGraph {
        initial: init.hash(),
        bounds: b,
        ..Default::default()
    };
    let info = |s: &RuntimeState, depth| StateInfo {
        pretty: s.key().to_string(),
        depth,
        typed: type_state_with(s, opts.typing).is_ok(),
        warns: s.warns(),
    };
    g.states.insert(init.hash(), info(&init, 0));
    let mut parent: HashMap<String, (String, Redex)> = HashMap::new();
    let trace_to = |parent: &HashMap<String, (String, Redex)>, mut h: String| {
        let mut trace = Vec::new();
        while let Some((p, r)) = parent.get(&h) {
            trace.push(r.clone());
            h = p.clone();
        }
        trace.reverse();
        trace
    };
    let mut counterexamples = Vec::new();
    let mut frontier = vec![init];
    let mut depth = 0;
    while !frontier.is_empty() {
        if depth >= b.max_depth {
            g.truncated = frontier
                .par_iter()
                .any(|s| !enumerate_redexes(s, b.repl_budget).is_empty());
            break;
        }
        let expansions: Vec<Expansion> = frontier
            .par_iter()
            .map(|s| expand(s, g.states[&s.hash()].typed, opts, verify))
            .collect();
        let mut next = Vec::new();
        for (s, exp) in frontier.iter().zip(expansions) {
            let from = s.hash();
            for (i, why) in exp.problems {
                counterexamples.push(Counterexample {
                    state: from.clone(),
                    state_pretty: s.key().to_string(),
                    redex: exp.steps[i].0.clone(),
                    reason: why,
                });
            }
            for (redex, outcome) in exp.steps {
                match outcome {
                    Outcome::Next {
                        state,
                        emitted_warn,
                    } => {
                        let h = state.hash();
                        if !g.states.contains_key(&h) {
                            if g.states.len() >= b.max_states {
                                g.truncated = true;
                                continue;
                            }
                            g.states.insert(h.clone(), info(&state, depth + 1));
                            parent.insert(h.clone(), (from.clone(), redex.clone()));
                            next.push(state);
                        }
                        g.edges.push(Edge {
                            from: from.clone(),
                            redex,
                            target: Target::State(h),
                            emitted_warn,
                        });
                    }
                    Outcome::Error(verdict) => {
                        let idx = match g.errors.iter().position(|e| e.verdict == verdict) {
                            Some(i) => i,
                            None => {
                                let mut witness = trace_to(&parent, from.clone());
                                witness.push(redex.clone());
                                g.errors.push(ErrorRecord {
                                    verdict,
                                    depth: depth + 1,
                                    witness,
                                });
                                g.errors.len() - 1
                            }
                        };
                        g.edges.push(Edge {
                            from: from.clone(),
                            redex,
                            target: Target::Error(idx),
                            emitted_warn: None,
                        });
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok((g, counterexamples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(format!(
                "unknown graph format `{other}` (expected json or dot)"
            )),
        }
    }
}

pub fn export_graph(g: &StateGraph, format: GraphFormat) -> Vec<u8> {
    match format {
        GraphFormat::Json => {
            let mut out = serde_json::to_vec_pretty(g).expect("graph serializes");
            out.push(b'\n');
            out
        }
        GraphFormat::Dot => to_dot(g).into_bytes(),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn to_dot(g: &StateGraph) -> String {
    let mut s = String::from("digraph states {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (h, info) in &g.states {
        let mut attrs = format!("label=\"{}\"", escape(&info.pretty));
        if *h == g.initial {
            attrs.push_str(", style=bold");
        }
        if !info.typed {
            attrs.push_str(", color=red");
        }
        let _ = writeln!(s, "  \"{h}\" [{attrs}];");
    }
    for (i, e) in g.errors.iter().enumerate() {
        let _ = writeln!(
            s,
            "  \"error{i}\" [shape=doublecircle, label=\"{}\"];",
            escape(&e.verdict.to_string())
        );
    }
    for e in &g.edges {
        let to = match &e.target {
            Target::State(h) => h.clone(),
            Target::Error(i) => format!("error{i}"),
        };
        let mut label = format!("{} {}", e.redex.rule, e.redex.sync);
        if let Some(w) = &e.emitted_warn {
            let _ = write!(label, " / warn({w})");
        }
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{to}\" [label=\"{}\"];",
            e.from,
            escape(&label)
        );
    }
    s.push_str("}\n");
    s
}

//! Group-typed BioAmbients: syntax, parser, static group-type checker, typed
//! reduction semantics and a bounded state-space explorer.

pub mod cli;
pub mod explorer;
pub mod parser;
pub mod pretty;
pub mod runtime;
pub mod syntax;
pub mod typing;

pub use explorer::{
    explore, export_graph, verify_subject_reduction, Bounds, GraphFormat, StateGraph, TheoremReport,
};
pub use parser::{parse_model, Model, ParseError, ParseErrorKind};
pub use pretty::{pretty_model, pretty_process};
pub use runtime::{
    apply_redex, canonicalize, enumerate_redexes, successors, type_state, ErrorKind, ErrorVerdict,
    Outcome, Redex, Rule, RuntimeState,
};
pub use syntax::*;
pub use typing::{
    check_model, compatible, member_group, type_process, well_formed_cap, CheckReport, CheckStatus,
    Judgment, TypeEnv, TypeError, TypeErrorKind,
};

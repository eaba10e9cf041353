//! Command-line driver. Exit codes: 0 ok, 1 type error (or a failed
//! subject-reduction check), 2 error state reached, 3 parse error, 4 usage.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::explorer::{
    explore, export_graph, verify_subject_reduction, Bounds, GraphFormat, StateGraph, TheoremStatus,
};
use crate::parser::{parse_model, Model};
use crate::runtime::{
    apply_redex, enumerate_redexes, ErrorVerdict, Outcome, Redex, RuntimeState, TraceRecord,
};
use crate::typing::check_model;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TYPE: i32 = 1;
pub const EXIT_ERROR_STATE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bioamb", version, about = "Group-typed BioAmbients toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Type-check a model.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List enabled redexes; optionally apply some, or pick them interactively.
    Step {
        file: PathBuf,
        /// Index of the redex to apply; repeat to apply several in sequence.
        #[arg(long = "apply", value_name = "K")]
        apply: Vec<usize>,
        #[arg(long)]
        interactive: bool,
        #[arg(long, default_value_t = 1)]
        repl_budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Reduce with uniformly random choices from a seeded generator.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_steps: usize,
        #[arg(long, default_value_t = 1)]
        repl_budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Explore the bounded state space and report reachable errors.
    Explore(ExploreArgs),
    /// Check subject reduction over the bounded state space.
    Verify(ExploreArgs),
}

#[derive(Debug, Args)]
struct ExploreArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 32)]
    depth: usize,
    #[arg(long, default_value_t = 10_000)]
    max_states: usize,
    #[arg(long, default_value_t = 1)]
    repl_budget: usize,
    /// Write the state graph in DOT format.
    #[arg(long, value_name = "PATH")]
    dot: Option<PathBuf>,
    /// Write the state graph as JSON.
    #[arg(long = "json-out", value_name = "PATH")]
    json_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

impl ExploreArgs {
    fn bounds(&self) -> Bounds {
        Bounds {
            max_depth: self.depth,
            max_states: self.max_states,
            repl_budget: self.repl_budget,
        }
    }
}

struct Io<'a> {
    stdin: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs the CLI on `args` (without the program name).
pub fn run_cli(
    args: &[String],
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(
        std::iter::once("bioamb".to_string()).chain(args.iter().cloned()),
    ) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = Io {
        stdin,
        out: stdout,
        err: stderr,
    };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(io.err, "{msg}");
            code
        }
    }
}

struct Failure(i32, String);

type CliResult = Result<i32, Failure>;

fn load(path: &Path) -> Result<Model, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    parse_model(&src).map_err(|e| Failure(EXIT_PARSE, format!("{}:{e}", path.display())))
}

fn load_checked(path: &Path) -> Result<Model, Failure> {
    let m = load(path)?;
    let report = check_model(&m);
    if !report.is_ok() {
        let lines: Vec<String> = report
            .errors
            .iter()
            .map(|e| format!("error: {e}"))
            .collect();
        return Err(Failure(EXIT_TYPE, lines.join("\n")));
    }
    Ok(m)
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure(EXIT_USAGE, format!("i/o error: {e}"))
}

fn dispatch(cmd: Command, io: &mut Io) -> CliResult {
    match cmd {
        Command::Check { file, json } => check(&file, json, io),
        Command::Step {
            file,
            apply,
            interactive,
            repl_budget,
            json,
        } => step(&file, &apply, interactive, repl_budget, json, io),
        Command::Run {
            file,
            seed,
            max_steps,
            repl_budget,
            json,
        } => run(&file, seed, max_steps, repl_budget, json, io),
        Command::Explore(a) => explore_cmd(&a, io),
        Command::Verify(a) => verify_cmd(&a, io),
    }
}

fn check(file: &Path, json: bool, io: &mut Io) -> CliResult {
    let m = load(file)?;
    let report = check_model(&m);
    if json {
        let s = serde_json::to_string_pretty(&report).expect("report serializes");
        writeln!(io.out, "{s}").map_err(io_failure)?;
    } else if report.is_ok() {
        let groups: Vec<&str> = report.groups.iter().map(|g| g.as_str()).collect();
        writeln!(io.out, "groups: {}", groups.join(", ")).map_err(io_failure)?;
        if !report.deltas.is_empty() {
            writeln!(io.out, "capabilities: {}", report.deltas.join(", ")).map_err(io_failure)?;
        }
    } else {
        for e in &report.errors {
            writeln!(io.err, "error: {e}").map_err(io_failure)?;
        }
    }
    Ok(if report.is_ok() { EXIT_OK } else { EXIT_TYPE })
}

fn record(step: usize, r: &Redex, s: &RuntimeState, warn: Option<crate::GroupName>) -> TraceRecord {
    TraceRecord {
        step,
        rule: r.rule,
        sync: r.sync.clone(),
        site: r.site.clone(),
        emitted_warn: warn,
        state_pretty: s.key().to_string(),
        state_hash: s.hash(),
    }
}

fn print_record(rec: &TraceRecord, json: bool, io: &mut Io) -> Result<(), Failure> {
    if json {
        writeln!(
            io.out,
            "{}",
            serde_json::to_string(rec).expect("record serializes")
        )
        .map_err(io_failure)
    } else {
        let warn = rec
            .emitted_warn
            .as_ref()
            .map(|g| format!(" [warn {g}]"))
            .unwrap_or_default();
        writeln!(
            io.out,
            "{:>3}. {} on {} at {}{warn}\n     {}",
            rec.step, rec.rule, rec.sync, rec.site, rec.state_pretty
        )
        .map_err(io_failure)
    }
}

fn print_error(
    step: usize,
    r: &Redex,
    v: &ErrorVerdict,
    json: bool,
    io: &mut Io,
) -> Result<(), Failure> {
    if json {
        let mut value = serde_json::to_value(v).expect("verdict serializes");
        value["step"] = json!(step);
        value["rule"] = json!(r.rule);
        writeln!(io.out, "{value}").map_err(io_failure)
    } else {
        writeln!(
            io.out,
            "{step:>3}. {} on {} at {}\n     {v}",
            r.rule, r.sync, r.site
        )
        .map_err(io_failure)
    }
}

fn print_state(s: &RuntimeState, json: bool, io: &mut Io) -> Result<(), Failure> {
    if json {
        let v = json!({ "state_pretty": s.key(), "state_hash": s.hash() });
        writeln!(io.out, "{v}").map_err(io_failure)
    } else {
        writeln!(io.out, "state {}: {}", s.hash(), s.key()).map_err(io_failure)
    }
}

fn print_redexes(rs: &[Redex], json: bool, io: &mut Io) -> Result<(), Failure> {
    if json {
        let v = json!({ "redexes": rs });
        return writeln!(io.out, "{v}").map_err(io_failure);
    }
    if rs.is_empty() {
        return writeln!(io.out, "no redexes").map_err(io_failure);
    }
    for (i, r) in rs.iter().enumerate() {
        writeln!(io.out, "[{i}] {r}").map_err(io_failure)?;
    }
    Ok(())
}

/// Applies redex `k` of `s`: `Ok(Some(next))`, `Ok(None)` on an error verdict.
fn apply_index(
    s: &RuntimeState,
    k: usize,
    step_no: usize,
    budget: usize,
    json: bool,
    io: &mut Io,
) -> Result<Option<RuntimeState>, Failure> {
    let rs = enumerate_redexes(s, budget);
    let r = rs
        .get(k)
        .ok_or_else(|| Failure(EXIT_USAGE, format!("no redex {k}: {} enabled", rs.len())))?;
    match apply_redex(s, r).map_err(|e| Failure(EXIT_USAGE, e.to_string()))? {
        Outcome::Next {
            state,
            emitted_warn,
        } => {
            print_record(&record(step_no, r, &state, emitted_warn), json, io)?;
            Ok(Some(state))
        }
        Outcome::Error(v) => {
            print_error(step_no, r, &v, json, io)?;
            Ok(None)
        }
    }
}

fn step(
    file: &Path,
    apply: &[usize],
    interactive: bool,
    budget: usize,
    json: bool,
    io: &mut Io,
) -> CliResult {
    let m = load_checked(file)?;
    let mut s = RuntimeState::initial(&m);
    print_state(&s, json, io)?;
    let mut n = 0;
    for &k in apply {
        n += 1;
        match apply_index(&s, k, n, budget, json, io)? {
            Some(next) => s = next,
            None => return Ok(EXIT_ERROR_STATE),
        }
    }
    if !interactive {
        print_redexes(&enumerate_redexes(&s, budget), json, io)?;
        return Ok(EXIT_OK);
    }
    loop {
        let rs = enumerate_redexes(&s, budget);
        print_redexes(&rs, json, io)?;
        if rs.is_empty() {
            return Ok(EXIT_OK);
        }
        write!(io.out, "> ").map_err(io_failure)?;
        io.out.flush().map_err(io_failure)?;
        let mut line = String::new();
        if io.stdin.read_line(&mut line).map_err(io_failure)? == 0 {
            return Ok(EXIT_OK);
        }
        let line = line.trim();
        if line == "q" || line == "quit" {
            return Ok(EXIT_OK);
        }
        let Ok(k) = line.parse::<usize>() else {
            writeln!(io.err, "expected a redex index or q").map_err(io_failure)?;
            continue;
        };
        if k >= rs.len() {
            writeln!(io.err, "no redex {k}").map_err(io_failure)?;
            continue;
        }
        n += 1;
        match apply_index(&s, k, n, budget, json, io)? {
            Some(next) => s = next,
            None => return Ok(EXIT_ERROR_STATE),
        }
    }
}

fn run(
    file: &Path,
    seed: u64,
    max_steps: usize,
    budget: usize,
    json: bool,
    io: &mut Io,
) -> CliResult {
    let m = load_checked(file)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = RuntimeState::initial(&m);
    print_state(&s, json, io)?;
    for n in 1..=max_steps {
        let rs = enumerate_redexes(&s, budget);
        if rs.is_empty() {
            break;
        }
        let k = rng.gen_range(0..rs.len());
        match apply_index(&s, k, n, budget, json, io)? {
            Some(next) => s = next,
            None => return Ok(EXIT_ERROR_STATE),
        }
    }
    Ok(EXIT_OK)
}

fn write_graph(a: &ExploreArgs, g: &StateGraph) -> Result<(), Failure> {
    let write = |path: &Path, format| {
        std::fs::write(path, export_graph(g, format))
            .map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))
    };
    if let Some(p) = &a.dot {
        write(p, GraphFormat::Dot)?;
    }
    if let Some(p) = &a.json_out {
        write(p, GraphFormat::Json)?;
    }
    Ok(())
}

fn summarize(g: &StateGraph, io: &mut Io) -> Result<(), Failure> {
    writeln!(
        io.out,
        "states: {}, transitions: {}, errors: {}{}",
        g.states.len(),
        g.edges.len(),
        g.errors.len(),
        if g.truncated { " (truncated)" } else { "" }
    )
    .map_err(io_failure)?;
    for e in &g.errors {
        writeln!(io.out, "{} at depth {}", e.verdict, e.depth).map_err(io_failure)?;
        for (i, r) in e.witness.iter().enumerate() {
            writeln!(io.out, "  {}. {r}", i + 1).map_err(io_failure)?;
        }
    }
    Ok(())
}

fn explore_cmd(a: &ExploreArgs, io: &mut Io) -> CliResult {
    let m = load_checked(&a.file)?;
    let g = explore(&m, a.bounds()).map_err(|e| Failure(EXIT_TYPE, e.to_string()))?;
    write_graph(a, &g)?;
    if a.json {
        io.out
            .write_all(&export_graph(&g, GraphFormat::Json))
            .map_err(io_failure)?;
    } else {
        summarize(&g, io)?;
    }
    Ok(if g.errors.is_empty() {
        EXIT_OK
    } else {
        EXIT_ERROR_STATE
    })
}

fn verify_cmd(a: &ExploreArgs, io: &mut Io) -> CliResult {
    let m = load_checked(&a.file)?;
    let report =
        verify_subject_reduction(&m, a.bounds()).map_err(|e| Failure(EXIT_TYPE, e.to_string()))?;
    write_graph(a, &report.graph)?;
    if a.json {
        let s = serde_json::to_string_pretty(&report).expect("report serializes");
        writeln!(io.out, "{s}").map_err(io_failure)?;
    } else {
        writeln!(
            io.out,
            "subject reduction: {} ({} states, {} transitions checked)",
            report.status, report.states_checked, report.transitions_checked
        )
        .map_err(io_failure)?;
        for c in &report.counterexamples {
            writeln!(
                io.out,
                "counterexample at {}: {}\n  {}\n  {}",
                c.state, c.redex, c.state_pretty, c.reason
            )
            .map_err(io_failure)?;
        }
    }
    Ok(match report.status {
        TheoremStatus::Fail => EXIT_TYPE,
        _ => EXIT_OK,
    })
}

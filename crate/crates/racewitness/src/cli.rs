//! Command-line front end.
//!
//! Exit codes: 0 when the run finished and found nothing to report, 1 when
//! `analyze` reported races (or `fuzz` found a disagreement), 2 on errors.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baselines::{races as baseline_races, Method};
use crate::decision::{race_decision, Decision, Reject};
use crate::io::{emit_raw, emit_witness, read_file, TraceFormat};
use crate::m2::{m2, M2Options, RaceSet};
use crate::oracle::{oracle_races, random_trace, Params, DEFAULT_MAX_EVENTS};
use crate::trace::{exhibits_race, BuildOptions, EventId, ThreadId, Trace};
use crate::workload::{scale_raw, ScaleParams};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_RACES: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "racewitness",
    version,
    about = "Sound predictive data-race detection with witness reorderings"
)]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report every predictable race with a witness reordering.
    Analyze(AnalyzeArgs),
    /// Decide a single pair of events, given by 1-based line index.
    Check(CheckArgs),
    /// Run a vector-clock baseline.
    Baseline(BaselineArgs),
    /// Exhaustive ground truth for tiny traces.
    Oracle(OracleArgs),
    /// Compare the analysis with the oracle on random traces.
    Fuzz(FuzzArgs),
    /// Write a large synthetic trace.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    file: PathBuf,
    #[arg(long, default_value = "simple")]
    format: TraceFormat,
    /// Do not synthesize an initial write per variable.
    #[arg(long)]
    no_init_writes: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Trace, String> {
        let opts = BuildOptions {
            init_writes: !self.no_init_writes,
        };
        let t = read_file(&self.file, self.format, opts).map_err(|e| format!("{}: {e}", self.file.display()))?;
        for w in t.warnings() {
            log::warn!("{w}");
        }
        Ok(t)
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Print a witness reordering for each race.
    #[arg(long)]
    witness: bool,
    #[arg(long)]
    json: bool,
    /// Worker threads; 0 picks one per core.
    #[arg(long, env = "RACEWITNESS_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Stop after this many candidate pairs.
    #[arg(long)]
    max_pairs: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, num_args = 2, value_names = ["I1", "I2"], required = true)]
    pair: Vec<u32>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    method: Method,
    /// Keep only pairs the predictive analysis reported or left unresolved.
    #[arg(long)]
    filter_sound: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_EVENTS)]
    max_events: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct FuzzArgs {
    /// Seed range, `A..B` (B exclusive).
    #[arg(long, value_parser = parse_seeds, default_value = "0..100")]
    seeds: Range<u64>,
    /// Generator parameters, e.g. `threads=3,events=12,vars=2,locks=2`.
    #[arg(long, value_parser = parse_params, default_value = "threads=2,events=10,vars=2,locks=1")]
    params: Params,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1_000_000)]
    events: usize,
    #[arg(long, default_value_t = 8)]
    threads: usize,
    #[arg(long, default_value_t = 8)]
    locks: usize,
    #[arg(long, default_value_t = 100)]
    races: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed '{a}': {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad seed '{b}': {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

fn parse_params(s: &str) -> Result<Params, String> {
    let mut p = Params::default();
    for kv in s.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{kv}'"))?;
        let v: usize = v.trim().parse().map_err(|e| format!("bad value for {k}: {e}"))?;
        match k.trim() {
            "threads" => p.threads = v,
            "events" => p.events = v,
            "vars" => p.vars = v,
            "locks" => p.locks = v,
            other => return Err(format!("unknown parameter '{other}'")),
        }
    }
    Ok(p)
}

#[derive(Serialize)]
struct EventJson {
    index: u32,
    thread: String,
    op: &'static str,
    target: String,
    location: Option<String>,
}

fn event_json(t: &Trace, e: EventId) -> EventJson {
    let ev = t.event(e);
    EventJson {
        index: ev.index,
        thread: t.thread_name(ev.thread).to_string(),
        op: ev.op.mnemonic(),
        target: t.target_name(e).to_string(),
        location: t.location_name(ev.location).map(str::to_string),
    }
}

#[derive(Serialize)]
struct RaceJson {
    e1: EventJson,
    e2: EventJson,
    /// Input indices of the witness, init writes omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<u32>>,
    /// Critical-section completion enlarged a cone for this pair.
    cp4_used: bool,
    /// Further pairs with the same location pair.
    duplicates: usize,
}

#[derive(Serialize)]
struct UnresolvedJson {
    e1: EventJson,
    e2: EventJson,
    reason: Reject,
    cp4_used: bool,
    inserted: bool,
}

#[derive(Serialize)]
struct AnalyzeJson {
    events: usize,
    threads: usize,
    races: Vec<RaceJson>,
    unresolved: Vec<UnresolvedJson>,
    z: usize,
    c: usize,
    examined: usize,
    pruned_vars: usize,
    truncated: bool,
    complete: bool,
}

/// What identifies a report: the location, or the event itself.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Site {
    Location(u32),
    Event(ThreadId, u32),
}

fn site(t: &Trace, e: EventId) -> Site {
    let ev = t.event(e);
    match t.location_name(ev.location) {
        Some(_) => Site::Location(ev.location),
        None => Site::Event(ev.thread, t.ord(e)),
    }
}

/// Group pairs (already in report order) by unordered location pair,
/// keeping the first of each group and the group size.
fn dedup(t: &Trace, pairs: &[(EventId, EventId)]) -> Vec<(usize, usize)> {
    let mut first: HashMap<(Site, Site), usize> = HashMap::new();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let (x, y) = (site(t, a), site(t, b));
        let key = if x <= y { (x, y) } else { (y, x) };
        match first.get(&key) {
            Some(&slot) => out[slot].1 += 1,
            None => {
                first.insert(key, out.len());
                out.push((i, 1));
            }
        }
    }
    out
}

fn describe(t: &Trace, e: EventId) -> String {
    format!("e{} ({})", t.event(e).index, crate::io::format_event(t, e))
}

fn flags(cp4: bool, inserted: bool) -> String {
    let mut f = Vec::new();
    if cp4 {
        f.push("cp4");
    }
    if inserted {
        f.push("inserted");
    }
    if f.is_empty() {
        String::new()
    } else {
        format!(" [{}]", f.join(","))
    }
}

fn summary_line(races: usize, res: &RaceSet) -> String {
    format!(
        "{races} {}, complete: {} (|C|={}), |Z|={}{}",
        if races == 1 { "race" } else { "races" },
        res.is_complete(),
        res.c.len(),
        res.z.len(),
        if res.truncated { ", truncated" } else { "" }
    )
}

fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, String> {
    let t = a.input.load()?;
    let opts = M2Options {
        jobs: a.jobs,
        max_pairs: a.max_pairs,
        prune: true,
    };
    let res = m2(&t, &opts);
    log::info!(
        "{} events, {} candidate pairs examined, {} variables pruned",
        t.input_len(),
        res.examined,
        res.pruned_vars
    );
    let groups = dedup(&t, &res.pairs());
    let io_err = |e: io::Error| e.to_string();
    if a.json {
        let races = groups
            .iter()
            .map(|&(i, n)| {
                let r = &res.z[i];
                RaceJson {
                    e1: event_json(&t, r.e1),
                    e2: event_json(&t, r.e2),
                    witness: a.witness.then(|| {
                        r.witness_events(&t)
                            .iter()
                            .filter(|&&e| !t.is_init(e))
                            .map(|&e| t.event(e).index)
                            .collect()
                    }),
                    cp4_used: r.meta.cp4_used,
                    duplicates: n - 1,
                }
            })
            .collect();
        let unresolved = res
            .c
            .iter()
            .map(|u| UnresolvedJson {
                e1: event_json(&t, u.e1),
                e2: event_json(&t, u.e2),
                reason: u.reason,
                cp4_used: u.meta.cp4_used,
                inserted: u.meta.inserted,
            })
            .collect();
        let doc = AnalyzeJson {
            events: t.input_len(),
            threads: t.thread_count(),
            races,
            unresolved,
            z: res.z.len(),
            c: res.c.len(),
            examined: res.examined,
            pruned_vars: res.pruned_vars,
            truncated: res.truncated,
            complete: res.is_complete(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io_err)?;
    } else {
        for &(i, n) in &groups {
            let r = &res.z[i];
            let dup = if n > 1 {
                format!(" (+{} more at these locations)", n - 1)
            } else {
                String::new()
            };
            writeln!(
                out,
                "race {} <-> {}{}{}",
                describe(&t, r.e1),
                describe(&t, r.e2),
                flags(r.meta.cp4_used, r.meta.inserted),
                dup
            )
            .map_err(io_err)?;
            if a.witness {
                writeln!(out, "  witness:").map_err(io_err)?;
                let mut buf = Vec::new();
                emit_witness(&t, &r.witness_events(&t), &mut buf).map_err(io_err)?;
                for line in String::from_utf8_lossy(&buf).lines() {
                    writeln!(out, "    {line}").map_err(io_err)?;
                }
            }
        }
        for u in &res.c {
            writeln!(
                out,
                "unresolved {} <-> {}: {}{}",
                describe(&t, u.e1),
                describe(&t, u.e2),
                serde_json::to_value(u.reason)
                    .map_err(|e| e.to_string())?
                    .as_str()
                    .unwrap_or("?"),
                flags(u.meta.cp4_used, u.meta.inserted)
            )
            .map_err(io_err)?;
        }
        writeln!(out, "{}", summary_line(groups.len(), &res)).map_err(io_err)?;
    }
    Ok(if res.z.is_empty() { EXIT_CLEAN } else { EXIT_RACES })
}

fn event_by_index(t: &Trace, i: u32) -> Result<EventId, String> {
    t.by_index(i)
        .ok_or_else(|| format!("no event at index {i} (trace has {})", t.input_len()))
}

#[derive(Serialize)]
struct CheckJson {
    e1: EventJson,
    e2: EventJson,
    race: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<Reject>,
    cp4_used: bool,
    inserted: bool,
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32, String> {
    let t = a.input.load()?;
    let (e1, e2) = (event_by_index(&t, a.pair[0])?, event_by_index(&t, a.pair[1])?);
    let d = race_decision(&t, e1, e2);
    let meta = d.meta();
    let io_err = |e: io::Error| e.to_string();
    if a.json {
        let (branch, witness, reason) = match &d {
            Decision::Race { witness, branch, .. } => (
                Some(*branch),
                Some(
                    witness
                        .iter()
                        .filter(|&&e| !t.is_init(e))
                        .map(|&e| t.event(e).index)
                        .collect(),
                ),
                None,
            ),
            Decision::NoRace { reason, .. } => (None, None, Some(*reason)),
        };
        let doc = CheckJson {
            e1: event_json(&t, e1),
            e2: event_json(&t, e2),
            race: d.is_race(),
            branch,
            witness,
            reason,
            cp4_used: meta.cp4_used,
            inserted: meta.inserted,
        };
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io_err)?;
        return Ok(EXIT_CLEAN);
    }
    match &d {
        Decision::Race { witness, branch, .. } => {
            writeln!(
                out,
                "race {} <-> {} (branch {branch})",
                describe(&t, e1),
                describe(&t, e2)
            )
            .map_err(io_err)?;
            writeln!(out, "  witness:").map_err(io_err)?;
            let mut buf = Vec::new();
            emit_witness(&t, witness, &mut buf).map_err(io_err)?;
            for line in String::from_utf8_lossy(&buf).lines() {
                writeln!(out, "    {line}").map_err(io_err)?;
            }
        }
        Decision::NoRace { reason, .. } => {
            let why = serde_json::to_value(reason).map_err(|e| e.to_string())?;
            let sure = if meta.incomplete() { "undecided" } else { "no race" };
            writeln!(
                out,
                "{sure} {} <-> {}: {}{}",
                describe(&t, e1),
                describe(&t, e2),
                why.as_str().unwrap_or("?"),
                flags(meta.cp4_used, meta.inserted)
            )
            .map_err(io_err)?;
        }
    }
    Ok(EXIT_CLEAN)
}

#[derive(Serialize)]
struct PairJson {
    e1: EventJson,
    e2: EventJson,
}

fn print_pairs(
    t: &Trace,
    pairs: &[(EventId, EventId)],
    label: &str,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), String> {
    let io_err = |e: io::Error| e.to_string();
    let groups = dedup(t, pairs);
    if json {
        let doc: Vec<PairJson> = groups
            .iter()
            .map(|&(i, _)| PairJson {
                e1: event_json(t, pairs[i].0),
                e2: event_json(t, pairs[i].1),
            })
            .collect();
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io_err)?;
        return Ok(());
    }
    for &(i, _) in &groups {
        let (a, b) = pairs[i];
        writeln!(out, "race {} <-> {}", describe(t, a), describe(t, b)).map_err(io_err)?;
    }
    writeln!(out, "{} {label} races", groups.len()).map_err(io_err)?;
    Ok(())
}

fn baseline(a: &BaselineArgs, out: &mut dyn Write) -> Result<i32, String> {
    let t = a.input.load()?;
    let mut pairs: Vec<(EventId, EventId)> = baseline_races(&t, a.method).into_iter().collect();
    if a.filter_sound {
        let res = m2(&t, &M2Options::default());
        let keep: BTreeSet<(EventId, EventId)> = res
            .pairs()
            .into_iter()
            .chain(res.c.iter().map(|u| (u.e1, u.e2)))
            .collect();
        pairs.retain(|p| keep.contains(p));
    }
    print_pairs(&t, &pairs, a.method.name(), a.json, out)?;
    Ok(EXIT_CLEAN)
}

fn oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<i32, String> {
    let t = a.input.load()?;
    let pairs: Vec<_> = oracle_races(&t, a.max_events)
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect();
    print_pairs(&t, &pairs, "predictable", a.json, out)?;
    Ok(EXIT_CLEAN)
}

fn fuzz(a: &FuzzArgs, out: &mut dyn Write) -> Result<i32, String> {
    let io_err = |e: io::Error| e.to_string();
    let (mut complete, mut exact, mut bad) = (0usize, 0usize, 0usize);
    for seed in a.seeds.clone() {
        let t = random_trace(seed, a.params);
        let truth = oracle_races(&t, t.input_len()).map_err(|e| e.to_string())?;
        let res = m2(&t, &M2Options::default());
        let z: BTreeSet<_> = res.pairs().into_iter().collect();
        for r in &res.z {
            if !truth.contains(&(r.e1, r.e2)) || !exhibits_race(&t, &r.witness_events(&t), r.e1, r.e2) {
                writeln!(
                    out,
                    "seed {seed}: unsound report e{} e{}",
                    t.event(r.e1).index,
                    t.event(r.e2).index
                )
                .map_err(io_err)?;
                bad += 1;
            }
        }
        if res.is_complete() {
            complete += 1;
            if z != truth {
                writeln!(
                    out,
                    "seed {seed}: complete run missed {} races",
                    truth.difference(&z).count()
                )
                .map_err(io_err)?;
                bad += 1;
            }
        }
        exact += (z == truth) as usize;
    }
    writeln!(
        out,
        "{} seeds, {complete} complete, {exact} exact, {bad} violations",
        a.seeds.end - a.seeds.start
    )
    .map_err(io_err)?;
    Ok(if bad == 0 { EXIT_CLEAN } else { EXIT_RACES })
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<i32, String> {
    let p = ScaleParams {
        events: a.events,
        threads: a.threads,
        locks: a.locks,
        races: a.races,
        locked_races: a.races / 10,
        seed: a.seed,
        ..Default::default()
    };
    let raw = scale_raw(&p);
    let res = match &a.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut w = BufWriter::new(f);
            emit_raw(&raw, &mut w).and_then(|_| w.flush())
        }
        None => emit_raw(&raw, out),
    };
    res.map_err(|e| e.to_string())?;
    Ok(EXIT_CLEAN)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Run with explicit arguments and sinks; returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    init_logging(cli.verbose);
    let res = match &cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Check(a) => check(a, out),
        Command::Baseline(a) => baseline(a, out),
        Command::Oracle(a) => oracle(a, out),
        Command::Fuzz(a) => fuzz(a, out),
        Command::Synth(a) => synth(a, out),
    };
    let _ = out.flush();
    match res {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

pub fn main() -> i32 {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut err = io::stderr();
    run(std::env::args_os(), &mut out, &mut err)
}

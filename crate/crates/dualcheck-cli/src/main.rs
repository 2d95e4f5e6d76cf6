mod selftest;

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dualcheck::dualize::Dualizer;
use dualcheck::prog::{parse_prog, server_of};
use dualcheck::qac::{oracle_witness, ChoiceDomain};
use dualcheck::runner::{mutant_matrix, report_json, run_test, verdict_name, RunConfig, RunResult, Target};
use dualcheck::sut::{serve, Mutant};
use dualcheck::symbolic::{parse_constraints, solvable};
use dualcheck::tester::Verdict;

#[derive(Parser)]
#[command(name = "dualcheck", version, about = "Testers derived from nondeterministic reference models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP tester against a target, or validate a trace against a
    /// Prog specification with --spec.
    Test(TestArgs),
    /// Run the built-in oracle suites.
    Selftest(DomainArgs),
    /// Run every mutant of the reference server for a number of seeds.
    Mutants(MutantsArgs),
    /// Solve a constraint file.
    Solve(SolveArgs),
    /// Serve the reference server (or a mutant) over TCP.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Smallest internal choice.
    #[arg(long, default_value_t = -8, allow_negative_numbers = true)]
    choice_lo: i64,
    /// Largest internal choice.
    #[arg(long, default_value_t = 8, allow_negative_numbers = true)]
    choice_hi: i64,
}

impl DomainArgs {
    fn domain(&self) -> Result<ChoiceDomain, String> {
        if self.choice_lo > self.choice_hi {
            return Err(format!("empty choice domain [{}, {}]", self.choice_lo, self.choice_hi));
        }
        Ok(ChoiceDomain::new(self.choice_lo, self.choice_hi))
    }
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    fuel: usize,
    /// How long to wait for each response.
    #[arg(long = "timeout-ms", default_value_t = 50)]
    timeout_ms: u64,
    /// `in-process`, `in-process:M1`, or `socket:HOST:PORT`.
    #[arg(long, default_value = "in-process")]
    target: String,
    /// Mutant of the in-process server (M1..M4 or its full id).
    #[arg(long)]
    mutant: Option<String>,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    shrink_budget: usize,
    #[command(flatten)]
    domain: DomainArgs,
    /// A Prog file; switches to trace validation.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Trace to validate with --spec, as `q,a` pairs: "5,1 3,0".
    #[arg(long, allow_hyphen_values = true)]
    trace: Option<String>,
}

#[derive(Args)]
struct MutantsArgs {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 10_000)]
    fuel: usize,
    #[arg(long = "timeout-ms", default_value_t = 50)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 200)]
    shrink_budget: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Constraint file: `lhs (<|<=|=) rhs` per line, `#n` for variables.
    file: PathBuf,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long)]
    mutant: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status 2: the run could not be carried out.
struct EnvError(String);

impl From<String> for EnvError {
    fn from(s: String) -> Self {
        EnvError(s)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Selftest(d) => d.domain().map_err(EnvError).map(selftest::run),
        Command::Mutants(a) => cmd_mutants(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(EnvError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn write_report(path: &Path, v: &Value) -> Result<(), EnvError> {
    let text = serde_json::to_string_pretty(v).expect("reports are plain JSON");
    fs::write(path, text + "\n").map_err(|e| EnvError(format!("cannot write {}: {e}", path.display())))
}

fn parse_trace(s: &str) -> Result<Vec<(i64, i64)>, String> {
    s.split(|c: char| c.is_whitespace() || c == ';')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (q, a) = pair.split_once(',').ok_or_else(|| format!("expected q,a but found {pair:?}"))?;
            let num = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("{x:?}: {e}"));
            Ok((num(q)?, num(a)?))
        })
        .collect()
}

fn cmd_test(a: TestArgs) -> Result<bool, EnvError> {
    let dom = a.domain.domain()?;
    if let Some(spec) = &a.spec {
        let trace = a.trace.as_deref().ok_or("--spec needs --trace".to_string())?;
        return validate_trace(spec, trace, dom, a.report.as_deref());
    }
    if a.fuel == 0 {
        return Err(EnvError("--fuel must be at least 1".into()));
    }
    let mut target: Target = a.target.parse()?;
    if let Some(m) = &a.mutant {
        let m: Mutant = m.parse()?;
        target = match target {
            Target::InProcess(None) => Target::InProcess(Some(m)),
            _ => return Err(EnvError("--mutant applies only to a plain in-process target".into())),
        };
    }
    let cfg = RunConfig {
        seed: a.seed,
        fuel: a.fuel,
        recv_timeout_ms: a.timeout_ms,
        target,
        choice_dom: dom,
        shrink_budget: a.shrink_budget,
        ..RunConfig::default()
    };
    let rep = run_test(&cfg);
    println!("target {}  seed {}  fuel {}", cfg.target, cfg.seed, cfg.fuel);
    print_run("run", &rep.run);
    if let Some(s) = &rep.shrunk {
        println!("shrunk counterexample ({} replays):", rep.shrink_attempts);
        print_run("confirming run", s);
        for e in &s.script {
            println!("  input {}: {}", e.label, e.jexp.to_json());
        }
    }
    if let Some(path) = &a.report {
        write_report(path, &report_json(&rep))?;
    }
    match rep.verdict() {
        Verdict::Accept => Ok(true),
        Verdict::Reject(_) => Ok(false),
        Verdict::Error(m) => Err(EnvError(m.clone())),
    }
}

fn print_run(title: &str, r: &RunResult) {
    let o = &r.outcome;
    println!("{title}: {} after {} messages, fuel {}", verdict_name(&o.verdict), o.messages(), o.fuel_used);
    if let Verdict::Reject(m) | Verdict::Error(m) = &o.verdict {
        println!("  reason: {m}");
    }
    if !matches!(o.verdict, Verdict::Accept) {
        for e in &o.entries {
            println!("  {:>4} {}", e.label, e.packet);
        }
    }
}

fn validate_trace(spec: &Path, trace: &str, dom: ChoiceDomain, report: Option<&Path>) -> Result<bool, EnvError> {
    let src = fs::read_to_string(spec).map_err(|e| format!("cannot read {}: {e}", spec.display()))?;
    let p = parse_prog(&src).map_err(|e| format!("{}: {e}", spec.display()))?;
    let t = parse_trace(trace)?;
    let d = Dualizer::new(p.clone(), dom).map_err(|e| e.to_string())?;
    let mut dv = d.initial();
    let mut rejected_at = None;
    let mut branches = Vec::new();
    for (i, &(q, a)) in t.iter().enumerate() {
        match d.step(q, a, &dv).map_err(|e| e.to_string())? {
            Ok(next) => dv = next,
            Err(rej) => {
                rejected_at = Some(i);
                branches = rej.branches;
                break;
            }
        }
    }
    let witness = oracle_witness(&server_of(&p), &t, dom);
    let accepted = rejected_at.is_none();
    println!("validator: {}", if accepted { "ACCEPT" } else { "REJECT" });
    if let Some(i) = rejected_at {
        println!("  rejected at step {} {:?}", i + 1, t[i]);
        for b in &branches {
            println!("  dead branch {b}");
        }
    }
    match &witness {
        Some(c) => println!("oracle: valid, choices {c:?}"),
        None => println!("oracle: invalid"),
    }
    if accepted != witness.is_some() {
        println!("warning: validator and oracle disagree");
    }
    if let Some(path) = report {
        let v = json!({
            "verdict": if accepted { "ACCEPT" } else { "REJECT" },
            "trace": t,
            "rejected_at_step": rejected_at.map(|i| i + 1),
            "dead_branches": branches,
            "oracle_choices": witness,
        });
        write_report(path, &v)?;
    }
    Ok(accepted)
}

fn cmd_mutants(a: MutantsArgs) -> Result<bool, EnvError> {
    if a.fuel == 0 {
        return Err(EnvError("--fuel must be at least 1".into()));
    }
    let start = Instant::now();
    let base = RunConfig {
        fuel: a.fuel,
        recv_timeout_ms: a.timeout_ms,
        shrink_budget: a.shrink_budget,
        ..RunConfig::default()
    };
    let kills = mutant_matrix(&base, a.seeds);
    println!("{:<18} {:>4}  {:<7} {:>8} {:>7}", "mutant", "seed", "verdict", "messages", "shrunk");
    for k in &kills {
        let shrunk = k.shrunk_messages.map(|n| n.to_string()).unwrap_or("-".into());
        println!(
            "{:<18} {:>4}  {:<7} {:>8} {:>7}",
            k.mutant.id(),
            k.seed,
            verdict_name(&k.verdict),
            k.messages,
            shrunk
        );
    }
    let killed = kills.iter().filter(|k| matches!(k.verdict, Verdict::Reject(_))).count();
    println!("{killed}/{} killed in {:.1}s", kills.len(), start.elapsed().as_secs_f64());
    if let Some(path) = &a.report {
        let rows: Vec<Value> = kills
            .iter()
            .map(|k| {
                json!({
                    "mutant": k.mutant.id(),
                    "seed": k.seed,
                    "verdict": verdict_name(&k.verdict),
                    "messages": k.messages,
                    "shrunk_messages": k.shrunk_messages,
                })
            })
            .collect();
        write_report(path, &json!({"fuel": a.fuel, "seeds": a.seeds, "matrix": rows}))?;
    }
    if let Some(err) = kills.iter().find_map(|k| match &k.verdict {
        Verdict::Error(m) => Some(m.clone()),
        _ => None,
    }) {
        return Err(EnvError(err));
    }
    Ok(killed == kills.len())
}

fn cmd_solve(a: SolveArgs) -> Result<bool, EnvError> {
    let dom = a.domain.domain()?;
    let src = fs::read_to_string(&a.file).map_err(|e| format!("cannot read {}: {e}", a.file.display()))?;
    let cs = parse_constraints(&src).map_err(|e| format!("{}: {e}", a.file.display()))?;
    match solvable(&cs, dom) {
        Some(w) => {
            println!("sat");
            for (x, v) in &w.0 {
                println!("{x} = {v}");
            }
            Ok(true)
        }
        None => {
            println!("unsat");
            Ok(false)
        }
    }
}

fn cmd_serve(a: ServeArgs) -> Result<bool, EnvError> {
    let mutant = a.mutant.as_deref().map(str::parse::<Mutant>).transpose()?;
    let listener = TcpListener::bind(&a.addr).map_err(|e| format!("cannot bind {}: {e}", a.addr))?;
    let local = listener.local_addr().map_err(|e| e.to_string())?;
    println!(
        "serving {} on {local}",
        mutant.map(|m| m.id()).unwrap_or("CORRECT")
    );
    serve(listener, mutant, a.seed).map_err(|e| EnvError(e.to_string()))?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traces_parse() {
        assert_eq!(parse_trace("5,1 3,0"), Ok(vec![(5, 1), (3, 0)]));
        assert_eq!(parse_trace("-1,2;4,-3"), Ok(vec![(-1, 2), (4, -3)]));
        assert_eq!(parse_trace(""), Ok(vec![]));
        assert!(parse_trace("5").is_err());
        assert!(parse_trace("x,1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

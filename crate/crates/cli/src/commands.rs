use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gate_core::certificate::{check_certificate_value, CheckContext, CheckResult};
use gate_core::contest::{recheck, replay_verify, revise_status, submit_challenge, Challenge, Ground};
use gate_core::gate::{evaluate_interface, render_transcript, InterfaceOutput, Query};
use gate_core::record::{PolicyBundle, RecordStore, Timestamp};
use gate_core::{load_network, CertificateToken, DeploymentContract, EntitlementHistory, GateError, ReplayResult};

use crate::scenario::{read, run_scenario, write, write_certificates, Scenario};
use crate::{CliError, EXIT_OK, EXIT_SEMANTIC, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "gate",
    version,
    about = "Certificate-gated Asserted/Denied/Undetermined decisions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one query and write its verdict, transcript and certificates.
    Evaluate(EvaluateArgs),
    /// Re-verify a certificate against a contract and the public record.
    Check(CheckArgs),
    /// Replay a scenario timeline (bundled name or scenario file path).
    Scenario(ScenarioArgs),
    /// File a challenge against a certificate, re-check it, and revise if upheld.
    Challenge(ChallengeArgs),
    /// Verify the hash chain of a history log.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[arg(long)]
    contract: PathBuf,
    #[arg(long)]
    records: PathBuf,
    /// Policy bundle holding the scope and standing policies.
    #[arg(long)]
    policies: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    stores: StoreArgs,
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Output directory for verdict, transcript and certificate files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// History log to append an ISSUED entry to.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    stores: StoreArgs,
    #[arg(long)]
    cert: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Bundled scenario name or path to a `.scenario.json` file.
    scenario: String,
    /// Directory receiving verdicts, certificates, contracts and the log.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct ChallengeArgs {
    #[command(flatten)]
    stores: StoreArgs,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    role: String,
    #[arg(long, value_enum)]
    ground: GroundArg,
    #[arg(long)]
    id: String,
    /// Submission time; defaults to the contract's record time.
    #[arg(long)]
    at: Option<Timestamp>,
    /// Directory receiving the superseding verdict when the challenge is upheld.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroundArg {
    #[value(name = "witness_validity", alias = "witness-validity")]
    WitnessValidity,
    #[value(name = "scope_applicability", alias = "scope-applicability")]
    ScopeApplicability,
    #[value(name = "provenance_defect", alias = "provenance-defect")]
    ProvenanceDefect,
}

impl From<GroundArg> for Ground {
    fn from(g: GroundArg) -> Self {
        match g {
            GroundArg::WitnessValidity => Ground::WitnessValidity,
            GroundArg::ScopeApplicability => Ground::ScopeApplicability,
            GroundArg::ProvenanceDefect => Ground::ProvenanceDefect,
        }
    }
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
}

/// Result of one invocation; `main` prints the streams and exits with `code`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn semantic(stdout: String) -> Self {
        Outcome {
            code: EXIT_SEMANTIC,
            stdout,
            stderr: String::new(),
        }
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Outcome::ok(text),
                _ => Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Check(a) => check(a),
        Command::Scenario(a) => scenario(a),
        Command::Challenge(a) => challenge(a),
        Command::Replay(a) => replay(a),
    };
    result.unwrap_or_else(|e| Outcome {
        code: e.exit_code(),
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
    })
}

struct Loaded {
    contract: DeploymentContract,
    store: RecordStore,
    policies: PolicyBundle,
}

impl Loaded {
    fn from(args: &StoreArgs) -> Result<Self, CliError> {
        Ok(Loaded {
            contract: DeploymentContract::from_json(read(&args.contract)?.as_bytes())?,
            store: RecordStore::from_jsonl(&read(&args.records)?)?,
            policies: PolicyBundle::from_json(read(&args.policies)?.as_bytes())?,
        })
    }

    fn ctx(&self) -> CheckContext<'_> {
        CheckContext {
            store: &self.store,
            scope_policy: &self.policies.scope,
            standing_policy: &self.policies.standing,
        }
    }
}

fn load_log(path: &Path) -> Result<EntitlementHistory, CliError> {
    match fs::read(path) {
        Ok(bytes) => Ok(EntitlementHistory::from_jsonl(&bytes)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(EntitlementHistory::new()),
        Err(e) => Err(CliError::Io(format!("{}: {e}", path.display()))),
    }
}

fn save_log(path: &Path, log: &EntitlementHistory) -> Result<(), CliError> {
    fs::write(path, log.to_jsonl()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_verdict(dir: &Path, output: &InterfaceOutput, transcript: &str, stem: &str) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write(dir, &format!("{stem}.verdict.json"), &(output.to_json()? + "\n"))?;
    write(dir, &format!("{stem}.transcript.txt"), transcript)
}

fn evaluate(a: EvaluateArgs) -> Result<Outcome, CliError> {
    let l = Loaded::from(&a.stores)?;
    let net = load_network(read(&a.net)?.as_bytes())?;
    let query: Query = serde_json::from_str(&read(&a.query)?).map_err(GateError::from)?;
    let output = evaluate_interface(&l.contract, &net, &query, &l.store, &l.policies)?;
    let transcript = render_transcript(&output, &l.contract);
    write_verdict(&a.out, &output, &transcript, &query.query_id)?;
    write_certificates(&a.out, &query.query_id, &output)?;
    if let Some(path) = &a.log {
        let mut log = load_log(path)?;
        log.record_output(&output);
        save_log(path, &log)?;
    }
    Ok(Outcome::ok(match a.format {
        Format::Text => transcript,
        Format::Json => output.to_json()? + "\n",
    }))
}

fn render_check(r: &CheckResult, format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Json => serde_json::to_string(r).map_err(GateError::from)? + "\n",
        Format::Text if r.accepted => "accepted\n".into(),
        Format::Text => {
            let mut s = String::from("rejected\n");
            for f in &r.failures {
                s.push_str(&format!("  {} {}\n", f.code, f.field));
            }
            s
        }
    })
}

fn check(a: CheckArgs) -> Result<Outcome, CliError> {
    let l = Loaded::from(&a.stores)?;
    let value: serde_json::Value = serde_json::from_str(&read(&a.cert)?).map_err(GateError::from)?;
    let r = check_certificate_value(&l.contract, &value, l.ctx());
    let text = render_check(&r, a.format)?;
    Ok(if r.accepted {
        Outcome::ok(text)
    } else {
        Outcome::semantic(text)
    })
}

fn scenario(a: ScenarioArgs) -> Result<Outcome, CliError> {
    let path = Path::new(&a.scenario);
    let s = if path.exists() {
        Scenario::load(path)?
    } else {
        Scenario::builtin(&a.scenario).ok_or_else(|| {
            CliError::Usage(format!(
                "{} is neither a file nor a bundled scenario ({})",
                a.scenario,
                crate::builtin::SCENARIOS.join(", ")
            ))
        })??
    };
    let report = run_scenario(&s)?;
    if let Some(dir) = &a.out {
        report.write_files(dir)?;
    }
    let mut text = match a.format {
        Format::Text => report.table(),
        Format::Json => {
            let rows: Vec<&InterfaceOutput> = report.runs.iter().map(|r| &r.output).collect();
            serde_json::to_string(&rows).map_err(GateError::from)? + "\n"
        }
    };
    let mismatches = report.mismatches();
    if mismatches.is_empty() {
        return Ok(Outcome::ok(text));
    }
    for r in mismatches {
        let expected = r.expected.map(|e| e.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "mismatch: {} expected {expected}, got {}\n",
            r.query_id, r.output.status
        ));
    }
    Ok(Outcome::semantic(text))
}

fn challenge(a: ChallengeArgs) -> Result<Outcome, CliError> {
    let l = Loaded::from(&a.stores)?;
    let mut log = load_log(&a.log)?;
    let token = CertificateToken::from_json(read(&a.cert)?.as_bytes())?;
    let cert_hash = token.cert_hash.clone();
    log.archive_certificate(token)?;
    let ack = submit_challenge(
        &mut log,
        Challenge {
            challenge_id: a.id.clone(),
            challenger_role: a.role.clone(),
            target_cert_hash: cert_hash,
            ground: a.ground.into(),
            submitted_at: a.at.unwrap_or(l.contract.record_time),
            payload: vec![],
        },
    )?;
    let outcome = recheck(&mut log, &l.contract, &ack.challenge_id, l.ctx())?;
    let mut text = format!(
        "challenge {} (seq {}): {}\n",
        ack.challenge_id,
        ack.seq,
        outcome.verdict()
    );
    for f in &outcome.check.failures {
        text.push_str(&format!("  {} {}\n", f.code, f.field));
    }
    if outcome.upheld {
        let revised = revise_status(&mut log, &outcome.query_id, &outcome)?;
        let reason = revised.reason().map(|r| r.to_string()).unwrap_or_default();
        text.push_str(&format!("revised {} to U ({reason})\n", outcome.query_id));
        if let Some(dir) = &a.out {
            let transcript = render_transcript(&revised, &l.contract);
            write_verdict(dir, &revised, &transcript, &format!("{}.revised", outcome.query_id))?;
        }
    }
    save_log(&a.log, &log)?;
    Ok(Outcome::ok(text))
}

fn replay(a: ReplayArgs) -> Result<Outcome, CliError> {
    let bytes = fs::read(&a.log).map_err(|e| CliError::Io(format!("{}: {e}", a.log.display())))?;
    Ok(match replay_verify(&bytes) {
        ReplayResult::Valid => Outcome::ok("valid\n".into()),
        invalid @ ReplayResult::Invalid { .. } => Outcome::semantic(format!("{invalid}\n")),
    })
}

//! Scenario replay: append a record timeline, evaluate each query as of its
//! timestamp, and compare against expected statuses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gate_core::canonical::canonical_string;
use gate_core::decision::{Decision, ForcingWitness};
use gate_core::gate::{evaluate_interface_traced, render_transcript, InterfaceOutput, Query};
use gate_core::record::{PolicyBundle, RecordItem, RecordStore, Timestamp};
use gate_core::{load_network, DeploymentContract, EntitlementHistory, GateError, Interval, NetworkModel, Status};
use serde::Deserialize;

use crate::builtin;
use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineEntry {
    pub at: Timestamp,
    pub item: RecordItem,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioQuery {
    pub at: Timestamp,
    pub query: Query,
    #[serde(default)]
    pub expected_status: Option<Status>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    contract: String,
    net: String,
    policies: String,
    timeline: Vec<TimelineEntry>,
    queries: Vec<ScenarioQuery>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub contract: DeploymentContract,
    pub net: NetworkModel,
    pub policies: PolicyBundle,
    pub timeline: Vec<TimelineEntry>,
    pub queries: Vec<ScenarioQuery>,
}

impl Scenario {
    /// Loads a scenario file; artifact paths resolve relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, |name| read(&dir.join(name)))
    }

    pub fn builtin(name: &str) -> Option<Result<Self, CliError>> {
        let text = builtin::scenario(name)?;
        Some(Self::parse(text, |f| {
            builtin::file(f)
                .map(str::to_owned)
                .ok_or_else(|| CliError::Usage(format!("no bundled file {f}")))
        }))
    }

    fn parse<F>(text: &str, fetch: F) -> Result<Self, CliError>
    where
        F: Fn(&str) -> Result<String, CliError>,
    {
        let file: ScenarioFile = serde_json::from_str(text).map_err(GateError::from)?;
        if file.timeline.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(GateError::Configuration("timeline timestamps decrease".into()).into());
        }
        Ok(Scenario {
            name: file.name,
            contract: DeploymentContract::from_json(fetch(&file.contract)?.as_bytes())?,
            net: load_network(fetch(&file.net)?.as_bytes())?,
            policies: PolicyBundle::from_json(fetch(&file.policies)?.as_bytes())?,
            timeline: file.timeline,
            queries: file.queries,
        })
    }
}

pub(crate) fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug)]
pub struct QueryRun {
    pub at: Timestamp,
    pub query_id: String,
    pub expected: Option<Status>,
    pub contract: DeploymentContract,
    pub store: RecordStore,
    pub output: InterfaceOutput,
    pub decision: Option<Decision>,
    pub transcript: String,
}

impl QueryRun {
    /// The bound the verdict rests on: the witness for `A`/`D`, the last
    /// certified bound for `U`.
    pub fn bounds(&self) -> Option<Interval> {
        match self.output.certificates().first() {
            Some(c) => match &c.witness {
                ForcingWitness::Bound { interval, .. } => Some(interval.clone()),
                ForcingWitness::Separation { .. } => None,
            },
            None => self.output.detail().and_then(|d| d.last_bounds.clone()),
        }
    }

    pub fn stages(&self) -> Option<usize> {
        self.decision.as_ref().map(|d| d.stages_used)
    }

    pub fn cost(&self) -> Option<u64> {
        self.decision.as_ref().map(|d| d.cost_spent)
    }

    pub fn matches_expectation(&self) -> bool {
        self.expected.is_none_or(|e| e == self.output.status)
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub name: String,
    pub runs: Vec<QueryRun>,
    pub history: EntitlementHistory,
}

impl ScenarioReport {
    pub fn statuses(&self) -> Vec<Status> {
        self.runs.iter().map(|r| r.output.status).collect()
    }

    pub fn mismatches(&self) -> Vec<&QueryRun> {
        self.runs.iter().filter(|r| !r.matches_expectation()).collect()
    }

    pub fn table(&self) -> String {
        let mut s = format!("scenario {}\n", self.name);
        let _ = writeln!(
            s,
            "{:<34} {:<20} {:<6} {:<10} {:<16} {:>6} {:>5} {:<8}",
            "query", "as of", "status", "reason", "bounds", "stages", "cost", "expected"
        );
        for r in &self.runs {
            let bounds = r
                .bounds()
                .map(|b| format!("[{}, {}]", b.lo().to_decimal_string(12), b.hi().to_decimal_string(12)))
                .unwrap_or_else(|| "-".into());
            let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            let expected = match r.expected {
                Some(e) if e == r.output.status => format!("{e} ok"),
                Some(e) => format!("{e} MISMATCH"),
                None => "-".into(),
            };
            let _ = writeln!(
                s,
                "{:<34} {:<20} {:<6} {:<10} {:<16} {:>6} {:>5} {:<8}",
                r.query_id,
                r.at.format("%Y-%m-%dT%H:%M:%SZ"),
                r.output.status.to_string(),
                opt(r.output.reason().map(|x| x.to_string())),
                bounds,
                opt(r.stages().map(|x| x.to_string())),
                opt(r.cost().map(|x| x.to_string())),
                expected
            );
        }
        s
    }

    /// Writes per-query verdicts, transcripts, contracts, certificates and
    /// record snapshots, plus the history log and the report table.
    pub fn write_files(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for r in &self.runs {
            let q = &r.query_id;
            write(dir, &format!("{q}.verdict.json"), &(r.output.to_json()? + "\n"))?;
            write(dir, &format!("{q}.transcript.txt"), &r.transcript)?;
            write(dir, &format!("{q}.contract.json"), &(r.contract.to_json()? + "\n"))?;
            write(dir, &format!("{q}.records.jsonl"), &r.store.to_jsonl()?)?;
            write_certificates(dir, q, &r.output)?;
        }
        write(dir, "history.log.jsonl", &self.history.to_jsonl()?)?;
        write(dir, "report.txt", &self.table())?;
        Ok(())
    }
}

pub(crate) fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `<query>.cert.json` for a single certificate, `<query>.<i>.cert.json` otherwise.
pub(crate) fn write_certificates(dir: &Path, query_id: &str, output: &InterfaceOutput) -> Result<(), CliError> {
    let certs = output.certificates();
    for (i, c) in certs.iter().enumerate() {
        let name = if certs.len() == 1 {
            format!("{query_id}.cert.json")
        } else {
            format!("{query_id}.{i}.cert.json")
        };
        write(dir, &name, &(canonical_string(c)? + "\n"))?;
    }
    Ok(())
}

/// Replays the timeline; each query sees the items whose `at` is not later
/// than its own, under the contract re-indexed to its timestamp.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport, CliError> {
    let mut store = RecordStore::new();
    let mut pending = s.timeline.iter().peekable();
    let mut history = EntitlementHistory::new();
    let mut runs = Vec::new();
    for sq in &s.queries {
        while let Some(entry) = pending.next_if(|e| e.at <= sq.at) {
            store.append(entry.item.clone())?;
        }
        let contract = s.contract.at_record_time(sq.at)?;
        let (output, decision) = evaluate_interface_traced(&contract, &s.net, &sq.query, &store, &s.policies)?;
        history.record_output(&output);
        runs.push(QueryRun {
            at: sq.at,
            query_id: sq.query.query_id.clone(),
            expected: sq.expected_status,
            transcript: render_transcript(&output, &contract),
            contract,
            store: store.clone(),
            output,
            decision,
        });
    }
    Ok(ScenarioReport {
        name: s.name.clone(),
        runs,
        history,
    })
}

//! On-disk result sets.
//!
//! A result directory holds:
//!
//! | file                  | content                                             |
//! |-----------------------|-----------------------------------------------------|
//! | `events.jsonl`        | task, delivery and answer events, one JSON per line |
//! | `aggregation.csv`     | estimate and truth per (method, question)           |
//! | `network.csv`         | Av / Tu / FailR overall and per task                |
//! | `profiles.json`       | worker profiles and leaderboard                     |
//! | `efficiency_pairs.csv`| learned (class, task type) verdicts                 |
//! | `config.json`         | the canonical scenario config                       |
//! | `manifest.json`       | fingerprint, headline figures, file hashes          |
//!
//! Nothing written depends on wall-clock time, so exporting the same config
//! twice gives identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use mocrowd_core::dispatch::{Assignment, DeliveryOutcome, NetworkMetrics};
use mocrowd_core::domain::{GeoPoint, Label, LocationClassId, QuestionId, TaskId, TaskKind, TaskTypeId, WorkerId};
use mocrowd_core::engine::{truth_map, AnswerRecord, DeliveryRecord, ScenarioConfig};
use mocrowd_core::quality::Answer;
use mocrowd_core::world::WorkerProfile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{HarnessError, ResultSet};

pub const EVENTS: &str = "events.jsonl";
pub const AGGREGATION: &str = "aggregation.csv";
pub const NETWORK: &str = "network.csv";
pub const PROFILES: &str = "profiles.json";
pub const EFFICIENCY: &str = "efficiency_pairs.csv";
pub const CONFIG: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Task {
        task: TaskId,
        kind: TaskKind,
        task_type: TaskTypeId,
        created_at: f64,
        center: GeoPoint,
        radius_m: f64,
        questions: Vec<QuestionId>,
    },
    Delivery {
        task: TaskId,
        question: QuestionId,
        worker: WorkerId,
        dispatched_at: f64,
        outcome: DeliveryOutcome,
        bytes: u64,
        location_class: LocationClassId,
        task_type: TaskTypeId,
    },
    Answer {
        task: TaskId,
        question: QuestionId,
        worker: WorkerId,
        labels: BTreeSet<Label>,
        read_at: f64,
        sent_at: f64,
        response_s: f64,
        prs: f64,
        correct: bool,
        location_class: LocationClassId,
        task_type: TaskTypeId,
    },
}

impl Event {
    fn delivery(d: &DeliveryRecord) -> Event {
        let a = &d.assignment;
        Event::Delivery {
            task: a.task,
            question: a.question,
            worker: a.worker,
            dispatched_at: a.dispatched_at,
            outcome: a.outcome,
            bytes: a.payload_bytes,
            location_class: d.location_class,
            task_type: d.task_type,
        }
    }

    fn answer(r: &AnswerRecord) -> Event {
        let a = &r.answer;
        Event::Answer {
            task: a.task,
            question: a.question,
            worker: a.worker,
            labels: a.labels.clone(),
            read_at: a.read_at,
            sent_at: a.sent_at,
            response_s: r.t,
            prs: r.prs,
            correct: r.correct,
            location_class: r.location_class,
            task_type: r.task_type,
        }
    }
}

/// The event log of a result set: each task followed by its deliveries and
/// then its answers.
pub fn events(rs: &ResultSet) -> Vec<Event> {
    let run = &rs.run;
    let mut deliveries: BTreeMap<TaskId, Vec<&DeliveryRecord>> = BTreeMap::new();
    for d in &run.deliveries {
        deliveries.entry(d.assignment.task).or_default().push(d);
    }
    let mut answers: BTreeMap<TaskId, Vec<&AnswerRecord>> = BTreeMap::new();
    for a in &run.answers {
        answers.entry(a.answer.task).or_default().push(a);
    }
    let mut out = Vec::with_capacity(run.tasks.len() + run.deliveries.len() + run.answers.len());
    for t in &run.tasks {
        out.push(Event::Task {
            task: t.id,
            kind: t.kind,
            task_type: t.task_type,
            created_at: t.created_at,
            center: t.context.center,
            radius_m: t.context.radius_m,
            questions: t.questions.iter().map(|q| q.id).collect(),
        });
        out.extend(deliveries.get(&t.id).into_iter().flatten().map(|d| Event::delivery(d)));
        out.extend(answers.get(&t.id).into_iter().flatten().map(|a| Event::answer(a)));
    }
    out
}

/// Deliveries and answers recovered from an event log.
pub fn records(events: &[Event]) -> (Vec<DeliveryRecord>, Vec<AnswerRecord>) {
    let mut deliveries = Vec::new();
    let mut answers = Vec::new();
    for e in events {
        match e {
            Event::Task { .. } => {}
            &Event::Delivery { task, question, worker, dispatched_at, outcome, bytes, location_class, task_type } => {
                deliveries.push(DeliveryRecord {
                    assignment: Assignment { task, question, worker, dispatched_at, outcome, payload_bytes: bytes },
                    location_class,
                    task_type,
                })
            }
            Event::Answer {
                task,
                question,
                worker,
                labels,
                read_at,
                sent_at,
                response_s,
                prs,
                correct,
                location_class,
                task_type,
            } => answers.push(AnswerRecord {
                answer: Answer {
                    task: *task,
                    question: *question,
                    worker: *worker,
                    labels: labels.clone(),
                    read_at: *read_at,
                    sent_at: *sent_at,
                },
                location_class: *location_class,
                task_type: *task_type,
                t: *response_s,
                prs: *prs,
                correct: *correct,
            }),
        }
    }
    (deliveries, answers)
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, HarnessError> {
    let file = fs::File::open(path).map_err(HarnessError::io(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(HarnessError::io(path))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub tasks: usize,
    pub pairs: usize,
    pub churn: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fingerprint: String,
    pub seed: u64,
    pub tasks: usize,
    pub questions: usize,
    pub answers: usize,
    /// Accuracy per aggregation method.
    pub accuracy: BTreeMap<String, Option<f64>>,
    pub network: Option<NetworkMetrics>,
    pub mean_response_s: Option<f64>,
    pub mean_prs: Option<f64>,
    pub rounds: Vec<RoundSummary>,
    pub files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct ProfileEntry<'a> {
    worker: WorkerId,
    strategy: &'static str,
    reliability: f64,
    type_reliability: &'a BTreeMap<TaskTypeId, f64>,
    answers: usize,
    score: f64,
    rank: usize,
    profile: &'a WorkerProfile,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn labels(set: &BTreeSet<Label>) -> String {
    set.iter().map(|l| l.0.to_string()).collect::<Vec<_>>().join(";")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

fn network_row(scope: &str, m: &NetworkMetrics) -> Vec<String> {
    vec![
        scope.to_string(),
        m.attempted.to_string(),
        m.reachable.to_string(),
        m.delivered.to_string(),
        m.failed.to_string(),
        m.unreachable.to_string(),
        m.av.to_string(),
        m.tu.to_string(),
        m.fail_r.to_string(),
    ]
}

/// Serialized content of every file, in manifest order (manifest excluded).
fn render(rs: &ResultSet) -> Result<Vec<(&'static str, Vec<u8>)>, HarnessError> {
    let run = &rs.run;
    let tax = &run.world.taxonomy;

    let mut events_out = Vec::new();
    for e in events(rs) {
        serde_json::to_writer(&mut events_out, &e)?;
        events_out.push(b'\n');
    }

    let truth = truth_map(&run.tasks);
    let task_of: BTreeMap<QuestionId, TaskId> =
        run.tasks.iter().flat_map(|t| t.questions.iter().map(move |q| (q.id, t.id))).collect();
    let aggregation = csv_bytes(
        &["method", "question", "task", "estimate", "truth", "correct"],
        rs.aggregations.iter().flat_map(|rep| {
            let (truth, task_of) = (&truth, &task_of);
            rep.estimated.iter().map(move |(q, est)| {
                let t = &truth[q];
                vec![
                    rep.method.clone(),
                    q.0.to_string(),
                    task_of[q].0.to_string(),
                    labels(est),
                    labels(t),
                    (est == t).to_string(),
                ]
            })
        }),
    )?;

    let network = csv_bytes(
        &["scope", "attempted", "reachable", "delivered", "failed", "unreachable", "av", "tu", "fail_r"],
        rs.metrics
            .network
            .iter()
            .map(|m| network_row("all", m))
            .chain(rs.metrics.network_by_task.iter().map(|(t, m)| network_row(&format!("task:{}", t.0), m))),
    )?;

    let mut answered: BTreeMap<WorkerId, usize> = BTreeMap::new();
    for a in &run.answers {
        *answered.entry(a.answer.worker).or_default() += 1;
    }
    let board: BTreeMap<WorkerId, (f64, usize)> =
        rs.leaderboard.iter().map(|g| (g.worker, (g.score, g.rank))).collect();
    let profiles: Vec<ProfileEntry> = run
        .world
        .workers
        .iter()
        .map(|w| {
            let (score, rank) = board.get(&w.id).copied().unwrap_or((0.0, 0));
            ProfileEntry {
                worker: w.id,
                strategy: w.strategy.name(),
                reliability: w.reliability,
                type_reliability: &w.type_reliability,
                answers: answered.get(&w.id).copied().unwrap_or(0),
                score,
                rank,
                profile: &w.profile,
            }
        })
        .collect();
    let mut profiles_out = serde_json::to_vec_pretty(&profiles)?;
    profiles_out.push(b'\n');

    let efficiency = csv_bytes(
        &["class", "class_name", "task_type", "task_type_name", "verdict", "confidence", "samples"],
        run.efficiency_pairs().iter().map(|p| {
            vec![
                p.class.0.to_string(),
                tax.class(p.class).map_or(String::new(), |c| c.name.clone()),
                p.task_type.0.to_string(),
                tax.task_type(p.task_type).map_or(String::new(), |t| t.name.clone()),
                p.verdict.name().to_string(),
                p.confidence.to_string(),
                p.samples.to_string(),
            ]
        }),
    )?;

    let mut config = serde_json::to_vec_pretty(&rs.config)?;
    config.push(b'\n');

    Ok(vec![
        (EVENTS, events_out),
        (AGGREGATION, aggregation),
        (NETWORK, network),
        (PROFILES, profiles_out),
        (EFFICIENCY, efficiency),
        (CONFIG, config),
    ])
}

pub fn manifest(rs: &ResultSet) -> Result<Manifest, HarnessError> {
    Ok(build_manifest(rs, &render(rs)?))
}

fn build_manifest(rs: &ResultSet, files: &[(&'static str, Vec<u8>)]) -> Manifest {
    Manifest {
        fingerprint: rs.fingerprint.clone(),
        seed: rs.config.seed,
        tasks: rs.metrics.tasks,
        questions: rs.metrics.questions,
        answers: rs.metrics.answers,
        accuracy: rs.aggregations.iter().map(|r| (r.method.clone(), r.accuracy)).collect(),
        network: rs.metrics.network,
        mean_response_s: rs.metrics.mean_response_s,
        mean_prs: rs.metrics.mean_prs,
        rounds: rs
            .run
            .rounds
            .iter()
            .map(|r| RoundSummary {
                round: r.round,
                tasks: r.tasks,
                pairs: r.pairs.len(),
                churn: r.churn,
                error: r.error.clone(),
            })
            .collect(),
        files: files
            .iter()
            .map(|(name, bytes)| FileEntry {
                name: name.to_string(),
                bytes: bytes.len() as u64,
                sha256: hex(&Sha256::digest(bytes)),
            })
            .collect(),
    }
}

/// Writes the result set into `dir`, creating it if needed, and returns the
/// paths written with the manifest last.
pub fn export_results(rs: &ResultSet, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let files = render(rs)?;
    let manifest = build_manifest(rs, &files);
    let mut written = Vec::with_capacity(files.len() + 1);
    for (name, bytes) in &files {
        written.push(write_file(&dir.join(name), bytes)?);
    }
    let mut m = serde_json::to_vec_pretty(&manifest)?;
    m.push(b'\n');
    written.push(write_file(&dir.join(MANIFEST), &m)?);
    Ok(written)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf, HarnessError> {
    let mut f = fs::File::create(path).map_err(HarnessError::io(path))?;
    f.write_all(bytes).map_err(HarnessError::io(path))?;
    Ok(path.to_path_buf())
}

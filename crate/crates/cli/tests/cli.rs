use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;

use adasum::concepts::ConceptUnit;
use adasum::corpus::Corpus;
use adasum::harness::{fixture_dir, run_experiment, Dataset, ExperimentSpec};
use adasum::optimizer::Budget;
use adasum::oracle::ReferenceSet;
use adasum::rouge::{self, RougeConfig, RougeMode, RougeScore, RougeVariant};
use adasum::session::{Session, SessionConfig, SummaryExport, TerminationReason};

fn adasum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adasum")).args(args).output().unwrap()
}

fn adasum_with_input(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_adasum"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn corpus_path(cluster: &str) -> PathBuf {
    fixture_dir().join("corpus").join(format!("{cluster}.jsonl"))
}

fn corpus(cluster: &str) -> Arc<Corpus> {
    Arc::new(Corpus::from_jsonl(cluster, &std::fs::read_to_string(corpus_path(cluster)).unwrap()).unwrap())
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(adasum(&["--help"]).status.code(), Some(0));
    assert_eq!(adasum(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(adasum(&["summarize"]).status.code(), Some(1));
    let c = corpus_path("harbor_flood");
    assert_eq!(adasum(&["summarize", "--corpus", s(&c), "--budget-words", "0"]).status.code(), Some(1));
    assert_eq!(
        adasum(&["summarize", "--corpus", s(&c), "--budget-words", "5", "--budget-sentences", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(adasum(&["summarize", "--corpus", s(&c), "--batch-size", "0"]).status.code(), Some(1));
    assert_eq!(adasum(&["summarize", "--corpus", "/no/such/file.jsonl"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json\n").unwrap();
    let o = adasum(&["ingest", "--corpus", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn ingest_reports_counts() {
    let out = stdout(&adasum(&["ingest", "--corpus", s(&corpus_path("rail_strike")), "--sentences"]));
    let mut values = serde_json::Deserializer::from_str(&out).into_iter::<serde_json::Value>();
    let head = values.next().unwrap().unwrap();
    let c = corpus("rail_strike");
    assert_eq!(head["cluster_id"], "rail_strike");
    assert_eq!(head["num_sentences"], c.num_sentences());
    assert_eq!(head["content_hash"], c.content_hash());
    assert_eq!(values.count(), c.num_sentences());
}

#[test]
fn summarize_respects_sentence_budget() {
    for cluster in ["harbor_flood", "museum_theft", "water_outage"] {
        let out = stdout(&adasum(&["summarize", "--corpus", s(&corpus_path(cluster)), "--budget-sentences", "3"]));
        let lines: Vec<&str> = out.lines().collect();
        assert!(!lines.is_empty() && lines.len() <= 3, "{cluster}: {lines:?}");
        let cfg = SessionConfig { budget: Budget::sentences(3).unwrap(), ..Default::default() };
        let session = Session::start(corpus(cluster), cfg).unwrap();
        assert_eq!(out.trim_end(), session.summary_text());
    }
}

#[test]
fn summarize_json_matches_export() {
    let out = stdout(&adasum(&[
        "summarize",
        "--corpus",
        s(&corpus_path("orchard_frost")),
        "--unit",
        "bigram",
        "--scoring",
        "occurrence",
        "--budget-words",
        "40",
        "--json",
    ]));
    let export: SummaryExport = serde_json::from_str(&out).unwrap();
    let cfg = SessionConfig {
        unit: ConceptUnit::Bigram,
        scoring: adasum::optimizer::ScoringMode::Occurrence,
        budget: Budget::words(40).unwrap(),
        ..Default::default()
    };
    let session = Session::start(corpus("orchard_frost"), cfg).unwrap();
    let mut expected = session.export();
    expected.session_id = export.session_id.clone();
    assert_eq!(export, expected);
}

#[test]
fn eval_is_a_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let text = "Heavy rain flooded the harbor of Port Alden. The sea wall failed overnight.";
    let cand = dir.path().join("harbor_flood.txt");
    std::fs::write(&cand, text).unwrap();
    let refs_dir = fixture_dir().join("refs");
    let out = stdout(&adasum(&[
        "eval",
        "--candidate",
        s(&cand),
        "--refs",
        s(&refs_dir),
        "--variant",
        "rouge1",
        "--mode",
        "full-f1",
    ]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let refs = ReferenceSet::load_dir(&refs_dir).unwrap();
    let cfg = RougeConfig::new(RougeVariant::Rouge1, RougeMode::FullF1).with_stemming(true);
    let expected = rouge::evaluate(text, refs.get("harbor_flood").unwrap(), &cfg).unwrap();
    let got: RougeScore = serde_json::from_value(report["clusters"][0]["score"].clone()).unwrap();
    assert_eq!(got, expected);
    assert_eq!(report["mean_f1"].as_f64().unwrap(), expected.f1);

    // Directory of candidates, one per cluster.
    std::fs::write(dir.path().join("wind_farm.txt"), "Eighty turbines will be built off the island.").unwrap();
    let out = stdout(&adasum(&["eval", "--candidate", s(dir.path()), "--refs", s(&refs_dir), "--variant", "rougeL"]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["clusters"].as_array().unwrap().len(), 2);

    let o = adasum(&["eval", "--candidate", s(&dir.path().join("nope.txt")), "--refs", s(&refs_dir)]);
    assert_eq!(o.status.code(), Some(2));
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/simulate_reference_bigram_75.jsonl")
}

#[test]
fn simulate_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let o = adasum(&["simulate", "--oracle", "reference", "--unit", "bigram", "--budget-words", "75", "--out", s(&out)]);
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 2);
    let report = std::fs::read_to_string(&out).unwrap();

    // Same report as calling the harness directly.
    let spec = ExperimentSpec { units: vec![ConceptUnit::Bigram], ..Default::default() };
    let direct = run_experiment(&Dataset::load(&fixture_dir()).unwrap(), &spec).unwrap();
    assert_eq!(report, direct.to_jsonl());

    if std::env::var_os("ADASUM_BLESS").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), &report).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).expect("golden report missing; rerun with ADASUM_BLESS=1");
    assert!(report == golden, "simulate report differs from {}", golden_path().display());
}

#[test]
fn simulate_without_out_writes_report_to_stdout() {
    let o = adasum(&["simulate", "--unit", "sentence", "--budget-sentences", "2", "--max-iterations", "2"]);
    let out = stdout(&o);
    for line in out.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("sentence"));
    let missing = adasum(&["simulate", "--data", "/no/such/dir"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn interactive_session_saves_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let save = dir.path().join("session.json");
    let c = corpus_path("library_fire");
    // One round: accept, reject at 0.5, skip, accept at 0.25; then stop.
    let o = adasum_with_input(
        &["interactive", "--corpus", s(&c), "--batch-size", "4", "--save", s(&save)],
        "\na\nr 0.5\n\na 0.25\ndone\n",
    );
    let text = stdout(&o);
    assert!(text.contains("iteration 1"), "{text}");
    let saved = Session::load(&save).unwrap();
    assert_eq!(saved.iteration(), 1);
    assert_eq!(saved.feedback().labels().len(), 3);
    assert_eq!(saved.termination(), Some(TerminationReason::UserSatisfied));

    // The same answers applied in-process give the same summary.
    let mut local = Session::start_with_id(saved.session_id().to_string(), corpus("library_fire"), SessionConfig {
        query_batch_size: 4,
        ..Default::default()
    })
    .unwrap();
    let q = local.next_queries(4).unwrap();
    local
        .submit_feedback(adasum::feedback::FeedbackBatch::new(vec![
            adasum::feedback::Feedback::accept(q[0].concept.key.clone(), 1.0),
            adasum::feedback::Feedback::reject(q[1].concept.key.clone(), 0.5),
            adasum::feedback::Feedback::accept(q[3].concept.key.clone(), 0.25),
        ]))
        .unwrap();
    assert_eq!(saved.selection(), local.selection());

    // A finished session resumes straight to its final summary.
    let o = adasum_with_input(&["interactive", "--resume", s(&save)], "");
    assert!(stdout(&o).contains("final (user_satisfied)"));
}

#[test]
fn interactive_drop_and_budget_commands() {
    let dir = tempfile::tempdir().unwrap();
    let save = dir.path().join("s.json");
    let c = corpus_path("comet_sighting");
    let first = Session::start(corpus("comet_sighting"), SessionConfig::default()).unwrap().selection().sent_ids[0];
    let input = format!("budget sentences 2\ndrop {first}\n\n\n\n\n\n\n\n\n\n\n\n");
    let o = adasum_with_input(&["interactive", "--corpus", s(&c), "--save", s(&save)], &input);
    stdout(&o);
    let saved = Session::load(&save).unwrap();
    assert_eq!(saved.config().budget, Budget::sentences(2).unwrap());
    assert!(saved.feedback().rejected_sentences().contains(&first));
    assert!(!saved.selection().sent_ids.contains(&first));
    assert!(saved.selection().sent_ids.len() <= 2);
}

#[test]
fn serve_answers_health() {
    use std::io::{BufRead, BufReader, Read};
    let mut child = Command::new(env!("CARGO_BIN_EXE_adasum"))
        .args(["serve", "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();
    assert!(addr.starts_with("127.0.0.1:"));
    let mut stream = std::net::TcpStream::connect(&addr).unwrap();
    stream.write_all(b"GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.ends_with("ok"));
}

#[test]
fn serve_rejects_bad_env() {
    let o = Command::new(env!("CARGO_BIN_EXE_adasum"))
        .args(["serve"])
        .env("ADASUM_PORT", "eighty")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

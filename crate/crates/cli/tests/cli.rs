use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> String {
    fixtures().join("scripted.toml").display().to_string()
}

fn fixture(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn valuescope() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_valuescope"));
    for var in ["VALUESCOPE_MODEL", "VALUESCOPE_FLAVOR", "VALUESCOPE_TEMPERATURE", "VALUESCOPE_SEED"] {
        cmd.env_remove(var);
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    valuescope().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn detect_renders_intensities_and_is_stable() {
    let args = ["--config", &config(), "detect", &fixture("texts/running_example.txt"), "--theory", "schwartz-refined"];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let text = stdout(&first);
    assert!(text.starts_with("Text running_example against schwartz-refined v1\n"), "{text}");
    assert!(text.contains("| Achievement (ACH) | Mild resistance (--) |"), "{text}");
    assert!(text.contains("Strong support (+ + +)"), "{text}");
    assert!(text.contains("- ACH: \"climbing the corporate ladder used to be my goal\""), "{text}");
    assert!(text.contains("run: detect=scripted (scripted) temperature=0 seed=42; rate=scripted"), "{text}");
    assert_eq!(run(&args).stdout, first.stdout);
}

#[test]
fn detect_without_rating_omits_ratings() {
    let o = run(&[
        "--config", &config(), "detect", &fixture("texts/running_example.txt"),
        "--theory", "schwartz-refined", "--rate", "off", "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.get("ratings").is_none_or(Value::is_null), "{report}");
    assert_eq!(report["detected"].as_array().unwrap().len(), 2);
    assert!(report["model_metadata"]["rate"].is_null());
}

#[test]
fn detect_reports_no_values() {
    let o = run(&["--config", &config(), "detect", &fixture("texts/no_values.txt"), "--theory", "schwartz-refined"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("No values (∅): no values detected"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["--config", &config(), "detect", "--text", "   \n", "--theory", "schwartz-refined"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("input text is empty"), "{}", stderr(&o));

    let o = run(&["--config", &config(), "detect", "--text", "hi", "--theory", "no-such-theory"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-theory"));

    let o = run(&["--config", &config(), "--parallelism", "0", "detect", "--text", "hi", "--theory", "schwartz-refined"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["detect"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_is_deterministic_and_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("m{i}.json"));
        let o = run(&[
            "--config", &config(), "evaluate", "--dataset", &fixture("datasets/eval20.tsv"),
            "--theory", "schwartz-refined", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = stdout(&o);
        assert!(table.contains("0.7556"), "{table}");
        assert!(table.contains("77.3%") && table.contains("73.9%"), "{table}");
        assert_eq!(std::fs::read_to_string(out.with_extension("txt")).unwrap().trim_end(), table.split("\nrun:").next().unwrap().trim_end());
        let mut json: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        json["run_metadata"].as_object_mut().unwrap().remove("generated_at_unix");
        reports.push(json);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn evaluate_subsample_is_seeded_and_bounded() {
    let args = |size: &str, seed: &str| {
        run(&[
            "--config", &config(), "evaluate", "--dataset", &fixture("datasets/eval20.tsv"),
            "--theory", "schwartz-refined", "--sample-size", size, "--sample-seed", seed,
        ])
    };
    let a = args("8", "42");
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stdout(&a).contains("sample=8/20 sample_seed=42"), "{}", stdout(&a));
    assert_eq!(args("8", "42").stdout, a.stdout);

    let too_many = args("30", "42");
    assert_eq!(too_many.status.code(), Some(2));
    assert!(stderr(&too_many).contains("between 1 and 20"), "{}", stderr(&too_many));
}

#[test]
fn conceptualise_writes_a_valid_theory_and_skips_when_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("generated.json");
    let out_s = out.to_str().unwrap();
    let base = ["--config", &config(), "conceptualise", "--theory", "schwartz-refined", "--out", out_s];

    let o = run(&base);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("schwartz-refined v1, 19 values"), "{}", stdout(&o));

    let v = run(&["validate", out_s]);
    assert!(v.status.success(), "{}", stdout(&v));
    assert!(stdout(&v).contains("is valid"));

    let bytes = std::fs::read(&out).unwrap();
    let mut again = base.to_vec();
    again.push("--if-changed");
    let o = run(&again);
    assert!(o.status.success());
    assert!(stdout(&o).contains("nothing to do"), "{}", stdout(&o));
    assert_eq!(std::fs::read(&out).unwrap(), bytes);

    // without --if-changed the version advances
    let o = run(&base);
    assert!(stdout(&o).contains("v2"), "{}", stdout(&o));
}

#[test]
fn conceptualise_names_a_missing_document_directory() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    let o = run(&[
        "--config", &config(), "conceptualise", "--theory", "x", "--docs", missing.to_str().unwrap(),
        "--out", dir.path().join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(missing.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn flags_beat_environment_beats_file() {
    let model = |env: Option<&str>, flag: Option<&str>| -> String {
        let mut cmd = valuescope();
        cmd.args(["--config", &config()]);
        if let Some(flag) = flag {
            cmd.args(["--model", flag]);
        }
        cmd.args(["detect", &fixture("texts/running_example.txt"), "--theory", "schwartz-refined", "--rate", "off", "--json"]);
        if let Some(env) = env {
            cmd.env("VALUESCOPE_MODEL", env);
        }
        let o = cmd.output().unwrap();
        let report: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("{}", stderr(&o)));
        report["model_metadata"]["detect"]["model"].as_str().unwrap().to_string()
    };
    assert_eq!(model(None, None), "scripted");
    assert_eq!(model(Some("from-env"), None), "from-env");
    assert_eq!(model(Some("from-env"), Some("from-flag")), "from-flag");
}

fn http(addr: &str, method: &str, path: &str, body: Option<&str>) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let body = body.unwrap_or("");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let payload = raw.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    (status, serde_json::from_str(payload).unwrap_or(Value::Null))
}

#[test]
fn serve_answers_http_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&fixtures(), dir.path());
    let mut child = valuescope()
        .current_dir(dir.path())
        .args(["--config", "scripted.toml", "serve", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(rest) = line.strip_prefix("listening on http://") {
            break rest.split_whitespace().next().unwrap().to_string();
        }
    };

    let (status, list) = http(&addr, "GET", "/theories", None);
    assert_eq!(status, 200);
    assert!(list.to_string().contains("schwartz-refined"), "{list}");

    let wipe = r#"{"edits": [{"path": "values[HED].tags", "value": []}]}"#;
    let (status, report) = http(&addr, "PUT", "/theories/schwartz-refined", Some(wipe));
    assert_eq!(status, 422, "{report}");

    let text = std::fs::read_to_string(dir.path().join("texts/running_example.txt")).unwrap();
    let body = serde_json::json!({"text": text, "theory_id": "schwartz-refined"}).to_string();
    let (status, accepted) = http(&addr, "POST", "/analyses", Some(&body));
    assert_eq!(status, 202, "{accepted}");
    let job = accepted["job_id"].as_str().unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let polled = loop {
        let (status, polled) = http(&addr, "GET", &format!("/analyses/{job}"), None);
        assert_eq!(status, 200);
        if polled["state"] == "done" || polled["state"] == "failed" || Instant::now() > deadline {
            break polled;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    assert_eq!(polled["state"], "done", "{polled}");
    assert_eq!(polled["result"]["ratings"][1]["intensity"], "strong_support");
    assert!(dir.path().join("results").join(format!("{job}.json")).is_file());

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert!(status.success(), "{status:?}");
    let rest: Vec<String> = lines.map_while(Result::ok).collect();
    assert!(rest.iter().any(|l| l.contains("shutting down")), "{rest:?}");
}

#[test]
fn convert_valueeval_emits_canonical_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let sentences = dir.path().join("sentences.tsv");
    let labels = dir.path().join("labels.tsv");
    std::fs::write(&sentences, "Text-ID\tSentence-ID\tText\nA\t1\tI want to win.\nA\t2\tLet us relax.\n").unwrap();
    std::fs::write(
        &labels,
        "Text-ID\tSentence-ID\tAchievement attained\tAchievement constrained\tHedonism attained\tHedonism constrained\n\
         A\t1\t1\t0\t0\t0\nA\t2\t0\t0\t0.5\t0\n",
    )
    .unwrap();
    let o = run(&[
        "--config", &config(), "convert-valueeval",
        "--sentences", sentences.to_str().unwrap(), "--labels", labels.to_str().unwrap(),
        "--theory", "schwartz-refined",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = stdout(&o);
    let mut rows = tsv.lines();
    let header: Vec<&str> = rows.next().unwrap().split('\t').collect();
    assert_eq!(&header[..2], ["text_id", "text"]);
    let ach = header.iter().position(|h| *h == "ACH").unwrap();
    let hed = header.iter().position(|h| *h == "HED").unwrap();
    let first: Vec<&str> = rows.next().unwrap().split('\t').collect();
    let second: Vec<&str> = rows.next().unwrap().split('\t').collect();
    assert_eq!((first[0], first[ach], first[hed]), ("A_1", "1", "0"));
    assert_eq!((second[0], second[ach], second[hed]), ("A_2", "0", "1"));
}

#[test]
fn validate_rejects_an_invalid_theory() {
    let dir = tempfile::tempdir().unwrap();
    let mut theory: Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("theories/schwartz-refined.json")).unwrap()).unwrap();
    theory["values"][3]["tags"] = Value::Array(vec![]);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string_pretty(&theory).unwrap()).unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("values[3].tags"), "{}", stdout(&o));
    assert!(stderr(&o).contains("not a valid theory"));
}

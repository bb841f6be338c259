use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn geocon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geocon"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("GEOCON_OUT")
        .env_remove("GEOCON_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = geocon(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["synth", "--counties", "20", "--signal-set", "5", "--beta", "0.8", "--seed", "7", "--out", out.to_str().unwrap()]);
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["adjacency.txt", "config.toml", "series.csv", "socio.csv", "truth.json"]);
    assert_eq!(fa, fb);

    let truth: serde_json::Value = serde_json::from_slice(&fa[4].1).unwrap();
    assert_eq!(truth["signal_set"].as_array().unwrap().len(), 5);
}

#[test]
fn vote_before_train_names_the_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    let out = dir.path().join("out");
    let config = inputs.join("config.toml");
    let (config, out) = (config.to_str().unwrap(), out.to_str().unwrap());
    ok(&["synth", "--counties", "6", "--signal-set", "2", "--days", "40", "--out", inputs.to_str().unwrap()]);
    ok(&["ingest", "--config", config, "--out", out]);
    ok(&["graph", "--config", config, "--out", out]);

    let res = geocon(&["vote", "--config", config, "--out", out]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("records_border.jsonl") && err.contains("run `train` first"), "{err}");

    let res = geocon(&["ingest", "--config", "/nonexistent/config.toml", "--out", out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("/nonexistent/config.toml"));
}

fn http_get(addr: &str, target: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {target} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    (status, body.to_string())
}

#[test]
fn demo_then_serve_answers_every_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let stdout = ok(&["demo", "--out", out.to_str().unwrap(), "--jobs", "1"]);
    assert!(stdout.contains("aod border") && stdout.contains("aod socio"), "{stdout}");

    let mut child = Command::new(env!("CARGO_BIN_EXE_geocon"))
        .args(["serve", "--port", "0"])
        .env("GEOCON_DATA", &out)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_string();

    let checks = [
        "/api/states",
        "/api/states/99/counties",
        "/api/states/99/network?kind=border",
        "/api/states/99/network?kind=socio",
        "/api/states/99/network?kind=socio&threshold=1.5",
        "/api/states/99/variables/hospitalizations_per100k?bins=4",
        "/api/states/99/variables/aod",
        "/api/states/99/votes?factor=aod&kind=border&alpha=0.1",
        "/api/states/99/votes?factor=aod&kind=socio",
        "/api/states/99/scatter?x=aod&y=hospitalizations_per100k",
    ];
    let mut results = Vec::new();
    for target in checks {
        results.push((target, http_get(&addr, target)));
    }
    let missing = http_get(&addr, "/api/states/99/votes?factor=humidity");
    child.kill().unwrap();
    child.wait().unwrap();

    for (target, (status, body)) in results {
        assert_eq!(status, 200, "{target}: {body}");
        serde_json::from_str::<serde_json::Value>(&body).unwrap();
    }
    assert_eq!(missing.0, 404);
}

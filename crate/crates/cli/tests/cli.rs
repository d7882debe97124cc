use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use tempfile::TempDir;
use vhb_core::log::{parse, serialize};

fn vhb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vhb"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for out in ["a.vhb.json", "b.vhb.json"] {
        let o = vhb(dir.path(), &["simulate", "--mode", "accumulator", "--seed", "42", "--out", out]);
        assert!(o.status.success(), "{o:?}");
    }
    let a = std::fs::read(dir.path().join("a.vhb.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.vhb.json")).unwrap();
    assert_eq!(a, b);
    parse(&a).unwrap();
}

#[test]
fn simulate_default_output_name() {
    let dir = TempDir::new().unwrap();
    let o = vhb(dir.path(), &["simulate", "--mode", "sequence", "--seed", "1", "--player-seed", "2"]);
    assert!(o.status.success(), "{o:?}");
    let name = "sim-sequence-0000000000000001-0000000000000002.vhb.json";
    assert!(dir.path().join(name).exists(), "{}", stdout(&o));
}

#[test]
fn replay_reports_score_ok_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let o = vhb(dir.path(), &["simulate", "--mode", "reaction", "--seed", "7", "--reaction-trials", "10", "--out", "r.vhb.json"]);
    assert!(o.status.success());
    let o = vhb(dir.path(), &["replay", "r.vhb.json"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("score OK"));
    assert!(stdout(&o).contains("engine replay OK"));

    let path = dir.path().join("r.vhb.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replacen("\"score\": 10", "\"score\": 11", 1);
    assert_ne!(bumped, text);
    std::fs::write(dir.path().join("bad.vhb.json"), bumped).unwrap();
    let o = vhb(dir.path(), &["replay", "bad.vhb.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("score MISMATCH"));

    // shift one press: the log stays self-consistent but the engine disagrees
    let mut log = parse(text.as_bytes()).unwrap();
    log.presses[0].t = log.presses[0].t + vhb_core::Millis(1);
    std::fs::write(dir.path().join("moved.vhb.json"), serialize(&log).unwrap()).unwrap();
    let o = vhb(dir.path(), &["replay", "moved.vhb.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("score OK"));
    assert!(stdout(&o).contains("engine replay MISMATCH"));
}

#[test]
fn insights_writes_beside_input_unless_out_given() {
    let dir = TempDir::new().unwrap();
    std::fs::create_dir(dir.path().join("logs")).unwrap();
    vhb(dir.path(), &["simulate", "--seed", "3", "--out", "logs/s.vhb.json"]);
    let o = vhb(dir.path(), &["insights", "logs/s.vhb.json", "--format", "all"]);
    assert!(o.status.success(), "{o:?}");
    for ext in ["svg", "csv", "html"] {
        assert!(dir.path().join(format!("logs/s.insights.{ext}")).exists());
    }
    let o = vhb(dir.path(), &["insights", "logs/s.vhb.json", "--format", "svg", "--out", "report.svg"]);
    assert!(o.status.success());
    let svg = std::fs::read_to_string(dir.path().join("report.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

fn textbook_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy / (sxx.sqrt() * syy.sqrt())
}

#[test]
fn compare_pearson_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let xs = [41.0, 38.0, 55.0, 47.0, 60.0, 52.0, 44.0, 39.0];
    let ys = [30.0, 35.0, 41.0, 33.0, 45.0, 36.0, 37.0, 29.0];
    let write = |name: &str, header: &str, v: &[f64]| {
        let body: String = v.iter().map(|x| format!("{x}\n")).collect();
        std::fs::write(dir.path().join(name), format!("{header}\n{body}")).unwrap();
    };
    write("batak.csv", "score", &xs);
    write("vhb.csv", "score", &ys);
    let o = vhb(dir.path(), &["compare", "batak.csv", "vhb.csv", "--test", "pearson", "--json"]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = v["pearson_r"].as_f64().unwrap();
    assert!((r - textbook_pearson(&xs, &ys)).abs() < 1e-9);
    assert_eq!(v["degrees_of_freedom"].as_f64(), Some(6.0));

    let o = vhb(dir.path(), &["compare", "batak.csv", "vhb.csv", "--test", "pearson"]);
    assert!(stdout(&o).contains(&format!("{r:.6}")));

    let o = vhb(dir.path(), &["compare", "batak.csv", "vhb.csv", "--test", "paired", "--column", "score"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("paired_t"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = vhb(dir.path(), &["simulate", "--mode", "juggling"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage") || String::from_utf8_lossy(&o.stderr).contains("--help"));
    let o = vhb(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = vhb(dir.path(), &["replay", "missing.vhb.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = vhb(dir.path(), &["simulate", "--out", "no/such/dir/x.vhb.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = vhb(dir.path(), &["layouts"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn layouts_table_lists_all() {
    let dir = TempDir::new().unwrap();
    let text = stdout(&vhb(dir.path(), &["layouts"]));
    for name in ["classic12", "grid3x3", "small_circle", "large_circle", "four_corner", "border"] {
        assert!(text.contains(name), "{text}");
    }
    let o = vhb(dir.path(), &["layouts", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}

#[test]
fn serve_answers_healthz() {
    let dir = TempDir::new().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_vhb"))
        .args(["serve", "--port", &port.to_string()])
        .env("VHB_LOG_DIR", dir.path().join("logs"))
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let response = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            s.read_to_string(&mut buf).unwrap();
            break buf;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(dir.path().join("logs").is_dir());
}

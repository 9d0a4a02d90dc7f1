use std::process::{Command, Output};

fn xva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xva"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SMALL: [&str; 4] = ["--nx", "201", "--nt", "100"];

#[test]
fn price_of_reference_config_has_nonnegative_band() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/benchmark.json");
    let mut args = vec!["price", "--config", config];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["band_width"].as_f64().unwrap() >= 0.0);
    assert!(report["v_hat_0"].as_f64().unwrap() > 0.0);
}

#[test]
fn arbitrage_config_exits_nonzero_with_violation_text() {
    let out = xva(&["price", "--set", "r_f_minus=0.01"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("r_f+ <= r_f-"), "{}", stderr(&out));
}

#[test]
fn arbitrage_override_runs() {
    let mut args = vec!["price", "--set", "r_f_minus=0.2", "--allow-arbitrage"];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let mut cfg: serde_json::Value = serde_json::from_str(include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/benchmark.json"
    )))
    .unwrap();
    cfg["alpha"] = serde_json::json!(1.5);
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = xva(&["price", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));

    let out = xva(&["price", "--set", "nope=1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn put_smoke() {
    let mut args = vec!["price", "--claim", "put", "--strike", "1", "--maturity", "1"];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["xva_sell"].is_number());
}

#[test]
fn custom_claim_needs_knots() {
    let out = xva(&["price", "--claim", "custom"]);
    assert!(!out.status.success());
    let mut args = vec!["price", "--claim", "custom", "--knots", "0.5:0,1:0,2:1"];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn sweep_csv_is_byte_stable_and_ordered() {
    let mut args = vec![
        "sweep",
        "--axis",
        "alpha=0,0.5,1",
        "--axis2",
        "r_f_minus=0.08,0.1",
    ];
    args.extend(SMALL);
    let a = xva(&args);
    let b = xva(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("alpha,r_f_minus,v_hat_0,"));
    assert!(lines[1].starts_with("0,0.08,"));
    assert!(lines[2].starts_with("0,0.1,"));
    assert!(lines[6].starts_with("1,0.1,"));
}

#[test]
fn sweep_range_syntax_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let mut args = vec![
        "sweep",
        "--axis",
        "h_C_Q=0.1:0.2:0.05",
        "--outputs",
        "band",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "h_C_Q,v_hat_0,band_width,error");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn unknown_axis_fails_before_solving() {
    let out = xva(&["sweep", "--axis", "volatility=0.1,0.2"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("volatility"));
}

#[test]
fn convergence_needs_three_levels() {
    let out = xva(&["convergence", "--levels", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("levels"));
}

#[test]
fn convergence_linear_table() {
    let out = xva(&["convergence", "--levels", "3", "--nx", "101", "--nt", "50"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    let order: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((order - 2.0).abs() < 0.5, "{order}");
}

#[test]
fn log_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let mut args = vec!["price", "--log", log.to_str().unwrap()];
    args.extend(SMALL);
    let out = xva(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&log).unwrap();
    let events: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.first().unwrap()["event"], "config");
    assert_eq!(events.last().unwrap()["event"], "report");
    assert_eq!(events.iter().filter(|e| e["event"] == "solve").count(), 2);
}

#[test]
fn table2_uses_thread_cap() {
    let out = Command::new(env!("CARGO_BIN_EXE_xva"))
        .args(["table2"])
        .args(SMALL)
        .env("XVA_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 5);

    let out = Command::new(env!("CARGO_BIN_EXE_xva"))
        .args(["table2"])
        .env("XVA_THREADS", "many")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("XVA_THREADS"));
}

use std::process::{Command, Output};

fn telesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telesim"))
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

#[test]
fn modified_table_shows_rejected_sectors() {
    let out = telesim(&["--scheme", "modified", "--chi", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for sector in ["(2,0)", "(0,2)"] {
        let row = text.lines().find(|l| l.starts_with(sector)).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(&cols[2..], ["0.000000", "0.000000", "0.000000"], "{row}");
    }
    for branch in ["D3", "D4"] {
        let row = text.lines().find(|l| l.starts_with(branch)).unwrap();
        assert_eq!(row.split_whitespace().nth(2), Some("1.000000"), "{row}");
    }
    assert!(text.contains("classical limit          0.750000"));
    assert!(text.contains("survival ratio (1,1)     0.500000"));
}

#[test]
fn unknown_flag_exits_2_with_one_line() {
    let out = telesim(&["--scheme", "modified", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("--bogus"));
}

#[test]
fn out_of_range_values_exit_2() {
    for args in [
        &["--chi", "-0.2"][..],
        &["--efficiency", "0"],
        &["--max-pairs", "9"],
        &["--scheme", "teleporter"],
        &["--averaging", "monte-carlo", "--samples", "0"],
    ] {
        let out = telesim(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr(&out).lines().count(), 1, "{args:?}");
        assert!(stdout(&out).is_empty());
    }
}

#[test]
fn unreadable_config_exits_2() {
    let out = telesim(&["--config", "/nonexistent/telesim.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot read config file"));
}

#[test]
fn config_file_merges_with_flags() {
    let dir = std::env::temp_dir().join(format!("telesim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("scenario.json");
    std::fs::write(&path, r#"{"scheme": "innsbruck", "format": "json", "chi": 0.3}"#).unwrap();
    let out = telesim(&["--config", path.to_str().unwrap(), "--chi", "0.05"]);
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["scheme"], "innsbruck");
    assert_eq!(v["config"]["params"]["chi"], 0.05);
}

#[test]
fn json_is_deterministic_and_versioned() {
    let args = ["--format", "json", "--averaging", "monte-carlo", "--samples", "5", "--seed", "3"];
    let a = telesim(&args);
    let b = telesim(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["averaging_inputs"], 5);
    assert_eq!(v["survival_ratio"], 0.5);
    assert_eq!(v["sectors"].as_array().unwrap().len(), 6);
}

#[test]
fn csv_flattens_sector_matrix() {
    let out = telesim(&["--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "schema_version,sector_m,sector_n,weight,branch,probability,max_amplitude");
    assert_eq!(lines.len(), 1 + 6 * 2);
    assert!(lines.contains(&"1,1,1,0.000384245917387,D3,0.0625,0.25"));
    assert!(lines.contains(&"1,2,0,0.00028818443804,D4,0,0"));
}

#[test]
fn verify_agrees_on_acceptance_grid() {
    let out = telesim(&["--verify", "--seed", "7", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["verification"].as_array().unwrap();
    assert!(checks.len() > 500);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

//! End-to-end checks of the binary: output formats, exit codes, and manifest
//! reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachefield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn tmp_path(name: &str) -> PathBuf {
    let mut dir = std::env::temp_dir();
    dir.push(format!("cachefield-test-{}-{name}", std::process::id()));
    dir
}

#[test]
fn space_prints_count_and_states() {
    let output = run(&["space", "--contents", "3", "--cache", "2"]);
    assert!(output.status.success());
    assert!(stdout(&output).starts_with("N_s = 3"));

    let output = run(&["space", "--contents", "10", "--cache", "5", "--json"]);
    let text = stdout(&output);
    assert!(text.starts_with("N_s = 252"));
    let json_part = text.split_once('\n').unwrap().1;
    let states: Vec<Vec<usize>> = serde_json::from_str(json_part).unwrap();
    assert_eq!(states.len(), 252);
    assert_eq!(states[0], vec![0, 1, 2, 3, 4]);
}

#[test]
fn usage_errors_exit_2_and_computation_errors_exit_1() {
    let output = run(&["space", "--contents", "3"]);
    assert_eq!(output.status.code(), Some(2));

    // cache size >= contents is a computation error
    let output = run(&["space", "--contents", "3", "--cache", "3"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("invalid dimensions"));

    let output = run(&[
        "theta", "--scheme", "nosuch", "--cache", "2", "--upsilon", "0.5,0.5",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn theta_emits_coordinate_list_with_stochastic_columns() {
    let output = run(&[
        "theta",
        "--scheme",
        "rr",
        "--phi",
        "0.3",
        "--cache",
        "2",
        "--upsilon",
        "0.5,0.3,0.2",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,col,value"));
    let mut col_sums = [0.0f64; 3];
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        let col: usize = parts[1].parse().unwrap();
        col_sums[col] += parts[2].parse::<f64>().unwrap();
    }
    for sum in col_sums {
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn field_grid_covers_the_documented_scenario() {
    let output = run(&[
        "field",
        "--scheme",
        "rr",
        "--phi",
        "0.5",
        "--upsilon-n",
        "0.46,0.30,0.24",
        "--upsilon-next",
        "0.4,0.35,0.25",
        "--cache",
        "2",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("eta1,eta2,eta3,u1,u2,u3,d_gamma"));
    // default 0.05 step over the simplex: 21 + 20 + ... + 1 points
    assert_eq!(text.lines().count() - 1, 231);
    let mut seen_positive = false;
    let mut seen_negative = false;
    for line in text.lines().skip(1) {
        let d: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        seen_positive |= d > 0.0;
        seen_negative |= d < 0.0;
    }
    assert!(seen_positive && seen_negative);
}

#[test]
fn gen_writes_trace_sidecar_and_manifest_reproducibly() {
    let out_a = tmp_path("trace-a.csv");
    let out_b = tmp_path("trace-b.csv");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "gen",
            "--model",
            "shotnoise",
            "--contents",
            "10",
            "--t0-max",
            "50",
            "--a-min",
            "2",
            "--a-max",
            "20",
            "--horizon",
            "200",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let trace_a = std::fs::read_to_string(&out_a).unwrap();
    let trace_b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(trace_a, trace_b);
    assert!(trace_a.starts_with("time,content\n"));

    let manifest_a: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}.manifest.json", out_a.display())).unwrap(),
    )
    .unwrap();
    let manifest_b: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}.manifest.json", out_b.display())).unwrap(),
    )
    .unwrap();
    // identical digests for both runs
    assert_eq!(
        manifest_a["outputs"][0]["fnv1a64"],
        manifest_b["outputs"][0]["fnv1a64"]
    );
    assert_eq!(manifest_a["seeds"], serde_json::json!([11]));

    let params: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}.params.json", out_a.display())).unwrap(),
    )
    .unwrap();
    assert_eq!(params["model"], "shotnoise");
    assert_eq!(params["contents"].as_array().unwrap().len(), 10);

    for out in [&out_a, &out_b] {
        for suffix in ["", ".manifest.json", ".params.json"] {
            let _ = std::fs::remove_file(format!("{}{suffix}", out.display()));
        }
    }
}

#[test]
fn sim_replays_generated_traces() {
    let out = tmp_path("replay.csv");
    let gen = run(&[
        "gen",
        "--model",
        "static",
        "--upsilon",
        "0.5,0.3,0.2",
        "--contents",
        "3",
        "--horizon",
        "2000",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(gen.status.success());

    let output = run(&[
        "sim",
        "--scheme",
        "lru",
        "--cache",
        "2",
        "--trace",
        out.to_str().unwrap(),
        "--model",
        "static",
        "--upsilon",
        "0.5,0.3,0.2",
        "--contents",
        "3",
    ]);
    assert!(output.status.success());
    let result: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(result["rounds"], 1);
    assert!(result["mean"].as_f64().unwrap() > 0.4);

    for suffix in ["", ".manifest.json", ".params.json"] {
        let _ = std::fs::remove_file(format!("{}{suffix}", out.display()));
    }
}

#[test]
fn sim_monte_carlo_is_deterministic() {
    let args = [
        "sim",
        "--scheme",
        "rr",
        "--phi",
        "0.05",
        "--cache",
        "3",
        "--model",
        "shotnoise",
        "--contents",
        "15",
        "--a-min",
        "2",
        "--a-max",
        "10",
        "--t0-max",
        "100",
        "--horizon",
        "300",
        "--rounds",
        "4",
        "--seed",
        "21",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let result: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(result["rounds"], 4);
}

#[test]
fn sweep_emits_plottable_rows_per_scheme_and_t0() {
    let output = run(&[
        "sweep",
        "--schemes",
        "rr:0.05,lru",
        "--cache",
        "3",
        "--t0",
        "0,100",
        "--model",
        "shotnoise",
        "--contents",
        "15",
        "--a-min",
        "2",
        "--a-max",
        "10",
        "--horizon",
        "300",
        "--rounds",
        "3",
        "--seed",
        "5",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t0_max,scheme,mean,stderr");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("0,rr:0.05,"));
    assert!(lines[4].starts_with("100,lru,"));
}

#[test]
fn dgamma_and_steady_accept_popularity_sequences() {
    let seq_file = tmp_path("seq.txt");
    std::fs::write(&seq_file, "0.5,0.3,0.2\n0.4,0.35,0.25\n0.3,0.4,0.3\n").unwrap();

    let output = run(&[
        "dgamma",
        "--scheme",
        "tlpa",
        "--cache",
        "2",
        "--upsilon-file",
        seq_file.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("step,d_gamma"));
    assert_eq!(text.lines().count(), 3); // two per-step deltas

    let output = run(&[
        "steady",
        "--scheme",
        "rr",
        "--phi",
        "0.5",
        "--cache",
        "2",
        "--upsilon-file",
        seq_file.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("input,eta0,eta1,eta2"));
    assert_eq!(text.lines().count(), 4);

    let _ = std::fs::remove_file(seq_file);
}

#[test]
fn steady_and_dgamma_agree_with_documented_values() {
    let output = run(&[
        "dgamma",
        "--scheme",
        "rr",
        "--phi",
        "0.5",
        "--cache",
        "2",
        "--upsilon-n",
        "0.5,0.3,0.2",
        "--upsilon-next",
        "0.4,0.35,0.25",
        "--eta",
        "1,0,0",
    ]);
    assert!(output.status.success());
    let result: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    // u = [-0.2, 0.1, 0.1] against z = [0.75, 0.65, 0.60]
    assert!((result["d_gamma"].as_f64().unwrap() - (-0.025)).abs() < 1e-12);

    let output = run(&[
        "steady", "--scheme", "tlpa", "--cache", "2", "--upsilon", "0.5,0.3,0.2", "--json",
    ]);
    let eta: Vec<f64> = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(eta, vec![1.0, 0.0, 0.0]);
}

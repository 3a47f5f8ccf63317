use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use nsdyn_cli::{run_command_with, RunConfig, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE};

struct Invocation {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

fn invoke_env(args: &[&str], env_seed: Option<&str>) -> Invocation {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_command_with(args.iter().copied(), env_seed, &mut out, &mut err);
    Invocation {
        code,
        stdout: out,
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn invoke(args: &[&str]) -> Invocation {
    invoke_env(args, None)
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares against a checked-in golden; `NSDYN_BLESS=1` rewrites it.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = golden_path(name);
    if std::env::var_os("NSDYN_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, bytes).unwrap();
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == bytes, "{name} differs from its golden");
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn quad_two_steps_hand_computed() {
    let r = invoke(&[
        "simulate",
        "--function",
        "quad",
        "--x0",
        "1",
        "--alpha",
        "0.1",
        "--steps",
        "2",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let text = String::from_utf8(r.stdout.clone()).unwrap();
    assert_eq!(
        text,
        "k,t,x_0,f,subgrad_norm\n0,0.0,1.0,0.5,1.0\n1,0.1,0.9,0.405,0.9\n2,0.2,0.81,0.32805000000000006,0.81\n"
    );
    check_golden("quad_two_steps.csv", &r.stdout);
}

#[test]
fn zero_steps_is_header_plus_start() {
    let r = invoke(&[
        "simulate",
        "--function",
        "quad",
        "--x0",
        "1",
        "--alpha",
        "0.1",
        "--steps",
        "0",
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(
        String::from_utf8(r.stdout.clone()).unwrap(),
        "k,t,x_0,f,subgrad_norm\n0,0.0,1.0,0.5,1.0\n"
    );
    check_golden("quad_zero_steps.csv", &r.stdout);
}

#[test]
fn cross_trajectory_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let r = invoke(&[
        "simulate",
        "--function",
        "cross",
        "--x0",
        "1,0.1",
        "--alpha",
        "0.1",
        "--steps",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let bytes = fs::read(&out).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().count(), 202);
    assert!(text.starts_with("k,t,x_0,x_1,f,subgrad_norm\n0,0.0,1.0,0.1,"));
    assert!(!text.contains('\r'));
    check_golden("cross_200.csv", &bytes);
}

#[test]
fn counterexample_all_escape() {
    let r = invoke(&[
        "counterexample",
        "--epsilon",
        "0.25",
        "--alpha",
        "0.1",
        "--samples",
        "1000",
        "--seed",
        "7",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["escaped_count"], 1000);
    assert_eq!(v["stuck_on_S_count"], 0);
    check_golden("counterexample_seed7.json", &r.stdout);
}

#[test]
fn neg_norm_probe_escapes() {
    let r = invoke(&[
        "probe",
        "--function",
        "neg_norm",
        "--xstar",
        "0,0",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["status"], "escape_witnessed");
    assert!(v["witness"]["exit_index"].as_u64().unwrap() > 0);
    check_golden("probe_neg_norm.json", &r.stdout);
}

#[test]
fn probe_witness_csv_sits_next_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("neg.json");
    let r = invoke(&[
        "probe",
        "--function",
        "neg_norm",
        "--xstar",
        "0,0",
        "--epsilon",
        "0.1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&fs::read(&report).unwrap());
    let name = v["witness"]["trajectory_csv"].as_str().unwrap();
    assert_eq!(name, "neg.witness.csv");
    let csv = fs::read_to_string(dir.path().join(name)).unwrap();
    let exit = v["witness"]["exit_index"].as_u64().unwrap() as usize;
    assert_eq!(csv.lines().count(), exit + 2);
}

#[test]
fn strict_minimum_probe_is_clean() {
    let r = invoke(&[
        "probe",
        "--function",
        "abs_sum",
        "--xstar",
        "0,0",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["status"], "no_escape_observed");
    assert!(v["certificate"]["alpha_bar"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_writes_three_aligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let r = invoke(&[
        "compare",
        "--function",
        "vee_bowl",
        "--x0",
        "0.3,0.4",
        "--alpha",
        "0.05",
        "--horizon",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let dev = json(&fs::read(out.join("deviation.json")).unwrap());
    assert_eq!(json(&r.stdout), dev);
    assert_eq!(dev["reference"], "minimal_norm_selection");
    assert!(dev["sup_dev"].as_f64().unwrap() < 0.1);
    let discrete = fs::read_to_string(out.join("discrete.csv")).unwrap();
    let flow = fs::read_to_string(out.join("flow.csv")).unwrap();
    assert_eq!(discrete.lines().count(), 22);
    assert_eq!(flow.lines().count(), 2002);
    assert!(flow.starts_with("t,x_0,x_1,f,min_norm_subgrad\n"));
}

#[test]
fn flow_and_bounds_outputs() {
    let r = invoke(&[
        "flow",
        "--function",
        "quad",
        "--x0",
        "1",
        "--horizon",
        "1",
        "--h",
        "0.25",
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(String::from_utf8(r.stdout).unwrap().lines().count(), 6);

    let r = invoke(&[
        "convex-bounds",
        "--function",
        "abs_sum",
        "--x0",
        "1",
        "--alpha",
        "0.1",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["iters_budget"], 100);
    assert_eq!(v["liminf_within_bound"], true);

    let r = invoke(&["list-functions"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(json(&r.stdout).as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_two_with_grammar() {
    let cases: &[&[&str]] = &[
        &[],
        &[
            "simulate",
            "--function",
            "cross",
            "--x0",
            "1,0.1",
            "--steps",
            "5",
        ],
        &[
            "simulate",
            "--function",
            "nope",
            "--x0",
            "1",
            "--alpha",
            "0.1",
            "--steps",
            "5",
        ],
        &[
            "simulate",
            "--function",
            "cross",
            "--x0",
            "1,x",
            "--alpha",
            "0.1",
            "--steps",
            "5",
        ],
        &[
            "simulate",
            "--function",
            "cross",
            "--x0",
            "1,0.1,2",
            "--alpha",
            "0.1",
            "--steps",
            "5",
        ],
        &["frobnicate"],
        &["simulate", "--bogus-flag"],
        &[
            "convex-bounds",
            "--function",
            "cross",
            "--x0",
            "1,0.1",
            "--alpha",
            "0.1",
            "--epsilon",
            "0.1",
        ],
        &[
            "simulate",
            "--function",
            "quad",
            "--x0",
            "1",
            "--alpha",
            "0.1",
            "--steps",
            "5",
            "--format",
            "xml",
        ],
    ];
    for args in cases {
        let r = invoke(args);
        assert_eq!(r.code, EXIT_USAGE, "{args:?}");
        assert!(r.stderr.contains("--x0"), "{args:?}: {}", r.stderr);
    }
}

#[test]
fn help_and_version_go_to_stdout() {
    for flag in ["--help", "-V"] {
        let r = invoke(&[flag]);
        assert_eq!(r.code, EXIT_OK);
        assert!(r.stderr.is_empty());
        assert!(String::from_utf8(r.stdout).unwrap().contains("nsdyn"));
    }
}

#[test]
fn divergence_exits_three() {
    let r = invoke(&[
        "simulate",
        "--function",
        "neg_norm",
        "--x0",
        "1,0",
        "--alpha",
        "6e99",
        "--steps",
        "5",
    ]);
    assert_eq!(r.code, EXIT_DIVERGED);
    // the partial trajectory up to divergence is still written
    assert_eq!(String::from_utf8(r.stdout).unwrap().lines().count(), 3);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let flag_runs: &[&[&str]] = &[
        &[
            "simulate",
            "--function",
            "abs_sum",
            "--x0",
            "0.3,-0.2",
            "--alpha",
            "0.1",
            "--steps",
            "30",
            "--policy",
            "random_extreme",
            "--seed",
            "4",
        ],
        &[
            "probe",
            "--function",
            "vee_bowl",
            "--xstar",
            "0,0",
            "--epsilon",
            "0.1",
            "--samples",
            "20",
            "--seed",
            "2",
        ],
        &[
            "counterexample",
            "--epsilon",
            "0.25",
            "--alpha",
            "0.3",
            "--samples",
            "50",
            "--k-max",
            "1000",
            "--format",
            "csv",
        ],
        &[
            "compare",
            "--function",
            "quad",
            "--x0",
            "1",
            "--alpha",
            "0.1",
            "--steps",
            "10",
            "--h",
            "0.01",
        ],
    ];
    for (i, args) in flag_runs.iter().enumerate() {
        let cfg = nsdyn_cli::parse_config(args.iter().copied(), None).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let path = dir.path().join(format!("run{i}.json"));
        fs::write(&path, text).unwrap();

        let by_flags = invoke(args);
        let by_config = invoke(&["--config", path.to_str().unwrap()]);
        assert_eq!(by_flags.code, EXIT_OK, "{}", by_flags.stderr);
        assert_eq!(by_config.code, EXIT_OK, "{}", by_config.stderr);
        assert_eq!(by_flags.stdout, by_config.stdout, "{args:?}");
    }
}

#[test]
fn explicit_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("base.json");
    fs::write(
        &path,
        r#"{"command":"simulate","function":"quad","x0":[1.0],"alpha":0.5,"steps":2}"#,
    )
    .unwrap();
    let merged = invoke(&["--config", path.to_str().unwrap(), "--alpha", "0.1"]);
    let direct = invoke(&[
        "simulate",
        "--function",
        "quad",
        "--x0",
        "1",
        "--alpha",
        "0.1",
        "--steps",
        "2",
    ]);
    assert_eq!(merged.stdout, direct.stdout);
}

#[test]
fn seed_variable_overrides_flag() {
    let base = [
        "simulate",
        "--function",
        "abs_sum",
        "--x0",
        "0,0",
        "--alpha",
        "0.1",
        "--steps",
        "40",
        "--policy",
        "random_extreme",
    ];
    let with = |extra: &[&str], env: Option<&str>| {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        invoke_env(&args, env).stdout
    };
    let seed2 = with(&["--seed", "2"], None);
    assert_eq!(with(&["--seed", "1"], Some("2")), seed2);
    assert_ne!(with(&["--seed", "1"], None), seed2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_nsdyn");
    let ok = Command::new(bin)
        .arg("list-functions")
        .env_remove("NSDYN_SEED")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let usage = Command::new(bin)
        .args(["simulate", "--x0", "1"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
    assert!(!usage.stderr.is_empty());
    let diverged = Command::new(bin)
        .args([
            "simulate",
            "--function",
            "neg_norm",
            "--x0",
            "1",
            "--alpha",
            "6e99",
            "--steps",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(diverged.status.code(), Some(EXIT_DIVERGED));
}

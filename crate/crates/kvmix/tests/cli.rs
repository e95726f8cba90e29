//! Black-box tests of the `kvmix` binary: exit codes, diagnostics, and the
//! artifact chain the subcommands exchange.

use std::path::Path;
use std::process::{Command, Output};

fn kvmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvmix"))
        .args(args)
        .output()
        .expect("spawn kvmix binary")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[track_caller]
fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        stdout_of(out),
        stderr_of(out)
    );
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec![],                                  // no subcommand
        vec!["frobnicate"],                      // unknown subcommand
        vec!["synth", "--out", "/tmp/x"],        // missing required --seed
        vec!["search", "--profile", "p", "--groups", "g", "--out", "s"], // missing --seed
        vec!["profile", "--trace", "t.json", "--out", "p.json", "--preset", "bogus"],
    ] {
        let out = kvmix(&args);
        assert_exit(&out, 2);
    }
}

#[test]
fn missing_input_fails_with_stage_and_path() {
    let out = kvmix(&["profile", "--trace", "/nonexistent/manifest.json", "--out", "/tmp/p.json"]);
    assert_exit(&out, 1);
    let err = stderr_of(&out);
    assert!(
        err.contains("error: stage profile failed on /nonexistent/manifest.json"),
        "stderr was: {err}"
    );
}

#[test]
fn incomplete_profile_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let trace_dir = dir.path().join("trace");
    let profile = dir.path().join("profile.json");

    let out = kvmix(&[
        "synth", "--seed", "3", "--layers", "2", "--prompts", "1", "--prefill", "32",
        "--decode", "4", "--out", path_str(&trace_dir),
    ]);
    assert_exit(&out, 0);
    let out = kvmix(&[
        "profile", "--trace", path_str(&trace_dir.join("manifest.json")),
        "--pairs", "KV8,KV4,KV2", "--out", path_str(&profile),
    ]);
    assert_exit(&out, 0);

    // Drop one pair from layer 1's table; pruning must reject the ragged
    // profile instead of comparing layers over different candidate sets.
    let text = std::fs::read_to_string(&profile).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let entries = doc[1]["entries"].as_array_mut().unwrap();
    entries.pop();
    std::fs::write(&profile, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let out = kvmix(&["prune", "--profile", path_str(&profile), "--out", path_str(&dir.path().join("c.json"))]);
    assert_exit(&out, 1);
    let err = stderr_of(&out);
    assert!(err.contains("incomplete profile: layer 1 is missing"), "stderr was: {err}");
}

#[test]
fn fm_prints_mean_equivalent_bits() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "model_name": "demo",
            "quant_method": "kivi",
            "equivalent_bits": 6.0,
            "layers": [
                {"layer": 0, "key_bits": 8, "value_bits": 4},
                {"layer": 1, "key_bits": 8, "value_bits": 4}
            ]
        }"#,
    )
    .unwrap();

    let out = kvmix(&["fm", path_str(&config)]);
    assert_exit(&out, 0);
    assert_eq!(stdout_of(&out), "6.00\n");

    let missing = kvmix(&["fm", path_str(&dir.path().join("nope.json"))]);
    assert_exit(&missing, 1);
}

#[test]
fn subcommands_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let trace_dir = dir.path().join("trace");
    let profile = dir.path().join("profile.json");
    let candidates = dir.path().join("candidates.json");
    let groups = dir.path().join("groups.json");
    let csv = dir.path().join("profile.csv");
    let search_a = dir.path().join("search-a");
    let search_b = dir.path().join("search-b");

    let out = kvmix(&[
        "synth", "--seed", "11", "--layers", "4", "--prompts", "2", "--prefill", "64",
        "--decode", "8", "--out", path_str(&trace_dir),
    ]);
    assert_exit(&out, 0);
    let manifest = trace_dir.join("manifest.json");
    assert!(manifest.is_file());

    let out = kvmix(&[
        "profile", "--trace", path_str(&manifest), "--preset", "kivi",
        "--jobs", "2", "--out", path_str(&profile),
    ]);
    assert_exit(&out, 0);

    let out = kvmix(&["prune", "--profile", path_str(&profile), "--out", path_str(&candidates)]);
    assert_exit(&out, 0);

    let out = kvmix(&[
        "cluster", "--profile", path_str(&profile), "--eps", "0.5", "--out", path_str(&groups),
    ]);
    assert_exit(&out, 0);

    let out = kvmix(&["export", "--profile", path_str(&profile), "--out", path_str(&csv)]);
    assert_exit(&out, 0);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("layer,B_k,B_v,e_k,e_v,e_a,e_o\n"));

    // The same search twice: artifacts must match byte for byte.
    for search in [&search_a, &search_b] {
        let out = kvmix(&[
            "search", "--profile", path_str(&profile), "--groups", path_str(&groups),
            "--strategy", "exhaustive", "--seed", "9", "--beta", "0.1",
            "--out", path_str(search),
        ]);
        assert_exit(&out, 0);
    }
    for name in ["frontier.csv", "search.json", "config_000.json"] {
        let a = std::fs::read(search_a.join(name)).unwrap();
        let b = std::fs::read(search_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let out = kvmix(&["report", path_str(&search_a)]);
    assert_exit(&out, 0);
    let text = stdout_of(&out);
    assert!(text.contains("Pareto points"), "report was: {text}");
    assert!(text.contains("f_m,f_a,accuracy,config_path"), "report was: {text}");

    // Every config the search wrote satisfies fm, and the manifest recorded
    // each stage that ran in this directory.
    let out = kvmix(&["fm", path_str(&search_a.join("config_000.json"))]);
    assert_exit(&out, 0);

    // Each output directory carries a pipeline manifest naming the stages
    // that wrote into it.
    let top = std::fs::read_to_string(dir.path().join("pipeline.json")).unwrap();
    for stage in ["profile", "prune", "cluster", "export"] {
        assert!(top.contains(&format!("\"stage\": \"{stage}\"")), "missing {stage}: {top}");
    }
    let trace_manifest = std::fs::read_to_string(trace_dir.join("pipeline.json")).unwrap();
    assert!(trace_manifest.contains("\"stage\": \"synth\""));
    let search_manifest = std::fs::read_to_string(search_a.join("pipeline.json")).unwrap();
    assert!(search_manifest.contains("\"stage\": \"search\""));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"schema_version = 1
output_dir = "tiny"

[[experiment]]
name = "pear"
crop = "pear_field"
variants = ["seg_min", "seg_zeros"]
seeds = [1]

[experiment.world]
track_length = 1.0
"#;

fn segmin(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmin"))
        .args(args)
        .env("SEGMIN_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn write_spec(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("spec.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), TINY);
    let out = segmin(&["run", spec.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = tmp.path().join("tiny");
    for id in ["pear__seg_min__seed1", "pear__seg_zeros__seed1"] {
        for file in ["config.toml", "log.csv", "metrics.json"] {
            assert!(dir.join("episodes").join(id).join(file).is_file(), "{id}/{file}");
        }
    }
    let first = fs::read(dir.join("summary.csv")).unwrap();
    let header = String::from_utf8(first.clone()).unwrap();
    assert!(header.starts_with("world,method,"), "{header}");
    assert_eq!(header.lines().count(), 3);

    let out = segmin(&["run", spec.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(first, fs::read(dir.join("summary.csv")).unwrap());
}

#[test]
fn schema_errors_exit_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    for (bad, line) in [
        (TINY.replace(r#"["seg_min", "seg_zeros"]"#, "[]"), "line 7"),
        (TINY.replace("seeds = [1]", "seeds = [1]\nspeed = 3"), "line 9"),
        (TINY.replace("[1]", "[2, 2]"), "line 8"),
    ] {
        let spec = write_spec(tmp.path(), &bad);
        let out = segmin(&["run", spec.to_str().unwrap()], tmp.path());
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{stderr}");
        assert!(stderr.contains(line), "{stderr}");
    }
    let out = segmin(&["run", "/nonexistent/spec.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unfinished_episodes_exit_1_and_keep_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("track_length = 1.0", "track_length = 1.0\n\n[experiment.episode]\nmax_duration_s = 0.5");
    let spec = write_spec(tmp.path(), &text);
    let out = segmin(&["run", spec.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let metrics = fs::read_to_string(tmp.path().join("tiny/episodes/pear__seg_min__seed1/metrics.json")).unwrap();
    assert!(metrics.contains("timed_out"), "{metrics}");
    assert!(tmp.path().join("tiny/summary.csv").is_file());
}

#[test]
fn debug_frames_replay_through_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &TINY.replace(r#", "seg_zeros""#, ""));
    let out = segmin(&["run", spec.to_str().unwrap(), "--debug-frames"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let frames = tmp.path().join("tiny/episodes/pear__seg_min__seed1/frames");
    assert!(fs::read_dir(&frames).unwrap().count() > 3);
    let out = segmin(&["oracle", frames.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_accepts_shipped_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = segmin(&["oracle", fixtures().to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 fixtures"));
}

#[test]
fn oracle_rejects_empty_and_corrupt_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(segmin(&["oracle", empty.to_str().unwrap()], tmp.path()).status.code(), Some(2));

    let corrupt = tmp.path().join("corrupt");
    fs::create_dir(&corrupt).unwrap();
    for entry in fs::read_dir(fixtures()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), corrupt.join(entry.file_name())).unwrap();
    }
    let victim = corrupt.join("pergola.mask.1.pgm");
    let mut bytes = fs::read(&victim).unwrap();
    bytes.truncate(bytes.len() / 2);
    fs::write(&victim, bytes).unwrap();
    let out = segmin(&["oracle", corrupt.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pergola.mask.1.pgm"));
}

#[test]
fn bench_prints_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = segmin(&["bench", "--frames", "10"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(stdout.as_bytes());
    let stages: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(stages, ["render", "perceive", "control"]);
    assert_eq!(segmin(&["bench", "--frames", "0"], tmp.path()).status.code(), Some(2));
}

#[test]
fn gen_world_is_deterministic_json() {
    let tmp = tempfile::tempdir().unwrap();
    let a = segmin(&["gen-world", "high_trees_field", "--seed", "4"], tmp.path());
    let b = segmin(&["gen-world", "high_trees_field", "--seed", "4"], tmp.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let world: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(world["plants"].as_array().is_some_and(|p| !p.is_empty()));
    let bad = segmin(&["gen-world", "potato_field", "--seed", "4"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

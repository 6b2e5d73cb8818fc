use std::path::{Path, PathBuf};

use battbayes_cli::{run, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").canonicalize().unwrap()
}

/// Small run config writing into `dir`, with every input taken from the
/// bundled data directory.
fn write_config(dir: &Path) -> PathBuf {
    let data = data_dir();
    let text = format!(
        r#"
training_data = "{data}/synthetic_cycling.csv"
out = "{out}"
seed = 7

[sampler]
iterations = 600
burn_in = 0.2

[split]
ratio = 0.85
mode = "random"

[estimate]
name = "reference"
schedule = "{data}/schedules/reference.toml"
days = 30
temperature_c = 25.0

[[scenario.cases]]
name = "gentle"
schedule = "{data}/schedules/gentle.toml"
days = 30
temperature_c = 25.0

[[scenario.cases]]
name = "cool"
schedule = "{data}/schedules/moderate.toml"
days = 30
temperature_file = "{data}/climate/cool.csv"
"#,
        data = data.display(),
        out = dir.join("out").display(),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn call(args: &[&str], env_seed: Option<&str>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("battbayes").chain(args.iter().copied());
    let code = run(argv, env_seed, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = call(&["--help"], None);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("train"));
    assert!(out.contains("scenario"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(call(&["train", "--bogus"], None).0, EXIT_USAGE);
    assert_eq!(call(&["train"], None).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"], None).0, EXIT_USAGE);
    assert_eq!(call(&["train", "--config", "x.toml", "--split-mode", "shuffled"], None).0, EXIT_USAGE);
}

#[test]
fn missing_config_is_a_domain_error() {
    let (code, _, err) = call(&["train", "--config", "/nonexistent/config.toml"], None);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.starts_with("error:"));
}

#[test]
fn test_before_train_names_the_missing_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let (code, _, err) = call(&["test", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("battbayes train"), "{err}");
}

#[test]
fn malformed_seed_variable_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("seed = 7", "");
    std::fs::write(&cfg, text).unwrap();
    let (code, _, err) = call(&["train", "--config", cfg.to_str().unwrap()], Some("not-a-number"));
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("not-a-number"), "{err}");
}

#[test]
fn invalid_override_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let (code, _, _) = call(&["train", "--config", cfg.to_str().unwrap(), "--split", "1.5"], None);
    assert_eq!(code, EXIT_DOMAIN);
}

#[test]
fn full_pipeline_runs_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let cfg = cfg.to_str().unwrap();

    let (code, out, err) = call(&["train", "--config", cfg], None);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("alpha"));
    assert!(out.contains("training fit"));

    let (code, out, err) = call(&["test", "--config", cfg], None);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("R2"));

    let (code, out, err) = call(&["estimate", "--config", cfg], None);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("reference"));

    let (code, out, err) = call(&["scenario", "--config", cfg], None);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("gentle") && out.contains("cool"));

    let written: Vec<_> = walk(&dir.path().join("out"));
    assert!(written.iter().any(|p| p.ends_with("summary.csv")), "{written:?}");
    assert!(written.iter().any(|p| p.to_string_lossy().contains("estimate")));
    assert!(written.iter().any(|p| p.to_string_lossy().contains("scenario")));
}

#[test]
fn training_is_byte_identical_for_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path());
        let (code, _, err) = call(&["train", "--config", cfg.to_str().unwrap(), "--iterations", "300"], None);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    // run.toml echoes the output directory, which necessarily differs
    let strip = |d: &Path| {
        let out = d.join("out");
        snapshot(&out)
            .into_iter()
            .map(|(p, bytes)| {
                let text = String::from_utf8_lossy(&bytes).replace(&out.display().to_string(), "OUT");
                (p, text.into_bytes())
            })
            .collect::<Vec<_>>()
    };
    assert!(strip(a.path()) == strip(b.path()), "outputs differ between identical runs");
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    files
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect()
}

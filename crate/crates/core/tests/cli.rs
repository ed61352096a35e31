use std::path::Path;
use std::process::{Command, Output};

fn tdschedule(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdschedule"))
        .args(args)
        .env("TDSCHEDULE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let o = tdschedule(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for cmd in ["run", "solve", "check", "gen"] {
        assert!(text.contains(cmd), "{text}");
    }
    let o = tdschedule(&["solve", "--help"]);
    for flag in ["--env", "--seed", "--schedule", "--mode", "--eta", "--out"] {
        assert!(stdout(&o).contains(flag));
    }
}

#[test]
fn generated_env_solves_like_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("chain.toml");
    let env_arg = env_path.to_str().unwrap();
    let o = tdschedule(&["gen", "--env", "random_chain", "--out", env_arg]);
    assert!(o.status.success(), "{}", stderr(&o));

    let json_path = dir.path().join("solve.json");
    let args = [
        "--schedule",
        "equal_weights(2,4)",
        "--mode",
        "off",
        "--eta",
        "1",
    ];
    let from_file = tdschedule(
        &[
            &["solve", "--env", env_arg][..],
            &args,
            &["--out", json_path.to_str().unwrap()],
        ]
        .concat(),
    );
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    let builtin = tdschedule(&[&["solve", "--env", "random_chain"][..], &args].concat());
    let strip = |s: String| {
        s.lines()
            .filter(|l| !l.starts_with("env:") && !l.starts_with("wrote"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(stdout(&from_file)), strip(stdout(&builtin)));
    assert!(stdout(&builtin).contains("A negative definite: yes"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["mode"], "off");
    assert_eq!(report["A"].as_array().unwrap().len(), 15);
    assert_eq!(report["gtd"]["certified"], true);
}

#[test]
fn check_reports_baird_structure() {
    let o = tdschedule(&[
        "check",
        "--env",
        "baird",
        "--schedule",
        "equal_weights(4,6)",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let off = &text[text.find("[off-policy").unwrap()..];
    assert!(off.contains("  A negative definite: no"));
    assert!(off.contains("  C positive definite: no"));
    assert!(off.contains("rank 7"));
    assert!(off.contains("    C positive definite: yes"));
    assert!(off.contains("    G(eta = 1) negative definite: yes"));
    assert!(text.contains("invariants: ok"));
}

#[test]
fn missing_config_names_the_path() {
    let o = tdschedule(&["run", "--config", "no/such/config.toml"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("no/such/config.toml"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn bad_arguments_fail() {
    assert!(!tdschedule(&["solve", "--env", "random_chain"])
        .status
        .success());
    assert!(
        !tdschedule(&["solve", "--env", "random_chain", "--schedule", "[2]"])
            .status
            .success()
    );
    assert!(
        !tdschedule(&["solve", "--env", "nowhere", "--schedule", "[0.5]"])
            .status
            .success()
    );
    assert!(!tdschedule(&[
        "solve",
        "--env",
        "baird",
        "--schedule",
        "[0.5]",
        "--mode",
        "sideways"
    ])
    .status
    .success());
}

fn write_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        format!(
            "env = \"random_chain\"\nlearner = \"tdc_schedule\"\nschedule = \"equal_weights(2,4)\"\n\
             alpha = 0.005\nbeta = 0.05\nsteps = 2000\nruns = 4\nseed = 3\neval_every = 100\n\
             metrics = [\"rmse\", \"rmspbe\", \"theta_norm\"]\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tdc.csv");
    let config = write_config(dir.path(), &out);
    let o = tdschedule(&["run", "--config", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read(&out).unwrap();
    let first_agg = std::fs::read(dir.path().join("tdc_aggregate.csv")).unwrap();

    let serial = Command::new(env!("CARGO_BIN_EXE_tdschedule"))
        .args(["run", "--config", config.to_str().unwrap()])
        .env("TDSCHEDULE_THREADS", "0")
        .output()
        .unwrap();
    assert!(serial.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
    assert_eq!(
        std::fs::read(dir.path().join("tdc_aggregate.csv")).unwrap(),
        first_agg
    );

    let text = String::from_utf8(first).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "step,run,rmse,rmspbe,theta_norm"
    );
    assert_eq!(text.lines().count(), 1 + 4 * 21);
}

use std::process::{Command, Output};

use streamforge_cli::CSV_COLUMNS;

fn bench(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bench"));
    cmd.args(args).env_remove("STREAMFORGE_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("bench runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn csv_to_stdout() {
    let o = bench(&["--kernel", "mod2as,mod2f", "--backend", "interp,native", "--sizes", "16,32", "--reps", "3"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == CSV_COLUMNS.len()));
    assert_eq!(rows[0][..4], ["mod2as", "csr", "interp", "f64"]);
    assert_eq!(rows[7][..4], ["mod2f", "radix2", "native", "f64"]);
}

#[test]
fn csv_to_file_and_table() {
    let dir = std::env::temp_dir().join(format!("streamforge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    let o = bench(&["--kernel", "mod2am-vec4", "--backend", "parallel", "--sizes", "8", "--reps", "3", "--precision", "f32", "--out", path.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("mod2am,vec4,parallel,f32,8,8,8,,,3,"));
    std::fs::remove_dir_all(&dir).unwrap();

    let o = bench(&["--kernel", "mod2f", "--backend", "native", "--sizes", "8", "--table"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().next().unwrap().split_whitespace().eq(CSV_COLUMNS));
}

#[test]
fn same_seed_same_checksum() {
    let args = ["--kernel", "mod2am-blocked", "--backend", "interp", "--sizes", "40", "--reps", "3", "--seed", "9"];
    let checksum = |o: Output| stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    assert_eq!(checksum(bench(&args, &[])), checksum(bench(&args, &[])));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["--sizes", ""][..],
        &["--kernel", "mod9"],
        &["--backend", "gpu"],
        &["--kernel", "mod2f", "--sizes", "12"],
        &["--kernel", "mod2f", "--sizes", "8", "--reps", "2"],
        &["--kernel", "mod2as", "--sizes", "8", "--density", "1.5"],
        &["--precision", "f16"],
        &["--csv", "--table"],
    ] {
        let o = bench(args, &[]);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn injected_fault_exits_3_without_records() {
    let o = bench(&["--kernel", "mod2as", "--backend", "parallel", "--sizes", "64", "--inject-fault"], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("differs from the reference"));
}

#[test]
fn workers_from_environment() {
    let args = ["--kernel", "mod2f", "--backend", "parallel", "--sizes", "8", "--reps", "3"];
    assert_eq!(bench(&args, &[("STREAMFORGE_WORKERS", "3")]).status.code(), Some(0));
    assert_eq!(bench(&args, &[("STREAMFORGE_WORKERS", "0")]).status.code(), Some(2));
    assert_eq!(bench(&args, &[("STREAMFORGE_WORKERS", "many")]).status.code(), Some(2));
    let mut explicit = args.to_vec();
    explicit.extend(["--workers", "2"]);
    assert_eq!(bench(&explicit, &[("STREAMFORGE_WORKERS", "0")]).status.code(), Some(0));
}

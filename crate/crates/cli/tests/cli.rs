use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accuracytrader"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "`{}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn cf_states(root: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = root.join("data");
    let states = root.join("states");
    ok(&[
        "generate",
        "--workload",
        "cf",
        "--points",
        "300",
        "--requests",
        "20",
        "--out",
        s(&data),
    ]);
    ok(&[
        "build-synopsis",
        "--data",
        s(&data),
        "--workload",
        "cf",
        "--components",
        "3",
        "--out",
        s(&states),
    ]);
    (data, states)
}

#[test]
fn cf_pipeline_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, states) = cf_states(tmp.path());
    for f in ["ratings.csv", "requests.csv", "test.csv"] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let summary = csv_rows(&states.join("synopses.csv"));
    assert_eq!(summary.len(), 3);
    assert_eq!(
        summary.iter().map(|r| r[1].parse::<usize>().unwrap()).sum::<usize>(),
        300
    );

    let sweep = tmp.path().join("sweep");
    ok(&["update-synopsis", "--data", s(&states), "--sweep", "--out", s(&sweep)]);
    let rows = csv_rows(&sweep.join("update_sweep.csv"));
    assert_eq!(rows.len(), 20, "ten percentages for additions and modifications");
    for r in &rows {
        let (recomputed, full): (usize, usize) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!(recomputed <= full, "{r:?}");
    }

    let rank = tmp.path().join("rank");
    let stdout = ok(&[
        "rank-effectiveness",
        "--data",
        s(&data),
        "--workload",
        "cf",
        "--components",
        "3",
        "--out",
        s(&rank),
    ]);
    assert!(stdout.contains("spearman"), "{stdout}");
    assert_eq!(csv_rows(&rank.join("effectiveness.csv")).len(), 10);
}

#[test]
fn change_file_updates_owner_and_smallest_component() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, states) = cf_states(tmp.path());
    let changes = tmp.path().join("changes.txt");
    fs::write(&changes, "modify\t4\t1:4.5 2:3\nadd\t9000\t1:2 3:4\nadd\t9001\t5:1\n").unwrap();
    let out = tmp.path().join("updated");
    ok(&[
        "update-synopsis",
        "--data",
        s(&states),
        "--changes",
        s(&changes),
        "--out",
        s(&out),
    ]);
    let rows = csv_rows(&out.join("update.csv"));
    let added: usize = rows.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    let modified: usize = rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!((added, modified), (2, 1));
    let points: usize = csv_rows(&out.join("synopses.csv"))
        .iter()
        .map(|r| r[1].parse::<usize>().unwrap())
        .sum();
    assert_eq!(points, 302);

    // The updated directory is itself a valid input.
    let again = tmp.path().join("again");
    fs::write(&changes, "modify\t9000\t1:5\n").unwrap();
    ok(&[
        "update-synopsis",
        "--data",
        s(&out),
        "--changes",
        s(&changes),
        "--out",
        s(&again),
    ]);
}

#[test]
fn search_bench_replays_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "generate",
        "--workload",
        "search",
        "--points",
        "400",
        "--requests",
        "20",
        "--out",
        s(&data),
    ]);
    let scenario = tmp.path().join("scenario.cfg");
    fs::write(
        &scenario,
        "requests = 200\nload_factors = 0.5, 2\nstrategies = basic, accuracytrader\n",
    )
    .unwrap();
    let out = tmp.path().join("bench");
    ok(&[
        "bench",
        "--scenario",
        s(&scenario),
        "--data",
        s(&data),
        "--workload",
        "search",
        "--components",
        "2",
        "--out",
        s(&out),
    ]);
    let summary = csv_rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|r| r[6] == "200"), "{summary:?}");
    let metrics = fs::read_to_string(out.join("metrics_run0.csv")).unwrap();
    assert!(metrics.starts_with("window_start_ms,"), "{metrics}");
}

#[test]
fn exit_codes_distinguish_usage_data_and_invariant_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["update-synopsis", "--data", "x", "--out", "y"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let missing = tmp.path().join("missing.cfg");
    assert_eq!(
        run(&["bench", "--scenario", s(&missing), "--out", s(tmp.path())])
            .status
            .code(),
        Some(3)
    );
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "components = zero\n").unwrap();
    assert_eq!(
        run(&["bench", "--scenario", s(&bad), "--out", s(tmp.path())])
            .status
            .code(),
        Some(3)
    );

    let (_, states) = cf_states(tmp.path());
    let changes = tmp.path().join("changes.txt");
    fs::write(&changes, "modify\t123456\t1:4\n").unwrap();
    let out = tmp.path().join("out");
    let unknown = run(&[
        "update-synopsis",
        "--data",
        s(&states),
        "--changes",
        s(&changes),
        "--out",
        s(&out),
    ]);
    assert_eq!(unknown.status.code(), Some(3));

    // A rating edited behind the synopsis' back leaves a stale aggregate.
    let subset = states.join("component-0").join("subset.txt");
    let text = fs::read_to_string(&subset).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    let flipped = if fields[2] == "5" { "1" } else { "5" };
    fields[2] = flipped;
    lines[1] = fields.join(",");
    fs::write(&subset, lines.join("\n") + "\n").unwrap();
    let stale = run(&["update-synopsis", "--data", s(&states), "--sweep", "--out", s(&out)]);
    assert_eq!(
        stale.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&stale.stderr)
    );
}

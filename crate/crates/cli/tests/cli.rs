use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocksched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(stdout: &str, name: &str) -> String {
    let prefix = format!("{name}: ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {name} in {stdout}"))
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn chain_schedule_with_min_coloring() {
    let out = stdout_ok(&["schedule", p(&data("chain6.json")), "--runner", "min-coloring"]);
    let expected = "\
runner: min-coloring
levels:
1 3 5
0 2 4
schedule:
6 5
1 0
1 2
3 2
3 4
5 4
block latency: 2
mean latency: 3/2 (1.5000)
p95 latency: 2
";
    assert_eq!(out, expected);
}

#[test]
fn chain_schedule_in_block_order() {
    let out = stdout_ok(&["schedule", p(&data("chain6.json")), "--runner", "order"]);
    let expected = "\
runner: order
schedule:
6 5
0 1
1 2
2 3
3 4
4 5
block latency: 6
mean latency: 7/2 (3.5000)
p95 latency: 6
";
    assert_eq!(out, expected);
}

#[test]
fn malformed_block_exits_2_with_line() {
    let out = run(&["schedule", p(&data("malformed.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_file_exits_2() {
    assert_eq!(run(&["schedule", "/nonexistent/block.json"]).status.code(), Some(2));
}

#[test]
fn conflicting_flags_are_rejected() {
    let chain = data("chain6.json");
    for args in [
        vec!["schedule", p(&chain), "--runner", "order", "--coloring", "exact"],
        vec![
            "schedule",
            p(&chain),
            "--runner",
            "min-coloring",
            "--coloring",
            "greedy",
        ],
        vec![
            "schedule",
            p(&chain),
            "--runner",
            "order",
            "--treat-epsilon-homogeneous",
            "2",
        ],
        vec!["schedule", p(&chain), "--runner", "nope"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn batch_runner_takes_a_coloring() {
    let out = stdout_ok(&[
        "schedule",
        p(&data("chain6.json")),
        "--runner",
        "batch",
        "--coloring",
        "greedy",
    ]);
    assert_eq!(field(&out, "block latency"), "2");
}

#[test]
fn dependent_pair_executes() {
    let out = stdout_ok(&["execute", p(&data("dependent.json"))]);
    let expected = "\
runner: min-coloring
results:
tx 0: reads - writes x=1
tx 1: reads x=1 writes y=2
final state:
x = 1
y = 2
state digest: f70f15511df105b3d7986f483ab85643d49cc3e5db5d4f592efff9e97be12d5d
";
    assert_eq!(out, expected);
}

#[test]
fn execute_applies_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    std::fs::write(&state, r#"{"x": 40, "z": 7}"#).unwrap();
    let out = stdout_ok(&["execute", p(&data("dependent.json")), "--state", p(&state)]);
    assert!(out.contains("y = 2\nz = 7\n"), "{out}");
}

#[test]
fn empty_block_has_no_results() {
    let out = stdout_ok(&["execute", p(&data("empty.json")), "--simulate"]);
    let expected = "\
runner: min-coloring
results:
final state:
state digest: e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855
makespan: 0
latency: 0
";
    assert_eq!(out, expected);
}

#[test]
fn simulated_makespan_matches_reported_latency() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.jsonl");
    stdout_ok(&["gen-stream", p(&data("specs.json")), "--out", p(&stream)]);
    let mut blocks = vec![data("chain6.json"), data("hetero7.json"), data("k3.json")];
    for (i, line) in std::fs::read_to_string(&stream).unwrap().lines().enumerate() {
        let path = dir.path().join(format!("b{i}.json"));
        std::fs::write(&path, line).unwrap();
        blocks.push(path);
    }
    for block in &blocks {
        for runner in ["order", "level-greedy", "min-coloring", "weighted", "auto", "batch"] {
            let sched = stdout_ok(&["schedule", p(block), "--runner", runner]);
            let exec = stdout_ok(&["execute", p(block), "--runner", runner, "--simulate"]);
            assert_eq!(
                field(&exec, "makespan"),
                field(&sched, "block latency"),
                "{block:?} {runner}"
            );
        }
    }
}

#[test]
fn trace_file_lists_every_transaction() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    stdout_ok(&["execute", p(&data("hetero7.json")), "--trace", p(&trace)]);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut ids: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..7).collect::<Vec<_>>());
}

#[test]
fn oracle_goldens() {
    let chain = stdout_ok(&["oracle", p(&data("chain6.json"))]);
    assert_eq!(field(&chain, "optimal latency"), "2");
    let k3 = stdout_ok(&["oracle", p(&data("k3.json"))]);
    assert_eq!(k3, "optimal latency: 3\nlevels:\n0\n1\n2\nschedule:\n3 2\n0 1\n1 2\n");
}

#[test]
fn oracle_modes_agree_on_heterogeneous_block() {
    let block = data("hetero7.json");
    let fast = stdout_ok(&["oracle", p(&block)]);
    let slow = stdout_ok(&["oracle", p(&block), "--orientations"]);
    assert_eq!(field(&fast, "optimal latency"), "1111");
    assert_eq!(field(&slow, "optimal latency"), "1111");
}

#[test]
fn oracle_over_cap_exits_3() {
    let out = run(&["oracle", p(&data("clique11.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(
        stdout_ok(&["oracle", p(&data("clique11.json")), "--cap", "11"])
            .lines()
            .next(),
        Some("optimal latency: 11")
    );
}

fn stream_file(dir: &Path) -> PathBuf {
    let stream = dir.join("stream.jsonl");
    stdout_ok(&["gen-stream", p(&data("specs.json")), "--out", p(&stream)]);
    stream
}

#[test]
fn asmr_graph_and_batch_runners_agree() {
    let dir = tempfile::tempdir().unwrap();
    let stream = stream_file(dir.path());
    let graph = stdout_ok(&["asmr", p(&stream), "--runner", "min-coloring"]);
    let batch = stdout_ok(&["asmr", p(&stream), "--runner", "batch"]);
    assert_eq!(field(&graph, "blocks processed"), "5");
    assert_eq!(field(&graph, "state digest"), field(&batch, "state digest"));
    let again = stdout_ok(&["asmr", p(&stream), "--runner", "min-coloring"]);
    assert_eq!(graph, again);
}

#[test]
fn asmr_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let stream = stream_file(dir.path());
    let full_ledger = dir.path().join("full.ledger");
    let full = stdout_ok(&["asmr", p(&stream), "--ledger", p(&full_ledger)]);

    let ledger = dir.path().join("split.ledger");
    let first = stdout_ok(&["asmr", p(&stream), "--ledger", p(&ledger), "--max-blocks", "2"]);
    assert_eq!(field(&first, "blocks processed"), "2");
    assert_eq!(
        run(&["asmr", p(&stream), "--ledger", p(&ledger)]).status.code(),
        Some(1)
    );
    let resumed = stdout_ok(&["asmr", p(&stream), "--ledger", p(&ledger), "--resume"]);
    assert_eq!(field(&resumed, "blocks replayed"), "2");
    assert_eq!(field(&resumed, "blocks processed"), "3");
    assert_eq!(field(&resumed, "state digest"), field(&full, "state digest"));
    assert_eq!(std::fs::read(&ledger).unwrap(), std::fs::read(&full_ledger).unwrap());
}

#[test]
fn asmr_empty_stream_keeps_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("empty.jsonl");
    std::fs::write(&stream, "").unwrap();
    let state = dir.path().join("state.json");
    std::fs::write(&state, r#"{"x": 40, "z": 7}"#).unwrap();
    let out = stdout_ok(&["asmr", p(&stream), "--state", p(&state)]);
    assert_eq!(field(&out, "blocks processed"), "0");
    let expected = stdout_ok(&["execute", p(&data("empty.json")), "--state", p(&state)]);
    assert_eq!(field(&out, "state digest"), field(&expected, "state digest"));
}

#[test]
fn asmr_rejects_broken_link() {
    let dir = tempfile::tempdir().unwrap();
    let stream = stream_file(dir.path());
    let text = std::fs::read_to_string(&stream).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(2);
    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, lines.join("\n")).unwrap();
    assert_eq!(run(&["asmr", p(&broken)]).status.code(), Some(2));
}

#[test]
fn analyze_p0_row_and_serial_parallel_identity() {
    let args = [
        "analyze",
        "--ns",
        "30,60",
        "--ps",
        "0,0.1",
        "--samples",
        "8",
        "--seed",
        "5",
    ];
    let parallel = stdout_ok(&args);
    let mut serial_args = args.to_vec();
    serial_args.push("--serial");
    assert_eq!(parallel, stdout_ok(&serial_args));
    let mut lines = parallel.lines();
    assert_eq!(lines.next(), Some("n,p,samples,mean_ratio,min_ratio,max_ratio,seed"));
    assert_eq!(lines.next(), Some("30,0,8,1.000000,1.000000,1.000000,5"));
    assert_eq!(parallel.lines().count(), 5);
}

#[test]
fn analyze_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ratios.csv");
    assert_eq!(
        stdout_ok(&[
            "analyze",
            "--ns",
            "20",
            "--ps",
            "0.2",
            "--samples",
            "3",
            "--out",
            p(&out)
        ]),
        ""
    );
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("n,p,samples"));
}

#[test]
fn analyze_rejects_bad_probability() {
    assert_eq!(run(&["analyze", "--ns", "20", "--ps", "1.5"]).status.code(), Some(2));
}

#[test]
fn gen_block_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"n_txs": 5, "lengths": {"kind": "homogeneous", "c": 3}, "seed": 9}"#,
    )
    .unwrap();
    let a = stdout_ok(&["gen-block", p(&spec)]);
    assert_eq!(a, stdout_ok(&["gen-block", p(&spec)]));
    assert_eq!(a.matches("\"length\": 3").count(), 5);
}

#[test]
fn search_reports_each_kind() {
    let out = stdout_ok(&["search", "--trials", "40", "--n-max", "6", "--homogeneous"]);
    assert!(out.starts_with("trials 40\n(a) none found\n"), "{out}");
}

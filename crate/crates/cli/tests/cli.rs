use std::path::Path;
use std::process::Command;

use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn blockgraph(args: &[&str], env: &[(&str, &str)]) -> Out {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blockgraph"));
    cmd.args(args).env_remove("ACG_THREADS").env_remove("ACG_BUFFER_MB");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let o = cmd.output().unwrap();
    Out {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = blockgraph(args, &[]);
    assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
    o.stdout
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Preprocesses `edges` (text) into `dir/img` and returns the image path.
fn image(dir: &Path, edges: &str, extra: &[&str]) -> String {
    let input = dir.join("edges.txt");
    std::fs::write(&input, edges).unwrap();
    let out = dir.join("img");
    let mut args = vec!["preprocess", "--input", p(&input), "--out", p(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out.to_str().unwrap().to_string()
}

/// Deterministic pseudo-random edge list.
fn random_edges(n: u64, m: usize, seed: u64) -> String {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x % n
    };
    (0..m).map(|_| format!("{} {}\n", next(), next())).collect()
}

#[test]
fn bfs_on_path() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), "0 1\n1 2\n", &["--symmetrize"]);
    let out = json(&ok(&["run", "bfs", "--image", &img, "--source", "0", "--threads", "2"]));
    assert_eq!(out["runs"][0]["result"], serde_json::json!([0, 1, 2]));
    assert_eq!(out["runs"][0]["summary"]["reached"], 3);
}

#[test]
fn unknown_algorithm_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), "0 1\n", &[]);
    let o = blockgraph(&["run", "sssp", "--image", &img], &[]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("sssp"));
    assert_eq!(blockgraph(&["frobnicate"], &[]).code, 2);
}

#[test]
fn missing_source_and_bad_flags_are_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), "0 1\n1 2\n", &["--symmetrize"]);
    assert_eq!(blockgraph(&["run", "bfs", "--image", &img], &[]).code, 2);
    assert_eq!(blockgraph(&["run", "bfs", "--image", &img, "--source", "7"], &[]).code, 2);
    assert_eq!(blockgraph(&["run", "wcc", "--image", &img, "--source", "0"], &[]).code, 2);
    let trace = d.path().join("t.bin");
    let o = blockgraph(&["run", "wcc", "--image", &img, "--trace-out", p(&trace)], &[]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    assert_eq!(blockgraph(&["run", "ppr", "--image", &img, "--source", "0", "--alpha", "1.5"], &[]).code, 2);
    let o = blockgraph(&["preprocess", "--input", p(&d.path().join("edges.txt")), "--out", p(d.path()), "--degree-threshold", "9"], &[]);
    assert_eq!(o.code, 2);
}

#[test]
fn io_failures_exit_3() {
    let d = tempfile::tempdir().unwrap();
    let o = blockgraph(&["preprocess", "--input", "/nonexistent/edges.txt", "--out", p(d.path())], &[]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("/nonexistent/edges.txt"));
    let o = blockgraph(&["run", "wcc", "--image", p(&d.path().join("nope"))], &[]);
    assert_eq!(o.code, 3);
    let o = blockgraph(&["simulate-cache", "--trace", p(&d.path().join("missing.bin")), "--capacity", "4"], &[]);
    assert_eq!(o.code, 3);
    std::fs::write(d.path().join("bad.txt"), "0 1 2\n").unwrap();
    let o = blockgraph(&["preprocess", "--input", p(&d.path().join("bad.txt")), "--out", p(&d.path().join("x"))], &[]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("line 1"));
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_rerun_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("edges.txt");
    std::fs::write(&input, random_edges(3000, 20_000, 5)).unwrap();
    for extra in [vec![], vec!["--partition-threads", "3", "--degree-threshold", "1"]] {
        let mut images = Vec::new();
        for name in ["a", "b"] {
            let out = d.path().join(name);
            let mut args = vec!["preprocess", "--input", p(&input), "--out", p(&out), "--symmetrize"];
            args.extend_from_slice(&extra);
            let summary = json(&ok(&args));
            assert!(summary["blocks"].as_u64().unwrap() > 0);
            images.push(dir_bytes(&out));
        }
        assert_eq!(images[0].len(), 7);
        assert!(images[0] == images[1], "rerun differs with {extra:?}");
    }
}

#[test]
fn tiny_graph_summary() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("edges.txt");
    std::fs::write(&input, "# comment\n0 1\n").unwrap();
    let s = json(&ok(&["preprocess", "--input", p(&input), "--out", p(&d.path().join("i"))]));
    assert_eq!(s["vertices"], 2);
    assert_eq!(s["blocks"], 0);
    assert_eq!(s["mini_fraction"], 1.0);
}

#[test]
fn sparse_input_ids_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), "10 20\n20 30\n", &["--symmetrize"]);
    let out = d.path().join("dist.txt");
    ok(&["run", "bfs", "--image", &img, "--source", "10", "--output", p(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "10 0\n20 1\n30 2\n");
    let r = json(&ok(&["run", "wcc", "--image", &img]));
    assert_eq!(r["runs"][0]["result"], serde_json::json!([10, 10, 10]));
}

/// Rounds of "every live local label minimum joins, then it and its
/// neighbours leave".
fn mis_round_oracle(n: usize, adj: &[Vec<usize>], labels: &[u32]) -> u64 {
    let mut live = vec![true; n];
    let mut rounds = 0;
    while live.iter().any(|&x| x) {
        rounds += 1;
        let picked: Vec<usize> = (0..n)
            .filter(|&v| live[v] && adj[v].iter().all(|&w| w == v || !live[w] || labels[w] > labels[v]))
            .collect();
        for v in picked {
            live[v] = false;
            for &w in &adj[v] {
                live[w] = false;
            }
        }
    }
    rounds
}

#[test]
fn sync_mis_logs_oracle_round_count() {
    let d = tempfile::tempdir().unwrap();
    let edges = random_edges(400, 1500, 9);
    let img = image(d.path(), &edges, &["--symmetrize"]);
    let r = json(&ok(&["run", "mis", "--image", &img, "--seed", "3", "--mode", "sync"]));
    let set: Vec<bool> = r["runs"][0]["result"].as_array().unwrap().iter().map(|v| v.as_bool().unwrap()).collect();
    let n = set.len();

    // Input ids are dense here only if every id in 0..400 occurs; map them.
    let mut ids: Vec<usize> = edges.split_whitespace().map(|t| t.parse().unwrap()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), n);
    let dense = |x: usize| ids.binary_search(&x).unwrap();
    let mut adj = vec![Vec::new(); n];
    for line in edges.lines() {
        let mut it = line.split_whitespace().map(|t| dense(t.parse().unwrap()));
        let (u, v) = (it.next().unwrap(), it.next().unwrap());
        adj[u].push(v);
        adj[v].push(u);
    }
    let labels = blockgraph::algorithms::mis_labels(n, 3);
    assert_eq!(r["runs"][0]["metrics"]["rounds"].as_u64().unwrap(), mis_round_oracle(n, &adj, &labels));
    for v in 0..n {
        let nb_in = adj[v].iter().any(|&w| w != v && set[w]);
        assert!(set[v] != nb_in, "vertex {v} breaks maximal independence");
    }
}

#[test]
fn single_thread_runs_are_bit_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), &random_edges(2000, 12_000, 2), &[]);
    let mut outputs = Vec::new();
    for name in ["a.bin", "b.bin"] {
        let out = d.path().join(name);
        let o = blockgraph(
            &["run", "pr", "--image", &img, "--output", p(&out), "--output-format", "binary"],
            &[("ACG_THREADS", "1"), ("ACG_BUFFER_MB", "0.05")],
        );
        assert_eq!(o.code, 0, "{}", o.stderr);
        let r = json(&o.stdout);
        assert_eq!(r["config"]["threads"], 1);
        assert_eq!(r["config"]["buffer_bytes"], 52428);
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0].len() % 8, 0);
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn random_sources_give_one_run_each() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), &random_edges(500, 3000, 4), &["--symmetrize"]);
    let out = d.path().join("ppr.txt");
    let r = json(&ok(&["run", "ppr", "--image", &img, "--random-sources", "3", "--seed", "1", "--output", p(&out)]));
    let runs = r["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for run in runs {
        let path = run["output"].as_str().unwrap();
        assert!(path.ends_with(&format!(".{}", run["source"])));
        let sum: f64 = std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.split(' ').nth(1).unwrap().parse::<f64>().unwrap())
            .sum();
        let residual = run["summary"]["residual_sum"].as_f64().unwrap();
        assert!((sum + residual - 1.0).abs() < 1e-9);
    }
    let again = json(&ok(&["run", "ppr", "--image", &img, "--random-sources", "3", "--seed", "1"]));
    let sources = |v: &Value| v["runs"].as_array().unwrap().iter().map(|r| r["source"].clone()).collect::<Vec<_>>();
    assert_eq!(sources(&r), sources(&again));
}

#[test]
fn trace_then_simulate_cache() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), &random_edges(5000, 30_000, 7), &["--symmetrize"]);
    let trace = d.path().join("trace.bin");
    let events = d.path().join("events.jsonl");
    ok(&[
        "run", "bfs", "--image", &img, "--source", "0", "--mode", "sync", "--trace-out", p(&trace), "--events-out", p(&events),
    ]);
    let lines = std::fs::read_to_string(&events).unwrap();
    assert!(lines.lines().count() > 0);
    for l in lines.lines() {
        let e = json(l);
        assert!(e.get("block").is_some() && e.get("from").is_some() && e.get("to").is_some(), "{l}");
    }
    let stats = json(&ok(&["stats", "--trace", p(&trace)]));
    assert!(stats["requests"].as_u64().unwrap() > 0);

    let csv = ok(&["simulate-cache", "--trace", p(&trace), "--capacity-sweep", "1:9:2", "--policy", "opt"]);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "policy,capacity,misses,bytes");
    assert_eq!(rows.len(), 1 + 5);
    let all = ok(&["simulate-cache", "--trace", p(&trace), "--capacity", "4", "--capacity", "8"]);
    assert_eq!(all.lines().count(), 1 + 2 * 3);
    let misses = |policy: &str, cap: &str| -> u64 {
        let row = all.lines().find(|l| l.starts_with(&format!("{policy},{cap},"))).unwrap();
        row.split(',').nth(2).unwrap().parse().unwrap()
    };
    for cap in ["4", "8"] {
        assert!(misses("OPT", cap) <= misses("LRU", cap));
        assert!(misses("OPT", cap) <= misses("SUB", cap));
    }
    assert_eq!(blockgraph(&["simulate-cache", "--trace", p(&trace)], &[]).code, 2);
}

#[test]
fn stats_and_human_output() {
    let d = tempfile::tempdir().unwrap();
    let img = image(d.path(), &random_edges(1000, 8000, 3), &["--symmetrize"]);
    let s = json(&ok(&["stats", "--image", &img]));
    assert_eq!(s["vertices"].as_u64().unwrap(), s["large_vertices"].as_u64().unwrap() + s["mini_vertices"].as_u64().unwrap());
    assert_eq!(s["theta"].as_array().unwrap().len(), 3);
    let text = ok(&["stats", "--image", &img, "--human"]);
    assert!(text.lines().any(|l| l.starts_with("blocks")));
    let text = ok(&["run", "kcore", "--image", &img, "--k", "3", "--human"]);
    assert!(text.contains("core_size") && text.contains("bytes_per_edge"));
    assert_eq!(blockgraph(&["stats"], &[]).code, 2);
}

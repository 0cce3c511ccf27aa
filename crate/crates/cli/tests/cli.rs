use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sol3graph"))
        .args(args)
        .env_remove("SOL3GRAPH_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_domain(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

/// Regular all-C polygon with `n` vertices, counterclockwise.
fn regular_polygon(n: usize) -> Value {
    let vertices: Vec<Value> = (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            json!({"x": t.cos(), "y": 3.0 + t.sin(), "ideal": false})
        })
        .collect();
    let arcs: Vec<Value> = (0..n)
        .map(|k| {
            json!({"kind": "C", "from": k, "to": (k + 1) % n, "geometry": {"type": "segment"},
                   "data": {"type": "constant", "value": 0.0}})
        })
        .collect();
    json!({"vertices": vertices, "arcs": arcs})
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", path_str(&fixture("triangle_c"))]);
    assert_eq!(code(&ok), 0);
    let bad = run(&["validate", path_str(&fixture("square_adjacent_a"))]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("adjacent A arcs"), "{}", stdout(&bad));
    assert_eq!(code(&run(&["validate", "/nonexistent/domain.json"])), 2);
}

#[test]
fn check_exit_codes() {
    let square = run(&["check", path_str(&fixture("square_ab"))]);
    assert_eq!(code(&square), 0);
    let verdict: Value = serde_json::from_str(&stdout(&square)).unwrap();
    assert_eq!(verdict["case"], "C-empty");
    assert_eq!(verdict["solvable"], true);

    let rect = run(&["check", path_str(&fixture("rectangle_bad"))]);
    assert_eq!(code(&rect), 1);
    let verdict: Value = serde_json::from_str(&stdout(&rect)).unwrap();
    assert_eq!(verdict["witness"]["vertices"], json!([0, 1, 2, 3]));

    let dir = TempDir::new().unwrap();
    let big = write_domain(dir.path(), "big.json", &regular_polygon(17));
    let guard = run(&["check", path_str(&big)]);
    assert_eq!(code(&guard), 2);
    assert!(String::from_utf8_lossy(&guard.stderr).contains("guard"));
    assert_eq!(code(&run(&["validate", path_str(&big)])), 0);
}

#[test]
fn solve_writes_solution_flux_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("zero");
    let res = run(&["solve", path_str(&fixture("triangle_c")), "--h", "0.1", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let sol: Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert!(sol["u"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap() == 0.0));
    assert!(fs::read_to_string(out.join("flux.csv")).unwrap().starts_with("arc_index,kind,length,flux,ratio\n"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["overrides"]["h"], 0.1);
    assert_eq!(manifest["outputs"], json!(["solution.json", "flux.csv"]));
    assert!(manifest["library_version"].is_string() && manifest["wall_time_s"].is_number());

    let mixed = run(&["solve", path_str(&fixture("square_ab")), "--out", path_str(&out)]);
    assert_eq!(code(&mixed), 1);
    assert!(stdout(&mixed).contains("use scherk"));
}

#[test]
fn solve_recovers_linear_data() {
    // u = 2x − 1 on the triangle (0,1), (2,1), (1,2); linear along every edge
    let mut doc = regular_polygon(3);
    doc["vertices"] = json!([
        {"x": 0.0, "y": 1.0, "ideal": false},
        {"x": 2.0, "y": 1.0, "ideal": false},
        {"x": 1.0, "y": 2.0, "ideal": false}
    ]);
    for (k, values) in [[-1.0, 3.0], [3.0, 1.0], [1.0, -1.0]].iter().enumerate() {
        doc["arcs"][k]["data"] = json!({"type": "samples", "values": values});
    }
    let dir = TempDir::new().unwrap();
    let input = write_domain(dir.path(), "linear.json", &doc);
    let out = dir.path().join("out");
    let res = run(&["solve", path_str(&input), "--h", "0.05", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let sol: Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    let nodes = sol["nodes"].as_array().unwrap();
    let u = sol["u"].as_array().unwrap();
    let worst = nodes
        .iter()
        .zip(u)
        .map(|(p, v)| (v.as_f64().unwrap() - (2.0 * p[0].as_f64().unwrap() - 1.0)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn export_obj() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&run(&["solve", path_str(&fixture("triangle_c")), "--h", "0.1", "--out", path_str(&out)])), 0);
    let solution = out.join("solution.json");
    let obj_dir = dir.path().join("obj");
    let res = run(&["export", path_str(&solution), "--format", "obj", "--out", path_str(&obj_dir)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let obj = fs::read_to_string(obj_dir.join("solution.obj")).unwrap();
    let sol: Value = serde_json::from_str(&fs::read_to_string(&solution).unwrap()).unwrap();
    let v_lines: Vec<&str> = obj.lines().filter(|l| l.starts_with("v ")).collect();
    assert_eq!(v_lines.len(), sol["nodes"].as_array().unwrap().len());
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), sol["triangles"].as_array().unwrap().len());
    assert!(v_lines.iter().all(|l| l.ends_with(" 0.0000000")));
    let manifest = fs::read_to_string(obj_dir.join("export.manifest.json")).unwrap();
    assert!(manifest.contains("not an isometric embedding"));

    // re-export is byte-identical
    let again = dir.path().join("obj2");
    assert_eq!(code(&run(&["export", path_str(&solution), "--out", path_str(&again)])), 0);
    assert_eq!(obj, fs::read_to_string(again.join("solution.obj")).unwrap());

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"nodes\": [").unwrap();
    assert_eq!(code(&run(&["export", path_str(&broken), "--out", path_str(&again)])), 2);
    assert_eq!(code(&run(&["export", path_str(&solution), "--format", "ply", "--out", path_str(&again)])), 2);
}

#[test]
fn scherk_outputs_and_replay() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let res = Command::new(env!("CARGO_BIN_EXE_sol3graph"))
        .args(["scherk", path_str(&fixture("scherk_triangle")), "--h", "0.1", "--out", path_str(&out)])
        .env("SOL3GRAPH_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("scherk.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 3);
    let outputs: Vec<String> =
        manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    for k in 0..7 {
        assert!(outputs.contains(&format!("solution_cap{k:02}.json")));
        assert!(outputs.contains(&format!("flux_cap{k:02}.csv")));
    }
    let seq: Value = serde_json::from_str(&fs::read_to_string(out.join("sequence.json")).unwrap()).unwrap();
    assert_eq!(seq["case"], "C-nonempty");
    assert_eq!(seq["caps"], json!([1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]));
    assert_eq!(seq["counts"]["divergent_plus"], 0);
    let div: Value = serde_json::from_str(&fs::read_to_string(out.join("divergence.json")).unwrap()).unwrap();
    assert_eq!(div["components"], json!([]));

    let replayed = dir.path().join("replay");
    let res = run(&["replay", path_str(&out.join("scherk.manifest.json")), "--out", path_str(&replayed)]);
    assert_eq!(code(&res), 0, "{}\n{}", stdout(&res), String::from_utf8_lossy(&res.stderr));
    for name in &outputs {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(replayed.join(name)).unwrap(), "{name}");
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(replayed.join("scherk.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 1);
    // replaying into the recorded directory is refused
    assert_eq!(code(&run(&["replay", path_str(&out.join("scherk.manifest.json")), "--out", path_str(&out)])), 2);
}

#[test]
fn scherk_negative_result_and_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rect");
    let res = run(&["scherk", path_str(&fixture("rectangle_bad")), "--h", "0.1", "--caps", "1,2,4,8,16", "--out", path_str(&out)]);
    assert_eq!(code(&res), 1, "{}", String::from_utf8_lossy(&res.stderr));
    let bad_caps = run(&["scherk", path_str(&fixture("scherk_triangle")), "--caps", "4,2", "--out", path_str(&out)]);
    assert_eq!(code(&bad_caps), 2);
    assert_eq!(code(&run(&["solve", path_str(&fixture("triangle_c")), "--threads", "0", "--out", path_str(&out)])), 2);
}

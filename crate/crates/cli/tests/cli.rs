//! End-to-end runs of the `semalign` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semalign::coupling::Coupling;
use semalign::semantic::semantic_cost;
use semalign::transport::{exact_assignment, DEFAULT_EXACT_CAP};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/uci").join(name)
}

fn semalign(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semalign"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = semalign(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    read_rows(path).1.iter().map(|r| r.iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn iris() -> String {
    data("iris.csv").display().to_string()
}

#[test]
fn rotate_split_keeps_rows_and_renames_features() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["split", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--seed", "1"]);
    let (ha, ra) = read_rows(&dir.path().join("out/A.csv"));
    let (hb, rb) = read_rows(&dir.path().join("out/B.csv"));
    assert_eq!((ra.len(), rb.len()), (150, 150));
    assert_eq!(ha, ["sepal_length", "sepal_width", "petal_length", "petal_width", "label"]);
    assert_eq!(hb, ["rot_0", "rot_1", "rot_2", "rot_3", "label"]);
    let c = Coupling::read_csv(&dir.path().join("out/correspondence.csv")).unwrap();
    assert_eq!(c.len(), 150);
    let manifest = fs::read_to_string(dir.path().join("out/split.toml")).unwrap();
    assert!(manifest.contains("kind = \"rotate\""), "{manifest}");
}

#[test]
fn add_noise_split_appends_ten_noise_columns_per_feature() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["split", "--data", &iris(), "--label-column", "class", "--split", "add_noise", "--seed", "0"]);
    let (hb, _) = read_rows(&dir.path().join("out/B.csv"));
    assert_eq!(hb.len(), 4 + 40 + 1);
    assert_eq!(hb.iter().filter(|h| h.starts_with("noise_")).count(), 40);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for out in ["one", "two"] {
        ok(
            dir.path(),
            &["pipeline", "--data", &iris(), "--label-column", "class", "--split", "distort", "--seed", "4", "--out-dir", out],
        );
    }
    for file in ["coupling.csv", "joint_affinity.csv", "samples.csv", "embedding.csv", "metrics.csv", "embedding_domain.svg"] {
        let a = fs::read(dir.path().join("one").join(file)).unwrap();
        let b = fs::read(dir.path().join("two").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn unequal_domains_need_the_subsample_flag() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["split", "--data", &iris(), "--label-column", "class", "--split", "random", "--seed", "2"]);
    // drop every fifth target row; rows are grouped by class, so all classes survive
    let b = dir.path().join("out/B.csv");
    let text = fs::read_to_string(&b).unwrap();
    let short: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i == 0 || i % 5 != 0).map(|(_, l)| l).collect();
    fs::write(dir.path().join("B_short.csv"), short.join("\n") + "\n").unwrap();
    let args = ["align", "--source", "out/A.csv", "--target", "B_short.csv", "--seed", "2", "--out-dir", "short"];
    let out = semalign(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--subsample"));

    let mut with_flag = args.to_vec();
    with_flag.push("--subsample");
    ok(dir.path(), &with_flag);
    let c = Coupling::read_csv(&dir.path().join("short/coupling.csv")).unwrap();
    assert_eq!(c.len(), 120);
    let (_, samples) = read_rows(&dir.path().join("short/samples.csv"));
    assert_eq!(samples.len(), 240);
}

#[test]
fn exact_flag_reaches_the_assignment_optimum() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["split", "--data", &iris(), "--label-column", "class", "--split", "distort", "--seed", "3"]);
    ok(dir.path(), &["align", "--exact", "--dump-affinities", "--seed", "3"]);
    let pa = read_matrix(&dir.path().join("out/profiles_A.csv"));
    let pb = read_matrix(&dir.path().join("out/profiles_B.csv"));
    let cost = |i: usize, j: usize| {
        semantic_cost(ndarray::ArrayView1::from(&pa[i][..]), ndarray::ArrayView1::from(&pb[j][..]))
    };
    let best = exact_assignment(pa.len(), cost, DEFAULT_EXACT_CAP).unwrap();
    let got = Coupling::read_csv(&dir.path().join("out/coupling.csv")).unwrap();
    let got_cost: f64 = got.forward().iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    assert!((got_cost - best.objective).abs() <= 1e-9 * best.objective.max(1.0), "{got_cost} vs {}", best.objective);
}

#[test]
fn self_alignment_with_a_shared_forest_fixes_almost_every_sample() {
    let dir = TempDir::new().unwrap();
    let iris = iris();
    fs::write(
        dir.path().join("self.toml"),
        format!(
            "seed = 0\nshared_forest_seed = true\nmask_fraction = 0.0\n\
             [input]\nsource = \"{iris}\"\ntarget = \"{iris}\"\nlabel_column = \"class\"\n"
        ),
    )
    .unwrap();
    ok(dir.path(), &["align", "--config", "self.toml"]);
    let c = Coupling::read_csv(&dir.path().join("out/coupling.csv")).unwrap();
    assert!(c.fixed_points() as f64 >= 0.95 * 150.0, "{} fixed points", c.fixed_points());
}

#[test]
fn embed_draws_one_marker_per_sample_and_honors_dimensions() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("three.toml"), "[embed]\nout_dims = 3\n").unwrap();
    ok(
        dir.path(),
        &["pipeline", "--config", "three.toml", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--seed", "0"],
    );
    let (header, rows) = read_rows(&dir.path().join("out/embedding.csv"));
    assert_eq!(rows.len(), 300);
    assert_eq!(&header[3..], ["dim_0", "dim_1", "dim_2"]);
    for svg in ["embedding_domain.svg", "embedding_label.svg"] {
        let text = fs::read_to_string(dir.path().join("out").join(svg)).unwrap();
        // legend swatches are rects, so circles are the samples
        assert_eq!(text.matches("<circle").count(), 300, "{svg}");
        assert!(text.contains("of 3 dimensions"));
    }
}

#[test]
fn evaluate_reports_the_selected_metrics() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["pipeline", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--seed", "1"]);
    ok(dir.path(), &["evaluate", "--metrics", "alignment", "--seed", "1", "--out-dir", "out"]);
    let (header, rows) = read_rows(&dir.path().join("out/metrics.csv"));
    assert_eq!(header, ["metric", "value"]);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["label_transfer", "alignment_score", "foscttm"]);
    for r in &rows {
        let v: f64 = r[1].parse().unwrap();
        assert!((0.0..=2.0).contains(&v), "{r:?}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 1);
}

#[test]
fn seed_list_runs_each_seed_and_summarizes() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["pipeline", "--data", &iris(), "--label-column", "class", "--split", "distort", "--seeds", "0,1,2", "--metrics", "alignment"],
    );
    for s in 0..3 {
        assert!(dir.path().join(format!("out/seed_{s}/metrics.csv")).exists());
    }
    let (header, rows) = read_rows(&dir.path().join("out/results_summary.csv"));
    assert_eq!(header, ["metric", "mean", "std", "runs"]);
    assert!(rows.iter().all(|r| r[3] == "3"), "{rows:?}");
    let (_, runs) = read_rows(&dir.path().join("out/results.csv"));
    assert_eq!(runs.len(), 3);
}

#[test]
fn resume_skips_stages_with_matching_records() {
    let dir = TempDir::new().unwrap();
    let args = ["pipeline", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--seed", "5", "--resume"];
    ok(dir.path(), &args);
    let coupling = dir.path().join("out/coupling.csv");
    let before = fs::metadata(&coupling).unwrap().modified().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    ok(dir.path(), &args);
    assert_eq!(fs::metadata(&coupling).unwrap().modified().unwrap(), before);

    // a changed parameter invalidates the align record
    let mut changed = args.to_vec();
    changed.extend(["--mask-fraction", "0.3"]);
    ok(dir.path(), &changed);
    assert!(fs::metadata(&coupling).unwrap().modified().unwrap() > before);
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(semalign(dir.path(), &["pipeline", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(semalign(dir.path(), &["split", "--data", &iris(), "--split", "sideways"]).status.code(), Some(1));
    assert_eq!(
        semalign(dir.path(), &["split", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--mask-fraction", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(semalign(dir.path(), &["align", "--seeds", "1,2"]).status.code(), Some(1));
    // a label column that does not exist is a data problem
    assert_eq!(
        semalign(dir.path(), &["split", "--data", &iris(), "--label-column", "species", "--split", "rotate", "--seed", "0"]).status.code(),
        Some(2)
    );
    let help = semalign(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("pipeline"));
}

#[test]
fn embedding_file_round_trips() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["pipeline", "--data", &iris(), "--label-column", "class", "--split", "rotate", "--seed", "2"]);
    let path = dir.path().join("out/embedding.csv");
    let (samples, coords) = semalign::embed::read_embedding_csv(&path).unwrap();
    let copy = dir.path().join("copy.csv");
    semalign::embed::write_embedding_csv(&copy, &samples, &coords).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&copy).unwrap());
}

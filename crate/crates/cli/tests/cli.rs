use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noisysgd::idx::{encode_images, encode_labels, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use noisysgd::rng::RngStream;
use noisysgd_cli::csvio::Table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noisysgd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: &str = r#"{
    "experiment": "sweep",
    "data": {"kind": "hypercube", "d": 5, "eps": 0.3, "train_size": 20, "test_size": 50},
    "arch": {"hidden": [8], "mode": "with_bias"},
    "loss": {"kind": "logistic"},
    "noise": "label_noise",
    "p": [0.0, 0.2],
    "learning_rate": 0.2,
    "budget": {"kind": "steps", "steps": 2000},
    "seed": 3,
    "runs": 3,
    "metric_every": 250
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sweep(config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

/// Relative paths and bytes of every file except the config echoes.
fn outputs(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.json" {
                files.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    sweep(&cfg, &a, &[]);
    sweep(&cfg, &b, &[]);
    let (oa, ob) = (outputs(&a), outputs(&b));
    assert_eq!(oa.len(), 2 * 3 * 2 + 1);
    assert_eq!(oa, ob);
}

#[test]
fn parallel_level_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    sweep(&cfg, &a, &["--parallel", "1"]);
    sweep(&cfg, &b, &["--parallel", "3"]);
    assert_eq!(outputs(&a), outputs(&b));
}

#[test]
fn seed_flag_changes_the_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    sweep(&cfg, &a, &["--runs", "1"]);
    sweep(&cfg, &b, &["--runs", "1", "--seed", "4"]);
    let m = |r: &Path| fs::read(r.join("p=0/run_000/metrics.csv")).unwrap();
    assert_ne!(m(&a), m(&b));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cases = [
        SMALL.replace(r#""p": [0.0, 0.2]"#, r#""p": []"#),
        SMALL.replace(r#""seed": 3"#, r#""seed": 3, "sede": 4"#),
        SMALL.replace(r#""runs": 3"#, r#""runs": 0"#),
        SMALL.replace(r#""experiment": "sweep""#, r#""experiment": "mnist""#),
        "{ not json".to_string(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), text);
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
    let o = run(&["sweep", "--config", "/nonexistent.json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_is_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &SMALL.replace(r#""experiment": "sweep","#, ""));
    let out = dir.path().join("o");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let single = SMALL
        .replace(r#""experiment": "sweep","#, "")
        .replace(r#""p": [0.0, 0.2]"#, r#""p": [0.2]"#)
        .replace(r#""runs": 3"#, r#""runs": 1"#);
    let cfg = write_config(dir.path(), "s.json", &single);
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "network.bin", "config.json"] {
        assert!(out.join("p=0.2/run_000").join(f).is_file(), "{f}");
    }
    let net: noisysgd::Network64 = noisysgd::netfile::load(out.join("p=0.2/run_000/network.bin")).unwrap();
    assert_eq!(net.hidden_width(0).unwrap(), 8);
}

#[test]
fn summary_is_the_mean_of_run_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    sweep(&cfg, &out, &[]);
    let summary = Table::read(&out.join("summary.csv")).unwrap();
    let scol = |n: &str| summary.column(n).unwrap();
    let mut checked = 0;
    for arm in ["p=0", "p=0.2"] {
        let runs: Vec<Table> = (0..3)
            .map(|r| Table::read(&out.join(format!("{arm}/run_{r:03}/metrics.csv"))).unwrap())
            .collect();
        let value = |t: &Table, i: usize, col: &str| -> f64 {
            if col == "total_norm" {
                (0..t.header.len())
                    .filter(|&c| t.header[c].starts_with("norm_w"))
                    .map(|c| t.float(i, c).unwrap().unwrap().powi(2))
                    .sum::<f64>()
                    .sqrt()
            } else {
                t.float(i, t.column(col).unwrap()).unwrap().unwrap()
            }
        };
        for (row, cells) in summary.rows.iter().enumerate() {
            if cells[0] != arm {
                continue;
            }
            // Every run has the same grid; `final` is the last row.
            let i = if cells[scol("step")] == "final" {
                runs[0].rows.len() - 1
            } else {
                let step = &cells[scol("step")];
                runs[0].rows.iter().position(|r| &r[1] == step).unwrap()
            };
            for col in ["total_norm", "active_train", "active_test", "err_train", "err_test"] {
                let mean = runs.iter().map(|t| value(t, i, col)).sum::<f64>() / 3.0;
                let got = summary.float(row, scol(&format!("{col}_mean"))).unwrap().unwrap();
                assert!((got - mean).abs() <= 1e-12 * mean.abs().max(1.0), "{arm} {col}: {got} vs {mean}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 2 * 5 * (2000 / 250 + 2));
}

fn svg_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| {
            l.split("points=\"")
                .nth(1)
                .unwrap()
                .trim_end_matches("\"/>")
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

fn attr(svg: &str, name: &str) -> f64 {
    let start = svg.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
    svg[start..].split('"').next().unwrap().parse().unwrap()
}

#[test]
fn plot_parse_back() {
    use noisysgd_cli::plot::{BOTTOM, HEIGHT, LEFT, RIGHT, TOP, WIDTH};
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &SMALL.replace(r#""runs": 3"#, r#""runs": 2"#));
    let out = dir.path().join("o");
    sweep(&cfg, &out, &[]);
    let svg_path = dir.path().join("a.svg");
    let metrics = out.join("p=0.2/run_000/metrics.csv");
    let o = run(&[
        "plot",
        metrics.to_str().unwrap(),
        out.join("p=0.2/run_001/metrics.csv").to_str().unwrap(),
        "--kind",
        "active",
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(&svg_path).unwrap();
    let lines = svg_points(&svg);
    assert_eq!(lines.len(), 2);
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
    // The data ranges recorded on the root are the CSV extremes and land on
    // the box edges.
    let mut ys = Vec::new();
    for r in 0..2 {
        let t = Table::read(&out.join(format!("p=0.2/run_{r:03}/metrics.csv"))).unwrap();
        let c = t.column("active_test").unwrap();
        ys.extend((0..t.rows.len()).map(|i| t.float(i, c).unwrap().unwrap()));
    }
    let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
    assert_eq!(attr(&svg, "data-y-min"), lo);
    assert_eq!(attr(&svg, "data-y-max"), hi);
    assert_eq!(attr(&svg, "data-x-min"), 0.0);
    assert_eq!(attr(&svg, "data-x-max"), 2000.0);
    let all: Vec<(f64, f64)> = lines.concat();
    let fold = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    assert_eq!(fold(|p| p.0), (LEFT, WIDTH - RIGHT));
    assert_eq!(fold(|p| p.1), (TOP, HEIGHT - BOTTOM));

    let summary_svg = dir.path().join("s.svg");
    let o = run(&["plot", out.join("summary.csv").to_str().unwrap(), "--out", summary_svg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(svg_points(&fs::read_to_string(&summary_svg).unwrap()).len(), 2);

    let empty = write_config(dir.path(), "e.csv", "run_id,step,lr,norm_w0,norm_w1,mean_bias,active_train,active_test,err_train,err_test\n");
    let o = run(&["plot", empty.to_str().unwrap(), "--out", dir.path().join("e.svg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = fs::read_to_string(&metrics).unwrap().replacen("\n0,250,", "\n0,oops,", 1);
    let bad = write_config(dir.path(), "b.csv", &text);
    let o = run(&["plot", bad.to_str().unwrap(), "--out", dir.path().join("b.svg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_exit_codes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&["verify", "thm3", "--k", "20", "--d", "10", "--h", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("thm3 PASS"));
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().starts_with("thm3 PASS"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["verdict"], "pass");

    let o = run(&["verify", "thm4", "--h", "1"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("columns dead"));

    // Between 1/k and 1 the checker makes no claim.
    let o = run(&["verify", "thm4", "--h", "0.1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("INCONCLUSIVE"));

    let o = run(&["verify", "ap-exact", "--runs", "2000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("a(p) = 9/16 + (-1/8)·p + (1/64)·p^2 + (1/64)·p^3"));

    assert_eq!(code(&run(&["verify", "thm7"])), 2);
    assert_eq!(code(&run(&["verify", "thm3", "--k", "0"])), 2);
    let bad = write_config(dir.path(), "d.json", r#"{"thm3": {"kay": 3}}"#);
    assert_eq!(code(&run(&["verify", "thm3", "--config", bad.to_str().unwrap()])), 2);
}

fn write_mnist(dir: &Path, train: usize, test: usize) {
    let mut rng = RngStream::new(5, 0);
    let mut make = |n: usize| {
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let images: Vec<Vec<u8>> = labels
            .iter()
            .map(|&l| {
                // Each digit lights its own band of rows, plus noise.
                (0..784)
                    .map(|px| {
                        let band = (px / 28) / 3 == l as usize;
                        let noise = (rng.draw_unit() * 60.0) as u8;
                        if band { 200 + noise / 2 } else { noise }
                    })
                    .collect()
            })
            .collect();
        (encode_images(&images, 28, 28), encode_labels(&labels))
    };
    let (ti, tl) = make(train);
    let (vi, vl) = make(test);
    fs::write(dir.join(TRAIN_IMAGES), ti).unwrap();
    fs::write(dir.join(TRAIN_LABELS), tl).unwrap();
    fs::write(dir.join(TEST_IMAGES), vi).unwrap();
    fs::write(dir.join(TEST_LABELS), vl).unwrap();
}

const MNIST_SMALL: &str = r#"{
    "experiment": "mnist",
    "data": {"kind": "mnist", "train_limit": 40},
    "arch": {"hidden": [12], "mode": "with_bias", "output_width": 10},
    "loss": {"kind": "logistic"},
    "noise": "label_noise",
    "p": [0.0, 0.1],
    "learning_rate": 0.01,
    "schedule": {"kind": "halve_every", "epochs": 1},
    "budget": {"kind": "epochs", "epochs": 2},
    "seed": 1,
    "metric_every": 20
}"#;

#[test]
fn mnist_missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", MNIST_SMALL);
    let out = dir.path().join("o");
    let o = bin()
        .args(["mnist", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("NOISYSGD_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("NOISYSGD_DATA_DIR") && err.contains("train-images-idx3-ubyte"), "{err}");
    let o = bin()
        .args(["mnist", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env_remove("NOISYSGD_DATA_DIR")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn mnist_census_on_synthetic_digits() {
    let dir = tempfile::tempdir().unwrap();
    write_mnist(dir.path(), 60, 30);
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), "m.json", MNIST_SMALL);
    let o = bin()
        .args(["mnist", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("NOISYSGD_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = Table::read(&out.join("mnist_summary.csv")).unwrap();
    assert_eq!(summary.rows.len(), 2);
    let census = Table::read(&out.join("p=0.1/run_000/census.csv")).unwrap();
    assert_eq!(census.rows.len(), 12);
    assert_eq!(census.header.len(), 13);
    // Dead neurons never fire, so their histogram is empty.
    for r in &census.rows {
        if r[1] == "1" {
            assert!(r[3..].iter().all(|c| c == "0"));
        }
    }
    let metrics = Table::read(&out.join("p=0/run_000/metrics.csv")).unwrap();
    // 2 epochs of 40 steps, every 20, plus the start.
    assert_eq!(metrics.rows.len(), 5);
    let lr = metrics.column("lr").unwrap();
    assert_eq!(metrics.float(4, lr).unwrap(), Some(0.005));

    // The clean arm alone.
    let clean = write_config(dir.path(), "c.json", &MNIST_SMALL.replace("[0.0, 0.1]", "[0.0]"));
    let o = bin()
        .args(["mnist", "--config", clean.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap()])
        .env("NOISYSGD_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

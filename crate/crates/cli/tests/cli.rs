use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowrisk::io::write_dataset_file;
use lowrisk::simulate::sample_population;
use lowrisk::WeibullPopulation;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lowrisk"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_sample(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let sample = sample_population(&WeibullPopulation::reference(), n, seed, name).unwrap();
    let path = dir.join(format!("{name}.csv"));
    write_dataset_file(&sample.data, &path).unwrap();
    path
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn fit_calibrate_screen_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let train = write_sample(d, "train", 600, 1);
    let cal = write_sample(d, "cal", 400, 2);
    let test = write_sample(d, "test", 300, 3);
    let fit_out = d.join("fit");
    let predict = format!("{},{}", s(&cal), s(&test));
    let o = run(&["fit", "--data", s(&train), "--predict", &predict, "--grid-end", "8", "--out", s(&fit_out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = fs::read_to_string(fit_out.join("model.csv")).unwrap();
    assert!(model.starts_with("model,term,value\nsurvival,beta_x1,"));
    for f in ["cal_s_curves.csv", "cal_g_curves.csv", "test_s_curves.csv", "test_g_curves.csv"] {
        assert!(fit_out.join(f).is_file(), "{f}");
    }

    for method in ["greedy", "bonferroni", "multiplier", "ltt"] {
        let out = d.join(format!("cal_{method}"));
        let o = run(&[
            "calibrate",
            "--cal", s(&cal),
            "--s-curves", s(&fit_out.join("cal_s_curves.csv")),
            "--g-curves", s(&fit_out.join("cal_g_curves.csv")),
            "--alpha", "0.15",
            "--t0", "3",
            "--method", method,
            "--out", s(&out),
        ]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let table = fs::read_to_string(out.join("calibration.csv")).unwrap();
        assert!(table.starts_with("lambda,n_selected,mu_hat,r_hat,ucb,fallback,path\n"));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["method"], method);
    }

    let out = d.join("screen");
    let screen_args = |extra: &[&str]| {
        let mut v: Vec<String> = [
            "screen",
            "--cal", s(&cal),
            "--s-curves", s(&fit_out.join("cal_s_curves.csv")),
            "--g-curves", s(&fit_out.join("cal_g_curves.csv")),
            "--test-curves", s(&fit_out.join("test_s_curves.csv")),
            "--alpha", "0.15",
            "--t0", "3",
            "--out", s(&out),
        ]
        .iter()
        .map(|x| x.to_string())
        .collect();
        v.extend(extra.iter().map(|x| x.to_string()));
        v
    };
    let o = bin().args(screen_args(&[])).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "grid ends at 8, calibration times do not");
    assert!(String::from_utf8_lossy(&o.stderr).contains("beyond the curve grid"));

    let o = run(&[
        "screen",
        "--cal", s(&cal),
        "--s-curves", s(&fit_out.join("cal_s_curves.csv")),
        "--g-curves", s(&fit_out.join("cal_g_curves.csv")),
        "--test-curves", s(&fit_out.join("test_s_curves.csv")),
        "--alpha", "0.15",
        "--t0", "3",
        "--gamma", "auto",
        "--tune-data", s(&train),
        "--tune-reps", "2",
        "--extrapolate", "true",
        "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let screen = fs::read_to_string(out.join("screen.csv")).unwrap();
    assert_eq!(screen.lines().count(), 301);
    assert!(screen.starts_with("id,score,p_value,selected\n"));
    let line = fs::read_to_string(out.join("summary.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    for key in ["q_hat", "implied_lambda", "p_positive", "abstained"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn missing_alpha_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn out_of_range_and_unknown_keys_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--alpha", "0.1", "--delta", "1.5", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "alpha=0.1\nbogus=3\n").unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let o = run(&["simulate", "--no-such-flag", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_sample(tmp.path(), "d", 300, 9);
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, format!("# tuning\ndata={}\nalpha=0.1\nt0=3\ncandidates=0,1\ntune_reps=1\n", s(&data))).unwrap();
    let out = tmp.path().join("o");
    let o = run(&["tune-gamma", "--config", s(&cfg), "--alpha", "0.2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eff = fs::read_to_string(out.join("effective.cfg")).unwrap();
    assert!(eff.contains("\nalpha=0.2\n"));
    assert!(eff.contains("\ntune_reps=1\n"));
}

#[test]
fn data_errors_exit_with_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "id,time,event,x1\na,-1,1,0.5\nb,2,0,0.1\n").unwrap();
    let o = run(&["fit", "--data", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

fn small_simulation(out: &Path, workers: &str) -> Output {
    run(&[
        "simulate",
        "--alpha", "0.15",
        "--n-train", "300",
        "--n-cal", "200",
        "--n-test", "200",
        "--replicates", "3",
        "--methods", "greedy,ltt,conformal,oracle",
        "--sim-gamma", "0",
        "--bootstrap-b", "50",
        "--multiplier-draws", "50",
        "--seed", "11",
        "--workers", workers,
        "--out", s(out),
    ])
}

#[test]
fn simulation_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(small_simulation(&a, "1").status.success());
    let o = small_simulation(&b, "2");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "summary.csv", "failures.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 * 4);

    let rep = tmp.path().join("r");
    let o = run(&["report", "--metrics", s(&a.join("metrics.csv")), "--out", s(&rep)]);
    assert!(o.status.success());
    assert_eq!(fs::read(rep.join("summary.csv")).unwrap(), fs::read(a.join("summary.csv")).unwrap());
}

#[test]
fn rerun_from_effective_config_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(small_simulation(&out, "1").status.success());
    let first = read_dir_sorted(&out);
    let eff = tmp.path().join("saved.cfg");
    fs::copy(out.join("effective.cfg"), &eff).unwrap();
    fs::remove_dir_all(&out).unwrap();
    let o = run(&["simulate", "--config", s(&eff)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, read_dir_sorted(&out));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sinkhorn-lab"));
    c.env_remove("SINKHORN_LAB_THREADS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_BENCH: [&str; 11] =
    ["bench", "--dims", "2", "--epsilons", "1", "--n", "32,64", "--reps", "2", "--seed", "7"];

#[test]
fn bench_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let mut args = SMALL_BENCH.to_vec();
        args.extend(["--out", name, "--threads", threads]);
        let o = run(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(dir.path().join(name));
    }
    for file in ["results.csv", "slopes.csv", "summary.csv", "manifest.toml"] {
        let first = fs::read(outputs[0].join(file)).unwrap();
        for other in &outputs[1..] {
            assert_eq!(first, fs::read(other.join(file)).unwrap(), "{file}");
        }
    }
    let results = fs::read_to_string(outputs[0].join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("d,epsilon,n,rep,value,seed,iterations,converged"));
    assert_eq!(lines.count(), 4);
    assert!(!results.contains('\r'));
    let manifest = fs::read_to_string(outputs[0].join("manifest.toml")).unwrap();
    assert!(manifest.contains("marginal_tolerance = 0.000000001"), "{manifest}");
}

#[test]
fn threads_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_BENCH.to_vec();
    args.extend(["--out", "env"]);
    let o = bin().args(&args).env("SINKHORN_LAB_THREADS", "2").current_dir(dir.path()).output().unwrap();
    assert!(o.status.success());
    let o = bin().args(&args).env("SINKHORN_LAB_THREADS", "many").current_dir(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SINKHORN_LAB_THREADS"));
}

#[test]
fn normal_samples_drop_bound_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["bench", "--dist", "normal", "--cost", "sqeuclidean", "--dims", "1", "--epsilons", "1", "--n", "8,16,32", "--reps", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("d,epsilon,n,reps,mean,std_dev,converged_reps\n"), "{summary}");
    let slopes = fs::read_to_string(dir.path().join("slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 2);
}

#[test]
fn identical_samples_give_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench", "--dims", "2", "--epsilons", "0.5", "--n", "16", "--reps", "2", "--identical-samples"], dir.path());
    assert!(o.status.success());
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    for line in results.lines().skip(1) {
        let value: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(value.abs() <= 1e-8);
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bench", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["bench", "--n", "64,32"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&[], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
    fs::write(dir.path().join("bad.toml"), "seed = 1\nunknown = 2\n").unwrap();
    let o = run(&["print-config", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_round_trips_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["print-config"], dir.path());
    assert!(o.status.success());
    let default = stdout(&o);
    fs::write(dir.path().join("c.toml"), &default).unwrap();
    let again = stdout(&run(&["print-config", "--config", "c.toml"], dir.path()));
    assert_eq!(default, again);

    fs::write(dir.path().join("d.toml"), "seed = 5\n[bench]\nreps = 3\n").unwrap();
    let shown = stdout(&run(&["print-config", "--config", "d.toml", "--seed", "9"], dir.path()));
    assert!(shown.contains("seed = 9") && shown.contains("reps = 3"), "{shown}");
}

#[test]
fn theorem1_presets() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["single-atom", "two-point", "random"] {
        let o = run(&["theorem1", "--preset", preset, "--instances", "3", "--n", "6"], dir.path());
        assert!(o.status.success(), "{preset}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS theorem1"));
    }
    let csv = fs::read_to_string(dir.path().join("theorem1.csv")).unwrap();
    assert!(csv.starts_with("instance,epsilon,exact,entropic,gap,bound,converged,pass\n"));

    let o = run(&["theorem1", "--preset", "two-point", "--epsilons", "1"], dir.path());
    let out = stdout(&o);
    assert!(out.contains("assignment 4 vs enumeration 4"), "{out}");
    assert!(out.contains("4.37988549"), "{out}");

    // Far outside its regime the bound turns negative and the check fails.
    let o = run(&["theorem1", "--epsilons", "100", "--instances", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));

    let o = run(&["theorem1", "--n", "600", "--instances", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("size limit"), "{}", stderr(&o));
}

#[test]
fn potentials_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["potentials", "--points", "200"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let checks = fs::read_to_string(dir.path().join("potentials_checks.csv")).unwrap();
    assert_eq!(checks.lines().count(), 4);
    let scaling = fs::read_to_string(dir.path().join("potentials_scaling.csv")).unwrap();
    assert!(scaling.starts_with("epsilon,norm,converged\n"));

    let o = run(&["potentials", "--d", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unsupported"));
}

#[test]
fn kernel_sgd_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["kernel-sgd", "--iterations", "20000", "--runs", "2"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("PASS mean relative gap"), "{out}");
    let trace = fs::read_to_string(dir.path().join("kernel_sgd_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 20);

    // A zero ball cannot leave u = v = 0; the diagnostic fails but exits 0.
    let o = run(&["kernel-sgd", "--lambda", "0", "--iterations", "1000"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("dual objective at u = v = 0") && out.contains("FAIL"), "{out}");
}

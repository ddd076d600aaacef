use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sqg_cli::config::{Bound, RunConfig, Schedule, Source};
use sqg_cli::manifest::Manifest;
use sqg_cli::runner::{read_index, toggled};
use sqg_core::engine::{BranchSignature, CutoffBridge, Scheme};
use sqg_core::spectral::io as fio;
use sqg_core::verification::Functional;

fn sqgci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqgci")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const STEADY: &str = "[scheme]\nkind = steady\nlevels = 1\nhorizon = 2\n\n[noise]\ntruncation = 8\n";
const IVP: &str = "[params]\nn_bound = 5\nl_bound = 1\n\n[scheme]\nkind = ivp\nlevels = 1\nhorizon = 2\n\n[noise]\ntruncation = 8\n\n[branch]\ntime = 1\n";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn snapshot_bytes(run: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(run.join("snapshots")).unwrap() {
        let e = e.unwrap();
        out.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap());
    }
    out
}

// ---------------------------------------------------------------- config

#[test]
fn default_config_round_trips() {
    let c = RunConfig::default();
    let back = RunConfig::parse(&c.to_ini_string()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn non_default_config_round_trips() {
    let mut c = RunConfig::default();
    c.params.schedule = Schedule::Strict;
    c.params.a = 1048576.0;
    c.params.beta = 0.05;
    c.params.n_bound = Bound::Value(2.5);
    c.params.l_bound = Bound::Auto;
    c.scheme.kind = Scheme::Terminal;
    c.scheme.levels = 2;
    c.scheme.dt = Some(1.0 / 256.0);
    c.scheme.bridge = CutoffBridge::Linear;
    c.noise.xi = Source::File("/tmp/some xi.sqgf".into());
    c.noise.theta0 = Source::Zero;
    c.noise.seed = 123456789012;
    c.grid.snapshot_from = Some(3.5);
    c.grid.probes = vec![0.125, 4.0];
    c.grid.all_levels = false;
    c.branch.signature = BranchSignature::from_prefix(vec![1, 2, 1]).unwrap();
    c.verify.checks = vec!["reynolds".into(), "weak".into()];
    c.verify.window = Some((4.5, 7.25));
    c.verify.functionals = vec![
        Functional::ModeRe { k1: 2, k2: -1, clip: 3.5 },
        Functional::CosModeRe { k1: 0, k2: 1, scale: 0.1 },
    ];
    c.verify.horizons = vec![2.0, 4.0];
    c.verify.witness = Some((-1.5, 2.0));
    let text = c.to_ini_string();
    let back = RunConfig::parse(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_ini_string(), text);
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let err = RunConfig::parse("[scheme]\nlevles = 2\n").unwrap_err();
    assert!(err.to_string().contains("levles"), "{err}");
    assert_eq!(err.exit_code(), 2);
    let err = RunConfig::parse("[schemes]\nlevels = 2\n").unwrap_err();
    assert!(err.to_string().contains("schemes"), "{err}");
    let err = RunConfig::parse("[scheme]\nlevels = two\n").unwrap_err();
    assert!(err.to_string().contains("levels"), "{err}");
}

#[test]
fn malformed_key_gives_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.ini", "[scheme]\nkind = steady\nhorizon_typo = 3\n");
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("horizon_typo"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn sweep_axis_override() {
    let c = RunConfig::default();
    assert_eq!(c.with_override("noise.seed", "11").unwrap().noise.seed, 11);
    assert_eq!(c.with_override("noise.nope", "1").unwrap_err().exit_code(), 1);
    assert_eq!(c.with_override("seed", "1").unwrap_err().exit_code(), 1);
}

// ---------------------------------------------------------------- run

#[test]
fn minimal_steady_run_writes_the_three_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let run = tmp.path().join("run");
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["index.txt", "manifest.txt", "diagnostics.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let idx = read_index(&run).unwrap();
    assert_eq!(idx.len(), 2);
    for e in &idx {
        assert!(run.join(e.q.as_ref().unwrap()).is_file());
    }
    let m = Manifest::read(&run).unwrap();
    assert_eq!(m.command, "run");
    assert_eq!(m.get("derived", "lambda"), Some("4,16"));
    assert!(m.files.iter().any(|(f, _)| f == "index.txt"));
}

#[test]
fn same_config_twice_gives_byte_identical_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ivp.ini", IVP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&sqgci(&["run", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&sqgci(&["run", "--config", s(&cfg), "--out", s(&b)])), 0);
    let (sa, sb) = (snapshot_bytes(&a), snapshot_bytes(&b));
    assert!(sa.len() > 5);
    assert_eq!(sa, sb);
    assert_eq!(fs::read(a.join("diagnostics.csv")).unwrap(), fs::read(b.join("diagnostics.csv")).unwrap());
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ivp.ini", IVP);
    let a = tmp.path().join("a");
    assert_eq!(code(&sqgci(&["run", "--config", s(&cfg), "--out", s(&a)])), 0);
    // the config file is gone; only the manifest remains
    fs::remove_file(&cfg).unwrap();
    let b = tmp.path().join("b");
    let o = sqgci(&["run", "--config", s(&a.join("manifest.txt")), "--out", s(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (ma, mb) = (Manifest::read(&a).unwrap(), Manifest::read(&b).unwrap());
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.config, mb.config);
    assert_eq!(snapshot_bytes(&a), snapshot_bytes(&b));
}

#[test]
fn seed_and_levels_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let run = tmp.path().join("run");
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&run), "--seed", "99", "--levels", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = Manifest::read(&run).unwrap();
    assert_eq!(m.config.noise.seed, 99);
    assert_eq!(m.config.scheme.levels, 2);
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&run), "--levels", "7"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn missing_arguments_are_usage_errors() {
    assert_eq!(code(&sqgci(&["run"])), 1);
    assert_eq!(code(&sqgci(&["frobnicate"])), 1);
}

// ---------------------------------------------------------------- verify

fn steady_run(tmp: &Path) -> PathBuf {
    let cfg = write_config(tmp, "steady.ini", STEADY);
    let run = tmp.join("run");
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    run
}

#[test]
fn empty_checks_list_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let run = steady_run(tmp.path());
    let o = sqgci(&["verify", "--out", s(&run), "--checks", ""]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(run.join("verify.txt").is_file());
}

#[test]
fn all_run_checks_pass_on_a_steady_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run = steady_run(tmp.path());
    let o = sqgci(&["verify", "--out", s(&run), "--checks", "checksums,reynolds,bounds,weak,ergodic"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let txt = fs::read_to_string(run.join("verify.txt")).unwrap();
    assert!(txt.contains("check=reynolds"));
    assert!(txt.contains("check=weak:cos(1,0)"));
    assert!(txt.contains("check=replay"));
    assert!(!txt.contains("verdict=FAIL"));
    let csv = fs::read_to_string(run.join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), txt.lines().count() + 1);
}

#[test]
fn tampered_snapshot_fails_the_reynolds_check() {
    let tmp = tempfile::tempdir().unwrap();
    let run = steady_run(tmp.path());
    let e = read_index(&run).unwrap().into_iter().find(|e| e.level == 1).unwrap();
    let path = run.join(e.q.unwrap());
    let mut q = fio::load(&path).unwrap();
    let c = q.get(3, 1);
    q.set(3, 1, c + num_complex::Complex64::new(1e-3, 0.0));
    fio::save(&path, &q).unwrap();
    let o = sqgci(&["verify", "--out", s(&run), "--checks", "reynolds"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let txt = fs::read_to_string(run.join("verify.txt")).unwrap();
    let line = txt.lines().find(|l| l.contains("region=L1")).unwrap();
    assert!(line.contains("verdict=FAIL"), "{line}");
    let o = sqgci(&["verify", "--out", s(&run), "--checks", "checksums"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn verify_without_manifest_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqgci(&["verify", "--out", s(tmp.path()), "--checks", ""]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ensemble_check_on_a_single_run_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = steady_run(tmp.path());
    assert_eq!(code(&sqgci(&["verify", "--out", s(&run), "--checks", "gaussian"])), 1);
    assert_eq!(code(&sqgci(&["verify", "--out", s(&run), "--checks", "nonsense"])), 1);
}

// ---------------------------------------------------------------- branch

#[test]
fn flip_beyond_levels_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ivp.ini", IVP);
    let o = sqgci(&["branch", "--config", s(&cfg), "--out", s(&tmp.path().join("br")), "--flip", "2"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = sqgci(&["branch", "--config", s(&cfg), "--out", s(&tmp.path().join("br")), "--flip", "0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn identical_signature_gives_distance_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ivp.ini", IVP);
    let br = tmp.path().join("br");
    let o = sqgci(&["branch", "--config", s(&cfg), "--out", s(&br)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let txt = fs::read_to_string(br.join("separation.txt")).unwrap();
    assert!(txt.contains("check=separation region=t=1 flip=none measured=0.000000000e0"), "{txt}");
}

#[test]
fn flip_at_level_one_separates_the_branches() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ivp.ini", IVP);
    let br = tmp.path().join("br");
    let o = sqgci(&["branch", "--config", s(&cfg), "--out", s(&br), "--flip", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (Manifest::read(&br.join("a")).unwrap(), Manifest::read(&br.join("b")).unwrap());
    assert_eq!(a.config.branch.signature.sigma(1), 2);
    assert_eq!(b.config.branch.signature.sigma(1), 1);
    let csv = fs::read_to_string(br.join("separation.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("separation,")).unwrap();
    let measured: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!(measured > 0.0);
}

#[test]
fn toggling_changes_one_level() {
    let s = BranchSignature::from_prefix(vec![2, 1]).unwrap();
    let t = toggled(&s, 2);
    assert_eq!((t.sigma(1), t.sigma(2), t.sigma(3)), (2, 2, 2));
    let t = toggled(&s, 3);
    assert_eq!((t.sigma(1), t.sigma(2), t.sigma(3)), (2, 1, 1));
    assert_eq!(s.first_difference(&t), Some(3));
}

// ---------------------------------------------------------------- sweep

#[test]
fn sweep_over_three_seeds_writes_three_manifests_and_an_index() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let out = tmp.path().join("sweep");
    let o = sqgci(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "noise.seed", "--values", "1,2,3", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let idx = fs::read_to_string(out.join("sweep_index.txt")).unwrap();
    let rows: Vec<&str> = idx.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert!(row.ends_with(" ok"), "{row}");
        let m = Manifest::read(&out.join(format!("run_{i:03}"))).unwrap();
        assert_eq!(m.config.noise.seed, i as u64 + 1);
    }
    // different seeds give different forcing
    let xi = |i: usize| fs::read(out.join(format!("run_{i:03}/snapshots/xi.sqgf"))).unwrap();
    assert_ne!(xi(0), xi(1));
}

#[test]
fn sweep_range_values_and_env_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let out = tmp.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_sqgci"))
        .args(["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "noise.seed", "--values", "4..5"])
        .env("SQGCI_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("run_001/manifest.txt").is_file());
    assert!(!out.join("run_002").exists());
}

#[test]
fn sweep_unknown_axis_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let out = tmp.path().join("sweep");
    let o = sqgci(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "noise.colour", "--values", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("noise.colour"));
    assert!(!out.exists());
}

#[test]
fn failing_sweep_member_is_recorded_and_the_rest_continue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "steady.ini", STEADY);
    let out = tmp.path().join("sweep");
    // grid_cap 16 cannot hold level 1
    let o = sqgci(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "scheme.grid_cap", "--values", "2048,16"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let idx = fs::read_to_string(out.join("sweep_index.txt")).unwrap();
    let rows: Vec<&str> = idx.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].ends_with(" ok"));
    assert!(rows[1].contains("error"), "{}", rows[1]);
}

#[test]
fn theta0_scaling_sweep_feeds_coming_down() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[params]\nn_bound = 5\nl_bound = 1\n\n[scheme]\nkind = terminal\nlevels = 1\nhorizon = 6\n\n\
                [noise]\ntruncation = 8\ntheta_t = zero\n\n[grid]\nsnapshot_every = 0.5\nsnapshot_levels = top\n\n\
                [verify]\nchecks = coming_down\ncoming_from = 4\ncoming_eps = 1000\n";
    let cfg = write_config(tmp.path(), "cd.ini", text);
    let out = tmp.path().join("sweep");
    let o = sqgci(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "noise.theta0_scale", "--values", "1,2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let txt = fs::read_to_string(out.join("ensemble.txt")).unwrap();
    assert!(txt.contains("check=coming_down_discrepancy region=t>=4 runs=2 measured=0.000000000e0"), "{txt}");
}

// ---------------------------------------------------------------- small commands

#[test]
fn sample_noise_writes_a_field() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("xi.sqgf");
    let o = sqgci(&["sample-noise", "--seed", "3", "--truncation", "8", "--alpha", "0.5", "--out", s(&f)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let z = fio::load(&f).unwrap();
    assert_eq!(z.max_freq(), 8);
    assert!(z.is_mean_free());
    assert_eq!(code(&sqgci(&["sample-noise", "--alpha", "1.5", "--out", s(&f)])), 2);
}

#[test]
fn validate_params_names_the_violated_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.ini", "[params]\nschedule = strict\na = 1048576\nb = 4\nbeta = 0.05\n");
    let o = sqgci(&["validate-params", "--config", s(&good)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mode=strict"));
    let bad = write_config(tmp.path(), "bad.ini", "[params]\nschedule = strict\nb = 4\nbeta = 0.3\n");
    let o = sqgci(&["validate-params", "--config", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("1/b + beta < 1/2"), "{}", stderr(&o));
}

#[test]
fn file_forcing_is_read_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&sqgci(&["sample-noise", "--seed", "5", "--truncation", "8", "--out", s(&tmp.path().join("xi.sqgf"))])), 0);
    let cfg = write_config(tmp.path(), "f.ini", "[scheme]\nkind = steady\nlevels = 1\n\n[noise]\nxi = file:xi.sqgf\ntruncation = 8\n");
    let run = tmp.path().join("run");
    let o = sqgci(&["run", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = Manifest::read(&run).unwrap();
    match &m.config.noise.xi {
        Source::File(p) => assert!(Path::new(p).is_absolute(), "{p}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(fs::read(run.join("snapshots/xi.sqgf")).unwrap(), fs::read(tmp.path().join("xi.sqgf")).unwrap());
}

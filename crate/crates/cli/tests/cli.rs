use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bzdos::systems::{make_chain, SystemModel};
use bzdos::wannier::HrFile;
use bzdos_cli::config::StudySpec;
use bzdos_cli::reference::cached_lt;
use bzdos_cli::study::{fit_cost_exponent, run_cost, CONVERGENCE_HEADER};
use bzdos_cli::system::LoadedSystem;
use bzdos_cli::MethodKind;

fn bzdos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bzdos")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

fn chain_hr(dir: &Path) -> String {
    let chain = make_chain(1.0).unwrap();
    let SystemModel::TightBinding(m) = &chain.model else {
        panic!("chain is a tight-binding model")
    };
    let path = dir.join("chain_hr.dat");
    fs::write(&path, HrFile::from_model(m, "chain").write()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bcd_convergence_table() {
    let o = bzdos(&["converge", "--system", "chain", "--method", "bcd", "--energy", "0", "--schedule", "25,50,100,200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), CONVERGENCE_HEADER);
    let rel = column(&out, "rel_error");
    assert_eq!(rel.len(), 4);
    assert!(rel.windows(2).all(|w| w[1] < w[0]), "{rel:?}");
    assert!(rel[3] < 1e-7);
    assert_eq!(column(&out, "nevals"), vec![25.0, 50.0, 100.0, 200.0]);
}

#[test]
fn tetrahedron_convergence_table() {
    let o = bzdos(&["converge", "--system", "chain", "--method", "lt", "--energy", "0", "--schedule", "64,256,1024,4096"]);
    assert!(o.status.success());
    let rel = column(&stdout(&o), "rel_error");
    assert!(rel.windows(2).all(|w| w[1] < w[0]), "{rel:?}");
}

#[test]
fn iai_schedule_is_tolerances() {
    let o = bzdos(&[
        "converge", "--system", "chain", "--method", "iai", "--eta", "0.05", "--energy", "0.3", "--schedule", "1e-8,1e-6,1e-4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(column(&out, "n"), vec![1e-8, 1e-6, 1e-4]);
    let evals = column(&out, "nevals");
    assert!(evals[0] > evals[2]);
}

#[test]
fn configuration_errors_exit_one_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["converge", "--system", "square", "--method", "bcd", "--energy", "0", "--schedule", "10", "--out", out_s],
        vec!["converge", "--system", "chain", "--method", "bcd", "--energy", "0", "--schedule", "50,25", "--out", out_s],
        vec!["eta-sweep", "--system", "chain", "--method", "ptr", "--energy", "0", "--eta", "0.1", "--budgets", "1000,100"],
        vec!["converge", "--system", "chain", "--method", "bcd", "--energy", "0", "--schedule", "10", "--eta", "-1"],
        vec!["dos", "--system", "chain", "--method", "ptr", "--energy", "0"],
        vec!["dos", "--method", "lt", "--energy", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = bzdos(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
}

#[test]
fn eta_sweep_best_eta_shrinks_with_budget() {
    let o = bzdos(&[
        "eta-sweep", "--system", "chain", "--method", "ptr", "--energy", "0", "--budgets", "100,1000,10000", "--eta",
        "0.5,0.2,0.1,0.05,0.02,0.01,0.005,0.002,0.001",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let best = column(&stdout(&o), "best_eta");
    assert_eq!(best.len(), 3);
    assert!(best.windows(2).all(|w| w[1] <= w[0]), "{best:?}");
    assert!(best[2] < best[0]);

    let o = bzdos(&["eta-sweep", "--system", "chain", "--method", "ptr", "--energy", "0", "--budgets", "100,1000", "--eta", "0.07"]);
    assert_eq!(column(&stdout(&o), "best_eta"), vec![0.07, 0.07]);
}

#[test]
fn cost_exponents() {
    let spec = |m: MethodKind| StudySpec {
        system: Some("chain".into()),
        method: Some(m),
        energies: vec![0.0],
        eta: vec![0.1, 0.05, 0.02, 0.01],
        target: Some(1e-5),
        ..StudySpec::default()
    };
    let p = |m| {
        let s = spec(m);
        let sys = LoadedSystem::load(&s).unwrap();
        let rows = run_cost(&s, &sys).unwrap();
        assert!(rows.iter().all(|r| r.reached && r.abs_error <= 1e-5));
        (fit_cost_exponent(&rows).unwrap(), rows)
    };
    let (ptr, _) = p(MethodKind::Ptr);
    assert!((ptr - 1.0).abs() <= 0.3, "{ptr}");
    let (iai, _) = p(MethodKind::Iai);
    assert!(iai < 0.3, "{iai}");
    let (_, bcd) = p(MethodKind::Bcd);
    let evals: Vec<f64> = bcd.iter().map(|r| r.n_evals as f64).collect();
    let (lo, hi) = evals.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.2, "{evals:?}");
}

#[test]
fn diagnose_exit_codes() {
    let cases = [
        (vec!["--system", "two-block", "--energy", "0"], 2),
        (vec!["--system", "chain", "--energy", "0"], 0),
        (vec!["--system", "free-gas-3d", "--energy", "1.2"], 2),
    ];
    for (args, code) in cases {
        let mut full = vec!["diagnose"];
        full.extend(args.iter());
        let o = bzdos(&full);
        assert_eq!(o.status.code(), Some(code), "{args:?}");
        let text = stdout(&o);
        if code == 2 {
            assert!(text.contains("FAILED") && text.contains("k=("), "{text}");
        }
    }
}

#[test]
fn csv_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(format!("{sub}-{threads}"));
        let o = bzdos(&[
            "converge", "--system", "graphene", "--method", "bcd", "--energy", "0.5", "--schedule", "16,32", "--threads",
            threads, "--fixed-wall-time", "--reference", "analytic", "--cache-dir", dir.path().join("cache").to_str().unwrap(),
            "--out", out.to_str().unwrap(),
        ]);
        // graphene has no closed form, so the reference is a cached tetrahedron run;
        // keep the test cheap by seeding the cache
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("converge.csv")).unwrap()
    };
    let cache = dir.path().join("cache");
    fs::create_dir_all(&cache).unwrap();
    fs::write(cache.join("graphene-lt-n3000.txt"), "0.5 0.1\n").unwrap();
    let a = run("a", "1");
    let b = run("b", "1");
    assert_eq!(a, b);
    let c = run("c", "3");
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!((column(&text, "abs_error")[0] - (column(&text, "value")[0] - 0.1).abs()).abs() < 1e-15);
}

#[test]
fn reference_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let spec = StudySpec {
        system: Some("graphene".into()),
        ..StudySpec::default()
    };
    let sys = LoadedSystem::load(&spec).unwrap();
    let v = cached_lt(&sys, dir.path(), 40, 0.5).unwrap();
    let file = dir.path().join("graphene-lt-n40.txt");
    assert!(fs::read_to_string(&file).unwrap().starts_with("0.5 "));
    // a second call reads the file instead of recomputing
    fs::write(&file, "0.5 123.0\n").unwrap();
    assert_eq!(cached_lt(&sys, dir.path(), 40, 0.5).unwrap(), 123.0);
    assert!(v > 0.0 && v != 123.0);
}

#[test]
fn reference_from_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref.csv");
    fs::write(&refs, "energy,value\n0.3,0.25\n").unwrap();
    let o = bzdos(&[
        "converge", "--system", "chain", "--method", "lt", "--energy", "0.3", "--schedule", "64", "--reference",
        refs.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let v = column(&out, "value")[0];
    assert!((column(&out, "abs_error")[0] - (v - 0.25).abs()).abs() < 1e-15);

    let o = bzdos(&[
        "converge", "--system", "chain", "--method", "lt", "--energy", "0.7", "--schedule", "64", "--reference",
        refs.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hr_input_matches_named_system() {
    let dir = tempfile::tempdir().unwrap();
    let hr = chain_hr(dir.path());
    let named = bzdos(&["dos", "--system", "chain", "--method", "ptr", "--eta", "0.05", "--energy", "-0.4,0.3", "--n", "300"]);
    let file = bzdos(&["dos", "--hr", &hr, "--method", "ptr", "--eta", "0.05", "--energy", "-0.4,0.3", "--n", "300"]);
    assert!(named.status.success() && file.status.success(), "{}", String::from_utf8_lossy(&file.stderr));
    let (a, b) = (column(&stdout(&named), "value"), column(&stdout(&file), "value"));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-13);
    }
    // a Fermi shift of 0.3 moves E=0 onto the old E=0.3
    let shifted = bzdos(&["dos", "--hr", &hr, "--fermi", "0.3", "--method", "ptr", "--eta", "0.05", "--energy", "0", "--n", "300"]);
    let s = column(&stdout(&shifted), "value")[0];
    assert!((s - a[1]).abs() < 1e-13);
    // hr models have no analytic reference: error columns stay empty
    let conv = bzdos(&["converge", "--hr", &hr, "--method", "lt", "--energy", "0", "--schedule", "64"]);
    let text = stdout(&conv);
    assert!(text.lines().nth(1).unwrap().ends_with(",,"), "{text}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, "system = \"chain\"\nmethod = \"lt\"\nenergies = [0.0]\nschedule = [64, 128]\n").unwrap();
    let o = bzdos(&["converge", "--config", cfg.to_str().unwrap()]);
    assert_eq!(column(&stdout(&o), "n"), vec![64.0, 128.0]);
    let o = bzdos(&["converge", "--config", cfg.to_str().unwrap(), "--schedule", "32"]);
    assert_eq!(column(&stdout(&o), "n"), vec![32.0]);
    fs::write(&cfg, "system = \"chain\"\nmethod = \"lt\"\nenergy = [0.0]\n").unwrap();
    assert_eq!(bzdos(&["converge", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn plots() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    fs::write(p("empty.csv"), format!("{CONVERGENCE_HEADER}\n")).unwrap();
    let o = bzdos(&["plot", p("empty.csv").to_str().unwrap(), "--out", p("empty.svg").to_str().unwrap()]);
    assert!(o.status.success());
    let svg = fs::read_to_string(p("empty.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<svg") && !svg.contains("<circle"));

    for (name, m, sched) in [("bcd.csv", "bcd", "25,50,100"), ("lt.csv", "lt", "64,128,256")] {
        let o = bzdos(&["converge", "--system", "chain", "--method", m, "--energy", "0", "--schedule", sched, "--fixed-wall-time"]);
        fs::write(p(name), stdout(&o)).unwrap();
    }
    let args = |out: &str| {
        vec![
            "plot".to_string(),
            p("bcd.csv").to_str().unwrap().to_string(),
            p("lt.csv").to_str().unwrap().to_string(),
            "--out".to_string(),
            p(out).to_str().unwrap().to_string(),
        ]
    };
    let run = |out: &str| {
        let a = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(bzdos(&refs).status.success());
        fs::read(p(out)).unwrap()
    };
    let first = run("two.svg");
    assert_eq!(first, run("again.svg"));
    let svg = String::from_utf8(first).unwrap();
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
    assert!(svg.contains(">bcd<") && svg.contains(">lt<"));

    fs::write(p("bad.csv"), "n,nevals,rel_error\n1,2,abc\n").unwrap();
    let o = bzdos(&["plot", p("bad.csv").to_str().unwrap(), "--out", p("bad.svg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

use std::f64::consts::PI;
use std::fs;

use expstab::experiment::*;
use expstab::integrators::RunStatus;
use expstab::spectral::read_snapshot;
use expstab::{Complex64, Error, MethodFamily};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn small_zds(dir: &std::path::Path, extra: &[(&str, &str)]) -> ExperimentConfig {
    let out = dir.join("out");
    let mut kv = pairs(&[
        ("problem", "zds"),
        ("nx", "32"),
        ("t_end", "1"),
        ("steps", "20, 40"),
        ("methods", "erk4, imrk4"),
        ("reference_steps", "800"),
        ("out", out.to_str().unwrap()),
    ]);
    kv.extend(pairs(extra));
    ExperimentConfig::from_pairs(Command::Converge, &kv).unwrap()
}

#[test]
fn relative_error_examples() {
    let r = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0)];
    assert_eq!(relative_error(&r, &r).unwrap(), 0.0);
    let doubled: Vec<Complex64> = r.iter().map(|z| z * 2.0).collect();
    assert!((relative_error(&doubled, &r).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(
        relative_error(&r, &[c(0.0, 0.0); 3]),
        Err(Error::InvalidArgument(_))
    ));
    assert!(relative_error(&r, &r[..2]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let a: Vec<Complex64> = (0..17).map(|_| c(rng.gen(), rng.gen())).collect();
        let b: Vec<Complex64> = (0..17).map(|_| c(rng.gen(), rng.gen())).collect();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..17 {
            num = num.max(((b[i].re - a[i].re).powi(2) + (b[i].im - a[i].im).powi(2)).sqrt());
            den = den.max((b[i].re.powi(2) + b[i].im.powi(2)).sqrt());
        }
        assert!((relative_error(&a, &b).unwrap() - num / den).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn observed_order_recovers_power_laws(p in 0.5f64..8.0, scale in -6.0f64..2.0, n0 in 10usize..1000) {
        let cst = 10f64.powf(scale);
        let err = |n: usize| cst * (1.0 / n as f64).powf(p);
        let got = observed_order(err(n0), err(2 * n0), n0, 2 * n0).unwrap();
        prop_assert!((got - p).abs() < 1e-12);
        let got = observed_order(err(n0), err(3 * n0), n0, 3 * n0).unwrap();
        prop_assert!((got - p).abs() < 1e-12);
        let pts: Vec<(usize, f64)> = (0..5).map(|i| (n0 << i, err(n0 << i))).collect();
        prop_assert!((fitted_order(&pts).unwrap() - p).abs() < 1e-10);
    }
}

#[test]
fn orders_skip_failed_runs() {
    let rec = |n: usize, e: Option<f64>, status: RecordStatus| RunRecord {
        method: "ERK4".into(),
        modification: "none".into(),
        n_steps: n,
        h: 1.0 / n as f64,
        relative_error: e,
        wall_time_seconds: 0.0,
        status,
        observed_order: None,
    };
    let mut records = vec![
        rec(100, None, RecordStatus::Blowup),
        rec(200, Some(1e-3), RecordStatus::Ok),
        rec(400, Some(1e-3 / 16.0), RecordStatus::Ok),
        rec(800, Some(0.5), RecordStatus::NonConverged),
    ];
    annotate_orders(&mut records);
    assert_eq!(records[0].observed_order, None);
    assert_eq!(records[1].observed_order, None);
    assert!((records[2].observed_order.unwrap() - 4.0).abs() < 1e-12);
    assert_eq!(records[3].observed_order, None);
    assert_eq!(RecordStatus::classify(0.2), RecordStatus::NonConverged);
    assert_eq!(RecordStatus::classify(f64::NAN), RecordStatus::NonConverged);
    let csv = records_to_csv(&records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], RUN_CSV_HEADER);
    assert_eq!(
        lines[1],
        "ERK4,none,100,1.0000000000000000e-2,,0.0000000000000000e0,blowup,"
    );
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
}

#[test]
fn angles_and_specs_parse() {
    assert_eq!(parse_angle("pi").unwrap(), PI);
    assert_eq!(parse_angle("pi/128").unwrap(), PI / 128.0);
    assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
    assert_eq!(parse_angle(" 2 * pi / 3 ").unwrap(), 2.0 * PI / 3.0);
    assert_eq!(parse_angle("0.25").unwrap(), 0.25);
    for bad in ["pi/0", "pix", "", "abc", "pi/"] {
        assert!(parse_angle(bad).is_err(), "{bad}");
    }
    let r = parse_repartition("abs_k3:pi/128").unwrap().unwrap();
    assert_eq!(r.param, PI / 128.0);
    assert_eq!(parse_repartition("identity:8").unwrap().unwrap().param, 8.0);
    assert_eq!(parse_repartition("none").unwrap(), None);
    assert!(matches!(
        parse_repartition("abs_k3:pi/2"),
        Err(Error::Config(_))
    ));
    assert!(matches!(parse_repartition("k4:1"), Err(Error::Config(_))));
    let hv = parse_hyperviscosity("8:1e10").unwrap();
    assert_eq!((hv.order, hv.gamma), (8, 1e10));
    assert!(matches!(parse_hyperviscosity("5:1"), Err(Error::Config(_))));
}

#[test]
fn config_defaults_and_precedence() {
    let zds = ExperimentConfig::from_pairs(Command::Converge, &[]).unwrap();
    assert_eq!(zds.problem, "zds");
    assert_eq!((zds.nx, zds.t_end), (128, 40.0));
    assert_eq!(zds.steps, vec![500, 1000, 2000, 4000, 8000, 16000, 32000]);
    assert_eq!(zds.reference.method, MethodFamily::Rk4);
    assert_eq!(zds.reference_steps(), 320000);
    assert_eq!(zds.modifications, vec![RunModification::None]);

    let kdv = ExperimentConfig::from_pairs(Command::Longtime, &[]).unwrap();
    assert_eq!(kdv.problem, "kdv");
    assert_eq!((kdv.nx, kdv.t_end, kdv.samples), (512, 160.0, 30));
    assert_eq!(kdv.steps, vec![56000]);
    assert_eq!(kdv.reference_steps(), 560000);
    assert_eq!(kdv.modifications.len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.conf");
    fs::write(
        &file,
        "# study\nproblem = zds\nsteps = 100, 200   # doubling\nmethods = esdc6\nrepartition = abs_k3:pi/128, none\n\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(
        Command::Converge,
        Some(&file),
        &pairs(&[("steps", "300,600")]),
    )
    .unwrap();
    assert_eq!(cfg.steps, vec![300, 600]);
    assert_eq!(cfg.methods, vec![MethodFamily::Esdc6]);
    assert_eq!(cfg.modifications.len(), 2);
    assert_eq!(cfg.modifications[1], RunModification::None);
    let cfg = ExperimentConfig::load(
        Command::Converge,
        Some(&file),
        &pairs(&[("hyperviscosity", "8:1e4")]),
    )
    .unwrap();
    assert_eq!(cfg.modifications.len(), 3);
    assert_eq!(cfg.reference_steps(), 200000);

    for bad in [
        ("steps", "200, 100"),
        ("steps", "0"),
        ("steps", "10, 10"),
        ("nx", "48"),
        ("problem", "burgers"),
        ("colour", "blue"),
        ("methods", "rk5"),
        ("grid", "10"),
    ] {
        let r = ExperimentConfig::from_pairs(Command::Converge, &pairs(&[bad]));
        assert!(matches!(r, Err(Error::Config(_))), "{bad:?}");
    }
    assert!(matches!(parse_key_values("novalue"), Err(Error::Config(_))));
    assert!(matches!(
        ExperimentConfig::load(Command::Solve, Some(&dir.path().join("missing")), &[]),
        Err(Error::Config(_))
    ));
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
    assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
    assert_eq!(exit_code(&Error::Reference("x".into())), 3);
    assert_eq!(exit_code(&Error::Format("x".into())), 1);
    assert_eq!(EXIT_ALL_BLOWUP, 4);
}

#[test]
fn cache_round_trip_and_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path().join("cache"));
    let cfg = small_zds(dir.path(), &[]);
    let first = build_reference(&cfg, &cache).unwrap();
    assert!(!first.cache_hit);
    let second = build_reference(&cfg, &cache).unwrap();
    assert!(second.cache_hit);
    assert_eq!(first.snapshots, second.snapshots);
    assert_eq!(first.path, second.path);
    // Nothing partial is left behind.
    let names: Vec<String> = fs::read_dir(cache.root())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 1);
    assert!(!names[0].starts_with('.'));

    let other = small_zds(dir.path(), &[("nx", "64")]);
    assert_ne!(
        reference_key(&cfg, &[1.0]).digest(),
        reference_key(&other, &[1.0]).digest()
    );
    assert!(!build_reference(&other, &cache).unwrap().cache_hit);

    // A tampered key file is refused rather than silently used.
    fs::write(first.path.join("key.txt"), "garbage").unwrap();
    assert!(matches!(
        build_reference(&cfg, &cache),
        Err(Error::Format(_))
    ));
}

#[test]
fn reference_preconditions_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path().join("cache"));
    let cfg = small_zds(dir.path(), &[("reference_steps", "399")]);
    assert!(matches!(
        build_reference(&cfg, &cache),
        Err(Error::Config(_))
    ));
    // RK4 at h = 1 is far outside its stability interval for the excited modes.
    let cfg = small_zds(
        dir.path(),
        &[("t_end", "40"), ("steps", "4"), ("reference_steps", "40")],
    );
    let err = build_reference(&cfg, &cache).unwrap_err();
    assert!(matches!(err, Error::Reference(_)));
    assert_eq!(exit_code(&err), 3);
}

fn without_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(5);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn converge_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path().join("cache"));
    let cfg = small_zds(
        dir.path(),
        &[("repartition", "none, abs_k3:pi/128"), ("threads", "2")],
    );
    let a = cmd_converge(&cfg, &cache).unwrap();
    let text_a = fs::read_to_string(&a.csv_path).unwrap();
    let b = cmd_converge(&cfg, &cache).unwrap();
    let text_b = fs::read_to_string(&b.csv_path).unwrap();
    assert_eq!(without_wall_time(&text_a), without_wall_time(&text_b));
    assert!(b.reference.cache_hit);
    assert_eq!(a.records.len(), 2 * 2 * 2);
    assert!(!a.all_blew_up());
    for r in &a.records {
        assert_eq!(r.status, RecordStatus::Ok, "{r:?}");
        assert!(r.relative_error.unwrap() < 1e-3);
    }
    // Order labels: ERK4 none 20 then 40.
    assert_eq!(a.records[0].method, "ERK4");
    assert_eq!(a.records[0].modification, "none");
    assert!(a.records[1].observed_order.unwrap() > 3.0);
}

#[test]
fn converge_reports_total_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path().join("cache"));
    let cfg = small_zds(
        dir.path(),
        &[
            ("t_end", "40"),
            ("steps", "20, 40"),
            ("methods", "rk4"),
            ("reference_steps", "40000"),
            ("reference_method", "imrk4"),
        ],
    );
    let report = cmd_converge(&cfg, &cache).unwrap();
    assert!(report.all_blew_up());
    let csv = fs::read_to_string(&report.csv_path).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",blowup,")).count(), 2);
}

#[test]
fn longtime_samples_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path().join("cache"));
    let out = dir.path().join("out");
    let cfg = ExperimentConfig::from_pairs(
        Command::Longtime,
        &pairs(&[
            ("nx", "32"),
            ("t_end", "1"),
            ("steps", "70"),
            ("samples", "6"),
            ("methods", "erk4, epbm5"),
            ("out", out.to_str().unwrap()),
        ]),
    )
    .unwrap();
    assert_eq!(cfg.reference_steps(), 560000);
    let cfg = ExperimentConfig {
        reference: ReferenceSpec {
            steps: Some(700),
            ..cfg.reference.clone()
        },
        ..cfg
    };
    let times = longtime_sample_times(&cfg);
    let h = 1.0 / 70.0;
    assert_eq!(
        times,
        (1..=6)
            .map(|i| ((i * 70) as f64 / 6.0).round() * h)
            .collect::<Vec<_>>()
    );
    let report = cmd_longtime(&cfg, &cache).unwrap();
    assert_eq!(report.runs.len(), 2 * 4);
    for run in &report.runs {
        assert!(run.status.is_ok());
        assert_eq!(run.records.len(), 6);
        assert!(
            run.max_error() < 1e-4,
            "{:?} {} {}",
            run.method,
            run.modification,
            run.max_error()
        );
        assert_eq!(run.first_exceeding(1e-4), None);
    }
    let csv = fs::read_to_string(&report.csv_path).unwrap();
    assert_eq!(csv.lines().next().unwrap(), LONGTIME_CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 8 * 6);
    assert!(report
        .find(MethodFamily::Epbm5, "identity:eps=16")
        .is_some());

    let bad = ExperimentConfig {
        steps: vec![70, 100],
        ..cfg.clone()
    };
    assert!(matches!(cmd_longtime(&bad, &cache), Err(Error::Config(_))));
}

#[test]
fn solve_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let kv = |extra: &[(&str, &str)]| {
        let mut kv = pairs(&[("nx", "32"), ("t_end", "1"), ("out", out.to_str().unwrap())]);
        kv.extend(pairs(extra));
        ExperimentConfig::from_pairs(Command::Solve, &kv)
    };
    let cfg = kv(&[("steps", "50"), ("snapshots", "3"), ("methods", "imrk4")]).unwrap();
    let report = cmd_solve(&cfg).unwrap();
    assert_eq!(report.status, RunStatus::Ok);
    assert_eq!(report.files.len(), 4);
    let last = read_snapshot(report.files.last().unwrap()).unwrap();
    assert_eq!(
        (last.problem.as_str(), last.spectrum.len(), last.blowup_step),
        ("zds", 32, None)
    );
    assert!((last.t - 1.0).abs() < 1e-12);
    let mid = read_snapshot(&report.files[1]).unwrap();
    assert!((mid.t - 0.5).abs() < 1e-12);

    let cfg = kv(&[("t_end", "40"), ("steps", "20"), ("methods", "rk4")]).unwrap();
    let report = cmd_solve(&cfg).unwrap();
    let RunStatus::Blowup { step, .. } = report.status else {
        panic!("expected blowup")
    };
    assert_eq!(
        read_snapshot(&report.files[0]).unwrap().blowup_step,
        Some(step)
    );

    assert!(matches!(kv(&[("steps", "0")]), Err(Error::Config(_))));
    let two = kv(&[("methods", "erk4, rk4")]).unwrap();
    assert!(matches!(cmd_solve(&two), Err(Error::Config(_))));
}

#[test]
fn stability_writes_grids_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = ExperimentConfig::from_pairs(
        Command::Stability,
        &pairs(&[
            ("methods", "erk4"),
            ("rho", "0, pi/2048"),
            ("grid", "12x5"),
            ("k1_range", "0:6"),
            ("out", out.to_str().unwrap()),
        ]),
    )
    .unwrap();
    let report = cmd_stability(&cfg).unwrap();
    assert_eq!(report.summaries.len(), 2 + IMEX_SWEEP_RHO.len());
    for s in &report.summaries {
        let grid =
            expstab::StabilityGrid::from_csv(&fs::read_to_string(&s.csv_path).unwrap()).unwrap();
        assert_eq!((grid.k1.len(), grid.k2.len()), (12, 5));
        assert_eq!(s.split_angle, None);
    }
    assert_eq!(report.summaries[1].rho, PI / 2048.0);
    assert!(!report.summaries[1].k2_zero_line_unstable);
    let summary = fs::read_to_string(&report.summary_path).unwrap();
    assert_eq!(summary.lines().count(), 1 + report.summaries.len());
    assert!(summary.lines().nth(3).unwrap().starts_with("IMRK4,"));
}

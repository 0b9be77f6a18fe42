//! Experiment drivers behind the CLI: convergence studies, long-time error
//! tracking, stability maps, single solves and cached reference solutions.

mod cache;
mod config;
mod record;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{integrate, IntegrationOutcome, MethodFamily, MethodSpec, RunStatus};
use crate::spectral::{build_kdv, build_zds, write_snapshot, SemilinearSpectralProblem, Snapshot};
use crate::stability::{
    critical_split_angle, default_k2_band, k2_zero_line_unstable, region_grid, RepartitionAngle,
};

pub use cache::{ReferenceCache, ReferenceKey, CACHE_ENV};
pub use config::{
    parse_angle, parse_hyperviscosity, parse_key_values, parse_repartition, Command,
    ExperimentConfig, ReferenceSpec, RunModification,
};
pub use record::{
    annotate_orders, fitted_order, longtime_to_csv, observed_order, records_to_csv, relative_error,
    LongtimeRecord, RecordStatus, RunRecord, LONGTIME_CSV_HEADER, NONCONVERGED_LIMIT,
    RUN_CSV_HEADER,
};

/// Angles of the repartitioned IMRK4 sweep in the stability command.
pub const IMEX_SWEEP_RHO: [f64; 4] = [0.0, PI / 256.0, PI / 128.0, PI / 64.0];
const SPLIT_RHO_STEP: f64 = PI / 512.0;
const SPLIT_SAMPLES: usize = 120;

/// Process exit code for an error: 2 configuration, 3 reference failure,
/// 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Reference(_) => 3,
        _ => 1,
    }
}

/// Exit code when every run of a command diverged.
pub const EXIT_ALL_BLOWUP: i32 = 4;

/// The configured benchmark and its initial spectrum.
pub fn build_base_problem(
    cfg: &ExperimentConfig,
) -> Result<(SemilinearSpectralProblem, Vec<Complex64>)> {
    match cfg.problem.as_str() {
        "zds" => build_zds(cfg.nx),
        "kdv" => build_kdv(cfg.nx, cfg.delta),
        other => Err(Error::Config(format!("unknown problem {other:?}"))),
    }
}

fn modified(
    base: &SemilinearSpectralProblem,
    modification: RunModification,
    h: f64,
) -> Result<SemilinearSpectralProblem> {
    match modification {
        RunModification::None => Ok(base.clone()),
        RunModification::Repartition(r) => base.apply_repartition(r),
        RunModification::Hyperviscosity(hv) => base.apply_hyperviscosity(hv, h),
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Times at which `longtime` compares against the reference: the steps
/// nearest to `i t_end / samples` for the coarsest step count, so every
/// finer multiple lands on them exactly.
pub fn longtime_sample_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.steps.iter().copied().min().unwrap_or(1);
    let h = cfg.t_end / n as f64;
    (1..=cfg.samples)
        .map(|i| ((i * n) as f64 / cfg.samples as f64).round() * h)
        .collect()
}

/// Comparison times of the configured command.
pub fn reference_times(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.command == Command::Longtime || (cfg.command == Command::Reference && cfg.samples > 0) {
        longtime_sample_times(cfg)
    } else {
        vec![cfg.t_end]
    }
}

pub fn reference_key(cfg: &ExperimentConfig, times: &[f64]) -> ReferenceKey {
    ReferenceKey {
        problem: cfg.problem.clone(),
        nx: cfg.nx,
        delta: (cfg.problem == "kdv").then_some(cfg.delta),
        t_end: cfg.t_end,
        times: times.to_vec(),
        method: cfg.reference.method.name().to_string(),
        steps: cfg.reference_steps(),
        repartition: cfg.reference.repartition.map(|r| r.to_string()),
    }
}

/// A reference solution at the comparison times.
#[derive(Debug, Clone)]
pub struct Reference {
    pub key: ReferenceKey,
    pub snapshots: Vec<Snapshot>,
    pub cache_hit: bool,
    pub path: PathBuf,
}

/// Load the reference from the cache or compute and publish it.
pub fn build_reference(cfg: &ExperimentConfig, cache: &ReferenceCache) -> Result<Reference> {
    let steps = cfg.reference_steps();
    let finest = cfg.steps.iter().copied().max().unwrap_or(0);
    if steps < 10 * finest {
        return Err(Error::Config(format!(
            "reference_steps = {steps} must be at least 10x the finest experiment ({finest})"
        )));
    }
    let times = reference_times(cfg);
    if times.len() > 1 {
        for &n in &cfg.steps {
            if n % cfg.steps[0] != 0 {
                return Err(Error::Config(
                    "sampled step counts must be multiples of the coarsest".into(),
                ));
            }
        }
        if steps % cfg.steps[0] != 0 {
            return Err(Error::Config(format!(
                "reference_steps = {steps} must be a multiple of the coarsest step count {}",
                cfg.steps[0]
            )));
        }
    }
    let key = reference_key(cfg, &times);
    if let Some(snapshots) = cache.load(&key)? {
        return Ok(Reference {
            path: cache.entry_dir(&key),
            key,
            snapshots,
            cache_hit: true,
        });
    }
    let (base, u0) = build_base_problem(cfg)?;
    let problem = match cfg.reference.repartition {
        Some(r) => base.apply_repartition(r)?,
        None => base,
    };
    let method = MethodSpec::new(cfg.reference.method);
    let out = integrate(&problem, &method, &u0, (0.0, cfg.t_end), steps, &times)?;
    if let RunStatus::Blowup { step, .. } = out.status {
        return Err(Error::Reference(format!(
            "{} with {steps} steps diverged at step {step}; the reference is misconfigured",
            cfg.reference.method
        )));
    }
    let snapshots: Vec<Snapshot> = out
        .samples
        .into_iter()
        .map(|s| Snapshot {
            problem: cfg.problem.clone(),
            t: s.t,
            blowup_step: None,
            spectrum: s.y,
        })
        .collect();
    let path = cache.store(&key, &snapshots)?;
    Ok(Reference {
        key,
        snapshots,
        cache_hit: false,
        path,
    })
}

/// One integration of the configured problem.
pub fn run_single(
    base: &SemilinearSpectralProblem,
    u0: &[Complex64],
    method: MethodFamily,
    modification: RunModification,
    n_steps: usize,
    t_end: f64,
    sample_times: &[f64],
) -> Result<IntegrationOutcome> {
    let h = t_end / n_steps as f64;
    let problem = modified(base, modification, h)?;
    integrate(
        &problem,
        &MethodSpec::new(method),
        u0,
        (0.0, t_end),
        n_steps,
        sample_times,
    )
}

fn run_list(cfg: &ExperimentConfig) -> Vec<(MethodFamily, RunModification, usize)> {
    let mut runs = Vec::new();
    for &m in &cfg.methods {
        for &modification in &cfg.modifications {
            for &n in &cfg.steps {
                runs.push((m, modification, n));
            }
        }
    }
    runs
}

#[derive(Debug, Clone)]
pub struct ConvergeReport {
    pub records: Vec<RunRecord>,
    pub csv_path: PathBuf,
    pub reference: Reference,
}

impl ConvergeReport {
    pub fn all_blew_up(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.status == RecordStatus::Blowup)
    }
}

/// Every (method, modification, step count) run against the reference at
/// `t_end`; writes `converge.csv` to the output directory.
pub fn cmd_converge(cfg: &ExperimentConfig, cache: &ReferenceCache) -> Result<ConvergeReport> {
    let reference = build_reference(cfg, cache)?;
    let y_ref = reference.snapshots[0].spectrum.clone();
    let (base, u0) = build_base_problem(cfg)?;
    let runs = run_list(cfg);
    let results: Vec<Result<RunRecord>> = with_pool(cfg.threads, || {
        runs.par_iter()
            .map(|&(method, modification, n)| {
                let start = Instant::now();
                let out = run_single(&base, &u0, method, modification, n, cfg.t_end, &[])?;
                let wall = start.elapsed().as_secs_f64();
                let (relative_error, status) = match out.status {
                    RunStatus::Ok => {
                        let e = relative_error(&out.y, &y_ref)?;
                        (Some(e), RecordStatus::classify(e))
                    }
                    RunStatus::Blowup { .. } => (None, RecordStatus::Blowup),
                };
                Ok(RunRecord {
                    method: method.name().to_string(),
                    modification: modification.label(),
                    n_steps: n,
                    h: cfg.t_end / n as f64,
                    relative_error,
                    wall_time_seconds: wall,
                    status,
                    observed_order: None,
                })
            })
            .collect()
    })?;
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    annotate_orders(&mut records);
    fs::create_dir_all(&cfg.out)?;
    let csv_path = cfg.out.join("converge.csv");
    write_atomic(&csv_path, &records_to_csv(&records))?;
    Ok(ConvergeReport {
        records,
        csv_path,
        reference,
    })
}

/// Error history of one long-time run.
#[derive(Debug, Clone)]
pub struct LongtimeRun {
    pub method: MethodFamily,
    pub modification: RunModification,
    pub n_steps: usize,
    pub status: RunStatus,
    pub records: Vec<LongtimeRecord>,
}

impl LongtimeRun {
    /// First sample time whose error exceeds `limit` (or that follows a
    /// blowup).
    pub fn first_exceeding(&self, limit: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.relative_error.is_none_or(|e| !(e <= limit)))
            .map(|r| r.t)
    }

    pub fn max_error(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.relative_error.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct LongtimeReport {
    pub runs: Vec<LongtimeRun>,
    pub csv_path: PathBuf,
    pub reference: Reference,
}

impl LongtimeReport {
    pub fn all_blew_up(&self) -> bool {
        self.runs.iter().all(|r| !r.status.is_ok())
    }

    pub fn find(&self, method: MethodFamily, modification: &str) -> Option<&LongtimeRun> {
        self.runs
            .iter()
            .find(|r| r.method == method && r.modification.label() == modification)
    }
}

/// Relative error at `samples` equispaced times; writes `longtime.csv`.
pub fn cmd_longtime(cfg: &ExperimentConfig, cache: &ReferenceCache) -> Result<LongtimeReport> {
    let reference = build_reference(cfg, cache)?;
    let times = longtime_sample_times(cfg);
    let (base, u0) = build_base_problem(cfg)?;
    let runs = run_list(cfg);
    let results: Vec<Result<LongtimeRun>> = with_pool(cfg.threads, || {
        runs.par_iter()
            .map(|&(method, modification, n)| {
                let out = run_single(&base, &u0, method, modification, n, cfg.t_end, &times)?;
                let last_finite = match out.status {
                    RunStatus::Blowup {
                        last_finite_time, ..
                    } => Some(last_finite_time),
                    RunStatus::Ok => None,
                };
                let mut records = Vec::with_capacity(times.len());
                for (i, r) in reference.snapshots.iter().enumerate() {
                    let sample = out.samples.iter().find(|s| s.requested == times[i]);
                    let relative_error = match sample {
                        Some(s) => Some(relative_error(&s.y, &r.spectrum)?),
                        None => None,
                    };
                    records.push(LongtimeRecord {
                        method: method.name().to_string(),
                        modification: modification.label(),
                        t: times[i],
                        relative_error,
                        last_finite_time: if relative_error.is_none() {
                            last_finite
                        } else {
                            None
                        },
                    });
                }
                Ok(LongtimeRun {
                    method,
                    modification,
                    n_steps: n,
                    status: out.status,
                    records,
                })
            })
            .collect()
    })?;
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&cfg.out)?;
    let csv_path = cfg.out.join("longtime.csv");
    let rows: Vec<LongtimeRecord> = runs
        .iter()
        .flat_map(|r| r.records.iter().cloned())
        .collect();
    write_atomic(&csv_path, &longtime_to_csv(&rows))?;
    Ok(LongtimeReport {
        runs,
        csv_path,
        reference,
    })
}

/// Summary of one stability map.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySummary {
    pub method: MethodFamily,
    pub rho: f64,
    pub k1_range: (f64, f64),
    pub k2_range: (f64, f64),
    pub unstable_fraction: f64,
    pub max_abs_r: f64,
    pub k2_zero_line_unstable: bool,
    pub split_angle: Option<f64>,
    pub csv_path: PathBuf,
}

pub const STABILITY_SUMMARY_HEADER: &str =
    "method,rho,k1_min,k1_max,k2_min,k2_max,unstable_fraction,max_abs_r,k2_zero_line_unstable,split_angle,file";

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub summaries: Vec<StabilitySummary>,
    pub summary_path: PathBuf,
}

/// Stability maps for every method and angle (plus the repartitioned IMRK4
/// sweep); writes one grid CSV each and `stability_summary.csv`.
pub fn cmd_stability(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let mut jobs: Vec<(MethodFamily, f64, String)> = Vec::new();
    for &m in &cfg.methods {
        for (i, &rho) in cfg.rho.iter().enumerate() {
            jobs.push((m, rho, format!("stability_{}_{i}.csv", m.name())));
        }
    }
    if cfg.imex_sweep {
        for (i, &rho) in IMEX_SWEEP_RHO.iter().enumerate() {
            jobs.push((
                MethodFamily::Imrk4,
                rho,
                format!("stability_IMRK4_sweep_{i}.csv"),
            ));
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let mut summaries = Vec::with_capacity(jobs.len());
    let mut split_angles: Vec<(MethodFamily, Option<f64>)> = Vec::new();
    with_pool(cfg.threads, || -> Result<()> {
        for (method, rho, file) in &jobs {
            let spec = MethodSpec::new(*method);
            let rep = RepartitionAngle::new(*rho)?;
            let k2_range = cfg.k2_range.unwrap_or_else(|| default_k2_band(*method));
            let grid = region_grid(&spec, cfg.k1_range, k2_range, cfg.grid, rep)?;
            let path = cfg.out.join(file);
            write_atomic(&path, &grid.to_csv())?;
            let split_angle = if cfg.split_scan {
                match split_angles.iter().find(|(m, _)| m == method) {
                    Some(&(_, a)) => a,
                    None => {
                        let a = critical_split_angle(
                            &spec,
                            SPLIT_RHO_STEP,
                            cfg.k1_range.1,
                            SPLIT_SAMPLES,
                        )?;
                        split_angles.push((*method, a));
                        a
                    }
                }
            } else {
                None
            };
            summaries.push(StabilitySummary {
                method: *method,
                rho: *rho,
                k1_range: cfg.k1_range,
                k2_range,
                unstable_fraction: grid.unstable_fraction(),
                max_abs_r: grid.abs_r.iter().flatten().copied().fold(0.0, f64::max),
                k2_zero_line_unstable: k2_zero_line_unstable(
                    &spec,
                    cfg.k1_range.1,
                    cfg.grid.0,
                    rep,
                )?,
                split_angle,
                csv_path: path,
            });
        }
        Ok(())
    })??;
    let mut text = String::from(STABILITY_SUMMARY_HEADER);
    text.push('\n');
    for s in &summaries {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}\n",
            s.method.name(),
            s.rho,
            s.k1_range.0,
            s.k1_range.1,
            s.k2_range.0,
            s.k2_range.1,
            s.unstable_fraction,
            s.max_abs_r,
            s.k2_zero_line_unstable,
            s.split_angle
                .map(|a| format!("{a:.16e}"))
                .unwrap_or_default(),
            s.csv_path
                .file_name()
                .and_then(|f| f.to_str())
                .unwrap_or_default()
        ));
    }
    let summary_path = cfg.out.join("stability_summary.csv");
    write_atomic(&summary_path, &text)?;
    Ok(StabilityReport {
        summaries,
        summary_path,
    })
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: RunStatus,
    pub files: Vec<PathBuf>,
}

/// One integration; writes the final spectrum and `snapshots` intermediate
/// ones at `i t_end / (snapshots + 1)`.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveReport> {
    let (&[method], &[n], &[modification]) =
        (&cfg.methods[..], &cfg.steps[..], &cfg.modifications[..])
    else {
        return Err(Error::Config(
            "solve needs exactly one method, one step count and one modification".into(),
        ));
    };
    let (base, u0) = build_base_problem(cfg)?;
    let times: Vec<f64> = (1..=cfg.snapshots)
        .map(|i| cfg.t_end * i as f64 / (cfg.snapshots + 1) as f64)
        .collect();
    let out = with_pool(cfg.threads, || {
        run_single(&base, &u0, method, modification, n, cfg.t_end, &times)
    })??;
    fs::create_dir_all(&cfg.out)?;
    let stem = format!("solve_{}_{}_{n}", cfg.problem, method.name());
    let mut files = Vec::new();
    for (i, s) in out.samples.iter().enumerate() {
        let path = cfg.out.join(format!("{stem}_{:03}.txt", i + 1));
        let snap = Snapshot {
            problem: cfg.problem.clone(),
            t: s.t,
            blowup_step: None,
            spectrum: s.y.clone(),
        };
        write_snapshot(&path, &snap)?;
        files.push(path);
    }
    let blowup_step = match out.status {
        RunStatus::Blowup { step, .. } => Some(step),
        RunStatus::Ok => None,
    };
    let path = cfg.out.join(format!("{stem}.txt"));
    write_snapshot(
        &path,
        &Snapshot {
            problem: cfg.problem.clone(),
            t: out.t,
            blowup_step,
            spectrum: out.y,
        },
    )?;
    files.push(path);
    Ok(SolveReport {
        status: out.status,
        files,
    })
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

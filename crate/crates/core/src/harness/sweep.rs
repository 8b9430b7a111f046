//! Work queue over ensemble members of many runs, with checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::{checkpoint_path, read_checkpoint, write_checkpoint, MemberCheckpoint};
use super::config::{ExperimentConfig, FloorCheck, RunSpec};
use super::output::{read_record, run_dir_for, write_json, write_run, RunRecord, SUMMARY_FILE, TIMING_FILE};
use super::HarnessError;
use crate::lyapunov::{member_run, BenettinRun, EnsembleResult};
use crate::model::Preset;

/// A plateau must exceed the Toda level at the same `(N, ε, dt)` by this.
pub const FLOOR_FACTOR: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Continue from checkpoints; otherwise unfinished runs restart.
    pub resume: bool,
    /// 0 means one worker per core.
    pub workers: usize,
    pub checkpoint_interval: Duration,
    /// Steps a worker takes between checks of clock and budget.
    pub slice_steps: u64,
    /// Total steps this call may spend across all members; the rest is
    /// left in checkpoints.
    pub step_budget: Option<u64>,
    pub floor_check: FloorCheck,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            resume: false,
            workers: 0,
            checkpoint_interval: Duration::from_secs(60),
            slice_steps: 20_000,
            step_budget: None,
            floor_check: FloorCheck::Lookup,
        }
    }
}

impl SweepOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        SweepOptions {
            workers: cfg.workers,
            checkpoint_interval: Duration::from_secs_f64(cfg.checkpoint_interval),
            floor_check: cfg.floor_check,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed(RunRecord),
    /// A matching summary already existed.
    Skipped(RunRecord),
    Interrupted { members_done: usize, members: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn record(&self) -> Option<&RunRecord> {
        match &self.status {
            RunStatus::Completed(r) | RunStatus::Skipped(r) => Some(r),
            RunStatus::Interrupted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub runs: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn interrupted(&self) -> bool {
        self.runs.iter().any(|r| matches!(r.status, RunStatus::Interrupted { .. }))
    }

    pub fn flagged(&self) -> bool {
        self.records().any(RunRecord::is_flagged)
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter_map(RunOutcome::record)
    }
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
    workers: usize,
}

struct Task {
    run: usize,
    member: usize,
    state: BenettinRun,
}

/// Runs every member of every spec, then writes each finished run.
/// Completed runs with a matching summary are skipped.
pub fn execute_runs(specs: &[RunSpec], out: &Path, opts: &SweepOptions) -> Result<SweepReport, HarnessError> {
    let start = Instant::now();
    let dirs: Vec<PathBuf> = specs.iter().map(|s| super::output::run_dir(out, s)).collect();
    let mut statuses: Vec<Option<RunStatus>> = vec![None; specs.len()];
    let mut tasks = Vec::new();
    for (ri, (spec, dir)) in specs.iter().zip(&dirs).enumerate() {
        let summary = dir.join(SUMMARY_FILE);
        if summary.exists() {
            let rec = read_record(&summary)?;
            if rec.config_hash == spec.config_hash {
                statuses[ri] = Some(RunStatus::Skipped(rec));
                continue;
            }
        }
        let ck_dir = dir.join("checkpoints");
        if !opts.resume && ck_dir.exists() {
            fs::remove_dir_all(&ck_dir).map_err(HarnessError::io(&ck_dir))?;
        }
        fs::create_dir_all(&ck_dir).map_err(HarnessError::io(&ck_dir))?;
        for member in 0..spec.ensemble.members {
            let path = checkpoint_path(dir, member);
            let state = if opts.resume && path.exists() {
                read_checkpoint(&path)?.expect(&path, &spec.config_hash, member)?.run
            } else {
                member_run(&spec.model, spec.eps, &spec.ensemble, member)?
            };
            tasks.push(Task { run: ri, member, state });
        }
    }

    let budget = opts.step_budget.map(AtomicU64::new);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let done: Vec<Result<Task, HarnessError>> = pool.install(|| {
        tasks
            .into_par_iter()
            .map(|t| drive(t, specs, &dirs, opts, budget.as_ref()))
            .collect()
    });
    let mut by_run: Vec<Vec<BenettinRun>> = vec![Vec::new(); specs.len()];
    for t in done {
        let t = t?;
        by_run[t.run].push(t.state);
    }

    let wall = Timing {
        wall_seconds: start.elapsed().as_secs_f64(),
        workers: pool.current_num_threads(),
    };
    let mut runs = Vec::with_capacity(specs.len());
    for (ri, members) in by_run.into_iter().enumerate() {
        let dir = dirs[ri].clone();
        let status = match statuses[ri].take() {
            Some(s) => s,
            None => {
                let total = members.len();
                let finished = members.iter().filter(|m| m.is_done()).count();
                if finished < total {
                    RunStatus::Interrupted {
                        members_done: finished,
                        members: total,
                    }
                } else {
                    let spec = &specs[ri];
                    let result = EnsembleResult::from_series(members.into_iter().map(BenettinRun::into_series).collect())?;
                    let record = finish_record(spec, &result, out, opts.floor_check)?;
                    write_run(&dir, spec, &result, &record)?;
                    write_json(&dir.join(TIMING_FILE), &wall)?;
                    RunStatus::Completed(record)
                }
            }
        };
        runs.push(RunOutcome { dir, status });
    }
    Ok(SweepReport { runs })
}

fn drive(
    mut task: Task,
    specs: &[RunSpec],
    dirs: &[PathBuf],
    opts: &SweepOptions,
    budget: Option<&AtomicU64>,
) -> Result<Task, HarnessError> {
    let spec = &specs[task.run];
    let path = checkpoint_path(&dirs[task.run], task.member);
    let save = |run: &BenettinRun| {
        let ck = MemberCheckpoint {
            config_hash: spec.config_hash.clone(),
            member: task.member,
            run: run.clone(),
        };
        write_checkpoint(&path, &ck)
    };
    let mut last_save = Instant::now();
    let mut dirty = !path.exists();
    while !task.state.is_done() {
        let want = opts.slice_steps.max(1).min(task.state.total_steps - task.state.step);
        let grant = match budget {
            None => want,
            Some(b) => claim(b, want),
        };
        if grant == 0 {
            break;
        }
        task.state.advance(&spec.model, grant)?;
        dirty = true;
        if last_save.elapsed() >= opts.checkpoint_interval {
            save(&task.state)?;
            last_save = Instant::now();
            dirty = false;
        }
    }
    if dirty {
        save(&task.state)?;
    }
    Ok(task)
}

/// Takes up to `want` steps from the shared budget.
fn claim(budget: &AtomicU64, want: u64) -> u64 {
    let mut grant = 0;
    let _ = budget.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |left| {
        grant = left.min(want);
        Some(left - grant)
    });
    grant
}

fn finish_record(spec: &RunSpec, result: &EnsembleResult, out: &Path, check: FloorCheck) -> Result<RunRecord, HarnessError> {
    let mut flags = spec.flags.clone();
    if !result.plateau_found {
        flags.push("no-plateau".into());
    }
    let mut floor = None;
    if check == FloorCheck::Lookup && !spec.model.is_toda() {
        let toda = run_dir_for(out, Preset::Toda.name(), spec.n(), spec.eps, spec.dt()).join(SUMMARY_FILE);
        if toda.exists() {
            floor = Some(read_record(&toda)?.level());
        }
        if result.plateau_found {
            match floor {
                Some(f) if !(result.plateau >= FLOOR_FACTOR * f) => flags.push("algorithm-limited".into()),
                Some(_) => {}
                None => flags.push("floor-unchecked".into()),
            }
        }
    }
    Ok(RunRecord::new(spec, result, floor, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::output::{ENSEMBLE_FILE, SERIES_FILE};
    use crate::lyapunov::{BenettinConfig, EnsembleConfig};
    use crate::model::ModelSpec;

    fn specs() -> Vec<RunSpec> {
        [0.02, 0.05]
            .iter()
            .map(|&eps| {
                let model = ModelSpec::named("alpha-beta", 12, 1).unwrap();
                RunSpec::explicit(model, eps, EnsembleConfig::new(BenettinConfig::default(), 3, 9, 2000.0))
            })
            .collect()
    }

    fn files(out: &Path, specs: &[RunSpec]) -> Vec<Vec<u8>> {
        specs
            .iter()
            .flat_map(|s| {
                let d = super::super::output::run_dir(out, s);
                [SERIES_FILE, ENSEMBLE_FILE, SUMMARY_FILE].map(|f| fs::read(d.join(f)).unwrap())
            })
            .collect()
    }

    #[test]
    fn budgeted_resume_matches_uninterrupted() {
        let specs = specs();
        let a = tempfile::tempdir().unwrap();
        let full = execute_runs(&specs, a.path(), &SweepOptions::default()).unwrap();
        assert!(!full.interrupted());

        let b = tempfile::tempdir().unwrap();
        let mut opts = SweepOptions {
            step_budget: Some(12_000),
            slice_steps: 1000,
            workers: 2,
            ..SweepOptions::default()
        };
        let partial = execute_runs(&specs, b.path(), &opts).unwrap();
        assert!(partial.interrupted());
        assert!(!b.path().join("alpha-beta/N12_eps2e-2_dt0.1").join(SUMMARY_FILE).exists());
        opts.resume = true;
        while execute_runs(&specs, b.path(), &opts).unwrap().interrupted() {}
        assert_eq!(files(a.path(), &specs), files(b.path(), &specs));
    }

    #[test]
    fn completed_runs_are_skipped() {
        let specs = specs();
        let dir = tempfile::tempdir().unwrap();
        let first = execute_runs(&specs, dir.path(), &SweepOptions::default()).unwrap();
        let before = files(dir.path(), &specs);
        let again = execute_runs(&specs, dir.path(), &SweepOptions::default()).unwrap();
        assert!(again.runs.iter().all(|r| matches!(r.status, RunStatus::Skipped(_))));
        assert_eq!(
            first.records().cloned().collect::<Vec<_>>(),
            again.records().cloned().collect::<Vec<_>>()
        );
        assert_eq!(files(dir.path(), &specs), before);
    }

    #[test]
    fn foreign_checkpoint_is_refused_on_resume() {
        let specs = specs();
        let dir = tempfile::tempdir().unwrap();
        let opts = SweepOptions {
            step_budget: Some(100),
            ..SweepOptions::default()
        };
        execute_runs(&specs[..1], dir.path(), &opts).unwrap();
        let mut other = specs[0].clone();
        other.config_hash = "different".into();
        let resume = SweepOptions {
            resume: true,
            ..opts
        };
        let err = execute_runs(&[other], dir.path(), &resume).unwrap_err();
        assert!(matches!(err, HarnessError::Checkpoint(_)), "{err}");
    }

    #[test]
    fn floor_guard_flags_runs_near_the_toda_level() {
        let dir = tempfile::tempdir().unwrap();
        let spec = &specs()[1];
        let rec = execute_runs(std::slice::from_ref(spec), dir.path(), &SweepOptions::default())
            .unwrap()
            .records()
            .next()
            .unwrap()
            .clone();
        let level = rec.level();
        let toda_dir = run_dir_for(dir.path(), "toda", spec.n(), spec.eps, spec.dt());
        for (toda_level, limited) in [(level / 10.0, false), (level / 2.0, true)] {
            let mut fake = rec.clone();
            fake.model = "toda".into();
            fake.plateau = Some(toda_level);
            fake.plateau_found = true;
            write_json(&toda_dir.join(SUMMARY_FILE), &fake).unwrap();
            let r = finish_record(spec, &fake_result(level), dir.path(), FloorCheck::Lookup).unwrap();
            assert_eq!(r.flags.contains(&"algorithm-limited".to_string()), limited);
            assert_eq!(r.floor, Some(toda_level));
        }
        let off = finish_record(spec, &fake_result(level), dir.path(), FloorCheck::Off).unwrap();
        assert!(off.flags.is_empty() && off.floor.is_none());
    }

    fn fake_result(level: f64) -> EnsembleResult {
        let times: Vec<f64> = (0..=30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let s = crate::lyapunov::LyapSeries {
            chi_hat: vec![level; times.len()],
            times,
            log_accum: 0.0,
            steps: 0,
        };
        EnsembleResult::from_series(vec![s.clone(), s]).unwrap()
    }
}

//! Subcommand implementations. Each returns its result and writes its
//! artifacts under the output directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;
use tnqc_core::model::{build_problem, ControlProblem, Endpoints, PulseSchedule, Task};
use tnqc_core::objective::{gradient_check, per_gate_infidelity, EnsembleObjective, GradCheckReport};
use tnqc_core::optimizer::{initial_guess, ladder_optimize, LadderCell, SeedSource};

use crate::artifacts::{
    cell_stem, ensure_dir, heatmap_csv, read_json, schedule_hash, sweep_csv, write_atomic, write_history, write_json, write_toml,
    CellSummary, Checkpoint, RunSummary, ScheduleFile, SweepRow, VerificationRecord,
};
use crate::config::{problem_fingerprint, RunConfig};
use crate::error::{CliError, CliResult};

/// Largest system accepted by `gradcheck`.
pub const GRADCHECK_MAX_N: usize = 5;
/// Bond cap used by `gradcheck`; no truncation happens below it for n <= 5.
pub const GRADCHECK_D_MAX: usize = 64;
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Settings that come from the command line rather than the config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub resume: bool,
}

pub struct Context {
    pub out: PathBuf,
    pub pool: Option<Arc<ThreadPool>>,
    pub resume: bool,
}

impl Context {
    pub fn new(cfg: &RunConfig, opts: &RunOptions) -> CliResult<Self> {
        let out = opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let pool = match opts.workers {
            None => None,
            Some(0) => return Err(CliError::Config("worker count must be at least 1".into())),
            Some(w) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| CliError::Config(format!("cannot start {w} workers: {e}")))?,
            )),
        };
        Ok(Self { out, pool, resume: opts.resume })
    }

    fn checkpoint_path(&self, cfg: &RunConfig) -> PathBuf {
        cfg.checkpoint.clone().unwrap_or_else(|| self.out.join("checkpoint.json"))
    }
}

fn gate_span(task: Task) -> Option<usize> {
    match task {
        Task::ParallelX => Some(1),
        Task::ParallelCnot => Some(2),
        _ => None,
    }
}

/// Mean infidelity of `schedule` on the verification ensemble of `problem`.
pub fn verify(problem: &ControlProblem, ends: &Endpoints, schedule: &PulseSchedule, pool: Option<Arc<ThreadPool>>) -> CliResult<VerificationRecord> {
    problem.check_schedule(schedule)?;
    let spec = problem.verification_ensemble();
    let objective = EnsembleObjective::new(problem, ends, problem.verification_samples()?)?.with_pool(pool);
    let v = objective.value(schedule)?;
    let half = v.per_sample.len() / 2;
    let mean = |s: &[f64]| if s.is_empty() { v.mean_infidelity } else { s.iter().sum::<f64>() / s.len() as f64 };
    let per_gate = match gate_span(problem.task) {
        Some(span) => Some(per_gate_infidelity(v.mean_infidelity.clamp(0.0, 1.0 - f64::EPSILON), problem.n, span)?),
        None => None,
    };
    Ok(VerificationRecord {
        delta_j: spec.delta_j,
        m: spec.m,
        seed: spec.seed,
        mean_infidelity: v.mean_infidelity,
        std_error: v.std_error(),
        half_means: [mean(&v.per_sample[..half]), mean(&v.per_sample[half..])],
        per_gate_infidelity: per_gate,
        max_discarded_weight: v.discarded_weight,
    })
}

/// Endpoints do not depend on ΔJ, so they are built once per size.
struct EndpointCache(HashMap<usize, Endpoints>);

impl EndpointCache {
    fn get(&mut self, p: &ControlProblem) -> tnqc_core::Result<Endpoints> {
        if let Some(e) = self.0.get(&p.n) {
            return Ok(e.clone());
        }
        let e = p.endpoints()?;
        self.0.insert(p.n, e.clone());
        Ok(e)
    }
}

fn load_resume(ctx: &Context, cfg: &RunConfig, fingerprint: &str) -> CliResult<Vec<LadderCell>> {
    let path = ctx.checkpoint_path(cfg);
    if !ctx.resume || !path.exists() {
        return Ok(Vec::new());
    }
    let cp: Checkpoint = read_json(&path)?;
    if cp.config_fingerprint != fingerprint {
        return Err(CliError::Config(format!("{} was written for a different configuration", path.display())));
    }
    Ok(cp.cells)
}

struct LadderRun {
    cells: Vec<LadderCell>,
    summary: RunSummary,
}

fn run_ladder(cfg: &RunConfig, ctx: &Context, command: &str) -> CliResult<LadderRun> {
    cfg.validate()?;
    let plan = cfg.plan()?;
    let fingerprint = cfg.fingerprint()?;
    let resume = load_resume(ctx, cfg, &fingerprint)?;
    ensure_dir(&ctx.out)?;
    let checkpoint_path = ctx.checkpoint_path(cfg);

    let mut cache = EndpointCache(HashMap::new());
    let mut done: Vec<LadderCell> = resume.clone();
    let cells = {
        let factory = |n: usize, dj: f64| -> tnqc_core::Result<(ControlProblem, Endpoints)> {
            let p = build_problem(cfg.task, n, dj, &cfg.overrides())?;
            let ends = cache.get(&p)?;
            Ok((p, ends))
        };
        let guess = |p: &ControlProblem, e: &Endpoints| initial_guess(p, e, &cfg.optimizer);
        let on_cell = |c: &LadderCell| -> tnqc_core::Result<()> {
            done.push(c.clone());
            let cp = Checkpoint {
                config_fingerprint: fingerprint.clone(),
                cells: done.clone(),
            };
            write_json(&checkpoint_path, &cp).map_err(|e| tnqc_core::Error::InvalidInput(e.to_string()))
        };
        ladder_optimize(&plan, factory, guess, &cfg.optimizer, ctx.pool.clone(), &resume, on_cell)?
    };

    let mut summaries = Vec::with_capacity(cells.len());
    for cell in &cells {
        let problem = cfg.problem(cell.n, cell.delta_j)?;
        let ends = cache.get(&problem)?;
        let verification = verify(&problem, &ends, &cell.schedule, ctx.pool.clone()).map_err(|e| e.context(format!("verifying n={}, ΔJ={}", cell.n, cell.delta_j)))?;
        let stem = cell_stem(cell.n, cell.delta_j);
        let schedule_file = PathBuf::from("schedules").join(format!("{stem}.json"));
        let file = ScheduleFile {
            task: cfg.task,
            n: cell.n,
            delta_j: cell.delta_j,
            time_unit: cfg.time_unit(),
            problem_fingerprint: problem_fingerprint(&problem),
            config_fingerprint: fingerprint.clone(),
            schedule_hash: schedule_hash(&cell.schedule),
            schedule: cell.schedule.clone(),
        };
        write_json(&ctx.out.join(&schedule_file), &file)?;
        write_history(&ctx.out.join("history").join(format!("{stem}.csv")), &cell.history)?;
        summaries.push(CellSummary {
            n: cell.n,
            delta_j: cell.delta_j,
            seed_source: seed_source_label(&cell.seed_source),
            flagged: cell.flagged,
            termination: cell.termination.map(|t| format!("{t:?}")).unwrap_or_else(|| "none".into()),
            iterations: cell.history.len(),
            optimization_m: problem.ensemble.m,
            optimization_seed: problem.ensemble.seed,
            optimization_infidelity: cell.value,
            verification,
            schedule_file,
            schedule_hash: file.schedule_hash,
        });
    }
    let summary = RunSummary {
        command: command.into(),
        task: cfg.task,
        config_fingerprint: fingerprint,
        seed: cfg.seed,
        cells: summaries,
    };
    write_toml(&ctx.out.join("summary.toml"), &summary)?;
    Ok(LadderRun { cells, summary })
}

fn seed_source_label(s: &SeedSource) -> String {
    match s {
        SeedSource::InitialGuess => "initial-guess".into(),
        SeedSource::SmallerSize { n } => format!("size n={n}"),
        SeedSource::SmallerError { delta_j } => format!("error ΔJ={delta_j}"),
        SeedSource::Checkpoint => "checkpoint".into(),
    }
}

/// Runs the warm-start ladder over all sizes and error magnitudes of the
/// config and verifies every cell.
pub fn optimize(cfg: &RunConfig, ctx: &Context) -> CliResult<RunSummary> {
    Ok(run_ladder(cfg, ctx, "optimize")?.summary)
}

/// Robust (ΔJ = `delta_j`) and non-robust (ΔJ = 0) schedules at every size,
/// both verified on the same ensemble at `delta_j`. Writes `sweep.csv`.
pub fn sweep(cfg: &RunConfig, ctx: &Context) -> CliResult<Vec<SweepRow>> {
    let run = run_ladder(cfg, ctx, "sweep")?;
    let mut cache = EndpointCache(HashMap::new());
    let mut rows = Vec::new();
    for n in cfg.sizes()? {
        let problem = cfg.problem(n, cfg.delta_j)?;
        let ends = cache.get(&problem)?;
        for robust in [false, true] {
            let dj = if robust { cfg.delta_j } else { 0.0 };
            let cell = run
                .cells
                .iter()
                .find(|c| c.n == n && c.delta_j == dj)
                .ok_or_else(|| CliError::Numerical(format!("ladder produced no cell for n={n}, ΔJ={dj}")))?;
            // The robust cell was already verified on this ensemble.
            let v = match run.summary.cells.iter().find(|c| robust && c.n == n && c.delta_j == dj) {
                Some(c) => c.verification.clone(),
                None => verify(&problem, &ends, &cell.schedule, ctx.pool.clone())?,
            };
            rows.push(SweepRow {
                task: cfg.task,
                n,
                delta_j: cfg.delta_j,
                robust,
                mean_infidelity: v.mean_infidelity,
                std_error: v.std_error,
                m: v.m,
                seed: v.seed,
            });
        }
    }
    write_atomic(&ctx.out.join("sweep.csv"), &sweep_csv(&rows)?)?;
    Ok(rows)
}

/// Verifies a saved schedule on the config's problem at its `delta_j`.
pub fn evaluate(cfg: &RunConfig, ctx: &Context, schedule_path: &Path) -> CliResult<VerificationRecord> {
    cfg.validate()?;
    let file = ScheduleFile::load(schedule_path)?;
    let sizes = cfg.sizes()?;
    if sizes != [file.n] {
        return Err(CliError::Config(format!("schedule is for n={}, config gives sizes {sizes:?}", file.n)));
    }
    if file.task != cfg.task {
        return Err(CliError::Config(format!("schedule is for {}, config is for {}", file.task, cfg.task)));
    }
    let problem = cfg.problem(file.n, cfg.delta_j)?;
    if problem_fingerprint(&problem) != file.problem_fingerprint {
        return Err(CliError::Config(format!(
            "{}: problem fingerprint does not match the config (different bins, duration or couplings)",
            schedule_path.display()
        )));
    }
    let ends = problem.endpoints()?;
    let record = verify(&problem, &ends, &file.schedule, ctx.pool.clone())?;
    write_toml(&ctx.out.join(format!("evaluation_{}.toml", cell_stem(file.n, cfg.delta_j))), &record)?;
    Ok(record)
}

/// Writes `heatmap_x.csv` and `heatmap_y.csv` for a saved schedule.
pub fn heatmap(schedule_path: &Path, out: &Path) -> CliResult<[PathBuf; 2]> {
    let file = ScheduleFile::load(schedule_path)?;
    let s = &file.schedule;
    let unit = file.time_unit;
    let mut paths = [out.join("heatmap_x.csv"), out.join("heatmap_y.csv")];
    for (k, path) in paths.iter_mut().enumerate() {
        let label = if k == 0 { "x" } else { "y" };
        let header = vec![
            format!("quadrature: {label}"),
            format!("task: {} n: {} delta_j: {}", file.task, file.n, file.delta_j),
            format!("rows: qubits ({}), columns: bins ({})", s.n(), s.bins()),
            "amplitude units: energy scale".to_string(),
            format!("timescale: {} = {}, bin width = {} {}", unit.label(), unit.scale(), s.dt() / unit.scale(), unit.label()),
        ];
        let rows = (0..s.n()).map(|j| if k == 0 { s.x_row(j).to_vec() } else { s.y_row(j).to_vec() });
        write_atomic(path, &heatmap_csv(&header, rows)?)?;
    }
    Ok(paths)
}

/// Analytic against central-difference gradients on a random schedule.
pub fn gradcheck(cfg: &RunConfig, ctx: &Context) -> CliResult<GradCheckReport> {
    cfg.validate()?;
    let sizes = cfg.sizes()?;
    let n = match sizes.as_slice() {
        [n] => *n,
        _ => return Err(CliError::Config("gradcheck takes a single size".into())),
    };
    if n > GRADCHECK_MAX_N {
        return Err(CliError::Config(format!("gradcheck is limited to n <= {GRADCHECK_MAX_N}, got {n}")));
    }
    if cfg.bins == Some(0) {
        return Ok(GradCheckReport {
            max_rel_error: 0.0,
            worst_index: None,
            components: 0,
        });
    }
    let mut problem = cfg.problem(n, cfg.delta_j)?;
    problem.d_max = GRADCHECK_D_MAX;
    let ends = problem.endpoints()?;
    let objective = EnsembleObjective::new(&problem, &ends, problem.samples()?)?.with_pool(ctx.pool.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params: Vec<f64> = (0..problem.schedule.num_params()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let schedule = problem.schedule.with_params(&params)?;
    Ok(gradient_check(&objective, &schedule, GRADCHECK_STEP)?)
}

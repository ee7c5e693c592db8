use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ccvm_core::bench::{
    self, BenchSettings, DensityRow, GapLevel, ParamGrid, TtsMetric, WallClock,
};
use ccvm_core::config::{parse_override, SolverConfig};
use ccvm_core::oracle;
use ccvm_core::problem::{generate_instance, load_instance, save_instance, write_atomic};
use ccvm_core::rng;
use ccvm_core::solvers::{run_batch_with, Execution};
use ccvm_core::{
    BoxQpInstance, Error, GeneratorSpec, Result, SolutionVector, SolverKind, SolverParams,
};

use crate::{
    BenchArgs, CertifyArgs, CertifyMethod, GenerateArgs, ReportArgs, SolveArgs, SolverArgs,
    SweepArgs, TuneArgs, OUT_DIR_ENV,
};

fn out_dir(explicit: Option<&Path>) -> Result<PathBuf> {
    let dir = match explicit {
        Some(d) => d.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

/// `explicit` if given, else `default_name` inside the output directory.
fn out_file(explicit: Option<&Path>, default_name: &str) -> Result<PathBuf> {
    match explicit {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            Ok(p.to_path_buf())
        }
        None => Ok(out_dir(None)?.join(default_name)),
    }
}

fn execution(args: &SolverArgs) -> Execution {
    if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

/// Parameters for `kind` from the config file and `--param` overrides.
/// An override written `solver.key=value` only applies to that solver.
fn solver_params(kind: SolverKind, args: &SolverArgs) -> Result<SolverParams> {
    let config = match &args.config {
        Some(path) => SolverConfig::load(path)?,
        None => SolverConfig::default(),
    };
    let mut overrides = Vec::new();
    for text in &args.params {
        let (key, value) = parse_override(text)?;
        match key.split_once('.') {
            Some((solver, key)) => {
                if solver.parse::<SolverKind>()? == kind {
                    overrides.push((key.to_string(), value));
                }
            }
            None => overrides.push((key, value)),
        }
    }
    config.params_for(kind, &overrides)
}

fn parse_kinds(text: &str) -> Result<Vec<SolverKind>> {
    if text == "all" {
        return Ok(SolverKind::ALL.to_vec());
    }
    let mut kinds = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<SolverKind>>>()?;
    kinds.dedup();
    Ok(kinds)
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} `{v}`")))
        })
        .collect()
}

/// `0,1,5` or `start..end` (end exclusive).
fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("bad seed list `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn fmt_vec(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let dir = out_dir(a.out_dir.as_deref())?;
    if a.count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    for seed in a.seed..a.seed + a.count {
        let spec = GeneratorSpec::new(a.n, a.density, seed);
        spec.validate()?;
        let inst = generate_instance(&spec)?;
        let path = dir.join(format!("{}.boxqp", spec.label()));
        save_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn certify(a: CertifyArgs) -> Result<()> {
    let mut inst = load_instance(&a.instance)?;
    let (solution, note) = match a.method {
        CertifyMethod::ActiveSet => {
            let exact = oracle::solve_exact(&inst, a.n_limit)?;
            let note = if exact.degenerate {
                " (degenerate free block)"
            } else {
                ""
            };
            (exact.solution, note)
        }
        CertifyMethod::Grid => (oracle::grid_search(&inst, a.resolution)?, " (grid)"),
    };
    inst.set_known_optimum(Some(solution.objective));
    let text = inst.to_text();
    let current = fs::read_to_string(&a.instance).map_err(|e| Error::Io {
        path: a.instance.clone(),
        source: e,
    })?;
    if current != text {
        write_atomic(&a.instance, text.as_bytes())?;
    }
    println!("OPT {}{note}", solution.objective);
    println!("x = {}", fmt_vec(&solution.x));
    Ok(())
}

#[derive(Serialize)]
struct TrialLine {
    seed: u64,
    objective: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SolveReport {
    instance: String,
    params: SolverParams,
    master_seed: u64,
    n_trials: usize,
    failed_trials: usize,
    optimum: Option<f64>,
    best: Option<SolutionVector>,
    best_gap_percent: Option<f64>,
    trials: Vec<TrialLine>,
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let kind: SolverKind = a.solver.parse()?;
    let params = solver_params(kind, &a.solver_args)?;
    let inst = load_instance(&a.instance)?;
    let outcomes = run_batch_with(
        &inst,
        &params,
        a.solver_args.trials,
        a.solver_args.seed,
        execution(&a.solver_args),
    )?;

    let mut best: Option<SolutionVector> = None;
    let mut first_failure = None;
    let mut trials = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        match o {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.x.objective > b.objective) {
                    best = Some(r.x.clone());
                }
                trials.push(TrialLine {
                    seed: r.seed,
                    objective: Some(r.x.objective),
                    error: None,
                });
            }
            Err(f) => {
                first_failure.get_or_insert(f.clone());
                trials.push(TrialLine {
                    seed: f.seed,
                    objective: None,
                    error: Some(f.message.clone()),
                });
            }
        }
    }
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let gap = match (&best, inst.known_optimum()) {
        (Some(b), Some(opt)) => Some(bench::gap_of(b.objective, opt)?),
        _ => None,
    };
    let report = SolveReport {
        instance: a.instance.display().to_string(),
        params,
        master_seed: a.solver_args.seed,
        n_trials: outcomes.len(),
        failed_trials: failed,
        optimum: inst.known_optimum(),
        best: best.clone(),
        best_gap_percent: gap,
        trials,
    };
    let stem = a
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let path = out_file(a.out.as_deref(), &format!("{stem}.{kind}.json"))?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;

    if 2 * failed > outcomes.len() {
        eprintln!("warning: {failed} of {} trials diverged", outcomes.len());
    }
    match best {
        Some(b) => {
            println!("best objective {}", b.objective);
            if let Some(g) = gap {
                println!("gap {g}%");
            }
            println!("x = {}", fmt_vec(&b.x));
            println!("results written to {}", path.display());
            Ok(())
        }
        None => {
            let f = first_failure.expect("no result implies a failure");
            Err(Error::Divergence {
                iteration: f.iteration.unwrap_or(0),
                message: format!("every trial failed; first: {}", f.message),
            })
        }
    }
}

/// Instances in `dir` with the `.boxqp` extension, sorted by file name.
fn instance_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "boxqp") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads certified instances, warning about and skipping the rest.
fn certified_instances(dir: &Path) -> Result<Vec<BoxQpInstance>> {
    let mut out = Vec::new();
    for path in instance_paths(dir)? {
        let inst = load_instance(&path)?;
        if inst.known_optimum().is_none() {
            eprintln!("warning: skipping uncertified instance {}", path.display());
            continue;
        }
        out.push(inst);
    }
    if out.is_empty() {
        eprintln!("warning: no certified instances in {}", dir.display());
    }
    Ok(out)
}

fn wall_clock(pinned: Option<f64>) -> WallClock {
    pinned.map_or(WallClock::Measured, WallClock::Fixed)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let kinds = parse_kinds(&a.solvers)?;
    let instances = certified_instances(&a.dir)?;
    let base = BenchSettings {
        n_trials: a.solver_args.trials,
        master_seed: a.solver_args.seed,
        gaps: GapLevel::parse_list(&a.timing.gaps)?,
        t_pulse: a.timing.t_pulse,
        wall_clock: wall_clock(a.timing.wall_time),
        execution: execution(&a.solver_args),
    };
    base.validate()?;
    let mut records = Vec::new();
    for (si, &kind) in kinds.iter().enumerate() {
        let params = solver_params(kind, &a.solver_args)?;
        for (ii, inst) in instances.iter().enumerate() {
            let settings = BenchSettings {
                master_seed: rng::child_seed(
                    rng::child_seed(base.master_seed, si as u64),
                    ii as u64,
                ),
                ..base.clone()
            };
            let recs = bench::benchmark_instance(inst, &params, &settings)?;
            if 2 * recs[0].failed_trials > recs[0].n_trials {
                eprintln!(
                    "warning: {kind} diverged in {} of {} trials on {}",
                    recs[0].failed_trials, recs[0].n_trials, recs[0].instance_label
                );
            }
            for r in &recs {
                println!(
                    "{} {} gap {}%: p_s {} r99 {}",
                    kind,
                    r.instance_label,
                    r.gap_percent,
                    r.success_probability,
                    bench::fmt_num(r.r99)
                );
            }
            records.extend(recs);
        }
    }
    let dir = out_dir(a.out.as_deref())?;
    write_atomic(
        &dir.join("records.jsonl"),
        bench::records_to_jsonl(&records).as_bytes(),
    )?;
    write_atomic(
        &dir.join("records.csv"),
        bench::records_csv(&records).as_bytes(),
    )?;
    println!("{} records written to {}", records.len(), dir.display());
    Ok(())
}

fn parse_grid(axes: &[String]) -> Result<ParamGrid> {
    let mut grid = ParamGrid::new();
    for text in axes {
        let (key, values) = ParamGrid::parse_axis(text)?;
        grid = grid.axis(key, values);
    }
    Ok(grid)
}

fn describe(params: &SolverParams) -> String {
    params
        .entries()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let kind: SolverKind = a.solver.parse()?;
    let base = solver_params(kind, &a.solver_args)?;
    let densities = parse_reals(&a.densities, "density")?;
    let seeds = parse_seeds(&a.seeds)?;
    let gap = GapLevel::new(a.gap)?;
    let grid = parse_grid(&a.grid)?;
    let settings = BenchSettings {
        n_trials: a.solver_args.trials,
        master_seed: a.solver_args.seed,
        gaps: vec![gap],
        t_pulse: a.t_pulse,
        wall_clock: wall_clock(a.wall_time),
        execution: execution(&a.solver_args),
    };
    settings.validate()?;
    let rows: Vec<DensityRow> =
        bench::density_sweep(a.n, &densities, &seeds, gap, &settings, |density| {
            if grid.axes.is_empty() {
                return Ok(base);
            }
            let instances = seeds
                .iter()
                .map(|&s| bench::certified_instance(&GeneratorSpec::new(a.n, density, s)))
                .collect::<Result<Vec<_>>>()?;
            let tuned = bench::grid_tune(
                &instances,
                &base,
                &grid,
                gap,
                a.tune_trials,
                a.solver_args.seed,
                settings.execution,
            )?;
            println!("density {density}: tuned {}", describe(&tuned.best));
            Ok(tuned.best)
        })?;
    for (density, med) in bench::density_medians(&rows, TtsMetric::Machine) {
        match med {
            Some(m) => println!("density {density}: median machine TTS {m} s"),
            None => println!("density {density}: no instance solved"),
        }
    }
    let path = out_file(a.out.as_deref(), "sweep.csv")?;
    write_atomic(&path, bench::density_csv(&rows).as_bytes())?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

pub fn tune(a: TuneArgs) -> Result<()> {
    let kind: SolverKind = a.solver.parse()?;
    let base = solver_params(kind, &a.solver_args)?;
    let grid = parse_grid(&a.grid)?;
    let instances = certified_instances(&a.dir)?;
    if instances.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no certified instances in {}",
            a.dir.display()
        )));
    }
    let result = bench::grid_tune(
        &instances,
        &base,
        &grid,
        GapLevel::new(a.gap)?,
        a.solver_args.trials,
        a.solver_args.seed,
        execution(&a.solver_args),
    )?;
    for (i, score) in result.scores.iter().enumerate() {
        let point: Vec<String> = grid
            .point(i)
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let mark = if i == result.best_index { " *" } else { "" };
        println!("{} mean p_s {score}{mark}", point.join(" "));
    }
    let mut toml = format!("[{kind}]\n");
    for (k, v) in result.best.entries() {
        if k == "readout" {
            let _ = writeln!(toml, "{k} = \"{v}\"");
        } else {
            let _ = writeln!(toml, "{k} = {v}");
        }
    }
    match a.out {
        Some(path) => {
            let path = out_file(Some(&path), "")?;
            write_atomic(&path, toml.as_bytes())?;
            println!("config written to {}", path.display());
        }
        None => print!("{toml}"),
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    let metric: TtsMetric = a.metric.parse()?;
    let text = fs::read_to_string(&a.records).map_err(|e| Error::Io {
        path: a.records.clone(),
        source: e,
    })?;
    let records = bench::records_from_jsonl(&text)?;
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} holds no records",
            a.records.display()
        )));
    }
    let curves = bench::aggregate_all(&records, metric)?;
    let csv = bench::aggregate_csv(&curves);
    let path = out_file(a.out.as_deref(), "aggregate.csv")?;
    write_atomic(&path, csv.as_bytes())?;
    for c in &curves {
        for p in &c.points {
            match p.median {
                Some(m) => println!(
                    "{} N={} gap {}%: median {m} s, solved {}/{}",
                    c.solver, p.n, c.gap_percent, p.solved, p.total
                ),
                None => println!(
                    "{} N={} gap {}%: no instance solved",
                    c.solver, p.n, c.gap_percent
                ),
            }
        }
    }
    println!("aggregate written to {}", path.display());
    Ok(())
}

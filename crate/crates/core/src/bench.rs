//! Success probability, R99 and time-to-solution.
//!
//! A trial succeeds at gap `g` when its objective is within `g` percent of
//! the certified optimum. From the per-instance success probability `P_s`,
//! `R99 = log(0.01)/log(1 − P_s)` trials give 99% confidence of at least one
//! success, and the time-to-solution is `R99` times the cost of one trial:
//! either measured wall time on this machine or the optical estimate
//! `n_iter · N · T_pulse`.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::problem::{generate_instance, BoxQpInstance, GeneratorSpec};
use crate::rng;
use crate::solvers::{run_batch_timed, Execution, SolverKind, SolverParams, TrialOutcome};

/// Pulse spacing used by the physical time estimate, in seconds.
pub const DEFAULT_T_PULSE: f64 = 10e-12;
/// Optima with magnitude at or below this use the absolute gap rule.
pub const ZERO_OPTIMUM_EPS: f64 = 1e-9;
/// Scale of the absolute gap rule: `gap = 100·(optimum − found)/ZERO_OPTIMUM_SCALE`.
pub const ZERO_OPTIMUM_SCALE: f64 = 1.0;
pub const DEFAULT_GAPS: [f64; 3] = [0.1, 1.0, 5.0];

/// A relative-gap threshold in percent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GapLevel(f64);

impl GapLevel {
    pub fn new(percent: f64) -> Result<Self> {
        if percent > 0.0 && percent.is_finite() {
            Ok(Self(percent))
        } else {
            Err(Error::invalid(format!(
                "gap must be a positive percentage, got {percent}"
            )))
        }
    }

    pub fn percent(self) -> f64 {
        self.0
    }

    /// Parses a comma-separated list such as `0.1,1,5`.
    pub fn parse_list(text: &str) -> Result<Vec<GapLevel>> {
        let gaps = text
            .split(',')
            .map(|part| part.trim().parse())
            .collect::<Result<Vec<GapLevel>>>()?;
        if gaps.is_empty() {
            return Err(Error::invalid("empty gap list"));
        }
        Ok(gaps)
    }
}

impl TryFrom<f64> for GapLevel {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        GapLevel::new(v)
    }
}

impl From<GapLevel> for f64 {
    fn from(g: GapLevel) -> f64 {
        g.0
    }
}

impl FromStr for GapLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim_end_matches('%')
            .parse()
            .map_err(|_| Error::invalid(format!("bad gap `{s}`")))?;
        GapLevel::new(v)
    }
}

impl fmt::Display for GapLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relative shortfall of `found` from `optimum` in percent.
///
/// Errors with [`Error::OptimumViolation`] when `found` beats the optimum by
/// more than `1e-9` (relative, or absolute near zero).
pub fn gap_of(found: f64, optimum: f64) -> Result<f64> {
    let scale = if optimum.abs() > ZERO_OPTIMUM_EPS {
        optimum.abs()
    } else {
        ZERO_OPTIMUM_SCALE
    };
    let gap = (optimum - found) / scale;
    if gap < -1e-9 || !gap.is_finite() {
        return Err(Error::OptimumViolation { found, optimum });
    }
    Ok(100.0 * gap.max(0.0))
}

/// Fraction of objectives within `gap` of `optimum`.
pub fn success_fraction(objectives: &[f64], optimum: f64, gap: GapLevel) -> Result<f64> {
    if objectives.is_empty() {
        return Err(Error::invalid("no trials to score"));
    }
    let mut hits = 0usize;
    for &f in objectives {
        if gap_of(f, optimum)? <= gap.percent() {
            hits += 1;
        }
    }
    Ok(hits as f64 / objectives.len() as f64)
}

/// Like [`success_fraction`]; failed trials count as misses.
pub fn success_probability(results: &[TrialOutcome], optimum: f64, gap: GapLevel) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("no trials to score"));
    }
    let mut hits = 0usize;
    for r in results.iter().flatten() {
        if gap_of(r.x.objective, optimum)? <= gap.percent() {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

/// Trials needed for 99% confidence: 1 when `p_s ≥ 0.99`, infinite when `p_s = 0`.
pub fn r99(p_s: f64) -> f64 {
    if p_s >= 0.99 {
        1.0
    } else if !(p_s > 0.0) {
        f64::INFINITY
    } else {
        0.01f64.ln() / (1.0 - p_s).ln()
    }
}

/// `r99(p_s) · n_iter · n · t_pulse` seconds.
///
/// The product is formed in picoseconds, where pulse spacings such as 10 ps
/// are whole numbers, so it is exact before the final scaling.
pub fn physical_tts(n_iter: usize, n: usize, t_pulse: f64, p_s: f64) -> f64 {
    let picoseconds = n_iter as f64 * n as f64 * (t_pulse * 1e12);
    r99(p_s) * (picoseconds / 1e12)
}

/// `r99(p_s) · wall_time_per_trial` seconds.
pub fn machine_tts(wall_time_per_trial: f64, p_s: f64) -> f64 {
    r99(p_s) * wall_time_per_trial
}

/// Percentile of sorted data by linear interpolation between order
/// statistics at rank `q·(n − 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile(&sorted, 0.5)
}

/// Serializes infinite values as the string `"inf"`.
mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {t}"
            ))),
        }
    }
}

/// Writes a float for CSV output; infinity becomes `inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Benchmark outcome for one instance, solver and gap level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub instance_label: String,
    pub solver: SolverKind,
    pub n: usize,
    pub density: Option<f64>,
    pub seed: Option<u64>,
    pub optimum: f64,
    pub gap_percent: f64,
    pub success_probability: f64,
    #[serde(with = "inf_as_string")]
    pub r99: f64,
    #[serde(with = "inf_as_string")]
    pub machine_tts_seconds: f64,
    #[serde(with = "inf_as_string")]
    pub physical_tts_seconds: f64,
    pub n_trials: usize,
    pub failed_trials: usize,
    pub n_iter: usize,
    pub wall_time_per_trial_seconds: f64,
    pub t_pulse_seconds: f64,
    pub best_objective: Option<f64>,
}

/// Source of the per-trial time used for machine TTS.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WallClock {
    /// Median measured wall time over the batch.
    #[default]
    Measured,
    /// A fixed per-trial time in seconds, for reproducible output.
    Fixed(f64),
}

/// Settings shared by every benchmarked instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub n_trials: usize,
    pub master_seed: u64,
    pub gaps: Vec<GapLevel>,
    pub t_pulse: f64,
    pub wall_clock: WallClock,
    pub execution: Execution,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            master_seed: 0,
            gaps: DEFAULT_GAPS.iter().map(|&g| GapLevel(g)).collect(),
            t_pulse: DEFAULT_T_PULSE,
            wall_clock: WallClock::Measured,
            execution: Execution::Parallel,
        }
    }
}

impl BenchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.gaps.is_empty() {
            return Err(Error::invalid("at least one gap level is required"));
        }
        if !(self.t_pulse > 0.0 && self.t_pulse.is_finite()) {
            return Err(Error::invalid(format!(
                "t_pulse must be positive, got {}",
                self.t_pulse
            )));
        }
        if let WallClock::Fixed(w) = self.wall_clock {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "fixed wall time must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Label used in records: `N-D-S` when known, else `N<n>`.
pub fn instance_label(inst: &BoxQpInstance) -> String {
    inst.label().unwrap_or_else(|| format!("N{}", inst.n()))
}

/// Runs one batch on a certified instance and scores it at every gap level.
pub fn benchmark_instance(
    inst: &BoxQpInstance,
    params: &SolverParams,
    settings: &BenchSettings,
) -> Result<Vec<BenchmarkRecord>> {
    settings.validate()?;
    let optimum = inst.known_optimum().ok_or_else(|| {
        Error::invalid(format!(
            "instance {} has no certified optimum",
            instance_label(inst)
        ))
    })?;
    let timed = run_batch_timed(
        inst,
        params,
        settings.n_trials,
        settings.master_seed,
        settings.execution,
    )?;
    let wall = match settings.wall_clock {
        WallClock::Measured => {
            median(&timed.iter().map(|(_, w)| *w).collect::<Vec<_>>()).unwrap_or(0.0)
        }
        WallClock::Fixed(w) => w,
    };
    let outcomes: Vec<TrialOutcome> = timed.into_iter().map(|(o, _)| o).collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let best = outcomes
        .iter()
        .flatten()
        .map(|r| r.x.objective)
        .fold(None, |acc: Option<f64>, f| {
            Some(acc.map_or(f, |a| a.max(f)))
        });
    let mut records = Vec::with_capacity(settings.gaps.len());
    for &gap in &settings.gaps {
        let p_s = success_probability(&outcomes, optimum, gap)?;
        records.push(BenchmarkRecord {
            instance_label: instance_label(inst),
            solver: params.kind(),
            n: inst.n(),
            density: inst.density(),
            seed: inst.seed(),
            optimum,
            gap_percent: gap.percent(),
            success_probability: p_s,
            r99: r99(p_s),
            machine_tts_seconds: machine_tts(wall, p_s),
            physical_tts_seconds: physical_tts(params.n_iter(), inst.n(), settings.t_pulse, p_s),
            n_trials: settings.n_trials,
            failed_trials: failed,
            n_iter: params.n_iter(),
            wall_time_per_trial_seconds: wall,
            t_pulse_seconds: settings.t_pulse,
            best_objective: best,
        });
    }
    Ok(records)
}

pub const RECORD_CSV_HEADER: &str =
    "solver,N,density,seed,gap_percent,p_s,r99,machine_tts_s,physical_tts_s";

/// Flat CSV, one line per record.
pub fn records_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::from(RECORD_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.n,
            r.density.map(fmt_num).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt_num(r.gap_percent),
            fmt_num(r.success_probability),
            fmt_num(r.r99),
            fmt_num(r.machine_tts_seconds),
            fmt_num(r.physical_tts_seconds),
        );
    }
    out
}

/// One JSON object per line.
pub fn records_to_jsonl(records: &[BenchmarkRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<BenchmarkRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Which time-to-solution an aggregate summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtsMetric {
    #[default]
    Physical,
    Machine,
}

impl TtsMetric {
    fn of(self, r: &BenchmarkRecord) -> f64 {
        match self {
            TtsMetric::Physical => r.physical_tts_seconds,
            TtsMetric::Machine => r.machine_tts_seconds,
        }
    }
}

impl FromStr for TtsMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(TtsMetric::Physical),
            "machine" => Ok(TtsMetric::Machine),
            other => Err(Error::invalid(format!(
                "unknown metric `{other}` (expected physical or machine)"
            ))),
        }
    }
}

/// Median and interquartile range of the TTS over solved instances of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub n: usize,
    /// `None` when no instance of this size was solved.
    pub median: Option<f64>,
    pub p25: Option<f64>,
    pub p75: Option<f64>,
    pub solved: usize,
    pub total: usize,
}

impl AggregatePoint {
    pub fn solved_fraction(&self) -> f64 {
        self.solved as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub solver: SolverKind,
    pub gap_percent: f64,
    pub metric: TtsMetric,
    /// Sorted by `n`.
    pub points: Vec<AggregatePoint>,
}

/// Groups records of one solver at one gap by `N`. Unsolved instances
/// (infinite TTS) count toward `total` but not the percentiles.
pub fn aggregate(
    records: &[BenchmarkRecord],
    solver: SolverKind,
    gap: GapLevel,
    metric: TtsMetric,
) -> Result<AggregateCurve> {
    let mut groups: std::collections::BTreeMap<usize, (Vec<f64>, usize)> = Default::default();
    for r in records {
        if r.solver != solver || r.gap_percent != gap.percent() {
            continue;
        }
        let entry = groups.entry(r.n).or_default();
        entry.1 += 1;
        let tts = metric.of(r);
        if tts.is_finite() {
            entry.0.push(tts);
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid(format!(
            "no records for {solver} at gap {gap}%"
        )));
    }
    let points = groups
        .into_iter()
        .map(|(n, (mut values, total))| {
            values.sort_by(f64::total_cmp);
            AggregatePoint {
                n,
                median: percentile(&values, 0.5),
                p25: percentile(&values, 0.25),
                p75: percentile(&values, 0.75),
                solved: values.len(),
                total,
            }
        })
        .collect();
    Ok(AggregateCurve {
        solver,
        gap_percent: gap.percent(),
        metric,
        points,
    })
}

/// Aggregates every (solver, gap) pair present, in sorted order.
pub fn aggregate_all(
    records: &[BenchmarkRecord],
    metric: TtsMetric,
) -> Result<Vec<AggregateCurve>> {
    let mut keys: Vec<(SolverKind, f64)> =
        records.iter().map(|r| (r.solver, r.gap_percent)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(solver, gap)| aggregate(records, solver, GapLevel::new(gap)?, metric))
        .collect()
}

pub const AGGREGATE_CSV_HEADER: &str =
    "solver,metric,N,gap,median_tts,p25,p75,solved_fraction,note";

pub fn aggregate_csv(curves: &[AggregateCurve]) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for c in curves {
        let metric = match c.metric {
            TtsMetric::Physical => "physical",
            TtsMetric::Machine => "machine",
        };
        for p in &c.points {
            let note = if p.median.is_none() {
                "no instance solved"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.solver,
                metric,
                p.n,
                fmt_num(c.gap_percent),
                opt(p.median),
                opt(p.p25),
                opt(p.p75),
                fmt_num(p.solved_fraction()),
                note
            );
        }
    }
    out
}

/// Generates and certifies an instance with the exact oracle.
pub fn certified_instance(spec: &GeneratorSpec) -> Result<BoxQpInstance> {
    let mut inst = generate_instance(spec)?;
    let exact = oracle::solve_exact(&inst, oracle::DEFAULT_N_LIMIT)?;
    inst.set_known_optimum(Some(exact.solution.objective));
    Ok(inst)
}

/// Per-instance row of a density sweep at a single gap level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub density: f64,
    pub seed: u64,
    pub optimum: f64,
    pub p_s: f64,
    #[serde(with = "inf_as_string")]
    pub r99: f64,
    #[serde(with = "inf_as_string")]
    pub machine_tts_s: f64,
    #[serde(with = "inf_as_string")]
    pub physical_tts_s: f64,
}

/// Benchmarks generated instances `n-d-s` for every density `d` and seed `s`
/// at one gap level. Parameters may differ per density; `params_for` returns
/// them. Trial seeds derive from `settings.master_seed` and the row index.
pub fn density_sweep(
    n: usize,
    densities: &[f64],
    seeds: &[u64],
    gap: GapLevel,
    settings: &BenchSettings,
    mut params_for: impl FnMut(f64) -> Result<SolverParams>,
) -> Result<Vec<DensityRow>> {
    if densities.is_empty() || seeds.is_empty() {
        return Err(Error::invalid(
            "density sweep needs at least one density and one seed",
        ));
    }
    let mut rows = Vec::with_capacity(densities.len() * seeds.len());
    for &density in densities {
        let params = params_for(density)?;
        for &seed in seeds {
            let inst = certified_instance(&GeneratorSpec::new(n, density, seed))?;
            let local = BenchSettings {
                gaps: vec![gap],
                master_seed: rng::child_seed(settings.master_seed, rows.len() as u64),
                ..settings.clone()
            };
            let r = benchmark_instance(&inst, &params, &local)?.remove(0);
            rows.push(DensityRow {
                density,
                seed,
                optimum: r.optimum,
                p_s: r.success_probability,
                r99: r.r99,
                machine_tts_s: r.machine_tts_seconds,
                physical_tts_s: r.physical_tts_seconds,
            });
        }
    }
    Ok(rows)
}

pub const DENSITY_CSV_HEADER: &str = "density,seed,optimum,p_s,r99,machine_tts_s,physical_tts_s";

pub fn density_csv(rows: &[DensityRow]) -> String {
    let mut out = String::from(DENSITY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.density),
            r.seed,
            fmt_num(r.optimum),
            fmt_num(r.p_s),
            fmt_num(r.r99),
            fmt_num(r.machine_tts_s),
            fmt_num(r.physical_tts_s)
        );
    }
    out
}

/// Median finite TTS per density, `None` for densities with nothing solved.
pub fn density_medians(rows: &[DensityRow], metric: TtsMetric) -> Vec<(f64, Option<f64>)> {
    let mut densities: Vec<f64> = rows.iter().map(|r| r.density).collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    densities
        .into_iter()
        .map(|d| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.density == d)
                .map(|r| match metric {
                    TtsMetric::Physical => r.physical_tts_s,
                    TtsMetric::Machine => r.machine_tts_s,
                })
                .filter(|v| v.is_finite())
                .collect();
            (d, median(&values))
        })
        .collect()
}

/// Cartesian grid over named solver parameters. Points are enumerated with
/// the first axis varying slowest, in the order values were given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<f64>)>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(mut self, key: impl Into<String>, values: Vec<f64>) -> Self {
        self.axes.push((key.into(), values));
        self
    }

    /// Parses `key=v1,v2,...`.
    pub fn parse_axis(text: &str) -> Result<(String, Vec<f64>)> {
        let (key, values) = text
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("grid axis `{text}` is not key=v1,v2,...")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad grid value `{v}` for {key}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((key.trim().to_string(), values))
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `index` as `(key, value)` pairs.
    pub fn point(&self, index: usize) -> Vec<(String, f64)> {
        let mut rest = index;
        let mut out = vec![(String::new(), 0.0); self.axes.len()];
        for (slot, (key, values)) in out.iter_mut().zip(&self.axes).rev() {
            *slot = (key.clone(), values[rest % values.len()]);
            rest /= values.len();
        }
        out
    }

    /// `base` with grid point `index` applied.
    pub fn params_at(&self, base: &SolverParams, index: usize) -> Result<SolverParams> {
        let mut p = *base;
        for (key, value) in self.point(index) {
            p.set(&key, value)?;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: SolverParams,
    pub best_index: usize,
    /// Mean success probability of every grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Picks the grid point with the highest mean success probability at `gap`
/// over certified instances. Ties go to the earliest grid point. Every
/// point sees the same trial seeds.
pub fn grid_tune(
    instances: &[BoxQpInstance],
    base: &SolverParams,
    grid: &ParamGrid,
    gap: GapLevel,
    n_trials: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::invalid("parameter grid is empty"));
    }
    if instances.is_empty() {
        return Err(Error::invalid("tuning needs at least one instance"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, SolverParams)> = None;
    for index in 0..grid.len() {
        let params = grid.params_at(base, index)?;
        let mut total = 0.0;
        for (i, inst) in instances.iter().enumerate() {
            let optimum = inst.known_optimum().ok_or_else(|| {
                Error::invalid(format!(
                    "instance {} has no certified optimum",
                    instance_label(inst)
                ))
            })?;
            let seed = rng::child_seed(master_seed, i as u64);
            let outcomes: Vec<TrialOutcome> =
                run_batch_timed(inst, &params, n_trials, seed, execution)?
                    .into_iter()
                    .map(|(o, _)| o)
                    .collect();
            total += success_probability(&outcomes, optimum, gap)?;
        }
        let score = total / instances.len() as f64;
        scores.push(score);
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((index, score, params));
        }
    }
    let (best_index, _, best) = best.expect("grid has at least one point");
    Ok(TuneResult {
        best,
        best_index,
        scores,
    })
}

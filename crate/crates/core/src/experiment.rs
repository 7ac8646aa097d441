//! Seeded Monte-Carlo experiments over one sweep axis, with CSV/JSON output.

use crate::channel::{generate_scenario, ScenarioGeometry};
use crate::model::{harvested_energy, Mode, ScenarioParams};
use crate::optimizer::{
    compare_variants, run_variant, OptimizerError, OptimizerSettings, RunTrace, Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    /// Energy target in J, applied to every pair.
    EMin(Vec<f64>),
    K(Vec<usize>),
    /// Relay antennas or IRS elements, following the scenario mode.
    M(Vec<usize>),
    N(Vec<usize>),
    Variant(Vec<Variant>),
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::EMin(_) => "e_min",
            Sweep::K(_) => "k",
            Sweep::M(_) => "m",
            Sweep::N(_) => "n",
            Sweep::Variant(_) => "variant",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::EMin(v) => v.len(),
            Sweep::K(v) | Sweep::M(v) | Sweep::N(v) => v.len(),
            Sweep::Variant(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Text form of the i-th sweep value as it appears in the outputs.
    pub fn label(&self, i: usize) -> String {
        match self {
            Sweep::EMin(v) => format!("{:e}", v[i]),
            Sweep::K(v) | Sweep::M(v) | Sweep::N(v) => v[i].to_string(),
            Sweep::Variant(v) => v[i].name().to_string(),
        }
    }

    /// Scenario with the i-th value applied.
    fn apply(&self, base: &ScenarioParams, i: usize) -> ScenarioParams {
        let mut p = base.clone();
        match self {
            Sweep::EMin(v) => p.e_min = v[i],
            Sweep::K(v) => p.k = v[i],
            Sweep::M(v) => p.m = v[i],
            Sweep::N(v) => p.n = v[i],
            Sweep::Variant(_) => {}
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub geometry: ScenarioGeometry,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    pub outputs: PathBuf,
    #[serde(default)]
    pub emit: Emit,
    /// Variant run on every row unless the sweep axis is the variant.
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    /// Fill the `ms` column and trace timings. Off by default so reruns are
    /// byte-identical.
    #[serde(default)]
    pub emit_timing: bool,
    /// Write one trace JSON per row under `outputs/traces`.
    #[serde(default)]
    pub traces: bool,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("no result rows to emit")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ExperimentSpec {
    /// Desk profile: K=3, N=4, M=4, seeds 0..5, full variant, E_min sweep.
    pub fn desk(mode: Mode) -> Self {
        let base = ScenarioParams::desk(mode).e_min;
        ExperimentSpec {
            scenario: ScenarioParams::desk(mode),
            geometry: ScenarioGeometry::default(),
            sweep: Sweep::EMin(vec![0.25 * base, 0.5 * base, base, 2.0 * base]),
            seeds: (0..5).collect(),
            outputs: PathBuf::from("results"),
            emit: Emit::Both,
            variant: Variant::Full,
            optimizer: OptimizerSettings::default(),
            emit_timing: false,
            traces: false,
        }
    }

    /// Full-scale scenario (K=5, N=8, M=6). Long running.
    pub fn full_scale(mode: Mode) -> Self {
        ExperimentSpec {
            scenario: ScenarioParams::full_scale(mode),
            sweep: Sweep::EMin(vec![1e-6, 1e-5, 1e-4]),
            ..Self::desk(mode)
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|source| ExperimentError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Spec(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.sweep.is_empty() {
            return bad(format!("sweep over {} has no values", self.sweep.axis()));
        }
        self.geometry
            .validate()
            .map_err(|e| ExperimentError::Spec(e.to_string()))?;
        for i in 0..self.sweep.len() {
            self.sweep
                .apply(&self.scenario, i)
                .to_config()
                .map_err(|e| {
                    ExperimentError::Spec(format!(
                        "{} = {}: {e}",
                        self.sweep.axis(),
                        self.sweep.label(i)
                    ))
                })?;
        }
        let variants = match &self.sweep {
            Sweep::Variant(v) => v.clone(),
            _ => vec![self.variant],
        };
        for (i, v) in variants.iter().enumerate() {
            if variants[..i].contains(v) {
                return bad(format!("variant {} listed twice", v.name()));
            }
            if *v == Variant::TFStatic && self.scenario.mode == Mode::ActiveIrs {
                return bad("t_f_static is only defined for the relay".into());
            }
        }
        if !(self.optimizer.eps_inner > 0.0 && self.optimizer.eps_outer > 0.0) {
            return bad("optimizer tolerances must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// No feasible starting design was found.
    Infeasible,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: String,
    pub seed: u64,
    pub status: RowStatus,
    pub min_rate: Option<f64>,
    pub tau: Option<f64>,
    pub energies: Vec<f64>,
    pub iters: usize,
    pub ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep: String,
    pub seeds: usize,
    pub feasible: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation over sqrt(count); needs two feasible seeds.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultTable {
    pub axis: String,
    pub rows: Vec<ResultRow>,
    #[serde(skip)]
    pub traces: Vec<Option<RunTrace>>,
}

impl ResultTable {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.sweep.as_str()) {
                labels.push(&r.sweep);
            }
        }
        labels
            .into_iter()
            .map(|l| {
                let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.sweep == l).collect();
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.min_rate).collect();
                let n = vals.len();
                let mean = (n > 0).then(|| vals.iter().sum::<f64>() / n as f64);
                let stderr = mean.filter(|_| n > 1).map(|m| {
                    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
                    (var / n as f64).sqrt()
                });
                Aggregate {
                    sweep: l.to_string(),
                    seeds: rows.len(),
                    feasible: n,
                    mean,
                    stderr,
                }
            })
            .collect()
    }

    pub fn count(&self, status: RowStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }
}

fn row_from(
    sweep: String,
    seed: u64,
    res: Result<(RunTrace, Vec<f64>), OptimizerError>,
    ms: f64,
    timing: bool,
) -> (ResultRow, Option<RunTrace>) {
    match res {
        Ok((mut trace, energies)) => {
            if !timing {
                for o in &mut trace.outer {
                    o.wall_ms = 0.0;
                    o.matrices.wall_ms = 0.0;
                    o.waveforms.wall_ms = 0.0;
                }
            }
            let tau = trace.outer.last().map_or(trace.initial_tau, |o| o.tau);
            let row = ResultRow {
                sweep,
                seed,
                status: RowStatus::Ok,
                min_rate: Some(trace.final_min_rate()),
                tau: Some(tau),
                energies,
                iters: trace.outer.len(),
                ms: timing.then_some(ms),
                message: None,
            };
            (row, Some(trace))
        }
        Err(e) => {
            let status = match e {
                OptimizerError::InitInfeasible(_) => RowStatus::Infeasible,
                _ => RowStatus::Error,
            };
            let row = ResultRow {
                sweep,
                seed,
                status,
                min_rate: None,
                tau: None,
                energies: Vec::new(),
                iters: 0,
                ms: timing.then_some(ms),
                message: Some(e.to_string()),
            };
            (row, None)
        }
    }
}

/// Runs every (sweep value, seed) pair. Rows come back in sweep-major, seed
/// order whatever the completion order. A variant sweep runs all variants of
/// one seed together so that they share channels and warm starts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    spec.validate()?;
    let timing = spec.emit_timing;
    let mut out: Vec<(usize, usize, ResultRow, Option<RunTrace>)> = match &spec.sweep {
        Sweep::Variant(variants) => {
            let cfg = spec
                .scenario
                .to_config()
                .map_err(|e| ExperimentError::Spec(e.to_string()))?;
            spec.seeds
                .par_iter()
                .enumerate()
                .flat_map_iter(|(j, &seed)| {
                    let ch = generate_scenario(&cfg, &spec.geometry, seed);
                    let start = Instant::now();
                    let runs = compare_variants(&ch, &cfg, &spec.optimizer, variants);
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    runs.into_iter()
                        .enumerate()
                        .map(|(i, (v, r))| {
                            let res = r.map(|run| {
                                let e = (0..cfg.k)
                                    .map(|k| harvested_energy(&run.design, &ch, &cfg, k))
                                    .collect();
                                (run.trace, e)
                            });
                            let (row, tr) = row_from(v.name().to_string(), seed, res, ms, timing);
                            (i, j, row, tr)
                        })
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        sweep => {
            let jobs: Vec<(usize, usize)> = (0..sweep.len())
                .flat_map(|i| (0..spec.seeds.len()).map(move |j| (i, j)))
                .collect();
            jobs.par_iter()
                .map(|&(i, j)| {
                    let seed = spec.seeds[j];
                    let params = sweep.apply(&spec.scenario, i);
                    let cfg = params.to_config().expect("validated");
                    let ch = generate_scenario(&cfg, &spec.geometry, seed);
                    let settings = OptimizerSettings {
                        variant: spec.variant,
                        ..spec.optimizer
                    };
                    let start = Instant::now();
                    let res = run_variant(&ch, &cfg, &settings).map(|(d, tr)| {
                        let e = (0..cfg.k)
                            .map(|k| harvested_energy(&d, &ch, &cfg, k))
                            .collect();
                        (tr, e)
                    });
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    let (row, tr) = row_from(sweep.label(i), seed, res, ms, timing);
                    (i, j, row, tr)
                })
                .collect()
        }
    };
    out.sort_by_key(|(i, j, _, _)| (*i, *j));
    let (rows, traces) = out.into_iter().map(|(_, _, r, t)| (r, t)).unzip();
    Ok(ResultTable {
        axis: spec.sweep.axis().to_string(),
        rows,
        traces,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text with header `sweep,seed,min_rate,tau,energy_1..energy_K,iters,ms`.
/// K is the largest pair count in the table; rows without a value leave the
/// cell empty.
pub fn results_csv(table: &ResultTable) -> Result<String, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let k = table
        .rows
        .iter()
        .map(|r| r.energies.len())
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "sweep".to_string(),
        "seed".into(),
        "min_rate".into(),
        "tau".into(),
    ];
    header.extend((1..=k).map(|i| format!("energy_{i}")));
    header.extend(["iters".to_string(), "ms".into()]);
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            r.sweep.clone(),
            r.seed.to_string(),
            fmt_opt(r.min_rate),
            fmt_opt(r.tau),
        ];
        rec.extend((0..k).map(|i| {
            r.energies
                .get(i)
                .map(|e| format!("{e:e}"))
                .unwrap_or_default()
        }));
        rec.extend([r.iters.to_string(), fmt_opt(r.ms)]);
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_csv(table: &ResultTable) -> String {
    let mut s = String::from("sweep,seeds,feasible,mean_min_rate,stderr\n");
    for a in table.aggregates() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            a.sweep,
            a.seeds,
            a.feasible,
            fmt_opt(a.mean),
            fmt_opt(a.stderr)
        );
    }
    s
}

#[derive(Serialize)]
struct JsonMirror<'a> {
    axis: &'a str,
    rows: &'a [ResultRow],
    aggregates: Vec<Aggregate>,
}

pub fn results_json(table: &ResultTable) -> Result<String, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let m = JsonMirror {
        axis: &table.axis,
        rows: &table.rows,
        aggregates: table.aggregates(),
    };
    Ok(serde_json::to_string_pretty(&m).expect("rows serialize"))
}

/// Writes `results.csv`, `summary.csv`, `results.json` and optional traces
/// into `dir`. Returns the written paths.
pub fn emit_results(
    table: &ResultTable,
    emit: Emit,
    dir: &Path,
    traces: bool,
) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Empty);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), ExperimentError> {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io_err(&p))?;
        written.push(p);
        Ok(())
    };
    if matches!(emit, Emit::Csv | Emit::Both) {
        put("results.csv", results_csv(table)?)?;
        put("summary.csv", summary_csv(table))?;
    }
    if matches!(emit, Emit::Json | Emit::Both) {
        put("results.json", results_json(table)?)?;
    }
    if traces {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
        for (r, t) in table.rows.iter().zip(&table.traces) {
            if let Some(t) = t {
                let p = tdir.join(format!("{}_{}.json", r.sweep, r.seed));
                fs::write(&p, t.to_json()).map_err(io_err(&p))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

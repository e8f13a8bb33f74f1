//! Experiment front end: JSON run configs, the `run`, `compare`, `gatecount`
//! and `probe` commands, and their CSV/JSON outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 post-selection failure,
//! 4 internal assertion or output failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::afqlbm::Afqlbm;
use crate::analysis::{self, GateInventory};
use crate::lattice::{
    diffusion_coefficient, effective_weights, ClassicalLbm, Geometry, MacroField, ModelSpec, Scheme,
};
use crate::legacy::{self, LegacySpec};
use crate::readout::{self, ErrorMetrics, ReadoutMethod, ReadoutReport};
use crate::Error;

/// Environment variable holding the worker count for seed sweeps.
pub const THREADS_ENV: &str = "QLBM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(Error::PostSelectionImpossible { .. }) => 3,
            CliError::Model(Error::Assertion(_) | Error::NonPositiveAmplitude { .. }) => 4,
            CliError::Model(_) => 2,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Classical,
    QuantumExact,
    QuantumSampled,
    Legacy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellValue {
    /// Per-axis coordinates: `[i]` or `[x, y]`.
    pub cell: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialField {
    pub background: f64,
    #[serde(default)]
    pub overrides: Vec<CellValue>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    /// Cells per axis.
    pub cells: usize,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs2: Option<f64>,
    pub initial: InitialField,
    #[serde(default)]
    pub loops: usize,
    /// Extra times at which the field is written.
    #[serde(default)]
    pub snapshots: Vec<usize>,
    pub mode: Mode,
    #[serde(default)]
    pub difference_mode: bool,
    /// Defaults to the cell count times 10^4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&read(path)?)
    }

    pub fn model_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::new(self.scheme, self.cells)
            .with_velocity(self.u, self.v)
            .with_omega(self.omega);
        if let Some(w) = &self.weights {
            spec.weights = w.clone();
        }
        if let Some(cs2) = self.cs2 {
            spec.cs2 = cs2;
        }
        spec
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::for_scheme(self.scheme, self.cells)
    }

    pub fn initial_field(&self) -> CliResult<MacroField> {
        let overrides: Vec<(Vec<usize>, f64)> = self
            .initial
            .overrides
            .iter()
            .map(|o| (o.cell.clone(), o.value))
            .collect();
        Ok(MacroField::with_overrides(
            self.geometry(),
            self.initial.background,
            &overrides,
        )?)
    }

    /// Number of loops actually executed.
    pub fn horizon(&self) -> usize {
        self.snapshots.iter().copied().fold(self.loops, usize::max)
    }

    pub fn shots(&self) -> u64 {
        self.shots
            .unwrap_or(self.geometry().len() as u64 * 10_000)
    }

    pub fn validate(&self) -> CliResult<()> {
        let spec = self.model_spec();
        spec.validate()?;
        let field = self.initial_field()?;
        if field.phi.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("initial field must be finite".into()));
        }
        match self.mode {
            Mode::Classical => {}
            Mode::QuantumExact | Mode::QuantumSampled => {
                if self.omega != 1.0 {
                    return Err(Error::UnsupportedOmega(self.omega).into());
                }
                if field.phi.iter().any(|v| *v < 0.0) {
                    return Err(CliError::Config("quantum modes need a nonnegative field".into()));
                }
                if self.mode == Mode::QuantumSampled && self.horizon() == 0 {
                    return Err(CliError::Config("sampled mode needs loops >= 1".into()));
                }
                if self.shots == Some(0) {
                    return Err(CliError::Config("shots must be >= 1".into()));
                }
            }
            Mode::Legacy => {
                if self.scheme != Scheme::D1Q3 || self.loops != 1 || !self.snapshots.is_empty() {
                    return Err(CliError::Config(
                        "legacy mode runs exactly one D1Q3-shaped step".into(),
                    ));
                }
                self.legacy_spec()?.validate()?;
            }
        }
        Ok(())
    }

    /// The two-direction model, read off a D1Q3 spec with an empty rest weight.
    pub fn legacy_spec(&self) -> CliResult<LegacySpec> {
        let w = effective_weights(&self.model_spec())?.w_hat;
        if w[0] != 0.0 {
            return Err(CliError::Config("legacy mode needs a zero rest weight".into()));
        }
        Ok(LegacySpec {
            cells: self.cells,
            w_hat: [w[1], w[2]],
            initial: self.initial_field()?.phi,
        })
    }
}

/// Deterministic per-index seed stream (SplitMix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: usize,
    pub field: MacroField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub chi: f64,
    pub w_hat: Vec<f64>,
    pub report: ReadoutReport,
    /// Fields at the configured snapshot times, in ascending order.
    pub snapshots: Vec<Snapshot>,
}

/// Runs a config in memory.
pub fn execute(cfg: &RunConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let spec = cfg.model_spec();
    let field0 = cfg.initial_field()?;
    let horizon = cfg.horizon();
    let mut times: Vec<usize> = cfg.snapshots.clone();
    times.sort_unstable();
    times.dedup();

    let mut snapshots = Vec::new();
    let mut classical = ClassicalLbm::new(&field0, &spec)?;
    let mut classical_at = vec![field0.clone()];
    for _ in 0..horizon {
        classical.step();
        classical_at.push(classical.field());
    }

    let (final_field, method, shots, seed, probs) = match cfg.mode {
        Mode::Classical => {
            snapshots.extend(times.iter().map(|&t| Snapshot {
                time: t,
                field: classical_at[t].clone(),
            }));
            (classical_at[cfg.loops].clone(), ReadoutMethod::Exact, None, None, Vec::new())
        }
        Mode::QuantumExact | Mode::QuantumSampled => {
            let engine = Afqlbm::new(&spec)?;
            let mut ls = engine.encode_initial(&field0, cfg.difference_mode)?;
            let sampled = cfg.mode == Mode::QuantumSampled;
            let shots = cfg.shots();
            let read = |ls: &crate::afqlbm::LoopState, seed: u64| -> CliResult<MacroField> {
                let delta = if sampled && ls.loop_index > 0 {
                    let hist = ls.state.sample(shots, seed).marginal_low(engine.layout().d_qubits());
                    readout::macroscopic_from_counts(&hist, ls.initial_l1, field0.geometry)?
                } else {
                    readout::macroscopic_exact(&ls.state, ls.initial_l1, field0.geometry)?
                };
                Ok(match ls.baseline {
                    Some(b) => readout::difference_reconstruct(&delta, b),
                    None => delta,
                })
            };
            let mut final_field = None;
            for t in 0..=horizon {
                if t > 0 {
                    ls = engine.run_loop_exact(ls)?;
                }
                if times.binary_search(&t).is_ok() {
                    snapshots.push(Snapshot {
                        time: t,
                        field: read(&ls, derive_seed(cfg.seed, t as u64))?,
                    });
                }
                if t == cfg.loops {
                    final_field = Some(read(&ls, cfg.seed)?);
                }
            }
            let (shots, seed) = if sampled {
                (Some(shots), Some(cfg.seed))
            } else {
                (None, None)
            };
            let method = if sampled {
                ReadoutMethod::Sampled
            } else {
                ReadoutMethod::Exact
            };
            (
                final_field.expect("loops <= horizon"),
                method,
                shots,
                seed,
                ls.postselect_probs,
            )
        }
        Mode::Legacy => {
            let step = legacy::run_legacy_step(&cfg.legacy_spec()?)?;
            (step.field, ReadoutMethod::Exact, None, None, vec![step.probability])
        }
    };

    let report = ReadoutReport {
        field: final_field,
        method,
        shots,
        seed,
        l2_error: None,
        linf_error: None,
        postselect_probs: probs,
    }
    .with_reference(&classical_at[cfg.loops])?;

    Ok(RunOutcome {
        config: cfg.clone(),
        chi: diffusion_coefficient(&spec),
        w_hat: effective_weights(&spec)?.w_hat,
        report,
        snapshots,
    })
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_csv(field: &MacroField) -> String {
    let mut out = String::new();
    match field.geometry {
        Geometry::Line(_) => {
            out.push_str("cell,phi\n");
            for (i, v) in field.phi.iter().enumerate() {
                let _ = writeln!(out, "{i},{}", num(*v));
            }
        }
        Geometry::Square(m) => {
            out.push_str("x,y,phi\n");
            for (i, v) in field.phi.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", i / m, i % m, num(*v));
            }
        }
    }
    out
}

fn joined_csv(a: &MacroField, b: &MacroField) -> String {
    let mut out = String::new();
    let m = a.geometry.cells_per_axis();
    let square = matches!(a.geometry, Geometry::Square(_));
    out.push_str(if square {
        "x,y,phi_a,phi_b,diff\n"
    } else {
        "cell,phi_a,phi_b,diff\n"
    });
    for (i, (x, y)) in a.phi.iter().zip(&b.phi).enumerate() {
        let cell = if square {
            format!("{},{}", i / m, i % m)
        } else {
            i.to_string()
        };
        let _ = writeln!(out, "{cell},{},{},{}", num(*x), num(*y), num(x - y));
    }
    out
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let io = |source| CliError::Io {
        path: dir.join(name),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io)?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn out_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// `run`: writes `field.csv`, one `field_t<T>.csv` per snapshot,
/// `report.json` and `timings.json`.
pub fn cmd_run(cfg: &RunConfig, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let dir = out_dir(cfg, out);
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let elapsed = start.elapsed();
    let mut files = vec![write(&dir, "field.csv", &field_csv(&outcome.report.field))?];
    for snap in &outcome.snapshots {
        files.push(write(&dir, &format!("field_t{}.csv", snap.time), &field_csv(&snap.field))?);
    }
    files.push(write(&dir, "report.json", &to_json(&outcome))?);
    // Timings live apart so report.json stays byte-reproducible.
    files.push(write(
        &dir,
        "timings.json",
        &to_json(&json!({ "run_seconds": elapsed.as_secs_f64() })),
    )?);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub a: RunConfig,
    pub b: RunConfig,
    /// Number of seeds for a sweep of `a`, derived from `a.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Also sweep `a` with the difference mode flipped.
    #[serde(default)]
    pub difference_ablation: bool,
}

impl CompareConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let cfg: Self =
            serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.a.validate()?;
        cfg.b.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub difference_mode: bool,
    pub seeds: Vec<u64>,
    pub metrics: Vec<ErrorMetrics>,
    pub median_l2: f64,
    pub median_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutcome {
    pub config: CompareConfig,
    pub metrics: ErrorMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<SweepSummary>,
    /// Difference-mode median L2 strictly below direct-mode median L2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difference_dominates: Option<bool>,
    #[serde(skip)]
    pub fields: Option<(MacroField, MacroField)>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be an integer, got {v}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Runs `a` once per derived seed and scores each against `reference`.
pub fn seed_sweep(a: &RunConfig, reference: &MacroField, seeds: usize) -> CliResult<SweepSummary> {
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| derive_seed(a.seed, i)).collect();
    let pool = thread_pool()?;
    let metrics: Vec<ErrorMetrics> = pool.install(|| {
        seed_list
            .par_iter()
            .map(|&seed| {
                let mut cfg = a.clone();
                cfg.seed = seed;
                cfg.snapshots.clear();
                let out = execute(&cfg)?;
                Ok(readout::error_metrics(&out.report.field, reference)?)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut l2: Vec<f64> = metrics.iter().map(|m| m.l2).collect();
    let mut linf: Vec<f64> = metrics.iter().map(|m| m.linf).collect();
    Ok(SweepSummary {
        difference_mode: a.difference_mode,
        seeds: seed_list,
        median_l2: median(&mut l2),
        median_linf: median(&mut linf),
        metrics,
    })
}

pub fn compare(cfg: &CompareConfig) -> CliResult<CompareOutcome> {
    if cfg.a.geometry() != cfg.b.geometry() || cfg.a.loops != cfg.b.loops {
        return Err(Error::GeometryMismatch("compared runs differ in geometry or loops".into()).into());
    }
    let a = execute(&cfg.a)?;
    let b = execute(&cfg.b)?;
    let metrics = readout::error_metrics(&a.report.field, &b.report.field)?;
    let reference = &b.report.field;
    let sweep = cfg.seeds.map(|n| seed_sweep(&cfg.a, reference, n)).transpose()?;
    let (ablation, dominates) = match (cfg.difference_ablation, &sweep) {
        (true, Some(main)) => {
            let mut flipped = cfg.a.clone();
            flipped.difference_mode = !flipped.difference_mode;
            let other = seed_sweep(&flipped, reference, main.seeds.len())?;
            let (diff, direct) = if main.difference_mode {
                (main, &other)
            } else {
                (&other, main)
            };
            let dominates = diff.median_l2 < direct.median_l2;
            (Some(other), Some(dominates))
        }
        (true, None) => {
            return Err(CliError::Config("difference_ablation needs a seed sweep".into()));
        }
        _ => (None, None),
    };
    Ok(CompareOutcome {
        config: cfg.clone(),
        metrics,
        sweep,
        ablation,
        difference_dominates: dominates,
        fields: Some((a.report.field, b.report.field)),
    })
}

/// `compare`: writes `compare.csv` and `summary.json`.
pub fn cmd_compare(cfg: &CompareConfig, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let dir = out_dir(&cfg.a, out);
    let outcome = compare(cfg)?;
    let (fa, fb) = outcome.fields.as_ref().expect("compare keeps fields");
    Ok(vec![
        write(&dir, "compare.csv", &joined_csv(fa, fb))?,
        write(&dir, "summary.json", &to_json(&outcome))?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRow {
    pub m: usize,
    pub afqlbm_toffoli: u64,
    /// Only defined for D2Q5.
    pub prior_toffoli: Option<u64>,
    pub saving: Option<u64>,
    pub inventory: GateInventory,
}

/// Toffoli table; fails if the closed form, the per-direction decomposition
/// and the emitted streaming circuit disagree.
pub fn gatecount(scheme: Scheme, ms: &[usize]) -> CliResult<Vec<GateRow>> {
    ms.iter()
        .map(|&m| {
            if m < 2 || !m.is_power_of_two() {
                return Err(CliError::Config(format!("M must be a power of two >= 2, got {m}")));
            }
            let formula = analysis::toffoli_formula(scheme, m);
            let decomposed = analysis::toffoli_count(scheme, m);
            let layout = crate::afqlbm::layout_for(scheme, m);
            let inventory = analysis::inventory(&crate::afqlbm::build_streaming(scheme, layout));
            let emitted = inventory.toffoli_total();
            if formula != decomposed || formula != emitted {
                return Err(Error::Assertion(format!(
                    "{scheme} M={m}: formula {formula}, decomposition {decomposed}, circuit {emitted}"
                ))
                .into());
            }
            let prior = (scheme == Scheme::D2Q5).then(|| analysis::prior_toffoli(m));
            Ok(GateRow {
                m,
                afqlbm_toffoli: formula,
                prior_toffoli: prior,
                saving: prior.map(|p| p - formula),
                inventory,
            })
        })
        .collect()
}

pub fn gatecount_csv(rows: &[GateRow]) -> String {
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("M,afqlbm_toffoli,prior_toffoli,saving\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.m,
            r.afqlbm_toffoli,
            opt(r.prior_toffoli),
            opt(r.saving)
        );
    }
    out
}

/// `gatecount`: writes `gatecount.csv` and `gatecount.json`.
pub fn cmd_gatecount(scheme: Scheme, ms: &[usize], out: &Path) -> CliResult<Vec<PathBuf>> {
    let rows = gatecount(scheme, ms)?;
    Ok(vec![
        write(out, "gatecount.csv", &gatecount_csv(&rows))?,
        write(
            out,
            "gatecount.json",
            &to_json(&json!({ "scheme": scheme, "rows": rows })),
        )?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub config: RunConfig,
    pub probabilities: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub bounds: (f64, f64),
    pub min: f64,
    pub max: f64,
    pub within_bounds: bool,
}

pub fn probe(cfg: &RunConfig) -> CliResult<ProbeOutcome> {
    if cfg.mode != Mode::QuantumExact {
        return Err(CliError::Config("probe needs mode quantum-exact".into()));
    }
    cfg.validate()?;
    let engine = Afqlbm::new(&cfg.model_spec())?;
    let ls = engine.run_exact(&cfg.initial_field()?, cfg.horizon(), cfg.difference_mode)?;
    let probabilities = ls.postselect_probs;
    let cumulative = probabilities
        .iter()
        .scan(1.0, |acc, p| {
            *acc *= p;
            Some(*acc)
        })
        .collect();
    let bounds = analysis::probability_bounds(cfg.scheme);
    let min = probabilities.iter().copied().fold(f64::INFINITY, f64::min);
    let max = probabilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    const SLACK: f64 = 1e-12;
    let within_bounds = probabilities
        .iter()
        .all(|p| *p >= bounds.0 - SLACK && *p <= bounds.1 + SLACK);
    Ok(ProbeOutcome {
        config: cfg.clone(),
        probabilities,
        cumulative,
        bounds,
        min,
        max,
        within_bounds,
    })
}

/// `probe`: writes `probe.csv` and `probe.json`.
pub fn cmd_probe(cfg: &RunConfig, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let dir = out_dir(cfg, out);
    let outcome = probe(cfg)?;
    let mut csv = String::from("loop,probability,cumulative\n");
    for (i, (p, c)) in outcome.probabilities.iter().zip(&outcome.cumulative).enumerate() {
        let _ = writeln!(csv, "{},{},{}", i + 1, num(*p), num(*c));
    }
    Ok(vec![
        write(&dir, "probe.csv", &csv)?,
        write(&dir, "probe.json", &to_json(&outcome))?,
    ])
}

//! Sparse-mixture datasets and the experiment runner.
//!
//! A dataset of length `n` carries exactly `m = round(n^{1-β})` signals at
//! uniformly random positions. Every statistic is a kernel draw; signals are
//! shifted by `μ`. P-values are computed from the statistics, so all
//! procedures in a cell see the same data.
//!
//! Randomness for a replicate is derived from `(seed, cell, replicate)` only,
//! which makes results independent of evaluation order and thread count.

mod config;

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

pub use config::{ExperimentConfig, Horizons, MixtureConfig, QRule, DEFAULT_NU};

use crate::distributions::GGKernel;
use crate::engines::{bh_decisions, OnlineEngine, Procedure};
use crate::error::{Error, Result};
use crate::metrics::{self, Counts, CsvSink, MetricsRecord, PooledRecord, TruthLabels};
use crate::schedules::LambdaSchedule;

/// Simulated statistics with their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDataset {
    pub statistics: Vec<f64>,
    pub truth: TruthLabels,
    pub mu: f64,
    pub epsilon: f64,
}

impl MixtureDataset {
    /// One-sided P-values `Φ̄(X_i)`.
    pub fn pvalues(&self, kernel: &GGKernel) -> Vec<f64> {
        self.statistics
            .iter()
            .map(|&x| kernel.survival_unchecked(x))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(acc: u64, v: u64) -> u64 {
    splitmix64(acc ^ splitmix64(v))
}

/// Identifies the data-generating part of a cell. Procedures, `q` and the
/// schedule are excluded so every procedure sees the same datasets; `scale`
/// is excluded so rescaled cells draw the same (rescaled) statistics.
fn cell_key(c: &MixtureConfig) -> u64 {
    [c.n as u64, c.beta.to_bits(), c.r.to_bits(), c.gamma.to_bits()]
    .into_iter()
    .fold(0x5EED_CE11, mix)
}

/// The RNG owned by one replicate of one cell.
pub fn replicate_rng(config: &MixtureConfig, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(config.seed, cell_key(config)), replicate))
}

pub fn kernel_for(config: &MixtureConfig) -> Result<GGKernel> {
    GGKernel::new(config.gamma, config.scale)
}

/// Generate replicate `replicate` of the mixture described by `config`.
pub fn make_mixture(config: &MixtureConfig, replicate: u64) -> Result<MixtureDataset> {
    config.validate()?;
    let kernel = kernel_for(config)?;
    let n = config.n;
    let m = config.signal_count();
    let mu = config.mu();
    let mut rng = replicate_rng(config, replicate);

    let positions = index::sample(&mut rng, n, m);
    let sampler = kernel.sampler();
    let mut statistics: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    for i in positions.iter() {
        statistics[i] += mu;
    }
    let truth = TruthLabels::new(n, positions.iter().map(|i| i + 1))?;
    Ok(MixtureDataset {
        statistics,
        truth,
        mu,
        epsilon: config.epsilon(),
    })
}

/// Counts at each horizon for an online rule, without materializing decisions.
fn online_counts(
    procedure: Procedure,
    schedule: &LambdaSchedule,
    pvalues: &[f64],
    truth: &TruthLabels,
    horizons: &[usize],
) -> Result<Vec<Counts>> {
    let mut engine = OnlineEngine::new(procedure, schedule.clone())?;
    let mut out = Vec::with_capacity(horizons.len());
    let mut c = Counts::default();
    let mut next = horizons.iter().copied().peekable();
    for (k, &p) in pvalues.iter().enumerate() {
        let d = engine.step(p)?;
        let signal = truth.is_signal(k + 1);
        c.rejections += d.rejected as u64;
        c.false_rejections += (d.rejected && !signal) as u64;
        c.signals += signal as u64;
        c.missed += (signal && !d.rejected) as u64;
        while next.peek() == Some(&(k + 1)) {
            out.push(c);
            next.next();
        }
    }
    Ok(out)
}

/// Per-replicate records for every procedure of a cell, replicate-major.
pub fn run_cell_all(config: &MixtureConfig) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    let kernel = kernel_for(config)?;
    let q = config.q();
    let schedule = LambdaSchedule::new(config.schedule, q)?;
    let horizons = match config.horizons {
        Horizons::Final => vec![config.n],
        Horizons::Log => metrics::log_horizons(config.n),
    };

    let per_rep: Vec<Result<Vec<MetricsRecord>>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = make_mixture(config, rep)?;
            let pvalues = data.pvalues(&kernel);
            let mut records = Vec::new();
            for &procedure in &config.procedures {
                let evaluated: Vec<(usize, Counts)> = if procedure.is_online() {
                    let counts = online_counts(procedure, &schedule, &pvalues, &data.truth, &horizons)?;
                    horizons.iter().copied().zip(counts).collect()
                } else {
                    let decisions = bh_decisions(&pvalues, q)?;
                    vec![(config.n, metrics::counts_at(&decisions, &data.truth, config.n)?)]
                };
                for (n_eval, c) in evaluated {
                    records.push(MetricsRecord {
                        replicate: rep,
                        n_eval,
                        procedure,
                        beta: config.beta,
                        r: config.r,
                        gamma: config.gamma,
                        q,
                        fdp: c.fdp(),
                        fnp: c.fnp(),
                        rejections: c.rejections,
                    });
                }
            }
            Ok(records)
        })
        .collect();

    let mut out = Vec::new();
    for r in per_rep {
        out.extend(r?);
    }
    Ok(out)
}

/// Per-replicate records of one procedure in one cell.
pub fn run_cell(config: &MixtureConfig, procedure: Procedure) -> Result<Vec<MetricsRecord>> {
    let single = MixtureConfig {
        procedures: vec![procedure],
        ..config.clone()
    };
    run_cell_all(&single)
}

/// Pool records by `(procedure, n_eval)`, in first-seen order.
pub fn pool_by_procedure(records: &[MetricsRecord]) -> Result<Vec<PooledRecord>> {
    let mut keys: Vec<(Procedure, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.procedure, r.n_eval)) {
            keys.push((r.procedure, r.n_eval));
        }
    }
    keys.into_iter()
        .map(|(p, h)| {
            let group: Vec<MetricsRecord> = records
                .iter()
                .filter(|r| r.procedure == p && r.n_eval == h)
                .cloned()
                .collect();
            metrics::pool(&group)
        })
        .collect()
}

/// Results of one grid cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub config: MixtureConfig,
    pub records: Vec<MetricsRecord>,
    pub pooled: Vec<PooledRecord>,
}

impl CellResult {
    pub fn pooled_for(&self, procedure: Procedure) -> Option<&PooledRecord> {
        self.pooled
            .iter()
            .filter(|p| p.procedure == procedure)
            .max_by_key(|p| p.n_eval)
    }
}

/// Run one cell and pool it.
pub fn run_cell_pooled(config: &MixtureConfig) -> Result<CellResult> {
    let records = run_cell_all(config)?;
    let pooled = pool_by_procedure(&records)?;
    Ok(CellResult {
        config: config.clone(),
        records,
        pooled,
    })
}

/// Run every cell of the `n_values × r_values` grid around `base`.
pub fn run_grid(base: &MixtureConfig, r_values: &[f64], n_values: &[usize]) -> Result<Vec<CellResult>> {
    let exp = ExperimentConfig {
        base: base.clone(),
        r_values: r_values.to_vec(),
        n_values: n_values.to_vec(),
    };
    run_experiment(&exp)
}

pub fn run_experiment(exp: &ExperimentConfig) -> Result<Vec<CellResult>> {
    exp.validate()?;
    exp.cells().iter().map(run_cell_pooled).collect()
}

/// Write cells as CSV: each cell's replicate rows, then its pooled rows.
pub fn write_csv<W: Write>(cells: &[CellResult], writer: W) -> std::io::Result<W> {
    let mut sink = CsvSink::new(writer)?;
    for cell in cells {
        for r in &cell.records {
            sink.record(r)?;
        }
        for p in &cell.pooled {
            sink.pooled(p)?;
        }
    }
    sink.finish()
}

/// Run the grid and return the CSV bytes.
pub fn run_grid_csv(exp: &ExperimentConfig) -> Result<Vec<u8>> {
    let cells = run_experiment(exp)?;
    write_csv(&cells, Vec::new()).map_err(|e| Error::Contract(format!("csv encoding failed: {e}")))
}

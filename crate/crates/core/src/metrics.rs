//! False discovery / false non-discovery proportions and their Monte-Carlo
//! aggregates. Ratios with an empty denominator are 0.

use std::io::Write;

use crate::engines::{Decision, Procedure};
use crate::error::{Error, Result};

/// Ground truth for a stream of length `n`: the 1-based indices of the signals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthLabels {
    n: usize,
    signals: Vec<usize>,
    mask: Vec<bool>,
}

impl TruthLabels {
    pub fn new(n: usize, signals: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; n];
        let mut sorted = Vec::new();
        for i in signals {
            if i == 0 || i > n {
                return Err(Error::Contract(format!("signal index {i} outside 1..={n}")));
            }
            if std::mem::replace(&mut mask[i - 1], true) {
                return Err(Error::Contract(format!("duplicate signal index {i}")));
            }
            sorted.push(i);
        }
        sorted.sort_unstable();
        Ok(Self {
            n,
            signals: sorted,
            mask,
        })
    }

    /// All-null truth.
    pub fn null(n: usize) -> Self {
        Self {
            n,
            signals: Vec::new(),
            mask: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn signals(&self) -> &[usize] {
        &self.signals
    }

    #[inline]
    pub fn is_signal(&self, index: usize) -> bool {
        self.mask[index - 1]
    }
}

/// Confusion counts over a prefix of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub rejections: u64,
    pub false_rejections: u64,
    pub signals: u64,
    pub missed: u64,
}

impl Counts {
    pub fn true_rejections(&self) -> u64 {
        self.rejections - self.false_rejections
    }

    pub fn fdp(&self) -> f64 {
        ratio(self.false_rejections, self.rejections)
    }

    pub fn fnp(&self) -> f64 {
        ratio(self.missed, self.signals)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_cover(decisions: &[Decision], truth: &TruthLabels) -> Result<()> {
    if decisions.len() != truth.n {
        return Err(Error::Contract(format!(
            "{} decisions for a truth of length {}",
            decisions.len(),
            truth.n
        )));
    }
    Ok(())
}

/// Counts over the first `horizon` decisions.
pub fn counts_at(decisions: &[Decision], truth: &TruthLabels, horizon: usize) -> Result<Counts> {
    check_cover(decisions, truth)?;
    if horizon > truth.n {
        return Err(Error::Contract(format!("horizon {horizon} beyond n = {}", truth.n)));
    }
    let mut c = Counts::default();
    for (k, d) in decisions[..horizon].iter().enumerate() {
        if d.index != k as u64 + 1 {
            return Err(Error::Contract(format!(
                "decision at position {} has index {}",
                k + 1,
                d.index
            )));
        }
        let signal = truth.mask[k];
        c.rejections += d.rejected as u64;
        c.false_rejections += (d.rejected && !signal) as u64;
        c.signals += signal as u64;
        c.missed += (signal && !d.rejected) as u64;
    }
    Ok(c)
}

/// False discovery proportion over the whole stream.
pub fn fdp(decisions: &[Decision], truth: &TruthLabels) -> Result<f64> {
    Ok(counts_at(decisions, truth, truth.n)?.fdp())
}

/// False non-discovery proportion: fraction of signals not rejected.
pub fn fnp(decisions: &[Decision], truth: &TruthLabels) -> Result<f64> {
    Ok(counts_at(decisions, truth, truth.n)?.fnp())
}

/// Intermediate evaluation horizons `{⌈n/2^k⌉}` down to 10, ascending, ending at `n`.
pub fn log_horizons(n: usize) -> Vec<usize> {
    let mut out = vec![n];
    let mut h = n;
    while h > 10 {
        h = h.div_ceil(2);
        if h < 10 {
            break;
        }
        out.push(h);
    }
    out.reverse();
    out.dedup();
    out
}

/// One replicate of one procedure in one experiment cell, at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub replicate: u64,
    pub n_eval: usize,
    pub procedure: Procedure,
    pub beta: f64,
    pub r: f64,
    pub gamma: f64,
    pub q: f64,
    pub fdp: f64,
    pub fnp: f64,
    pub rejections: u64,
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Sample mean and `sd/√k` with the unbiased variance; `se = 0` for one value.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        let k = values.len();
        if k == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return Some(Self { mean, se: 0.0 });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        Some(Self {
            mean,
            se: (var / k as f64).sqrt(),
        })
    }
}

/// Replicates of one (cell, procedure, horizon) pooled together.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledRecord {
    pub n_eval: usize,
    pub procedure: Procedure,
    pub beta: f64,
    pub r: f64,
    pub gamma: f64,
    pub q: f64,
    pub reps: usize,
    /// Estimates `FDR_n`.
    pub fdp: Estimate,
    /// Estimates `FNR_n`.
    pub fnp: Estimate,
    pub rejections: Estimate,
}

impl PooledRecord {
    /// `FDR + FNR` estimate.
    pub fn risk(&self) -> f64 {
        self.fdp.mean + self.fnp.mean
    }
}

/// Pool replicate records that share a cell, procedure and horizon.
pub fn pool(records: &[MetricsRecord]) -> Result<PooledRecord> {
    let first = records
        .first()
        .ok_or_else(|| Error::Contract("cannot pool an empty record list".into()))?;
    let same = |r: &MetricsRecord| {
        r.n_eval == first.n_eval
            && r.procedure == first.procedure
            && r.beta.to_bits() == first.beta.to_bits()
            && r.r.to_bits() == first.r.to_bits()
            && r.gamma.to_bits() == first.gamma.to_bits()
            && r.q.to_bits() == first.q.to_bits()
    };
    if !records.iter().all(same) {
        return Err(Error::Contract("pooled records must share cell, procedure and horizon".into()));
    }
    let est = |f: fn(&MetricsRecord) -> f64| Estimate::from_values(records.iter().map(f)).unwrap();
    Ok(PooledRecord {
        n_eval: first.n_eval,
        procedure: first.procedure,
        beta: first.beta,
        r: first.r,
        gamma: first.gamma,
        q: first.q,
        reps: records.len(),
        fdp: est(|r| r.fdp),
        fnp: est(|r| r.fnp),
        rejections: est(|r| r.rejections as f64),
    })
}

/// Fixed CSV header shared by per-replicate and pooled rows.
pub const CSV_HEADER: [&str; 10] = [
    "replicate",
    "n_eval",
    "procedure",
    "beta",
    "r",
    "gamma",
    "q",
    "fdp",
    "fnp",
    "rejections",
];

/// Writes metrics as CSV. Pooled results take two rows whose `replicate`
/// field is `mean` and `se`.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(writer: W) -> std::io::Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(CSV_HEADER).map_err(into_io)?;
        Ok(Self { inner })
    }

    pub fn record(&mut self, r: &MetricsRecord) -> std::io::Result<()> {
        self.inner
            .write_record([
                r.replicate.to_string(),
                r.n_eval.to_string(),
                r.procedure.to_string(),
                r.beta.to_string(),
                r.r.to_string(),
                r.gamma.to_string(),
                r.q.to_string(),
                r.fdp.to_string(),
                r.fnp.to_string(),
                r.rejections.to_string(),
            ])
            .map_err(into_io)
    }

    pub fn pooled(&mut self, p: &PooledRecord) -> std::io::Result<()> {
        let rows = [
            ("mean", p.fdp.mean, p.fnp.mean, p.rejections.mean),
            ("se", p.fdp.se, p.fnp.se, p.rejections.se),
        ];
        for (tag, fdp, fnp, rej) in rows {
            self.inner
                .write_record([
                    tag.to_string(),
                    p.n_eval.to_string(),
                    p.procedure.to_string(),
                    p.beta.to_string(),
                    p.r.to_string(),
                    p.gamma.to_string(),
                    p.q.to_string(),
                    fdp.to_string(),
                    fnp.to_string(),
                    rej.to_string(),
                ])
                .map_err(into_io)?;
        }
        Ok(())
    }

    pub fn finish(self) -> std::io::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

fn into_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

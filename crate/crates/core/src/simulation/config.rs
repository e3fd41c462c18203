//! Experiment configuration.
//!
//! Configs are TOML key-value files whose keys mirror [`MixtureConfig`]:
//!
//! ```toml
//! n = 100000
//! beta = 0.6
//! r = 0.9               # or r_values = [0.1, 0.3, ...]
//! gamma = 2.0           # default 2 (normal)
//! scale = 1.0           # default 1
//! q = 0.1               # or q_rule = "inverse-log"
//! seed = 42
//! reps = 100
//! procedures = ["lord", "lond", "bh"]
//! schedule = "power"    # or "adaptive"
//! nu = 1.05             # power schedules only, default 1.05
//! horizons = "final"    # or "log"
//! n_values = [10000, 100000]   # optional, overrides n
//! ```
//!
//! Every validation failure names the offending key.

use std::collections::BTreeSet;

use toml::{Table, Value};

use crate::engines::Procedure;
use crate::error::{Error, Result};
use crate::schedules::ScheduleKind;

/// Default power exponent of the schedule, `λ_i ∝ i^{-1.05}`.
pub const DEFAULT_NU: f64 = 1.05;

/// How the FDR level is chosen for a stream of length `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QRule {
    Fixed(f64),
    /// `q_n = 1 / ln n`
    InverseLog,
}

impl QRule {
    pub fn level(&self, n: usize) -> f64 {
        match *self {
            QRule::Fixed(q) => q,
            QRule::InverseLog => 1.0 / (n as f64).ln(),
        }
    }
}

/// Which stream prefixes are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Horizons {
    /// Only the full stream.
    #[default]
    Final,
    /// The logarithmic grid from [`crate::metrics::log_horizons`] (online rules only).
    Log,
}

/// One experiment cell: a sparse mixture and the procedures run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub n: usize,
    pub beta: f64,
    pub r: f64,
    pub gamma: f64,
    pub scale: f64,
    pub q_rule: QRule,
    pub seed: u64,
    pub reps: usize,
    pub procedures: Vec<Procedure>,
    pub schedule: ScheduleKind,
    pub horizons: Horizons,
}

impl MixtureConfig {
    /// Normal-model cell with the default power schedule, all procedures, fixed `q`.
    pub fn normal(n: usize, beta: f64, r: f64, q: f64) -> Self {
        Self {
            n,
            beta,
            r,
            gamma: 2.0,
            scale: 1.0,
            q_rule: QRule::Fixed(q),
            seed: 0,
            reps: 1,
            procedures: Procedure::ALL.to_vec(),
            schedule: ScheduleKind::Power { nu: DEFAULT_NU },
            horizons: Horizons::Final,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_procedures(mut self, procedures: &[Procedure]) -> Self {
        self.procedures = procedures.to_vec();
        self
    }

    /// Signal fraction `ε = n^{-β}`.
    pub fn epsilon(&self) -> f64 {
        (self.n as f64).powf(-self.beta)
    }

    /// Number of signals, `round(n^{1-β})`.
    pub fn signal_count(&self) -> usize {
        (self.n as f64).powf(1.0 - self.beta).round() as usize
    }

    /// Location shift `μ = scale · (γ r ln n)^{1/γ}`.
    pub fn mu(&self) -> f64 {
        self.scale * (self.gamma * self.r * (self.n as f64).ln()).powf(1.0 / self.gamma)
    }

    pub fn q(&self) -> f64 {
        self.q_rule.level(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::config("n", "stream length must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(
                "beta",
                format!("sparsity exponent must lie in (0,1), got {}", self.beta),
            ));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::config("r", format!("signal strength must be >= 0, got {}", self.r)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return Err(Error::config("gamma", format!("tail exponent must be >= 1, got {}", self.gamma)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::config("scale", format!("scale must be > 0, got {}", self.scale)));
        }
        match self.q_rule {
            QRule::Fixed(q) if !(q > 0.0 && q < 1.0) => {
                return Err(Error::config("q", format!("FDR level must lie in (0,1), got {q}")));
            }
            QRule::InverseLog if self.n < 3 => {
                return Err(Error::config(
                    "q_rule",
                    format!("inverse-log level needs n >= 3 so that q lies in (0,1), got n = {}", self.n),
                ));
            }
            _ => {}
        }
        if self.reps < 1 {
            return Err(Error::config("reps", "need at least one replicate"));
        }
        if self.procedures.is_empty() {
            return Err(Error::config("procedures", "no procedures selected"));
        }
        if let ScheduleKind::Power { nu } = self.schedule {
            if !(nu.is_finite() && nu > 1.0) {
                return Err(Error::config("nu", format!("power schedule needs nu > 1, got {nu}")));
            }
        }
        if self.signal_count() == 0 {
            return Err(Error::config(
                "beta",
                format!(
                    "round(n^(1-beta)) = 0 signals for n = {}, beta = {}: degenerate experiment",
                    self.n, self.beta
                ),
            ));
        }
        Ok(())
    }
}

/// A base cell plus the grid axes to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: MixtureConfig,
    pub r_values: Vec<f64>,
    pub n_values: Vec<usize>,
}

impl ExperimentConfig {
    /// The cells of the `n × r` grid, `n` varying slowest.
    pub fn cells(&self) -> Vec<MixtureConfig> {
        let mut out = Vec::with_capacity(self.n_values.len() * self.r_values.len());
        for &n in &self.n_values {
            for &r in &self.r_values {
                out.push(MixtureConfig {
                    n,
                    r,
                    ..self.base.clone()
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty() {
            return Err(Error::config("r_values", "grid is empty"));
        }
        if self.n_values.is_empty() {
            return Err(Error::config("n_values", "grid is empty"));
        }
        for cell in self.cells() {
            cell.validate().map_err(|e| match e {
                // a bad grid entry is reported against the grid key
                Error::Config { key, reason } if key == "r" && self.r_values.len() > 1 => {
                    Error::config("r_values", reason)
                }
                Error::Config { key, reason } if key == "n" && self.n_values.len() > 1 => {
                    Error::config("n_values", reason)
                }
                e => e,
            })?;
        }
        Ok(())
    }

    /// Parse and validate a TOML experiment file.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(error_key(&e), e.message().to_string()))?;
        let cfg = Self::from_table(&table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(t: &Table) -> Result<Self> {
        const KNOWN: [&str; 16] = [
            "n", "n_values", "beta", "r", "r_values", "gamma", "scale", "q", "q_rule", "seed",
            "reps", "procedures", "schedule", "nu", "horizons", "name",
        ];
        if let Some(k) = t.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::config(k.as_str(), "unknown key"));
        }

        let n_values = match (t.get("n"), t.get("n_values")) {
            (Some(_), Some(_)) => return Err(Error::config("n_values", "give either n or n_values, not both")),
            (Some(v), None) => vec![as_usize("n", v)?],
            (None, Some(v)) => as_array("n_values", v)?
                .iter()
                .map(|v| as_usize("n_values", v))
                .collect::<Result<_>>()?,
            (None, None) => return Err(Error::config("n", "missing required key")),
        };
        let r_values = match (t.get("r"), t.get("r_values")) {
            (Some(_), Some(_)) => return Err(Error::config("r_values", "give either r or r_values, not both")),
            (Some(v), None) => vec![as_f64("r", v)?],
            (None, Some(v)) => as_array("r_values", v)?
                .iter()
                .map(|v| as_f64("r_values", v))
                .collect::<Result<_>>()?,
            (None, None) => return Err(Error::config("r", "missing required key")),
        };
        let beta = as_f64("beta", required(t, "beta")?)?;
        let gamma = t.get("gamma").map(|v| as_f64("gamma", v)).transpose()?.unwrap_or(2.0);
        let scale = t.get("scale").map(|v| as_f64("scale", v)).transpose()?.unwrap_or(1.0);

        let q_rule = match (t.get("q"), t.get("q_rule")) {
            (Some(_), Some(_)) => return Err(Error::config("q_rule", "give either q or q_rule, not both")),
            (Some(v), None) => QRule::Fixed(as_f64("q", v)?),
            (None, Some(v)) => match as_str("q_rule", v)? {
                "inverse-log" => QRule::InverseLog,
                other => {
                    return Err(Error::config(
                        "q_rule",
                        format!("expected \"inverse-log\" (or a fixed `q = ...`), got \"{other}\""),
                    ))
                }
            },
            (None, None) => return Err(Error::config("q", "missing required key (or q_rule)")),
        };

        let seed = t.get("seed").map(|v| as_u64("seed", v)).transpose()?.unwrap_or(0);
        let reps = t.get("reps").map(|v| as_usize("reps", v)).transpose()?.unwrap_or(1);

        let procedures = match t.get("procedures") {
            None => Procedure::ALL.to_vec(),
            Some(v) => {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for p in as_array("procedures", v)? {
                    let p: Procedure = as_str("procedures", p)?
                        .parse()
                        .map_err(|e: Error| Error::config("procedures", e.to_string()))?;
                    if !seen.insert(p) {
                        return Err(Error::config("procedures", format!("`{p}` listed twice")));
                    }
                    out.push(p);
                }
                out
            }
        };

        let nu = t.get("nu").map(|v| as_f64("nu", v)).transpose()?;
        let schedule = match t.get("schedule").map(|v| as_str("schedule", v)).transpose()? {
            None | Some("power") => ScheduleKind::Power {
                nu: nu.unwrap_or(DEFAULT_NU),
            },
            Some("adaptive") => {
                if nu.is_some() {
                    return Err(Error::config("nu", "nu only applies to power schedules"));
                }
                ScheduleKind::AdaptiveLog
            }
            Some(other) => {
                return Err(Error::config(
                    "schedule",
                    format!("expected \"power\" or \"adaptive\", got \"{other}\""),
                ))
            }
        };

        let horizons = match t.get("horizons").map(|v| as_str("horizons", v)).transpose()? {
            None | Some("final") => Horizons::Final,
            Some("log") => Horizons::Log,
            Some(other) => {
                return Err(Error::config(
                    "horizons",
                    format!("expected \"final\" or \"log\", got \"{other}\""),
                ))
            }
        };

        Ok(Self {
            base: MixtureConfig {
                n: n_values[0],
                beta,
                r: r_values[0],
                gamma,
                scale,
                q_rule,
                seed,
                reps,
                procedures,
                schedule,
                horizons,
            },
            r_values,
            n_values,
        })
    }
}

fn error_key(e: &toml::de::Error) -> String {
    // toml reports syntax errors by position, not key
    match e.span() {
        Some(span) => format!("<syntax at byte {}>", span.start),
        None => "<syntax>".to_string(),
    }
}

fn required<'a>(t: &'a Table, key: &str) -> Result<&'a Value> {
    t.get(key).ok_or_else(|| Error::config(key, "missing required key"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        // seeds above i64::MAX can be quoted
        Value::String(s) => s
            .parse()
            .map_err(|_| Error::config(key, format!("expected an unsigned integer, got \"{s}\""))),
        other => Err(Error::config(key, format!("expected a non-negative integer, got {other}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        // allow 1e5-style floats that are whole numbers
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 && *f < 9.0e15 => Ok(*f as usize),
        other => Err(Error::config(key, format!("expected a non-negative integer, got {other}"))),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, got {}", v.type_str())))
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a [Value]> {
    v.as_array()
        .map(Vec::as_slice)
        .ok_or_else(|| Error::config(key, format!("expected an array, got {}", v.type_str())))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 1000\nbeta = 0.5\nr = 0.5\nq = 0.1\nseed = 3\nreps = 2\n";

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.base.n, 1000);
        assert_eq!(c.base.gamma, 2.0);
        assert_eq!(c.base.procedures, Procedure::ALL.to_vec());
        assert_eq!(c.base.schedule, ScheduleKind::Power { nu: 1.05 });
        assert_eq!(c.cells().len(), 1);
    }

    #[test]
    fn beta_out_of_range_names_key() {
        let text = MINIMAL.replace("beta = 0.5", "beta = 1.5");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");
        assert_eq!(key_of(err), "beta");
    }

    #[test]
    fn offending_keys_are_named() {
        let cases = [
            (MINIMAL.replace("q = 0.1", "q = 1.0"), "q"),
            (MINIMAL.replace("r = 0.5", "r = -1"), "r"),
            (MINIMAL.replace("reps = 2", "reps = 0"), "reps"),
            (MINIMAL.replace("n = 1000", "n = \"big\""), "n"),
            (format!("{MINIMAL}bogus = 1\n"), "bogus"),
            (format!("{MINIMAL}gamma = 0.5\n"), "gamma"),
            (format!("{MINIMAL}nu = 1.0\n"), "nu"),
            (format!("{MINIMAL}procedures = [\"holm\"]\n"), "procedures"),
            (format!("{MINIMAL}q_rule = \"inverse-log\"\n"), "q_rule"),
            (format!("{MINIMAL}schedule = \"adaptive\"\nnu = 2.0\n"), "nu"),
            (MINIMAL.replace("n = 1000\n", ""), "n"),
            (MINIMAL.replace("n = 1000", "n = 0"), "n"),
        ];
        for (text, key) in cases {
            let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
            assert_eq!(key_of(err), key, "config:\n{text}");
        }
    }

    #[test]
    fn inverse_log_rule() {
        let text = MINIMAL.replace("q = 0.1", "q_rule = \"inverse-log\"");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.base.q_rule, QRule::InverseLog);
        assert!((c.base.q() - 1.0 / 1000f64.ln()).abs() < 1e-15);
        let tiny = MixtureConfig {
            n: 2,
            beta: 0.01,
            q_rule: QRule::InverseLog,
            ..c.base
        };
        assert_eq!(key_of(tiny.validate().unwrap_err()), "q_rule");
    }

    #[test]
    fn grids() {
        let text = "n_values = [100, 1000]\nbeta = 0.5\nr_values = [0.1, 0.2, 0.3]\nq = 0.1\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        let cells = c.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[0].n, cells[0].r), (100, 0.1));
        assert_eq!((cells[5].n, cells[5].r), (1000, 0.3));
        let bad = text.replace("0.2", "-0.2");
        assert_eq!(key_of(ExperimentConfig::from_toml_str(&bad).unwrap_err()), "r_values");
    }

    #[test]
    fn mixture_arithmetic() {
        let c = MixtureConfig::normal(10_000, 0.5, 0.5, 0.1);
        assert!((c.epsilon() - 0.01).abs() < 1e-15);
        assert_eq!(c.signal_count(), 100);
        // mpmath: sqrt(log(10**4))
        assert!((c.mu() - 3.034_854_258_770_292_7).abs() < 1e-13);
    }
}

//! Significance-budget sequences `λ_1, λ_2, …` shared by LORD and LOND.
//!
//! A schedule is a positive, non-increasing sequence whose infinite sum is the
//! FDR budget `q`. Two shapes are provided:
//!
//! * `Power { nu }`: `λ_i = L · i^{-ν}` with `ν > 1`.
//! * `AdaptiveLog`: `λ_i = L / ((i+1) · ln²(i+1))`, summable but decaying more
//!   slowly than any power, so `i^ν λ_i → ∞` for every `ν > 1`.
//!
//! The normalizer `L` is fixed at construction from a partial sum over the
//! first [`PARTIAL_SUM_TERMS`] terms plus an Euler–Maclaurin tail.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of explicitly summed terms when normalizing a schedule.
pub const PARTIAL_SUM_TERMS: u64 = 10_000_000;

/// Leading λ values kept in a table; the rest come from the closed form.
const TABLE_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    Power { nu: f64 },
    AdaptiveLog,
}

impl ScheduleKind {
    /// Unnormalized term `s_i` (so that `λ_i = L · s_i`).
    #[inline]
    fn shape(&self, i: u64) -> f64 {
        match *self {
            ScheduleKind::Power { nu } => (i as f64).powf(-nu),
            ScheduleKind::AdaptiveLog => {
                let u = (i + 1) as f64;
                let l = u.ln();
                1.0 / (u * l * l)
            }
        }
    }

    /// `Σ_{i >= n} s_i` by Euler–Maclaurin, accurate far beyond f64 for n ~ 10⁷.
    fn tail_from(&self, n: u64) -> f64 {
        let x = n as f64;
        match *self {
            ScheduleKind::Power { nu } => {
                x.powf(1.0 - nu) / (nu - 1.0) + 0.5 * x.powf(-nu) + nu * x.powf(-nu - 1.0) / 12.0
                    - nu * (nu + 1.0) * (nu + 2.0) * x.powf(-nu - 3.0) / 720.0
            }
            ScheduleKind::AdaptiveLog => {
                let u = x + 1.0;
                let l = u.ln();
                // ∫_n^∞ s = 1/ln(n+1); s(n)/2; −s'(n)/12
                1.0 / l + 0.5 / (u * l * l) + (l + 2.0) / (12.0 * u * u * l * l * l)
            }
        }
    }

    /// Analytic bracket `(lower, upper)` for `Σ_{i > n} s_i` from integral comparison.
    fn tail_bounds_after(&self, n: u64) -> (f64, f64) {
        let x = n as f64;
        match *self {
            ScheduleKind::Power { nu } => (
                (x + 1.0).powf(1.0 - nu) / (nu - 1.0),
                x.powf(1.0 - nu) / (nu - 1.0),
            ),
            ScheduleKind::AdaptiveLog => (1.0 / (x + 2.0).ln(), 1.0 / (x + 1.0).ln()),
        }
    }

    fn cache_key(&self) -> u64 {
        match *self {
            ScheduleKind::Power { nu } => nu.to_bits(),
            // never a valid nu
            ScheduleKind::AdaptiveLog => 0,
        }
    }
}

/// Neumaier-compensated sum of `s_1..s_n`, accumulated from the small end.
fn compensated_partial_sum(kind: &ScheduleKind, n: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in (1..=n).rev() {
        let v = kind.shape(i);
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Total mass `Σ_{i>=1} s_i` of the unnormalized sequence; memoized per shape.
fn total_mass(kind: &ScheduleKind) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = kind.cache_key();
    if let Some(&m) = cache.lock().unwrap().get(&key) {
        return m;
    }
    let n = PARTIAL_SUM_TERMS;
    let mass = compensated_partial_sum(kind, n - 1) + kind.tail_from(n);
    cache.lock().unwrap().insert(key, mass);
    mass
}

/// A normalized significance-budget sequence. Cheap to clone.
#[derive(Debug, Clone)]
pub struct LambdaSchedule {
    kind: ScheduleKind,
    q: f64,
    normalizer: f64,
    table: Arc<[f64]>,
}

impl PartialEq for LambdaSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.q == other.q && self.normalizer == other.normalizer
    }
}

impl LambdaSchedule {
    /// `λ_i ∝ i^{-ν}` with total mass `q`.
    ///
    /// `q` is the mass of the sequence. Any positive finite value is accepted
    /// here; callers using the schedule as an FDR budget restrict it to (0,1).
    pub fn power(nu: f64, q: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 1.0) {
            return Err(Error::DivergentSeries(nu));
        }
        Self::build(ScheduleKind::Power { nu }, q)
    }

    /// `λ_i ∝ 1/((i+1) ln²(i+1))` with total mass `q`.
    pub fn adaptive(q: f64) -> Result<Self> {
        Self::build(ScheduleKind::AdaptiveLog, q)
    }

    pub fn new(kind: ScheduleKind, q: f64) -> Result<Self> {
        match kind {
            ScheduleKind::Power { nu } => Self::power(nu, q),
            ScheduleKind::AdaptiveLog => Self::adaptive(q),
        }
    }

    fn build(kind: ScheduleKind, q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::domain("q", format!("need a positive budget, got {q}")));
        }
        let normalizer = q / total_mass(&kind);
        let table = (1..=TABLE_LEN as u64)
            .map(|i| normalizer * kind.shape(i))
            .collect();
        Ok(Self {
            kind,
            q,
            normalizer,
            table,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Total budget `q = Σ λ_i`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// The constant `L` in `λ_i = L · s_i`; equals `λ_1` for power schedules.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `λ_i` for `i >= 1`.
    pub fn lambda_at(&self, i: u64) -> Result<f64> {
        if i == 0 {
            return Err(Error::domain("i", "schedule indices start at 1"));
        }
        Ok(self.lambda(i))
    }

    /// `λ_i` without the index check. `i` must be at least 1.
    #[inline]
    pub fn lambda(&self, i: u64) -> f64 {
        debug_assert!(i >= 1);
        match self.table.get((i - 1) as usize) {
            Some(&v) => v,
            None => self.normalizer * self.kind.shape(i),
        }
    }

    /// Hand-written schedule for unit tests; only the tabulated prefix is meaningful.
    #[cfg(test)]
    pub(crate) fn from_fn_for_tests(q: f64, f: impl Fn(u64) -> f64) -> Self {
        Self {
            kind: ScheduleKind::AdaptiveLog,
            q,
            normalizer: f(1),
            table: (1..=TABLE_LEN as u64).map(f).collect(),
        }
    }

    /// `Σ_{i=1}^{n} λ_i`, compensated.
    pub fn partial_sum(&self, n: u64) -> f64 {
        self.normalizer * compensated_partial_sum(&self.kind, n)
    }

    /// Integral-comparison bracket `(lower, upper)` on `Σ_{i>n} λ_i`.
    pub fn tail_bounds(&self, n: u64) -> (f64, f64) {
        let (lo, hi) = self.kind.tail_bounds_after(n);
        (self.normalizer * lo, self.normalizer * hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // mpmath.zeta(1.05)
    const ZETA_1_05: f64 = 20.580_844_302_036_985;

    #[test]
    fn power_two_has_unit_normalizer() {
        let s = LambdaSchedule::power(2.0, PI * PI / 6.0).unwrap();
        assert!((s.normalizer() - 1.0).abs() < 1e-13);
        assert!((s.lambda_at(3).unwrap() - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn power_normalizer_matches_zeta() {
        let s = LambdaSchedule::power(1.05, 0.1).unwrap();
        let want = 0.1 / ZETA_1_05;
        assert!(((s.normalizer() - want) / want).abs() < 1e-12);
        assert_eq!(s.lambda_at(1).unwrap(), s.normalizer());
        let s2 = LambdaSchedule::power(2.0, 0.1).unwrap();
        assert!((s2.lambda_at(1).unwrap() - 0.1 * 6.0 / (PI * PI)).abs() < 1e-15);
        assert!((s2.lambda_at(1).unwrap() - 0.060_792_7).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(LambdaSchedule::power(1.0, 0.1), Err(Error::DivergentSeries(1.0)));
        assert!(matches!(LambdaSchedule::power(0.5, 0.1), Err(Error::DivergentSeries(_))));
        assert!(LambdaSchedule::power(2.0, 0.0).is_err());
        assert!(LambdaSchedule::power(2.0, -0.1).is_err());
        assert!(LambdaSchedule::adaptive(f64::NAN).is_err());
        let s = LambdaSchedule::adaptive(0.1).unwrap();
        assert!(s.lambda_at(0).is_err());
    }

    #[test]
    fn table_and_closed_form_agree() {
        let s = LambdaSchedule::power(1.05, 0.1).unwrap();
        let i = TABLE_LEN as u64;
        assert_eq!(s.lambda(i), s.normalizer * (i as f64).powf(-1.05));
        assert!(s.lambda(i + 1) < s.lambda(i));
        assert_eq!(s.lambda_at(5).unwrap(), s.lambda_at(5).unwrap());
    }

    #[test]
    fn adaptive_growth_condition() {
        // i^ν λ_i ∝ i^{ν-1} / ln² i increases once ln i > 2/(ν-1)
        let s = LambdaSchedule::adaptive(0.1).unwrap();
        let grow = |nu: f64, at: [u64; 3]| -> Vec<f64> {
            at.iter().map(|&i| (i as f64).powf(nu) * s.lambda(i)).collect()
        };
        let g = grow(1.5, [100, 10_000, 1_000_000]);
        assert!(g[0] < g[1] && g[1] < g[2], "{g:?}");
        let g = grow(1.1, [10_000_000_000, 100_000_000_000_000, 1_000_000_000_000_000_000]);
        assert!(g[0] < g[1] && g[1] < g[2], "{g:?}");
    }

    #[test]
    fn monotone_over_prefix() {
        for s in [
            LambdaSchedule::power(1.05, 0.1).unwrap(),
            LambdaSchedule::power(3.0, 0.2).unwrap(),
            LambdaSchedule::adaptive(0.1).unwrap(),
        ] {
            let mut prev = s.lambda(1);
            assert!(prev > 0.0);
            for i in 2..=1_000_000 {
                let v = s.lambda(i);
                assert!(v <= prev && v > 0.0, "i={i}");
                prev = v;
            }
        }
    }
}

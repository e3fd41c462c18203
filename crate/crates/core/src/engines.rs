//! Sequential decision rules.
//!
//! Both online rules test `H_i` at level `α_i` and reject iff `P_i <= α_i`,
//! where `α_i` depends only on earlier outcomes:
//!
//! * LORD: `α_i = λ_{i - t_i}`, `t_i` the index of the latest rejection
//!   before `i` (0 if none).
//! * LOND: `α_i = min(1, λ_i · (D(i-1) + 1))`, `D` the discovery count.
//!
//! The static Benjamini–Hochberg step-up rule is provided as a baseline; it
//! needs the full P-value vector and is not an online procedure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::LambdaSchedule;

/// The outcome of testing one hypothesis. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub index: u64,
    pub alpha: f64,
    pub p: f64,
    pub rejected: bool,
}

impl fmt::Display for Decision {
    /// `index alpha p REJECT|ACCEPT`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.rejected { "REJECT" } else { "ACCEPT" };
        write!(f, "{} {} {} {}", self.index, self.alpha, self.p, verdict)
    }
}

fn check_pvalue(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain("p", format!("P-value must lie in [0,1], got {p}")))
    }
}

/// LORD state: next index and time of the most recent discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LordState {
    next_index: u64,
    last_discovery: u64,
}

impl Default for LordState {
    fn default() -> Self {
        Self {
            next_index: 1,
            last_discovery: 0,
        }
    }
}

impl LordState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    /// 0 before the first rejection.
    pub fn last_discovery(&self) -> u64 {
        self.last_discovery
    }

    /// Level that will be used for the next hypothesis.
    #[inline]
    pub fn next_level(&self, schedule: &LambdaSchedule) -> f64 {
        schedule.lambda(self.next_index - self.last_discovery)
    }

    pub fn step(&mut self, schedule: &LambdaSchedule, p: f64) -> Result<Decision> {
        check_pvalue(p)?;
        let index = self.next_index;
        let alpha = self.next_level(schedule);
        let rejected = p <= alpha;
        if rejected {
            self.last_discovery = index;
        }
        self.next_index += 1;
        Ok(Decision {
            index,
            alpha,
            p,
            rejected,
        })
    }
}

/// LOND state: next index and number of discoveries so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LondState {
    next_index: u64,
    discoveries: u64,
}

impl Default for LondState {
    fn default() -> Self {
        Self {
            next_index: 1,
            discoveries: 0,
        }
    }
}

impl LondState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn discoveries(&self) -> u64 {
        self.discoveries
    }

    #[inline]
    pub fn next_level(&self, schedule: &LambdaSchedule) -> f64 {
        let raw = schedule.lambda(self.next_index) * (self.discoveries + 1) as f64;
        raw.min(1.0)
    }

    pub fn step(&mut self, schedule: &LambdaSchedule, p: f64) -> Result<Decision> {
        check_pvalue(p)?;
        let index = self.next_index;
        let alpha = self.next_level(schedule);
        let rejected = p <= alpha;
        if rejected {
            self.discoveries += 1;
        }
        self.next_index += 1;
        Ok(Decision {
            index,
            alpha,
            p,
            rejected,
        })
    }
}

/// The procedures the simulator and CLI know about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Lord,
    Lond,
    Bh,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [Procedure::Lord, Procedure::Lond, Procedure::Bh];

    pub fn is_online(self) -> bool {
        !matches!(self, Procedure::Bh)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Lord => "lord",
            Procedure::Lond => "lond",
            Procedure::Bh => "bh",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lord" => Ok(Procedure::Lord),
            "lond" => Ok(Procedure::Lond),
            "bh" => Ok(Procedure::Bh),
            other => Err(Error::domain(
                "procedure",
                format!("unknown procedure `{other}` (expected lord, lond or bh)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OnlineState {
    Lord(LordState),
    Lond(LondState),
}

/// An online rule bundled with its schedule; one per stream.
#[derive(Debug, Clone)]
pub struct OnlineEngine {
    schedule: LambdaSchedule,
    state: OnlineState,
    discoveries: u64,
}

impl OnlineEngine {
    pub fn new(procedure: Procedure, schedule: LambdaSchedule) -> Result<Self> {
        let state = match procedure {
            Procedure::Lord => OnlineState::Lord(LordState::new()),
            Procedure::Lond => OnlineState::Lond(LondState::new()),
            Procedure::Bh => {
                return Err(Error::domain(
                    "procedure",
                    "bh needs the whole P-value vector and cannot run online",
                ))
            }
        };
        Ok(Self {
            schedule,
            state,
            discoveries: 0,
        })
    }

    #[inline]
    pub fn step(&mut self, p: f64) -> Result<Decision> {
        let d = match &mut self.state {
            OnlineState::Lord(s) => s.step(&self.schedule, p)?,
            OnlineState::Lond(s) => s.step(&self.schedule, p)?,
        };
        self.discoveries += d.rejected as u64;
        Ok(d)
    }

    pub fn discoveries(&self) -> u64 {
        self.discoveries
    }

    /// Number of hypotheses tested so far.
    pub fn tested(&self) -> u64 {
        match &self.state {
            OnlineState::Lord(s) => s.next_index - 1,
            OnlineState::Lond(s) => s.next_index - 1,
        }
    }

    pub fn schedule(&self) -> &LambdaSchedule {
        &self.schedule
    }
}

/// Fold an online rule over a finite stream, from a fresh state.
pub fn run_stream(
    procedure: Procedure,
    schedule: &LambdaSchedule,
    pvalues: &[f64],
) -> Result<Vec<Decision>> {
    let mut engine = OnlineEngine::new(procedure, schedule.clone())?;
    pvalues.iter().map(|&p| engine.step(p)).collect()
}

/// Benjamini–Hochberg at level `q`: sorted 1-based indices of the rejections.
///
/// With `p_(1) <= … <= p_(n)` and `k = max{ j : p_(j) <= q j / n }`, every
/// P-value `<= p_(k)` is rejected (all ties at the cutoff included).
pub fn bh_reject(pvalues: &[f64], q: f64) -> Result<Vec<usize>> {
    let cutoff = bh_cutoff(pvalues, q)?;
    Ok(match cutoff {
        None => Vec::new(),
        Some(c) => pvalues
            .iter()
            .enumerate()
            .filter(|(_, &p)| p <= c)
            .map(|(i, _)| i + 1)
            .collect(),
    })
}

/// Largest rejected P-value `p_(k)`, or `None` when BH rejects nothing.
fn bh_cutoff(pvalues: &[f64], q: f64) -> Result<Option<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q", format!("need q in (0,1), got {q}")));
    }
    for &p in pvalues {
        check_pvalue(p)?;
    }
    let n = pvalues.len();
    if n == 0 {
        return Ok(None);
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    Ok((1..=n)
        .rev()
        .find(|&j| sorted[j - 1] <= q * j as f64 / nf)
        .map(|j| sorted[j - 1]))
}

/// BH as a decision list. `alpha` is the realized step-up level `q k / n`
/// (`q / n` when nothing is rejected), so `rejected ⟺ p <= alpha` holds.
pub fn bh_decisions(pvalues: &[f64], q: f64) -> Result<Vec<Decision>> {
    let n = pvalues.len() as f64;
    let rejected = bh_reject(pvalues, q)?;
    let k = rejected.len().max(1) as f64;
    let alpha = q * k / n;
    let mut mask = vec![false; pvalues.len()];
    for i in rejected {
        mask[i - 1] = true;
    }
    Ok(pvalues
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(i, (&p, rejected))| Decision {
            index: i as u64 + 1,
            alpha,
            p,
            rejected,
        })
        .collect())
}

/// Run any procedure on a complete vector; BH uses the schedule's `q`.
pub fn run_procedure(
    procedure: Procedure,
    schedule: &LambdaSchedule,
    pvalues: &[f64],
) -> Result<Vec<Decision>> {
    match procedure {
        Procedure::Bh => bh_decisions(pvalues, schedule.q()),
        online => run_stream(online, schedule, pvalues),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::ScheduleKind;

    /// λ_i = 0.05 · 2^{1-i}: a power-free schedule with mass 0.1, built by
    /// hand so the traces below are exact.
    fn halving() -> LambdaSchedule {
        LambdaSchedule::from_fn_for_tests(0.1, |i| 0.05 * 0.5f64.powi(i as i32 - 1))
    }

    #[test]
    fn lord_first_step_uses_lambda_one() {
        let s = halving();
        let mut st = LordState::new();
        let d = st.step(&s, 0.04).unwrap();
        assert_eq!(d.alpha, 0.05);
        assert!(d.rejected);
        assert_eq!(st.last_discovery(), 1);
    }

    #[test]
    fn lord_hand_trace() {
        let d = run_stream(Procedure::Lord, &halving(), &[0.01, 0.9, 0.02]).unwrap();
        let alphas: Vec<f64> = d.iter().map(|d| d.alpha).collect();
        let rej: Vec<bool> = d.iter().map(|d| d.rejected).collect();
        assert_eq!(alphas, vec![0.05, 0.05, 0.025]);
        assert_eq!(rej, vec![true, false, true]);
    }

    #[test]
    fn lond_hand_trace() {
        let d = run_stream(Procedure::Lond, &halving(), &[0.01, 0.9, 0.02]).unwrap();
        let alphas: Vec<f64> = d.iter().map(|d| d.alpha).collect();
        let rej: Vec<bool> = d.iter().map(|d| d.rejected).collect();
        assert_eq!(alphas, vec![0.05, 0.05, 0.025]);
        assert_eq!(rej, vec![true, false, true]);
    }

    #[test]
    fn accept_prefix_walks_the_schedule() {
        let s = halving();
        for proc in [Procedure::Lord, Procedure::Lond] {
            let d = run_stream(proc, &s, &[1.0; 6]).unwrap();
            for (k, dec) in d.iter().enumerate() {
                assert_eq!(dec.alpha, s.lambda(k as u64 + 1));
                assert!(!dec.rejected);
            }
        }
    }

    #[test]
    fn equality_counts_as_rejection() {
        let s = halving();
        let d = run_stream(Procedure::Lord, &s, &[0.05]).unwrap();
        assert!(d[0].rejected);
    }

    #[test]
    fn lond_clamps_at_one() {
        // λ_i = 0.6 for the first two indices: after one rejection α_2 = 1.2 → 1
        let s = LambdaSchedule::from_fn_for_tests(1.2, |i| if i <= 2 { 0.6 } else { 0.0 });
        let d = run_stream(Procedure::Lond, &s, &[0.1, 1.0]).unwrap();
        assert_eq!(d[1].alpha, 1.0);
        assert!(d[1].rejected);
    }

    #[test]
    fn bad_pvalues_are_rejected() {
        let s = halving();
        for bad in [f64::NAN, -0.01, 1.5] {
            assert!(LordState::new().step(&s, bad).is_err());
            assert!(LondState::new().step(&s, bad).is_err());
        }
        assert!(bh_reject(&[0.1, f64::NAN], 0.1).is_err());
    }

    #[test]
    fn empty_stream() {
        let s = halving();
        assert!(run_stream(Procedure::Lord, &s, &[]).unwrap().is_empty());
        assert!(bh_reject(&[], 0.1).unwrap().is_empty());
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_reject(&[0.01, 0.04, 0.5], 0.1).unwrap(), vec![1, 2]);
        assert!(bh_reject(&[0.9, 0.8, 0.7], 0.1).unwrap().is_empty());
        assert_eq!(bh_reject(&[1e-9], 0.1).unwrap(), vec![1]);
        // step-up: p_(1) fails its own threshold but p_(2) passes
        assert_eq!(bh_reject(&[0.06, 0.05], 0.1).unwrap(), vec![1, 2]);
        // ties at the cutoff are all rejected
        assert_eq!(bh_reject(&[0.05, 0.05, 0.9], 0.1).unwrap(), vec![1, 2]);
        assert!(bh_reject(&[0.1], 1.0).is_err());
    }

    #[test]
    fn bh_decisions_satisfy_level_invariant() {
        let p = [0.01, 0.04, 0.5, 0.03, 0.2];
        for q in [0.01, 0.1, 0.5] {
            for d in bh_decisions(&p, q).unwrap() {
                assert_eq!(d.rejected, d.p <= d.alpha);
            }
        }
    }

    #[test]
    fn bh_cannot_stream() {
        let s = halving();
        assert!(OnlineEngine::new(Procedure::Bh, s).is_err());
    }

    #[test]
    fn decision_display() {
        let d = Decision {
            index: 3,
            alpha: 0.025,
            p: 0.02,
            rejected: true,
        };
        assert_eq!(d.to_string(), "3 0.025 0.02 REJECT");
    }

    #[test]
    fn procedure_parsing() {
        assert_eq!("LORD".parse::<Procedure>().unwrap(), Procedure::Lord);
        assert_eq!("bh".parse::<Procedure>().unwrap(), Procedure::Bh);
        assert!("holm".parse::<Procedure>().is_err());
    }

    #[test]
    fn engine_counts() {
        let s = LambdaSchedule::new(ScheduleKind::Power { nu: 2.0 }, 0.1).unwrap();
        let mut e = OnlineEngine::new(Procedure::Lond, s).unwrap();
        for p in [0.001, 0.9, 0.0001, 0.5] {
            e.step(p).unwrap();
        }
        assert_eq!(e.tested(), 4);
        assert_eq!(e.discoveries(), 2);
    }
}

//! Computable lower bounds on the error of any factorization of `A_chi`, and
//! unit-constant rate expressions used as trend predictors.
//!
//! Logarithms are natural throughout. `t` is 1-based in reports.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::metrics::ParticipationSchema;
use crate::schedules::Schedule;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lb_maxse: f64,
    pub argmax_maxse: usize,
    pub lb_meanse: f64,
    pub argmax_meanse: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multi: Option<MultiBound>,
}

/// Both terms of the multi-participation bound; `value` is their maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiBound {
    pub value: f64,
    pub first_term: f64,
    pub argmax_t: usize,
    pub second_term: f64,
}

/// Running minimum `min_{j <= t} chi_j` for every `t`.
fn running_min(chi: &[f64]) -> Vec<f64> {
    chi.iter()
        .scan(f64::INFINITY, |m, &x| {
            *m = m.min(x);
            Some(*m)
        })
        .collect()
}

/// Maximum of `term(t)` over `t = 1..=n` with the first maximizer.
fn argmax(n: usize, term: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut best = (term(1), 1);
    for t in 2..=n {
        let v = term(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best
}

/// `max_t (1/pi) min_{j<=t} chi_j ln t` and the same with the factor `sqrt(t/n)`.
pub fn lb_single(s: &Schedule) -> BoundReport {
    let chi = s.values();
    let n = chi.len();
    let m = running_min(chi);
    let base = |t: usize| m[t - 1] * (t as f64).ln() / PI;
    let (lb_maxse, argmax_maxse) = argmax(n, base);
    let (lb_meanse, argmax_meanse) = argmax(n, |t| base(t) * (t as f64 / n as f64).sqrt());
    BoundReport {
        lb_maxse,
        argmax_maxse,
        lb_meanse,
        argmax_meanse,
        multi: None,
    }
}

/// The multi-participation bound for a min-separation schema.
///
/// The second term `sum_{j<k} chi_{1+jb} (1 - j/(k-1))` is undefined at
/// `k = 1`; there it is taken as `chi_1`, the one-participation sum.
pub fn multi_bound(s: &Schedule, schema: ParticipationSchema) -> Result<MultiBound> {
    let chi = s.values();
    let n = chi.len();
    let (b, k) = match schema {
        ParticipationSchema::MinSep { b, k } if b >= 1 && k >= 1 => (b, k),
        _ => {
            return Err(invalid(
                "the multi-participation bound needs a min-separation schema",
            ))
        }
    };
    let last = 1 + (k - 1) * b;
    if last > n {
        return Err(Error::SchemaOutOfRange { index: last, n });
    }
    let m = running_min(chi);
    let scale = (k as f64).sqrt() / (PI * SQRT_2 * n as f64);
    let (first_term, argmax_t) = argmax(n, |t| {
        scale * t as f64 * chi[t - 1] * m[t - 1] * (t as f64).ln()
    });
    let second_term = if k == 1 {
        chi[0]
    } else {
        (0..k)
            .map(|j| chi[j * b] * (1.0 - j as f64 / (k - 1) as f64))
            .sum()
    };
    Ok(MultiBound {
        value: first_term.max(second_term),
        first_term,
        argmax_t,
        second_term,
    })
}

pub fn lb_multi(s: &Schedule, schema: ParticipationSchema) -> Result<f64> {
    multi_bound(s, schema).map(|m| m.value)
}

/// [`lb_single`] plus, for min-separation schemas, [`multi_bound`].
pub fn bound_report(s: &Schedule, schema: ParticipationSchema) -> Result<BoundReport> {
    let mut r = lb_single(s);
    if schema != ParticipationSchema::Single {
        r.multi = Some(multi_bound(s, schema)?);
    }
    Ok(r)
}

/// Rate expressions for exponential decay with unit leading constant.
/// `L = ln(1/beta)` below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RateFamily {
    /// `sqrt(ln n) sqrt(ln(n/L))`
    MaxsePrefixExp,
    /// `ln n / sqrt(L)`
    MeansePrefixExp,
    /// `ln(n/L)`
    MaxseLrAware,
    /// `sqrt(ln n / L) sqrt(ln(n/L))`
    MeanseLrAware,
    /// `(sqrt(k) ln n + k) / sqrt(L)`
    MultiPrefixExp,
    /// `ln(n/L)`
    LowerMaxse,
    /// `ln(n/L) / sqrt(L)`
    LowerMeanse,
    /// `sqrt(k) ln(n/L) / L + k / L`
    MultiLowerExp,
}

impl RateFamily {
    pub const ALL: [RateFamily; 8] = [
        RateFamily::MaxsePrefixExp,
        RateFamily::MeansePrefixExp,
        RateFamily::MaxseLrAware,
        RateFamily::MeanseLrAware,
        RateFamily::MultiPrefixExp,
        RateFamily::LowerMaxse,
        RateFamily::LowerMeanse,
        RateFamily::MultiLowerExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RateFamily::MaxsePrefixExp => "maxse_prefix_exp",
            RateFamily::MeansePrefixExp => "meanse_prefix_exp",
            RateFamily::MaxseLrAware => "maxse_lr_aware",
            RateFamily::MeanseLrAware => "meanse_lr_aware",
            RateFamily::MultiPrefixExp => "multi_prefix_exp",
            RateFamily::LowerMaxse => "lower_maxse",
            RateFamily::LowerMeanse => "lower_meanse",
            RateFamily::MultiLowerExp => "multi_lower_exp",
        }
    }

    fn needs_k(self) -> bool {
        matches!(self, RateFamily::MultiPrefixExp | RateFamily::MultiLowerExp)
    }
}

impl fmt::Display for RateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RateFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown rate family '{s}'")))
    }
}

/// Evaluates `family` at real-valued `n`. `k` is required by the
/// multi-participation families and ignored otherwise.
pub fn rate_predictor(family: RateFamily, n: f64, beta: f64, k: Option<usize>) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta = {beta} outside (0, 1)")));
    }
    let l = (1.0 / beta).ln();
    if !(n > l.max(1.0)) {
        return Err(invalid(format!("n = {n} must exceed max(1, ln(1/beta))")));
    }
    let k = match (family.needs_k(), k) {
        (true, Some(k)) if k >= 1 => k as f64,
        (true, _) => return Err(invalid(format!("{family} requires k >= 1"))),
        (false, _) => 0.0,
    };
    let ln_n = n.ln();
    let ln_ratio = (n / l).ln();
    Ok(match family {
        RateFamily::MaxsePrefixExp => (ln_n * ln_ratio).sqrt(),
        RateFamily::MeansePrefixExp => ln_n / l.sqrt(),
        RateFamily::MaxseLrAware | RateFamily::LowerMaxse => ln_ratio,
        RateFamily::MeanseLrAware => (ln_n / l * ln_ratio).sqrt(),
        RateFamily::MultiPrefixExp => (k.sqrt() * ln_n + k) / l.sqrt(),
        RateFamily::LowerMeanse => ln_ratio / l.sqrt(),
        RateFamily::MultiLowerExp => k.sqrt() * ln_ratio / l + k / l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{make_schedule, ScheduleKind};
    use proptest::prelude::*;

    fn sched(kind: ScheduleKind, n: usize, beta: f64) -> Schedule {
        let g = (kind == ScheduleKind::Polynomial).then_some(1.5);
        make_schedule(kind, n, beta, g).unwrap()
    }

    #[test]
    fn constant_single_bound() {
        let r = lb_single(&sched(ScheduleKind::Constant, 100, 1.0));
        assert!((r.lb_maxse - 100f64.ln() / PI).abs() < 1e-15);
        assert!((r.lb_maxse - 1.4658).abs() < 1e-4);
        assert_eq!(r.argmax_maxse, 100);
        assert_eq!(r.argmax_meanse, 100);
    }

    #[test]
    fn two_steps() {
        for kind in ScheduleKind::ALL {
            let s = sched(kind, 2, 0.3);
            let r = lb_single(&s);
            assert!((r.lb_maxse - s.values()[1] * 2f64.ln() / PI).abs() < 1e-15);
        }
    }

    #[test]
    fn single_bound_brute_force() {
        let s = sched(ScheduleKind::Cosine, 300, 0.05);
        let chi = s.values();
        let mut best = (0.0f64, 0.0f64);
        for t in 1..=300 {
            let min = chi[..t].iter().cloned().fold(f64::INFINITY, f64::min);
            let v = min * (t as f64).ln() / PI;
            best = (best.0.max(v), best.1.max(v * (t as f64 / 300.0).sqrt()));
        }
        let r = lb_single(&s);
        assert_eq!((r.lb_maxse, r.lb_meanse), best);
    }

    #[test]
    fn multi_second_term() {
        let s = sched(ScheduleKind::Constant, 16, 1.0);
        let m = multi_bound(&s, ParticipationSchema::MinSep { b: 4, k: 4 }).unwrap();
        // 1 + 2/3 + 1/3 + 0
        assert!((m.second_term - 2.0).abs() < 1e-15);
        let m = multi_bound(&s, ParticipationSchema::MinSep { b: 16, k: 1 }).unwrap();
        assert_eq!(m.second_term, 1.0);
        assert_eq!(m.value, m.first_term.max(1.0));
        assert!(matches!(
            lb_multi(&s, ParticipationSchema::MinSep { b: 4, k: 5 }),
            Err(Error::SchemaOutOfRange { index: 17, n: 16 })
        ));
        assert!(lb_multi(&s, ParticipationSchema::Single).is_err());
    }

    #[test]
    fn rate_examples() {
        let v = rate_predictor(RateFamily::MaxseLrAware, 8f64.exp(), (-1f64).exp(), None).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
        let v = rate_predictor(RateFamily::MeansePrefixExp, 2048.0, (-4f64).exp(), None).unwrap();
        assert!((v - 2048f64.ln() / 2.0).abs() < 1e-12);
        assert!(rate_predictor(RateFamily::MultiPrefixExp, 2048.0, 0.1, None).is_err());
        assert!("nonsense".parse::<RateFamily>().is_err());
        for f in RateFamily::ALL {
            assert_eq!(f.name().parse::<RateFamily>().unwrap(), f);
        }
    }

    proptest! {
        #[test]
        fn meanse_bound_below_maxse_bound(
            kind_idx in 0usize..5, n in 2usize..400, beta in 0.01f64..1.0,
        ) {
            let kind = ScheduleKind::ALL[kind_idx];
            let beta = if kind == ScheduleKind::Constant { 1.0 } else { beta };
            let r = lb_single(&sched(kind, n, beta));
            prop_assert!(r.lb_meanse <= r.lb_maxse);
            prop_assert!(r.lb_meanse >= 0.0);
            prop_assert!((1..=n).contains(&r.argmax_maxse));
            prop_assert!((1..=n).contains(&r.argmax_meanse));
        }
    }
}

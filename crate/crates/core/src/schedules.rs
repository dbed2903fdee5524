//! Learning-rate schedules `chi_1 .. chi_n`.
//!
//! Every decay starts at `chi_1 = 1` and ends at `chi_n = beta`. Formulas are
//! written as `1 - (1 - beta) * decay(k)` so the first value is exactly one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance for schedule invariants.
pub const SCHEDULE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Exponential,
    Polynomial,
    Linear,
    Cosine,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 5] = [
        ScheduleKind::Constant,
        ScheduleKind::Exponential,
        ScheduleKind::Polynomial,
        ScheduleKind::Linear,
        ScheduleKind::Cosine,
    ];

    /// The four decaying schedules.
    pub const DECAYS: [ScheduleKind; 4] = [
        ScheduleKind::Exponential,
        ScheduleKind::Polynomial,
        ScheduleKind::Linear,
        ScheduleKind::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Exponential => "exponential",
            ScheduleKind::Polynomial => "polynomial",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
        }
    }

    /// Raw decay formula for step `k` (1-based) of `n`.
    ///
    /// No validation beyond `n >= 2`: `beta = 0` is accepted here so the
    /// formulas can be probed at the boundary. `gamma` is only read by the
    /// polynomial decay.
    pub fn value(self, k: usize, n: usize, beta: f64, gamma: f64) -> f64 {
        debug_assert!(n >= 2 && (1..=n).contains(&k));
        let frac = (k - 1) as f64 / (n - 1) as f64;
        match self {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::Exponential => beta.powf(frac),
            ScheduleKind::Linear => 1.0 - frac * (1.0 - beta),
            ScheduleKind::Cosine => {
                1.0 - (1.0 - beta) * 0.5 * (1.0 - (frac * std::f64::consts::PI).cos())
            }
            ScheduleKind::Polynomial => {
                let n_pow = (n as f64).powf(gamma);
                let ratio_pow = (n as f64 / k as f64).powf(gamma);
                1.0 - (1.0 - beta) * (n_pow - ratio_pow) / (n_pow - 1.0)
            }
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown schedule kind '{s}'")))
    }
}

/// A validated learning-rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct Schedule {
    kind: ScheduleKind,
    n: usize,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSchedule {
    kind: ScheduleKind,
    n: usize,
    beta: f64,
    #[serde(default)]
    gamma: Option<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        let s = make_schedule(raw.kind, raw.n, raw.beta, raw.gamma)?;
        if raw.values.len() != s.n
            || raw
                .values
                .iter()
                .zip(&s.values)
                .any(|(a, b)| (a - b).abs() > SCHEDULE_TOL)
        {
            return Err(invalid("schedule values do not match kind/n/beta/gamma"));
        }
        Ok(s)
    }
}

/// Builds the schedule `kind` with `n` steps, final value `beta`.
pub fn make_schedule(
    kind: ScheduleKind,
    n: usize,
    beta: f64,
    gamma: Option<f64>,
) -> Result<Schedule> {
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    match (kind, gamma) {
        (ScheduleKind::Polynomial, None) => {
            return Err(invalid("polynomial schedule requires gamma"));
        }
        (ScheduleKind::Polynomial, Some(g)) if !(g >= 1.0) || !g.is_finite() => {
            return Err(invalid(format!("gamma must be >= 1, got {g}")));
        }
        (ScheduleKind::Polynomial, Some(_)) => {}
        (other, Some(_)) => {
            return Err(invalid(format!(
                "gamma is only valid for polynomial, not {other}"
            )));
        }
        (_, None) => {}
    }
    let values = if beta == 1.0 {
        vec![1.0; n]
    } else {
        let g = gamma.unwrap_or(1.0);
        (1..=n).map(|k| kind.value(k, n, beta, g)).collect()
    };
    Ok(Schedule {
        kind,
        n,
        beta,
        gamma,
        values,
    })
}

impl Schedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// `chi_1 .. chi_n`, stored 0-based.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_regularity(&self, c: f64) -> Result<RegularityReport> {
        check_regularity_condition(&self.values, c)
    }
}

/// Regularity diagnostics for a schedule's increments `Delta_t = |chi_t - chi_{t+1}|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `max_t Delta_t * t * (1 + ln t)`; the pointwise condition holds iff this is `<= c`.
    pub max_scaled_delta: f64,
    pub sum_sq_delta: f64,
    /// `Delta_t <= c / (t (1 + ln t))` for every `t`.
    pub passes_pointwise: bool,
    /// Diagnostic proxy only: `sum Delta_t^2 <= c ln(n) / n`. The underlying
    /// condition is asymptotic and has no exact finite-`n` form.
    pub passes_aggregate: bool,
}

/// Evaluates both regularity conditions on a raw value sequence.
pub fn check_regularity_condition(values: &[f64], c: f64) -> Result<RegularityReport> {
    let n = values.len();
    if n < 2 {
        return Err(invalid(format!("need at least 2 values, got {n}")));
    }
    if !(c > 0.0) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    let mut max_scaled = 0.0f64;
    let mut sum_sq = 0.0;
    let mut pointwise = true;
    for (idx, w) in values.windows(2).enumerate() {
        let t = (idx + 1) as f64;
        let delta = (w[0] - w[1]).abs();
        let weight = t * (1.0 + t.ln());
        max_scaled = max_scaled.max(delta * weight);
        if delta > c / weight {
            pointwise = false;
        }
        sum_sq += delta * delta;
    }
    let nf = n as f64;
    Ok(RegularityReport {
        max_scaled_delta: max_scaled,
        sum_sq_delta: sum_sq,
        passes_pointwise: pointwise,
        passes_aggregate: sum_sq <= c * nf.ln() / nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_values(s: &[f64], expect: &[f64]) {
        assert_eq!(s.len(), expect.len());
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() <= SCHEDULE_TOL, "{s:?} vs {expect:?}");
        }
    }

    #[test]
    fn table_examples() {
        let e = make_schedule(ScheduleKind::Exponential, 3, 0.25, None).unwrap();
        assert_values(e.values(), &[1.0, 0.5, 0.25]);
        let l = make_schedule(ScheduleKind::Linear, 3, 0.5, None).unwrap();
        assert_values(l.values(), &[1.0, 0.75, 0.5]);
        let c: Vec<f64> = (1..=3)
            .map(|k| ScheduleKind::Cosine.value(k, 3, 0.0, 1.0))
            .collect();
        assert_values(&c, &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn polynomial_matches_independent_evaluation() {
        // beta + (1 - beta) ((n/k)^gamma - 1) / (n^gamma - 1), evaluated directly.
        let p = make_schedule(ScheduleKind::Polynomial, 4, 0.25, Some(1.0)).unwrap();
        assert_values(p.values(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
        let p2 = make_schedule(ScheduleKind::Polynomial, 5, 0.1, Some(2.0)).unwrap();
        let direct: Vec<f64> = (1..=5)
            .map(|k| {
                let k = k as f64;
                0.1 + 0.9 * ((5.0 / k).powi(2) - 1.0) / (25.0 - 1.0)
            })
            .collect();
        assert_values(p2.values(), &direct);
    }

    #[test]
    fn constant_and_beta_one() {
        let c = make_schedule(ScheduleKind::Constant, 7, 0.3, None).unwrap();
        assert_eq!(c.values(), &[1.0; 7]);
        for kind in ScheduleKind::DECAYS {
            let g = (kind == ScheduleKind::Polynomial).then_some(2.0);
            let s = make_schedule(kind, 9, 1.0, g).unwrap();
            assert_eq!(s.values(), &[1.0; 9]);
            assert_eq!(s.kind(), kind);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        use ScheduleKind::*;
        assert!(make_schedule(Linear, 1, 0.5, None).is_err());
        assert!(make_schedule(Linear, 4, 0.0, None).is_err());
        assert!(make_schedule(Linear, 4, 1.5, None).is_err());
        assert!(make_schedule(Linear, 4, f64::NAN, None).is_err());
        assert!(make_schedule(Polynomial, 4, 0.5, Some(0.5)).is_err());
        assert!(make_schedule(Polynomial, 4, 0.5, None).is_err());
        assert!(make_schedule(Cosine, 4, 0.5, Some(2.0)).is_err());
    }

    #[test]
    fn regularity_examples() {
        let c = make_schedule(ScheduleKind::Constant, 50, 1.0, None).unwrap();
        let r = c.check_regularity(1e-6).unwrap();
        assert!(r.passes_pointwise && r.passes_aggregate);
        assert_eq!(r.sum_sq_delta, 0.0);

        let e = make_schedule(ScheduleKind::Exponential, 1024, 0.1, None).unwrap();
        let r = e.check_regularity(1.0).unwrap();
        assert!(r.sum_sq_delta <= 10f64.ln().powi(2) / 1024.0);
        assert!(r.passes_aggregate);

        let lin = [
            ScheduleKind::Linear.value(1, 2, 0.0, 1.0),
            ScheduleKind::Linear.value(2, 2, 0.0, 1.0),
        ];
        let r = check_regularity_condition(&lin, 0.1).unwrap();
        assert!(!r.passes_pointwise);
        assert_eq!(r.max_scaled_delta, 1.0);
    }

    #[test]
    fn polynomial_is_pointwise_regular_not_aggregate() {
        // The first increment of a polynomial decay is O(1), so only the
        // pointwise form can hold.
        for gamma in [1.0, 2.0] {
            let p = make_schedule(ScheduleKind::Polynomial, 1024, 0.1, Some(gamma)).unwrap();
            let r = p.check_regularity(10.0).unwrap();
            assert!(r.passes_pointwise);
            assert!(!r.passes_aggregate);
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let s = make_schedule(ScheduleKind::Polynomial, 6, 0.2, Some(2.0)).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with(r#"{"kind":"polynomial","n":6,"beta":0.2,"gamma":2.0,"values":["#));
        let back: Schedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let e = make_schedule(ScheduleKind::Linear, 3, 0.5, None).unwrap();
        assert!(!serde_json::to_string(&e).unwrap().contains("gamma"));
        let tampered = r#"{"kind":"linear","n":3,"beta":0.5,"values":[1.0,0.7,0.5]}"#;
        assert!(serde_json::from_str::<Schedule>(tampered).is_err());
    }

    fn any_schedule() -> impl Strategy<Value = Schedule> {
        (0usize..5, 2usize..300, 0.001f64..=1.0, 1.0f64..4.0).prop_map(|(k, n, beta, g)| {
            let kind = ScheduleKind::ALL[k];
            let gamma = (kind == ScheduleKind::Polynomial).then_some(g);
            make_schedule(kind, n, beta, gamma).unwrap()
        })
    }

    proptest! {
        #[test]
        fn invariants_hold(s in any_schedule()) {
            let v = s.values();
            prop_assert_eq!(v[0], 1.0);
            let last = if s.kind() == ScheduleKind::Constant { 1.0 } else { s.beta() };
            prop_assert!((v[s.n() - 1] - last).abs() <= SCHEDULE_TOL);
            for w in v.windows(2) {
                prop_assert!(w[1] <= w[0] + SCHEDULE_TOL);
            }
            let lo = if s.kind() == ScheduleKind::Constant { 1.0 } else { s.beta() };
            for &x in v {
                prop_assert!(x >= lo - SCHEDULE_TOL && x <= 1.0 + SCHEDULE_TOL);
            }
        }

        #[test]
        fn deterministic(s in any_schedule()) {
            let again = make_schedule(s.kind(), s.n(), s.beta(), s.gamma()).unwrap();
            let a: Vec<u64> = s.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = again.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        // Uniform decays meet the aggregate proxy; the polynomial decay meets
        // the pointwise form.
        #[test]
        fn decays_are_regular(k in 0usize..4, n in 64usize..2048, beta in 0.001f64..0.367, g in 1.0f64..3.0) {
            let kind = ScheduleKind::DECAYS[k];
            let gamma = (kind == ScheduleKind::Polynomial).then_some(g);
            let r = make_schedule(kind, n, beta, gamma).unwrap().check_regularity(10.0).unwrap();
            if kind == ScheduleKind::Polynomial {
                prop_assert!(r.passes_pointwise);
            } else {
                prop_assert!(r.passes_aggregate);
            }
        }
    }
}

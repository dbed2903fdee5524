//! Workload matrices `A_chi = A_1 * diag(chi)` and `A_chi^Toep`.
//!
//! The base learning rate is fixed to one here; the simulator applies `eta`.

use crate::schedules::Schedule;
use crate::tri_matrix::{LowerTriangular, ToeplitzLT};

#[derive(Clone, Debug)]
pub struct Workload {
    schedule: Schedule,
    a_chi: LowerTriangular,
    a_toep: ToeplitzLT,
}

pub fn build_workload(schedule: &Schedule) -> Workload {
    let chi = schedule.values();
    Workload {
        a_chi: LowerTriangular::from_fn(chi.len(), |_, l| chi[l]),
        a_toep: ToeplitzLT::new(chi.to_vec()).expect("schedule has n >= 2"),
        schedule: schedule.clone(),
    }
}

impl Workload {
    pub fn new(schedule: &Schedule) -> Self {
        build_workload(schedule)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn chi(&self) -> &[f64] {
        self.schedule.values()
    }

    pub fn n(&self) -> usize {
        self.a_chi.n()
    }

    /// `A_chi`, entry `(m, l) = chi_l` for `l <= m`.
    pub fn a_chi(&self) -> &LowerTriangular {
        &self.a_chi
    }

    /// Toeplitz matrix with `chi` down its first column.
    pub fn a_toep(&self) -> &ToeplitzLT {
        &self.a_toep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{make_schedule, ScheduleKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_is_prefix_sum() {
        let s = make_schedule(ScheduleKind::Constant, 3, 1.0, None).unwrap();
        assert_eq!(build_workload(&s).a_chi(), &LowerTriangular::ones(3));
    }

    #[test]
    fn exponential_columns() {
        let s = make_schedule(ScheduleKind::Exponential, 3, 0.25, None).unwrap();
        let w = build_workload(&s);
        assert_eq!(w.a_chi().column(0), vec![1.0, 1.0, 1.0]);
        assert_eq!(w.a_chi().column(1), vec![0.5, 0.5]);
        assert_eq!(w.a_chi().column(2), vec![0.25]);
        assert_eq!(w.a_toep().coeffs(), s.values());
    }

    #[test]
    fn equals_prefix_times_diagonal() {
        for kind in ScheduleKind::ALL {
            let g = (kind == ScheduleKind::Polynomial).then_some(2.0);
            let s = make_schedule(kind, 17, 0.2, g).unwrap();
            let w = build_workload(&s);
            let direct = LowerTriangular::ones(17).scale_cols(s.values()).unwrap();
            assert_eq!(w.a_chi(), &direct);
        }
    }

    #[test]
    fn reproduces_sgd_recursion() {
        let (n, d) = (16, 3);
        let s = make_schedule(ScheduleKind::Cosine, n, 0.1, None).unwrap();
        let w = build_workload(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut theta = vec![0.0; d];
        for i in 0..n {
            for k in 0..d {
                theta[k] -= s.values()[i] * g[i][k];
            }
            for k in 0..d {
                let ag: f64 = (0..=i).map(|l| w.a_chi().get(i, l) * g[l][k]).sum();
                assert!((theta[k] + ag).abs() < 1e-12);
            }
        }
    }
}

//! Independent re-check of a MIP solution against its constraint system.
//!
//! Works only from the reported `y`, `s`, `p`, `T` and objective; nothing is
//! taken from the solver's internal state.

use serde::Serialize;

use super::{MipInstance, MipSolution, SolveStatus};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ConstraintViolation {
    Shape(String),
    /// `Σ_j s_ij > T`.
    MaxSpread {
        group: usize,
        support: usize,
        t: usize,
    },
    /// `Σ_i p_ij > c_j·y_j`.
    Capacity {
        minipod: usize,
        load: f64,
        capacity: f64,
    },
    /// `Σ_j p_ij ≠ 1`.
    Allocation {
        group: usize,
        total: f64,
    },
    /// `p_ij > s_ij`.
    Selection {
        group: usize,
        minipod: usize,
        p: f64,
    },
    /// `p_ij` outside `[0, 1]` or `T` outside `1..=k`.
    Domain(String),
    Objective {
        reported: f64,
        recomputed: f64,
    },
}

pub fn verify_solution(inst: &MipInstance, sol: &MipSolution) -> Vec<ConstraintViolation> {
    use ConstraintViolation as V;
    let mut out = Vec::new();
    if sol.status == SolveStatus::Infeasible {
        return out;
    }
    let (r, k) = (inst.group_count, inst.minipod_count());
    if sol.y.len() != k
        || sol.s.len() != r
        || sol.p.len() != r
        || sol.s.iter().any(|row| row.len() != k)
        || sol.p.iter().any(|row| row.len() != k)
    {
        out.push(V::Shape(format!(
            "expected {r} groups × {k} minipods, got y={} s={} p={}",
            sol.y.len(),
            sol.s.len(),
            sol.p.len()
        )));
        return out;
    }
    if sol.t == 0 || sol.t > k {
        out.push(V::Domain(format!("T = {} outside 1..={k}", sol.t)));
    }
    let caps = inst.capacities();
    for i in 0..r {
        let support = sol.s[i].iter().filter(|&&b| b).count();
        if support > sol.t {
            out.push(V::MaxSpread {
                group: i,
                support,
                t: sol.t,
            });
        }
        let total: f64 = sol.p[i].iter().sum();
        if (total - 1.0).abs() > TOL {
            out.push(V::Allocation { group: i, total });
        }
        for j in 0..k {
            let p = sol.p[i][j];
            if !(-TOL..=1.0 + TOL).contains(&p) {
                out.push(V::Domain(format!("p[{i}][{j}] = {p}")));
            }
            let s = if sol.s[i][j] { 1.0 } else { 0.0 };
            if p > s + TOL {
                out.push(V::Selection {
                    group: i,
                    minipod: j,
                    p,
                });
            }
        }
    }
    for (j, &cap) in caps.iter().enumerate().take(k) {
        let load: f64 = (0..r).map(|i| sol.p[i][j]).sum();
        let capacity = if sol.y[j] { cap } else { 0.0 };
        if load > capacity + TOL {
            out.push(V::Capacity {
                minipod: j,
                load,
                capacity,
            });
        }
    }
    let used = sol.y.iter().filter(|&&b| b).count();
    let recomputed = inst.objective(used, sol.t);
    if (recomputed - sol.objective).abs() > TOL {
        out.push(V::Objective {
            reported: sol.objective,
            recomputed,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{SchedulingUnit, SolveStats};

    fn inst() -> MipInstance {
        MipInstance {
            group_count: 2,
            group_size: 2,
            available: vec![2, 2],
            alpha: 0.5,
            beta: 0.5,
            unit: SchedulingUnit::Row,
        }
    }

    fn good() -> MipSolution {
        MipSolution::from_counts(
            &inst(),
            &[vec![2, 0], vec![0, 2]],
            SolveStatus::Optimal,
            SolveStats::default(),
        )
    }

    #[test]
    fn accepts_consistent_solution() {
        let sol = good();
        assert_eq!((sol.t, sol.objective), (1, 1.5));
        assert!(verify_solution(&inst(), &sol).is_empty());
    }

    #[test]
    fn flags_each_constraint() {
        let mut sol = good();
        sol.s[0][1] = true;
        assert!(matches!(
            verify_solution(&inst(), &sol)[..],
            [ConstraintViolation::MaxSpread { group: 0, .. }]
        ));

        let mut sol = good();
        sol.p[1] = vec![1.0, 0.0];
        sol.s[1] = vec![true, false];
        let v = verify_solution(&inst(), &sol);
        assert!(v
            .iter()
            .any(|x| matches!(x, ConstraintViolation::Capacity { minipod: 0, .. })));

        let mut sol = good();
        sol.p[0][0] = 0.5;
        assert!(matches!(
            verify_solution(&inst(), &sol)[..],
            [ConstraintViolation::Allocation { group: 0, .. }]
        ));

        let mut sol = good();
        sol.s[0][0] = false;
        sol.s[0][1] = true;
        assert!(verify_solution(&inst(), &sol).iter().any(|x| matches!(
            x,
            ConstraintViolation::Selection {
                group: 0,
                minipod: 0,
                ..
            }
        )));

        let mut sol = good();
        sol.objective = 1.0;
        assert!(matches!(
            verify_solution(&inst(), &sol)[..],
            [ConstraintViolation::Objective { .. }]
        ));

        let mut sol = good();
        sol.y[1] = false;
        assert!(verify_solution(&inst(), &sol)
            .iter()
            .any(|x| matches!(x, ConstraintViolation::Capacity { minipod: 1, .. })));
    }
}

mod common;

use common::{kkt_violation, random_feasible_problem, rng};
use conic::{solve, ConeSpec, ConicProblem, SolveStatus, SolverSettings, SparseMatrix};
use rand::prelude::*;

fn settings(tol: f64) -> SolverSettings {
    SolverSettings::default().with_tolerance(tol)
}

#[test]
fn lp_min_x_subject_to_x_geq_1() {
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![-1.0],
        vec![1.0],
        ConeSpec::new(0, 1, vec![]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
    assert!((sol.objective(&p) - 1.0).abs() < 1e-6);
}

#[test]
fn socp_min_t_norm_3_4_leq_t() {
    // min t s.t. ||(3, 4)|| <= t; slack block (t, 3, 4) in SOC
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(3, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![0.0, 3.0, 4.0],
        vec![1.0],
        ConeSpec::new(0, 0, vec![3]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 5.0).abs() < 1e-6, "t = {}", sol.x[0]);
}

#[test]
fn lp_two_bounds() {
    // min x + y s.t. x >= 2, y >= 3 -> 5
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, -1.0)]).unwrap(),
        vec![-2.0, -3.0],
        vec![1.0, 1.0],
        ConeSpec::new(0, 2, vec![]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert!((sol.objective(&p) - 5.0).abs() < 1e-6);
}

#[test]
fn socp_linear_objective_over_disk() {
    // min -x - y s.t. ||(x, y)|| <= sqrt(2): optimum at x = y = 1, value -2
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(3, 2, &[(1, 0, -1.0), (2, 1, -1.0)]).unwrap(),
        vec![2.0f64.sqrt(), 0.0, 0.0],
        vec![-1.0, -1.0],
        ConeSpec::new(0, 0, vec![3]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert!((sol.objective(&p) + 2.0).abs() < 1e-6);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
    assert!((sol.x[1] - 1.0).abs() < 1e-6);
}

#[test]
fn equality_constrained_lp() {
    // min x1 + 2 x2 s.t. x1 + x2 = 1, x1 - x2 = 0 -> x = (1/2, 1/2), value 1.5
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)])
            .unwrap(),
        vec![1.0, 0.0],
        vec![1.0, 2.0],
        ConeSpec::new(2, 0, vec![]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert!((sol.objective(&p) - 1.5).abs() < 1e-6);
}

#[test]
fn soc_with_fixed_head() {
    // min x s.t. ||(1, x)|| <= 2: x in [-sqrt(3), sqrt(3)], minimum -sqrt(3).
    // Block (2, 1, x): rows b - Ax = (2, 1, x).
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(3, 1, &[(2, 0, -1.0)]).unwrap(),
        vec![2.0, 1.0, 0.0],
        vec![1.0],
        ConeSpec::new(0, 0, vec![3]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &settings(1e-9)).unwrap();
    assert!((sol.x[0] + 3.0f64.sqrt()).abs() < 1e-6, "x = {}", sol.x[0]);
}

/// Acceptance: 100 random feasible SOCPs (n <= 50) solved to KKT residuals
/// and gap <= 1e-6, verified by an independent dense KKT check.
#[test]
fn random_feasible_socps_satisfy_kkt() {
    let mut rng = rng(2024);
    let started = std::time::Instant::now();
    for case in 0..100 {
        let n = rng.gen_range(2..=50);
        let zero = rng.gen_range(0..=n.min(3));
        let nonneg = rng.gen_range(1..=6);
        let nsoc = rng.gen_range(0..=2);
        let soc: Vec<usize> = (0..nsoc).map(|_| rng.gen_range(2..=5)).collect();
        let cones = ConeSpec::new(zero, nonneg, soc).unwrap();
        let p = random_feasible_problem(&mut rng, n, &cones);
        let sol = solve(&p, &settings(1e-7)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "case {case} not optimal");
        let viol = kkt_violation(&p, &sol);
        assert!(viol <= 1e-6, "case {case}: KKT violation {viol:.3e}");
        assert!(sol.residuals.gap <= 1e-6, "case {case}: gap {}", sol.residuals.gap);
    }
    assert!(
        started.elapsed().as_secs() < 60,
        "random suite took {:?}",
        started.elapsed()
    );
}

#[test]
fn detects_primal_infeasibility() {
    // x >= 1 and x <= 0
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(2, 1, &[(0, 0, -1.0), (1, 0, 1.0)]).unwrap(),
        vec![-1.0, 0.0],
        vec![1.0],
        ConeSpec::new(0, 2, vec![]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    // min x s.t. x <= 0
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap(),
        vec![0.0],
        vec![1.0],
        ConeSpec::new(0, 1, vec![]).unwrap(),
    )
    .unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn nan_input_is_a_structural_error() {
    let p = ConicProblem {
        a: SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
        b: vec![f64::NAN],
        c: vec![1.0],
        cones: ConeSpec::new(0, 1, vec![]).unwrap(),
    };
    assert!(solve(&p, &SolverSettings::default()).is_err());
}

#[test]
fn iteration_limit_reported() {
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![-1.0],
        vec![1.0],
        ConeSpec::new(0, 1, vec![]).unwrap(),
    )
    .unwrap();
    let mut s = SolverSettings::default();
    s.max_iters = 2;
    let sol = solve(&p, &s).unwrap();
    assert_eq!(sol.status, SolveStatus::IterLimit);
}

#[test]
fn warm_start_reuses_structure() {
    use conic::PreparedProblem;
    let p = ConicProblem::new(
        SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![-1.0],
        vec![1.0],
        ConeSpec::new(0, 1, vec![]).unwrap(),
    )
    .unwrap();
    let s = settings(1e-9);
    let prep = PreparedProblem::new(&p.a, &p.cones, &s).unwrap();
    let (sol1, warm) = prep.solve_instance(&p.b, &p.c, &s, None).unwrap();
    assert_eq!(sol1.status, SolveStatus::Optimal);
    // shifted bound: x >= 2
    let (sol2, _) = prep.solve_instance(&[-2.0], &p.c, &s, Some(&warm)).unwrap();
    assert_eq!(sol2.status, SolveStatus::Optimal);
    assert!((sol2.x[0] - 2.0).abs() < 1e-6);
    assert!(sol2.iterations <= sol1.iterations);
}

/// Solutions satisfy the spec'd bound: residuals and cone memberships within
/// solver tolerance for optimal statuses.
#[test]
fn optimal_solutions_respect_tolerance_contract() {
    let mut rng = rng(99);
    for _ in 0..10 {
        let cones = ConeSpec::new(1, 3, vec![3]).unwrap();
        let p = random_feasible_problem(&mut rng, 6, &cones);
        let tol = 1e-8;
        let sol = solve(&p, &settings(tol)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.residuals.primal <= tol);
        assert!(sol.residuals.dual <= tol);
        assert!(sol.residuals.gap <= tol);
        let sy: f64 = sol.s.iter().zip(&sol.y).map(|(a, b)| a * b).sum();
        assert!(sy.abs() <= 10.0 * tol);
    }
}

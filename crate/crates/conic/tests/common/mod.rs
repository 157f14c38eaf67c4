//! Shared helpers: random feasible problem generation and an independent
//! dense KKT verifier used as the optimality oracle.

use conic::{ConeSpec, ConicProblem, ConicSolution, SparseMatrix};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Builds a random feasible, bounded conic problem by construction: pick a
/// strictly interior primal-dual pair and back out (b, c).
pub fn random_feasible_problem(rng: &mut ChaCha12Rng, n: usize, cones: &ConeSpec) -> ConicProblem {
    let m = cones.total_dim();
    let mut triplets = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool(0.7) || i % n == j {
                triplets.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, &triplets).unwrap();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s0 = interior_point(rng, cones, false);
    let y0 = interior_point(rng, cones, true);
    let mut b = vec![0.0; m];
    a.matvec(&x0, &mut b);
    for (bi, si) in b.iter_mut().zip(&s0) {
        *bi += si;
    }
    let mut c = vec![0.0; n];
    a.matvec_t(&y0, &mut c);
    for ci in c.iter_mut() {
        *ci = -*ci;
    }
    ConicProblem::new(a, b, c, cones.clone()).unwrap()
}

/// A strictly interior point of K (or K* when `dual`), with healthy margins
/// so the constructed problem has a nondegenerate solution.
pub fn interior_point(rng: &mut ChaCha12Rng, cones: &ConeSpec, dual: bool) -> Vec<f64> {
    let mut v = Vec::with_capacity(cones.total_dim());
    for _ in 0..cones.zero_dim {
        v.push(if dual { rng.gen_range(-1.0..1.0) } else { 0.0 });
    }
    for _ in 0..cones.nonneg_dim {
        v.push(rng.gen_range(0.3..1.5));
    }
    for &d in &cones.soc_dims {
        let x: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.push(norm + rng.gen_range(0.3..1.0));
        v.extend(x);
    }
    v
}

/// Squared distance from v to the cone, computed directly from the cone
/// definition (no projection code involved).
pub fn cone_violation(v: &[f64], cones: &ConeSpec, dual: bool) -> f64 {
    let mut worst = 0.0f64;
    let mut off = 0;
    for _ in 0..cones.zero_dim {
        if !dual {
            worst = worst.max(v[off].abs());
        }
        off += 1;
    }
    for _ in 0..cones.nonneg_dim {
        worst = worst.max((-v[off]).max(0.0));
        off += 1;
    }
    for &d in &cones.soc_dims {
        let t = v[off];
        let norm = v[off + 1..off + d].iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max((norm - t).max(0.0));
        off += d;
    }
    worst
}

/// Exhaustive KKT verification with independent dense arithmetic: primal and
/// dual feasibility, cone membership of s and y, and complementary
/// slackness. Returns the worst violation.
pub fn kkt_violation(problem: &ConicProblem, sol: &ConicSolution) -> f64 {
    let dense = problem.a.to_dense();
    let (n, m) = (problem.n(), problem.m());
    let mut worst = 0.0f64;
    for i in 0..m {
        let mut ax = 0.0;
        for j in 0..n {
            ax += dense[i][j] * sol.x[j];
        }
        worst = worst.max((ax + sol.s[i] - problem.b[i]).abs());
    }
    for j in 0..n {
        let mut aty = 0.0;
        for i in 0..m {
            aty += dense[i][j] * sol.y[i];
        }
        worst = worst.max((aty + problem.c[j]).abs());
    }
    let sy: f64 = sol.s.iter().zip(&sol.y).map(|(a, b)| a * b).sum();
    worst = worst.max(sy.abs());
    worst = worst.max(cone_violation(&sol.s, &problem.cones, false));
    worst = worst.max(cone_violation(&sol.y, &problem.cones, true));
    worst
}

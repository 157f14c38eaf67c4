//! Operator-splitting solver on the homogeneous self-dual embedding.
//!
//! The embedding packs the primal-dual pair into `u = (x, y, tau)`,
//! `v = (0, s, kappa)` with `v = Qu`, `u` in `C = R^n x K* x R+` and `v` in
//! `C*`. Each iteration alternates a linear solve with `(I + Q)`, a
//! projection onto `C`, and an over-relaxed dual update:
//!
//! ```text
//! u~  <- (I + Q)^-1 (u + v)
//! u'  <- Pi_C(alpha u~ + (1 - alpha) u - v)
//! v'  <- v - (alpha u~ + (1 - alpha) u) + u'
//! ```
//!
//! The `(I + Q)` solve reduces, by block elimination, to one solve with the
//! fixed matrix `[[I, A'], [A, -I]]`, handled through the normal equations
//! `(I + A'A)` with a dense Cholesky factorization computed once per problem
//! structure and shared across all right-hand sides. Problems built from the
//! same `A` (for example one per timestep) reuse a [`PreparedProblem`].

use crate::cone::{project_embedding_into, ConeSpec};
use crate::error::ConicError;
use crate::problem::{ConicProblem, ConicSolution, Residuals, SolveStatus, SolverSettings};
use crate::scale::{ruiz, Scaling};
use crate::sparse::SparseMatrix;

const CHECK_INTERVAL: usize = 25;
/// Norm floor for the per-instance rescaling of b and c.
const NORM_FLOOR: f64 = 1e-3;

/// Dense Cholesky with both triangles stored row-major so the two
/// substitution sweeps stream memory contiguously.
struct DenseCholesky {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DenseCholesky {
    /// Factors a symmetric positive definite matrix given as a row-major
    /// dense buffer.
    fn factor(n: usize, a: &[f64]) -> Result<Self, ConicError> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(ConicError::Linalg(format!(
                            "cholesky: non-positive pivot {sum} at {i}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        let mut u = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                u[j * n + i] = l[i * n + j];
            }
        }
        Ok(Self { n, lower: l, upper: u })
    }

    /// Solves `A x = b` in place.
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut sum = b[i];
            let row = &self.lower[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                sum -= lik * b[k];
            }
            b[i] = sum / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            let row = &self.upper[i * n + i + 1..i * n + n];
            for (off, uik) in row.iter().enumerate() {
                sum -= uik * b[i + 1 + off];
            }
            b[i] = sum / self.upper[i * n + i];
        }
    }
}

/// Cached per-structure state: equilibration, the scaled matrix, and the
/// factorization of the reduced linear system. Immutable once built, so
/// instances may be shared across threads and reused for every `(b, c)`.
pub struct PreparedProblem {
    a: SparseMatrix,
    scaled_a: SparseMatrix,
    cones: ConeSpec,
    scaling: Scaling,
    chol: DenseCholesky,
    n: usize,
    m: usize,
}

/// Opaque embedding iterate used to warm-start subsequent solves of
/// structurally identical problems. Carries the primal/dual balance the
/// iterate was produced under so the next solve resumes in the same scaled
/// space.
#[derive(Debug, Clone)]
pub struct WarmStart {
    u: Vec<f64>,
    v: Vec<f64>,
    rho: f64,
    sigma: f64,
}

struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    residuals: Residuals,
}

impl PreparedProblem {
    pub fn new(
        a: &SparseMatrix,
        cones: &ConeSpec,
        settings: &SolverSettings,
    ) -> Result<Self, ConicError> {
        settings.validate()?;
        cones.validate()?;
        if cones.total_dim() != a.rows() {
            return Err(ConicError::InvalidProblem(format!(
                "cone dimension {} != row count {}",
                cones.total_dim(),
                a.rows()
            )));
        }
        let (m, n) = (a.rows(), a.cols());
        let scaling = if settings.scaling {
            ruiz(a, cones)
        } else {
            Scaling::identity(m, n)
        };
        let scaled_a = a.scale_rows_cols(&scaling.d, &scaling.e);

        // Gram matrix I + A'A, dense row-major.
        let mut gram = vec![0.0f64; n * n];
        for j in 0..n {
            gram[j * n + j] = 1.0;
        }
        // accumulate column-pair dot products
        for j in 0..n {
            for k in j..n {
                let mut acc = 0.0;
                let (rj, vj) = {
                    let r = scaled_a.col_range(j);
                    let (ri, vv) = scaled_a.entries();
                    (&ri[r.clone()], &vv[r])
                };
                let (rk, vk) = {
                    let r = scaled_a.col_range(k);
                    let (ri, vv) = scaled_a.entries();
                    (&ri[r.clone()], &vv[r])
                };
                let (mut p, mut q) = (0usize, 0usize);
                while p < rj.len() && q < rk.len() {
                    match rj[p].cmp(&rk[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            acc += vj[p] * vk[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                if acc != 0.0 {
                    gram[j * n + k] += acc;
                    if j != k {
                        gram[k * n + j] += acc;
                    }
                }
            }
        }
        let chol = DenseCholesky::factor(n, &gram)?;
        Ok(Self {
            a: a.clone(),
            scaled_a,
            cones: cones.clone(),
            scaling,
            chol,
            n,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Solves `[[I, A'], [A, -I]] (z1, z2) = (r1, -r2)`, i.e. the system
    /// `z1 + A'z2 = r1`, `-A z1 + z2 = r2`, via the normal equations.
    fn reduced_solve(&self, r1: &[f64], r2: &[f64], z1: &mut [f64], z2: &mut [f64]) {
        // z1 = (I + A'A)^-1 (r1 - A'r2); z2 = A z1 + r2
        self.scaled_a.matvec_t(r2, z1);
        for (z, r) in z1.iter_mut().zip(r1) {
            *z = r - *z;
        }
        self.chol.solve_in_place(z1);
        self.scaled_a.matvec(z1, z2);
        for (z, r) in z2.iter_mut().zip(r2) {
            *z += r;
        }
    }

    fn unscale_candidate(
        &self,
        u: &[f64],
        v: &[f64],
        tau: f64,
        rho: f64,
        sigma: f64,
        b: &[f64],
        c: &[f64],
    ) -> Candidate {
        let (n, m) = (self.n, self.m);
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[j] = self.scaling.e[j] * u[j] / (rho * tau);
        }
        let mut y = vec![0.0; m];
        let mut s = vec![0.0; m];
        for i in 0..m {
            y[i] = self.scaling.d[i] * u[n + i] / (sigma * tau);
            s[i] = v[n + i] / (self.scaling.d[i] * rho * tau);
        }
        let mut work_m = vec![0.0; m];
        self.a.matvec(&x, &mut work_m);
        let mut primal = 0.0f64;
        for i in 0..m {
            primal = primal.max((work_m[i] + s[i] - b[i]).abs());
        }
        let mut work_n = vec![0.0; n];
        self.a.matvec_t(&y, &mut work_n);
        let mut dual = 0.0f64;
        for j in 0..n {
            dual = dual.max((work_n[j] + c[j]).abs());
        }
        let cx: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        let by: f64 = b.iter().zip(&y).map(|(a, b)| a * b).sum();
        Candidate {
            x,
            y,
            s,
            residuals: Residuals {
                primal,
                dual,
                gap: (cx + by).abs(),
            },
        }
    }

    fn residuals_of(&self, x: &[f64], y: &[f64], s: &[f64], b: &[f64], c: &[f64]) -> Residuals {
        let (n, m) = (self.n, self.m);
        let mut work_m = vec![0.0; m];
        self.a.matvec(x, &mut work_m);
        let mut primal = 0.0f64;
        for i in 0..m {
            primal = primal.max((work_m[i] + s[i] - b[i]).abs());
        }
        let mut work_n = vec![0.0; n];
        self.a.matvec_t(y, &mut work_n);
        let mut dual = 0.0f64;
        for j in 0..n {
            dual = dual.max((work_n[j] + c[j]).abs());
        }
        let cx: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        let by: f64 = b.iter().zip(y).map(|(a, b)| a * b).sum();
        Residuals {
            primal,
            dual,
            gap: (cx + by).abs(),
        }
    }

    /// Solves an instance sharing this structure. `b` and `c` are in the
    /// original (unscaled) coordinates, as is everything in the returned
    /// solution.
    pub fn solve_instance(
        &self,
        b: &[f64],
        c: &[f64],
        settings: &SolverSettings,
        warm: Option<&WarmStart>,
    ) -> Result<(ConicSolution, WarmStart), ConicError> {
        settings.validate()?;
        let (n, m) = (self.n, self.m);
        let nn = n + m + 1;
        if b.len() != m || c.len() != n {
            return Err(ConicError::DimensionMismatch(format!(
                "instance data ({}, {}) does not match structure ({m}, {n})",
                b.len(),
                c.len()
            )));
        }
        if b.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite("instance data"));
        }

        // scaled instance data
        let bh: Vec<f64> = b.iter().zip(&self.scaling.d).map(|(bi, di)| bi * di).collect();
        let ch: Vec<f64> = c.iter().zip(&self.scaling.e).map(|(ci, ei)| ci * ei).collect();
        let mut rho = match warm {
            Some(w) if w.u.len() == nn => w.rho,
            _ => 1.0 / bh.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_FLOOR),
        };
        let sigma = match warm {
            Some(w) if w.u.len() == nn => w.sigma,
            _ => 1.0 / ch.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_FLOOR),
        };
        let mut bs: Vec<f64> = bh.iter().map(|v| v * rho).collect();
        let cs: Vec<f64> = ch.iter().map(|v| v * sigma).collect();

        // g = M^-1 (cs, bs) for the Schur complement of the tau row
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; m];
        self.reduced_solve(&cs, &bs, &mut g1, &mut g2);
        let mut gden = 1.0
            + cs.iter().zip(&g1).map(|(a, b)| a * b).sum::<f64>()
            + bs.iter().zip(&g2).map(|(a, b)| a * b).sum::<f64>();

        let mut u = vec![0.0; nn];
        let mut v = vec![0.0; nn];
        match warm {
            Some(w) if w.u.len() == nn => {
                u.copy_from_slice(&w.u);
                v.copy_from_slice(&w.v);
            }
            _ => {
                u[nn - 1] = 1.0;
                v[nn - 1] = 1.0;
            }
        }

        let mut w = vec![0.0; nn];
        let mut ut = vec![0.0; nn];
        let mut rel = vec![0.0; nn];
        let mut proj_in = vec![0.0; nn];
        let mut u_next = vec![0.0; nn];
        let alpha = settings.relaxation;

        let mut best: Option<Candidate> = None;
        let mut iterations = 0;
        // Adaptive primal/dual balance: a persistent imbalance between the
        // primal and dual residuals is cured by rescaling b against c, which
        // only costs a refresh of the Schur vector. The iterate is remapped
        // consistently (x and s live on the b scale, y on the c scale).
        let mut next_adapt = 8 * CHECK_INTERVAL;
        let mut adaptations = 0usize;
        // Stall detector for Newton refinement of the tail: when the best
        // residual stops improving geometrically, one semismooth Newton step
        // on the embedding residual map usually finishes the job.
        let mut stall_mark = (0usize, f64::INFINITY);
        let mut refinements = 0usize;

        for k in 0..settings.max_iters {
            iterations = k + 1;
            for i in 0..nn {
                w[i] = u[i] + v[i];
            }
            // linear step: ut = (I + Q)^-1 w
            {
                let (p1, rest) = ut.split_at_mut(n);
                let (p2, _) = rest.split_at_mut(m);
                self.reduced_solve(&w[..n], &w[n..n + m], p1, p2);
                let hp = cs.iter().zip(p1.iter()).map(|(a, b)| a * b).sum::<f64>()
                    + bs.iter().zip(p2.iter()).map(|(a, b)| a * b).sum::<f64>();
                let z3 = (w[nn - 1] + hp) / gden;
                for (pi, gi) in p1.iter_mut().zip(&g1) {
                    *pi -= z3 * gi;
                }
                for (pi, gi) in p2.iter_mut().zip(&g2) {
                    *pi -= z3 * gi;
                }
                ut[nn - 1] = z3;
            }
            // over-relaxation and projection onto C = R^n x K* x R+
            for i in 0..nn {
                rel[i] = alpha * ut[i] + (1.0 - alpha) * u[i];
                proj_in[i] = rel[i] - v[i];
            }
            project_embedding_into(&proj_in, n, &self.cones, &mut u_next);
            for i in 0..nn {
                v[i] = v[i] - rel[i] + u_next[i];
            }
            std::mem::swap(&mut u, &mut u_next);

            let warm_check = warm.is_some() && k == 0;
            if k % CHECK_INTERVAL == CHECK_INTERVAL - 1 || warm_check {
                let tau = u[nn - 1];
                if tau > 1e-9 {
                    let cand = self.unscale_candidate(&u, &v, tau, rho, sigma, b, c);
                    let done = cand.residuals.max() <= settings.tolerance;
                    // adapt on the *current* residuals, before cand moves
                    let ratio = cand.residuals.primal
                        / cand.residuals.dual.max(cand.residuals.gap).max(1e-300);
                    if best.as_ref().map_or(true, |bst| cand.residuals.max() < bst.residuals.max()) {
                        if done {
                            return Ok(self.finish(cand, SolveStatus::Optimal, iterations, u, v, rho, sigma));
                        }
                        best = Some(cand);
                    } else if done {
                        let cand = best.take().expect("best exists");
                        return Ok(self.finish(cand, SolveStatus::Optimal, iterations, u, v, rho, sigma));
                    }
                    let best_res = best.as_ref().map_or(f64::INFINITY, |b| b.residuals.max());
                    if best_res < 0.3 * stall_mark.1 {
                        stall_mark = (k, best_res);
                    }
                    if k - stall_mark.0 >= 1500
                        && refinements < 8
                        && best_res <= 1e5 * settings.tolerance
                        && best_res.is_finite()
                    {
                        refinements += 1;
                        stall_mark = (k, best_res);
                        if let Some(bst) = &best {
                            if let Some((rx, ry, rs)) = crate::diff::refine_triple(
                                &self.a, b, c, &self.cones, &bst.x, &bst.y, &bst.s, 2,
                            ) {
                                let res = self.residuals_of(&rx, &ry, &rs, b, c);
                                if res.max() < best_res {
                                    let cand = Candidate {
                                        x: rx,
                                        y: ry,
                                        s: rs,
                                        residuals: res,
                                    };
                                    if res.max() <= settings.tolerance {
                                        return Ok(self.finish(
                                            cand,
                                            SolveStatus::Optimal,
                                            iterations,
                                            u,
                                            v,
                                            rho,
                                            sigma,
                                        ));
                                    }
                                    // restart the splitting from the sharper point
                                    for j in 0..n {
                                        u[j] = self.scaling.e[j].recip() * cand.x[j] * rho;
                                    }
                                    for i in 0..m {
                                        u[n + i] = sigma * cand.y[i] / self.scaling.d[i];
                                        v[n + i] = rho * self.scaling.d[i] * cand.s[i];
                                    }
                                    u[nn - 1] = 1.0;
                                    v[nn - 1] = 0.0;
                                    for i in 0..n {
                                        v[i] = 0.0;
                                    }
                                    best = Some(cand);
                                }
                            }
                        }
                    }
                    if k + 1 >= next_adapt && adaptations < 64 && !(0.2..=5.0).contains(&ratio) {
                        let f = ratio.sqrt().clamp(0.05, 20.0);
                        rho *= f;
                        for (bi, hi) in bs.iter_mut().zip(&bh) {
                            *bi = hi * rho;
                        }
                        for i in 0..n {
                            u[i] *= f;
                        }
                        for i in 0..m {
                            v[n + i] *= f;
                        }
                        self.reduced_solve(&cs, &bs, &mut g1, &mut g2);
                        gden = 1.0
                            + cs.iter().zip(&g1).map(|(a, b)| a * b).sum::<f64>()
                            + bs.iter().zip(&g2).map(|(a, b)| a * b).sum::<f64>();
                        adaptations += 1;
                        next_adapt = k + 1 + 40 * CHECK_INTERVAL;
                        log::trace!(
                            "rebalanced rho by {f:.2e} at iteration {k} (pri/dual {ratio:.2e})"
                        );
                    }
                }
                // certificate checks, in original coordinates
                let mut yc: Vec<f64> = (0..m).map(|i| self.scaling.d[i] * u[n + i]).collect();
                let bty: f64 = b.iter().zip(&yc).map(|(a, b)| a * b).sum();
                if bty < -1e-12 {
                    for yi in yc.iter_mut() {
                        *yi /= -bty;
                    }
                    let mut aty = vec![0.0; n];
                    self.a.matvec_t(&yc, &mut aty);
                    let viol = aty.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                    if viol <= settings.tolerance {
                        return Ok(self.certificate(SolveStatus::Infeasible, yc, iterations, u, v, rho, sigma));
                    }
                }
                let mut xc: Vec<f64> = (0..n).map(|j| self.scaling.e[j] * u[j]).collect();
                let ctx: f64 = c.iter().zip(&xc).map(|(a, b)| a * b).sum();
                if ctx < -1e-12 {
                    let mut sc: Vec<f64> = (0..m).map(|i| v[n + i] / self.scaling.d[i]).collect();
                    for xi in xc.iter_mut() {
                        *xi /= -ctx;
                    }
                    for si in sc.iter_mut() {
                        *si /= -ctx;
                    }
                    let mut ax = vec![0.0; m];
                    self.a.matvec(&xc, &mut ax);
                    let viol = ax
                        .iter()
                        .zip(&sc)
                        .fold(0.0f64, |acc, (a, s)| acc.max((a + s).abs()));
                    if viol <= settings.tolerance {
                        let mut sol = self.certificate(SolveStatus::Unbounded, xc, iterations, u, v, rho, sigma);
                        sol.0.s = sc;
                        return Ok(sol);
                    }
                }
            }
        }

        let tau = u[nn - 1];
        let mut cand = if tau > 1e-9 {
            let cand = self.unscale_candidate(&u, &v, tau, rho, sigma, b, c);
            match best {
                Some(bst) if bst.residuals.max() <= cand.residuals.max() => bst,
                _ => cand,
            }
        } else {
            best.unwrap_or(Candidate {
                x: vec![0.0; n],
                y: vec![0.0; m],
                s: vec![0.0; m],
                residuals: Residuals {
                    primal: f64::INFINITY,
                    dual: f64::INFINITY,
                    gap: f64::INFINITY,
                },
            })
        };
        // last-chance refinement before reporting an iteration limit
        if cand.residuals.max().is_finite() {
            if let Some((rx, ry, rs)) =
                crate::diff::refine_triple(&self.a, b, c, &self.cones, &cand.x, &cand.y, &cand.s, 3)
            {
                let res = self.residuals_of(&rx, &ry, &rs, b, c);
                if res.max() < cand.residuals.max() {
                    cand = Candidate {
                        x: rx,
                        y: ry,
                        s: rs,
                        residuals: res,
                    };
                }
            }
        }
        let status = if cand.residuals.max() <= settings.tolerance {
            SolveStatus::Optimal
        } else {
            SolveStatus::IterLimit
        };
        Ok(self.finish(cand, status, iterations, u, v, rho, sigma))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        cand: Candidate,
        status: SolveStatus,
        iterations: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        rho: f64,
        sigma: f64,
    ) -> (ConicSolution, WarmStart) {
        let (n, m) = (self.n, self.m);
        // Embedding point reconstructed from the unscaled triple: at an
        // optimum, z = (x, y - s, 1) satisfies N(z, Q) = residuals.
        let mut z = Vec::with_capacity(n + m + 1);
        z.extend_from_slice(&cand.x);
        for i in 0..m {
            z.push(cand.y[i] - cand.s[i]);
        }
        z.push(1.0);
        (
            ConicSolution {
                x: cand.x,
                y: cand.y,
                s: cand.s,
                z,
                omega: 1.0,
                status,
                residuals: cand.residuals,
                iterations,
            },
            WarmStart { u, v, rho, sigma },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn certificate(
        &self,
        status: SolveStatus,
        ray: Vec<f64>,
        iterations: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        rho: f64,
        sigma: f64,
    ) -> (ConicSolution, WarmStart) {
        let (n, m) = (self.n, self.m);
        let (x, y) = match status {
            SolveStatus::Infeasible => (vec![0.0; n], ray),
            _ => (ray, vec![0.0; m]),
        };
        (
            ConicSolution {
                x,
                y,
                s: vec![0.0; m],
                z: vec![0.0; n + m + 1],
                omega: 0.0,
                status,
                residuals: Residuals {
                    primal: f64::INFINITY,
                    dual: f64::INFINITY,
                    gap: f64::INFINITY,
                },
                iterations,
            },
            WarmStart { u, v, rho, sigma },
        )
    }
}

/// One-shot solve of a conic problem.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    let prepared = PreparedProblem::new(&problem.a, &problem.cones, settings)?;
    let (solution, _) = prepared.solve_instance(&problem.b, &problem.c, settings, None)?;
    Ok(solution)
}

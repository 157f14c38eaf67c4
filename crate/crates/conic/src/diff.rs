//! Derivatives of the conic solution map.
//!
//! The solution map factors as `S = phi . s . Q`: pack the data into the
//! skew-symmetric matrix `Q(A, b, c)`, find the zero `z` of the normalized
//! residual map of the homogeneous self-dual embedding,
//!
//! ```text
//! N(z, Q) = ((Q - I) Pi + I)(z / |w|),
//! ```
//!
//! with `Pi` the projection onto `R^n x K* x R+` and `w` the last component
//! of `z`, then read the solution off as
//!
//! ```text
//! phi(z) = (u, Pi_K*(v), Pi_K*(v) - v) / w.
//! ```
//!
//! [`vjp_solution_map`] pulls a gradient in solution space back to `(A, b,
//! c)` by transposing that chain: apply `D phi(z)'`, solve the adjoint
//! system with `D_z N(z, Q)'`, and scatter the resulting rank-one gradient
//! of `Q` into the blocks of the data layout. The adjoint system is solved
//! by dense LU; when the factorization is singular or its residual is poor
//! (degenerate optima), a damped LSQR least-squares fallback takes over.

use crate::cone::{
    dproject_cone, dproject_embedding, project_cone_into, project_embedding, ConeSpec,
    EmbeddingJacobian,
};
use crate::error::ConicError;
use crate::lapack;
use crate::lsqr::lsqr;
use crate::problem::{ConicProblem, ConicSolution, SolveStatus};
use crate::sparse::SparseMatrix;

/// Gradients of a scalar with respect to the optimal `(x, y, s)`.
#[derive(Debug, Clone)]
pub struct SolutionGradients {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub ds: Vec<f64>,
}

impl SolutionGradients {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            dx: vec![0.0; n],
            dy: vec![0.0; m],
            ds: vec![0.0; m],
        }
    }

    /// Gradient with respect to the primal solution only.
    pub fn from_dx(dx: Vec<f64>, m: usize) -> Self {
        Self {
            dy: vec![0.0; m],
            ds: vec![0.0; m],
            dx,
        }
    }
}

/// Gradients with respect to the problem data. `da` shares the sparsity
/// pattern of the problem's `A`.
#[derive(Debug, Clone)]
pub struct ParamGradients {
    pub da: SparseMatrix,
    pub db: Vec<f64>,
    pub dc: Vec<f64>,
}

/// The skew-symmetric data matrix
/// `Q = [[0, A', c], [-A, 0, b], [-c', -b', 0]]`.
pub fn build_q(problem: &ConicProblem) -> SparseMatrix {
    let (n, m) = (problem.n(), problem.m());
    let nn = n + m + 1;
    let mut triplets = Vec::with_capacity(2 * problem.a.nnz() + 2 * (n + m));
    for (i, j, v) in problem.a.iter_triplets() {
        triplets.push((j, n + i, v)); // A' block
        triplets.push((n + i, j, -v)); // -A block
    }
    for (j, &cj) in problem.c.iter().enumerate() {
        if cj != 0.0 {
            triplets.push((j, nn - 1, cj));
            triplets.push((nn - 1, j, -cj));
        }
    }
    for (i, &bi) in problem.b.iter().enumerate() {
        if bi != 0.0 {
            triplets.push((n + i, nn - 1, bi));
            triplets.push((nn - 1, n + i, -bi));
        }
    }
    SparseMatrix::from_triplets(nn, nn, &triplets).expect("valid Q triplets")
}

fn embedding_dims(z: &[f64], cones: &ConeSpec) -> Result<usize, ConicError> {
    let m = cones.total_dim();
    if z.len() < m + 2 {
        return Err(ConicError::DimensionMismatch(format!(
            "embedding point of length {} cannot hold cones of dimension {m}",
            z.len()
        )));
    }
    Ok(z.len() - m - 1)
}

/// The normalized residual map `N(z, Q) = ((Q - I) Pi + I)(z / |w|)`.
/// Its zeros with positive `w` are exactly the embedding points that
/// construct primal-dual optimal pairs.
pub fn residual_map(z: &[f64], q: &SparseMatrix, cones: &ConeSpec) -> Result<Vec<f64>, ConicError> {
    let n = embedding_dims(z, cones)?;
    if q.rows() != z.len() || q.cols() != z.len() {
        return Err(ConicError::DimensionMismatch(format!(
            "Q is {}x{}, expected {}",
            q.rows(),
            q.cols(),
            z.len()
        )));
    }
    let w = z[z.len() - 1];
    if w == 0.0 {
        return Err(ConicError::DegenerateEmbedding(w));
    }
    let zeta: Vec<f64> = z.iter().map(|v| v / w.abs()).collect();
    let pi = project_embedding(&zeta, n, cones)?;
    let mut out = vec![0.0; z.len()];
    q.matvec(&pi, &mut out);
    for i in 0..out.len() {
        out[i] += zeta[i] - pi[i];
    }
    Ok(out)
}

/// Everything needed to apply derivatives of the residual map at a solved
/// embedding point. Immutable; safe to share across threads.
pub struct EmbeddingDerivativeContext {
    pub q: SparseMatrix,
    pub z: Vec<f64>,
    pub omega: f64,
    pub dpi: EmbeddingJacobian,
    pub n: usize,
    pub m: usize,
}

impl EmbeddingDerivativeContext {
    pub fn new(problem: &ConicProblem, solution: &ConicSolution) -> Result<Self, ConicError> {
        if solution.omega <= 0.0 {
            return Err(ConicError::DegenerateEmbedding(solution.omega));
        }
        let (n, m) = (problem.n(), problem.m());
        let dpi = dproject_embedding(&solution.z, n, &problem.cones)?;
        Ok(Self {
            q: build_q(problem),
            z: solution.z.clone(),
            omega: solution.omega,
            dpi,
            n,
            m,
        })
    }
}

/// Jacobian of the residual map in `z` at a solution: the linear map
/// `u -> ((Q - I) DPi(z) u + u) / omega`. (Away from solutions the map has
/// an extra rank-one term that vanishes when `N(z, Q) = 0`.)
pub struct ResidualJacobian<'a> {
    ctx: &'a EmbeddingDerivativeContext,
}

impl ResidualJacobian<'_> {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let t = self.ctx.dpi.apply(u);
        let mut out = vec![0.0; u.len()];
        self.ctx.q.matvec(&t, &mut out);
        for i in 0..out.len() {
            out[i] = (out[i] - t[i] + u[i]) / self.ctx.omega;
        }
        out
    }

    /// Transpose product, using `Q' = -Q` and the symmetry of `DPi`.
    pub fn apply_t(&self, r: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; r.len()];
        self.ctx.q.matvec(r, &mut t);
        for (ti, ri) in t.iter_mut().zip(r) {
            *ti = -*ti - ri;
        }
        let mut out = self.ctx.dpi.apply(&t);
        for (oi, ri) in out.iter_mut().zip(r) {
            *oi = (*oi + ri) / self.ctx.omega;
        }
        out
    }
}

pub fn dz_residual(ctx: &EmbeddingDerivativeContext) -> ResidualJacobian<'_> {
    ResidualJacobian { ctx }
}

/// Maps an embedding point to the primal-dual triple:
/// `x = u/w`, `y = Pi_K*(v)/w`, `s = (Pi_K*(v) - v)/w`.
pub fn construct_solution(
    z: &[f64],
    omega: f64,
    cones: &ConeSpec,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ConicError> {
    let n = embedding_dims(z, cones)?;
    if omega <= 0.0 {
        return Err(ConicError::DegenerateEmbedding(omega));
    }
    let m = cones.total_dim();
    let x = z[..n].iter().map(|v| v / omega).collect();
    let mut proj = vec![0.0; m];
    project_cone_into(&z[n..n + m], cones, true, &mut proj);
    let y = proj.iter().map(|v| v / omega).collect();
    let s = proj
        .iter()
        .zip(&z[n..n + m])
        .map(|(p, v)| (p - v) / omega)
        .collect();
    Ok((x, y, s))
}

/// Assembles the dense `D_z N` matrix in column-major order:
/// `M = ((Q - I) DPi(z) + I) / w`.
fn assemble_dense_m(ctx: &EmbeddingDerivativeContext) -> Vec<f64> {
    let nn = ctx.n + ctx.m + 1;
    let mut dense = vec![0.0f64; nn * nn];
    let (row_idx, values) = ctx.q.entries();
    // adds ((Q - I) e_src) * coef to column dst
    let add_col = |dense: &mut [f64], dst: usize, src: usize, coef: f64| {
        if coef == 0.0 {
            return;
        }
        let col = &mut dense[dst * nn..(dst + 1) * nn];
        for k in ctx.q.col_range(src) {
            col[row_idx[k]] += values[k] * coef;
        }
        col[src] -= coef;
    };
    // free block: DPi = I
    for j in 0..ctx.n {
        add_col(&mut dense, j, j, 1.0);
    }
    // dual-cone block
    ctx.dpi.cone_jac.for_each_dense_block(|off, len, block| {
        for jj in 0..len {
            let dst = ctx.n + off + jj;
            if len == 1 || is_diagonal_block(block, len) {
                add_col(&mut dense, dst, dst, block[jj * len + jj]);
            } else {
                for k in 0..len {
                    add_col(&mut dense, dst, ctx.n + off + k, block[k * len + jj]);
                }
            }
        }
    });
    // w entry
    add_col(&mut dense, nn - 1, nn - 1, ctx.dpi.w_grad);
    // + I, then / w
    let inv_w = 1.0 / ctx.omega;
    for j in 0..nn {
        dense[j * nn + j] += 1.0;
    }
    for v in dense.iter_mut() {
        *v *= inv_w;
    }
    dense
}

fn is_diagonal_block(block: &[f64], len: usize) -> bool {
    for i in 0..len {
        for j in 0..len {
            if i != j && block[i * len + j] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Acceptable residual for trusting the LU path, relative to the gradient
/// magnitude.
const ADJOINT_RESIDUAL_TOL: f64 = 1e-8;
/// Smallest trustworthy ratio of extreme LU pivots.
const PIVOT_RATIO_MIN: f64 = 1e-10;
/// Damping used by the least-squares fallback (`damp^2 = 1e-12`).
const LSQR_DAMP: f64 = 1e-6;

/// Pulls a gradient in solution space back to the problem data through the
/// adjoint of the solution map. Only valid at optimal solutions.
pub fn vjp_solution_map(
    problem: &ConicProblem,
    solution: &ConicSolution,
    grads: &SolutionGradients,
) -> Result<ParamGradients, ConicError> {
    if solution.status != SolveStatus::Optimal {
        return Err(ConicError::NotOptimal(solution.status));
    }
    let (n, m) = (problem.n(), problem.m());
    if grads.dx.len() != n || grads.dy.len() != m || grads.ds.len() != m {
        return Err(ConicError::DimensionMismatch(
            "solution gradient shapes do not match the problem".into(),
        ));
    }
    let ctx = EmbeddingDerivativeContext::new(problem, solution)?;
    let nn = n + m + 1;
    let w = ctx.omega;

    // Pull back through D phi(z)': with D the dual-cone projection Jacobian
    // at z_v,
    //   g_u = dx / w
    //   g_v = (D (dy + ds) - ds) / w
    //   g_w = -(x.dx + y.dy + s.ds) / w
    let dual_jac = dproject_cone(&solution.z[n..n + m], &problem.cones, true)?;
    let mut sum_vs: Vec<f64> = grads.dy.iter().zip(&grads.ds).map(|(a, b)| a + b).collect();
    let dvs = dual_jac.apply(&sum_vs);
    sum_vs.clear();
    let mut g = vec![0.0; nn];
    for j in 0..n {
        g[j] = grads.dx[j] / w;
    }
    for i in 0..m {
        g[n + i] = (dvs[i] - grads.ds[i]) / w;
    }
    let inner: f64 = solution.x.iter().zip(&grads.dx).map(|(a, b)| a * b).sum::<f64>()
        + solution.y.iter().zip(&grads.dy).map(|(a, b)| a * b).sum::<f64>()
        + solution.s.iter().zip(&grads.ds).map(|(a, b)| a * b).sum::<f64>();
    g[nn - 1] = -inner / w;

    if g.iter().all(|&v| v == 0.0) {
        return Ok(ParamGradients {
            da: problem.a.map_values(|_, _, _| 0.0),
            db: vec![0.0; m],
            dc: vec![0.0; n],
        });
    }

    // Solve M' r = -g, preferring dense LU, falling back to damped LSQR.
    // The residual map is positively homogeneous of degree zero in z, so
    // M z = 0 at every solution: the adjoint system is rank-deficient along
    // the solution ray, and consistent because g = D phi' (...) is
    // orthogonal to z for the same reason. Null components of the solution
    // lie along pi and cancel in the gradient scatter, so we desingularize
    // with the rank-one term (z/||z||^2) pi', which selects the solution
    // with no ray component, and keep LSQR for any remaining degeneracy.
    let zeta: Vec<f64> = ctx.z.iter().map(|v| v / w.abs()).collect();
    let pi = project_embedding(&zeta, n, &problem.cones)?;
    let znorm2: f64 = ctx.z.iter().map(|v| v * v).sum();

    let jac = dz_residual(&ctx);
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut r: Option<Vec<f64>> = None;
    let mut dense = assemble_dense_m(&ctx);
    for j in 0..nn {
        let pj = pi[j];
        if pj == 0.0 {
            continue;
        }
        let col = &mut dense[j * nn..(j + 1) * nn];
        for (ci, zi) in col.iter_mut().zip(&ctx.z) {
            *ci += zi / znorm2 * pj;
        }
    }
    if let Ok(ipiv) = lapack::lu_factor(nn, &mut dense) {
        // A rank-deficient system still factors with tiny pivots and solves
        // with small backward error, but the solution then carries a huge
        // null-space component that ruins the gradient scatter. Gate on the
        // pivot ratio before trusting the LU path.
        let mut umin = f64::INFINITY;
        let mut umax = 0.0f64;
        for i in 0..nn {
            let d = dense[i * nn + i].abs();
            umin = umin.min(d);
            umax = umax.max(d);
        }
        if umin > PIVOT_RATIO_MIN * umax {
            let mut sol = rhs.clone();
            if lapack::lu_solve(nn, &dense, &ipiv, &mut sol, true).is_ok() {
                // independent residual check through operator products
                let mtr = jac.apply_t(&sol);
                let gnorm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let resid = mtr
                    .iter()
                    .zip(&rhs)
                    .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
                if resid <= ADJOINT_RESIDUAL_TOL * (1.0 + gnorm) {
                    r = Some(sol);
                } else {
                    log::debug!("adjoint LU residual {resid:.2e}; falling back to LSQR");
                }
            }
        } else {
            log::debug!(
                "adjoint system near singular (pivot ratio {:.2e}); using LSQR",
                umin / umax
            );
        }
    }
    let r = match r {
        Some(r) => r,
        None => {
            let apply = |v: &[f64]| jac.apply_t(v);
            let apply_tr = |v: &[f64]| jac.apply(v);
            lsqr(&apply, &apply_tr, &rhs, nn, LSQR_DAMP, 20 * nn, 1e-12)
        }
    };

    // dQ = r pi' with pi = Pi(z / |w|); scatter into the blocks of Q.
    let (pi_u, rest) = pi.split_at(n);
    let (pi_v, pi_w) = rest.split_at(m);
    let pi_w = pi_w[0];
    let (r_u, rest) = r.split_at(n);
    let (r_v, r_w) = rest.split_at(m);
    let r_w = r_w[0];

    let da = problem
        .a
        .map_values(|i, j, _| r_u[j] * pi_v[i] - r_v[i] * pi_u[j]);
    let db: Vec<f64> = (0..m).map(|i| r_v[i] * pi_w - r_w * pi_v[i]).collect();
    let dc: Vec<f64> = (0..n).map(|j| r_u[j] * pi_w - r_w * pi_u[j]).collect();
    Ok(ParamGradients { da, db, dc })
}

/// One-or-more Newton steps on the normalized residual map at a near-optimal
/// triple, used by the solver to sharpen the slowly converging tail of the
/// splitting iteration. Returns a refined `(x, y, s)` whenever the steps
/// reduce `||N(z, Q)||`; the caller re-checks the actual KKT residuals.
pub(crate) fn refine_triple(
    a: &SparseMatrix,
    b: &[f64],
    c: &[f64],
    cones: &ConeSpec,
    x: &[f64],
    y: &[f64],
    s: &[f64],
    steps: usize,
) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let problem = ConicProblem {
        a: a.clone(),
        b: b.to_vec(),
        c: c.to_vec(),
        cones: cones.clone(),
    };
    let (n, m) = (problem.n(), problem.m());
    let nn = n + m + 1;
    let q = build_q(&problem);
    let mut z: Vec<f64> = Vec::with_capacity(nn);
    z.extend_from_slice(x);
    for i in 0..m {
        z.push(y[i] - s[i]);
    }
    z.push(1.0);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..steps {
        let resid = residual_map(&z, &q, cones).ok()?;
        let rnorm = resid.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if best.as_ref().map_or(true, |(bn, _)| rnorm < *bn) {
            best = Some((rnorm, z.clone()));
        } else {
            break;
        }
        if rnorm == 0.0 {
            break;
        }
        let dpi = dproject_embedding(&z, n, cones).ok()?;
        let ctx = EmbeddingDerivativeContext {
            q: q.clone(),
            z: z.clone(),
            omega: z[nn - 1],
            dpi,
            n,
            m,
        };
        if ctx.omega <= 1e-9 {
            break;
        }
        let zeta: Vec<f64> = z.iter().map(|v| v / ctx.omega).collect();
        let pi = project_embedding(&zeta, n, cones).ok()?;
        let znorm2: f64 = z.iter().map(|v| v * v).sum();
        let mut dense = assemble_dense_m(&ctx);
        for j in 0..nn {
            let pj = pi[j];
            if pj == 0.0 {
                continue;
            }
            let col = &mut dense[j * nn..(j + 1) * nn];
            for (ci, zi) in col.iter_mut().zip(&z) {
                *ci += zi / znorm2 * pj;
            }
        }
        let rhs: Vec<f64> = resid.iter().map(|v| -v).collect();
        let znorm = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut dz = rhs.clone();
        let mut solved = false;
        if let Ok(ipiv) = lapack::lu_factor(nn, &mut dense) {
            let mut umin = f64::INFINITY;
            let mut umax = 0.0f64;
            for i in 0..nn {
                let d = dense[i * nn + i].abs();
                umin = umin.min(d);
                umax = umax.max(d);
            }
            if umin > 1e-7 * umax && lapack::lu_solve(nn, &dense, &ipiv, &mut dz, false).is_ok() {
                // a near-singular face makes the pure Newton step blow up;
                // only accept steps of sane magnitude
                let dznorm = dz.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                solved = dznorm <= 10.0 * (1.0 + znorm);
            }
        }
        if !solved {
            // degenerate face: take a damped minimum-norm least-squares step
            let jac = dz_residual(&ctx);
            let apply = |v: &[f64]| jac.apply(v);
            let apply_t = |v: &[f64]| jac.apply_t(v);
            dz = lsqr(&apply, &apply_t, &rhs, nn, LSQR_DAMP, 10 * nn, 1e-13);
        }
        // backtrack on the residual norm
        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..3 {
            let mut trial: Vec<f64> = z.iter().zip(&dz).map(|(zi, di)| zi + step * di).collect();
            let w = trial[nn - 1];
            if w > 1e-9 {
                for ti in trial.iter_mut() {
                    *ti /= w;
                }
                if let Ok(tr) = residual_map(&trial, &q, cones) {
                    let tnorm = tr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if tnorm < rnorm {
                        z = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.25;
        }
        if !accepted {
            break;
        }
    }
    let (_, z) = best?;
    construct_solution(&z, z[nn - 1], cones).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SolverSettings;
    use crate::solver::solve;

    fn lp_min_x_geq_1() -> ConicProblem {
        // min x s.t. x >= 1, written as -x + s = -1, s >= 0
        ConicProblem::new(
            SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
            vec![-1.0],
            vec![1.0],
            ConeSpec::new(0, 1, vec![]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn build_q_direct_substitution() {
        let p = ConicProblem::new(
            SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap(),
            vec![1.0],
            vec![1.0],
            ConeSpec::new(0, 1, vec![]).unwrap(),
        )
        .unwrap();
        let q = build_q(&p);
        let expect = [[0.0, 1.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, -1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q.get(i, j), expect[i][j]);
            }
        }
    }

    #[test]
    fn build_q_is_skew_symmetric() {
        let p = ConicProblem::new(
            SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, -3.0), (1, 1, 0.5)]).unwrap(),
            vec![1.0, -2.0],
            vec![0.5, 0.0],
            ConeSpec::new(1, 1, vec![]).unwrap(),
        )
        .unwrap();
        let q = build_q(&p);
        for (i, j, v) in q.iter_triplets() {
            assert_eq!(q.get(j, i), -v, "Q[{i},{j}]");
        }
    }

    #[test]
    fn build_q_zero_data_gives_zero_matrix() {
        let p = ConicProblem::new(
            SparseMatrix::zeros(2, 1),
            vec![0.0, 0.0],
            vec![0.0],
            ConeSpec::new(0, 2, vec![]).unwrap(),
        )
        .unwrap();
        let q = build_q(&p);
        assert_eq!(q.nnz(), 0);
        assert_eq!(q.rows(), 4);
    }

    #[test]
    fn vjp_matches_analytic_sensitivity_of_1d_lp() {
        let p = lp_min_x_geq_1();
        let sol = solve(&p, &SolverSettings::default().with_tolerance(1e-10)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-8);
        let grads = SolutionGradients::from_dx(vec![1.0], 1);
        let g = vjp_solution_map(&p, &sol, &grads).unwrap();
        // x*(b) = -b here, so the gradient of x* in b is -1; c plays no role.
        assert!((g.db[0] + 1.0).abs() < 1e-6, "db = {:?}", g.db);
        assert!(g.dc[0].abs() < 1e-6, "dc = {:?}", g.dc);
        assert!((g.da.get(0, 0) - 1.0).abs() < 1e-6, "da = {:?}", g.da.get(0, 0));
    }

    #[test]
    fn vjp_zero_gradient_gives_zero() {
        let p = lp_min_x_geq_1();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        let g = vjp_solution_map(&p, &sol, &SolutionGradients::zeros(1, 1)).unwrap();
        assert_eq!(g.db, vec![0.0]);
        assert_eq!(g.dc, vec![0.0]);
    }

    #[test]
    fn vjp_rejects_non_optimal() {
        let p = lp_min_x_geq_1();
        let mut settings = SolverSettings::default();
        settings.max_iters = 1;
        let sol = solve(&p, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::IterLimit);
        assert!(vjp_solution_map(&p, &sol, &SolutionGradients::zeros(1, 1)).is_err());
    }

    #[test]
    fn construct_solution_interior_dual_point_has_zero_slack() {
        let cones = ConeSpec::new(0, 2, vec![]).unwrap();
        // v strictly inside K* = R+^2
        let z = vec![1.0, 2.0, 3.0, 2.0]; // n = 1
        let (x, y, s) = construct_solution(&z, 2.0, &cones).unwrap();
        assert_eq!(x, vec![0.5]);
        assert_eq!(y, vec![1.0, 1.5]);
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn construct_solution_rejects_nonpositive_omega() {
        let cones = ConeSpec::new(0, 1, vec![]).unwrap();
        assert!(construct_solution(&[1.0, 1.0, 0.0], 0.0, &cones).is_err());
    }
}

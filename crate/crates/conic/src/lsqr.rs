//! LSQR for least-squares solves against linear operators.
//!
//! Used as the fallback for the derivative system when its LU factorization
//! is singular or untrustworthy (degenerate solutions make the system
//! rank-deficient; LSQR then returns a minimum-norm least-squares solution).
//! Damping is applied by augmenting the operator with `damp * I` rows, which
//! keeps the Golub-Kahan recurrence in its plain form.

/// Solves `min ||A x - b||^2 + damp^2 ||x||^2` given `A x` and `A' y`
/// products. `dim` is the length of `x`.
pub fn lsqr(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_t: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    dim: usize,
    damp: f64,
    max_iters: usize,
    tol: f64,
) -> Vec<f64> {
    let rows = b.len();
    if damp > 0.0 {
        // augmented system [A; damp I] x = [b; 0]
        let aug = |x: &[f64]| {
            let mut out = apply(x);
            out.extend(x.iter().map(|v| damp * v));
            out
        };
        let aug_t = |y: &[f64]| {
            let mut out = apply_t(&y[..rows]);
            for (o, yi) in out.iter_mut().zip(&y[rows..]) {
                *o += damp * yi;
            }
            out
        };
        let mut b_aug = b.to_vec();
        b_aug.resize(rows + dim, 0.0);
        return lsqr_plain(&aug, &aug_t, &b_aug, dim, max_iters, tol);
    }
    lsqr_plain(apply, apply_t, b, dim, max_iters, tol)
}

fn lsqr_plain(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_t: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    dim: usize,
    max_iters: usize,
    tol: f64,
) -> Vec<f64> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x = vec![0.0; dim];
    let mut u = b.to_vec();
    let mut beta = norm(&u);
    if beta == 0.0 {
        return x;
    }
    for ui in u.iter_mut() {
        *ui /= beta;
    }
    let mut v = apply_t(&u);
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        return x;
    }
    for vi in v.iter_mut() {
        *vi /= alpha;
    }
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let bnorm = beta;

    for _ in 0..max_iters {
        // Golub-Kahan bidiagonalization step
        let av = apply(&v);
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - alpha * *ui;
        }
        beta = norm(&u);
        if beta > 0.0 {
            for ui in u.iter_mut() {
                *ui /= beta;
            }
            let atu = apply_t(&u);
            for (vi, atui) in v.iter_mut().zip(&atu) {
                *vi = atui - beta * *vi;
            }
            alpha = norm(&v);
            if alpha > 0.0 {
                for vi in v.iter_mut() {
                    *vi /= alpha;
                }
            }
        }
        // plane rotation (rhobar keeps its sign; c may be negative)
        let rho = (rhobar * rhobar + beta * beta).sqrt();
        if rho == 0.0 {
            break;
        }
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for i in 0..dim {
            x[i] += t1 * w[i];
            w[i] = v[i] + t2 * w[i];
        }
        if phibar.abs() <= tol * bnorm {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_nonsingular() {
        // A = [[3, 1], [1, 2]]
        let a = [[3.0, 1.0], [1.0, 2.0]];
        let apply =
            move |x: &[f64]| vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let apply_t = apply;
        let sol = lsqr(&apply, &apply_t, &[9.0, 8.0], 2, 0.0, 200, 1e-14);
        assert!((sol[0] - 2.0).abs() < 1e-10);
        assert!((sol[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn consistent_singular_system_gets_min_norm_solution() {
        // A = [[1, 1], [2, 2]] (rank 1); b = [2, 4] is consistent.
        let apply = |x: &[f64]| vec![x[0] + x[1], 2.0 * (x[0] + x[1])];
        let apply_t = |y: &[f64]| vec![y[0] + 2.0 * y[1], y[0] + 2.0 * y[1]];
        let sol = lsqr(&apply, &apply_t, &[2.0, 4.0], 2, 1e-6, 400, 1e-14);
        // minimum-norm solution is x = (1, 1)
        assert!((sol[0] - 1.0).abs() < 1e-6, "{sol:?}");
        assert!((sol[1] - 1.0).abs() < 1e-6, "{sol:?}");
    }

    #[test]
    fn solves_nonsymmetric_system() {
        // A = [[0, 2, 0], [-2, 0, 1], [0, -1, 0]] (skew), b in range(A)
        let a = [[0.0, 2.0, 0.0], [-2.0, 0.0, 1.0], [0.0, -1.0, 0.0]];
        let apply = move |x: &[f64]| {
            (0..3)
                .map(|i| (0..3).map(|j| a[i][j] * x[j]).sum())
                .collect::<Vec<f64>>()
        };
        let apply_t = move |y: &[f64]| {
            (0..3)
                .map(|j| (0..3).map(|i| a[i][j] * y[i]).sum())
                .collect::<Vec<f64>>()
        };
        // x_true = (1, 2, 3) -> b = A x_true = (4, 1, -2)
        let b = vec![4.0, 1.0, -2.0];
        let sol = lsqr(&apply, &apply_t, &b, 3, 0.0, 100, 1e-14);
        let r = apply(&sol);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-8, "sol {sol:?} residual {r:?} vs {b:?}");
        }
    }

    #[test]
    fn damped_solution_shrinks_toward_zero() {
        let a = [[2.0, 0.0], [0.0, 0.5]];
        let apply =
            move |x: &[f64]| vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let apply_t = apply;
        let plain = lsqr(&apply, &apply_t, &[2.0, 1.0], 2, 0.0, 200, 1e-14);
        let damped = lsqr(&apply, &apply_t, &[2.0, 1.0], 2, 0.4, 200, 1e-14);
        let n0: f64 = plain.iter().map(|v| v * v).sum();
        let n1: f64 = damped.iter().map(|v| v * v).sum();
        assert!(n1 < n0, "damping must shrink the solution: {n0} vs {n1}");
        // analytic ridge solution: x_i = a_i b_i / (a_i^2 + damp^2)
        assert!((damped[0] - 2.0 * 2.0 / (4.0 + 0.16)).abs() < 1e-8);
        assert!((damped[1] - 0.5 * 1.0 / (0.25 + 0.16)).abs() < 1e-8);
    }
}

//! Cone layout, Euclidean projections onto it, and projection Jacobians.
//!
//! A [`ConeSpec`] describes a product cone `K = {0}^z x R+^l x SOC(d1) x ...`
//! laid out contiguously in that order. Projections come in a primal flavor
//! (onto `K`) and a dual flavor (onto `K*`, where the dual of the zero cone
//! is free space and the other blocks are self-dual).

use serde::{Deserialize, Serialize};

use crate::error::ConicError;

/// Distance from an SOC projection case boundary below which the derivative
/// choice is ambiguous; we take the "inside" branch and log.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub zero_dim: usize,
    pub nonneg_dim: usize,
    pub soc_dims: Vec<usize>,
}

impl ConeSpec {
    pub fn new(zero_dim: usize, nonneg_dim: usize, soc_dims: Vec<usize>) -> Result<Self, ConicError> {
        let spec = Self {
            zero_dim,
            nonneg_dim,
            soc_dims,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if let Some(&d) = self.soc_dims.iter().find(|&&d| d < 2) {
            return Err(ConicError::InvalidProblem(format!(
                "second-order cone blocks need dimension >= 2, got {d}"
            )));
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.zero_dim + self.nonneg_dim + self.soc_dims.iter().sum::<usize>()
    }
}

fn check_len(v: &[f64], cones: &ConeSpec) -> Result<(), ConicError> {
    if v.len() != cones.total_dim() {
        return Err(ConicError::DimensionMismatch(format!(
            "vector length {} does not match cone dimension {}",
            v.len(),
            cones.total_dim()
        )));
    }
    Ok(())
}

/// Euclidean projection of `v` onto `K` (or onto `K*` when `dual` is set),
/// block by block.
pub fn project_cone(v: &[f64], cones: &ConeSpec, dual: bool) -> Result<Vec<f64>, ConicError> {
    check_len(v, cones)?;
    let mut out = vec![0.0; v.len()];
    project_cone_into(v, cones, dual, &mut out);
    Ok(out)
}

pub(crate) fn project_cone_into(v: &[f64], cones: &ConeSpec, dual: bool, out: &mut [f64]) {
    let z = cones.zero_dim;
    if dual {
        // dual of {0} is all of R
        out[..z].copy_from_slice(&v[..z]);
    } else {
        out[..z].fill(0.0);
    }
    let mut off = z;
    for i in 0..cones.nonneg_dim {
        out[off + i] = v[off + i].max(0.0);
    }
    off += cones.nonneg_dim;
    for &d in &cones.soc_dims {
        project_soc(&v[off..off + d], &mut out[off..off + d]);
        off += d;
    }
}

/// Projection onto the second-order cone {(t, x) : ||x|| <= t}.
fn project_soc(v: &[f64], out: &mut [f64]) {
    let t = v[0];
    let norm = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm <= t {
        out.copy_from_slice(v);
    } else if norm <= -t {
        out.fill(0.0);
    } else {
        let alpha = 0.5 * (t + norm);
        out[0] = alpha;
        // norm > |t| >= 0 here, so norm > 0
        let scale = alpha / norm;
        for (o, &x) in out[1..].iter_mut().zip(&v[1..]) {
            *o = scale * x;
        }
    }
}

/// One block of a projection Jacobian. All blocks are symmetric.
#[derive(Debug, Clone)]
enum JacobianBlock {
    Zero { len: usize },
    Identity { len: usize },
    Diagonal { d: Vec<f64> },
    /// Boundary case of the SOC projection: the Jacobian is
    /// [[1/2, u'/2], [u/2, ((t+r)/2r) I - (t/2r) u u']] with u = x/||x||.
    Soc { t: f64, norm: f64, unit: Vec<f64> },
}

impl JacobianBlock {
    fn len(&self) -> usize {
        match self {
            JacobianBlock::Zero { len } | JacobianBlock::Identity { len } => *len,
            JacobianBlock::Diagonal { d } => d.len(),
            JacobianBlock::Soc { unit, .. } => unit.len() + 1,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            JacobianBlock::Zero { .. } => out.fill(0.0),
            JacobianBlock::Identity { .. } => out.copy_from_slice(x),
            JacobianBlock::Diagonal { d } => {
                for ((o, &xi), &di) in out.iter_mut().zip(x).zip(d) {
                    *o = di * xi;
                }
            }
            JacobianBlock::Soc { t, norm, unit } => {
                let a = x[0];
                let w = &x[1..];
                let uw: f64 = unit.iter().zip(w).map(|(u, wi)| u * wi).sum();
                out[0] = 0.5 * (a + uw);
                let c1 = (t + norm) / (2.0 * norm);
                let c2 = t / (2.0 * norm);
                for ((o, &wi), &ui) in out[1..].iter_mut().zip(w).zip(unit) {
                    *o = 0.5 * a * ui + c1 * wi - c2 * uw * ui;
                }
            }
        }
    }

    /// Writes the dense block into `dest` (a `len x len` row-major buffer).
    fn to_dense(&self, dest: &mut [f64]) {
        let n = self.len();
        dest.fill(0.0);
        match self {
            JacobianBlock::Zero { .. } => {}
            JacobianBlock::Identity { .. } => {
                for i in 0..n {
                    dest[i * n + i] = 1.0;
                }
            }
            JacobianBlock::Diagonal { d } => {
                for (i, &di) in d.iter().enumerate() {
                    dest[i * n + i] = di;
                }
            }
            JacobianBlock::Soc { t, norm, unit } => {
                let c1 = (t + norm) / (2.0 * norm);
                let c2 = t / (2.0 * norm);
                dest[0] = 0.5;
                for (j, &uj) in unit.iter().enumerate() {
                    dest[j + 1] = 0.5 * uj;
                    dest[(j + 1) * n] = 0.5 * uj;
                }
                for i in 0..unit.len() {
                    for j in 0..unit.len() {
                        let mut v = -c2 * unit[i] * unit[j];
                        if i == j {
                            v += c1;
                        }
                        dest[(i + 1) * n + (j + 1)] = v;
                    }
                }
            }
        }
    }
}

/// Jacobian of [`project_cone`] at a point, applicable as a linear map.
/// Projection Jacobians are symmetric, so `apply` also serves as the
/// transpose product.
#[derive(Debug, Clone)]
pub struct ConeJacobian {
    blocks: Vec<(usize, JacobianBlock)>,
    dim: usize,
}

impl ConeJacobian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (off, block) in &self.blocks {
            let len = block.len();
            block.apply(&x[*off..*off + len], &mut out[*off..*off + len]);
        }
    }

    /// Visits each block as (offset, dense row-major contents). Used when
    /// assembling the dense derivative system.
    pub(crate) fn for_each_dense_block(&self, mut f: impl FnMut(usize, usize, &[f64])) {
        let mut buf = Vec::new();
        for (off, block) in &self.blocks {
            let len = block.len();
            buf.resize(len * len, 0.0);
            block.to_dense(&mut buf);
            f(*off, len, &buf);
        }
    }
}

/// Jacobian of the cone projection at `v` (dual cone when `dual` is set).
///
/// On SOC case boundaries (`||x|| == |t|`) and at zeros of a nonnegative
/// block the projection is not differentiable; the Jacobian of the branch
/// containing the cone is used and a warning is logged.
pub fn dproject_cone(v: &[f64], cones: &ConeSpec, dual: bool) -> Result<ConeJacobian, ConicError> {
    check_len(v, cones)?;
    let mut blocks = Vec::new();
    let mut boundary_hits = 0usize;
    let z = cones.zero_dim;
    if z > 0 {
        blocks.push((
            0,
            if dual {
                JacobianBlock::Identity { len: z }
            } else {
                JacobianBlock::Zero { len: z }
            },
        ));
    }
    let mut off = z;
    if cones.nonneg_dim > 0 {
        let d: Vec<f64> = v[off..off + cones.nonneg_dim]
            .iter()
            .map(|&vi| {
                if vi.abs() < BOUNDARY_EPS {
                    boundary_hits += 1;
                }
                if vi >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        blocks.push((off, JacobianBlock::Diagonal { d }));
        off += cones.nonneg_dim;
    }
    for &dim in &cones.soc_dims {
        let t = v[off];
        let norm = v[off + 1..off + dim].iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - t.abs()).abs() < BOUNDARY_EPS {
            boundary_hits += 1;
        }
        let block = if norm <= t {
            JacobianBlock::Identity { len: dim }
        } else if norm <= -t {
            JacobianBlock::Zero { len: dim }
        } else {
            let unit: Vec<f64> = v[off + 1..off + dim].iter().map(|&x| x / norm).collect();
            JacobianBlock::Soc { t, norm, unit }
        };
        blocks.push((off, block));
        off += dim;
    }
    if boundary_hits > 0 {
        log::warn!(
            "projection Jacobian evaluated within {BOUNDARY_EPS:.0e} of a \
             nondifferentiability boundary at {boundary_hits} block(s); using the inside branch"
        );
    }
    Ok(ConeJacobian { blocks, dim: v.len() })
}

/// Projection onto the embedding cone `R^n x K* x R+` used by the
/// homogeneous self-dual embedding. `z` has length `n + m + 1`.
pub fn project_embedding(z: &[f64], n: usize, cones: &ConeSpec) -> Result<Vec<f64>, ConicError> {
    let m = cones.total_dim();
    if z.len() != n + m + 1 {
        return Err(ConicError::DimensionMismatch(format!(
            "embedding point has length {}, expected {}",
            z.len(),
            n + m + 1
        )));
    }
    let mut out = vec![0.0; z.len()];
    project_embedding_into(z, n, cones, &mut out);
    Ok(out)
}

pub(crate) fn project_embedding_into(z: &[f64], n: usize, cones: &ConeSpec, out: &mut [f64]) {
    let m = cones.total_dim();
    out[..n].copy_from_slice(&z[..n]);
    project_cone_into(&z[n..n + m], cones, true, &mut out[n..n + m]);
    out[n + m] = z[n + m].max(0.0);
}

/// Jacobian of [`project_embedding`]: identity on the first `n` entries, the
/// dual-cone projection Jacobian on the middle block, and a 0/1 factor on the
/// last entry.
#[derive(Debug, Clone)]
pub struct EmbeddingJacobian {
    pub n: usize,
    pub cone_jac: ConeJacobian,
    pub w_grad: f64,
}

impl EmbeddingJacobian {
    pub fn dim(&self) -> usize {
        self.n + self.cone_jac.dim() + 1
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = self.cone_jac.dim();
        out[..n].copy_from_slice(&x[..n]);
        self.cone_jac.apply_into(&x[n..n + m], &mut out[n..n + m]);
        out[n + m] = self.w_grad * x[n + m];
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }
}

pub fn dproject_embedding(
    z: &[f64],
    n: usize,
    cones: &ConeSpec,
) -> Result<EmbeddingJacobian, ConicError> {
    let m = cones.total_dim();
    if z.len() != n + m + 1 {
        return Err(ConicError::DimensionMismatch(format!(
            "embedding point has length {}, expected {}",
            z.len(),
            n + m + 1
        )));
    }
    Ok(EmbeddingJacobian {
        n,
        cone_jac: dproject_cone(&z[n..n + m], cones, true)?,
        w_grad: if z[n + m] >= 0.0 { 1.0 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc3() -> ConeSpec {
        ConeSpec::new(0, 0, vec![3]).unwrap()
    }

    #[test]
    fn soc_point_inside_is_fixed() {
        let p = project_cone(&[1.0, 0.0, 0.0], &soc3(), false).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn soc_polar_interior_projects_to_origin() {
        // ||x|| = 1 <= 2 = -t
        let p = project_cone(&[-2.0, 1.0, 0.0], &soc3(), false).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0]);
    }

    /// Oracle for the boundary branch: minimize ||u - v||^2 over the cone with
    /// a generic penalty-method descent, independent of the closed form.
    fn project_soc_numeric(v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; v.len()];
        u[0] = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt().max(v[0]).max(1.0);
        u[1..].copy_from_slice(&v[1..]);
        let mut mu = 1.0;
        for _ in 0..60 {
            // gradient descent on ||u-v||^2 + mu * max(0, ||x|| - t)^2
            for _ in 0..2000 {
                let norm = u[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
                let viol = (norm - u[0]).max(0.0);
                let mut g: Vec<f64> = u.iter().zip(v).map(|(ui, vi)| 2.0 * (ui - vi)).collect();
                if viol > 0.0 && norm > 0.0 {
                    g[0] += -2.0 * mu * viol;
                    for i in 1..u.len() {
                        g[i] += 2.0 * mu * viol * u[i] / norm;
                    }
                }
                let step = 0.05 / (1.0 + mu);
                for (ui, gi) in u.iter_mut().zip(&g) {
                    *ui -= step * gi;
                }
            }
            mu *= 4.0;
        }
        // final clean-up: force feasibility by lifting t
        let norm = u[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
        if u[0] < norm {
            u[0] = norm;
        }
        u
    }

    #[test]
    fn soc_boundary_case_matches_numeric_minimizer() {
        let v = [0.0, 3.0, 4.0];
        let p = project_cone(&v, &soc3(), false).unwrap();
        // frozen from the numeric oracle below (and the closed form)
        assert!((p[0] - 2.5).abs() < 1e-12);
        assert!((p[1] - 1.5).abs() < 1e-12);
        assert!((p[2] - 2.0).abs() < 1e-12);
        let q = project_soc_numeric(&v);
        for (pi, qi) in p.iter().zip(&q) {
            assert!((pi - qi).abs() < 1e-3, "closed form {p:?} vs numeric {q:?}");
        }
    }

    #[test]
    fn zero_cone_primal_and_dual() {
        let cones = ConeSpec::new(2, 0, vec![]).unwrap();
        assert_eq!(project_cone(&[1.0, -2.0], &cones, false).unwrap(), vec![0.0, 0.0]);
        assert_eq!(project_cone(&[1.0, -2.0], &cones, true).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(project_cone(&[1.0], &soc3(), false).is_err());
        assert!(dproject_cone(&[1.0], &soc3(), false).is_err());
    }

    #[test]
    fn nonneg_jacobian_is_active_set_diagonal() {
        let cones = ConeSpec::new(0, 2, vec![]).unwrap();
        let jac = dproject_cone(&[3.0, -2.0], &cones, false).unwrap();
        assert_eq!(jac.apply(&[1.0, 1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn soc_jacobian_inside_is_identity() {
        let jac = dproject_cone(&[2.0, 0.5, 0.5], &soc3(), false).unwrap();
        let x = [0.3, -0.7, 0.2];
        let y = jac.apply(&x);
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(a, b);
        }
    }

    fn fd_jacobian_column(v: &[f64], cones: &ConeSpec, dual: bool, j: usize, h: f64) -> Vec<f64> {
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[j] += h;
        vm[j] -= h;
        let pp = project_cone(&vp, cones, dual).unwrap();
        let pm = project_cone(&vm, cones, dual).unwrap();
        pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }

    #[test]
    fn soc_jacobian_matches_finite_differences_at_boundary_case() {
        let cones = soc3();
        let v = [0.0, 3.0, 4.0];
        let jac = dproject_cone(&v, &cones, false).unwrap();
        for j in 0..3 {
            let fd = fd_jacobian_column(&v, &cones, false, j, 1e-6);
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let an = jac.apply(&e);
            for (a, b) in an.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5, "col {j}: {an:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_at_random_points() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let cones = ConeSpec::new(2, 3, vec![3, 4]).unwrap();
        let dim = cones.total_dim();
        for case in 0..100 {
            let dual = case % 2 == 0;
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // skip points too close to a projection boundary for FD accuracy
            let mut off = cones.zero_dim;
            let mut near = v[off..off + cones.nonneg_dim].iter().any(|x| x.abs() < 1e-3);
            off += cones.nonneg_dim;
            for &d in &cones.soc_dims {
                let t = v[off];
                let norm = v[off + 1..off + d].iter().map(|a| a * a).sum::<f64>().sqrt();
                if (norm - t.abs()).abs() < 1e-3 {
                    near = true;
                }
                off += d;
            }
            if near {
                continue;
            }
            let jac = dproject_cone(&v, &cones, dual).unwrap();
            for j in 0..dim {
                let fd = fd_jacobian_column(&v, &cones, dual, j, 1e-6);
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                let an = jac.apply(&e);
                for (a, b) in an.iter().zip(&fd) {
                    let denom = 1.0_f64.max(b.abs());
                    assert!(
                        (a - b).abs() / denom <= 1e-4,
                        "case {case} col {j}: analytic {a} vs fd {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_satisfies_moreau() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let cones = ConeSpec::new(1, 2, vec![3, 5]).unwrap();
        let dim = cones.total_dim();
        for _ in 0..200 {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = project_cone(&v, &cones, false).unwrap();
            let pp = project_cone(&p, &cones, false).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                assert!((a - b).abs() <= 1e-12);
            }
            // Moreau: v = P_K(v) - P_K°(-v) with K° the polar cone, and
            // P_K°(-v) = -(v - P_K(v)) is equivalent to P_K*(-v) = P_K(v) - v.
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let pd = project_cone(&neg, &cones, true).unwrap();
            let mut compl = 0.0;
            for i in 0..dim {
                let resid = v[i] - (p[i] - pd[i]);
                assert!(resid.abs() <= 1e-10, "moreau residual {resid}");
                compl += (v[i] - p[i]) * p[i];
            }
            assert!(compl.abs() <= 1e-10, "complementarity {compl}");
        }
    }
}

//! Ruiz equilibration of the constraint matrix.
//!
//! Rows belonging to one second-order cone block must share a scaling factor
//! or the block would no longer be a scaled copy of the cone; the block takes
//! the largest of its row norms.

use crate::cone::ConeSpec;
use crate::sparse::SparseMatrix;

const RUIZ_PASSES: usize = 10;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

pub struct Scaling {
    /// Row scaling, length m. All ones when equilibration is disabled.
    pub d: Vec<f64>,
    /// Column scaling, length n.
    pub e: Vec<f64>,
}

impl Scaling {
    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            d: vec![1.0; m],
            e: vec![1.0; n],
        }
    }
}

/// Groups row norms so each SOC block shares one value (its max).
fn unify_soc_rows(norms: &mut [f64], cones: &ConeSpec) {
    let mut off = cones.zero_dim + cones.nonneg_dim;
    for &dim in &cones.soc_dims {
        let m = norms[off..off + dim].iter().copied().fold(0.0, f64::max);
        norms[off..off + dim].fill(m);
        off += dim;
    }
}

pub fn ruiz(a: &SparseMatrix, cones: &ConeSpec) -> Scaling {
    let (m, n) = (a.rows(), a.cols());
    let mut scaling = Scaling::identity(m, n);
    if a.nnz() == 0 {
        return scaling;
    }
    let mut work = a.clone();
    for _ in 0..RUIZ_PASSES {
        let mut rn = work.row_inf_norms();
        unify_soc_rows(&mut rn, cones);
        let cn = work.col_inf_norms();
        let dr: Vec<f64> = rn
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        let dc: Vec<f64> = cn
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        work = work.scale_rows_cols(&dr, &dc);
        for (di, ri) in scaling.d.iter_mut().zip(&dr) {
            *di = (*di * ri).clamp(SCALE_MIN, SCALE_MAX);
        }
        for (ei, ci) in scaling.e.iter_mut().zip(&dc) {
            *ei = (*ei * ci).clamp(SCALE_MIN, SCALE_MAX);
        }
    }
    scaling
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrated_norms_near_one() {
        let a = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 100.0), (1, 0, 0.01), (1, 1, 4.0), (2, 1, 0.5)],
        )
        .unwrap();
        let cones = ConeSpec::new(3, 0, vec![]).unwrap();
        let s = ruiz(&a, &cones);
        let scaled = a.scale_rows_cols(&s.d, &s.e);
        for v in scaled.row_inf_norms() {
            assert!(v > 0.2 && v < 5.0, "row norm {v}");
        }
        for v in scaled.col_inf_norms() {
            assert!(v > 0.2 && v < 5.0, "col norm {v}");
        }
    }

    #[test]
    fn soc_block_rows_share_a_factor() {
        let a = SparseMatrix::from_triplets(
            4,
            2,
            &[(0, 0, 1.0), (1, 0, 50.0), (2, 1, 0.1), (3, 1, 2.0)],
        )
        .unwrap();
        let cones = ConeSpec::new(1, 0, vec![3]).unwrap();
        let s = ruiz(&a, &cones);
        assert!((s.d[1] - s.d[2]).abs() < 1e-12);
        assert!((s.d[2] - s.d[3]).abs() < 1e-12);
    }
}
